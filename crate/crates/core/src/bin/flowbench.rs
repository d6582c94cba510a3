fn main() {
    std::process::exit(flowbench::cli::run(std::env::args_os()));
}
