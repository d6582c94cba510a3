//! Ranks and relative-failure verdicts over the bundled AUROC table.
//!
//! cargo run --example rank_and_verdicts -- [matrix.csv models.csv]

use std::path::PathBuf;

use flowbench::counterintuitive::{read_model_pools, sweep_matrix, Pool, DEFAULT_GAMMA_GRID};
use flowbench::scoring::{rank_table, AurocMatrix, DEFAULT_FAIL_THRESHOLD};

fn main() -> flowbench::Result<()> {
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let mut args = std::env::args().skip(1);
    let matrix_path = args.next().map_or(fixtures.join("paper_tabular_auroc.csv"), PathBuf::from);
    let meta_path = args.next().map_or(fixtures.join("paper_models.csv"), PathBuf::from);

    let matrix = AurocMatrix::read_csv(&matrix_path)?;
    let table = rank_table(&matrix, DEFAULT_FAIL_THRESHOLD)?;
    let mut order: Vec<usize> = (0..table.models.len()).collect();
    order.sort_by(|&a, &b| table.avg_rank[a].total_cmp(&table.avg_rank[b]));
    println!("{:<12} {:>8} {:>6} {:>6}", "model", "avg_rank", "top2", "fail");
    for m in order {
        println!(
            "{:<12} {:>8.3} {:>6.3} {:>6.3}",
            table.models[m], table.avg_rank[m], table.top2_ratio[m], table.fail_ratio[m]
        );
    }

    let tags = read_model_pools(&meta_path)?;
    let report = sweep_matrix(&matrix, "NF-SLT", &tags, &[Pool::All, Pool::Shallow, Pool::Deep], None, &DEFAULT_GAMMA_GRID)?;
    println!("\n{} of {} cells counterintuitive", report.n_counterintuitive(), report.records.len());
    for (pool, flip) in &report.pool_flip_frequency {
        println!("{pool:?}: mean flip frequency {flip:.3}");
    }
    Ok(())
}
