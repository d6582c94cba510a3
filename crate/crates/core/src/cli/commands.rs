use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::counterintuitive::{read_model_pools, sweep_matrix, Pool, DEFAULT_GAMMA_GRID};
use crate::data::{
    fit_scaler, load_csv, load_model, read_csv, save_model, write_csv as write_dataset, LabeledDataset, ModelBundle,
};
use crate::error::{Error, Result};
use crate::flow::{train_flow, TrainConfig};
use crate::intrinsic_dim::{robustness_suite, Aggregation, Estimator, IdMethod, RobustnessSpec};
use crate::numeric::matrix::DataMatrix;
use crate::numeric::rng::{derive_seed, Rng};
use crate::scoring::{
    evaluate, rank_table, run_trial, typicality_from_nll, write_scores, AurocMatrix, LikelihoodTest, RankTable,
    TrialSpec, DEFAULT_FAIL_THRESHOLD,
};
use crate::synth::{
    ar_covariance, gen_anomaly_suite, gen_gaussian_pair, AnomalySuiteSpec, GaussianSpec, IsotropicPair,
    DEFAULT_SWEEP_DIMS,
};
use crate::theory::{
    concentration_check, desk_sweep_config, dimension_sweep_auroc, empirical_likelihood_gap, gap_condition_scalar,
    norm_variance_ratio, Density, SweepSpec,
};

use super::output::{ensure_dir, ensure_parent, json_bytes, num, write_csv, write_json, CsvBuf};
use super::{
    dataset_name, BenchmarkCmd, CliError, CounterCmd, EvalCmd, IdCmd, PairArgs, ScoreCmd, SynthCmd, TrainCmd,
    VerifyCmd,
};

type CliResult = std::result::Result<(), CliError>;

fn normal_rows(x: &DataMatrix, labels: &[u8]) -> Result<DataMatrix> {
    let idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 0).collect();
    if idx.is_empty() {
        return Err(Error::TooFewNormals(0));
    }
    Ok(x.select_rows(&idx))
}

pub(super) fn train(c: &TrainCmd, prov: &Value) -> CliResult {
    let cfg = c.flow.train_config(TrainConfig::default(), c.seed)?;
    let (x, labels) = read_csv(&c.data, &c.label_col)?;
    let x = match &labels {
        Some(l) => normal_rows(&x, l)?,
        None => x,
    };
    let scaler = fit_scaler(&x, c.scaler)?;
    let xs = scaler.apply(&x)?;
    let (model, history) = train_flow(c.flow.kind, &xs, &cfg)?;
    let entropy = model.mean_nll(&xs)?;
    let mut bundle = ModelBundle::new(model, scaler, cfg);
    bundle.train_entropy = Some(entropy);
    bundle.provenance = Some(prov.clone());
    ensure_parent(&c.out)?;
    save_model(&c.out, &bundle)?;
    println!(
        "trained {} on {} rows x {} features, final epoch NLL {:.4}",
        c.flow.kind,
        x.rows(),
        x.cols(),
        history.nll.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

pub(super) fn score(c: &ScoreCmd, prov: &Value) -> CliResult {
    let bundle = load_model(&c.model)?;
    let (x, labels) = read_csv(&c.data, &c.label_col)?;
    let nll: Vec<f64> = bundle.log_likelihood(&x)?.into_iter().map(|v| -v).collect();
    let scores = match c.test {
        LikelihoodTest::Slt => nll,
        LikelihoodTest::Typicality => {
            let h = bundle
                .train_entropy
                .ok_or_else(|| CliError::Usage("model bundle carries no training entropy".into()))?;
            typicality_from_nll(&nll, h)
        }
    };
    let mut buf = Vec::new();
    write_scores(&mut buf, &scores, labels.as_deref())?;
    write_csv(&c.out, &buf, prov)?;
    Ok(())
}

fn read_scores(path: &Path) -> Result<(Vec<f64>, Vec<u8>)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let si = col("score").ok_or_else(|| Error::MissingLabelColumn("score".into()))?;
    let li = col("label").ok_or_else(|| Error::MissingLabelColumn("label".into()))?;
    let (mut scores, mut labels) = (Vec::new(), Vec::new());
    for (r, rec) in reader.records().enumerate() {
        let rec = rec?;
        let bad = |col: usize, message: String| Error::ParseError { row: r + 1, col: col + 1, message };
        let s = rec.get(si).unwrap_or("");
        scores.push(s.parse::<f64>().map_err(|_| bad(si, format!("`{s}` is not a number")))?);
        let l = rec.get(li).unwrap_or("");
        labels.push(match l {
            "0" => 0,
            "1" => 1,
            _ => return Err(bad(li, format!("label `{l}` is not 0 or 1"))),
        });
    }
    if scores.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok((scores, labels))
}

pub(super) fn eval(c: &EvalCmd, prov: &Value) -> CliResult {
    let (scores, labels) = read_scores(&c.data)?;
    let report = evaluate(&scores, &labels, c.seed)?;
    emit_json(c.out.as_deref(), &report, prov)?;
    Ok(())
}

fn emit_json(out: Option<&Path>, body: &impl Serialize, prov: &Value) -> Result<()> {
    match out {
        Some(p) => write_json(p, body, prov),
        None => {
            let bytes = json_bytes(body, prov)?;
            print!("{}", String::from_utf8_lossy(&bytes));
            Ok(())
        }
    }
}

#[derive(Clone, Debug, Serialize)]
struct TrialRow {
    dataset: String,
    trial: usize,
    seed: u64,
    auroc: f64,
    auprc: f64,
}

fn bench_trial(ds: &LabeledDataset, trial: usize, c: &BenchmarkCmd, cfg: &TrainConfig) -> Result<TrialRow> {
    let seed = c.seed.wrapping_add(trial as u64);
    let spec = TrialSpec {
        kind: c.flow.kind,
        scaler: c.scaler,
        test: c.test,
        contamination: c.contamination,
    };
    let rep = run_trial(ds, &spec, cfg, seed)?;
    Ok(TrialRow {
        dataset: ds.name.clone(),
        trial,
        seed,
        auroc: rep.auroc,
        auprc: rep.auprc,
    })
}

/// Mean and population standard deviation.
pub(crate) fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt())
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))
}

pub(super) fn benchmark(c: &BenchmarkCmd, prov: &Value) -> CliResult {
    if c.trials == 0 {
        return Err(CliError::Usage("--trials must be positive".into()));
    }
    if c.meta.is_none() && c.pool.iter().any(|p| *p != Pool::All) {
        return Err(CliError::Usage("--meta is required for the shallow and deep pools".into()));
    }
    let cfg = c.flow.train_config(TrainConfig::default(), c.seed)?;
    let mut datasets = Vec::with_capacity(c.data.len());
    for p in &c.data {
        let mut ds = load_csv(p, &c.label_col)?;
        ds.name = dataset_name(p);
        datasets.push(ds);
    }
    let cells: Vec<(usize, usize)> = (0..datasets.len())
        .flat_map(|d| (0..c.trials).map(move |t| (d, t)))
        .collect();
    let results: Vec<Result<TrialRow>> = thread_pool(c.jobs)?.install(|| {
        cells
            .par_iter()
            .map(|&(d, t)| bench_trial(&datasets[d], t, c, &cfg))
            .collect()
    });
    let mut rows = Vec::with_capacity(results.len());
    for (r, &(d, t)) in results.into_iter().zip(&cells) {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => {
                eprintln!("dataset `{}`, trial {t} failed", datasets[d].name);
                return Err(e.into());
            }
        }
    }

    ensure_dir(&c.out)?;
    let mut trials = CsvBuf::new(&["dataset", "trial", "seed", "auroc", "auprc"])?;
    for r in &rows {
        trials.row(&[r.dataset.clone(), r.trial.to_string(), r.seed.to_string(), num(r.auroc), num(r.auprc)])?;
    }
    write_csv(&c.out.join("trials.csv"), &trials.finish()?, prov)?;

    let mut summary =
        CsvBuf::new(&["dataset", "trials", "auroc_mean", "auroc_std", "auprc_mean", "auprc_std"])?;
    let mut means = Vec::new();
    for ds in &datasets {
        let mine: Vec<&TrialRow> = rows.iter().filter(|r| r.dataset == ds.name).collect();
        let (am, asd) = mean_std(&mine.iter().map(|r| r.auroc).collect::<Vec<_>>());
        let (pm, psd) = mean_std(&mine.iter().map(|r| r.auprc).collect::<Vec<_>>());
        summary.row(&[ds.name.clone(), mine.len().to_string(), num(am), num(asd), num(pm), num(psd)])?;
        println!("{}: AUROC {am:.4} ± {asd:.4}, AUPRC {pm:.4} ± {psd:.4}", ds.name);
        means.push((ds.name.clone(), am));
    }
    write_csv(&c.out.join("summary.csv"), &summary.finish()?, prov)?;

    if let Some(path) = &c.matrix {
        let merged = merge_matrix(&AurocMatrix::read_csv(path)?, &c.target, &means)?;
        write_csv(&c.out.join("aurocs.csv"), &matrix_csv(&merged)?, prov)?;
        let table = rank_table(&merged, DEFAULT_FAIL_THRESHOLD)?;
        write_csv(&c.out.join("ranks.csv"), &ranks_csv(&table)?, prov)?;
        let tags = match &c.meta {
            Some(m) => read_model_pools(m)?,
            None => HashMap::new(),
        };
        let report = sweep_matrix(&merged, &c.target, &tags, &c.pool, None, &DEFAULT_GAMMA_GRID)?;
        write_json(&c.out.join("verdicts.json"), &report, prov)?;
    }
    Ok(())
}

/// Rows of `ext` for the benchmarked datasets, with `target` replaced by
/// the measured means.
fn merge_matrix(ext: &AurocMatrix, target: &str, means: &[(String, f64)]) -> Result<AurocMatrix> {
    let keep: Vec<usize> = (0..ext.models.len()).filter(|&j| ext.models[j] != target).collect();
    let mut models: Vec<String> = keep.iter().map(|&j| ext.models[j].clone()).collect();
    models.push(target.to_owned());
    let (mut datasets, mut values) = (Vec::new(), Vec::new());
    for (name, m) in means {
        if let Some(d) = ext.datasets.iter().position(|x| x == name) {
            let mut row: Vec<f64> = keep.iter().map(|&j| ext.values[d][j]).collect();
            row.push(*m);
            datasets.push(name.clone());
            values.push(row);
        }
    }
    if datasets.is_empty() {
        return Err(Error::IncompleteMatrix("no benchmarked dataset appears in the matrix".into()));
    }
    AurocMatrix::new(models, datasets, values)
}

fn matrix_csv(m: &AurocMatrix) -> Result<Vec<u8>> {
    let mut header = vec!["dataset"];
    header.extend(m.models.iter().map(String::as_str));
    let mut buf = CsvBuf::new(&header)?;
    for (name, row) in m.datasets.iter().zip(&m.values) {
        let mut rec = vec![name.clone()];
        rec.extend(row.iter().map(|v| num(*v)));
        buf.row(&rec)?;
    }
    buf.finish()
}

#[derive(Serialize)]
struct RankSummary {
    model: String,
    avg_rank: f64,
    top2_ratio: f64,
    fail_ratio: f64,
}

fn rank_summary(t: &RankTable) -> Vec<RankSummary> {
    (0..t.models.len())
        .map(|j| RankSummary {
            model: t.models[j].clone(),
            avg_rank: t.avg_rank[j],
            top2_ratio: t.top2_ratio[j],
            fail_ratio: t.fail_ratio[j],
        })
        .collect()
}

fn ranks_csv(t: &RankTable) -> Result<Vec<u8>> {
    let mut buf = CsvBuf::new(&["model", "avg_rank", "top2_ratio", "fail_ratio"])?;
    for r in rank_summary(t) {
        buf.row(&[r.model, num(r.avg_rank), num(r.top2_ratio), num(r.fail_ratio)])?;
    }
    buf.finish()
}

pub(super) fn id(c: &IdCmd, prov: &Value) -> CliResult {
    let (estimator, param) = match c.method {
        IdMethod::TwoNn => (Estimator::TwoNn { discard_top: c.discard }, c.discard),
        IdMethod::Mle => (
            Estimator::Mle {
                k: c.k,
                aggregation: Aggregation::MacKay,
            },
            c.k as f64,
        ),
    };
    let spec = RobustnessSpec {
        ratios: c.subsample.clone(),
        scalers: c.scaler.clone(),
        estimator,
    };
    let inputs: Vec<(String, DataMatrix)> = match &c.data {
        Some(p) => vec![(dataset_name(p), read_csv(p, &c.label_col)?.0)],
        None => c
            .rho
            .iter()
            .enumerate()
            .map(|(i, &rho)| {
                let g = GaussianSpec::full(vec![0.0; c.dims], &ar_covariance(c.dims, rho)?)?;
                let x = g.sample(&mut Rng::new(derive_seed(c.seed, i as u64)), c.n)?;
                Ok((format!("ar_d{}_rho{rho}", c.dims), x))
            })
            .collect::<Result<_>>()?,
    };
    let mut buf = CsvBuf::new(&["dataset", "method", "param", "subsample", "scaler", "estimate", "d_ratio"])?;
    for (name, x) in &inputs {
        for cell in robustness_suite(x, &spec, c.seed)? {
            buf.row(&[
                name.clone(),
                c.method.to_string(),
                num(param),
                num(cell.ratio),
                cell.scaler.to_string(),
                num(cell.estimate.value),
                num(cell.estimate.value / x.cols() as f64),
            ])?;
        }
    }
    write_csv(&c.out, &buf.finish()?, prov)?;
    Ok(())
}

fn dataset_bytes(x: &DataMatrix, labels: Option<&[u8]>, label_col: &str) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_dataset(&mut buf, x, labels, label_col)?;
    Ok(buf)
}

fn pair(args: &PairArgs) -> IsotropicPair {
    IsotropicPair {
        mu_p: args.mu_p,
        sigma_p: args.sigma_p,
        mu_q: args.mu_q,
        sigma_q: args.sigma_q,
    }
}

pub(super) fn synth(c: &SynthCmd, prov: &Value) -> CliResult {
    match c {
        SynthCmd::Ar(a) => {
            let g = GaussianSpec::full(vec![0.0; a.dims], &ar_covariance(a.dims, a.rho)?)?;
            let x = g.sample(&mut Rng::new(a.seed), a.n)?;
            write_csv(&a.out, &dataset_bytes(&x, None, "label")?, prov)?;
        }
        SynthCmd::Pair(a) => {
            let p = GaussianSpec::isotropic(a.dims, a.pair.mu_p, a.pair.sigma_p)?;
            let q = GaussianSpec::isotropic(a.dims, a.pair.mu_q, a.pair.sigma_q)?;
            let (train, test) = gen_gaussian_pair(&p, &q, a.n_train, a.n_test, a.seed)?;
            ensure_dir(&a.out)?;
            write_csv(&a.out.join("train.csv"), &dataset_bytes(&train, None, "label")?, prov)?;
            write_csv(
                &a.out.join("test.csv"),
                &dataset_bytes(&test.features, Some(&test.labels), "label")?,
                prov,
            )?;
        }
        SynthCmd::Anomaly(a) => {
            let (x, _) = read_csv(&a.data, &a.label_col)?;
            let spec = AnomalySuiteSpec {
                kind: a.anomaly_type,
                alpha: a.alpha,
                n_normal: a.n_normal,
                n_anomaly: a.n_anomaly,
                n_components: a.components,
                seed: a.seed,
            };
            let ds = gen_anomaly_suite(&x, &spec)?;
            write_csv(&a.out, &dataset_bytes(&ds.features, Some(&ds.labels), &a.label_col)?, prov)?;
        }
    }
    Ok(())
}

pub(super) fn verify(c: &VerifyCmd, prov: &Value) -> CliResult {
    match c {
        VerifyCmd::Gap(a) => {
            let bundle = a.model.as_deref().map(load_model).transpose()?;
            let mut out = Vec::new();
            for (i, &d) in a.dims.iter().enumerate() {
                let p = GaussianSpec::isotropic(d, a.pair.mu_p, a.pair.sigma_p)?;
                let q = GaussianSpec::isotropic(d, a.pair.mu_q, a.pair.sigma_q)?;
                let density = match &bundle {
                    Some(b) => Density::Bundle(b),
                    None => Density::Gaussian(&p),
                };
                let report = empirical_likelihood_gap(&density, &p, &q, a.n, derive_seed(a.seed, i as u64))?;
                let condition = gap_condition_scalar(d, a.pair.mu_p, a.pair.sigma_p, a.pair.mu_q, a.pair.sigma_q)?;
                out.push(json!({ "report": report, "condition": condition }));
            }
            write_json(&a.out, &json!({ "gaps": out }), prov)?;
        }
        VerifyCmd::Concentration(a) => {
            let mut buf = CsvBuf::new(&["d", "t", "n", "empirical", "bound", "se", "within_bound"])?;
            let mut stream = 0u64;
            for &d in &a.dims {
                for &f in &a.t_frac {
                    let r = concentration_check(d, f * d as f64, a.n, derive_seed(a.seed, stream))?;
                    stream += 1;
                    buf.row(&[
                        d.to_string(),
                        num(r.t),
                        r.n.to_string(),
                        num(r.empirical),
                        num(r.bound),
                        num(r.se),
                        r.within_bound.to_string(),
                    ])?;
                }
            }
            write_csv(&a.out, &buf.finish()?, prov)?;
        }
        VerifyCmd::Norms(a) => {
            let mut buf = CsvBuf::new(&["d", "ratio", "se"])?;
            for r in norm_variance_ratio(&a.dims, a.n, a.seed)? {
                buf.row(&[r.d.to_string(), num(r.ratio), num(r.se)])?;
            }
            write_csv(&a.out, &buf.finish()?, prov)?;
        }
        VerifyCmd::Sweep(a) => {
            let cfg = a.flow.train_config(desk_sweep_config(), a.seed)?;
            let spec = SweepSpec {
                kind: a.flow.kind,
                pair: pair(&a.pair),
                dims: if a.full_grid { DEFAULT_SWEEP_DIMS.to_vec() } else { a.dims.clone() },
                n_train: a.n_train,
                n_test_each: a.n_test,
                bins: a.bins,
                jobs: a.jobs.max(1),
            };
            let points = dimension_sweep_auroc(&spec, &cfg, a.seed)?;
            ensure_dir(&a.out)?;
            let mut sweep = CsvBuf::new(&["d", "seed", "auroc", "auprc", "train_nll", "norm_w1"])?;
            let mut hist = CsvBuf::new(&["d", "quantity", "bin_left", "bin_right", "count_normal", "count_anomaly"])?;
            for p in &points {
                sweep.row(&[
                    p.dim.to_string(),
                    p.seed.to_string(),
                    num(p.auroc),
                    num(p.auprc),
                    num(p.final_train_nll),
                    num(p.norm_w1),
                ])?;
                for h in &p.histograms.histograms {
                    for b in 0..h.bins() {
                        hist.row(&[
                            p.dim.to_string(),
                            h.quantity.clone(),
                            num(h.edges[b]),
                            num(h.edges[b + 1]),
                            h.count_normal[b].to_string(),
                            h.count_anomaly[b].to_string(),
                        ])?;
                    }
                }
                println!("d = {}: AUROC {:.4}, latent-norm W1 {:.4}", p.dim, p.auroc, p.norm_w1);
            }
            write_csv(&a.out.join("sweep.csv"), &sweep.finish()?, prov)?;
            write_csv(&a.out.join("histograms.csv"), &hist.finish()?, prov)?;
        }
    }
    Ok(())
}

pub(super) fn counterintuitive(c: &CounterCmd, prov: &Value) -> CliResult {
    let matrix = AurocMatrix::read_csv(&c.matrix)?;
    let tags = match &c.meta {
        Some(p) => read_model_pools(p)?,
        None if c.pool.iter().any(|p| *p != Pool::All) => {
            return Err(CliError::Usage("--meta is required for the shallow and deep pools".into()))
        }
        None => HashMap::new(),
    };
    let gammas = c
        .gamma_grid
        .clone()
        .unwrap_or_else(|| if c.sweep { DEFAULT_GAMMA_GRID.to_vec() } else { vec![0.3] });
    let betas = c.beta_grid.clone().or_else(|| (!c.sweep).then(|| vec![0.5]));
    let report = sweep_matrix(&matrix, &c.target, &tags, &c.pool, betas.as_deref(), &gammas)?;
    let ranks = rank_table(&matrix, c.fail_threshold).ok().map(|t| rank_summary(&t));
    let body = json!({ "verdicts": report, "ranks": ranks });
    emit_json(c.out.as_deref(), &body, prov)?;
    if c.out.is_some() {
        println!(
            "{} of {} (dataset, pool, β, γ) cells counterintuitive",
            report.n_counterintuitive(),
            report.records.len()
        );
    }
    Ok(())
}
