//! Decides whether a likelihood model's loss on a dataset is a
//! "counterintuitive" failure: most competitors beat it (fraction above `β`)
//! and every one that beats it does so by more than `γ` AUROC.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scoring::AurocMatrix;

/// Threshold comparisons treat values within this distance as equal, so
/// that e.g. `0.9 - 0.6` does not count as exceeding `0.3`.
pub const THRESHOLD_TOLERANCE: f64 = 1e-12;

pub const DEFAULT_GAMMA_GRID: [f64; 4] = [0.3, 0.4, 0.5, 0.6];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Competitor {
    pub name: String,
    pub auroc: f64,
}

impl Competitor {
    pub fn new(name: impl Into<String>, auroc: f64) -> Self {
        Self {
            name: name.into(),
            auroc,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub auroc0: f64,
    pub competitors: Vec<Competitor>,
    pub beta: f64,
    pub gamma: f64,
    /// Indices into `competitors` with AUROC strictly above `auroc0`.
    pub outperform: Vec<usize>,
    pub fraction: f64,
    pub condition1: bool,
    /// Smallest winning margin; `None` when nobody outperforms.
    pub min_gap: Option<f64>,
    pub condition2: bool,
    pub counterintuitive: bool,
}

fn exceeds(value: f64, threshold: f64) -> bool {
    value > threshold + THRESHOLD_TOLERANCE
}

pub fn detect(auroc0: f64, competitors: &[Competitor], beta: f64, gamma: f64) -> Result<Verdict> {
    if competitors.is_empty() {
        return Err(Error::NoCompetitors);
    }
    for (name, v) in [("beta", beta), ("gamma", gamma)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidArgument(format!("{name} = {v} outside [0, 1]")));
        }
    }
    let outperform: Vec<usize> = (0..competitors.len())
        .filter(|&i| competitors[i].auroc > auroc0)
        .collect();
    let fraction = outperform.len() as f64 / competitors.len() as f64;
    let min_gap = outperform
        .iter()
        .map(|&i| competitors[i].auroc - auroc0)
        .min_by(f64::total_cmp);
    let condition1 = exceeds(fraction, beta);
    let condition2 = min_gap.is_some_and(|g| exceeds(g, gamma));
    Ok(Verdict {
        auroc0,
        competitors: competitors.to_vec(),
        beta,
        gamma,
        outperform,
        fraction,
        condition1,
        min_gap,
        condition2,
        counterintuitive: condition1 && condition2,
    })
}

/// `{(⌈k/2⌉ + 1)/k, ..., k/k}`: strict majorities of a `k`-model pool.
pub fn default_beta_grid(k: usize) -> Vec<f64> {
    (k.div_ceil(2) + 1..=k).map(|i| i as f64 / k as f64).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub betas: Vec<f64>,
    pub gammas: Vec<f64>,
    /// Row-major over `betas` × `gammas`.
    pub cells: Vec<Verdict>,
    /// Majority verdict; a tie counts as `false`.
    pub modal: bool,
    pub flip_frequency: f64,
}

impl SweepResult {
    pub fn cell(&self, beta_idx: usize, gamma_idx: usize) -> &Verdict {
        &self.cells[beta_idx * self.gammas.len() + gamma_idx]
    }

    pub fn n_counterintuitive(&self) -> usize {
        self.cells.iter().filter(|v| v.counterintuitive).count()
    }
}

pub fn sweep(auroc0: f64, competitors: &[Competitor], betas: &[f64], gammas: &[f64]) -> Result<SweepResult> {
    if betas.is_empty() || gammas.is_empty() {
        return Err(Error::InvalidArgument("empty threshold grid".into()));
    }
    let mut cells = Vec::with_capacity(betas.len() * gammas.len());
    for &b in betas {
        for &g in gammas {
            cells.push(detect(auroc0, competitors, b, g)?);
        }
    }
    let n_true = cells.iter().filter(|v| v.counterintuitive).count();
    let modal = 2 * n_true > cells.len();
    let flips = cells.iter().filter(|v| v.counterintuitive != modal).count();
    Ok(SweepResult {
        betas: betas.to_vec(),
        gammas: gammas.to_vec(),
        flip_frequency: flips as f64 / cells.len() as f64,
        modal,
        cells,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pool {
    All,
    Shallow,
    Deep,
}

impl FromStr for Pool {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "all" => Ok(Self::All),
            "shallow" => Ok(Self::Shallow),
            "deep" => Ok(Self::Deep),
            _ => Err(Error::InvalidArgument(format!("unknown pool `{s}`"))),
        }
    }
}

impl fmt::Display for Pool {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::All => "all",
            Self::Shallow => "shallow",
            Self::Deep => "deep",
        })
    }
}

/// Model name → pool tag, read from a `name,pool` CSV.
pub fn read_model_pools(path: &Path) -> Result<HashMap<String, String>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let mut out = HashMap::new();
    for rec in reader.records() {
        let rec = rec?;
        if let (Some(name), Some(pool)) = (rec.get(0), rec.get(1)) {
            out.insert(name.to_owned(), pool.to_ascii_lowercase());
        }
    }
    Ok(out)
}

/// Competitors whose tag matches `pool`; `All` keeps everyone.
pub fn pool_filter(competitors: &[Competitor], tags: &HashMap<String, String>, pool: Pool) -> Result<Vec<Competitor>> {
    let kept: Vec<Competitor> = match pool {
        Pool::All => competitors.to_vec(),
        _ => {
            let want = pool.to_string();
            competitors
                .iter()
                .filter(|c| tags.get(&c.name).is_some_and(|t| *t == want))
                .cloned()
                .collect()
        }
    };
    if kept.is_empty() {
        return Err(Error::EmptyPool(pool.to_string()));
    }
    Ok(kept)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub dataset: String,
    pub pool: Pool,
    pub beta: f64,
    pub gamma: f64,
    pub fraction: f64,
    pub min_gap: Option<f64>,
    pub condition1: bool,
    pub condition2: bool,
    pub counterintuitive: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub dataset: String,
    pub pool: Pool,
    pub n_cells: usize,
    pub n_counterintuitive: usize,
    pub flip_frequency: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerdictsReport {
    pub target: String,
    pub gammas: Vec<f64>,
    pub records: Vec<VerdictRecord>,
    pub summaries: Vec<DatasetSummary>,
    /// Flip frequency per pool, averaged over datasets.
    pub pool_flip_frequency: Vec<(Pool, f64)>,
}

impl VerdictsReport {
    pub fn n_counterintuitive(&self) -> usize {
        self.records.iter().filter(|r| r.counterintuitive).count()
    }
}

/// Sweeps every dataset of `matrix` with `target` as the likelihood model and
/// each pool's members as competitors. The β grid is rebuilt per pool size
/// unless `betas` is given.
pub fn sweep_matrix(
    matrix: &AurocMatrix,
    target: &str,
    tags: &HashMap<String, String>,
    pools: &[Pool],
    betas: Option<&[f64]>,
    gammas: &[f64],
) -> Result<VerdictsReport> {
    let t = matrix
        .model_index(target)
        .ok_or_else(|| Error::InvalidArgument(format!("target model `{target}` not in matrix")))?;
    let mut records = Vec::new();
    let mut summaries = Vec::new();
    let mut pool_flip_frequency = Vec::new();
    for &pool in pools {
        let mut total_flip = 0.0;
        for (d, row) in matrix.values.iter().enumerate() {
            let all: Vec<Competitor> = matrix
                .models
                .iter()
                .zip(row)
                .enumerate()
                .filter(|(j, _)| *j != t)
                .map(|(_, (m, &v))| Competitor::new(m.clone(), v))
                .collect();
            let comps = pool_filter(&all, tags, pool)?;
            if let Some(c) = comps.iter().find(|c| !c.auroc.is_finite()) {
                return Err(Error::IncompleteMatrix(format!("{} / {}", matrix.datasets[d], c.name)));
            }
            let grid = match betas {
                Some(b) => b.to_vec(),
                None => default_beta_grid(comps.len()),
            };
            let res = sweep(row[t], &comps, &grid, gammas)?;
            for v in &res.cells {
                records.push(VerdictRecord {
                    dataset: matrix.datasets[d].clone(),
                    pool,
                    beta: v.beta,
                    gamma: v.gamma,
                    fraction: v.fraction,
                    min_gap: v.min_gap,
                    condition1: v.condition1,
                    condition2: v.condition2,
                    counterintuitive: v.counterintuitive,
                });
            }
            total_flip += res.flip_frequency;
            summaries.push(DatasetSummary {
                dataset: matrix.datasets[d].clone(),
                pool,
                n_cells: res.cells.len(),
                n_counterintuitive: res.n_counterintuitive(),
                flip_frequency: res.flip_frequency,
            });
        }
        pool_flip_frequency.push((pool, total_flip / matrix.datasets.len() as f64));
    }
    Ok(VerdictsReport {
        target: target.to_owned(),
        gammas: gammas.to_vec(),
        records,
        summaries,
        pool_flip_frequency,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn comps(v: &[f64]) -> Vec<Competitor> {
        v.iter().enumerate().map(|(i, &a)| Competitor::new(format!("m{i}"), a)).collect()
    }

    #[test]
    fn clear_failure_is_counterintuitive() {
        let v = detect(0.064, &comps(&[0.90, 0.93, 0.95, 0.97, 0.99]), 0.5, 0.3).unwrap();
        assert!(v.condition1 && v.condition2 && v.counterintuitive);
        assert_eq!(v.fraction, 1.0);
        assert!((v.min_gap.unwrap() - 0.836).abs() < 1e-12);
    }

    #[test]
    fn best_model_never_counterintuitive() {
        let v = detect(0.99, &comps(&[0.5, 0.7, 0.99]), 0.0, 0.0).unwrap();
        assert!(v.outperform.is_empty());
        assert_eq!(v.min_gap, None);
        assert!(!v.counterintuitive);
    }

    #[test]
    fn small_gap_fails_second_condition() {
        let v = detect(0.4652, &comps(&[0.4852, 0.60, 0.70, 0.80]), 0.5, 0.3).unwrap();
        assert!(v.condition1);
        assert!(!v.condition2);
        assert!(!v.counterintuitive);
    }

    #[test]
    fn no_competitors() {
        assert!(matches!(detect(0.5, &[], 0.5, 0.3), Err(Error::NoCompetitors)));
    }

    #[test]
    fn thresholds_are_strict() {
        // exactly half outperform: fraction 0.5 does not exceed β = 0.5
        let v = detect(0.5, &comps(&[0.9, 0.1]), 0.5, 0.0).unwrap();
        assert!(!v.condition1);
        // gap of exactly 0.3, computed with rounding error
        let v = detect(0.6, &comps(&[0.9]), 0.0, 0.3).unwrap();
        assert!(!v.condition2);
    }

    #[test]
    fn beta_grid_for_thirteen() {
        let g = default_beta_grid(13);
        assert_eq!(g.len(), 6);
        assert_eq!(g[0], 8.0 / 13.0);
        assert_eq!(*g.last().unwrap(), 1.0);
        assert_eq!(default_beta_grid(6), vec![4.0 / 6.0, 5.0 / 6.0, 1.0]);
        assert_eq!(default_beta_grid(7)[0], 5.0 / 7.0);
    }

    #[test]
    fn single_cell_grid() {
        let r = sweep(0.1, &comps(&[0.9, 0.95]), &[0.5], &[0.3]).unwrap();
        assert_eq!(r.flip_frequency, 0.0);
        assert!(r.modal);
    }

    #[test]
    fn flips_where_gap_crosses_gamma() {
        // min gap 0.45: true for γ ∈ {0.3, 0.4}, false for {0.5, 0.6}
        let r = sweep(0.5, &comps(&[0.95, 0.97, 0.99]), &[0.5], &DEFAULT_GAMMA_GRID).unwrap();
        let flags: Vec<bool> = r.cells.iter().map(|v| v.counterintuitive).collect();
        assert_eq!(flags, vec![true, true, false, false]);
        assert_eq!(r.flip_frequency, 0.5);
        // three of four false: modal false, one flip
        let r = sweep(0.5, &comps(&[0.85, 0.97, 0.99]), &[0.5], &DEFAULT_GAMMA_GRID).unwrap();
        assert!(!r.modal);
        assert_eq!(r.flip_frequency, 0.25);
    }

    #[test]
    fn pools() {
        let c = vec![
            Competitor::new("PCA", 0.5),
            Competitor::new("LOF", 0.6),
            Competitor::new("GOAD", 0.7),
        ];
        let tags: HashMap<String, String> = [("PCA", "shallow"), ("LOF", "shallow"), ("GOAD", "deep")]
            .into_iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        assert_eq!(pool_filter(&c, &tags, Pool::Shallow).unwrap().len(), 2);
        assert_eq!(pool_filter(&c, &tags, Pool::Deep).unwrap().len(), 1);
        assert_eq!(pool_filter(&c, &tags, Pool::All).unwrap(), c);
        assert!(matches!(pool_filter(&c, &HashMap::new(), Pool::Deep), Err(Error::EmptyPool(_))));
    }

    #[test]
    fn matrix_sweep_records() {
        let m = AurocMatrix::new(
            vec!["A".into(), "B".into(), "T".into()],
            vec!["d0".into(), "d1".into()],
            vec![vec![0.9, 0.95, 0.1], vec![0.5, 0.6, 0.9]],
        )
        .unwrap();
        let tags: HashMap<String, String> =
            [("A", "shallow"), ("B", "deep")].into_iter().map(|(a, b)| (a.into(), b.into())).collect();
        let r = sweep_matrix(&m, "T", &tags, &[Pool::All], None, &DEFAULT_GAMMA_GRID).unwrap();
        // k = 2 → β grid {1}: fraction can never exceed 1
        assert_eq!(r.records.len(), 2 * 4);
        assert_eq!(r.n_counterintuitive(), 0);
        let r = sweep_matrix(&m, "T", &tags, &[Pool::All], Some(&[0.5]), &DEFAULT_GAMMA_GRID).unwrap();
        assert_eq!(r.summaries[0].n_counterintuitive, 4);
        assert_eq!(r.summaries[1].n_counterintuitive, 0);
        assert!(sweep_matrix(&m, "X", &tags, &[Pool::All], None, &[0.3]).is_err());
    }

    fn brute(auroc0: f64, c: &[f64]) -> bool {
        c.iter().any(|&a| a > auroc0)
    }

    proptest! {
        #[test]
        fn raising_thresholds_never_creates_verdicts(
            a0 in 0.0f64..1.0,
            c in prop::collection::vec(0.0f64..1.0, 1..15),
            b in 0.0f64..1.0, db in 0.0f64..0.5,
            g in 0.0f64..1.0, dg in 0.0f64..0.5,
        ) {
            let lo = detect(a0, &comps(&c), b, g).unwrap();
            let hi = detect(a0, &comps(&c), (b + db).min(1.0), (g + dg).min(1.0)).unwrap();
            prop_assert!(!hi.counterintuitive || lo.counterintuitive);
            prop_assert!(!lo.counterintuitive || (lo.condition1 && lo.condition2));
        }

        #[test]
        fn order_invariant(a0 in 0.0f64..1.0, mut c in prop::collection::vec(0.0f64..1.0, 1..15), b in 0.0f64..1.0, g in 0.0f64..1.0) {
            let v1 = detect(a0, &comps(&c), b, g).unwrap();
            c.reverse();
            let v2 = detect(a0, &comps(&c), b, g).unwrap();
            prop_assert_eq!(v1.counterintuitive, v2.counterintuitive);
            prop_assert_eq!(v1.min_gap, v2.min_gap);
            prop_assert_eq!(v1.fraction, v2.fraction);
        }

        #[test]
        fn weak_competitor_keeps_gap(a0 in 0.1f64..1.0, c in prop::collection::vec(0.0f64..1.0, 1..15), frac in 0.0f64..=1.0) {
            let mut more = c.clone();
            more.push(a0 * frac);
            let v1 = detect(a0, &comps(&c), 0.0, 0.0).unwrap();
            let v2 = detect(a0, &comps(&more), 0.0, 0.0).unwrap();
            prop_assert_eq!(v1.min_gap, v2.min_gap);
            prop_assert!(v2.fraction <= v1.fraction);
        }

        #[test]
        fn zero_thresholds_match_any_outperformer(a0 in 0.0f64..1.0, c in prop::collection::vec(0.0f64..1.0, 1..15)) {
            let v = detect(a0, &comps(&c), 0.0, 0.0).unwrap();
            // gaps below the comparison tolerance are treated as ties
            if v.min_gap.map_or(true, |g| g > 1e-9) {
                prop_assert_eq!(v.counterintuitive, brute(a0, &c));
            }
        }
    }
}
