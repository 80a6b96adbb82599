//! Experiment drivers. Each one runs a seeded Monte Carlo sweep (or a
//! single dataset pass), collects signed estimation errors per series,
//! and reports absolute-error CDFs on one shared threshold grid.
//!
//! Seed discipline: series `i` (position in the k sweep; the reference
//! series comes last) uses `seeds::derive(master, i)`; trial `t` within a
//! series uses `derive(series_seed, t)`; within a trial, stream 0 seeds
//! the hash family, stream 1 the noise draw, stream 2 the data draw.
//! Dataset runs use streams `0x10 + attempt` for family (re)seeding and
//! stream 1 for noise. Rayon only reorders work, never output: trials
//! are collected in index order, so a config + master seed pins every
//! byte of the CSV.

use std::fmt;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use pcs_core::analysis::ErrorReport;
use pcs_core::datasets::Dataset;
use pcs_core::privacy::{self, NoiseSpec};
use pcs_core::seeds;
use pcs_core::{Error, HashFamily, Result, SketchParams, SparseVector, Sketch, Variant};

/// CDF grid steps shared by every series of a run (rows per series =
/// steps + 1, from 0 to the largest absolute error seen).
const CDF_GRID: usize = 400;

/// One labeled error sample within an experiment.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    /// Standard deviation of the signed errors behind the report.
    pub sd: f64,
    /// `(trials where every queried entry was exact, total trials)`;
    /// only the sparse-recovery experiment fills this in.
    pub exact_trials: Option<(u64, u64)>,
    pub report: ErrorReport,
}

/// A finished experiment: config echo plus per-series error reports.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    meta: Vec<(String, String)>,
    series: Vec<Series>,
}

impl ExperimentOutput {
    /// Assemble reports on a common threshold grid from
    /// `(label, exact-trial counts, signed errors)` triples.
    fn build(
        meta: Vec<(String, String)>,
        named: Vec<(String, Option<(u64, u64)>, Vec<f64>)>,
    ) -> Result<Self> {
        let mut max = 0.0f64;
        for (_, _, errs) in &named {
            for &e in errs {
                max = max.max(e.abs());
            }
        }
        let thresholds: Vec<f64> = if max == 0.0 {
            vec![0.0]
        } else {
            (0..=CDF_GRID)
                .map(|i| max * i as f64 / CDF_GRID as f64)
                .collect()
        };
        let mut series = Vec::with_capacity(named.len());
        for (label, exact_trials, signed) in named {
            let sd = signed_sd(&signed);
            let abs: Vec<f64> = signed.iter().map(|e| e.abs()).collect();
            let report = ErrorReport::from_errors(abs, &thresholds)?;
            series.push(Series {
                label,
                sd,
                exact_trials,
                report,
            });
        }
        Ok(ExperimentOutput { meta, series })
    }

    pub fn meta(&self) -> &[(String, String)] {
        &self.meta
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn series(&self) -> &[Series] {
        &self.series
    }

    pub fn series_named(&self, label: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.label == label)
    }

    /// Self-describing CSV: `# key=value` config echo, a `# series ...`
    /// summary line per series, then long-format
    /// `series,threshold,cum_prob` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (key, value) in &self.meta {
            let _ = writeln!(out, "# {}={}", key, value);
        }
        for s in &self.series {
            let sum = s.report.summary();
            let _ = write!(
                out,
                "# series {}: n={} sd={} median_abs_err={} q90_abs_err={} q95_abs_err={} max_abs_err={}",
                s.label,
                s.report.errors().len(),
                s.sd,
                sum.median,
                sum.q90,
                sum.q95,
                sum.max
            );
            if let Some((exact, total)) = s.exact_trials {
                let _ = write!(out, " exact_trials={}/{}", exact, total);
            }
            out.push('\n');
        }
        out.push_str("series,threshold,cum_prob\n");
        for s in &self.series {
            for &(threshold, cum_prob) in s.report.cdf() {
                let _ = writeln!(out, "{},{},{}", s.label, threshold, cum_prob);
            }
        }
        out
    }
}

fn signed_sd(sample: &[f64]) -> f64 {
    if sample.len() < 2 {
        return 0.0;
    }
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    let var = sample.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    var.sqrt()
}

fn check_k_set(k_set: &[usize]) -> Result<()> {
    if k_set.is_empty() {
        return Err(Error::InvalidParameter("k set must be nonempty".into()));
    }
    for &k in k_set {
        if k == 0 || k % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "repetition counts must be odd and positive, got {}",
                k
            )));
        }
    }
    Ok(())
}

fn check_trials(trials: usize) -> Result<()> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    Ok(())
}

fn fmt_k_set(k_set: &[usize]) -> String {
    k_set
        .iter()
        .map(|k| k.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn median_of(mut v: Vec<f64>) -> f64 {
    v.sort_unstable_by(f64::total_cmp);
    v[v.len() / 2]
}

/// `none` for a zero scale, Gaussian otherwise.
fn noise_spec(sigma: f64) -> Result<NoiseSpec> {
    if sigma == 0.0 {
        Ok(NoiseSpec::none())
    } else {
        NoiseSpec::gaussian(sigma)
    }
}

/// How the per-cell noise scale is chosen for an experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoisePolicy {
    /// Fixed per-cell scale (0 = no noise).
    Sigma(f64),
    /// Gaussian-mechanism calibration at the sketch's sensitivity
    /// (event-level for synthetic vectors, basket-level for datasets).
    Budget { epsilon: f64, delta: f64 },
}

impl fmt::Display for NoisePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoisePolicy::Sigma(s) => write!(f, "sigma={}", s),
            NoisePolicy::Budget { epsilon, delta } => {
                write!(f, "eps={} delta={}", epsilon, delta)
            }
        }
    }
}

/// Median of k independent draws from N(0, k), per k: the idealized
/// setting where a released value is exact and only the privacy noise
/// (scaled so the total budget is k-independent) remains.
pub fn run_median_normals(k_set: &[usize], trials: usize, seed: u64) -> Result<ExperimentOutput> {
    check_k_set(k_set)?;
    check_trials(trials)?;
    let mut named = Vec::new();
    for (si, &k) in k_set.iter().enumerate() {
        let series_seed = seeds::derive(seed, si as u64);
        let normal = Normal::new(0.0, (k as f64).sqrt()).expect("positive scale");
        let signed: Vec<f64> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(series_seed, t as u64));
                median_of((0..k).map(|_| normal.sample(&mut rng)).collect())
            })
            .collect();
        named.push((format!("k={}", k), None, signed));
    }
    let meta = vec![
        ("experiment".into(), "median_normals".into()),
        ("k_set".into(), fmt_k_set(k_set)),
        ("trials".into(), trials.to_string()),
        ("seed".into(), seed.to_string()),
    ];
    ExperimentOutput::build(meta, named)
}

/// Median estimator when every row estimate is exact and each cell
/// carries N(0, k) noise. A one-coordinate input realizes the "no
/// collisions possible" regime through the real pipeline, so this
/// exercises sketch + noise + estimator rather than a side simulation.
/// The `ref_gaussian` series is the N(0,1) yardstick.
pub fn run_zero_variance(k_set: &[usize], trials: usize, seed: u64) -> Result<ExperimentOutput> {
    check_k_set(k_set)?;
    check_trials(trials)?;
    let x = SparseVector::zero(1)?;
    let mut named = Vec::new();
    let mut meta = vec![
        ("experiment".into(), "zero_variance".into()),
        ("k_set".into(), fmt_k_set(k_set)),
        ("trials".into(), trials.to_string()),
        ("seed".into(), seed.to_string()),
    ];
    for (si, &k) in k_set.iter().enumerate() {
        let series_seed = seeds::derive(seed, si as u64);
        let sigma = (k as f64).sqrt();
        let spec = NoiseSpec::gaussian(sigma)?;
        let signed: Result<Vec<f64>> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let trial_seed = seeds::derive(series_seed, t as u64);
                let params = SketchParams::new(1, k, 2, seeds::derive(trial_seed, 0))?;
                let family = Arc::new(HashFamily::build(params)?);
                let mut sketch = Sketch::of_vector(&x, family, Variant::CountSketch)?;
                privacy::privatize(&mut sketch, &spec, seeds::derive(trial_seed, 1))?;
                sketch.estimate_median(0)
            })
            .collect();
        meta.push((format!("sigma[k={}]", k), sigma.to_string()));
        meta.push((
            format!("rho[k={}]", k),
            privacy::zcdp_of(sigma, k)?.to_string(),
        ));
        named.push((format!("k={}", k), None, signed?));
    }
    let ref_seed = seeds::derive(seed, k_set.len() as u64);
    let unit = Normal::new(0.0, 1.0).expect("positive scale");
    let reference: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(ref_seed, t as u64));
            unit.sample(&mut rng)
        })
        .collect();
    named.push(("ref_gaussian".into(), None, reference));
    ExperimentOutput::build(meta, named)
}

/// t-sparse vectors with a constant entry value: fresh support and hash
/// family per trial, noise per the policy (a budget calibrates at the
/// single-coordinate sensitivity), median estimates over the support.
/// `ref_gaussian` is the Gaussian mechanism applied to the raw entries —
/// sensitivity 1 under a budget, the same sigma under a direct policy.
#[allow(clippy::too_many_arguments)]
pub fn run_sparse(
    t: usize,
    value: f64,
    d: usize,
    k_set: &[usize],
    b: usize,
    noise: &NoisePolicy,
    trials: usize,
    seed: u64,
) -> Result<ExperimentOutput> {
    check_k_set(k_set)?;
    check_trials(trials)?;
    if t == 0 {
        return Err(Error::InvalidParameter(
            "sparsity t must be at least 1".into(),
        ));
    }
    if d < t {
        return Err(Error::InvalidParameter(format!(
            "dimension {} cannot hold {} nonzero entries",
            d, t
        )));
    }
    if !value.is_finite() || value == 0.0 {
        return Err(Error::InvalidParameter(format!(
            "entry value must be finite and nonzero, got {}",
            value
        )));
    }
    let mut meta = vec![
        ("experiment".into(), "sparse".into()),
        ("t".into(), t.to_string()),
        ("value".into(), value.to_string()),
        ("d".into(), d.to_string()),
        ("b".into(), b.to_string()),
        ("noise".into(), noise.to_string()),
        ("k_set".into(), fmt_k_set(k_set)),
        ("trials".into(), trials.to_string()),
        ("seed".into(), seed.to_string()),
    ];
    let mut named = Vec::new();
    for (si, &k) in k_set.iter().enumerate() {
        let series_seed = seeds::derive(seed, si as u64);
        let sigma = match noise {
            NoisePolicy::Sigma(s) => *s,
            NoisePolicy::Budget { epsilon, delta } => {
                privacy::calibrate_gaussian(*epsilon, *delta, k)?
            }
        };
        let spec = noise_spec(sigma)?;
        let per_trial: Result<Vec<(Vec<f64>, bool)>> = (0..trials)
            .into_par_iter()
            .map(|tr| {
                let trial_seed = seeds::derive(series_seed, tr as u64);
                let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(trial_seed, 2));
                let mut support = rand::seq::index::sample(&mut rng, d, t).into_vec();
                support.sort_unstable();
                let entries: Vec<(usize, f64)> = support.iter().map(|&i| (i, value)).collect();
                let x = SparseVector::new(d, entries)?;
                let params = SketchParams::new(d, k, b, seeds::derive(trial_seed, 0))?;
                let family = Arc::new(HashFamily::build(params)?);
                let mut sketch = Sketch::of_vector(&x, family, Variant::CountSketch)?;
                privacy::privatize(&mut sketch, &spec, seeds::derive(trial_seed, 1))?;
                let estimates = sketch.estimate_all(&support)?;
                let errors: Vec<f64> = estimates.iter().map(|e| e - value).collect();
                let exact = errors.iter().all(|&e| e == 0.0);
                Ok((errors, exact))
            })
            .collect();
        let mut signed = Vec::with_capacity(trials * t);
        let mut exact = 0u64;
        for (errors, was_exact) in per_trial? {
            signed.extend(errors);
            if was_exact {
                exact += 1;
            }
        }
        meta.push((format!("sigma[k={}]", k), sigma.to_string()));
        named.push((format!("k={}", k), Some((exact, trials as u64)), signed));
    }
    let sigma_ref = match noise {
        NoisePolicy::Sigma(s) => *s,
        NoisePolicy::Budget { epsilon, delta } => {
            privacy::gaussian_sigma_for_sensitivity(1.0, *epsilon, *delta)?
        }
    };
    meta.push(("sigma[ref_gaussian]".into(), sigma_ref.to_string()));
    let reference: Vec<f64> = if sigma_ref == 0.0 {
        vec![0.0; trials * t]
    } else {
        let ref_seed = seeds::derive(seed, k_set.len() as u64);
        let normal = Normal::new(0.0, sigma_ref).expect("positive scale");
        let chunks: Vec<Vec<f64>> = (0..trials)
            .into_par_iter()
            .map(|tr| {
                let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(ref_seed, tr as u64));
                (0..t).map(|_| normal.sample(&mut rng)).collect()
            })
            .collect();
        chunks.into_iter().flatten().collect()
    };
    named.push(("ref_gaussian".into(), None, reference));
    ExperimentOutput::build(meta, named)
}

/// Table size policy for a dataset sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableBudget {
    /// The same number of buckets per row for every k.
    FixedB(usize),
    /// Fixed total cell count: b = kb/k. k must divide kb; an odd
    /// quotient is rounded down to even and the adjustment is recorded
    /// in the CSV header.
    TotalKb(usize),
}

/// Single-pass dataset experiment: sketch the aggregate vector once per
/// k, query every support index (or the given subset), and report the
/// plain (`cs_k=…`) and noised (`pcs_k=…`) error distributions.
///
/// A `Budget` policy calibrates at basket-level sensitivity: if some
/// family keeps every basket free of intra-row bucket collisions (up to
/// 16 reseeds), the bound is `sqrt(m_max * k)`; otherwise it falls back
/// to the worst case `m_max * sqrt(k)`. The chosen mode, attempt count,
/// and resulting scale are recorded in the CSV header.
pub fn run_dataset(
    dataset: &Dataset,
    budget: TableBudget,
    k_set: &[usize],
    noise: &NoisePolicy,
    queries: Option<&[usize]>,
    seed: u64,
) -> Result<ExperimentOutput> {
    check_k_set(k_set)?;
    let x = dataset.vector();
    let d = x.dim();
    let all_support;
    let queries: &[usize] = match queries {
        Some(q) => {
            if q.is_empty() {
                return Err(Error::InvalidParameter("query set must be nonempty".into()));
            }
            q
        }
        None => {
            all_support = dataset.support_indices();
            &all_support
        }
    };
    for &q in queries {
        if q >= d {
            return Err(Error::IndexOutOfRange { index: q, dim: d });
        }
    }
    let sorted_baskets = match noise {
        NoisePolicy::Budget { .. } => {
            let baskets = dataset.baskets().ok_or_else(|| {
                Error::InvalidParameter(
                    "basket-level privacy needs a transaction dataset with baskets".into(),
                )
            })?;
            let sorted: Vec<Vec<usize>> = baskets
                .iter()
                .filter(|basket| !basket.is_empty())
                .map(|basket| {
                    let mut s = basket.clone();
                    s.sort_unstable();
                    s
                })
                .collect();
            if sorted.is_empty() {
                return Err(Error::InvalidParameter(
                    "dataset has no nonempty baskets".into(),
                ));
            }
            Some(sorted)
        }
        NoisePolicy::Sigma(_) => None,
    };

    let mut meta = vec![
        ("experiment".into(), "dataset".into()),
        ("dataset".into(), dataset.name().to_string()),
        ("distinct_ids".into(), dataset.distinct_ids().to_string()),
        ("total_count".into(), dataset.total_count().to_string()),
    ];
    match budget {
        TableBudget::FixedB(b) => meta.push(("b".into(), b.to_string())),
        TableBudget::TotalKb(kb) => meta.push(("kb".into(), kb.to_string())),
    }
    meta.push(("noise".into(), noise.to_string()));
    meta.push(("queries".into(), queries.len().to_string()));
    meta.push(("k_set".into(), fmt_k_set(k_set)));
    meta.push(("seed".into(), seed.to_string()));

    let truth: Vec<f64> = queries.iter().map(|&q| x.get(q)).collect();
    let mut named = Vec::new();
    for (si, &k) in k_set.iter().enumerate() {
        let series_seed = seeds::derive(seed, si as u64);
        let b = match budget {
            TableBudget::FixedB(b) => b,
            TableBudget::TotalKb(kb) => {
                if kb % k != 0 {
                    return Err(Error::InvalidParameter(format!(
                        "k={} must divide the sketch budget kb={}",
                        k, kb
                    )));
                }
                let quotient = kb / k;
                let b = quotient - quotient % 2;
                if b < 2 {
                    return Err(Error::InvalidParameter(format!(
                        "sketch budget kb={} leaves fewer than 2 buckets per row at k={}",
                        kb, k
                    )));
                }
                if b != quotient {
                    meta.push((format!("b_adjusted[k={}]", k), format!("{}->{}", quotient, b)));
                }
                b
            }
        };
        meta.push((format!("b[k={}]", k), b.to_string()));

        let (family, sigma) = match noise {
            NoisePolicy::Sigma(s) => {
                let params = SketchParams::new(d, k, b, seeds::derive(series_seed, 0x10))?;
                (Arc::new(HashFamily::build(params)?), *s)
            }
            NoisePolicy::Budget { epsilon, delta } => {
                let baskets = sorted_baskets.as_ref().expect("prepared above");
                let m_max = baskets.iter().map(Vec::len).max().expect("nonempty") as f64;
                let mut chosen = None;
                let mut attempts = 0;
                for attempt in 0..16u64 {
                    attempts = attempt + 1;
                    let params =
                        SketchParams::new(d, k, b, seeds::derive(series_seed, 0x10 + attempt))?;
                    let family = Arc::new(HashFamily::build(params)?);
                    let clean = baskets
                        .iter()
                        .all(|basket| privacy::verify_collision_free(&family, basket).is_ok());
                    if clean {
                        chosen = Some(family);
                        break;
                    }
                }
                let (family, sensitivity, mode) = match chosen {
                    Some(family) => (family, (m_max * k as f64).sqrt(), "collision_free"),
                    None => {
                        let params =
                            SketchParams::new(d, k, b, seeds::derive(series_seed, 0x10))?;
                        (
                            Arc::new(HashFamily::build(params)?),
                            m_max * (k as f64).sqrt(),
                            "worst_case",
                        )
                    }
                };
                meta.push((format!("sensitivity_mode[k={}]", k), mode.into()));
                meta.push((format!("family_attempts[k={}]", k), attempts.to_string()));
                meta.push((format!("sensitivity[k={}]", k), sensitivity.to_string()));
                let sigma = privacy::gaussian_sigma_for_sensitivity(sensitivity, *epsilon, *delta)?;
                (family, sigma)
            }
        };
        meta.push((format!("sigma[k={}]", k), sigma.to_string()));

        let cs = Sketch::of_vector(x, family, Variant::CountSketch)?;
        let mut pcs = cs.clone();
        privacy::privatize(&mut pcs, &noise_spec(sigma)?, seeds::derive(series_seed, 1))?;
        let cs_errors: Vec<f64> = cs
            .estimate_all(queries)?
            .iter()
            .zip(&truth)
            .map(|(est, t)| est - t)
            .collect();
        let pcs_errors: Vec<f64> = pcs
            .estimate_all(queries)?
            .iter()
            .zip(&truth)
            .map(|(est, t)| est - t)
            .collect();
        named.push((format!("cs_k={}", k), None, cs_errors));
        named.push((format!("pcs_k={}", k), None, pcs_errors));
    }
    ExperimentOutput::build(meta, named)
}

/// Which experiment to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentId {
    MedianNormals,
    ZeroVariance,
    Sparse,
    Cities,
    Baskets,
}

impl ExperimentId {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentId::MedianNormals => "median_normals",
            ExperimentId::ZeroVariance => "zero_variance",
            ExperimentId::Sparse => "sparse",
            ExperimentId::Cities => "cities",
            ExperimentId::Baskets => "baskets",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "median_normals" => Ok(ExperimentId::MedianNormals),
            "zero_variance" => Ok(ExperimentId::ZeroVariance),
            "sparse" => Ok(ExperimentId::Sparse),
            "cities" => Ok(ExperimentId::Cities),
            "baskets" => Ok(ExperimentId::Baskets),
            other => Err(Error::InvalidParameter(format!(
                "unknown experiment '{}'; expected one of median_normals, zero_variance, sparse, cities, baskets",
                other
            ))),
        }
    }
}

/// Everything an experiment run needs. Id-specific fields are optional
/// here; [`ExperimentConfig::run`] checks that the required ones are
/// present and that none that would silently change meaning are set.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub id: ExperimentId,
    pub k_set: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub b: Option<usize>,
    pub kb: Option<usize>,
    pub sigma: Option<f64>,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub t: Option<usize>,
    pub value: Option<f64>,
    pub d: Option<usize>,
    pub dataset_path: Option<PathBuf>,
    pub max_basket: Option<usize>,
}

impl ExperimentConfig {
    /// Defaults: k sweep {1, 5, 15, 25}, 10^5 trials, master seed 42.
    pub fn new(id: ExperimentId) -> Self {
        ExperimentConfig {
            id,
            k_set: vec![1, 5, 15, 25],
            trials: 100_000,
            seed: 42,
            b: None,
            kb: None,
            sigma: None,
            epsilon: None,
            delta: None,
            t: None,
            value: None,
            d: None,
            dataset_path: None,
            max_basket: None,
        }
    }

    fn reject_stray_fields(&self) -> Result<()> {
        let mut stray: Vec<&str> = Vec::new();
        match self.id {
            ExperimentId::MedianNormals | ExperimentId::ZeroVariance => {
                if self.b.is_some() {
                    stray.push("--b");
                }
                if self.kb.is_some() {
                    stray.push("--kb");
                }
                if self.sigma.is_some() {
                    stray.push("--sigma (the noise scale is fixed at sqrt(k))");
                }
                if self.epsilon.is_some() || self.delta.is_some() {
                    stray.push("--eps/--delta");
                }
                if self.t.is_some() {
                    stray.push("--t");
                }
                if self.value.is_some() {
                    stray.push("--value");
                }
                if self.d.is_some() {
                    stray.push("--d");
                }
                if self.dataset_path.is_some() {
                    stray.push("--dataset-path");
                }
                if self.max_basket.is_some() {
                    stray.push("--max-basket");
                }
            }
            ExperimentId::Sparse => {
                if self.kb.is_some() {
                    stray.push("--kb");
                }
                if self.dataset_path.is_some() {
                    stray.push("--dataset-path");
                }
                if self.max_basket.is_some() {
                    stray.push("--max-basket");
                }
                if self.sigma.is_some() && (self.epsilon.is_some() || self.delta.is_some()) {
                    return Err(Error::InvalidParameter(
                        "give either --sigma or --eps/--delta, not both".into(),
                    ));
                }
            }
            ExperimentId::Cities => {
                if self.epsilon.is_some() || self.delta.is_some() {
                    stray.push("--eps/--delta (cities takes a direct --sigma)");
                }
                if self.t.is_some() {
                    stray.push("--t");
                }
                if self.value.is_some() {
                    stray.push("--value");
                }
                if self.d.is_some() {
                    stray.push("--d");
                }
                if self.max_basket.is_some() {
                    stray.push("--max-basket");
                }
                if self.b.is_some() && self.kb.is_some() {
                    return Err(Error::InvalidParameter(
                        "give either --b or --kb, not both".into(),
                    ));
                }
            }
            ExperimentId::Baskets => {
                if self.sigma.is_some() {
                    stray.push("--sigma (baskets calibrates from --eps/--delta)");
                }
                if self.t.is_some() {
                    stray.push("--t");
                }
                if self.value.is_some() {
                    stray.push("--value");
                }
                if self.d.is_some() {
                    stray.push("--d");
                }
                if self.b.is_some() && self.kb.is_some() {
                    return Err(Error::InvalidParameter(
                        "give either --b or --kb, not both".into(),
                    ));
                }
            }
        }
        if !stray.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "{} does not use {}",
                self.id.as_str(),
                stray.join(", ")
            )));
        }
        Ok(())
    }

    /// Validate the id-specific fields and run the experiment.
    pub fn run(&self) -> Result<ExperimentOutput> {
        self.reject_stray_fields()?;
        match self.id {
            ExperimentId::MedianNormals => run_median_normals(&self.k_set, self.trials, self.seed),
            ExperimentId::ZeroVariance => run_zero_variance(&self.k_set, self.trials, self.seed),
            ExperimentId::Sparse => {
                let t = self
                    .t
                    .ok_or_else(|| Error::InvalidParameter("sparse needs --t".into()))?;
                let value = self
                    .value
                    .ok_or_else(|| Error::InvalidParameter("sparse needs --value".into()))?;
                let b = self.b.unwrap_or(t);
                let d = self.d.unwrap_or(10 * t);
                let noise = match (self.sigma, self.epsilon, self.delta) {
                    (Some(s), None, None) => NoisePolicy::Sigma(s),
                    (None, epsilon, delta) => NoisePolicy::Budget {
                        epsilon: epsilon.unwrap_or(1.0),
                        delta: delta.unwrap_or(1e-6),
                    },
                    _ => unreachable!("rejected above"),
                };
                run_sparse(t, value, d, &self.k_set, b, &noise, self.trials, self.seed)
            }
            ExperimentId::Cities => {
                let path = self.dataset_path.as_ref().ok_or_else(|| {
                    Error::InvalidParameter("cities needs --dataset-path".into())
                })?;
                let dataset = Dataset::load_cities_csv(path)?;
                let budget = match (self.b, self.kb) {
                    (Some(b), None) => TableBudget::FixedB(b),
                    (None, Some(kb)) => TableBudget::TotalKb(kb),
                    (None, None) => TableBudget::FixedB(10_000),
                    _ => unreachable!("rejected above"),
                };
                let noise = NoisePolicy::Sigma(self.sigma.unwrap_or(1e4));
                run_dataset(&dataset, budget, &self.k_set, &noise, None, self.seed)
            }
            ExperimentId::Baskets => {
                let path = self.dataset_path.as_ref().ok_or_else(|| {
                    Error::InvalidParameter("baskets needs --dataset-path".into())
                })?;
                let dataset = Dataset::load_transactions(path, self.max_basket.unwrap_or(100))?;
                let budget = match (self.b, self.kb) {
                    (Some(b), None) => TableBudget::FixedB(b),
                    (None, Some(kb)) => TableBudget::TotalKb(kb),
                    (None, None) => TableBudget::TotalKb(5_000),
                    _ => unreachable!("rejected above"),
                };
                let noise = NoisePolicy::Budget {
                    epsilon: self.epsilon.unwrap_or(1.0),
                    delta: self.delta.unwrap_or(1e-6),
                };
                run_dataset(&dataset, budget, &self.k_set, &noise, None, self.seed)
            }
        }
    }
}
