//! Error analysis: tail norms, the error-scale Δ, error reports with CDFs,
//! empirical failure rates, and the median-trick tail bound.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hashing::{HashFamily, SketchParams, MAX_FAMILY_ENTRIES};
use crate::privacy::{self, NoiseSpec};
use crate::seeds;
use crate::sketch::{SparseVector, Sketch, Variant};

/// L2 norm of `x` with its `m` largest-magnitude entries zeroed.
pub fn tail_norm(x: &SparseVector, m: usize) -> f64 {
    if m >= x.nnz() {
        return 0.0;
    }
    let mut magnitudes: Vec<f64> = x.entries().iter().map(|(_, v)| v.abs()).collect();
    magnitudes.sort_unstable_by(|a, b| b.total_cmp(a));
    magnitudes[m..].iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Which tail enters the error scale Δ.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaForm {
    /// `tail_b(x) / sqrt(b)`: the scale the headline bounds are stated at.
    TailB,
    /// `tail_{b/2}(x) / sqrt(b)`: the scale the row-wise argument proves.
    /// The verification suite measures against this one.
    TailHalfB,
}

/// The error scale `Δ = tail_m(x) / sqrt(b)` with `m` set by `form`.
pub fn delta_scale(x: &SparseVector, b: usize, form: DeltaForm) -> Result<f64> {
    if b == 0 || b % 2 != 0 {
        return Err(Error::InvalidParameter(format!(
            "bucket count b must be positive and even, got {}",
            b
        )));
    }
    let m = match form {
        DeltaForm::TailB => b,
        DeltaForm::TailHalfB => b / 2,
    };
    Ok(tail_norm(x, m) / (b as f64).sqrt())
}

/// Tail bound for a median of k iid symmetric row estimates: if each row
/// lands within γ with probability at least p, the median misses γ with
/// probability at most `2 exp(-p² k / 2)`. The value may exceed 1 for
/// small `p² k` (a vacuous bound, returned as-is).
pub fn symmetric_median_bound(p: f64, k: usize) -> Result<f64> {
    if !p.is_finite() || p <= 0.0 || p > 1.0 {
        return Err(Error::InvalidParameter(format!(
            "p must lie in (0, 1], got {}",
            p
        )));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    Ok(2.0 * (-p * p * k as f64 / 2.0).exp())
}

/// Exact lower order statistic: the smallest value with at least a `q`
/// fraction of the sample at or below it. `sorted` must be ascending and
/// nonempty, `q` in `(0, 1]`.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    debug_assert!(q > 0.0 && q <= 1.0);
    let n = sorted.len();
    let pos = (q * n as f64).ceil() as usize;
    sorted[pos.clamp(1, n) - 1]
}

/// Order-statistic summary of an absolute-error sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSummary {
    pub median: f64,
    pub q90: f64,
    pub q95: f64,
    pub max: f64,
}

/// Absolute errors of a batch of estimates, with their empirical CDF over
/// a threshold grid and an order-statistic summary.
#[derive(Debug, Clone)]
pub struct ErrorReport {
    /// Ascending absolute errors.
    errors: Vec<f64>,
    /// `(threshold, fraction of errors <= threshold)`, thresholds ascending.
    cdf: Vec<(f64, f64)>,
    summary: ErrorSummary,
    metadata: Vec<(String, String)>,
}

impl ErrorReport {
    /// Build from estimates and ground truth (`errors = |estimate - truth|`).
    pub fn new(estimates: &[f64], truth: &[f64], thresholds: &[f64]) -> Result<Self> {
        if estimates.len() != truth.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} estimates vs {} truth values",
                estimates.len(),
                truth.len()
            )));
        }
        let errors = estimates
            .iter()
            .zip(truth)
            .map(|(e, t)| (e - t).abs())
            .collect();
        Self::from_errors(errors, thresholds)
    }

    /// Build from already-computed absolute errors.
    ///
    /// # Errors
    /// `InvalidParameter` for an empty sample, negative or non-finite
    /// errors, or non-finite thresholds.
    pub fn from_errors(mut errors: Vec<f64>, thresholds: &[f64]) -> Result<Self> {
        if errors.is_empty() {
            return Err(Error::InvalidParameter(
                "error sample must be nonempty".into(),
            ));
        }
        for &e in &errors {
            if !e.is_finite() || e < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "absolute errors must be finite and nonnegative, got {}",
                    e
                )));
            }
        }
        for &t in thresholds {
            if !t.is_finite() {
                return Err(Error::InvalidParameter(
                    "thresholds must be finite".into(),
                ));
            }
        }
        errors.sort_unstable_by(f64::total_cmp);
        let mut grid: Vec<f64> = thresholds.to_vec();
        grid.sort_unstable_by(f64::total_cmp);
        grid.dedup();
        let n = errors.len() as f64;
        let cdf = grid
            .into_iter()
            .map(|t| {
                let count = errors.partition_point(|e| *e <= t);
                (t, count as f64 / n)
            })
            .collect();
        let summary = ErrorSummary {
            median: quantile(&errors, 0.5),
            q90: quantile(&errors, 0.9),
            q95: quantile(&errors, 0.95),
            max: *errors.last().unwrap(),
        };
        Ok(ErrorReport {
            errors,
            cdf,
            summary,
            metadata: Vec::new(),
        })
    }

    /// Attach a `# key=value` header line (ordered, repeatable).
    pub fn with_metadata(mut self, key: &str, value: &str) -> Self {
        self.metadata.push((key.to_string(), value.to_string()));
        self
    }

    /// Ascending absolute errors.
    pub fn errors(&self) -> &[f64] {
        &self.errors
    }

    pub fn cdf(&self) -> &[(f64, f64)] {
        &self.cdf
    }

    pub fn summary(&self) -> ErrorSummary {
        self.summary
    }

    pub fn metadata(&self) -> &[(String, String)] {
        &self.metadata
    }

    /// Exact order-statistic quantile of the error sample.
    pub fn quantile(&self, q: f64) -> f64 {
        quantile(&self.errors, q)
    }

    /// CSV form: metadata and summary as `# key=value` comment lines, then
    /// `threshold,cum_prob` rows.
    pub fn to_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for (key, value) in &self.metadata {
            writeln!(w, "# {}={}", key, value)?;
        }
        writeln!(w, "# n={}", self.errors.len())?;
        writeln!(w, "# median_abs_err={}", self.summary.median)?;
        writeln!(w, "# q90_abs_err={}", self.summary.q90)?;
        writeln!(w, "# q95_abs_err={}", self.summary.q95)?;
        writeln!(w, "# max_abs_err={}", self.summary.max)?;
        writeln!(w, "threshold,cum_prob")?;
        for (threshold, cum_prob) in &self.cdf {
            writeln!(w, "{},{}", threshold, cum_prob)?;
        }
        Ok(())
    }
}

/// Against what the failure threshold `alpha * scale` is measured.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrorScale {
    /// `Δ` from [`delta_scale`].
    Delta(DeltaForm),
    /// The noise standard deviation from the config's [`NoiseSpec`]
    /// (0 for noiseless runs).
    NoiseSigma,
    /// `max(Δ, σ)` — the scale the noised bounds are stated at.
    MaxDeltaSigma(DeltaForm),
}

/// One failure-rate measurement: sketch `x` with a fresh family per trial,
/// optionally noise it, and count median estimates farther than
/// `alpha * scale` from the truth.
#[derive(Debug, Clone)]
pub struct FailureRateConfig<'a> {
    pub x: &'a SparseVector,
    /// `params.seed` is the master seed; per-trial hash and noise seeds
    /// are derived from it.
    pub params: SketchParams,
    pub noise: NoiseSpec,
    /// Queried coordinates.
    pub indices: &'a [usize],
    pub alpha: f64,
    pub scale: ErrorScale,
}

impl FailureRateConfig<'_> {
    /// The threshold's scale factor (Δ, σ, or their max), resolved once.
    pub fn scale_value(&self) -> Result<f64> {
        let sigma = self.noise.scale();
        match self.scale {
            ErrorScale::Delta(form) => delta_scale(self.x, self.params.b, form),
            ErrorScale::NoiseSigma => Ok(sigma),
            ErrorScale::MaxDeltaSigma(form) => {
                Ok(delta_scale(self.x, self.params.b, form)?.max(sigma))
            }
        }
    }
}

/// Fraction of `(trial, index)` pairs whose median estimate misses the
/// truth by more than `alpha * scale`, over `trials` independently seeded
/// sketches of `cfg.x`.
pub fn empirical_failure_rate(cfg: &FailureRateConfig, trials: usize) -> Result<f64> {
    cfg.params.validate()?;
    if cfg.params.family_entries() > MAX_FAMILY_ENTRIES {
        return Err(Error::FamilyTooLarge {
            entries: cfg.params.family_entries(),
            limit: MAX_FAMILY_ENTRIES,
        });
    }
    if cfg.x.dim() != cfg.params.d {
        return Err(Error::DimensionMismatch(format!(
            "vector dimension {} vs params dimension {}",
            cfg.x.dim(),
            cfg.params.d
        )));
    }
    if cfg.indices.is_empty() {
        return Err(Error::InvalidParameter("index set must be nonempty".into()));
    }
    for &index in cfg.indices {
        if index >= cfg.params.d {
            return Err(Error::IndexOutOfRange {
                index,
                dim: cfg.params.d,
            });
        }
    }
    if !cfg.alpha.is_finite() || cfg.alpha < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "alpha must be finite and nonnegative, got {}",
            cfg.alpha
        )));
    }
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let threshold = cfg.alpha * cfg.scale_value()?;
    let master = cfg.params.seed;

    let failures: u64 = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let hash_seed = seeds::derive(master, 2 * trial);
            let noise_seed = seeds::derive(master, 2 * trial + 1);
            let mut params = cfg.params;
            params.seed = hash_seed;
            // Entry budget was checked above; trial families are identical
            // in size.
            let family = HashFamily::build_unlimited(params).expect("validated params");
            let mut sketch =
                Sketch::of_vector(cfg.x, std::sync::Arc::new(family), Variant::CountSketch)
                    .expect("validated dimensions");
            if !cfg.noise.is_none() {
                privacy::privatize(&mut sketch, &cfg.noise, noise_seed)
                    .expect("clean sketch accepts any noise");
            }
            let mut misses = 0u64;
            for &index in cfg.indices {
                let estimate = sketch.estimate_median(index).expect("validated index");
                if (estimate - cfg.x.get(index)).abs() > threshold {
                    misses += 1;
                }
            }
            misses
        })
        .sum();

    Ok(failures as f64 / (trials as f64 * cfg.indices.len() as f64))
}
