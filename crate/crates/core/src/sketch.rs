//! The CountSketch linear map, sketch algebra, and point-query estimators.
//!
//! A sketch is a `k x b` table. Row `i` of `CS(x)` holds, in bucket `j`,
//! the sum of `s_i(l) * x_l` over coordinates `l` with `h_i(l) = j`
//! (signs are identically `+1` for the Count-Min variant). The map is
//! linear, so sketches built from the same family add, subtract, and
//! stream coordinate updates.

use std::io::{Read, Write};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::hashing::{HashFamily, SketchParams};
use crate::privacy::NoiseSpec;

/// Magic prefix of the serialized sketch format.
pub const SKETCH_MAGIC: &[u8; 5] = b"PCSS1";

/// Which sketch the table is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Random signs, median (or mean) recovery. The default.
    CountSketch,
    /// All-plus signs, min recovery; one-sided for nonnegative vectors.
    CountMin,
}

/// Point-query estimator selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    Median,
    Mean,
    Min,
}

impl Variant {
    /// The estimator the variant is designed around.
    pub fn default_estimator(self) -> Estimator {
        match self {
            Variant::CountSketch => Estimator::Median,
            Variant::CountMin => Estimator::Min,
        }
    }
}

/// Sparse vector in `R^d`: strictly increasing 0-based indices with
/// finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector {
    d: usize,
    entries: Vec<(usize, f64)>,
}

impl SparseVector {
    /// Build from entries already sorted by strictly increasing index.
    ///
    /// # Errors
    /// `InvalidParameter` for `d == 0`, out-of-order or duplicate indices,
    /// or non-finite values; `IndexOutOfRange` for indices `>= d`.
    pub fn new(d: usize, entries: Vec<(usize, f64)>) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter(
                "vector dimension d must be at least 1".into(),
            ));
        }
        let mut prev: Option<usize> = None;
        for &(index, value) in &entries {
            if index >= d {
                return Err(Error::IndexOutOfRange { index, dim: d });
            }
            if let Some(p) = prev {
                if index <= p {
                    return Err(Error::InvalidParameter(format!(
                        "entry indices must be strictly increasing ({} after {})",
                        index, p
                    )));
                }
            }
            if !value.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "entry value at index {} is not finite",
                    index
                )));
            }
            prev = Some(index);
        }
        Ok(SparseVector { d, entries })
    }

    /// Build from unordered `(index, value)` pairs; duplicates are rejected.
    pub fn from_pairs(d: usize, mut pairs: Vec<(usize, f64)>) -> Result<Self> {
        pairs.sort_unstable_by_key(|&(index, _)| index);
        Self::new(d, pairs)
    }

    /// The zero vector in `R^d`.
    pub fn zero(d: usize) -> Result<Self> {
        Self::new(d, Vec::new())
    }

    /// Dense slice to sparse form, keeping nonzero entries.
    pub fn from_dense(values: &[f64]) -> Result<Self> {
        let entries = values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i, *v))
            .collect();
        Self::new(values.len(), entries)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    /// Value at `index` (0 where no entry is stored).
    pub fn get(&self, index: usize) -> f64 {
        match self.entries.binary_search_by_key(&index, |e| e.0) {
            Ok(pos) => self.entries[pos].1,
            Err(_) => 0.0,
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|(_, v)| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        for &(index, value) in &self.entries {
            out[index] = value;
        }
        out
    }

    /// Indices of stored nonzero entries.
    pub fn support(&self) -> Vec<usize> {
        self.entries
            .iter()
            .filter(|(_, v)| *v != 0.0)
            .map(|(i, _)| *i)
            .collect()
    }
}

/// A `k x b` sketch table tied to its hash family.
#[derive(Debug, Clone)]
pub struct Sketch {
    family: Arc<HashFamily>,
    variant: Variant,
    noise: NoiseSpec,
    /// Row-major `k x b`.
    table: Vec<f64>,
}

impl Sketch {
    /// The all-zero sketch (the image of the zero vector).
    pub fn new(family: Arc<HashFamily>, variant: Variant) -> Self {
        let table = vec![0.0; family.params().table_len()];
        Sketch {
            family,
            variant,
            noise: NoiseSpec::none(),
            table,
        }
    }

    /// Sketch a vector. Accumulation is row-major (row outer, entries in
    /// index order), so results are bit-for-bit reproducible.
    ///
    /// # Errors
    /// `DimensionMismatch` if `x.dim() != family.params().d`.
    pub fn of_vector(x: &SparseVector, family: Arc<HashFamily>, variant: Variant) -> Result<Self> {
        if x.dim() != family.params().d {
            return Err(Error::DimensionMismatch(format!(
                "vector dimension {} vs family dimension {}",
                x.dim(),
                family.params().d
            )));
        }
        let mut sketch = Sketch::new(family, variant);
        let b = sketch.params().b;
        for row in 0..sketch.params().k {
            let base = row * b;
            for &(index, value) in x.entries() {
                let sign = match variant {
                    Variant::CountSketch => sketch.family.sign(row, index),
                    Variant::CountMin => 1.0,
                };
                sketch.table[base + sketch.family.bucket(row, index)] += sign * value;
            }
        }
        Ok(sketch)
    }

    pub fn params(&self) -> &SketchParams {
        self.family.params()
    }

    pub fn family(&self) -> &Arc<HashFamily> {
        &self.family
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn noise(&self) -> &NoiseSpec {
        &self.noise
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    /// One row of the table.
    pub fn row(&self, row: usize) -> &[f64] {
        let b = self.params().b;
        &self.table[row * b..(row + 1) * b]
    }

    pub fn cell(&self, row: usize, bucket: usize) -> f64 {
        self.table[row * self.params().b + bucket]
    }

    /// Frobenius norm of the table.
    pub fn l2_norm(&self) -> f64 {
        self.table.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub(crate) fn table_mut(&mut self) -> &mut [f64] {
        &mut self.table
    }

    pub(crate) fn set_noise(&mut self, noise: NoiseSpec) {
        self.noise = noise;
    }

    /// Apply the streaming update `x[index] += delta`.
    pub fn update(&mut self, index: usize, delta: f64) -> Result<()> {
        let params = *self.params();
        if index >= params.d {
            return Err(Error::IndexOutOfRange {
                index,
                dim: params.d,
            });
        }
        if !delta.is_finite() {
            return Err(Error::InvalidParameter(
                "update delta must be finite".into(),
            ));
        }
        for row in 0..params.k {
            let sign = match self.variant {
                Variant::CountSketch => self.family.sign(row, index),
                Variant::CountMin => 1.0,
            };
            self.table[row * params.b + self.family.bucket(row, index)] += sign * delta;
        }
        Ok(())
    }

    fn check_mergeable(&self, other: &Sketch) -> Result<()> {
        if self.params() != other.params() {
            return Err(Error::IncompatibleSketches(format!(
                "params differ: {:?} vs {:?}",
                self.params(),
                other.params()
            )));
        }
        if self.variant != other.variant {
            return Err(Error::IncompatibleSketches(format!(
                "variants differ: {:?} vs {:?}",
                self.variant, other.variant
            )));
        }
        Ok(())
    }

    /// Entrywise sum; noise specs compose (Gaussian variances add).
    ///
    /// # Errors
    /// `IncompatibleSketches` on any parameter/variant difference,
    /// `NoiseComposition` if the combined noise is not representable.
    pub fn merge_add(&self, other: &Sketch) -> Result<Sketch> {
        self.check_mergeable(other)?;
        let noise = self.noise.compose(&other.noise)?;
        let mut out = self.clone();
        for (cell, &rhs) in out.table.iter_mut().zip(&other.table) {
            *cell += rhs;
        }
        out.noise = noise;
        Ok(out)
    }

    /// Entrywise difference (sketch of `x - y`); same rules as
    /// [`merge_add`](Self::merge_add).
    pub fn merge_sub(&self, other: &Sketch) -> Result<Sketch> {
        self.check_mergeable(other)?;
        let noise = self.noise.compose(&other.noise)?;
        let mut out = self.clone();
        for (cell, &rhs) in out.table.iter_mut().zip(&other.table) {
            *cell -= rhs;
        }
        out.noise = noise;
        Ok(out)
    }

    /// The k per-row estimates `s_i(index) * table[i][h_i(index)]`
    /// (unsigned cell reads for Count-Min).
    pub fn row_estimates(&self, index: usize) -> Result<Vec<f64>> {
        let params = *self.params();
        if index >= params.d {
            return Err(Error::IndexOutOfRange {
                index,
                dim: params.d,
            });
        }
        let mut out = Vec::with_capacity(params.k);
        for row in 0..params.k {
            let cell = self.table[row * params.b + self.family.bucket(row, index)];
            let value = match self.variant {
                Variant::CountSketch => self.family.sign(row, index) * cell,
                Variant::CountMin => cell,
            };
            out.push(value);
        }
        Ok(out)
    }

    /// Median-of-rows estimate (Count-Sketch recovery; `k` odd makes the
    /// median an actual row estimate).
    pub fn estimate_median(&self, index: usize) -> Result<f64> {
        self.require_variant(Variant::CountSketch)?;
        let mut estimates = self.row_estimates(index)?;
        estimates.sort_unstable_by(f64::total_cmp);
        Ok(estimates[estimates.len() / 2])
    }

    /// Mean-of-rows estimate (Count-Mean recovery).
    pub fn estimate_mean(&self, index: usize) -> Result<f64> {
        self.require_variant(Variant::CountSketch)?;
        let estimates = self.row_estimates(index)?;
        Ok(estimates.iter().sum::<f64>() / estimates.len() as f64)
    }

    /// Min-of-rows estimate (Count-Min recovery; never underestimates a
    /// nonnegative vector absent noise).
    pub fn estimate_min(&self, index: usize) -> Result<f64> {
        self.require_variant(Variant::CountMin)?;
        let estimates = self.row_estimates(index)?;
        Ok(estimates.iter().copied().fold(f64::INFINITY, f64::min))
    }

    /// The variant's default estimator at one index.
    pub fn estimate(&self, index: usize) -> Result<f64> {
        match self.variant.default_estimator() {
            Estimator::Median => self.estimate_median(index),
            Estimator::Mean => self.estimate_mean(index),
            Estimator::Min => self.estimate_min(index),
        }
    }

    /// Batch estimates with the variant's default estimator. All indices
    /// are validated before any estimate is computed.
    pub fn estimate_all(&self, indices: &[usize]) -> Result<Vec<f64>> {
        self.estimate_all_with(indices, self.variant.default_estimator())
    }

    /// Batch estimates with an explicit estimator.
    pub fn estimate_all_with(&self, indices: &[usize], estimator: Estimator) -> Result<Vec<f64>> {
        let d = self.params().d;
        for &index in indices {
            if index >= d {
                return Err(Error::IndexOutOfRange { index, dim: d });
            }
        }
        indices
            .iter()
            .map(|&index| match estimator {
                Estimator::Median => self.estimate_median(index),
                Estimator::Mean => self.estimate_mean(index),
                Estimator::Min => self.estimate_min(index),
            })
            .collect()
    }

    fn require_variant(&self, expected: Variant) -> Result<()> {
        if self.variant != expected {
            return Err(Error::WrongVariant {
                expected,
                actual: self.variant,
            });
        }
        Ok(())
    }

    /// Serialize as `PCSS1 || d,k,b,seed (u64 LE) || variant u8 || noise
    /// (kind u8, scale f64 LE) || k*b cells (f64 LE)`. The family is not
    /// embedded: it is a pure function of the params.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(SKETCH_MAGIC)?;
        let params = self.params();
        for v in [
            params.d as u64,
            params.k as u64,
            params.b as u64,
            params.seed,
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&[match self.variant {
            Variant::CountSketch => 0u8,
            Variant::CountMin => 1u8,
        }])?;
        w.write_all(&self.noise.to_wire())?;
        for cell in &self.table {
            w.write_all(&cell.to_le_bytes())?;
        }
        Ok(())
    }

    /// Inverse of [`write_to`](Self::write_to); rebuilds the hash family
    /// from the stored params and seed.
    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 5];
        r.read_exact(&mut magic)?;
        if &magic != SKETCH_MAGIC {
            return Err(Error::Format(format!(
                "bad sketch magic {:?}, expected {:?}",
                magic, SKETCH_MAGIC
            )));
        }
        let mut u64buf = [0u8; 8];
        let mut header = [0u64; 4];
        for slot in &mut header {
            r.read_exact(&mut u64buf)?;
            *slot = u64::from_le_bytes(u64buf);
        }
        let [d, k, b, seed] = header;
        if d > usize::MAX as u64 || k > usize::MAX as u64 || b > usize::MAX as u64 {
            return Err(Error::Format("header fields exceed platform usize".into()));
        }
        let params = SketchParams::new(d as usize, k as usize, b as usize, seed)?;
        let mut byte = [0u8; 1];
        r.read_exact(&mut byte)?;
        let variant = match byte[0] {
            0 => Variant::CountSketch,
            1 => Variant::CountMin,
            v => return Err(Error::Format(format!("unknown variant byte {}", v))),
        };
        let mut noise_wire = [0u8; 9];
        r.read_exact(&mut noise_wire)?;
        let noise = NoiseSpec::from_wire(&noise_wire)?;
        let mut table = vec![0.0f64; params.table_len()];
        for cell in &mut table {
            r.read_exact(&mut u64buf)?;
            *cell = f64::from_le_bytes(u64buf);
            if !cell.is_finite() {
                return Err(Error::Format("table cell is not finite".into()));
            }
        }
        let family = Arc::new(HashFamily::build_unlimited(params)?);
        Ok(Sketch {
            family,
            variant,
            noise,
            table,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hashing::HashFamily;

    fn family(d: usize, k: usize, b: usize, seed: u64) -> Arc<HashFamily> {
        Arc::new(HashFamily::build(SketchParams::new(d, k, b, seed).unwrap()).unwrap())
    }

    /// Independent oracle: the defining double loop over (row, coordinate).
    fn naive_table(x: &SparseVector, fam: &HashFamily, variant: Variant) -> Vec<f64> {
        let p = fam.params();
        let mut table = vec![0.0; p.table_len()];
        for row in 0..p.k {
            for &(index, value) in x.entries() {
                let sign = match variant {
                    Variant::CountSketch => fam.sign(row, index),
                    Variant::CountMin => 1.0,
                };
                table[row * p.b + fam.bucket(row, index)] += sign * value;
            }
        }
        table
    }

    #[test]
    fn sparse_vector_validation() {
        assert!(SparseVector::new(10, vec![(0, 1.0), (3, -2.0)]).is_ok());
        assert!(SparseVector::new(0, vec![]).is_err());
        assert!(SparseVector::new(10, vec![(3, 1.0), (0, 1.0)]).is_err()); // order
        assert!(SparseVector::new(10, vec![(3, 1.0), (3, 1.0)]).is_err()); // dup
        assert!(SparseVector::new(10, vec![(10, 1.0)]).is_err()); // range
        assert!(SparseVector::new(10, vec![(1, f64::NAN)]).is_err());
        assert!(SparseVector::new(10, vec![(1, f64::INFINITY)]).is_err());

        let v = SparseVector::from_pairs(10, vec![(5, 2.0), (1, -1.0)]).unwrap();
        assert_eq!(v.entries(), &[(1, -1.0), (5, 2.0)]);
        assert!(SparseVector::from_pairs(10, vec![(5, 2.0), (5, 1.0)]).is_err());
    }

    #[test]
    fn sparse_vector_accessors() {
        let v = SparseVector::new(6, vec![(1, 3.0), (4, -4.0)]).unwrap();
        assert_eq!(v.dim(), 6);
        assert_eq!(v.nnz(), 2);
        assert_eq!(v.get(1), 3.0);
        assert_eq!(v.get(2), 0.0);
        assert_eq!(v.l2_norm(), 5.0);
        assert_eq!(v.to_dense(), vec![0.0, 3.0, 0.0, 0.0, -4.0, 0.0]);
        let round = SparseVector::from_dense(&v.to_dense()).unwrap();
        assert_eq!(round, v);
        assert_eq!(v.support(), vec![1, 4]);
    }

    #[test]
    fn matches_defining_double_loop_bit_for_bit() {
        let fam = family(50, 5, 8, 21);
        let x = SparseVector::from_pairs(
            50,
            vec![(0, 1.5), (7, -2.25), (13, 4.0), (29, 0.125), (49, -8.5)],
        )
        .unwrap();
        for variant in [Variant::CountSketch, Variant::CountMin] {
            let sketch = Sketch::of_vector(&x, fam.clone(), variant).unwrap();
            assert_eq!(sketch.table(), naive_table(&x, &fam, variant).as_slice());
        }
    }

    #[test]
    fn one_hot_exact_recovery() {
        let fam = family(100, 3, 8, 4);
        let x = SparseVector::new(100, vec![(17, 5.0)]).unwrap();
        let sketch = Sketch::of_vector(&x, fam, Variant::CountSketch).unwrap();
        let nonzero: Vec<f64> = sketch.table().iter().copied().filter(|c| *c != 0.0).collect();
        assert_eq!(nonzero.len(), 3);
        for cell in nonzero {
            assert_eq!(cell.abs(), 5.0);
        }
        assert_eq!(sketch.estimate_median(17).unwrap(), 5.0);
        assert_eq!(sketch.estimate_mean(17).unwrap(), 5.0);
    }

    #[test]
    fn linearity_is_exact() {
        let fam = family(40, 3, 16, 9);
        let x = SparseVector::from_pairs(40, vec![(1, 2.0), (8, -3.0), (20, 7.0)]).unwrap();
        let y = SparseVector::from_pairs(40, vec![(1, -1.0), (9, 5.0), (39, 2.5)]).unwrap();
        let (alpha, beta) = (2.0, -0.5);

        let mut dense = vec![0.0; 40];
        for &(i, v) in x.entries() {
            dense[i] += alpha * v;
        }
        for &(i, v) in y.entries() {
            dense[i] += beta * v;
        }
        let combo = SparseVector::from_dense(&dense).unwrap();

        let sx = Sketch::of_vector(&x, fam.clone(), Variant::CountSketch).unwrap();
        let sy = Sketch::of_vector(&y, fam.clone(), Variant::CountSketch).unwrap();
        let s_combo = Sketch::of_vector(&combo, fam, Variant::CountSketch).unwrap();

        for (idx, cell) in s_combo.table().iter().enumerate() {
            let lhs = alpha * sx.table()[idx] + beta * sy.table()[idx];
            assert!(
                (lhs - cell).abs() <= 1e-12 * cell.abs().max(1.0),
                "cell {}: {} vs {}",
                idx,
                lhs,
                cell
            );
        }
    }

    #[test]
    fn merge_sub_of_self_is_zero() {
        let fam = family(30, 5, 4, 3);
        let x = SparseVector::from_pairs(30, vec![(2, 1.0), (15, -9.5)]).unwrap();
        let s = Sketch::of_vector(&x, fam, Variant::CountSketch).unwrap();
        let diff = s.merge_sub(&s).unwrap();
        assert!(diff.table().iter().all(|c| *c == 0.0));
    }

    #[test]
    fn merge_matches_sketch_of_sum() {
        let fam = family(30, 3, 8, 11);
        let x = SparseVector::from_pairs(30, vec![(2, 1.0), (5, 4.0)]).unwrap();
        let y = SparseVector::from_pairs(30, vec![(5, -1.5), (29, 2.0)]).unwrap();
        let mut dense = x.to_dense();
        for &(i, v) in y.entries() {
            dense[i] += v;
        }
        let sum = SparseVector::from_dense(&dense).unwrap();

        let sx = Sketch::of_vector(&x, fam.clone(), Variant::CountSketch).unwrap();
        let sy = Sketch::of_vector(&y, fam.clone(), Variant::CountSketch).unwrap();
        let merged = sx.merge_add(&sy).unwrap();
        let direct = Sketch::of_vector(&sum, fam, Variant::CountSketch).unwrap();
        for (a, b) in merged.table().iter().zip(direct.table()) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn merge_rejects_mismatches() {
        let x = SparseVector::zero(30).unwrap();
        let a = Sketch::of_vector(&x, family(30, 3, 8, 1), Variant::CountSketch).unwrap();
        let b = Sketch::of_vector(&x, family(30, 3, 8, 2), Variant::CountSketch).unwrap();
        assert!(matches!(
            a.merge_add(&b),
            Err(Error::IncompatibleSketches(_))
        ));

        let c = Sketch::of_vector(&x, family(30, 3, 8, 1), Variant::CountMin).unwrap();
        assert!(matches!(
            a.merge_add(&c),
            Err(Error::IncompatibleSketches(_))
        ));
    }

    #[test]
    fn updates_match_one_shot() {
        use rand::{Rng, SeedableRng};
        let fam = family(64, 5, 16, 77);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut dense = vec![0.0; 64];
        let mut streamed = Sketch::new(fam.clone(), Variant::CountSketch);
        for _ in 0..100 {
            let index = rng.random_range(0..64);
            let delta: f64 = rng.random_range(-10.0..10.0);
            dense[index] += delta;
            streamed.update(index, delta).unwrap();
        }
        let x = SparseVector::from_dense(&dense).unwrap();
        let one_shot = Sketch::of_vector(&x, fam, Variant::CountSketch).unwrap();
        for (a, b) in streamed.table().iter().zip(one_shot.table()) {
            assert!(
                (a - b).abs() <= 1e-9 * b.abs().max(1.0),
                "streamed {} vs one-shot {}",
                a,
                b
            );
        }
    }

    #[test]
    fn update_validates_inputs() {
        let mut s = Sketch::new(family(8, 1, 2, 0), Variant::CountSketch);
        assert!(matches!(
            s.update(8, 1.0),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(s.update(0, f64::NAN).is_err());
    }

    #[test]
    fn estimators_enforce_variant() {
        let x = SparseVector::new(10, vec![(3, 2.0)]).unwrap();
        let cs = Sketch::of_vector(&x, family(10, 3, 4, 0), Variant::CountSketch).unwrap();
        let cm = Sketch::of_vector(&x, family(10, 3, 4, 0), Variant::CountMin).unwrap();
        assert!(matches!(
            cs.estimate_min(3),
            Err(Error::WrongVariant { .. })
        ));
        assert!(matches!(
            cm.estimate_median(3),
            Err(Error::WrongVariant { .. })
        ));
        assert!(matches!(cm.estimate_mean(3), Err(Error::WrongVariant { .. })));
        assert_eq!(cm.estimate(3).unwrap(), cm.estimate_min(3).unwrap());
        assert_eq!(cs.estimate(3).unwrap(), cs.estimate_median(3).unwrap());
    }

    #[test]
    fn k1_median_is_the_single_row_estimate() {
        let fam = family(20, 1, 4, 6);
        let x = SparseVector::from_pairs(20, vec![(0, 1.0), (5, 2.0), (11, -3.0)]).unwrap();
        let s = Sketch::of_vector(&x, fam, Variant::CountSketch).unwrap();
        for index in [0usize, 5, 11, 19] {
            assert_eq!(
                s.estimate_median(index).unwrap(),
                s.row_estimates(index).unwrap()[0]
            );
        }
    }

    #[test]
    fn countmin_never_underestimates_nonnegative() {
        // One-sided error of the min estimator on nonnegative input.
        let fam = family(200, 3, 16, 14);
        let pairs: Vec<(usize, f64)> = (0..60).map(|i| (i * 3, (i % 7 + 1) as f64)).collect();
        let x = SparseVector::from_pairs(200, pairs).unwrap();
        let s = Sketch::of_vector(&x, fam, Variant::CountMin).unwrap();
        for index in 0..200 {
            assert!(
                s.estimate_min(index).unwrap() >= x.get(index) - 1e-12,
                "underestimate at {}",
                index
            );
        }
    }

    #[test]
    fn mean_estimator_matches_hand_oracle() {
        let fam = family(12, 3, 4, 5);
        let x = SparseVector::from_pairs(12, vec![(0, 2.0), (3, -1.0), (7, 4.0)]).unwrap();
        let s = Sketch::of_vector(&x, fam.clone(), Variant::CountSketch).unwrap();
        for index in 0..12 {
            let mut total = 0.0;
            for row in 0..3 {
                total += fam.sign(row, index) * s.cell(row, fam.bucket(row, index));
            }
            assert_eq!(s.estimate_mean(index).unwrap(), total / 3.0);
        }
    }

    #[test]
    fn estimate_all_validates_before_estimating() {
        let x = SparseVector::new(10, vec![(2, 1.0)]).unwrap();
        let s = Sketch::of_vector(&x, family(10, 3, 4, 0), Variant::CountSketch).unwrap();
        let err = s.estimate_all(&[0, 2, 10]).unwrap_err();
        assert!(matches!(err, Error::IndexOutOfRange { index: 10, dim: 10 }));
        let ok = s.estimate_all(&[2]).unwrap();
        assert_eq!(ok, vec![1.0]);
    }

    #[test]
    fn d1_edge_case() {
        let fam = family(1, 3, 2, 0);
        let x = SparseVector::new(1, vec![(0, 42.0)]).unwrap();
        let s = Sketch::of_vector(&x, fam, Variant::CountSketch).unwrap();
        assert_eq!(s.estimate_median(0).unwrap(), 42.0);
    }

    #[test]
    fn serialization_round_trip() {
        let fam = family(25, 3, 6, 31);
        let x = SparseVector::from_pairs(25, vec![(1, 1.25), (24, -6.5)]).unwrap();
        let s = Sketch::of_vector(&x, fam, Variant::CountSketch).unwrap();
        let mut buf = Vec::new();
        s.write_to(&mut buf).unwrap();
        let back = Sketch::read_from(&buf[..]).unwrap();
        assert_eq!(back.table(), s.table());
        assert_eq!(back.params(), s.params());
        assert_eq!(back.variant(), s.variant());
        assert_eq!(back.noise(), s.noise());
        // Rebuilt family must estimate identically.
        assert_eq!(back.estimate_median(24).unwrap(), s.estimate_median(24).unwrap());
    }

    #[test]
    fn serialization_rejects_corruption() {
        let fam = family(8, 1, 2, 0);
        let s = Sketch::new(fam, Variant::CountMin);
        let mut buf = Vec::new();
        s.write_to(&mut buf).unwrap();

        let mut bad_magic = buf.clone();
        bad_magic[4] = b'9';
        assert!(Sketch::read_from(&bad_magic[..]).is_err());

        let mut bad_variant = buf.clone();
        bad_variant[5 + 32] = 9;
        assert!(Sketch::read_from(&bad_variant[..]).is_err());

        let mut truncated = buf;
        truncated.truncate(truncated.len() - 1);
        assert!(Sketch::read_from(&truncated[..]).is_err());
    }
}
