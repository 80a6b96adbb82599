//! Seeded fully-random hash and sign families.
//!
//! A family materializes, for each of `k` rows, a bucket table
//! `h_i: [d] -> [b]` and a sign table `s_i: [d] -> {-1, +1}` as explicit
//! arrays. Tables are filled from per-row ChaCha8 streams whose seeds are
//! derived from the master seed, so row `i`'s buckets and signs are
//! independent streams and the whole family is a pure function of
//! `(d, k, b, seed)`.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::seeds;

/// Magic prefix of the serialized family format.
pub const FAMILY_MAGIC: &[u8; 5] = b"PCSH1";

/// Default ceiling on `k * d` table entries (~1 GiB of buckets at u32).
pub const MAX_FAMILY_ENTRIES: u64 = 1 << 30;

/// Shape and seed of a sketch: dimension `d`, rows `k` (odd), buckets per
/// row `b` (even), and the master seed the hash family is derived from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SketchParams {
    pub d: usize,
    pub k: usize,
    pub b: usize,
    pub seed: u64,
}

impl SketchParams {
    /// Validated constructor.
    ///
    /// # Errors
    /// `InvalidParameter` if `d == 0`, `k` is zero or even, `b` is zero or
    /// odd, or `b` does not fit in `u32`.
    pub fn new(d: usize, k: usize, b: usize, seed: u64) -> Result<Self> {
        let params = SketchParams { d, k, b, seed };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::InvalidParameter(
                "dimension d must be at least 1".into(),
            ));
        }
        if self.k == 0 || self.k % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "row count k must be positive and odd, got {}",
                self.k
            )));
        }
        if self.b == 0 || self.b % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "bucket count b must be positive and even, got {}",
                self.b
            )));
        }
        if self.b > u32::MAX as usize {
            return Err(Error::InvalidParameter(format!(
                "bucket count b must fit in 32 bits, got {}",
                self.b
            )));
        }
        Ok(())
    }

    /// Cells in the sketch table (`k * b`).
    pub fn table_len(&self) -> usize {
        self.k * self.b
    }

    /// Entries a materialized family holds (`k * d`), saturating.
    pub fn family_entries(&self) -> u64 {
        (self.k as u64).saturating_mul(self.d as u64)
    }
}

/// Materialized hash/sign family for one [`SketchParams`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashFamily {
    params: SketchParams,
    /// Row-major `k x d`, values in `[0, b)`.
    buckets: Vec<u32>,
    /// Row-major `k x d`, values in `{-1, +1}`.
    signs: Vec<i8>,
}

impl HashFamily {
    /// Build the family for `params`, refusing tables over
    /// [`MAX_FAMILY_ENTRIES`].
    ///
    /// # Errors
    /// `FamilyTooLarge` past the entry ceiling, `InvalidParameter` from
    /// parameter validation.
    pub fn build(params: SketchParams) -> Result<Self> {
        let entries = params.family_entries();
        if entries > MAX_FAMILY_ENTRIES {
            return Err(Error::FamilyTooLarge {
                entries,
                limit: MAX_FAMILY_ENTRIES,
            });
        }
        Self::build_unlimited(params)
    }

    /// Build without the entry ceiling. The caller owns the memory math:
    /// tables cost `5 * k * d` bytes.
    pub fn build_unlimited(params: SketchParams) -> Result<Self> {
        params.validate()?;
        let (k, d, b) = (params.k, params.d, params.b as u32);
        let mut buckets = Vec::with_capacity(k * d);
        let mut signs = Vec::with_capacity(k * d);
        for row in 0..k as u64 {
            let mut bucket_rng = ChaCha8Rng::seed_from_u64(seeds::derive(params.seed, 2 * row));
            for _ in 0..d {
                buckets.push(bucket_rng.random_range(0..b));
            }
            let mut sign_rng = ChaCha8Rng::seed_from_u64(seeds::derive(params.seed, 2 * row + 1));
            for _ in 0..d {
                signs.push(if sign_rng.random::<bool>() { 1 } else { -1 });
            }
        }
        Ok(HashFamily {
            params,
            buckets,
            signs,
        })
    }

    pub fn params(&self) -> &SketchParams {
        &self.params
    }

    /// Bucket of coordinate `index` in row `row` (both 0-based).
    #[inline]
    pub fn bucket(&self, row: usize, index: usize) -> usize {
        self.buckets[row * self.params.d + index] as usize
    }

    /// Sign of coordinate `index` in row `row`, as `-1.0` or `+1.0`.
    #[inline]
    pub fn sign(&self, row: usize, index: usize) -> f64 {
        f64::from(self.signs[row * self.params.d + index])
    }

    /// All d buckets of one row.
    pub fn bucket_row(&self, row: usize) -> &[u32] {
        let d = self.params.d;
        &self.buckets[row * d..(row + 1) * d]
    }

    /// All d signs of one row.
    pub fn sign_row(&self, row: usize) -> &[i8] {
        let d = self.params.d;
        &self.signs[row * d..(row + 1) * d]
    }

    /// Serialize as `PCSH1 || d,k,b,seed (u64 LE) || buckets (u32 LE) || signs (i8)`.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(FAMILY_MAGIC)?;
        for v in [
            self.params.d as u64,
            self.params.k as u64,
            self.params.b as u64,
            self.params.seed,
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
        for &bucket in &self.buckets {
            w.write_all(&bucket.to_le_bytes())?;
        }
        for &sign in &self.signs {
            w.write_all(&[sign as u8])?;
        }
        Ok(())
    }

    /// Inverse of [`write_to`](Self::write_to), validating magic, parameter
    /// domains, bucket ranges, and sign values.
    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 5];
        r.read_exact(&mut magic)?;
        if &magic != FAMILY_MAGIC {
            return Err(Error::Format(format!(
                "bad family magic {:?}, expected {:?}",
                magic, FAMILY_MAGIC
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
        let entries = params
            .family_entries()
            .try_into()
            .map_err(|_| Error::Format("family entry count overflows usize".into()))?;
        let mut buckets = vec![0u32; entries];
        let mut u32buf = [0u8; 4];
        for bucket in &mut buckets {
            r.read_exact(&mut u32buf)?;
            *bucket = u32::from_le_bytes(u32buf);
            if *bucket as usize >= params.b {
                return Err(Error::Format(format!(
                    "bucket value {} out of range for b={}",
                    bucket, params.b
                )));
            }
        }
        let mut signs = vec![0i8; entries];
        let mut byte = [0u8; 1];
        for sign in &mut signs {
            r.read_exact(&mut byte)?;
            *sign = byte[0] as i8;
            if *sign != 1 && *sign != -1 {
                return Err(Error::Format(format!("sign byte {} is not ±1", byte[0])));
            }
        }
        Ok(HashFamily {
            params,
            buckets,
            signs,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_validation() {
        assert!(SketchParams::new(10, 3, 8, 0).is_ok());
        assert!(SketchParams::new(0, 3, 8, 0).is_err()); // d = 0
        assert!(SketchParams::new(10, 4, 8, 0).is_err()); // k even
        assert!(SketchParams::new(10, 0, 8, 0).is_err()); // k zero
        assert!(SketchParams::new(10, 3, 7, 0).is_err()); // b odd
        assert!(SketchParams::new(10, 3, 0, 0).is_err()); // b zero
    }

    #[test]
    fn ranges_and_shapes() {
        let params = SketchParams::new(500, 5, 16, 99).unwrap();
        let fam = HashFamily::build(params).unwrap();
        for row in 0..5 {
            assert_eq!(fam.bucket_row(row).len(), 500);
            assert_eq!(fam.sign_row(row).len(), 500);
            for idx in 0..500 {
                assert!(fam.bucket(row, idx) < 16);
                let s = fam.sign(row, idx);
                assert!(s == 1.0 || s == -1.0);
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let params = SketchParams::new(200, 3, 8, 7).unwrap();
        let a = HashFamily::build(params).unwrap();
        let b = HashFamily::build(params).unwrap();
        assert_eq!(a, b);

        let other = HashFamily::build(SketchParams::new(200, 3, 8, 8).unwrap()).unwrap();
        assert_ne!(a.buckets, other.buckets);
    }

    #[test]
    fn rows_are_distinct_streams() {
        let params = SketchParams::new(1000, 3, 64, 5).unwrap();
        let fam = HashFamily::build(params).unwrap();
        assert_ne!(fam.bucket_row(0), fam.bucket_row(1));
        assert_ne!(fam.sign_row(0), fam.sign_row(2));
    }

    #[test]
    fn entry_ceiling_enforced() {
        // k * d = 3 * (2^30) > 2^30
        let params = SketchParams::new(1 << 30, 3, 2, 0).unwrap();
        let err = HashFamily::build(params).unwrap_err();
        assert!(matches!(err, Error::FamilyTooLarge { .. }));
    }

    #[test]
    fn serialization_round_trip() {
        let params = SketchParams::new(64, 3, 4, 123).unwrap();
        let fam = HashFamily::build(params).unwrap();
        let mut buf = Vec::new();
        fam.write_to(&mut buf).unwrap();
        let back = HashFamily::read_from(&buf[..]).unwrap();
        assert_eq!(fam, back);
    }

    #[test]
    fn serialization_rejects_corruption() {
        let params = SketchParams::new(16, 1, 4, 1).unwrap();
        let fam = HashFamily::build(params).unwrap();
        let mut buf = Vec::new();
        fam.write_to(&mut buf).unwrap();

        let mut bad_magic = buf.clone();
        bad_magic[0] = b'X';
        assert!(HashFamily::read_from(&bad_magic[..]).is_err());

        let mut bad_bucket = buf.clone();
        bad_bucket[5 + 32] = 200; // first bucket -> 200 >= b=4
        assert!(HashFamily::read_from(&bad_bucket[..]).is_err());

        let mut truncated = buf.clone();
        truncated.truncate(buf.len() - 3);
        assert!(HashFamily::read_from(&truncated[..]).is_err());

        let mut bad_sign = buf;
        let last = bad_sign.len() - 1;
        bad_sign[last] = 7;
        assert!(HashFamily::read_from(&bad_sign[..]).is_err());
    }
}
