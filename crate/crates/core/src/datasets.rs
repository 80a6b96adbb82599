//! Dataset ingestion: city-population CSVs and market-basket transaction
//! files (one whitespace-separated basket per line).
//!
//! Both loaders produce a frequency vector over a string-keyed index map
//! (first-seen order) plus ingest statistics; the transaction loader also
//! keeps the baskets themselves so group privacy can reason about them.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};
use crate::sketch::SparseVector;

/// What ingestion had to clean up.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadStats {
    /// CSV rows whose key was already present (values summed).
    pub duplicate_keys: usize,
    /// Transaction lines dropped for non-integer tokens.
    pub rejected_lines: usize,
    /// Baskets cut down to the basket-size cap after dedup.
    pub truncated_baskets: usize,
}

/// A loaded dataset: its frequency vector, key <-> index maps, and (for
/// transaction data) the baskets.
#[derive(Debug, Clone)]
pub struct Dataset {
    name: String,
    keys: Vec<String>,
    index_of: HashMap<String, usize>,
    vector: SparseVector,
    baskets: Option<Vec<Vec<usize>>>,
    stats: LoadStats,
}

impl Dataset {
    /// Load a `city,population` CSV (header required, column order and
    /// case free, quoting per RFC 4180). Duplicate city names sum their
    /// populations and are counted in the stats.
    ///
    /// # Errors
    /// `Dataset` for a missing/ambiguous header, a malformed row, a
    /// non-finite or negative population, or an empty table.
    pub fn load_cities_csv<P: AsRef<Path>>(path: P) -> Result<Dataset> {
        let path = path.as_ref();
        let mut reader = csv::ReaderBuilder::new()
            .flexible(true)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::Dataset(format!("{}: {}", path.display(), e)))?;

        let headers = reader
            .headers()
            .map_err(|e| Error::Dataset(format!("{}: {}", path.display(), e)))?;
        let find = |name: &str| -> Option<usize> {
            headers
                .iter()
                .position(|h| h.eq_ignore_ascii_case(name))
        };
        let city_col = find("city")
            .ok_or_else(|| Error::Dataset(format!("{}: no 'city' column", path.display())))?;
        let pop_col = find("population").ok_or_else(|| {
            Error::Dataset(format!("{}: no 'population' column", path.display()))
        })?;

        let mut keys: Vec<String> = Vec::new();
        let mut index_of: HashMap<String, usize> = HashMap::new();
        let mut counts: Vec<f64> = Vec::new();
        let mut stats = LoadStats::default();

        for (row_idx, record) in reader.records().enumerate() {
            let line = row_idx + 2; // header is line 1
            let record =
                record.map_err(|e| Error::Dataset(format!("{} line {}: {}", path.display(), line, e)))?;
            let city = record.get(city_col).unwrap_or("").trim();
            if city.is_empty() {
                return Err(Error::Dataset(format!(
                    "{} line {}: empty city name",
                    path.display(),
                    line
                )));
            }
            let raw_pop = record.get(pop_col).ok_or_else(|| {
                Error::Dataset(format!(
                    "{} line {}: missing population field",
                    path.display(),
                    line
                ))
            })?;
            let population: f64 = raw_pop.trim().parse().map_err(|_| {
                Error::Dataset(format!(
                    "{} line {}: population '{}' is not a number",
                    path.display(),
                    line,
                    raw_pop
                ))
            })?;
            if !population.is_finite() || population < 0.0 {
                return Err(Error::Dataset(format!(
                    "{} line {}: population {} must be finite and nonnegative",
                    path.display(),
                    line,
                    population
                )));
            }
            match index_of.get(city) {
                Some(&idx) => {
                    counts[idx] += population;
                    stats.duplicate_keys += 1;
                }
                None => {
                    index_of.insert(city.to_string(), keys.len());
                    keys.push(city.to_string());
                    counts.push(population);
                }
            }
        }
        if keys.is_empty() {
            return Err(Error::Dataset(format!(
                "{}: no data rows",
                path.display()
            )));
        }

        let entries = counts.iter().copied().enumerate().collect();
        let vector = SparseVector::new(keys.len(), entries)?;
        let name = stem_of(path);
        Ok(Dataset {
            name,
            keys,
            index_of,
            vector,
            baskets: None,
            stats,
        })
    }

    /// Load a transaction file: one basket per line, whitespace-separated
    /// integer item ids. Repeated ids within a line are dropped (set
    /// semantics, first occurrence kept), baskets are truncated to
    /// `max_basket` items after dedup, and lines with any non-integer
    /// token are rejected and counted.
    ///
    /// # Errors
    /// `InvalidParameter` for `max_basket == 0`; `Dataset` when no usable
    /// basket remains.
    pub fn load_transactions<P: AsRef<Path>>(path: P, max_basket: usize) -> Result<Dataset> {
        if max_basket == 0 {
            return Err(Error::InvalidParameter(
                "max_basket must be at least 1".into(),
            ));
        }
        let path = path.as_ref();
        let file = File::open(path)
            .map_err(|e| Error::Dataset(format!("{}: {}", path.display(), e)))?;
        let reader = BufReader::new(file);

        let mut keys: Vec<String> = Vec::new();
        let mut index_of: HashMap<String, usize> = HashMap::new();
        let mut counts: Vec<f64> = Vec::new();
        let mut baskets: Vec<Vec<usize>> = Vec::new();
        let mut stats = LoadStats::default();
        let mut saw_line = false;

        'lines: for line in reader.lines() {
            let line = line?;
            saw_line = true;
            let mut ids: Vec<u64> = Vec::new();
            for token in line.split_whitespace() {
                match token.parse::<u64>() {
                    Ok(id) => ids.push(id),
                    Err(_) => {
                        stats.rejected_lines += 1;
                        continue 'lines;
                    }
                }
            }
            // Set semantics: first occurrence wins.
            let mut seen = std::collections::HashSet::new();
            ids.retain(|id| seen.insert(*id));
            if ids.len() > max_basket {
                ids.truncate(max_basket);
                stats.truncated_baskets += 1;
            }
            let mut basket = Vec::with_capacity(ids.len());
            for id in ids {
                let key = id.to_string();
                let idx = match index_of.get(&key) {
                    Some(&idx) => idx,
                    None => {
                        let idx = keys.len();
                        index_of.insert(key.clone(), idx);
                        keys.push(key);
                        counts.push(0.0);
                        idx
                    }
                };
                counts[idx] += 1.0;
                basket.push(idx);
            }
            baskets.push(basket);
        }
        if !saw_line || keys.is_empty() {
            return Err(Error::Dataset(format!(
                "{}: no usable transactions",
                path.display()
            )));
        }

        let entries = counts.iter().copied().enumerate().collect();
        let vector = SparseVector::new(keys.len(), entries)?;
        let name = stem_of(path);
        Ok(Dataset {
            name,
            keys,
            index_of,
            vector,
            baskets: Some(baskets),
            stats,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Number of distinct keys (the vector dimension).
    pub fn distinct_ids(&self) -> usize {
        self.vector.dim()
    }

    /// Sum of all frequencies.
    pub fn total_count(&self) -> f64 {
        self.vector.entries().iter().map(|(_, v)| v).sum()
    }

    pub fn vector(&self) -> &SparseVector {
        &self.vector
    }

    /// Indices with nonzero frequency.
    pub fn support_indices(&self) -> Vec<usize> {
        self.vector.support()
    }

    pub fn baskets(&self) -> Option<&[Vec<usize>]> {
        self.baskets.as_deref()
    }

    /// Largest basket size actually present (after dedup/truncation).
    pub fn max_basket_size(&self) -> Option<usize> {
        self.baskets
            .as_ref()
            .map(|bs| bs.iter().map(Vec::len).max().unwrap_or(0))
    }

    pub fn stats(&self) -> LoadStats {
        self.stats
    }

    pub fn key(&self, index: usize) -> Option<&str> {
        self.keys.get(index).map(String::as_str)
    }

    pub fn index(&self, key: &str) -> Option<usize> {
        self.index_of.get(key).copied()
    }

    /// The dataset vector next to its basket-neighbor: the same vector
    /// with one count removed for each item of basket `basket_idx`.
    /// Removing an empty basket yields an identical pair.
    ///
    /// # Errors
    /// `Dataset` if the dataset has no baskets, `InvalidParameter` if the
    /// index is out of range.
    pub fn neighboring_pair(&self, basket_idx: usize) -> Result<(SparseVector, SparseVector)> {
        let baskets = self
            .baskets
            .as_ref()
            .ok_or_else(|| Error::Dataset("dataset has no baskets".into()))?;
        let basket = baskets.get(basket_idx).ok_or_else(|| {
            Error::InvalidParameter(format!(
                "basket index {} out of range for {} baskets",
                basket_idx,
                baskets.len()
            ))
        })?;
        let mut dense = self.vector.to_dense();
        for &idx in basket {
            dense[idx] -= 1.0;
        }
        let without = SparseVector::from_dense(&dense)?;
        Ok((self.vector.clone(), without))
    }

    /// Line-oriented ingest summary.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("dataset: {}\n", self.name));
        out.push_str(&format!("distinct_ids: {}\n", self.distinct_ids()));
        out.push_str(&format!("total_count: {}\n", self.total_count()));
        if let Some(baskets) = &self.baskets {
            out.push_str(&format!("baskets: {}\n", baskets.len()));
            out.push_str(&format!(
                "max_basket_size: {}\n",
                self.max_basket_size().unwrap_or(0)
            ));
            out.push_str(&format!(
                "truncated_baskets: {}\n",
                self.stats.truncated_baskets
            ));
            out.push_str(&format!("rejected_lines: {}\n", self.stats.rejected_lines));
        } else {
            out.push_str(&format!("duplicate_keys: {}\n", self.stats.duplicate_keys));
        }
        out
    }
}

fn stem_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string())
}
