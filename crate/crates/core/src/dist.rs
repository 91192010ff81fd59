//! Probability vectors, count histograms and recorded calibration datasets.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::matrix::ORDER_MSB_FIRST;

#[derive(Debug, Clone, PartialEq)]
pub struct ProbDist {
    n: usize,
    probs: Vec<f64>,
}

impl ProbDist {
    pub fn new(n: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != 1 << n {
            return Err(Error::DimensionMismatch {
                expected: 1 << n,
                found: probs.len(),
            });
        }
        Ok(Self { n, probs })
    }

    pub fn from_counts(counts: &Counts) -> Self {
        let n = counts.prepared.n();
        let mut probs = vec![0.0; 1 << n];
        let total = counts.shots as f64;
        for (x, &c) in &counts.histogram {
            probs[x.index()] = c as f64 / total;
        }
        Self { n, probs }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// `[P(x_q = 0), P(x_q = 1)]`
    pub fn marginal(&self, q: usize) -> [f64; 2] {
        let mask = BitString::mask_of(self.n, q);
        let mut out = [0.0; 2];
        for (x, p) in self.probs.iter().enumerate() {
            out[usize::from(x & mask != 0)] += p;
        }
        out
    }

    /// `joint[a][b] = P(x_i = a, x_j = b)`
    pub fn joint(&self, i: usize, j: usize) -> [[f64; 2]; 2] {
        let (mi, mj) = (BitString::mask_of(self.n, i), BitString::mask_of(self.n, j));
        let mut out = [[0.0; 2]; 2];
        for (x, p) in self.probs.iter().enumerate() {
            out[usize::from(x & mi != 0)][usize::from(x & mj != 0)] += p;
        }
        out
    }

    pub fn to_json(&self) -> DistributionJson {
        DistributionJson {
            n: self.n,
            probs: BitString::all(self.n)
                .zip(&self.probs)
                .map(|(x, &p)| (x, p))
                .collect(),
        }
    }

    /// Missing bitstrings read as probability 0.
    pub fn from_json(j: DistributionJson) -> Result<Self> {
        let mut probs = vec![0.0; 1 << j.n];
        for (x, p) in j.probs {
            if x.n() != j.n {
                return Err(Error::Schema {
                    record: None,
                    message: format!("bitstring {x} has length {} in a {}-qubit distribution", x.n(), j.n),
                });
            }
            probs[x.index()] = p;
        }
        Self::new(j.n, probs)
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        Self::from_json(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&self.to_json())? + "\n")?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistributionJson {
    pub n: usize,
    pub probs: BTreeMap<BitString, f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub prepared: BitString,
    pub shots: u64,
    #[serde(rename = "counts")]
    pub histogram: BTreeMap<BitString, u64>,
}

impl Counts {
    fn check(&self, n: usize, record: usize) -> Result<()> {
        let err = |message: String| Error::Schema {
            record: Some(record),
            message,
        };
        if self.prepared.n() != n {
            return Err(err(format!("prepared state {} is not {n} bits", self.prepared)));
        }
        if self.shots == 0 {
            return Err(err("shots must be positive".into()));
        }
        if let Some(x) = self.histogram.keys().find(|x| x.n() != n) {
            return Err(err(format!("outcome {x} is not {n} bits")));
        }
        let total: u64 = self.histogram.values().sum();
        if total != self.shots {
            return Err(err(format!("histogram sums to {total}, shots = {}", self.shots)));
        }
        Ok(())
    }
}

/// Recorded counts, one record per prepared state.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    records: Vec<Counts>,
    index: HashMap<BitString, usize>,
}

#[derive(Serialize, Deserialize)]
struct DatasetJson {
    n: usize,
    order: String,
    records: Vec<Counts>,
}

impl Dataset {
    pub fn new(n: usize, records: Vec<Counts>) -> Result<Self> {
        let mut index = HashMap::with_capacity(records.len());
        for (r, c) in records.iter().enumerate() {
            c.check(n, r)?;
            if index.insert(c.prepared, r).is_some() {
                return Err(Error::Schema {
                    record: Some(r),
                    message: format!("duplicate prepared state {}", c.prepared),
                });
            }
        }
        Ok(Self { n, records, index })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn records(&self) -> &[Counts] {
        &self.records
    }

    pub fn get(&self, prepared: BitString) -> Option<&Counts> {
        self.index.get(&prepared).map(|&r| &self.records[r])
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let j: DatasetJson = serde_json::from_str(s).map_err(|e| Error::Schema {
            record: None,
            message: e.to_string(),
        })?;
        if j.order != ORDER_MSB_FIRST {
            return Err(Error::Schema {
                record: None,
                message: format!("unsupported bit order {:?}", j.order),
            });
        }
        Self::new(j.n, j.records)
    }

    pub fn to_json_string(&self) -> Result<String> {
        let mut records = self.records.clone();
        records.sort_by_key(|c| c.prepared);
        let j = DatasetJson {
            n: self.n,
            order: ORDER_MSB_FIRST.into(),
            records,
        };
        Ok(serde_json::to_string_pretty(&j)? + "\n")
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bs(s: &str) -> BitString {
        BitString::parse(s).unwrap()
    }

    #[test]
    fn marginals_of_known_distribution() {
        let p = ProbDist::new(2, vec![0.5, 0.2, 0.2, 0.1]).unwrap();
        let m0 = p.marginal(0);
        assert!((m0[0] - 0.7).abs() < 1e-15 && (m0[1] - 0.3).abs() < 1e-15);
        let m1 = p.marginal(1);
        assert!((m1[0] - 0.7).abs() < 1e-15);
        let j = p.joint(0, 1);
        assert_eq!(j[0][1], 0.2);
        assert_eq!(j[1][0], 0.2);
        assert_eq!(p.joint(1, 0)[0][1], 0.2);
    }

    #[test]
    fn dataset_schema_errors_name_the_record() {
        let good = r#"{"n":2,"order":"msb-first","records":[
            {"prepared":"00","shots":10,"counts":{"00":9,"01":1}}]}"#;
        assert!(Dataset::from_json_str(good).is_ok());

        let mismatch = r#"{"n":2,"order":"msb-first","records":[
            {"prepared":"00","shots":10,"counts":{"00":9}}]}"#;
        let e = Dataset::from_json_str(mismatch).unwrap_err().to_string();
        assert!(e.contains("record 0"), "{e}");

        let dup = r#"{"n":2,"order":"msb-first","records":[
            {"prepared":"00","shots":1,"counts":{"00":1}},
            {"prepared":"00","shots":1,"counts":{"00":1}}]}"#;
        let e = Dataset::from_json_str(dup).unwrap_err().to_string();
        assert!(e.contains("record 1") && e.contains("duplicate"), "{e}");

        assert!(Dataset::from_json_str("{not json").is_err());
        let wrong_len = r#"{"n":2,"order":"msb-first","records":[
            {"prepared":"000","shots":1,"counts":{"000":1}}]}"#;
        assert!(Dataset::from_json_str(wrong_len).is_err());
    }

    #[test]
    fn distribution_json() {
        let p = ProbDist::new(1, vec![0.25, 0.75]).unwrap();
        let s = serde_json::to_string(&p.to_json()).unwrap();
        assert_eq!(s, r#"{"n":1,"probs":{"0":0.25,"1":0.75}}"#);
        let back = ProbDist::from_json(serde_json::from_str(&s).unwrap()).unwrap();
        assert_eq!(back, p);
        let c = Counts {
            prepared: bs("1"),
            shots: 4,
            histogram: [(bs("1"), 3), (bs("0"), 1)].into_iter().collect(),
        };
        assert_eq!(ProbDist::from_counts(&c).probs(), &[0.25, 0.75]);
    }
}
