//! Sources of measured distributions: the exact model, finite-shot sampling
//! of it, or replay of recorded counts.
//!
//! Sampling is reproducible across platforms. Each query draws from a
//! ChaCha20 stream keyed by `seed` (via `SeedableRng::seed_from_u64`) with
//! stream id `(prepared_index << 32) | ordinal`, where `ordinal` counts earlier
//! queries of the same prepared state. Uniforms take the top 53 bits of each
//! `u64`, and outcomes come from inverse-CDF lookup over the `2^n` vector.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::dist::{Counts, Dataset, ProbDist};
use crate::error::{Error, Result};
use crate::model::NoiseModel;

pub const PRNG_NAME: &str = "chacha20 (rand_chacha 0.9), stream = prepared_index << 32 | ordinal, u53 inverse-CDF";

pub const DEFAULT_SHOTS: u64 = 32768;

#[derive(Debug, Clone)]
pub enum BackendKind {
    Exact(NoiseModel),
    Sampled { model: NoiseModel, shots: u64 },
    Replay(Dataset),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub kind: String,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prng: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Backend {
    kind: BackendKind,
    seed: u64,
    ordinals: HashMap<BitString, u32>,
}

impl Backend {
    pub fn exact(model: NoiseModel) -> Self {
        Self {
            kind: BackendKind::Exact(model),
            seed: 0,
            ordinals: HashMap::new(),
        }
    }

    pub fn sampled(model: NoiseModel, shots: u64, seed: u64) -> Result<Self> {
        if shots == 0 {
            return Err(Error::InvalidArgument("shots must be positive".into()));
        }
        Ok(Self {
            kind: BackendKind::Sampled { model, shots },
            seed,
            ordinals: HashMap::new(),
        })
    }

    pub fn replay(dataset: Dataset) -> Self {
        Self {
            kind: BackendKind::Replay(dataset),
            seed: 0,
            ordinals: HashMap::new(),
        }
    }

    pub fn ingest(path: &Path) -> Result<Self> {
        Ok(Self::replay(Dataset::read(path)?))
    }

    /// Seed used when an exact backend is asked for finite-shot counts.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn kind(&self) -> &BackendKind {
        &self.kind
    }

    pub fn n(&self) -> usize {
        match &self.kind {
            BackendKind::Exact(m) | BackendKind::Sampled { model: m, .. } => m.n(),
            BackendKind::Replay(d) => d.n(),
        }
    }

    pub fn model(&self) -> Option<&NoiseModel> {
        match &self.kind {
            BackendKind::Exact(m) | BackendKind::Sampled { model: m, .. } => Some(m),
            BackendKind::Replay(_) => None,
        }
    }

    pub fn descriptor(&self) -> BackendDescriptor {
        let n = self.n();
        match &self.kind {
            BackendKind::Exact(_) => BackendDescriptor {
                kind: "exact".into(),
                n,
                shots: None,
                seed: None,
                prng: None,
            },
            BackendKind::Sampled { shots, .. } => BackendDescriptor {
                kind: "sampled".into(),
                n,
                shots: Some(*shots),
                seed: Some(self.seed),
                prng: Some(PRNG_NAME.into()),
            },
            BackendKind::Replay(_) => BackendDescriptor {
                kind: "replay".into(),
                n,
                shots: None,
                seed: None,
                prng: None,
            },
        }
    }

    fn check_state(&self, xprime: BitString) -> Result<()> {
        if xprime.n() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: xprime.n(),
            });
        }
        Ok(())
    }

    fn next_ordinal(&mut self, xprime: BitString) -> u32 {
        let o = self.ordinals.entry(xprime).or_insert(0);
        let current = *o;
        *o += 1;
        current
    }

    /// Distribution observed after preparing `xprime`.
    pub fn distribution(&mut self, xprime: BitString) -> Result<ProbDist> {
        self.check_state(xprime)?;
        match &self.kind {
            BackendKind::Exact(m) => ProbDist::new(m.n(), m.exact_column(xprime)),
            BackendKind::Sampled { shots, .. } => {
                let shots = *shots;
                Ok(ProbDist::from_counts(&self.sample_counts(xprime, shots)?))
            }
            BackendKind::Replay(d) => d
                .get(xprime)
                .map(ProbDist::from_counts)
                .ok_or_else(|| Error::MissingPreparations(vec![xprime])),
        }
    }

    /// Finite-shot histogram for `xprime`. Replay returns the stored record
    /// and ignores `shots`.
    pub fn sample_counts(&mut self, xprime: BitString, shots: u64) -> Result<Counts> {
        self.check_state(xprime)?;
        if shots == 0 {
            return Err(Error::InvalidArgument("shots must be positive".into()));
        }
        if let BackendKind::Replay(d) = &self.kind {
            return d
                .get(xprime)
                .cloned()
                .ok_or_else(|| Error::MissingPreparations(vec![xprime]));
        }
        let ordinal = self.next_ordinal(xprime);
        let model = self.model().expect("non-replay backend has a model");
        let column = model.exact_column(xprime);
        Ok(draw_counts(&column, xprime, shots, self.seed, ordinal))
    }
}

/// Multinomial draw of `shots` outcomes from `column` with the documented stream layout.
pub fn draw_counts(column: &[f64], prepared: BitString, shots: u64, seed: u64, ordinal: u32) -> Counts {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(((prepared.index() as u64) << 32) | ordinal as u64);
    let mut cdf = Vec::with_capacity(column.len());
    let mut acc = 0.0;
    for &p in column {
        acc += p.max(0.0);
        cdf.push(acc);
    }
    let total = acc;
    let n = prepared.n();
    let mut tally = vec![0u64; column.len()];
    for _ in 0..shots {
        let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64) * total;
        let idx = cdf.partition_point(|&c| c <= u).min(column.len() - 1);
        tally[idx] += 1;
    }
    let histogram: BTreeMap<BitString, u64> = tally
        .into_iter()
        .enumerate()
        .filter(|(_, c)| *c > 0)
        .map(|(x, c)| (BitString::from_index(n, x), c))
        .collect();
    Counts {
        prepared,
        shots,
        histogram,
    }
}

/// Memoizing front end over a backend. Each distinct preparation is measured
/// once and shared by every quantity derived from it.
pub struct Session<'a> {
    backend: &'a mut Backend,
    cache: BTreeMap<BitString, ProbDist>,
}

impl<'a> Session<'a> {
    pub fn new(backend: &'a mut Backend) -> Self {
        Self {
            backend,
            cache: BTreeMap::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.backend.n()
    }

    pub fn backend(&self) -> &Backend {
        self.backend
    }

    pub fn measure(&mut self, xprime: BitString) -> Result<&ProbDist> {
        if !self.cache.contains_key(&xprime) {
            let d = self.backend.distribution(xprime)?;
            self.cache.insert(xprime, d);
        }
        Ok(&self.cache[&xprime])
    }

    /// Measure every state in `states`, reporting all missing ones together.
    pub fn prefetch<I: IntoIterator<Item = BitString>>(&mut self, states: I) -> Result<()> {
        let mut missing = Vec::new();
        for s in states {
            match self.measure(s) {
                Ok(_) => {}
                Err(Error::MissingPreparations(m)) => missing.extend(m),
                Err(e) => return Err(e),
            }
        }
        if missing.is_empty() {
            Ok(())
        } else {
            missing.sort();
            missing.dedup();
            Err(Error::MissingPreparations(missing))
        }
    }

    /// Distinct preparations issued so far.
    pub fn circuits_used(&self) -> usize {
        self.cache.len()
    }

    pub fn issued(&self) -> BTreeSet<BitString> {
        self.cache.keys().copied().collect()
    }
}
