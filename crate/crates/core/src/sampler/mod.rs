//! Random partitions from the grand-canonical measure `μ_x` and from the
//! measure conditioned on `N = n`.

mod counts;
mod rng;
mod small;

use serde::{Deserialize, Serialize};

pub use counts::{sample_count, CountLaw, GrandCanonical, CUSTOM_MAX_TERMS, CUSTOM_TAIL};
pub use rng::RngStream;
pub use small::{budget_exponent, default_budget, ExactSampler, RejectionSampler, EXACT_MAX_ATTEMPTS};

use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::partition_function::CoefficientTable;
use crate::scalar::{Coefficient, Real};

/// A partition stored as its nonzero counts `(k, R_k)`, `k` ascending.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    counts: Vec<(u64, u64)>,
    weight: u64,
}

impl Partition {
    /// Builds a partition from `(k, R_k)` pairs in any order; zero counts are
    /// dropped and repeated sizes merged.
    pub fn from_counts(pairs: impl IntoIterator<Item = (u64, u64)>) -> Result<Self> {
        let mut map = std::collections::BTreeMap::new();
        for (k, r) in pairs {
            if k == 0 {
                return Err(Error::param("part sizes start at 1"));
            }
            if r > 0 {
                *map.entry(k).or_insert(0u64) += r;
            }
        }
        Ok(Self::from_sorted(map.into_iter().collect()))
    }

    /// From a list of part sizes.
    pub fn from_parts(parts: &[u64]) -> Result<Self> {
        Self::from_counts(parts.iter().map(|&k| (k, 1)))
    }

    pub(crate) fn from_sorted(counts: Vec<(u64, u64)>) -> Self {
        debug_assert!(counts.windows(2).all(|w| w[0].0 < w[1].0));
        let weight = counts.iter().map(|(k, r)| k * r).sum();
        Self { counts, weight }
    }

    pub fn counts(&self) -> &[(u64, u64)] {
        &self.counts
    }

    /// `N = Σ k R_k`.
    pub fn weight(&self) -> u64 {
        self.weight
    }

    pub fn count(&self, k: u64) -> u64 {
        self.counts
            .binary_search_by_key(&k, |(j, _)| *j)
            .map(|i| self.counts[i].1)
            .unwrap_or(0)
    }

    pub fn num_parts(&self) -> u64 {
        self.counts.iter().map(|(_, r)| r).sum()
    }

    pub fn largest_part(&self) -> u64 {
        self.counts.last().map_or(0, |(k, _)| *k)
    }

    /// Parts in nonincreasing order.
    pub fn parts(&self) -> Vec<u64> {
        let mut out = Vec::with_capacity(self.num_parts() as usize);
        for &(k, r) in self.counts.iter().rev() {
            out.extend(std::iter::repeat_n(k, r as usize));
        }
        out
    }

    pub fn record(&self, stream: RngStream) -> PartitionRecord {
        PartitionRecord {
            n: self.weight,
            counts: self.counts.iter().map(|&(k, r)| [k, r]).collect(),
            seed: stream.seed,
            stream: stream.stream,
        }
    }
}

/// One line of the partition JSON-lines format.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionRecord {
    pub n: u64,
    pub counts: Vec<[u64; 2]>,
    pub seed: u64,
    pub stream: u64,
}

impl PartitionRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("record serialises")
    }

    pub fn partition(&self) -> Result<Partition> {
        let p = Partition::from_counts(self.counts.iter().map(|c| (c[0], c[1])))?;
        if p.weight() != self.n {
            return Err(Error::param(format!(
                "record weight {} does not match n = {}",
                p.weight(),
                self.n
            )));
        }
        Ok(p)
    }
}

/// One draw from `μ_x`.
pub fn sample_grand<T: Real>(e: &Ensemble<T>, x: T, stream: RngStream) -> Result<Partition> {
    Ok(GrandCanonical::new(e, x)?.sample(&mut stream.rng()))
}

/// One draw from the measure conditioned on `N = n`, by rejection from
/// `μ_{x_n}`. `budget` defaults to `20⌈n^γ⌉`.
pub fn sample_small_rejection<T: Real>(
    e: &Ensemble<T>,
    n: u64,
    stream: RngStream,
    budget: Option<u64>,
) -> Result<Partition> {
    Ok(RejectionSampler::new(e, n, budget)?.sample(&mut stream.rng())?.0)
}

/// One exact draw from the measure conditioned on `N = n`, using the prefix
/// tables of `table`.
pub fn sample_small_exact<C: Coefficient, T: Real>(
    e: &Ensemble<T>,
    n: u64,
    stream: RngStream,
    table: &CoefficientTable<C>,
) -> Result<Partition> {
    ExactSampler::from_table(e, n as usize, table)?.sample(&mut stream.rng())
}
