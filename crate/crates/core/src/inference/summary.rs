use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::InferenceError;
use crate::grammar::{Derivation, Grammar};
use crate::object::{realize, PartLibrary, VoxelObject};

/// Visit counts of post-burn-in states, keyed by canonical derivation id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub counts: BTreeMap<String, u64>,
    /// Terminal yield of every recorded derivation.
    pub yields: BTreeMap<String, Vec<String>>,
    pub total: u64,
}

impl PosteriorSummary {
    pub fn record(&mut self, id: &str, d: &Derivation, g: &Grammar) {
        match self.counts.get_mut(id) {
            Some(c) => *c += 1,
            None => {
                self.counts.insert(id.to_string(), 1);
                self.yields.insert(id.to_string(), d.yield_names(g));
            }
        }
        self.total += 1;
    }

    /// Pools another summary's samples into this one.
    pub fn merge(&mut self, other: &PosteriorSummary) {
        for (id, &c) in &other.counts {
            *self.counts.entry(id.clone()).or_insert(0) += c;
            self.yields
                .entry(id.clone())
                .or_insert_with(|| other.yields[id].clone());
        }
        self.total += other.total;
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn frequency(&self, id: &str) -> f64 {
        self.counts.get(id).map_or(0.0, |&c| c as f64 / self.total as f64)
    }

    pub fn frequencies(&self) -> BTreeMap<String, f64> {
        self.counts
            .iter()
            .map(|(id, &c)| (id.clone(), c as f64 / self.total as f64))
            .collect()
    }

    /// Visit frequencies aggregated by terminal multiset (sorted yield).
    pub fn multiset_frequencies(&self) -> BTreeMap<Vec<String>, f64> {
        let mut out = BTreeMap::new();
        for (id, &c) in &self.counts {
            let mut ms = self.yields[id].clone();
            ms.sort();
            *out.entry(ms).or_insert(0.0) += c as f64 / self.total as f64;
        }
        out
    }

    /// Most visited derivation; ties go to the lexicographically smallest
    /// terminal sequence, then the smallest id.
    pub fn map_id(&self) -> Option<&str> {
        self.counts
            .iter()
            .max_by(|(ia, ca), (ib, cb)| {
                ca.cmp(cb)
                    .then_with(|| self.yields[*ib].cmp(&self.yields[*ia]))
                    .then_with(|| ib.cmp(ia))
            })
            .map(|(id, _)| id.as_str())
    }

    pub fn map_derivation(&self, g: &Grammar) -> Result<Option<Derivation>, InferenceError> {
        self.map_id()
            .map(|id| Derivation::from_canonical(g, id).map_err(InferenceError::from))
            .transpose()
    }

    pub fn map_yield(&self) -> Option<&[String]> {
        self.map_id().map(|id| self.yields[id].as_slice())
    }

    /// JSON export with frequencies and the MAP id; [`PosteriorSummary::from_json`]
    /// reads it back.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Export<'a> {
            total: u64,
            map: Option<&'a str>,
            frequencies: BTreeMap<String, f64>,
            counts: &'a BTreeMap<String, u64>,
            yields: &'a BTreeMap<String, Vec<String>>,
        }
        serde_json::to_string_pretty(&Export {
            total: self.total,
            map: self.map_id(),
            frequencies: self.frequencies(),
            counts: &self.counts,
            yields: &self.yields,
        })
        .expect("summary serializes")
    }
}

impl PosteriorSummary {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Realizes the MAP derivation's parts.
pub fn extract_prototype(
    summary: &PosteriorSummary,
    lib: &PartLibrary,
    scale: f64,
) -> Result<VoxelObject, InferenceError> {
    let parts = summary
        .map_yield()
        .ok_or_else(|| InferenceError::Config("empty posterior summary".into()))?;
    Ok(realize(parts, lib, scale)?)
}

/// Total-variation distance `½ Σ |p − q|` between two distributions given
/// as id → probability maps.
pub fn tv_distance(p: &BTreeMap<String, f64>, q: &BTreeMap<String, f64>) -> f64 {
    let keys: BTreeSet<&String> = p.keys().chain(q.keys()).collect();
    0.5 * keys
        .into_iter()
        .map(|k| (p.get(k).copied().unwrap_or(0.0) - q.get(k).copied().unwrap_or(0.0)).abs())
        .sum::<f64>()
}
