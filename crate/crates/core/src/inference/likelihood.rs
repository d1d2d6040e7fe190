use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::InferenceError;
use crate::grammar::{Derivation, Grammar, SymbolId};
use crate::haptics::{cosine_similarity, free_travel, grasp_from_travel, GraspVector, HandModel, JOINTS};
use crate::object::{realize, viewpoint_grid, PartLibrary, RotatedView};
use crate::vision::{dcor, hog, ColumnMask, HogDescriptor};

/// `ln L(X | D)` for a fixed observation `X`.
pub trait Likelihood {
    fn log_likelihood(&mut self, d: &Derivation, g: &Grammar) -> f64;
}

/// Any closure of a derivation is a likelihood.
pub struct FnLikelihood<F>(pub F);

impl<F: FnMut(&Derivation, &Grammar) -> f64> Likelihood for FnLikelihood<F> {
    fn log_likelihood(&mut self, d: &Derivation, g: &Grammar) -> f64 {
        (self.0)(d, g)
    }
}

/// Constant likelihood: the chain samples the prior.
pub struct FlatLikelihood;

impl Likelihood for FlatLikelihood {
    fn log_likelihood(&mut self, _: &Derivation, _: &Grammar) -> f64 {
        0.0
    }
}

/// A fixed pseudo-random likelihood in `[0.05, 1]` per terminal yield,
/// derived from a seed. Used to exercise the sampler on toy grammars.
pub struct SyntheticLikelihood {
    seed: u64,
}

impl SyntheticLikelihood {
    pub fn new(seed: u64) -> Self {
        SyntheticLikelihood { seed }
    }

    pub fn value(&self, d: &Derivation, g: &Grammar) -> f64 {
        let key = d.yield_names(g).join(" ");
        let h = fnv1a(self.seed.to_le_bytes().iter().chain(key.as_bytes()));
        0.05 + 0.95 * (h >> 11) as f64 / (1u64 << 53) as f64
    }
}

impl Likelihood for SyntheticLikelihood {
    fn log_likelihood(&mut self, d: &Derivation, g: &Grammar) -> f64 {
        self.value(d, g).ln()
    }
}

fn fnv1a<'a>(bytes: impl Iterator<Item = &'a u8>) -> u64 {
    bytes.fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Vision,
    Haptic,
    Both,
}

impl Modality {
    pub fn uses_vision(self) -> bool {
        matches!(self, Modality::Vision | Modality::Both)
    }

    pub fn uses_haptic(self) -> bool {
        matches!(self, Modality::Haptic | Modality::Both)
    }
}

/// The sensory data `X`: one or both channel observations.
#[derive(Debug, Clone)]
pub struct SensoryObservation {
    modality: Modality,
    vision: Option<HogDescriptor>,
    haptic: Option<GraspVector>,
}

impl SensoryObservation {
    pub fn new(
        modality: Modality,
        vision: Option<HogDescriptor>,
        haptic: Option<GraspVector>,
    ) -> Result<Self, InferenceError> {
        if modality.uses_vision() != vision.is_some() || modality.uses_haptic() != haptic.is_some() {
            return Err(InferenceError::Config(format!(
                "observation channels do not match modality {modality:?}"
            )));
        }
        Ok(SensoryObservation {
            modality,
            vision,
            haptic,
        })
    }

    pub fn vision(d: HogDescriptor) -> Self {
        SensoryObservation {
            modality: Modality::Vision,
            vision: Some(d),
            haptic: None,
        }
    }

    pub fn haptic(g: GraspVector) -> Self {
        SensoryObservation {
            modality: Modality::Haptic,
            vision: None,
            haptic: Some(g),
        }
    }

    pub fn both(d: HogDescriptor, g: GraspVector) -> Self {
        SensoryObservation {
            modality: Modality::Both,
            vision: Some(d),
            haptic: Some(g),
        }
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }
}

/// Log likelihoods of one realized hypothesis, per channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelScores {
    pub vision: Option<f64>,
    pub haptic: Option<f64>,
}

impl ChannelScores {
    /// Channels are independent given the object, so log values add.
    pub fn total(&self) -> f64 {
        self.vision.unwrap_or(0.0) + self.haptic.unwrap_or(0.0)
    }
}

/// One part seen from every grid view: its column masks and the free
/// travel of every joint.
struct PartViews {
    masks: Vec<ColumnMask>,
    travel: Vec<[usize; JOINTS]>,
}

/// Likelihood of a derivation through its realized object.
///
/// Each channel's similarity `s` enters as `s^β` with sharpness `β`
/// (default 1). An object is the union of its parts, so its silhouette mask
/// at a view is the union of the parts' masks and each joint stops at the
/// nearest part. Both are assembled from per-part views computed once;
/// the result equals scoring the realized object directly. Scores are
/// cached by the set of distinct terminals.
pub struct SensoryLikelihood<'a> {
    lib: &'a PartLibrary,
    hand: &'a HandModel,
    obs: SensoryObservation,
    scale: f64,
    sharpness: f64,
    parts: HashMap<SymbolId, Option<PartViews>>,
    cache: HashMap<Vec<SymbolId>, ChannelScores>,
    evaluations: usize,
}

impl<'a> SensoryLikelihood<'a> {
    pub fn new(lib: &'a PartLibrary, hand: &'a HandModel, obs: SensoryObservation, scale: f64) -> Self {
        SensoryLikelihood {
            lib,
            hand,
            obs,
            scale,
            sharpness: 1.0,
            parts: HashMap::new(),
            cache: HashMap::new(),
            evaluations: 0,
        }
    }

    pub fn with_sharpness(mut self, beta: f64) -> Self {
        assert!(beta > 0.0, "sharpness must be positive");
        self.sharpness = beta;
        self.cache.clear();
        self
    }

    pub fn sharpness(&self) -> f64 {
        self.sharpness
    }

    /// Number of distinct objects scored so far.
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    /// `None` when the part cannot be realized at this scale.
    fn part_views(&mut self, sym: SymbolId, g: &Grammar) -> Option<&PartViews> {
        let (lib, hand, scale) = (self.lib, self.hand, self.scale);
        let (vision, haptic) = (self.obs.vision.is_some(), self.obs.haptic.is_some());
        self.parts
            .entry(sym)
            .or_insert_with(|| {
                let v = realize(&[g.name(sym)], lib, scale).ok()?;
                let views: Vec<(ColumnMask, [usize; JOINTS])> = viewpoint_grid()
                    .par_iter()
                    .map(|&vp| {
                        let r = RotatedView::new(&v, vp);
                        let mask = if vision { ColumnMask::of(&r) } else { ColumnMask::empty(0) };
                        let travel = if haptic { free_travel(&r, hand) } else { [0; JOINTS] };
                        (mask, travel)
                    })
                    .collect();
                let (masks, travel) = views.into_iter().unzip();
                Some(PartViews { masks, travel })
            })
            .as_ref()
    }

    pub fn channels(&mut self, d: &Derivation, g: &Grammar) -> ChannelScores {
        let mut key = d.terminal_yield();
        key.sort_unstable();
        key.dedup();
        if let Some(&s) = self.cache.get(&key) {
            return s;
        }
        self.evaluations += 1;
        for &sym in &key {
            self.part_views(sym, g);
        }
        let views: Option<Vec<&PartViews>> = key.iter().map(|s| self.parts[s].as_ref()).collect();
        let beta = self.sharpness;
        let scores = match views {
            Some(views) if !views.is_empty() => ChannelScores {
                vision: self.obs.vision.as_ref().map(|h| beta * vision_from_masks(h, &views).ln()),
                haptic: self.obs.haptic.as_ref().map(|o| beta * haptic_from_travel(o, &views, self.hand).ln()),
            },
            // An unrealizable hypothesis cannot have produced the data.
            _ => ChannelScores {
                vision: self.obs.vision.as_ref().map(|_| f64::NEG_INFINITY),
                haptic: self.obs.haptic.as_ref().map(|_| f64::NEG_INFINITY),
            },
        };
        self.cache.insert(key, scores);
        scores
    }
}

/// Best correlation over the grid of the union silhouettes; 0 for an empty
/// object.
fn vision_from_masks(observed: &HogDescriptor, parts: &[&PartViews]) -> f64 {
    (0..parts[0].masks.len())
        .into_par_iter()
        .map(|i| {
            let mut m = parts[0].masks[i].clone();
            for p in &parts[1..] {
                m.union_with(&p.masks[i]);
            }
            m.silhouette()
                .map(|s| dcor(observed.values(), hog(&s.blurred()).values()))
                .unwrap_or(0.0)
        })
        .reduce(|| 0.0, f64::max)
}

fn haptic_from_travel(observed: &GraspVector, parts: &[&PartViews], hand: &HandModel) -> f64 {
    (0..parts[0].travel.len())
        .map(|i| {
            let mut t = parts[0].travel[i];
            for p in &parts[1..] {
                for (a, &b) in t.iter_mut().zip(&p.travel[i]) {
                    *a = (*a).min(b);
                }
            }
            cosine_similarity(observed, &grasp_from_travel(&t, hand))
        })
        .fold(0.0, f64::max)
}

impl Likelihood for SensoryLikelihood<'_> {
    fn log_likelihood(&mut self, d: &Derivation, g: &Grammar) -> f64 {
        self.channels(d, g).total()
    }
}
