use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{FribbleDataset, HarnessError, CATEGORIES, DATASET_SCALE, DEFAULT_SHARPNESS};
use crate::grammar::Grammar;
use crate::haptics::{best_similarity, grasps_over, GraspVector, HandModel};
use crate::inference::{
    extract_prototype, run_chain, ChainConfig, Modality, PosteriorSummary, SensoryLikelihood, TraceRow,
};
use crate::object::{realize, viewpoint_grid, PartLibrary, Viewpoint, VoxelObject};
use crate::vision::{dcor, descriptor, HogDescriptor};

/// Per-chain seeds for one category: stream `category` of a generator
/// seeded with the run seed.
pub fn chain_seeds(seed: u64, category: usize, chains: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(category as u64);
    (0..chains).map(|_| rng.next_u64()).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainReport {
    /// Index of the training exemplar the chain observed.
    pub exemplar: usize,
    pub seed: u64,
    pub acceptance_rate: f64,
    /// Distinct objects realized by the chain's likelihood.
    pub evaluations: usize,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
}

#[derive(Debug, Clone)]
pub struct CategoryModel {
    pub category: usize,
    /// Post-burn-in samples of every chain, pooled.
    pub summary: PosteriorSummary,
    pub chains: Vec<ChainReport>,
}

/// What each training chain observes and how it runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub modality: Modality,
    /// Likelihood sharpness `β`; see [`SensoryLikelihood`].
    pub sharpness: f64,
    pub chain: ChainConfig,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            modality: Modality::Both,
            sharpness: DEFAULT_SHARPNESS,
            chain: ChainConfig::default(),
        }
    }
}

/// One chain per training exemplar of `category`, pooled into one summary.
pub fn train_category(
    data: &FribbleDataset,
    category: usize,
    settings: &TrainSettings,
    g: &Grammar,
    lib: &PartLibrary,
    hand: &HandModel,
) -> Result<CategoryModel, HarnessError> {
    if !(1..=CATEGORIES).contains(&category) {
        return Err(HarnessError::Dataset(format!("no category {category}")));
    }
    let train: Vec<_> = data.train(category).collect();
    let config = &settings.chain;
    let seeds = chain_seeds(config.seed, category, train.len());
    let runs = train
        .par_iter()
        .zip(seeds)
        .map(|(ex, seed)| {
            let mut lik = SensoryLikelihood::new(lib, hand, ex.observation(settings.modality), DATASET_SCALE)
                .with_sharpness(settings.sharpness);
            let run = run_chain(g, &mut lik, &ChainConfig { seed, ..*config })?;
            Ok((
                run.summary,
                ChainReport {
                    exemplar: ex.index,
                    seed,
                    acceptance_rate: run.state.acceptance_rate(),
                    evaluations: lik.evaluations(),
                    trace: run.state.trace,
                },
            ))
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    let mut summary = PosteriorSummary::default();
    let mut chains = Vec::with_capacity(runs.len());
    for (s, r) in runs {
        summary.merge(&s);
        chains.push(r);
    }
    Ok(CategoryModel {
        category,
        summary,
        chains,
    })
}

/// A category prototype with its grasps and descriptors over the view grid.
#[derive(Debug, Clone)]
pub struct Prototype {
    pub category: usize,
    pub derivation_id: String,
    pub parts: Vec<String>,
    pub object: VoxelObject,
    pub grasps: Vec<GraspVector>,
    pub views: Vec<HogDescriptor>,
}

impl Prototype {
    pub fn from_parts(
        category: usize,
        derivation_id: String,
        parts: Vec<String>,
        lib: &PartLibrary,
        hand: &HandModel,
    ) -> Result<Self, HarnessError> {
        let object = realize(&parts, lib, DATASET_SCALE)?;
        Prototype::from_object(category, derivation_id, parts, object, hand)
    }

    pub fn from_object(
        category: usize,
        derivation_id: String,
        parts: Vec<String>,
        object: VoxelObject,
        hand: &HandModel,
    ) -> Result<Self, HarnessError> {
        let vps = viewpoint_grid();
        let grasps = grasps_over(&object, hand, &vps);
        let views = vps
            .par_iter()
            .map(|&vp| descriptor(&object, vp))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Prototype {
            category,
            derivation_id,
            parts,
            object,
            grasps,
            views,
        })
    }

    /// The pooled MAP derivation of a trained category.
    pub fn from_model(model: &CategoryModel, lib: &PartLibrary, hand: &HandModel) -> Result<Self, HarnessError> {
        let object = extract_prototype(&model.summary, lib, DATASET_SCALE)?;
        let id = model.summary.map_id().expect("extracted from a nonempty summary");
        let parts = model.summary.map_yield().expect("nonempty summary").to_vec();
        Prototype::from_object(model.category, id.to_string(), parts, object, hand)
    }

    pub fn haptic_score(&self, test: &GraspVector) -> f64 {
        best_similarity(test, &self.grasps)
    }

    pub fn vision_score(&self, test: &HogDescriptor) -> f64 {
        self.views
            .iter()
            .map(|v| dcor(test.values(), v.values()))
            .fold(0.0, f64::max)
    }
}

/// Index of the largest score, first one on ties, as a 1-based category.
fn argmax(prototypes: &[Prototype], scores: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..scores.len() {
        if scores[i] > scores[best] {
            best = i;
        }
    }
    prototypes[best].category
}

/// Category of the prototype whose grasps best match `test`.
pub fn categorize_haptic(test: &GraspVector, prototypes: &[Prototype]) -> usize {
    let scores: Vec<f64> = prototypes.iter().map(|p| p.haptic_score(test)).collect();
    argmax(prototypes, &scores)
}

/// Category of the prototype whose views best match `test`.
pub fn categorize_vision(test: &HogDescriptor, prototypes: &[Prototype]) -> usize {
    let scores: Vec<f64> = prototypes.iter().map(|p| p.vision_score(test)).collect();
    argmax(prototypes, &scores)
}

/// Orientation and scale applied to a test object before it is rendered.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    /// Grid view the object is rendered from.
    pub view: Viewpoint,
    pub heading_offset: f64,
    pub pitch_offset: f64,
    pub scale: f64,
}

impl Perturbation {
    pub const MAX_OFFSET: f64 = 20.0;
    pub const SCALE_RANGE: (f64, f64) = (0.7, 1.3);

    pub fn none() -> Self {
        Perturbation::grid(Viewpoint::IDENTITY)
    }

    /// A pure grid rotation.
    pub fn grid(view: Viewpoint) -> Self {
        Perturbation {
            view,
            heading_offset: 0.0,
            pitch_offset: 0.0,
            scale: 1.0,
        }
    }

    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let grid = viewpoint_grid();
        let view = grid[rng.gen_range(0..grid.len())];
        Perturbation {
            view,
            heading_offset: rng.gen_range(-Self::MAX_OFFSET..=Self::MAX_OFFSET),
            pitch_offset: rng.gen_range(-Self::MAX_OFFSET..=Self::MAX_OFFSET),
            scale: rng.gen_range(Self::SCALE_RANGE.0..=Self::SCALE_RANGE.1),
        }
    }

    pub fn viewpoint(&self) -> Viewpoint {
        Viewpoint::new(self.view.heading + self.heading_offset, self.view.pitch + self.pitch_offset)
    }

    /// HoG of the parts realized at the dataset scale times `self.scale`,
    /// seen from the perturbed viewpoint.
    pub fn render(&self, parts: &[String], lib: &PartLibrary) -> Result<HogDescriptor, HarnessError> {
        let object = realize(parts, lib, DATASET_SCALE * self.scale)?;
        Ok(descriptor(&object, self.viewpoint())?)
    }
}

/// Rows are true categories, columns predictions.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u32; CATEGORIES]; CATEGORIES],
}

impl ConfusionMatrix {
    /// Records one prediction; categories are 1-based.
    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth - 1][predicted - 1] += 1;
    }

    pub fn correct(&self) -> u32 {
        (0..CATEGORIES).map(|i| self.counts[i][i]).sum()
    }

    pub fn total(&self) -> u32 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sum(&self, truth: usize) -> u32 {
        self.counts[truth - 1].iter().sum()
    }

    /// Fraction correct; 0 for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            t => self.correct() as f64 / t as f64,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("true\\predicted");
        for k in 1..=CATEGORIES {
            out.push_str(&format!(",{k}"));
        }
        out.push('\n');
        for (i, row) in self.counts.iter().enumerate() {
            out.push_str(&(i + 1).to_string());
            for c in row {
                out.push_str(&format!(",{c}"));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub category: usize,
    pub index: usize,
    pub predicted: usize,
    /// Score against each prototype, in prototype order.
    pub scores: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<Perturbation>,
}

/// Categorizes every held-out exemplar by its canonical grasp.
pub fn haptic_sweep(data: &FribbleDataset, prototypes: &[Prototype]) -> (ConfusionMatrix, Vec<TestOutcome>) {
    let mut m = ConfusionMatrix::default();
    let outcomes: Vec<TestOutcome> = data
        .test()
        .map(|e| {
            let scores: Vec<f64> = prototypes.iter().map(|p| p.haptic_score(&e.grasp)).collect();
            TestOutcome {
                category: e.category,
                index: e.index,
                predicted: argmax(prototypes, &scores),
                scores,
                perturbation: None,
            }
        })
        .collect();
    for o in &outcomes {
        m.record(o.category, o.predicted);
    }
    (m, outcomes)
}

/// Categorizes every held-out exemplar from one perturbed rendering. The
/// perturbations are drawn in test order from `seed`.
pub fn vision_sweep(
    data: &FribbleDataset,
    prototypes: &[Prototype],
    lib: &PartLibrary,
    seed: u64,
) -> Result<(ConfusionMatrix, Vec<TestOutcome>), HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(CATEGORIES as u64 + 1);
    let tests: Vec<_> = data.test().map(|e| (e, Perturbation::sample(&mut rng))).collect();
    let outcomes = tests
        .par_iter()
        .map(|(e, p)| {
            let hog = p.render(&e.all_parts(&data.trunk), lib)?;
            let scores: Vec<f64> = prototypes.iter().map(|q| q.vision_score(&hog)).collect();
            Ok(TestOutcome {
                category: e.category,
                index: e.index,
                predicted: argmax(prototypes, &scores),
                scores,
                perturbation: Some(*p),
            })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    let mut m = ConfusionMatrix::default();
    for o in &outcomes {
        m.record(o.category, o.predicted);
    }
    Ok((m, outcomes))
}
