use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{HarnessError, CATEGORIES, DATASET_SCALE, EXEMPLARS, TRAIN_PER_CATEGORY};
use crate::grammar::{Derivation, Grammar, Node, SymbolKind, Tree};
use crate::haptics::{grasp, GraspVector, HandModel};
use crate::inference::{Modality, SensoryObservation};
use crate::object::{realize, viewpoint_grid, PartLibrary, Viewpoint, VoxelObject};
use crate::vision::{descriptor, HogDescriptor};

/// One labeled fribble.
#[derive(Debug, Clone)]
pub struct Exemplar {
    /// Category id, 1-based.
    pub category: usize,
    /// Index within the category, 0-based.
    pub index: usize,
    /// One part per slot, in slot order.
    pub parts: Vec<String>,
    pub derivation: Derivation,
    pub object: VoxelObject,
    /// Grasp in the canonical pose.
    pub grasp: GraspVector,
    pub train: bool,
}

impl Exemplar {
    /// HoG descriptor in the canonical pose.
    pub fn view(&self) -> HogDescriptor {
        descriptor(&self.object, Viewpoint::IDENTITY).expect("realized exemplars are nonempty")
    }

    /// Descriptors over the 27-view grid.
    pub fn views(&self) -> Vec<HogDescriptor> {
        viewpoint_grid()
            .par_iter()
            .map(|&vp| descriptor(&self.object, vp).expect("realized exemplars are nonempty"))
            .collect()
    }

    pub fn observation(&self, modality: Modality) -> SensoryObservation {
        match modality {
            Modality::Vision => SensoryObservation::vision(self.view()),
            Modality::Haptic => SensoryObservation::haptic(self.grasp),
            Modality::Both => SensoryObservation::both(self.view(), self.grasp),
        }
    }

    /// Every part of the realized object, trunk included.
    pub fn all_parts(&self, trunk: &str) -> Vec<String> {
        let mut v = vec![trunk.to_string()];
        v.extend(self.parts.iter().cloned());
        v
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ExemplarRecord {
    category: usize,
    index: usize,
    parts: Vec<String>,
    derivation_id: String,
    train: bool,
    scale: f64,
}

/// 40 fribbles in four categories with a fixed train/test split.
#[derive(Debug, Clone)]
pub struct FribbleDataset {
    pub seed: u64,
    pub trunk: String,
    /// Prototype parts per category, in slot order.
    pub prototypes: Vec<Vec<String>>,
    /// Category-major, `EXEMPLARS` per category.
    pub exemplars: Vec<Exemplar>,
}

impl FribbleDataset {
    pub fn category(&self, k: usize) -> impl Iterator<Item = &Exemplar> {
        self.exemplars.iter().filter(move |e| e.category == k)
    }

    pub fn train(&self, k: usize) -> impl Iterator<Item = &Exemplar> {
        self.category(k).filter(|e| e.train)
    }

    pub fn test(&self) -> impl Iterator<Item = &Exemplar> {
        self.exemplars.iter().filter(|e| !e.train)
    }

    /// `dir/dataset/<seed>`.
    pub fn dir(root: &Path, seed: u64) -> PathBuf {
        root.join("dataset").join(seed.to_string())
    }

    /// Writes `cat<k>/ex<j>.{voxels,grasp,json}` under `dir`.
    pub fn export(&self, dir: &Path) -> Result<(), HarnessError> {
        for e in &self.exemplars {
            let cat = dir.join(format!("cat{}", e.category));
            fs::create_dir_all(&cat)?;
            let stem = cat.join(format!("ex{}", e.index));
            fs::write(stem.with_extension("voxels"), e.object.to_raw())?;
            fs::write(stem.with_extension("grasp"), e.grasp.to_bytes())?;
            let rec = ExemplarRecord {
                category: e.category,
                index: e.index,
                parts: e.parts.clone(),
                derivation_id: e.derivation.canonical_id(),
                train: e.train,
                scale: e.object.scale(),
            };
            fs::write(stem.with_extension("json"), serde_json::to_string_pretty(&rec)? + "\n")?;
        }
        Ok(())
    }

    /// Reads a dataset written by [`FribbleDataset::export`]. Prototypes are
    /// not stored and come back empty.
    pub fn load(dir: &Path, seed: u64, g: &Grammar, trunk: &str) -> Result<Self, HarnessError> {
        let mut exemplars = Vec::new();
        for k in 1..=CATEGORIES {
            for j in 0..EXEMPLARS {
                let stem = dir.join(format!("cat{k}")).join(format!("ex{j}"));
                let rec: ExemplarRecord = serde_json::from_str(&fs::read_to_string(stem.with_extension("json"))?)?;
                let raw = VoxelObject::read_raw(fs::File::open(stem.with_extension("voxels"))?)?;
                // The voxel header stores the scale in single precision.
                let object = VoxelObject::from_occupancy(&raw, rec.scale);
                let grasp = GraspVector::read_from(fs::File::open(stem.with_extension("grasp"))?)?;
                exemplars.push(Exemplar {
                    category: rec.category,
                    index: rec.index,
                    derivation: Derivation::from_canonical(g, &rec.derivation_id)?,
                    parts: rec.parts,
                    object,
                    grasp,
                    train: rec.train,
                });
            }
        }
        Ok(FribbleDataset {
            seed,
            trunk: trunk.to_string(),
            prototypes: Vec::new(),
            exemplars,
        })
    }
}

/// Slot preterminals of a fribble-shaped grammar, in declaration order,
/// each with its part alternatives.
fn slots(g: &Grammar) -> Vec<(String, Vec<String>)> {
    g.preterminals()
        .into_iter()
        .map(|s| {
            let parts = g
                .alternatives(s)
                .iter()
                .map(|&p| g.name(g.production(p).rhs[0]).to_string())
                .collect();
            (g.name(s).to_string(), parts)
        })
        .collect()
}

/// Builds `F -> N trunk`, `N -> M M ... M`, `M -> slot`, `slot -> part` for
/// a list with one part per slot.
pub fn slot_derivation(g: &Grammar, trunk: &str, parts: &[String]) -> Result<Derivation, HarnessError> {
    let shape = || HarnessError::Dataset("grammar is not of the trunk-plus-slots shape".into());
    let sym = |n: &str| g.lookup(n).ok_or_else(shape);
    let trunk_sym = sym(trunk)?;
    let start = g
        .alternatives(g.start())
        .iter()
        .copied()
        .find(|&p| {
            let rhs = &g.production(p).rhs;
            rhs.len() == 2 && rhs[1] == trunk_sym && g.kind(rhs[0]) != SymbolKind::Terminal
        })
        .ok_or_else(shape)?;
    let n = g.production(start).rhs[0];
    let slot_syms: Vec<_> = slots(g).iter().map(|(s, _)| sym(s)).collect::<Result<_, _>>()?;
    // The collection symbol: whatever `N` expands to with all-equal children.
    let collection = g
        .alternatives(n)
        .iter()
        .copied()
        .find(|&p| {
            let rhs = &g.production(p).rhs;
            rhs.len() == parts.len() && rhs.iter().all(|&s| s == rhs[0] && s != n)
        })
        .ok_or_else(shape)?;
    let m = g.production(collection).rhs[0];
    let mut children = Vec::with_capacity(parts.len());
    for part in parts {
        let p = sym(part)?;
        let slot = *slot_syms
            .iter()
            .find(|&&s| g.find_production(s, &[p]).is_some())
            .ok_or_else(|| HarnessError::Dataset(format!("part {part} belongs to no slot")))?;
        children.push(Tree::Node(Node {
            production: g.find_production(m, &[slot]).ok_or_else(shape)?,
            children: vec![Tree::Node(Node {
                production: g.find_production(slot, &[p]).expect("slot owns part"),
                children: vec![Tree::Leaf(p)],
            })],
        }));
    }
    let root = Node {
        production: start,
        children: vec![
            Tree::Node(Node {
                production: collection,
                children,
            }),
            Tree::Leaf(trunk_sym),
        ],
    };
    Ok(Derivation::new(root, g)?)
}

/// Per-category pools: alternative `i` of every slot goes to category
/// `i mod 4`, so categories never share a part.
fn pools(g: &Grammar) -> Vec<Vec<Vec<String>>> {
    let slots = slots(g);
    (0..CATEGORIES)
        .map(|k| {
            slots
                .iter()
                .map(|(_, alts)| alts.iter().skip(k).step_by(CATEGORIES).cloned().collect())
                .collect()
        })
        .collect()
}

/// Every variant of `proto` with one or two slots swapped for another part
/// of the same pool.
fn variants(proto: &[String], pool: &[Vec<String>]) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    let alts = |s: usize| pool[s].iter().filter(|p| **p != proto[s]).cloned().collect::<Vec<_>>();
    for a in 0..proto.len() {
        for pa in alts(a) {
            let mut v = proto.to_vec();
            v[a] = pa;
            out.push(v);
        }
    }
    for a in 0..proto.len() {
        for b in a + 1..proto.len() {
            for pa in alts(a) {
                for pb in alts(b) {
                    let mut v = proto.to_vec();
                    v[a] = pa.clone();
                    v[b] = pb;
                    out.push(v);
                }
            }
        }
    }
    out
}

/// Procedural stand-in for the fribble set: four prototypes with disjoint
/// parts, ten perturbed exemplars each, realized at scale 0.3.
pub fn synthesize_dataset(
    lib: &PartLibrary,
    g: &Grammar,
    hand: &HandModel,
    seed: u64,
) -> Result<FribbleDataset, HarnessError> {
    lib.validate(g)?;
    let trunk = lib.trunk.clone();
    let pools = pools(g);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut prototypes = Vec::with_capacity(CATEGORIES);
    let mut plans = Vec::new();
    for (k, pool) in pools.iter().enumerate() {
        if pool.iter().any(|alts| alts.is_empty()) {
            return Err(HarnessError::Dataset(format!("category {} has an empty slot pool", k + 1)));
        }
        let proto: Vec<String> = pool.iter().map(|alts| alts[0].clone()).collect();
        let mut vars = variants(&proto, pool);
        if vars.len() < EXEMPLARS {
            return Err(HarnessError::Dataset(format!(
                "category {} allows only {} distinct exemplars",
                k + 1,
                vars.len()
            )));
        }
        vars.shuffle(&mut rng);
        vars.truncate(EXEMPLARS);
        let mut order: Vec<usize> = (0..EXEMPLARS).collect();
        order.shuffle(&mut rng);
        let train: Vec<bool> = (0..EXEMPLARS).map(|j| order[..TRAIN_PER_CATEGORY].contains(&j)).collect();
        for (j, parts) in vars.into_iter().enumerate() {
            plans.push((k + 1, j, parts, train[j]));
        }
        prototypes.push(proto);
    }
    let exemplars = plans
        .into_par_iter()
        .map(|(category, index, parts, train)| {
            let derivation = slot_derivation(g, &trunk, &parts)?;
            let object = realize(&derivation.yield_names(g), lib, DATASET_SCALE)?;
            let grasp = grasp(&object, hand);
            Ok(Exemplar {
                category,
                index,
                parts,
                derivation,
                object,
                grasp,
                train,
            })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    Ok(FribbleDataset {
        seed,
        trunk,
        prototypes,
        exemplars,
    })
}
