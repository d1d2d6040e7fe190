use std::fs;
use std::path::Path;

use serde::Serialize;

use super::{ConfusionMatrix, HarnessError, Prototype, TestOutcome};
use crate::inference::{trace_csv, TraceRow};
use crate::object::Viewpoint;
use crate::vision::project;

/// Everything a report is written from.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub seed: u64,
    pub haptic: ConfusionMatrix,
    pub vision: ConfusionMatrix,
    pub haptic_outcomes: Vec<TestOutcome>,
    pub vision_outcomes: Vec<TestOutcome>,
    pub prototypes: Vec<Prototype>,
    /// Named chain traces, written as `traces/<name>.csv`.
    pub traces: Vec<(String, Vec<TraceRow>)>,
}

#[derive(Serialize)]
struct Score {
    correct: u32,
    total: u32,
    accuracy: f64,
}

impl From<&ConfusionMatrix> for Score {
    fn from(m: &ConfusionMatrix) -> Self {
        Score {
            correct: m.correct(),
            total: m.total(),
            accuracy: m.accuracy(),
        }
    }
}

#[derive(Serialize)]
struct PrototypeEntry<'a> {
    category: usize,
    derivation_id: &'a str,
    parts: &'a [String],
}

#[derive(Serialize)]
struct Accuracy<'a> {
    seed: u64,
    haptic: Score,
    vision: Score,
    prototypes: Vec<PrototypeEntry<'a>>,
    haptic_outcomes: &'a [TestOutcome],
    vision_outcomes: &'a [TestOutcome],
}

/// Writes confusion matrices, `accuracy.json`, prototype silhouettes and
/// chain traces under `dir`.
pub fn emit_report(r: &Report, dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir.join("prototypes"))?;
    fs::write(dir.join("confusion_haptic.csv"), r.haptic.to_csv())?;
    fs::write(dir.join("confusion_vision.csv"), r.vision.to_csv())?;
    let acc = Accuracy {
        seed: r.seed,
        haptic: (&r.haptic).into(),
        vision: (&r.vision).into(),
        prototypes: r
            .prototypes
            .iter()
            .map(|p| PrototypeEntry {
                category: p.category,
                derivation_id: &p.derivation_id,
                parts: &p.parts,
            })
            .collect(),
        haptic_outcomes: &r.haptic_outcomes,
        vision_outcomes: &r.vision_outcomes,
    };
    fs::write(dir.join("accuracy.json"), serde_json::to_string_pretty(&acc)? + "\n")?;
    for p in &r.prototypes {
        let mut buf = Vec::new();
        project(&p.object, Viewpoint::IDENTITY)?.write_pgm(&mut buf)?;
        fs::write(dir.join("prototypes").join(format!("cat{}.pgm", p.category)), buf)?;
    }
    if !r.traces.is_empty() {
        fs::create_dir_all(dir.join("traces"))?;
        for (name, rows) in &r.traces {
            fs::write(dir.join("traces").join(format!("{name}.csv")), trace_csv(rows))?;
        }
    }
    Ok(())
}
