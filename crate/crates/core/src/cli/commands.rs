use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use fribble::grammar::{fribble_grammar, parse_grammar, Grammar, DEFAULT_MAX_DEPTH};
use fribble::haptics::HandModel;
use fribble::harness::{
    emit_report, haptic_sweep, synthesize_dataset, train_category, vision_sweep, ChainReport, ConfusionMatrix,
    FribbleDataset, Prototype, Report, TestOutcome, TrainSettings, CATEGORIES, DATASET_SCALE,
};
use fribble::inference::{
    count_derivations, enumerate_posterior, parse_trace_csv, run_chain, trace_csv, tv_distance, ChainConfig, PosteriorSummary,
    SyntheticLikelihood,
};
use fribble::object::{realize, PartLibrary, Viewpoint};
use fribble::vision::project;

use super::{Command, RunConfig};

/// Oracle-check passes below this total-variation distance.
const ORACLE_TV: f64 = 0.05;
/// Largest language the automatic oracle depth admits.
const ORACLE_LANGUAGE: u128 = 200;

struct Inputs {
    g: Grammar,
    lib: PartLibrary,
    hand: HandModel,
}

fn read(p: &Path) -> Result<String> {
    fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))
}

fn load(cfg: &RunConfig) -> Result<Inputs> {
    let g = match &cfg.grammar {
        Some(p) => parse_grammar(&read(p)?).with_context(|| p.display().to_string())?,
        None => fribble_grammar(),
    };
    let lib = match &cfg.parts {
        Some(p) => PartLibrary::from_json(&read(p)?).with_context(|| p.display().to_string())?,
        None => PartLibrary::shipped(),
    };
    let hand = match &cfg.hand {
        Some(p) => HandModel::from_json(&read(p)?).with_context(|| p.display().to_string())?,
        None => HandModel::shipped(),
    };
    Ok(Inputs { g, lib, hand })
}

fn write(path: PathBuf, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

pub fn run(cfg: &RunConfig) -> Result<ExitCode> {
    match cfg.command {
        Command::GenDataset => gen_dataset(cfg),
        Command::Train => train(cfg),
        Command::Sample => sample(cfg),
        Command::Categorize => categorize(cfg),
        Command::OracleCheck => oracle_check(cfg),
        Command::Report => report(cfg),
    }
}

fn dataset_dir(cfg: &RunConfig) -> PathBuf {
    FribbleDataset::dir(&cfg.out, cfg.seed)
}

fn load_dataset(cfg: &RunConfig, inputs: &Inputs) -> Result<FribbleDataset> {
    let dir = dataset_dir(cfg);
    if !dir.is_dir() {
        bail!("no dataset at {}; run gen-dataset first", dir.display());
    }
    FribbleDataset::load(&dir, cfg.seed, &inputs.g, &inputs.lib.trunk)
        .with_context(|| format!("loading {}", dir.display()))
}

fn gen_dataset(cfg: &RunConfig) -> Result<ExitCode> {
    let inputs = load(cfg)?;
    let data = synthesize_dataset(&inputs.lib, &inputs.g, &inputs.hand, cfg.seed)?;
    let dir = dataset_dir(cfg);
    data.export(&dir)?;
    cfg.write(&dir)?;
    println!("wrote {} fribbles to {}", data.exemplars.len(), dir.display());
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Serialize, Deserialize)]
struct PrototypeRecord {
    category: usize,
    derivation_id: String,
    parts: Vec<String>,
}

fn chain_config(cfg: &RunConfig, trace: bool) -> ChainConfig {
    ChainConfig {
        iterations: cfg.iterations,
        burn_in: cfg.burn_in,
        seed: cfg.seed,
        mode: cfg.mode,
        max_depth: cfg.max_depth.unwrap_or(DEFAULT_MAX_DEPTH),
        trace,
    }
}

fn train(cfg: &RunConfig) -> Result<ExitCode> {
    let inputs = load(cfg)?;
    let data = load_dataset(cfg, &inputs)?;
    let settings = TrainSettings {
        modality: cfg.modality,
        sharpness: cfg.sharpness,
        chain: chain_config(cfg, true),
    };
    let dir = cfg.out.join("train");
    let mut records = Vec::new();
    for k in 1..=CATEGORIES {
        let model = train_category(&data, k, &settings, &inputs.g, &inputs.lib, &inputs.hand)?;
        let cat = dir.join(format!("cat{k}"));
        write(cat.join("summary.json"), model.summary.to_json())?;
        write(cat.join("chains.json"), json(&model.chains)?)?;
        for (j, c) in model.chains.iter().enumerate() {
            write(cat.join(format!("chain{j}.csv")), trace_csv(&c.trace))?;
        }
        let id = model.summary.map_id().context("empty posterior")?.to_string();
        let parts = model.summary.map_yield().context("empty posterior")?.to_vec();
        println!("category {k}: prototype {}", parts.join(" "));
        records.push(PrototypeRecord {
            category: k,
            derivation_id: id,
            parts,
        });
    }
    write(dir.join("prototypes.json"), json(&records)?)?;
    cfg.write(&dir)?;
    Ok(ExitCode::SUCCESS)
}

fn load_prototypes(cfg: &RunConfig, inputs: &Inputs) -> Result<Vec<Prototype>> {
    let path = cfg.out.join("train").join("prototypes.json");
    let records: Vec<PrototypeRecord> = serde_json::from_str(&read(&path)?).context("prototypes.json")?;
    records
        .into_iter()
        .map(|r| Ok(Prototype::from_parts(r.category, r.derivation_id, r.parts, &inputs.lib, &inputs.hand)?))
        .collect()
}

fn sample(cfg: &RunConfig) -> Result<ExitCode> {
    let inputs = load(cfg)?;
    let dir = cfg.out.join("sample");
    for k in 1..=CATEGORIES {
        let path = cfg.out.join("train").join(format!("cat{k}")).join("summary.json");
        let summary = PosteriorSummary::from_json(&read(&path)?).with_context(|| path.display().to_string())?;
        let ids: Vec<&String> = summary.counts.keys().collect();
        let pick = WeightedIndex::new(summary.counts.values()).context("empty posterior")?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(k as u64);
        for j in 0..cfg.samples {
            let id = ids[pick.sample(&mut rng)];
            let parts = &summary.yields[id];
            let object = realize(parts, &inputs.lib, DATASET_SCALE)?;
            let stem = dir.join(format!("cat{k}")).join(format!("s{j}"));
            write(stem.with_extension("voxels"), object.to_raw())?;
            let mut pgm = Vec::new();
            project(&object, Viewpoint::IDENTITY)?.write_pgm(&mut pgm)?;
            write(stem.with_extension("pgm"), pgm)?;
            write(
                stem.with_extension("json"),
                json(&PrototypeRecord {
                    category: k,
                    derivation_id: id.clone(),
                    parts: parts.clone(),
                })?,
            )?;
        }
    }
    cfg.write(&dir)?;
    println!("wrote {} samples per category to {}", cfg.samples, dir.display());
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Serialize, Deserialize)]
struct Sweep {
    matrix: ConfusionMatrix,
    outcomes: Vec<TestOutcome>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Categorization {
    seed: u64,
    haptic: Sweep,
    vision: Sweep,
}

fn categorize(cfg: &RunConfig) -> Result<ExitCode> {
    let inputs = load(cfg)?;
    let data = load_dataset(cfg, &inputs)?;
    let protos = load_prototypes(cfg, &inputs)?;
    let (hm, ho) = haptic_sweep(&data, &protos);
    let (vm, vo) = vision_sweep(&data, &protos, &inputs.lib, cfg.seed)?;
    println!("haptic {}/{}  vision {}/{}", hm.correct(), hm.total(), vm.correct(), vm.total());
    let dir = cfg.out.join("categorize");
    let result = Categorization {
        seed: cfg.seed,
        haptic: Sweep {
            matrix: hm,
            outcomes: ho,
        },
        vision: Sweep {
            matrix: vm,
            outcomes: vo,
        },
    };
    write(dir.join("results.json"), json(&result)?)?;
    cfg.write(&dir)?;
    Ok(ExitCode::SUCCESS)
}

fn report(cfg: &RunConfig) -> Result<ExitCode> {
    let inputs = load(cfg)?;
    let path = cfg.out.join("categorize").join("results.json");
    let result: Categorization = serde_json::from_str(&read(&path)?).context("results.json")?;
    let protos = load_prototypes(cfg, &inputs)?;
    let mut traces = Vec::new();
    for k in 1..=CATEGORIES {
        let cat = cfg.out.join("train").join(format!("cat{k}"));
        let chains: Vec<ChainReport> = serde_json::from_str(&read(&cat.join("chains.json"))?)?;
        for j in 0..chains.len() {
            let rows = parse_trace_csv(&read(&cat.join(format!("chain{j}.csv")))?)?;
            traces.push((format!("cat{k}_chain{j}"), rows));
        }
    }
    let r = Report {
        seed: result.seed,
        haptic: result.haptic.matrix,
        vision: result.vision.matrix,
        haptic_outcomes: result.haptic.outcomes,
        vision_outcomes: result.vision.outcomes,
        prototypes: protos,
        traces,
    };
    let dir = cfg.out.join("report");
    emit_report(&r, &dir)?;
    cfg.write(&dir)?;
    println!("report in {}", dir.display());
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Serialize)]
struct OracleResult {
    max_depth: usize,
    derivations: usize,
    iterations: usize,
    tv: f64,
    exact: std::collections::BTreeMap<String, f64>,
    empirical: std::collections::BTreeMap<String, f64>,
}

/// Deepest cap in `1..=12` whose language stays within the oracle size,
/// or the shallowest feasible one.
fn oracle_depth(g: &Grammar) -> usize {
    let lo = g.min_derivation_depth().max(1);
    (lo..=DEFAULT_MAX_DEPTH)
        .take_while(|&d| count_derivations(g, d) <= ORACLE_LANGUAGE)
        .last()
        .unwrap_or(lo)
}

fn oracle_check(cfg: &RunConfig) -> Result<ExitCode> {
    let inputs = load(cfg)?;
    let g = &inputs.g;
    let depth = cfg.max_depth.unwrap_or_else(|| oracle_depth(g));
    let exact = enumerate_posterior(g, &mut SyntheticLikelihood::new(cfg.seed), depth, cfg.mode)?.by_id();
    let chain = ChainConfig {
        max_depth: depth,
        ..chain_config(cfg, false)
    };
    let run = run_chain(g, &mut SyntheticLikelihood::new(cfg.seed), &chain)?;
    let empirical = run.summary.frequencies();
    let tv = tv_distance(&exact, &empirical);
    println!(
        "tv {tv:.4} (depth {depth}, {} derivations, {} iterations, {:?} mode)",
        exact.len(),
        cfg.iterations,
        cfg.mode
    );
    let dir = cfg.out.join("oracle-check");
    write(
        dir.join("result.json"),
        json(&OracleResult {
            max_depth: depth,
            derivations: exact.len(),
            iterations: cfg.iterations,
            tv,
            exact,
            empirical,
        })?,
    )?;
    cfg.write(&dir)?;
    Ok(if tv < ORACLE_TV { ExitCode::SUCCESS } else { ExitCode::from(2) })
}
