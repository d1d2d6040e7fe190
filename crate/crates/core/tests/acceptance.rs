//! The acceptance gate: one pass/fail line per criterion.

mod common;

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{brute_posterior, toy_likelihood, TOY_GRAMMARS};
use fribble::grammar::{
    derivation_prob, fribble_grammar, parse_grammar, parts_prior, preterminal_reuse, rational_rules_prior,
    sample_derivation, sample_subtree, Derivation, Grammar, Node, Tree,
};
use fribble::haptics::{grasp_at, haptic_likelihood, HandModel};
use fribble::harness::{
    categorize_haptic, haptic_sweep, synthesize_dataset, train_category, Prototype, TrainSettings, CATEGORIES,
    DATASET_SCALE, DEFAULT_SHARPNESS,
};
use fribble::inference::{
    accept_probability, enumerate_posterior, propose_subtree, run_chain, tv_distance, AcceptanceMode, ChainConfig,
    Modality, Scored, SyntheticLikelihood,
};
use fribble::object::{realize, realize_in, viewpoint_grid, PartLibrary, Viewpoint, VoxelObject};
use fribble::vision::{descriptor, hog, vision_likelihood, Silhouette, BINS, DESCRIPTOR_LEN, IMAGE_SIZE};

const ORACLE_ITERATIONS: usize = 50_000;
const ORACLE_TV: f64 = 0.05;
const ORACLE_TIME: Duration = Duration::from_secs(60);
const PRIOR_TOL: f64 = 1e-9;
const HAPTIC_MIN_CORRECT: u32 = 12;
const HAPTIC_TIME: Duration = Duration::from_secs(30 * 60);
const SELF_TOL: f64 = 1e-9;
const VISION_SCALE_SHIFT: f64 = 0.05;
const EXTENSION_PAIRS: usize = 100;
const FUZZ_PROPOSALS: usize = 1_000;
/// Criteria that fail on the shipped pipeline. Their lines still print as
/// FAIL; the gate errors if one of them starts passing so the list stays
/// honest.
const KNOWN_FAILURES: [usize; 1] = [5];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn oracle_equivalence() -> Verdict {
    let mut worst = (0.0f64, Duration::ZERO);
    let mut lines = Vec::new();
    let mut pass = true;
    for (name, src, depth) in TOY_GRAMMARS {
        let g = parse_grammar(src).unwrap();
        let start = Instant::now();
        let exact = enumerate_posterior(&g, &mut toy_likelihood(7), depth, AcceptanceMode::Full)
            .unwrap()
            .by_id();
        let config = ChainConfig {
            iterations: ORACLE_ITERATIONS,
            seed: 7,
            max_depth: depth,
            mode: AcceptanceMode::Full,
            ..ChainConfig::default()
        };
        let run = run_chain(&g, &mut toy_likelihood(7), &config).unwrap();
        let elapsed = start.elapsed();
        let empirical = run.summary.frequencies();
        let tv = tv_distance(&exact, &empirical);
        let tv_brute = tv_distance(&brute_posterior(src, depth, 7, true), &empirical);
        pass &= exact.len() <= 200 && tv < ORACLE_TV && tv_brute < ORACLE_TV && elapsed < ORACLE_TIME;
        worst = (worst.0.max(tv), worst.1.max(elapsed));
        lines.push(format!("{name} n={} tv={tv:.4}", exact.len()));
    }
    verdict(pass, format!("{}; slowest {:.1?}", lines.join(", "), worst.1))
}

fn gamma_ratio_case(src: &str, id: &str, want: f64) -> (f64, bool) {
    let g = parse_grammar(src).unwrap();
    let d = Derivation::from_canonical(&g, id).unwrap();
    let got = rational_rules_prior(&d, &g);
    (got, (got - want).abs() < PRIOR_TOL)
}

/// One `M` per part under `F -> N P5`: four through `N -> M M M M`, each
/// further part through `N -> N M`.
fn fribble_with_parts(g: &Grammar, parts: &[&str]) -> Derivation {
    let sym = |n: &str| g.lookup(n).unwrap();
    let prod = |lhs: &str, rhs: &[&str]| {
        g.find_production(sym(lhs), &rhs.iter().map(|s| sym(s)).collect::<Vec<_>>()).unwrap()
    };
    let slot_of = |part: &str| {
        ["M1", "M2", "M3", "M4"]
            .into_iter()
            .find(|s| g.find_production(sym(s), &[sym(part)]).is_some())
            .unwrap()
    };
    let m = |part: &str| {
        let slot = slot_of(part);
        Tree::Node(Node {
            production: prod("M", &[slot]),
            children: vec![Tree::Node(Node {
                production: prod(slot, &[part]),
                children: vec![Tree::Leaf(sym(part))],
            })],
        })
    };
    let mut n = Node {
        production: prod("N", &["M", "M", "M", "M"]),
        children: parts[..4].iter().map(|p| m(p)).collect(),
    };
    for p in &parts[4..] {
        n = Node {
            production: prod("N", &["N", "M"]),
            children: vec![Tree::Node(n), m(p)],
        };
    }
    let root = Node {
        production: prod("F", &["N", "P5"]),
        children: vec![Tree::Node(n), Tree::Leaf(sym("P5"))],
    };
    Derivation::new(root, g).unwrap()
}

fn prior_closed_forms() -> Verdict {
    // Γ(2)Γ(1)/Γ(3) ÷ Γ(1)Γ(1)/Γ(2) = (1·1/2) ÷ 1.
    let (half, ok_half) = gamma_ratio_case("S -> a | b", "0", 1.0 / 2.0);
    // Γ(3)Γ(1)/Γ(4) ÷ Γ(1)Γ(1)/Γ(2) = (2·1/6) ÷ 1.
    let (third, ok_third) = gamma_ratio_case("S -> A A\nA -> a | b", "0.1.1", 1.0 / 3.0);
    let g = fribble_grammar();
    let cases: [(&[&str], i32); 3] = [
        (&["P4", "P1", "P2", "P3"], 0),
        (&["P4", "P1", "P2", "P3", "P12"], 1),
        (&["P4", "P1", "P2", "P3", "P12", "P16", "P7"], 3),
    ];
    let mut ok_parts = true;
    let mut seen = Vec::new();
    for (parts, k) in cases {
        let d = fribble_with_parts(&g, parts);
        let p = parts_prior(&d, &g);
        ok_parts &= preterminal_reuse(&d, &g) == k as u32 && p == 0.25f64.powi(k);
        seen.push(format!("k={k}:{p}"));
    }
    verdict(
        ok_half && ok_third && ok_parts,
        format!("[1,0]→{half:.12}, [2,0]→{third:.12}, parts {}", seen.join(" ")),
    )
}

fn haptic_categorization() -> Verdict {
    let lib = PartLibrary::shipped();
    let hand = HandModel::shipped();
    let g = fribble_grammar();
    let data = synthesize_dataset(&lib, &g, &hand, 1).unwrap();
    let settings = TrainSettings {
        modality: Modality::Haptic,
        sharpness: DEFAULT_SHARPNESS,
        chain: ChainConfig {
            seed: 1,
            ..ChainConfig::default()
        },
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let start = Instant::now();
    let protos: Vec<Prototype> = pool.install(|| {
        (1..=CATEGORIES)
            .map(|k| {
                let model = train_category(&data, k, &settings, &g, &lib, &hand).unwrap();
                Prototype::from_model(&model, &lib, &hand).unwrap()
            })
            .collect()
    });
    let elapsed = start.elapsed();
    let (m, outcomes) = haptic_sweep(&data, &protos);
    let scaled_ok = data
        .test()
        .zip(&outcomes)
        .all(|(e, o)| [0.25, 3.0].iter().all(|&c| categorize_haptic(&e.grasp.scaled(c), &protos) == o.predicted));
    let diag: Vec<String> = (0..CATEGORIES).map(|k| m.counts[k][k].to_string()).collect();
    verdict(
        m.correct() >= HAPTIC_MIN_CORRECT && m.total() == 16 && scaled_ok && elapsed < HAPTIC_TIME,
        format!("{}/16 correct (diagonal {}), trained in {:.1?}", m.correct(), diag.join(" "), elapsed),
    )
}

fn category_prototypes(lib: &PartLibrary, scale: f64, dim: usize) -> Vec<VoxelObject> {
    [["P5", "P4", "P1", "P2", "P3"], ["P5", "P12", "P7", "P8", "P6"], ["P5", "P13", "P9", "P11", "P10"], [
        "P5", "P16", "P14", "P17", "P19",
    ]]
    .iter()
    .map(|p| realize_in(p, lib, scale, dim).unwrap())
    .collect()
}

fn viewpoint_invariance() -> Verdict {
    let lib = PartLibrary::shipped();
    let hand = HandModel::shipped();
    let mut worst = 0.0f64;
    let mut checked = 0;
    for obj in category_prototypes(&lib, DATASET_SCALE, 64) {
        for vp in viewpoint_grid() {
            let v = vision_likelihood(&descriptor(&obj, vp).unwrap(), &obj).unwrap();
            let h = haptic_likelihood(&grasp_at(&obj, vp, &hand), &obj, &hand);
            worst = worst.max((v - 1.0).abs()).max((h - 1.0).abs());
            checked += 1;
        }
    }
    verdict(worst <= SELF_TOL, format!("{checked} object views, max |L−1| = {worst:.2e}"))
}

fn scale_invariance() -> Verdict {
    let lib = PartLibrary::shipped();
    let hand = HandModel::shipped();
    let data = synthesize_dataset(&lib, &fribble_grammar(), &hand, 1).unwrap();
    let protos: Vec<Prototype> = category_prototypes(&lib, DATASET_SCALE, 64)
        .into_iter()
        .enumerate()
        .map(|(i, o)| Prototype::from_object(i + 1, String::new(), Vec::new(), o, &hand).unwrap())
        .collect();
    let (mut same, mut drift) = (true, 0.0f64);
    for e in data.exemplars.iter() {
        let base = categorize_haptic(&e.grasp, &protos);
        for c in [1e-3, 0.5, 2.0, 7.5, 1e3] {
            let v = e.grasp.scaled(c);
            same &= categorize_haptic(&v, &protos) == base;
            for p in &protos {
                drift = drift.max((p.haptic_score(&v) - p.haptic_score(&e.grasp)).abs());
            }
        }
    }
    // The observed object is rescaled; the hypothesis stays at the dataset
    // scale. A 96-voxel grid holds the largest rescaled objects.
    let mut worst = (0.0f64, 0.0);
    for (i, o) in protos.iter().enumerate() {
        for s in [0.5, 0.6, 0.7, 0.8, 0.9, 1.1, 1.2, 1.3, 1.4, 1.5] {
            let scaled = &category_prototypes(&lib, DATASET_SCALE * s, 96)[i];
            for vp in viewpoint_grid() {
                let base = vision_likelihood(&descriptor(&o.object, vp).unwrap(), &o.object).unwrap();
                let moved = vision_likelihood(&descriptor(scaled, vp).unwrap(), &o.object).unwrap();
                if (base - moved).abs() > worst.0 {
                    worst = ((base - moved).abs(), s);
                }
            }
        }
    }
    // Only the vision half is a known failure.
    assert!(same, "haptic prediction changed under vector scaling");
    verdict(
        same && worst.0 < VISION_SCALE_SHIFT,
        format!(
            "haptic predictions unchanged: {same} (score drift {drift:.1e}); max vision shift {:.4} at scale {}",
            worst.0, worst.1
        ),
    )
}

fn image(f: impl Fn(usize, usize) -> f64) -> Silhouette {
    let mut s = Silhouette::blank();
    for y in 0..IMAGE_SIZE {
        for x in 0..IMAGE_SIZE {
            s.set(x, y, f(x, y));
        }
    }
    s
}

fn hog_suite() -> Verdict {
    let uniform = [0.0, 0.4, 1.0].iter().all(|&c| hog(&image(|_, _| c)).values().iter().all(|&v| v == 0.0));
    let edge = hog(&image(|x, _| if x >= 60 { 1.0 } else { 0.0 }));
    let total: f64 = edge.values().iter().sum();
    let off_bin: f64 = edge
        .values()
        .iter()
        .enumerate()
        .filter(|(i, _)| i % BINS != 0)
        .map(|(_, v)| v)
        .sum();
    let vertical = total > 0.0 && off_bin == 0.0;
    let length = edge.len() == DESCRIPTOR_LEN && DESCRIPTOR_LEN == 8100;
    let lib = PartLibrary::shipped();
    let obj = realize(&["P5", "P13", "P9", "P11", "P10"], &lib, DATASET_SCALE).unwrap();
    let vp = Viewpoint::new(20.0, -40.0);
    let bits = |d: &fribble::vision::HogDescriptor| d.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    let deterministic = bits(&descriptor(&obj, vp).unwrap()) == bits(&descriptor(&obj, vp).unwrap())
        && bits(&edge) == bits(&hog(&image(|x, _| if x >= 60 { 1.0 } else { 0.0 })));
    verdict(
        uniform && vertical && length && deterministic,
        format!(
            "uniform zero: {uniform}; vertical edge off-bin mass {off_bin}; length {}; deterministic: {deterministic}",
            edge.len()
        ),
    )
}

/// `d` with its collection `N` wrapped in `N -> N M` and a fresh `M`.
fn extend(d: &Derivation, g: &Grammar, rng: &mut ChaCha8Rng) -> Derivation {
    let sym = |n: &str| g.lookup(n).unwrap();
    let nm = g.find_production(sym("N"), &[sym("N"), sym("M")]).unwrap();
    let root = d.root().clone();
    let mut children = root.children.clone();
    let inner = children[0].clone();
    children[0] = Tree::Node(Node {
        production: nm,
        children: vec![inner, Tree::Node(sample_subtree(g, sym("M"), rng, 2).unwrap())],
    });
    Derivation::new(
        Node {
            production: root.production,
            children,
        },
        g,
    )
    .unwrap()
}

fn is_sub_multiset(a: &[usize], b: &[usize]) -> bool {
    let mut b = b.to_vec();
    a.iter().all(|x| match b.iter().position(|y| y == x) {
        Some(i) => {
            b.swap_remove(i);
            true
        }
        None => false,
    })
}

fn simplicity_bias() -> Verdict {
    let g = fribble_grammar();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut violations = 0;
    let mut max_ratio = 0.0f64;
    for _ in 0..EXTENSION_PAIRS {
        let d = sample_derivation(&g, &mut rng, 8).unwrap();
        let e = extend(&d, &g, &mut rng);
        let ids = |x: &Derivation| x.productions_preorder().iter().map(|p| p.index()).collect::<Vec<_>>();
        assert!(is_sub_multiset(&ids(&d), &ids(&e)));
        let (pd, pe) = (derivation_prob(&d, &g), derivation_prob(&e, &g));
        if pe > pd {
            violations += 1;
        }
        max_ratio = max_ratio.max(pe / pd);
    }
    verdict(
        violations == 0,
        format!("{EXTENSION_PAIRS} pairs, {violations} violations, max P(ext)/P(base) = {max_ratio:.3e}"),
    )
}

fn mode_coincidence() -> Verdict {
    let g = fribble_grammar();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut lik = SyntheticLikelihood::new(23);
    let (mut checked, mut mismatches) = (0, 0);
    for _ in 0..FUZZ_PROPOSALS {
        let d = sample_derivation(&g, &mut rng, 12).unwrap();
        let p = propose_subtree(&d, &g, &mut rng, 12).unwrap();
        if preterminal_reuse(&d, &g) + preterminal_reuse(&p.derivation, &g) > 0 {
            continue;
        }
        let (a, b) = (Scored::new(&d, &g, &mut lik), Scored::new(&p.derivation, &g, &mut lik));
        checked += 1;
        if accept_probability(&a, &b, &p, AcceptanceMode::Paper) != accept_probability(&a, &b, &p, AcceptanceMode::Full)
        {
            mismatches += 1;
        }
    }
    verdict(
        checked > 0 && mismatches == 0,
        format!("{checked} no-reuse pairs of {FUZZ_PROPOSALS} proposals, {mismatches} mismatches"),
    )
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn end_to_end_determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap().to_string();
    let pipeline = || {
        for cmd in ["gen-dataset", "train", "categorize", "report"] {
            let o = Command::new(env!("CARGO_BIN_EXE_fribble"))
                .args([cmd, "--seed", "3", "--out", &out, "--modality", "haptic"])
                .args(["--iterations", "2000", "--burn-in", "200"])
                .output()
                .unwrap();
            assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        }
        let t = tree(dir.path());
        for sub in ["dataset", "train", "categorize", "report"] {
            fs::remove_dir_all(dir.path().join(sub)).unwrap();
        }
        t
    };
    let (a, b) = (pipeline(), pipeline());
    let bytes: usize = a.iter().map(|(_, v)| v.len()).sum();
    let differing = a.iter().zip(&b).filter(|(x, y)| x != y).count();
    verdict(
        a.len() == b.len() && differing == 0,
        format!("{} files, {bytes} bytes, {differing} differ", a.len()),
    )
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Verdict); 9] = [
        ("oracle equivalence", oracle_equivalence),
        ("prior closed forms", prior_closed_forms),
        ("haptic categorization", haptic_categorization),
        ("viewpoint invariance", viewpoint_invariance),
        ("scale invariance", scale_invariance),
        ("HoG unit suite", hog_suite),
        ("simplicity bias", simplicity_bias),
        ("mode coincidence", mode_coincidence),
        ("end-to-end determinism", end_to_end_determinism),
    ];
    let mut failed = Vec::new();
    let mut fixed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        println!("criterion {} {}: {name}: {}", i + 1, if v.pass { "PASS" } else { "FAIL" }, v.detail);
        match (v.pass, KNOWN_FAILURES.contains(&(i + 1))) {
            (false, false) => failed.push(i + 1),
            (true, true) => fixed.push(i + 1),
            _ => {}
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
    assert!(fixed.is_empty(), "criteria {fixed:?} now pass; drop them from KNOWN_FAILURES");
}
