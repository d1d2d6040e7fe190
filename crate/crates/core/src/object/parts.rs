use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::rotate::Mat3;
use super::{ObjectError, VoxelObject, DEFAULT_GRID};
use crate::grammar::Grammar;

pub const PARTS47_JSON: &str = include_str!("../../data/parts47.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Primitive {
    Box,
    Cylinder,
    Ellipsoid,
    Wedge,
    LBracket,
}

impl Primitive {
    /// Containment test in the part's local frame for half extents `h`.
    /// Cylinders run along local `y`; wedges slope down toward `+x`; the
    /// L-bracket's two arms lie along local `-y` and `-x`.
    fn contains(self, p: [f64; 3], h: [f64; 3]) -> bool {
        let [x, y, z] = p;
        let [a, b, c] = h;
        let in_box = x.abs() <= a && y.abs() <= b && z.abs() <= c;
        match self {
            Primitive::Box => in_box,
            Primitive::Cylinder => (x / a).powi(2) + (z / c).powi(2) <= 1.0 && y.abs() <= b,
            Primitive::Ellipsoid => (x / a).powi(2) + (y / b).powi(2) + (z / c).powi(2) <= 1.0,
            Primitive::Wedge => in_box && y <= b - (x + a) * (b / a),
            Primitive::LBracket => {
                let t = 0.35 * (2.0 * a).min(2.0 * b);
                in_box && (y <= -b + t || x <= -a + t)
            }
        }
    }
}

/// Realization of one terminal: a primitive of full extents `dims`, centered
/// at `location` relative to the trunk center, repeated `count` times with
/// one `(x, y, z)` rotation triple in degrees per instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartSpec {
    pub id: String,
    pub primitive: Primitive,
    pub dims: [f64; 3],
    pub location: [f64; 3],
    pub count: usize,
    pub orientations: Vec<[f64; 3]>,
}

impl PartSpec {
    fn check(&self) -> Result<(), ObjectError> {
        let bad = |m: &str| Err(ObjectError::Library(format!("part {}: {m}", self.id)));
        if self.count == 0 {
            return bad("count must be at least 1");
        }
        if self.orientations.len() != self.count {
            return bad("need one orientation per instance");
        }
        if self.dims.iter().any(|&d| !(d > 0.0)) {
            return bad("dimensions must be positive");
        }
        Ok(())
    }
}

/// Orientation matrix for an `(x, y, z)` rotation triple, applied x first.
fn orientation_matrix(o: [f64; 3]) -> Mat3 {
    Mat3::rot_z(o[2]).mul(&Mat3::rot_y(o[1])).mul(&Mat3::rot_x(o[0]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartLibrary {
    pub trunk: String,
    pub parts: Vec<PartSpec>,
    #[serde(skip)]
    index: BTreeMap<String, usize>,
}

impl PartLibrary {
    pub fn new(trunk: String, parts: Vec<PartSpec>) -> Result<Self, ObjectError> {
        let mut index = BTreeMap::new();
        for (i, p) in parts.iter().enumerate() {
            p.check()?;
            if index.insert(p.id.clone(), i).is_some() {
                return Err(ObjectError::Library(format!("duplicate part {}", p.id)));
            }
        }
        if !index.contains_key(&trunk) {
            return Err(ObjectError::Library(format!("trunk {trunk} missing")));
        }
        Ok(PartLibrary { trunk, parts, index })
    }

    pub fn from_json(text: &str) -> Result<Self, ObjectError> {
        let raw: PartLibrary = serde_json::from_str(text)?;
        PartLibrary::new(raw.trunk, raw.parts)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("library serializes")
    }

    /// The shipped 47-part library.
    pub fn shipped() -> Self {
        PartLibrary::from_json(PARTS47_JSON).expect("shipped library parses")
    }

    pub fn get(&self, id: &str) -> Option<&PartSpec> {
        self.index.get(id).map(|&i| &self.parts[i])
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Checks the library against a grammar: every terminal has a part,
    /// parts of one preterminal share a location, and different
    /// preterminals use different locations.
    pub fn validate(&self, g: &Grammar) -> Result<(), ObjectError> {
        for t in g.terminals() {
            if self.get(g.name(t)).is_none() {
                return Err(ObjectError::UnknownPart(g.name(t).to_string()));
            }
        }
        let mut slot_locations: Vec<(String, [f64; 3])> = Vec::new();
        for pre in g.preterminals() {
            let mut loc: Option<[f64; 3]> = None;
            for &p in g.alternatives(pre) {
                let term = g.production(p).rhs[0];
                let spec = self.get(g.name(term)).expect("checked above");
                match loc {
                    None => loc = Some(spec.location),
                    Some(l) if l != spec.location => {
                        return Err(ObjectError::Library(format!(
                            "{} is not at the {} slot location",
                            spec.id,
                            g.name(pre)
                        )))
                    }
                    Some(_) => {}
                }
            }
            if let Some(l) = loc {
                if let Some((other, _)) = slot_locations.iter().find(|(_, ol)| *ol == l) {
                    return Err(ObjectError::Library(format!(
                        "slots {other} and {} share a location",
                        g.name(pre)
                    )));
                }
                slot_locations.push((g.name(pre).to_string(), l));
            }
        }
        Ok(())
    }

    /// Procedurally generated library for a fribble-style grammar.
    ///
    /// Preterminals are slots around an ellipsoidal trunk (head, tail, top,
    /// bottom). The `i`-th alternative of each slot belongs to family
    /// `i mod 4`: spikes (boxes), discs (cylinders), knobs (ellipsoids) and
    /// fins (wedges and L-brackets). Variants within a family differ in size,
    /// and some are aggregates of two or three rotated copies. Terminals
    /// not reached by the grammar (up to `P{total}`) get a fifth, frontal
    /// location.
    pub fn procedural(g: &Grammar, trunk: &str, total: usize) -> Result<Self, ObjectError> {
        // (location, slot rotation about z mapping local +y outward)
        const SLOTS: [([f64; 3], f64); 4] = [
            ([56.0, 0.0, 0.0], -90.0),
            ([-56.0, 0.0, 0.0], 90.0),
            ([0.0, 30.0, 0.0], 0.0),
            ([0.0, -30.0, 0.0], 180.0),
        ];
        const SPARE: ([f64; 3], f64) = ([0.0, 0.0, 30.0], 0.0);

        let mut parts = vec![PartSpec {
            id: trunk.to_string(),
            primitive: Primitive::Ellipsoid,
            dims: [84.0, 38.0, 36.0],
            location: [0.0; 3],
            count: 1,
            orientations: vec![[0.0; 3]],
        }];
        let pres = g.preterminals();
        if pres.len() > SLOTS.len() {
            return Err(ObjectError::Library(format!(
                "{} preterminals but only {} slots",
                pres.len(),
                SLOTS.len()
            )));
        }
        for (slot, pre) in pres.iter().enumerate() {
            for (i, &p) in g.alternatives(*pre).iter().enumerate() {
                let term = g.name(g.production(p).rhs[0]).to_string();
                parts.push(family_part(term, i % 4, i / 4, SLOTS[slot]));
            }
        }
        for k in 1..=total {
            let id = format!("P{k}");
            if !parts.iter().any(|p| p.id == id) {
                parts.push(family_part(id, k % 4, 0, SPARE));
            }
        }
        parts.sort_by_key(|p| p.id.trim_start_matches('P').parse::<usize>().unwrap_or(usize::MAX));
        PartLibrary::new(trunk.to_string(), parts)
    }
}

/// One part of a family: `length` runs outward from the trunk (local `y`).
fn family_part(id: String, family: usize, variant: usize, slot: ([f64; 3], f64)) -> PartSpec {
    let v = variant as f64;
    let (location, out) = slot;
    let (primitive, dims, spins): (Primitive, [f64; 3], Vec<f64>) = match (family, variant) {
        (0, 2) => (Primitive::Box, [10.0, 40.0, 10.0], vec![0.0, 45.0]),
        (0, _) => (Primitive::Box, [12.0 + 2.0 * v, 44.0 - 4.0 * v, 12.0], vec![0.0]),
        (1, 1) => (Primitive::Cylinder, [30.0, 14.0, 30.0], vec![0.0, 90.0]),
        (1, _) => (Primitive::Cylinder, [34.0 - 3.0 * v, 16.0 + 2.0 * v, 34.0 - 3.0 * v], vec![0.0]),
        (2, _) => (Primitive::Ellipsoid, [30.0 - 3.0 * v, 34.0 - 3.0 * v, 30.0 - 3.0 * v], vec![0.0]),
        (_, 1) => (Primitive::LBracket, [26.0, 34.0, 14.0], vec![0.0]),
        (_, 2) => (Primitive::Wedge, [22.0, 30.0, 8.0], vec![0.0, 120.0, 240.0]),
        _ => (Primitive::Wedge, [28.0, 38.0, 14.0], vec![0.0]),
    };
    PartSpec {
        id,
        primitive,
        dims,
        location,
        count: spins.len(),
        orientations: spins.iter().map(|&s| [0.0, s, out]).collect(),
    }
}

/// Realizes a part list at `scale` in the default 64³ grid.
pub fn realize<S: AsRef<str>>(
    parts: &[S],
    lib: &PartLibrary,
    scale: f64,
) -> Result<VoxelObject, ObjectError> {
    realize_in(parts, lib, scale, DEFAULT_GRID)
}

/// Union of every listed part's voxelized instances. A voxel is occupied when
/// its center lies inside a part. The trunk is centered on voxel
/// `(dim/2, dim/2, dim/2)`, so its axes pass through voxel centers. Repeated
/// parts overlay.
pub fn realize_in<S: AsRef<str>>(
    parts: &[S],
    lib: &PartLibrary,
    scale: f64,
    dim: usize,
) -> Result<VoxelObject, ObjectError> {
    if !(0.1..=2.0).contains(&scale) {
        return Err(ObjectError::BadScale(scale));
    }
    let mut specs: Vec<&PartSpec> = Vec::with_capacity(parts.len());
    for p in parts {
        let id = p.as_ref();
        let spec = lib.get(id).ok_or_else(|| ObjectError::UnknownPart(id.to_string()))?;
        if !specs.iter().any(|s| s.id == spec.id) {
            specs.push(spec);
        }
    }
    let mut out = VoxelObject::empty(dim, scale);
    let c = dim as f64 / 2.0;
    for spec in specs {
        let center = spec.location.map(|l| c + scale * l);
        let half = spec.dims.map(|d| scale * d / 2.0);
        for &o in &spec.orientations {
            let r = orientation_matrix(o);
            let rt = r.transpose();
            let ext: [f64; 3] =
                [0, 1, 2].map(|i| (0..3).map(|j| r.0[i][j].abs() * half[j]).sum::<f64>());
            if (0..3).any(|a| center[a] - ext[a] < -0.5 || center[a] + ext[a] > dim as f64 - 0.5) {
                return Err(ObjectError::OutOfBounds {
                    part: spec.id.clone(),
                    scale,
                    dim,
                });
            }
            let lo = [0, 1, 2].map(|a| (center[a] - ext[a]).floor().max(0.0) as usize);
            let hi = [0, 1, 2].map(|a| ((center[a] + ext[a]).ceil() as usize).min(dim - 1));
            for z in lo[2]..=hi[2] {
                for y in lo[1]..=hi[1] {
                    for x in lo[0]..=hi[0] {
                        let p = [x as f64 - center[0], y as f64 - center[1], z as f64 - center[2]];
                        if spec.primitive.contains(rt.apply(p), half) {
                            out.set(x, y, z);
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}
