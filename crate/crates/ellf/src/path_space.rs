//! Lattice paths on the pre-gaskets: classes W_N / V_N / Γ_N, reversing and
//! revisiting counts, hitting times and coarse-graining, skeletons with
//! Type 1 / Type 2 labels, decomposition/assembly through canonical frames,
//! loop reports, and the self-repelling path weights.

use std::collections::HashSet;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gasket_geometry::{
    canonical_isometry, step_dot2, triangle_of_edge, upward_triangles_at, CanonicalIsometry,
    GeometryError, Region, Triangle, VertexCoord,
};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum PathError {
    #[error("empty path")]
    Empty,
    #[error("vertices {0} and {1} are not adjacent on the level-{2} graph")]
    NonAdjacentStep(usize, usize, u32),
    #[error("self-step at index {0}")]
    SelfStep(usize),
    #[error("path does not belong to any class: {0}")]
    NoClass(String),
    #[error("operation requires coarse level ≤ path level ({0} > {1})")]
    LevelOrder(u32, u32),
    #[error("coarse-grained path is not loopless")]
    CoarseNotLoopless,
    #[error("triangle run of length {0} in skeleton (expected 1 or 2)")]
    BadTriangleRun(usize),
    #[error("segment leaves its decomposition frame at index {0}")]
    OutsideFrame(usize),
    #[error("template class does not match triangle type at position {0}")]
    TypeMismatch(usize),
    #[error("weight is defined on W and V paths only")]
    WeightOnRaw,
    #[error("expected a level-1 path")]
    NotLevelOne,
    #[error("loop erasure is defined on W and V paths (and fixes Γ paths)")]
    EraseClass,
    #[error("not a loopless level-1 path from O to a")]
    NotGamma1,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("serialization: {0}")]
    Serde(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PathClass {
    W,
    V,
    Gamma,
    Raw,
}

/// A finite lattice path; all vertices are stored at the path's level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticePath {
    pub vertices: Vec<VertexCoord>,
    pub level: u32,
    pub class: PathClass,
}

/// The five level-0 corner vertices surrounding O in F (right and mirrored
/// copies), i.e. G_0 of F.
pub fn g0_f() -> [VertexCoord; 5] {
    [
        VertexCoord::new(0, 0, 0),
        VertexCoord::new(1, 0, 0),
        VertexCoord::new(0, 1, 0),
        VertexCoord::new(1, -1, 0),
        VertexCoord::new(0, -1, 0),
    ]
}

/// G_0 of F^V: adds the far corners of the third copy.
pub fn g0_fv() -> [VertexCoord; 7] {
    [
        VertexCoord::new(0, 0, 0),
        VertexCoord::new(1, 0, 0),
        VertexCoord::new(0, 1, 0),
        VertexCoord::new(1, -1, 0),
        VertexCoord::new(0, -1, 0),
        VertexCoord::new(1, 1, 0),
        VertexCoord::new(0, 2, 0),
    ]
}

impl LatticePath {
    /// Build a path, rescaling all vertices to `level` and classifying it.
    pub fn new(vertices: Vec<VertexCoord>, level: u32) -> Result<LatticePath, PathError> {
        let class = classify(&vertices, level)?;
        Ok(LatticePath::with_class(vertices, level, class))
    }

    /// Build a path with a caller-supplied class tag (no validation).
    pub fn with_class(vertices: Vec<VertexCoord>, level: u32, class: PathClass) -> LatticePath {
        let vertices = vertices
            .iter()
            .map(|v| {
                let (a, b) = v.at_level(level).expect("vertex representable at path level");
                VertexCoord::new(a, b, level)
            })
            .collect();
        LatticePath {
            vertices,
            level,
            class,
        }
    }

    /// Number of steps ℓ(w).
    pub fn len(&self) -> usize {
        self.vertices.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Step vector i → i+1 in lattice coordinates at the path level.
    pub fn step(&self, i: usize) -> (i64, i64) {
        let s = &self.vertices[i];
        let t = &self.vertices[i + 1];
        (t.a - s.a, t.b - s.b)
    }

    pub fn is_loopless(&self) -> bool {
        let mut seen = HashSet::with_capacity(self.vertices.len());
        self.vertices.iter().all(|v| seen.insert(*v))
    }

    /// JSON-lines record: {"level": N, "class": tag, "vertices": [[a,b],…]}.
    pub fn to_json(&self) -> String {
        let rec = PathRecord {
            level: self.level,
            class: self.class,
            vertices: self.vertices.iter().map(|v| [v.a, v.b]).collect(),
        };
        serde_json::to_string(&rec).expect("path record serializes")
    }

    pub fn from_json(line: &str) -> Result<LatticePath, PathError> {
        let rec: PathRecord =
            serde_json::from_str(line).map_err(|e| PathError::Serde(e.to_string()))?;
        let vertices = rec
            .vertices
            .into_iter()
            .map(|[a, b]| VertexCoord::new(a, b, rec.level))
            .collect();
        Ok(LatticePath {
            vertices,
            level: rec.level,
            class: rec.class,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct PathRecord {
    level: u32,
    class: PathClass,
    vertices: Vec<[i64; 2]>,
}

/// Determine the class of a raw vertex sequence at the given level.
///
/// Loopless W/V-shaped paths report `Gamma`; paths with loops report `W` or
/// `V`; anything else is an error describing the first violation.
pub fn classify(vertices: &[VertexCoord], level: u32) -> Result<PathClass, PathError> {
    if vertices.is_empty() {
        return Err(PathError::Empty);
    }
    // adjacency on E^V at the path level
    let scaled: Vec<(i64, i64)> = vertices
        .iter()
        .map(|v| v.at_level(level).map_err(PathError::Geometry))
        .collect::<Result<_, _>>()?;
    for i in 0..scaled.len().saturating_sub(1) {
        let x = VertexCoord::new(scaled[i].0, scaled[i].1, level);
        let y = VertexCoord::new(scaled[i + 1].0, scaled[i + 1].1, level);
        if x == y {
            return Err(PathError::SelfStep(i));
        }
        if triangle_of_edge(&x, &y, level, Region::FV).is_none() {
            return Err(PathError::NonAdjacentStep(i, i + 1, level));
        }
    }

    let start_ok = vertices[0] == VertexCoord::ORIGIN;
    let end_ok = *vertices.last().unwrap() == VertexCoord::CORNER_A;
    if !start_ok {
        return Err(PathError::NoClass("does not start at O".into()));
    }
    if !end_ok {
        return Err(PathError::NoClass("does not end at a".into()));
    }
    if vertices[..vertices.len() - 1]
        .iter()
        .any(|v| *v == VertexCoord::CORNER_A)
    {
        return Err(PathError::NoClass("hits a before the final step".into()));
    }

    let trace = level0_trace(vertices);
    let loopless = {
        let mut seen = HashSet::new();
        vertices.iter().all(|v| seen.insert(*v))
    };
    let w_shape = trace == vec![VertexCoord::ORIGIN, VertexCoord::CORNER_A]
        && vertices.iter().all(|v| {
            // stays on F (never crosses into the third copy)
            crate::gasket_geometry::is_region_vertex(v, level, Region::F)
        });
    if w_shape {
        return Ok(if loopless { PathClass::Gamma } else { PathClass::W });
    }
    let v_shape = trace
        == vec![
            VertexCoord::ORIGIN,
            VertexCoord::CORNER_B,
            VertexCoord::CORNER_A,
        ];
    if v_shape {
        return Ok(if loopless { PathClass::Gamma } else { PathClass::V });
    }
    Err(PathError::NoClass(format!(
        "level-0 trace {:?} is neither (O,a) nor (O,b,a)",
        trace
            .iter()
            .map(|v| (v.a, v.b, v.level))
            .collect::<Vec<_>>()
    )))
}

/// Sequence of G_0 vertices hit (consecutive repeats collapsed).
fn level0_trace(vertices: &[VertexCoord]) -> Vec<VertexCoord> {
    let mut out: Vec<VertexCoord> = Vec::new();
    for v in vertices {
        if v.on_lattice(0) && out.last() != Some(v) {
            out.push(v.normalized());
        }
    }
    out
}

/// Recursive hitting times of G_M: T_0 = 0; T_i is the first index after
/// T_{i-1} at a G_M vertex different from the previously recorded one.
pub fn hitting_times(path: &LatticePath, m: u32) -> Vec<usize> {
    hitting_times_of(&path.vertices, m)
}

pub(crate) fn hitting_times_of(vertices: &[VertexCoord], m: u32) -> Vec<usize> {
    let mut out = vec![0usize];
    let mut last = vertices[0];
    for (i, v) in vertices.iter().enumerate().skip(1) {
        if v.on_lattice(m) && *v != last {
            out.push(i);
            last = *v;
        }
    }
    out
}

/// Coarse-graining Q_M: the subsequence of hitting-time vertices, at level M.
pub fn coarse_grain(path: &LatticePath, m: u32) -> Result<LatticePath, PathError> {
    if m > path.level {
        return Err(PathError::LevelOrder(m, path.level));
    }
    let ts = hitting_times(path, m);
    let verts: Vec<VertexCoord> = ts.iter().map(|&i| path.vertices[i]).collect();
    let class = classify(&verts, m).unwrap_or(PathClass::Raw);
    Ok(LatticePath::with_class(verts, m, class))
}

/// Reversing number N(w) and revisiting number M(w) of a level-1 W path
/// (V paths are weighted through their two halves; see [`weight_exact`]).
pub fn reversing_revisit_counts(path: &LatticePath) -> Result<(u32, u32), PathError> {
    if path.level != 1 {
        return Err(PathError::NotLevelOne);
    }
    let excluded: Vec<VertexCoord> = g0_f().to_vec();
    Ok(frame_counts(&path.vertices, &excluded, &VertexCoord::ORIGIN))
}

/// Count sharp turns / backtracks at vertices outside `excluded`, and
/// revisits of `start` at indices ≥ 1.
pub(crate) fn frame_counts(
    vertices: &[VertexCoord],
    excluded: &[VertexCoord],
    start: &VertexCoord,
) -> (u32, u32) {
    let mut n = 0u32;
    let mut m = 0u32;
    let last = vertices.len() - 1;
    for i in 1..=last {
        if vertices[i] == *start {
            m += 1;
        }
        if i < last {
            let s = (
                vertices[i].a - vertices[i - 1].a,
                vertices[i].b - vertices[i - 1].b,
            );
            let t = (
                vertices[i + 1].a - vertices[i].a,
                vertices[i + 1].b - vertices[i].b,
            );
            if step_dot2(s, t) < 0 && !excluded.contains(&vertices[i]) {
                n += 1;
            }
        }
    }
    (n, m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TriangleType {
    Type1,
    Type2,
}

/// The 2^{-M}-skeleton: the ordered triangles a path passes through, their
/// types, and the exit times (fine step indices).
#[derive(Debug, Clone)]
pub struct Skeleton {
    pub triangles: Vec<Triangle>,
    pub types: Vec<TriangleType>,
    /// T_i^{ex,M} for i = 1..k as indices into the fine path.
    pub exit_times: Vec<usize>,
    pub scale: u32,
}

impl Skeleton {
    pub fn s1(&self) -> usize {
        self.types.iter().filter(|t| **t == TriangleType::Type1).count()
    }
    pub fn s2(&self) -> usize {
        self.types.iter().filter(|t| **t == TriangleType::Type2).count()
    }

    /// (entry, exit) corners of each triangle, given the path's start.
    pub fn frames(&self, start: VertexCoord) -> Vec<(VertexCoord, VertexCoord)> {
        let mut out = Vec::with_capacity(self.triangles.len());
        let mut entry = start;
        for i in 0..self.triangles.len() {
            let exit = if i + 1 < self.triangles.len() {
                self.triangles[i]
                    .corners()
                    .into_iter()
                    .find(|c| self.triangles[i + 1].contains_corner(c))
                    .expect("consecutive skeleton triangles share a corner")
            } else {
                VertexCoord::CORNER_A
            };
            out.push((entry, exit));
            entry = exit;
        }
        out
    }
}

/// Compute the 2^{-M}-skeleton of a path whose coarse-graining Q_M is
/// loopless, together with types and exit times.
pub fn skeleton(path: &LatticePath, m: u32) -> Result<Skeleton, PathError> {
    if m > path.level {
        return Err(PathError::LevelOrder(m, path.level));
    }
    let ts = hitting_times(path, m);
    let c: Vec<VertexCoord> = ts.iter().map(|&i| path.vertices[i]).collect();
    {
        let mut seen = HashSet::new();
        if !c.iter().all(|v| seen.insert(*v)) {
            return Err(PathError::CoarseNotLoopless);
        }
    }
    let last = c.len() - 1;
    let mut tri = triangle_of_edge(&c[0], &c[1], m, Region::FV)
        .ok_or(PathError::NonAdjacentStep(0, 1, m))?;
    let mut triangles = Vec::new();
    let mut types = Vec::new();
    let mut exit_times = Vec::new();
    let mut n_prev = 0usize;
    loop {
        let mut j = last;
        for jj in (n_prev + 1)..last {
            if !tri.contains_corner(&c[jj + 1]) {
                j = jj;
                break;
            }
        }
        let run = j - n_prev;
        let ty = match run {
            1 => TriangleType::Type1,
            2 => TriangleType::Type2,
            r => return Err(PathError::BadTriangleRun(r)),
        };
        triangles.push(tri);
        types.push(ty);
        exit_times.push(ts[j]);
        if j == last {
            break;
        }
        tri = triangle_of_edge(&c[j], &c[j + 1], m, Region::FV)
            .ok_or(PathError::NonAdjacentStep(j, j + 1, m))?;
        n_prev = j;
    }
    Ok(Skeleton {
        triangles,
        types,
        exit_times,
        scale: m,
    })
}

/// Placement maps used by decompose/assemble for one skeleton triangle:
/// the canonical frame of the triangle plus deterministic placements of the
/// companion triangles at the entry (mirror half of the template) and, for
/// Type 2, at the middle vertex (third copy of the template).
pub(crate) struct Placement {
    iso: CanonicalIsometry,
    entry_companion: Option<CanonicalIsometry>,
    middle_companion: Option<CanonicalIsometry>,
}

pub(crate) fn placement(
    tri: &Triangle,
    entry: &VertexCoord,
    exit: &VertexCoord,
    ty: TriangleType,
) -> Result<Placement, PathError> {
    let iso = canonical_isometry(entry, exit, tri)?;
    let companion = |at: &VertexCoord| -> Option<CanonicalIsometry> {
        let others: Vec<Triangle> = upward_triangles_at(at, tri.scale, Region::FV)
            .into_iter()
            .filter(|t| t != tri)
            .collect();
        let comp = *others.first()?;
        let mut non_entry: Vec<VertexCoord> = comp
            .corners()
            .into_iter()
            .filter(|c| c != at)
            .collect();
        non_entry.sort();
        canonical_isometry(at, &non_entry[0], &comp).ok()
    };
    let middle = tri.third_corner(entry, exit).expect("frame corners");
    Ok(Placement {
        iso,
        entry_companion: companion(entry),
        middle_companion: if ty == TriangleType::Type2 {
            companion(&middle)
        } else {
            None
        },
    })
}

fn in_simplex(v: &VertexCoord, n: u32) -> bool {
    let size = 1i64 << n;
    v.a >= 0 && v.b >= 0 && v.a + v.b <= size
}

impl Placement {
    /// Fine vertex → template coordinates at relative level n.
    fn pull_back(&self, v: &VertexCoord, n: u32) -> Option<VertexCoord> {
        if let Ok(q) = self.iso.apply_inverse(v) {
            if q.level <= n {
                let (a, b) = q.at_level(n).ok()?;
                let q = VertexCoord::new(a, b, n);
                if in_simplex(&q, n) {
                    return Some(q);
                }
            }
        }
        if let Some(iso2) = &self.entry_companion {
            if let Ok(q) = iso2.apply_inverse(v) {
                if q.level <= n {
                    let (a, b) = q.at_level(n).ok()?;
                    if in_simplex(&VertexCoord::new(a, b, n), n) {
                        let (ra, rb) = crate::gasket_geometry::mirror(a, b);
                        return Some(VertexCoord::new(ra, rb, n));
                    }
                }
            }
        }
        if let Some(iso3) = &self.middle_companion {
            if let Ok(q) = iso3.apply_inverse(v) {
                if q.level <= n {
                    let (a, b) = q.at_level(n).ok()?;
                    if in_simplex(&VertexCoord::new(a, b, n), n) {
                        return Some(VertexCoord::new(a, b + (1 << n), n));
                    }
                }
            }
        }
        None
    }

    /// Template coordinates at relative level n → fine vertex.
    pub(crate) fn push_forward(&self, v: &VertexCoord, n: u32) -> Option<VertexCoord> {
        let (a, b) = v.at_level(n).ok()?;
        let size = 1i64 << n;
        if in_simplex(&VertexCoord::new(a, b, n), n) {
            return Some(self.iso.apply(&VertexCoord::new(a, b, n)));
        }
        let (ra, rb) = crate::gasket_geometry::mirror(a, b);
        if in_simplex(&VertexCoord::new(ra, rb, n), n) {
            let iso2 = self.entry_companion.as_ref()?;
            return Some(iso2.apply(&VertexCoord::new(ra, rb, n)));
        }
        if in_simplex(&VertexCoord::new(a, b - size, n), n) {
            let iso3 = self.middle_companion.as_ref()?;
            return Some(iso3.apply(&VertexCoord::new(a, b - size, n)));
        }
        None
    }
}

/// Decompose a path along its 2^{-M}-skeleton into standardized segment
/// templates (each a W_{N-M} or V_{N-M} path in the unit frame).
pub fn decompose(path: &LatticePath, m: u32) -> Result<(Skeleton, Vec<LatticePath>), PathError> {
    let sk = skeleton(path, m)?;
    let n = path.level - m;
    let frames = sk.frames(path.vertices[0]);
    let mut segments = Vec::with_capacity(sk.triangles.len());
    let mut start_idx = 0usize;
    for (i, ((entry, exit), tri)) in frames.iter().zip(&sk.triangles).enumerate() {
        let end_idx = sk.exit_times[i];
        let pl = placement(tri, entry, exit, sk.types[i])?;
        let mut verts = Vec::with_capacity(end_idx - start_idx + 1);
        for (off, v) in path.vertices[start_idx..=end_idx].iter().enumerate() {
            let q = pl
                .pull_back(v, n)
                .ok_or(PathError::OutsideFrame(start_idx + off))?;
            verts.push(q);
        }
        let class = classify(&verts, n).unwrap_or(PathClass::Raw);
        segments.push(LatticePath::with_class(verts, n, class));
        start_idx = end_idx;
    }
    Ok((sk, segments))
}

/// Inverse of [`decompose`]: substitute segment templates into the skeleton
/// triangles. The assembled path starts at O and ends at a.
pub fn assemble(sk: &Skeleton, segments: &[LatticePath]) -> Result<LatticePath, PathError> {
    assert_eq!(sk.triangles.len(), segments.len());
    let frames = sk.frames(VertexCoord::ORIGIN);
    let n = segments.first().map(|s| s.level).unwrap_or(0);
    let mut verts: Vec<VertexCoord> = Vec::new();
    for (i, ((entry, exit), seg)) in frames.iter().zip(segments).enumerate() {
        // class/type compatibility
        let has_b = seg
            .vertices
            .iter()
            .any(|v| *v == VertexCoord::CORNER_B && v.on_lattice(0));
        match (sk.types[i], has_b) {
            (TriangleType::Type1, false) | (TriangleType::Type2, true) => {}
            _ => return Err(PathError::TypeMismatch(i)),
        }
        let pl = placement(&sk.triangles[i], entry, exit, sk.types[i])?;
        for (off, v) in seg.vertices.iter().enumerate() {
            if i > 0 && off == 0 {
                continue; // junction vertex already present
            }
            let q = pl.push_forward(v, n).ok_or(PathError::OutsideFrame(off))?;
            verts.push(q);
        }
    }
    let level = sk.scale + n;
    let class = classify(&verts, level).unwrap_or(PathClass::Raw);
    Ok(LatticePath::with_class(verts, level, class))
}

/// One maximal-resolution loop of the path: a minimal return to a vertex.
#[derive(Debug, Clone)]
pub struct LoopReport {
    pub base: VertexCoord,
    /// min{N' : base ∈ G_{N'}}
    pub base_level: u32,
    pub start: usize,
    pub end: usize,
    /// Squared diameter, exact: (numerator, level) meaning num / 4^level.
    pub diameter2: (i64, u32),
}

impl LoopReport {
    /// The derived loop scale: `Some(base_level)` when the diameter is
    /// ≥ 2^{-base_level} (the borderline d = 2^{-M} counts as qualifying).
    pub fn scale(&self) -> Option<u32> {
        let (num, l) = self.diameter2;
        // num / 4^l ≥ 4^{-base_level}  ⟺  num ≥ 4^{l - base_level}
        if l >= self.base_level {
            let bound = 1i64 << (2 * (l - self.base_level));
            if num >= bound {
                return Some(self.base_level);
            }
        } else {
            return Some(self.base_level); // diameter ≥ 1 at coarse base; cannot occur for W/V
        }
        None
    }
}

/// All minimal loops (consecutive returns to the same vertex).
pub fn loop_reports(path: &LatticePath) -> Vec<LoopReport> {
    use std::collections::HashMap;
    let mut last_seen: HashMap<VertexCoord, usize> = HashMap::new();
    let mut out = Vec::new();
    for (i, v) in path.vertices.iter().enumerate() {
        if let Some(&j) = last_seen.get(v) {
            let seg = &path.vertices[j..=i];
            let mut d2 = (0i64, path.level);
            for x in 0..seg.len() {
                for y in (x + 1)..seg.len() {
                    let (num, l) = seg[x].dist2_scaled(&seg[y]);
                    debug_assert_eq!(l, path.level);
                    if num > d2.0 {
                        d2 = (num, l);
                    }
                }
            }
            out.push(LoopReport {
                base: *v,
                base_level: v.normalized().level,
                start: j,
                end: i,
                diameter2: d2,
            });
        }
        last_seen.insert(*v, i);
    }
    out
}

/// The coarsest qualifying loop scale present in the path (smallest M such
/// that a 2^{-M}-scale loop exists), or None for loopless paths / paths
/// whose loops are all below every qualifying threshold.
pub fn max_loop_scale(path: &LatticePath) -> Option<u32> {
    loop_reports(path).iter().filter_map(|l| l.scale()).min()
}

/// Split a V-shaped vertex list at the first hit of b.
pub(crate) fn split_at_b(vertices: &[VertexCoord]) -> Option<(usize, VertexCoord)> {
    vertices
        .iter()
        .position(|v| *v == VertexCoord::CORNER_B)
        .map(|i| (i, vertices[i]))
}

/// Recursive self-repelling weight of a W-like path in the frame whose
/// base-scale triangles sit at the path's entry vertex. `base` is the frame
/// scale; the path level must exceed it.
fn w_weight<T: Scalar>(vertices: &[VertexCoord], level: u32, base: u32, u: &T, x: &T) -> T {
    debug_assert!(level > base);
    let entry = vertices[0];
    if level == base + 1 {
        let excluded: Vec<VertexCoord> = upward_triangles_at(&entry, base, Region::FV)
            .iter()
            .flat_map(|t| t.corners())
            .collect();
        let (n, m) = frame_counts(vertices, &excluded, &entry);
        return u.powi(n + m).mul(&x.powi((vertices.len() - 2) as u32));
    }
    let ts = hitting_times_of(vertices, level - 1);
    let coarse: Vec<VertexCoord> = ts.iter().map(|&i| vertices[i]).collect();
    let mut acc = w_weight(&coarse, level - 1, base, u, x);
    for w in ts.windows(2) {
        acc = acc.mul(&w_weight(&vertices[w[0]..=w[1]], level, level - 1, u, x));
    }
    acc
}

/// Self-repelling weight of a W or V path: u^{N+M}·x^{ℓ-1} at level 1 and
/// the recursive product at higher levels; V paths are the product of their
/// two W-identified halves.
pub fn weight<T: Scalar>(path: &LatticePath, u: &T, x: &T) -> Result<T, PathError> {
    let is_v = matches!(path.class, PathClass::V)
        || (path.class == PathClass::Gamma && split_at_b(&path.vertices).is_some());
    match path.class {
        PathClass::Raw => return Err(PathError::WeightOnRaw),
        _ => {}
    }
    if is_v {
        let (i, _) = split_at_b(&path.vertices).expect("V path hits b");
        let part1 = &path.vertices[..=i];
        let part2 = &path.vertices[i..];
        Ok(w_weight(part1, path.level, 0, u, x).mul(&w_weight(part2, path.level, 0, u, x)))
    } else {
        Ok(w_weight(&path.vertices, path.level, 0, u, x))
    }
}

pub fn weight_f64(path: &LatticePath, u: f64, x: f64) -> Result<f64, PathError> {
    weight(path, &u, &x)
}

pub fn weight_exact(
    path: &LatticePath,
    u: &BigRational,
    x: &BigRational,
) -> Result<BigRational, PathError> {
    weight(path, u, x)
}
