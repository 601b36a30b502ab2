//! Exact geometry of the pre-gaskets F_N and F_N^V.
//!
//! Points are stored in the triangular lattice basis e_a = (1/2, √3/2),
//! e_b = (1, 0): a vertex is (a·e_a + b·e_b) / 2^level with integer a, b.
//! All membership and equality tests are exact; Cartesian coordinates are
//! produced only for display.

use std::cmp::Ordering;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("{0:?} is not a vertex of the level-{1} region graph")]
    NotARegionVertex(VertexCoord, u32),
    #[error("entry and exit of an isometry frame must differ")]
    DegenerateFrame,
    #[error("cannot express a level-{0} point at coarser level {1}")]
    LevelUnderflow(u32, u32),
}

/// Which pre-gasket graph we are working on: `F` is the two mirrored copies
/// of the unit triangle joined at O, `FV` adds the third copy shifted by b.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    F,
    FV,
}

/// Exact dyadic lattice point: (a·e_a + b·e_b) / 2^level.
#[derive(Debug, Clone, Copy)]
pub struct VertexCoord {
    pub a: i64,
    pub b: i64,
    pub level: u32,
}

impl VertexCoord {
    pub const fn new(a: i64, b: i64, level: u32) -> Self {
        VertexCoord { a, b, level }
    }

    pub const ORIGIN: VertexCoord = VertexCoord::new(0, 0, 0);
    /// The apex a = (1/2, √3/2).
    pub const CORNER_A: VertexCoord = VertexCoord::new(1, 0, 0);
    /// The right corner b = (1, 0).
    pub const CORNER_B: VertexCoord = VertexCoord::new(0, 1, 0);

    /// Same point with the smallest possible level.
    pub fn normalized(&self) -> VertexCoord {
        let (mut a, mut b, mut level) = (self.a, self.b, self.level);
        while level > 0 && a % 2 == 0 && b % 2 == 0 {
            a /= 2;
            b /= 2;
            level -= 1;
        }
        VertexCoord { a, b, level }
    }

    /// Integer coordinates of this point on the level-`level` lattice.
    /// Fails if the point is not dyadic at that level.
    pub fn at_level(&self, level: u32) -> Result<(i64, i64), GeometryError> {
        let n = self.normalized();
        if n.level > level {
            return Err(GeometryError::LevelUnderflow(n.level, level));
        }
        let f = 1i64 << (level - n.level);
        Ok((n.a * f, n.b * f))
    }

    /// True if the point lies on the level-`m` lattice (i.e. in G_m,
    /// assuming it is a gasket vertex at all).
    pub fn on_lattice(&self, m: u32) -> bool {
        self.normalized().level <= m
    }

    pub fn to_cartesian(&self) -> (f64, f64) {
        let s = (0.5f64).powi(self.level as i32);
        (
            s * (self.a as f64 * 0.5 + self.b as f64),
            s * (self.a as f64 * 3f64.sqrt() / 2.0),
        )
    }

    /// Squared Euclidean distance to `other`, times 4^L for the common
    /// level L (so the result is an exact integer).
    pub fn dist2_scaled(&self, other: &VertexCoord) -> (i64, u32) {
        let l = self.level.max(other.level);
        let (sa, sb) = self.at_level(l).expect("max level");
        let (oa, ob) = other.at_level(l).expect("max level");
        let (da, db) = (sa - oa, sb - ob);
        // |x·e_a + y·e_b|^2 = x^2 + x·y + y^2
        (da * da + da * db + db * db, l)
    }
}

impl PartialEq for VertexCoord {
    fn eq(&self, other: &Self) -> bool {
        let (x, y) = (self.normalized(), other.normalized());
        (x.a, x.b, x.level) == (y.a, y.b, y.level)
    }
}
impl Eq for VertexCoord {}

impl std::hash::Hash for VertexCoord {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        let n = self.normalized();
        (n.a, n.b, n.level).hash(state);
    }
}

impl PartialOrd for VertexCoord {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for VertexCoord {
    fn cmp(&self, other: &Self) -> Ordering {
        let (x, y) = (self.normalized(), other.normalized());
        (x.level, x.a, x.b).cmp(&(y.level, y.a, y.b))
    }
}

/// Twice the Cartesian inner product of two lattice step vectors
/// (given in (a, b) components at a common level). Exact integer; the
/// sign is all the reversing-number computation needs.
pub fn step_dot2(s: (i64, i64), t: (i64, i64)) -> i64 {
    2 * (s.0 * t.0 + s.1 * t.1) + s.0 * t.1 + s.1 * t.0
}

/// Reflection across the y-axis in lattice coordinates.
pub fn mirror(a: i64, b: i64) -> (i64, i64) {
    (a, -a - b)
}

/// Upward 2^{-scale} triangle, identified by its lower-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Triangle {
    /// Lower-left (O-role) corner; `corner + e_a` is the apex, `corner + e_b`
    /// the right corner, both at `scale`.
    pub corner: VertexCoord,
    pub scale: u32,
}

impl Triangle {
    pub fn corners(&self) -> [VertexCoord; 3] {
        let (a, b) = self.corner.at_level(self.scale).expect("corner level");
        [
            VertexCoord::new(a, b, self.scale),
            VertexCoord::new(a + 1, b, self.scale),
            VertexCoord::new(a, b + 1, self.scale),
        ]
    }

    pub fn contains_corner(&self, v: &VertexCoord) -> bool {
        self.corners().iter().any(|c| c == v)
    }

    /// The corner that is neither `x` nor `y`.
    pub fn third_corner(&self, x: &VertexCoord, y: &VertexCoord) -> Option<VertexCoord> {
        let cs = self.corners();
        if !self.contains_corner(x) || !self.contains_corner(y) || x == y {
            return None;
        }
        cs.into_iter().find(|c| c != x && c != y)
    }
}

/// Is the unit upward triangle with lower-left (a, b) part of the standard
/// (single-copy) gasket subdivision of the size-`size` triangle at the
/// origin? `size` must be a power of two.
fn is_std_tri(a: i64, b: i64, size: i64) -> bool {
    if a < 0 || b < 0 || a + b + 1 > size {
        return false;
    }
    if size == 1 {
        return true;
    }
    let h = size / 2;
    if a + b + 1 <= h {
        is_std_tri(a, b, h)
    } else if b >= h {
        is_std_tri(a, b - h, h)
    } else if a >= h {
        is_std_tri(a - h, b, h)
    } else {
        false
    }
}

fn copies(region: Region) -> &'static [fn(i64, i64, i64) -> (i64, i64)] {
    fn right(a: i64, b: i64, _s: i64) -> (i64, i64) {
        (a, b)
    }
    fn mirrored(a: i64, b: i64, _s: i64) -> (i64, i64) {
        mirror(a, b)
    }
    fn third(a: i64, b: i64, s: i64) -> (i64, i64) {
        (a, b - s)
    }
    match region {
        Region::F => &[right, mirrored],
        Region::FV => &[right, mirrored, third],
    }
}

/// Does the region contain `tri` as one of its upward 2^{-scale} triangles?
pub fn triangle_in_region(tri: &Triangle, region: Region) -> bool {
    let size = 1i64 << tri.scale;
    let Ok((a, b)) = tri.corner.at_level(tri.scale) else {
        return false;
    };
    let corners = [(a, b), (a + 1, b), (a, b + 1)];
    for map in copies(region) {
        let local: Vec<(i64, i64)> = corners.iter().map(|&(x, y)| map(x, y, size)).collect();
        // The image is again an upward triangle; find its lower-left corner.
        for &(la, lb) in &local {
            if local.contains(&(la + 1, lb))
                && local.contains(&(la, lb + 1))
                && is_std_tri(la, lb, size)
            {
                return true;
            }
        }
    }
    false
}

/// All upward 2^{-m} triangles of the region having `v` as a corner.
/// Deterministic order (lower-left coordinates, lexicographic).
pub fn upward_triangles_at(v: &VertexCoord, m: u32, region: Region) -> Vec<Triangle> {
    let Ok((a, b)) = v.at_level(m) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for (ca, cb) in [(a, b), (a - 1, b), (a, b - 1)] {
        let tri = Triangle {
            corner: VertexCoord::new(ca, cb, m),
            scale: m,
        };
        if triangle_in_region(&tri, region) {
            out.push(tri);
        }
    }
    out.sort_by(|s, t| {
        let sc = s.corner.at_level(m).unwrap();
        let tc = t.corner.at_level(m).unwrap();
        sc.cmp(&tc)
    });
    out
}

/// Is `v` a vertex of the level-`n` region graph?
pub fn is_region_vertex(v: &VertexCoord, n: u32, region: Region) -> bool {
    !upward_triangles_at(v, n, region).is_empty()
}

/// Neighbors of `v` in the level-`n` region graph: the other corners of the
/// unit triangles containing `v`. Sorted, deduplicated.
pub fn neighbors(
    v: &VertexCoord,
    n: u32,
    region: Region,
) -> Result<Vec<VertexCoord>, GeometryError> {
    let tris = upward_triangles_at(v, n, region);
    if tris.is_empty() {
        return Err(GeometryError::NotARegionVertex(*v, n));
    }
    let mut out: Vec<VertexCoord> = tris
        .iter()
        .flat_map(|t| t.corners())
        .filter(|c| c != v)
        .collect();
    out.sort();
    out.dedup();
    Ok(out)
}

/// The unique upward 2^{-m} triangle of the region containing the edge
/// {x, y} (two lattice neighbors at level m).
pub fn triangle_of_edge(
    x: &VertexCoord,
    y: &VertexCoord,
    m: u32,
    region: Region,
) -> Option<Triangle> {
    upward_triangles_at(x, m, region)
        .into_iter()
        .find(|t| t.contains_corner(y))
}

/// Orientation-aware similarity pinned by a triangle frame: O ↦ entry,
/// a ↦ exit, b ↦ the third corner of `traversed`. Maps level-n source
/// points to level-(scale + n) image points.
#[derive(Debug, Clone, Copy)]
pub struct CanonicalIsometry {
    /// entry at the triangle's scale
    origin: (i64, i64),
    /// images of e_a and e_b as lattice steps at the triangle's scale
    va: (i64, i64),
    vb: (i64, i64),
    pub scale: u32,
}

/// The similarity (composition of scaling, rotation, translation, and
/// reflection) determined by the entry and exit corners of a traversed
/// triangle.
pub fn canonical_isometry(
    entry: &VertexCoord,
    exit: &VertexCoord,
    traversed: &Triangle,
) -> Result<CanonicalIsometry, GeometryError> {
    if entry == exit {
        return Err(GeometryError::DegenerateFrame);
    }
    let third = traversed
        .third_corner(entry, exit)
        .ok_or(GeometryError::DegenerateFrame)?;
    let m = traversed.scale;
    let e = entry.at_level(m)?;
    let x = exit.at_level(m)?;
    let t = third.at_level(m)?;
    Ok(CanonicalIsometry {
        origin: e,
        va: (x.0 - e.0, x.1 - e.1),
        vb: (t.0 - e.0, t.1 - e.1),
        scale: m,
    })
}

impl CanonicalIsometry {
    /// Build a frame directly from an origin image and the images of the
    /// two basis steps (used for mirror-half placement).
    pub fn from_frame(origin: VertexCoord, va: (i64, i64), vb: (i64, i64), scale: u32) -> Self {
        let o = origin.at_level(scale).expect("origin level");
        CanonicalIsometry {
            origin: o,
            va,
            vb,
            scale,
        }
    }

    pub fn apply(&self, v: &VertexCoord) -> VertexCoord {
        let n = v.level;
        let f = 1i64 << n;
        VertexCoord::new(
            self.origin.0 * f + v.a * self.va.0 + v.b * self.vb.0,
            self.origin.1 * f + v.a * self.va.1 + v.b * self.vb.1,
            self.scale + n,
        )
    }

    /// Inverse image of a level-(scale + n) point; the linear part is
    /// unimodular so this is exact.
    pub fn apply_inverse(&self, v: &VertexCoord) -> Result<VertexCoord, GeometryError> {
        if v.level < self.scale {
            let (a, b) = v.at_level(self.scale)?;
            return self.apply_inverse(&VertexCoord::new(a, b, self.scale));
        }
        let n = v.level - self.scale;
        let f = 1i64 << n;
        let rx = v.a - self.origin.0 * f;
        let ry = v.b - self.origin.1 * f;
        let det = self.va.0 * self.vb.1 - self.va.1 * self.vb.0;
        debug_assert!(det == 1 || det == -1);
        let pa = (rx * self.vb.1 - ry * self.vb.0) / det;
        let pb = (ry * self.va.0 - rx * self.va.1) / det;
        Ok(VertexCoord::new(pa, pb, n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(a: i64, b: i64, l: u32) -> VertexCoord {
        VertexCoord::new(a, b, l)
    }

    #[test]
    fn cartesian_corners() {
        assert_eq!(v(0, 0, 0).to_cartesian(), (0.0, 0.0));
        let (x, y) = v(1, 0, 0).to_cartesian();
        assert!((x - 0.5).abs() < 1e-15 && (y - 0.8660254037844386).abs() < 1e-15);
        let (x, y) = v(1, 0, 1).to_cartesian();
        assert!((x - 0.25).abs() < 1e-15 && (y - 0.4330127018922193).abs() < 1e-15);
    }

    #[test]
    fn rescaled_points_compare_equal() {
        assert_eq!(v(1, 0, 0), v(2, 0, 1));
        assert_eq!(v(1, 0, 0), v(4, 0, 2));
        assert_ne!(v(1, 0, 1), v(1, 0, 2));
        assert!(v(2, 0, 1).on_lattice(0));
        assert!(!v(1, 1, 1).on_lattice(0));
    }

    #[test]
    fn neighbors_of_origin_level1() {
        let n = neighbors(&VertexCoord::ORIGIN, 1, Region::F).unwrap();
        let expect = vec![v(0, -1, 1), v(0, 1, 1), v(1, -1, 1), v(1, 0, 1)];
        assert_eq!(n, {
            let mut e = expect;
            e.sort();
            e
        });
    }

    #[test]
    fn neighbors_of_apex_level1() {
        let n = neighbors(&VertexCoord::CORNER_A, 1, Region::F).unwrap();
        assert_eq!(n.len(), 2);
        assert!(n.contains(&v(1, 0, 1))); // mOa
        assert!(n.contains(&v(1, 1, 1))); // mab
    }

    #[test]
    fn neighbors_of_b_in_fv() {
        let n = neighbors(&VertexCoord::CORNER_B, 1, Region::FV).unwrap();
        assert_eq!(n.len(), 4);
        assert!(n.contains(&v(0, 1, 1))); // mOb
        assert!(n.contains(&v(1, 1, 1))); // mab
        assert!(n.contains(&v(0, 3, 1))); // toward 2b
        assert!(n.contains(&v(1, 2, 1))); // toward a+b
        // ... but only 2 neighbors inside F itself.
        assert_eq!(neighbors(&VertexCoord::CORNER_B, 1, Region::F).unwrap().len(), 2);
    }

    #[test]
    fn neighbor_symmetry() {
        for region in [Region::F, Region::FV] {
            let size = 1i64 << 3;
            for a in -(size + 1)..=(size + 1) {
                for b in -(2 * size + 1)..=(2 * size + 1) {
                    let p = v(a, b, 3);
                    if !is_region_vertex(&p, 3, region) {
                        continue;
                    }
                    for q in neighbors(&p, 3, region).unwrap() {
                        assert!(neighbors(&q, 3, region).unwrap().contains(&p));
                    }
                }
            }
        }
    }

    #[test]
    fn triangles_at_vertices() {
        // O at scale 1 in F: one per half.
        assert_eq!(upward_triangles_at(&VertexCoord::ORIGIN, 1, Region::F).len(), 2);
        // mOa: lower-left and upper triangles of △Oab.
        let t = upward_triangles_at(&v(1, 0, 1), 1, Region::F);
        assert_eq!(t.len(), 2);
        assert!(t.iter().any(|t| t.corner == v(0, 0, 1)));
        assert!(t.iter().any(|t| t.corner == v(1, 0, 1)));
        // interior mab: 2 triangles.
        assert_eq!(upward_triangles_at(&v(1, 1, 1), 1, Region::F).len(), 2);
        // the apex has a single triangle at every scale.
        assert_eq!(upward_triangles_at(&VertexCoord::CORNER_A, 2, Region::F).len(), 1);
    }

    #[test]
    fn isometry_forced_corner_images() {
        let lower = Triangle {
            corner: v(0, 0, 1),
            scale: 1,
        };
        let iso = canonical_isometry(&VertexCoord::ORIGIN, &v(1, 0, 1), &lower).unwrap();
        assert_eq!(iso.apply(&VertexCoord::CORNER_B), v(0, 1, 1)); // b ↦ mOb

        let upper = Triangle {
            corner: v(1, 0, 1),
            scale: 1,
        };
        let iso = canonical_isometry(&v(1, 0, 1), &VertexCoord::CORNER_A, &upper).unwrap();
        assert_eq!(iso.apply(&VertexCoord::CORNER_B), v(1, 1, 1)); // b ↦ mab
    }

    #[test]
    fn isometry_roundtrip_on_fine_lattice() {
        let lower = Triangle {
            corner: v(0, 0, 1),
            scale: 1,
        };
        let iso = canonical_isometry(&v(0, 1, 1), &VertexCoord::ORIGIN, &lower).unwrap();
        let mut checked = 0;
        for a in 0..=16 {
            for b in 0..=16 {
                let p = v(a, b, 4);
                if !is_region_vertex(&p, 4, Region::F) {
                    continue;
                }
                let q = iso.apply(&p);
                assert_eq!(iso.apply_inverse(&q).unwrap(), p);
                checked += 1;
                if checked >= 10 {
                    return;
                }
            }
        }
    }

    #[test]
    fn companion_triangles_meet_only_at_their_shared_vertex() {
        // Mirror-half placement during refinement relies on the two upward
        // triangles at an entry vertex intersecting in exactly that vertex.
        // Exhaustive over both regions at scales m ≤ 3.
        for region in [Region::F, Region::FV] {
            for m in 1..=3u32 {
                let size = 1i64 << m;
                for a in -(size + 1)..=(size + 1) {
                    for b in -(2 * size + 1)..=(2 * size + 1) {
                        let p = v(a, b, m);
                        let tris = upward_triangles_at(&p, m, region);
                        if tris.len() != 2 {
                            continue;
                        }
                        let shared: Vec<_> = tris[0]
                            .corners()
                            .iter()
                            .filter(|c| tris[1].contains_corner(c))
                            .cloned()
                            .collect();
                        assert_eq!(shared, vec![p]);
                    }
                }
            }
        }
    }
}
