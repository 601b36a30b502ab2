//! Chronological loop erasure on level-1 paths and the recursive
//! erasing-larger-loops-first operator L, with its intermediate
//! coarse-grainings Q̂_1, …, Q̂_N.

use std::collections::HashMap;

use crate::gasket_geometry::VertexCoord;
use crate::path_space::{
    classify, coarse_grain, hitting_times_of, skeleton, LatticePath, PathClass, PathError,
};

/// Indices kept by chronological loop erasure: s_0 is the last visit time of
/// the start vertex, s_i the last visit time of w(s_{i-1}+1).
fn kept_indices(verts: &[VertexCoord]) -> Vec<usize> {
    let mut last: HashMap<VertexCoord, usize> = HashMap::with_capacity(verts.len());
    for (i, v) in verts.iter().enumerate() {
        last.insert(*v, i);
    }
    let mut out = Vec::new();
    let mut s = last[&verts[0]];
    out.push(s);
    while s + 1 < verts.len() {
        s = last[&verts[s + 1]];
        out.push(s);
    }
    out
}

/// Chronological loop erasure of a level-1 path.
pub fn erase_chronological(path: &LatticePath) -> Result<LatticePath, PathError> {
    if path.level != 1 {
        return Err(PathError::NotLevelOne);
    }
    if path.class == PathClass::Raw {
        return Err(PathError::EraseClass);
    }
    let verts: Vec<VertexCoord> = kept_indices(&path.vertices)
        .into_iter()
        .map(|i| path.vertices[i])
        .collect();
    let class = classify(&verts, 1).unwrap_or(PathClass::Raw);
    Ok(LatticePath::with_class(verts, 1, class))
}

/// Erase the loops of the scale-`k` coarse-graining of `verts` and refit the
/// original fine excursions between the surviving coarse visits.
/// Returns (refitted fine vertices, erased coarse vertices).
fn refit_at_scale(verts: &[VertexCoord], k: u32) -> (Vec<VertexCoord>, Vec<VertexCoord>) {
    let ts = hitting_times_of(verts, k);
    let coarse: Vec<VertexCoord> = ts.iter().map(|&i| verts[i]).collect();
    let keep = kept_indices(&coarse);
    let mut fine = vec![verts[ts[keep[0]]]];
    for &s in &keep[..keep.len() - 1] {
        fine.extend_from_slice(&verts[ts[s] + 1..=ts[s + 1]]);
    }
    let erased: Vec<VertexCoord> = keep.into_iter().map(|i| coarse[i]).collect();
    (fine, erased)
}

/// Erase all largest-scale (2^{-1}) loops: coarse-grain to level 1, erase the
/// coarse loops chronologically, and restore the fine structure between the
/// surviving coarse visits. Returns the refitted path and the loop-erased
/// coarse path Q̂_1.
pub fn erase_largest_scale(path: &LatticePath) -> Result<(LatticePath, LatticePath), PathError> {
    if path.level < 1 {
        return Err(PathError::LevelOrder(1, path.level));
    }
    let (fine, coarse) = refit_at_scale(&path.vertices, 1);
    let fine_class = classify(&fine, path.level).unwrap_or(PathClass::Raw);
    let coarse_class = classify(&coarse, 1).unwrap_or(PathClass::Raw);
    Ok((
        LatticePath::with_class(fine, path.level, fine_class),
        LatticePath::with_class(coarse, 1, coarse_class),
    ))
}

/// One induction stage: erase the 2^{-m}-coarse loops of every segment of
/// `current` between consecutive 2^{-(m-1)}-skeleton exit times.
fn ellf_stage(current: &LatticePath, m: u32) -> Result<LatticePath, PathError> {
    let verts = if m == 1 {
        refit_at_scale(&current.vertices, 1).0
    } else {
        let sk = skeleton(current, m - 1)?;
        let mut bounds = vec![0usize];
        bounds.extend(&sk.exit_times);
        let mut out: Vec<VertexCoord> = Vec::with_capacity(current.vertices.len());
        for w in bounds.windows(2) {
            let (seg, _) = refit_at_scale(&current.vertices[w[0]..=w[1]], m);
            let skip = usize::from(!out.is_empty());
            out.extend_from_slice(&seg[skip..]);
        }
        out
    };
    let class = classify(&verts, current.level).unwrap_or(PathClass::Raw);
    Ok(LatticePath::with_class(verts, current.level, class))
}

/// The erasing-larger-loops-first operator L, together with the coarse
/// snapshots Q̂_1, …, Q̂_N (Q̂_M is the 2^{-M}-coarse-graining after all
/// loops of scale coarser than 2^{-M} are gone; Q̂_N is the output).
pub fn ellf_with_intermediates(
    path: &LatticePath,
) -> Result<(LatticePath, Vec<LatticePath>), PathError> {
    if path.class == PathClass::Raw {
        return Err(PathError::EraseClass);
    }
    let mut current = path.clone();
    let mut qhats = Vec::with_capacity(path.level as usize);
    for m in 1..=path.level {
        current = ellf_stage(&current, m)?;
        qhats.push(coarse_grain(&current, m)?);
    }
    Ok((current, qhats))
}

/// The erasing-larger-loops-first operator L: W_N ∪ V_N → Γ_N.
pub fn ellf(path: &LatticePath) -> Result<LatticePath, PathError> {
    ellf_with_intermediates(path).map(|(p, _)| p)
}

/// The ten loopless level-1 paths from O to a, in canonical order
/// w*_1, …, w*_10.
pub fn gamma1_table() -> [LatticePath; 10] {
    const O: (i64, i64) = (0, 0);
    const MOA: (i64, i64) = (1, 0);
    const MOB: (i64, i64) = (0, 1);
    const MAB: (i64, i64) = (1, 1);
    const A: (i64, i64) = (2, 0);
    const B: (i64, i64) = (0, 2);
    // Within the monomial pairs {2,3}, {5,6}, {9,10} the assignment is
    // pinned by exact series comparison of the enumerated loop-erasure
    // outcomes against the printed p_i/q_i closed forms.
    let table: [&[(i64, i64)]; 10] = [
        &[O, MOA, A],
        &[O, MOB, MOA, A],
        &[O, MOA, MAB, A],
        &[O, MOB, MOA, MAB, A],
        &[O, MOB, MAB, MOA, A],
        &[O, MOA, MOB, MAB, A],
        &[O, MOB, MAB, A],
        &[O, MOB, B, MAB, A],
        &[O, MOB, B, MAB, MOA, A],
        &[O, MOA, MOB, B, MAB, A],
    ];
    table.map(|pts| {
        let verts: Vec<VertexCoord> = pts.iter().map(|&(a, b)| VertexCoord::new(a, b, 1)).collect();
        LatticePath::with_class(verts, 1, PathClass::Gamma)
    })
}

/// 1-based index of a Γ_1 path in the canonical table.
pub fn gamma1_index(path: &LatticePath) -> Result<usize, PathError> {
    if path.level != 1 {
        return Err(PathError::NotLevelOne);
    }
    gamma1_table()
        .iter()
        .position(|w| w.vertices == path.vertices)
        .map(|i| i + 1)
        .ok_or(PathError::NotGamma1)
}

/// Skeleton offspring counts (#Type 1, #Type 2) of each canonical Γ_1 path
/// at scale 1, indexed 1..=10.
pub fn gamma1_offspring(index: usize) -> (usize, usize) {
    const TABLE: [(usize, usize); 10] = [
        (2, 0),
        (1, 1),
        (1, 1),
        (0, 2),
        (2, 1),
        (2, 1),
        (3, 0),
        (2, 1),
        (1, 2),
        (1, 2),
    ];
    TABLE[index - 1]
}
