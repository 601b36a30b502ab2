//! Deterministic SVG rendering of path dumps over a gasket wireframe.

use std::fmt::Write as _;

use ellf::gasket_geometry::{is_region_vertex, neighbors, Region, VertexCoord};
use ellf::path_space::{LatticePath, PathClass};

const WIDTH: f64 = 800.0;
const MARGIN: f64 = 20.0;
const MAX_WIREFRAME_LEVEL: u32 = 6;
const DEFAULT_WIREFRAME_LEVEL: u32 = 3;

const PALETTE: [&str; 6] = [
    "#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

/// All unit-edge segments of the level-m pre-gasket, in Cartesian
/// coordinates, each listed once.
fn wireframe_segments(level: u32, region: Region) -> Vec<((f64, f64), (f64, f64))> {
    let n = 1i64 << level;
    let mut segs = Vec::new();
    for a in -(2 * n)..=(2 * n) {
        for b in -(3 * n)..=(3 * n) {
            let v = VertexCoord::new(a, b, level);
            if !is_region_vertex(&v, level, region) {
                continue;
            }
            let Ok(nbrs) = neighbors(&v, level, region) else {
                continue;
            };
            for w in nbrs {
                let (wa, wb) = w.at_level(level).expect("neighbor at same level");
                if (wa, wb) > (a, b) {
                    segs.push((v.to_cartesian(), w.to_cartesian()));
                }
            }
        }
    }
    segs
}

/// Pick the region: the plain double-simplex F unless some path strays
/// into the third copy only present in F^V.
fn region_for(paths: &[LatticePath]) -> Region {
    let strays = paths.iter().any(|p| {
        p.class == PathClass::V
            || p.vertices
                .iter()
                .any(|v| !is_region_vertex(&v.normalized(), v.normalized().level, Region::F))
    });
    if strays {
        Region::FV
    } else {
        Region::F
    }
}

pub fn render(paths: &[LatticePath]) -> String {
    let level = paths
        .iter()
        .map(|p| p.level)
        .max()
        .map(|m| m.clamp(1, MAX_WIREFRAME_LEVEL))
        .unwrap_or(DEFAULT_WIREFRAME_LEVEL);
    let segs = wireframe_segments(level, region_for(paths));

    let mut min = (f64::INFINITY, f64::INFINITY);
    let mut max = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut grow = |p: (f64, f64)| {
        min.0 = min.0.min(p.0);
        min.1 = min.1.min(p.1);
        max.0 = max.0.max(p.0);
        max.1 = max.1.max(p.1);
    };
    for (a, b) in &segs {
        grow(*a);
        grow(*b);
    }
    for p in paths {
        for v in &p.vertices {
            grow(v.to_cartesian());
        }
    }
    let span_x = (max.0 - min.0).max(1e-9);
    let scale = (WIDTH - 2.0 * MARGIN) / span_x;
    let height = (max.1 - min.1) * scale + 2.0 * MARGIN;
    // Flip y: lattice coordinates grow upward, SVG coordinates downward.
    let tx = |p: (f64, f64)| (MARGIN + (p.0 - min.0) * scale, MARGIN + (max.1 - p.1) * scale);

    let mut out = String::new();
    writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH:.0}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {WIDTH:.0} {height:.0}\">"
    )
    .unwrap();
    writeln!(
        out,
        "  <g stroke=\"#c8c8c8\" stroke-width=\"0.6\" fill=\"none\">"
    )
    .unwrap();
    for (a, b) in &segs {
        let (x1, y1) = tx(*a);
        let (x2, y2) = tx(*b);
        writeln!(
            out,
            "    <line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\"/>"
        )
        .unwrap();
    }
    writeln!(out, "  </g>").unwrap();
    for (i, p) in paths.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = p
            .vertices
            .iter()
            .map(|v| {
                let (x, y) = tx(v.to_cartesian());
                format!("{x:.2},{y:.2}")
            })
            .collect();
        writeln!(
            out,
            "  <polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
            points.join(" ")
        )
        .unwrap();
    }
    writeln!(out, "</svg>").unwrap();
    out
}
