//! Exact samplers for the self-repelling walk family and its loop-erased
//! descendants, the refinement coupling, the two-type branching process with
//! its Kesten–Stigum limit, the Laplace-transform functional equations, and
//! displacement/tail estimators.

use num_rational::BigRational;
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::gasket_geometry::{
    canonical_isometry, neighbors, step_dot2, triangle_of_edge, Region, Triangle, VertexCoord,
};
use crate::loop_erasure::{ellf, gamma1_offspring, gamma1_table};
use crate::path_space::{
    placement, skeleton, LatticePath, PathClass, PathError, TriangleType,
};
use crate::renormalization::{
    fixed_point, hat_polynomials, HatPolynomials, RenormError, SpectralData, StepWeights,
};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum StochError {
    #[error(transparent)]
    Renorm(#[from] RenormError),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error("singular linear system in conditioned-walk construction")]
    Singular,
    #[error("conditioned-walk invariant violated: {0}")]
    Invariant(String),
}

// ---------------------------------------------------------------------------
// The conditioned-step automaton: exact one-level sampler for the
// self-repelling walk measure on W_1.
// ---------------------------------------------------------------------------

/// Level-1 origin and target in the W template frame.
fn v1(a: i64, b: i64) -> VertexCoord {
    VertexCoord::new(a, b, 1)
}

/// Transition graph of the level-1 walk on F, with states (previous, current)
/// plus a start state at O. Arrows carry the exponent of the penalty u
/// (reversal at an interior vertex and/or stepping back onto O).
struct StepGraph {
    /// (previous, current); index 0 is the start state (None, O).
    states: Vec<(Option<VertexCoord>, VertexCoord)>,
    /// Per state: (next vertex, next state or None when absorbed at a,
    /// u-exponent of the step).
    arrows: Vec<Vec<(VertexCoord, Option<usize>, u32)>>,
}

fn step_graph() -> StepGraph {
    let origin = v1(0, 0);
    let target = v1(2, 0);
    let forbidden = [v1(0, 2), v1(2, -2), v1(0, -2)];
    let mut states: Vec<(Option<VertexCoord>, VertexCoord)> = vec![(None, origin)];
    let mut index = std::collections::HashMap::new();
    index.insert(states[0], 0usize);
    let mut arrows: Vec<Vec<(VertexCoord, Option<usize>, u32)>> = Vec::new();
    let mut head = 0usize;
    while head < states.len() {
        let (prev, cur) = states[head];
        let mut out = Vec::new();
        for next in neighbors(&cur, 1, Region::F).expect("level-1 region vertex") {
            if forbidden.contains(&next) {
                continue;
            }
            let mut e = 0u32;
            if let Some(p) = prev {
                // Reversal counts only at interior vertices (cur ∉ G_0;
                // here the only G_0 vertex a state can sit on is O).
                let s_in = (cur.a - p.a, cur.b - p.b);
                let s_out = (next.a - cur.a, next.b - cur.b);
                if cur != origin && step_dot2(s_in, s_out) < 0 {
                    e += 1;
                }
            }
            if next == origin {
                e += 1;
            }
            let next_state = if next == target {
                None
            } else {
                let key = (Some(cur), next);
                let idx = *index.entry(key).or_insert_with(|| {
                    states.push(key);
                    states.len() - 1
                });
                Some(idx)
            };
            out.push((next, next_state, e));
        }
        arrows.push(out);
        head += 1;
    }
    StepGraph { states, arrows }
}

/// Solve h(s) = Σ_next weight(s→next)·h(next) with h ≡ 1 at absorption,
/// where weight = x·u^e, by Gaussian elimination on (I − A)h = c.
fn solve_h<T: Scalar>(g: &StepGraph, x: &T, u: &T, score: impl Fn(&T) -> f64) -> Option<Vec<T>> {
    let n = g.states.len();
    let mut m: Vec<Vec<T>> = vec![vec![T::zero(); n]; n];
    let mut c: Vec<T> = vec![T::zero(); n];
    for (s, row) in m.iter_mut().enumerate() {
        row[s] = T::one();
    }
    for (s, out) in g.arrows.iter().enumerate() {
        for (_, next_state, e) in out {
            let w = x.mul(&u.powi(*e));
            match next_state {
                Some(t) => m[s][*t] = m[s][*t].sub(&w),
                None => c[s] = c[s].add(&w),
            }
        }
    }
    // Gaussian elimination with pivoting by the caller-supplied magnitude.
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            score(&m[i][col])
                .partial_cmp(&score(&m[j][col]))
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if score(&m[pivot][col]) <= 0.0 {
            return None;
        }
        m.swap(col, pivot);
        c.swap(col, pivot);
        let inv = T::one().div(&m[col][col]);
        for k in col..n {
            m[col][k] = m[col][k].mul(&inv);
        }
        c[col] = c[col].mul(&inv);
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = m[row][col].clone();
            if score(&f) == 0.0 {
                continue;
            }
            for k in col..n {
                m[row][k] = m[row][k].sub(&f.mul(&m[col][k]));
            }
            c[row] = c[row].sub(&f.mul(&c[col]));
        }
    }
    Some(c)
}

struct Arrow {
    next: VertexCoord,
    state: Option<usize>,
    prob: f64,
}

/// Exact sampler for the one-level self-repelling walk measure on W_1: the
/// finite (previous, current) chain reweighted by completion weights h so
/// that each emitted path w has probability u^{N(w)+M(w)}·x_u^{ℓ(w)−1}.
pub struct Automaton {
    pub u: f64,
    pub x: f64,
    h: Vec<f64>,
    trans: Vec<Vec<Arrow>>,
}

impl Automaton {
    /// Build at the fixed point x_u of Φ(·, u), making the total emission
    /// weight Σ_{W_1} u^{N+M}·x_u^ℓ = Φ(x_u) = x_u, i.e. h(start) = x_u.
    pub fn build(u: f64) -> Result<Automaton, StochError> {
        let x = fixed_point(u)?.x_u;
        Automaton::build_with_x(x, u)
    }

    /// Build at an arbitrary positive weight x below the pole of Φ.
    pub fn build_with_x(x: f64, u: f64) -> Result<Automaton, StochError> {
        let g = step_graph();
        let h_full = solve_h(&g, &x, &u, |t: &f64| t.abs()).ok_or(StochError::Singular)?;
        let mut trans = Vec::with_capacity(g.states.len());
        for (s, out) in g.arrows.iter().enumerate() {
            let hs = h_full[s];
            let live = hs > 1e-14;
            let mut row = Vec::with_capacity(out.len());
            let mut total = 0.0;
            for &(next, next_state, e) in out {
                let w = x * u.powi(e as i32);
                let hn = next_state.map_or(1.0, |t| h_full[t]);
                let prob = if live { w * hn / hs } else { 0.0 };
                total += prob;
                row.push(Arrow {
                    next,
                    state: next_state,
                    prob,
                });
            }
            if live && (total - 1.0).abs() > 1e-9 {
                return Err(StochError::Invariant(format!(
                    "outgoing probabilities of state {s} sum to {total}"
                )));
            }
            trans.push(row);
        }
        Ok(Automaton {
            u,
            x,
            h: h_full,
            trans,
        })
    }

    /// Completion weights per state; index 0 is the start state, where
    /// h = Φ(x, u).
    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn h_start(&self) -> f64 {
        self.h[0]
    }

    /// Exact-rational completion weights of the same linear system.
    pub fn h_rational(x: &BigRational, u: &BigRational) -> Option<Vec<BigRational>> {
        use num_traits::Zero;
        let g = step_graph();
        solve_h(&g, x, u, |t: &BigRational| {
            if t.is_zero() {
                0.0
            } else {
                1.0
            }
        })
    }

    /// Outgoing (next vertex, probability) pairs of a state, for diagnostics.
    pub fn outgoing(&self, s: usize) -> Vec<(VertexCoord, f64)> {
        self.trans[s].iter().map(|a| (a.next, a.prob)).collect()
    }

    pub fn state_count(&self) -> usize {
        self.trans.len()
    }

    /// Draw one W_1 path in the level-1 template frame (O to a; the mirror
    /// half of F carries negative b coordinates).
    pub fn sample_w1<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<VertexCoord> {
        let mut verts = vec![v1(0, 0)];
        let mut s = 0usize;
        loop {
            let row = &self.trans[s];
            let mut r = rng.gen::<f64>();
            let mut chosen = row.len() - 1;
            for (i, a) in row.iter().enumerate() {
                if r < a.prob {
                    chosen = i;
                    break;
                }
                r -= a.prob;
            }
            let a = &row[chosen];
            verts.push(a.next);
            match a.state {
                Some(t) => s = t,
                None => break,
            }
        }
        verts
    }

    /// Draw from the level-N self-repelling walk measure on W_N: a W_1
    /// coarse path, then an independent W_1 inserted into every coarse step,
    /// repeated down to edge length 2^{-N}.
    pub fn sample_srw<R: Rng + ?Sized>(
        &self,
        n: u32,
        rng: &mut R,
    ) -> Result<LatticePath, StochError> {
        assert!(n >= 1, "walk level must be at least 1");
        let mut verts = self.sample_w1(rng);
        for m in 1..n {
            verts = self.insert_level(&verts, m, rng)?;
        }
        Ok(LatticePath::with_class(verts, n, PathClass::W))
    }

    /// Draw from the level-N measure on V_N: two independent W_N halves
    /// glued at b (the second half may leak into the third copy of the
    /// gasket above b).
    pub fn sample_v<R: Rng + ?Sized>(
        &self,
        n: u32,
        rng: &mut R,
    ) -> Result<LatticePath, StochError> {
        assert!(n >= 1, "walk level must be at least 1");
        let unit = Triangle {
            corner: VertexCoord::ORIGIN,
            scale: 0,
        };
        let o = VertexCoord::ORIGIN;
        let b = VertexCoord::CORNER_B;
        let a = VertexCoord::CORNER_A;
        let mut verts: Vec<VertexCoord> = Vec::new();
        for (entry, exit) in [(o, b), (b, a)] {
            let pl = placement(&unit, &entry, &exit, TriangleType::Type1)?;
            let half = self.sample_w1(rng);
            let skip = usize::from(!verts.is_empty());
            for tv in &half[skip..] {
                let q = pl
                    .push_forward(tv, 1)
                    .ok_or_else(|| StochError::Invariant("template left its frame".into()))?;
                verts.push(q);
            }
        }
        for m in 1..n {
            verts = self.insert_level(&verts, m, rng)?;
        }
        Ok(LatticePath::with_class(verts, n, PathClass::V))
    }

    /// Refine a level-m vertex sequence to level m+1 by substituting an
    /// independent W_1 draw into each step, mapped through the frame of the
    /// traversed triangle (mirror half to the companion triangle at the
    /// entry vertex).
    fn insert_level<R: Rng + ?Sized>(
        &self,
        verts: &[VertexCoord],
        m: u32,
        rng: &mut R,
    ) -> Result<Vec<VertexCoord>, StochError> {
        let mut out = vec![verts[0]];
        for pair in verts.windows(2) {
            let (v, w) = (&pair[0], &pair[1]);
            let tri = triangle_of_edge(v, w, m, Region::FV)
                .ok_or_else(|| StochError::Invariant("coarse step is not an edge".into()))?;
            let pl = placement(&tri, v, w, TriangleType::Type1)?;
            let tmpl = self.sample_w1(rng);
            for tv in &tmpl[1..] {
                let q = pl
                    .push_forward(tv, 1)
                    .ok_or_else(|| StochError::Invariant("template left its frame".into()))?;
                out.push(q);
            }
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Loop-erased samplers and the refinement coupling.
// ---------------------------------------------------------------------------

/// Which one-level outcome table drives the top of the recursion: the
/// erased-W family (p) or the erased-V family (q).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LerwKind {
    Hat,
    HatPrime,
}

/// The level-0 seed path (O, a).
pub fn path_f_a() -> LatticePath {
    LatticePath::with_class(
        vec![VertexCoord::ORIGIN, VertexCoord::CORNER_A],
        0,
        PathClass::Gamma,
    )
}

/// The level-0 seed path (O, b, a).
pub fn path_f_b() -> LatticePath {
    LatticePath::with_class(
        vec![
            VertexCoord::ORIGIN,
            VertexCoord::CORNER_B,
            VertexCoord::CORNER_A,
        ],
        0,
        PathClass::Gamma,
    )
}

fn draw_index<R: Rng + ?Sized>(weights: &[f64; 10], rng: &mut R) -> usize {
    let mut r = rng.gen::<f64>();
    let mut last_positive = 0;
    for (i, w) in weights.iter().enumerate() {
        if *w > 0.0 {
            if r < *w {
                return i;
            }
            last_positive = i;
        }
        r -= w.max(0.0);
    }
    last_positive
}

/// One coupled refinement step: substitute an independent one-level loopless
/// outcome (drawn from p for Type 1 triangles, q for Type 2) into every
/// triangle of the path's finest skeleton.
pub fn refine<R: Rng + ?Sized>(
    path: &LatticePath,
    weights: &StepWeights,
    rng: &mut R,
) -> Result<LatticePath, PathError> {
    let sk = skeleton(path, path.level)?;
    let frames = sk.frames(path.vertices[0]);
    let table = gamma1_table();
    let mut verts = vec![path.vertices[0]];
    for (i, ((entry, exit), tri)) in frames.iter().zip(&sk.triangles).enumerate() {
        let dist = match sk.types[i] {
            TriangleType::Type1 => &weights.p,
            TriangleType::Type2 => &weights.q,
        };
        let idx = draw_index(dist, rng);
        let iso = canonical_isometry(entry, exit, tri)?;
        for tv in &table[idx].vertices[1..] {
            verts.push(iso.apply(tv));
        }
    }
    Ok(LatticePath::with_class(
        verts,
        path.level + 1,
        PathClass::Gamma,
    ))
}

/// Exact draw from the level-N loop-erased walk law by recursive
/// substitution, starting from the one-step seed (`Hat`) or the two-step
/// seed through b (`HatPrime`).
pub fn sample_lerw<R: Rng + ?Sized>(
    weights: &StepWeights,
    n: u32,
    kind: LerwKind,
    rng: &mut R,
) -> Result<LatticePath, PathError> {
    let mut path = match kind {
        LerwKind::Hat => path_f_a(),
        LerwKind::HatPrime => path_f_b(),
    };
    for _ in 0..n {
        path = refine(&path, weights, rng)?;
    }
    Ok(path)
}

/// The cross-validation route: sample the self-repelling walk and erase its
/// loops largest-first. Same law as [`sample_lerw`] with `Hat`.
pub fn lerw_by_erasure<R: Rng + ?Sized>(
    aut: &Automaton,
    n: u32,
    rng: &mut R,
) -> Result<LatticePath, StochError> {
    let walk = aut.sample_srw(n, rng)?;
    Ok(ellf(&walk)?)
}

/// Erased-V counterpart of [`lerw_by_erasure`] (same law as `HatPrime`).
pub fn lerw_by_erasure_v<R: Rng + ?Sized>(
    aut: &Automaton,
    n: u32,
    rng: &mut R,
) -> Result<LatticePath, StochError> {
    let walk = aut.sample_v(n, rng)?;
    Ok(ellf(&walk)?)
}

/// The coupled chain ω_0 = f_a ◁ ω_1 ◁ … ◁ ω_n of successive refinements.
pub fn sample_chain<R: Rng + ?Sized>(
    weights: &StepWeights,
    n: u32,
    rng: &mut R,
) -> Result<Vec<LatticePath>, PathError> {
    let mut chain = vec![path_f_a()];
    for _ in 0..n {
        let next = refine(chain.last().unwrap(), weights, rng)?;
        chain.push(next);
    }
    Ok(chain)
}

/// (#Type 1, #Type 2) triangles of the path's finest skeleton.
pub fn skeleton_counts(path: &LatticePath) -> Result<(usize, usize), PathError> {
    let sk = skeleton(path, path.level)?;
    Ok((sk.s1(), sk.s2()))
}

// ---------------------------------------------------------------------------
// Time-scaled processes.
// ---------------------------------------------------------------------------

/// A level-N loopless path with its λ^{-N}-scaled exit-time sequence: the
/// finite-level approximant X_N of the scaling limit.
#[derive(Debug, Clone)]
pub struct SampledProcess {
    pub path: LatticePath,
    pub level: u32,
    /// λ^{-N}-scaled fine step counts at each finest-skeleton exit; strictly
    /// increasing, ending at λ^{-N}·ℓ(path).
    pub exit_times: Vec<f64>,
    /// λ^{-N}: the duration of one fine step.
    pub time_scale: f64,
}

/// Wrap a loopless path as a time-scaled process.
pub fn time_scaled(path: LatticePath, spectral: &SpectralData) -> Result<SampledProcess, PathError> {
    let level = path.level;
    let scale = spectral.lambda.powi(-(level as i32));
    let sk = skeleton(&path, level)?;
    let exit_times = sk.exit_times.iter().map(|&i| i as f64 * scale).collect();
    Ok(SampledProcess {
        path,
        level,
        exit_times,
        time_scale: scale,
    })
}

/// Draw X_N: a level-N loop-erased sample with λ^{-N}-scaled time.
pub fn sample_x<R: Rng + ?Sized>(
    weights: &StepWeights,
    spectral: &SpectralData,
    n: u32,
    rng: &mut R,
) -> Result<SampledProcess, PathError> {
    let path = sample_lerw(weights, n, LerwKind::Hat, rng)?;
    time_scaled(path, spectral)
}

/// Position of the linearly interpolated path at fine-step position s
/// (clamped to [0, ℓ]); Cartesian coordinates.
pub fn eval_position(path: &LatticePath, s: f64) -> (f64, f64) {
    let l = path.len();
    if l == 0 {
        return path.vertices[0].to_cartesian();
    }
    let s = s.clamp(0.0, l as f64);
    let i = (s.floor() as usize).min(l - 1);
    let f = s - i as f64;
    let (x0, y0) = path.vertices[i].to_cartesian();
    let (x1, y1) = path.vertices[i + 1].to_cartesian();
    (x0 + f * (x1 - x0), y0 + f * (y1 - y0))
}

impl SampledProcess {
    /// X_N(t) for scaled time t (the path sits at a for t beyond its end).
    pub fn at(&self, t: f64) -> (f64, f64) {
        eval_position(&self.path, t / self.time_scale)
    }

    pub fn duration(&self) -> f64 {
        self.path.len() as f64 * self.time_scale
    }
}

/// Uniform distance sup_t |X(t) − Y(t)| of two piecewise-linear processes,
/// evaluated over the union of their time breakpoints.
pub fn sup_distance(a: &SampledProcess, b: &SampledProcess) -> f64 {
    let mut best = 0.0f64;
    let mut check = |t: f64| {
        let (xa, ya) = a.at(t);
        let (xb, yb) = b.at(t);
        let d = ((xa - xb).powi(2) + (ya - yb).powi(2)).sqrt();
        if d > best {
            best = d;
        }
    };
    for i in 0..=a.path.len() {
        check(i as f64 * a.time_scale);
    }
    for i in 0..=b.path.len() {
        check(i as f64 * b.time_scale);
    }
    best
}

// ---------------------------------------------------------------------------
// The two-type branching process and its Kesten–Stigum limit.
// ---------------------------------------------------------------------------

/// Population counts of the two triangle types.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BranchState {
    pub s1: u64,
    pub s2: u64,
}

/// Simulate the two-type skeleton branching process for `n` generations;
/// each Type 1 individual reproduces per the p outcome table, each Type 2
/// per the q table, with offspring read from the one-level skeleton counts
/// of the outcomes. Returns the whole trajectory (length n+1).
pub fn simulate_branching<R: Rng + ?Sized>(
    weights: &StepWeights,
    start: TriangleType,
    n: u32,
    rng: &mut R,
) -> Vec<BranchState> {
    let mut state = match start {
        TriangleType::Type1 => BranchState { s1: 1, s2: 0 },
        TriangleType::Type2 => BranchState { s1: 0, s2: 1 },
    };
    let mut traj = vec![state];
    for _ in 0..n {
        let mut next = BranchState { s1: 0, s2: 0 };
        for _ in 0..state.s1 {
            let (c1, c2) = gamma1_offspring(draw_index(&weights.p, rng) + 1);
            next.s1 += c1 as u64;
            next.s2 += c2 as u64;
        }
        for _ in 0..state.s2 {
            let (c1, c2) = gamma1_offspring(draw_index(&weights.q, rng) + 1);
            next.s1 += c1 as u64;
            next.s2 += c2 as u64;
        }
        state = next;
        traj.push(state);
    }
    traj
}

/// Monte Carlo summary of the Kesten–Stigum limit variable B_i.
#[derive(Debug, Clone)]
pub struct BStats {
    pub mean: f64,
    pub variance: f64,
    pub min: f64,
    pub max: f64,
    pub samples: Vec<f64>,
}

/// Sample λ^{-N}·(S₁+2S₂)/(v₁+2v₂) after N generations; the mean converges
/// to the eigenvector component u_i of the start type.
pub fn estimate_b<R: Rng + ?Sized>(
    weights: &StepWeights,
    spectral: &SpectralData,
    start: TriangleType,
    n: u32,
    reps: u32,
    rng: &mut R,
) -> BStats {
    let scale = spectral.lambda.powi(-(n as i32));
    let denom = spectral.left_vec[0] + 2.0 * spectral.left_vec[1];
    let mut samples = Vec::with_capacity(reps as usize);
    for _ in 0..reps {
        let traj = simulate_branching(weights, start, n, rng);
        let last = traj.last().unwrap();
        samples.push(scale * (last.s1 as f64 + 2.0 * last.s2 as f64) / denom);
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let variance = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>()
        / (samples.len().saturating_sub(1)) as f64;
    let min = samples.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    BStats {
        mean,
        variance,
        min,
        max,
        samples,
    }
}

/// Least-squares slope of y against x.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Fit the lower-tail stretched-exponential exponent: the slope of
/// log(−log P[B ≤ x]) against log(1/x) over small-x empirical quantiles.
/// The expected slope is ν/(1−ν); invariant under rescaling of the samples.
pub fn tail_slope(samples: &[f64]) -> Option<f64> {
    let mut sorted: Vec<f64> = samples.iter().cloned().filter(|s| *s > 0.0).collect();
    if sorted.len() < 1000 {
        return None;
    }
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    // quantile levels between 0.1% and 5%, geometrically spaced
    let mut f = 0.001;
    while f <= 0.05 {
        let k = ((f * n as f64) as usize).max(1).min(n - 1);
        let x = sorted[k];
        let cdf = (k as f64 + 0.5) / (n as f64 + 1.0);
        if x > 0.0 && cdf < 1.0 {
            xs.push((1.0 / x).ln());
            ys.push((-cdf.ln()).ln());
        }
        f *= 1.5;
    }
    if xs.len() < 3 {
        return None;
    }
    Some(ls_slope(&xs, &ys))
}

// ---------------------------------------------------------------------------
// Laplace transforms of the limit variables.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct LaplaceRow {
    pub t: f64,
    pub g1: f64,
    pub g2: f64,
    pub h1: f64,
    pub h2: f64,
}

const LAPLACE_SEED: f64 = 1e-6;

/// −log P(e^{−l1}, e^{−l2}) for a polynomial P with positive coefficients,
/// evaluated stably in the exponent domain (log-sum-exp).
fn eval_log(terms: &[((u32, u32), f64)], l1: f64, l2: f64) -> f64 {
    let exps: Vec<f64> = terms
        .iter()
        .map(|&((i, j), _)| i as f64 * l1 + j as f64 * l2)
        .collect();
    let m = exps.iter().cloned().fold(f64::INFINITY, f64::min);
    let s: f64 = terms
        .iter()
        .zip(&exps)
        .map(|(&(_, c), &e)| c * (m - e).exp())
        .sum();
    m - s.ln()
}

/// (−log g₁(t), −log g₂(t)) by upward iteration of the functional
/// equations in the exponent domain, so that large t never underflows.
fn laplace_log_at(hats: &HatPolynomials, spectral: &SpectralData, t: f64) -> (f64, f64) {
    let mut s = t;
    let mut n = 0u32;
    while s > LAPLACE_SEED {
        s /= spectral.lambda;
        n += 1;
    }
    // first-order seed g_i(s) = 1 − u_i·s; the O(s²) error contracts upward
    let mut l = (
        -(1.0 - spectral.right_vec[0] * s).ln(),
        -(1.0 - spectral.right_vec[1] * s).ln(),
    );
    for _ in 0..n {
        l = (
            eval_log(&hats.phi, l.0, l.1),
            eval_log(&hats.theta, l.0, l.1),
        );
    }
    l
}

/// Evaluate the Laplace transforms g_i(t) = E[exp(−tB_i)] by upward
/// iteration of the functional equations g₁(λs) = Φ̂(g₁(s), g₂(s)),
/// g₂(λs) = Θ̂(g₁(s), g₂(s)), together with h_i(t) = −t^{−ν}·log g_i(t).
pub fn laplace_g(weights: &StepWeights, spectral: &SpectralData, t_grid: &[f64]) -> Vec<LaplaceRow> {
    let hats = hat_polynomials(weights);
    t_grid
        .iter()
        .map(|&t| {
            let (l1, l2) = laplace_log_at(&hats, spectral, t);
            let pow = t.powf(-spectral.nu);
            LaplaceRow {
                t,
                g1: (-l1).exp(),
                g2: (-l2).exp(),
                h1: pow * l1,
                h2: pow * l2,
            }
        })
        .collect()
}

/// |g₁(λt) − Φ̂(g₁(t), g₂(t))| and the Θ̂ analogue: self-consistency
/// residuals of the upward iteration.
pub fn laplace_residuals(
    weights: &StepWeights,
    spectral: &SpectralData,
    t: f64,
) -> (f64, f64) {
    let hats = hat_polynomials(weights);
    let l = laplace_log_at(&hats, spectral, t);
    let ll = laplace_log_at(&hats, spectral, spectral.lambda * t);
    let (f1, f2) = hats.eval((-l.0).exp(), (-l.1).exp());
    (((-ll.0).exp() - f1).abs(), ((-ll.1).exp() - f2).abs())
}

// ---------------------------------------------------------------------------
// Displacement exponent and law-of-the-iterated-logarithm diagnostics.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct MomentFit {
    /// (t, estimated E[|X(t)|^p]) rows.
    pub rows: Vec<(f64, f64)>,
    /// Fitted log-log slope.
    pub slope: f64,
    /// p·ν(u), the predicted slope.
    pub expected: f64,
}

/// Estimate E[|X(t)|^p] on a λ-geometric time grid from level-n samples and
/// fit the growth exponent, which should match p·ν(u).
pub fn displacement_stats<R: Rng + ?Sized>(
    weights: &StepWeights,
    spectral: &SpectralData,
    n: u32,
    reps: u32,
    p_moment: f64,
    rng: &mut R,
) -> Result<MomentFit, PathError> {
    assert!(n >= 4, "need a few levels of structure below the unit scale");
    let js: Vec<u32> = (1..=n - 2).collect();
    let mut sums = vec![0.0f64; js.len()];
    for _ in 0..reps {
        let path = sample_lerw(weights, n, LerwKind::Hat, rng)?;
        for (k, &j) in js.iter().enumerate() {
            let s = spectral.lambda.powi((n - j) as i32);
            let (x, y) = eval_position(&path, s);
            sums[k] += (x * x + y * y).sqrt().powf(p_moment);
        }
    }
    let rows: Vec<(f64, f64)> = js
        .iter()
        .zip(&sums)
        .map(|(&j, &s)| {
            (
                spectral.lambda.powi(-(j as i32)),
                s / reps as f64,
            )
        })
        .collect();
    let xs: Vec<f64> = rows.iter().map(|r| r.0.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.1.ln()).collect();
    Ok(MomentFit {
        rows,
        slope: ls_slope(&xs, &ys),
        expected: p_moment * spectral.nu,
    })
}

/// ψ(t) = t^ν (log log(1/t))^{1−ν}, the iterated-logarithm gauge.
pub fn lil_gauge(nu: f64, t: f64) -> f64 {
    t.powf(nu) * (1.0 / t).ln().ln().powf(1.0 - nu)
}

#[derive(Debug, Clone)]
pub struct LilRow {
    pub t: f64,
    pub psi: f64,
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

/// Diagnostic table of sup_{s≤t}|X(s)|/ψ(t) across the given processes
/// (report only; the theorem's constants are not available).
pub fn lil_diagnostic(
    spectral: &SpectralData,
    procs: &[SampledProcess],
    t_grid: &[f64],
) -> Vec<LilRow> {
    t_grid
        .iter()
        .filter(|&&t| t > 0.0 && (1.0 / t).ln() > 1.0)
        .map(|&t| {
            let psi = lil_gauge(spectral.nu, t);
            let mut ratios: Vec<f64> = procs
                .iter()
                .map(|p| {
                    let steps = (t / p.time_scale).floor() as usize;
                    let mut sup = 0.0f64;
                    for i in 0..=steps.min(p.path.len()) {
                        let (x, y) = p.path.vertices[i].to_cartesian();
                        sup = sup.max((x * x + y * y).sqrt());
                    }
                    let (x, y) = p.at(t);
                    sup = sup.max((x * x + y * y).sqrt());
                    sup / psi
                })
                .collect();
            ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
            LilRow {
                t,
                psi,
                min: ratios.first().copied().unwrap_or(f64::NAN),
                median: ratios[ratios.len() / 2],
                max: ratios.last().copied().unwrap_or(f64::NAN),
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Goodness-of-fit helpers.
// ---------------------------------------------------------------------------

/// One-sample χ² p-value of observed counts against expected probabilities.
/// Zero-probability bins must be empty (p-value 0 otherwise); bins with
/// expected count below 5 are pooled.
pub fn chi_square_p(observed: &[u64], probs: &[f64]) -> f64 {
    assert_eq!(observed.len(), probs.len());
    let total: u64 = observed.iter().sum();
    let mut stat = 0.0;
    let mut bins = 0usize;
    let mut pool_o = 0.0;
    let mut pool_e = 0.0;
    for (&o, &p) in observed.iter().zip(probs) {
        let e = p * total as f64;
        if p <= 1e-12 {
            if o > 0 {
                return 0.0;
            }
            continue;
        }
        if e < 5.0 {
            pool_o += o as f64;
            pool_e += e;
            continue;
        }
        stat += (o as f64 - e).powi(2) / e;
        bins += 1;
    }
    if pool_e > 0.0 {
        stat += (pool_o - pool_e).powi(2) / pool_e;
        bins += 1;
    }
    if bins < 2 {
        return 1.0;
    }
    let dist = ChiSquared::new((bins - 1) as f64).expect("positive dof");
    1.0 - dist.cdf(stat)
}

/// Two-sample χ² p-value for homogeneity of two count vectors over the same
/// categories; sparse categories (combined count below 10) are pooled.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    let k1 = ((nb as f64) / (na as f64)).sqrt();
    let k2 = 1.0 / k1;
    let mut stat = 0.0;
    let mut bins = 0usize;
    let (mut pool_a, mut pool_b) = (0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        if x + y == 0 {
            continue;
        }
        if x + y < 10 {
            pool_a += x as f64;
            pool_b += y as f64;
            continue;
        }
        stat += (k1 * x as f64 - k2 * y as f64).powi(2) / (x + y) as f64;
        bins += 1;
    }
    if pool_a + pool_b > 0.0 {
        stat += (k1 * pool_a - k2 * pool_b).powi(2) / (pool_a + pool_b);
        bins += 1;
    }
    if bins < 2 {
        return 1.0;
    }
    let dist = ChiSquared::new((bins - 1) as f64).expect("positive dof");
    1.0 - dist.cdf(stat)
}
