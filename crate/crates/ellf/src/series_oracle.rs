//! Independent exact verification: truncated power series over exact
//! rationals, dynamic-programming weight series on the level-1 graphs,
//! exhaustive enumeration with loop erasure, and coefficient-wise
//! comparison against the printed closed forms.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::gasket_geometry::{is_region_vertex, neighbors, step_dot2, Region, VertexCoord};
use crate::loop_erasure::{erase_chronological, gamma1_index};
use crate::path_space::{frame_counts, split_at_b, LatticePath, PathClass};
use crate::renormalization::{ell, p_closed, phi, q_closed, sigma, xi};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("truncation {0} exceeds the cap {1} for this operation")]
    CapExceeded(usize, usize),
    #[error("series division by a series that is zero at every trusted degree")]
    DivideByZero,
}

/// Power series in x truncated at a degree, with exact rational
/// coefficients. `trunc == usize::MAX` marks exact polynomials (constants
/// and the like) that are trusted at every degree.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSeries {
    pub c: Vec<BigRational>,
    pub trunc: usize,
}

fn rz() -> BigRational {
    <BigRational as Zero>::zero()
}

impl TruncatedSeries {
    pub fn constant(v: BigRational) -> Self {
        TruncatedSeries {
            c: vec![v],
            trunc: usize::MAX,
        }
    }

    /// The variable x, trusted through degree `l`.
    pub fn x(l: usize) -> Self {
        TruncatedSeries {
            c: vec![rz(), <BigRational as One>::one()],
            trunc: l,
        }
    }

    pub fn coeff(&self, k: usize) -> BigRational {
        self.c.get(k).cloned().unwrap_or_else(rz)
    }

    fn cut(mut self) -> Self {
        if self.trunc != usize::MAX && self.c.len() > self.trunc + 1 {
            self.c.truncate(self.trunc + 1);
        }
        self
    }

    /// Index of the first nonzero coefficient within the trusted range.
    fn valuation(&self) -> Option<usize> {
        self.c.iter().position(|v| !v.is_zero())
    }

    /// Substitute a zero-constant-term series for x (Horner evaluation).
    pub fn compose(&self, inner: &TruncatedSeries) -> TruncatedSeries {
        assert!(
            inner.coeff(0).is_zero(),
            "composition requires a zero constant term"
        );
        let mut acc = TruncatedSeries {
            c: Vec::new(),
            trunc: self.trunc.min(inner.trunc),
        };
        for k in (0..self.c.len()).rev() {
            acc = acc.mul(inner).add(&Self::constant(self.coeff(k)));
            acc.trunc = self.trunc.min(inner.trunc);
            acc = acc.cut();
        }
        acc
    }
}

impl Scalar for TruncatedSeries {
    fn zero() -> Self {
        TruncatedSeries {
            c: Vec::new(),
            trunc: usize::MAX,
        }
    }
    fn one() -> Self {
        Self::constant(<BigRational as One>::one())
    }
    fn from_int(n: i64) -> Self {
        Self::constant(BigRational::from_integer(BigInt::from(n)))
    }

    fn add(&self, o: &Self) -> Self {
        let n = self.c.len().max(o.c.len());
        let c = (0..n).map(|k| self.coeff(k) + o.coeff(k)).collect();
        TruncatedSeries {
            c,
            trunc: self.trunc.min(o.trunc),
        }
        .cut()
    }

    fn sub(&self, o: &Self) -> Self {
        let n = self.c.len().max(o.c.len());
        let c = (0..n).map(|k| self.coeff(k) - o.coeff(k)).collect();
        TruncatedSeries {
            c,
            trunc: self.trunc.min(o.trunc),
        }
        .cut()
    }

    fn mul(&self, o: &Self) -> Self {
        let trunc = self.trunc.min(o.trunc);
        if self.c.is_empty() || o.c.is_empty() {
            return TruncatedSeries { c: Vec::new(), trunc };
        }
        let deg = (self.c.len() + o.c.len() - 2).min(trunc);
        let mut c = vec![rz(); deg + 1];
        for (i, a) in self.c.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in o.c.iter().enumerate() {
                if i + j > deg {
                    break;
                }
                c[i + j] += a * b;
            }
        }
        TruncatedSeries { c, trunc }
    }

    /// Long division; common powers of x are cancelled first, so dividing
    /// by x^k is allowed when the numerator has valuation ≥ k (the result's
    /// trusted degree drops by k).
    fn div(&self, o: &Self) -> Self {
        let v = o.valuation().expect("series division by zero");
        let nv = self.valuation();
        if nv.is_none() {
            // 0 / o = 0 at the reduced trust level
            return TruncatedSeries {
                c: Vec::new(),
                trunc: self.trunc.saturating_sub(v),
            };
        }
        assert!(
            nv.unwrap() >= v,
            "series division would produce negative powers"
        );
        let num: Vec<BigRational> = self.c[v..].to_vec();
        let den: Vec<BigRational> = o.c[v..].to_vec();
        let trunc = self
            .trunc
            .saturating_sub(v)
            .min(o.trunc.saturating_sub(v));
        let deg = if trunc == usize::MAX {
            num.len().saturating_sub(1)
        } else {
            trunc
        };
        let mut c = vec![rz(); deg + 1];
        let d0 = den[0].clone();
        for k in 0..=deg {
            let mut acc = num.get(k).cloned().unwrap_or_else(rz);
            for (i, d) in den.iter().enumerate().skip(1) {
                if i > k {
                    break;
                }
                acc -= d * &c[k - i];
            }
            c[k] = acc / &d0;
        }
        // exactness of an "infinite trust" division can't be guaranteed in
        // general; keep MAX only if the denominator is a monomial
        let trunc = if trunc == usize::MAX && den.len() > 1 {
            panic!("exact division of polynomials is not closed; set a truncation")
        } else {
            trunc
        };
        TruncatedSeries { c, trunc }
    }
}

/// First-mismatch report for two series under exact comparison.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CompareReport {
    pub equal: bool,
    pub first_mismatch: Option<usize>,
    /// Highest degree the comparison covers (min of the trusted degrees).
    pub checked_to: usize,
}

pub fn compare(a: &TruncatedSeries, b: &TruncatedSeries) -> CompareReport {
    let checked_to = a.trunc.min(b.trunc);
    let hi = checked_to.min(a.c.len().max(b.c.len()).saturating_sub(1));
    for k in 0..=hi {
        if a.coeff(k) != b.coeff(k) {
            return CompareReport {
                equal: false,
                first_mismatch: Some(k),
                checked_to,
            };
        }
    }
    CompareReport {
        equal: true,
        first_mismatch: None,
        checked_to,
    }
}

/// Printed closed forms the oracle can expand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClosedForm {
    Phi,
    Xi,
    Ell,
    Sigma,
    /// p_i, 1-based
    P(usize),
    /// q_i, 1-based
    Q(usize),
}

/// Expand a printed closed form as an exact series in x through degree `l`
/// at fixed rational u.
pub fn expand_closed_form(form: ClosedForm, u: &BigRational, l: usize) -> TruncatedSeries {
    // q_i divides by x²; evaluate with two extra trusted degrees so the
    // result is still trusted through l.
    let pad = if matches!(form, ClosedForm::Q(_)) { 2 } else { 0 };
    let x = TruncatedSeries::x(l + pad);
    let uc = TruncatedSeries::constant(u.clone());
    let mut s = match form {
        ClosedForm::Phi => phi(&x, &uc),
        ClosedForm::Xi => xi(&x, &uc),
        ClosedForm::Ell => ell(&x, &uc),
        ClosedForm::Sigma => sigma(&x, &uc),
        ClosedForm::P(i) => p_closed(i, &x, &uc),
        ClosedForm::Q(i) => q_closed(i, &x, &uc),
    };
    s.trunc = s.trunc.min(l);
    s.cut()
}

/// Path families the DP and the enumerator understand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    W1,
    V1,
    /// Single loops at O confined to the right half of F_1 (the Ξ family).
    U1Half,
}

const DP_CAP: usize = 64;
const ENUM_CAP: usize = 14;

/// Level-1 graph of a region as an index set with adjacency lists.
struct Level1Graph {
    verts: Vec<VertexCoord>,
    adj: Vec<Vec<usize>>,
}

fn level1_graph(region: Region) -> Level1Graph {
    let mut verts = Vec::new();
    for a in -4i64..=4 {
        for b in -6i64..=6 {
            let v = VertexCoord::new(a, b, 1);
            if is_region_vertex(&v, 1, region) {
                verts.push(v);
            }
        }
    }
    verts.sort();
    let adj = verts
        .iter()
        .map(|v| {
            neighbors(v, 1, region)
                .unwrap()
                .into_iter()
                .filter_map(|n| verts.iter().position(|w| *w == n))
                .collect()
        })
        .collect();
    Level1Graph { verts, adj }
}

fn idx_of(g: &Level1Graph, v: VertexCoord) -> usize {
    g.verts.iter().position(|w| *w == v).expect("vertex in graph")
}

/// Corner landmarks at level 1.
struct Landmarks {
    o: usize,
    a: usize,
    b: usize,
    /// all G_0 vertices present in the graph
    g0: Vec<usize>,
}

fn landmarks(g: &Level1Graph) -> Landmarks {
    let g0 = g
        .verts
        .iter()
        .enumerate()
        .filter(|(_, v)| v.on_lattice(0))
        .map(|(i, _)| i)
        .collect();
    Landmarks {
        o: idx_of(g, VertexCoord::ORIGIN),
        a: idx_of(g, VertexCoord::CORNER_A),
        b: idx_of(g, VertexCoord::CORNER_B),
        g0,
    }
}

fn step(g: &Level1Graph, from: usize, to: usize) -> (i64, i64) {
    let (fa, fb) = g.verts[from].at_level(1).unwrap();
    let (ta, tb) = g.verts[to].at_level(1).unwrap();
    (ta - fa, tb - fb)
}

/// Family weight series by dynamic programming over (previous, current)
/// automaton states: coefficient of x^ℓ = Σ over length-ℓ family paths of
/// u^{N+M} (u^N for U1Half). No path is ever enumerated explicitly.
pub fn dp_weight_series(
    family: Family,
    l: usize,
    u: &BigRational,
) -> Result<TruncatedSeries, OracleError> {
    if l > DP_CAP {
        return Err(OracleError::CapExceeded(l, DP_CAP));
    }
    match family {
        Family::W1 => Ok(dp_w1(l, u)),
        Family::V1 => Ok(dp_v1(l, u)),
        Family::U1Half => Ok(dp_u1_half(l, u)),
    }
}

fn dp_w1(l: usize, u: &BigRational) -> TruncatedSeries {
    let g = level1_graph(Region::F);
    let lm = landmarks(&g);
    let n = g.verts.len();
    let interior_ok = |i: usize| !lm.g0.contains(&i) || i == lm.o;
    let mut state = vec![vec![rz(); n]; n]; // [prev][cur]
    for &m in &g.adj[lm.o] {
        if interior_ok(m) {
            state[lm.o][m] = <BigRational as One>::one();
        }
    }
    let mut out = vec![rz(); l + 1];
    for len in 1..l {
        let mut next_state = vec![vec![rz(); n]; n];
        for p in 0..n {
            for c in 0..n {
                if state[p][c].is_zero() {
                    continue;
                }
                let w = state[p][c].clone();
                for &nx in &g.adj[c] {
                    let rev = step_dot2(step(&g, p, c), step(&g, c, nx)) < 0
                        && !lm.g0.contains(&c);
                    let mut f = w.clone();
                    if rev {
                        f *= u;
                    }
                    if nx == lm.a {
                        out[len + 1] += f;
                    } else if interior_ok(nx) {
                        if nx == lm.o {
                            f *= u;
                        }
                        next_state[c][nx] += f;
                    }
                }
            }
        }
        state = next_state;
    }
    TruncatedSeries { c: out, trunc: l }
}

fn dp_v1(l: usize, u: &BigRational) -> TruncatedSeries {
    let g = level1_graph(Region::FV);
    let lm = landmarks(&g);
    let n = g.verts.len();
    let ap = idx_of(&g, VertexCoord::new(1, -1, 0));
    let bp = idx_of(&g, VertexCoord::new(0, -1, 0));
    let ab = idx_of(&g, VertexCoord::new(1, 1, 0));
    let b2 = idx_of(&g, VertexCoord::new(0, 2, 0));
    // phase 1 (before the first b): forbidden interiors a, a', b', a+b, 2b
    let p1_ok = |i: usize| i != lm.a && i != ap && i != bp && i != ab && i != b2 && i != lm.b;
    // phase 2 (after b): forbidden O, a', b', a+b, 2b; b allowed, a terminal
    let p2_ok = |i: usize| i != lm.o && i != ap && i != bp && i != ab && i != b2 && i != lm.a;
    // reversal exclusion sets (frame corners of the respective half)
    let p1_frame = [lm.o, lm.a, lm.b, ap, bp];
    let p2_frame = [lm.o, lm.a, lm.b, ab, b2];
    let mut s1 = vec![vec![rz(); n]; n];
    let mut s2 = vec![vec![rz(); n]; n];
    for &m in &g.adj[lm.o] {
        if p1_ok(m) || m == lm.o {
            s1[lm.o][m] = <BigRational as One>::one();
        }
    }
    let mut out = vec![rz(); l + 1];
    for len in 1..l {
        let mut n1 = vec![vec![rz(); n]; n];
        let mut n2 = vec![vec![rz(); n]; n];
        for p in 0..n {
            for c in 0..n {
                // phase 1 transitions
                if !s1[p][c].is_zero() {
                    let w = s1[p][c].clone();
                    for &nx in &g.adj[c] {
                        let rev =
                            step_dot2(step(&g, p, c), step(&g, c, nx)) < 0 && !p1_frame.contains(&c);
                        let mut f = w.clone();
                        if rev {
                            f *= u;
                        }
                        if nx == lm.b {
                            n2[c][nx] += f; // junction: no revisit factor
                        } else if p1_ok(nx) || nx == lm.o {
                            if nx == lm.o {
                                f *= u;
                            }
                            n1[c][nx] += f;
                        }
                    }
                }
                // phase 2 transitions
                if !s2[p][c].is_zero() {
                    let w = s2[p][c].clone();
                    for &nx in &g.adj[c] {
                        let rev =
                            step_dot2(step(&g, p, c), step(&g, c, nx)) < 0 && !p2_frame.contains(&c);
                        let mut f = w.clone();
                        if rev {
                            f *= u;
                        }
                        if nx == lm.a {
                            out[len + 1] += f;
                        } else if p2_ok(nx) || nx == lm.b {
                            if nx == lm.b {
                                f *= u;
                            }
                            n2[c][nx] += f;
                        }
                    }
                }
            }
        }
        s1 = n1;
        s2 = n2;
    }
    TruncatedSeries { c: out, trunc: l }
}

fn dp_u1_half(l: usize, u: &BigRational) -> TruncatedSeries {
    let g = level1_graph(Region::F);
    let lm = landmarks(&g);
    let n = g.verts.len();
    // right-half midpoints only
    let mids: Vec<usize> = [(1, 0), (0, 1), (1, 1)]
        .iter()
        .map(|&(a, b)| idx_of(&g, VertexCoord::new(a, b, 1)))
        .collect();
    let mut state = vec![vec![rz(); n]; n];
    for &m in &g.adj[lm.o] {
        if mids.contains(&m) {
            state[lm.o][m] = <BigRational as One>::one();
        }
    }
    let mut out = vec![rz(); l + 1];
    for len in 1..l {
        let mut next_state = vec![vec![rz(); n]; n];
        for p in 0..n {
            for c in 0..n {
                if state[p][c].is_zero() {
                    continue;
                }
                let w = state[p][c].clone();
                for &nx in &g.adj[c] {
                    // every interior vertex is a midpoint: reversals always count
                    let rev = step_dot2(step(&g, p, c), step(&g, c, nx)) < 0;
                    let mut f = w.clone();
                    if rev {
                        f *= u;
                    }
                    if nx == lm.o {
                        out[len + 1] += f;
                    } else if mids.contains(&nx) {
                        next_state[c][nx] += f;
                    }
                }
            }
        }
        state = next_state;
    }
    TruncatedSeries { c: out, trunc: l }
}

/// Stream every family path with ℓ ≤ max_len exactly once.
pub fn enumerate_paths(
    family: Family,
    max_len: usize,
    mut visit: impl FnMut(&LatticePath),
) -> Result<(), OracleError> {
    if max_len > ENUM_CAP {
        return Err(OracleError::CapExceeded(max_len, ENUM_CAP));
    }
    let region = match family {
        Family::W1 => Region::F,
        Family::V1 | Family::U1Half => Region::FV,
    };
    let g = level1_graph(region);
    let lm = landmarks(&g);
    let class = match family {
        Family::W1 | Family::U1Half => PathClass::W,
        Family::V1 => PathClass::V,
    };

    // DFS state
    let mut path = vec![lm.o];
    struct Dfs<'a, F: FnMut(&LatticePath)> {
        g: &'a Level1Graph,
        lm: &'a Landmarks,
        family: Family,
        max_len: usize,
        class: PathClass,
        visit: F,
    }
    impl<'a, F: FnMut(&LatticePath)> Dfs<'a, F> {
        fn emit(&mut self, path: &[usize]) {
            let verts: Vec<VertexCoord> = path.iter().map(|&i| self.g.verts[i]).collect();
            (self.visit)(&LatticePath::with_class(verts, 1, self.class));
        }
        // hit_b: whether b was hit already (V1 phase)
        fn go(&mut self, path: &mut Vec<usize>, hit_b: bool) {
            if path.len() > self.max_len {
                return;
            }
            let c = *path.last().unwrap();
            for k in 0..self.g.adj[c].len() {
                let nx = self.g.adj[c][k];
                let v = self.g.verts[nx];
                let is_g0 = v.on_lattice(0);
                match self.family {
                    Family::W1 => {
                        if nx == self.lm.a {
                            path.push(nx);
                            self.emit(path);
                            path.pop();
                        } else if !is_g0 || nx == self.lm.o {
                            // stay on F away from the outer corners
                            path.push(nx);
                            self.go(path, hit_b);
                            path.pop();
                        }
                    }
                    Family::V1 => {
                        if !hit_b {
                            if nx == self.lm.b {
                                path.push(nx);
                                self.go(path, true);
                                path.pop();
                            } else if !is_g0 || nx == self.lm.o {
                                path.push(nx);
                                self.go(path, false);
                                path.pop();
                            }
                        } else if nx == self.lm.a {
                            path.push(nx);
                            self.emit(path);
                            path.pop();
                        } else if !is_g0 || nx == self.lm.b {
                            path.push(nx);
                            self.go(path, true);
                            path.pop();
                        }
                    }
                    Family::U1Half => {
                        let (a, b) = v.at_level(1).unwrap();
                        let in_right_mid =
                            matches!((a, b), (1, 0) | (0, 1) | (1, 1));
                        if nx == self.lm.o {
                            path.push(nx);
                            self.emit(path);
                            path.pop();
                        } else if in_right_mid {
                            path.push(nx);
                            self.go(path, hit_b);
                            path.pop();
                        }
                    }
                }
            }
        }
    }
    let mut dfs = Dfs {
        g: &g,
        lm: &lm,
        family,
        max_len,
        class,
        visit: &mut visit,
    };
    dfs.go(&mut path, false);
    Ok(())
}

/// u-independent enumeration tallies:
/// counts[outcome−1][ℓ][N+M] over all W_1 (respectively V_1) paths of
/// length ℓ whose loop erasure is w*_outcome. The V tally's exponent is the
/// sum over both halves.
pub struct OutcomeCounts {
    pub p_max_len: usize,
    pub q_max_len: usize,
    pub p: Vec<Vec<Vec<u64>>>,
    pub q: Vec<Vec<Vec<u64>>>,
}

/// Enumerate both families and tally outcomes. `l` is the target series
/// degree: W_1 paths to ℓ ≤ l+1, V_1 paths to ℓ ≤ l+2.
pub fn outcome_counts(l: usize) -> Result<OutcomeCounts, OracleError> {
    let (wl, vl) = (l + 1, l + 2);
    if vl > ENUM_CAP {
        return Err(OracleError::CapExceeded(vl, ENUM_CAP));
    }
    let emax = 2 * vl + 1;
    let mut out = OutcomeCounts {
        p_max_len: wl,
        q_max_len: vl,
        p: vec![vec![vec![0u64; emax]; wl + 1]; 10],
        q: vec![vec![vec![0u64; emax]; vl + 1]; 10],
    };
    let g0f: Vec<VertexCoord> = crate::path_space::g0_f().to_vec();
    let part2_frame = vec![
        VertexCoord::ORIGIN,
        VertexCoord::CORNER_A,
        VertexCoord::CORNER_B,
        VertexCoord::new(1, 1, 0),
        VertexCoord::new(0, 2, 0),
    ];
    enumerate_paths(Family::W1, wl, |w| {
        let (n, m) = frame_counts(&w.vertices, &g0f, &VertexCoord::ORIGIN);
        let i = gamma1_index(&erase_chronological(w).unwrap()).unwrap();
        out.p[i - 1][w.len()][(n + m) as usize] += 1;
    })?;
    enumerate_paths(Family::V1, vl, |w| {
        let (split, _) = split_at_b(&w.vertices).expect("V path hits b");
        let (n1, m1) = frame_counts(&w.vertices[..=split], &g0f, &VertexCoord::ORIGIN);
        let (n2, m2) = frame_counts(&w.vertices[split..], &part2_frame, &VertexCoord::CORNER_B);
        let i = gamma1_index(&erase_chronological(w).unwrap()).unwrap();
        out.q[i - 1][w.len()][(n1 + m1 + n2 + m2) as usize] += 1;
    })?;
    Ok(out)
}

impl OutcomeCounts {
    /// p̂_i = Σ u^{N+M}x^{ℓ−1}, q̂_i = Σ u^{N₁+M₁+N₂+M₂}x^{ℓ−2}, as series
    /// trusted through degree min(p_max_len−1, q_max_len−2).
    pub fn series(&self, u: &BigRational) -> ([TruncatedSeries; 10], [TruncatedSeries; 10]) {
        let l = (self.p_max_len - 1).min(self.q_max_len - 2);
        let emax = self.p[0][0].len().max(self.q[0][0].len());
        let mut upow = vec![<BigRational as One>::one()];
        for _ in 1..emax {
            upow.push(upow.last().unwrap() * u);
        }
        let build = |table: &Vec<Vec<Vec<u64>>>, shift: usize| -> [TruncatedSeries; 10] {
            std::array::from_fn(|i| {
                let mut c = vec![rz(); l + 1];
                for (len, row) in table[i].iter().enumerate() {
                    if len < shift || len - shift > l {
                        continue;
                    }
                    for (e, &cnt) in row.iter().enumerate() {
                        if cnt > 0 {
                            c[len - shift] +=
                                BigRational::from_integer(BigInt::from(cnt)) * &upow[e];
                        }
                    }
                }
                TruncatedSeries { c, trunc: l }
            })
        };
        (build(&self.p, 1), build(&self.q, 2))
    }
}

/// Loop-erasure outcome series p̂_i, q̂_i through degree `l` at fixed u.
pub fn lerw_outcome_series(
    l: usize,
    u: &BigRational,
) -> Result<([TruncatedSeries; 10], [TruncatedSeries; 10]), OracleError> {
    Ok(outcome_counts(l)?.series(u))
}
