//! Finite-dimensional degree estimation for the fixed-point maps of the two
//! homotopy families, the exact discrete no-solution identity at the free
//! end of the plain homotopy, and boundary-margin sweeps.
//!
//! A degree estimate is multistart Newton plus signed Jacobian determinants
//! over the distinct regular zeros found. It corroborates the degree
//! identities, it does not prove them: a missed zero corrupts the value, so
//! every estimate carries its search statistics.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{Field, NeumannOperator};
use crate::model::{anchored_homotopy_rhs, homotopy_rhs, F2Exponents};
use crate::nodal::NodalContext;

/// Regularity floor for |det J| at a zero; below it the zero is flagged
/// irregular and excluded from the signed count.
pub const REGULARITY_FLOOR: f64 = 1e-8;

/// A continuous map on a flat vector space whose zeros are sought.
pub trait DegreeMap {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> Vec<f64>;
}

/// Map defined by a closure; used for synthetic sanity checks.
pub struct FnMap<F: Fn(&[f64]) -> Vec<f64>> {
    pub d: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> Vec<f64>> DegreeMap for FnMap<F> {
    fn dim(&self) -> usize {
        self.d
    }
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        (self.f)(x)
    }
}

/// Axis-aligned box in the flat space.
#[derive(Debug, Clone, serde::Serialize)]
pub struct FlatBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl FlatBox {
    pub fn symmetric(radius: f64, dim: usize) -> FlatBox {
        FlatBox {
            lower: vec![-radius; dim],
            upper: vec![radius; dim],
        }
    }

    pub fn contains(&self, x: &[f64], slack: f64) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(&v, (&lo, &hi))| v >= lo - slack && v <= hi + slack)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&a, &b)| 0.5 * (a + b))
            .collect()
    }

    fn dim(&self) -> usize {
        self.lower.len()
    }
}

/// Search domain: an outer box, optionally minus a closed inner box.
#[derive(Debug, Clone, serde::Serialize)]
pub struct Domain {
    pub outer: FlatBox,
    pub hole: Option<FlatBox>,
}

impl Domain {
    pub fn boxed(outer: FlatBox) -> Domain {
        Domain { outer, hole: None }
    }

    pub fn with_hole(outer: FlatBox, hole: FlatBox) -> Domain {
        Domain {
            outer,
            hole: Some(hole),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.outer.contains(x, 0.0)
            && self
                .hole
                .as_ref()
                .map_or(true, |h| !h.contains(x, 0.0))
    }

    fn dim(&self) -> usize {
        self.outer.dim()
    }
}

/// Face centers plus seeded random face points of a box (corners are
/// deliberately not sampled).
fn box_boundary_samples(b: &FlatBox, rng: &mut ChaCha8Rng, per_face: usize) -> Vec<Vec<f64>> {
    let d = b.dim();
    let mut samples = Vec::new();
    for axis in 0..d {
        for &side in &[0usize, 1] {
            let pin = if side == 0 { b.lower[axis] } else { b.upper[axis] };
            let mut center = b.center();
            center[axis] = pin;
            samples.push(center);
            for _ in 0..per_face {
                let mut p: Vec<f64> = (0..d)
                    .map(|j| rng.gen_range(b.lower[j]..=b.upper[j]))
                    .collect();
                p[axis] = pin;
                samples.push(p);
            }
        }
    }
    samples
}

/// Boundary samples of the domain: outer box faces plus the hole faces.
pub fn boundary_samples(domain: &Domain, rng_seed: u64, per_face: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut samples = box_boundary_samples(&domain.outer, &mut rng, per_face);
    if let Some(h) = &domain.hole {
        samples.extend(box_boundary_samples(h, &mut rng, per_face));
    }
    samples
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// The fixed-point residual map `(u, v) - A^{-1} F(u, v)` of one homotopy
/// member; zeros coincide with solutions of the corresponding problem.
pub struct CompactMap<'a> {
    pub kind: HomotopyKind,
    pub t: f64,
    pub lambda1: f64,
    pub exponents: F2Exponents,
    ctx: &'a NodalContext,
    a_lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HomotopyKind {
    /// Free end `(u+ + 1, v+ + 1)`; no solutions at `t = 0`.
    Plain,
    /// Eigenfunction-anchored end; `(phi1, phi1)` solves `t = 0`.
    Anchored,
}

impl<'a> CompactMap<'a> {
    pub fn new(
        ctx: &'a NodalContext,
        kind: HomotopyKind,
        t: f64,
        lambda1: f64,
        exponents: F2Exponents,
    ) -> CompactMap<'a> {
        let a_lu = ctx.op.matrix().to_dense().lu();
        CompactMap {
            kind,
            t,
            lambda1,
            exponents,
            ctx,
            a_lu,
        }
    }

    pub fn op(&self) -> &NeumannOperator {
        &self.ctx.op
    }

    /// Evaluate on a pair of fields.
    pub fn eval_fields(&self, u: &Field, v: &Field) -> (Field, Field) {
        let (f1, f2) = match self.kind {
            HomotopyKind::Plain => homotopy_rhs(
                &self.ctx.params,
                &self.ctx.env,
                self.t,
                u,
                v,
                self.exponents,
            ),
            HomotopyKind::Anchored => anchored_homotopy_rhs(
                &self.ctx.params,
                &self.ctx.env,
                self.lambda1,
                self.t,
                u,
                v,
                self.exponents,
            ),
        };
        let s1 = self
            .a_lu
            .solve(&DVector::from_column_slice(f1.values()))
            .expect("operator is SPD");
        let s2 = self
            .a_lu
            .solve(&DVector::from_column_slice(f2.values()))
            .expect("operator is SPD");
        let ru = Field::from_values(u.grid(), u.values().iter().zip(s1.iter()).map(|(a, b)| a - b).collect()).expect("finite");
        let rv = Field::from_values(v.grid(), v.values().iter().zip(s2.iter()).map(|(a, b)| a - b).collect()).expect("finite");
        (ru, rv)
    }
}

impl<'a> DegreeMap for CompactMap<'a> {
    fn dim(&self) -> usize {
        2 * self.ctx.op.n()
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let n = self.ctx.op.n();
        let g = self.ctx.op.grid();
        let u = Field::from_values(g, x[..n].to_vec()).expect("finite");
        let v = Field::from_values(g, x[n..].to_vec()).expect("finite");
        let (ru, rv) = self.eval_fields(&u, &v);
        let mut out = ru.values().to_vec();
        out.extend_from_slice(rv.values());
        out
    }
}

/// Witness of the exact no-solution identity at the free end: summing
/// `A u = u+ + 1` against the all-ones vector (column sums of `A` are
/// exactly 1) forces `-sum(u-) = #nodes > 0`, which is impossible.
#[derive(Debug, Clone, serde::Serialize)]
pub struct NoSolutionWitness {
    pub holds: bool,
    pub node_count: usize,
    /// The contradiction magnitude: the node count itself.
    pub imbalance: f64,
    /// Numerical check that the column sums are 1 to machine precision.
    pub column_sum_deviation: f64,
}

pub fn check_no_solution_t0(op: &NeumannOperator) -> NoSolutionWitness {
    let n = op.n();
    let m = op.matrix();
    let mut colsum = vec![0.0; n];
    for i in 0..n {
        for k in m.row_ptr[i]..m.row_ptr[i + 1] {
            colsum[m.col_idx[k]] += m.vals[k];
        }
    }
    let dev = colsum
        .iter()
        .fold(0.0f64, |acc, &s| acc.max((s - 1.0).abs()));
    NoSolutionWitness {
        holds: dev <= 1e-12,
        node_count: n,
        imbalance: n as f64,
        column_sum_deviation: dev,
    }
}

/// Central finite-difference Jacobian with relative step `1e-6`.
fn fd_jacobian(map: &dyn DegreeMap, x: &[f64]) -> DMatrix<f64> {
    let d = map.dim();
    let mut jac = DMatrix::zeros(d, d);
    let mut xp = x.to_vec();
    for j in 0..d {
        let h = 1e-6 * x[j].abs().max(1.0);
        xp[j] = x[j] + h;
        let fp = map.eval(&xp);
        xp[j] = x[j] - h;
        let fm = map.eval(&xp);
        xp[j] = x[j];
        for i in 0..d {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    jac
}

fn newton_root(
    map: &dyn DegreeMap,
    start: &[f64],
    tol: f64,
    max_iter: usize,
) -> Option<Vec<f64>> {
    let d = map.dim();
    let mut x = start.to_vec();
    let mut f = map.eval(&x);
    let mut res = sup(&f);
    for _ in 0..max_iter {
        if res <= tol {
            return Some(x);
        }
        let jac = fd_jacobian(map, &x);
        let neg_f = DVector::from_iterator(d, f.iter().map(|v| -v));
        let mut step = jac.clone().lu().solve(&neg_f);
        let mut shift = 1e-10;
        while step.is_none() && shift <= 1e-2 {
            let mut shifted = jac.clone();
            for i in 0..d {
                shifted[(i, i)] += shift;
            }
            step = shifted.lu().solve(&neg_f);
            shift *= 100.0;
        }
        let step = step?;
        if !step.iter().all(|v| v.is_finite()) {
            return None;
        }
        let mut lambda = 1.0f64;
        let mut accepted = false;
        while lambda >= 1.0 / 4096.0 {
            let xt: Vec<f64> = x
                .iter()
                .zip(step.iter())
                .map(|(a, b)| a + lambda * b)
                .collect();
            let ft = map.eval(&xt);
            let rt = sup(&ft);
            if rt < res {
                x = xt;
                f = ft;
                res = rt;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return if res <= tol { Some(x) } else { None };
        }
    }
    if res <= tol {
        Some(x)
    } else {
        None
    }
}

/// Multistart degree estimate over the domain.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DegreeEstimate {
    pub value: i64,
    /// Distinct regular zeros, sorted lexicographically.
    pub zeros: Vec<Vec<f64>>,
    pub signs: Vec<i8>,
    pub irregular_zeros: usize,
    pub n_starts: usize,
    pub n_converged: usize,
    pub n_distinct: usize,
    pub confidence: String,
}

/// Estimate the degree of `map` on `domain`: multistart damped Newton from
/// seeded uniform starts, dedup of converged zeros, then the sum of the
/// signs of the finite-difference Jacobian determinants over the regular
/// ones. Fails with an admissibility error if a boundary sample is a
/// near-zero of the map.
pub fn estimate_degree(
    map: &dyn DegreeMap,
    domain: &Domain,
    n_starts: usize,
    rng_seed: u64,
    tol: f64,
) -> Result<DegreeEstimate> {
    let d = map.dim();
    assert_eq!(d, domain.dim(), "map and domain dimensions differ");

    // Admissibility: no zeros on the sampled boundary.
    let mut margin = f64::INFINITY;
    for s in boundary_samples(domain, rng_seed ^ 0x5eed, 2) {
        margin = margin.min(sup(&map.eval(&s)));
    }
    if margin < tol {
        return Err(Error::Inadmissible { margin });
    }

    // Starts: seeded uniform samples of the domain (hole rejected).
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut starts = Vec::with_capacity(n_starts);
    let mut guard = 0;
    while starts.len() < n_starts && guard < 100 * n_starts {
        guard += 1;
        let p: Vec<f64> = (0..d)
            .map(|j| rng.gen_range(domain.outer.lower[j]..=domain.outer.upper[j]))
            .collect();
        if domain.contains(&p) {
            starts.push(p);
        }
    }

    let mut converged: Vec<Vec<f64>> = Vec::new();
    for s in &starts {
        if let Some(z) = newton_root(map, s, tol, 120) {
            if domain.contains(&z) {
                converged.push(z);
            }
        }
    }
    let n_converged = converged.len();

    // Dedup by sup distance, then sort for a deterministic report.
    let mut distinct: Vec<Vec<f64>> = Vec::new();
    for z in converged {
        let is_new = distinct.iter().all(|w| {
            z.iter()
                .zip(w)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
                > 100.0 * tol
        });
        if is_new {
            distinct.push(z);
        }
    }
    distinct.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .find_map(|(x, y)| x.partial_cmp(y).filter(|o| o.is_ne()))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let n_distinct = distinct.len();

    let mut zeros = Vec::new();
    let mut signs = Vec::new();
    let mut irregular = 0usize;
    let mut value: i64 = 0;
    for z in distinct {
        let det = fd_jacobian(map, &z).lu().determinant();
        if det.abs() <= REGULARITY_FLOOR {
            irregular += 1;
            continue;
        }
        let sign = if det > 0.0 { 1i8 } else { -1i8 };
        value += sign as i64;
        signs.push(sign);
        zeros.push(z);
    }

    let confidence = format!(
        "estimate (not a proof): starts={}, converged={}, distinct={}, irregular_excluded={}",
        starts.len(),
        n_converged,
        n_distinct,
        irregular
    );
    Ok(DegreeEstimate {
        value,
        zeros,
        signs,
        irregular_zeros: irregular,
        n_starts: starts.len(),
        n_converged,
        n_distinct,
        confidence,
    })
}

/// Boundary-margin trace of a one-parameter family of maps.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SweepTrace {
    pub t_values: Vec<f64>,
    pub margins: Vec<f64>,
    pub min_margin: f64,
}

/// For each `t`, sample `min |map_t|` over the domain boundary. A positive
/// trace makes homotopy invariance plausible at the sampled resolution;
/// a zero margin is reported, never thrown.
pub fn homotopy_sweep<M: DegreeMap>(
    family: impl Fn(f64) -> M,
    t_grid: &[f64],
    domain: &Domain,
    rng_seed: u64,
) -> SweepTrace {
    let mut margins = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let map = family(t);
        let mut margin = f64::INFINITY;
        for s in boundary_samples(domain, rng_seed ^ 0x5eed, 2) {
            margin = margin.min(sup(&map.eval(&s)));
        }
        margins.push(margin);
    }
    let min_margin = margins.iter().copied().fold(f64::INFINITY, f64::min);
    SweepTrace {
        t_values: t_grid.to_vec(),
        margins,
        min_margin,
    }
}
