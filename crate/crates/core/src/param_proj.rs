//! Parametric projection controllers `u*(x) = proj_{Γ(x)}(Kx)`, where the
//! feasible set `Γ(x) = {u : g(x, u) ≤ 0}` depends on the state.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{dim_mismatch, Error, Result};
use crate::matlin::{self, Matrix};

/// Margin used to decide `g(x, û) ≪ 0`.
pub const STRICT_MARGIN: f64 = 1e-12;
/// Default KKT tolerance for polyhedral projections.
pub const PROJ_TOL: f64 = 1e-9;
/// Default sweep cap for polyhedral projections.
pub const PROJ_MAX_ITER: usize = 10_000;
/// Dual multipliers above this count as active.
pub const ACTIVE_MULTIPLIER: f64 = 1e-8;

pub type VectorMap = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type ScalarMap = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type MatrixMap = Arc<dyn Fn(&[f64]) -> Matrix + Send + Sync>;

/// State-dependent feasible input set.
#[derive(Clone)]
pub enum ConstraintFamily {
    /// `−v(x) ≤ u ≤ v(x)`.
    StateBox { v: VectorMap },
    /// `a(x)ᵀu ≤ b(x)` together with `−ū·1 ≤ u ≤ ū·1`.
    HalfspacePlusBox {
        a: VectorMap,
        b: ScalarMap,
        u_bar: f64,
    },
    /// `A(x)·u ≤ b(x)`.
    AffineInequalities {
        a_ineq: MatrixMap,
        b_ineq: VectorMap,
    },
}

impl fmt::Debug for ConstraintFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintFamily::StateBox { .. } => f.write_str("StateBox"),
            ConstraintFamily::HalfspacePlusBox { u_bar, .. } => {
                write!(f, "HalfspacePlusBox {{ u_bar: {u_bar} }}")
            }
            ConstraintFamily::AffineInequalities { .. } => f.write_str("AffineInequalities"),
        }
    }
}

impl ConstraintFamily {
    pub fn state_box(v: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        ConstraintFamily::StateBox { v: Arc::new(v) }
    }

    pub fn halfspace_plus_box(
        a: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        b: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        u_bar: f64,
    ) -> Self {
        ConstraintFamily::HalfspacePlusBox {
            a: Arc::new(a),
            b: Arc::new(b),
            u_bar,
        }
    }

    pub fn affine(
        a_ineq: impl Fn(&[f64]) -> Matrix + Send + Sync + 'static,
        b_ineq: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        ConstraintFamily::AffineInequalities {
            a_ineq: Arc::new(a_ineq),
            b_ineq: Arc::new(b_ineq),
        }
    }

    /// `Γ(x)` written as `{u : G u ≤ h}`.
    pub fn polyhedron(&self, x: &[f64], m: usize) -> Result<(Matrix, Vec<f64>)> {
        match self {
            ConstraintFamily::StateBox { v } => {
                let v = v(x);
                if v.len() != m {
                    return Err(dim_mismatch("StateBox bound", m, v.len()));
                }
                Ok(box_rows(&v.iter().map(|b| -b).collect::<Vec<_>>(), &v))
            }
            ConstraintFamily::HalfspacePlusBox { a, b, u_bar } => {
                let a = a(x);
                if a.len() != m {
                    return Err(dim_mismatch("halfspace normal", m, a.len()));
                }
                let (bx, hb) = box_rows(&vec![-*u_bar; m], &vec![*u_bar; m]);
                let mut g = Matrix::zeros(2 * m + 1, m);
                for j in 0..m {
                    g[(0, j)] = a[j];
                }
                g.set_block(1, 0, &bx);
                let mut h = Vec::with_capacity(2 * m + 1);
                h.push(b(x));
                h.extend(hb);
                Ok((g, h))
            }
            ConstraintFamily::AffineInequalities { a_ineq, b_ineq } => {
                let g = a_ineq(x);
                let h = b_ineq(x);
                if g.ncols() != m || g.nrows() != h.len() {
                    return Err(dim_mismatch(
                        "affine constraints",
                        format!("p x {m} with p bounds"),
                        format!("{}x{} with {} bounds", g.nrows(), g.ncols(), h.len()),
                    ));
                }
                Ok((g, h))
            }
        }
    }

    /// `g(x, u)` evaluated componentwise.
    pub fn constraint_values(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        let (g, h) = self.polyhedron(x, u.len())?;
        Ok(g.mul_vec(u)
            .iter()
            .zip(&h)
            .map(|(gu, hi)| gu - hi)
            .collect())
    }
}

/// Clamp of `z` to `[lo, hi]`.
pub fn proj_box(z: &[f64], lo: &[f64], hi: &[f64]) -> Result<Vec<f64>> {
    if z.len() != lo.len() || z.len() != hi.len() {
        return Err(dim_mismatch("proj_box", z.len(), lo.len().min(hi.len())));
    }
    if let Some(i) = (0..z.len()).find(|&i| lo[i] > hi[i]) {
        return Err(Error::Infeasible(format!(
            "box bound lo[{i}] = {} exceeds hi[{i}] = {}",
            lo[i], hi[i]
        )));
    }
    Ok(z.iter()
        .zip(lo.iter().zip(hi))
        .map(|(&v, (&l, &h))| v.max(l).min(h))
        .collect())
}

/// Projection onto `{u : aᵀu ≤ b}`.
pub fn proj_halfspace(z: &[f64], a: &[f64], b: f64) -> Result<Vec<f64>> {
    if z.len() != a.len() {
        return Err(dim_mismatch("proj_halfspace", z.len(), a.len()));
    }
    let aa = matlin::dot(a, a);
    if aa == 0.0 {
        return if b >= 0.0 {
            Ok(z.to_vec())
        } else {
            Err(Error::Infeasible(format!("0ᵀu ≤ {b} has no solution")))
        };
    }
    let viol = matlin::dot(a, z) - b;
    if viol <= 0.0 {
        return Ok(z.to_vec());
    }
    Ok(matlin::axpy(z, -viol / aa, a))
}

/// Projection onto `{u : aᵀu ≤ b, lo ≤ u ≤ hi}`, exact up to rounding.
///
/// The minimizer is `u(ν) = clamp(z − νa)` for the smallest `ν ≥ 0` with
/// `aᵀu(ν) ≤ b`. `ν ↦ aᵀu(ν)` is nonincreasing and piecewise linear, so `ν`
/// is located between consecutive clamp breakpoints and interpolated.
/// Multipliers and active rows follow the layout of
/// [`ConstraintFamily::polyhedron`]: row 0 is the halfspace, rows `1 + 2j`
/// and `2 + 2j` are `u_j ≤ hi_j` and `−u_j ≤ −lo_j`.
pub fn proj_box_halfspace(
    z: &[f64],
    a: &[f64],
    b: f64,
    lo: &[f64],
    hi: &[f64],
) -> Result<ProjResult> {
    let m = z.len();
    if a.len() != m {
        return Err(dim_mismatch("proj_box_halfspace normal", m, a.len()));
    }
    if z.iter().chain(a).any(|v| !v.is_finite()) || !b.is_finite() {
        return Err(Error::NonFinite("projection data"));
    }
    let clamp_at = |nu: f64| -> Result<Vec<f64>> { proj_box(&matlin::axpy(z, -nu, a), lo, hi) };
    let phi = |u: &[f64]| matlin::dot(a, u);

    let mut nu = 0.0;
    let mut u = clamp_at(0.0)?;
    if phi(&u) > b {
        let mut breaks: Vec<f64> = (0..m)
            .filter(|&j| a[j] != 0.0)
            .flat_map(|j| [(z[j] - hi[j]) / a[j], (z[j] - lo[j]) / a[j]])
            .filter(|t| *t > 0.0)
            .collect();
        breaks.sort_by(f64::total_cmp);
        breaks.push(f64::INFINITY);
        let mut left = 0.0;
        let mut found = false;
        for &right in &breaks {
            // inside (left, right) the free coordinates are fixed
            let probe = if right.is_finite() {
                0.5 * (left + right)
            } else {
                left + 1.0
            };
            let up = matlin::axpy(z, -probe, a);
            let slope: f64 = (0..m)
                .filter(|&j| up[j] > lo[j] && up[j] < hi[j])
                .map(|j| a[j] * a[j])
                .sum();
            let f_left = phi(&clamp_at(left)?);
            if slope > 0.0 {
                let cand = left + (f_left - b) / slope;
                if cand <= right {
                    nu = cand.max(left);
                    found = true;
                    break;
                }
            }
            left = right;
        }
        if !found {
            return Err(Error::Infeasible("halfspace misses the box".into()));
        }
        u = clamp_at(nu)?;
    }

    let (g, h) = {
        let mut g = Matrix::zeros(2 * m + 1, m);
        let mut h = Vec::with_capacity(2 * m + 1);
        h.push(b);
        for j in 0..m {
            g[(0, j)] = a[j];
            g[(1 + 2 * j, j)] = 1.0;
            g[(2 + 2 * j, j)] = -1.0;
            h.push(hi[j]);
            h.push(-lo[j]);
        }
        (g, h)
    };
    let mut mu = vec![0.0; 2 * m + 1];
    mu[0] = nu;
    for j in 0..m {
        let w = z[j] - nu * a[j];
        if w > hi[j] {
            mu[1 + 2 * j] = w - hi[j];
        } else if w < lo[j] {
            mu[2 + 2 * j] = lo[j] - w;
        }
    }
    let active = (0..mu.len())
        .filter(|&i| mu[i] > ACTIVE_MULTIPLIER)
        .collect();
    Ok(ProjResult {
        kkt_residual: kkt_residual(z, &g, &h, &u, &mu),
        u,
        active_constraints: active,
        iterations: 0,
    })
}

/// Projection together with its optimality certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjResult {
    pub u: Vec<f64>,
    pub kkt_residual: f64,
    pub active_constraints: Vec<usize>,
    pub iterations: usize,
}

/// KKT residual of `(u, μ)` for `min ½‖u − z‖²` s.t. `G u ≤ h`: the largest
/// of stationarity, primal infeasibility, dual infeasibility and
/// complementary slackness.
pub fn kkt_residual(z: &[f64], g: &Matrix, h: &[f64], u: &[f64], mu: &[f64]) -> f64 {
    let gtmu: Vec<f64> = (0..g.ncols())
        .map(|j| (0..g.nrows()).map(|i| g[(i, j)] * mu[i]).sum())
        .collect();
    let stat = (0..u.len())
        .map(|j| (u[j] - z[j] + gtmu[j]).powi(2))
        .sum::<f64>()
        .sqrt();
    let slack = matlin::sub(&g.mul_vec(u), h);
    let primal = slack.iter().fold(0.0_f64, |m, &s| m.max(s));
    let dual = mu.iter().fold(0.0_f64, |m, &v| m.max(-v));
    let comp = slack
        .iter()
        .zip(mu)
        .fold(0.0_f64, |m, (s, l)| m.max((s * l).abs()));
    stat.max(primal).max(dual).max(comp)
}

/// Exact solve of the projection with the rows carrying positive
/// multipliers held active. `None` when those rows are linearly dependent.
fn polish_active_set(
    z: &[f64],
    g: &Matrix,
    h: &[f64],
    mu: &[f64],
) -> Option<(Vec<f64>, Vec<f64>, f64)> {
    let act: Vec<usize> = (0..mu.len()).filter(|&i| mu[i] > 0.0).collect();
    if act.is_empty() || act.len() > z.len() {
        return None;
    }
    // G_A G_Aᵀ μ_A = G_A z − h_A
    let gram = Matrix::from_fn(act.len(), act.len(), |a, b| {
        matlin::dot(g.row(act[a]), g.row(act[b]))
    });
    let rhs: Vec<f64> = act
        .iter()
        .map(|&i| matlin::dot(g.row(i), z) - h[i])
        .collect();
    let mu_a = matlin::solve_linear(&gram, &rhs).ok()?;
    let mut full = vec![0.0; mu.len()];
    let mut u = z.to_vec();
    for (&i, &v) in act.iter().zip(&mu_a) {
        full[i] = v;
        for (uj, gij) in u.iter_mut().zip(g.row(i)) {
            *uj -= v * gij;
        }
    }
    let res = kkt_residual(z, g, h, &u, &full);
    res.is_finite().then_some((u, full, res))
}

/// Euclidean projection onto `{u : G u ≤ h}` by Hildreth's coordinate
/// ascent on the dual: `u = z − Gᵀμ`, one multiplier updated at a time.
pub fn proj_polyhedron(
    z: &[f64],
    g: &Matrix,
    h: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<ProjResult> {
    let m = z.len();
    if g.ncols() != m || g.nrows() != h.len() {
        return Err(dim_mismatch(
            "proj_polyhedron",
            format!("p x {m} with p bounds"),
            format!("{}x{} with {} bounds", g.nrows(), g.ncols(), h.len()),
        ));
    }
    if z.iter().chain(h).any(|v| !v.is_finite()) || !g.is_finite() {
        return Err(Error::NonFinite("projection data"));
    }

    // zero rows: 0 ≤ h_i either always holds (dropped) or never does
    let mut rows = Vec::with_capacity(g.nrows());
    for (i, &hi) in h.iter().enumerate() {
        let nn = matlin::dot(g.row(i), g.row(i));
        if nn == 0.0 {
            if hi < 0.0 {
                return Err(Error::Infeasible(format!(
                    "constraint row {i} reads 0 ≤ {hi}"
                )));
            }
            continue;
        }
        rows.push((i, nn));
    }

    let mut mu = vec![0.0; g.nrows()];
    let mut u = z.to_vec();
    if rows.iter().all(|&(i, _)| matlin::dot(g.row(i), z) <= h[i]) {
        return Ok(ProjResult {
            u,
            kkt_residual: 0.0,
            active_constraints: vec![],
            iterations: 0,
        });
    }

    let mu_cap = 1e12 * (1.0 + matlin::norm2(z) + h.iter().fold(0.0_f64, |a, b| a.max(b.abs())));
    let mut residual = f64::INFINITY;
    for sweep in 1..=max_iter {
        for &(i, nn) in &rows {
            let gi = g.row(i);
            let r = (matlin::dot(gi, &u) - h[i]) / nn;
            let new = (mu[i] + r).max(0.0);
            let d = new - mu[i];
            if d != 0.0 {
                for j in 0..m {
                    u[j] -= d * gi[j];
                }
                mu[i] = new;
            }
        }
        residual = kkt_residual(z, g, h, &u, &mu);
        if residual <= tol {
            if let Some((pu, pmu, pres)) = polish_active_set(z, g, h, &mu) {
                if pres <= residual {
                    (u, mu, residual) = (pu, pmu, pres);
                }
            }
            let active = (0..mu.len())
                .filter(|&i| mu[i] > ACTIVE_MULTIPLIER)
                .collect();
            return Ok(ProjResult {
                u,
                kkt_residual: residual,
                active_constraints: active,
                iterations: sweep,
            });
        }
        if mu.iter().any(|&v| v > mu_cap) {
            return Err(Error::Infeasible(
                "dual multipliers diverge; the polyhedron is empty".into(),
            ));
        }
    }
    Err(Error::MaxIterations {
        iterations: max_iter,
        residual,
    })
}

/// Linear nominal gain composed with a state-dependent projection.
#[derive(Clone, Debug)]
pub struct ProjectionController {
    pub k: Matrix,
    pub family: ConstraintFamily,
    pub tol: f64,
    pub max_iter: usize,
}

impl ProjectionController {
    pub fn new(k: Matrix, family: ConstraintFamily) -> Self {
        Self {
            k,
            family,
            tol: PROJ_TOL,
            max_iter: PROJ_MAX_ITER,
        }
    }

    /// Input dimension `m`.
    pub fn m(&self) -> usize {
        self.k.nrows()
    }

    /// State dimension `n`.
    pub fn n(&self) -> usize {
        self.k.ncols()
    }

    /// `proj_{Γ(x)}(z)` for an arbitrary point `z`.
    pub fn project(&self, x: &[f64], z: &[f64]) -> Result<ProjResult> {
        match &self.family {
            ConstraintFamily::StateBox { v } => {
                let hi = v(x);
                let lo: Vec<f64> = hi.iter().map(|b| -b).collect();
                let u = proj_box(z, &lo, &hi)?;
                let active = (0..u.len()).filter(|&i| u[i] != z[i]).collect();
                Ok(ProjResult {
                    u,
                    kkt_residual: 0.0,
                    active_constraints: active,
                    iterations: 0,
                })
            }
            ConstraintFamily::HalfspacePlusBox { a, b, u_bar } => {
                let a = a(x);
                let hi = vec![*u_bar; z.len()];
                let lo = vec![-*u_bar; z.len()];
                proj_box_halfspace(z, &a, b(x), &lo, &hi)
            }
            ConstraintFamily::AffineInequalities { .. } => {
                let (g, h) = self.family.polyhedron(x, z.len())?;
                proj_polyhedron(z, &g, &h, self.tol, self.max_iter)
            }
        }
    }
}

/// `u*(x) = proj_{Γ(x)}(Kx)`; refuses states outside the strict-feasibility
/// region.
pub fn eval_controller(ctrl: &ProjectionController, x: &[f64]) -> Result<ProjResult> {
    if x.len() != ctrl.n() {
        return Err(dim_mismatch("eval_controller state", ctrl.n(), x.len()));
    }
    if !strictly_feasible(&ctrl.family, x, ctrl.m()) {
        return Err(Error::OutsideFeasibleRegion);
    }
    let kx = ctrl.k.mul_vec(x);
    ctrl.project(x, &kx)
}

/// Whether some `û` satisfies `g(x, û) ≪ 0`.
pub fn strictly_feasible(family: &ConstraintFamily, x: &[f64], m: usize) -> bool {
    if x.iter().any(|v| !v.is_finite()) {
        return false;
    }
    match family {
        ConstraintFamily::StateBox { v } => {
            let v = v(x);
            v.len() == m && v.iter().all(|&b| b > STRICT_MARGIN)
        }
        ConstraintFamily::HalfspacePlusBox { a, b, u_bar } => {
            let a = a(x);
            let b = b(x);
            // inf of aᵀu over the open box is −ū‖a‖₁
            let lowest = -u_bar * a.iter().map(|v| v.abs()).sum::<f64>();
            *u_bar > 0.0 && a.len() == m && b.is_finite() && lowest < b - STRICT_MARGIN
        }
        ConstraintFamily::AffineInequalities { a_ineq, b_ineq } => {
            let g = a_ineq(x);
            let h = b_ineq(x);
            g.ncols() == m && g.nrows() == h.len() && max_margin_positive(&g, &h)
        }
    }
}

/// Decides `max { s : G u + s·1 ≤ h } > STRICT_MARGIN` with proximal-point
/// steps on `(u, s)`: each step projects `(u, s + t)` back onto the lifted
/// polyhedron (capped at `s ≤ 1`). A witness `u` with
/// `min(h − Gu) > STRICT_MARGIN` answers yes; a fixed point answers no.
fn max_margin_positive(g: &Matrix, h: &[f64]) -> bool {
    let (p, m) = g.shape();
    if p == 0 {
        return true;
    }
    if h.iter().any(|v| !v.is_finite()) || !g.is_finite() {
        return false;
    }
    let witness = |u: &[f64]| {
        let gu = g.mul_vec(u);
        gu.iter().zip(h).all(|(a, b)| b - a > STRICT_MARGIN)
    };
    let mut lifted = Matrix::zeros(p + 1, m + 1);
    for i in 0..p {
        for j in 0..m {
            lifted[(i, j)] = g[(i, j)];
        }
        lifted[(i, m)] = 1.0;
    }
    lifted[(p, m)] = 1.0;
    let mut bounds = h.to_vec();
    bounds.push(1.0);

    let s0 = h.iter().cloned().fold(1.0_f64, f64::min);
    let mut w = vec![0.0; m + 1];
    w[m] = s0;
    if witness(&w[..m]) {
        return true;
    }
    let mut t = 1.0;
    for _ in 0..60 {
        let mut target = w.clone();
        target[m] += t;
        let next = match proj_polyhedron(&target, &lifted, &bounds, 1e-12, PROJ_MAX_ITER) {
            Ok(r) => r.u,
            Err(_) => return false,
        };
        if witness(&next[..m]) {
            return true;
        }
        if matlin::norm2(&matlin::sub(&next, &w)) <= 1e-13 * (1.0 + matlin::norm2(&w)) {
            return false;
        }
        w = next;
        t *= 2.0;
    }
    false
}

/// `g(x, 0) ≤ 0`.
pub fn zero_feasible(family: &ConstraintFamily, x: &[f64], m: usize) -> bool {
    match family.constraint_values(x, &vec![0.0; m]) {
        Ok(vals) => vals.iter().all(|&v| v <= 0.0),
        Err(_) => false,
    }
}

/// Solves `u = project(u − γ∇_u f(z, u))` by fixed-point iteration; the map
/// is a contraction for `0 < γ < 2/L` when `f(z, ·)` is strongly convex with
/// `L`-Lipschitz gradient.
#[allow(clippy::too_many_arguments)]
pub fn fixed_point_solve<G, P>(
    grad_f: G,
    lipschitz: f64,
    project: P,
    z: &[f64],
    u0: &[f64],
    gamma: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>>
where
    G: Fn(&[f64], &[f64]) -> Vec<f64>,
    P: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if !(lipschitz > 0.0) || !(gamma > 0.0 && gamma < 2.0 / lipschitz) {
        return Err(Error::Precondition(format!(
            "step size must satisfy 0 < gamma < 2/L (gamma = {gamma}, L = {lipschitz})"
        )));
    }
    let mut u = u0.to_vec();
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let next = project(&matlin::axpy(&u, -gamma, &grad_f(z, &u)))?;
        residual = matlin::norm2(&matlin::sub(&next, &u));
        u = next;
        if residual <= tol {
            // u is now the image; check the fixed-point residual there
            let again = project(&matlin::axpy(&u, -gamma, &grad_f(z, &u)))?;
            if matlin::norm2(&matlin::sub(&again, &u)) <= tol {
                return Ok(u);
            }
        }
    }
    Err(Error::MaxIterations {
        iterations: max_iter,
        residual,
    })
}

fn box_rows(lo: &[f64], hi: &[f64]) -> (Matrix, Vec<f64>) {
    let m = lo.len();
    let mut g = Matrix::zeros(2 * m, m);
    let mut h = Vec::with_capacity(2 * m);
    for j in 0..m {
        g[(2 * j, j)] = 1.0;
        h.push(hi[j]);
        g[(2 * j + 1, j)] = -1.0;
        h.push(-lo[j]);
    }
    (g, h)
}
