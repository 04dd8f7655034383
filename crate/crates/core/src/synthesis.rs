//! Gain synthesis (LQR through the continuous algebraic Riccati equation)
//! and builders for the saturated-control and CBF-filter closed loops.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::closed_loop_sim::ClosedLoopSystem;
use crate::error::{dim_mismatch, Error, Result};
use crate::lure_cert::LtiPlant;
use crate::matlin::{self, cholesky, solve_linear, solve_matrix, Matrix, SymmetricMatrix};
use crate::param_proj::{ConstraintFamily, ProjectionController, ScalarMap, VectorMap};
use crate::rng::SplitMix64;

/// Solves `AᵀX + XA + Q = 0` through the `n² × n²` Kronecker system.
pub fn solve_lyapunov(a: &Matrix, q: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    if !a.is_square() {
        return Err(dim_mismatch(
            "solve_lyapunov A",
            "square",
            format!("{:?}", a.shape()),
        ));
    }
    let n = a.nrows();
    if q.dim() != n {
        return Err(dim_mismatch("solve_lyapunov Q", n, q.dim()));
    }
    // row-major vec(X): index i*n + j
    let mut op = Matrix::zeros(n * n, n * n);
    for i in 0..n {
        for j in 0..n {
            let r = i * n + j;
            for k in 0..n {
                op[(r, k * n + j)] += a[(k, i)];
                op[(r, i * n + k)] += a[(k, j)];
            }
        }
    }
    let rhs: Vec<f64> = q.to_matrix().as_slice().iter().map(|v| -v).collect();
    let x = solve_linear(&op, &rhs).map_err(|e| match e {
        Error::Singular { pivot } => Error::LyapunovNotAdmissible { pivot },
        other => other,
    })?;
    let xm = Matrix::from_row_major(n, n, x)?;
    SymmetricMatrix::from_matrix_sym_part(&xm)
}

/// `‖AᵀX + XA + Q‖_F`.
pub fn lyapunov_residual(a: &Matrix, x: &SymmetricMatrix, q: &SymmetricMatrix) -> f64 {
    let xm = x.to_matrix();
    let xa = &xm * a;
    let r = &(&xa.transpose() + &xa) + &q.to_matrix();
    r.frobenius_norm()
}

/// LQR weights `∫ xᵀQx + uᵀRu dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct LqrWeights {
    q: SymmetricMatrix,
    r: SymmetricMatrix,
}

impl LqrWeights {
    pub fn new(q: SymmetricMatrix, r: SymmetricMatrix) -> Result<Self> {
        if cholesky(&r).is_err() {
            return Err(Error::InvalidInput("R must be positive definite".into()));
        }
        let qmin = matlin::sym_eig(&q)?.min();
        if qmin < -1e-12 {
            return Err(Error::InvalidInput(format!(
                "Q must be positive semidefinite (min eigenvalue {qmin:e})"
            )));
        }
        Ok(Self { q, r })
    }

    /// `Q = I_n`, `R = I_m`.
    pub fn identity(n: usize, m: usize) -> Self {
        Self {
            q: SymmetricMatrix::identity(n),
            r: SymmetricMatrix::identity(m),
        }
    }

    pub fn q(&self) -> &SymmetricMatrix {
        &self.q
    }

    pub fn r(&self) -> &SymmetricMatrix {
        &self.r
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CareSolution {
    #[serde(with = "sym_rows")]
    pub x: SymmetricMatrix,
    #[serde(with = "mat_rows")]
    pub k: Matrix,
    pub residual: f64,
    /// CARE residual after each Newton step.
    pub residual_history: Vec<f64>,
}

/// `‖AᵀX + XA − XBR⁻¹BᵀX + Q‖_F`.
pub fn care_residual(a: &Matrix, b: &Matrix, w: &LqrWeights, x: &SymmetricMatrix) -> Result<f64> {
    let xm = x.to_matrix();
    let rinv_btx = solve_matrix(&w.r.to_matrix(), &(&b.transpose() * &xm))?;
    let xa = &xm * a;
    let quad = &(&xm * b) * &rinv_btx;
    let r = &(&(&xa.transpose() + &xa) - &quad) + &w.q.to_matrix();
    Ok(r.frobenius_norm())
}

const CARE_MAX_ITERS: usize = 100;

/// Newton–Kleinman iteration for the stabilizing CARE solution, with the
/// feedback convention `u = Kx`, `K = −R⁻¹BᵀX`.
pub fn solve_care(a: &Matrix, b: &Matrix, w: &LqrWeights) -> Result<CareSolution> {
    let plant = LtiPlant::new(a.clone(), b.clone())?;
    let (n, m) = (plant.n(), plant.m());
    if w.q.dim() != n || w.r.dim() != m {
        return Err(dim_mismatch(
            "LQR weights",
            format!("Q {n}x{n}, R {m}x{m}"),
            format!("Q {0}x{0}, R {1}x{1}", w.q.dim(), w.r.dim()),
        ));
    }
    let mut k = stabilizing_gain(a, b)?;
    let rm = w.r.to_matrix();
    let mut history = Vec::new();
    let mut last_x: Option<SymmetricMatrix> = None;
    for _ in 0..CARE_MAX_ITERS {
        let acl = a + &(b * &k);
        // AclᵀX + X Acl + Q + KᵀRK = 0
        let ktrk = &(&k.transpose() * &rm) * &k;
        let qk = w.q.add(&SymmetricMatrix::from_matrix_sym_part(&ktrk)?);
        let x = solve_lyapunov(&acl, &qk).map_err(|e| Error::CareFailed {
            reason: format!("Lyapunov step failed: {e}"),
            residual_history: history.clone(),
        })?;
        k = solve_matrix(&rm, &(&b.transpose() * &x.to_matrix()))?.scale(-1.0);
        let res = care_residual(a, b, w, &x)?;
        history.push(res);
        let done = res <= 1e-14 * (1.0 + x.frobenius_norm());
        let stalled = last_x.as_ref().is_some_and(|prev| {
            prev.scale(-1.0).add(&x).frobenius_norm() <= 1e-15 * (1.0 + x.frobenius_norm())
        });
        last_x = Some(x);
        if done || stalled {
            break;
        }
    }
    let x = last_x.expect("at least one iteration");
    let residual = *history.last().expect("at least one iteration");
    if !(residual <= 1e-8 * (1.0 + x.frobenius_norm())) {
        return Err(Error::CareFailed {
            reason: "Newton–Kleinman did not reach the residual tolerance".into(),
            residual_history: history,
        });
    }
    let acl = a + &(b * &k);
    if !hurwitz_check(&acl, 1e-9).hurwitz {
        return Err(Error::CareFailed {
            reason: "closed loop A + BK is not Hurwitz".into(),
            residual_history: history,
        });
    }
    Ok(CareSolution {
        x,
        k,
        residual,
        residual_history: history,
    })
}

/// Zero when `A` is already Hurwitz, otherwise Bass's gain: with
/// `β = 1 + ‖A‖_F`, solve `(A + βI)W + W(A + βI)ᵀ = 2BBᵀ` and take
/// `K₀ = −BᵀW⁻¹`, which gives `(A + BK₀)W + W(A + BK₀)ᵀ = −2βW`.
fn stabilizing_gain(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let (n, m) = (a.nrows(), b.ncols());
    if hurwitz_check(a, 1e-6).hurwitz {
        return Ok(Matrix::zeros(m, n));
    }
    let beta = 1.0 + a.frobenius_norm();
    let shifted = Matrix::from_fn(n, n, |i, j| a[(i, j)] + if i == j { beta } else { 0.0 });
    let bbt = SymmetricMatrix::from_matrix_sym_part(&(b * &b.transpose()))?.scale(-2.0);
    // solve_lyapunov(Ā^T, −2BBᵀ): Ā W + W Āᵀ − 2BBᵀ = 0
    let w = solve_lyapunov(&shifted.transpose(), &bbt).map_err(|e| Error::CareFailed {
        reason: format!("Bass initialization failed: {e}"),
        residual_history: vec![],
    })?;
    if cholesky(&w).is_err() {
        return Err(Error::CareFailed {
            reason: "Bass Gramian is singular; (A, B) is not controllable".into(),
            residual_history: vec![],
        });
    }
    // K₀ = −BᵀW⁻¹ = −(W⁻¹B)ᵀ
    let winv_b = solve_matrix(&w.to_matrix(), b)?;
    Ok(winv_b.transpose().scale(-1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HurwitzReport {
    pub hurwitz: bool,
    /// Estimate of `max Re λ(M)`.
    pub abscissa: f64,
}

const HURWITZ_PROBES: usize = 50;
const HURWITZ_STEPS: usize = 4000;

/// Estimates the spectral abscissa of a (non-symmetric) square matrix from
/// the asymptotic growth of `E = e^{τM}`, `τ = 1/(1 + ‖M‖_F)`: each of 50
/// seeded random probes is propagated by `E`, and the growth rate over the
/// second half of the run estimates `τ·max Re λ(M)`. `M` is Hurwitz when the
/// estimate is below `−tol`.
pub fn hurwitz_check(m: &Matrix, tol: f64) -> HurwitzReport {
    let n = m.nrows();
    if n == 0 {
        return HurwitzReport {
            hurwitz: true,
            abscissa: f64::NEG_INFINITY,
        };
    }
    let tau = 1.0 / (1.0 + m.frobenius_norm());
    let e = expm_small(&m.scale(tau));
    let mut rng = SplitMix64::new(0x5EED_4857_0001);
    let half = HURWITZ_STEPS / 2;
    let mut best = f64::NEG_INFINITY;
    for _ in 0..HURWITZ_PROBES {
        let mut w = rng.normal_vec(n, 1.0);
        let mut log_growth = 0.0;
        for step in 0..HURWITZ_STEPS {
            w = e.mul_vec(&w);
            let nrm = matlin::norm2(&w);
            if nrm == 0.0 {
                // nilpotent direction: decays faster than any exponential
                log_growth = f64::NEG_INFINITY;
                break;
            }
            if step >= half {
                log_growth += nrm.ln();
            }
            w.iter_mut().for_each(|v| *v /= nrm);
        }
        let rate = log_growth / (half as f64 * tau);
        best = best.max(rate);
    }
    HurwitzReport {
        hurwitz: best < -tol,
        abscissa: best,
    }
}

/// Taylor series of `e^M` for `‖M‖_F ≤ 1`.
fn expm_small(m: &Matrix) -> Matrix {
    let n = m.nrows();
    let mut out = Matrix::identity(n);
    let mut term = Matrix::identity(n);
    for k in 1..=30 {
        term = (&term * m).scale(1.0 / k as f64);
        out = &out + &term;
        if term.max_abs() < 1e-18 {
            break;
        }
    }
    out
}

/// `ẋ = Ax + B·sat_{v(x)}(Kx)`.
pub fn build_saturation_system(
    a: Matrix,
    b: Matrix,
    k: Matrix,
    v: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
) -> Result<ClosedLoopSystem> {
    let plant = LtiPlant::new(a, b)?;
    ClosedLoopSystem::new(
        plant,
        ProjectionController::new(k, ConstraintFamily::state_box(v)),
    )
}

/// Scalar field of a barrier function and its companion data.
#[derive(Clone)]
pub struct BarrierFunction {
    pub h: ScalarMap,
    pub grad_h: VectorMap,
    pub alpha: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

/// Single integrator `ẋ = u*(x)` filtered by the CBF constraint
/// `−∇h(x)ᵀu ≤ α(h(x))` and the box `|u|∞ ≤ ū`.
pub fn build_cbf_system(
    barrier: &BarrierFunction,
    k: Matrix,
    u_bar: f64,
) -> Result<ClosedLoopSystem> {
    if !k.is_square() {
        return Err(dim_mismatch(
            "CBF gain",
            "square",
            format!("{:?}", k.shape()),
        ));
    }
    if !(u_bar > 0.0) {
        return Err(Error::InvalidInput(format!(
            "u_bar must be > 0, got {u_bar}"
        )));
    }
    let n = k.nrows();
    let plant = LtiPlant::new(Matrix::zeros(n, n), Matrix::identity(n))?;
    let grad = barrier.grad_h.clone();
    let h = barrier.h.clone();
    let alpha = barrier.alpha.clone();
    let family = ConstraintFamily::halfspace_plus_box(
        move |x: &[f64]| grad(x).into_iter().map(|g| -g).collect(),
        move |x: &[f64]| alpha(h(x)),
        u_bar,
    );
    ClosedLoopSystem::new(plant, ProjectionController::new(k, family))
}

/// `v(x) = e^{−‖x‖²/2}·1_m`.
pub fn gaussian_bound(m: usize) -> impl Fn(&[f64]) -> Vec<f64> + Send + Sync + Clone + 'static {
    move |x: &[f64]| vec![(-0.5 * matlin::dot(x, x)).exp(); m]
}

/// The seeded saturated-control instance: `A = −I₃ + N` with standard
/// normal `N`, `B = [e₁ e₂]`, LQR gain for `Q = I₃`, `R = I₂`.
#[derive(Clone, Debug)]
pub struct Example1 {
    /// Seed that produced the instance (differs from the request if
    /// regeneration was needed).
    pub seed: u64,
    pub a: Matrix,
    pub b: Matrix,
    pub care: CareSolution,
}

impl Example1 {
    pub fn k(&self) -> &Matrix {
        &self.care.k
    }

    pub fn plant(&self) -> LtiPlant {
        LtiPlant::new(self.a.clone(), self.b.clone()).expect("dimensions fixed at construction")
    }

    pub fn system(&self) -> ClosedLoopSystem {
        build_saturation_system(
            self.a.clone(),
            self.b.clone(),
            self.care.k.clone(),
            gaussian_bound(2),
        )
        .expect("dimensions fixed at construction")
    }
}

/// Draws `N` row by row from [`SplitMix64`] normals. The seed is
/// incremented, up to 10 attempts, while the CARE fails or `A` is not
/// Hurwitz (the contraction LMI is infeasible for non-Hurwitz `A`).
pub fn example1_setup(seed: u64) -> Result<Example1> {
    let b = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])?;
    let mut last_err = None;
    for attempt in 0..10u64 {
        let s = seed.wrapping_add(attempt);
        let mut rng = SplitMix64::new(s);
        let a = Matrix::from_fn(3, 3, |i, j| {
            rng.standard_normal() - if i == j { 1.0 } else { 0.0 }
        });
        if !hurwitz_check(&a, 1e-9).hurwitz {
            last_err = Some(Error::Precondition(format!("seed {s}: A is not Hurwitz")));
            continue;
        }
        match solve_care(&a, &b, &LqrWeights::identity(3, 2)) {
            Ok(care) => {
                return Ok(Example1 {
                    seed: s,
                    a,
                    b,
                    care,
                });
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(Error::CareFailed {
        reason: format!("no admissible instance in 10 seeds from {seed}: {last_err:?}"),
        residual_history: vec![],
    })
}

/// Disk obstacle of radius 2 centred at `(0, 4)` with `α(r) = r`.
pub fn example2_barrier() -> BarrierFunction {
    BarrierFunction {
        h: Arc::new(|x: &[f64]| x[0] * x[0] + (x[1] - 4.0).powi(2) - 4.0),
        grad_h: Arc::new(|x: &[f64]| vec![2.0 * x[0], 2.0 * (x[1] - 4.0)]),
        alpha: Arc::new(|r| r),
    }
}

pub fn example2_gain() -> Matrix {
    Matrix::from_rows(&[[-2.0, -0.5], [-0.5, -1.0]]).expect("constant")
}

pub const EXAMPLE2_U_BAR: f64 = 1.0;

/// `ẋ = u*(x)` with the disk CBF, `K = [[−2, −0.5], [−0.5, −1]]`, `ū = 1`.
pub fn example2_system() -> ClosedLoopSystem {
    build_cbf_system(&example2_barrier(), example2_gain(), EXAMPLE2_U_BAR).expect("constant data")
}

mod sym_rows {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &SymmetricMatrix, s: S) -> Result<S::Ok, S::Error> {
        x.to_matrix().to_rows().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<SymmetricMatrix, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        SymmetricMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

mod mat_rows {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &Matrix, s: S) -> Result<S::Ok, S::Error> {
        x.to_rows().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Matrix, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        Matrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}
