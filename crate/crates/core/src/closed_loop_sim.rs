//! Fixed-step RK4 simulation of `ẋ = Ax + B·u*(x)` and the trajectory-level
//! checks: decay envelope, Lyapunov decrease, equilibrium detection,
//! semi-global rate fit and barrier safety.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{dim_mismatch, Error, Result};
use crate::lure_cert::LtiPlant;
use crate::matlin::{self, cholesky, Cholesky, SymmetricMatrix};
use crate::param_proj::{eval_controller, strictly_feasible, ProjectionController};

#[derive(Clone, Debug)]
pub struct ClosedLoopSystem {
    pub plant: LtiPlant,
    pub controller: ProjectionController,
}

impl ClosedLoopSystem {
    pub fn new(plant: LtiPlant, controller: ProjectionController) -> Result<Self> {
        plant.check_gain(&controller.k)?;
        Ok(Self { plant, controller })
    }

    pub fn n(&self) -> usize {
        self.plant.n()
    }

    pub fn m(&self) -> usize {
        self.plant.m()
    }

    /// `(ẋ, u*(x))`.
    pub fn field(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let u = eval_controller(&self.controller, x)?.u;
        let ax = self.plant.a().mul_vec(x);
        let bu = self.plant.b().mul_vec(&u);
        Ok((matlin::add(&ax, &bu), u))
    }

    /// Whether `x` lies in the strict-feasibility region.
    pub fn in_region(&self, x: &[f64]) -> bool {
        strictly_feasible(&self.controller.family, x, self.m())
    }

    /// Lipschitz bound `‖A‖_F + ‖B‖_F‖K‖_F` of the closed-loop field
    /// (projections are nonexpansive).
    pub fn lipschitz_bound(&self) -> f64 {
        self.plant.a().frobenius_norm()
            + self.plant.b().frobenius_norm() * self.controller.k.frobenius_norm()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Completed,
    LeftFeasibleRegion,
    NumericalBlowup,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub inputs: Vec<Vec<f64>>,
    pub termination: Termination,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn initial_state(&self) -> &[f64] {
        &self.states[0]
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectories hold at least x0")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub blowup_norm: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            horizon: 15.0,
            blowup_norm: 1e8,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.horizon > 0.0 && self.dt <= self.horizon) {
            return Err(Error::InvalidInput(format!(
                "need 0 < dt <= horizon (dt = {}, horizon = {})",
                self.dt, self.horizon
            )));
        }
        if !(self.blowup_norm > 0.0) {
            return Err(Error::InvalidInput("blowup_norm must be > 0".into()));
        }
        Ok(())
    }

    /// Number of RK4 steps; the final step is shortened to land on the
    /// horizon when `horizon/dt` is not an integer.
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt - 1e-9).ceil().max(1.0) as usize
    }
}

/// Classical RK4 with the controller re-solved at each of the four stages.
pub fn integrate(sys: &ClosedLoopSystem, x0: &[f64], cfg: &SimConfig) -> Result<Trajectory> {
    cfg.validate()?;
    if x0.len() != sys.n() {
        return Err(dim_mismatch("integrate x0", sys.n(), x0.len()));
    }
    if !sys.in_region(x0) {
        return Err(Error::InvalidInput(
            "initial state is outside the strict-feasibility region".into(),
        ));
    }
    let steps = cfg.steps();
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut inputs = Vec::with_capacity(steps + 1);

    let (mut k1, mut u) = sys.field(x0)?;
    let mut x = x0.to_vec();
    times.push(0.0);
    states.push(x.clone());
    inputs.push(u);

    let mut termination = Termination::Completed;
    for step in 1..=steps {
        let t_prev = (step - 1) as f64 * cfg.dt;
        let t = (step as f64 * cfg.dt).min(cfg.horizon);
        let h = t - t_prev;
        let stage = |y: &[f64]| -> Result<Vec<f64>> { Ok(sys.field(y)?.0) };
        let outcome = (|| -> Result<Vec<f64>> {
            let k2 = stage(&matlin::axpy(&x, 0.5 * h, &k1))?;
            let k3 = stage(&matlin::axpy(&x, 0.5 * h, &k2))?;
            let k4 = stage(&matlin::axpy(&x, h, &k3))?;
            Ok((0..x.len())
                .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
                .collect())
        })();
        let next = match outcome {
            Ok(v) => v,
            Err(Error::OutsideFeasibleRegion) => {
                termination = Termination::LeftFeasibleRegion;
                break;
            }
            Err(e) => return Err(e),
        };
        if next.iter().any(|v| !v.is_finite()) || matlin::norm2(&next) > cfg.blowup_norm {
            termination = Termination::NumericalBlowup;
            break;
        }
        match sys.field(&next) {
            Ok((f, un)) => {
                k1 = f;
                u = un;
            }
            Err(Error::OutsideFeasibleRegion) => {
                termination = Termination::LeftFeasibleRegion;
                break;
            }
            Err(e) => return Err(e),
        }
        x = next;
        times.push(t);
        states.push(x.clone());
        inputs.push(u);
    }
    Ok(Trajectory {
        times,
        states,
        inputs,
        termination,
    })
}

/// Independent integrations, in input order. Failures stay per entry.
pub fn batch_simulate(
    sys: &ClosedLoopSystem,
    x0s: &[Vec<f64>],
    cfg: &SimConfig,
) -> Vec<Result<Trajectory>> {
    x0s.par_iter().map(|x0| integrate(sys, x0, cfg)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub eta: f64,
    /// `max_t ‖φ(t)‖_P − e^{−ηt}‖x₀‖_P`.
    pub max_violation: f64,
    pub first_violation_time: Option<f64>,
    pub x0_norm_p: f64,
    pub slack: f64,
    pub pass: bool,
}

/// Checks `‖φ(t)‖_P ≤ e^{−ηt}‖x₀‖_P` at every stored sample, allowing
/// `slack·‖x₀‖_P`.
pub fn check_decay_envelope(
    traj: &Trajectory,
    p: &SymmetricMatrix,
    eta: f64,
    slack: f64,
) -> Result<EnvelopeReport> {
    let chol = cholesky(p)?;
    let x0n = chol.weighted_norm(traj.initial_state())?;
    let allowed = slack * x0n;
    let mut max_violation = f64::NEG_INFINITY;
    let mut first_violation_time = None;
    for (t, x) in traj.times.iter().zip(&traj.states) {
        let v = chol.weighted_norm(x)? - (-eta * t).exp() * x0n;
        if v > allowed && first_violation_time.is_none() {
            first_violation_time = Some(*t);
        }
        max_violation = max_violation.max(v);
    }
    Ok(EnvelopeReport {
        eta,
        max_violation,
        first_violation_time,
        x0_norm_p: x0n,
        slack,
        pass: max_violation <= allowed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovReport {
    pub pass: bool,
    /// `max (dV/dt + 2ηV)/(1 + V)` over interior samples; the check passes
    /// when this is at most `fd_tol`.
    pub worst_slack: f64,
    pub worst_time: f64,
}

/// Central differences of `V = xᵀPx` against `dV/dt ≤ −2ηV + fd_tol·(1 + V)`.
pub fn check_lyapunov_decrease(
    traj: &Trajectory,
    p: &SymmetricMatrix,
    eta: f64,
    fd_tol: f64,
) -> Result<LyapunovReport> {
    if traj.len() < 3 {
        return Err(Error::Precondition("need at least 3 samples".into()));
    }
    let v: Vec<f64> = traj.states.iter().map(|x| p.quad_form(x)).collect();
    let mut worst = f64::NEG_INFINITY;
    let mut worst_time = traj.times[1];
    for k in 1..traj.len() - 1 {
        let dv = (v[k + 1] - v[k - 1]) / (traj.times[k + 1] - traj.times[k - 1]);
        let s = (dv + 2.0 * eta * v[k]) / (1.0 + v[k]);
        if s > worst {
            worst = s;
            worst_time = traj.times[k];
        }
    }
    Ok(LyapunovReport {
        pass: worst <= fd_tol,
        worst_slack: worst,
        worst_time,
    })
}

/// Differencing allowance `10·dt²·L³` for [`check_lyapunov_decrease`],
/// with `L` the closed-loop Lipschitz bound.
pub fn lyapunov_fd_tol(sys: &ClosedLoopSystem, dt: f64) -> f64 {
    10.0 * dt * dt * (1.0 + sys.lipschitz_bound()).powi(3)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub point: Vec<f64>,
    pub is_origin: bool,
    pub input_norm: f64,
}

/// Default tolerance for [`detect_equilibrium`].
pub const EQUILIBRIUM_TOL: f64 = 1e-6;

/// The final state, if `‖u*(x_final)‖ ≤ tol` and the last 10% of samples
/// stay within `10·tol` of it.
pub fn detect_equilibrium(
    traj: &Trajectory,
    ctrl: &ProjectionController,
    tol: f64,
) -> Result<Option<Equilibrium>> {
    if traj.termination != Termination::Completed {
        return Err(Error::Precondition("trajectory did not complete".into()));
    }
    let xf = traj.final_state();
    let input_norm = match eval_controller(ctrl, xf) {
        Ok(r) => matlin::norm2(&r.u),
        Err(Error::OutsideFeasibleRegion) => return Ok(None),
        Err(e) => return Err(e),
    };
    if input_norm > tol {
        return Ok(None);
    }
    let window = (traj.len() / 10).max(1);
    let settled = traj.states[traj.len() - window..]
        .iter()
        .all(|x| matlin::norm2(&matlin::sub(x, xf)) <= 10.0 * tol);
    if !settled {
        return Ok(None);
    }
    Ok(Some(Equilibrium {
        point: xf.to_vec(),
        is_origin: matlin::norm2(xf) <= tol,
        input_norm,
    }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub eta_assumed: f64,
    /// Smallest `M` with `‖φ(t)‖ ≤ M e^{−ηt}‖x₀‖` on every sample.
    pub m_fit: f64,
    pub argmax_time: f64,
}

/// Fits the semi-global constant for an origin-converging trajectory
/// (final state within [`EQUILIBRIUM_TOL`] of the origin).
pub fn fit_semiglobal_rate(traj: &Trajectory, eta: f64) -> Result<RateFit> {
    if matlin::norm2(traj.final_state()) > EQUILIBRIUM_TOL {
        return Err(Error::Precondition(
            "trajectory does not converge to the origin".into(),
        ));
    }
    let x0n = matlin::norm2(traj.initial_state());
    if x0n == 0.0 {
        return Ok(RateFit {
            eta_assumed: eta,
            m_fit: 1.0,
            argmax_time: 0.0,
        });
    }
    let mut m_fit = f64::NEG_INFINITY;
    let mut argmax_time = 0.0;
    for (t, x) in traj.times.iter().zip(&traj.states) {
        let r = matlin::norm2(x) * (eta * t).exp() / x0n;
        if r > m_fit {
            m_fit = r;
            argmax_time = *t;
        }
    }
    Ok(RateFit {
        eta_assumed: eta,
        m_fit,
        argmax_time,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SafetyReport {
    pub safe: bool,
    pub min_h: f64,
}

/// `min_t h(φ(t)) ≥ −tol`.
pub fn check_safety(traj: &Trajectory, h: impl Fn(&[f64]) -> f64, tol: f64) -> SafetyReport {
    let min_h = traj
        .states
        .iter()
        .map(|x| h(x))
        .fold(f64::INFINITY, f64::min);
    SafetyReport {
        safe: min_h >= -tol,
        min_h,
    }
}

/// Trajectory CSV: `t,x1..xn,u1..um[,norm_P][,h]`, one row per sample,
/// floats with 17 significant digits.
/// Scalar function of the state, such as a barrier.
pub type StateFn<'a> = &'a dyn Fn(&[f64]) -> f64;

pub fn trajectory_csv(
    traj: &Trajectory,
    p: Option<&Cholesky>,
    h: Option<StateFn<'_>>,
) -> Result<String> {
    let n = traj.states.first().map_or(0, |x| x.len());
    let m = traj.inputs.first().map_or(0, |u| u.len());
    let mut out = String::new();
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.extend((1..=m).map(|i| format!("u{i}")));
    if p.is_some() {
        header.push("norm_P".into());
    }
    if h.is_some() {
        header.push("h".into());
    }
    out.push_str(&header.join(","));
    out.push('\n');
    for ((t, x), u) in traj.times.iter().zip(&traj.states).zip(&traj.inputs) {
        let mut fields: Vec<f64> = vec![*t];
        fields.extend(x);
        fields.extend(u);
        if let Some(c) = p {
            fields.push(c.weighted_norm(x)?);
        }
        if let Some(h) = h {
            fields.push(h(x));
        }
        let line: Vec<String> = fields.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(out, "{}", line.join(",")).expect("writing to a String");
    }
    Ok(out)
}
