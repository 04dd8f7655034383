//! JSON run configurations. Every file carries `"schema": 1`; matrices are
//! nested row arrays.

use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use pproj_core::lure_cert::CertSearchConfig;
use pproj_core::matlin::{self, Matrix, SymmetricMatrix};
use pproj_core::param_proj::ConstraintFamily;
use pproj_core::synthesis::{self, gaussian_bound, BarrierFunction, EXAMPLE2_U_BAR};
use pproj_core::{
    ClosedLoopSystem, LqrWeights, LtiPlant, ProjectionController, SimConfig, SplitMix64,
};
use serde::de::DeserializeOwned;
use serde::Deserialize;

pub const SCHEMA_VERSION: u32 = 1;

pub type Rows = Vec<Vec<f64>>;

/// Loads a config. The schema tag is checked (and stripped) before the
/// typed parse, so a wrong version is reported as such.
pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let mut value: serde_json::Value = serde_json::from_str(&text)
        .with_context(|| format!("parsing config {}", path.display()))?;
    match value.get("schema").and_then(|v| v.as_u64()) {
        Some(v) if v == u64::from(SCHEMA_VERSION) => {}
        Some(v) => bail!("field `schema`: unsupported version {v} (expected {SCHEMA_VERSION})"),
        None => bail!("field `schema`: missing or not an integer"),
    }
    if let Some(obj) = value.as_object_mut() {
        obj.remove("schema");
    }
    serde_json::from_value(value).with_context(|| format!("invalid config {}", path.display()))
}

pub fn matrix(field: &str, rows: &Rows) -> Result<Matrix> {
    if rows.is_empty() {
        bail!("field `{field}`: matrix has no rows");
    }
    Matrix::from_rows(rows).with_context(|| format!("field `{field}`"))
}

fn symmetric(field: &str, rows: &Rows) -> Result<SymmetricMatrix> {
    SymmetricMatrix::from_matrix(&matrix(field, rows)?, 1e-12)
        .with_context(|| format!("field `{field}`"))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LqrConfig {
    #[serde(rename = "A")]
    pub a: Rows,
    #[serde(rename = "B")]
    pub b: Rows,
    #[serde(rename = "Q")]
    pub q: Rows,
    #[serde(rename = "R")]
    pub r: Rows,
}

impl LqrConfig {
    pub fn build(&self) -> Result<(Matrix, Matrix, LqrWeights)> {
        let a = matrix("A", &self.a)?;
        let b = matrix("B", &self.b)?;
        let w = LqrWeights::new(symmetric("Q", &self.q)?, symmetric("R", &self.r)?)
            .context("fields `Q`/`R`")?;
        Ok((a, b, w))
    }
}

/// Overrides for the rate search; unset fields use the plant defaults.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpec {
    pub eta_lo: Option<f64>,
    pub eta_hi: Option<f64>,
    pub bisect_tol: Option<f64>,
    pub feas_margin: Option<f64>,
    pub max_inner_iters: Option<usize>,
}

impl SearchSpec {
    pub fn resolve(&self, plant: &LtiPlant) -> Result<CertSearchConfig> {
        let d = CertSearchConfig::for_plant(plant);
        let cfg = CertSearchConfig {
            eta_lo: self.eta_lo.unwrap_or(d.eta_lo),
            eta_hi: self.eta_hi.unwrap_or(d.eta_hi),
            bisect_tol: self.bisect_tol.unwrap_or(d.bisect_tol),
            feas_margin: self.feas_margin.unwrap_or(d.feas_margin),
            max_inner_iters: self.max_inner_iters.unwrap_or(d.max_inner_iters),
        };
        cfg.validate().context("field `search`")?;
        Ok(cfg)
    }
}

fn default_rho() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyConfig {
    pub system: SystemSpec,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default)]
    pub search: SearchSpec,
}

#[derive(Debug)]
pub enum SystemSpec {
    Preset(PresetSpec),
    Explicit(ExplicitSystem),
}

// dispatch on the `preset` key so that errors name the missing field
impl<'de> Deserialize<'de> for SystemSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let v = serde_json::Value::deserialize(d)?;
        if v.get("preset").is_some() {
            PresetSpec::deserialize(v)
                .map(SystemSpec::Preset)
                .map_err(D::Error::custom)
        } else {
            ExplicitSystem::deserialize(v)
                .map(SystemSpec::Explicit)
                .map_err(D::Error::custom)
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(tag = "preset", rename_all = "lowercase", deny_unknown_fields)]
pub enum PresetSpec {
    Example1 { seed: u64 },
    Example2,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitSystem {
    #[serde(rename = "A")]
    pub a: Rows,
    #[serde(rename = "B")]
    pub b: Rows,
    #[serde(rename = "K")]
    pub k: Rows,
    pub constraints: Option<ConstraintSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConstraintSpec {
    /// `|u_j| ≤ v_j(x)`.
    Saturation { bound: SaturationBound },
    /// Disk obstacle `h(x) = ‖x − c‖² − r²` with `α(s) = gain·s`, plus the
    /// box `|u|∞ ≤ u_bar`.
    CbfDisk {
        center: Vec<f64>,
        radius: f64,
        #[serde(default = "default_alpha")]
        alpha_gain: f64,
        u_bar: f64,
    },
    /// `G u ≤ h + H x`; `H` defaults to zero.
    Polyhedron {
        #[serde(rename = "G")]
        g: Rows,
        h: Vec<f64>,
        #[serde(rename = "H")]
        h_state: Option<Rows>,
    },
}

fn default_alpha() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SaturationBound {
    /// `v(x) = e^{−‖x‖²/2}·1`.
    Gaussian,
    Constant(Vec<f64>),
}

/// A fully built system plus the optional barrier used for safety checks.
pub struct BuiltSystem {
    pub label: String,
    pub system: ClosedLoopSystem,
    pub barrier: Option<BarrierFunction>,
    /// Rate for the semi-global fit, when the gain is symmetric negative
    /// definite: `η = −λ_max(K)`.
    pub semiglobal_eta: Option<f64>,
}

impl SystemSpec {
    /// Plant and gain only; no constraint set is needed to certify.
    pub fn plant_and_gain(&self) -> Result<(String, LtiPlant, Matrix)> {
        match self {
            SystemSpec::Preset(PresetSpec::Example1 { seed }) => {
                let e = synthesis::example1_setup(*seed).context("preset `example1`")?;
                Ok((
                    format!("example1 (seed {})", e.seed),
                    e.plant(),
                    e.k().clone(),
                ))
            }
            SystemSpec::Preset(PresetSpec::Example2) => {
                let s = synthesis::example2_system();
                Ok(("example2".into(), s.plant, s.controller.k))
            }
            SystemSpec::Explicit(e) => {
                let plant = LtiPlant::new(matrix("A", &e.a)?, matrix("B", &e.b)?)
                    .context("fields `A`/`B`")?;
                let k = matrix("K", &e.k)?;
                if k.shape() != (plant.m(), plant.n()) {
                    bail!(
                        "field `K`: expected {}x{}, found {}x{}",
                        plant.m(),
                        plant.n(),
                        k.nrows(),
                        k.ncols()
                    );
                }
                Ok(("explicit".into(), plant, k))
            }
        }
    }

    pub fn build(&self) -> Result<BuiltSystem> {
        match self {
            SystemSpec::Preset(PresetSpec::Example1 { seed }) => {
                let e = synthesis::example1_setup(*seed).context("preset `example1`")?;
                Ok(BuiltSystem {
                    label: format!("example1 (seed {})", e.seed),
                    system: e.system(),
                    barrier: None,
                    semiglobal_eta: None,
                })
            }
            SystemSpec::Preset(PresetSpec::Example2) => {
                let system = synthesis::example2_system();
                let eta = semiglobal_eta(&system.controller.k);
                Ok(BuiltSystem {
                    label: format!("example2 (u_bar {EXAMPLE2_U_BAR})"),
                    system,
                    barrier: Some(synthesis::example2_barrier()),
                    semiglobal_eta: eta,
                })
            }
            SystemSpec::Explicit(e) => {
                let (label, plant, k) = self.plant_and_gain()?;
                let Some(spec) = &e.constraints else {
                    bail!("field `system.constraints`: required for simulation");
                };
                let (family, barrier) = spec.build(plant.n(), plant.m())?;
                let single_integrator =
                    plant.a().max_abs() == 0.0 && *plant.b() == Matrix::identity(plant.n());
                let eta = if single_integrator {
                    semiglobal_eta(&k)
                } else {
                    None
                };
                let system = ClosedLoopSystem::new(plant, ProjectionController::new(k, family))
                    .context("field `K`")?;
                Ok(BuiltSystem {
                    label,
                    system,
                    barrier,
                    semiglobal_eta: eta,
                })
            }
        }
    }
}

fn semiglobal_eta(k: &Matrix) -> Option<f64> {
    let s = SymmetricMatrix::from_matrix(k, 1e-12).ok()?;
    let top = matlin::max_eigenvalue(&s).ok()?;
    (top < 0.0).then_some(-top)
}

impl ConstraintSpec {
    fn build(&self, n: usize, m: usize) -> Result<(ConstraintFamily, Option<BarrierFunction>)> {
        match self {
            ConstraintSpec::Saturation { bound } => {
                match bound {
                    SaturationBound::Gaussian => {
                        Ok((ConstraintFamily::state_box(gaussian_bound(m)), None))
                    }
                    SaturationBound::Constant(v) => {
                        if v.len() != m {
                            bail!("field `constraints.bound.constant`: expected {m} entries, found {}", v.len());
                        }
                        let v = v.clone();
                        Ok((ConstraintFamily::state_box(move |_| v.clone()), None))
                    }
                }
            }
            ConstraintSpec::CbfDisk {
                center,
                radius,
                alpha_gain,
                u_bar,
            } => {
                if center.len() != n || m != n {
                    bail!(
                        "field `constraints.center`: a disk barrier needs n = m = {}",
                        center.len()
                    );
                }
                if !(*radius > 0.0 && *u_bar > 0.0 && *alpha_gain > 0.0) {
                    bail!("field `constraints`: radius, u_bar and alpha_gain must be > 0");
                }
                let barrier = disk_barrier(center.clone(), *radius, *alpha_gain);
                let (grad, h, alpha) = (
                    barrier.grad_h.clone(),
                    barrier.h.clone(),
                    barrier.alpha.clone(),
                );
                let family = ConstraintFamily::halfspace_plus_box(
                    move |x: &[f64]| grad(x).into_iter().map(|g| -g).collect(),
                    move |x: &[f64]| alpha(h(x)),
                    *u_bar,
                );
                Ok((family, Some(barrier)))
            }
            ConstraintSpec::Polyhedron { g, h, h_state } => {
                let g = matrix("constraints.G", g)?;
                if g.ncols() != m || g.nrows() != h.len() {
                    bail!(
                        "field `constraints.G`: expected p x {m} with p = {} bounds, found {}x{}",
                        h.len(),
                        g.nrows(),
                        g.ncols()
                    );
                }
                let hs = match h_state {
                    Some(rows) => {
                        let hs = matrix("constraints.H", rows)?;
                        if hs.shape() != (h.len(), n) {
                            bail!("field `constraints.H`: expected {}x{n}", h.len());
                        }
                        hs
                    }
                    None => Matrix::zeros(h.len(), n),
                };
                let h0 = h.clone();
                Ok((
                    ConstraintFamily::affine(
                        move |_| g.clone(),
                        move |x| matlin::add(&h0, &hs.mul_vec(x)),
                    ),
                    None,
                ))
            }
        }
    }
}

fn disk_barrier(center: Vec<f64>, radius: f64, gain: f64) -> BarrierFunction {
    let c2 = center.clone();
    BarrierFunction {
        h: Arc::new(move |x: &[f64]| {
            let d = matlin::sub(x, &center);
            matlin::dot(&d, &d) - radius * radius
        }),
        grad_h: Arc::new(move |x: &[f64]| {
            matlin::sub(x, &c2).into_iter().map(|v| 2.0 * v).collect()
        }),
        alpha: Arc::new(move |s| gain * s),
    }
}

fn default_dt() -> f64 {
    SimConfig::default().dt
}

fn default_horizon() -> f64 {
    SimConfig::default().horizon
}

fn default_blowup() -> f64 {
    SimConfig::default().blowup_norm
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_blowup")]
    pub blowup_norm: f64,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        Self {
            dt: default_dt(),
            horizon: default_horizon(),
            blowup_norm: default_blowup(),
        }
    }
}

impl SimulationSpec {
    pub fn resolve(&self) -> Result<SimConfig> {
        let cfg = SimConfig {
            dt: self.dt,
            horizon: self.horizon,
            blowup_norm: self.blowup_norm,
        };
        cfg.validate().context("field `simulation`")?;
        Ok(cfg)
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum InitialConditions {
    List(Rows),
    Sampled { gaussian: GaussianSpec },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianSpec {
    pub seed: u64,
    pub count: usize,
    pub std_dev: f64,
}

impl InitialConditions {
    pub fn resolve(&self, n: usize) -> Result<Vec<Vec<f64>>> {
        let x0s = match self {
            InitialConditions::List(rows) => rows.clone(),
            InitialConditions::Sampled { gaussian } => {
                if !(gaussian.std_dev > 0.0) {
                    bail!("field `initial_conditions.gaussian.std_dev`: must be > 0");
                }
                let mut rng = SplitMix64::new(gaussian.seed);
                (0..gaussian.count)
                    .map(|_| rng.normal_vec(n, gaussian.std_dev))
                    .collect()
            }
        };
        if x0s.is_empty() {
            bail!("field `initial_conditions`: no initial states");
        }
        if let Some(i) = x0s.iter().position(|x| x.len() != n) {
            bail!(
                "field `initial_conditions[{i}]`: expected {n} entries, found {}",
                x0s[i].len()
            );
        }
        Ok(x0s)
    }
}

fn default_slack() -> f64 {
    1e-6
}

fn default_eq_tol() -> f64 {
    pproj_core::closed_loop_sim::EQUILIBRIUM_TOL
}

fn default_safety_tol() -> f64 {
    1e-6
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksSpec {
    /// Certify `(A, B, K)` first and check the envelope and Lyapunov decrease.
    #[serde(default)]
    pub certify: bool,
    #[serde(default = "default_slack")]
    pub envelope_slack: f64,
    #[serde(default = "default_eq_tol")]
    pub equilibrium_tol: f64,
    #[serde(default = "default_safety_tol")]
    pub safety_tol: f64,
    /// Fails a run when `M_fit·‖x₀‖₂` reaches this value.
    pub m_bound: Option<f64>,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default)]
    pub search: SearchSpec,
}

impl Default for ChecksSpec {
    fn default() -> Self {
        Self {
            certify: false,
            envelope_slack: default_slack(),
            equilibrium_tol: default_eq_tol(),
            safety_tol: default_safety_tol(),
            m_bound: None,
            rho: default_rho(),
            search: SearchSpec::default(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub system: SystemSpec,
    #[serde(default)]
    pub simulation: SimulationSpec,
    pub initial_conditions: InitialConditions,
    #[serde(default)]
    pub checks: ChecksSpec,
}
