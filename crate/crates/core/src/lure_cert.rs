//! Absolute-contractivity certificates for Lur'e systems
//! `ẋ = Ax + Bφ(Kx, t)` with `φ` cocoercive in its first argument.
//!
//! The certificate is a pair `(P, λ)` making the block matrix
//!
//! ```text
//! ┌ AᵀP + PA + 2ηP    PB + λKᵀ ┐
//! └ BᵀP + λK         −2λρ I_m  ┘  ⪯ 0
//! ```
//!
//! negative semidefinite with `P ≻ 0`, `λ ≥ 0`. Feasibility is searched by
//! minimizing the (convex) largest eigenvalue of that block over a
//! trace-normalized set of `P`, and the rate `η` is maximized by bisection.

use serde::{Deserialize, Serialize};

use crate::error::{dim_mismatch, Error, Result};
use crate::matlin::{self, cholesky, sym_eig, Matrix, SymmetricMatrix};
use crate::synthesis::solve_lyapunov;

/// Value of `λ_max` below which the searched point is declared feasible.
pub const FEASIBLE_THRESHOLD: f64 = -1e-9;
/// `λ_max` floor above which a stalled search is declared infeasible.
pub const INFEASIBLE_THRESHOLD: f64 = 1e-7;
/// Iterations without progress before a search counts as stalled.
pub const STALL_WINDOW: usize = 500;

/// Continuous-time LTI plant `ẋ = Ax + Bu`.
#[derive(Clone, Debug, PartialEq)]
pub struct LtiPlant {
    a: Matrix,
    b: Matrix,
}

impl LtiPlant {
    pub fn new(a: Matrix, b: Matrix) -> Result<Self> {
        if !a.is_square() {
            return Err(dim_mismatch(
                "LtiPlant A",
                "square",
                format!("{:?}", a.shape()),
            ));
        }
        if b.nrows() != a.nrows() {
            return Err(dim_mismatch("LtiPlant B rows", a.nrows(), b.nrows()));
        }
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::NonFinite("plant matrices"));
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    /// State dimension `n`.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Input dimension `m`.
    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub(crate) fn check_gain(&self, k: &Matrix) -> Result<()> {
        if k.shape() != (self.m(), self.n()) {
            return Err(dim_mismatch(
                "gain K",
                format!("{}x{}", self.m(), self.n()),
                format!("{}x{}", k.nrows(), k.ncols()),
            ));
        }
        if !k.is_finite() {
            return Err(Error::NonFinite("gain K"));
        }
        Ok(())
    }
}

/// A feasible point of the contraction LMI.
#[derive(Clone, Debug, PartialEq)]
pub struct LureCertificate {
    pub p: SymmetricMatrix,
    pub eta: f64,
    pub lambda: f64,
    pub rho: f64,
    /// Largest eigenvalue of the assembled block at this point.
    pub lmi_max_eig: f64,
}

#[derive(Serialize, Deserialize)]
struct CertificateWire {
    #[serde(rename = "P")]
    p: Vec<Vec<f64>>,
    eta: f64,
    lambda: f64,
    rho: f64,
    lmi_max_eig: f64,
}

impl Serialize for LureCertificate {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CertificateWire {
            p: self.p.to_matrix().to_rows(),
            eta: self.eta,
            lambda: self.lambda,
            rho: self.rho,
            lmi_max_eig: self.lmi_max_eig,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for LureCertificate {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let w = CertificateWire::deserialize(d)?;
        let p = Matrix::from_rows(&w.p)
            .and_then(|m| SymmetricMatrix::from_matrix(&m, 1e-12))
            .map_err(D::Error::custom)?;
        Ok(Self {
            p,
            eta: w.eta,
            lambda: w.lambda,
            rho: w.rho,
            lmi_max_eig: w.lmi_max_eig,
        })
    }
}

/// Settings for [`find_certificate`] and [`max_contraction_rate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertSearchConfig {
    pub eta_lo: f64,
    pub eta_hi: f64,
    pub bisect_tol: f64,
    /// Lower eigenvalue bound `ε` on `P` (before trace normalization).
    pub feas_margin: f64,
    pub max_inner_iters: usize,
}

impl CertSearchConfig {
    /// Defaults with the upper bracket `2‖A‖_F`, which bounds every feasible
    /// rate (a feasible `η` needs `A + ηI` Hurwitz).
    pub fn for_plant(plant: &LtiPlant) -> Self {
        Self {
            eta_lo: 1e-4,
            eta_hi: (2.0 * plant.a().frobenius_norm()).max(1.0),
            bisect_tol: 1e-3,
            feas_margin: 1e-6,
            max_inner_iters: 5000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.eta_lo >= 0.0
            && self.eta_lo < self.eta_hi
            && self.eta_hi.is_finite()
            && self.bisect_tol > 0.0
            && self.feas_margin > 0.0
            && self.feas_margin < 1.0
            && self.max_inner_iters > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "invalid certificate search config {self:?}"
            )))
        }
    }
}

/// Builds the `(n+m)`-dimensional LMI block.
pub fn assemble_lmi(
    plant: &LtiPlant,
    k: &Matrix,
    p: &SymmetricMatrix,
    eta: f64,
    lambda: f64,
    rho: f64,
) -> Result<SymmetricMatrix> {
    plant.check_gain(k)?;
    let (n, m) = (plant.n(), plant.m());
    if p.dim() != n {
        return Err(dim_mismatch("assemble_lmi P", n, p.dim()));
    }
    if !(rho > 0.0) {
        return Err(Error::Precondition(format!("rho must be > 0, got {rho}")));
    }
    let pm = p.to_matrix();
    let pa = &pm * plant.a();
    let pb = &pm * plant.b();
    Ok(SymmetricMatrix::from_fn(n + m, |i, j| {
        // i >= j: lower triangle only
        match (i < n, j < n) {
            (true, true) => pa[(i, j)] + pa[(j, i)] + 2.0 * eta * pm[(i, j)],
            (false, true) => pb[(j, i - n)] + lambda * k[(i - n, j)],
            (false, false) => {
                if i == j {
                    -2.0 * lambda * rho
                } else {
                    0.0
                }
            }
            (true, false) => unreachable!(),
        }
    }))
}

/// Outcome of [`verify_certificate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertVerification {
    pub valid: bool,
    pub p_positive_definite: bool,
    pub lmi_max_eig: f64,
    pub p_min_eig: f64,
}

pub fn verify_certificate(
    plant: &LtiPlant,
    k: &Matrix,
    cert: &LureCertificate,
    tol: f64,
) -> Result<CertVerification> {
    let lmi = assemble_lmi(plant, k, &cert.p, cert.eta, cert.lambda, cert.rho)?;
    let lmi_max_eig = matlin::max_eigenvalue(&lmi)?;
    let p_min_eig = sym_eig(&cert.p)?.min();
    let p_positive_definite = cholesky(&cert.p).is_ok();
    let valid = p_positive_definite && lmi_max_eig <= tol && cert.lambda >= 0.0 && cert.eta > 0.0;
    Ok(CertVerification {
        valid,
        p_positive_definite,
        lmi_max_eig,
        p_min_eig,
    })
}

/// Verification tolerance used for certificates produced by the search.
pub fn default_verify_tol(plant: &LtiPlant) -> f64 {
    1e-8 * (1.0 + plant.a().frobenius_norm())
}

/// Result of a fixed-rate feasibility search.
#[derive(Clone, Debug, PartialEq)]
pub enum Feasibility {
    Feasible(LureCertificate),
    /// The objective stalled above [`INFEASIBLE_THRESHOLD`].
    Infeasible {
        best_max_eig: f64,
    },
    /// Iteration cap reached while still making progress.
    Inconclusive {
        best_max_eig: f64,
    },
}

impl Feasibility {
    pub fn certificate(&self) -> Option<&LureCertificate> {
        match self {
            Feasibility::Feasible(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible(_))
    }
}

/// Search state: `(P, λ)` on the normalized set.
#[derive(Clone, Debug)]
struct Point {
    p: SymmetricMatrix,
    lambda: f64,
}

struct SpectralProblem<'a> {
    plant: &'a LtiPlant,
    k: &'a Matrix,
    eta: f64,
    rho: f64,
    margin: f64,
}

impl SpectralProblem<'_> {
    /// `λ_max` of the LMI block and a subgradient `(G_P, g_λ)` built from the
    /// top eigenvector `v = (v₁, v₂)`.
    fn eval(&self, x: &Point) -> Result<(f64, SymmetricMatrix, f64)> {
        let lmi = assemble_lmi(self.plant, self.k, &x.p, self.eta, x.lambda, self.rho)?;
        let eig = sym_eig(&lmi)?;
        let v = eig.top_vector();
        let n = self.plant.n();
        let (v1, v2) = v.split_at(n);
        let av1 = self.plant.a().mul_vec(v1);
        let bv2 = self.plant.b().mul_vec(v2);
        let kv1 = self.k.mul_vec(v1);
        // d/dP of vᵀMv: sym(2 v₁(Av₁)ᵀ) + 2η v₁v₁ᵀ + sym(2 v₁(Bv₂)ᵀ)
        let gp = SymmetricMatrix::from_fn(n, |i, j| {
            v1[i] * (av1[j] + bv2[j]) + v1[j] * (av1[i] + bv2[i]) + 2.0 * self.eta * v1[i] * v1[j]
        });
        let gl = 2.0 * matlin::dot(&kv1, v2) - 2.0 * self.rho * matlin::dot(v2, v2);
        Ok((eig.max(), gp, gl))
    }

    /// Euclidean projection onto `{P : P ⪰ εI, tr P = n} × {λ ≥ 0}`.
    fn project(&self, x: Point) -> Result<Point> {
        let n = x.p.dim();
        let eig = sym_eig(&x.p)?;
        let d = project_capped_simplex(&eig.eigenvalues, self.margin, n as f64);
        let v = &eig.eigenvectors;
        let p =
            SymmetricMatrix::from_fn(n, |i, j| (0..n).map(|k| v[(i, k)] * d[k] * v[(j, k)]).sum());
        Ok(Point {
            p,
            lambda: x.lambda.max(0.0),
        })
    }
}

/// Projects `d` onto `{y : yᵢ ≥ lo, Σ yᵢ = total}` by bisecting the shift.
fn project_capped_simplex(d: &[f64], lo: f64, total: f64) -> Vec<f64> {
    let sum_at = |tau: f64| d.iter().map(|&x| (x - tau).max(lo)).sum::<f64>();
    let mut a = d.iter().cloned().fold(f64::INFINITY, f64::min) - total;
    let mut b = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // sum_at is non-increasing in tau; sum_at(a) >= total >= sum_at(b)
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if sum_at(mid) > total {
            a = mid;
        } else {
            b = mid;
        }
        if b - a <= 1e-16 * (1.0 + b.abs()) {
            break;
        }
    }
    let tau = 0.5 * (a + b);
    let mut y: Vec<f64> = d.iter().map(|&x| (x - tau).max(lo)).collect();
    // remove the residual bisection error on the free coordinates
    let free: Vec<usize> = (0..y.len()).filter(|&i| y[i] > lo).collect();
    if !free.is_empty() {
        let corr = (total - y.iter().sum::<f64>()) / free.len() as f64;
        for i in free {
            y[i] = (y[i] + corr).max(lo);
        }
    }
    y
}

fn initial_point(plant: &LtiPlant, eta: f64) -> Point {
    let n = plant.n();
    let shifted = Matrix::from_fn(n, n, |i, j| {
        plant.a()[(i, j)] + if i == j { eta } else { 0.0 }
    });
    let p = solve_lyapunov(&shifted, &SymmetricMatrix::identity(n))
        .ok()
        .filter(|p| cholesky(p).is_ok())
        .map(|p| {
            let tr = p.trace();
            p.scale(n as f64 / tr)
        })
        .unwrap_or_else(|| SymmetricMatrix::identity(n));
    Point { p, lambda: 1.0 }
}

/// Searches for `(P, λ)` satisfying the LMI at fixed `η` and `ρ`.
pub fn find_certificate(
    plant: &LtiPlant,
    k: &Matrix,
    rho: f64,
    eta: f64,
    cfg: &CertSearchConfig,
) -> Result<Feasibility> {
    let start = initial_point(plant, eta);
    find_certificate_from(plant, k, rho, eta, cfg, start)
}

fn find_certificate_from(
    plant: &LtiPlant,
    k: &Matrix,
    rho: f64,
    eta: f64,
    cfg: &CertSearchConfig,
    start: Point,
) -> Result<Feasibility> {
    plant.check_gain(k)?;
    if !(eta > 0.0) || !(rho > 0.0) {
        return Err(Error::Precondition(format!(
            "need eta > 0 and rho > 0, got eta={eta}, rho={rho}"
        )));
    }
    cfg.validate()?;
    let prob = SpectralProblem {
        plant,
        k,
        eta,
        rho,
        margin: cfg.feas_margin,
    };

    let mut x = prob.project(start)?;
    let (f0, _, _) = prob.eval(&x)?;
    let mut best = x.clone();
    let mut f_best = f0;
    // target-level Polyak steps: aim at f_best - delta, shrink delta on stalls
    let mut delta = 0.5 * f0.abs().max(1e-3);
    let mut since_progress = 0usize;
    let mut window_start_best = f_best;

    for iter in 0..cfg.max_inner_iters {
        let (f, gp, gl) = prob.eval(&x)?;
        if f < f_best {
            if f <= f_best - 0.5 * delta {
                since_progress = 0;
            }
            f_best = f;
            best = x.clone();
        }
        if f_best <= FEASIBLE_THRESHOLD {
            return Ok(Feasibility::Feasible(LureCertificate {
                p: best.p,
                eta,
                lambda: best.lambda,
                rho,
                lmi_max_eig: f_best,
            }));
        }
        if (iter + 1) % STALL_WINDOW == 0 {
            let progress = window_start_best - f_best;
            if f_best > INFEASIBLE_THRESHOLD && progress <= 1e-3 * f_best {
                return Ok(Feasibility::Infeasible {
                    best_max_eig: f_best,
                });
            }
            window_start_best = f_best;
        }

        since_progress += 1;
        if since_progress > 20 {
            delta *= 0.5;
            since_progress = 0;
            x = best.clone();
            continue;
        }

        let gnorm2 = gp.inner(&gp) + gl * gl;
        if gnorm2 == 0.0 {
            // zero subgradient: x minimizes the objective
            return Ok(if f_best > INFEASIBLE_THRESHOLD {
                Feasibility::Infeasible {
                    best_max_eig: f_best,
                }
            } else {
                Feasibility::Inconclusive {
                    best_max_eig: f_best,
                }
            });
        }
        let target = f_best - delta;
        let step = (f - target) / gnorm2;
        x = prob.project(Point {
            p: x.p.add(&gp.scale(-step)),
            lambda: x.lambda - step * gl,
        })?;
    }
    Ok(Feasibility::Inconclusive {
        best_max_eig: f_best,
    })
}

/// Outcome of the rate maximization.
#[derive(Clone, Debug, PartialEq)]
pub enum RateSearch {
    Certified {
        eta_star: f64,
        cert: LureCertificate,
    },
    Infeasible {
        best_max_eig: f64,
    },
    Inconclusive {
        best_max_eig: f64,
    },
}

/// Bisection on `η` over `[eta_lo, eta_hi]`. Feasibility is monotone in `η`
/// because raising `η` adds `2ΔηP ⪰ 0` to the leading block. Rates whose
/// search is inconclusive are treated as not certified, so the returned
/// `eta_star` always carries a verified certificate.
pub fn max_contraction_rate(
    plant: &LtiPlant,
    k: &Matrix,
    rho: f64,
    cfg: &CertSearchConfig,
) -> Result<RateSearch> {
    cfg.validate()?;
    let lo_eta = cfg.eta_lo.max(f64::MIN_POSITIVE);
    let mut cert = match find_certificate(plant, k, rho, lo_eta, cfg)? {
        Feasibility::Feasible(c) => c,
        Feasibility::Infeasible { best_max_eig } => {
            return Ok(RateSearch::Infeasible { best_max_eig })
        }
        Feasibility::Inconclusive { best_max_eig } => {
            return Ok(RateSearch::Inconclusive { best_max_eig })
        }
    };
    let mut lo = lo_eta;
    let mut hi = cfg.eta_hi;
    while hi - lo > cfg.bisect_tol {
        let mid = 0.5 * (lo + hi);
        let start = Point {
            p: cert.p.clone(),
            lambda: cert.lambda,
        };
        let warm = find_certificate_from(plant, k, rho, mid, cfg, start)?;
        let res = match warm {
            Feasibility::Feasible(_) => warm,
            _ => find_certificate(plant, k, rho, mid, cfg)?,
        };
        match res {
            Feasibility::Feasible(c) => {
                lo = mid;
                cert = c;
            }
            _ => hi = mid,
        }
    }
    Ok(RateSearch::Certified { eta_star: lo, cert })
}

/// Largest sampled violation of `ρ‖Δφ‖² ≤ Δφᵀ Δy`; `≤ 0` means every pair
/// satisfies the cocoercivity inequality.
pub fn check_cocoercivity<F>(phi: F, rho: f64, sample_pairs: &[(Vec<f64>, Vec<f64>)]) -> Result<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    if sample_pairs.is_empty() {
        return Err(Error::Precondition("no sample pairs".into()));
    }
    let mut worst = f64::NEG_INFINITY;
    for (y1, y2) in sample_pairs {
        let du = matlin::sub(&phi(y1), &phi(y2));
        let dy = matlin::sub(y1, y2);
        let v = rho * matlin::dot(&du, &du) - matlin::dot(&du, &dy);
        worst = worst.max(v);
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionGapReport {
    pub max_gap: f64,
    pub worst_pair: (Vec<f64>, Vec<f64>),
    pub samples: usize,
}

/// Sampled contraction inequality:
/// `max (F(y₁) − F(y₂))ᵀP(y₁ − y₂) + η‖y₁ − y₂‖²_P` over the pairs.
pub fn contraction_gap<F>(
    field: F,
    p: &SymmetricMatrix,
    eta: f64,
    sample_pairs: &[(Vec<f64>, Vec<f64>)],
) -> Result<ContractionGapReport>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    if sample_pairs.is_empty() {
        return Err(Error::Precondition("no sample pairs".into()));
    }
    cholesky(p)?;
    let mut max_gap = f64::NEG_INFINITY;
    let mut worst_pair = sample_pairs[0].clone();
    for (y1, y2) in sample_pairs {
        if y1.len() != p.dim() || y2.len() != p.dim() {
            return Err(dim_mismatch(
                "contraction_gap sample",
                p.dim(),
                y1.len().max(y2.len()),
            ));
        }
        let dy = matlin::sub(y1, y2);
        let df = matlin::sub(&field(y1), &field(y2));
        let pdy = p.mul_vec(&dy);
        let gap = matlin::dot(&df, &pdy) + eta * matlin::dot(&dy, &pdy);
        if gap > max_gap {
            max_gap = gap;
            worst_pair = (y1.clone(), y2.clone());
        }
    }
    Ok(ContractionGapReport {
        max_gap,
        worst_pair,
        samples: sample_pairs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(a: f64, b: f64) -> LtiPlant {
        LtiPlant::new(
            Matrix::from_rows(&[[a]]).unwrap(),
            Matrix::from_rows(&[[b]]).unwrap(),
        )
        .unwrap()
    }

    fn m1(v: f64) -> Matrix {
        Matrix::from_rows(&[[v]]).unwrap()
    }

    fn s1(v: f64) -> SymmetricMatrix {
        SymmetricMatrix::from_diag(&[v])
    }

    #[test]
    fn assemble_scalar_cases() {
        let lmi = assemble_lmi(&scalar(-1.0, 0.0), &m1(0.0), &s1(1.0), 1.0, 0.0, 1.0).unwrap();
        assert_eq!(
            lmi.to_matrix().to_rows(),
            vec![vec![0.0, 0.0], vec![0.0, 0.0]]
        );

        let lmi = assemble_lmi(&scalar(-1.0, 1.0), &m1(-1.0), &s1(1.0), 0.5, 1.0, 1.0).unwrap();
        assert_eq!(
            lmi.to_matrix().to_rows(),
            vec![vec![-1.0, 0.0], vec![0.0, -2.0]]
        );
    }

    #[test]
    fn assemble_rate_too_high() {
        let plant = LtiPlant::new(Matrix::identity(2).scale(-1.0), Matrix::zeros(2, 1)).unwrap();
        let lmi = assemble_lmi(
            &plant,
            &Matrix::zeros(1, 2),
            &SymmetricMatrix::identity(2),
            2.0,
            0.0,
            1.0,
        )
        .unwrap();
        let m = lmi.to_matrix();
        assert_eq!(m[(0, 0)], 2.0);
        assert_eq!(m[(1, 1)], 2.0);
        assert!(!matlin::is_neg_semidefinite(&lmi, 0.0).unwrap().0);
    }

    #[test]
    fn assemble_rejects_bad_dims() {
        let plant = scalar(-1.0, 1.0);
        assert!(assemble_lmi(&plant, &Matrix::zeros(1, 2), &s1(1.0), 1.0, 0.0, 1.0).is_err());
        assert!(assemble_lmi(
            &plant,
            &m1(0.0),
            &SymmetricMatrix::identity(2),
            1.0,
            0.0,
            1.0
        )
        .is_err());
        assert!(assemble_lmi(&plant, &m1(0.0), &s1(1.0), 1.0, 0.0, 0.0).is_err());
    }

    fn cert(p: f64, eta: f64, lambda: f64) -> LureCertificate {
        LureCertificate {
            p: s1(p),
            eta,
            lambda,
            rho: 1.0,
            lmi_max_eig: 0.0,
        }
    }

    #[test]
    fn verify_scalar_cases() {
        let plant = scalar(-1.0, 0.0);
        assert!(
            verify_certificate(&plant, &m1(0.0), &cert(1.0, 1.0, 0.0), 1e-12)
                .unwrap()
                .valid
        );
        let v = verify_certificate(&plant, &m1(0.0), &cert(1.0, 2.0, 0.0), 1e-12).unwrap();
        assert!(!v.valid);
        assert_eq!(v.lmi_max_eig, 2.0);

        let plant = scalar(-1.0, 1.0);
        assert!(
            verify_certificate(&plant, &m1(-1.0), &cert(1.0, 1.0, 1.0), 1e-12)
                .unwrap()
                .valid
        );
        // negative multiplier and non-PD P are rejected
        assert!(
            !verify_certificate(&plant, &m1(-1.0), &cert(1.0, 0.5, -1.0), 1e-12)
                .unwrap()
                .valid
        );
        assert!(
            !verify_certificate(&plant, &m1(-1.0), &cert(-1.0, 0.5, 1.0), 1e-12)
                .unwrap()
                .valid
        );
    }

    #[test]
    fn find_scalar_feasible_and_infeasible() {
        let plant = scalar(-1.0, 1.0);
        let cfg = CertSearchConfig::for_plant(&plant);
        let f = find_certificate(&plant, &m1(-1.0), 1.0, 0.9, &cfg).unwrap();
        let c = f.certificate().expect("feasible at 0.9");
        assert!(
            verify_certificate(&plant, &m1(-1.0), c, default_verify_tol(&plant))
                .unwrap()
                .valid
        );
        let f = find_certificate(&plant, &m1(-1.0), 1.0, 1.1, &cfg).unwrap();
        assert!(matches!(f, Feasibility::Infeasible { .. }), "{f:?}");
    }

    #[test]
    fn find_decoupled_stable() {
        let plant = LtiPlant::new(Matrix::identity(3).scale(-1.0), Matrix::zeros(3, 2)).unwrap();
        let k = Matrix::zeros(2, 3);
        let cfg = CertSearchConfig::for_plant(&plant);
        let f = find_certificate(&plant, &k, 1.0, 0.99, &cfg).unwrap();
        let c = f.certificate().expect("feasible");
        assert!(
            verify_certificate(&plant, &k, c, default_verify_tol(&plant))
                .unwrap()
                .valid
        );
        // P stays at the identity for a scalar multiple of -I
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((c.p.get(i, j) - want).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn rate_scalar_lure() {
        let plant = scalar(-1.0, 1.0);
        let cfg = CertSearchConfig::for_plant(&plant);
        match max_contraction_rate(&plant, &m1(-1.0), 1.0, &cfg).unwrap() {
            RateSearch::Certified { eta_star, .. } => {
                assert!((eta_star - 1.0).abs() <= cfg.bisect_tol)
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rate_decoupled() {
        let plant = LtiPlant::new(Matrix::identity(2).scale(-2.0), Matrix::zeros(2, 1)).unwrap();
        let cfg = CertSearchConfig::for_plant(&plant);
        match max_contraction_rate(&plant, &Matrix::zeros(1, 2), 1.0, &cfg).unwrap() {
            RateSearch::Certified { eta_star, .. } => {
                assert!((eta_star - 2.0).abs() <= cfg.bisect_tol)
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rate_unstable_plant() {
        let plant = scalar(1.0, 0.0);
        let cfg = CertSearchConfig::for_plant(&plant);
        let r = max_contraction_rate(&plant, &m1(3.0), 1.0, &cfg).unwrap();
        assert!(matches!(r, RateSearch::Infeasible { .. }), "{r:?}");
    }

    #[test]
    fn cocoercivity_cases() {
        let pairs = vec![(vec![1.0], vec![0.0]), (vec![-2.0], vec![3.0])];
        assert_eq!(
            check_cocoercivity(|y| y.to_vec(), 1.0, &pairs).unwrap(),
            0.0
        );
        let v = check_cocoercivity(|y| vec![2.0 * y[0]], 1.0, &pairs[..1]).unwrap();
        assert_eq!(v, 2.0);
        assert!(check_cocoercivity(|y| y.to_vec(), 1.0, &[]).is_err());
    }

    #[test]
    fn gap_linear_fields() {
        let pairs = vec![
            (vec![1.0, 2.0], vec![-1.0, 0.5]),
            (vec![3.0, 0.0], vec![0.0, 0.0]),
        ];
        let p = SymmetricMatrix::identity(2);
        let r = contraction_gap(|y| y.iter().map(|v| -v).collect(), &p, 1.0, &pairs).unwrap();
        assert_eq!(r.max_gap, 0.0);
        assert_eq!(r.samples, 2);
        let r = contraction_gap(|y| y.to_vec(), &p, 0.5, &pairs).unwrap();
        assert!(r.max_gap > 0.0);
    }

    #[test]
    fn certificate_json_shape() {
        let c = LureCertificate {
            p: SymmetricMatrix::from_rows(&[[2.0, 0.5], [0.5, 1.0]]).unwrap(),
            eta: 0.25,
            lambda: 1.5,
            rho: 1.0,
            lmi_max_eig: -1e-3,
        };
        let v: serde_json::Value = serde_json::to_value(&c).unwrap();
        assert_eq!(v["P"], serde_json::json!([[2.0, 0.5], [0.5, 1.0]]));
        assert_eq!(v["eta"], 0.25);
        let back: LureCertificate = serde_json::from_value(v).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn capped_simplex_projection() {
        let y = project_capped_simplex(&[3.0, -1.0, 0.5], 1e-6, 3.0);
        assert!((y.iter().sum::<f64>() - 3.0).abs() < 1e-12);
        assert!(y.iter().all(|&v| v >= 1e-6));
        let y = project_capped_simplex(&[1.0, 1.0], 1e-6, 2.0);
        assert_eq!(y, vec![1.0, 1.0]);
    }
}
