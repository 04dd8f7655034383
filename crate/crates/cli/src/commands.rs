use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use pproj_core::closed_loop_sim::{self, lyapunov_fd_tol, trajectory_csv, StateFn};
use pproj_core::lure_cert::{
    default_verify_tol, max_contraction_rate, verify_certificate, RateSearch,
};
use pproj_core::matlin::{self, cholesky, Matrix};
use pproj_core::synthesis::{hurwitz_check, solve_care};
use pproj_core::{batch_simulate, check_safety, detect_equilibrium, fit_semiglobal_rate, Error};
use pproj_core::{LtiPlant, LureCertificate, Termination};
use serde::Serialize;

use crate::config::{self, CertifyConfig, LqrConfig, SearchSpec, SimulateConfig};
use crate::report::*;

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TXT: &str = "report.txt";
pub const CERTIFICATE_JSON: &str = "certificate.json";

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

fn plant_record(plant: &LtiPlant, k: &Matrix) -> PlantRecord {
    PlantRecord {
        a: plant.a().to_rows(),
        b: plant.b().to_rows(),
        k: k.to_rows(),
    }
}

fn certify_plant(
    plant: &LtiPlant,
    k: &Matrix,
    rho: f64,
    search: &SearchSpec,
) -> Result<(Certification, Option<LureCertificate>)> {
    if !(rho > 0.0) {
        bail!("field `rho`: must be > 0, got {rho}");
    }
    let cfg = search.resolve(plant)?;
    let outcome = max_contraction_rate(plant, k, rho, &cfg).context("certificate search")?;
    Ok(match outcome {
        RateSearch::Certified { eta_star, cert } => {
            let tol = default_verify_tol(plant);
            let v = verify_certificate(plant, k, &cert, tol).context("certificate verification")?;
            (
                Certification {
                    status: CertStatus::Certified,
                    rho,
                    eta_star: Some(eta_star),
                    best_max_eig: None,
                    verification: Some(Verification {
                        valid: v.valid,
                        lmi_max_eig: v.lmi_max_eig,
                        p_min_eig: v.p_min_eig,
                        tol,
                    }),
                },
                Some(cert),
            )
        }
        RateSearch::Infeasible { best_max_eig } | RateSearch::Inconclusive { best_max_eig } => {
            let status = if matches!(outcome, RateSearch::Infeasible { .. }) {
                CertStatus::Infeasible
            } else {
                CertStatus::Inconclusive
            };
            (
                Certification {
                    status,
                    rho,
                    eta_star: None,
                    best_max_eig: Some(best_max_eig),
                    verification: None,
                },
                None,
            )
        }
    })
}

fn finish(report: &mut RunReport, out: &Path) -> Result<Verdict> {
    report.verdict = report.derive_verdict();
    write(&out.join(REPORT_JSON), &report.to_json())?;
    // the saved table must not depend on where the run was written
    write(&out.join(REPORT_TXT), &report.table("run"))?;
    print!("{}", report.table(&out.display().to_string()));
    Ok(report.verdict)
}

pub fn certify(config_path: &Path, out: &Path) -> Result<Verdict> {
    let cfg: CertifyConfig = config::load(config_path)?;
    let (label, plant, k) = cfg.system.plant_and_gain()?;
    let (certification, cert) = certify_plant(&plant, &k, cfg.rho, &cfg.search)?;
    prepare_out(out)?;
    if let Some(c) = &cert {
        write(&out.join(CERTIFICATE_JSON), &pretty(c))?;
    }
    let mut report = RunReport::new("certify", label);
    report.plant = Some(plant_record(&plant, &k));
    report.certification = Some(certification);
    report.certificate = cert;
    finish(&mut report, out)
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("plain data");
    s.push('\n');
    s
}

pub fn simulate(config_path: &Path, out: &Path) -> Result<Verdict> {
    let cfg: SimulateConfig = config::load(config_path)?;
    let built = cfg.system.build()?;
    let sim = cfg.simulation.resolve()?;
    let sys = &built.system;
    let x0s = cfg.initial_conditions.resolve(sys.n())?;
    let checks = &cfg.checks;

    let mut report = RunReport::new("simulate", built.label.clone());
    report.plant = Some(plant_record(&sys.plant, &sys.controller.k));
    if checks.certify {
        let (certification, cert) =
            certify_plant(&sys.plant, &sys.controller.k, checks.rho, &checks.search)?;
        report.certification = Some(certification);
        report.certificate = cert;
    }
    prepare_out(out)?;
    if let Some(c) = &report.certificate {
        write(&out.join(CERTIFICATE_JSON), &pretty(c))?;
    }
    let chol = report
        .certificate
        .as_ref()
        .map(|c| cholesky(&c.p))
        .transpose()?;
    let fd_tol = lyapunov_fd_tol(sys, sim.dt);
    let h_fn: Option<StateFn<'_>> = built.barrier.as_ref().map(|b| &*b.h as StateFn<'_>);

    let runs = batch_simulate(sys, &x0s, &sim);
    for (index, (x0, run)) in x0s.iter().zip(runs).enumerate() {
        let mut s = TrajectorySummary {
            index,
            x0: x0.clone(),
            csv: None,
            error: None,
            termination: None,
            samples: 0,
            final_state: None,
            min_input_norm: None,
            envelope: None,
            lyapunov: None,
            equilibrium: None,
            rate_fit: None,
            safety: None,
            pass: false,
        };
        let tr = match run {
            Ok(tr) => tr,
            Err(e) => {
                s.error = Some(e.to_string());
                report.trajectories.push(s);
                continue;
            }
        };
        let name = format!("traj_{index:03}.csv");
        write(&out.join(&name), &trajectory_csv(&tr, chol.as_ref(), h_fn)?)?;
        s.csv = Some(name);
        s.termination = Some(tr.termination);
        s.samples = tr.len();
        s.final_state = Some(tr.final_state().to_vec());
        s.min_input_norm = tr
            .inputs
            .iter()
            .map(|u| matlin::norm2(u))
            .min_by(f64::total_cmp);
        if let Some(cert) = &report.certificate {
            let env = closed_loop_sim::check_decay_envelope(
                &tr,
                &cert.p,
                cert.eta,
                checks.envelope_slack,
            )?;
            s.envelope = Some(EnvelopeSummary {
                pass: env.pass,
                max_violation: env.max_violation,
                allowed: env.slack * env.x0_norm_p,
            });
            if tr.len() >= 3 {
                let ly = closed_loop_sim::check_lyapunov_decrease(&tr, &cert.p, cert.eta, fd_tol)?;
                s.lyapunov = Some(LyapunovSummary {
                    pass: ly.pass,
                    worst_slack: ly.worst_slack,
                    fd_tol,
                });
            }
        }
        if tr.termination == Termination::Completed {
            if let Some(eq) = detect_equilibrium(&tr, &sys.controller, checks.equilibrium_tol)? {
                s.equilibrium = Some(EquilibriumSummary {
                    point: eq.point,
                    is_origin: eq.is_origin,
                    input_norm: eq.input_norm,
                });
            }
        }
        if let (Some(eta), Some(eq)) = (built.semiglobal_eta, &s.equilibrium) {
            if eq.is_origin {
                match fit_semiglobal_rate(&tr, eta) {
                    Ok(fit) => {
                        let scaled = fit.m_fit * matlin::norm2(x0);
                        s.rate_fit = Some(RateFitSummary {
                            eta,
                            m_fit: fit.m_fit,
                            scaled,
                            bound: checks.m_bound,
                            pass: scaled.is_finite() && checks.m_bound.is_none_or(|b| scaled < b),
                        });
                    }
                    Err(Error::Precondition(_)) => {}
                    Err(e) => return Err(e.into()),
                }
            }
        }
        if let Some(b) = &built.barrier {
            let r = check_safety(&tr, |x| (b.h)(x), checks.safety_tol);
            s.safety = Some(SafetySummary {
                safe: r.safe,
                min_h: r.min_h,
                tol: checks.safety_tol,
            });
        }
        s.pass = s.derive_pass();
        report.trajectories.push(s);
    }
    finish(&mut report, out)
}

#[derive(Serialize)]
struct LqrOutput {
    #[serde(rename = "K")]
    k: Vec<Vec<f64>>,
    #[serde(rename = "X")]
    x: Vec<Vec<f64>>,
    residual: f64,
    residual_history: Vec<f64>,
    closed_loop_abscissa: f64,
}

pub fn lqr(config_path: &Path, out: &Path) -> Result<Verdict> {
    let cfg: LqrConfig = config::load(config_path)?;
    let (a, b, w) = cfg.build()?;
    let sol = match solve_care(&a, &b, &w) {
        Ok(s) => s,
        Err(Error::CareFailed {
            reason,
            residual_history,
        }) => {
            eprintln!("CARE failed: {reason} (residuals {residual_history:?})");
            return Ok(Verdict::Fail);
        }
        Err(e) => return Err(e).context("fields `A`/`B`/`Q`/`R`"),
    };
    let acl = &a + &(&b * &sol.k);
    let output = LqrOutput {
        k: sol.k.to_rows(),
        x: sol.x.to_matrix().to_rows(),
        residual: sol.residual,
        residual_history: sol.residual_history.clone(),
        closed_loop_abscissa: hurwitz_check(&acl, 1e-9).abscissa,
    };
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        prepare_out(parent)?;
    }
    write(out, &pretty(&output))?;
    println!("K = {:?}\nCARE residual {:.3e}", output.k, output.residual);
    Ok(Verdict::Pass)
}

pub fn report(dirs: &[PathBuf]) -> Result<Verdict> {
    if dirs.is_empty() {
        bail!("no report directories given");
    }
    let mut overall = Verdict::Pass;
    for dir in dirs {
        let path = dir.join(REPORT_JSON);
        let text =
            fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let mut rep: RunReport =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let mut verdict = rep.derive_verdict();
        if let (Some(p), Some(cert)) = (&rep.plant, &rep.certificate) {
            let plant = LtiPlant::new(config::matrix("A", &p.a)?, config::matrix("B", &p.b)?)
                .with_context(|| format!("plant in {}", path.display()))?;
            let k = config::matrix("K", &p.k)?;
            let v = verify_certificate(&plant, &k, cert, default_verify_tol(&plant))
                .with_context(|| format!("certificate in {}", path.display()))?;
            if !v.valid {
                eprintln!(
                    "{}: stored certificate does not re-verify (lmi max eig {:.3e})",
                    path.display(),
                    v.lmi_max_eig
                );
                verdict = Verdict::Fail;
            }
        }
        rep.verdict = verdict;
        print!("{}", rep.table(&dir.display().to_string()));
        overall = overall.combine(verdict);
    }
    Ok(overall)
}
