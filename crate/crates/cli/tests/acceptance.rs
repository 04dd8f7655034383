//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL
//! line each, and exits non-zero if any criterion fails. All tolerances,
//! seeds, grids and runtime budgets are fixed below.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use pproj_core::closed_loop_sim::{
    check_decay_envelope, check_lyapunov_decrease, lyapunov_fd_tol, EQUILIBRIUM_TOL,
};
use pproj_core::lure_cert::{
    check_cocoercivity, contraction_gap, find_certificate, max_contraction_rate,
    verify_certificate, CertSearchConfig, Feasibility, RateSearch,
};
use pproj_core::matlin::{self, Matrix};
use pproj_core::param_proj::{ConstraintFamily, ProjectionController};
use pproj_core::synthesis::{
    care_residual, example1_setup, example2_barrier, example2_system, gaussian_bound, hurwitz_check,
};
use pproj_core::{
    batch_simulate, check_safety, detect_equilibrium, eval_controller, fit_semiglobal_rate,
    integrate, solve_care, ClosedLoopSystem, LqrWeights, LtiPlant, LureCertificate, SimConfig,
    SplitMix64, Termination, Trajectory,
};

const RHO: f64 = 1.0;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

/// A certified `(A, B, K)` with the input dimension used for its
/// saturation family in the contraction-gap check.
struct Certified {
    name: String,
    plant: LtiPlant,
    k: Matrix,
    cert: LureCertificate,
}

fn certified_rate(plant: &LtiPlant, k: &Matrix) -> Option<(f64, LureCertificate)> {
    let cfg = CertSearchConfig::for_plant(plant);
    match max_contraction_rate(plant, k, RHO, &cfg).expect("rate search runs") {
        RateSearch::Certified { eta_star, cert } => Some((eta_star, cert)),
        _ => None,
    }
}

fn within(budget_s: f64, elapsed: Duration) -> (bool, String) {
    let s = elapsed.as_secs_f64();
    (s < budget_s, format!("{s:.2} s / {budget_s} s"))
}

// 1. scalar a = -1, b = 1, k = -1: the worst slope s ∈ [0, 1] of the
// projection gives ẋ = -(1 + s)x, so the uniform rate is 1.
fn criterion_1(certified: &mut Vec<Certified>) -> Outcome {
    let t = Instant::now();
    let plant = LtiPlant::new(
        Matrix::from_rows(&[[-1.0]]).unwrap(),
        Matrix::from_rows(&[[1.0]]).unwrap(),
    )
    .unwrap();
    let k = Matrix::from_rows(&[[-1.0]]).unwrap();
    let Some((eta, cert)) = certified_rate(&plant, &k) else {
        return Outcome::new(false, "scalar system not certified");
    };
    let (fast, time) = within(5.0, t.elapsed());
    let close = (eta - 1.0).abs() <= 2e-3;
    certified.push(Certified {
        name: "scalar".into(),
        plant,
        k,
        cert,
    });
    Outcome::new(
        close && fast,
        format!("eta* = {eta:.6} (|eta* - 1| <= 2e-3: {close}); {time}"),
    )
}

/// `A = N − (abscissa(N) + margin)·I` is Hurwitz with a random spectrum;
/// `(A, B)` is stabilizable whenever the CARE succeeds.
fn random_system(rng: &mut SplitMix64) -> (LtiPlant, Matrix) {
    loop {
        let n = 1 + (rng.next_u64() % 4) as usize;
        let m = 1 + (rng.next_u64() % 2) as usize;
        let nmat = Matrix::from_fn(n, n, |_, _| rng.standard_normal());
        let shift = hurwitz_check(&nmat, 1e-9).abscissa + rng.uniform(0.1, 1.0);
        let a = Matrix::from_fn(n, n, |i, j| nmat[(i, j)] - if i == j { shift } else { 0.0 });
        let b = Matrix::from_fn(n, m, |_, _| rng.standard_normal());
        if let Ok(care) = solve_care(&a, &b, &LqrWeights::identity(n, m)) {
            return (LtiPlant::new(a, b).unwrap(), care.k);
        }
    }
}

// 2. certificate soundness and monotonicity in eta on 20 random systems
fn criterion_2(certified: &mut Vec<Certified>) -> Outcome {
    let t = Instant::now();
    let mut rng = SplitMix64::new(2024);
    let grid = [0.25, 0.5, 0.75, 1.0, 1.25];
    let mut checked = 0;
    let mut failures = Vec::new();
    let mut no_cert = 0;
    for sys in 0..20 {
        let (plant, k) = random_system(&mut rng);
        let cfg = CertSearchConfig::for_plant(&plant);
        let Some((eta_star, cert)) = certified_rate(&plant, &k) else {
            no_cert += 1;
            continue;
        };
        let mut certs = vec![cert.clone()];
        let mut feasible = Vec::new();
        for g in grid {
            match find_certificate(&plant, &k, RHO, g * eta_star, &cfg).unwrap() {
                Feasibility::Feasible(c) => {
                    feasible.push(true);
                    certs.push(c);
                }
                _ => feasible.push(false),
            }
        }
        for c in &certs {
            checked += 1;
            let v = verify_certificate(&plant, &k, c, 1e-8).unwrap();
            if !v.valid {
                failures.push(format!(
                    "system {sys}: certificate at eta {} fails (lmi {:.2e})",
                    c.eta, v.lmi_max_eig
                ));
            }
        }
        // success at a grid point implies success at every smaller one
        if let Some(last) = feasible.iter().rposition(|&f| f) {
            if feasible[..last].iter().any(|&f| !f) {
                failures.push(format!(
                    "system {sys}: non-monotone feasibility {feasible:?}"
                ));
            }
        }
        certified.push(Certified {
            name: format!("random {sys} (n={}, m={})", plant.n(), plant.m()),
            plant,
            k,
            cert,
        });
    }
    let (fast, time) = within(60.0, t.elapsed());
    let pass = failures.is_empty() && fast;
    let mut detail = format!(
        "{checked} certificates verified at 1e-8 across {} certified systems ({no_cert} without certificate); {time}",
        20 - no_cert
    );
    for f in failures.iter().take(3) {
        detail.push_str("; ");
        detail.push_str(f);
    }
    Outcome::new(pass, detail)
}

fn random_pairs(
    rng: &mut SplitMix64,
    dim: usize,
    radius: f64,
    count: usize,
) -> Vec<(Vec<f64>, Vec<f64>)> {
    (0..count)
        .map(|_| (rng.in_ball(dim, radius), rng.in_ball(dim, radius)))
        .collect()
}

/// Bounded polygon-like polytope in R³ whose facets turn with the state.
fn moving_polytope() -> ConstraintFamily {
    let normals = |x: &[f64]| {
        let mut rows = Vec::new();
        for s in 0..8 {
            let sg = |bit: usize| if s >> bit & 1 == 1 { 1.0 } else { -1.0 };
            rows.push(vec![
                sg(0) + 0.3 * x[0].sin(),
                sg(1) + 0.3 * x[1].cos(),
                sg(2),
            ]);
        }
        Matrix::from_rows(&rows).unwrap()
    };
    ConstraintFamily::affine(normals, |x: &[f64]| {
        (0..8)
            .map(|i| 1.0 + 0.5 * (x[0] + i as f64).sin())
            .collect()
    })
}

// 3. cocoercivity with rho = 1 of each family's projection
fn criterion_3() -> Outcome {
    let t = Instant::now();
    let mut rng = SplitMix64::new(3);
    let pairs_per_state = 10_000;
    let mut worst: Vec<(String, f64)> = Vec::new();

    let e1 = example1_setup(42).unwrap().system().controller;
    let e2 = example2_system().controller;
    let h = example2_barrier().h;
    let poly = ProjectionController::new(Matrix::zeros(3, 2), moving_polytope());
    let cases: [(&str, &ProjectionController, usize); 3] = [
        ("box", &e1, 3),
        ("halfspace+box", &e2, 2),
        ("polyhedron", &poly, 2),
    ];
    for (name, ctrl, n) in cases {
        let mut states = Vec::new();
        while states.len() < 20 {
            let x = if name == "halfspace+box" {
                vec![rng.uniform(-6.0, 6.0), rng.uniform(-2.0, 10.0)]
            } else {
                rng.in_ball(n, 2.5)
            };
            if name != "halfspace+box" || h(&x) > 0.05 {
                states.push(x);
            }
        }
        let mut w = f64::NEG_INFINITY;
        for x in &states {
            let pairs = random_pairs(&mut rng, ctrl.m(), 10.0, pairs_per_state);
            let phi = |z: &[f64]| ctrl.project(x, z).expect("projection").u;
            w = w.max(check_cocoercivity(phi, 1.0, &pairs).unwrap());
        }
        worst.push((name.into(), w));
    }
    let (fast, time) = within(10.0, t.elapsed());
    let ok = worst.iter().all(|(_, w)| *w <= 1e-9);
    let parts: Vec<String> = worst.iter().map(|(n, w)| format!("{n} {w:.2e}")).collect();
    Outcome::new(
        ok && fast,
        format!(
            "max violation over 20 states x {pairs_per_state} pairs: {} (limit 1e-9); {time}",
            parts.join(", ")
        ),
    )
}

// 4. seeded saturated-control instance, certified envelope and Lyapunov decrease
fn criterion_4(certified: &mut Vec<Certified>) -> Outcome {
    let t = Instant::now();
    let e1 = example1_setup(42).unwrap();
    let plant = e1.plant();
    let Some((eta, cert)) = certified_rate(&plant, e1.k()) else {
        return Outcome::new(false, format!("seed {} instance not certified", e1.seed));
    };
    let sys = e1.system();
    let mut rng = SplitMix64::new(42);
    let x0s: Vec<Vec<f64>> = (0..10).map(|_| rng.normal_vec(3, 2.0)).collect();
    let cfg = SimConfig {
        dt: 1e-3,
        horizon: 15.0,
        blowup_norm: 1e8,
    };
    let fd_tol = lyapunov_fd_tol(&sys, cfg.dt);
    let mut completed = 0;
    let mut env_ok = 0;
    let mut lyap_ok = 0;
    let mut worst_env = f64::NEG_INFINITY;
    for run in batch_simulate(&sys, &x0s, &cfg) {
        let Ok(tr) = run else { continue };
        completed += usize::from(tr.termination == Termination::Completed);
        let env = check_decay_envelope(&tr, &cert.p, eta, 1e-6).unwrap();
        worst_env = worst_env.max(env.max_violation / env.x0_norm_p);
        env_ok += usize::from(env.pass);
        lyap_ok += usize::from(
            check_lyapunov_decrease(&tr, &cert.p, eta, fd_tol)
                .unwrap()
                .pass,
        );
    }
    let (fast, time) = within(120.0, t.elapsed());
    let pass = eta > 0.0 && completed == 10 && env_ok == 10 && lyap_ok == 10 && fast;
    certified.push(Certified {
        name: format!("example1 seed {}", e1.seed),
        plant,
        k: e1.k().clone(),
        cert,
    });
    Outcome::new(
        pass,
        format!(
            "instance seed {} (requested 42), eta* = {eta:.4}; completed {completed}/10, envelope {env_ok}/10 \
             (worst relative violation {worst_env:.2e}, slack 1e-6), Lyapunov {lyap_ok}/10 (fd_tol {fd_tol:.2e}); {time}",
            e1.seed
        ),
    )
}

/// Twelve points on the circle of radius 5 around the obstacle centre
/// (0, 4), every 30 degrees starting on the positive x₁ axis.
fn example2_grid() -> Vec<Vec<f64>> {
    (0..12)
        .map(|i| {
            let th = i as f64 * std::f64::consts::PI / 6.0;
            vec![5.0 * th.cos(), 4.0 + 5.0 * th.sin()]
        })
        .collect()
}

fn input_norms(sys: &ClosedLoopSystem, tr: &Trajectory) -> Vec<f64> {
    tr.states
        .iter()
        .map(|x| matlin::norm2(&eval_controller(&sys.controller, x).unwrap().u))
        .collect()
}

/// Bisection on the angle of a start on the radius-4 circle between runs
/// that pass the obstacle on opposite sides; the limit lies on the stable
/// manifold of the boundary equilibrium. Returns the closest approach
/// `min ‖u*‖` away from the origin and the final classification.
fn boundary_saddle_probe(sys: &ClosedLoopSystem, cfg: &SimConfig) -> String {
    let start = |th: f64| vec![4.0 * th.cos(), 4.0 + 4.0 * th.sin()];
    let side = |th: f64| {
        let tr = integrate(sys, &start(th), cfg).unwrap();
        tr.states
            .iter()
            .find(|x| x[1] < 4.0)
            .map_or(0.0, |x| x[0].signum())
    };
    let (mut lo, mut hi) = (0.0_f64, 1.5_f64);
    let s_lo = side(lo);
    if side(hi) == s_lo {
        return "no side change bracketed".into();
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if side(mid) == s_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tr = integrate(sys, &start(lo), cfg).unwrap();
    let h = example2_barrier().h;
    let norms = input_norms(sys, &tr);
    let (k, closest) = tr
        .states
        .iter()
        .zip(&norms)
        .enumerate()
        .filter(|(_, (x, _))| matlin::norm2(x) > 1.0)
        .map(|(k, (_, u))| (k, *u))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let eq = detect_equilibrium(&tr, &sys.controller, EQUILIBRIUM_TOL).unwrap();
    format!(
        "stable-manifold probe from angle {lo:.15} on radius 4: closest approach |u*| = {closest:.2e} at t = {:.2}, \
         x = ({:.4}, {:.4}), h = {:.2e}; final state {}",
        tr.times[k],
        tr.states[k][0],
        tr.states[k][1],
        h(&tr.states[k]),
        match eq {
            Some(e) if e.is_origin => "at the origin".to_string(),
            Some(_) => "at a non-origin equilibrium".to_string(),
            None => "not settled".to_string(),
        }
    )
}

// 5. obstacle-avoiding single integrator: safety, convergence to the
// equilibrium set, semi-global rate, boundary equilibrium
fn criterion_5() -> Outcome {
    let t = Instant::now();
    let sys = example2_system();
    let h = example2_barrier().h;
    let eta = (3.0 - 2f64.sqrt()) / 2.0;
    let cfg = SimConfig {
        dt: 1e-3,
        horizon: 40.0,
        blowup_norm: 1e8,
    };
    let grid = example2_grid();
    let runs: Vec<Trajectory> = batch_simulate(&sys, &grid, &cfg)
        .into_iter()
        .map(|r| r.unwrap())
        .collect();

    let min_h = runs
        .iter()
        .map(|tr| check_safety(tr, |x| h(x), 1e-6))
        .fold(f64::INFINITY, |m, r| m.min(r.min_h));
    let a = min_h >= -1e-6;

    let reached: Vec<bool> = runs
        .iter()
        .map(|tr| input_norms(&sys, tr).iter().any(|&u| u <= 1e-6))
        .collect();
    let b = reached.iter().all(|&r| r);

    let mut origin_runs = 0;
    let mut worst_scaled = 0.0_f64;
    let mut c = true;
    let mut boundary = Vec::new();
    for (x0, tr) in grid.iter().zip(&runs) {
        match detect_equilibrium(tr, &sys.controller, EQUILIBRIUM_TOL).unwrap() {
            Some(e) if e.is_origin => {
                origin_runs += 1;
                let fit = fit_semiglobal_rate(tr, eta).unwrap();
                let scaled = fit.m_fit * matlin::norm2(x0);
                worst_scaled = worst_scaled.max(scaled);
                c &= fit.m_fit.is_finite() && scaled < 1000.0;
            }
            Some(e) if h(&e.point).abs() <= 1e-3 => boundary.push(e.point),
            _ => {}
        }
    }
    let d = !boundary.is_empty();
    let probe = if d {
        String::new()
    } else {
        format!(" [{}]", boundary_saddle_probe(&sys, &cfg))
    };
    let (fast, time) = within(120.0, t.elapsed());
    Outcome::new(
        a && b && c && d && fast,
        format!(
            "(a) min h = {min_h:.3e} >= -1e-6: {a}; (b) |u*| <= 1e-6 reached on {}/12: {b}; \
             (c) {origin_runs} origin runs, max M_fit*|x0| = {worst_scaled:.1} < 1000: {c}; \
             (d) boundary equilibria found: {}: {d}{probe}; {time}",
            reached.iter().filter(|&&r| r).count(),
            boundary.len()
        ),
    )
}

// 6. CARE: scalar closed form and the three-state instance
fn criterion_6() -> Outcome {
    let t = Instant::now();
    let mut rng = SplitMix64::new(6);
    let mut worst = 0.0_f64;
    for _ in 0..50 {
        let a = rng.uniform(-2.0, 2.0);
        let b = rng.uniform(0.5, 2.0) * if rng.next_f64() < 0.5 { -1.0 } else { 1.0 };
        let q = rng.uniform(0.5, 2.0);
        let r = rng.uniform(0.5, 2.0);
        // 2aX − X²b²/r + q = 0, stabilizing root
        let x_star = r * (a + (a * a + b * b * q / r).sqrt()) / (b * b);
        let k_star = -b * x_star / r;
        let w = LqrWeights::new(
            pproj_core::SymmetricMatrix::from_diag(&[q]),
            pproj_core::SymmetricMatrix::from_diag(&[r]),
        )
        .unwrap();
        let sol = solve_care(
            &Matrix::from_rows(&[[a]]).unwrap(),
            &Matrix::from_rows(&[[b]]).unwrap(),
            &w,
        )
        .unwrap();
        worst = worst
            .max((sol.x.get(0, 0) - x_star).abs())
            .max((sol.k[(0, 0)] - k_star).abs());
    }
    let scalar_ok = worst <= 1e-10;
    let e1 = example1_setup(42).unwrap();
    let res = care_residual(&e1.a, &e1.b, &LqrWeights::identity(3, 2), &e1.care.x).unwrap();
    let acl = &e1.a + &(&e1.b * e1.k());
    let hw = hurwitz_check(&acl, 1e-6);
    let (fast, time) = within(10.0, t.elapsed());
    Outcome::new(
        scalar_ok && res <= 1e-8 && hw.hurwitz && fast,
        format!(
            "scalar max error {worst:.2e} (limit 1e-10); three-state residual {res:.2e} (limit 1e-8), \
             A+BK Hurwitz {} (abscissa {:.3}); {time}",
            hw.hurwitz, hw.abscissa
        ),
    )
}

// 7. sampled contraction of the frozen-constraint closed loop of every
// certified system
fn criterion_7(certified: &[Certified]) -> Outcome {
    let t = Instant::now();
    let mut rng = SplitMix64::new(7);
    let mut worst = f64::NEG_INFINITY;
    let mut worst_name = String::new();
    for c in certified {
        let (n, m) = (c.plant.n(), c.plant.m());
        let ctrl =
            ProjectionController::new(c.k.clone(), ConstraintFamily::state_box(gaussian_bound(m)));
        for _ in 0..5 {
            let z = rng.in_ball(n, 2.0);
            let field = |y: &[f64]| {
                let u = ctrl.project(&z, &c.k.mul_vec(y)).unwrap().u;
                matlin::add(&c.plant.a().mul_vec(y), &c.plant.b().mul_vec(&u))
            };
            let pairs = random_pairs(&mut rng, n, 10.0, 10_000);
            let gap = contraction_gap(field, &c.cert.p, c.cert.eta, &pairs)
                .unwrap()
                .max_gap;
            if gap > worst {
                worst = gap;
                worst_name = c.name.clone();
            }
        }
    }
    let (fast, time) = within(30.0, t.elapsed());
    Outcome::new(
        !certified.is_empty() && worst <= 1e-7 && fast,
        format!(
            "{} systems x 5 frozen z x 10000 pairs, max gap {worst:.2e} ({worst_name}) (limit 1e-7); {time}",
            certified.len()
        ),
    )
}

fn run_cli(args: &[&str]) -> i32 {
    let status = Command::new(env!("CARGO_BIN_EXE_pproj"))
        .args(args)
        .stdout(std::process::Stdio::null())
        .stderr(std::process::Stdio::null())
        .status()
        .expect("launching pproj");
    status.code().unwrap_or(-1)
}

fn dir_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

// 8. identical CLI runs give byte-identical outputs
fn criterion_8() -> Outcome {
    let t = Instant::now();
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let tmp = tempfile::tempdir().unwrap();
    let mut compared = 0;
    let mut mismatched = Vec::new();
    for (cmd, cfg) in [
        ("certify", "scalar_certify.json"),
        ("simulate", "example1_simulate.json"),
    ] {
        let cfg = configs.join(cfg);
        let outs: Vec<_> = (0..2)
            .map(|i| tmp.path().join(format!("{cmd}-{i}")))
            .collect();
        for out in &outs {
            let code = run_cli(&[
                cmd,
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
            ]);
            if code != 0 {
                return Outcome::new(false, format!("pproj {cmd} exited with {code}"));
            }
        }
        let (a, b) = (dir_files(&outs[0]), dir_files(&outs[1]));
        if a.len() != b.len() {
            mismatched.push(format!("{cmd}: file sets differ"));
        }
        for ((na, ca), (nb, cb)) in a.iter().zip(&b) {
            compared += 1;
            if na != nb || ca != cb {
                mismatched.push(format!("{cmd}/{na}"));
            }
        }
    }
    let kinds_ok = compared > 0;
    Outcome::new(
        kinds_ok && mismatched.is_empty(),
        format!(
            "{compared} output files compared (CSV and JSON), mismatches: {mismatched:?}; {:.2} s",
            t.elapsed().as_secs_f64()
        ),
    )
}

fn main() {
    let mut certified = Vec::new();
    let mut results: Vec<(usize, Outcome)> = Vec::new();
    let mut record = |i: usize, o: Outcome| {
        println!(
            "criterion {i}: {} | {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((i, o));
    };
    record(1, criterion_1(&mut certified));
    record(2, criterion_2(&mut certified));
    record(3, criterion_3());
    record(4, criterion_4(&mut certified));
    record(5, criterion_5());
    record(6, criterion_6());
    record(7, criterion_7(&certified));
    record(8, criterion_8());
    let failed: Vec<usize> = results
        .iter()
        .filter(|(_, o)| !o.pass)
        .map(|(i, _)| *i)
        .collect();
    println!(
        "acceptance: {}/{} criteria pass{}",
        results.len() - failed.len(),
        results.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!("; failing: {failed:?}")
        }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
