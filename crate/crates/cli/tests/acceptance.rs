//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rfs_swarm::sim::nearest_target;
use rfs_swarm::{
    build_case, cost, cost_and_gradient, linspace, minimize, phd_predict, phd_update, product_integral, run_scenario,
    surface_grid, surface_with_gradient, Component, CostKind, Dynamics, HorizonProblem, Mixture, Mpc, Optimizer, Phd,
    Plan, ScenarioOverrides, TrajectoryLog, MeasurementSet,
};

type Outcome = Result<String, String>;

fn run_case(case: u32, grid: Option<f64>) -> TrajectoryLog {
    let o = ScenarioOverrides {
        initial_grid: grid,
        ..ScenarioOverrides::default()
    };
    run_scenario(&build_case(case, &o).expect("built-in case")).expect("scenario run")
}

fn fmt(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.4}")).collect();
    format!("[{}]", parts.join(", "))
}

fn all_monotone(log: &TrajectoryLog) -> bool {
    log.solves.iter().all(|s| s.monotone && s.objective_after <= s.objective_before)
}

fn case2_convergence() -> Outcome {
    let start = Instant::now();
    let log = run_case(2, None);
    let secs = start.elapsed().as_secs_f64();
    let s = build_case(2, &ScenarioOverrides::default()).unwrap();
    let last = log.component_means.last().unwrap();
    let mut nearest: Vec<usize> = last.iter().map(|m| nearest_target(m, &s.target_mixture).0).collect();
    let errors = &log.final_errors;
    let detail = format!("final errors {} in {secs:.1} s", fmt(errors));
    nearest.sort_unstable();
    nearest.dedup();
    if errors.iter().all(|&e| e <= 0.1) && nearest.len() == 4 && secs <= 60.0 && all_monotone(&log) {
        Ok(detail)
    } else {
        Err(format!("{detail}, {} distinct targets", nearest.len()))
    }
}

fn case1_dichotomy() -> Outcome {
    let far = run_case(1, None).final_errors;
    let near = run_case(1, Some(1.5)).final_errors;
    let detail = format!("far {} near {}", fmt(&far), fmt(&near));
    if far.iter().any(|&e| e > 0.5) && near.iter().all(|&e| e <= 0.2) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn case3_sharing() -> Outcome {
    let log = run_case(3, None);
    let s = build_case(3, &ScenarioOverrides::default()).unwrap();
    let targets = &s.target_mixture;
    let last = log.component_means.last().unwrap();
    let errors = &log.final_errors;
    // A density equidistant (to 1e-9) from two targets has no single nearest one.
    let mut assignment = Vec::new();
    for m in last {
        let d: Vec<f64> = targets.iter().map(|t| ((m[0] - t.mean()[0]).powi(2) + (m[1] - t.mean()[1]).powi(2)).sqrt()).collect();
        let best = d.iter().cloned().fold(f64::INFINITY, f64::min);
        let ties: Vec<usize> = (0..d.len()).filter(|&j| d[j] - best <= 1e-9).collect();
        assignment.push(ties);
    }
    let pos: Vec<String> = last.iter().map(|m| format!("({:.3}, {:.3})", m[0], m[1])).collect();
    let detail = format!("final means {} errors {}", pos.join(" "), fmt(errors));
    if assignment.iter().any(|t| t.len() > 1) {
        return Err(format!("{detail}; a density is equidistant from two targets"));
    }
    let nearest: Vec<usize> = assignment.iter().map(|t| t[0]).collect();
    let shared: Vec<usize> = (0..targets.len()).filter(|&j| nearest.iter().filter(|&&n| n == j).count() == 2).collect();
    let crowded = (0..targets.len()).any(|j| nearest.iter().filter(|&&n| n == j).count() > 2);
    if shared.len() != 1 || crowded {
        return Err(format!("{detail}; nearest targets {nearest:?}"));
    }
    let pair: Vec<usize> = (0..nearest.len()).filter(|&i| nearest[i] == shared[0]).collect();
    let (a, b) = (pair[0], pair[1]);
    let gap = ((last[a][0] - last[b][0]).powi(2) + (last[a][1] - last[b][1]).powi(2)).sqrt();
    let unshared_max = (0..nearest.len()).filter(|i| !pair.contains(i)).map(|i| errors[i]).fold(0.0, f64::max);
    let ok = errors[a] > 0.05 && errors[b] > 0.05 && gap > 0.05 && errors[a].min(errors[b]) > unshared_max;
    let detail = format!("{detail}; densities {} and {} share target {}, gap {gap:.4}", a + 1, b + 1, shared[0] + 1);
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn case4_bias() -> Outcome {
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let c4 = mean(&run_case(4, None).final_errors);
    let c2 = mean(&run_case(2, None).final_errors);
    let detail = format!("mean final error case 4 {c4:.6} vs case 2 {c2:.6}");
    if c4 > c2 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn surface_structure() -> Outcome {
    let s = build_case(2, &ScenarioOverrides::default()).unwrap();
    let (f, g) = (&s.initial_mixture, &s.target_mixture);
    let axis = linspace(-4.0, 4.0, 81);
    let mut notes = Vec::new();
    let mut ok = true;

    // (a) With the swept density on top of another initial density, CS is
    // higher than at the mirror-image spot with nothing there (its own,
    // vacated start); that excess is the hill and must stay small relative
    // to the relief of the surface.
    let cs = surface_grid(CostKind::CauchySchwarz, f, g, 0, &axis, &axis).unwrap();
    let relief = cs.max() - cs.min();
    let at = |x: f64, y: f64| surface_grid(CostKind::CauchySchwarz, f, g, 0, &[x], &[y]).unwrap()[(0, 0)];
    let own = at(3.0, 3.0);
    let hills: Vec<f64> = [(-3.0, 3.0), (-3.0, -3.0), (3.0, -3.0)].iter().map(|&(x, y)| at(x, y) - own).collect();
    let shallow = hills.iter().all(|&h| h > 0.0 && h <= 0.1 * relief);
    ok &= shallow;
    notes.push(format!("(a) hills {} vs relief {relief:.2}", fmt(&hills)));

    // (b) Gradient magnitude over the outer ring of the grid.
    let ring_max = |kind| {
        let (_, grad) = surface_with_gradient(kind, f, g, 0, &axis, &axis, true).unwrap();
        let n = axis.len();
        let mut best: f64 = 0.0;
        for r in 0..n {
            for c in 0..n {
                let edge = r == 0 || c == 0 || r == n - 1 || c == n - 1;
                if edge && axis[c].hypot(axis[r]) >= 3.0 {
                    best = best.max(grad[(r, c)]);
                }
            }
        }
        best
    };
    let (l2, quad) = (ring_max(CostKind::L2), ring_max(CostKind::L2Quadratic));
    ok &= 10.0 * l2 <= quad;
    notes.push(format!("(b) ring max |grad| L2 {l2:.3e} vs L2Quad {quad:.3e}"));

    // (c) Walking straight from each boundary cell to its nearest target.
    let n = axis.len();
    let mut worst_rise: f64 = f64::NEG_INFINITY;
    let mut boundary = Vec::new();
    for i in 0..n {
        boundary.extend([(axis[i], axis[0]), (axis[i], axis[n - 1]), (axis[0], axis[i]), (axis[n - 1], axis[i])]);
    }
    for &(bx, by) in &boundary {
        let (j, _) = nearest_target(&DVector::from_vec(vec![bx, by, 0.0, 0.0]), g);
        let (tx, ty) = (g.components()[j].mean()[0], g.components()[j].mean()[1]);
        let ts = linspace(0.0, 1.0, 60);
        let xs: Vec<f64> = ts.iter().map(|t| bx + t * (tx - bx)).collect();
        let ys: Vec<f64> = ts.iter().map(|t| by + t * (ty - by)).collect();
        let mut prev = f64::INFINITY;
        for k in 0..ts.len() {
            let v = surface_grid(CostKind::L2Quadratic, f, g, 0, &xs[k..=k], &ys[k..=k]).unwrap()[(0, 0)];
            worst_rise = worst_rise.max(v - prev);
            prev = v;
        }
    }
    ok &= worst_rise <= 0.0;
    notes.push(format!("(c) largest step-to-step change walking to a target {worst_rise:.3e}"));

    let detail = notes.join("; ");
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_spd(r: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| r.random_range(-1.0..1.0));
    let q = a.qr().q();
    let d = DMatrix::from_diagonal(&DVector::from_fn(n, |_, _| r.random_range(lo..hi)));
    let m = &q * d * q.transpose();
    (&m + m.transpose()) * 0.5
}

fn random_mixture(r: &mut ChaCha8Rng, k: usize, n: usize) -> Mixture {
    Mixture::new(
        (0..k)
            .map(|_| {
                let w = r.random_range(0.3..2.0);
                let m = DVector::from_fn(n, |_, _| r.random_range(-1.0..1.0));
                Component::new(w, m, random_spd(r, n, 0.3, 1.5)).unwrap()
            })
            .collect(),
    )
    .unwrap()
}

fn central(mut f: impl FnMut(&DVector<f64>) -> f64, x: &DVector<f64>) -> DVector<f64> {
    let mut g = DVector::zeros(x.len());
    let mut xp = x.clone();
    for i in 0..x.len() {
        let h = 1e-6 * (1.0 + x[i].abs());
        xp[i] = x[i] + h;
        let up = f(&xp);
        xp[i] = x[i] - h;
        let down = f(&xp);
        xp[i] = x[i];
        g[i] = (up - down) / (2.0 * h);
    }
    g
}

fn rel(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax() / b.amax().max(1e-6)
}

fn gradient_checks() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for kind in CostKind::ALL {
        let mut r = ChaCha8Rng::seed_from_u64(600 + kind as u64);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let n = r.random_range(1..5);
            let (kf, kg) = (r.random_range(1..4), r.random_range(1..4));
            let f = random_mixture(&mut r, kf, n);
            let g = random_mixture(&mut r, kg, n);
            let (_, grad) = cost_and_gradient(kind, &f, &g).unwrap();
            let flat = DVector::from_iterator(kf * n, grad.iter().flat_map(|v| v.iter().copied()));
            let x0 = DVector::from_iterator(kf * n, f.means().iter().flat_map(|v| v.iter().copied()).collect::<Vec<_>>());
            let fd = central(
                |x| {
                    let means: Vec<DVector<f64>> = (0..kf).map(|i| x.rows(i * n, n).into_owned()).collect();
                    cost(kind, &f.with_means(&means).unwrap(), &g).unwrap().total
                },
                &x0,
            );
            worst = worst.max(rel(&flat, &fd));
        }
        ok &= worst <= 1e-4;
        notes.push(format!("{kind} {worst:.1e}"));
    }
    let mut r = ChaCha8Rng::seed_from_u64(610);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let kind = CostKind::ALL[i % 3];
        let dynamics = Dynamics::double_integrator_2d(r.random_range(0.02..0.3)).unwrap();
        let (kf, kg) = (r.random_range(1..4), r.random_range(1..4));
        let f0 = random_mixture(&mut r, kf, 4);
        let g = random_mixture(&mut r, kg, 4);
        let mut cfg = Mpc::new(kind);
        cfg.horizon = r.random_range(1..5);
        cfg.control_penalty = DMatrix::identity(2, 2) * r.random_range(1e-3..1e-1);
        let flat = DVector::from_fn(kf * cfg.horizon * 2, |_, _| r.random_range(-1.0..1.0));
        let problem = HorizonProblem::new(&f0, &g, &dynamics, &cfg).unwrap();
        let plan = Plan::from_flat(kf, cfg.horizon, 2, flat.clone()).unwrap();
        let (_, grad) = problem.value_and_gradient(&plan).unwrap();
        let fd = central(|x| problem.value(&Plan::from_flat(kf, cfg.horizon, 2, x.clone()).unwrap()).unwrap().total, &flat);
        worst = worst.max(rel(&grad, &fd));
    }
    ok &= worst <= 1e-4;
    notes.push(format!("horizon {worst:.1e}"));
    let detail = format!("worst relative error: {}", notes.join(", "));
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn panel(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (flm, frm) = (f(0.5 * (a + m)), f(0.5 * (m + b)));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        panel(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + panel(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let panels = 64;
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| {
            let (lo, hi) = (a + h * i as f64, a + h * (i + 1) as f64);
            let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            panel(f, lo, hi, fa, fm, fb, (hi - lo) / 6.0 * (fa + 4.0 * fm + fb), tol / panels as f64, 50)
        })
        .sum()
}

fn kernel_quadrature() -> Outcome {
    let mut r = ChaCha8Rng::seed_from_u64(700);
    let mut worst: f64 = 0.0;
    let pdf = |c: &Component, x: &DVector<f64>| c.intensity_at(x).unwrap();
    for _ in 0..30 {
        let m1 = r.random_range(-5.0..5.0);
        let m2 = r.random_range(-5.0..5.0);
        let a = Component::diagonal(r.random_range(0.2..2.0), &[m1], &[r.random_range(0.1..4.0)]).unwrap();
        let b = Component::diagonal(r.random_range(0.2..2.0), &[m2], &[r.random_range(0.1..4.0)]).unwrap();
        let q = simpson(&|x| pdf(&a, &DVector::from_vec(vec![x])) * pdf(&b, &DVector::from_vec(vec![x])), -35.0, 35.0, 1e-13);
        worst = worst.max((product_integral(&a, &b).unwrap() - q).abs());
    }
    let one_d = worst;
    for _ in 0..6 {
        let mk = |r: &mut ChaCha8Rng| {
            let m = DVector::from_fn(2, |_, _| r.random_range(-5.0..5.0));
            Component::new(r.random_range(0.2..2.0), m, random_spd(r, 2, 0.1, 4.0)).unwrap()
        };
        let (a, b) = (mk(&mut r), mk(&mut r));
        let integrand = |x: f64, y: f64| {
            let p = DVector::from_vec(vec![x, y]);
            pdf(&a, &p) * pdf(&b, &p)
        };
        let q = simpson(&|y| simpson(&|x| integrand(x, y), -16.0, 16.0, 1e-14), -16.0, 16.0, 1e-12);
        worst = worst.max((product_integral(&a, &b).unwrap() - q).abs());
    }
    let detail = format!("max abs deviation 1-D {one_d:.1e}, overall {worst:.1e}");
    if worst <= 1e-8 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn optimizer_checks() -> Outcome {
    let rosen = |x: &DVector<f64>| {
        let (a, b) = (x[0], x[1]);
        let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = DVector::from_vec(vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)]);
        Ok((f, g))
    };
    let res = minimize(rosen, &DVector::from_vec(vec![-1.2, 1.0]), &Optimizer::default()).unwrap();
    let dist = (res.x_opt[0] - 1.0).abs().max((res.x_opt[1] - 1.0).abs());
    let mut solves = 0;
    let mut monotone = res.is_monotone();
    for (case, grid) in [(1, None), (1, Some(1.5)), (2, None), (3, None), (4, None)] {
        let log = run_case(case, grid);
        solves += log.solves.len();
        monotone &= all_monotone(&log);
    }
    let detail = format!("Rosenbrock off by {dist:.1e} after {} iterations; {solves} scenario solves monotone: {monotone}", res.iterations);
    if dist <= 1e-4 && monotone {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn phd_checks(bin: &Path) -> Outcome {
    let mut r = ChaCha8Rng::seed_from_u64(800);
    let h = DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
    let mut model = Phd {
        survival_prob: 0.93,
        detect_prob: 1.0,
        motion: Dynamics::double_integrator_2d(0.1).unwrap().with_process_noise(DMatrix::identity(4, 4) * 1e-3).unwrap(),
        obs_h: h.clone(),
        obs_r: DMatrix::identity(2, 2) * 0.05,
        clutter_intensity: 0.0,
        birth: random_mixture(&mut r, 2, 4).scaled(0.1).unwrap(),
    };
    let mut predict_err: f64 = 0.0;
    for k in 1..20 {
        let prior = random_mixture(&mut r, k, 4);
        let out = phd_predict(&prior, &model).unwrap();
        let expected = model.birth.total_weight() + model.survival_prob * prior.total_weight();
        predict_err = predict_err.max((out.total_weight() - expected).abs());
    }
    model.birth = Mixture::empty(4);
    let mut kalman_err: f64 = 0.0;
    for _ in 0..20 {
        let c = Component::new(1.0, DVector::from_fn(4, |_, _| r.random_range(-2.0..2.0)), random_spd(&mut r, 4, 0.05, 2.0)).unwrap();
        let z = DVector::from_fn(2, |_, _| r.random_range(-2.0..2.0));
        let out = phd_update(&Mixture::new(vec![c.clone()]).unwrap(), &MeasurementSet::new(vec![z.clone()]).unwrap(), &model).unwrap();
        let s = &h * c.cov() * h.transpose() + &model.obs_r;
        let k = c.cov() * h.transpose() * s.try_inverse().unwrap();
        let m = c.mean() + &k * (&z - &h * c.mean());
        let p = (DMatrix::identity(4, 4) - &k * &h) * c.cov();
        let post = &out.components()[1];
        kalman_err = kalman_err.max((post.mean() - m).amax()).max((post.cov() - p).amax());
    }
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("phd.csv");
    let status = Command::new(bin).args(["phd-demo", "--out"]).arg(&csv).output().unwrap();
    if !status.status.success() {
        return Err(format!("phd-demo failed: {}", String::from_utf8_lossy(&status.stderr)));
    }
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut worst_card: f64 = 0.0;
    for line in text.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields[0].parse::<usize>().unwrap() > 5 {
            worst_card = worst_card.max((fields[1].parse::<f64>().unwrap() - 1.0).abs());
        }
    }
    let detail = format!(
        "predict weight error {predict_err:.1e}, Kalman deviation {kalman_err:.1e}, demo cardinality off by at most {worst_card:.4} after step 5"
    );
    if predict_err <= 1e-12 && kalman_err <= 1e-10 && worst_card < 0.1 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn determinism(bin: &Path) -> Outcome {
    let runs: [&[&str]; 4] = [
        &["simulate", "--case", "2", "--seed", "7"],
        &["simulate", "--case", "3", "--steps", "12"],
        &["surface", "--kind", "cs", "--nx", "21", "--ny", "21"],
        &["phd-demo", "--seed", "3", "--out"],
    ];
    let mut compared = 0;
    for args in runs {
        let mut outputs = Vec::new();
        for _ in 0..2 {
            let dir = tempfile::tempdir().unwrap();
            let mut cmd = Command::new(bin);
            cmd.args(args);
            if args[0] == "phd-demo" {
                cmd.arg(dir.path().join("phd.csv"));
            } else {
                cmd.arg("--out").arg(dir.path());
            }
            let out = cmd.output().unwrap();
            if !out.status.success() {
                return Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)));
            }
            let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir.path())
                .unwrap()
                .map(|e| e.unwrap().path())
                .filter(|p| p.extension().is_some_and(|x| x == "csv"))
                .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
                .collect();
            files.sort();
            outputs.push(files);
        }
        if outputs[0].is_empty() || outputs[0] != outputs[1] {
            return Err(format!("{args:?} produced different CSV output"));
        }
        compared += outputs[0].len();
    }
    Ok(format!("{compared} CSV files identical across reruns"))
}

fn main() {
    let bin = Path::new(env!("CARGO_BIN_EXE_rfs-swarm"));
    let names = [
        "case 2 convergence",
        "case 1 dichotomy",
        "case 3 shared target",
        "case 4 origin bias",
        "cost surface structure",
        "gradient correctness",
        "closed-form kernel",
        "optimizer",
        "PHD filter",
        "determinism",
    ];
    let results: Vec<Outcome> = std::thread::scope(|scope| {
        let jobs: Vec<Box<dyn FnOnce() -> Outcome + Send>> = vec![
            Box::new(case2_convergence),
            Box::new(case1_dichotomy),
            Box::new(case3_sharing),
            Box::new(case4_bias),
            Box::new(surface_structure),
            Box::new(gradient_checks),
            Box::new(kernel_quadrature),
            Box::new(optimizer_checks),
            Box::new(move || phd_checks(bin)),
            Box::new(move || determinism(bin)),
        ];
        let handles: Vec<_> = jobs.into_iter().map(|job| scope.spawn(job)).collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err("panicked".to_string())))
            .collect()
    });
    let mut failed = 0;
    for (i, (name, result)) in names.iter().zip(&results).enumerate() {
        match result {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", names.len() - failed, names.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
