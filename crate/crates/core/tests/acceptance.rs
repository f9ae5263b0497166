//! The ten acceptance criteria, run in order at their stated tolerances and
//! time limits. One line per criterion; exits non-zero if any fails.

use std::io::Write;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use extremal::control::{closed_loop, synthesize};
use extremal::extremal::{refine, CoverRegion};
use extremal::flow::iteration::sample_paths;
use extremal::flow::stability::INTEGRATION_TOL;
use extremal::flow::{
    build_extremal, closeness, continuity_probe, homotopy, integrate, IntegrateOptions,
    Trajectory,
};
use extremal::linalg::{dist, lerp, norm_sq};
use extremal::scenario::Scenario;
use extremal::selection::ConstantField;
use extremal::variance::h_value;
use extremal::Polytope;

type Outcome = Result<String, String>;
type Criterion = (&'static str, u64, fn() -> Outcome);

fn scenario(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name);
    Scenario::load(&path).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn h(y: &[f64], p: &Polytope) -> f64 {
    h_value(y, p).unwrap().value().expect("point inside")
}

fn random_polytope(rng: &mut ChaCha8Rng, max_dim: usize, max_points: usize) -> Polytope {
    loop {
        let n = rng.gen_range(1..=max_dim);
        let m = rng.gen_range(n + 1..=max_points);
        let pts: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let p = Polytope::new(pts).unwrap().canonicalize();
        if p.len() >= 2 {
            return p;
        }
    }
}

fn random_point(rng: &mut ChaCha8Rng, p: &Polytope) -> Vec<f64> {
    let w: Vec<f64> = (0..p.len()).map(|_| rng.gen::<f64>().powi(3)).collect();
    let s: f64 = w.iter().sum();
    let mut y = vec![0.0; p.dim()];
    for (v, wi) in p.vertices().iter().zip(&w) {
        for (yk, vk) in y.iter_mut().zip(v) {
            *yk += vk * wi / s;
        }
    }
    y
}

fn extreme_point_law() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_vertex, mut worst_ratio) = (0.0f64, f64::INFINITY);
    for _ in 0..200 {
        let p = random_polytope(&mut rng, 3, 8);
        let vs = p.vertices();
        for (i, v) in vs.iter().enumerate() {
            worst_vertex = worst_vertex.max(h(v, &p));
            for w in &vs[i + 1..] {
                let mid = lerp(v, w, 0.5);
                worst_ratio = worst_ratio.min(h(&mid, &p) / dist(v, w));
            }
        }
    }
    let detail = format!("max h at vertices {worst_vertex:.3e}, min h/len at midpoints {worst_ratio:.3e}");
    if worst_vertex <= 1e-7 && worst_ratio > 1e-4 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn chebyshev_bound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..500 {
        let p = random_polytope(&mut rng, 3, 8);
        let y = random_point(&mut rng, &p);
        let (c, r) = p.chebyshev();
        let hy = h(&y, &p);
        worst = worst.max(hy * hy - (r * r - dist(&y, &c).powi(2)));
    }
    let detail = format!("max h^2 - (r^2 - |y - c|^2) = {worst:.3e}");
    if worst <= 1e-7 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn midpoint_concavity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..500 {
        let p = random_polytope(&mut rng, 3, 8);
        let a = random_point(&mut rng, &p);
        let b = random_point(&mut rng, &p);
        let gap = 0.5 * (h(&a, &p) + h(&b, &p)) - h(&lerp(&a, &b, 0.5), &p);
        worst = worst.max(gap);
    }
    let detail = format!("max (h(a) + h(b))/2 - h(mid) = {worst:.3e}");
    if worst <= 1e-7 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Brute force over the barycentric grid of resolution `1/50`: the grid point
/// whose mean is closest to `y` and its variance `Σ λ_i |v_i|² − |mean|²`.
fn grid_oracle(tri: &[Vec<f64>], y: &[f64]) -> f64 {
    const RES: usize = 50;
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..=RES {
        for j in 0..=RES - i {
            let l = [i as f64 / RES as f64, j as f64 / RES as f64, (RES - i - j) as f64 / RES as f64];
            let mut mean = vec![0.0; 2];
            let mut second = 0.0;
            for (w, v) in l.iter().zip(tri) {
                mean[0] += w * v[0];
                mean[1] += w * v[1];
                second += w * norm_sq(v);
            }
            let d = dist(&mean, y);
            if d < best.0 {
                best = (d, (second - norm_sq(&mean)).max(0.0).sqrt());
            }
        }
    }
    best.1
}

fn lp_vs_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < 50 {
        let tri: Vec<Vec<f64>> = (0..3)
            .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect();
        let area = 0.5
            * ((tri[1][0] - tri[0][0]) * (tri[2][1] - tri[0][1])
                - (tri[2][0] - tri[0][0]) * (tri[1][1] - tri[0][1]))
                .abs();
        if area < 0.05 {
            continue;
        }
        let p = Polytope::new(tri.clone()).unwrap();
        // means on the grid, so the brute force can hit them
        let i = rng.gen_range(0..=50usize);
        let j = rng.gen_range(0..=50 - i);
        let l = [i as f64 / 50.0, j as f64 / 50.0, (50 - i - j) as f64 / 50.0];
        let y: Vec<f64> = (0..2).map(|k| l.iter().zip(&tri).map(|(w, v)| w * v[k]).sum()).collect();
        worst = worst.max((h(&y, &p) - grid_oracle(&tri, &y)).abs());
        done += 1;
    }
    let detail = format!("max |h_lp - h_grid| = {worst:.3e} over 50 triangles");
    if worst <= 2e-2 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn lemma_estimates() -> Outcome {
    let mut lines = vec![];
    let mut ok = true;
    for (name, eps) in [("constant-segment.json", 0.1), ("rotating-segment.json", 0.2)] {
        let s = scenario(name);
        let map = s.multimap().unwrap();
        let f0 = s.base(&map).unwrap();
        let region = CoverRegion {
            t0: 0.0,
            t1: s.horizon,
            states: map.reachable_box(),
        };
        let g = refine(&region, &map, f0.as_ref(), 1.0 + 1e-9, eps).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (mut signed, mut absolute) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for u in sample_paths(&map, 5, 50) {
            let a = rng.gen_range(0.0..s.horizon);
            let b = rng.gen_range(a..=s.horizon);
            for (tau, tau_end) in [(0.0, s.horizon), (a, b)] {
                let e = g.estimates(f0.as_ref(), &u, tau, tau_end).map_err(|e| e.to_string())?;
                signed = signed.max(e.signed - e.signed_bound);
                absolute = absolute.max(e.absolute - e.absolute_bound);
            }
        }
        ok &= signed <= 0.0 && absolute <= 0.0 && g.certificate.holds();
        lines.push(format!(
            "{}: eps {eps}, N = {}, worst signed margin {signed:.3e}, worst absolute margin {absolute:.3e}",
            s.name, g.strips
        ));
    }
    let detail = lines.join("; ");
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn iteration_convergence() -> Outcome {
    let mut lines = vec![];
    let mut ok = true;
    for name in ["constant-segment.json", "planar-square.json"] {
        let s = scenario(name);
        let map = s.multimap().unwrap();
        let f0 = s.base(&map).unwrap();
        let mut opts = s.build_options();
        opts.levels = 8;
        opts.h_paths = 20;
        let state = build_extremal(map, f0, s.params.eps0, &opts).map_err(|e| e.to_string())?;
        let last = state.levels.last().ok_or("no levels")?;
        let pass = state.depth() == 8 && last.h_integral <= 0.02 * s.horizon && last.h_integral <= last.h_bound;
        ok &= pass;
        lines.push(format!(
            "{}: K = {}, h-integral {:.3e} <= min(0.02 T, bound {:.3e})",
            s.name,
            state.depth(),
            last.h_integral,
            last.h_bound
        ));
    }
    let detail = lines.join("; ");
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn closeness_grid() -> Outcome {
    let mut lines = vec![];
    let mut ok = true;
    for name in ["constant-segment.json", "planar-square.json"] {
        let s = scenario(name);
        assert_eq!(s.params.eps0, 0.1);
        let map = s.multimap().unwrap();
        let f0 = s.base(&map).unwrap();
        let state = build_extremal(map.clone(), f0.clone(), 0.1, &s.build_options()).map_err(|e| e.to_string())?;
        let starts = extremal::flow::start_grid(&map, 5, 5);
        let rep = closeness(&state.extremal(), f0.as_ref(), &starts, s.horizon, &s.integrate_options())
            .map_err(|e| e.to_string())?;
        ok &= starts.len() == 25 && rep.max_distance <= 0.1 + INTEGRATION_TOL;
        lines.push(format!("{}: sup-distance {:.3e} over 25 starts", s.name, rep.max_distance));
    }
    let detail = lines.join("; ");
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn flow_continuity() -> Outcome {
    let s = scenario("constant-segment.json");
    let map = s.multimap().unwrap();
    let f0 = s.base(&map).unwrap();
    let build = || build_extremal(map.clone(), f0.clone(), s.params.eps0, &s.build_options());
    let a = build().map_err(|e| e.to_string())?;
    let b = build().map_err(|e| e.to_string())?;
    let same_state = serde_json::to_string(&a).unwrap() == serde_json::to_string(&b).unwrap();
    let deltas = [1e-2, 1e-3, 1e-4];
    let opts = s.integrate_options();
    let (t0, x0) = s.start();
    let dev = continuity_probe(&a.extremal(), t0, &x0, &deltas, s.horizon, &opts).map_err(|e| e.to_string())?;
    let dev2 = continuity_probe(&b.extremal(), t0, &x0, &deltas, s.horizon, &opts).map_err(|e| e.to_string())?;
    let monotone = dev.windows(2).all(|w| w[1] <= w[0] + 1e-9);
    let small = dev.iter().zip(deltas).all(|(d, delta)| *d <= 10.0 * delta);
    let identical = dev.iter().zip(&dev2).all(|(p, q)| p.to_bits() == q.to_bits());
    let detail = format!("deviations {dev:?}, rerun bit-identical: {}", identical && same_state);
    if monotone && small && identical && same_state {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn bang_bang() -> Outcome {
    let s = scenario("bang-bang-scalar.json");
    assert_eq!(s.params.eps0, 0.05);
    let fb = synthesize(&s.control_system().unwrap(), &s.feedback().unwrap(), 0.05, &s.build_options())
        .map_err(|e| e.to_string())?;
    let map = s.multimap().unwrap();
    let opts = s.integrate_options();
    let (mut worst, mut emitted, mut pure) = (0.0f64, 0usize, true);
    for (t0, x0) in extremal::flow::start_grid(&map, 5, 5) {
        let run = closed_loop(&fb, t0, &x0, &opts).map_err(|e| e.to_string())?;
        emitted += run.controls.len();
        pure &= run.controls.iter().all(|u| u[0] == 1.0 || u[0] == -1.0);
        for x in &run.trajectory.states {
            worst = worst.max((x[0] - x0[0]).abs());
        }
    }
    let detail = format!("{emitted} controls, all +-1: {pure}, sup |x - x0| = {worst:.3e}");
    if pure && worst <= 0.05 + INTEGRATION_TOL {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn node_distance(a: &Trajectory, b: &Trajectory) -> f64 {
    if a.times != b.times {
        return f64::INFINITY;
    }
    a.states.iter().zip(&b.states).map(|(p, q)| dist(p, q)).fold(0.0, f64::max)
}

fn homotopy_endpoints() -> Outcome {
    let s = scenario("constant-segment.json");
    let map = s.multimap().unwrap();
    let f0 = s.base(&map).unwrap();
    let state = build_extremal(map.clone(), f0, s.params.eps0, &s.build_options()).map_err(|e| e.to_string())?;
    let f = state.extremal();
    let opts = IntegrateOptions::with_step(s.horizon / 512.0);
    let xbar = vec![0.1];
    let v = integrate(&ConstantField(vec![0.5]), 0.0, &xbar, s.horizon, &opts).map_err(|e| e.to_string())?;
    let start = homotopy(&v, 0.0, &f, &map, &opts).map_err(|e| e.to_string())?;
    let end = homotopy(&v, 1.0, &f, &map, &opts).map_err(|e| e.to_string())?;
    let extremal_run = integrate(&f, 0.0, &xbar, s.horizon, &opts).map_err(|e| e.to_string())?;
    let d0 = node_distance(&start, &extremal_run);
    let d1 = node_distance(&end, &v);
    let detail = format!("lambda 0: {d0:.3e}, lambda 1: {d1:.3e}");
    if d0 <= 1e-9 && d1 <= 1e-9 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("1 extreme-point law", 10, extreme_point_law),
        ("2 chebyshev bound", 10, chebyshev_bound),
        ("3 midpoint concavity", 10, midpoint_concavity),
        ("4 lp vs grid oracle", 30, lp_vs_oracle),
        ("5 step estimates", 60, lemma_estimates),
        ("6 iteration convergence", 300, iteration_convergence),
        ("7 closeness", 120, closeness_grid),
        ("8 flow continuity", 60, flow_continuity),
        ("9 bang-bang", 30, bang_bang),
        ("10 homotopy endpoints", 10, homotopy_endpoints),
    ];
    let mut failed = 0;
    let stdout = std::io::stdout();
    for (name, limit, run) in criteria {
        let start = Instant::now();
        let result = run();
        let took = start.elapsed();
        let in_time = took <= Duration::from_secs(limit);
        let (tag, detail) = match (&result, in_time) {
            (Ok(d), true) => ("PASS", d.clone()),
            (Ok(d), false) => ("FAIL", format!("{d}; over the {limit} s limit")),
            (Err(d), _) => ("FAIL", d.clone()),
        };
        if tag == "FAIL" {
            failed += 1;
        }
        let mut out = stdout.lock();
        let _ = writeln!(out, "criterion {name}: {tag} ({:.2} s) {detail}", took.as_secs_f64());
        let _ = out.flush();
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
