//! Command-line front end: scenario files in, CSV / JSON / SVG artifacts and
//! pass-fail reports out.
//!
//! Exit codes: 0 pass, 1 runtime error, 2 parse error, 3 hypothesis or
//! schedule violation.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::control::{closed_loop, synthesize, BangBangFeedback, ClosedLoop};
use crate::flow::integrate::{integrate, sup_distance, Trajectory};
use crate::flow::iteration::{build_extremal, IterationState, IterationStatus};
use crate::flow::stability::{closeness, continuity_probe, INTEGRATION_TOL};
use crate::linalg::dist;
use crate::scenario::{Kind, Scenario};
use crate::selection::Selection;
use crate::variance::{h_value, HValue};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "extremal", version, about = "Extremal selections and bang-bang synthesis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long)]
    pub paths: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// h(y, F(t, x)) with Chebyshev data.
    HEval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        t: Option<f64>,
        /// Comma-separated state.
        #[arg(long)]
        x: Option<String>,
        /// Comma-separated point of F(t, x).
        #[arg(long)]
        y: Option<String>,
    },
    /// Builds the extremal iteration and writes its certificates.
    Build {
        #[command(flatten)]
        common: Common,
    },
    /// Extremal and relaxed trajectories from one start.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        t0: Option<f64>,
        #[arg(long)]
        x0: Option<String>,
    },
    /// Bang-bang synthesis and a closed-loop run.
    Bangbang {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        t0: Option<f64>,
        #[arg(long)]
        x0: Option<String>,
    },
    /// Checks hypotheses, schedule, extremality, closeness and continuity.
    Verify {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Pass => 0,
            Outcome::Fail => 3,
        }
    }

    fn from(ok: bool) -> Self {
        if ok {
            Outcome::Pass
        } else {
            Outcome::Fail
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse(_) | Error::Expr(_) => 2,
        e if e.is_hypothesis() => 3,
        _ => 1,
    }
}

fn io(e: std::io::Error) -> Error {
    Error::Invalid(format!("i/o: {e}"))
}

fn parse_vec(src: &str) -> Result<Vec<f64>> {
    src.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("`{s}` is not a number")))
        })
        .collect()
}

fn load(common: &Common) -> Result<Scenario> {
    let mut s = Scenario::load(&common.scenario)?;
    if let Some(seed) = common.seed {
        s.params.seed = seed;
    }
    if let Some(k) = common.levels {
        s.params.levels = k;
    }
    if let Some(p) = common.paths {
        s.params.paths = p;
    }
    Ok(s)
}

fn out_file(dir: &Path, name: &str) -> Result<fs::File> {
    fs::create_dir_all(dir).map_err(io)?;
    fs::File::create(dir.join(name)).map_err(io)
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    out_file(dir, name)?.write_all(text.as_bytes()).map_err(io)
}

fn write_json<T: Serialize>(dir: &Path, name: &str, v: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v).map_err(|e| Error::Invalid(e.to_string()))?;
    text.push('\n');
    write_text(dir, name, &text)
}

fn write_trajectory(dir: &Path, name: &str, tr: &Trajectory) -> Result<()> {
    let mut buf = Vec::new();
    tr.write_csv(&mut buf).map_err(io)?;
    out_file(dir, name)?.write_all(&buf).map_err(io)
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<Outcome> {
    match &cli.command {
        Command::HEval { common, t, x, y } => cmd_h_eval(common, *t, x.as_deref(), y.as_deref(), out),
        Command::Build { common } => cmd_build(common, out),
        Command::Simulate { common, t0, x0 } => cmd_simulate(common, *t0, x0.as_deref(), out),
        Command::Bangbang { common, t0, x0 } => cmd_bangbang(common, *t0, x0.as_deref(), out),
        Command::Verify { common } => cmd_verify(common, out),
    }
}

#[derive(Debug, Serialize)]
struct HReport {
    t: f64,
    x: Vec<f64>,
    y: Vec<f64>,
    vertices: Vec<Vec<f64>>,
    h: Option<f64>,
    center: Vec<f64>,
    radius: f64,
    /// `r² − |y − c|² − h²`, nonnegative up to rounding.
    residual: Option<f64>,
}

fn cmd_h_eval(
    common: &Common,
    t: Option<f64>,
    x: Option<&str>,
    y: Option<&str>,
    out: &mut dyn Write,
) -> Result<Outcome> {
    let s = load(common)?;
    let map = s.multimap()?;
    let q = s.h_eval.clone();
    let t = t.or(q.as_ref().map(|q| q.t)).unwrap_or(0.0);
    let x = match x {
        Some(v) => parse_vec(v)?,
        None => q.as_ref().map_or_else(|| s.start().1, |q| q.x.clone()),
    };
    let y = match y {
        Some(v) => parse_vec(v)?,
        None => match &q {
            Some(q) => q.y.clone(),
            None => s.base(&map)?.eval(t, &x)?,
        },
    };
    if x.len() != s.dim() || y.len() != s.dim() {
        return Err(Error::Parse(format!("x and y need {} components", s.dim())));
    }
    let poly = map.value(t, &x)?;
    let (center, radius) = poly.chebyshev();
    let h = match h_value(&y, &poly)? {
        HValue::Value(h) => Some(h),
        HValue::Outside => None,
    };
    let residual = h.map(|h| radius * radius - dist(&y, &center).powi(2) - h * h);
    let rep = HReport {
        t,
        x,
        y,
        vertices: poly.vertices().to_vec(),
        h,
        center,
        radius,
        residual,
    };
    let mut text = String::new();
    let _ = writeln!(text, "t = {}", rep.t);
    let _ = writeln!(text, "x = {:?}", rep.x);
    let _ = writeln!(text, "y = {:?}", rep.y);
    let _ = writeln!(text, "vertices = {:?}", rep.vertices);
    match rep.h {
        Some(h) => {
            let _ = writeln!(text, "h = {h:.16e}");
        }
        None => {
            let _ = writeln!(text, "h = undefined (y is not in F(t, x))");
        }
    }
    let _ = writeln!(text, "chebyshev center = {:?}", rep.center);
    let _ = writeln!(text, "chebyshev radius = {:.16e}", rep.radius);
    if let Some(r) = rep.residual {
        let _ = writeln!(text, "r^2 - |y - c|^2 - h^2 = {r:.16e}");
    }
    out.write_all(text.as_bytes()).map_err(io)?;
    write_json(&common.out, "h_eval.json", &rep)?;
    Ok(Outcome::from(rep.residual.is_some_and(|r| r >= -1e-7)))
}

/// Whether every recorded level is certified and the last one meets its bound.
fn green(state: &IterationState) -> bool {
    let last = match state.levels.last() {
        Some(l) => l,
        None => return false,
    };
    !matches!(state.status, IterationStatus::ScheduleInfeasible { .. })
        && last.h_integral <= last.h_bound
        && state
            .levels
            .iter()
            .all(|l| l.extremality_violations == 0 && l.soundness_violations == 0)
}

fn level_table(state: &IterationState) -> String {
    let mut text = String::new();
    let _ = writeln!(
        text,
        "level,eps,delta,cells,max_strips,crossings,picard_sup,picard_quadrature,h_integral,h_bound,violations"
    );
    for l in &state.levels {
        let _ = writeln!(
            text,
            "{},{:.6e},{:.6e},{},{},{},{:.6e},{:.6e},{:.6e},{:.6e},{}",
            l.level,
            l.eps,
            l.delta,
            l.cells,
            l.max_strips,
            l.crossings,
            l.picard.sup,
            l.picard.quadrature,
            l.h_integral,
            l.h_bound,
            l.extremality_violations + l.soundness_violations
        );
    }
    text
}

fn status_line(status: &IterationStatus) -> String {
    match status {
        IterationStatus::Complete => "status: complete".into(),
        IterationStatus::TargetReached { level } => format!("status: target reached at level {level}"),
        IterationStatus::ScheduleInfeasible { level, reason } => {
            format!("status: schedule infeasible at level {level}: {reason}")
        }
    }
}

/// Runs the iteration; a schedule failure before the first level is written
/// out as a partial report and returned as `Ok(None)`.
fn build_or_report(s: &Scenario, common: &Common, out: &mut dyn Write) -> Result<Option<IterationState>> {
    let map = s.multimap()?;
    let f0 = s.base(&map)?;
    match build_extremal(map, f0, s.params.eps0, &s.build_options()) {
        Ok(state) => Ok(Some(state)),
        Err(Error::ScheduleInfeasible { level, reason }) => {
            let partial = json!({
                "scenario": s.name,
                "eps0": s.params.eps0,
                "seed": s.params.seed,
                "levels": [],
                "status": { "kind": "schedule_infeasible", "level": level, "reason": reason },
            });
            write_json(&common.out, "iteration.json", &partial)?;
            let text = format!(
                "scenario: {}\n{}\n",
                s.name,
                status_line(&IterationStatus::ScheduleInfeasible { level, reason })
            );
            write_text(&common.out, "report.txt", &text)?;
            out.write_all(text.as_bytes()).map_err(io)?;
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

fn cmd_build(common: &Common, out: &mut dyn Write) -> Result<Outcome> {
    let s = load(common)?;
    let Some(state) = build_or_report(&s, common, out)? else {
        return Ok(Outcome::Fail);
    };
    write_json(&common.out, "iteration.json", &state)?;
    if let Some(root) = state.field.nodes().first() {
        write_json(&common.out, "selection.json", &root.selection.to_json())?;
    }
    let ok = green(&state);
    let mut text = format!("scenario: {}\n{}\n", s.name, status_line(&state.status));
    let _ = writeln!(
        text,
        "eps0 = {:e}, delta0 = {:e}, base lipschitz = {:e}, seed = {}",
        state.eps0, state.delta0, state.base_lipschitz, state.seed
    );
    text.push_str(&level_table(&state));
    let _ = writeln!(text, "result: {}", if ok { "PASS" } else { "FAIL" });
    write_text(&common.out, "report.txt", &text)?;
    out.write_all(text.as_bytes()).map_err(io)?;
    Ok(Outcome::from(ok))
}

fn start_of(s: &Scenario, t0: Option<f64>, x0: Option<&str>) -> Result<(f64, Vec<f64>)> {
    let (t, x) = s.start();
    let x = match x0 {
        Some(v) => parse_vec(v)?,
        None => x,
    };
    if x.len() != s.dim() {
        return Err(Error::Parse(format!("x0 needs {} components", s.dim())));
    }
    Ok((t0.unwrap_or(t), x))
}

fn cmd_simulate(common: &Common, t0: Option<f64>, x0: Option<&str>, out: &mut dyn Write) -> Result<Outcome> {
    let s = load(common)?;
    let (t0, x0) = start_of(&s, t0, x0)?;
    let Some(state) = build_or_report(&s, common, out)? else {
        return Ok(Outcome::Fail);
    };
    let opts = s.integrate_options();
    let x = integrate(&state.extremal(), t0, &x0, s.horizon, &opts)?;
    let y = integrate(state.field.base(), t0, &x0, s.horizon, &opts)?;
    write_trajectory(&common.out, "trajectory.csv", &x)?;
    write_trajectory(&common.out, "relaxed.csv", &y)?;
    let svg = trajectory_svg(&s.name, &x, &y, None);
    write_text(&common.out, "trajectory.svg", &svg)?;
    let d = sup_distance(&x, &y);
    let ok = d <= s.params.eps0 + INTEGRATION_TOL;
    let text = format!(
        "scenario: {}\nstart: t0 = {t0}, x0 = {x0:?}\nnodes: {}\nsup |x - y| = {d:.6e} (eps0 = {:e})\nresult: {}\n",
        s.name,
        x.times.len(),
        s.params.eps0,
        if ok { "PASS" } else { "FAIL" }
    );
    out.write_all(text.as_bytes()).map_err(io)?;
    Ok(Outcome::from(ok))
}

fn synthesize_for(s: &Scenario) -> Result<BangBangFeedback> {
    if s.kind != Kind::Control {
        return Err(Error::Parse("bangbang needs a control scenario".into()));
    }
    synthesize(&s.control_system()?, &s.feedback()?, s.params.eps0, &s.build_options())
}

fn pure(fb: &BangBangFeedback, run: &ClosedLoop) -> bool {
    run.controls.iter().all(|u| fb.system.controls.iter().any(|w| w == u))
}

fn cmd_bangbang(common: &Common, t0: Option<f64>, x0: Option<&str>, out: &mut dyn Write) -> Result<Outcome> {
    let s = load(common)?;
    let (t0, x0) = start_of(&s, t0, x0)?;
    let fb = synthesize_for(&s)?;
    let opts = s.integrate_options();
    let run = closed_loop(&fb, t0, &x0, &opts)?;
    let y = integrate(fb.relaxed.as_ref(), t0, &x0, s.horizon, &opts)?;
    write_trajectory(&common.out, "closed_loop.csv", &run.trajectory)?;
    write_trajectory(&common.out, "relaxed.csv", &y)?;
    let mut buf = Vec::new();
    run.write_controls_csv(&mut buf).map_err(io)?;
    out_file(&common.out, "controls.csv")?.write_all(&buf).map_err(io)?;
    write_json(&common.out, "iteration.json", &fb.state)?;
    let svg = trajectory_svg(&s.name, &run.trajectory, &y, Some(&run));
    write_text(&common.out, "closed_loop.svg", &svg)?;
    let d = sup_distance(&run.trajectory, &y);
    let bang = pure(&fb, &run);
    let ok = bang && d <= s.params.eps0 + INTEGRATION_TOL;
    let switches = run.controls.windows(2).filter(|w| w[0] != w[1]).count();
    let text = format!(
        "scenario: {}\nstart: t0 = {t0}, x0 = {x0:?}\ncontrols in U: {}\nswitches: {switches}\nsup |x - y| = {d:.6e} (eps0 = {:e})\nresult: {}\n",
        s.name,
        if bang { "yes" } else { "no" },
        s.params.eps0,
        if ok { "PASS" } else { "FAIL" }
    );
    out.write_all(text.as_bytes()).map_err(io)?;
    Ok(Outcome::from(ok))
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    /// `None` when skipped.
    pub pass: Option<bool>,
    pub detail: String,
}

fn check(name: &str, pass: bool, detail: String) -> Check {
    Check {
        name: name.into(),
        pass: Some(pass),
        detail,
    }
}

fn skipped(name: &str, why: &str) -> Check {
    Check {
        name: name.into(),
        pass: None,
        detail: why.into(),
    }
}

/// Continuity deviations must shrink with `δ` and stay below `10δ`.
pub const CONTINUITY_DELTAS: [f64; 3] = [1e-2, 1e-3, 1e-4];

/// All checks for one scenario, in report order.
pub fn verify_checks(s: &Scenario) -> Result<Vec<Check>> {
    let map = s.multimap()?;
    let hyp = map.check_hypotheses(4096, 4096, s.params.seed);
    let mut checks = vec![
        check(
            "bound",
            hyp.bound_ok,
            format!("max |v| = {:.6e}, M = {:e}", hyp.max_vertex_norm, hyp.bound),
        ),
        check(
            "lipschitz",
            hyp.lipschitz_ok,
            format!("max sampled ratio = {:.6e}", hyp.max_lipschitz_ratio),
        ),
        check(
            "reach",
            hyp.inflated_seed_fits,
            "B(D, MT) inside the domain".into(),
        ),
    ];
    let later = [
        "schedule",
        "extremality",
        "certificates",
        "closeness",
        "continuity",
        "determinism",
        "bang-bang",
    ];
    if !hyp.ok() {
        checks.extend(later.iter().map(|n| skipped(n, "hypotheses fail")));
        return Ok(checks);
    }
    let (state, fb) = if s.kind == Kind::Control {
        match synthesize_for(s) {
            Ok(fb) => (None, Some(fb)),
            Err(Error::ScheduleInfeasible { level, reason }) => {
                checks.push(check("schedule", false, format!("level {level}: {reason}")));
                checks.extend(later[1..].iter().map(|n| skipped(n, "no iteration")));
                return Ok(checks);
            }
            Err(e) => return Err(e),
        }
    } else {
        let f0 = s.base(&map)?;
        match build_extremal(map.clone(), f0, s.params.eps0, &s.build_options()) {
            Ok(st) => (Some(st), None),
            Err(Error::ScheduleInfeasible { level, reason }) => {
                checks.push(check("schedule", false, format!("level {level}: {reason}")));
                checks.extend(later[1..].iter().map(|n| skipped(n, "no iteration")));
                return Ok(checks);
            }
            Err(e) => return Err(e),
        }
    };
    let state = state.as_ref().unwrap_or_else(|| &fb.as_ref().expect("feedback").state);
    checks.push(check(
        "schedule",
        !matches!(state.status, IterationStatus::ScheduleInfeasible { .. }),
        format!("{} levels, {}", state.depth(), status_line(&state.status)),
    ));
    let last = state.levels.last().expect("at least one level");
    let cap = last.h_bound.min(0.02 * s.horizon);
    checks.push(check(
        "extremality",
        last.h_integral <= cap,
        format!(
            "max h-integral {:.6e} <= min(bound {:.6e}, 0.02 T) at level {}",
            last.h_integral, last.h_bound, last.level
        ),
    ));
    let violations: usize = state
        .levels
        .iter()
        .map(|l| l.extremality_violations + l.soundness_violations)
        .sum();
    checks.push(check(
        "certificates",
        violations == 0,
        format!("{violations} sampled majorant violations"),
    ));
    let f = state.extremal();
    let base = state.field.base();
    let opts = s.integrate_options();
    let starts = s.start_grid(&map);
    let cl = closeness(&f, base.as_ref(), &starts, s.horizon, &opts)?;
    checks.push(check(
        "closeness",
        cl.max_distance <= s.params.eps0 + INTEGRATION_TOL,
        format!(
            "sup |x - y| = {:.6e} over {} starts (eps0 = {:e})",
            cl.max_distance,
            starts.len(),
            s.params.eps0
        ),
    ));
    let (t0, x0) = s.start();
    let dev = continuity_probe(&f, t0, &x0, &CONTINUITY_DELTAS, s.horizon, &opts)?;
    let monotone = dev.windows(2).all(|w| w[1] <= w[0] + 1e-9);
    let small = dev.iter().zip(CONTINUITY_DELTAS).all(|(d, delta)| *d <= 10.0 * delta);
    checks.push(check(
        "continuity",
        monotone && small,
        format!("deviations {:?} for deltas {:?}", dev, CONTINUITY_DELTAS),
    ));
    let a = integrate(&f, t0, &x0, s.horizon, &opts)?;
    let b = integrate(&f, t0, &x0, s.horizon, &opts)?;
    checks.push(check(
        "determinism",
        a == b,
        format!("rerun of {} nodes bit-identical", a.times.len()),
    ));
    match &fb {
        Some(fb) => {
            let mut worst = 0.0f64;
            let mut bang = true;
            for (t0, x0) in &starts {
                let run = closed_loop(fb, *t0, x0, &opts)?;
                let y = integrate(fb.relaxed.as_ref(), *t0, x0, s.horizon, &opts)?;
                bang &= pure(fb, &run);
                worst = worst.max(sup_distance(&run.trajectory, &y));
            }
            checks.push(check(
                "bang-bang",
                bang && worst <= s.params.eps0 + INTEGRATION_TOL,
                format!("controls in U: {bang}, tracking {worst:.6e}"),
            ));
        }
        None => checks.push(skipped("bang-bang", "not a control scenario")),
    }
    Ok(checks)
}

fn cmd_verify(common: &Common, out: &mut dyn Write) -> Result<Outcome> {
    let s = load(common)?;
    let checks = verify_checks(&s)?;
    let mut text = format!("scenario: {} (seed {})\n", s.name, s.params.seed);
    for c in &checks {
        let tag = match c.pass {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "SKIP",
        };
        let _ = writeln!(text, "{tag} {:<13}{}", c.name, c.detail);
    }
    let ok = checks.iter().all(|c| c.pass != Some(false));
    let _ = writeln!(text, "result: {}", if ok { "PASS" } else { "FAIL" });
    write_text(&common.out, "verify.txt", &text)?;
    write_json(
        &common.out,
        "verify.json",
        &json!({ "scenario": s.name, "seed": s.params.seed, "checks": checks, "pass": ok }),
    )?;
    out.write_all(text.as_bytes()).map_err(io)?;
    Ok(Outcome::from(ok))
}

struct Series<'a> {
    name: &'a str,
    color: &'a str,
    points: Vec<(f64, f64)>,
}

const PANEL_W: f64 = 640.0;
const PANEL_H: f64 = 200.0;
const MARGIN: f64 = 48.0;
const MAX_POINTS: usize = 4000;

fn thin(points: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    if points.len() <= MAX_POINTS {
        return points;
    }
    let stride = points.len().div_ceil(MAX_POINTS);
    let last = *points.last().expect("nonempty");
    let mut out: Vec<_> = points.into_iter().step_by(stride).collect();
    if out.last() != Some(&last) {
        out.push(last);
    }
    out
}

fn panel(svg: &mut String, top: f64, title: &str, series: &[Series]) {
    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in all {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y0 = y0.min(*y);
        y1 = y1.max(*y);
    }
    if !(x1 > x0) {
        x1 = x0 + 1.0;
    }
    if !(y1 - y0 > 1e-12) {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad = 0.05 * (y1 - y0);
    let (y0, y1) = (y0 - pad, y1 + pad);
    let w = PANEL_W - 2.0 * MARGIN;
    let h = PANEL_H - 2.0 * MARGIN;
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * w;
    let py = |y: f64| top + MARGIN + (y1 - y) / (y1 - y0) * h;
    let _ = writeln!(
        svg,
        r##"<rect x="{:.2}" y="{:.2}" width="{w:.2}" height="{h:.2}" fill="none" stroke="#888"/>"##,
        MARGIN,
        top + MARGIN
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="13">{title}</text>"#,
        MARGIN,
        top + MARGIN - 8.0
    );
    for (v, y) in [(y1, py(y1)), (y0, py(y0))] {
        let _ = writeln!(
            svg,
            r#"<text x="4" y="{:.2}" font-size="10">{v:.3}</text>"#,
            y + 4.0
        );
    }
    for (v, x) in [(x0, px(x0)), (x1, px(x1))] {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="10">{v:.3}</text>"#,
            x - 10.0,
            top + PANEL_H - MARGIN + 14.0
        );
    }
    for (i, s) in series.iter().enumerate() {
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(*y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.2" points="{}"/>"#,
            s.color,
            pts.join(" ")
        );
        let lx = PANEL_W - MARGIN - 150.0;
        let ly = top + MARGIN + 14.0 + 14.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{}"/><text x="{:.2}" y="{:.2}" font-size="11">{}</text>"#,
            ly - 4.0,
            lx + 18.0,
            ly - 4.0,
            s.color,
            lx + 22.0,
            ly,
            s.name
        );
    }
}

fn component(tr: &Trajectory, i: usize) -> Vec<(f64, f64)> {
    thin(tr.times.iter().zip(&tr.states).map(|(t, x)| (*t, x[i])).collect())
}

/// `x_i(t)` against `y_i(t)` per component, plus the control schedule when given.
fn trajectory_svg(title: &str, x: &Trajectory, y: &Trajectory, run: Option<&ClosedLoop>) -> String {
    let n = x.dim();
    let m = run.map_or(0, |r| r.controls.first().map_or(0, Vec::len));
    let height = PANEL_H * (n + m) as f64;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{PANEL_W}" height="{height}" viewBox="0 0 {PANEL_W} {height}" font-family="sans-serif">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for i in 0..n {
        let series = [
            Series {
                name: "x (extremal)",
                color: "#c0392b",
                points: component(x, i),
            },
            Series {
                name: "y (relaxed)",
                color: "#2c6fbb",
                points: component(y, i),
            },
        ];
        panel(&mut svg, PANEL_H * i as f64, &format!("{title}: x{} vs t", i + 1), &series);
    }
    if let Some(run) = run {
        for j in 0..m {
            let mut pts = Vec::with_capacity(2 * run.controls.len());
            let times = &run.trajectory.times;
            for k in 0..run.controls.len() {
                let u = run.controls[k][j];
                pts.push((times[k], u));
                if k + 1 < times.len() {
                    pts.push((times[k + 1], u));
                }
            }
            let series = [Series {
                name: "control",
                color: "#27ae60",
                points: thin(pts),
            }];
            panel(&mut svg, PANEL_H * (n + j) as f64, &format!("u{} vs t", j + 1), &series);
        }
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_is_self_contained() {
        let tr = Trajectory {
            t0: 0.0,
            x0: vec![0.0],
            times: vec![0.0, 1.0],
            states: vec![vec![0.0], vec![1.0]],
            derivs: vec![vec![1.0], vec![1.0]],
            left_derivs: vec![vec![1.0], vec![1.0]],
        };
        let svg = trajectory_svg("t", &tr, &tr, None);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(!svg.contains("href"));
    }

    #[test]
    fn exit_codes_follow_error_class() {
        assert_eq!(exit_code(&Error::Parse("x".into())), 2);
        assert_eq!(exit_code(&Error::Hypothesis("x".into())), 3);
        assert_eq!(exit_code(&Error::Unbounded), 1);
    }

    #[test]
    fn vectors_parse_from_commas() {
        assert_eq!(parse_vec("1, -2.5").unwrap(), vec![1.0, -2.5]);
        assert!(parse_vec("1,a").is_err());
    }
}
