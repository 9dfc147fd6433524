use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::sync::Arc;

use oblique_stab::actuators::uni_condition_holds;
use oblique_stab::csv::{config_comment, fmt_real};
use oblique_stab::fem::{
    assemble_fem, feedback_matrices, run_closed_loop, BoundaryFn, ClosedLoopConfig, ClosedLoopRun,
    ConstantReaction, FemGrid, OscillatingReaction, ReactionField, TabulatedReaction,
};
use oblique_stab::projection::{
    apply_orthogonal_projection, apply_projection, check_sufficient_condition, l2_norm, limit_norm_threshold,
    norm_limit, projection_for, Difference, FnSource, L2Function, SweepRow,
};
use oblique_stab::spectral::UniformSamples;
use oblique_stab::{ActuatorSet, BoundaryCondition, EigenBasis, Placement, SufficientConditionReport};
use rayon::prelude::*;

use crate::args::{
    Cli, Command, EigsArgs, FeedOn, InitialState, NormArgs, ProjectArgs, ReactionSelector, SimulateArgs,
    SuffcondArgs, SweepArgs,
};
use crate::error::CliError;

/// Windows over which `Δϑ/ΔM` is reported when a sweep covers both ends.
pub const SLOPE_WINDOWS: [(usize, usize); 3] = [(10, 20), (50, 60), (110, 120)];

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let config = cli.config.as_ref().map(|p| p.display().to_string());
    match &cli.command {
        Command::Eigs(a) => eigs(a, config),
        Command::Norm(a) => norm(a, config),
        Command::Project(a) => project(a, config),
        Command::Simulate(a) => simulate(a, config),
        Command::Suffcond(a) => suffcond(a, config),
    }
}

struct Header(Vec<(String, String)>);

impl Header {
    fn new(command: &str, config: Option<String>) -> Self {
        let mut h = Header(vec![
            ("command".into(), command.into()),
            ("version".into(), env!("CARGO_PKG_VERSION").into()),
        ]);
        if let Some(c) = config {
            h.push("config", c);
        }
        h
    }

    fn push(&mut self, k: &str, v: impl ToString) -> &mut Self {
        self.0.push((k.to_string(), v.to_string()));
        self
    }

    fn line(&self) -> String {
        config_comment(&self.0)
    }
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

/// `1,2,3,7` as `1..3,7`.
pub fn fmt_counts(counts: &[usize]) -> String {
    let mut parts = Vec::new();
    let mut i = 0;
    while i < counts.len() {
        let mut j = i;
        while j + 1 < counts.len() && counts[j + 1] == counts[j] + 1 {
            j += 1;
        }
        parts.push(if j > i { format!("{}..{}", counts[i], counts[j]) } else { counts[i].to_string() });
        i = j + 1;
    }
    parts.join(",")
}

fn scheme_label(p: &Placement) -> String {
    match p {
        Placement::Custom(c) => format!("custom:{}", c.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")),
        p => p.name().to_string(),
    }
}

fn write_output(path: &Path, text: &str) -> Result<(), CliError> {
    let err = |source| CliError::Output { path: path.display().to_string(), source };
    if path.as_os_str() == "-" {
        let mut out = std::io::stdout().lock();
        out.write_all(text.as_bytes()).map_err(err)?;
        out.flush().map_err(err)
    } else {
        fs::write(path, text).map_err(err)
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Input { path: path.display().to_string(), source })
}

/// Values of a samples file: one number per line, or rows `x,f` (second column
/// taken). `#` lines, blank lines and one leading header row are skipped.
pub fn parse_samples(text: &str) -> Result<Vec<f64>, CliError> {
    let mut values = Vec::new();
    for (n, line) in text.lines().enumerate().map(|(n, l)| (n, l.trim())) {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let field = if fields.len() >= 2 { fields[1] } else { fields[0] };
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            _ if values.is_empty() && fields[0].parse::<f64>().is_err() => continue,
            _ => return Err(CliError::Config(format!("samples line {}: bad value {field:?}", n + 1))),
        }
    }
    if values.len() < 2 {
        return Err(CliError::Config(format!("samples need at least two values, got {}", values.len())));
    }
    Ok(values)
}

fn read_samples(path: &Path, length: f64) -> Result<UniformSamples, CliError> {
    let values = parse_samples(&read_text(path)?)?;
    Ok(UniformSamples::new(length, values)?)
}

/// Ordered `(bc, scheme, M, r)` items of a sweep. Custom schemes use their own
/// number of centers in place of the `M` list.
fn sweep_items(s: &SweepArgs) -> Vec<(BoundaryCondition, Placement, usize, f64)> {
    let mut items = Vec::new();
    for &bc in &s.bc.0 {
        for p in &s.scheme.0 {
            let counts = match p {
                Placement::Custom(c) => vec![c.len()],
                _ => s.m.0.clone(),
            };
            for &m in &counts {
                for &r in &s.r.0 {
                    if s.skip_invalid && *p == Placement::Uni && !uni_condition_holds(m, r) {
                        continue;
                    }
                    items.push((bc, p.clone(), m, r));
                }
            }
        }
    }
    items
}

fn sweep_header(name: &str, s: &SweepArgs, config: Option<String>) -> Header {
    let mut h = Header::new(name, config);
    let schemes: Vec<String> = s.scheme.0.iter().map(scheme_label).collect();
    h.push("bc", join(&s.bc.0))
        .push("scheme", schemes.join(","))
        .push("m", fmt_counts(&s.m.0))
        .push("r", join(&s.r.0))
        .push("length", fmt_real(s.length))
        .push("skip_invalid", s.skip_invalid);
    h
}

/// Results in input order; the first failing item, in that order, wins.
fn ordered<T: Send>(results: Vec<oblique_stab::Result<T>>) -> Result<Vec<T>, CliError> {
    results.into_iter().map(|r| r.map_err(CliError::from)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Slope {
    pub bc: BoundaryCondition,
    pub scheme: &'static str,
    pub r: f64,
    pub window: (usize, usize),
    pub value: f64,
}

/// `Δϑ/ΔM` over [`SLOPE_WINDOWS`] for every `(bc, scheme, r)` covering both ends.
pub fn slopes(rows: &[SweepRow]) -> Vec<Slope> {
    let mut out = Vec::new();
    for a in rows {
        for &(m0, m1) in &SLOPE_WINDOWS {
            if a.count != m0 {
                continue;
            }
            let end = rows
                .iter()
                .find(|b| b.count == m1 && b.bc == a.bc && b.scheme == a.scheme && b.r == a.r);
            if let Some(b) = end {
                out.push(Slope {
                    bc: a.bc,
                    scheme: a.scheme,
                    r: a.r,
                    window: (m0, m1),
                    value: (b.vartheta_numeric - a.vartheta_numeric) / (m1 - m0) as f64,
                });
            }
        }
    }
    out
}

fn eigs(a: &EigsArgs, config: Option<String>) -> Result<(), CliError> {
    let s = &a.sweep;
    let items = sweep_items(s);
    let rows = ordered(
        items
            .par_iter()
            .map(|(bc, p, m, r)| SweepRow::compute(*bc, p, s.length, *m, *r))
            .collect(),
    )?;

    let mut text = sweep_header("eigs", s, config).line();
    text.push('\n');
    text.push_str(SweepRow::csv_header());
    text.push('\n');
    for row in &rows {
        text.push_str(&row.to_csv_line());
        text.push('\n');
    }
    write_output(&s.output, &text)?;

    let slopes = slopes(&rows);
    let mut csv = String::from("bc,scheme,r,m_start,m_end,slope\n");
    for sl in &slopes {
        eprintln!(
            "slope bc={} scheme={} r={} window={}..{} dvartheta_dm={}",
            sl.bc,
            sl.scheme,
            sl.r,
            sl.window.0,
            sl.window.1,
            fmt_real(sl.value)
        );
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            sl.bc,
            sl.scheme,
            fmt_real(sl.r),
            sl.window.0,
            sl.window.1,
            fmt_real(sl.value)
        );
    }
    if let Some(path) = &a.slopes {
        write_output(path, &csv)?;
    }
    Ok(())
}

fn norm(a: &NormArgs, config: Option<String>) -> Result<(), CliError> {
    let s = &a.sweep;
    let items = sweep_items(s);
    let fem = match a.nodes {
        Some(n) => Some(assemble_fem(&FemGrid::new(s.length, n)?)?),
        None => None,
    };
    let values = ordered(
        items
            .par_iter()
            .map(|(bc, p, m, r)| {
                let data = projection_for(*bc, p.clone(), s.length, *m, *r)?;
                let discrete = match &fem {
                    Some(fem) => {
                        let basis = EigenBasis::new(*bc, s.length, *m)?;
                        Some(feedback_matrices(*bc, data.set(), &basis, fem)?.discrete_norm(fem)?)
                    }
                    None => None,
                };
                Ok((data.op_norm(), discrete))
            })
            .collect(),
    )?;

    let mut header = sweep_header("norm", s, config);
    if let Some(n) = a.nodes {
        header.push("nodes", n);
    }
    let mut text = header.line();
    text.push_str("\nbc,scheme,M,r,L,op_norm,norm_limit");
    if a.nodes.is_some() {
        text.push_str(",discrete_norm");
    }
    text.push('\n');
    for ((bc, p, m, r), (op, discrete)) in items.iter().zip(&values) {
        let _ = write!(
            text,
            "{bc},{},{m},{},{},{},{}",
            p.name(),
            fmt_real(*r),
            fmt_real(s.length),
            fmt_real(*op),
            fmt_real(norm_limit(*r))
        );
        if let Some(d) = discrete {
            let _ = write!(text, ",{}", fmt_real(*d));
        }
        text.push('\n');
    }
    write_output(&s.output, &text)
}

fn effective_count(p: &Placement, m: usize) -> usize {
    match p {
        Placement::Custom(c) => c.len(),
        _ => m,
    }
}

fn project(a: &ProjectArgs, config: Option<String>) -> Result<(), CliError> {
    let m = effective_count(&a.scheme, a.m);
    let data = projection_for(a.bc, a.scheme.clone(), a.length, m, a.r)?;
    let (f, grid, source): (Box<dyn L2Function>, Vec<f64>, String) = match (&a.input, a.constant) {
        (Some(path), _) => {
            let samples = read_samples(path, a.length)?;
            let grid = samples.grid();
            (Box::new(samples), grid, path.display().to_string())
        }
        (None, Some(c)) => {
            let h = a.length / (a.points - 1) as f64;
            let grid = (0..a.points).map(|i| i as f64 * h).collect();
            (Box::new(FnSource::new(move |_| c)), grid, format!("constant:{c}"))
        }
        (None, None) => return Err(CliError::Config("project needs --input or --constant".into())),
    };

    let oblique = apply_projection(&data, f.as_ref());
    let orthogonal = apply_orthogonal_projection(data.set(), f.as_ref())?;
    let residual = |g: &dyn L2Function| l2_norm(&Difference { f: f.as_ref(), g }, a.length);
    let (r_obl, r_orth) = (residual(&oblique), residual(&orthogonal));

    let mut header = Header::new("project", config);
    header
        .push("bc", a.bc)
        .push("scheme", scheme_label(&a.scheme))
        .push("m", m)
        .push("r", a.r)
        .push("length", fmt_real(a.length))
        .push("input", source);
    let mut text = header.line();
    let _ = writeln!(
        text,
        "\n# oblique_residual={} orthogonal_residual={} op_norm={}",
        fmt_real(r_obl),
        fmt_real(r_orth),
        fmt_real(data.op_norm())
    );
    text.push_str("x,f,oblique,orthogonal\n");
    for &x in &grid {
        let _ = writeln!(
            text,
            "{},{},{},{}",
            fmt_real(x),
            fmt_real(f.value(x)),
            fmt_real(oblique.value(x)),
            fmt_real(orthogonal.value(x))
        );
    }
    write_output(&a.output, &text)?;
    eprintln!(
        "oblique_residual={} orthogonal_residual={}",
        fmt_real(r_obl),
        fmt_real(r_orth)
    );

    if let Some(path) = &a.coefficients {
        let mut csv = header.line();
        csv.push_str("\nj,center,oblique,orthogonal\n");
        for (j, c) in data.set().centers().iter().enumerate() {
            let _ = writeln!(
                csv,
                "{},{},{},{}",
                j + 1,
                fmt_real(*c),
                fmt_real(oblique.coefficients[j]),
                fmt_real(orthogonal.coefficients[j])
            );
        }
        write_output(path, &csv)?;
    }
    Ok(())
}

fn reaction_field(sel: &ReactionSelector, nu: f64, length: f64) -> Result<Box<dyn ReactionField>, CliError> {
    Ok(match sel {
        ReactionSelector::Constant(v) => Box::new(ConstantReaction(*v)),
        ReactionSelector::Oscillating => Box::new(OscillatingReaction { nu, length }),
        ReactionSelector::Table(p) => Box::new(TabulatedReaction::parse(&read_text(p)?)?),
    })
}

fn initial_state(sel: &InitialState, length: f64) -> Result<Box<dyn Fn(f64) -> f64>, CliError> {
    let w = std::f64::consts::PI / length;
    Ok(match sel {
        InitialState::Linear(s) => {
            let s = *s;
            Box::new(move |x| s * x)
        }
        InitialState::Constant(v) => {
            let v = *v;
            Box::new(move |_| v)
        }
        InitialState::Sine(i) => {
            let i = *i as f64;
            Box::new(move |x| (i * w * x).sin())
        }
        InitialState::Cosine(i) => {
            let i = *i as f64;
            Box::new(move |x| (i * w * x).cos())
        }
        InitialState::Table(p) => {
            let s = read_samples(p, length)?;
            Box::new(move |x| s.interpolate(x))
        }
    })
}

fn selector_label(r: &ReactionSelector) -> String {
    match r {
        ReactionSelector::Constant(v) => format!("constant:{v}"),
        ReactionSelector::Oscillating => "oscillating".into(),
        ReactionSelector::Table(p) => format!("table:{}", p.display()),
    }
}

fn initial_label(y: &InitialState) -> String {
    match y {
        InitialState::Linear(s) => format!("linear:{s}"),
        InitialState::Constant(v) => format!("constant:{v}"),
        InitialState::Sine(i) => format!("sine:{i}"),
        InitialState::Cosine(i) => format!("cosine:{i}"),
        InitialState::Table(p) => format!("table:{}", p.display()),
    }
}

fn simulate(a: &SimulateArgs, config: Option<String>) -> Result<(), CliError> {
    let snapshot_times = a.snapshots.as_ref().map(|l| l.0.clone()).unwrap_or_default();
    if !snapshot_times.is_empty() && a.snapshot_output.is_none() {
        return Err(CliError::Config("--snapshots needs --snapshot-output".into()));
    }
    if let Some(t) = snapshot_times.iter().find(|&&t| t > a.t_final) {
        return Err(CliError::Config(format!("snapshot time {t} is after T = {}", a.t_final)));
    }
    let feed_on = match a.feed_on {
        None => Some((0.0, a.t_final)),
        Some(FeedOn::Off) => None,
        Some(FeedOn::Window(t0, t1)) => Some((t0, t1)),
    };
    let m = effective_count(&a.scheme, a.m);
    let actuators = match feed_on {
        Some(_) => Some(ActuatorSet::new(a.scheme.clone(), a.length, m, a.r)?),
        None => None,
    };
    let reaction = reaction_field(&a.reaction, a.nu, a.length)?;
    let y0 = initial_state(&a.y0, a.length)?;
    let boundary: Option<BoundaryFn> = a.boundary.map(|(g0, g1)| Arc::new(move |_| [g0, g1]) as BoundaryFn);

    let mut cfg = ClosedLoopConfig::new(a.bc, a.t_final);
    cfg.length = a.length;
    cfg.nodes = a.nodes;
    cfg.nu = a.nu;
    cfg.k = a.k;
    cfg.lambda = a.lambda;
    cfg.feed_on = feed_on;
    cfg.snapshot_times = snapshot_times;
    cfg.boundary = boundary;
    let run = run_closed_loop(&cfg, reaction.as_ref(), actuators.as_ref(), y0.as_ref())?;

    let mut header = Header::new("simulate", config);
    header
        .push("bc", a.bc)
        .push("scheme", scheme_label(&a.scheme))
        .push("m", m)
        .push("r", a.r)
        .push("length", fmt_real(a.length))
        .push("nu", a.nu)
        .push("lambda", a.lambda)
        .push("nodes", a.nodes)
        .push("k", a.k)
        .push("t_final", a.t_final)
        .push("feed_on", feed_on.map_or("off".to_string(), |(t0, t1)| format!("{t0},{t1}")))
        .push("reaction", selector_label(&a.reaction))
        .push("y0", initial_label(&a.y0))
        .push("boundary", a.boundary.map_or("0,0".to_string(), |(g0, g1)| format!("{g0},{g1}")))
        .push("every", a.every);
    write_output(&a.output, &trajectory_csv(&header, &run, a.every))?;

    if let Some(path) = &a.snapshot_output {
        write_output(path, &snapshot_csv(&header, &run))?;
    }
    let (first, last) = (run.norms[0], *run.norms.last().unwrap());
    eprintln!(
        "initial_norm={} final_norm={} ratio={} steps={}",
        fmt_real(first),
        fmt_real(last),
        fmt_real(last / first),
        run.norms.len() - 1
    );
    Ok(())
}

fn trajectory_csv(header: &Header, run: &ClosedLoopRun, every: usize) -> String {
    let mut text = header.line();
    text.push('\n');
    text.push_str(ClosedLoopRun::csv_header());
    text.push('\n');
    let last = run.times.len() - 1;
    for i in (0..=last).filter(|i| i % every == 0 || *i == last) {
        let _ = writeln!(
            text,
            "{},{},{}",
            fmt_real(run.times[i]),
            fmt_real(run.norms[i]),
            u8::from(run.feedback_on[i])
        );
    }
    text
}

fn snapshot_csv(header: &Header, run: &ClosedLoopRun) -> String {
    let mut text = header.line();
    text.push_str("\nx");
    for (t, _) in &run.snapshots {
        let _ = write!(text, ",y@{}", fmt_real(*t));
    }
    text.push('\n');
    for (i, x) in run.grid.nodes().iter().enumerate() {
        text.push_str(&fmt_real(*x));
        for (_, y) in &run.snapshots {
            let _ = write!(text, ",{}", fmt_real(y[i]));
        }
        text.push('\n');
    }
    text
}

/// Sweep `M = 1, 2, ...` until the condition holds; a numerical failure is
/// only fatal if it occurs before that.
fn suffcond_sweep(a: &SuffcondArgs, bc: BoundaryCondition) -> Result<Vec<SufficientConditionReport>, CliError> {
    let results: Vec<_> = (1..=a.max_m)
        .into_par_iter()
        .map(|m| {
            projection_for(bc, a.scheme.clone(), a.length, m, a.r)
                .map(|d| check_sufficient_condition(a.nu, bc, a.length, m, d.op_norm(), a.a_bound))
        })
        .collect();
    let mut reports = Vec::new();
    for r in results {
        match r {
            Ok(rep) => reports.push(rep),
            Err(_) if reports.iter().any(|x| x.satisfied) => break,
            Err(e) => return Err(e.into()),
        }
    }
    Ok(reports)
}

fn suffcond(a: &SuffcondArgs, config: Option<String>) -> Result<(), CliError> {
    if matches!(a.scheme, Placement::Custom(_)) {
        return Err(CliError::Config("suffcond sweeps M, custom placements have a fixed M".into()));
    }
    let mut header = Header::new("suffcond", config);
    header
        .push("bc", join(&a.bc.0))
        .push("scheme", a.scheme.name())
        .push("r", a.r)
        .push("nu", a.nu)
        .push("length", fmt_real(a.length))
        .push("a_bound", a.a_bound)
        .push("max_m", a.max_m);
    let mut text = header.line();
    text.push_str("\nbc,scheme,r,nu,L,a_bound,min_m_swept,op_norm_at_min,limit_x,min_m_limit\n");
    let mut table = header.line();
    table.push_str("\nbc,M,alpha_next,op_norm,lhs,rhs,satisfied,margin\n");

    for &bc in &a.bc.0 {
        let reports = suffcond_sweep(a, bc)?;
        let first = reports.iter().find(|r| r.satisfied);
        let (x, limit_m) = limit_norm_threshold(a.nu, bc, a.length, a.r, a.a_bound);
        let _ = writeln!(
            text,
            "{bc},{},{},{},{},{},{},{},{},{limit_m}",
            a.scheme.name(),
            fmt_real(a.r),
            fmt_real(a.nu),
            fmt_real(a.length),
            fmt_real(a.a_bound),
            first.map(|r| r.count.to_string()).unwrap_or_default(),
            first.map(|r| fmt_real(r.op_norm)).unwrap_or_default(),
            fmt_real(x)
        );
        match first {
            Some(r) => eprintln!("{bc}: smallest swept M = {}, limit-norm threshold M = {limit_m}", r.count),
            None => eprintln!("{bc}: no M <= {} satisfies the condition, limit-norm threshold M = {limit_m}", a.max_m),
        }
        for r in &reports {
            let _ = writeln!(
                table,
                "{bc},{},{},{},{},{},{},{}",
                r.count,
                fmt_real(r.alpha_next),
                fmt_real(r.op_norm),
                fmt_real(r.lhs),
                fmt_real(r.rhs),
                u8::from(r.satisfied),
                fmt_real(r.margin)
            );
        }
    }
    write_output(&a.output, &text)?;
    if let Some(path) = &a.table {
        write_output(path, &table)?;
    }
    Ok(())
}
