//! Command-line surface and the value parsers behind it.

use std::f64::consts::PI;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use oblique_stab::{BoundaryCondition, Placement};

#[derive(Debug, Parser)]
#[command(
    name = "oblique-stab",
    version,
    about = "Oblique projections onto indicator actuators and closed-loop parabolic simulations"
)]
pub struct Cli {
    /// Plain-text `key=value` file (one per line, `#` comments). Flags on the
    /// command line take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sweep the smallest eigenvalue of Θ against its closed form.
    #[command(args_override_self = true)]
    Eigs(EigsArgs),
    /// Sweep the projection norm, optionally next to its finite element value.
    #[command(args_override_self = true)]
    Norm(NormArgs),
    /// Oblique and orthogonal projections of sampled data onto the actuators.
    #[command(args_override_self = true)]
    Project(ProjectArgs),
    /// Closed-loop simulation of the controlled reaction-diffusion equation.
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
    /// Smallest M satisfying the sufficient stabilisability condition.
    #[command(args_override_self = true)]
    Suffcond(SuffcondArgs),
}

/// A parsed comma list. Wrapping keeps clap from treating the field as multi-valued.
#[derive(Debug, Clone, PartialEq)]
pub struct List<T>(pub Vec<T>);

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// `dirichlet`, `neumann`, `both`, or a comma list.
    #[arg(long, default_value = "dirichlet", value_parser = parse_bc_list)]
    pub bc: List<BoundaryCondition>,

    /// Comma list of `mxe`, `uni`, `con`, `custom:c1;c2;...`.
    #[arg(long, default_value = "mxe", value_parser = parse_schemes)]
    pub scheme: List<Placement>,

    /// Actuator counts, e.g. `6`, `1..60` (inclusive) or `2,5,10..20`.
    #[arg(long = "m", alias = "count", default_value = "1..60", value_parser = parse_counts)]
    pub m: List<usize>,

    /// Volume fractions in (0, 1), comma separated.
    #[arg(long, default_value = "0.5", value_parser = parse_fractions)]
    pub r: List<f64>,

    /// Domain length; accepts `pi`, `2pi`, `pi/2`.
    #[arg(long, alias = "L", default_value = "pi", value_parser = parse_positive)]
    pub length: f64,

    /// Drop `uni` configurations violating `M >= r/(1-r)` instead of failing.
    #[arg(long)]
    pub skip_invalid: bool,

    /// Output CSV, `-` for stdout.
    #[arg(short, long, default_value = "-")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct EigsArgs {
    #[command(flatten)]
    pub sweep: SweepArgs,

    /// Also write the slope estimates as CSV here.
    #[arg(long, value_name = "FILE")]
    pub slopes: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct NormArgs {
    #[command(flatten)]
    pub sweep: SweepArgs,

    /// Add the finite element norm on a mesh with this many nodes.
    #[arg(long, alias = "N", value_parser = parse_nodes)]
    pub nodes: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    #[arg(long, default_value = "dirichlet", value_parser = parse_bc)]
    pub bc: BoundaryCondition,

    #[arg(long, default_value = "mxe", value_parser = parse_scheme)]
    pub scheme: Placement,

    #[arg(long = "m", alias = "count", default_value_t = 6, value_parser = parse_count)]
    pub m: usize,

    #[arg(long, default_value_t = 0.1, value_parser = parse_fraction)]
    pub r: f64,

    #[arg(long, alias = "L", default_value = "pi", value_parser = parse_positive)]
    pub length: f64,

    /// Samples on a uniform grid over [0, L]: one value per line, or `x,f` rows.
    #[arg(long, value_name = "FILE", conflicts_with = "constant")]
    pub input: Option<PathBuf>,

    /// Project the constant function instead of a file.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_real)]
    pub constant: Option<f64>,

    /// Output grid size when projecting a constant.
    #[arg(long, default_value_t = 1001, value_parser = parse_nodes)]
    pub points: usize,

    /// Write actuator coefficients of both projections here.
    #[arg(long, value_name = "FILE")]
    pub coefficients: Option<PathBuf>,

    #[arg(short, long, default_value = "-")]
    pub output: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReactionSelector {
    Constant(f64),
    Oscillating,
    Table(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Linear(f64),
    Constant(f64),
    Sine(usize),
    Cosine(usize),
    Table(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeedOn {
    Off,
    Window(f64, f64),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value = "dirichlet", value_parser = parse_bc)]
    pub bc: BoundaryCondition,

    #[arg(long, default_value = "mxe", value_parser = parse_scheme)]
    pub scheme: Placement,

    #[arg(long = "m", alias = "count", default_value_t = 6, value_parser = parse_count)]
    pub m: usize,

    #[arg(long, default_value_t = 0.5, value_parser = parse_fraction)]
    pub r: f64,

    #[arg(long, alias = "L", default_value = "pi", value_parser = parse_positive)]
    pub length: f64,

    #[arg(long, default_value_t = 0.1, value_parser = parse_positive)]
    pub nu: f64,

    /// Shift in the feedback `P(-nu Lap + a - lambda)`; sets the target decay rate.
    #[arg(long, default_value_t = 1.5, value_parser = parse_positive)]
    pub lambda: f64,

    #[arg(long, alias = "N", default_value_t = 1001, value_parser = parse_nodes)]
    pub nodes: usize,

    /// Time step.
    #[arg(long, default_value_t = 1e-3, value_parser = parse_positive)]
    pub k: f64,

    #[arg(long, alias = "T", default_value_t = 4.5, value_parser = parse_positive)]
    pub t_final: f64,

    /// Closed window `t0,t1` where the feedback acts, or `off`. Default `0,T`.
    #[arg(long, value_parser = parse_feed_on)]
    pub feed_on: Option<FeedOn>,

    /// `constant:<a>`, `oscillating`, or `table:<file>`.
    #[arg(long, default_value = "constant:-3.5", allow_hyphen_values = true, value_parser = parse_reaction)]
    pub reaction: ReactionSelector,

    /// `linear:<s>` (s x), `constant:<v>`, `sine:<i>`, `cosine:<i>`, or `table:<file>`.
    #[arg(long, default_value = "linear:0.1", allow_hyphen_values = true, value_parser = parse_initial)]
    pub y0: InitialState,

    /// Constant boundary data `g0,g1`: values (Dirichlet) or fluxes (Neumann).
    #[arg(long, allow_hyphen_values = true, value_parser = parse_pair)]
    pub boundary: Option<(f64, f64)>,

    /// Keep every n-th time step in the output.
    #[arg(long, default_value_t = 1, value_parser = parse_count)]
    pub every: usize,

    /// Times at which to store the nodal field.
    #[arg(long, value_parser = parse_times)]
    pub snapshots: Option<List<f64>>,

    #[arg(long, value_name = "FILE")]
    pub snapshot_output: Option<PathBuf>,

    #[arg(short, long, default_value = "-")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct SuffcondArgs {
    #[arg(long, default_value = "both", value_parser = parse_bc_list)]
    pub bc: List<BoundaryCondition>,

    #[arg(long, default_value = "mxe", value_parser = parse_scheme)]
    pub scheme: Placement,

    #[arg(long, default_value_t = 0.5, value_parser = parse_fraction)]
    pub r: f64,

    #[arg(long, default_value_t = 0.1, value_parser = parse_positive)]
    pub nu: f64,

    #[arg(long, alias = "L", default_value = "pi", value_parser = parse_positive)]
    pub length: f64,

    /// Bound on `|a|`, used as the norm of the reaction operator.
    #[arg(long, value_parser = parse_nonnegative)]
    pub a_bound: f64,

    /// Largest M tried by the sweep.
    #[arg(long, default_value_t = 200, value_parser = parse_count)]
    pub max_m: usize,

    /// Write the per-M sweep here.
    #[arg(long, value_name = "FILE")]
    pub table: Option<PathBuf>,

    #[arg(short, long, default_value = "-")]
    pub output: PathBuf,
}

/// A real number, also `pi`, `2pi`, `2*pi`, `pi/2`.
pub fn parse_real(s: &str) -> Result<f64, String> {
    let t = s.trim().to_ascii_lowercase();
    let bad = || format!("not a number: {s:?}");
    let v = if let Some(i) = t.find("pi") {
        let (head, tail) = (&t[..i], &t[i + 2..]);
        let head = head.trim_end_matches('*').trim();
        let factor = match head {
            "" => 1.0,
            "-" => -1.0,
            h => h.parse::<f64>().map_err(|_| bad())?,
        };
        let divisor = match tail.trim() {
            "" => 1.0,
            d => d.strip_prefix('/').ok_or_else(bad)?.trim().parse::<f64>().map_err(|_| bad())?,
        };
        factor * PI / divisor
    } else {
        t.parse::<f64>().map_err(|_| bad())?
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

pub fn parse_positive(s: &str) -> Result<f64, String> {
    let v = parse_real(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("must be positive, got {v}"))
    }
}

pub fn parse_nonnegative(s: &str) -> Result<f64, String> {
    let v = parse_real(s)?;
    if v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("must be non-negative, got {v}"))
    }
}

pub fn parse_fraction(s: &str) -> Result<f64, String> {
    let v = parse_real(s)?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("volume fraction must lie in (0, 1), got {v}"))
    }
}

pub fn parse_fractions(s: &str) -> Result<List<f64>, String> {
    let v = s.split(',').map(parse_fraction).collect::<Result<Vec<_>, _>>()?;
    Ok(List(v))
}

pub fn parse_count(s: &str) -> Result<usize, String> {
    match s.trim().parse::<usize>() {
        Ok(n) if n >= 1 => Ok(n),
        _ => Err(format!("expected a positive integer, got {s:?}")),
    }
}

pub fn parse_nodes(s: &str) -> Result<usize, String> {
    match s.trim().parse::<usize>() {
        Ok(n) if n >= 3 => Ok(n),
        _ => Err(format!("expected at least 3 points, got {s:?}")),
    }
}

/// `6`, `1..60` (inclusive), or a comma list of both; sorted and deduplicated.
pub fn parse_counts(s: &str) -> Result<List<usize>, String> {
    let mut out = Vec::new();
    for part in s.split(',') {
        match part.split_once("..") {
            Some((a, b)) => {
                let (a, b) = (parse_count(a)?, parse_count(b.trim_start_matches('='))?);
                if a > b {
                    return Err(format!("empty range {part:?}"));
                }
                out.extend(a..=b);
            }
            None => out.push(parse_count(part)?),
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(List(out))
}

pub fn parse_bc(s: &str) -> Result<BoundaryCondition, String> {
    s.trim().parse().map_err(|e: oblique_stab::Error| e.to_string())
}

pub fn parse_bc_list(s: &str) -> Result<List<BoundaryCondition>, String> {
    if s.trim().eq_ignore_ascii_case("both") {
        return Ok(List(BoundaryCondition::ALL.to_vec()));
    }
    let mut v = s.split(',').map(parse_bc).collect::<Result<Vec<_>, _>>()?;
    v.dedup();
    Ok(List(v))
}

pub fn parse_scheme(s: &str) -> Result<Placement, String> {
    s.trim().parse().map_err(|e: oblique_stab::Error| e.to_string())
}

pub fn parse_schemes(s: &str) -> Result<List<Placement>, String> {
    Ok(List(s.split(',').map(parse_scheme).collect::<Result<Vec<_>, _>>()?))
}

pub fn parse_times(s: &str) -> Result<List<f64>, String> {
    let v = s.split(',').map(parse_nonnegative).collect::<Result<Vec<_>, _>>()?;
    Ok(List(v))
}

pub fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected two values `a,b`, got {s:?}"))?;
    Ok((parse_real(a)?, parse_real(b)?))
}

pub fn parse_feed_on(s: &str) -> Result<FeedOn, String> {
    if matches!(s.trim().to_ascii_lowercase().as_str(), "off" | "none") {
        return Ok(FeedOn::Off);
    }
    let (a, b) = parse_pair(s)?;
    if a <= b {
        Ok(FeedOn::Window(a, b))
    } else {
        Err(format!("empty feedback window [{a}, {b}]"))
    }
}

fn split_selector(s: &str) -> (String, Option<&str>) {
    match s.trim().split_once(':') {
        Some((k, v)) => (k.to_ascii_lowercase(), Some(v)),
        None => (s.trim().to_ascii_lowercase(), None),
    }
}

pub fn parse_reaction(s: &str) -> Result<ReactionSelector, String> {
    match split_selector(s) {
        (k, Some(v)) if k == "constant" => Ok(ReactionSelector::Constant(parse_real(v)?)),
        (k, None) if k == "oscillating" => Ok(ReactionSelector::Oscillating),
        (k, Some(v)) if k == "table" && !v.is_empty() => Ok(ReactionSelector::Table(v.into())),
        _ => Err(format!(
            "unknown reaction {s:?} (expected constant:<a>, oscillating or table:<file>)"
        )),
    }
}

pub fn parse_initial(s: &str) -> Result<InitialState, String> {
    match split_selector(s) {
        (k, Some(v)) if k == "linear" => Ok(InitialState::Linear(parse_real(v)?)),
        (k, Some(v)) if k == "constant" => Ok(InitialState::Constant(parse_real(v)?)),
        (k, Some(v)) if k == "sine" => Ok(InitialState::Sine(parse_count(v)?)),
        (k, Some(v)) if k == "cosine" => Ok(InitialState::Cosine(v.trim().parse().map_err(|_| format!("bad index {v:?}"))?)),
        (k, Some(v)) if k == "table" && !v.is_empty() => Ok(InitialState::Table(v.into())),
        _ => Err(format!(
            "unknown initial state {s:?} (expected linear:<s>, constant:<v>, sine:<i>, cosine:<i> or table:<file>)"
        )),
    }
}
