//! Command-line front end. `main` only forwards process arguments here.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::geometry::{tile_center, Pose2, Rect, SharedWorkspace, Tile, Vec2};
use crate::mapping::{optimal_assignment, DemandPoint, DemandSource, MappingError, ObjectId, PoolProxy, ProxyId};
use crate::proxy::{travel_time_bound, RobotLimits, RobotState};
use crate::record::{parse_lines, Record};
use crate::scenarios::{builtin_script, compute_metrics, run_scenario, ScenarioKind, ScenarioScript};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_VIOLATION: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "proxysync", version, about = "Run and check haptic proxy coordination scenarios")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a scenario and write its trace.
    Run(RunConfig),
    /// Check a scenario script without running it.
    Validate { path: PathBuf },
    /// Print the script of a built-in scenario.
    Script {
        name: String,
        #[arg(long, env = "PROXYSYNC_SEED", default_value_t = 0)]
        seed: u64,
    },
    /// Brute-force reference answers.
    Oracle {
        #[arg(value_enum)]
        kind: OracleKind,
        /// Instance file; `masking` falls back to the demo tile moves.
        path: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OracleKind {
    Assignment,
    Masking,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum SummaryFormat {
    #[default]
    Text,
    Records,
}

#[derive(Debug, Clone, clap::Args)]
pub struct RunConfig {
    /// Built-in scenario name or path to a script file.
    #[arg(long)]
    pub scenario: String,
    #[arg(long, env = "PROXYSYNC_SEED")]
    pub seed: Option<u64>,
    /// Trace destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub latency: Option<f64>,
    #[arg(long)]
    pub jitter: Option<f64>,
    #[arg(long)]
    pub drop: Option<f64>,
    /// Remote render delay in seconds.
    #[arg(long)]
    pub delay: Option<f64>,
    #[arg(long, value_enum, default_value_t = SummaryFormat::Text)]
    pub summary: SummaryFormat,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Script { path: String, message: String },
    #[error("{0}")]
    Override(String),
    #[error("{path}: line {line}: {message}")]
    Instance { path: String, line: usize, message: String },
    #[error(transparent)]
    Mapping(#[from] MappingError),
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Resolves a built-in name or script path and applies a seed override.
pub fn load_scenario(scenario: &str, seed: Option<u64>) -> Result<ScenarioScript, CliError> {
    if let Some(kind) = ScenarioKind::parse(scenario) {
        return Ok(builtin_script(kind, seed.unwrap_or(0)));
    }
    let path = Path::new(scenario);
    let mut script = ScenarioScript::parse(&read(path)?).map_err(|e| CliError::Script {
        path: scenario.to_string(),
        message: e.to_string(),
    })?;
    if let Some(seed) = seed {
        script.seed = seed;
        script.channel.seed = seed;
    }
    Ok(script)
}

pub fn apply_overrides(mut script: ScenarioScript, cfg: &RunConfig) -> Result<ScenarioScript, CliError> {
    let nonneg = |name: &str, v: f64| {
        if v.is_finite() && v >= 0.0 {
            Ok(v)
        } else {
            Err(CliError::Override(format!("--{name} must be a nonnegative number, got {v}")))
        }
    };
    if let Some(v) = cfg.latency {
        script.channel.base_latency = nonneg("latency", v)?;
    }
    if let Some(v) = cfg.jitter {
        script.channel.jitter = nonneg("jitter", v)?;
    }
    if let Some(v) = cfg.drop {
        if !(0.0..=1.0).contains(&v) {
            return Err(CliError::Override(format!("--drop must lie in [0, 1], got {v}")));
        }
        script.channel.drop_prob = v;
    }
    if let Some(v) = cfg.delay {
        script.delay = nonneg("delay", v)?;
    }
    script
        .channel
        .validate()
        .map_err(|e| CliError::Override(e.to_string()))?;
    Ok(script)
}

fn summary_text(r: &Record) -> String {
    let mut s = String::new();
    for (k, v) in r.fields() {
        if k != "ev" {
            s.push_str(&format!("{k}: {v}\n"));
        }
    }
    s
}

pub fn cmd_run(cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let script = match load_scenario(&cfg.scenario, cfg.seed).and_then(|s| apply_overrides(s, cfg)) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INVALID;
        }
    };
    let trace = match run_scenario(&script) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INVALID;
        }
    };
    let text = trace.to_text();
    let metrics = compute_metrics(&trace);
    let summary = match cfg.summary {
        SummaryFormat::Text => summary_text(&metrics.to_record()),
        SummaryFormat::Records => format!("{}\n", metrics.to_record()),
    };
    let written = match &cfg.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| format!("{}: {e}", path.display()))
            .and_then(|_| out.write_all(summary.as_bytes()).map_err(|e| e.to_string())),
        None => out
            .write_all(text.as_bytes())
            .and_then(|_| err.write_all(summary.as_bytes()))
            .map_err(|e| e.to_string()),
    };
    if let Err(e) = written {
        let _ = writeln!(err, "error: {e}");
        return EXIT_INVALID;
    }
    let violations: Vec<_> = trace.violations().collect();
    if violations.is_empty() {
        EXIT_OK
    } else {
        for v in violations {
            let _ = writeln!(err, "violation: {}", v.to_record());
        }
        EXIT_VIOLATION
    }
}

pub fn cmd_validate(path: &Path, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match load_scenario(&path.display().to_string(), None) {
        Ok(s) => {
            let _ = writeln!(
                out,
                "ok: {} rooms={} events={}",
                s.kind,
                s.rooms.len(),
                s.timeline.len()
            );
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_INVALID
        }
    }
}

/// A commanded proxy move for the masking oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleMove {
    pub from: Pose2,
    pub to: Vec2,
}

/// The smallest render delay that hides every move: the worst travel bound.
pub fn min_feasible_delay(moves: &[OracleMove], lim: &RobotLimits) -> f64 {
    moves
        .iter()
        .map(|m| travel_time_bound(&RobotState::new(m.from), m.to, lim))
        .fold(0.0, f64::max)
}

/// Workspace centre to each tile centre: where gestures send objects.
pub fn tile_moves(ws: &SharedWorkspace) -> Vec<OracleMove> {
    Tile::all()
        .map(|t| OracleMove {
            from: Pose2::at(0.0, 0.0),
            to: tile_center(t, ws),
        })
        .collect()
}

pub fn demo_workspace() -> SharedWorkspace {
    SharedWorkspace::new(Rect::new(0.35, 0.4).expect("positive extents"))
}

fn instance_err(path: &str, line: usize, message: impl ToString) -> CliError {
    CliError::Instance {
        path: path.to_string(),
        line,
        message: message.to_string(),
    }
}

/// Reads `ev=proxy id x y` and `ev=demand object x y` records.
pub fn parse_assignment(text: &str, path: &str) -> Result<(Vec<DemandPoint>, Vec<PoolProxy>), CliError> {
    let (mut demands, mut pool) = (Vec::new(), Vec::new());
    for (line, rec) in parse_lines(text) {
        let rec = rec.map_err(|e| instance_err(path, line, e))?;
        let num = |k: &str| rec.get_f64(k).map_err(|e| instance_err(path, line, e));
        let position = Vec2::new(num("x")?, num("y")?);
        match rec.get_text("ev").map_err(|e| instance_err(path, line, e))? {
            "proxy" => {
                let id: ProxyId = rec
                    .get_text("id")
                    .map_err(|e| instance_err(path, line, e))?
                    .parse()
                    .map_err(|e| instance_err(path, line, e))?;
                let room = rec.get_int("room").unwrap_or(1);
                pool.push(PoolProxy {
                    id,
                    room: u8::try_from(room).map_err(|_| instance_err(path, line, "room out of range"))?,
                    position,
                });
            }
            "demand" => demands.push(DemandPoint {
                object: ObjectId::new(rec.get_text("object").map_err(|e| instance_err(path, line, e))?),
                position,
                source: DemandSource::HandProximity,
            }),
            other => return Err(instance_err(path, line, format!("unknown record ev={other}"))),
        }
    }
    Ok((demands, pool))
}

/// Reads an optional `ev=workspace half_width half_depth` record and
/// `ev=move x0 y0 [h0] x y` records.
pub fn parse_masking(text: &str, path: &str) -> Result<Vec<OracleMove>, CliError> {
    let mut ws = None;
    let mut moves = Vec::new();
    for (line, rec) in parse_lines(text) {
        let rec = rec.map_err(|e| instance_err(path, line, e))?;
        let num = |k: &str| rec.get_f64(k).map_err(|e| instance_err(path, line, e));
        match rec.get_text("ev").map_err(|e| instance_err(path, line, e))? {
            "workspace" => {
                let r = Rect::new(num("half_width")?, num("half_depth")?).map_err(|e| instance_err(path, line, e))?;
                ws = Some(SharedWorkspace::new(r));
            }
            "move" => {
                let h = if rec.get("h0").is_some() { num("h0")? } else { 0.0 };
                moves.push(OracleMove {
                    from: Pose2::new(Vec2::new(num("x0")?, num("y0")?), h),
                    to: Vec2::new(num("x")?, num("y")?),
                });
            }
            other => return Err(instance_err(path, line, format!("unknown record ev={other}"))),
        }
    }
    if moves.is_empty() {
        moves = tile_moves(&ws.unwrap_or_else(demo_workspace));
    }
    Ok(moves)
}

pub fn cmd_oracle(kind: OracleKind, path: Option<&Path>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let text = match path.map(read).transpose() {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INVALID;
        }
    };
    let name = path.map_or("-".to_string(), |p| p.display().to_string());
    let report = match kind {
        OracleKind::Assignment => {
            let Some(text) = text else {
                let _ = writeln!(err, "error: the assignment oracle needs an instance file");
                return EXIT_INVALID;
            };
            parse_assignment(&text, &name).and_then(|(demands, pool)| {
                let a = optimal_assignment(&demands, &pool)?;
                let mut lines: Vec<Record> = demands
                    .iter()
                    .zip(&a.proxies)
                    .map(|(d, p)| {
                        Record::new()
                            .text("ev", "pair")
                            .text("object", d.object.as_str())
                            .text("proxy", p.to_string())
                    })
                    .collect();
                lines.push(Record::new().text("ev", "assignment").num("makespan", a.makespan));
                Ok(lines)
            })
        }
        OracleKind::Masking => {
            let moves = match text {
                Some(t) => parse_masking(&t, &name),
                None => Ok(tile_moves(&demo_workspace())),
            };
            moves.map(|moves| {
                let lim = RobotLimits::default();
                let mut lines: Vec<Record> = moves
                    .iter()
                    .map(|m| {
                        Record::new()
                            .text("ev", "move")
                            .num("x0", m.from.position.x)
                            .num("y0", m.from.position.y)
                            .num("x", m.to.x)
                            .num("y", m.to.y)
                            .num("bound", travel_time_bound(&RobotState::new(m.from), m.to, &lim))
                    })
                    .collect();
                lines.push(
                    Record::new()
                        .text("ev", "masking")
                        .int("moves", moves.len() as i64)
                        .num("min_delay", min_feasible_delay(&moves, &lim)),
                );
                lines
            })
        }
    };
    match report {
        Ok(lines) => {
            for l in lines {
                let _ = writeln!(out, "{l}");
            }
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_INVALID
        }
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(rendered.as_bytes())
            } else {
                out.write_all(rendered.as_bytes())
            };
            return code;
        }
    };
    match cli.command {
        Command::Run(cfg) => cmd_run(&cfg, out, err),
        Command::Validate { path } => cmd_validate(&path, out, err),
        Command::Script { name, seed } => match ScenarioKind::parse(&name) {
            Some(kind) => {
                let _ = out.write_all(builtin_script(kind, seed).to_text().as_bytes());
                EXIT_OK
            }
            None => {
                let names: Vec<&str> = ScenarioKind::ALL.iter().map(|k| k.as_str()).collect();
                let _ = writeln!(err, "error: unknown scenario {name:?} (expected one of {})", names.join(", "));
                EXIT_INVALID
            }
        },
        Command::Oracle { kind, path } => cmd_oracle(kind, path.as_deref(), out, err),
    }
}
