mod config;
mod engine;
mod output;
mod propagate;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{anyhow, bail};
use clap::{Parser, Subcommand};
use rayon::prelude::*;

use config::{Config, Engine, AXIS_NAMES};
use engine::{Outcome, ReferenceCache};
use output::{fmt_opt, record, Journal};

/// Directory for tables when `--out` is not given.
const OUT_DIR_ENV: &str = "CIRSIM_OUT_DIR";

#[derive(Parser)]
#[command(name = "cirsim", version, about = "Two-body scattering in a harmonic waveguide")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the engine of the configuration.
    #[arg(long, global = true, value_enum)]
    engine: Option<Engine>,
    /// Output table (defaults to $CIRSIM_OUT_DIR/<command>.csv, else stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Continue from the journal (sweeps) or checkpoint (propagate).
    #[arg(long, global = true)]
    resume: bool,
    /// Parameter override `name=value`; repeatable.
    #[arg(long = "set", global = true, value_name = "NAME=VALUE")]
    set: Vec<String>,
    /// JSON-lines file for per-row diagnostics.
    #[arg(long, global = true)]
    diagnostics: Option<PathBuf>,
    /// Stop after this many newly computed rows (leaves the journal behind).
    #[arg(long, global = true, hide = true)]
    stop_after: Option<usize>,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Scattering lengths and bound-state counts over the sweep axes.
    Lengths,
    /// Transmission at the configured point.
    Transmission,
    /// Transmission over the sweep axes.
    Sweep,
    /// Single wave-packet run with a time series and checkpoints.
    Propagate,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Lengths => "lengths",
            Command::Transmission => "transmission",
            Command::Sweep => "sweep",
            Command::Propagate => "propagate",
        }
    }
}

/// Failure classes mapped onto exit codes.
enum Failure {
    Config(anyhow::Error),
    Rows(usize),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Rows(n)) => {
            eprintln!("cirsim: {n} row(s) failed");
            ExitCode::from(1)
        }
        Err(Failure::Config(e)) => {
            eprintln!("cirsim: configuration error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Other(e)) => {
            eprintln!("cirsim: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn resolve_config(cli: &Cli) -> anyhow::Result<Config> {
    let mut cfg = Config::load(cli.config.as_deref())?;
    for s in &cli.set {
        let (name, value) = s.split_once('=').ok_or_else(|| anyhow!("--set expects NAME=VALUE, got `{s}`"))?;
        let name = name.trim();
        if !AXIS_NAMES.contains(&name) {
            bail!("unknown parameter `{name}` (known: {})", AXIS_NAMES.join(", "));
        }
        let value: f64 = value.trim().parse().map_err(|_| anyhow!("`{value}` is not a number"))?;
        cfg = cfg.with_param(name, value);
    }
    if let Some(e) = cli.engine {
        cfg.sweep.engine = e;
    }
    if let Some(j) = cli.jobs {
        cfg.sweep.jobs = j;
    }
    Ok(cfg)
}

fn output_path(cli: &Cli) -> Option<PathBuf> {
    cli.out
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(|d| Path::new(&d).join(format!("{}.csv", cli.command.name()))))
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let cfg = resolve_config(cli).map_err(Failure::Config)?;
    let out = output_path(cli);
    match cli.command {
        Command::Propagate => propagate::run(&cfg, out.as_deref(), cli.resume),
        cmd => {
            if cli.resume && out.is_none() {
                return Err(Failure::Config(anyhow!("--resume needs an output file")));
            }
            let points = match cmd {
                Command::Transmission => vec![Vec::new()],
                _ => grid_points(&cfg),
            };
            let columns = columns(cmd, &cfg);
            run_rows(cli, cmd, &cfg, &points, &columns, out.as_deref())
        }
    }
}

/// Cartesian product of the axes, first axis slowest.
fn grid_points(cfg: &Config) -> Vec<Vec<(String, f64)>> {
    let mut points = vec![Vec::new()];
    for ax in &cfg.sweep.axis {
        let vals = ax.values();
        points = points
            .into_iter()
            .flat_map(|p| {
                vals.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push((ax.name.clone(), v));
                    q
                })
            })
            .collect();
    }
    points
}

fn columns(cmd: Command, cfg: &Config) -> Vec<&'static str> {
    if cmd == Command::Lengths {
        return vec!["index", "kind", "v0", "r0", "a_s", "a_p", "v_p", "n_bound_s", "n_bound_p", "status", "error"];
    }
    let mut c =
        vec!["index", "engine", "kind", "v0", "r0", "a_perp", "omega_ratio", "mass_ratio", "epsilon", "k0", "c"];
    if cfg.sweep.engine == Engine::WavePacket {
        c.extend(["a_z", "z0", "dt", "l_max"]);
    }
    c.extend(["a_s", "v_p", "a_perp_over_a_s", "t", "r"]);
    if cfg.sweep.even_only {
        c.push("t_even_only");
    }
    c.extend(["source", "status", "error"]);
    c
}

fn kind_name(cfg: &Config) -> String {
    serde_json::to_value(cfg.potential.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}

fn row_fields(cmd: Command, index: usize, cfg: &Config, o: &Outcome) -> Vec<String> {
    let f = |x: f64| output::fmt_f64(x);
    let (status, error) = match &o.error {
        Some((code, msg)) => (code.to_string(), msg.clone()),
        None => ("ok".to_string(), String::new()),
    };
    let mut v = vec![index.to_string()];
    if cmd == Command::Lengths {
        v.extend([kind_name(cfg), f(cfg.potential.v0), f(cfg.potential.r0)]);
        v.push(fmt_opt(o.a_s));
        v.push(fmt_opt(o.v_p.map(f64::cbrt)));
        v.push(fmt_opt(o.v_p));
        v.push(o.n_bound_s.map(|n| n.to_string()).unwrap_or_default());
        v.push(o.n_bound_p.map(|n| n.to_string()).unwrap_or_default());
        v.extend([status, error]);
        return v;
    }
    v.push(cfg.sweep.engine.as_str().into());
    v.extend([kind_name(cfg), f(cfg.potential.v0), f(cfg.potential.r0)]);
    v.extend([f(cfg.trap.a_perp), f(cfg.trap.omega_ratio), f(cfg.trap.mass_ratio), f(cfg.collision.epsilon)]);
    v.push(fmt_opt(o.k0));
    v.push(f(cfg.collision.c));
    if cfg.sweep.engine == Engine::WavePacket {
        let l_max = cfg.propagation.l_max.map(|l| l.to_string()).unwrap_or_else(|| "auto".into());
        v.extend([f(cfg.packet.a_z), f(cfg.packet.z0), f(cfg.propagation.dt), l_max]);
    }
    v.push(fmt_opt(o.a_s));
    v.push(fmt_opt(o.v_p));
    v.push(fmt_opt(o.a_s.map(|a| cfg.trap.a_perp / a)));
    v.push(fmt_opt(o.t));
    v.push(fmt_opt(o.t.map(|t| 1.0 - t)));
    if cfg.sweep.even_only {
        v.push(fmt_opt(o.t_even_only));
    }
    v.push(o.source.unwrap_or("").into());
    v.extend([status, error]);
    v
}

fn run_rows(
    cli: &Cli,
    cmd: Command,
    base: &Config,
    points: &[Vec<(String, f64)>],
    columns: &[&str],
    out: Option<&Path>,
) -> Result<(), Failure> {
    let hash = base.hash();
    let (journal, restored) = match out {
        Some(p) => {
            let (j, r) = Journal::open(p, &hash, points.len(), cli.resume).map_err(Failure::Config)?;
            (Some(Mutex::new(j)), r.rows)
        }
        None => (None, BTreeMap::new()),
    };
    let cache = ReferenceCache::default();
    let budget = AtomicUsize::new(cli.stop_after.unwrap_or(usize::MAX));
    let failures = AtomicUsize::new(0);
    let journal_error: Mutex<Option<anyhow::Error>> = Mutex::new(None);

    let compute = |index: usize| -> Option<(String, BTreeMap<String, f64>)> {
        if let Some((line, d)) = restored.get(&index) {
            if !line_failed(line, columns) {
                return Some((line.clone(), d.clone()));
            }
        }
        if budget.fetch_update(Ordering::SeqCst, Ordering::SeqCst, |b| b.checked_sub(1)).is_err() {
            return None;
        }
        let cfg = points[index].iter().fold(base.clone(), |c, (n, v)| c.with_param(n, *v));
        let o = match cmd {
            Command::Lengths => engine::lengths(&cfg),
            _ => engine::transmission(&cfg, cfg.sweep.engine, &cache),
        };
        let line = record(&row_fields(cmd, index, &cfg, &o));
        let mut d = o.diagnostics.clone();
        d.insert("wall_time_s".into(), o.wall_time);
        if o.error.is_none() {
            if let Some(j) = &journal {
                if let Err(e) = j.lock().expect("journal lock").append(index, &line, &d) {
                    *journal_error.lock().expect("lock") = Some(e);
                }
            }
        }
        Some((line, d))
    };

    let jobs = if base.sweep.jobs == 0 {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        base.sweep.jobs
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(|e| Failure::Other(e.into()))?;
    let rows: Vec<Option<(String, BTreeMap<String, f64>)>> =
        pool.install(|| (0..points.len()).into_par_iter().map(compute).collect());

    if let Some(e) = journal_error.into_inner().expect("lock") {
        return Err(Failure::Other(e));
    }
    if rows.iter().any(Option::is_none) {
        let done = rows.iter().filter(|r| r.is_some()).count();
        eprintln!("cirsim: stopped after {done} of {} rows; rerun with --resume", points.len());
        return Err(Failure::Other(anyhow!("sweep interrupted")));
    }

    let mut text = output::header_comments(cmd.name(), &hash);
    text.push_str(&record(&columns.iter().map(|c| c.to_string()).collect::<Vec<_>>()));
    text.push('\n');
    let mut diag = String::new();
    for (i, row) in rows.iter().enumerate() {
        let (line, d) = row.as_ref().expect("checked above");
        if line_failed(line, columns) {
            failures.fetch_add(1, Ordering::SeqCst);
        }
        text.push_str(line);
        text.push('\n');
        diag.push_str(&output::diagnostics_line(i, d));
        diag.push('\n');
    }
    match out {
        Some(p) => output::write_atomic(p, &text)?,
        None => print!("{text}"),
    }
    if let Some(p) = &cli.diagnostics {
        output::write_atomic(p, &diag)?;
    }
    if let Some(j) = journal {
        j.into_inner().expect("lock").remove()?;
    }
    match failures.load(Ordering::SeqCst) {
        0 => Ok(()),
        n => Err(Failure::Rows(n)),
    }
}

/// Reads the `status` field back from a formatted row.
fn line_failed(line: &str, columns: &[&str]) -> bool {
    let pos = columns.iter().position(|c| *c == "status").expect("status column");
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(line.as_bytes());
    r.records().next().and_then(|x| x.ok()).and_then(|rec| rec.get(pos).map(|s| s != "ok")).unwrap_or(true)
}
