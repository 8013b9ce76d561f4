use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use liftmix::analysis::{evolve, mixing_time};
use liftmix::bounds::{
    component_bounds, f_double_prime_law, middle_component_minimum, occurrence_lower_bound,
    rho_bound, rho_limit, tv_upper_bound, tv_upper_bound_limit,
};
use liftmix::config::{Command, RunConfig};
use liftmix::experiments::{default_cap, ScalingStudy};
use liftmix::kernel::{KernelLabel, ThetaSpec};
use liftmix::sampler::{empirical_tv, run};
use liftmix::verify::{verify_suites, Suite, VerifyReport};
use liftmix::{DistributionSpec, Family};

#[derive(Parser)]
#[command(
    name = "liftmix",
    version,
    about = "Mixing analysis of Metropolis and lifted samplers on a path"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the transition kernel as JSON.
    Kernel(SamplerArgs),
    /// Check that the stationary law is invariant under one step.
    Stationary(Common),
    /// Exact mixing time; writes the d(t) curve as CSV.
    Mix(MixArgs),
    /// Simulate a run; writes the occupancy CSV.
    Simulate(SimulateArgs),
    /// Path enumeration, flip-count and shortening checks.
    Paths(PathsArgs),
    /// Evaluate the bound formulas for the constants in the config.
    Bounds(BoundsArgs),
    /// Mixing times over a grid of n with a log-log fit.
    Scaling(ScalingArgs),
    /// Run every check at one distribution.
    VerifyAll(VerifyArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Weight family: uniform, symmetric-tent (tent), asymmetric-tent,
    /// geometric-peak, plateau.
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    /// Family parameter, e.g. `--param r=0.3`.
    #[arg(long = "param", value_parser = parse_param)]
    params: Vec<(String, f64)>,
    /// Explicit weights, comma separated; overrides --family.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    weights: Option<Vec<f64>>,
    /// A number in (0, 1) or `1/n`.
    #[arg(long)]
    theta: Option<ThetaSpec>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = "LIFTMIX_OUT_DIR")]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SamplerArgs {
    #[command(flatten)]
    common: Common,
    /// metropolis or dhn.
    #[arg(long)]
    sampler: Option<KernelLabel>,
}

#[derive(Args)]
struct MixArgs {
    #[command(flatten)]
    inner: SamplerArgs,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    t_cap: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    inner: SamplerArgs,
    #[arg(long)]
    steps: Option<usize>,
    /// Start state index; the basepoint when absent.
    #[arg(long)]
    start: Option<usize>,
}

#[derive(Args)]
struct PathsArgs {
    #[command(flatten)]
    common: Common,
    /// Path length for the enumeration check.
    #[arg(long = "length", short = 'L')]
    length: Option<usize>,
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    excursions: Option<usize>,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    common: Common,
    /// JSON file holding the bound constants; overrides the config's `bounds`.
    #[arg(long = "params")]
    params_file: Option<PathBuf>,
}

#[derive(Args)]
struct ScalingArgs {
    #[command(flatten)]
    inner: SamplerArgs,
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    n_list: Option<Vec<usize>>,
    #[arg(long)]
    delta: Option<f64>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    excursions: Option<usize>,
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected key=value, got `{s}`"))?;
    let v = v.parse::<f64>().map_err(|e| format!("{k}: {e}"))?;
    Ok((k.trim().to_string(), v))
}

/// Check failures exit with 1; everything else that goes wrong is a usage
/// error.
enum Outcome {
    Ok,
    ChecksFailed,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::ChecksFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load(common: &Common, command: Command) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            RunConfig::from_json(&text)?
        }
        None => RunConfig::default(),
    };
    cfg.command = command;
    if let Some(w) = &common.weights {
        cfg.distribution = DistributionSpec::Weights { weights: w.clone() };
    } else if common.family.is_some() || common.n.is_some() || !common.params.is_empty() {
        let (mut family, mut n, mut params) = match &cfg.distribution {
            DistributionSpec::Family { family, n, params } => (family.clone(), *n, params.clone()),
            DistributionSpec::Weights { weights } => {
                ("uniform".to_string(), weights.len(), Default::default())
            }
        };
        if let Some(f) = &common.family {
            family = f.parse::<Family>()?.name().to_string();
        }
        if let Some(v) = common.n {
            n = v;
        }
        params.extend(common.params.iter().cloned());
        cfg.distribution = DistributionSpec::Family { family, n, params };
    }
    if let Some(t) = common.theta {
        cfg.theta = t;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(d) = &common.out_dir {
        cfg.out_dir = Some(d.clone());
    }
    Ok(cfg)
}

fn load_sampler(a: &SamplerArgs, command: Command) -> Result<RunConfig> {
    let mut cfg = load(&a.common, command)?;
    if let Some(s) = a.sampler {
        cfg.sampler = s;
    }
    Ok(cfg)
}

fn out_path(cfg: &RunConfig, name: &str) -> Result<PathBuf> {
    let dir = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir.join(name))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn print(value: &serde_json::Value) {
    emit(&serde_json::to_string_pretty(value).expect("json output"));
}

/// Writes a line to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn dispatch(cmd: Cmd) -> Result<Outcome> {
    match cmd {
        Cmd::Kernel(a) => {
            let cfg = load_sampler(&a, Command::Kernel)?;
            let pi = cfg.distribution.build()?.normalize();
            print(&cfg.sampler.build(&pi, cfg.theta)?.to_json());
            Ok(Outcome::Ok)
        }
        Cmd::Stationary(c) => stationary(&load(&c, Command::Stationary)?),
        Cmd::Mix(a) => {
            let mut cfg = load_sampler(&a.inner, Command::Mix)?;
            if let Some(d) = a.delta {
                cfg.delta = d;
            }
            if a.t_cap.is_some() {
                cfg.t_cap = a.t_cap;
            }
            mix(&cfg)
        }
        Cmd::Simulate(a) => {
            let mut cfg = load_sampler(&a.inner, Command::Simulate)?;
            if let Some(s) = a.steps {
                cfg.steps = s;
            }
            simulate(&cfg, a.start)
        }
        Cmd::Paths(a) => {
            let mut cfg = load(&a.common, Command::Paths)?;
            if let Some(l) = a.length {
                cfg.length = l;
            }
            if let Some(b) = a.budget {
                cfg.budget = b;
            }
            if let Some(e) = a.excursions {
                cfg.excursions = e;
            }
            report(&cfg, &Suite::PATHS, "paths.json")
        }
        Cmd::Bounds(a) => {
            let mut cfg = load(&a.common, Command::Bounds)?;
            if let Some(path) = &a.params_file {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                cfg.bounds = serde_json::from_str(&text)
                    .with_context(|| format!("parsing {}", path.display()))?;
            }
            bounds(&cfg)
        }
        Cmd::Scaling(a) => {
            let mut cfg = load_sampler(&a.inner, Command::Scaling)?;
            if let Some(list) = &a.n_list {
                cfg.n_list = list.clone();
            }
            if let Some(d) = a.delta {
                cfg.delta = d;
            }
            scaling(&cfg)
        }
        Cmd::VerifyAll(a) => {
            let mut cfg = load(&a.common, Command::VerifyAll)?;
            if let Some(e) = a.excursions {
                cfg.excursions = e;
            }
            report(&cfg, &Suite::ALL, "verify.json")
        }
    }
}

fn stationary(cfg: &RunConfig) -> Result<Outcome> {
    let pi = cfg.distribution.build()?.normalize();
    let mut out = serde_json::Map::new();
    let mut ok = true;
    for label in [KernelLabel::Metropolis, KernelLabel::Dhn] {
        let k = label.build(&pi, cfg.theta)?;
        let target = k.stationary();
        let gap: f64 = evolve(&k, &target, 1)?
            .iter()
            .zip(&target)
            .map(|(a, b)| (a - b).abs())
            .sum();
        ok &= gap < cfg.tolerances.stationarity;
        out.insert(
            label.to_string(),
            json!({ "l1_gap": gap, "states": k.state_count() }),
        );
    }
    out.insert("tolerance".into(), json!(cfg.tolerances.stationarity));
    out.insert("passed".into(), json!(ok));
    print(&serde_json::Value::Object(out));
    Ok(if ok {
        Outcome::Ok
    } else {
        Outcome::ChecksFailed
    })
}

fn mix(cfg: &RunConfig) -> Result<Outcome> {
    let pi = cfg.distribution.build()?.normalize();
    let k = cfg.sampler.build(&pi, cfg.theta)?;
    let cap = cfg.t_cap.unwrap_or_else(|| default_cap(cfg.sampler, k.n()));
    let r = mixing_time(&k, &k.stationary(), cfg.delta, cap)?;
    let path = out_path(cfg, &format!("mix_{}_n{}.csv", cfg.sampler, k.n()))?;
    write(&path, &r.curve_csv())?;
    let rise = r.max_increase();
    let monotone = rise <= cfg.tolerances.curve;
    print(&json!({
        "sampler": cfg.sampler,
        "distribution": cfg.distribution.label(),
        "n": r.n,
        "theta": k.theta(),
        "delta": r.delta,
        "t_mix": r.t_mix,
        "worst_start": k.describe_state(r.worst_start),
        "max_increase": rise,
        "monotone": monotone,
        "curve": path,
    }));
    Ok(if monotone {
        Outcome::Ok
    } else {
        Outcome::ChecksFailed
    })
}

fn simulate(cfg: &RunConfig, start: Option<usize>) -> Result<Outcome> {
    let pi = cfg.distribution.build()?.normalize();
    let k = cfg.sampler.build(&pi, cfg.theta)?;
    let start = start.unwrap_or_else(|| k.basepoint());
    let r = run(&k, start, cfg.steps, cfg.seed)?;
    let path = out_path(cfg, &format!("occupancy_{}_n{}.csv", cfg.sampler, k.n()))?;
    write(&path, &r.occupancy_csv())?;
    let tv = if cfg.steps > 0 {
        Some(empirical_tv(&r, &k.stationary())?)
    } else {
        None
    };
    print(&json!({
        "sampler": cfg.sampler,
        "distribution": cfg.distribution.label(),
        "n": k.n(),
        "seed": r.seed,
        "steps": r.steps,
        "start": k.describe_state(r.start),
        "final_state": k.describe_state(r.final_state),
        "move_counts": r.move_counts,
        "empirical_tv": tv,
        "occupancy": path,
    }));
    Ok(Outcome::Ok)
}

fn report(cfg: &RunConfig, suites: &[Suite], file: &str) -> Result<Outcome> {
    let r: VerifyReport = verify_suites(cfg, suites)?;
    let text = r.to_json();
    if cfg.out_dir.is_some() {
        write(&out_path(cfg, file)?, &text)?;
    }
    emit(&text);
    Ok(if r.passed {
        Outcome::Ok
    } else {
        Outcome::ChecksFailed
    })
}

fn bounds(cfg: &RunConfig) -> Result<Outcome> {
    let w = cfg.distribution.build()?;
    let n = w.n();
    let p = cfg.bounds.with_radii(&w)?;
    let occurrence = (1..=n)
        .map(|j| occurrence_lower_bound(&p, &w, j).map(|b| json!({ "j": j, "bound": b })))
        .collect::<liftmix::Result<Vec<_>>>()?;
    let components = (1..=n)
        .map(|j| component_bounds(&w, j, p.c, p.f1).map(|b| json!({ "j": j, "bound": b })))
        .collect::<liftmix::Result<Vec<_>>>()?;
    let (middle_min, at) = middle_component_minimum(n, p.c, p.f1)?;
    let law = f_double_prime_law(&p, n)?;
    let rho = rho_bound(&p, n);
    let limit = rho_limit(&p);
    let value = |r: &liftmix::Result<f64>| match r {
        Ok(v) => json!(v),
        Err(e) => json!({ "error": e.to_string() }),
    };
    print(&json!({
        "distribution": cfg.distribution.label(),
        "n": n,
        "params": p,
        "derived_c_hat": p.derived_c_hat(),
        "occurrence": occurrence,
        "components": components,
        "middle_minimum": { "value": middle_min, "s": at },
        "added_flip_law": { "trials": law.trials, "success": law.success, "mean": law.mean() },
        "rho": value(&rho),
        "rho_limit": value(&limit),
        "tv_upper_bound": value(&tv_upper_bound(&p, n)),
        "tv_upper_bound_limit": value(&tv_upper_bound_limit(&p)),
    }));
    Ok(if rho.is_ok() && limit.is_ok() {
        Outcome::Ok
    } else {
        Outcome::ChecksFailed
    })
}

fn scaling(cfg: &RunConfig) -> Result<Outcome> {
    let (family, params) = match &cfg.distribution {
        DistributionSpec::Family { family, params, .. } => {
            (family.parse::<Family>()?, params.clone())
        }
        DistributionSpec::Weights { .. } => {
            bail!("scaling needs a weight family, not explicit weights")
        }
    };
    let study = ScalingStudy {
        params,
        delta: cfg.delta,
        theta: cfg.theta,
        ..ScalingStudy::new(family, cfg.sampler, cfg.n_list.clone())
    };
    let r = study.run()?;
    let path = out_path(
        cfg,
        &format!("scaling_{}_{}.csv", family.name(), cfg.sampler),
    )?;
    write(&path, &r.csv())?;
    print(&json!({
        "family": r.family,
        "sampler": r.sampler,
        "delta": r.delta,
        "theta": r.theta,
        "points": r.points,
        "slope": r.slope,
        "intercept": r.intercept,
        "r_squared": r.r_squared,
        "csv": path,
    }));
    Ok(Outcome::Ok)
}
