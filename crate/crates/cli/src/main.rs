//! `cbve`: validate, solve and verify cumulant semigroups from a JSON config.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use cbve::config::{parse_config, Model, RunConfig};
use cbve::moments::solve_moment;
use cbve::simulator::{simulate_path, write_path_csv, SeedSpec, PATH_CSV_HEADER};
use cbve::solver::{solve_general, solve_special, CumulantSolution, SolverOptions};
use cbve::verify::{phi_n_gaps, verify, VerifySettings, LADDER};
use cbve::{build_phi_n, Error, SpecialForm, Species};

#[derive(Parser)]
#[command(name = "cbve", version, about = "Cumulant semigroups of two-type CB processes in varying environments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the moment and atom conditions and list bottlenecks.
    Validate(Common),
    /// Solve the backward system; CSV `r,v1,v2`.
    Solve(Common),
    /// Solve the first-moment equation; CSV `r,pi1,pi2`.
    Moments(Common),
    /// Run every applicable numerical check; exits 5 if any fails.
    Verify(Common),
    /// Simulate paths of a finite-activity model; CSV of events.
    Simulate(Common),
    /// Sup-node gap between the solution and its phi_n approximations.
    Approx(Common),
}

#[derive(Args)]
struct Common {
    /// Model file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Terminal time (defaults to the horizon).
    #[arg(long)]
    t: Option<f64>,
    /// Start time of the flow check.
    #[arg(long)]
    r: Option<f64>,
    /// Intermediate time of the flow check.
    #[arg(long)]
    s: Option<f64>,
    /// Terminal value `a,b` (default 1,1).
    #[arg(long, value_parser = parse_pair)]
    lambda: Option<[f64; 2]>,
    /// Initial state `a,b` for simulation (default 1,1).
    #[arg(long, value_parser = parse_pair)]
    x0: Option<[f64; 2]>,
    /// Number of simulated paths.
    #[arg(long)]
    paths: Option<usize>,
    /// Master seed, decimal or 0x-prefixed hex.
    #[arg(long, value_parser = parse_seed)]
    seed: Option<SeedSpec>,
    /// Grid refinement factor.
    #[arg(long)]
    refine: Option<usize>,
    /// Simulate `build_phi_n(env, n)` when the config is a general environment.
    #[arg(long)]
    ladder: Option<u32>,
    /// Output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [a, b] = parts.as_slice() else {
        return Err(format!("expected two comma-separated numbers, got `{s}`"));
    };
    let num = |x: &str| x.parse::<f64>().map_err(|e| format!("`{x}`: {e}"));
    Ok([num(a)?, num(b)?])
}

fn parse_seed(s: &str) -> Result<SeedSpec, String> {
    SeedSpec::parse(s).map_err(|e| e.to_string())
}

/// A message and the process exit code that goes with it.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::Structure { .. } | Error::Domain(_) => 2,
            Error::Inadmissible(_) => 3,
            Error::Contract(_)
            | Error::Discretization { .. }
            | Error::Overflow { .. }
            | Error::NonConvergence { .. } => 4,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure { code: 2, message: e.to_string() }
    }
}

type CliResult<T> = Result<T, Failure>;

struct Job {
    cfg: RunConfig,
    args: Common,
}

impl Job {
    fn load(args: Common) -> CliResult<Self> {
        let text = fs::read_to_string(&args.config)
            .map_err(|e| Failure { code: 2, message: format!("{}: {e}", args.config.display()) })?;
        let cfg = parse_config(&text)?;
        info!("loaded {} (horizon {})", args.config.display(), cfg.model.horizon());
        Ok(Self { cfg, args })
    }

    fn t(&self) -> f64 {
        self.args.t.or(self.cfg.run.t).unwrap_or(self.cfg.model.horizon())
    }

    fn lambda(&self) -> [f64; 2] {
        self.args.lambda.or(self.cfg.run.lambda).unwrap_or([1.0, 1.0])
    }

    fn x0(&self) -> [f64; 2] {
        self.args.x0.or(self.cfg.run.x0).unwrap_or([1.0, 1.0])
    }

    fn seed(&self) -> SeedSpec {
        self.args.seed.unwrap_or_else(|| SeedSpec::new(self.cfg.run.seed.unwrap_or(0)))
    }

    fn refine(&self) -> Option<usize> {
        self.args.refine.or(self.cfg.run.refine)
    }

    fn paths(&self) -> Option<usize> {
        self.args.paths.or(self.cfg.run.paths)
    }

    /// The model with `--refine` applied.
    fn model(&self) -> CliResult<Model> {
        let k = self.refine().unwrap_or(1);
        Ok(match &self.cfg.model {
            Model::General(env) if k > 1 => Model::General(env.refined(k)?),
            Model::Special(sf) if k > 1 => Model::Special(sf.refined(k)?),
            m => m.clone(),
        })
    }

    fn output(&self) -> CliResult<Box<dyn Write>> {
        Ok(match &self.args.out {
            Some(p) => Box::new(BufWriter::new(fs::File::create(p)?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }
}

fn write_rows(out: &mut dyn Write, header: &str, rows: impl Iterator<Item = (f64, [f64; 2])>) -> io::Result<()> {
    writeln!(out, "{header}")?;
    for (r, v) in rows {
        writeln!(out, "{r:.16e},{:.16e},{:.16e}", v[0], v[1])?;
    }
    out.flush()
}

fn validate(job: &Job) -> CliResult<()> {
    let env = job.cfg.model.environment()?;
    let rep = env.validate();
    let mut out = job.output()?;
    writeln!(out, "status: {}", if rep.ok { "ok" } else { "inadmissible" })?;
    for i in Species::BOTH {
        let k = i.index();
        writeln!(out, "type {}: m(T) = {:.16e}, max delta = {:.16e}", k + 1, rep.moment_values[k], rep.delta_max[k])?;
    }
    if rep.bottleneck_times.is_empty() {
        writeln!(out, "bottlenecks: none")?;
    }
    for (s, i) in &rep.bottleneck_times {
        writeln!(out, "bottleneck: t = {s:.16e}, type {}", i.index() + 1)?;
    }
    for m in &rep.messages {
        writeln!(out, "{m}")?;
    }
    out.flush()?;
    if rep.ok {
        Ok(())
    } else {
        Err(Failure { code: 3, message: rep.messages.join("; ") })
    }
}

fn solve(job: &Job) -> CliResult<()> {
    let (t, lambda, opts) = (job.t(), job.lambda(), SolverOptions::default());
    let sol: CumulantSolution = match job.model()? {
        Model::General(env) => solve_general(&env, t, lambda, &opts)?,
        Model::Special(sf) => solve_special(&sf, t, lambda, &opts)?,
    };
    info!("{} clamp events", sol.clamp_events);
    write_rows(&mut *job.output()?, "r,v1,v2", sol.rows())?;
    Ok(())
}

fn moments(job: &Job) -> CliResult<()> {
    let env = job.model()?.environment()?;
    let sol = solve_moment(&env, job.t(), job.lambda())?;
    write_rows(&mut *job.output()?, "r,pi1,pi2", sol.rows())?;
    Ok(())
}

fn run_verify(job: &Job) -> CliResult<()> {
    let model = &job.cfg.model;
    let mut set = VerifySettings::for_horizon(model.horizon());
    set.t = job.t();
    set.s = job.args.s.or(job.cfg.run.s).unwrap_or(0.5 * set.t);
    set.r = job.args.r.or(job.cfg.run.r).unwrap_or(0.0);
    set.lambda = job.lambda();
    set.x0 = job.x0();
    set.seed = job.seed();
    set.paths = job.paths().unwrap_or(set.paths);
    set.refine = job.refine().unwrap_or(set.refine);
    let results = verify(model, &set)?;
    let mut out = job.output()?;
    for c in &results {
        writeln!(out, "{c}")?;
    }
    out.flush()?;
    let failed: Vec<&str> = results.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure { code: 5, message: format!("failed: {}", failed.join(", ")) })
    }
}

fn simulated_model(job: &Job) -> CliResult<SpecialForm> {
    match (job.model()?, job.args.ladder) {
        (Model::Special(sf), None) => Ok(sf),
        (Model::Special(_), Some(_)) => {
            Err(Failure { code: 2, message: "--ladder applies to general environments only".into() })
        }
        (Model::General(env), Some(n)) => {
            env.ensure_admissible()?;
            Ok(build_phi_n(&env, n)?)
        }
        (Model::General(_), None) => Err(Failure {
            code: 2,
            message: "simulation needs a special-form config, or --ladder n to use phi_n".into(),
        }),
    }
}

fn simulate(job: &Job) -> CliResult<()> {
    let sf = simulated_model(job)?;
    let (t, x0, seed) = (job.t(), job.x0(), job.seed());
    let mut out = job.output()?;
    writeln!(out, "{PATH_CSV_HEADER}")?;
    for path in 0..job.paths().unwrap_or(1) as u64 {
        let (end, events) = simulate_path(&sf, x0, t, &seed, path)?;
        info!("path {path}: {} events, X(t) = ({:e}, {:e})", events.len(), end[0], end[1]);
        write_path_csv(&mut out, path, &events)?;
    }
    out.flush()?;
    Ok(())
}

fn approx(job: &Job) -> CliResult<()> {
    let env = job.model()?.environment()?;
    env.ensure_admissible()?;
    let gaps = phi_n_gaps(&env, job.t(), job.lambda(), &LADDER, &SolverOptions::default())?;
    let mut out = job.output()?;
    writeln!(out, "n,sup_gap")?;
    for (n, g) in gaps {
        writeln!(out, "{n},{g:.16e}")?;
    }
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("CBVE_LOG")).init();
    let cli = Cli::parse();
    let (args, run): (Common, fn(&Job) -> CliResult<()>) = match cli.command {
        Command::Validate(a) => (a, validate),
        Command::Solve(a) => (a, solve),
        Command::Moments(a) => (a, moments),
        Command::Verify(a) => (a, run_verify),
        Command::Simulate(a) => (a, simulate),
        Command::Approx(a) => (a, approx),
    };
    match Job::load(args).and_then(|job| run(&job)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
