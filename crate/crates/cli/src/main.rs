use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::AtomicBool;
use timetable_core::bench::{self, BenchConfig};
use timetable_core::generator::{self, GenParams};
use timetable_core::io::{
    describe_violation, load_problem, load_schedule, save_problem, save_schedule,
};
use timetable_core::model::check_schedule;
use timetable_core::search::{ActivityStrategy, HeuristicWeights};
use timetable_core::session::{Session, SessionEvent};
use timetable_core::SolverState;

#[derive(Parser)]
#[command(
    name = "timetable",
    version,
    about = "Timetable solver with live editing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem and write the resulting schedule.
    Solve(SolveArgs),
    /// Generate a feasible random instance.
    Generate {
        params: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the complete schedule the instance was built around.
        #[arg(long)]
        witness: Option<PathBuf>,
    },
    /// Compare activity-selection strategies over generated instances.
    Bench {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Write an SVG chart of the per-cell means.
        #[arg(long)]
        chart: Option<PathBuf>,
    },
    /// Check a schedule against a problem.
    Check {
        problem: PathBuf,
        schedule: PathBuf,
        /// Detach violating activities instead of failing.
        #[arg(long)]
        repair: bool,
        /// Where to write the repaired schedule.
        #[arg(long, requires = "repair")]
        out: Option<PathBuf>,
    },
    /// Run the live session service.
    Serve {
        /// Defaults to $TIMETABLE_PORT, then 8080.
        #[arg(long)]
        port: Option<u16>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Strategy {
    Random,
    Sampled,
    Full,
}

impl From<Strategy> for ActivityStrategy {
    fn from(s: Strategy) -> Self {
        match s {
            Strategy::Random => ActivityStrategy::Random,
            Strategy::Sampled => ActivityStrategy::Sampled,
            Strategy::Full => ActivityStrategy::Full,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    problem: PathBuf,
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "max-iter")]
    max_iter: Option<u64>,
    #[arg(long, value_enum)]
    strategy: Option<Strategy>,
    /// Schedule file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the best schedule seen (the default).
    #[arg(long, conflicts_with = "latest")]
    best: bool,
    /// Write the schedule as it stands when the solver stops.
    #[arg(long)]
    latest: bool,
    /// Start from an existing schedule.
    #[arg(long)]
    init: Option<PathBuf>,
    /// Repair an unsound `--init` schedule instead of refusing it.
    #[arg(long, requires = "init")]
    repair: bool,
    /// Write one JSON iteration report per line.
    #[arg(long)]
    trace: Option<PathBuf>,
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = read(path)?;
    serde_json::from_slice(&bytes).with_context(|| format!("{}", path.display()))
}

fn solve(args: SolveArgs) -> Result<()> {
    let problem =
        load_problem(&read(&args.problem)?).with_context(|| args.problem.display().to_string())?;
    let mut weights = match &args.weights {
        Some(p) => load_json::<HeuristicWeights>(p)?,
        None => HeuristicWeights::default(),
    };
    if let Some(n) = args.max_iter {
        weights.max_iterations = n;
    }
    if let Some(s) = args.strategy {
        weights.strategy = s.into();
    }
    let state = match &args.init {
        Some(path) => {
            let loaded = load_schedule(&read(path)?, &problem, args.repair)
                .with_context(|| path.display().to_string())?;
            if !loaded.detached.is_empty() {
                eprintln!("repair detached {} activities", loaded.detached.len());
            }
            SolverState::with_schedule(problem, loaded.schedule, weights, args.seed)?
        }
        None => SolverState::new(problem, weights, args.seed)?,
    };
    let mut session = Session::from_state(state);
    let mut trace = match &args.trace {
        Some(p) => Some(BufWriter::new(
            fs::File::create(p).with_context(|| format!("cannot write {}", p.display()))?,
        )),
        None => None,
    };
    let mut trace_err = None;
    let stop = AtomicBool::new(false);
    let ran = session.run(None, &stop, |event, _| {
        if let (SessionEvent::Iteration(report), Some(out)) = (event, trace.as_mut()) {
            let line = serde_json::to_string(&report).expect("reports serialize");
            if let Err(e) = writeln!(out, "{line}") {
                trace_err.get_or_insert(e);
            }
        }
    });
    if let Some(mut out) = trace {
        if let Some(e) = trace_err {
            return Err(e).context("writing trace");
        }
        out.flush().context("writing trace")?;
    }
    let state = session.state();
    let schedule = if args.latest {
        state.schedule()
    } else {
        &state.best().schedule
    };
    let bytes = save_schedule(state.problem(), schedule);
    match &args.out {
        Some(p) => write(p, &bytes)?,
        None => std::io::stdout().write_all(&bytes)?,
    }
    eprintln!(
        "{} iterations, {}/{} scheduled",
        ran,
        schedule.assigned().count(),
        state.problem().activity_count()
    );
    Ok(())
}

fn generate(params: &Path, out: &Path, witness: Option<&Path>) -> Result<()> {
    let params: GenParams = load_json(params)?;
    let inst = generator::generate(&params)?;
    write(out, &save_problem(&inst.problem))?;
    if let Some(w) = witness {
        write(w, &save_schedule(&inst.problem, &inst.witness))?;
    }
    eprintln!("{} activities", inst.problem.activity_count());
    Ok(())
}

fn run_bench(config: &Path, out: &Path, chart: Option<&Path>) -> Result<()> {
    let config: BenchConfig = load_json(config)?;
    let results = bench::run(&config)?;
    let file = fs::File::create(out).with_context(|| format!("cannot write {}", out.display()))?;
    bench::write_csv(&results, BufWriter::new(file))?;
    if let Some(c) = chart {
        write(c, bench::render_svg(&results.aggregates).as_bytes())?;
    }
    Ok(())
}

fn check(problem: &Path, schedule: &Path, repair: bool, out: Option<&Path>) -> Result<()> {
    let p = load_problem(&read(problem)?).with_context(|| problem.display().to_string())?;
    let bytes = read(schedule)?;
    if !repair {
        let parsed = timetable_core::io::parse_schedule(&bytes, &p)
            .with_context(|| schedule.display().to_string())?;
        let violations = check_schedule(&p, &parsed);
        if violations.is_empty() {
            println!(
                "sound: {} of {} activities scheduled",
                parsed.assigned().count(),
                p.activity_count()
            );
            return Ok(());
        }
        for v in &violations {
            println!("{}", describe_violation(&p, v));
        }
        bail!("{} violation(s)", violations.len());
    }
    let loaded = load_schedule(&bytes, &p, true).with_context(|| schedule.display().to_string())?;
    for a in &loaded.detached {
        println!("detached {}", p.activity(*a).id);
    }
    if let Some(o) = out {
        write(o, &save_schedule(&p, &loaded.schedule))?;
    }
    Ok(())
}

fn serve(port: Option<u16>) -> Result<()> {
    let port = port.unwrap_or_else(timetable_service::port_from_env);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(("0.0.0.0", port))
            .await
            .with_context(|| format!("cannot bind port {port}"))?;
        eprintln!("listening on {}", listener.local_addr()?);
        timetable_service::serve(listener, timetable_service::ServiceConfig::default()).await?;
        Ok(())
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(args) => solve(args),
        Command::Generate {
            params,
            out,
            witness,
        } => generate(&params, &out, witness.as_deref()),
        Command::Bench { config, out, chart } => run_bench(&config, &out, chart.as_deref()),
        Command::Check {
            problem,
            schedule,
            repair,
            out,
        } => check(&problem, &schedule, repair, out.as_deref()),
        Command::Serve { port } => serve(port),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
