use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use deadline_aoi::report::{write_document, OutputPaths, ResultDocument, ResultRow, ViolationRow, OUT_DIR_ENV};
use deadline_aoi::scenario::{Scenario, SimulationSection};
use deadline_aoi::sim::{simulate_with, SimMode};
use deadline_aoi::system::{analyze, sweep, SweepAxis};
use deadline_aoi::validate::{self, Fault, ValidationOptions};
use deadline_aoi::{AnalyticalReport, Execution, SimulationReport};

#[derive(Parser)]
#[command(name = "deadline-aoi", version, about = "Drop rate and Age of Information of a two-user random-access channel")]
struct Cli {
    /// Run replications and sweep points on one thread.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the analytical model for one scenario.
    Analyze {
        #[arg(long)]
        scenario: PathBuf,
        #[command(flatten)]
        out: OutArg,
    },
    /// Simulate one scenario and report it next to the analysis.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        out: OutArg,
    },
    /// Evaluate the model along one parameter axis.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        /// One of q1, q2, lambda, d, gamma_db. Defaults to the scenario's [sweep] axis.
        #[arg(long)]
        axis: Option<String>,
        /// Comma-separated values or `start:stop:step`.
        #[arg(long, value_parser = parse_values)]
        values: Option<Values>,
        /// Also simulate every point.
        #[arg(long)]
        with_sim: bool,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        out: OutArg,
    },
    /// Run the analytical-vs-simulation cross-check suite.
    Validate {
        #[arg(long, default_value_t = 1_000_000)]
        slots: u64,
        #[arg(long, default_value_t = 8)]
        replications: u32,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        /// Deadlines assigned across the grid.
        #[arg(long, value_delimiter = ',', default_values_t = [1u32, 3, 5])]
        deadlines: Vec<u32>,
        /// SINR thresholds (dB) assigned across the grid.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_values_t = [-5.0, 0.0, 1.0])]
        gammas_db: Vec<f64>,
        /// Levels shared by q1, q2 and lambda.
        #[arg(long, value_delimiter = ',', default_values_t = [0.2, 0.5, 0.8])]
        levels: Vec<f64>,
        #[arg(long, hide = true)]
        inject_fault: Option<Fault>,
        #[command(flatten)]
        out: OutArg,
    },
}

#[derive(Args)]
struct OutArg {
    /// Output path stem; writes <stem>.csv, <stem>_violation.csv and <stem>.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimArgs {
    #[arg(long)]
    slots: Option<u64>,
    #[arg(long)]
    warmup_slots: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replications: Option<u32>,
    /// coupled or decoupled
    #[arg(long)]
    mode: Option<SimMode>,
}

impl SimArgs {
    fn overrides(&self) -> SimulationSection {
        SimulationSection {
            slots: self.slots,
            warmup_slots: self.warmup_slots,
            seed: self.seed,
            replications: self.replications,
            mode: self.mode,
        }
    }
}

/// Parsed `--values` list; a newtype so clap treats it as one value.
#[derive(Clone)]
struct Values(Vec<f64>);

fn parse_values(s: &str) -> Result<Values, String> {
    parse_value_list(s).map(Values)
}

fn parse_value_list(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
            .collect::<Result<_, _>>()?;
        let (start, stop, step) = (nums[0], nums[1], nums[2]);
        if !(step > 0.0) || stop < start {
            return Err("range needs start <= stop and a positive step".into());
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        // round away accumulated binary noise, e.g. 0.30000000000000004
        return Ok((0..=n).map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12).collect());
    }
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect()
}

/// Failure of a command; the exit status is 1.
struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

fn print_summary(label: &str, a: &AnalyticalReport, sim: Option<&SimulationReport>) {
    println!("{label}");
    println!("  MPR strength δ = {:.4} ({})", a.delta, a.mpr_class);
    println!("  μ1 = {:.6}   μ2 = {:.6}", a.mu1, a.mu2);
    println!(
        "  drop rate = {:.6}   throughput (derived) = {:.6}   busy = {:.6}",
        a.queue.drop_rate, a.queue.throughput, a.queue.busy_prob
    );
    println!(
        "  average AoI = {}   P{{A>1}} = {:.6}   P{{A>5}} = {:.6}   P{{A>10}} = {:.6}",
        a.aoi_average,
        a.aoi_violation(1),
        a.aoi_violation(5),
        a.aoi_violation(10)
    );
    if let Some(s) = sim {
        let ci = |c: Option<f64>| c.map(|v| format!(" ± {v:.6}")).unwrap_or_default();
        println!(
            "  simulated ({} mode, seed {}, {} × {} slots):",
            s.mode, s.seed, s.replications, s.slots
        );
        println!(
            "    drop rate = {:.6}{}   throughput = {:.6}{}   busy = {:.6}{}",
            s.drop_rate,
            ci(s.ci_halfwidth.drop_rate),
            s.throughput,
            ci(s.ci_halfwidth.throughput),
            s.busy_prob,
            ci(s.ci_halfwidth.busy_prob)
        );
        println!("    average AoI = {:.6}{}", s.aoi_average, ci(s.ci_halfwidth.aoi_average));
    }
}

fn write(paths: &OutputPaths, doc: &ResultDocument) -> Result<(), Failure> {
    write_document(paths, doc)?;
    println!("wrote {} and {}", paths.csv.display(), paths.json.display());
    Ok(())
}

fn load(path: &Path) -> Result<Scenario, Failure> {
    Scenario::load(path).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<bool, Failure> {
    let execution = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    match cli.command {
        Command::Analyze { scenario, out } => {
            let s = load(&scenario)?;
            let a = analyze(&s.params)?;
            print_summary("analytical report", &a, None);
            let doc = ResultDocument::new(
                "analyze",
                vec![ResultRow::new(None, &s.params, &a, None)],
                ViolationRow::curve(None, &a, None),
            );
            write(&OutputPaths::resolve(out.out.as_deref(), "analyze"), &doc)?;
            Ok(true)
        }
        Command::Simulate { scenario, sim, out } => {
            let s = load(&scenario)?;
            let cfg = s.sim_config(&sim.overrides());
            println!("seed {}", cfg.seed);
            let a = analyze(&s.params)?;
            let r = simulate_with(&cfg, execution)?;
            print_summary("analytical and simulated report", &a, Some(&r));
            let doc = ResultDocument::new(
                "simulate",
                vec![ResultRow::new(None, &s.params, &a, Some(&r))],
                ViolationRow::curve(None, &a, Some(&r)),
            );
            write(&OutputPaths::resolve(out.out.as_deref(), "simulate"), &doc)?;
            Ok(true)
        }
        Command::Sweep {
            scenario,
            axis,
            values,
            with_sim,
            sim,
            out,
        } => {
            let s = load(&scenario)?;
            let axis = match (axis, &s.sweep) {
                (Some(a), _) => a.parse::<SweepAxis>()?,
                (None, Some(spec)) => spec.axis,
                (None, None) => return Err(Failure("no sweep axis given (--axis or [sweep] axis)".into())),
            };
            let values = match (values, &s.sweep) {
                (Some(v), _) => v.0,
                (None, Some(spec)) => spec.values.clone(),
                (None, None) => return Err(Failure("no sweep values given (--values or [sweep] values)".into())),
            };
            let points = sweep(&s.params, axis, &values, execution)?;
            let sims = if with_sim {
                let base = s.sim_config(&sim.overrides());
                println!("seed {}", base.seed);
                let reports = deadline_aoi::exec::map(execution, &points, |p| {
                    let cfg = deadline_aoi::SimConfig { params: p.params, ..base.clone() };
                    simulate_with(&cfg, Execution::Sequential)
                });
                reports.into_iter().map(|r| r.map(Some)).collect::<Result<Vec<_>, _>>()?
            } else {
                vec![None; points.len()]
            };
            let mut rows = Vec::new();
            let mut curves = Vec::new();
            println!("{:>10} {:>12} {:>12} {:>12}", axis.as_str(), "drop_rate", "aoi_average", "delta");
            for (p, sim) in points.iter().zip(&sims) {
                println!(
                    "{:>10} {:>12.6} {:>12.6} {:>12.4}",
                    p.value,
                    p.report.queue.drop_rate,
                    p.report.aoi_average.as_f64(),
                    p.report.delta
                );
                rows.push(ResultRow::new(Some((axis, p.value)), &p.params, &p.report, sim.as_ref()));
                curves.extend(ViolationRow::curve(Some(p.value), &p.report, sim.as_ref()));
            }
            let doc = ResultDocument::new("sweep", rows, curves);
            write(&OutputPaths::resolve(out.out.as_deref(), &format!("sweep_{axis}")), &doc)?;
            Ok(true)
        }
        Command::Validate {
            slots,
            replications,
            seed,
            deadlines,
            gammas_db,
            levels,
            inject_fault,
            out,
        } => {
            if deadlines.is_empty() || gammas_db.is_empty() || levels.is_empty() {
                return Err(Failure("grid lists must not be empty".into()));
            }
            let opts = ValidationOptions {
                slots,
                replications,
                seed,
                levels,
                deadlines,
                gammas_db,
                fault: inject_fault,
                execution,
            };
            let verdict = validate::run(&opts)?;
            for c in &verdict.checks {
                println!("[{}] {:<48} {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            println!("coupled-mode average age gap per scenario:");
            for s in &verdict.scenarios {
                let sc = &s.scenario;
                println!(
                    "  q1={:.1} q2={:.1} λ={:.1} d={} γ={:+.0} dB: {:+.2}%",
                    sc.q1,
                    sc.q2,
                    sc.arrival_prob,
                    sc.deadline,
                    sc.gamma_db,
                    100.0 * s.coupled_aoi_gap
                );
            }
            let path = match out.out {
                Some(p) => p.with_extension("json"),
                None => std::env::var_os(OUT_DIR_ENV)
                    .map(PathBuf::from)
                    .unwrap_or_else(|| PathBuf::from("."))
                    .join("validate.json"),
            };
            let mut json = serde_json::to_vec_pretty(&verdict)?;
            json.push(b'\n');
            deadline_aoi::report::write_atomic(&path, &json)?;
            println!("verdict: {} (written to {})", if verdict.all_pass { "pass" } else { "FAIL" }, path.display());
            Ok(verdict.all_pass)
        }
    }
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
