use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use kcm::auxperc::{self, AuxParams, TransferOutcome, Verdict};
use kcm::bootstrap::{self, InfectionState, Region, SearchBudget};
use kcm::dual;
use kcm::error::Result;
use kcm::family::{UpdateFamily, Vec2};
use kcm::harris::{self, Boundary, Geometry};
use kcm::lab::{self, ExperimentConfig, FitOutcome, LocalFunction};
use kcm::rng::Purpose;

#[derive(Parser)]
#[command(
    name = "kcm",
    about = "Simulation and verification toolkit for kinetically constrained models",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Update-family geometry: classification and stable directions.
    Family {
        #[command(subcommand)]
        command: FamilyCommand,
    },
    /// Bootstrap percolation closure and spread certificates.
    Bootstrap {
        #[command(subcommand)]
        command: BootstrapCommand,
    },
    /// Stochastic dynamics over sampled clock rings.
    Sim {
        #[command(subcommand)]
        command: SimCommand,
    },
    /// Dual paths, codings, and jump statistics.
    Dual {
        #[command(subcommand)]
        command: DualCommand,
    },
    /// Auxiliary oriented percolation diagnostics.
    Aux {
        #[command(subcommand)]
        command: AuxCommand,
    },
    /// Measurement experiments.
    Lab {
        #[command(subcommand)]
        command: LabCommand,
    },
}

#[derive(Subcommand)]
enum FamilyCommand {
    /// Classify a family as supercritical, critical, or subcritical.
    Classify { family: PathBuf },
    /// Emit the stable direction set as arcs of integer normals.
    StableSet { family: PathBuf },
}

#[derive(Subcommand)]
enum BootstrapCommand {
    /// Compute the closure of an infected set inside a box.
    Closure { family: PathBuf, sites: PathBuf },
    /// Search for a spread certificate.
    Certificate {
        family: PathBuf,
        #[arg(long, default_value_t = 30)]
        max_a1: i64,
        #[arg(long, default_value_t = 30)]
        max_a2: i64,
    },
}

#[derive(Args, Clone)]
struct SimOpts {
    family: PathBuf,
    #[arg(long, default_value_t = 16)]
    length: i64,
    #[arg(long, default_value_t = 0.5)]
    q: f64,
    #[arg(long, default_value = "torus")]
    boundary: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum SimCommand {
    /// Evolve one replica and export the ring ledger as NDJSON.
    Run {
        #[command(flatten)]
        opts: SimOpts,
        #[arg(long, default_value_t = 10.0)]
        horizon: f64,
        /// Zero-probability of the initial product configuration.
        #[arg(long, default_value_t = 0.5)]
        p0: f64,
    },
    /// Build the exact generator of a tiny system.
    Generator {
        #[command(flatten)]
        opts: SimOpts,
        /// Also report the maximal detailed-balance violation.
        #[arg(long)]
        check_reversibility: bool,
    },
}

#[derive(Subcommand)]
enum DualCommand {
    /// Construct and validate a disagreement path on a coupled run.
    Witness {
        family: PathBuf,
        #[arg(long, default_value_t = 64)]
        length: i64,
        #[arg(long, default_value_t = 0.8)]
        q: f64,
        #[arg(long, default_value_t = 0.3)]
        q_prime: f64,
        #[arg(long, default_value_t = 20.0)]
        t: f64,
        #[arg(long, default_value_t = 10.0)]
        t_prime: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Maximum jump count over all dual paths of a sampled log.
    MaxJumps {
        family: PathBuf,
        #[arg(long, default_value_t = 64)]
        length: i64,
        #[arg(long, default_value_t = 0.8)]
        q: f64,
        #[arg(long, default_value_t = 20.0)]
        t: f64,
        #[arg(long, default_value_t = 10.0)]
        t_prime: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Exact size of the reasonable-coding set.
    CountCodings {
        #[arg(long)]
        t: f64,
        #[arg(long)]
        k: f64,
        #[arg(long)]
        n: f64,
        #[arg(long, default_value_t = 1)]
        rho: i64,
        #[arg(long, default_value_t = 1)]
        dimension: usize,
    },
}

#[derive(Args, Clone)]
struct AuxOpts {
    family: PathBuf,
    /// Time block K.
    #[arg(long, default_value_t = 8.0)]
    k: f64,
    #[arg(long)]
    t: f64,
    #[arg(long)]
    q: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum AuxCommand {
    /// Build one lattice from a sampled log and print bonds and occupation.
    Bonds {
        #[command(flatten)]
        opts: AuxOpts,
        #[arg(long, default_value_t = 0)]
        level: usize,
    },
    /// Monte Carlo estimators: bond closure, extinction tail, or survival
    /// with a small survivor set.
    Survival {
        #[command(flatten)]
        opts: AuxOpts,
        #[arg(long, default_value_t = 10000)]
        replicas: u64,
        /// Estimate P(n <= tau < infinity) at this n (omit for the
        /// bond-closure estimator).
        #[arg(long)]
        n: Option<usize>,
        /// Estimate P(tau = infinity, |X| <= (alpha/2) depth).
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Seeded pathwise transfer-of-zeroes verification.
    TransferCheck {
        #[command(flatten)]
        opts: AuxOpts,
        #[arg(long, default_value_t = 1000)]
        replicas: u64,
        #[arg(long, default_value_t = 0.9)]
        p0: f64,
    },
}

#[derive(Subcommand)]
enum LabCommand {
    /// Coupled disagreement probability series (CSV) with optional fit.
    Disagreement {
        config: PathBuf,
        #[arg(long)]
        fit: bool,
    },
    /// Local-observable convergence versus the equilibrium mean.
    Theorem {
        config: PathBuf,
        #[arg(long = "f")]
        function: PathBuf,
    },
    /// Equilibrium-start invariance check.
    Stationarity { config: PathBuf },
}

fn load_family(path: &PathBuf) -> Result<UpdateFamily> {
    let text = std::fs::read_to_string(path)?;
    UpdateFamily::from_json(&text)
}

fn parse_boundary(name: &str) -> Result<Boundary> {
    match name {
        "torus" => Ok(Boundary::Torus),
        "frozen-zero" => Ok(Boundary::FrozenZero),
        "frozen-one" => Ok(Boundary::FrozenOne),
        other => Err(kcm::error::KcmError::InvalidConfig(format!(
            "unknown boundary {other:?} (torus, frozen-zero, frozen-one)"
        ))),
    }
}

fn geometry_for(family: &UpdateFamily, length: i64, boundary: Boundary) -> Geometry {
    if family.dimension() == 1 {
        Geometry::line(length, boundary)
    } else {
        Geometry::square(length, boundary)
    }
}

fn emit<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

/// Runs a subcommand; `Ok(true)` means every asserted verdict passed.
fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Family { command } => match command {
            FamilyCommand::Classify { family } => {
                let f = load_family(&family)?;
                let classification = f.classify()?;
                let mut record = json!({
                    "dimension": f.dimension(),
                    "range": f.range(),
                    "classification": classification.name(),
                });
                if let kcm::family::Classification::Supercritical { midpoint, .. } =
                    &classification
                {
                    record["unstable_semicircle_midpoint"] = json!(midpoint.normal());
                }
                emit(&record);
                Ok(true)
            }
            FamilyCommand::StableSet { family } => {
                let f = load_family(&family)?;
                let arcs = f.stable_set_2d()?;
                let listed: Vec<serde_json::Value> = arcs
                    .arcs
                    .iter()
                    .map(|a| json!([a.start.normal(), a.end.normal()]))
                    .collect();
                emit(&json!({
                    "full_circle": arcs.full_circle,
                    "arcs": listed,
                }));
                Ok(true)
            }
        },
        Command::Bootstrap { command } => match command {
            BootstrapCommand::Closure { family, sites } => {
                let f = load_family(&family)?;
                let text = std::fs::read_to_string(sites)?;
                let spec: serde_json::Value = serde_json::from_str(&text)?;
                let boxv: Vec<Vec2> = serde_json::from_value(spec["box"].clone())?;
                let infected: Vec<Vec2> = serde_json::from_value(spec["infected"].clone())?;
                let region = Region::from_box(boxv[0], boxv[1]);
                let state = InfectionState::new(region, infected);
                let closed = bootstrap::closure(&f, &state);
                let mut sites: Vec<(Vec2, u32)> =
                    closed.infected().map(|(s, r)| (*s, *r)).collect();
                sites.sort_by_key(|(s, _)| (s.y, s.x));
                emit(&json!({
                    "infected_count": sites.len(),
                    "sites": sites,
                }));
                Ok(true)
            }
            BootstrapCommand::Certificate {
                family,
                max_a1,
                max_a2,
            } => {
                let f = load_family(&family)?;
                let cert = bootstrap::find_spread_certificate(&f, SearchBudget { max_a1, max_a2 })?;
                let valid = bootstrap::validate_certificate(&f, &cert);
                emit(&json!({
                    "u": cert.u.normal(),
                    "a1_offset": cert.a1_offset,
                    "a2": cert.a2,
                    "rectangle": cert.rectangle,
                    "sequence": cert.sequence,
                    "replay_valid": valid,
                }));
                Ok(valid)
            }
        },
        Command::Sim { command } => match command {
            SimCommand::Run { opts, horizon, p0 } => {
                let f = load_family(&opts.family)?;
                let g = geometry_for(&f, opts.length, parse_boundary(&opts.boundary)?);
                let init =
                    harris::sample_bernoulli_config(&g, p0, opts.seed, 0, Purpose::InitialConfigA)?;
                let log = harris::sample_clock_log(g, opts.q, horizon, opts.seed, 0)?;
                let traj = harris::evolve(&f, &g, &init, &log);
                for record in harris::audit_rings(&f, &traj, &log) {
                    println!("{}", serde_json::to_string(&record)?);
                }
                Ok(true)
            }
            SimCommand::Generator {
                opts,
                check_reversibility,
            } => {
                let f = load_family(&opts.family)?;
                let g = geometry_for(&f, opts.length, parse_boundary(&opts.boundary)?);
                let matrix = harris::build_generator(&f, &g, opts.q)?;
                let mut record = json!({
                    "sites": g.site_count(),
                    "states": matrix.len(),
                    "matrix": matrix,
                });
                let mut ok = true;
                if check_reversibility {
                    let violation = harris::check_detailed_balance(&matrix, opts.q);
                    ok = violation < 1e-12;
                    record["detailed_balance_violation"] = json!(violation);
                    record["reversible"] = json!(ok);
                }
                emit(&record);
                Ok(ok)
            }
        },
        Command::Dual { command } => match command {
            DualCommand::Witness {
                family,
                length,
                q,
                q_prime,
                t,
                t_prime,
                seed,
            } => {
                let f = load_family(&family)?;
                let g = geometry_for(&f, length, Boundary::Torus);
                let ia =
                    harris::sample_bernoulli_config(&g, q_prime, seed, 0, Purpose::InitialConfigA)?;
                let ib = harris::sample_bernoulli_config(&g, q, seed, 0, Purpose::InitialConfigB)?;
                let log = harris::sample_clock_log(g, q, t, seed, 0)?;
                let coupled = harris::evolve_coupled(&f, &g, &ia, &ib, log);
                let x = Vec2::new(0, 0);
                match dual::construct_disagreement_path(&coupled, &f, x, t, t_prime)? {
                    None => {
                        emit(&json!({"disagreement": false}));
                        Ok(true)
                    }
                    Some(path) => {
                        let valid = dual::validate_dual_path(&path, &coupled.log, f.range());
                        let activated = dual::is_activated(&path, &coupled);
                        let mut record = path.to_json();
                        record["disagreement"] = json!(true);
                        record["valid"] = json!(valid);
                        record["activated"] = json!(activated);
                        emit(&record);
                        Ok(valid && !activated)
                    }
                }
            }
            DualCommand::MaxJumps {
                family,
                length,
                q,
                t,
                t_prime,
                seed,
            } => {
                let f = load_family(&family)?;
                let g = geometry_for(&f, length, Boundary::Torus);
                let log = harris::sample_clock_log(g, q, t, seed, 0)?;
                let jumps = dual::max_dual_jumps(&log, Vec2::new(0, 0), t, t_prime, f.range());
                emit(&json!({"max_jumps": jumps}));
                Ok(true)
            }
            DualCommand::CountCodings {
                t,
                k,
                n,
                rho,
                dimension,
            } => {
                let count = dual::count_reasonable_codings(t, k, n, rho, dimension)?;
                emit(&json!({"count": count}));
                Ok(true)
            }
        },
        Command::Aux { command } => match command {
            AuxCommand::Bonds { opts, level } => {
                let f = load_family(&opts.family)?;
                let cert = bootstrap::find_spread_certificate(&f, SearchBudget::default())?;
                let params = AuxParams::new(cert, opts.k, opts.t, opts.q, opts.q)?;
                let g = auxperc::required_geometry(&params, Vec2::new(0, 0), level, f.dimension());
                let log = harris::sample_clock_log(g, opts.q, opts.t, opts.seed, 0)?;
                let lattice = auxperc::build_bonds(&log, &params, Vec2::new(0, 0), level)?;
                let run = auxperc::run_zeta(&lattice);
                emit(&json!({
                    "depth": lattice.depth,
                    "bonds": lattice.bonds,
                    "occupation": run.occupation,
                    "tau": run.tau,
                    "survivors": run.survivors,
                }));
                Ok(true)
            }
            AuxCommand::Survival {
                opts,
                replicas,
                n,
                alpha,
            } => {
                let f = load_family(&opts.family)?;
                let cert = bootstrap::find_spread_certificate(&f, SearchBudget::default())?;
                let params = AuxParams::new(cert, opts.k, opts.t, opts.q, opts.q)?;
                let report = if let Some(alpha) = alpha {
                    auxperc::estimate_survival_small_x(
                        &params,
                        f.dimension(),
                        alpha,
                        replicas,
                        opts.seed,
                    )?
                } else if let Some(n) = n {
                    auxperc::estimate_extinction_tail(
                        &params,
                        f.dimension(),
                        n,
                        replicas,
                        opts.seed,
                    )?
                } else {
                    auxperc::estimate_bond_closed_prob(&params, f.dimension(), replicas, opts.seed)?
                };
                emit(&report);
                Ok(report.verdict != Some(Verdict::Violated))
            }
            AuxCommand::TransferCheck {
                opts,
                replicas,
                p0,
            } => {
                let f = load_family(&opts.family)?;
                let cert = bootstrap::find_spread_certificate(&f, SearchBudget::default())?;
                let params = AuxParams::new(cert.clone(), opts.k, opts.t, opts.q, opts.q)?;
                let (lo, hi) = auxperc::required_box(&params, Vec2::new(0, 0), 0);
                let pad = 2 * f.range();
                let g = Geometry {
                    dimension: f.dimension(),
                    lo: Vec2::new(lo.x - pad, if f.dimension() == 2 { lo.y - pad } else { 0 }),
                    hi: Vec2::new(hi.x + pad, if f.dimension() == 2 { hi.y + pad } else { 0 }),
                    boundary: Boundary::Torus,
                };
                let mut holds = 0u64;
                let mut violated = 0u64;
                let mut inapplicable = 0u64;
                for rep in 0..replicas {
                    let log = harris::sample_clock_log(g, opts.q, opts.t, opts.seed, rep)?;
                    let init = harris::sample_bernoulli_config(
                        &g,
                        p0,
                        opts.seed,
                        rep,
                        Purpose::InitialConfigA,
                    )?;
                    let traj = harris::evolve(&f, &g, &init, &log);
                    let depth = params.depth(0);
                    for r0 in (-(depth as i64)..=depth as i64)
                        .filter(|r| (r + depth as i64) % 2 == 0)
                    {
                        match auxperc::check_transfer(&traj, &log, &params, Vec2::new(0, 0), 0, r0)?
                        {
                            TransferOutcome::Holds => holds += 1,
                            TransferOutcome::Violated => violated += 1,
                            TransferOutcome::NotApplicable => inapplicable += 1,
                        }
                    }
                }
                emit(&json!({
                    "holds": holds,
                    "violated": violated,
                    "not_applicable": inapplicable,
                }));
                Ok(violated == 0)
            }
        },
        Command::Lab { command } => match command {
            LabCommand::Disagreement { config, fit } => {
                let cfg = ExperimentConfig::from_json_file(&config)?;
                let family_file = cfg.family_file.clone().ok_or_else(|| {
                    kcm::error::KcmError::InvalidConfig("config needs family_file".into())
                })?;
                let f = load_family(&PathBuf::from(family_file))?;
                let series = lab::run_disagreement_experiment(&f, &cfg)?;
                let csv = lab::series_csv_string(&series);
                match &cfg.output {
                    Some(path) => std::fs::write(path, &csv)?,
                    None => print!("{csv}"),
                }
                if fit {
                    let points: Vec<(f64, f64)> =
                        series.iter().map(|p| (p.t, p.estimate)).collect();
                    match lab::fit_exponential(&points)? {
                        FitOutcome::Fit(fit) => {
                            emit(&fit);
                            return Ok(fit.rate > 0.0 && fit.rate_ci_low > 0.0);
                        }
                        below => emit(&below),
                    }
                }
                Ok(true)
            }
            LabCommand::Theorem { config, function } => {
                let cfg = ExperimentConfig::from_json_file(&config)?;
                let family_file = cfg.family_file.clone().ok_or_else(|| {
                    kcm::error::KcmError::InvalidConfig("config needs family_file".into())
                })?;
                let f = load_family(&PathBuf::from(family_file))?;
                let func = LocalFunction::from_json_file(&function)?;
                let series = lab::run_theorem_experiment(&f, &cfg, &func)?;
                let out = serde_json::to_string_pretty(&series)?;
                match &cfg.output {
                    Some(path) => std::fs::write(path, &out)?,
                    None => println!("{out}"),
                }
                Ok(true)
            }
            LabCommand::Stationarity { config } => {
                let cfg = ExperimentConfig::from_json_file(&config)?;
                let family_file = cfg.family_file.clone().ok_or_else(|| {
                    kcm::error::KcmError::InvalidConfig("config needs family_file".into())
                })?;
                let f = load_family(&PathBuf::from(family_file))?;
                let report = lab::run_stationarity_check(&f, &cfg)?;
                let out = serde_json::to_string_pretty(&report)?;
                match &cfg.output {
                    Some(path) => std::fs::write(path, &out)?,
                    None => println!("{out}"),
                }
                Ok(report.all_pass)
            }
        },
    }
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("KCM_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
