//! Command dispatch, run reports, and deterministic report emission.
//!
//! Every command reads JSON documents, runs the corresponding library
//! pipeline, prints one `RunReport` as JSON on stdout, and exits with:
//!
//! - 0 on certified success,
//! - 2 on verification failure or a runtime error (report or message still
//!   emitted),
//! - 1 on usage errors and malformed input documents.
//!
//! All randomness flows from the single `--seed` flag, so re-running a
//! command on identical inputs reproduces the report's numeric fields byte
//! for byte. The `WARDROP_LOG` environment variable (`quiet`, `info`,
//! `debug`) controls diagnostics on stderr.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use wardrop_core::bcwe::{self, Objective};
use wardrop_core::bwe;
use wardrop_core::certify::{self, FullCheckConfig, ProbeConfig, Verdict};
use wardrop_core::descent::DescentConfig;
use wardrop_core::design;
use wardrop_core::error::Error as CoreError;
use wardrop_core::grid::FlowGrid;
use wardrop_core::io;
use wardrop_core::solver;

/// Reproducible record of one command invocation.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    /// Flag name to SHA-256 content digest of each input document.
    pub inputs: BTreeMap<String, String>,
    pub parameters: BTreeMap<String, String>,
    pub tolerances: BTreeMap<String, f64>,
    pub seed: u64,
    /// Command-specific numeric results; byte-identical across reruns with
    /// the same inputs and seed.
    pub results: serde_json::Value,
    pub certified: bool,
    /// Wall time; excluded from the determinism contract.
    pub wall_ms: u128,
}

#[derive(Parser)]
#[command(
    name = "wid",
    about = "Equilibria and information design for nonatomic congestion games",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SolverFlags {
    /// Duality-gap target for equilibrium solves.
    #[arg(long, default_value_t = 1e-8)]
    gap: f64,
    /// Iteration cap for the conditional-gradient loop.
    #[arg(long, default_value_t = 100_000)]
    max_iters: usize,
    /// Master seed for randomized restarts.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SolverFlags {
    fn descent(&self) -> DescentConfig {
        DescentConfig {
            target_gap: self.gap,
            max_iters: self.max_iters,
            seed: self.seed,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve and verify per-state and average-game equilibria.
    Wardrop {
        #[arg(long)]
        game: PathBuf,
        #[command(flatten)]
        solver: SolverFlags,
        /// Write the report here as well as to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Minimize a designer objective over grid-supported obedient outcomes.
    BcweOpt {
        #[arg(long)]
        game: PathBuf,
        /// social_cost or neg_social_cost.
        #[arg(long, default_value = "social_cost")]
        objective: String,
        /// Flow grid denominator.
        #[arg(long)]
        denominator: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the optimal outcome document here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify the obedience constraints of an outcome.
    BcweVerify {
        #[arg(long)]
        game: PathBuf,
        #[arg(long)]
        outcome: PathBuf,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Synthesize the direct information structure implementing an outcome.
    Design {
        #[arg(long)]
        game: PathBuf,
        /// Outcome document holding the correlated equilibrium to implement.
        #[arg(long)]
        bcwe: PathBuf,
        /// Rational-approximation tolerance (0 requires exact rationals).
        #[arg(long, default_value_t = 0.0)]
        eta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the structure document here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the Bayesian Wardrop equilibrium of the extended game.
    BweSolve {
        #[arg(long)]
        game: PathBuf,
        #[arg(long)]
        structure: PathBuf,
        #[command(flatten)]
        solver: SolverFlags,
        /// Write the interim profile document here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify an interim profile as an epsilon-equilibrium.
    BweVerify {
        #[arg(long)]
        game: PathBuf,
        #[arg(long)]
        structure: PathBuf,
        /// Interim profile document.
        #[arg(long)]
        profile: PathBuf,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Certify full implementation of a correlated equilibrium.
    FullCheck {
        #[arg(long)]
        game: PathBuf,
        #[arg(long)]
        bcwe: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        eta: f64,
        /// Number of multi-start solver runs.
        #[arg(long, default_value_t = 8)]
        runs: usize,
        /// Expected-social-cost agreement tolerance across runs.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[command(flatten)]
        solver: SolverFlags,
        /// Write the certificate (the report JSON) here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Search for distinct equilibria of the extended game.
    Probe {
        #[arg(long)]
        game: PathBuf,
        /// Structure document; omit for the uninformative structure.
        #[arg(long)]
        structure: Option<PathBuf>,
        #[arg(long, default_value_t = 32)]
        runs: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum CliError {
    /// Unreadable or malformed input: exit 1.
    Input(String),
    /// Runtime failure (solver, consistency, resource): exit 2.
    Runtime(String),
}

impl From<io::ParseDiagnostic> for CliError {
    fn from(d: io::ParseDiagnostic) -> Self {
        CliError::Input(d.to_string())
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

struct Outcome {
    certified: bool,
    results: serde_json::Value,
    tolerances: BTreeMap<String, f64>,
    seed: u64,
    /// Optional artifact to write at `--out`.
    artifact: Option<(PathBuf, String)>,
}

struct InputTracker {
    digests: BTreeMap<String, String>,
}

impl InputTracker {
    fn new() -> Self {
        Self {
            digests: BTreeMap::new(),
        }
    }

    fn read(&mut self, flag: &str, path: &Path) -> Result<String, CliError> {
        let bytes = std::fs::read(path).map_err(|e| {
            CliError::Input(format!("cannot read {}: {e}", path.display()))
        })?;
        self.digests
            .insert(flag.to_string(), hex::encode(Sha256::digest(&bytes)));
        String::from_utf8(bytes)
            .map_err(|e| CliError::Input(format!("{} is not UTF-8: {e}", path.display())))
    }
}

fn init_logging() {
    let level = match std::env::var("WARDROP_LOG").as_deref() {
        Ok("debug") => log::LevelFilter::Debug,
        Ok("info") => log::LevelFilter::Info,
        _ => log::LevelFilter::Off,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .try_init();
}

/// Parse `argv` and run; returns the process exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let started = Instant::now();
    let mut tracker = InputTracker::new();
    let command_name = command_name(&cli.command);
    let mut parameters = BTreeMap::new();
    let out_path = out_path(&cli.command);
    match run_command(cli.command, &mut tracker, &mut parameters) {
        Ok(outcome) => {
            let report = RunReport {
                command: command_name,
                inputs: tracker.digests,
                parameters,
                tolerances: outcome.tolerances,
                seed: outcome.seed,
                results: outcome.results,
                certified: outcome.certified,
                wall_ms: started.elapsed().as_millis(),
            };
            let text = serde_json::to_string_pretty(&report).expect("report serializes");
            println!("{text}");
            if let Some((path, artifact)) = outcome.artifact {
                if let Err(e) = std::fs::write(&path, artifact) {
                    eprintln!("error: cannot write {}: {e}", path.display());
                    return 2;
                }
            } else if let Some(path) = out_path {
                if let Err(e) = std::fs::write(&path, &text) {
                    eprintln!("error: cannot write {}: {e}", path.display());
                    return 2;
                }
            }
            if report.certified {
                0
            } else {
                2
            }
        }
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    }
}

fn command_name(command: &Command) -> String {
    match command {
        Command::Wardrop { .. } => "wardrop",
        Command::BcweOpt { .. } => "bcwe-opt",
        Command::BcweVerify { .. } => "bcwe-verify",
        Command::Design { .. } => "design",
        Command::BweSolve { .. } => "bwe-solve",
        Command::BweVerify { .. } => "bwe-verify",
        Command::FullCheck { .. } => "full-check",
        Command::Probe { .. } => "probe",
    }
    .to_string()
}

fn out_path(command: &Command) -> Option<PathBuf> {
    match command {
        Command::Wardrop { out, .. }
        | Command::BcweOpt { out, .. }
        | Command::Design { out, .. }
        | Command::BweSolve { out, .. }
        | Command::FullCheck { out, .. }
        | Command::Probe { out, .. } => out.clone(),
        _ => None,
    }
}

fn run_command(
    command: Command,
    tracker: &mut InputTracker,
    parameters: &mut BTreeMap<String, String>,
) -> Result<Outcome, CliError> {
    match command {
        Command::Wardrop {
            game,
            solver: flags,
            out: _,
        } => {
            let g = io::parse_game(&tracker.read("game", &game)?)?;
            parameters.insert("max_iters".into(), flags.max_iters.to_string());
            let cfg = flags.descent();
            let mut per_state = serde_json::Map::new();
            let mut all_certified = true;
            for state in g.states().to_vec() {
                let sol = solver::solve_wardrop_detailed(&g, &state, &cfg, None)?;
                let report = solver::verify_wardrop(&g, &sol.flow, &state, cfg.target_gap)?;
                all_certified &= report.certified;
                per_state.insert(
                    state,
                    json!({
                        "flow": sol.flow.entries(),
                        "duality_gap": sol.duality_gap,
                        "wardrop_gap": report.gap,
                        "iterations": sol.iterations,
                        "certified": report.certified,
                    }),
                );
            }
            let avg = solver::solve_average_wardrop(&g, &cfg)?;
            let avg_game = g.average_game();
            let avg_report = solver::verify_wardrop(&avg_game, &avg, "average", cfg.target_gap)?;
            all_certified &= avg_report.certified;
            Ok(Outcome {
                certified: all_certified,
                results: json!({
                    "per_state": per_state,
                    "average": {
                        "flow": avg.entries(),
                        "wardrop_gap": avg_report.gap,
                        "certified": avg_report.certified,
                    },
                }),
                tolerances: BTreeMap::from([("gap".into(), cfg.target_gap)]),
                seed: cfg.seed,
                artifact: None,
            })
        }
        Command::BcweOpt {
            game,
            objective,
            denominator,
            seed,
            out,
        } => {
            let g = io::parse_game(&tracker.read("game", &game)?)?;
            let obj = match objective.as_str() {
                "social_cost" => Objective::SocialCost,
                "neg_social_cost" => Objective::NegSocialCost,
                other => {
                    return Err(CliError::Input(format!(
                        "unknown objective `{other}` (use social_cost or neg_social_cost)"
                    )))
                }
            };
            parameters.insert("objective".into(), objective.clone());
            parameters.insert("denominator".into(), denominator.to_string());
            let grid = FlowGrid::new(denominator, g.n_actions())?;
            let (outcome, value) = bcwe::optimize_bcwe(&g, &obj, &grid)?;
            let report = bcwe::verify_bcwe(&g, &outcome, 1e-8)?;
            let doc = io::outcome_to_doc(&outcome, &g);
            let artifact = out.map(|p| {
                (
                    p,
                    serde_json::to_string_pretty(&doc).expect("outcome serializes"),
                )
            });
            Ok(Outcome {
                certified: report.certified,
                results: json!({
                    "objective_value": value,
                    "outcome": doc,
                    "obedience_violation": report.violation,
                }),
                tolerances: BTreeMap::from([("obedience".into(), 1e-8)]),
                seed,
                artifact,
            })
        }
        Command::BcweVerify {
            game,
            outcome,
            tol,
            seed,
        } => {
            let g = io::parse_game(&tracker.read("game", &game)?)?;
            let mu = io::parse_outcome(&tracker.read("outcome", &outcome)?, &g)?;
            let report = bcwe::verify_bcwe(&g, &mu, tol)?;
            Ok(Outcome {
                certified: report.certified,
                results: json!({
                    "violation": report.violation,
                    "expected_social_cost": mu.expected_social_cost(&g),
                    "pairs": report.pairs,
                }),
                tolerances: BTreeMap::from([("obedience".into(), tol)]),
                seed,
                artifact: None,
            })
        }
        Command::Design {
            game,
            bcwe: bcwe_path,
            eta,
            seed,
            out,
        } => {
            let g = io::parse_game(&tracker.read("game", &game)?)?;
            let mu = io::parse_outcome(&tracker.read("bcwe", &bcwe_path)?, &g)?;
            parameters.insert("eta".into(), format!("{eta}"));
            let input_report = bcwe::verify_bcwe(&g, &mu, 1e-8)?;
            if !input_report.certified {
                return Err(CliError::Runtime(format!(
                    "input outcome violates obedience by {:.3e}",
                    input_report.violation
                )));
            }
            let approx = design::rational_approximation(&mu.support_flows(), eta)?;
            let structure = design::build_direct_structure(&g, &mu, &approx)?;
            let lip = design::estimate_modulus(&g, 1000, seed)?;
            let bound = design::epsilon_bound(&approx, &mu, &lip)?;
            let obedient = design::obedient_profile(&g, &structure)?;
            let report = bwe::verify_eps_bwe(&g, &structure, &obedient)?;
            let doc = io::structure_to_doc(&structure);
            let artifact = out.map(|p| {
                (
                    p,
                    serde_json::to_string_pretty(&doc).expect("structure serializes"),
                )
            });
            let certified = report.epsilon <= bound + 1e-9;
            Ok(Outcome {
                certified,
                results: json!({
                    "K": approx.k,
                    "eta_achieved": approx.eta_achieved,
                    "lipschitz_estimate": lip.l,
                    "epsilon_bound": bound,
                    "obedient_epsilon": report.epsilon,
                    "structure": doc,
                }),
                tolerances: BTreeMap::from([("epsilon_slack".into(), 1e-9)]),
                seed,
                artifact,
            })
        }
        Command::BweSolve {
            game,
            structure,
            solver: flags,
            out,
        } => {
            let g = io::parse_game(&tracker.read("game", &game)?)?;
            let is = io::parse_structure(&tracker.read("structure", &structure)?, &g)?;
            let cfg = flags.descent();
            let sol = bwe::solve_bwe_detailed(&g, &is, &cfg, None)?;
            let outcome = bwe::project_outcome(&is, &sol.profile)?;
            let tc = bwe::total_cost(&g, &is, &sol.profile)?;
            let doc = io::profile_to_doc(&sol.profile, &is);
            let artifact = out.map(|p| {
                (
                    p,
                    serde_json::to_string_pretty(&doc).expect("profile serializes"),
                )
            });
            Ok(Outcome {
                certified: sol.duality_gap <= cfg.target_gap,
                results: json!({
                    "epsilon": sol.report.epsilon,
                    "duality_gap": sol.duality_gap,
                    "iterations": sol.iterations,
                    "total_cost": tc,
                    "outcome": io::outcome_to_doc(&outcome, &g),
                    "profile": doc,
                }),
                tolerances: BTreeMap::from([("gap".into(), cfg.target_gap)]),
                seed: cfg.seed,
                artifact,
            })
        }
        Command::BweVerify {
            game,
            structure,
            profile,
            tol,
            seed,
        } => {
            let g = io::parse_game(&tracker.read("game", &game)?)?;
            let is = io::parse_structure(&tracker.read("structure", &structure)?, &g)?;
            let prof = io::parse_profile(&tracker.read("profile", &profile)?, &is)?;
            let report = bwe::verify_eps_bwe(&g, &is, &prof)?;
            let tc = bwe::total_cost(&g, &is, &prof)?;
            Ok(Outcome {
                certified: report.epsilon <= tol,
                results: json!({
                    "epsilon": report.epsilon,
                    "total_cost": tc,
                    "entries": report.entries,
                    "excluded_types": report.excluded,
                }),
                tolerances: BTreeMap::from([("epsilon".into(), tol)]),
                seed,
                artifact: None,
            })
        }
        Command::FullCheck {
            game,
            bcwe: bcwe_path,
            eta,
            runs,
            tol,
            solver: flags,
            out,
        } => {
            let g = io::parse_game(&tracker.read("game", &game)?)?;
            let mu = io::parse_outcome(&tracker.read("bcwe", &bcwe_path)?, &g)?;
            parameters.insert("runs".into(), runs.to_string());
            parameters.insert("eta".into(), format!("{eta}"));
            let config = FullCheckConfig {
                eta,
                runs,
                master_seed: flags.seed,
                tol_cost: tol,
                tol_outcome: 1e-5,
                descent: flags.descent(),
            };
            let cert = certify::full_check(&g, &mu, &config)?;
            let certified = matches!(
                cert.verdict,
                Verdict::UniqueOutcome | Verdict::UniqueSocialCost
            );
            let results = serde_json::to_value(&cert).expect("certificate serializes");
            let artifact = out.map(|p| {
                (
                    p,
                    serde_json::to_string_pretty(&results).expect("certificate serializes"),
                )
            });
            Ok(Outcome {
                certified,
                results,
                tolerances: BTreeMap::from([
                    ("cost".into(), config.tol_cost),
                    ("outcome".into(), config.tol_outcome),
                    ("gap".into(), config.descent.target_gap),
                ]),
                seed: flags.seed,
                artifact,
            })
        }
        Command::Probe {
            game,
            structure,
            runs,
            seed,
            tol,
            out,
        } => {
            let g = io::parse_game(&tracker.read("game", &game)?)?;
            let is = match structure {
                Some(path) => io::parse_structure(&tracker.read("structure", &path)?, &g)?,
                None => design::InformationStructure::uninformative(&g),
            };
            let cfg = ProbeConfig {
                starts: runs,
                master_seed: seed,
                eps_tol: tol,
                ..ProbeConfig::default()
            };
            let candidates = certify::adversarial_probe(&g, &is, &cfg)?;
            let results = json!({
                "candidates": candidates
                    .iter()
                    .map(|c| json!({
                        "epsilon": c.epsilon,
                        "outcome": io::outcome_to_doc(&c.outcome, &g),
                        "expected_social_cost": c.outcome.expected_social_cost(&g),
                    }))
                    .collect::<Vec<_>>(),
                "distinct": candidates.len(),
            });
            let artifact = out.map(|p| {
                (
                    p,
                    serde_json::to_string_pretty(&results).expect("candidates serialize"),
                )
            });
            Ok(Outcome {
                certified: !candidates.is_empty(),
                results,
                tolerances: BTreeMap::from([("epsilon".into(), tol)]),
                seed,
                artifact,
            })
        }
    }
}
