//! Command-line front end: classify models, convert interpretations,
//! simulate ensembles, and run the analysis suites. Reports are JSON with
//! the full run configuration embedded; trajectories export as CSV.
//!
//! Exit codes: 0 success / positive verdict, 3 negative-but-valid verdict,
//! 1 error. All tolerances default from the table in `defaults` and are
//! echoed in every report.

use std::collections::BTreeMap;
use std::io::Write;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use num_rational::BigRational;
use serde::Serialize;

use stolie::hamiltonian::{
    casimir_verify, coalgebra_constant, is_hamiltonian_system, CasimirElement, CasimirVerdict,
    HamiltonianResult, HamiltonianSystemResult, SymplecticForm,
};
use stolie::liealg::ClosureBounds;
use stolie::models::{self, ResolvedEntry};
use stolie::poly::{parse_rational, parse_rational_function};
use stolie::prolong::{
    first_integrals_poly, prolong_indexed, verify_superposition, SuperpositionRule, VerifyConfig,
};
use stolie::sde::{simulate_ensemble, EnsembleConfig, Scheme};
use stolie::stability::{
    dirichlet_check, find_equilibria, relative_equilibrium_solve, MomentumMap, PointSpec,
    RelEqOutcome,
};
use stolie::stratonovich::{
    classify_foliated, classify_stochastic_lie, FoliatedDecomposition, Interpretation,
    LieClassification, ModelFile,
};
use stolie::vecfield::VectorField;

/// Default tolerances and sizes, echoed into every report.
mod defaults {
    pub const SEED: u64 = 2024;
    pub const T_END: f64 = 1.0;
    pub const STEPS: usize = 1000;
    pub const PATHS: usize = 100;
    pub const TOL_EQUILIBRIUM: f64 = 1e-10;
    pub const TOL_VERIFY: f64 = 1e-3;
    pub const TRIALS: usize = 20;
    pub const MAX_DEGREE: u32 = 2;
}

#[derive(Parser)]
#[command(name = "stolie", version, about = "stochastic Lie systems toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Catalog id or model file path.
    #[arg(long)]
    model: String,
    /// Parameter overrides `name=rational`, comma separated.
    #[arg(long, value_delimiter = ',')]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether the model is a stochastic Lie system.
    Classify {
        #[command(flatten)]
        model: ModelArgs,
        /// Optional foliated-decomposition file to check as well.
        #[arg(long)]
        foliated: Option<String>,
        #[arg(long)]
        out: Option<String>,
    },
    /// Convert between interpretations; prints the model file.
    Convert {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_parser = parse_interpretation)]
        to: Interpretation,
        /// Re-convert and require exact symbolic identity.
        #[arg(long)]
        roundtrip: bool,
        #[arg(long)]
        out: Option<String>,
    },
    /// Integrate a path ensemble; CSV trajectory plus JSON summary.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = defaults::SEED)]
        seed: u64,
        #[arg(long = "T", default_value_t = defaults::T_END)]
        t_end: f64,
        #[arg(long = "N", default_value_t = defaults::STEPS)]
        steps: usize,
        #[arg(long, default_value_t = defaults::PATHS)]
        paths: usize,
        /// em | heun | auto (match the interpretation).
        #[arg(long, default_value = "auto")]
        scheme: String,
        /// Convert the model when the scheme demands the other form.
        #[arg(long)]
        auto_convert: bool,
        /// Output base path: writes <out>.csv and <out>.json.
        #[arg(long)]
        out: Option<String>,
    },
    /// Structural analyses on a model.
    Analyze {
        #[command(subcommand)]
        what: AnalyzeCommand,
    },
    /// Print the model catalog.
    ListModels,
}

#[derive(Subcommand)]
enum AnalyzeCommand {
    /// Multi-start search for stochastic equilibria.
    Equilibria {
        #[command(flatten)]
        model: ModelArgs,
        /// Starting points `x,y;x,y;...`; a small lattice when omitted.
        #[arg(long)]
        starts: Option<String>,
        #[arg(long, default_value_t = defaults::TOL_EQUILIBRIUM)]
        tol: f64,
        #[arg(long)]
        out: Option<String>,
    },
    /// Stochastic Dirichlet criterion at a candidate point.
    Dirichlet {
        #[command(flatten)]
        model: ModelArgs,
        /// Candidate function; the model's suggestion when omitted.
        #[arg(long)]
        f: Option<String>,
        /// Candidate equilibrium, exact rationals `0,0`.
        #[arg(long)]
        at: String,
        #[arg(long, default_value_t = defaults::TOL_EQUILIBRIUM)]
        tol: f64,
        #[arg(long)]
        out: Option<String>,
    },
    /// Relative-equilibrium solve from momentum-map data.
    Releq {
        #[command(flatten)]
        model: ModelArgs,
        /// Momentum map components, semicolon separated.
        #[arg(long = "J")]
        momentum: String,
        /// Component Hamiltonians; derived from the model when omitted.
        #[arg(long)]
        hams: Option<String>,
        /// Initial state guess `x,y`.
        #[arg(long)]
        guess: String,
        /// Initial xi guesses, one row per component, `a,b;c,d`.
        #[arg(long)]
        xi: String,
        #[arg(long, default_value_t = defaults::TOL_EQUILIBRIUM)]
        tol: f64,
        #[arg(long)]
        out: Option<String>,
    },
    /// Lie-Hamilton algebra of a classified model.
    Hamiltonian {
        #[command(flatten)]
        model: ModelArgs,
        /// Symplectic matrix as JSON rows of expressions, when the model
        /// carries none.
        #[arg(long)]
        omega: Option<String>,
        #[arg(long)]
        out: Option<String>,
    },
    /// Verify a Casimir element; optionally build its coalgebra constant.
    Casimir {
        #[command(flatten)]
        model: ModelArgs,
        /// Polynomial in the abstract generators v1..vr (central last).
        #[arg(long)]
        casimir: String,
        /// Copies for the coalgebra constant of motion.
        #[arg(long)]
        copies: Option<usize>,
        #[arg(long)]
        omega: Option<String>,
        #[arg(long)]
        out: Option<String>,
    },
    /// Common-noise verification of a superposition rule.
    VerifySr {
        #[command(flatten)]
        model: ModelArgs,
        /// Attached rule name (see list-models) or a rule file.
        #[arg(long)]
        rule: String,
        #[arg(long, default_value_t = defaults::TRIALS)]
        trials: usize,
        #[arg(long = "T", default_value_t = defaults::T_END)]
        t_end: f64,
        #[arg(long = "N", default_value_t = 10_000)]
        steps: usize,
        #[arg(long, default_value_t = defaults::TOL_VERIFY)]
        tol: f64,
        #[arg(long, default_value_t = defaults::SEED)]
        seed: u64,
        #[arg(long)]
        out: Option<String>,
    },
    /// Polynomial first integrals of the prolonged Vessiot-Guldberg basis.
    FirstIntegrals {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 2)]
        copies: usize,
        #[arg(long, default_value_t = defaults::MAX_DEGREE)]
        degree: u32,
        #[arg(long)]
        out: Option<String>,
    },
}

fn parse_interpretation(s: &str) -> std::result::Result<Interpretation, String> {
    match s {
        "ito" => Ok(Interpretation::Ito),
        "stratonovich" => Ok(Interpretation::Stratonovich),
        other => Err(format!("expected `ito` or `stratonovich`, got `{other}`")),
    }
}

/// Effective configuration echoed into every report.
#[derive(Serialize, Clone)]
struct RunConfig {
    command: String,
    model: String,
    set: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_end: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    paths: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    scheme: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<String>,
    version: String,
}

impl RunConfig {
    fn new(command: &str, model: &ModelArgs) -> RunConfig {
        RunConfig {
            command: command.to_string(),
            model: model.model.clone(),
            set: model
                .set
                .iter()
                .filter_map(|kv| {
                    kv.split_once('=')
                        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                })
                .collect(),
            seed: None,
            t_end: None,
            steps: None,
            paths: None,
            scheme: None,
            tol: None,
            out: None,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

fn parse_overrides(set: &[String]) -> Result<BTreeMap<String, BigRational>> {
    let mut out = BTreeMap::new();
    for kv in set {
        if kv.trim().is_empty() {
            continue;
        }
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| anyhow!("override `{kv}` is not of the form name=value"))?;
        let r = parse_rational(v.trim()).map_err(|e| anyhow!("override `{kv}`: {e}"))?;
        out.insert(k.trim().to_string(), r);
    }
    Ok(out)
}

fn load(model: &ModelArgs) -> Result<ResolvedEntry> {
    let overrides = parse_overrides(&model.set)?;
    Ok(models::load_model(&model.model, &overrides)?)
}

fn emit(report: &serde_json::Value, out: &Option<String>) -> Result<()> {
    let text = serde_json::to_string_pretty(report)?;
    match out {
        Some(path) => std::fs::write(path, text.as_bytes())
            .with_context(|| format!("writing report to {path}"))?,
        None => println!("{text}"),
    }
    Ok(())
}

/// Verdict-aware exit codes: 0 positive, 3 negative-but-valid.
fn verdict_exit(positive: bool) -> ExitCode {
    if positive {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(3)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Classify {
            model,
            foliated,
            out,
        } => cmd_classify(model, foliated, out),
        Command::Convert {
            model,
            to,
            roundtrip,
            out,
        } => cmd_convert(model, to, roundtrip, out),
        Command::Simulate {
            model,
            seed,
            t_end,
            steps,
            paths,
            scheme,
            auto_convert,
            out,
        } => cmd_simulate(model, seed, t_end, steps, paths, scheme, auto_convert, out),
        Command::Analyze { what } => cmd_analyze(what),
        Command::ListModels => {
            println!("{}", serde_json::to_string_pretty(&models::list())?);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn cmd_classify(
    model: ModelArgs,
    foliated: Option<String>,
    out: Option<String>,
) -> Result<ExitCode> {
    let config = RunConfig::new("classify", &model);
    let entry = load(&model)?;
    let was_ito = entry.operator.interpretation() == Interpretation::Ito;
    let op = entry.operator.to_stratonovich()?;
    let classification = classify_stochastic_lie(&op, &ClosureBounds::default())?;
    let mut report = serde_json::json!({
        "config": config,
        "auto_converted_from_ito": was_ito,
    });
    let positive = match &classification {
        LieClassification::StochasticLie {
            basis,
            coefficients,
        } => {
            report["classification"] = serde_json::json!({
                "stochastic_lie": true,
                "dim": basis.dim(),
                "basis": basis.basis().iter().map(|f| f.coeffs().iter().map(ToString::to_string).collect::<Vec<_>>()).collect::<Vec<_>>(),
                "structure": basis.structure_entries().iter().map(|(a, b, g, c)| serde_json::json!([a, b, g, c.to_string()])).collect::<Vec<_>>(),
                "coefficients": coefficients.iter().map(|row| row.iter().map(ToString::to_string).collect::<Vec<_>>()).collect::<Vec<_>>(),
            });
            true
        }
        LieClassification::NotWithinBounds { reason } => {
            report["classification"] = serde_json::json!({
                "stochastic_lie": false,
                "reason": reason,
            });
            false
        }
    };
    if let Some(path) = foliated {
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("reading decomposition {path}"))?;
        let dec = parse_foliated(&text, &op)?;
        let verdict = classify_foliated(&op, &dec)?;
        report["foliated"] = serde_json::json!(verdict);
    }
    emit(&report, &out)?;
    Ok(verdict_exit(positive))
}

/// Decomposition file: `{"fields": [[coeff exprs]...], "coeffs": [[exprs]...]}`
/// with coefficients over the chart plus `t`.
fn parse_foliated(
    text: &str,
    op: &stolie::stratonovich::StochOperator,
) -> Result<FoliatedDecomposition> {
    #[derive(serde::Deserialize)]
    struct Raw {
        fields: Vec<Vec<String>>,
        coeffs: Vec<Vec<String>>,
    }
    let raw: Raw = serde_json::from_str(text).context("decomposition file")?;
    let chart = op.chart();
    let chart_t = chart.extended(["t"])?;
    let fields = raw
        .fields
        .iter()
        .map(|coeffs| {
            let exprs: Vec<&str> = coeffs.iter().map(String::as_str).collect();
            Ok(VectorField::parse(chart, &exprs)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let coeffs = raw
        .coeffs
        .iter()
        .map(|row| {
            row.iter()
                .map(|e| Ok(parse_rational_function(e, &chart_t)?))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FoliatedDecomposition { fields, coeffs })
}

fn cmd_convert(
    model: ModelArgs,
    to: Interpretation,
    roundtrip: bool,
    out: Option<String>,
) -> Result<ExitCode> {
    let entry = load(&model)?;
    let converted = entry.operator.convert_to(to)?;
    if roundtrip {
        let back = converted.convert_to(entry.operator.interpretation())?;
        if back.drift() != entry.operator.drift() || back.noises() != entry.operator.noises() {
            bail!("round-trip conversion failed to reproduce the model symbolically");
        }
    }
    let text = ModelFile::from_operator(&converted).to_json();
    match &out {
        Some(path) => std::fs::write(path, text.as_bytes())
            .with_context(|| format!("writing model to {path}"))?,
        None => println!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    model: ModelArgs,
    seed: u64,
    t_end: f64,
    steps: usize,
    paths: usize,
    scheme: String,
    auto_convert: bool,
    out: Option<String>,
) -> Result<ExitCode> {
    let mut config = RunConfig::new("simulate", &model);
    config.seed = Some(seed);
    config.t_end = Some(t_end);
    config.steps = Some(steps);
    config.paths = Some(paths);
    config.scheme = Some(scheme.clone());
    config.out = out.clone();
    let entry = load(&model)?;
    let op = entry.operator;
    let (op, scheme_used) = match (scheme.as_str(), op.interpretation()) {
        ("auto", Interpretation::Ito) | ("em", Interpretation::Ito) => {
            (op, Scheme::EulerMaruyama)
        }
        ("auto", Interpretation::Stratonovich) | ("heun", Interpretation::Stratonovich) => {
            (op, Scheme::Heun)
        }
        ("em", Interpretation::Stratonovich) => {
            if !auto_convert {
                bail!("scheme em expects the Ito form; pass --auto-convert to convert");
            }
            (op.to_ito()?, Scheme::EulerMaruyama)
        }
        ("heun", Interpretation::Ito) => {
            if !auto_convert {
                bail!("scheme heun expects the Stratonovich form; pass --auto-convert to convert");
            }
            (op.to_stratonovich()?, Scheme::Heun)
        }
        (other, _) => bail!("unknown scheme `{other}` (expected em, heun, or auto)"),
    };
    let x0 = vec![1.0; op.dim()];
    let cfg = EnsembleConfig {
        seed,
        paths,
        t_end,
        steps,
    };
    let (trajectories, summary) = simulate_ensemble(&op, &x0, &cfg)?;
    let csv = trajectories[0].to_csv();
    let report = serde_json::json!({
        "config": config,
        "scheme": scheme_used,
        "initial_state": x0,
        "summary": summary,
    });
    match &out {
        Some(base) => {
            std::fs::write(format!("{base}.csv"), csv.as_bytes())?;
            std::fs::write(
                format!("{base}.json"),
                serde_json::to_string_pretty(&report)?.as_bytes(),
            )?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        None => {
            print!("{csv}");
            writeln!(
                std::io::stderr(),
                "{}",
                serde_json::to_string_pretty(&report)?
            )?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_analyze(what: AnalyzeCommand) -> Result<ExitCode> {
    match what {
        AnalyzeCommand::Equilibria {
            model,
            starts,
            tol,
            out,
        } => {
            let mut config = RunConfig::new("analyze equilibria", &model);
            config.tol = Some(tol);
            let entry = load(&model)?;
            let op = entry.operator.to_stratonovich()?;
            let n = op.dim();
            let starts: Vec<Vec<f64>> = match starts {
                Some(s) => parse_points(&s, n)?,
                None => default_starts(n),
            };
            let (reports, abandoned) = find_equilibria(&op, &starts, tol)?;
            let found = reports.iter().any(|r| r.is_equilibrium);
            let report = serde_json::json!({
                "config": config,
                "starts": starts.len(),
                "abandoned_starts": abandoned.len(),
                "equilibria": reports,
            });
            emit(&report, &out)?;
            Ok(verdict_exit(found))
        }
        AnalyzeCommand::Dirichlet {
            model,
            f,
            at,
            tol,
            out,
        } => {
            let mut config = RunConfig::new("analyze dirichlet", &model);
            config.tol = Some(tol);
            let entry = load(&model)?;
            let op = entry.operator.to_stratonovich()?;
            let f_expr = f
                .or(entry.suggested_lyapunov)
                .ok_or_else(|| anyhow!("no --f given and the model suggests none"))?;
            let func = parse_rational_function(&f_expr, op.chart())?;
            let point: Vec<BigRational> = at
                .split(',')
                .map(|v| Ok(parse_rational(v.trim())?))
                .collect::<Result<Vec<_>>>()?;
            if point.len() != op.dim() {
                bail!(
                    "--at has {} coordinates, chart has {}",
                    point.len(),
                    op.dim()
                );
            }
            let verdict = dirichlet_check(&op, &func, &PointSpec::Exact(point), tol)?;
            let stable = verdict.almost_surely_stable;
            let report = serde_json::json!({
                "config": config,
                "f": f_expr,
                "verdict": verdict,
            });
            emit(&report, &out)?;
            Ok(verdict_exit(stable))
        }
        AnalyzeCommand::Releq {
            model,
            momentum,
            hams,
            guess,
            xi,
            tol,
            out,
        } => {
            let mut config = RunConfig::new("analyze releq", &model);
            config.tol = Some(tol);
            let entry = load(&model)?;
            let op = entry.operator.to_stratonovich()?;
            let omega = entry
                .symplectic
                .clone()
                .ok_or_else(|| anyhow!("model carries no symplectic form"))?;
            let chart = op.chart().clone();
            let j_components = momentum
                .split(';')
                .map(|e| Ok(parse_rational_function(e.trim(), &chart)?))
                .collect::<Result<Vec<_>>>()?;
            let mm = MomentumMap::from_components(&omega, j_components)?;
            // component Hamiltonians: explicit, or potentials of the
            // t-constant component fields of the model
            let components = match hams {
                Some(list) => list
                    .split(';')
                    .map(|e| Ok(parse_rational_function(e.trim(), &chart)?))
                    .collect::<Result<Vec<_>>>()?,
                None => {
                    let mut acc = Vec::new();
                    for comp in op.components() {
                        let flat = comp.flatten_at(&BigRational::from_integer(0.into()));
                        if flat.is_zero() {
                            continue;
                        }
                        match stolie::hamiltonian::hamiltonian_of(&flat, &omega)? {
                            HamiltonianResult::Hamiltonian(h) => {
                                let r = h.as_rational().ok_or_else(|| {
                                    anyhow!("component potential is not rational; pass --hams")
                                })?;
                                acc.push(r.clone());
                            }
                            HamiltonianResult::NotHamiltonian { .. } => {
                                bail!("a component field is not Hamiltonian; pass --hams")
                            }
                        }
                    }
                    acc
                }
            };
            let state_guess: Vec<f64> = guess
                .split(',')
                .map(|v| v.trim().parse::<f64>().context("state guess"))
                .collect::<Result<Vec<_>>>()?;
            let xi_guess: Vec<Vec<f64>> = xi
                .split(';')
                .map(|row| {
                    row.split(',')
                        .map(|v| v.trim().parse::<f64>().context("xi guess"))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            let outcome = relative_equilibrium_solve(
                &components,
                &mm,
                &omega,
                &state_guess,
                &xi_guess,
                tol,
                100,
            )?;
            let (positive, body) = match outcome {
                RelEqOutcome::Converged(sol) => {
                    let ok = sol.verified;
                    (ok, serde_json::json!({ "converged": true, "solution": sol }))
                }
                RelEqOutcome::NoConvergence {
                    iterations,
                    residual,
                } => (
                    false,
                    serde_json::json!({
                        "converged": false,
                        "iterations": iterations,
                        "residual": residual,
                    }),
                ),
            };
            let report = serde_json::json!({
                "config": config,
                "result": body,
            });
            emit(&report, &out)?;
            Ok(verdict_exit(positive))
        }
        AnalyzeCommand::Hamiltonian { model, omega, out } => {
            let config = RunConfig::new("analyze hamiltonian", &model);
            let entry = load(&model)?;
            if entry.no_symplectic {
                let report = serde_json::json!({
                    "config": config,
                    "skipped": "model is flagged non-symplectic (Jacobi-type structure only)",
                });
                emit(&report, &out)?;
                return Ok(verdict_exit(false));
            }
            let op = entry.operator.to_stratonovich()?;
            let form = resolve_omega(&entry, omega, &op)?;
            let result = is_hamiltonian_system(&op, &form, &ClosureBounds::default())?;
            let (positive, body) = match result {
                HamiltonianSystemResult::Hamiltonian(alg) => (true, alg.to_json()),
                HamiltonianSystemResult::NotHamiltonian {
                    field_index,
                    i,
                    j,
                    residual,
                } => (
                    false,
                    serde_json::json!({
                        "not_hamiltonian": {
                            "field_index": field_index,
                            "two_form_component": [i, j],
                            "residual": residual.to_string(),
                        }
                    }),
                ),
            };
            let report = serde_json::json!({
                "config": config,
                "hamiltonian": positive,
                "result": body,
            });
            emit(&report, &out)?;
            Ok(verdict_exit(positive))
        }
        AnalyzeCommand::Casimir {
            model,
            casimir,
            copies,
            omega,
            out,
        } => {
            let config = RunConfig::new("analyze casimir", &model);
            let entry = load(&model)?;
            if entry.no_symplectic {
                bail!("model is flagged non-symplectic; casimir analysis needs a symplectic form");
            }
            let op = entry.operator.to_stratonovich()?;
            let form = resolve_omega(&entry, omega, &op)?;
            let alg = match is_hamiltonian_system(&op, &form, &ClosureBounds::default())? {
                HamiltonianSystemResult::Hamiltonian(alg) => alg,
                HamiltonianSystemResult::NotHamiltonian { field_index, .. } => {
                    bail!("basis field {field_index} is not Hamiltonian")
                }
            };
            let ps = alg.poisson_structure();
            let element = CasimirElement::parse(&ps, &casimir)?;
            let verdict = casimir_verify(&ps, &element)?;
            let mut body = match &verdict {
                CasimirVerdict::Yes => serde_json::json!({ "casimir": true }),
                CasimirVerdict::No { generator, witness } => serde_json::json!({
                    "casimir": false,
                    "witness_generator": format!("v{}", generator + 1),
                    "witness_bracket": witness.to_string(),
                }),
            };
            let positive = matches!(verdict, CasimirVerdict::Yes);
            if positive {
                if let Some(k) = copies {
                    // momentum identification h_g = J* v_g; central
                    // generators map to the constant 1
                    let mut hams = Vec::new();
                    for h in &alg.hamiltonians {
                        hams.push(
                            h.as_rational()
                                .ok_or_else(|| {
                                    anyhow!("a Hamiltonian has log terms; the coalgebra constant needs rational ones")
                                })?
                                .clone(),
                        );
                    }
                    if alg.central {
                        hams.push(stolie::poly::RationalFunction::one(op.chart()));
                    }
                    let f = coalgebra_constant(&element, &hams, op.chart(), k)?;
                    let invariant =
                        stolie::hamiltonian::verify_prolonged_invariant(&f, &alg.fields, k)?;
                    body["coalgebra_constant"] = serde_json::json!({
                        "copies": k,
                        "expression": f.to_string(),
                        "annihilated_by_prolonged_fields": invariant,
                    });
                }
            }
            let report = serde_json::json!({
                "config": config,
                "result": body,
            });
            emit(&report, &out)?;
            Ok(verdict_exit(positive))
        }
        AnalyzeCommand::VerifySr {
            model,
            rule,
            trials,
            t_end,
            steps,
            tol,
            seed,
            out,
        } => {
            let mut config = RunConfig::new("analyze verify-sr", &model);
            config.tol = Some(tol);
            config.seed = Some(seed);
            config.t_end = Some(t_end);
            config.steps = Some(steps);
            let entry = load(&model)?;
            let op = entry.operator.to_stratonovich()?;
            let chosen: SuperpositionRule =
                match entry.rules.iter().find(|(name, _)| name == &rule) {
                    Some((_, r)) => r.clone(),
                    None => load_rule_file(&rule, &op)?,
                };
            let cfg = VerifyConfig {
                trials,
                steps,
                t_end,
                tol,
                seed,
            };
            let report_body = verify_superposition(&chosen, &op, &cfg)?;
            let pass = report_body.pass;
            let report = serde_json::json!({
                "config": config,
                "report": report_body,
            });
            emit(&report, &out)?;
            Ok(verdict_exit(pass))
        }
        AnalyzeCommand::FirstIntegrals {
            model,
            copies,
            degree,
            out,
        } => {
            let config = RunConfig::new("analyze first-integrals", &model);
            let entry = load(&model)?;
            let op = entry.operator.to_stratonovich()?;
            let classification = classify_stochastic_lie(&op, &ClosureBounds::default())?;
            let basis = classification
                .basis()
                .ok_or_else(|| anyhow!("model is not a stochastic Lie system within bounds"))?;
            let idx: Vec<usize> = (1..=copies).collect();
            let prolonged = basis
                .basis()
                .iter()
                .map(|f| Ok(prolong_indexed(f, &idx)?))
                .collect::<Result<Vec<_>>>()?;
            let integrals = first_integrals_poly(&prolonged, degree)?;
            let found = !integrals.is_empty();
            let report = serde_json::json!({
                "config": config,
                "copies": copies,
                "degree": degree,
                "integrals": integrals.iter().map(ToString::to_string).collect::<Vec<_>>(),
            });
            emit(&report, &out)?;
            Ok(verdict_exit(found))
        }
    }
}

fn resolve_omega(
    entry: &ResolvedEntry,
    flag: Option<String>,
    op: &stolie::stratonovich::StochOperator,
) -> Result<SymplecticForm> {
    if let Some(text) = flag {
        let rows: Vec<Vec<String>> =
            serde_json::from_str(&text).context("--omega must be JSON rows of expressions")?;
        return Ok(SymplecticForm::parse(op.chart(), &rows)?);
    }
    entry
        .symplectic
        .clone()
        .ok_or_else(|| anyhow!("model carries no symplectic form; pass --omega"))
}

/// Rule file: `{"m": 2, "form": "explicit"|"implicit", "exprs": [".."]}`.
fn load_rule_file(
    path: &str,
    op: &stolie::stratonovich::StochOperator,
) -> Result<SuperpositionRule> {
    #[derive(serde::Deserialize)]
    struct Raw {
        m: usize,
        form: String,
        exprs: Vec<String>,
    }
    let text = std::fs::read_to_string(path).with_context(|| {
        format!("rule `{path}` is neither attached to the model nor a readable file")
    })?;
    let raw: Raw = serde_json::from_str(&text).context("rule file")?;
    let exprs: Vec<&str> = raw.exprs.iter().map(String::as_str).collect();
    let rule = match raw.form.as_str() {
        "explicit" => SuperpositionRule::parse_explicit(op.chart(), raw.m, &exprs)?,
        "implicit" => SuperpositionRule::parse_implicit(op.chart(), raw.m, &exprs)?,
        other => bail!("rule form must be explicit or implicit, got `{other}`"),
    };
    Ok(rule)
}

fn parse_points(s: &str, dim: usize) -> Result<Vec<Vec<f64>>> {
    s.split(';')
        .map(|p| {
            let coords: Vec<f64> = p
                .split(',')
                .map(|v| v.trim().parse::<f64>().context("start point"))
                .collect::<Result<Vec<_>>>()?;
            if coords.len() != dim {
                bail!(
                    "start point `{p}` has {} coordinates, chart has {dim}",
                    coords.len()
                );
            }
            Ok(coords)
        })
        .collect()
}

/// Small lattice of starts around the origin plus a few offsets.
fn default_starts(dim: usize) -> Vec<Vec<f64>> {
    let offsets = [-2.0, -0.5, 0.5, 2.0];
    let mut out = vec![vec![0.1; dim]];
    for &a in &offsets {
        out.push(vec![a; dim]);
        let mut alt = vec![a; dim];
        for (i, v) in alt.iter_mut().enumerate() {
            if i % 2 == 1 {
                *v = -a;
            }
        }
        out.push(alt);
    }
    out
}
