//! Command-line interface: generate example circuits, plan and execute
//! separator-based contractions, and run benchmark sweeps.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use sepsim::bench::{
    emit_report, failed_rows, render_csv, render_json, run_experiment, BoundKind, FamilySpec,
    ReportFormat, RunConfig, DEFAULT_TIMEOUT,
};
use sepsim::circuit::io::{load_circuit, load_measurement, save_circuit};
use sepsim::circuit::{
    circuit_to_network, statevector_expectation_capped, Measurement, DEFAULT_STATEVECTOR_CAP,
};
use sepsim::error::{Error, Result};
use sepsim::generators::{gen_iqp, gen_random3d, gen_sycamore, IqpParams, Random3dParams, SycamoreParams};
use sepsim::separator::{build_hierarchy, hierarchy_to_json, SeparatorParams};
use sepsim::tncore::{execute_plan, hierarchy_cost};

#[derive(Parser)]
#[command(
    name = "sepsim",
    about = "Tensor-network contraction of geometrically local quantum circuits \
             via sphere-separator hierarchies"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a circuit from one of the example families and write its JSON.
    Gen(GenArgs),
    /// Convert a circuit, build the separator hierarchy, and report its cost.
    Plan(PlanArgs),
    /// Contract a circuit's network and print the measured expectation value.
    Exec(ExecArgs),
    /// Run a multi-realization benchmark sweep and emit a CSV/JSON report.
    Bench(BenchArgs),
}

#[derive(Args, Clone, Default)]
struct FamilyArgs {
    /// iqp | sycamore | random3d | file
    #[arg(long)]
    family: Option<String>,
    /// Lattice side length.
    #[arg(long = "L")]
    l: Option<usize>,
    /// IQP: time steps (default L^2).
    #[arg(long)]
    t: Option<usize>,
    /// IQP: coupling density parameter (default 3).
    #[arg(long)]
    gamma: Option<f64>,
    /// Sycamore: periods (default 5).
    #[arg(long)]
    q: Option<usize>,
    /// Sycamore: per-period idle probability (default 0.88).
    #[arg(long)]
    p_idle: Option<f64>,
    /// random3d: time steps per site, T = round(alpha L) (default 0.1).
    #[arg(long)]
    alpha: Option<f64>,
    /// random3d: cavity side length (default 5).
    #[arg(long)]
    s_cavity: Option<usize>,
    /// random3d: cavity acceptance width (default 10).
    #[arg(long)]
    sigma: Option<f64>,
    /// random3d: Poisson cavity parameter (default 5e4 (L/200)^3.5).
    #[arg(long)]
    lambda: Option<f64>,
    /// file family: circuit JSON path.
    #[arg(long)]
    circuit: Option<PathBuf>,
    /// file family: measurement JSON path (default all |0><0|).
    #[arg(long)]
    measurement: Option<PathBuf>,
}

impl FamilyArgs {
    fn to_spec(&self) -> Result<FamilySpec> {
        let family = self
            .family
            .as_deref()
            .ok_or_else(|| Error::Parameter("--family is required".into()))?;
        let l = || {
            self.l
                .ok_or_else(|| Error::Parameter(format!("--L is required for family {family}")))
        };
        match family {
            "iqp" => Ok(FamilySpec::Iqp { l: l()?, t: self.t, gamma: self.gamma.unwrap_or(3.0) }),
            "sycamore" => Ok(FamilySpec::Sycamore {
                l: l()?,
                q: self.q.unwrap_or(5),
                p_idle: self.p_idle.unwrap_or(0.88),
            }),
            "random3d" => Ok(FamilySpec::Random3d {
                l: l()?,
                alpha: self.alpha.unwrap_or(0.1),
                s_cavity: self.s_cavity.unwrap_or(5),
                sigma: self.sigma.unwrap_or(10.0),
                lambda: self.lambda,
            }),
            "file" => Ok(FamilySpec::File {
                circuit: self
                    .circuit
                    .clone()
                    .ok_or_else(|| Error::Parameter("--circuit is required for family file".into()))?,
                measurement: self.measurement.clone(),
            }),
            other => Err(Error::Parameter(format!("unknown family {other:?}"))),
        }
    }
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    family: FamilyArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path for the circuit JSON (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlanArgs {
    /// Circuit JSON path.
    #[arg(long)]
    circuit: PathBuf,
    #[arg(long)]
    measurement: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sphere inflation for the embedding (default min_spacing / 100).
    #[arg(long)]
    epsilon: Option<f64>,
    /// Output path for the hierarchy JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExecArgs {
    #[arg(long)]
    circuit: PathBuf,
    #[arg(long)]
    measurement: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Also evaluate the dense statevector oracle and compare.
    #[arg(long)]
    oracle: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// TOML config mirroring the flags below; flags override the file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    family: FamilyArgs,
    #[arg(long)]
    realizations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated subset of network,circuit,planar,sidewise,explicit,ssa.
    #[arg(long)]
    bounds: Option<String>,
    /// Contract every realization and check it against the statevector oracle.
    #[arg(long)]
    execute: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv | json
    #[arg(long)]
    format: Option<String>,
    /// Per-realization timeout in seconds (default 300).
    #[arg(long)]
    timeout: Option<u64>,
}

/// TOML bench configuration; field names mirror the CLI flags.
#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct BenchToml {
    family: Option<String>,
    #[serde(rename = "L")]
    l: Option<usize>,
    t: Option<usize>,
    gamma: Option<f64>,
    q: Option<usize>,
    p_idle: Option<f64>,
    alpha: Option<f64>,
    s_cavity: Option<usize>,
    sigma: Option<f64>,
    lambda: Option<f64>,
    circuit: Option<PathBuf>,
    measurement: Option<PathBuf>,
    realizations: Option<usize>,
    seed: Option<u64>,
    bounds: Option<Vec<String>>,
    execute: Option<bool>,
    out: Option<PathBuf>,
    format: Option<String>,
    timeout: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.cmd {
        Cmd::Gen(args) => cmd_gen(args).map(|()| 0),
        Cmd::Plan(args) => cmd_plan(args).map(|()| 0),
        Cmd::Exec(args) => cmd_exec(args).map(|()| 0),
        Cmd::Bench(args) => cmd_bench(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let spec = args.family.to_spec()?;
    let circuit = match &spec {
        FamilySpec::Iqp { l, t, gamma } => {
            let mut p = IqpParams::new(*l, args.seed);
            if let Some(t) = t {
                p.t = *t;
            }
            p.gamma = *gamma;
            gen_iqp(&p)?
        }
        FamilySpec::Sycamore { l, q, p_idle } => {
            let mut p = SycamoreParams::new(*l, args.seed);
            p.q = *q;
            p.p_idle = *p_idle;
            gen_sycamore(&p)?
        }
        FamilySpec::Random3d { l, alpha, s_cavity, sigma, lambda } => {
            let mut p = Random3dParams::new(*l, args.seed);
            p.alpha = *alpha;
            p.s_cavity = *s_cavity;
            p.sigma = *sigma;
            if let Some(lambda) = lambda {
                p.lambda = *lambda;
            }
            gen_random3d(&p)?
        }
        FamilySpec::File { .. } => {
            return Err(Error::Parameter("gen needs a generator family, not file".into()))
        }
    };
    match &args.out {
        Some(path) => save_circuit(path, &circuit)?,
        None => println!("{}", sepsim::circuit::io::circuit_to_json(&circuit)?),
    }
    Ok(())
}

fn load_pair(circuit: &PathBuf, measurement: &Option<PathBuf>) -> Result<(sepsim::circuit::Circuit, Measurement)> {
    let c = load_circuit(circuit)?;
    let m = match measurement {
        Some(path) => load_measurement(path)?,
        None => Measurement::default(),
    };
    Ok((c, m))
}

fn cmd_plan(args: PlanArgs) -> Result<()> {
    let (circuit, measurement) = load_pair(&args.circuit, &args.measurement)?;
    let converted = circuit_to_network(&circuit, &measurement, args.epsilon)?;
    println!(
        "network: {} tensors, {} bonds, k <= {}",
        converted.network.tensors.len(),
        converted.network.bonds.len(),
        converted.k_bound
    );
    if converted.network.tensors.is_empty() {
        println!("all wires collapsed to scalars; nothing to plan");
        return Ok(());
    }
    let params = SeparatorParams::new(circuit.d, converted.k_bound.max(1))?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let (root, stats) =
        build_hierarchy(&converted.network, &converted.embedding, &params, &mut rng)?;
    let ledger = hierarchy_cost(&root, &converted.network)?;
    println!(
        "hierarchy: depth {}, {} separator calls, {} fallbacks, {} circle retries",
        stats.max_depth, stats.separator_calls, stats.fallback_calls, stats.circle_retries
    );
    println!("contraction cost: 2^{:.3} scalar operations", ledger.log2_scalar_ops);
    if let Some(exact) = &ledger.exact_ops {
        println!("exact operation count: {exact}");
    }
    if let Some(path) = &args.out {
        std::fs::write(path, hierarchy_to_json(&root)?)
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        println!("hierarchy written to {}", path.display());
    }
    Ok(())
}

fn cmd_exec(args: ExecArgs) -> Result<()> {
    let (circuit, measurement) = load_pair(&args.circuit, &args.measurement)?;
    let converted = circuit_to_network(&circuit, &measurement, args.epsilon)?;
    let value = if converted.network.tensors.is_empty() {
        converted.scalar_factor
    } else {
        let params = SeparatorParams::new(circuit.d, converted.k_bound.max(1))?;
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        let (root, _) =
            build_hierarchy(&converted.network, &converted.embedding, &params, &mut rng)?;
        converted.scalar_factor * execute_plan(&converted.network, &root)?
    };
    println!("expectation: {} + {}i", value.re, value.im);
    if args.oracle {
        let oracle =
            statevector_expectation_capped(&circuit, &measurement, DEFAULT_STATEVECTOR_CAP)?;
        let scale = oracle.abs().max(1.0);
        let agrees = (value.re - oracle).abs() <= 1e-8 * scale && value.im.abs() <= 1e-8 * scale;
        println!("oracle: {oracle} ({})", if agrees { "agrees" } else { "DISAGREES" });
        if !agrees {
            return Err(Error::Validation("contraction disagrees with the oracle".into()));
        }
    }
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<u8> {
    let toml_cfg: BenchToml = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
            toml::from_str(&text)
                .map_err(|e| Error::Validation(format!("bad config {}: {e}", path.display())))?
        }
        None => BenchToml::default(),
    };

    // CLI flags override the config file.
    let fam = FamilyArgs {
        family: args.family.family.clone().or(toml_cfg.family),
        l: args.family.l.or(toml_cfg.l),
        t: args.family.t.or(toml_cfg.t),
        gamma: args.family.gamma.or(toml_cfg.gamma),
        q: args.family.q.or(toml_cfg.q),
        p_idle: args.family.p_idle.or(toml_cfg.p_idle),
        alpha: args.family.alpha.or(toml_cfg.alpha),
        s_cavity: args.family.s_cavity.or(toml_cfg.s_cavity),
        sigma: args.family.sigma.or(toml_cfg.sigma),
        lambda: args.family.lambda.or(toml_cfg.lambda),
        circuit: args.family.circuit.clone().or(toml_cfg.circuit),
        measurement: args.family.measurement.clone().or(toml_cfg.measurement),
    };
    let mut config = RunConfig::new(fam.to_spec()?);
    config.realizations = args.realizations.or(toml_cfg.realizations).unwrap_or(1);
    config.seed = args.seed.or(toml_cfg.seed).unwrap_or(0);
    config.execute = args.execute || toml_cfg.execute.unwrap_or(false);
    config.timeout = args
        .timeout
        .or(toml_cfg.timeout)
        .map(Duration::from_secs)
        .unwrap_or(DEFAULT_TIMEOUT);
    let bound_names: Option<Vec<String>> = args
        .bounds
        .map(|s| s.split(',').map(|t| t.trim().to_string()).collect())
        .or(toml_cfg.bounds);
    if let Some(names) = bound_names {
        let mut set = BTreeSet::new();
        for name in names {
            set.insert(BoundKind::parse(&name)?);
        }
        config.bounds = set;
    }
    let format = args.format.or(toml_cfg.format).unwrap_or_else(|| "csv".into());
    config.format = match format.as_str() {
        "csv" => ReportFormat::Csv,
        "json" => ReportFormat::Json,
        other => return Err(Error::Parameter(format!("unknown format {other:?}"))),
    };
    config.out = args.out.or(toml_cfg.out);

    let records = run_experiment(&config)?;
    match &config.out {
        Some(path) => {
            emit_report(&records, config.format, path)?;
            eprintln!("{} records written to {}", records.len(), path.display());
        }
        None => {
            let text = match config.format {
                ReportFormat::Csv => render_csv(&records),
                ReportFormat::Json => render_json(&records)?,
            };
            print!("{text}");
        }
    }
    let failed = failed_rows(&records);
    if failed > 0 {
        eprintln!("{failed} of {} rows failed", records.len());
        return Ok(1);
    }
    Ok(0)
}
