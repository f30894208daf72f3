//! Command-line front end: build networks, solve single instances, compute
//! prices and selections, and run the simulation studies from config files.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use peergrid::equilibrium::{
    entity_profit, nash_closed_form, nash_fixed_point, social_welfare, user_utility,
};
use peergrid::error::Error;
use peergrid::experiments::{
    format_sig, run_mismatch_study, run_pricing_comparison, run_selection_study, write_manifest,
    write_mismatch_csv, write_pricing_csv, write_selection_csv, ExperimentConfig, Study,
};
use peergrid::linalg::vec_max_norm;
use peergrid::net::{build_topology, CostProfile, ModelInstance, Network, Topology, UserPopulation};
use peergrid::pricing::{
    baseline_price_no_peer, incomplete_consumption_lower_bound, incomplete_price_lower_bound,
    pigouvian_subsidies, ppd_consumption, ppd_prices, social_optimum, uniform_price_complete,
    DistributionSpec,
};
use peergrid::selection::{
    exact_selection_capped, heuristic_selection, performance_metric, DEFAULT_ENUMERATION_CAP,
};

#[derive(Parser)]
#[command(name = "peergrid", version, about = "Peer-effect electricity pricing toolkit")]
struct Cli {
    /// Worker threads for experiment runs (falls back to PEERGRID_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a standard topology's interaction matrix as CSV.
    Topology {
        #[arg(long)]
        kind: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the consumption equilibrium at given prices.
    Solve {
        #[command(flatten)]
        instance: InstanceArgs,
        #[command(flatten)]
        prices: PriceArgs,
        /// Optional CSV output of the per-user table.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Compute prices under a pricing scheme.
    Price {
        #[command(flatten)]
        instance: InstanceArgs,
        /// ppd | uniform | incomplete | baseline | social
        #[arg(long)]
        scheme: String,
    },
    /// Choose which users to expose to the peer comparison.
    Select {
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long)]
        price: f64,
        #[arg(long)]
        m: usize,
        /// exact | heuristic | both
        #[arg(long, default_value = "both")]
        method: String,
        /// Expected consumption used by the heuristic ranking (defaults to
        /// the no-peer expectation under the instance's distribution spec).
        #[arg(long)]
        expected_consumption: Option<f64>,
        /// Cap on enumerated candidate assignments.
        #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
        cap: u64,
    },
    /// Run a simulation study from a config file.
    Experiment {
        /// pricing | selection | mismatch
        #[arg(long)]
        study: String,
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct InstanceArgs {
    /// Interaction matrix CSV (alternative to --topology).
    #[arg(long, conflicts_with_all = ["topology", "n"])]
    network: Option<PathBuf>,
    /// fully_connected | star | ring
    #[arg(long, requires = "n")]
    topology: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    /// Parameter file: flat `key = value` lines with a, b, gamma, c
    /// (comma-separated vectors or scalars) and optional a_low/a_high/
    /// b_low/b_high distribution bounds.
    #[arg(long)]
    params: PathBuf,
    /// Overrides the parameter file's gamma with a common value.
    #[arg(long)]
    gamma: Option<f64>,
}

#[derive(Args)]
struct PriceArgs {
    /// Uniform price for every user.
    #[arg(long, conflicts_with = "prices")]
    price: Option<f64>,
    /// Comma-separated per-user prices.
    #[arg(long)]
    prices: Option<String>,
}

struct ParamFile {
    a: Vec<f64>,
    b: Vec<f64>,
    gamma: Vec<f64>,
    c: Vec<f64>,
    dist: DistributionSpec,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::AssumptionViolated { .. }
        | Error::NegativePrice { .. }
        | Error::NegativeBound { .. }
        | Error::PremiseNotMet(_)
        | Error::AlphaOutOfRange { .. } => 3,
        Error::NotSymmetric { .. } => 4,
        Error::TooLarge { .. } => 5,
        Error::ConfigInvalid { .. } => 6,
        _ => 2,
    }
}

fn parse_scalar_or_vec(value: &str, n: usize, key: &str) -> Result<Vec<f64>, Error> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    let parsed: Result<Vec<f64>, _> = parts.iter().map(|p| p.parse::<f64>()).collect();
    let parsed = parsed.map_err(|_| Error::ConfigInvalid {
        key: key.to_string(),
        reason: format!("not a number list: {value}"),
    })?;
    if parsed.len() == 1 {
        Ok(vec![parsed[0]; n])
    } else if parsed.len() == n {
        Ok(parsed)
    } else {
        Err(Error::DimensionMismatch {
            expected: n,
            got: parsed.len(),
        })
    }
}

fn load_params(path: &Path, n: usize) -> Result<ParamFile, Error> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut raw: HashMap<String, String> = HashMap::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::ConfigInvalid {
            key: line.to_string(),
            reason: "expected key = value".to_string(),
        })?;
        raw.insert(key.trim().to_string(), value.trim().to_string());
    }
    let get_vec = |key: &str| -> Result<Vec<f64>, Error> {
        let value = raw.get(key).ok_or_else(|| Error::ConfigInvalid {
            key: key.to_string(),
            reason: "missing required key".to_string(),
        })?;
        parse_scalar_or_vec(value, n, key)
    };
    let bound = |key: &str, default: f64| -> Result<f64, Error> {
        match raw.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| Error::ConfigInvalid {
                key: key.to_string(),
                reason: format!("not a number: {v}"),
            }),
        }
    };
    let spec = DistributionSpec::study_default();
    let dist = DistributionSpec::new(
        bound("a_low", spec.a_low)?,
        bound("a_high", spec.a_high)?,
        bound("b_low", spec.b_low)?,
        bound("b_high", spec.b_high)?,
    )?;
    Ok(ParamFile {
        a: get_vec("a")?,
        b: get_vec("b")?,
        gamma: get_vec("gamma")?,
        c: get_vec("c")?,
        dist,
    })
}

fn build_instance(args: &InstanceArgs) -> Result<(ModelInstance, DistributionSpec), Error> {
    let network = match (&args.network, &args.topology, args.n) {
        (Some(path), _, _) => Network::load_csv(path)?,
        (None, Some(kind), Some(n)) => {
            let kind = Topology::parse(kind).ok_or_else(|| Error::ConfigInvalid {
                key: "topology".to_string(),
                reason: format!("unknown topology: {kind}"),
            })?;
            build_topology(kind, n)?
        }
        _ => {
            return Err(Error::ConfigInvalid {
                key: "network".to_string(),
                reason: "provide --network or --topology with --n".to_string(),
            })
        }
    };
    let n = network.n();
    let params = load_params(&args.params, n)?;
    let gamma = match args.gamma {
        Some(g) => vec![g; n],
        None => params.gamma,
    };
    let population = UserPopulation::new(params.a, params.b, gamma)?;
    let cost = CostProfile::new(params.c)?;
    let dist = params.dist;
    Ok((ModelInstance::new(network, population, cost)?, dist))
}

fn resolve_prices(args: &PriceArgs, n: usize) -> Result<Vec<f64>, Error> {
    match (&args.price, &args.prices) {
        (Some(p), None) => Ok(vec![*p; n]),
        (None, Some(list)) => parse_scalar_or_vec(list, n, "prices"),
        _ => Err(Error::ConfigInvalid {
            key: "price".to_string(),
            reason: "provide --price or --prices".to_string(),
        }),
    }
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| format_sig(*x)).collect::<Vec<_>>().join(", ")
}

fn cmd_topology(kind: &str, n: usize, out: &Path) -> Result<(), Error> {
    let kind = Topology::parse(kind).ok_or_else(|| Error::ConfigInvalid {
        key: "kind".to_string(),
        reason: format!("unknown topology: {kind}"),
    })?;
    let network = build_topology(kind, n)?;
    network.save_csv(out)?;
    println!(
        "wrote {} {}x{} interaction matrix to {}",
        kind.name(),
        n,
        n,
        out.display()
    );
    Ok(())
}

fn cmd_solve(args: &InstanceArgs, prices: &PriceArgs, csv: &Option<PathBuf>) -> Result<(), Error> {
    let (instance, _) = build_instance(args)?;
    let n = instance.n();
    let price_vec = resolve_prices(prices, n)?;
    let x = nash_closed_form(&instance, &price_vec)?;
    let oracle = nash_fixed_point(
        &instance,
        &price_vec,
        peergrid::equilibrium::DEFAULT_TOL,
        peergrid::equilibrium::DEFAULT_MAX_ITER,
    )?;
    let residual = vec_max_norm(
        &x.x()
            .iter()
            .zip(oracle.x())
            .map(|(a, b)| a - b)
            .collect::<Vec<f64>>(),
    );
    println!("user  price  consumption  utility");
    let mut csv_out = String::from("user,price,consumption,utility\n");
    for i in 0..n {
        let u = user_utility(i, &x, price_vec[i], &instance);
        println!(
            "{:>4}  {}  {}  {}",
            i + 1,
            format_sig(price_vec[i]),
            format_sig(x.x()[i]),
            format_sig(u)
        );
        csv_out.push_str(&format!(
            "{},{},{},{}\n",
            i + 1,
            format_sig(price_vec[i]),
            format_sig(x.x()[i]),
            format_sig(u)
        ));
    }
    println!("profit = {}", format_sig(entity_profit(&x, &price_vec, instance.cost())));
    println!("welfare = {}", format_sig(social_welfare(&x, &instance)));
    println!("fixed_point_residual = {}", format_sig(residual));
    if let Some(path) = csv {
        fs::write(path, csv_out).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn cmd_price(args: &InstanceArgs, scheme: &str) -> Result<(), Error> {
    let (instance, dist) = build_instance(args)?;
    let n = instance.n();
    match scheme {
        "ppd" => {
            let p = ppd_prices(&instance)?;
            let x = ppd_consumption(&instance)?;
            println!("prices = {}", fmt_vec(&p.prices));
            println!("  base a/2          = {}", fmt_vec(&p.constant));
            println!("  cost term         = {}", fmt_vec(&p.cost_term));
            println!("  influence rebate  = {}", fmt_vec(&p.influence_incentive));
            println!("  influenced charge = {}", fmt_vec(&p.influenced_surcharge));
            println!("consumption = {}", fmt_vec(x.x()));
            println!(
                "profit = {}",
                format_sig(entity_profit(&x, &p.prices, instance.cost()))
            );
        }
        "uniform" => {
            let p = uniform_price_complete(&instance)?;
            let x = nash_closed_form(&instance, &vec![p; n])?;
            println!("price = {}", format_sig(p));
            println!("consumption = {}", fmt_vec(x.x()));
            println!(
                "profit = {}",
                format_sig(entity_profit(&x, &vec![p; n], instance.cost()))
            );
        }
        "incomplete" => {
            let c = instance.cost().scalar().ok_or_else(|| Error::ConfigInvalid {
                key: "c".to_string(),
                reason: "incomplete-information bound needs a uniform cost".to_string(),
            })?;
            let p = incomplete_price_lower_bound(
                &dist,
                instance.network(),
                instance.population().gamma(),
                c,
            )?;
            let x_lb = incomplete_consumption_lower_bound(
                &dist,
                instance.network(),
                instance.population().gamma(),
                p,
            )?;
            let x = nash_closed_form(&instance, &vec![p; n])?;
            println!("price_lower_bound = {}", format_sig(p));
            println!("expected_consumption_bound = {}", format_sig(x_lb));
            println!("realized consumption = {}", fmt_vec(x.x()));
            println!(
                "realized profit = {}",
                format_sig(entity_profit(&x, &vec![p; n], instance.cost()))
            );
        }
        "baseline" => {
            let c = instance.cost().scalar().ok_or_else(|| Error::ConfigInvalid {
                key: "c".to_string(),
                reason: "baseline price needs a uniform cost".to_string(),
            })?;
            let p = baseline_price_no_peer(&dist, c);
            let x = nash_closed_form(&instance, &vec![p; n])?;
            println!("price = {}", format_sig(p));
            println!("consumption = {}", fmt_vec(x.x()));
            println!(
                "profit = {}",
                format_sig(entity_profit(&x, &vec![p; n], instance.cost()))
            );
        }
        "social" => {
            let x = social_optimum(&instance)?;
            let s = pigouvian_subsidies(&instance, &x);
            println!("consumption = {}", fmt_vec(x.x()));
            println!("subsidies = {}", fmt_vec(&s));
            println!("welfare = {}", format_sig(social_welfare(&x, &instance)));
        }
        other => {
            return Err(Error::ConfigInvalid {
                key: "scheme".to_string(),
                reason: format!("unknown scheme: {other}"),
            })
        }
    }
    Ok(())
}

fn indices_one_based(treated: &[usize]) -> String {
    if treated.is_empty() {
        "(none)".to_string()
    } else {
        treated
            .iter()
            .map(|i| (i + 1).to_string())
            .collect::<Vec<_>>()
            .join(", ")
    }
}

fn cmd_select(
    args: &InstanceArgs,
    price: f64,
    m: usize,
    method: &str,
    expected_consumption: Option<f64>,
    cap: u64,
) -> Result<(), Error> {
    let (instance, dist) = build_instance(args)?;
    let c = instance.cost().scalar().unwrap_or(0.0);
    let expected =
        expected_consumption.unwrap_or_else(|| dist.mean_a() / (2.0 * (2.0 * dist.mean_b() + c)));
    let exact = match method {
        "exact" | "both" => Some(exact_selection_capped(&instance, price, m, cap)?),
        _ => None,
    };
    let heuristic = match method {
        "heuristic" | "both" => Some(heuristic_selection(&instance, price, m, expected)?),
        "exact" => None,
        _ if exact.is_none() => {
            return Err(Error::ConfigInvalid {
                key: "method".to_string(),
                reason: format!("unknown method: {method}"),
            })
        }
        _ => None,
    };
    if let Some(out) = &exact {
        println!("exact treated = {}", indices_one_based(&out.assignment.treated()));
        println!("exact profit = {}", format_sig(out.profit));
        println!("baseline profit = {}", format_sig(out.baseline_profit));
    }
    if let Some(out) = &heuristic {
        println!(
            "heuristic treated = {}",
            indices_one_based(&out.assignment.treated())
        );
        println!("heuristic profit = {}", format_sig(out.profit));
        if exact.is_none() {
            println!("baseline profit = {}", format_sig(out.baseline_profit));
        }
    }
    if let (Some(e), Some(h)) = (&exact, &heuristic) {
        match performance_metric(h.profit, e.profit, e.baseline_profit) {
            Ok(s) => println!("S_m = {}", format_sig(s)),
            Err(Error::UndefinedMetric) => println!("S_m = n/a"),
            Err(other) => return Err(other),
        }
    }
    Ok(())
}

fn cmd_experiment(study: &str, config_path: &Path, threads: Option<usize>) -> Result<(), Error> {
    let study = Study::parse(study).ok_or_else(|| Error::ConfigInvalid {
        key: "study".to_string(),
        reason: format!("unknown study: {study}"),
    })?;
    let mut config = ExperimentConfig::load(study, config_path)?;
    if let Some(t) = threads {
        config.threads = Some(t);
    }
    let started = Instant::now();
    let out_path = PathBuf::from(&config.output_path);
    match study {
        Study::Pricing => {
            let table = run_pricing_comparison(&config)?;
            write_pricing_csv(&out_path, &table)?;
            if table.rejected_draws > 0 {
                eprintln!("rejected draws: {}", table.rejected_draws);
            }
        }
        Study::Selection => {
            let table = run_selection_study(&config)?;
            write_selection_csv(&out_path, &table)?;
            if table.rejected_draws > 0 {
                eprintln!("rejected draws: {}", table.rejected_draws);
            }
        }
        Study::Mismatch => {
            let table = run_mismatch_study(&config)?;
            write_mismatch_csv(&out_path, &table)?;
        }
    }
    write_manifest(&out_path, &format!("experiment {}", study.name()), &config, started.elapsed())?;
    println!(
        "wrote {} and {}",
        out_path.display(),
        out_path.with_extension("manifest.txt").display()
    );
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Error> {
    let threads = cli.threads.or_else(|| {
        std::env::var("PEERGRID_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    match &cli.command {
        Command::Topology { kind, n, out } => cmd_topology(kind, *n, out),
        Command::Solve { instance, prices, csv } => cmd_solve(instance, prices, csv),
        Command::Price { instance, scheme } => cmd_price(instance, scheme),
        Command::Select {
            instance,
            price,
            m,
            method,
            expected_consumption,
            cap,
        } => cmd_select(instance, *price, *m, method, *expected_consumption, *cap),
        Command::Experiment { study, config } => cmd_experiment(study, config, threads),
    }
}

// User indices in messages are 1-based, matching the printed tables.
fn render_error(err: &Error) -> String {
    match err {
        Error::AssumptionViolated { user } => format!(
            "assumption a_i > p_i, b_i > gamma_i violated for user {}",
            user + 1
        ),
        Error::NegativePrice { user, price } => format!(
            "optimal individual price for user {} is negative ({})",
            user + 1,
            format_sig(*price)
        ),
        Error::NotConnected { i, j } => {
            format!("users {} and {} are not connected", i + 1, j + 1)
        }
        other => other.to_string(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", render_error(&err));
            ExitCode::from(exit_code_for(&err))
        }
    }
}
