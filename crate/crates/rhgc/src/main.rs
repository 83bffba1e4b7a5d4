//! Command-line front end: canonical-form transformation, regret sweeps,
//! adversarial-family verification, the robot tracking demo, and the
//! verification battery.

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use rhgc::adversary;
use rhgc::canonical::{to_canonical, LtiSystem};
use rhgc::error::Error;
use rhgc::harness::{self, ExperimentConfig};
use rhgc::robot::{robot_rhgc, RobotAlgorithm, RobotInit, RobotInstance};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "rhgc",
    about = "Receding-horizon gradient-based control: regret sweeps, adversarial verification, and a nonlinear tracking demo"
)]
struct Cli {
    /// Worker threads for sweep execution (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Transform system matrices into canonical form and report the result.
    Transform(TransformArgs),
    /// Run every (algorithm, lookahead, seed) triple of a configuration.
    Run(RunArgs),
    /// Run a configuration and print the aggregated sweep summary.
    Sweep(RunArgs),
    /// Build the adversarial tracking family, verify its structure, and
    /// sweep regret across inner-iteration counts.
    LowerBound(LowerBoundArgs),
    /// Track the reference curve with the nonlinear robot and emit paths.
    Robot(RobotArgs),
    /// Run the verification battery; exits nonzero on failure.
    Verify,
    /// Print the bundled example sweep configuration.
    ExampleConfig,
}

#[derive(Args)]
struct TransformArgs {
    /// Plain-text matrix file: rows of A, a blank line, rows of B.
    file: PathBuf,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace the configuration's seed list with a single seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct LowerBoundArgs {
    #[arg(long, default_value_t = 5.0)]
    zeta: f64,
    #[arg(long, default_value_t = 2)]
    p: usize,
    #[arg(long, default_value_t = 30)]
    horizon: usize,
    /// Variation budget in units of theta_bar.
    #[arg(long, default_value_t = 8.0)]
    variation_budget: f64,
    #[arg(long, default_value_t = 1.0)]
    theta_bar: f64,
    /// Number of seeds (0..count).
    #[arg(long, default_value_t = 50)]
    seeds: u64,
    /// Sweep inner-iteration counts 0..=k_max.
    #[arg(long, default_value_t = 5)]
    k_max: usize,
    #[arg(long, default_value = "rhtm")]
    algorithm: String,
    /// Output CSV path for the regret sweep.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RobotArgs {
    /// Optional configuration with a [robot] section.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV for the executed path; the planned path goes next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    w: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    algorithm: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global();
    }
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(Error::Config { field, reason }) => {
            eprintln!("configuration error in `{field}`: {reason}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Transform(args) => transform(&args),
        Command::Run(args) => run(&args, false),
        Command::Sweep(args) => run(&args, true),
        Command::LowerBound(args) => lower_bound(&args),
        Command::Robot(args) => robot(&args),
        Command::Verify => verify(),
        Command::ExampleConfig => {
            print!("{}", harness::example_sweep_config());
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// Parse a matrix file: rows of A, one blank line, rows of B.
fn read_matrix_file(path: &Path) -> Result<(DMatrix<f64>, DMatrix<f64>), Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
    let mut blocks: Vec<Vec<Vec<f64>>> = vec![Vec::new()];
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            if !blocks.last().unwrap().is_empty() {
                blocks.push(Vec::new());
            }
            continue;
        }
        let row: Result<Vec<f64>, _> = line.split_whitespace().map(str::parse::<f64>).collect();
        let row = row.map_err(|e| Error::config("matrix file", format!("bad entry: {e}")))?;
        blocks.last_mut().unwrap().push(row);
    }
    blocks.retain(|b| !b.is_empty());
    if blocks.len() != 2 {
        return Err(Error::config(
            "matrix file",
            format!(
                "expected A and B separated by a blank line, found {} blocks",
                blocks.len()
            ),
        ));
    }
    let to_matrix = |rows: &Vec<Vec<f64>>, name: &str| -> Result<DMatrix<f64>, Error> {
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::config(
                "matrix file",
                format!("ragged rows in {name}"),
            ));
        }
        Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
    };
    Ok((to_matrix(&blocks[0], "A")?, to_matrix(&blocks[1], "B")?))
}

fn transform(args: &TransformArgs) -> Result<ExitCode, Error> {
    let (a, b) = read_matrix_file(&args.file)?;
    let sys = LtiSystem::new(a, b)?;
    let canon = to_canonical(&sys)?;
    let mut out = String::new();
    out.push_str(&format!(
        "n = {}, m = {}, controllability index p = {}\n",
        canon.state_dim(),
        canon.input_dim(),
        canon.p
    ));
    out.push_str(&format!("actuated rows: {:?}\n", canon.indices));
    out.push_str(&format!("chain lengths: {:?}\n", canon.p_list));
    out.push_str(&format!("A_hat =\n{:.6}\n", canon.a_hat));
    out.push_str(&format!("B_hat =\n{:.6}\n", canon.b_hat));
    out.push_str(&format!("S_x =\n{:.6}\n", canon.s_x));
    out.push_str(&format!("S_u =\n{:.6}\n", canon.s_u));
    emit(&args.out, &out)?;
    Ok(ExitCode::SUCCESS)
}

fn run(args: &RunArgs, with_summary: bool) -> Result<ExitCode, Error> {
    let mut config = ExperimentConfig::from_path(&args.config)?;
    if let Some(seed) = args.seed {
        config.run.seeds = vec![seed];
    }
    let rows = harness::run_experiment(&config)?;
    let csv = harness::rows_to_csv(&rows);
    match &args.out {
        Some(path) => std::fs::write(path, &csv)?,
        None => print!("{csv}"),
    }
    if with_summary {
        let summary = harness::sweep_report(&rows);
        let rendered = summary.render();
        println!("{rendered}");
        if let Some(path) = &args.out {
            let mut summary_path = path.clone();
            summary_path.set_extension("summary.txt");
            std::fs::write(summary_path, rendered)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn lower_bound(args: &LowerBoundArgs) -> Result<ExitCode, Error> {
    let sample = adversary::build_instance(
        args.zeta,
        args.p,
        args.horizon,
        args.variation_budget * args.theta_bar,
        args.theta_bar,
        0,
    )?;
    println!(
        "family: zeta = {}, p = {}, N = {}, delta = {:.6}, sigma = {:.6}, epochs = {} x {}",
        args.zeta,
        args.p,
        args.horizon,
        sample.delta,
        sample.sigma,
        sample.epoch_count,
        sample.epoch_len
    );
    println!(
        "variation {:.6} within budget {:.6}; admissible lookahead up to {}",
        sample.target_variation(),
        sample.l_n,
        sample.max_admissible_w()
    );

    let pe = adversary::verify_pe_form(&sample);
    println!(
        "riccati structure: {} (offdiag {:.2e}, spacing err {:.2e}, q1 {:.4}, closed-form err {:.2e})",
        if pe.pass { "pass" } else { "FAIL" },
        pe.max_offdiagonal,
        pe.max_spacing_error,
        pe.q_first,
        pe.closed_form_error
    );

    let mut failed = !pe.pass;
    match adversary::verify_y_decay(&sample) {
        Ok(decay) => {
            println!(
                "inverse decay: {} (min slack {:.2e}, block deviation {:.2e})",
                if decay.pass { "pass" } else { "FAIL" },
                decay.min_bound_slack,
                decay.max_block_deviation
            );
            failed |= !decay.pass;
        }
        Err(Error::NonIntegerHorizonRatio { n_total, n }) => {
            println!("inverse decay: skipped (N/n = {n_total}/{n} is not an integer)");
        }
        Err(e) => return Err(e),
    }

    let algorithm = match args.algorithm.as_str() {
        "rhgd" => rhgc::algorithms::Algorithm::Rhgd,
        "rhag" => rhgc::algorithms::Algorithm::Rhag,
        "rhtm" => rhgc::algorithms::Algorithm::Rhtm,
        other => {
            return Err(Error::config(
                "algorithm",
                format!("unknown algorithm `{other}`"),
            ))
        }
    };
    let seeds: Vec<u64> = (0..args.seeds).collect();
    let k_values: Vec<usize> = (0..=args.k_max).collect();
    let params = adversary::FamilyParams {
        zeta: args.zeta,
        p: args.p,
        horizon: args.horizon,
        l_n_over_theta_bar: args.variation_budget,
        theta_bar: args.theta_bar,
    };
    let sweep = adversary::empirical_lower_bound(&params, algorithm, &k_values, &seeds)?;

    let mut csv =
        String::from("k,w,mean_regret,mean_oracle_regret,upper_bound,decay_envelope\n");
    for row in &sweep.rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.k,
            row.w,
            harness::format_float(row.mean_regret),
            harness::format_float(row.mean_oracle_regret),
            harness::format_float(row.upper_bound),
            harness::format_float(row.decay_envelope),
        ));
    }
    match &args.out {
        Some(path) => std::fs::write(path, &csv)?,
        None => print!("{csv}"),
    }
    println!(
        "fitted decay constant {:.6e}; log mean-regret slope per K {:.4}",
        sweep.fitted_constant, sweep.log_slope
    );
    Ok(if failed {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

fn robot(args: &RobotArgs) -> Result<ExitCode, Error> {
    let spec = match &args.config {
        Some(path) => ExperimentConfig::from_path(path)?.robot,
        None => None,
    };
    let horizon = args
        .horizon
        .or(spec.as_ref().map(|s| s.horizon))
        .unwrap_or(160);
    let w = args.w.or(spec.as_ref().map(|s| s.w)).unwrap_or(80);
    let algorithm_name = args
        .algorithm
        .clone()
        .or(spec.as_ref().map(|s| s.algorithm.clone()))
        .unwrap_or_else(|| "rhag".to_string());
    let algorithm = match algorithm_name.as_str() {
        "rhgd" => RobotAlgorithm::Rhgd,
        "rhag" => RobotAlgorithm::Rhag,
        "rhtm" => RobotAlgorithm::Rhtm,
        other => {
            return Err(Error::config(
                "robot.algorithm",
                format!("unknown robot algorithm `{other}`"),
            ))
        }
    };
    let dt = spec.as_ref().map(|s| s.dt).unwrap_or(0.025);
    let sim_dt = spec.as_ref().map(|s| s.sim_dt).unwrap_or(0.001);
    let instance = RobotInstance::new(horizon, dt, sim_dt);
    let run = robot_rhgc(&instance, w, algorithm, RobotInit::ReferenceSteady, None)?;
    println!(
        "robot {} W={} K={}: planned cost {:.4}, executed cost {:.4}",
        algorithm_name, run.w, run.k, run.planned_cost, run.executed_cost
    );

    let executed_csv = harness::experiment::robot_executed_csv(&run, &instance);
    let planned_csv = harness::experiment::robot_planned_csv(&run, &instance);
    match &args.out {
        Some(path) => {
            std::fs::write(path, executed_csv)?;
            let mut planned_path = path.clone();
            planned_path.set_extension("planned.csv");
            std::fs::write(planned_path, planned_csv)?;
        }
        None => print!("{executed_csv}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn verify() -> Result<ExitCode, Error> {
    let report = harness::verify_suite()?;
    print!("{}", report.render());
    if report.all_passed() {
        println!("verification suite: all checks passed");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("verification suite: FAILURES present");
        Ok(ExitCode::from(2))
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}
