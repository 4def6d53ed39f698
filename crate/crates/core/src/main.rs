use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use neurotrack::harness::csv::{format_sig9, write_output};
use neurotrack::harness::{
    compare_controllers, compute_metrics, gain_sweep, log_to_csv, parse_config, run_scenario_full, sweep_to_csv,
    GainGrid, Metrics, ScenarioConfig,
};
use neurotrack::nn::grad_check_suite;
use neurotrack::tracking::lyapunov_sign_scan;
use neurotrack::{Error, Execution};

#[derive(Parser)]
#[command(name = "neurotrack", version, about = "Differential-drive tracking simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ExecArgs {
    /// Run batch work on one thread.
    #[arg(long)]
    sequential: bool,
}

impl ExecArgs {
    fn mode(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its per-step log as CSV.
    Run {
        config: PathBuf,
        /// Output CSV (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Save the final feedforward weights (full-dynamics runs only).
        #[arg(long)]
        save_weights: Option<PathBuf>,
    },
    /// Run a scenario over a grid of tracking gains and rank the results.
    Sweep {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        k1: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        k2: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        k3: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        exec: ExecArgs,
    },
    /// Run two scenarios on the same reference and print B relative to A.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[command(flatten)]
        exec: ExecArgs,
    },
    /// Check network gradients against finite differences on random networks.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 1e-6)]
        eps: f64,
        #[arg(long, default_value_t = 1e-6)]
        tolerance: f64,
    },
    /// Sample the scan box and report the sign of the Lyapunov rate.
    Scan {
        config: PathBuf,
        #[command(flatten)]
        exec: ExecArgs,
    },
}

fn load(path: &Path) -> Result<ScenarioConfig, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let cfg = parse_config(&text)?;
    cfg.validate()?;
    Ok(cfg)
}

fn opt(v: Option<f64>) -> String {
    v.map(format_sig9).unwrap_or_else(|| "none".into())
}

fn summary(label: &str, m: &Metrics) {
    eprintln!(
        "{label}settling_time={} settling_time_ex={} final_error_norm={} rms_v={} rms_w={} sup_e_c_after_transient={} lyapunov_increases={}",
        opt(m.settling_time),
        opt(m.settling_time_ex),
        format_sig9(m.final_error_norm),
        format_sig9(m.rms_velocity_error[0]),
        format_sig9(m.rms_velocity_error[1]),
        format_sig9(m.sup_velocity_error_after_transient),
        m.lyapunov_increases
    );
}

fn run(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Run {
            config,
            out,
            save_weights,
        } => {
            let cfg = load(&config)?;
            let output = run_scenario_full(&cfg)?;
            write_output(&log_to_csv(&output.log), out.as_deref())?;
            summary("", &compute_metrics(&output.log, &cfg.metrics)?);
            if let Some(path) = save_weights {
                match &output.net {
                    Some(net) => net.save(&path)?,
                    None => return Err(Error::Domain("kinematic runs have no network to save".into())),
                }
            }
            Ok(true)
        }
        Command::Sweep {
            config,
            k1,
            k2,
            k3,
            out,
            exec,
        } => {
            let cfg = load(&config)?;
            let rows = gain_sweep(&cfg, &GainGrid { k1, k2, k3 }, exec.mode())?;
            write_output(&sweep_to_csv(&rows), out.as_deref())?;
            Ok(true)
        }
        Command::Compare { a, b, exec } => {
            let (a, b) = (load(&a)?, load(&b)?);
            let c = compare_controllers(&a, &b, exec.mode())?;
            summary("a: ", &c.a);
            summary("b: ", &c.b);
            let r = &c.ratios;
            println!("metric,b_over_a");
            println!("rms_v,{}", format_sig9(r.rms_velocity_error[0]));
            println!("rms_w,{}", format_sig9(r.rms_velocity_error[1]));
            println!("rms_e_c,{}", format_sig9(r.rms_velocity_error_norm));
            println!(
                "sup_e_c_after_transient,{}",
                format_sig9(r.sup_velocity_error_after_transient)
            );
            println!("final_error_norm,{}", format_sig9(r.final_error_norm));
            println!("settling_time,{}", opt(r.settling_time));
            Ok(true)
        }
        Command::Gradcheck {
            seed,
            trials,
            eps,
            tolerance,
        } => {
            let s = grad_check_suite(seed, trials, eps)?;
            let ok = s.max_deviation <= tolerance;
            println!(
                "{} trials={} max_deviation={:e} worst_sizes={:?} tolerance={:e}",
                if ok { "ok" } else { "FAIL" },
                s.trials,
                s.max_deviation,
                s.worst_sizes,
                tolerance
            );
            Ok(ok)
        }
        Command::Scan { config, exec } => {
            let cfg = load(&config)?;
            let report = lyapunov_sign_scan(&cfg.sign_scan(), exec.mode())?;
            println!(
                "samples={} min_rate={} max_rate={} positive_fraction={}",
                report.samples,
                format_sig9(report.min_rate),
                format_sig9(report.max_rate),
                format_sig9(report.positive_fraction)
            );
            println!("index,e_x,e_y,e_theta,Vdot");
            for s in &report.worst {
                println!(
                    "{},{},{},{},{}",
                    s.index,
                    format_sig9(s.error.ex),
                    format_sig9(s.error.ey),
                    format_sig9(s.error.etheta),
                    format_sig9(s.rate)
                );
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 1 } else { 2 })
        }
    }
}
