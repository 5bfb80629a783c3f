use clap::{Args, Parser, Subcommand};
use dirac_lattice::holonomy::ChiProfile;
use dirac_lattice::par::ExecMode;
use dirac_lattice::scenario::{
    module_scenarios, run_many, to_csv, to_json, ScenarioParams, CONVERGE_OPS, SCENARIOS,
};
use std::process::ExitCode;

/// Numerical verification suite for lattice holonomy reduction and
/// group-valued moment spaces.
#[derive(Parser)]
#[command(name = "dirac-lattice", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Group: su2, so3, sl2r, abelian:<d>, or "all".
    #[arg(long, default_value = "all")]
    group: String,
    /// Comma-separated lattice sizes.
    #[arg(long, default_value = "4,8,16")]
    n: String,
    /// Boundary subspace selector: zero, diagonal, graph, full, or "all".
    #[arg(long, default_value = "all")]
    s: String,
    /// Interpolation profile: linear or smoothstep.
    #[arg(long, default_value = "linear")]
    chi: String,
    /// Master seed; per-scenario streams are derived by name hashing.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads for scenario fan-out (0 = automatic).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Report format.
    #[arg(long, default_value = "json")]
    format: String,
    /// Output directory (writes report.<format> there instead of stdout).
    #[arg(long)]
    out: Option<std::path::PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenarios covering one library module (or "all").
    Verify {
        module: String,
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Run a convergence-study scenario and report its order estimate.
    Converge {
        #[arg(long)]
        op: String,
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Run every scenario and emit the full report.
    Report {
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// List scenario names.
    List,
}

fn parse_params(opts: &CommonOpts) -> Result<ScenarioParams, String> {
    let sizes: Result<Vec<usize>, _> =
        opts.n.split(',').map(|t| t.trim().parse::<usize>()).collect();
    let sizes = sizes.map_err(|_| format!("invalid lattice size list '{}'", opts.n))?;
    if sizes.is_empty() || sizes.iter().any(|&n| n < 2) {
        return Err(format!("invalid lattice size list '{}'", opts.n));
    }
    let chi = match opts.chi.as_str() {
        "linear" => ChiProfile::Linear,
        "smoothstep" => ChiProfile::Smoothstep,
        other => return Err(format!("unknown chi profile '{other}'")),
    };
    Ok(ScenarioParams {
        group: opts.group.clone(),
        sizes,
        s: opts.s.clone(),
        chi,
        seed: opts.seed,
    })
}

fn exec_mode(workers: usize) -> ExecMode {
    #[cfg(feature = "parallel")]
    if workers > 1 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global();
    }
    match workers {
        0 => ExecMode::auto(),
        1 => ExecMode::Sequential,
        _ => ExecMode::Parallel,
    }
}

fn emit(records: &[dirac_lattice::scenario::CheckRecord], opts: &CommonOpts) -> Result<(), String> {
    let (body, ext) = match opts.format.as_str() {
        "json" => (to_json(records), "json"),
        "csv" => (to_csv(records), "csv"),
        other => return Err(format!("unknown format '{other}'")),
    };
    match &opts.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)
                .map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
            let path = dir.join(format!("report.{ext}"));
            std::fs::write(&path, body)
                .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
            eprintln!("wrote {}", path.display());
        }
        None => println!("{body}"),
    }
    Ok(())
}

fn run(names: &[&str], opts: &CommonOpts) -> Result<ExitCode, String> {
    let params = parse_params(opts)?;
    let records =
        run_many(names, &params, exec_mode(opts.workers)).map_err(|e| e.to_string())?;
    let all_pass = records.iter().all(|r| r.pass);
    emit(&records, opts)?;
    Ok(if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::List => {
            for name in SCENARIOS {
                println!("{name}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { module, opts } => match module_scenarios(module) {
            Some(names) => run(&names, opts),
            None => Err(format!("unknown module '{module}'")),
        },
        Command::Converge { op, opts } => {
            if CONVERGE_OPS.contains(&op.as_str()) {
                run(&[op.as_str()], opts)
            } else {
                Err(format!(
                    "unknown convergence op '{op}' (available: {})",
                    CONVERGE_OPS.join(", ")
                ))
            }
        }
        Command::Report { opts } => run(SCENARIOS, opts),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
