//! CLI driver: run one experiment, sweep the Parrondo panel grid, validate a
//! config, or self-test the engines.
//!
//! Exit codes: 0 success, 1 config error, 2 runtime error.

use clap::{Args, Parser, Subcommand};
use qlattice_core::config::{load_config, OutputFormat, RunConfig};
use qlattice_core::emit::emit;
use qlattice_core::exec::{execute, sweep_cases};
use qlattice_core::Error;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

#[derive(Parser)]
#[command(name = "qlattice", version, about = "Quantum games on 2D lattices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Overrides {
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the walk engine (dense|sparse).
    #[arg(long)]
    engine: Option<String>,
    /// Override the output formats, comma separated (csv,json).
    #[arg(long)]
    format: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run every (init, scheme, boundary) case of a parrondo config.
    Sweep {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Parse and validate a config file without running anything.
    Validate { config: PathBuf },
    /// Run the built-in engine cross-checks.
    Selftest,
}

fn apply_overrides(config: &mut RunConfig, ov: &Overrides) -> Result<(), Error> {
    if let Some(seed) = ov.seed {
        config.seed = seed;
    }
    if let Some(out) = &ov.out {
        config.output.dir = out.clone();
    }
    if let Some(engine) = &ov.engine {
        let engine = engine.parse()?;
        if let Some(p) = config.parrondo.as_mut() {
            p.engine = engine;
        }
    }
    if let Some(formats) = &ov.format {
        config.output.formats = formats
            .split(',')
            .map(|f| OutputFormat::from_str(f.trim()))
            .collect::<Result<Vec<_>, _>>()?;
    }
    Ok(())
}

fn worker_count() -> usize {
    std::env::var("QLATTICE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(1)
}

fn cmd_run(path: &Path, ov: &Overrides) -> Result<(), Error> {
    let mut config = load_config(path)?;
    apply_overrides(&mut config, ov)?;
    let bundle = execute(&config)?;
    let files = emit(&bundle, &config.output.dir, &config.output.formats)?;
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn cmd_sweep(path: &Path, ov: &Overrides) -> Result<(), Error> {
    let mut config = load_config(path)?;
    apply_overrides(&mut config, ov)?;
    let cases = sweep_cases(&config)?;
    let workers = worker_count().min(cases.len().max(1));
    if workers <= 1 {
        for (label, case) in &cases {
            let bundle = execute(case)?;
            emit(&bundle, &case.output.dir, &case.output.formats)?;
            println!("swept {label} -> {}", case.output.dir.display());
        }
        return Ok(());
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let failures: std::sync::Mutex<Vec<Error>> = std::sync::Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= cases.len() {
                    break;
                }
                let (label, case) = &cases[i];
                match execute(case).and_then(|b| emit(&b, &case.output.dir, &case.output.formats))
                {
                    Ok(_) => println!("swept {label} -> {}", case.output.dir.display()),
                    Err(e) => failures.lock().unwrap().push(e),
                }
            });
        }
    });
    match failures.into_inner().unwrap().into_iter().next() {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn cmd_validate(path: &Path) -> Result<(), Error> {
    let config = load_config(path)?;
    println!(
        "valid: kind={:?} lattice={}x{} boundary={:?} seed={}",
        config.kind, config.lattice.rows, config.lattice.cols, config.lattice.boundary, config.seed
    );
    Ok(())
}

fn cmd_selftest() -> Result<(), Error> {
    use qlattice_core::eisert::{outcome_distribution, final_state, payoff, PayoffTable,
                                StrategyProfile};
    use qlattice_core::gamelib::{coin_a, coin_shift, entangler, CoinStateKind, StrategyName};
    use qlattice_core::linalg::is_unitary;
    use qlattice_core::parrondo::{walk_payoffs, BRule, GameLabel, WalkEngine};

    // operator unitarity
    for n in 2..=5 {
        let j = entangler(n)?;
        if !is_unitary(&j, 1e-12) {
            return Err(Error::SelftestFailed(format!(
                "entangler({n}) failed unitarity"
            )));
        }
    }
    if !is_unitary(&coin_a(), 1e-12) || !is_unitary(&coin_shift(7), 1e-12) {
        return Err(Error::SelftestFailed(
            "coin operators failed unitarity".into(),
        ));
    }
    println!("ok operator unitarity");

    // classical consistency of the quantized dilemma
    for k in 2..=5usize {
        let table = PayoffTable::pairwise_default(k)?;
        for code in 0..(1usize << k) {
            let seats: Vec<StrategyName> = (0..k)
                .map(|s| {
                    if code >> (k - 1 - s) & 1 == 1 {
                        StrategyName::D
                    } else {
                        StrategyName::C
                    }
                })
                .collect();
            let profile = StrategyProfile::new(seats)?;
            let dist = outcome_distribution(&final_state(&profile));
            if (dist[code] - 1.0).abs() > 1e-10 {
                return Err(Error::SelftestFailed(format!(
                    "classical profile {code:b} not a point mass at k={k}"
                )));
            }
            let pay = payoff(&profile, &table)?;
            for (seat, v) in pay.iter().enumerate() {
                if (v - table.row(code)[seat]).abs() > 1e-12 {
                    return Err(Error::SelftestFailed(format!(
                        "classical payoff mismatch at k={k} outcome {code:b}"
                    )));
                }
            }
        }
    }
    println!("ok classical consistency");

    // dense vs sparse walk engines
    let rule = BRule::default();
    use GameLabel::{A, B};
    let sequences: [&[GameLabel]; 3] = [&[A, B, A, B], &[B, B, A, A], &[A, A, B, B]];
    for k in 2..=3usize {
        for init in [CoinStateKind::Separable, CoinStateKind::Ghz, CoinStateKind::W] {
            for labels in sequences {
                let dense = walk_payoffs(k, labels, init, &rule, WalkEngine::Dense)?;
                let sparse = walk_payoffs(k, labels, init, &rule, WalkEngine::Sparse)?;
                for (a, b) in dense.iter().zip(&sparse) {
                    if (a - b).abs() > 1e-10 {
                        return Err(Error::SelftestFailed(format!(
                            "engine mismatch k={k} init={init:?}"
                        )));
                    }
                }
            }
        }
    }
    println!("ok engine equivalence");
    println!("selftest passed");
    Ok(())
}

fn exit_code_for(err: &Error) -> ExitCode {
    match err {
        Error::ConfigParse(_) | Error::ConfigInvalid { .. } => ExitCode::from(1),
        _ => ExitCode::from(2),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config, overrides } => cmd_run(config, overrides),
        Command::Sweep { config, overrides } => cmd_sweep(config, overrides),
        Command::Validate { config } => cmd_validate(config),
        Command::Selftest => cmd_selftest(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}
