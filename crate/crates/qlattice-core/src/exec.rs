//! Experiment orchestration: dispatch a validated config to the lattice
//! runners and package the results with provenance.

use crate::config::{ExperimentKind, RunConfig};
use crate::error::{Error, Result};
use crate::gamelib::CoinStateKind;
use crate::lattice::{build_game_plan, run_parrondo, run_pd, run_pd_average, standalone_game_average,
                     BarRow, Boundary, Grid};
use crate::parrondo::Scheme;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct SeriesPoint {
    pub iteration: u64,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub config: RunConfig,
    pub seed: u64,
    pub engine: String,
    pub version: String,
}

/// Everything one experiment produces.
#[derive(Debug, Clone, Serialize)]
pub struct ResultBundle {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<Grid>,
    pub series: Vec<SeriesPoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bars: Option<Vec<BarRow>>,
    pub provenance: Provenance,
}

fn provenance(config: &RunConfig) -> Provenance {
    let engine = match (&config.kind, &config.parrondo) {
        (ExperimentKind::Parrondo | ExperimentKind::ParrondoBars, Some(p)) => {
            format!("{:?}", p.engine).to_lowercase()
        }
        _ => "exact".to_string(),
    };
    Provenance {
        config: config.clone(),
        seed: config.seed,
        engine,
        version: env!("CARGO_PKG_VERSION").to_string(),
    }
}

fn series_points(series: &[f64]) -> Vec<SeriesPoint> {
    series
        .iter()
        .enumerate()
        .map(|(i, &v)| SeriesPoint {
            iteration: i as u64 + 1,
            value: v,
        })
        .collect()
}

/// Run the experiment described by `config`. Deterministic given
/// (config, seed).
pub fn execute(config: &RunConfig) -> Result<ResultBundle> {
    let plan = build_game_plan(
        config.lattice.rows,
        config.lattice.cols,
        config.lattice.boundary,
    )?;
    let prov = provenance(config);
    match config.kind {
        ExperimentKind::Pd => {
            let exp = config.pd_experiment()?;
            let out = run_pd(&exp, &plan)?;
            Ok(ResultBundle {
                grid: Some(out.final_grid),
                series: series_points(&out.series),
                bars: None,
                provenance: prov,
            })
        }
        ExperimentKind::PdSweep => {
            let exp = config.pd_sweep()?;
            let out = run_pd_average(&exp, &plan)?;
            Ok(ResultBundle {
                grid: Some(out.final_grid),
                series: series_points(&out.series),
                bars: None,
                provenance: prov,
            })
        }
        ExperimentKind::Parrondo => {
            let exp = config.parrondo_experiment()?;
            let out = run_parrondo(&exp, &plan, config.seed)?;
            Ok(ResultBundle {
                grid: Some(out.final_grid),
                series: series_points(&out.series),
                bars: None,
                provenance: prov,
            })
        }
        ExperimentKind::ParrondoBars => {
            let exp = config.parrondo_experiment()?;
            let mut bars = Vec::new();
            for k in 3..=5usize {
                bars.extend(standalone_game_average(
                    k,
                    exp.steps,
                    exp.init,
                    &exp.rule,
                    exp.engine,
                    exp.runs,
                    config.seed,
                )?);
            }
            Ok(ResultBundle {
                grid: None,
                series: Vec::new(),
                bars: Some(bars),
                provenance: prov,
            })
        }
    }
}

/// One cell of a parrondo sweep: the config specialized to a single
/// (init, scheme, boundary) combination plus a directory-safe label.
pub fn sweep_cases(config: &RunConfig) -> Result<Vec<(String, RunConfig)>> {
    if config.kind != ExperimentKind::Parrondo {
        return Err(Error::ConfigInvalid {
            field: "kind".into(),
            reason: "sweep requires kind = \"parrondo\"".into(),
        });
    }
    let sweep = config.sweep.clone().unwrap_or_else(|| crate::config::SweepConfig {
        inits: vec![CoinStateKind::Separable, CoinStateKind::Ghz, CoinStateKind::W],
        schemes: vec![Scheme::Seq22, Scheme::AbRandom],
        boundaries: vec![Boundary::Open, Boundary::Periodic],
    });
    let mut cases = Vec::new();
    for &init in &sweep.inits {
        for &scheme in &sweep.schemes {
            for &boundary in &sweep.boundaries {
                let mut case = config.clone();
                case.sweep = None;
                case.lattice.boundary = boundary;
                let p = case.parrondo.as_mut().expect("validated parrondo section");
                p.init = init;
                p.scheme = scheme;
                let label = format!(
                    "{}_{}_{}",
                    init.as_str(),
                    scheme_dir_label(scheme),
                    match boundary {
                        Boundary::Open => "open",
                        Boundary::Periodic => "periodic",
                    }
                );
                let mut dir = case.output.dir.clone();
                dir.push(&label);
                case.output.dir = dir;
                cases.push((label, case));
            }
        }
    }
    Ok(cases)
}

fn scheme_dir_label(scheme: Scheme) -> &'static str {
    match scheme {
        Scheme::OnlyA => "a",
        Scheme::OnlyB => "b",
        Scheme::Seq22 => "seq22",
        Scheme::AbRandom => "a_plus_b",
    }
}
