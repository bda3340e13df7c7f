//! Declarative experiment configuration: TOML in, fully validated `RunConfig`
//! out. Validation is total — nothing runs until every field is checked —
//! and unknown keys are rejected.

use crate::eisert::{PayoffTable, StrategyProfile};
use crate::error::{Error, Result};
use crate::gamelib::{CoinStateKind, StrategyName};
use crate::lattice::{Boundary, PayoffAllocation, PayoffTables, PdExperiment, PdSweep,
                     ParrondoExperiment, ProfileTriple};
use crate::parrondo::{BRule, Scheme, WalkEngine};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Pd,
    PdSweep,
    Parrondo,
    ParrondoBars,
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pd" => Ok(ExperimentKind::Pd),
            "pd_sweep" => Ok(ExperimentKind::PdSweep),
            "parrondo" => Ok(ExperimentKind::Parrondo),
            "parrondo_bars" => Ok(ExperimentKind::ParrondoBars),
            other => Err(Error::ConfigInvalid {
                field: "kind".into(),
                reason: format!(
                    "unknown kind `{other}`; expected pd, pd_sweep, parrondo or parrondo_bars"
                ),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::ConfigInvalid {
                field: "output.formats".into(),
                reason: format!("unknown format `{other}`; expected csv or json"),
            }),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LatticeConfig {
    pub rows: usize,
    pub cols: usize,
    pub boundary: Boundary,
}

#[derive(Debug, Clone, Serialize)]
pub struct PdConfig {
    pub updates: usize,
    pub profile3: Vec<StrategyName>,
    pub profile4: Vec<StrategyName>,
    pub profile5: Vec<StrategyName>,
    pub strategy_set: Vec<StrategyName>,
    /// Custom payoff tables keyed by outcome bit-string, per game size.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub payoff_table: Option<PayoffTableConfig>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PayoffTableConfig {
    pub k3: BTreeMap<String, Vec<f64>>,
    pub k4: BTreeMap<String, Vec<f64>>,
    pub k5: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ParrondoConfig {
    pub scheme: Scheme,
    pub steps: usize,
    pub init: CoinStateKind,
    pub iterations: usize,
    pub runs: usize,
    pub engine: WalkEngine,
    pub allocation: PayoffAllocation,
    pub rho_default: f64,
    pub rho_all_lost: f64,
    pub theta: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub formats: Vec<OutputFormat>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepConfig {
    pub inits: Vec<CoinStateKind>,
    pub schemes: Vec<Scheme>,
    pub boundaries: Vec<Boundary>,
}

/// A fully validated experiment description.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub lattice: LatticeConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pd: Option<PdConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parrondo: Option<ParrondoConfig>,
    pub output: OutputConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

// ---- raw (pre-validation) layer ------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    kind: String,
    seed: Option<u64>,
    lattice: Option<RawLattice>,
    pd: Option<RawPd>,
    parrondo: Option<RawParrondo>,
    output: Option<RawOutput>,
    sweep: Option<RawSweep>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLattice {
    rows: Option<usize>,
    cols: Option<usize>,
    boundary: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPd {
    updates: Option<usize>,
    profile3: Option<Vec<String>>,
    profile4: Option<Vec<String>>,
    profile5: Option<Vec<String>>,
    strategy_set: Option<Vec<String>>,
    payoff_table: Option<RawTables>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTables {
    k3: Option<HashMap<String, Vec<f64>>>,
    k4: Option<HashMap<String, Vec<f64>>>,
    k5: Option<HashMap<String, Vec<f64>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParrondo {
    scheme: Option<String>,
    steps: Option<usize>,
    init: Option<String>,
    iterations: Option<usize>,
    runs: Option<usize>,
    engine: Option<String>,
    allocation: Option<String>,
    rho_default: Option<f64>,
    rho_all_lost: Option<f64>,
    theta: Option<f64>,
    phi: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<String>,
    formats: Option<Vec<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    inits: Option<Vec<String>>,
    schemes: Option<Vec<String>>,
    boundaries: Option<Vec<String>>,
}

fn parse_each<T: FromStr<Err = Error>>(values: &[String], field: &str) -> Result<Vec<T>> {
    values
        .iter()
        .map(|v| {
            v.parse::<T>().map_err(|e| match e {
                Error::ConfigInvalid { reason, .. } => Error::ConfigInvalid {
                    field: field.to_string(),
                    reason,
                },
                other => other,
            })
        })
        .collect()
}

fn parse_profile(values: &[String], field: &str, k: usize) -> Result<Vec<StrategyName>> {
    let parsed: Vec<StrategyName> = parse_each(values, field)?;
    if parsed.len() != k {
        return Err(Error::ConfigInvalid {
            field: field.to_string(),
            reason: format!("expected {k} seats, got {}", parsed.len()),
        });
    }
    Ok(parsed)
}

/// Parse and validate a config document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let raw: RawConfig =
        toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
    validate(raw)
}

/// Load and validate a config file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

fn validate(raw: RawConfig) -> Result<RunConfig> {
    let kind: ExperimentKind = raw.kind.parse()?;
    let seed = raw.seed.unwrap_or(0);

    let lattice = {
        let l = raw.lattice.unwrap_or(RawLattice {
            rows: None,
            cols: None,
            boundary: None,
        });
        let rows = l.rows.unwrap_or(5);
        let cols = l.cols.unwrap_or(5);
        if rows < 3 || cols < 3 {
            return Err(Error::ConfigInvalid {
                field: "lattice".into(),
                reason: format!("grid {rows}x{cols} too small; both sides must be >= 3"),
            });
        }
        let boundary = match l.boundary {
            Some(b) => b.parse::<Boundary>()?,
            None => Boundary::Open,
        };
        LatticeConfig {
            rows,
            cols,
            boundary,
        }
    };

    let pd = match (kind, raw.pd) {
        (ExperimentKind::Pd | ExperimentKind::PdSweep, p) => {
            let p = p.unwrap_or(RawPd {
                updates: None,
                profile3: None,
                profile4: None,
                profile5: None,
                strategy_set: None,
                payoff_table: None,
            });
            let updates = p.updates.unwrap_or(100);
            let profile3 = match &p.profile3 {
                Some(v) => parse_profile(v, "pd.profile3", 3)?,
                None => vec![StrategyName::C; 3],
            };
            let profile4 = match &p.profile4 {
                Some(v) => parse_profile(v, "pd.profile4", 4)?,
                None => vec![StrategyName::C; 4],
            };
            let profile5 = match &p.profile5 {
                Some(v) => parse_profile(v, "pd.profile5", 5)?,
                None => vec![StrategyName::C; 5],
            };
            let strategy_set = match &p.strategy_set {
                Some(v) if v.is_empty() => {
                    return Err(Error::ConfigInvalid {
                        field: "pd.strategy_set".into(),
                        reason: "must not be empty".into(),
                    })
                }
                Some(v) => parse_each(v, "pd.strategy_set")?,
                None => vec![StrategyName::C, StrategyName::D],
            };
            let payoff_table = match p.payoff_table {
                Some(t) => {
                    let need = |m: Option<HashMap<String, Vec<f64>>>, name: &str, k: usize| {
                        let m = m.ok_or_else(|| Error::ConfigInvalid {
                            field: format!("pd.payoff_table.{name}"),
                            reason: "missing table".into(),
                        })?;
                        // shape-check now so that failures name the field
                        PayoffTable::from_map(k, &m).map_err(|e| Error::ConfigInvalid {
                            field: format!("pd.payoff_table.{name}"),
                            reason: e.to_string(),
                        })?;
                        Ok::<_, Error>(m.into_iter().collect::<BTreeMap<_, _>>())
                    };
                    Some(PayoffTableConfig {
                        k3: need(t.k3, "k3", 3)?,
                        k4: need(t.k4, "k4", 4)?,
                        k5: need(t.k5, "k5", 5)?,
                    })
                }
                None => None,
            };
            Some(PdConfig {
                updates,
                profile3,
                profile4,
                profile5,
                strategy_set,
                payoff_table,
            })
        }
        (_, Some(_)) => {
            return Err(Error::ConfigInvalid {
                field: "pd".into(),
                reason: format!("not applicable to kind `{}`", raw.kind),
            })
        }
        (_, None) => None,
    };

    let parrondo = match (kind, raw.parrondo) {
        (ExperimentKind::Parrondo | ExperimentKind::ParrondoBars, p) => {
            let p = p.unwrap_or(RawParrondo {
                scheme: None,
                steps: None,
                init: None,
                iterations: None,
                runs: None,
                engine: None,
                allocation: None,
                rho_default: None,
                rho_all_lost: None,
                theta: None,
                phi: None,
            });
            let defaults = BRule::default();
            let rho_default = p.rho_default.unwrap_or(defaults.rho_default);
            let rho_all_lost = p.rho_all_lost.unwrap_or(defaults.rho_all_lost);
            for (name, v) in [("parrondo.rho_default", rho_default),
                              ("parrondo.rho_all_lost", rho_all_lost)] {
                if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                    return Err(Error::ConfigInvalid {
                        field: name.into(),
                        reason: format!("probability must lie in [0, 1], got {v}"),
                    });
                }
            }
            let runs = p.runs.unwrap_or(1);
            if runs == 0 {
                return Err(Error::ConfigInvalid {
                    field: "parrondo.runs".into(),
                    reason: "must be at least 1".into(),
                });
            }
            Some(ParrondoConfig {
                scheme: match p.scheme {
                    Some(s) => s.parse()?,
                    None => Scheme::Seq22,
                },
                steps: p.steps.unwrap_or(4),
                init: match p.init {
                    Some(s) => s.parse()?,
                    None => CoinStateKind::Separable,
                },
                iterations: p.iterations.unwrap_or(1000),
                runs,
                engine: match p.engine {
                    Some(s) => s.parse()?,
                    None => WalkEngine::Sparse,
                },
                allocation: match p.allocation {
                    Some(s) => s.parse()?,
                    None => PayoffAllocation::default(),
                },
                rho_default,
                rho_all_lost,
                theta: p.theta.unwrap_or(defaults.theta),
                phi: p.phi.unwrap_or(defaults.phi),
            })
        }
        (_, Some(_)) => {
            return Err(Error::ConfigInvalid {
                field: "parrondo".into(),
                reason: format!("not applicable to kind `{}`", raw.kind),
            })
        }
        (_, None) => None,
    };

    let output = {
        let o = raw.output.unwrap_or(RawOutput {
            dir: None,
            formats: None,
        });
        let formats = match o.formats {
            Some(f) if f.is_empty() => {
                return Err(Error::ConfigInvalid {
                    field: "output.formats".into(),
                    reason: "must name at least one of csv, json".into(),
                })
            }
            Some(f) => parse_each(&f, "output.formats")?,
            None => vec![OutputFormat::Csv, OutputFormat::Json],
        };
        OutputConfig {
            dir: PathBuf::from(o.dir.unwrap_or_else(|| "out".to_string())),
            formats,
        }
    };

    let sweep = match raw.sweep {
        Some(s) => {
            if kind != ExperimentKind::Parrondo {
                return Err(Error::ConfigInvalid {
                    field: "sweep".into(),
                    reason: "sweep blocks apply only to kind = \"parrondo\"".into(),
                });
            }
            let inits = match s.inits {
                Some(v) => parse_each(&v, "sweep.inits")?,
                None => vec![CoinStateKind::Separable, CoinStateKind::Ghz, CoinStateKind::W],
            };
            let schemes = match s.schemes {
                Some(v) => parse_each(&v, "sweep.schemes")?,
                None => vec![Scheme::Seq22, Scheme::AbRandom],
            };
            let boundaries = match s.boundaries {
                Some(v) => parse_each(&v, "sweep.boundaries")?,
                None => vec![Boundary::Open, Boundary::Periodic],
            };
            Some(SweepConfig {
                inits,
                schemes,
                boundaries,
            })
        }
        None => None,
    };

    Ok(RunConfig {
        kind,
        seed,
        lattice,
        pd,
        parrondo,
        output,
        sweep,
    })
}

impl RunConfig {
    pub fn pd_experiment(&self) -> Result<PdExperiment> {
        let pd = self.pd.as_ref().ok_or_else(|| Error::ConfigInvalid {
            field: "pd".into(),
            reason: "missing pd section".into(),
        })?;
        Ok(PdExperiment {
            updates: pd.updates,
            profiles: ProfileTriple {
                k3: StrategyProfile::new(pd.profile3.clone())?,
                k4: StrategyProfile::new(pd.profile4.clone())?,
                k5: StrategyProfile::new(pd.profile5.clone())?,
            },
            tables: self.payoff_tables()?,
        })
    }

    pub fn pd_sweep(&self) -> Result<PdSweep> {
        let pd = self.pd.as_ref().ok_or_else(|| Error::ConfigInvalid {
            field: "pd".into(),
            reason: "missing pd section".into(),
        })?;
        Ok(PdSweep::same_set(
            pd.updates,
            pd.strategy_set.clone(),
            self.payoff_tables()?,
        ))
    }

    pub fn payoff_tables(&self) -> Result<PayoffTables> {
        match self.pd.as_ref().and_then(|p| p.payoff_table.as_ref()) {
            None => Ok(PayoffTables::pairwise_default()),
            Some(cfg) => {
                let build = |m: &BTreeMap<String, Vec<f64>>, k: usize| {
                    let map: HashMap<String, Vec<f64>> =
                        m.iter().map(|(a, b)| (a.clone(), b.clone())).collect();
                    PayoffTable::from_map(k, &map)
                };
                Ok(PayoffTables {
                    k3: build(&cfg.k3, 3)?,
                    k4: build(&cfg.k4, 4)?,
                    k5: build(&cfg.k5, 5)?,
                })
            }
        }
    }

    pub fn parrondo_experiment(&self) -> Result<ParrondoExperiment> {
        let p = self.parrondo.as_ref().ok_or_else(|| Error::ConfigInvalid {
            field: "parrondo".into(),
            reason: "missing parrondo section".into(),
        })?;
        Ok(ParrondoExperiment {
            scheme: p.scheme,
            steps: p.steps,
            init: p.init,
            rule: BRule {
                rho_default: p.rho_default,
                rho_all_lost: p.rho_all_lost,
                theta: p.theta,
                phi: p.phi,
            },
            iterations: p.iterations,
            runs: p.runs,
            engine: p.engine,
            allocation: p.allocation,
        })
    }
}
