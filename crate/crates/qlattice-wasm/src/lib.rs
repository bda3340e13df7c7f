//! Browser bindings for the lattice game engine. Each function takes plain
//! scalars and strings and returns a JSON document, so the demo page needs no
//! generated type glue.

use qlattice_core::eisert::{final_state, outcome_distribution, payoff, PayoffTable,
                            StrategyProfile};
use qlattice_core::gamelib::{CoinStateKind, StrategyName};
use qlattice_core::lattice::{build_game_plan, run_parrondo, run_pd_average, Boundary,
                             ParrondoExperiment, PayoffAllocation, PayoffTables, PdSweep};
use qlattice_core::parrondo::{BRule, Scheme, WalkEngine};
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn err_js(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn parse_strategies(csv: &str) -> Result<Vec<StrategyName>, JsValue> {
    csv.split(',')
        .map(|s| s.trim().parse::<StrategyName>().map_err(err_js))
        .collect()
}

#[derive(Serialize)]
struct GridOut {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    series: Vec<f64>,
    average: f64,
}

/// Sweep-averaged prisoner's dilemma capital grid.
///
/// `strategies` is a comma-separated subset of C,D,H,Q,Sigma.
#[wasm_bindgen]
pub fn pd_average_grid(
    rows: usize,
    cols: usize,
    boundary: &str,
    strategies: &str,
    updates: usize,
) -> Result<String, JsValue> {
    let boundary: Boundary = boundary.parse().map_err(err_js)?;
    let set = parse_strategies(strategies)?;
    let plan = build_game_plan(rows, cols, boundary).map_err(err_js)?;
    let sweep = PdSweep::same_set(updates, set, PayoffTables::pairwise_default());
    let out = run_pd_average(&sweep, &plan).map_err(err_js)?;
    let doc = GridOut {
        rows: out.final_grid.rows,
        cols: out.final_grid.cols,
        average: out.final_grid.mean(),
        data: out.final_grid.data,
        series: out.series,
    };
    serde_json::to_string(&doc).map_err(err_js)
}

/// Parrondo lattice evolution: final averaged capital grid plus the
/// mean-capital time series.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn parrondo_capital(
    rows: usize,
    cols: usize,
    boundary: &str,
    scheme: &str,
    init: &str,
    steps: usize,
    iterations: usize,
    runs: usize,
    seed: u32,
) -> Result<String, JsValue> {
    let boundary: Boundary = boundary.parse().map_err(err_js)?;
    let scheme: Scheme = scheme.parse().map_err(err_js)?;
    let init: CoinStateKind = init.parse().map_err(err_js)?;
    let plan = build_game_plan(rows, cols, boundary).map_err(err_js)?;
    let exp = ParrondoExperiment {
        scheme,
        steps,
        init,
        rule: BRule::default(),
        iterations,
        runs,
        engine: WalkEngine::Sparse,
        allocation: PayoffAllocation::SeatMean,
    };
    let out = run_parrondo(&exp, &plan, seed as u64).map_err(err_js)?;
    let doc = GridOut {
        rows: out.final_grid.rows,
        cols: out.final_grid.cols,
        average: out.final_grid.mean(),
        data: out.final_grid.data,
        series: out.series,
    };
    serde_json::to_string(&doc).map_err(err_js)
}

#[derive(Serialize)]
struct OutcomeOut {
    labels: Vec<String>,
    probabilities: Vec<f64>,
    payoffs: Vec<f64>,
}

/// Outcome distribution and per-seat payoffs of one dilemma profile,
/// e.g. "C,D,Q" for a three-player game.
#[wasm_bindgen]
pub fn pd_outcomes(profile: &str) -> Result<String, JsValue> {
    let seats = parse_strategies(profile)?;
    let k = seats.len();
    let profile = StrategyProfile::new(seats).map_err(err_js)?;
    let table = PayoffTable::pairwise_default(k).map_err(err_js)?;
    let dist = outcome_distribution(&final_state(&profile));
    let pay = payoff(&profile, &table).map_err(err_js)?;
    let labels = (0..1usize << k)
        .map(|code| {
            (0..k)
                .map(|s| if code >> (k - 1 - s) & 1 == 1 { 'D' } else { 'C' })
                .collect::<String>()
        })
        .collect();
    serde_json::to_string(&OutcomeOut {
        labels,
        probabilities: dist,
        payoffs: pay,
    })
    .map_err(err_js)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pd_outcomes_json_is_well_formed() {
        let doc = pd_outcomes("C,D").unwrap();
        let v: serde_json::Value = serde_json::from_str(&doc).unwrap();
        assert_eq!(v["labels"].as_array().unwrap().len(), 4);
        let probs = v["probabilities"].as_array().unwrap();
        let total: f64 = probs.iter().map(|p| p.as_f64().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn parrondo_json_has_grid_and_series() {
        let doc = parrondo_capital(3, 3, "open", "[2,2]", "ghz", 2, 3, 1, 0).unwrap();
        let v: serde_json::Value = serde_json::from_str(&doc).unwrap();
        assert_eq!(v["data"].as_array().unwrap().len(), 9);
        assert_eq!(v["series"].as_array().unwrap().len(), 3);
    }
}
