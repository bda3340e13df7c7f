//! 2D lattice driver: von Neumann neighborhoods under both boundary modes,
//! per-node game groups, sequential capital updates, strategy sweeps for the
//! prisoner's dilemma and multi-run averaging for the Parrondo walks.

use crate::eisert::{payoff, PayoffMemo, PayoffTable, StrategyProfile};
use crate::error::{Error, Result};
use crate::gamelib::{CoinStateKind, StrategyName};
use crate::parrondo::{scheme_label_in_stream, BRule, GameLabel, Scheme, WalkCache, WalkEngine};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Open,
    Periodic,
}

impl std::str::FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "open" => Ok(Boundary::Open),
            "periodic" => Ok(Boundary::Periodic),
            other => Err(Error::ConfigInvalid {
                field: "boundary".into(),
                reason: format!("unknown boundary `{other}`; expected open or periodic"),
            }),
        }
    }
}

pub type Node = (usize, usize);

/// Orthogonal neighbors of `node` in fixed (up, down, left, right) order.
/// Open boundaries drop off-grid entries; periodic boundaries wrap.
pub fn neighbors(node: Node, rows: usize, cols: usize, boundary: Boundary) -> Result<Vec<Node>> {
    let (r, c) = node;
    if r >= rows || c >= cols {
        return Err(Error::NodeOutOfGrid {
            row: r,
            col: c,
            rows,
            cols,
        });
    }
    match boundary {
        Boundary::Periodic => Ok(vec![
            ((r + rows - 1) % rows, c),
            ((r + 1) % rows, c),
            (r, (c + cols - 1) % cols),
            (r, (c + 1) % cols),
        ]),
        Boundary::Open => {
            let mut out = Vec::with_capacity(4);
            if r > 0 {
                out.push((r - 1, c));
            }
            if r + 1 < rows {
                out.push((r + 1, c));
            }
            if c > 0 {
                out.push((r, c - 1));
            }
            if c + 1 < cols {
                out.push((r, c + 1));
            }
            Ok(out)
        }
    }
}

/// One per-node game: the center seat followed by its neighbors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GameGroup {
    pub center: Node,
    pub seats: Vec<Node>,
}

impl GameGroup {
    pub fn players(&self) -> usize {
        self.seats.len()
    }
}

/// All game groups of a lattice, one per node, in row-major center order.
#[derive(Debug, Clone)]
pub struct GamePlan {
    pub rows: usize,
    pub cols: usize,
    pub boundary: Boundary,
    groups: Vec<GameGroup>,
}

pub fn build_game_plan(rows: usize, cols: usize, boundary: Boundary) -> Result<GamePlan> {
    if rows < 3 || cols < 3 {
        return Err(Error::GridTooSmall { rows, cols });
    }
    let mut groups = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let mut seats = vec![(r, c)];
            seats.extend(neighbors((r, c), rows, cols, boundary)?);
            groups.push(GameGroup {
                center: (r, c),
                seats,
            });
        }
    }
    Ok(GamePlan {
        rows,
        cols,
        boundary,
        groups,
    })
}

impl GamePlan {
    pub fn groups(&self) -> &[GameGroup] {
        &self.groups
    }

    pub fn nodes(&self) -> usize {
        self.rows * self.cols
    }

    /// Number of games each node participates in.
    pub fn participation_counts(&self) -> Grid {
        let mut counts = vec![0.0; self.rows * self.cols];
        for group in &self.groups {
            for &(r, c) in &group.seats {
                counts[r * self.cols + c] += 1.0;
            }
        }
        Grid {
            rows: self.rows,
            cols: self.cols,
            data: counts,
        }
    }

    /// Group count per seat count, indexed by K.
    pub fn group_census(&self) -> std::collections::BTreeMap<usize, usize> {
        let mut census = std::collections::BTreeMap::new();
        for g in &self.groups {
            *census.entry(g.players()).or_insert(0usize) += 1;
        }
        census
    }
}

/// Per-node real capital on a rows x cols grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeState {
    pub rows: usize,
    pub cols: usize,
    pub boundary: Boundary,
    capital: Vec<f64>,
    iteration: usize,
}

impl LatticeState {
    pub fn new(rows: usize, cols: usize, boundary: Boundary) -> Self {
        LatticeState {
            rows,
            cols,
            boundary,
            capital: vec![0.0; rows * cols],
            iteration: 0,
        }
    }

    pub fn add(&mut self, node: Node, value: f64) {
        self.capital[node.0 * self.cols + node.1] += value;
    }

    pub fn capital(&self, node: Node) -> f64 {
        self.capital[node.0 * self.cols + node.1]
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    fn bump_iteration(&mut self) {
        self.iteration += 1;
    }

    pub fn grid(&self) -> Grid {
        Grid {
            rows: self.rows,
            cols: self.cols,
            data: self.capital.clone(),
        }
    }
}

/// Arithmetic mean of all node capitals.
pub fn network_average_capital(lattice: &LatticeState) -> f64 {
    lattice.capital.iter().sum::<f64>() / lattice.capital.len() as f64
}

/// Plain rows x cols value grid used for outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Grid {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Grid {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn map_indices(&self, f: impl Fn(usize, usize) -> f64) -> Grid {
        let mut data = Vec::with_capacity(self.rows * self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                data.push(f(r, c));
            }
        }
        Grid {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    /// The eight square-symmetry images of a square grid.
    pub fn d4_orbit(&self) -> Option<Vec<Grid>> {
        if self.rows != self.cols {
            return None;
        }
        let n = self.rows;
        let mut orbit = Vec::with_capacity(8);
        for reflect in [false, true] {
            for quarter_turns in 0..4 {
                orbit.push(self.map_indices(|r, c| {
                    let (mut rr, mut cc) = (r, c);
                    for _ in 0..quarter_turns {
                        let (nr, nc) = (cc, n - 1 - rr);
                        rr = nr;
                        cc = nc;
                    }
                    if reflect {
                        cc = n - 1 - cc;
                    }
                    self.at(rr, cc)
                }));
            }
        }
        Some(orbit)
    }
}

/// Fixed strategy profile per game size.
#[derive(Debug, Clone)]
pub struct ProfileTriple {
    pub k3: StrategyProfile,
    pub k4: StrategyProfile,
    pub k5: StrategyProfile,
}

impl ProfileTriple {
    pub fn uniform(name: StrategyName) -> Self {
        ProfileTriple {
            k3: StrategyProfile::uniform(name, 3).expect("3 in range"),
            k4: StrategyProfile::uniform(name, 4).expect("4 in range"),
            k5: StrategyProfile::uniform(name, 5).expect("5 in range"),
        }
    }

    pub fn get(&self, k: usize) -> Result<&StrategyProfile> {
        match k {
            3 => Ok(&self.k3),
            4 => Ok(&self.k4),
            5 => Ok(&self.k5),
            other => Err(Error::PlayerCount {
                got: other,
                min: 3,
                max: 5,
            }),
        }
    }
}

/// Payoff tables for the three lattice game sizes.
#[derive(Debug, Clone)]
pub struct PayoffTables {
    pub k3: PayoffTable,
    pub k4: PayoffTable,
    pub k5: PayoffTable,
}

impl PayoffTables {
    pub fn pairwise_default() -> Self {
        PayoffTables {
            k3: PayoffTable::pairwise_default(3).expect("3 in range"),
            k4: PayoffTable::pairwise_default(4).expect("4 in range"),
            k5: PayoffTable::pairwise_default(5).expect("5 in range"),
        }
    }

    pub fn get(&self, k: usize) -> Result<&PayoffTable> {
        match k {
            3 => Ok(&self.k3),
            4 => Ok(&self.k4),
            5 => Ok(&self.k5),
            other => Err(Error::PlayerCount {
                got: other,
                min: 3,
                max: 5,
            }),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        PayoffTables {
            k3: self.k3.scaled(factor),
            k4: self.k4.scaled(factor),
            k5: self.k5.scaled(factor),
        }
    }
}

/// Fixed-profile prisoner's-dilemma experiment.
#[derive(Debug, Clone)]
pub struct PdExperiment {
    pub updates: usize,
    pub profiles: ProfileTriple,
    pub tables: PayoffTables,
}

/// Strategy sets per game size for sweep averaging.
#[derive(Debug, Clone)]
pub struct PdSweep {
    pub updates: usize,
    pub set3: Vec<StrategyName>,
    pub set4: Vec<StrategyName>,
    pub set5: Vec<StrategyName>,
    pub tables: PayoffTables,
}

impl PdSweep {
    pub fn same_set(updates: usize, set: Vec<StrategyName>, tables: PayoffTables) -> Self {
        PdSweep {
            updates,
            set3: set.clone(),
            set4: set.clone(),
            set5: set,
            tables,
        }
    }
}

/// Result of a lattice run: mean-capital series (one entry per iteration) and
/// the final capital grid.
#[derive(Debug, Clone)]
pub struct LatticeOutcome {
    pub series: Vec<f64>,
    pub final_grid: Grid,
    /// Final grid of every independent run (Parrondo only; single entry
    /// otherwise).
    pub per_run_grids: Vec<Grid>,
}

/// Run the fixed-profile prisoner's dilemma: every iteration each group adds
/// its payoff vector seat-wise, centers visited in row-major order.
pub fn run_pd(exp: &PdExperiment, plan: &GamePlan) -> Result<LatticeOutcome> {
    let mut per_k: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
    for k in plan.group_census().keys() {
        let profile = exp.profiles.get(*k)?;
        per_k.insert(*k, payoff(profile, exp.tables.get(*k)?)?);
    }
    run_with_group_payoffs(plan, exp.updates, |group| &per_k[&group.players()])
}

/// Sweep-averaged prisoner's dilemma: the capital grid averaged over every
/// profile combination of the strategy sets. Capital is linear in the per-K
/// payoff vectors, so the per-K memo means are applied directly instead of
/// re-running the lattice per combination.
pub fn run_pd_average(exp: &PdSweep, plan: &GamePlan) -> Result<LatticeOutcome> {
    let mut per_k: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
    for k in plan.group_census().keys() {
        let set = match k {
            3 => &exp.set3,
            4 => &exp.set4,
            5 => &exp.set5,
            other => {
                return Err(Error::PlayerCount {
                    got: *other,
                    min: 3,
                    max: 5,
                })
            }
        };
        let memo = PayoffMemo::build(*k, set, exp.tables.get(*k)?)?;
        per_k.insert(*k, memo.mean_payoff());
    }
    run_with_group_payoffs(plan, exp.updates, |group| &per_k[&group.players()])
}

fn run_with_group_payoffs<'a>(
    plan: &GamePlan,
    updates: usize,
    payoff_of: impl Fn(&GameGroup) -> &'a [f64],
) -> Result<LatticeOutcome> {
    let mut lattice = LatticeState::new(plan.rows, plan.cols, plan.boundary);
    let mut series = Vec::with_capacity(updates);
    for _ in 0..updates {
        for group in plan.groups() {
            let pay = payoff_of(group);
            for (seat, &node) in group.seats.iter().enumerate() {
                lattice.add(node, pay[seat]);
            }
        }
        lattice.bump_iteration();
        series.push(network_average_capital(&lattice));
    }
    let final_grid = lattice.grid();
    Ok(LatticeOutcome {
        series,
        final_grid: final_grid.clone(),
        per_run_grids: vec![final_grid],
    })
}

/// How one game's payoff vector is credited to its participants.
///
/// The controlled B flips are applied in seat order, so the raw payoff vector
/// carries a bookkeeping artifact of that order. `SeatMean` credits every
/// participant with the seat average, which equals the average over cyclic
/// relabelings of the seats; it removes the artifact and is the default.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayoffAllocation {
    #[default]
    SeatMean,
    PerSeat,
}

impl std::str::FromStr for PayoffAllocation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "seat_mean" => Ok(PayoffAllocation::SeatMean),
            "per_seat" => Ok(PayoffAllocation::PerSeat),
            other => Err(Error::ConfigInvalid {
                field: "allocation".into(),
                reason: format!("unknown allocation `{other}`; expected seat_mean or per_seat"),
            }),
        }
    }
}

/// Cooperative Parrondo experiment on the lattice.
#[derive(Debug, Clone)]
pub struct ParrondoExperiment {
    pub scheme: Scheme,
    pub steps: usize,
    pub init: CoinStateKind,
    pub rule: BRule,
    pub iterations: usize,
    pub runs: usize,
    pub engine: WalkEngine,
    pub allocation: PayoffAllocation,
}

impl ParrondoExperiment {
    pub fn validate(&self) -> Result<()> {
        self.rule.validate()?;
        if self.runs == 0 {
            return Err(Error::ConfigInvalid {
                field: "runs".into(),
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }
}

/// Run the Parrondo lattice game. Every iteration each center plays one fresh
/// walk with its group; payoffs are credited per the allocation; capital is
/// applied center-by-center in row-major order. Runs differ only in their
/// random streams; the returned series and final grid average over runs.
pub fn run_parrondo(
    exp: &ParrondoExperiment,
    plan: &GamePlan,
    seed: u64,
) -> Result<LatticeOutcome> {
    exp.validate()?;
    let mut cache = WalkCache::new(exp.init, &exp.rule, exp.engine);

    // When random draws will hit most label sequences anyway, walk the whole
    // sequence tree once; shared prefixes make that far cheaper than
    // computing each sequence in isolation.
    if exp.scheme == Scheme::AbRandom && exp.steps <= 10 {
        let games = exp.runs * exp.iterations * plan.nodes();
        if games >= 1 << exp.steps.saturating_sub(1) {
            for &k in plan.group_census().keys() {
                cache.precompute_all(k, exp.steps)?;
            }
        }
    }

    let n_groups = plan.groups().len() as u64;
    let mut series_sum = vec![0.0; exp.iterations];
    let mut grid_sum = Grid::zeros(plan.rows, plan.cols);
    let mut per_run_grids = Vec::with_capacity(exp.runs);
    let mut labels = vec![GameLabel::A; exp.steps];

    for run in 0..exp.runs as u64 {
        let mut lattice = LatticeState::new(plan.rows, plan.cols, plan.boundary);
        for iter in 0..exp.iterations as u64 {
            for (gidx, group) in plan.groups().iter().enumerate() {
                let game_id = iter * n_groups + gidx as u64;
                let stream = (run << 40) | game_id;
                for (t, slot) in labels.iter_mut().enumerate() {
                    *slot = scheme_label_in_stream(exp.scheme, t as u64, seed, stream);
                }
                let pay = cache.payoffs(group.players(), &labels)?;
                match exp.allocation {
                    PayoffAllocation::SeatMean => {
                        let mean = pay.iter().sum::<f64>() / pay.len() as f64;
                        for &node in &group.seats {
                            lattice.add(node, mean);
                        }
                    }
                    PayoffAllocation::PerSeat => {
                        for (seat, &node) in group.seats.iter().enumerate() {
                            lattice.add(node, pay[seat]);
                        }
                    }
                }
            }
            lattice.bump_iteration();
            series_sum[iter as usize] += network_average_capital(&lattice);
        }
        let grid = lattice.grid();
        for (acc, v) in grid_sum.data.iter_mut().zip(&grid.data) {
            *acc += v;
        }
        per_run_grids.push(grid);
    }

    let runs = exp.runs as f64;
    let series = series_sum.into_iter().map(|v| v / runs).collect();
    grid_sum.data.iter_mut().for_each(|v| *v /= runs);
    Ok(LatticeOutcome {
        series,
        final_grid: grid_sum,
        per_run_grids,
    })
}

/// One bar of the standalone per-K comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarRow {
    pub players: usize,
    pub game: String,
    pub value: f64,
}

/// Average payoff (over seats, and over runs for A+B) of a standalone K-player
/// game under each of the four schemes A, B, [2,2], A+B.
pub fn standalone_game_average(
    k: usize,
    steps: usize,
    init: CoinStateKind,
    rule: &BRule,
    engine: WalkEngine,
    runs: usize,
    seed: u64,
) -> Result<Vec<BarRow>> {
    let mut out = Vec::with_capacity(4);
    for scheme in [Scheme::OnlyA, Scheme::OnlyB, Scheme::Seq22, Scheme::AbRandom] {
        let effective_runs = if scheme == Scheme::AbRandom { runs.max(1) } else { 1 };
        let mut total = 0.0;
        for run in 0..effective_runs as u64 {
            let mut cache = WalkCache::new(init, rule, engine);
            let labels: Vec<GameLabel> = (0..steps as u64)
                .map(|t| scheme_label_in_stream(scheme, t, seed, run))
                .collect();
            let pay = cache.payoffs(k, &labels)?;
            total += pay.iter().sum::<f64>() / pay.len() as f64;
        }
        out.push(BarRow {
            players: k,
            game: scheme.as_str().to_string(),
            value: total / effective_runs as f64,
        });
    }
    Ok(out)
}
