//! The entanglement-assisted K-player prisoner's dilemma: final-state
//! construction, outcome statistics, per-seat payoffs and payoff memoization
//! over whole strategy sets.

use crate::error::{Error, Result};
use crate::gamelib::{entangler, strategy_gate, StrategyName};
use crate::linalg::{apply_local, StateVector};
use std::collections::HashMap;

pub const MIN_PLAYERS: usize = 2;
pub const MAX_PLAYERS: usize = 5;

/// Ordered assignment of one strategy per seat.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StrategyProfile(Vec<StrategyName>);

impl StrategyProfile {
    pub fn new(seats: Vec<StrategyName>) -> Result<Self> {
        if seats.len() < MIN_PLAYERS || seats.len() > MAX_PLAYERS {
            return Err(Error::PlayerCount {
                got: seats.len(),
                min: MIN_PLAYERS,
                max: MAX_PLAYERS,
            });
        }
        Ok(StrategyProfile(seats))
    }

    pub fn uniform(name: StrategyName, k: usize) -> Result<Self> {
        StrategyProfile::new(vec![name; k])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn seats(&self) -> &[StrategyName] {
        &self.0
    }
}

impl std::fmt::Display for StrategyProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let names: Vec<&str> = self.0.iter().map(|s| s.as_str()).collect();
        write!(f, "({})", names.join(","))
    }
}

/// Classical payoff assignment: one length-K payoff vector per outcome
/// bit-string, bit 0 read as C and bit 1 as D.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffTable {
    k: usize,
    payoffs: Vec<Vec<f64>>, // indexed by outcome, most-significant seat first
}

impl PayoffTable {
    pub fn new(k: usize, payoffs: Vec<Vec<f64>>) -> Result<Self> {
        if !(MIN_PLAYERS..=MAX_PLAYERS).contains(&k) {
            return Err(Error::PlayerCount {
                got: k,
                min: MIN_PLAYERS,
                max: MAX_PLAYERS,
            });
        }
        if payoffs.len() != 1 << k {
            return Err(Error::PayoffTable(format!(
                "expected {} outcomes for {k} players, got {}",
                1 << k,
                payoffs.len()
            )));
        }
        for (i, row) in payoffs.iter().enumerate() {
            if row.len() != k {
                return Err(Error::PayoffTable(format!(
                    "outcome {i:0k$b} has {} seat payoffs, expected {k}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::PayoffTable(format!(
                    "outcome {i:0k$b} contains a non-finite payoff"
                )));
            }
        }
        Ok(PayoffTable { k, payoffs })
    }

    /// Build a table from `bit-string -> payoff vector` entries, e.g. parsed
    /// from a config document. Every outcome must appear exactly once.
    pub fn from_map(k: usize, map: &HashMap<String, Vec<f64>>) -> Result<Self> {
        let mut payoffs = vec![None; 1 << k];
        for (key, row) in map {
            if key.len() != k || key.chars().any(|c| c != '0' && c != '1') {
                return Err(Error::PayoffTable(format!(
                    "outcome key `{key}` is not a {k}-bit string"
                )));
            }
            let idx = usize::from_str_radix(key, 2).expect("validated bits");
            if payoffs[idx].replace(row.clone()).is_some() {
                return Err(Error::PayoffTable(format!("outcome `{key}` listed twice")));
            }
        }
        let rows: Vec<Vec<f64>> = payoffs
            .into_iter()
            .enumerate()
            .map(|(i, row)| {
                row.ok_or_else(|| Error::PayoffTable(format!("missing outcome {i:0k$b}")))
            })
            .collect::<Result<_>>()?;
        PayoffTable::new(k, rows)
    }

    /// Built-in default: seat j earns the sum of pairwise prisoner's-dilemma
    /// payoffs against every other seat, with pair values (C,C)=3, (C,D)=0,
    /// (D,C)=5, (D,D)=1.
    pub fn pairwise_default(k: usize) -> Result<Self> {
        fn pair(me: bool, other: bool) -> f64 {
            match (me, other) {
                (false, false) => 3.0,
                (false, true) => 0.0,
                (true, false) => 5.0,
                (true, true) => 1.0,
            }
        }
        if !(MIN_PLAYERS..=MAX_PLAYERS).contains(&k) {
            return Err(Error::PlayerCount {
                got: k,
                min: MIN_PLAYERS,
                max: MAX_PLAYERS,
            });
        }
        let mut payoffs = Vec::with_capacity(1 << k);
        for outcome in 0..(1usize << k) {
            let bit = |seat: usize| outcome >> (k - 1 - seat) & 1 == 1;
            let row = (0..k)
                .map(|j| (0..k).filter(|&m| m != j).map(|m| pair(bit(j), bit(m))).sum())
                .collect();
            payoffs.push(row);
        }
        PayoffTable::new(k, payoffs)
    }

    /// Scale every entry, preserving shape. Useful for linearity checks.
    pub fn scaled(&self, factor: f64) -> Self {
        PayoffTable {
            k: self.k,
            payoffs: self
                .payoffs
                .iter()
                .map(|row| row.iter().map(|v| v * factor).collect())
                .collect(),
        }
    }

    pub fn players(&self) -> usize {
        self.k
    }

    pub fn row(&self, outcome: usize) -> &[f64] {
        &self.payoffs[outcome]
    }
}

/// ψ_f = J† (⊗ U_i) J |0…0⟩ for the given profile.
pub fn final_state(profile: &StrategyProfile) -> StateVector {
    let k = profile.len();
    let all: Vec<usize> = (0..k).collect();
    let j = entangler(k).expect("profile length validated >= 2");
    let zero = StateVector::basis(vec![2; k], &vec![0; k]).expect("static basis");
    let mut state = apply_local(&j, &all, &zero).expect("entangler matches state dims");
    for (seat, &name) in profile.seats().iter().enumerate() {
        state = apply_local(&strategy_gate(name), &[seat], &state).expect("2x2 on qubit");
    }
    apply_local(&j.dagger(), &all, &state).expect("entangler matches state dims")
}

/// Born-rule outcome distribution |⟨ψ_f|i₁…i_K⟩|² over the 2^K bit-strings.
pub fn outcome_distribution(psi_f: &StateVector) -> Vec<f64> {
    psi_f.amps().iter().map(|a| a.norm_sqr()).collect()
}

/// Per-seat expected payoff: Σ over outcomes of table[outcome] weighted by
/// the outcome probability.
pub fn payoff(profile: &StrategyProfile, table: &PayoffTable) -> Result<Vec<f64>> {
    let k = profile.len();
    if table.players() != k {
        return Err(Error::DimensionMismatch(format!(
            "payoff table is for {} players, profile has {k}",
            table.players()
        )));
    }
    let dist = outcome_distribution(&final_state(profile));
    let mut out = vec![0.0; k];
    for (outcome, &p) in dist.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for (seat, acc) in out.iter_mut().enumerate() {
            *acc += p * table.row(outcome)[seat];
        }
    }
    Ok(out)
}

/// Payoff vectors for every profile in `strategy_set^K`, enumerated
/// lexicographically in declared set order.
#[derive(Debug, Clone)]
pub struct PayoffMemo {
    k: usize,
    profiles: Vec<StrategyProfile>,
    payoffs: Vec<Vec<f64>>,
    index: HashMap<Vec<StrategyName>, usize>,
}

impl PayoffMemo {
    pub fn build(k: usize, strategy_set: &[StrategyName], table: &PayoffTable) -> Result<Self> {
        if strategy_set.is_empty() {
            return Err(Error::ConfigInvalid {
                field: "strategy_set".into(),
                reason: "must not be empty".into(),
            });
        }
        if table.players() != k {
            return Err(Error::DimensionMismatch(format!(
                "payoff table is for {} players, memo is for {k}",
                table.players()
            )));
        }
        let m = strategy_set.len();
        let count = m.pow(k as u32);
        let mut profiles = Vec::with_capacity(count);
        let mut payoffs = Vec::with_capacity(count);
        let mut index = HashMap::with_capacity(count);
        for code in 0..count {
            // mixed-radix decode, most-significant seat first
            let mut seats = Vec::with_capacity(k);
            let mut divisor = count / m;
            let mut r = code;
            for _ in 0..k {
                seats.push(strategy_set[r / divisor]);
                r %= divisor;
                divisor = (divisor / m).max(1);
            }
            let profile = StrategyProfile::new(seats.clone())?;
            payoffs.push(payoff(&profile, table)?);
            index.insert(seats, code);
            profiles.push(profile);
        }
        Ok(PayoffMemo {
            k,
            profiles,
            payoffs,
            index,
        })
    }

    pub fn players(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn get(&self, profile: &StrategyProfile) -> Option<&[f64]> {
        self.index
            .get(profile.seats())
            .map(|&i| self.payoffs[i].as_slice())
    }

    /// Profiles and payoff vectors in enumeration order.
    pub fn entries(&self) -> impl Iterator<Item = (&StrategyProfile, &[f64])> {
        self.profiles
            .iter()
            .zip(self.payoffs.iter().map(|p| p.as_slice()))
    }

    /// Seat-wise mean payoff vector over every profile in the memo.
    pub fn mean_payoff(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.k];
        for row in &self.payoffs {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        let n = self.payoffs.len() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }
}
