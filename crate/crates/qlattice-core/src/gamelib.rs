//! Constructors for the named operators and initial states: the five
//! prisoner's-dilemma strategy unitaries, the entangler, the Parrondo coin
//! family and the separable/GHZ/W coin states.
//!
//! Coin basis convention: |L⟩ is index 0, |R⟩ is index 1, everywhere.

use crate::error::{Error, Result};
use crate::linalg::{Complex, Operator, StateVector};
use serde::{Deserialize, Serialize};

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// The five unitary strategies of the quantized prisoner's dilemma.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StrategyName {
    C,
    D,
    H,
    Q,
    Sigma,
}

impl StrategyName {
    pub const ALL: [StrategyName; 5] = [
        StrategyName::C,
        StrategyName::D,
        StrategyName::H,
        StrategyName::Q,
        StrategyName::Sigma,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            StrategyName::C => "C",
            StrategyName::D => "D",
            StrategyName::H => "H",
            StrategyName::Q => "Q",
            StrategyName::Sigma => "Sigma",
        }
    }
}

impl std::fmt::Display for StrategyName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for StrategyName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "C" => Ok(StrategyName::C),
            "D" => Ok(StrategyName::D),
            "H" => Ok(StrategyName::H),
            "Q" => Ok(StrategyName::Q),
            "Sigma" | "S" | "sigma" => Ok(StrategyName::Sigma),
            other => Err(Error::ConfigInvalid {
                field: "strategy".into(),
                reason: format!("unknown strategy `{other}`; expected C, D, H, Q or Sigma"),
            }),
        }
    }
}

/// Which multipartite coin state a Parrondo game starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoinStateKind {
    Separable,
    Ghz,
    W,
}

impl CoinStateKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CoinStateKind::Separable => "separable",
            CoinStateKind::Ghz => "ghz",
            CoinStateKind::W => "w",
        }
    }
}

impl std::str::FromStr for CoinStateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "separable" => Ok(CoinStateKind::Separable),
            "ghz" => Ok(CoinStateKind::Ghz),
            "w" => Ok(CoinStateKind::W),
            other => Err(Error::ConfigInvalid {
                field: "init".into(),
                reason: format!("unknown coin state `{other}`; expected separable, ghz or w"),
            }),
        }
    }
}

fn c(re: f64, im: f64) -> Complex {
    Complex::new(re, im)
}

/// The 2x2 unitary for a named strategy.
pub fn strategy_gate(name: StrategyName) -> Operator {
    let rows = match name {
        StrategyName::C => vec![
            vec![c(1.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(1.0, 0.0)],
        ],
        StrategyName::D => vec![
            vec![c(0.0, 0.0), c(1.0, 0.0)],
            vec![c(1.0, 0.0), c(0.0, 0.0)],
        ],
        StrategyName::H => vec![
            vec![c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)],
            vec![c(FRAC_1_SQRT_2, 0.0), c(-FRAC_1_SQRT_2, 0.0)],
        ],
        StrategyName::Q => vec![
            vec![c(0.0, 1.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(0.0, -1.0)],
        ],
        StrategyName::Sigma => vec![
            vec![c(0.0, 0.0), c(1.0, 0.0)],
            vec![c(-1.0, 0.0), c(0.0, 0.0)],
        ],
    };
    Operator::from_rows(rows).expect("static 2x2 matrices are square")
}

/// The entangling gate `(1^{⊗n} + i σx^{⊗n}) / √2` on n qubits.
///
/// σx^{⊗n} is the antidiagonal permutation, so the matrix is diagonal 1/√2
/// plus antidiagonal i/√2.
pub fn entangler(n: usize) -> Result<Operator> {
    if n < 2 {
        return Err(Error::PlayerCount {
            got: n,
            min: 2,
            max: usize::MAX,
        });
    }
    let dim = 1usize << n;
    Ok(Operator::from_fn(dim, |r, col| {
        let mut v = c(0.0, 0.0);
        if r == col {
            v += c(FRAC_1_SQRT_2, 0.0);
        }
        if r == dim - 1 - col {
            v += c(0.0, FRAC_1_SQRT_2);
        }
        v
    }))
}

/// Fair-coin operator for game A.
pub fn coin_a() -> Operator {
    Operator::from_rows(vec![
        vec![c(FRAC_1_SQRT_2, 0.0), c(0.0, FRAC_1_SQRT_2)],
        vec![c(0.0, FRAC_1_SQRT_2), c(FRAC_1_SQRT_2, 0.0)],
    ])
    .expect("static 2x2")
}

/// Game-B coin with stay probability `rho` and phase angles `theta`, `phi`:
///
/// ```text
/// [ √ρ              √(1-ρ) e^{iθ}      ]
/// [ √(1-ρ) e^{iφ}  -√ρ e^{i(θ+φ)}      ]
/// ```
pub fn coin_b(rho: f64, theta: f64, phi: f64) -> Result<Operator> {
    if !(0.0..=1.0).contains(&rho) || !rho.is_finite() {
        return Err(Error::InvalidProbability {
            field: "rho",
            value: rho,
        });
    }
    let sr = rho.sqrt();
    let sq = (1.0 - rho).sqrt();
    let eit = Complex::new(0.0, theta).exp();
    let eip = Complex::new(0.0, phi).exp();
    Operator::from_rows(vec![
        vec![c(sr, 0.0), eit * sq],
        vec![eip * sq, -(eit * eip) * sr],
    ])
}

/// Initial joint coin state for `n` players.
///
/// Separable is |L…L⟩; GHZ is (|L…L⟩+|R…R⟩)/√2; W is the uniform
/// superposition of the n single-|R⟩ basis states, all phases +1.
pub fn initial_coin_state(kind: CoinStateKind, n: usize) -> Result<StateVector> {
    let min = match kind {
        CoinStateKind::Separable => 1,
        _ => 2,
    };
    if n < min {
        return Err(Error::PlayerCount {
            got: n,
            min,
            max: usize::MAX,
        });
    }
    let dims = vec![2usize; n];
    let total = 1usize << n;
    let mut amps = vec![c(0.0, 0.0); total];
    match kind {
        CoinStateKind::Separable => amps[0] = c(1.0, 0.0),
        CoinStateKind::Ghz => {
            amps[0] = c(FRAC_1_SQRT_2, 0.0);
            amps[total - 1] = c(FRAC_1_SQRT_2, 0.0);
        }
        CoinStateKind::W => {
            let a = 1.0 / (n as f64).sqrt();
            for i in 0..n {
                // seat i in |R⟩, most-significant subsystem first
                amps[1 << (n - 1 - i)] = c(a, 0.0);
            }
        }
    }
    StateVector::new(dims, amps)
}

/// Coin-controlled cyclic shift `P_R ⊗ S + P_L ⊗ S†` on a ring of `m` sites.
///
/// The walk engines implement the same action on the open line directly; the
/// cyclic form exists as a bona fide unitary for operator-level checks.
pub fn coin_shift(m: usize) -> Operator {
    Operator::from_fn(2 * m, |row, col| {
        let (cr, xr) = (row / m, row % m);
        let (cc, xc) = (col / m, col % m);
        if cr != cc {
            return c(0.0, 0.0);
        }
        let shifted = if cc == 1 { (xc + 1) % m } else { (xc + m - 1) % m };
        if xr == shifted {
            c(1.0, 0.0)
        } else {
            c(0.0, 0.0)
        }
    })
}
