//! Individual trust: player classes, the piecewise-linear update
//! functions `mu` (after cooperation) and `mu_prime` (after defection),
//! and reputation averaging.
//!
//! Both functions are stitched together from straight segments between
//! anchor points, so continuity holds by construction:
//!
//! | piece        | `mu` (cooperate)                | `mu_prime` (defect)              |
//! |--------------|---------------------------------|----------------------------------|
//! | floor taper  |                                 | `(-1, 0)` to `(eps-1, kappa)`    |
//! | bad          | `(-1, eta)` to `(beta, theta)`  | `(eps-1, kappa)` to `(beta, theta)` |
//! | new          | `theta`                         | `theta`                          |
//! | good         | `(alpha, theta)` to `(1-eps, kappa)` | `(alpha, theta)` to `(1, eta)` |
//! | ceiling taper| `(1-eps, kappa)` to `(1, 0)`    |                                  |

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrustError {
    #[error("trust value {0} is outside [-1, 1]")]
    OutOfRange(f64),
    #[error("a line needs two distinct x-coordinates, both were {0}")]
    DegenerateLine(f64),
    #[error("cannot average an empty list of trust values")]
    EmptyList,
    #[error("invalid trust parameters: {0}")]
    InvalidParams(String),
}

/// The six scalars shaping `mu` and `mu_prime`.
///
/// Constructed only through [`TrustParams::new`] (or deserialization,
/// which runs the same checks):
///
/// * `0 < epsilon < 1`
/// * `epsilon - 1 < beta < alpha < 1 - epsilon`
/// * `0 < eta < theta < kappa <= epsilon`
///
/// `kappa <= epsilon` makes the two taper pieces self-bounding, so an
/// update can never leave `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTrustParams")]
pub struct TrustParams {
    alpha: f64,
    beta: f64,
    epsilon: f64,
    eta: f64,
    theta: f64,
    kappa: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrustParams {
    #[serde(default = "defaults::alpha")]
    alpha: f64,
    #[serde(default = "defaults::beta")]
    beta: f64,
    #[serde(default = "defaults::epsilon")]
    epsilon: f64,
    #[serde(default = "defaults::eta")]
    eta: f64,
    #[serde(default = "defaults::theta")]
    theta: f64,
    #[serde(default = "defaults::kappa")]
    kappa: f64,
}

pub mod defaults {
    pub fn alpha() -> f64 {
        0.3
    }
    pub fn beta() -> f64 {
        -0.3
    }
    pub fn epsilon() -> f64 {
        0.1
    }
    pub fn eta() -> f64 {
        0.01
    }
    pub fn theta() -> f64 {
        0.05
    }
    pub fn kappa() -> f64 {
        0.09
    }
}

impl TryFrom<RawTrustParams> for TrustParams {
    type Error = TrustError;
    fn try_from(r: RawTrustParams) -> Result<Self, TrustError> {
        TrustParams::new(r.alpha, r.beta, r.epsilon, r.eta, r.theta, r.kappa)
    }
}

impl Default for TrustParams {
    fn default() -> Self {
        TrustParams {
            alpha: defaults::alpha(),
            beta: defaults::beta(),
            epsilon: defaults::epsilon(),
            eta: defaults::eta(),
            theta: defaults::theta(),
            kappa: defaults::kappa(),
        }
    }
}

impl TrustParams {
    pub fn new(
        alpha: f64,
        beta: f64,
        epsilon: f64,
        eta: f64,
        theta: f64,
        kappa: f64,
    ) -> Result<Self, TrustError> {
        let bad = |msg: String| Err(TrustError::InvalidParams(msg));
        let all = [alpha, beta, epsilon, eta, theta, kappa];
        if all.iter().any(|v| !v.is_finite()) {
            return bad("all parameters must be finite".into());
        }
        if !(0.0 < epsilon && epsilon < 1.0) {
            return bad(format!("need 0 < epsilon < 1, got epsilon = {epsilon}"));
        }
        if !(epsilon - 1.0 < beta && beta < alpha && alpha < 1.0 - epsilon) {
            return bad(format!(
                "need epsilon-1 < beta < alpha < 1-epsilon, got beta = {beta}, alpha = {alpha}, epsilon = {epsilon}"
            ));
        }
        if !(0.0 < eta && eta < theta && theta < kappa) {
            return bad(format!(
                "need 0 < eta < theta < kappa, got eta = {eta}, theta = {theta}, kappa = {kappa}"
            ));
        }
        if kappa > epsilon {
            return bad(format!(
                "need kappa <= epsilon, got kappa = {kappa} > epsilon = {epsilon}"
            ));
        }
        Ok(TrustParams {
            alpha,
            beta,
            epsilon,
            eta,
            theta,
            kappa,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
    pub fn eta(&self) -> f64 {
        self.eta
    }
    pub fn theta(&self) -> f64 {
        self.theta
    }
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// The four segments of `mu`, left to right.
    pub fn mu_pieces(&self) -> [LinearPiece; 4] {
        let TrustParams {
            alpha,
            beta,
            epsilon,
            eta,
            theta,
            kappa,
        } = *self;
        [
            LinearPiece::new((-1.0, eta), (beta, theta), Closed::Left),
            LinearPiece::new((beta, theta), (alpha, theta), Closed::Both),
            LinearPiece::new((alpha, theta), (1.0 - epsilon, kappa), Closed::Right),
            LinearPiece::new((1.0 - epsilon, kappa), (1.0, 0.0), Closed::Right),
        ]
    }

    /// The four segments of `mu_prime`, left to right.
    pub fn mu_prime_pieces(&self) -> [LinearPiece; 4] {
        let TrustParams {
            alpha,
            beta,
            epsilon,
            eta,
            theta,
            kappa,
        } = *self;
        [
            LinearPiece::new((-1.0, 0.0), (epsilon - 1.0, kappa), Closed::Left),
            LinearPiece::new((epsilon - 1.0, kappa), (beta, theta), Closed::Left),
            LinearPiece::new((beta, theta), (alpha, theta), Closed::Both),
            LinearPiece::new((alpha, theta), (1.0, eta), Closed::Right),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Closed {
    Left,
    Right,
    Both,
}

/// One straight segment of a piecewise-linear function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearPiece {
    pub start: (f64, f64),
    pub end: (f64, f64),
    pub closed: Closed,
}

impl LinearPiece {
    fn new(start: (f64, f64), end: (f64, f64), closed: Closed) -> Self {
        LinearPiece { start, end, closed }
    }

    pub fn contains(&self, x: f64) -> bool {
        let (lo, hi) = (self.start.0, self.end.0);
        match self.closed {
            Closed::Left => lo <= x && x < hi,
            Closed::Right => lo < x && x <= hi,
            Closed::Both => lo <= x && x <= hi,
        }
    }

    /// Value of the segment's line at `x`, inside the interval or not.
    pub fn value_at(&self, x: f64) -> f64 {
        line_through(self.start, self.end, x).expect("pieces have positive width")
    }
}

/// Value at `x` of the line through `p1` and `p2`.
pub fn line_through(p1: (f64, f64), p2: (f64, f64), x: f64) -> Result<f64, TrustError> {
    let (x1, y1) = p1;
    let (x2, y2) = p2;
    if x1 == x2 {
        return Err(TrustError::DegenerateLine(x1));
    }
    if x == x2 {
        return Ok(y2);
    }
    Ok((y2 - y1) / (x2 - x1) * (x - x1) + y1)
}

fn check_range(x: f64) -> Result<(), TrustError> {
    if (-1.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(TrustError::OutOfRange(x))
    }
}

fn eval_pieces(pieces: &[LinearPiece; 4], x: f64) -> Result<f64, TrustError> {
    check_range(x)?;
    pieces
        .iter()
        .find(|p| p.contains(x))
        .map(|p| p.value_at(x))
        .ok_or(TrustError::OutOfRange(x))
}

/// Increment applied after a cooperation at previous trust `x`.
pub fn mu(x: f64, params: &TrustParams) -> Result<f64, TrustError> {
    eval_pieces(&params.mu_pieces(), x)
}

/// Decrement applied after a defection at previous trust `x`.
pub fn mu_prime(x: f64, params: &TrustParams) -> Result<f64, TrustError> {
    eval_pieces(&params.mu_prime_pieces(), x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PlayerClass {
    /// `[-1, beta)`
    #[serde(rename = "B")]
    Bad,
    /// `[beta, alpha]`
    #[serde(rename = "N")]
    New,
    /// `(alpha, 1]`
    #[serde(rename = "G")]
    Good,
}

impl PlayerClass {
    pub fn letter(self) -> char {
        match self {
            PlayerClass::Bad => 'B',
            PlayerClass::New => 'N',
            PlayerClass::Good => 'G',
        }
    }
}

impl fmt::Display for PlayerClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// Both `beta` and `alpha` belong to the new band.
pub fn classify(x: f64, params: &TrustParams) -> Result<PlayerClass, TrustError> {
    check_range(x)?;
    Ok(if x < params.beta {
        PlayerClass::Bad
    } else if x <= params.alpha {
        PlayerClass::New
    } else {
        PlayerClass::Good
    })
}

/// A player's reputation after `period` updates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrustState {
    value: f64,
    period: u64,
}

impl Default for TrustState {
    fn default() -> Self {
        TrustState::initial()
    }
}

impl TrustState {
    /// Zero trust at period 0.
    pub fn initial() -> Self {
        TrustState {
            value: 0.0,
            period: 0,
        }
    }

    pub fn new(value: f64, period: u64) -> Result<Self, TrustError> {
        check_range(value)?;
        Ok(TrustState { value, period })
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn period(&self) -> u64 {
        self.period
    }

    /// Same period, value reset to zero.
    pub fn reset(&self) -> Self {
        TrustState {
            value: 0.0,
            period: self.period,
        }
    }

    /// Moves to the next period with `value + delta`, clamped into
    /// `[-1, 1]`. The clamp is a safety net: with valid parameters and
    /// scaling factors in `[0, 1]` it never engages.
    pub fn advance(&self, delta: f64) -> TrustUpdate {
        let raw = self.value + delta;
        let value = raw.clamp(-1.0, 1.0);
        TrustUpdate {
            state: TrustState {
                value,
                period: self.period + 1,
            },
            clamped: (value - raw).abs() > ROUNDING_SLACK,
        }
    }
}

/// Overshoot this small is floating-point rounding, not a clamp event.
const ROUNDING_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrustUpdate {
    pub state: TrustState,
    pub clamped: bool,
}

/// One solo update: `x + mu(x)` on cooperation, `x - mu_prime(x)` on
/// defection.
pub fn update_individual(state: TrustState, cooperated: bool, params: &TrustParams) -> TrustState {
    let update = update_individual_weighted(state, cooperated, params, 1.0);
    debug_assert!(
        !update.clamped,
        "trust update left [-1, 1] with valid parameters"
    );
    update.state
}

/// Solo update with the increment scaled by `cost_weight`, a per-event
/// transaction cost. Weights in `[0, 1]` keep the no-clamp guarantee.
pub fn update_individual_weighted(
    state: TrustState,
    cooperated: bool,
    params: &TrustParams,
    cost_weight: f64,
) -> TrustUpdate {
    let x = state.value;
    // state.value is always in range, so mu/mu_prime cannot fail
    let delta = if cooperated {
        cost_weight * mu(x, params).expect("state in range")
    } else {
        -cost_weight * mu_prime(x, params).expect("state in range")
    };
    state.advance(delta)
}

/// Arithmetic mean of the pairwise values `T_i^j`, `j != i`.
pub fn reputation_from_pairwise(values: &[f64]) -> Result<f64, TrustError> {
    if values.is_empty() {
        return Err(TrustError::EmptyList);
    }
    for &v in values {
        check_range(v)?;
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}
