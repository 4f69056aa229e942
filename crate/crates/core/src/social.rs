//! Population-aware trust updates.
//!
//! With `delta` cooperators out of `n` players, a cooperator gains
//! `(1 - delta/n) * mu(x)` and a defector loses `(delta/n) * mu_prime(x)`.
//! Cooperation is worth more when it is rare and defection costs more when
//! it is rare; when everyone does the same thing nobody moves.

use serde::Serialize;
use thiserror::Error;

use crate::trust::{mu, mu_prime, TrustError, TrustParams, TrustState};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SocialError {
    #[error("action vector must cover at least one player")]
    EmptyPopulation,
    #[error("action {0:?} is not C or D")]
    BadAction(char),
    #[error("{states} trust states but {actions} actions")]
    LengthMismatch { states: usize, actions: usize },
    #[error(transparent)]
    Trust(#[from] TrustError),
}

/// Per-player cooperation flags for one period (`true` = cooperated).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionVector(Vec<bool>);

impl ActionVector {
    pub fn new(actions: Vec<bool>) -> Result<Self, SocialError> {
        if actions.is_empty() {
            return Err(SocialError::EmptyPopulation);
        }
        Ok(ActionVector(actions))
    }

    /// Parses a `C`/`D` string such as `"CCDC"`.
    pub fn from_pattern(pattern: &str) -> Result<Self, SocialError> {
        let flags = pattern
            .chars()
            .map(|c| match c {
                'C' | 'c' => Ok(true),
                'D' | 'd' => Ok(false),
                other => Err(SocialError::BadAction(other)),
            })
            .collect::<Result<Vec<_>, _>>()?;
        ActionVector::new(flags)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    /// Number of cooperators.
    pub fn delta(&self) -> usize {
        self.0.iter().filter(|&&c| c).count()
    }
}

/// Number of cooperators in `actions`.
pub fn delta(actions: &ActionVector) -> usize {
    actions.delta()
}

/// Multipliers on `mu` and `mu_prime` for a given cooperation count.
/// They always sum to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingFactors {
    pub reward: f64,
    pub penalty: f64,
}

impl ScalingFactors {
    pub fn new(delta: usize, n: usize) -> Self {
        assert!(n > 0 && delta <= n, "need 0 <= delta <= n, n > 0");
        // integer numerators, one rounding step each
        ScalingFactors {
            reward: (n - delta) as f64 / n as f64,
            penalty: delta as f64 / n as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SocialUpdate {
    pub states: Vec<TrustState>,
    pub delta: usize,
    pub n: usize,
    pub factors: ScalingFactors,
    /// Updates that hit the `[-1, 1]` safety clamp. Zero for valid params.
    pub clamped: usize,
}

/// Applies one period of the social trust function to every player.
pub fn social_update(
    states: &[TrustState],
    actions: &ActionVector,
    params: &TrustParams,
) -> Result<SocialUpdate, SocialError> {
    if states.len() != actions.len() {
        return Err(SocialError::LengthMismatch {
            states: states.len(),
            actions: actions.len(),
        });
    }
    let n = actions.len();
    let delta = actions.delta();
    let factors = ScalingFactors::new(delta, n);
    let mut clamped = 0;
    let mut next = Vec::with_capacity(n);
    for (state, &cooperated) in states.iter().zip(actions.as_slice()) {
        let x = state.value();
        let step = if cooperated {
            factors.reward * mu(x, params)?
        } else {
            -factors.penalty * mu_prime(x, params)?
        };
        let update = state.advance(step);
        clamped += update.clamped as usize;
        next.push(update.state);
    }
    Ok(SocialUpdate {
        states: next,
        delta,
        n,
        factors,
        clamped,
    })
}
