//! Polynomial dealing, Lagrange reconstruction and weighted allocation.
//!
//! A `(t, n)` sharing hides the secret in the constant term of a random
//! polynomial of degree `t - 1`; share `i` is the point `(x_i, P(x_i))`.
//! Any `t` points pin the polynomial down and recover `P(0)`, while any
//! `t - 1` points are consistent with every candidate secret exactly once.
//!
//! Randomness comes from a caller-supplied [`rand::Rng`]. The simulator
//! seeds a ChaCha stream for reproducibility, which is fine for experiments
//! and not a substitute for an OS entropy source in a real vault.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::field::{FieldElement, FieldError, Modulus};

/// Name recorded next to every hex digest in serialized commitments.
pub const HASH_ALGORITHM: &str = "sha256";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ShamirError {
    #[error("threshold must be at least 1")]
    ZeroThreshold,
    #[error("x = 0 is reserved for the secret")]
    ZeroX,
    #[error("duplicate x-coordinate {0}")]
    DuplicateX(u64),
    #[error("need at least {needed} evaluation points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("need at least {needed} shares with distinct x, got {got}")]
    InsufficientShares { needed: usize, got: usize },
    #[error("player {player} has weight {weight}, above the cap {cap}")]
    WeightExceedsCap {
        player: PlayerId,
        weight: usize,
        cap: usize,
    },
    #[error(
        "{needed} x-coordinates requested but the field only has {available} nonzero elements"
    )]
    PoolExhausted { needed: u64, available: u64 },
    #[error("commitment is for epoch {commitment}, scheme is at epoch {current}")]
    EpochMismatch { commitment: u64, current: u64 },
    #[error("share at x = {0} disagrees with the interpolating polynomial")]
    CorruptShareSuspected(u64),
    #[error("a polynomial needs at least one coefficient")]
    EmptyCoefficients,
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Opaque identity of a share holder.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlayerId(pub String);

impl PlayerId {
    pub fn new(id: impl Into<String>) -> Self {
        PlayerId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for PlayerId {
    fn from(s: &str) -> Self {
        PlayerId(s.to_string())
    }
}

/// One evaluation `(x, P(x))` of the sharing polynomial, `x != 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SharePoint {
    x: FieldElement,
    y: FieldElement,
}

impl SharePoint {
    pub fn new(x: FieldElement, y: FieldElement) -> Result<Self, ShamirError> {
        if x.modulus() != y.modulus() {
            return Err(FieldError::ModulusMismatch {
                left: x.modulus().value(),
                right: y.modulus().value(),
            }
            .into());
        }
        if x.is_zero() {
            return Err(ShamirError::ZeroX);
        }
        Ok(SharePoint { x, y })
    }

    pub fn x(&self) -> FieldElement {
        self.x
    }

    pub fn y(&self) -> FieldElement {
        self.y
    }

    pub fn modulus(&self) -> Modulus {
        self.x.modulus()
    }
}

/// All share points held by one player. The weight is the bundle size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShareBundle {
    pub player_id: PlayerId,
    pub points: Vec<SharePoint>,
}

impl ShareBundle {
    pub fn weight(&self) -> usize {
        self.points.len()
    }
}

/// Hash binding of a share to its epoch. Recomputing the digest from a
/// claimed `(x, y)` either matches or exposes a tampered share.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShareCommitment {
    epoch: u64,
    x: FieldElement,
    digest: [u8; 32],
}

fn share_digest(epoch: u64, x: FieldElement, y: FieldElement) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"socialshare/share/v1");
    h.update(x.modulus().value().to_be_bytes());
    h.update(epoch.to_be_bytes());
    h.update(x.value().to_be_bytes());
    h.update(y.value().to_be_bytes());
    h.finalize().into()
}

impl ShareCommitment {
    pub fn commit(point: &SharePoint, epoch: u64) -> Self {
        ShareCommitment {
            epoch,
            x: point.x,
            digest: share_digest(epoch, point.x, point.y),
        }
    }

    pub fn from_parts(epoch: u64, x: FieldElement, digest: [u8; 32]) -> Self {
        ShareCommitment { epoch, x, digest }
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn x(&self) -> FieldElement {
        self.x
    }

    pub fn digest(&self) -> &[u8; 32] {
        &self.digest
    }
}

/// Hex digest binding a secret to its field. Publishing it lets a combiner
/// confirm a reconstruction; for tiny fields it is trivially invertible.
pub fn commit_secret(secret: FieldElement) -> String {
    let mut h = Sha256::new();
    h.update(b"socialshare/secret/v1");
    h.update(secret.modulus().value().to_be_bytes());
    h.update(secret.value().to_be_bytes());
    hex::encode(h.finalize())
}

/// Checks a share against the commitment published for `current_epoch`.
pub fn verify_share(
    point: &SharePoint,
    commitment: &ShareCommitment,
    current_epoch: u64,
) -> Result<bool, ShamirError> {
    if commitment.epoch != current_epoch {
        return Err(ShamirError::EpochMismatch {
            commitment: commitment.epoch,
            current: current_epoch,
        });
    }
    Ok(point.x == commitment.x
        && share_digest(commitment.epoch, point.x, point.y) == commitment.digest)
}

/// The dealer's polynomial. Lives only for the duration of a dealing and
/// is wiped on drop.
pub struct SecretPolynomial {
    coefficients: Vec<FieldElement>,
}

impl SecretPolynomial {
    /// Secret in the constant term; the other `t - 1` coefficients are
    /// uniform over the whole field, zero included.
    pub fn random<R: Rng + ?Sized>(
        secret: FieldElement,
        t: usize,
        rng: &mut R,
    ) -> Result<Self, ShamirError> {
        if t == 0 {
            return Err(ShamirError::ZeroThreshold);
        }
        let modulus = secret.modulus();
        let mut coefficients = Vec::with_capacity(t);
        coefficients.push(secret);
        coefficients.extend((1..t).map(|_| modulus.random(rng)));
        Ok(SecretPolynomial { coefficients })
    }

    /// Fixed coefficients `a_0, a_1, ...`. For reproducing worked examples.
    pub fn from_coefficients(coefficients: Vec<FieldElement>) -> Result<Self, ShamirError> {
        let first = *coefficients.first().ok_or(ShamirError::EmptyCoefficients)?;
        for c in &coefficients {
            if c.modulus() != first.modulus() {
                return Err(FieldError::ModulusMismatch {
                    left: first.modulus().value(),
                    right: c.modulus().value(),
                }
                .into());
            }
        }
        Ok(SecretPolynomial { coefficients })
    }

    pub fn threshold(&self) -> usize {
        self.coefficients.len()
    }

    pub fn modulus(&self) -> Modulus {
        self.coefficients[0].modulus()
    }

    pub fn evaluate(&self, x: FieldElement) -> Result<FieldElement, ShamirError> {
        horner(&self.coefficients, x)
    }
}

impl Drop for SecretPolynomial {
    fn drop(&mut self) {
        let zero = self.modulus().zero();
        for c in self.coefficients.iter_mut() {
            *c = zero;
        }
    }
}

pub(crate) fn horner(
    coefficients: &[FieldElement],
    x: FieldElement,
) -> Result<FieldElement, ShamirError> {
    let mut acc = x.modulus().zero();
    for c in coefficients.iter().rev() {
        acc = acc.checked_mul(x)?.checked_add(*c)?;
    }
    Ok(acc)
}

/// Output of a dealing: shares plus their epoch-0 commitments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dealing {
    pub shares: Vec<SharePoint>,
    pub commitments: Vec<ShareCommitment>,
}

fn check_xs(xs: &[FieldElement], modulus: Modulus) -> Result<(), ShamirError> {
    let mut seen = BTreeSet::new();
    for x in xs {
        if x.modulus() != modulus {
            return Err(FieldError::ModulusMismatch {
                left: modulus.value(),
                right: x.modulus().value(),
            }
            .into());
        }
        if x.is_zero() {
            return Err(ShamirError::ZeroX);
        }
        if !seen.insert(x.value()) {
            return Err(ShamirError::DuplicateX(x.value()));
        }
    }
    Ok(())
}

/// Evaluates `poly` at each of `xs` and commits to the results at epoch 0.
pub fn deal_polynomial(
    poly: &SecretPolynomial,
    xs: &[FieldElement],
) -> Result<Dealing, ShamirError> {
    check_xs(xs, poly.modulus())?;
    if xs.len() < poly.threshold() {
        return Err(ShamirError::TooFewPoints {
            needed: poly.threshold(),
            got: xs.len(),
        });
    }
    let shares = xs
        .iter()
        .map(|&x| SharePoint::new(x, poly.evaluate(x)?))
        .collect::<Result<Vec<_>, _>>()?;
    let commitments = shares
        .iter()
        .map(|s| ShareCommitment::commit(s, 0))
        .collect();
    Ok(Dealing {
        shares,
        commitments,
    })
}

/// Shares `secret` with threshold `t` at the given x-coordinates.
pub fn deal<R: Rng + ?Sized>(
    secret: FieldElement,
    t: usize,
    xs: &[FieldElement],
    rng: &mut R,
) -> Result<Dealing, ShamirError> {
    if t == 0 {
        return Err(ShamirError::ZeroThreshold);
    }
    // validate before drawing so errors never consume randomness
    check_xs(xs, secret.modulus())?;
    if xs.len() < t {
        return Err(ShamirError::TooFewPoints {
            needed: t,
            got: xs.len(),
        });
    }
    let poly = SecretPolynomial::random(secret, t, rng)?;
    deal_polynomial(&poly, xs)
}

/// Deterministic dealing from explicit coefficients `a_0, a_1, ...`.
pub fn deal_with_coefficients(
    coefficients: &[FieldElement],
    xs: &[FieldElement],
) -> Result<Dealing, ShamirError> {
    let poly = SecretPolynomial::from_coefficients(coefficients.to_vec())?;
    deal_polynomial(&poly, xs)
}

/// Sorts by x and keeps the first `t`, rejecting duplicates anywhere.
fn canonical_subset(shares: &[SharePoint], t: usize) -> Result<Vec<SharePoint>, ShamirError> {
    if t == 0 {
        return Err(ShamirError::ZeroThreshold);
    }
    let mut sorted = shares.to_vec();
    sorted.sort_by_key(|s| s.x.value());
    if let Some(first) = sorted.first() {
        let m = first.modulus();
        if let Some(bad) = sorted.iter().find(|s| s.modulus() != m) {
            return Err(FieldError::ModulusMismatch {
                left: m.value(),
                right: bad.modulus().value(),
            }
            .into());
        }
    }
    for pair in sorted.windows(2) {
        if pair[0].x == pair[1].x {
            return Err(ShamirError::DuplicateX(pair[0].x.value()));
        }
    }
    if sorted.len() < t {
        return Err(ShamirError::InsufficientShares {
            needed: t,
            got: sorted.len(),
        });
    }
    sorted.truncate(t);
    Ok(sorted)
}

/// Lagrange basis coefficients `lambda_i(at) = prod_{j != i} (at - x_j) / (x_i - x_j)`.
pub fn lagrange_coefficients(
    xs: &[FieldElement],
    at: FieldElement,
) -> Result<Vec<FieldElement>, ShamirError> {
    let mut out = Vec::with_capacity(xs.len());
    for (i, &xi) in xs.iter().enumerate() {
        let mut num = at.modulus().one();
        let mut den = at.modulus().one();
        for (j, &xj) in xs.iter().enumerate() {
            if i == j {
                continue;
            }
            num = num.checked_mul(at.checked_sub(xj)?)?;
            den = den.checked_mul(xi.checked_sub(xj)?)?;
        }
        let den_inv = den.inv().map_err(|_| ShamirError::DuplicateX(xi.value()))?;
        out.push(num.checked_mul(den_inv)?);
    }
    Ok(out)
}

/// Value at `x_target` of the degree `t - 1` polynomial through the first
/// `t` shares (ascending x).
pub fn interpolate_at(
    shares: &[SharePoint],
    t: usize,
    x_target: FieldElement,
) -> Result<FieldElement, ShamirError> {
    let subset = canonical_subset(shares, t)?;
    let xs: Vec<_> = subset.iter().map(|s| s.x).collect();
    let lambdas = lagrange_coefficients(&xs, x_target)?;
    let mut acc = x_target.modulus().zero();
    for (share, lambda) in subset.iter().zip(lambdas) {
        acc = acc.checked_add(share.y.checked_mul(lambda)?)?;
    }
    Ok(acc)
}

/// Recovers the secret `P(0)` from the first `t` shares in x-order.
pub fn reconstruct(shares: &[SharePoint], t: usize) -> Result<FieldElement, ShamirError> {
    let modulus = shares
        .first()
        .map(|s| s.modulus())
        .ok_or(ShamirError::InsufficientShares { needed: t, got: 0 })?;
    interpolate_at(shares, t, modulus.zero())
}

/// Like [`reconstruct`], but also checks every share beyond the first `t`
/// against the interpolant and reports the first one that disagrees.
pub fn reconstruct_checked(shares: &[SharePoint], t: usize) -> Result<FieldElement, ShamirError> {
    let secret = reconstruct(shares, t)?;
    let base = canonical_subset(shares, t)?;
    let used: BTreeSet<u64> = base.iter().map(|s| s.x.value()).collect();
    for extra in shares.iter().filter(|s| !used.contains(&s.x.value())) {
        if interpolate_at(&base, t, extra.x)? != extra.y {
            return Err(ShamirError::CorruptShareSuspected(extra.x.value()));
        }
    }
    Ok(secret)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightedDealing {
    pub bundles: BTreeMap<PlayerId, ShareBundle>,
    pub commitments: Vec<ShareCommitment>,
}

/// Deals `sum(weights)` shares, handing player `i` exactly `w_i` of them.
///
/// x-coordinates are drawn sequentially from 1, walking players in id
/// order, so the allocation is a pure function of the weight map.
pub fn weighted_deal<R: Rng + ?Sized>(
    secret: FieldElement,
    t: usize,
    weights: &BTreeMap<PlayerId, usize>,
    cap: usize,
    rng: &mut R,
) -> Result<WeightedDealing, ShamirError> {
    let modulus = secret.modulus();
    for (player, &weight) in weights {
        if weight > cap {
            return Err(ShamirError::WeightExceedsCap {
                player: player.clone(),
                weight,
                cap,
            });
        }
    }
    let total: u64 = weights.values().map(|&w| w as u64).sum();
    if total >= modulus.value() {
        return Err(ShamirError::PoolExhausted {
            needed: total,
            available: modulus.value() - 1,
        });
    }
    let xs: Vec<_> = (1..=total).map(|x| modulus.element(x)).collect();
    let dealing = deal(secret, t, &xs, rng)?;

    let mut points = dealing.shares.into_iter();
    let bundles = weights
        .iter()
        .map(|(player, &w)| {
            let bundle = ShareBundle {
                player_id: player.clone(),
                points: points.by_ref().take(w).collect(),
            };
            (player.clone(), bundle)
        })
        .collect();
    Ok(WeightedDealing {
        bundles,
        commitments: dealing.commitments,
    })
}
