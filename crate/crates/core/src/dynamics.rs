//! Dealer-free share evolution: proactive refresh, enrollment and
//! disenrollment.
//!
//! A refresh adds a random polynomial `g` with `g(0) = 0` to the sharing
//! polynomial, so every share moves while the secret stays put. Enrollment
//! hands a fresh point `f(x_new)` to a new holder through a sub-share
//! exchange among `t` existing holders. Disenrollment is a refresh that
//! skips one share, leaving it stranded on the old polynomial.
//!
//! [`SchemeState`] is the live bookkeeping for one sharing instance. Each
//! transition validates everything up front and only then mutates, so a
//! failed call leaves the state untouched.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::field::{FieldElement, FieldError, Modulus};
use crate::shamir::{
    horner, lagrange_coefficients, verify_share, PlayerId, ShamirError, ShareBundle,
    ShareCommitment, SharePoint, WeightedDealing,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DynamicsError {
    #[error("share at x = {0} fails its commitment")]
    InconsistentShares(u64),
    #[error("x = {0} has already been used in this scheme")]
    ReusedX(u64),
    #[error("enrollment needs exactly {needed} contributors, got {got}")]
    TooFewContributors { needed: usize, got: usize },
    #[error("enrollment needs exactly {needed} contributors, got {got}")]
    TooManyContributors { needed: usize, got: usize },
    #[error("x = {0} is not a live share")]
    UnknownX(u64),
    #[error("refresh polynomial has {got} coefficients, threshold {t} needs {needed}", needed = t - 1)]
    RefreshDegree { t: usize, got: usize },
    #[error(transparent)]
    Shamir(#[from] ShamirError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// `g(x) = g_1 x + ... + g_{t-1} x^{t-1}`; the constant term is always zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefreshPolynomial {
    modulus: Modulus,
    coefficients: Vec<FieldElement>,
}

impl RefreshPolynomial {
    /// Uniform `g_1 .. g_{t-1}`, zero allowed in every slot.
    pub fn random<R: Rng + ?Sized>(modulus: Modulus, t: usize, rng: &mut R) -> Self {
        RefreshPolynomial {
            modulus,
            coefficients: (1..t).map(|_| modulus.random(rng)).collect(),
        }
    }

    pub fn zero(modulus: Modulus, t: usize) -> Self {
        RefreshPolynomial {
            modulus,
            coefficients: vec![modulus.zero(); t.saturating_sub(1)],
        }
    }

    /// Builds `g` from `g_1, g_2, ...` (no constant term).
    pub fn from_coefficients(modulus: Modulus, coefficients: &[u64]) -> Self {
        RefreshPolynomial {
            modulus,
            coefficients: coefficients.iter().map(|&c| modulus.element(c)).collect(),
        }
    }

    pub fn modulus(&self) -> Modulus {
        self.modulus
    }

    /// Number of nonconstant coefficients.
    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn evaluate(&self, x: FieldElement) -> Result<FieldElement, FieldError> {
        let mut full = Vec::with_capacity(self.coefficients.len() + 1);
        full.push(self.modulus.zero());
        full.extend_from_slice(&self.coefficients);
        horner(&full, x).map_err(|e| match e {
            ShamirError::Field(f) => f,
            other => unreachable!("horner only fails on field errors: {other}"),
        })
    }
}

/// `(x, y) -> (x, y + g(x))` for every share.
pub fn refresh_shares(
    shares: &[SharePoint],
    g: &RefreshPolynomial,
) -> Result<Vec<SharePoint>, DynamicsError> {
    shares
        .iter()
        .map(|s| {
            let y = s.y().checked_add(g.evaluate(s.x())?)?;
            Ok(SharePoint::new(s.x(), y)?)
        })
        .collect()
}

/// Refreshes every share except the one at `revoked_x`, which is returned
/// unchanged as the stale share.
pub fn disenroll_shares(
    shares: &[SharePoint],
    revoked_x: FieldElement,
    g: &RefreshPolynomial,
) -> Result<(Vec<SharePoint>, SharePoint), DynamicsError> {
    let stale = *shares
        .iter()
        .find(|s| s.x() == revoked_x)
        .ok_or(DynamicsError::UnknownX(revoked_x.value()))?;
    let keep: Vec<_> = shares
        .iter()
        .filter(|s| s.x() != revoked_x)
        .copied()
        .collect();
    Ok((refresh_shares(&keep, g)?, stale))
}

/// Every message of one enrollment run.
///
/// `pieces[j][k]` is the piece contributor `j` sends to contributor `k`;
/// `partial_sums[k]` is what contributor `k` forwards to the new holder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnrollTranscript {
    pub point: SharePoint,
    pub pieces: Vec<Vec<FieldElement>>,
    pub partial_sums: Vec<FieldElement>,
}

/// Computes the share at `x_new` from exactly `t` contributor shares via
/// additive sub-share exchange.
///
/// Contributor `j` scales its share by its Lagrange coefficient at `x_new`,
/// splits the product into `t` random additive pieces and sends one piece
/// to each contributor. Each contributor forwards the sum of the pieces it
/// received; the new holder adds those sums. No message on its own reveals
/// any contributor's share.
pub fn enroll_share<R: Rng + ?Sized>(
    contributors: &[SharePoint],
    t: usize,
    x_new: FieldElement,
    rng: &mut R,
) -> Result<EnrollTranscript, DynamicsError> {
    if contributors.len() < t {
        return Err(DynamicsError::TooFewContributors {
            needed: t,
            got: contributors.len(),
        });
    }
    if contributors.len() > t {
        return Err(DynamicsError::TooManyContributors {
            needed: t,
            got: contributors.len(),
        });
    }
    if x_new.is_zero() {
        return Err(ShamirError::ZeroX.into());
    }
    let mut seen = BTreeSet::new();
    for c in contributors {
        if !seen.insert(c.x().value()) {
            return Err(ShamirError::DuplicateX(c.x().value()).into());
        }
    }
    if seen.contains(&x_new.value()) {
        return Err(DynamicsError::ReusedX(x_new.value()));
    }

    let modulus = x_new.modulus();
    let xs: Vec<_> = contributors.iter().map(|c| c.x()).collect();
    let lambdas = lagrange_coefficients(&xs, x_new)?;

    let mut pieces = Vec::with_capacity(t);
    for (c, lambda) in contributors.iter().zip(&lambdas) {
        let sigma = lambda.checked_mul(c.y())?;
        let mut row: Vec<FieldElement> = (0..t - 1).map(|_| modulus.random(rng)).collect();
        let mut last = sigma;
        for r in &row {
            last = last.checked_sub(*r)?;
        }
        row.push(last);
        pieces.push(row);
    }

    let mut partial_sums = Vec::with_capacity(t);
    for k in 0..t {
        let mut acc = modulus.zero();
        for row in &pieces {
            acc = acc.checked_add(row[k])?;
        }
        partial_sums.push(acc);
    }
    let mut y = modulus.zero();
    for s in &partial_sums {
        y = y.checked_add(*s)?;
    }
    Ok(EnrollTranscript {
        point: SharePoint::new(x_new, y)?,
        pieces,
        partial_sums,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TransitionKind {
    Refresh,
    Enroll,
    Disenroll,
}

/// Audit record of one epoch change.
///
/// `retained_xs` and `retired_xs` partition the previous live set;
/// `enrolled_xs` are brand-new coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EpochTransition {
    pub kind: TransitionKind,
    pub old_epoch: u64,
    pub new_epoch: u64,
    pub retained_xs: Vec<u64>,
    pub retired_xs: Vec<u64>,
    pub enrolled_xs: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct LiveShare {
    owner: PlayerId,
    y: FieldElement,
}

/// Live state of one sharing instance: who holds which points, under
/// which epoch, and which coordinates are spent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemeState {
    modulus: Modulus,
    threshold: usize,
    epoch: u64,
    live: BTreeMap<u64, LiveShare>,
    commitments: BTreeMap<u64, ShareCommitment>,
    archive: Vec<ShareCommitment>,
    retired: BTreeSet<u64>,
    next_x: u64,
}

impl SchemeState {
    /// Takes over a fresh weighted dealing at epoch 0.
    pub fn from_dealing(modulus: Modulus, threshold: usize, dealing: WeightedDealing) -> Self {
        let mut live = BTreeMap::new();
        for bundle in dealing.bundles.into_values() {
            for p in bundle.points {
                live.insert(
                    p.x().value(),
                    LiveShare {
                        owner: bundle.player_id.clone(),
                        y: p.y(),
                    },
                );
            }
        }
        let commitments = dealing
            .commitments
            .into_iter()
            .map(|c| (c.x().value(), c))
            .collect();
        let next_x = live.keys().next_back().map_or(1, |x| x + 1);
        SchemeState {
            modulus,
            threshold,
            epoch: 0,
            live,
            commitments,
            archive: Vec::new(),
            retired: BTreeSet::new(),
            next_x,
        }
    }

    pub fn modulus(&self) -> Modulus {
        self.modulus
    }

    pub fn threshold(&self) -> usize {
        self.threshold
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    /// Smallest coordinate never handed out.
    pub fn next_x(&self) -> u64 {
        self.next_x
    }

    fn point(&self, x: u64, share: &LiveShare) -> SharePoint {
        SharePoint::new(self.modulus.element(x), share.y).expect("live x is nonzero")
    }

    pub fn live_points(&self) -> Vec<SharePoint> {
        self.live.iter().map(|(&x, s)| self.point(x, s)).collect()
    }

    pub fn live_xs(&self) -> BTreeSet<u64> {
        self.live.keys().copied().collect()
    }

    pub fn retired_xs(&self) -> &BTreeSet<u64> {
        &self.retired
    }

    pub fn owner_of(&self, x: u64) -> Option<&PlayerId> {
        self.live.get(&x).map(|s| &s.owner)
    }

    /// Points held by `player`, ascending x.
    pub fn points_of(&self, player: &PlayerId) -> Vec<SharePoint> {
        self.live
            .iter()
            .filter(|(_, s)| &s.owner == player)
            .map(|(&x, s)| self.point(x, s))
            .collect()
    }

    pub fn weight_of(&self, player: &PlayerId) -> usize {
        self.live.values().filter(|s| &s.owner == player).count()
    }

    pub fn bundles(&self) -> BTreeMap<PlayerId, ShareBundle> {
        let mut out: BTreeMap<PlayerId, ShareBundle> = BTreeMap::new();
        for (&x, s) in &self.live {
            out.entry(s.owner.clone())
                .or_insert_with(|| ShareBundle {
                    player_id: s.owner.clone(),
                    points: Vec::new(),
                })
                .points
                .push(self.point(x, s));
        }
        out
    }

    pub fn commitment(&self, x: u64) -> Option<&ShareCommitment> {
        self.commitments.get(&x)
    }

    pub fn commitments(&self) -> Vec<ShareCommitment> {
        self.commitments.values().copied().collect()
    }

    /// Commitments from earlier epochs, kept for audit only.
    pub fn archived_commitments(&self) -> &[ShareCommitment] {
        &self.archive
    }

    /// Checks a share someone claims to hold against the current epoch.
    pub fn verify(&self, point: &SharePoint) -> Result<bool, DynamicsError> {
        let c = self
            .commitments
            .get(&point.x().value())
            .ok_or(DynamicsError::UnknownX(point.x().value()))?;
        Ok(verify_share(point, c, self.epoch)?)
    }

    /// Every live share must match its current commitment.
    pub fn verify_all(&self) -> Result<(), DynamicsError> {
        for (&x, s) in &self.live {
            if !self.verify(&self.point(x, s))? {
                return Err(DynamicsError::InconsistentShares(x));
            }
        }
        Ok(())
    }

    fn check_refresh_poly(&self, g: &RefreshPolynomial) -> Result<(), DynamicsError> {
        if g.modulus() != self.modulus {
            return Err(FieldError::ModulusMismatch {
                left: self.modulus.value(),
                right: g.modulus().value(),
            }
            .into());
        }
        if g.len() != self.threshold - 1 {
            return Err(DynamicsError::RefreshDegree {
                t: self.threshold,
                got: g.len(),
            });
        }
        Ok(())
    }

    /// Moves to the next epoch with new share values and re-issued commitments.
    fn install(&mut self, live: BTreeMap<u64, LiveShare>) {
        self.epoch += 1;
        let old = std::mem::take(&mut self.commitments);
        self.archive.extend(old.into_values());
        self.commitments = live
            .iter()
            .map(|(&x, s)| (x, ShareCommitment::commit(&self.point(x, s), self.epoch)))
            .collect();
        self.live = live;
    }

    pub fn refresh<R: Rng + ?Sized>(
        &mut self,
        rng: &mut R,
    ) -> Result<EpochTransition, DynamicsError> {
        let g = RefreshPolynomial::random(self.modulus, self.threshold, rng);
        self.refresh_with(&g)
    }

    /// Adds `g(x)` to every live share.
    pub fn refresh_with(
        &mut self,
        g: &RefreshPolynomial,
    ) -> Result<EpochTransition, DynamicsError> {
        self.check_refresh_poly(g)?;
        self.verify_all()?;
        let mut next = BTreeMap::new();
        for (&x, s) in &self.live {
            let y = s.y.checked_add(g.evaluate(self.modulus.element(x))?)?;
            next.insert(
                x,
                LiveShare {
                    owner: s.owner.clone(),
                    y,
                },
            );
        }
        let old_epoch = self.epoch;
        let retained_xs = next.keys().copied().collect();
        self.install(next);
        Ok(EpochTransition {
            kind: TransitionKind::Refresh,
            old_epoch,
            new_epoch: self.epoch,
            retained_xs,
            retired_xs: Vec::new(),
            enrolled_xs: Vec::new(),
        })
    }

    pub fn disenroll<R: Rng + ?Sized>(
        &mut self,
        revoked_x: u64,
        rng: &mut R,
    ) -> Result<EpochTransition, DynamicsError> {
        let g = RefreshPolynomial::random(self.modulus, self.threshold, rng);
        self.disenroll_with(revoked_x, &g)
    }

    /// Refreshes everyone except `revoked_x`, then retires that coordinate.
    pub fn disenroll_with(
        &mut self,
        revoked_x: u64,
        g: &RefreshPolynomial,
    ) -> Result<EpochTransition, DynamicsError> {
        if !self.live.contains_key(&revoked_x) {
            return Err(DynamicsError::UnknownX(revoked_x));
        }
        self.check_refresh_poly(g)?;
        self.verify_all()?;
        let mut next = BTreeMap::new();
        for (&x, s) in self.live.iter().filter(|(&x, _)| x != revoked_x) {
            let y = s.y.checked_add(g.evaluate(self.modulus.element(x))?)?;
            next.insert(
                x,
                LiveShare {
                    owner: s.owner.clone(),
                    y,
                },
            );
        }
        let old_epoch = self.epoch;
        let retained_xs = next.keys().copied().collect();
        self.install(next);
        self.retired.insert(revoked_x);
        Ok(EpochTransition {
            kind: TransitionKind::Disenroll,
            old_epoch,
            new_epoch: self.epoch,
            retained_xs,
            retired_xs: vec![revoked_x],
            enrolled_xs: Vec::new(),
        })
    }

    /// Enrolls a point for `owner` at the next unused coordinate.
    pub fn enroll<R: Rng + ?Sized>(
        &mut self,
        owner: &PlayerId,
        contributor_xs: &[u64],
        rng: &mut R,
    ) -> Result<(SharePoint, EpochTransition), DynamicsError> {
        let x_new = self.next_x;
        self.enroll_at(owner, x_new, contributor_xs, rng)
    }

    /// Enrolls a point for `owner` at `x_new`, which must never have been
    /// used by this scheme. Contributors are given by their live x.
    pub fn enroll_at<R: Rng + ?Sized>(
        &mut self,
        owner: &PlayerId,
        x_new: u64,
        contributor_xs: &[u64],
        rng: &mut R,
    ) -> Result<(SharePoint, EpochTransition), DynamicsError> {
        if x_new == 0 {
            return Err(ShamirError::ZeroX.into());
        }
        if x_new >= self.modulus.value() {
            return Err(ShamirError::PoolExhausted {
                needed: x_new,
                available: self.modulus.value() - 1,
            }
            .into());
        }
        if self.live.contains_key(&x_new) || self.retired.contains(&x_new) || x_new < self.next_x {
            return Err(DynamicsError::ReusedX(x_new));
        }
        let contributors = contributor_xs
            .iter()
            .map(|x| {
                self.live
                    .get(x)
                    .map(|s| self.point(*x, s))
                    .ok_or(DynamicsError::UnknownX(*x))
            })
            .collect::<Result<Vec<_>, _>>()?;
        for c in &contributors {
            if !self.verify(c)? {
                return Err(DynamicsError::InconsistentShares(c.x().value()));
            }
        }
        let transcript = enroll_share(
            &contributors,
            self.threshold,
            self.modulus.element(x_new),
            rng,
        )?;

        let mut next = self.live.clone();
        next.insert(
            x_new,
            LiveShare {
                owner: owner.clone(),
                y: transcript.point.y(),
            },
        );
        let old_epoch = self.epoch;
        let retained_xs = self.live.keys().copied().collect();
        self.install(next);
        self.next_x = x_new + 1;
        Ok((
            transcript.point,
            EpochTransition {
                kind: TransitionKind::Enroll,
                old_epoch,
                new_epoch: self.epoch,
                retained_xs,
                retired_xs: Vec::new(),
                enrolled_xs: vec![x_new],
            },
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shamir::{deal, interpolate_at, reconstruct, weighted_deal};
    use rand::seq::IndexedRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn m(p: u64) -> Modulus {
        Modulus::new(p).unwrap()
    }

    fn pts(md: Modulus, pairs: &[(u64, u64)]) -> Vec<SharePoint> {
        pairs
            .iter()
            .map(|&(x, y)| SharePoint::new(md.element(x), md.element(y)).unwrap())
            .collect()
    }

    fn eval(coeffs: &[u64], x: u64, p: u64) -> u64 {
        coeffs.iter().rev().fold(0, |acc, c| (acc * x + c) % p)
    }

    fn example_scheme() -> SchemeState {
        // P(x) = 2x^2 + 7x + 10 over Z_11, one point each for A..E
        let md = m(11);
        let shares = pts(md, &[(1, 8), (2, 10), (3, 5), (4, 4), (5, 7)]);
        let bundles = ["A", "B", "C", "D", "E"]
            .iter()
            .zip(&shares)
            .map(|(id, p)| {
                (
                    PlayerId::from(*id),
                    ShareBundle {
                        player_id: PlayerId::from(*id),
                        points: vec![*p],
                    },
                )
            })
            .collect();
        let commitments = shares
            .iter()
            .map(|s| ShareCommitment::commit(s, 0))
            .collect();
        SchemeState::from_dealing(
            md,
            3,
            WeightedDealing {
                bundles,
                commitments,
            },
        )
    }

    #[test]
    fn zero_refresh_keeps_shares_but_bumps_epoch() {
        let mut s = example_scheme();
        let before = s.live_points();
        let tr = s.refresh_with(&RefreshPolynomial::zero(m(11), 3)).unwrap();
        assert_eq!(s.live_points(), before);
        assert_eq!((tr.old_epoch, tr.new_epoch), (0, 1));
        assert_eq!(s.epoch(), 1);
    }

    #[test]
    fn refresh_worked_example() {
        let md = m(11);
        // oracle: evaluate f + g = 5x^2 + 12x + 10 directly
        let fg = [10, 12, 5];
        let g = RefreshPolynomial::from_coefficients(md, &[5, 3]);
        let fresh = refresh_shares(&pts(md, &[(1, 8), (2, 10), (3, 5)]), &g).unwrap();
        let got: Vec<_> = fresh
            .iter()
            .map(|s| (s.x().value(), s.y().value()))
            .collect();
        assert_eq!(got, vec![(1, 5), (2, 10), (3, 3)]);
        for s in &fresh {
            assert_eq!(s.y().value(), eval(&fg, s.x().value(), 11));
        }
        assert_eq!(reconstruct(&fresh, 3).unwrap().value(), 10);

        let mut scheme = example_scheme();
        scheme.refresh_with(&g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        scheme.refresh(&mut rng).unwrap();
        scheme.refresh(&mut rng).unwrap();
        assert_eq!(reconstruct(&scheme.live_points(), 3).unwrap().value(), 10);
        assert_eq!(scheme.epoch(), 3);
    }

    #[test]
    fn refresh_rejects_tampered_state() {
        let mut s = example_scheme();
        s.live.get_mut(&2).unwrap().y = m(11).element(0);
        let snapshot = s.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(
            s.refresh(&mut rng),
            Err(DynamicsError::InconsistentShares(2))
        );
        assert_eq!(s, snapshot);
    }

    #[test]
    fn refresh_degree_is_checked() {
        let mut s = example_scheme();
        let g = RefreshPolynomial::from_coefficients(m(11), &[1]);
        assert_eq!(
            s.refresh_with(&g),
            Err(DynamicsError::RefreshDegree { t: 3, got: 1 })
        );
    }

    #[test]
    fn enroll_worked_examples() {
        let md = m(11);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c = pts(md, &[(1, 8), (2, 10), (3, 5)]);
        let tr = enroll_share(&c, 3, md.element(6), &mut rng).unwrap();
        assert_eq!(tr.point.y().value(), eval(&[10, 7, 2], 6, 11));
        assert_eq!(tr.point.y().value(), 3);

        let m31 = m(31);
        let c31 = pts(m31, &[(1, 16), (2, 5), (3, 5)]);
        let tr = enroll_share(&c31, 3, m31.element(9), &mut rng).unwrap();
        assert_eq!(tr.point.y().value(), eval(&[7, 19, 21], 9, 31));
    }

    #[test]
    fn enroll_errors() {
        let md = m(11);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c = pts(md, &[(1, 8), (2, 10), (3, 5)]);
        assert_eq!(
            enroll_share(&c, 3, md.element(2), &mut rng),
            Err(DynamicsError::ReusedX(2))
        );
        assert_eq!(
            enroll_share(&c[..2], 3, md.element(6), &mut rng),
            Err(DynamicsError::TooFewContributors { needed: 3, got: 2 })
        );
        let mut scheme = example_scheme();
        let a = PlayerId::from("A");
        assert_eq!(
            scheme.enroll_at(&a, 4, &[1, 2, 3], &mut rng),
            Err(DynamicsError::ReusedX(4))
        );
        assert_eq!(
            scheme.enroll_at(&a, 9, &[1, 2, 8], &mut rng),
            Err(DynamicsError::UnknownX(8))
        );
        scheme.disenroll(5, &mut rng).unwrap();
        assert_eq!(
            scheme.enroll_at(&a, 5, &[1, 2, 3], &mut rng),
            Err(DynamicsError::ReusedX(5))
        );
    }

    #[test]
    fn scheme_enroll_matches_polynomial() {
        let mut scheme = example_scheme();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (pt, tr) = scheme
            .enroll(&PlayerId::from("D"), &[1, 2, 3], &mut rng)
            .unwrap();
        assert_eq!((pt.x().value(), pt.y().value()), (6, 3));
        assert_eq!(tr.enrolled_xs, vec![6]);
        assert_eq!(scheme.weight_of(&PlayerId::from("D")), 2);
        assert_eq!(scheme.epoch(), 1);
        scheme.verify_all().unwrap();
    }

    #[test]
    fn disenroll_worked_example() {
        let md = m(11);
        let g = RefreshPolynomial::from_coefficients(md, &[5, 3]);
        let (fresh, stale) =
            disenroll_shares(&pts(md, &[(1, 8), (2, 10), (3, 5)]), md.element(1), &g).unwrap();
        assert_eq!(stale, pts(md, &[(1, 8)])[0]);
        let mut mixed = fresh.clone();
        mixed.push(stale);
        // oracle: fresh points are on 5x^2+12x+10, the stale one on 2x^2+7x+10
        assert_eq!(reconstruct(&mixed, 3).unwrap().value(), 8);

        let mut scheme = example_scheme();
        let tr = scheme.disenroll_with(1, &g).unwrap();
        assert_eq!(tr.retired_xs, vec![1]);
        assert_eq!(tr.retained_xs, vec![2, 3, 4, 5]);
        assert!(scheme.commitment(1).is_none());
        let live = scheme.live_points();
        for subset in [&live[0..3], &live[1..4], &live[..]] {
            assert_eq!(reconstruct(subset, 3).unwrap().value(), 10);
        }
        // the stale share no longer verifies against anything current
        assert_eq!(scheme.verify(&stale), Err(DynamicsError::UnknownX(1)));
        assert_eq!(
            scheme.disenroll_with(1, &g),
            Err(DynamicsError::UnknownX(1))
        );
    }

    #[test]
    fn revoke_then_reenroll_at_new_x() {
        let mut scheme = example_scheme();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let a = PlayerId::from("A");
        scheme.disenroll(1, &mut rng).unwrap();
        assert_eq!(scheme.weight_of(&a), 0);
        let (pt, _) = scheme.enroll(&a, &[2, 3, 4], &mut rng).unwrap();
        assert_eq!(pt.x().value(), 6);
        assert_eq!(scheme.weight_of(&a), 1);
        assert!(scheme.retired_xs().contains(&1));
        let mut coalition = scheme.points_of(&a);
        coalition.extend(scheme.points_of(&PlayerId::from("B")));
        coalition.extend(scheme.points_of(&PlayerId::from("E")));
        assert_eq!(reconstruct(&coalition, 3).unwrap().value(), 10);
    }

    #[test]
    fn commitments_are_per_epoch() {
        let mut scheme = example_scheme();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let old = scheme.commitment(2).copied().unwrap();
        scheme.refresh(&mut rng).unwrap();
        let current = scheme.live_points()[1];
        assert_eq!(
            verify_share(&current, &old, scheme.epoch()),
            Err(ShamirError::EpochMismatch {
                commitment: 0,
                current: 1
            })
        );
        assert_eq!(scheme.archived_commitments().len(), 5);
        assert!(scheme.verify(&current).unwrap());
    }

    fn random_scheme(rng: &mut ChaCha8Rng, p: u64) -> (SchemeState, FieldElement) {
        let md = m(p);
        let n = rng.random_range(2..=10usize);
        let t = rng.random_range(2..=n);
        let weights = (0..n)
            .map(|i| (PlayerId::new(format!("P{i}")), 1))
            .collect();
        let secret = md.random(rng);
        let dealt = weighted_deal(secret, t, &weights, 1, rng).unwrap();
        (SchemeState::from_dealing(md, t, dealt), secret)
    }

    #[test]
    fn refresh_preserves_secret_randomized() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for trial in 0..1000 {
            let p = [11, 31, 10007][trial % 3];
            let (mut s, secret) = random_scheme(&mut rng, p);
            let before = reconstruct(&s.live_points(), s.threshold()).unwrap();
            s.refresh(&mut rng).unwrap();
            let mut live = s.live_points();
            live.reverse();
            let chosen: Vec<_> = live
                .choose_multiple(&mut rng, s.threshold())
                .copied()
                .collect();
            assert_eq!(reconstruct(&chosen, s.threshold()).unwrap(), before);
            assert_eq!(before, secret);
        }
    }

    #[test]
    fn sub_share_protocol_equals_direct_interpolation() {
        let mut rng = ChaCha8Rng::seed_from_u64(31337);
        let md = m(10007);
        for _ in 0..1000 {
            let t = rng.random_range(1..=8usize);
            let n = t + rng.random_range(0..4usize);
            let xs: Vec<_> = (1..=n as u64).map(|x| md.element(x)).collect();
            let d = deal(md.random(&mut rng), t, &xs, &mut rng).unwrap();
            let contributors: Vec<_> = d.shares.choose_multiple(&mut rng, t).copied().collect();
            let x_new = md.element(rng.random_range(n as u64 + 1..10007));
            let tr = enroll_share(&contributors, t, x_new, &mut rng).unwrap();
            assert_eq!(
                tr.point.y(),
                interpolate_at(&contributors, t, x_new).unwrap()
            );
            assert_eq!(tr.point.y(), interpolate_at(&d.shares, t, x_new).unwrap());
        }
    }

    #[test]
    fn received_pieces_are_uniform() {
        // chi-square on the pieces contributor 0 receives, p = 11
        let md = m(11);
        let mut rng = ChaCha8Rng::seed_from_u64(555);
        let contributors = pts(md, &[(1, 8), (2, 10), (3, 5)]);
        let runs = 10_000;
        let mut counts = vec![[0u32; 11]; 3];
        for _ in 0..runs {
            let tr = enroll_share(&contributors, 3, md.element(6), &mut rng).unwrap();
            for (j, row) in tr.pieces.iter().enumerate() {
                counts[j][row[0].value() as usize] += 1;
            }
        }
        let expected = runs as f64 / 11.0;
        for row in &counts {
            let chi2: f64 = row
                .iter()
                .map(|&c| (c as f64 - expected).powi(2) / expected)
                .sum();
            // df = 10, p = 0.001 critical value 29.59
            assert!(chi2 < 29.59, "chi2 = {chi2}");
        }
    }

    #[test]
    fn balancing_piece_is_uniform() {
        let md = m(11);
        let mut rng = ChaCha8Rng::seed_from_u64(556);
        let contributors = pts(md, &[(1, 8), (2, 10), (3, 5)]);
        let mut counts = [0u32; 11];
        for _ in 0..10_000 {
            let tr = enroll_share(&contributors, 3, md.element(6), &mut rng).unwrap();
            counts[tr.pieces[0][2].value() as usize] += 1;
        }
        let expected = 10_000.0 / 11.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < 29.59, "chi2 = {chi2}");
    }

    #[test]
    fn stale_share_rarely_helps() {
        let md = m(10007);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut hits = 0;
        for _ in 0..1000 {
            let t = rng.random_range(2..=6usize);
            let n = t + 2;
            let xs: Vec<_> = (1..=n as u64).map(|x| md.element(x)).collect();
            let secret = md.random(&mut rng);
            let d = deal(secret, t, &xs, &mut rng).unwrap();
            let revoked = d.shares[rng.random_range(0..n)].x();
            let g = RefreshPolynomial::random(md, t, &mut rng);
            let (fresh, stale) = disenroll_shares(&d.shares, revoked, &g).unwrap();
            let mut mixed: Vec<_> = fresh.choose_multiple(&mut rng, t - 1).copied().collect();
            mixed.push(stale);
            if reconstruct(&mixed, t).unwrap() == secret {
                hits += 1;
            }
        }
        assert!(hits <= 10, "hits = {hits}");
    }

    #[test]
    fn epochs_and_retirements_are_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let md = m(10007);
        let secret = md.element(10);
        let weights = ["A", "B", "C", "D", "E"]
            .iter()
            .map(|p| (PlayerId::from(*p), 1))
            .collect();
        let mut s = SchemeState::from_dealing(
            md,
            3,
            weighted_deal(secret, 3, &weights, 1, &mut rng).unwrap(),
        );
        let mut retired_before = BTreeSet::new();
        for step in 0..30 {
            let epoch = s.epoch();
            let live: Vec<u64> = s.live_xs().into_iter().collect();
            match step % 3 {
                0 => {
                    s.refresh(&mut rng).unwrap();
                }
                1 if live.len() > 3 => {
                    s.disenroll(*live.last().unwrap(), &mut rng).unwrap();
                }
                _ => {
                    s.enroll(&PlayerId::from("Z"), &live[..3], &mut rng)
                        .unwrap();
                }
            }
            assert_eq!(s.epoch(), epoch + 1);
            assert!(s.retired_xs().is_superset(&retired_before));
            assert!(s.retired_xs().is_disjoint(&s.live_xs()));
            retired_before = s.retired_xs().clone();
            assert_eq!(reconstruct(&s.live_points(), 3).unwrap().value(), 10);
        }
    }
}
