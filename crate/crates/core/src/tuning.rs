//! Turning reputation into weights.
//!
//! A [`WeightPolicy`] looks at the player records and proposes a
//! [`TuningPlan`] of unit weight steps. [`apply_plan`] realizes the plan on
//! a [`SchemeState`]: one enrollment per increment, one disenrollment per
//! unit of decrement, then a global refresh. Plans that would leave the
//! honest players below the threshold, or hand corrupted players a
//! qualified set, are rejected before anything changes.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::dynamics::{DynamicsError, EpochTransition, SchemeState};
use crate::shamir::PlayerId;
use crate::trust::{PlayerClass, TrustState};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TuningError {
    #[error("need 1 <= cap < threshold, got cap {cap} with threshold {threshold}")]
    InvalidConstraints { threshold: usize, cap: usize },
    #[error("unknown player {0}")]
    UnknownPlayer(PlayerId),
    #[error("player {0} is both incremented and decremented")]
    ConflictingSteps(PlayerId),
    #[error("player {player} would end at weight {weight}, cap is {cap}")]
    AboveCap {
        player: PlayerId,
        weight: usize,
        cap: usize,
    },
    #[error("player {player} holds {weight} shares, cannot remove {remove}")]
    BelowZero {
        player: PlayerId,
        weight: usize,
        remove: usize,
    },
    #[error("record for {player} says weight {recorded}, scheme has {actual}")]
    WeightOutOfSync {
        player: PlayerId,
        recorded: usize,
        actual: usize,
    },
    #[error("honest weight would drop to {projected}, below threshold {threshold}")]
    WouldBreakAccess { projected: usize, threshold: usize },
    #[error("corrupted weight would reach {projected}, threshold is {threshold}")]
    WouldBreakSafety { projected: usize, threshold: usize },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// Threshold `t` and per-player weight cap `m`, with `1 <= m < t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AccessConstraints {
    threshold: usize,
    cap: usize,
}

impl AccessConstraints {
    pub fn new(threshold: usize, cap: usize) -> Result<Self, TuningError> {
        if cap == 0 || cap >= threshold {
            return Err(TuningError::InvalidConstraints { threshold, cap });
        }
        Ok(AccessConstraints { threshold, cap })
    }

    pub fn threshold(&self) -> usize {
        self.threshold
    }

    pub fn cap(&self) -> usize {
        self.cap
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PlayerStatus {
    Active,
    /// Compromised this period; all shares are revoked by the next plan.
    Corrupted,
    /// Rebooted after corruption, waiting to re-enter with weight 1.
    Retired,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlayerRecord {
    pub player_id: PlayerId,
    pub weight: usize,
    pub trust: TrustState,
    pub class: PlayerClass,
    pub status: PlayerStatus,
}

impl PlayerRecord {
    /// A newcomer: zero trust, class N.
    pub fn newcomer(player_id: PlayerId, weight: usize) -> Self {
        PlayerRecord {
            player_id,
            weight,
            trust: TrustState::initial(),
            class: PlayerClass::New,
            status: PlayerStatus::Active,
        }
    }
}

pub type Records = BTreeMap<PlayerId, PlayerRecord>;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TuningPlan {
    pub increments: BTreeSet<PlayerId>,
    /// Player to number of shares removed.
    pub decrements: BTreeMap<PlayerId, usize>,
    pub unchanged: BTreeSet<PlayerId>,
}

impl TuningPlan {
    pub fn is_empty(&self) -> bool {
        self.increments.is_empty() && self.decrements.is_empty()
    }

    fn delta_for(&self, player: &PlayerId) -> i64 {
        if self.increments.contains(player) {
            1
        } else {
            -(self.decrements.get(player).copied().unwrap_or(0) as i64)
        }
    }
}

fn total_weight<'a>(
    records: &Records,
    members: impl IntoIterator<Item = &'a PlayerId>,
) -> Result<usize, TuningError> {
    members.into_iter().try_fold(0, |acc, id| {
        records
            .get(id)
            .map(|r| acc + r.weight)
            .ok_or_else(|| TuningError::UnknownPlayer(id.clone()))
    })
}

/// Does `coalition` hold at least `t` shares between them?
pub fn check_access<'a>(
    records: &Records,
    coalition: impl IntoIterator<Item = &'a PlayerId>,
    constraints: &AccessConstraints,
) -> Result<bool, TuningError> {
    Ok(total_weight(records, coalition)? >= constraints.threshold)
}

/// Do the `corrupted` players hold fewer than `t` shares between them?
pub fn check_safety<'a>(
    records: &Records,
    corrupted: impl IntoIterator<Item = &'a PlayerId>,
    constraints: &AccessConstraints,
) -> Result<bool, TuningError> {
    Ok(total_weight(records, corrupted)? < constraints.threshold)
}

pub trait WeightPolicy {
    fn plan(&self, records: &Records, constraints: &AccessConstraints) -> TuningPlan;
}

/// Unit steps by trust band: G gains a share up to the cap, B loses one
/// down to zero, N holds. Corrupted players lose everything; retired
/// players re-enter with a single share.
#[derive(Debug, Clone, Copy, Default)]
pub struct ClassBandPolicy;

impl WeightPolicy for ClassBandPolicy {
    fn plan(&self, records: &Records, constraints: &AccessConstraints) -> TuningPlan {
        let mut plan = TuningPlan::default();
        for (id, r) in records {
            let step = match r.status {
                PlayerStatus::Corrupted if r.weight > 0 => -(r.weight as i64),
                PlayerStatus::Corrupted => 0,
                PlayerStatus::Retired if r.weight == 0 => 1,
                PlayerStatus::Retired => 0,
                PlayerStatus::Active => match r.class {
                    PlayerClass::Good if r.weight < constraints.cap => 1,
                    PlayerClass::Bad if r.weight > 0 => -1,
                    _ => 0,
                },
            };
            match step {
                0 => {
                    plan.unchanged.insert(id.clone());
                }
                1 => {
                    plan.increments.insert(id.clone());
                }
                s => {
                    plan.decrements.insert(id.clone(), (-s) as usize);
                }
            }
        }
        plan
    }
}

/// Weights after `plan`, validated against cap and zero floor.
pub fn project_weights(
    records: &Records,
    plan: &TuningPlan,
    constraints: &AccessConstraints,
) -> Result<BTreeMap<PlayerId, usize>, TuningError> {
    for id in plan.increments.iter().chain(plan.decrements.keys()) {
        if !records.contains_key(id) {
            return Err(TuningError::UnknownPlayer(id.clone()));
        }
    }
    if let Some(id) = plan
        .increments
        .iter()
        .find(|id| plan.decrements.contains_key(*id))
    {
        return Err(TuningError::ConflictingSteps(id.clone()));
    }
    let mut out = BTreeMap::new();
    for (id, r) in records {
        let projected = r.weight as i64 + plan.delta_for(id);
        if projected < 0 {
            return Err(TuningError::BelowZero {
                player: id.clone(),
                weight: r.weight,
                remove: plan.decrements[id],
            });
        }
        let projected = projected as usize;
        if projected > constraints.cap {
            return Err(TuningError::AboveCap {
                player: id.clone(),
                weight: projected,
                cap: constraints.cap,
            });
        }
        out.insert(id.clone(), projected);
    }
    Ok(out)
}

/// New scheme and records after a plan, plus every epoch change it made.
#[derive(Debug, Clone)]
pub struct TuningOutcome {
    pub scheme: SchemeState,
    pub records: Records,
    pub transitions: Vec<EpochTransition>,
}

/// Picks `t` live points for an enrollment, walking non-corrupted players
/// from highest to lowest trust (ties by id).
fn pick_contributors(scheme: &SchemeState, records: &Records) -> Vec<u64> {
    let mut ranked: Vec<&PlayerRecord> = records
        .values()
        .filter(|r| r.status != PlayerStatus::Corrupted)
        .collect();
    ranked.sort_by(|a, b| {
        b.trust
            .value()
            .total_cmp(&a.trust.value())
            .then_with(|| a.player_id.cmp(&b.player_id))
    });
    ranked
        .iter()
        .flat_map(|r| scheme.points_of(&r.player_id))
        .map(|p| p.x().value())
        .take(scheme.threshold())
        .collect()
}

/// Realizes `plan` on a copy of `scheme`.
///
/// Enrollments run first, while every contributor share is still on the
/// current polynomial; revocations follow, and a global refresh closes the
/// round. Corrupted players come out retired. Any error leaves the inputs
/// untouched since only the copy is modified.
pub fn apply_plan<R: Rng + ?Sized>(
    scheme: &SchemeState,
    records: &Records,
    plan: &TuningPlan,
    constraints: &AccessConstraints,
    rng: &mut R,
) -> Result<TuningOutcome, TuningError> {
    for (id, r) in records {
        let actual = scheme.weight_of(id);
        if actual != r.weight {
            return Err(TuningError::WeightOutOfSync {
                player: id.clone(),
                recorded: r.weight,
                actual,
            });
        }
    }
    let projected = project_weights(records, plan, constraints)?;
    let corrupted = |id: &PlayerId| records[id].status == PlayerStatus::Corrupted;
    let honest: usize = projected
        .iter()
        .filter(|(id, _)| !corrupted(id))
        .map(|(_, w)| w)
        .sum();
    if honest < constraints.threshold {
        return Err(TuningError::WouldBreakAccess {
            projected: honest,
            threshold: constraints.threshold,
        });
    }
    let bad: usize = projected
        .iter()
        .filter(|(id, _)| corrupted(id))
        .map(|(_, w)| w)
        .sum();
    if bad >= constraints.threshold {
        return Err(TuningError::WouldBreakSafety {
            projected: bad,
            threshold: constraints.threshold,
        });
    }

    let mut next = scheme.clone();
    let mut transitions = Vec::new();
    for id in &plan.increments {
        let contributors = pick_contributors(&next, records);
        let (_, tr) = next.enroll(id, &contributors, rng)?;
        transitions.push(tr);
    }
    for (id, &count) in &plan.decrements {
        // highest x first
        let mut xs: Vec<u64> = next.points_of(id).iter().map(|p| p.x().value()).collect();
        xs.reverse();
        for x in xs.into_iter().take(count) {
            transitions.push(next.disenroll(x, rng)?);
        }
    }
    transitions.push(next.refresh(rng)?);

    let mut new_records = records.clone();
    for (id, r) in new_records.iter_mut() {
        r.weight = next.weight_of(id);
        r.status = match r.status {
            PlayerStatus::Corrupted => PlayerStatus::Retired,
            PlayerStatus::Retired if r.weight > 0 => PlayerStatus::Active,
            s => s,
        };
    }
    debug_assert_eq!(
        new_records
            .iter()
            .map(|(id, r)| (id.clone(), r.weight))
            .collect::<BTreeMap<_, _>>(),
        projected
    );
    Ok(TuningOutcome {
        scheme: next,
        records: new_records,
        transitions,
    })
}
