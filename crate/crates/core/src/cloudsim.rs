//! Discrete-period cloud simulation.
//!
//! A dealer splits a secret among storage providers by weight and leaves.
//! Each period every provider either cooperates (`C`, answers before the
//! deadline), defects (`D`, unavailable or late) or gets corrupted (`X`).
//! Servers pool the timely shares to run their task, trust is updated by
//! the social rule, and weights are retuned through share dynamics.
//!
//! Randomness comes from two ChaCha8 streams of the same seed: one drives
//! provider behavior, the other the protocol (secret, polynomials). Each
//! provider consumes exactly three behavior draws per period in both
//! sampled and replay mode, so replaying a recorded trace reproduces the
//! run.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{DynamicsError, EpochTransition, SchemeState};
use crate::field::{FieldElement, FieldError, Modulus};
use crate::shamir::{reconstruct_checked, weighted_deal, PlayerId, ShamirError, SharePoint};
use crate::social::{social_update, ActionVector, ScalingFactors, SocialError};
use crate::trust::{classify, PlayerClass, TrustError, TrustParams};
use crate::tuning::{
    apply_plan, check_safety, AccessConstraints, ClassBandPolicy, PlayerRecord, PlayerStatus,
    Records, TuningError, TuningPlan, WeightPolicy,
};

const BEHAVIOR_STREAM: u64 = 0;
const PROTOCOL_STREAM: u64 = 1;
const SWEEP_STREAM_BASE: u64 = 1 << 32;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Shamir(#[from] ShamirError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Tuning(#[from] TuningError),
    #[error(transparent)]
    Trust(#[from] TrustError),
    #[error(transparent)]
    Social(#[from] SocialError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

type Result<T, E = SimError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    C,
    D,
    X,
}

impl Action {
    pub fn letter(self) -> char {
        match self {
            Action::C => 'C',
            Action::D => 'D',
            Action::X => 'X',
        }
    }

    pub fn from_letter(c: char) -> Option<Self> {
        match c {
            'C' | 'c' => Some(Action::C),
            'D' | 'd' => Some(Action::D),
            'X' | 'x' => Some(Action::X),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Latency {
    pub base_ms: f64,
    /// Uniform extra delay in `[0, jitter_ms)`.
    #[serde(default)]
    pub jitter_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderProfile {
    pub id: PlayerId,
    pub initial_weight: usize,
    pub availability_prob: f64,
    pub latency: Latency,
    #[serde(default)]
    pub corruption_prob: f64,
    /// Cost per held share per period.
    #[serde(default)]
    pub unit_cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlaThresholds {
    pub max_hourly_cost: f64,
    pub max_avg_rt_ms: f64,
    pub max_rt_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Mode {
    #[default]
    Sampled,
    /// One string per period, one `C`/`D`/`X` letter per provider in
    /// config order.
    Trace { actions: Vec<String> },
}

fn default_modulus() -> Modulus {
    Modulus::mersenne61()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default = "default_modulus")]
    pub modulus: Modulus,
    pub threshold: usize,
    pub max_weight: usize,
    #[serde(default)]
    pub trust: TrustParams,
    pub deadline_ms: f64,
    /// Horizon in sampled mode. Trace mode runs for the trace length.
    #[serde(default)]
    pub periods: u64,
    #[serde(default)]
    pub seed: u64,
    pub sla: SlaThresholds,
    pub providers: Vec<ProviderProfile>,
    #[serde(default)]
    pub mode: Mode,
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn provider_ids(&self) -> Vec<PlayerId> {
        self.providers.iter().map(|p| p.id.clone()).collect()
    }

    /// Switches to replay of `trace`, checking it names the same providers.
    pub fn with_trace(mut self, trace: &Trace) -> Result<Self> {
        if trace.providers != self.provider_ids() {
            return Err(SimError::InvalidTrace(
                "provider list does not match the config".into(),
            ));
        }
        self.mode = Mode::Trace {
            actions: trace.actions.clone(),
        };
        Ok(self)
    }
}

/// A recorded action matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trace {
    pub providers: Vec<PlayerId>,
    pub actions: Vec<String>,
}

impl Trace {
    pub fn from_reports(config: &SimConfig, reports: &[PeriodReport]) -> Self {
        Trace {
            providers: config.provider_ids(),
            actions: reports
                .iter()
                .map(|r| r.players.iter().map(|p| p.action.letter()).collect())
                .collect(),
        }
    }
}

fn parse_trace(actions: &[String], n: usize) -> Result<Vec<Vec<Action>>> {
    actions
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let parsed = row
                .chars()
                .map(|c| {
                    Action::from_letter(c).ok_or_else(|| {
                        SimError::InvalidTrace(format!("period {}: bad action {c:?}", i + 1))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if parsed.len() != n {
                return Err(SimError::InvalidTrace(format!(
                    "period {} has {} actions for {n} providers",
                    i + 1,
                    parsed.len()
                )));
            }
            Ok(parsed)
        })
        .collect()
}

fn validate(config: &SimConfig) -> Result<AccessConstraints> {
    let bad = |m: String| Err(SimError::InvalidConfig(m));
    let constraints = AccessConstraints::new(config.threshold, config.max_weight)
        .map_err(|e| SimError::InvalidConfig(e.to_string()))?;
    if config.providers.is_empty() {
        return bad("no providers".into());
    }
    let mut ids = BTreeSet::new();
    for p in &config.providers {
        if !ids.insert(&p.id) {
            return bad(format!("duplicate provider {}", p.id));
        }
        let prob = |v: f64| (0.0..=1.0).contains(&v);
        if !prob(p.availability_prob) || !prob(p.corruption_prob) {
            return bad(format!("{}: probabilities must lie in [0, 1]", p.id));
        }
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !nonneg(p.latency.base_ms) || !nonneg(p.latency.jitter_ms) || !nonneg(p.unit_cost) {
            return bad(format!(
                "{}: latency and cost must be finite and nonnegative",
                p.id
            ));
        }
        if p.initial_weight > config.max_weight {
            return bad(format!(
                "{}: weight {} exceeds max_weight {}",
                p.id, p.initial_weight, config.max_weight
            ));
        }
    }
    let total: usize = config.providers.iter().map(|p| p.initial_weight).sum();
    if total < config.threshold {
        return bad(format!(
            "total weight {total} is below threshold {}",
            config.threshold
        ));
    }
    let sla = &config.sla;
    if [
        config.deadline_ms,
        sla.max_hourly_cost,
        sla.max_avg_rt_ms,
        sla.max_rt_ms,
    ]
    .iter()
    .any(|v| v.is_nan() || *v < 0.0)
    {
        return bad("deadline and SLA thresholds must be nonnegative".into());
    }
    Ok(constraints)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlayerRow {
    pub player: PlayerId,
    pub action: Action,
    pub trust: f64,
    pub class: PlayerClass,
    pub weight: usize,
    pub status: PlayerStatus,
    pub rt_ms: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Reconstruction {
    pub attempted: bool,
    pub success: bool,
    pub matches_secret: bool,
    pub responders: Vec<PlayerId>,
    pub responder_weight: usize,
    pub rejected_shares: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct RtStats {
    pub avg_ms: Option<f64>,
    pub max_ms: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SlaViolations {
    pub hourly_cost: bool,
    pub avg_rt: bool,
    pub max_rt: bool,
}

impl SlaViolations {
    pub fn any(&self) -> bool {
        self.hourly_cost || self.avg_rt || self.max_rt
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanOutcome {
    Applied,
    /// The full plan broke a check; only revocations and re-entries ran.
    MandatoryOnly,
    RevocationsOnly,
    /// Nothing could be applied; the run stops.
    Failed,
    /// The period aborted before tuning.
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodReport {
    pub period: u64,
    /// Provider rows in config order, as of the end of the period.
    pub players: Vec<PlayerRow>,
    pub delta: Option<usize>,
    pub n: usize,
    pub factors: Option<ScalingFactors>,
    pub trust_clamped: usize,
    pub reconstruction: Reconstruction,
    pub rt: RtStats,
    /// Priced on the weights held during the period.
    pub hourly_cost: f64,
    pub sla_violations: SlaViolations,
    pub plan: TuningPlan,
    pub plan_outcome: PlanOutcome,
    pub safety_ok: bool,
    pub access_ok: bool,
    pub epoch: u64,
    pub epoch_transitions: Vec<EpochTransition>,
    pub aborted: Option<String>,
}

/// A running simulation. The dealt secret is kept only to check
/// reconstructions against.
#[derive(Debug, Clone)]
pub struct Simulation {
    config: SimConfig,
    constraints: AccessConstraints,
    order: Vec<PlayerId>,
    scheme: SchemeState,
    records: Records,
    script: Option<Vec<Vec<Action>>>,
    behavior: ChaCha8Rng,
    protocol: ChaCha8Rng,
    secret: FieldElement,
    period: u64,
    horizon: u64,
    halted: bool,
}

struct Draw {
    action: Action,
    rt_ms: Option<f64>,
}

impl Simulation {
    pub fn init(config: SimConfig) -> Result<Self> {
        let constraints = validate(&config)?;
        let order = config.provider_ids();
        let script = match &config.mode {
            Mode::Sampled => None,
            Mode::Trace { actions } => Some(parse_trace(actions, order.len())?),
        };
        let horizon = script.as_ref().map_or(config.periods, |s| s.len() as u64);

        let mut behavior = ChaCha8Rng::seed_from_u64(config.seed);
        behavior.set_stream(BEHAVIOR_STREAM);
        let mut protocol = ChaCha8Rng::seed_from_u64(config.seed);
        protocol.set_stream(PROTOCOL_STREAM);

        let secret = config.modulus.random(&mut protocol);
        let weights: BTreeMap<PlayerId, usize> = config
            .providers
            .iter()
            .map(|p| (p.id.clone(), p.initial_weight))
            .collect();
        let dealing = weighted_deal(
            secret,
            config.threshold,
            &weights,
            config.max_weight,
            &mut protocol,
        )?;
        let scheme = SchemeState::from_dealing(config.modulus, config.threshold, dealing);
        let records = weights
            .iter()
            .map(|(id, &w)| (id.clone(), PlayerRecord::newcomer(id.clone(), w)))
            .collect();
        Ok(Simulation {
            config,
            constraints,
            order,
            scheme,
            records,
            script,
            behavior,
            protocol,
            secret,
            period: 0,
            horizon,
            halted: false,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn period(&self) -> u64 {
        self.period
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn scheme(&self) -> &SchemeState {
        &self.scheme
    }

    pub fn records(&self) -> &Records {
        &self.records
    }

    pub fn is_finished(&self) -> bool {
        self.halted || self.period >= self.horizon
    }

    fn draw(&mut self, index: usize) -> Draw {
        let profile = &self.config.providers[index];
        let u_corrupt: f64 = self.behavior.random();
        let u_avail: f64 = self.behavior.random();
        let u_lat: f64 = self.behavior.random();
        let latency = profile.latency.base_ms + profile.latency.jitter_ms * u_lat;
        let available = u_avail < profile.availability_prob;
        let late = latency > self.config.deadline_ms;
        let scripted = self.script.as_ref().map(|s| s[self.period as usize][index]);
        match scripted {
            Some(Action::C) => Draw {
                action: Action::C,
                rt_ms: Some(latency),
            },
            Some(Action::D) => Draw {
                action: Action::D,
                rt_ms: (available && late).then_some(latency),
            },
            Some(Action::X) => Draw {
                action: Action::X,
                rt_ms: None,
            },
            None if u_corrupt < profile.corruption_prob => Draw {
                action: Action::X,
                rt_ms: None,
            },
            None if available => Draw {
                action: if late { Action::D } else { Action::C },
                rt_ms: Some(latency),
            },
            None => Draw {
                action: Action::D,
                rt_ms: None,
            },
        }
    }

    /// Runs one period. Returns `None` once the horizon is reached or the
    /// run has aborted.
    pub fn step(&mut self) -> Result<Option<PeriodReport>> {
        if self.is_finished() {
            return Ok(None);
        }
        let draws: Vec<Draw> = (0..self.order.len()).map(|i| self.draw(i)).collect();
        self.period += 1;
        let start_weights: Vec<usize> = self
            .order
            .iter()
            .map(|id| self.records[id].weight)
            .collect();
        let params = self.config.trust;
        let t = self.constraints.threshold();

        let mut recon = Reconstruction::default();
        let mut corrupted = Vec::new();
        for (id, d) in self.order.iter().zip(&draws) {
            if d.action != Action::X {
                continue;
            }
            let rec = self.records.get_mut(id).expect("record per provider");
            rec.status = PlayerStatus::Corrupted;
            rec.trust = rec.trust.reset();
            rec.class = classify(0.0, &params)?;
            for p in self.scheme.points_of(id) {
                let y = p.y().checked_add(self.config.modulus.one())?;
                let tampered = SharePoint::new(p.x(), y)?;
                if !self.scheme.verify(&tampered)? {
                    recon.rejected_shares += 1;
                }
            }
            corrupted.push(id.clone());
        }
        let safety_ok = check_safety(&self.records, &corrupted, &self.constraints)?;

        let mut report = PeriodReport {
            period: self.period,
            players: Vec::new(),
            delta: None,
            n: 0,
            factors: None,
            trust_clamped: 0,
            reconstruction: recon,
            rt: RtStats::default(),
            hourly_cost: 0.0,
            sla_violations: SlaViolations::default(),
            plan: TuningPlan::default(),
            plan_outcome: PlanOutcome::Skipped,
            safety_ok,
            access_ok: true,
            epoch: self.scheme.epoch(),
            epoch_transitions: Vec::new(),
            aborted: None,
        };

        if safety_ok {
            self.reconstruct(&draws, &mut report.reconstruction)?;
            self.update_trust(&draws, &mut report)?;
            self.tune(&mut report)?;
        } else {
            self.halted = true;
            report.aborted = Some("corrupted providers hold a qualified set".into());
        }

        let rts: Vec<f64> = draws.iter().filter_map(|d| d.rt_ms).collect();
        if !rts.is_empty() {
            report.rt.avg_ms = Some(rts.iter().sum::<f64>() / rts.len() as f64);
            report.rt.max_ms = rts.iter().copied().reduce(f64::max);
        }
        report.hourly_cost = self
            .config
            .providers
            .iter()
            .zip(&start_weights)
            .map(|(p, &w)| p.unit_cost * w as f64)
            .sum();
        let sla = &self.config.sla;
        report.sla_violations = SlaViolations {
            hourly_cost: report.hourly_cost > sla.max_hourly_cost,
            avg_rt: report.rt.avg_ms.is_some_and(|v| v > sla.max_avg_rt_ms),
            max_rt: report.rt.max_ms.is_some_and(|v| v > sla.max_rt_ms),
        };
        report.access_ok = self
            .records
            .values()
            .filter(|r| r.status != PlayerStatus::Corrupted)
            .map(|r| r.weight)
            .sum::<usize>()
            >= t;
        report.epoch = self.scheme.epoch();
        report.players = self
            .order
            .iter()
            .zip(&draws)
            .map(|(id, d)| {
                let r = &self.records[id];
                PlayerRow {
                    player: id.clone(),
                    action: d.action,
                    trust: r.trust.value(),
                    class: r.class,
                    weight: r.weight,
                    status: r.status,
                    rt_ms: d.rt_ms,
                }
            })
            .collect();
        Ok(Some(report))
    }

    fn reconstruct(&self, draws: &[Draw], out: &mut Reconstruction) -> Result<()> {
        let mut pooled = Vec::new();
        for (id, d) in self.order.iter().zip(draws) {
            if d.action != Action::C {
                continue;
            }
            out.responders.push(id.clone());
            out.responder_weight += self.records[id].weight;
            for p in self.scheme.points_of(id) {
                if self.scheme.verify(&p)? {
                    pooled.push(p);
                } else {
                    out.rejected_shares += 1;
                }
            }
        }
        let t = self.constraints.threshold();
        out.attempted = out.responder_weight >= t;
        if pooled.len() >= t {
            if let Ok(value) = reconstruct_checked(&pooled, t) {
                out.success = true;
                out.matches_secret = value == self.secret;
            }
        }
        // working copies are erased once the task is done
        pooled.clear();
        Ok(())
    }

    fn update_trust(&mut self, draws: &[Draw], report: &mut PeriodReport) -> Result<()> {
        let active: Vec<(&PlayerId, bool)> = self
            .order
            .iter()
            .zip(draws)
            .filter(|(_, d)| d.action != Action::X)
            .map(|(id, d)| (id, d.action == Action::C))
            .collect();
        report.n = active.len();
        if active.is_empty() {
            return Ok(());
        }
        let states: Vec<_> = active
            .iter()
            .map(|(id, _)| self.records[*id].trust)
            .collect();
        let actions = ActionVector::new(active.iter().map(|&(_, c)| c).collect())?;
        let update = social_update(&states, &actions, &self.config.trust)?;
        for ((id, _), state) in active.iter().zip(&update.states) {
            let rec = self.records.get_mut(*id).expect("record per provider");
            rec.trust = *state;
            rec.class = classify(state.value(), &self.config.trust)?;
        }
        report.delta = Some(update.delta);
        report.factors = Some(update.factors);
        report.trust_clamped = update.clamped;
        Ok(())
    }

    fn tune(&mut self, report: &mut PeriodReport) -> Result<()> {
        let full = ClassBandPolicy.plan(&self.records, &self.constraints);
        let status = |id: &PlayerId| self.records[id].status;
        let mandatory = TuningPlan {
            increments: full
                .increments
                .iter()
                .filter(|id| status(id) == PlayerStatus::Retired)
                .cloned()
                .collect(),
            decrements: full
                .decrements
                .iter()
                .filter(|(id, _)| status(id) == PlayerStatus::Corrupted)
                .map(|(id, &k)| (id.clone(), k))
                .collect(),
            unchanged: BTreeSet::new(),
        };
        let revocations = TuningPlan {
            increments: BTreeSet::new(),
            ..mandatory.clone()
        };
        let attempts = [
            (PlanOutcome::Applied, full.clone()),
            (PlanOutcome::MandatoryOnly, mandatory),
            (PlanOutcome::RevocationsOnly, revocations),
        ];
        report.plan = full;
        let mut last_err = None;
        for (outcome, plan) in attempts {
            match apply_plan(
                &self.scheme,
                &self.records,
                &plan,
                &self.constraints,
                &mut self.protocol,
            ) {
                Ok(done) => {
                    self.scheme = done.scheme;
                    self.records = done.records;
                    report.epoch_transitions = done.transitions;
                    report.plan_outcome = outcome;
                    return Ok(());
                }
                Err(e) => last_err = Some(e),
            }
        }
        self.halted = true;
        report.plan_outcome = PlanOutcome::Failed;
        report.aborted = last_err.map(|e| e.to_string());
        Ok(())
    }
}

/// Runs a config to its horizon (or abort).
pub fn run(config: SimConfig) -> Result<Vec<PeriodReport>> {
    let mut sim = Simulation::init(config)?;
    let mut reports = Vec::new();
    while let Some(r) = sim.step()? {
        reports.push(r);
    }
    Ok(reports)
}

/// Seed of sweep member `index`.
pub fn sweep_seed(seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(SWEEP_STREAM_BASE + index);
    rng.next_u64()
}

/// Runs `count` independent copies of `config` in parallel, each with its
/// own derived seed. Results come back in index order.
pub fn run_sweep(config: &SimConfig, count: usize) -> Vec<Result<Vec<PeriodReport>>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..count)
            .map(|i| {
                let mut c = config.clone();
                c.seed = sweep_seed(config.seed, i as u64);
                scope.spawn(move || run(c))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    })
}

pub const CSV_HEADER: [&str; 7] = [
    "period", "player", "action", "trust", "class", "weight", "rt_ms",
];

/// One row per provider per period.
pub fn write_csv<W: Write>(reports: &[PeriodReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in reports {
        for p in &r.players {
            w.write_record([
                r.period.to_string(),
                p.player.to_string(),
                p.action.letter().to_string(),
                p.trust.to_string(),
                p.class.letter().to_string(),
                p.weight.to_string(),
                p.rt_ms.map(|v| v.to_string()).unwrap_or_default(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(reports: &[PeriodReport], mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, reports)?;
    out.write_all(b"\n")?;
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RunSummary {
    pub periods: usize,
    pub reconstructions_ok: usize,
    pub reconstructions_failed: usize,
    pub sla_violation_periods: usize,
    pub aborted: bool,
}

impl RunSummary {
    pub fn of(reports: &[PeriodReport]) -> Self {
        let ok = reports
            .iter()
            .filter(|r| r.reconstruction.success && r.reconstruction.matches_secret)
            .count();
        RunSummary {
            periods: reports.len(),
            reconstructions_ok: ok,
            reconstructions_failed: reports.len() - ok,
            sla_violation_periods: reports.iter().filter(|r| r.sla_violations.any()).count(),
            aborted: reports.iter().any(|r| r.aborted.is_some()),
        }
    }
}
