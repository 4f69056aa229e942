//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each,
//! and exits nonzero if any failed.

use std::io::Write;
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use socialshare::cloudsim::{
    self, Action, Latency, Mode, ProviderProfile, SimConfig, Simulation, SlaThresholds,
};
use socialshare::dynamics::{disenroll_shares, enroll_share, refresh_shares, RefreshPolynomial};
use socialshare::field::Modulus;
use socialshare::shamir::{deal, deal_with_coefficients, interpolate_at, reconstruct, SharePoint};
use socialshare::social::{social_update, ActionVector, ScalingFactors};
use socialshare::trust::{
    mu, mu_prime, reputation_from_pairwise, PlayerClass, TrustParams, TrustState,
};
use socialshare::tuning::PlayerStatus;

// ---- independent oracles -------------------------------------------------

fn o_mul(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

fn o_pow(mut b: u64, mut e: u64, p: u64) -> u64 {
    let mut acc = 1 % p;
    b %= p;
    while e > 0 {
        if e & 1 == 1 {
            acc = o_mul(acc, b, p);
        }
        b = o_mul(b, b, p);
        e >>= 1;
    }
    acc
}

/// Fermat inverse, valid for prime `p`.
fn o_inv(a: u64, p: u64) -> u64 {
    o_pow(a, p - 2, p)
}

/// Direct power-sum evaluation, no Horner.
fn o_eval(coeffs: &[u64], x: u64, p: u64) -> u64 {
    coeffs.iter().enumerate().fold(0, |acc, (i, &c)| {
        (acc + o_mul(c % p, o_pow(x, i as u64, p), p)) % p
    })
}

/// Lagrange value at `at` through `pts`.
fn o_lagrange(pts: &[(u64, u64)], at: u64, p: u64) -> u64 {
    let mut total = 0;
    for (j, &(xj, yj)) in pts.iter().enumerate() {
        let (mut num, mut den) = (1u64, 1u64);
        for (k, &(xk, _)) in pts.iter().enumerate() {
            if k != j {
                num = o_mul(num, (at + p - xk % p) % p, p);
                den = o_mul(den, (xj + p - xk) % p, p);
            }
        }
        total = (total + o_mul(yj, o_mul(num, o_inv(den, p), p), p)) % p;
    }
    total
}

fn o_line(p1: (f64, f64), p2: (f64, f64), x: f64) -> f64 {
    p1.1 + (p2.1 - p1.1) * (x - p1.0) / (p2.0 - p1.0)
}

/// Cooperation step built straight from the anchor points.
fn o_mu(x: f64, a: f64, b: f64, e: f64, eta: f64, th: f64, k: f64) -> f64 {
    if x < b {
        o_line((-1.0, eta), (b, th), x)
    } else if x <= a {
        th
    } else if x <= 1.0 - e {
        o_line((a, th), (1.0 - e, k), x)
    } else {
        k / e * (1.0 - x)
    }
}

fn o_mu_prime(x: f64, a: f64, b: f64, e: f64, eta: f64, th: f64, k: f64) -> f64 {
    if x < e - 1.0 {
        k / e * (x + 1.0)
    } else if x < b {
        o_line((e - 1.0, k), (b, th), x)
    } else if x <= a {
        th
    } else {
        o_line((a, th), (1.0, eta), x)
    }
}

fn points(shares: &[SharePoint]) -> Vec<(u64, u64)> {
    shares
        .iter()
        .map(|s| (s.x().value(), s.y().value()))
        .collect()
}

// ---- criteria ------------------------------------------------------------

fn small_dealing_reproduction() {
    let p = Modulus::new(11).unwrap();
    let coeffs = [10, 7, 2];
    let xs: Vec<_> = (1..=5).map(|x| p.element(x)).collect();
    let shares = deal_with_coefficients(&coeffs.map(|c| p.element(c)), &xs)
        .unwrap()
        .shares;
    let ys: Vec<u64> = shares.iter().map(|s| s.y().value()).collect();
    assert_eq!(ys, [8, 10, 5, 4, 7]);
    for x in 1..=5 {
        assert_eq!(ys[x as usize - 1], o_eval(&coeffs, x, 11));
    }
    let subset: Vec<_> = [(1, 8), (2, 10), (3, 5)]
        .iter()
        .map(|&(x, y)| SharePoint::new(p.element(x), p.element(y)).unwrap())
        .collect();
    assert_eq!(reconstruct(&subset, 3).unwrap().value(), 10);
    assert_eq!(o_lagrange(&points(&subset), 0, 11), 10);
}

fn larger_dealing_reproduction() {
    let p = Modulus::new(31).unwrap();
    let coeffs = [7, 19, 21];
    let xs: Vec<_> = (1..=8).map(|x| p.element(x)).collect();
    let shares = deal_with_coefficients(&coeffs.map(|c| p.element(c)), &xs)
        .unwrap()
        .shares;
    let ys: Vec<u64> = shares.iter().map(|s| s.y().value()).collect();
    assert_eq!(ys, [16, 5, 5, 16, 7, 9, 22, 15]);
    for x in 1..=8 {
        assert_eq!(ys[x as usize - 1], o_eval(&coeffs, x, 31));
    }
    for subset in [[(1, 16), (2, 5), (3, 5)], [(1, 16), (5, 7), (7, 22)]] {
        let pts: Vec<_> = subset
            .iter()
            .map(|&(x, y)| SharePoint::new(p.element(x), p.element(y)).unwrap())
            .collect();
        assert_eq!(reconstruct(&pts, 3).unwrap().value(), 7);
        assert_eq!(o_lagrange(&subset, 0, 31), 7);
    }
}

fn perfect_secrecy_enumeration() {
    const P: u64 = 11;
    let p = Modulus::new(P).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let xs: Vec<_> = (1..=10).map(|x| p.element(x)).collect();
    for secret in [0, 4, 10] {
        let shares = deal(p.element(secret), 3, &xs, &mut rng).unwrap().shares;
        for (i, a) in shares.iter().enumerate() {
            for b in &shares[i + 1..] {
                let mut per_secret = [0usize; P as usize];
                let mut total = 0;
                for c0 in 0..P {
                    for c1 in 0..P {
                        for c2 in 0..P {
                            let c = [c0, c1, c2];
                            if o_eval(&c, a.x().value(), P) == a.y().value()
                                && o_eval(&c, b.x().value(), P) == b.y().value()
                            {
                                per_secret[c0 as usize] += 1;
                                total += 1;
                            }
                        }
                    }
                }
                assert_eq!(total, 11);
                assert!(per_secret.iter().all(|&n| n == 1), "{per_secret:?}");
            }
        }
    }
}

fn trust_function_anchors() {
    let p = TrustParams::default();
    let (a, b, e, eta, th, k) = (0.3, -0.3, 0.1, 0.01, 0.05, 0.09);
    assert_eq!((p.alpha(), p.beta(), p.epsilon()), (a, b, e));
    assert_eq!((p.eta(), p.theta(), p.kappa()), (eta, th, k));
    let close = |u: f64, v: f64| (u - v).abs() <= 1e-12;

    assert!(close(mu(-1.0, &p).unwrap(), eta));
    assert!(close(mu(b, &p).unwrap(), th));
    assert!(close(mu(a, &p).unwrap(), th));
    assert!(close(mu(1.0 - e, &p).unwrap(), k));
    assert!(close(mu(1.0, &p).unwrap(), 0.0));
    assert!(close(mu_prime(-1.0, &p).unwrap(), 0.0));
    assert!(close(mu_prime(e - 1.0, &p).unwrap(), k));
    assert!(close(mu_prime(b, &p).unwrap(), th));
    assert!(close(mu_prime(a, &p).unwrap(), th));
    assert!(close(mu_prime(1.0, &p).unwrap(), eta));

    // one-sided limits at every piece boundary
    for (f, bounds) in [
        (mu as fn(f64, &TrustParams) -> _, [b, a, 1.0 - e]),
        (mu_prime, [e - 1.0, b, a]),
    ] {
        for x0 in bounds {
            let h = 1e-13;
            let left = f(x0 - h, &p).unwrap();
            let right = f(x0 + h, &p).unwrap();
            let at = f(x0, &p).unwrap();
            assert!(
                (left - at).abs() <= 1e-12 && (right - at).abs() <= 1e-12,
                "gap at {x0}"
            );
        }
    }
    for i in 0..=2000 {
        let x = -1.0 + i as f64 / 1000.0;
        let x = x.clamp(-1.0, 1.0);
        assert!(
            close(mu(x, &p).unwrap(), o_mu(x, a, b, e, eta, th, k)),
            "mu({x})"
        );
        assert!(
            close(mu_prime(x, &p).unwrap(), o_mu_prime(x, a, b, e, eta, th, k)),
            "mu'({x})"
        );
    }
}

fn reputation_average() {
    assert_eq!(reputation_from_pairwise(&[0.4, 0.5, 0.6]).unwrap(), 0.5);
}

fn scaling_table() {
    let rows: [(usize, Option<f64>, Option<f64>); 5] = [
        (4, Some(0.0), None),
        (3, Some(0.25), Some(0.75)),
        (2, Some(0.5), Some(0.5)),
        (1, Some(0.75), Some(0.25)),
        (0, None, Some(0.0)),
    ];
    for (d, reward, penalty) in rows {
        let f = ScalingFactors::new(d, 4);
        if let Some(r) = reward {
            assert_eq!(f.reward, r);
            assert_eq!(f.reward, (4 - d) as f64 / 4.0);
        }
        if let Some(q) = penalty {
            assert_eq!(f.penalty, q);
        }
    }
    let params = TrustParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..200 {
        let states: Vec<_> = (0..4)
            .map(|_| TrustState::new(rng.random_range(-1.0..=1.0), 0).unwrap())
            .collect();
        for pattern in ["CCCC", "DDDD"] {
            let out = social_update(
                &states,
                &ActionVector::from_pattern(pattern).unwrap(),
                &params,
            )
            .unwrap();
            for (s, o) in states.iter().zip(&out.states) {
                assert_eq!(s.value(), o.value());
            }
        }
    }
}

fn random_params(rng: &mut ChaCha8Rng) -> TrustParams {
    loop {
        let e = rng.random_range(0.01..0.5);
        let b = rng.random_range(e - 1.0..1.0 - e);
        let a = rng.random_range(b..1.0 - e);
        let k = rng.random_range(0.0..=e);
        let th = rng.random_range(0.0..k);
        let eta = rng.random_range(0.0..th);
        if let Ok(p) = TrustParams::new(a, b, e, eta, th, k) {
            return p;
        }
    }
}

fn social_boundedness() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut updates = 0u64;
    for _ in 0..100_000 {
        let params = random_params(&mut rng);
        let n = rng.random_range(1..=8);
        let mut states: Vec<_> = (0..n)
            .map(|_| {
                let v = if rng.random_bool(0.2) {
                    *[-1.0, 1.0].choose(&mut rng).unwrap()
                } else {
                    rng.random_range(-1.0..=1.0)
                };
                TrustState::new(v, 0).unwrap()
            })
            .collect();
        let rounds = rng.random_range(1..=12);
        for _ in 0..rounds {
            let actions =
                ActionVector::new((0..n).map(|_| rng.random_bool(0.5)).collect()).unwrap();
            let out = social_update(&states, &actions, &params).unwrap();
            assert_eq!(out.clamped, 0, "clamp fired");
            assert!(out.states.iter().all(|s| (-1.0..=1.0).contains(&s.value())));
            states = out.states;
            updates += n as u64;
        }
    }
    assert!(updates > 100_000);
}

fn dynamics_oracles() {
    const P: u64 = 10007;
    let p = Modulus::new(P).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut stale_hits = 0;
    for _ in 0..1000 {
        let t = rng.random_range(2..=6);
        let n = rng.random_range(t + 1..=t + 5);
        let secret = p.random(&mut rng);
        let mut all_x: Vec<u64> = (1..P)
            .collect::<Vec<_>>()
            .choose_multiple(&mut rng, n + 1)
            .copied()
            .collect();
        let x_new = all_x.pop().unwrap();
        let xs: Vec<_> = all_x.iter().map(|&x| p.element(x)).collect();
        let shares = deal(secret, t, &xs, &mut rng).unwrap().shares;

        let g = RefreshPolynomial::random(p, t, &mut rng);
        let refreshed = refresh_shares(&shares, &g).unwrap();
        let subset: Vec<_> = refreshed.choose_multiple(&mut rng, t).copied().collect();
        assert_eq!(reconstruct(&subset, t).unwrap(), secret);
        assert_eq!(o_lagrange(&points(&subset), 0, P), secret.value());

        let contributors: Vec<_> = shares.choose_multiple(&mut rng, t).copied().collect();
        let run = enroll_share(&contributors, t, p.element(x_new), &mut rng).unwrap();
        assert_eq!(
            run.point.y().value(),
            o_lagrange(&points(&shares[..t]), x_new, P)
        );
        assert_eq!(
            run.point.y(),
            interpolate_at(&shares, t, p.element(x_new)).unwrap()
        );

        let revoked = *shares.choose(&mut rng).unwrap();
        let g = RefreshPolynomial::random(p, t, &mut rng);
        let (mut fresh, stale) = disenroll_shares(&shares, revoked.x(), &g).unwrap();
        fresh.shuffle(&mut rng);
        let mut mixed: Vec<_> = fresh[..t - 1].to_vec();
        mixed.push(stale);
        if o_lagrange(&points(&mixed), 0, P) == secret.value() {
            stale_hits += 1;
        }
        assert_eq!(o_lagrange(&points(&fresh[..t]), 0, P), secret.value());
    }
    assert!(
        stale_hits <= 10,
        "stale share recovered the secret {stale_hits} times"
    );
}

fn provider(id: &str) -> ProviderProfile {
    ProviderProfile {
        id: id.into(),
        initial_weight: 2,
        availability_prob: 0.95,
        latency: Latency {
            base_ms: 30.0,
            jitter_ms: 40.0,
        },
        corruption_prob: 0.0,
        unit_cost: 1.0,
    }
}

fn four_provider_config(mode: Mode) -> SimConfig {
    SimConfig {
        modulus: Modulus::mersenne61(),
        threshold: 5,
        max_weight: 3,
        trust: TrustParams::default(),
        deadline_ms: 100.0,
        periods: 50,
        seed: 2024,
        sla: SlaThresholds {
            max_hourly_cost: 20.0,
            max_avg_rt_ms: 100.0,
            max_rt_ms: 100.0,
        },
        providers: ["p1", "p2", "p3", "p4"].map(provider).to_vec(),
        mode,
    }
}

fn chronic_defector_run() {
    let scripted = Mode::Trace {
        actions: vec!["CCCD".to_string(); 50],
    };
    let mut sampled = four_provider_config(Mode::Sampled);
    sampled.providers[3].availability_prob = 0.0;
    for config in [four_provider_config(scripted), sampled] {
        let reports = cloudsim::run(config.clone()).unwrap();
        assert_eq!(reports.len(), 50);
        let w4: Vec<usize> = reports.iter().map(|r| r.players[3].weight).collect();
        let first_zero = w4
            .iter()
            .position(|&w| w == 0)
            .expect("defector weight never reached 0");
        assert!(w4[first_zero..].iter().all(|&w| w == 0), "{w4:?}");
        for r in &reports {
            assert!(r.safety_ok && r.aborted.is_none());
            assert!(r.players[3].class != PlayerClass::Good);
            if r.reconstruction.responder_weight >= 5 {
                assert!(
                    r.reconstruction.success && r.reconstruction.matches_secret,
                    "period {}",
                    r.period
                );
            }
        }

        let (mut a, mut b) = (Vec::new(), Vec::new());
        cloudsim::write_csv(&reports, &mut a).unwrap();
        cloudsim::write_csv(&cloudsim::run(config).unwrap(), &mut b).unwrap();
        assert_eq!(a, b);
    }
}

fn corruption_reboot() {
    let config = four_provider_config(Mode::Trace {
        actions: ["CCCC", "CCXC", "CCCC"].map(String::from).to_vec(),
    });
    let mut sim = Simulation::init(config).unwrap();
    let p3 = "p3".into();
    sim.step().unwrap().unwrap();

    let before = sim.scheme().points_of(&p3);
    assert_eq!(before.len(), 2);
    for pt in &before {
        let one = sim.config().modulus.one();
        let tampered = SharePoint::new(pt.x(), pt.y().checked_add(one).unwrap()).unwrap();
        assert!(!sim.scheme().verify(&tampered).unwrap());
        assert!(sim.scheme().verify(pt).unwrap());
    }

    let hit = sim.step().unwrap().unwrap();
    let row = &hit.players[2];
    assert_eq!(row.action, Action::X);
    assert_eq!(
        (row.weight, row.trust, row.status),
        (0, 0.0, PlayerStatus::Retired)
    );
    assert_eq!(hit.reconstruction.rejected_shares, 2);
    assert!(!hit.reconstruction.responders.contains(&p3));
    assert!(sim.scheme().points_of(&p3).is_empty());
    for pt in &before {
        assert!(sim.scheme().retired_xs().contains(&pt.x().value()));
    }

    let next = sim.step().unwrap().unwrap();
    let row = &next.players[2];
    assert_eq!(
        (row.weight, row.trust, row.class, row.status),
        (1, 0.0, PlayerClass::New, PlayerStatus::Active)
    );
    let fresh_x = sim.scheme().points_of(&p3)[0].x().value();
    assert!(before.iter().all(|pt| pt.x().value() != fresh_x));
}

// ---- harness --------------------------------------------------------------

type Criterion = (&'static str, fn(), Duration);

fn main() {
    let criteria: [Criterion; 10] = [
        (
            "p=11 dealing and reconstruction",
            small_dealing_reproduction,
            Duration::from_millis(1),
        ),
        (
            "p=31 dealing and both subsets",
            larger_dealing_reproduction,
            Duration::from_millis(1),
        ),
        (
            "perfect secrecy by enumeration",
            perfect_secrecy_enumeration,
            Duration::from_secs(1),
        ),
        (
            "trust function anchors and continuity",
            trust_function_anchors,
            Duration::from_millis(1),
        ),
        (
            "pairwise reputation average",
            reputation_average,
            Duration::from_secs(1),
        ),
        (
            "social scaling table and fixed points",
            scaling_table,
            Duration::from_secs(1),
        ),
        (
            "social update boundedness, 1e5 sequences",
            social_boundedness,
            Duration::from_secs(10),
        ),
        (
            "share dynamics oracles, 1000 trials",
            dynamics_oracles,
            Duration::from_secs(10),
        ),
        (
            "chronic defector simulation",
            chronic_defector_run,
            Duration::from_secs(5),
        ),
        (
            "corruption reboot",
            corruption_reboot,
            Duration::from_secs(1),
        ),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    let mut out = std::io::stdout();
    for (i, (name, check, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(check));
        let took = start.elapsed();
        let verdict = match result {
            Ok(()) if took <= *limit => "PASS".to_string(),
            Ok(()) => format!("FAIL (over {limit:?})"),
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                format!("FAIL ({msg})")
            }
        };
        if !verdict.starts_with("PASS") {
            failed += 1;
        }
        writeln!(out, "criterion {:>2}: {verdict} {name} [{took:.2?}]", i + 1).unwrap();
    }
    writeln!(
        out,
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    )
    .unwrap();
    if failed > 0 {
        std::process::exit(1);
    }
}
