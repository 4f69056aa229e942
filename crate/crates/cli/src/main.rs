use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use socialshare::cloudsim::{self, RunSummary, SimConfig, Trace};
use socialshare::dynamics::{disenroll_shares, enroll_share, refresh_shares, RefreshPolynomial};
use socialshare::field::{FieldElement, Modulus};
use socialshare::shamir::{
    commit_secret, deal, deal_with_coefficients, reconstruct, verify_share, ShareCommitment,
    SharePoint,
};
use socialshare::social::{social_update, ActionVector};
use socialshare::trust::{mu, mu_prime, TrustParams, TrustState};
use socialshare::wire::ShareSetDoc;

/// Weighted threshold secret sharing with trust-driven share tuning.
#[derive(Parser)]
#[command(name = "socialshare", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split a secret into shares.
    Deal(DealArgs),
    /// Recover a secret from shares.
    Reconstruct(ReconstructArgs),
    /// Re-randomize every share of a share set; the secret is unchanged.
    Refresh(RefreshArgs),
    /// Issue a share at a new x without revealing the secret.
    Enroll(EnrollArgs),
    /// Invalidate one share by refreshing all the others.
    Disenroll(DisenrollArgs),
    /// Trace a trust value through a sequence of actions, as CSV.
    TrustCurve(TrustCurveArgs),
    /// Run a cloud simulation from a JSON config.
    Sim(SimArgs),
}

#[derive(Args)]
struct DealArgs {
    /// Field prime [default: 2^61 - 1]
    #[arg(long)]
    prime: Option<u64>,
    #[arg(long, required_unless_present = "coeffs")]
    secret: Option<u64>,
    #[arg(short = 't', long, required_unless_present = "coeffs")]
    threshold: Option<usize>,
    /// Number of shares, dealt at x = 1..=n
    #[arg(short = 'n', long, conflicts_with = "xs")]
    shares: Option<usize>,
    /// x-coordinates: an inclusive range `a..b` or a list `1,4,9`
    #[arg(long)]
    xs: Option<String>,
    /// RNG seed; omit for OS entropy
    #[arg(long)]
    seed: Option<u64>,
    /// INSECURE DETERMINISTIC MODE: use these polynomial coefficients,
    /// constant term first, instead of random ones. For reproducing known
    /// examples only; the coefficients reveal the secret.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["secret", "threshold", "seed"])]
    coeffs: Option<Vec<u64>>,
}

#[derive(Args)]
struct ReconstructArgs {
    #[arg(long, required_unless_present = "input")]
    prime: Option<u64>,
    #[arg(short = 't', long, required_unless_present = "input")]
    threshold: Option<usize>,
    /// A share as `x:y`; repeat for each share
    #[arg(long = "share", value_name = "X:Y")]
    shares: Vec<String>,
    /// Read shares from a share-set document instead
    #[arg(long, conflicts_with_all = ["prime", "threshold", "shares"])]
    input: Option<PathBuf>,
}

#[derive(Args)]
struct DynamicsArgs {
    /// Share-set document from `deal` or an earlier dynamics command
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Write the new share set here instead of standard output
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RefreshArgs {
    #[command(flatten)]
    common: DynamicsArgs,
    /// INSECURE DETERMINISTIC MODE: refresh polynomial coefficients
    /// g_1..g_{t-1} (g_0 is always 0)
    #[arg(long, value_delimiter = ',', conflicts_with = "seed")]
    g_coeffs: Option<Vec<u64>>,
}

#[derive(Args)]
struct EnrollArgs {
    #[command(flatten)]
    common: DynamicsArgs,
    /// x of the new share; must not be in the set
    #[arg(long)]
    x_new: u64,
}

#[derive(Args)]
struct DisenrollArgs {
    #[command(flatten)]
    common: DynamicsArgs,
    /// x of the share to invalidate
    #[arg(long)]
    revoke: u64,
    /// INSECURE DETERMINISTIC MODE: refresh polynomial coefficients
    /// g_1..g_{t-1}
    #[arg(long, value_delimiter = ',', conflicts_with = "seed")]
    g_coeffs: Option<Vec<u64>>,
}

#[derive(Args)]
struct TrustCurveArgs {
    /// Actions of the tracked player, `C`/`D`, repeated to fill the rounds
    #[arg(long)]
    pattern: String,
    /// Number of rounds [default: pattern length]
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    start: f64,
    /// JSON file with any of alpha, beta, epsilon, eta, theta, kappa
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    /// Population size for the social rule, tracked player included
    #[arg(long)]
    social: Option<usize>,
    /// Actions of the other players each round [default: all C]
    #[arg(long, requires = "social")]
    population: Option<String>,
    /// Write the CSV here instead of standard output
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimArgs {
    #[arg(long)]
    config: PathBuf,
    /// Override the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// Replay the action matrix in this trace file
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Per-player CSV rows [default: standard output]
    #[arg(long)]
    out_csv: Option<PathBuf>,
    #[arg(long)]
    out_json: Option<PathBuf>,
    /// Record the action matrix for later replay
    #[arg(long)]
    out_trace: Option<PathBuf>,
    /// Run this many independently seeded copies in parallel and print
    /// their summaries as JSON
    #[arg(long, conflicts_with_all = ["trace", "out_csv", "out_json", "out_trace"])]
    sweep: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Deal(a) => cmd_deal(a),
        Command::Reconstruct(a) => cmd_reconstruct(a),
        Command::Refresh(a) => cmd_refresh(a),
        Command::Enroll(a) => cmd_enroll(a),
        Command::Disenroll(a) => cmd_disenroll(a),
        Command::TrustCurve(a) => cmd_trust_curve(a),
        Command::Sim(a) => cmd_sim(a),
    }
}

fn rng_from(seed: Option<u64>) -> ChaCha8Rng {
    match seed {
        Some(s) => ChaCha8Rng::seed_from_u64(s),
        None => ChaCha8Rng::from_os_rng(),
    }
}

fn modulus(prime: Option<u64>) -> Result<Modulus> {
    Ok(match prime {
        Some(p) => Modulus::new(p)?,
        None => Modulus::mersenne61(),
    })
}

fn parse_xs(spec: &str, m: Modulus) -> Result<Vec<FieldElement>> {
    let values: Vec<u64> = if let Some((a, b)) = spec.split_once("..") {
        let a: u64 = a.trim().parse().context("bad range start")?;
        let b: u64 = b.trim().parse().context("bad range end")?;
        (a..=b).collect()
    } else {
        spec.split(',')
            .map(|v| v.trim().parse().with_context(|| format!("bad x {v:?}")))
            .collect::<Result<_>>()?
    };
    Ok(values.into_iter().map(|x| m.element(x)).collect())
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    emit(&text, out)
}

fn cmd_deal(a: DealArgs) -> Result<()> {
    let m = modulus(a.prime)?;
    let xs = match (&a.xs, a.shares) {
        (Some(spec), _) => parse_xs(spec, m)?,
        (None, Some(n)) => (1..=n as u64).map(|x| m.element(x)).collect(),
        (None, None) => bail!("give --shares or --xs"),
    };
    let (dealing, t, secret) = match &a.coeffs {
        Some(coeffs) => {
            let coeffs: Vec<_> = coeffs.iter().map(|&c| m.element(c)).collect();
            let Some(&secret) = coeffs.first() else {
                bail!("--coeffs needs at least one value");
            };
            (deal_with_coefficients(&coeffs, &xs)?, coeffs.len(), secret)
        }
        None => {
            let secret = m.element(a.secret.expect("required by clap"));
            let t = a.threshold.expect("required by clap");
            (deal(secret, t, &xs, &mut rng_from(a.seed))?, t, secret)
        }
    };
    let mut doc = ShareSetDoc::build(m, t, 0, &dealing.shares, &dealing.commitments);
    doc.secret_commitment = Some(commit_secret(secret));
    emit_json(&doc, None)
}

fn parse_share(text: &str, m: Modulus) -> Result<SharePoint> {
    let (x, y) = text
        .split_once(':')
        .with_context(|| format!("share {text:?} is not x:y"))?;
    let x: u64 = x
        .trim()
        .parse()
        .with_context(|| format!("bad x in {text:?}"))?;
    let y: u64 = y
        .trim()
        .parse()
        .with_context(|| format!("bad y in {text:?}"))?;
    Ok(SharePoint::new(m.element(x), m.element(y))?)
}

fn cmd_reconstruct(a: ReconstructArgs) -> Result<()> {
    let (shares, t) = match &a.input {
        Some(path) => {
            let doc = load_doc(path)?;
            (doc.shares, doc.threshold)
        }
        None => {
            let m = modulus(a.prime)?;
            let shares = a
                .shares
                .iter()
                .map(|s| parse_share(s, m))
                .collect::<Result<Vec<_>>>()?;
            (shares, a.threshold.expect("required by clap"))
        }
    };
    let secret = reconstruct(&shares, t)?;
    emit(&format!("{secret}\n"), None)
}

/// A decoded share set whose shares match their commitments.
struct LoadedDoc {
    modulus: Modulus,
    threshold: usize,
    epoch: u64,
    shares: Vec<SharePoint>,
    secret_commitment: Option<String>,
}

fn load_doc(path: &Path) -> Result<LoadedDoc> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let doc: ShareSetDoc =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let shares = doc.decode_shares()?;
    for (json, share) in doc.shares.iter().zip(&shares) {
        if json.epoch != doc.epoch {
            bail!(
                "share at x = {} is from epoch {}, document is at {}",
                share.x(),
                json.epoch,
                doc.epoch
            );
        }
    }
    let commitments = doc.decode_commitments()?;
    for share in &shares {
        let c = commitments
            .iter()
            .find(|c| c.x() == share.x())
            .with_context(|| format!("no commitment for x = {}", share.x()))?;
        if !verify_share(share, c, doc.epoch)? {
            bail!("share at x = {} does not match its commitment", share.x());
        }
    }
    Ok(LoadedDoc {
        modulus: doc.modulus()?,
        threshold: doc.threshold,
        epoch: doc.epoch,
        shares,
        secret_commitment: doc.secret_commitment,
    })
}

fn write_doc(doc: &LoadedDoc, mut shares: Vec<SharePoint>, out: Option<&Path>) -> Result<()> {
    shares.sort_by_key(|s| s.x().value());
    let epoch = doc.epoch + 1;
    let commitments: Vec<_> = shares
        .iter()
        .map(|s| ShareCommitment::commit(s, epoch))
        .collect();
    let mut next = ShareSetDoc::build(doc.modulus, doc.threshold, epoch, &shares, &commitments);
    next.secret_commitment = doc.secret_commitment.clone();
    emit_json(&next, out)
}

fn refresh_poly(
    doc: &LoadedDoc,
    g: Option<&[u64]>,
    seed: Option<u64>,
) -> Result<RefreshPolynomial> {
    Ok(match g {
        Some(coeffs) => {
            if coeffs.len() + 1 != doc.threshold {
                bail!(
                    "threshold {} needs {} refresh coefficients, got {}",
                    doc.threshold,
                    doc.threshold - 1,
                    coeffs.len()
                );
            }
            RefreshPolynomial::from_coefficients(doc.modulus, coeffs)
        }
        None => RefreshPolynomial::random(doc.modulus, doc.threshold, &mut rng_from(seed)),
    })
}

fn cmd_refresh(a: RefreshArgs) -> Result<()> {
    let doc = load_doc(&a.common.input)?;
    let g = refresh_poly(&doc, a.g_coeffs.as_deref(), a.common.seed)?;
    let shares = refresh_shares(&doc.shares, &g)?;
    write_doc(&doc, shares, a.common.out.as_deref())
}

fn cmd_enroll(a: EnrollArgs) -> Result<()> {
    let doc = load_doc(&a.common.input)?;
    let mut contributors = doc.shares.clone();
    contributors.sort_by_key(|s| s.x().value());
    contributors.truncate(doc.threshold);
    let x_new = doc.modulus.element(a.x_new);
    if doc.shares.iter().any(|s| s.x() == x_new) {
        bail!("x = {} already holds a share", a.x_new);
    }
    let transcript = enroll_share(
        &contributors,
        doc.threshold,
        x_new,
        &mut rng_from(a.common.seed),
    )?;
    let mut shares = doc.shares.clone();
    shares.push(transcript.point);
    write_doc(&doc, shares, a.common.out.as_deref())
}

fn cmd_disenroll(a: DisenrollArgs) -> Result<()> {
    let doc = load_doc(&a.common.input)?;
    let g = refresh_poly(&doc, a.g_coeffs.as_deref(), a.common.seed)?;
    let (fresh, _) = disenroll_shares(&doc.shares, doc.modulus.element(a.revoke), &g)?;
    write_doc(&doc, fresh, a.common.out.as_deref())
}

fn trust_params(a: &TrustCurveArgs) -> Result<TrustParams> {
    let base = match &a.params {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => TrustParams::default(),
    };
    Ok(TrustParams::new(
        a.alpha.unwrap_or(base.alpha()),
        a.beta.unwrap_or(base.beta()),
        a.epsilon.unwrap_or(base.epsilon()),
        a.eta.unwrap_or(base.eta()),
        a.theta.unwrap_or(base.theta()),
        a.kappa.unwrap_or(base.kappa()),
    )?)
}

fn cmd_trust_curve(a: TrustCurveArgs) -> Result<()> {
    let params = trust_params(&a)?;
    let pattern = ActionVector::from_pattern(&a.pattern)?;
    let rounds = a.rounds.unwrap_or(pattern.len());
    let others = match (a.social, &a.population) {
        (None, _) => None,
        (Some(0), _) => bail!("--social needs at least one player"),
        (Some(n), None) => Some(vec![true; n - 1]),
        (Some(n), Some(p)) => {
            let flags = if p.is_empty() {
                vec![]
            } else {
                ActionVector::from_pattern(p)?.as_slice().to_vec()
            };
            if flags.len() != n - 1 {
                bail!(
                    "--population must give {} actions for --social {n}, got {}",
                    n - 1,
                    flags.len()
                );
            }
            Some(flags)
        }
    };

    let mut states = vec![TrustState::new(a.start, 0)?; others.as_ref().map_or(1, |o| o.len() + 1)];
    let mut csv = String::from("round,action,x,applied,trust\n");
    for round in 1..=rounds {
        let cooperated = pattern.as_slice()[(round - 1) % pattern.len()];
        let x = states[0].value();
        let (reward, penalty) = match &others {
            None => (1.0, 1.0),
            Some(o) => {
                let mut flags = vec![cooperated];
                flags.extend_from_slice(o);
                let update = social_update(&states, &ActionVector::new(flags)?, &params)?;
                states = update.states;
                (update.factors.reward, update.factors.penalty)
            }
        };
        let step = if cooperated {
            reward * mu(x, &params)?
        } else {
            -penalty * mu_prime(x, &params)?
        };
        if others.is_none() {
            states[0] = states[0].advance(step).state;
        }
        let after = states[0].value();
        let letter = if cooperated { 'C' } else { 'D' };
        csv.push_str(&format!("{round},{letter},{x},{step},{after}\n"));
    }
    emit(&csv, a.out.as_deref())
}

#[derive(Serialize)]
struct SweepEntry {
    index: usize,
    seed: u64,
    summary: RunSummary,
}

fn summary_line(s: &RunSummary) -> String {
    format!(
        "periods={} reconstructions_ok={} reconstructions_failed={} sla_violation_periods={} aborted={}",
        s.periods, s.reconstructions_ok, s.reconstructions_failed, s.sla_violation_periods, s.aborted
    )
}

fn cmd_sim(a: SimArgs) -> Result<()> {
    let text =
        fs::read_to_string(&a.config).with_context(|| format!("reading {}", a.config.display()))?;
    let mut config =
        SimConfig::from_json(&text).with_context(|| format!("parsing {}", a.config.display()))?;
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    if let Some(path) = &a.trace {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let trace: Trace =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        config = config.with_trace(&trace)?;
    }

    if let Some(count) = a.sweep {
        let mut entries = Vec::with_capacity(count);
        for (index, result) in cloudsim::run_sweep(&config, count).into_iter().enumerate() {
            let summary = RunSummary::of(&result?);
            eprintln!("[{index}] {}", summary_line(&summary));
            entries.push(SweepEntry {
                index,
                seed: cloudsim::sweep_seed(config.seed, index as u64),
                summary,
            });
        }
        return emit_json(&entries, None);
    }

    let reports = cloudsim::run(config.clone())?;
    let mut csv = Vec::new();
    cloudsim::write_csv(&reports, &mut csv)?;
    emit(std::str::from_utf8(&csv)?, a.out_csv.as_deref())?;
    if let Some(path) = &a.out_json {
        let mut json = Vec::new();
        cloudsim::write_json(&reports, &mut json)?;
        fs::write(path, json).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &a.out_trace {
        emit_json(&Trace::from_reports(&config, &reports), Some(path))?;
    }
    eprintln!("{}", summary_line(&RunSummary::of(&reports)));
    Ok(())
}
