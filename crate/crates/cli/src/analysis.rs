//! Sequence-level subcommands: entropy, bound, predict, mi, fit, rank.

use std::collections::BTreeMap;
use std::path::Path;

use predictability::criticality::{
    classify_decay, fit_power_law, fit_power_law_with_xmin, mi_decay_curve, pair_statistics, rank_frequencies,
    DecayVerdict, MIDecayCurve, MiPoint, PowerLawFit, RankBinning,
};
use predictability::entropy::{entropy, entropy_lz, parse, Histogram};
use predictability::io::{read_canonical, UserSequence};
use predictability::predictors::{
    online_evaluate, HmmConfig, HmmPredictor, MarkovPredictor, Predictor, RnnConfig, RnnPredictor,
};
use predictability::{predictability_bound, Estimator, LzMode, PredictabilityBound, SymbolSequence};
use serde::{Deserialize, Serialize};

use crate::args::{BoundArgs, EntropyArgs, FitArgs, MiArgs, ModelSpec, PredictArgs, RankArgs};
use crate::ingest::csv_field;
use crate::run::{display_path, resolve_input, CliError, CliResult, Run};

pub fn load_sequences(run: &mut Run, path: &Path) -> CliResult<Vec<UserSequence>> {
    let name = display_path(&resolve_input(path));
    let bytes = run.read(path)?;
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Err(CliError::data(name, "sequence file is empty"));
    }
    read_canonical(bytes.as_slice()).map_err(|e| CliError::core(name, e))
}

pub fn load_json<T: for<'de> Deserialize<'de>>(run: &mut Run, path: &Path) -> CliResult<T> {
    let name = display_path(&resolve_input(path));
    let bytes = run.read(path)?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::data(name, e.to_string()))
}

fn dense(u: &UserSequence, file: &str) -> CliResult<SymbolSequence> {
    u.to_sequence().map_err(|e| CliError::core(format!("{file} (user {})", u.user), e))
}

/// Bound for one user. A single location is perfectly predictable, and an
/// estimate above `log2 N` (small-n bias) is capped there.
fn user_bound(entropy: f64, locations: usize) -> predictability::Result<(PredictabilityBound, bool)> {
    if locations == 1 {
        let b = PredictabilityBound { entropy: 0.0, locations, pi_max: 1.0, residual: 0.0 };
        return Ok((b, entropy > 0.0));
    }
    let max = (locations as f64).log2();
    let capped = entropy > max;
    Ok((predictability_bound(entropy.min(max), locations)?, capped))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EntropyRow {
    pub user: String,
    pub n: usize,
    #[serde(rename = "N")]
    pub locations: usize,
    #[serde(rename = "S_rand")]
    pub s_rand: f64,
    #[serde(rename = "S_unc")]
    pub s_unc: f64,
    #[serde(rename = "S_real_paper")]
    pub s_real_paper: f64,
    #[serde(rename = "S_real_kontoyiannis")]
    pub s_real_kontoyiannis: f64,
    /// Estimate of the selected mode.
    #[serde(rename = "S_real")]
    pub s_real: f64,
    pub pi_max: f64,
    /// True when S_real exceeded log2 N and the bound used log2 N.
    pub entropy_capped: bool,
    /// `[λ, count]` pairs of the selected mode.
    pub lambda_histogram: Vec<(usize, usize)>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EntropyReport {
    pub mode: LzMode,
    pub estimator: Estimator,
    pub users: Vec<EntropyRow>,
    /// Users with fewer than two symbols.
    pub skipped_users: Vec<String>,
}

fn entropy_row(u: &UserSequence, mode: LzMode, estimator: Estimator, file: &str) -> CliResult<EntropyRow> {
    let seq = dense(u, file)?;
    let err = |e| CliError::core(format!("{file} (user {})", u.user), e);
    let n = seq.len();
    let locations = seq.alphabet_size();
    let s_real_paper = entropy_lz(&seq, LzMode::Paper).map_err(err)?;
    let s_real_kontoyiannis = entropy_lz(&seq, LzMode::Kontoyiannis).map_err(err)?;
    let s_real = match mode {
        LzMode::Paper => s_real_paper,
        LzMode::Kontoyiannis => s_real_kontoyiannis,
    };
    let hist = Histogram::from_symbols(seq.symbols().iter().map(|&s| s as u64));
    let (bound, entropy_capped) = user_bound(s_real, locations).map_err(err)?;
    Ok(EntropyRow {
        user: u.user.clone(),
        n,
        locations,
        s_rand: (locations as f64).log2(),
        s_unc: entropy(&hist, estimator).map_err(err)?,
        s_real_paper,
        s_real_kontoyiannis,
        s_real,
        pi_max: bound.pi_max,
        entropy_capped,
        lambda_histogram: parse(&seq, mode).histogram(),
    })
}

pub fn entropy_cmd(run: &mut Run, args: &EntropyArgs) -> CliResult<()> {
    let file = display_path(&resolve_input(&args.input));
    let users = load_sequences(run, &args.input)?;
    let (mode, estimator) = (LzMode::from(args.mode), Estimator::from(args.estimator));
    let (kept, skipped): (Vec<_>, Vec<_>) = users.into_iter().partition(|u| u.labels.len() >= 2);
    let rows = run.par_map(&kept, |u| entropy_row(u, mode, estimator, &file))?;
    let report = EntropyReport {
        mode,
        estimator,
        users: rows,
        skipped_users: skipped.into_iter().map(|u| u.user).collect(),
    };
    run.write_json(args.output.as_deref(), &report)
}

#[derive(Serialize)]
struct UserBound {
    user: String,
    #[serde(flatten)]
    bound: PredictabilityBound,
    entropy_capped: bool,
}

#[derive(Serialize)]
struct BoundReport {
    users: Vec<UserBound>,
}

pub fn bound_cmd(run: &mut Run, args: &BoundArgs) -> CliResult<()> {
    let out = args.output.as_deref();
    match (&args.input, args.entropy, args.locations) {
        (Some(path), _, _) => {
            let file = display_path(&resolve_input(path));
            let report: EntropyReport = load_json(run, path)?;
            let users = report
                .users
                .iter()
                .map(|r| {
                    let (bound, entropy_capped) = user_bound(r.s_real, r.locations)
                        .map_err(|e| CliError::core(format!("{file} (user {})", r.user), e))?;
                    Ok(UserBound { user: r.user.clone(), bound, entropy_capped })
                })
                .collect::<CliResult<_>>()?;
            run.write_json(out, &BoundReport { users })
        }
        (None, Some(s), Some(n)) => {
            let bound = predictability_bound(s, n).map_err(|e| match e {
                e if e.is_numeric() => CliError::Numeric { file: None, message: e.to_string() },
                e => CliError::Usage(e.to_string()),
            })?;
            run.write_json(out, &bound)
        }
        _ => Err(CliError::Usage("bound needs --entropy and --locations, or --input".into())),
    }
}

fn make_predictor(model: ModelSpec, seed: u64, epochs: Option<usize>) -> predictability::Result<Box<dyn Predictor>> {
    Ok(match model {
        ModelSpec::Markov { order } => Box::new(MarkovPredictor::new(order)?),
        ModelSpec::Hmm { states } => Box::new(HmmPredictor::new(HmmConfig { states, seed, ..HmmConfig::default() })),
        ModelSpec::Rnn { hidden } => {
            let base = RnnConfig::default();
            Box::new(RnnPredictor::new(RnnConfig {
                hidden: hidden.unwrap_or(base.hidden),
                epochs: epochs.unwrap_or(base.epochs),
                seed,
                ..base
            }))
        }
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PredictRow {
    pub user: String,
    pub n: usize,
    #[serde(rename = "N")]
    pub locations: usize,
    pub accuracy: f64,
    pub predictions_made: usize,
    pub correct: usize,
    pub warmup_skipped: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PredictReport {
    pub model: String,
    pub warmup_frac: f64,
    pub seed: u64,
    pub users: Vec<PredictRow>,
    /// Users too short to leave both a warm-up and an evaluated symbol.
    pub skipped_users: Vec<String>,
}

pub fn predict_cmd(run: &mut Run, args: &PredictArgs) -> CliResult<()> {
    run.set_seed(args.seed);
    let file = display_path(&resolve_input(&args.input));
    let users = load_sequences(run, &args.input)?;
    let warmup = |n: usize| ((n as f64 * args.warmup_frac).floor() as usize).max(1);
    let (kept, skipped): (Vec<_>, Vec<_>) = users.into_iter().partition(|u| warmup(u.labels.len()) < u.labels.len());
    let rows = run.par_map(&kept, |u| {
        let seq = dense(u, &file)?;
        let err = |e| CliError::core(format!("{file} (user {})", u.user), e);
        let mut predictor = make_predictor(args.model, args.seed, args.epochs).map_err(err)?;
        let report = online_evaluate(&seq, predictor.as_mut(), warmup(seq.len())).map_err(err)?;
        Ok(PredictRow {
            user: u.user.clone(),
            n: seq.len(),
            locations: seq.alphabet_size(),
            accuracy: report.accuracy,
            predictions_made: report.predictions_made,
            correct: report.correct,
            warmup_skipped: report.warmup_skipped,
        })
    })?;
    let report = PredictReport {
        model: args.model.to_string(),
        warmup_frac: args.warmup_frac,
        seed: args.seed,
        users: rows,
        skipped_users: skipped.into_iter().map(|u| u.user).collect(),
    };
    run.write_json(args.output.as_deref(), &report)
}

pub const MI_HEADER: &str = "user,D,I,pairs,noise,joint_entropy,unique_pair_ratio";

pub fn mi_cmd(run: &mut Run, args: &MiArgs) -> CliResult<()> {
    let file = display_path(&resolve_input(&args.input));
    let users = load_sequences(run, &args.input)?;
    let estimator = Estimator::from(args.estimator);
    let kept: Vec<_> = users.into_iter().filter(|u| u.labels.len() >= 2).collect();
    let blocks = run.par_map(&kept, |u| {
        let seq = dense(u, &file)?;
        let err = |e| CliError::core(format!("{file} (user {})", u.user), e);
        let dmax = args.dmax.min(seq.len() - 1);
        let curve = mi_decay_curve(&seq, dmax, estimator).map_err(err)?;
        let mut block = String::new();
        for p in &curve.points {
            let stats = pair_statistics(&seq, p.separation, estimator).map_err(err)?;
            check_finite(&[p.mi, stats.joint_entropy, stats.unique_pair_ratio], &file)?;
            block.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                csv_field(&u.user),
                p.separation,
                p.mi,
                p.pairs_used,
                p.noise,
                stats.joint_entropy,
                stats.unique_pair_ratio
            ));
        }
        Ok(block)
    })?;
    let mut text = format!("{MI_HEADER}\n");
    text.extend(blocks);
    run.write(args.output.as_deref(), text.as_bytes())
}

fn check_finite(values: &[f64], file: &str) -> CliResult<()> {
    match values.iter().find(|v| !v.is_finite()) {
        Some(v) => Err(CliError::Numeric { file: Some(file.to_string()), message: format!("non-finite value {v}") }),
        None => Ok(()),
    }
}

#[derive(Serialize)]
struct PowerLawReport {
    column: String,
    n: usize,
    #[serde(flatten)]
    fit: PowerLawFit,
}

#[derive(Serialize)]
struct UserDecay {
    user: String,
    #[serde(flatten)]
    verdict: DecayVerdict,
}

#[derive(Serialize)]
struct DecayReport {
    users: Vec<UserDecay>,
}

#[derive(Deserialize)]
struct MiRow {
    user: String,
    #[serde(rename = "D")]
    separation: usize,
    #[serde(rename = "I")]
    mi: f64,
    pairs: usize,
    noise: bool,
}

pub fn fit_cmd(run: &mut Run, args: &FitArgs) -> CliResult<()> {
    let file = display_path(&resolve_input(&args.input));
    let bytes = run.read(&args.input)?;
    let data_err = |e: csv::Error| {
        let line = e.position().map(|p| format!("line {}: ", p.line())).unwrap_or_default();
        CliError::data(&file, format!("{line}{e}"))
    };
    let mut rdr = csv::Reader::from_reader(bytes.as_slice());
    if args.decay {
        let mut curves: BTreeMap<String, Vec<MiPoint>> = BTreeMap::new();
        for row in rdr.deserialize::<MiRow>() {
            let r = row.map_err(data_err)?;
            curves.entry(r.user).or_default().push(MiPoint {
                separation: r.separation,
                mi: r.mi,
                pairs_used: r.pairs,
                noise: r.noise,
            });
        }
        if curves.is_empty() {
            return Err(CliError::data(&file, "no MI rows"));
        }
        let users = curves
            .into_iter()
            .map(|(user, points)| {
                let curve = MIDecayCurve { points, estimator: Estimator::default() };
                let verdict =
                    classify_decay(&curve).map_err(|e| CliError::core(format!("{file} (user {user})"), e))?;
                Ok(UserDecay { user, verdict })
            })
            .collect::<CliResult<_>>()?;
        return run.write_json(args.output.as_deref(), &DecayReport { users });
    }

    let headers = rdr.headers().map_err(data_err)?.clone();
    let column = match &args.column {
        Some(c) => headers
            .iter()
            .position(|h| h == c)
            .ok_or_else(|| CliError::data(&file, format!("no column {c:?}")))?,
        None if headers.is_empty() => return Err(CliError::data(&file, "no columns")),
        None => headers.len() - 1,
    };
    let mut xs = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(data_err)?;
        let field = rec.get(column).unwrap_or("");
        let x: f64 = field
            .trim()
            .parse()
            .map_err(|_| CliError::data(&file, format!("line {}: not a number: {field:?}", i + 2)))?;
        xs.push(x);
    }
    let fit = match args.xmin {
        Some(x_min) => fit_power_law_with_xmin(&xs, x_min),
        None => fit_power_law(&xs),
    }
    .map_err(|e| CliError::core(&file, e))?;
    let report = PowerLawReport { column: headers[column].to_string(), n: xs.len(), fit };
    run.write_json(args.output.as_deref(), &report)
}

pub fn rank_cmd(run: &mut Run, args: &RankArgs) -> CliResult<()> {
    let file = display_path(&resolve_input(&args.input));
    let users = load_sequences(run, &args.input)?;
    let binning = RankBinning::from(args.binning);
    let curve = |seq: &SymbolSequence| rank_frequencies(seq, binning).map_err(|e| CliError::core(&file, e));
    let mut text = String::new();
    if args.per_user {
        text.push_str("user,rank,frequency\n");
        for u in &users {
            for r in curve(&dense(u, &file)?)? {
                text.push_str(&format!("{},{},{}\n", csv_field(&u.user), r.rank, r.frequency));
            }
        }
    } else {
        let pooled = SymbolSequence::encode(users.iter().flat_map(|u| u.labels.iter().copied()), None)
            .map_err(|e| CliError::core(&file, e))?;
        text.push_str("rank,frequency\n");
        for r in curve(&pooled)? {
            text.push_str(&format!("{},{}\n", r.rank, r.frequency));
        }
    }
    run.write(args.output.as_deref(), text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_location_is_certain() {
        let (b, capped) = user_bound(0.3, 1).unwrap();
        assert_eq!(b.pi_max, 1.0);
        assert!(capped);
    }

    #[test]
    fn estimates_above_random_are_capped() {
        let (b, capped) = user_bound(3.5, 8).unwrap();
        assert!(capped);
        assert!((b.pi_max - 0.125).abs() < 1e-9);
        let (b, capped) = user_bound(1.0, 8).unwrap();
        assert!(!capped);
        assert!(b.pi_max > 0.125);
    }
}
