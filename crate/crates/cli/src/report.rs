//! `report`: dataset-level summary of per-user entropy and prediction runs.

use std::collections::BTreeMap;

use predictability::LzMode;
use serde::Serialize;

use crate::analysis::{load_json, EntropyReport, PredictReport};
use crate::args::ReportArgs;
use crate::run::{CliError, CliResult, Run};

#[derive(Debug, Serialize, PartialEq)]
struct Stats {
    mean: f64,
    median: f64,
    min: f64,
    max: f64,
}

fn stats(xs: &[f64]) -> Option<Stats> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    let median = if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) };
    Some(Stats { mean: v.iter().sum::<f64>() / v.len() as f64, median, min: v[0], max: v[v.len() - 1] })
}

#[derive(Serialize)]
struct UserRow {
    user: String,
    n: usize,
    #[serde(rename = "N")]
    locations: usize,
    #[serde(rename = "S_real")]
    s_real: f64,
    pi_max: f64,
    accuracy: BTreeMap<String, f64>,
}

#[derive(Serialize)]
struct DatasetRow {
    dataset: String,
    mode: LzMode,
    users: usize,
    n: Stats,
    #[serde(rename = "N")]
    locations: Stats,
    #[serde(rename = "S_real")]
    s_real: Stats,
    pi_max: Stats,
}

#[derive(Serialize)]
struct PredictorRow {
    model: String,
    users: usize,
    accuracy: Stats,
    /// `pi_max` over the same users.
    pi_max: Stats,
    /// Users whose accuracy exceeds their own `pi_max`.
    above_pi_max: usize,
}

#[derive(Serialize)]
struct Report {
    summary: DatasetRow,
    predictors: Vec<PredictorRow>,
    users: Vec<UserRow>,
}

pub fn report_cmd(run: &mut Run, args: &ReportArgs) -> CliResult<()> {
    let entropy: EntropyReport = load_json(run, &args.entropy)?;
    let entropy_file = args.entropy.display().to_string();
    if entropy.users.is_empty() {
        return Err(CliError::data(entropy_file, "no users"));
    }
    let mut predictions = Vec::new();
    for path in &args.predict {
        let p: PredictReport = load_json(run, path)?;
        if predictions.iter().any(|q: &PredictReport| q.model == p.model) {
            return Err(CliError::data(path.display(), format!("model {} given twice", p.model)));
        }
        predictions.push(p);
    }

    let mut rows: BTreeMap<&str, UserRow> = entropy
        .users
        .iter()
        .map(|r| {
            let row = UserRow {
                user: r.user.clone(),
                n: r.n,
                locations: r.locations,
                s_real: r.s_real,
                pi_max: r.pi_max,
                accuracy: BTreeMap::new(),
            };
            (r.user.as_str(), row)
        })
        .collect();

    let mut predictors = Vec::new();
    for p in &predictions {
        let (mut acc, mut pis, mut above) = (Vec::new(), Vec::new(), 0);
        for u in &p.users {
            if let Some(row) = rows.get_mut(u.user.as_str()) {
                row.accuracy.insert(p.model.clone(), u.accuracy);
                acc.push(u.accuracy);
                pis.push(row.pi_max);
                above += (u.accuracy > row.pi_max) as usize;
            }
        }
        if let (Some(accuracy), Some(pi_max)) = (stats(&acc), stats(&pis)) {
            predictors.push(PredictorRow { model: p.model.clone(), users: acc.len(), accuracy, pi_max, above_pi_max: above });
        }
    }

    let users: Vec<UserRow> = rows.into_values().collect();
    let col = |f: fn(&UserRow) -> f64| stats(&users.iter().map(f).collect::<Vec<_>>()).expect("users is non-empty");
    let summary = DatasetRow {
        dataset: args.dataset.clone().unwrap_or_else(|| {
            args.entropy.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
        }),
        mode: entropy.mode,
        users: users.len(),
        n: col(|u| u.n as f64),
        locations: col(|u| u.locations as f64),
        s_real: col(|u| u.s_real),
        pi_max: col(|u| u.pi_max),
    };
    run.write_json(args.output.as_deref(), &Report { summary, predictors, users })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_statistics() {
        let s = stats(&[3.0, 1.0, 2.0, 10.0]).unwrap();
        assert_eq!(s, Stats { mean: 4.0, median: 2.5, min: 1.0, max: 10.0 });
        assert_eq!(stats(&[5.0]).unwrap().median, 5.0);
        assert!(stats(&[]).is_none());
    }
}
