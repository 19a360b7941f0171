//! `ingest` and `dwell`: raw trajectories to visits or fixed-interval samples.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use predictability::criticality::{dwell_time_distribution, radius_of_gyration};
use predictability::io::{write_canonical, UserSequence};
use predictability::trajectory::{
    discretize, extract_visits, parse_plt, parse_points_csv, CellIndex, GridSpec, RawPoint, Visit,
};
use serde::Serialize;

use crate::args::{DwellArgs, GridArgs, IngestArgs, Sampling};
use crate::run::{display_path, resolve_input, sidecar_path, CliError, CliResult, Run};

type Trajectories = BTreeMap<String, Vec<RawPoint>>;

fn is_plt(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("plt"))
}

fn collect_plt(dir: &Path, out: &mut Vec<PathBuf>) -> CliResult<()> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::data(dir.display(), e.to_string()))?;
    for entry in entries {
        let path = entry.map_err(|e| CliError::data(dir.display(), e.to_string()))?.path();
        if path.is_dir() {
            collect_plt(&path, out)?;
        } else if is_plt(&path) {
            out.push(path);
        }
    }
    Ok(())
}

/// GeoLife layout is `<user>/Trajectory/<file>.plt`; elsewhere the parent
/// directory names the user.
fn plt_user(path: &Path) -> String {
    let parts: Vec<_> = path.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect();
    if let Some(i) = parts.iter().rposition(|p| p == "Trajectory") {
        if i > 0 {
            return parts[i - 1].clone();
        }
    }
    path.parent()
        .and_then(Path::file_name)
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "user".into())
}

/// Per-user trajectories sorted by time.
fn load_trajectories(run: &mut Run, input: &Path, user: Option<&str>) -> CliResult<Trajectories> {
    let resolved = resolve_input(input);
    let name = display_path(&resolved);
    let mut users = Trajectories::new();
    if resolved.is_dir() || is_plt(&resolved) {
        let files = if resolved.is_dir() {
            let mut files = Vec::new();
            collect_plt(&resolved, &mut files)?;
            files.sort();
            files
        } else {
            vec![resolved.clone()]
        };
        for file in &files {
            let bytes = run.read(file)?;
            let points = parse_plt(&bytes).map_err(|e| CliError::core(file.display(), e))?;
            let id = match user {
                Some(u) if !resolved.is_dir() => u.to_string(),
                _ if !resolved.is_dir() => file.file_stem().unwrap_or_default().to_string_lossy().into_owned(),
                _ => plt_user(file),
            };
            users.entry(id).or_default().extend(points);
        }
        for points in users.values_mut() {
            points.sort_by(|a, b| a.t.total_cmp(&b.t));
        }
    } else {
        let bytes = run.read(&resolved)?;
        users = parse_points_csv(bytes.as_slice()).map_err(|e| CliError::core(&name, e))?;
    }
    users.retain(|_, p| !p.is_empty());
    if users.is_empty() {
        return Err(CliError::data(name, "no trajectory points"));
    }
    Ok(users)
}

fn dataset_grid(users: &Trajectories, cell_size: f64, name: &str) -> CliResult<GridSpec> {
    let all: Vec<RawPoint> = users.values().flatten().copied().collect();
    GridSpec::anchored_at_median(&all, cell_size).map_err(|e| CliError::core(name, e))
}

/// A user's stays (or fixes) with symbols local to the user, plus the cell
/// behind each local symbol.
struct UserVisits {
    user: String,
    points: usize,
    visits: Vec<Visit>,
    cells: Vec<(i64, i64)>,
    radius_of_gyration: f64,
}

fn user_visits(
    user: &str,
    points: &[RawPoint],
    grid: &GridSpec,
    sampling: Sampling,
    min_dwell: f64,
    name: &str,
) -> CliResult<UserVisits> {
    let err = |e| CliError::core(format!("{name} (user {user})"), e);
    let local = discretize(points, grid).map_err(err)?;
    // Dense ids follow first appearance, so the cell of id i is the i-th new cell.
    let mut seen = HashSet::new();
    let cells: Vec<(i64, i64)> = points.iter().map(|p| grid.cell_of(p)).filter(|c| seen.insert(*c)).collect();
    let visits = match sampling {
        Sampling::Visits => extract_visits(&local, min_dwell).map_err(err)?,
        Sampling::Samples => local
            .symbols()
            .iter()
            .zip(points)
            .map(|(&symbol, p)| Visit { symbol, arrive: p.t, depart: p.t })
            .collect(),
    };
    Ok(UserVisits {
        user: user.to_string(),
        points: points.len(),
        visits,
        cells,
        radius_of_gyration: radius_of_gyration(points).map_err(err)?,
    })
}

fn all_user_visits(
    run: &mut Run,
    input: &Path,
    user: Option<&str>,
    grid: &GridArgs,
    sampling: Sampling,
) -> CliResult<(GridSpec, Vec<UserVisits>)> {
    let name = display_path(&resolve_input(input));
    let users = load_trajectories(run, input, user)?;
    let spec = dataset_grid(&users, grid.cell_size, &name)?;
    let items: Vec<(&String, &Vec<RawPoint>)> = users.iter().collect();
    let visits = run.par_map(&items, |(u, points)| {
        user_visits(u, points, &spec, sampling, grid.min_dwell, &name)
    })?;
    Ok((spec, visits))
}

#[derive(Serialize)]
struct UserSummary {
    user: String,
    points: usize,
    n: usize,
    #[serde(rename = "N")]
    locations: usize,
    radius_of_gyration_m: f64,
}

#[derive(Serialize)]
struct IngestSidecar {
    sampling: Sampling,
    grid: GridSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    min_dwell_s: Option<f64>,
    n: usize,
    #[serde(rename = "N")]
    locations: usize,
    users: Vec<UserSummary>,
    /// Users left without a single visit.
    dropped_users: Vec<String>,
}

pub fn ingest(run: &mut Run, args: &IngestArgs) -> CliResult<()> {
    let (grid, per_user) = all_user_visits(run, &args.input, args.user.as_deref(), &args.grid, args.sampling)?;

    // Global ids in user order, then time order, so reruns agree.
    let mut index = CellIndex::new();
    let mut sequences = Vec::new();
    let mut summaries = Vec::new();
    let mut dropped = Vec::new();
    for u in &per_user {
        if u.visits.is_empty() {
            dropped.push(u.user.clone());
            continue;
        }
        let labels: Vec<u64> = u.visits.iter().map(|v| index.id_of(u.cells[v.symbol as usize])).collect();
        let timestamps = u.visits.iter().map(|v| v.arrive).collect();
        let seq = UserSequence::new(u.user.clone(), labels, Some(timestamps)).map_err(|e| CliError::core(&u.user, e))?;
        let mut distinct = seq.labels.clone();
        distinct.sort_unstable();
        distinct.dedup();
        summaries.push(UserSummary {
            user: u.user.clone(),
            points: u.points,
            n: seq.labels.len(),
            locations: distinct.len(),
            radius_of_gyration_m: u.radius_of_gyration,
        });
        sequences.push(seq);
    }
    if sequences.is_empty() {
        return Err(CliError::data(
            display_path(&args.input),
            format!("no user has a stay of at least {} s", args.grid.min_dwell),
        ));
    }

    let mut buf = Vec::new();
    write_canonical(&mut buf, &sequences).map_err(|e| CliError::core("<output>", e))?;
    let out = args.output.as_deref();
    run.write(out, &buf)?;
    if let Some(path) = sidecar_path(out) {
        let sidecar = IngestSidecar {
            sampling: args.sampling,
            grid,
            min_dwell_s: matches!(args.sampling, Sampling::Visits).then_some(args.grid.min_dwell),
            n: summaries.iter().map(|s| s.n).sum(),
            locations: index.len(),
            users: summaries,
            dropped_users: dropped,
        };
        run.write_json(Some(&path), &sidecar)?;
    }
    Ok(())
}

pub fn dwell(run: &mut Run, args: &DwellArgs) -> CliResult<()> {
    let (_, per_user) = all_user_visits(run, &args.input, None, &args.grid, Sampling::Visits)?;
    let mut text = String::new();
    if args.raw {
        text.push_str("user,dwell_s\n");
        for u in &per_user {
            for v in &u.visits {
                text.push_str(&format!("{},{}\n", csv_field(&u.user), v.dwell()));
            }
        }
    } else {
        let visits: Vec<Visit> = per_user.iter().flat_map(|u| u.visits.iter().copied()).collect();
        text.push_str("lower_s,upper_s,count\n");
        for bin in dwell_time_distribution(&visits) {
            text.push_str(&format!("{},{},{}\n", bin.lower, bin.upper, bin.count));
        }
    }
    run.write(args.output.as_deref(), text.as_bytes())
}

/// Quotes a CSV field when needed.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geolife_user_from_path() {
        assert_eq!(plt_user(Path::new("Data/042/Trajectory/20081023025304.plt")), "042");
        assert_eq!(plt_user(Path::new("tracks/alice/a.plt")), "alice");
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_field("u1"), "u1");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
    }
}
