//! Aggregation and report files.
//!
//! `results.csv` and `costs.csv` hold only quantities that are a function of
//! the suite and seeds, so repeated runs produce identical bytes.
//! Wall-clock times go to `timing.csv` and the raw `trials.jsonl`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{svg, BenchError, BudgetRecord, PlannerId, Result, TrialRecord, ALL_TASKS};

/// Marker written for statistics that do not exist (no successes).
pub const ABSENT: &str = "NA";

pub const RESULTS_HEADER: [&str; 9] = [
    "planner",
    "task",
    "trials",
    "successes",
    "success_rate",
    "cost_mean",
    "cost_std",
    "checks_mean",
    "checks_std",
];
pub const TIMING_HEADER: [&str; 4] = ["planner", "task", "time_mean", "time_std"];
pub const COSTS_HEADER: [&str; 9] = [
    "planner", "task", "scene", "problem", "trial", "seed", "success", "cost", "checks",
];

/// Summary of one planner on one task (or on all tasks pooled).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub planner: PlannerId,
    pub task: String,
    pub trials: usize,
    pub successes: usize,
    /// Percent.
    pub success_rate: f64,
    pub time_mean: f64,
    pub time_std: f64,
    /// Over successful trials only.
    pub cost_mean: Option<f64>,
    pub cost_std: Option<f64>,
    pub checks_mean: f64,
    pub checks_std: f64,
}

/// One line of `costs.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct CostRow {
    pub planner: PlannerId,
    pub task: String,
    pub scene: String,
    pub problem: usize,
    pub trial: usize,
    pub seed: u64,
    pub success: bool,
    pub cost: Option<f64>,
    pub checks: u64,
}

/// Mean and standard deviation over the recorded trials, dividing by the
/// trial count: `{1, 3}` gives `(2, 1)`.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn row(planner: PlannerId, task: &str, rs: &[&TrialRecord]) -> MetricsRow {
    let times: Vec<f64> = rs.iter().map(|r| r.time_s).collect();
    let checks: Vec<f64> = rs.iter().map(|r| r.collision_checks as f64).collect();
    let costs: Vec<f64> = rs.iter().filter(|r| r.success).filter_map(|r| r.cost).collect();
    let (time_mean, time_std) = mean_std(&times);
    let (checks_mean, checks_std) = mean_std(&checks);
    let cost = (!costs.is_empty()).then(|| mean_std(&costs));
    let successes = rs.iter().filter(|r| r.success).count();
    MetricsRow {
        planner,
        task: task.to_string(),
        trials: rs.len(),
        successes,
        success_rate: 100.0 * successes as f64 / rs.len() as f64,
        time_mean,
        time_std,
        cost_mean: cost.map(|c| c.0),
        cost_std: cost.map(|c| c.1),
        checks_mean,
        checks_std,
    }
}

/// Per planner: one row per task in order of first appearance, then a row
/// pooling every trial of that planner under the task `all`.
pub fn aggregate(records: &[TrialRecord]) -> Vec<MetricsRow> {
    let mut planners: Vec<PlannerId> = Vec::new();
    let mut tasks: Vec<&str> = Vec::new();
    for r in records {
        if !planners.contains(&r.planner) {
            planners.push(r.planner);
        }
        if !tasks.contains(&r.task.as_str()) {
            tasks.push(&r.task);
        }
    }
    let mut out = Vec::new();
    for &p in &planners {
        let mine: Vec<&TrialRecord> = records.iter().filter(|r| r.planner == p).collect();
        for &t in &tasks {
            let rs: Vec<&TrialRecord> = mine.iter().copied().filter(|r| r.task == t).collect();
            if !rs.is_empty() {
                out.push(row(p, t, &rs));
            }
        }
        out.push(row(p, ALL_TASKS, &mine));
    }
    out
}

/// Successful-trial costs per (planner, task).
pub fn cost_distributions(records: &[TrialRecord]) -> BTreeMap<(PlannerId, String), Vec<f64>> {
    let mut out: BTreeMap<(PlannerId, String), Vec<f64>> = BTreeMap::new();
    for r in records {
        let e = out.entry((r.planner, r.task.clone())).or_default();
        if let (true, Some(c)) = (r.success, r.cost) {
            e.push(c);
        }
    }
    out
}

fn num(x: f64) -> String {
    // Shortest representation that parses back to the same value.
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_else(|| ABSENT.to_string())
}

fn to_csv(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

pub fn results_csv(rows: &[MetricsRow]) -> String {
    to_csv(
        &RESULTS_HEADER,
        rows.iter().map(|m| {
            vec![
                m.planner.to_string(),
                m.task.clone(),
                m.trials.to_string(),
                m.successes.to_string(),
                num(m.success_rate),
                opt(m.cost_mean),
                opt(m.cost_std),
                num(m.checks_mean),
                num(m.checks_std),
            ]
        }),
    )
}

pub fn timing_csv(rows: &[MetricsRow]) -> String {
    to_csv(
        &TIMING_HEADER,
        rows.iter()
            .map(|m| vec![m.planner.to_string(), m.task.clone(), num(m.time_mean), num(m.time_std)]),
    )
}

pub fn costs_csv(records: &[TrialRecord]) -> String {
    to_csv(
        &COSTS_HEADER,
        records.iter().map(|r| {
            vec![
                r.planner.to_string(),
                r.task.clone(),
                r.scene.clone(),
                r.problem.to_string(),
                r.trial.to_string(),
                r.seed.to_string(),
                r.success.to_string(),
                opt(if r.success { r.cost } else { None }),
                r.collision_checks.to_string(),
            ]
        }),
    )
}

fn malformed(msg: impl Into<String>) -> BenchError {
    BenchError::Report(msg.into())
}

fn read_csv(text: &str, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let got = r.headers().map_err(|e| malformed(e.to_string()))?.clone();
    if got.iter().ne(header.iter().copied()) {
        return Err(malformed(format!("unexpected header {:?}", got)));
    }
    r.records()
        .map(|rec| {
            let rec = rec.map_err(|e| malformed(e.to_string()))?;
            if rec.len() != header.len() {
                return Err(malformed(format!("expected {} fields, found {}", header.len(), rec.len())));
            }
            Ok(rec)
        })
        .collect()
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize) -> Result<T> {
    rec[i].parse().map_err(|_| malformed(format!("bad value {:?} in column {i}", &rec[i])))
}

fn finite(rec: &csv::StringRecord, i: usize) -> Result<f64> {
    let x: f64 = field(rec, i)?;
    if !x.is_finite() {
        return Err(malformed(format!("non-finite value in column {i}")));
    }
    Ok(x)
}

fn opt_field(rec: &csv::StringRecord, i: usize) -> Result<Option<f64>> {
    if &rec[i] == ABSENT {
        Ok(None)
    } else {
        finite(rec, i).map(Some)
    }
}

fn planner(rec: &csv::StringRecord) -> Result<PlannerId> {
    rec[0].parse().map_err(malformed)
}

/// Reads `results.csv` and `timing.csv` back into rows; the two files must
/// list the same (planner, task) pairs in the same order.
pub fn parse_metrics(results: &str, timing: &str) -> Result<Vec<MetricsRow>> {
    let res = read_csv(results, &RESULTS_HEADER)?;
    let tim = read_csv(timing, &TIMING_HEADER)?;
    if res.len() != tim.len() {
        return Err(malformed("results and timing row counts differ"));
    }
    res.iter()
        .zip(&tim)
        .map(|(r, t)| {
            if r[0] != t[0] || r[1] != t[1] {
                return Err(malformed("results and timing rows out of step"));
            }
            let m = MetricsRow {
                planner: planner(r)?,
                task: r[1].to_string(),
                trials: field(r, 2)?,
                successes: field(r, 3)?,
                success_rate: finite(r, 4)?,
                time_mean: finite(t, 2)?,
                time_std: finite(t, 3)?,
                cost_mean: opt_field(r, 5)?,
                cost_std: opt_field(r, 6)?,
                checks_mean: finite(r, 7)?,
                checks_std: finite(r, 8)?,
            };
            if m.successes > m.trials || !(0.0..=100.0).contains(&m.success_rate) {
                return Err(malformed("inconsistent success counts"));
            }
            Ok(m)
        })
        .collect()
}

pub fn parse_costs(text: &str) -> Result<Vec<CostRow>> {
    read_csv(text, &COSTS_HEADER)?
        .iter()
        .map(|r| {
            Ok(CostRow {
                planner: planner(r)?,
                task: r[1].to_string(),
                scene: r[2].to_string(),
                problem: field(r, 3)?,
                trial: field(r, 4)?,
                seed: field(r, 5)?,
                success: field(r, 6)?,
                cost: opt_field(r, 7)?,
                checks: field(r, 8)?,
            })
        })
        .collect()
}

pub fn parse_trials(text: &str) -> Result<Vec<TrialRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| malformed(format!("trials line {}: {e}", i + 1))))
        .collect()
}

pub fn trials_jsonl(records: &[TrialRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
        .collect()
}

fn file_stem(task: &str) -> String {
    task.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

/// Writes every report file into `out_dir` and returns their paths.
/// `budgets` may be empty when regenerating from raw records alone.
pub fn write_report(records: &[TrialRecord], budgets: &[BudgetRecord], out_dir: &Path) -> Result<Vec<PathBuf>> {
    if records.is_empty() {
        return Err(malformed("no trial records"));
    }
    fs::create_dir_all(out_dir)?;
    let rows = aggregate(records);
    let mut files: Vec<(String, String)> = vec![
        ("results.csv".into(), results_csv(&rows)),
        ("timing.csv".into(), timing_csv(&rows)),
        ("costs.csv".into(), costs_csv(records)),
        ("trials.jsonl".into(), trials_jsonl(records)),
    ];
    if !budgets.is_empty() {
        files.push((
            "budgets.json".into(),
            serde_json::to_string_pretty(budgets).expect("budgets serialize") + "\n",
        ));
    }

    let mut tasks: Vec<String> = Vec::new();
    let mut planners: Vec<PlannerId> = Vec::new();
    for r in records {
        if !tasks.contains(&r.task) {
            tasks.push(r.task.clone());
        }
        if !planners.contains(&r.planner) {
            planners.push(r.planner);
        }
    }
    let success = svg::bar_chart(
        "Success rate per task",
        "success [%]",
        &tasks,
        &planners
            .iter()
            .map(|&p| {
                let values = tasks
                    .iter()
                    .map(|t| rows.iter().find(|m| m.planner == p && &m.task == t).map_or(0.0, |m| m.success_rate))
                    .collect();
                (p.to_string(), values)
            })
            .collect::<Vec<_>>(),
    );
    files.push(("success.svg".into(), success));
    let dists = cost_distributions(records);
    for t in &tasks {
        let groups: Vec<(String, Vec<f64>)> = planners
            .iter()
            .map(|&p| (p.to_string(), dists.get(&(p, t.clone())).cloned().unwrap_or_default()))
            .collect();
        files.push((format!("cost_{}.svg", file_stem(t)), svg::box_plot(&format!("Planning cost: {t}"), "cost [rad]", &groups)));
    }

    let mut written = Vec::new();
    for (name, body) in files {
        let path = out_dir.join(name);
        fs::write(&path, body)?;
        written.push(path);
    }
    Ok(written)
}
