//! Experiment front end: synthetic trace generation at a target root rate,
//! CSV ingestion, satisfying-cut aggregation into extremal intervals,
//! detector-vs-oracle verification, bench sweeps, and the embedded golden
//! scenarios.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::causality::{Frontier, SatcutInterval};
use crate::error::{Error, Result};
use crate::netsim::{self, DelayConfig, RunConfig, RunReport};
use crate::oracle::{self, GlobalView, RegionKey};
use crate::signal::{
    extract_roots, normalize, AgentId, PLTrace, PredicateAtom, SignTrace, SkewBound, Ticks,
    DEFAULT_TICK_HZ,
};

/// Synthetic signal generator configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n_agents: usize,
    pub duration_s: f64,
    /// Target average root rate per agent, in roots per second.
    pub root_rate: f64,
    pub amplitude: f64,
    pub seed: u64,
    #[serde(default = "crate::netsim::default_tick_hz_pub")]
    pub tick_hz: i64,
}

/// Builds a triangle-like piecewise-linear trace that is negative outside
/// the intervals delimited by consecutive root pairs. Roots must be strictly
/// inside `(0, horizon)` with at least two ticks between intervals.
pub fn trace_from_roots(
    agent: AgentId,
    roots: &[Ticks],
    horizon: Ticks,
    amplitude: f64,
) -> Result<PLTrace> {
    if roots.len() < 2 || roots.len() % 2 != 0 {
        return Err(Error::Config(format!(
            "need an even number (>= 2) of roots, got {}",
            roots.len()
        )));
    }
    for w in roots.windows(2) {
        if w[1] < w[0] {
            return Err(Error::Config("roots must be sorted".into()));
        }
    }
    if roots[0].0 < 1 || *roots.last().unwrap() >= horizon {
        return Err(Error::Config(
            "roots must lie strictly inside (0, horizon)".into(),
        ));
    }
    let mut pts: Vec<(Ticks, f64)> = vec![(Ticks::ZERO, -amplitude)];
    for (i, pair) in roots.chunks(2).enumerate() {
        let (l, r) = (pair[0], pair[1]);
        if i > 0 {
            let prev_r = roots[2 * i - 1];
            if l - prev_r < Ticks(2) {
                return Err(Error::Config(format!(
                    "intervals too close at {} (need a 2-tick gap)",
                    l
                )));
            }
            pts.push((Ticks((prev_r.0 + l.0) / 2), -amplitude));
        }
        pts.push((l, 0.0));
        let mid = Ticks((l.0 + r.0) / 2);
        if mid > l && mid < r {
            pts.push((mid, amplitude));
        }
        if r > l {
            pts.push((r, 0.0));
        }
    }
    pts.push((horizon, -amplitude));
    PLTrace::from_points(agent, &pts)
}

/// Generates seeded reproducible traces with exponential inter-root gaps,
/// clipped so the realized root count stays close to the target rate.
pub fn generate(cfg: &GeneratorConfig) -> Result<Vec<PLTrace>> {
    if cfg.root_rate * cfg.duration_s < 2.0 {
        return Err(Error::Config(
            "root_rate * duration must be at least 2".into(),
        ));
    }
    let horizon = Ticks::from_secs(cfg.duration_s, cfg.tick_hz);
    let min_gap_ticks = Ticks::from_secs(0.25 / cfg.root_rate, cfg.tick_hz);
    if min_gap_ticks.0 < 4 {
        return Err(Error::Config(format!(
            "root rate {} is infeasible at {} ticks/s",
            cfg.root_rate, cfg.tick_hz
        )));
    }
    let mut traces = Vec::with_capacity(cfg.n_agents);
    for agent in 0..cfg.n_agents {
        let mut rng = ChaCha8Rng::seed_from_u64(
            cfg.seed ^ (agent as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
        );
        let mut roots: Vec<Ticks> = Vec::new();
        let mut at = 0.0f64;
        // Clipped exponential gaps, rescaled so the mean gap is 1/rate.
        let lo = 0.25 / cfg.root_rate;
        let hi = 2.5 / cfg.root_rate;
        let rescale = 1.0 / 0.9467;
        loop {
            let u: f64 = rng.gen_range(f64::EPSILON..1.0);
            let gap = (-u.ln() / cfg.root_rate).clamp(lo, hi) * rescale;
            at += gap;
            let t = Ticks::from_secs(at, cfg.tick_hz);
            if t >= horizon - min_gap_ticks {
                break;
            }
            let t = match roots.last() {
                Some(&prev) if t < prev + Ticks(2) => prev + Ticks(2),
                _ => t,
            };
            if t >= horizon - min_gap_ticks {
                break;
            }
            roots.push(t);
        }
        if roots.len() % 2 != 0 {
            roots.pop();
        }
        if roots.len() < 2 {
            roots = vec![Ticks(horizon.0 * 2 / 5), Ticks(horizon.0 * 7 / 10)];
        }
        traces.push(trace_from_roots(agent, &roots, horizon, cfg.amplitude)?);
    }
    Ok(traces)
}

/// Snaps roots onto a grid, merging intervals whose boundaries collide
/// after snapping. The result keeps an even count with sorted entries.
pub fn snap_roots_to_grid(roots: &[Ticks], grid: Ticks, horizon: Ticks) -> Vec<Ticks> {
    let snap = |t: Ticks| {
        let k = (t.0 + grid.0 / 2) / grid.0;
        Ticks((k * grid.0).clamp(grid.0, ((horizon.0 - grid.0) / grid.0) * grid.0))
    };
    let mut spans: Vec<(Ticks, Ticks)> = roots
        .chunks(2)
        .map(|pair| {
            let l = snap(pair[0]);
            let r = snap(pair[1]).max(l);
            (l, r)
        })
        .collect();
    spans.sort();
    let mut merged: Vec<(Ticks, Ticks)> = Vec::new();
    for (l, r) in spans {
        match merged.last_mut() {
            Some(last) if l - last.1 < Ticks(2) => last.1 = last.1.max(r),
            _ => merged.push((l, r)),
        }
    }
    merged.into_iter().flat_map(|(l, r)| [l, r]).collect()
}

fn parse_seconds(raw: &str, tick_hz: i64, location: &str) -> Result<Ticks> {
    let s: f64 = raw.trim().parse().map_err(|_| Error::Ingest {
        location: location.to_string(),
        detail: format!("cannot parse time {:?}", raw),
    })?;
    if !s.is_finite() {
        return Err(Error::Ingest {
            location: location.to_string(),
            detail: "non-finite time".into(),
        });
    }
    Ok(Ticks::from_secs(s, tick_hz))
}

/// Reads one or more trace CSVs (`agent,time,value`, times in seconds) and
/// returns normalized traces ready for detection. Accepts per-agent files
/// or a single long-format file; agent labels are sorted and mapped to
/// positions `0..n`.
pub fn ingest(
    paths: &[PathBuf],
    atoms: &[PredicateAtom],
    tick_hz: i64,
    n_agents: Option<usize>,
) -> Result<Vec<PLTrace>> {
    let mut by_agent: BTreeMap<i64, Vec<(Ticks, f64, String)>> = BTreeMap::new();
    for path in paths {
        let mut reader = csv::Reader::from_path(path)?;
        let headers = reader.headers()?.clone();
        let col = |name: &str| -> Result<usize> {
            headers
                .iter()
                .position(|h| h.eq_ignore_ascii_case(name))
                .ok_or_else(|| Error::Ingest {
                    location: path.display().to_string(),
                    detail: format!("missing column {:?}", name),
                })
        };
        let (ca, ct, cv) = (col("agent")?, col("time")?, col("value")?);
        let mut rows = 0usize;
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            let location = format!("{}:{}", path.display(), i + 2);
            let agent: i64 = record[ca].trim().parse().map_err(|_| Error::Ingest {
                location: location.clone(),
                detail: format!("cannot parse agent {:?}", &record[ca]),
            })?;
            let t = parse_seconds(&record[ct], tick_hz, &location)?;
            let value: f64 = record[cv].trim().parse().map_err(|_| Error::Ingest {
                location: location.clone(),
                detail: format!("cannot parse value {:?}", &record[cv]),
            })?;
            if !value.is_finite() {
                return Err(Error::Ingest {
                    location,
                    detail: "NaN or infinite value".into(),
                });
            }
            by_agent
                .entry(agent)
                .or_default()
                .push((t, value, location));
            rows += 1;
        }
        if rows == 0 {
            return Err(Error::Ingest {
                location: path.display().to_string(),
                detail: "file has no data rows".into(),
            });
        }
    }
    if let Some(n) = n_agents {
        if by_agent.len() != n {
            return Err(Error::Ingest {
                location: "<inputs>".into(),
                detail: format!("expected {} agents, found {}", n, by_agent.len()),
            });
        }
    }
    let mut traces = Vec::with_capacity(by_agent.len());
    for (position, (_, rows)) in by_agent.into_iter().enumerate() {
        for w in rows.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::Ingest {
                    location: w[1].2.clone(),
                    detail: format!("non-monotone time {}", w[1].0),
                });
            }
        }
        let trace = PLTrace::from_points(
            position,
            &rows.iter().map(|&(t, v, _)| (t, v)).collect::<Vec<_>>(),
        )?;
        let atom = atoms
            .iter()
            .find(|a| a.agent == position)
            .copied()
            .unwrap_or(PredicateAtom::ge(position, 0.0));
        traces.push(normalize(&trace, &atom)?);
    }
    Ok(traces)
}

/// Groups verified satisfying cuts by region, closes the set under the
/// lattice join and meet so recombined regions are reached, and refines one
/// representative per region into the region's extremal interval.
pub fn aggregate(
    emitted: &[Frontier],
    signs: &[SignTrace],
    eps: SkewBound,
) -> Result<Vec<SatcutInterval>> {
    let mut seen: std::collections::BTreeSet<RegionKey> = std::collections::BTreeSet::new();
    let mut reps: Vec<Frontier> = Vec::new();
    for frontier in emitted {
        if !frontier.is_consistent(eps) || !frontier.satisfies(signs)? {
            return Err(Error::Internal(format!(
                "aggregate given a non-satisfying frontier {:?}",
                frontier.times()
            )));
        }
        if seen.insert(oracle::region_key(signs, &frontier.times())?) {
            reps.push(frontier.clone());
        }
    }

    // The emitted set is closed under join and meet region by region: a
    // combination of two known satcuts can land in a region with no direct
    // emission of its own. The worklist pairs every representative with
    // each earlier one exactly once, including freshly added ones.
    // Comparable pairs combine to themselves and are skipped. Cost is
    // quadratic in the number of reachable regions, acceptable at desk
    // scale where the region count is also the output size.
    let mut i = 0;
    while i < reps.len() {
        for j in 0..i {
            let (a, b) = (&reps[i], &reps[j]);
            let le = a.entries.iter().zip(&b.entries).all(|(x, y)| x.t <= y.t);
            let ge = a.entries.iter().zip(&b.entries).all(|(x, y)| x.t >= y.t);
            if le || ge {
                continue;
            }
            for cand in [a.join(b), a.meet(b)] {
                debug_assert!(cand.is_consistent(eps) && cand.satisfies(signs)?);
                if seen.insert(oracle::region_key(signs, &cand.times())?) {
                    reps.push(cand);
                }
            }
        }
        i += 1;
    }

    let mut intervals: Vec<SatcutInterval> = reps
        .iter()
        .map(|rep| {
            let times = rep.times();
            let leftmost = oracle::leftmost_from_satcut(signs, eps, &times)?;
            let (rightmost, rightmost_satisfying) =
                oracle::rightmost_from_satcut(signs, eps, &times)?;
            Ok(SatcutInterval {
                leftmost,
                rightmost,
                rightmost_satisfying,
            })
        })
        .collect::<Result<_>>()?;
    intervals.sort_by(|a, b| (&a.leftmost, &a.rightmost).cmp(&(&b.leftmost, &b.rightmost)));
    intervals.dedup();
    Ok(intervals)
}

/// Result of a full detection run.
#[derive(Debug)]
pub struct DetectOutcome {
    pub report: RunReport,
    pub signs: Vec<SignTrace>,
    pub intervals: Vec<SatcutInterval>,
}

/// Normalizes traces per the configured atoms, runs the simulation, and
/// aggregates emissions into extremal intervals.
pub fn detect(cfg: &RunConfig, raw_traces: &[PLTrace]) -> Result<DetectOutcome> {
    let traces: Vec<PLTrace> = match &cfg.atoms {
        None => raw_traces.to_vec(),
        Some(atoms) => raw_traces
            .iter()
            .map(|tr| {
                let atom = atoms
                    .iter()
                    .find(|a| a.agent == tr.agent)
                    .copied()
                    .unwrap_or(PredicateAtom::ge(tr.agent, 0.0));
                normalize(tr, &atom)
            })
            .collect::<Result<_>>()?,
    };
    let report = netsim::run(cfg, &traces)?;
    let signs: Vec<SignTrace> = traces.iter().map(extract_roots).collect::<Result<_>>()?;
    let intervals = aggregate(&report.emitted_frontiers(), &signs, cfg.epsilon()?)?;
    Ok(DetectOutcome {
        report,
        signs,
        intervals,
    })
}

/// Oracle view over the same canonical traces a detection run used.
pub fn oracle_view(cfg: &RunConfig, signs: &[SignTrace]) -> Result<GlobalView> {
    GlobalView::new(signs.to_vec(), cfg.clocks()?, cfg.epsilon()?)
}

/// Detector-vs-oracle comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyOutcome {
    pub matches: bool,
    pub detector: Vec<SatcutInterval>,
    pub oracle: Vec<SatcutInterval>,
}

pub fn verify(cfg: &RunConfig, raw_traces: &[PLTrace]) -> Result<VerifyOutcome> {
    let outcome = detect(cfg, raw_traces)?;
    let view = oracle_view(cfg, &outcome.signs)?;
    let mut oracle_intervals: Vec<SatcutInterval> = oracle::enumerate_extremals(&view)
        .into_iter()
        .map(|(_, iv)| iv)
        .collect();
    oracle_intervals.sort_by(|a, b| (&a.leftmost, &a.rightmost).cmp(&(&b.leftmost, &b.rightmost)));
    let matches = outcome.intervals == oracle_intervals;
    Ok(VerifyOutcome {
        matches,
        detector: outcome.intervals,
        oracle: oracle_intervals,
    })
}

/// JSON-lines record for one extremal interval, in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SatcutRecord {
    pub interval_id: usize,
    pub leftmost: Vec<f64>,
    pub rightmost: Vec<f64>,
    pub rightmost_satisfying: bool,
}

pub fn interval_records(intervals: &[SatcutInterval], tick_hz: i64) -> Vec<SatcutRecord> {
    intervals
        .iter()
        .enumerate()
        .map(|(interval_id, iv)| SatcutRecord {
            interval_id,
            leftmost: iv.leftmost.iter().map(|t| t.as_secs(tick_hz)).collect(),
            rightmost: iv.rightmost.iter().map(|t| t.as_secs(tick_hz)).collect(),
            rightmost_satisfying: iv.rightmost_satisfying,
        })
        .collect()
}

/// Writes one CSV per agent into `dir` (`agent,time,value`).
pub fn write_traces_csv(dir: &Path, traces: &[PLTrace], tick_hz: i64) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for trace in traces {
        let path = dir.join(format!("trace_agent{}.csv", trace.agent));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["agent", "time", "value"])?;
        for s in trace.samples() {
            w.write_record([
                trace.agent.to_string(),
                format!("{:.6}", s.t.as_secs(tick_hz)),
                format!("{}", s.value),
            ])?;
        }
        w.flush()?;
        paths.push(path);
    }
    Ok(paths)
}

// ---------------------------------------------------------------------------
// Bench sweep.

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub n_agents: Vec<usize>,
    pub root_rates: Vec<f64>,
    pub duration_s: f64,
    pub epsilon_s: f64,
    #[serde(default = "crate::netsim::default_tick_hz_pub")]
    pub tick_hz: i64,
    pub reps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub n_agents: usize,
    pub root_rate: f64,
    pub reps: usize,
    pub r_total_mean: f64,
    pub discrete_events_mean: f64,
    pub slicer_created_mean: f64,
    pub abstractor_msgs_mean: f64,
    pub token_msgs_mean: f64,
    pub wall_ms_mean: f64,
    pub wall_ms_ci95: f64,
}

/// Two-sided 97.5% Student-t quantiles for small degrees of freedom;
/// normal approximation beyond the table.
fn t_quantile_975(df: usize) -> f64 {
    const TABLE: [f64; 30] = [
        12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179, 2.160,
        2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056,
        2.052, 2.048, 2.045, 2.042,
    ];
    if df == 0 {
        f64::INFINITY
    } else if df <= TABLE.len() {
        TABLE[df - 1]
    } else {
        1.96
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn ci95(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    t_quantile_975(xs.len() - 1) * (var / xs.len() as f64).sqrt()
}

/// Ordinary least squares fit `y = intercept + slope * x`.
pub fn fit_linear(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let mx = mean(xs);
    let my = mean(ys);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = if sxx == 0.0 { 0.0 } else { sxy / sxx };
    (my - slope * mx, slope)
}

/// Runs the (N, rate) sweep with `reps` repetitions per cell. Wall times
/// are reported but never asserted; only event and message counts are.
pub fn bench(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    if cfg.reps < 3 {
        return Err(Error::Config("bench needs at least 3 repetitions".into()));
    }
    let mut rows = Vec::new();
    for &n in &cfg.n_agents {
        for &rate in &cfg.root_rates {
            let mut wall_ms = Vec::new();
            let mut r_total = Vec::new();
            let mut d = Vec::new();
            let mut m = Vec::new();
            let mut abs_msgs = Vec::new();
            let mut tok_msgs = Vec::new();
            for rep in 0..cfg.reps {
                let gen = GeneratorConfig {
                    n_agents: n,
                    duration_s: cfg.duration_s,
                    root_rate: rate,
                    amplitude: 1.0,
                    seed: cfg
                        .seed
                        .wrapping_add((n as u64) << 40)
                        .wrapping_add((rate as u64) << 20)
                        .wrapping_add(rep as u64),
                    tick_hz: cfg.tick_hz,
                };
                let traces = generate(&gen)?;
                let run_cfg = RunConfig {
                    n_agents: n,
                    epsilon_s: cfg.epsilon_s,
                    tick_hz: cfg.tick_hz,
                    horizon_s: cfg.duration_s,
                    delay: DelayConfig::Constant { delay_s: 0.001 },
                    clock_offsets: None,
                    seed: gen.seed,
                    atoms: None,
                    capture_logs: false,
                };
                let start = Instant::now();
                let report = netsim::run(&run_cfg, &traces)?;
                wall_ms.push(start.elapsed().as_secs_f64() * 1e3);
                let mm = report.metrics;
                r_total.push(mm.r_total as f64);
                d.push(mm.discrete_events as f64);
                m.push(mm.slicer_created as f64);
                abs_msgs.push(mm.abstractor_msgs as f64);
                tok_msgs.push(mm.token_msgs as f64);
            }
            rows.push(BenchRow {
                n_agents: n,
                root_rate: rate,
                reps: cfg.reps,
                r_total_mean: mean(&r_total),
                discrete_events_mean: mean(&d),
                slicer_created_mean: mean(&m),
                abstractor_msgs_mean: mean(&abs_msgs),
                token_msgs_mean: mean(&tok_msgs),
                wall_ms_mean: mean(&wall_ms),
                wall_ms_ci95: ci95(&wall_ms),
            });
        }
    }
    Ok(rows)
}

pub fn write_bench_csv(path: &Path, rows: &[BenchRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "n_agents",
        "root_rate",
        "reps",
        "r_total_mean",
        "discrete_events_mean",
        "slicer_created_mean",
        "abstractor_msgs_mean",
        "token_msgs_mean",
        "wall_ms_mean",
        "wall_ms_ci95",
    ])?;
    for r in rows {
        w.write_record([
            r.n_agents.to_string(),
            r.root_rate.to_string(),
            r.reps.to_string(),
            r.r_total_mean.to_string(),
            r.discrete_events_mean.to_string(),
            r.slicer_created_mean.to_string(),
            r.abstractor_msgs_mean.to_string(),
            r.token_msgs_mean.to_string(),
            r.wall_ms_mean.to_string(),
            r.wall_ms_ci95.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Golden scenarios.

/// Built-in regression scenarios with embedded expected output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Fig1,
    Fig4,
}

impl std::str::FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Scenario> {
        match s {
            "fig1" => Ok(Scenario::Fig1),
            "fig4" => Ok(Scenario::Fig4),
            other => Err(Error::Config(format!("unknown scenario {:?}", other))),
        }
    }
}

pub fn scenario_config(scenario: Scenario) -> RunConfig {
    RunConfig {
        n_agents: match scenario {
            Scenario::Fig1 => 3,
            Scenario::Fig4 => 2,
        },
        epsilon_s: 1.0,
        tick_hz: DEFAULT_TICK_HZ,
        horizon_s: 8.0,
        delay: DelayConfig::Constant { delay_s: 0.01 },
        clock_offsets: None,
        seed: 0,
        atoms: None,
        capture_logs: true,
    }
}

pub fn scenario_traces(scenario: Scenario) -> Result<Vec<PLTrace>> {
    let hz = DEFAULT_TICK_HZ;
    let horizon = Ticks::from_secs(8.0, hz);
    let spans: Vec<[f64; 2]> = match scenario {
        Scenario::Fig1 => vec![[1.0, 4.0], [2.0, 5.5], [2.5, 4.0]],
        Scenario::Fig4 => vec![[2.0, 6.0], [3.5, 5.8]],
    };
    spans
        .iter()
        .enumerate()
        .map(|(agent, span)| {
            trace_from_roots(
                agent,
                &[Ticks::from_secs(span[0], hz), Ticks::from_secs(span[1], hz)],
                horizon,
                1.0,
            )
        })
        .collect()
}

/// Outcome of replaying a golden scenario against its embedded expectation.
#[derive(Debug)]
pub struct GoldenOutcome {
    pub report: RunReport,
    pub intervals: Vec<SatcutInterval>,
    pub failures: Vec<String>,
}

impl GoldenOutcome {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

pub fn run_golden(scenario: Scenario) -> Result<GoldenOutcome> {
    let cfg = scenario_config(scenario);
    let outcome = detect(&cfg, &scenario_traces(scenario)?)?;
    let hz = cfg.tick_hz;
    let s = |v: f64| Ticks::from_secs(v, hz);
    let mut failures = Vec::new();

    match scenario {
        Scenario::Fig1 => {
            let expected = vec![SatcutInterval {
                leftmost: vec![s(1.5), s(2.0), s(2.5)],
                rightmost: vec![s(4.0), s(5.0), s(4.0)],
                rightmost_satisfying: true,
            }];
            if outcome.intervals != expected {
                failures.push(format!(
                    "extremal intervals {:?} != expected {:?}",
                    outcome.intervals, expected
                ));
            }
        }
        Scenario::Fig4 => {
            let mut emitted: Vec<Vec<Ticks>> = outcome
                .report
                .satcuts
                .iter()
                .map(|e| e.frontier.times())
                .collect();
            emitted.sort();
            emitted.dedup();
            let mut expected_emissions = vec![
                vec![s(2.5), s(3.5)],
                vec![s(4.8), s(5.8)],
                vec![s(6.0), s(5.0)],
            ];
            expected_emissions.sort();
            if emitted != expected_emissions {
                failures.push(format!(
                    "emitted satcuts {:?} != expected {:?}",
                    emitted, expected_emissions
                ));
            }
            let expected_intervals = vec![SatcutInterval {
                leftmost: vec![s(2.5), s(3.5)],
                rightmost: vec![s(6.0), s(5.8)],
                rightmost_satisfying: true,
            }];
            if outcome.intervals != expected_intervals {
                failures.push(format!(
                    "extremal intervals {:?} != expected {:?}",
                    outcome.intervals, expected_intervals
                ));
            }
            // The completing tokens must have created the two in-between
            // events on agent 0, in order.
            let creations: Vec<Ticks> = outcome
                .report
                .slicer_logs
                .iter()
                .filter(|l| l.agent == 0 && l.action == "created")
                .filter_map(|l| l.t)
                .collect();
            if creations != vec![s(2.5), s(4.8)] {
                failures.push(format!(
                    "agent-0 created events {:?} != expected [2.5s, 4.8s]",
                    creations
                ));
            }
        }
    }
    Ok(GoldenOutcome {
        report: outcome.report,
        intervals: outcome.intervals,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(secs: f64) -> Ticks {
        Ticks::from_secs(secs, DEFAULT_TICK_HZ)
    }

    #[test]
    fn generate_hits_target_rate() {
        let cfg = GeneratorConfig {
            n_agents: 4,
            duration_s: 5.0,
            root_rate: 10.0,
            amplitude: 1.0,
            seed: 7,
            tick_hz: DEFAULT_TICK_HZ,
        };
        let traces = generate(&cfg).unwrap();
        assert_eq!(traces.len(), 4);
        for trace in &traces {
            let st = extract_roots(trace).unwrap();
            let count = st.roots().len();
            let target = cfg.root_rate * cfg.duration_s;
            assert!(
                (count as f64 - target).abs() <= 0.2 * target,
                "agent {}: {} roots vs target {}",
                trace.agent,
                count,
                target
            );
            // Starts and ends negative: every interval interior.
            assert!(st.intervals.iter().all(|iv| {
                iv.start_tag != crate::signal::EndpointTag::HorizonBoundary
                    && iv.end_tag != crate::signal::EndpointTag::HorizonBoundary
            }));
        }
    }

    #[test]
    fn generate_minimal_rate_gives_single_interval() {
        let cfg = GeneratorConfig {
            n_agents: 1,
            duration_s: 1.0,
            root_rate: 2.0,
            amplitude: 1.0,
            seed: 3,
            tick_hz: DEFAULT_TICK_HZ,
        };
        let traces = generate(&cfg).unwrap();
        let st = extract_roots(&traces[0]).unwrap();
        assert_eq!(st.intervals.len(), 1);
    }

    #[test]
    fn generate_is_deterministic() {
        let cfg = GeneratorConfig {
            n_agents: 2,
            duration_s: 5.0,
            root_rate: 10.0,
            amplitude: 1.0,
            seed: 11,
            tick_hz: DEFAULT_TICK_HZ,
        };
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
    }

    #[test]
    fn ingest_applies_uav_style_atom() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("uav.csv");
        std::fs::write(
            &path,
            "agent,time,value\n0,0.0,12.0\n0,1.0,8.0\n0,2.0,15.0\n1,0.0,11.0\n1,2.0,11.0\n",
        )
        .unwrap();
        let traces = ingest(
            &[path],
            &[PredicateAtom::ge(0, 10.0), PredicateAtom::ge(1, 10.0)],
            DEFAULT_TICK_HZ,
            Some(2),
        )
        .unwrap();
        assert_eq!(traces[0].value_at(t(0.0)).unwrap(), 2.0);
        assert_eq!(traces[0].value_at(t(1.0)).unwrap(), -2.0);
        assert_eq!(traces[1].value_at(t(2.0)).unwrap(), 1.0);
    }

    #[test]
    fn ingest_rejects_empty_and_non_monotone() {
        let dir = tempfile::tempdir().unwrap();
        let empty = dir.path().join("empty.csv");
        std::fs::write(&empty, "agent,time,value\n").unwrap();
        assert!(matches!(
            ingest(&[empty], &[], DEFAULT_TICK_HZ, None),
            Err(Error::Ingest { .. })
        ));

        let bad = dir.path().join("bad.csv");
        std::fs::write(&bad, "agent,time,value\n0,1.0,1.0\n0,0.5,1.0\n").unwrap();
        let err = ingest(&[bad], &[], DEFAULT_TICK_HZ, None).unwrap_err();
        match err {
            Error::Ingest { location, .. } => assert!(location.ends_with(":3")),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn detector_reports_nothing_when_one_conjunct_never_holds() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("flat.csv");
        std::fs::write(
            &path,
            "agent,time,value\n0,0.0,15.0\n0,6.0,15.0\n1,0.0,5.0\n1,6.0,5.0\n",
        )
        .unwrap();
        let traces = ingest(
            &[path],
            &[PredicateAtom::ge(0, 10.0), PredicateAtom::ge(1, 10.0)],
            DEFAULT_TICK_HZ,
            Some(2),
        )
        .unwrap();
        let cfg = RunConfig {
            n_agents: 2,
            epsilon_s: 0.05,
            tick_hz: DEFAULT_TICK_HZ,
            horizon_s: 6.0,
            delay: DelayConfig::Constant { delay_s: 0.01 },
            clock_offsets: None,
            seed: 0,
            atoms: None,
            capture_logs: false,
        };
        let outcome = detect(&cfg, &traces).unwrap();
        assert!(outcome.intervals.is_empty());
    }

    #[test]
    fn aggregate_reproduces_walkthrough_extremals() {
        let traces = scenario_traces(Scenario::Fig4).unwrap();
        let signs: Vec<SignTrace> = traces.iter().map(|tr| extract_roots(tr).unwrap()).collect();
        let eps = SkewBound::new(t(1.0)).unwrap();
        let emitted = vec![
            Frontier::from_times(&[t(2.5), t(3.5)]),
            Frontier::from_times(&[t(4.8), t(5.8)]),
            Frontier::from_times(&[t(6.0), t(5.0)]),
        ];
        let intervals = aggregate(&emitted, &signs, eps).unwrap();
        assert_eq!(
            intervals,
            vec![SatcutInterval {
                leftmost: vec![t(2.5), t(3.5)],
                rightmost: vec![t(6.0), t(5.8)],
                rightmost_satisfying: true,
            }]
        );
    }

    #[test]
    fn aggregate_single_satcut_refines_by_region() {
        let traces = scenario_traces(Scenario::Fig4).unwrap();
        let signs: Vec<SignTrace> = traces.iter().map(|tr| extract_roots(tr).unwrap()).collect();
        let eps = SkewBound::new(t(1.0)).unwrap();
        let emitted = vec![Frontier::from_times(&[t(4.0), t(4.0)])];
        let intervals = aggregate(&emitted, &signs, eps).unwrap();
        assert_eq!(intervals[0].leftmost, vec![t(2.5), t(3.5)]);
        assert_eq!(intervals[0].rightmost, vec![t(6.0), t(5.8)]);
    }

    #[test]
    fn aggregate_rejects_non_satcuts() {
        let traces = scenario_traces(Scenario::Fig4).unwrap();
        let signs: Vec<SignTrace> = traces.iter().map(|tr| extract_roots(tr).unwrap()).collect();
        let eps = SkewBound::new(t(1.0)).unwrap();
        let bogus = vec![Frontier::from_times(&[t(0.5), t(0.5)])];
        assert!(matches!(
            aggregate(&bogus, &signs, eps),
            Err(Error::Internal(_))
        ));
    }

    #[test]
    fn verify_agrees_on_random_two_agent_instance() {
        let gen = GeneratorConfig {
            n_agents: 2,
            duration_s: 5.0,
            root_rate: 3.0,
            amplitude: 1.0,
            seed: 21,
            tick_hz: DEFAULT_TICK_HZ,
        };
        let traces = generate(&gen).unwrap();
        let cfg = RunConfig {
            n_agents: 2,
            epsilon_s: 0.5,
            tick_hz: DEFAULT_TICK_HZ,
            horizon_s: 5.0,
            delay: DelayConfig::Constant { delay_s: 0.01 },
            clock_offsets: None,
            seed: 21,
            atoms: None,
            capture_logs: false,
        };
        let outcome = verify(&cfg, &traces).unwrap();
        assert!(
            outcome.matches,
            "detector {:?} oracle {:?}",
            outcome.detector, outcome.oracle
        );
    }

    #[test]
    fn bench_single_agent_needs_no_tokens() {
        let cfg = BenchConfig {
            n_agents: vec![1],
            root_rates: vec![4.0],
            duration_s: 3.0,
            epsilon_s: 0.05,
            tick_hz: DEFAULT_TICK_HZ,
            reps: 3,
            seed: 5,
        };
        let rows = bench(&cfg).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].token_msgs_mean, 0.0);
    }

    #[test]
    fn golden_scenarios_pass() {
        for scenario in [Scenario::Fig1, Scenario::Fig4] {
            let outcome = run_golden(scenario).unwrap();
            assert!(outcome.passed(), "failures: {:?}", outcome.failures);
        }
    }

    #[test]
    fn snap_merges_colliding_intervals() {
        let grid = t(0.05);
        let horizon = t(4.0);
        let roots = vec![t(1.02), t(1.26), t(1.27), t(1.9)];
        let snapped = snap_roots_to_grid(&roots, grid, horizon);
        assert_eq!(snapped, vec![t(1.0), t(1.9)]);
        for r in &snapped {
            assert_eq!(r.0 % grid.0, 0);
        }
    }
}
