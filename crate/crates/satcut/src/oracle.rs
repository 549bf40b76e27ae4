//! Centralized ground truth: constructive extremal-cut computation per
//! region of non-negative intervals, a brute-force grid enumerator for
//! independent verification, and structural classification of extremal
//! frontiers.

use serde::{Deserialize, Serialize};

use crate::causality::SatcutInterval;
use crate::error::{Error, Result};
use crate::signal::{EndpointTag, LocalClock, SignTrace, SkewBound, Ticks};

/// Everything the oracle may see, including true clock drift. Never fed to
/// the decentralized detector.
#[derive(Debug, Clone)]
pub struct GlobalView {
    pub signs: Vec<SignTrace>,
    pub clocks: Vec<LocalClock>,
    pub eps: SkewBound,
    pub horizon: Ticks,
}

impl GlobalView {
    pub fn new(
        signs: Vec<SignTrace>,
        clocks: Vec<LocalClock>,
        eps: SkewBound,
    ) -> Result<GlobalView> {
        let horizon = signs
            .first()
            .map(|s| s.horizon)
            .ok_or_else(|| Error::Config("oracle view needs at least one agent".into()))?;
        if signs.iter().any(|s| s.horizon != horizon) {
            return Err(Error::Config("agents disagree on the horizon".into()));
        }
        Ok(GlobalView {
            signs,
            clocks,
            eps,
            horizon,
        })
    }

    pub fn n_agents(&self) -> usize {
        self.signs.len()
    }
}

/// Per-agent index of the non-negative interval containing each frontier
/// component. All satisfying cuts inside one extremal interval share it.
pub type RegionKey = Vec<usize>;

/// Region key of a satisfying frontier.
pub fn region_key(signs: &[SignTrace], frontier: &[Ticks]) -> Result<RegionKey> {
    frontier
        .iter()
        .enumerate()
        .map(|(agent, &t)| {
            signs[agent].interval_index(t).ok_or_else(|| {
                Error::Internal(format!(
                    "frontier component {} on agent {} is not in a non-negative interval",
                    t, agent
                ))
            })
        })
        .collect()
}

/// Leftmost satisfying cut of the region containing `frontier`.
///
/// Each component's largest backward shift preserving non-negativity is the
/// distance to its interval's left end; the component with the latest left
/// end anchors the rest at no more than the skew bound behind it.
pub fn leftmost_from_satcut(
    signs: &[SignTrace],
    eps: SkewBound,
    frontier: &[Ticks],
) -> Result<Vec<Ticks>> {
    let key = region_key(signs, frontier)?;
    Ok(leftmost_of_region(signs, eps, &key))
}

/// Rightmost cut of the region containing `frontier`, with a flag telling
/// whether it satisfies the predicate (a discontinuous right end does not).
pub fn rightmost_from_satcut(
    signs: &[SignTrace],
    eps: SkewBound,
    frontier: &[Ticks],
) -> Result<(Vec<Ticks>, bool)> {
    let key = region_key(signs, frontier)?;
    Ok(rightmost_of_region(signs, eps, &key))
}

fn leftmost_of_region(signs: &[SignTrace], eps: SkewBound, key: &[usize]) -> Vec<Ticks> {
    let lefts: Vec<Ticks> = key
        .iter()
        .enumerate()
        .map(|(agent, &i)| signs[agent].intervals[i].start)
        .collect();
    let anchor = *lefts.iter().max().unwrap();
    lefts
        .iter()
        .map(|&l| l.max((anchor - eps.ticks()).max(Ticks::ZERO)))
        .collect()
}

fn rightmost_of_region(signs: &[SignTrace], eps: SkewBound, key: &[usize]) -> (Vec<Ticks>, bool) {
    let rights: Vec<(Ticks, bool)> = key
        .iter()
        .enumerate()
        .map(|(agent, &i)| {
            let iv = signs[agent].intervals[i];
            (iv.end, iv.right_open)
        })
        .collect();
    let anchor = rights.iter().map(|&(r, _)| r).min().unwrap();
    let frontier: Vec<Ticks> = rights
        .iter()
        .map(|&(r, _)| r.min(anchor + eps.ticks()))
        .collect();
    let satisfying = frontier
        .iter()
        .zip(&rights)
        .all(|(&b, &(r, open))| !(open && b == r));
    (frontier, satisfying)
}

/// Enumerates one extremal interval per region that admits a consistent,
/// satisfying frontier. Cost is the product of per-agent interval counts;
/// the oracle is a test instrument, not a product feature.
pub fn enumerate_extremals(view: &GlobalView) -> Vec<(RegionKey, SatcutInterval)> {
    let n = view.n_agents();
    let eps = view.eps.ticks();
    let mut out = Vec::new();
    let mut key = vec![0usize; n];

    fn feasible_so_far(signs: &[SignTrace], key: &[usize], depth: usize, eps: Ticks) -> bool {
        let mut max_l = Ticks(i64::MIN);
        let mut min_u = Ticks(i64::MAX);
        for agent in 0..depth {
            let iv = signs[agent].intervals[key[agent]];
            let usable_end = if iv.right_open {
                Ticks(iv.end.0 - 1)
            } else {
                iv.end
            };
            max_l = max_l.max(iv.start);
            min_u = min_u.min(usable_end);
        }
        max_l - min_u <= eps
    }

    fn rec(
        view: &GlobalView,
        key: &mut RegionKey,
        depth: usize,
        eps: Ticks,
        out: &mut Vec<(RegionKey, SatcutInterval)>,
    ) {
        if depth == view.n_agents() {
            let leftmost = leftmost_of_region(&view.signs, view.eps, key);
            let (rightmost, rightmost_satisfying) = rightmost_of_region(&view.signs, view.eps, key);
            out.push((
                key.clone(),
                SatcutInterval {
                    leftmost,
                    rightmost,
                    rightmost_satisfying,
                },
            ));
            return;
        }
        for i in 0..view.signs[depth].intervals.len() {
            key[depth] = i;
            if feasible_so_far(&view.signs, key, depth + 1, eps) {
                rec(view, key, depth + 1, eps, out);
            }
        }
    }

    if view.signs.iter().all(|s| !s.intervals.is_empty()) {
        rec(view, &mut key, 0, eps, &mut out);
    }
    out
}

/// Enumerates every frontier on the grid whose components all satisfy the
/// predicate and whose span is within the skew bound.
pub fn brute_force_satcuts(view: &GlobalView, grid_step: Ticks) -> Result<Vec<Vec<Ticks>>> {
    if grid_step.0 <= 0 {
        return Err(Error::Config("grid step must be positive".into()));
    }
    if view.eps.ticks().0 % grid_step.0 != 0 {
        return Err(Error::Config(format!(
            "grid step {} does not divide the skew bound {}",
            grid_step,
            view.eps.ticks()
        )));
    }
    for sign in &view.signs {
        for iv in &sign.intervals {
            if iv.start.0 % grid_step.0 != 0 || iv.end.0 % grid_step.0 != 0 {
                return Err(Error::Config(format!(
                    "grid too coarse: root at {} on agent {} is off-grid",
                    iv.start, sign.agent
                )));
            }
        }
    }

    // Per-agent satisfying grid points.
    let sat_points: Vec<Vec<Ticks>> = view
        .signs
        .iter()
        .map(|sign| {
            (0..=view.horizon.0 / grid_step.0)
                .map(|k| Ticks(k * grid_step.0))
                .filter(|&t| sign.truth_at(t))
                .collect()
        })
        .collect();

    let mut out = Vec::new();
    let mut frontier = vec![Ticks::ZERO; view.n_agents()];

    fn rec(
        sat_points: &[Vec<Ticks>],
        eps: Ticks,
        depth: usize,
        min: Ticks,
        max: Ticks,
        frontier: &mut Vec<Ticks>,
        out: &mut Vec<Vec<Ticks>>,
    ) {
        if depth == sat_points.len() {
            out.push(frontier.clone());
            return;
        }
        for &t in &sat_points[depth] {
            let lo = min.min(t);
            let hi = max.max(t);
            if hi - lo > eps {
                if t > max {
                    break;
                }
                continue;
            }
            frontier[depth] = t;
            rec(sat_points, eps, depth + 1, lo, hi, frontier, out);
        }
    }

    rec(
        &sat_points,
        view.eps.ticks(),
        0,
        Ticks(i64::MAX),
        Ticks(i64::MIN),
        &mut frontier,
        &mut out,
    );
    Ok(out)
}

/// Structural role of one extremal frontier component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtremalTag {
    Root,
    EpsOffset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtremalSide {
    Leftmost,
    Rightmost,
}

/// Checks the structural shape of an extremal frontier: a rightmost cut is
/// made of right roots and instants exactly the skew bound after its
/// earliest component (itself a right root); a leftmost satisfying cut is
/// made of left roots and instants exactly the skew bound before its latest
/// component (itself a left root).
pub fn classify_extremal(
    view: &GlobalView,
    frontier: &[Ticks],
    side: ExtremalSide,
) -> Result<Vec<ExtremalTag>> {
    let eps = view.eps.ticks();
    let mut tags = Vec::with_capacity(frontier.len());
    match side {
        ExtremalSide::Rightmost => {
            let min = *frontier.iter().min().unwrap();
            for (agent, &t) in frontier.iter().enumerate() {
                let sign = &view.signs[agent];
                let is_right_root = sign
                    .intervals
                    .iter()
                    .any(|iv| iv.end == t && iv.end_tag == EndpointTag::RightRoot);
                if is_right_root {
                    tags.push(ExtremalTag::Root);
                } else if t == min + eps {
                    tags.push(ExtremalTag::EpsOffset);
                } else {
                    return Err(Error::Structural(format!(
                        "rightmost component {} on agent {} is neither a right root nor offset from {}",
                        t, agent, min
                    )));
                }
            }
            let min_agent = frontier.iter().position(|&t| t == min).unwrap();
            if tags[min_agent] != ExtremalTag::Root {
                return Err(Error::Structural(
                    "earliest component of a rightmost cut must be a right root".into(),
                ));
            }
        }
        ExtremalSide::Leftmost => {
            let max = *frontier.iter().max().unwrap();
            for (agent, &t) in frontier.iter().enumerate() {
                let sign = &view.signs[agent];
                let is_left_root = sign
                    .intervals
                    .iter()
                    .any(|iv| iv.start == t && iv.start_tag == EndpointTag::LeftRoot);
                if is_left_root {
                    tags.push(ExtremalTag::Root);
                } else if t + eps == max {
                    tags.push(ExtremalTag::EpsOffset);
                } else {
                    return Err(Error::Structural(format!(
                        "leftmost component {} on agent {} is neither a left root nor offset from {}",
                        t, agent, max
                    )));
                }
            }
            let max_agent = frontier.iter().position(|&t| t == max).unwrap();
            if tags[max_agent] != ExtremalTag::Root {
                return Err(Error::Structural(
                    "latest component of a leftmost satcut must be a left root".into(),
                ));
            }
        }
    }
    Ok(tags)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{extract_roots, LocalClock, PLTrace, DEFAULT_TICK_HZ};

    fn t(secs: f64) -> Ticks {
        Ticks::from_secs(secs, DEFAULT_TICK_HZ)
    }

    fn eps1() -> SkewBound {
        SkewBound::new(t(1.0)).unwrap()
    }

    fn sign_for(agent: usize, spans: &[(f64, f64)], horizon: f64) -> SignTrace {
        let mut pts = vec![(Ticks::ZERO, -1.0)];
        for &(l, r) in spans {
            pts.push((t(l), 0.0));
            if t((l + r) / 2.0) > t(l) && t((l + r) / 2.0) < t(r) {
                pts.push((t((l + r) / 2.0), 1.0));
            }
            pts.push((t(r), 0.0));
            pts.push((t(r) + Ticks(1), -1.0));
        }
        pts.push((t(horizon), -1.0));
        pts.dedup_by_key(|p| p.0);
        extract_roots(&PLTrace::from_points(agent, &pts).unwrap()).unwrap()
    }

    fn fig1_view() -> GlobalView {
        let signs = vec![
            sign_for(0, &[(1.0, 4.0)], 8.0),
            sign_for(1, &[(2.0, 5.5)], 8.0),
            sign_for(2, &[(2.5, 4.0)], 8.0),
        ];
        let clocks = (0..3).map(LocalClock::identity).collect();
        GlobalView::new(signs, clocks, eps1()).unwrap()
    }

    #[test]
    fn leftmost_from_fig1_satcut() {
        let view = fig1_view();
        let fr = vec![t(3.0), t(3.5), t(3.0)];
        let left = leftmost_from_satcut(&view.signs, view.eps, &fr).unwrap();
        assert_eq!(left, vec![t(1.5), t(2.0), t(2.5)]);
        // Idempotent.
        assert_eq!(
            leftmost_from_satcut(&view.signs, view.eps, &left).unwrap(),
            left
        );
    }

    #[test]
    fn rightmost_from_fig1_satcut() {
        let view = fig1_view();
        let fr = vec![t(3.0), t(3.5), t(3.0)];
        let (right, sat) = rightmost_from_satcut(&view.signs, view.eps, &fr).unwrap();
        assert_eq!(right, vec![t(4.0), t(5.0), t(4.0)]);
        assert!(sat);
        let (again, _) = rightmost_from_satcut(&view.signs, view.eps, &right).unwrap();
        assert_eq!(again, right);
    }

    #[test]
    fn two_agent_scenario_extremals() {
        let signs = vec![
            sign_for(0, &[(2.0, 6.0)], 8.0),
            sign_for(1, &[(3.5, 5.8)], 8.0),
        ];
        let clocks = (0..2).map(LocalClock::identity).collect();
        let view = GlobalView::new(signs, clocks, eps1()).unwrap();
        let fr = vec![t(4.0), t(4.0)];
        assert_eq!(
            leftmost_from_satcut(&view.signs, view.eps, &fr).unwrap(),
            vec![t(2.5), t(3.5)]
        );
        let (right, sat) = rightmost_from_satcut(&view.signs, view.eps, &fr).unwrap();
        assert_eq!(right, vec![t(6.0), t(5.8)]);
        assert!(sat);
    }

    #[test]
    fn enumerate_fig1_finds_exactly_one_interval() {
        let view = fig1_view();
        let intervals = enumerate_extremals(&view);
        assert_eq!(intervals.len(), 1);
        let (key, iv) = &intervals[0];
        assert_eq!(key, &vec![0, 0, 0]);
        assert_eq!(iv.leftmost, vec![t(1.5), t(2.0), t(2.5)]);
        assert_eq!(iv.rightmost, vec![t(4.0), t(5.0), t(4.0)]);
        assert!(iv.rightmost_satisfying);
    }

    #[test]
    fn intervals_farther_than_skew_apart_yield_nothing() {
        let signs = vec![
            sign_for(0, &[(1.0, 2.0)], 8.0),
            sign_for(1, &[(4.0, 5.0)], 8.0),
        ];
        let clocks = (0..2).map(LocalClock::identity).collect();
        let view = GlobalView::new(signs, clocks, eps1()).unwrap();
        assert!(enumerate_extremals(&view).is_empty());
    }

    #[test]
    fn brute_force_validates_grid() {
        let view = fig1_view();
        assert!(matches!(
            brute_force_satcuts(&view, Ticks(0)),
            Err(Error::Config(_))
        ));
        // 0.3s does not divide eps = 1s.
        assert!(matches!(
            brute_force_satcuts(&view, t(0.3)),
            Err(Error::Config(_))
        ));
        // Roots at 5.5 are off a 1s grid.
        assert!(matches!(
            brute_force_satcuts(&view, t(1.0)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn brute_force_all_negative_is_empty() {
        let signs = vec![sign_for(0, &[], 8.0)];
        let view = GlobalView::new(signs, vec![LocalClock::identity(0)], eps1()).unwrap();
        assert!(brute_force_satcuts(&view, t(0.5)).unwrap().is_empty());
    }

    #[test]
    fn brute_force_single_agent_is_grid_points_of_intervals() {
        let signs = vec![sign_for(0, &[(1.0, 2.5)], 8.0)];
        let view = GlobalView::new(signs, vec![LocalClock::identity(0)], eps1()).unwrap();
        let cuts = brute_force_satcuts(&view, t(0.5)).unwrap();
        let times: Vec<Ticks> = cuts.into_iter().map(|c| c[0]).collect();
        assert_eq!(times, vec![t(1.0), t(1.5), t(2.0), t(2.5)]);
    }

    #[test]
    fn sandwich_on_fig1_grid() {
        let view = fig1_view();
        let intervals = enumerate_extremals(&view);
        let cuts = brute_force_satcuts(&view, t(0.5)).unwrap();
        for cut in &cuts {
            let inside = intervals.iter().any(|(_, iv)| {
                cut.iter()
                    .enumerate()
                    .all(|(n, &c)| iv.leftmost[n] <= c && c <= iv.rightmost[n])
            });
            assert!(inside, "grid satcut {:?} outside every interval", cut);
        }
    }

    #[test]
    fn classify_fig1_extremals() {
        let view = fig1_view();
        let right = vec![t(4.0), t(5.0), t(4.0)];
        let tags = classify_extremal(&view, &right, ExtremalSide::Rightmost).unwrap();
        assert_eq!(
            tags,
            vec![ExtremalTag::Root, ExtremalTag::EpsOffset, ExtremalTag::Root]
        );
        let left = vec![t(1.5), t(2.0), t(2.5)];
        let tags = classify_extremal(&view, &left, ExtremalSide::Leftmost).unwrap();
        assert_eq!(
            tags,
            vec![ExtremalTag::EpsOffset, ExtremalTag::Root, ExtremalTag::Root]
        );
    }

    #[test]
    fn classify_single_agent() {
        let signs = vec![sign_for(0, &[(1.0, 2.5)], 8.0)];
        let view = GlobalView::new(signs, vec![LocalClock::identity(0)], eps1()).unwrap();
        assert_eq!(
            classify_extremal(&view, &[t(1.0)], ExtremalSide::Leftmost).unwrap(),
            vec![ExtremalTag::Root]
        );
        assert_eq!(
            classify_extremal(&view, &[t(2.5)], ExtremalSide::Rightmost).unwrap(),
            vec![ExtremalTag::Root]
        );
    }

    #[test]
    fn discontinuous_right_end_flags_nonsatisfying_rightmost() {
        use crate::signal::TraceSample;
        let samples = vec![
            TraceSample {
                t: Ticks::ZERO,
                value: -1.0,
                jump: false,
            },
            TraceSample {
                t: t(1.0),
                value: 1.0,
                jump: false,
            },
            TraceSample {
                t: t(3.0),
                value: -1.0,
                jump: true,
            },
            TraceSample {
                t: t(8.0),
                value: -1.0,
                jump: false,
            },
        ];
        let sign = extract_roots(&PLTrace::new(0, samples).unwrap()).unwrap();
        let signs = vec![sign, sign_for(1, &[(1.5, 6.0)], 8.0)];
        let clocks = (0..2).map(LocalClock::identity).collect();
        let view = GlobalView::new(signs, clocks, eps1()).unwrap();
        let intervals = enumerate_extremals(&view);
        assert_eq!(intervals.len(), 1);
        let iv = &intervals[0].1;
        assert_eq!(iv.rightmost, vec![t(3.0), t(4.0)]);
        assert!(!iv.rightmost_satisfying);
    }
}
