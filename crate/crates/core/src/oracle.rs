//! Exact reference solver for desk-scale instances, plus a literal evaluator
//! that recomputes the objective from materialized decision arrays.
//!
//! The objective is a sum of per-section terms, and sections interact only
//! through room occupancy. So the search enumerates, per section, every
//! feasible (room set, meeting subset) option with its cost, and runs a
//! depth-first branch and bound over sections. The lower bound is the
//! partial cost plus each remaining section's cheapest option.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluate::{check_feasibility, objective, spatial_metrics, EvalError, MeetingSlot, ObjectiveBreakdown, Schedule, SectionPlan};
use crate::model::{Instance, Weights};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleLimits {
    pub max_sections: usize,
    pub max_rooms: usize,
    pub max_weeks: usize,
    pub max_meeting_times: usize,
    pub node_budget: u64,
}

impl Default for OracleLimits {
    fn default() -> Self {
        OracleLimits {
            max_sections: 8,
            max_rooms: 12,
            max_weeks: 4,
            max_meeting_times: 8,
            node_budget: 100_000_000,
        }
    }
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("instance exceeds oracle limits: {0}")]
    TooLarge(String),
    #[error("search exceeded the node budget of {0}")]
    NodeBudget(u64),
    #[error("no feasible schedule exists{}", .0.map(|s| format!(" (section {} cannot be hosted)", s + 1)).unwrap_or_default())]
    Infeasible(Option<usize>),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub schedule: Schedule,
    pub breakdown: ObjectiveBreakdown,
    pub nodes: u64,
}

/// Objective recomputed from the decision arrays `X[s][m][w]`, `Y[r][s]`,
/// `Z[r][s][m][w]`, `YY[q][r][s]`, `BU[b][s]` and `FU[b][f][s]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiteralBreakdown {
    pub components: [f64; 7],
    pub total: f64,
    pub sections: Vec<[f64; 7]>,
}

pub fn literal_objective(instance: &Instance, schedule: &Schedule, weights: &Weights) -> LiteralBreakdown {
    let n_s = instance.sections.len();
    let n_r = instance.rooms.len();
    let n_m = instance.meeting_times.len();
    let n_w = instance.calendar.weeks;
    let n_b = instance.buildings.len();
    let n_f = instance.rooms.iter().map(|r| r.floor as usize + 1).max().unwrap_or(0);

    let mut x = vec![vec![vec![0u8; n_w]; n_m]; n_s];
    let mut y = vec![vec![0u8; n_s]; n_r];
    for (s, plan) in schedule.sections.iter().enumerate() {
        for slot in &plan.meetings {
            x[s][slot.time][slot.week] = 1;
        }
        for &r in &plan.rooms {
            y[r][s] = 1;
        }
    }
    let mut z = vec![vec![vec![vec![0u8; n_w]; n_m]; n_s]; n_r];
    for r in 0..n_r {
        for s in 0..n_s {
            for m in 0..n_m {
                for w in 0..n_w {
                    z[r][s][m][w] = x[s][m][w] * y[r][s];
                }
            }
        }
    }
    let mut yy = vec![vec![vec![0u8; n_s]; n_r]; n_r];
    for q in 0..n_r {
        for r in 0..n_r {
            for s in 0..n_s {
                yy[q][r][s] = y[q][s] * y[r][s];
            }
        }
    }
    let mut bu = vec![vec![0u8; n_s]; n_b];
    let mut fu = vec![vec![vec![0u8; n_s]; n_f]; n_b];
    for r in 0..n_r {
        let room = &instance.rooms[r];
        for s in 0..n_s {
            // A room hosts the section if it appears in any Z, or is assigned.
            let used = y[r][s] == 1 || z[r][s].iter().flatten().any(|&v| v == 1);
            if used {
                bu[room.building][s] = 1;
                fu[room.building][room.floor as usize][s] = 1;
            }
        }
    }

    let a = &weights.alpha;
    let d = &weights.distance;
    let mut per_section = Vec::with_capacity(n_s);
    for s in 0..n_s {
        let sec = &instance.sections[s];
        let importance = weights.importance(sec.level);
        let e = sec.enrollment as f64;
        let cn_total: f64 = sec.weekly_count.iter().map(|&n| n as f64).sum();
        let dur = sec.duration_slots as f64;
        let weight = importance * e * cn_total * dur;

        let num_rooms: u32 = (0..n_r).map(|r| y[r][s] as u32).sum();
        let mut c = [0.0; 7];
        if num_rooms > 0 {
            let mut max_bldg_dist: f64 = 0.0;
            for b in 0..n_b {
                for b2 in 0..n_b {
                    if bu[b][s] == 1 && bu[b2][s] == 1 {
                        max_bldg_dist = max_bldg_dist.max(instance.buildings[b].dist[b2]);
                    }
                }
            }
            let num_bldgs: u32 = (0..n_b).map(|b| bu[b][s] as u32).sum();
            let mut floor_dist = 0.0;
            let mut num_floors = 0u32;
            for b in 0..n_b {
                let used: Vec<usize> = (0..n_f).filter(|&f| fu[b][f][s] == 1).collect();
                num_floors += used.len() as u32;
                if let (Some(lo), Some(hi)) = (used.first(), used.last()) {
                    floor_dist += (hi - lo) as f64;
                }
            }
            let extra_floors = (num_floors - num_bldgs) as f64;
            let mut nonadj = 0.0;
            for q in 0..n_r {
                for r in q + 1..n_r {
                    if yy[q][r][s] == 1 && !instance.rooms[q].adjacent.contains(&r) {
                        nonadj += 1.0;
                    }
                }
            }
            let dist_penalty = d[0] * max_bldg_dist
                + d[1] * (num_bldgs as f64 - 1.0)
                + d[2] * floor_dist
                + d[3] * extra_floors
                + d[4] * nonadj;
            let mut pref = 0.0f64;
            for b in 0..n_b {
                if bu[b][s] == 1 {
                    pref = pref.max(instance.organizations[sec.org].pref_penalty[b]);
                }
            }
            let seats: f64 = (0..n_r).map(|r| instance.rooms[r].capacity as f64 * y[r][s] as f64).sum();
            let wasted = seats - e;
            c[0] = a[0] * (weight * (num_rooms as f64 - 1.0));
            c[1] = a[1] * (weight * dist_penalty);
            c[2] = a[2] * (weight * pref);
            c[3] = a[3] * (cn_total * dur * wasted);
        }

        let np: Vec<f64> = (0..n_w)
            .map(|w| (0..n_m).map(|m| x[s][m][w] as f64).sum())
            .collect();
        let cnp: Vec<f64> = (0..n_w).map(|w| np[..=w].iter().sum()).collect();
        let cnp_total = cnp[n_w - 1];
        let active: Vec<usize> = (0..n_w).filter(|&w| sec.weekly_count[w] > 0).collect();
        let (first, last) = (active[0], active[active.len() - 1]);
        let mut timing = 0.0;
        for w in first..=last {
            let line = (w - first + 1) as f64 / (last - first + 1) as f64 * cnp_total;
            timing += (cnp[w] - line).abs();
        }
        let online = ((cn_total - cnp_total) / cn_total).max(0.0);
        let u = if cnp_total >= (sec.min_fraction * cn_total - 1e-9).ceil() { 1.0 } else { 0.0 };
        c[4] = a[4] * (weight * online.powf(weights.exp));
        c[5] = a[5] * (importance * e * dur * timing);
        c[6] = a[6] * (weight * (1.0 - u));
        per_section.push(c);
    }
    let mut components = [0.0; 7];
    for c in &per_section {
        for k in 0..7 {
            components[k] += c[k];
        }
    }
    LiteralBreakdown {
        total: components.iter().sum(),
        components,
        sections: per_section,
    }
}

struct Candidate {
    cost: f64,
    rooms: Vec<usize>,
    meetings: Vec<MeetingSlot>,
    /// (room, week, weekly slot) cells this option occupies.
    cells: Vec<(usize, usize, usize)>,
}

fn section_options(instance: &Instance, s: usize, budget: u64, work: &mut u64) -> Result<Vec<Candidate>, OracleError> {
    let sec = &instance.sections[s];
    let cal = &instance.calendar;
    let n_r = instance.rooms.len();
    let mut room_sets = Vec::new();
    for mask in 1u32..(1 << n_r) {
        let rooms: Vec<usize> = (0..n_r).filter(|&r| mask & (1 << r) != 0).collect();
        if rooms.len() > instance.weights.max_rooms
            || rooms.iter().any(|&r| !instance.compatible(r, s))
            || sec.init_room.is_some_and(|r| !rooms.contains(&r))
        {
            continue;
        }
        let seats: u64 = rooms.iter().map(|&r| instance.rooms[r].capacity as u64).sum();
        if seats < sec.enrollment as u64 {
            continue;
        }
        let metrics = spatial_metrics(instance, &rooms, s).expect("non-empty");
        if instance.max_dist_penalty(s).is_some_and(|c| metrics.dist_penalty > c)
            || instance.max_pref_penalty(s).is_some_and(|c| metrics.pref_penalty > c)
            || instance
                .max_wasted_seats(s)
                .is_some_and(|c| metrics.wasted_seats > c as i64)
        {
            continue;
        }
        room_sets.push(rooms);
    }

    let normal = sec.total_meetings() as usize;
    let floor = if instance.weights.enforce_min_fraction { sec.quota() as usize } else { 0 };
    let mut out = Vec::new();
    for rooms in room_sets {
        let pairs: Vec<MeetingSlot> = (0..cal.weeks)
            .flat_map(|w| sec.meeting_times.iter().map(move |&m| MeetingSlot::new(m, w)))
            .filter(|slot| {
                let day = instance.meeting_times[slot.time].day(cal, slot.week);
                instance.day_open(s, slot.time, slot.week)
                    && rooms.iter().all(|&r| !instance.rooms[r].unavailable[day])
            })
            .collect();
        *work += 1u64 << pairs.len().min(63);
        if *work > budget {
            return Err(OracleError::TooLarge(format!(
                "section {} alone needs more than {budget} options",
                s + 1
            )));
        }
        for mask in 0u64..(1 << pairs.len()) {
            let k = mask.count_ones() as usize;
            if k > normal || k < floor {
                continue;
            }
            let meetings: Vec<MeetingSlot> = (0..pairs.len())
                .filter(|&i| mask & (1 << i) != 0)
                .map(|i| pairs[i])
                .collect();
            let mut cells = Vec::new();
            for slot in &meetings {
                for t in instance.meeting_times[slot.time].weekly_slots(cal) {
                    for &r in &rooms {
                        cells.push((r, slot.week, t));
                    }
                }
            }
            out.push(Candidate {
                cost: 0.0,
                rooms: rooms.clone(),
                meetings,
                cells,
            });
        }
    }

    // Cost every option with the literal evaluator on a one-section schedule.
    let mut single = Schedule::empty(instance.sections.len());
    for opt in out.iter_mut() {
        single.sections[s] = SectionPlan {
            rooms: opt.rooms.clone(),
            meetings: opt.meetings.iter().copied().collect(),
        };
        opt.cost = literal_objective(instance, &single, &instance.weights).sections[s]
            .iter()
            .sum();
    }
    out.sort_by(|a, b| {
        a.cost
            .total_cmp(&b.cost)
            .then_with(|| a.rooms.cmp(&b.rooms))
            .then_with(|| a.meetings.cmp(&b.meetings))
    });
    Ok(out)
}

struct Search<'a> {
    options: &'a [Vec<Candidate>],
    rest_min: Vec<f64>,
    occupied: HashSet<(usize, usize, usize)>,
    choice: Vec<usize>,
    best: f64,
    best_choice: Option<Vec<usize>>,
    nodes: u64,
    budget: u64,
}

impl Search<'_> {
    fn dfs(&mut self, s: usize, partial: f64) -> Result<(), OracleError> {
        if s == self.options.len() {
            if partial < self.best {
                self.best = partial;
                self.best_choice = Some(self.choice.clone());
            }
            return Ok(());
        }
        for i in 0..self.options[s].len() {
            self.nodes += 1;
            if self.nodes > self.budget {
                return Err(OracleError::NodeBudget(self.budget));
            }
            let opt = &self.options[s][i];
            if partial + opt.cost + self.rest_min[s + 1] >= self.best - 1e-9 {
                break;
            }
            if opt.cells.iter().any(|c| self.occupied.contains(c)) {
                continue;
            }
            for &c in &opt.cells {
                self.occupied.insert(c);
            }
            self.choice.push(i);
            self.dfs(s + 1, partial + opt.cost)?;
            self.choice.pop();
            let opt = &self.options[s][i];
            for c in &opt.cells {
                self.occupied.remove(c);
            }
        }
        Ok(())
    }
}

/// Globally optimal schedule under the instance weights.
pub fn solve_exact(instance: &Instance, limits: &OracleLimits) -> Result<OracleSolution, OracleError> {
    let checks = [
        ("sections", instance.sections.len(), limits.max_sections),
        ("rooms", instance.rooms.len(), limits.max_rooms),
        ("weeks", instance.calendar.weeks, limits.max_weeks),
        ("meeting times", instance.meeting_times.len(), limits.max_meeting_times),
    ];
    for (what, have, max) in checks {
        if have > max {
            return Err(OracleError::TooLarge(format!("{have} {what} (limit {max})")));
        }
    }
    if instance.rooms.len() > 20 {
        return Err(OracleError::TooLarge("more than 20 rooms".into()));
    }

    let mut work = 0u64;
    let mut options = Vec::with_capacity(instance.sections.len());
    for s in 0..instance.sections.len() {
        let opts = section_options(instance, s, limits.node_budget, &mut work)?;
        if opts.is_empty() {
            return Err(OracleError::Infeasible(Some(s)));
        }
        options.push(opts);
    }
    let mut rest_min = vec![0.0; options.len() + 1];
    for s in (0..options.len()).rev() {
        rest_min[s] = rest_min[s + 1] + options[s][0].cost;
    }
    let mut search = Search {
        options: &options,
        rest_min,
        occupied: HashSet::new(),
        choice: Vec::new(),
        best: f64::INFINITY,
        best_choice: None,
        nodes: 0,
        budget: limits.node_budget,
    };
    search.dfs(0, 0.0)?;
    let nodes = search.nodes;
    let Some(choice) = search.best_choice else {
        return Err(OracleError::Infeasible(None));
    };
    let schedule = Schedule {
        sections: choice
            .iter()
            .enumerate()
            .map(|(s, &i)| SectionPlan {
                rooms: options[s][i].rooms.clone(),
                meetings: options[s][i].meetings.iter().copied().collect(),
            })
            .collect(),
    };
    debug_assert!(check_feasibility(instance, &schedule).is_empty());
    let breakdown = objective(instance, &schedule)?;
    Ok(OracleSolution {
        schedule,
        breakdown,
        nodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluate::evaluate_unchecked;
    use crate::gen::{make_figure2, random_tiny};
    use crate::model::{Building, Calendar, MeetingTime, Organization, Room, Section};

    fn one_room(sections: usize, enforce: bool) -> Instance {
        let cal = Calendar {
            weeks: 1,
            days_per_week: 5,
            slots_per_day: 4,
            timeslot_minutes: 30,
            day_start_minutes: 480,
            holiday: vec![false; 5],
        };
        let room = Room {
            name: "r".into(),
            building: 0,
            floor: 1,
            capacity: 30,
            unavailable: vec![false; 5],
            adjacent: vec![],
            incompatible: vec![],
        };
        let mt = MeetingTime {
            day_of_week: 0,
            start_slot: 0,
            duration_slots: 2,
        };
        let secs = (0..sections)
            .map(|i| Section::new(format!("s{i}"), 1, 20, 0, 2, vec![0], vec![1], vec![false; 5], None, 1.0))
            .collect();
        let mut w = Weights::pandemic();
        w.enforce_min_fraction = enforce;
        Instance::new(
            cal,
            vec![mt],
            vec![Building {
                name: "b".into(),
                dist: vec![0.0],
            }],
            vec![room],
            vec![Organization {
                name: "o".into(),
                pref_penalty: vec![0.0],
            }],
            secs,
            w,
        )
        .unwrap()
    }

    #[test]
    fn single_meeting_instance_is_unique() {
        let inst = one_room(1, false);
        let sol = solve_exact(&inst, &OracleLimits::default()).unwrap();
        assert_eq!(sol.schedule.sections[0].meetings.len(), 1);
        // Fully in person with a one-week span: no timing residue either.
        assert_eq!(sol.breakdown.total, 0.0);
    }

    #[test]
    fn pigeonhole_is_infeasible_when_enforced() {
        let inst = one_room(2, true);
        assert!(matches!(
            solve_exact(&inst, &OracleLimits::default()),
            Err(OracleError::Infeasible(None))
        ));
    }

    #[test]
    fn figure2_optimum_has_one_meeting_each() {
        let inst = make_figure2();
        let sol = solve_exact(&inst, &OracleLimits::default()).unwrap();
        for d in &sol.breakdown.sections {
            assert_eq!(d.in_person, 1);
            assert_eq!(d.wasted_seats, 0);
            assert_eq!(d.num_rooms, 4);
        }
        assert_eq!(sol.breakdown.components[6], 0.0);
    }

    #[test]
    fn limits_refuse_large_instances() {
        let inst = make_figure2();
        let limits = OracleLimits {
            max_sections: 4,
            ..OracleLimits::default()
        };
        assert!(matches!(solve_exact(&inst, &limits), Err(OracleError::TooLarge(_))));
    }

    #[test]
    fn literal_matches_evaluator_on_oracle_solutions() {
        for seed in 0..5 {
            let inst = random_tiny(seed);
            let Ok(sol) = solve_exact(&inst, &OracleLimits::default()) else { continue };
            let lit = literal_objective(&inst, &sol.schedule, &inst.weights);
            let ev = evaluate_unchecked(&inst, &sol.schedule, &inst.weights);
            for k in 0..7 {
                assert!((lit.components[k] - ev.components[k]).abs() <= 1e-9 * ev.components[k].abs().max(1.0));
            }
        }
    }
}
