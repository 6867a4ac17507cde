//! Possible room assignments (PRAs): every room set that can host a section
//! for the whole semester, enumerated exhaustively and ranked.
//!
//! A PRA covers the enrollment, uses at most `MaxRooms` compatible rooms,
//! contains no wasted room (dropping any room loses coverage), and respects
//! the section's distance, preference and wasted-seat caps. Room availability
//! is time dependent and is left to the engine.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::evaluate::{spatial_metrics, SpatialMetrics};
use crate::model::{Instance, Scenario, Weights};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoomSet {
    pub section: usize,
    /// Sorted room indices.
    pub rooms: Vec<usize>,
    pub metrics: SpatialMetrics,
    pub rank_score: f64,
}

#[derive(Debug, Error)]
pub enum PraError {
    #[error("section {id} ({name}) has no possible room assignment under its caps")]
    NoPra { id: usize, name: String },
}

/// Partial spatial state tracked along the depth-first search.
struct Partial<'a> {
    instance: &'a Instance,
    section: usize,
    chosen: Vec<usize>,
}

impl Partial<'_> {
    /// Distance penalty of the chosen rooms. Every term only grows as rooms
    /// are added, so this bounds every extension from below.
    fn dist_penalty(&self) -> f64 {
        let inst = self.instance;
        let a = &inst.weights.distance;
        let mut buildings: Vec<usize> = self.chosen.iter().map(|&r| inst.rooms[r].building).collect();
        buildings.sort_unstable();
        buildings.dedup();
        let mut floors: Vec<(usize, u32)> = self
            .chosen
            .iter()
            .map(|&r| (inst.rooms[r].building, inst.rooms[r].floor))
            .collect();
        floors.sort_unstable();
        floors.dedup();
        let mut floor_dist = 0;
        for &b in &buildings {
            let in_b = floors.iter().filter(|f| f.0 == b).map(|f| f.1);
            let (lo, hi) = in_b.fold((u32::MAX, 0), |(lo, hi), f| (lo.min(f), hi.max(f)));
            floor_dist += hi - lo;
        }
        let mut max_dist: f64 = 0.0;
        for (i, &b) in buildings.iter().enumerate() {
            for &c in &buildings[i + 1..] {
                max_dist = max_dist.max(inst.distance(b, c));
            }
        }
        let mut nonadj = 0;
        for (i, &q) in self.chosen.iter().enumerate() {
            for &r in &self.chosen[i + 1..] {
                if !inst.adjacent(q, r) {
                    nonadj += 1;
                }
            }
        }
        a[0] * max_dist
            + a[1] * (buildings.len() as f64 - 1.0)
            + a[2] * floor_dist as f64
            + a[3] * (floors.len() - buildings.len()) as f64
            + a[4] * nonadj as f64
    }

    fn pref_penalty(&self) -> f64 {
        self.chosen
            .iter()
            .map(|&r| self.instance.pref_penalty(self.section, self.instance.rooms[r].building))
            .fold(0.0, f64::max)
    }
}

/// Enumerates every PRA of `section`. Under [`Scenario::R`] the section's
/// initial room (if any) must be part of the set. The result is sorted by
/// room ids.
pub fn enumerate_pras(instance: &Instance, section: usize, scenario: Scenario) -> Vec<RoomSet> {
    let mut out = search(instance, section, scenario, usize::MAX);
    out.sort();
    out.into_iter()
        .map(|rooms| {
            let metrics = spatial_metrics(instance, &rooms, section).expect("non-empty room set");
            RoomSet {
                section,
                rooms,
                metrics,
                rank_score: 0.0,
            }
        })
        .collect()
}

/// Whether `section` has at least one PRA; stops at the first one found.
pub fn has_pra(instance: &Instance, section: usize, scenario: Scenario) -> bool {
    !search(instance, section, scenario, 1).is_empty()
}

/// Depth-first search over rooms by descending capacity, stopping once
/// `limit` room sets are found.
fn search(instance: &Instance, section: usize, scenario: Scenario, limit: usize) -> Vec<Vec<usize>> {
    let sec = &instance.sections[section];
    let enrollment = sec.enrollment as u64;
    let max_rooms = instance.weights.max_rooms;
    let init = match scenario {
        Scenario::R => sec.init_room,
        Scenario::NR => None,
    };
    if init.is_some_and(|r| !instance.compatible(r, section)) {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..instance.rooms.len())
        .filter(|&r| instance.compatible(r, section))
        .collect();
    order.sort_by(|&a, &b| {
        instance.rooms[b]
            .capacity
            .cmp(&instance.rooms[a].capacity)
            .then(a.cmp(&b))
    });
    let caps: Vec<u64> = order.iter().map(|&r| instance.rooms[r].capacity as u64).collect();

    let dist_cap = instance.max_dist_penalty(section);
    let pref_cap = instance.max_pref_penalty(section);
    let waste_cap = instance.max_wasted_seats(section);
    let mut partial = Partial {
        instance,
        section,
        chosen: Vec::with_capacity(max_rooms),
    };
    let mut out = Vec::new();

    struct Ctx<'c> {
        order: &'c [usize],
        caps: &'c [u64],
        enrollment: u64,
        max_rooms: usize,
        init: Option<usize>,
        dist_cap: Option<f64>,
        pref_cap: Option<f64>,
        limit: usize,
    }

    fn leaf(partial: &Partial, ctx: &Ctx, waste_cap: Option<u32>, out: &mut Vec<Vec<usize>>, capacity: u64) {
        if ctx.init.is_some_and(|r| !partial.chosen.contains(&r)) {
            return;
        }
        if waste_cap.is_some_and(|w| capacity.saturating_sub(ctx.enrollment) > w as u64) {
            return;
        }
        let mut rooms = partial.chosen.clone();
        rooms.sort_unstable();
        out.push(rooms);
    }

    fn dfs(partial: &mut Partial, ctx: &Ctx, waste_cap: Option<u32>, i: usize, capacity: u64, out: &mut Vec<Vec<usize>>) {
        if out.len() >= ctx.limit {
            return;
        }
        if !partial.chosen.is_empty() && capacity >= ctx.enrollment {
            leaf(partial, ctx, waste_cap, out, capacity);
            return;
        }
        let slots = ctx.max_rooms - partial.chosen.len();
        if slots == 0 || i == ctx.order.len() {
            return;
        }
        let reachable: u64 = ctx.caps[i..].iter().take(slots).sum();
        if capacity + reachable < ctx.enrollment {
            return;
        }
        let room = ctx.order[i];
        partial.chosen.push(room);
        let within_caps = ctx.dist_cap.is_none_or(|c| partial.dist_penalty() <= c)
            && ctx.pref_cap.is_none_or(|c| partial.pref_penalty() <= c);
        if within_caps {
            dfs(partial, ctx, waste_cap, i + 1, capacity + ctx.caps[i], out);
        }
        partial.chosen.pop();
        if ctx.init != Some(room) {
            dfs(partial, ctx, waste_cap, i + 1, capacity, out);
        }
    }

    let ctx = Ctx {
        order: &order,
        caps: &caps,
        enrollment,
        max_rooms,
        init,
        dist_cap,
        pref_cap,
        limit,
    };
    dfs(&mut partial, &ctx, waste_cap, 0, 0, &mut out);
    out
}

/// Spatial score used to order PRAs: the room components of the objective
/// with the section weight divided out.
pub fn rank_score(metrics: &SpatialMetrics, weights: &Weights, importance: f64, enrollment: u32) -> f64 {
    let a = &weights.alpha;
    let scale = importance * enrollment as f64;
    let waste = if scale > 0.0 {
        metrics.wasted_seats as f64 / scale
    } else {
        metrics.wasted_seats as f64
    };
    a[0] * (metrics.num_rooms as f64 - 1.0)
        + a[1] * metrics.dist_penalty_with(weights)
        + a[2] * metrics.pref_penalty
        + a[3] * waste
}

/// Scores and sorts PRAs best first; ties go to fewer rooms, fewer wasted
/// seats, then smaller room ids.
pub fn rank_pras(instance: &Instance, mut pras: Vec<RoomSet>, weights: &Weights) -> Vec<RoomSet> {
    for p in pras.iter_mut() {
        let sec = &instance.sections[p.section];
        p.rank_score = rank_score(&p.metrics, weights, weights.importance(sec.level), sec.enrollment);
    }
    pras.sort_by(compare_ranked);
    pras
}

fn compare_ranked(a: &RoomSet, b: &RoomSet) -> Ordering {
    a.rank_score
        .total_cmp(&b.rank_score)
        .then(a.metrics.num_rooms.cmp(&b.metrics.num_rooms))
        .then(a.metrics.wasted_seats.cmp(&b.metrics.wasted_seats))
        .then_with(|| a.rooms.cmp(&b.rooms))
}

/// Ranked PRA lists for every section, computed once per run.
#[derive(Debug, Clone)]
pub struct PraTable {
    pub lists: Vec<Vec<RoomSet>>,
    /// PRAs found per section before any truncation.
    pub generated: Vec<usize>,
}

impl PraTable {
    /// Initial rooms present in `instance` are enforced (scenario R semantics);
    /// apply [`Instance::for_scenario`] first to drop them.
    pub fn build(instance: &Instance) -> Result<PraTable, PraError> {
        PraTable::build_limited(instance, None)
    }

    /// Like [`PraTable::build`], keeping only the `limit` best-ranked PRAs
    /// of each section. Bounds memory on campuses where large sections have
    /// millions of candidate room sets.
    pub fn build_limited(instance: &Instance, limit: Option<usize>) -> Result<PraTable, PraError> {
        let (lists, generated): (Vec<Vec<RoomSet>>, Vec<usize>) = (0..instance.sections.len())
            .into_par_iter()
            .map(|s| {
                let mut list = rank_pras(instance, enumerate_pras(instance, s, Scenario::R), &instance.weights);
                let n = list.len();
                if let Some(k) = limit {
                    list.truncate(k.max(1));
                    list.shrink_to_fit();
                }
                (list, n)
            })
            .unzip();
        if let Some(s) = lists.iter().position(|l| l.is_empty()) {
            return Err(PraError::NoPra {
                id: s + 1,
                name: instance.sections[s].name.clone(),
            });
        }
        Ok(PraTable { lists, generated })
    }

    pub fn for_section(&self, section: usize) -> &[RoomSet] {
        &self.lists[section]
    }

    pub fn best(&self, section: usize) -> &RoomSet {
        &self.lists[section][0]
    }

    /// Average PRAs generated per section, before truncation.
    pub fn average_count(&self) -> f64 {
        if self.lists.is_empty() {
            return 0.0;
        }
        self.generated.iter().sum::<usize>() as f64 / self.generated.len() as f64
    }
}
