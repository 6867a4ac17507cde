//! Feasibility checking and exact objective evaluation of a schedule.
//!
//! A [`Schedule`] stores, per section, the fixed room set and the set of
//! (meeting time, week) mass meetings. Room occupancy is implicit: room `r`
//! hosts section `s` at `(m, w)` exactly when `r` is in the room set and
//! `(m, w)` is one of the meetings.
//!
//! Objective components are summed over sections in id order so that two
//! evaluations of the same per-section contributions agree bit for bit.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Instance, Section, Weights};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MeetingSlot {
    pub week: usize,
    pub time: usize,
}

impl MeetingSlot {
    pub fn new(time: usize, week: usize) -> Self {
        MeetingSlot { week, time }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SectionPlan {
    /// Sorted room indices.
    pub rooms: Vec<usize>,
    pub meetings: BTreeSet<MeetingSlot>,
}

impl SectionPlan {
    pub fn is_unscheduled(&self) -> bool {
        self.rooms.is_empty() && self.meetings.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Schedule {
    pub sections: Vec<SectionPlan>,
}

impl Schedule {
    pub fn empty(sections: usize) -> Self {
        Schedule {
            sections: vec![SectionPlan::default(); sections],
        }
    }

    pub fn meeting_count(&self) -> usize {
        self.sections.iter().map(|p| p.meetings.len()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Capacity,
    Compatibility,
    InitRoom,
    MaxRooms,
    DoubleBooking,
    RoomUnavailable,
    Holiday,
    BlockedDay,
    NotMeetingTime,
    MinFraction,
    /// More mass meetings than the section's normal in-person meetings.
    ExcessMeetings,
}

impl ViolationKind {
    pub const ALL: [ViolationKind; 11] = [
        ViolationKind::Capacity,
        ViolationKind::Compatibility,
        ViolationKind::InitRoom,
        ViolationKind::MaxRooms,
        ViolationKind::DoubleBooking,
        ViolationKind::RoomUnavailable,
        ViolationKind::Holiday,
        ViolationKind::BlockedDay,
        ViolationKind::NotMeetingTime,
        ViolationKind::MinFraction,
        ViolationKind::ExcessMeetings,
    ];
}

/// One constraint violation with the coordinates of a witness. Indices are
/// 0-based in memory and 1-based when serialized.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(into = "ViolationDoc")]
pub struct Violation {
    pub kind: ViolationKind,
    pub section: Option<usize>,
    pub other_section: Option<usize>,
    pub room: Option<usize>,
    pub time: Option<usize>,
    pub week: Option<usize>,
    pub day: Option<usize>,
    pub slot: Option<usize>,
    pub message: String,
}

#[derive(Serialize)]
struct ViolationDoc {
    kind: ViolationKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    section: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    other_section: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    room: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    meeting_time: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    week: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    day: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    weekly_slot: Option<usize>,
    message: String,
}

impl From<Violation> for ViolationDoc {
    fn from(v: Violation) -> Self {
        let one = |x: Option<usize>| x.map(|i| i + 1);
        ViolationDoc {
            kind: v.kind,
            section: one(v.section),
            other_section: one(v.other_section),
            room: one(v.room),
            meeting_time: one(v.time),
            week: one(v.week),
            day: one(v.day),
            weekly_slot: v.slot,
            message: v.message,
        }
    }
}

impl Violation {
    fn new(kind: ViolationKind, section: usize, message: String) -> Self {
        Violation {
            kind,
            section: Some(section),
            other_section: None,
            room: None,
            time: None,
            week: None,
            day: None,
            slot: None,
            message,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.kind, self.message)
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("room set is empty")]
    EmptyRoomSet,
    #[error("schedule is infeasible ({} violations, first: {})", .0.len(), .0[0])]
    Infeasible(Vec<Violation>),
}

/// Checks every hard constraint. An unscheduled section (no rooms and no
/// meetings) has no room set to check.
pub fn check_feasibility(instance: &Instance, schedule: &Schedule) -> Vec<Violation> {
    use ViolationKind::*;
    let cal = &instance.calendar;
    let mut out = Vec::new();

    for (s, plan) in schedule.sections.iter().enumerate() {
        if plan.is_unscheduled() {
            if instance.weights.enforce_min_fraction && instance.sections[s].quota() > 0 {
                let sec = &instance.sections[s];
                out.push(Violation::new(
                    MinFraction,
                    s,
                    format!("section {} has 0 of the {} required mass meetings", s + 1, sec.quota()),
                ));
            }
            continue;
        }
        let sec = &instance.sections[s];
        if plan.rooms.is_empty() {
            out.push(Violation::new(
                Capacity,
                s,
                format!("section {} has mass meetings but no rooms", s + 1),
            ));
        } else {
            let capacity: u64 = plan.rooms.iter().map(|&r| instance.rooms[r].capacity as u64).sum();
            if capacity < sec.enrollment as u64 {
                out.push(Violation::new(
                    Capacity,
                    s,
                    format!(
                        "section {} enrolls {} but its rooms seat {capacity}",
                        s + 1,
                        sec.enrollment
                    ),
                ));
            }
        }
        for &r in &plan.rooms {
            if !instance.compatible(r, s) {
                let mut v = Violation::new(
                    Compatibility,
                    s,
                    format!("room {} cannot host section {}", r + 1, s + 1),
                );
                v.room = Some(r);
                out.push(v);
            }
        }
        if let Some(init) = sec.init_room {
            if !plan.rooms.contains(&init) {
                let mut v = Violation::new(
                    InitRoom,
                    s,
                    format!("section {} must keep initial room {}", s + 1, init + 1),
                );
                v.room = Some(init);
                out.push(v);
            }
        }
        if plan.rooms.len() > instance.weights.max_rooms {
            out.push(Violation::new(
                MaxRooms,
                s,
                format!(
                    "section {} uses {} rooms, limit is {}",
                    s + 1,
                    plan.rooms.len(),
                    instance.weights.max_rooms
                ),
            ));
        }
        for slot in &plan.meetings {
            let day = instance.meeting_times[slot.time].day(cal, slot.week);
            let at = |kind, message: String| {
                let mut v = Violation::new(kind, s, message);
                v.time = Some(slot.time);
                v.week = Some(slot.week);
                v.day = Some(day);
                v
            };
            if !sec.meets_at(slot.time) {
                out.push(at(
                    NotMeetingTime,
                    format!(
                        "section {} does not normally meet at meeting time {}",
                        s + 1,
                        slot.time + 1
                    ),
                ));
            }
            if cal.is_holiday(day) {
                out.push(at(Holiday, format!("day {} is a holiday", day + 1)));
            }
            if sec.blocked[day] {
                out.push(at(
                    BlockedDay,
                    format!("section {} may not meet on day {}", s + 1, day + 1),
                ));
            }
            for &r in &plan.rooms {
                if instance.rooms[r].unavailable[day] {
                    let mut v = at(
                        RoomUnavailable,
                        format!("room {} is unavailable on day {}", r + 1, day + 1),
                    );
                    v.room = Some(r);
                    out.push(v);
                }
            }
        }
        let normal = sec.total_meetings() as usize;
        if plan.meetings.len() > normal {
            out.push(Violation::new(
                ExcessMeetings,
                s,
                format!(
                    "section {} has {} mass meetings but only {normal} normal meetings",
                    s + 1,
                    plan.meetings.len()
                ),
            ));
        }
        if instance.weights.enforce_min_fraction && (plan.meetings.len() as u32) < sec.quota() {
            out.push(Violation::new(
                MinFraction,
                s,
                format!(
                    "section {} has {} of the {} required mass meetings",
                    s + 1,
                    plan.meetings.len(),
                    sec.quota()
                ),
            ));
        }
    }

    out.extend(double_bookings(instance, schedule));
    out
}

fn double_bookings(instance: &Instance, schedule: &Schedule) -> Vec<Violation> {
    let cal = &instance.calendar;
    // (room, week, weekly slot) -> (section, meeting time)
    let mut owner: HashMap<(usize, usize, usize), (usize, usize)> = HashMap::new();
    let mut reported: HashSet<(usize, usize, usize, usize, usize, usize)> = HashSet::new();
    let mut out = Vec::new();
    for (s, plan) in schedule.sections.iter().enumerate() {
        for slot in &plan.meetings {
            let mt = &instance.meeting_times[slot.time];
            for &r in &plan.rooms {
                for t in mt.weekly_slots(cal) {
                    match owner.get(&(r, slot.week, t)) {
                        None => {
                            owner.insert((r, slot.week, t), (s, slot.time));
                        }
                        Some(&(s0, m0)) => {
                            if reported.insert((r, slot.week, s0, m0, s, slot.time)) {
                                out.push(Violation {
                                    kind: ViolationKind::DoubleBooking,
                                    section: Some(s),
                                    other_section: Some(s0),
                                    room: Some(r),
                                    time: Some(slot.time),
                                    week: Some(slot.week),
                                    day: Some(mt.day(cal, slot.week)),
                                    slot: Some(t),
                                    message: format!(
                                        "room {} is used by sections {} and {} at weekly slot {t} of week {}",
                                        r + 1,
                                        s0 + 1,
                                        s + 1,
                                        slot.week + 1
                                    ),
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Spatial quality of one room set for one section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialMetrics {
    pub num_rooms: usize,
    pub capacity: u64,
    pub max_building_dist: f64,
    pub num_buildings: usize,
    pub num_floors: usize,
    pub floor_dist: u32,
    pub num_extra_floors: usize,
    pub room_nonadj: usize,
    pub dist_penalty: f64,
    pub pref_penalty: f64,
    pub wasted_seats: i64,
}

impl SpatialMetrics {
    pub fn dist_penalty_with(&self, weights: &Weights) -> f64 {
        let a = &weights.distance;
        a[0] * self.max_building_dist
            + a[1] * (self.num_buildings as f64 - 1.0)
            + a[2] * self.floor_dist as f64
            + a[3] * self.num_extra_floors as f64
            + a[4] * self.room_nonadj as f64
    }
}

pub fn spatial_metrics(instance: &Instance, rooms: &[usize], section: usize) -> Result<SpatialMetrics, EvalError> {
    if rooms.is_empty() {
        return Err(EvalError::EmptyRoomSet);
    }
    let mut buildings: Vec<usize> = rooms.iter().map(|&r| instance.rooms[r].building).collect();
    buildings.sort_unstable();
    buildings.dedup();

    let mut floor_dist = 0u32;
    for &b in &buildings {
        let floors = rooms
            .iter()
            .map(|&r| &instance.rooms[r])
            .filter(|room| room.building == b)
            .map(|room| room.floor);
        let (lo, hi) = floors.fold((u32::MAX, 0), |(lo, hi), f| (lo.min(f), hi.max(f)));
        floor_dist += hi - lo;
    }
    let mut floors: Vec<(usize, u32)> = rooms
        .iter()
        .map(|&r| (instance.rooms[r].building, instance.rooms[r].floor))
        .collect();
    floors.sort_unstable();
    floors.dedup();

    let mut max_building_dist: f64 = 0.0;
    for (i, &b) in buildings.iter().enumerate() {
        for &c in &buildings[i + 1..] {
            max_building_dist = max_building_dist.max(instance.distance(b, c));
        }
    }
    let mut room_nonadj = 0;
    for (i, &q) in rooms.iter().enumerate() {
        for &r in &rooms[i + 1..] {
            if !instance.adjacent(q, r) {
                room_nonadj += 1;
            }
        }
    }
    let pref_penalty = buildings
        .iter()
        .map(|&b| instance.pref_penalty(section, b))
        .fold(0.0, f64::max);
    let capacity: u64 = rooms.iter().map(|&r| instance.rooms[r].capacity as u64).sum();

    let mut metrics = SpatialMetrics {
        num_rooms: rooms.len(),
        capacity,
        max_building_dist,
        num_buildings: buildings.len(),
        num_floors: floors.len(),
        floor_dist,
        num_extra_floors: floors.len() - buildings.len(),
        room_nonadj,
        dist_penalty: 0.0,
        pref_penalty,
        wasted_seats: capacity as i64 - instance.sections[section].enrollment as i64,
    };
    metrics.dist_penalty = metrics.dist_penalty_with(&instance.weights);
    Ok(metrics)
}

/// Timing quality of a section's mass meetings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingMetrics {
    /// `NP_sw`.
    pub per_week: Vec<u32>,
    /// `CNP_sw`.
    pub cumulative: Vec<u32>,
    pub in_person: u32,
    pub timing_penalty: f64,
    /// `U_s`.
    pub fairness_met: bool,
    pub online_fraction: f64,
}

/// Deviation of the cumulative mass-meeting count from the straight line
/// that spreads the final count evenly over the section's active weeks.
pub fn timing_penalty(cumulative: &[u32], first_week: usize, last_week: usize) -> f64 {
    let total = cumulative.last().copied().unwrap_or(0) as f64;
    let span = (last_week - first_week + 1) as f64;
    let mut penalty = 0.0;
    for w in first_week..=last_week {
        let prorated = ((w - first_week + 1) as f64 / span) * total;
        penalty += (cumulative[w] as f64 - prorated).abs();
    }
    penalty
}

pub fn timing_metrics<'a>(section: &Section, meetings: impl IntoIterator<Item = &'a MeetingSlot>) -> TimingMetrics {
    let weeks = section.weekly_count.len();
    let mut per_week = vec![0u32; weeks];
    for m in meetings {
        per_week[m.week] += 1;
    }
    let mut cumulative = Vec::with_capacity(weeks);
    let mut acc = 0;
    for &n in &per_week {
        acc += n;
        cumulative.push(acc);
    }
    let normal = section.total_meetings();
    TimingMetrics {
        timing_penalty: timing_penalty(&cumulative, section.first_week(), section.last_week()),
        fairness_met: acc >= section.quota(),
        online_fraction: (normal as f64 - acc as f64) / normal as f64,
        in_person: acc,
        per_week,
        cumulative,
    }
}

/// The seven weighted objective contributions of one section.
pub fn section_components(
    instance: &Instance,
    section: usize,
    spatial: Option<&SpatialMetrics>,
    timing: &TimingMetrics,
    weights: &Weights,
) -> [f64; 7] {
    let s = &instance.sections[section];
    let a = &weights.alpha;
    let importance = weights.importance(s.level);
    let enrollment = s.enrollment as f64;
    let normal = s.total_meetings() as f64;
    let duration = s.duration_slots as f64;
    let weight = importance * enrollment * normal * duration;

    let mut c = [0.0; 7];
    if let Some(sp) = spatial {
        c[0] = a[0] * (weight * (sp.num_rooms as f64 - 1.0));
        c[1] = a[1] * (weight * sp.dist_penalty_with(weights));
        c[2] = a[2] * (weight * sp.pref_penalty);
        c[3] = a[3] * (normal * duration * sp.wasted_seats as f64);
    }
    let online = timing.online_fraction.max(0.0);
    let online = if weights.exp == 1.0 { online } else { online.powf(weights.exp) };
    c[4] = a[4] * (weight * online);
    c[5] = a[5] * (importance * enrollment * duration * timing.timing_penalty);
    c[6] = if timing.fairness_met { 0.0 } else { a[6] * weight };
    c
}

/// Sums per-section contributions in section order.
pub fn sum_components(per_section: &[[f64; 7]]) -> ([f64; 7], f64) {
    let mut comps = [0.0; 7];
    for c in per_section {
        for k in 0..7 {
            comps[k] += c[k];
        }
    }
    let total = comps.iter().sum();
    (comps, total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionDiagnostics {
    /// 1-based section id.
    pub id: usize,
    pub num_rooms: usize,
    pub num_buildings: usize,
    pub num_floors: usize,
    pub dist_penalty: f64,
    pub pref_penalty: f64,
    pub wasted_seats: i64,
    /// `CNP_sw` per week.
    pub cnp: Vec<u32>,
    pub in_person: u32,
    pub normal_meetings: u32,
    pub timing_penalty: f64,
    /// `U_s`.
    pub fairness_met: bool,
    pub online_fraction: f64,
    pub components: [f64; 7],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    pub components: [f64; 7],
    pub total: f64,
    pub sections: Vec<SectionDiagnostics>,
}

/// Objective under the instance weights; rejects infeasible schedules.
pub fn objective(instance: &Instance, schedule: &Schedule) -> Result<ObjectiveBreakdown, EvalError> {
    objective_with(instance, schedule, &instance.weights)
}

pub fn objective_with(
    instance: &Instance,
    schedule: &Schedule,
    weights: &Weights,
) -> Result<ObjectiveBreakdown, EvalError> {
    let violations = check_feasibility(instance, schedule);
    if !violations.is_empty() {
        return Err(EvalError::Infeasible(violations));
    }
    Ok(evaluate_unchecked(instance, schedule, weights))
}

/// Objective without a feasibility check. Sections without rooms contribute
/// nothing to the room components.
pub fn evaluate_unchecked(instance: &Instance, schedule: &Schedule, weights: &Weights) -> ObjectiveBreakdown {
    let mut per_section = Vec::with_capacity(schedule.sections.len());
    let mut sections = Vec::with_capacity(schedule.sections.len());
    for (s, plan) in schedule.sections.iter().enumerate() {
        let spatial = spatial_metrics(instance, &plan.rooms, s).ok();
        let timing = timing_metrics(&instance.sections[s], &plan.meetings);
        let comps = section_components(instance, s, spatial.as_ref(), &timing, weights);
        per_section.push(comps);
        sections.push(SectionDiagnostics {
            id: s + 1,
            num_rooms: plan.rooms.len(),
            num_buildings: spatial.as_ref().map_or(0, |sp| sp.num_buildings),
            num_floors: spatial.as_ref().map_or(0, |sp| sp.num_floors),
            dist_penalty: spatial.as_ref().map_or(0.0, |sp| sp.dist_penalty_with(weights)),
            pref_penalty: spatial.as_ref().map_or(0.0, |sp| sp.pref_penalty),
            wasted_seats: spatial.as_ref().map_or(0, |sp| sp.wasted_seats),
            cnp: timing.cumulative.clone(),
            in_person: timing.in_person,
            normal_meetings: instance.sections[s].total_meetings(),
            timing_penalty: timing.timing_penalty,
            fairness_met: timing.fairness_met,
            online_fraction: timing.online_fraction,
            components: comps,
        });
    }
    let (components, total) = sum_components(&per_section);
    ObjectiveBreakdown {
        components,
        total,
        sections,
    }
}
