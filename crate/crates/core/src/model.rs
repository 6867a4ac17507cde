//! Domain types for a high-precision course scheduling instance.
//!
//! Everything inside the crate is indexed from zero (`usize`); the document
//! layer in [`crate::doc`] translates to and from the 1-based ids used in
//! instance files. An [`Instance`] is immutable once built and carries all
//! derived calendar quantities (cumulative meeting counts, first/last weeks,
//! room adjacency matrix) so the solver never has to recompute them.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Slack used when turning `min_fraction * CN` into an integer meeting count.
pub(crate) const QUOTA_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("malformed instance document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported document version {0}")]
    Version(u32),
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

pub(crate) fn invalid(path: impl Into<String>, message: impl Into<String>) -> ModelError {
    ModelError::Invalid {
        path: path.into(),
        message: message.into(),
    }
}

/// Room-assignment scenario: `R` keeps the registrar's initial room inside
/// every section's room set, `NR` ignores initial rooms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    R,
    NR,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scenario::R => f.write_str("R"),
            Scenario::NR => f.write_str("NR"),
        }
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "R" => Ok(Scenario::R),
            "NR" => Ok(Scenario::NR),
            other => Err(format!("unknown scenario '{other}' (expected R or NR)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calendar {
    pub weeks: usize,
    pub days_per_week: usize,
    pub slots_per_day: usize,
    pub timeslot_minutes: u32,
    /// Minutes after midnight at which slot 0 of every day begins.
    pub day_start_minutes: u32,
    pub holiday: Vec<bool>,
}

impl Calendar {
    pub fn days(&self) -> usize {
        self.weeks * self.days_per_week
    }

    pub fn slots_per_week(&self) -> usize {
        self.slots_per_day * self.days_per_week
    }

    /// Day index of (`week`, `day_of_week`), Monday = 0.
    pub fn day_index(&self, week: usize, day_of_week: usize) -> usize {
        week * self.days_per_week + day_of_week
    }

    pub fn week_of_day(&self, day: usize) -> usize {
        day / self.days_per_week
    }

    pub fn is_holiday(&self, day: usize) -> bool {
        self.holiday[day]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MeetingTime {
    pub day_of_week: usize,
    pub start_slot: usize,
    pub duration_slots: usize,
}

impl MeetingTime {
    /// Weekly timeslots covered by this meeting time (the `O_mt = 1` set).
    pub fn weekly_slots(&self, calendar: &Calendar) -> Range<usize> {
        let first = self.day_of_week * calendar.slots_per_day + self.start_slot;
        first..first + self.duration_slots
    }

    pub fn day(&self, calendar: &Calendar, week: usize) -> usize {
        calendar.day_index(week, self.day_of_week)
    }

    pub fn overlaps(&self, other: &MeetingTime) -> bool {
        self.day_of_week == other.day_of_week
            && self.start_slot < other.start_slot + other.duration_slots
            && other.start_slot < self.start_slot + self.duration_slots
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Building {
    pub name: String,
    /// Centroid distance in meters to every building, self included.
    pub dist: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Room {
    pub name: String,
    pub building: usize,
    pub floor: u32,
    pub capacity: u32,
    pub unavailable: Vec<bool>,
    /// Sorted, symmetric, irreflexive.
    pub adjacent: Vec<usize>,
    /// Sections this room cannot host (`J_rs = 0`), sorted.
    pub incompatible: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Organization {
    pub name: String,
    pub pref_penalty: Vec<f64>,
}

/// Per-section overrides of the penalty caps in [`Weights`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CapOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_dist_penalty: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_pref_penalty: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_wasted_seats: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    pub level: u32,
    pub enrollment: u32,
    pub org: usize,
    pub duration_slots: u32,
    /// Eligible meeting times (`I_sm = 1`) in engine scan order:
    /// ascending (day of week, start slot), then id.
    pub meeting_times: Vec<usize>,
    pub weekly_count: Vec<u32>,
    pub blocked: Vec<bool>,
    pub init_room: Option<usize>,
    pub min_fraction: f64,
    pub exam_block: bool,
    pub caps: CapOverrides,
    cumulative: Vec<u32>,
    first_week: usize,
    last_week: usize,
}

impl Section {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        level: u32,
        enrollment: u32,
        org: usize,
        duration_slots: u32,
        meeting_times: Vec<usize>,
        weekly_count: Vec<u32>,
        blocked: Vec<bool>,
        init_room: Option<usize>,
        min_fraction: f64,
    ) -> Self {
        let (cumulative, first_week, last_week) = derive_cumulative(&weekly_count);
        Section {
            name: name.into(),
            level,
            enrollment,
            org,
            duration_slots,
            meeting_times,
            weekly_count,
            blocked,
            init_room,
            min_fraction,
            exam_block: false,
            caps: CapOverrides::default(),
            cumulative,
            first_week,
            last_week,
        }
    }

    /// `CN_sw` for every week.
    pub fn cumulative(&self) -> &[u32] {
        &self.cumulative
    }

    /// `CN_sW`: in-person meetings in a normal semester.
    pub fn total_meetings(&self) -> u32 {
        self.cumulative.last().copied().unwrap_or(0)
    }

    pub fn first_week(&self) -> usize {
        self.first_week
    }

    pub fn last_week(&self) -> usize {
        self.last_week
    }

    pub fn is_irregular(&self) -> bool {
        self.blocked.iter().any(|&b| b)
    }

    /// Meetings needed for the fairness floor: `ceil(min_fraction * CN_sW)`.
    pub fn quota(&self) -> u32 {
        fairness_quota(self.min_fraction, self.total_meetings())
    }

    pub fn meets_at(&self, time: usize) -> bool {
        self.meeting_times.contains(&time)
    }

    pub(crate) fn refresh_derived(&mut self) {
        let (cumulative, first, last) = derive_cumulative(&self.weekly_count);
        self.cumulative = cumulative;
        self.first_week = first;
        self.last_week = last;
    }
}

pub fn fairness_quota(min_fraction: f64, total: u32) -> u32 {
    let raw = min_fraction * total as f64;
    ((raw - QUOTA_EPS).ceil().max(0.0)) as u32
}

/// Prefix sums of the weekly meeting counts plus the first and last active
/// weeks (0-based). A section with no meetings reports weeks (0, 0).
pub fn derive_cumulative(weekly_count: &[u32]) -> (Vec<u32>, usize, usize) {
    let cumulative: Vec<u32> = weekly_count
        .iter()
        .scan(0u32, |acc, &n| {
            *acc += n;
            Some(*acc)
        })
        .collect();
    let first = weekly_count.iter().position(|&n| n > 0).unwrap_or(0);
    let last = weekly_count.iter().rposition(|&n| n > 0).unwrap_or(0);
    (cumulative, first, last)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Weights {
    /// Component weights alpha_1 .. alpha_7.
    pub alpha: [f64; 7],
    /// Distance sub-weights alpha_21 .. alpha_25.
    pub distance: [f64; 5],
    pub exp: f64,
    /// Indexed by course level; levels past the end use the last entry.
    pub importance_of_level: Vec<f64>,
    pub max_rooms: usize,
    #[serde(default)]
    pub max_dist_penalty: Option<f64>,
    #[serde(default)]
    pub max_pref_penalty: Option<f64>,
    #[serde(default)]
    pub max_wasted_seats: Option<u32>,
    #[serde(default)]
    pub enforce_min_fraction: bool,
}

impl Weights {
    /// Reduced-capacity (pandemic) weights.
    pub fn pandemic() -> Self {
        Weights {
            alpha: [15.0, 1.0, 50.0, 0.0, 1000.0, 100.0, 1_000_000.0],
            distance: [1.0, 100.0, 10.0, 30.0, 3.0],
            exp: 1.0,
            importance_of_level: vec![4.0, 5.0, 4.0, 3.0, 2.0, 1.0],
            max_rooms: 5,
            max_dist_penalty: Some(480.0),
            max_pref_penalty: Some(2.0),
            max_wasted_seats: Some(20),
            enforce_min_fraction: false,
        }
    }

    /// Regular (one room per section) classroom assignment.
    pub fn normal_assignment() -> Self {
        Weights {
            max_rooms: 1,
            max_dist_penalty: None,
            max_pref_penalty: Some(6.0),
            max_wasted_seats: Some(465),
            ..Weights::pandemic()
        }
    }

    pub fn importance(&self, level: u32) -> f64 {
        let idx = (level as usize).min(self.importance_of_level.len().saturating_sub(1));
        self.importance_of_level.get(idx).copied().unwrap_or(0.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut w = self.clone();
        for a in w.alpha.iter_mut() {
            *a *= factor;
        }
        w
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub calendar: Calendar,
    pub meeting_times: Vec<MeetingTime>,
    pub buildings: Vec<Building>,
    pub rooms: Vec<Room>,
    pub organizations: Vec<Organization>,
    pub sections: Vec<Section>,
    pub weights: Weights,
    adjacency: Vec<bool>,
}

impl Instance {
    /// Validates every invariant and materializes derived data.
    pub fn new(
        calendar: Calendar,
        meeting_times: Vec<MeetingTime>,
        buildings: Vec<Building>,
        mut rooms: Vec<Room>,
        organizations: Vec<Organization>,
        mut sections: Vec<Section>,
        weights: Weights,
    ) -> Result<Self, ModelError> {
        for room in rooms.iter_mut() {
            room.adjacent.sort_unstable();
            room.adjacent.dedup();
            room.incompatible.sort_unstable();
            room.incompatible.dedup();
        }
        for section in sections.iter_mut() {
            section.meeting_times.sort_by_key(|&m| {
                meeting_times
                    .get(m)
                    .map(|t| (t.day_of_week, t.start_slot, m))
                    .unwrap_or((usize::MAX, usize::MAX, m))
            });
            section.refresh_derived();
        }
        let r = rooms.len();
        let mut instance = Instance {
            calendar,
            meeting_times,
            buildings,
            rooms,
            organizations,
            sections,
            weights,
            adjacency: vec![false; r * r],
        };
        instance.validate()?;
        for (q, room) in instance.rooms.iter().enumerate() {
            for &other in &room.adjacent {
                instance.adjacency[q * r + other] = true;
                instance.adjacency[other * r + q] = true;
            }
        }
        Ok(instance)
    }

    pub fn adjacent(&self, q: usize, r: usize) -> bool {
        self.adjacency[q * self.rooms.len() + r]
    }

    pub fn compatible(&self, room: usize, section: usize) -> bool {
        self.rooms[room].incompatible.binary_search(&section).is_err()
    }

    pub fn distance(&self, b: usize, c: usize) -> f64 {
        self.buildings[b].dist[c]
    }

    pub fn importance(&self, section: usize) -> f64 {
        self.weights.importance(self.sections[section].level)
    }

    pub fn pref_penalty(&self, section: usize, building: usize) -> f64 {
        self.organizations[self.sections[section].org].pref_penalty[building]
    }

    pub fn max_dist_penalty(&self, section: usize) -> Option<f64> {
        self.sections[section]
            .caps
            .max_dist_penalty
            .or(self.weights.max_dist_penalty)
    }

    pub fn max_pref_penalty(&self, section: usize) -> Option<f64> {
        self.sections[section]
            .caps
            .max_pref_penalty
            .or(self.weights.max_pref_penalty)
    }

    pub fn max_wasted_seats(&self, section: usize) -> Option<u32> {
        self.sections[section]
            .caps
            .max_wasted_seats
            .or(self.weights.max_wasted_seats)
    }

    /// Whether section `s` may meet at meeting time `m` in `week` on
    /// calendar grounds alone (holiday and blocked-day rules).
    pub fn day_open(&self, section: usize, time: usize, week: usize) -> bool {
        let day = self.meeting_times[time].day(&self.calendar, week);
        !self.calendar.is_holiday(day) && !self.sections[section].blocked[day]
    }

    /// Eligible meeting times of `section` that fall on open days of `week`.
    pub fn open_times_in_week(&self, section: usize, week: usize) -> usize {
        self.sections[section]
            .meeting_times
            .iter()
            .filter(|&&m| self.day_open(section, m, week))
            .count()
    }

    /// Weight `Importance_s * E_s * CN_sW * Duration_s` shared by five
    /// objective components.
    pub fn section_weight(&self, section: usize) -> f64 {
        let s = &self.sections[section];
        self.importance(section)
            * s.enrollment as f64
            * s.total_meetings() as f64
            * s.duration_slots as f64
    }

    /// Replaces the instance weights, re-validating them.
    pub fn with_weights(&self, weights: Weights) -> Result<Instance, ModelError> {
        let mut out = self.clone();
        out.weights = weights;
        validate_weights(&out.weights)?;
        Ok(out)
    }

    /// Sets `min_fraction` for every non-exam section.
    pub fn with_min_fraction(&self, fraction: f64) -> Result<Instance, ModelError> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(invalid("min_fraction", "MinFraction out of range (0, 1]"));
        }
        let mut out = self.clone();
        for s in out.sections.iter_mut().filter(|s| !s.exam_block) {
            s.min_fraction = fraction;
        }
        Ok(out)
    }

    /// Applies a room-assignment scenario. `NR` drops every initial room;
    /// `R` keeps them and relaxes a section's preference and wasted-seat caps
    /// when its initial room alone would break them. Returns the relaxation
    /// warnings.
    pub fn for_scenario(&self, scenario: Scenario) -> (Instance, Vec<String>) {
        let mut out = self.clone();
        let mut warnings = Vec::new();
        match scenario {
            Scenario::NR => {
                for s in out.sections.iter_mut() {
                    s.init_room = None;
                }
            }
            Scenario::R => {
                for idx in 0..out.sections.len() {
                    let Some(room) = out.sections[idx].init_room else {
                        continue;
                    };
                    let building = out.rooms[room].building;
                    let pref = out.pref_penalty(idx, building);
                    if let Some(cap) = out.max_pref_penalty(idx) {
                        if pref > cap {
                            out.sections[idx].caps.max_pref_penalty = Some(pref);
                            warnings.push(format!(
                                "section {}: max_pref_penalty raised from {cap} to {pref} for initial room {}",
                                idx + 1,
                                room + 1
                            ));
                        }
                    }
                    let capacity = out.rooms[room].capacity;
                    let enrollment = out.sections[idx].enrollment;
                    if capacity > enrollment {
                        let waste = capacity - enrollment;
                        if let Some(cap) = out.max_wasted_seats(idx) {
                            if waste > cap {
                                let relaxed = waste.max(465);
                                out.sections[idx].caps.max_wasted_seats = Some(relaxed);
                                warnings.push(format!(
                                    "section {}: max_wasted_seats raised from {cap} to {relaxed} for initial room {}",
                                    idx + 1,
                                    room + 1
                                ));
                            }
                        }
                    }
                }
            }
        }
        (out, warnings)
    }

    fn validate(&self) -> Result<(), ModelError> {
        let cal = &self.calendar;
        if cal.weeks == 0 {
            return Err(invalid("calendar.weeks", "must be at least 1"));
        }
        if !(1..=7).contains(&cal.days_per_week) {
            return Err(invalid("calendar.days_per_week", "must be between 1 and 7"));
        }
        if cal.slots_per_day == 0 {
            return Err(invalid("calendar.slots_per_day", "must be at least 1"));
        }
        if cal.holiday.len() != cal.days() {
            return Err(invalid("calendar.holidays", "holiday mask must cover every day"));
        }
        let days = cal.days();

        for (i, mt) in self.meeting_times.iter().enumerate() {
            let path = format!("meeting_times[{i}]");
            if mt.day_of_week >= cal.days_per_week {
                return Err(invalid(path, "day outside the academic week"));
            }
            if mt.duration_slots == 0 {
                return Err(invalid(path, "duration must be at least one slot"));
            }
            if mt.start_slot + mt.duration_slots > cal.slots_per_day {
                return Err(invalid(path, "meeting time runs past the end of the day"));
            }
        }

        let b = self.buildings.len();
        for (i, building) in self.buildings.iter().enumerate() {
            let path = format!("buildings[{i}].distances");
            if building.dist.len() != b {
                return Err(invalid(path, format!("expected {b} distances")));
            }
            for (j, &d) in building.dist.iter().enumerate() {
                if !d.is_finite() || d < 0.0 {
                    return Err(invalid(&path, "distances must be finite and non-negative"));
                }
                if i == j && d != 0.0 {
                    return Err(invalid(&path, "distance to itself must be 0"));
                }
                if self.buildings[j].dist.get(i) != Some(&d) {
                    return Err(invalid(&path, format!("distance to building {} is not symmetric", j + 1)));
                }
            }
        }

        let r = self.rooms.len();
        let s_count = self.sections.len();
        for (i, room) in self.rooms.iter().enumerate() {
            let path = format!("rooms[{i}]");
            if room.building >= b {
                return Err(invalid(format!("{path}.building"), "unknown building"));
            }
            if room.capacity == 0 {
                return Err(invalid(format!("{path}.capacity"), "capacity must be at least 1"));
            }
            if room.unavailable.len() != days {
                return Err(invalid(format!("{path}.unavailable_days"), "mask must cover every day"));
            }
            for &q in &room.adjacent {
                if q >= r {
                    return Err(invalid(format!("{path}.adjacent"), "unknown room"));
                }
                if q == i {
                    return Err(invalid(format!("{path}.adjacent"), "a room cannot be adjacent to itself"));
                }
                let other = &self.rooms[q];
                if other.building != room.building || other.floor != room.floor {
                    return Err(invalid(
                        format!("{path}.adjacent"),
                        format!("room {} is not on the same building floor", q + 1),
                    ));
                }
            }
            if room.incompatible.iter().any(|&s| s >= s_count) {
                return Err(invalid(format!("{path}.incompatible_sections"), "unknown section"));
            }
        }

        for (i, org) in self.organizations.iter().enumerate() {
            let path = format!("organizations[{i}].building_penalty");
            if org.pref_penalty.len() != b {
                return Err(invalid(path, format!("expected {b} penalties")));
            }
            if org.pref_penalty.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(invalid(path, "penalties must be finite and non-negative"));
            }
        }

        validate_weights(&self.weights)?;

        for (i, s) in self.sections.iter().enumerate() {
            let path = format!("sections[{i}]");
            if s.org >= self.organizations.len() {
                return Err(invalid(format!("{path}.organization"), "unknown organization"));
            }
            if s.duration_slots == 0 {
                return Err(invalid(format!("{path}.duration_slots"), "must be at least 1"));
            }
            if !(s.min_fraction > 0.0 && s.min_fraction <= 1.0) {
                return Err(invalid(format!("{path}.min_fraction"), "MinFraction out of range (0, 1]"));
            }
            if s.meeting_times.is_empty() {
                return Err(invalid(format!("{path}.meeting_times"), "at least one meeting time required"));
            }
            for (k, &m) in s.meeting_times.iter().enumerate() {
                if m >= self.meeting_times.len() {
                    return Err(invalid(format!("{path}.meeting_times"), "unknown meeting time"));
                }
                if s.meeting_times[..k].contains(&m) {
                    return Err(invalid(format!("{path}.meeting_times"), "duplicate meeting time"));
                }
                for &other in &s.meeting_times[..k] {
                    if self.meeting_times[m].overlaps(&self.meeting_times[other]) {
                        return Err(invalid(
                            format!("{path}.meeting_times"),
                            format!("meeting times {} and {} overlap", other + 1, m + 1),
                        ));
                    }
                }
            }
            if s.weekly_count.len() != cal.weeks {
                return Err(invalid(format!("{path}.weekly_meetings"), format!("expected {} weeks", cal.weeks)));
            }
            if s.blocked.len() != days {
                return Err(invalid(format!("{path}.blocked_days"), "mask must cover every day"));
            }
            if s.total_meetings() == 0 {
                return Err(invalid(format!("{path}.weekly_meetings"), "section has no in-person meetings"));
            }
            for w in 0..cal.weeks {
                let open = self.open_times_in_week(i, w);
                if s.weekly_count[w] as usize > open {
                    return Err(invalid(
                        format!("{path}.weekly_meetings[{w}]"),
                        format!("{} meetings but only {open} open meeting times", s.weekly_count[w]),
                    ));
                }
            }
            if let Some(room) = s.init_room {
                if room >= r {
                    return Err(invalid(format!("{path}.init_room"), "unknown room"));
                }
            }
            let caps = &s.caps;
            if caps.max_dist_penalty.is_some_and(|v| !(v >= 0.0))
                || caps.max_pref_penalty.is_some_and(|v| !(v >= 0.0))
            {
                return Err(invalid(format!("{path}"), "penalty caps must be non-negative"));
            }
        }
        Ok(())
    }
}

pub(crate) fn validate_weights(w: &Weights) -> Result<(), ModelError> {
    let all = w
        .alpha
        .iter()
        .chain(w.distance.iter())
        .chain(w.importance_of_level.iter());
    for v in all {
        if !v.is_finite() || *v < 0.0 {
            return Err(invalid("weights", "weights must be finite and non-negative"));
        }
    }
    if !(w.exp >= 1.0) || !w.exp.is_finite() {
        return Err(invalid("weights.exp", "Exp must be at least 1"));
    }
    if w.importance_of_level.is_empty() {
        return Err(invalid("weights.importance_of_level", "at least one level required"));
    }
    if w.max_rooms == 0 {
        return Err(invalid("weights.max_rooms", "MaxRooms must be at least 1"));
    }
    if w.max_dist_penalty.is_some_and(|v| !(v >= 0.0)) || w.max_pref_penalty.is_some_and(|v| !(v >= 0.0)) {
        return Err(invalid("weights", "penalty caps must be non-negative"));
    }
    Ok(())
}
