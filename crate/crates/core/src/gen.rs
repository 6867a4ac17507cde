//! Seeded instance generators: the two-week toy campus, small random
//! instances for exact cross-checks, and synthetic campuses calibrated to a
//! large public university's fall-semester profile.
//!
//! Campus attributes are drawn independently from their marginals. Bin
//! counts are apportioned by largest remainder, so every marginal is hit as
//! closely as rounding allows; values inside a bin are uniform.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    Building, Calendar, Instance, MeetingTime, ModelError, Organization, Room, Scenario, Section, Weights,
};
use crate::pra::has_pra;

#[derive(Debug, Error)]
pub enum GenError {
    #[error("inconsistent profile: {0}")]
    Profile(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Eight sections meeting MW in two back-to-back blocks, four rooms that
/// each seat a quarter of a section, two weeks.
pub fn make_figure2() -> Instance {
    let calendar = Calendar {
        weeks: 2,
        days_per_week: 5,
        slots_per_day: 26,
        timeslot_minutes: 30,
        day_start_minutes: 480,
        holiday: vec![false; 10],
    };
    let mt = |day_of_week, start_slot| MeetingTime {
        day_of_week,
        start_slot,
        duration_slots: 3,
    };
    // Mon 10:00, Mon 11:30, Wed 10:00, Wed 11:30
    let meeting_times = vec![mt(0, 4), mt(0, 7), mt(2, 4), mt(2, 7)];
    let rooms = (0..4)
        .map(|r: usize| Room {
            name: format!("Room {}", r + 1),
            building: 0,
            floor: 1,
            capacity: 10,
            unavailable: vec![false; 10],
            adjacent: [r.checked_sub(1), (r < 3).then_some(r + 1)].into_iter().flatten().collect(),
            incompatible: vec![],
        })
        .collect();
    let sections = ["A", "B", "C", "D", "E", "F", "G", "H"]
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let times = if i < 4 { vec![0, 2] } else { vec![1, 3] };
            Section::new(
                format!("Section {name}"),
                1,
                40,
                0,
                3,
                times,
                vec![2, 2],
                vec![false; 10],
                Some(i % 4),
                0.25,
            )
        })
        .collect();
    Instance::new(
        calendar,
        meeting_times,
        vec![Building {
            name: "Main".into(),
            dist: vec![0.0],
        }],
        rooms,
        vec![Organization {
            name: "College".into(),
            pref_penalty: vec![0.0],
        }],
        sections,
        Weights::pandemic(),
    )
    .expect("toy campus is valid")
}

/// Student-hours of a normal semester: `sum E * CN * Duration` in hours.
pub fn total_student_hours(instance: &Instance) -> f64 {
    let hours_per_slot = instance.calendar.timeslot_minutes as f64 / 60.0;
    instance
        .sections
        .iter()
        .map(|s| s.enrollment as f64 * s.total_meetings() as f64 * s.duration_slots as f64 * hours_per_slot)
        .sum()
}

/// A random instance with at most 5 sections, 3 rooms and 3 weeks, small
/// enough for the exact solver. Every section has at least one room set
/// that covers its enrollment.
pub fn random_tiny(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        if let Some(inst) = try_random_tiny(&mut rng) {
            return inst;
        }
    }
}

fn try_random_tiny(rng: &mut ChaCha8Rng) -> Option<Instance> {
    let weeks = rng.gen_range(2..=3);
    let days_per_week = 2;
    let days = weeks * days_per_week;
    let mut holiday = vec![false; days];
    if rng.gen_bool(0.3) {
        holiday[rng.gen_range(0..days)] = true;
    }
    let calendar = Calendar {
        weeks,
        days_per_week,
        slots_per_day: 6,
        timeslot_minutes: 30,
        day_start_minutes: 480,
        holiday,
    };
    let mut meeting_times = Vec::new();
    for day in 0..days_per_week {
        meeting_times.push(MeetingTime {
            day_of_week: day,
            start_slot: 0,
            duration_slots: 2,
        });
        if rng.gen_bool(0.5) {
            meeting_times.push(MeetingTime {
                day_of_week: day,
                start_slot: rng.gen_range(1..=3),
                duration_slots: 2,
            });
        }
    }
    let n_b = rng.gen_range(1..=2);
    let d = rng.gen_range(50.0..300.0f64).round();
    let buildings: Vec<Building> = (0..n_b)
        .map(|b| Building {
            name: format!("B{}", b + 1),
            dist: (0..n_b).map(|c| if b == c { 0.0 } else { d }).collect(),
        })
        .collect();
    let n_r = rng.gen_range(2..=3);
    let mut rooms: Vec<Room> = (0..n_r)
        .map(|r| Room {
            name: format!("R{}", r + 1),
            building: rng.gen_range(0..n_b),
            floor: rng.gen_range(0..=2),
            capacity: rng.gen_range(8..=30),
            unavailable: (0..days).map(|_| rng.gen_bool(0.08)).collect(),
            adjacent: vec![],
            incompatible: vec![],
        })
        .collect();
    for q in 0..n_r {
        for r in q + 1..n_r {
            if rooms[q].building == rooms[r].building && rooms[q].floor == rooms[r].floor && rng.gen_bool(0.6) {
                rooms[q].adjacent.push(r);
                rooms[r].adjacent.push(q);
            }
        }
    }
    let organizations = vec![Organization {
        name: "Org".into(),
        pref_penalty: (0..n_b).map(|_| [0.0, 1.0, 2.0][rng.gen_range(0..3)]).collect(),
    }];
    let n_s = rng.gen_range(2..=5);
    let total_cap: u32 = rooms.iter().map(|r| r.capacity).sum();
    let mut sections = Vec::new();
    for i in 0..n_s {
        // Up to two eligible times on distinct days.
        let mut times: Vec<usize> = (0..meeting_times.len()).collect();
        times.shuffle(rng);
        let mut chosen: Vec<usize> = Vec::new();
        for m in times {
            if chosen.len() < rng.gen_range(1..=2)
                && chosen.iter().all(|&c| !meeting_times[c].overlaps(&meeting_times[m]))
            {
                chosen.push(m);
            }
        }
        let mut blocked = vec![false; days];
        for b in blocked.iter_mut() {
            *b = rng.gen_bool(0.1);
        }
        let weekly: Vec<u32> = (0..weeks)
            .map(|w| {
                let open = chosen
                    .iter()
                    .filter(|&&m| {
                        let day = meeting_times[m].day(&calendar, w);
                        !calendar.holiday[day] && !blocked[day]
                    })
                    .count() as u32;
                open.min(rng.gen_range(0..=2))
            })
            .collect();
        if weekly.iter().sum::<u32>() == 0 {
            return None;
        }
        let min_fraction = [0.25, 0.5, 1.0][rng.gen_range(0..3)];
        let enrollment = rng.gen_range(0..=total_cap.min(45));
        sections.push(Section::new(
            format!("S{}", i + 1),
            rng.gen_range(0..=6),
            enrollment,
            0,
            2,
            chosen,
            weekly,
            blocked,
            None,
            min_fraction,
        ));
    }
    if rng.gen_bool(0.3) {
        let r = rng.gen_range(0..n_r);
        rooms[r].incompatible.push(rng.gen_range(0..n_s));
    }
    let weights = Weights {
        max_dist_penalty: None,
        max_pref_penalty: None,
        max_wasted_seats: None,
        ..Weights::pandemic()
    };
    let inst = Instance::new(calendar, meeting_times, buildings, rooms, organizations, sections, weights).ok()?;
    let hostable = (0..inst.sections.len()).all(|s| has_pra(&inst, s, Scenario::NR));
    hostable.then_some(inst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacityMode {
    Pandemic,
    Normal,
}

/// An inclusive value range with a population count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bin {
    pub lo: u32,
    pub hi: u32,
    pub count: u32,
}

const fn bin(lo: u32, hi: u32, count: u32) -> Bin {
    Bin { lo, hi, count }
}

/// Days of the week (Monday = 0) a regular section meets, with a count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternBin {
    /// Empty means a single day drawn from `single_day_weights`.
    pub days: Vec<usize>,
    pub count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampusProfile {
    pub scale: f64,
    pub weeks: usize,
    /// Weeks used by regular sections; the rest is reserved for ESL.
    pub teaching_weeks: usize,
    pub days_per_week: usize,
    pub slots_per_day: usize,
    pub timeslot_minutes: u32,
    pub day_start_minutes: u32,
    /// 0-based academic day indices.
    pub holidays: Vec<usize>,
    pub sections: u32,
    pub rooms: u32,
    pub meeting_times: u32,
    pub buildings: u32,
    pub organizations: u32,
    pub level_bins: Vec<Bin>,
    pub enrollment_bins: Vec<Bin>,
    pub duration_bins: Vec<Bin>,
    pub start_bins: Vec<Bin>,
    pub single_day_weights: Vec<f64>,
    pub patterns: Vec<PatternBin>,
    pub exam_pairs: u32,
    /// Irregular sections with 1..=12 meetings on scattered weeks.
    pub sparse_irregular: u32,
    /// Irregular sections near-weekly but with a few blocked days.
    pub dense_irregular: u32,
    /// Weekly sections with a few blocked weeks.
    pub blocked_weekly: u32,
    pub esl_sections: u32,
    pub normal_capacity_bins: Vec<Bin>,
    pub pandemic_capacity_bins: Vec<Bin>,
    pub normal_capacity_total: u32,
    pub pandemic_capacity_total: u32,
    pub building_size_bins: Vec<Bin>,
    pub floor_bins: Vec<Bin>,
    pub min_distance: f64,
    pub max_distance: f64,
    /// Mean building counts of preference tiers 1..3; tier 4 takes the rest.
    pub tier_means: Vec<f64>,
    pub tier_penalties: Vec<f64>,
    pub closed_rooms: u32,
    pub closed_days: usize,
    pub min_fraction: f64,
    pub capacity_mode: CapacityMode,
}

impl Default for CampusProfile {
    fn default() -> Self {
        CampusProfile {
            scale: 1.0,
            weeks: 16,
            teaching_weeks: 15,
            days_per_week: 6,
            slots_per_day: 26,
            timeslot_minutes: 30,
            day_start_minutes: 480,
            // Labor Day, a two-day fall break, Thanksgiving Wednesday-Saturday.
            holidays: vec![6, 42, 43, 80, 81, 82, 83],
            sections: 1834,
            rooms: 172,
            meeting_times: 590,
            buildings: 17,
            organizations: 97,
            level_bins: vec![
                bin(0, 0, 62),
                bin(1, 1, 656),
                bin(2, 2, 334),
                bin(3, 3, 316),
                bin(4, 4, 176),
                bin(5, 6, 144),
                bin(7, 9, 146),
            ],
            enrollment_bins: vec![
                bin(0, 0, 12),
                bin(1, 19, 790),
                bin(20, 39, 787),
                bin(40, 59, 97),
                bin(60, 99, 75),
                bin(100, 149, 60),
                bin(150, 220, 13),
            ],
            duration_bins: vec![
                bin(2, 2, 601),
                bin(3, 3, 803),
                bin(4, 4, 149),
                bin(5, 5, 3),
                bin(6, 6, 267),
                bin(7, 8, 11),
            ],
            start_bins: vec![
                bin(0, 3, 275),
                bin(4, 7, 592),
                bin(8, 11, 307),
                bin(12, 15, 301),
                bin(16, 19, 315),
                bin(20, 23, 44),
            ],
            single_day_weights: vec![145.0, 161.0, 176.0, 155.0, 164.0, 5.0],
            patterns: vec![
                PatternBin {
                    days: vec![],
                    count: 745,
                },
                PatternBin {
                    days: vec![0, 2],
                    count: 450,
                },
                PatternBin {
                    days: vec![1, 3],
                    count: 451,
                },
                PatternBin {
                    days: vec![0, 2, 4],
                    count: 52,
                },
                PatternBin {
                    days: vec![0, 1, 2, 3],
                    count: 65,
                },
                PatternBin {
                    days: vec![0, 1, 2, 3, 4],
                    count: 9,
                },
            ],
            exam_pairs: 10,
            sparse_irregular: 31,
            dense_irregular: 3,
            blocked_weekly: 8,
            esl_sections: 5,
            normal_capacity_bins: vec![
                bin(16, 29, 64),
                bin(30, 39, 40),
                bin(40, 49, 29),
                bin(50, 99, 15),
                bin(100, 199, 16),
                bin(200, 300, 8),
            ],
            pandemic_capacity_bins: vec![
                bin(5, 9, 76),
                bin(10, 19, 67),
                bin(20, 29, 11),
                bin(30, 39, 9),
                bin(40, 70, 9),
            ],
            normal_capacity_total: 9953,
            pandemic_capacity_total: 2531,
            building_size_bins: vec![
                bin(2, 2, 4),
                bin(3, 5, 4),
                bin(6, 10, 3),
                bin(11, 20, 4),
                bin(21, 40, 2),
            ],
            floor_bins: vec![bin(0, 0, 27), bin(1, 1, 94), bin(2, 2, 34), bin(3, 3, 16), bin(5, 5, 1)],
            min_distance: 58.2,
            max_distance: 783.7,
            tier_means: vec![1.15, 2.0, 3.0],
            tier_penalties: vec![0.0, 1.0, 2.0, 6.0],
            closed_rooms: 1,
            closed_days: 16,
            min_fraction: 0.25,
            capacity_mode: CapacityMode::Pandemic,
        }
    }
}

impl CampusProfile {
    pub fn scaled(scale: f64) -> Self {
        CampusProfile {
            scale,
            ..CampusProfile::default()
        }
    }

    fn count(&self, full: u32) -> usize {
        (full as f64 * self.scale).round() as usize
    }

    pub fn section_count(&self) -> usize {
        self.count(self.sections).max(1)
    }

    pub fn room_count(&self) -> usize {
        self.count(self.rooms).max(2)
    }

    pub fn meeting_time_count(&self) -> usize {
        self.count(self.meeting_times).max(1)
    }

    /// Buildings shrink with the square root of the scale so that small
    /// campuses still have several rooms per building.
    pub fn building_count(&self) -> usize {
        ((self.buildings as f64 * self.scale.sqrt()).round() as usize).clamp(1, self.room_count())
    }

    pub fn organization_count(&self) -> usize {
        self.count(self.organizations).max(1)
    }

    pub fn validate(&self) -> Result<(), GenError> {
        let err = |m: String| Err(GenError::Profile(m));
        if !(self.scale > 0.0 && self.scale <= 10.0) {
            return err("scale must lie in (0, 10]".into());
        }
        let sum = |bins: &[Bin]| bins.iter().map(|b| b.count).sum::<u32>();
        for (name, bins, total) in [
            ("level_bins", &self.level_bins, self.sections),
            ("enrollment_bins", &self.enrollment_bins, self.sections),
            ("duration_bins", &self.duration_bins, self.sections),
            ("start_bins", &self.start_bins, self.sections),
            ("normal_capacity_bins", &self.normal_capacity_bins, self.rooms),
            ("pandemic_capacity_bins", &self.pandemic_capacity_bins, self.rooms),
            ("floor_bins", &self.floor_bins, self.rooms),
        ] {
            if sum(bins) != total {
                return err(format!("{name} sum to {} but the population is {total}", sum(bins)));
            }
            if bins.iter().any(|b| b.lo > b.hi) {
                return err(format!("{name} has an empty range"));
            }
        }
        if sum(&self.building_size_bins) != self.buildings {
            return err("building_size_bins must count every building".into());
        }
        let irregular = 2 * self.exam_pairs + self.sparse_irregular + self.dense_irregular + self.blocked_weekly;
        let regular: u32 = self.patterns.iter().map(|p| p.count).sum();
        if irregular + regular > self.sections + 16 || irregular + regular + 16 < self.sections {
            return err(format!(
                "patterns ({regular}) and irregular sections ({irregular}) do not add up to {} sections",
                self.sections
            ));
        }
        if self.single_day_weights.len() != self.days_per_week {
            return err("single_day_weights needs one entry per day".into());
        }
        if self.patterns.iter().flat_map(|p| p.days.iter()).any(|&d| d >= self.days_per_week) {
            return err("pattern day outside the week".into());
        }
        if self.holidays.iter().any(|&d| d >= self.weeks * self.days_per_week) {
            return err("holiday outside the calendar".into());
        }
        if self.teaching_weeks == 0 || self.teaching_weeks > self.weeks {
            return err("teaching_weeks must lie in 1..=weeks".into());
        }
        if self.start_bins.iter().any(|b| b.lo as usize >= self.slots_per_day) {
            return err("start bins must begin inside the day".into());
        }
        if self.duration_bins.iter().any(|b| b.lo == 0 || b.hi as usize > self.slots_per_day) {
            return err("durations must fit in a day".into());
        }
        if self.tier_penalties.len() != self.tier_means.len() + 1 {
            return err("need one penalty per tier (tier_means + 1)".into());
        }
        if !(self.min_distance > 0.0 && self.min_distance <= self.max_distance) {
            return err("distance range is empty".into());
        }
        if !(self.min_fraction > 0.0 && self.min_fraction <= 1.0) {
            return err("MinFraction out of range (0, 1]".into());
        }
        Ok(())
    }
}

/// Largest-remainder apportionment of `total` items over `weights`; ties go
/// to the lower index.
pub fn apportion(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    if total == 0 || sum <= 0.0 {
        return vec![0; weights.len()];
    }
    let quotas: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut out: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut left = total - out.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        out[i] += 1;
        left -= 1;
    }
    out
}

/// `total` values drawn uniformly inside apportioned bins, shuffled.
fn sample_bins(rng: &mut ChaCha8Rng, bins: &[Bin], total: usize) -> Vec<u32> {
    let counts = apportion(total, &bins.iter().map(|b| b.count as f64).collect::<Vec<_>>());
    let mut out = Vec::with_capacity(total);
    for (b, &n) in bins.iter().zip(&counts) {
        for _ in 0..n {
            out.push(rng.gen_range(b.lo..=b.hi));
        }
    }
    out.shuffle(rng);
    out
}

/// Moves values by one unit at a time, inside their bins, until they sum to
/// `target`. Returns false if the bins cannot reach it.
fn fit_total(rng: &mut ChaCha8Rng, values: &mut [u32], bounds: &[(u32, u32)], target: u64) -> bool {
    let lo: u64 = bounds.iter().map(|b| b.0 as u64).sum();
    let hi: u64 = bounds.iter().map(|b| b.1 as u64).sum();
    if target < lo || target > hi {
        return false;
    }
    let mut sum: u64 = values.iter().map(|&v| v as u64).sum();
    while sum != target {
        let i = rng.gen_range(0..values.len());
        if sum < target && values[i] < bounds[i].1 {
            values[i] += 1;
            sum += 1;
        } else if sum > target && values[i] > bounds[i].0 {
            values[i] -= 1;
            sum -= 1;
        }
    }
    true
}

#[derive(Debug, Clone)]
enum Kind {
    Regular,
    Esl,
    Lecture,
    Exam { days: Vec<usize> },
    Sparse { days: Vec<usize> },
    Dense { target: u32 },
    BlockedWeekly,
}

#[derive(Debug, Clone)]
struct Draft {
    kind: Kind,
    level: u32,
    enrollment: u32,
    org: usize,
    pattern: Vec<usize>,
    start: usize,
    duration: usize,
}

fn bin_of(bins: &[Bin], v: u32) -> Option<usize> {
    bins.iter().position(|b| b.lo <= v && v <= b.hi)
}

/// A calibrated synthetic campus. The same seed always yields the same
/// instance, and the capacity mode does not change any other attribute.
pub fn make_campus(profile: &CampusProfile, seed: u64) -> Result<Instance, GenError> {
    profile.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = profile;
    let n_s = p.section_count();
    let n_r = p.room_count();
    let n_b = p.building_count();
    let n_g = p.organization_count();
    let n_m = p.meeting_time_count();
    let days = p.weeks * p.days_per_week;

    let mut holiday = vec![false; days];
    for &d in &p.holidays {
        holiday[d] = true;
    }
    let calendar = Calendar {
        weeks: p.weeks,
        days_per_week: p.days_per_week,
        slots_per_day: p.slots_per_day,
        timeslot_minutes: p.timeslot_minutes,
        day_start_minutes: p.day_start_minutes,
        holiday,
    };

    // Buildings and distances.
    let mut dist = vec![vec![0.0; n_b]; n_b];
    for b in 0..n_b {
        for c in b + 1..n_b {
            let d = (rng.gen_range(p.min_distance..=p.max_distance) * 10.0).round() / 10.0;
            dist[b][c] = d;
            dist[c][b] = d;
        }
    }
    if n_b >= 2 {
        dist[0][1] = p.min_distance;
        dist[1][0] = p.min_distance;
    }
    if n_b >= 3 {
        let far = rng.gen_range(2..n_b);
        dist[0][far] = p.max_distance;
        dist[far][0] = p.max_distance;
    }
    let buildings: Vec<Building> = dist
        .into_iter()
        .enumerate()
        .map(|(b, d)| Building {
            name: format!("Building {}", b + 1),
            dist: d,
        })
        .collect();

    // Rooms: building sizes, floors, capacities.
    let size_weights: Vec<f64> = {
        let raw = sample_bins(&mut rng, &p.building_size_bins, n_b);
        raw.into_iter().map(|v| v as f64).collect()
    };
    let mut per_building = apportion(n_r - n_b, &size_weights);
    for c in per_building.iter_mut() {
        *c += 1;
    }
    let mut room_building: Vec<usize> = per_building
        .iter()
        .enumerate()
        .flat_map(|(b, &n)| std::iter::repeat_n(b, n))
        .collect();
    room_building.sort_unstable();
    let floors = sample_bins(&mut rng, &p.floor_bins, n_r);

    let normal_bounds = {
        let counts = apportion(n_r, &p.normal_capacity_bins.iter().map(|b| b.count as f64).collect::<Vec<_>>());
        let mut v = Vec::new();
        for (b, &n) in p.normal_capacity_bins.iter().zip(&counts) {
            v.extend(std::iter::repeat_n((b.lo, b.hi), n));
        }
        v.shuffle(&mut rng);
        v
    };
    let mut normal: Vec<u32> = normal_bounds.iter().map(|&(lo, hi)| rng.gen_range(lo..=hi)).collect();
    let normal_target = (p.normal_capacity_total as f64 * p.scale).round() as u64;
    if !fit_total(&mut rng, &mut normal, &normal_bounds, normal_target) {
        return Err(GenError::Profile("normal capacity total unreachable within its bins".into()));
    }
    // Pandemic bins go to rooms in normal-capacity order.
    let mut rank: Vec<usize> = (0..n_r).collect();
    rank.sort_by(|&a, &b| normal[a].cmp(&normal[b]).then(a.cmp(&b)));
    let pcounts = apportion(n_r, &p.pandemic_capacity_bins.iter().map(|b| b.count as f64).collect::<Vec<_>>());
    let mut pandemic_bounds = vec![(0, 0); n_r];
    let mut k = 0;
    for (b, &n) in p.pandemic_capacity_bins.iter().zip(&pcounts) {
        for _ in 0..n {
            let r = rank[k];
            pandemic_bounds[r] = (b.lo.min(normal[r]), b.hi.min(normal[r]));
            k += 1;
        }
    }
    let mut pandemic: Vec<u32> = pandemic_bounds.iter().map(|&(lo, hi)| rng.gen_range(lo..=hi)).collect();
    let pandemic_target = (p.pandemic_capacity_total as f64 * p.scale).round() as u64;
    if !fit_total(&mut rng, &mut pandemic, &pandemic_bounds, pandemic_target) {
        return Err(GenError::Profile("pandemic capacity total unreachable within its bins".into()));
    }

    let closed: BTreeSet<usize> = if n_r >= 2 {
        let n = ((p.closed_rooms as f64 * p.scale).round() as usize).max(p.closed_rooms.min(1) as usize);
        rand::seq::index::sample(&mut rng, n_r, n.min(n_r)).into_iter().collect()
    } else {
        BTreeSet::new()
    };
    let mut rooms: Vec<Room> = (0..n_r)
        .map(|r| Room {
            name: format!("Room {}", r + 1),
            building: room_building[r],
            floor: floors[r],
            capacity: pandemic[r],
            unavailable: (0..days).map(|d| closed.contains(&r) && d < p.closed_days).collect(),
            adjacent: vec![],
            incompatible: vec![],
        })
        .collect();
    // Rooms on the same floor of a building line a corridor in id order.
    for r in 0..n_r {
        let next = (r + 1..n_r).find(|&q| rooms[q].building == rooms[r].building && rooms[q].floor == rooms[r].floor);
        if let Some(q) = next {
            rooms[r].adjacent.push(q);
            rooms[q].adjacent.push(r);
        }
    }

    // Organizations with tiered building preferences.
    let organizations: Vec<Organization> = (0..n_g)
        .map(|g| {
            let mut order: Vec<usize> = (0..n_b).collect();
            order.shuffle(&mut rng);
            let shrink = n_b as f64 / p.buildings as f64;
            let mut pref = vec![*p.tier_penalties.last().unwrap(); n_b];
            let mut at = 0;
            for (tier, mean) in p.tier_means.iter().enumerate() {
                let base = mean * shrink;
                let jitter: f64 = if tier == 0 {
                    if rng.gen_bool(base.fract().clamp(0.0, 1.0)) { 1.0 } else { 0.0 }
                } else {
                    rng.gen_range(-1..=1) as f64
                };
                let want = if tier == 0 { base.floor() + jitter } else { base.round() + jitter };
                let n = (want.max(if tier == 0 { 1.0 } else { 0.0 }) as usize).min(n_b - at);
                for &b in &order[at..at + n] {
                    pref[b] = p.tier_penalties[tier];
                }
                at += n;
            }
            Organization {
                name: format!("Organization {}", g + 1),
                pref_penalty: pref,
            }
        })
        .collect();

    // Section attributes.
    let levels = sample_bins(&mut rng, &p.level_bins, n_s);
    let mut enrollments = sample_bins(&mut rng, &p.enrollment_bins, n_s);
    let durations = sample_bins(&mut rng, &p.duration_bins, n_s);
    let starts = sample_bins(&mut rng, &p.start_bins, n_s);

    let sc = |full: u32| (full as f64 * p.scale).round() as usize;
    let exam_pairs = sc(p.exam_pairs).min(n_s / 2);
    let sparse = sc(p.sparse_irregular);
    let dense = sc(p.dense_irregular);
    let blocked_weekly = sc(p.blocked_weekly);
    let esl = sc(p.esl_sections);
    let irregular = 2 * exam_pairs + sparse + dense + blocked_weekly;
    let regular = n_s.saturating_sub(irregular);
    let pattern_counts = apportion(regular, &p.patterns.iter().map(|b| b.count as f64).collect::<Vec<_>>());

    // Exam pairs take the largest enrollments, both halves sharing one value.
    enrollments.sort_unstable_by(|a, b| b.cmp(a));
    let pair_enrollments: Vec<u32> = (0..exam_pairs).map(|i| enrollments[2 * i]).collect();
    let mut rest: Vec<u32> = enrollments[2 * exam_pairs..].to_vec();
    rest.shuffle(&mut rng);

    let single_day = |rng: &mut ChaCha8Rng| {
        let total: f64 = p.single_day_weights.iter().sum();
        let mut x = rng.gen_range(0.0..total);
        for (d, w) in p.single_day_weights.iter().enumerate() {
            if x < *w {
                return d;
            }
            x -= w;
        }
        p.single_day_weights.len() - 1
    };

    let mut drafts: Vec<Draft> = Vec::with_capacity(n_s);
    let mut attr = 0usize;
    let mut next_attr = |kind: Kind, pattern: Vec<usize>, enrollment: u32, rng: &mut ChaCha8Rng| {
        let i = attr;
        attr += 1;
        Draft {
            kind,
            level: levels[i],
            enrollment,
            org: rng.gen_range(0..n_g),
            pattern,
            start: starts[i] as usize,
            duration: durations[i] as usize,
        }
    };
    let mut rest_iter = rest.into_iter();
    for &e in &pair_enrollments {
        let lecture = next_attr(Kind::Lecture, vec![0, 2, 4], e, &mut rng);
        let org = lecture.org;
        drafts.push(lecture);
        let day = rng.gen_range(0..4.min(p.days_per_week));
        let mut exam = next_attr(Kind::Exam { days: vec![] }, vec![day], e, &mut rng);
        exam.org = org;
        exam.start = 19.min(p.slots_per_day.saturating_sub(3));
        exam.duration = 3.min(p.slots_per_day);
        drafts.push(exam);
    }
    for _ in 0..sparse {
        let d = single_day(&mut rng);
        let e = rest_iter.next().unwrap_or(0);
        drafts.push(next_attr(Kind::Sparse { days: vec![] }, vec![d], e, &mut rng));
    }
    for _ in 0..dense {
        let target = [23, 32, 33][rng.gen_range(0..3)];
        let pattern = if target > 30 { vec![0, 2, 4] } else { vec![1, 3] };
        let e = rest_iter.next().unwrap_or(0);
        drafts.push(next_attr(Kind::Dense { target }, pattern, e, &mut rng));
    }
    for _ in 0..blocked_weekly {
        let d = single_day(&mut rng);
        let e = rest_iter.next().unwrap_or(0);
        drafts.push(next_attr(Kind::BlockedWeekly, vec![d], e, &mut rng));
    }
    for (pb, &count) in p.patterns.iter().zip(&pattern_counts) {
        for _ in 0..count {
            let pattern = if pb.days.is_empty() { vec![single_day(&mut rng)] } else { pb.days.clone() };
            let e = rest_iter.next().unwrap_or(0);
            drafts.push(next_attr(Kind::Regular, pattern, e, &mut rng));
        }
    }
    // ESL sections are level-0 regular sections that also meet in the
    // reserved final weeks.
    let mut esl_left = esl;
    for d in drafts.iter_mut() {
        if esl_left > 0 && matches!(d.kind, Kind::Regular) && d.level == 0 {
            d.kind = Kind::Esl;
            esl_left -= 1;
        }
    }
    for d in drafts.iter_mut() {
        d.duration = d.duration.min(p.slots_per_day);
        if d.start + d.duration > p.slots_per_day {
            d.start = p.slots_per_day - d.duration;
        }
    }

    let meeting_times = build_time_pool(p, &mut drafts, n_m, &mut rng, &p.start_bins);

    // Weekly counts and blocked days.
    let open = |day: usize| !calendar.holiday[day];
    let mut sections = Vec::with_capacity(n_s);
    for (i, d) in drafts.iter_mut().enumerate() {
        let mut blocked = vec![false; days];
        let week_range = match d.kind {
            Kind::Esl => 0..p.weeks,
            _ => 0..p.teaching_weeks,
        };
        let is_exam = matches!(d.kind, Kind::Exam { .. });
        match &mut d.kind {
            Kind::Exam { days: chosen } | Kind::Sparse { days: chosen } => {
                let n = if is_exam { 4 } else { rng.gen_range(1..=12) };
                let candidates: Vec<usize> = week_range
                    .clone()
                    .map(|w| calendar.day_index(w, d.pattern[0]))
                    .filter(|&day| open(day))
                    .collect();
                let picks = evenly_spread(&candidates, n, &mut rng);
                *chosen = picks.clone();
                for (day, b) in blocked.iter_mut().enumerate() {
                    *b = !picks.contains(&day);
                }
            }
            Kind::Dense { target } => {
                let mut pattern_days: Vec<usize> = week_range
                    .clone()
                    .flat_map(|w| d.pattern.iter().map(move |&dow| (w, dow)))
                    .map(|(w, dow)| calendar.day_index(w, dow))
                    .filter(|&day| open(day))
                    .collect();
                pattern_days.shuffle(&mut rng);
                let excess = pattern_days.len().saturating_sub(*target as usize);
                for &day in &pattern_days[..excess] {
                    blocked[day] = true;
                }
            }
            Kind::BlockedWeekly => {
                let n = rng.gen_range(2..=4);
                for w in rand::seq::index::sample(&mut rng, week_range.len(), n) {
                    blocked[calendar.day_index(w, d.pattern[0])] = true;
                }
            }
            _ => {}
        }
        let weekly: Vec<u32> = (0..p.weeks)
            .map(|w| {
                if !week_range.contains(&w) {
                    return 0;
                }
                d.pattern
                    .iter()
                    .map(|&dow| calendar.day_index(w, dow))
                    .filter(|&day| open(day) && !blocked[day])
                    .count() as u32
            })
            .collect();
        let times: Vec<usize> = d
            .pattern
            .iter()
            .map(|&dow| {
                meeting_times
                    .iter()
                    .position(|m| m.day_of_week == dow && m.start_slot == d.start && m.duration_slots == d.duration)
                    .expect("pool holds every section time")
            })
            .collect();
        let mut sec = Section::new(
            match d.kind {
                Kind::Exam { .. } => format!("EXAM-{:04}", i + 1),
                _ => format!("SEC-{:04}", i + 1),
            },
            d.level,
            d.enrollment,
            d.org,
            d.duration as u32,
            times,
            weekly,
            blocked,
            None,
            if is_exam { 1.0 } else { p.min_fraction },
        );
        sec.exam_block = is_exam;
        sections.push(sec);
    }

    let weights = Weights::pandemic();
    let mut inst = Instance::new(
        calendar,
        meeting_times,
        buildings,
        rooms,
        organizations,
        sections,
        weights,
    )?;
    assign_registrar_rooms(&mut inst, &normal);
    // Sections are repaired against the reduced capacities so both modes
    // share them; normal mode is single-room assignment and gets a second
    // pass on its own stream.
    repair_feasibility(&mut inst, p, &mut rng)?;
    if p.capacity_mode == CapacityMode::Normal {
        for (room, &c) in inst.rooms.iter_mut().zip(&normal) {
            room.capacity = c;
        }
        inst.weights = Weights::normal_assignment();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6e6f_726d_616c);
        repair_feasibility(&mut inst, p, &mut rng)?;
    }
    Ok(inst)
}

/// `n` items of `candidates` spread over its length with a random offset.
fn evenly_spread(candidates: &[usize], n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let len = candidates.len();
    let n = n.min(len);
    if n == 0 {
        return vec![];
    }
    let step = len as f64 / n as f64;
    let offset = rng.gen_range(0.0..step);
    (0..n)
        .map(|j| candidates[((offset + j as f64 * step) as usize).min(len - 1)])
        .collect()
}

/// Collects the weekly meeting times the sections need into a pool of
/// exactly `target` entries. Once the pool is full, a section whose block
/// is missing moves to the closest block already offered on all its days.
fn build_time_pool(
    p: &CampusProfile,
    drafts: &mut [Draft],
    target: usize,
    rng: &mut ChaCha8Rng,
    start_bins: &[Bin],
) -> Vec<MeetingTime> {
    let mut pool: BTreeSet<(usize, usize, usize)> = BTreeSet::new();
    let mut order: Vec<usize> = (0..drafts.len()).collect();
    order.shuffle(rng);
    // Irregular and exam sections keep their own times.
    order.sort_by_key(|&i| matches!(drafts[i].kind, Kind::Regular | Kind::Esl));
    for i in order {
        let d = &drafts[i];
        let missing = d
            .pattern
            .iter()
            .filter(|&&dow| !pool.contains(&(dow, d.start, d.duration)))
            .count();
        if missing == 0 {
            continue;
        }
        if pool.len() + missing <= target {
            for &dow in &d.pattern {
                pool.insert((dow, d.start, d.duration));
            }
            continue;
        }
        // Pool is nearly full: move the section to a block that costs the
        // fewest new entries, keeping its duration and start bin if possible.
        // Single-day sections may also change day.
        let room_left = target.saturating_sub(pool.len());
        let flexible = matches!(d.kind, Kind::Regular | Kind::Esl);
        let bin_of_start = |s: usize| bin_of(start_bins, s as u32);
        let blocks: BTreeSet<(usize, usize)> = pool.iter().map(|&(_, s, l)| (s, l)).collect();
        let mut best: Option<((bool, bool, bool, usize, usize), Vec<usize>, usize, usize)> = None;
        for (s, l) in blocks {
            let offered: BTreeSet<usize> = (0..p.days_per_week).filter(|&w| pool.contains(&(w, s, l))).collect();
            let Some((pattern, missing)) = adapt_pattern(&d.pattern, &offered, room_left, flexible) else {
                continue;
            };
            let key = (
                l != d.duration,
                pattern != d.pattern,
                bin_of_start(s) != bin_of_start(d.start),
                missing,
                s.abs_diff(d.start),
            );
            if best.as_ref().is_none_or(|b| key < b.0) {
                best = Some((key, pattern, s, l));
            }
        }
        match best {
            Some((_, pattern, s, l)) => {
                for &dow in &pattern {
                    pool.insert((dow, s, l));
                }
                let d = &mut drafts[i];
                d.pattern = pattern;
                d.start = s;
                d.duration = l;
            }
            None => {
                for &dow in &d.pattern {
                    pool.insert((dow, d.start, d.duration));
                }
            }
        }
    }
    // Pad with further plausible times until the pool is exactly full.
    let mut guard = 0;
    while pool.len() < target && guard < 100_000 {
        guard += 1;
        let total: f64 = p.single_day_weights.iter().sum();
        let mut x = rng.gen_range(0.0..total);
        let mut dow = 0;
        for (d, w) in p.single_day_weights.iter().enumerate() {
            if x < *w {
                dow = d;
                break;
            }
            x -= w;
        }
        let sb = p.start_bins[rng.gen_range(0..p.start_bins.len())];
        let db = p.duration_bins[rng.gen_range(0..p.duration_bins.len())];
        let len = rng.gen_range(db.lo..=db.hi) as usize;
        let start = (rng.gen_range(sb.lo..=sb.hi) as usize).min(p.slots_per_day - len);
        pool.insert((dow, start, len));
    }
    pool.into_iter()
        .map(|(day_of_week, start_slot, duration_slots)| MeetingTime {
            day_of_week,
            start_slot,
            duration_slots,
        })
        .collect()
}

/// The section's days if a block offers them within the remaining budget;
/// otherwise (when `flexible`) the same number of days, keeping offered
/// days of the pattern and borrowing the nearest other offered days.
/// Returns the pattern and how many new pool entries it needs.
fn adapt_pattern(
    pattern: &[usize],
    offered: &BTreeSet<usize>,
    room_left: usize,
    flexible: bool,
) -> Option<(Vec<usize>, usize)> {
    let missing: Vec<usize> = pattern.iter().copied().filter(|w| !offered.contains(w)).collect();
    if missing.len() <= room_left {
        return Some((pattern.to_vec(), missing.len()));
    }
    if !flexible {
        return None;
    }
    let mut out: Vec<usize> = pattern.iter().copied().filter(|w| offered.contains(w)).collect();
    let mut spare: Vec<usize> = offered.iter().copied().filter(|w| !pattern.contains(w)).collect();
    spare.sort_by_key(|&w| (missing.iter().map(|&m| m.abs_diff(w)).min().unwrap_or(0), w));
    let mut spare = spare.into_iter();
    let mut added = 0;
    for &m in &missing {
        match spare.next() {
            Some(w) => out.push(w),
            None if added < room_left => {
                out.push(m);
                added += 1;
            }
            None => return None,
        }
    }
    out.sort_unstable();
    Some((out, added))
}

/// Registrar-style single-room assignment under normal capacities: larger
/// sections first, each into the preferred, tightest free room.
fn assign_registrar_rooms(inst: &mut Instance, normal: &[u32]) {
    let mut order: Vec<usize> = (0..inst.sections.len()).collect();
    order.sort_by(|&a, &b| inst.sections[b].enrollment.cmp(&inst.sections[a].enrollment).then(a.cmp(&b)));
    let mut booked: Vec<Vec<usize>> = vec![Vec::new(); inst.rooms.len()];
    for s in order {
        let sec = &inst.sections[s];
        let clash = |r: usize| {
            booked[r].iter().any(|&o| {
                let other = &inst.sections[o];
                let share_weeks = (0..inst.calendar.weeks).any(|w| sec.weekly_count[w] > 0 && other.weekly_count[w] > 0);
                share_weeks
                    && sec.meeting_times.iter().any(|&m| {
                        other
                            .meeting_times
                            .iter()
                            .any(|&n| inst.meeting_times[m].overlaps(&inst.meeting_times[n]))
                    })
            })
        };
        let pick = (0..inst.rooms.len())
            .filter(|&r| normal[r] >= sec.enrollment && inst.compatible(r, s) && !clash(r))
            .min_by(|&a, &b| {
                let pa = inst.pref_penalty(s, inst.rooms[a].building);
                let pb = inst.pref_penalty(s, inst.rooms[b].building);
                pa.total_cmp(&pb).then(normal[a].cmp(&normal[b])).then(a.cmp(&b))
            });
        if let Some(r) = pick {
            booked[r].push(s);
            inst.sections[s].init_room = Some(r);
        }
    }
}

/// Relaxes caps (then shrinks enrollment) until every section has a PRA in
/// both scenarios; an initial room that still cannot be honored is dropped.
fn repair_feasibility(inst: &mut Instance, p: &CampusProfile, rng: &mut ChaCha8Rng) -> Result<(), GenError> {
    for s in 0..inst.sections.len() {
        let steps: [(Option<f64>, Option<f64>); 3] = [(Some(700.0), None), (Some(1000.0), None), (Some(1000.0), Some(6.0))];
        let mut step = 0;
        let mut attempts = 0;
        while !has_pra(inst, s, Scenario::NR) {
            if step < steps.len() {
                let (d, pr) = steps[step];
                inst.sections[s].caps.max_dist_penalty = d;
                if pr.is_some() {
                    inst.sections[s].caps.max_pref_penalty = pr;
                }
                step += 1;
                continue;
            }
            attempts += 1;
            let e = inst.sections[s].enrollment;
            let resampled = match bin_of(&p.enrollment_bins, e) {
                Some(b) if attempts <= 10 => rng.gen_range(p.enrollment_bins[b].lo..=e),
                _ => e / 2,
            };
            inst.sections[s].enrollment = resampled.min(e.saturating_sub(1));
        }
    }
    // Scenario R only relaxes caps section by section, so one relaxed copy
    // serves every check.
    let (relaxed, _) = inst.for_scenario(Scenario::R);
    for s in 0..inst.sections.len() {
        if inst.sections[s].init_room.is_some() && !has_pra(&relaxed, s, Scenario::R) {
            inst.sections[s].init_room = None;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn figure2_shape() {
        let inst = make_figure2();
        assert_eq!(inst.sections.len(), 8);
        assert_eq!(inst.rooms.len(), 4);
        assert_eq!(inst.calendar.weeks, 2);
        assert_eq!(inst.meeting_times.len(), 4);
        assert!(inst.sections.iter().all(|s| s.total_meetings() == 4));
    }

    #[test]
    fn figure2_student_hours() {
        assert_eq!(total_student_hours(&make_figure2()), 1920.0);
    }

    #[test]
    fn apportion_hits_total() {
        assert_eq!(apportion(10, &[1.0, 1.0, 1.0]), vec![4, 3, 3]);
        assert_eq!(apportion(7, &[0.0, 2.0, 5.0]), vec![0, 2, 5]);
        assert_eq!(apportion(0, &[1.0]), vec![0]);
    }

    #[test]
    fn default_profile_is_consistent() {
        CampusProfile::default().validate().unwrap();
    }

    #[test]
    fn small_campus_is_deterministic() {
        let profile = CampusProfile::scaled(0.05);
        let a = make_campus(&profile, 9).unwrap();
        let b = make_campus(&profile, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn capacity_mode_only_changes_capacities() {
        let mut profile = CampusProfile::scaled(0.05);
        let pandemic = make_campus(&profile, 4).unwrap();
        profile.capacity_mode = CapacityMode::Normal;
        let normal = make_campus(&profile, 4).unwrap();
        assert_eq!(pandemic.meeting_times, normal.meeting_times);
        for (a, b) in pandemic.rooms.iter().zip(&normal.rooms) {
            assert!(a.capacity <= b.capacity);
            assert_eq!(a.floor, b.floor);
        }
    }
}
