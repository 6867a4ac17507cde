//! JSON documents for instances and schedules.
//!
//! Documents use 1-based ids for every entity, week and day, and list
//! per-day flags as sparse day lists. `docs/schema.md` describes every
//! field.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::evaluate::{MeetingSlot, Schedule, SectionPlan};
use crate::model::{
    invalid, Building, Calendar, CapOverrides, Instance, MeetingTime, ModelError, Organization, Room, Section,
    Weights,
};

pub const INSTANCE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDoc {
    #[serde(default = "default_version")]
    pub version: u32,
    pub calendar: CalendarDoc,
    pub meeting_times: Vec<MeetingTimeDoc>,
    pub buildings: Vec<BuildingDoc>,
    pub rooms: Vec<RoomDoc>,
    pub organizations: Vec<OrganizationDoc>,
    pub sections: Vec<SectionDoc>,
    pub weights: Weights,
}

fn default_version() -> u32 {
    INSTANCE_VERSION
}

fn default_slot_minutes() -> u32 {
    30
}

fn default_day_start() -> u32 {
    8 * 60
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalendarDoc {
    pub weeks: usize,
    pub days_per_week: usize,
    pub slots_per_day: usize,
    #[serde(default = "default_slot_minutes")]
    pub timeslot_minutes: u32,
    #[serde(default = "default_day_start")]
    pub day_start_minutes: u32,
    #[serde(default)]
    pub holidays: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeetingTimeDoc {
    pub id: usize,
    /// 1 = Monday.
    pub day: usize,
    /// 0-based slot offset from the start of the day.
    pub start_slot: usize,
    pub duration_slots: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildingDoc {
    pub id: usize,
    #[serde(default)]
    pub name: String,
    pub distances: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomDoc {
    pub id: usize,
    #[serde(default)]
    pub name: String,
    pub building: usize,
    pub floor: u32,
    pub capacity: u32,
    #[serde(default)]
    pub unavailable_days: Vec<usize>,
    #[serde(default)]
    pub adjacent: Vec<usize>,
    #[serde(default)]
    pub incompatible_sections: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrganizationDoc {
    pub id: usize,
    #[serde(default)]
    pub name: String,
    pub building_penalty: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionDoc {
    pub id: usize,
    #[serde(default)]
    pub name: String,
    pub level: u32,
    pub enrollment: u32,
    pub organization: usize,
    pub duration_slots: u32,
    pub meeting_times: Vec<usize>,
    pub weekly_meetings: Vec<u32>,
    #[serde(default)]
    pub blocked_days: Vec<usize>,
    #[serde(default)]
    pub init_room: Option<usize>,
    pub min_fraction: f64,
    #[serde(default)]
    pub exam_block: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_dist_penalty: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_pref_penalty: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_wasted_seats: Option<u32>,
}

/// Parses and validates an instance document.
pub fn load_instance(text: &str) -> Result<Instance, ModelError> {
    let doc: InstanceDoc = serde_json::from_str(text)?;
    doc.into_instance()
}

fn check_ids(path: &str, ids: impl Iterator<Item = usize>) -> Result<(), ModelError> {
    for (i, id) in ids.enumerate() {
        if id != i + 1 {
            return Err(invalid(format!("{path}[{i}].id"), format!("expected id {}, found {id}", i + 1)));
        }
    }
    Ok(())
}

fn to_index(path: impl Into<String>, id: usize, count: usize, what: &str) -> Result<usize, ModelError> {
    if id == 0 || id > count {
        Err(invalid(path, format!("dangling reference to {what} {id}")))
    } else {
        Ok(id - 1)
    }
}

fn day_mask(path: &str, days: &[usize], total: usize) -> Result<Vec<bool>, ModelError> {
    let mut mask = vec![false; total];
    for &d in days {
        mask[to_index(path, d, total, "day")?] = true;
    }
    Ok(mask)
}

fn day_list(mask: &[bool]) -> Vec<usize> {
    mask.iter()
        .enumerate()
        .filter_map(|(d, &b)| b.then_some(d + 1))
        .collect()
}

impl InstanceDoc {
    pub fn into_instance(self) -> Result<Instance, ModelError> {
        if self.version != INSTANCE_VERSION {
            return Err(ModelError::Version(self.version));
        }
        check_ids("meeting_times", self.meeting_times.iter().map(|m| m.id))?;
        check_ids("buildings", self.buildings.iter().map(|b| b.id))?;
        check_ids("rooms", self.rooms.iter().map(|r| r.id))?;
        check_ids("organizations", self.organizations.iter().map(|g| g.id))?;
        check_ids("sections", self.sections.iter().map(|s| s.id))?;

        let c = &self.calendar;
        if !(1..=7).contains(&c.days_per_week) {
            return Err(invalid("calendar.days_per_week", "must be between 1 and 7"));
        }
        let days = c.weeks * c.days_per_week;
        let calendar = Calendar {
            weeks: c.weeks,
            days_per_week: c.days_per_week,
            slots_per_day: c.slots_per_day,
            timeslot_minutes: c.timeslot_minutes,
            day_start_minutes: c.day_start_minutes,
            holiday: day_mask("calendar.holidays", &c.holidays, days)?,
        };

        let meeting_times = self
            .meeting_times
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let day = to_index(format!("meeting_times[{i}].day"), m.day, c.days_per_week, "day of week")?;
                Ok(MeetingTime {
                    day_of_week: day,
                    start_slot: m.start_slot,
                    duration_slots: m.duration_slots,
                })
            })
            .collect::<Result<Vec<_>, ModelError>>()?;

        let buildings = self
            .buildings
            .into_iter()
            .map(|b| Building {
                name: b.name,
                dist: b.distances,
            })
            .collect::<Vec<_>>();

        let n_rooms = self.rooms.len();
        let n_sections = self.sections.len();
        let n_buildings = buildings.len();
        let mut rooms = Vec::with_capacity(n_rooms);
        for (i, r) in self.rooms.into_iter().enumerate() {
            let path = format!("rooms[{i}]");
            let adjacent = r
                .adjacent
                .iter()
                .map(|&q| to_index(format!("{path}.adjacent"), q, n_rooms, "room"))
                .collect::<Result<Vec<_>, _>>()?;
            let incompatible = r
                .incompatible_sections
                .iter()
                .map(|&s| to_index(format!("{path}.incompatible_sections"), s, n_sections, "section"))
                .collect::<Result<Vec<_>, _>>()?;
            rooms.push(Room {
                name: r.name,
                building: to_index(format!("{path}.building"), r.building, n_buildings, "building")?,
                floor: r.floor,
                capacity: r.capacity,
                unavailable: day_mask(&format!("{path}.unavailable_days"), &r.unavailable_days, days)?,
                adjacent,
                incompatible,
            });
        }
        // Adjacency may be listed on either endpoint.
        let edges: Vec<(usize, usize)> = rooms
            .iter()
            .enumerate()
            .flat_map(|(q, room)| room.adjacent.iter().map(move |&r| (q, r)))
            .collect();
        for (q, r) in edges {
            if !rooms[r].adjacent.contains(&q) {
                rooms[r].adjacent.push(q);
            }
        }

        let organizations = self
            .organizations
            .into_iter()
            .map(|g| Organization {
                name: g.name,
                pref_penalty: g.building_penalty,
            })
            .collect::<Vec<_>>();

        let n_times = meeting_times.len();
        let n_orgs = organizations.len();
        let mut sections = Vec::with_capacity(n_sections);
        for (i, s) in self.sections.into_iter().enumerate() {
            let path = format!("sections[{i}]");
            let times = s
                .meeting_times
                .iter()
                .map(|&m| to_index(format!("{path}.meeting_times"), m, n_times, "meeting time"))
                .collect::<Result<Vec<_>, _>>()?;
            let init_room = s
                .init_room
                .map(|r| to_index(format!("{path}.init_room"), r, n_rooms, "room"))
                .transpose()?;
            let mut section = Section::new(
                s.name,
                s.level,
                s.enrollment,
                to_index(format!("{path}.organization"), s.organization, n_orgs, "organization")?,
                s.duration_slots,
                times,
                s.weekly_meetings,
                day_mask(&format!("{path}.blocked_days"), &s.blocked_days, days)?,
                init_room,
                s.min_fraction,
            );
            section.exam_block = s.exam_block;
            section.caps = CapOverrides {
                max_dist_penalty: s.max_dist_penalty,
                max_pref_penalty: s.max_pref_penalty,
                max_wasted_seats: s.max_wasted_seats,
            };
            sections.push(section);
        }

        Instance::new(
            calendar,
            meeting_times,
            buildings,
            rooms,
            organizations,
            sections,
            self.weights,
        )
    }

    pub fn from_instance(instance: &Instance) -> InstanceDoc {
        let cal = &instance.calendar;
        InstanceDoc {
            version: INSTANCE_VERSION,
            calendar: CalendarDoc {
                weeks: cal.weeks,
                days_per_week: cal.days_per_week,
                slots_per_day: cal.slots_per_day,
                timeslot_minutes: cal.timeslot_minutes,
                day_start_minutes: cal.day_start_minutes,
                holidays: day_list(&cal.holiday),
            },
            meeting_times: instance
                .meeting_times
                .iter()
                .enumerate()
                .map(|(i, m)| MeetingTimeDoc {
                    id: i + 1,
                    day: m.day_of_week + 1,
                    start_slot: m.start_slot,
                    duration_slots: m.duration_slots,
                })
                .collect(),
            buildings: instance
                .buildings
                .iter()
                .enumerate()
                .map(|(i, b)| BuildingDoc {
                    id: i + 1,
                    name: b.name.clone(),
                    distances: b.dist.clone(),
                })
                .collect(),
            rooms: instance
                .rooms
                .iter()
                .enumerate()
                .map(|(i, r)| RoomDoc {
                    id: i + 1,
                    name: r.name.clone(),
                    building: r.building + 1,
                    floor: r.floor,
                    capacity: r.capacity,
                    unavailable_days: day_list(&r.unavailable),
                    adjacent: r.adjacent.iter().map(|q| q + 1).collect(),
                    incompatible_sections: r.incompatible.iter().map(|s| s + 1).collect(),
                })
                .collect(),
            organizations: instance
                .organizations
                .iter()
                .enumerate()
                .map(|(i, g)| OrganizationDoc {
                    id: i + 1,
                    name: g.name.clone(),
                    building_penalty: g.pref_penalty.clone(),
                })
                .collect(),
            sections: instance
                .sections
                .iter()
                .enumerate()
                .map(|(i, s)| SectionDoc {
                    id: i + 1,
                    name: s.name.clone(),
                    level: s.level,
                    enrollment: s.enrollment,
                    organization: s.org + 1,
                    duration_slots: s.duration_slots,
                    meeting_times: s.meeting_times.iter().map(|m| m + 1).collect(),
                    weekly_meetings: s.weekly_count.clone(),
                    blocked_days: day_list(&s.blocked),
                    init_room: s.init_room.map(|r| r + 1),
                    min_fraction: s.min_fraction,
                    exam_block: s.exam_block,
                    max_dist_penalty: s.caps.max_dist_penalty,
                    max_pref_penalty: s.caps.max_pref_penalty,
                    max_wasted_seats: s.caps.max_wasted_seats,
                })
                .collect(),
            weights: instance.weights.clone(),
        }
    }
}

/// Pretty-printed instance document.
pub fn instance_to_json(instance: &Instance) -> String {
    serde_json::to_string_pretty(&InstanceDoc::from_instance(instance)).expect("instance documents serialize")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionPlanDoc {
    pub rooms: Vec<usize>,
    /// `[meeting time id, week]` pairs.
    pub meetings: Vec<[usize; 2]>,
}

/// Section id to plan. Sections missing from the map are unscheduled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleDoc {
    pub sections: BTreeMap<usize, SectionPlanDoc>,
}

impl ScheduleDoc {
    pub fn from_schedule(schedule: &Schedule) -> ScheduleDoc {
        let sections = schedule
            .sections
            .iter()
            .enumerate()
            .filter(|(_, p)| !p.rooms.is_empty() || !p.meetings.is_empty())
            .map(|(i, p)| {
                (
                    i + 1,
                    SectionPlanDoc {
                        rooms: p.rooms.iter().map(|r| r + 1).collect(),
                        meetings: p.meetings.iter().map(|m| [m.time + 1, m.week + 1]).collect(),
                    },
                )
            })
            .collect();
        ScheduleDoc { sections }
    }

    pub fn into_schedule(self, instance: &Instance) -> Result<Schedule, ModelError> {
        let mut schedule = Schedule::empty(instance.sections.len());
        let n_rooms = instance.rooms.len();
        let n_times = instance.meeting_times.len();
        let weeks = instance.calendar.weeks;
        for (id, plan) in self.sections {
            let s = to_index("schedule.sections", id, instance.sections.len(), "section")?;
            let path = format!("schedule.sections[{id}]");
            let mut out = SectionPlan::default();
            for &r in &plan.rooms {
                out.rooms.push(to_index(format!("{path}.rooms"), r, n_rooms, "room")?);
            }
            out.rooms.sort_unstable();
            let before = out.rooms.len();
            out.rooms.dedup();
            if out.rooms.len() != before {
                return Err(invalid(format!("{path}.rooms"), "duplicate room"));
            }
            for &[m, w] in &plan.meetings {
                let slot = MeetingSlot {
                    time: to_index(format!("{path}.meetings"), m, n_times, "meeting time")?,
                    week: to_index(format!("{path}.meetings"), w, weeks, "week")?,
                };
                if !out.meetings.insert(slot) {
                    return Err(invalid(format!("{path}.meetings"), format!("duplicate meeting [{m}, {w}]")));
                }
            }
            schedule.sections[s] = out;
        }
        Ok(schedule)
    }
}

pub fn load_schedule(text: &str, instance: &Instance) -> Result<Schedule, ModelError> {
    let doc: ScheduleDoc = serde_json::from_str(text)?;
    doc.into_schedule(instance)
}

pub fn schedule_to_json(schedule: &Schedule) -> String {
    serde_json::to_string_pretty(&ScheduleDoc::from_schedule(schedule)).expect("schedule documents serialize")
}

/// Flat per-meeting table: one CSV row per mass meeting.
pub fn schedule_to_csv(instance: &Instance, schedule: &Schedule) -> String {
    let cal = &instance.calendar;
    let mut out = String::from("section,name,rooms,week,day,date_index,start,duration_minutes\n");
    for (s, plan) in schedule.sections.iter().enumerate() {
        let rooms = plan
            .rooms
            .iter()
            .map(|r| (r + 1).to_string())
            .collect::<Vec<_>>()
            .join(" ");
        for slot in &plan.meetings {
            let mt = &instance.meeting_times[slot.time];
            let start = cal.day_start_minutes + mt.start_slot as u32 * cal.timeslot_minutes;
            out.push_str(&format!(
                "{},{},{},{},{},{},{:02}:{:02},{}\n",
                s + 1,
                csv_field(&instance.sections[s].name),
                rooms,
                slot.week + 1,
                mt.day_of_week + 1,
                mt.day(cal, slot.week) + 1,
                start / 60,
                start % 60,
                mt.duration_slots as u32 * cal.timeslot_minutes
            ));
        }
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
