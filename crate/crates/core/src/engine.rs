//! Greedy scheduling engine: places a scrambled list of meetings at growing
//! distance from each meeting's default week.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::evaluate::{MeetingSlot, Schedule};
use crate::model::Instance;

/// One meeting of the master list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Meeting {
    pub section: usize,
    pub default_week: usize,
    /// 1-based wave number.
    pub wave: usize,
}

/// Occupied weekly timeslots per (room, week).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccupancyIndex {
    weeks: usize,
    words: usize,
    bits: Vec<u64>,
}

impl OccupancyIndex {
    pub fn new(instance: &Instance) -> Self {
        let words = instance.calendar.slots_per_week().div_ceil(64);
        OccupancyIndex {
            weeks: instance.calendar.weeks,
            words,
            bits: vec![0; instance.rooms.len() * instance.calendar.weeks * words],
        }
    }

    pub fn rebuild(instance: &Instance, schedule: &Schedule) -> Self {
        let mut occ = OccupancyIndex::new(instance);
        for plan in &schedule.sections {
            for slot in &plan.meetings {
                occ.mark(instance, &plan.rooms, *slot, true);
            }
        }
        occ
    }

    fn row(&self, room: usize, week: usize) -> usize {
        (room * self.weeks + week) * self.words
    }

    pub fn is_free(&self, instance: &Instance, room: usize, slot: MeetingSlot) -> bool {
        let base = self.row(room, slot.week);
        instance.meeting_times[slot.time]
            .weekly_slots(&instance.calendar)
            .all(|t| self.bits[base + t / 64] & (1 << (t % 64)) == 0)
    }

    fn mark(&mut self, instance: &Instance, rooms: &[usize], slot: MeetingSlot, on: bool) {
        let range = instance.meeting_times[slot.time].weekly_slots(&instance.calendar);
        for &r in rooms {
            let base = self.row(r, slot.week);
            for t in range.clone() {
                let word = &mut self.bits[base + t / 64];
                if on {
                    *word |= 1 << (t % 64);
                } else {
                    *word &= !(1 << (t % 64));
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Op {
    Placed(usize, MeetingSlot),
    Removed(usize, MeetingSlot),
    Rooms(usize, Vec<usize>),
}

/// A schedule plus its occupancy index and an optional undo journal.
#[derive(Debug, Clone)]
pub struct EngineState {
    pub schedule: Schedule,
    pub occupancy: OccupancyIndex,
    journal: Option<Vec<Op>>,
}

impl EngineState {
    pub fn new(instance: &Instance) -> Self {
        EngineState {
            schedule: Schedule::empty(instance.sections.len()),
            occupancy: OccupancyIndex::new(instance),
            journal: None,
        }
    }

    pub fn from_schedule(instance: &Instance, schedule: Schedule) -> Self {
        EngineState {
            occupancy: OccupancyIndex::rebuild(instance, &schedule),
            schedule,
            journal: None,
        }
    }

    pub fn begin(&mut self) {
        self.journal = Some(Vec::new());
    }

    pub fn commit(&mut self) {
        self.journal = None;
    }

    /// Undoes every change since [`EngineState::begin`].
    pub fn rollback(&mut self, instance: &Instance) {
        let Some(ops) = self.journal.take() else { return };
        for op in ops.into_iter().rev() {
            match op {
                Op::Placed(s, slot) => self.apply_remove(instance, s, slot),
                Op::Removed(s, slot) => self.apply_place(instance, s, slot),
                Op::Rooms(s, rooms) => self.schedule.sections[s].rooms = rooms,
            }
        }
    }

    fn apply_place(&mut self, instance: &Instance, section: usize, slot: MeetingSlot) {
        let plan = &mut self.schedule.sections[section];
        plan.meetings.insert(slot);
        self.occupancy.mark(instance, &plan.rooms, slot, true);
    }

    fn apply_remove(&mut self, instance: &Instance, section: usize, slot: MeetingSlot) {
        let plan = &mut self.schedule.sections[section];
        plan.meetings.remove(&slot);
        self.occupancy.mark(instance, &plan.rooms, slot, false);
    }

    pub fn place(&mut self, instance: &Instance, section: usize, slot: MeetingSlot) {
        self.apply_place(instance, section, slot);
        if let Some(j) = self.journal.as_mut() {
            j.push(Op::Placed(section, slot));
        }
    }

    pub fn remove(&mut self, instance: &Instance, section: usize, slot: MeetingSlot) {
        self.apply_remove(instance, section, slot);
        if let Some(j) = self.journal.as_mut() {
            j.push(Op::Removed(section, slot));
        }
    }

    /// Removes every meeting of `section` and returns them in order.
    pub fn clear_section(&mut self, instance: &Instance, section: usize) -> Vec<MeetingSlot> {
        let slots: Vec<MeetingSlot> = self.schedule.sections[section].meetings.iter().copied().collect();
        for &slot in &slots {
            self.remove(instance, section, slot);
        }
        slots
    }

    /// Changes the room set of a section that currently has no meetings.
    pub fn set_rooms(&mut self, section: usize, rooms: Vec<usize>) {
        let plan = &mut self.schedule.sections[section];
        assert!(plan.meetings.is_empty(), "room set changed under scheduled meetings");
        let old = std::mem::replace(&mut plan.rooms, rooms);
        if let Some(j) = self.journal.as_mut() {
            j.push(Op::Rooms(section, old));
        }
    }
}

/// Tries every eligible meeting time of `section` in `week`, in scan order,
/// and places the meeting at the first one that fits.
pub fn try_place(instance: &Instance, state: &mut EngineState, section: usize, week: usize) -> Option<MeetingSlot> {
    let sec = &instance.sections[section];
    let plan = &state.schedule.sections[section];
    for &m in &sec.meeting_times {
        let slot = MeetingSlot::new(m, week);
        if !instance.day_open(section, m, week) || plan.meetings.contains(&slot) {
            continue;
        }
        let day = instance.meeting_times[m].day(&instance.calendar, week);
        let fits = plan.rooms.iter().all(|&r| {
            !instance.rooms[r].unavailable[day] && state.occupancy.is_free(instance, r, slot)
        });
        if fits {
            state.place(instance, section, slot);
            return Some(slot);
        }
    }
    None
}

/// Places as many `meetings` as possible; sections must already hold their
/// room sets. Returns the meetings that found no slot in any week.
pub fn run_engine<R: Rng + ?Sized>(
    instance: &Instance,
    state: &mut EngineState,
    meetings: Vec<Meeting>,
    rng: &mut R,
) -> Vec<Meeting> {
    run_engine_masked(instance, state, meetings, rng, |_, _| true)
}

/// [`run_engine`] for callers that know `(section, week)` pairs where
/// `open` is false cannot take a meeting; those weeks are skipped without
/// probing. The result is the same as the unmasked run whenever that holds.
pub fn run_engine_masked<R: Rng + ?Sized>(
    instance: &Instance,
    state: &mut EngineState,
    meetings: Vec<Meeting>,
    rng: &mut R,
    open: impl Fn(usize, usize) -> bool,
) -> Vec<Meeting> {
    let tagged = meetings.into_iter().map(|m| (m, ())).collect();
    run_engine_tagged(instance, state, tagged, rng, open).into_iter().map(|(m, _)| m).collect()
}

/// [`run_engine_masked`] carrying a caller tag with each meeting; returns
/// the unplaced meetings with their tags.
pub fn run_engine_tagged<R: Rng + ?Sized, T: Copy>(
    instance: &Instance,
    state: &mut EngineState,
    mut meetings: Vec<(Meeting, T)>,
    rng: &mut R,
    open: impl Fn(usize, usize) -> bool,
) -> Vec<(Meeting, T)> {
    let weeks = instance.calendar.weeks as isize;
    meetings.shuffle(rng);
    let mut unplaced = Vec::new();
    // Occupancy only grows during a run, so a (section, week) that failed
    // once stays failed, and a section whose meeting failed in every week
    // cannot place any other meeting.
    let n = instance.sections.len();
    let mut dead = vec![false; n];
    let mut failed = vec![false; n * instance.calendar.weeks];
    // Weeks per section that are open and have not failed yet; at zero no
    // meeting of the section can be placed any more.
    let mut live = vec![usize::MAX; n];
    for (mt, _) in &meetings {
        if live[mt.section] == usize::MAX {
            live[mt.section] = (0..instance.calendar.weeks).filter(|&w| open(mt.section, w)).count();
        }
    }
    let mut deviation: isize = 0;
    while !meetings.is_empty() {
        meetings.retain(|item| {
            let mt = &item.0;
            if dead[mt.section] || live[mt.section] == 0 {
                unplaced.push(*item);
                return false;
            }
            let base = mt.default_week as isize;
            let candidates = if deviation == 0 {
                [Some(base), None]
            } else {
                [Some(base + deviation), Some(base - deviation)]
            };
            let mut in_bounds = false;
            for w in candidates.into_iter().flatten() {
                if !(0..weeks).contains(&w) {
                    continue;
                }
                in_bounds = true;
                let key = mt.section * weeks as usize + w as usize;
                if failed[key] || !open(mt.section, w as usize) {
                    continue;
                }
                if try_place(instance, state, mt.section, w as usize).is_some() {
                    return false;
                }
                failed[key] = true;
                live[mt.section] -= 1;
            }
            if !in_bounds {
                dead[mt.section] = true;
                unplaced.push(*item);
                return false;
            }
            true
        });
        deviation += 1;
    }
    unplaced
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluate::check_feasibility;
    use crate::gen::make_figure2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn figure2_state() -> (Instance, EngineState) {
        let inst = make_figure2();
        let mut state = EngineState::new(&inst);
        for s in 0..inst.sections.len() {
            state.set_rooms(s, vec![0, 1, 2, 3]);
        }
        (inst, state)
    }

    #[test]
    fn second_section_takes_next_time_in_scan_order() {
        let (inst, mut state) = figure2_state();
        // A and B both meet MW 10:00. A takes Monday, so B falls through to
        // Wednesday in the same week.
        let a = try_place(&inst, &mut state, 0, 0).unwrap();
        let b = try_place(&inst, &mut state, 1, 0).unwrap();
        let ma = inst.meeting_times[a.time];
        let mb = inst.meeting_times[b.time];
        assert_eq!((ma.day_of_week, ma.start_slot), (0, 4));
        assert_eq!((mb.day_of_week, mb.start_slot), (2, 4));
    }

    #[test]
    fn closed_room_blocks_placement() {
        let (mut inst, _) = figure2_state();
        for d in 0..inst.calendar.days() {
            inst.rooms[2].unavailable[d] = true;
        }
        let mut state = EngineState::new(&inst);
        state.set_rooms(0, vec![0, 1, 2, 3]);
        assert!(try_place(&inst, &mut state, 0, 0).is_none());
    }

    #[test]
    fn used_slot_is_skipped() {
        let (inst, mut state) = figure2_state();
        let first = try_place(&inst, &mut state, 0, 1).unwrap();
        let second = try_place(&inst, &mut state, 0, 1).unwrap();
        assert_ne!(first, second);
        assert!(try_place(&inst, &mut state, 0, 1).is_none());
    }

    #[test]
    fn one_meeting_per_section_fits_figure2() {
        let (inst, mut state) = figure2_state();
        let meetings: Vec<Meeting> = (0..8)
            .map(|s| Meeting {
                section: s,
                default_week: 0,
                wave: 1,
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let unplaced = run_engine(&inst, &mut state, meetings, &mut rng);
        assert!(unplaced.is_empty());
        assert_eq!(state.schedule.meeting_count(), 8);
        assert!(check_feasibility(&inst, &state.schedule).is_empty());
    }

    #[test]
    fn surplus_meetings_come_back_unplaced() {
        let (inst, mut state) = figure2_state();
        // Two weeks, two eligible times per week: at most 4 meetings.
        let meetings = vec![
            Meeting {
                section: 0,
                default_week: 0,
                wave: 1,
            };
            6
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let unplaced = run_engine(&inst, &mut state, meetings, &mut rng);
        assert_eq!(unplaced.len(), 2);
        assert_eq!(state.schedule.sections[0].meetings.len(), 4);
    }

    #[test]
    fn seeded_runs_repeat() {
        let run = || {
            let (inst, mut state) = figure2_state();
            let meetings: Vec<Meeting> = (0..16)
                .map(|i| Meeting {
                    section: i % 8,
                    default_week: i % 2,
                    wave: 1,
                })
                .collect();
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            run_engine(&inst, &mut state, meetings, &mut rng);
            state.schedule
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn rollback_restores_schedule_and_index() {
        let (inst, mut state) = figure2_state();
        try_place(&inst, &mut state, 0, 0).unwrap();
        let before = state.schedule.clone();
        state.begin();
        state.clear_section(&inst, 0);
        state.set_rooms(0, vec![0]);
        try_place(&inst, &mut state, 0, 1).unwrap();
        try_place(&inst, &mut state, 3, 1).unwrap();
        state.rollback(&inst);
        assert_eq!(state.schedule, before);
        assert_eq!(state.occupancy, OccupancyIndex::rebuild(&inst, &before));
    }
}
