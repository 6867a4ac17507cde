//! Instance builders and brute-force references shared by integration tests
//! and the acceptance harness.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hpucsp::engine::{run_engine, EngineState, Meeting};
use hpucsp::evaluate::{check_feasibility, spatial_metrics, MeetingSlot, Schedule, ViolationKind};
use hpucsp::model::{Building, Calendar, Instance, MeetingTime, Organization, Room, Scenario, Section, Weights};
use hpucsp::pra::enumerate_pras;

pub fn calendar(weeks: usize, days_per_week: usize, slots_per_day: usize) -> Calendar {
    Calendar {
        weeks,
        days_per_week,
        slots_per_day,
        timeslot_minutes: 30,
        day_start_minutes: 480,
        holiday: vec![false; weeks * days_per_week],
    }
}

pub fn room(building: usize, floor: u32, capacity: u32, days: usize) -> Room {
    Room {
        name: String::new(),
        building,
        floor,
        capacity,
        unavailable: vec![false; days],
        adjacent: vec![],
        incompatible: vec![],
    }
}

/// Buildings with the given symmetric distance matrix.
pub fn buildings(dist: &[&[f64]]) -> Vec<Building> {
    dist.iter()
        .enumerate()
        .map(|(b, row)| Building {
            name: format!("B{}", b + 1),
            dist: row.to_vec(),
        })
        .collect()
}

pub fn link(rooms: &mut [Room], q: usize, r: usize) {
    rooms[q].adjacent.push(r);
    rooms[r].adjacent.push(q);
}

/// Weights with every penalty cap lifted.
pub fn uncapped(max_rooms: usize) -> Weights {
    Weights {
        max_rooms,
        max_dist_penalty: None,
        max_pref_penalty: None,
        max_wasted_seats: None,
        ..Weights::pandemic()
    }
}

// ---------------------------------------------------------------------------
// PRA brute force

/// A random room-set profile with `rooms` rooms; caps, MaxRooms and initial
/// rooms vary with the seed.
pub fn pra_profile(seed: u64, rooms: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cal = calendar(1, 1, 4);
    let n_b = rng.gen_range(1..=3);
    let mut dist = vec![vec![0.0; n_b]; n_b];
    for b in 0..n_b {
        for c in b + 1..n_b {
            let d = rng.gen_range(40..400) as f64;
            dist[b][c] = d;
            dist[c][b] = d;
        }
    }
    let mut rs: Vec<Room> = (0..rooms)
        .map(|_| room(rng.gen_range(0..n_b), rng.gen_range(0..4), rng.gen_range(3..40), 1))
        .collect();
    for q in 0..rooms {
        for r in q + 1..rooms {
            if rs[q].building == rs[r].building && rs[q].floor == rs[r].floor && rng.gen_bool(0.5) {
                link(&mut rs, q, r);
            }
        }
    }
    let n_s = 3;
    for r in rs.iter_mut() {
        for s in 0..n_s {
            if rng.gen_bool(0.1) {
                r.incompatible.push(s);
            }
        }
    }
    let org = Organization {
        name: "Org".into(),
        pref_penalty: (0..n_b).map(|_| [0.0, 1.0, 2.0, 6.0][rng.gen_range(0..4)]).collect(),
    };
    let sections = (0..n_s)
        .map(|i| {
            Section::new(
                format!("S{}", i + 1),
                1,
                rng.gen_range(0..60),
                0,
                1,
                vec![0],
                vec![1],
                vec![false],
                rng.gen_bool(0.5).then(|| rng.gen_range(0..rooms)),
                0.25,
            )
        })
        .collect();
    let weights = Weights {
        max_rooms: rng.gen_range(1..=5),
        max_dist_penalty: rng.gen_bool(0.6).then(|| rng.gen_range(0..700) as f64),
        max_pref_penalty: rng.gen_bool(0.5).then(|| [0.0, 1.0, 2.0][rng.gen_range(0..3)]),
        max_wasted_seats: rng.gen_bool(0.5).then(|| rng.gen_range(0..30)),
        ..Weights::pandemic()
    };
    let times = vec![MeetingTime {
        day_of_week: 0,
        start_slot: 0,
        duration_slots: 1,
    }];
    let bldgs = (0..n_b)
        .map(|b| Building {
            name: format!("B{}", b + 1),
            dist: dist[b].clone(),
        })
        .collect();
    Instance::new(cal, times, bldgs, rs, vec![org], sections, weights).expect("valid profile")
}

/// Every room subset passing the PRA rules, checked one subset at a time.
pub fn brute_force_pras(inst: &Instance, s: usize, scenario: Scenario) -> BTreeSet<Vec<usize>> {
    let n = inst.rooms.len();
    let sec = &inst.sections[s];
    let e = sec.enrollment as u64;
    let mut out = BTreeSet::new();
    for mask in 1u32..(1 << n) {
        let rooms: Vec<usize> = (0..n).filter(|&r| mask & (1 << r) != 0).collect();
        if rooms.len() > inst.weights.max_rooms {
            continue;
        }
        if rooms.iter().any(|&r| !inst.compatible(r, s)) {
            continue;
        }
        if scenario == Scenario::R {
            if let Some(init) = sec.init_room {
                if !rooms.contains(&init) {
                    continue;
                }
            }
        }
        let cap: u64 = rooms.iter().map(|&r| inst.rooms[r].capacity as u64).sum();
        if cap < e {
            continue;
        }
        let minimal = rooms.len() == 1 || rooms.iter().all(|&r| cap - (inst.rooms[r].capacity as u64) < e);
        if !minimal {
            continue;
        }
        let m = spatial_metrics(inst, &rooms, s).unwrap();
        if inst.max_dist_penalty(s).is_some_and(|c| m.dist_penalty > c)
            || inst.max_pref_penalty(s).is_some_and(|c| m.pref_penalty > c)
            || inst.max_wasted_seats(s).is_some_and(|c| m.wasted_seats > c as i64)
        {
            continue;
        }
        out.insert(rooms);
    }
    out
}

/// Compares `enumerate_pras` with the brute force on every section and
/// scenario of `inst`; returns a description of the first mismatch.
pub fn pra_mismatch(inst: &Instance) -> Option<String> {
    for s in 0..inst.sections.len() {
        for scenario in [Scenario::NR, Scenario::R] {
            let fast: BTreeSet<Vec<usize>> = enumerate_pras(inst, s, scenario).into_iter().map(|p| p.rooms).collect();
            let slow = brute_force_pras(inst, s, scenario);
            if fast != slow {
                return Some(format!(
                    "section {s} {scenario}: enumerated {} sets, brute force {} (only fast: {:?}, only brute: {:?})",
                    fast.len(),
                    slow.len(),
                    fast.difference(&slow).take(3).collect::<Vec<_>>(),
                    slow.difference(&fast).take(3).collect::<Vec<_>>()
                ));
            }
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Mutation testing

/// A campus with holidays, blocked days, unavailable rooms, incompatible
/// pairs and initial rooms, so that every constraint can be broken.
pub fn mutation_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        if let Some(inst) = try_mutation_instance(&mut rng) {
            return inst;
        }
    }
}

fn try_mutation_instance(rng: &mut ChaCha8Rng) -> Option<Instance> {
    let (weeks, dpw) = (3, 5);
    let days = weeks * dpw;
    let mut cal = calendar(weeks, dpw, 8);
    for _ in 0..2 {
        cal.holiday[rng.gen_range(0..days)] = true;
    }
    let mut times = Vec::new();
    for d in 0..dpw {
        for start in [0, 2, 1] {
            times.push(MeetingTime {
                day_of_week: d,
                start_slot: start,
                duration_slots: 2,
            });
        }
    }
    let n_r = 6;
    let n_s = 8;
    let mut rooms: Vec<Room> = (0..n_r)
        .map(|_| {
            let mut r = room(rng.gen_range(0..2), rng.gen_range(0..3), rng.gen_range(10..=40), days);
            for u in r.unavailable.iter_mut() {
                *u = rng.gen_bool(0.1);
            }
            for s in 0..n_s {
                if rng.gen_bool(0.15) {
                    r.incompatible.push(s);
                }
            }
            r
        })
        .collect();
    for q in 0..n_r {
        for r in q + 1..n_r {
            if rooms[q].building == rooms[r].building && rooms[q].floor == rooms[r].floor && rng.gen_bool(0.5) {
                link(&mut rooms, q, r);
            }
        }
    }
    let mut sections = Vec::new();
    for i in 0..n_s {
        let mut pool: Vec<usize> = (0..times.len()).collect();
        pool.shuffle(rng);
        let want = rng.gen_range(2..=3);
        let mut chosen: Vec<usize> = Vec::new();
        for m in pool {
            if chosen.len() < want && chosen.iter().all(|&c| !times[c].overlaps(&times[m])) {
                chosen.push(m);
            }
        }
        let blocked: Vec<bool> = (0..days).map(|_| rng.gen_bool(0.1)).collect();
        let weekly: Vec<u32> = (0..weeks)
            .map(|w| {
                let open = chosen
                    .iter()
                    .filter(|&&m| {
                        let d = times[m].day(&cal, w);
                        !cal.holiday[d] && !blocked[d]
                    })
                    .count() as u32;
                open.min(rng.gen_range(1..=2))
            })
            .collect();
        if weekly.iter().sum::<u32>() == 0 {
            return None;
        }
        let init = rng.gen_bool(0.5).then(|| rng.gen_range(0..n_r));
        sections.push(Section::new(
            format!("S{}", i + 1),
            rng.gen_range(0..6),
            rng.gen_range(5..=60),
            0,
            2,
            chosen,
            weekly,
            blocked,
            init,
            [0.25, 0.5][rng.gen_range(0..2)],
        ));
    }
    let org = Organization {
        name: "Org".into(),
        pref_penalty: vec![0.0, 1.0],
    };
    let inst = Instance::new(
        cal,
        times,
        buildings(&[&[0.0, 150.0], &[150.0, 0.0]]),
        rooms,
        vec![org],
        sections,
        uncapped(3),
    )
    .ok()?;
    let hostable = (0..n_s).all(|s| !enumerate_pras(&inst, s, Scenario::R).is_empty());
    hostable.then_some(inst)
}

/// Random PRAs (keeping initial rooms) filled by the engine, then thinned.
pub fn base_schedule(inst: &Instance, rng: &mut ChaCha8Rng, thin: f64) -> Schedule {
    let mut state = EngineState::new(inst);
    let mut meetings = Vec::new();
    for s in 0..inst.sections.len() {
        let pras = enumerate_pras(inst, s, Scenario::R);
        let pick = pras.choose(rng).expect("hostable section");
        state.set_rooms(s, pick.rooms.clone());
        for (w, &n) in inst.sections[s].weekly_count.iter().enumerate() {
            for _ in 0..n {
                meetings.push(Meeting {
                    section: s,
                    default_week: w,
                    wave: 1,
                });
            }
        }
    }
    run_engine(inst, &mut state, meetings, rng);
    let mut schedule = state.schedule;
    for plan in schedule.sections.iter_mut() {
        plan.meetings.retain(|_| !rng.gen_bool(thin));
    }
    schedule
}

/// Whether `room` is busy at (`time`, `week`) for any section other than
/// `except`.
fn busy(inst: &Instance, schedule: &Schedule, room: usize, time: usize, week: usize, except: Option<usize>) -> bool {
    let mt = &inst.meeting_times[time];
    schedule.sections.iter().enumerate().any(|(s, plan)| {
        Some(s) != except
            && plan.rooms.contains(&room)
            && plan
                .meetings
                .iter()
                .any(|slot| slot.week == week && inst.meeting_times[slot.time].overlaps(mt))
    })
}

/// Whether adding (`time`, `week`) to section `s` would clash with any
/// meeting in its rooms, its own included.
fn clashes(inst: &Instance, schedule: &Schedule, s: usize, time: usize, week: usize) -> bool {
    schedule.sections[s]
        .rooms
        .iter()
        .any(|&r| busy(inst, schedule, r, time, week, None))
}

fn rooms_available(inst: &Instance, schedule: &Schedule, s: usize, day: usize) -> bool {
    schedule.sections[s].rooms.iter().all(|&r| !inst.rooms[r].unavailable[day])
}

/// Whether `room` could join section `s` without any other violation.
fn room_fits(inst: &Instance, schedule: &Schedule, s: usize, room: usize) -> bool {
    let plan = &schedule.sections[s];
    !plan.rooms.contains(&room)
        && plan.meetings.iter().all(|slot| {
            let day = inst.meeting_times[slot.time].day(&inst.calendar, slot.week);
            !inst.rooms[room].unavailable[day] && !busy(inst, schedule, room, slot.time, slot.week, Some(s))
        })
}

/// Meeting slots of section `s` described by `pred(time, week, day, eligible,
/// holiday, blocked, rooms_available, clash)`.
fn candidate_slots(
    inst: &Instance,
    schedule: &Schedule,
    s: usize,
    pred: impl Fn(bool, bool, bool, bool, bool) -> bool,
) -> Vec<MeetingSlot> {
    let sec = &inst.sections[s];
    let mut out = Vec::new();
    for w in 0..inst.calendar.weeks {
        for m in 0..inst.meeting_times.len() {
            let slot = MeetingSlot::new(m, w);
            if schedule.sections[s].meetings.contains(&slot) {
                continue;
            }
            let day = inst.meeting_times[m].day(&inst.calendar, w);
            if pred(
                sec.meets_at(m),
                inst.calendar.holiday[day],
                sec.blocked[day],
                rooms_available(inst, schedule, s, day),
                clashes(inst, schedule, s, m, w),
            ) {
                out.push(slot);
            }
        }
    }
    out
}

fn clean(eligible: bool, holiday: bool, blocked: bool, available: bool, clash: bool) -> bool {
    eligible && !holiday && !blocked && available && !clash
}

fn count(schedule: &Schedule, s: usize) -> u32 {
    schedule.sections[s].meetings.len() as u32
}

/// Applies a random mutation that should break exactly `kind`. `None` when
/// this schedule offers no way to do so.
pub fn mutate(
    inst: &Instance,
    base: &Schedule,
    kind: ViolationKind,
    rng: &mut ChaCha8Rng,
) -> Option<(Instance, Schedule)> {
    use ViolationKind::*;
    let n_s = inst.sections.len();
    let mut order: Vec<usize> = (0..n_s).collect();
    order.shuffle(rng);
    let mut sched = base.clone();
    let below_normal = |sched: &Schedule, s: usize| count(sched, s) < inst.sections[s].total_meetings();
    let add_slot = |sched: &mut Schedule, s: usize, slots: Vec<MeetingSlot>, rng: &mut ChaCha8Rng| -> bool {
        match slots.choose(rng) {
            Some(&slot) => {
                sched.sections[s].meetings.insert(slot);
                true
            }
            None => false,
        }
    };
    match kind {
        Capacity => {
            for &s in &order {
                let plan = &sched.sections[s];
                if plan.meetings.is_empty() {
                    continue;
                }
                let e = inst.sections[s].enrollment as u64;
                let init = inst.sections[s].init_room;
                let droppable: Vec<usize> = plan
                    .rooms
                    .iter()
                    .copied()
                    .filter(|&r| Some(r) != init)
                    .filter(|&r| {
                        let rest: u64 = plan.rooms.iter().filter(|&&q| q != r).map(|&q| inst.rooms[q].capacity as u64).sum();
                        plan.rooms.len() > 1 && rest < e
                    })
                    .collect();
                if let Some(&r) = droppable.choose(rng) {
                    sched.sections[s].rooms.retain(|&q| q != r);
                    return Some((inst.clone(), sched));
                }
                if init.is_none() {
                    sched.sections[s].rooms.clear();
                    return Some((inst.clone(), sched));
                }
            }
            None
        }
        Compatibility => {
            for &s in &order {
                if sched.sections[s].rooms.len() >= inst.weights.max_rooms {
                    continue;
                }
                let cands: Vec<usize> = (0..inst.rooms.len())
                    .filter(|&r| !inst.compatible(r, s) && room_fits(inst, &sched, s, r))
                    .collect();
                if let Some(&r) = cands.choose(rng) {
                    sched.sections[s].rooms.push(r);
                    return Some((inst.clone(), sched));
                }
            }
            None
        }
        InitRoom => {
            for &s in &order {
                let Some(init) = inst.sections[s].init_room else { continue };
                let cands: Vec<usize> = (0..inst.rooms.len())
                    .filter(|&r| {
                        inst.compatible(r, s)
                            && inst.rooms[r].capacity >= inst.rooms[init].capacity
                            && room_fits(inst, &sched, s, r)
                    })
                    .collect();
                if let Some(&r) = cands.choose(rng) {
                    let rooms = &mut sched.sections[s].rooms;
                    rooms.retain(|&q| q != init);
                    rooms.push(r);
                    return Some((inst.clone(), sched));
                }
            }
            None
        }
        MaxRooms => {
            for &s in &order {
                let mut added = false;
                while sched.sections[s].rooms.len() <= inst.weights.max_rooms {
                    let cands: Vec<usize> = (0..inst.rooms.len())
                        .filter(|&r| inst.compatible(r, s) && room_fits(inst, &sched, s, r))
                        .collect();
                    match cands.choose(rng) {
                        Some(&r) => {
                            sched.sections[s].rooms.push(r);
                            added = true;
                        }
                        None => break,
                    }
                }
                if sched.sections[s].rooms.len() > inst.weights.max_rooms {
                    return Some((inst.clone(), sched));
                }
                if added {
                    sched = base.clone();
                }
            }
            None
        }
        DoubleBooking | RoomUnavailable | Holiday | BlockedDay | NotMeetingTime => {
            for &s in &order {
                if !below_normal(&sched, s) {
                    continue;
                }
                let slots = candidate_slots(inst, &sched, s, |elig, hol, blk, avail, clash| match kind {
                    DoubleBooking => elig && !hol && !blk && avail && clash,
                    RoomUnavailable => elig && !hol && !blk && !avail && !clash,
                    Holiday => elig && hol && !blk && avail && !clash,
                    BlockedDay => elig && !hol && blk && avail && !clash,
                    _ => !elig && !hol && !blk && avail && !clash,
                });
                if add_slot(&mut sched, s, slots, rng) {
                    return Some((inst.clone(), sched));
                }
            }
            None
        }
        ExcessMeetings => {
            for &s in &order {
                let normal = inst.sections[s].total_meetings();
                while count(&sched, s) <= normal {
                    let slots = candidate_slots(inst, &sched, s, clean);
                    if !add_slot(&mut sched, s, slots, rng) {
                        break;
                    }
                }
                if count(&sched, s) > normal {
                    return Some((inst.clone(), sched));
                }
                sched = base.clone();
            }
            None
        }
        MinFraction => {
            // Enforce the floor with every quota at the current count, then
            // drop one meeting of one section.
            if (0..n_s).any(|s| count(&sched, s) == 0) {
                return None;
            }
            let mut enforced = inst.clone();
            enforced.weights.enforce_min_fraction = true;
            for s in 0..n_s {
                let sec = &mut enforced.sections[s];
                sec.min_fraction = count(&sched, s) as f64 / sec.total_meetings() as f64;
            }
            let s = order[0];
            let victim = *sched.sections[s].meetings.iter().copied().collect::<Vec<_>>().choose(rng)?;
            sched.sections[s].meetings.remove(&victim);
            Some((enforced, sched))
        }
    }
}

#[derive(Debug, Default)]
pub struct MutationStats {
    pub per_kind: BTreeMap<ViolationKind, usize>,
    pub failures: Vec<String>,
    pub bases: usize,
}

impl MutationStats {
    pub fn total(&self) -> usize {
        self.per_kind.values().sum()
    }
}

/// Runs mutations round-robin over every violation kind until `total` have
/// been checked; each must report exactly its own kind.
pub fn run_mutations(total: usize, seed: u64) -> MutationStats {
    let mut stats = MutationStats::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut instance_seed = seed;
    while stats.total() < total {
        let inst = mutation_instance(instance_seed);
        instance_seed += 1;
        let thin = [0.0, 0.3][stats.bases % 2];
        let base = base_schedule(&inst, &mut rng, thin);
        stats.bases += 1;
        let base_violations = check_feasibility(&inst, &base);
        if !base_violations.is_empty() {
            stats
                .failures
                .push(format!("base schedule {instance_seed} infeasible: {}", base_violations[0]));
            continue;
        }
        for kind in ViolationKind::ALL {
            for _ in 0..2 {
                let Some((mutated_inst, mutated)) = mutate(&inst, &base, kind, &mut rng) else { break };
                let found: BTreeSet<ViolationKind> = check_feasibility(&mutated_inst, &mutated).iter().map(|v| v.kind).collect();
                if found != BTreeSet::from([kind]) {
                    stats.failures.push(format!("{kind:?} mutation on instance {instance_seed} reported {found:?}"));
                }
                *stats.per_kind.entry(kind).or_default() += 1;
            }
        }
    }
    stats
}
