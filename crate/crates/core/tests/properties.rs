mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hpucsp::anneal::{build_waves, run_office, AnnealConfig};
use hpucsp::doc::{instance_to_json, load_instance};
use hpucsp::engine::{run_engine, EngineState, Meeting};
use hpucsp::evaluate::{check_feasibility, evaluate_unchecked, timing_metrics, MeetingSlot, Schedule, SectionPlan};
use hpucsp::gen::random_tiny;
use hpucsp::model::{Instance, Scenario};
use hpucsp::oracle::literal_objective;
use hpucsp::pra::{enumerate_pras, PraTable};

/// Random rooms (a PRA when one exists) and a random subset of the eligible
/// meeting slots for every section. Not necessarily feasible.
fn random_schedule(inst: &Instance, rng: &mut ChaCha8Rng) -> Schedule {
    let mut schedule = Schedule::empty(inst.sections.len());
    for (s, sec) in inst.sections.iter().enumerate() {
        if rng.gen_bool(0.15) {
            continue;
        }
        let pras = enumerate_pras(inst, s, Scenario::NR);
        let rooms = match pras.choose(rng) {
            Some(p) => p.rooms.clone(),
            None => vec![rng.gen_range(0..inst.rooms.len())],
        };
        let mut meetings = BTreeSet::new();
        for w in 0..inst.calendar.weeks {
            for &m in &sec.meeting_times {
                if rng.gen_bool(0.4) {
                    meetings.insert(MeetingSlot::new(m, w));
                }
            }
        }
        schedule.sections[s] = SectionPlan { rooms, meetings };
    }
    schedule
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// The same instance with rooms and sections relabeled, and the schedule
/// carried along.
fn relabel(inst: &Instance, schedule: &Schedule, rng: &mut ChaCha8Rng) -> (Instance, Schedule) {
    let mut room_perm: Vec<usize> = (0..inst.rooms.len()).collect();
    room_perm.shuffle(rng);
    let mut sec_perm: Vec<usize> = (0..inst.sections.len()).collect();
    sec_perm.shuffle(rng);
    // new index of old room r is room_perm[r]
    let mut rooms = inst.rooms.clone();
    for (old, room) in inst.rooms.iter().enumerate() {
        let mut r = room.clone();
        r.adjacent = room.adjacent.iter().map(|&q| room_perm[q]).collect();
        r.incompatible = room.incompatible.iter().map(|&s| sec_perm[s]).collect();
        rooms[room_perm[old]] = r;
    }
    let mut sections = inst.sections.clone();
    for (old, sec) in inst.sections.iter().enumerate() {
        let mut s = sec.clone();
        s.init_room = sec.init_room.map(|r| room_perm[r]);
        sections[sec_perm[old]] = s;
    }
    let out = Instance::new(
        inst.calendar.clone(),
        inst.meeting_times.clone(),
        inst.buildings.clone(),
        rooms,
        inst.organizations.clone(),
        sections,
        inst.weights.clone(),
    )
    .unwrap();
    let mut sched = Schedule::empty(inst.sections.len());
    for (old, plan) in schedule.sections.iter().enumerate() {
        sched.sections[sec_perm[old]] = SectionPlan {
            rooms: plan.rooms.iter().map(|&r| room_perm[r]).collect(),
            meetings: plan.meetings.clone(),
        };
    }
    (out, sched)
}

/// Most meetings any schedule could hold with fixed room sets, by
/// exhaustive search over per-section slot subsets.
fn max_placeable(inst: &Instance, rooms: &[Vec<usize>]) -> u32 {
    let cal = &inst.calendar;
    let cands: Vec<Vec<MeetingSlot>> = (0..inst.sections.len())
        .map(|s| {
            let mut v = Vec::new();
            for w in 0..cal.weeks {
                for &m in &inst.sections[s].meeting_times {
                    let day = inst.meeting_times[m].day(cal, w);
                    if inst.day_open(s, m, w) && rooms[s].iter().all(|&r| !inst.rooms[r].unavailable[day]) {
                        v.push(MeetingSlot::new(m, w));
                    }
                }
            }
            v
        })
        .collect();
    let limits: Vec<u32> = inst.sections.iter().map(|s| s.total_meetings()).collect();

    struct Search<'a> {
        inst: &'a Instance,
        rooms: &'a [Vec<usize>],
        cands: &'a [Vec<MeetingSlot>],
        limits: &'a [u32],
        taken: Vec<(usize, MeetingSlot)>,
        best: u32,
    }
    impl Search<'_> {
        fn conflicts(&self, s: usize, slot: MeetingSlot) -> bool {
            let mt = &self.inst.meeting_times[slot.time];
            self.taken.iter().any(|&(o, other)| {
                other.week == slot.week
                    && self.inst.meeting_times[other.time].overlaps(mt)
                    && self.rooms[o].iter().any(|r| self.rooms[s].contains(r))
            })
        }
        fn bound(&self, s: usize) -> u32 {
            (s..self.cands.len()).map(|k| self.limits[k].min(self.cands[k].len() as u32)).sum()
        }
        fn section(&mut self, s: usize, placed: u32) {
            if s == self.cands.len() {
                self.best = self.best.max(placed);
                return;
            }
            if placed + self.bound(s) <= self.best {
                return;
            }
            self.slot(s, 0, 0, placed);
        }
        fn slot(&mut self, s: usize, i: usize, used: u32, placed: u32) {
            if i == self.cands[s].len() || used == self.limits[s] {
                self.section(s + 1, placed);
                return;
            }
            let slot = self.cands[s][i];
            if !self.conflicts(s, slot) {
                self.taken.push((s, slot));
                self.slot(s, i + 1, used + 1, placed + 1);
                self.taken.pop();
            }
            self.slot(s, i + 1, used, placed);
        }
    }
    let mut search = Search {
        inst,
        rooms,
        cands: &cands,
        limits: &limits,
        taken: Vec::new(),
        best: 0,
    };
    search.section(0, 0);
    search.best
}

fn all_meetings(inst: &Instance) -> Vec<Meeting> {
    let mut out = Vec::new();
    for (s, sec) in inst.sections.iter().enumerate() {
        for (w, &n) in sec.weekly_count.iter().enumerate() {
            for _ in 0..n {
                out.push(Meeting {
                    section: s,
                    default_week: w,
                    wave: 1,
                });
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn instance_documents_round_trip(seed in 0u64..100_000) {
        let inst = random_tiny(seed);
        let back = load_instance(&instance_to_json(&inst)).unwrap();
        prop_assert_eq!(back, inst);
    }

    #[test]
    fn calendar_and_cumulative_invariants(seed in 0u64..100_000) {
        let inst = random_tiny(seed);
        let cal = &inst.calendar;
        for mt in &inst.meeting_times {
            prop_assert_eq!(mt.weekly_slots(cal).len(), mt.duration_slots);
            for w in 0..cal.weeks {
                prop_assert_eq!(cal.week_of_day(mt.day(cal, w)), w);
            }
        }
        for (s, sec) in inst.sections.iter().enumerate() {
            let cn = sec.cumulative();
            prop_assert_eq!(cn[0], sec.weekly_count[0]);
            for w in 1..cn.len() {
                prop_assert_eq!(cn[w] - cn[w - 1], sec.weekly_count[w]);
            }
            for w in 0..cal.weeks {
                prop_assert!(sec.weekly_count[w] as usize <= inst.open_times_in_week(s, w));
            }
        }
    }

    #[test]
    fn evaluator_matches_literal_recomputation(seed in 0u64..100_000) {
        let inst = random_tiny(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let schedule = random_schedule(&inst, &mut rng);
        let fast = evaluate_unchecked(&inst, &schedule, &inst.weights);
        let slow = literal_objective(&inst, &schedule, &inst.weights);
        for k in 0..7 {
            prop_assert!(close(fast.components[k], slow.components[k]), "component {}: {} vs {}", k + 1, fast.components[k], slow.components[k]);
        }
        prop_assert!(close(fast.total, slow.total));
    }

    #[test]
    fn adding_a_meeting_never_raises_online_penalty(seed in 0u64..100_000) {
        let inst = random_tiny(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 7);
        let mut schedule = random_schedule(&inst, &mut rng);
        let s = rng.gen_range(0..inst.sections.len());
        let sec = &inst.sections[s];
        let free: Vec<MeetingSlot> = (0..inst.calendar.weeks)
            .flat_map(|w| sec.meeting_times.iter().map(move |&m| MeetingSlot::new(m, w)))
            .filter(|slot| !schedule.sections[s].meetings.contains(slot))
            .collect();
        prop_assume!(!free.is_empty() && !schedule.sections[s].rooms.is_empty());
        let before = evaluate_unchecked(&inst, &schedule, &inst.weights);
        let t_before = timing_metrics(sec, &schedule.sections[s].meetings);
        schedule.sections[s].meetings.insert(*free.choose(&mut rng).unwrap());
        let after = evaluate_unchecked(&inst, &schedule, &inst.weights);
        let t_after = timing_metrics(sec, &schedule.sections[s].meetings);
        prop_assert!(after.components[4] <= before.components[4]);
        prop_assert!(t_after.in_person >= t_before.in_person);

        schedule.sections[s].meetings.clear();
        let t_none = timing_metrics(sec, &schedule.sections[s].meetings);
        prop_assert!(!t_none.fairness_met);
        prop_assert_eq!(t_none.timing_penalty, 0.0);
    }

    #[test]
    fn relabeling_preserves_the_objective(seed in 0u64..100_000) {
        let inst = random_tiny(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 11);
        let schedule = random_schedule(&inst, &mut rng);
        let (inst2, schedule2) = relabel(&inst, &schedule, &mut rng);
        let a = evaluate_unchecked(&inst, &schedule, &inst.weights);
        let b = evaluate_unchecked(&inst2, &schedule2, &inst2.weights);
        prop_assert!(close(a.total, b.total), "{} vs {}", a.total, b.total);
        let kinds = |i: &Instance, sc: &Schedule| check_feasibility(i, sc).iter().map(|v| v.kind).collect::<BTreeSet<_>>();
        prop_assert_eq!(kinds(&inst, &schedule), kinds(&inst2, &schedule2));
    }

    #[test]
    fn on_the_line_means_no_timing_penalty(lead in 0usize..5, span in 1usize..10, per_week in 1u32..4) {
        // Constant weekly counts over the active weeks sit exactly on the
        // prorated line.
        let weeks = lead + span;
        let cnp: Vec<u32> = (0..weeks).map(|w| if w < lead { 0 } else { per_week * (w - lead + 1) as u32 }).collect();
        prop_assert_eq!(hpucsp::evaluate::timing_penalty(&cnp, lead, weeks - 1), 0.0);
        prop_assert_eq!(hpucsp::evaluate::timing_penalty(&vec![0; weeks], lead, weeks - 1), 0.0);
    }

    #[test]
    fn scaling_all_weights_keeps_the_order(seed in 0u64..100_000, exp in -8i32..8, factor in 0.01f64..100.0) {
        let inst = random_tiny(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 13);
        let a = random_schedule(&inst, &mut rng);
        let b = random_schedule(&inst, &mut rng);
        let ta = evaluate_unchecked(&inst, &a, &inst.weights).total;
        let tb = evaluate_unchecked(&inst, &b, &inst.weights).total;
        // Powers of two scale exactly.
        let w2 = inst.weights.scaled(2f64.powi(exp));
        let (sa, sb) = (evaluate_unchecked(&inst, &a, &w2).total, evaluate_unchecked(&inst, &b, &w2).total);
        prop_assert_eq!(ta.partial_cmp(&tb), sa.partial_cmp(&sb));
        if !close(ta, tb) {
            let w = inst.weights.scaled(factor);
            let (fa, fb) = (evaluate_unchecked(&inst, &a, &w).total, evaluate_unchecked(&inst, &b, &w).total);
            prop_assert_eq!(ta < tb, fa < fb);
        }
    }

    #[test]
    fn engine_keeps_existing_meetings_and_stays_feasible(seed in 0u64..100_000) {
        let inst = random_tiny(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 17);
        let mut state = EngineState::new(&inst);
        for s in 0..inst.sections.len() {
            let pras = enumerate_pras(&inst, s, Scenario::NR);
            state.set_rooms(s, pras.choose(&mut rng).unwrap().rooms.clone());
        }
        let mut meetings = all_meetings(&inst);
        meetings.shuffle(&mut rng);
        let later = meetings.split_off(meetings.len() / 2);
        run_engine(&inst, &mut state, meetings, &mut rng);
        let before = state.schedule.clone();
        prop_assert!(check_feasibility(&inst, &before).is_empty());
        run_engine(&inst, &mut state, later, &mut rng);
        for (old, new) in before.sections.iter().zip(&state.schedule.sections) {
            prop_assert!(old.meetings.is_subset(&new.meetings));
            prop_assert_eq!(&old.rooms, &new.rooms);
        }
        prop_assert!(check_feasibility(&inst, &state.schedule).is_empty());
    }

    #[test]
    fn engine_never_beats_the_placement_bound(seed in 0u64..100_000) {
        let inst = random_tiny(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 19);
        let mut state = EngineState::new(&inst);
        let mut rooms = Vec::new();
        for s in 0..inst.sections.len() {
            let pras = enumerate_pras(&inst, s, Scenario::NR);
            let pick = pras.choose(&mut rng).unwrap().rooms.clone();
            state.set_rooms(s, pick.clone());
            rooms.push(pick);
        }
        run_engine(&inst, &mut state, all_meetings(&inst), &mut rng);
        let placed = state.schedule.meeting_count() as u32;
        prop_assert!(placed <= max_placeable(&inst, &rooms));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn annealing_reports_a_consistent_best(seed in 0u64..100_000) {
        let inst = random_tiny(seed);
        let pras = PraTable::build(&inst).unwrap();
        let mut config = AnnealConfig::pandemic();
        config.max_iterations = Some(3_000);
        let plan = build_waves(&inst, &config.waves).unwrap();
        let run = run_office(&inst, &pras, &plan, &config, seed);
        prop_assert!(check_feasibility(&inst, &run.schedule).is_empty());
        let fresh = evaluate_unchecked(&inst, &run.schedule, &inst.weights);
        prop_assert!(close(fresh.total, run.breakdown.total));
        prop_assert!(run.trace.windows(2).all(|w| w[1] <= w[0]));
    }
}
