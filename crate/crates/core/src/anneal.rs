//! OFFICE: wave-by-wave construction with simulated-annealing improvement.
//!
//! Every section's normal meetings form a master list; a fairness quota of
//! them is spread over early waves and the rest go to the last wave. Each
//! wave is seeded by the engine with best-ranked PRAs, then improved by
//! neighbor moves that clear a few sections, redraw their PRAs and
//! reschedule. A section's mass-meeting count never drops below its count
//! at the end of the previous wave.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{run_engine_tagged, EngineState, Meeting};
use crate::evaluate::{
    evaluate_unchecked, section_components, sum_components, timing_metrics, ObjectiveBreakdown, Schedule,
};
use crate::model::{Instance, Weights};
use crate::pra::PraTable;

#[derive(Debug, Error)]
pub enum AnnealError {
    #[error("invalid annealing configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WavePolicy {
    /// Five waves: exam blocks, irregular sections, large and small regular
    /// sections (split at `enrollment_threshold`), then the remainder.
    Tiered { enrollment_threshold: u32 },
    /// Quota meetings in wave 1, the remainder in wave `waves`.
    Flat { waves: usize },
}

impl WavePolicy {
    pub fn wave_count(&self) -> usize {
        match self {
            WavePolicy::Tiered { .. } => 5,
            WavePolicy::Flat { waves } => *waves,
        }
    }
}

/// Weight overrides applied while scheduling waves before the last.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EarlyWaveWeights {
    pub alpha5: f64,
    pub exp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnealConfig {
    pub start_temperature: f64,
    pub temperature_factor: f64,
    /// Temperature to restart from when a given (1-based) wave begins.
    #[serde(default)]
    pub temperature_resets: BTreeMap<usize, f64>,
    pub time_limit_secs: f64,
    #[serde(default)]
    pub max_iterations: Option<u64>,
    /// Neighbor evaluations without a new best after which an unfinished
    /// early wave is abandoned, or the last wave ends the run.
    #[serde(default)]
    pub stall_iterations: Option<u64>,
    pub removal_low: usize,
    pub removal_high: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_runs")]
    pub runs: usize,
    pub waves: WavePolicy,
    #[serde(default)]
    pub early_wave_weights: Option<EarlyWaveWeights>,
}

fn default_runs() -> usize {
    1
}

impl AnnealConfig {
    pub fn pandemic() -> Self {
        AnnealConfig {
            start_temperature: 200.0,
            temperature_factor: 0.999999,
            temperature_resets: BTreeMap::new(),
            time_limit_secs: 3600.0,
            max_iterations: None,
            stall_iterations: None,
            removal_low: 1,
            removal_high: 10,
            seed: 0,
            runs: 1,
            waves: WavePolicy::Tiered {
                enrollment_threshold: 80,
            },
            early_wave_weights: Some(EarlyWaveWeights {
                alpha5: 40_000.0,
                exp: 3.0,
            }),
        }
    }

    pub fn normal_assignment() -> Self {
        AnnealConfig {
            start_temperature: 2e7,
            temperature_factor: 0.99999,
            temperature_resets: BTreeMap::from([(5, 200.0)]),
            ..AnnealConfig::pandemic()
        }
    }

    pub fn validate(&self) -> Result<(), AnnealError> {
        let err = |m: &str| Err(AnnealError::Config(m.to_string()));
        if !(self.temperature_factor > 0.0 && self.temperature_factor < 1.0) {
            return err("temperature_factor must lie in (0, 1)");
        }
        if !(self.start_temperature >= 0.0) || self.temperature_resets.values().any(|t| !(*t >= 0.0)) {
            return err("temperatures must be non-negative");
        }
        if self.removal_low == 0 || self.removal_low > self.removal_high {
            return err("removal range must satisfy 1 <= low <= high");
        }
        if !(self.time_limit_secs > 0.0) {
            return err("time limit must be positive");
        }
        if self.runs == 0 {
            return err("runs must be at least 1");
        }
        if self.waves.wave_count() < 2 {
            return err("at least two waves are required");
        }
        if let Some(e) = self.early_wave_weights {
            if !(e.alpha5 >= 0.0 && e.exp >= 1.0) {
                return err("early-wave alpha5 must be non-negative and exp at least 1");
            }
        }
        Ok(())
    }
}

/// The master list of meetings, tagged with default week and wave.
#[derive(Debug, Clone, PartialEq)]
pub struct WavePlan {
    pub waves: usize,
    pub meetings: Vec<Meeting>,
    /// Early-wave quota per section.
    pub quota: Vec<u32>,
    section_meetings: Vec<Vec<usize>>,
    wave_meetings: Vec<Vec<usize>>,
    wave_sections: Vec<Vec<usize>>,
    /// Sections with a meeting in waves `1..=v`.
    active_sections: Vec<Vec<usize>>,
}

impl WavePlan {
    /// Ids of wave `v` meetings (1-based wave).
    pub fn wave(&self, v: usize) -> &[usize] {
        &self.wave_meetings[v - 1]
    }

    pub fn sections_in_wave(&self, v: usize) -> &[usize] {
        &self.wave_sections[v - 1]
    }

    /// Sections a wave-`v` neighbor may move: those with any meeting in
    /// waves up to `v`.
    pub fn movable_in_wave(&self, v: usize) -> &[usize] {
        &self.active_sections[v - 1]
    }

    pub fn of_section(&self, s: usize) -> &[usize] {
        &self.section_meetings[s]
    }
}

/// Indices (into a section's chronological meeting list) of the `quota`
/// meetings that go to early waves, evenly spaced.
pub fn quota_indices(total: u32, quota: u32) -> Vec<u32> {
    let (n, q) = (total as u64, quota.min(total) as u64);
    (0..q).map(|j| ((2 * j * n + n - q) / (2 * q)) as u32).collect()
}

pub fn build_waves(instance: &Instance, policy: &WavePolicy) -> Result<WavePlan, AnnealError> {
    let v_count = policy.wave_count();
    if v_count < 2 {
        return Err(AnnealError::Config("at least two waves are required".into()));
    }
    let mut meetings = Vec::new();
    let mut section_meetings = vec![Vec::new(); instance.sections.len()];
    let mut wave_meetings = vec![Vec::new(); v_count];
    let mut quota = Vec::with_capacity(instance.sections.len());
    for (s, sec) in instance.sections.iter().enumerate() {
        let q = sec.quota().min(sec.total_meetings());
        quota.push(q);
        let early_wave = match policy {
            WavePolicy::Tiered { enrollment_threshold } => {
                if sec.exam_block {
                    1
                } else if sec.is_irregular() {
                    2
                } else if sec.enrollment >= *enrollment_threshold {
                    3
                } else {
                    4
                }
            }
            WavePolicy::Flat { .. } => 1,
        };
        let picks = quota_indices(sec.total_meetings(), q);
        let mut j = 0u32;
        for (week, &n) in sec.weekly_count.iter().enumerate() {
            for _ in 0..n {
                let wave = if picks.binary_search(&j).is_ok() { early_wave } else { v_count };
                let id = meetings.len();
                meetings.push(Meeting {
                    section: s,
                    default_week: week,
                    wave,
                });
                section_meetings[s].push(id);
                wave_meetings[wave - 1].push(id);
                j += 1;
            }
        }
    }
    let wave_sections: Vec<Vec<usize>> = wave_meetings
        .iter()
        .map(|ids| {
            let mut ss: Vec<usize> = ids.iter().map(|&id| meetings[id].section).collect();
            ss.dedup();
            ss.sort_unstable();
            ss.dedup();
            ss
        })
        .collect();
    let mut active_sections = Vec::with_capacity(v_count);
    let mut acc: Vec<usize> = Vec::new();
    for ss in &wave_sections {
        acc.extend(ss);
        acc.sort_unstable();
        acc.dedup();
        active_sections.push(acc.clone());
    }
    Ok(WavePlan {
        waves: v_count,
        meetings,
        quota,
        section_meetings,
        wave_meetings,
        wave_sections,
        active_sections,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    TimeLimit,
    MaxIterations,
    Stalled,
    /// The last wave has no meetings, so there is nothing left to move.
    NothingToMove,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LogEvent {
    WaveStart {
        wave: usize,
        iteration: u64,
        elapsed_secs: f64,
        placed: usize,
        unplaced_in_wave: usize,
        current: f64,
        best: f64,
    },
    /// An early wave stalled with meetings left over; the run moves on.
    WaveAbandoned {
        wave: usize,
        iteration: u64,
        elapsed_secs: f64,
        unplaced_in_wave: usize,
    },
    NewBest {
        wave: usize,
        iteration: u64,
        elapsed_secs: f64,
        best: f64,
    },
    Finish {
        iterations: u64,
        accepted: u64,
        rejected_checkpoint: u64,
        acceptance_rate: f64,
        waves_completed: usize,
        best: f64,
        elapsed_secs: f64,
        stop: StopReason,
    },
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub seed: u64,
    pub schedule: Schedule,
    /// Breakdown of `schedule` under the instance weights.
    pub breakdown: ObjectiveBreakdown,
    pub log: Vec<LogEvent>,
    pub iterations: u64,
    pub accepted: u64,
    /// Waves fully placed, counting only waves before the last.
    pub waves_completed: usize,
    pub stop: StopReason,
    /// Best objective after each improvement (nonincreasing).
    pub trace: Vec<f64>,
}

impl RunResult {
    pub fn log_jsonl(&self) -> String {
        let mut out = String::new();
        for event in &self.log {
            out.push_str(&serde_json::to_string(event).expect("log events serialize"));
            out.push('\n');
        }
        out
    }
}

enum Move {
    Accepted,
    Rejected,
    /// Some section would fall below its checkpoint.
    Discarded,
}

struct Office<'a> {
    instance: &'a Instance,
    pras: &'a PraTable,
    plan: &'a WavePlan,
    config: &'a AnnealConfig,
    wave_weights: Weights,
    state: EngineState,
    pra_idx: Vec<Option<usize>>,
    placed: Vec<bool>,
    checkpoint: Vec<u32>,
    contrib_wave: Vec<[f64; 7]>,
    contrib_final: Vec<[f64; 7]>,
    current: f64,
    rng: ChaCha8Rng,
}

impl<'a> Office<'a> {
    fn count(&self, s: usize) -> u32 {
        self.state.schedule.sections[s].meetings.len() as u32
    }

    fn contributions(&self, s: usize) -> ([f64; 7], [f64; 7]) {
        let spatial = self.pra_idx[s].map(|i| &self.pras.lists[s][i].metrics);
        let timing = timing_metrics(&self.instance.sections[s], &self.state.schedule.sections[s].meetings);
        (
            section_components(self.instance, s, spatial, &timing, &self.wave_weights),
            section_components(self.instance, s, spatial, &timing, &self.instance.weights),
        )
    }

    fn refresh(&mut self, sections: impl IntoIterator<Item = usize>) {
        for s in sections {
            let (w, f) = self.contributions(s);
            self.contrib_wave[s] = w;
            self.contrib_final[s] = f;
        }
        self.current = sum_components(&self.contrib_wave).1;
    }

    fn final_total(&self) -> f64 {
        sum_components(&self.contrib_final).1
    }

    fn set_wave_weights(&mut self, v: usize) {
        self.wave_weights = self.instance.weights.clone();
        if v < self.plan.waves {
            if let Some(e) = self.config.early_wave_weights {
                self.wave_weights.alpha[4] = e.alpha5;
                self.wave_weights.exp = e.exp;
            }
        }
        self.refresh(0..self.instance.sections.len());
    }

    fn unplaced_in_wave(&self, v: usize) -> Vec<Meeting> {
        self.plan
            .wave(v)
            .iter()
            .filter(|&&id| !self.placed[id])
            .map(|&id| self.plan.meetings[id])
            .collect()
    }

    /// Runs the engine on `ids` and flags the ones that were placed.
    fn place(&mut self, ids: Vec<usize>, flips: &mut Vec<usize>) {
        self.place_masked(ids, flips, |_, _| true);
    }

    fn place_masked(&mut self, ids: Vec<usize>, flips: &mut Vec<usize>, open: impl Fn(usize, usize) -> bool) {
        if ids.is_empty() {
            return;
        }
        let tagged: Vec<(Meeting, usize)> = ids.iter().map(|&id| (self.plan.meetings[id], id)).collect();
        let unplaced = run_engine_tagged(self.instance, &mut self.state, tagged, &mut self.rng, open);
        let mut left = vec![false; self.placed.len()];
        for &(_, id) in &unplaced {
            left[id] = true;
        }
        for id in ids {
            if !left[id] {
                self.placed[id] = true;
                flips.push(id);
            }
        }
    }

    fn start_wave(&mut self, v: usize) {
        for &s in self.plan.sections_in_wave(v) {
            if self.pra_idx[s].is_none() {
                self.pra_idx[s] = Some(0);
                self.state.set_rooms(s, self.pras.lists[s][0].rooms.clone());
            }
        }
        // Leftovers of an abandoned earlier wave get another chance first.
        let mut flips = Vec::new();
        let leftovers: Vec<usize> = (1..v)
            .flat_map(|u| self.plan.wave(u).iter().copied())
            .filter(|&id| !self.placed[id])
            .collect();
        self.place(leftovers, &mut flips);
        let ids: Vec<usize> = self.plan.wave(v).iter().copied().filter(|&id| !self.placed[id]).collect();
        self.place(ids, &mut flips);
        let mut touched: Vec<usize> = flips.iter().map(|&id| self.plan.meetings[id].section).collect();
        touched.extend(self.plan.sections_in_wave(v));
        touched.sort_unstable();
        touched.dedup();
        self.refresh(touched);
    }

    fn wave_complete(&self, v: usize) -> bool {
        self.plan.wave(v).iter().all(|&id| self.placed[id])
    }

    fn neighbor(&mut self, v: usize, temperature: f64) -> Move {
        let candidates = self.plan.movable_in_wave(v);
        let k = self
            .rng
            .gen_range(self.config.removal_low..=self.config.removal_high)
            .min(candidates.len());
        let chosen: Vec<usize> = candidates.choose_multiple(&mut self.rng, k).copied().collect();

        self.state.begin();
        let mut flips = Vec::new();
        let mut old_pra = Vec::with_capacity(chosen.len());
        let mut earlier = Vec::new();
        let weeks = self.instance.calendar.weeks;
        // (room, week) pairs released by clearing the chosen sections.
        let mut freed = vec![false; self.instance.rooms.len() * weeks];
        let mut any_freed = false;
        for &s in &chosen {
            for slot in self.state.clear_section(self.instance, s) {
                any_freed = true;
                for &r in &self.state.schedule.sections[s].rooms {
                    freed[r * weeks + slot.week] = true;
                }
            }
            for &id in self.plan.of_section(s) {
                if self.placed[id] {
                    self.placed[id] = false;
                    flips.push(id);
                }
                if self.plan.meetings[id].wave < v {
                    earlier.push(id);
                }
            }
            let list = &self.pras.lists[s];
            let pick = self.rng.gen_range(0..list.len());
            old_pra.push((s, self.pra_idx[s]));
            self.pra_idx[s] = Some(pick);
            self.state.set_rooms(s, list[pick].rooms.clone());
        }
        self.place(earlier, &mut flips);
        // An unplaced meeting fitted nowhere when the engine last ran, and
        // occupancy has only grown since except where rooms were just
        // released. Other sections can only gain in those (room, week) pairs.
        let mut moved = vec![false; self.instance.sections.len()];
        for &s in &chosen {
            moved[s] = true;
        }
        let sections = &self.state.schedule.sections;
        let open_week = |s: usize, w: usize| moved[s] || sections[s].rooms.iter().any(|&r| freed[r * weeks + w]);
        // Per section: 0 not yet looked at, 1 some week open, 2 none open.
        let mut status = vec![0u8; self.instance.sections.len()];
        let mut mask = vec![false; self.instance.sections.len() * weeks];
        let mut pending = Vec::new();
        for &id in self.plan.wave(v) {
            if self.placed[id] {
                continue;
            }
            let s = self.plan.meetings[id].section;
            if status[s] == 0 {
                status[s] = 2;
                if moved[s] || any_freed {
                    for w in 0..weeks {
                        mask[s * weeks + w] = open_week(s, w);
                    }
                    if mask[s * weeks..(s + 1) * weeks].iter().any(|&o| o) {
                        status[s] = 1;
                    }
                }
            }
            if moved[s] || status[s] == 1 {
                pending.push(id);
            }
        }
        self.place_masked(pending, &mut flips, |s, w| mask[s * weeks + w]);

        let mut touched: Vec<usize> = flips.iter().map(|&id| self.plan.meetings[id].section).collect();
        touched.extend(chosen.iter().copied());
        touched.sort_unstable();
        touched.dedup();

        let below_checkpoint = touched.iter().any(|&s| self.count(s) < self.checkpoint[s]);
        let saved: Vec<(usize, [f64; 7], [f64; 7])> = touched
            .iter()
            .map(|&s| (s, self.contrib_wave[s], self.contrib_final[s]))
            .collect();
        let before = self.current;
        let outcome = if below_checkpoint {
            Move::Discarded
        } else {
            self.refresh(touched.iter().copied());
            let delta = self.current - before;
            let accept = delta <= 0.0 || (temperature > 0.0 && self.rng.gen::<f64>() < (-delta / temperature).exp());
            if accept {
                Move::Accepted
            } else {
                Move::Rejected
            }
        };
        match outcome {
            Move::Accepted => self.state.commit(),
            _ => {
                self.state.rollback(self.instance);
                for &id in flips.iter().rev() {
                    self.placed[id] = !self.placed[id];
                }
                for (s, p) in old_pra.into_iter().rev() {
                    self.pra_idx[s] = p;
                }
                for (s, w, f) in saved {
                    self.contrib_wave[s] = w;
                    self.contrib_final[s] = f;
                }
                self.current = before;
            }
        }
        outcome
    }
}

/// One OFFICE run with its own RNG stream.
pub fn run_office(instance: &Instance, pras: &PraTable, plan: &WavePlan, config: &AnnealConfig, seed: u64) -> RunResult {
    let start = Instant::now();
    let n = instance.sections.len();
    let mut office = Office {
        instance,
        pras,
        plan,
        config,
        wave_weights: instance.weights.clone(),
        state: EngineState::new(instance),
        pra_idx: vec![None; n],
        placed: vec![false; plan.meetings.len()],
        checkpoint: vec![0; n],
        contrib_wave: vec![[0.0; 7]; n],
        contrib_final: vec![[0.0; 7]; n],
        current: 0.0,
        rng: ChaCha8Rng::seed_from_u64(seed),
    };

    let mut log = Vec::new();
    let mut trace = Vec::new();
    let mut temperature = config.start_temperature;
    let mut iteration = 0u64;
    let mut accepted = 0u64;
    let mut discarded = 0u64;
    let mut since_best: u64;
    let mut waves_completed = 0;
    let mut best_total = f64::INFINITY;
    let mut best_schedule = office.state.schedule.clone();
    let mut stop = StopReason::NothingToMove;

    let mut note_best = |office: &Office, wave: usize, iteration: u64, log: &mut Vec<LogEvent>, best_total: &mut f64| {
        let total = office.final_total();
        if total < *best_total {
            *best_total = total;
            best_schedule = office.state.schedule.clone();
            trace.push(total);
            log.push(LogEvent::NewBest {
                wave,
                iteration,
                elapsed_secs: start.elapsed().as_secs_f64(),
                best: total,
            });
            true
        } else {
            false
        }
    };

    'waves: for v in 1..=plan.waves {
        if let Some(&t) = config.temperature_resets.get(&v) {
            temperature = t;
        }
        office.set_wave_weights(v);
        office.start_wave(v);
        note_best(&office, v, iteration, &mut log, &mut best_total);
        since_best = 0;
        log.push(LogEvent::WaveStart {
            wave: v,
            iteration,
            elapsed_secs: start.elapsed().as_secs_f64(),
            placed: office.placed.iter().filter(|&&p| p).count(),
            unplaced_in_wave: office.unplaced_in_wave(v).len(),
            current: office.current,
            best: best_total,
        });
        loop {
            if v < plan.waves && office.wave_complete(v) {
                waves_completed = v;
                break;
            }
            if plan.movable_in_wave(v).is_empty() {
                stop = StopReason::NothingToMove;
                break 'waves;
            }
            if start.elapsed().as_secs_f64() >= config.time_limit_secs {
                stop = StopReason::TimeLimit;
                break 'waves;
            }
            if config.max_iterations.is_some_and(|m| iteration >= m) {
                stop = StopReason::MaxIterations;
                break 'waves;
            }
            if config.stall_iterations.is_some_and(|m| since_best >= m) {
                if v < plan.waves {
                    log.push(LogEvent::WaveAbandoned {
                        wave: v,
                        iteration,
                        elapsed_secs: start.elapsed().as_secs_f64(),
                        unplaced_in_wave: office.unplaced_in_wave(v).len(),
                    });
                    break;
                }
                stop = StopReason::Stalled;
                break 'waves;
            }
            let outcome = office.neighbor(v, temperature);
            temperature *= config.temperature_factor;
            iteration += 1;
            since_best += 1;
            match outcome {
                Move::Accepted => {
                    accepted += 1;
                    if note_best(&office, v, iteration, &mut log, &mut best_total) {
                        since_best = 0;
                    }
                }
                Move::Discarded => discarded += 1,
                Move::Rejected => {}
            }
            #[cfg(debug_assertions)]
            if iteration.is_multiple_of(256) {
                let full = evaluate_unchecked(instance, &office.state.schedule, &office.wave_weights);
                debug_assert_eq!(full.total.to_bits(), office.current.to_bits(), "incremental objective drifted");
                debug_assert!(office
                    .checkpoint
                    .iter()
                    .enumerate()
                    .all(|(s, &c)| office.count(s) >= c));
            }
        }
        office.checkpoint = (0..n).map(|s| office.count(s)).collect();
    }

    let breakdown = evaluate_unchecked(instance, &best_schedule, &instance.weights);
    log.push(LogEvent::Finish {
        iterations: iteration,
        accepted,
        rejected_checkpoint: discarded,
        acceptance_rate: if iteration == 0 { 0.0 } else { accepted as f64 / iteration as f64 },
        waves_completed,
        best: breakdown.total,
        elapsed_secs: start.elapsed().as_secs_f64(),
        stop,
    });
    RunResult {
        seed,
        schedule: best_schedule,
        breakdown,
        log,
        iterations: iteration,
        accepted,
        waves_completed,
        stop,
        trace,
    }
}

/// Seed of run `i` in a batch.
pub fn run_seed(base: u64, i: usize) -> u64 {
    base.wrapping_add(i as u64)
}

/// `config.runs` independent runs in parallel; results come back in run order.
pub fn run_many(instance: &Instance, pras: &PraTable, plan: &WavePlan, config: &AnnealConfig) -> Vec<RunResult> {
    (0..config.runs)
        .into_par_iter()
        .map(|i| run_office(instance, pras, plan, config, run_seed(config.seed, i)))
        .collect()
}

/// Index of the lowest-objective run (first on ties).
pub fn best_run(runs: &[RunResult]) -> Option<usize> {
    (0..runs.len()).min_by(|&a, &b| runs[a].breakdown.total.total_cmp(&runs[b].breakdown.total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluate::{check_feasibility, timing_penalty};
    use crate::gen::make_figure2;
    use crate::model::derive_cumulative;

    fn quick(seed: u64) -> AnnealConfig {
        AnnealConfig {
            time_limit_secs: 10.0,
            max_iterations: Some(300),
            seed,
            ..AnnealConfig::pandemic()
        }
    }

    #[test]
    fn sixteen_weekly_meetings_quarter_quota() {
        assert_eq!(quota_indices(16, 4), vec![1, 5, 9, 13]);
    }

    #[test]
    fn spaced_quota_minimizes_timing_penalty() {
        let weekly = vec![1u32; 16];
        let (_, first, last) = derive_cumulative(&weekly);
        let penalty = |weeks: &[u32]| {
            let mut per = vec![0u32; 16];
            for &w in weeks {
                per[w as usize] += 1;
            }
            timing_penalty(&derive_cumulative(&per).0, first, last)
        };
        let mut best = f64::INFINITY;
        for a in 0..16 {
            for b in a + 1..16 {
                for c in b + 1..16 {
                    for d in c + 1..16 {
                        best = best.min(penalty(&[a, b, c, d]));
                    }
                }
            }
        }
        assert!(penalty(&quota_indices(16, 4)) <= best + 1e-9);
    }

    #[test]
    fn exam_block_goes_to_first_wave() {
        let mut inst = make_figure2();
        inst.sections[0].exam_block = true;
        inst.sections[0].min_fraction = 1.0;
        let plan = build_waves(&inst, &WavePolicy::Tiered { enrollment_threshold: 80 }).unwrap();
        let waves: Vec<usize> = plan.of_section(0).iter().map(|&id| plan.meetings[id].wave).collect();
        assert_eq!(waves, vec![1, 1, 1, 1]);
        // Small regular sections: one quota meeting in wave 4, three in wave 5.
        let mut waves: Vec<usize> = plan.of_section(1).iter().map(|&id| plan.meetings[id].wave).collect();
        waves.sort_unstable();
        assert_eq!(waves, vec![4, 5, 5, 5]);
    }

    #[test]
    fn full_fraction_fills_first_of_two_waves() {
        let inst = make_figure2().with_min_fraction(1.0).unwrap();
        let plan = build_waves(&inst, &WavePolicy::Flat { waves: 2 }).unwrap();
        assert_eq!(plan.wave(1).len(), 32);
        assert!(plan.wave(2).is_empty());
    }

    #[test]
    fn figure2_quota_met_without_waste() {
        let inst = make_figure2();
        let pras = PraTable::build(&inst).unwrap();
        let config = quick(3);
        let plan = build_waves(&inst, &config.waves).unwrap();
        let run = run_office(&inst, &pras, &plan, &config, 3);
        assert!(check_feasibility(&inst, &run.schedule).is_empty());
        assert_eq!(run.breakdown.components[6], 0.0);
        for d in &run.breakdown.sections {
            assert_eq!(d.in_person, 1);
            assert_eq!(d.wasted_seats, 0);
        }
    }

    #[test]
    fn reported_best_matches_fresh_evaluation() {
        let inst = make_figure2();
        let pras = PraTable::build(&inst).unwrap();
        let config = quick(11);
        let plan = build_waves(&inst, &config.waves).unwrap();
        let run = run_office(&inst, &pras, &plan, &config, 11);
        let fresh = evaluate_unchecked(&inst, &run.schedule, &inst.weights);
        assert_eq!(fresh.total, run.breakdown.total);
        assert!(run.trace.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(*run.trace.last().unwrap(), run.breakdown.total);
    }

    #[test]
    fn fixed_iteration_budget_is_deterministic() {
        let inst = make_figure2();
        let pras = PraTable::build(&inst).unwrap();
        let config = quick(5);
        let plan = build_waves(&inst, &config.waves).unwrap();
        let a = run_office(&inst, &pras, &plan, &config, 5);
        let b = run_office(&inst, &pras, &plan, &config, 5);
        assert_eq!(a.schedule, b.schedule);
        assert_eq!(a.iterations, b.iterations);
    }

    #[test]
    fn zero_weights_give_zero_objective() {
        let mut w = Weights::pandemic();
        w.alpha = [0.0; 7];
        let inst = make_figure2().with_weights(w).unwrap();
        let pras = PraTable::build(&inst).unwrap();
        let config = quick(1);
        let plan = build_waves(&inst, &config.waves).unwrap();
        let run = run_office(&inst, &pras, &plan, &config, 1);
        assert_eq!(run.breakdown.total, 0.0);
        assert_eq!(run.waves_completed, 4);
    }

    #[test]
    fn config_rejects_bad_factor() {
        let mut c = AnnealConfig::pandemic();
        c.temperature_factor = 1.0;
        assert!(c.validate().is_err());
        c.temperature_factor = 0.5;
        c.removal_low = 4;
        c.removal_high = 2;
        assert!(c.validate().is_err());
    }
}
