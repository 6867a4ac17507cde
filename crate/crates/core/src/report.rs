//! Run statistics recomputed from an instance and a schedule.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::anneal::{RunResult, StopReason};
use crate::evaluate::{evaluate_unchecked, spatial_metrics, ObjectiveBreakdown, Schedule};
use crate::gen::total_student_hours;
use crate::model::{Instance, Scenario, Weights};
use crate::solve::SolveOutcome;

/// Sections with at least this many students count as large.
pub const LARGE_SECTION: u32 = 100;

/// A per-section average and the same average weighted by enrollment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub section_avg: f64,
    pub student_avg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallLarge {
    pub small: f64,
    pub large: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionRow {
    pub id: usize,
    pub name: String,
    pub enrollment: u32,
    pub rooms: Vec<usize>,
    pub in_person: u32,
    pub normal_meetings: u32,
    pub in_person_fraction: f64,
    pub fairness_met: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub components: [f64; 7],
    pub total: f64,
    pub sections: usize,
    /// Sections holding at least one mass meeting.
    pub sections_meeting: usize,
    pub rooms_per_section: Averages,
    pub floors_per_section: Averages,
    pub buildings_per_section: Averages,
    /// Sections with a room set, keyed by building preference penalty.
    pub pref_penalty_histogram: BTreeMap<String, usize>,
    pub mass_meeting_student_hours: f64,
    pub total_student_hours: f64,
    pub mass_meeting_share: f64,
    /// Percent of small and large sections with under 30% of meetings in person.
    pub below_30_pct: SmallLarge,
    /// Percent of small and large sections with at least 80% in person.
    pub at_least_80_pct: SmallLarge,
    pub avg_pras_per_section: Option<f64>,
    pub fairness_met: bool,
    /// 1-based ids of sections short of their MinFraction.
    pub below_min_fraction: Vec<usize>,
    pub section_rows: Vec<SectionRow>,
}

impl RunReport {
    pub fn build(instance: &Instance, schedule: &Schedule, weights: &Weights, avg_pras: Option<f64>) -> RunReport {
        RunReport::from_breakdown(instance, schedule, &evaluate_unchecked(instance, schedule, weights), avg_pras)
    }

    pub fn from_breakdown(
        instance: &Instance,
        schedule: &Schedule,
        breakdown: &ObjectiveBreakdown,
        avg_pras: Option<f64>,
    ) -> RunReport {
        let hours_per_slot = instance.calendar.timeslot_minutes as f64 / 60.0;
        let mut rooms = Acc::default();
        let mut floors = Acc::default();
        let mut buildings = Acc::default();
        let mut histogram = BTreeMap::new();
        let mut mass_hours = 0.0;
        let mut below30 = [(0usize, 0usize); 2];
        let mut above80 = [(0usize, 0usize); 2];
        let mut rows = Vec::with_capacity(instance.sections.len());
        let mut below_min = Vec::new();

        for (s, plan) in schedule.sections.iter().enumerate() {
            let sec = &instance.sections[s];
            let diag = &breakdown.sections[s];
            let e = sec.enrollment as f64;
            if let Ok(m) = spatial_metrics(instance, &plan.rooms, s) {
                rooms.add(m.num_rooms as f64, e);
                floors.add(m.num_floors as f64, e);
                buildings.add(m.num_buildings as f64, e);
                *histogram.entry(format!("{}", m.pref_penalty)).or_insert(0) += 1;
            }
            let in_person = plan.meetings.len() as u32;
            mass_hours += e * in_person as f64 * sec.duration_slots as f64 * hours_per_slot;
            let normal = sec.total_meetings();
            let fraction = if normal == 0 { 1.0 } else { in_person as f64 / normal as f64 };
            if normal > 0 {
                let size = usize::from(sec.enrollment >= LARGE_SECTION);
                below30[size].1 += 1;
                above80[size].1 += 1;
                if fraction < 0.3 {
                    below30[size].0 += 1;
                }
                if fraction >= 0.8 {
                    above80[size].0 += 1;
                }
            }
            if !diag.fairness_met {
                below_min.push(s + 1);
            }
            rows.push(SectionRow {
                id: s + 1,
                name: sec.name.clone(),
                enrollment: sec.enrollment,
                rooms: plan.rooms.iter().map(|r| r + 1).collect(),
                in_person,
                normal_meetings: normal,
                in_person_fraction: fraction,
                fairness_met: diag.fairness_met,
            });
        }

        let total_hours = total_student_hours(instance);
        let pct = |(k, n): (usize, usize)| if n == 0 { 0.0 } else { 100.0 * k as f64 / n as f64 };
        RunReport {
            components: breakdown.components,
            total: breakdown.total,
            sections: instance.sections.len(),
            sections_meeting: schedule.sections.iter().filter(|p| !p.meetings.is_empty()).count(),
            rooms_per_section: rooms.averages(),
            floors_per_section: floors.averages(),
            buildings_per_section: buildings.averages(),
            pref_penalty_histogram: histogram,
            mass_meeting_student_hours: mass_hours,
            total_student_hours: total_hours,
            mass_meeting_share: if total_hours > 0.0 { mass_hours / total_hours } else { 0.0 },
            below_30_pct: SmallLarge {
                small: pct(below30[0]),
                large: pct(below30[1]),
            },
            at_least_80_pct: SmallLarge {
                small: pct(above80[0]),
                large: pct(above80[1]),
            },
            avg_pras_per_section: avg_pras,
            fairness_met: below_min.is_empty(),
            below_min_fraction: below_min,
            section_rows: rows,
        }
    }
}

#[derive(Default)]
struct Acc {
    n: f64,
    sum: f64,
    weight: f64,
    weighted: f64,
}

impl Acc {
    fn add(&mut self, value: f64, weight: f64) {
        self.n += 1.0;
        self.sum += value;
        self.weight += weight;
        self.weighted += value * weight;
    }

    fn averages(&self) -> Averages {
        Averages {
            section_avg: if self.n > 0.0 { self.sum / self.n } else { 0.0 },
            student_avg: if self.weight > 0.0 { self.weighted / self.weight } else { 0.0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub total: f64,
    pub components: [f64; 7],
    pub iterations: u64,
    pub accepted: u64,
    pub waves_completed: usize,
    pub stop: StopReason,
    pub fairness_met: bool,
}

impl RunSummary {
    pub fn of(run: &RunResult) -> RunSummary {
        RunSummary {
            seed: run.seed,
            total: run.breakdown.total,
            components: run.breakdown.components,
            iterations: run.iterations,
            accepted: run.accepted,
            waves_completed: run.waves_completed,
            stop: run.stop,
            fairness_met: run.breakdown.components[6] == 0.0,
        }
    }
}

/// Mean of the headline numbers over several runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportAverages {
    pub runs: usize,
    pub components: [f64; 7],
    pub total: f64,
    pub rooms_per_section: Averages,
    pub floors_per_section: Averages,
    pub buildings_per_section: Averages,
    pub pref_penalty_histogram: BTreeMap<String, f64>,
    pub mass_meeting_student_hours: f64,
    pub mass_meeting_share: f64,
    pub below_30_pct: SmallLarge,
    pub at_least_80_pct: SmallLarge,
    pub sections_below_min_fraction: f64,
}

impl ReportAverages {
    pub fn of(reports: &[RunReport]) -> ReportAverages {
        let n = reports.len().max(1) as f64;
        let mean = |f: &dyn Fn(&RunReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        let avg = |f: &dyn Fn(&RunReport) -> Averages| Averages {
            section_avg: mean(&|r| f(r).section_avg),
            student_avg: mean(&|r| f(r).student_avg),
        };
        let sl = |f: &dyn Fn(&RunReport) -> SmallLarge| SmallLarge {
            small: mean(&|r| f(r).small),
            large: mean(&|r| f(r).large),
        };
        let mut components = [0.0; 7];
        for (k, c) in components.iter_mut().enumerate() {
            *c = mean(&|r| r.components[k]);
        }
        let mut histogram: BTreeMap<String, f64> = BTreeMap::new();
        for r in reports {
            for (key, &count) in &r.pref_penalty_histogram {
                *histogram.entry(key.clone()).or_insert(0.0) += count as f64 / n;
            }
        }
        ReportAverages {
            runs: reports.len(),
            components,
            total: mean(&|r| r.total),
            rooms_per_section: avg(&|r| r.rooms_per_section),
            floors_per_section: avg(&|r| r.floors_per_section),
            buildings_per_section: avg(&|r| r.buildings_per_section),
            pref_penalty_histogram: histogram,
            mass_meeting_student_hours: mean(&|r| r.mass_meeting_student_hours),
            mass_meeting_share: mean(&|r| r.mass_meeting_share),
            below_30_pct: sl(&|r| r.below_30_pct),
            at_least_80_pct: sl(&|r| r.at_least_80_pct),
            sections_below_min_fraction: mean(&|r| r.below_min_fraction.len() as f64),
        }
    }
}

/// Everything `solve` writes to `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub scenario: String,
    pub warnings: Vec<String>,
    pub runs: Vec<RunSummary>,
    pub best_run: usize,
    pub average: ReportAverages,
    pub best: RunReport,
}

impl SolveReport {
    /// Per-run reports (in run order) and the aggregate over them.
    pub fn from_outcome(outcome: &SolveOutcome, scenario: Scenario) -> (SolveReport, Vec<RunReport>) {
        let prepared = &outcome.prepared;
        let avg_pras = Some(prepared.pras.average_count());
        let reports: Vec<RunReport> = outcome
            .runs
            .iter()
            .map(|r| RunReport::from_breakdown(&prepared.instance, &r.schedule, &r.breakdown, avg_pras))
            .collect();
        let report = SolveReport {
            scenario: scenario.to_string(),
            warnings: prepared.warnings.clone(),
            runs: outcome.runs.iter().map(RunSummary::of).collect(),
            best_run: outcome.best,
            average: ReportAverages::of(&reports),
            best: reports[outcome.best].clone(),
        };
        (report, reports)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluate::{MeetingSlot, SectionPlan};
    use crate::gen::make_figure2;

    /// One Monday meeting in week 1 per section, all four rooms.
    fn figure2_quarter() -> (Instance, Schedule) {
        let inst = make_figure2();
        let mut schedule = Schedule::empty(8);
        for s in 0..8 {
            let time = if s < 4 { 0 } else { 1 };
            let week = if s % 2 == 0 { 0 } else { 1 };
            let day_time = if (s / 2) % 2 == 0 { time } else { time + 2 };
            schedule.sections[s] = SectionPlan {
                rooms: vec![0, 1, 2, 3],
                meetings: [MeetingSlot::new(day_time, week)].into_iter().collect(),
            };
        }
        (inst, schedule)
    }

    #[test]
    fn figure2_report_by_hand() {
        let (inst, schedule) = figure2_quarter();
        let weights = inst.weights.clone();
        let report = RunReport::build(&inst, &schedule, &weights, Some(1.0));
        assert_eq!(report.rooms_per_section, Averages { section_avg: 4.0, student_avg: 4.0 });
        assert_eq!(report.floors_per_section.section_avg, 1.0);
        assert_eq!(report.buildings_per_section.section_avg, 1.0);
        assert_eq!(report.pref_penalty_histogram, BTreeMap::from([("0".to_string(), 8)]));
        // 8 sections * 40 students * 1 meeting * 1.5 h.
        assert_eq!(report.mass_meeting_student_hours, 480.0);
        assert_eq!(report.total_student_hours, 1920.0);
        assert_eq!(report.mass_meeting_share, 0.25);
        assert_eq!(report.below_30_pct, SmallLarge { small: 100.0, large: 0.0 });
        assert!(report.fairness_met);
        assert!(report.section_rows.iter().all(|r| r.in_person_fraction == 0.25));
    }

    #[test]
    fn averages_of_identical_reports() {
        let (inst, schedule) = figure2_quarter();
        let r = RunReport::build(&inst, &schedule, &inst.weights, None);
        let avg = ReportAverages::of(&[r.clone(), r.clone()]);
        assert_eq!(avg.total, r.total);
        assert_eq!(avg.rooms_per_section, r.rooms_per_section);
        assert_eq!(avg.pref_penalty_histogram["0"], 8.0);
    }
}
