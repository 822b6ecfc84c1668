//! Grasp success metrics over episode logs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{ActionKind, EpisodeLog};

/// Simulated action durations used for picks-per-hour, seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Durations {
    pub t_grasp_s: f64,
    pub t_push_s: f64,
    pub t_perceive_s: f64,
}

impl Default for Durations {
    fn default() -> Self {
        Self {
            t_grasp_s: 20.0,
            t_push_s: 15.0,
            t_perceive_s: 2.0,
        }
    }
}

/// Object-count bins, inclusive.
pub const BINS: [(usize, usize); 4] = [(1, 5), (6, 10), (11, 15), (16, 20)];

pub fn bin_of(objects: usize) -> Option<usize> {
    BINS.iter().position(|&(lo, hi)| (lo..=hi).contains(&objects))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinRow {
    pub lo: usize,
    pub hi: usize,
    pub attempts: usize,
    /// Mean local clutter of the grasped pose, over attempts that have one.
    pub mean_local: Option<f64>,
    pub mpc: f64,
    pub gs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub gs: f64,
    pub mpc: f64,
    pub gs_wm: f64,
    pub mpph: f64,
    pub attempts: usize,
    pub successes: usize,
    pub multi_picks: usize,
    pub pushes: usize,
    pub records: usize,
    /// Bins without grasp attempts are omitted.
    pub by_bin: Vec<BinRow>,
}

#[derive(Default, Clone, Copy)]
struct Tally {
    attempts: usize,
    successes: usize,
    multi: usize,
    local_sum: f64,
    local_n: usize,
}

pub fn compute_metrics(logs: &[EpisodeLog], durations: &Durations) -> Result<MetricsReport> {
    let mut total = Tally::default();
    let mut bins = [Tally::default(); BINS.len()];
    let (mut pushes, mut records) = (0usize, 0usize);
    for log in logs {
        for r in &log.records {
            records += 1;
            match r.action {
                ActionKind::Push => pushes += 1,
                ActionKind::NoOp => {}
                ActionKind::Grasp => {
                    let add = |t: &mut Tally| {
                        t.attempts += 1;
                        t.successes += r.grasp_success as usize;
                        t.multi += r.multi_pick as usize;
                        if let Some(l) = r.local_score_of_target {
                            t.local_sum += l;
                            t.local_n += 1;
                        }
                    };
                    add(&mut total);
                    if let Some(b) = bin_of(r.objects_before) {
                        add(&mut bins[b]);
                    }
                }
            }
        }
    }
    if total.attempts == 0 {
        return Err(Error::NoAttempts);
    }
    let pct = |n: usize, d: usize| 100.0 * n as f64 / d as f64;
    let time = total.attempts as f64 * durations.t_grasp_s
        + pushes as f64 * durations.t_push_s
        + records as f64 * durations.t_perceive_s;
    let by_bin = BINS
        .iter()
        .zip(&bins)
        .filter(|(_, t)| t.attempts > 0)
        .map(|(&(lo, hi), t)| BinRow {
            lo,
            hi,
            attempts: t.attempts,
            mean_local: (t.local_n > 0).then(|| t.local_sum / t.local_n as f64),
            mpc: pct(t.multi, t.attempts),
            gs: pct(t.successes, t.attempts),
        })
        .collect();
    Ok(MetricsReport {
        gs: pct(total.successes, total.attempts),
        mpc: pct(total.multi, total.attempts),
        gs_wm: pct(total.successes - total.multi, total.attempts),
        mpph: if time > 0.0 { 3600.0 * total.successes as f64 / time } else { 0.0 },
        attempts: total.attempts,
        successes: total.successes,
        multi_picks: total.multi,
        pushes,
        records,
        by_bin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{EpisodeRecord, Termination};

    fn rec(action: ActionKind, objects: usize, success: bool, multi: bool) -> EpisodeRecord {
        EpisodeRecord {
            attempt: 0,
            objects_before: objects,
            action,
            rationale: None,
            k_used: 1,
            grasp_success: success,
            multi_pick: multi,
            picked_ids: Vec::new(),
            failure_reason: None,
            global_score: None,
            local_score_of_target: Some(0.5),
            pose: None,
            push: None,
            events: None,
            failure_count_before: 0,
        }
    }

    fn log(records: Vec<EpisodeRecord>) -> EpisodeLog {
        EpisodeLog {
            seed: 0,
            initial_objects: 20,
            records,
            termination: Termination::WorkspaceEmpty,
            remaining_objects: 0,
        }
    }

    #[test]
    fn percentages() {
        let mut r: Vec<_> = (0..8).map(|i| rec(ActionKind::Grasp, 12, true, i == 0)).collect();
        r.extend((0..2).map(|_| rec(ActionKind::Grasp, 3, false, false)));
        let m = compute_metrics(&[log(r)], &Durations::default()).unwrap();
        assert_eq!((m.gs, m.mpc, m.gs_wm), (80.0, 10.0, 70.0));
        assert_eq!(m.by_bin.len(), 2);
        assert_eq!((m.by_bin[0].lo, m.by_bin[0].gs), (1, 0.0));
        assert_eq!((m.by_bin[1].lo, m.by_bin[1].gs), (11, 100.0));
    }

    #[test]
    fn picks_per_hour() {
        let mut r: Vec<_> = (0..10).map(|i| rec(ActionKind::Grasp, 5, i < 9, false)).collect();
        r.push(rec(ActionKind::Push, 5, false, false));
        r.push(rec(ActionKind::Push, 5, false, false));
        let m = compute_metrics(&[log(r)], &Durations::default()).unwrap();
        assert!((m.mpph - 3600.0 * 9.0 / 254.0).abs() < 1e-9);
        assert!((m.mpph - 127.6).abs() < 0.05);
        assert_eq!(m.gs, m.gs_wm);
    }

    #[test]
    fn pushes_alone_are_not_attempts() {
        let r = vec![rec(ActionKind::Push, 5, false, false)];
        assert!(matches!(compute_metrics(&[log(r)], &Durations::default()), Err(Error::NoAttempts)));
        assert!(matches!(compute_metrics(&[], &Durations::default()), Err(Error::NoAttempts)));
    }
}
