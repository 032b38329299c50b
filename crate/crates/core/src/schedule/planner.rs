//! Deterministic construction of the ZB-V and synergistic schedules.
//!
//! Both generators run a virtual clock over the stage plan and emit each
//! device's action list greedily under fixed priority rules. The clock uses
//! a nominal cost model (t_f = t_b = 4, t_w = 2, t_ar = 1, scaled per slot),
//! so the emitted program is a pure function of the plan and the parallel
//! configuration; the simulator then executes it under the real cost model.
//!
//! Priority rules, synergistic schedule:
//!   1. braid the next forward with the next backward on the same chunk
//!      (weight separation on during warm-up except on the last stage,
//!      off in steady, on again once a chunk runs out of forwards);
//!   2. at the in-flight cap with stored weight work pending, alternate
//!      forward+weight drains with braids;
//!   3. un-braided warm-up forwards up to the per-chunk fill quotas
//!      (chunk 0: 2p - d, chunk 1: d + 1), in-flight capped at 3p;
//!   4. full backwards for backwards whose chunk has no forwards left;
//!   5. stored weight computations fill otherwise-idle time once the
//!      device has no forward work remaining.
//!
//! ZB-V: backward (activation) first, then forwards under a 2p in-flight
//! cap, weight passes when the cap blocks a ready forward or when they fit
//! in an idle gap. The fill pattern, the [B W F] steady cadence, and the
//! cool-down weight drain all emerge from these rules.

use std::collections::{BTreeMap, VecDeque};

use crate::braid::{
    backward_only_block, braid_block, forward_only_block, forward_weight_block, schedule_block,
    weight_only_block, ExecutionBlock,
};
use crate::time::Time;
use crate::workload::{chunk_costs, ChunkCosts, CostModel, ParallelConfig, SlotId, StagePlan};

use super::{Action, DeviceMeta, ScheduleError, ScheduleKind, ScheduleProgram, WarmupVariant};

/// Reference costs used only to order planner decisions.
fn nominal_cost_model() -> CostModel {
    CostModel::from_times(4, 4, 2, 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum CandidateKind {
    Braid { chunk: usize, separate: bool },
    FandW { chunk: usize },
    Bf { chunk: usize },
    Bact { chunk: usize },
    FillForced { chunk: usize },
    Fill { chunk: usize },
    Wdrain { chunk: usize },
}

#[derive(Debug, Clone)]
struct Candidate {
    kind: CandidateKind,
    /// Earliest time the inputs allow, before the compute stream gate.
    ready: Time,
    /// Selection rank at equal start times; lower wins.
    rank: u8,
}

struct DeviceState {
    free: Time,
    comm_free: Time,
    actions: Vec<Action>,
    next_f: [usize; 2],
    next_b: [usize; 2],
    /// Deferred weight passes per chunk, oldest first.
    debt: [VecDeque<usize>; 2],
    inflight: usize,
    fill_quota: [usize; 2],
    last_was_fandw: bool,
    meta: DeviceMeta,
    seen_braid: bool,
    steady: bool,
}

impl DeviceState {
    fn done(&self, m: usize) -> bool {
        self.next_f == [m, m]
            && self.next_b == [m, m]
            && self.debt.iter().all(VecDeque::is_empty)
    }

    fn forwards_left(&self, m: usize) -> bool {
        self.next_f[0] < m || self.next_f[1] < m
    }

    fn degraded(&self, m: usize) -> bool {
        (0..2).any(|c| self.next_f[c] >= m && self.next_b[c] < m)
    }
}

struct Planner<'a> {
    plan: &'a StagePlan,
    cfg: &'a ParallelConfig,
    cm: CostModel,
    costs: Vec<[ChunkCosts; 2]>,
    devices: Vec<DeviceState>,
    fwd_out: BTreeMap<(SlotId, usize), Time>,
    bwd_out: BTreeMap<(SlotId, usize), Time>,
    kind: ScheduleKind,
    variant: Option<WarmupVariant>,
    inflight_cap: usize,
}

impl<'a> Planner<'a> {
    fn new(
        plan: &'a StagePlan,
        cfg: &'a ParallelConfig,
        kind: ScheduleKind,
        variant: Option<WarmupVariant>,
        inflight_cap: usize,
        fill_quota: impl Fn(usize) -> [usize; 2],
    ) -> Self {
        let cm = nominal_cost_model();
        let costs = (0..cfg.p)
            .map(|d| {
                [
                    chunk_costs(plan.scale_of(SlotId::new(d, 0)), &cm),
                    chunk_costs(plan.scale_of(SlotId::new(d, 1)), &cm),
                ]
            })
            .collect();
        let devices = (0..cfg.p)
            .map(|d| DeviceState {
                free: Time::zero(),
                comm_free: Time::zero(),
                actions: Vec::new(),
                next_f: [0, 0],
                next_b: [0, 0],
                debt: [VecDeque::new(), VecDeque::new()],
                inflight: 0,
                fill_quota: fill_quota(d),
                last_was_fandw: false,
                meta: DeviceMeta::default(),
                seen_braid: false,
                steady: false,
            })
            .collect();
        Planner {
            plan,
            cfg,
            cm,
            costs,
            devices,
            fwd_out: BTreeMap::new(),
            bwd_out: BTreeMap::new(),
            kind,
            variant,
            inflight_cap,
        }
    }

    fn slot(&self, d: usize, chunk: usize) -> SlotId {
        SlotId::new(d, chunk)
    }

    /// Arrival of the forward input for (chunk, mb) at device d, or None if
    /// the producer has not been scheduled yet.
    fn fwd_gate(&self, d: usize, chunk: usize, mb: usize) -> Option<Time> {
        let slot = self.slot(d, chunk);
        match self.plan.upstream(slot) {
            None => Some(Time::zero()),
            Some(up) => self.fwd_out.get(&(up, mb)).cloned(),
        }
    }

    /// Arrival of the output gradient for (chunk, mb) at device d.
    fn bwd_gate(&self, d: usize, chunk: usize, mb: usize) -> Option<Time> {
        let slot = self.slot(d, chunk);
        match self.plan.downstream(slot) {
            // Last forward slot: the loss gradient is available as soon as
            // the slot's own forward completes.
            None => self.fwd_out.get(&(slot, mb)).cloned(),
            Some(down) => self.bwd_out.get(&(down, mb)).cloned(),
        }
    }

    fn build_block(&self, d: usize, action: &Action) -> ExecutionBlock {
        let chunk = action.chunk();
        let costs = &self.costs[d][chunk.vstage];
        match action {
            Action::F { mb, .. } => forward_only_block(costs, *mb, chunk),
            Action::Bfull { mb, .. } => backward_only_block(costs, *mb, chunk, false),
            Action::Bact { mb, .. } => backward_only_block(costs, *mb, chunk, true),
            Action::W { mb, .. } => weight_only_block(costs, *mb, chunk),
            Action::FandB {
                fwd_mb,
                bwd_mb,
                separate_w,
                ..
            } => braid_block(
                Some((costs, *fwd_mb)),
                Some((costs, *bwd_mb)),
                *separate_w,
                chunk,
            )
            .expect("planner emitted an illegal braid"),
            Action::FandW { fwd_mb, w_mb, .. } => {
                forward_weight_block(costs, *fwd_mb, costs, *w_mb, chunk)
                    .expect("planner emitted an illegal weight braid")
            }
            Action::Offload { .. } | Action::Reload { .. } => {
                unreachable!("planner does not emit transfers")
            }
        }
    }

    /// Executes an action on the virtual clock and records its outputs.
    fn execute(&mut self, d: usize, action: Action) {
        let chunk = action.chunk();
        let block = self.build_block(d, &action);
        let fwd_gate = action
            .fwd_mb()
            .map(|mb| self.fwd_gate(d, chunk.vstage, mb).expect("fwd gate"))
            .unwrap_or_else(Time::zero);
        let bwd_gate = match &action {
            Action::Bfull { mb, .. } | Action::Bact { mb, .. } => {
                self.bwd_gate(d, chunk.vstage, *mb).expect("bwd gate")
            }
            Action::FandB { bwd_mb, .. } => {
                self.bwd_gate(d, chunk.vstage, *bwd_mb).expect("bwd gate")
            }
            _ => Time::zero(),
        };
        let dev = &self.devices[d];
        let timing = schedule_block(&block, &self.cm, &dev.free, &dev.comm_free, &fwd_gate, &bwd_gate);
        if let (Some(mb), Some(out)) = (action.fwd_mb(), timing.fwd_output.clone()) {
            self.fwd_out.insert((chunk, mb), out);
        }
        if let Some(out) = timing.bwd_output.clone() {
            if let Action::Bfull { mb, .. } | Action::Bact { mb, .. } = &action {
                self.bwd_out.insert((chunk, *mb), out);
            } else if let Action::FandB { bwd_mb, .. } = &action {
                self.bwd_out.insert((chunk, *bwd_mb), out);
            }
        }

        let dev = &mut self.devices[d];
        let max_ar = timing
            .ar_spans
            .iter()
            .map(|(_, e)| e.clone())
            .max()
            .unwrap_or_else(Time::zero);
        dev.comm_free = dev.comm_free.clone().max(max_ar);
        dev.free = timing.end;

        // Bookkeeping: cursors, in-flight quanta, weight debt, metadata.
        let m = self.cfg.m;
        if action.fwd_mb().is_some() {
            dev.inflight += 1;
        }
        match &action {
            Action::F { .. } => {
                let c = chunk.vstage;
                dev.next_f[c] += 1;
                if dev.fill_quota[c] > 0 {
                    dev.fill_quota[c] -= 1;
                }
                if !dev.seen_braid {
                    dev.meta.warmup_fill += 1;
                }
            }
            Action::Bfull { .. } => {
                dev.next_b[chunk.vstage] += 1;
                dev.inflight -= 1;
            }
            Action::Bact { .. } => {
                let c = chunk.vstage;
                dev.debt[c].push_back(dev.next_b[c]);
                dev.next_b[c] += 1;
            }
            Action::W { .. } => {
                let c = chunk.vstage;
                dev.debt[c].pop_front();
                dev.inflight -= 1;
            }
            Action::FandB { separate_w, .. } => {
                let c = chunk.vstage;
                dev.next_f[c] += 1;
                if *separate_w {
                    dev.debt[c].push_back(dev.next_b[c]);
                } else {
                    dev.inflight -= 1;
                }
                dev.next_b[c] += 1;
                if !dev.seen_braid {
                    dev.seen_braid = true;
                    dev.meta.first_braid = Some(dev.actions.len());
                }
                if c == 0 && !dev.steady {
                    dev.steady = true;
                    dev.meta.steady_start = Some(dev.actions.len());
                }
            }
            Action::FandW { .. } => {
                let c = chunk.vstage;
                dev.next_f[c] += 1;
                dev.debt[c].pop_front();
                dev.inflight -= 1;
            }
            _ => {}
        }
        dev.last_was_fandw = matches!(action, Action::FandW { .. });
        dev.actions.push(action);
        if dev.meta.cooldown_start.is_none() && !dev.forwards_left(m) {
            dev.meta.cooldown_start = Some(dev.actions.len());
        }
    }

    /// Effective start of a candidate on device d.
    fn start_of(&self, d: usize, c: &Candidate) -> Time {
        self.devices[d].free.clone().max(c.ready.clone())
    }

    fn best_for_device(&self, d: usize, cands: Vec<Candidate>) -> Option<Candidate> {
        cands
            .into_iter()
            .min_by(|a, b| {
                let sa = self.start_of(d, a);
                let sb = self.start_of(d, b);
                sa.cmp(&sb).then(a.rank.cmp(&b.rank))
            })
    }

    fn run(mut self, policy: impl Fn(&Planner, usize) -> Vec<Candidate>) -> ScheduleProgram {
        let total_actions: usize = 6 * self.cfg.m * self.cfg.p + 64;
        let mut steps = 0usize;
        loop {
            let mut best: Option<(usize, Candidate, Time)> = None;
            for d in 0..self.cfg.p {
                if self.devices[d].done(self.cfg.m) {
                    continue;
                }
                if let Some(c) = self.best_for_device(d, policy(&self, d)) {
                    let start = self.start_of(d, &c);
                    let better = match &best {
                        None => true,
                        Some((bd, _, bs)) => start < *bs || (start == *bs && d < *bd),
                    };
                    if better {
                        best = Some((d, c, start));
                    }
                }
            }
            let Some((d, cand, _)) = best else {
                let pending: Vec<String> = (0..self.cfg.p)
                    .filter(|&d| !self.devices[d].done(self.cfg.m))
                    .map(|d| {
                        let dev = &self.devices[d];
                        format!(
                            "d{d}: next_f={:?} next_b={:?} debt={:?} inflight={} quota={:?}",
                            dev.next_f,
                            dev.next_b,
                            dev.debt.iter().map(VecDeque::len).collect::<Vec<_>>(),
                            dev.inflight,
                            dev.fill_quota
                        )
                    })
                    .collect();
                assert!(
                    pending.is_empty(),
                    "planner stalled:\n{}",
                    pending.join("\n")
                );
                break;
            };
            let action = self.action_for(d, &cand);
            self.execute(d, action);
            steps += 1;
            assert!(
                steps <= total_actions * 4,
                "planner failed to converge after {steps} steps"
            );
        }

        let (per_device, device_meta) = self
            .devices
            .into_iter()
            .map(|dev| (dev.actions, dev.meta))
            .unzip();
        ScheduleProgram {
            kind: self.kind,
            cfg: self.cfg.clone(),
            variant: self.variant,
            order: self.plan.order.clone(),
            per_device,
            device_meta,
        }
    }

    fn action_for(&self, d: usize, cand: &Candidate) -> Action {
        let dev = &self.devices[d];
        match cand.kind {
            CandidateKind::Braid { chunk, separate } => Action::FandB {
                chunk: self.slot(d, chunk),
                fwd_mb: dev.next_f[chunk],
                bwd_mb: dev.next_b[chunk],
                separate_w: separate,
            },
            CandidateKind::FandW { chunk } => Action::FandW {
                chunk: self.slot(d, chunk),
                fwd_mb: dev.next_f[chunk],
                w_mb: *dev.debt[chunk].front().unwrap(),
            },
            CandidateKind::Bf { chunk } => Action::Bfull {
                chunk: self.slot(d, chunk),
                mb: dev.next_b[chunk],
            },
            CandidateKind::Bact { chunk } => Action::Bact {
                chunk: self.slot(d, chunk),
                mb: dev.next_b[chunk],
            },
            CandidateKind::Fill { chunk } | CandidateKind::FillForced { chunk } => Action::F {
                chunk: self.slot(d, chunk),
                mb: dev.next_f[chunk],
            },
            CandidateKind::Wdrain { chunk } => Action::W {
                chunk: self.slot(d, chunk),
                mb: *dev.debt[chunk].front().unwrap(),
            },
        }
    }

    fn w_span(&self, d: usize, chunk: usize) -> Time {
        self.costs[d][chunk].total_w()
    }
}

/// ZB-V: V-shape dataflow with every backward split into activation and
/// weight passes. Peak in-flight activations per device are capped at 2p.
pub fn schedule_zbv(
    plan: &StagePlan,
    cfg: &ParallelConfig,
) -> Result<ScheduleProgram, ScheduleError> {
    super::check_plan(plan, cfg)?;
    let cap = 2 * cfg.p;
    let planner = Planner::new(plan, cfg, ScheduleKind::ZbV, None, cap, |_| {
        [usize::MAX, usize::MAX]
    });
    let m = cfg.m;
    let prog = planner.run(move |pl, d| {
        let dev = &pl.devices[d];
        let mut cands = Vec::new();
        for c in [1usize, 0] {
            if dev.next_b[c] < m && dev.next_f[c] > dev.next_b[c] {
                if let Some(g) = pl.bwd_gate(d, c, dev.next_b[c]) {
                    cands.push(Candidate {
                        kind: CandidateKind::Bact { chunk: c },
                        ready: g,
                        rank: if c == 1 { 0 } else { 1 },
                    });
                }
            }
        }
        let mut f_blocked_by_cap = false;
        for c in [1usize, 0] {
            if dev.next_f[c] < m {
                if let Some(g) = pl.fwd_gate(d, c, dev.next_f[c]) {
                    if dev.inflight < pl.inflight_cap {
                        cands.push(Candidate {
                            kind: CandidateKind::Fill { chunk: c },
                            ready: g,
                            rank: if c == 1 { 2 } else { 3 },
                        });
                    } else if g <= dev.free {
                        f_blocked_by_cap = true;
                    }
                }
            }
        }
        // Weight passes: drain when a capped forward needs the memory back,
        // when the pass fits before the next candidate starts, or when
        // nothing else remains.
        let debt_chunk = (0..2).find(|&c| !dev.debt[c].is_empty());
        if let Some(c) = debt_chunk {
            let other_start = cands
                .iter()
                .map(|cd| pl.start_of(d, cd))
                .min();
            let fits = match &other_start {
                None => true,
                Some(t) => &(&dev.free + &pl.w_span(d, c)) <= t,
            };
            if f_blocked_by_cap || fits {
                cands.push(Candidate {
                    kind: CandidateKind::Wdrain { chunk: c },
                    ready: dev.free.clone(),
                    rank: 4,
                });
            }
        }
        cands
    });
    Ok(prog)
}

/// The synergistic schedule built from braided execution blocks.
pub fn schedule_stp(
    plan: &StagePlan,
    cfg: &ParallelConfig,
    warmup: WarmupVariant,
) -> Result<ScheduleProgram, ScheduleError> {
    super::check_plan(plan, cfg)?;
    let p = cfg.p;
    let m = cfg.m;
    let min_m = match warmup {
        WarmupVariant::Throughput => p + 1,
        WarmupVariant::MemoryEfficient => p + 2,
    };
    if m < min_m {
        return Err(ScheduleError::TooFewMicrobatches { m, min_m });
    }
    let memory_efficient = warmup == WarmupVariant::MemoryEfficient;
    let cap = if memory_efficient { 2 * p + 2 } else { 3 * p };
    let quota = move |d: usize| -> [usize; 2] {
        if memory_efficient {
            [(p + 1).min(m), (d + 2).min(m - 1)]
        } else {
            [(2 * p - d).min(m), (d + 1).min(m - 1)]
        }
    };
    let planner = Planner::new(
        plan,
        cfg,
        ScheduleKind::Synergistic,
        Some(warmup),
        cap,
        quota,
    );
    let last_stage = p - 1;
    let prog = planner.run(move |pl, d| {
        let dev = &pl.devices[d];
        let cap = pl.inflight_cap;
        let degraded = dev.degraded(m);
        let mut cands = Vec::new();

        // Braids, chunk 1 then chunk 0.
        let at_cap_with_debt = dev.inflight >= cap && dev.debt.iter().any(|q| !q.is_empty());
        for c in [1usize, 0] {
            if dev.next_f[c] < m && dev.next_b[c] < m && dev.next_f[c] > dev.next_b[c] {
                let fwd = pl.fwd_gate(d, c, dev.next_f[c]);
                let bwd = pl.bwd_gate(d, c, dev.next_b[c]);
                if let (Some(f), Some(b)) = (fwd, bwd) {
                    let separate = if memory_efficient {
                        true
                    } else if degraded {
                        true
                    } else {
                        d != last_stage && !dev.steady && dev.inflight < cap
                    };
                    // A separating braid grows in-flight memory; hold it at
                    // the cap and let drains or full braids run instead.
                    if separate && !memory_efficient && dev.inflight >= cap && !degraded {
                        continue;
                    }
                    if memory_efficient && dev.inflight >= cap && !degraded {
                        continue;
                    }
                    cands.push(Candidate {
                        kind: CandidateKind::Braid { chunk: c, separate },
                        ready: f.max(b),
                        rank: if c == 1 { 1 } else { 2 },
                    });
                }
            }
        }

        // Forward + stored-weight drains alternate with braids at the cap.
        if at_cap_with_debt && !dev.last_was_fandw {
            for c in [1usize, 0] {
                if !dev.debt[c].is_empty() && dev.next_f[c] < m && dev.next_f[c] > *dev.debt[c].front().unwrap() {
                    if let Some(f) = pl.fwd_gate(d, c, dev.next_f[c]) {
                        cands.push(Candidate {
                            kind: CandidateKind::FandW { chunk: c },
                            ready: f,
                            rank: 0,
                        });
                    }
                }
            }
        }

        // Un-braided backwards once a chunk's forwards are exhausted. The
        // memory-efficient variant keeps separation on and exposes these.
        for c in [1usize, 0] {
            if dev.next_b[c] < m && dev.next_f[c] >= m {
                if let Some(g) = pl.bwd_gate(d, c, dev.next_b[c]) {
                    let kind = if memory_efficient {
                        CandidateKind::Bact { chunk: c }
                    } else {
                        CandidateKind::Bf { chunk: c }
                    };
                    cands.push(Candidate {
                        kind,
                        ready: g,
                        rank: if c == 1 { 3 } else { 4 },
                    });
                }
            }
        }

        // Warm-up fills within quota, plus the forced fill that keeps a
        // backward from overtaking its own forward.
        for c in [1usize, 0] {
            if dev.next_f[c] >= m {
                continue;
            }
            let forced = dev.next_f[c] == dev.next_b[c];
            let within_quota = dev.fill_quota[c] > 0 && dev.inflight < cap;
            if forced || within_quota {
                if let Some(g) = pl.fwd_gate(d, c, dev.next_f[c]) {
                    cands.push(Candidate {
                        kind: if forced {
                            CandidateKind::FillForced { chunk: c }
                        } else {
                            CandidateKind::Fill { chunk: c }
                        },
                        ready: g,
                        rank: if forced { 5 } else if c == 1 { 6 } else { 7 },
                    });
                }
            }
        }

        // Stored weight computations fill trailing bubbles in cool-down.
        if !dev.forwards_left(m) {
            if let Some(c) = (0..2).find(|&c| !dev.debt[c].is_empty()) {
                let other_start = cands.iter().map(|cd| pl.start_of(d, cd)).min();
                let fits = match &other_start {
                    None => true,
                    Some(t) => &(&dev.free + &pl.w_span(d, c)) <= t,
                };
                if fits {
                    cands.push(Candidate {
                        kind: CandidateKind::Wdrain { chunk: c },
                        ready: dev.free.clone(),
                        rank: 8,
                    });
                }
            }
        }
        cands
    });
    Ok(prog)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::{Action, ScheduleProgram};
    use crate::workload::StagePlan;

    fn uniform(p: usize, m: usize) -> (StagePlan, ParallelConfig) {
        let cfg = ParallelConfig::new(p, m);
        (StagePlan::uniform(&cfg), cfg)
    }

    fn count_kind(prog: &ScheduleProgram, f: impl Fn(&Action) -> bool) -> usize {
        prog.per_device
            .iter()
            .flat_map(|a| a.iter())
            .filter(|a| f(a))
            .count()
    }

    #[test]
    fn zbv_is_complete_and_never_merges_backwards() {
        for (p, m) in [(1, 2), (2, 3), (2, 4), (4, 8), (4, 12)] {
            let (plan, cfg) = uniform(p, m);
            let prog = schedule_zbv(&plan, &cfg).unwrap();
            prog.check_complete().unwrap();
            assert_eq!(count_kind(&prog, |a| matches!(a, Action::Bfull { .. })), 0);
            // Every Bact has a matching later W on the same device.
            assert_eq!(
                count_kind(&prog, |a| matches!(a, Action::Bact { .. })),
                count_kind(&prog, |a| matches!(a, Action::W { .. }))
            );
        }
    }

    #[test]
    fn zbv_warmup_matches_hand_trace_p2() {
        let (plan, cfg) = uniform(2, 4);
        let prog = schedule_zbv(&plan, &cfg).unwrap();
        // Device 0 fills chunk-0 forwards until the turn returns, then the
        // steady backward-weight-forward cadence begins.
        let head: Vec<String> = prog.per_device[0]
            .iter()
            .take(7)
            .map(describe)
            .collect();
        assert_eq!(
            head,
            vec!["F0.0", "F0.1", "F0.2", "F1.0", "B1.0", "W1.0", "F0.3"]
        );
        // Device 1 alternates the two chunks while filling.
        let head1: Vec<String> = prog.per_device[1]
            .iter()
            .take(7)
            .map(describe)
            .collect();
        assert_eq!(
            head1,
            vec!["F0.0", "F1.0", "F0.1", "F1.1", "B1.0", "W1.0", "F0.2"]
        );
    }

    fn describe(a: &Action) -> String {
        match a {
            Action::F { chunk, mb } => format!("F{}.{}", chunk.vstage, mb),
            Action::Bfull { chunk, mb } => format!("BF{}.{}", chunk.vstage, mb),
            Action::Bact { chunk, mb } => format!("B{}.{}", chunk.vstage, mb),
            Action::W { chunk, mb } => format!("W{}.{}", chunk.vstage, mb),
            Action::FandB {
                chunk,
                fwd_mb,
                bwd_mb,
                separate_w,
            } => format!(
                "FB{}{}.{}x{}",
                if *separate_w { "s" } else { "" },
                chunk.vstage,
                fwd_mb,
                bwd_mb
            ),
            Action::FandW { chunk, fwd_mb, w_mb } => {
                format!("FW{}.{}x{}", chunk.vstage, fwd_mb, w_mb)
            }
            Action::Offload { chunk, mb, .. } => format!("O{}.{}", chunk.vstage, mb),
            Action::Reload { chunk, mb, .. } => format!("R{}.{}", chunk.vstage, mb),
        }
    }

    #[test]
    fn stp_first_braid_is_second_and_first_microbatch() {
        let (plan, cfg) = uniform(4, 12);
        let prog = schedule_stp(&plan, &cfg, WarmupVariant::Throughput).unwrap();
        prog.check_complete().unwrap();
        let first_braid = prog.per_device[0]
            .iter()
            .find_map(|a| match a {
                Action::FandB {
                    fwd_mb,
                    bwd_mb,
                    separate_w,
                    ..
                } => Some((*fwd_mb, *bwd_mb, *separate_w)),
                _ => None,
            })
            .unwrap();
        assert_eq!(first_braid, (1, 0, true));
    }

    #[test]
    fn stp_braids_always_have_forward_ahead_of_backward() {
        for (p, m) in [(2, 4), (2, 6), (4, 8), (4, 12), (8, 24)] {
            let (plan, cfg) = uniform(p, m);
            for variant in [WarmupVariant::Throughput, WarmupVariant::MemoryEfficient] {
                let prog = schedule_stp(&plan, &cfg, variant).unwrap();
                prog.check_complete().unwrap();
                for actions in &prog.per_device {
                    for a in actions {
                        match a {
                            Action::FandB { fwd_mb, bwd_mb, .. } => assert!(fwd_mb > bwd_mb),
                            Action::FandW { fwd_mb, w_mb, .. } => assert!(fwd_mb > w_mb),
                            _ => {}
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn stp_last_stage_never_separates_in_warmup() {
        let (plan, cfg) = uniform(4, 12);
        let prog = schedule_stp(&plan, &cfg, WarmupVariant::Throughput).unwrap();
        let last = &prog.per_device[3];
        let cooldown = prog.device_meta[3].cooldown_start.unwrap_or(last.len());
        for a in &last[..cooldown] {
            if let Action::FandB { separate_w, .. } = a {
                assert!(
                    !separate_w,
                    "last stage must use full backwards inside warm-up braids"
                );
            }
        }
    }

    #[test]
    fn stp_steady_has_no_bact_only_actions() {
        let (plan, cfg) = uniform(4, 12);
        let prog = schedule_stp(&plan, &cfg, WarmupVariant::Throughput).unwrap();
        assert_eq!(count_kind(&prog, |a| matches!(a, Action::Bact { .. })), 0);
    }

    #[test]
    fn stp_memory_efficient_adds_one_leading_forward_per_device() {
        let (plan, cfg) = uniform(4, 12);
        let tp = schedule_stp(&plan, &cfg, WarmupVariant::Throughput).unwrap();
        let me = schedule_stp(&plan, &cfg, WarmupVariant::MemoryEfficient).unwrap();
        for d in 0..4 {
            let lead = |prog: &ScheduleProgram| {
                prog.per_device[d]
                    .iter()
                    .take_while(|a| !a.is_braided())
                    .filter(|a| {
                        matches!(a, Action::F { chunk, .. } if chunk.vstage == 1)
                    })
                    .count()
            };
            assert_eq!(
                lead(&me),
                lead(&tp) + 1,
                "device {d}: memory-efficient warm-up inserts one extra leading forward"
            );
        }
        // The variant really does trade exposed activation-only backwards.
        assert!(count_kind(&me, |a| matches!(a, Action::Bact { .. })) > 0);
    }

    #[test]
    fn stp_rejects_too_few_microbatches() {
        let (plan, cfg) = uniform(4, 4);
        match schedule_stp(&plan, &cfg, WarmupVariant::Throughput) {
            Err(ScheduleError::TooFewMicrobatches { min_m, .. }) => assert_eq!(min_m, 5),
            other => panic!("expected TooFewMicrobatches, got {other:?}"),
        }
    }

    #[test]
    fn stp_single_device_degenerates_cleanly() {
        let (plan, cfg) = uniform(1, 3);
        let prog = schedule_stp(&plan, &cfg, WarmupVariant::Throughput).unwrap();
        prog.check_complete().unwrap();
    }
}
