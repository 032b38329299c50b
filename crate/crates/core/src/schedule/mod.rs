//! Per-device schedule programs.
//!
//! Three generators produce [`ScheduleProgram`]s over a stage plan:
//! interleaved 1F1B (parallel virtual-stage dataflow, merged backwards),
//! ZB-V (V-shape dataflow, backward split into activation and weight
//! passes throughout), and the synergistic schedule built from braided
//! execution blocks. [`apply_offloading`] rewrites a synergistic program
//! with offload/reload transfers.

mod offload;
mod planner;

pub use offload::apply_offloading;

use serde::{Deserialize, Serialize};

use crate::time::Time;
use crate::workload::{parallel_order, ParallelConfig, SlotId, StagePlan};

/// One step in a device's program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Action {
    /// Un-braided forward of one microbatch on one chunk.
    F { chunk: SlotId, mb: usize },
    /// Merged activation+weight backward.
    Bfull { chunk: SlotId, mb: usize },
    /// Activation-gradient backward; the weight pass is deferred.
    Bact { chunk: SlotId, mb: usize },
    /// Stored weight-gradient computation.
    W { chunk: SlotId, mb: usize },
    /// Braided forward and backward of two microbatches on the same chunk.
    FandB {
        chunk: SlotId,
        fwd_mb: usize,
        bwd_mb: usize,
        separate_w: bool,
    },
    /// Braided forward and stored weight-gradient computation.
    FandW {
        chunk: SlotId,
        fwd_mb: usize,
        w_mb: usize,
    },
    /// Asynchronous device-to-host copy of a fraction of one chunk-microbatch
    /// activation, launched when the program counter passes it.
    Offload {
        chunk: SlotId,
        mb: usize,
        fraction: Time,
    },
    /// Matching host-to-device copy; must complete before the consumer starts.
    Reload {
        chunk: SlotId,
        mb: usize,
        fraction: Time,
    },
}

impl Action {
    /// Microbatch whose forward this action issues, if any.
    pub fn fwd_mb(&self) -> Option<usize> {
        match self {
            Action::F { mb, .. } => Some(*mb),
            Action::FandB { fwd_mb, .. } | Action::FandW { fwd_mb, .. } => Some(*fwd_mb),
            _ => None,
        }
    }

    /// Microbatch whose backward work this action performs, if any.
    pub fn bwd_mb(&self) -> Option<usize> {
        match self {
            Action::Bfull { mb, .. } | Action::Bact { mb, .. } | Action::W { mb, .. } => Some(*mb),
            Action::FandB { bwd_mb, .. } => Some(*bwd_mb),
            Action::FandW { w_mb, .. } => Some(*w_mb),
            _ => None,
        }
    }

    pub fn chunk(&self) -> SlotId {
        match self {
            Action::F { chunk, .. }
            | Action::Bfull { chunk, .. }
            | Action::Bact { chunk, .. }
            | Action::W { chunk, .. }
            | Action::FandB { chunk, .. }
            | Action::FandW { chunk, .. }
            | Action::Offload { chunk, .. }
            | Action::Reload { chunk, .. } => *chunk,
        }
    }

    pub fn is_braided(&self) -> bool {
        matches!(self, Action::FandB { .. } | Action::FandW { .. })
    }

    pub fn is_transfer(&self) -> bool {
        matches!(self, Action::Offload { .. } | Action::Reload { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScheduleKind {
    Interleaved1F1B,
    ZbV,
    Synergistic,
}

impl ScheduleKind {
    pub fn label(&self) -> &'static str {
        match self {
            ScheduleKind::Interleaved1F1B => "1F1B-I",
            ScheduleKind::ZbV => "ZB-V",
            ScheduleKind::Synergistic => "STP",
        }
    }
}

/// Warm-up construction for the synergistic schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum WarmupVariant {
    /// Deep warm-up: maximum feasible in-flight depth, lowest bubble rate.
    #[default]
    Throughput,
    /// One extra leading forward before braiding begins, separation kept on.
    /// Lower peak memory, exposes ARs on activation-only backwards.
    MemoryEfficient,
}

/// Per-device phase boundaries, recorded as action-list indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceMeta {
    /// Un-braided forwards issued before the first braid.
    pub warmup_fill: usize,
    /// Index of the first braided action, when one exists.
    pub first_braid: Option<usize>,
    /// Index of the first steady-phase action (first chunk-0 braid for the
    /// synergistic schedule, first backward otherwise).
    pub steady_start: Option<usize>,
    /// Index of the first action with no forward work left on the device.
    pub cooldown_start: Option<usize>,
}

/// Ordered action lists, one per device, plus generation metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleProgram {
    pub kind: ScheduleKind,
    pub cfg: ParallelConfig,
    pub variant: Option<WarmupVariant>,
    /// Forward traversal the schedule assumes (V-shape or parallel).
    pub order: Vec<SlotId>,
    pub per_device: Vec<Vec<Action>>,
    pub device_meta: Vec<DeviceMeta>,
}

impl ScheduleProgram {
    /// Counting invariant: per (microbatch, chunk) exactly one forward and a
    /// complete backward (one Bfull, or one Bact plus one W), in order.
    pub fn check_complete(&self) -> Result<(), String> {
        for (d, actions) in self.per_device.iter().enumerate() {
            for c in 0..self.cfg.v {
                let chunk = SlotId::new(d, c);
                for mb in 0..self.cfg.m {
                    let mut fwd = 0usize;
                    let mut bact = 0usize;
                    let mut bfull = 0usize;
                    let mut w = 0usize;
                    let mut fwd_pos = None;
                    let mut b_pos = None;
                    let mut w_pos = None;
                    for (i, a) in actions.iter().enumerate() {
                        if a.chunk() != chunk || a.is_transfer() {
                            continue;
                        }
                        if a.fwd_mb() == Some(mb) {
                            fwd += 1;
                            fwd_pos = Some(i);
                        }
                        if a.bwd_mb() == Some(mb) {
                            match a {
                                Action::Bfull { .. } => {
                                    bfull += 1;
                                    b_pos = Some(i);
                                }
                                Action::Bact { .. } => {
                                    bact += 1;
                                    b_pos = Some(i);
                                }
                                Action::W { .. } | Action::FandW { .. } => {
                                    w += 1;
                                    w_pos = Some(i);
                                }
                                Action::FandB { separate_w, .. } => {
                                    if *separate_w {
                                        bact += 1;
                                    } else {
                                        bfull += 1;
                                    }
                                    b_pos = Some(i);
                                }
                                _ => {}
                            }
                        }
                    }
                    let ok = fwd == 1
                        && ((bfull == 1 && bact == 0 && w == 0)
                            || (bfull == 0 && bact == 1 && w == 1));
                    if !ok {
                        return Err(format!(
                            "device {d} chunk {c} mb {mb}: F={fwd} Bfull={bfull} Bact={bact} W={w}"
                        ));
                    }
                    if fwd_pos > b_pos {
                        return Err(format!(
                            "device {d} chunk {c} mb {mb}: forward after backward"
                        ));
                    }
                    if let (Some(b), Some(wp)) = (b_pos, w_pos) {
                        if b > wp {
                            return Err(format!(
                                "device {d} chunk {c} mb {mb}: Bact after W"
                            ));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScheduleError {
    #[error("schedule requires 2 virtual stages per device, got {0}")]
    UnsupportedVirtualStages(usize),
    #[error("schedule needs at least {min_m} microbatches, got {m}")]
    TooFewMicrobatches { m: usize, min_m: usize },
    #[error(
        "offload of {fraction} quantum takes {t_o} which is not less than \
         the forward time {t_f}"
    )]
    OffloadTooSlow {
        fraction: Time,
        t_o: Time,
        t_f: Time,
    },
    #[error("offloading applies only to the synergistic schedule, got {0}")]
    NotStpProgram(&'static str),
    #[error("stage plan has {plan_devices} devices but config has p={p}")]
    PlanMismatch { plan_devices: usize, p: usize },
}

fn check_plan(plan: &StagePlan, cfg: &ParallelConfig) -> Result<(), ScheduleError> {
    if cfg.v != 2 {
        return Err(ScheduleError::UnsupportedVirtualStages(cfg.v));
    }
    if plan.devices() != cfg.p || plan.vstages() != cfg.v {
        return Err(ScheduleError::PlanMismatch {
            plan_devices: plan.devices(),
            p: cfg.p,
        });
    }
    Ok(())
}

/// Interleaved 1F1B: parallel virtual-stage dataflow, Megatron's warm-up
/// rule for two chunks, merged backwards throughout.
///
/// Forwards and backwards are consumed in groups of `p` microbatches per
/// chunk; chunk groups ascend for forwards and descend for backwards.
pub fn schedule_1f1b_interleaved(
    plan: &StagePlan,
    cfg: &ParallelConfig,
) -> Result<ScheduleProgram, ScheduleError> {
    check_plan(plan, cfg)?;
    let (p, m, v) = (cfg.p, cfg.m, cfg.v);
    let total = v * m;

    let group_order = |reversed: bool| -> Vec<(usize, usize)> {
        let mut seq = Vec::with_capacity(total);
        let mut base = 0usize;
        while base < m {
            for c in 0..v {
                let chunk = if reversed { v - 1 - c } else { c };
                for mb in base..(base + p).min(m) {
                    seq.push((chunk, mb));
                }
            }
            base += p;
        }
        seq
    };
    let fwd_seq = group_order(false);
    let bwd_seq = group_order(true);

    let mut per_device = Vec::with_capacity(p);
    let mut device_meta = Vec::with_capacity(p);
    for d in 0..p {
        let warmup = (2 * (p - d - 1) + (v - 1) * p).min(total);
        let mut actions = Vec::with_capacity(2 * total);
        let mut f = fwd_seq.iter();
        let mut b = bwd_seq.iter();
        for _ in 0..warmup {
            let &(c, mb) = f.next().unwrap();
            actions.push(Action::F {
                chunk: SlotId::new(d, c),
                mb,
            });
        }
        let steady_start = (warmup < total).then_some(actions.len());
        for &(c, mb) in f {
            actions.push(Action::F {
                chunk: SlotId::new(d, c),
                mb,
            });
            let &(bc, bmb) = b.next().unwrap();
            actions.push(Action::Bfull {
                chunk: SlotId::new(d, bc),
                mb: bmb,
            });
        }
        let cooldown_start = actions.len();
        for &(bc, bmb) in b {
            actions.push(Action::Bfull {
                chunk: SlotId::new(d, bc),
                mb: bmb,
            });
        }
        per_device.push(actions);
        device_meta.push(DeviceMeta {
            warmup_fill: warmup,
            first_braid: None,
            steady_start,
            cooldown_start: Some(cooldown_start),
        });
    }

    Ok(ScheduleProgram {
        kind: ScheduleKind::Interleaved1F1B,
        cfg: cfg.clone(),
        variant: None,
        order: parallel_order(p, v),
        per_device,
        device_meta,
    })
}

pub use planner::{schedule_stp, schedule_zbv};

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(p: usize, m: usize) -> (StagePlan, ParallelConfig) {
        let cfg = ParallelConfig::new(p, m);
        (StagePlan::uniform(&cfg), cfg)
    }

    fn chunks(actions: &[Action]) -> Vec<(char, usize, usize)> {
        actions
            .iter()
            .map(|a| match a {
                Action::F { chunk, mb } => ('F', chunk.vstage, *mb),
                Action::Bfull { chunk, mb } => ('B', chunk.vstage, *mb),
                other => panic!("unexpected action {other:?}"),
            })
            .collect()
    }

    #[test]
    fn interleaved_single_device_single_microbatch() {
        let (plan, cfg) = uniform(1, 1);
        let prog = schedule_1f1b_interleaved(&plan, &cfg).unwrap();
        assert_eq!(
            chunks(&prog.per_device[0]),
            vec![('F', 0, 0), ('F', 1, 0), ('B', 1, 0), ('B', 0, 0)]
        );
        prog.check_complete().unwrap();
    }

    #[test]
    fn interleaved_matches_hand_trace_p2_m4() {
        let (plan, cfg) = uniform(2, 4);
        let prog = schedule_1f1b_interleaved(&plan, &cfg).unwrap();
        // Device 0: warm-up of 3p-2 = 4 forwards, then 1F1B, then drain.
        assert_eq!(
            chunks(&prog.per_device[0]),
            vec![
                ('F', 0, 0),
                ('F', 0, 1),
                ('F', 1, 0),
                ('F', 1, 1),
                ('F', 0, 2),
                ('B', 1, 0),
                ('F', 0, 3),
                ('B', 1, 1),
                ('F', 1, 2),
                ('B', 0, 0),
                ('F', 1, 3),
                ('B', 0, 1),
                ('B', 1, 2),
                ('B', 1, 3),
                ('B', 0, 2),
                ('B', 0, 3),
            ]
        );
        // Device 1 (last stage): warm-up of 2 forwards.
        assert_eq!(
            chunks(&prog.per_device[1])[..6],
            vec![
                ('F', 0, 0),
                ('F', 0, 1),
                ('F', 1, 0),
                ('B', 1, 0),
                ('F', 1, 1),
                ('B', 1, 1),
            ]
        );
        prog.check_complete().unwrap();
    }

    #[test]
    fn interleaved_warmup_depth_matches_megatron_rule() {
        let (plan, cfg) = uniform(4, 12);
        let prog = schedule_1f1b_interleaved(&plan, &cfg).unwrap();
        // Device 0 holds 3p-2 = 10 in-flight forward activations when its
        // first backward begins.
        assert_eq!(prog.device_meta[0].warmup_fill, 10);
        assert_eq!(prog.device_meta[3].warmup_fill, 4);
        prog.check_complete().unwrap();
    }

    #[test]
    fn interleaved_has_no_weight_actions() {
        let (plan, cfg) = uniform(4, 8);
        let prog = schedule_1f1b_interleaved(&plan, &cfg).unwrap();
        for actions in &prog.per_device {
            for a in actions {
                assert!(matches!(a, Action::F { .. } | Action::Bfull { .. }));
            }
        }
    }

    #[test]
    fn interleaved_rejects_other_virtual_stage_counts() {
        let mut cfg = ParallelConfig::new(2, 4);
        cfg.v = 3;
        let plan = StagePlan::uniform(&ParallelConfig::new(2, 4));
        assert!(matches!(
            schedule_1f1b_interleaved(&plan, &cfg),
            Err(ScheduleError::UnsupportedVirtualStages(3))
        ));
    }
}
