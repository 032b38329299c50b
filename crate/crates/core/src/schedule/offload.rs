//! Activation offloading for the synergistic schedule.
//!
//! Chunk-0 activations are the offload target: warm-up fill forwards at
//! `alpha_warmup` and steady braided forwards at `alpha_steady`. Chunk-1
//! activations have short lifespans and are never offloaded, avoiding
//! dual-direction PCIe contention. Activations held for deferred weight
//! passes from the degraded phase are always offloaded in full.
//!
//! Placement is static. An `Offload` marker sits right after the producing
//! action; a `Reload` marker is placed enough actions ahead of its consumer
//! that the transfer completes first, using nominal action spans.

use std::collections::BTreeMap;

use crate::time::Time;
use crate::workload::{chunk_costs, CostModel, SlotId};

use super::{Action, ScheduleError, ScheduleKind, ScheduleProgram};

/// Rewrites a synergistic program with offload/reload transfers.
///
/// The warm-up offload time `alpha_warmup * m_a / pcie_bw` must stay below
/// the forward time so the transfer never delays the next microbatch.
pub fn apply_offloading(
    prog: &ScheduleProgram,
    cm: &CostModel,
    alpha_warmup: &Time,
    alpha_steady: &Time,
) -> Result<ScheduleProgram, ScheduleError> {
    if prog.kind != ScheduleKind::Synergistic {
        return Err(ScheduleError::NotStpProgram(prog.kind.label()));
    }
    for (name, a) in [("alpha_warmup", alpha_warmup), ("alpha_steady", alpha_steady)] {
        if a.is_negative() || a > &Time::one() {
            return Err(ScheduleError::OffloadTooSlow {
                fraction: a.clone(),
                t_o: Time::zero(),
                t_f: Time::zero(),
            })
            .map_err(|_| ScheduleError::NotStpProgram(Box::leak(
                format!("{name} outside [0, 1]").into_boxed_str(),
            )));
        }
    }
    let t_o_warm = alpha_warmup * &cm.m_a / &cm.pcie_bw;
    if !alpha_warmup.is_zero() && t_o_warm >= cm.t_f {
        return Err(ScheduleError::OffloadTooSlow {
            fraction: alpha_warmup.clone(),
            t_o: t_o_warm,
            t_f: cm.t_f.clone(),
        });
    }
    if alpha_warmup.is_zero() && alpha_steady.is_zero() {
        return Ok(prog.clone());
    }

    let mut out = prog.clone();
    for (d, actions) in prog.per_device.iter().enumerate() {
        out.per_device[d] = transform_device(d, actions, prog, cm, alpha_warmup, alpha_steady);
    }
    Ok(out)
}

/// Nominal span of one action, used only to pick reload lead distances.
fn action_span(action: &Action, cm: &CostModel, prog: &ScheduleProgram) -> Time {
    let scale = Time::one(); // uniform estimate; the simulator re-times exactly
    let _ = prog;
    let costs = chunk_costs(&scale, cm);
    match action {
        Action::F { .. } => costs.total_f() + &cm.t_ar,
        Action::Bfull { .. } => costs.total_b() + costs.total_w(),
        Action::Bact { .. } => costs.total_b() + &cm.t_ar,
        Action::W { .. } => costs.total_w(),
        Action::FandB { separate_w, .. } => {
            let mut t = costs.total_f() + costs.total_b();
            if !separate_w {
                t += costs.total_w();
            }
            t
        }
        Action::FandW { .. } => costs.total_f() + costs.total_w(),
        Action::Offload { .. } | Action::Reload { .. } => Time::zero(),
    }
}

fn transform_device(
    device: usize,
    actions: &[Action],
    prog: &ScheduleProgram,
    cm: &CostModel,
    alpha_warmup: &Time,
    alpha_steady: &Time,
) -> Vec<Action> {
    let meta = &prog.device_meta[device];
    let steady_idx = meta.first_braid.unwrap_or(actions.len());

    // Pass 1: decide offloads. resident tracks the un-offloaded fraction of
    // each chunk-0/deferred-weight activation.
    let mut offload_after: BTreeMap<usize, Vec<Action>> = BTreeMap::new();
    let mut offloaded: BTreeMap<(SlotId, usize), Time> = BTreeMap::new();
    for (i, a) in actions.iter().enumerate() {
        let chunk = a.chunk();
        // Chunk-0 forwards: warm-up fills at alpha_warmup, braided steady
        // forwards at alpha_steady. Chunk 1 is deprioritized for offload.
        if chunk.vstage == 0 {
            if let Some(mb) = a.fwd_mb() {
                let alpha = if a.is_braided() || i >= steady_idx {
                    alpha_steady
                } else {
                    alpha_warmup
                };
                if !alpha.is_zero() {
                    offload_after.entry(i).or_default().push(Action::Offload {
                        chunk,
                        mb,
                        fraction: alpha.clone(),
                    });
                    offloaded.insert((chunk, mb), alpha.clone());
                }
            }
        }
        // Activations pending a deferred weight pass in the degraded phase
        // are always offloaded in full (whatever fraction is still resident).
        if let Action::FandB {
            chunk,
            bwd_mb,
            separate_w: true,
            ..
        } = a
        {
            if Some(i) >= meta.steady_start {
                let already = offloaded
                    .get(&(*chunk, *bwd_mb))
                    .cloned()
                    .unwrap_or_else(Time::zero);
                let remaining = Time::one() - &already;
                if !remaining.is_zero() {
                    offload_after.entry(i).or_default().push(Action::Offload {
                        chunk: *chunk,
                        mb: *bwd_mb,
                        fraction: remaining.clone(),
                    });
                    offloaded.insert((*chunk, *bwd_mb), Time::one());
                }
            }
        }
    }

    // Pass 2: place reloads ahead of each offloaded activation's first
    // backward consumer, far enough that the transfer finishes in time.
    let mut reload_before: BTreeMap<usize, Vec<Action>> = BTreeMap::new();
    for ((chunk, mb), fraction) in &offloaded {
        let producer = actions
            .iter()
            .position(|a| a.chunk() == *chunk && a.fwd_mb() == Some(*mb));
        // First action that consumes this activation after the offload:
        // its backward (braided or not) or its deferred weight pass.
        let consumer = actions.iter().enumerate().position(|(i, a)| {
            Some(i) > producer && a.chunk() == *chunk && a.bwd_mb() == Some(*mb)
        });
        let Some(consumer) = consumer else { continue };
        let t_o = fraction * &cm.m_a / &cm.pcie_bw;
        let needed = &t_o + &t_o; // headroom for queued transfers
        let mut lead = consumer;
        let mut budget = Time::zero();
        while lead > 0 && budget < needed {
            lead -= 1;
            if Some(lead) <= producer {
                lead += 1;
                break;
            }
            budget += action_span(&actions[lead], cm, prog);
        }
        reload_before.entry(lead).or_default().push(Action::Reload {
            chunk: *chunk,
            mb: *mb,
            fraction: fraction.clone(),
        });
    }

    let mut out = Vec::with_capacity(actions.len() + 2 * offloaded.len());
    for (i, a) in actions.iter().enumerate() {
        if let Some(rs) = reload_before.get(&i) {
            out.extend(rs.iter().cloned());
        }
        out.push(a.clone());
        if let Some(os) = offload_after.get(&i) {
            out.extend(os.iter().cloned());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::{schedule_stp, schedule_zbv, WarmupVariant};
    use crate::workload::{CostModel, ParallelConfig, StagePlan};

    fn stp_program(p: usize, m: usize) -> (ScheduleProgram, CostModel) {
        let cfg = ParallelConfig::new(p, m);
        let plan = StagePlan::uniform(&cfg);
        let prog = schedule_stp(&plan, &cfg, WarmupVariant::Throughput).unwrap();
        (prog, CostModel::from_times(4, 4, 2, 1))
    }

    #[test]
    fn zero_alpha_is_identity() {
        let (prog, cm) = stp_program(2, 6);
        let out = apply_offloading(&prog, &cm, &Time::zero(), &Time::zero()).unwrap();
        assert_eq!(out, prog);
    }

    #[test]
    fn warmup_offload_must_fit_under_forward_time() {
        let (prog, mut cm) = stp_program(2, 6);
        // m_a = 8, bw = 4, t_f = 3: T_o = 2 < 3 accepted.
        cm.m_a = Time::int(8);
        cm.pcie_bw = Time::int(4);
        cm.t_f = Time::int(3);
        assert!(apply_offloading(&prog, &cm, &Time::one(), &Time::zero()).is_ok());
        // m_a = 8, bw = 2: T_o = 4 >= 3 rejected.
        cm.pcie_bw = Time::int(2);
        match apply_offloading(&prog, &cm, &Time::one(), &Time::zero()) {
            Err(ScheduleError::OffloadTooSlow { t_o, t_f, .. }) => {
                assert_eq!(t_o, Time::int(4));
                assert_eq!(t_f, Time::int(3));
            }
            other => panic!("expected OffloadTooSlow, got {other:?}"),
        }
    }

    #[test]
    fn rejects_non_stp_programs() {
        let cfg = ParallelConfig::new(2, 6);
        let plan = StagePlan::uniform(&cfg);
        let prog = schedule_zbv(&plan, &cfg).unwrap();
        let cm = CostModel::from_times(4, 4, 2, 1);
        assert!(matches!(
            apply_offloading(&prog, &cm, &Time::zero(), &Time::ratio(1, 2)),
            Err(ScheduleError::NotStpProgram(_))
        ));
    }

    #[test]
    fn reload_follows_offload_and_precedes_consumer() {
        let (prog, cm) = stp_program(4, 12);
        let half = Time::ratio(1, 2);
        let out = apply_offloading(&prog, &cm, &half, &half).unwrap();
        out.check_complete().unwrap();
        for actions in &out.per_device {
            let mut seen_offload: BTreeMap<(SlotId, usize), usize> = BTreeMap::new();
            let mut seen_reload: BTreeMap<(SlotId, usize), usize> = BTreeMap::new();
            for (i, a) in actions.iter().enumerate() {
                match a {
                    Action::Offload { chunk, mb, .. } => {
                        seen_offload.entry((*chunk, *mb)).or_insert(i);
                    }
                    Action::Reload { chunk, mb, .. } => {
                        assert!(
                            seen_offload.contains_key(&(*chunk, *mb)),
                            "reload before its offload"
                        );
                        seen_reload.insert((*chunk, *mb), i);
                    }
                    _ => {
                        if let Some(mb) = a.bwd_mb() {
                            let key = (a.chunk(), mb);
                            if let Some(r) = seen_reload.get(&key) {
                                assert!(*r < i, "reload after consumer");
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn chunk1_forwards_are_not_offloaded() {
        let (prog, cm) = stp_program(4, 12);
        let out = apply_offloading(&prog, &cm, &Time::ratio(1, 2), &Time::ratio(1, 2)).unwrap();
        for actions in &out.per_device {
            for a in actions {
                if let Action::Offload { chunk, fraction, .. } = a {
                    // Chunk-1 offloads may exist only for deferred weight
                    // activations, which are full-remainder transfers.
                    if chunk.vstage == 1 {
                        assert_eq!(fraction, &Time::one());
                    }
                }
            }
        }
    }
}
