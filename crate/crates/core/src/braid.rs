//! Braided execution blocks.
//!
//! A block is an ordered sequence of fine-grained computation units on the
//! compute stream plus the all-reduce ops they emit on the communication
//! stream. Braiding interleaves one microbatch's forward units with an
//! earlier microbatch's backward units on the same chunk so that each
//! pass's ARs hide under the other pass's compute. Overlap pairing is fixed
//! by construction, not solved by an optimizer.
//!
//! Blocks are value objects; [`schedule_block`] computes their internal
//! timing given stream-free times and input-arrival gates, which is the
//! same code path the simulator uses.

use serde::{Deserialize, Serialize};

use crate::time::{saturating_sub, Time};
use crate::workload::{ChunkCosts, CostModel, SlotId, UnitKind};

/// Which pass a computation unit belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PassKind {
    F,
    Bact,
    Bw,
    /// Merged activation+weight backward. Blocks emit Bact/Bw sub-units on
    /// the compute stream instead; the variant exists for action-level use.
    Bfull,
}

/// One fine-grained unit on the compute stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComputationUnit {
    pub kind: UnitKind,
    pub pass: PassKind,
    pub microbatch: usize,
    pub chunk: SlotId,
    pub duration: Time,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArDirection {
    Fwd,
    Bwd,
}

/// An all-reduce op on the communication stream.
///
/// `anchor` is the compute-unit index whose completion fires the AR;
/// `consumer` the unit that cannot start before the AR completes (none for
/// the trailing forward AR, whose consumer is the downstream device);
/// `overlaps` the unit the construction pairs it with, or none when the AR
/// is exposed by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArOp {
    pub direction: ArDirection,
    pub anchor: usize,
    pub consumer: Option<usize>,
    pub overlaps: Option<usize>,
    pub duration: Time,
}

/// Shape of an execution block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockPattern {
    /// Forward braided with a full (merged) backward.
    FullBackward,
    /// Forward braided with an activation-only backward; weight work deferred.
    ActBackward,
    /// Forward braided with a stored weight-gradient computation.
    WeightDrain,
    ForwardOnly,
    BackwardFullOnly,
    BackwardActOnly,
    WeightOnly,
}

/// An ordered braid of computation units with its communication ops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionBlock {
    pub pattern: BlockPattern,
    pub chunk: SlotId,
    pub compute_seq: Vec<ComputationUnit>,
    pub comm_seq: Vec<ArOp>,
    pub fwd_mb: Option<usize>,
    pub bwd_mb: Option<usize>,
    /// Index of the unit that must finish before the forward input gate
    /// applies (the first forward unit), if the block carries a forward.
    first_fwd_unit: Option<usize>,
    first_bwd_unit: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BraidError {
    #[error(
        "braided forward microbatch {fwd_mb} must exceed backward microbatch {bwd_mb}"
    )]
    OrderViolation { fwd_mb: usize, bwd_mb: usize },
    #[error("braided unit lists span different chunk slots: {0:?} vs {1:?}")]
    ChunkMismatch(SlotId, SlotId),
}

const FWD_ORDER: [UnitKind; 4] = [
    UnitKind::PreAttn,
    UnitKind::Attn,
    UnitKind::PreMlp,
    UnitKind::Mlp,
];
const BWD_ORDER: [UnitKind; 4] = [
    UnitKind::Mlp,
    UnitKind::PreMlp,
    UnitKind::Attn,
    UnitKind::PreAttn,
];

fn kind_index(kind: UnitKind) -> usize {
    match kind {
        UnitKind::PreAttn => 0,
        UnitKind::Attn => 1,
        UnitKind::PreMlp => 2,
        UnitKind::Mlp => 3,
    }
}

/// The four forward units of one chunk, in dataflow order.
pub fn forward_units(costs: &ChunkCosts, mb: usize, chunk: SlotId) -> Vec<ComputationUnit> {
    FWD_ORDER
        .iter()
        .map(|&kind| ComputationUnit {
            kind,
            pass: PassKind::F,
            microbatch: mb,
            chunk,
            duration: costs.f[kind_index(kind)].clone(),
        })
        .collect()
}

/// The four activation-gradient units of one chunk, in reverse dataflow order.
pub fn backward_act_units(costs: &ChunkCosts, mb: usize, chunk: SlotId) -> Vec<ComputationUnit> {
    BWD_ORDER
        .iter()
        .map(|&kind| ComputationUnit {
            kind,
            pass: PassKind::Bact,
            microbatch: mb,
            chunk,
            duration: costs.b[kind_index(kind)].clone(),
        })
        .collect()
}

/// Weight-gradient units (Mlp then Attn, matching backward traversal).
/// Zero-duration entries are skipped.
pub fn backward_w_units(costs: &ChunkCosts, mb: usize, chunk: SlotId) -> Vec<ComputationUnit> {
    [UnitKind::Mlp, UnitKind::Attn]
        .iter()
        .filter(|&&kind| !costs.w[kind_index(kind)].is_zero())
        .map(|&kind| ComputationUnit {
            kind,
            pass: PassKind::Bw,
            microbatch: mb,
            chunk,
            duration: costs.w[kind_index(kind)].clone(),
        })
        .collect()
}

struct BlockBuilder {
    units: Vec<ComputationUnit>,
    ars: Vec<ArOp>,
    ar_half: Time,
    first_fwd: Option<usize>,
    first_bwd: Option<usize>,
}

impl BlockBuilder {
    fn new(ar_half: Time) -> Self {
        BlockBuilder {
            units: Vec::new(),
            ars: Vec::new(),
            ar_half,
            first_fwd: None,
            first_bwd: None,
        }
    }

    fn push(&mut self, unit: ComputationUnit) -> usize {
        if unit.pass == PassKind::F && self.first_fwd.is_none() {
            self.first_fwd = Some(self.units.len());
        }
        if matches!(unit.pass, PassKind::Bact) && self.first_bwd.is_none() {
            self.first_bwd = Some(self.units.len());
        }
        self.units.push(unit);
        self.units.len() - 1
    }

    fn push_ar(
        &mut self,
        direction: ArDirection,
        anchor: usize,
        consumer: Option<usize>,
        overlaps: Option<usize>,
    ) {
        if self.ar_half.is_zero() {
            return;
        }
        self.ars.push(ArOp {
            direction,
            anchor,
            consumer,
            overlaps,
            duration: self.ar_half.clone(),
        });
    }

    fn finish(self, pattern: BlockPattern, chunk: SlotId) -> ExecutionBlock {
        let fwd_mb = self
            .units
            .iter()
            .find(|u| u.pass == PassKind::F)
            .map(|u| u.microbatch);
        let bwd_mb = self
            .units
            .iter()
            .find(|u| matches!(u.pass, PassKind::Bact | PassKind::Bw))
            .map(|u| u.microbatch);
        ExecutionBlock {
            pattern,
            chunk,
            compute_seq: self.units,
            comm_seq: self.ars,
            fwd_mb,
            bwd_mb,
            first_fwd_unit: self.first_fwd,
            first_bwd_unit: self.first_bwd,
        }
    }
}

/// Appends a backward element (Bact unit plus, for full backwards, its Bw
/// sub-span) and its AR. With `with_w` the backward AR overlaps the Bw
/// sub-span, the naturally-overlapped case; separated backwards leave it
/// for the braid to cover, or exposed.
fn push_bwd_element(
    b: &mut BlockBuilder,
    costs: &ChunkCosts,
    mb: usize,
    chunk: SlotId,
    kind: UnitKind,
    with_w: bool,
    pending: &mut Option<(usize, ArDirection)>,
) {
    let bact = ComputationUnit {
        kind,
        pass: PassKind::Bact,
        microbatch: mb,
        chunk,
        duration: costs.b[kind_index(kind)].clone(),
    };
    let idx = b.push(bact);
    if let Some((ar_anchor, dir)) = pending.take() {
        // This Bact unit consumes the previously fired backward AR.
        let ar = b
            .ars
            .iter_mut()
            .rev()
            .find(|a| a.anchor == ar_anchor && a.direction == dir);
        if let Some(ar) = ar {
            ar.consumer = Some(idx);
        }
    }
    if matches!(kind, UnitKind::Mlp | UnitKind::Attn) {
        let mut overlap = None;
        if with_w {
            let w_dur = costs.w[kind_index(kind)].clone();
            if !w_dur.is_zero() {
                let w_idx = b.push(ComputationUnit {
                    kind,
                    pass: PassKind::Bw,
                    microbatch: mb,
                    chunk,
                    duration: w_dur,
                });
                overlap = Some(w_idx);
            }
        }
        b.push_ar(ArDirection::Bwd, idx, None, overlap);
        *pending = Some((idx, ArDirection::Bwd));
    }
}

/// Braids one microbatch's forward with an earlier microbatch's backward on
/// the same chunk, alternating units starting from the forward. Forward ARs
/// are slated to overlap the next backward element; backward ARs overlap
/// their own Bw sub-span when the backward is full, otherwise the next
/// forward unit.
pub fn braid_block(
    fwd: Option<(&ChunkCosts, usize)>,
    bwd: Option<(&ChunkCosts, usize)>,
    separate_w: bool,
    chunk: SlotId,
) -> Result<ExecutionBlock, BraidError> {
    match (fwd, bwd) {
        (Some((costs, mb)), None) => Ok(forward_only_block(costs, mb, chunk)),
        (None, Some((costs, mb))) => Ok(backward_only_block(costs, mb, chunk, separate_w)),
        (None, None) => panic!("braid_block needs at least one pass"),
        (Some((fc, fwd_mb)), Some((bc, bwd_mb))) => {
            if fwd_mb <= bwd_mb {
                return Err(BraidError::OrderViolation { fwd_mb, bwd_mb });
            }
            let mut b = BlockBuilder::new(fc.ar_half.clone());
            let mut pending_bwd: Option<(usize, ArDirection)> = None;
            let mut pending_fwd_ar: Option<usize> = None;
            for step in 0..4 {
                let f_kind = FWD_ORDER[step];
                let f_idx = b.push(ComputationUnit {
                    kind: f_kind,
                    pass: PassKind::F,
                    microbatch: fwd_mb,
                    chunk,
                    duration: fc.f[kind_index(f_kind)].clone(),
                });
                if let Some(anchor) = pending_fwd_ar.take() {
                    if let Some(ar) = b
                        .ars
                        .iter_mut()
                        .rev()
                        .find(|a| a.anchor == anchor && a.direction == ArDirection::Fwd)
                    {
                        ar.consumer = Some(f_idx);
                    }
                }
                let fwd_fires = matches!(f_kind, UnitKind::Attn | UnitKind::Mlp);

                let b_kind = BWD_ORDER[step];
                let before_bwd = b.units.len();
                push_bwd_element(
                    &mut b,
                    bc,
                    bwd_mb,
                    chunk,
                    b_kind,
                    !separate_w,
                    &mut pending_bwd,
                );
                if fwd_fires {
                    // Forward AR overlaps the backward element that follows it.
                    b.push_ar(ArDirection::Fwd, f_idx, None, Some(before_bwd));
                    pending_fwd_ar = Some(f_idx);
                }
                if separate_w {
                    // The backward AR fired by this element overlaps the next
                    // forward unit (filled on the next step, if any).
                    if let Some((anchor, ArDirection::Bwd)) = pending_bwd {
                        let next_fwd = b.units.len();
                        if step < 3 {
                            if let Some(ar) = b
                                .ars
                                .iter_mut()
                                .rev()
                                .find(|a| a.anchor == anchor && a.direction == ArDirection::Bwd)
                            {
                                ar.overlaps = Some(next_fwd);
                            }
                        }
                    }
                }
            }
            let pattern = if separate_w {
                BlockPattern::ActBackward
            } else {
                BlockPattern::FullBackward
            };
            Ok(b.finish(pattern, chunk))
        }
    }
}

/// Un-braided forward: warm-up and cool-down need these. Both ARs are
/// exposed; nothing runs concurrently to hide them.
pub fn forward_only_block(costs: &ChunkCosts, mb: usize, chunk: SlotId) -> ExecutionBlock {
    let mut b = BlockBuilder::new(costs.ar_half.clone());
    let mut prev_ar: Option<usize> = None;
    for kind in FWD_ORDER {
        let idx = b.push(ComputationUnit {
            kind,
            pass: PassKind::F,
            microbatch: mb,
            chunk,
            duration: costs.f[kind_index(kind)].clone(),
        });
        if let Some(anchor) = prev_ar.take() {
            if let Some(ar) = b.ars.iter_mut().rev().find(|a| a.anchor == anchor) {
                ar.consumer = Some(idx);
            }
        }
        if matches!(kind, UnitKind::Attn | UnitKind::Mlp) {
            b.push_ar(ArDirection::Fwd, idx, None, None);
            prev_ar = Some(idx);
        }
    }
    b.finish(BlockPattern::ForwardOnly, chunk)
}

/// Un-braided backward. Full backwards hide their ARs under the weight
/// sub-spans; separated (activation-only) backwards expose them.
pub fn backward_only_block(
    costs: &ChunkCosts,
    mb: usize,
    chunk: SlotId,
    separate_w: bool,
) -> ExecutionBlock {
    let mut b = BlockBuilder::new(costs.ar_half.clone());
    let mut pending: Option<(usize, ArDirection)> = None;
    for kind in BWD_ORDER {
        push_bwd_element(&mut b, costs, mb, chunk, kind, !separate_w, &mut pending);
    }
    let pattern = if separate_w {
        BlockPattern::BackwardActOnly
    } else {
        BlockPattern::BackwardFullOnly
    };
    b.finish(pattern, chunk)
}

/// Stored weight-gradient computation, alone on the compute stream.
pub fn weight_only_block(costs: &ChunkCosts, mb: usize, chunk: SlotId) -> ExecutionBlock {
    let mut b = BlockBuilder::new(Time::zero());
    for unit in backward_w_units(costs, mb, chunk) {
        b.push(unit);
    }
    b.finish(BlockPattern::WeightOnly, chunk)
}

/// Braids a forward with a stored weight-gradient computation of an earlier
/// microbatch on the same chunk. The forward ARs hide under the weight units.
pub fn forward_weight_block(
    fwd_costs: &ChunkCosts,
    fwd_mb: usize,
    w_costs: &ChunkCosts,
    w_mb: usize,
    chunk: SlotId,
) -> Result<ExecutionBlock, BraidError> {
    if fwd_mb <= w_mb {
        return Err(BraidError::OrderViolation {
            fwd_mb,
            bwd_mb: w_mb,
        });
    }
    let mut b = BlockBuilder::new(fwd_costs.ar_half.clone());
    let w_units = backward_w_units(w_costs, w_mb, chunk);
    let mut w_iter = w_units.into_iter();
    let mut prev_ar: Option<usize> = None;
    for kind in FWD_ORDER {
        let idx = b.push(ComputationUnit {
            kind,
            pass: PassKind::F,
            microbatch: fwd_mb,
            chunk,
            duration: fwd_costs.f[kind_index(kind)].clone(),
        });
        if let Some(anchor) = prev_ar.take() {
            if let Some(ar) = b.ars.iter_mut().rev().find(|a| a.anchor == anchor) {
                ar.consumer = Some(idx);
            }
        }
        if matches!(kind, UnitKind::Attn | UnitKind::Mlp) {
            let overlap = w_iter.next().map(|w| b.push(w));
            b.push_ar(ArDirection::Fwd, idx, None, overlap);
            prev_ar = Some(idx);
        }
    }
    // Leftover weight units (none with the two-unit weight split).
    for w in w_iter {
        b.push(w);
    }
    Ok(b.finish(BlockPattern::WeightDrain, chunk))
}

/// Internal timing of a block relative to stream-free times and input gates.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTiming {
    /// Start/end per compute unit, aligned with `compute_seq`.
    pub unit_spans: Vec<(Time, Time)>,
    /// Start/end per AR, aligned with `comm_seq`.
    pub ar_spans: Vec<(Time, Time)>,
    /// Compute-stream stall plus trailing-AR time attributable to exposed ARs.
    pub exposed: Time,
    /// Completion of every unit and AR; the next action starts here.
    pub end: Time,
    /// When the chunk's forward output is available downstream.
    pub fwd_output: Option<Time>,
    /// When the chunk's input gradient is available downstream.
    pub bwd_output: Option<Time>,
    /// Sum of unit durations as executed (contention included).
    pub busy: Time,
}

/// Walks a block's units and ARs in order. A unit starts when the compute
/// stream is past its predecessor, its pass's input has arrived, and any AR
/// it consumes has completed; ARs serialize on the communication stream.
/// The tagged unit inflates by `contention` when its AR is in flight while
/// it runs.
pub fn schedule_block(
    block: &ExecutionBlock,
    cm: &CostModel,
    compute_free: &Time,
    comm_free: &Time,
    fwd_input_ready: &Time,
    bwd_input_ready: &Time,
) -> BlockTiming {
    let n = block.compute_seq.len();
    let mut unit_spans: Vec<(Time, Time)> = Vec::with_capacity(n);
    let mut ar_spans: Vec<Option<(Time, Time)>> = vec![None; block.comm_seq.len()];
    let mut comm_cursor = comm_free.clone();
    let mut compute_cursor = compute_free.clone();
    let mut exposed = Time::zero();
    let mut busy = Time::zero();

    for (i, unit) in block.compute_seq.iter().enumerate() {
        let mut ready = compute_cursor.clone();
        if block.first_fwd_unit == Some(i) {
            ready = ready.max(fwd_input_ready.clone());
        }
        if block.first_bwd_unit == Some(i) {
            ready = ready.max(bwd_input_ready.clone());
        }
        // ARs this unit consumes must have completed; the wait is exposed
        // communication, not pipeline idle.
        let mut ar_gate = Time::zero();
        for (k, ar) in block.comm_seq.iter().enumerate() {
            if ar.consumer == Some(i) {
                if let Some((_, end)) = &ar_spans[k] {
                    ar_gate = ar_gate.max(end.clone());
                }
            }
        }
        let start = ready.clone().max(ar_gate.clone());
        if ar_gate > ready {
            exposed += &ar_gate - &ready;
        }

        // Contention: the slated AR is in flight while this unit runs.
        let mut duration = unit.duration.clone();
        let overlapped = block.comm_seq.iter().enumerate().any(|(k, ar)| {
            ar.overlaps == Some(i)
                && ar_spans[k]
                    .as_ref()
                    .is_some_and(|(s, e)| e > &start && s < &(&start + &unit.duration))
        });
        if overlapped && cm.contention != Time::one() {
            duration = duration * &cm.contention;
        }
        let end = &start + &duration;
        busy += duration;
        compute_cursor = end.clone();
        unit_spans.push((start, end.clone()));

        // Fire ARs anchored at this unit.
        for (k, ar) in block.comm_seq.iter().enumerate() {
            if ar.anchor == i {
                let s = comm_cursor.clone().max(end.clone());
                let e = &s + &ar.duration;
                comm_cursor = e.clone();
                ar_spans[k] = Some((s, e));
            }
        }
    }

    let last_unit_end = unit_spans
        .last()
        .map(|(_, e)| e.clone())
        .unwrap_or_else(|| compute_free.clone());
    let max_ar_end = ar_spans
        .iter()
        .flatten()
        .map(|(_, e)| e.clone())
        .max()
        .unwrap_or_else(Time::zero);
    // Any AR running past the last compute unit keeps the stream waiting.
    exposed += saturating_sub(&max_ar_end, &last_unit_end);
    let end = last_unit_end.max(max_ar_end);

    let fwd_output = block.fwd_mb.map(|_| {
        // Output leaves after the trailing forward AR (post-MLP), or the
        // last forward unit when ARs are zero-cost.
        let last_f_ar = block
            .comm_seq
            .iter()
            .enumerate()
            .filter(|(_, ar)| ar.direction == ArDirection::Fwd)
            .filter_map(|(k, _)| ar_spans[k].as_ref().map(|(_, e)| e.clone()))
            .max();
        last_f_ar.unwrap_or_else(|| {
            block
                .compute_seq
                .iter()
                .zip(&unit_spans)
                .filter(|(u, _)| u.pass == PassKind::F)
                .map(|(_, (_, e))| e.clone())
                .max()
                .unwrap()
        })
    });
    let bwd_output = block
        .compute_seq
        .iter()
        .zip(&unit_spans)
        .filter(|(u, _)| u.pass == PassKind::Bact)
        .map(|(_, (_, e))| e.clone())
        .max();

    BlockTiming {
        unit_spans,
        ar_spans: ar_spans.into_iter().map(|s| s.unwrap_or((Time::zero(), Time::zero()))).collect(),
        exposed,
        end,
        fwd_output,
        bwd_output,
        busy,
    }
}

/// Span and exposed communication of a standalone block: the duration from
/// its start to the completion of every unit and AR, with overlapped units
/// inflated by the contention factor.
pub fn block_span(block: &ExecutionBlock, cm: &CostModel) -> (Time, Time) {
    let zero = Time::zero();
    let t = schedule_block(block, cm, &zero, &zero, &zero, &zero);
    (t.end, t.exposed)
}
