//! Event-driven two-region simulator.
//!
//! Each simulated cycle carries one implicit rising clock edge and runs:
//! R1 apply stimulus to inputs; R2 settle combinational processes to a
//! fixpoint; R3 fire edge-triggered processes (all nonblocking RHS values
//! are computed before any LHS commits); R4 re-settle, cascading further
//! edge firings caused by the commits; then record the cycle in the trace.
//!
//! Values are 3-state (0/1/X); uninitialized regs start all-X. Clock inputs
//! (recognized by name) are driven implicitly and read as constant 1; every
//! edge event naming a clock input fires once per cycle.

use crate::ast::{AssignKind, BinaryOp, EdgeKind, UnaryOp};
use crate::elaborate::{ElabExpr, ElabExprKind, ElabLValue, ElabStmt, ElaboratedDesign, Process, SignalId};
use crate::stimulus::{PortRoles, Stimulus};
use crate::value::Value;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("combinational logic did not converge at cycle {cycle}")]
    CombLoopDetected { cycle: u64 },
    #[error("unknown signal '{0}'")]
    UnknownSignal(String),
    #[error("time {time} is beyond the trace horizon {horizon}")]
    TimeBeyondHorizon { time: u64, horizon: u64 },
    #[error("stimulus drives unknown input '{0}'")]
    UnknownInput(String),
}

/// Per-signal time-ordered value sequences. Every traced signal has an entry
/// at time 0; later entries record changes only.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub signals: BTreeMap<String, Vec<(u64, Value)>>,
    pub horizon: u64,
}

impl Trace {
    pub fn new() -> Trace {
        Trace { signals: BTreeMap::new(), horizon: 0 }
    }

    /// Value in effect at `time`: the last change at or before it.
    pub fn query(&self, signal: &str, time: u64) -> Result<Value, SimError> {
        let seq = self.signals.get(signal).ok_or_else(|| SimError::UnknownSignal(signal.to_string()))?;
        if time > self.horizon {
            return Err(SimError::TimeBeyondHorizon { time, horizon: self.horizon });
        }
        let idx = seq.partition_point(|(t, _)| *t <= time);
        if idx == 0 {
            // no entry at or before `time`; all traces start at 0 so this
            // only happens for an empty sequence
            return Ok(Value::x1());
        }
        Ok(seq[idx - 1].1)
    }

    /// Append another trace after this one, shifting its times past the
    /// current horizon. Used to score several stimulus runs as one report.
    pub fn append_shifted(&mut self, other: &Trace) -> u64 {
        let offset = if self.signals.is_empty() { 0 } else { self.horizon + 1 };
        for (name, seq) in &other.signals {
            let entry = self.signals.entry(name.clone()).or_default();
            for (t, v) in seq {
                entry.push((t + offset, *v));
            }
        }
        self.horizon = offset + other.horizon;
        offset
    }

    /// JSON form `{"signal": [[time, "binstring"], ...]}`.
    pub fn to_json(&self) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        for (name, seq) in &self.signals {
            let arr: Vec<serde_json::Value> = seq
                .iter()
                .map(|(t, v)| serde_json::json!([t, v.to_bin_string()]))
                .collect();
            map.insert(name.clone(), serde_json::Value::Array(arr));
        }
        serde_json::Value::Object(map)
    }

    pub fn from_json(v: &serde_json::Value) -> Option<Trace> {
        let obj = v.as_object()?;
        let mut signals = BTreeMap::new();
        let mut horizon = 0;
        for (name, arr) in obj {
            let mut seq = Vec::new();
            for entry in arr.as_array()? {
                let pair = entry.as_array()?;
                let t = pair.first()?.as_u64()?;
                let val = Value::from_bin_string(pair.get(1)?.as_str()?)?;
                horizon = horizon.max(t);
                seq.push((t, val));
            }
            signals.insert(name.clone(), seq);
        }
        Some(Trace { signals, horizon })
    }
}

impl Default for Trace {
    fn default() -> Self {
        Self::new()
    }
}

/// Deterministic simulation of `elab` under `stim`.
pub fn simulate(elab: &ElaboratedDesign, stim: &Stimulus) -> Result<Trace, SimError> {
    let mut engine = Engine::new(elab, stim)?;
    engine.run()
}

struct Engine<'e> {
    elab: &'e ElaboratedDesign,
    stim: &'e Stimulus,
    values: Vec<Value>,
    /// Monotone change stamp per signal.
    stamps: Vec<u64>,
    counter: u64,
    /// Per-process watermark: highest counter value seen at last execution.
    watermarks: Vec<u64>,
    comb_procs: Vec<usize>,
    seq_procs: Vec<usize>,
    /// Signal value at the last edge evaluation point.
    edge_base: Vec<Value>,
    clock_ids: Vec<SignalId>,
    data_ids: Vec<SignalId>,
    reset_ids: Vec<(SignalId, bool)>, // (id, active_high)
    settle_bound: u64,
    nba_queue: Vec<(SignalId, u32, u32, Value)>,
}

impl<'e> Engine<'e> {
    fn new(elab: &'e ElaboratedDesign, stim: &'e Stimulus) -> Result<Self, SimError> {
        let n = elab.signals.len();
        let values: Vec<Value> = elab.signals.iter().map(|s| Value::all_x(s.width)).collect();
        let mut comb_procs = Vec::new();
        let mut seq_procs = Vec::new();
        let mut comb_assign_count = 0u64;
        for (i, p) in elab.processes.iter().enumerate() {
            match p {
                Process::Assign { .. } => {
                    comb_procs.push(i);
                    comb_assign_count += 1;
                }
                Process::Comb { body, .. } => {
                    comb_procs.push(i);
                    comb_assign_count += count_assigns(body);
                }
                Process::Seq { .. } => seq_procs.push(i),
            }
        }
        let data_ids = stim
            .inputs
            .iter()
            .map(|n| elab.lookup(n).ok_or_else(|| SimError::UnknownInput(n.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        let reset_ids = stim
            .resets
            .iter()
            .map(|(n, high)| elab.lookup(n).map(|id| (id, *high)).ok_or_else(|| SimError::UnknownInput(n.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        let roles = PortRoles::classify(elab);
        Ok(Engine {
            elab,
            stim,
            edge_base: values.clone(),
            values,
            stamps: vec![1; n],
            counter: 1,
            watermarks: vec![0; elab.processes.len()],
            comb_procs,
            seq_procs,
            clock_ids: roles.clocks,
            data_ids,
            reset_ids,
            settle_bound: 2 * comb_assign_count.max(2),
            nba_queue: Vec::new(),
        })
    }

    fn run(&mut self) -> Result<Trace, SimError> {
        let total = self.stim.total_cycles().max(1);
        let mut trace = Trace::new();
        trace.horizon = total - 1;
        let mut last_recorded: Vec<Option<Value>> = vec![None; self.values.len()];

        for cycle in 0..total {
            // R1: stimulus
            for idx in 0..self.data_ids.len() {
                let id = self.data_ids[idx];
                let w = self.elab.width_of(id);
                self.write_signal(id, Value::known(w, self.stim.data_value(idx, cycle)));
            }
            for i in 0..self.reset_ids.len() {
                let (id, high) = self.reset_ids[i];
                self.write_signal(id, Value::known(1, self.stim.reset_value(high, cycle)));
            }
            for i in 0..self.clock_ids.len() {
                let id = self.clock_ids[i];
                self.write_signal(id, Value::known(1, 1));
            }

            // R2: combinational settle
            self.settle(cycle)?;

            // R3/R4: edge firing rounds with cascade
            let mut round = 0u64;
            let mut first_round = true;
            loop {
                let fired = self.fired_procs(first_round);
                // edges are consumed once evaluated
                self.edge_base.copy_from_slice(&self.values);
                if fired.is_empty() {
                    break;
                }
                round += 1;
                if round > 2 * self.seq_procs.len() as u64 + 2 {
                    return Err(SimError::CombLoopDetected { cycle });
                }
                self.nba_queue.clear();
                let elab = self.elab;
                for pi in fired {
                    if let Process::Seq { body, .. } = &elab.processes[pi] {
                        self.exec_body(body)?;
                    }
                }
                // commit all nonblocking assignments simultaneously
                let queue = std::mem::take(&mut self.nba_queue);
                for (sig, msb, lsb, v) in queue {
                    let cur = self.values[sig.index()];
                    let next = if msb - lsb + 1 == cur.width { v } else { cur.with_slice(msb, lsb, v) };
                    self.set_value(sig, next);
                }
                self.settle(cycle)?;
                first_round = false;
            }

            // record
            for (i, v) in self.values.iter().enumerate() {
                if last_recorded[i] != Some(*v) {
                    let path = &self.elab.signals[i].path;
                    trace.signals.entry(path.clone()).or_default().push((cycle, *v));
                    last_recorded[i] = Some(*v);
                }
            }
        }
        Ok(trace)
    }

    /// Sequential processes with a matching edge. On the first round of a
    /// cycle, any event naming a clock input fires (the implicit edge).
    fn fired_procs(&self, first_round: bool) -> Vec<usize> {
        let mut fired = Vec::new();
        for &pi in &self.seq_procs {
            let Process::Seq { edges, .. } = &self.elab.processes[pi] else { continue };
            let mut hit = false;
            for (kind, sig) in edges {
                if first_round && self.clock_ids.contains(sig) {
                    hit = true;
                    break;
                }
                let old = self.edge_base[sig.index()].get_bit(0);
                let new = self.values[sig.index()].get_bit(0);
                if edge_matches(old, new, *kind) {
                    hit = true;
                    break;
                }
            }
            if hit {
                fired.push(pi);
            }
        }
        fired
    }

    fn settle(&mut self, cycle: u64) -> Result<(), SimError> {
        let elab = self.elab;
        for _sweep in 0..=self.settle_bound {
            let mut any = false;
            for i in 0..self.comb_procs.len() {
                let pi = self.comb_procs[i];
                // watermark 0 means never executed; constant-driven assigns
                // have empty watch lists and still need their bootstrap run
                let stale = self.watermarks[pi] == 0
                    || match &elab.processes[pi] {
                        Process::Assign { reads, .. } => self.is_stale(reads, self.watermarks[pi]),
                        Process::Comb { watch, .. } => self.is_stale(watch, self.watermarks[pi]),
                        Process::Seq { .. } => false,
                    };
                if !stale {
                    continue;
                }
                any = true;
                self.watermarks[pi] = self.counter;
                match &elab.processes[pi] {
                    Process::Assign { lhs, rhs, .. } => {
                        let w = lhs.width(self.elab);
                        let v = self.eval(rhs, w).resize(w);
                        self.write_lvalue_now(lhs, v);
                    }
                    Process::Comb { body, .. } => {
                        self.exec_comb_process(body)?;
                    }
                    Process::Seq { .. } => unreachable!(),
                }
            }
            if !any {
                return Ok(());
            }
        }
        Err(SimError::CombLoopDetected { cycle })
    }

    fn is_stale(&self, watch: &[SignalId], watermark: u64) -> bool {
        watch.iter().any(|s| self.stamps[s.index()] > watermark)
    }

    /// Combinational block execution is atomic: writes land in an overlay
    /// and only net changes commit, so a block reading its own output
    /// (`p = p + x` after `p = 0`) settles instead of re-triggering itself.
    /// `<=` is treated like `=` here; the lint stage flags it.
    fn exec_comb_process(&mut self, body: &[ElabStmt]) -> Result<(), SimError> {
        let mut overlay: BTreeMap<SignalId, Value> = BTreeMap::new();
        self.exec_comb_body(body, &mut overlay)?;
        for (id, v) in overlay {
            self.set_value(id, v);
        }
        Ok(())
    }

    fn overlay_read(&self, overlay: &BTreeMap<SignalId, Value>, id: SignalId) -> Value {
        overlay.get(&id).copied().unwrap_or(self.values[id.index()])
    }

    fn exec_comb_body(&mut self, body: &[ElabStmt], overlay: &mut BTreeMap<SignalId, Value>) -> Result<(), SimError> {
        for stmt in body {
            match stmt {
                ElabStmt::Assign { lhs, rhs, .. } => {
                    let w = lhs.width(self.elab);
                    let v = eval_with(self.elab, &|id| self.overlay_read(overlay, id), rhs, w).resize(w);
                    self.write_overlay(lhs, v, overlay);
                }
                ElabStmt::If { cond, then_body, else_body, .. } => {
                    let c = eval_with(self.elab, &|id| self.overlay_read(overlay, id), cond, 0);
                    match c.truthiness() {
                        Some(true) => self.exec_comb_body(then_body, overlay)?,
                        // unknown condition takes the else branch, as in
                        // statement-level 4-state semantics
                        Some(false) | None => self.exec_comb_body(else_body, overlay)?,
                    }
                }
                ElabStmt::Case { selector, arms, default, .. } => {
                    let sel = eval_with(self.elab, &|id| self.overlay_read(overlay, id), selector, 0);
                    let body = pick_case_body(self.elab, &|id| self.overlay_read(overlay, id), sel, arms, default);
                    self.exec_comb_body(body, overlay)?;
                }
            }
        }
        Ok(())
    }

    fn write_overlay(&self, lhs: &ElabLValue, v: Value, overlay: &mut BTreeMap<SignalId, Value>) {
        match lhs {
            ElabLValue::Sig(id) => {
                overlay.insert(*id, v.resize(self.elab.width_of(*id)));
            }
            ElabLValue::Bits { base, msb, lsb } => {
                let cur = self.overlay_read(overlay, *base);
                overlay.insert(*base, cur.with_slice(*msb, *lsb, v.resize(msb - lsb + 1)));
            }
            ElabLValue::Concat(parts) => {
                let mut hi = v.width;
                for p in parts {
                    let pw = p.width(self.elab);
                    let lo = hi.saturating_sub(pw);
                    self.write_overlay(p, v.slice(hi - 1, lo), overlay);
                    hi = lo;
                }
            }
        }
    }

    /// Sequential bodies queue `<=` commits and apply `=` immediately.
    fn exec_body(&mut self, body: &[ElabStmt]) -> Result<(), SimError> {
        for stmt in body {
            match stmt {
                ElabStmt::Assign { lhs, rhs, kind, .. } => {
                    let w = lhs.width(self.elab);
                    let v = self.eval(rhs, w).resize(w);
                    match kind {
                        AssignKind::Blocking => self.write_lvalue_now(lhs, v),
                        AssignKind::NonBlocking => self.queue_nba(lhs, v),
                    }
                }
                ElabStmt::If { cond, then_body, else_body, .. } => {
                    let c = self.eval(cond, 0);
                    match c.truthiness() {
                        Some(true) => self.exec_body(then_body)?,
                        Some(false) | None => self.exec_body(else_body)?,
                    }
                }
                ElabStmt::Case { selector, arms, default, .. } => {
                    let body = self.select_case_body(selector, arms, default);
                    self.exec_body(body)?;
                }
            }
        }
        Ok(())
    }

    fn select_case_body<'a>(
        &mut self,
        selector: &ElabExpr,
        arms: &'a [(Vec<ElabExpr>, Vec<ElabStmt>)],
        default: &'a [ElabStmt],
    ) -> &'a [ElabStmt] {
        let sel = self.eval(selector, 0);
        pick_case_body(self.elab, &|id| self.values[id.index()], sel, arms, default)
    }

    fn queue_nba(&mut self, lhs: &ElabLValue, v: Value) {
        match lhs {
            ElabLValue::Sig(id) => {
                let w = self.elab.width_of(*id);
                self.nba_queue.push((*id, w - 1, 0, v.resize(w)));
            }
            ElabLValue::Bits { base, msb, lsb } => {
                self.nba_queue.push((*base, *msb, *lsb, v.resize(msb - lsb + 1)));
            }
            ElabLValue::Concat(parts) => {
                // leftmost part takes the most significant bits
                let mut hi = v.width;
                for p in parts {
                    let pw = p.width(self.elab);
                    let lo = hi.saturating_sub(pw);
                    let slice = v.slice(hi - 1, lo);
                    self.queue_nba(p, slice);
                    hi = lo;
                }
            }
        }
    }

    fn write_lvalue_now(&mut self, lhs: &ElabLValue, v: Value) {
        match lhs {
            ElabLValue::Sig(id) => self.write_signal(*id, v.resize(self.elab.width_of(*id))),
            ElabLValue::Bits { base, msb, lsb } => {
                let cur = self.values[base.index()];
                let next = cur.with_slice(*msb, *lsb, v.resize(msb - lsb + 1));
                self.set_value(*base, next);
            }
            ElabLValue::Concat(parts) => {
                let mut hi = v.width;
                for p in parts {
                    let pw = p.width(self.elab);
                    let lo = hi.saturating_sub(pw);
                    self.write_lvalue_now(p, v.slice(hi - 1, lo));
                    hi = lo;
                }
            }
        }
    }

    fn write_signal(&mut self, id: SignalId, v: Value) {
        self.set_value(id, v);
    }

    fn set_value(&mut self, id: SignalId, v: Value) {
        if self.values[id.index()] != v {
            self.values[id.index()] = v;
            self.counter += 1;
            self.stamps[id.index()] = self.counter;
        }
    }

    fn eval(&mut self, e: &ElabExpr, ctx: u32) -> Value {
        eval_with(self.elab, &|id| self.values[id.index()], e, ctx)
    }
}

/// Expression evaluation with Verilog context widths: the effective width of
/// a transparent node is max(self-determined, context). `lookup` supplies the
/// current value of each signal.
pub fn eval_with<F>(elab: &ElaboratedDesign, lookup: &F, e: &ElabExpr, ctx: u32) -> Value
where
    F: Fn(SignalId) -> Value,
{
    let w = e.self_width.max(ctx).max(1);
    match &e.kind {
        ElabExprKind::Const(v) => v.resize(w),
        ElabExprKind::Sig(id) => lookup(*id).resize(w),
        ElabExprKind::BitSelect { base, index, const_index } => {
            let i = match const_index {
                Some(i) => Some(*i as u64),
                None => eval_with(elab, lookup, index, 0).as_u64(),
            };
            let bit = match i {
                Some(i) if (i as u32) < elab.width_of(*base) => lookup(*base).get_bit(i as u32),
                // out-of-range or unknown index reads X
                _ => Value::x1(),
            };
            bit.resize(w)
        }
        ElabExprKind::PartSelect { base, msb, lsb } => lookup(*base).slice(*msb, *lsb).resize(w),
        ElabExprKind::Concat(parts) => {
            let vals: Vec<Value> = parts.iter().map(|p| eval_with(elab, lookup, p, 0)).collect();
            Value::concat(&vals).resize(w)
        }
        ElabExprKind::Unary { op, operand } => match op {
            UnaryOp::BitNot => Value::bit_not(eval_with(elab, lookup, operand, w), w),
            UnaryOp::Neg => Value::neg(eval_with(elab, lookup, operand, w), w),
            UnaryOp::LogNot => Value::log_not(eval_with(elab, lookup, operand, 0)).resize(w),
            UnaryOp::RedAnd => Value::red_and(eval_with(elab, lookup, operand, 0)).resize(w),
            UnaryOp::RedOr => Value::red_or(eval_with(elab, lookup, operand, 0)).resize(w),
            UnaryOp::RedXor => Value::red_xor(eval_with(elab, lookup, operand, 0)).resize(w),
        },
        ElabExprKind::Binary { op, left, right } => match op {
            BinaryOp::Add | BinaryOp::Sub | BinaryOp::Mul | BinaryOp::Div | BinaryOp::Mod
            | BinaryOp::BitAnd | BinaryOp::BitOr | BinaryOp::BitXor => {
                let a = eval_with(elab, lookup, left, w);
                let b = eval_with(elab, lookup, right, w);
                match op {
                    BinaryOp::Add => Value::add(a, b, w),
                    BinaryOp::Sub => Value::sub(a, b, w),
                    BinaryOp::Mul => Value::mul(a, b, w),
                    BinaryOp::Div => Value::div(a, b, w),
                    BinaryOp::Mod => Value::rem(a, b, w),
                    BinaryOp::BitAnd => Value::bit_and(a, b, w),
                    BinaryOp::BitOr => Value::bit_or(a, b, w),
                    BinaryOp::BitXor => Value::bit_xor(a, b, w),
                    _ => unreachable!(),
                }
            }
            BinaryOp::Shl | BinaryOp::Shr => {
                let a = eval_with(elab, lookup, left, w);
                let amount = eval_with(elab, lookup, right, 0);
                match op {
                    BinaryOp::Shl => Value::shl(a, amount, w),
                    BinaryOp::Shr => Value::shr(a, amount, w),
                    _ => unreachable!(),
                }
            }
            BinaryOp::Eq | BinaryOp::Ne | BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => {
                // comparisons size their own operands
                let wc = left.self_width.max(right.self_width);
                let a = eval_with(elab, lookup, left, wc);
                let b = eval_with(elab, lookup, right, wc);
                let r = match op {
                    BinaryOp::Eq => Value::eq(a, b),
                    BinaryOp::Ne => Value::ne(a, b),
                    BinaryOp::Lt => Value::lt(a, b),
                    BinaryOp::Le => Value::le(a, b),
                    BinaryOp::Gt => Value::gt(a, b),
                    BinaryOp::Ge => Value::ge(a, b),
                    _ => unreachable!(),
                };
                r.resize(w)
            }
            BinaryOp::LogAnd | BinaryOp::LogOr => {
                let a = eval_with(elab, lookup, left, 0);
                let b = eval_with(elab, lookup, right, 0);
                let r = match op {
                    BinaryOp::LogAnd => Value::log_and(a, b),
                    BinaryOp::LogOr => Value::log_or(a, b),
                    _ => unreachable!(),
                };
                r.resize(w)
            }
        },
        ElabExprKind::Ternary { cond, then_expr, else_expr } => {
            let c = eval_with(elab, lookup, cond, 0);
            match c.truthiness() {
                Some(true) => eval_with(elab, lookup, then_expr, w).resize(w),
                Some(false) => eval_with(elab, lookup, else_expr, w).resize(w),
                None => {
                    // unknown select merges the branches bitwise
                    let a = eval_with(elab, lookup, then_expr, w);
                    let b = eval_with(elab, lookup, else_expr, w);
                    Value::merge(a, b, w)
                }
            }
        }
    }
}

/// Plain-case matching: an X-bearing selector matches no literal label and
/// falls through to the default arm.
fn pick_case_body<'a, F>(
    elab: &ElaboratedDesign,
    lookup: &F,
    sel: Value,
    arms: &'a [(Vec<ElabExpr>, Vec<ElabStmt>)],
    default: &'a [ElabStmt],
) -> &'a [ElabStmt]
where
    F: Fn(SignalId) -> Value,
{
    if let Some(sv) = sel.as_u64() {
        for (labels, body) in arms {
            for l in labels {
                let lv = eval_with(elab, lookup, l, 0);
                if lv.as_u64() == Some(sv) {
                    return body;
                }
            }
        }
    }
    default
}

fn edge_matches(old: Value, new: Value, kind: EdgeKind) -> bool {
    if old == new {
        return false;
    }
    let (ob, ox) = (old.bits & 1, old.has_x());
    let (nb, nx) = (new.bits & 1, new.has_x());
    match kind {
        // 0->1, 0->x, x->1
        EdgeKind::Pos => (ob == 0 && !ox && nb == 1) || (ob == 0 && !ox && nx) || (ox && nb == 1 && !nx),
        // 1->0, 1->x, x->0
        EdgeKind::Neg => (ob == 1 && nb == 0 && !nx) || (ob == 1 && nx) || (ox && nb == 0 && !nx),
    }
}

fn count_assigns(body: &[ElabStmt]) -> u64 {
    let mut n = 0;
    for s in body {
        match s {
            ElabStmt::Assign { .. } => n += 1,
            ElabStmt::If { then_body, else_body, .. } => n += count_assigns(then_body) + count_assigns(else_body),
            ElabStmt::Case { arms, default, .. } => {
                n += count_assigns(default);
                for (_, b) in arms {
                    n += count_assigns(b);
                }
            }
        }
    }
    n
}
