//! Elaboration: flattens the instance tree rooted at the top module into a
//! flat set of signals and processes, unrolls `for` loops, folds constant
//! selects, computes expression widths, and checks port connections and
//! driver uniqueness.

use crate::ast::*;
use crate::source::{Diagnostic, SourceFile, Span};
use crate::value::Value;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};

pub const LOOP_UNROLL_CAP: u64 = 4096;
const INSTANCE_DEPTH_CAP: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SignalId(pub u32);

impl SignalId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone)]
pub struct SignalInfo {
    pub id: SignalId,
    /// Hierarchical path, e.g. `sum` or `u0.carry`.
    pub path: String,
    pub width: u32,
    pub kind: NetKind,
    /// Input/Output for top-level ports, Internal otherwise.
    pub direction: Direction,
    pub decl_line: u32,
    /// True when the signal is committed by an edge-triggered process.
    pub seq_driven: bool,
}

#[derive(Debug, Clone)]
pub struct ElabExpr {
    pub kind: ElabExprKind,
    /// Self-determined width per Verilog sizing rules.
    pub self_width: u32,
}

#[derive(Debug, Clone)]
pub enum ElabExprKind {
    Const(Value),
    Sig(SignalId),
    BitSelect {
        base: SignalId,
        index: Box<ElabExpr>,
        const_index: Option<u32>,
    },
    PartSelect {
        base: SignalId,
        msb: u32,
        lsb: u32,
    },
    Concat(Vec<ElabExpr>),
    Unary {
        op: UnaryOp,
        operand: Box<ElabExpr>,
    },
    Binary {
        op: BinaryOp,
        left: Box<ElabExpr>,
        right: Box<ElabExpr>,
    },
    Ternary {
        cond: Box<ElabExpr>,
        then_expr: Box<ElabExpr>,
        else_expr: Box<ElabExpr>,
    },
}

impl ElabExpr {
    pub fn read_signals(&self, out: &mut Vec<SignalId>) {
        match &self.kind {
            ElabExprKind::Const(_) => {}
            ElabExprKind::Sig(id) => out.push(*id),
            ElabExprKind::BitSelect { base, index, .. } => {
                out.push(*base);
                index.read_signals(out);
            }
            ElabExprKind::PartSelect { base, .. } => out.push(*base),
            ElabExprKind::Concat(parts) => {
                for p in parts {
                    p.read_signals(out);
                }
            }
            ElabExprKind::Unary { operand, .. } => operand.read_signals(out),
            ElabExprKind::Binary { left, right, .. } => {
                left.read_signals(out);
                right.read_signals(out);
            }
            ElabExprKind::Ternary { cond, then_expr, else_expr } => {
                cond.read_signals(out);
                then_expr.read_signals(out);
                else_expr.read_signals(out);
            }
        }
    }
}

#[derive(Debug, Clone)]
pub enum ElabLValue {
    Sig(SignalId),
    /// Constant slice [msb:lsb]; a bit-select is msb == lsb.
    Bits { base: SignalId, msb: u32, lsb: u32 },
    Concat(Vec<ElabLValue>),
}

impl ElabLValue {
    pub fn width(&self, elab: &ElaboratedDesign) -> u32 {
        match self {
            ElabLValue::Sig(id) => elab.signals[id.index()].width,
            ElabLValue::Bits { msb, lsb, .. } => msb - lsb + 1,
            ElabLValue::Concat(parts) => parts.iter().map(|p| p.width(elab)).sum(),
        }
    }

    pub fn bases(&self, out: &mut Vec<SignalId>) {
        match self {
            ElabLValue::Sig(id) | ElabLValue::Bits { base: id, .. } => out.push(*id),
            ElabLValue::Concat(parts) => {
                for p in parts {
                    p.bases(out);
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub enum ElabStmt {
    Assign {
        lhs: ElabLValue,
        rhs: ElabExpr,
        kind: AssignKind,
        line: u32,
    },
    If {
        cond: ElabExpr,
        then_body: Vec<ElabStmt>,
        else_body: Vec<ElabStmt>,
        line: u32,
    },
    Case {
        selector: ElabExpr,
        arms: Vec<(Vec<ElabExpr>, Vec<ElabStmt>)>,
        default: Vec<ElabStmt>,
        line: u32,
    },
}

#[derive(Debug, Clone)]
pub enum Process {
    /// Continuous assignment (includes flattened port connections).
    Assign {
        lhs: ElabLValue,
        rhs: ElabExpr,
        line: u32,
        reads: Vec<SignalId>,
    },
    /// Combinational always block; `watch` is the effective sensitivity set.
    Comb {
        body: Vec<ElabStmt>,
        watch: Vec<SignalId>,
        line: u32,
        /// False for `@(level list)` blocks narrower than the read set.
        implicit_sens: bool,
    },
    Seq {
        edges: Vec<(EdgeKind, SignalId)>,
        body: Vec<ElabStmt>,
        line: u32,
    },
}

impl Process {
    pub fn is_comb(&self) -> bool {
        !matches!(self, Process::Seq { .. })
    }

    pub fn line(&self) -> u32 {
        match self {
            Process::Assign { line, .. } | Process::Comb { line, .. } | Process::Seq { line, .. } => *line,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ElaboratedDesign {
    pub top_name: String,
    pub file: String,
    pub signals: Vec<SignalInfo>,
    pub by_path: HashMap<String, SignalId>,
    pub processes: Vec<Process>,
    pub top_inputs: Vec<SignalId>,
    pub top_outputs: Vec<SignalId>,
    /// RHS-wider-than-LHS and port width mismatches (lint W4 pool).
    pub width_warnings: Vec<Diagnostic>,
    /// Signals read but never driven (lint W5 pool).
    pub undriven_reads: Vec<SignalId>,
}

impl ElaboratedDesign {
    pub fn signal(&self, id: SignalId) -> &SignalInfo {
        &self.signals[id.index()]
    }

    pub fn lookup(&self, path: &str) -> Option<SignalId> {
        self.by_path.get(path).copied()
    }

    pub fn width_of(&self, id: SignalId) -> u32 {
        self.signals[id.index()].width
    }

    /// Total bit count of non-clock, non-reset top-level inputs.
    pub fn data_input_bits(&self, clocks: &[SignalId], resets: &[SignalId]) -> u32 {
        self.top_inputs
            .iter()
            .filter(|id| !clocks.contains(id) && !resets.contains(id))
            .map(|id| self.width_of(*id))
            .sum()
    }
}

pub fn elaborate(design: &Design) -> Result<ElaboratedDesign, Vec<Diagnostic>> {
    let mut ctx = Elaborator {
        design,
        signals: Vec::new(),
        by_path: HashMap::new(),
        processes: Vec::new(),
        diags: Vec::new(),
        width_warnings: Vec::new(),
    };
    let top = match design.module(&design.top) {
        Some(m) => m,
        None => {
            return Err(vec![Diagnostic::error(1, 1, "unknown-module", format!("top module '{}' not found", design.top))]);
        }
    };
    ctx.instantiate(top, "", &mut vec![design.top.clone()]);
    let errors: Vec<Diagnostic> = ctx.diags.iter().filter(|d| d.severity == crate::source::Severity::Error).cloned().collect();
    if !errors.is_empty() {
        return Err(errors);
    }

    let mut elab = ElaboratedDesign {
        top_name: design.top.clone(),
        file: String::new(),
        signals: ctx.signals,
        by_path: ctx.by_path,
        processes: ctx.processes,
        top_inputs: Vec::new(),
        top_outputs: Vec::new(),
        width_warnings: ctx.width_warnings,
        undriven_reads: Vec::new(),
    };
    for s in &elab.signals {
        match s.direction {
            Direction::Input => elab.top_inputs.push(s.id),
            Direction::Output => elab.top_outputs.push(s.id),
            Direction::Internal => {}
        }
    }

    if let Err(diags) = analyze_drivers(&mut elab) {
        return Err(diags);
    }
    Ok(elab)
}

/// Convenience: parse + elaborate, collecting diagnostics from both stages.
pub fn parse_and_elaborate(src: &SourceFile) -> Result<(Design, ElaboratedDesign), Vec<Diagnostic>> {
    let design = crate::parser::parse(src)?;
    let mut elab = elaborate(&design)?;
    elab.file = src.path.display().to_string();
    Ok((design, elab))
}

struct Elaborator<'d> {
    design: &'d Design,
    signals: Vec<SignalInfo>,
    by_path: HashMap<String, SignalId>,
    processes: Vec<Process>,
    diags: Vec<Diagnostic>,
    width_warnings: Vec<Diagnostic>,
}

struct InstanceScope {
    /// local name -> flat signal id
    names: HashMap<String, SignalId>,
    /// loop variable bindings while unrolling
    loop_env: HashMap<String, u64>,
}

impl<'d> Elaborator<'d> {
    fn err(&mut self, span: Span, code: &str, msg: impl Into<String>) {
        self.diags.push(Diagnostic::error(span.start_line, 1, code, msg));
    }

    fn new_signal(&mut self, path: String, width: u32, kind: NetKind, direction: Direction, decl_line: u32) -> SignalId {
        let id = SignalId(self.signals.len() as u32);
        self.by_path.insert(path.clone(), id);
        self.signals.push(SignalInfo { id, path, width, kind, direction, decl_line, seq_driven: false });
        id
    }

    fn instantiate(&mut self, module: &ModuleDecl, prefix: &str, stack: &mut Vec<String>) {
        if stack.len() > INSTANCE_DEPTH_CAP {
            self.err(module.span, "recursive-instantiation", format!("instance depth exceeds {INSTANCE_DEPTH_CAP}"));
            return;
        }
        let mut scope = InstanceScope { names: HashMap::new(), loop_env: HashMap::new() };
        let is_top = prefix.is_empty();
        for p in &module.ports {
            let path = join_path(prefix, &p.name);
            let dir = if is_top { p.direction } else { Direction::Internal };
            let id = self.new_signal(path, p.width(), p.kind, dir, p.span.start_line);
            scope.names.insert(p.name.clone(), id);
        }
        for n in &module.nets {
            if n.kind == NetKind::Integer {
                // loop indices are compile-time only; no signal materialized
                continue;
            }
            let path = join_path(prefix, &n.name);
            let id = self.new_signal(path, n.width(), n.kind, Direction::Internal, n.span.start_line);
            scope.names.insert(n.name.clone(), id);
        }

        for item in &module.items {
            match item {
                ModuleItem::Assign(a) => {
                    let Some(lhs) = self.elab_lvalue(&a.lhs, &mut scope) else { continue };
                    let Some(rhs) = self.elab_expr(&a.rhs, &mut scope) else { continue };
                    self.check_assign_width(&lhs, &rhs, a.span);
                    let mut reads = Vec::new();
                    rhs.read_signals(&mut reads);
                    self.processes.push(Process::Assign { lhs, rhs, line: a.span.start_line, reads });
                }
                ModuleItem::Always(always) => self.elab_always(always, &mut scope),
                ModuleItem::Instance(inst) => self.elab_instance(inst, prefix, &mut scope, stack),
            }
        }
    }

    fn elab_always(&mut self, always: &AlwaysBlock, scope: &mut InstanceScope) {
        let mut body = Vec::new();
        self.elab_stmt(&always.body, scope, &mut body);
        let line = always.span.start_line;
        match &always.sensitivity {
            Sensitivity::Star | Sensitivity::Levels(_) => {
                let mut reads = Vec::new();
                collect_body_reads(&body, &mut reads);
                let (watch, implicit) = match &always.sensitivity {
                    Sensitivity::Star => (reads, true),
                    Sensitivity::Levels(names) => {
                        let mut ids = Vec::new();
                        for n in names {
                            if let Some(id) = scope.names.get(n) {
                                ids.push(*id);
                            }
                        }
                        (ids, false)
                    }
                    Sensitivity::Edges(_) => unreachable!(),
                };
                let mut watch = watch;
                watch.sort_unstable();
                watch.dedup();
                self.processes.push(Process::Comb { body, watch, line, implicit_sens: implicit });
            }
            Sensitivity::Edges(events) => {
                let mut edges = Vec::new();
                for e in events {
                    match scope.names.get(&e.signal) {
                        Some(id) => edges.push((e.edge, *id)),
                        None => self.err(e.span, "undeclared-ident", format!("unknown edge signal '{}'", e.signal)),
                    }
                }
                self.processes.push(Process::Seq { edges, body, line });
            }
        }
    }

    fn elab_instance(&mut self, inst: &Instance, prefix: &str, scope: &mut InstanceScope, stack: &mut Vec<String>) {
        let Some(child) = self.design.module(&inst.module_name) else {
            self.err(inst.span, "unknown-module", format!("instantiated module '{}' is not declared", inst.module_name));
            return;
        };
        if stack.contains(&inst.module_name) {
            self.err(inst.span, "recursive-instantiation", format!("module '{}' instantiates itself", inst.module_name));
            return;
        }
        let child_prefix = join_path(prefix, &inst.instance_name);
        stack.push(inst.module_name.clone());
        self.instantiate(child, &child_prefix, stack);
        stack.pop();

        let mut connected = HashSet::new();
        for conn in &inst.connections {
            let Some(port) = child.ports.iter().find(|p| p.name == conn.port) else {
                self.err(conn.span, "unknown-port", format!("module '{}' has no port '{}'", child.name, conn.port));
                continue;
            };
            if !connected.insert(conn.port.clone()) {
                self.err(conn.span, "duplicate-connection", format!("port '{}' connected twice", conn.port));
                continue;
            }
            let child_id = self.by_path[&join_path(&child_prefix, &port.name)];
            let port_width = port.width();
            match port.direction {
                Direction::Input => {
                    let Some(expr) = conn.expr.as_ref() else {
                        self.err(conn.span, "unconnected-input", format!("input port '{}' left unconnected", conn.port));
                        continue;
                    };
                    let Some(rhs) = self.elab_expr(expr, scope) else { continue };
                    if rhs.self_width != port_width {
                        self.width_warnings.push(Diagnostic::warning(
                            conn.span.start_line,
                            1,
                            "W4",
                            format!(
                                "connection to input port '{}' is {} bits wide but the port is {} bits",
                                conn.port, rhs.self_width, port_width
                            ),
                        ));
                    }
                    let mut reads = Vec::new();
                    rhs.read_signals(&mut reads);
                    self.processes.push(Process::Assign {
                        lhs: ElabLValue::Sig(child_id),
                        rhs,
                        line: conn.span.start_line,
                        reads,
                    });
                }
                Direction::Output => {
                    let Some(expr) = conn.expr.as_ref() else { continue }; // dangling output allowed
                    let Some(lhs) = self.expr_as_lvalue(expr, scope) else {
                        self.err(
                            conn.span,
                            "bad-output-connection",
                            format!("output port '{}' must connect to a net or concatenation of nets", conn.port),
                        );
                        continue;
                    };
                    let rhs = ElabExpr { kind: ElabExprKind::Sig(child_id), self_width: port_width };
                    let lhs_width: u32 = {
                        // width check against the sink
                        let mut w = 0;
                        let mut stack2 = vec![&lhs];
                        while let Some(lv) = stack2.pop() {
                            match lv {
                                ElabLValue::Sig(id) => w += self.signals[id.index()].width,
                                ElabLValue::Bits { msb, lsb, .. } => w += msb - lsb + 1,
                                ElabLValue::Concat(ps) => stack2.extend(ps.iter()),
                            }
                        }
                        w
                    };
                    if lhs_width != port_width {
                        self.width_warnings.push(Diagnostic::warning(
                            conn.span.start_line,
                            1,
                            "W4",
                            format!(
                                "output port '{}' is {} bits but its connection is {} bits",
                                conn.port, port_width, lhs_width
                            ),
                        ));
                    }
                    self.processes.push(Process::Assign { lhs, rhs, line: conn.span.start_line, reads: vec![child_id] });
                }
                Direction::Internal => {}
            }
        }
        // inputs must all be driven
        for port in &child.ports {
            if port.direction == Direction::Input && !connected.contains(&port.name) {
                self.err(inst.span, "unconnected-input", format!("input port '{}' of instance '{}' is not connected", port.name, inst.instance_name));
            }
        }
    }

    fn elab_stmt(&mut self, stmt: &Stmt, scope: &mut InstanceScope, out: &mut Vec<ElabStmt>) {
        match stmt {
            Stmt::Block { stmts, .. } => {
                for s in stmts {
                    self.elab_stmt(s, scope, out);
                }
            }
            Stmt::Assign { lhs, rhs, kind, span } => {
                let Some(l) = self.elab_lvalue(lhs, scope) else { return };
                let Some(r) = self.elab_expr(rhs, scope) else { return };
                self.check_assign_width(&l, &r, *span);
                out.push(ElabStmt::Assign { lhs: l, rhs: r, kind: *kind, line: span.start_line });
            }
            Stmt::If { cond, then_branch, else_branch, span } => {
                let Some(c) = self.elab_expr(cond, scope) else { return };
                let mut t = Vec::new();
                self.elab_stmt(then_branch, scope, &mut t);
                let mut e = Vec::new();
                if let Some(eb) = else_branch {
                    self.elab_stmt(eb, scope, &mut e);
                }
                out.push(ElabStmt::If { cond: c, then_body: t, else_body: e, line: span.start_line });
            }
            Stmt::Case { selector, arms, default, span } => {
                let Some(sel) = self.elab_expr(selector, scope) else { return };
                let mut earms = Vec::new();
                for arm in arms {
                    let mut labels = Vec::new();
                    for l in &arm.labels {
                        if let Some(e) = self.elab_expr(l, scope) {
                            labels.push(e);
                        }
                    }
                    let mut body = Vec::new();
                    self.elab_stmt(&arm.body, scope, &mut body);
                    earms.push((labels, body));
                }
                let mut dbody = Vec::new();
                if let Some(d) = default {
                    self.elab_stmt(d, scope, &mut dbody);
                }
                out.push(ElabStmt::Case { selector: sel, arms: earms, default: dbody, line: span.start_line });
            }
            Stmt::For { var, init, cond, step, body, span } => {
                // unroll with compile-time bounds
                let Some(mut i) = self.const_eval(init, scope, *span) else { return };
                let mut iterations = 0u64;
                loop {
                    scope.loop_env.insert(var.clone(), i);
                    let Some(c) = self.const_eval(cond, scope, *span) else {
                        scope.loop_env.remove(var);
                        return;
                    };
                    if c == 0 {
                        break;
                    }
                    iterations += 1;
                    if iterations > LOOP_UNROLL_CAP {
                        self.err(*span, "loop-bound", format!("loop unrolls past the {LOOP_UNROLL_CAP}-iteration cap"));
                        scope.loop_env.remove(var);
                        return;
                    }
                    self.elab_stmt(body, scope, out);
                    let Some(next) = self.const_eval(step, scope, *span) else {
                        scope.loop_env.remove(var);
                        return;
                    };
                    i = next;
                    scope.loop_env.insert(var.clone(), i);
                }
                scope.loop_env.remove(var);
            }
        }
    }

    /// Compile-time evaluation for loop bounds and loop-var expressions.
    fn const_eval(&mut self, e: &Expr, scope: &InstanceScope, span: Span) -> Option<u64> {
        match self.try_const(e, scope) {
            Some(v) => Some(v),
            None => {
                self.err(span, "nonconst-loop", "for-loop bounds and step must be compile-time constants");
                None
            }
        }
    }

    fn try_const(&self, e: &Expr, scope: &InstanceScope) -> Option<u64> {
        match e {
            Expr::Literal(l) => Some(l.value),
            Expr::Ident { name, .. } => scope.loop_env.get(name).copied(),
            Expr::Unary { op, operand, .. } => {
                let v = self.try_const(operand, scope)?;
                match op {
                    UnaryOp::Neg => Some(v.wrapping_neg()),
                    UnaryOp::BitNot => Some(!v),
                    UnaryOp::LogNot => Some((v == 0) as u64),
                    _ => None,
                }
            }
            Expr::Binary { op, left, right, .. } => {
                let a = self.try_const(left, scope)?;
                let b = self.try_const(right, scope)?;
                Some(match op {
                    BinaryOp::Add => a.wrapping_add(b),
                    BinaryOp::Sub => a.wrapping_sub(b),
                    BinaryOp::Mul => a.wrapping_mul(b),
                    BinaryOp::Div => {
                        if b == 0 {
                            return None;
                        }
                        a / b
                    }
                    BinaryOp::Mod => {
                        if b == 0 {
                            return None;
                        }
                        a % b
                    }
                    BinaryOp::BitAnd => a & b,
                    BinaryOp::BitOr => a | b,
                    BinaryOp::BitXor => a ^ b,
                    BinaryOp::Shl => {
                        if b >= 64 {
                            0
                        } else {
                            a << b
                        }
                    }
                    BinaryOp::Shr => {
                        if b >= 64 {
                            0
                        } else {
                            a >> b
                        }
                    }
                    BinaryOp::Eq => (a == b) as u64,
                    BinaryOp::Ne => (a != b) as u64,
                    BinaryOp::Lt => (a < b) as u64,
                    BinaryOp::Le => (a <= b) as u64,
                    BinaryOp::Gt => (a > b) as u64,
                    BinaryOp::Ge => (a >= b) as u64,
                    BinaryOp::LogAnd => ((a != 0) && (b != 0)) as u64,
                    BinaryOp::LogOr => ((a != 0) || (b != 0)) as u64,
                })
            }
            _ => None,
        }
    }

    fn elab_lvalue(&mut self, lv: &LValue, scope: &mut InstanceScope) -> Option<ElabLValue> {
        match lv {
            LValue::Ident { name, span } => {
                let id = self.resolve(name, *span, scope)?;
                Some(ElabLValue::Sig(id))
            }
            LValue::BitSelect { base, index, span } => {
                let id = self.resolve(base, *span, scope)?;
                let Some(i) = self.try_const(index, scope) else {
                    self.err(*span, "nonconst-select", "bit-select on the left-hand side must have a constant index");
                    return None;
                };
                let w = self.signals[id.index()].width;
                if i as u32 >= w {
                    self.err(*span, "select-range", format!("bit index {i} is outside [{}:0]", w - 1));
                    return None;
                }
                Some(ElabLValue::Bits { base: id, msb: i as u32, lsb: i as u32 })
            }
            LValue::PartSelect { base, msb, lsb, span } => {
                let id = self.resolve(base, *span, scope)?;
                let (m, l) = match (self.try_const(msb, scope), self.try_const(lsb, scope)) {
                    (Some(m), Some(l)) => (m as u32, l as u32),
                    _ => {
                        self.err(*span, "nonconst-select", "part-select bounds must be constants");
                        return None;
                    }
                };
                let w = self.signals[id.index()].width;
                if m < l || m >= w {
                    self.err(*span, "select-range", format!("part-select [{m}:{l}] is outside [{}:0]", w - 1));
                    return None;
                }
                Some(ElabLValue::Bits { base: id, msb: m, lsb: l })
            }
            LValue::Concat { parts, .. } => {
                let mut ps = Vec::new();
                for p in parts {
                    ps.push(self.elab_lvalue(p, scope)?);
                }
                Some(ElabLValue::Concat(ps))
            }
        }
    }

    fn expr_as_lvalue(&mut self, e: &Expr, scope: &mut InstanceScope) -> Option<ElabLValue> {
        match e {
            Expr::Ident { name, span } => {
                let id = self.resolve(name, *span, scope)?;
                Some(ElabLValue::Sig(id))
            }
            Expr::BitSelect { base, index, span } => {
                let lv = LValue::BitSelect { base: base.clone(), index: index.clone(), span: *span };
                self.elab_lvalue(&lv, scope)
            }
            Expr::PartSelect { base, msb, lsb, span } => {
                let lv = LValue::PartSelect { base: base.clone(), msb: msb.clone(), lsb: lsb.clone(), span: *span };
                self.elab_lvalue(&lv, scope)
            }
            Expr::Concat { parts, .. } => {
                let mut ps = Vec::new();
                for p in parts {
                    ps.push(self.expr_as_lvalue(p, scope)?);
                }
                Some(ElabLValue::Concat(ps))
            }
            _ => None,
        }
    }

    fn resolve(&mut self, name: &str, span: Span, scope: &InstanceScope) -> Option<SignalId> {
        match scope.names.get(name) {
            Some(id) => Some(*id),
            None => {
                self.err(span, "undeclared-ident", format!("'{name}' is not declared"));
                None
            }
        }
    }

    fn elab_expr(&mut self, e: &Expr, scope: &mut InstanceScope) -> Option<ElabExpr> {
        let kind = match e {
            Expr::Literal(l) => {
                let w = l.width.unwrap_or(32);
                ElabExprKind::Const(Value::known(w, l.value))
            }
            Expr::Ident { name, span } => {
                if let Some(v) = scope.loop_env.get(name) {
                    ElabExprKind::Const(Value::known(32, *v))
                } else {
                    let id = self.resolve(name, *span, scope)?;
                    ElabExprKind::Sig(id)
                }
            }
            Expr::BitSelect { base, index, span } => {
                let id = self.resolve(base, *span, scope)?;
                let idx = self.elab_expr(index, scope)?;
                let const_index = match &idx.kind {
                    ElabExprKind::Const(v) => v.as_u64().map(|x| x as u32),
                    _ => None,
                };
                if let Some(ci) = const_index {
                    let w = self.signals[id.index()].width;
                    if ci >= w {
                        self.err(*span, "select-range", format!("bit index {ci} is outside [{}:0]", w - 1));
                        return None;
                    }
                }
                ElabExprKind::BitSelect { base: id, index: Box::new(idx), const_index }
            }
            Expr::PartSelect { base, msb, lsb, span } => {
                let id = self.resolve(base, *span, scope)?;
                let (m, l) = match (self.try_const(msb, scope), self.try_const(lsb, scope)) {
                    (Some(m), Some(l)) => (m as u32, l as u32),
                    _ => {
                        self.err(*span, "nonconst-select", "part-select bounds must be constants");
                        return None;
                    }
                };
                let w = self.signals[id.index()].width;
                if m < l || m >= w {
                    self.err(*span, "select-range", format!("part-select [{m}:{l}] is outside [{}:0]", w - 1));
                    return None;
                }
                ElabExprKind::PartSelect { base: id, msb: m, lsb: l }
            }
            Expr::Concat { parts, span } => {
                let mut ps = Vec::new();
                let mut total = 0u32;
                for p in parts {
                    let pe = self.elab_expr(p, scope)?;
                    total += pe.self_width;
                    ps.push(pe);
                }
                if total > 64 {
                    self.err(*span, "width-bound", format!("concatenation width {total} exceeds 64 bits"));
                    return None;
                }
                ElabExprKind::Concat(ps)
            }
            Expr::Unary { op, operand, .. } => {
                let o = self.elab_expr(operand, scope)?;
                ElabExprKind::Unary { op: *op, operand: Box::new(o) }
            }
            Expr::Binary { op, left, right, .. } => {
                let l = self.elab_expr(left, scope)?;
                let r = self.elab_expr(right, scope)?;
                ElabExprKind::Binary { op: *op, left: Box::new(l), right: Box::new(r) }
            }
            Expr::Ternary { cond, then_expr, else_expr, .. } => {
                let c = self.elab_expr(cond, scope)?;
                let t = self.elab_expr(then_expr, scope)?;
                let el = self.elab_expr(else_expr, scope)?;
                ElabExprKind::Ternary { cond: Box::new(c), then_expr: Box::new(t), else_expr: Box::new(el) }
            }
        };
        let self_width = self.width_of_kind(&kind);
        Some(ElabExpr { kind, self_width })
    }

    fn width_of_kind(&self, kind: &ElabExprKind) -> u32 {
        match kind {
            ElabExprKind::Const(v) => v.width,
            ElabExprKind::Sig(id) => self.signals[id.index()].width,
            ElabExprKind::BitSelect { .. } => 1,
            ElabExprKind::PartSelect { msb, lsb, .. } => msb - lsb + 1,
            ElabExprKind::Concat(parts) => parts.iter().map(|p| p.self_width).sum::<u32>().min(64),
            ElabExprKind::Unary { op, operand } => match op {
                UnaryOp::BitNot | UnaryOp::Neg => operand.self_width,
                _ => 1,
            },
            ElabExprKind::Binary { op, left, right } => match op {
                BinaryOp::Add
                | BinaryOp::Sub
                | BinaryOp::Mul
                | BinaryOp::Div
                | BinaryOp::Mod
                | BinaryOp::BitAnd
                | BinaryOp::BitOr
                | BinaryOp::BitXor => left.self_width.max(right.self_width),
                BinaryOp::Shl | BinaryOp::Shr => left.self_width,
                _ => 1,
            },
            ElabExprKind::Ternary { then_expr, else_expr, .. } => then_expr.self_width.max(else_expr.self_width),
        }
    }

    /// Lint-width check: warn when the RHS can carry more bits than the LHS.
    /// Literal lint widths are minimal so `count + 1` stays quiet.
    fn check_assign_width(&mut self, lhs: &ElabLValue, rhs: &ElabExpr, span: Span) {
        let lw: u32 = {
            let mut w = 0;
            let mut stack = vec![lhs];
            while let Some(lv) = stack.pop() {
                match lv {
                    ElabLValue::Sig(id) => w += self.signals[id.index()].width,
                    ElabLValue::Bits { msb, lsb, .. } => w += msb - lsb + 1,
                    ElabLValue::Concat(ps) => stack.extend(ps.iter()),
                }
            }
            w
        };
        let rw = self.lint_width(rhs);
        if rw > lw {
            self.width_warnings.push(Diagnostic::warning(
                span.start_line,
                1,
                "W4",
                format!("right-hand side may carry {rw} bits but the target is {lw} bits wide"),
            ));
        }
    }

    fn lint_width(&self, e: &ElabExpr) -> u32 {
        match &e.kind {
            ElabExprKind::Const(v) => match v.as_u64() {
                Some(0) | None => 1,
                Some(n) => 64 - n.leading_zeros(),
            },
            ElabExprKind::Sig(_) | ElabExprKind::BitSelect { .. } | ElabExprKind::PartSelect { .. } => e.self_width,
            ElabExprKind::Concat(parts) => parts.iter().map(|p| self.lint_width(p)).sum::<u32>().min(64),
            ElabExprKind::Unary { op, operand } => match op {
                UnaryOp::BitNot | UnaryOp::Neg => self.lint_width(operand),
                _ => 1,
            },
            ElabExprKind::Binary { op, left, right } => match op {
                BinaryOp::Add
                | BinaryOp::Sub
                | BinaryOp::Mul
                | BinaryOp::Div
                | BinaryOp::Mod
                | BinaryOp::BitAnd
                | BinaryOp::BitOr
                | BinaryOp::BitXor => self.lint_width(left).max(self.lint_width(right)),
                BinaryOp::Shl | BinaryOp::Shr => self.lint_width(left),
                _ => 1,
            },
            ElabExprKind::Ternary { then_expr, else_expr, .. } => {
                self.lint_width(then_expr).max(self.lint_width(else_expr))
            }
        }
    }
}

fn join_path(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

fn collect_body_reads(body: &[ElabStmt], out: &mut Vec<SignalId>) {
    for s in body {
        match s {
            ElabStmt::Assign { rhs, lhs, .. } => {
                rhs.read_signals(out);
                // dynamic indices on the LHS would be reads too; LHS indices
                // are constant in this subset, so only RHS contributes
                let _ = lhs;
            }
            ElabStmt::If { cond, then_body, else_body, .. } => {
                cond.read_signals(out);
                collect_body_reads(then_body, out);
                collect_body_reads(else_body, out);
            }
            ElabStmt::Case { selector, arms, default, .. } => {
                selector.read_signals(out);
                for (labels, body) in arms {
                    for l in labels {
                        l.read_signals(out);
                    }
                    collect_body_reads(body, out);
                }
                collect_body_reads(default, out);
            }
        }
    }
}

/// Per-signal driver uniqueness, `seq_driven` marking, and the
/// read-but-never-driven pool.
///
/// Continuous assigns claim the exact bits they write, so several assigns
/// (or instance outputs) may drive disjoint slices of one net; procedural
/// blocks claim the whole signal. Overlapping claims from different
/// processes are an error.
fn analyze_drivers(elab: &mut ElaboratedDesign) -> Result<(), Vec<Diagnostic>> {
    let mut diags = Vec::new();
    // per signal: (owning process, claimed bit mask)
    let mut claims: HashMap<SignalId, Vec<(usize, u64)>> = HashMap::new();
    for (pi, p) in elab.processes.iter().enumerate() {
        let mut defs: Vec<(SignalId, u64)> = Vec::new();
        match p {
            Process::Assign { lhs, .. } => collect_lvalue_claims(lhs, elab, &mut defs),
            Process::Comb { body, .. } | Process::Seq { body, .. } => {
                let mut bases = Vec::new();
                collect_body_defs(body, &mut bases);
                bases.sort_unstable();
                bases.dedup();
                for b in bases {
                    defs.push((b, crate::value::width_mask(elab.signals[b.index()].width)));
                }
            }
        }
        for (d, mask) in defs {
            let entry = claims.entry(d).or_default();
            let overlap = entry.iter().find(|(owner, m)| *owner != pi && m & mask != 0);
            if let Some((owner, _)) = overlap {
                let info = &elab.signals[d.index()];
                diags.push(Diagnostic::error(
                    p.line(),
                    1,
                    "multi-driver",
                    format!(
                        "'{}' is driven from more than one place (also at line {})",
                        info.path,
                        elab.processes[*owner].line()
                    ),
                ));
            }
            entry.push((pi, mask));
            if matches!(p, Process::Seq { .. }) {
                elab.signals[d.index()].seq_driven = true;
            }
        }
    }
    if !diags.is_empty() {
        return Err(diags);
    }
    let mut read: HashSet<SignalId> = HashSet::new();
    for p in &elab.processes {
        let mut r = Vec::new();
        match p {
            Process::Assign { reads, .. } => r.extend_from_slice(reads),
            Process::Comb { body, .. } | Process::Seq { body, .. } => collect_body_reads(body, &mut r),
        }
        if let Process::Seq { edges, .. } = p {
            r.extend(edges.iter().map(|(_, s)| *s));
        }
        read.extend(r);
    }
    for s in &elab.signals {
        let driven = claims.contains_key(&s.id) || s.direction == Direction::Input;
        if !driven && read.contains(&s.id) {
            elab.undriven_reads.push(s.id);
        }
    }
    elab.undriven_reads.sort_unstable();
    Ok(())
}

fn collect_lvalue_claims(lhs: &ElabLValue, elab: &ElaboratedDesign, out: &mut Vec<(SignalId, u64)>) {
    match lhs {
        ElabLValue::Sig(id) => out.push((*id, crate::value::width_mask(elab.signals[id.index()].width))),
        ElabLValue::Bits { base, msb, lsb } => {
            let mask = crate::value::width_mask(msb - lsb + 1) << lsb;
            out.push((*base, mask));
        }
        ElabLValue::Concat(parts) => {
            for p in parts {
                collect_lvalue_claims(p, elab, out);
            }
        }
    }
}

fn collect_body_defs(body: &[ElabStmt], out: &mut Vec<SignalId>) {
    for s in body {
        match s {
            ElabStmt::Assign { lhs, .. } => lhs.bases(out),
            ElabStmt::If { then_body, else_body, .. } => {
                collect_body_defs(then_body, out);
                collect_body_defs(else_body, out);
            }
            ElabStmt::Case { arms, default, .. } => {
                for (_, b) in arms {
                    collect_body_defs(b, out);
                }
                collect_body_defs(default, out);
            }
        }
    }
}
