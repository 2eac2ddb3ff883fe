//! Independent tree-walking evaluator used to cross-check the simulator.
//!
//! Shares nothing with the engine's evaluation path: values are per-bit
//! tri-state vectors (LSB first), arithmetic is ripple-carry over bit lists,
//! and processes run once in topological def-use order with no event
//! scheduling.
#![allow(dead_code)]

use rtlmend_core::ast::{AssignKind, BinaryOp, UnaryOp};
use rtlmend_core::corpus::{default_corpus_dir, load_corpus};
use rtlmend_core::elaborate::{
    parse_and_elaborate, ElabExpr, ElabExprKind, ElabLValue, ElabStmt, ElaboratedDesign, Process, SignalId,
};
use rtlmend_core::sim::simulate;
use rtlmend_core::stimulus::{make_stimulus, StimMode, EXHAUSTIVE_MAX_BITS};
use std::collections::HashMap;

#[derive(Copy, Clone, PartialEq, Eq, Debug)]
enum Tri {
    Zero,
    One,
    X,
}

#[derive(Clone, PartialEq, Debug)]
struct Bits(Vec<Tri>); // index 0 = LSB

impl Bits {
    fn xes(w: u32) -> Bits {
        Bits(vec![Tri::X; w as usize])
    }

    fn zeros(w: u32) -> Bits {
        Bits(vec![Tri::Zero; w as usize])
    }

    fn from_u64(w: u32, v: u64) -> Bits {
        Bits((0..w).map(|i| if v >> i & 1 == 1 { Tri::One } else { Tri::Zero }).collect())
    }

    fn width(&self) -> u32 {
        self.0.len() as u32
    }

    fn resize(&self, w: u32) -> Bits {
        let mut v = self.0.clone();
        v.resize(w as usize, Tri::Zero);
        Bits(v)
    }

    fn known(&self) -> bool {
        self.0.iter().all(|b| *b != Tri::X)
    }

    fn to_u64(&self) -> Option<u64> {
        if !self.known() {
            return None;
        }
        let mut v = 0u64;
        for (i, b) in self.0.iter().enumerate() {
            if *b == Tri::One {
                v |= 1 << i;
            }
        }
        Some(v)
    }

    /// Matches Value::to_bin_string (MSB first).
    fn to_string_msb(&self) -> String {
        self.0
            .iter()
            .rev()
            .map(|b| match b {
                Tri::Zero => '0',
                Tri::One => '1',
                Tri::X => 'x',
            })
            .collect()
    }

    fn truthiness(&self) -> Option<bool> {
        if self.0.iter().any(|b| *b == Tri::One) {
            return Some(true);
        }
        if self.known() {
            return Some(false);
        }
        None
    }
}

fn tri_and(a: Tri, b: Tri) -> Tri {
    match (a, b) {
        (Tri::Zero, _) | (_, Tri::Zero) => Tri::Zero,
        (Tri::One, Tri::One) => Tri::One,
        _ => Tri::X,
    }
}

fn tri_or(a: Tri, b: Tri) -> Tri {
    match (a, b) {
        (Tri::One, _) | (_, Tri::One) => Tri::One,
        (Tri::Zero, Tri::Zero) => Tri::Zero,
        _ => Tri::X,
    }
}

fn tri_xor(a: Tri, b: Tri) -> Tri {
    match (a, b) {
        (Tri::X, _) | (_, Tri::X) => Tri::X,
        (x, y) if x == y => Tri::Zero,
        _ => Tri::One,
    }
}

fn tri_not(a: Tri) -> Tri {
    match a {
        Tri::Zero => Tri::One,
        Tri::One => Tri::Zero,
        Tri::X => Tri::X,
    }
}

/// Ripple-carry addition over tri-state bit lists; any X poisons the sum.
fn add_bits(a: &Bits, b: &Bits, w: u32) -> Bits {
    if !a.known() || !b.known() {
        return Bits::xes(w);
    }
    let a = a.resize(w);
    let b = b.resize(w);
    let mut out = Vec::with_capacity(w as usize);
    let mut carry = Tri::Zero;
    for i in 0..w as usize {
        let (x, y) = (a.0[i], b.0[i]);
        out.push(tri_xor(tri_xor(x, y), carry));
        carry = tri_or(tri_and(x, y), tri_or(tri_and(x, carry), tri_and(y, carry)));
    }
    Bits(out)
}

fn neg_bits(a: &Bits, w: u32) -> Bits {
    if !a.known() {
        return Bits::xes(w);
    }
    let inverted = Bits(a.resize(w).0.iter().map(|b| tri_not(*b)).collect());
    add_bits(&inverted, &Bits::from_u64(w, 1), w)
}

struct Env<'e> {
    elab: &'e ElaboratedDesign,
    values: HashMap<SignalId, Bits>,
}

impl<'e> Env<'e> {
    fn get(&self, id: SignalId) -> Bits {
        self.values
            .get(&id)
            .cloned()
            .unwrap_or_else(|| Bits::xes(self.elab.width_of(id)))
    }

    fn set(&mut self, id: SignalId, v: Bits) {
        self.values.insert(id, v.resize(self.elab.width_of(id)));
    }
}

fn eval(env: &Env, e: &ElabExpr, ctx: u32) -> Bits {
    let w = e.self_width.max(ctx).max(1);
    match &e.kind {
        ElabExprKind::Const(v) => {
            let mut bits = Vec::with_capacity(w as usize);
            for i in 0..w.min(v.width) {
                bits.push(if v.xmask >> i & 1 == 1 {
                    Tri::X
                } else if v.bits >> i & 1 == 1 {
                    Tri::One
                } else {
                    Tri::Zero
                });
            }
            Bits(bits).resize(w)
        }
        ElabExprKind::Sig(id) => env.get(*id).resize(w),
        ElabExprKind::BitSelect { base, index, const_index } => {
            let i = match const_index {
                Some(i) => Some(*i as u64),
                None => eval(env, index, 0).to_u64(),
            };
            let base_bits = env.get(*base);
            let bit = match i {
                Some(i) if (i as usize) < base_bits.0.len() => base_bits.0[i as usize],
                _ => Tri::X,
            };
            Bits(vec![bit]).resize(w)
        }
        ElabExprKind::PartSelect { base, msb, lsb } => {
            let base_bits = env.get(*base);
            Bits(base_bits.0[*lsb as usize..=*msb as usize].to_vec()).resize(w)
        }
        ElabExprKind::Concat(parts) => {
            // leftmost part is most significant
            let mut bits = Vec::new();
            for p in parts.iter().rev() {
                bits.extend(eval(env, p, 0).0);
            }
            Bits(bits).resize(w)
        }
        ElabExprKind::Unary { op, operand } => match op {
            UnaryOp::BitNot => Bits(eval(env, operand, w).0.iter().map(|b| tri_not(*b)).collect()),
            UnaryOp::Neg => neg_bits(&eval(env, operand, w), w),
            UnaryOp::LogNot => {
                let t = eval(env, operand, 0).truthiness();
                Bits(vec![match t {
                    Some(true) => Tri::Zero,
                    Some(false) => Tri::One,
                    None => Tri::X,
                }])
                .resize(w)
            }
            UnaryOp::RedAnd => {
                let v = eval(env, operand, 0);
                let bit = if v.0.iter().any(|b| *b == Tri::Zero) {
                    Tri::Zero
                } else if v.known() {
                    Tri::One
                } else {
                    Tri::X
                };
                Bits(vec![bit]).resize(w)
            }
            UnaryOp::RedOr => {
                let v = eval(env, operand, 0);
                let bit = if v.0.iter().any(|b| *b == Tri::One) {
                    Tri::One
                } else if v.known() {
                    Tri::Zero
                } else {
                    Tri::X
                };
                Bits(vec![bit]).resize(w)
            }
            UnaryOp::RedXor => {
                let v = eval(env, operand, 0);
                let bit = if !v.known() {
                    Tri::X
                } else {
                    let ones = v.0.iter().filter(|b| **b == Tri::One).count();
                    if ones % 2 == 1 {
                        Tri::One
                    } else {
                        Tri::Zero
                    }
                };
                Bits(vec![bit]).resize(w)
            }
        },
        ElabExprKind::Binary { op, left, right } => match op {
            BinaryOp::Add => add_bits(&eval(env, left, w), &eval(env, right, w), w),
            BinaryOp::Sub => {
                let (a, b) = (eval(env, left, w), eval(env, right, w));
                if !a.known() || !b.known() {
                    Bits::xes(w)
                } else {
                    add_bits(&a, &neg_bits(&b, w), w)
                }
            }
            BinaryOp::Mul | BinaryOp::Div | BinaryOp::Mod => {
                let (a, b) = (eval(env, left, w), eval(env, right, w));
                match (a.to_u64(), b.to_u64()) {
                    (Some(x), Some(y)) => match op {
                        BinaryOp::Mul => {
                            // schoolbook shift-add, wrapped to w bits
                            let mut acc = Bits::zeros(w);
                            for i in 0..w as usize {
                                if y >> i & 1 == 1 {
                                    let shifted = Bits::from_u64(w, if i >= 64 { 0 } else { x.wrapping_shl(i as u32) });
                                    acc = add_bits(&acc, &shifted, w);
                                }
                            }
                            acc
                        }
                        BinaryOp::Div => {
                            if y == 0 {
                                Bits::xes(w)
                            } else {
                                Bits::from_u64(w, x / y)
                            }
                        }
                        BinaryOp::Mod => {
                            if y == 0 {
                                Bits::xes(w)
                            } else {
                                Bits::from_u64(w, x % y)
                            }
                        }
                        _ => unreachable!(),
                    },
                    _ => Bits::xes(w),
                }
            }
            BinaryOp::BitAnd | BinaryOp::BitOr | BinaryOp::BitXor => {
                let a = eval(env, left, w).resize(w);
                let b = eval(env, right, w).resize(w);
                let f = match op {
                    BinaryOp::BitAnd => tri_and,
                    BinaryOp::BitOr => tri_or,
                    BinaryOp::BitXor => tri_xor,
                    _ => unreachable!(),
                };
                Bits(a.0.iter().zip(&b.0).map(|(x, y)| f(*x, *y)).collect())
            }
            BinaryOp::Shl | BinaryOp::Shr => {
                let a = eval(env, left, w).resize(w);
                match eval(env, right, 0).to_u64() {
                    None => Bits::xes(w),
                    Some(k) if k >= w as u64 => Bits::zeros(w),
                    Some(k) => {
                        let k = k as usize;
                        let mut out = vec![Tri::Zero; w as usize];
                        for i in 0..w as usize {
                            let src = match op {
                                BinaryOp::Shl => i.checked_sub(k),
                                BinaryOp::Shr => Some(i + k).filter(|s| *s < w as usize),
                                _ => unreachable!(),
                            };
                            if let Some(s) = src {
                                out[i] = a.0[s];
                            }
                        }
                        Bits(out)
                    }
                }
            }
            BinaryOp::Eq | BinaryOp::Ne => {
                let wc = left.self_width.max(right.self_width);
                let a = eval(env, left, wc).resize(wc);
                let b = eval(env, right, wc).resize(wc);
                let mut any_x = false;
                let mut definite_diff = false;
                for (x, y) in a.0.iter().zip(&b.0) {
                    match (x, y) {
                        (Tri::X, _) | (_, Tri::X) => any_x = true,
                        (x, y) if x != y => definite_diff = true,
                        _ => {}
                    }
                }
                let eq_bit = if definite_diff {
                    Tri::Zero
                } else if any_x {
                    Tri::X
                } else {
                    Tri::One
                };
                let bit = if *op == BinaryOp::Eq { eq_bit } else { tri_not(eq_bit) };
                Bits(vec![bit]).resize(w)
            }
            BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => {
                let wc = left.self_width.max(right.self_width);
                let a = eval(env, left, wc);
                let b = eval(env, right, wc);
                let bit = match (a.to_u64(), b.to_u64()) {
                    (Some(x), Some(y)) => {
                        let r = match op {
                            BinaryOp::Lt => x < y,
                            BinaryOp::Le => x <= y,
                            BinaryOp::Gt => x > y,
                            BinaryOp::Ge => x >= y,
                            _ => unreachable!(),
                        };
                        if r {
                            Tri::One
                        } else {
                            Tri::Zero
                        }
                    }
                    _ => Tri::X,
                };
                Bits(vec![bit]).resize(w)
            }
            BinaryOp::LogAnd | BinaryOp::LogOr => {
                let a = eval(env, left, 0).truthiness();
                let b = eval(env, right, 0).truthiness();
                let bit = match op {
                    BinaryOp::LogAnd => match (a, b) {
                        (Some(false), _) | (_, Some(false)) => Tri::Zero,
                        (Some(true), Some(true)) => Tri::One,
                        _ => Tri::X,
                    },
                    BinaryOp::LogOr => match (a, b) {
                        (Some(true), _) | (_, Some(true)) => Tri::One,
                        (Some(false), Some(false)) => Tri::Zero,
                        _ => Tri::X,
                    },
                    _ => unreachable!(),
                };
                Bits(vec![bit]).resize(w)
            }
        },
        ElabExprKind::Ternary { cond, then_expr, else_expr } => {
            let c = eval(env, cond, 0).truthiness();
            match c {
                Some(true) => eval(env, then_expr, w).resize(w),
                Some(false) => eval(env, else_expr, w).resize(w),
                None => {
                    let a = eval(env, then_expr, w).resize(w);
                    let b = eval(env, else_expr, w).resize(w);
                    Bits(
                        a.0.iter()
                            .zip(&b.0)
                            .map(|(x, y)| if x == y && *x != Tri::X { *x } else { Tri::X })
                            .collect(),
                    )
                }
            }
        }
    }
}

fn write_lvalue(env: &mut Env, lhs: &ElabLValue, v: Bits) {
    match lhs {
        ElabLValue::Sig(id) => env.set(*id, v),
        ElabLValue::Bits { base, msb, lsb } => {
            let mut cur = env.get(*base);
            let slice = v.resize(msb - lsb + 1);
            for (k, i) in (*lsb..=*msb).enumerate() {
                cur.0[i as usize] = slice.0[k];
            }
            env.set(*base, cur);
        }
        ElabLValue::Concat(parts) => {
            let mut hi = v.width();
            for p in parts {
                let pw = lvalue_width(env.elab, p);
                let lo = hi.saturating_sub(pw);
                let piece = Bits(v.0[lo as usize..hi as usize].to_vec());
                write_lvalue(env, p, piece);
                hi = lo;
            }
        }
    }
}

fn lvalue_width(elab: &ElaboratedDesign, lhs: &ElabLValue) -> u32 {
    match lhs {
        ElabLValue::Sig(id) => elab.width_of(*id),
        ElabLValue::Bits { msb, lsb, .. } => msb - lsb + 1,
        ElabLValue::Concat(parts) => parts.iter().map(|p| lvalue_width(elab, p)).sum(),
    }
}

fn exec_body(env: &mut Env, body: &[ElabStmt]) {
    for stmt in body {
        match stmt {
            ElabStmt::Assign { lhs, rhs, kind, .. } => {
                assert_eq!(*kind, AssignKind::Blocking, "oracle only handles combinational bodies");
                let w = lvalue_width(env.elab, lhs);
                let v = eval(env, rhs, w).resize(w);
                write_lvalue(env, lhs, v);
            }
            ElabStmt::If { cond, then_body, else_body, .. } => match eval(env, cond, 0).truthiness() {
                Some(true) => exec_body(env, then_body),
                Some(false) | None => exec_body(env, else_body),
            },
            ElabStmt::Case { selector, arms, default, .. } => {
                let sel = eval(env, selector, 0);
                let chosen = sel
                    .to_u64()
                    .and_then(|sv| {
                        arms.iter().find(|(labels, _)| {
                            labels.iter().any(|l| eval(env, l, 0).to_u64() == Some(sv))
                        })
                    })
                    .map(|(_, body)| body.as_slice())
                    .unwrap_or(default);
                exec_body(env, chosen);
            }
        }
    }
}

/// Topological order of combinational processes by def-use; self-edges are
/// ignored (a block may read what it already assigned).
fn topo_order(elab: &ElaboratedDesign) -> Vec<usize> {
    let n = elab.processes.len();
    let mut defs: Vec<Vec<SignalId>> = vec![Vec::new(); n];
    let mut reads: Vec<Vec<SignalId>> = vec![Vec::new(); n];
    for (i, p) in elab.processes.iter().enumerate() {
        match p {
            Process::Assign { lhs, reads: r, .. } => {
                lhs.bases(&mut defs[i]);
                reads[i] = r.clone();
            }
            Process::Comb { body, .. } => {
                collect_defs(body, &mut defs[i]);
                collect_reads(body, &mut reads[i]);
            }
            Process::Seq { .. } => panic!("oracle only handles combinational designs"),
        }
    }
    let def_of: HashMap<SignalId, usize> =
        defs.iter().enumerate().flat_map(|(i, ds)| ds.iter().map(move |d| (*d, i))).collect();
    let mut indeg = vec![0usize; n];
    let mut succs: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, rs) in reads.iter().enumerate() {
        for r in rs {
            if let Some(&j) = def_of.get(r) {
                if j != i {
                    succs[j].push(i);
                    indeg[i] += 1;
                }
            }
        }
    }
    let mut queue: Vec<usize> = (0..n).filter(|i| indeg[*i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(i) = queue.pop() {
        order.push(i);
        for &s in &succs[i] {
            indeg[s] -= 1;
            if indeg[s] == 0 {
                queue.push(s);
            }
        }
    }
    assert_eq!(order.len(), n, "combinational process graph has a cycle");
    order
}

fn collect_defs(body: &[ElabStmt], out: &mut Vec<SignalId>) {
    for s in body {
        match s {
            ElabStmt::Assign { lhs, .. } => lhs.bases(out),
            ElabStmt::If { then_body, else_body, .. } => {
                collect_defs(then_body, out);
                collect_defs(else_body, out);
            }
            ElabStmt::Case { arms, default, .. } => {
                for (_, b) in arms {
                    collect_defs(b, out);
                }
                collect_defs(default, out);
            }
        }
    }
}

fn collect_reads(body: &[ElabStmt], out: &mut Vec<SignalId>) {
    for s in body {
        match s {
            ElabStmt::Assign { rhs, .. } => rhs.read_signals(out),
            ElabStmt::If { cond, then_body, else_body, .. } => {
                cond.read_signals(out);
                collect_reads(then_body, out);
                collect_reads(else_body, out);
            }
            ElabStmt::Case { selector, arms, default, .. } => {
                selector.read_signals(out);
                for (labels, b) in arms {
                    for l in labels {
                        l.read_signals(out);
                    }
                    collect_reads(b, out);
                }
                collect_reads(default, out);
            }
        }
    }
}

/// Evaluate a pure combinational design for one input pattern.
pub fn oracle_eval(elab: &ElaboratedDesign, inputs: &HashMap<SignalId, u64>) -> HashMap<String, String> {
    let mut env = Env { elab, values: HashMap::new() };
    for (&id, &v) in inputs {
        env.set(id, Bits::from_u64(elab.width_of(id), v));
    }
    for pi in topo_order(elab) {
        match &elab.processes[pi] {
            Process::Assign { lhs, rhs, .. } => {
                let w = lvalue_width(elab, lhs);
                let v = eval(&env, rhs, w).resize(w);
                write_lvalue(&mut env, lhs, v);
            }
            Process::Comb { body, .. } => exec_body(&mut env, body),
            Process::Seq { .. } => unreachable!(),
        }
    }
    elab.top_outputs
        .iter()
        .map(|&o| (elab.signal(o).path.clone(), env.get(o).to_string_msb()))
        .collect()
}

fn is_combinational(elab: &ElaboratedDesign) -> bool {
    elab.processes.iter().all(|p| p.is_comb())
}

/// Exhaustive sim-vs-oracle equivalence over the corpus. Returns the number
/// of modules compared; exposed so the acceptance suite reuses it.
pub fn exhaustive_equivalence_over_corpus() -> usize {
    let corpus = load_corpus(default_corpus_dir()).unwrap();
    let mut compared = 0;
    for entry in &corpus {
        let (_, elab) = parse_and_elaborate(&entry.source).unwrap();
        if !is_combinational(&elab) {
            continue;
        }
        let data_bits: u32 = elab.top_inputs.iter().map(|&i| elab.width_of(i)).sum();
        if data_bits > EXHAUSTIVE_MAX_BITS {
            continue;
        }
        let stim = make_stimulus(&elab, StimMode::Exhaustive, 0, 0, None).unwrap();
        let trace = simulate(&elab, &stim).unwrap();
        for cycle in 0..=trace.horizon {
            let inputs: HashMap<SignalId, u64> = stim
                .inputs
                .iter()
                .enumerate()
                .map(|(idx, name)| (elab.lookup(name).unwrap(), stim.data_value(idx, cycle)))
                .collect();
            let expected = oracle_eval(&elab, &inputs);
            for (name, want) in &expected {
                let got = trace.query(name, cycle).unwrap().to_bin_string();
                assert_eq!(
                    &got, want,
                    "{}: output {name} differs at pattern {cycle}: sim {got} vs oracle {want}",
                    entry.name
                );
            }
        }
        compared += 1;
    }
    compared
}

