//! Mutation-based benchmark generation.
//!
//! Eight error kinds mirror common real-world Verilog mistakes: declaration
//! type and bitwidth misuse, operator/variable/value misuse in assignments,
//! wrong judgment values and sensitivity lists in conditions, and port
//! mismatches in instantiations. Each mutant carries exactly one edit, a
//! recorded before/after snippet pair (the oracle backend's mechanism), and
//! a verified class: syntax mutants fail parse/elaborate, functional mutants
//! elaborate and are triggered (pass rate < 1) under the default stimulus
//! suite. Mutations that survive verification unchanged are equivalent
//! mutants and are discarded.

use crate::ast::*;
use crate::elaborate::{elaborate, parse_and_elaborate};
use crate::parser::parse;
use crate::rng::SplitMix64;
use crate::source::{SourceFile, Span};
use crate::stimulus::{default_suite, SuiteConfig};
use crate::testbench::run_verify_suite;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MutationKind {
    TypeMisuse,
    BitwidthMisuse,
    OperatorMisuse,
    VariableNameMisuse,
    ValueMisuse,
    WrongJudgmentValue,
    WrongSensitivity,
    PortMismatch,
}

pub const ALL_KINDS: [MutationKind; 8] = [
    MutationKind::TypeMisuse,
    MutationKind::BitwidthMisuse,
    MutationKind::OperatorMisuse,
    MutationKind::VariableNameMisuse,
    MutationKind::ValueMisuse,
    MutationKind::WrongJudgmentValue,
    MutationKind::WrongSensitivity,
    MutationKind::PortMismatch,
];

impl MutationKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MutationKind::TypeMisuse => "type-misuse",
            MutationKind::BitwidthMisuse => "bitwidth-misuse",
            MutationKind::OperatorMisuse => "operator-misuse",
            MutationKind::VariableNameMisuse => "variable-name-misuse",
            MutationKind::ValueMisuse => "value-misuse",
            MutationKind::WrongJudgmentValue => "wrong-judgment-value",
            MutationKind::WrongSensitivity => "wrong-sensitivity",
            MutationKind::PortMismatch => "port-mismatch",
        }
    }
}

/// One candidate rewrite: byte edits (applied together) within a single AST
/// node's span.
#[derive(Debug, Clone)]
pub struct CandidateSite {
    pub kind: MutationKind,
    /// Non-overlapping (range, replacement) edits, sorted by start.
    pub edits: Vec<(std::ops::Range<usize>, String)>,
    /// Span of the AST node the site belongs to.
    pub node_span: Span,
    pub description: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MutantClass {
    Syntax,
    Functional,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mutant {
    pub id: String,
    pub module: String,
    pub family: String,
    pub kind: MutationKind,
    pub class: MutantClass,
    /// 1-based line of the mutation in the mutated file.
    pub ground_truth_line: u32,
    /// Original snippet (context-expanded to be unique).
    pub before: String,
    /// Injected snippet as it appears in the mutant.
    pub after: String,
    pub mutated_text: String,
    pub base_text: String,
}

#[derive(Debug, Error)]
pub enum InjectError {
    #[error("mutation produces no observable difference (equivalent mutant)")]
    EquivalentMutant,
    #[error("mutated design cannot be classified: {0}")]
    Unclassifiable(String),
    #[error("mutation snippet cannot be made unique for patching")]
    AmbiguousSite,
    #[error("edit produced text identical to the base")]
    NoEffect,
}

// --- site enumeration --------------------------------------------------------

/// All sites where `kind` applies, in deterministic source order.
pub fn enumerate_sites(design: &Design, src: &SourceFile, kind: MutationKind) -> Vec<CandidateSite> {
    let mut sites = Vec::new();
    for m in &design.modules {
        match kind {
            MutationKind::TypeMisuse => type_misuse_sites(m, src, &mut sites),
            MutationKind::BitwidthMisuse => bitwidth_sites(m, src, &mut sites),
            MutationKind::OperatorMisuse => operator_sites(m, src, &mut sites),
            MutationKind::VariableNameMisuse => variable_sites(m, src, &mut sites),
            MutationKind::ValueMisuse => value_sites(m, src, &mut sites),
            MutationKind::WrongJudgmentValue => judgment_sites(m, src, &mut sites),
            MutationKind::WrongSensitivity => sensitivity_sites(m, src, &mut sites),
            MutationKind::PortMismatch => port_sites(m, design, src, &mut sites),
        }
    }
    sites
}

fn slice<'a>(src: &'a SourceFile, span: Span) -> &'a str {
    &src.text[span.start.min(src.text.len())..span.end.min(src.text.len())]
}

/// Drop a `reg` keyword from a reg-kind port, or demote a standalone reg net
/// to `wire` (Table-style declaration type misuse).
fn type_misuse_sites(m: &ModuleDecl, src: &SourceFile, out: &mut Vec<CandidateSite>) {
    for p in &m.ports {
        if p.kind != NetKind::Reg {
            continue;
        }
        let text = slice(src, p.span);
        if let Some(pos) = find_keyword(text, "reg") {
            let start = p.span.start + pos;
            // remove "reg" plus one following space
            let mut end = start + 3;
            if src.text[end..].starts_with(' ') {
                end += 1;
            }
            out.push(CandidateSite {
                kind: MutationKind::TypeMisuse,
                edits: vec![(start..end, String::new())],
                node_span: p.span,
                description: format!("drop 'reg' from port '{}'", p.name),
            });
        }
    }
    for n in &m.nets {
        if n.kind != NetKind::Reg {
            continue;
        }
        let text = slice(src, n.span);
        if let Some(pos) = find_keyword(text, "reg") {
            let start = n.span.start + pos;
            out.push(CandidateSite {
                kind: MutationKind::TypeMisuse,
                edits: vec![(start..start + 3, "wire".to_string())],
                node_span: n.span,
                description: format!("declare reg '{}' as wire", n.name),
            });
        }
    }
}

fn find_keyword(text: &str, kw: &str) -> Option<usize> {
    let mut from = 0;
    while let Some(pos) = text[from..].find(kw) {
        let at = from + pos;
        let before_ok = at == 0 || !text.as_bytes()[at - 1].is_ascii_alphanumeric();
        let after = at + kw.len();
        let after_ok = after >= text.len() || !(text.as_bytes()[after].is_ascii_alphanumeric() || text.as_bytes()[after] == b'_');
        if before_ok && after_ok {
            return Some(at);
        }
        from = after;
    }
    None
}

/// Shrink (or, at the floor, widen) a declared range: `[8:0]` -> `[7:0]`.
fn bitwidth_sites(m: &ModuleDecl, src: &SourceFile, out: &mut Vec<CandidateSite>) {
    let mut push = |name: &str, range: &Option<Range>, node_span: Span| {
        let Some(r) = range else { return };
        let new_msb = if r.msb > r.lsb { r.msb - 1 } else { r.msb + 1 };
        out.push(CandidateSite {
            kind: MutationKind::BitwidthMisuse,
            edits: vec![(r.span.start..r.span.end, format!("[{}:{}]", new_msb, r.lsb))],
            node_span,
            description: format!("range of '{name}' [{}:{}] -> [{}:{}]", r.msb, r.lsb, new_msb, r.lsb),
        });
        let _ = src;
    };
    for p in &m.ports {
        push(&p.name, &p.range, p.span);
    }
    for n in &m.nets {
        push(&n.name, &n.range, n.span);
    }
}

const OP_SWAPS: [(BinaryOp, &str); 10] = [
    (BinaryOp::Add, "-"),
    (BinaryOp::Sub, "+"),
    (BinaryOp::BitAnd, "|"),
    (BinaryOp::BitOr, "&"),
    (BinaryOp::Eq, "!="),
    (BinaryOp::Ne, "=="),
    (BinaryOp::Lt, "<="),
    (BinaryOp::Le, "<"),
    (BinaryOp::Shl, ">>"),
    (BinaryOp::Shr, "<<"),
];

fn operator_sites(m: &ModuleDecl, src: &SourceFile, out: &mut Vec<CandidateSite>) {
    walk_module_exprs(m, &mut |e, node_span| {
        let Expr::Binary { op, op_span, .. } = e else { return };
        let Some((_, swap)) = OP_SWAPS.iter().find(|(o, _)| o == op) else { return };
        out.push(CandidateSite {
            kind: MutationKind::OperatorMisuse,
            edits: vec![(op_span.start..op_span.end, swap.to_string())],
            node_span,
            description: format!("'{}' -> '{}'", op.symbol(), swap),
        });
        let _ = src;
    });
}

/// Replace an identifier read with an in-scope same-width sibling.
fn variable_sites(m: &ModuleDecl, src: &SourceFile, out: &mut Vec<CandidateSite>) {
    let widths: BTreeMap<String, u32> = m
        .ports
        .iter()
        .map(|p| (p.name.clone(), p.width()))
        .chain(m.nets.iter().filter(|n| n.kind != NetKind::Integer).map(|n| (n.name.clone(), n.width())))
        .collect();
    walk_module_exprs(m, &mut |e, node_span| {
        let Expr::Ident { name, span } = e else { return };
        let Some(w) = widths.get(name) else { return };
        // deterministic sibling: first same-width name that differs
        let Some((sibling, _)) = widths.iter().find(|(n2, w2)| *n2 != name && *w2 == w) else {
            return;
        };
        out.push(CandidateSite {
            kind: MutationKind::VariableNameMisuse,
            edits: vec![(span.start..span.end, sibling.clone())],
            node_span,
            description: format!("read '{name}' -> '{sibling}'"),
        });
        let _ = src;
    });
}

/// Flip a sized literal in an assignment RHS: zero becomes one, nonzero
/// becomes zero, keeping the base notation.
fn value_sites(m: &ModuleDecl, src: &SourceFile, out: &mut Vec<CandidateSite>) {
    walk_module_assign_rhs(m, &mut |rhs, node_span| {
        walk_expr(rhs, &mut |e| {
            let Expr::Literal(lit) = e else { return };
            let Some(width) = lit.width else { return };
            // skip literals inside comparisons; those belong to judgment sites
            let new_value = if lit.value == 0 { 1 } else { 0 };
            let base_ch = match lit.base {
                LiteralBase::Bin => 'b',
                LiteralBase::Oct => 'o',
                LiteralBase::Dec => 'd',
                LiteralBase::Hex => 'h',
            };
            out.push(CandidateSite {
                kind: MutationKind::ValueMisuse,
                edits: vec![(lit.span.start..lit.span.end, format!("{width}'{base_ch}{new_value}"))],
                node_span,
                description: format!("literal {} -> {width}'{base_ch}{new_value}", lit.text),
            });
            let _ = src;
        });
    });
}

/// Perturb a constant compare bound (`i < 7` -> `i < 15`) or a for-loop
/// bound, doubling-plus-one per the classic off-by-pattern.
fn judgment_sites(m: &ModuleDecl, src: &SourceFile, out: &mut Vec<CandidateSite>) {
    walk_module_exprs(m, &mut |e, node_span| {
        let Expr::Binary { op, right, .. } = e else { return };
        if !matches!(op, BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge | BinaryOp::Eq | BinaryOp::Ne) {
            return;
        }
        let Expr::Literal(lit) = &**right else { return };
        let cap = lit.width.map(crate::value::width_mask).unwrap_or(u64::MAX);
        let doubled = lit.value.wrapping_mul(2).wrapping_add(1) & cap;
        let new_value = if doubled != lit.value { doubled } else { lit.value ^ 1 };
        let new_text = match lit.width {
            None => format!("{new_value}"),
            Some(w) => {
                let base_ch = match lit.base {
                    LiteralBase::Bin => 'b',
                    LiteralBase::Oct => 'o',
                    LiteralBase::Dec => 'd',
                    LiteralBase::Hex => 'h',
                };
                if base_ch == 'b' {
                    format!("{w}'b{new_value:b}")
                } else if base_ch == 'h' {
                    format!("{w}'h{new_value:x}")
                } else {
                    format!("{w}'{base_ch}{new_value}")
                }
            }
        };
        out.push(CandidateSite {
            kind: MutationKind::WrongJudgmentValue,
            edits: vec![(lit.span.start..lit.span.end, new_text.clone())],
            node_span,
            description: format!("bound {} -> {new_text}", lit.text),
        });
        let _ = src;
    });
}

/// Drop one edge from a multi-edge sensitivity list.
fn sensitivity_sites(m: &ModuleDecl, src: &SourceFile, out: &mut Vec<CandidateSite>) {
    for item in &m.items {
        let ModuleItem::Always(block) = item else { continue };
        let Sensitivity::Edges(edges) = &block.sensitivity else { continue };
        if edges.len() < 2 {
            continue;
        }
        for drop_idx in 0..edges.len() {
            let kept: Vec<String> = edges
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != drop_idx)
                .map(|(_, e)| {
                    let kw = match e.edge {
                        EdgeKind::Pos => "posedge",
                        EdgeKind::Neg => "negedge",
                    };
                    format!("{kw} {}", e.signal)
                })
                .collect();
            out.push(CandidateSite {
                kind: MutationKind::WrongSensitivity,
                edits: vec![(block.sens_span.start..block.sens_span.end, format!("@({})", kept.join(" or ")))],
                node_span: block.sens_span,
                description: format!("drop edge on '{}'", edges[drop_idx].signal),
            });
        }
        let _ = src;
    }
}

/// Swap two same-width identifier connections, or narrow a concatenation
/// connection to its last element.
fn port_sites(m: &ModuleDecl, design: &Design, src: &SourceFile, out: &mut Vec<CandidateSite>) {
    for item in &m.items {
        let ModuleItem::Instance(inst) = item else { continue };
        let Some(child) = design.module(&inst.module_name) else { continue };
        // narrow a concat input
        for conn in &inst.connections {
            let Some(Expr::Concat { parts, span }) = &conn.expr else { continue };
            let Some(last) = parts.last() else { continue };
            let last_text = slice(src, last.span()).to_string();
            out.push(CandidateSite {
                kind: MutationKind::PortMismatch,
                edits: vec![(span.start..span.end, last_text)],
                node_span: inst.span,
                description: format!("narrow concat on port '{}'", conn.port),
            });
        }
        // swap two same-width plain-identifier connections (inputs only, to
        // keep the result elaborable)
        let conn_width = |conn: &Connection| -> Option<(u32, Span, String)> {
            let Some(Expr::Ident { name, span }) = &conn.expr else { return None };
            let port = child.ports.iter().find(|p| p.name == conn.port)?;
            if port.direction != Direction::Input {
                return None;
            }
            Some((m.width_of(name)?, *span, name.clone()))
        };
        for i in 0..inst.connections.len() {
            for j in i + 1..inst.connections.len() {
                let (Some((wa, sa, na)), Some((wb, sb, nb))) =
                    (conn_width(&inst.connections[i]), conn_width(&inst.connections[j]))
                else {
                    continue;
                };
                if wa != wb || na == nb {
                    continue;
                }
                let mut edits = vec![(sa.start..sa.end, nb.clone()), (sb.start..sb.end, na.clone())];
                edits.sort_by_key(|(r, _)| r.start);
                out.push(CandidateSite {
                    kind: MutationKind::PortMismatch,
                    edits,
                    node_span: inst.span,
                    description: format!("swap connections '{na}' and '{nb}'"),
                });
            }
        }
    }
}

// --- AST walkers ---------------------------------------------------------

fn walk_module_exprs(m: &ModuleDecl, f: &mut impl FnMut(&Expr, Span)) {
    for item in &m.items {
        match item {
            ModuleItem::Assign(a) => walk_expr_spanned(&a.rhs, a.span, f),
            ModuleItem::Always(b) => walk_stmt_exprs(&b.body, f),
            ModuleItem::Instance(inst) => {
                for c in &inst.connections {
                    if let Some(e) = &c.expr {
                        walk_expr_spanned(e, c.span, f);
                    }
                }
            }
        }
    }
}

fn walk_stmt_exprs(s: &Stmt, f: &mut impl FnMut(&Expr, Span)) {
    match s {
        Stmt::Block { stmts, .. } => {
            for st in stmts {
                walk_stmt_exprs(st, f);
            }
        }
        Stmt::Assign { rhs, span, .. } => walk_expr_spanned(rhs, *span, f),
        Stmt::If { cond, then_branch, else_branch, span } => {
            walk_expr_spanned(cond, *span, f);
            walk_stmt_exprs(then_branch, f);
            if let Some(e) = else_branch {
                walk_stmt_exprs(e, f);
            }
        }
        Stmt::Case { selector, arms, default, span } => {
            walk_expr_spanned(selector, *span, f);
            for arm in arms {
                walk_stmt_exprs(&arm.body, f);
            }
            if let Some(d) = default {
                walk_stmt_exprs(d, f);
            }
        }
        Stmt::For { cond, body, span, .. } => {
            walk_expr_spanned(cond, *span, f);
            walk_stmt_exprs(body, f);
        }
    }
}

fn walk_expr_spanned(e: &Expr, node_span: Span, f: &mut impl FnMut(&Expr, Span)) {
    f(e, node_span);
    match e {
        Expr::BitSelect { index, .. } => walk_expr_spanned(index, node_span, f),
        Expr::PartSelect { msb, lsb, .. } => {
            walk_expr_spanned(msb, node_span, f);
            walk_expr_spanned(lsb, node_span, f);
        }
        Expr::Concat { parts, .. } => {
            for p in parts {
                walk_expr_spanned(p, node_span, f);
            }
        }
        Expr::Unary { operand, .. } => walk_expr_spanned(operand, node_span, f),
        Expr::Binary { left, right, .. } => {
            walk_expr_spanned(left, node_span, f);
            walk_expr_spanned(right, node_span, f);
        }
        Expr::Ternary { cond, then_expr, else_expr, .. } => {
            walk_expr_spanned(cond, node_span, f);
            walk_expr_spanned(then_expr, node_span, f);
            walk_expr_spanned(else_expr, node_span, f);
        }
        Expr::Literal(_) | Expr::Ident { .. } => {}
    }
}

fn walk_module_assign_rhs(m: &ModuleDecl, f: &mut impl FnMut(&Expr, Span)) {
    for item in &m.items {
        match item {
            ModuleItem::Assign(a) => f(&a.rhs, a.span),
            ModuleItem::Always(b) => walk_stmt_assign_rhs(&b.body, f),
            ModuleItem::Instance(_) => {}
        }
    }
}

fn walk_stmt_assign_rhs(s: &Stmt, f: &mut impl FnMut(&Expr, Span)) {
    match s {
        Stmt::Block { stmts, .. } => {
            for st in stmts {
                walk_stmt_assign_rhs(st, f);
            }
        }
        Stmt::Assign { rhs, span, .. } => f(rhs, *span),
        Stmt::If { then_branch, else_branch, .. } => {
            walk_stmt_assign_rhs(then_branch, f);
            if let Some(e) = else_branch {
                walk_stmt_assign_rhs(e, f);
            }
        }
        Stmt::Case { arms, default, .. } => {
            for arm in arms {
                walk_stmt_assign_rhs(&arm.body, f);
            }
            if let Some(d) = default {
                walk_stmt_assign_rhs(d, f);
            }
        }
        Stmt::For { body, .. } => walk_stmt_assign_rhs(body, f),
    }
}

fn walk_expr(e: &Expr, f: &mut impl FnMut(&Expr)) {
    f(e);
    match e {
        Expr::BitSelect { index, .. } => walk_expr(index, f),
        Expr::PartSelect { msb, lsb, .. } => {
            walk_expr(msb, f);
            walk_expr(lsb, f);
        }
        Expr::Concat { parts, .. } => {
            for p in parts {
                walk_expr(p, f);
            }
        }
        Expr::Unary { operand, .. } => walk_expr(operand, f),
        Expr::Binary { left, right, .. } => {
            // comparison RHS literals are judgment-value territory
            if let (true, Expr::Literal(_)) = (is_comparison(e), &**right) {
                walk_expr(left, f);
                return;
            }
            walk_expr(left, f);
            walk_expr(right, f);
        }
        Expr::Ternary { cond, then_expr, else_expr, .. } => {
            walk_expr(cond, f);
            walk_expr(then_expr, f);
            walk_expr(else_expr, f);
        }
        Expr::Literal(_) | Expr::Ident { .. } => {}
    }
}

fn is_comparison(e: &Expr) -> bool {
    matches!(e, Expr::Binary { op, .. } if op.is_comparison())
}

// --- injection -----------------------------------------------------------

/// Apply a site's edits and classify the result. The before/after snippets
/// are the affected source lines, context-expanded upward until they match
/// uniquely in both the base and mutated texts.
pub fn inject(
    base: &SourceFile,
    site: &CandidateSite,
    golden_elab: &crate::elaborate::ElaboratedDesign,
    suite_cfg: &SuiteConfig,
    id: String,
    module: String,
    family: String,
) -> Result<Mutant, InjectError> {
    let mut text = base.text.clone();
    for (range, replacement) in site.edits.iter().rev() {
        text.replace_range(range.clone(), replacement);
    }
    if text == base.text {
        return Err(InjectError::NoEffect);
    }

    // line range touched by the edits, in the base file
    let first_line = base.line_of(site.edits.first().unwrap().0.start);
    let last_line = base.line_of(site.edits.last().unwrap().0.end.saturating_sub(1).max(site.edits.last().unwrap().0.start));
    let mutated = SourceFile::new(base.path.clone(), text.clone());

    let (before, after) = unique_snippets(base, &mutated, first_line, last_line)?;

    // classify
    let class = match parse(&mutated) {
        Err(_) => MutantClass::Syntax,
        Ok(design) => match elaborate(&design) {
            Err(_) => MutantClass::Syntax,
            Ok(mut elab) => {
                elab.file = mutated.path.display().to_string();
                let suite = default_suite(golden_elab, suite_cfg)
                    .map_err(|e| InjectError::Unclassifiable(e.to_string()))?;
                match run_verify_suite(&elab, golden_elab, &suite) {
                    Ok(report) if report.pass_rate < 1.0 => MutantClass::Functional,
                    Ok(_) => return Err(InjectError::EquivalentMutant),
                    // a mutant that breaks simulation (comb loop) is real
                    // but cannot be scored deterministically; skip it
                    Err(e) => return Err(InjectError::Unclassifiable(e.to_string())),
                }
            }
        },
    };

    Ok(Mutant {
        id,
        module,
        family,
        kind: site.kind,
        class,
        ground_truth_line: first_line,
        before,
        after,
        mutated_text: text,
        base_text: base.text.clone(),
    })
}

/// Line snippets for the oracle patch pair, expanded upward with preceding
/// lines until the after-snippet is unique in the mutated text and the
/// before-snippet is unique in the base text.
fn unique_snippets(
    base: &SourceFile,
    mutated: &SourceFile,
    first_line: u32,
    last_line: u32,
) -> Result<(String, String), InjectError> {
    for context in 0..4u32 {
        let start = first_line.saturating_sub(context).max(1);
        let before = lines_snippet(base, start, last_line);
        let after = lines_snippet(mutated, start, last_line);
        if before == after {
            continue;
        }
        if count_matches(&mutated.text, &after) == 1 && count_matches(&base.text, &before) == 1 {
            return Ok((before, after));
        }
    }
    Err(InjectError::AmbiguousSite)
}

/// Snippet convention shared with the patcher: the first line is trimmed of
/// indentation, later lines are verbatim.
fn lines_snippet(src: &SourceFile, start_line: u32, end_line: u32) -> String {
    let mut out = String::new();
    for line in start_line..=end_line {
        if line > start_line {
            out.push('\n');
        }
        let text = src.line_text(line);
        out.push_str(if line == start_line { text.trim_start() } else { text });
    }
    out
}

/// Occurrence count under the patcher's whitespace-normalized matching.
fn count_matches(text: &str, snippet: &str) -> usize {
    use crate::agent::{apply_patchset, PatchError, PatchPair, PatchSet};
    let ps = PatchSet {
        pairs: vec![PatchPair { wrong: snippet.to_string(), right: snippet.to_string() }],
        raw: String::new(),
    };
    let rep = apply_patchset(text, &ps);
    match rep.issues.first() {
        None => 1,
        Some((_, PatchError::AmbiguousMatch { count, .. })) => *count,
        Some((_, PatchError::NoMatch(_))) => 0,
    }
}

// --- benchmark assembly ----------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Plan {
    /// Mutants requested per (module, kind).
    pub per_kind: usize,
}

impl Default for Plan {
    fn default() -> Self {
        Plan { per_kind: 1 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub module: String,
    pub family: String,
    pub kind: MutationKind,
    pub class: MutantClass,
    pub line: u32,
    pub before: String,
    pub after: String,
    pub file: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct BenchmarkSet {
    pub mutants: Vec<Mutant>,
    /// (family, kind) cells where no candidate site existed ("x" cells in the
    /// heat map).
    pub empty_cells: Vec<(String, MutationKind)>,
    pub discarded_equivalent: usize,
}

impl BenchmarkSet {
    pub fn manifest(&self) -> Vec<ManifestEntry> {
        self.mutants
            .iter()
            .map(|m| ManifestEntry {
                id: m.id.clone(),
                module: m.module.clone(),
                family: m.family.clone(),
                kind: m.kind,
                class: m.class,
                line: m.ground_truth_line,
                before: m.before.clone(),
                after: m.after.clone(),
                file: format!("mutants/{}.v", m.id),
            })
            .collect()
    }

    pub fn manifest_json(&self) -> serde_json::Value {
        serde_json::to_value(self.manifest()).expect("manifest serializes")
    }
}

/// A golden design plus its metadata, as loaded from the corpus.
#[derive(Debug, Clone)]
pub struct GoldenEntry {
    pub name: String,
    pub family: String,
    pub spec: String,
    pub source: SourceFile,
}

/// Deterministic (seeded) benchmark construction: per module and kind, try
/// shuffled candidate sites until `plan.per_kind` non-equivalent mutants are
/// injected or the sites run out.
pub fn build_benchmark(corpus: &[GoldenEntry], plan: &Plan, seed: u64) -> BenchmarkSet {
    let mut set = BenchmarkSet::default();
    let mut family_kind_hits: BTreeMap<(String, MutationKind), usize> = BTreeMap::new();
    for entry in corpus {
        let Ok((design, golden_elab)) = parse_and_elaborate(&entry.source) else {
            continue; // corpus validity is checked before benchmark construction
        };
        for kind in ALL_KINDS {
            let mut sites = enumerate_sites(&design, &entry.source, kind);
            let key = (entry.family.clone(), kind);
            if sites.is_empty() {
                family_kind_hits.entry(key).or_insert(0);
                continue;
            }
            let mut rng = SplitMix64::new(seed ^ hash_name(&entry.name) ^ (kind as u64).wrapping_mul(0x9E37));
            rng.shuffle(&mut sites);
            let mut made = 0usize;
            for site in &sites {
                if made >= plan.per_kind {
                    break;
                }
                let id = format!("{}_{}_{:02}", entry.name, kind.as_str(), made);
                match inject(
                    &entry.source,
                    site,
                    &golden_elab,
                    &SuiteConfig::default(),
                    id,
                    entry.name.clone(),
                    entry.family.clone(),
                ) {
                    Ok(mutant) => {
                        set.mutants.push(mutant);
                        made += 1;
                    }
                    Err(InjectError::EquivalentMutant) => set.discarded_equivalent += 1,
                    Err(_) => {}
                }
            }
            *family_kind_hits.entry(key).or_insert(0) += made;
        }
    }
    for ((family, kind), count) in family_kind_hits {
        if count == 0 {
            set.empty_cells.push((family, kind));
        }
    }
    set.empty_cells.sort();
    set.empty_cells.dedup();
    set
}

fn hash_name(name: &str) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    const COUNTER: &str = "module counter(\n    input wire clk,\n    input wire rstn,\n    input wire en,\n    output reg [7:0] count\n);\n    always @(posedge clk or negedge rstn) begin\n        if (!rstn) count <= 8'd0;\n        else if (en) count <= count + 8'd1;\n    end\nendmodule\n";
    const ADDER: &str = "module adder(\n    input wire [3:0] a,\n    input wire [3:0] b,\n    output wire [4:0] result\n);\n    assign result = a + b;\nendmodule\n";

    fn golden(name: &str, text: &str) -> GoldenEntry {
        GoldenEntry {
            name: name.to_string(),
            family: name.to_string(),
            spec: String::new(),
            source: SourceFile::new(format!("{name}.v"), text),
        }
    }

    fn sites_of(text: &str, kind: MutationKind) -> Vec<CandidateSite> {
        let src = SourceFile::new("t.v", text);
        let d = crate::parser::parse(&src).unwrap();
        enumerate_sites(&d, &src, kind)
    }

    #[test]
    fn combinational_module_has_no_sensitivity_sites() {
        assert!(sites_of(ADDER, MutationKind::WrongSensitivity).is_empty());
    }

    #[test]
    fn operator_site_found_with_swap() {
        let sites = sites_of(ADDER, MutationKind::OperatorMisuse);
        assert_eq!(sites.len(), 1);
        assert_eq!(sites[0].edits[0].1, "-");
    }

    #[test]
    fn bitwidth_site_shrinks_range() {
        let sites = sites_of(COUNTER, MutationKind::BitwidthMisuse);
        assert!(sites.iter().any(|s| s.edits[0].1 == "[6:0]"));
    }

    #[test]
    fn counter_covers_most_kinds() {
        // sequential module: sensitivity sites exist, two of them
        let sens = sites_of(COUNTER, MutationKind::WrongSensitivity);
        assert_eq!(sens.len(), 2);
        assert!(!sites_of(COUNTER, MutationKind::TypeMisuse).is_empty());
        assert!(!sites_of(COUNTER, MutationKind::ValueMisuse).is_empty());
    }

    #[test]
    fn inject_type_misuse_is_syntax_class() {
        let entry = golden("counter", COUNTER);
        let (_, elab) = parse_and_elaborate(&entry.source).unwrap();
        let sites = sites_of(COUNTER, MutationKind::TypeMisuse);
        let m = inject(&entry.source, &sites[0], &elab, &SuiteConfig::default(), "m0".into(), "counter".into(), "counter".into()).unwrap();
        assert_eq!(m.class, MutantClass::Syntax);
        assert!(crate::parser::parse(&SourceFile::new("m.v", m.mutated_text.clone())).is_err());
    }

    #[test]
    fn inject_operator_misuse_is_functional_and_reversible() {
        let entry = golden("adder", ADDER);
        let (_, elab) = parse_and_elaborate(&entry.source).unwrap();
        let sites = sites_of(ADDER, MutationKind::OperatorMisuse);
        let m = inject(&entry.source, &sites[0], &elab, &SuiteConfig::default(), "m0".into(), "adder".into(), "adder".into()).unwrap();
        assert_eq!(m.class, MutantClass::Functional);
        assert_eq!(m.ground_truth_line, 6);
        // reversibility: applying (after -> before) over the mutated text
        // restores the base text exactly
        let ps = crate::agent::PatchSet {
            pairs: vec![crate::agent::PatchPair { wrong: m.after.clone(), right: m.before.clone() }],
            raw: String::new(),
        };
        let rep = crate::agent::apply_patchset(&m.mutated_text, &ps);
        assert!(rep.issues.is_empty(), "{:?}", rep.issues);
        assert_eq!(rep.text, m.base_text);
    }

    #[test]
    fn equivalent_mutant_discarded() {
        // the comparison sits in an unreachable branch: en & ~en is always 0
        let text = "module m(\n    input wire [3:0] a,\n    input wire en,\n    output reg [3:0] y\n);\n    always @(*) begin\n        if (en & ~en) begin\n            if (a == 4'd2) y = 4'd1;\n            else y = 4'd0;\n        end\n        else y = a;\n    end\nendmodule\n";
        let entry = golden("dead", text);
        let (_, elab) = parse_and_elaborate(&entry.source).unwrap();
        let sites = sites_of(text, MutationKind::OperatorMisuse);
        // find the == -> != swap inside the dead branch
        let site = sites.iter().find(|s| s.edits[0].1 == "!=").expect("eq site");
        match inject(&entry.source, site, &elab, &SuiteConfig::default(), "m".into(), "dead".into(), "dead".into()) {
            Err(InjectError::EquivalentMutant) => {}
            other => panic!("expected EquivalentMutant, got {other:?}"),
        }
    }

    #[test]
    fn single_site_property() {
        let entry = golden("counter", COUNTER);
        let (design, elab) = parse_and_elaborate(&entry.source).unwrap();
        let src = &entry.source;
        for kind in ALL_KINDS {
            for site in enumerate_sites(&design, src, kind) {
                let Ok(m) = inject(src, &site, &elab, &SuiteConfig::default(), "x".into(), "c".into(), "c".into()) else {
                    continue;
                };
                // the byte diff lies within the site's node span
                let diff_start = m
                    .base_text
                    .bytes()
                    .zip(m.mutated_text.bytes())
                    .position(|(a, b)| a != b)
                    .unwrap();
                assert!(
                    diff_start >= site.node_span.start && diff_start < site.node_span.end + 8,
                    "diff at {diff_start} outside node span {:?} for {kind:?}",
                    site.node_span
                );
            }
        }
    }

    #[test]
    fn benchmark_build_deterministic() {
        let corpus = vec![golden("adder", ADDER), golden("counter", COUNTER)];
        let a = build_benchmark(&corpus, &Plan::default(), 42);
        let b = build_benchmark(&corpus, &Plan::default(), 42);
        assert_eq!(serde_json::to_string(&a.manifest_json()).unwrap(), serde_json::to_string(&b.manifest_json()).unwrap());
        assert!(!a.mutants.is_empty());
        // counter (sequential) must carry a wrong-sensitivity mutant
        assert!(a
            .mutants
            .iter()
            .any(|m| m.module == "counter" && m.kind == MutationKind::WrongSensitivity));
        // plan satisfaction: at most 8 kinds x per_kind per module
        let counter_count = a.mutants.iter().filter(|m| m.module == "counter").count();
        assert!(counter_count <= 8);
        // adder has no sensitivity or port sites -> empty cells recorded
        assert!(a
            .empty_cells
            .iter()
            .any(|(f, k)| f == "adder" && *k == MutationKind::WrongSensitivity));
    }

    #[test]
    fn manifest_schema() {
        let corpus = vec![golden("adder", ADDER)];
        let set = build_benchmark(&corpus, &Plan::default(), 1);
        let j = set.manifest_json();
        let first = &j[0];
        for key in ["id", "module", "kind", "class", "line", "before", "after"] {
            assert!(first.get(key).is_some(), "manifest entry missing '{key}'");
        }
    }
}
