//! Static analysis and template fixes.
//!
//! Six warning kinds are detected; W1-W3 carry template rewrites, W4-W6 are
//! report-only and flow to the repair agent as error info instead:
//!
//! - W1: nonblocking assignment inside `always @(*)`
//! - W2: blocking assignment inside an edge-triggered block
//! - W3: async reset branch whose signal is missing from the sensitivity list
//! - W4: RHS/LHS width mismatch in assignments and port connections
//! - W5: signal read but never driven
//! - W6: case without default that does not cover all selector values
//!
//! `preprocess` iterates parse -> agent (on syntax errors) -> template fixes
//! (on fixable warnings) until both are clean or the round budget runs out.

use crate::agent::{apply_patchset, request_patches, ErrPayload, PromptProfile, RepairBackend, RepairMode, RepairRequest};
use crate::ast::*;
use crate::elaborate::{elaborate, ElaboratedDesign};
use crate::parser::parse;
use crate::printer::print;
use crate::source::{Diagnostic, SourceFile, Span};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum WarnCode {
    W1,
    W2,
    W3,
    W4,
    W5,
    W6,
}

impl WarnCode {
    pub fn as_str(&self) -> &'static str {
        match self {
            WarnCode::W1 => "W1",
            WarnCode::W2 => "W2",
            WarnCode::W3 => "W3",
            WarnCode::W4 => "W4",
            WarnCode::W5 => "W5",
            WarnCode::W6 => "W6",
        }
    }

    pub fn fixable(&self) -> bool {
        matches!(self, WarnCode::W1 | WarnCode::W2 | WarnCode::W3)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Warning {
    pub code: WarnCode,
    pub span: Span,
    pub message: String,
    pub fixable: bool,
    /// For W3: the edge to add.
    pub fix_edge: Option<(EdgeKind, String)>,
}

impl Warning {
    fn new(code: WarnCode, span: Span, message: impl Into<String>) -> Warning {
        Warning { code, span, message: message.into(), fixable: code.fixable(), fix_edge: None }
    }

    pub fn to_diagnostic(&self) -> Diagnostic {
        Diagnostic::warning(self.span.start_line, 1, self.code.as_str(), self.message.clone())
    }
}

#[derive(Debug, Error)]
pub enum LintError {
    #[error("warning {0} at line {1} has no template fix")]
    NotFixable(&'static str, u32),
}

/// All warnings over the design, ordered by (line, code).
pub fn lint(design: &Design, elab: &ElaboratedDesign) -> Vec<Warning> {
    let mut warns = Vec::new();
    for m in &design.modules {
        lint_module(m, &mut warns);
    }
    // W4 pool comes from elaboration (assignment and connection widths)
    for d in &elab.width_warnings {
        warns.push(Warning::new(
            WarnCode::W4,
            Span::new(0, 0, d.line, d.line),
            d.message.clone(),
        ));
    }
    for id in &elab.undriven_reads {
        let info = elab.signal(*id);
        warns.push(Warning::new(
            WarnCode::W5,
            Span::new(0, 0, info.decl_line, info.decl_line),
            format!("'{}' is read but never driven", info.path),
        ));
    }
    warns.sort_by(|a, b| a.span.start_line.cmp(&b.span.start_line).then(a.code.cmp(&b.code)));
    warns
}

fn lint_module(m: &ModuleDecl, warns: &mut Vec<Warning>) {
    for item in &m.items {
        let ModuleItem::Always(block) = item else { continue };
        match &block.sensitivity {
            Sensitivity::Star | Sensitivity::Levels(_) => {
                walk_assigns(&block.body, &mut |kind, span| {
                    if kind == AssignKind::NonBlocking {
                        warns.push(Warning::new(
                            WarnCode::W1,
                            span,
                            "nonblocking assignment in a combinational block; use '='",
                        ));
                    }
                });
            }
            Sensitivity::Edges(edges) => {
                walk_assigns(&block.body, &mut |kind, span| {
                    if kind == AssignKind::Blocking {
                        warns.push(Warning::new(
                            WarnCode::W2,
                            span,
                            "blocking assignment in an edge-triggered block; use '<='",
                        ));
                    }
                });
                if let Some((edge, signal, line)) = missing_reset_edge(m, block, edges) {
                    let mut w = Warning::new(
                        WarnCode::W3,
                        block.sens_span,
                        format!(
                            "reset branch reads '{signal}' (line {line}) but the sensitivity list has no edge for it"
                        ),
                    );
                    w.fix_edge = Some((edge, signal));
                    warns.push(w);
                }
            }
        }
        lint_cases(m, &block.body, warns);
    }
}

fn walk_assigns(s: &Stmt, f: &mut impl FnMut(AssignKind, Span)) {
    match s {
        Stmt::Block { stmts, .. } => {
            for st in stmts {
                walk_assigns(st, f);
            }
        }
        Stmt::Assign { kind, span, .. } => f(*kind, *span),
        Stmt::If { then_branch, else_branch, .. } => {
            walk_assigns(then_branch, f);
            if let Some(e) = else_branch {
                walk_assigns(e, f);
            }
        }
        Stmt::Case { arms, default, .. } => {
            for arm in arms {
                walk_assigns(&arm.body, f);
            }
            if let Some(d) = default {
                walk_assigns(d, f);
            }
        }
        Stmt::For { body, .. } => walk_assigns(body, f),
    }
}

/// W3 pattern: the top-level statement of an edge block is `if (c) ...`
/// where `c` reads exactly one 1-bit reset-named signal that has no edge in
/// the list. Requiring a reset-style name keeps the template from grafting
/// spurious edges onto blocks guarded by ordinary data signals.
fn missing_reset_edge(m: &ModuleDecl, block: &AlwaysBlock, edges: &[EdgeEvent]) -> Option<(EdgeKind, String, u32)> {
    let top = match &block.body {
        Stmt::Block { stmts, .. } => stmts.first()?,
        other => other,
    };
    let Stmt::If { cond, span, .. } = top else { return None };
    let (signal, negated) = match cond {
        Expr::Ident { name, .. } => (name.clone(), false),
        Expr::Unary { op, operand, .. } if matches!(op, UnaryOp::LogNot | UnaryOp::BitNot) => match &**operand {
            Expr::Ident { name, .. } => (name.clone(), true),
            _ => return None,
        },
        _ => return None,
    };
    if m.width_of(&signal) != Some(1) {
        return None;
    }
    crate::stimulus::reset_polarity(&signal.to_ascii_lowercase())?;
    if edges.iter().any(|e| e.signal == signal) {
        return None;
    }
    // `if (!rstn)` wants a negedge, `if (rst)` a posedge
    let edge = if negated { EdgeKind::Neg } else { EdgeKind::Pos };
    Some((edge, signal, span.start_line))
}

/// W6: case without default whose labels do not cover the selector space.
fn lint_cases(m: &ModuleDecl, s: &Stmt, warns: &mut Vec<Warning>) {
    match s {
        Stmt::Block { stmts, .. } => {
            for st in stmts {
                lint_cases(m, st, warns);
            }
        }
        Stmt::Case { selector, arms, default, span } => {
            if default.is_none() {
                let sel_width = static_width(m, selector);
                let covered: std::collections::HashSet<u64> = arms
                    .iter()
                    .flat_map(|a| a.labels.iter())
                    .filter_map(|l| match l {
                        Expr::Literal(lit) => Some(lit.value),
                        _ => None,
                    })
                    .collect();
                let full = sel_width.map(|w| w <= 20 && covered.len() as u64 == 1u64 << w).unwrap_or(false);
                if !full {
                    warns.push(Warning::new(
                        WarnCode::W6,
                        *span,
                        "case has no default and does not cover every selector value",
                    ));
                }
            }
            for arm in arms {
                lint_cases(m, &arm.body, warns);
            }
            if let Some(d) = default {
                lint_cases(m, d, warns);
            }
        }
        Stmt::If { then_branch, else_branch, .. } => {
            lint_cases(m, then_branch, warns);
            if let Some(e) = else_branch {
                lint_cases(m, e, warns);
            }
        }
        Stmt::For { body, .. } => lint_cases(m, body, warns),
        Stmt::Assign { .. } => {}
    }
}

fn static_width(m: &ModuleDecl, e: &Expr) -> Option<u32> {
    match e {
        Expr::Ident { name, .. } => m.width_of(name),
        Expr::Literal(l) => l.width,
        Expr::BitSelect { .. } => Some(1),
        Expr::PartSelect { msb, lsb, .. } => match (&**msb, &**lsb) {
            (Expr::Literal(a), Expr::Literal(b)) => Some((a.value - b.value + 1) as u32),
            _ => None,
        },
        Expr::Concat { parts, .. } => parts.iter().map(|p| static_width(m, p)).sum(),
        _ => None,
    }
}

/// Apply template rewrites for the given warnings. Only nodes within the
/// warned spans change. Template table: W1 rewrites `<=` to `=`, W2 rewrites
/// `=` to `<=`, W3 appends the missing edge to the sensitivity list.
pub fn apply_templates(design: &Design, warns: &[Warning]) -> Result<Design, LintError> {
    for w in warns {
        if !w.fixable {
            return Err(LintError::NotFixable(w.code.as_str(), w.span.start_line));
        }
    }
    let mut fixed = design.clone();
    for w in warns {
        for m in &mut fixed.modules {
            for item in &mut m.items {
                let ModuleItem::Always(block) = item else { continue };
                match w.code {
                    WarnCode::W1 => rewrite_assign(&mut block.body, w.span, AssignKind::Blocking),
                    WarnCode::W2 => rewrite_assign(&mut block.body, w.span, AssignKind::NonBlocking),
                    WarnCode::W3 => {
                        if block.sens_span == w.span {
                            if let (Sensitivity::Edges(edges), Some((kind, signal))) =
                                (&mut block.sensitivity, &w.fix_edge)
                            {
                                edges.push(EdgeEvent { edge: *kind, signal: signal.clone(), span: Span::default() });
                            }
                        }
                    }
                    _ => unreachable!("checked fixable above"),
                }
            }
        }
    }
    Ok(fixed)
}

fn rewrite_assign(s: &mut Stmt, target: Span, to: AssignKind) {
    match s {
        Stmt::Assign { kind, span, .. } => {
            if *span == target {
                *kind = to;
            }
        }
        Stmt::Block { stmts, .. } => {
            for st in stmts {
                rewrite_assign(st, target, to);
            }
        }
        Stmt::If { then_branch, else_branch, .. } => {
            rewrite_assign(then_branch, target, to);
            if let Some(e) = else_branch {
                rewrite_assign(e, target, to);
            }
        }
        Stmt::Case { arms, default, .. } => {
            for arm in arms {
                rewrite_assign(&mut arm.body, target, to);
            }
            if let Some(d) = default {
                rewrite_assign(d, target, to);
            }
        }
        Stmt::For { body, .. } => rewrite_assign(body, target, to),
    }
}

// --- preprocess loop ---------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundLog {
    pub round: u32,
    pub errors: Vec<Diagnostic>,
    pub warnings: Vec<Diagnostic>,
    pub action: String,
    pub agent_calls: usize,
    /// Pair application failures (NoMatch/AmbiguousMatch) this round.
    #[serde(default)]
    pub patch_issues: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct PreprocessLog {
    pub rounds: Vec<RoundLog>,
    pub agent_calls_total: usize,
    /// Wall time spent inside the backend across all rounds.
    #[serde(default)]
    pub backend_wait_s: f64,
}

#[derive(Debug)]
pub struct Preprocessed {
    pub design: Design,
    pub elab: ElaboratedDesign,
    pub text: String,
    pub log: PreprocessLog,
}

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("pre-processing failed after {rounds} rounds; {} diagnostics remain", .diagnostics.len())]
    Failed {
        rounds: u32,
        diagnostics: Vec<Diagnostic>,
        log: PreprocessLog,
    },
}

/// Iterate parse/elaborate -> agent repair on errors -> template fixes on
/// fixable warnings, until clean or `max_rounds` is exhausted.
pub fn preprocess(
    src: &SourceFile,
    backend: &mut dyn RepairBackend,
    max_rounds: u32,
    spec_text: &str,
) -> Result<Preprocessed, PreprocessError> {
    preprocess_with_mode(src, backend, max_rounds, spec_text, RepairMode::Pair)
}

/// `preprocess` with an explicit repair mode for the agent path; sessions
/// running the whole-file ablation pre-process in whole-file mode too.
pub fn preprocess_with_mode(
    src: &SourceFile,
    backend: &mut dyn RepairBackend,
    max_rounds: u32,
    spec_text: &str,
    mode: RepairMode,
) -> Result<Preprocessed, PreprocessError> {
    assert!(max_rounds >= 1, "max_rounds must be >= 1");
    let mut text = src.text.clone();
    let mut log = PreprocessLog::default();

    for round in 1..=max_rounds {
        let cur = SourceFile::new(src.path.clone(), text.clone());
        let errors = match parse(&cur) {
            Ok(design) => match elaborate(&design) {
                Ok(mut elab) => {
                    elab.file = src.path.display().to_string();
                    let warns = lint(&design, &elab);
                    let fixable: Vec<Warning> = warns.iter().filter(|w| w.fixable).cloned().collect();
                    if fixable.is_empty() {
                        log.rounds.push(RoundLog {
                            round,
                            errors: vec![],
                            warnings: warns.iter().map(|w| w.to_diagnostic()).collect(),
                            action: "none".into(),
                            agent_calls: 0,
                            patch_issues: vec![],
                        });
                        return Ok(Preprocessed { design, elab, text, log });
                    }
                    let fixed = apply_templates(&design, &fixable).expect("fixable warnings have templates");
                    text = print(&fixed);
                    log.rounds.push(RoundLog {
                        round,
                        errors: vec![],
                        warnings: warns.iter().map(|w| w.to_diagnostic()).collect(),
                        action: format!("templates:{}", fixable.len()),
                        agent_calls: 0,
                        patch_issues: vec![],
                    });
                    continue;
                }
                Err(diags) => diags,
            },
            Err(diags) => diags,
        };

        // syntax / elaboration errors: ask the backend
        let req = RepairRequest {
            spec_text: spec_text.to_string(),
            dut_text: text.clone(),
            err_info: ErrPayload::Diagnostics(errors.clone()),
            damage_repairs: vec![],
            mode,
            profile: PromptProfile::SyntaxFixer,
        };
        match request_patches(backend, &req) {
            Ok(call) => {
                let rep = apply_patchset(&text, &call.patchset);
                let action = if rep.changed() { "agent-repair" } else { "agent-no-effect" };
                log.agent_calls_total += call.calls;
                log.backend_wait_s += call.backend_wait_s;
                log.rounds.push(RoundLog {
                    round,
                    errors: errors.clone(),
                    warnings: vec![],
                    action: action.into(),
                    agent_calls: call.calls,
                    patch_issues: rep.issues.iter().map(|(i, e)| format!("pair {i}: {e}")).collect(),
                });
                // a patch with no effect consumes the round; the next round
                // re-parses and asks again
                text = rep.text;
            }
            Err(e) => {
                log.agent_calls_total += 1;
                log.rounds.push(RoundLog {
                    round,
                    errors: errors.clone(),
                    warnings: vec![],
                    action: format!("agent-failed: {e}"),
                    agent_calls: 1,
                    patch_issues: vec![],
                });
                return Err(PreprocessError::Failed { rounds: round, diagnostics: errors, log });
            }
        }
    }

    // budget exhausted; report whatever diagnostics the last text carries
    let cur = SourceFile::new(src.path.clone(), text);
    let diagnostics = match parse(&cur) {
        Ok(design) => match elaborate(&design) {
            Ok(_) => vec![],
            Err(d) => d,
        },
        Err(d) => d,
    };
    Err(PreprocessError::Failed { rounds: max_rounds, diagnostics, log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::{NullBackend, ScriptedBackend};
    use crate::elaborate::parse_and_elaborate;
    use crate::parser::parse_str;

    fn lint_text(text: &str) -> (Design, Vec<Warning>) {
        let src = SourceFile::new("t.v", text);
        let (design, elab) = parse_and_elaborate(&src).unwrap();
        let ws = lint(&design, &elab);
        (design, ws)
    }

    #[test]
    fn w1_nonblocking_in_comb() {
        let (_, ws) = lint_text("module m(input a, output reg y);\nalways @(*) y <= a;\nendmodule");
        assert_eq!(ws.len(), 1);
        assert_eq!(ws[0].code, WarnCode::W1);
        assert_eq!(ws[0].span.start_line, 2);
        assert!(ws[0].fixable);
    }

    #[test]
    fn w2_blocking_in_seq() {
        let (_, ws) = lint_text(
            "module m(input clk, input d, output reg q);\nalways @(posedge clk) q = d;\nendmodule",
        );
        assert!(ws.iter().any(|w| w.code == WarnCode::W2));
    }

    #[test]
    fn w3_missing_reset_edge() {
        let (_, ws) = lint_text(
            "module m(input clk, input rstn, input d, output reg q);\n\
             always @(posedge clk) begin\nif (!rstn) q <= 1'b0;\nelse q <= d;\nend\nendmodule",
        );
        let w3 = ws.iter().find(|w| w.code == WarnCode::W3).expect("W3 expected");
        assert_eq!(w3.fix_edge, Some((EdgeKind::Neg, "rstn".to_string())));
    }

    #[test]
    fn clean_counter_is_clean() {
        let (_, ws) = lint_text(
            "module counter(input clk, input rstn, output reg [7:0] count);\n\
             always @(posedge clk or negedge rstn) begin\n\
             if (!rstn) count <= 8'd0;\nelse count <= count + 8'd1;\nend\nendmodule",
        );
        assert!(ws.is_empty(), "{ws:?}");
    }

    #[test]
    fn w4_narrowing_assign() {
        let (_, ws) = lint_text(
            "module m(input [7:0] a, output wire [3:0] y);\nassign y = a;\nendmodule",
        );
        assert!(ws.iter().any(|w| w.code == WarnCode::W4));
    }

    #[test]
    fn w5_undriven_read() {
        let (_, ws) = lint_text(
            "module m(input a, output wire y);\nwire ghost;\nassign y = a & ghost;\nendmodule",
        );
        assert!(ws.iter().any(|w| w.code == WarnCode::W5));
    }

    #[test]
    fn w6_incomplete_case() {
        let (_, ws) = lint_text(
            "module m(input [1:0] s, output reg y);\nalways @(*) begin\ny = 1'b0;\ncase (s)\n2'b00: y = 1'b1;\nendcase\nend\nendmodule",
        );
        assert!(ws.iter().any(|w| w.code == WarnCode::W6));
        // full coverage or default silences it
        let (_, ws2) = lint_text(
            "module m(input [1:0] s, output reg y);\nalways @(*) begin\ncase (s)\n2'b00: y = 1'b1;\ndefault: y = 1'b0;\nendcase\nend\nendmodule",
        );
        assert!(ws2.iter().all(|w| w.code != WarnCode::W6));
    }

    #[test]
    fn w1_template_fix_is_local_and_sound() {
        let text = "module m(input a, input b, output reg y, output reg z);\nalways @(*) begin\ny <= a;\nz = b;\nend\nendmodule";
        let src = SourceFile::new("t.v", text);
        let (design, elab) = parse_and_elaborate(&src).unwrap();
        let ws = lint(&design, &elab);
        let w1: Vec<Warning> = ws.iter().filter(|w| w.code == WarnCode::W1).cloned().collect();
        assert_eq!(w1.len(), 1);
        let fixed = apply_templates(&design, &w1).unwrap();
        // the z = b assignment is untouched; only the warned node changed
        let fixed_text = print(&fixed);
        assert!(fixed_text.contains("y = a;"));
        assert!(fixed_text.contains("z = b;"));
        // lint-after-fix: W1 gone
        let (d2, e2) = parse_and_elaborate(&SourceFile::new("t2.v", fixed_text)).unwrap();
        assert!(lint(&d2, &e2).iter().all(|w| w.code != WarnCode::W1));
    }

    #[test]
    fn w3_template_adds_edge() {
        let text = "module m(input clk, input rstn, input d, output reg q);\n\
                    always @(posedge clk) begin\nif (!rstn) q <= 1'b0;\nelse q <= d;\nend\nendmodule";
        let src = SourceFile::new("t.v", text);
        let (design, elab) = parse_and_elaborate(&src).unwrap();
        let ws: Vec<Warning> = lint(&design, &elab).into_iter().filter(|w| w.code == WarnCode::W3).collect();
        let fixed = apply_templates(&design, &ws).unwrap();
        let fixed_text = print(&fixed);
        assert!(fixed_text.contains("posedge clk or negedge rstn"), "{fixed_text}");
    }

    #[test]
    fn empty_warning_list_is_identity() {
        let d = parse_str("t.v", "module m(input a, output wire y);\nassign y = a;\nendmodule");
        let fixed = apply_templates(&d, &[]).unwrap();
        assert!(d.structurally_equal(&fixed));
    }

    #[test]
    fn not_fixable_is_error() {
        let (design, ws) = lint_text(
            "module m(input [7:0] a, output wire [3:0] y);\nassign y = a;\nendmodule",
        );
        assert!(matches!(apply_templates(&design, &ws), Err(LintError::NotFixable("W4", _))));
    }

    #[test]
    fn preprocess_clean_input_zero_agent_calls() {
        let src = SourceFile::new(
            "t.v",
            "module m(input a, output wire y);\nassign y = a;\nendmodule\n",
        );
        let mut backend = NullBackend::new();
        let pre = preprocess(&src, &mut backend, 5, "spec").unwrap();
        assert_eq!(pre.log.agent_calls_total, 0);
        assert_eq!(pre.log.rounds.len(), 1);
        assert_eq!(pre.text, src.text);
    }

    #[test]
    fn preprocess_warning_only_path_never_calls_agent() {
        let src = SourceFile::new(
            "t.v",
            "module m(input a, output reg y);\nalways @(*) y <= a;\nendmodule\n",
        );
        let mut backend = NullBackend::new();
        let pre = preprocess(&src, &mut backend, 5, "spec").unwrap();
        assert_eq!(pre.log.agent_calls_total, 0);
        let (d, e) = parse_and_elaborate(&SourceFile::new("out.v", pre.text)).unwrap();
        assert!(lint(&d, &e).is_empty());
    }

    #[test]
    fn preprocess_fixes_missing_semicolon_via_agent() {
        let src = SourceFile::new(
            "t.v",
            "module m(input a, output wire y);\nassign y = a\nendmodule\n",
        );
        let mut backend = ScriptedBackend::from_responses(&[
            r#"{"correct":[{"wrong":"assign y = a","right":"assign y = a;"}]}"#,
        ]);
        let pre = preprocess(&src, &mut backend, 5, "spec").unwrap();
        assert_eq!(pre.log.agent_calls_total, 1);
        assert_eq!(pre.log.rounds.len(), 2);
        assert!(pre.text.contains("assign y = a;"));
    }

    #[test]
    fn preprocess_exhaustion_fails_with_diagnostics() {
        let src = SourceFile::new("t.v", "module m(input a output wire y);\nassign y = a;\nendmodule\n");
        let mut backend = NullBackend::new();
        match preprocess(&src, &mut backend, 3, "spec") {
            Err(PreprocessError::Failed { diagnostics, .. }) => assert!(!diagnostics.is_empty()),
            other => panic!("expected failure, got {other:?}"),
        }
    }
}
