//! AST for the synthesizable Verilog subset.
//!
//! Every node carries a [`Span`] into the source it was parsed from. Spans
//! are ignored by structural comparison (see [`Design::strip_spans`]), so a
//! reprinted design compares equal to its original parse.

use crate::source::Span;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub modules: Vec<ModuleDecl>,
    /// Name of the top module (not instantiated by any other module).
    pub top: String,
}

impl Design {
    pub fn module(&self, name: &str) -> Option<&ModuleDecl> {
        self.modules.iter().find(|m| m.name == name)
    }

    pub fn top_module(&self) -> &ModuleDecl {
        self.module(&self.top).expect("top module exists")
    }

    /// Copy with all spans zeroed, for structural comparison.
    pub fn strip_spans(&self) -> Design {
        let mut d = self.clone();
        for m in &mut d.modules {
            m.strip_spans();
        }
        d
    }

    /// Structural equality modulo source locations.
    pub fn structurally_equal(&self, other: &Design) -> bool {
        self.strip_spans() == other.strip_spans()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleDecl {
    pub name: String,
    pub ports: Vec<PortDecl>,
    pub nets: Vec<NetDecl>,
    pub items: Vec<ModuleItem>,
    pub span: Span,
}

impl ModuleDecl {
    fn strip_spans(&mut self) {
        self.span = Span::default();
        for p in &mut self.ports {
            p.span = Span::default();
            if let Some(r) = &mut p.range {
                r.span = Span::default();
            }
        }
        for n in &mut self.nets {
            n.span = Span::default();
            if let Some(r) = &mut n.range {
                r.span = Span::default();
            }
        }
        for item in &mut self.items {
            item.strip_spans();
        }
    }

    /// Declared width of a port or net, or None if undeclared.
    pub fn width_of(&self, name: &str) -> Option<u32> {
        if let Some(p) = self.ports.iter().find(|p| p.name == name) {
            return Some(p.range.as_ref().map_or(1, Range::width));
        }
        if let Some(n) = self.nets.iter().find(|n| n.name == name) {
            return Some(n.range.as_ref().map_or(1, Range::width));
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Input,
    Output,
    Internal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetKind {
    Wire,
    Reg,
    /// 32-bit loop index variable; only assignable as a `for` induction var.
    Integer,
}

/// Bit range `[msb:lsb]` with msb >= lsb >= 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub msb: u32,
    pub lsb: u32,
    pub span: Span,
}

impl Range {
    pub fn width(&self) -> u32 {
        self.msb - self.lsb + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortDecl {
    pub name: String,
    pub direction: Direction,
    pub kind: NetKind,
    pub range: Option<Range>,
    pub span: Span,
}

impl PortDecl {
    pub fn width(&self) -> u32 {
        self.range.as_ref().map_or(1, Range::width)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetDecl {
    pub name: String,
    pub kind: NetKind,
    pub range: Option<Range>,
    pub span: Span,
}

impl NetDecl {
    pub fn width(&self) -> u32 {
        self.range.as_ref().map_or(1, Range::width)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModuleItem {
    Assign(AssignItem),
    Always(AlwaysBlock),
    Instance(Instance),
}

impl ModuleItem {
    pub fn span(&self) -> Span {
        match self {
            ModuleItem::Assign(a) => a.span,
            ModuleItem::Always(a) => a.span,
            ModuleItem::Instance(i) => i.span,
        }
    }

    fn strip_spans(&mut self) {
        match self {
            ModuleItem::Assign(a) => {
                a.span = Span::default();
                a.lhs.strip_spans();
                a.rhs.strip_spans();
            }
            ModuleItem::Always(a) => {
                a.span = Span::default();
                a.sens_span = Span::default();
                if let Sensitivity::Edges(es) = &mut a.sensitivity {
                    for e in es {
                        e.span = Span::default();
                    }
                }
                a.body.strip_spans();
            }
            ModuleItem::Instance(i) => {
                i.span = Span::default();
                for c in &mut i.connections {
                    c.span = Span::default();
                    if let Some(e) = &mut c.expr {
                        e.strip_spans();
                    }
                }
            }
        }
    }
}

/// Continuous assignment `assign lhs = rhs;`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignItem {
    pub lhs: LValue,
    pub rhs: Expr,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlwaysBlock {
    pub sensitivity: Sensitivity,
    pub body: Stmt,
    pub span: Span,
    /// Span of the `@(...)` event control, used by sensitivity-list rewrites.
    pub sens_span: Span,
}

impl AlwaysBlock {
    pub fn is_sequential(&self) -> bool {
        matches!(self.sensitivity, Sensitivity::Edges(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Sensitivity {
    /// `@(*)`: combinational, implicit read set.
    Star,
    /// `@(posedge a or negedge b ...)`: edge-triggered.
    Edges(Vec<EdgeEvent>),
    /// `@(a or b)`: level-sensitive on the listed signals only.
    Levels(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Pos,
    Neg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeEvent {
    pub edge: EdgeKind,
    pub signal: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub module_name: String,
    pub instance_name: String,
    pub connections: Vec<Connection>,
    pub span: Span,
}

/// Named port connection `.port(expr)`; `expr` is None for `.port()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Connection {
    pub port: String,
    pub expr: Option<Expr>,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssignKind {
    Blocking,
    NonBlocking,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Stmt {
    Block {
        stmts: Vec<Stmt>,
        span: Span,
    },
    Assign {
        lhs: LValue,
        rhs: Expr,
        kind: AssignKind,
        span: Span,
    },
    If {
        cond: Expr,
        then_branch: Box<Stmt>,
        else_branch: Option<Box<Stmt>>,
        span: Span,
    },
    Case {
        selector: Expr,
        arms: Vec<CaseArm>,
        default: Option<Box<Stmt>>,
        span: Span,
    },
    For {
        var: String,
        init: Expr,
        cond: Expr,
        /// RHS of the `var = <step>` update (post `i++` desugaring).
        step: Expr,
        body: Box<Stmt>,
        span: Span,
    },
}

impl Stmt {
    pub fn span(&self) -> Span {
        match self {
            Stmt::Block { span, .. }
            | Stmt::Assign { span, .. }
            | Stmt::If { span, .. }
            | Stmt::Case { span, .. }
            | Stmt::For { span, .. } => *span,
        }
    }

    fn strip_spans(&mut self) {
        match self {
            Stmt::Block { stmts, span } => {
                *span = Span::default();
                for s in stmts {
                    s.strip_spans();
                }
            }
            Stmt::Assign { lhs, rhs, span, .. } => {
                *span = Span::default();
                lhs.strip_spans();
                rhs.strip_spans();
            }
            Stmt::If { cond, then_branch, else_branch, span } => {
                *span = Span::default();
                cond.strip_spans();
                then_branch.strip_spans();
                if let Some(e) = else_branch {
                    e.strip_spans();
                }
            }
            Stmt::Case { selector, arms, default, span } => {
                *span = Span::default();
                selector.strip_spans();
                for arm in arms {
                    arm.span = Span::default();
                    for l in &mut arm.labels {
                        l.strip_spans();
                    }
                    arm.body.strip_spans();
                }
                if let Some(d) = default {
                    d.strip_spans();
                }
            }
            Stmt::For { init, cond, step, body, span, .. } => {
                *span = Span::default();
                init.strip_spans();
                cond.strip_spans();
                step.strip_spans();
                body.strip_spans();
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseArm {
    pub labels: Vec<Expr>,
    pub body: Stmt,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LValue {
    Ident {
        name: String,
        span: Span,
    },
    BitSelect {
        base: String,
        index: Box<Expr>,
        span: Span,
    },
    PartSelect {
        base: String,
        msb: Box<Expr>,
        lsb: Box<Expr>,
        span: Span,
    },
    Concat {
        parts: Vec<LValue>,
        span: Span,
    },
}

impl LValue {
    pub fn span(&self) -> Span {
        match self {
            LValue::Ident { span, .. }
            | LValue::BitSelect { span, .. }
            | LValue::PartSelect { span, .. }
            | LValue::Concat { span, .. } => *span,
        }
    }

    /// Base signal names written by this lvalue.
    pub fn bases(&self) -> Vec<&str> {
        match self {
            LValue::Ident { name, .. } => vec![name.as_str()],
            LValue::BitSelect { base, .. } | LValue::PartSelect { base, .. } => vec![base.as_str()],
            LValue::Concat { parts, .. } => parts.iter().flat_map(|p| p.bases()).collect(),
        }
    }

    fn strip_spans(&mut self) {
        match self {
            LValue::Ident { span, .. } => *span = Span::default(),
            LValue::BitSelect { index, span, .. } => {
                *span = Span::default();
                index.strip_spans();
            }
            LValue::PartSelect { msb, lsb, span, .. } => {
                *span = Span::default();
                msb.strip_spans();
                lsb.strip_spans();
            }
            LValue::Concat { parts, span } => {
                *span = Span::default();
                for p in parts {
                    p.strip_spans();
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnaryOp {
    BitNot,
    LogNot,
    Neg,
    RedAnd,
    RedOr,
    RedXor,
}

impl UnaryOp {
    pub fn symbol(&self) -> &'static str {
        match self {
            UnaryOp::BitNot => "~",
            UnaryOp::LogNot => "!",
            UnaryOp::Neg => "-",
            UnaryOp::RedAnd => "&",
            UnaryOp::RedOr => "|",
            UnaryOp::RedXor => "^",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    BitAnd,
    BitOr,
    BitXor,
    LogAnd,
    LogOr,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Shl,
    Shr,
}

impl BinaryOp {
    pub fn symbol(&self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Mod => "%",
            BinaryOp::BitAnd => "&",
            BinaryOp::BitOr => "|",
            BinaryOp::BitXor => "^",
            BinaryOp::LogAnd => "&&",
            BinaryOp::LogOr => "||",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::Shl => "<<",
            BinaryOp::Shr => ">>",
        }
    }

    /// Binding power for printing/parsing; higher binds tighter.
    pub fn precedence(&self) -> u8 {
        match self {
            BinaryOp::Mul | BinaryOp::Div | BinaryOp::Mod => 10,
            BinaryOp::Add | BinaryOp::Sub => 9,
            BinaryOp::Shl | BinaryOp::Shr => 8,
            BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => 7,
            BinaryOp::Eq | BinaryOp::Ne => 6,
            BinaryOp::BitAnd => 5,
            BinaryOp::BitXor => 4,
            BinaryOp::BitOr => 3,
            BinaryOp::LogAnd => 2,
            BinaryOp::LogOr => 1,
        }
    }

    pub fn is_comparison(&self) -> bool {
        matches!(
            self,
            BinaryOp::Eq | BinaryOp::Ne | BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LiteralBase {
    Bin,
    Oct,
    Dec,
    Hex,
}

/// Numeric literal. `text` preserves the original lexeme so printing is
/// verbatim (`32'b0` stays `32'b0`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Literal {
    /// Explicit size in bits, or None for an unsized literal.
    pub width: Option<u32>,
    pub value: u64,
    pub base: LiteralBase,
    pub text: String,
    pub span: Span,
}

impl Literal {
    /// Unsized decimal literal.
    pub fn unsized_dec(value: u64) -> Literal {
        Literal {
            width: None,
            value,
            base: LiteralBase::Dec,
            text: value.to_string(),
            span: Span::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Literal(Literal),
    Ident {
        name: String,
        span: Span,
    },
    BitSelect {
        base: String,
        index: Box<Expr>,
        span: Span,
    },
    PartSelect {
        base: String,
        msb: Box<Expr>,
        lsb: Box<Expr>,
        span: Span,
    },
    Concat {
        parts: Vec<Expr>,
        span: Span,
    },
    Unary {
        op: UnaryOp,
        operand: Box<Expr>,
        span: Span,
    },
    Binary {
        op: BinaryOp,
        left: Box<Expr>,
        right: Box<Expr>,
        /// Span of the operator token itself (mutation target).
        op_span: Span,
        span: Span,
    },
    Ternary {
        cond: Box<Expr>,
        then_expr: Box<Expr>,
        else_expr: Box<Expr>,
        span: Span,
    },
}

impl Expr {
    pub fn span(&self) -> Span {
        match self {
            Expr::Literal(l) => l.span,
            Expr::Ident { span, .. }
            | Expr::BitSelect { span, .. }
            | Expr::PartSelect { span, .. }
            | Expr::Concat { span, .. }
            | Expr::Unary { span, .. }
            | Expr::Binary { span, .. }
            | Expr::Ternary { span, .. } => *span,
        }
    }

    /// Identifier names read by this expression.
    pub fn idents(&self, out: &mut Vec<String>) {
        match self {
            Expr::Literal(_) => {}
            Expr::Ident { name, .. } => out.push(name.clone()),
            Expr::BitSelect { base, index, .. } => {
                out.push(base.clone());
                index.idents(out);
            }
            Expr::PartSelect { base, msb, lsb, .. } => {
                out.push(base.clone());
                msb.idents(out);
                lsb.idents(out);
            }
            Expr::Concat { parts, .. } => {
                for p in parts {
                    p.idents(out);
                }
            }
            Expr::Unary { operand, .. } => operand.idents(out),
            Expr::Binary { left, right, .. } => {
                left.idents(out);
                right.idents(out);
            }
            Expr::Ternary { cond, then_expr, else_expr, .. } => {
                cond.idents(out);
                then_expr.idents(out);
                else_expr.idents(out);
            }
        }
    }

    fn strip_spans(&mut self) {
        match self {
            Expr::Literal(l) => l.span = Span::default(),
            Expr::Ident { span, .. } => *span = Span::default(),
            Expr::BitSelect { index, span, .. } => {
                *span = Span::default();
                index.strip_spans();
            }
            Expr::PartSelect { msb, lsb, span, .. } => {
                *span = Span::default();
                msb.strip_spans();
                lsb.strip_spans();
            }
            Expr::Concat { parts, span } => {
                *span = Span::default();
                for p in parts {
                    p.strip_spans();
                }
            }
            Expr::Unary { operand, span, .. } => {
                *span = Span::default();
                operand.strip_spans();
            }
            Expr::Binary { left, right, op_span, span, .. } => {
                *span = Span::default();
                *op_span = Span::default();
                left.strip_spans();
                right.strip_spans();
            }
            Expr::Ternary { cond, then_expr, else_expr, span } => {
                *span = Span::default();
                cond.strip_spans();
                then_expr.strip_spans();
                else_expr.strip_spans();
            }
        }
    }
}
