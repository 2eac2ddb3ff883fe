//! Recursive-descent parser for the Verilog subset.
//!
//! Error recovery resynchronizes at `;`, `end`, and `endmodule` so several
//! diagnostics can be reported per run. `parse` succeeds only when no
//! error-severity diagnostic was produced.

use crate::ast::*;
use crate::lexer::{lex, Keyword, Token, TokenKind};
use crate::source::{Diagnostic, SourceFile, Span};
use std::collections::HashSet;

/// Parse a source file into a [`Design`], or the list of syntax diagnostics.
pub fn parse(src: &SourceFile) -> Result<Design, Vec<Diagnostic>> {
    let lexed = lex(src);
    let mut parser = Parser {
        src,
        tokens: lexed.tokens,
        pos: 0,
        diags: lexed.diagnostics,
    };
    let mut modules = Vec::new();
    while !parser.at_eof() {
        if parser.eat_kw(Keyword::Module) {
            if let Some(m) = parser.parse_module() {
                modules.push(m);
            }
        } else {
            let t = parser.peek().clone();
            parser.error_at(&t, "unexpected-token", "expected 'module'");
            parser.bump();
            parser.sync_to_module();
        }
    }
    validate(&modules, &mut parser.diags);
    let errors: Vec<Diagnostic> = parser
        .diags
        .iter()
        .filter(|d| d.severity == crate::source::Severity::Error)
        .cloned()
        .collect();
    if !errors.is_empty() {
        return Err(errors);
    }
    let top = pick_top(&modules);
    Ok(Design { modules, top })
}

/// Parse and panic on failure; for fixtures known to be well-formed.
pub fn parse_str(name: &str, text: &str) -> Design {
    let src = SourceFile::new(name, text);
    match parse(&src) {
        Ok(d) => d,
        Err(diags) => {
            let msgs: Vec<String> = diags.iter().map(|d| d.to_string()).collect();
            panic!("fixture {name} failed to parse:\n{}", msgs.join("\n"));
        }
    }
}

/// Constructs explicitly rejected with a dedicated diagnostic instead of a
/// generic parse error.
const OUT_OF_SUBSET: [&str; 8] =
    ["parameter", "localparam", "generate", "genvar", "task", "function", "initial", "inout"];

/// The top module is the first one not instantiated by any other module.
fn pick_top(modules: &[ModuleDecl]) -> String {
    let mut instantiated = HashSet::new();
    for m in modules {
        for item in &m.items {
            if let ModuleItem::Instance(inst) = item {
                instantiated.insert(inst.module_name.clone());
            }
        }
    }
    modules
        .iter()
        .find(|m| !instantiated.contains(&m.name))
        .or(modules.first())
        .map(|m| m.name.clone())
        .unwrap_or_default()
}

struct Parser<'a> {
    src: &'a SourceFile,
    tokens: Vec<Token>,
    pos: usize,
    diags: Vec<Diagnostic>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn peek2(&self) -> &Token {
        &self.tokens[(self.pos + 1).min(self.tokens.len() - 1)]
    }

    fn at_eof(&self) -> bool {
        matches!(self.peek().kind, TokenKind::Eof)
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos.min(self.tokens.len() - 1)].clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn at(&self, kind: &TokenKind) -> bool {
        &self.peek().kind == kind
    }

    fn at_kw(&self, kw: Keyword) -> bool {
        matches!(self.peek().kind, TokenKind::Kw(k) if k == kw)
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.at(kind) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: Keyword) -> bool {
        if self.at_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn error_at(&mut self, tok: &Token, code: &str, msg: impl Into<String>) {
        let (line, col) = self.src.line_col(tok.span.start);
        self.diags.push(Diagnostic::error(line, col, code, msg));
    }

    fn error_here(&mut self, code: &str, msg: impl Into<String>) {
        let t = self.peek().clone();
        self.error_at(&t, code, msg);
    }

    fn expect(&mut self, kind: &TokenKind, what: &str) -> Option<Token> {
        if self.at(kind) {
            return Some(self.bump());
        }
        let code = if matches!(kind, TokenKind::Semi) { "missing-semi" } else { "unexpected-token" };
        let found = describe(&self.peek().kind);
        self.error_here(code, format!("expected {what}, found {found}"));
        None
    }

    fn expect_ident(&mut self, what: &str) -> Option<(String, Span)> {
        if let TokenKind::Ident(name) = &self.peek().kind {
            let name = name.clone();
            let t = self.bump();
            return Some((name, t.span));
        }
        let found = describe(&self.peek().kind);
        self.error_here("unexpected-token", format!("expected {what}, found {found}"));
        None
    }

    /// Skip to just after the next `;`, or stop before end/endmodule/EOF.
    fn sync_stmt(&mut self) {
        loop {
            match &self.peek().kind {
                TokenKind::Semi => {
                    self.bump();
                    return;
                }
                TokenKind::Eof | TokenKind::Kw(Keyword::End) | TokenKind::Kw(Keyword::Endmodule) => return,
                _ => {
                    self.bump();
                }
            }
        }
    }

    fn sync_to_module(&mut self) {
        while !self.at_eof() && !self.at_kw(Keyword::Module) {
            self.bump();
        }
    }

    // --- modules ---

    fn parse_module(&mut self) -> Option<ModuleDecl> {
        let start = self.tokens[self.pos - 1].span;
        let (name, _) = self.expect_ident("module name")?;
        let mut ports: Vec<PortDecl> = Vec::new();
        let mut header_names: Vec<(String, Span)> = Vec::new();
        if self.eat(&TokenKind::LParen) {
            if !self.at(&TokenKind::RParen) {
                loop {
                    if self.at_kw(Keyword::Input) || self.at_kw(Keyword::Output) {
                        // ANSI-style header declaration
                        if let Some(mut decls) = self.parse_port_decl(true) {
                            ports.append(&mut decls);
                        } else {
                            self.sync_port_list();
                        }
                    } else if let Some((n, sp)) = self.expect_ident("port name") {
                        header_names.push((n, sp));
                    } else {
                        self.sync_port_list();
                    }
                    if !self.eat(&TokenKind::Comma) {
                        break;
                    }
                }
            }
            self.expect(&TokenKind::RParen, "')'");
        }
        self.expect(&TokenKind::Semi, "';' after module header");

        let mut nets: Vec<NetDecl> = Vec::new();
        let mut items: Vec<ModuleItem> = Vec::new();
        loop {
            match self.peek().kind.clone() {
                TokenKind::Kw(Keyword::Endmodule) => break,
                TokenKind::Eof => {
                    self.error_here("unbalanced-end", format!("missing 'endmodule' for module '{name}'"));
                    break;
                }
                TokenKind::Kw(Keyword::Input) | TokenKind::Kw(Keyword::Output) => {
                    if let Some(decls) = self.parse_port_decl(false) {
                        for d in decls {
                            // non-ANSI: match a header port name
                            ports.push(d);
                        }
                        self.expect(&TokenKind::Semi, "';' after port declaration");
                    } else {
                        self.sync_stmt();
                    }
                }
                TokenKind::Kw(Keyword::Wire) | TokenKind::Kw(Keyword::Reg) | TokenKind::Kw(Keyword::Integer) => {
                    if let Some(mut decls) = self.parse_net_decl() {
                        nets.append(&mut decls);
                        self.expect(&TokenKind::Semi, "';' after net declaration");
                    } else {
                        self.sync_stmt();
                    }
                }
                TokenKind::Kw(Keyword::Assign) => {
                    if let Some(item) = self.parse_assign_item() {
                        items.push(ModuleItem::Assign(item));
                    } else {
                        self.sync_stmt();
                    }
                }
                TokenKind::Kw(Keyword::Always) => {
                    if let Some(a) = self.parse_always() {
                        items.push(ModuleItem::Always(a));
                    }
                }
                TokenKind::Ident(name) if OUT_OF_SUBSET.contains(&name.as_str()) => {
                    self.error_here(
                        "unsupported-construct",
                        format!("'{name}' is outside the supported subset"),
                    );
                    self.bump();
                    self.sync_stmt();
                }
                TokenKind::Ident(_) => {
                    if let Some(inst) = self.parse_instance() {
                        items.push(ModuleItem::Instance(inst));
                    } else {
                        self.sync_stmt();
                    }
                }
                _ => {
                    let found = describe(&self.peek().kind);
                    self.error_here("unexpected-token", format!("unexpected {found} in module body"));
                    self.bump();
                    self.sync_stmt();
                }
            }
        }
        let end_tok = self.peek().span;
        self.eat_kw(Keyword::Endmodule);

        // Any header port name without a body/header declaration is an error.
        for (n, sp) in &header_names {
            if !ports.iter().any(|p| &p.name == n) {
                let (line, col) = self.src.line_col(sp.start);
                self.diags.push(Diagnostic::error(
                    line,
                    col,
                    "undeclared-port",
                    format!("port '{n}' is listed in the header of module '{name}' but never declared"),
                ));
            }
        }

        let span = start.join(end_tok);
        Some(ModuleDecl { name, ports, nets, items, span })
    }

    fn sync_port_list(&mut self) {
        while !matches!(
            self.peek().kind,
            TokenKind::Comma | TokenKind::RParen | TokenKind::Semi | TokenKind::Eof
        ) {
            self.bump();
        }
    }

    /// `input|output [wire|reg] [range] name {, name}`. In ANSI headers the
    /// trailing comma is handled by the caller, so only one name is parsed
    /// unless followed by `, name` where the next token is not a direction.
    fn parse_port_decl(&mut self, ansi: bool) -> Option<Vec<PortDecl>> {
        let dir_tok = self.bump();
        let direction = match dir_tok.kind {
            TokenKind::Kw(Keyword::Input) => Direction::Input,
            TokenKind::Kw(Keyword::Output) => Direction::Output,
            _ => unreachable!("caller checked direction keyword"),
        };
        let kind = if self.eat_kw(Keyword::Wire) {
            NetKind::Wire
        } else if self.eat_kw(Keyword::Reg) {
            NetKind::Reg
        } else {
            NetKind::Wire
        };
        let range = self.parse_range()?;
        let mut decls = Vec::new();
        loop {
            let (name, nspan) = self.expect_ident("port name")?;
            let span = dir_tok.span.join(nspan);
            decls.push(PortDecl { name, direction, kind, range: range.clone(), span });
            if ansi {
                // comma handling belongs to the header list
                break;
            }
            if self.at(&TokenKind::Comma) && matches!(self.peek2().kind, TokenKind::Ident(_)) {
                self.bump();
            } else {
                break;
            }
        }
        Some(decls)
    }

    fn parse_net_decl(&mut self) -> Option<Vec<NetDecl>> {
        let kw_tok = self.bump();
        let kind = match kw_tok.kind {
            TokenKind::Kw(Keyword::Wire) => NetKind::Wire,
            TokenKind::Kw(Keyword::Reg) => NetKind::Reg,
            TokenKind::Kw(Keyword::Integer) => NetKind::Integer,
            _ => unreachable!(),
        };
        let range = self.parse_range()?;
        if kind == NetKind::Integer && range.is_some() {
            self.error_here("unexpected-token", "integer declarations take no range");
        }
        let mut decls = Vec::new();
        loop {
            let (name, nspan) = self.expect_ident("net name")?;
            decls.push(NetDecl { name, kind, range: range.clone(), span: kw_tok.span.join(nspan) });
            if !self.eat(&TokenKind::Comma) {
                break;
            }
        }
        Some(decls)
    }

    /// `[msb:lsb]` with constant integer bounds; enforces the 64-bit cap.
    fn parse_range(&mut self) -> Option<Option<Range>> {
        if !self.at(&TokenKind::LBracket) {
            return Some(None);
        }
        let open = self.bump();
        let msb = self.parse_const_index()?;
        self.expect(&TokenKind::Colon, "':' in range")?;
        let lsb = self.parse_const_index()?;
        let close = self.expect(&TokenKind::RBracket, "']' closing range")?;
        if msb < lsb {
            self.error_at(&open, "malformed-range", format!("range [{msb}:{lsb}] has msb < lsb"));
            return None;
        }
        if msb - lsb + 1 > 64 {
            self.error_at(&open, "width-bound", format!("declared width {} exceeds the 64-bit subset bound", msb - lsb + 1));
            return None;
        }
        Some(Some(Range { msb, lsb, span: open.span.join(close.span) }))
    }

    fn parse_const_index(&mut self) -> Option<u32> {
        if let TokenKind::Number(lit) = &self.peek().kind {
            let v = lit.value;
            self.bump();
            if v > u32::MAX as u64 {
                self.error_here("malformed-range", "range bound out of range");
                return None;
            }
            return Some(v as u32);
        }
        self.error_here("unexpected-token", "expected integer constant in range");
        None
    }

    fn parse_assign_item(&mut self) -> Option<AssignItem> {
        let start = self.bump().span; // 'assign'
        let lhs = self.parse_lvalue()?;
        self.expect(&TokenKind::Eq, "'=' in continuous assignment")?;
        let rhs = self.parse_expr()?;
        let semi = self.expect(&TokenKind::Semi, "';' after assignment")?;
        Some(AssignItem { lhs, rhs, span: start.join(semi.span) })
    }

    fn parse_always(&mut self) -> Option<AlwaysBlock> {
        let start = self.bump().span; // 'always'
        if !self.at(&TokenKind::At) {
            self.error_here("unexpected-token", "expected '@' after 'always'");
            self.sync_stmt();
            return None;
        }
        let at_tok = self.bump();
        self.expect(&TokenKind::LParen, "'(' after '@'")?;
        let sensitivity = self.parse_sensitivity()?;
        let close = self.expect(&TokenKind::RParen, "')' closing sensitivity list")?;
        let sens_span = at_tok.span.join(close.span);
        let body = self.parse_stmt()?;
        let span = start.join(body.span());
        Some(AlwaysBlock { sensitivity, body, span, sens_span })
    }

    fn parse_sensitivity(&mut self) -> Option<Sensitivity> {
        if self.eat(&TokenKind::Star) {
            return Some(Sensitivity::Star);
        }
        if self.at_kw(Keyword::Posedge) || self.at_kw(Keyword::Negedge) {
            let mut edges = Vec::new();
            loop {
                let tok = self.bump();
                let edge = match tok.kind {
                    TokenKind::Kw(Keyword::Posedge) => EdgeKind::Pos,
                    TokenKind::Kw(Keyword::Negedge) => EdgeKind::Neg,
                    _ => {
                        self.error_at(&tok, "unexpected-token", "expected posedge/negedge");
                        return None;
                    }
                };
                let (signal, sspan) = self.expect_ident("edge signal")?;
                edges.push(EdgeEvent { edge, signal, span: tok.span.join(sspan) });
                if !(self.eat_kw(Keyword::Or) || self.eat(&TokenKind::Comma)) {
                    break;
                }
            }
            return Some(Sensitivity::Edges(edges));
        }
        // level-sensitive list: a or b or c
        let mut names = Vec::new();
        loop {
            let (name, _) = self.expect_ident("signal in sensitivity list")?;
            names.push(name);
            if !(self.eat_kw(Keyword::Or) || self.eat(&TokenKind::Comma)) {
                break;
            }
        }
        Some(Sensitivity::Levels(names))
    }

    fn parse_stmt(&mut self) -> Option<Stmt> {
        match self.peek().kind.clone() {
            TokenKind::Kw(Keyword::Begin) => self.parse_block(),
            TokenKind::Kw(Keyword::If) => self.parse_if(),
            TokenKind::Kw(Keyword::Case) => self.parse_case(),
            TokenKind::Kw(Keyword::For) => self.parse_for(),
            TokenKind::Ident(_) | TokenKind::LBrace => self.parse_assign_stmt(),
            _ => {
                let found = describe(&self.peek().kind);
                self.error_here("unexpected-token", format!("expected statement, found {found}"));
                self.sync_stmt();
                None
            }
        }
    }

    fn parse_block(&mut self) -> Option<Stmt> {
        let start = self.bump().span; // 'begin'
        let mut stmts = Vec::new();
        loop {
            match self.peek().kind {
                TokenKind::Kw(Keyword::End) => break,
                TokenKind::Kw(Keyword::Endmodule) | TokenKind::Eof => {
                    self.error_here("unbalanced-end", "missing 'end' for 'begin' block");
                    let span = start.join(self.peek().span);
                    return Some(Stmt::Block { stmts, span });
                }
                _ => match self.parse_stmt() {
                    Some(s) => stmts.push(s),
                    None => {
                        // parse_stmt already synced past ';'
                        if self.at_eof() {
                            break;
                        }
                    }
                },
            }
        }
        let end = self.bump().span; // 'end'
        Some(Stmt::Block { stmts, span: start.join(end) })
    }

    fn parse_if(&mut self) -> Option<Stmt> {
        let start = self.bump().span; // 'if'
        self.expect(&TokenKind::LParen, "'(' after 'if'")?;
        let cond = self.parse_expr()?;
        self.expect(&TokenKind::RParen, "')' closing if condition")?;
        let then_branch = Box::new(self.parse_stmt()?);
        let mut span = start.join(then_branch.span());
        let else_branch = if self.eat_kw(Keyword::Else) {
            let e = Box::new(self.parse_stmt()?);
            span = span.join(e.span());
            Some(e)
        } else {
            None
        };
        Some(Stmt::If { cond, then_branch, else_branch, span })
    }

    fn parse_case(&mut self) -> Option<Stmt> {
        let start = self.bump().span; // 'case'
        self.expect(&TokenKind::LParen, "'(' after 'case'")?;
        let selector = self.parse_expr()?;
        self.expect(&TokenKind::RParen, "')' closing case selector")?;
        let mut arms = Vec::new();
        let mut default = None;
        loop {
            match self.peek().kind.clone() {
                TokenKind::Kw(Keyword::Endcase) => break,
                TokenKind::Kw(Keyword::Default) => {
                    let dt = self.bump();
                    self.eat(&TokenKind::Colon);
                    let body = self.parse_stmt()?;
                    if default.is_some() {
                        self.error_at(&dt, "unexpected-token", "duplicate 'default' arm");
                    }
                    default = Some(Box::new(body));
                }
                TokenKind::Eof | TokenKind::Kw(Keyword::Endmodule) => {
                    self.error_here("unbalanced-end", "missing 'endcase'");
                    break;
                }
                _ => {
                    let arm_start = self.peek().span;
                    let mut labels = vec![self.parse_expr()?];
                    while self.eat(&TokenKind::Comma) {
                        labels.push(self.parse_expr()?);
                    }
                    self.expect(&TokenKind::Colon, "':' after case label")?;
                    let body = self.parse_stmt()?;
                    let span = arm_start.join(body.span());
                    arms.push(CaseArm { labels, body, span });
                }
            }
        }
        let end = self.peek().span;
        self.eat_kw(Keyword::Endcase);
        Some(Stmt::Case { selector, arms, default, span: start.join(end) })
    }

    fn parse_for(&mut self) -> Option<Stmt> {
        let start = self.bump().span; // 'for'
        self.expect(&TokenKind::LParen, "'(' after 'for'")?;
        let (var, _) = self.expect_ident("loop variable")?;
        self.expect(&TokenKind::Eq, "'=' in loop init")?;
        let init = self.parse_expr()?;
        self.expect(&TokenKind::Semi, "';' after loop init")?;
        let cond = self.parse_expr()?;
        self.expect(&TokenKind::Semi, "';' after loop condition")?;
        let (step_var, step_tok_span) = self.expect_ident("loop variable in step")?;
        if step_var != var {
            let (line, col) = self.src.line_col(step_tok_span.start);
            self.diags.push(Diagnostic::error(
                line,
                col,
                "loop-var-mismatch",
                format!("loop step updates '{step_var}' but the loop variable is '{var}'"),
            ));
        }
        let step = if self.eat(&TokenKind::PlusPlus) {
            // i++ desugars to i = i + 1
            Expr::Binary {
                op: BinaryOp::Add,
                left: Box::new(Expr::Ident { name: var.clone(), span: step_tok_span }),
                right: Box::new(Expr::Literal(Literal::unsized_dec(1))),
                op_span: step_tok_span,
                span: step_tok_span,
            }
        } else if self.eat(&TokenKind::MinusMinus) {
            Expr::Binary {
                op: BinaryOp::Sub,
                left: Box::new(Expr::Ident { name: var.clone(), span: step_tok_span }),
                right: Box::new(Expr::Literal(Literal::unsized_dec(1))),
                op_span: step_tok_span,
                span: step_tok_span,
            }
        } else {
            self.expect(&TokenKind::Eq, "'=' in loop step")?;
            self.parse_expr()?
        };
        self.expect(&TokenKind::RParen, "')' closing for header")?;
        let body = Box::new(self.parse_stmt()?);
        let span = start.join(body.span());
        Some(Stmt::For { var, init, cond, step, body, span })
    }

    fn parse_assign_stmt(&mut self) -> Option<Stmt> {
        let lhs = match self.parse_lvalue() {
            Some(l) => l,
            None => {
                self.sync_stmt();
                return None;
            }
        };
        let kind = if self.eat(&TokenKind::Eq) {
            AssignKind::Blocking
        } else if self.eat(&TokenKind::LtEq) {
            AssignKind::NonBlocking
        } else {
            let found = describe(&self.peek().kind);
            self.error_here("unexpected-token", format!("expected '=' or '<=' in assignment, found {found}"));
            self.sync_stmt();
            return None;
        };
        let rhs = match self.parse_expr() {
            Some(e) => e,
            None => {
                self.sync_stmt();
                return None;
            }
        };
        let semi = self.expect(&TokenKind::Semi, "';' after assignment")?;
        let span = lhs.span().join(semi.span);
        Some(Stmt::Assign { lhs, rhs, kind, span })
    }

    fn parse_lvalue(&mut self) -> Option<LValue> {
        if self.at(&TokenKind::LBrace) {
            let start = self.bump().span;
            let mut parts = Vec::new();
            loop {
                parts.push(self.parse_lvalue()?);
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
            let close = self.expect(&TokenKind::RBrace, "'}' closing concatenation")?;
            return Some(LValue::Concat { parts, span: start.join(close.span) });
        }
        let (name, nspan) = self.expect_ident("assignment target")?;
        if self.at(&TokenKind::LBracket) {
            self.bump();
            let first = self.parse_expr()?;
            if self.eat(&TokenKind::Colon) {
                let lsb = self.parse_expr()?;
                let close = self.expect(&TokenKind::RBracket, "']'")?;
                return Some(LValue::PartSelect {
                    base: name,
                    msb: Box::new(first),
                    lsb: Box::new(lsb),
                    span: nspan.join(close.span),
                });
            }
            let close = self.expect(&TokenKind::RBracket, "']'")?;
            return Some(LValue::BitSelect { base: name, index: Box::new(first), span: nspan.join(close.span) });
        }
        Some(LValue::Ident { name, span: nspan })
    }

    fn parse_instance(&mut self) -> Option<Instance> {
        let (module_name, mspan) = self.expect_ident("module name")?;
        let (instance_name, _) = self.expect_ident("instance name")?;
        self.expect(&TokenKind::LParen, "'(' opening port connections")?;
        let mut connections = Vec::new();
        if !self.at(&TokenKind::RParen) {
            loop {
                if !self.at(&TokenKind::Dot) {
                    self.error_here("unexpected-token", "expected '.' (only named port connections are supported)");
                    self.sync_port_list();
                } else {
                    let dot = self.bump();
                    let (port, _) = self.expect_ident("port name")?;
                    self.expect(&TokenKind::LParen, "'(' after port name")?;
                    let expr = if self.at(&TokenKind::RParen) { None } else { Some(self.parse_expr()?) };
                    let close = self.expect(&TokenKind::RParen, "')' closing connection")?;
                    connections.push(Connection { port, expr, span: dot.span.join(close.span) });
                }
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
        }
        self.expect(&TokenKind::RParen, "')' closing port connections")?;
        let semi = self.expect(&TokenKind::Semi, "';' after instantiation")?;
        Some(Instance { module_name, instance_name, connections, span: mspan.join(semi.span) })
    }

    // --- expressions (precedence climbing) ---

    fn parse_expr(&mut self) -> Option<Expr> {
        self.parse_ternary()
    }

    fn parse_ternary(&mut self) -> Option<Expr> {
        let cond = self.parse_binary(1)?;
        if self.eat(&TokenKind::Question) {
            let then_expr = self.parse_ternary()?;
            self.expect(&TokenKind::Colon, "':' in conditional expression")?;
            let else_expr = self.parse_ternary()?;
            let span = cond.span().join(else_expr.span());
            return Some(Expr::Ternary {
                cond: Box::new(cond),
                then_expr: Box::new(then_expr),
                else_expr: Box::new(else_expr),
                span,
            });
        }
        Some(cond)
    }

    fn binop_at(&self) -> Option<BinaryOp> {
        Some(match self.peek().kind {
            TokenKind::Plus => BinaryOp::Add,
            TokenKind::Minus => BinaryOp::Sub,
            TokenKind::Star => BinaryOp::Mul,
            TokenKind::Slash => BinaryOp::Div,
            TokenKind::Percent => BinaryOp::Mod,
            TokenKind::Amp => BinaryOp::BitAnd,
            TokenKind::Pipe => BinaryOp::BitOr,
            TokenKind::Caret => BinaryOp::BitXor,
            TokenKind::AmpAmp => BinaryOp::LogAnd,
            TokenKind::PipePipe => BinaryOp::LogOr,
            TokenKind::EqEq => BinaryOp::Eq,
            TokenKind::NotEq => BinaryOp::Ne,
            TokenKind::Lt => BinaryOp::Lt,
            TokenKind::LtEq => BinaryOp::Le,
            TokenKind::Gt => BinaryOp::Gt,
            TokenKind::GtEq => BinaryOp::Ge,
            TokenKind::Shl => BinaryOp::Shl,
            TokenKind::Shr => BinaryOp::Shr,
            _ => return None,
        })
    }

    fn parse_binary(&mut self, min_prec: u8) -> Option<Expr> {
        let mut left = self.parse_unary()?;
        while let Some(op) = self.binop_at() {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            let op_tok = self.bump();
            let right = self.parse_binary(prec + 1)?;
            let span = left.span().join(right.span());
            left = Expr::Binary {
                op,
                left: Box::new(left),
                right: Box::new(right),
                op_span: op_tok.span,
                span,
            };
        }
        Some(left)
    }

    fn parse_unary(&mut self) -> Option<Expr> {
        let op = match self.peek().kind {
            TokenKind::Tilde => Some(UnaryOp::BitNot),
            TokenKind::Bang => Some(UnaryOp::LogNot),
            TokenKind::Minus => Some(UnaryOp::Neg),
            TokenKind::Amp => Some(UnaryOp::RedAnd),
            TokenKind::Pipe => Some(UnaryOp::RedOr),
            TokenKind::Caret => Some(UnaryOp::RedXor),
            _ => None,
        };
        if let Some(op) = op {
            let tok = self.bump();
            let operand = self.parse_unary()?;
            let span = tok.span.join(operand.span());
            return Some(Expr::Unary { op, operand: Box::new(operand), span });
        }
        self.parse_primary()
    }

    fn parse_primary(&mut self) -> Option<Expr> {
        match self.peek().kind.clone() {
            TokenKind::Number(lit) => {
                self.bump();
                Some(Expr::Literal(lit))
            }
            TokenKind::Ident(name) => {
                let t = self.bump();
                if self.at(&TokenKind::LBracket) {
                    self.bump();
                    let first = self.parse_expr()?;
                    if self.eat(&TokenKind::Colon) {
                        let lsb = self.parse_expr()?;
                        let close = self.expect(&TokenKind::RBracket, "']'")?;
                        return Some(Expr::PartSelect {
                            base: name,
                            msb: Box::new(first),
                            lsb: Box::new(lsb),
                            span: t.span.join(close.span),
                        });
                    }
                    let close = self.expect(&TokenKind::RBracket, "']'")?;
                    return Some(Expr::BitSelect { base: name, index: Box::new(first), span: t.span.join(close.span) });
                }
                Some(Expr::Ident { name, span: t.span })
            }
            TokenKind::LParen => {
                self.bump();
                let e = self.parse_expr()?;
                self.expect(&TokenKind::RParen, "')'")?;
                Some(e)
            }
            TokenKind::LBrace => {
                let start = self.bump().span;
                let mut parts = Vec::new();
                loop {
                    parts.push(self.parse_expr()?);
                    if !self.eat(&TokenKind::Comma) {
                        break;
                    }
                }
                let close = self.expect(&TokenKind::RBrace, "'}' closing concatenation")?;
                Some(Expr::Concat { parts, span: start.join(close.span) })
            }
            other => {
                let found = describe(&other);
                self.error_here("unexpected-token", format!("expected expression, found {found}"));
                None
            }
        }
    }
}

fn describe(kind: &TokenKind) -> String {
    match kind {
        TokenKind::Ident(n) => format!("identifier '{n}'"),
        TokenKind::Kw(k) => format!("keyword '{}'", k.as_str()),
        TokenKind::Number(l) => format!("literal '{}'", l.text),
        TokenKind::Eof => "end of file".to_string(),
        TokenKind::Semi => "';'".to_string(),
        other => format!("'{}'", punct_str(other)),
    }
}

fn punct_str(kind: &TokenKind) -> &'static str {
    match kind {
        TokenKind::LParen => "(",
        TokenKind::RParen => ")",
        TokenKind::LBracket => "[",
        TokenKind::RBracket => "]",
        TokenKind::LBrace => "{",
        TokenKind::RBrace => "}",
        TokenKind::Comma => ",",
        TokenKind::Semi => ";",
        TokenKind::Colon => ":",
        TokenKind::At => "@",
        TokenKind::Star => "*",
        TokenKind::Question => "?",
        TokenKind::Dot => ".",
        TokenKind::Eq => "=",
        TokenKind::EqEq => "==",
        TokenKind::NotEq => "!=",
        TokenKind::Lt => "<",
        TokenKind::LtEq => "<=",
        TokenKind::Gt => ">",
        TokenKind::GtEq => ">=",
        TokenKind::Shl => "<<",
        TokenKind::Shr => ">>",
        TokenKind::Plus => "+",
        TokenKind::PlusPlus => "++",
        TokenKind::Minus => "-",
        TokenKind::MinusMinus => "--",
        TokenKind::Slash => "/",
        TokenKind::Percent => "%",
        TokenKind::Amp => "&",
        TokenKind::AmpAmp => "&&",
        TokenKind::Pipe => "|",
        TokenKind::PipePipe => "||",
        TokenKind::Caret => "^",
        TokenKind::Tilde => "~",
        TokenKind::Bang => "!",
        _ => "?",
    }
}

// --- post-parse validation -------------------------------------------------

/// Scope and driver checks that do not need elaboration: duplicate names,
/// undeclared identifiers, procedural assignment to wires, continuous
/// assignment to regs.
fn validate(modules: &[ModuleDecl], diags: &mut Vec<Diagnostic>) {
    let mut seen = HashSet::new();
    for m in modules {
        if !seen.insert(m.name.clone()) {
            diags.push(Diagnostic::error(
                m.span.start_line,
                1,
                "duplicate-module",
                format!("module '{}' is declared more than once", m.name),
            ));
        }
        validate_module(m, diags);
    }
}

struct ModuleScope<'m> {
    module: &'m ModuleDecl,
    loop_vars: Vec<String>,
}

impl<'m> ModuleScope<'m> {
    fn kind_of(&self, name: &str) -> Option<NetKind> {
        if let Some(p) = self.module.ports.iter().find(|p| p.name == name) {
            return Some(p.kind);
        }
        if let Some(n) = self.module.nets.iter().find(|n| n.name == name) {
            return Some(n.kind);
        }
        if self.loop_vars.iter().any(|v| v == name) {
            return Some(NetKind::Integer);
        }
        None
    }
}

fn validate_module(m: &ModuleDecl, diags: &mut Vec<Diagnostic>) {
    let mut declared = HashSet::new();
    for p in &m.ports {
        if !declared.insert(p.name.clone()) {
            diags.push(Diagnostic::error(
                p.span.start_line,
                1,
                "duplicate-decl",
                format!("'{}' is declared more than once in module '{}'", p.name, m.name),
            ));
        }
    }
    for n in &m.nets {
        if !declared.insert(n.name.clone()) {
            diags.push(Diagnostic::error(
                n.span.start_line,
                1,
                "duplicate-decl",
                format!("'{}' is declared more than once in module '{}'", n.name, m.name),
            ));
        }
    }
    let mut scope = ModuleScope { module: m, loop_vars: Vec::new() };
    for item in &m.items {
        match item {
            ModuleItem::Assign(a) => {
                check_lvalue(&a.lhs, &scope, false, diags);
                check_expr(&a.rhs, &scope, diags);
            }
            ModuleItem::Always(a) => {
                if let Sensitivity::Edges(es) = &a.sensitivity {
                    for e in es {
                        check_name(&e.signal, e.span, &scope, diags);
                    }
                }
                if let Sensitivity::Levels(names) = &a.sensitivity {
                    for n in names {
                        check_name(n, a.sens_span, &scope, diags);
                    }
                }
                check_stmt(&a.body, &mut scope, diags);
            }
            ModuleItem::Instance(inst) => {
                for c in &inst.connections {
                    if let Some(e) = &c.expr {
                        check_expr(e, &scope, diags);
                    }
                }
            }
        }
    }
}

fn check_name(name: &str, span: Span, scope: &ModuleScope, diags: &mut Vec<Diagnostic>) {
    if scope.kind_of(name).is_none() {
        diags.push(Diagnostic::error(
            span.start_line,
            1,
            "undeclared-ident",
            format!("'{name}' is not declared in module '{}'", scope.module.name),
        ));
    }
}

fn check_expr(e: &Expr, scope: &ModuleScope, diags: &mut Vec<Diagnostic>) {
    let mut names = Vec::new();
    e.idents(&mut names);
    for n in names {
        check_name(&n, e.span(), scope, diags);
    }
}

fn check_lvalue(lv: &LValue, scope: &ModuleScope, procedural: bool, diags: &mut Vec<Diagnostic>) {
    match lv {
        LValue::Ident { name, span } | LValue::BitSelect { base: name, span, .. } | LValue::PartSelect { base: name, span, .. } => {
            check_name(name, *span, scope, diags);
            if let Some(kind) = scope.kind_of(name) {
                if procedural && kind == NetKind::Wire {
                    diags.push(Diagnostic::error(
                        span.start_line,
                        1,
                        "proc-assign-to-wire",
                        format!("procedural assignment to wire '{name}' (declare it as reg)"),
                    ));
                } else if !procedural && kind == NetKind::Reg {
                    diags.push(Diagnostic::error(
                        span.start_line,
                        1,
                        "assign-to-reg",
                        format!("continuous assignment to reg '{name}' (declare it as wire)"),
                    ));
                }
            }
            if let LValue::BitSelect { index, .. } = lv {
                check_expr(index, scope, diags);
            }
            if let LValue::PartSelect { msb, lsb, .. } = lv {
                check_expr(msb, scope, diags);
                check_expr(lsb, scope, diags);
            }
        }
        LValue::Concat { parts, .. } => {
            for p in parts {
                check_lvalue(p, scope, procedural, diags);
            }
        }
    }
}

fn check_stmt(s: &Stmt, scope: &mut ModuleScope, diags: &mut Vec<Diagnostic>) {
    match s {
        Stmt::Block { stmts, .. } => {
            for st in stmts {
                check_stmt(st, scope, diags);
            }
        }
        Stmt::Assign { lhs, rhs, .. } => {
            check_lvalue(lhs, scope, true, diags);
            check_expr(rhs, scope, diags);
        }
        Stmt::If { cond, then_branch, else_branch, .. } => {
            check_expr(cond, scope, diags);
            check_stmt(then_branch, scope, diags);
            if let Some(e) = else_branch {
                check_stmt(e, scope, diags);
            }
        }
        Stmt::Case { selector, arms, default, .. } => {
            check_expr(selector, scope, diags);
            for arm in arms {
                for l in &arm.labels {
                    check_expr(l, scope, diags);
                }
                check_stmt(&arm.body, scope, diags);
            }
            if let Some(d) = default {
                check_stmt(d, scope, diags);
            }
        }
        Stmt::For { var, init, cond, step, body, span } => {
            if scope.kind_of(var) != Some(NetKind::Integer) {
                diags.push(Diagnostic::error(
                    span.start_line,
                    1,
                    "undeclared-ident",
                    format!("loop variable '{var}' must be declared 'integer'"),
                ));
            }
            check_expr(init, scope, diags);
            scope.loop_vars.push(var.clone());
            check_expr(cond, scope, diags);
            check_expr(step, scope, diags);
            check_stmt(body, scope, diags);
            scope.loop_vars.pop();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_module_shape() {
        let d = parse_str("t.v", "module m(input a, output wire y); assign y = a; endmodule");
        assert_eq!(d.modules.len(), 1);
        let m = &d.modules[0];
        assert_eq!(m.ports.len(), 2);
        assert_eq!(m.items.len(), 1);
        assert_eq!(d.top, "m");
    }

    #[test]
    fn procedural_assign_to_wire_is_diagnosed() {
        let src = SourceFile::new(
            "t.v",
            "module m(input clk, output [8:0] result);\nalways @(posedge clk) result <= 9'd1;\nendmodule\n",
        );
        let errs = parse(&src).unwrap_err();
        assert!(errs.iter().any(|d| d.code == "proc-assign-to-wire"), "{errs:?}");
    }

    #[test]
    fn missing_semicolon_reports_line_and_recovers() {
        let src = SourceFile::new(
            "t.v",
            "module m(input a, input b, output wire y, output wire z);\nassign y = a\nassign z = b;\nendmodule\n",
        );
        let errs = parse(&src).unwrap_err();
        assert!(errs.iter().any(|d| d.code == "missing-semi"));
    }

    #[test]
    fn multiple_errors_reported_via_recovery() {
        let src = SourceFile::new(
            "t.v",
            "module m(input a, output wire y);\nassign y = ;\nassign q = a;\nendmodule\n",
        );
        let errs = parse(&src).unwrap_err();
        assert!(errs.len() >= 2, "expected >=2 diagnostics, got {errs:?}");
        assert!(errs.iter().any(|d| d.code == "undeclared-ident"));
    }

    #[test]
    fn top_is_uninstantiated_module() {
        let text = "module sub(input a, output wire y); assign y = a; endmodule\n\
                    module top(input a, output wire y); sub u0 (.a(a), .y(y)); endmodule\n";
        let d = parse_str("t.v", text);
        assert_eq!(d.top, "top");
    }

    #[test]
    fn undeclared_header_port_is_error() {
        let src = SourceFile::new("t.v", "module a(A);\nassign A = 1'b1;\nendmodule\n");
        let errs = parse(&src).unwrap_err();
        assert!(errs.iter().any(|d| d.code == "undeclared-port"), "{errs:?}");
    }

    #[test]
    fn diagnostics_are_deterministic() {
        let text = "module m(input a output wire y);\nassign y = a;\nendmodule\n";
        let src = SourceFile::new("t.v", text);
        let a = parse(&src).unwrap_err();
        let b = parse(&src).unwrap_err();
        assert_eq!(a, b);
    }

    #[test]
    fn out_of_subset_constructs_get_clear_diagnostics() {
        let src = SourceFile::new(
            "t.v",
            "module m(input a, output wire y);\nparameter W = 4;\nassign y = a;\nendmodule\n",
        );
        let errs = parse(&src).unwrap_err();
        assert!(
            errs.iter().any(|d| d.code == "unsupported-construct" && d.message.contains("parameter")),
            "{errs:?}"
        );
        let src = SourceFile::new("t.v", "`define W 4\nmodule m(input a, output wire y);\nassign y = a;\nendmodule\n");
        let errs = parse(&src).unwrap_err();
        assert!(errs.iter().any(|d| d.code == "unsupported-construct"), "{errs:?}");
    }

    #[test]
    fn for_loop_with_plusplus_desugars() {
        let text = "module m(input [7:0] a, output reg [7:0] y);\ninteger i;\nalways @(*) begin\ny = 8'd0;\nfor (i = 0; i < 8; i++) y[i] = a[i];\nend\nendmodule\n";
        let d = parse_str("t.v", text);
        let m = &d.modules[0];
        match &m.items[0] {
            ModuleItem::Always(a) => match &a.body {
                Stmt::Block { stmts, .. } => match &stmts[1] {
                    Stmt::For { step, .. } => {
                        assert!(matches!(step, Expr::Binary { op: BinaryOp::Add, .. }));
                    }
                    other => panic!("expected for, got {other:?}"),
                },
                other => panic!("expected block, got {other:?}"),
            },
            other => panic!("expected always, got {other:?}"),
        }
    }
}
