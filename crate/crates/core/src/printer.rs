//! Deterministic pretty-printer for the subset AST.
//!
//! `parse(print(d))` is structurally equal to `d`, and `print` is idempotent
//! over its own output. Literal lexemes are emitted verbatim.

use crate::ast::*;

const INDENT: &str = "    ";

pub fn print(design: &Design) -> String {
    let mut out = String::new();
    for (i, m) in design.modules.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        print_module(m, &mut out);
    }
    out
}

fn print_module(m: &ModuleDecl, out: &mut String) {
    out.push_str(&format!("module {}(\n", m.name));
    for (i, p) in m.ports.iter().enumerate() {
        let dir = match p.direction {
            Direction::Input => "input",
            Direction::Output => "output",
            Direction::Internal => "input", // unreachable for ports
        };
        let kind = match p.kind {
            NetKind::Wire => "wire",
            NetKind::Reg => "reg",
            NetKind::Integer => "integer",
        };
        let range = p.range.as_ref().map(range_str).unwrap_or_default();
        let sep = if i + 1 < m.ports.len() { "," } else { "" };
        out.push_str(&format!("{INDENT}{dir} {kind}{range} {}{sep}\n", p.name));
    }
    out.push_str(");\n");
    for n in &m.nets {
        let kind = match n.kind {
            NetKind::Wire => "wire",
            NetKind::Reg => "reg",
            NetKind::Integer => "integer",
        };
        let range = n.range.as_ref().map(range_str).unwrap_or_default();
        out.push_str(&format!("{INDENT}{kind}{range} {};\n", n.name));
    }
    for item in &m.items {
        match item {
            ModuleItem::Assign(a) => {
                out.push_str(&format!("{INDENT}assign {} = {};\n", lvalue_str(&a.lhs), expr_str(&a.rhs)));
            }
            ModuleItem::Always(a) => {
                let sens = match &a.sensitivity {
                    Sensitivity::Star => "*".to_string(),
                    Sensitivity::Edges(es) => es
                        .iter()
                        .map(|e| {
                            let kw = match e.edge {
                                EdgeKind::Pos => "posedge",
                                EdgeKind::Neg => "negedge",
                            };
                            format!("{kw} {}", e.signal)
                        })
                        .collect::<Vec<_>>()
                        .join(" or "),
                    Sensitivity::Levels(names) => names.join(" or "),
                };
                out.push_str(&format!("{INDENT}always @({sens})"));
                print_stmt_after_header(&a.body, 1, out);
            }
            ModuleItem::Instance(inst) => {
                let conns = inst
                    .connections
                    .iter()
                    .map(|c| match &c.expr {
                        Some(e) => format!(".{}({})", c.port, expr_str(e)),
                        None => format!(".{}()", c.port),
                    })
                    .collect::<Vec<_>>()
                    .join(", ");
                out.push_str(&format!("{INDENT}{} {} ({conns});\n", inst.module_name, inst.instance_name));
            }
        }
    }
    out.push_str("endmodule\n");
}

fn range_str(r: &Range) -> String {
    format!(" [{}:{}]", r.msb, r.lsb)
}

/// Statement directly after `always @(...)` / `if (...)` / `for (...)`:
/// blocks open on the same line, single statements go on the next line.
fn print_stmt_after_header(s: &Stmt, depth: usize, out: &mut String) {
    match s {
        Stmt::Block { .. } => {
            out.push(' ');
            print_stmt(s, depth, out);
        }
        _ => {
            out.push('\n');
            out.push_str(&INDENT.repeat(depth + 1));
            print_stmt(s, depth + 1, out);
        }
    }
}

fn print_stmt(s: &Stmt, depth: usize, out: &mut String) {
    let pad = INDENT.repeat(depth);
    match s {
        Stmt::Block { stmts, .. } => {
            out.push_str("begin\n");
            for st in stmts {
                out.push_str(&INDENT.repeat(depth + 1));
                print_stmt(st, depth + 1, out);
            }
            out.push_str(&pad);
            out.push_str("end\n");
        }
        Stmt::Assign { lhs, rhs, kind, .. } => {
            let op = match kind {
                AssignKind::Blocking => "=",
                AssignKind::NonBlocking => "<=",
            };
            out.push_str(&format!("{} {op} {};\n", lvalue_str(lhs), expr_str(rhs)));
        }
        Stmt::If { cond, then_branch, else_branch, .. } => {
            out.push_str(&format!("if ({})", expr_str(cond)));
            print_stmt_after_header(then_branch, depth, out);
            if let Some(e) = else_branch {
                // `end` already ends with newline; align `else` with the if
                out.push_str(&pad);
                out.push_str("else");
                if matches!(**e, Stmt::If { .. }) {
                    out.push(' ');
                    print_stmt(e, depth, out);
                } else {
                    print_stmt_after_header(e, depth, out);
                }
            }
        }
        Stmt::Case { selector, arms, default, .. } => {
            out.push_str(&format!("case ({})\n", expr_str(selector)));
            for arm in arms {
                let labels = arm.labels.iter().map(expr_str).collect::<Vec<_>>().join(", ");
                out.push_str(&INDENT.repeat(depth + 1));
                out.push_str(&format!("{labels}: "));
                print_stmt(&arm.body, depth + 1, out);
            }
            if let Some(d) = default {
                out.push_str(&INDENT.repeat(depth + 1));
                out.push_str("default: ");
                print_stmt(d, depth + 1, out);
            }
            out.push_str(&pad);
            out.push_str("endcase\n");
        }
        Stmt::For { var, init, cond, step, body, .. } => {
            out.push_str(&format!(
                "for ({var} = {}; {}; {var} = {})",
                expr_str(init),
                expr_str(cond),
                expr_str(step)
            ));
            print_stmt_after_header(body, depth, out);
        }
    }
}

fn lvalue_str(lv: &LValue) -> String {
    match lv {
        LValue::Ident { name, .. } => name.clone(),
        LValue::BitSelect { base, index, .. } => format!("{base}[{}]", expr_str(index)),
        LValue::PartSelect { base, msb, lsb, .. } => format!("{base}[{}:{}]", expr_str(msb), expr_str(lsb)),
        LValue::Concat { parts, .. } => {
            let inner = parts.iter().map(lvalue_str).collect::<Vec<_>>().join(", ");
            format!("{{{inner}}}")
        }
    }
}

pub fn expr_str(e: &Expr) -> String {
    expr_prec(e, 0)
}

/// Print with minimal parentheses: parenthesize a binary child when its
/// precedence is lower than the context, or equal on the right-hand side
/// (operators are left-associative).
fn expr_prec(e: &Expr, min_prec: u8) -> String {
    match e {
        Expr::Literal(l) => l.text.clone(),
        Expr::Ident { name, .. } => name.clone(),
        Expr::BitSelect { base, index, .. } => format!("{base}[{}]", expr_str(index)),
        Expr::PartSelect { base, msb, lsb, .. } => format!("{base}[{}:{}]", expr_str(msb), expr_str(lsb)),
        Expr::Concat { parts, .. } => {
            let inner = parts.iter().map(expr_str).collect::<Vec<_>>().join(", ");
            format!("{{{inner}}}")
        }
        Expr::Unary { op, operand, .. } => {
            let inner = match **operand {
                Expr::Binary { .. } | Expr::Ternary { .. } => format!("({})", expr_str(operand)),
                Expr::Unary { .. } => format!("({})", expr_str(operand)),
                _ => expr_prec(operand, u8::MAX),
            };
            format!("{}{inner}", op.symbol())
        }
        Expr::Binary { op, left, right, .. } => {
            let prec = op.precedence();
            let l = expr_prec(left, prec);
            let r = expr_prec(right, prec + 1);
            let s = format!("{l} {} {r}", op.symbol());
            if prec < min_prec {
                format!("({s})")
            } else {
                s
            }
        }
        Expr::Ternary { cond, then_expr, else_expr, .. } => {
            let s = format!(
                "{} ? {} : {}",
                expr_prec(cond, 1),
                expr_prec(then_expr, 1),
                expr_prec(else_expr, 0)
            );
            if min_prec > 0 {
                format!("({s})")
            } else {
                s
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_str;

    fn roundtrip(text: &str) {
        let d1 = parse_str("t.v", text);
        let printed = print(&d1);
        let d2 = parse_str("printed.v", &printed);
        assert!(d1.structurally_equal(&d2), "round-trip mismatch:\n--- input\n{text}\n--- printed\n{printed}");
        // idempotence
        let printed2 = print(&d2);
        assert_eq!(printed, printed2, "print is not idempotent");
    }

    #[test]
    fn roundtrip_minimal() {
        roundtrip("module m(input a, output wire y); assign y = a; endmodule");
    }

    #[test]
    fn roundtrip_always_and_case() {
        roundtrip(
            "module m(input clk, input rstn, input [1:0] sel, input [3:0] a, input [3:0] b, output reg [3:0] y);\n\
             always @(posedge clk or negedge rstn) begin\n\
               if (!rstn) y <= 4'd0;\n\
               else case (sel)\n\
                 2'b00: y <= a;\n\
                 2'b01: y <= b;\n\
                 2'b10: y <= a & b;\n\
                 default: y <= 4'b0;\n\
               endcase\n\
             end\n\
             endmodule",
        );
    }

    #[test]
    fn sized_literals_verbatim() {
        let d = parse_str("t.v", "module m(input rstn, output reg [31:0] data); always @(*) begin if (rstn) data = 32'b0; else data = 32'hFF; end endmodule");
        let printed = print(&d);
        assert!(printed.contains("32'b0"), "expected verbatim 32'b0 in:\n{printed}");
        assert!(printed.contains("32'hFF"));
        assert!(!printed.contains("32'd0"));
    }

    #[test]
    fn roundtrip_expressions_with_precedence() {
        roundtrip(
            "module m(input [7:0] a, input [7:0] b, input [7:0] c, output wire [7:0] y, output wire z);\n\
             assign y = (a + b) * c - (a >> 2) + {a[3:0], b[7:4]};\n\
             assign z = (a < b) && (b != c) || ^a;\n\
             endmodule",
        );
    }

    #[test]
    fn roundtrip_for_loop() {
        roundtrip(
            "module m(input [7:0] a, output reg [7:0] y);\ninteger i;\n\
             always @(*) begin\ny = 8'd0;\nfor (i = 0; i < 8; i = i + 1) y[i] = a[7 - i];\nend\nendmodule",
        );
    }

    #[test]
    fn roundtrip_instances() {
        roundtrip(
            "module sub(input [1:0] in_bd, input a, input b, output wire y);\nassign y = a & b & in_bd[0];\nendmodule\n\
             module top(input a, input b, input bdg, output wire y);\n\
             sub mod1 (.a(a), .b(b), .in_bd({bdg, 1'b1}), .y(y));\nendmodule",
        );
    }
}
