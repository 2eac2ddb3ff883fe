//! Tokenizer for the Verilog subset.
//!
//! Lexing is total: unknown characters and malformed literals produce
//! diagnostics and are skipped, so a token stream is always obtainable.

use crate::ast::{LiteralBase, Literal};
use crate::source::{Diagnostic, SourceFile, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Keyword {
    Module,
    Endmodule,
    Input,
    Output,
    Wire,
    Reg,
    Integer,
    Assign,
    Always,
    Begin,
    End,
    If,
    Else,
    Case,
    Endcase,
    Default,
    For,
    Posedge,
    Negedge,
    Or,
}

impl Keyword {
    fn from_str(s: &str) -> Option<Keyword> {
        Some(match s {
            "module" => Keyword::Module,
            "endmodule" => Keyword::Endmodule,
            "input" => Keyword::Input,
            "output" => Keyword::Output,
            "wire" => Keyword::Wire,
            "reg" => Keyword::Reg,
            "integer" => Keyword::Integer,
            "assign" => Keyword::Assign,
            "always" => Keyword::Always,
            "begin" => Keyword::Begin,
            "end" => Keyword::End,
            "if" => Keyword::If,
            "else" => Keyword::Else,
            "case" => Keyword::Case,
            "endcase" => Keyword::Endcase,
            "default" => Keyword::Default,
            "for" => Keyword::For,
            "posedge" => Keyword::Posedge,
            "negedge" => Keyword::Negedge,
            "or" => Keyword::Or,
            _ => return None,
        })
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Keyword::Module => "module",
            Keyword::Endmodule => "endmodule",
            Keyword::Input => "input",
            Keyword::Output => "output",
            Keyword::Wire => "wire",
            Keyword::Reg => "reg",
            Keyword::Integer => "integer",
            Keyword::Assign => "assign",
            Keyword::Always => "always",
            Keyword::Begin => "begin",
            Keyword::End => "end",
            Keyword::If => "if",
            Keyword::Else => "else",
            Keyword::Case => "case",
            Keyword::Endcase => "endcase",
            Keyword::Default => "default",
            Keyword::For => "for",
            Keyword::Posedge => "posedge",
            Keyword::Negedge => "negedge",
            Keyword::Or => "or",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Ident(String),
    Kw(Keyword),
    Number(Literal),
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Semi,
    Colon,
    At,
    Star,
    Question,
    Dot,
    Eq,      // =
    EqEq,    // ==
    NotEq,   // !=
    Lt,      // <
    LtEq,    // <= (also nonblocking assign)
    Gt,      // >
    GtEq,    // >=
    Shl,     // <<
    Shr,     // >>
    Plus,
    PlusPlus,
    Minus,
    MinusMinus,
    Slash,
    Percent,
    Amp,
    AmpAmp,
    Pipe,
    PipePipe,
    Caret,
    Tilde,
    Bang,
    Eof,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
}

pub struct LexOutput {
    pub tokens: Vec<Token>,
    pub diagnostics: Vec<Diagnostic>,
}

pub fn lex(src: &SourceFile) -> LexOutput {
    Lexer { src, bytes: src.text.as_bytes(), pos: 0, tokens: Vec::new(), diags: Vec::new() }.run()
}

/// True when the text lexes without any error diagnostics.
pub fn relexes_cleanly(text: &str) -> bool {
    let src = SourceFile::new("<patched>", text);
    lex(&src).diagnostics.is_empty()
}

struct Lexer<'a> {
    src: &'a SourceFile,
    bytes: &'a [u8],
    pos: usize,
    tokens: Vec<Token>,
    diags: Vec<Diagnostic>,
}

impl<'a> Lexer<'a> {
    fn run(mut self) -> LexOutput {
        while self.pos < self.bytes.len() {
            self.skip_trivia();
            if self.pos >= self.bytes.len() {
                break;
            }
            let start = self.pos;
            let b = self.bytes[self.pos];
            match b {
                b'a'..=b'z' | b'A'..=b'Z' | b'_' => self.lex_ident(),
                b'0'..=b'9' | b'\'' => self.lex_number(),
                _ => self.lex_punct(),
            }
            // Safety: every arm must consume at least one byte.
            if self.pos == start {
                self.pos += 1;
            }
        }
        let end = self.bytes.len();
        let line = self.src.line_of(end);
        self.tokens.push(Token { kind: TokenKind::Eof, span: Span::new(end, end, line, line) });
        LexOutput { tokens: self.tokens, diagnostics: self.diags }
    }

    fn skip_trivia(&mut self) {
        loop {
            while self.pos < self.bytes.len() && (self.bytes[self.pos] as char).is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.starts_with(b"//") {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if self.starts_with(b"/*") {
                let open = self.pos;
                self.pos += 2;
                loop {
                    if self.pos + 1 >= self.bytes.len() {
                        self.err(open, "unterminated-comment", "unterminated block comment");
                        self.pos = self.bytes.len();
                        break;
                    }
                    if self.starts_with(b"*/") {
                        self.pos += 2;
                        break;
                    }
                    self.pos += 1;
                }
            } else {
                return;
            }
        }
    }

    fn starts_with(&self, pat: &[u8]) -> bool {
        self.bytes[self.pos..].starts_with(pat)
    }

    fn span_from(&self, start: usize) -> Span {
        Span::new(start, self.pos, self.src.line_of(start), self.src.line_of(self.pos.saturating_sub(1)))
    }

    fn push(&mut self, kind: TokenKind, start: usize) {
        let span = self.span_from(start);
        self.tokens.push(Token { kind, span });
    }

    fn err(&mut self, at: usize, code: &str, msg: impl Into<String>) {
        let (line, col) = self.src.line_col(at);
        self.diags.push(Diagnostic::error(line, col, code, msg));
    }

    fn lex_ident(&mut self) {
        let start = self.pos;
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'a'..=b'z' | b'A'..=b'Z' | b'0'..=b'9' | b'_' | b'$' => self.pos += 1,
                _ => break,
            }
        }
        let text = &self.src.text[start..self.pos];
        match Keyword::from_str(text) {
            Some(kw) => self.push(TokenKind::Kw(kw), start),
            None => self.push(TokenKind::Ident(text.to_string()), start),
        }
    }

    /// Numbers: unsized decimal `42`, or sized `8'hFF`, `4'b10_01`, `16'd255`.
    /// `x`/`z` digits are outside the subset and rejected.
    fn lex_number(&mut self) {
        let start = self.pos;
        let mut size_digits = String::new();
        while self.pos < self.bytes.len() && (self.bytes[self.pos].is_ascii_digit() || self.bytes[self.pos] == b'_') {
            if self.bytes[self.pos] != b'_' {
                size_digits.push(self.bytes[self.pos] as char);
            }
            self.pos += 1;
        }
        if self.pos >= self.bytes.len() || self.bytes[self.pos] != b'\'' {
            // unsized decimal
            if size_digits.is_empty() {
                self.err(start, "malformed-literal", "expected digits");
                return;
            }
            match size_digits.parse::<u64>() {
                Ok(v) => {
                    let text = self.src.text[start..self.pos].to_string();
                    let lit = Literal {
                        width: None,
                        value: v,
                        base: LiteralBase::Dec,
                        text,
                        span: self.span_from(start),
                    };
                    self.push(TokenKind::Number(lit), start);
                }
                Err(_) => self.err(start, "malformed-literal", "decimal literal out of range"),
            }
            return;
        }
        // sized literal: <size>'<base><digits>
        self.pos += 1; // consume '
        let width: Option<u32> = if size_digits.is_empty() { None } else { size_digits.parse().ok() };
        let width = match width {
            Some(w) if w >= 1 && w <= 64 => w,
            Some(_) => {
                self.err(start, "width-bound", "literal width must be between 1 and 64 bits");
                self.recover_number();
                return;
            }
            None => {
                self.err(start, "malformed-literal", "sized literal requires a size prefix");
                self.recover_number();
                return;
            }
        };
        if self.pos >= self.bytes.len() {
            self.err(start, "malformed-literal", "truncated literal");
            return;
        }
        let base_ch = self.bytes[self.pos].to_ascii_lowercase();
        let (base, radix) = match base_ch {
            b'b' => (LiteralBase::Bin, 2),
            b'o' => (LiteralBase::Oct, 8),
            b'd' => (LiteralBase::Dec, 10),
            b'h' => (LiteralBase::Hex, 16),
            _ => {
                self.err(start, "malformed-literal", format!("unknown base '{}'", base_ch as char));
                self.recover_number();
                return;
            }
        };
        self.pos += 1;
        let digits_start = self.pos;
        let mut digits = String::new();
        while self.pos < self.bytes.len() {
            let c = self.bytes[self.pos] as char;
            if c == '_' {
                self.pos += 1;
                continue;
            }
            if c.is_ascii_alphanumeric() {
                digits.push(c);
                self.pos += 1;
            } else {
                break;
            }
        }
        if digits.is_empty() {
            self.err(digits_start, "malformed-literal", "literal has no digits");
            return;
        }
        if digits.chars().any(|c| matches!(c.to_ascii_lowercase(), 'x' | 'z')) {
            self.err(start, "malformed-literal", "x/z digits are not supported in this subset");
            return;
        }
        let value = match u64::from_str_radix(&digits, radix) {
            Ok(v) => v,
            Err(_) => {
                self.err(start, "malformed-literal", format!("invalid digits for base-{radix} literal"));
                return;
            }
        };
        let masked = if width == 64 { value } else { value & ((1u64 << width) - 1) };
        if masked != value {
            self.err(start, "malformed-literal", format!("literal value does not fit in {width} bits"));
            return;
        }
        let text = self.src.text[start..self.pos].to_string();
        let lit = Literal { width: Some(width), value, base, text, span: self.span_from(start) };
        self.push(TokenKind::Number(lit), start);
    }

    fn recover_number(&mut self) {
        while self.pos < self.bytes.len() && (self.bytes[self.pos] as char).is_ascii_alphanumeric() {
            self.pos += 1;
        }
    }

    fn lex_punct(&mut self) {
        let start = self.pos;
        let two: &[u8] = if self.pos + 1 < self.bytes.len() { &self.bytes[self.pos..self.pos + 2] } else { b"" };
        let kind = match two {
            b"==" => Some(TokenKind::EqEq),
            b"!=" => Some(TokenKind::NotEq),
            b"<=" => Some(TokenKind::LtEq),
            b">=" => Some(TokenKind::GtEq),
            b"<<" => Some(TokenKind::Shl),
            b">>" => Some(TokenKind::Shr),
            b"&&" => Some(TokenKind::AmpAmp),
            b"||" => Some(TokenKind::PipePipe),
            b"++" => Some(TokenKind::PlusPlus),
            b"--" => Some(TokenKind::MinusMinus),
            _ => None,
        };
        if let Some(kind) = kind {
            self.pos += 2;
            self.push(kind, start);
            return;
        }
        let kind = match self.bytes[self.pos] {
            b'(' => TokenKind::LParen,
            b')' => TokenKind::RParen,
            b'[' => TokenKind::LBracket,
            b']' => TokenKind::RBracket,
            b'{' => TokenKind::LBrace,
            b'}' => TokenKind::RBrace,
            b',' => TokenKind::Comma,
            b';' => TokenKind::Semi,
            b':' => TokenKind::Colon,
            b'@' => TokenKind::At,
            b'*' => TokenKind::Star,
            b'?' => TokenKind::Question,
            b'.' => TokenKind::Dot,
            b'=' => TokenKind::Eq,
            b'<' => TokenKind::Lt,
            b'>' => TokenKind::Gt,
            b'+' => TokenKind::Plus,
            b'-' => TokenKind::Minus,
            b'/' => TokenKind::Slash,
            b'%' => TokenKind::Percent,
            b'&' => TokenKind::Amp,
            b'|' => TokenKind::Pipe,
            b'^' => TokenKind::Caret,
            b'~' => TokenKind::Tilde,
            b'!' => TokenKind::Bang,
            b'`' => {
                self.pos += 1;
                self.err(start, "unsupported-construct", "preprocessor directives are outside the supported subset");
                // skip the directive name so one directive yields one diagnostic
                while self.pos < self.bytes.len() && (self.bytes[self.pos] as char).is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                return;
            }
            b'#' => {
                self.pos += 1;
                self.err(start, "unsupported-construct", "delays ('#') are outside the supported subset");
                return;
            }
            other => {
                self.pos += 1;
                self.err(start, "unknown-char", format!("unexpected character '{}'", other as char));
                return;
            }
        };
        self.pos += 1;
        self.push(kind, start);
    }
}
