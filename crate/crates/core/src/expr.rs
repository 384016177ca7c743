//! A small arithmetic expression language over the coordinates `x1..xn`.
//!
//! Expressions are parsed to an [`Ast`], printed back fully parenthesised and
//! compiled to a postfix [`Program`] for evaluation inside tight loops.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown identifier '{name}' at line {line}, column {column}")]
    UnknownIdentifier { name: String, line: usize, column: usize },
    #[error("function '{name}' takes {expected} argument(s), got {got} (line {line}, column {column})")]
    Arity {
        name: String,
        expected: usize,
        got: usize,
        line: usize,
        column: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
}

impl Func {
    fn from_name(s: &str) -> Option<Func> {
        match s {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "sqrt" => Some(Func::Sqrt),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
            Func::Sqrt if v < 0.0 => f64::NAN,
            Func::Sqrt => v.sqrt(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Ast {
    Const(f64),
    /// Zero-based coordinate index (`x1` is `Var(0)`).
    Var(usize),
    Neg(Box<Ast>),
    Bin(BinOp, Box<Ast>, Box<Ast>),
    Pow(Box<Ast>, i32),
    Call(Func, Box<Ast>),
}

impl Ast {
    /// Number of coordinates the expression needs (highest index + 1).
    pub fn arity(&self) -> usize {
        match self {
            Ast::Const(_) => 0,
            Ast::Var(i) => i + 1,
            Ast::Neg(a) | Ast::Pow(a, _) | Ast::Call(_, a) => a.arity(),
            Ast::Bin(_, a, b) => a.arity().max(b.arity()),
        }
    }

    /// Direct tree-walking evaluation; guarded operations give NaN.
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Ast::Const(c) => *c,
            Ast::Var(i) => x[*i],
            Ast::Neg(a) => -a.eval(x),
            Ast::Bin(op, a, b) => binop(*op, a.eval(x), b.eval(x)),
            Ast::Pow(a, k) => a.eval(x).powi(*k),
            Ast::Call(f, a) => f.apply(a.eval(x)),
        }
    }
}

fn binop(op: BinOp, a: f64, b: f64) -> f64 {
    match op {
        BinOp::Add => a + b,
        BinOp::Sub => a - b,
        BinOp::Mul => a * b,
        BinOp::Div if b == 0.0 => f64::NAN,
        BinOp::Div => a / b,
    }
}

impl fmt::Display for Ast {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            // `{:?}` keeps enough digits to read back the same f64
            Ast::Const(c) => write!(f, "{c:?}"),
            Ast::Var(i) => write!(f, "x{}", i + 1),
            Ast::Neg(a) => write!(f, "(-{a})"),
            Ast::Bin(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Ast::Pow(a, k) => write!(f, "({a}^{k})"),
            Ast::Call(fun, a) => write!(f, "{}({a})", fun.name()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut col) = (1, 1);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        let push = |out: &mut Vec<Token>, tok| {
            out.push(Token {
                tok,
                line: l0,
                column: c0,
            })
        };
        if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v: f64 = text.parse().map_err(|_| ParseError::Syntax {
                line: l0,
                column: c0,
                message: format!("malformed number '{text}'"),
            })?;
            col += i - start;
            push(&mut out, Tok::Num(v));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - start;
            push(&mut out, Tok::Ident(chars[start..i].iter().collect()));
            continue;
        }
        let tok = match c {
            '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            _ => {
                return Err(ParseError::Syntax {
                    line: l0,
                    column: c0,
                    message: format!("unexpected character '{c}'"),
                })
            }
        };
        push(&mut out, tok);
        i += 1;
        col += 1;
    }
    out.push(Token {
        tok: Tok::End,
        line,
        column: col,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, tok: &Token, message: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            line: tok.line,
            column: tok.column,
            message: message.into(),
        }
    }

    fn describe(tok: &Tok) -> String {
        match tok {
            Tok::End => "end of input".into(),
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("'{s}'"),
            Tok::Op(c) => format!("'{c}'"),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::Comma => "','".into(),
        }
    }

    fn expr(&mut self) -> Result<Ast, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().tok {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Ast::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Ast, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().tok {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Ast::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Ast, ParseError> {
        if self.peek().tok == Tok::Op('-') {
            self.bump();
            return Ok(Ast::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Ast, ParseError> {
        let base = self.atom()?;
        if self.peek().tok != Tok::Op('^') {
            return Ok(base);
        }
        self.bump();
        let negative = if self.peek().tok == Tok::Op('-') {
            self.bump();
            true
        } else {
            false
        };
        let t = self.bump();
        match t.tok {
            Tok::Num(v) if v.fract() == 0.0 && v.abs() <= i32::MAX as f64 => {
                let k = v as i32;
                Ok(Ast::Pow(Box::new(base), if negative { -k } else { k }))
            }
            _ => Err(self.error(
                &t,
                format!("expected integer exponent, found {}", Self::describe(&t.tok)),
            )),
        }
    }

    fn atom(&mut self) -> Result<Ast, ParseError> {
        let t = self.bump();
        match &t.tok {
            Tok::Num(v) => Ok(Ast::Const(*v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if let Some(f) = Func::from_name(name) {
                    let open = self.bump();
                    if open.tok != Tok::LParen {
                        return Err(self.error(&open, format!("expected '(' after '{name}'")));
                    }
                    let mut args = Vec::new();
                    if self.peek().tok != Tok::RParen {
                        args.push(self.expr()?);
                        while self.peek().tok == Tok::Comma {
                            self.bump();
                            args.push(self.expr()?);
                        }
                    }
                    self.expect_rparen()?;
                    if args.len() != 1 {
                        return Err(ParseError::Arity {
                            name: name.clone(),
                            expected: 1,
                            got: args.len(),
                            line: t.line,
                            column: t.column,
                        });
                    }
                    return Ok(Ast::Call(f, Box::new(args.pop().expect("one argument"))));
                }
                match variable_index(name) {
                    Some(i) => Ok(Ast::Var(i)),
                    None => Err(ParseError::UnknownIdentifier {
                        name: name.clone(),
                        line: t.line,
                        column: t.column,
                    }),
                }
            }
            other => Err(self.error(&t, format!("expected a value, found {}", Self::describe(other)))),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        let t = self.bump();
        if t.tok == Tok::RParen {
            Ok(())
        } else {
            Err(self.error(&t, format!("expected ')', found {}", Self::describe(&t.tok))))
        }
    }
}

fn variable_index(name: &str) -> Option<usize> {
    let digits = name.strip_prefix('x')?;
    if digits.is_empty() || digits.starts_with('0') || !digits.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    digits.parse::<usize>().ok().map(|k| k - 1)
}

pub fn parse_expr(src: &str) -> Result<Ast, ParseError> {
    let mut p = Parser {
        toks: tokenize(src)?,
        pos: 0,
    };
    let e = p.expr()?;
    let t = p.peek().clone();
    if t.tok != Tok::End {
        return Err(p.error(&t, format!("unexpected {}", Parser::describe(&t.tok))));
    }
    Ok(e)
}

/// Parses and checks that only `x1..xn` occur.
pub fn parse_expr_in(src: &str, n: usize) -> Result<Ast, ParseError> {
    let ast = parse_expr(src)?;
    if ast.arity() > n {
        return Err(ParseError::UnknownIdentifier {
            name: format!("x{}", ast.arity()),
            line: 1,
            column: src.find(&format!("x{}", ast.arity())).map_or(1, |c| c + 1),
        });
    }
    Ok(ast)
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Instr {
    Const(f64),
    Var(usize),
    Neg,
    Bin(BinOp),
    Pow(i32),
    Call(Func),
}

/// Postfix form of an [`Ast`].
#[derive(Clone, Debug, PartialEq)]
pub struct Program {
    code: Vec<Instr>,
    depth: usize,
    arity: usize,
}

impl Program {
    pub fn compile(ast: &Ast) -> Program {
        fn emit(a: &Ast, code: &mut Vec<Instr>, sp: usize, depth: &mut usize) {
            *depth = (*depth).max(sp + 1);
            match a {
                Ast::Const(c) => code.push(Instr::Const(*c)),
                Ast::Var(i) => code.push(Instr::Var(*i)),
                Ast::Neg(x) => {
                    emit(x, code, sp, depth);
                    code.push(Instr::Neg);
                }
                Ast::Pow(x, k) => {
                    emit(x, code, sp, depth);
                    code.push(Instr::Pow(*k));
                }
                Ast::Call(f, x) => {
                    emit(x, code, sp, depth);
                    code.push(Instr::Call(*f));
                }
                Ast::Bin(op, x, y) => {
                    emit(x, code, sp, depth);
                    emit(y, code, sp + 1, depth);
                    code.push(Instr::Bin(*op));
                }
            }
        }
        let mut code = Vec::new();
        let mut depth = 0;
        emit(ast, &mut code, 0, &mut depth);
        Program {
            code,
            depth,
            arity: ast.arity(),
        }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn len(&self) -> usize {
        self.code.len()
    }

    pub fn is_empty(&self) -> bool {
        self.code.is_empty()
    }

    /// Evaluates at `x`; `x` must have at least [`Program::arity`] entries.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut stack = Vec::with_capacity(self.depth);
        for ins in &self.code {
            match *ins {
                Instr::Const(c) => stack.push(c),
                Instr::Var(i) => stack.push(x[i]),
                Instr::Neg => {
                    let v = stack.pop().expect("operand");
                    stack.push(-v);
                }
                Instr::Pow(k) => {
                    let v = stack.pop().expect("operand");
                    stack.push(v.powi(k));
                }
                Instr::Call(f) => {
                    let v = stack.pop().expect("operand");
                    stack.push(f.apply(v));
                }
                Instr::Bin(op) => {
                    let b = stack.pop().expect("operand");
                    let a = stack.pop().expect("operand");
                    stack.push(binop(op, a, b));
                }
            }
        }
        stack.pop().expect("result")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn variable_node() {
        assert_eq!(parse_expr("x1").unwrap(), Ast::Var(0));
    }

    #[test]
    fn sphere_entry_vanishes_at_origin() {
        let e = parse_expr("-2*(x1*x2 + x2*x1)/(1 + x1^2 + x2^2)").unwrap();
        assert_eq!(e.eval(&[0.0, 0.0]), 0.0);
        let p = Program::compile(&e);
        assert_eq!(p.eval(&[0.0, 0.0]), 0.0);
        let want = -2.0 * (2.0 * 0.5 * 0.25) / (1.0 + 0.25 + 0.0625);
        assert!((p.eval(&[0.5, 0.25]) - want).abs() < 1e-15);
    }

    #[test]
    fn dangling_operator_column() {
        match parse_expr("x1 + ") {
            Err(ParseError::Syntax { line: 1, column: 6, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn error_positions_across_lines() {
        match parse_expr("x1 +\n  * x2") {
            Err(ParseError::Syntax { line: 2, column: 3, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_identifier_and_arity() {
        assert!(matches!(
            parse_expr("y + 1"),
            Err(ParseError::UnknownIdentifier { column: 1, .. })
        ));
        assert!(matches!(parse_expr("x0"), Err(ParseError::UnknownIdentifier { .. })));
        assert!(matches!(
            parse_expr("sin(x1, x2)"),
            Err(ParseError::Arity { got: 2, .. })
        ));
        assert!(matches!(parse_expr("cos()"), Err(ParseError::Arity { got: 0, .. })));
        assert!(matches!(
            parse_expr_in("x3", 2),
            Err(ParseError::UnknownIdentifier { .. })
        ));
        assert!(parse_expr_in("x2", 2).is_ok());
    }

    #[test]
    fn precedence() {
        let x = [2.0, 3.0];
        let ev = |s: &str| parse_expr(s).unwrap().eval(&x);
        assert_eq!(ev("-x1^2"), -4.0);
        assert_eq!(ev("1 - 2 - 3"), -4.0);
        assert_eq!(ev("8 / 4 / 2"), 1.0);
        assert_eq!(ev("1 + 2 * 3"), 7.0);
        assert_eq!(ev("x1^-1"), 0.5);
        assert_eq!(ev("2 * -x2"), -6.0);
        assert!(parse_expr("x1^x2").is_err());
        assert!(parse_expr("x1^1.5").is_err());
    }

    #[test]
    fn guarded_operations() {
        assert!(parse_expr("1/x1").unwrap().eval(&[0.0]).is_nan());
        assert!(Program::compile(&parse_expr("sqrt(x1)").unwrap())
            .eval(&[-1.0])
            .is_nan());
    }

    fn arb_ast() -> impl Strategy<Value = Ast> {
        let leaf = prop_oneof![(0.0..100.0f64).prop_map(Ast::Const), (0usize..3).prop_map(Ast::Var),];
        leaf.prop_recursive(5, 48, 2, |inner| {
            let op = prop_oneof![Just(BinOp::Add), Just(BinOp::Sub), Just(BinOp::Mul), Just(BinOp::Div)];
            let func = prop_oneof![Just(Func::Sin), Just(Func::Cos), Just(Func::Exp), Just(Func::Sqrt)];
            prop_oneof![
                inner.clone().prop_map(|a| Ast::Neg(Box::new(a))),
                (op, inner.clone(), inner.clone()).prop_map(|(o, a, b)| Ast::Bin(o, Box::new(a), Box::new(b))),
                (inner.clone(), -4i32..5).prop_map(|(a, k)| Ast::Pow(Box::new(a), k)),
                (func, inner).prop_map(|(f, a)| Ast::Call(f, Box::new(a))),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(ast in arb_ast()) {
            let printed = ast.to_string();
            let back = parse_expr(&printed).unwrap();
            prop_assert_eq!(&back, &ast);
            prop_assert_eq!(back.to_string(), printed);
        }

        #[test]
        fn postfix_matches_tree(ast in arb_ast(), x in proptest::array::uniform3(-2.0..2.0f64)) {
            let a = ast.eval(&x);
            let b = Program::compile(&ast).eval(&x);
            prop_assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
        }
    }
}
