use super::{Formula, FormulaError, Fragment, PathExpr, StateExpr};

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Accept `l W r` in CPCTL mode by reading it as `l W (l & r)`.
    pub continuing_normalize: bool,
}

pub fn parse_formula(text: &str, fragment: Fragment) -> Result<Formula, FormulaError> {
    parse_formula_with(text, fragment, ParseOptions::default())
}

pub fn parse_formula_with(
    text: &str,
    fragment: Fragment,
    options: ParseOptions,
) -> Result<Formula, FormulaError> {
    if fragment == Fragment::Full {
        return Err(FormulaError::FragmentViolation {
            operator: "U",
            fragment,
        });
    }
    let tokens = tokenize(text)?;
    let mut p = Parser {
        text,
        tokens,
        pos: 0,
        fragment,
        options,
    };
    let expr = p.state()?;
    if !matches!(p.peek(), Tok::Eof) {
        return Err(p.error_here("unexpected trailing input"));
    }
    Formula::from_expr(&expr, fragment)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    Slash,
    Bang,
    Amp,
    Geq,
    LParen,
    RParen,
    LBrack,
    RBrack,
    Eof,
}

struct Token {
    tok: Tok,
    offset: usize,
}

fn syntax_error(text: &str, offset: usize, message: impl Into<String>) -> FormulaError {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().unwrap_or("").chars().count() + 1;
    FormulaError::Syntax {
        offset,
        line,
        column,
        message: message.into(),
    }
}

fn tokenize(text: &str) -> Result<Vec<Token>, FormulaError> {
    let mut out = Vec::new();
    let mut it = text.char_indices().peekable();
    while let Some(&(i, c)) = it.peek() {
        if c.is_whitespace() {
            it.next();
            continue;
        }
        let single = match c {
            '/' => Some(Tok::Slash),
            '!' | '¬' => Some(Tok::Bang),
            '&' | '∧' => Some(Tok::Amp),
            '≥' => Some(Tok::Geq),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '[' => Some(Tok::LBrack),
            ']' => Some(Tok::RBrack),
            _ => None,
        };
        if let Some(tok) = single {
            it.next();
            out.push(Token { tok, offset: i });
            continue;
        }
        if c == '>' {
            it.next();
            match it.peek() {
                Some(&(_, '=')) => {
                    it.next();
                    out.push(Token { tok: Tok::Geq, offset: i });
                    continue;
                }
                _ => return Err(syntax_error(text, i, "expected '>='")),
            }
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while let Some(&(_, d)) = it.peek() {
                if d.is_ascii_alphanumeric() || d == '_' {
                    s.push(d);
                    it.next();
                } else {
                    break;
                }
            }
            out.push(Token { tok: Tok::Ident(s), offset: i });
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let mut s = String::new();
            let mut prev = ' ';
            while let Some(&(_, d)) = it.peek() {
                let exp_sign = (d == '-' || d == '+') && (prev == 'e' || prev == 'E');
                if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exp_sign {
                    s.push(d);
                    prev = d;
                    it.next();
                } else {
                    break;
                }
            }
            out.push(Token { tok: Tok::Number(s), offset: i });
            continue;
        }
        return Err(syntax_error(text, i, format!("unexpected character '{c}'")));
    }
    out.push(Token {
        tok: Tok::Eof,
        offset: text.len(),
    });
    Ok(out)
}

struct Parser<'a> {
    text: &'a str,
    tokens: Vec<Token>,
    pos: usize,
    fragment: Fragment,
    options: ParseOptions,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.tokens[(self.pos + k).min(self.tokens.len() - 1)].tok
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].offset
    }

    fn bump(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error_here(&self, message: impl Into<String>) -> FormulaError {
        syntax_error(self.text, self.offset(), message)
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), FormulaError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error_here(format!("expected {what}")))
        }
    }

    fn state(&mut self) -> Result<StateExpr, FormulaError> {
        let mut left = self.unit()?;
        while *self.peek() == Tok::Amp {
            self.bump();
            let right = self.unit()?;
            left = StateExpr::and(left, right);
        }
        Ok(left)
    }

    fn unit(&mut self) -> Result<StateExpr, FormulaError> {
        let start = self.offset();
        match self.bump() {
            Tok::Ident(s) => match s.as_str() {
                "true" => Ok(StateExpr::True),
                "false" => Ok(StateExpr::False),
                "P" => {
                    if *self.peek() != Tok::Geq {
                        return Err(syntax_error(self.text, start, "'P' is reserved; expected 'P>='"));
                    }
                    self.bump();
                    let p = self.probability()?;
                    self.expect(Tok::LBrack, "'['")?;
                    let path = self.path()?;
                    self.expect(Tok::RBrack, "']'")?;
                    Ok(StateExpr::prob(p, path))
                }
                "W" => Err(syntax_error(self.text, start, "'W' is reserved")),
                _ => Ok(StateExpr::Atom(s)),
            },
            Tok::Bang => {
                let at = self.offset();
                match self.bump() {
                    Tok::Ident(s) if !is_reserved(&s) => Ok(StateExpr::NegAtom(s)),
                    _ => Err(syntax_error(
                        self.text,
                        at,
                        "negation applies only to atomic propositions",
                    )),
                }
            }
            Tok::LParen => {
                let e = self.state()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            _ => Err(syntax_error(self.text, start, "expected a state formula")),
        }
    }

    fn probability(&mut self) -> Result<f64, FormulaError> {
        let at = self.offset();
        let num = match self.bump() {
            Tok::Number(s) => s,
            _ => return Err(syntax_error(self.text, at, "expected a probability")),
        };
        if *self.peek() == Tok::Slash {
            self.bump();
            let den_at = self.offset();
            let den = match self.bump() {
                Tok::Number(s) => s,
                _ => return Err(syntax_error(self.text, den_at, "expected a denominator")),
            };
            let a: u64 = num
                .parse()
                .map_err(|_| syntax_error(self.text, at, "fraction numerator must be an integer"))?;
            let b: u64 = den.parse().map_err(|_| {
                syntax_error(self.text, den_at, "fraction denominator must be an integer")
            })?;
            if b == 0 {
                return Err(syntax_error(self.text, den_at, "zero denominator"));
            }
            let p = a as f64 / b as f64;
            if p > 1.0 {
                return Err(FormulaError::InvalidThreshold(p));
            }
            return Ok(p);
        }
        let p: f64 = num
            .parse()
            .map_err(|_| syntax_error(self.text, at, format!("invalid number '{num}'")))?;
        if !(0.0..=1.0).contains(&p) {
            return Err(FormulaError::InvalidThreshold(p));
        }
        Ok(p)
    }

    fn starts_unit(tok: &Tok) -> bool {
        match tok {
            Tok::Ident(s) => s != "W",
            Tok::Bang | Tok::LParen => true,
            _ => false,
        }
    }

    fn path(&mut self) -> Result<PathExpr, FormulaError> {
        // G and X are operators only when followed by an operand; otherwise
        // they are ordinary atoms.
        if let Tok::Ident(op) = self.peek().clone() {
            if (op == "G" || op == "X") && Self::starts_unit(self.peek_at(1)) {
                let at = self.offset();
                self.bump();
                let body = self.state()?;
                if op == "G" {
                    return Ok(PathExpr::ContinuingWeakUntil(body, StateExpr::False));
                }
                if self.fragment == Fragment::Cpctl {
                    let _ = at;
                    return Err(FormulaError::FragmentViolation {
                        operator: "X",
                        fragment: self.fragment,
                    });
                }
                return Ok(PathExpr::Next(body));
            }
        }
        let left = self.state()?;
        let w_at = self.offset();
        match self.peek() {
            Tok::Ident(s) if s == "W" => {
                self.bump();
            }
            _ => return Err(self.error_here("expected 'W'")),
        }
        let right = self.state()?;
        if self.fragment == Fragment::SafePctl {
            return Ok(PathExpr::WeakUntil(left, right));
        }
        if let Some(goal) = continuing_goal(&left, &right) {
            return Ok(PathExpr::ContinuingWeakUntil(left, goal));
        }
        if self.options.continuing_normalize {
            return Ok(PathExpr::ContinuingWeakUntil(left, right));
        }
        Err(syntax_error(
            self.text,
            w_at,
            "in CPCTL the goal of W must contain the left operand as a conjunct \
             (use continuing normalization to read 'l W r' as 'l W (l & r)')",
        ))
    }
}

fn is_reserved(s: &str) -> bool {
    matches!(s, "true" | "false" | "P" | "W")
}

/// If `right` is `left & rest` up to conjunct reordering, returns `rest`.
fn continuing_goal(left: &StateExpr, right: &StateExpr) -> Option<StateExpr> {
    if let StateExpr::And(l, r) = right {
        if l.as_ref() == left {
            return Some((**r).clone());
        }
        if r.as_ref() == left {
            return Some((**l).clone());
        }
    }
    let mut want = Vec::new();
    flatten(left, &mut want);
    let mut have = Vec::new();
    flatten(right, &mut have);
    let mut used = vec![false; have.len()];
    for w in &want {
        let k = (0..have.len()).find(|&k| !used[k] && have[k] == *w)?;
        used[k] = true;
    }
    let rest: Vec<_> = have
        .into_iter()
        .zip(used)
        .filter(|(_, u)| !u)
        .map(|(e, _)| e.clone())
        .collect();
    Some(
        rest.into_iter()
            .reduce(StateExpr::and)
            .unwrap_or(StateExpr::True),
    )
}

fn flatten<'e>(e: &'e StateExpr, out: &mut Vec<&'e StateExpr>) {
    match e {
        StateExpr::And(l, r) => {
            flatten(l, out);
            flatten(r, out);
        }
        _ => out.push(e),
    }
}
