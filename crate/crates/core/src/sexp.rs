//! Minimal s-expression reader used by every file format in the project.
//!
//! Atoms are bare tokens (symbols, rationals); `;` starts a line comment.

use std::fmt;

use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

#[derive(Debug, Error)]
#[error("parse error at byte {pos}: {msg}")]
pub struct SexpError {
    pub pos: usize,
    pub msg: String,
}

impl Sexp {
    pub fn atom(s: impl Into<String>) -> Sexp {
        Sexp::Atom(s.into())
    }

    pub fn list(items: Vec<Sexp>) -> Sexp {
        Sexp::List(items)
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(s) => Some(s),
            Sexp::List(_) => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List(items) => Some(items),
            Sexp::Atom(_) => None,
        }
    }

    /// Head symbol of a list form, e.g. `(pred P 1 id)` has head `pred`.
    pub fn head(&self) -> Option<&str> {
        self.as_list().and_then(|items| items.first()).and_then(Sexp::as_atom)
    }
}

impl fmt::Display for Sexp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sexp::Atom(s) => write!(f, "{s}"),
            Sexp::List(items) => {
                write!(f, "(")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{item}")?;
                }
                write!(f, ")")
            }
        }
    }
}

struct Reader<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn skip_space(&mut self) {
        while self.pos < self.src.len() {
            match self.src[self.pos] {
                b';' => {
                    while self.pos < self.src.len() && self.src[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn read(&mut self) -> Result<Sexp, SexpError> {
        self.skip_space();
        if self.pos >= self.src.len() {
            return Err(SexpError { pos: self.pos, msg: "unexpected end of input".into() });
        }
        match self.src[self.pos] {
            b'(' => {
                self.pos += 1;
                let mut items = Vec::new();
                loop {
                    self.skip_space();
                    if self.pos >= self.src.len() {
                        return Err(SexpError { pos: self.pos, msg: "unclosed '('".into() });
                    }
                    if self.src[self.pos] == b')' {
                        self.pos += 1;
                        return Ok(Sexp::List(items));
                    }
                    items.push(self.read()?);
                }
            }
            b')' => Err(SexpError { pos: self.pos, msg: "unexpected ')'".into() }),
            _ => {
                let start = self.pos;
                while self.pos < self.src.len() {
                    let c = self.src[self.pos];
                    if c.is_ascii_whitespace() || c == b'(' || c == b')' || c == b';' {
                        break;
                    }
                    self.pos += 1;
                }
                let text = std::str::from_utf8(&self.src[start..self.pos])
                    .map_err(|_| SexpError { pos: start, msg: "invalid utf-8 atom".into() })?;
                Ok(Sexp::Atom(text.to_string()))
            }
        }
    }
}

/// Reads a single s-expression; trailing input is an error.
pub fn parse_one(text: &str) -> Result<Sexp, SexpError> {
    let mut r = Reader { src: text.as_bytes(), pos: 0 };
    let e = r.read()?;
    r.skip_space();
    if r.pos < r.src.len() {
        return Err(SexpError { pos: r.pos, msg: "trailing input after expression".into() });
    }
    Ok(e)
}

/// Reads a whole file as a sequence of top-level forms.
pub fn parse_many(text: &str) -> Result<Vec<Sexp>, SexpError> {
    let mut r = Reader { src: text.as_bytes(), pos: 0 };
    let mut out = Vec::new();
    loop {
        r.skip_space();
        if r.pos >= r.src.len() {
            return Ok(out);
        }
        out.push(r.read()?);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let text = "(sup x (sub (const 1) (nu x)))";
        let e = parse_one(text).unwrap();
        assert_eq!(e.to_string(), text);
    }

    #[test]
    fn comments_and_many() {
        let forms = parse_many("; header\n(a 1) (b (c 2/3))\n; tail\n").unwrap();
        assert_eq!(forms.len(), 2);
        assert_eq!(forms[1].head(), Some("b"));
    }

    #[test]
    fn errors_carry_position() {
        let err = parse_one("(a (b)").unwrap_err();
        assert!(err.to_string().contains("byte"));
        assert!(parse_one("(a))").is_err());
    }
}
