use std::fmt::Write;

use super::grid::SplitRule;
use super::node::{Node, RegressionTree};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Canonical pre-order text form.
///
/// An internal node is written `(v:c:LEFT RIGHT)` with `v` the zero-based
/// variable and `c` the lattice index of the cutpoint; a leaf is `[mu]`, or
/// `[]` when leaf parameters are stripped. Leaf values use the shortest
/// representation that parses back to the same bits.
pub fn to_canonical<F: Real>(node: &Node<F>, with_mu: bool) -> String {
    let mut out = String::new();
    write_node(node, with_mu, &mut out);
    out
}

fn write_node<F: Real>(node: &Node<F>, with_mu: bool, out: &mut String) {
    match node {
        Node::Leaf { mu } => {
            if with_mu {
                let _ = write!(out, "[{mu:?}]");
            } else {
                out.push_str("[]");
            }
        }
        Node::Split { rule, left, right } => {
            let _ = write!(out, "({}:{}:", rule.var, rule.cut);
            write_node(left, with_mu, out);
            out.push(' ');
            write_node(right, with_mu, out);
            out.push(')');
        }
    }
}

impl<F: Real> RegressionTree<F> {
    pub fn to_canonical(&self) -> String {
        to_canonical(self.root(), true)
    }

    /// Canonical form with leaf parameters stripped.
    pub fn structure_key(&self) -> String {
        to_canonical(self.root(), false)
    }

    /// Parse the canonical form; stripped leaves `[]` get `mu = 0`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut p = Parser { s: text.as_bytes(), pos: 0 };
        let node = p.node()?;
        p.skip_ws();
        if p.pos != p.s.len() {
            return Err(p.err("trailing characters"));
        }
        Ok(RegressionTree::from_root(node))
    }
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse { pos: self.pos, msg: msg.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        self.skip_ws();
        if self.s.get(self.pos) == Some(&c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected '{}'", c as char)))
        }
    }

    fn uint(&mut self) -> Result<usize> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.s[start..self.pos])
            .ok()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Parse { pos: start, msg: "expected an unsigned integer".into() })
    }

    fn node<F: Real>(&mut self) -> Result<Node<F>> {
        self.skip_ws();
        match self.s.get(self.pos) {
            Some(b'[') => {
                self.pos += 1;
                let start = self.pos;
                while self.pos < self.s.len() && self.s[self.pos] != b']' {
                    self.pos += 1;
                }
                if self.pos == self.s.len() {
                    return Err(self.err("unterminated leaf"));
                }
                let body = std::str::from_utf8(&self.s[start..self.pos])
                    .map_err(|_| self.err("leaf is not UTF-8"))?
                    .trim();
                self.pos += 1;
                let mu = if body.is_empty() {
                    F::zero()
                } else {
                    let v: f64 = body
                        .parse()
                        .map_err(|_| Error::Parse { pos: start, msg: format!("bad leaf value '{body}'") })?;
                    F::of(v)
                };
                Ok(Node::leaf(mu))
            }
            Some(b'(') => {
                self.pos += 1;
                let var = self.uint()?;
                self.expect(b':')?;
                let cut = self.uint()?;
                self.expect(b':')?;
                let left = self.node()?;
                let right = self.node()?;
                self.expect(b')')?;
                Ok(Node::split(SplitRule::new(var, cut), left, right))
            }
            _ => Err(self.err("expected '(' or '['")),
        }
    }
}
