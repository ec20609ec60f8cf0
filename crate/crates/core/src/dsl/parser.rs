use std::collections::BTreeMap;

use crate::expr::{parse_expr, Expr, ParseError, Rational, Scope, Symbol};
use crate::fsmooth::{NumericCurve, LAMBDA};
use crate::sections::{phi_name, BundleKind};

use super::{CurveBodyDecl, Decl, DeclKind, DslError, ModelFile, Pos};

/// Parse a model file. Stops at the first error.
pub fn parse_model(text: &str) -> Result<ModelFile> {
    let mut p = Parser {
        src: text,
        at: 0,
        decls: Vec::new(),
        opaques: Vec::new(),
    };
    loop {
        p.skip_ws();
        if p.at >= p.src.len() {
            break;
        }
        let d = p.decl()?;
        if let Some(prev) = p.decls.iter().find(|x| x.name == d.name) {
            return Err(DslError::new(
                d.pos,
                format!("`{}` is already declared at {}", d.name, prev.pos),
            ));
        }
        if let DeclKind::Opaque { arity } = d.kind {
            p.opaques.push((d.name.to_string(), arity));
        }
        p.decls.push(d);
    }
    Ok(ModelFile { decls: p.decls })
}

struct Parser<'a> {
    src: &'a str,
    at: usize,
    decls: Vec<Decl>,
    opaques: Vec<(String, usize)>,
}

/// Frame blocks of a chart or fibred declaration, innermost last.
struct FrameInfo {
    blocks: Vec<Vec<Symbol>>,
}

struct Entry {
    text: String,
    offset: usize,
}

type Result<T> = std::result::Result<T, DslError>;

impl<'a> Parser<'a> {
    fn pos(&self, offset: usize) -> Pos {
        let offset = offset.min(self.src.len());
        let before = &self.src[..offset];
        let line = before.matches('\n').count() + 1;
        let start = before.rfind('\n').map_or(0, |k| k + 1);
        Pos {
            line,
            column: self.src[start..offset].chars().count() + 1,
        }
    }

    fn err<T>(&self, offset: usize, msg: impl Into<String>) -> Result<T> {
        Err(DslError::new(self.pos(offset), msg))
    }

    fn peek(&self) -> Option<char> {
        self.src[self.at..].chars().next()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c == '#' {
                while let Some(c) = self.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.at += c.len_utf8();
                }
            } else if c.is_whitespace() {
                self.at += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.at += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            return Ok(());
        }
        let found = self.peek().map_or("end of input".to_string(), |f| format!("`{f}`"));
        self.err(self.at, format!("expected `{c}`, found {found}"))
    }

    fn ident(&mut self) -> Result<(Symbol, usize)> {
        self.skip_ws();
        let start = self.at;
        let mut chars = self.src[start..].char_indices();
        match chars.next() {
            Some((_, c)) if c.is_ascii_alphabetic() || c == '_' => {}
            _ => return self.err(start, "expected a name"),
        }
        let len = chars
            .find(|(_, c)| !(c.is_ascii_alphanumeric() || *c == '_'))
            .map_or(self.src.len() - start, |(k, _)| k);
        self.at = start + len;
        Ok((Symbol::new(&self.src[start..start + len]), start))
    }

    fn keyword(&mut self, kw: &str) -> Result<()> {
        let (s, at) = self.ident()?;
        if s.as_str() != kw {
            return self.err(at, format!("expected `{kw}`, found `{s}`"));
        }
        Ok(())
    }

    fn peek_keyword(&mut self, kw: &str) -> bool {
        let save = self.at;
        let hit = self.ident().is_ok_and(|(s, _)| s.as_str() == kw);
        if !hit {
            self.at = save;
        }
        hit
    }

    fn name_list(&mut self) -> Result<Vec<(Symbol, usize)>> {
        self.expect('(')?;
        let mut out = Vec::new();
        if self.eat(')') {
            return Ok(out);
        }
        loop {
            out.push(self.ident()?);
            if self.eat(')') {
                return Ok(out);
            }
            self.expect(',')?;
        }
    }

    fn coord_list(&mut self) -> Result<Vec<Symbol>> {
        let items = self.name_list()?;
        for (k, (s, at)) in items.iter().enumerate() {
            if items[..k].iter().any(|(t, _)| t == s) {
                return self.err(*at, format!("`{s}` is listed twice"));
            }
        }
        Ok(items.into_iter().map(|(s, _)| s).collect())
    }

    fn lookup(&self, name: &Symbol, at: usize) -> Result<&Decl> {
        match self.decls.iter().find(|d| &d.name == name) {
            Some(d) => Ok(d),
            None => self.err(at, format!("`{name}` is not declared")),
        }
    }

    fn frame(&self, name: &Symbol, at: usize) -> Result<FrameInfo> {
        let mut blocks = Vec::new();
        let mut cur = self.lookup(name, at)?;
        loop {
            match &cur.kind {
                DeclKind::Chart { coords } => {
                    blocks.push(coords.clone());
                    break;
                }
                DeclKind::Fibred { over, coords } => {
                    blocks.push(coords.clone());
                    cur = self.lookup(over, at)?;
                }
                other => return self.err(at, format!("`{name}` is a {}, not a frame", other.keyword())),
            }
        }
        blocks.reverse();
        Ok(FrameInfo { blocks })
    }

    fn expect_kind(&self, name: &Symbol, at: usize, kw: &str) -> Result<&Decl> {
        let d = self.lookup(name, at)?;
        if d.kind.keyword() != kw {
            return self.err(at, format!("`{name}` is a {}, not a {kw}", d.kind.keyword()));
        }
        Ok(d)
    }

    fn scope<'s>(&self, coords: impl IntoIterator<Item = &'s Symbol>) -> Scope {
        let mut s = Scope::new();
        for c in coords {
            s.add_coord(c.as_str());
        }
        for (f, n) in &self.opaques {
            s.add_opaque(f, *n);
        }
        s
    }

    fn expr(&self, e: &Entry, scope: &Scope) -> Result<Expr> {
        parse_expr(&e.text, scope).map_err(|err| self.parse_error(err, e.offset))
    }

    fn parse_error(&self, err: ParseError, base: usize) -> DslError {
        let err = err.shifted(base);
        DslError::new(self.pos(err.offset()), strip_offset(&err))
    }

    /// Expression text up to a top-level `,`, `}`, newline or comment.
    fn expr_text(&mut self) -> Result<(String, usize)> {
        while matches!(self.peek(), Some(' ' | '\t' | '\r')) {
            self.at += 1;
        }
        let start = self.at;
        let mut depth = 0i32;
        while let Some(c) = self.peek() {
            match c {
                '(' | '[' => depth += 1,
                ')' | ']' => depth -= 1,
                ',' | '}' if depth <= 0 => break,
                '\n' | '#' => break,
                _ => {}
            }
            self.at += c.len_utf8();
        }
        let text = self.src[start..self.at].trim_end();
        if text.is_empty() {
            return self.err(start, "expected an expression");
        }
        Ok((text.to_string(), start))
    }

    /// `name`, `c[a, b]` or `D[a, b](phi)`.
    fn label(&mut self) -> Result<(String, usize)> {
        let (head, at) = self.ident()?;
        let mut label = head.to_string();
        self.skip_ws();
        if self.peek() == Some('[') {
            self.at += 1;
            let (a, _) = self.ident()?;
            self.expect(',')?;
            let (b, _) = self.ident()?;
            self.expect(']')?;
            label = format!("{label}[{a}, {b}]");
            self.skip_ws();
            if self.peek() == Some('(') {
                self.at += 1;
                let (arg, _) = self.ident()?;
                self.expect(')')?;
                label = format!("{label}({arg})");
            }
        }
        Ok((label, at))
    }

    /// `{ label = expr, ... }`, every expected label exactly once.
    fn body(&mut self, labels: &[String]) -> Result<Vec<Entry>> {
        self.expect('{')?;
        let open = self.at - 1;
        let mut got: BTreeMap<String, Entry> = BTreeMap::new();
        loop {
            while self.eat(',') {}
            if self.eat('}') {
                break;
            }
            if self.at >= self.src.len() {
                return self.err(open, "unclosed `{`");
            }
            let (label, label_offset) = self.label()?;
            if !labels.contains(&label) {
                return self.err(
                    label_offset,
                    format!("unexpected entry `{label}` (expected one of: {})", labels.join(", ")),
                );
            }
            if got.contains_key(&label) {
                return self.err(label_offset, format!("`{label}` is assigned twice"));
            }
            self.expect('=')?;
            let (text, offset) = self.expr_text()?;
            got.insert(
                label,
                Entry { text, offset },
            );
        }
        let mut out = Vec::with_capacity(labels.len());
        for l in labels {
            match got.remove(l) {
                Some(e) => out.push(e),
                None => return self.err(self.at - 1, format!("missing entry `{l}`")),
            }
        }
        Ok(out)
    }

    fn exprs(&self, entries: &[Entry], scope: &Scope) -> Result<Vec<Expr>> {
        entries.iter().map(|e| self.expr(e, scope)).collect()
    }

    fn bound(&mut self) -> Result<(Option<Rational>, bool)> {
        self.skip_ws();
        let start = self.at;
        while let Some(c) = self.peek() {
            if c == ',' || c == ')' {
                break;
            }
            self.at += c.len_utf8();
        }
        let text = self.src[start..self.at].trim();
        match text {
            "inf" | "+inf" => return Ok((None, true)),
            "-inf" => return Ok((None, false)),
            _ => {}
        }
        match parse_expr(text, &Scope::new()).ok().and_then(|e| e.as_constant()) {
            Some(r) => Ok((Some(r), false)),
            None => self.err(start, format!("`{text}` is not a rational number or `inf`")),
        }
    }

    fn decl(&mut self) -> Result<Decl> {
        let (kw, start) = self.ident()?;
        let pos = self.pos(start);
        let (name, kind) = match kw.as_str() {
            "chart" => {
                let (name, _) = self.ident()?;
                (name, DeclKind::Chart { coords: self.coord_list()? })
            }
            "fibred" => {
                let (name, _) = self.ident()?;
                self.keyword("over")?;
                let (over, at) = self.ident()?;
                let info = self.frame(&over, at)?;
                if info.blocks.len() > 2 {
                    return self.err(at, "frames are at most doubly fibred");
                }
                let coords = self.coord_list()?;
                (name, DeclKind::Fibred { over, coords })
            }
            "opaque" => {
                let (name, _) = self.ident()?;
                self.expect('/')?;
                self.skip_ws();
                let s = self.at;
                while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                    self.at += 1;
                }
                let arity = self.src[s..self.at]
                    .parse()
                    .or_else(|_| self.err(s, "expected an arity"))?;
                (name, DeclKind::Opaque { arity })
            }
            "change" => {
                let (name, _) = self.ident()?;
                self.keyword("on")?;
                let (on, at) = self.ident()?;
                let coords: Vec<Symbol> = self.frame(&on, at)?.blocks.concat();
                let entries = self.body(&labels(&coords))?;
                let formulas = self.exprs(&entries, &self.scope(&coords))?;
                (name, DeclKind::Change { on, formulas })
            }
            "system" => {
                let (name, _) = self.ident()?;
                self.keyword("params")?;
                let params = self.coord_list()?;
                self.keyword("from")?;
                let (from, at_from) = self.ident()?;
                let source = self.chart(&from, at_from)?;
                self.keyword("to")?;
                let (to, at_to) = self.ident()?;
                let target = self.chart(&to, at_to)?;
                self.keyword("eval")?;
                let entries = self.body(&labels(&target))?;
                let eval = self.exprs(&entries, &self.scope(params.iter().chain(&source)))?;
                (name, DeclKind::System { params, from, to, eval })
            }
            "curve" => {
                let numeric = self.peek_keyword("numeric");
                let (name, _) = self.ident()?;
                self.keyword("in")?;
                let (system, at) = self.ident()?;
                let codomain = match &self.lookup(&system, at)?.kind {
                    DeclKind::System { params, .. } => params.clone(),
                    DeclKind::SecSystem { over, params, .. } => {
                        let base = self.frame(&over[0], at)?.blocks.concat();
                        base.into_iter().chain(params.iter().cloned()).collect()
                    }
                    other => {
                        return self.err(at, format!("curves live in systems, `{system}` is a {}", other.keyword()))
                    }
                };
                self.keyword("interval")?;
                let iv = self.at;
                self.expect('(')?;
                let (lo, lo_up) = self.bound()?;
                self.expect(',')?;
                let (hi, hi_up) = self.bound()?;
                self.expect(')')?;
                if lo.is_none() && lo_up {
                    return self.err(iv, "lower bound cannot be `inf`");
                }
                if hi.is_none() && !hi_up {
                    return self.err(iv, "upper bound cannot be `-inf`");
                }
                if let (Some(a), Some(b)) = (&lo, &hi) {
                    if a >= b {
                        return self.err(iv, "empty interval");
                    }
                }
                let entries = self.body(&labels(&codomain))?;
                let body = if numeric {
                    let texts: Vec<String> = entries.iter().map(|e| e.text.clone()).collect();
                    if let Err((k, err)) = NumericCurve::parse(&texts) {
                        return Err(self.parse_error(err, entries[k].offset));
                    }
                    CurveBodyDecl::Numeric(texts)
                } else {
                    let scope = self.scope([&Symbol::new(LAMBDA)]);
                    CurveBodyDecl::Symbolic(self.exprs(&entries, &scope)?)
                };
                (name, DeclKind::Curve { system, lo, hi, body })
            }
            "secsystem" => {
                let (name, _) = self.ident()?;
                self.keyword("over")?;
                let over_at = self.at;
                let over = self.name_list()?;
                if over.len() != 3 {
                    return self.err(over_at, "expected `(B, F, G)`");
                }
                let g = self.frame(&over[2].0, over[2].1)?;
                if g.blocks.len() != 3 {
                    return self.err(over[2].1, format!("`{}` is not doubly fibred", over[2].0));
                }
                self.check_chain(&over)?;
                self.keyword("params")?;
                let params = self.coord_list()?;
                let bundle = if self.peek_keyword("vector") {
                    BundleKind::Vector
                } else if self.peek_keyword("affine") {
                    BundleKind::Affine
                } else {
                    BundleKind::General
                };
                self.keyword("eval")?;
                let entries = self.body(&labels(&g.blocks[2]))?;
                let scope = self.scope(g.blocks[0].iter().chain(&g.blocks[1]).chain(&params));
                let eval = self.exprs(&entries, &scope)?;
                let over = [over[0].0.clone(), over[1].0.clone(), over[2].0.clone()];
                (name, DeclKind::SecSystem { over, params, bundle, eval })
            }
            "section" | "gamma" => {
                let (name, _) = self.ident()?;
                self.keyword("of")?;
                let (system, at) = self.ident()?;
                let expected = if kw.as_str() == "section" { "secsystem" } else { "connsystem" };
                let d = self.expect_kind(&system, at, expected)?;
                let (base, params) = match &d.kind {
                    DeclKind::SecSystem { over, params, .. } => (over[0].clone(), params.clone()),
                    DeclKind::ConnSystem { over, params, .. } => (over[0].clone(), params.clone()),
                    _ => unreachable!(),
                };
                let x = self.frame(&base, at)?.blocks.concat();
                let entries = self.body(&labels(&params))?;
                let values = self.exprs(&entries, &self.scope(&x))?;
                if expected == "secsystem" {
                    (name, DeclKind::Section { system, values })
                } else {
                    (name, DeclKind::Gamma { system, values })
                }
            }
            "connsystem" => {
                let (name, _) = self.ident()?;
                self.keyword("over")?;
                let over_at = self.at;
                let over = self.name_list()?;
                if over.len() != 2 {
                    return self.err(over_at, "expected `(B, F)`");
                }
                let f = self.frame(&over[1].0, over[1].1)?;
                if f.blocks.len() != 2 {
                    return self.err(over[1].1, format!("`{}` is not fibred over a chart", over[1].0));
                }
                self.check_chain(&over)?;
                self.keyword("params")?;
                let params = self.coord_list()?;
                self.keyword("coeff")?;
                let wanted: Vec<String> = f.blocks[1]
                    .iter()
                    .flat_map(|y| f.blocks[0].iter().map(move |x| format!("c[{y}, {x}]")))
                    .collect();
                let entries = self.body(&wanted)?;
                let scope = self.scope(f.blocks[0].iter().chain(&params).chain(&f.blocks[1]));
                let flat = self.exprs(&entries, &scope)?;
                let coeffs = flat.chunks(f.blocks[0].len().max(1)).map(<[Expr]>::to_vec).collect();
                let coeffs = if f.blocks[0].is_empty() { vec![Vec::new(); f.blocks[1].len()] } else { coeffs };
                let over = [over[0].0.clone(), over[1].0.clone()];
                (name, DeclKind::ConnSystem { over, params, coeffs })
            }
            "fconnection" => {
                let (name, _) = self.ident()?;
                self.keyword("over")?;
                let (system, at) = self.ident()?;
                let over = match &self.expect_kind(&system, at, "secsystem")?.kind {
                    DeclKind::SecSystem { over, .. } => over.clone(),
                    _ => unreachable!(),
                };
                let g = self.frame(&over[2], at)?;
                let (x, y, z) = (&g.blocks[0], &g.blocks[1], &g.blocks[2]);
                let wanted: Vec<String> = z
                    .iter()
                    .flat_map(|a| x.iter().map(move |l| format!("D[{a}, {l}](phi)")))
                    .collect();
                let entries = self.body(&wanted)?;
                let mut scope = self.scope(x.iter().chain(y));
                for a in z {
                    scope.add_opaque(phi_name(a).as_str(), x.len() + y.len());
                }
                let flat = self.exprs(&entries, &scope)?;
                let recipes = if x.is_empty() {
                    vec![Vec::new(); z.len()]
                } else {
                    flat.chunks(x.len()).map(<[Expr]>::to_vec).collect()
                };
                (name, DeclKind::FConnection { system, recipes })
            }
            other => return self.err(start, format!("unknown declaration `{other}`")),
        };
        Ok(Decl { name, pos, kind })
    }

    fn chart(&self, name: &Symbol, at: usize) -> Result<Vec<Symbol>> {
        let info = self.frame(name, at)?;
        if info.blocks.len() != 1 {
            return self.err(at, format!("`{name}` is fibred, expected a chart"));
        }
        Ok(info.blocks.concat())
    }

    /// Each frame in `over` is fibred over the previous one.
    fn check_chain(&self, over: &[(Symbol, usize)]) -> Result<()> {
        if let DeclKind::Fibred { .. } = &self.lookup(&over[0].0, over[0].1)?.kind {
            return self.err(over[0].1, format!("`{}` is fibred, expected a chart", over[0].0));
        }
        self.frame(&over[0].0, over[0].1)?;
        for w in over.windows(2) {
            match &self.lookup(&w[1].0, w[1].1)?.kind {
                DeclKind::Fibred { over: parent, .. } if parent == &w[0].0 => {}
                _ => return self.err(w[1].1, format!("`{}` is not fibred over `{}`", w[1].0, w[0].0)),
            }
        }
        Ok(())
    }
}

fn labels(names: &[Symbol]) -> Vec<String> {
    names.iter().map(ToString::to_string).collect()
}

/// The message of a parse error without its byte offset.
fn strip_offset(err: &ParseError) -> String {
    match err {
        ParseError::Syntax { message, .. } => format!("syntax error: {message}"),
        ParseError::UnknownSymbol { name, .. } => format!("unknown symbol `{name}`"),
        ParseError::ArityMismatch {
            name, expected, found, ..
        } => format!("`{name}` takes {expected} argument(s), found {found}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file() {
        assert!(parse_model("").unwrap().is_empty());
        assert!(parse_model("  # nothing\n\n").unwrap().is_empty());
    }

    #[test]
    fn positions_of_errors() {
        let e = parse_model("chart B (x0)\nsystem s params (w) from B to M eval { z = w }").unwrap_err();
        assert_eq!(e.pos, Pos { line: 2, column: 31 });
        assert!(e.message.contains("not declared"));
        let e = parse_model("chart B (x0)\nchart B (x1)").unwrap_err();
        assert_eq!(e.pos.line, 2);
        let e = parse_model("chart M (y)\nchart N (z)\nsystem s params (w) from M to N eval {\n  z = w*q\n}").unwrap_err();
        assert_eq!(e.pos, Pos { line: 4, column: 9 });
    }

    #[test]
    fn bodies_must_be_complete() {
        let head = "chart M (y)\nchart N (z0, z1)\nsystem s params (w) from M to N eval ";
        assert!(parse_model(&format!("{head}{{ z0 = w }}")).unwrap_err().message.contains("missing"));
        assert!(parse_model(&format!("{head}{{ z0 = w, z0 = y, z1 = 1 }}")).unwrap_err().message.contains("twice"));
        assert!(parse_model(&format!("{head}{{ z0 = w\n z1 = y*w }}")).is_ok());
    }

    #[test]
    fn intervals() {
        let head = "chart M (y)\nchart N (z)\nsystem s params (w) from M to N eval { z = w }\n";
        let m = parse_model(&format!("{head}curve c in s interval (-1/2, inf) {{ w = lam }}")).unwrap();
        match &m.get("c").unwrap().kind {
            DeclKind::Curve { lo, hi, .. } => {
                assert_eq!(lo, &Some(crate::expr::rational(-1, 2)));
                assert_eq!(hi, &None);
            }
            _ => panic!(),
        }
        assert!(parse_model(&format!("{head}curve c in s interval (1, 1) {{ w = lam }}")).is_err());
        assert!(parse_model(&format!("{head}curve numeric c in s interval (-inf, inf) {{ w = abs(lam) }}")).is_ok());
        let e = parse_model(&format!("{head}curve numeric c in s interval (-inf, inf) {{ w = lam + y }}")).unwrap_err();
        assert_eq!(e.pos.line, 4);
    }
}
