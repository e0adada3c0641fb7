//! Writer and reader for the CPLEX-style LP text file format.
//!
//! Only the subset this crate emits is supported on the read side: one
//! objective, named constraints, `Bounds` and `Binaries` sections, and `\`
//! comments. Numbers are written in shortest round-trip form so a write/read
//! cycle is exact.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::lp::{LinearProgram, Relation, Sense};

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub coeff: f64,
    pub var: String,
}

impl Term {
    pub fn new(coeff: f64, var: impl Into<String>) -> Self {
        Self { coeff, var: var.into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub name: String,
    pub terms: Vec<Term>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Bound {
    Range { var: String, lower: f64, upper: f64 },
    Lower { var: String, lower: f64 },
    Upper { var: String, upper: f64 },
    Free { var: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpDocument {
    pub comments: Vec<String>,
    pub sense: Sense,
    pub objective_name: String,
    pub objective: Vec<Term>,
    pub rows: Vec<Row>,
    pub bounds: Vec<Bound>,
    pub binaries: Vec<String>,
}

const WRAP: usize = 78;

pub fn format_number(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 {
        "0".into()
    } else if (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn push_wrapped(out: &mut String, line: &mut String, token: &str) {
    if line.len() + token.len() + 1 > WRAP && !line.trim().is_empty() {
        out.push_str(line.trim_end());
        out.push('\n');
        line.clear();
        line.push_str("   ");
    }
    if !line.ends_with(' ') && !line.is_empty() {
        line.push(' ');
    }
    line.push_str(token);
}

fn write_terms(out: &mut String, line: &mut String, terms: &[Term]) {
    if terms.is_empty() {
        push_wrapped(out, line, "0");
        return;
    }
    for (i, t) in terms.iter().enumerate() {
        let mag = t.coeff.abs();
        let sign = if t.coeff < 0.0 { "-" } else { "+" };
        let body = if mag == 1.0 { t.var.clone() } else { format!("{} {}", format_number(mag), t.var) };
        let token = if i == 0 && sign == "+" { body } else { format!("{sign} {body}") };
        push_wrapped(out, line, &token);
    }
}

impl LpDocument {
    pub fn to_lp_string(&self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            let _ = writeln!(out, "\\ {c}");
        }
        out.push_str(match self.sense {
            Sense::Min => "Minimize\n",
            Sense::Max => "Maximize\n",
        });
        let mut line = format!(" {}:", self.objective_name);
        write_terms(&mut out, &mut line, &self.objective);
        out.push_str(line.trim_end());
        out.push('\n');

        out.push_str("Subject To\n");
        for r in &self.rows {
            let mut line = format!(" {}:", r.name);
            write_terms(&mut out, &mut line, &r.terms);
            push_wrapped(&mut out, &mut line, r.relation.symbol());
            push_wrapped(&mut out, &mut line, &format_number(r.rhs));
            out.push_str(line.trim_end());
            out.push('\n');
        }

        if !self.bounds.is_empty() {
            out.push_str("Bounds\n");
            for b in &self.bounds {
                let _ = match b {
                    Bound::Range { var, lower, upper } => {
                        writeln!(out, " {} <= {var} <= {}", format_number(*lower), format_number(*upper))
                    }
                    Bound::Lower { var, lower } => writeln!(out, " {var} >= {}", format_number(*lower)),
                    Bound::Upper { var, upper } => writeln!(out, " {var} <= {}", format_number(*upper)),
                    Bound::Free { var } => writeln!(out, " {var} free"),
                };
            }
        }
        if !self.binaries.is_empty() {
            out.push_str("Binaries\n");
            let mut line = String::new();
            for b in &self.binaries {
                push_wrapped(&mut out, &mut line, b);
            }
            out.push(' ');
            out.push_str(line.trim());
            out.push('\n');
        }
        out.push_str("End\n");
        out
    }

    /// The document of a plain [`LinearProgram`] with variables `x1..xn`.
    pub fn from_program(lp: &LinearProgram) -> Self {
        let var = |j: usize| format!("x{}", j + 1);
        let terms = |c: &[f64]| {
            c.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, v)| Term::new(*v, var(j))).collect()
        };
        let bounds = lp
            .bounds
            .iter()
            .enumerate()
            .filter_map(|(j, &(lo, hi))| match (lo.is_finite(), hi.is_finite()) {
                (true, true) => Some(Bound::Range { var: var(j), lower: lo, upper: hi }),
                (true, false) if lo == 0.0 => None,
                (true, false) => Some(Bound::Lower { var: var(j), lower: lo }),
                (false, true) => Some(Bound::Range { var: var(j), lower: f64::NEG_INFINITY, upper: hi }),
                (false, false) => Some(Bound::Free { var: var(j) }),
            })
            .collect();
        Self {
            comments: vec!["linear program debug dump".into()],
            sense: lp.sense,
            objective_name: "obj".into(),
            objective: terms(&lp.objective),
            rows: lp
                .constraints
                .iter()
                .enumerate()
                .map(|(i, c)| Row { name: format!("c{}", i + 1), terms: terms(&c.coeffs), relation: c.relation, rhs: c.rhs })
                .collect(),
            bounds,
            binaries: Vec::new(),
        }
    }
}

fn parse_number(tok: &str, line: usize) -> Result<f64> {
    match tok.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" | "+infinity" => Ok(f64::INFINITY),
        "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
        _ => tok.parse().map_err(|_| Error::Parse { row: line, message: format!("expected a number, got `{tok}`") }),
    }
}

fn is_number(tok: &str) -> bool {
    tok.parse::<f64>().is_ok()
}

fn parse_relation(tok: &str) -> Option<Relation> {
    match tok {
        "<=" | "=<" | "<" => Some(Relation::Le),
        ">=" | "=>" | ">" => Some(Relation::Ge),
        "=" => Some(Relation::Eq),
        _ => None,
    }
}

/// Parses `[+|-] [coef] var ...` until a relation token or the end.
fn parse_terms(tokens: &[&str], line: usize) -> Result<(Vec<Term>, usize)> {
    let mut terms = Vec::new();
    let mut i = 0;
    while i < tokens.len() && parse_relation(tokens[i]).is_none() {
        let mut sign = 1.0;
        while i < tokens.len() && (tokens[i] == "+" || tokens[i] == "-") {
            if tokens[i] == "-" {
                sign = -sign;
            }
            i += 1;
        }
        let mut coeff = 1.0;
        if i < tokens.len() && is_number(tokens[i]) {
            coeff = parse_number(tokens[i], line)?;
            i += 1;
            if i >= tokens.len() || parse_relation(tokens[i]).is_some() {
                // A bare constant such as the `0` of an empty objective.
                if coeff != 0.0 {
                    return Err(Error::Parse { row: line, message: "constant terms are not supported".into() });
                }
                continue;
            }
        }
        let var = tokens.get(i).ok_or_else(|| Error::Parse { row: line, message: "dangling coefficient".into() })?;
        terms.push(Term::new(sign * coeff, *var));
        i += 1;
    }
    Ok((terms, i))
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Preamble,
    Objective,
    Constraints,
    Bounds,
    Binaries,
    End,
}

/// Parses a document produced by [`LpDocument::to_lp_string`].
pub fn parse_lp(text: &str) -> Result<LpDocument> {
    let mut doc = LpDocument {
        comments: Vec::new(),
        sense: Sense::Min,
        objective_name: String::new(),
        objective: Vec::new(),
        rows: Vec::new(),
        bounds: Vec::new(),
        binaries: Vec::new(),
    };
    let mut section = Section::Preamble;
    // (first line number, accumulated tokens) of the item being read.
    let mut pending: Option<(usize, Vec<String>)> = None;

    let flush = |section: Section, pending: &mut Option<(usize, Vec<String>)>, doc: &mut LpDocument| -> Result<()> {
        let Some((line, toks)) = pending.take() else { return Ok(()) };
        let toks: Vec<&str> = toks.iter().map(String::as_str).collect();
        let (name, body) = match toks.first() {
            Some(t) if t.ends_with(':') => (t.trim_end_matches(':').to_string(), &toks[1..]),
            _ => (String::new(), &toks[..]),
        };
        match section {
            Section::Objective => {
                let (terms, used) = parse_terms(body, line)?;
                if used != body.len() {
                    return Err(Error::Parse { row: line, message: "relation in objective".into() });
                }
                doc.objective_name = name;
                doc.objective = terms;
            }
            Section::Constraints => {
                let (terms, used) = parse_terms(body, line)?;
                let rel = body.get(used).and_then(|t| parse_relation(t));
                let rhs = body.get(used + 1);
                match (rel, rhs) {
                    (Some(relation), Some(rhs)) if used + 2 == body.len() => {
                        doc.rows.push(Row { name, terms, relation, rhs: parse_number(rhs, line)? });
                    }
                    _ => return Err(Error::Parse { row: line, message: "malformed constraint".into() }),
                }
            }
            _ => {}
        }
        Ok(())
    };

    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        let (content, comment) = match raw.find('\\') {
            Some(p) => (&raw[..p], Some(raw[p + 1..].trim())),
            None => (raw, None),
        };
        if let Some(c) = comment {
            if section == Section::Preamble && content.trim().is_empty() {
                doc.comments.push(c.to_string());
            }
        }
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        let keyword = trimmed.to_ascii_lowercase();
        let next = match keyword.as_str() {
            "minimize" | "minimise" | "min" => Some((Section::Objective, Some(Sense::Min))),
            "maximize" | "maximise" | "max" => Some((Section::Objective, Some(Sense::Max))),
            "subject to" | "such that" | "st" | "s.t." => Some((Section::Constraints, None)),
            "bounds" => Some((Section::Bounds, None)),
            "binaries" | "binary" => Some((Section::Binaries, None)),
            "end" => Some((Section::End, None)),
            _ => None,
        };
        if let Some((s, sense)) = next {
            flush(section, &mut pending, &mut doc)?;
            section = s;
            if let Some(sense) = sense {
                doc.sense = sense;
            }
            continue;
        }
        let toks: Vec<&str> = trimmed.split_whitespace().collect();
        match section {
            Section::Objective | Section::Constraints => {
                let starts_item = toks[0].ends_with(':') || !raw.starts_with("   ");
                if starts_item {
                    flush(section, &mut pending, &mut doc)?;
                    pending = Some((line_no, toks.iter().map(|s| s.to_string()).collect()));
                } else if let Some((_, acc)) = pending.as_mut() {
                    acc.extend(toks.iter().map(|s| s.to_string()));
                } else {
                    pending = Some((line_no, toks.iter().map(|s| s.to_string()).collect()));
                }
            }
            Section::Bounds => doc.bounds.push(parse_bound(&toks, line_no)?),
            Section::Binaries => doc.binaries.extend(toks.iter().map(|s| s.to_string())),
            Section::Preamble | Section::End => {
                return Err(Error::Parse { row: line_no, message: format!("unexpected content `{trimmed}`") })
            }
        }
    }
    flush(section, &mut pending, &mut doc)?;
    Ok(doc)
}

fn parse_bound(toks: &[&str], line: usize) -> Result<Bound> {
    let bad = || Error::Parse { row: line, message: format!("malformed bound `{}`", toks.join(" ")) };
    match toks {
        [var, free] if free.eq_ignore_ascii_case("free") => Ok(Bound::Free { var: var.to_string() }),
        [lo, "<=", var, "<=", hi] => {
            Ok(Bound::Range { var: var.to_string(), lower: parse_number(lo, line)?, upper: parse_number(hi, line)? })
        }
        [var, "<=", hi] => Ok(Bound::Upper { var: var.to_string(), upper: parse_number(hi, line)? }),
        [var, ">=", lo] => Ok(Bound::Lower { var: var.to_string(), lower: parse_number(lo, line)? }),
        _ => Err(bad()),
    }
}
