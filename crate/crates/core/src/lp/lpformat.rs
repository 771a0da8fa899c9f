//! CPLEX LP text format writer, and a reader for the subset the writer emits.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use super::{MilpModel, Sense, VarId, VarKind};

#[derive(Debug, Error)]
pub enum LpFormatError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
}

const TERMS_PER_LINE: usize = 8;

fn number(x: f64) -> String {
    if x == f64::INFINITY {
        "+inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x}")
    }
}

fn write_terms(out: &mut String, terms: &[(VarId, f64)], model: &MilpModel) {
    if terms.is_empty() {
        if let Some(first) = model.variables().first() {
            let _ = write!(out, " 0 {}", first.name);
        }
        return;
    }
    for (i, &(v, a)) in terms.iter().enumerate() {
        if i > 0 && i % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let sign = if a.is_sign_negative() { '-' } else { '+' };
        let _ = write!(
            out,
            " {sign} {} {}",
            number(a.abs()),
            model.variable(v).name
        );
    }
}

/// Renders `model` in LP format.
pub fn write_lp(model: &MilpModel) -> String {
    let mut out = String::new();
    out.push_str("\\ graph inspection planning model\nMinimize\n obj:");
    write_terms(&mut out, model.objective(), model);
    out.push_str("\nSubject To\n");
    for c in model.constraints() {
        let _ = write!(out, " {}:", c.name);
        write_terms(&mut out, &c.coeffs, model);
        let op = match c.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        let _ = writeln!(out, " {op} {}", number(c.rhs));
    }
    out.push_str("Bounds\n");
    for v in model.variables() {
        if v.lower == f64::NEG_INFINITY && v.upper == f64::INFINITY {
            let _ = writeln!(out, " {} free", v.name);
        } else {
            let _ = writeln!(
                out,
                " {} <= {} <= {}",
                number(v.lower),
                v.name,
                number(v.upper)
            );
        }
    }
    let binaries: Vec<_> = model
        .variables()
        .iter()
        .filter(|v| v.kind == VarKind::Binary)
        .collect();
    if !binaries.is_empty() {
        out.push_str("Binaries\n");
        for v in binaries {
            let _ = writeln!(out, " {}", v.name);
        }
    }
    out.push_str("End\n");
    out
}

pub fn export_lp(model: &MilpModel, path: impl AsRef<Path>) -> Result<(), LpFormatError> {
    fs::write(path, write_lp(model))?;
    Ok(())
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Preamble,
    Objective,
    Constraints,
    Bounds,
    Binaries,
    Done,
}

fn parse_number(token: &str, line: usize) -> Result<f64, LpFormatError> {
    match token.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" | "+infinity" => Ok(f64::INFINITY),
        "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
        _ => token.parse().map_err(|_| LpFormatError::Syntax {
            line,
            message: format!("expected a number, found {token:?}"),
        }),
    }
}

struct RawRow {
    name: String,
    terms: Vec<(String, f64)>,
    sense: Option<Sense>,
    rhs: Option<f64>,
}

/// Parses a linear expression `[+|-] [coef] name ...` from tokens.
fn push_terms<'a>(
    tokens: impl Iterator<Item = &'a str>,
    terms: &mut Vec<(String, f64)>,
    line: usize,
) -> Result<(), LpFormatError> {
    let mut sign = 1.0;
    let mut coef: Option<f64> = None;
    for tok in tokens {
        match tok {
            "+" => sign = 1.0,
            "-" => sign = -1.0,
            _ if tok.parse::<f64>().is_ok() || tok.eq_ignore_ascii_case("inf") => {
                coef = Some(parse_number(tok, line)?);
            }
            name => {
                terms.push((name.to_string(), sign * coef.unwrap_or(1.0)));
                sign = 1.0;
                coef = None;
            }
        }
    }
    Ok(())
}

/// Reads LP text as produced by [`write_lp`].
pub fn parse_lp(text: &str) -> Result<MilpModel, LpFormatError> {
    let mut section = Section::Preamble;
    let mut objective: Vec<(String, f64)> = Vec::new();
    let mut rows: Vec<RawRow> = Vec::new();
    let mut bounds: Vec<(String, f64, f64)> = Vec::new();
    let mut binaries: Vec<String> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('\\').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        match content.to_ascii_lowercase().as_str() {
            "minimize" | "minimise" | "min" => {
                section = Section::Objective;
                continue;
            }
            "subject to" | "st" | "s.t." => {
                section = Section::Constraints;
                continue;
            }
            "bounds" => {
                section = Section::Bounds;
                continue;
            }
            "binaries" | "binary" => {
                section = Section::Binaries;
                continue;
            }
            "end" => {
                section = Section::Done;
                continue;
            }
            _ => {}
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        match section {
            Section::Objective => {
                let body = tokens.iter().skip_while(|t| t.ends_with(':')).copied();
                push_terms(body, &mut objective, line)?;
            }
            Section::Constraints => {
                let mut rest = &tokens[..];
                let needs_new = rows.last().is_none_or(|r| r.rhs.is_some());
                if needs_new {
                    let name = match rest.first() {
                        Some(t) if t.ends_with(':') => {
                            rest = &rest[1..];
                            t.trim_end_matches(':').to_string()
                        }
                        _ => format!("c{}", rows.len()),
                    };
                    rows.push(RawRow {
                        name,
                        terms: Vec::new(),
                        sense: None,
                        rhs: None,
                    });
                }
                let row = rows.last_mut().expect("row pushed above");
                let split = rest
                    .iter()
                    .position(|t| matches!(*t, "<=" | ">=" | "=" | "=<" | "=>"));
                match split {
                    None => push_terms(rest.iter().copied(), &mut row.terms, line)?,
                    Some(at) => {
                        push_terms(rest[..at].iter().copied(), &mut row.terms, line)?;
                        row.sense = Some(match rest[at] {
                            "<=" | "=<" => Sense::Le,
                            ">=" | "=>" => Sense::Ge,
                            _ => Sense::Eq,
                        });
                        let rhs = rest.get(at + 1).ok_or(LpFormatError::Syntax {
                            line,
                            message: "missing right-hand side".into(),
                        })?;
                        row.rhs = Some(parse_number(rhs, line)?);
                    }
                }
            }
            Section::Bounds => match tokens.as_slice() {
                [name, free] if free.eq_ignore_ascii_case("free") => {
                    bounds.push((name.to_string(), f64::NEG_INFINITY, f64::INFINITY));
                }
                [lo, "<=", name, "<=", hi] => {
                    bounds.push((
                        name.to_string(),
                        parse_number(lo, line)?,
                        parse_number(hi, line)?,
                    ));
                }
                [name, ">=", lo] => {
                    bounds.push((name.to_string(), parse_number(lo, line)?, f64::INFINITY))
                }
                [name, "<=", hi] => bounds.push((name.to_string(), 0.0, parse_number(hi, line)?)),
                _ => {
                    return Err(LpFormatError::Syntax {
                        line,
                        message: format!("unsupported bound {content:?}"),
                    })
                }
            },
            Section::Binaries => binaries.extend(tokens.iter().map(|t| t.to_string())),
            Section::Preamble | Section::Done => {
                return Err(LpFormatError::Syntax {
                    line,
                    message: format!("unexpected content {content:?}"),
                })
            }
        }
    }

    let mut model = MilpModel::new();
    let mut ids: HashMap<String, VarId> = HashMap::new();
    let binary_set: std::collections::HashSet<&str> = binaries.iter().map(String::as_str).collect();
    let mut declare = |model: &mut MilpModel, name: &str, lo: f64, hi: f64| -> VarId {
        if let Some(&id) = ids.get(name) {
            return id;
        }
        let id = if binary_set.contains(name) && lo == 0.0 && hi == 1.0 {
            model.add_binary(name)
        } else {
            model
                .add_continuous(name, lo, hi)
                .expect("bounds validated by writer")
        };
        ids.insert(name.to_string(), id);
        id
    };
    for (name, lo, hi) in &bounds {
        declare(&mut model, name, *lo, *hi);
    }
    let mut resolve = |model: &mut MilpModel, terms: &[(String, f64)]| -> Vec<(VarId, f64)> {
        let mut merged: Vec<(VarId, f64)> = Vec::new();
        for (name, a) in terms {
            let default_hi = if binary_set.contains(name.as_str()) {
                1.0
            } else {
                f64::INFINITY
            };
            let id = declare(model, name, 0.0, default_hi);
            if *a == 0.0 {
                continue;
            }
            match merged.iter_mut().find(|(v, _)| *v == id) {
                Some(slot) => slot.1 += a,
                None => merged.push((id, *a)),
            }
        }
        merged
    };
    let obj = resolve(&mut model, &objective);
    model.set_objective(obj).expect("ids are declared");
    for (i, row) in rows.into_iter().enumerate() {
        let (Some(sense), Some(rhs)) = (row.sense, row.rhs) else {
            return Err(LpFormatError::Syntax {
                line: 0,
                message: format!("constraint {} ({}) is incomplete", i, row.name),
            });
        };
        let coeffs = resolve(&mut model, &row.terms);
        model
            .add_named_constraint(row.name, coeffs, sense, rhs)
            .expect("ids are declared");
    }
    Ok(model)
}
