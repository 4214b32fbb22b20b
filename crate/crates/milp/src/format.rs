//! Plain-text problem format used for golden files and debugging.
//!
//! ```text
//! \ anything after a backslash is a comment
//! minimize
//!   obj: 1 x0 - 2.5 x1
//! subject to
//!   r0: 1 x0 + 1 x1 >= 3
//! bounds
//!   x0 in [0, 1]
//!   x1 in [-inf, inf]
//! binaries
//!   x0
//! bigm
//!   m0: row 0 value 12.5 range [-2, 10]
//! end
//! ```
//!
//! Variables are always named `x<index>` and every variable gets a bounds line. Numbers are
//! written with Rust's shortest round-trip formatting, so `parse(write(p)) == p`.

use std::fmt::Write as _;

use crate::error::FormatError;
use crate::problem::{BigM, Cmp, LpProblem, MilpProblem, Row};

fn num(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:?}")
    }
}

fn write_terms(out: &mut String, terms: &[(usize, f64)]) {
    if terms.is_empty() {
        out.push_str(" 0");
    }
    for (k, &(j, c)) in terms.iter().enumerate() {
        if k == 0 {
            let _ = write!(out, " {} x{j}", num(c));
        } else if c.is_sign_negative() {
            let _ = write!(out, " - {} x{j}", num(-c));
        } else {
            let _ = write!(out, " + {} x{j}", num(c));
        }
    }
}

pub fn write(p: &MilpProblem) -> String {
    let lp = &p.lp;
    let mut out = String::from("minimize\n  obj:");
    let obj: Vec<(usize, f64)> = lp
        .objective
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != 0.0)
        .map(|(j, &c)| (j, c))
        .collect();
    write_terms(&mut out, &obj);
    out.push_str("\nsubject to\n");
    for (i, row) in lp.rows.iter().enumerate() {
        let _ = write!(out, "  r{i}:");
        write_terms(&mut out, &row.terms);
        let _ = writeln!(out, " {} {}", row.cmp, num(row.rhs));
    }
    out.push_str("bounds\n");
    for j in 0..lp.num_vars() {
        let _ = writeln!(out, "  x{j} in [{}, {}]", num(lp.lower[j]), num(lp.upper[j]));
    }
    if !p.binaries.is_empty() {
        out.push_str("binaries\n");
        for &j in &p.binaries {
            let _ = writeln!(out, "  x{j}");
        }
    }
    if !p.big_m.is_empty() {
        out.push_str("bigm\n");
        for m in &p.big_m {
            let _ = writeln!(
                out,
                "  {}: row {} value {} range [{}, {}]",
                m.label,
                m.row,
                num(m.value),
                num(m.range.0),
                num(m.range.1)
            );
        }
    }
    out.push_str("end\n");
    out
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Start,
    Objective,
    Rows,
    Bounds,
    Binaries,
    BigM,
    End,
}

fn parse_num(tok: &str, line: usize) -> Result<f64, FormatError> {
    match tok {
        "inf" | "+inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => tok
            .parse::<f64>()
            .map_err(|_| FormatError::new(line, format!("expected a number, found '{tok}'"))),
    }
}

fn parse_var(tok: &str, line: usize) -> Result<usize, FormatError> {
    tok.strip_prefix('x')
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| FormatError::new(line, format!("expected a variable, found '{tok}'")))
}

fn strip_label<'a>(text: &'a str, line: usize) -> Result<(&'a str, &'a str), FormatError> {
    text.split_once(':')
        .map(|(l, r)| (l.trim(), r.trim()))
        .ok_or_else(|| FormatError::new(line, "missing ':' label"))
}

/// Parses `[+|-] coef var [+|-] coef var ...`; a lone `0` means no terms.
fn parse_terms(text: &str, line: usize) -> Result<Vec<(usize, f64)>, FormatError> {
    let toks: Vec<&str> = text.split_whitespace().collect();
    if toks == ["0"] {
        return Ok(Vec::new());
    }
    let mut terms = Vec::new();
    let mut k = 0;
    let mut sign = 1.0;
    while k < toks.len() {
        match toks[k] {
            "+" => {
                sign = 1.0;
                k += 1;
                continue;
            }
            "-" => {
                sign = -1.0;
                k += 1;
                continue;
            }
            _ => {}
        }
        let c = parse_num(toks[k], line)?;
        let v = toks
            .get(k + 1)
            .ok_or_else(|| FormatError::new(line, "coefficient without variable"))?;
        terms.push((parse_var(v, line)?, sign * c));
        sign = 1.0;
        k += 2;
    }
    Ok(terms)
}

fn ensure_vars(lp: &mut LpProblem, n: usize) {
    while lp.num_vars() < n {
        lp.add_var(0.0, f64::INFINITY, 0.0);
    }
}

pub fn parse(text: &str) -> Result<MilpProblem, FormatError> {
    let mut section = Section::Start;
    let mut objective: Vec<(usize, f64)> = Vec::new();
    let mut rows: Vec<Row> = Vec::new();
    let mut bounds: Vec<(usize, f64, f64)> = Vec::new();
    let mut binaries = Vec::new();
    let mut big_m = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('\\').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let next = match body {
            "minimize" => Some(Section::Objective),
            "subject to" => Some(Section::Rows),
            "bounds" => Some(Section::Bounds),
            "binaries" => Some(Section::Binaries),
            "bigm" => Some(Section::BigM),
            "end" => Some(Section::End),
            _ => None,
        };
        if let Some(s) = next {
            section = s;
            continue;
        }
        match section {
            Section::Start | Section::End => {
                return Err(FormatError::new(line, format!("unexpected '{body}'")));
            }
            Section::Objective => {
                let (_, rest) = strip_label(body, line)?;
                objective.extend(parse_terms(rest, line)?);
            }
            Section::Rows => {
                let (_, rest) = strip_label(body, line)?;
                let (lhs, cmp, rhs) = [(">=", Cmp::Ge), ("<=", Cmp::Le), ("=", Cmp::Eq)]
                    .iter()
                    .find_map(|(op, cmp)| {
                        rest.split_once(op).map(|(l, r)| (l.trim(), *cmp, r.trim()))
                    })
                    .ok_or_else(|| FormatError::new(line, "row without comparison"))?;
                rows.push(Row::new(parse_terms(lhs, line)?, cmp, parse_num(rhs, line)?));
            }
            Section::Bounds => {
                let (var, range) = body
                    .split_once(" in ")
                    .ok_or_else(|| FormatError::new(line, "expected 'x<j> in [lo, hi]'"))?;
                let inner = range
                    .trim()
                    .strip_prefix('[')
                    .and_then(|s| s.strip_suffix(']'))
                    .ok_or_else(|| FormatError::new(line, "expected '[lo, hi]'"))?;
                let (lo, hi) = inner
                    .split_once(',')
                    .ok_or_else(|| FormatError::new(line, "expected '[lo, hi]'"))?;
                bounds.push((
                    parse_var(var.trim(), line)?,
                    parse_num(lo.trim(), line)?,
                    parse_num(hi.trim(), line)?,
                ));
            }
            Section::Binaries => {
                for tok in body.split_whitespace() {
                    binaries.push(parse_var(tok, line)?);
                }
            }
            Section::BigM => {
                let (label, rest) = strip_label(body, line)?;
                let toks: Vec<&str> = rest
                    .split(|c: char| c.is_whitespace() || c == '[' || c == ']' || c == ',')
                    .filter(|s| !s.is_empty())
                    .collect();
                match toks.as_slice() {
                    ["row", r, "value", v, "range", lo, hi] => big_m.push(BigM {
                        label: label.to_string(),
                        row: r
                            .parse()
                            .map_err(|_| FormatError::new(line, "bad row index"))?,
                        value: parse_num(v, line)?,
                        range: (parse_num(lo, line)?, parse_num(hi, line)?),
                    }),
                    _ => return Err(FormatError::new(line, "malformed big-M line")),
                }
            }
        }
    }
    if section != Section::End {
        return Err(FormatError::new(text.lines().count(), "missing 'end'"));
    }

    let mut lp = LpProblem::new();
    let max_var = objective
        .iter()
        .map(|t| t.0)
        .chain(rows.iter().flat_map(|r| r.terms.iter().map(|t| t.0)))
        .chain(bounds.iter().map(|b| b.0))
        .chain(binaries.iter().copied())
        .max();
    if let Some(mv) = max_var {
        ensure_vars(&mut lp, mv + 1);
    }
    for (j, c) in objective {
        lp.objective[j] += c;
    }
    for (j, lo, hi) in bounds {
        lp.lower[j] = lo;
        lp.upper[j] = hi;
    }
    lp.rows = rows;
    Ok(MilpProblem {
        lp,
        binaries,
        big_m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_example() {
        let text = "\\ example\nminimize\n  obj: 1 x0 - 2.5 x1\nsubject to\n  r0: 1 x0 + 1 x1 >= 3\n\
                    bounds\n  x0 in [0, 1]\n  x1 in [-inf, inf]\nbinaries\n  x0\nend\n";
        let p = parse(text).unwrap();
        assert_eq!(p.lp.objective, vec![1.0, -2.5]);
        assert_eq!(p.lp.rows[0].cmp, Cmp::Ge);
        assert_eq!(p.lp.upper[1], f64::INFINITY);
        assert_eq!(p.binaries, vec![0]);
    }

    #[test]
    fn reports_line_of_bad_number() {
        let err = parse("minimize\n  obj: 1 x0\nsubject to\n  r0: 1 x0 >= abc\nend\n").unwrap_err();
        assert_eq!(err.line, 4);
    }

    #[test]
    fn missing_end_is_an_error() {
        assert!(parse("minimize\n  obj: 1 x0\n").is_err());
    }
}
