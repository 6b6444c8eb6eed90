//! Line-oriented text form of a [`ConicProgram`].
//!
//! ```text
//! # comment
//! var <name> <lb> <ub> continuous|binary
//! lin <name> le|eq|ge <rhs> : <coef> <var> <coef> <var> ...
//! rot <name> : <u> <w> | <y1> <y2> ...        u*w >= sum(y^2)
//! soc <name> : <t> | <y1> <y2> ...            ||y|| <= t
//! obj <constant> : <coef> <var> ...
//! ```
//!
//! Variables must be declared before use. Numbers use Rust's shortest
//! round-trip formatting, so a dump re-parses to an identical program.

use std::fmt::Write as _;

use super::{Cone, ConicError, ConicProgram, Integrality, Relation, VarId};

pub fn write_dump(prog: &ConicProgram) -> String {
    let mut out = String::from("# conic program dump v1\n");
    for v in prog.variables() {
        let kind = match v.kind {
            Integrality::Continuous => "continuous",
            Integrality::Binary => "binary",
        };
        let _ = writeln!(out, "var {} {:?} {:?} {}", v.name, v.lb, v.ub, kind);
    }
    let name = |v: &VarId| prog.variables()[v.0].name.as_str();
    for row in prog.rows() {
        let rel = match row.relation {
            Relation::Le => "le",
            Relation::Eq => "eq",
            Relation::Ge => "ge",
        };
        let _ = write!(out, "lin {} {} {:?} :", row.name, rel, row.rhs);
        for (v, a) in &row.terms {
            let _ = write!(out, " {:?} {}", a, name(v));
        }
        out.push('\n');
    }
    for c in prog.cones() {
        match &c.cone {
            Cone::Rotated { u, w, y } => {
                let _ = write!(out, "rot {} : {} {} |", c.name, name(u), name(w));
                for v in y {
                    let _ = write!(out, " {}", name(v));
                }
            }
            Cone::Standard { t, y } => {
                let _ = write!(out, "soc {} : {} |", c.name, name(t));
                for v in y {
                    let _ = write!(out, " {}", name(v));
                }
            }
        }
        out.push('\n');
    }
    let _ = write!(out, "obj {:?} :", prog.objective_constant());
    for (i, c) in prog.objective().iter().enumerate() {
        if *c != 0.0 {
            let _ = write!(out, " {:?} {}", c, prog.variables()[i].name);
        }
    }
    out.push('\n');
    out
}

pub fn parse_dump(text: &str) -> Result<ConicProgram, ConicError> {
    let mut prog = ConicProgram::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let err = |msg: String| ConicError::Dump { line, msg };
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (head, body) = match trimmed.split_once(':') {
            Some((h, b)) => (h.trim(), Some(b.trim())),
            None => (trimmed, None),
        };
        let head: Vec<&str> = head.split_whitespace().collect();
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| err(format!("bad number `{s}`")))
        };
        let var = |p: &ConicProgram, s: &str| {
            p.var(s)
                .ok_or_else(|| err(format!("undeclared variable `{s}`")))
        };
        let with_line = |e: ConicError| match e {
            ConicError::Dump { .. } => e,
            other => ConicError::Dump {
                line,
                msg: other.to_string(),
            },
        };
        match head.first().copied() {
            Some("var") => {
                if head.len() != 5 || body.is_some() {
                    return Err(err("expected `var <name> <lb> <ub> <kind>`".into()));
                }
                let kind = match head[4] {
                    "continuous" => Integrality::Continuous,
                    "binary" => Integrality::Binary,
                    k => return Err(err(format!("unknown integrality `{k}`"))),
                };
                prog.add_variable(head[1], num(head[2])?, num(head[3])?, kind)
                    .map_err(with_line)?;
            }
            Some("lin") => {
                if head.len() != 4 {
                    return Err(err("expected `lin <name> <rel> <rhs> : terms`".into()));
                }
                let relation = match head[2] {
                    "le" => Relation::Le,
                    "eq" => Relation::Eq,
                    "ge" => Relation::Ge,
                    r => return Err(err(format!("unknown relation `{r}`"))),
                };
                let toks: Vec<&str> = body.unwrap_or("").split_whitespace().collect();
                if toks.len() % 2 != 0 {
                    return Err(err("terms must be `<coef> <var>` pairs".into()));
                }
                let mut terms = Vec::with_capacity(toks.len() / 2);
                for pair in toks.chunks(2) {
                    terms.push((var(&prog, pair[1])?, num(pair[0])?));
                }
                prog.add_linear(head[1], &terms, relation, num(head[3])?)
                    .map_err(with_line)?;
            }
            Some(kw @ ("rot" | "soc")) => {
                if head.len() != 2 {
                    return Err(err(format!("expected `{kw} <name> : ...`")));
                }
                let body = body.ok_or_else(|| err("missing cone body".into()))?;
                let (lhs, rhs) = body
                    .split_once('|')
                    .ok_or_else(|| err("cone body needs `|`".into()))?;
                let lhs: Vec<VarId> = lhs
                    .split_whitespace()
                    .map(|s| var(&prog, s))
                    .collect::<Result<_, _>>()?;
                let y: Vec<VarId> = rhs
                    .split_whitespace()
                    .map(|s| var(&prog, s))
                    .collect::<Result<_, _>>()?;
                let cone = match (kw, lhs.as_slice()) {
                    ("rot", [u, w]) => Cone::Rotated { u: *u, w: *w, y },
                    ("soc", [t]) => Cone::Standard { t: *t, y },
                    _ => return Err(err("wrong number of cone head variables".into())),
                };
                prog.add_cone(head[1].to_string(), cone)
                    .map_err(with_line)?;
            }
            Some("obj") => {
                if head.len() != 2 {
                    return Err(err("expected `obj <constant> : terms`".into()));
                }
                let toks: Vec<&str> = body.unwrap_or("").split_whitespace().collect();
                if toks.len() % 2 != 0 {
                    return Err(err("terms must be `<coef> <var>` pairs".into()));
                }
                let mut terms = Vec::with_capacity(toks.len() / 2);
                for pair in toks.chunks(2) {
                    terms.push((var(&prog, pair[1])?, num(pair[0])?));
                }
                prog.set_objective(&terms, num(head[1])?)
                    .map_err(with_line)?;
            }
            Some(other) => return Err(err(format!("unknown statement `{other}`"))),
            None => unreachable!(),
        }
    }
    prog.rebuild_names();
    Ok(prog)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ConicProgram {
        let mut p = ConicProgram::new();
        let u = p.continuous("u", 0.0, f64::INFINITY).unwrap();
        let w = p.continuous("w", 0.0, 4.0).unwrap();
        let y = p.continuous("y", f64::NEG_INFINITY, f64::INFINITY).unwrap();
        let z = p.binary("z").unwrap();
        p.add_rotated_cone("rc", u, w, &[y]).unwrap();
        p.add_soc("sc", u, &[y, w]).unwrap();
        p.add_linear("r0", &[(y, 1.0), (z, -0.1)], Relation::Ge, 0.3)
            .unwrap();
        p.set_objective(&[(u, 1.0), (w, 1e-7), (z, 2.5)], 0.125)
            .unwrap();
        p
    }

    #[test]
    fn dump_round_trips_exactly() {
        let p = sample();
        let text = write_dump(&p);
        let q = parse_dump(&text).unwrap();
        assert_eq!(p, q);
        assert_eq!(write_dump(&q), text);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_dump("var x 0 1 continuous\nlin r le 1 : 1 y\n").unwrap_err();
        assert!(matches!(err, ConicError::Dump { line: 2, .. }), "{err}");
        let err = parse_dump("var b 0 3 binary\n").unwrap_err();
        assert!(matches!(err, ConicError::Dump { line: 1, .. }), "{err}");
    }
}
