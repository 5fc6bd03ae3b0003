use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::kodaira_spencer::{ChartVectorField, Coboundary};
use crate::ratfunc::{is_identifier, parse_expr, RatFunc, VarTable};

use super::{Atlas, AtlasError, Chart, Transition};

/// One logical statement; braces may span several physical lines.
struct Stmt {
    line: usize,
    text: String,
}

fn statements(src: &str) -> Result<Vec<Stmt>, AtlasError> {
    let mut out: Vec<Stmt> = Vec::new();
    let mut open = false;
    for (n, raw) in src.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if open {
            let cur = out.last_mut().expect("open statement");
            cur.text.push(' ');
            cur.text.push_str(line);
        } else {
            out.push(Stmt {
                line: n + 1,
                text: line.to_string(),
            });
        }
        let cur = &out.last().expect("statement").text;
        open = cur.contains('{') && !cur.contains('}');
    }
    if open {
        let line = out.last().map_or(0, |s| s.line);
        return Err(syntax(line, "unterminated `{` block"));
    }
    Ok(out)
}

fn syntax(line: usize, message: impl Into<String>) -> AtlasError {
    AtlasError::Syntax {
        line,
        message: message.into(),
    }
}

fn ident(line: usize, tok: Option<&str>, what: &str) -> Result<String, AtlasError> {
    match tok {
        Some(t) if is_identifier(t) => Ok(t.to_string()),
        Some(t) => Err(syntax(line, format!("expected {what}, found `{t}`"))),
        None => Err(syntax(line, format!("expected {what}"))),
    }
}

struct RawChart {
    line: usize,
    id: String,
    x: String,
    y: String,
    denom: String,
    order: u32,
}

struct RawBlock {
    line: usize,
    head: Vec<String>,
    assigns: Vec<(String, String)>,
}

/// Splits `head { a = e ; b = e }` into its head tokens and assignments.
fn block(stmt: &Stmt) -> Result<RawBlock, AtlasError> {
    let open = stmt.text.find('{').ok_or_else(|| syntax(stmt.line, "expected `{`"))?;
    let close = stmt.text.rfind('}').ok_or_else(|| syntax(stmt.line, "expected `}`"))?;
    if !stmt.text[close + 1..].trim().is_empty() {
        return Err(syntax(stmt.line, "unexpected text after `}`"));
    }
    let head = stmt.text[..open].split_whitespace().map(String::from).collect();
    let mut assigns = Vec::new();
    for part in stmt.text[open + 1..close].split(';') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (lhs, rhs) = part
            .split_once('=')
            .ok_or_else(|| syntax(stmt.line, format!("expected `IDENT = EXPR`, found `{part}`")))?;
        let lhs = ident(stmt.line, Some(lhs.trim()), "identifier before `=`")?;
        assigns.push((lhs, rhs.trim().to_string()));
    }
    Ok(RawBlock {
        line: stmt.line,
        head,
        assigns,
    })
}

/// Parses the line-oriented atlas language:
///
/// ```text
/// atlas NAME
/// params IDENT*
/// timevar IDENT
/// chart ID vars IDENT IDENT denom EXPR order UINT
/// transition ID -> ID { IDENT = EXPR ; IDENT = EXPR }
/// coboundary ID { eta = EXPR ; zeta = EXPR }
/// ```
pub fn parse_atlas(src: &str) -> Result<Atlas, AtlasError> {
    let mut name: Option<String> = None;
    let mut params: Option<Vec<String>> = None;
    let mut timevar: Option<String> = None;
    let mut charts: Vec<RawChart> = Vec::new();
    let mut transitions: Vec<RawBlock> = Vec::new();
    let mut cobounds: Vec<RawBlock> = Vec::new();

    for stmt in statements(src)? {
        let line = stmt.line;
        let mut toks = stmt.text.split_whitespace();
        let kw = toks.next().unwrap_or("");
        match kw {
            "atlas" => {
                let n = toks.next().ok_or_else(|| syntax(line, "expected atlas name"))?;
                if toks.next().is_some() || name.is_some() {
                    return Err(syntax(line, "malformed or repeated `atlas` line"));
                }
                name = Some(n.to_string());
            }
            "params" => {
                if params.is_some() {
                    return Err(syntax(line, "repeated `params` line"));
                }
                let ps = toks
                    .map(|t| ident(line, Some(t), "parameter name"))
                    .collect::<Result<Vec<_>, _>>()?;
                params = Some(ps);
            }
            "timevar" => {
                let t = ident(line, toks.next(), "time variable")?;
                if toks.next().is_some() || timevar.is_some() {
                    return Err(syntax(line, "malformed or repeated `timevar` line"));
                }
                timevar = Some(t);
            }
            "chart" => charts.push(chart_line(line, &stmt.text)?),
            "transition" => transitions.push(block(&stmt)?),
            "coboundary" => cobounds.push(block(&stmt)?),
            other => return Err(syntax(line, format!("unknown statement `{other}`"))),
        }
    }

    let name = name.ok_or_else(|| syntax(1, "missing `atlas` line"))?;
    let timevar = timevar.ok_or_else(|| syntax(1, "missing `timevar` line"))?;
    let params = params.unwrap_or_default();

    let mut names: Vec<String> = Vec::new();
    for c in &charts {
        names.push(c.x.clone());
        names.push(c.y.clone());
    }
    names.push(timevar.clone());
    names.extend(params.iter().cloned());
    let vars = VarTable::new(names.clone()).map_err(|e| AtlasError::Invalid(e.to_string()))?;
    let time = vars.index_of(&timevar).expect("time variable in table");
    let param_idx = params.iter().map(|p| vars.index_of(p).expect("param")).collect();

    let expr = |line: usize, text: &str| -> Result<RatFunc, AtlasError> {
        parse_expr(text, &vars).map_err(|source| AtlasError::Expr { line, source })
    };

    let mut chart_list: Vec<Chart> = Vec::new();
    for c in &charts {
        if chart_list.iter().any(|k| k.id == c.id) {
            return Err(syntax(c.line, format!("duplicate chart `{}`", c.id)));
        }
        let denom = expr(c.line, &c.denom)?
            .as_polynomial()
            .ok_or_else(|| syntax(c.line, "chart denominator must be a polynomial"))?;
        chart_list.push(Chart {
            id: c.id.clone(),
            x: vars.index_of(&c.x).expect("chart var"),
            y: vars.index_of(&c.y).expect("chart var"),
            denom,
            pole_order: c.order,
        });
    }
    let find = |line: usize, id: &str| -> Result<usize, AtlasError> {
        chart_list
            .iter()
            .position(|c| c.id == id)
            .ok_or_else(|| syntax(line, format!("unknown chart `{id}`")))
    };

    let mut tr_list: Vec<Transition> = Vec::new();
    for b in &transitions {
        let (src_id, dst_id) = match b.head.as_slice() {
            [_, s, arrow, t] if arrow == "->" => (s.as_str(), t.as_str()),
            _ => return Err(syntax(b.line, "expected `transition ID -> ID { ... }`")),
        };
        let (s, t) = (find(b.line, src_id)?, find(b.line, dst_id)?);
        if tr_list.iter().any(|tr| tr.source == s && tr.target == t) {
            return Err(syntax(b.line, format!("duplicate transition {src_id} -> {dst_id}")));
        }
        let tx = vars.name(chart_list[t].x).to_string();
        let ty = vars.name(chart_list[t].y).to_string();
        let [x_expr, y_expr] = two_assigns(b, [&tx, &ty], &expr)?;
        tr_list.push(Transition {
            source: s,
            target: t,
            x_expr,
            y_expr,
        });
    }

    let coboundary = if cobounds.is_empty() {
        None
    } else {
        let mut fields = BTreeMap::new();
        for b in &cobounds {
            let id = match b.head.as_slice() {
                [_, id] => id.clone(),
                _ => return Err(syntax(b.line, "expected `coboundary ID { ... }`")),
            };
            find(b.line, &id)?;
            if fields.contains_key(&id) {
                return Err(syntax(b.line, format!("duplicate coboundary for `{id}`")));
            }
            let [eta, zeta] = two_assigns(b, ["eta", "zeta"], &expr)?;
            fields.insert(id.clone(), ChartVectorField::new(id, eta, zeta));
        }
        Some(Coboundary { fields })
    };

    Atlas::new(name, vars, time, param_idx, chart_list, tr_list, coboundary)
}

fn two_assigns(
    b: &RawBlock,
    want: [&str; 2],
    expr: &dyn Fn(usize, &str) -> Result<RatFunc, AtlasError>,
) -> Result<[RatFunc; 2], AtlasError> {
    if b.assigns.len() != 2 {
        return Err(syntax(
            b.line,
            format!("expected assignments to `{}` and `{}`", want[0], want[1]),
        ));
    }
    let mut out: [Option<RatFunc>; 2] = [None, None];
    for (lhs, rhs) in &b.assigns {
        let slot = want
            .iter()
            .position(|w| w == lhs)
            .ok_or_else(|| syntax(b.line, format!("`{lhs}` is not one of `{}`, `{}`", want[0], want[1])))?;
        if out[slot].is_some() {
            return Err(syntax(b.line, format!("`{lhs}` assigned twice")));
        }
        out[slot] = Some(expr(b.line, rhs)?);
    }
    let [a, c] = out;
    Ok([a.expect("assigned"), c.expect("assigned")])
}

fn chart_line(line: usize, text: &str) -> Result<RawChart, AtlasError> {
    let toks: Vec<&str> = text.split_whitespace().collect();
    let bad = || syntax(line, "expected `chart ID vars IDENT IDENT denom EXPR order UINT`");
    if toks.len() < 9 || toks[2] != "vars" || toks[5] != "denom" {
        return Err(bad());
    }
    let order_at = toks.iter().rposition(|t| *t == "order").ok_or_else(bad)?;
    if order_at != toks.len() - 2 || order_at <= 6 {
        return Err(bad());
    }
    let order: u32 = toks[order_at + 1]
        .parse()
        .map_err(|_| syntax(line, format!("pole order `{}` is not an unsigned integer", toks[order_at + 1])))?;
    Ok(RawChart {
        line,
        id: ident(line, Some(toks[1]), "chart id")?,
        x: ident(line, Some(toks[3]), "x variable")?,
        y: ident(line, Some(toks[4]), "y variable")?,
        denom: toks[6..order_at].join(" "),
        order,
    })
}

pub(super) fn write_atlas(a: &Atlas) -> String {
    let vars = a.vars();
    let mut s = String::new();
    let _ = writeln!(s, "atlas {}", a.name);
    let params: Vec<&str> = a.params().iter().map(|&p| vars.name(p)).collect();
    let _ = writeln!(s, "params {}", params.join(" "));
    let _ = writeln!(s, "timevar {}", vars.name(a.time_var()));
    for c in a.charts() {
        let _ = writeln!(
            s,
            "chart {} vars {} {} denom {} order {}",
            c.id,
            vars.name(c.x),
            vars.name(c.y),
            c.denom,
            c.pole_order
        );
    }
    for tr in a.transitions() {
        let (src, dst) = (&a.charts()[tr.source], &a.charts()[tr.target]);
        let _ = writeln!(
            s,
            "transition {} -> {} {{ {} = {} ; {} = {} }}",
            src.id,
            dst.id,
            vars.name(dst.x),
            tr.x_expr,
            vars.name(dst.y),
            tr.y_expr
        );
    }
    if let Some(cb) = a.coboundary() {
        for (id, vf) in &cb.fields {
            let _ = writeln!(s, "coboundary {id} {{ eta = {} ; zeta = {} }}", vf.eta, vf.zeta);
        }
    }
    s
}
