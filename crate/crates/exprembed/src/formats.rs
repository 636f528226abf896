//! Text formats. Expressions are written as space-separated prefix tokens.
//! Blank lines and lines starting with `#` are ignored unless stated.
//!
//! * pairs: `input<TAB>output` per line.
//! * expression list: one expression per line.
//! * class file: an optional `SPLIT <name>` line, then classes, each a
//!   `CLASS <id>` line followed by one member per line and ended by a blank
//!   line or the next `CLASS`.
//! * index: a `dim=<d>` header, an optional `# split=<name>` line, then
//!   `id<TAB>class<TAB>expression<TAB>v1,v2,...` per entry, with an empty
//!   class field for unlabeled entries.
//! * analogy queries: `x1<TAB>y1<TAB>y2[<TAB>x2]` per line, asking for
//!   `x1 - y1 + y2`, with `x2` the expected answer.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use exprembed_core::dataset::{ClassSplit, EqClassDataset, PairDataset};
use exprembed_core::embed::{EmbeddingIndex, IndexEntry};
use exprembed_core::expr::{validate, Expr, ValidateOptions};

use crate::error::{Error, Result};
use crate::io::{read_to_string, write_atomic};

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r'))).filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('#')
    })
}

/// Parses and re-validates one stored expression.
pub fn parse_expr(path: &Path, line: usize, text: &str) -> Result<Expr> {
    let e: Expr = text.trim().parse().map_err(|err| Error::parse(path, line, err))?;
    if let Err(violations) = validate(&e, &ValidateOptions::training()) {
        let msg: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(Error::parse(path, line, msg.join("; ")));
    }
    Ok(e)
}

pub fn parse_pairs(path: &Path, text: &str) -> Result<PairDataset> {
    let mut examples = Vec::new();
    for (n, line) in content_lines(text) {
        let (a, b) = line.split_once('\t').ok_or_else(|| Error::parse(path, n, "expected `input<TAB>output`"))?;
        examples.push((parse_expr(path, n, a)?, parse_expr(path, n, b)?));
    }
    Ok(PairDataset::new(examples))
}

pub fn read_pairs(path: &Path) -> Result<PairDataset> {
    parse_pairs(path, &read_to_string(path)?)
}

pub fn format_pairs(data: &PairDataset) -> String {
    let mut s = String::new();
    for (a, b) in &data.examples {
        let _ = writeln!(s, "{a}\t{b}");
    }
    s
}

pub fn write_pairs(path: &Path, data: &PairDataset) -> Result<()> {
    write_atomic(path, format_pairs(data).as_bytes())
}

pub fn parse_exprs(path: &Path, text: &str) -> Result<Vec<Expr>> {
    content_lines(text).map(|(n, l)| parse_expr(path, n, l)).collect()
}

pub fn read_exprs(path: &Path) -> Result<Vec<Expr>> {
    parse_exprs(path, &read_to_string(path)?)
}

pub fn format_exprs(exprs: &[Expr]) -> String {
    exprs.iter().map(|e| format!("{e}\n")).collect()
}

pub fn write_exprs(path: &Path, exprs: &[Expr]) -> Result<()> {
    write_atomic(path, format_exprs(exprs).as_bytes())
}

pub fn parse_classes(path: &Path, text: &str) -> Result<EqClassDataset> {
    let mut classes: BTreeMap<String, Vec<Expr>> = BTreeMap::new();
    let mut split = None;
    let mut current: Option<(usize, String)> = None;
    let close = |current: &mut Option<(usize, String)>, classes: &BTreeMap<String, Vec<Expr>>| {
        if let Some((n, id)) = current.take() {
            if classes.get(&id).is_none_or(|m| m.is_empty()) {
                return Err(Error::parse(path, n, format!("class `{id}` has no members")));
            }
        }
        Ok(())
    };
    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let line = raw.trim();
        if line.starts_with('#') {
            continue;
        }
        if line.is_empty() {
            close(&mut current, &classes)?;
            continue;
        }
        if let Some(name) = line.strip_prefix("SPLIT ") {
            if split.is_some() || !classes.is_empty() || current.is_some() {
                return Err(Error::parse(path, n, "SPLIT must come once, before the first class"));
            }
            split = Some(name.trim().parse::<ClassSplit>().map_err(|e| Error::parse(path, n, e))?);
        } else if let Some(id) = line.strip_prefix("CLASS ") {
            close(&mut current, &classes)?;
            let id = id.trim().to_string();
            if classes.contains_key(&id) {
                return Err(Error::parse(path, n, format!("duplicate class `{id}`")));
            }
            classes.insert(id.clone(), Vec::new());
            current = Some((n, id));
        } else {
            let (_, id) =
                current.as_ref().ok_or_else(|| Error::parse(path, n, "expression outside a CLASS section"))?;
            let e = parse_expr(path, n, line)?;
            classes.get_mut(id).expect("open class").push(e);
        }
    }
    close(&mut current, &classes)?;
    Ok(EqClassDataset { classes, split: split.unwrap_or_default() })
}

pub fn read_classes(path: &Path) -> Result<EqClassDataset> {
    parse_classes(path, &read_to_string(path)?)
}

pub fn format_classes(data: &EqClassDataset) -> String {
    let mut s = format!("SPLIT {}\n", data.split);
    for (id, members) in &data.classes {
        let _ = writeln!(s, "\nCLASS {id}");
        for m in members {
            let _ = writeln!(s, "{m}");
        }
    }
    s
}

pub fn write_classes(path: &Path, data: &EqClassDataset) -> Result<()> {
    write_atomic(path, format_classes(data).as_bytes())
}

pub type Analogy = ([Expr; 3], Option<Expr>);

pub fn parse_analogies(path: &Path, text: &str) -> Result<Vec<Analogy>> {
    let mut out = Vec::new();
    for (n, line) in content_lines(text) {
        let fields: Vec<Expr> = line.split('\t').map(|f| parse_expr(path, n, f)).collect::<Result<_>>()?;
        let mut fields = fields.into_iter();
        match (fields.next(), fields.next(), fields.next(), fields.next(), fields.next()) {
            (Some(x1), Some(y1), Some(y2), x2, None) => out.push(([x1, y1, y2], x2)),
            _ => return Err(Error::parse(path, n, "expected `x1<TAB>y1<TAB>y2[<TAB>x2]`")),
        }
    }
    Ok(out)
}

pub fn format_index(index: &EmbeddingIndex, split: Option<ClassSplit>) -> String {
    let mut s = format!("dim={}\n", index.dim());
    if let Some(split) = split {
        let _ = writeln!(s, "# split={split}");
    }
    for e in index.entries() {
        let v: Vec<String> = e.vector.iter().map(|x| x.to_string()).collect();
        let _ = writeln!(s, "{}\t{}\t{}\t{}", e.id, e.class.as_deref().unwrap_or(""), e.expr, v.join(","));
    }
    s
}

pub fn write_index(path: &Path, index: &EmbeddingIndex, split: Option<ClassSplit>) -> Result<()> {
    write_atomic(path, format_index(index, split).as_bytes())
}

pub fn parse_index(path: &Path, text: &str) -> Result<(EmbeddingIndex, Option<ClassSplit>)> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    let (_, header) = lines.next().ok_or_else(|| Error::parse(path, 1, "empty index file"))?;
    let dim: usize = header
        .strip_prefix("dim=")
        .and_then(|d| d.trim().parse().ok())
        .ok_or_else(|| Error::parse(path, 1, "expected `dim=<d>` header"))?;
    let mut split = None;
    let mut entries = Vec::new();
    for (n, line) in lines {
        if let Some(name) = line.strip_prefix("# split=") {
            split = Some(name.trim().parse::<ClassSplit>().map_err(|e| Error::parse(path, n, e))?);
            continue;
        }
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [id, class, expr, vector] = fields[..] else {
            return Err(Error::parse(path, n, "expected `id<TAB>class<TAB>expression<TAB>vector`"));
        };
        let id = id.parse().map_err(|_| Error::parse(path, n, format!("bad id `{id}`")))?;
        let vector = vector
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| Error::parse(path, n, e))?;
        if vector.len() != dim {
            return Err(Error::parse(path, n, format!("vector has {} entries, header says {dim}", vector.len())));
        }
        entries.push(IndexEntry {
            id,
            class: (!class.is_empty()).then(|| class.to_string()),
            expr: parse_expr(path, n, expr)?,
            vector,
        });
    }
    let index = EmbeddingIndex::new(entries).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    Ok((index, split))
}

pub fn read_index(path: &Path) -> Result<(EmbeddingIndex, Option<ClassSplit>)> {
    parse_index(path, &read_to_string(path)?)
}
