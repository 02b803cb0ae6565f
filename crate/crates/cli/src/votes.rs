//! The two-stage votes file.
//!
//! ```text
//! #votes num_classes=3 selection=1000 estimation=1000000
//! node-17 3 990 7 | 2100 995000 2900
//! ```
//!
//! Blank lines and later `#` lines are ignored.

use std::collections::HashSet;
use std::fmt::Write as _;

use sparsecert::VoteRecord;

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VotesFile {
    pub num_classes: u32,
    pub selection: u64,
    pub estimation: u64,
    pub records: Vec<(VoteRecord, VoteRecord)>,
}

fn bad(line: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::Parse { line, message: msg.to_string() }
}

fn parse_header(line: usize, text: &str) -> Result<(u32, u64, u64), CliError> {
    let mut parts = text.split_whitespace();
    if parts.next() != Some("#votes") {
        return Err(bad(line, "expected header '#votes num_classes=C selection=N0 estimation=N'"));
    }
    let (mut c, mut s, mut e) = (None, None, None);
    for kv in parts {
        let (k, v) = kv.split_once('=').ok_or_else(|| bad(line, format!("malformed header field {kv:?}")))?;
        let n: u64 = v.parse().map_err(|_| bad(line, format!("{k} must be a non-negative integer")))?;
        match k {
            "num_classes" => c = Some(n),
            "selection" => s = Some(n),
            "estimation" => e = Some(n),
            _ => return Err(bad(line, format!("unknown header field {k:?}"))),
        }
    }
    let c = c.ok_or_else(|| bad(line, "header lacks num_classes"))?;
    let c = u32::try_from(c).ok().filter(|&c| c >= 2).ok_or_else(|| bad(line, "num_classes must be at least 2"))?;
    Ok((c, s.ok_or_else(|| bad(line, "header lacks selection"))?, e.ok_or_else(|| bad(line, "header lacks estimation"))?))
}

fn parse_counts(line: usize, fields: &str, classes: u32, total: u64, stage: &str) -> Result<Vec<u64>, CliError> {
    let counts = fields
        .split_whitespace()
        .map(|t| t.parse::<u64>().map_err(|_| bad(line, format!("bad {stage} count {t:?}"))))
        .collect::<Result<Vec<_>, _>>()?;
    if counts.len() != classes as usize {
        return Err(bad(line, format!("{stage} has {} counts, expected {classes}", counts.len())));
    }
    let sum: u64 = counts.iter().sum();
    if sum != total {
        return Err(bad(line, format!("{stage} counts sum to {sum}, header says {total}")));
    }
    Ok(counts)
}

pub fn parse(text: &str) -> Result<VotesFile, CliError> {
    let mut header = None;
    let mut records = Vec::new();
    let mut ids = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let t = raw.trim();
        if t.is_empty() {
            continue;
        }
        let Some((classes, sel, est)) = header else {
            header = Some(parse_header(line, t)?);
            continue;
        };
        if t.starts_with('#') {
            continue;
        }
        let (id, rest) = t.split_once(char::is_whitespace).ok_or_else(|| bad(line, "record has no counts"))?;
        let (left, right) = rest.split_once('|').ok_or_else(|| bad(line, "record needs 'selection | estimation'"))?;
        let s = parse_counts(line, left, classes, sel, "selection")?;
        let e = parse_counts(line, right, classes, est, "estimation")?;
        if !ids.insert(id.to_string()) {
            return Err(bad(line, format!("duplicate id {id:?}")));
        }
        records.push((VoteRecord::new(id, s), VoteRecord::new(id, e)));
    }
    let (num_classes, selection, estimation) = header.ok_or_else(|| bad(1, "empty votes file"))?;
    Ok(VotesFile { num_classes, selection, estimation, records })
}

pub fn render(file: &VotesFile) -> String {
    let mut out = format!("#votes num_classes={} selection={} estimation={}\n", file.num_classes, file.selection, file.estimation);
    let join = |v: &VoteRecord| v.counts().iter().map(u64::to_string).collect::<Vec<_>>().join(" ");
    for (s, e) in &file.records {
        let _ = writeln!(out, "{} {} | {}", s.input_id, join(s), join(e));
    }
    out
}
