//! Reader and writer for MPS files.
//!
//! Fixed and free format are both accepted: every record is split on
//! whitespace, so names must not contain blanks. Section headers start in
//! the first column. Integrality markers are recorded and then ignored by
//! the solver. `RANGES`, SOS and quadratic sections are rejected.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use log::warn;
use thiserror::Error;

use super::{ObjectiveSense, ProblemData, RawColumn, RawLp, RawRow, RowKind};

/// Bound magnitudes at or above this value are read as infinite.
const MPS_INFINITY: f64 = 1e30;

#[derive(Debug, Error)]
pub enum MpsError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: section {found} is out of order (after {after})")]
    SectionOrder {
        line: usize,
        found: String,
        after: String,
    },
    #[error("line {line}: unsupported feature: {feature}")]
    Unsupported { line: usize, feature: String },
    #[error("line {line}: unknown row {name:?}")]
    UnknownRow { line: usize, name: String },
    #[error("line {line}: unknown column {name:?}")]
    UnknownColumn { line: usize, name: String },
    #[error("line {line}: duplicate row {name:?}")]
    DuplicateRow { line: usize, name: String },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing {0} section")]
    MissingSection(&'static str),
    #[error("no objective (N) row")]
    NoObjective,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Section {
    Name,
    ObjSense,
    Rows,
    Columns,
    Rhs,
    Bounds,
    Endata,
}

impl Section {
    fn label(self) -> &'static str {
        match self {
            Section::Name => "NAME",
            Section::ObjSense => "OBJSENSE",
            Section::Rows => "ROWS",
            Section::Columns => "COLUMNS",
            Section::Rhs => "RHS",
            Section::Bounds => "BOUNDS",
            Section::Endata => "ENDATA",
        }
    }
}

enum RowSlot {
    Objective,
    /// extra N rows are dropped
    Ignored,
    Constraint(usize),
}

struct Parser {
    raw: RawLp,
    row_index: HashMap<String, RowSlot>,
    col_index: HashMap<String, usize>,
    lower_set: Vec<bool>,
    in_integer_block: bool,
    saw_integer: bool,
    saw_objective: bool,
}

/// Reads an MPS file from disk.
pub fn parse_mps_file(path: impl AsRef<Path>) -> Result<RawLp, MpsError> {
    let text = std::fs::read_to_string(path)?;
    parse_mps(&text)
}

/// Parses MPS text into a [`RawLp`].
pub fn parse_mps(text: &str) -> Result<RawLp, MpsError> {
    let mut p = Parser {
        raw: RawLp {
            name: String::new(),
            sense: ObjectiveSense::Minimize,
            objective_name: String::new(),
            objective_constant: 0.0,
            rows: Vec::new(),
            columns: Vec::new(),
            entries: Vec::new(),
        },
        row_index: HashMap::new(),
        col_index: HashMap::new(),
        lower_set: Vec::new(),
        in_integer_block: false,
        saw_integer: false,
        saw_objective: false,
    };
    let mut current: Option<Section> = None;
    let mut seen_rows = false;
    let mut seen_columns = false;

    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let trimmed = line.trim_end();
        if trimmed.trim().is_empty() || trimmed.starts_with('*') {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        let is_header = !trimmed.starts_with(char::is_whitespace);

        if is_header {
            let keyword = tokens[0].to_ascii_uppercase();
            let section = match keyword.as_str() {
                "NAME" => Section::Name,
                "OBJSENSE" | "OBJSENCE" => Section::ObjSense,
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => Section::Endata,
                "RANGES" => {
                    return Err(MpsError::Unsupported {
                        line: lineno,
                        feature: "RANGES section".into(),
                    })
                }
                other => {
                    return Err(MpsError::Unsupported {
                        line: lineno,
                        feature: format!("{other} section"),
                    })
                }
            };
            if let Some(prev) = current {
                if section <= prev {
                    return Err(MpsError::SectionOrder {
                        line: lineno,
                        found: section.label().into(),
                        after: prev.label().into(),
                    });
                }
            }
            if section > Section::Columns && !seen_columns {
                return Err(MpsError::SectionOrder {
                    line: lineno,
                    found: section.label().into(),
                    after: current.map_or("start of file", Section::label).into(),
                });
            }
            if section == Section::Columns && !seen_rows {
                return Err(MpsError::SectionOrder {
                    line: lineno,
                    found: "COLUMNS".into(),
                    after: current.map_or("start of file", Section::label).into(),
                });
            }
            current = Some(section);
            match section {
                Section::Name => p.raw.name = tokens.get(1).map_or(String::new(), |s| s.to_string()),
                Section::ObjSense => {
                    if let Some(s) = tokens.get(1) {
                        p.set_sense(s, lineno)?;
                    }
                }
                Section::Rows => seen_rows = true,
                Section::Columns => seen_columns = true,
                Section::Endata => break,
                _ => {}
            }
            continue;
        }

        match current {
            None | Some(Section::Name) => {
                return Err(MpsError::Syntax {
                    line: lineno,
                    message: "data record outside of a section".into(),
                })
            }
            Some(Section::ObjSense) => p.set_sense(tokens[0], lineno)?,
            Some(Section::Rows) => p.row_record(&tokens, lineno)?,
            Some(Section::Columns) => p.column_record(&tokens, lineno)?,
            Some(Section::Rhs) => p.rhs_record(&tokens, lineno)?,
            Some(Section::Bounds) => p.bound_record(&tokens, lineno)?,
            Some(Section::Endata) => unreachable!(),
        }
    }

    if current != Some(Section::Endata) {
        return Err(MpsError::MissingSection("ENDATA"));
    }
    if !seen_rows {
        return Err(MpsError::MissingSection("ROWS"));
    }
    if !seen_columns {
        return Err(MpsError::MissingSection("COLUMNS"));
    }
    if !p.saw_objective {
        return Err(MpsError::NoObjective);
    }
    if p.saw_integer {
        warn!(
            "instance {:?} has integer columns; integrality is relaxed",
            p.raw.name
        );
    }
    Ok(p.raw)
}

fn number(tok: &str, line: usize) -> Result<f64, MpsError> {
    let v: f64 = tok.parse().map_err(|_| MpsError::Syntax {
        line,
        message: format!("invalid number {tok:?}"),
    })?;
    if v.is_nan() {
        return Err(MpsError::Syntax {
            line,
            message: "NaN value".into(),
        });
    }
    Ok(v)
}

fn bound_value(v: f64) -> f64 {
    if v >= MPS_INFINITY {
        f64::INFINITY
    } else if v <= -MPS_INFINITY {
        f64::NEG_INFINITY
    } else {
        v
    }
}

impl Parser {
    fn set_sense(&mut self, tok: &str, line: usize) -> Result<(), MpsError> {
        self.raw.sense = match tok.to_ascii_uppercase().as_str() {
            "MIN" | "MINIMIZE" | "MINIMISE" => ObjectiveSense::Minimize,
            "MAX" | "MAXIMIZE" | "MAXIMISE" => ObjectiveSense::Maximize,
            other => {
                return Err(MpsError::Syntax {
                    line,
                    message: format!("unknown objective sense {other:?}"),
                })
            }
        };
        Ok(())
    }

    fn row_record(&mut self, tokens: &[&str], line: usize) -> Result<(), MpsError> {
        if tokens.len() != 2 {
            return Err(MpsError::Syntax {
                line,
                message: "ROWS record needs a type and a name".into(),
            });
        }
        let name = tokens[1].to_string();
        if self.row_index.contains_key(&name) {
            return Err(MpsError::DuplicateRow { line, name });
        }
        let kind = match tokens[0].to_ascii_uppercase().as_str() {
            "N" => {
                if self.saw_objective {
                    warn!("line {line}: extra free row {name:?} ignored");
                    self.row_index.insert(name, RowSlot::Ignored);
                } else {
                    self.saw_objective = true;
                    self.raw.objective_name = name.clone();
                    self.row_index.insert(name, RowSlot::Objective);
                }
                return Ok(());
            }
            "E" => RowKind::Equal,
            "G" => RowKind::Greater,
            "L" => RowKind::Less,
            other => {
                return Err(MpsError::Syntax {
                    line,
                    message: format!("unknown row type {other:?}"),
                })
            }
        };
        self.row_index
            .insert(name.clone(), RowSlot::Constraint(self.raw.rows.len()));
        self.raw.rows.push(RawRow { name, kind, rhs: 0.0 });
        Ok(())
    }

    fn column_record(&mut self, tokens: &[&str], line: usize) -> Result<(), MpsError> {
        if tokens.iter().any(|t| t.trim_matches('\'').eq_ignore_ascii_case("MARKER")) {
            if tokens.iter().any(|t| t.trim_matches('\'').eq_ignore_ascii_case("INTORG")) {
                self.in_integer_block = true;
            } else if tokens.iter().any(|t| t.trim_matches('\'').eq_ignore_ascii_case("INTEND")) {
                self.in_integer_block = false;
            } else {
                return Err(MpsError::Syntax {
                    line,
                    message: "unrecognised MARKER record".into(),
                });
            }
            return Ok(());
        }
        if tokens.len() != 3 && tokens.len() != 5 {
            return Err(MpsError::Syntax {
                line,
                message: "COLUMNS record needs a column and one or two (row, value) pairs".into(),
            });
        }
        let name = tokens[0];
        let col = match self.col_index.get(name) {
            Some(&j) => j,
            None => {
                let j = self.raw.columns.len();
                self.col_index.insert(name.to_string(), j);
                self.raw.columns.push(RawColumn {
                    name: name.to_string(),
                    cost: 0.0,
                    lower: 0.0,
                    upper: f64::INFINITY,
                    integer: self.in_integer_block,
                });
                self.lower_set.push(false);
                j
            }
        };
        if self.in_integer_block {
            self.raw.columns[col].integer = true;
            self.saw_integer = true;
        }
        for pair in tokens[1..].chunks(2) {
            let value = number(pair[1], line)?;
            match self.row_index.get(pair[0]) {
                Some(RowSlot::Objective) => self.raw.columns[col].cost += value,
                Some(RowSlot::Ignored) => {}
                Some(RowSlot::Constraint(r)) => self.raw.entries.push((*r, col, value)),
                None => {
                    return Err(MpsError::UnknownRow {
                        line,
                        name: pair[0].to_string(),
                    })
                }
            }
        }
        Ok(())
    }

    fn rhs_record(&mut self, tokens: &[&str], line: usize) -> Result<(), MpsError> {
        // an odd token count means the record starts with the RHS vector name
        let pairs = match tokens.len() {
            2 | 4 => tokens,
            3 | 5 => &tokens[1..],
            _ => {
                return Err(MpsError::Syntax {
                    line,
                    message: "RHS record needs one or two (row, value) pairs".into(),
                })
            }
        };
        for pair in pairs.chunks(2) {
            let value = number(pair[1], line)?;
            match self.row_index.get(pair[0]) {
                Some(RowSlot::Objective) => self.raw.objective_constant = -value,
                Some(RowSlot::Ignored) => {}
                Some(RowSlot::Constraint(r)) => self.raw.rows[*r].rhs = value,
                None => {
                    return Err(MpsError::UnknownRow {
                        line,
                        name: pair[0].to_string(),
                    })
                }
            }
        }
        Ok(())
    }

    fn bound_record(&mut self, tokens: &[&str], line: usize) -> Result<(), MpsError> {
        let kind = tokens[0].to_ascii_uppercase();
        let needs_value = matches!(kind.as_str(), "UP" | "LO" | "FX" | "UI" | "LI");
        let known = needs_value || matches!(kind.as_str(), "FR" | "MI" | "PL" | "BV");
        if !known {
            return Err(MpsError::Unsupported {
                line,
                feature: format!("bound type {kind}"),
            });
        }
        let (col_name, value) = if needs_value {
            match tokens.len() {
                3 => (tokens[1], number(tokens[2], line)?),
                4 => (tokens[2], number(tokens[3], line)?),
                _ => {
                    return Err(MpsError::Syntax {
                        line,
                        message: format!("{kind} bound needs a column and a value"),
                    })
                }
            }
        } else {
            match tokens.len() {
                2 => (tokens[1], 0.0),
                3 => (tokens[2], 0.0),
                4 => (tokens[2], 0.0),
                _ => {
                    return Err(MpsError::Syntax {
                        line,
                        message: format!("malformed {kind} bound"),
                    })
                }
            }
        };
        let j = *self.col_index.get(col_name).ok_or_else(|| MpsError::UnknownColumn {
            line,
            name: col_name.to_string(),
        })?;
        let v = bound_value(value);
        let col = &mut self.raw.columns[j];
        match kind.as_str() {
            "UP" | "UI" => {
                col.upper = v;
                if v < 0.0 && col.lower == 0.0 && !self.lower_set[j] {
                    warn!(
                        "line {line}: negative upper bound on {:?} with default lower bound; lower bound set to -inf",
                        col.name
                    );
                    col.lower = f64::NEG_INFINITY;
                }
            }
            "LO" | "LI" => {
                col.lower = v;
                self.lower_set[j] = true;
            }
            "FX" => {
                col.lower = v;
                col.upper = v;
                self.lower_set[j] = true;
            }
            "FR" => {
                col.lower = f64::NEG_INFINITY;
                col.upper = f64::INFINITY;
                self.lower_set[j] = true;
            }
            "MI" => {
                col.lower = f64::NEG_INFINITY;
                self.lower_set[j] = true;
            }
            "PL" => col.upper = f64::INFINITY,
            "BV" => {
                col.lower = 0.0;
                col.upper = 1.0;
                self.lower_set[j] = true;
            }
            _ => unreachable!(),
        }
        if matches!(kind.as_str(), "UI" | "LI" | "BV") {
            col.integer = true;
            self.saw_integer = true;
        }
        Ok(())
    }
}

/// Emits a problem as free-format MPS.
///
/// Rows are written in `K` order (inequalities as `G` rows, then `E`
/// rows). Values use Rust's shortest round-trip float formatting, so
/// reading the text back reproduces every coefficient exactly.
pub fn write_mps(p: &ProblemData) -> String {
    let mut out = String::new();
    let name = if p.name.is_empty() { "lp" } else { p.name.as_str() };
    let _ = writeln!(out, "NAME {name}");
    let sign = match p.sense {
        ObjectiveSense::Minimize => 1.0,
        ObjectiveSense::Maximize => {
            let _ = writeln!(out, "OBJSENSE\n    MAX");
            -1.0
        }
    };
    let obj = "__obj__";
    let _ = writeln!(out, "ROWS\n N  {obj}");
    for (i, rname) in p.row_names.iter().enumerate() {
        let kind = if i < p.num_ineq() { 'G' } else { 'E' };
        let _ = writeln!(out, " {kind}  {rname}");
    }

    let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); p.num_cols()];
    for (i, j, v) in p.k().triplets() {
        by_col[j].push((i, v));
    }
    let _ = writeln!(out, "COLUMNS");
    for (j, cname) in p.col_names.iter().enumerate() {
        let cost = sign * p.c()[j];
        if cost != 0.0 || by_col[j].is_empty() {
            let _ = writeln!(out, "    {cname}  {obj}  {cost}");
        }
        for &(i, v) in &by_col[j] {
            let _ = writeln!(out, "    {cname}  {}  {v}", p.row_names[i]);
        }
    }

    let _ = writeln!(out, "RHS");
    let constant = sign * p.objective_constant;
    if constant != 0.0 {
        let _ = writeln!(out, "    RHS  {obj}  {}", -constant);
    }
    for (i, &v) in p.q().iter().enumerate() {
        if v != 0.0 {
            let _ = writeln!(out, "    RHS  {}  {v}", p.row_names[i]);
        }
    }

    let _ = writeln!(out, "BOUNDS");
    for (j, cname) in p.col_names.iter().enumerate() {
        let (l, u) = (p.lower()[j], p.upper()[j]);
        if l == f64::NEG_INFINITY && u == f64::INFINITY {
            let _ = writeln!(out, " FR BND  {cname}");
            continue;
        }
        if l == u {
            let _ = writeln!(out, " FX BND  {cname}  {l}");
            continue;
        }
        if l == f64::NEG_INFINITY {
            let _ = writeln!(out, " MI BND  {cname}");
        } else if l != 0.0 {
            let _ = writeln!(out, " LO BND  {cname}  {l}");
        }
        if u.is_finite() {
            let _ = writeln!(out, " UP BND  {cname}  {u}");
        }
    }
    let _ = writeln!(out, "ENDATA");
    out
}
