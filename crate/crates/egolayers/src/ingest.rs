//! Delimited-text parsing of order and call logs.
//!
//! Rows that cannot be parsed are recorded with their line number and
//! skipped; only a missing mandatory column aborts parsing.

use std::io::{BufRead, BufReader, Read};

use egolayers_core::{Blocklist, CallEvent, OrderEvent, Side};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("missing column `{0}` in header")]
    MissingColumn(String),
    #[error("unreadable header: {0}")]
    Header(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Column names of an order log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct OrderSchema {
    pub investor: String,
    pub stock: String,
    pub side: String,
    pub timestamp: String,
    pub delimiter: char,
}

impl Default for OrderSchema {
    fn default() -> Self {
        OrderSchema {
            investor: "investor_id".into(),
            stock: "stock_id".into(),
            side: "side".into(),
            timestamp: "timestamp".into(),
            delimiter: ',',
        }
    }
}

/// Column names of a call log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CallSchema {
    pub caller: String,
    pub callee: String,
    pub timestamp: String,
    pub delimiter: char,
}

impl Default for CallSchema {
    fn default() -> Self {
        CallSchema {
            caller: "caller_id".into(),
            callee: "callee_id".into(),
            timestamp: "timestamp".into(),
            delimiter: ',',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    /// 1-based line number, the header being line 1.
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Parsed<E> {
    pub events: Vec<E>,
    pub errors: Vec<RowError>,
    pub self_calls: u64,
    /// Data rows read (excluding the header).
    pub rows: u64,
}

impl<E> Parsed<E> {
    fn new() -> Self {
        Parsed {
            events: Vec::new(),
            errors: Vec::new(),
            self_calls: 0,
            rows: 0,
        }
    }
}

fn reader<R: Read>(input: R, delimiter: char) -> Result<csv::Reader<R>, IngestError> {
    let delim = u8::try_from(delimiter)
        .ok()
        .filter(u8::is_ascii)
        .ok_or_else(|| IngestError::Header(format!("delimiter {delimiter:?} is not a single ASCII byte")))?;
    Ok(csv::ReaderBuilder::new()
        .delimiter(delim)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input))
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize, IngestError> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
}

/// Integer epoch seconds; a fractional part is truncated.
pub fn parse_timestamp(raw: &str) -> Result<u64, String> {
    if let Ok(t) = raw.parse::<u64>() {
        return Ok(t);
    }
    match raw.parse::<f64>() {
        Ok(t) if t.is_finite() && t >= 0.0 && t < u64::MAX as f64 => Ok(t.trunc() as u64),
        Ok(_) => Err(format!("timestamp {raw:?} out of range")),
        Err(_) => Err(format!("unparseable timestamp {raw:?}")),
    }
}

fn field<'a>(record: &'a csv::StringRecord, idx: usize, name: &str) -> Result<&'a str, String> {
    match record.get(idx) {
        Some(v) if !v.is_empty() => Ok(v),
        _ => Err(format!("empty or missing {name}")),
    }
}

fn each_record<R: Read>(
    rdr: &mut csv::Reader<R>,
    mut handle: impl FnMut(&csv::StringRecord) -> Result<(), String>,
    errors: &mut Vec<RowError>,
) -> u64 {
    let mut rows = 0;
    let mut record = csv::StringRecord::new();
    loop {
        let line = rdr.position().line();
        match rdr.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {
                rows += 1;
                let line = record.position().map_or(line, |p| p.line());
                if let Err(message) = handle(&record) {
                    errors.push(RowError { line, message });
                }
            }
            Err(e) => {
                rows += 1;
                let line = e.position().map_or(line, |p| p.line());
                errors.push(RowError {
                    line,
                    message: e.to_string(),
                });
                if !matches!(e.kind(), csv::ErrorKind::Utf8 { .. } | csv::ErrorKind::UnequalLengths { .. }) {
                    break;
                }
            }
        }
    }
    rows
}

pub fn parse_order_log<R: Read>(input: R, schema: &OrderSchema) -> Result<Parsed<OrderEvent>, IngestError> {
    let mut rdr = reader(input, schema.delimiter)?;
    let headers = rdr.headers().map_err(|e| IngestError::Header(e.to_string()))?.clone();
    let (ci, cs, cd, ct) = (
        column(&headers, &schema.investor)?,
        column(&headers, &schema.stock)?,
        column(&headers, &schema.side)?,
        column(&headers, &schema.timestamp)?,
    );
    let mut out = Parsed::new();
    let mut events = Vec::new();
    out.rows = each_record(
        &mut rdr,
        |r| {
            let side_raw = field(r, cd, "side")?;
            let side = Side::from_code(side_raw).ok_or_else(|| format!("invalid side {side_raw:?}"))?;
            events.push(OrderEvent {
                investor_id: field(r, ci, "investor id")?.to_string(),
                stock_id: field(r, cs, "stock id")?.to_string(),
                side,
                timestamp: parse_timestamp(field(r, ct, "timestamp")?)?,
            });
            Ok(())
        },
        &mut out.errors,
    );
    out.events = events;
    Ok(out)
}

pub fn parse_call_log<R: Read>(input: R, schema: &CallSchema) -> Result<Parsed<CallEvent>, IngestError> {
    let mut rdr = reader(input, schema.delimiter)?;
    let headers = rdr.headers().map_err(|e| IngestError::Header(e.to_string()))?.clone();
    let (ca, cb, ct) = (
        column(&headers, &schema.caller)?,
        column(&headers, &schema.callee)?,
        column(&headers, &schema.timestamp)?,
    );
    let mut out = Parsed::new();
    let mut events = Vec::new();
    let mut self_calls = 0;
    out.rows = each_record(
        &mut rdr,
        |r| {
            let caller = field(r, ca, "caller id")?;
            let callee = field(r, cb, "callee id")?;
            let timestamp = parse_timestamp(field(r, ct, "timestamp")?)?;
            if caller == callee {
                self_calls += 1;
            } else {
                events.push(CallEvent {
                    caller_id: caller.to_string(),
                    callee_id: callee.to_string(),
                    timestamp,
                });
            }
            Ok(())
        },
        &mut out.errors,
    );
    out.events = events;
    out.self_calls = self_calls;
    Ok(out)
}

/// One id per line; blank lines are ignored and surrounding whitespace trimmed.
pub fn read_blocklist<R: Read>(input: R) -> Result<Blocklist, IngestError> {
    let mut list = Blocklist::new();
    for line in BufReader::new(input).lines() {
        let line = line?;
        let id = line.trim();
        if !id.is_empty() {
            list.insert(id);
        }
    }
    Ok(list)
}
