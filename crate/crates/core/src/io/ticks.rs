use super::{create, from_csv, open, IoError};
use crate::model::Side;
use crate::tick::{EventKind, Price, TickError, TickRecord, TickSeries, TraderClass};
use std::io::{Read, Write};
use std::path::Path;

pub const TICK_HEADER: [&str; 9] = ["ts_ns", "symbol", "event", "side", "price", "size", "trader_class", "bid", "ask"];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

pub fn write_ticks_to<W: Write>(series: &TickSeries, out: W) -> Result<(), IoError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(TICK_HEADER).map_err(from_csv)?;
    for r in series.records() {
        let event = match r.event {
            EventKind::Trade => "T",
            EventKind::Quote => "Q",
        };
        let side = r.side.map(|s| match s {
            Side::Buy => "B",
            Side::Sell => "S",
        });
        w.write_record([
            r.ts_ns.to_string(),
            r.symbol.clone(),
            event.to_string(),
            opt(side),
            opt(r.price),
            opt(r.size),
            opt(r.trader_class.map(TraderClass::code)),
            opt(r.bid),
            opt(r.ask),
        ])
        .map_err(from_csv)?;
    }
    w.flush().map_err(IoError::stream)
}

pub fn write_ticks(series: &TickSeries, path: &Path) -> Result<(), IoError> {
    write_ticks_to(series, create(path)?).map_err(|e| e.with_path(path))
}

fn field<T>(
    raw: &str,
    name: &str,
    line: u64,
    parse: impl FnOnce(&str) -> Option<T>,
) -> Result<Option<T>, IoError> {
    if raw.is_empty() {
        return Ok(None);
    }
    parse(raw)
        .map(Some)
        .ok_or_else(|| IoError::schema(line, format!("invalid {name} {raw:?}")))
}

fn parse_record(rec: &csv::StringRecord, line: u64) -> Result<TickRecord, IoError> {
    let ts_ns = rec[0]
        .parse::<i64>()
        .map_err(|_| IoError::schema(line, format!("invalid ts_ns {:?}", &rec[0])))?;
    if rec[1].is_empty() {
        return Err(IoError::schema(line, "empty symbol"));
    }
    let event = match &rec[2] {
        "T" => EventKind::Trade,
        "Q" => EventKind::Quote,
        other => return Err(IoError::schema(line, format!("invalid event {other:?} (expected T or Q)"))),
    };
    let side = field(&rec[3], "side", line, |s| match s {
        "B" => Some(Side::Buy),
        "S" => Some(Side::Sell),
        _ => None,
    })?;
    let price = |i: usize, name| field(&rec[i], name, line, |s| s.parse::<Price>().ok());
    // only canonical integers survive a write/read cycle unchanged
    let size = field(&rec[5], "size", line, |s| {
        s.parse::<u64>().ok().filter(|v| v.to_string() == s)
    })?;
    Ok(TickRecord {
        ts_ns,
        symbol: rec[1].to_string(),
        event,
        side,
        price: price(4, "price")?,
        size,
        trader_class: field(&rec[6], "trader_class", line, TraderClass::from_code)?,
        bid: price(7, "bid")?,
        ask: price(8, "ask")?,
    })
}

pub fn read_ticks_from<R: Read>(input: R) -> Result<TickSeries, IoError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
    let mut rows = rdr.records();
    let header = rows
        .next()
        .ok_or_else(|| IoError::schema(1, "missing header"))?
        .map_err(from_csv)?;
    if header.iter().ne(TICK_HEADER) {
        return Err(IoError::schema(1, format!("header must be `{}`", TICK_HEADER.join(","))));
    }
    let mut records = Vec::new();
    let mut lines = Vec::new();
    for row in rows {
        let row = row.map_err(from_csv)?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != TICK_HEADER.len() {
            return Err(IoError::schema(line, format!("expected {} fields, found {}", TICK_HEADER.len(), row.len())));
        }
        records.push(parse_record(&row, line)?);
        lines.push(line);
    }
    TickSeries::new(records).map_err(|e| match e {
        TickError::InvalidRecord { index, message } => IoError::schema(lines[index], message),
        e @ TickError::OutOfOrder { index, .. } => IoError::schema(lines[index], e.to_string()),
    })
}

pub fn read_ticks(path: &Path) -> Result<TickSeries, IoError> {
    read_ticks_from(open(path)?).map_err(|e| e.with_path(path))
}
