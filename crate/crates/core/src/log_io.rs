//! Log serialization: JSONL (one record per line) and CSV with a fixed column order.

use crate::error::IoError;
use crate::runner::{Event, LogRecord};
use crate::types::{ForceVector, JointVector, Pose};
use std::io::{BufRead, Write};

pub fn write_jsonl<W: Write>(mut w: W, records: &[LogRecord]) -> Result<(), IoError> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<LogRecord>, IoError> {
    let mut out = Vec::new();
    for (k, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| IoError::Log {
            line: k + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

const POSE: [&str; 4] = ["x", "z", "theta", "psi"];
const FORCE: [&str; 4] = ["fx", "fz", "my", "mz"];

/// CSV header, in column order.
pub fn csv_columns() -> Vec<String> {
    let mut c: Vec<String> = vec!["tick".into(), "t".into()];
    let group = |c: &mut Vec<String>, prefix: &str, names: &[&str]| {
        c.extend(names.iter().map(|n| format!("{prefix}_{n}")));
    };
    group(&mut c, "f_c", &FORCE);
    group(&mut c, "e_f", &FORCE);
    group(&mut c, "dx", &POSE);
    for p in ["x_r", "x_a", "x_c", "x_true"] {
        group(&mut c, p, &POSE);
    }
    for p in ["q_a", "q_d", "q_c"] {
        group(&mut c, p, &["1", "2", "3", "4"]);
    }
    c.extend(
        ["min_omega_a", "pair_a", "min_omega_c", "pair_c", "min_omega_true"]
            .iter()
            .map(|s| s.to_string()),
    );
    group(&mut c, "dt", &["1", "2", "3", "4"]);
    c.push("ext_pin".into());
    group(&mut c, "u", &["1", "2", "3", "4"]);
    c.push("breached".into());
    c.push("events".into());
    c
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn pair(p: [usize; 2]) -> String {
    format!("{}-{}", p[0], p[1])
}

fn csv_row(r: &LogRecord) -> Vec<String> {
    let mut row = vec![r.tick.to_string(), num(r.t)];
    row.extend(r.f_c.to_array().map(num));
    row.extend(r.e_f.to_array().map(num));
    row.extend(r.dx.map(num));
    for p in [&r.x_r, &r.x_a, &r.x_c, &r.x_true] {
        row.extend(p.to_array().map(num));
    }
    for q in [&r.q_a, &r.q_d, &r.q_c] {
        row.extend(q.0.map(num));
    }
    row.push(num(r.min_omega_a));
    row.push(pair(r.pair_a));
    row.push(num(r.min_omega_c));
    row.push(pair(r.pair_c));
    row.push(num(r.min_omega_true));
    row.extend(r.dt.map(|d| d.to_string()));
    row.push(r.ext_pin.to_string());
    row.extend(r.u.map(num));
    row.push(u8::from(r.breached).to_string());
    row.push(r.events.iter().map(|e| e.as_str()).collect::<Vec<_>>().join(";"));
    row
}

pub fn write_csv<W: Write>(w: W, records: &[LogRecord]) -> Result<(), IoError> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(csv_columns())?;
    for r in records {
        wr.write_record(csv_row(r))?;
    }
    wr.flush()?;
    Ok(())
}

fn bad(line: usize, message: impl Into<String>) -> IoError {
    IoError::Log {
        line,
        message: message.into(),
    }
}

struct Cursor<'a> {
    cols: Vec<&'a str>,
    at: usize,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn str(&mut self) -> Result<&'a str, IoError> {
        let v = self.cols.get(self.at).copied().ok_or_else(|| bad(self.line, "missing column"))?;
        self.at += 1;
        Ok(v)
    }

    fn parse<T: std::str::FromStr>(&mut self) -> Result<T, IoError> {
        let line = self.line;
        let s = self.str()?;
        s.parse().map_err(|_| bad(line, format!("cannot parse {s:?}")))
    }

    fn four(&mut self) -> Result<[f64; 4], IoError> {
        Ok([self.parse()?, self.parse()?, self.parse()?, self.parse()?])
    }

    fn pose(&mut self) -> Result<Pose, IoError> {
        let a = self.four()?;
        Ok(Pose::new(a[0], a[1], a[2], a[3]))
    }

    fn pair(&mut self) -> Result<[usize; 2], IoError> {
        let line = self.line;
        let s = self.str()?;
        let err = || bad(line, format!("bad pair {s:?}"));
        let (a, b) = s.split_once('-').ok_or_else(err)?;
        Ok([a.parse().map_err(|_| err())?, b.parse().map_err(|_| err())?])
    }
}

/// Reads a CSV log written by [`write_csv`].
pub fn read_csv<R: std::io::Read>(r: R) -> Result<Vec<LogRecord>, IoError> {
    let mut rd = csv::Reader::from_reader(r);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header != csv_columns() {
        return Err(bad(1, "unexpected CSV header"));
    }
    let mut out = Vec::new();
    for (k, row) in rd.records().enumerate() {
        let row = row?;
        let line = k + 2;
        let mut c = Cursor {
            cols: row.iter().collect(),
            at: 0,
            line,
        };
        let tick = c.parse()?;
        let t = c.parse()?;
        let f_c = ForceVector::from_array(c.four()?);
        let e_f = ForceVector::from_array(c.four()?);
        let dx = c.four()?;
        let x_r = c.pose()?;
        let x_a = c.pose()?;
        let x_c = c.pose()?;
        let x_true = c.pose()?;
        let q_a = JointVector(c.four()?);
        let q_d = JointVector(c.four()?);
        let q_c = JointVector(c.four()?);
        let min_omega_a = c.parse()?;
        let pair_a = c.pair()?;
        let min_omega_c = c.parse()?;
        let pair_c = c.pair()?;
        let min_omega_true = c.parse()?;
        let dt = [c.parse()?, c.parse()?, c.parse()?, c.parse()?];
        let ext_pin = c.parse()?;
        let u = c.four()?;
        let breached = c.str()? == "1";
        let events_col = c.str()?;
        let events = if events_col.is_empty() {
            Vec::new()
        } else {
            events_col
                .split(';')
                .map(|s| Event::parse(s).ok_or_else(|| bad(line, format!("unknown event {s:?}"))))
                .collect::<Result<Vec<_>, _>>()?
        };
        out.push(LogRecord {
            tick,
            t,
            f_c,
            e_f,
            dx,
            x_r,
            x_a,
            x_c,
            x_true,
            q_a,
            q_d,
            q_c,
            min_omega_a,
            pair_a,
            min_omega_c,
            pair_c,
            min_omega_true,
            dt,
            ext_pin,
            u,
            breached,
            events,
        });
    }
    Ok(out)
}
