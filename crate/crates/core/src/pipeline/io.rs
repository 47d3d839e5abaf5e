//! Comma-separated text files for datasets, error reports and curves.
//! Numbers use the shortest round-trip representation.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{ErrorReport, PointError, Provenance, SeriesKey, SnapshotDataset, SnapshotProtocol};
use crate::error::{Error, Result};

pub const DATASET_FORMAT_VERSION: u32 = 1;
pub const REPORT_FORMAT_VERSION: u32 = 1;

/// ```text
/// # hemo-dataset 1
/// # network desk 3f2a…
/// # protocol {"warmup_end":20.0,…}
/// # solver_revision 1
/// # q 400
/// # inputs 5
/// # series distal/pressure mmHg
/// degree,series,v0,v1,…
/// 1e-6,distal/pressure,81.2,…
/// ```
pub fn write_dataset(d: &SnapshotDataset) -> String {
    let mut s = String::new();
    let p = &d.provenance;
    let _ = writeln!(s, "# hemo-dataset {DATASET_FORMAT_VERSION}");
    let _ = writeln!(s, "# network {} {}", p.network, p.network_hash);
    let _ = writeln!(s, "# protocol {}", serde_json::to_string(&p.protocol).expect("protocol serialises"));
    let _ = writeln!(s, "# solver_revision {}", p.solver_revision);
    let _ = writeln!(s, "# q {}", d.q);
    let _ = writeln!(s, "# inputs {}", d.inputs.len());
    for k in d.series.keys() {
        let _ = writeln!(s, "# series {} {}", k.label(), k.quantity.unit());
    }
    s.push_str("degree,series");
    for j in 0..d.q {
        let _ = write!(s, ",v{j}");
    }
    s.push('\n');
    for (i, x) in d.inputs.iter().enumerate() {
        for (k, m) in &d.series {
            let _ = write!(s, "{x:?},{}", k.label());
            for v in &m[i * d.q..(i + 1) * d.q] {
                let _ = write!(s, ",{v:?}");
            }
            s.push('\n');
        }
    }
    s
}

pub fn read_dataset(text: &str, name: &str) -> Result<SnapshotDataset> {
    let err = |line: usize, msg: String| Error::format(name, format!("line {line}: {msg}"));
    let mut header: BTreeMap<&str, &str> = BTreeMap::new();
    let mut keys = Vec::new();
    let mut body = Vec::new();
    let mut saw_columns = false;
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        if let Some(h) = line.strip_prefix("# ") {
            let (k, v) = h.split_once(' ').unwrap_or((h, ""));
            if k == "series" {
                let label = v.split_whitespace().next().unwrap_or("");
                keys.push(SeriesKey::parse(label).ok_or_else(|| err(n, format!("bad series '{label}'")))?);
            } else {
                header.insert(k, v);
            }
        } else if line.starts_with("degree,") {
            saw_columns = true;
        } else if !line.trim().is_empty() {
            body.push((n, line));
        }
    }
    match header.get("hemo-dataset") {
        Some(v) if *v == DATASET_FORMAT_VERSION.to_string() => {}
        Some(v) => {
            return Err(err(1, format!("dataset format version {v} is not supported (expected {DATASET_FORMAT_VERSION})")))
        }
        None => return Err(err(1, "not a dataset file".into())),
    }
    if !saw_columns {
        return Err(Error::format(name, "missing column header"));
    }
    let get = |k: &str| header.get(k).copied().ok_or_else(|| Error::format(name, format!("missing header '{k}'")));
    let (network, network_hash) = get("network")?
        .split_once(' ')
        .ok_or_else(|| Error::format(name, "network header needs a name and a hash"))?;
    let protocol: SnapshotProtocol =
        serde_json::from_str(get("protocol")?).map_err(|e| Error::format(name, format!("protocol: {e}")))?;
    let parse_usize = |k: &str| -> Result<usize> {
        get(k)?.parse().map_err(|_| Error::format(name, format!("bad '{k}' header")))
    };
    let solver_revision = parse_usize("solver_revision")? as u32;
    let q = parse_usize("q")?;
    let count = parse_usize("inputs")?;
    if body.len() != count * keys.len() {
        return Err(Error::format(
            name,
            format!("expected {} rows for {count} inputs × {} series, found {}", count * keys.len(), keys.len(), body.len()),
        ));
    }
    let mut inputs = Vec::with_capacity(count);
    let mut series: BTreeMap<SeriesKey, Vec<f64>> = keys.iter().map(|k| (k.clone(), Vec::with_capacity(count * q))).collect();
    for (r, (n, line)) in body.iter().enumerate() {
        let mut fields = line.split(',');
        let x: f64 = fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| err(*n, "bad degree".into()))?;
        let label = fields.next().unwrap_or("");
        let expect = &keys[r % keys.len()];
        if label != expect.label() {
            return Err(err(*n, format!("expected series {}, found '{label}'", expect.label())));
        }
        if r % keys.len() == 0 {
            inputs.push(x);
        } else if inputs.last().map(|l| l.to_bits()) != Some(x.to_bits()) {
            return Err(err(*n, "rows of one input must share its degree".into()));
        }
        let row = series.get_mut(expect).unwrap();
        let before = row.len();
        for f in fields {
            row.push(f.parse().map_err(|_| err(*n, format!("bad number '{f}'")))?);
        }
        if row.len() - before != q {
            return Err(err(*n, format!("expected {q} values, found {}", row.len() - before)));
        }
    }
    if inputs.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::format(name, "degrees must be sorted and pairwise distinct"));
    }
    Ok(SnapshotDataset {
        provenance: Provenance {
            network: network.to_string(),
            network_hash: network_hash.to_string(),
            protocol,
            solver_revision,
        },
        inputs,
        q,
        series,
    })
}

pub fn write_error_report(r: &ErrorReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# hemo-error-report {REPORT_FORMAT_VERSION}");
    let _ = writeln!(s, "# series {}", r.series);
    let _ = writeln!(s, "# centers {}", r.centers);
    let _ = writeln!(s, "# max_absolute {:?}", r.max_absolute);
    let _ = writeln!(s, "# max_relative {:?}", r.max_relative);
    s.push_str("degree,absolute,relative\n");
    for p in &r.points {
        let _ = writeln!(s, "{:?},{:?},{:?}", p.degree, p.absolute, p.relative);
    }
    s
}

pub fn read_error_report(text: &str, name: &str) -> Result<ErrorReport> {
    let mut header: BTreeMap<&str, &str> = BTreeMap::new();
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if let Some(h) = line.strip_prefix("# ") {
            let (k, v) = h.split_once(' ').unwrap_or((h, ""));
            header.insert(k, v);
        } else if line.starts_with("degree,") || line.trim().is_empty() {
            continue;
        } else {
            let v: Vec<f64> = line
                .split(',')
                .map(|f| f.parse())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::format(name, format!("line {}: bad number", i + 1)))?;
            if v.len() != 3 {
                return Err(Error::format(name, format!("line {}: expected 3 columns", i + 1)));
            }
            points.push(PointError {
                degree: v[0],
                absolute: v[1],
                relative: v[2],
            });
        }
    }
    if header.get("hemo-error-report") != Some(&REPORT_FORMAT_VERSION.to_string().as_str()) {
        return Err(Error::format(name, "not a supported error report"));
    }
    let get = |k: &str| header.get(k).copied().ok_or_else(|| Error::format(name, format!("missing header '{k}'")));
    let num = |k: &str| -> Result<f64> { get(k)?.parse().map_err(|_| Error::format(name, format!("bad '{k}'"))) };
    Ok(ErrorReport {
        series: get("series")?.to_string(),
        centers: num("centers")? as usize,
        points,
        max_absolute: num("max_absolute")?,
        max_relative: num("max_relative")?,
    })
}

/// Two-column curve for plotting: time in s and the value in `unit`.
pub fn write_curve(times: &[f64], values: &[f64], quantity: &str, unit: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "time_s,{quantity}_{}", unit.replace('/', "_per_"));
    for (t, v) in times.iter().zip(values) {
        let _ = writeln!(s, "{t:?},{v:?}");
    }
    s
}
