//! Plain-text model files.
//!
//! ```text
//! hemo-surrogate 1
//! kernel gaussian
//! smoothness 0
//! shape 3.1
//! regularization 1e-12
//! dim 1
//! outputs 400
//! centers 17
//! meta label distal/pressure
//! c 0.25 : 1.5 -0.25 ...
//! ```
//! Numbers are written with the shortest representation that parses back to
//! the same f64, so a round trip is bit-exact.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{InterpolantModel, KernelConfig, KernelFamily};
use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "hemo-surrogate";

/// Serialises a model plus free-form metadata (keys without whitespace).
pub fn write_model(model: &InterpolantModel, meta: &BTreeMap<String, String>) -> String {
    let mut s = String::new();
    let (family, smoothness) = match model.kernel.family {
        KernelFamily::Gaussian => ("gaussian", 0),
        KernelFamily::Wendland { smoothness } => ("wendland", smoothness),
    };
    let _ = writeln!(s, "{MAGIC} {MODEL_FORMAT_VERSION}");
    let _ = writeln!(s, "kernel {family}");
    let _ = writeln!(s, "smoothness {smoothness}");
    let _ = writeln!(s, "shape {:?}", model.kernel.shape);
    let _ = writeln!(s, "regularization {:?}", model.kernel.regularization);
    let _ = writeln!(s, "dim {}", model.dim);
    let _ = writeln!(s, "outputs {}", model.outputs);
    let _ = writeln!(s, "centers {}", model.center_count());
    for (k, v) in meta {
        let _ = writeln!(s, "meta {} {}", k, v.replace('\n', " "));
    }
    let q = model.outputs;
    for j in 0..model.center_count() {
        s.push('c');
        for x in model.center(j) {
            let _ = write!(s, " {x:?}");
        }
        s.push_str(" :");
        for a in &model.coefficients[j * q..(j + 1) * q] {
            let _ = write!(s, " {a:?}");
        }
        s.push('\n');
    }
    s
}

/// Parses a model file. `name` is used in error messages.
pub fn read_model(text: &str, name: &str) -> Result<(InterpolantModel, BTreeMap<String, String>)> {
    let err = |line: usize, msg: String| Error::format(name, format!("line {line}: {msg}"));
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, first) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let version = first
        .strip_prefix(MAGIC)
        .map(str::trim)
        .ok_or_else(|| err(1, format!("not a model file (expected '{MAGIC} <version>')")))?;
    if version != MODEL_FORMAT_VERSION.to_string() {
        return Err(err(
            1,
            format!("model format version {version} is not supported (expected {MODEL_FORMAT_VERSION})"),
        ));
    }

    let mut header: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
    let mut meta = BTreeMap::new();
    let mut rows: Vec<(usize, &str)> = Vec::new();
    for (n, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
        match key {
            "c" => rows.push((n, rest)),
            "meta" => {
                let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
                meta.insert(k.to_string(), v.to_string());
            }
            _ => {
                if header.insert(key, (n, rest.trim())).is_some() {
                    return Err(err(n, format!("duplicate key '{key}'")));
                }
            }
        }
    }
    let get = |key: &str| header.get(key).copied().ok_or_else(|| Error::format(name, format!("missing key '{key}'")));
    fn num<T: std::str::FromStr>(v: (usize, &str), what: &str, name: &str) -> Result<T> {
        v.1.parse()
            .map_err(|_| Error::format(name, format!("line {}: bad {what} '{}'", v.0, v.1)))
    }
    let family = match get("kernel")? {
        (_, "gaussian") => KernelFamily::Gaussian,
        (_, "wendland") => KernelFamily::Wendland {
            smoothness: num(get("smoothness")?, "smoothness", name)?,
        },
        (n, other) => return Err(err(n, format!("unknown kernel family '{other}'"))),
    };
    let kernel = KernelConfig {
        family,
        shape: num(get("shape")?, "shape", name)?,
        regularization: num(get("regularization")?, "regularization", name)?,
    };
    kernel.validate().map_err(|e| Error::format(name, e.to_string()))?;
    let dim: usize = num(get("dim")?, "dim", name)?;
    let outputs: usize = num(get("outputs")?, "outputs", name)?;
    let count: usize = num(get("centers")?, "centers", name)?;
    if rows.len() != count {
        return Err(Error::format(name, format!("header declares {count} centres, found {}", rows.len())));
    }
    let mut centers = Vec::with_capacity(count * dim);
    let mut coefficients = Vec::with_capacity(count * outputs);
    for (n, row) in rows {
        let (x, a) = row.split_once(':').ok_or_else(|| err(n, "missing ':' in centre row".into()))?;
        let parse_all = |part: &str, into: &mut Vec<f64>, expect: usize, what: &str| -> Result<()> {
            let before = into.len();
            for tok in part.split_whitespace() {
                into.push(tok.parse().map_err(|_| err(n, format!("bad number '{tok}'")))?);
            }
            if into.len() - before != expect {
                return Err(err(n, format!("expected {expect} {what}, found {}", into.len() - before)));
            }
            Ok(())
        };
        parse_all(x, &mut centers, dim, "coordinates")?;
        parse_all(a, &mut coefficients, outputs, "coefficients")?;
    }
    let model = InterpolantModel {
        kernel,
        dim,
        centers,
        coefficients,
        outputs,
    };
    Ok((model, meta))
}
