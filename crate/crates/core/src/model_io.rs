//! GRBM model files.
//!
//! Binary layout, all little-endian:
//!
//! ```text
//! b"GRBM"  u32 version  u64 N  u64 H
//! N visible units, then H hidden units, each: u8 tag + f64 parameters
//!     tag 0 Bernoulli          bias
//!     tag 1 GaussBernoulli     rho mean var
//!     tag 2 TruncGaussBernoulli rho mean var lo hi
//! N*H f64 couplings, row-major (visible index outer)
//! ```
//!
//! The text variant carries the same content line by line, with floats in
//! shortest round-trip form, so both formats reload bit-exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;

use crate::error::{Error, Result};
use crate::prior::Prior;
use crate::tap::Grbm;

const MAGIC: &[u8; 4] = b"GRBM";
const VERSION: u32 = 1;
const TEXT_HEADER: &str = "grbm-text 1";

fn params(p: &Prior) -> (u8, Vec<f64>) {
    match *p {
        Prior::Bernoulli { bias } => (0, vec![bias]),
        Prior::GaussBernoulli { rho, mean, var } => (1, vec![rho, mean, var]),
        Prior::TruncGaussBernoulli(t) => (2, vec![t.rho(), t.mean(), t.var(), t.lo(), t.hi()]),
    }
}

fn param_count(tag: u8) -> Result<usize> {
    match tag {
        0 => Ok(1),
        1 => Ok(3),
        2 => Ok(5),
        _ => Err(Error::Format {
            what: "model file",
            detail: format!("unknown prior tag {tag}"),
        }),
    }
}

fn build(tag: u8, v: &[f64]) -> Result<Prior> {
    match tag {
        0 => Prior::bernoulli(v[0]),
        1 => Prior::gauss_bernoulli(v[0], v[1], v[2]),
        2 => Prior::truncated(v[0], v[1], v[2], v[3], v[4]),
        _ => unreachable!(),
    }
}

pub fn write_binary<W: Write>(model: &Grbm, mut w: W) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    w.write_u64::<LittleEndian>(model.n_visible() as u64)?;
    w.write_u64::<LittleEndian>(model.n_hidden() as u64)?;
    for p in model.visible_priors().iter().chain(model.hidden_priors()) {
        let (tag, vals) = params(p);
        w.write_u8(tag)?;
        for v in vals {
            w.write_f64::<LittleEndian>(v)?;
        }
    }
    for &x in model.weights().iter() {
        w.write_f64::<LittleEndian>(x)?;
    }
    w.flush()
}

pub fn read_binary<R: Read>(mut r: R) -> Result<Grbm> {
    let short = |_| Error::TruncatedFile("model file");
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(short)?;
    if &magic != MAGIC {
        return Err(Error::BadMagic {
            found: u32::from_be_bytes(magic),
            context: "model file",
        });
    }
    let version = r.read_u32::<LittleEndian>().map_err(short)?;
    if version != VERSION {
        return Err(Error::Format {
            what: "model file",
            detail: format!("unsupported version {version}"),
        });
    }
    let n = r.read_u64::<LittleEndian>().map_err(short)? as usize;
    let h = r.read_u64::<LittleEndian>().map_err(short)? as usize;
    let mut priors = Vec::with_capacity(n + h);
    for _ in 0..n + h {
        let tag = r.read_u8().map_err(short)?;
        let mut vals = vec![0.0; param_count(tag)?];
        r.read_f64_into::<LittleEndian>(&mut vals).map_err(short)?;
        priors.push(build(tag, &vals)?);
    }
    let mut w = vec![0.0; n * h];
    r.read_f64_into::<LittleEndian>(&mut w).map_err(short)?;
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(short)? != 0 {
        return Err(Error::Format {
            what: "model file",
            detail: "trailing bytes after the coupling block".into(),
        });
    }
    let hidden = priors.split_off(n);
    let w = Array2::from_shape_vec((n, h), w).map_err(|e| Error::DimensionMismatch(e.to_string()))?;
    Grbm::new(w, priors, hidden)
}

fn tag_name(tag: u8) -> &'static str {
    ["bernoulli", "gauss-bernoulli", "truncated"][tag as usize]
}

pub fn write_text<W: Write>(model: &Grbm, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{TEXT_HEADER}")?;
    for (label, layer) in [("visible", model.visible_priors()), ("hidden", model.hidden_priors())] {
        writeln!(w, "{label} {}", layer.len())?;
        for p in layer {
            let (tag, vals) = params(p);
            let vals: Vec<String> = vals.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{} {}", tag_name(tag), vals.join(" "))?;
        }
    }
    writeln!(w, "weights")?;
    for row in model.weights().rows() {
        let vals: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", vals.join(" "))?;
    }
    w.flush()
}

fn text_err(line: usize, detail: impl Into<String>) -> Error {
    Error::Format {
        what: "text model file",
        detail: format!("line {line}: {}", detail.into()),
    }
}

fn floats(line: usize, fields: &[&str]) -> Result<Vec<f64>> {
    fields
        .iter()
        .map(|f| f.parse::<f64>().map_err(|e| text_err(line, format!("{f:?}: {e}"))))
        .collect()
}

pub fn read_text<R: BufRead>(r: R) -> Result<Grbm> {
    let mut lines = r
        .lines()
        .enumerate()
        .map(|(i, l)| l.map(|l| (i + 1, l)))
        .filter(|l| !matches!(l, Ok((_, s)) if s.trim().is_empty() || s.starts_with('#')));
    let mut next = |want: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some(Ok(l)) => Ok(l),
            Some(Err(e)) => Err(text_err(0, e.to_string())),
            None => Err(text_err(0, format!("missing {want}"))),
        }
    };
    let (ln, header) = next("header")?;
    if header.trim() != TEXT_HEADER {
        return Err(text_err(ln, format!("expected `{TEXT_HEADER}`")));
    }
    let mut layers = Vec::new();
    for label in ["visible", "hidden"] {
        let (ln, line) = next(label)?;
        let count = match line.split_whitespace().collect::<Vec<_>>()[..] {
            [l, c] if l == label => c.parse::<usize>().map_err(|e| text_err(ln, e.to_string()))?,
            _ => return Err(text_err(ln, format!("expected `{label} <count>`"))),
        };
        let mut layer = Vec::with_capacity(count);
        for _ in 0..count {
            let (ln, line) = next("prior")?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            let tag = match fields.first() {
                Some(&"bernoulli") => 0,
                Some(&"gauss-bernoulli") => 1,
                Some(&"truncated") => 2,
                _ => return Err(text_err(ln, "unknown prior")),
            };
            if fields.len() != 1 + param_count(tag)? {
                return Err(text_err(ln, "wrong parameter count"));
            }
            layer.push(build(tag, &floats(ln, &fields[1..])?)?);
        }
        layers.push(layer);
    }
    let (ln, line) = next("weights")?;
    if line.trim() != "weights" {
        return Err(text_err(ln, "expected `weights`"));
    }
    let hidden = layers.pop().unwrap();
    let visible = layers.pop().unwrap();
    let (n, h) = (visible.len(), hidden.len());
    let mut w = Vec::with_capacity(n * h);
    for _ in 0..n {
        let (ln, line) = next("weight row")?;
        let row = floats(ln, &line.split_whitespace().collect::<Vec<_>>())?;
        if row.len() != h {
            return Err(text_err(ln, format!("expected {h} weights, got {}", row.len())));
        }
        w.extend(row);
    }
    let w = Array2::from_shape_vec((n, h), w).map_err(|e| Error::DimensionMismatch(e.to_string()))?;
    Grbm::new(w, visible, hidden)
}

fn is_text(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "txt")
}

/// Saves `model`; a `.txt` extension selects the text format.
pub fn save(model: &Grbm, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let w = BufWriter::new(file);
    if is_text(path) {
        write_text(model, w)
    } else {
        write_binary(model, w)
    }
    .map_err(|e| Error::io(path, e))
}

/// Loads a model written by [`save`]; the format is detected from the
/// first bytes.
pub fn load(path: &Path) -> Result<Grbm> {
    let mut r = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    let head = r.fill_buf().map_err(|e| Error::io(path, e))?;
    if head.starts_with(MAGIC) {
        read_binary(r)
    } else {
        read_text(r)
    }
}
