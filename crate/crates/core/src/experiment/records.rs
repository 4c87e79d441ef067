//! Result records, the grid aggregate, and their CSV files.
//!
//! Every file starts with a `# grbm-amp <kind> v1` line naming the schema.
//! Floats are written in shortest round-trip form so rereading and
//! rewriting a file reproduces it byte for byte.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const RECORDS_HEADER: &str = "# grbm-amp records v1";
pub const GRID_HEADER: &str = "# grbm-amp grid v1";
pub const TIMINGS_HEADER: &str = "# grbm-amp timings v1";

const RECORD_COLUMNS: [&str; 15] = [
    "image",
    "alpha",
    "rep",
    "k",
    "rho",
    "m",
    "mode",
    "mse_db",
    "correlation",
    "constant_input",
    "outer_iterations",
    "inner_iterations",
    "converged",
    "status",
    "seed",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub image: usize,
    pub alpha: f64,
    pub rep: usize,
    pub k: usize,
    pub rho: f64,
    pub m: usize,
    pub mode: String,
    pub mse_db: f64,
    pub correlation: f64,
    pub constant_input: bool,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub converged: bool,
    /// `ok`, or the error that stopped the reconstruction.
    pub status: String,
    pub seed: u64,
}

/// Identifies one `(image, alpha, repetition)` cell.
pub type RecordKey = (usize, u64, usize);

impl ResultRecord {
    pub fn key(&self) -> RecordKey {
        (self.image, self.alpha.to_bits(), self.rep)
    }

    pub fn failed(&self) -> bool {
        self.status != "ok"
    }

    fn fields(&self) -> [String; 15] {
        [
            self.image.to_string(),
            self.alpha.to_string(),
            self.rep.to_string(),
            self.k.to_string(),
            self.rho.to_string(),
            self.m.to_string(),
            self.mode.clone(),
            self.mse_db.to_string(),
            self.correlation.to_string(),
            self.constant_input.to_string(),
            self.outer_iterations.to_string(),
            self.inner_iterations.to_string(),
            self.converged.to_string(),
            self.status.clone(),
            self.seed.to_string(),
        ]
    }

    fn from_fields(r: &csv::StringRecord) -> Result<Self> {
        let bad = |col: &str| Error::Format {
            what: "records file",
            detail: format!("bad `{col}` in row {:?}", r.position().map(|p| p.line())),
        };
        let get = |i: usize| r.get(i).ok_or_else(|| bad(RECORD_COLUMNS[i]));
        macro_rules! num {
            ($i:expr) => {
                get($i)?.parse().map_err(|_| bad(RECORD_COLUMNS[$i]))?
            };
        }
        Ok(Self {
            image: num!(0),
            alpha: num!(1),
            rep: num!(2),
            k: num!(3),
            rho: num!(4),
            m: num!(5),
            mode: get(6)?.to_string(),
            mse_db: num!(7),
            correlation: num!(8),
            constant_input: num!(9),
            outer_iterations: num!(10),
            inner_iterations: num!(11),
            converged: num!(12),
            status: get(13)?.to_string(),
            seed: num!(14),
        })
    }
}

fn create(path: &Path, header: &str) -> Result<csv::Writer<BufWriter<File>>> {
    let mut out = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    writeln!(out, "{header}").map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(out))
}

fn open(path: &Path, header: &str) -> Result<csv::Reader<BufReader<File>>> {
    let text_head = {
        use std::io::BufRead;
        let mut first = String::new();
        BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?)
            .read_line(&mut first)
            .map_err(|e| Error::io(path, e))?;
        first
    };
    if text_head.trim_end() != header {
        return Err(Error::Format {
            what: "csv file",
            detail: format!("{} does not start with `{header}`", path.display()),
        });
    }
    let file = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    Ok(csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(file))
}

/// Streams records to a file as they complete.
pub struct RecordWriter {
    inner: csv::Writer<BufWriter<File>>,
    path: std::path::PathBuf,
}

impl RecordWriter {
    /// Starts a new file, or appends to an existing one with a valid header.
    pub fn open(path: &Path) -> Result<Self> {
        let inner = if path.exists() && open(path, RECORDS_HEADER).is_ok() {
            let file = std::fs::OpenOptions::new()
                .append(true)
                .open(path)
                .map_err(|e| Error::io(path, e))?;
            csv::WriterBuilder::new().has_headers(false).from_writer(BufWriter::new(file))
        } else {
            let mut w = create(path, RECORDS_HEADER)?;
            w.write_record(RECORD_COLUMNS)?;
            w
        };
        Ok(Self {
            inner,
            path: path.to_path_buf(),
        })
    }

    pub fn append(&mut self, record: &ResultRecord) -> Result<()> {
        self.inner.write_record(record.fields())?;
        self.inner.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub fn write_records(path: &Path, records: &[ResultRecord]) -> Result<()> {
    let mut w = create(path, RECORDS_HEADER)?;
    w.write_record(RECORD_COLUMNS)?;
    for r in records {
        w.write_record(r.fields())?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a records file. A torn final line (from an interrupted run) is
/// dropped.
pub fn read_records(path: &Path) -> Result<Vec<ResultRecord>> {
    let mut reader = open(path, RECORDS_HEADER)?;
    let rows: Vec<_> = reader.records().collect();
    let last = rows.len();
    let mut out = Vec::with_capacity(rows.len());
    for (i, row) in rows.into_iter().enumerate() {
        let parsed = row.map_err(Error::from).and_then(|r| ResultRecord::from_fields(&r));
        match parsed {
            Ok(r) => out.push(r),
            Err(_) if i + 1 == last => log::warn!("dropping incomplete final row of {}", path.display()),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Wall time of one cell, kept apart from the records so those stay
/// reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct Timing {
    pub image: usize,
    pub alpha: f64,
    pub rep: usize,
    pub wall_secs: f64,
}

pub fn append_timings(path: &Path, timings: &[Timing]) -> Result<()> {
    let fresh = !path.exists();
    let file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    if fresh {
        writeln!(out, "{TIMINGS_HEADER}\nimage,alpha,rep,wall_secs").map_err(|e| Error::io(path, e))?;
    }
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for t in timings {
        w.write_record([
            t.image.to_string(),
            t.alpha.to_string(),
            t.rep.to_string(),
            format!("{:.6}", t.wall_secs),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One `(alpha, rho bin)` cell of the phase grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub alpha: f64,
    pub rho_lo: f64,
    pub rho_hi: f64,
    /// The measurement rate at which `M = K` for the bin centre.
    pub m_equals_k_alpha: f64,
    pub count: usize,
    pub failed: usize,
    pub converged_fraction: f64,
    pub mean_mse_db: f64,
    pub mean_correlation: f64,
    pub median_mse_db: f64,
    pub median_correlation: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

/// Groups records by alpha and by `rho` bins of width `bin_width`. Means
/// and medians skip failed records; `failed` counts them.
pub fn aggregate(records: &[ResultRecord], bin_width: f64) -> Vec<GridRow> {
    let mut groups: BTreeMap<(u64, i64), Vec<&ResultRecord>> = BTreeMap::new();
    for r in records {
        let bin = (r.rho / bin_width).floor() as i64;
        // alphas in (0, 1] order the same as their bit patterns
        groups.entry((r.alpha.to_bits(), bin)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((alpha_bits, bin), rs)| {
            let ok: Vec<&&ResultRecord> = rs.iter().filter(|r| !r.failed()).collect();
            let mse: Vec<f64> = ok.iter().map(|r| r.mse_db).collect();
            let cor: Vec<f64> = ok.iter().map(|r| r.correlation).collect();
            let mean = |v: &[f64]| {
                if v.is_empty() {
                    f64::NAN
                } else {
                    v.iter().sum::<f64>() / v.len() as f64
                }
            };
            let rho_lo = bin as f64 * bin_width;
            GridRow {
                alpha: f64::from_bits(alpha_bits),
                rho_lo,
                rho_hi: rho_lo + bin_width,
                m_equals_k_alpha: rho_lo + 0.5 * bin_width,
                count: rs.len(),
                failed: rs.len() - ok.len(),
                converged_fraction: rs.iter().filter(|r| r.converged).count() as f64 / rs.len() as f64,
                mean_mse_db: mean(&mse),
                mean_correlation: mean(&cor),
                median_mse_db: median(mse),
                median_correlation: median(cor),
            }
        })
        .collect()
}

pub fn write_grid(path: &Path, rows: &[GridRow]) -> Result<()> {
    let mut w = create(path, GRID_HEADER)?;
    w.write_record([
        "alpha",
        "rho_lo",
        "rho_hi",
        "m_equals_k_alpha",
        "count",
        "failed",
        "converged_fraction",
        "mean_mse_db",
        "mean_correlation",
        "median_mse_db",
        "median_correlation",
    ])?;
    for g in rows {
        w.write_record([
            g.alpha.to_string(),
            g.rho_lo.to_string(),
            g.rho_hi.to_string(),
            g.m_equals_k_alpha.to_string(),
            g.count.to_string(),
            g.failed.to_string(),
            g.converged_fraction.to_string(),
            g.mean_mse_db.to_string(),
            g.mean_correlation.to_string(),
            g.median_mse_db.to_string(),
            g.median_correlation.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Re-aggregates a records file into a grid file.
pub fn aggregate_file(records: &Path, grid: &Path, bin_width: f64) -> Result<Vec<GridRow>> {
    let rows = aggregate(&read_records(records)?, bin_width);
    write_grid(grid, &rows)?;
    Ok(rows)
}
