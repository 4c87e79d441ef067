//! Signal sets, IDX ingestion, synthetic generators and CS instances.
//!
//! Random draws go through [`stream_rng`]: one ChaCha8 key per run seed and
//! one stream per purpose, so an instance depends only on
//! `(seed, image, alpha index, repetition)` and never on scheduling.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{BigEndian, LittleEndian, ReadBytesExt, WriteBytesExt};
use flate2::read::GzDecoder;
use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::amp::CsInstance;
use crate::error::{Error, Result};
use crate::prior::Prior;

/// Samples as rows, with exact per-row nonzero counts.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSet {
    samples: Array2<f64>,
    sparsity: Vec<usize>,
    source: String,
}

impl SignalSet {
    pub fn new(samples: Array2<f64>, source: impl Into<String>) -> Result<Self> {
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("samples", "non-finite entry"));
        }
        let sparsity = samples
            .rows()
            .into_iter()
            .map(|r| r.iter().filter(|&&v| v != 0.0).count())
            .collect();
        Ok(Self {
            samples,
            sparsity,
            source: source.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.samples.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.samples.ncols()
    }

    pub fn samples(&self) -> &Array2<f64> {
        &self.samples
    }

    pub fn sample(&self, s: usize) -> ArrayView1<'_, f64> {
        self.samples.row(s)
    }

    /// Nonzero count `K` of each sample.
    pub fn sparsity(&self) -> &[usize] {
        &self.sparsity
    }

    /// `K / N` of sample `s`.
    pub fn rho(&self, s: usize) -> f64 {
        self.sparsity[s] as f64 / self.dim() as f64
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// The first `count` samples (or all, if fewer).
    pub fn head(&self, count: usize) -> Self {
        let count = count.min(self.len());
        Self {
            samples: self.samples.slice(ndarray::s![..count, ..]).to_owned(),
            sparsity: self.sparsity[..count].to_vec(),
            source: format!("{}[..{count}]", self.source),
        }
    }

    /// Entries above `threshold` become 1, the rest 0.
    pub fn binarized(&self, threshold: f64) -> Self {
        let samples = self.samples.mapv(|v| if v > threshold { 1.0 } else { 0.0 });
        let source = format!("{} binarized at {threshold}", self.source);
        Self::new(samples, source).expect("binary values are finite")
    }
}

fn open(path: &Path) -> Result<Box<dyn Read>> {
    let mut file = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    let mut magic = [0u8; 2];
    let is_gz = {
        use std::io::BufRead;
        let buf = file.fill_buf().map_err(|e| Error::io(path, e))?;
        if buf.len() >= 2 {
            magic.copy_from_slice(&buf[..2]);
        }
        magic == [0x1f, 0x8b]
    };
    Ok(if is_gz {
        Box::new(BufReader::new(GzDecoder::new(file)))
    } else {
        Box::new(file)
    })
}

/// Raw IDX tensor: dimensions and unsigned-byte payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxBytes {
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

/// Reads an unsigned-byte IDX file, gzip-compressed or not.
pub fn read_idx_bytes(path: &Path) -> Result<IdxBytes> {
    let mut r = open(path)?;
    let magic = r.read_u32::<BigEndian>().map_err(|_| Error::TruncatedFile("IDX header"))?;
    let ndim = (magic & 0xff) as usize;
    if magic >> 8 != 0x08 || ndim == 0 {
        return Err(Error::BadMagic {
            found: magic,
            context: "IDX unsigned-byte header",
        });
    }
    let mut dims = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        let d = r.read_u32::<BigEndian>().map_err(|_| Error::TruncatedFile("IDX dimensions"))?;
        dims.push(d as usize);
    }
    let total: usize = dims.iter().product();
    let mut data = vec![0u8; total];
    r.read_exact(&mut data).map_err(|_| Error::TruncatedFile("IDX payload"))?;
    Ok(IdxBytes { dims, data })
}

/// Writes an uncompressed unsigned-byte IDX file.
pub fn write_idx_bytes(path: &Path, idx: &IdxBytes) -> Result<()> {
    let total: usize = idx.dims.iter().product();
    if total != idx.data.len() || idx.dims.is_empty() || idx.dims.len() > 255 {
        return Err(Error::DimensionMismatch(format!(
            "IDX dims {:?} do not match {} payload bytes",
            idx.dims,
            idx.data.len()
        )));
    }
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    let io = |e| Error::io(path, e);
    w.write_u32::<BigEndian>(0x0800 | idx.dims.len() as u32).map_err(io)?;
    for &d in &idx.dims {
        w.write_u32::<BigEndian>(d as u32).map_err(io)?;
    }
    w.write_all(&idx.data).map_err(io)?;
    w.flush().map_err(io)
}

/// Loads an image IDX file as a signal set, bytes scaled by `1/255` and
/// each image flattened row-major.
pub fn load_idx(path: &Path) -> Result<SignalSet> {
    let idx = read_idx_bytes(path)?;
    if idx.dims.len() < 2 {
        return Err(Error::DimensionMismatch(format!(
            "expected an image tensor, got dims {:?}",
            idx.dims
        )));
    }
    let s = idx.dims[0];
    let n: usize = idx.dims[1..].iter().product();
    let values: Vec<f64> = idx.data.iter().map(|&b| b as f64 / 255.0).collect();
    let samples = Array2::from_shape_vec((s, n), values).map_err(|e| Error::DimensionMismatch(e.to_string()))?;
    SignalSet::new(samples, path.display().to_string())
}

const CACHE_MAGIC: &[u8; 4] = b"GSIG";
const CACHE_VERSION: u32 = 1;

/// Cache layout: `b"GSIG"`, version `u32`, rows `u64`, columns `u64`,
/// source length `u32` and UTF-8 bytes, then the samples row-major as
/// little-endian `f64`.
pub fn write_cache(set: &SignalSet, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    let io = |e| Error::io(path, e);
    w.write_all(CACHE_MAGIC).map_err(io)?;
    w.write_u32::<LittleEndian>(CACHE_VERSION).map_err(io)?;
    w.write_u64::<LittleEndian>(set.len() as u64).map_err(io)?;
    w.write_u64::<LittleEndian>(set.dim() as u64).map_err(io)?;
    w.write_u32::<LittleEndian>(set.source.len() as u32).map_err(io)?;
    w.write_all(set.source.as_bytes()).map_err(io)?;
    for &v in set.samples.iter() {
        w.write_f64::<LittleEndian>(v).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_cache(path: &Path) -> Result<SignalSet> {
    let mut r = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| Error::TruncatedFile("cache header"))?;
    if &magic != CACHE_MAGIC {
        return Err(Error::BadMagic {
            found: u32::from_be_bytes(magic),
            context: "signal cache",
        });
    }
    let short = |_| Error::TruncatedFile("cache header");
    let version = r.read_u32::<LittleEndian>().map_err(short)?;
    if version != CACHE_VERSION {
        return Err(Error::Format {
            what: "signal cache",
            detail: format!("unsupported version {version}"),
        });
    }
    let s = r.read_u64::<LittleEndian>().map_err(short)? as usize;
    let n = r.read_u64::<LittleEndian>().map_err(short)? as usize;
    let len = r.read_u32::<LittleEndian>().map_err(short)? as usize;
    let mut src = vec![0u8; len];
    r.read_exact(&mut src).map_err(short)?;
    let source = String::from_utf8(src).map_err(|e| Error::Format {
        what: "signal cache",
        detail: e.to_string(),
    })?;
    let mut values = vec![0.0; s * n];
    r.read_f64_into::<LittleEndian>(&mut values)
        .map_err(|_| Error::TruncatedFile("cache payload"))?;
    let samples = Array2::from_shape_vec((s, n), values).map_err(|e| Error::DimensionMismatch(e.to_string()))?;
    SignalSet::new(samples, source)
}

/// Loads a signal cache or an IDX image file, whichever `path` holds.
pub fn load_signals(path: &Path) -> Result<SignalSet> {
    let mut head = [0u8; 4];
    let n = File::open(path)
        .and_then(|mut f| f.read(&mut head))
        .map_err(|e| Error::io(path, e))?;
    if n == 4 && &head == CACHE_MAGIC {
        read_cache(path)
    } else {
        load_idx(path)
    }
}

/// What a random stream is used for. Each purpose maps to a disjoint range
/// of ChaCha stream ids under the same key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Sensing matrix and noise for one `(image, alpha index, repetition)`.
    /// Image ids use 32 bits, alpha index and repetition 14 bits each.
    Instance { image: u32, alpha: u16, rep: u16 },
    Training,
    Synthetic(u32),
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Instance { image, alpha, rep } => {
                assert!(alpha < 1 << 14 && rep < 1 << 14, "stream index out of range");
                ((image as u64) << 28) | ((alpha as u64) << 14) | rep as u64
            }
            Stream::Training => 1 << 62,
            Stream::Synthetic(k) => (2 << 62) | k as u64,
        }
    }
}

/// Independent generator for `stream` under run seed `seed`.
pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}

/// Variance convention for the entries of `F`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scaling {
    /// Variance `1/N`, unit expected column norm.
    #[default]
    UnitColumn,
    /// Variance `1/√N`, column norms grow like `N^{1/4}`.
    SqrtN,
}

impl Scaling {
    pub fn variance(self, n: usize) -> f64 {
        match self {
            Scaling::UnitColumn => 1.0 / n as f64,
            Scaling::SqrtN => 1.0 / (n as f64).sqrt(),
        }
    }
}

/// `M = round(alpha N)`.
pub fn measurement_count(alpha: f64, n: usize) -> Result<usize> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid("alpha", format!("{alpha} outside (0, 1]")));
    }
    let m = (alpha * n as f64).round() as usize;
    if m == 0 {
        return Err(Error::invalid("alpha", format!("alpha {alpha} gives no measurements for N = {n}")));
    }
    Ok(m)
}

/// Draws `F` and `y = F x + w` with `w ~ N(0, delta)`. `delta = 0` gives
/// noiseless measurements.
pub fn sense<R: Rng + ?Sized>(
    signal: ArrayView1<f64>,
    alpha: f64,
    delta: f64,
    scaling: Scaling,
    rng: &mut R,
) -> Result<(Array2<f64>, Array1<f64>)> {
    let n = signal.len();
    let m = measurement_count(alpha, n)?;
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::invalid("delta", "noise variance must be finite and nonnegative"));
    }
    let sd = scaling.variance(n).sqrt();
    let f = Array2::from_shape_simple_fn((m, n), || {
        let z: f64 = StandardNormal.sample(rng);
        sd * z
    });
    let noise_sd = delta.sqrt();
    let mut y = f.dot(&signal);
    if delta > 0.0 {
        for v in y.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *v += noise_sd * z;
        }
    }
    Ok((f, y))
}

/// [`sense`] wrapped into a solver instance with the truth attached.
pub fn make_instance<R: Rng + ?Sized>(
    signal: ArrayView1<f64>,
    alpha: f64,
    delta: f64,
    scaling: Scaling,
    rng: &mut R,
) -> Result<CsInstance> {
    let (f, y) = sense(signal, alpha, delta, scaling, rng)?;
    CsInstance::new(f, y, delta, Some(signal.to_owned()))
}

/// Gaussian slab for synthetic signals; values are clipped to `bounds`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slab {
    pub mean: f64,
    pub var: f64,
    pub bounds: Option<(f64, f64)>,
}

/// `count` i.i.d. spike-and-slab signals of length `n`.
pub fn synth_sparse<R: Rng + ?Sized>(n: usize, rho: f64, slab: Slab, count: usize, rng: &mut R) -> Result<SignalSet> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::invalid("rho", format!("{rho} outside [0, 1]")));
    }
    let normal = Normal::new(slab.mean, slab.var.sqrt()).map_err(|e| Error::invalid("slab", e.to_string()))?;
    let samples = Array2::from_shape_simple_fn((count, n), || {
        if rng.random::<f64>() < rho {
            let v = normal.sample(rng);
            match slab.bounds {
                Some((lo, hi)) => v.clamp(lo, hi),
                None => v,
            }
        } else {
            0.0
        }
    });
    let bounds = match slab.bounds {
        Some((lo, hi)) => format!(" clipped to [{lo}, {hi}]"),
        None => String::new(),
    };
    SignalSet::new(
        samples,
        format!("synthetic rho={rho} slab N({}, {}){bounds}", slab.mean, slab.var),
    )
}

/// Smallest slab variance an estimated prior may have.
pub const VAR_FLOOR: f64 = 1e-4;

fn slab_stats(values: impl Iterator<Item = f64>) -> (usize, f64, f64) {
    let (mut k, mut sum, mut sq) = (0usize, 0.0, 0.0);
    for v in values.filter(|&v| v != 0.0) {
        k += 1;
        sum += v;
        sq += v * v;
    }
    if k == 0 {
        return (0, 0.0, 0.0);
    }
    let mean = sum / k as f64;
    (k, mean, (sq / k as f64 - mean * mean).max(0.0))
}

fn make_prior(rho: f64, mean: f64, var: f64, bounds: Option<(f64, f64)>) -> Result<Prior> {
    let var = var.max(VAR_FLOOR);
    match bounds {
        Some((lo, hi)) => Prior::truncated(rho, mean, var, lo, hi),
        None => Prior::gauss_bernoulli(rho, mean, var),
    }
}

/// One spike-and-slab prior fitted to all entries of `set`: the nonzero
/// frequency and the mean and variance of the nonzero values.
pub fn estimate_global_prior(set: &SignalSet, bounds: Option<(f64, f64)>) -> Result<Prior> {
    let (k, mean, var) = slab_stats(set.samples.iter().copied());
    if k == 0 {
        return make_prior(0.0, 0.0, 1.0, bounds);
    }
    make_prior(k as f64 / set.samples.len() as f64, mean, var, bounds)
}

/// Per-coordinate spike-and-slab priors fitted like
/// [`estimate_global_prior`], column by column. Coordinates that are never
/// nonzero get a pure spike with the global slab.
pub fn estimate_pixel_priors(set: &SignalSet, bounds: Option<(f64, f64)>) -> Result<Vec<Prior>> {
    if set.is_empty() {
        return Err(Error::invalid("data", "cannot estimate priors from an empty set"));
    }
    let (_, global_mean, global_var) = slab_stats(set.samples.iter().copied());
    let global_var = if global_var > 0.0 { global_var } else { 1.0 };
    set.samples
        .axis_iter(Axis(1))
        .map(|col| {
            let (k, mean, var) = slab_stats(col.iter().copied());
            if k == 0 {
                make_prior(0.0, global_mean, global_var, bounds)
            } else {
                make_prior(k as f64 / set.len() as f64, mean, var, bounds)
            }
        })
        .collect()
}
