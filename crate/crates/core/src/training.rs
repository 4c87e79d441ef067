//! Contrastive-divergence training of a GRBM with truncated spike-and-slab
//! visible units and Bernoulli hidden units.
//!
//! The visible priors are fitted to the data once (per-pixel nonzero
//! frequency, slab mean and variance) and then frozen. Only the couplings
//! and the hidden biases follow the gradient.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{estimate_pixel_priors, stream_rng, SignalSet, Stream};
use crate::error::{Error, Result};
use crate::prior::{Prior, TiltedField};
use crate::special::sigmoid;
use crate::tap::Grbm;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub momentum: f64,
    pub batch_size: usize,
    /// Gibbs steps per CD update.
    pub cd_steps: usize,
    pub bounds: (f64, f64),
    pub seed: u64,
    /// Standard deviation of the initial couplings.
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: 100,
            epochs: 20,
            learning_rate: 0.01,
            weight_decay: 0.001,
            momentum: 0.5,
            batch_size: 100,
            cd_steps: 1,
            bounds: (0.0, 1.0),
            seed: 0,
            init_scale: 0.01,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("hidden", self.hidden as f64),
            ("epochs", self.epochs as f64),
            ("batch_size", self.batch_size as f64),
            ("cd_steps", self.cd_steps as f64),
            ("learning_rate", self.learning_rate),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::invalid(name, "must be positive"));
            }
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::invalid("weight_decay", "must be nonnegative"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("momentum", "must lie in [0, 1)"));
        }
        if !(self.init_scale >= 0.0) {
            return Err(Error::invalid("init_scale", "must be nonnegative"));
        }
        if !(self.bounds.0 < self.bounds.1) {
            return Err(Error::invalid("bounds", "need lo < hi"));
        }
        Ok(())
    }
}

/// One block-Gibbs step: `h ~ P(h | x)`, then `x' ~ P(x | h)`.
pub fn gibbs_step<R: Rng + ?Sized>(model: &Grbm, visible: ArrayView1<f64>, rng: &mut R) -> Result<(Array1<f64>, Array1<f64>)> {
    let hidden = sample_layer(model.hidden_priors(), &model.weights().t().dot(&visible), rng)?;
    let next = sample_layer(model.visible_priors(), &model.weights().dot(&hidden), rng)?;
    Ok((hidden, next))
}

fn sample_layer<R: Rng + ?Sized>(priors: &[Prior], field: &Array1<f64>, rng: &mut R) -> Result<Array1<f64>> {
    priors
        .iter()
        .zip(field)
        .map(|(p, &b)| p.sample(TiltedField::new(0.0, b), rng))
        .collect()
}

/// `v ← momentum·v + lr·(grad − decay·w)`, then `w ← w + v`.
pub fn sgd_step(w: &mut Array2<f64>, velocity: &mut Array2<f64>, grad: &Array2<f64>, config: &TrainConfig) {
    ndarray::Zip::from(&mut *w)
        .and(&mut *velocity)
        .and(grad)
        .for_each(|w, v, &g| {
            *v = config.momentum * *v + config.learning_rate * (g - config.weight_decay * *w);
            *w += *v;
        });
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean squared error of the mean-field reconstruction of each batch.
    pub reconstruction_error: f64,
    /// Frobenius norm of the couplings at the end of the epoch.
    pub weight_norm: f64,
    pub elapsed_secs: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochStats>,
}

impl TrainLog {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        writeln!(out, "# grbm-amp training log v1").map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epoch", "reconstruction_error", "weight_norm", "elapsed_secs"])?;
        for e in &self.epochs {
            w.write_record([
                e.epoch.to_string(),
                e.reconstruction_error.to_string(),
                e.weight_norm.to_string(),
                format!("{:.3}", e.elapsed_secs),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Mean-field visible reconstruction from hidden activations.
fn reconstruct_visible(model: &Grbm, hidden_prob: ArrayView1<f64>) -> Result<Array1<f64>> {
    let field = model.weights().dot(&hidden_prob);
    model
        .visible_priors()
        .iter()
        .zip(&field)
        .map(|(p, &b)| p.posterior_moments(TiltedField::new(0.0, b)).map(|m| m.mean))
        .collect()
}

/// Trains with randomness drawn from the training stream of `config.seed`.
pub fn train(data: &SignalSet, config: &TrainConfig) -> Result<(Grbm, TrainLog)> {
    train_with_rng(data, config, &mut stream_rng(config.seed, Stream::Training))
}

pub fn train_with_rng<R: Rng + ?Sized>(data: &SignalSet, config: &TrainConfig, rng: &mut R) -> Result<(Grbm, TrainLog)> {
    config.validate()?;
    let (lo, hi) = config.bounds;
    if data.len() < config.batch_size {
        return Err(Error::invalid(
            "data",
            format!("{} samples do not fill one batch of {}", data.len(), config.batch_size),
        ));
    }
    if data.samples().iter().any(|&v| v != 0.0 && !(lo..=hi).contains(&v)) {
        return Err(Error::invalid("data", format!("values outside [{lo}, {hi}]")));
    }
    let (n, h) = (data.dim(), config.hidden);
    let visible = estimate_pixel_priors(data, Some(config.bounds))?;
    let init = Array2::from_shape_simple_fn((n, h), || {
        let z: f64 = StandardNormal.sample(rng);
        config.init_scale * z
    });
    let mut model = Grbm::new(init, visible, vec![Prior::bernoulli(0.0)?; h])?;
    let mut w = model.weights().clone();
    let mut bias = Array1::<f64>::zeros(h);
    let mut w_vel = Array2::<f64>::zeros((n, h));
    let mut b_vel = Array1::<f64>::zeros(h);

    let mut order: Vec<usize> = (0..data.len()).collect();
    let batches = data.len() / config.batch_size;
    let started = Instant::now();
    let mut log = TrainLog::default();

    for epoch in 1..=config.epochs {
        order.shuffle(rng);
        let mut recon = 0.0;
        for batch in 0..batches {
            let idx = &order[batch * config.batch_size..(batch + 1) * config.batch_size];
            let v0 = data.samples().select(Axis(0), idx);
            let bsz = idx.len() as f64;

            // positive phase, mean-field hidden activations
            let h0 = (v0.dot(&w) + &bias).mapv(sigmoid);
            for (s, row) in h0.rows().into_iter().enumerate() {
                let r = reconstruct_visible(&model, row)?;
                recon += r.iter().zip(v0.row(s)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n as f64;
            }

            // negative phase, k Gibbs steps from sampled hiddens
            let mut hs = h0.mapv(|p| if rng.random::<f64>() < p { 1.0 } else { 0.0 });
            let mut vk = Array2::<f64>::zeros(v0.dim());
            let mut hk = h0.clone();
            for step in 0..config.cd_steps {
                let field = hs.dot(&w.t());
                for (mut row, f) in vk.rows_mut().into_iter().zip(field.rows()) {
                    for ((x, p), &b) in row.iter_mut().zip(model.visible_priors()).zip(f) {
                        *x = p.sample(TiltedField::new(0.0, b), rng)?;
                    }
                }
                hk = (vk.dot(&w) + &bias).mapv(sigmoid);
                if step + 1 < config.cd_steps {
                    hs = hk.mapv(|p| if rng.random::<f64>() < p { 1.0 } else { 0.0 });
                }
            }

            let grad_w = (v0.t().dot(&h0) - vk.t().dot(&hk)) / bsz;
            let grad_b = (&h0 - &hk).sum_axis(Axis(0)) / bsz;
            sgd_step(&mut w, &mut w_vel, &grad_w, config);
            ndarray::Zip::from(&mut bias).and(&mut b_vel).and(&grad_b).for_each(|b, v, &g| {
                *v = config.momentum * *v + config.learning_rate * g;
                *b += *v;
            });
            if w.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    stage: "training update",
                    iteration: (epoch - 1) * batches + batch,
                });
            }
            let hidden = bias.iter().map(|&b| Prior::bernoulli(b)).collect::<Result<Vec<_>>>()?;
            model = Grbm::new(w.clone(), model.visible_priors().to_vec(), hidden)?;
        }
        let stats = EpochStats {
            epoch,
            reconstruction_error: recon / (batches as f64 * config.batch_size as f64),
            weight_norm: w.iter().map(|v| v * v).sum::<f64>().sqrt(),
            elapsed_secs: started.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {epoch}: reconstruction error {:.5}, |W| {:.4}",
            stats.reconstruction_error,
            stats.weight_norm
        );
        log.epochs.push(stats);
    }
    Ok((model, log))
}
