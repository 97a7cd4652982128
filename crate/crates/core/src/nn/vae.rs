//! Small fully-connected variational autoencoder.
//!
//! Compresses a depth frame into a low-dimensional latent. The encoder and
//! decoder are single-hidden-layer MLPs; the latent is sampled with the
//! reparameterization trick during training and taken at the mean during
//! inference.

use ndarray::Array2;
use rand::Rng;

use super::adam::Adam;
use super::{Activation, Dense, NnError};
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct Vae<T> {
    pub enc_hidden: Dense<T>,
    pub enc_mu: Dense<T>,
    pub enc_logvar: Dense<T>,
    pub dec_hidden: Dense<T>,
    pub dec_out: Dense<T>,
}

/// The two ELBO terms of one batch.
#[derive(Clone, Copy, Debug)]
pub struct VaeLoss<T> {
    /// Mean squared reconstruction error over batch and pixels.
    pub reconstruction: T,
    /// KL divergence to the unit Gaussian, mean over the batch.
    pub kl: T,
}

impl<T: Scalar> Vae<T> {
    pub fn new<R: Rng>(rng: &mut R, input: usize, hidden: usize, latent: usize) -> Self {
        Vae {
            enc_hidden: Dense::new(rng, input, hidden, Activation::Tanh),
            enc_mu: Dense::new(rng, hidden, latent, Activation::Linear),
            enc_logvar: Dense::new(rng, hidden, latent, Activation::Linear),
            dec_hidden: Dense::new(rng, latent, hidden, Activation::Tanh),
            dec_out: Dense::new(rng, hidden, input, Activation::Sigmoid),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Vae {
            enc_hidden: self.enc_hidden.zeros_like(),
            enc_mu: self.enc_mu.zeros_like(),
            enc_logvar: self.enc_logvar.zeros_like(),
            dec_hidden: self.dec_hidden.zeros_like(),
            dec_out: self.dec_out.zeros_like(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.enc_hidden.input_dim()
    }

    pub fn hidden_dim(&self) -> usize {
        self.enc_hidden.output_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.enc_mu.output_dim()
    }

    /// Encoder distribution parameters for a batch of frames.
    pub fn encode(&self, x: &Array2<T>) -> (Array2<T>, Array2<T>) {
        let h = self.enc_hidden.forward(x);
        (self.enc_mu.forward(&h), self.enc_logvar.forward(&h))
    }

    /// Deterministic latent (the posterior mean) for a single frame.
    pub fn encode_mean(&self, frame: &[T]) -> Vec<T> {
        let x = Array2::from_shape_vec((1, frame.len()), frame.to_vec())
            .expect("frame shape");
        let (mu, _) = self.encode(&x);
        mu.row(0).to_vec()
    }

    /// Posterior means for a batch of frames.
    pub fn encode_mean_batch(&self, frames: &Array2<T>) -> Array2<T> {
        self.encode(frames).0
    }

    pub fn to_checkpoint(&self) -> crate::checkpoint::Checkpoint {
        let mut c = crate::checkpoint::Checkpoint::new("vae");
        c.set_meta("input", self.input_dim());
        c.set_meta("hidden", self.hidden_dim());
        c.set_meta("latent", self.latent_dim());
        c.push_array("params", self.params_flat().iter().map(|v| v.f64()).collect());
        c
    }

    pub fn from_checkpoint(
        c: &crate::checkpoint::Checkpoint,
    ) -> Result<Self, crate::checkpoint::CheckpointError> {
        c.expect_kind("vae")?;
        let input: usize = c.meta_parse("input")?;
        let hidden: usize = c.meta_parse("hidden")?;
        let latent: usize = c.meta_parse("latent")?;
        let mut rng = crate::rng::SeedStream::root(0).rng();
        let mut vae = Vae::new(&mut rng, input, hidden, latent);
        let params: Vec<T> = c
            .array_exact("params", vae.num_params())?
            .iter()
            .map(|&v| T::c(v))
            .collect();
        vae.set_params_flat(&params);
        Ok(vae)
    }

    pub fn decode(&self, z: &Array2<T>) -> Array2<T> {
        let h = self.dec_hidden.forward(z);
        self.dec_out.forward(&h)
    }

    /// ELBO terms for a batch with externally supplied reparameterization
    /// noise (same shape as the latent batch).
    pub fn loss(&self, x: &Array2<T>, eps: &Array2<T>) -> VaeLoss<T> {
        let (l, _, _) = self.forward_detailed(x, eps);
        l
    }

    fn forward_detailed(
        &self,
        x: &Array2<T>,
        eps: &Array2<T>,
    ) -> (VaeLoss<T>, ForwardCache<T>, Array2<T>) {
        let batch = T::c(x.nrows() as f64);
        let h_e = self.enc_hidden.forward(x);
        let mu = self.enc_mu.forward(&h_e);
        let lv = self.enc_logvar.forward(&h_e);
        let sigma = lv.mapv(|v| (v * T::c(0.5)).exp());
        let mut z = sigma.clone();
        z *= eps;
        z += &mu;
        let h_d = self.dec_hidden.forward(&z);
        let xhat = self.dec_out.forward(&h_d);

        let n = T::c(x.len() as f64);
        let recon = xhat
            .iter()
            .zip(x.iter())
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<T>()
            / n;
        let kl = mu
            .iter()
            .zip(lv.iter())
            .map(|(&m, &l)| -T::c(0.5) * (T::one() + l - m * m - l.exp()))
            .sum::<T>()
            / batch;

        (
            VaeLoss { reconstruction: recon, kl },
            ForwardCache { h_e, mu, lv, sigma, z, h_d },
            xhat,
        )
    }

    /// Loss terms and gradients of `reconstruction + kl_weight * kl`.
    pub fn loss_and_grads(
        &self,
        x: &Array2<T>,
        eps: &Array2<T>,
        kl_weight: T,
    ) -> (VaeLoss<T>, Vae<T>) {
        let (loss, cache, xhat) = self.forward_detailed(x, eps);
        let mut grad = self.zeros_like();
        let batch = T::c(x.nrows() as f64);
        let n = T::c(x.len() as f64);

        let mut dxhat = xhat.clone();
        dxhat -= x;
        dxhat.mapv_inplace(|d| d * T::c(2.0) / n);
        let dh_d = self.dec_out.backward(&cache.h_d, &xhat, &dxhat, &mut grad.dec_out);
        let dz = self.dec_hidden.backward(&cache.z, &cache.h_d, &dh_d, &mut grad.dec_hidden);

        // dL/dmu = dz + kl_weight * mu / batch
        let mut dmu = dz.clone();
        ndarray::Zip::from(&mut dmu).and(&cache.mu).for_each(|d, &m| {
            *d = *d + kl_weight * m / batch;
        });
        // dL/dlogvar = dz * eps * sigma / 2 + kl_weight * (exp(lv) - 1) / (2 * batch)
        let mut dlv = dz;
        ndarray::Zip::from(&mut dlv)
            .and(eps)
            .and(&cache.sigma)
            .and(&cache.lv)
            .for_each(|d, &e, &s, &l| {
                *d = *d * e * s * T::c(0.5)
                    + kl_weight * (l.exp() - T::one()) * T::c(0.5) / batch;
            });

        let dh1 = self.enc_mu.backward(&cache.h_e, &cache.mu, &dmu, &mut grad.enc_mu);
        let dh2 = self.enc_logvar.backward(&cache.h_e, &cache.lv, &dlv, &mut grad.enc_logvar);
        let mut dh = dh1;
        dh += &dh2;
        self.enc_hidden.backward(x, &cache.h_e, &dh, &mut grad.enc_hidden);

        (loss, grad)
    }

    fn layers(&self) -> [&Dense<T>; 5] {
        [&self.enc_hidden, &self.enc_mu, &self.enc_logvar, &self.dec_hidden, &self.dec_out]
    }

    fn layers_mut(&mut self) -> [&mut Dense<T>; 5] {
        [
            &mut self.enc_hidden,
            &mut self.enc_mu,
            &mut self.enc_logvar,
            &mut self.dec_hidden,
            &mut self.dec_out,
        ]
    }

    pub fn num_params(&self) -> usize {
        self.layers().iter().map(|l| l.num_params()).sum()
    }

    pub fn params_flat(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in self.layers() {
            l.write_params(&mut out);
        }
        out
    }

    pub fn set_params_flat(&mut self, src: &[T]) {
        let mut cursor = 0;
        for l in self.layers_mut() {
            l.read_params(src, &mut cursor);
        }
        debug_assert_eq!(cursor, src.len());
    }
}

/// Intermediate activations of one forward pass.
struct ForwardCache<T> {
    h_e: Array2<T>,
    mu: Array2<T>,
    lv: Array2<T>,
    sigma: Array2<T>,
    z: Array2<T>,
    h_d: Array2<T>,
}

#[derive(Clone, Debug)]
pub struct VaeTrainConfig<T> {
    pub epochs: usize,
    pub learning_rate: T,
    pub batch_size: usize,
    pub kl_weight: T,
    pub seed: u64,
}

impl<T: Scalar> Default for VaeTrainConfig<T> {
    fn default() -> Self {
        VaeTrainConfig {
            epochs: 200,
            learning_rate: T::c(0.001),
            batch_size: 256,
            kl_weight: T::c(0.001),
            seed: 0,
        }
    }
}

/// Per-epoch loss record.
#[derive(Clone, Copy, Debug)]
pub struct VaeEpochLoss {
    pub reconstruction: f64,
    pub kl: f64,
    pub total: f64,
}

/// Trains a VAE on frames (one row per frame, pixel values in [0, 1]).
pub fn train_vae<T: Scalar>(
    mut vae: Vae<T>,
    frames: &Array2<T>,
    cfg: &VaeTrainConfig<T>,
) -> Result<(Vae<T>, Vec<VaeEpochLoss>), NnError> {
    if frames.nrows() == 0 {
        return Err(NnError::EmptyDataset);
    }
    let mut adam = Adam::new(cfg.learning_rate, vae.num_params());
    let mut params = vae.params_flat();
    let mut curve = Vec::with_capacity(cfg.epochs);
    let n = frames.nrows();
    let latent = vae.latent_dim();

    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..cfg.epochs {
        let mut rng = crate::rng::SeedStream::root(cfg.seed)
            .tag("vae-epoch")
            .index(epoch as u64)
            .rng();
        use rand::seq::SliceRandom;
        order.shuffle(&mut rng);

        let mut sums = (T::zero(), T::zero());
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let mut x = Array2::<T>::zeros((chunk.len(), frames.ncols()));
            for (r, &idx) in chunk.iter().enumerate() {
                x.row_mut(r).assign(&frames.row(idx));
            }
            let eps =
                Array2::from_shape_fn((chunk.len(), latent), |_| T::standard_normal(&mut rng));
            let (loss, grad) = vae.loss_and_grads(&x, &eps, cfg.kl_weight);
            if !loss.reconstruction.is_finite() || !loss.kl.is_finite() {
                return Err(NnError::NonFinite("vae loss"));
            }
            adam.step(&mut params, &grad.params_flat())?;
            vae.set_params_flat(&params);
            sums.0 += loss.reconstruction;
            sums.1 += loss.kl;
            batches += 1;
        }
        let b = batches.max(1) as f64;
        let recon = sums.0.f64() / b;
        let kl = sums.1.f64() / b;
        curve.push(VaeEpochLoss { reconstruction: recon, kl, total: recon + cfg.kl_weight.f64() * kl });
    }
    Ok((vae, curve))
}
