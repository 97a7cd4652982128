//! Covariance Matrix Adaptation Evolution Strategy (maximization).
//!
//! Standard weighted-recombination CMA-ES: cumulative step-size adaptation,
//! rank-one plus rank-mu covariance updates, and strategy parameters derived
//! from the problem dimension by the usual formulas. The eigendecomposition
//! of the covariance is cached and refreshed lazily, which keeps the 531-d
//! policy optimization cheap.

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::eigen::sym_eigen;
use crate::rng::SeedStream;
use crate::scalar::Scalar;

#[derive(Debug, thiserror::Error)]
pub enum CmaesError {
    #[error("population size must be >= 4, got {0}")]
    PopulationTooSmall(usize),
    #[error("expected {expected} fitness values, got {got}")]
    WrongCount { expected: usize, got: usize },
    #[error("non-finite fitness at candidate {0}")]
    NonFiniteFitness(usize),
    #[error("covariance eigenvalue {0} is not positive")]
    NonPositiveEigenvalue(f64),
}

/// Optimizer configuration.
#[derive(Clone, Copy, Debug)]
pub struct EsConfig<T> {
    /// Candidates per generation (lambda).
    pub population: usize,
    /// Virtual episodes averaged per candidate evaluation.
    pub episodes_per_candidate: usize,
    pub max_generations: usize,
    pub sigma0: T,
    pub seed: u64,
    /// Stop when the best-ever fitness improves by less than `tol` over
    /// `window` consecutive generations.
    pub plateau: Option<PlateauConfig<T>>,
}

#[derive(Clone, Copy, Debug)]
pub struct PlateauConfig<T> {
    pub window: usize,
    pub tol: T,
}

impl<T: Scalar> Default for EsConfig<T> {
    fn default() -> Self {
        EsConfig {
            population: 32,
            episodes_per_candidate: 16,
            max_generations: 200,
            sigma0: T::c(0.3),
            seed: 0,
            plateau: None,
        }
    }
}

/// Cap on the covariance eigenvalue condition number; worse conditioning is
/// repaired by flooring the small eigenvalues.
const CONDITION_CAP: f64 = 1e14;

struct EigCache<T> {
    /// Eigenvector basis, columns.
    b: Array2<T>,
    /// Square roots of the (floored) eigenvalues.
    d: Vec<T>,
    /// C^(-1/2), used by the step-size path update.
    inv_sqrt: Array2<T>,
}

/// Search-distribution state.
pub struct CmaesState<T> {
    dim: usize,
    lambda: usize,
    mu: usize,
    weights: Vec<T>,
    mu_eff: T,
    c_sigma: T,
    d_sigma: T,
    c_c: T,
    c1: T,
    c_mu: T,
    chi_n: T,
    mean: Array1<T>,
    sigma: T,
    cov: Array2<T>,
    p_sigma: Array1<T>,
    p_c: Array1<T>,
    generation: usize,
    eig: Option<EigCache<T>>,
    eig_generation: usize,
    eig_gap: usize,
    repair_events: usize,
}

impl<T: Scalar> CmaesState<T> {
    pub fn new(x0: &[T], sigma0: T, lambda: usize) -> Result<Self, CmaesError> {
        if lambda < 4 {
            return Err(CmaesError::PopulationTooSmall(lambda));
        }
        let n = x0.len();
        let nf = T::c(n as f64);
        let mu = lambda / 2;

        let raw: Vec<T> = (1..=mu)
            .map(|i| (T::c(mu as f64) + T::c(0.5)).ln() - T::c(i as f64).ln())
            .collect();
        let sum: T = raw.iter().cloned().sum();
        let weights: Vec<T> = raw.iter().map(|&w| w / sum).collect();
        let mu_eff = T::one() / weights.iter().map(|&w| w * w).sum::<T>();

        let c_sigma = (mu_eff + T::c(2.0)) / (nf + mu_eff + T::c(5.0));
        let d_sigma = T::one()
            + T::c(2.0) * (((mu_eff - T::one()) / (nf + T::one())).sqrt() - T::one()).max(T::zero())
            + c_sigma;
        let c_c = (T::c(4.0) + mu_eff / nf) / (nf + T::c(4.0) + T::c(2.0) * mu_eff / nf);
        let c1 = T::c(2.0) / ((nf + T::c(1.3)) * (nf + T::c(1.3)) + mu_eff);
        let c_mu = (T::one() - c1).min(
            T::c(2.0) * (mu_eff - T::c(2.0) + T::one() / mu_eff)
                / ((nf + T::c(2.0)) * (nf + T::c(2.0)) + mu_eff),
        );
        let chi_n = nf.sqrt()
            * (T::one() - T::one() / (T::c(4.0) * nf)
                + T::one() / (T::c(21.0) * nf * nf));

        let gap = (T::one() / ((c1 + c_mu) * nf * T::c(10.0))).f64();
        let eig_gap = (gap.floor() as usize).max(1);

        Ok(CmaesState {
            dim: n,
            lambda,
            mu,
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c1,
            c_mu,
            chi_n,
            mean: Array1::from_vec(x0.to_vec()),
            sigma: sigma0,
            cov: Array2::eye(n),
            p_sigma: Array1::zeros(n),
            p_c: Array1::zeros(n),
            generation: 0,
            eig: None,
            eig_generation: 0,
            eig_gap,
            repair_events: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> usize {
        self.lambda
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    pub fn mean(&self) -> &Array1<T> {
        &self.mean
    }

    pub fn covariance(&self) -> &Array2<T> {
        &self.cov
    }

    /// Times the eigenvalue floor had to repair ill-conditioning.
    pub fn repair_events(&self) -> usize {
        self.repair_events
    }

    fn refresh_eig(&mut self) -> Result<(), CmaesError> {
        let eig = sym_eigen(&self.cov);
        let max_ev = eig.values.iter().cloned().fold(T::zero(), T::max);
        if !(max_ev > T::zero()) || !max_ev.is_finite() {
            return Err(CmaesError::NonPositiveEigenvalue(max_ev.f64()));
        }
        let floor = max_ev / T::c(CONDITION_CAP);
        let mut repaired = false;
        let vals: Vec<T> = eig
            .values
            .iter()
            .map(|&v| {
                if v < floor {
                    repaired = true;
                    floor
                } else {
                    v
                }
            })
            .collect();
        if repaired {
            self.repair_events += 1;
            // Rebuild C from the floored spectrum so state and cache agree.
            let mut scaled = eig.vectors.clone();
            for (j, &v) in vals.iter().enumerate() {
                for r in 0..self.dim {
                    scaled[[r, j]] = scaled[[r, j]] * v;
                }
            }
            self.cov = scaled.dot(&eig.vectors.t());
        }
        let d: Vec<T> = vals.iter().map(|&v| v.sqrt()).collect();
        let mut b_inv = eig.vectors.clone();
        for (j, &dv) in d.iter().enumerate() {
            for r in 0..self.dim {
                b_inv[[r, j]] = b_inv[[r, j]] / dv;
            }
        }
        let inv_sqrt = b_inv.dot(&eig.vectors.t());
        self.eig = Some(EigCache { b: eig.vectors, d, inv_sqrt });
        self.eig_generation = self.generation;
        Ok(())
    }

    fn ensure_eig(&mut self) -> Result<(), CmaesError> {
        if self.eig.is_none() || self.generation - self.eig_generation >= self.eig_gap {
            self.refresh_eig()?;
        }
        Ok(())
    }

    /// Samples `lambda` candidates from N(mean, sigma^2 C).
    pub fn ask<R: Rng>(&mut self, rng: &mut R) -> Result<Vec<Vec<T>>, CmaesError> {
        self.ensure_eig()?;
        let cache = self.eig.as_ref().unwrap();
        let mut out = Vec::with_capacity(self.lambda);
        for _ in 0..self.lambda {
            let mut z = Array1::from_shape_fn(self.dim, |_| T::standard_normal(rng));
            for (k, zv) in z.iter_mut().enumerate() {
                *zv = *zv * cache.d[k];
            }
            let y = cache.b.dot(&z);
            let x: Vec<T> = (0..self.dim).map(|k| self.mean[k] + self.sigma * y[k]).collect();
            out.push(x);
        }
        Ok(out)
    }

    /// Rank-based update from one generation of evaluated candidates
    /// (higher fitness is better).
    pub fn tell(&mut self, candidates: &[Vec<T>], fitness: &[T]) -> Result<(), CmaesError> {
        if candidates.len() != self.lambda || fitness.len() != self.lambda {
            return Err(CmaesError::WrongCount {
                expected: self.lambda,
                got: candidates.len().min(fitness.len()),
            });
        }
        for (i, f) in fitness.iter().enumerate() {
            if !f.is_finite() {
                return Err(CmaesError::NonFiniteFitness(i));
            }
        }
        self.ensure_eig()?;

        let mut order: Vec<usize> = (0..self.lambda).collect();
        order.sort_by(|&a, &b| fitness[b].partial_cmp(&fitness[a]).unwrap());

        // Selected steps y_i = (x_i - m) / sigma and their recombination.
        let mut y_sel = Array2::<T>::zeros((self.mu, self.dim));
        for (rank, &idx) in order.iter().take(self.mu).enumerate() {
            for k in 0..self.dim {
                y_sel[[rank, k]] = (candidates[idx][k] - self.mean[k]) / self.sigma;
            }
        }
        let mut y_w = Array1::<T>::zeros(self.dim);
        for rank in 0..self.mu {
            let w = self.weights[rank];
            for k in 0..self.dim {
                y_w[k] += w * y_sel[[rank, k]];
            }
        }

        // Mean update (c_m = 1).
        for k in 0..self.dim {
            self.mean[k] += self.sigma * y_w[k];
        }

        // Step-size path.
        let cache = self.eig.as_ref().unwrap();
        let c_inv_y = cache.inv_sqrt.dot(&y_w);
        let cs_coeff = (self.c_sigma * (T::c(2.0) - self.c_sigma) * self.mu_eff).sqrt();
        for k in 0..self.dim {
            self.p_sigma[k] =
                (T::one() - self.c_sigma) * self.p_sigma[k] + cs_coeff * c_inv_y[k];
        }
        let ps_norm = self.p_sigma.iter().map(|&v| v * v).sum::<T>().sqrt();

        let decay = T::one()
            - (T::one() - self.c_sigma).powi(2 * (self.generation as i32 + 1));
        let h_sigma = if ps_norm / decay.sqrt()
            < (T::c(1.4) + T::c(2.0) / (T::c(self.dim as f64) + T::one())) * self.chi_n
        {
            T::one()
        } else {
            T::zero()
        };

        // Covariance path.
        let cc_coeff = (self.c_c * (T::c(2.0) - self.c_c) * self.mu_eff).sqrt();
        for k in 0..self.dim {
            self.p_c[k] = (T::one() - self.c_c) * self.p_c[k] + h_sigma * cc_coeff * y_w[k];
        }

        // Covariance update: decay + rank-one + rank-mu.
        let delta_h = (T::one() - h_sigma) * self.c_c * (T::c(2.0) - self.c_c);
        let base = T::one() - self.c1 - self.c_mu + self.c1 * delta_h;
        // Weighted selected steps for the rank-mu term via one matmul.
        let mut y_scaled = y_sel;
        for rank in 0..self.mu {
            let sw = self.weights[rank].sqrt();
            for k in 0..self.dim {
                y_scaled[[rank, k]] = y_scaled[[rank, k]] * sw;
            }
        }
        let rank_mu = y_scaled.t().dot(&y_scaled);
        for i in 0..self.dim {
            for j in 0..self.dim {
                self.cov[[i, j]] = base * self.cov[[i, j]]
                    + self.c1 * self.p_c[i] * self.p_c[j]
                    + self.c_mu * rank_mu[[i, j]];
            }
        }
        // Keep C numerically symmetric.
        for i in 0..self.dim {
            for j in 0..i {
                let s = (self.cov[[i, j]] + self.cov[[j, i]]) * T::c(0.5);
                self.cov[[i, j]] = s;
                self.cov[[j, i]] = s;
            }
        }

        // Step-size update, exponent damped to a sane range.
        let exponent = ((self.c_sigma / self.d_sigma) * (ps_norm / self.chi_n - T::one()))
            .min(T::one())
            .max(-T::one());
        self.sigma = self.sigma * exponent.exp();

        self.generation += 1;
        Ok(())
    }
}

/// One generation's summary in the optimization history.
#[derive(Clone, Copy, Debug)]
pub struct EsHistoryRow {
    pub generation: usize,
    pub best: f64,
    pub mean: f64,
    pub worst: f64,
    pub sigma: f64,
    /// Best fitness seen in any generation up to this one.
    pub best_so_far: f64,
}

pub struct EsResult<T> {
    pub best: Vec<T>,
    pub best_fitness: T,
    pub history: Vec<EsHistoryRow>,
    pub generations: usize,
    pub evaluations: usize,
}

/// Evaluates a whole generation of candidates; higher is better.
pub trait BatchObjective<T> {
    fn evaluate(&mut self, generation: usize, candidates: &[Vec<T>]) -> Vec<T>;
}

impl<T, F> BatchObjective<T> for F
where
    F: FnMut(usize, &[Vec<T>]) -> Vec<T>,
{
    fn evaluate(&mut self, generation: usize, candidates: &[Vec<T>]) -> Vec<T> {
        self(generation, candidates)
    }
}

/// Ask/tell loop with best-ever tracking and optional plateau stopping.
pub fn optimize<T: Scalar>(
    objective: &mut dyn BatchObjective<T>,
    x0: &[T],
    cfg: &EsConfig<T>,
) -> Result<EsResult<T>, CmaesError> {
    optimize_with_callback(objective, x0, cfg, &mut |_, _| {})
}

/// [`optimize`] with a per-generation callback (used for checkpointing).
pub fn optimize_with_callback<T: Scalar>(
    objective: &mut dyn BatchObjective<T>,
    x0: &[T],
    cfg: &EsConfig<T>,
    on_generation: &mut dyn FnMut(&EsHistoryRow, &[T]),
) -> Result<EsResult<T>, CmaesError> {
    let mut state = CmaesState::new(x0, cfg.sigma0, cfg.population)?;
    let mut rng = SeedStream::root(cfg.seed).tag("cmaes").rng();
    let mut best: Vec<T> = x0.to_vec();
    let mut best_fitness = T::neg_infinity();
    let mut history = Vec::with_capacity(cfg.max_generations);
    let mut evaluations = 0usize;

    for g in 0..cfg.max_generations {
        let candidates = state.ask(&mut rng)?;
        let fitness = objective.evaluate(g, &candidates);
        assert_eq!(fitness.len(), candidates.len(), "objective returned wrong count");
        evaluations += candidates.len();

        let mut gen_best = T::neg_infinity();
        let mut gen_worst = T::infinity();
        let mut gen_sum = T::zero();
        for (c, &f) in candidates.iter().zip(&fitness) {
            if f > gen_best {
                gen_best = f;
            }
            if f < gen_worst {
                gen_worst = f;
            }
            gen_sum += f;
            if f > best_fitness {
                best_fitness = f;
                best = c.clone();
            }
        }
        state.tell(&candidates, &fitness)?;

        let row = EsHistoryRow {
            generation: g,
            best: gen_best.f64(),
            mean: (gen_sum / T::c(candidates.len() as f64)).f64(),
            worst: gen_worst.f64(),
            sigma: state.sigma().f64(),
            best_so_far: best_fitness.f64(),
        };
        on_generation(&row, &best);
        history.push(row);

        if let Some(plateau) = cfg.plateau {
            if plateau.window > 0 && history.len() > plateau.window {
                let now = history.last().unwrap().best_so_far;
                let then = history[history.len() - 1 - plateau.window].best_so_far;
                if T::c(now - then) <= plateau.tol {
                    break;
                }
            }
        }
    }

    let generations = history.len();
    Ok(EsResult { best, best_fitness, history, generations, evaluations })
}
