//! Sweeps of the linear latent-variable baseline, `theta_i = lambda0 + Lambda z_i`.

use ndarray::{Array2, ArrayView1};
use rand_distr::{Distribution, StandardNormal};

use super::adapt::Slot;
use super::augmented::Augmented;
use super::{mh_accept, McmcConfig};
use crate::error::{Error, Result};
use crate::expfam::{log_density_unchecked, sample, CanonicalParam};
use crate::model::{log_half_normal, log_std_normal, probit_term, ChannelLayout, LinearLoadings};
use crate::rng::Rng;

/// State of a linear latent-variable chain.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearState {
    pub z: Array2<f64>,
    pub loadings: LinearLoadings,
    /// Per observation channel; entries for non-continuous channels are ignored.
    pub sigma: Vec<f64>,
    pub layout: ChannelLayout,
}

impl LinearState {
    pub fn n(&self) -> usize {
        self.z.nrows()
    }

    pub fn d(&self) -> usize {
        self.z.ncols()
    }

    /// `theta` of channel `j` (or the probit argument for the missingness row).
    #[inline]
    pub fn theta(&self, i: usize, j: usize) -> f64 {
        self.theta_at(self.z.row(i), j)
    }

    #[inline]
    fn theta_at(&self, z: ArrayView1<'_, f64>, j: usize) -> f64 {
        let b = if j < self.layout.p() { self.loadings.lambda0[j] } else { 0.0 };
        b + self.loadings.lambda.row(j).dot(&z)
    }

    pub fn sd(&self, j: usize) -> f64 {
        if self.layout.has_sigma(j) {
            self.sigma[j]
        } else {
            1.0
        }
    }
}

fn normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub(crate) struct LinearEngine {
    pub st: LinearState,
    pub aug: Augmented,
    z_slot: Slot,
    row_slots: Vec<Slot>,
    lambda0_slots: Vec<Slot>,
    sigma_slots: Vec<Slot>,
}

impl LinearEngine {
    pub fn new(st: LinearState, aug: Augmented, cfg: &McmcConfig) -> Self {
        let v = &cfg.step_var;
        let p = st.layout.p();
        Self {
            z_slot: Slot::new("z", v.z),
            row_slots: (0..st.layout.n_channels()).map(|_| Slot::new("loadings", v.loadings)).collect(),
            lambda0_slots: (0..p).map(|_| Slot::new("lambda0", v.lambda0)).collect(),
            sigma_slots: (0..p).map(|_| Slot::new("sigma", v.sigma)).collect(),
            st,
            aug,
        }
    }

    pub fn slots(&self) -> impl Iterator<Item = &Slot> {
        std::iter::once(&self.z_slot)
            .chain(&self.row_slots)
            .chain(&self.lambda0_slots)
            .chain(self.sigma_slots.iter().enumerate().filter(|(j, _)| self.st.layout.has_sigma(*j)).map(|(_, s)| s))
    }

    fn is_missing_channel(&self, j: usize) -> bool {
        j == self.st.layout.p()
    }

    fn cell_ll(&self, i: usize, j: usize, theta: f64) -> f64 {
        if self.is_missing_channel(j) {
            probit_term(self.aug.m[i], theta)
        } else if self.aug.is_observed(i, j) {
            log_density_unchecked(self.aug.kinds[j], self.aug.get(i, j), theta, self.st.sd(j))
        } else {
            0.0
        }
    }

    fn channel_ll(&self, j: usize, theta: impl Fn(usize) -> f64) -> f64 {
        if self.is_missing_channel(j) {
            self.aug.probit_ll(theta)
        } else {
            self.aug.observed_ll(j, self.st.sd(j), theta)
        }
    }

    pub fn loglik(&self) -> f64 {
        (0..self.st.layout.n_channels())
            .map(|j| self.channel_ll(j, |i| self.st.theta(i, j)))
            .sum()
    }

    pub fn log_posterior(&self) -> f64 {
        self.loglik() + crate::model::log_prior_linear(self.st.z.view(), &self.st.loadings, &self.st.sigma, &self.st.layout)
    }

    pub fn sweep(&mut self, rng: &mut Rng, adapt: Option<f64>) -> Result<()> {
        self.step1_update_z(rng, adapt);
        self.update_loadings(rng, adapt);
        self.step5_update_sigma(rng, adapt);
        self.step6_impute(rng)?;
        self.step4_update_intercepts(rng, adapt);
        Ok(())
    }

    pub fn step1_update_z(&mut self, rng: &mut Rng, adapt: Option<f64>) {
        let sd = self.z_slot.sd();
        if sd == 0.0 {
            return;
        }
        let c = self.st.layout.n_channels();
        let d = self.st.d();
        let mut z_new = ndarray::Array1::<f64>::zeros(d);
        for i in 0..self.st.n() {
            for k in 0..d {
                z_new[k] = self.st.z[[i, k]] + sd * normal(rng);
            }
            let mut delta: f64 = z_new.iter().map(|&v| log_std_normal(v)).sum::<f64>()
                - self.st.z.row(i).iter().map(|&v| log_std_normal(v)).sum::<f64>();
            for j in 0..c {
                delta += self.cell_ll(i, j, self.st.theta_at(z_new.view(), j)) - self.cell_ll(i, j, self.st.theta(i, j));
            }
            let accepted = mh_accept(delta, 0.0, rng);
            self.z_slot.record(accepted, adapt);
            if accepted {
                self.st.z.row_mut(i).assign(&z_new);
            }
        }
    }

    /// Random walk on each loading row, including the probit row under NMAR.
    pub fn update_loadings(&mut self, rng: &mut Rng, adapt: Option<f64>) {
        let d = self.st.d();
        for j in 0..self.st.layout.n_channels() {
            let sd = self.row_slots[j].sd();
            if sd == 0.0 {
                continue;
            }
            let old_row = self.st.loadings.lambda.row(j).to_owned();
            let new_row: ndarray::Array1<f64> = old_row.iter().map(|&v| v + sd * normal(rng)).collect();
            let b = if j < self.st.layout.p() { self.st.loadings.lambda0[j] } else { 0.0 };
            let z = &self.st.z;
            let old_ll = self.channel_ll(j, |i| self.st.theta(i, j));
            let new_ll = self.channel_ll(j, |i| b + new_row.dot(&z.row(i)));
            let dprior: f64 = (0..d).map(|k| log_std_normal(new_row[k]) - log_std_normal(old_row[k])).sum();
            let accepted = mh_accept(new_ll - old_ll + dprior, 0.0, rng);
            self.row_slots[j].record(accepted, adapt);
            if accepted {
                self.st.loadings.lambda.row_mut(j).assign(&new_row);
            }
        }
    }

    /// Intercepts of every observation channel against the augmented data.
    pub fn step4_update_intercepts(&mut self, rng: &mut Rng, adapt: Option<f64>) {
        for j in 0..self.st.layout.p() {
            let sd = self.lambda0_slots[j].sd();
            if sd == 0.0 {
                continue;
            }
            let old = self.st.loadings.lambda0[j];
            let new = old + sd * normal(rng);
            let s = self.st.sd(j);
            let row = self.st.loadings.lambda.row(j);
            let lin: Vec<f64> = (0..self.st.n()).map(|i| row.dot(&self.st.z.row(i))).collect();
            let delta = self.aug.augmented_ll(j, s, |i| new + lin[i]) - self.aug.augmented_ll(j, s, |i| old + lin[i])
                + log_std_normal(new)
                - log_std_normal(old);
            let accepted = mh_accept(delta, 0.0, rng);
            self.lambda0_slots[j].record(accepted, adapt);
            if accepted {
                self.st.loadings.lambda0[j] = new;
            }
        }
    }

    pub fn step5_update_sigma(&mut self, rng: &mut Rng, adapt: Option<f64>) {
        for j in self.st.layout.continuous_channels() {
            let sd = self.sigma_slots[j].sd();
            if sd == 0.0 {
                continue;
            }
            let old = self.st.sigma[j];
            let new = old + sd * normal(rng);
            let accepted = if new > 0.0 {
                let theta: Vec<f64> = (0..self.st.n()).map(|i| self.st.theta(i, j)).collect();
                let delta = self.aug.observed_ll(j, new, |i| theta[i]) - self.aug.observed_ll(j, old, |i| theta[i])
                    + log_half_normal(new)
                    - log_half_normal(old);
                mh_accept(delta, 0.0, rng)
            } else {
                false
            };
            self.sigma_slots[j].record(accepted, adapt);
            if accepted {
                self.st.sigma[j] = new;
            }
        }
    }

    pub fn step6_impute(&mut self, rng: &mut Rng) -> Result<()> {
        let p = self.aug.p;
        for idx in 0..self.aug.missing.len() {
            let (i, j) = self.aug.missing[idx];
            let param = CanonicalParam::new(self.st.theta(i, j), self.st.sd(j))?;
            self.aug.values[i * p + j] = sample(self.aug.kinds[j], param, rng)?;
        }
        Ok(())
    }
}

pub(crate) fn init_report(e: &LinearEngine) -> Error {
    Error::Init(format!(
        "non-finite log posterior at the starting state; loglik {:.6e}, log prior {:.6e}",
        e.loglik(),
        e.log_posterior() - e.loglik()
    ))
}
