use crate::expfam::{log_density_unchecked, VariableKind};
use crate::model::{probit_term, CombinedDataset};

/// Observed values plus the current imputations, laid out row-major.
#[derive(Debug, Clone)]
pub(crate) struct Augmented {
    pub n: usize,
    pub p: usize,
    pub kinds: Vec<VariableKind>,
    pub values: Vec<f64>,
    pub observed: Vec<bool>,
    pub obs_by_channel: Vec<Vec<usize>>,
    pub missing: Vec<(usize, usize)>,
    pub m: Vec<u8>,
}

impl Augmented {
    /// Fill each hidden cell with the observed mean of its channel, rounded
    /// for discrete kinds.
    pub fn new(data: &CombinedDataset) -> Self {
        let (n, p) = (data.n(), data.p());
        let kinds: Vec<VariableKind> = data.specs().iter().map(|s| s.kind).collect();
        let mut values = vec![0.0; n * p];
        let mut observed = vec![false; n * p];
        let mut obs_by_channel = vec![Vec::new(); p];
        for i in 0..n {
            for j in 0..p {
                if let Some(v) = data.value(i, j) {
                    values[i * p + j] = v;
                    observed[i * p + j] = true;
                    obs_by_channel[j].push(i);
                }
            }
        }
        let missing = data.missing_cells();
        for j in 0..p {
            let obs = &obs_by_channel[j];
            let mean = if obs.is_empty() {
                0.0
            } else {
                obs.iter().map(|&i| values[i * p + j]).sum::<f64>() / obs.len() as f64
            };
            let fill = match kinds[j] {
                VariableKind::Continuous => mean,
                _ => mean.round(),
            };
            for &(i, jj) in &missing {
                if jj == j {
                    values[i * p + j] = fill;
                }
            }
        }
        Self {
            n,
            p,
            kinds,
            values,
            observed,
            obs_by_channel,
            missing,
            m: data.m().to_vec(),
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.p + j]
    }

    #[inline]
    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        self.observed[i * self.p + j]
    }

    /// Observed-cell log-likelihood of channel `j` under `theta(i)`.
    pub fn observed_ll(&self, j: usize, sd: f64, theta: impl Fn(usize) -> f64) -> f64 {
        let kind = self.kinds[j];
        self.obs_by_channel[j]
            .iter()
            .map(|&i| log_density_unchecked(kind, self.get(i, j), theta(i), sd))
            .sum()
    }

    /// Log-likelihood of channel `j` over all units, imputed cells included.
    pub fn augmented_ll(&self, j: usize, sd: f64, theta: impl Fn(usize) -> f64) -> f64 {
        let kind = self.kinds[j];
        (0..self.n)
            .map(|i| log_density_unchecked(kind, self.get(i, j), theta(i), sd))
            .sum()
    }

    pub fn probit_ll(&self, arg: impl Fn(usize) -> f64) -> f64 {
        (0..self.n).map(|i| probit_term(self.m[i], arg(i))).sum()
    }

    pub fn imputed(&self) -> Vec<f64> {
        self.missing.iter().map(|&(i, j)| self.get(i, j)).collect()
    }

    /// Canonical link applied to the observed mean of channel `j`, kept
    /// away from the boundary of the mean space.
    pub fn link_of_mean(&self, j: usize) -> f64 {
        let obs = &self.obs_by_channel[j];
        if obs.is_empty() {
            return 0.0;
        }
        let k = obs.len() as f64;
        let mean = obs.iter().map(|&i| self.get(i, j)).sum::<f64>() / k;
        let eps = 0.5 / k;
        match self.kinds[j] {
            VariableKind::Continuous => mean,
            VariableKind::Binary => {
                let q = mean.clamp(eps, 1.0 - eps);
                (q / (1.0 - q)).ln()
            }
            VariableKind::Count => mean.max(eps).ln(),
        }
    }

    /// Sample standard deviation of the observed values of channel `j`.
    pub fn observed_sd(&self, j: usize) -> f64 {
        let obs = &self.obs_by_channel[j];
        if obs.len() < 2 {
            return 1.0;
        }
        let k = obs.len() as f64;
        let mean = obs.iter().map(|&i| self.get(i, j)).sum::<f64>() / k;
        let var = obs.iter().map(|&i| (self.get(i, j) - mean).powi(2)).sum::<f64>() / (k - 1.0);
        if var > 0.0 {
            var.sqrt()
        } else {
            1.0
        }
    }
}
