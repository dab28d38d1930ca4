use ndarray::{Array1, Array2};

use super::dataset::{CombinedDataset, Role, VariableSpec};
use crate::error::{Error, Result};
use crate::expfam::VariableKind;
use crate::gp_core::{cholesky_jittered, unit_gram, CholeskyFactor, KernelHyper};

/// Kinds and roles of the observation channels, plus whether a missingness
/// channel follows them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelLayout {
    pub kinds: Vec<VariableKind>,
    pub roles: Vec<Role>,
    pub nmar: bool,
}

impl ChannelLayout {
    pub fn from_specs(specs: &[VariableSpec], nmar: bool) -> Self {
        Self {
            kinds: specs.iter().map(|s| s.kind).collect(),
            roles: specs.iter().map(|s| s.role).collect(),
            nmar,
        }
    }

    pub fn for_data(data: &CombinedDataset, nmar: bool) -> Self {
        Self::from_specs(data.specs(), nmar)
    }

    /// Number of observation channels.
    pub fn p(&self) -> usize {
        self.kinds.len()
    }

    /// Total channel count, including the missingness channel.
    pub fn n_channels(&self) -> usize {
        self.p() + usize::from(self.nmar)
    }

    pub fn missing_channel(&self) -> Option<usize> {
        self.nmar.then(|| self.p())
    }

    /// Every observation channel carries an intercept; the missingness
    /// channel does not.
    pub fn has_intercept(&self, channel: usize) -> bool {
        channel < self.p()
    }

    /// Only outcome intercepts are sampled. Covariate intercepts stay at
    /// their starting values.
    pub fn samples_intercept(&self, channel: usize) -> bool {
        channel < self.p() && self.roles[channel].is_outcome()
    }

    pub fn has_sigma(&self, channel: usize) -> bool {
        channel < self.p() && self.kinds[channel] == VariableKind::Continuous
    }

    pub fn outcome_channels(&self) -> Vec<usize> {
        (0..self.p()).filter(|&j| self.samples_intercept(j)).collect()
    }

    pub fn continuous_channels(&self) -> Vec<usize> {
        (0..self.p()).filter(|&j| self.has_sigma(j)).collect()
    }
}

/// One whitened GP channel: `f = sqrt(tau1) L_g eta`, where `L_g` factors the
/// unit-amplitude Gram matrix of length-scale group `g`.
#[derive(Debug, Clone, PartialEq)]
pub struct GpChannel {
    pub eta: Array1<f64>,
    pub f: Array1<f64>,
    pub tau1: f64,
    pub group: usize,
}

/// Full state of a GP data-combination chain.
///
/// `tau2` holds one squared length-scale per group; each channel points at its
/// group. With one group per channel every channel has its own
/// [`KernelHyper`]. `lambda0` and `sigma` are indexed by observation channel;
/// entries for covariates (intercept) and non-continuous channels (sigma) are
/// ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub z: Array2<f64>,
    pub channels: Vec<GpChannel>,
    pub tau2: Vec<f64>,
    pub lambda0: Vec<f64>,
    pub sigma: Vec<f64>,
    pub layout: ChannelLayout,
}

impl ModelState {
    /// Build a state from whitened coordinates, computing every `f`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_eta(
        layout: ChannelLayout,
        z: Array2<f64>,
        tau1: Vec<f64>,
        groups: Vec<usize>,
        tau2: Vec<f64>,
        eta: Vec<Array1<f64>>,
        lambda0: Vec<f64>,
        sigma: Vec<f64>,
    ) -> Result<Self> {
        let n = z.nrows();
        let c = layout.n_channels();
        if tau1.len() != c || groups.len() != c || eta.len() != c {
            return Err(Error::Shape(format!("expected {c} channels")));
        }
        if lambda0.len() != layout.p() || sigma.len() != layout.p() {
            return Err(Error::Shape(format!("expected {} intercepts and dispersions", layout.p())));
        }
        if groups.iter().any(|&g| g >= tau2.len()) {
            return Err(Error::Shape("length-scale group out of range".into()));
        }
        if eta.iter().any(|e| e.len() != n) {
            return Err(Error::Shape(format!("every eta must have length {n}")));
        }
        let channels = eta
            .into_iter()
            .zip(tau1.iter().zip(&groups))
            .map(|(eta, (&tau1, &group))| GpChannel {
                f: Array1::zeros(n),
                eta,
                tau1,
                group,
            })
            .collect();
        let mut state = Self {
            z,
            channels,
            tau2,
            lambda0,
            sigma,
            layout,
        };
        state.refresh_f()?;
        Ok(state)
    }

    pub fn n(&self) -> usize {
        self.z.nrows()
    }

    pub fn d(&self) -> usize {
        self.z.ncols()
    }

    pub fn hyper(&self, channel: usize) -> KernelHyper {
        let ch = &self.channels[channel];
        KernelHyper {
            tau1: ch.tau1,
            tau2: self.tau2[ch.group],
        }
    }

    /// Channels belonging to length-scale group `g`.
    pub fn group_members(&self, g: usize) -> Vec<usize> {
        (0..self.channels.len())
            .filter(|&j| self.channels[j].group == g)
            .collect()
    }

    /// Cholesky factor of the unit-amplitude Gram matrix for group `g`.
    pub fn group_factor(&self, g: usize) -> Result<CholeskyFactor> {
        if !(self.tau2[g] > 0.0) {
            return Err(Error::Domain(format!("tau2 = {} must be positive", self.tau2[g])));
        }
        cholesky_jittered(unit_gram(self.z.view(), self.tau2[g]).view())
    }

    /// Recompute every `f` from `eta` through the current factors.
    pub fn refresh_f(&mut self) -> Result<()> {
        for g in 0..self.tau2.len() {
            let members = self.group_members(g);
            if members.is_empty() {
                continue;
            }
            let l = self.group_factor(g)?;
            for j in members {
                let ch = &mut self.channels[j];
                let f = crate::linalg::lower_matvec(l.as_slice(), l.n(), ch.eta.as_slice().expect("contiguous"));
                let s = ch.tau1.sqrt();
                ch.f = f.into_iter().map(|v| s * v).collect();
            }
        }
        Ok(())
    }

    /// Recompute every `eta` from `f` through the current factors.
    pub fn refresh_eta(&mut self) -> Result<()> {
        for g in 0..self.tau2.len() {
            let members = self.group_members(g);
            if members.is_empty() {
                continue;
            }
            let l = self.group_factor(g)?;
            for j in members {
                let ch = &mut self.channels[j];
                let s = ch.tau1.sqrt();
                let scaled: Vec<f64> = ch.f.iter().map(|v| v / s).collect();
                ch.eta = Array1::from(l.solve_lower(&scaled));
            }
        }
        Ok(())
    }

    /// Largest `|f - sqrt(tau1) L eta|` over all channels and units.
    pub fn whitening_error(&self) -> Result<f64> {
        let mut check = self.clone();
        check.refresh_f()?;
        let mut worst = 0.0f64;
        for (a, b) in self.channels.iter().zip(&check.channels) {
            for (x, y) in a.f.iter().zip(&b.f) {
                worst = worst.max((x - y).abs());
            }
        }
        Ok(worst)
    }
}

/// Loadings and intercepts of the linear latent-variable baseline.
///
/// `lambda` has one row per channel (`p`, or `p + 1` with the probit row
/// last); `lambda0` has one intercept per observation channel.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearLoadings {
    pub lambda: Array2<f64>,
    pub lambda0: Array1<f64>,
}

impl LinearLoadings {
    pub fn new(lambda: Array2<f64>, lambda0: Array1<f64>) -> Result<Self> {
        if lambda.iter().chain(lambda0.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Domain("loadings must be finite".into()));
        }
        if lambda.nrows() != lambda0.len() && lambda.nrows() != lambda0.len() + 1 {
            return Err(Error::Shape(format!(
                "{} loading rows for {} intercepts",
                lambda.nrows(),
                lambda0.len()
            )));
        }
        Ok(Self { lambda, lambda0 })
    }

    pub fn d(&self) -> usize {
        self.lambda.ncols()
    }
}
