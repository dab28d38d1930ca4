//! Sweeps of the GP data-combination sampler.
//!
//! Channels in one length-scale group share the unit-amplitude Gram matrix
//! `A = exp(-|z - z'|^2 / (2 tau2))`, so `f_j = sqrt(tau1_j) u_j` with
//! `u_j ~ N(0, A + jitter I)`.

use rand_distr::{Distribution, StandardNormal};

use super::adapt::Slot;
use super::augmented::Augmented;
use super::{mh_accept, McmcConfig};
use crate::error::{Error, Result};
use crate::expfam::{log_density_unchecked, sample, CanonicalParam};
use crate::gp_core::{cholesky_jittered, unit_gram, CholeskyFactor};
use crate::linalg::{axpy, dot, lower_matvec};
use crate::model::{log_half_normal, log_inv_gamma, log_std_normal, probit_term, ModelState};
use crate::rng::Rng;

pub(crate) struct GpEngine {
    pub st: ModelState,
    pub aug: Augmented,
    factors: Vec<Option<CholeskyFactor>>,
    z_slot: Slot,
    tau2_slots: Vec<Slot>,
    tau1_slots: Vec<Slot>,
    eta_slots: Vec<Slot>,
    lambda0_slots: Vec<Slot>,
    sigma_slots: Vec<Slot>,
    eta_block: usize,
    pub warnings: Vec<String>,
}

fn normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

impl GpEngine {
    pub fn new(st: ModelState, aug: Augmented, cfg: &McmcConfig) -> Result<Self> {
        let c = st.channels.len();
        let p = st.layout.p();
        let v = &cfg.step_var;
        let mut e = Self {
            factors: vec![None; st.tau2.len()],
            z_slot: Slot::new("z", v.z),
            tau2_slots: (0..st.tau2.len()).map(|_| Slot::new("tau2", v.log_tau2)).collect(),
            tau1_slots: (0..c).map(|_| Slot::new("tau1", v.tau1)).collect(),
            eta_slots: (0..c).map(|_| Slot::new("eta", v.eta)).collect(),
            lambda0_slots: (0..p).map(|_| Slot::new("lambda0", v.lambda0)).collect(),
            sigma_slots: (0..p).map(|_| Slot::new("sigma", v.sigma)).collect(),
            eta_block: cfg.eta_block.max(1),
            warnings: Vec::new(),
            st,
            aug,
        };
        e.refresh_factors()?;
        Ok(e)
    }

    pub fn slots(&self) -> impl Iterator<Item = &Slot> {
        std::iter::once(&self.z_slot)
            .chain(&self.tau2_slots)
            .chain(&self.tau1_slots)
            .chain(&self.eta_slots)
            .chain(self.lambda0_slots.iter().enumerate().filter(|(j, _)| self.st.layout.samples_intercept(*j)).map(|(_, s)| s))
            .chain(self.sigma_slots.iter().enumerate().filter(|(j, _)| self.st.layout.has_sigma(*j)).map(|(_, s)| s))
    }

    fn refresh_factors(&mut self) -> Result<()> {
        for g in 0..self.st.tau2.len() {
            self.factors[g] = if self.st.group_members(g).is_empty() {
                None
            } else {
                Some(self.st.group_factor(g)?)
            };
        }
        Ok(())
    }

    fn intercept(&self, j: usize) -> f64 {
        if self.st.layout.has_intercept(j) {
            self.st.lambda0[j]
        } else {
            0.0
        }
    }

    fn sd(&self, j: usize) -> f64 {
        if self.st.layout.has_sigma(j) {
            self.st.sigma[j]
        } else {
            1.0
        }
    }

    fn is_missing_channel(&self, j: usize) -> bool {
        j == self.st.layout.p()
    }

    /// Collapsed (observed-cell) log-likelihood of channel `j` for latent values `f`.
    fn channel_ll(&self, j: usize, f: &[f64]) -> f64 {
        if self.is_missing_channel(j) {
            self.aug.probit_ll(|i| f[i])
        } else {
            let b = self.intercept(j);
            self.aug.observed_ll(j, self.sd(j), |i| b + f[i])
        }
    }

    /// Unit `i`'s contribution to channel `j` at latent value `fi`.
    fn cell_ll(&self, i: usize, j: usize, fi: f64) -> f64 {
        if self.is_missing_channel(j) {
            probit_term(self.aug.m[i], fi)
        } else if self.aug.is_observed(i, j) {
            log_density_unchecked(self.aug.kinds[j], self.aug.get(i, j), self.intercept(j) + fi, self.sd(j))
        } else {
            0.0
        }
    }

    pub fn loglik(&self) -> f64 {
        (0..self.st.channels.len())
            .map(|j| self.channel_ll(j, self.st.channels[j].f.as_slice().expect("contiguous")))
            .sum()
    }

    pub fn log_posterior(&self) -> f64 {
        self.loglik() + crate::model::log_prior(&self.st)
    }

    pub fn sweep(&mut self, rng: &mut Rng, adapt: Option<f64>) -> Result<()> {
        self.step1_update_z(rng, adapt)?;
        for g in 0..self.st.tau2.len() {
            self.step23_update_tau_f(g, rng, adapt);
        }
        #[cfg(debug_assertions)]
        self.check_whitening();
        self.step5_update_sigma(rng, adapt);
        self.step6_impute(rng)?;
        self.step4_update_intercepts(rng, adapt);
        Ok(())
    }

    #[cfg(debug_assertions)]
    fn check_whitening(&self) {
        for (j, ch) in self.st.channels.iter().enumerate() {
            if let Some(l) = &self.factors[ch.group] {
                let f = lower_matvec(l.as_slice(), l.n(), ch.eta.as_slice().expect("contiguous"));
                let s = ch.tau1.sqrt();
                for (a, b) in f.iter().zip(&ch.f) {
                    debug_assert!(
                        (s * a - b).abs() <= 1e-8 * (1.0 + b.abs()),
                        "channel {j}: f drifted from L eta"
                    );
                }
            }
        }
    }

    /// Step 1: per-unit random walk on `z_i`.
    ///
    /// Each proposal holds the other units' latent values and unit `i`'s
    /// standardized innovation fixed (unit `i` placed last in the whitening
    /// order), so only `f_i` moves and the acceptance ratio involves unit
    /// `i`'s terms and the prior on `z_i`. Precision matrices are updated by
    /// rank-one formulas; `eta` is recomputed at the end of the sweep.
    pub fn step1_update_z(&mut self, rng: &mut Rng, adapt: Option<f64>) -> Result<()> {
        let sd = self.z_slot.sd();
        if sd == 0.0 || self.st.n() == 0 {
            return Ok(());
        }
        let n = self.st.n();
        let d = self.st.d();
        let c = self.st.channels.len();

        struct Group {
            members: Vec<usize>,
            tau2: f64,
            jit: f64,
            prec: Vec<f64>,
            g: Vec<Vec<f64>>,
            a: Vec<f64>,
            w: Vec<f64>,
            v_new: f64,
        }
        let mut groups = Vec::new();
        for (gi, fac) in self.factors.iter().enumerate() {
            let Some(fac) = fac else { continue };
            let members = self.st.group_members(gi);
            let prec = fac.inverse();
            let g = members
                .iter()
                .map(|&j| {
                    let s = self.st.channels[j].tau1.sqrt();
                    let u: Vec<f64> = self.st.channels[j].f.iter().map(|v| v / s).collect();
                    (0..n).map(|k| dot(&prec[k * n..(k + 1) * n], &u)).collect()
                })
                .collect();
            groups.push(Group {
                members,
                tau2: self.st.tau2[gi],
                jit: fac.jitter(),
                prec,
                g,
                a: vec![0.0; n],
                w: vec![0.0; n],
                v_new: 0.0,
            });
        }

        let mut u: Vec<Vec<f64>> = self
            .st
            .channels
            .iter()
            .map(|ch| {
                let s = ch.tau1.sqrt();
                ch.f.iter().map(|v| v / s).collect()
            })
            .collect();
        let scale: Vec<f64> = self.st.channels.iter().map(|ch| ch.tau1.sqrt()).collect();
        let mut u_new = vec![0.0; c];
        let mut mu_new = vec![0.0; c];
        let mut dist = vec![0.0; n];
        let mut z_new = vec![0.0; d];

        for i in 0..n {
            for (k, zk) in z_new.iter_mut().enumerate() {
                *zk = self.st.z[[i, k]] + sd * normal(rng);
            }
            for (k, dk) in dist.iter_mut().enumerate() {
                *dk = if k == i {
                    0.0
                } else {
                    z_new
                        .iter()
                        .zip(self.st.z.row(k))
                        .map(|(x, y)| (x - y) * (x - y))
                        .sum()
                };
            }
            for grp in &mut groups {
                let s = -1.0 / (2.0 * grp.tau2);
                for k in 0..n {
                    grp.a[k] = if k == i { 0.0 } else { (s * dist[k]).exp() };
                }
                for k in 0..n {
                    grp.w[k] = dot(&grp.prec[k * n..(k + 1) * n], &grp.a);
                }
                let pii = grp.prec[i * n + i];
                let cc = grp.w[i];
                let quad = dot(&grp.a, &grp.w) - cc * cc / pii;
                grp.v_new = (1.0 + grp.jit - quad).max(grp.jit);
                let ratio = (grp.v_new * pii).sqrt();
                for (m, &j) in grp.members.iter().enumerate() {
                    let gj = &grp.g[m];
                    let mu = dot(&grp.a, gj) - cc * gj[i] / pii;
                    mu_new[j] = mu;
                    u_new[j] = mu + ratio * gj[i] / pii;
                }
            }
            let zi_old: f64 = self.st.z.row(i).iter().map(|&v| log_std_normal(v)).sum();
            let zi_new: f64 = z_new.iter().map(|&v| log_std_normal(v)).sum();
            let mut delta = zi_new - zi_old;
            for j in 0..c {
                delta += self.cell_ll(i, j, scale[j] * u_new[j]) - self.cell_ll(i, j, scale[j] * u[j][i]);
            }
            let accepted = mh_accept(delta, 0.0, rng);
            self.z_slot.record(accepted, adapt);
            if !accepted {
                continue;
            }
            for (k, &zk) in z_new.iter().enumerate() {
                self.st.z[[i, k]] = zk;
            }
            for grp in &mut groups {
                let pii = grp.prec[i * n + i];
                let cc = grp.w[i];
                let v = grp.v_new;
                let mut col: Vec<f64> = (0..n).map(|k| grp.prec[k * n + i]).collect();
                col[i] = 0.0;
                let mut uv: Vec<f64> = (0..n).map(|k| grp.w[k] - col[k] * cc / pii).collect();
                uv[i] = 0.0;
                for (m, &j) in grp.members.iter().enumerate() {
                    let gj = &mut grp.g[m];
                    let gi = gj[i];
                    let shift = (mu_new[j] - u_new[j]) / v;
                    for k in 0..n {
                        gj[k] += -col[k] * gi / pii + uv[k] * shift;
                    }
                    gj[i] = (u_new[j] - mu_new[j]) / v;
                    u[j][i] = u_new[j];
                }
                for k in 0..n {
                    if k == i {
                        continue;
                    }
                    let row = &mut grp.prec[k * n..(k + 1) * n];
                    axpy(-col[k] / pii, &col, row);
                    axpy(uv[k] / v, &uv, row);
                }
                for k in 0..n {
                    grp.prec[k * n + i] = -uv[k] / v;
                    grp.prec[i * n + k] = -uv[k] / v;
                }
                grp.prec[i * n + i] = 1.0 / v;
            }
        }

        for (j, ch) in self.st.channels.iter_mut().enumerate() {
            ch.f = u[j].iter().map(|v| scale[j] * v).collect();
        }
        self.refresh_factors()?;
        for ch in &mut self.st.channels {
            let fac = self.factors[ch.group].as_ref().expect("group has members");
            let s = ch.tau1.sqrt();
            let scaled: Vec<f64> = ch.f.iter().map(|v| v / s).collect();
            ch.eta = fac.solve_lower(&scaled).into();
            // keep f exactly equal to sqrt(tau1) L eta
            let f = lower_matvec(fac.as_slice(), fac.n(), ch.eta.as_slice().expect("contiguous"));
            ch.f = f.into_iter().map(|v| s * v).collect();
        }
        Ok(())
    }

    /// Steps 2-3 for length-scale group `g`: log-scale walk on `tau2` with
    /// every member's `f = sqrt(tau1) L eta` recomputed, then per member a
    /// walk on `tau1` and blockwise walks on `eta`.
    pub fn step23_update_tau_f(&mut self, g: usize, rng: &mut Rng, adapt: Option<f64>) {
        let members = self.st.group_members(g);
        if members.is_empty() {
            return;
        }
        let n = self.st.n();
        let mut ll: Vec<f64> = (0..self.st.channels.len())
            .map(|j| {
                if members.contains(&j) {
                    self.channel_ll(j, self.st.channels[j].f.as_slice().expect("contiguous"))
                } else {
                    0.0
                }
            })
            .collect();

        let sd2 = self.tau2_slots[g].sd();
        if sd2 > 0.0 {
            let t2 = self.st.tau2[g];
            let lt_new = t2.ln() + sd2 * normal(rng);
            let t2_new = lt_new.exp();
            match cholesky_jittered(unit_gram(self.st.z.view(), t2_new).view()) {
                Ok(fac) => {
                    let mut f_new = Vec::with_capacity(members.len());
                    let mut delta = log_inv_gamma(t2_new, 5.0, 5.0) - log_inv_gamma(t2, 5.0, 5.0) + (lt_new - t2.ln());
                    let mut ll_new = Vec::with_capacity(members.len());
                    for &j in &members {
                        let ch = &self.st.channels[j];
                        let s = ch.tau1.sqrt();
                        let f: Vec<f64> = lower_matvec(fac.as_slice(), n, ch.eta.as_slice().expect("contiguous"))
                            .into_iter()
                            .map(|v| s * v)
                            .collect();
                        let l = self.channel_ll(j, &f);
                        delta += l - ll[j];
                        ll_new.push(l);
                        f_new.push(f);
                    }
                    let accepted = mh_accept(delta, 0.0, rng);
                    self.tau2_slots[g].record(accepted, adapt);
                    if accepted {
                        self.st.tau2[g] = t2_new;
                        for ((&j, f), l) in members.iter().zip(f_new).zip(ll_new) {
                            self.st.channels[j].f = f.into();
                            ll[j] = l;
                        }
                        self.factors[g] = Some(fac);
                    }
                }
                Err(e) => {
                    self.tau2_slots[g].record(false, adapt);
                    self.warnings.push(format!("rejected tau2 = {t2_new}: {e}"));
                }
            }
        }

        let fac = self.factors[g].clone().expect("group has members");
        let lsl = fac.as_slice();
        for &j in &members {
            let sd1 = self.tau1_slots[j].sd();
            if sd1 > 0.0 {
                let t1 = self.st.channels[j].tau1;
                let t1_new = t1 + sd1 * normal(rng);
                let accepted = if t1_new > 0.0 {
                    let r = (t1_new / t1).sqrt();
                    let f: Vec<f64> = self.st.channels[j].f.iter().map(|v| r * v).collect();
                    let l = self.channel_ll(j, &f);
                    let delta = l - ll[j] + log_half_normal(t1_new) - log_half_normal(t1);
                    let ok = mh_accept(delta, 0.0, rng);
                    if ok {
                        let ch = &mut self.st.channels[j];
                        ch.tau1 = t1_new;
                        ch.f = f.into();
                        ll[j] = l;
                    }
                    ok
                } else {
                    false
                };
                self.tau1_slots[j].record(accepted, adapt);
            }

            let sde = self.eta_slots[j].sd();
            if sde == 0.0 {
                continue;
            }
            let s = self.st.channels[j].tau1.sqrt();
            let mut start = 0;
            while start < n {
                let end = (start + self.eta_block).min(n);
                let step: Vec<f64> = (start..end).map(|_| sde * normal(rng)).collect();
                let eta = &self.st.channels[j].eta;
                let mut dprior = 0.0;
                for (b, &dv) in step.iter().enumerate() {
                    let old = eta[start + b];
                    let new = old + dv;
                    dprior += 0.5 * (old * old - new * new);
                }
                let mut f: Vec<f64> = self.st.channels[j].f.to_vec();
                for (r, fr) in f.iter_mut().enumerate().skip(start) {
                    let hi = end.min(r + 1);
                    *fr += s * dot(&lsl[r * n + start..r * n + hi], &step[..hi - start]);
                }
                let l = self.channel_ll(j, &f);
                let accepted = mh_accept(l - ll[j] + dprior, 0.0, rng);
                self.eta_slots[j].record(accepted, adapt);
                if accepted {
                    let ch = &mut self.st.channels[j];
                    for (b, &dv) in step.iter().enumerate() {
                        ch.eta[start + b] += dv;
                    }
                    ch.f = f.into();
                    ll[j] = l;
                }
                start = end;
            }
        }
    }

    /// Step 4: outcome intercepts against the augmented data.
    pub fn step4_update_intercepts(&mut self, rng: &mut Rng, adapt: Option<f64>) {
        for j in self.st.layout.outcome_channels() {
            let sd = self.lambda0_slots[j].sd();
            if sd == 0.0 {
                continue;
            }
            let old = self.st.lambda0[j];
            let new = old + sd * normal(rng);
            let f = &self.st.channels[j].f;
            let s = self.sd(j);
            let delta = self.aug.augmented_ll(j, s, |i| new + f[i]) - self.aug.augmented_ll(j, s, |i| old + f[i])
                + log_std_normal(new)
                - log_std_normal(old);
            let accepted = mh_accept(delta, 0.0, rng);
            self.lambda0_slots[j].record(accepted, adapt);
            if accepted {
                self.st.lambda0[j] = new;
            }
        }
    }

    /// Step 5: dispersions of continuous channels.
    pub fn step5_update_sigma(&mut self, rng: &mut Rng, adapt: Option<f64>) {
        for j in self.st.layout.continuous_channels() {
            let sd = self.sigma_slots[j].sd();
            if sd == 0.0 {
                continue;
            }
            let old = self.st.sigma[j];
            let new = old + sd * normal(rng);
            let accepted = if new > 0.0 {
                let b = self.intercept(j);
                let f = &self.st.channels[j].f;
                let delta = self.aug.observed_ll(j, new, |i| b + f[i]) - self.aug.observed_ll(j, old, |i| b + f[i])
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

    /// Step 6: draw every hidden cell from its posterior predictive.
    pub fn step6_impute(&mut self, rng: &mut Rng) -> Result<()> {
        let p = self.aug.p;
        for idx in 0..self.aug.missing.len() {
            let (i, j) = self.aug.missing[idx];
            let theta = self.intercept(j) + self.st.channels[j].f[i];
            let param = CanonicalParam::new(theta, self.sd(j))?;
            self.aug.values[i * p + j] = sample(self.aug.kinds[j], param, rng)?;
        }
        Ok(())
    }

    /// Log acceptance ratio for moving group `g` to `tau2_new` with `eta`
    /// held fixed, including the log-scale Jacobian.
    #[cfg(test)]
    pub fn tau2_log_ratio(&self, g: usize, tau2_new: f64) -> Result<f64> {
        let members = self.st.group_members(g);
        let fac = cholesky_jittered(unit_gram(self.st.z.view(), tau2_new).view())?;
        let n = self.st.n();
        let t2 = self.st.tau2[g];
        let mut delta = log_inv_gamma(tau2_new, 5.0, 5.0) - log_inv_gamma(t2, 5.0, 5.0) + (tau2_new.ln() - t2.ln());
        for j in members {
            let ch = &self.st.channels[j];
            let s = ch.tau1.sqrt();
            let f: Vec<f64> = lower_matvec(fac.as_slice(), n, ch.eta.as_slice().expect("contiguous"))
                .into_iter()
                .map(|v| s * v)
                .collect();
            delta += self.channel_ll(j, &f) - self.channel_ll(j, ch.f.as_slice().expect("contiguous"));
        }
        Ok(delta)
    }
}

/// Diagnostic for a non-finite starting posterior.
pub(crate) fn init_report(e: &GpEngine) -> Error {
    let mut parts = Vec::new();
    for (j, ch) in e.st.channels.iter().enumerate() {
        parts.push(format!(
            "channel {j}: loglik {:.6e}, tau1 {}, tau2 {}",
            e.channel_ll(j, ch.f.as_slice().expect("contiguous")),
            ch.tau1,
            e.st.tau2[ch.group]
        ));
    }
    parts.push(format!("log prior {:.6e}", crate::model::log_prior(&e.st)));
    Error::Init(format!("non-finite log posterior at the starting state; {}", parts.join("; ")))
}
