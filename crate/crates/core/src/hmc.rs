//! Marginal HMC update of the effective blur `ω`.
//!
//! With the image integrated out, `d | ω ~ N(W μ̃_c, Σ_{d|ω})` where
//! `Σ_{d|ω} = W Σ̃_c Wᵀ + Σ_d`. Writing `A = W Σ_c Wᵀ + Σ_d` (BCCB) and
//! `S = A_c (Σ_c − Σ_c Wᵀ A⁻¹ W Σ_c) A_cᵀ` (`m x m`), the log-determinant and
//! the quadratic form reduce to spectra of `A` plus one `m x m` factorisation.
//!
//! The gradient uses `∂W₀/∂w*_i = circ(e_s)`, a pure cyclic shift, so every
//! component costs `O(n)` once the shared Fourier quantities are in place.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::convolution::{blur_derivative_eigs, blur_derivative_shift};
use crate::linalg::{Cholesky, Matrix};
use crate::model::{ModelState, SbdModel};
use crate::{Error, Result};

/// `|ΔH|` above which a trajectory counts as divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1000.0;

/// Cached quantities of the marginal potential at one `ω`.
#[derive(Debug, Clone)]
pub struct MarginalWorkspace {
    omega: Vec<f64>,
    sigma_c2: f64,
    sigma_d2: f64,
    lam_w: Vec<C64>,
    lam_a: Vec<f64>,
    v_hat: Vec<C64>,
    s: Option<Matrix>,
    y: Option<Matrix>,
    chol_s: Option<Cholesky>,
    q: Vec<f64>,
    log_det: f64,
    quad: f64,
    potential: f64,
}

impl MarginalWorkspace {
    pub fn build(omega: &[f64], state: &ModelState, model: &SbdModel) -> Result<Self> {
        state.check_variances()?;
        if omega.len() != model.k() {
            return Err(Error::DimensionMismatch { expected: model.k(), got: omega.len() });
        }
        let lat = model.lattice();
        let (n_v, n_h) = (lat.n_v(), lat.n_h());
        let n = n_v * n_h;
        let plan = model.plan2();
        let sc2 = state.sigma_c2;
        let sd2 = state.sigma_d2(model.hyper().psi);
        let lam_rc = model.image().eigs();
        let lam_rd = model.noise().eigs();
        let lam_w = model.w_eigs(&model.blur().lift(omega))?;

        let mu_hat = plan.forward_real(model.image().mu_tilde());
        let mut dbar_hat = plan.forward_real(&state.d);
        for (idx, (z, m)) in dbar_hat.iter_mut().zip(&mu_hat).enumerate() {
            *z -= lam_w[idx % n_v] * m;
        }
        let lam_a: Vec<f64> = (0..n).map(|f| sc2 * lam_w[f % n_v].norm_sqr() * lam_rc[f] + sd2 * lam_rd[f]).collect();
        let mut log_det: f64 = lam_a.iter().map(|l| libm::log(*l)).sum();
        let mut quad: f64 = dbar_hat.iter().zip(&lam_a).map(|(z, l)| z.norm_sqr() / l).sum();
        let mut v_hat: Vec<C64> = dbar_hat.iter().zip(&lam_a).map(|(z, l)| z / l).collect();

        let sel = model.image().constraint().selector();
        let (mut s_mat, mut y_mat, mut chol_s, mut q) = (None, None, None, Vec::new());
        if let Some(gram) = model.image().gram() {
            // S from the BCCB base of Σ_c − Z
            let e: Vec<C64> = (0..n).map(|f| C64::new(sc2 * lam_rc[f] * sd2 * lam_rd[f] / lam_a[f], 0.0)).collect();
            let scale = 1.0 / libm::sqrt(n as f64);
            let base: Vec<f64> = plan.inverse(&e).into_iter().map(|z| z.re * scale).collect();
            let entry = |a: usize, b: usize| {
                let di = (a % n_v + n_v - b % n_v) % n_v;
                let dj = (a / n_v + n_h - b / n_v) % n_h;
                base[di + n_v * dj]
            };
            let m = sel.len();
            let s = Matrix::from_fn(m, m, |i, j| entry(sel[i], sel[j]));
            // Y = Lᵀ S L with L Lᵀ = K⁻¹, K = σ_c² A_c R_c A_cᵀ
            let mut t = Matrix::zeros(m, m);
            for j in 0..m {
                let col = gram.solve_lower(s.col(j));
                for i in 0..m {
                    t[(i, j)] = col[i];
                }
            }
            let tt = t.transpose();
            let mut y = Matrix::zeros(m, m);
            for j in 0..m {
                let col = gram.solve_lower(tt.col(j));
                for i in 0..m {
                    y[(i, j)] = col[i] / sc2;
                }
            }
            y.symmetrize();
            let chol_y = Cholesky::try_new(&y).ok_or(Error::IndefiniteY)?;
            log_det += chol_y.log_det();
            let cs = Cholesky::try_new(&s).ok_or(Error::IndefiniteS)?;

            let mut qg: Vec<C64> = (0..n)
                .map(|f| dbar_hat[f] * lam_w[f % n_v].conj() * (sc2 * lam_rc[f] / lam_a[f]))
                .collect();
            plan.inverse_in_place(&mut qg);
            let qv: Vec<f64> = sel.iter().map(|&i| qg[i].re).collect();
            let sq = cs.solve(&qv);
            quad += qv.iter().zip(&sq).map(|(a, b)| a * b).sum::<f64>();
            let mut sparse = vec![0.0; n];
            for (&i, &v) in sel.iter().zip(&sq) {
                sparse[i] = v;
            }
            let sh = plan.forward_real(&sparse);
            for f in 0..n {
                v_hat[f] += sh[f] * lam_w[f % n_v] * (sc2 * lam_rc[f] / lam_a[f]);
            }
            s_mat = Some(s);
            y_mat = Some(y);
            chol_s = Some(cs);
            q = qv;
        }

        let k = model.k() as f64;
        let ln2pi = libm::log(2.0 * PI);
        let sw2 = state.sigma_w2;
        let prior = 0.5 * (k * ln2pi + k * libm::log(sw2) + model.blur().log_det_r_omega() + model.blur().ssw(omega) / sw2);
        let potential = prior + 0.5 * (n as f64 * ln2pi + log_det + quad);
        if !potential.is_finite() {
            return Err(Error::NonFiniteTrajectory);
        }
        Ok(Self {
            omega: omega.to_vec(),
            sigma_c2: sc2,
            sigma_d2: sd2,
            lam_w,
            lam_a,
            v_hat,
            s: s_mat,
            y: y_mat,
            chol_s,
            q,
            log_det,
            quad,
            potential,
        })
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }
    /// `log |Σ_{d|ω}|`.
    pub fn log_det(&self) -> f64 {
        self.log_det
    }
    /// `d̄ᵀ Σ_{d|ω}⁻¹ d̄`.
    pub fn quad_form(&self) -> f64 {
        self.quad
    }
    pub fn potential(&self) -> f64 {
        self.potential
    }
    /// Eigenvalue grid of `A`.
    pub fn lam_a(&self) -> &[f64] {
        &self.lam_a
    }
    pub fn s_matrix(&self) -> Option<&Matrix> {
        self.s.as_ref()
    }
    pub fn y_matrix(&self) -> Option<&Matrix> {
        self.y.as_ref()
    }
    pub fn q(&self) -> &[f64] {
        &self.q
    }
    /// DFT of `v = Σ_{d|ω}⁻¹ d̄`.
    pub fn v_hat(&self) -> &[C64] {
        &self.v_hat
    }

    /// `Σ_{d|ω}⁻¹ x` through `A⁻¹` and the `m x m` correction.
    pub fn apply_inverse(&self, model: &SbdModel, x: &[f64]) -> Vec<f64> {
        let n_v = model.lattice().n_v();
        let plan = model.plan2();
        let x_hat = plan.forward_real(x);
        let mut out: Vec<C64> = x_hat.iter().zip(&self.lam_a).map(|(z, l)| z / l).collect();
        if let Some(cs) = &self.chol_s {
            let lam_rc = model.image().eigs();
            let sel = model.image().constraint().selector();
            let weight = |f: usize| self.sigma_c2 * lam_rc[f] / self.lam_a[f];
            let mut t: Vec<C64> =
                x_hat.iter().enumerate().map(|(f, z)| z * self.lam_w[f % n_v].conj() * weight(f)).collect();
            plan.inverse_in_place(&mut t);
            let sq = cs.solve(&sel.iter().map(|&i| t[i].re).collect::<Vec<_>>());
            let mut sparse = vec![0.0; x.len()];
            for (&i, &v) in sel.iter().zip(&sq) {
                sparse[i] = v;
            }
            let sh = plan.forward_real(&sparse);
            for (f, o) in out.iter_mut().enumerate() {
                *o += sh[f] * self.lam_w[f % n_v] * weight(f);
            }
        }
        plan.inverse_real(&out)
    }
}

/// Potential `U(ω) = −log p(ω | σ_w²) − log p(d | ω, σ²)` and its workspace.
pub fn potential(omega: &[f64], state: &ModelState, model: &SbdModel) -> Result<(f64, MarginalWorkspace)> {
    let ws = MarginalWorkspace::build(omega, state, model)?;
    Ok((ws.potential, ws))
}

/// `∂U/∂ω` at the `ω` the workspace was built for.
pub fn grad_potential(omega: &[f64], ws: &MarginalWorkspace, state: &ModelState, model: &SbdModel) -> Result<Vec<f64>> {
    if omega != ws.omega.as_slice()
        || ws.sigma_c2 != state.sigma_c2
        || ws.sigma_d2 != state.sigma_d2(model.hyper().psi)
    {
        return Err(Error::StaleWorkspace);
    }
    let lat = model.lattice();
    let (n_v, n_h) = (lat.n_v(), lat.n_h());
    let n = n_v * n_h;
    let plan = model.plan2();
    let sc2 = ws.sigma_c2;
    let sd2 = ws.sigma_d2;
    let lam_rc = model.image().eigs();
    let lam_rd = model.noise().eigs();
    let lam_w = &ws.lam_w;
    let lam_a = &ws.lam_a;

    // spectral weights g[f_v]: ∂(½·logdet + ½·quad) = ½ Re Σ λ̇_i g + shift terms
    let mut g = vec![C64::new(0.0, 0.0); n_v];
    for f in 0..n {
        let fv = f % n_v;
        let logdet_a = 2.0 * sc2 * lam_rc[f] / lam_a[f];
        let quad_a = sc2 * lam_rc[f] * ws.v_hat[f].norm_sqr();
        g[fv] += lam_w[fv].conj() * (logdet_a - 2.0 * quad_a);
    }
    if let Some(cs) = &ws.chol_s {
        let sel = model.image().constraint().selector();
        let sinv = cs.inverse();
        let mut h = vec![C64::new(0.0, 0.0); n];
        for (a, &ia) in sel.iter().enumerate() {
            for (b, &ib) in sel.iter().enumerate() {
                let di = (ia % n_v + n_v - ib % n_v) % n_v;
                let dj = (ia / n_v + n_h - ib / n_v) % n_h;
                h[di + n_v * dj] += sinv[(a, b)];
            }
        }
        plan.inverse_in_place(&mut h);
        let inv_sqrt_n = 1.0 / libm::sqrt(n as f64);
        for f in 0..n {
            let fv = f % n_v;
            let c = 2.0 * sc2 * sc2 * sd2 * lam_rc[f] * lam_rc[f] * lam_rd[f] / (lam_a[f] * lam_a[f]);
            g[fv] -= lam_w[fv].conj() * (inv_sqrt_n * c * h[f].re);
        }
    }

    let v = plan.inverse_real(&ws.v_hat);
    let wt_v: Vec<C64> = ws.v_hat.iter().enumerate().map(|(f, z)| lam_w[f % n_v].conj() * z).collect();
    let u = plan.inverse_real(&wt_v);
    let m_grid = model.image().apply_r_star(&u);
    let mu = model.image().mu_tilde();
    let has_constraints = model.image().m() > 0;

    let prior = model.blur().chol_omega().solve(omega);
    let central = model.blur().central();
    let mut grad = Vec::with_capacity(central.len());
    for (k, &ci) in central.iter().enumerate() {
        let lam_dot = blur_derivative_eigs(n_v, ci);
        let spectral: f64 = lam_dot.iter().zip(&g).map(|(a, b)| (a * b).re).sum();
        let s = blur_derivative_shift(n_v, ci);
        let mut shift_terms = 0.0;
        if has_constraints {
            for col in 0..n_h {
                let off = col * n_v;
                for r in 0..n_v {
                    let src = off + (r + n_v - s) % n_v;
                    shift_terms += v[off + r] * (sc2 * m_grid[src] - mu[src]);
                }
            }
        }
        grad.push(prior[k] / state.sigma_w2 + 0.5 * spectral + shift_terms);
    }
    Ok(grad)
}

/// Step-size adaptation by dual averaging.
#[derive(Debug, Clone, PartialEq)]
pub struct DualAveraging {
    target: f64,
    mu: f64,
    h_bar: f64,
    log_eps: f64,
    log_eps_bar: f64,
    t: f64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    pub fn new(eps0: f64, target: f64) -> Self {
        let l = libm::log(eps0);
        Self { target, mu: libm::log(10.0 * eps0), h_bar: 0.0, log_eps: l, log_eps_bar: l, t: 0.0 }
    }

    /// Feed one acceptance probability; returns the next step size.
    pub fn update(&mut self, accept_prob: f64) -> f64 {
        self.t += 1.0;
        let w = 1.0 / (self.t + Self::T0);
        self.h_bar = (1.0 - w) * self.h_bar + w * (self.target - accept_prob);
        self.log_eps = self.mu - libm::sqrt(self.t) / Self::GAMMA * self.h_bar;
        let eta = libm::pow(self.t, -Self::KAPPA);
        self.log_eps_bar = eta * self.log_eps + (1.0 - eta) * self.log_eps_bar;
        libm::exp(self.log_eps)
    }

    /// Averaged step size used once adaptation stops.
    pub fn final_eps(&self) -> f64 {
        libm::exp(self.log_eps_bar)
    }
}

/// Static HMC settings.
#[derive(Debug, Clone, PartialEq)]
pub struct HmcConfig {
    pub steps: usize,
    pub eps: f64,
    /// Target acceptance and number of adaptive updates, if adapting.
    pub adapt: Option<(f64, u64)>,
}

impl HmcConfig {
    pub fn new(steps: usize, eps: f64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidArgument("leapfrog steps must be at least 1".into()));
        }
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::InvalidArgument(alloc::format!("step size must be positive, got {eps}")));
        }
        Ok(Self { steps, eps, adapt: None })
    }

    pub fn with_adaptation(mut self, target: f64, updates: u64) -> Result<Self> {
        if !(target > 0.0 && target < 1.0) {
            return Err(Error::InvalidArgument(alloc::format!("target acceptance must lie in (0, 1), got {target}")));
        }
        self.adapt = Some((target, updates));
        Ok(self)
    }
}

/// Mutable HMC state carried across updates.
#[derive(Debug, Clone, PartialEq)]
pub struct HmcState {
    pub eps: f64,
    pub updates: u64,
    pub accepted: u64,
    pub divergent: u64,
    adapter: Option<DualAveraging>,
}

impl HmcState {
    pub fn new(cfg: &HmcConfig) -> Self {
        Self {
            eps: cfg.eps,
            updates: 0,
            accepted: 0,
            divergent: 0,
            adapter: cfg.adapt.map(|(target, _)| DualAveraging::new(cfg.eps, target)),
        }
    }

    /// Stop adapting and switch to the averaged step size.
    pub fn finish_adaptation(&mut self) {
        if let Some(da) = self.adapter.take() {
            if da.t > 0.0 {
                self.eps = da.final_eps();
            }
        }
    }

    pub fn is_adapting(&self) -> bool {
        self.adapter.is_some()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.updates == 0 {
            0.0
        } else {
            self.accepted as f64 / self.updates as f64
        }
    }
}

/// Result of one HMC proposal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HmcOutcome {
    pub accepted: bool,
    pub delta_h: f64,
    pub accept_prob: f64,
    pub eps: f64,
    pub divergent: bool,
}

/// End point of a leapfrog trajectory.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub omega: Vec<f64>,
    pub p: Vec<f64>,
    pub potential: f64,
    pub grad: Vec<f64>,
}

/// Half-kick / drift / half-kick integration with kinetic energy
/// `½ pᵀ M⁻¹ p`; `eval` returns the potential and its gradient.
pub fn leapfrog<F>(
    omega: &[f64],
    p: &[f64],
    grad0: &[f64],
    eps: f64,
    steps: usize,
    mass_inv: &Matrix,
    mut eval: F,
) -> Result<Trajectory>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let mut w = omega.to_vec();
    let mut mom: Vec<f64> = p.iter().zip(grad0).map(|(pi, gi)| pi - 0.5 * eps * gi).collect();
    let mut u = f64::NAN;
    let mut grad = grad0.to_vec();
    for step in 0..steps {
        let vel = mass_inv.matvec(&mom);
        for (wi, vi) in w.iter_mut().zip(&vel) {
            *wi += eps * vi;
        }
        let (un, gn) = eval(&w)?;
        u = un;
        grad = gn;
        let kick = if step + 1 == steps { 0.5 * eps } else { eps };
        for (pi, gi) in mom.iter_mut().zip(&grad) {
            *pi -= kick * gi;
        }
        if !u.is_finite() || w.iter().chain(&mom).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteTrajectory);
        }
    }
    Ok(Trajectory { omega: w, p: mom, potential: u, grad })
}

pub fn kinetic(p: &[f64], mass_inv: &Matrix) -> f64 {
    0.5 * crate::linalg::dot(p, &mass_inv.matvec(p))
}

/// `Σ_ω = σ_w² R_ω`, the inverse mass matrix.
pub fn inverse_mass(state: &ModelState, model: &SbdModel) -> Matrix {
    model.blur().r_omega().scale(state.sigma_w2)
}

/// Momentum draw `p ~ N(0, Σ_ω⁻¹)`.
pub fn sample_momentum<R: Rng + ?Sized>(state: &ModelState, model: &SbdModel, rng: &mut R) -> Vec<f64> {
    let z: Vec<f64> = (0..model.k()).map(|_| rng.sample(StandardNormal)).collect();
    let s = 1.0 / libm::sqrt(state.sigma_w2);
    model.blur().chol_omega().solve_upper(&z).into_iter().map(|v| v * s).collect()
}

/// Potential and gradient together.
pub fn potential_and_grad(omega: &[f64], state: &ModelState, model: &SbdModel) -> Result<(f64, Vec<f64>)> {
    let (u, ws) = potential(omega, state, model)?;
    let g = grad_potential(omega, &ws, state, model)?;
    Ok((u, g))
}

/// Run one trajectory from `(ω, p)` and return the energy change.
pub fn proposal_delta_h(
    omega: &[f64],
    p: &[f64],
    eps: f64,
    steps: usize,
    state: &ModelState,
    model: &SbdModel,
) -> Result<(f64, Trajectory)> {
    let minv = inverse_mass(state, model);
    let (u0, g0) = potential_and_grad(omega, state, model)?;
    let traj = leapfrog(omega, p, &g0, eps, steps, &minv, |w| potential_and_grad(w, state, model))?;
    let dh = traj.potential + kinetic(&traj.p, &minv) - u0 - kinetic(p, &minv);
    Ok((dh, traj))
}

/// One marginal HMC update of `ω`; divergent or non-finite trajectories are
/// rejected.
pub fn hmc_update<R: Rng + ?Sized>(
    state: &mut ModelState,
    model: &SbdModel,
    cfg: &HmcConfig,
    hs: &mut HmcState,
    rng: &mut R,
) -> Result<HmcOutcome> {
    let eps = hs.eps;
    let p = sample_momentum(state, model, rng);
    let u: f64 = rng.random();
    let omega0 = state.omega.clone();
    let (delta_h, proposal) = match proposal_delta_h(&omega0, &p, eps, cfg.steps, state, model) {
        Ok((dh, t)) => (dh, Some(t)),
        Err(Error::NonFiniteTrajectory | Error::IndefiniteS | Error::IndefiniteY | Error::IllConditioned(_)) => {
            (f64::INFINITY, None)
        }
        Err(e) => return Err(e),
    };
    let divergent = !(delta_h.abs() <= DIVERGENCE_THRESHOLD);
    let accept_prob = if divergent { 0.0 } else { libm::exp(-delta_h).min(1.0) };
    let accepted = !divergent && u < accept_prob;
    if accepted {
        let t = proposal.expect("finite trajectory");
        state.set_omega(model, t.omega);
    }
    hs.updates += 1;
    hs.accepted += accepted as u64;
    hs.divergent += divergent as u64;
    if let (Some(da), Some((_, n_adapt))) = (hs.adapter.as_mut(), cfg.adapt) {
        if hs.updates <= n_adapt {
            hs.eps = da.update(accept_prob);
            if hs.updates == n_adapt {
                hs.finish_adaptation();
            }
        }
    }
    Ok(HmcOutcome { accepted, delta_h, accept_prob, eps, divergent })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CorrelationSpec, HyperParams, ImageMask, LatticeSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn quadratic(w: &[f64]) -> Result<(f64, Vec<f64>)> {
        let u = 0.5 * w.iter().enumerate().map(|(i, x)| (i + 1) as f64 * x * x).sum::<f64>();
        let g = w.iter().enumerate().map(|(i, x)| (i + 1) as f64 * x).collect();
        Ok((u, g))
    }

    #[test]
    fn leapfrog_is_reversible() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let k = 10;
        let minv = Matrix::identity(k).scale(0.5);
        let w: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
        let p: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
        let (_, g) = quadratic(&w).unwrap();
        let t = leapfrog(&w, &p, &g, 0.05, 20, &minv, quadratic).unwrap();
        let back_p: Vec<f64> = t.p.iter().map(|v| -v).collect();
        let b = leapfrog(&t.omega, &back_p, &t.grad, 0.05, 20, &minv, quadratic).unwrap();
        for i in 0..k {
            assert!((b.omega[i] - w[i]).abs() < 1e-8);
            assert!((b.p[i] + p[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn tiny_step_barely_moves() {
        let minv = Matrix::identity(3);
        let w = [0.3, -0.2, 1.0];
        let p = [1.0, 0.5, -0.5];
        let (_, g) = quadratic(&w).unwrap();
        let t = leapfrog(&w, &p, &g, 1e-8, 1, &minv, quadratic).unwrap();
        for i in 0..3 {
            assert!((t.omega[i] - w[i]).abs() < 1e-6);
            assert!((t.p[i] - p[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn non_finite_is_flagged() {
        let minv = Matrix::identity(1);
        let r = leapfrog(&[0.0], &[1.0], &[0.0], 0.1, 3, &minv, |_| Ok((f64::NAN, vec![0.0])));
        assert!(matches!(r, Err(Error::NonFiniteTrajectory)));
    }

    #[test]
    fn config_rejects_zero_step() {
        assert!(HmcConfig::new(10, 0.0).is_err());
        assert!(HmcConfig::new(0, 0.1).is_err());
    }

    fn desk(mask: ImageMask) -> (SbdModel, ModelState) {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let hp = HyperParams { blur: CorrelationSpec { phi: 1.5, p: 1.0 }, ..HyperParams::default() };
        let l = LatticeSpec::new(8, 3, 2, 1, 6, mask).unwrap();
        let m = l.image_selector().len();
        let d: Vec<f64> = (0..l.n_obs()).map(|_| rng.random::<f64>() - 0.5).collect();
        let c_obs: Vec<f64> = (0..m).map(|_| rng.random::<f64>() - 0.5).collect();
        let model = SbdModel::new(l, hp, d, c_obs).unwrap();
        let mut s = ModelState::from_prior(&model, &mut rng).unwrap();
        s.sigma_c2 = 0.7;
        s.sigma_w2 = 1.3;
        s.zeta = 0.2;
        (model, s)
    }

    #[test]
    fn gradient_matches_central_differences() {
        for mask in [ImageMask::None, ImageMask::Product { rows: vec![3, 4], cols: vec![1] }] {
            let (model, s) = desk(mask);
            let w = s.omega.clone();
            let (_, g) = potential_and_grad(&w, &s, &model).unwrap();
            let h = 1e-5;
            for i in 0..w.len() {
                let mut wp = w.clone();
                wp[i] += h;
                let mut wm = w.clone();
                wm[i] -= h;
                let fd = (potential(&wp, &s, &model).unwrap().0 - potential(&wm, &s, &model).unwrap().0) / (2.0 * h);
                assert!((fd - g[i]).abs() <= 1e-4 * fd.abs().max(1e-8 / 1e-4), "i={i} fd={fd} g={}", g[i]);
            }
        }
    }

    #[test]
    fn stale_workspace_detected() {
        let (model, s) = desk(ImageMask::None);
        let (_, ws) = potential(&s.omega, &s, &model).unwrap();
        let other: Vec<f64> = s.omega.iter().map(|v| v + 0.1).collect();
        assert!(matches!(grad_potential(&other, &ws, &s, &model), Err(Error::StaleWorkspace)));
    }

    #[test]
    fn symmetric_marginal_without_constraints() {
        let (model, s) = desk(ImageMask::None);
        let neg: Vec<f64> = s.omega.iter().map(|v| -v).collect();
        let (a, g1) = potential_and_grad(&s.omega, &s, &model).unwrap();
        let (b, g2) = potential_and_grad(&neg, &s, &model).unwrap();
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        for (x, y) in g1.iter().zip(&g2) {
            assert!((x + y).abs() <= 1e-9 * x.abs().max(1.0));
        }
    }

    #[test]
    fn replay_is_deterministic() {
        let (model, s0) = desk(ImageMask::None);
        let cfg = HmcConfig::new(10, 0.1).unwrap();
        let run = || {
            let mut s = s0.clone();
            let mut hs = HmcState::new(&cfg);
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            (0..10).map(|_| hmc_update(&mut s, &model, &cfg, &mut hs, &mut rng).unwrap().accepted).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn dual_averaging_moves_towards_target() {
        let mut da = DualAveraging::new(1.0, 0.65);
        // always accepting pushes the step up; always rejecting pushes it down
        let up = (0..20).map(|_| da.update(1.0)).last().unwrap();
        let mut da = DualAveraging::new(1.0, 0.65);
        let down = (0..20).map(|_| da.update(0.0)).last().unwrap();
        assert!(up > 1.0 && down < 1.0);
    }
}
