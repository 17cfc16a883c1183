//! Matched inner/outer expansion of the droplet for small ε.
//!
//! Outer variable `x`, expansion `f₀ + εf₁ + ε²f₂`; inner variables
//! `x = s + εz`, `h = ε(v₀ + εv₁)`. The composite is outer plus inner minus
//! their common overlap.

use serde::{Deserialize, Serialize};

use crate::droplet::{check_sigma, k_factor, reconstruct_layers_from, TwoLayerProfile};
use crate::numerics::{least_squares, rk4_step, GaussLegendre, Hermite};
use crate::{Error, Result};

/// `(h∞₀, h∞₁, h∞₂)` in `h∞ = ε h∞₀ + ε² h∞₁ + ε³ h∞₂ + …`.
pub const H_INF_COEFFS: [f64; 3] = [1.0, 1.0 / 16.0, 45.0 / 512.0];

/// Three-term series for the far-field thickness.
pub fn h_infinity_series(epsilon: f64) -> f64 {
    let [a, b, c] = H_INF_COEFFS;
    epsilon * (a + epsilon * (b + epsilon * c))
}

/// Contact point `s = (4/√3) √(σ/(σ+1))` of the leading-order cap.
pub fn contact_point(sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    Ok(4.0 / (3.0 * k_factor(sigma)).sqrt())
}

/// Magnitude of the outer slope at the contact point, `(√3/2) √((σ+1)/σ)`.
pub fn outer_slope(sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    Ok(0.5 * (3.0 * k_factor(sigma)).sqrt())
}

/// Leading-order cap `f₀(x) = 1 − (3/16)((σ+1)/σ) x²`.
pub fn outer_f0(x: f64, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    Ok(1.0 - 3.0 / 16.0 * k_factor(sigma) * x * x)
}

/// Constant of the `ε²`-row near the contact point,
/// `−19/96 − ln((√3/8)√((σ+1)/σ))`.
pub fn matching_constant(sigma: f64) -> f64 {
    -19.0 / 96.0 - ((3.0f64).sqrt() / 8.0 * k_factor(sigma).sqrt()).ln()
}

/// Resolution of the outer integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuterGrid {
    /// RK4 steps in `τ = −ln(1 − x/s)`.
    pub steps: usize,
    /// Integration halts at `s − x = gap · s`.
    pub gap: f64,
}

impl Default for OuterGrid {
    fn default() -> Self {
        OuterGrid { steps: 6000, gap: 1e-6 }
    }
}

/// First and second outer corrections, sampled in `τ = −ln(1 − x/s)`.
#[derive(Debug, Clone)]
pub struct OuterCorrections {
    pub sigma: f64,
    pub s: f64,
    /// Coefficients of the homogeneous solutions `x` of both equations,
    /// fixed by matching.
    pub homogeneous: [f64; 2],
    /// Constant of `f₂ − B/(s−x) + ln(s−x)` at the contact point before the
    /// homogeneous mode is added, minus the printed matching constant.
    pub constant_offset: f64,
    /// RMS residual of the local fit near the contact point.
    pub fit_residual: f64,
    f1: Hermite,
    f2: Hermite,
}

impl OuterCorrections {
    /// Largest `x` covered by the samples.
    pub fn x_max(&self) -> f64 {
        self.s * (1.0 - (-self.f1.last()).exp())
    }

    fn tau(&self, x: f64) -> f64 {
        -(-x / self.s).ln_1p()
    }

    /// `f₁(x)`; `NaN` outside `[0, x_max]`.
    pub fn f1(&self, x: f64) -> f64 {
        if !(0.0..=self.x_max()).contains(&x) {
            return f64::NAN;
        }
        self.f1.eval(self.tau(x))
    }

    /// `f₂(x)`; `NaN` outside `[0, x_max]`.
    pub fn f2(&self, x: f64) -> f64 {
        if !(0.0..=self.x_max()).contains(&x) {
            return f64::NAN;
        }
        self.f2.eval(self.tau(x))
    }

    /// Samples `(x, f₁, f₂)` on the integration grid.
    pub fn samples(&self) -> Vec<(f64, f64, f64)> {
        self.f1
            .abscissae()
            .iter()
            .zip(self.f1.values().iter().zip(self.f2.values()))
            .map(|(&t, (&a, &b))| (self.s * -(-t).exp_m1(), a, b))
            .collect()
    }
}

/// Integrates the linear equations for `f₁` and `f₂` from the apex.
///
/// Both are written for `w = f/x`, which removes the `f/x` term:
/// `w₁' = −(3/16)k` and `w₂' = (4/(3x²))(1/f₀² − 1) + (29/512)k`. The second
/// blows up like `(s−x)⁻²`, so the independent variable is `τ`, with
/// `s − x = s e^{−τ}`. Homogeneous multiples of `x` are then chosen so that
/// `f₁(s) = −1` and the constant in `f₂ ~ B/(s−x) − ln(s−x) + const` equals
/// [`matching_constant`].
pub fn outer_corrections(sigma: f64, grid: &OuterGrid) -> Result<OuterCorrections> {
    check_sigma(sigma)?;
    if grid.steps < 100 || !(grid.gap > 0.0 && grid.gap < 0.1) {
        return Err(Error::Validation(format!("invalid outer grid {grid:?}")));
    }
    let k = k_factor(sigma);
    let s = contact_point(sigma)?;
    let tau_max = -grid.gap.ln();
    let dt = tau_max / grid.steps as f64;
    // (w1, w2) as functions of τ; u = s − x = s e^{−τ}
    let rates = |tau: f64| -> (f64, f64) {
        let q = (-tau).exp();
        let u = s * q;
        let r = 1.0 - q;
        let f0 = q * (2.0 - q);
        let w1x = -3.0 / 16.0 * k;
        let w2x = 4.0 / (3.0 * s * s) * (2.0 - r * r) / (f0 * f0) + 29.0 / 512.0 * k;
        (w1x * u, w2x * u)
    };
    let rhs = |t: f64, _: &[f64; 2]| {
        let (a, b) = rates(t);
        [a, b]
    };
    let mut taus = Vec::with_capacity(grid.steps + 1);
    let mut ws = Vec::with_capacity(grid.steps + 1);
    let mut w = [0.0, 0.0];
    for i in 0..=grid.steps {
        let t = i as f64 * dt;
        taus.push(t);
        ws.push(w);
        if i < grid.steps {
            w = rk4_step(&rhs, t, &w, dt);
        }
    }
    let x_of = |t: f64| -s * (-t).exp_m1();

    // f₁(s) = −1 fixes the first homogeneous coefficient.
    let last = ws.len() - 1;
    let x_end = x_of(taus[last]);
    // extrapolate across the gap with the local slope w₁ + x w₁'
    let f1_end = x_end * ws[last][0] + (ws[last][0] - 3.0 / 16.0 * k * x_end) * (s - x_end);
    let c1 = (-1.0 - f1_end) / s;

    // Local fit of g = f₂ − B/u + ln u by {1, u, u ln u, u², u² ln u} near the contact point.
    let b_coef = s / 3.0;
    let mut rows = Vec::new();
    let mut rhs_fit = Vec::new();
    for (t, w) in taus.iter().zip(&ws) {
        let u = s * (-t).exp();
        if u > 1e-2 * s || u < 1e-5 * s {
            continue;
        }
        let f2 = x_of(*t) * w[1];
        rows.push(vec![1.0, u, u * u.ln(), u * u, u * u * u.ln()]);
        rhs_fit.push(f2 - b_coef / u + u.ln());
    }
    let coef = least_squares(&rows, &rhs_fit);
    let fit_residual = (rows
        .iter()
        .zip(&rhs_fit)
        .map(|(r, g)| {
            let m: f64 = r.iter().zip(&coef).map(|(a, b)| a * b).sum();
            (m - g).powi(2)
        })
        .sum::<f64>()
        / rows.len() as f64)
        .sqrt();
    if fit_residual > 1e-6 {
        return Err(Error::numerical("outer matching fit failed", fit_residual));
    }
    let target = matching_constant(sigma);
    let constant_offset = coef[0] - target;
    let c2 = -constant_offset / s;

    let mut f1v = Vec::with_capacity(ws.len());
    let mut f1d = Vec::with_capacity(ws.len());
    let mut f2v = Vec::with_capacity(ws.len());
    let mut f2d = Vec::with_capacity(ws.len());
    for (t, w) in taus.iter().zip(&ws) {
        let x = x_of(*t);
        let u = s * (-t).exp();
        let (r1, r2) = rates(*t);
        let w1 = w[0] + c1;
        let w2 = w[1] + c2;
        // df/dτ = u w + x dw/dτ
        f1v.push(x * w1);
        f1d.push(u * w1 + x * r1);
        f2v.push(x * w2);
        f2d.push(u * w2 + x * r2);
    }
    Ok(OuterCorrections {
        sigma,
        s,
        homogeneous: [c1, c2],
        constant_offset,
        fit_residual,
        f1: Hermite::new(taus.clone(), f1v, f1d),
        f2: Hermite::new(taus, f2v, f2d),
    })
}

/// Range and step of the inner integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerGrid {
    /// Integration starts at `z = −z_far`, where `v₁` is set from its asymptote.
    pub z_far: f64,
    pub z_max: f64,
    pub step: f64,
}

impl Default for InnerGrid {
    fn default() -> Self {
        InnerGrid { z_far: 400.0, z_max: 40.0, step: 0.005 }
    }
}

/// Inner profiles for the `(2, 8)` potential.
///
/// `v₀` solves `v₀' = −√(2k) √(Φ(v₀) − Φ(1))`, translated so that
/// `v₀ ~ −θz − 1 − B/z` as `z → −∞`. `v₁ₚ` is the particular solution of the
/// linearized first integral that behaves like
/// `−(3/16)k z² − θz − ln(−z)` there; adding multiples of `v₀'` (the
/// homogeneous solution) shifts its constant.
#[derive(Debug, Clone)]
pub struct InnerProfiles {
    pub sigma: f64,
    pub theta: f64,
    /// Coefficient `B = s/3` of the `1/z` term of `v₀`.
    pub b_coef: f64,
    /// Point where `v₀ = 2`.
    pub z_ref: f64,
    /// Constant of `v₀ + θz + B/z` fitted on `z ∈ [−30, −15]`.
    pub a1: f64,
    /// Constant of `v₁ₚ + (3/16)k z² + θz + ln(−z)` fitted on the same window.
    pub v1_constant: f64,
    pub fit_residual: f64,
    v0: Hermite,
    dv0: Hermite,
    v1p: Hermite,
}

impl InnerProfiles {
    pub fn z_min(&self) -> f64 {
        self.v0.first()
    }

    pub fn z_max(&self) -> f64 {
        self.v0.last()
    }

    /// `v₀(z)`; beyond `z_max` the film value 1, below `z_min` `NaN`.
    pub fn v0(&self, z: f64) -> f64 {
        self.pick(z, &self.v0, 1.0)
    }

    pub fn dv0(&self, z: f64) -> f64 {
        self.pick(z, &self.dv0, 0.0)
    }

    /// Particular solution `v₁ₚ(z)`, tending to `1/16` as `z → ∞`.
    pub fn v1p(&self, z: f64) -> f64 {
        self.pick(z, &self.v1p, 1.0 / 16.0)
    }

    fn pick(&self, z: f64, curve: &Hermite, far: f64) -> f64 {
        if z < curve.first() {
            f64::NAN
        } else if z > curve.last() {
            far
        } else {
            curve.eval(z)
        }
    }

    /// Samples `(z, v₀, v₁ₚ)`.
    pub fn samples(&self) -> Vec<(f64, f64, f64)> {
        self.v0
            .abscissae()
            .iter()
            .zip(self.v0.values().iter().zip(self.v1p.values()))
            .map(|(&z, (&a, &b))| (z, a, b))
            .collect()
    }
}

/// `d/dz ln(v₀ − 1)` as a function of `y = ln(v₀ − 1)`.
fn log_v0_rate(big_k: f64, y: f64) -> f64 {
    let v = 1.0 + y.exp();
    let v2 = v * v;
    let q = 3.0 * v2 * v2 + 2.0 * v2 + 1.0;
    -big_k * (v + 1.0) * q.sqrt() / (8.0f64.sqrt() * v2 * v2)
}

/// `v₁'` from the linearized first integral,
/// `v₁' = k (Φ'(v₀) v₁ − (3/8)(v₀ − 1)) / v₀'`, with the common factor
/// `v₀ − 1` cancelled.
fn v1_rate(k: f64, y: f64, v1: f64) -> f64 {
    let big_k = (2.0 * k).sqrt();
    let v = 1.0 + y.exp();
    let v2 = v * v;
    let q = 3.0 * v2 * v2 + 2.0 * v2 + 1.0;
    let poly = ((((v + 1.0) * v + 1.0) * v + 1.0) * v + 1.0) * v + 1.0;
    -(k * 8.0f64.sqrt() * v2 * v2 / (big_k * (v + 1.0) * q.sqrt())) * (poly * v1 / v.powi(9) - 3.0 / 8.0)
}

fn fit_constant(zs: &[f64], g: &[f64], basis: impl Fn(f64) -> Vec<f64>) -> (Vec<f64>, f64) {
    let rows: Vec<Vec<f64>> = zs.iter().map(|&z| basis(z)).collect();
    let coef = least_squares(&rows, g);
    let rms = (rows
        .iter()
        .zip(g)
        .map(|(r, gv)| (r.iter().zip(&coef).map(|(a, b)| a * b).sum::<f64>() - gv).powi(2))
        .sum::<f64>()
        / rows.len() as f64)
        .sqrt();
    (coef, rms)
}

/// Integrates the leading and first-order inner problems.
///
/// `v₀` is carried as `y = ln(v₀ − 1)`, using
/// `3v⁸ − 4v⁶ + 1 = (v² − 1)²(3v⁴ + 2v² + 1)` so the square root has no
/// cancellation as `v₀ → 1`. Its translation comes from
/// `J = ∫₂^∞ (ρ − 1) dv` with `ρ = (1 − 4/(3v²) + 1/(3v⁸))^{−1/2}`.
pub fn inner_profiles(sigma: f64, grid: &InnerGrid) -> Result<InnerProfiles> {
    check_sigma(sigma)?;
    if grid.z_max < 20.0 || grid.z_far < 50.0 || !(grid.step > 0.0 && grid.step <= 0.05) {
        return Err(Error::Validation(format!("invalid inner grid {grid:?}")));
    }
    let k = k_factor(sigma);
    let big_k = (2.0 * k).sqrt();
    let theta = outer_slope(sigma)?;
    let s = contact_point(sigma)?;
    let b_coef = s / 3.0;

    // t = 1/v, (ρ − 1)/t² written without cancellation
    let rule = GaussLegendre::new(24);
    let j_int: f64 = (0..4)
        .map(|i| {
            rule.integrate(i as f64 / 8.0, (i + 1) as f64 / 8.0, |t| {
                let a = 4.0 * t * t / 3.0 - t.powi(8) / 3.0;
                let r = (1.0 - a).sqrt();
                (4.0 / 3.0 - t.powi(6) / 3.0) / (r * (1.0 + r))
            })
        })
        .sum();
    let z_ref = (j_int - 3.0) / theta;

    let dy = |y: f64| log_v0_rate(big_k, y);
    let dv1 = |y: f64, v1: f64| v1_rate(k, y, v1);

    let back = |_: f64, w: &[f64; 1]| [dy(w[0])];
    let n_back = ((z_ref + grid.z_far) / grid.step).ceil() as usize;
    let hb = -(z_ref + grid.z_far) / n_back as f64;
    let mut y = [0.0];
    for i in 0..n_back {
        y = rk4_step(&back, z_ref + i as f64 * hb, &y, hb);
    }

    let z0 = -grid.z_far;
    let n_fwd = ((grid.z_max - z0) / grid.step).ceil() as usize;
    let hf = (grid.z_max - z0) / n_fwd as f64;
    let joint = |_: f64, w: &[f64; 2]| [dy(w[0]), dv1(w[0], w[1])];
    let mut state = [y[0], -3.0 / 16.0 * k * z0 * z0 - theta * z0 - (-z0).ln()];
    let cap = n_fwd + 1;
    let (mut zs, mut v0, mut v0d, mut v0dd, mut v1, mut v1d) = (
        Vec::with_capacity(cap),
        Vec::with_capacity(cap),
        Vec::with_capacity(cap),
        Vec::with_capacity(cap),
        Vec::with_capacity(cap),
        Vec::with_capacity(cap),
    );
    for i in 0..=n_fwd {
        let z = if i == n_fwd { grid.z_max } else { z0 + i as f64 * hf };
        let ey = state[0].exp();
        let v = 1.0 + ey;
        let slope = ey * dy(state[0]);
        // v₀'' = k Φ'(v₀) with Φ'(v) = (v − 1)(v⁵ + … + 1)/v⁹
        let poly = ((((v + 1.0) * v + 1.0) * v + 1.0) * v + 1.0) * v + 1.0;
        zs.push(z);
        v0.push(v);
        v0d.push(slope);
        v0dd.push(k * ey * poly / v.powi(9));
        v1.push(state[1]);
        v1d.push(dv1(state[0], state[1]));
        if i < n_fwd {
            state = rk4_step(&joint, z, &state, hf);
        }
        if !state[0].is_finite() || !state[1].is_finite() {
            return Err(Error::numerical("inner integration diverged", f64::NAN));
        }
    }

    let v0c = Hermite::new(zs.clone(), v0, v0d.clone());
    let dv0c = Hermite::new(zs.clone(), v0d, v0dd);
    let v1c = Hermite::new(zs, v1, v1d);

    let window: Vec<f64> = (0..=300).map(|i| -30.0 + 15.0 * i as f64 / 300.0).collect();
    let g0: Vec<f64> = window.iter().map(|&z| v0c.eval(z) + theta * z + b_coef / z).collect();
    let (c0, r0) = fit_constant(&window, &g0, |z| vec![1.0, z.powi(-2), z.powi(-3)]);
    let g1: Vec<f64> = window
        .iter()
        .map(|&z| v1c.eval(z) + 3.0 / 16.0 * k * z * z + theta * z + (-z).ln())
        .collect();
    let (c1, r1) = fit_constant(&window, &g1, |z| vec![1.0, z.powi(-2), (-z).ln() * z.powi(-2)]);
    let fit_residual = r0.max(r1);
    if fit_residual > 1e-6 || (c0[0] + 1.0).abs() > 1e-3 {
        return Err(Error::numerical(
            format!("inner asymptote fit failed: a1 = {}, v1 constant = {}", c0[0], c1[0]),
            fit_residual,
        ));
    }
    Ok(InnerProfiles {
        sigma,
        theta,
        b_coef,
        z_ref,
        a1: c0[0],
        v1_constant: c1[0],
        fit_residual,
        v0: v0c,
        dv0: dv0c,
        v1p: v1c,
    })
}

/// Everything needed to evaluate the composite droplet at one `(ε, σ)`.
#[derive(Debug, Clone)]
pub struct AsymptoticSolution {
    pub sigma: f64,
    pub epsilon: f64,
    pub s: f64,
    pub theta: f64,
    pub h_inf_coeffs: [f64; 3],
    /// Inner matching constant recovered from `v₀`.
    pub a1: f64,
    /// Switch-back constant `C = −ln ε − 35/96 − ln((√3/8)√((σ+1)/σ))`; the
    /// constant of `v₁` at `z → −∞` is `C + 1/6`.
    pub switchback: f64,
    /// Multiple of `v₀'` added to `v₁ₚ` to reach that constant.
    pub v1_shift: f64,
    pub outer: OuterCorrections,
    pub inner: InnerProfiles,
}

/// A composite value together with a flag raised when the second-order
/// overlap was interpolated rather than evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompositePoint {
    pub h: f64,
    pub interpolated: bool,
}

impl AsymptoticSolution {
    pub fn new(epsilon: f64, sigma: f64) -> Result<Self> {
        Self::with_grids(epsilon, sigma, &OuterGrid::default(), &InnerGrid::default())
    }

    pub fn with_grids(epsilon: f64, sigma: f64, outer: &OuterGrid, inner: &InnerGrid) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 0.5) {
            return Err(Error::Validation(format!("epsilon must lie in (0, 0.5), got {epsilon}")));
        }
        let outer = outer_corrections(sigma, outer)?;
        let inner = inner_profiles(sigma, inner)?;
        let theta = inner.theta;
        let switchback = -epsilon.ln() - 35.0 / 96.0 - ((3.0f64).sqrt() / 8.0 * k_factor(sigma).sqrt()).ln();
        let target = switchback + 1.0 / 6.0;
        // v₀' → −θ as z → −∞
        let v1_shift = (target - inner.v1_constant) / -theta;
        Ok(AsymptoticSolution {
            sigma,
            epsilon,
            s: outer.s,
            theta,
            h_inf_coeffs: H_INF_COEFFS,
            a1: inner.a1,
            switchback,
            v1_shift,
            outer,
            inner,
        })
    }

    /// `v₁(z)` including its switch-back constant.
    pub fn v1(&self, z: f64) -> f64 {
        self.inner.v1p(z) + self.v1_shift * self.inner.dv0(z)
    }

    /// Far-field value `εv₀(∞) + ε²v₁(∞)` of the composite.
    pub fn far_field(&self) -> f64 {
        self.epsilon + self.epsilon * self.epsilon / 16.0
    }

    /// `f₀ + εf₁ + ε²f₂` for `x` inside the sampled outer range.
    pub fn outer_sum(&self, x: f64) -> f64 {
        let e = self.epsilon;
        let r = x / self.s;
        (1.0 - r * r) + e * self.outer.f1(x) + e * e * self.outer.f2(x)
    }

    /// Overlap of the inner and outer expansions for `z < 0`.
    pub fn common(&self, z: f64) -> f64 {
        let e = self.epsilon;
        let k = k_factor(self.sigma);
        let first = -self.theta * z - 1.0 - self.inner.b_coef / z;
        let second = -3.0 / 16.0 * k * z * z - self.theta * z - (-z).ln() + self.switchback + 1.0 / 6.0;
        e * first + e * e * second
    }

    fn inner_sum(&self, z: f64) -> f64 {
        let e = self.epsilon;
        e * self.inner.v0(z) + e * e * self.v1(z)
    }

    /// Composite at `x` (even in `x`).
    pub fn evaluate(&self, x: f64) -> CompositePoint {
        let x = x.abs();
        let z = (x - self.s) / self.epsilon;
        if z >= 0.0 {
            return CompositePoint { h: self.inner_sum(z), interpolated: false };
        }
        if z < self.inner.z_min() + 10.0 {
            // inner minus overlap is below roundoff this far out
            return CompositePoint { h: self.outer_sum(x), interpolated: false };
        }
        let x_gap = self.outer.x_max();
        if x <= x_gap {
            return CompositePoint {
                h: self.outer_sum(x) + self.inner_sum(z) - self.common(z),
                interpolated: false,
            };
        }
        // outer − overlap vanishes linearly at s; bridge the last sliver
        let z_gap = (x_gap - self.s) / self.epsilon;
        let bridge = self.outer_sum(x_gap) - self.common(z_gap);
        let frac = (self.s - x) / (self.s - x_gap);
        CompositePoint { h: bridge * frac + self.inner_sum(z), interpolated: true }
    }

    pub fn composite(&self, x: f64) -> f64 {
        self.evaluate(x).h
    }
}

/// Composite droplet height at a single point.
pub fn composite_solution(x: f64, epsilon: f64, sigma: f64) -> Result<f64> {
    if x < 0.0 {
        return Err(Error::Domain(format!("x must be nonnegative, got {x}")));
    }
    Ok(AsymptoticSolution::new(epsilon, sigma)?.composite(x))
}

/// Uniform grid on `[0, x_max]` merged with a finer uniform grid on the
/// transition layer `[s − 5ε, s + 5ε]`.
pub fn composite_grid(epsilon: f64, s: f64, x_max: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    let mut xs: Vec<f64> = (0..n).map(|i| x_max * i as f64 / (n - 1) as f64).collect();
    let (a, b) = ((s - 5.0 * epsilon).max(0.0), (s + 5.0 * epsilon).min(x_max));
    if b > a {
        xs.extend((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64));
    }
    xs.sort_by(f64::total_cmp);
    xs.dedup_by(|p, q| (*p - *q).abs() < 1e-14);
    xs
}

/// Layers reconstructed from the composite droplet on `grid`.
pub fn composite_layers(sol: &AsymptoticSolution, d: f64, grid: &[f64]) -> Result<TwoLayerProfile> {
    if grid.len() < 2 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Validation("composite grid must be strictly increasing".into()));
    }
    let h: Vec<f64> = grid.iter().map(|&x| sol.composite(x)).collect();
    let apex = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    reconstruct_layers_from(grid.to_vec(), &h, sol.far_field(), apex, d, sol.sigma)
}

/// Leading-order state in a box with Dirichlet data `h₁ = A`, `h₂ = B` at both walls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletSolution {
    pub layers: TwoLayerProfile,
    pub lambda1: f64,
    pub lambda2: f64,
    pub c1: f64,
    /// Half-width of the droplet `ω = (L/2 − s, L/2 + s)`.
    pub s: f64,
    pub length: f64,
    pub sigma: f64,
}

impl DirichletSolution {
    /// `(h₁, h₂)` at `x`.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let xi = x - 0.5 * self.length;
        let q = xi * xi - self.s * self.s;
        if q < 0.0 {
            (
                0.5 * (self.lambda1 - self.lambda2) / self.sigma * q + self.c1,
                -0.5 * self.lambda1 * q + self.c1,
            )
        } else {
            let v = -0.5 * self.lambda2 / (self.sigma + 1.0) * q + self.c1;
            (v, v)
        }
    }

    /// `(∫h₁, ∫(h₂ − h₁))`, exact for the piecewise quadratics.
    pub fn masses(&self) -> (f64, f64) {
        let rule = GaussLegendre::new(3);
        let mid = 0.5 * self.length;
        let cuts = [0.0, mid - self.s, mid + self.s, self.length];
        let mut m = (0.0, 0.0);
        for w in cuts.windows(2) {
            m.0 += rule.integrate(w[0], w[1], |x| self.eval(x).0);
            m.1 += rule.integrate(w[0], w[1], |x| {
                let (h1, h2) = self.eval(x);
                h2 - h1
            });
        }
        m
    }
}

/// Leading-order Dirichlet profiles: quadratic layers over the droplet
/// `ω = (L/2 − s, L/2 + s)` and a single quadratic ultra-thin region outside.
///
/// Inside `ω` the thickness is `(P/2)(s² − (x − L/2)²)` with
/// `P = ((σ+1)λ₁ − λ₂)/σ`. The contact slope `Ps = √(2c)`,
/// `c = |Φ(1)|(σ+1)/σ`, gives `s² = 2|Φ(1)|σ(σ+1)/(λ₂ − (σ+1)λ₁)²`; with the
/// droplet mass this fixes `s = √(3m₂/(2√(2c)))`. The wall value `A` and the
/// mass `m₁` then fix `C₁` and `λ₂` through a linear system.
#[allow(clippy::too_many_arguments)]
pub fn dirichlet_leading_order(
    a: f64,
    b: f64,
    length: f64,
    sigma: f64,
    m1: f64,
    m2: f64,
    abs_phi1: f64,
    n: usize,
) -> Result<DirichletSolution> {
    check_sigma(sigma)?;
    for (name, v) in [("L", length), ("m1", m1), ("m2", m2), ("|Phi(1)|", abs_phi1)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Validation(format!("{name} must be positive, got {v}")));
        }
    }
    if n < 3 {
        return Err(Error::Validation(format!("need at least 3 grid nodes, got {n}")));
    }
    if b < a {
        return Err(Error::Model(format!("upper wall value {b} lies below lower wall value {a}")));
    }
    let s1 = sigma + 1.0;
    let slope = (2.0 * abs_phi1 * s1 / sigma).sqrt();
    let s = (1.5 * m2 / slope).sqrt();
    let half = 0.5 * length;
    if s >= half {
        return Err(Error::Model(format!("droplet half-width {s} does not fit in half box {half}")));
    }
    let p = slope / s;
    // m₁ = A L − (2/3) s³ P/(σ+1) + λ₂ L³ / (12 (σ+1))
    let lambda2 = (m1 - a * length + 2.0 / 3.0 * s.powi(3) * p / s1) * 12.0 * s1 / length.powi(3);
    let lambda1 = (sigma * p + lambda2) / s1;
    let c1 = a + lambda2 / (2.0 * s1) * (half * half - s * s);
    let mut sol = DirichletSolution {
        layers: TwoLayerProfile::new(vec![0.0, length], vec![a, a], vec![a, a], a, sigma)?,
        lambda1,
        lambda2,
        c1,
        s,
        length,
        sigma,
    };
    let x = crate::numerics::linspace(0.0, length, n);
    let (h1, h2): (Vec<f64>, Vec<f64>) = x.iter().map(|&xv| sol.eval(xv)).unzip();
    sol.layers = TwoLayerProfile::new(x, h1, h2, a, sigma)?;
    Ok(sol)
}
