//! Stationary droplets on the real line by first-integral quadrature, their
//! two-layer reconstruction, the Neumann-box stationary state, pressures and
//! the mobility matrix.

use serde::{Deserialize, Serialize};

use crate::numerics::{find_root, fd_weights, trapezoid_weights, GaussLegendre, Hermite};
use crate::potential::PotentialSpec;
use crate::{Error, Result};

/// Ratio `(σ+1)/σ` that multiplies the potential in the droplet equation.
pub fn k_factor(sigma: f64) -> f64 {
    (sigma + 1.0) / sigma
}

pub(crate) fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::Validation(format!("sigma must be positive, got {sigma}")))
    }
}

/// Sampled droplet `h(x)` for `x ≥ 0` with apex `h(0) = 1`.
///
/// Samples carry exact slopes, so [`DropletProfile::eval`] is a cubic Hermite
/// interpolant. Beyond the last sample the profile is the constant `h∞`.
#[derive(Debug, Clone)]
pub struct DropletProfile {
    pub sigma: f64,
    pub epsilon: f64,
    pub h_infinity: f64,
    pub apex_height: f64,
    /// Where `h` crosses `2ε`.
    pub contact_estimate: f64,
    curve: Hermite,
}

impl DropletProfile {
    pub fn x(&self) -> &[f64] {
        self.curve.abscissae()
    }

    pub fn h(&self) -> &[f64] {
        self.curve.values()
    }

    pub fn slope(&self) -> &[f64] {
        self.curve.slopes()
    }

    pub fn samples(&self) -> Vec<(f64, f64)> {
        self.x().iter().copied().zip(self.h().iter().copied()).collect()
    }

    /// Last sampled abscissa; the profile is flat beyond it.
    pub fn x_far(&self) -> f64 {
        self.curve.last()
    }

    /// `h(x)`, extended evenly to `x < 0`.
    pub fn eval(&self, x: f64) -> f64 {
        let x = x.abs();
        if x > self.x_far() {
            self.h_infinity
        } else {
            self.curve.eval(x)
        }
    }
}

/// Sampling of the quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Intervals in `u = √(1−h)` between the apex and the midpoint height.
    pub apex_intervals: usize,
    /// Intervals in `ln(h − h∞)` from the midpoint height to the far field.
    pub tail_intervals: usize,
    /// Quadrature stops at `h = h∞(1 + delta)`.
    pub delta: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            apex_intervals: 1000,
            tail_intervals: 2000,
            delta: 1e-8,
        }
    }
}

/// Far-field thickness `h∞`: the root in `(ε, 2ε)` of
/// `Φ(1/ε) − Φ(h∞/ε) − Φ'(h∞/ε)(1/ε − h∞/ε) = 0`.
///
/// Newton in `v = h∞/ε` from `v = 1`, safeguarded by bisection.
pub fn solve_h_infinity(pot: &PotentialSpec, tolerance: f64) -> Result<f64> {
    let eps = pot.epsilon;
    if eps >= 0.5 {
        return Err(Error::Validation(format!("epsilon must be below 0.5, got {eps}")));
    }
    let w = 1.0 / eps;
    let g = |v: f64| pot.big_phi_raw(w) - pot.big_phi_raw(v) - pot.big_phi_prime_raw(v) * (w - v);
    let dg = |v: f64| -pot.big_phi_second_raw(v) * (w - v);
    let mut lo = 1.0;
    let mut hi = 2.0f64.min(0.5 * (1.0 + w));
    if g(hi) >= 0.0 {
        return Err(Error::numerical("h_infinity root not bracketed", g(hi)));
    }
    let mut v = 1.0;
    for _ in 0..200 {
        let gv = g(v);
        if gv > 0.0 {
            lo = v;
        } else {
            hi = v;
        }
        let mut next = v - gv / dg(v);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let step = next - v;
        v = next;
        if step.abs() <= 4.0 * f64::EPSILON * v {
            let r = g(v);
            // one ulp in v moves g by about |g'| v ε_mach
            if r.abs() <= tolerance + 8.0 * f64::EPSILON * v * dg(v).abs() {
                return Ok(eps * v);
            }
            return Err(Error::numerical("h_infinity residual above tolerance", r));
        }
    }
    Err(Error::numerical("h_infinity iteration did not converge", g(v)))
}

/// `∂x h` on the decreasing branch of the first integral.
pub fn first_integral_slope(
    pot: &PotentialSpec,
    sigma: f64,
    h: f64,
    h_infinity: f64,
) -> Result<f64> {
    check_sigma(sigma)?;
    if !(h > 0.0 && h_infinity > 0.0) {
        return Err(Error::Domain(format!("h = {h} and h_infinity = {h_infinity} must be positive")));
    }
    let eps = pot.epsilon;
    let r = pot.taylor_remainder(h / eps, h_infinity / eps);
    if r < -1e-12 {
        return Err(Error::Domain(format!(
            "negative radicand {r:e} at h = {h}: inconsistent with h_infinity = {h_infinity}"
        )));
    }
    Ok(-(2.0 * k_factor(sigma) * r.max(0.0)).sqrt())
}

/// Droplet profile by quadrature of `dx = dh / ∂x h`.
///
/// The apex piece is integrated in `u` with `h = 1 − u²`, which removes the
/// square-root singularity of `dx/dh` at `h = 1`. The tail uses
/// `t = ln(h − h∞)`, in which the exponential approach to `h∞` is regular.
pub fn solve_droplet(pot: &PotentialSpec, sigma: f64, grid: &GridSpec) -> Result<DropletProfile> {
    check_sigma(sigma)?;
    if grid.apex_intervals < 2 || grid.tail_intervals < 2 || !(grid.delta > 0.0 && grid.delta < 1.0) {
        return Err(Error::Validation(format!("invalid grid specification {grid:?}")));
    }
    let eps = pot.epsilon;
    let h_inf = solve_h_infinity(pot, 1e-13)?;
    let big_k = (2.0 * k_factor(sigma)).sqrt();
    let w_top = 1.0 / eps;
    let v_inf = h_inf / eps;
    // R(h) = rem(h/ε, 1/ε) + r1 (1 − h), exact rearrangement near the apex.
    let r1 = (pot.big_phi_prime_raw(v_inf) - pot.big_phi_prime_raw(w_top)) / eps;
    let h_switch = 0.5 * (1.0 + h_inf);
    let rule = GaussLegendre::new(8);

    let mut xs = vec![0.0];
    let mut hs = vec![1.0];
    let mut ds = vec![0.0];

    // dx/du = 2u / (K √R) = 2 / (K √(R/u²))
    let apex_rate = |u: f64| {
        let u2 = u * u;
        let ratio = pot.taylor_remainder((1.0 - u2) / eps, w_top) / u2 + r1;
        2.0 / (big_k * ratio.sqrt())
    };
    let u_max = (1.0 - h_switch).sqrt();
    let du = u_max / grid.apex_intervals as f64;
    let mut x = 0.0;
    for i in 0..grid.apex_intervals {
        let a = i as f64 * du;
        let b = if i + 1 == grid.apex_intervals { u_max } else { a + du };
        x += rule.integrate(a, b, apex_rate);
        let h = 1.0 - b * b;
        let r = pot.taylor_remainder(h / eps, w_top) + r1 * (1.0 - h);
        xs.push(x);
        hs.push(h);
        ds.push(-big_k * r.max(0.0).sqrt());
    }

    // dx/dt = η / (K √R), η = h − h∞, integrated toward decreasing t.
    let tail_rate = |t: f64| {
        let eta = t.exp();
        let r = pot.taylor_remainder((h_inf + eta) / eps, v_inf);
        eta / (big_k * r.sqrt())
    };
    let t_top = (h_switch - h_inf).ln();
    let t_bot = (grid.delta * h_inf).ln();
    let dt = (t_top - t_bot) / grid.tail_intervals as f64;
    for i in 0..grid.tail_intervals {
        let a = t_top - i as f64 * dt;
        let b = if i + 1 == grid.tail_intervals { t_bot } else { a - dt };
        x += rule.integrate(b, a, tail_rate);
        let eta = b.exp();
        let r = pot.taylor_remainder((h_inf + eta) / eps, v_inf);
        xs.push(x);
        hs.push(h_inf + eta);
        ds.push(-big_k * r.max(0.0).sqrt());
    }
    if xs.iter().any(|v| !v.is_finite()) || xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::numerical("droplet quadrature produced a non-monotone abscissa", f64::NAN));
    }

    let target = 2.0 * eps;
    let idx = hs.iter().position(|&h| h < target).ok_or_else(|| {
        Error::numerical("droplet profile never falls below 2 epsilon", hs[hs.len() - 1] - target)
    })?;
    let curve = Hermite::new(xs, hs, ds);
    let (xa, xb) = (curve.abscissae()[idx - 1], curve.abscissae()[idx]);
    let contact_estimate = find_root(|t| curve.eval(t) - target, xa, xb, 1e-15)?;

    Ok(DropletProfile {
        sigma,
        epsilon: eps,
        h_infinity: h_inf,
        apex_height: 1.0,
        contact_estimate,
        curve,
    })
}

/// Sampled pair of layers on a shared grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoLayerProfile {
    pub x: Vec<f64>,
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
    /// Far-field (or wall) depth of the lower layer.
    pub d: f64,
    /// Trapezoidal masses over the sampled range.
    pub m1: f64,
    pub m2: f64,
    pub sigma: f64,
}

impl TwoLayerProfile {
    /// Builds the profile and computes both masses on the grid.
    pub fn new(x: Vec<f64>, h1: Vec<f64>, h2: Vec<f64>, d: f64, sigma: f64) -> Result<Self> {
        if x.len() != h1.len() || x.len() != h2.len() || x.len() < 2 {
            return Err(Error::Validation("layer samples must share a grid of at least 2 nodes".into()));
        }
        let gap: Vec<f64> = h2.iter().zip(&h1).map(|(b, a)| b - a).collect();
        let m1 = trapezoid(&x, &h1);
        let m2 = trapezoid(&x, &gap);
        Ok(TwoLayerProfile { x, h1, h2, d, m1, m2, sigma })
    }

    /// `h = h₂ − h₁` at every node.
    pub fn thickness(&self) -> Vec<f64> {
        self.h2.iter().zip(&self.h1).map(|(b, a)| b - a).collect()
    }
}

/// Trapezoidal rule on an arbitrary increasing grid.
pub fn trapezoid(x: &[f64], f: &[f64]) -> f64 {
    x.windows(2)
        .zip(f.windows(2))
        .map(|(xw, fw)| 0.5 * (xw[1] - xw[0]) * (fw[0] + fw[1]))
        .sum()
}

/// Lower and upper layers of a droplet whose lower layer has far-field depth `d`.
pub fn reconstruct_layers(profile: &DropletProfile, d: f64) -> Result<TwoLayerProfile> {
    reconstruct_layers_from(
        profile.x().to_vec(),
        profile.h(),
        profile.h_infinity,
        profile.apex_height,
        d,
        profile.sigma,
    )
}

/// `h₁ = −(h−h∞)/(σ+1) + d` and `h₂ = σ(h−h∞)/(σ+1) + d + h∞` for any sampled
/// thickness `h` with maximum `apex`.
pub fn reconstruct_layers_from(
    x: Vec<f64>,
    h: &[f64],
    h_inf: f64,
    apex: f64,
    d: f64,
    sigma: f64,
) -> Result<TwoLayerProfile> {
    check_sigma(sigma)?;
    let s1 = sigma + 1.0;
    let min_depth = (apex - h_inf) / s1;
    if !(d > min_depth) {
        return Err(Error::Validation(format!(
            "lower layer pierced: depth {d} must exceed {min_depth}"
        )));
    }
    let h1 = h.iter().map(|&v| -(v - h_inf) / s1 + d).collect();
    let h2 = h.iter().map(|&v| sigma * (v - h_inf) / s1 + d + h_inf).collect();
    TwoLayerProfile::new(x, h1, h2, d, sigma)
}

/// Pressures and Lagrange multipliers of a two-layer state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PressureField {
    pub x: Vec<f64>,
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl PressureField {
    /// Largest `|∂x p|` over both pressures, by central differences at
    /// nodes at least `margin` away from either end.
    pub fn max_interior_gradient(&self, margin: usize) -> f64 {
        let n = self.x.len();
        let mut worst: f64 = 0.0;
        for i in margin.max(1)..n.saturating_sub(margin.max(1)) {
            let dx = self.x[i + 1] - self.x[i - 1];
            for p in [&self.p1, &self.p2] {
                worst = worst.max(((p[i + 1] - p[i - 1]) / dx).abs());
            }
        }
        worst
    }
}

/// Second derivative by three-point stencils inside and four-point one-sided
/// stencils at the ends; works on non-uniform grids.
pub fn second_derivative(x: &[f64], f: &[f64]) -> Result<Vec<f64>> {
    second_derivative_wide(x, f, 3)
}

/// Second derivative from `points`-node stencils (odd, at least 3), centred
/// where possible and shifted inward near the ends, which use one extra node.
pub fn second_derivative_wide(x: &[f64], f: &[f64], points: usize) -> Result<Vec<f64>> {
    let n = x.len();
    if points < 3 || points % 2 == 0 {
        return Err(Error::Validation(format!("stencil width must be odd and at least 3, got {points}")));
    }
    if n < points + 2 || f.len() != n {
        return Err(Error::Validation(format!("grid too coarse for pressures: {n} nodes")));
    }
    let half = points / 2;
    let mut out = vec![0.0; n];
    for i in 0..n {
        let range = if i < half {
            0..points + 1
        } else if i + half >= n {
            n - points - 1..n
        } else {
            i - half..i + half + 1
        };
        let w = fd_weights(&x[range.clone()], x[i], 2);
        out[i] = w.iter().zip(&f[range]).map(|(a, b)| a * b).sum();
    }
    Ok(out)
}

/// `p₁ = −σ h₁'' − φ'_ε(h₂−h₁)` and `p₂ = −h₂'' + φ'_ε(h₂−h₁)`.
///
/// The multipliers are the weighted means `λ₁ = ⟨p₂⟩` and `λ₂ = ⟨p₁ + p₂⟩`.
pub fn pressures(layers: &TwoLayerProfile, pot: &PotentialSpec, sigma: f64) -> Result<PressureField> {
    pressures_wide(layers, pot, sigma, 3)
}

/// [`pressures`] with `points`-node difference stencils, for smooth profiles
/// sampled on strongly non-uniform grids.
pub fn pressures_wide(layers: &TwoLayerProfile, pot: &PotentialSpec, sigma: f64, points: usize) -> Result<PressureField> {
    check_sigma(sigma)?;
    let h1xx = second_derivative_wide(&layers.x, &layers.h1, points)?;
    let h2xx = second_derivative_wide(&layers.x, &layers.h2, points)?;
    let mut p1 = Vec::with_capacity(h1xx.len());
    let mut p2 = Vec::with_capacity(h1xx.len());
    for (i, h) in layers.thickness().into_iter().enumerate() {
        let dphi = pot.phi_prime_eps(h)?;
        p1.push(-sigma * h1xx[i] - dphi);
        p2.push(-h2xx[i] + dphi);
    }
    let len = layers.x[layers.x.len() - 1] - layers.x[0];
    let sum: Vec<f64> = p1.iter().zip(&p2).map(|(a, b)| a + b).collect();
    let lambda1 = trapezoid(&layers.x, &p2) / len;
    let lambda2 = trapezoid(&layers.x, &sum) / len;
    Ok(PressureField { x: layers.x.clone(), p1, p2, lambda1, lambda2 })
}

/// Pressures of a quadrature droplet with layers of depth `d`, taking `h''`
/// from seven-point differences of the sampled slopes rather than of `h`.
pub fn droplet_pressures(profile: &DropletProfile, d: f64, pot: &PotentialSpec) -> Result<PressureField> {
    let layers = reconstruct_layers(profile, d)?;
    let (x, slope) = (profile.x(), profile.slope());
    let n = x.len();
    if n < 8 {
        return Err(Error::Validation(format!("grid too coarse for pressures: {n} nodes")));
    }
    let sigma = profile.sigma;
    let s1 = sigma + 1.0;
    let mut p1 = Vec::with_capacity(n);
    let mut p2 = Vec::with_capacity(n);
    for i in 0..n {
        let lo = i.saturating_sub(3).min(n - 7);
        let w = fd_weights(&x[lo..lo + 7], x[i], 1);
        let hxx: f64 = w.iter().zip(&slope[lo..lo + 7]).map(|(a, b)| a * b).sum();
        let dphi = pot.phi_prime_eps(profile.h()[i])?;
        p1.push(sigma * hxx / s1 - dphi);
        p2.push(-sigma * hxx / s1 + dphi);
    }
    let len = x[n - 1] - x[0];
    let sum: Vec<f64> = p1.iter().zip(&p2).map(|(a, b)| a + b).collect();
    let lambda1 = trapezoid(&layers.x, &p2) / len;
    let lambda2 = trapezoid(&layers.x, &sum) / len;
    Ok(PressureField { x: layers.x, p1, p2, lambda1, lambda2 })
}

/// Mobility matrix at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobilityMatrix {
    pub mu: f64,
    pub q: [[f64; 2]; 2],
    pub det: f64,
}

/// Mobility matrix for layer heights `h₁` and `h₂ ≥ h₁` and viscosity ratio `μ`.
pub fn mobility(h1: f64, h2: f64, mu: f64) -> Result<MobilityMatrix> {
    if !(h1 > 0.0 && h2 >= h1 && h2.is_finite()) {
        return Err(Error::Domain(format!("mobility needs 0 < h1 <= h2, got h1 = {h1}, h2 = {h2}")));
    }
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::Validation(format!("mu must be positive, got {mu}")));
    }
    let h = h2 - h1;
    let q11 = h1.powi(3) / 3.0 / mu;
    let q12 = (h1.powi(3) / 3.0 + 0.5 * h1 * h1 * h) / mu;
    let q22 = (mu * h.powi(3) / 3.0 + h1 * h2 * h + h1.powi(3) / 3.0) / mu;
    // expanded to avoid cancellation in q11 q22 − q12²
    let det = (mu * h1.powi(3) * h.powi(3) / 9.0 + h1.powi(4) * h * h / 12.0) / (mu * mu);
    Ok(MobilityMatrix { mu, q: [[q11, q12], [q12, q22]], det })
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Shot {
    /// Still rising at the centre: the film start `δ` was too small.
    Short,
    /// Turned over before the centre.
    Long,
}

/// Right half of a discrete Neumann droplet, marched from the wall inward in
/// the deviation `e = h̄ − h_a` from the film thickness `h_a`, whose pressure
/// `P = φ'_ε(h_a)` makes `h_a` an exact fixed point of the recursion.
struct HalfShooter<'a> {
    pot: &'a PotentialSpec,
    k: f64,
    dx2: f64,
    n: usize,
    h_a: f64,
}

impl HalfShooter<'_> {
    /// Index of the last node to compute and the node it must mirror.
    fn centre(&self) -> (usize, usize) {
        let n = self.n;
        if n % 2 == 1 {
            let c = (n - 1) / 2;
            (c - 1, c + 1)
        } else {
            let c = n / 2;
            (c - 1, c)
        }
    }

    fn shoot(&self, delta: f64, out: &mut Vec<f64>) -> Shot {
        let n = self.n;
        let (last, mirror) = self.centre();
        out.clear();
        out.resize(n, f64::NAN);
        let rate = |e: f64| self.dx2 * self.k * self.pot.phi_prime_increment(self.h_a, e);
        out[n - 1] = delta;
        out[n - 2] = delta + 0.5 * rate(delta);
        let mut i = n - 2;
        while i > last {
            let next = 2.0 * out[i] - out[i + 1] + rate(out[i]);
            out[i - 1] = next;
            i -= 1;
            if next < out[i + 1] && i > last {
                return Shot::Long;
            }
            if !(next > -0.5 * self.h_a) {
                return Shot::Long;
            }
        }
        if out[last] > out[mirror] {
            Shot::Short
        } else {
            Shot::Long
        }
    }
}

enum Fit {
    Profile(Vec<f64>),
    /// Even the earliest take-off leaves the droplet too narrow.
    TooSmall,
    /// Even the latest take-off overshoots the centre.
    TooLarge,
}

fn shoot_profile(pot: &PotentialSpec, k: f64, dx: f64, n: usize, h_a: f64) -> Result<Fit> {
    let p = pot.phi_prime_eps_raw(h_a);
    // upper fixed point h_b > h_a of φ'_ε(h) = P
    let v_peak = ((pot.ell as f64 + 1.0) / (pot.n as f64 + 1.0)).powf(1.0 / (pot.ell - pot.n) as f64);
    let h_peak = pot.epsilon * v_peak;
    let mut top = 2.0 * h_peak;
    while pot.phi_prime_eps_raw(top) > p {
        top *= 2.0;
    }
    let h_b = find_root(|h| pot.phi_prime_eps_raw(h) - p, h_peak, top, 1e-15 * top)?;
    let shooter = HalfShooter { pot, k, dx2: dx * dx, n, h_a };
    let mut buf = Vec::new();
    let mut lo = (1e-300f64).ln();
    let mut hi = ((h_b - h_a) * (1.0 - 1e-9)).ln();
    if shooter.shoot(lo.exp(), &mut buf) == Shot::Long {
        return Ok(Fit::TooSmall);
    }
    if shooter.shoot(hi.exp(), &mut buf) == Shot::Short {
        return Ok(Fit::TooLarge);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match shooter.shoot(mid.exp(), &mut buf) {
            Shot::Short => lo = mid,
            Shot::Long => hi = mid,
        }
    }
    // A wall value far above the film is a perturbed thick film, not a droplet.
    if lo.exp() > 0.1 * h_a {
        return Ok(Fit::TooLarge);
    }
    shooter.shoot(lo.exp(), &mut buf);
    let (last, _) = shooter.centre();
    for i in 0..=last {
        buf[i] = buf[n - 1 - i];
    }
    Ok(Fit::Profile(buf.into_iter().map(|e| h_a + e).collect()))
}

/// Stationary two-layer state with masses `m1`, `m2` in the box `(0, L)` with
/// no-flux walls: a single droplet centred at `L/2` on `n` uniform nodes.
///
/// The droplet `h̄` solves the discrete stationary equation
/// `h̄'' = ((σ+1)/σ)(φ'_ε(h̄) − P)` with mirror ghost nodes at the walls. It is
/// found by shooting from the wall in the film start height, nested inside a
/// bisection on the film thickness (equivalently the pressure `P`) that fixes
/// the mass. The layers are then `h₁ = −h̄/(σ+1) + C₁` and
/// `h₂ = σh̄/(σ+1) + C₁`.
pub fn neumann_stationary(
    m1: f64,
    m2: f64,
    length: f64,
    pot: &PotentialSpec,
    sigma: f64,
    n: usize,
) -> Result<(TwoLayerProfile, PressureField)> {
    check_sigma(sigma)?;
    for (name, v) in [("m1", m1), ("m2", m2), ("L", length)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Validation(format!("{name} must be positive, got {v}")));
        }
    }
    if n < 8 {
        return Err(Error::Validation(format!("need at least 8 grid nodes, got {n}")));
    }
    let k = k_factor(sigma);
    let dx = length / (n - 1) as f64;
    let weights = trapezoid_weights(n, dx);
    let mass = |h: &[f64]| h.iter().zip(&weights).map(|(a, b)| a * b).sum::<f64>();

    let eps = pot.epsilon;
    let v_peak = ((pot.ell as f64 + 1.0) / (pot.n as f64 + 1.0)).powf(1.0 / (pot.ell - pot.n) as f64);
    // film thickness h_a = ε(1 + e^y); mass decreases with y
    let film = |y: f64| eps * (1.0 + y.exp());
    let mut lo = (1e-10f64).ln();
    let mut hi = ((v_peak - 1.0) * 0.999).ln();
    let excess = |y: f64| -> Result<(f64, Option<Vec<f64>>)> {
        Ok(match shoot_profile(pot, k, dx, n, film(y))? {
            Fit::Profile(h) => (mass(&h) - m2, Some(h)),
            Fit::TooLarge => (f64::INFINITY, None),
            Fit::TooSmall => (f64::NEG_INFINITY, None),
        })
    };
    // Near the potential peak no droplet shape exists at all, so scan for the
    // first sign change of the mass excess before bisecting.
    let scan = 64;
    let (y0, y1) = (lo, hi);
    let mut bracket = None;
    let mut lo_finite;
    let mut prev = excess(y0)?.0;
    let mut largest = if prev.is_finite() { prev } else { f64::NEG_INFINITY };
    for j in 1..=scan {
        let y = y0 + (y1 - y0) * j as f64 / scan as f64;
        let f = excess(y)?.0;
        if f.is_finite() {
            largest = largest.max(f);
        }
        if prev > 0.0 && f <= 0.0 {
            bracket = Some((y - (y1 - y0) / scan as f64, y, prev.is_finite()));
            break;
        }
        prev = f;
    }
    match bracket {
        Some((a, b, finite)) => {
            lo_finite = finite;
            lo = a;
            hi = b;
        }
        None if largest < 0.0 => {
            return Err(Error::Model(format!(
                "no droplet of mass {m2} fits in a box of length {length}"
            )))
        }
        None => {
            return Err(Error::Model(format!(
                "mass {m2} is too small to form a droplet above the film in a box of length {length}"
            )))
        }
    }
    let mut best = None;
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        let (f, h) = excess(mid)?;
        if h.is_some() {
            best = h;
        }
        if f.abs() <= 1e-13 * m2 || mid <= lo || mid >= hi {
            break;
        }
        if f > 0.0 {
            lo_finite = f.is_finite();
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let h_bar = best.ok_or_else(|| {
        Error::Model(format!("no droplet of mass {m2} fits in a box of length {length}"))
    })?;
    let residual = (mass(&h_bar) - m2).abs() / m2;
    if residual > 1e-9 && !lo_finite {
        // the mass jumps past m2 where the droplet stops fitting
        return Err(Error::Model(format!("no droplet of mass {m2} fits in a box of length {length}")));
    }
    if residual > 1e-9 {
        return Err(Error::numerical("Neumann droplet mass not matched", residual));
    }

    let s1 = sigma + 1.0;
    let c1 = (m1 + mass(&h_bar) / s1) / length;
    let x = crate::numerics::linspace(0.0, length, n);
    let h1: Vec<f64> = h_bar.iter().map(|&h| -h / s1 + c1).collect();
    let h2: Vec<f64> = h_bar.iter().map(|&h| sigma * h / s1 + c1).collect();
    let layers = TwoLayerProfile::new(x, h1, h2, -h_bar[0] / s1 + c1, sigma)?;
    let mut field = pressures(&layers, pot, sigma)?;
    field.lambda1 = h_bar
        .iter()
        .zip(&weights)
        .map(|(&h, w)| w * pot.phi_prime_eps_raw(h))
        .sum::<f64>()
        / length;
    field.lambda2 = 0.0;
    Ok((layers, field))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rk4_step;
    use proptest::prelude::*;

    fn pot(eps: f64) -> PotentialSpec {
        PotentialSpec::standard(eps).unwrap()
    }

    fn series(eps: f64) -> f64 {
        eps + eps * eps / 16.0 + 45.0 * eps.powi(3) / 512.0
    }

    #[test]
    fn h_infinity_matches_series_to_fourth_order() {
        let e1 = (solve_h_infinity(&pot(0.1), 1e-13).unwrap() - series(0.1)).abs();
        let e2 = (solve_h_infinity(&pot(0.05), 1e-13).unwrap() - series(0.05)).abs();
        assert!((solve_h_infinity(&pot(0.1), 1e-13).unwrap() - 0.1007129).abs() < 1e-5);
        let ratio = e1 / e2;
        assert!((8.0..=32.0).contains(&ratio), "ratio {ratio}");
        let small = solve_h_infinity(&pot(1e-3), 1e-13).unwrap();
        assert!((small / 1e-3 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn h_infinity_rejects_large_epsilon() {
        assert!(matches!(solve_h_infinity(&pot(0.6), 1e-13), Err(Error::Validation(_))));
    }

    #[test]
    fn slope_vanishes_at_both_ends() {
        let p = pot(0.1);
        let h_inf = solve_h_infinity(&p, 1e-13).unwrap();
        assert_eq!(first_integral_slope(&p, 1.2, h_inf, h_inf).unwrap(), 0.0);
        assert!(first_integral_slope(&p, 1.2, 1.0, h_inf).unwrap().abs() < 1e-6);
        assert!(first_integral_slope(&p, 1.2, 0.0, h_inf).is_err());
    }

    #[test]
    fn slope_matches_direct_radicand() {
        let p = pot(0.2);
        let h_inf = solve_h_infinity(&p, 1e-13).unwrap();
        let (e, v, vi) = (0.2, 0.5 / 0.2, h_inf / 0.2);
        let phi = |v: f64| -0.5 / (v * v) + 0.125 / v.powi(8);
        let dphi = |v: f64| v.powi(-3) - v.powi(-9);
        let rad = phi(v) - phi(vi) - dphi(vi) / e * (0.5 - h_inf);
        let expected = -(2.0 * 2.2 / 1.2 * rad).sqrt();
        let got = first_integral_slope(&p, 1.2, 0.5, h_inf).unwrap();
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn droplet_starts_flat_at_unit_height_and_decreases() {
        let prof = solve_droplet(&pot(0.2), 1.2, &GridSpec::default()).unwrap();
        assert_eq!(prof.eval(0.0), 1.0);
        let d = 1e-4;
        assert!(((prof.eval(d) - prof.eval(-d)) / (2.0 * d)).abs() < 1e-4);
        assert!(prof.h().windows(2).all(|w| w[1] < w[0]));
        assert!(prof.h_infinity > 0.2 && prof.h_infinity < 0.4);
        assert!(prof.contact_estimate > 0.0 && prof.contact_estimate < prof.x_far());
        assert_eq!(prof.eval(prof.x_far() + 1.0), prof.h_infinity);
    }

    #[test]
    fn droplet_matches_independent_shooting() {
        // h'' = k (φ'(h) − φ'(h∞)) from the apex, by RK4 up to the outer contact point
        for (eps, sigma) in [(0.2, 1.2), (0.1, 1.0)] {
            let p = pot(eps);
            let prof = solve_droplet(&p, sigma, &GridSpec::default()).unwrap();
            let k = k_factor(sigma);
            let f_inf = p.phi_prime_eps_raw(prof.h_infinity);
            let rhs = |_t: f64, y: &[f64; 2]| [y[1], k * (p.phi_prime_eps_raw(y[0]) - f_inf)];
            let mut y = [1.0, 0.0];
            let dt = 1e-4;
            let x_end = 0.9 * prof.contact_estimate;
            let steps = (x_end / dt) as usize;
            let mut worst: f64 = 0.0;
            for i in 0..steps {
                y = rk4_step(&rhs, i as f64 * dt, &y, dt);
                worst = worst.max((y[0] - prof.eval((i + 1) as f64 * dt)).abs());
            }
            assert!(worst < 1e-7, "eps {eps}: {worst}");
        }
    }

    #[test]
    fn sampled_slopes_satisfy_the_first_integral() {
        let p = pot(0.1);
        let prof = solve_droplet(&p, 1.5, &GridSpec::default()).unwrap();
        let mut worst: f64 = 0.0;
        for (i, (&x, &h)) in prof.x().iter().zip(prof.h()).enumerate().skip(10) {
            if i + 1 == prof.x().len() {
                break;
            }
            let d = 1e-6 * x.max(1e-3).min(prof.epsilon);
            let fd = (prof.eval(x + d) - prof.eval(x - d)) / (2.0 * d);
            let exact = first_integral_slope(&p, 1.5, h, prof.h_infinity).unwrap();
            worst = worst.max((fd - exact).abs());
        }
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn layers_split_by_sigma() {
        let prof = solve_droplet(&pot(0.2), 1.0, &GridSpec::default()).unwrap();
        let layers = reconstruct_layers(&prof, 1.0).unwrap();
        let h1_inf = 1.0;
        let h2_inf = 1.0 + prof.h_infinity;
        for i in 0..layers.x.len() {
            assert!((layers.h2[i] - layers.h1[i] - prof.h()[i]).abs() < 1e-14);
            let dev1 = layers.h1[i] - h1_inf;
            if dev1.abs() > 1e-6 {
                assert!(((layers.h2[i] - h2_inf) / dev1 + 1.0).abs() < 1e-9);
            }
        }
        assert!(matches!(reconstruct_layers(&prof, 0.1), Err(Error::Validation(_))));
    }

    #[test]
    fn flat_layers_have_flat_pressures() {
        let p = pot(0.1);
        let x = crate::numerics::linspace(0.0, 1.0, 11);
        for (gap, expected) in [(0.1, 0.0), (0.2, p.phi_prime_eps_raw(0.2))] {
            let layers = TwoLayerProfile::new(x.clone(), vec![1.0; 11], vec![1.0 + gap; 11], 1.0, 1.0).unwrap();
            let f = pressures(&layers, &p, 1.0).unwrap();
            for i in 0..11 {
                assert!((f.p1[i] + expected).abs() < 1e-9);
                assert!((f.p2[i] - expected).abs() < 1e-9);
            }
        }
        let short = TwoLayerProfile::new(vec![0.0, 0.5, 1.0], vec![1.0; 3], vec![1.2; 3], 1.0, 1.0).unwrap();
        assert!(matches!(pressures(&short, &p, 1.0), Err(Error::Validation(_))));
    }

    #[test]
    fn mobility_degenerates_at_contact() {
        let m = mobility(1.0, 1.0, 1.0).unwrap();
        assert!((m.q[0][0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((m.q[0][1] - 1.0 / 3.0).abs() < 1e-15);
        assert!((m.q[1][1] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.det, 0.0);
        assert!(matches!(mobility(1.0, 0.5, 1.0), Err(Error::Domain(_))));
        assert!(matches!(mobility(0.0, 0.5, 1.0), Err(Error::Domain(_))));
    }

    proptest! {
        #[test]
        fn mobility_is_symmetric_and_nonsingular(h1 in 0.01f64..10.0, h in 0.01f64..10.0, mu in 0.05f64..20.0) {
            let m = mobility(h1, h1 + h, mu).unwrap();
            prop_assert_eq!(m.q[0][1], m.q[1][0]);
            prop_assert!(m.det > 0.0);
            let direct = m.q[0][0] * m.q[1][1] - m.q[0][1] * m.q[1][0];
            prop_assert!((direct - m.det).abs() <= 1e-9 * m.q[0][0] * m.q[1][1]);
        }
    }

    #[test]
    fn neumann_state_is_stationary() {
        let p = pot(0.1);
        for n in [256, 257] {
            let (layers, field) = neumann_stationary(4.0, 2.0, 4.0, &p, 1.0, n).unwrap();
            assert!((layers.m1 - 4.0).abs() < 1e-8 * 4.0);
            assert!((layers.m2 - 2.0).abs() < 1e-8 * 2.0);
            assert_eq!(field.lambda2, 0.0);
            // the one-sided wall stencils are excluded from the interior
            assert!(field.max_interior_gradient(2) < 1e-6, "{}", field.max_interior_gradient(2));
            let h = layers.thickness();
            let mid = n / 2;
            assert!(h[mid] > 0.5 && h[0] < 0.15);
            for i in 0..n {
                assert!((h[i] - h[n - 1 - i]).abs() < 1e-12);
            }
            assert!((field.lambda1 - field.p2[n / 3]).abs() < 1e-8);
        }
    }

    #[test]
    fn neumann_rejects_oversized_droplets() {
        let p = pot(0.1);
        let r = neumann_stationary(1.0, 50.0, 2.0, &p, 1.0, 128);
        assert!(matches!(r, Err(Error::Model(_))), "{:?}", r.map(|v| v.0.m2));
        assert!(matches!(neumann_stationary(1.0, 0.05, 2.0, &p, 1.0, 128), Err(Error::Model(_))));
    }
}
