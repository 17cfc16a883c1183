//! Sharp-interface limit: the parabolic droplet with its contact-slope
//! condition, closed-form minimizers of the limiting energy in one and two
//! dimensions, and the Neumann-triangle slopes.

use serde::{Deserialize, Serialize};

use crate::droplet::{check_sigma, TwoLayerProfile};
use crate::{Error, Result};

/// `c = |Φ(1)| (σ+1)/σ`.
pub fn c_constant(sigma: f64, abs_phi1: f64) -> f64 {
    abs_phi1 * (sigma + 1.0) / sigma
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Validation(format!("{name} must be positive, got {v}")))
    }
}

/// Parabolic droplet `f(x) = H (1 − x²/s²)` of the sharp-interface model,
/// with `|f'(±s)| = √(2c)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharpDroplet {
    pub sigma: f64,
    pub s: f64,
    pub apex: f64,
    /// Contact slope magnitude `√(2c)`.
    pub slope: f64,
}

impl SharpDroplet {
    pub fn eval(&self, x: f64) -> f64 {
        let r = x / self.s;
        if r.abs() >= 1.0 {
            0.0
        } else {
            self.apex * (1.0 - r * r)
        }
    }

    /// Slope `f'(x)` inside the support.
    pub fn derivative(&self, x: f64) -> f64 {
        -2.0 * self.apex * x / (self.s * self.s)
    }

    pub fn samples(&self, n: usize) -> Vec<(f64, f64)> {
        crate::numerics::linspace(0.0, self.s, n.max(2))
            .into_iter()
            .map(|x| (x, self.eval(x)))
            .collect()
    }
}

/// Sharp-interface droplet with unit apex, or with prescribed area `mass`.
pub fn sharp_droplet(sigma: f64, abs_phi1: f64, mass: Option<f64>) -> Result<SharpDroplet> {
    check_sigma(sigma)?;
    check_positive("|Phi(1)|", abs_phi1)?;
    let slope = (2.0 * c_constant(sigma, abs_phi1)).sqrt();
    let (s, apex) = match mass {
        None => (2.0 / slope, 1.0),
        Some(m) => {
            check_positive("mass", m)?;
            let s = (1.5 * m / slope).sqrt();
            (s, 0.5 * slope * s)
        }
    };
    Ok(SharpDroplet { sigma, s, apex, slope })
}

/// One-sided slopes along the outward normal at the contact line:
/// `(∂h₁, ∂h₂, ∂(h₂ − h₁)) = (√(2c)/(1+σ), −√(2c)σ/(1+σ), −√(2c))`.
pub fn neumann_triangle(sigma: f64, c: f64) -> Result<(f64, f64, f64)> {
    check_sigma(sigma)?;
    check_positive("c", c)?;
    let t = (2.0 * c).sqrt();
    let h1 = t / (1.0 + sigma);
    let h2 = -t * sigma / (1.0 + sigma);
    Ok((h1, h2, h2 - h1))
}

/// Minimizer of the sharp-interface energy on `(−R, R)` or the disc of radius `R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharpMinimizer {
    pub dimension: u8,
    pub x0: f64,
    pub s: f64,
    pub alpha: f64,
    pub h_level: f64,
    pub c: f64,
    pub sigma: f64,
    pub abs_phi1: f64,
    pub m1: f64,
    pub m2: f64,
    pub radius: f64,
    /// The support fills the domain and the contact-slope condition is dropped.
    pub large_mass: bool,
}

/// Closed-form minimizer `h₂ = σζ/(σ+1) + h`, `h₁ = h₂ − ζ` with the cap
/// `ζ = α(s² − |x − x₀|²)⁺`.
///
/// The mass fixes `s` and the contact slope `2αs = √(2c)` fixes `α`. If the
/// cap would not fit (`s > R`), the support is the whole domain and `α`
/// follows from the mass alone.
pub fn gamma_minimizer(
    m1: f64,
    m2: f64,
    sigma: f64,
    abs_phi1: f64,
    dimension: u8,
    radius: f64,
) -> Result<SharpMinimizer> {
    check_sigma(sigma)?;
    check_positive("m1", m1)?;
    check_positive("m2", m2)?;
    check_positive("|Phi(1)|", abs_phi1)?;
    check_positive("R", radius)?;
    let c = c_constant(sigma, abs_phi1);
    let pi = std::f64::consts::PI;
    let (mut s, mut alpha, volume) = match dimension {
        1 => (
            (9.0 * m2 * m2 / (8.0 * c)).powf(0.25),
            (2.0 * c.powi(3) / (9.0 * m2 * m2)).powf(0.25),
            2.0 * radius,
        ),
        2 => (
            (8.0 * m2 * m2 / (pi * pi * c)).powf(1.0 / 6.0),
            (pi * c * c / (8.0 * m2)).powf(1.0 / 3.0),
            pi * radius * radius,
        ),
        d => return Err(Error::Validation(format!("dimension must be 1 or 2, got {d}"))),
    };
    let large_mass = s > radius;
    if large_mass {
        s = radius;
        alpha = if dimension == 1 {
            0.75 * m2 / radius.powi(3)
        } else {
            2.0 * m2 / (pi * radius.powi(4))
        };
    }
    let h_level = (m1 + m2 / (sigma + 1.0)) / volume;
    let h1_min = h_level - alpha * s * s / (sigma + 1.0);
    if h1_min <= 0.0 {
        return Err(Error::Validation(format!(
            "m1 = {m1} too small: lower layer would reach {h1_min} under the droplet"
        )));
    }
    Ok(SharpMinimizer {
        dimension,
        x0: 0.0,
        s,
        alpha,
        h_level,
        c,
        sigma,
        abs_phi1,
        m1,
        m2,
        radius,
        large_mass,
    })
}

impl SharpMinimizer {
    /// Moves the cap centre; the support must stay inside the domain.
    pub fn with_center(mut self, x0: f64) -> Result<Self> {
        if self.s + x0.abs() > self.radius * (1.0 + 1e-12) {
            return Err(Error::Validation(format!(
                "centre {x0} pushes the support of radius {} outside the domain",
                self.s
            )));
        }
        self.x0 = x0;
        Ok(self)
    }

    /// `ζ` at signed position `x` (1-d) or radius `x` (2-d, centre at 0).
    pub fn zeta(&self, x: f64) -> f64 {
        let d = x - self.x0;
        (self.alpha * (self.s * self.s - d * d)).max(0.0)
    }

    pub fn h1(&self, x: f64) -> f64 {
        self.h2(x) - self.zeta(x)
    }

    pub fn h2(&self, x: f64) -> f64 {
        self.sigma / (self.sigma + 1.0) * self.zeta(x) + self.h_level
    }

    /// `|∇ζ|` at the edge of the support.
    pub fn contact_slope(&self) -> f64 {
        2.0 * self.alpha * self.s
    }

    /// Integral of `ζ` over the domain.
    pub fn cap_mass(&self) -> f64 {
        if self.dimension == 1 {
            4.0 / 3.0 * self.alpha * self.s.powi(3)
        } else {
            0.5 * std::f64::consts::PI * self.alpha * self.s.powi(4)
        }
    }

    /// Limiting energy `(σ/(2(σ+1)))∫|∇ζ|² + |Φ(1)| |supp ζ|` in closed form.
    pub fn energy(&self) -> f64 {
        let pi = std::f64::consts::PI;
        let (grad, measure) = if self.dimension == 1 {
            (8.0 / 3.0 * self.alpha.powi(2) * self.s.powi(3), 2.0 * self.s)
        } else {
            (2.0 * pi * self.alpha.powi(2) * self.s.powi(4), pi * self.s * self.s)
        };
        self.sigma / (2.0 * (self.sigma + 1.0)) * grad + self.abs_phi1 * measure
    }

    /// Layers on `(−R, R)` in 1-d, or on radii `[0, R]` in 2-d, on a grid
    /// with nodes at the edges of the support and about `n` nodes in total.
    pub fn sample(&self, n: usize) -> Vec<(f64, f64, f64, f64)> {
        let lo = if self.dimension == 1 { -self.radius } else { 0.0 };
        let mut cuts = vec![lo];
        for edge in [self.x0 - self.s, self.x0 + self.s] {
            if edge > lo && edge < self.radius {
                cuts.push(edge);
            }
        }
        cuts.push(self.radius);
        let total = self.radius - lo;
        let mut xs = Vec::new();
        for w in cuts.windows(2) {
            let m = ((n as f64 * (w[1] - w[0]) / total).ceil() as usize).max(2);
            let start = if xs.is_empty() { 0 } else { 1 };
            for i in start..m {
                xs.push(w[0] + (w[1] - w[0]) * i as f64 / (m - 1) as f64);
            }
        }
        xs.into_iter()
            .map(|x| (x, self.h1(x), self.h2(x), self.zeta(x)))
            .collect()
    }

    /// 1-d layers as a [`TwoLayerProfile`].
    pub fn layers(&self, n: usize) -> Result<TwoLayerProfile> {
        if self.dimension != 1 {
            return Err(Error::Validation("layers are only sampled for the 1-d minimizer".into()));
        }
        let rows = self.sample(n);
        TwoLayerProfile::new(
            rows.iter().map(|r| r.0).collect(),
            rows.iter().map(|r| r.1).collect(),
            rows.iter().map(|r| r.2).collect(),
            self.h_level,
            self.sigma,
        )
    }
}

/// `E∞ = ∫ (σ/2)|h₁'|² + (1/2)|h₂'|² + |Φ(1)| χ{h₂ − h₁ > θ}` on a 1-d grid,
/// with piecewise-linear layers and `θ = 10⁻⁹ max(h₂ − h₁)`.
pub fn energy_infinity(layers: &TwoLayerProfile, abs_phi1: f64) -> Result<f64> {
    energy_infinity_weighted(layers, abs_phi1, |_| 1.0)
}

/// Radial version of [`energy_infinity`]: `x` is the radius and the measure is `2πr dr`.
pub fn energy_infinity_radial(layers: &TwoLayerProfile, abs_phi1: f64) -> Result<f64> {
    energy_infinity_weighted(layers, abs_phi1, |r| 2.0 * std::f64::consts::PI * r)
}

fn energy_infinity_weighted(layers: &TwoLayerProfile, abs_phi1: f64, jac: impl Fn(f64) -> f64) -> Result<f64> {
    let n = layers.x.len();
    if layers.h1.len() != n || layers.h2.len() != n || n < 2 {
        return Err(Error::Validation("layers do not share a grid".into()));
    }
    let sigma = layers.sigma;
    let h = layers.thickness();
    let theta = 1e-9 * h.iter().copied().fold(0.0, f64::max);
    let mut e = 0.0;
    for i in 0..n - 1 {
        let dx = layers.x[i + 1] - layers.x[i];
        if dx <= 0.0 {
            return Err(Error::Validation("grid must be strictly increasing".into()));
        }
        let mid = 0.5 * (layers.x[i] + layers.x[i + 1]);
        let g1 = (layers.h1[i + 1] - layers.h1[i]) / dx;
        let g2 = (layers.h2[i + 1] - layers.h2[i]) / dx;
        // fraction of the cell where the linear interpolant of h exceeds θ
        let (a, b) = (h[i] - theta, h[i + 1] - theta);
        let frac = if a > 0.0 && b > 0.0 {
            1.0
        } else if a <= 0.0 && b <= 0.0 {
            0.0
        } else {
            a.max(b) / (a - b).abs()
        };
        e += jac(mid) * dx * (0.5 * sigma * g1 * g1 + 0.5 * g2 * g2 + abs_phi1 * frac);
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const PHI1: f64 = 0.375;

    #[test]
    fn unit_apex_droplet_matches_contact_slope() {
        let d = sharp_droplet(1.0, PHI1, None).unwrap();
        assert!((d.slope - 1.5f64.sqrt()).abs() < 1e-15);
        assert!((d.derivative(d.s).abs() - d.slope).abs() < 1e-13);
        assert_eq!(d.eval(d.s * 1.01), 0.0);
        let m = sharp_droplet(2.0, PHI1, Some(0.7)).unwrap();
        assert!((4.0 / 3.0 * m.apex * m.s - 0.7).abs() < 1e-13);
        assert!((m.derivative(m.s).abs() - m.slope).abs() < 1e-13);
    }

    #[test]
    fn one_dimensional_constants() {
        let g = gamma_minimizer(4.0, 1.0, 1.0, PHI1, 1, 3.0).unwrap();
        assert!((g.s - 1.106682).abs() < 1e-6);
        assert!((g.alpha - 0.553341).abs() < 1e-6);
        assert!((g.cap_mass() - 1.0).abs() < 1e-13);
        assert!(!g.large_mass);
        let expected = 0.25 * 8.0 / 3.0 * g.alpha.powi(2) * g.s.powi(3) + PHI1 * 2.0 * g.s;
        assert!((g.energy() - expected).abs() < 1e-14);
    }

    #[test]
    fn contact_identities_hold_for_random_sigma() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let sigma = rng.gen_range(0.1..10.0);
            let c = c_constant(sigma, PHI1);
            for dim in [1u8, 2] {
                let g = gamma_minimizer(50.0, 1.0, sigma, PHI1, dim, 5.0).unwrap();
                assert!((g.contact_slope() - (2.0 * c).sqrt()).abs() < 1e-12);
                assert!((g.cap_mass() - 1.0).abs() < 1e-12);
            }
            let (s1, s2, sh) = neumann_triangle(sigma, c).unwrap();
            assert!((sigma * s1 * s1 + s2 * s2 - 2.0 * PHI1).abs() < 1e-12);
            assert!((sh + (2.0 * c).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn neumann_triangle_symmetric_case() {
        let (a, b, h) = neumann_triangle(1.0, 0.75).unwrap();
        assert!((a - 0.612372).abs() < 1e-6);
        assert!((b + 0.612372).abs() < 1e-6);
        assert!((h + 1.224745).abs() < 1e-6);
        assert!(neumann_triangle(0.0, 1.0).is_err());
    }

    #[test]
    fn two_dimensional_cap_is_consistent() {
        let g = gamma_minimizer(20.0, 2.0, 1.5, PHI1, 2, 4.0).unwrap();
        assert!((g.alpha - 2.0 * 2.0 / (std::f64::consts::PI * g.s.powi(4))).abs() < 1e-13);
        let rows = g.sample(20001);
        let layers = TwoLayerProfile::new(
            rows.iter().map(|r| r.0).collect(),
            rows.iter().map(|r| r.1).collect(),
            rows.iter().map(|r| r.2).collect(),
            g.h_level,
            g.sigma,
        )
        .unwrap();
        let e = energy_infinity_radial(&layers, PHI1).unwrap();
        assert!((e - g.energy()).abs() < 1e-6 * g.energy(), "{e} {}", g.energy());
    }

    #[test]
    fn quadrature_energy_matches_closed_form() {
        let g = gamma_minimizer(4.0, 1.0, 1.0, PHI1, 1, 3.0).unwrap();
        let e = energy_infinity(&g.layers(40001).unwrap(), PHI1).unwrap();
        assert!((e - g.energy()).abs() < 1e-6, "{e} {}", g.energy());
    }

    #[test]
    fn energy_is_translation_invariant() {
        let g = gamma_minimizer(4.0, 1.0, 1.0, PHI1, 1, 3.0).unwrap();
        let e0 = energy_infinity(&g.layers(20001).unwrap(), PHI1).unwrap();
        let shifted = g.with_center(0.7).unwrap();
        let e1 = energy_infinity(&shifted.layers(20001).unwrap(), PHI1).unwrap();
        assert!((e0 - e1).abs() < 1e-8);
        assert!(g.with_center(2.5).is_err());
    }

    #[test]
    fn perturbations_do_not_lower_energy() {
        let g = gamma_minimizer(4.0, 1.0, 0.8, PHI1, 1, 3.0).unwrap();
        let base = g.layers(4001).unwrap();
        let e0 = energy_infinity(&base, PHI1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = &base.x;
        let len = 6.0;
        for _ in 0..100 {
            // mass-preserving bumps supported inside the droplet for ζ and anywhere for h
            let k1 = rng.gen_range(1..6) as f64;
            let k2 = rng.gen_range(1..6) as f64;
            let a = rng.gen_range(-0.05..0.05);
            let b = rng.gen_range(-0.05..0.05);
            let mut h1 = base.h1.clone();
            let mut h2 = base.h2.clone();
            for i in 0..x.len() {
                let u = x[i] - g.x0;
                let dz = if u.abs() < g.s {
                    a * (k1 * std::f64::consts::PI * u / g.s).sin() * (g.s * g.s - u * u)
                } else {
                    0.0
                };
                let dh = b * (2.0 * k2 * std::f64::consts::PI * (x[i] + 3.0) / len).cos();
                h2[i] += g.sigma / (g.sigma + 1.0) * dz + dh;
                h1[i] += -dz / (g.sigma + 1.0) + dh;
            }
            let p = TwoLayerProfile::new(x.clone(), h1, h2, base.d, g.sigma).unwrap();
            let e = energy_infinity(&p, PHI1).unwrap();
            assert!(e >= e0 - 1e-9, "{e} < {e0}");
        }
    }

    #[test]
    fn large_mass_fills_domain() {
        let g = gamma_minimizer(100.0, 50.0, 1.0, PHI1, 1, 2.0).unwrap();
        assert!(g.large_mass);
        assert_eq!(g.s, 2.0);
        assert!((g.cap_mass() - 50.0).abs() < 1e-12);
        let g2 = gamma_minimizer(1000.0, 50.0, 1.0, PHI1, 2, 1.0).unwrap();
        assert!(g2.large_mass && (g2.cap_mass() - 50.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_inputs() {
        assert!(matches!(gamma_minimizer(1e-6, 1.0, 1.0, PHI1, 1, 3.0), Err(Error::Validation(_))));
        assert!(gamma_minimizer(1.0, 1.0, 1.0, PHI1, 3, 3.0).is_err());
        assert!(gamma_minimizer(1.0, -1.0, 1.0, PHI1, 1, 3.0).is_err());
        assert!(sharp_droplet(-1.0, PHI1, None).is_err());
    }
}
