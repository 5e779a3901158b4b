//! Constitutive functions: stiffness modulus μ(α), fatigue weight f(V),
//! coupling g(α) and the cumulated quantity ζ.
//!
//! Every law is clamped outside `[0, 1]`: `μ(β) = μ(0)` for `β <= 0` and
//! `μ(β) = μ(1)` for `β >= 1`. Derivatives are reported on the closed
//! interval `[0, 1]` (one-sided at the ends) and vanish strictly outside it.

use serde::{Deserialize, Serialize};

use crate::error::LawError;

/// Upper cap for the exponent of the scalar ζ variant.
pub const THETA_MAX: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MuLaw {
    /// `μ_min + (μ_max − μ_min)(3α² − 2α³)`.
    Smoothstep { min: f64, max: f64 },
    /// `μ_min + (μ_max − μ_min) α`.
    Linear { min: f64, max: f64 },
    /// `μ_min + (μ_max − μ_min) α²`.
    Quadratic { min: f64, max: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FatigueLaw {
    /// `max(f0 − k V, f_inf)`.
    LinearClamped { f0: f64, k: f64, f_inf: f64 },
    /// `f_inf + (f0 − f_inf) e^{−k V}`.
    Exponential { f0: f64, f_inf: f64, k: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CouplingLaw {
    One,
    EqualsMu,
    CustomSmoothstep { g_min: f64, g_max: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ZetaVariant {
    /// `ζ = g(α)∇u`.
    Vector,
    /// `ζ = g(α)|∇u|^θ`.
    ScalarPower { theta: f64 },
}

/// Per-element cumulated quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Zeta {
    Vector([f64; 2]),
    Scalar(f64),
}

impl Zeta {
    pub fn zero_like(&self) -> Zeta {
        match self {
            Zeta::Vector(_) => Zeta::Vector([0.0; 2]),
            Zeta::Scalar(_) => Zeta::Scalar(0.0),
        }
    }

    /// Euclidean distance for vectors, absolute difference for scalars.
    /// `None` when the kinds differ.
    pub fn distance(&self, other: &Zeta) -> Option<f64> {
        match (self, other) {
            (Zeta::Vector(a), Zeta::Vector(b)) => Some((a[0] - b[0]).hypot(a[1] - b[1])),
            (Zeta::Scalar(a), Zeta::Scalar(b)) => Some((a - b).abs()),
            _ => None,
        }
    }

    /// Affine combination `(1 − θ) self + θ other` of same-kind values.
    pub fn lerp(&self, other: &Zeta, theta: f64) -> Option<Zeta> {
        match (self, other) {
            (Zeta::Vector(a), Zeta::Vector(b)) => Some(Zeta::Vector([
                a[0] + theta * (b[0] - a[0]),
                a[1] + theta * (b[1] - a[1]),
            ])),
            (Zeta::Scalar(a), Zeta::Scalar(b)) => Some(Zeta::Scalar(a + theta * (b - a))),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialLaws {
    pub mu: MuLaw,
    pub f: FatigueLaw,
    pub g: CouplingLaw,
    pub zeta: ZetaVariant,
    /// Evaluate `f` at `V = 0` regardless of the cumulation.
    #[serde(default)]
    pub f_frozen: bool,
}

fn param(name: &'static str, reason: impl Into<String>) -> LawError {
    LawError::Parameter {
        name,
        reason: reason.into(),
    }
}

fn smoothstep(a: f64) -> (f64, f64, f64) {
    if a < 0.0 {
        (0.0, 0.0, 0.0)
    } else if a > 1.0 {
        (1.0, 0.0, 0.0)
    } else {
        (a * a * (3.0 - 2.0 * a), 6.0 * a * (1.0 - a), 6.0 - 12.0 * a)
    }
}

impl MuLaw {
    fn bounds(&self) -> (f64, f64) {
        match *self {
            MuLaw::Smoothstep { min, max } | MuLaw::Linear { min, max } | MuLaw::Quadratic { min, max } => (min, max),
        }
    }

    /// `(μ, μ′, μ″)` with the clamped extension.
    pub fn eval2(&self, a: f64) -> (f64, f64, f64) {
        let (lo, hi) = self.bounds();
        let s = hi - lo;
        let inside = (0.0..=1.0).contains(&a);
        match self {
            MuLaw::Smoothstep { .. } => {
                let (h, dh, ddh) = smoothstep(a);
                (lo + s * h, s * dh, s * ddh)
            }
            MuLaw::Linear { .. } => {
                let c = a.clamp(0.0, 1.0);
                (lo + s * c, if inside { s } else { 0.0 }, 0.0)
            }
            MuLaw::Quadratic { .. } => {
                let c = a.clamp(0.0, 1.0);
                if inside {
                    (lo + s * c * c, 2.0 * s * c, 2.0 * s)
                } else {
                    (lo + s * c * c, 0.0, 0.0)
                }
            }
        }
    }

    pub fn min_value(&self) -> f64 {
        self.bounds().0
    }

    /// Bound on `|μ″|` over `[0, 1]`.
    pub fn curvature_bound(&self) -> f64 {
        let (lo, hi) = self.bounds();
        match self {
            MuLaw::Smoothstep { .. } => 6.0 * (hi - lo),
            MuLaw::Linear { .. } => 0.0,
            MuLaw::Quadratic { .. } => 2.0 * (hi - lo),
        }
    }
}

impl FatigueLaw {
    pub fn f0(&self) -> f64 {
        match *self {
            FatigueLaw::LinearClamped { f0, .. } | FatigueLaw::Exponential { f0, .. } => f0,
        }
    }

    /// Global Lipschitz constant of `V ↦ f(V)` on `[0, ∞)`.
    pub fn lipschitz(&self) -> f64 {
        match *self {
            FatigueLaw::LinearClamped { k, .. } => k,
            FatigueLaw::Exponential { f0, f_inf, k } => (f0 - f_inf) * k,
        }
    }

    fn eval_unchecked(&self, v: f64) -> (f64, f64) {
        match *self {
            FatigueLaw::LinearClamped { f0, k, f_inf } => {
                let lin = f0 - k * v;
                if lin > f_inf {
                    (lin, -k)
                } else {
                    (f_inf, 0.0)
                }
            }
            FatigueLaw::Exponential { f0, f_inf, k } => {
                let e = (-k * v).exp();
                (f_inf + (f0 - f_inf) * e, -k * (f0 - f_inf) * e)
            }
        }
    }
}

impl MaterialLaws {
    pub fn new(mu: MuLaw, f: FatigueLaw, g: CouplingLaw, zeta: ZetaVariant) -> Result<Self, LawError> {
        let laws = Self {
            mu,
            f,
            g,
            zeta,
            f_frozen: false,
        };
        laws.validate()?;
        Ok(laws)
    }

    pub fn frozen(mut self) -> Self {
        self.f_frozen = true;
        self
    }

    pub fn validate(&self) -> Result<(), LawError> {
        let (lo, hi) = self.mu.bounds();
        if !(lo > 0.0 && lo.is_finite()) {
            return Err(param("mu.min", format!("must be positive and finite, got {lo}")));
        }
        if !(hi >= lo && hi.is_finite()) {
            return Err(param("mu.max", format!("must be finite and at least mu.min, got {hi}")));
        }
        match self.f {
            FatigueLaw::LinearClamped { f0, k, f_inf } => {
                if !(f0 > 0.0 && f0.is_finite()) {
                    return Err(param("f.f0", format!("must be positive, got {f0}")));
                }
                if !(k >= 0.0 && k.is_finite()) {
                    return Err(param("f.k", format!("must be nonnegative, got {k}")));
                }
                if !(f_inf >= 0.0 && f_inf <= f0) {
                    return Err(param("f.f_inf", format!("must lie in [0, f0], got {f_inf}")));
                }
            }
            FatigueLaw::Exponential { f0, f_inf, k } => {
                if !(f0 > 0.0 && f0.is_finite()) {
                    return Err(param("f.f0", format!("must be positive, got {f0}")));
                }
                if !(f_inf >= 0.0 && f_inf <= f0) {
                    return Err(param("f.f_inf", format!("must lie in [0, f0], got {f_inf}")));
                }
                if !(k >= 0.0 && k.is_finite()) {
                    return Err(param("f.k", format!("must be nonnegative, got {k}")));
                }
            }
        }
        if let CouplingLaw::CustomSmoothstep { g_min, g_max } = self.g {
            if !(g_min.is_finite() && g_max.is_finite()) {
                return Err(param("g", "bounds must be finite"));
            }
        }
        if let ZetaVariant::ScalarPower { theta } = self.zeta {
            if !(1.0..=THETA_MAX).contains(&theta) {
                return Err(param(
                    "zeta.theta",
                    format!("must lie in [1, {THETA_MAX}], got {theta}"),
                ));
            }
        }
        Ok(())
    }

    pub fn eval_mu(&self, a: f64) -> (f64, f64) {
        let (v, d, _) = self.mu.eval2(a);
        (v, d)
    }

    pub fn eval_f(&self, v: f64) -> Result<(f64, f64), LawError> {
        if v < 0.0 || v.is_nan() {
            return Err(LawError::NegativeCumulation(v));
        }
        if self.f_frozen {
            return Ok((self.f.eval_unchecked(0.0).0, 0.0));
        }
        Ok(self.f.eval_unchecked(v))
    }

    /// `f(V)` for a cumulation known to be nonnegative.
    pub fn f_value(&self, v: f64) -> f64 {
        debug_assert!(v >= 0.0);
        if self.f_frozen {
            self.f.eval_unchecked(0.0).0
        } else {
            self.f.eval_unchecked(v.max(0.0)).0
        }
    }

    pub fn f_lipschitz(&self) -> f64 {
        if self.f_frozen {
            0.0
        } else {
            self.f.lipschitz()
        }
    }

    pub fn eval_g(&self, a: f64) -> (f64, f64) {
        match self.g {
            CouplingLaw::One => (1.0, 0.0),
            CouplingLaw::EqualsMu => self.eval_mu(a),
            CouplingLaw::CustomSmoothstep { g_min, g_max } => {
                let (h, dh, _) = smoothstep(a);
                (g_min + (g_max - g_min) * h, (g_max - g_min) * dh)
            }
        }
    }

    pub fn eval_g_zeta(&self, alpha_elem: f64, grad_u: [f64; 2]) -> Zeta {
        let g = self.eval_g(alpha_elem).0;
        match self.zeta {
            ZetaVariant::Vector => Zeta::Vector([g * grad_u[0], g * grad_u[1]]),
            ZetaVariant::ScalarPower { theta } => Zeta::Scalar(g * grad_u[0].hypot(grad_u[1]).powf(theta)),
        }
    }

    pub fn zero_zeta(&self) -> Zeta {
        match self.zeta {
            ZetaVariant::Vector => Zeta::Vector([0.0; 2]),
            ZetaVariant::ScalarPower { .. } => Zeta::Scalar(0.0),
        }
    }
}

impl Default for MaterialLaws {
    fn default() -> Self {
        Self {
            mu: MuLaw::Smoothstep { min: 0.05, max: 1.0 },
            f: FatigueLaw::LinearClamped {
                f0: 1.0,
                k: 0.05,
                f_inf: 0.1,
            },
            g: CouplingLaw::One,
            zeta: ZetaVariant::Vector,
            f_frozen: false,
        }
    }
}
