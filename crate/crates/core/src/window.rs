//! Littlewood–Paley window `b` with support `[1/B, B]`.
//!
//! Built from the bump `exp(-1/(1-t²))`:
//!
//! ```text
//! Ψ(u) = ∫_{-1}^{u} bump / ∫_{-1}^{1} bump
//! φ(t) = 1                                  t <= 1/B
//!        Ψ(1 - 2 (t - 1/B) B / (B - 1))     1/B < t < 1
//!        0                                  t >= 1
//! b(t) = sqrt(φ(t/B) - φ(t))
//! ```
//!
//! so `Σ_j b²(c/B^j)` telescopes to `1` for every `c >= 1`.

use crate::error::Result;
use crate::harmonics::check_scale_dim;
use crate::quad::integrate;

const BUMP_TOL: f64 = 1e-15;
const MOMENT_TOL: f64 = 1e-12;
const CACHED_MOMENTS: u32 = 8;

fn bump(t: f64) -> f64 {
    if t <= -1.0 || t >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - t * t)).exp()
    }
}

#[derive(Clone, Debug)]
pub struct WindowFunction {
    scale: f64,
    bump_mass: f64,
    moments: Vec<f64>,
}

/// Builds the window for scale `B > 1`.
pub fn build_window(scale: f64) -> Result<WindowFunction> {
    check_scale_dim(scale, 1)?;
    let mut w = WindowFunction {
        scale,
        bump_mass: integrate(bump, -1.0, 1.0, BUMP_TOL),
        moments: Vec::new(),
    };
    w.moments = (0..=CACHED_MOMENTS).map(|q| w.compute_moment(q)).collect();
    Ok(w)
}

impl WindowFunction {
    pub fn scale(&self) -> f64 {
        self.scale
    }

    fn lower_tail(&self, u: f64) -> f64 {
        integrate(bump, -1.0, u, BUMP_TOL) / self.bump_mass
    }

    fn upper_tail(&self, u: f64) -> f64 {
        integrate(bump, u, 1.0, BUMP_TOL) / self.bump_mass
    }

    /// `Ψ(u)`, the normalized bump CDF.
    fn step(&self, u: f64) -> f64 {
        if u <= -1.0 {
            0.0
        } else if u >= 1.0 {
            1.0
        } else if u <= 0.0 {
            self.lower_tail(u)
        } else {
            1.0 - self.upper_tail(u)
        }
    }

    fn transition(&self, t: f64) -> f64 {
        let b = self.scale;
        1.0 - 2.0 * (t - 1.0 / b) * b / (b - 1.0)
    }

    /// The low-pass profile `φ`.
    pub fn phi(&self, t: f64) -> f64 {
        let b = self.scale;
        let t = t.abs();
        if t <= 1.0 / b {
            1.0
        } else if t >= 1.0 {
            0.0
        } else {
            self.step(self.transition(t))
        }
    }

    /// `b²(t)`.
    ///
    /// On each side of `t = 1` one of the two `φ` terms is constant, so `b²`
    /// is a single tail integral of the bump. Evaluating that tail directly
    /// keeps full relative precision near the support edges, where `b` is
    /// the square root of a tiny number.
    pub fn squared(&self, t: f64) -> f64 {
        let b = self.scale;
        if t <= 1.0 / b || t >= b {
            0.0
        } else if t < 1.0 {
            self.upper_tail(self.transition(t))
        } else {
            self.lower_tail(self.transition(t / b)).min(1.0)
        }
    }

    /// `b(t)`.
    pub fn eval(&self, t: f64) -> f64 {
        self.squared(t).sqrt()
    }

    /// `I_q = ∫_{1/B}^{B} u^q b²(u) du`.
    pub fn moment(&self, q: u32) -> f64 {
        match self.moments.get(q as usize) {
            Some(&v) => v,
            None => self.compute_moment(q),
        }
    }

    fn compute_moment(&self, q: u32) -> f64 {
        let b = self.scale;
        let f = |u: f64| u.powi(q as i32) * self.squared(u);
        // b² is smooth on each side of u = 1, where both φ pieces switch
        integrate(f, 1.0 / b, 1.0, MOMENT_TOL) + integrate(f, 1.0, b, MOMENT_TOL)
    }
}

/// Free-function form of [`WindowFunction::moment`].
pub fn window_moment(window: &WindowFunction, q: u32) -> f64 {
    window.moment(q)
}
