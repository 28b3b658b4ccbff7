//! Singular interaction kernels `K(x, y) = a(x, y) |x - y|^{-(n + sp)}`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// A point in the plane; one-dimensional problems use only the first coordinate.
pub type Point = [f64; 2];

type MultiplierFn = dyn Fn(&Point, &Point) -> f64 + Send + Sync;

/// Bounded symmetric multiplier `a(x, y)` in front of the pure power kernel.
#[derive(Clone)]
pub enum Multiplier {
    /// `a = 1`, the fractional p-Laplacian itself.
    One,
    /// `a = 1 + sin(x_1 + y_1) / 2`, with range `[0.5, 1.5]`.
    SinBump,
    Custom { name: String, f: Arc<MultiplierFn> },
}

impl Multiplier {
    pub fn custom<F>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(&Point, &Point) -> f64 + Send + Sync + 'static,
    {
        Multiplier::Custom { name: name.into(), f: Arc::new(f) }
    }

    /// Looks up a builtin by its configuration name.
    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "one" => Some(Multiplier::One),
            "sin_bump" => Some(Multiplier::SinBump),
            _ => None,
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Multiplier::One => "one",
            Multiplier::SinBump => "sin_bump",
            Multiplier::Custom { name, .. } => name,
        }
    }

    #[inline]
    pub fn value(&self, x: &Point, y: &Point) -> f64 {
        match self {
            Multiplier::One => 1.0,
            Multiplier::SinBump => 1.0 + 0.5 * (x[0] + y[0]).sin(),
            Multiplier::Custom { f, .. } => f(x, y),
        }
    }

    pub fn is_constant_one(&self) -> bool {
        matches!(self, Multiplier::One)
    }
}

impl fmt::Debug for Multiplier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Multiplier({})", self.name())
    }
}

/// Admissible kernel with its ellipticity bounds `lam_lo <= a <= lam_hi`.
#[derive(Clone, Debug)]
pub struct Kernel {
    s: f64,
    p: f64,
    n: usize,
    multiplier: Multiplier,
    lam_lo: f64,
    lam_hi: f64,
}

impl Kernel {
    /// Pure fractional kernel `|x - y|^{-(n + sp)}`.
    pub fn fractional(s: f64, p: f64, n: usize) -> Result<Self> {
        Self::with_multiplier(s, p, n, Multiplier::One, 1.0, 1.0)
    }

    pub fn with_multiplier(
        s: f64,
        p: f64,
        n: usize,
        multiplier: Multiplier,
        lam_lo: f64,
        lam_hi: f64,
    ) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::InvalidParameter(format!("order s = {s} must lie in (0, 1)")));
        }
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::InvalidParameter(format!("exponent p = {p} must exceed 1")));
        }
        if n != 1 && n != 2 {
            return Err(Error::InvalidParameter(format!("dimension n = {n} is not 1 or 2")));
        }
        if !(lam_lo > 0.0 && lam_hi >= lam_lo && lam_hi.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "ellipticity bounds [{lam_lo}, {lam_hi}] must satisfy 0 < lam_lo <= lam_hi"
            )));
        }
        Ok(Kernel { s, p, n, multiplier, lam_lo, lam_hi })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn multiplier(&self) -> &Multiplier {
        &self.multiplier
    }

    pub fn lam_lo(&self) -> f64 {
        self.lam_lo
    }

    pub fn lam_hi(&self) -> f64 {
        self.lam_hi
    }

    /// `s * p`
    pub fn sp(&self) -> f64 {
        self.s * self.p
    }

    /// Decay exponent `n + sp` of the power law.
    pub fn exponent(&self) -> f64 {
        self.n as f64 + self.sp()
    }

    /// Exponent `sp / (n (p - 1))` of the level-set decay estimate.
    pub fn level_set_exponent(&self) -> f64 {
        self.sp() / (self.n as f64 * (self.p - 1.0))
    }

    /// Power-law part `r^{-(n + sp)}` at distance `r > 0`.
    #[inline]
    pub fn radial(&self, r: f64) -> f64 {
        r.powf(-self.exponent())
    }

    pub fn distance(&self, x: &Point, y: &Point) -> f64 {
        if self.n == 1 {
            (x[0] - y[0]).abs()
        } else {
            (x[0] - y[0]).hypot(x[1] - y[1])
        }
    }

    /// `K(x, y)`; errors on the diagonal where the kernel diverges.
    pub fn eval(&self, x: &Point, y: &Point) -> Result<f64> {
        let r = self.distance(x, y);
        if r == 0.0 {
            return Err(Error::SingularEvaluation);
        }
        Ok(self.multiplier.value(x, y) * self.radial(r))
    }

    /// Checks symmetry and the two-sided bound of the multiplier on the given pairs.
    pub fn check_ellipticity(&self, pairs: &[(Point, Point)]) -> Result<EllipticityReport> {
        let mut ok = true;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (x, y) in pairs {
            if self.distance(x, y) == 0.0 {
                return Err(Error::SingularEvaluation);
            }
            let a = self.multiplier.value(x, y);
            let b = self.multiplier.value(y, x);
            if a != b || !(a >= self.lam_lo && a <= self.lam_hi) {
                ok = false;
            }
            lo = lo.min(a);
            hi = hi.max(a);
        }
        // worst_ratio is the sample of a farthest outside (or closest to) the declared bounds
        let worst_ratio = if pairs.is_empty() {
            1.0
        } else if self.lam_lo - lo >= hi - self.lam_hi {
            lo
        } else {
            hi
        };
        Ok(EllipticityReport { ok, worst_ratio, min_ratio: lo, max_ratio: hi })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EllipticityReport {
    pub ok: bool,
    pub worst_ratio: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
}
