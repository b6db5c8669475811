use rand::Rng;
use rand_distr::{Cauchy, Distribution, StandardNormal, StudentT};
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::model::MASS;

/// Thermal velocity `v_T = √(2 k_B T / m)`.
pub fn thermal_velocity(temperature: f64) -> f64 {
    (2.0 * temperature / MASS).sqrt()
}

/// Normalisation of `(1 + (q−1)ξ²)^{−1/(q−1)}` over the real line.
fn q_norm(q: f64) -> f64 {
    let a = 1.0 / (q - 1.0);
    ((q - 1.0) / PI).sqrt() * (libm::lgamma(a) - libm::lgamma(a - 0.5)).exp()
}

/// Symmetric one-dimensional velocity density `F(v)` with `∫F dv = 1`.
///
/// The analytic families are written through their shape function
/// `g(ξ)`, `ξ = v/v_T`, so that `F(v) = g(v/v_T)/v_T`.
#[derive(Debug, Clone, PartialEq)]
pub enum VelocityDistribution {
    Gaussian {
        temperature: f64,
    },
    QGaussian {
        q: f64,
        temperature: f64,
    },
    /// The `q = 2` member of the q-Gaussian family.
    Lorentzian {
        temperature: f64,
    },
    Grid(GridDistribution),
}

impl VelocityDistribution {
    pub fn gaussian(temperature: f64) -> Result<Self> {
        check_temperature(temperature)?;
        Ok(Self::Gaussian { temperature })
    }

    /// Density `∝ (1 − (1−q) m v²/2k_BT)^{1/(1−q)}`, `1 < q < 3`.
    pub fn q_gaussian(q: f64, temperature: f64) -> Result<Self> {
        if !(q > 1.0 && q < 3.0) {
            return Err(Error::QOutOfRange { q, range: "(1, 3)" });
        }
        check_temperature(temperature)?;
        Ok(Self::QGaussian { q, temperature })
    }

    pub fn lorentzian(temperature: f64) -> Result<Self> {
        check_temperature(temperature)?;
        Ok(Self::Lorentzian { temperature })
    }

    /// Temperature parameter of an analytic family.
    pub fn temperature(&self) -> Option<f64> {
        match self {
            Self::Gaussian { temperature } | Self::QGaussian { temperature, .. } | Self::Lorentzian { temperature } => {
                Some(*temperature)
            }
            Self::Grid(_) => None,
        }
    }

    /// Tsallis index; 1 for the Gaussian.
    pub fn q(&self) -> Option<f64> {
        match self {
            Self::Gaussian { .. } => Some(1.0),
            Self::QGaussian { q, .. } => Some(*q),
            Self::Lorentzian { .. } => Some(2.0),
            Self::Grid(_) => None,
        }
    }

    /// Velocity scale: `v_T` for the analytic families, `√(2⟨v²⟩)` on a grid
    /// (the two agree for a Gaussian).
    pub fn scale(&self) -> f64 {
        match self {
            Self::Grid(g) => g.scale,
            _ => thermal_velocity(self.temperature().expect("analytic")),
        }
    }

    /// Effective temperature `m v_T² / 2` matching [`Self::scale`].
    pub fn scale_temperature(&self) -> f64 {
        let s = self.scale();
        0.5 * MASS * s * s
    }

    pub fn density(&self, v: f64) -> f64 {
        match self {
            Self::Grid(g) => g.density(v),
            _ => {
                let vt = self.scale();
                self.shape(v / vt) / vt
            }
        }
    }

    /// `∂_v F`.
    pub fn derivative(&self, v: f64) -> f64 {
        match self {
            Self::Grid(g) => g.derivative(v),
            _ => {
                let vt = self.scale();
                self.shape_derivative(v / vt) / (vt * vt)
            }
        }
    }

    /// Shape function `g(ξ) = v_T F(ξ v_T)`.
    pub fn shape(&self, xi: f64) -> f64 {
        match self {
            Self::Gaussian { .. } => (-xi * xi).exp() / PI.sqrt(),
            Self::QGaussian { q, .. } => {
                let q = *q;
                q_norm(q) * (-((q - 1.0) * xi * xi).ln_1p() / (q - 1.0)).exp()
            }
            Self::Lorentzian { .. } => 1.0 / (PI * (1.0 + xi * xi)),
            Self::Grid(g) => g.scale * g.density(xi * g.scale),
        }
    }

    pub fn shape_derivative(&self, xi: f64) -> f64 {
        match self {
            Self::Gaussian { .. } => -2.0 * xi * (-xi * xi).exp() / PI.sqrt(),
            Self::QGaussian { q, .. } => {
                let q = *q;
                let p = q / (q - 1.0);
                -2.0 * xi * q_norm(q) * (-p * ((q - 1.0) * xi * xi).ln_1p()).exp()
            }
            Self::Lorentzian { .. } => -2.0 * xi / (PI * (1.0 + xi * xi).powi(2)),
            Self::Grid(g) => g.scale * g.scale * g.derivative(xi * g.scale),
        }
    }

    /// `k_B T_kin = m⟨v²⟩`, absent when the second moment diverges.
    pub fn kinetic_temperature(&self) -> Option<f64> {
        match self {
            Self::Gaussian { temperature } => Some(*temperature),
            Self::QGaussian { q, temperature } => q_gaussian_kinetic_temperature(*q, *temperature),
            Self::Lorentzian { .. } => None,
            Self::Grid(g) => g.kinetic_temperature(),
        }
    }

    /// Power-law exponent `p` of the tail `F ∼ |v|^{−p}`, if any.
    pub fn tail_exponent(&self) -> Option<f64> {
        match self {
            Self::Gaussian { .. } => None,
            Self::QGaussian { q, .. } => Some(2.0 / (q - 1.0)),
            Self::Lorentzian { .. } => Some(2.0),
            Self::Grid(g) => g.tail.map(|t| t.exponent),
        }
    }

    /// Breakpoints that quadratures should respect (the grid edges).
    pub(crate) fn breakpoints(&self) -> Option<f64> {
        match self {
            Self::Grid(g) => Some(g.v_max()),
            _ => None,
        }
    }

    /// Draws one velocity. Gridded densities cannot be sampled.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        let vt = self.scale();
        let xi = match self {
            Self::Gaussian { .. } => {
                let z: f64 = StandardNormal.sample(rng);
                z / 2f64.sqrt()
            }
            Self::QGaussian { q, .. } => {
                // Student-t with ν = (3−q)/(q−1), rescaled
                let nu = (3.0 - q) / (q - 1.0);
                let t = StudentT::new(nu).map_err(|e| invalid("q", e.to_string()))?;
                t.sample(rng) / (3.0 - q).sqrt()
            }
            Self::Lorentzian { .. } => Cauchy::new(0.0, 1.0).expect("unit Cauchy").sample(rng),
            Self::Grid(_) => return Err(Error::InvalidDistribution("cannot sample a gridded density".into())),
        };
        Ok(xi * vt)
    }

    /// Tabulates on `n` uniformly spaced nodes over `[−v_max, v_max]`,
    /// attaching the analytic power-law tail where there is one.
    pub fn tabulate(&self, v_max: f64, n: usize) -> Result<GridDistribution> {
        let h = 2.0 * v_max / (n - 1) as f64;
        let v: Vec<f64> = (0..n).map(|i| -v_max + i as f64 * h).collect();
        let f: Vec<f64> = v.iter().map(|&x| self.density(x)).collect();
        let grid = GridDistribution::new(v, f)?;
        match self.tail_exponent() {
            Some(p) => grid.with_power_tail(p),
            None => Ok(grid),
        }
    }
}

fn check_temperature(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(invalid("temperature", format!("must be positive and finite, got {t}")))
    }
}

/// `m⟨v²⟩ = 2k_BT/(5−3q)` for `q < 5/3`.
pub fn q_gaussian_kinetic_temperature(q: f64, temperature: f64) -> Option<f64> {
    (q < 5.0 / 3.0).then(|| 2.0 * temperature / (5.0 - 3.0 * q))
}

/// Normalised q-Gaussian density at `v`.
pub fn q_gaussian(v: f64, q: f64, temperature: f64) -> Result<f64> {
    Ok(VelocityDistribution::q_gaussian(q, temperature)?.density(v))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerTail {
    pub exponent: f64,
    /// `F(v) = coefficient · |v|^{−exponent}` beyond the grid.
    pub coefficient: f64,
}

/// Tabulated symmetric density, interpolated by a natural cubic spline.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDistribution {
    v: Vec<f64>,
    f: Vec<f64>,
    /// Spline second derivatives at the nodes.
    m: Vec<f64>,
    h: f64,
    tail: Option<PowerTail>,
    scale: f64,
}

impl GridDistribution {
    /// Nodes must be uniformly spaced and symmetric about zero; values are
    /// rescaled to unit mass.
    pub fn new(v: Vec<f64>, f: Vec<f64>) -> Result<Self> {
        let n = v.len();
        if n < 5 || f.len() != n {
            return Err(Error::InvalidDistribution(format!(
                "need at least 5 matching nodes, got {} and {}",
                n,
                f.len()
            )));
        }
        let h = (v[n - 1] - v[0]) / (n - 1) as f64;
        if !(h > 0.0) || v.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h) {
            return Err(Error::InvalidDistribution("nodes must be uniformly spaced".into()));
        }
        if (v[0] + v[n - 1]).abs() > 1e-9 * h {
            return Err(Error::InvalidDistribution("grid must be symmetric about v = 0".into()));
        }
        if let Some(bad) = f.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(Error::InvalidDistribution(format!(
                "negative or non-finite value {bad}"
            )));
        }
        let peak = f.iter().cloned().fold(0.0, f64::max);
        if peak == 0.0 {
            return Err(Error::InvalidDistribution("density vanishes identically".into()));
        }
        let deviation = (0..n).map(|i| (f[i] - f[n - 1 - i]).abs()).fold(0.0, f64::max) / peak;
        if deviation > 1e-6 {
            return Err(Error::AsymmetricDistribution { deviation });
        }
        let mut grid = Self {
            m: natural_spline(&f, h),
            v,
            f,
            h,
            tail: None,
            scale: 1.0,
        };
        grid.normalise();
        Ok(grid)
    }

    /// Attaches `c|v|^{−p}` beyond the grid, continuous at the edge.
    pub fn with_power_tail(mut self, exponent: f64) -> Result<Self> {
        if !(exponent > 1.0) {
            return Err(invalid("tail exponent", "must exceed 1 for a normalisable tail"));
        }
        let edge = self.v_max();
        let coefficient = self.f[self.f.len() - 1] * edge.powf(exponent);
        self.tail = Some(PowerTail { exponent, coefficient });
        self.normalise();
        Ok(self)
    }

    fn normalise(&mut self) {
        let mass = self.spline_mass() + self.tail_mass();
        for x in self.f.iter_mut().chain(self.m.iter_mut()) {
            *x /= mass;
        }
        if let Some(t) = self.tail.as_mut() {
            t.coefficient /= mass;
        }
        let second = self.second_moment();
        self.scale = (2.0 * second).sqrt();
    }

    fn spline_mass(&self) -> f64 {
        let h = self.h;
        (0..self.f.len() - 1)
            .map(|i| h * (self.f[i] + self.f[i + 1]) / 2.0 - h.powi(3) * (self.m[i] + self.m[i + 1]) / 24.0)
            .sum()
    }

    /// Mass carried by both tails.
    pub fn tail_mass(&self) -> f64 {
        self.tail.map_or(0.0, |t| {
            2.0 * t.coefficient * self.v_max().powf(1.0 - t.exponent) / (t.exponent - 1.0)
        })
    }

    /// `⟨v²⟩` of the spline part only; the tail is excluded since it may
    /// carry an infinite second moment.
    fn second_moment(&self) -> f64 {
        // Simpson on the spline at cell midpoints
        let h = self.h;
        (0..self.f.len() - 1)
            .map(|i| {
                let a = self.v[i];
                let mid = a + 0.5 * h;
                let b = a + h;
                h / 6.0 * (a * a * self.f[i] + 4.0 * mid * mid * self.density(mid) + b * b * self.f[i + 1])
            })
            .sum()
    }

    pub fn velocities(&self) -> &[f64] {
        &self.v
    }

    pub fn values(&self) -> &[f64] {
        &self.f
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn v_max(&self) -> f64 {
        self.v[self.v.len() - 1]
    }

    pub fn tail(&self) -> Option<PowerTail> {
        self.tail
    }

    fn locate(&self, v: f64) -> (usize, f64) {
        let n = self.v.len();
        let pos = (v - self.v[0]) / self.h;
        let i = (pos.floor() as usize).min(n - 2);
        (i, pos - i as f64)
    }

    pub fn density(&self, v: f64) -> f64 {
        let edge = self.v_max();
        if v.abs() > edge {
            return self.tail.map_or(0.0, |t| t.coefficient * v.abs().powf(-t.exponent));
        }
        let (i, t) = self.locate(v);
        let u = 1.0 - t;
        let h2 = self.h * self.h / 6.0;
        u * self.f[i] + t * self.f[i + 1] + h2 * ((u * u * u - u) * self.m[i] + (t * t * t - t) * self.m[i + 1])
    }

    pub fn derivative(&self, v: f64) -> f64 {
        let edge = self.v_max();
        if v.abs() > edge {
            return self.tail.map_or(0.0, |t| {
                -t.exponent * t.coefficient * v.abs().powf(-t.exponent - 1.0) * v.signum()
            });
        }
        let (i, t) = self.locate(v);
        let u = 1.0 - t;
        let h = self.h;
        (self.f[i + 1] - self.f[i]) / h
            + h / 6.0 * (-(3.0 * u * u - 1.0) * self.m[i] + (3.0 * t * t - 1.0) * self.m[i + 1])
    }

    /// `m⟨v²⟩`, absent if the attached tail has no second moment.
    pub fn kinetic_temperature(&self) -> Option<f64> {
        let tail = match self.tail {
            None => 0.0,
            Some(t) if t.exponent > 3.0 => {
                2.0 * t.coefficient * self.v_max().powf(3.0 - t.exponent) / (t.exponent - 3.0)
            }
            Some(_) => return None,
        };
        Some(MASS * (self.second_moment() + tail))
    }
}

/// Second derivatives of the natural cubic spline through `y` on spacing `h`.
fn natural_spline(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    let mut m = vec![0.0; n];
    // Thomas algorithm on the interior (1, 4, 1) system
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        let rhs = 6.0 * (y[i + 1] - 2.0 * y[i] + y[i - 1]) / (h * h);
        let denom = 4.0 - c[i - 1];
        c[i] = 1.0 / denom;
        d[i] = (rhs - d[i - 1]) / denom;
    }
    for i in (1..n - 1).rev() {
        m[i] = d[i] - c[i] * m[i + 1];
    }
    m
}
