//! Wigner ensembles: entry laws, sampling and cumulant bookkeeping.

use faer::Mat;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Symmetry class: 1 for real symmetric, 2 for complex Hermitian.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Symmetry {
    Real,
    Complex,
}

impl Symmetry {
    pub fn beta(self) -> u8 {
        match self {
            Symmetry::Real => 1,
            Symmetry::Complex => 2,
        }
    }

    pub fn from_beta(beta: u8) -> Result<Self> {
        match beta {
            1 => Ok(Symmetry::Real),
            2 => Ok(Symmetry::Complex),
            b => Err(Error::config(format!("beta must be 1 or 2, got {b}"))),
        }
    }

    /// Canonical diagonal variance in units of 1/N.
    pub fn canonical_zeta(self) -> f64 {
        2.0 / self.beta() as f64
    }
}

impl TryFrom<u8> for Symmetry {
    type Error = Error;
    fn try_from(b: u8) -> Result<Self> {
        Symmetry::from_beta(b)
    }
}

impl From<Symmetry> for u8 {
    fn from(s: Symmetry) -> u8 {
        s.beta()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    Rademacher,
    /// Values `a*sigma` with probability `p` and `b*sigma` otherwise, `b = -p a/(1-p)`.
    /// Unit variance pins `a = sqrt((1-p)/p)`; `a_over_sigma` may restate it.
    TwoPoint {
        p: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        a_over_sigma: Option<f64>,
    },
    /// Uniform on `[-sqrt(3), sqrt(3)]` before scaling.
    Uniform,
    /// Uniform on `{1, i, -1, -i}`; complex entries only.
    PhaseFour,
}

fn unit_scale() -> f64 {
    1.0
}

fn is_unit(x: &f64) -> bool {
    *x == 1.0
}

/// A centred entry law with standard deviation `scale`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntryDistribution {
    #[serde(flatten)]
    pub family: Family,
    #[serde(default = "unit_scale", skip_serializing_if = "is_unit")]
    pub scale: f64,
}

/// Closed-form cumulants of a real entry.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RealCumulants {
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
}

/// Closed-form cumulants of a complex entry with `E h^2 = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ComplexCumulants {
    pub c11: f64,
    pub c22: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum EntryCumulants {
    Real(RealCumulants),
    Complex(ComplexCumulants),
}

impl EntryDistribution {
    pub fn new(family: Family) -> Self {
        EntryDistribution { family, scale: 1.0 }
    }

    pub fn gaussian() -> Self {
        Self::new(Family::Gaussian)
    }

    pub fn with_scale(&self, scale: f64) -> Self {
        EntryDistribution { family: self.family.clone(), scale }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale.is_finite() && self.scale >= 0.0) {
            return Err(Error::config(format!("scale must be finite and nonnegative, got {}", self.scale)));
        }
        if let Family::TwoPoint { p, a_over_sigma } = self.family {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::config(format!("two_point p must lie in (0,1), got {p}")));
            }
            if let Some(a) = a_over_sigma {
                let expected = ((1.0 - p) / p).sqrt();
                if (a - expected).abs() > 1e-9 * expected.max(1.0) {
                    return Err(Error::config(format!(
                        "two_point with p={p} has unit variance only for a_over_sigma={expected}, got {a}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn is_complex_only(&self) -> bool {
        matches!(self.family, Family::PhaseFour)
    }

    /// Third moment and fourth cumulant of the unit-variance version.
    fn standard_m3_k4(&self) -> (f64, f64) {
        match self.family {
            Family::Gaussian => (0.0, 0.0),
            Family::Rademacher => (0.0, -2.0),
            Family::Uniform => (0.0, -1.2),
            Family::TwoPoint { p, .. } => {
                let a = ((1.0 - p) / p).sqrt();
                let b = -p * a / (1.0 - p);
                let m3 = p * a.powi(3) + (1.0 - p) * b.powi(3);
                let m4 = p * a.powi(4) + (1.0 - p) * b.powi(4);
                (m3, m4 - 3.0)
            }
            // As a real law this is never used; callers reject it earlier.
            Family::PhaseFour => (0.0, 0.0),
        }
    }

    /// Exact cumulants. Complex entries built from a real family are
    /// `(X + iY)/sqrt(2)` with `X, Y` i.i.d., hence `C22 = C4(X)/2`.
    pub fn cumulants(&self, symmetry: Symmetry) -> Result<EntryCumulants> {
        self.validate()?;
        let s = self.scale;
        match symmetry {
            Symmetry::Real => {
                if self.is_complex_only() {
                    return Err(Error::config("phase_four is a complex law and cannot be used for real entries"));
                }
                let (m3, k4) = self.standard_m3_k4();
                Ok(EntryCumulants::Real(RealCumulants { c2: s * s, c3: m3 * s.powi(3), c4: k4 * s.powi(4) }))
            }
            Symmetry::Complex => {
                let c22 = match self.family {
                    Family::PhaseFour => -1.0,
                    _ => self.standard_m3_k4().1 / 2.0,
                };
                Ok(EntryCumulants::Complex(ComplexCumulants { c11: s * s, c22: c22 * s.powi(4) }))
            }
        }
    }

    /// Unit-variance real draw.
    fn draw_real<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.family {
            Family::Gaussian => rng.sample(StandardNormal),
            Family::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            Family::Uniform => 3f64.sqrt() * (2.0 * rng.random::<f64>() - 1.0),
            Family::TwoPoint { p, .. } => {
                let a = ((1.0 - p) / p).sqrt();
                if rng.random::<f64>() < p {
                    a
                } else {
                    -p * a / (1.0 - p)
                }
            }
            Family::PhaseFour => unreachable!("phase_four has no real draw"),
        }
    }

    /// Unit-variance complex draw with `E h^2 = 0`.
    fn draw_complex<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        match self.family {
            Family::PhaseFour => match rng.random_range(0..4u8) {
                0 => Complex64::new(1.0, 0.0),
                1 => Complex64::new(0.0, 1.0),
                2 => Complex64::new(-1.0, 0.0),
                _ => Complex64::new(0.0, -1.0),
            },
            _ => {
                let x = self.draw_real(rng);
                let y = self.draw_real(rng);
                Complex64::new(x, y) * std::f64::consts::FRAC_1_SQRT_2
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZetaKeyword {
    Canonical,
}

/// Diagonal variance profile in units of 1/N.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ZetaProfile {
    Named(ZetaKeyword),
    Explicit(Vec<f64>),
}

impl Default for ZetaProfile {
    fn default() -> Self {
        ZetaProfile::Named(ZetaKeyword::Canonical)
    }
}

fn default_zeta_max() -> f64 {
    16.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub beta: Symmetry,
    #[serde(rename = "N")]
    pub n: usize,
    pub offdiag: EntryDistribution,
    pub diag: EntryDistribution,
    #[serde(default)]
    pub zeta: ZetaProfile,
    #[serde(default = "default_zeta_max")]
    pub zeta_max: f64,
}

/// The cumulant sums entering every correction term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CumulantSums {
    pub sum_c4: f64,
    pub sum_c3_diag: f64,
    pub sum_c22: f64,
}

impl CumulantSums {
    pub fn zero() -> Self {
        Self::default()
    }
}

/// Dense Hermitian sample; the real variant holds a symmetric matrix.
#[derive(Clone, Debug)]
pub enum HermitianMatrix {
    Real(Mat<f64>),
    Complex(Mat<Complex64>),
}

impl HermitianMatrix {
    pub fn dim(&self) -> usize {
        match self {
            HermitianMatrix::Real(m) => m.nrows(),
            HermitianMatrix::Complex(m) => m.nrows(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        match self {
            HermitianMatrix::Real(m) => Complex64::new(m[(i, j)], 0.0),
            HermitianMatrix::Complex(m) => m[(i, j)],
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.get(i, i).re).sum()
    }

    pub fn is_exactly_hermitian(&self) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..n).all(|j| self.get(i, j) == self.get(j, i).conj()))
    }
}

impl EnsembleSpec {
    /// GOE (beta = 1) or GUE (beta = 2) with canonical diagonal.
    pub fn gaussian(beta: Symmetry, n: usize) -> Self {
        EnsembleSpec {
            beta,
            n,
            offdiag: EntryDistribution::gaussian(),
            diag: EntryDistribution::gaussian(),
            zeta: ZetaProfile::default(),
            zeta_max: default_zeta_max(),
        }
    }

    pub fn goe(n: usize) -> Self {
        Self::gaussian(Symmetry::Real, n)
    }

    pub fn gue(n: usize) -> Self {
        Self::gaussian(Symmetry::Complex, n)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: EnsembleSpec = serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::config(format!("N must be at least 2, got {}", self.n)));
        }
        self.offdiag.validate()?;
        self.diag.validate()?;
        if self.diag.is_complex_only() {
            return Err(Error::config("diagonal entries must be real-valued"));
        }
        if self.beta == Symmetry::Real && self.offdiag.is_complex_only() {
            return Err(Error::config("phase_four off-diagonal law requires beta = 2"));
        }
        if let ZetaProfile::Explicit(z) = &self.zeta {
            if z.len() != self.n {
                return Err(Error::config(format!("zeta profile has length {}, expected N = {}", z.len(), self.n)));
            }
            if let Some(bad) = z.iter().find(|&&v| !(v.is_finite() && v >= 0.0 && v <= self.zeta_max)) {
                return Err(Error::config(format!("zeta entry {bad} outside [0, {}]", self.zeta_max)));
            }
        }
        Ok(())
    }

    /// Diagonal variances `zeta_i` (units of 1/N).
    pub fn zeta_values(&self) -> Vec<f64> {
        match &self.zeta {
            ZetaProfile::Named(ZetaKeyword::Canonical) => vec![self.beta.canonical_zeta(); self.n],
            ZetaProfile::Explicit(z) => z.clone(),
        }
    }

    pub fn is_canonical(&self) -> bool {
        let c = self.beta.canonical_zeta();
        self.zeta_values().iter().all(|&z| z == c)
    }

    /// Draws `H` with off-diagonal variance 1/N and diagonal variance `zeta_i/N`.
    /// Entries are consumed row by row over the upper triangle, diagonal first.
    pub fn sample(&self, stream: RngStream) -> Result<HermitianMatrix> {
        self.validate()?;
        let n = self.n;
        let off = 1.0 / (n as f64).sqrt();
        let diag_sd: Vec<f64> = self.zeta_values().iter().map(|z| (z / n as f64).sqrt()).collect();
        let mut rng = stream.rng();
        Ok(match self.beta {
            Symmetry::Real => {
                let mut h = Mat::<f64>::zeros(n, n);
                for i in 0..n {
                    h[(i, i)] = diag_sd[i] * self.diag.draw_real(&mut rng);
                    for j in i + 1..n {
                        let x = off * self.offdiag.draw_real(&mut rng);
                        h[(i, j)] = x;
                        h[(j, i)] = x;
                    }
                }
                HermitianMatrix::Real(h)
            }
            Symmetry::Complex => {
                let mut h = Mat::<Complex64>::zeros(n, n);
                for i in 0..n {
                    h[(i, i)] = Complex64::new(diag_sd[i] * self.diag.draw_real(&mut rng), 0.0);
                    for j in i + 1..n {
                        let x = self.offdiag.draw_complex(&mut rng) * off;
                        h[(i, j)] = x;
                        h[(j, i)] = x.conj();
                    }
                }
                HermitianMatrix::Complex(h)
            }
        })
    }

    /// Cumulant sums over all ordered pairs `(i, j)`, diagonal included.
    /// For beta = 2 the diagonal is real, so its contribution to `sum_c22` is its `C4`.
    pub fn cumulant_sums(&self) -> Result<CumulantSums> {
        self.validate()?;
        let n = self.n as f64;
        let off = self.offdiag.with_scale(1.0 / n.sqrt());
        let mut diag_c3 = 0.0;
        let mut diag_c4 = 0.0;
        for z in self.zeta_values() {
            match self.diag.with_scale((z / n).sqrt()).cumulants(Symmetry::Real)? {
                EntryCumulants::Real(c) => {
                    diag_c3 += c.c3;
                    diag_c4 += c.c4;
                }
                EntryCumulants::Complex(_) => unreachable!(),
            }
        }
        let pairs = n * (n - 1.0);
        Ok(match off.cumulants(self.beta)? {
            EntryCumulants::Real(c) => CumulantSums { sum_c4: pairs * c.c4 + diag_c4, sum_c3_diag: diag_c3, sum_c22: 0.0 },
            EntryCumulants::Complex(c) => CumulantSums { sum_c4: 0.0, sum_c3_diag: diag_c3, sum_c22: pairs * c.c22 + diag_c4 },
        })
    }
}

/// Convenience wrapper matching the module-level operation names.
pub fn sample_wigner(spec: &EnsembleSpec, stream: RngStream) -> Result<HermitianMatrix> {
    spec.sample(stream)
}

pub fn entry_cumulants(dist: &EntryDistribution, symmetry: Symmetry) -> Result<EntryCumulants> {
    dist.cumulants(symmetry)
}

pub fn cumulant_sums(spec: &EnsembleSpec) -> Result<CumulantSums> {
    spec.cumulant_sums()
}
