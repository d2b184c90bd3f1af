//! Power-law p-potentials, the induced extra stress and its Hessian, plus a
//! sampling certifier for the structural bounds a p-potential must satisfy.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::{nsym, SymTensor, MAX_SYM};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConstitutiveError {
    #[error("invalid constitutive parameter: {0}")]
    InvalidParameter(String),
    #[error("stress Hessian is unbounded at B = 0 for delta = 0 and p < 2")]
    SingularHessian,
    #[error("non-finite stress at |B| = {0}")]
    NonFinite(f64),
}

/// The two shear-thinning/thickening families.
///
/// `PowerLawA`: `S(B) = μ(δ + |B|)^{p-2} B`.
/// `PowerLawB`: `S(B) = μ(δ + |B|²)^{(p-2)/2} B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Law {
    #[serde(rename = "power-a")]
    PowerLawA,
    #[serde(rename = "power-b")]
    PowerLawB,
}

impl std::str::FromStr for Law {
    type Err = ConstitutiveError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "power-a" | "a" | "A" => Ok(Law::PowerLawA),
            "power-b" | "b" | "B" => Ok(Law::PowerLawB),
            other => Err(ConstitutiveError::InvalidParameter(format!("unknown law '{other}'"))),
        }
    }
}

/// A power-law p-potential `Φ(B) = F(|B|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPotential", into = "RawPotential")]
pub struct PPotential {
    law: Law,
    p: f64,
    delta: f64,
    mu: f64,
}

#[derive(Serialize, Deserialize)]
struct RawPotential {
    law: Law,
    p: f64,
    #[serde(default = "one")]
    delta: f64,
    #[serde(default = "one")]
    mu: f64,
}

fn one() -> f64 {
    1.0
}

impl TryFrom<RawPotential> for PPotential {
    type Error = ConstitutiveError;
    fn try_from(r: RawPotential) -> Result<Self, Self::Error> {
        PPotential::new(r.law, r.p, r.delta, r.mu)
    }
}

impl From<PPotential> for RawPotential {
    fn from(pp: PPotential) -> Self {
        RawPotential { law: pp.law, p: pp.p, delta: pp.delta, mu: pp.mu }
    }
}

impl Default for PPotential {
    fn default() -> Self {
        PPotential { law: Law::PowerLawB, p: 2.0, delta: 1.0, mu: 1.0 }
    }
}

impl PPotential {
    /// Requires `p > 1`, `mu > 0`, `delta ≥ 0`, and `delta > 0` for `PowerLawA`
    /// (its `F` is not C² at zero otherwise).
    pub fn new(law: Law, p: f64, delta: f64, mu: f64) -> Result<Self, ConstitutiveError> {
        let bad = |m: String| Err(ConstitutiveError::InvalidParameter(m));
        if !(p.is_finite() && p > 1.0) {
            return bad(format!("p = {p} must be > 1"));
        }
        if !(mu.is_finite() && mu > 0.0) {
            return bad(format!("mu = {mu} must be > 0"));
        }
        if !(delta.is_finite() && delta >= 0.0) {
            return bad(format!("delta = {delta} must be >= 0"));
        }
        if law == Law::PowerLawA && delta == 0.0 {
            return bad("power-a requires delta > 0".into());
        }
        Ok(PPotential { law, p, delta, mu })
    }

    /// Default family (`PowerLawB`) with δ = μ = 1.
    pub fn power_b(p: f64) -> Result<Self, ConstitutiveError> {
        Self::new(Law::PowerLawB, p, 1.0, 1.0)
    }

    pub fn law(&self) -> Law {
        self.law
    }
    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Conjugate exponent `p' = p/(p-1)`.
    pub fn p_conjugate(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    /// The scalar profile `F(s)`, s ≥ 0.
    pub fn profile(&self, s: f64) -> f64 {
        let (q, d, mu) = (self.p, self.delta, self.mu);
        if s == 0.0 {
            return 0.0;
        }
        match self.law {
            Law::PowerLawB => {
                if d == 0.0 {
                    mu * s.powf(q) / q
                } else {
                    // (μ/q)[(δ+s²)^{q/2} − δ^{q/2}] without cancellation
                    mu / q * d.powf(q / 2.0) * ((q / 2.0) * (s * s / d).ln_1p()).exp_m1()
                }
            }
            Law::PowerLawA => {
                // ∫₀ˢ μ(δ+r)^{q−2} r dr
                let l = (s / d).ln_1p();
                mu * d.powf(q) * ((q * l).exp_m1() / q - ((q - 1.0) * l).exp_m1() / (q - 1.0))
            }
        }
    }

    /// `Φ(B) = F(|B|)`.
    pub fn potential(&self, b: &SymTensor) -> f64 {
        self.profile(b.norm())
    }

    /// Scalar factor `g` with `S(B) = g·B`; zero at `B = 0`.
    #[inline]
    fn secant(&self, s2: f64) -> f64 {
        let (q, d, mu) = (self.p, self.delta, self.mu);
        if s2 == 0.0 && d == 0.0 {
            return if q == 2.0 { mu } else { 0.0 };
        }
        match self.law {
            Law::PowerLawB => {
                if q == 2.0 {
                    mu
                } else {
                    mu * (d + s2).powf(0.5 * (q - 2.0))
                }
            }
            Law::PowerLawA => mu * (d + s2.sqrt()).powf(q - 2.0),
        }
    }

    /// Extra stress `S(B) = F'(|B|) B/|B|`, with `S(0) = 0`.
    #[inline]
    pub fn stress(&self, b: &SymTensor) -> SymTensor {
        let s2 = b.norm_sq();
        if s2 == 0.0 {
            return SymTensor::zeros(b.dim());
        }
        b.scale(self.secant(s2))
    }

    /// Like [`stress`](Self::stress) but rejects non-finite results.
    pub fn checked_stress(&self, b: &SymTensor) -> Result<SymTensor, ConstitutiveError> {
        let s = self.stress(b);
        if s.is_finite() {
            Ok(s)
        } else {
            Err(ConstitutiveError::NonFinite(b.norm()))
        }
    }

    /// Secant factor `g` (with `S = g·B`) from a Kelvin-coordinate strain.
    #[inline]
    pub fn secant_from_kelvin(&self, b: &[f64]) -> f64 {
        let s2: f64 = b.iter().map(|v| v * v).sum();
        if s2 == 0.0 {
            0.0
        } else {
            self.secant(s2)
        }
    }

    /// Closed-form Hessian `∂S/∂B` as a symmetric matrix in Kelvin coordinates,
    /// written into `out` (row-major `n_sym × n_sym`). Returns `g` such that
    /// `S = g·B`.
    pub fn hessian_kelvin_into(&self, b: &[f64], out: &mut [f64]) -> Result<f64, ConstitutiveError> {
        let n = b.len();
        let s2: f64 = b.iter().map(|v| v * v).sum();
        let (q, d, mu) = (self.p, self.delta, self.mu);
        if s2 == 0.0 && d == 0.0 && q < 2.0 {
            return Err(ConstitutiveError::SingularHessian);
        }
        let g = if s2 == 0.0 { self.secant_at_zero() } else { self.secant(s2) };
        // rank-one coefficient c in H = g I + c b bᵀ
        let c = if s2 == 0.0 || q == 2.0 {
            0.0
        } else {
            match self.law {
                Law::PowerLawB => mu * (q - 2.0) * (d + s2).powf(0.5 * (q - 4.0)),
                Law::PowerLawA => {
                    let s = s2.sqrt();
                    mu * (q - 2.0) * (d + s).powf(q - 3.0) / s
                }
            }
        };
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = c * b[i] * b[j] + if i == j { g } else { 0.0 };
            }
        }
        if g.is_finite() && c.is_finite() {
            Ok(g)
        } else {
            Err(ConstitutiveError::NonFinite(s2.sqrt()))
        }
    }

    fn secant_at_zero(&self) -> f64 {
        let (q, d, mu) = (self.p, self.delta, self.mu);
        match self.law {
            Law::PowerLawB => mu * d.powf(0.5 * (q - 2.0)),
            Law::PowerLawA => mu * d.powf(q - 2.0),
        }
    }

    /// `∂²Φ/∂B∂B` at `B` (closed form).
    pub fn stress_hessian(&self, b: &SymTensor) -> Result<StressHessian, ConstitutiveError> {
        let dim = b.dim();
        let n = nsym(dim);
        let k = b.to_kelvin();
        let mut buf = [0.0; MAX_SYM * MAX_SYM];
        self.hessian_kelvin_into(&k[..n], &mut buf[..n * n])?;
        let mut h = StressHessian { dim, kelvin: [[0.0; MAX_SYM]; MAX_SYM] };
        for i in 0..n {
            for j in 0..n {
                h.kelvin[i][j] = buf[i * n + j];
            }
        }
        Ok(h)
    }

    /// Central-difference Hessian of the stress, for validating the closed form.
    pub fn stress_hessian_fd(&self, b: &SymTensor, step: f64) -> StressHessian {
        let dim = b.dim();
        let n = nsym(dim);
        let k = b.to_kelvin();
        let mut h = StressHessian { dim, kelvin: [[0.0; MAX_SYM]; MAX_SYM] };
        for j in 0..n {
            let (mut kp, mut km) = (k, k);
            kp[j] += step;
            km[j] -= step;
            let sp = self.stress(&SymTensor::from_kelvin(dim, &kp[..n])).to_kelvin();
            let sm = self.stress(&SymTensor::from_kelvin(dim, &km[..n])).to_kelvin();
            for i in 0..n {
                h.kelvin[i][j] = (sp[i] - sm[i]) / (2.0 * step);
            }
        }
        h
    }
}

/// Fourth-order Hessian `∂²Φ/∂B_jk∂B_lm` restricted to symmetric tensors.
///
/// Stored as a symmetric matrix over the Kelvin basis; `component` gives the
/// minor-symmetric four-index view.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StressHessian {
    dim: usize,
    kelvin: [[f64; MAX_SYM]; MAX_SYM],
}

impl StressHessian {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kelvin(&self, a: usize, b: usize) -> f64 {
        self.kelvin[a][b]
    }

    /// Four-index entry `H_{jk,lm}`.
    pub fn component(&self, j: usize, k: usize, l: usize, m: usize) -> f64 {
        let (a, fa) = kelvin_index(self.dim, j, k);
        let (b, fb) = kelvin_index(self.dim, l, m);
        self.kelvin[a][b] * fa * fb
    }

    /// `H·C` as a symmetric tensor.
    pub fn apply(&self, c: &SymTensor) -> SymTensor {
        let n = nsym(self.dim);
        let ck = c.to_kelvin();
        let mut out = [0.0; MAX_SYM];
        for (i, o) in out.iter_mut().enumerate().take(n) {
            *o = (0..n).map(|j| self.kelvin[i][j] * ck[j]).sum();
        }
        SymTensor::from_kelvin(self.dim, &out[..n])
    }

    /// `Σ H_{jklm} C_jk C_lm`.
    pub fn quadratic_form(&self, c: &SymTensor) -> f64 {
        self.apply(c).inner(c)
    }

    /// Spectral norm as an operator on symmetric tensors.
    pub fn operator_norm(&self) -> f64 {
        let n = nsym(self.dim);
        let m = nalgebra::DMatrix::from_fn(n, n, |i, j| 0.5 * (self.kelvin[i][j] + self.kelvin[j][i]));
        m.symmetric_eigenvalues().iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    /// Largest entrywise difference relative to the largest entry of `self`.
    pub fn relative_distance(&self, other: &StressHessian) -> f64 {
        let n = nsym(self.dim);
        let mut scale = 0.0f64;
        let mut diff = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                scale = scale.max(self.kelvin[i][j].abs());
                diff = diff.max((self.kelvin[i][j] - other.kelvin[i][j]).abs());
            }
        }
        diff / scale.max(f64::MIN_POSITIVE)
    }
}

fn kelvin_index(dim: usize, j: usize, k: usize) -> (usize, f64) {
    let pairs = crate::tensor::packed_pairs(dim);
    let key = if j <= k { (j, k) } else { (k, j) };
    let a = pairs.iter().position(|&p| p == key).expect("index out of range");
    (a, if j == k { 1.0 } else { std::f64::consts::FRAC_1_SQRT_2 })
}

/// Empirical constants of the p-potential bounds over a random sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstitutiveCertificate {
    pub law: Law,
    pub p: f64,
    pub delta: f64,
    pub mu: f64,
    pub dim: usize,
    pub seed: u64,
    pub samples: usize,
    pub magnitude_range: (f64, f64),
    /// min of `C:∇²Φ(B):C / ((1+|B|²)^{(p-2)/2}|C|²)`
    pub gamma1_est: f64,
    /// max of `|∇²Φ(B)| / (1+|B|²)^{(p-2)/2}`
    pub gamma2_est: f64,
    /// min of `(S(B)-S(C)):(B-C) / ((1+|B|²+|C|²)^{(p-2)/2}|B-C|²)`
    pub c1gamma1_est: f64,
    /// max of `|S(B)-S(C)| / ((1+|B|²+|C|²)^{(p-2)/2}|B-C|)`
    pub c2gamma2_est: f64,
    /// min of `S(B):B / ((1+|B|²)^{(p-2)/2}|B|²)`
    pub coercivity_est: f64,
    /// max of `|S(B)| / ((1+|B|²)^{(p-2)/2}|B|)`
    pub growth_est: f64,
    /// min of the raw monotonicity pairing `(S(B)-S(C)):(B-C)`
    pub monotonicity_min: f64,
    /// max relative error between `S:E` and a central difference of `Φ`
    pub gradient_max_rel_err: f64,
    pub violations: usize,
}

/// Draws a symmetric tensor with log-uniform norm in `[lo, hi]` and a
/// uniformly random direction.
pub fn sample_tensor<R: Rng>(rng: &mut R, dim: usize, lo: f64, hi: f64) -> SymTensor {
    let n = nsym(dim);
    let mut k = [0.0; MAX_SYM];
    let mut norm = 0.0;
    while norm < 1e-12 {
        for v in k.iter_mut().take(n) {
            *v = rng.sample(StandardNormal);
        }
        norm = k[..n].iter().map(|v| v * v).sum::<f64>().sqrt();
    }
    let mag = (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp();
    for v in k.iter_mut().take(n) {
        *v *= mag / norm;
    }
    SymTensor::from_kelvin(dim, &k[..n])
}

/// Relative error of the stress against a central difference of the potential
/// along the unit direction `e`.
pub fn gradient_consistency_error(pp: &PPotential, b: &SymTensor, e: &SymTensor) -> f64 {
    let t = 1e-5 * b.norm().max(1e-300);
    let fd = (pp.potential(&(*b + e.scale(t))) - pp.potential(&(*b - e.scale(t)))) / (2.0 * t);
    let s = pp.stress(b);
    (fd - s.inner(e)).abs() / (s.norm() * e.norm()).max(f64::MIN_POSITIVE)
}

/// Sampling certificate of the bounds; deterministic in `seed`.
pub fn certify_bounds(
    pp: &PPotential,
    dim: usize,
    samples: usize,
    magnitude_range: (f64, f64),
    seed: u64,
) -> Result<ConstitutiveCertificate, ConstitutiveError> {
    let (lo, hi) = magnitude_range;
    if samples == 0 {
        return Err(ConstitutiveError::InvalidParameter("samples must be >= 1".into()));
    }
    if !(lo > 0.0 && hi >= lo) {
        return Err(ConstitutiveError::InvalidParameter(format!(
            "magnitude range ({lo}, {hi}) must satisfy 0 < low <= high"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e = pp.p - 2.0;
    let mut cert = ConstitutiveCertificate {
        law: pp.law,
        p: pp.p,
        delta: pp.delta,
        mu: pp.mu,
        dim,
        seed,
        samples,
        magnitude_range,
        gamma1_est: f64::INFINITY,
        gamma2_est: 0.0,
        c1gamma1_est: f64::INFINITY,
        c2gamma2_est: 0.0,
        coercivity_est: f64::INFINITY,
        growth_est: 0.0,
        monotonicity_min: f64::INFINITY,
        gradient_max_rel_err: 0.0,
        violations: 0,
    };
    for _ in 0..samples {
        let b = sample_tensor(&mut rng, dim, lo, hi);
        let c = sample_tensor(&mut rng, dim, lo, hi);
        let (nb2, nc2) = (b.norm_sq(), c.norm_sq());
        let wb = (1.0 + nb2).powf(0.5 * e);
        let wbc = (1.0 + nb2 + nc2).powf(0.5 * e);

        let h = pp.stress_hessian(&b)?;
        let g1 = h.quadratic_form(&c) / (wb * nc2);
        let g2 = h.operator_norm() / wb;

        let (sb, sc) = (pp.checked_stress(&b)?, pp.checked_stress(&c)?);
        let diff = b - c;
        let mono = (sb - sc).inner(&diff);
        let m1 = mono / (wbc * diff.norm_sq());
        let m2 = (sb - sc).norm() / (wbc * diff.norm());
        let coer = sb.inner(&b) / (wb * nb2);
        let grow = sb.norm() / (wb * nb2.sqrt());

        let dir = c.scale(1.0 / c.norm());
        let grad_err = gradient_consistency_error(pp, &b, &dir);

        let lower = [g1, m1, coer];
        let upper = [g2, m2, grow];
        if lower.iter().any(|v| !(v.is_finite() && *v > 0.0)) || upper.iter().any(|v| !v.is_finite()) || !(mono >= 0.0)
        {
            cert.violations += 1;
        }
        cert.gamma1_est = cert.gamma1_est.min(g1);
        cert.gamma2_est = cert.gamma2_est.max(g2);
        cert.c1gamma1_est = cert.c1gamma1_est.min(m1);
        cert.c2gamma2_est = cert.c2gamma2_est.max(m2);
        cert.coercivity_est = cert.coercivity_est.min(coer);
        cert.growth_est = cert.growth_est.max(grow);
        cert.monotonicity_min = cert.monotonicity_min.min(mono);
        cert.gradient_max_rel_err = cert.gradient_max_rel_err.max(grad_err);
    }
    Ok(cert)
}
