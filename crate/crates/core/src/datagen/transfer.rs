use nalgebra::{Complex, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Rational filter `B(q⁻¹) / A(q⁻¹)`; coefficient `k` multiplies `q⁻ᵏ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferFunction {
    pub numerator: Vec<f64>,
    /// Monic: `denominator[0] == 1`.
    pub denominator: Vec<f64>,
}

/// Impulse responses are summed over this many samples when a norm is needed.
const NORM_HORIZON: usize = 4096;

impl TransferFunction {
    pub fn new(numerator: Vec<f64>, denominator: Vec<f64>) -> Self {
        Self { numerator, denominator }
    }

    pub fn identity() -> Self {
        Self::new(vec![1.0], vec![1.0])
    }

    /// FIR filter with `taps[k]` at delay `k + 1`.
    pub fn fir(taps: &[f64]) -> Self {
        let mut numerator = Vec::with_capacity(taps.len() + 1);
        numerator.push(0.0);
        numerator.extend_from_slice(taps);
        Self::new(numerator, vec![1.0])
    }

    /// At least one pure delay: no feedthrough.
    pub fn is_strictly_proper(&self) -> bool {
        self.numerator.first().is_none_or(|&b| b == 0.0)
    }

    pub fn is_monic(&self) -> bool {
        self.denominator.first() == Some(&1.0)
    }

    pub fn is_zero(&self) -> bool {
        self.numerator.iter().all(|&b| b == 0.0)
    }

    /// State dimension of a minimal-form realization.
    pub fn order(&self) -> usize {
        self.numerator.len().max(self.denominator.len()).saturating_sub(1)
    }

    pub fn poles(&self) -> Vec<Complex<f64>> {
        polynomial_roots(&self.denominator)
    }

    pub fn zeros(&self) -> Vec<Complex<f64>> {
        polynomial_roots(&self.numerator)
    }

    pub fn is_stable(&self) -> bool {
        self.poles().iter().all(|p| p.norm() < 1.0)
    }

    /// First `len` impulse response coefficients, delay 0 first.
    pub fn impulse_response(&self, len: usize) -> Vec<f64> {
        series_ratio(&self.numerator, &self.denominator, len)
    }

    pub fn impulse_norm(&self) -> f64 {
        self.impulse_response(NORM_HORIZON).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn filter(&self, input: &[f64]) -> Vec<f64> {
        let a0 = self.denominator[0];
        let mut out = vec![0.0; input.len()];
        for t in 0..input.len() {
            let mut acc = 0.0;
            for (k, b) in self.numerator.iter().enumerate().take(t + 1) {
                acc += b * input[t - k];
            }
            for (k, a) in self.denominator.iter().enumerate().skip(1).take(t) {
                acc -= a * out[t - k];
            }
            out[t] = acc / a0;
        }
        out
    }
}

/// Power series of `num / den` truncated to `len` terms.
pub(crate) fn series_ratio(num: &[f64], den: &[f64], len: usize) -> Vec<f64> {
    let mut h = vec![0.0; len];
    for k in 0..len {
        let mut acc = num.get(k).copied().unwrap_or(0.0);
        for l in 1..=k.min(den.len().saturating_sub(1)) {
            acc -= den[l] * h[k - l];
        }
        h[k] = acc / den[0];
    }
    h
}

pub(crate) fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Roots in `z` of `c₀ zⁿ + c₁ zⁿ⁻¹ + … + cₙ`, the polynomial in `q⁻¹`
/// multiplied through by `zⁿ`. Leading zero coefficients are pure delays and
/// contribute no finite root; trailing zeros are roots at the origin.
pub(crate) fn polynomial_roots(coeffs: &[f64]) -> Vec<Complex<f64>> {
    let start = match coeffs.iter().position(|&c| c != 0.0) {
        Some(s) => s,
        None => return Vec::new(),
    };
    let c = &coeffs[start..];
    let end = c.iter().rposition(|&v| v != 0.0).unwrap();
    let mut roots = vec![Complex::new(0.0, 0.0); c.len() - 1 - end];
    let c = &c[..=end];
    let n = c.len() - 1;
    if n == 0 {
        return roots;
    }
    let mut companion = DMatrix::zeros(n, n);
    for k in 0..n {
        companion[(0, k)] = -c[k + 1] / c[0];
    }
    for k in 1..n {
        companion[(k, k - 1)] = 1.0;
    }
    roots.extend(eigenvalues(&companion));
    roots
}

pub(crate) fn eigenvalues(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    match nalgebra::Schur::try_new(m.clone(), 1e-14, 100_000) {
        Some(schur) => schur.complex_eigenvalues().iter().cloned().collect(),
        // Unconverged decompositions are treated as unstable by callers.
        None => vec![Complex::new(f64::INFINITY, 0.0)],
    }
}

/// Monic polynomial with `order` random roots of modulus uniform on
/// `[0, max_modulus]`, real or in conjugate pairs.
pub(crate) fn random_monic<R: Rng>(rng: &mut R, order: usize, max_modulus: f64) -> Vec<f64> {
    let mut poly = vec![1.0];
    let mut remaining = order;
    while remaining > 0 {
        let r = rng.random_range(0.0..=max_modulus);
        if remaining >= 2 && rng.random_bool(0.5) {
            let phi = rng.random_range(0.0..std::f64::consts::PI);
            // (1 − r e^{iφ} q⁻¹)(1 − r e^{−iφ} q⁻¹)
            poly = poly_mul(&poly, &[1.0, -2.0 * r * phi.cos(), r * r]);
            remaining -= 2;
        } else {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            poly = poly_mul(&poly, &[1.0, -sign * r]);
            remaining -= 1;
        }
    }
    poly
}

/// FIR edge filter with `taps` coefficients uniform on `[0, 1]` at delays `1..=taps`.
pub fn random_fir(taps: usize, seed: u64) -> TransferFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<f64> = (0..taps).map(|_| rng.random_range(0.0..=1.0)).collect();
    TransferFunction::fir(&coeffs)
}

/// Pole modulus cap for random rational filters.
pub const MAX_POLE_MODULUS: f64 = 0.95;

/// Strictly proper stable edge filter of random order in `min_order..=max_order`.
///
/// Poles have modulus uniform on `[0, 0.95]`; numerator coefficients at delays
/// `1..=n` are uniform on `[-1, 1]`, rescaled so the impulse response has
/// ℓ2 norm uniform on `[0.1, 1]`.
pub fn random_rational(min_order: usize, max_order: usize, seed: u64) -> TransferFunction {
    assert!(1 <= min_order && min_order <= max_order, "invalid order range");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order = rng.random_range(min_order..=max_order);
    let denominator = random_monic(&mut rng, order, MAX_POLE_MODULUS);
    let mut numerator = vec![0.0];
    numerator.extend((0..order).map(|_| rng.random_range(-1.0..=1.0)));
    let target = rng.random_range(0.1..=1.0);
    let mut tf = TransferFunction::new(numerator, denominator);
    let norm = tf.impulse_norm();
    if norm > 0.0 {
        let scale = target / norm;
        tf.numerator.iter_mut().for_each(|b| *b *= scale);
    }
    tf
}

/// Monic, stable and stably invertible noise filter `C(q⁻¹) / D(q⁻¹)` of
/// random order, zeros and poles of modulus at most 0.95.
pub fn random_noise_filter(min_order: usize, max_order: usize, seed: u64) -> TransferFunction {
    assert!(1 <= min_order && min_order <= max_order, "invalid order range");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order = rng.random_range(min_order..=max_order);
    let denominator = random_monic(&mut rng, order, MAX_POLE_MODULUS);
    let numerator = random_monic(&mut rng, order, MAX_POLE_MODULUS);
    TransferFunction::new(numerator, denominator)
}

/// Monic minimum-phase FIR noise filter `1 + h₁q⁻¹ + … + h_{len−1}q^{−(len−1)}`.
pub fn random_noise_fir(len: usize, seed: u64) -> TransferFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let numerator = random_monic(&mut rng, len.saturating_sub(1), MAX_POLE_MODULUS);
    TransferFunction::new(numerator, vec![1.0])
}
