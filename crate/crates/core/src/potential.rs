//! Exact potential theory: hitting-time transforms on the hypercube by
//! Fourier sums, Matthews' sandwich, the alternating harmonic identity and
//! smoothed Green functions of the torus by eigen-sums.

use std::f64::consts::{LN_2, PI};

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landscape::omega_root;
use crate::quad::integrate;
use crate::special::{ln_gamma, CompensatedSum};

/// Largest hypercube dimension for the exact Krawtchouk tables.
pub const KRAWTCHOUK_MAX_DIM: u32 = 120;

const PRECISION_BUDGET: f64 = 1e-9;

/// The row `K_0(k; n), …, K_n(k; n)` of Krawtchouk values, exact.
///
/// Uses `(i+1) K_{i+1} = (n-2k) K_i - (n-i+1) K_{i-1}`; the division is exact
/// in integers.
pub fn krawtchouk_row(n: u32, k: u32) -> Result<Vec<i128>> {
    if n > KRAWTCHOUK_MAX_DIM || k > n {
        return Err(Error::Parameter(format!(
            "krawtchouk needs k <= n <= {KRAWTCHOUK_MAX_DIM}, got n={n} k={k}"
        )));
    }
    let (n, k) = (n as i128, k as i128);
    let mut row = Vec::with_capacity(n as usize + 1);
    row.push(1i128);
    if n == 0 {
        return Ok(row);
    }
    row.push(n - 2 * k);
    for i in 1..n {
        let a = (n - 2 * k).checked_mul(row[i as usize]);
        let b = (n - i + 1).checked_mul(row[i as usize - 1]);
        let next = match (a, b) {
            (Some(a), Some(b)) => (a - b) / (i + 1),
            _ => return Err(Error::Precision(format!("krawtchouk overflow at n={n}"))),
        };
        row.push(next);
    }
    Ok(row)
}

/// `K_i(k; n) = Σ_j (-1)^j C(k, j) C(n-k, i-j)`.
pub fn krawtchouk(n: u32, i: u32, k: u32) -> Result<f64> {
    if i > n {
        return Err(Error::Parameter(format!(
            "krawtchouk needs i <= n, got i={i} n={n}"
        )));
    }
    Ok(krawtchouk_row(n, k)?[i as usize] as f64)
}

fn hitting_weights(n: u32, lambda: f64) -> Vec<f64> {
    let z = (-lambda).exp();
    let one_minus_z = -(-lambda).exp_m1();
    (0..=n)
        .map(|i| 1.0 / (one_minus_z + z * 2.0 * i as f64 / n as f64))
        .collect()
}

fn checked_ratio(num: &CompensatedSum, den: &CompensatedSum, what: &str) -> Result<f64> {
    let eps = f64::EPSILON;
    let rel =
        4.0 * eps * (num.magnitude() / num.value().abs() + den.magnitude() / den.value().abs());
    if !(rel < PRECISION_BUDGET) {
        return Err(Error::Precision(format!(
            "{what}: cancellation error {rel:.1e}"
        )));
    }
    Ok(num.value() / den.value())
}

/// `f_n(k, s) = E_{z_k}[exp(-s 2^{-γn} H(𝟘))]` for the discrete-time walk on
/// the `n`-cube.
pub fn hypercube_hitting_lt(n: u32, k: u32, s: f64, gamma: f64) -> Result<f64> {
    Ok(hypercube_hitting_profile(n, s, gamma)?[k as usize])
}

/// `f_n(k, s)` for every `k = 0..=n`.
pub fn hypercube_hitting_profile(n: u32, s: f64, gamma: f64) -> Result<Vec<f64>> {
    if n == 0 || n > KRAWTCHOUK_MAX_DIM {
        return Err(Error::Parameter(format!(
            "dimension must be in 1..={KRAWTCHOUK_MAX_DIM}, got {n}"
        )));
    }
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::Parameter(format!(
            "s must be finite and >= 0, got {s}"
        )));
    }
    if s == 0.0 {
        return Ok(vec![1.0; n as usize + 1]);
    }
    let lambda = s * (-gamma * n as f64 * LN_2).exp();
    let w = hitting_weights(n, lambda);
    let binom = krawtchouk_row(n, 0)?;
    let den: CompensatedSum = binom.iter().zip(&w).map(|(&c, &w)| c as f64 * w).collect();
    let mut out = vec![1.0];
    for k in 1..=n {
        let row = krawtchouk_row(n, k)?;
        let num: CompensatedSum = row.iter().zip(&w).map(|(&c, &w)| c as f64 * w).collect();
        out.push(checked_ratio(&num, &den, "hypercube hitting transform")?);
    }
    Ok(out)
}

/// Matthews' sandwich for `E_x[exp(-s H(A \ {x}) / 2^{γn})]` given the
/// extreme pairwise transforms `f_minus <= f_plus` and `|A| = set_size`.
pub fn matthews_bounds(f_plus: f64, f_minus: f64, set_size: f64) -> Result<(f64, f64)> {
    if !(f_minus > 0.0 && f_minus <= f_plus && f_plus < 1.0) {
        return Err(Error::Parameter(format!(
            "matthews bounds need 0 < f- <= f+ < 1, got f+={f_plus} f-={f_minus}"
        )));
    }
    if !(set_size >= 2.0) {
        return Err(Error::Parameter(format!(
            "matthews bounds need |A| >= 2, got {set_size}"
        )));
    }
    let a = set_size;
    let side = |fp: f64, fm: f64| {
        (ln_gamma(1.0 / fm) - ln_gamma(1.0 / fp) + ln_gamma(a) - ln_gamma(a - 1.0)
            + ln_gamma(a - 2.0 + 1.0 / fp)
            - ln_gamma(a - 1.0 + 1.0 / fm))
        .exp()
    };
    Ok((side(f_plus, f_minus), side(f_minus, f_plus)))
}

/// Extreme pairwise transforms for a cloud with minimal distance `d_min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypercubeMatthews {
    pub n: u32,
    pub s: f64,
    pub d_min: u32,
    pub set_size: f64,
    pub f_plus: f64,
    pub f_minus: f64,
    pub lower: f64,
    pub upper: f64,
    /// `ρ/(s+ρ)` with `ρ = |A| 2^{-(1-γ)n}`.
    pub target: f64,
}

pub fn hypercube_matthews(
    n: u32,
    gamma: f64,
    s: f64,
    d_min: u32,
    set_size: f64,
) -> Result<HypercubeMatthews> {
    if d_min == 0 || d_min > n {
        return Err(Error::Parameter(format!(
            "d_min must be in 1..=n, got {d_min}"
        )));
    }
    let prof = hypercube_hitting_profile(n, s, gamma)?;
    let window = &prof[d_min as usize..];
    let f_plus = window.iter().copied().fold(f64::MIN, f64::max);
    let f_minus = window.iter().copied().fold(f64::MAX, f64::min);
    let (lower, upper) = matthews_bounds(f_plus, f_minus, set_size)?;
    let rho = set_size * (-(1.0 - gamma) * n as f64 * LN_2).exp();
    Ok(HypercubeMatthews {
        n,
        s,
        d_min,
        set_size,
        f_plus,
        f_minus,
        lower,
        upper,
        target: rho / (s + rho),
    })
}

/// `f_n(⌈(ω+ε)n⌉, s) - f_n(n, s)` with `I(ω) = (2γ-1) log 2`.
pub fn hypercube_gap(n: u32, gamma: f64, s: f64, eps: f64) -> Result<f64> {
    let omega = omega_root((2.0 * gamma - 1.0) * LN_2)?;
    let k = (((omega + eps) * n as f64).ceil() as u32).min(n);
    let prof = hypercube_hitting_profile(n, s, gamma)?;
    Ok(prof[k as usize] - prof[n as usize])
}

/// `H_n = 1 + 1/2 + … + 1/n`.
pub fn harmonic(n: u32) -> f64 {
    (1..=n).rev().map(|i| 1.0 / i as f64).sum()
}

/// `Σ_{i=1}^n (-1)^i C(n,i)/i` through `∫_0^1 (v^n - 1)/(1 - v) dv`.
pub fn alternating_harmonic(n: u32) -> Result<f64> {
    if n == 0 {
        return Err(Error::Parameter(
            "alternating harmonic sum needs n >= 1".into(),
        ));
    }
    let nf = n as f64;
    // (v^n - 1)/(1 - v) = expm1(n ln v)/(1 - v), substituted v = 1 - w
    let f = |w: f64| {
        if w == 0.0 {
            -nf
        } else {
            (nf * (-w).ln_1p()).exp_m1() / w
        }
    };
    // the integrand has a boundary layer of width 1/n at w = 0
    let split = (8.0 / nf).min(1.0);
    let (a, _) = integrate(f, 0.0, split, 0.0, 1e-14);
    let (b, _) = if split < 1.0 {
        integrate(f, split, 1.0, 0.0, 1e-14)
    } else {
        (0.0, 0.0)
    };
    Ok(a + b)
}

/// Direct alternating sum; exact enough only for small `n`.
pub fn alternating_harmonic_direct(n: u32) -> Result<f64> {
    if n == 0 || n > 60 {
        return Err(Error::Parameter(format!(
            "direct alternating sum supports 1..=60, got {n}"
        )));
    }
    let binom = krawtchouk_row(n, 0)?;
    let sum: CompensatedSum = (1..=n as usize)
        .map(|i| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            sign * binom[i] as f64 / i as f64
        })
        .collect();
    Ok(sum.value())
}

/// `h(n) = 2^{2n} n^{1-γ}`.
pub fn torus_time_scale(bits: u32, gamma: f64) -> f64 {
    (2.0 * bits as f64 * LN_2 + (1.0 - gamma) * (bits as f64).ln()).exp()
}

fn check_torus(bits: u32, s: f64) -> Result<()> {
    if bits == 0 || bits > 12 {
        return Err(Error::Parameter(format!(
            "torus Green functions support 1 <= n <= 12, got {bits}"
        )));
    }
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::Parameter(format!("s must be positive, got {s}")));
    }
    Ok(())
}

fn mode_weight(lam: f64, z: f64) -> f64 {
    0.5 * (1.0 + lam) / (1.0 - z * lam)
}

/// `G^n(x; s)` at one point by the direct eigen-sum.
pub fn torus_green(bits: u32, x: (u64, u64), s: f64, gamma: f64) -> Result<f64> {
    check_torus(bits, s)?;
    let l = 1usize << bits;
    let z = (-s / torus_time_scale(bits, gamma)).exp();
    let cos: Vec<f64> = (0..l)
        .map(|j| (2.0 * PI * j as f64 / l as f64).cos())
        .collect();
    let mut acc = CompensatedSum::new();
    for t1 in 0..l {
        for t2 in 0..l {
            if t1 == 0 && t2 == 0 {
                continue;
            }
            let lam = 0.5 * (cos[t1] + cos[t2]);
            let phase = cos[(t1 * x.0 as usize + t2 * x.1 as usize) % l];
            acc.add(phase * mode_weight(lam, z));
        }
    }
    let zero_mode = 1.0 / -(-s / torus_time_scale(bits, gamma)).exp_m1();
    Ok((acc.value() + zero_mode) / (l * l) as f64)
}

/// Full table of `G^n(·; s)` on the torus of side `2^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusGreen {
    pub bits: u32,
    pub s: f64,
    pub gamma: f64,
    pub side: usize,
    values: Vec<f64>,
}

impl TorusGreen {
    /// Inverse two-dimensional FFT of the mode weights; the `θ = 0` mode,
    /// `1/(1 - e^{-s/h})`, is added in closed form.
    pub fn new(bits: u32, s: f64, gamma: f64) -> Result<Self> {
        check_torus(bits, s)?;
        let l = 1usize << bits;
        let h = torus_time_scale(bits, gamma);
        let z = (-s / h).exp();
        let cos: Vec<f64> = (0..l)
            .map(|j| (2.0 * PI * j as f64 / l as f64).cos())
            .collect();
        let mut buf: Vec<Complex<f64>> = Vec::with_capacity(l * l);
        for t2 in 0..l {
            for t1 in 0..l {
                let w = if t1 == 0 && t2 == 0 {
                    0.0
                } else {
                    mode_weight(0.5 * (cos[t1] + cos[t2]), z)
                };
                buf.push(Complex::new(w, 0.0));
            }
        }
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_inverse(l);
        // rows
        fft.process(&mut buf);
        // columns
        let mut col = vec![Complex::new(0.0, 0.0); l];
        for c in 0..l {
            for r in 0..l {
                col[r] = buf[r * l + c];
            }
            fft.process(&mut col);
            for r in 0..l {
                buf[r * l + c] = col[r];
            }
        }
        let zero_mode = 1.0 / -(-s / h).exp_m1();
        let norm = 1.0 / (l * l) as f64;
        let values = buf.iter().map(|c| (c.re + zero_mode) * norm).collect();
        Ok(Self {
            bits,
            s,
            gamma,
            side: l,
            values,
        })
    }

    pub fn at(&self, x: u64, y: u64) -> f64 {
        let l = self.side as u64;
        self.values[((y % l) * l + x % l) as usize]
    }

    pub fn origin(&self) -> f64 {
        self.values[0]
    }

    /// `Σ_x G(x; s)`.
    pub fn total(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .collect::<CompensatedSum>()
            .value()
    }

    /// `G(0; s) π / (2 n log 2)`.
    pub fn origin_ratio(&self) -> f64 {
        self.origin() * PI / (2.0 * self.bits as f64 * LN_2)
    }

    /// Extremes of `G(x)/G(0)` over `d(0, x) >= r_min`.
    pub fn ratio_extremes(&self, r_min: f64) -> (f64, f64) {
        let l = self.side as u64;
        let wrap = |a: u64| a.min(l - a);
        let g0 = self.origin();
        let mut hi = f64::MIN;
        let mut lo = f64::MAX;
        for y in 0..l {
            for x in 0..l {
                if (wrap(x) + wrap(y)) as f64 >= r_min {
                    let r = self.at(x, y) / g0;
                    hi = hi.max(r);
                    lo = lo.min(r);
                }
            }
        }
        (hi, lo)
    }
}

/// Minimal-distance radius `2^n n^{-κ}` with `κ = 2 + γ`.
pub fn torus_min_radius(bits: u32, gamma: f64) -> f64 {
    let n = bits as f64;
    (n * LN_2 - (2.0 + gamma) * n.ln()).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusProfile {
    pub bits: u32,
    pub s: f64,
    pub f_plus: f64,
    pub f_minus: f64,
    pub set_size: f64,
    pub lower: f64,
    pub upper: f64,
    /// `K_r ρ/(s + K_r ρ)` with the asymptotic `K_r = π/(2 log 2)`.
    pub target: f64,
    /// `s n^γ / (1/f̄ - 1)` with `f̄` the geometric mean of `f^±`.
    pub k_r: f64,
}

/// `f^±` on the torus, the Matthews sandwich for a cloud of `max(2, ρ n^γ)`
/// points and the implied `K_r`.
pub fn torus_hitting_profile(bits: u32, gamma: f64, s: f64, rho: f64) -> Result<TorusProfile> {
    let green = TorusGreen::new(bits, s, gamma)?;
    let (f_plus, f_minus) = green.ratio_extremes(torus_min_radius(bits, gamma));
    let n_gamma = (bits as f64).powf(gamma);
    let set_size = (rho * n_gamma).round().max(2.0);
    let (lower, upper) = matthews_bounds(f_plus, f_minus, set_size)?;
    let kr = PI / (2.0 * LN_2);
    let f_bar = (f_plus * f_minus).sqrt();
    Ok(TorusProfile {
        bits,
        s,
        f_plus,
        f_minus,
        set_size,
        lower,
        upper,
        target: kr * rho / (s + kr * rho),
        k_r: s * n_gamma / (1.0 / f_bar - 1.0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KrFit {
    pub bits: u32,
    /// Least-squares `K` in `1/f̄(s) - 1 = s n^γ / K` over the grid.
    pub k_r: f64,
    /// Log-log slope of `1/f̄(s) - 1` against `s`.
    pub slope: f64,
}

pub fn torus_kr_fit(bits: u32, gamma: f64, s_grid: &[f64]) -> Result<KrFit> {
    if s_grid.len() < 2 {
        return Err(Error::Parameter(
            "K_r fit needs at least two s values".into(),
        ));
    }
    let r_min = torus_min_radius(bits, gamma);
    let n_gamma = (bits as f64).powf(gamma);
    let mut ys = Vec::new();
    for &s in s_grid {
        let (fp, fm) = TorusGreen::new(bits, s, gamma)?.ratio_extremes(r_min);
        ys.push(1.0 / (fp * fm).sqrt() - 1.0);
    }
    // y = c s through the origin, c = n^γ / K
    let sxx: f64 = s_grid.iter().map(|s| s * s).sum();
    let sxy: f64 = s_grid.iter().zip(&ys).map(|(s, y)| s * y).sum();
    let k_r = n_gamma * sxx / sxy;
    let lx: Vec<f64> = s_grid.iter().map(|s| s.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / lx.len() as f64;
    let my = ly.iter().sum::<f64>() / ly.len() as f64;
    let slope = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum::<f64>()
        / lx.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    Ok(KrFit { bits, k_r, slope })
}
