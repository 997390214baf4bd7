//! Phase-decomposition multipliers `m`, `M`, `m_K` and the `eta`-averaging
//! identity behind them.
//!
//! `m(xi) = int_{[1/4,3/4]^n} |Phi(xi + zeta)|^2 dzeta` factorizes over the
//! axes because `Phi` is a tensor product. Along one axis the integral is a
//! difference of the antiderivative of `g^2`, which is linear on the plateau,
//! constant beyond the cutoff, and integrated by Gauss–Legendre on the
//! transition `[0.09, 0.1]`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::geometry::Cube;
use crate::grid::{pow2, GridSpec, Lattice};
use crate::quadrature::CompositeRule;
use crate::wavepacket::{phi_hat, BumpProfile, CUTOFF, PLATEAU};

/// Default Gauss–Legendre order on the transition panel.
pub const DEFAULT_NODES: usize = 64;

/// `m` (positive only when every coordinate lies in this open interval).
pub const M_SUPPORT: (f64, f64) = (-0.85, -0.15);

/// Number of Hermite intervals tabulating the transition antiderivative.
const TABLE_INTERVALS: usize = 4096;

/// Quadrature engine for `m` and the sums built from it.
///
/// The antiderivative of `g^2` on the transition is computed once by
/// Gauss–Legendre per table interval and then interpolated by cubic Hermite
/// polynomials using the exact derivative `g^2`.
#[derive(Debug, Clone)]
pub struct PhaseMultipliers {
    nodes: usize,
    table: Vec<f64>,
    slopes: Vec<f64>,
}

impl Default for PhaseMultipliers {
    fn default() -> Self {
        Self::new(DEFAULT_NODES)
    }
}

impl PhaseMultipliers {
    pub fn new(nodes: usize) -> Self {
        let h = (CUTOFF - PLATEAU) / TABLE_INTERVALS as f64;
        let sq = |u: f64| BumpProfile.eval(u).powi(2);
        let mut table = Vec::with_capacity(TABLE_INTERVALS + 1);
        let mut slopes = Vec::with_capacity(TABLE_INTERVALS + 1);
        let (x, w) = crate::quadrature::gauss_legendre(8);
        let mut acc = PLATEAU;
        table.push(acc);
        slopes.push(1.0);
        for i in 0..TABLE_INTERVALS {
            let mid = PLATEAU + (i as f64 + 0.5) * h;
            acc += x.iter().zip(&w).map(|(&xi, &wi)| 0.5 * h * wi * sq(mid + 0.5 * h * xi)).sum::<f64>();
            table.push(acc);
            slopes.push(sq(mid + 0.5 * h));
        }
        Self { nodes, table, slopes }
    }

    /// Gauss–Legendre order of the reference quadrature.
    pub fn nodes(&self) -> usize {
        self.nodes
    }

    /// `G(u) = int_0^u g^2`, odd in `u`.
    fn antiderivative(&self, u: f64) -> f64 {
        let a = u.abs();
        let v = if a <= PLATEAU {
            a
        } else if a >= CUTOFF {
            self.table[TABLE_INTERVALS]
        } else {
            let h = (CUTOFF - PLATEAU) / TABLE_INTERVALS as f64;
            let x = (a - PLATEAU) / h;
            let i = (x.floor() as usize).min(TABLE_INTERVALS - 1);
            let t = x - i as f64;
            let (y0, y1) = (self.table[i], self.table[i + 1]);
            let (d0, d1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
            let t2 = t * t;
            let t3 = t2 * t;
            (2.0 * t3 - 3.0 * t2 + 1.0) * y0
                + (t3 - 2.0 * t2 + t) * d0
                + (-2.0 * t3 + 3.0 * t2) * y1
                + (t3 - t2) * d1
        };
        v.copysign(u)
    }

    /// `int_{1/4}^{3/4} g(t + zeta)^2 dzeta`.
    pub fn axis_factor(&self, t: f64) -> f64 {
        if t <= M_SUPPORT.0 || t >= M_SUPPORT.1 {
            return 0.0;
        }
        (self.antiderivative(t + 0.75) - self.antiderivative(t + 0.25)).max(0.0)
    }

    /// `m(xi)`.
    pub fn m(&self, xi: &[f64]) -> f64 {
        xi.iter().map(|&t| self.axis_factor(t)).product()
    }

    /// `m(xi)` by direct Gauss–Legendre quadrature of `g(t + zeta)^2` over
    /// `zeta in [1/4, 3/4]`, split at the kinks `+-0.09`, `+-0.1` of the
    /// integrand, with `nodes` points per panel. Reference for the tabulated
    /// evaluation.
    pub fn m_quadrature(&self, xi: &[f64]) -> f64 {
        xi.iter()
            .map(|&t| {
                let (a, b) = (t + 0.25, t + 0.75);
                let mut breaks = vec![a];
                for k in [-CUTOFF, -PLATEAU, PLATEAU, CUTOFF] {
                    if k > a && k < b {
                        breaks.push(k);
                    }
                }
                breaks.push(b);
                CompositeRule::new(&breaks, self.nodes).integrate(|u| BumpProfile.eval(u).powi(2))
            })
            .product()
    }

    /// The window of `l` with possibly nonzero `m(2^l xi)`.
    pub fn nonzero_window(xi: &[f64]) -> Option<(i32, i32)> {
        let sup = xi.iter().map(|t| t.abs()).fold(0.0, f64::max);
        let inf = xi.iter().map(|t| t.abs()).fold(f64::INFINITY, f64::min);
        if sup == 0.0 || inf == 0.0 {
            return None;
        }
        // Need 2^l |xi_j| in (0.15, 0.85) for every j.
        let lo = (0.15 / sup).log2().floor() as i32;
        let hi = (0.85 / inf).log2().ceil() as i32;
        Some((lo, hi))
    }

    /// `M(xi) = sum_{l in Z} m(2^l xi)`, summed over the exact nonzero window.
    pub fn big_m(&self, xi: &[f64]) -> Result<f64> {
        if xi.iter().all(|&t| t == 0.0) {
            return Err(Error::InvalidArgument("M is undefined at the origin".into()));
        }
        let Some((lo, hi)) = Self::nonzero_window(xi) else {
            return Ok(0.0);
        };
        Ok((lo..=hi).map(|l| self.m_scaled(xi, l)).sum())
    }

    fn m_scaled(&self, xi: &[f64], l: i32) -> f64 {
        let s = pow2(l);
        xi.iter().map(|&t| self.axis_factor(s * t)).product()
    }

    /// `sum_{l=-L}^{L} m(2^l xi)`.
    pub fn big_m_truncated(&self, xi: &[f64], half_range: i32) -> Result<f64> {
        if xi.iter().all(|&t| t == 0.0) {
            return Err(Error::InvalidArgument("M is undefined at the origin".into()));
        }
        Ok((-half_range..=half_range).map(|l| self.m_scaled(xi, l)).sum())
    }

    /// Whether the truncation `[-L, L]` covers every nonzero term.
    pub fn truncation_is_exact(xi: &[f64], half_range: i32) -> bool {
        match Self::nonzero_window(xi) {
            None => true,
            Some((lo, hi)) => -half_range <= lo && hi <= half_range,
        }
    }

    /// `m_K(xi) = sum_{k1,k2=1}^K M(2^{kappa(k1)} A_{k2}^{-1} xi)`.
    pub fn m_k(&self, xi: &[f64], k: usize, seq: &PhaseSequences) -> Result<f64> {
        if k < 1 {
            return Err(Error::InvalidArgument("K must be at least 1".into()));
        }
        let mut total = 0.0;
        for k2 in 1..=k {
            let y = seq.inverse_rotate(k2, xi);
            for k1 in 1..=k {
                let s = 2f64.powf(seq.kappa(k1));
                let z: Vec<f64> = y.iter().map(|t| s * t).collect();
                total += self.big_m(&z)?;
            }
        }
        Ok(total)
    }

    /// Minimum of `m_K` over `angles x radii` samples of the annulus
    /// `1 <= |xi| < 2` (the unit sphere when `radii == 1`).
    pub fn m_k_annulus_inf(
        &self,
        dim: usize,
        k: usize,
        seq: &PhaseSequences,
        angles: usize,
        radii: usize,
    ) -> Result<f64> {
        let mut best = f64::INFINITY;
        for r in 0..radii.max(1) {
            let rad = 2f64.powf(r as f64 / radii.max(1) as f64);
            match dim {
                1 => {
                    for sign in [-1.0, 1.0] {
                        best = best.min(self.m_k(&[sign * rad], k, seq)?);
                    }
                }
                _ => {
                    for a in 0..angles {
                        let th = 2.0 * PI * a as f64 / angles as f64;
                        best = best.min(self.m_k(&[rad * th.cos(), rad * th.sin()], k, seq)?);
                    }
                }
            }
        }
        Ok(best)
    }

    /// Discretized `int_{SO(n)} int_0^1 M(2^kappa A xi) dkappa dmu` by the
    /// midpoint rule on `kappa_points x angle_points`.
    pub fn rotation_dilation_average(
        &self,
        xi: &[f64],
        kappa_points: usize,
        angle_points: usize,
    ) -> Result<f64> {
        let mut acc = 0.0;
        let angles = if xi.len() == 2 { angle_points.max(1) } else { 1 };
        for a in 0..angles {
            let th = 2.0 * PI * (a as f64 + 0.5) / angles as f64;
            let y = if xi.len() == 2 { rotate(th, xi) } else { xi.to_vec() };
            for k in 0..kappa_points {
                let s = 2f64.powf((k as f64 + 0.5) / kappa_points as f64);
                let z: Vec<f64> = y.iter().map(|t| s * t).collect();
                acc += self.big_m(&z)?;
            }
        }
        Ok(acc / (angles * kappa_points) as f64)
    }
}

fn rotate(theta: f64, xi: &[f64]) -> Vec<f64> {
    let (s, c) = theta.sin_cos();
    vec![c * xi[0] - s * xi[1], s * xi[0] + c * xi[1]]
}

/// Equidistributed rotation and dilation sequences with `A_1 = id` and
/// `kappa(1) = 0`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseSequences {
    /// For `n = 1`, alternate the reflection `xi -> -xi` (not part of SO(1)).
    pub reflect: bool,
}

/// `(sqrt(5) - 1) / 2`.
pub const GOLDEN: f64 = 0.618_033_988_749_894_9;

impl PhaseSequences {
    /// `kappa(k) = frac((k - 1) g)`.
    pub fn kappa(&self, k: usize) -> f64 {
        ((k - 1) as f64 * GOLDEN).fract()
    }

    /// Angle of `A_k`: `2 pi frac((k - 1) g)`.
    pub fn angle(&self, k: usize) -> f64 {
        2.0 * PI * ((k - 1) as f64 * GOLDEN).fract()
    }

    /// `A_k^{-1} xi`.
    pub fn inverse_rotate(&self, k: usize, xi: &[f64]) -> Vec<f64> {
        match xi.len() {
            1 => {
                if self.reflect && k % 2 == 0 {
                    vec![-xi[0]]
                } else {
                    xi.to_vec()
                }
            }
            _ => rotate(-self.angle(k), xi),
        }
    }
}

/// Divided-difference seminorms `sup |xi|^{|alpha|} |Delta^alpha m_K|` for
/// `1 <= |alpha| <= 2`, sampled on log-spaced radii and uniform angles.
/// `step` is the difference step relative to `|xi|`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeminormReport {
    pub step: f64,
    /// `(alpha, sup)` pairs.
    pub values: Vec<(Vec<u32>, f64)>,
}

pub fn m_k_seminorms(
    engine: &PhaseMultipliers,
    dim: usize,
    k: usize,
    seq: &PhaseSequences,
    step: f64,
    samples: usize,
) -> Result<SeminormReport> {
    let alphas: Vec<Vec<u32>> = match dim {
        1 => vec![vec![1], vec![2]],
        _ => vec![vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]],
    };
    let mut values: Vec<(Vec<u32>, f64)> = alphas.iter().map(|a| (a.clone(), 0.0)).collect();
    let radii = 4;
    for r in 0..radii {
        let rad = 2f64.powf(r as f64 / radii as f64);
        let points: Vec<Vec<f64>> = match dim {
            1 => vec![vec![-rad], vec![rad]],
            _ => (0..samples)
                .map(|a| {
                    let th = 2.0 * PI * (a as f64 + 0.25) / samples as f64;
                    vec![rad * th.cos(), rad * th.sin()]
                })
                .collect(),
        };
        for x in points {
            let h = step * rad;
            let eval = |d: &[f64]| -> Result<f64> {
                let y: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + b * h).collect();
                engine.m_k(&y, k, seq)
            };
            for (alpha, best) in values.iter_mut() {
                let v = divided_difference(alpha, &eval)?;
                *best = best.max(rad.powi(alpha.iter().sum::<u32>() as i32) * v.abs() / h.powi(alpha.iter().sum::<u32>() as i32));
            }
        }
    }
    Ok(SeminormReport { step, values })
}

/// Central difference numerator for multi-index `alpha` (orders 1 and 2).
fn divided_difference(alpha: &[u32], eval: &dyn Fn(&[f64]) -> Result<f64>) -> Result<f64> {
    let n = alpha.len();
    let unit = |j: usize, s: f64| -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[j] = s;
        v
    };
    let order: u32 = alpha.iter().sum();
    if order == 1 {
        let j = alpha.iter().position(|&a| a == 1).expect("order one");
        return Ok((eval(&unit(j, 0.5))? - eval(&unit(j, -0.5))?) * 1.0);
    }
    if let Some(j) = alpha.iter().position(|&a| a == 2) {
        return Ok(eval(&unit(j, 1.0))? - 2.0 * eval(&vec![0.0; n])? + eval(&unit(j, -1.0))?);
    }
    // Mixed second difference.
    let d = |a: f64, b: f64| -> Result<f64> { eval(&[a, b]) };
    Ok((d(0.5, 0.5)? - d(0.5, -0.5)? - d(-0.5, 0.5)? + d(-0.5, -0.5)?) * 1.0)
}

/// Which multiplier a table holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MultiplierKind {
    Small,
    Summed,
    Averaged { k: usize, sequences: PhaseSequences },
}

/// A multiplier sampled on the frequency lattice (DC set to zero).
#[derive(Debug, Clone)]
pub struct MultiplierTable {
    pub grid: GridSpec,
    pub kind: MultiplierKind,
    pub values: Vec<f64>,
}

impl MultiplierTable {
    pub fn build(engine: &PhaseMultipliers, grid: &GridSpec, kind: MultiplierKind) -> Result<Self> {
        let n = grid.dim();
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.len() {
            let k = grid.freq_point(i);
            let xi = grid.freq_value(k);
            let xi = &xi[..n];
            let v = if k == [0, 0] {
                match kind {
                    MultiplierKind::Small => engine.m(xi),
                    _ => 0.0,
                }
            } else {
                match kind {
                    MultiplierKind::Small => engine.m(xi),
                    MultiplierKind::Summed => engine.big_m(xi)?,
                    MultiplierKind::Averaged { k, sequences } => engine.m_k(xi, k, &sequences)?,
                }
            };
            values.push(v);
        }
        Ok(Self { grid: *grid, kind, values })
    }

    pub fn at(&self, k: Lattice) -> f64 {
        self.values[self.grid.freq_index(k)]
    }
}

/// `F(M_{-eta} A_{eta,l} M_eta e_xi)(xi) / F(e_xi)(xi)`: the response of one
/// Fourier mode `xi` (frequency integer) to the conjugated generation operator.
pub fn mode_response(eta: Lattice, xi: Lattice, l: i32, grid: &GridSpec) -> f64 {
    let n = grid.dim();
    let p = grid.box_exponent();
    let e = l + 1 - p;
    let d = grid.freq_spacing();
    let side = pow2(-l);
    let mut y = [0.0f64; 2];
    for j in 0..n {
        // Cube of side 2^-(l+1) containing eta must be the upper child along
        // every axis of its parent.
        let c = if e >= 0 { eta[j] << e } else { eta[j] >> (-e) };
        if c & 1 == 0 {
            return 0.0;
        }
        let parent = c >> 1;
        // c(Q_(1)) = corner + side / 4
        let c1 = parent as f64 * side + 0.25 * side;
        y[j] = ((xi[j] + eta[j]) as f64 * d - c1) / side;
    }
    let v = phi_hat(&y[..n]);
    v * v
}

/// One step of the averaging study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AveragingStep {
    pub half_width: f64,
    pub samples: u64,
    pub relative_error: f64,
}

/// `sum_{a=lo}^{hi} r(a)` along one axis, where `r` is the per-axis factor of
/// `mode_response` at `eta_j = a * stride`. `r` is periodic with period
/// `2^-l`, so the sum is assembled from whole periods plus prefix sums.
fn axis_lattice_sum(xi: i64, lo: i64, hi: i64, stride: i64, l: i32, grid: &GridSpec) -> f64 {
    if hi < lo {
        return 0.0;
    }
    let p = grid.box_exponent();
    let period = (1i64 << (p - l)) / stride;
    let e = l + 1 - p;
    let side = pow2(-l);
    let d = grid.freq_spacing();
    let factor = |eta: i64| -> f64 {
        let c = if e >= 0 { eta << e } else { eta >> (-e) };
        if c & 1 == 0 {
            return 0.0;
        }
        let c1 = (c >> 1) as f64 * side + 0.25 * side;
        BumpProfile.eval(((xi + eta) as f64 * d - c1) / side).powi(2)
    };
    let mut prefix = Vec::with_capacity(period as usize + 1);
    let mut acc = 0.0;
    prefix.push(0.0);
    for a in 0..period {
        acc += factor(a * stride);
        prefix.push(acc);
    }
    let total = acc;
    // sum over [0, x) for x >= 0 or negative x via periodicity.
    let upto = |x: i64| -> f64 {
        let q = x.div_euclid(period);
        let r = x.rem_euclid(period);
        q as f64 * total + prefix[r as usize]
    };
    upto(hi + 1) - upto(lo)
}

/// The `eta`-average of `M_{-eta} A_{eta,l} M_eta f` over the lattice points
/// `eta in stride * 2^-p Z^n` of each cube, weighted by `d^n / |Q_N|`, against
/// `F^{-1}[m(2^l .) Ff]`.
///
/// Per Fourier mode the average is the lattice sum of `mode_response`, which
/// factorizes over the axes; each axis sum is evaluated exactly through the
/// periodicity of the summand.
pub fn verify_averaging_identity(
    engine: &PhaseMultipliers,
    l: i32,
    f: &Field,
    cubes: &[Cube],
    stride: i64,
) -> Result<Vec<AveragingStep>> {
    let grid = *f.grid();
    let n = grid.dim();
    let p = grid.box_exponent();
    if l > p || stride < 1 || stride as f64 * grid.freq_spacing() > pow2(-l) / 64.0 {
        return Err(Error::InvalidArgument("eta-sample too coarse for the generation".into()));
    }
    if (1i64 << (p - l)) % stride != 0 {
        return Err(Error::InvalidArgument("stride must divide the period".into()));
    }
    if !f.is_mean_zero() {
        return Err(Error::NotMeanZero);
    }
    for w in cubes.windows(2) {
        if !w[0].dilate(2.0).inside(&w[1]) {
            return Err(Error::InvalidArgument("cube sequence must satisfy 2Q_N ⊆ Q_{N+1}".into()));
        }
    }
    let spec = f.fourier();
    let floor = spec.max_abs() * 1e-13;
    let modes: Vec<(usize, Lattice)> = (0..grid.len())
        .filter(|&i| spec.values()[i].norm() > floor)
        .map(|i| (i, grid.freq_point(i)))
        .collect();
    let target: Vec<Complex64> = modes
        .iter()
        .map(|&(i, k)| {
            let xi = grid.freq_value(k);
            let xi: Vec<f64> = xi[..n].iter().map(|t| pow2(l) * t).collect();
            spec.values()[i] * engine.m(&xi)
        })
        .collect();
    let target_norm = target.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let d = grid.freq_spacing() * stride as f64;
    let mut out = Vec::new();
    for q in cubes {
        let c = q.center();
        let r = q.half_width();
        let lo: Vec<i64> = (0..n).map(|j| ((c[j] - r) / d).ceil() as i64).collect();
        let hi: Vec<i64> = (0..n).map(|j| ((c[j] + r) / d).floor() as i64).collect();
        let weight = (d / q.side_length()).powi(n as i32);
        let samples = (0..n).map(|j| (hi[j] - lo[j] + 1).max(0) as u64).product();
        let mut diff = 0.0;
        for (&(i, k), t) in modes.iter().zip(&target) {
            let sum: f64 =
                (0..n).map(|j| axis_lattice_sum(k[j], lo[j], hi[j], stride, l, &grid)).product();
            diff += (spec.values()[i] * (sum * weight) - t).norm_sqr();
        }
        let diff = diff.sqrt();
        let err = if target_norm == 0.0 { diff } else { diff / target_norm };
        out.push(AveragingStep { half_width: r, samples, relative_error: err });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn m_vanishes_off_support() {
        let e = PhaseMultipliers::default();
        assert_eq!(e.m(&[0.0]), 0.0);
        assert_eq!(e.m(&[0.0, 0.0]), 0.0);
        assert_eq!(e.m(&[-0.1]), 0.0);
        assert_eq!(e.m(&[-0.9]), 0.0);
        assert_eq!(e.m(&[-0.5, -0.14]), 0.0);
    }

    #[test]
    fn m_at_minus_half_is_the_bump_energy() {
        let e = PhaseMultipliers::default();
        let v = e.m(&[-0.5]);
        assert!((0.18..=0.20).contains(&v), "{v}");
    }

    #[test]
    fn big_m_is_dyadically_invariant() {
        let e = PhaseMultipliers::default();
        for xi in [[-0.3, -0.4], [-1.7, -0.9], [0.2, -0.6]] {
            let a = e.big_m(&xi).unwrap();
            let b = e.big_m(&[2.0 * xi[0], 2.0 * xi[1]]).unwrap();
            assert!((a - b).abs() < 1e-14);
        }
        assert_eq!(e.big_m(&[0.5]).unwrap(), 0.0);
        assert!(e.big_m(&[0.0]).is_err());
    }

    #[test]
    fn sequences_start_at_identity() {
        let s = PhaseSequences::default();
        assert_eq!(s.kappa(1), 0.0);
        assert_eq!(s.inverse_rotate(1, &[0.3, -0.2]), vec![0.3, -0.2]);
    }

    #[test]
    fn table_matches_reference_quadrature() {
        let e = PhaseMultipliers::default();
        let fine = PhaseMultipliers::new(128);
        for k in 0..200 {
            let t = -0.9 + 0.8 * k as f64 / 199.0;
            let xi = [t, -0.5 + 0.3 * (k as f64 * 0.37).sin()];
            let a = e.m(&xi);
            let b = e.m_quadrature(&xi);
            let c = fine.m_quadrature(&xi);
            assert!((a - b).abs() < 1e-13, "{t}: {a} {b}");
            assert!((b - c).abs() < 1e-12, "{t}: {b} {c}");
        }
    }

    #[test]
    fn mode_response_matches_conjugated_generation() {
        let grid = GridSpec::new(1, 6, 2).unwrap();
        let l = 1;
        for (eta, xi) in [(40i64, -20i64), (48, -30), (35, 3), (-12, 5), (47, -27)] {
            let e = Field::from_fn(grid, |x| Complex64::from_polar(1.0, 2.0 * PI * xi as f64 * x[0] / 64.0));
            let g = e.modulate([eta, 0]);
            let g = crate::modelop::apply_a_generation([eta, 0], l, &g).unwrap();
            let g = g.modulate([-eta, 0]);
            let got = (g.inner(&e).unwrap() / e.inner(&e).unwrap()).re;
            let want = mode_response([eta, 0], [xi, 0], l, &grid);
            assert!((got - want).abs() < 1e-12, "eta={eta} xi={xi}: {got} {want}");
        }
    }

    #[test]
    fn averaging_error_decreases_along_the_cubes() {
        let grid = GridSpec::new(1, 11, 2).unwrap();
        let f = Field::from_fn(grid, |x| Complex64::from_polar(1.0, -PI * x[0]));
        let cubes: Vec<Cube> = (0..24).map(|n| Cube::centered(1, 0.35 * pow2(n)).unwrap()).collect();
        let steps = verify_averaging_identity(&PhaseMultipliers::default(), 0, &f, &cubes, 1).unwrap();
        let errs: Vec<f64> = steps.iter().map(|s| s.relative_error).collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
        assert!(*errs.last().unwrap() < 1e-6);
    }
}
