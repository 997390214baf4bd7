//! Homogeneous symbols `a(x, xi)`, the quantization `a(x, D)`, Littlewood-Paley
//! pieces and their kernels, frequency-windowed symbols, and the truncated
//! maximal singular integral.
//!
//! Every shipped symbol factors as `b(x) m(xi)`, so `a(x, D) f = b F^{-1}[m Ff]`
//! exactly. The generic Kohn-Nirenberg sum is kept as the reference path.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, SpectralField};
use crate::geometry::Tile;
use crate::grid::{pow2, GridSpec, Lattice};
use crate::random::trial_rng;
use crate::wavepacket::{phi_hat, psi_hat, WavePacket, PLATEAU};

/// Sharpness of the angular profile of the Riesz-type symbol.
pub const RIESZ_SHARPNESS: f64 = 2.0;

/// Highest derivative order carried by the seminorm tables.
pub const SYMBOL_ORDER: u32 = 2;

/// Largest sample count for the generic quadrature, per dimension.
pub const GENERIC_CAP: [usize; 2] = [1 << 9, 1 << 10];

/// The shipped test symbols.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Symbol {
    /// `a = 1`.
    Identity { dim: usize },
    /// `xi / |xi|` in one dimension.
    Sign,
    /// `s(xi_1 / |xi|)` with `s(u) = tanh(k u) / tanh(k)`, two dimensions.
    Riesz { sharpness: f64 },
    /// `(1 + sin(2 pi x_1 / 2^p) / 2) m(xi)` where `m` is the sign symbol
    /// (n = 1) or the Riesz-type symbol (n = 2).
    Modulated { dim: usize, box_exponent: i32 },
}

/// One entry `c_{alpha,beta}` of a seminorm table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seminorm {
    pub alpha: [u32; 2],
    pub beta: [u32; 2],
    pub bound: f64,
}

impl Symbol {
    pub const NAMES: [&'static str; 4] = ["identity", "sign", "riesz", "modulated"];

    /// Looks a symbol up by name for a grid.
    pub fn by_name(name: &str, grid: &GridSpec) -> Result<Self> {
        let dim = grid.dim();
        let s = match name {
            "identity" => Symbol::Identity { dim },
            "sign" => Symbol::Sign,
            "riesz" => Symbol::Riesz { sharpness: RIESZ_SHARPNESS },
            "modulated" => Symbol::Modulated { dim, box_exponent: grid.box_exponent() },
            _ => return Err(Error::InvalidArgument(format!("unknown symbol {name:?}"))),
        };
        if s.dim() != dim {
            return Err(Error::InvalidArgument(format!("symbol {name} needs n = {}", s.dim())));
        }
        Ok(s)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Symbol::Identity { .. } => "identity",
            Symbol::Sign => "sign",
            Symbol::Riesz { .. } => "riesz",
            Symbol::Modulated { .. } => "modulated",
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            Symbol::Identity { dim } | Symbol::Modulated { dim, .. } => dim,
            Symbol::Sign => 1,
            Symbol::Riesz { .. } => 2,
        }
    }

    pub fn is_x_independent(&self) -> bool {
        !matches!(self, Symbol::Modulated { .. })
    }

    pub fn is_homogeneous(&self) -> bool {
        true
    }

    /// Singular at the origin: evaluated as 0 there, and only applied to
    /// mean-zero fields.
    pub fn is_singular(&self) -> bool {
        !matches!(self, Symbol::Identity { .. })
    }

    pub fn order(&self) -> u32 {
        SYMBOL_ORDER
    }

    /// The `x` factor `b(x)`.
    pub fn amplitude(&self, x: &[f64]) -> f64 {
        match *self {
            Symbol::Modulated { box_exponent, .. } => {
                1.0 + 0.5 * (2.0 * PI * x[0] / pow2(box_exponent)).sin()
            }
            _ => 1.0,
        }
    }

    /// The frequency factor `m(xi)`.
    pub fn multiplier(&self, xi: &[f64]) -> f64 {
        match *self {
            Symbol::Identity { .. } => 1.0,
            Symbol::Sign => sign(xi[0]),
            Symbol::Riesz { sharpness } => riesz(sharpness, xi),
            Symbol::Modulated { dim: 1, .. } => sign(xi[0]),
            Symbol::Modulated { .. } => riesz(RIESZ_SHARPNESS, xi),
        }
    }

    pub fn eval(&self, x: &[f64], xi: &[f64]) -> f64 {
        self.amplitude(x) * self.multiplier(xi)
    }

    /// Declared `c_{alpha,beta}` bounding `|xi|^{|alpha|-|beta|} |d^alpha_xi d^beta_x a|`
    /// for `|alpha|, |beta| <= order`, with `|xi|` at least the lattice
    /// spacing `2^-p` (the `x`-dependent symbol has no finite bound at
    /// `xi -> 0`).
    pub fn seminorms(&self) -> Vec<Seminorm> {
        let n = self.dim();
        let freq = self.multiplier_seminorms();
        let mut out = Vec::new();
        for beta in multi_indices(n, SYMBOL_ORDER) {
            let b_factor = match self {
                Symbol::Modulated { .. } => {
                    let order = beta[0] + beta[1];
                    if order == 0 {
                        1.5
                    } else if beta[1] == 0 {
                        0.5 * (2.0 * PI).powi(order as i32)
                    } else {
                        0.0
                    }
                }
                _ => {
                    if beta == [0, 0] {
                        1.0
                    } else {
                        0.0
                    }
                }
            };
            for (alpha, c) in &freq {
                out.push(Seminorm { alpha: *alpha, beta, bound: b_factor * c });
            }
        }
        out
    }

    /// `sup |xi|^{|alpha|} |d^alpha m|` for the frequency factor.
    fn multiplier_seminorms(&self) -> Vec<([u32; 2], f64)> {
        let n = self.dim();
        let riesz_k = match *self {
            Symbol::Riesz { sharpness } => Some(sharpness),
            Symbol::Modulated { dim: 2, .. } => Some(RIESZ_SHARPNESS),
            _ => None,
        };
        multi_indices(n, SYMBOL_ORDER)
            .into_iter()
            .map(|alpha| {
                let c = match riesz_k {
                    Some(k) => riesz_unit_sup(k, alpha),
                    None => {
                        if alpha == [0, 0] {
                            1.0
                        } else {
                            0.0
                        }
                    }
                };
                (alpha, c)
            })
            .collect()
    }
}

fn sign(t: f64) -> f64 {
    if t > 0.0 {
        1.0
    } else if t < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn riesz(k: f64, xi: &[f64]) -> f64 {
    let r = xi[0].hypot(xi[1]);
    if r == 0.0 {
        return 0.0;
    }
    (k * xi[0] / r).tanh() / k.tanh()
}

fn multi_indices(n: usize, order: u32) -> Vec<[u32; 2]> {
    let mut out = Vec::new();
    for a in 0..=order {
        if n == 1 {
            out.push([a, 0]);
            continue;
        }
        for b in 0..=(order - a) {
            out.push([a, b]);
        }
    }
    out
}

/// Sup over the unit circle of `|d^alpha s(xi_1/|xi|)|`, from closed-form
/// derivatives on a fine angular grid.
fn riesz_unit_sup(k: f64, alpha: [u32; 2]) -> f64 {
    let t = k.tanh();
    let s1 = |u: f64| k / (k * u).cosh().powi(2) / t;
    let s2 = |u: f64| -2.0 * k * k * (k * u).tanh() / (k * u).cosh().powi(2) / t;
    let steps = 1 << 16;
    let mut best = 0.0f64;
    for i in 0..steps {
        let th = 2.0 * PI * i as f64 / steps as f64;
        let (x, y) = (th.cos(), th.sin());
        let u = x;
        // Derivatives of u = x / r on r = 1.
        let du = [y * y, -x * y];
        let v = match alpha {
            [0, 0] => (k * u).tanh() / t,
            [1, 0] => s1(u) * du[0],
            [0, 1] => s1(u) * du[1],
            [2, 0] => s2(u) * du[0] * du[0] + s1(u) * (-3.0 * x * y * y),
            [1, 1] => s2(u) * du[0] * du[1] + s1(u) * y * (2.0 * x * x - y * y),
            [0, 2] => s2(u) * du[1] * du[1] + s1(u) * x * (2.0 * y * y - x * x),
            _ => unreachable!("order at most two"),
        };
        best = best.max(v.abs());
    }
    best
}

fn check_mean_zero(a: &Symbol, spec: &SpectralField) -> Result<()> {
    if a.is_singular() {
        let dc = spec.at([0, 0]).norm();
        let scale = spec.max_abs().max(f64::MIN_POSITIVE);
        if dc > 1e-12 * scale {
            return Err(Error::NotMeanZero);
        }
    }
    Ok(())
}

fn check_dim(a: &Symbol, grid: &GridSpec) -> Result<()> {
    if a.dim() != grid.dim() {
        return Err(Error::Dimension(grid.dim()));
    }
    Ok(())
}

/// `b(x) F^{-1}[w Ff]`, projected to mean zero when `b` is not constant.
fn separable(a: &Symbol, spec: &SpectralField, w: impl Fn(&[f64]) -> f64) -> Field {
    let grid = *spec.grid();
    let n = grid.dim();
    let mut out = spec
        .multiply(|k| Complex64::new(w(&grid.freq_value(k)[..n]), 0.0))
        .inverse_fourier();
    if !a.is_x_independent() {
        for (i, v) in out.values_mut().iter_mut().enumerate() {
            *v *= a.amplitude(&grid.position(i)[..n]);
        }
        out = out.mean_zero();
    }
    out
}

fn shifted(xi: &[f64], eta: &[f64]) -> [f64; 2] {
    let mut y = [0.0; 2];
    for j in 0..xi.len() {
        y[j] = xi[j] - eta.get(j).copied().unwrap_or(0.0);
    }
    y
}

/// `a(x, D - eta) f` on the lattice.
pub fn apply_symbol(a: &Symbol, f: &Field, eta: &[f64]) -> Result<Field> {
    check_dim(a, f.grid())?;
    let spec = f.fourier();
    check_mean_zero(a, &spec)?;
    Ok(apply_spectral(a, &spec, eta))
}

/// `a(x, D - eta)` applied to a spectrum (no mean-zero check).
pub fn apply_spectral(a: &Symbol, spec: &SpectralField, eta: &[f64]) -> Field {
    let n = spec.grid().dim();
    separable(a, spec, |xi| a.multiplier(&shifted(xi, eta)[..n]))
}

/// Reference path: `a(x, D - eta) f(x) = 2^{-pn} sum_xi a(x, xi - eta)
/// e^{2 pi i x.xi} Ff(xi)` summed directly for every `x`. Cost `N^{2n}`.
pub fn apply_symbol_generic(a: &Symbol, f: &Field, eta: &[f64]) -> Result<Field> {
    let grid = *f.grid();
    check_dim(a, &grid)?;
    let n = grid.dim();
    if grid.len() > GENERIC_CAP[n - 1] {
        return Err(Error::InvalidArgument(format!(
            "generic quadrature capped at {} samples",
            GENERIC_CAP[n - 1]
        )));
    }
    let spec = f.fourier();
    check_mean_zero(a, &spec)?;
    let per_axis = grid.samples_per_axis() as i64;
    let twiddle: Vec<Complex64> = (0..per_axis)
        .map(|m| Complex64::from_polar(1.0, 2.0 * PI * m as f64 / per_axis as f64))
        .collect();
    let modes: Vec<(Lattice, [f64; 2], Complex64)> = (0..grid.len())
        .map(|i| {
            let k = grid.freq_point(i);
            (k, shifted(&grid.freq_value(k)[..n], eta), spec.values()[i])
        })
        .collect();
    let weight = grid.freq_cell_volume();
    let values: Vec<Complex64> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let s = grid.unflat(i);
            let x = grid.position(i);
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, xi, c) in &modes {
                let phase = (k[0] * s[0] as i64 + k[1] * s[1] as i64).rem_euclid(per_axis);
                acc += c * twiddle[phase as usize] * a.eval(&x[..n], &xi[..n]);
            }
            acc * weight
        })
        .collect();
    let out = Field::new(grid, values)?;
    Ok(if a.is_x_independent() { out } else { out.mean_zero() })
}

/// Scales `j` whose piece `Psi(2^-j xi)` is not identically zero on the
/// nonzero in-band lattice.
pub fn lp_range(grid: &GridSpec) -> (i32, i32) {
    (-grid.box_exponent() - 3, grid.resolution_exponent() + 3)
}

fn check_lp(grid: &GridSpec, j: i32) -> Result<()> {
    let (lo, hi) = lp_range(grid);
    if j < lo || j > hi {
        return Err(Error::DilationOverflow(j));
    }
    Ok(())
}

/// `a_j(x, D) f` with symbol `a(x, xi) Psi(2^-j xi)`.
pub fn apply_lp_piece(a: &Symbol, f: &Field, j: i32) -> Result<Field> {
    check_dim(a, f.grid())?;
    check_lp(f.grid(), j)?;
    let spec = f.fourier();
    check_mean_zero(a, &spec)?;
    let s = pow2(-j);
    Ok(separable(a, &spec, |xi| {
        let y: Vec<f64> = xi.iter().map(|t| t * s).collect();
        a.multiplier(xi) * psi_hat(&y)
    }))
}

/// `z -> k_j(x, z) = int a(x, xi) Psi(2^-j xi) e^{2 pi i xi.z} dxi` at a
/// spatial lattice point `x`.
pub fn compute_kernel_piece(a: &Symbol, grid: &GridSpec, j: i32, x: Lattice) -> Result<Field> {
    check_dim(a, grid)?;
    check_lp(grid, j)?;
    let n = grid.dim();
    let s = pow2(-j);
    let b = a.amplitude(&grid.position(grid.spatial_index(x))[..n]);
    let spec = SpectralField::from_fn(*grid, |k| {
        let xi = grid.freq_value(k);
        let y: Vec<f64> = xi[..n].iter().map(|t| t * s).collect();
        Complex64::new(b * a.multiplier(&xi[..n]) * psi_hat(&y), 0.0)
    });
    Ok(spec.inverse_fourier())
}

/// `sum_j k_j(x, .)` over the whole representable range, which telescopes to
/// the inverse transform of `a(x, .)` with the DC term removed.
pub fn summed_kernel(a: &Symbol, grid: &GridSpec, x: Lattice) -> Result<Field> {
    check_dim(a, grid)?;
    let n = grid.dim();
    let b = a.amplitude(&grid.position(grid.spatial_index(x))[..n]);
    let spec = SpectralField::from_fn(*grid, |k| {
        if k == [0, 0] {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::new(b * a.multiplier(&grid.freq_value(k)[..n]), 0.0)
    });
    Ok(spec.inverse_fourier())
}

/// Fitted decay constants for one `L`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayFit {
    pub power: u32,
    /// `(j, C_L(j))`.
    pub constants: Vec<(i32, f64)>,
    pub spread: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelDecayReport {
    pub symbol: String,
    pub reach: f64,
    pub fits: Vec<DecayFit>,
    /// `(j, max_z |k_j| / 2^{jn})`.
    pub near_field: Vec<(i32, f64)>,
    /// `max_{0 < |z| <= 2^{p-2}} |K(z)| |z|^n` for the summed kernel.
    pub summed_constant: f64,
}

/// Fits `C_L(j) = max |k_j(0, z)| / min(2^{jn}, 2^{j(n-2L)} |z|^{-2L})` over
/// lattice probes `|z| <= reach 2^-j`, so every scale sees the same part of
/// its dilated profile.
pub fn verify_kernel_decay(
    a: &Symbol,
    grid: &GridSpec,
    js: impl IntoIterator<Item = i32>,
    powers: &[u32],
    reach: f64,
) -> Result<KernelDecayReport> {
    let n = grid.dim() as i32;
    let p = grid.box_exponent();
    let wrap_clean = pow2(p - 2);
    let origin = [0.0; 2];
    let mut fits: Vec<DecayFit> = powers
        .iter()
        .map(|&l| DecayFit { power: l, constants: Vec::new(), spread: 0.0 })
        .collect();
    let mut near_field = Vec::new();
    for j in js {
        let radius = reach * pow2(-j);
        if radius > wrap_clean {
            return Err(Error::InvalidArgument(format!(
                "probe radius {radius} exceeds 2^(p-2) at j = {j}"
            )));
        }
        let k = compute_kernel_piece(a, grid, j, [0, 0])?;
        let scale = pow2(j * n);
        let mut best = vec![0.0f64; powers.len()];
        let mut near = 0.0f64;
        for (i, v) in k.values().iter().enumerate() {
            let r = grid.torus_distance(&grid.position(i), &origin);
            let mag = v.norm();
            near = near.max(mag / scale);
            if r > radius {
                continue;
            }
            let y = pow2(j) * r;
            for (b, &l) in best.iter_mut().zip(powers) {
                let env = scale * (1.0f64).min(y.powi(-2 * l as i32));
                *b = b.max(mag / env);
            }
        }
        for (fit, b) in fits.iter_mut().zip(best) {
            fit.constants.push((j, b));
        }
        near_field.push((j, near));
    }
    for fit in &mut fits {
        let hi = fit.constants.iter().map(|c| c.1).fold(0.0, f64::max);
        let lo = fit.constants.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
        fit.spread = hi / lo;
    }
    let kernel = summed_kernel(a, grid, [0, 0])?;
    let mut summed_constant = 0.0f64;
    for (i, v) in kernel.values().iter().enumerate() {
        let r = grid.torus_distance(&grid.position(i), &origin);
        if r > 0.0 && r <= wrap_clean {
            summed_constant = summed_constant.max(v.norm() * r.powi(n));
        }
    }
    Ok(KernelDecayReport { symbol: a.name().into(), reach, fits, near_field, summed_constant })
}

/// `a_{eta,tau,l}(x, xi) = a(x, xi - eta) Phi((xi - tau) / (6 l))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowedSymbol {
    pub base: Symbol,
    pub shift: [f64; 2],
    pub center: [f64; 2],
    pub scale: f64,
}

impl WindowedSymbol {
    pub fn new(base: Symbol, shift: &[f64], center: &[f64], scale: f64) -> Result<Self> {
        let n = base.dim();
        if shift.len() != n || center.len() != n {
            return Err(Error::Dimension(shift.len()));
        }
        if !(scale > 0.0) {
            return Err(Error::InvalidArgument("window scale must be positive".into()));
        }
        let mut s = [0.0; 2];
        let mut c = [0.0; 2];
        s[..n].copy_from_slice(shift);
        c[..n].copy_from_slice(center);
        Ok(Self { base, shift: s, center: c, scale })
    }

    /// `a_{s,eta} = a_{eta, c(omega_s), l(omega_s)}`.
    pub fn for_tile(base: Symbol, tile: &Tile, shift: &[f64]) -> Result<Self> {
        let w = tile.frequency();
        Self::new(base, shift, &w.center()[..w.dim()], w.side_length())
    }

    pub fn window(&self, xi: &[f64]) -> f64 {
        let y: Vec<f64> =
            xi.iter().zip(&self.center).map(|(x, c)| (x - c) / (6.0 * self.scale)).collect();
        phi_hat(&y)
    }

    pub fn eval(&self, x: &[f64], xi: &[f64]) -> f64 {
        let n = xi.len();
        self.base.eval(x, &shifted(xi, &self.shift)[..n]) * self.window(xi)
    }
}

/// `a_{eta,tau,l}(x, D) f`.
pub fn apply_windowed(w: &WindowedSymbol, f: &Field) -> Result<Field> {
    let grid = *f.grid();
    check_dim(&w.base, &grid)?;
    if 6.0 * w.scale * PLATEAU < grid.freq_spacing() {
        return Err(Error::InvalidArgument("window narrower than the frequency lattice".into()));
    }
    let spec = f.fourier();
    check_mean_zero(&w.base, &spec)?;
    Ok(apply_windowed_spectral(w, &spec))
}

pub(crate) fn apply_windowed_spectral(w: &WindowedSymbol, spec: &SpectralField) -> Field {
    let n = spec.grid().dim();
    separable(&w.base, spec, |xi| w.base.multiplier(&shifted(xi, &w.shift)[..n]) * w.window(xi))
}

/// `psi_s^xi = a(x, D - xi) phi_s`.
pub fn apply_packet_symbol(a: &Symbol, packet: &WavePacket, xi: &[f64]) -> Result<Field> {
    check_dim(a, packet.grid())?;
    Ok(apply_spectral(a, &packet.spectral(), xi))
}

/// `C_L = max_x |psi_s^xi(x)| |I_s|^{1/2} (1 + |x - c(I_s)| / l(I_s))^L` for
/// each requested `L`.
pub fn packet_decay(
    a: &Symbol,
    packet: &WavePacket,
    xi: &[f64],
    powers: &[u32],
) -> Result<Vec<(u32, f64)>> {
    let psi = apply_packet_symbol(a, packet, xi)?;
    Ok(powers.iter().map(|&l| (l, packet.decay_constant(&psi, l as i32))).collect())
}

/// Dyadic truncation radii `h, 2h, ..., 2^{p-2}`.
pub fn truncation_radii(grid: &GridSpec) -> Vec<f64> {
    let top = grid.box_exponent() + grid.resolution_exponent() - 2;
    (0..=top.max(0)).map(|i| grid.spacing() * pow2(i)).collect()
}

/// `x -> sup_eps |a(x, D)[chi_{torus \ Q(x, eps)} f](x)|` over dyadic radii,
/// with `Q(x, eps) = {z : |x - z|_inf < eps}` cut exactly at cell centers and
/// the summed kernel `K(x, x - z)`.
pub fn truncated_maximal(a: &Symbol, f: &Field) -> Result<Field> {
    truncated_maximal_shifted(a, f, &[0.0, 0.0])
}

/// As [`truncated_maximal`] for `a(x, D - eta)`.
pub fn truncated_maximal_shifted(a: &Symbol, f: &Field, eta: &[f64]) -> Result<Field> {
    let grid = *f.grid();
    check_dim(a, &grid)?;
    let spec = f.fourier();
    check_mean_zero(a, &spec)?;
    truncated_from_spectrum(a, &spec, eta)
}

pub(crate) fn truncated_from_spectrum(a: &Symbol, spec: &SpectralField, eta: &[f64]) -> Result<Field> {
    let grid = *spec.grid();
    let n = grid.dim();
    // x-independent part of the kernel, for the shifted symbol.
    let kernel = SpectralField::from_fn(grid, |k| {
        let xi = grid.freq_value(k);
        let y = shifted(&xi[..n], eta);
        if a.is_singular() && y[..n].iter().all(|&t| t == 0.0) {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::new(a.multiplier(&y[..n]), 0.0)
    })
    .inverse_fourier();
    let origin = [0.0; 2];
    let dist: Vec<f64> =
        (0..grid.len()).map(|i| grid.torus_sup_distance(&grid.position(i), &origin)).collect();
    let mut best = vec![0.0f64; grid.len()];
    for eps in truncation_radii(&grid) {
        let mut cut = kernel.clone();
        for (v, &d) in cut.values_mut().iter_mut().zip(&dist) {
            if d < eps {
                *v = Complex64::new(0.0, 0.0);
            }
        }
        let conv = SpectralField::new(
            grid,
            cut.fourier().values().iter().zip(spec.values()).map(|(a, b)| a * b).collect(),
        )?
        .inverse_fourier();
        for (i, (b, v)) in best.iter_mut().zip(conv.values()).enumerate() {
            *b = b.max(v.norm() * a.amplitude(&grid.position(i)[..n]).abs());
        }
    }
    Field::new(grid, best.into_iter().map(|v| Complex64::new(v, 0.0)).collect())
}

/// `g(x) = max_xi |M_{-xi} a(x, D) M_xi f(x)| = max_xi |a(x, D + xi) f(x)|`
/// over the given frequency lattice points (all in-band points when `None`).
pub fn modulated_maximal(a: &Symbol, f: &Field, shifts: Option<&[Lattice]>) -> Result<Field> {
    let grid = *f.grid();
    check_dim(a, &grid)?;
    let n = grid.dim();
    let spec = f.fourier();
    check_mean_zero(a, &spec)?;
    let all: Vec<Lattice>;
    let shifts = match shifts {
        Some(s) => s,
        None => {
            all = (0..grid.len()).map(|i| grid.freq_point(i)).collect();
            &all
        }
    };
    let mut best = vec![0.0f64; grid.len()];
    let mut last: Option<Vec<f64>> = None;
    for &k in shifts {
        let xi = grid.freq_value(k);
        let eta: Vec<f64> = xi[..n].iter().map(|t| -t).collect();
        // Skip shifts whose multiplier pattern on the spectrum repeats.
        let pattern: Vec<f64> = (0..grid.len())
            .map(|i| {
                if spec.values()[i].norm() == 0.0 {
                    0.0
                } else {
                    a.multiplier(&shifted(&grid.freq_value(grid.freq_point(i))[..n], &eta)[..n])
                }
            })
            .collect();
        if last.as_ref() == Some(&pattern) {
            continue;
        }
        let g = apply_spectral(a, &spec, &eta);
        for (b, v) in best.iter_mut().zip(g.values()) {
            *b = b.max(v.norm());
        }
        last = Some(pattern);
    }
    Field::new(grid, best.into_iter().map(|v| Complex64::new(v, 0.0)).collect())
}

/// One row of the seminorm audit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeminormCheck {
    pub alpha: [u32; 2],
    pub beta: [u32; 2],
    pub declared: f64,
    pub observed: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeminormAudit {
    pub symbol: String,
    pub samples: usize,
    pub checks: Vec<SeminormCheck>,
    /// `max |a(x, 2 xi) - a(x, xi)|` over the samples.
    pub homogeneity_defect: f64,
}

impl SeminormAudit {
    /// Every observed value within `1.05` of its declared bound.
    pub fn passes(&self) -> bool {
        self.checks.iter().all(|c| c.observed <= 1.05 * c.declared + 1e-9)
    }
}

/// Samples `|xi|^{|alpha|-|beta|} |d^alpha_xi d^beta_x a|` by nested central
/// differences at log-spaced `|xi| in [2^-p, 2^10]`, random directions and
/// random `x`.
pub fn audit_seminorms(a: &Symbol, grid: &GridSpec, samples: usize, seed: u64) -> SeminormAudit {
    let n = a.dim();
    let p = grid.box_exponent();
    let mut rng = trial_rng(seed, 0);
    let table = a.seminorms();
    let mut checks: Vec<SeminormCheck> = table
        .iter()
        .map(|s| SeminormCheck { alpha: s.alpha, beta: s.beta, declared: s.bound, observed: 0.0 })
        .collect();
    let mut homogeneity_defect = 0.0f64;
    let lo = -(p as f64);
    let hi = 10.0;
    for i in 0..samples {
        let t = if samples > 1 { i as f64 / (samples - 1) as f64 } else { 0.0 };
        let r = 2f64.powf(lo + (hi - lo) * t);
        let xi: Vec<f64> = if n == 1 {
            vec![if rng.random::<bool>() { r } else { -r }]
        } else {
            let th = rng.random::<f64>() * 2.0 * PI;
            vec![r * th.cos(), r * th.sin()]
        };
        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * pow2(p)).collect();
        let doubled: Vec<f64> = xi.iter().map(|v| 2.0 * v).collect();
        homogeneity_defect = homogeneity_defect.max((a.eval(&x, &doubled) - a.eval(&x, &xi)).abs());
        // Coordinates: x_0..x_{n-1}, xi_0..xi_{n-1}.
        let mut point = x.clone();
        point.extend_from_slice(&xi);
        let dx = 1e-2 * pow2(p) / (2.0 * PI);
        let dxi = 1e-2 * r;
        for c in checks.iter_mut() {
            let mut axes = Vec::new();
            for j in 0..n {
                axes.extend(std::iter::repeat_n((j, dx), c.beta[j] as usize));
                axes.extend(std::iter::repeat_n((n + j, dxi), c.alpha[j] as usize));
            }
            let eval = |pt: &[f64]| a.eval(&pt[..n], &pt[n..]);
            let d = nested_difference(&eval, &mut point.clone(), &axes);
            let ord_a = (c.alpha[0] + c.alpha[1]) as i32;
            let ord_b = (c.beta[0] + c.beta[1]) as i32;
            c.observed = c.observed.max(r.powi(ord_a - ord_b) * d.abs());
        }
    }
    SeminormAudit { symbol: a.name().into(), samples, checks, homogeneity_defect }
}

fn nested_difference(f: &dyn Fn(&[f64]) -> f64, pt: &mut Vec<f64>, axes: &[(usize, f64)]) -> f64 {
    let Some((&(c, h), rest)) = axes.split_first() else {
        return f(pt);
    };
    let base = pt[c];
    pt[c] = base + h;
    let plus = nested_difference(f, pt, rest);
    pt[c] = base - h;
    let minus = nested_difference(f, pt, rest);
    pt[c] = base;
    (plus - minus) / (2.0 * h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_field, Envelope};

    fn grid1() -> GridSpec {
        GridSpec::new(1, 4, 4).unwrap()
    }

    #[test]
    fn identity_symbol_is_the_identity() {
        let g = grid1();
        let f = random_field(&g, Envelope::default(), 1, 0);
        let a = Symbol::Identity { dim: 1 };
        let out = apply_symbol(&a, &f, &[0.0]).unwrap();
        assert!(out.sub(&f).unwrap().l2_norm() < 1e-12 * f.l2_norm());
    }

    #[test]
    fn fast_and_generic_paths_agree() {
        let g = grid1();
        let f = random_field(&g, Envelope::default(), 2, 0);
        for a in [Symbol::Sign, Symbol::Modulated { dim: 1, box_exponent: 4 }] {
            for eta in [0.0, 0.3125, -1.7] {
                let fast = apply_symbol(&a, &f, &[eta]).unwrap();
                let slow = apply_symbol_generic(&a, &f, &[eta]).unwrap();
                let err = fast.sub(&slow).unwrap().l2_norm() / f.l2_norm();
                assert!(err < 1e-10, "{a:?} eta={eta}: {err}");
            }
        }
        let g2 = GridSpec::new(2, 2, 3).unwrap();
        let f = random_field(&g2, Envelope { width: 2.0 }, 3, 0);
        let a = Symbol::Modulated { dim: 2, box_exponent: 2 };
        let fast = apply_symbol(&a, &f, &[0.25, -0.5]).unwrap();
        let slow = apply_symbol_generic(&a, &f, &[0.25, -0.5]).unwrap();
        assert!(fast.sub(&slow).unwrap().l2_norm() < 1e-10 * f.l2_norm());
    }

    #[test]
    fn singular_symbols_reject_non_mean_zero_fields() {
        let g = grid1();
        let f = Field::from_fn(g, |_| Complex64::new(1.0, 0.0));
        assert_eq!(apply_symbol(&Symbol::Sign, &f, &[0.0]).unwrap_err(), Error::NotMeanZero);
        assert!(apply_symbol(&Symbol::Identity { dim: 1 }, &f, &[0.0]).is_ok());
    }

    #[test]
    fn lp_pieces_telescope() {
        let g = GridSpec::new(1, 3, 5).unwrap();
        let f = random_field(&g, Envelope { width: 6.0 }, 4, 0);
        for a in [Symbol::Sign, Symbol::Identity { dim: 1 }] {
            let (lo, hi) = lp_range(&g);
            let mut sum = Field::zeros(g);
            for j in lo..=hi {
                sum = sum.add(&apply_lp_piece(&a, &f, j).unwrap()).unwrap();
            }
            let full = apply_symbol(&a, &f, &[0.0]).unwrap();
            assert!(sum.sub(&full).unwrap().l2_norm() < 1e-8 * f.l2_norm());
        }
        assert!(apply_lp_piece(&Symbol::Sign, &f, lp_range(&g).1 + 1).is_err());
    }

    #[test]
    fn kernel_piece_at_origin_is_half_the_bump_mass() {
        let g = GridSpec::new(1, 8, 4).unwrap();
        for j in [-2, 0, 2] {
            let k = compute_kernel_piece(&Symbol::Identity { dim: 1 }, &g, j, [0, 0]).unwrap();
            let v = k.values()[0].re / pow2(j);
            assert!((0.09..=0.10).contains(&v), "j={j}: {v}");
            // The piece vanishes at the origin of frequency, so has zero mean.
            let mean: Complex64 = k.values().iter().sum();
            assert!(mean.norm() * g.cell_volume() < 1e-12);
        }
    }

    #[test]
    fn declared_seminorms_hold_on_samples() {
        let g = GridSpec::new(2, 4, 4).unwrap();
        for a in [
            Symbol::Riesz { sharpness: RIESZ_SHARPNESS },
            Symbol::Modulated { dim: 2, box_exponent: 4 },
            Symbol::Identity { dim: 2 },
        ] {
            let audit = audit_seminorms(&a, &g, 300, 5);
            assert!(audit.passes(), "{audit:#?}");
            assert!(audit.homogeneity_defect < 1e-12);
        }
        let g1 = GridSpec::new(1, 4, 4).unwrap();
        for a in [Symbol::Sign, Symbol::Modulated { dim: 1, box_exponent: 4 }] {
            let audit = audit_seminorms(&a, &g1, 300, 6);
            assert!(audit.passes(), "{audit:#?}");
        }
    }

    #[test]
    fn windowed_symbol_covering_the_band_is_the_base() {
        let g = GridSpec::new(1, 3, 2).unwrap();
        let f = random_field(&g, Envelope { width: 0.5 }, 7, 0);
        let w = WindowedSymbol::new(Symbol::Identity { dim: 1 }, &[0.0], &[0.0], 4.0).unwrap();
        let out = apply_windowed(&w, &f).unwrap();
        assert!(out.sub(&f).unwrap().l2_norm() < 1e-12 * f.l2_norm());
        let g = GridSpec::new(1, 6, 2).unwrap();
        let far = WindowedSymbol::new(Symbol::Identity { dim: 1 }, &[0.0], &[1.5], 0.1).unwrap();
        let spec = SpectralField::from_fn(g, |k| {
            if k[0].abs() <= 2 && k[0] != 0 { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) }
        });
        let f = spec.inverse_fourier();
        assert!(apply_windowed(&far, &f).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn truncated_maximal_of_zero_is_zero() {
        let g = grid1();
        let out = truncated_maximal(&Symbol::Sign, &Field::zeros(g)).unwrap();
        assert_eq!(out.max_abs(), 0.0);
    }

    #[test]
    fn modulated_maximal_of_identity_is_abs() {
        let g = grid1();
        let f = random_field(&g, Envelope::default(), 8, 0);
        let out = modulated_maximal(&Symbol::Identity { dim: 1 }, &f, None).unwrap();
        let diff = out.sub(&f.abs()).unwrap().max_abs();
        assert!(diff < 1e-12, "{diff}");
    }
}
