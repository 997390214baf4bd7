//! Complex fields on the periodic grid and their Fourier transforms.
//!
//! Conventions: `Ff(xi) = h^n sum_x f(x) e^{-2 pi i x.xi}` and
//! `f(x) = 2^{-pn} sum_xi Ff(xi) e^{2 pi i x.xi}`.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, Lattice};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Unnormalized in-place DFT over every axis of the grid.
pub(crate) fn fft_in_place(grid: &GridSpec, data: &mut [Complex64], direction: FftDirection) {
    let n = grid.samples_per_axis();
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft(n, direction));
    match grid.dim() {
        1 => fft.process(data),
        _ => {
            // Rows are contiguous; transpose for the columns.
            fft.process(data);
            let mut t = vec![Complex64::new(0.0, 0.0); n * n];
            transpose(data, &mut t, n);
            fft.process(&mut t);
            transpose(&t, data, n);
        }
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    const B: usize = 32;
    for ib in (0..n).step_by(B) {
        for jb in (0..n).step_by(B) {
            for i in ib..(ib + B).min(n) {
                for j in jb..(jb + B).min(n) {
                    dst[j * n + i] = src[i * n + j];
                }
            }
        }
    }
}

fn check_grid(a: &GridSpec, b: &GridSpec) -> Result<()> {
    if a != b {
        return Err(Error::GridMismatch(format!("{a:?} vs {b:?}")));
    }
    Ok(())
}

/// A complex function sampled on the spatial lattice (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: GridSpec,
    values: Vec<Complex64>,
}

/// Fourier coefficients on the frequency lattice, in FFT slot order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: GridSpec,
    values: Vec<Complex64>,
}

impl Field {
    pub fn new(grid: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Grid(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, values: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    /// Samples `f` at every spatial lattice point.
    pub fn from_fn(grid: GridSpec, mut f: impl FnMut([f64; 2]) -> Complex64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.position(i))).collect();
        Self { grid, values }
    }

    /// The indicator of a set of flat indices.
    pub fn indicator(grid: GridSpec, cells: impl IntoIterator<Item = usize>) -> Self {
        let mut out = Self::zeros(grid);
        for c in cells {
            out.values[c] = Complex64::new(1.0, 0.0);
        }
        out
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn fourier(&self) -> SpectralField {
        let mut data = self.values.clone();
        fft_in_place(&self.grid, &mut data, FftDirection::Forward);
        let w = self.grid.cell_volume();
        for v in &mut data {
            *v *= w;
        }
        SpectralField { grid: self.grid, values: data }
    }

    /// `T_a f = f(. - a)` for a spatial lattice point `a` (in samples).
    pub fn translate(&self, a: Lattice) -> Field {
        let mut out = Self::zeros(self.grid);
        for (i, v) in out.values.iter_mut().enumerate() {
            let s = self.grid.unflat(i);
            let src = [s[0] as i64 - a[0], s[1] as i64 - a[1]];
            *v = self.values[self.grid.spatial_index(src)];
        }
        out
    }

    /// `M_xi f = e^{2 pi i xi.x} f` for a frequency lattice point (integers).
    pub fn modulate(&self, k: Lattice) -> Field {
        let n = self.grid.samples_per_axis() as i64;
        let mut out = self.clone();
        for (i, v) in out.values.iter_mut().enumerate() {
            let s = self.grid.unflat(i);
            let phase = ((k[0] * s[0] as i64).rem_euclid(n) + (k[1] * s[1] as i64).rem_euclid(n))
                .rem_euclid(n);
            *v *= Complex64::from_polar(1.0, 2.0 * PI * phase as f64 / n as f64);
        }
        out
    }

    /// `D_{2^k} f = 2^{-kn/2} f(2^{-k} .)`, reading the torus as the centered
    /// box `[-L/2, L/2)^n`.
    ///
    /// For `k >= 0` the dilate is computed spectrally by subsampling the
    /// spectrum, which is exact when `f` lives in `[-L/2^{k+1}, L/2^{k+1})^n`.
    /// For `k < 0` it is computed by spatial subsampling and cut off outside
    /// the shrunken box, which is exact on the lattice.
    pub fn dilate(&self, k: i32) -> Result<Field> {
        let span = self.grid.box_exponent() + self.grid.resolution_exponent();
        if k.abs() > span {
            return Err(Error::DilationOverflow(k));
        }
        if k == 0 {
            return Ok(self.clone());
        }
        let n = self.grid.dim() as i32;
        if k > 0 {
            let spec = self.fourier();
            let amp = 2f64.powf(k as f64 * n as f64 / 2.0);
            let out = SpectralField::from_fn(self.grid, |m| {
                let src = [m[0] << k, m[1] << k];
                if (0..self.grid.dim()).all(|j| self.grid.freq_in_band(src[j])) {
                    spec.at(src) * amp
                } else {
                    Complex64::new(0.0, 0.0)
                }
            });
            Ok(out.inverse_fourier())
        } else {
            let f = 1i64 << (-k);
            let half = (self.grid.samples_per_axis() / 2) as i64;
            let amp = 2f64.powf(-k as f64 * n as f64 / 2.0);
            let mut out = Self::zeros(self.grid);
            for (i, v) in out.values.iter_mut().enumerate() {
                let s = self.grid.unflat(i);
                let c = [signed(s[0] as i64, half), signed(s[1] as i64, half)];
                if (0..self.grid.dim()).all(|j| c[j] * f >= -half && c[j] * f < half) {
                    *v = self.values[self.grid.spatial_index([c[0] * f, c[1] * f])] * amp;
                }
            }
            Ok(out)
        }
    }

    /// `<f, g> = int f conj(g)`.
    pub fn inner(&self, other: &Field) -> Result<Complex64> {
        check_grid(&self.grid, &other.grid)?;
        let s: Complex64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b.conj()).sum();
        Ok(s * self.grid.cell_volume())
    }

    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        if !(p >= 1.0) {
            return Err(Error::InvalidArgument(format!("L^p exponent {p} < 1")));
        }
        if p.is_infinite() {
            return Ok(self.max_abs());
        }
        let s: f64 = self.values.iter().map(|v| v.norm().powf(p)).sum();
        Ok((s * self.grid.cell_volume()).powf(1.0 / p))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `sup_E |E|^{-1/2} int_E |f|`, exact over unions of cells.
    pub fn weak_l2_norm(&self) -> f64 {
        let mut mags: Vec<f64> = self.values.iter().map(|v| v.norm()).collect();
        mags.sort_by(|a, b| b.total_cmp(a));
        prefix_sup(&mags, self.grid.cell_volume())
    }

    /// Lower bound for `sup_E |E|^{-1/2} |int_E f|`: for each of a set of
    /// reference phases, cells are ranked by their component along that phase
    /// and the best prefix is kept.
    pub fn dual_weak_l2(&self) -> f64 {
        let w = self.grid.cell_volume();
        let mut best = 0.0f64;
        for r in 0..64 {
            let dir = Complex64::from_polar(1.0, 2.0 * PI * r as f64 / 64.0);
            let mut proj: Vec<Complex64> = self.values.clone();
            proj.sort_by(|a, b| (b * dir.conj()).re.total_cmp(&(a * dir.conj()).re));
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, v) in proj.iter().enumerate() {
                acc += v;
                let vol = (k + 1) as f64 * w;
                best = best.max(acc.norm() * w / vol.sqrt());
            }
        }
        best
    }

    /// Zeroes the DC Fourier coefficient.
    pub fn mean_zero(&self) -> Field {
        let mean: Complex64 = self.values.iter().sum::<Complex64>() / self.values.len() as f64;
        let mut out = self.clone();
        for v in &mut out.values {
            *v -= mean;
        }
        out
    }

    pub fn is_mean_zero(&self) -> bool {
        let s: Complex64 = self.values.iter().sum();
        s.norm() <= self.values.len() as f64 * 1e-12 * self.max_abs().max(f64::MIN_POSITIVE)
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        check_grid(&self.grid, &other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(Field { grid: self.grid, values })
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        check_grid(&self.grid, &other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Field { grid: self.grid, values })
    }

    pub fn scale(&self, c: Complex64) -> Field {
        Field { grid: self.grid, values: self.values.iter().map(|v| v * c).collect() }
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Field) -> Result<Field> {
        check_grid(&self.grid, &other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect();
        Ok(Field { grid: self.grid, values })
    }

    /// `|f|` as a real field.
    pub fn abs(&self) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|v| Complex64::new(v.norm(), 0.0)).collect(),
        }
    }

    /// Binary container: three little-endian `i32` (`n`, `p`, `q`) followed by
    /// row-major `f32` real/imaginary pairs.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for h in [
            self.grid.dim() as i32,
            self.grid.box_exponent(),
            self.grid.resolution_exponent(),
        ] {
            w.write_all(&h.to_le_bytes())?;
        }
        for v in &self.values {
            w.write_all(&(v.re as f32).to_le_bytes())?;
            w.write_all(&(v.im as f32).to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Field> {
        let mut r = BufReader::new(File::open(path)?);
        let mut word = [0u8; 4];
        let mut header = [0i32; 3];
        for h in &mut header {
            r.read_exact(&mut word)?;
            *h = i32::from_le_bytes(word);
        }
        let grid = GridSpec::new(header[0].max(0) as usize, header[1], header[2])?;
        let mut values = Vec::with_capacity(grid.len());
        for _ in 0..grid.len() {
            r.read_exact(&mut word)?;
            let re = f32::from_le_bytes(word) as f64;
            r.read_exact(&mut word)?;
            let im = f32::from_le_bytes(word) as f64;
            values.push(Complex64::new(re, im));
        }
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(Error::Io(format!("{} trailing bytes", rest.len())));
        }
        Field::new(grid, values)
    }

    /// CSV with columns `index,re,im`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "index,re,im")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{i},{:e},{:e}", v.re, v.im)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn signed(s: i64, half: i64) -> i64 {
    if s >= half {
        s - 2 * half
    } else {
        s
    }
}

/// `max_k (w sum_{top k} a) / sqrt(k w)` for a descending sequence.
pub(crate) fn prefix_sup(desc: &[f64], w: f64) -> f64 {
    let mut acc = 0.0;
    let mut best = 0.0f64;
    for (k, &a) in desc.iter().enumerate() {
        acc += a;
        best = best.max(acc * w / ((k + 1) as f64 * w).sqrt());
    }
    best
}

impl SpectralField {
    pub fn new(grid: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Grid(format!(
                "expected {} coefficients, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, values: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    /// Evaluates `f` at every frequency integer point `k` (value `k 2^-p`).
    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(Lattice) -> Complex64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.freq_point(i))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    /// Coefficient at a frequency integer point (wrapped into the band).
    pub fn at(&self, k: Lattice) -> Complex64 {
        self.values[self.grid.freq_index(k)]
    }

    pub fn inverse_fourier(&self) -> Field {
        let mut data = self.values.clone();
        fft_in_place(&self.grid, &mut data, FftDirection::Inverse);
        let w = self.grid.freq_cell_volume();
        for v in &mut data {
            *v *= w;
        }
        Field { grid: self.grid, values: data }
    }

    /// `(T_k F)(xi) = F(xi - k)` on the frequency lattice.
    pub fn translate(&self, k: Lattice) -> SpectralField {
        SpectralField::from_fn(self.grid, |m| self.at([m[0] - k[0], m[1] - k[1]]))
    }

    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.freq_cell_volume())
            .sqrt()
    }

    /// Multiplies each coefficient by `m(k)`.
    pub fn multiply(&self, m: impl Fn(Lattice) -> Complex64) -> SpectralField {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| v * m(self.grid.freq_point(i)))
            .collect();
        SpectralField { grid: self.grid, values }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn single_character_transforms_to_a_spike() {
        let g = GridSpec::new(1, 0, 5).unwrap();
        let f = Field::from_fn(g, |x| Complex64::from_polar(1.0, 2.0 * PI * 3.0 * x[0]));
        let s = f.fourier();
        for i in 0..g.len() {
            let k = g.freq_point(i);
            let want = if k[0] == 3 { 1.0 } else { 0.0 };
            assert!((s.values()[i] - c(want)).norm() < 1e-12);
        }
    }

    #[test]
    fn spike_weight_is_torus_volume() {
        let g = GridSpec::new(2, 1, 3).unwrap();
        let f = Field::from_fn(g, |x| Complex64::from_polar(1.0, PI * (x[0] - 2.0 * x[1])));
        let s = f.fourier();
        assert!((s.at([1, -2]) - c(4.0)).norm() < 1e-12);
    }

    #[test]
    fn round_trip_and_plancherel_2d() {
        let g = GridSpec::new(2, 1, 3).unwrap();
        let f = Field::from_fn(g, |x| Complex64::new((x[0] * 3.1).sin(), x[1].cos() * x[0]));
        let back = f.fourier().inverse_fourier();
        assert!(back.sub(&f).unwrap().l2_norm() <= 1e-12 * f.l2_norm());
        assert!((f.fourier().l2_norm() - f.l2_norm()).abs() <= 1e-12 * f.l2_norm());
    }

    #[test]
    fn dilation_round_trip_on_confined_band_limited_field() {
        let g = GridSpec::new(1, 3, 4).unwrap();
        let f = Field::from_fn(g, |x| {
            let y = crate::grid::wrap_delta(x[0], 8.0);
            c((-y * y / (2.0 * 0.15 * 0.15)).exp())
        });
        assert_eq!(f.dilate(0).unwrap(), f);
        let d = f.dilate(2).unwrap();
        assert!((d.l2_norm() - f.l2_norm()).abs() < 1e-8 * f.l2_norm());
        let back = d.dilate(-2).unwrap();
        assert!(back.sub(&f).unwrap().l2_norm() < 1e-8 * f.l2_norm());
        assert!(f.dilate(40).is_err());
    }

    #[test]
    fn weak_norm_of_unit_interval() {
        let g = GridSpec::new(1, 2, 4).unwrap();
        let f = Field::from_fn(g, |x| c(if x[0] < 1.0 { 1.0 } else { 0.0 }));
        assert!((f.weak_l2_norm() - 1.0).abs() < 1e-12);
        assert!((f.lp_norm(3.0).unwrap() - 1.0).abs() < 1e-12);
        let single = Field::indicator(g, [5]).scale(c(-2.0));
        assert!((single.weak_l2_norm() - 2.0 * g.spacing().sqrt()).abs() < 1e-12);
    }

    #[test]
    fn binary_round_trip() {
        let g = GridSpec::new(2, 0, 3).unwrap();
        let f = Field::from_fn(g, |x| Complex64::new(x[0], -x[1]));
        let dir = std::env::temp_dir().join(format!("wavetile-bin-{}", std::process::id()));
        f.write_binary(&dir).unwrap();
        let back = Field::read_binary(&dir).unwrap();
        std::fs::remove_file(&dir).ok();
        assert_eq!(back.grid(), f.grid());
        assert!(back.sub(&f).unwrap().max_abs() < 1e-6);
    }
}
