//! Frequency-time (FT) and delay-Doppler (DD) resource grids.
//!
//! Storage conventions used throughout the crate:
//!
//! * FT grids are `M x K` arrays whose row index is the subcarrier in FFT
//!   order: row `i` holds subcarrier `m = i` for `i < M/2` and `m = i - M`
//!   otherwise, so `m` spans `[-M/2, M/2 - 1]`. Columns are OFDM symbols
//!   `k = 0..K-1`.
//! * DD grids are `M x K` arrays with the delay tap `l = 0..M-1` in natural
//!   order along rows and the Doppler bin `p` in FFT order along columns
//!   (use [`GridConfig::doppler_column`] / [`GridConfig::doppler_bin`]).
//!
//! The FT/DD pair is unitary: both directions carry a `1/sqrt(MK)` factor,
//! so energy is preserved and `ft_to_dd(dd_to_ft(x)) == x`.

use std::sync::Arc;

use ndarray::{Array2, ArrayViewMut1, Axis};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Complex `M x K` grid (FT or DD, depending on context).
pub type Grid = Array2<C64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    /// Number of subcarriers `M`.
    pub subcarriers: usize,
    /// Number of OFDM symbols `K`.
    pub symbols: usize,
    /// Subcarrier spacing in Hz.
    pub subcarrier_spacing: f64,
    /// Symbol duration including the cyclic prefix, in seconds.
    pub symbol_duration: f64,
    /// Occupied bandwidth `M * subcarrier_spacing`, in Hz.
    pub bandwidth: f64,
    /// Delay resolution `1/B`, in seconds.
    pub delay_resolution: f64,
    /// Doppler resolution `1/(K T)`, in Hz.
    pub doppler_resolution: f64,
}

impl GridConfig {
    pub fn new(subcarriers: usize, symbols: usize, bandwidth: f64, cp_fraction: f64) -> Result<Self> {
        if subcarriers == 0 || symbols == 0 {
            return Err(Error::Config(format!(
                "grid needs M > 0 and K > 0 (got M={subcarriers}, K={symbols})"
            )));
        }
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(Error::Config(format!("bandwidth must be positive (got {bandwidth})")));
        }
        if !(0.0..1.0).contains(&cp_fraction) {
            return Err(Error::Config(format!(
                "cyclic prefix fraction must lie in [0, 1) (got {cp_fraction})"
            )));
        }
        let subcarrier_spacing = bandwidth / subcarriers as f64;
        let symbol_duration = (1.0 + cp_fraction) / subcarrier_spacing;
        Ok(Self {
            subcarriers,
            symbols,
            subcarrier_spacing,
            symbol_duration,
            bandwidth,
            delay_resolution: 1.0 / bandwidth,
            doppler_resolution: 1.0 / (symbols as f64 * symbol_duration),
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.subcarriers, self.symbols)
    }

    /// Signed subcarrier index `m` of FT row `row`.
    pub fn subcarrier_index(&self, row: usize) -> i64 {
        signed_index(row, self.subcarriers)
    }

    /// Baseband frequency offset `m * delta_f` of FT row `row`, in Hz.
    pub fn subcarrier_offset(&self, row: usize) -> f64 {
        self.subcarrier_index(row) as f64 * self.subcarrier_spacing
    }

    /// Storage column of signed Doppler bin `p`.
    pub fn doppler_column(&self, p: i64) -> usize {
        p.rem_euclid(self.symbols as i64) as usize
    }

    /// Signed Doppler bin `p` of storage column `col`.
    pub fn doppler_bin(&self, col: usize) -> i64 {
        signed_index(col, self.symbols)
    }

    /// Nearest delay tap of `delay` (round half away from zero).
    pub fn delay_tap(&self, delay: f64) -> i64 {
        (delay / self.delay_resolution).round() as i64
    }

    /// Delay tap wrapped onto the periodic delay axis.
    pub fn delay_row(&self, tap: i64) -> usize {
        tap.rem_euclid(self.subcarriers as i64) as usize
    }

    pub fn noise_variance(&self, noise_psd_dbm_hz: f64) -> f64 {
        dbm_to_watt(noise_psd_dbm_hz) * self.subcarrier_spacing
    }

    fn check(&self, grid: &Grid) -> Result<()> {
        if grid.dim() != self.shape() {
            return Err(Error::dims(
                format!("{}x{}", self.subcarriers, self.symbols),
                format!("{}x{}", grid.nrows(), grid.ncols()),
            ));
        }
        Ok(())
    }
}

pub fn dbm_to_watt(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watt_to_dbm(watt: f64) -> f64 {
    10.0 * watt.log10() + 30.0
}

fn signed_index(idx: usize, n: usize) -> i64 {
    let half = n / 2;
    if idx < n - half {
        idx as i64
    } else {
        idx as i64 - n as i64
    }
}

/// Cached FFT plans for an `M x K` grid.
#[derive(Clone)]
pub struct GridFft {
    m: usize,
    k: usize,
    fwd_m: Arc<dyn Fft<f64>>,
    inv_m: Arc<dyn Fft<f64>>,
    fwd_k: Arc<dyn Fft<f64>>,
    inv_k: Arc<dyn Fft<f64>>,
}

#[derive(Debug, Clone, Copy)]
pub enum Direction {
    /// `sum x e^{-j 2 pi ...}`
    Forward,
    /// `sum x e^{+j 2 pi ...}` (no scaling)
    Inverse,
}

impl GridFft {
    pub fn new(m: usize, k: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            m,
            k,
            fwd_m: planner.plan_fft_forward(m),
            inv_m: planner.plan_fft_inverse(m),
            fwd_k: planner.plan_fft_forward(k),
            inv_k: planner.plan_fft_inverse(k),
        }
    }

    pub fn for_grid(grid: &GridConfig) -> Self {
        Self::new(grid.subcarriers, grid.symbols)
    }

    /// Unscaled 2D DFT with an independent direction per axis.
    pub fn transform(&self, data: &mut Grid, rows: Direction, cols: Direction) {
        assert_eq!(data.dim(), (self.m, self.k));
        let plan_m = match rows {
            Direction::Forward => &self.fwd_m,
            Direction::Inverse => &self.inv_m,
        };
        let plan_k = match cols {
            Direction::Forward => &self.fwd_k,
            Direction::Inverse => &self.inv_k,
        };
        if self.m > 1 {
            let mut buf = vec![C64::default(); self.m];
            for mut col in data.axis_iter_mut(Axis(1)) {
                run_lane(plan_m.as_ref(), &mut col, &mut buf);
            }
        }
        if self.k > 1 {
            let mut buf = vec![C64::default(); self.k];
            for mut row in data.axis_iter_mut(Axis(0)) {
                run_lane(plan_k.as_ref(), &mut row, &mut buf);
            }
        }
    }

    /// FT -> DD, unitary.
    pub fn ft_to_dd(&self, data: &mut Grid) {
        self.transform(data, Direction::Inverse, Direction::Forward);
        let scale = 1.0 / ((self.m * self.k) as f64).sqrt();
        data.mapv_inplace(|v| v * scale);
    }

    /// DD -> FT, unitary.
    pub fn dd_to_ft(&self, data: &mut Grid) {
        self.transform(data, Direction::Forward, Direction::Inverse);
        let scale = 1.0 / ((self.m * self.k) as f64).sqrt();
        data.mapv_inplace(|v| v * scale);
    }

    /// `c[n, m] = sum a*[n', m'] b[n' + n, m' + m]` (periodic in both axes).
    pub fn xcorr(&self, a: &Grid, b: &Grid) -> Grid {
        let mut fa = a.clone();
        let mut fb = b.clone();
        self.transform(&mut fa, Direction::Forward, Direction::Forward);
        self.transform(&mut fb, Direction::Forward, Direction::Forward);
        self.xcorr_spectra(&fa, &mut fb);
        fb
    }

    /// Correlation from precomputed forward spectra; `fb` is overwritten with the result.
    pub fn xcorr_spectra(&self, fa: &Grid, fb: &mut Grid) {
        let scale = 1.0 / (self.m * self.k) as f64;
        ndarray::Zip::from(&mut *fb)
            .and(fa)
            .for_each(|y, x| *y = x.conj() * *y * scale);
        self.transform(fb, Direction::Inverse, Direction::Inverse);
    }
}

fn run_lane(plan: &dyn Fft<f64>, lane: &mut ArrayViewMut1<C64>, buf: &mut [C64]) {
    match lane.as_slice_mut() {
        Some(slice) => plan.process(slice),
        None => {
            for (dst, src) in buf.iter_mut().zip(lane.iter()) {
                *dst = *src;
            }
            plan.process(buf);
            for (dst, src) in lane.iter_mut().zip(buf.iter()) {
                *dst = *src;
            }
        }
    }
}

/// `z~[l, p] = (MK)^{-1/2} sum_m sum_k z[m, k] e^{+j2pi m l / M} e^{-j2pi k p / K}`.
pub fn ft_to_dd(signal: &Grid, grid: &GridConfig) -> Result<Grid> {
    grid.check(signal)?;
    let mut out = signal.clone();
    GridFft::for_grid(grid).ft_to_dd(&mut out);
    Ok(out)
}

/// `X[m, k] = (MK)^{-1/2} sum_l sum_p X~[l, p] e^{-j2pi m l / M} e^{+j2pi k p / K}`.
pub fn dd_to_ft(signal: &Grid, grid: &GridConfig) -> Result<Grid> {
    grid.check(signal)?;
    let mut out = signal.clone();
    GridFft::for_grid(grid).dd_to_ft(&mut out);
    Ok(out)
}

/// Two-dimensional periodic cross-correlation of `b` against reference `a`.
pub fn periodic_xcorr_2d(a: &Grid, b: &Grid) -> Result<Grid> {
    if a.dim() != b.dim() {
        return Err(Error::dims(
            format!("{}x{}", a.nrows(), a.ncols()),
            format!("{}x{}", b.nrows(), b.ncols()),
        ));
    }
    let (m, k) = a.dim();
    Ok(GridFft::new(m, k).xcorr(a, b))
}

/// One-dimensional periodic cross-correlation `c[d] = sum_i a*[i] b[(i + d) mod M]`.
pub fn periodic_xcorr(a: &[C64], b: &[C64]) -> Result<Vec<C64>> {
    if a.len() != b.len() {
        return Err(Error::dims(a.len(), b.len()));
    }
    let n = a.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut fa = a.to_vec();
    let mut fb = b.to_vec();
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    let scale = 1.0 / n as f64;
    for (y, x) in fb.iter_mut().zip(&fa) {
        *y = x.conj() * *y * scale;
    }
    inv.process(&mut fb);
    Ok(fb)
}

pub fn frobenius_norm(grid: &Grid) -> f64 {
    grid.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}
