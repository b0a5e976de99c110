//! Sensing waveforms with extended orthogonality, and QAM data grids.
//!
//! Delay sequences are designed so that the periodic cross-correlation of
//! every pair vanishes over a whole window of lags rather than only at lag
//! zero. Sequence `n` is drawn from the null space of all cyclic shifts (over
//! the support) of sequences `1..n-1`; the Doppler component is a shared
//! Zadoff-Chu sequence.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::DMatrix;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{dd_to_ft, Grid, GridConfig, C64};
use crate::scenario::{roi_delay_extrema, Scenario};

/// Relative singular-value cutoff for the constraint row space.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelaySupport {
    /// Sorted delay (or lag) samples, reduced mod M.
    pub samples: Vec<usize>,
    /// Source intervals in seconds.
    pub intervals: Vec<(f64, f64)>,
}

impl DelaySupport {
    pub fn from_samples(samples: impl IntoIterator<Item = usize>) -> Self {
        let set: BTreeSet<usize> = samples.into_iter().collect();
        Self {
            samples: set.into_iter().collect(),
            intervals: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Closure under negation mod `m`: the lags constrained so that both
    /// `rho_nn'` and `rho_n'n` vanish on the support.
    pub fn symmetric(&self, m: usize) -> Self {
        let set: BTreeSet<usize> = self.samples.iter().flat_map(|&d| [d % m, (m - d % m) % m]).collect();
        Self {
            samples: set.into_iter().collect(),
            intervals: self.intervals.clone(),
        }
    }

    fn from_intervals(intervals: Vec<(f64, f64)>, grid: &GridConfig, pad: usize) -> Self {
        let m = grid.subcarriers as i64;
        let mut set = BTreeSet::new();
        for &(lo, hi) in &intervals {
            let a = grid.delay_tap(lo) - pad as i64;
            let b = grid.delay_tap(hi) + pad as i64;
            if b - a + 1 >= m {
                set.extend(0..grid.subcarriers);
                break;
            }
            set.extend((a..=b).map(|t| t.rem_euclid(m) as usize));
        }
        Self {
            samples: set.into_iter().collect(),
            intervals,
        }
    }
}

/// Absolute bistatic-delay support: union over `n in tx, r in rx` of the ROI
/// delay window, in samples, padded by `pad` on each side.
pub fn delay_support(scenario: &Scenario, tx: &[usize], rx: &[usize], pad: usize) -> Result<DelaySupport> {
    let mut intervals = Vec::new();
    for &n in tx {
        for &r in rx {
            intervals.push(roi_delay_extrema(&scenario.aps[n], &scenario.aps[r], &scenario.roi));
        }
    }
    if intervals.is_empty() {
        return Err(Error::Config("delay support needs at least one (Tx, Rx) pair".into()));
    }
    Ok(DelaySupport::from_intervals(intervals, &scenario.grid, pad))
}

/// Differential-lag support: union over `r in rx` and `n != n'` in `tx` of
/// `[tau_min,nr - tau_max,n'r, tau_max,nr - tau_min,n'r]`. These are the lags
/// at which `rho_nn'` is sampled when pair `(n, r)` is focused on a ROI
/// pixel while Tx `n'` illuminates a target in the ROI.
pub fn lag_support(scenario: &Scenario, tx: &[usize], rx: &[usize], pad: usize) -> Result<DelaySupport> {
    if rx.is_empty() {
        return Err(Error::Config("lag support needs at least one Rx AP".into()));
    }
    if tx.len() < 2 {
        return Ok(DelaySupport::from_samples([0]));
    }
    let mut intervals = Vec::new();
    for &r in rx {
        let ext: Vec<(f64, f64)> = tx
            .iter()
            .map(|&n| roi_delay_extrema(&scenario.aps[n], &scenario.aps[r], &scenario.roi))
            .collect();
        for (i, a) in ext.iter().enumerate() {
            for (j, b) in ext.iter().enumerate() {
                if i != j {
                    intervals.push((a.0 - b.1, a.1 - b.0));
                }
            }
        }
    }
    Ok(DelaySupport::from_intervals(intervals, &scenario.grid, pad))
}

/// `[X]_{i,j} = x[(i - j) mod M]`.
pub fn periodic_correlation_matrix(seq: &[C64]) -> Array2<C64> {
    let m = seq.len();
    Array2::from_shape_fn((m, m), |(i, j)| seq[(i + m - j) % m])
}

fn complex_gaussian<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Vec<C64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    (0..m)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            C64::new(re * s, im * s)
        })
        .collect()
}

fn normalize_to(v: &mut [C64], energy: f64) -> f64 {
    let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    if norm > 0.0 {
        let s = energy.sqrt() / norm;
        v.iter_mut().for_each(|x| *x *= s);
    }
    norm
}

/// Orthonormal basis (columns) of the span of the constraint vectors,
/// grown one sequence at a time.
struct RowSpace {
    m: usize,
    basis: DMatrix<C64>,
}

impl RowSpace {
    fn new(m: usize) -> Self {
        Self {
            m,
            basis: DMatrix::zeros(m, 0),
        }
    }

    fn rank(&self) -> usize {
        self.basis.ncols()
    }

    fn project_block(&self, block: &mut DMatrix<C64>) {
        if self.rank() == 0 {
            return;
        }
        // two passes of classical Gram-Schmidt keep the residual at machine precision
        for _ in 0..2 {
            let coef = self.basis.adjoint() * &*block;
            *block -= &self.basis * coef;
        }
    }

    fn project_out(&self, v: &mut [C64]) {
        let mut col = DMatrix::from_column_slice(v.len(), 1, v);
        self.project_block(&mut col);
        v.copy_from_slice(col.as_slice());
    }

    /// Add the cyclic shifts `x[(j - d) mod M]`, `d in lags`. These are the
    /// conjugated rows of `sum_j x*[j-d] y[j] = rho_xy[d]`.
    fn extend(&mut self, seq: &[C64], lags: &[usize]) -> Result<()> {
        let m = self.m;
        let mut block = DMatrix::from_fn(m, lags.len(), |j, c| seq[(j + m - lags[c] % m) % m]);
        let scale = seq.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        self.project_block(&mut block);
        let svd = block.svd(true, false);
        let u = svd
            .u
            .ok_or_else(|| Error::Numeric("SVD did not return left singular vectors".into()))?;
        let keep: Vec<usize> = svd
            .singular_values
            .iter()
            .enumerate()
            .filter(|(_, s)| **s >= RANK_TOLERANCE * scale)
            .map(|(k, _)| k)
            .collect();
        let mut fresh = DMatrix::from_fn(m, keep.len(), |i, c| u[(i, keep[c])]);
        self.project_block(&mut fresh);
        for mut col in fresh.column_iter_mut() {
            let norm = col.norm();
            col /= C64::new(norm, 0.0);
        }
        let r = self.rank();
        let mut grown = DMatrix::zeros(m, r + keep.len());
        grown.columns_mut(0, r).copy_from(&self.basis);
        grown.columns_mut(r, keep.len()).copy_from(&fresh);
        self.basis = grown;
        Ok(())
    }
}

/// Design `n_seqs` delay sequences of length `m`, mutually orthogonal over
/// the symmetric closure of `support`, each with `||x||^2 = M`.
pub fn design_delay_sequences(n_seqs: usize, m: usize, support: &DelaySupport, seed: u64) -> Result<Vec<Vec<C64>>> {
    if m == 0 {
        return Err(Error::Config("sequence length must be positive".into()));
    }
    let lags = support.symmetric(m);
    let bound = if lags.is_empty() { usize::MAX } else { m / lags.len() };
    if n_seqs > bound {
        return Err(Error::Infeasible {
            requested: n_seqs,
            m,
            support: lags.len(),
            bound,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut space = RowSpace::new(m);
    let mut out = Vec::with_capacity(n_seqs);
    for index in 0..n_seqs {
        if space.rank() >= m {
            return Err(Error::Rank {
                index,
                rank: space.rank(),
                m,
            });
        }
        let mut x = complex_gaussian(m, &mut rng);
        space.project_out(&mut x);
        let norm = normalize_to(&mut x, m as f64);
        if norm < 1e-8 {
            return Err(Error::Rank {
                index,
                rank: space.rank(),
                m,
            });
        }
        if index + 1 < n_seqs {
            space.extend(&x, &lags.samples)?;
        }
        out.push(x);
    }
    Ok(out)
}

/// I.i.d. unit-modulus random-phase sequences (no orthogonality design).
pub fn pseudo_random_sequences(n_seqs: usize, m: usize, seed: u64) -> Vec<Vec<C64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_seqs)
        .map(|_| {
            (0..m)
                .map(|_| C64::from_polar(1.0, rng.random::<f64>() * 2.0 * PI))
                .collect()
        })
        .collect()
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Zadoff-Chu sequence of length `k` and root `root`.
pub fn doppler_sequence(k: usize, root: usize) -> Result<Vec<C64>> {
    if k == 0 {
        return Err(Error::Config("Doppler sequence length must be positive".into()));
    }
    if k == 1 {
        return Ok(vec![C64::new(1.0, 0.0)]);
    }
    if root == 0 || gcd(root, k) != 1 {
        return Err(Error::Config(format!(
            "Zadoff-Chu root {root} is not coprime with K = {k}"
        )));
    }
    let kf = k as f64;
    let odd = (k % 2) as f64;
    Ok((0..k)
        .map(|n| {
            let n = n as f64;
            // reduce the quadratic phase mod 2K before scaling
            let num = (root as f64 * n * (n + odd)).rem_euclid(2.0 * kf);
            C64::from_polar(1.0, -PI * num / kf)
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct SensingWaveform {
    pub delay_seq: Vec<C64>,
    pub doppler_seq: Vec<C64>,
    pub dd_grid: Grid,
    pub ft_grid: Grid,
}

impl SensingWaveform {
    pub fn new(delay_seq: Vec<C64>, doppler_seq: Vec<C64>, grid: &GridConfig) -> Result<Self> {
        if delay_seq.len() != grid.subcarriers || doppler_seq.len() != grid.symbols {
            return Err(Error::dims(
                format!("{}x{}", grid.subcarriers, grid.symbols),
                format!("{}x{}", delay_seq.len(), doppler_seq.len()),
            ));
        }
        let dd_grid = Array2::from_shape_fn(grid.shape(), |(l, p)| delay_seq[l] * doppler_seq[p]);
        let ft_grid = dd_to_ft(&dd_grid, grid)?;
        Ok(Self {
            delay_seq,
            doppler_seq,
            dd_grid,
            ft_grid,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WaveformKind {
    Designed,
    PseudoRandom,
}

/// One sensing waveform per transmitting AP.
#[derive(Debug, Clone)]
pub struct WaveformBank {
    pub kind: WaveformKind,
    pub support: DelaySupport,
    pub waveforms: Vec<SensingWaveform>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BankHeader {
    m: usize,
    k: usize,
    n: usize,
    kind: WaveformKind,
    support: Vec<usize>,
}

impl WaveformBank {
    pub fn design(n_seqs: usize, grid: &GridConfig, support: DelaySupport, seed: u64) -> Result<Self> {
        let delay = design_delay_sequences(n_seqs, grid.subcarriers, &support, seed)?;
        Self::from_sequences(WaveformKind::Designed, support, delay, grid)
    }

    pub fn pseudo_random(n_seqs: usize, grid: &GridConfig, support: DelaySupport, seed: u64) -> Result<Self> {
        let delay = pseudo_random_sequences(n_seqs, grid.subcarriers, seed);
        Self::from_sequences(WaveformKind::PseudoRandom, support, delay, grid)
    }

    pub fn from_sequences(
        kind: WaveformKind,
        support: DelaySupport,
        delay: Vec<Vec<C64>>,
        grid: &GridConfig,
    ) -> Result<Self> {
        let doppler = doppler_sequence(grid.symbols, 1)?;
        let waveforms = delay
            .into_iter()
            .map(|d| SensingWaveform::new(d, doppler.clone(), grid))
            .collect::<Result<_>>()?;
        Ok(Self {
            kind,
            support,
            waveforms,
        })
    }

    pub fn len(&self) -> usize {
        self.waveforms.len()
    }

    /// Bank with the waveforms at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            kind: self.kind,
            support: self.support.clone(),
            waveforms: indices.iter().map(|&i| self.waveforms[i].clone()).collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.waveforms.is_empty()
    }

    /// Largest `|rho_nn'[d]|` over ordered pairs and lags in the support.
    pub fn max_cross_correlation(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, a) in self.waveforms.iter().enumerate() {
            for (j, b) in self.waveforms.iter().enumerate() {
                if i == j {
                    continue;
                }
                let c = crate::grid::periodic_xcorr(&a.delay_seq, &b.delay_seq).expect("equal lengths");
                for &d in &self.support.samples {
                    worst = worst.max(c[d % c.len()].norm());
                }
            }
        }
        worst
    }

    /// Text dump: a JSON header line followed by `re im` lines, delay
    /// sequences first (N x M) then Doppler sequences (N x K).
    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let first = self.waveforms.first();
        let header = BankHeader {
            m: first.map_or(0, |f| f.delay_seq.len()),
            k: first.map_or(0, |f| f.doppler_seq.len()),
            n: self.waveforms.len(),
            kind: self.kind,
            support: self.support.samples.clone(),
        };
        writeln!(w, "{}", serde_json::to_string(&header).map_err(std::io::Error::other)?)?;
        for wf in &self.waveforms {
            for v in &wf.delay_seq {
                writeln!(w, "{} {}", v.re, v.im)?;
            }
        }
        for wf in &self.waveforms {
            for v in &wf.doppler_seq {
                writeln!(w, "{} {}", v.re, v.im)?;
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write(std::io::BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path, grid: &GridConfig) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let parse = |message: String| Error::Parse {
            path: path.to_path_buf(),
            message,
        };
        let mut lines = std::io::BufReader::new(file).lines();
        let head = lines
            .next()
            .ok_or_else(|| parse("empty file".into()))?
            .map_err(|e| Error::io(path, e))?;
        let header: BankHeader = serde_json::from_str(&head).map_err(|e| parse(e.to_string()))?;
        if header.m != grid.subcarriers || header.k != grid.symbols {
            return Err(Error::dims(
                format!("{}x{}", grid.subcarriers, grid.symbols),
                format!("{}x{}", header.m, header.k),
            ));
        }
        let mut values = Vec::with_capacity(header.n * (header.m + header.k));
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let mut it = line.split_whitespace().map(str::parse::<f64>);
            match (it.next(), it.next()) {
                (Some(Ok(re)), Some(Ok(im))) => values.push(C64::new(re, im)),
                _ => return Err(parse(format!("line {}: expected two numbers", i + 2))),
            }
        }
        if values.len() != header.n * (header.m + header.k) {
            return Err(parse(format!(
                "expected {} samples, found {}",
                header.n * (header.m + header.k),
                values.len()
            )));
        }
        let (delay, doppler) = values.split_at(header.n * header.m);
        let waveforms = (0..header.n)
            .map(|n| {
                SensingWaveform::new(
                    delay[n * header.m..(n + 1) * header.m].to_vec(),
                    doppler[n * header.k..(n + 1) * header.k].to_vec(),
                    grid,
                )
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            kind: header.kind,
            support: DelaySupport::from_samples(header.support),
            waveforms,
        })
    }
}

/// Per-UE `M x K` grids of unit-average-power QAM symbols.
pub fn qam_symbols<R: Rng + ?Sized>(q: usize, grid: &GridConfig, order: usize, rng: &mut R) -> Result<Vec<Grid>> {
    let side = match order {
        4 => 2,
        16 => 4,
        64 => 8,
        _ => return Err(Error::Config(format!("QAM order must be 4, 16 or 64 (got {order})"))),
    };
    let scale = (2.0 * (order as f64 - 1.0) / 3.0).sqrt().recip();
    let level = |i: usize| (2 * i) as f64 - (side - 1) as f64;
    Ok((0..q)
        .map(|_| {
            Array2::from_shape_fn(grid.shape(), |_| {
                let i = rng.random_range(0..side);
                let j = rng.random_range(0..side);
                C64::new(level(i), level(j)) * scale
            })
        })
        .collect())
}
