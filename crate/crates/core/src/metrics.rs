//! Spectral efficiency, communication and sensing SINR, benchmark bounds and
//! image entropy.

use ndarray::{Array2, Array3, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::CommChannel;
use crate::error::{Error, Result};
use crate::grid::{GridConfig, C64};
use crate::imaging::Image;
use crate::precoding::CommPrecoder;
use crate::receive::{ue_receive, EffectiveGains, ExtractedCir};
use crate::waveform::{qam_symbols, WaveformBank};

/// Sinc main-lobe entropy constant, `E ~ log2(kappa rho_x) + log2(kappa rho_y)`.
pub const KAPPA: f64 = 1.36;

/// Default number of symbol realizations for ensemble SINR estimates.
pub const DEFAULT_REALIZATIONS: usize = 64;

pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn from_db(x: f64) -> f64 {
    10f64.powf(x / 10.0)
}

/// Shannon entropy (bits) of the normalized intensity; `0 log 0 = 0`.
pub fn entropy_of_intensity<I: IntoIterator<Item = f64> + Clone>(intensity: I) -> Result<f64> {
    let total: f64 = intensity.clone().into_iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::UndefinedEntropy);
    }
    let mut e = 0.0;
    for v in intensity {
        if v > 0.0 {
            let p = v / total;
            e -= p * p.log2();
        }
    }
    Ok(e.max(0.0))
}

pub fn entropy(image: &Image) -> Result<f64> {
    entropy_of_intensity(image.pixels.iter().map(|v| v.norm_sqr()))
}

pub fn se_from_sinr(sinr: &Array3<f64>) -> Vec<f64> {
    sinr.axis_iter(Axis(0))
        .map(|s| s.iter().map(|v| (1.0 + v).log2()).sum::<f64>() / s.len().max(1) as f64)
        .collect()
}

/// Empirical per-bin SINR `[q, m, k]` from an ensemble of symbol realizations:
/// `E|S|^2 / (E|INT_com|^2 + E|INT_sen|^2 + sigma_w^2)`.
#[allow(clippy::too_many_arguments)]
pub fn comm_sinr_empirical<R: Rng + ?Sized>(
    gains: &EffectiveGains,
    bank: &WaveformBank,
    eta: f64,
    power: f64,
    noise_var: f64,
    grid: &GridConfig,
    realizations: usize,
    qam_order: usize,
    rng: &mut R,
) -> Result<Array3<f64>> {
    let q = gains.comm.dim().0;
    let (m, k) = grid.shape();
    let mut s = Array3::<f64>::zeros((q, m, k));
    let mut i = Array3::<f64>::zeros((q, m, k));
    let runs = realizations.max(1);
    for _ in 0..runs {
        let symbols = qam_symbols(q, grid, qam_order, rng)?;
        let rx = ue_receive(gains, &symbols, bank, eta, power, 0.0, grid, rng)?;
        for qq in 0..q {
            let mut sq = s.index_axis_mut(Axis(0), qq);
            sq.zip_mut_with(&rx.desired[qq], |a, v| *a += v.norm_sqr());
            let mut iq = i.index_axis_mut(Axis(0), qq);
            iq.zip_mut_with(&rx.mui[qq], |a, v| *a += v.norm_sqr());
            iq.zip_mut_with(&rx.sensing[qq], |a, v| *a += v.norm_sqr());
        }
    }
    let n = runs as f64;
    Ok(ndarray::Zip::from(&s)
        .and(&i)
        .map_collect(|s, i| (s / n) / (i / n + noise_var)))
}

/// Closed-form per-subcarrier SINR `[q, m]`: coherent desired and MUI gains,
/// sensing interference summed in power over the Tx APs.
pub fn comm_sinr_closed_form(gains: &EffectiveGains, eta: f64, power: f64, noise_var: f64) -> Array2<f64> {
    let (q, _, m) = gains.comm.dim();
    let n_tx = gains.sensing.dim().1;
    let pc = power * eta * eta;
    let ps = power * (1.0 - eta) * (1.0 - eta);
    Array2::from_shape_fn((q, m), |(qq, row)| {
        let s = pc * gains.comm[(qq, qq, row)].norm_sqr();
        let mui: f64 = (0..q)
            .filter(|&x| x != qq)
            .map(|x| gains.comm[(qq, x, row)].norm_sqr())
            .sum();
        let sen: f64 = (0..n_tx).map(|i| gains.sensing[(qq, i, row)].norm_sqr()).sum();
        s / (pc * mui + ps * sen + noise_var)
    })
}

/// `SNR_q[m] = P ||g_q,all[m]||^2 / sigma_w^2` with every AP transmitting.
pub fn dmimo_snr(channel: &CommChannel, power: f64, noise_var: f64, subcarriers: usize) -> Array2<f64> {
    let q = channel.n_ues();
    Array2::from_shape_fn((q, subcarriers), |(qq, row)| {
        let g: f64 = (0..channel.n_aps())
            .map(|n| {
                channel
                    .response(n, qq)
                    .row(row)
                    .iter()
                    .map(|v| v.norm_sqr())
                    .sum::<f64>()
            })
            .sum();
        power * g / noise_var
    })
}

/// Per-UE mean of `log2(1 + x)` over subcarriers.
pub fn se_per_subcarrier(sinr: &Array2<f64>) -> Vec<f64> {
    sinr.axis_iter(Axis(0))
        .map(|s| s.iter().map(|v| (1.0 + v).log2()).sum::<f64>() / s.len().max(1) as f64)
        .collect()
}

/// Empirical sensing SINR at one DD bin after Rx combining with `a`:
/// `|a^H S|^2 / (|a^H INT_sen|^2 + E|a^H INT_com|^2 + E|a^H W|^2)`, the
/// expectations taken over all DD bins.
pub fn sensing_sinr_empirical(cir: &ExtractedCir, tap: usize, doppler_col: usize, combiner: &[C64]) -> f64 {
    let comb = |a: &Array3<C64>, l: usize, p: usize| -> C64 {
        combiner.iter().enumerate().map(|(u, w)| w.conj() * a[(l, p, u)]).sum()
    };
    let mean_power = |a: &Array3<C64>| -> f64 {
        let (m, k, _) = a.dim();
        let mut acc = 0.0;
        for l in 0..m {
            for p in 0..k {
                acc += comb(a, l, p).norm_sqr();
            }
        }
        acc / (m * k) as f64
    };
    let s = comb(&cir.signal, tap, doppler_col).norm_sqr();
    let i_sen = comb(&cir.sensing_int, tap, doppler_col).norm_sqr();
    let den = i_sen + mean_power(&cir.comm_int) + mean_power(&cir.noise);
    if den == 0.0 {
        return if s > 0.0 { f64::INFINITY } else { 0.0 };
    }
    s / den
}

/// Inputs of the single-target closed-form sensing SINR for pair `(n, r)`.
#[derive(Debug, Clone)]
pub struct SensingLink {
    /// `|beta_n'r|^2` for every Tx AP (layout order).
    pub beta_sq: Vec<f64>,
    /// `|a^T(theta_n') v^sen_n'|^2` for every Tx AP.
    pub sensing_gain: Vec<f64>,
    /// `sum_q |F~_n',q|^2` for every Tx AP.
    pub comm_gain: Vec<f64>,
}

/// Closed-form sensing SINR of Tx `i` (layout index). `orthogonal` removes the
/// residual sensing cross-talk term.
#[allow(clippy::too_many_arguments)]
pub fn sensing_sinr_closed_form(
    link: &SensingLink,
    i: usize,
    eta: f64,
    power: f64,
    grid: &GridConfig,
    antennas: usize,
    noise_var: f64,
    orthogonal: bool,
) -> f64 {
    let mk = (grid.subcarriers * grid.symbols) as f64;
    let ps = power * (1.0 - eta).powi(2);
    let pc = power * eta * eta;
    let num = ps * mk * link.beta_sq[i] * link.sensing_gain[i];
    let mut den = noise_var / antennas as f64;
    for j in 0..link.beta_sq.len() {
        if j != i && !orthogonal {
            den += ps * link.beta_sq[j] * link.sensing_gain[j];
        }
        den += pc * link.beta_sq[j] * link.comm_gain[j];
    }
    num / den
}

/// `P MK |beta|^2 L / sigma^2` as printed.
pub fn drn_snr_literal(beta_sq: f64, power: f64, grid: &GridConfig, antennas: usize, noise_var: f64) -> f64 {
    power * (grid.subcarriers * grid.symbols) as f64 * beta_sq * antennas as f64 / noise_var
}

/// D-RN bound including the Tx array gain `L` of a unit-norm beam.
pub fn drn_snr(
    beta_sq: f64,
    power: f64,
    grid: &GridConfig,
    tx_antennas: usize,
    rx_antennas: usize,
    noise_var: f64,
) -> f64 {
    drn_snr_literal(beta_sq, power, grid, rx_antennas, noise_var) * tx_antennas as f64
}

/// `sum_q mean_m |a^T v_q[m]|^2` for the local Tx index `local`.
pub fn comm_gain_towards(precoder: &CommPrecoder, local: usize, steering: &[C64]) -> f64 {
    let m = precoder.weights.len();
    let mut acc = 0.0;
    for row in 0..m {
        for q in 0..precoder.ues {
            let v = precoder.vector(row, local, q);
            let g: C64 = steering.iter().zip(&v).map(|(a, x)| a * x).sum();
            acc += g.norm_sqr();
        }
    }
    acc / m.max(1) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSinr {
    pub tx: usize,
    pub rx: usize,
    /// Linear ratio.
    pub empirical: f64,
    /// Linear ratio; absent when no target was synthesized.
    pub closed_form: Option<f64>,
    /// Linear ratio.
    pub bound_drn: f64,
    /// Linear ratio.
    pub bound_drn_literal: f64,
    /// False when the pair sees no target echo (empirical value only).
    pub peak_identified: bool,
}

/// Per-run metrics. SE in bit/s/Hz, SINR values linear unless suffixed `_db`,
/// entropy in bits.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub se_per_ue: Vec<f64>,
    pub se_closed_form: Vec<f64>,
    pub se_bound_dmimo: Vec<f64>,
    /// Per UE, per subcarrier, per symbol.
    pub sinr_com: Vec<Vec<Vec<f64>>>,
    pub sinr_sen: Vec<PairSinr>,
    pub sinr_sen_avg_db: Option<f64>,
    pub entropy: Option<f64>,
    /// Per UE, linear.
    pub snr_dmimo: Vec<f64>,
}

impl MetricReport {
    pub fn se_mean(&self) -> Option<f64> {
        mean(&self.se_per_ue)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Numeric(e.to_string()))
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}

pub fn mean(x: &[f64]) -> Option<f64> {
    (!x.is_empty()).then(|| x.iter().sum::<f64>() / x.len() as f64)
}

/// Mean of linear pair SINRs, in dB.
pub fn average_sinr_db(pairs: &[PairSinr]) -> Option<f64> {
    let v: Vec<f64> = pairs
        .iter()
        .filter(|p| p.peak_identified)
        .map(|p| p.empirical)
        .collect();
    mean(&v).map(to_db)
}

pub fn sinr_nested(sinr: &Array3<f64>) -> Vec<Vec<Vec<f64>>> {
    sinr.axis_iter(Axis(0))
        .map(|q| q.axis_iter(Axis(0)).map(|row| row.to_vec()).collect())
        .collect()
}
