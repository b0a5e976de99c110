//! Space-frequency precoders and the transmitted FT grids.
//!
//! Communication precoders act on the composite channel
//! `G[m] = [h_1[m], ..., h_Q[m]]` stacked over the Tx APs, with `y_q = g_q^T s`.
//! The sensing precoder is the frequency-flat MR beam towards the fictitious
//! ROI channel.

use nalgebra::DMatrix;
use ndarray::{s, Array3};
use serde::{Deserialize, Serialize};

use crate::channel::CommChannel;
use crate::error::{Error, Result};
use crate::grid::{Grid, C64};
use crate::waveform::WaveformBank;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PrecoderMode {
    Mr,
    #[default]
    Mmse,
}

impl std::str::FromStr for PrecoderMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mr" => Ok(Self::Mr),
            "mmse" => Ok(Self::Mmse),
            _ => Err(Error::Config(format!("unknown precoder mode '{s}'"))),
        }
    }
}

/// Layout of the stacked `N_tx L` antenna dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct TxLayout {
    pub tx: Vec<usize>,
    pub offsets: Vec<usize>,
    pub antennas: Vec<usize>,
}

impl TxLayout {
    pub fn new(tx: &[usize], antennas_of: impl Fn(usize) -> usize) -> Self {
        let antennas: Vec<usize> = tx.iter().map(|&n| antennas_of(n)).collect();
        let offsets = antennas
            .iter()
            .scan(0, |acc, l| {
                let o = *acc;
                *acc += l;
                Some(o)
            })
            .collect();
        Self {
            tx: tx.to_vec(),
            offsets,
            antennas,
        }
    }

    pub fn total(&self) -> usize {
        self.antennas.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.tx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tx.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct CommPrecoder {
    pub mode: PrecoderMode,
    pub layout: TxLayout,
    pub ues: usize,
    /// One `N_tx L x Q` matrix per FT row, unit-norm columns.
    pub weights: Vec<DMatrix<C64>>,
}

impl CommPrecoder {
    /// `v_{n,q}[m]` for the Tx AP at position `local` in the Tx set.
    pub fn vector(&self, row: usize, local: usize, q: usize) -> Vec<C64> {
        let (o, l) = (self.layout.offsets[local], self.layout.antennas[local]);
        self.weights[row].view((o, q), (l, 1)).iter().copied().collect()
    }
}

/// Composite channel `G[m]` (rows = stacked Tx antennas, columns = UEs).
pub fn composite_channel(channel: &CommChannel, layout: &TxLayout, row: usize) -> DMatrix<C64> {
    let q = channel.n_ues();
    let mut g = DMatrix::zeros(layout.total(), q);
    for (i, &n) in layout.tx.iter().enumerate() {
        for qq in 0..q {
            let h = channel.response(n, qq).row(row);
            for (u, v) in h.iter().enumerate() {
                g[(layout.offsets[i] + u, qq)] = *v;
            }
        }
    }
    g
}

/// MR: `G*`; MMSE: `G* (G^T G* + sigma^2/P I)^{-1}`. Columns are scaled to unit
/// norm so each UE stream carries power `P` at `eta = 1`.
pub fn build_comm_precoder(
    channel: &CommChannel,
    layout: &TxLayout,
    mode: PrecoderMode,
    power: f64,
    noise_var: f64,
    subcarriers: usize,
) -> Result<CommPrecoder> {
    let q = channel.n_ues();
    let mut weights = Vec::with_capacity(subcarriers);
    for row in 0..subcarriers {
        let g = composite_channel(channel, layout, row);
        let gc = g.conjugate();
        let mut v = match mode {
            PrecoderMode::Mr => gc,
            PrecoderMode::Mmse => {
                if !(power > 0.0) {
                    return Err(Error::Numeric("MMSE precoder needs P > 0".into()));
                }
                let mut gram = g.transpose() * &gc;
                for i in 0..q {
                    gram[(i, i)] += C64::new(noise_var / power, 0.0);
                }
                let inv = gram
                    .try_inverse()
                    .ok_or_else(|| Error::Numeric(format!("singular regularized Gram matrix at row {row}")))?;
                gc * inv
            }
        };
        for (qq, mut col) in v.column_iter_mut().enumerate() {
            let norm = col.norm();
            if norm == 0.0 {
                return Err(Error::Numeric(format!("zero composite channel for UE {qq}")));
            }
            col /= C64::new(norm, 0.0);
        }
        weights.push(v);
    }
    Ok(CommPrecoder {
        mode,
        layout: layout.clone(),
        ues: q,
        weights,
    })
}

#[derive(Debug, Clone)]
pub struct SensingPrecoder {
    pub layout: TxLayout,
    /// `v_n^sen` per Tx AP (in Tx-set order); stacked norm 1.
    pub vectors: Vec<Vec<C64>>,
}

/// Conjugate of the stacked ROI channel over the Tx set, unit stacked norm.
pub fn build_sensing_precoder(roi_channel: &[Vec<C64>], layout: &TxLayout) -> Result<SensingPrecoder> {
    let norm = layout
        .tx
        .iter()
        .map(|&n| roi_channel[n].iter().map(|v| v.norm_sqr()).sum::<f64>())
        .sum::<f64>()
        .sqrt();
    if norm == 0.0 {
        return Err(Error::Numeric("ROI channel is zero over the Tx set".into()));
    }
    let vectors = layout
        .tx
        .iter()
        .map(|&n| roi_channel[n].iter().map(|v| v.conj() / norm).collect())
        .collect();
    Ok(SensingPrecoder {
        layout: layout.clone(),
        vectors,
    })
}

/// Per-Tx transmitted grids, split into the communication and sensing terms
/// of `s_n[m,k] = sqrt(P) eta sum_q v_nq X_q + sqrt(P) (1 - eta) v_n X_n`.
/// Arrays are `M x K x L`.
#[derive(Debug, Clone)]
pub struct TxGrid {
    pub comm: Vec<Array3<C64>>,
    pub sensing: Vec<Array3<C64>>,
}

impl TxGrid {
    pub fn total(&self, local: usize) -> Array3<C64> {
        &self.comm[local] + &self.sensing[local]
    }
}

pub fn assemble_tx(
    comm: Option<&CommPrecoder>,
    sensing: &SensingPrecoder,
    symbols: &[Grid],
    bank: &WaveformBank,
    eta: f64,
    power: f64,
) -> Result<TxGrid> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::Config(format!("eta must lie in [0, 1] (got {eta})")));
    }
    let layout = &sensing.layout;
    if bank.len() < layout.len() {
        return Err(Error::dims(format!("{} waveforms", layout.len()), bank.len()));
    }
    let (m, k) = bank.waveforms.first().map(|w| w.ft_grid.dim()).unwrap_or((0, 0));
    if let Some(c) = comm {
        if c.ues != symbols.len() {
            return Err(Error::dims(format!("{} symbol grids", c.ues), symbols.len()));
        }
        if c.layout != *layout {
            return Err(Error::Config(
                "communication and sensing precoders use different Tx sets".into(),
            ));
        }
    }
    if symbols.iter().any(|x| x.dim() != (m, k)) {
        return Err(Error::dims(format!("{m}x{k}"), "symbol grid of another size"));
    }
    let a_com = power.sqrt() * eta;
    let a_sen = power.sqrt() * (1.0 - eta);
    let mut comm_out = Vec::with_capacity(layout.len());
    let mut sen_out = Vec::with_capacity(layout.len());
    for (i, l) in layout.antennas.iter().copied().enumerate() {
        let mut sen = Array3::zeros((m, k, l));
        let x = &bank.waveforms[i].ft_grid;
        for (u, v) in sensing.vectors[i].iter().enumerate() {
            let w = v * a_sen;
            sen.slice_mut(s![.., .., u]).zip_mut_with(x, |o, xi| *o = w * xi);
        }
        let mut com = Array3::zeros((m, k, l));
        if let Some(c) = comm {
            if a_com != 0.0 {
                for row in 0..m {
                    for (q, xq) in symbols.iter().enumerate() {
                        let v = c.vector(row, i, q);
                        for kk in 0..k {
                            let sym = xq[(row, kk)] * a_com;
                            for (u, vu) in v.iter().enumerate() {
                                com[(row, kk, u)] += vu * sym;
                            }
                        }
                    }
                }
            }
        }
        comm_out.push(com);
        sen_out.push(sen);
    }
    Ok(TxGrid {
        comm: comm_out,
        sensing: sen_out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{build_comm_channel, build_roi_channel};
    use crate::grid::GridConfig;
    use crate::scenario::{AccessPoint, Area, Point, RegionOfInterest, Scenario, UserEquipment};
    use crate::waveform::{qam_symbols, DelaySupport};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    const F0: f64 = 10e9;

    fn scenario(ues: &[(f64, f64)], m: usize, k: usize) -> Scenario {
        Scenario {
            aps: vec![
                AccessPoint::new(Point::new(-10.0, -10.0), PI / 4.0, 4, F0),
                AccessPoint::new(Point::new(10.0, -10.0), 3.0 * PI / 4.0, 4, F0),
                AccessPoint::new(Point::new(0.0, 10.0), -PI / 2.0, 4, F0),
            ],
            ues: ues
                .iter()
                .map(|&(x, y)| UserEquipment {
                    position: Point::new(x, y),
                })
                .collect(),
            roi: RegionOfInterest::new(Point::new(-4.0, -3.0), 3.0, 3.0, 0.1).unwrap(),
            targets: vec![],
            area: Area::square(10.0),
            f0: F0,
            noise_psd: -173.0,
            power: 1e-3,
            grid: GridConfig::new(m, k, 100e6, 0.0).unwrap(),
            eta: 0.5,
        }
    }

    fn layout(s: &Scenario, tx: &[usize]) -> TxLayout {
        TxLayout::new(tx, |n| s.aps[n].antennas)
    }

    #[test]
    fn single_ue_precoder_is_normalized_conjugate() {
        let s = scenario(&[(3.0, 4.0)], 8, 1);
        let ch = build_comm_channel(&s, 1, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let lay = layout(&s, &[0, 1, 2]);
        for mode in [PrecoderMode::Mr, PrecoderMode::Mmse] {
            let p = build_comm_precoder(&ch, &lay, mode, 1e-3, 1e-12, 8).unwrap();
            for row in 0..8 {
                let g = composite_channel(&ch, &lay, row);
                let want = g.conjugate() / C64::new(g.norm(), 0.0);
                let got = p.weights[row].column(0);
                assert!((got - want.column(0)).norm() < 1e-9);
                assert!((got.norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mmse_tends_to_mr_at_high_noise() {
        let s = scenario(&[(3.0, 4.0), (-2.0, 6.0)], 4, 1);
        let ch = build_comm_channel(&s, 3, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let lay = layout(&s, &[0, 1, 2]);
        let mr = build_comm_precoder(&ch, &lay, PrecoderMode::Mr, 1.0, 0.0, 4).unwrap();
        let mmse = build_comm_precoder(&ch, &lay, PrecoderMode::Mmse, 1.0, 1e6, 4).unwrap();
        for q in 0..2 {
            let cos = (mr.weights[0].column(q).dotc(&mmse.weights[0].column(q))).norm();
            assert!(cos > 1.0 - 1e-9);
        }
    }

    #[test]
    fn mmse_zero_forces_orthogonal_users() {
        // closed form: with g1 ⟂ g2 (in the bilinear sense) the Gram matrix is
        // diagonal, so v_1 is proportional to g_1* and g_2^T v_1 = 0
        let s = scenario(&[(3.0, 4.0), (-2.0, 6.0)], 2, 1);
        let mut ch = build_comm_channel(&s, 1, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let lay = layout(&s, &[0]);
        let g = composite_channel(&ch, &lay, 0);
        let g1 = g.column(0).into_owned();
        let mut g2 = g.column(1).into_owned();
        let c = g1.dotc(&g2) / C64::new(g1.norm_squared(), 0.0);
        g2 -= g1.clone() * c;
        assert!(g1.dotc(&g2).norm() < 1e-20);
        let resp = ch.response_mut(0, 1);
        for row in 0..2 {
            for (u, v) in g2.iter().enumerate() {
                resp[(row, u)] = *v;
            }
        }
        let p = build_comm_precoder(&ch, &lay, PrecoderMode::Mmse, 1e-3, 1e-9, 2).unwrap();
        let v1 = p.weights[0].column(0);
        let leak: C64 = g2.iter().zip(v1.iter()).map(|(a, b)| a * b).sum();
        assert!(leak.norm() <= 1e-10 * g2.norm());
    }

    #[test]
    fn sensing_precoder_properties() {
        let mut s = scenario(&[], 4, 1);
        let lay = layout(&s, &[0, 2]);
        let h = build_roi_channel(&s).unwrap();
        let p = build_sensing_precoder(&h, &lay).unwrap();
        let total: f64 = p.vectors.iter().flat_map(|v| v.iter()).map(|x| x.norm_sqr()).sum();
        assert!((total - 1.0).abs() < 1e-12);

        // single-pixel ROI: conjugate steering towards the pixel
        s.roi = RegionOfInterest::new(Point::new(-4.0, -3.0), 0.01, 0.01, 1.0).unwrap();
        let h = build_roi_channel(&s).unwrap();
        let p = build_sensing_precoder(&h, &layout(&s, &[0])).unwrap();
        let a = s.aps[0].steering_vector(&Point::new(-4.0, -3.0), F0).unwrap();
        for (v, a) in p.vectors[0].iter().zip(&a) {
            assert!((v - a.conj() / 2.0).norm() < 1e-12);
        }
        assert!(build_sensing_precoder(&[vec![C64::default(); 4]], &layout(&s, &[0])).is_err());
    }

    #[test]
    fn sensing_beam_prefers_roi() {
        // AP 0 at (-10,-10) facing +45 deg; ROI centered off broadside
        let s = scenario(&[], 4, 1);
        let h = build_roi_channel(&s).unwrap();
        let p = build_sensing_precoder(&h, &layout(&s, &[0])).unwrap();
        let ap = &s.aps[0];
        let gain = |roi: &RegionOfInterest| -> f64 {
            let px = roi.pixels();
            px.iter()
                .map(|x| {
                    let a = ap.steering_vector(x, F0).unwrap();
                    a.iter().zip(&p.vectors[0]).map(|(a, v)| a * v).sum::<C64>().norm_sqr()
                })
                .sum::<f64>()
                / px.len() as f64
        };
        // rotate the ROI center by 90 degrees about the AP
        let c = s.roi.center;
        let (dx, dy) = (c.x - ap.position.x, c.y - ap.position.y);
        let rotated = RegionOfInterest::new(Point::new(ap.position.x - dy, ap.position.y + dx), 3.0, 3.0, 0.1).unwrap();
        assert!(gain(&s.roi) > gain(&rotated));
    }

    #[test]
    fn assemble_limits_and_power() {
        let s = scenario(&[(3.0, 4.0)], 16, 4);
        let ch = build_comm_channel(&s, 1, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let lay = layout(&s, &[0, 1, 2]);
        let cp = build_comm_precoder(&ch, &lay, PrecoderMode::Mmse, s.power, 1e-15, 16).unwrap();
        let sp = build_sensing_precoder(&build_roi_channel(&s).unwrap(), &lay).unwrap();
        let bank = WaveformBank::design(3, &s.grid, DelaySupport::from_samples(0..2), 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);

        let x = qam_symbols(1, &s.grid, 16, &mut rng).unwrap();
        let comm_only = assemble_tx(Some(&cp), &sp, &x, &bank, 1.0, s.power).unwrap();
        assert!(comm_only.sensing.iter().all(|a| a.iter().all(|v| v.norm() == 0.0)));
        let sen_only = assemble_tx(Some(&cp), &sp, &x, &bank, 0.0, s.power).unwrap();
        assert!(sen_only.comm.iter().all(|a| a.iter().all(|v| v.norm() == 0.0)));
        assert!(assemble_tx(Some(&cp), &sp, &x, &bank, 1.5, s.power).is_err());

        // network power per subcarrier at eta = 1
        let mut acc = 0.0;
        let draws = 50;
        for _ in 0..draws {
            let x = qam_symbols(1, &s.grid, 16, &mut rng).unwrap();
            let tx = assemble_tx(Some(&cp), &sp, &x, &bank, 1.0, s.power).unwrap();
            acc += tx
                .comm
                .iter()
                .map(|a| a.iter().map(|v| v.norm_sqr()).sum::<f64>())
                .sum::<f64>();
        }
        let per_bin = acc / (draws * 16 * 4) as f64;
        assert!((per_bin / s.power - 1.0).abs() < 0.02, "{}", per_bin / s.power);
    }

    #[test]
    fn assemble_is_linear_in_symbols() {
        let s = scenario(&[(3.0, 4.0), (-3.0, 5.0)], 8, 2);
        let ch = build_comm_channel(&s, 2, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let lay = layout(&s, &[1, 2]);
        let cp = build_comm_precoder(&ch, &lay, PrecoderMode::Mr, s.power, 1e-15, 8).unwrap();
        let sp = build_sensing_precoder(&build_roi_channel(&s).unwrap(), &lay).unwrap();
        let bank = WaveformBank::design(2, &s.grid, DelaySupport::from_samples(0..2), 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = qam_symbols(2, &s.grid, 4, &mut rng).unwrap();
        let b = qam_symbols(2, &s.grid, 4, &mut rng).unwrap();
        let sum: Vec<Grid> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let ta = assemble_tx(Some(&cp), &sp, &a, &bank, 1.0, s.power).unwrap();
        let tb = assemble_tx(Some(&cp), &sp, &b, &bank, 1.0, s.power).unwrap();
        let ts = assemble_tx(Some(&cp), &sp, &sum, &bank, 1.0, s.power).unwrap();
        for i in 0..2 {
            let diff = &ts.comm[i] - &(&ta.comm[i] + &tb.comm[i]);
            assert!(diff.iter().all(|v| v.norm() < 1e-15));
        }
    }

    #[test]
    fn mmse_is_continuous() {
        let s = scenario(&[(3.0, 4.0), (-2.0, 6.0)], 2, 1);
        let ch = build_comm_channel(&s, 1, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let mut pert = ch.clone();
        let lay = layout(&s, &[0, 1, 2]);
        let base = build_comm_precoder(&ch, &lay, PrecoderMode::Mmse, 1e-3, 1e-15, 2).unwrap();
        for n in 0..3 {
            for q in 0..2 {
                pert.response_mut(n, q).mapv_inplace(|v| v * C64::new(1.0 + 1e-6, 1e-6));
            }
        }
        let moved = build_comm_precoder(&pert, &lay, PrecoderMode::Mmse, 1e-3, 1e-15, 2).unwrap();
        assert!((&moved.weights[0] - &base.weights[0]).norm() < 1e-4);
    }
}
