//! Received signals at UEs and Rx APs, and delay-Doppler CIR extraction.
//!
//! Every received quantity is kept split into its physical contributions
//! (desired, interference, noise) so that empirical SINRs can be measured
//! on the exact signals the receivers see.

use ndarray::{s, Array3, Axis};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::channel::{delay_ramp, CommChannel, SensingChannel};
use crate::error::{Error, Result};
use crate::grid::{Direction, Grid, GridConfig, GridFft, C64};
use crate::precoding::{CommPrecoder, SensingPrecoder, TxGrid, TxLayout};
use crate::waveform::WaveformBank;

pub fn complex_noise<R: Rng + ?Sized>(shape: (usize, usize, usize), variance: f64, rng: &mut R) -> Array3<C64> {
    let s = (variance / 2.0).sqrt();
    Array3::from_shape_simple_fn(shape, || {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * s, im * s)
    })
}

fn noise_grid<R: Rng + ?Sized>(shape: (usize, usize), variance: f64, rng: &mut R) -> Grid {
    complex_noise((shape.0, shape.1, 1), variance, rng).index_axis_move(Axis(2), 0)
}

/// Scalar beamforming gains seen by the UEs on every subcarrier.
#[derive(Debug, Clone)]
pub struct EffectiveGains {
    /// `[q, q', row] = sum_n h_nq^T v_nq'`.
    pub comm: Array3<C64>,
    /// `[q, i, row] = h_{n_i q}^T v_{n_i}^sen` for Tx AP `i` of the layout.
    pub sensing: Array3<C64>,
}

pub fn effective_gains(
    channel: &CommChannel,
    layout: &TxLayout,
    comm: Option<&CommPrecoder>,
    sensing: &SensingPrecoder,
    subcarriers: usize,
) -> EffectiveGains {
    let q = channel.n_ues();
    let mut fc = Array3::zeros((q, q, subcarriers));
    let mut fs = Array3::zeros((q, layout.len(), subcarriers));
    for qq in 0..q {
        for (i, &n) in layout.tx.iter().enumerate() {
            let h = channel.response(n, qq);
            for row in 0..subcarriers {
                let hr = h.row(row);
                fs[(qq, i, row)] = hr.iter().zip(&sensing.vectors[i]).map(|(a, b)| a * b).sum();
                if let Some(c) = comm {
                    let o = c.layout.offsets[i];
                    for q2 in 0..q {
                        let w = c.weights[row].column(q2);
                        let g: C64 = hr.iter().enumerate().map(|(u, a)| a * w[o + u]).sum();
                        fc[(qq, q2, row)] += g;
                    }
                }
            }
        }
    }
    EffectiveGains { comm: fc, sensing: fs }
}

/// Per-UE `M x K` grids of the four terms of the received signal.
#[derive(Debug, Clone)]
pub struct UeReception {
    pub desired: Vec<Grid>,
    pub mui: Vec<Grid>,
    pub sensing: Vec<Grid>,
    pub noise: Vec<Grid>,
}

impl UeReception {
    pub fn total(&self, q: usize) -> Grid {
        &self.desired[q] + &self.mui[q] + &self.sensing[q] + &self.noise[q]
    }
}

#[allow(clippy::too_many_arguments)]
pub fn ue_receive<R: Rng + ?Sized>(
    gains: &EffectiveGains,
    symbols: &[Grid],
    bank: &WaveformBank,
    eta: f64,
    power: f64,
    noise_var: f64,
    grid: &GridConfig,
    rng: &mut R,
) -> Result<UeReception> {
    let (q, _, m) = gains.comm.dim();
    let n_tx = gains.sensing.dim().1;
    if symbols.len() != q || m != grid.subcarriers || bank.len() < n_tx {
        return Err(Error::dims(
            format!("{q} UEs, {} subcarriers, {n_tx} waveforms", grid.subcarriers),
            format!("{} UEs, {m} subcarriers, {} waveforms", symbols.len(), bank.len()),
        ));
    }
    let a_com = power.sqrt() * eta;
    let a_sen = power.sqrt() * (1.0 - eta);
    let shape = grid.shape();
    let mut out = UeReception {
        desired: Vec::with_capacity(q),
        mui: Vec::with_capacity(q),
        sensing: Vec::with_capacity(q),
        noise: Vec::with_capacity(q),
    };
    for qq in 0..q {
        let mut desired = Grid::zeros(shape);
        let mut mui = Grid::zeros(shape);
        let mut sen = Grid::zeros(shape);
        for ((row, k), d) in desired.indexed_iter_mut() {
            *d = a_com * gains.comm[(qq, qq, row)] * symbols[qq][(row, k)];
            let mut i_c = C64::default();
            for (q2, x) in symbols.iter().enumerate() {
                if q2 != qq {
                    i_c += gains.comm[(qq, q2, row)] * x[(row, k)];
                }
            }
            mui[(row, k)] = a_com * i_c;
            let mut i_s = C64::default();
            for i in 0..n_tx {
                i_s += gains.sensing[(qq, i, row)] * bank.waveforms[i].ft_grid[(row, k)];
            }
            sen[(row, k)] = a_sen * i_s;
        }
        out.desired.push(desired);
        out.mui.push(mui);
        out.sensing.push(sen);
        out.noise.push(noise_grid(shape, noise_var, rng));
    }
    Ok(out)
}

/// Signal at one Rx AP, `M x K x L`, split by origin.
#[derive(Debug, Clone)]
pub struct ApReception {
    pub rx: usize,
    /// Echo of the sensing signal of each Tx AP (layout order).
    pub sensing: Vec<Array3<C64>>,
    /// Echoes of all communication signals.
    pub comm: Array3<C64>,
    pub noise: Array3<C64>,
}

impl ApReception {
    pub fn total(&self) -> Array3<C64> {
        let mut t = &self.comm + &self.noise;
        for s in &self.sensing {
            t += s;
        }
        t
    }
}

/// Adds `H_nr[m] s[m, k]` for every echo of the pair to `out`.
fn propagate(
    out: &mut Array3<C64>,
    signal: &Array3<C64>,
    channel: &SensingChannel,
    tx: usize,
    rx: usize,
    grid: &GridConfig,
) {
    let (m, k, _) = signal.dim();
    for e in channel.echoes(tx, rx) {
        let ramp = delay_ramp(grid, channel.carrier(), e.delay);
        for row in 0..m {
            let c = e.beta * ramp[row];
            for kk in 0..k {
                let s = signal.slice(s![row, kk, ..]);
                let t: C64 = e.tx_steering.iter().zip(s.iter()).map(|(a, x)| a * x).sum();
                let w = c * t;
                if w == C64::default() {
                    continue;
                }
                for (i, a) in e.rx_steering.iter().enumerate() {
                    out[(row, kk, i)] += w * a;
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn ap_receive<R: Rng + ?Sized>(
    tx: &TxGrid,
    layout: &TxLayout,
    channel: &SensingChannel,
    rx: usize,
    rx_antennas: usize,
    noise_var: f64,
    grid: &GridConfig,
    rng: &mut R,
) -> ApReception {
    let shape = (grid.subcarriers, grid.symbols, rx_antennas);
    let mut sensing = Vec::with_capacity(layout.len());
    let mut comm = Array3::zeros(shape);
    for (i, &n) in layout.tx.iter().enumerate() {
        let mut s = Array3::zeros(shape);
        propagate(&mut s, &tx.sensing[i], channel, n, rx, grid);
        sensing.push(s);
        propagate(&mut comm, &tx.comm[i], channel, n, rx, grid);
    }
    ApReception {
        rx,
        sensing,
        comm,
        noise: complex_noise(shape, noise_var, rng),
    }
}

/// `h~_nr[l, p]` per antenna (`M x K x L`, DD layout), split into the terms
/// desired / sensing interference / communication interference / noise.
#[derive(Debug, Clone)]
pub struct ExtractedCir {
    pub tx: usize,
    pub rx: usize,
    pub signal: Array3<C64>,
    pub sensing_int: Array3<C64>,
    pub comm_int: Array3<C64>,
    pub noise: Array3<C64>,
}

impl ExtractedCir {
    pub fn total(&self) -> Array3<C64> {
        &self.signal + &self.sensing_int + &self.comm_int + &self.noise
    }

    /// Zero-Doppler slice of the total, `M x L`.
    pub fn zero_doppler(&self) -> ndarray::Array2<C64> {
        let t = self.total();
        t.index_axis(Axis(1), 0).to_owned()
    }
}

/// Forward 2D spectrum of the DD transform of each antenna component.
fn dd_spectrum(fft: &GridFft, ft: &Array3<C64>) -> Array3<C64> {
    let mut out = ft.clone();
    for mut lane in out.axis_iter_mut(Axis(2)) {
        let mut g = lane.to_owned();
        fft.ft_to_dd(&mut g);
        fft.transform(&mut g, Direction::Forward, Direction::Forward);
        lane.assign(&g);
    }
    out
}

fn correlate(fft: &GridFft, reference: &Grid, spectrum: &Array3<C64>) -> Array3<C64> {
    let mut out = spectrum.clone();
    for mut lane in out.axis_iter_mut(Axis(2)) {
        let mut g = lane.to_owned();
        fft.xcorr_spectra(reference, &mut g);
        lane.assign(&g);
    }
    out
}

/// DD transform of the received signal followed by periodic 2D correlation
/// with every Tx AP's sensing waveform. Returns one CIR per Tx AP (layout
/// order) for this Rx AP.
pub fn extract_cir(
    reception: &ApReception,
    layout: &TxLayout,
    bank: &WaveformBank,
    grid: &GridConfig,
) -> Vec<ExtractedCir> {
    let fft = GridFft::for_grid(grid);
    let sen: Vec<Array3<C64>> = reception.sensing.iter().map(|s| dd_spectrum(&fft, s)).collect();
    let sen_total = sen.iter().skip(1).fold(
        sen.first()
            .cloned()
            .unwrap_or_else(|| reception.comm.clone() * C64::default()),
        |acc, x| acc + x,
    );
    let comm = dd_spectrum(&fft, &reception.comm);
    let noise = dd_spectrum(&fft, &reception.noise);
    layout
        .tx
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let mut reference = bank.waveforms[i].dd_grid.clone();
            fft.transform(&mut reference, Direction::Forward, Direction::Forward);
            let others = &sen_total - &sen[i];
            ExtractedCir {
                tx: n,
                rx: reception.rx,
                signal: correlate(&fft, &reference, &sen[i]),
                sensing_int: correlate(&fft, &reference, &others),
                comm_int: correlate(&fft, &reference, &comm),
                noise: correlate(&fft, &reference, &noise),
            }
        })
        .collect()
}

/// CIR of an arbitrary `M x K x L` FT signal against one DD reference.
pub fn extract_single(signal: &Array3<C64>, reference_dd: &Grid, grid: &GridConfig) -> Array3<C64> {
    let fft = GridFft::for_grid(grid);
    let spec = dd_spectrum(&fft, signal);
    let mut reference = reference_dd.clone();
    fft.transform(&mut reference, Direction::Forward, Direction::Forward);
    correlate(&fft, &reference, &spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{build_comm_channel, build_roi_channel, build_sensing_channel};
    use crate::grid::ft_to_dd;
    use crate::precoding::{assemble_tx, build_comm_precoder, build_sensing_precoder, PrecoderMode};
    use crate::scenario::{
        AccessPoint, Area, Point, RegionOfInterest, Scenario, Target, UserEquipment, SPEED_OF_LIGHT,
    };
    use crate::waveform::{lag_support, qam_symbols, DelaySupport};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    const F0: f64 = 10e9;

    fn scenario(m: usize, k: usize, targets: Vec<Target>) -> Scenario {
        Scenario {
            aps: vec![
                AccessPoint::new(Point::new(-10.0, -10.0), PI / 4.0, 3, F0),
                AccessPoint::new(Point::new(10.0, -10.0), 3.0 * PI / 4.0, 3, F0),
                AccessPoint::new(Point::new(0.0, 10.0), -PI / 2.0, 3, F0),
            ],
            ues: vec![
                UserEquipment {
                    position: Point::new(6.0, 5.0),
                },
                UserEquipment {
                    position: Point::new(-7.0, 4.0),
                },
            ],
            roi: RegionOfInterest::new(Point::new(0.0, -2.0), 4.0, 4.0, 0.1).unwrap(),
            targets,
            area: Area::square(10.0),
            f0: F0,
            noise_psd: -173.0,
            power: 1e-3,
            grid: GridConfig::new(m, k, 100e6, 0.0).unwrap(),
            eta: 0.4,
        }
    }

    fn target(x: f64, y: f64) -> Target {
        Target {
            position: Point::new(x, y),
            rcs: 1.0,
            phase: 0.7,
        }
    }

    struct Setup {
        s: Scenario,
        layout: TxLayout,
        cp: CommPrecoder,
        sp: SensingPrecoder,
        bank: WaveformBank,
        symbols: Vec<Grid>,
        comm: CommChannel,
    }

    fn setup(s: Scenario, tx: &[usize], seed: u64) -> Setup {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layout = TxLayout::new(tx, |n| s.aps[n].antennas);
        let comm = build_comm_channel(&s, 2, &mut rng).unwrap();
        let cp = build_comm_precoder(
            &comm,
            &layout,
            PrecoderMode::Mmse,
            s.power,
            s.noise_variance(),
            s.grid.subcarriers,
        )
        .unwrap();
        let sp = build_sensing_precoder(&build_roi_channel(&s).unwrap(), &layout).unwrap();
        let bank = WaveformBank::design(tx.len(), &s.grid, DelaySupport::from_samples(0..3), seed).unwrap();
        let symbols = qam_symbols(s.ues.len(), &s.grid, 16, &mut rng).unwrap();
        Setup {
            s,
            layout,
            cp,
            sp,
            bank,
            symbols,
            comm,
        }
    }

    #[test]
    fn ue_decomposition_matches_direct_sum() {
        let st = setup(scenario(16, 2, vec![]), &[0, 1, 2], 1);
        let gains = effective_gains(&st.comm, &st.layout, Some(&st.cp), &st.sp, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rxd = ue_receive(
            &gains,
            &st.symbols,
            &st.bank,
            st.s.eta,
            st.s.power,
            1e-15,
            &st.s.grid,
            &mut rng,
        )
        .unwrap();
        let tx = assemble_tx(Some(&st.cp), &st.sp, &st.symbols, &st.bank, st.s.eta, st.s.power).unwrap();
        for q in 0..2 {
            let total = rxd.total(q);
            for row in 0..16 {
                for k in 0..2 {
                    let mut y = rxd.noise[q][(row, k)];
                    for (i, &n) in st.layout.tx.iter().enumerate() {
                        let h = st.comm.response(n, q).row(row).to_owned();
                        let s = tx.total(i);
                        for u in 0..3 {
                            y += h[u] * s[(row, k, u)];
                        }
                    }
                    assert!((total[(row, k)] - y).norm() < 1e-12 * y.norm().max(1e-30));
                }
            }
        }
    }

    #[test]
    fn ue_limits() {
        let st = setup(scenario(16, 1, vec![]), &[0, 1, 2], 3);
        let gains = effective_gains(&st.comm, &st.layout, Some(&st.cp), &st.sp, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r0 = ue_receive(
            &gains,
            &st.symbols,
            &st.bank,
            0.0,
            st.s.power,
            0.0,
            &st.s.grid,
            &mut rng,
        )
        .unwrap();
        assert!(r0
            .desired
            .iter()
            .chain(&r0.mui)
            .all(|g| g.iter().all(|v| v.norm() == 0.0)));

        // single UE, MR, LOS: effective scalar is real positive
        let mut s = scenario(16, 1, vec![]);
        s.ues.truncate(1);
        let layout = TxLayout::new(&[0, 1, 2], |n| s.aps[n].antennas);
        let comm = build_comm_channel(&s, 1, &mut rng).unwrap();
        let cp = build_comm_precoder(&comm, &layout, PrecoderMode::Mr, s.power, 0.0, 16).unwrap();
        let g = effective_gains(&comm, &layout, Some(&cp), &st.sp, 16);
        for row in 0..16 {
            let f = g.comm[(0, 0, row)];
            assert!(f.re > 0.0 && f.im.abs() < 1e-12 * f.re);
        }
    }

    #[test]
    fn ap_without_targets_is_noise() {
        let st = setup(scenario(16, 2, vec![]), &[0, 1], 4);
        let tx = assemble_tx(Some(&st.cp), &st.sp, &st.symbols, &st.bank, 0.5, st.s.power).unwrap();
        let ch = build_sensing_channel(&st.s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rx = ap_receive(&tx, &st.layout, &ch, 2, 3, 1e-12, &st.s.grid, &mut rng);
        assert!(rx.sensing.iter().all(|a| a.iter().all(|v| v.norm() == 0.0)));
        assert!(rx.comm.iter().all(|v| v.norm() == 0.0));
        assert_eq!(rx.total(), rx.noise);
    }

    #[test]
    fn ap_sensing_only_matches_closed_form() {
        let st = setup(scenario(16, 2, vec![target(0.3, -1.7)]), &[0, 1], 6);
        let tx = assemble_tx(Some(&st.cp), &st.sp, &st.symbols, &st.bank, 0.0, st.s.power).unwrap();
        let ch = build_sensing_channel(&st.s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rx = ap_receive(&tx, &st.layout, &ch, 2, 3, 0.0, &st.s.grid, &mut rng);
        let total = rx.total();
        for row in 0..16 {
            for k in 0..2 {
                let mut want = [C64::default(); 3];
                for (i, &n) in st.layout.tx.iter().enumerate() {
                    let h = ch.matrix(n, 2, &st.s.grid, row);
                    let x = st.bank.waveforms[i].ft_grid[(row, k)] * st.s.power.sqrt();
                    for a in 0..3 {
                        for b in 0..3 {
                            want[a] += h[(a, b)] * st.sp.vectors[i][b] * x;
                        }
                    }
                }
                for a in 0..3 {
                    assert!((total[(row, k, a)] - want[a]).norm() < 1e-10 * want[a].norm().max(1e-300));
                }
            }
        }
    }

    #[test]
    fn extraction_single_target_peak() {
        // on-grid monostatic delay so the peak is exactly one tap
        let grid = GridConfig::new(32, 4, 100e6, 0.0).unwrap();
        let r = 6.0 * grid.delay_resolution * SPEED_OF_LIGHT / 2.0;
        let mut s = scenario(32, 4, vec![]);
        s.aps[0] = AccessPoint::new(Point::new(0.0, -2.0 - r), PI / 2.0, 3, F0);
        s.targets = vec![target(0.0, -2.0)];
        let st = setup(s, &[0, 1], 7);
        let tx = assemble_tx(None, &st.sp, &[], &st.bank, 0.0, st.s.power).unwrap();
        let ch = build_sensing_channel(&st.s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rx = ap_receive(&tx, &st.layout, &ch, 0, 3, 0.0, &st.s.grid, &mut rng);
        let cirs = extract_cir(&rx, &st.layout, &st.bank, &st.s.grid);
        let h = &cirs[0].signal;
        let e = &ch.echoes(0, 0)[0];
        let tap = st.s.grid.delay_row(st.s.grid.delay_tap(e.delay));
        assert_eq!(tap, 6);
        let mk = 128.0;
        let scalar = st.s.power.sqrt() * mk * e.tx_gain(&st.sp.vectors[0]) * e.beta;
        for a in 0..3 {
            let want = scalar * e.rx_steering[a];
            assert!((h[(tap, 0, a)] - want).norm() < 1e-6 * want.norm());
        }
        let peak = h
            .indexed_iter()
            .max_by(|x, y| x.1.norm().partial_cmp(&y.1.norm()).unwrap())
            .unwrap()
            .0;
        assert_eq!((peak.0, peak.1), (6, 0));
    }

    #[test]
    fn extraction_of_noise_has_expected_variance() {
        let s = scenario(32, 4, vec![]);
        let st = setup(s, &[0, 1], 8);
        let var = 2.0;
        let mut acc = 0.0;
        let mut count = 0.0;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let noise = complex_noise((32, 4, 1), var, &mut rng);
            let c = extract_single(&noise, &st.bank.waveforms[1].dd_grid, &st.s.grid);
            acc += c.iter().map(|v| v.norm_sqr()).sum::<f64>();
            count += c.len() as f64;
        }
        let est = acc / count;
        assert!((est / (128.0 * var) - 1.0).abs() < 0.1, "{est}");
    }

    #[test]
    fn k1_zero_doppler_is_delay_correlation() {
        let s = scenario(16, 1, vec![]);
        let st = setup(s, &[0, 1], 9);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = complex_noise((16, 1, 1), 1.0, &mut rng);
        let c = extract_single(&x, &st.bank.waveforms[0].dd_grid, &st.s.grid);
        let xdd = ft_to_dd(&x.index_axis(Axis(2), 0).to_owned(), &st.s.grid).unwrap();
        let d =
            crate::grid::periodic_xcorr(&st.bank.waveforms[0].delay_seq, xdd.column(0).as_slice().unwrap()).unwrap();
        for l in 0..16 {
            assert!((c[(l, 0, 0)] - d[l]).norm() < 1e-12);
        }
    }

    fn cross_talk(st: &Setup, bank: &WaveformBank) -> Vec<f64> {
        let tx = assemble_tx(None, &st.sp, &[], bank, 0.0, st.s.power).unwrap();
        let ch = build_sensing_channel(&st.s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rx = ap_receive(&tx, &st.layout, &ch, 2, 3, 0.0, &st.s.grid, &mut rng);
        extract_cir(&rx, &st.layout, bank, &st.s.grid)
            .iter()
            .map(|c| {
                let tap = st.s.grid.delay_row(st.s.grid.delay_tap(ch.echoes(c.tx, 2)[0].delay));
                let sig: f64 = (0..3).map(|a| c.signal[(tap, 0, a)].norm_sqr()).sum();
                let int: f64 = (0..3).map(|a| c.sensing_int[(tap, 0, a)].norm_sqr()).sum();
                int / sig
            })
            .collect()
    }

    #[test]
    fn designed_waveforms_cancel_other_transmitters() {
        // the lag support covers every bistatic delay difference, so only the
        // off-grid leakage of the other transmitter remains at the target tap
        let s = scenario(128, 2, vec![target(0.4, -1.6)]);
        let st = setup(s, &[0, 1], 10);
        let support = lag_support(&st.s, &[0, 1], &[2], 1).unwrap();
        let designed = WaveformBank::design(2, &st.s.grid, support.clone(), 3).unwrap();
        let random = WaveformBank::pseudo_random(2, &st.s.grid, support, 3).unwrap();
        let d = cross_talk(&st, &designed);
        let r = cross_talk(&st, &random);
        for (d, r) in d.iter().zip(&r) {
            assert!(*d < 1e-3, "{d}");
            assert!(*d < 0.1 * r, "{d} vs {r}");
        }
    }

    #[test]
    fn extraction_is_linear() {
        let s = scenario(16, 2, vec![target(0.4, -1.6), target(-1.0, -3.0)]);
        let st = setup(s, &[0, 1, 2], 11);
        let tx = assemble_tx(Some(&st.cp), &st.sp, &st.symbols, &st.bank, 0.3, st.s.power).unwrap();
        let ch = build_sensing_channel(&st.s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rx = ap_receive(&tx, &st.layout, &ch, 1, 3, 1e-14, &st.s.grid, &mut rng);
        let cirs = extract_cir(&rx, &st.layout, &st.bank, &st.s.grid);
        for c in &cirs {
            let i = st.layout.tx.iter().position(|&n| n == c.tx).unwrap();
            let direct = extract_single(&rx.total(), &st.bank.waveforms[i].dd_grid, &st.s.grid);
            let diff = &direct - &c.total();
            let scale = direct.iter().map(|v| v.norm()).fold(0.0, f64::max);
            assert!(diff.iter().all(|v| v.norm() < 1e-10 * scale));
        }
    }
}
