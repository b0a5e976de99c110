//! One D-ISAC snapshot end to end: channels, waveforms, precoding, UE and
//! Rx-AP signals, CIR extraction, imaging and metrics.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{build_comm_channel, build_roi_channel, build_sensing_channel, SensingChannel};
use crate::error::{Error, Result};
use crate::imaging::{backproject, fuse, Image, Interpolation};
use crate::metrics::{
    self, comm_gain_towards, comm_sinr_closed_form, comm_sinr_empirical, dmimo_snr, drn_snr, drn_snr_literal,
    sensing_sinr_closed_form, sensing_sinr_empirical, MetricReport, PairSinr, SensingLink,
};
use crate::precoding::{
    assemble_tx, build_comm_precoder, build_sensing_precoder, CommPrecoder, PrecoderMode, TxLayout,
};
use crate::receive::{ap_receive, effective_gains, extract_cir, ExtractedCir};
use crate::scenario::{Point, Scenario, Target};
use crate::waveform::{delay_support, lag_support, qam_symbols, DelaySupport, WaveformBank, WaveformKind};

/// Benchmark / operating mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Half-duplex APs split into Tx and Rx sets, `0 <= eta <= 1`.
    #[default]
    Disac,
    /// Every AP transmits data only (`eta = 1`, no Rx APs).
    Dmimo,
    /// Every AP is a full-duplex radar node (`eta = 0`, no UEs served).
    Drn,
}

/// Lags on which waveform orthogonality is enforced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orthogonality {
    /// Bistatic delays of the ROI.
    Absolute,
    /// Differences of bistatic delays between Tx APs seen by a common Rx AP.
    #[default]
    Differential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunParams {
    pub mode: Mode,
    pub precoder: PrecoderMode,
    pub waveform: WaveformKind,
    pub orthogonality: Orthogonality,
    /// Extra delay samples added on each side of every support interval.
    pub guard: usize,
    /// Multipath clusters per UE link (1 = LOS only).
    pub clusters: usize,
    pub qam_order: usize,
    /// Symbol realizations for the ensemble SE estimate.
    pub realizations: usize,
    pub interpolation: Interpolation,
    /// Include thermal noise at the Rx APs and UEs.
    pub noise: bool,
}

impl Default for RunParams {
    fn default() -> Self {
        Self {
            mode: Mode::Disac,
            precoder: PrecoderMode::Mmse,
            waveform: WaveformKind::Designed,
            orthogonality: Orthogonality::Differential,
            guard: 1,
            clusters: 1,
            qam_order: 16,
            realizations: metrics::DEFAULT_REALIZATIONS,
            interpolation: Interpolation::Nearest,
            noise: true,
        }
    }
}

/// Tx and Rx AP index sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roles {
    pub tx: Vec<usize>,
    pub rx: Vec<usize>,
}

impl Roles {
    /// Every AP not listed in `rx` transmits.
    pub fn split(n: usize, rx: &[usize]) -> Self {
        Self {
            tx: (0..n).filter(|i| !rx.contains(i)).collect(),
            rx: rx.to_vec(),
        }
    }

    pub fn for_mode(mode: Mode, n: usize, rx: &[usize]) -> Self {
        match mode {
            Mode::Disac => Self::split(n, rx),
            Mode::Dmimo => Self {
                tx: (0..n).collect(),
                rx: Vec::new(),
            },
            Mode::Drn => Self {
                tx: (0..n).collect(),
                rx: (0..n).collect(),
            },
        }
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.tx.len() * self.rx.len());
        for &n in &self.tx {
            for &r in &self.rx {
                out.push((n, r));
            }
        }
        out
    }
}

/// Support of the designed waveforms for the given roles.
pub fn waveform_support(scenario: &Scenario, roles: &Roles, params: &RunParams) -> Result<DelaySupport> {
    if roles.rx.is_empty() {
        return Ok(DelaySupport::from_samples([0]));
    }
    match params.orthogonality {
        Orthogonality::Absolute => delay_support(scenario, &roles.tx, &roles.rx, params.guard),
        Orthogonality::Differential => lag_support(scenario, &roles.tx, &roles.rx, params.guard),
    }
}

pub fn design_bank(scenario: &Scenario, roles: &Roles, params: &RunParams, seed: u64) -> Result<WaveformBank> {
    let support = waveform_support(scenario, roles, params)?;
    match params.waveform {
        WaveformKind::Designed => WaveformBank::design(roles.tx.len(), &scenario.grid, support, seed),
        WaveformKind::PseudoRandom => WaveformBank::pseudo_random(roles.tx.len(), &scenario.grid, support, seed),
    }
}

/// Which CIR terms are back-projected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageSource {
    Total,
    /// Desired echo only (noise- and interference-free SAF).
    Signal,
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub report: MetricReport,
    pub image: Option<Image>,
    pub pair_images: Vec<Image>,
    pub cirs: Vec<ExtractedCir>,
    pub eta: f64,
}

/// Effective `eta` after the mode's constraints.
pub fn effective_eta(mode: Mode, eta: f64) -> f64 {
    match mode {
        Mode::Disac => eta,
        Mode::Dmimo => 1.0,
        Mode::Drn => 0.0,
    }
}

pub fn image_pairs(
    scenario: &Scenario,
    cirs: &[ExtractedCir],
    source: ImageSource,
    interp: Interpolation,
) -> Result<Vec<Image>> {
    cirs.par_iter()
        .map(|c| {
            let h = match source {
                ImageSource::Total => c.zero_doppler(),
                ImageSource::Signal => c.signal.index_axis(ndarray::Axis(1), 0).to_owned(),
            };
            let mut img = backproject(
                h.view(),
                &scenario.aps[c.tx],
                &scenario.aps[c.rx],
                &scenario.roi,
                &scenario.grid,
                scenario.f0,
                interp,
            )?;
            img.pairs.push((c.tx, c.rx));
            Ok(img)
        })
        .collect()
}

/// Runs one snapshot. `scenario.eta` is ignored in favor of `eta` (after mode
/// constraints); `rng` drives the channel, symbols and noise.
pub fn simulate<R: Rng + ?Sized>(
    scenario: &Scenario,
    roles: &Roles,
    bank: &WaveformBank,
    params: &RunParams,
    eta: f64,
    rng: &mut R,
) -> Result<Snapshot> {
    scenario.validate()?;
    let eta = effective_eta(params.mode, eta);
    if roles.tx.is_empty() {
        return Err(Error::Config("at least one Tx AP is required".into()));
    }
    if roles.tx.iter().chain(&roles.rx).any(|&i| i >= scenario.aps.len()) {
        return Err(Error::Config("AP index out of range".into()));
    }
    if params.mode == Mode::Disac && roles.tx.iter().any(|n| roles.rx.contains(n)) {
        return Err(Error::Constraint(
            "an AP cannot be both Tx and Rx in half-duplex mode".into(),
        ));
    }
    if bank.len() < roles.tx.len() {
        return Err(Error::dims(format!("{} waveforms", roles.tx.len()), bank.len()));
    }
    let grid = &scenario.grid;
    let noise_var = if params.noise { scenario.noise_variance() } else { 0.0 };
    let layout = TxLayout::new(&roles.tx, |n| scenario.aps[n].antennas);
    let serve = params.mode != Mode::Drn && !scenario.ues.is_empty();
    let mut report = MetricReport::default();

    let sensing_pre = build_sensing_precoder(&build_roi_channel(scenario)?, &layout)?;
    let mut comm_pre: Option<CommPrecoder> = None;
    let mut symbols = Vec::new();
    if serve {
        let channel = build_comm_channel(scenario, params.clusters, rng)?;
        let cp = build_comm_precoder(
            &channel,
            &layout,
            params.precoder,
            scenario.power,
            scenario.noise_variance(),
            grid.subcarriers,
        )?;
        let gains = effective_gains(&channel, &layout, Some(&cp), &sensing_pre, grid.subcarriers);
        let sinr = comm_sinr_empirical(
            &gains,
            bank,
            eta,
            scenario.power,
            noise_var,
            grid,
            params.realizations,
            params.qam_order,
            rng,
        )?;
        report.se_per_ue = metrics::se_from_sinr(&sinr);
        report.sinr_com = metrics::sinr_nested(&sinr);
        report.se_closed_form =
            metrics::se_per_subcarrier(&comm_sinr_closed_form(&gains, eta, scenario.power, noise_var));
        let snr = dmimo_snr(&channel, scenario.power, scenario.noise_variance(), grid.subcarriers);
        report.se_bound_dmimo = metrics::se_per_subcarrier(&snr);
        report.snr_dmimo = snr.outer_iter().map(|r| r.mean().unwrap_or(0.0)).collect();
        symbols = qam_symbols(scenario.ues.len(), grid, params.qam_order, rng)?;
        comm_pre = Some(cp);
    }

    let mut snap = Snapshot {
        report,
        image: None,
        pair_images: Vec::new(),
        cirs: Vec::new(),
        eta,
    };
    if roles.rx.is_empty() {
        return Ok(snap);
    }

    let tx = assemble_tx(comm_pre.as_ref(), &sensing_pre, &symbols, bank, eta, scenario.power)?;
    let channel = build_sensing_channel(scenario)?;
    // noise draws are taken sequentially so results do not depend on threads
    let receptions: Vec<_> = roles
        .rx
        .iter()
        .map(|&r| {
            ap_receive(
                &tx,
                &layout,
                &channel,
                r,
                scenario.aps[r].antennas,
                noise_var,
                grid,
                rng,
            )
        })
        .collect();
    let cirs: Vec<ExtractedCir> = receptions
        .par_iter()
        .map(|rx| extract_cir(rx, &layout, bank, grid))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();

    snap.report.sinr_sen = sensing_metrics(
        scenario,
        &channel,
        &layout,
        comm_pre.as_ref(),
        &sensing_pre.vectors,
        &cirs,
        params,
        eta,
        noise_var,
    )?;
    snap.report.sinr_sen_avg_db = metrics::average_sinr_db(&snap.report.sinr_sen);

    let pair_images = image_pairs(scenario, &cirs, ImageSource::Total, params.interpolation)?;
    let image = fuse(&pair_images)?;
    snap.report.entropy = metrics::entropy(&image).ok();
    snap.image = Some(image);
    snap.pair_images = pair_images;
    snap.cirs = cirs;
    Ok(snap)
}

#[allow(clippy::too_many_arguments)]
fn sensing_metrics(
    scenario: &Scenario,
    channel: &SensingChannel,
    layout: &TxLayout,
    comm: Option<&CommPrecoder>,
    sensing: &[Vec<crate::grid::C64>],
    cirs: &[ExtractedCir],
    params: &RunParams,
    eta: f64,
    noise_var: f64,
) -> Result<Vec<PairSinr>> {
    let grid = &scenario.grid;
    let orthogonal = params.waveform == WaveformKind::Designed;
    cirs.iter()
        .map(|c| {
            let echoes = channel.echoes(c.tx, c.rx);
            let l_rx = scenario.aps[c.rx].antennas;
            let l_tx = scenario.aps[c.tx].antennas;
            let Some(echo) = echoes.first() else {
                return Ok(PairSinr {
                    tx: c.tx,
                    rx: c.rx,
                    empirical: 0.0,
                    closed_form: None,
                    bound_drn: 0.0,
                    bound_drn_literal: 0.0,
                    peak_identified: false,
                });
            };
            let tap = grid.delay_row(grid.delay_tap(echo.delay));
            let empirical = sensing_sinr_empirical(c, tap, 0, &echo.rx_steering);
            let mut link = SensingLink {
                beta_sq: Vec::new(),
                sensing_gain: Vec::new(),
                comm_gain: Vec::new(),
            };
            for (i, &n) in layout.tx.iter().enumerate() {
                let e = &channel.echoes(n, c.rx)[0];
                link.beta_sq.push(e.beta.norm_sqr());
                link.sensing_gain.push(e.tx_gain(&sensing[i]).norm_sqr());
                link.comm_gain
                    .push(comm.map(|p| comm_gain_towards(p, i, &e.tx_steering)).unwrap_or(0.0));
            }
            let i = layout.tx.iter().position(|&n| n == c.tx).expect("pair Tx in layout");
            let nv = scenario.noise_variance();
            Ok(PairSinr {
                tx: c.tx,
                rx: c.rx,
                empirical,
                closed_form: Some(sensing_sinr_closed_form(
                    &link,
                    i,
                    eta,
                    scenario.power,
                    grid,
                    l_rx,
                    if noise_var > 0.0 { noise_var } else { 0.0 },
                    orthogonal,
                )),
                bound_drn: drn_snr(echo.beta.norm_sqr(), scenario.power, grid, l_tx, l_rx, nv),
                bound_drn_literal: drn_snr_literal(echo.beta.norm_sqr(), scenario.power, grid, l_rx, nv),
                peak_identified: true,
            })
        })
        .collect()
}

/// Single unit-RCS target at the ROI center.
pub fn center_target(scenario: &Scenario) -> Target {
    Target {
        position: scenario.roi.center,
        rcs: 1.0,
        phase: 0.0,
    }
}

/// Coherent SAF: noiseless image of a single target at the ROI center for the
/// given roles. `source` selects the total CIR or its desired term only.
pub fn saf(
    scenario: &Scenario,
    roles: &Roles,
    bank: &WaveformBank,
    params: &RunParams,
    eta: f64,
    source: ImageSource,
    seed: u64,
) -> Result<Image> {
    let s = scenario.with_targets(vec![center_target(scenario)]);
    let p = RunParams {
        noise: false,
        realizations: 1,
        ..params.clone()
    };
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
    let snap = simulate(&s, roles, bank, &p, eta, &mut rng)?;
    match source {
        ImageSource::Total => snap.image.ok_or_else(|| Error::Config("no Rx APs".into())),
        ImageSource::Signal => fuse(&image_pairs(&s, &snap.cirs, ImageSource::Signal, p.interpolation)?),
    }
}

/// Uniform points in the area outside the ROI.
pub fn random_ue_positions<R: Rng + ?Sized>(scenario: &Scenario, count: usize, rng: &mut R) -> Vec<Point> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let p = Point::new(
            rng.random_range(scenario.area.min.x..=scenario.area.max.x),
            rng.random_range(scenario.area.min.y..=scenario.area.max.y),
        );
        if !scenario.roi.contains(&p) && scenario.aps.iter().all(|a| a.position.distance(&p) > 1e-3) {
            out.push(p);
        }
    }
    out
}

/// Uniform targets inside the ROI with uniform phase.
pub fn random_targets<R: Rng + ?Sized>(scenario: &Scenario, count: usize, rcs: f64, rng: &mut R) -> Vec<Target> {
    let roi = &scenario.roi;
    (0..count)
        .map(|_| Target {
            position: Point::new(
                roi.x_min() + rng.random::<f64>() * roi.width,
                roi.y_min() + rng.random::<f64>() * roi.height,
            ),
            rcs,
            phase: rng.random::<f64>() * std::f64::consts::TAU,
        })
        .collect()
}
