//! Communication, sensing and fictitious ROI channels.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Uniform};
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::{GridConfig, C64};
use crate::scenario::{AccessPoint, Point, RegionOfInterest, Scenario, SPEED_OF_LIGHT};

/// NLOS paths are attenuated relative to LOS by `X ~ U[lo, hi]` dB.
pub const NLOS_ATTENUATION_DB: (f64, f64) = (6.0, 12.0);

#[derive(Debug, Clone)]
pub struct Path {
    pub gain: C64,
    pub steering: Vec<C64>,
    pub delay: f64,
}

/// `e^{-j 2 pi (f0 + m df) tau}` over the FT rows.
pub fn delay_ramp(grid: &GridConfig, f0: f64, delay: f64) -> Vec<C64> {
    let carrier = (f0 * delay).rem_euclid(1.0);
    (0..grid.subcarriers)
        .map(|row| {
            let m = grid.subcarrier_index(row) as f64;
            let cycles = carrier + (m * grid.subcarrier_spacing * delay).rem_euclid(1.0);
            C64::from_polar(1.0, -2.0 * PI * cycles)
        })
        .collect()
}

/// Per-(AP, UE) frequency response `h_nq[m]`, one `M x L` array per link.
#[derive(Debug, Clone)]
pub struct CommChannel {
    n_aps: usize,
    n_ues: usize,
    paths: Vec<Vec<Path>>,
    taps: Vec<Array2<C64>>,
}

impl CommChannel {
    pub fn n_aps(&self) -> usize {
        self.n_aps
    }

    pub fn n_ues(&self) -> usize {
        self.n_ues
    }

    pub fn paths(&self, n: usize, q: usize) -> &[Path] {
        &self.paths[n * self.n_ues + q]
    }

    /// `M x L` array: row = FT subcarrier row, column = antenna.
    pub fn response(&self, n: usize, q: usize) -> &Array2<C64> {
        &self.taps[n * self.n_ues + q]
    }

    #[cfg(test)]
    pub(crate) fn response_mut(&mut self, n: usize, q: usize) -> &mut Array2<C64> {
        &mut self.taps[n * self.n_ues + q]
    }
}

/// Geometric LOS path plus `clusters - 1` point scatterers per UE.
pub fn build_comm_channel<R: Rng + ?Sized>(scenario: &Scenario, clusters: usize, rng: &mut R) -> Result<CommChannel> {
    if clusters == 0 {
        return Err(Error::Config("communication channel needs C >= 1".into()));
    }
    let lam = scenario.wavelength();
    let phase = Uniform::new(0.0, 2.0 * PI).expect("valid range");
    let atten = Uniform::new_inclusive(NLOS_ATTENUATION_DB.0, NLOS_ATTENUATION_DB.1).expect("valid range");
    let ax = Uniform::new_inclusive(scenario.area.min.x, scenario.area.max.x)
        .map_err(|e| Error::Config(format!("deployment area: {e}")))?;
    let ay = Uniform::new_inclusive(scenario.area.min.y, scenario.area.max.y)
        .map_err(|e| Error::Config(format!("deployment area: {e}")))?;

    let n_aps = scenario.aps.len();
    let n_ues = scenario.ues.len();
    let scatterers: Vec<Vec<Point>> = (0..n_ues)
        .map(|_| {
            (1..clusters)
                .map(|_| Point::new(ax.sample(rng), ay.sample(rng)))
                .collect()
        })
        .collect();

    let mut paths = Vec::with_capacity(n_aps * n_ues);
    let mut taps = Vec::with_capacity(n_aps * n_ues);
    for ap in &scenario.aps {
        for (q, ue) in scenario.ues.iter().enumerate() {
            let range = ap.position.distance(&ue.position);
            if range == 0.0 {
                return Err(Error::Geometry(format!("UE {q} coincides with an AP")));
            }
            let los = lam / (4.0 * PI * range);
            let mut link = vec![Path {
                gain: C64::from_polar(los, phase.sample(rng)),
                steering: ap.steering_vector(&ue.position, scenario.f0)?,
                delay: range / SPEED_OF_LIGHT,
            }];
            for s in &scatterers[q] {
                let x_db: f64 = atten.sample(rng);
                let amp = los * 10f64.powf(-x_db / 20.0);
                let d = s.distance(&ap.position) + s.distance(&ue.position);
                // a scatterer sitting on the AP has no defined direction; skip it
                let Ok(steering) = ap.steering_vector(s, scenario.f0) else {
                    continue;
                };
                link.push(Path {
                    gain: C64::from_polar(amp, phase.sample(rng)),
                    steering,
                    delay: d / SPEED_OF_LIGHT,
                });
            }
            taps.push(link_response(&link, &scenario.grid, scenario.f0, ap.antennas));
            paths.push(link);
        }
    }
    Ok(CommChannel {
        n_aps,
        n_ues,
        paths,
        taps,
    })
}

fn link_response(paths: &[Path], grid: &GridConfig, f0: f64, antennas: usize) -> Array2<C64> {
    let mut h = Array2::zeros((grid.subcarriers, antennas));
    for p in paths {
        let ramp = delay_ramp(grid, f0, p.delay);
        for (row, r) in ramp.iter().enumerate() {
            let c = p.gain * r;
            for (u, a) in p.steering.iter().enumerate() {
                h[(row, u)] += c * a;
            }
        }
    }
    h
}

/// Point-target reflection seen by one (Tx, Rx) pair.
#[derive(Debug, Clone)]
pub struct Echo {
    pub beta: C64,
    pub tx_steering: Vec<C64>,
    pub rx_steering: Vec<C64>,
    pub delay: f64,
}

impl Echo {
    /// `a_tx^T v`.
    pub fn tx_gain(&self, v: &[C64]) -> C64 {
        self.tx_steering.iter().zip(v).map(|(a, x)| a * x).sum()
    }
}

/// `H_nr[m] = sum_u beta a(theta_r) a^T(theta_n) e^{-j2pi(f0 + m df) tau}`,
/// kept as echo lists for every ordered AP pair (monostatic included).
#[derive(Debug, Clone)]
pub struct SensingChannel {
    n_aps: usize,
    echoes: Vec<Vec<Echo>>,
    f0: f64,
}

impl SensingChannel {
    pub fn n_aps(&self) -> usize {
        self.n_aps
    }

    pub fn echoes(&self, tx: usize, rx: usize) -> &[Echo] {
        &self.echoes[tx * self.n_aps + rx]
    }

    pub fn carrier(&self) -> f64 {
        self.f0
    }

    /// Dense `L_rx x L_tx` matrix at FT row `row`.
    pub fn matrix(&self, tx: usize, rx: usize, grid: &GridConfig, row: usize) -> Array2<C64> {
        let echoes = self.echoes(tx, rx);
        let (lr, lt) = match echoes.first() {
            Some(e) => (e.rx_steering.len(), e.tx_steering.len()),
            None => return Array2::zeros((0, 0)),
        };
        let m = grid.subcarrier_index(row) as f64;
        let mut h = Array2::zeros((lr, lt));
        for e in echoes {
            let c = e.beta * C64::from_polar(1.0, -2.0 * PI * (self.f0 + m * grid.subcarrier_spacing) * e.delay);
            for i in 0..lr {
                for j in 0..lt {
                    h[(i, j)] += c * e.rx_steering[i] * e.tx_steering[j];
                }
            }
        }
        h
    }

    /// `H~_nr[l] = df sum_m H_nr[m] e^{j 2 pi m l / M}` for every delay tap.
    pub fn dd_matrices(&self, tx: usize, rx: usize, grid: &GridConfig) -> Vec<Array2<C64>> {
        let echoes = self.echoes(tx, rx);
        let m = grid.subcarriers;
        let (lr, lt) = echoes
            .first()
            .map(|e| (e.rx_steering.len(), e.tx_steering.len()))
            .unwrap_or((0, 0));
        let mut out = vec![Array2::zeros((lr, lt)); m];
        let inv = FftPlanner::new().plan_fft_inverse(m);
        for e in echoes {
            let mut ramp = delay_ramp(grid, self.f0, e.delay);
            inv.process(&mut ramp);
            for (l, r) in ramp.iter().enumerate() {
                let c = e.beta * r * grid.subcarrier_spacing;
                for i in 0..lr {
                    for j in 0..lt {
                        out[l][(i, j)] += c * e.rx_steering[i] * e.tx_steering[j];
                    }
                }
            }
        }
        out
    }
}

/// Bistatic amplitude `reflectivity (lambda0/4pi)^2 / (R_tx R_rx)` with the
/// target's pair-independent phase.
pub fn echo_amplitude(
    scenario: &Scenario,
    tx: &AccessPoint,
    rx: &AccessPoint,
    target: &crate::scenario::Target,
) -> C64 {
    let lam = scenario.wavelength();
    let rt = tx.position.distance(&target.position);
    let rr = rx.position.distance(&target.position);
    let mag = target.reflectivity(scenario.f0) * (lam / (4.0 * PI)).powi(2) / (rt * rr);
    C64::from_polar(mag, target.phase)
}

/// Targets outside the ROI are dropped.
pub fn build_sensing_channel(scenario: &Scenario) -> Result<SensingChannel> {
    let n = scenario.aps.len();
    let targets: Vec<_> = scenario
        .targets
        .iter()
        .filter(|t| scenario.roi.contains(&t.position))
        .collect();
    if targets.len() < scenario.targets.len() {
        log::warn!(
            "{} target(s) outside the ROI are not synthesized",
            scenario.targets.len() - targets.len()
        );
    }
    let steer: Vec<Vec<Vec<C64>>> = scenario
        .aps
        .iter()
        .map(|ap| {
            targets
                .iter()
                .map(|t| ap.steering_vector(&t.position, scenario.f0))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut echoes = Vec::with_capacity(n * n);
    for (i, tx) in scenario.aps.iter().enumerate() {
        for (j, rx) in scenario.aps.iter().enumerate() {
            let pair = targets
                .iter()
                .enumerate()
                .map(|(u, t)| Echo {
                    beta: echo_amplitude(scenario, tx, rx, t),
                    tx_steering: steer[i][u].clone(),
                    rx_steering: steer[j][u].clone(),
                    delay: crate::scenario::bistatic_delay(tx, rx, &t.position),
                })
                .collect();
            echoes.push(pair);
        }
    }
    Ok(SensingChannel {
        n_aps: n,
        echoes,
        f0: scenario.f0,
    })
}

/// `h_n,ROI = sum_x lambda0 / (4 pi ||x - p_n||) a(theta_n(x))` for every AP.
pub fn build_roi_channel(scenario: &Scenario) -> Result<Vec<Vec<C64>>> {
    roi_channel(&scenario.aps, &scenario.roi, scenario.f0)
}

pub fn roi_channel(aps: &[AccessPoint], roi: &RegionOfInterest, f0: f64) -> Result<Vec<Vec<C64>>> {
    let pixels = roi.pixels();
    let lam = crate::scenario::wavelength(f0);
    aps.iter()
        .map(|ap| {
            let mut h = vec![C64::default(); ap.antennas];
            for x in &pixels {
                let r = ap.position.distance(x);
                let a = ap.steering_vector(x, f0)?;
                let g = lam / (4.0 * PI * r);
                for (hu, au) in h.iter_mut().zip(&a) {
                    *hu += au * g;
                }
            }
            Ok(h)
        })
        .collect()
}
