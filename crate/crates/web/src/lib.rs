//! Browser bindings. Every export takes plain numbers/strings and returns a
//! JSON string; failures come back as `{"error": "..."}`.

use disac::experiment::{substream, ExperimentConfig, ScenarioConfig};
use disac::grid::periodic_xcorr;
use disac::metrics::{average_sinr_db, entropy, mean, to_db};
use disac::pipeline::{design_bank, simulate, Roles, RunParams};
use disac::scenario::Scenario;
use disac::waveform::{DelaySupport, WaveformBank, WaveformKind};
use disac::Result;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Dynamic range of the rendered image.
const FLOOR_DB: f64 = -40.0;

fn respond(r: Result<Value>) -> String {
    match r {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e.to_string() }).to_string(),
    }
}

fn parse_rx(rx: &str, n: usize) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for tok in rx
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
    {
        let i: usize = tok
            .parse()
            .map_err(|_| disac::Error::Config(format!("bad AP index {tok:?}")))?;
        if i >= n {
            return Err(disac::Error::Config(format!("AP {i} out of range (N = {n})")));
        }
        if !out.contains(&i) {
            out.push(i);
        }
    }
    if out.is_empty() || out.len() == n {
        return Err(disac::Error::Config("need at least one Rx and one Tx AP".into()));
    }
    out.sort_unstable();
    Ok(out)
}

fn scenario_config(aps: usize, antennas: usize, subcarriers: usize, bandwidth_mhz: f64, pitch: f64) -> ScenarioConfig {
    ScenarioConfig {
        aps,
        antennas,
        subcarriers,
        symbols: 1,
        bandwidth_hz: bandwidth_mhz * 1e6,
        roi: disac::experiment::RoiConfig {
            pitch,
            ..Default::default()
        },
        ..Default::default()
    }
}

fn params(pseudo_random: bool) -> RunParams {
    RunParams {
        waveform: if pseudo_random {
            WaveformKind::PseudoRandom
        } else {
            WaveformKind::Designed
        },
        realizations: 8,
        ..Default::default()
    }
}

fn geometry(s: &Scenario) -> Value {
    json!({
        "aps": s.aps.iter().map(|a| [a.position.x, a.position.y]).collect::<Vec<_>>(),
        "ues": s.ues.iter().map(|u| [u.position.x, u.position.y]).collect::<Vec<_>>(),
        "targets": s.targets.iter().map(|t| [t.position.x, t.position.y]).collect::<Vec<_>>(),
        "area": [s.area.min.x, s.area.min.y, s.area.max.x, s.area.max.y],
    })
}

/// One snapshot: the fused image (dB, peak-normalized, row-major from the
/// ROI's lower-left corner) with its entropy, SE and sensing SINR.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn snapshot(
    aps: usize,
    antennas: usize,
    subcarriers: usize,
    bandwidth_mhz: f64,
    pitch: f64,
    rx: &str,
    eta: f64,
    pseudo_random: bool,
    seed: u32,
) -> String {
    respond((|| {
        let sc = scenario_config(aps, antennas, subcarriers, bandwidth_mhz, pitch);
        let base = sc.base()?;
        let roles = Roles::split(aps, &parse_rx(rx, aps)?);
        let p = params(pseudo_random);
        let bank = design_bank(&base, &roles, &p, seed as u64)?;
        let mut rng = substream(seed as u64, 0, 0);
        let s = sc.populate(&base, &mut rng);
        let snap = simulate(&s, &roles, &bank, &p, eta.clamp(0.0, 1.0), &mut rng)?;
        let img = snap.image.ok_or_else(|| disac::Error::Config("no image".into()))?;
        let (nx, ny) = img.shape();
        let inten = img.intensity();
        let peak = inten.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let db: Vec<f32> = inten.iter().map(|v| to_db(v / peak).max(FLOOR_DB) as f32).collect();
        let r = &s.roi;
        Ok(json!({
            "nx": nx,
            "ny": ny,
            "roi": [r.center.x - r.width / 2.0, r.center.y - r.height / 2.0, r.width, r.height],
            "db": db,
            "entropy": entropy(&img)?,
            "se": snap.report.se_per_ue,
            "sinr_sen_db": average_sinr_db(&snap.report.sinr_sen),
            "tx": roles.tx,
            "rx": roles.rx,
            "geometry": geometry(&s),
        }))
    })())
}

/// SE and image entropy versus `eta` for fixed roles, averaged over
/// `replicates` random UE placements (common across `eta`).
#[wasm_bindgen]
pub fn eta_sweep(
    aps: usize,
    antennas: usize,
    subcarriers: usize,
    rx: &str,
    points: usize,
    replicates: usize,
) -> String {
    respond((|| {
        let cfg = ExperimentConfig {
            scenario: scenario_config(aps, antennas, subcarriers, 100.0, 0.1),
            ..Default::default()
        };
        let base = cfg.scenario.base()?;
        let roles = Roles::split(aps, &parse_rx(rx, aps)?);
        let p = params(false);
        let bank = design_bank(&base, &roles, &p, cfg.seed)?;
        let points = points.clamp(2, 21);
        let etas: Vec<f64> = (0..points).map(|i| i as f64 / (points - 1) as f64).collect();
        let mut se = vec![Vec::new(); points];
        let mut ent = vec![Vec::new(); points];
        for rep in 0..replicates.max(1) {
            for (i, &eta) in etas.iter().enumerate() {
                let mut rng = substream(cfg.seed, 0, rep);
                let s = cfg.scenario.populate(&base, &mut rng);
                let snap = simulate(&s, &roles, &bank, &p, eta, &mut rng)?;
                if let Some(v) = snap.report.se_mean() {
                    se[i].push(v);
                }
                if let Some(v) = snap.report.entropy {
                    ent[i].push(v);
                }
            }
        }
        Ok(json!({
            "eta": etas,
            "se": se.iter().map(|v| mean(v)).collect::<Vec<_>>(),
            "entropy": ent.iter().map(|v| mean(v)).collect::<Vec<_>>(),
        }))
    })())
}

/// Periodic auto- and cross-correlation magnitude (dB re `M`) of the first
/// two sequences of a bank built over delay support `0..=support`.
#[wasm_bindgen]
pub fn correlation(sequences: usize, m: usize, support: usize, pseudo_random: bool, seed: u32) -> String {
    respond((|| {
        let grid = disac::GridConfig::new(m, 1, 100e6, 0.0)?;
        let sup = DelaySupport::from_samples(0..=support).symmetric(m);
        let n = sequences.max(2);
        let bank = if pseudo_random {
            WaveformBank::pseudo_random(n, &grid, sup, seed as u64)?
        } else {
            WaveformBank::design(n, &grid, sup, seed as u64)?
        };
        let a = &bank.waveforms[0].delay_seq;
        let b = &bank.waveforms[1].delay_seq;
        let db = |v: Vec<disac::C64>| -> Vec<f64> {
            v.iter()
                .map(|c| to_db(c.norm_sqr() / (m * m) as f64).max(-200.0))
                .collect()
        };
        Ok(json!({
            "m": m,
            "support": bank.support.samples,
            "auto_db": db(periodic_xcorr(a, a)?),
            "cross_db": db(periodic_xcorr(a, b)?),
            "max_cross_on_support": bank.max_cross_correlation() / m as f64,
            "bound": m / bank.support.len(),
        }))
    })())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rx_parsing() {
        assert_eq!(parse_rx("4, 0", 9).unwrap(), vec![0, 4]);
        assert!(parse_rx("9", 9).is_err());
        assert!(parse_rx("", 9).is_err());
        assert!(parse_rx("0,1,2,3", 4).is_err());
    }
}
