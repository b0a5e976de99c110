//! Configuration files, parameter sweeps and result emission.
//!
//! Units in configuration files: Hz, meters, dBm (per-subcarrier power at
//! `reference_subcarriers`), dBm/Hz (noise PSD), m^2 (RCS).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{dbm_to_watt, GridConfig};
use crate::imaging::Image;
use crate::metrics::{self, MetricReport};
use crate::pipeline::{self, design_bank, simulate, Mode, Roles, RunParams};
use crate::scenario::{lattice_aps, Area, Point, RegionOfInterest, Scenario, Target, UserEquipment};
use crate::selection::{self, random_baseline, saf_cache, solve_exhaustive, solve_ga, GaConfig};
use crate::waveform::WaveformBank;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoiConfig {
    pub center: [f64; 2],
    pub width: f64,
    pub height: f64,
    pub pitch: f64,
}

impl Default for RoiConfig {
    fn default() -> Self {
        Self {
            center: [-5.0, -5.0],
            width: 5.0,
            height: 5.0,
            pitch: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetConfig {
    pub placement: Placement,
    /// Number of random targets (`placement = "random"`).
    pub count: usize,
    /// Radar cross section in m^2.
    pub rcs: f64,
    /// Explicit positions; override `placement`.
    pub positions: Option<Vec<[f64; 2]>>,
}

/// Where targets are placed in each replicate. The phase is always random.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    /// One target at the ROI center (the SAF scene).
    #[default]
    Center,
    /// `count` targets uniform in the ROI.
    Random,
}

impl Default for TargetConfig {
    fn default() -> Self {
        Self {
            placement: Placement::Center,
            count: 1,
            rcs: 10.0,
            positions: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// APs on a square lattice spanning the area.
    pub aps: usize,
    pub antennas: usize,
    pub area_half_side: f64,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub subcarriers: usize,
    pub symbols: usize,
    pub cp_fraction: f64,
    pub power_dbm: f64,
    pub reference_subcarriers: usize,
    pub noise_psd_dbm_hz: f64,
    pub ues: usize,
    /// Multipath clusters per UE link (1 = LOS).
    pub clusters: usize,
    pub roi: RoiConfig,
    pub targets: TargetConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            aps: 9,
            antennas: 4,
            area_half_side: 10.0,
            carrier_hz: 10e9,
            bandwidth_hz: 100e6,
            subcarriers: 512,
            symbols: 4,
            cp_fraction: 0.0,
            power_dbm: -15.0,
            reference_subcarriers: 128,
            noise_psd_dbm_hz: -173.0,
            ues: 2,
            clusters: 1,
            roi: RoiConfig::default(),
            targets: TargetConfig::default(),
        }
    }
}

impl ScenarioConfig {
    /// Per-subcarrier power in W: constant PSD at fixed bandwidth.
    pub fn power_watt(&self, subcarriers: usize) -> f64 {
        dbm_to_watt(self.power_dbm) * self.reference_subcarriers as f64 / subcarriers as f64
    }

    pub fn area(&self) -> Area {
        Area::square(self.area_half_side)
    }

    pub fn roi(&self) -> Result<RegionOfInterest> {
        let r = &self.roi;
        RegionOfInterest::new(Point::new(r.center[0], r.center[1]), r.width, r.height, r.pitch)
    }

    /// Scenario without UEs or targets.
    pub fn base(&self) -> Result<Scenario> {
        let grid = GridConfig::new(self.subcarriers, self.symbols, self.bandwidth_hz, self.cp_fraction)?;
        let s = Scenario {
            aps: lattice_aps(self.aps, self.antennas, &self.area(), self.carrier_hz)?,
            ues: Vec::new(),
            roi: self.roi()?,
            targets: Vec::new(),
            area: self.area(),
            f0: self.carrier_hz,
            noise_psd: self.noise_psd_dbm_hz,
            power: self.power_watt(self.subcarriers),
            grid,
            eta: 0.0,
        };
        s.validate()?;
        Ok(s)
    }

    /// Fills UEs and targets for one replicate.
    pub fn populate(&self, base: &Scenario, rng: &mut ChaCha8Rng) -> Scenario {
        let mut s = base.clone();
        s.ues = pipeline::random_ue_positions(&s, self.ues, rng)
            .into_iter()
            .map(|position| UserEquipment { position })
            .collect();
        let center = [s.roi.center.x, s.roi.center.y];
        let fixed = match (&self.targets.positions, self.targets.placement) {
            (Some(ps), _) => Some(ps.clone()),
            (None, Placement::Center) => Some(vec![center]),
            (None, Placement::Random) => None,
        };
        s.targets = match fixed {
            Some(ps) => ps
                .iter()
                .map(|p| Target {
                    position: Point::new(p[0], p[1]),
                    rcs: self.targets.rcs,
                    phase: rand::Rng::random::<f64>(rng) * std::f64::consts::TAU,
                })
                .collect(),
            None => pipeline::random_targets(&s, self.targets.count, self.targets.rcs, rng),
        };
        s
    }
}

/// Rx AP selection strategy for each sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase", deny_unknown_fields)]
pub enum SelectionConfig {
    Ga(GaConfig),
    Exhaustive,
    /// Explicit Rx APs (the `n_rx` sweep is ignored).
    Fixed {
        rx: Vec<usize>,
    },
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig::Ga(GaConfig::default())
    }
}

/// Sweep axes. Empty lists fall back to the scenario value.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub eta: Vec<f64>,
    pub n_rx: Vec<usize>,
    pub subcarriers: Vec<usize>,
    pub bandwidth_hz: Vec<f64>,
    /// `(N, L)` network configurations.
    pub network: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    pub replicates: usize,
    /// Dump the fused image and metric report of replicate 0 at each point.
    pub save_images: bool,
    pub scenario: ScenarioConfig,
    pub run: RunParams,
    pub sweep: SweepConfig,
    pub selection: SelectionConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            seed: 1,
            replicates: 20,
            save_images: false,
            scenario: ScenarioConfig::default(),
            run: RunParams::default(),
            sweep: SweepConfig::default(),
            selection: SelectionConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> std::result::Result<Self, String> {
        let c: Self = toml::from_str(text).map_err(|e| e.to_string())?;
        c.validate().map_err(|e| e.to_string())?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|message| Error::Parse {
            path: path.to_path_buf(),
            message,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if self.sweep.eta.iter().any(|e| !(0.0..=1.0).contains(e)) {
            return Err(Error::Config("eta values must lie in [0, 1]".into()));
        }
        if self.run.realizations == 0 {
            return Err(Error::Config("realizations must be at least 1".into()));
        }
        if let SelectionConfig::Ga(g) = &self.selection {
            g.validate()?;
        }
        Ok(())
    }

    /// Sweep points in table order: network, M, B, N_rx, eta (eta fastest).
    pub fn points(&self) -> Vec<SweepPoint> {
        let s = &self.scenario;
        let or = |v: &Vec<f64>, d: f64| if v.is_empty() { vec![d] } else { v.clone() };
        let networks = if self.sweep.network.is_empty() {
            vec![(s.aps, s.antennas)]
        } else {
            self.sweep.network.clone()
        };
        let ms = if self.sweep.subcarriers.is_empty() {
            vec![s.subcarriers]
        } else {
            self.sweep.subcarriers.clone()
        };
        let bs = or(&self.sweep.bandwidth_hz, s.bandwidth_hz);
        let etas = match self.run.mode {
            Mode::Disac => or(&self.sweep.eta, 0.5),
            Mode::Dmimo => vec![1.0],
            Mode::Drn => vec![0.0],
        };
        let nrx = match (&self.selection, self.run.mode) {
            (_, Mode::Dmimo) => vec![0],
            (_, Mode::Drn) => vec![0],
            (SelectionConfig::Fixed { rx }, _) => vec![rx.len()],
            _ if self.sweep.n_rx.is_empty() => vec![1],
            _ => self.sweep.n_rx.clone(),
        };
        let mut out = Vec::new();
        let mut geometry = 0;
        for &(aps, antennas) in &networks {
            for &m in &ms {
                for &b in &bs {
                    for &n_rx in &nrx {
                        for &eta in &etas {
                            out.push(SweepPoint {
                                index: out.len(),
                                geometry,
                                aps,
                                antennas,
                                subcarriers: m,
                                bandwidth_hz: b,
                                n_rx,
                                eta,
                            });
                        }
                        geometry += 1;
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub index: usize,
    /// Index of the point with `eta` dropped; replicates share random draws
    /// across the `eta` axis.
    pub geometry: usize,
    pub aps: usize,
    pub antennas: usize,
    pub subcarriers: usize,
    pub bandwidth_hz: f64,
    pub n_rx: usize,
    pub eta: f64,
}

impl SweepPoint {
    pub fn label(&self) -> String {
        format!(
            "p{:04}_N{}_L{}_M{}_B{:.0}MHz_rx{}_eta{:.3}",
            self.index,
            self.aps,
            self.antennas,
            self.subcarriers,
            self.bandwidth_hz / 1e6,
            self.n_rx,
            self.eta
        )
    }
}

/// One table row per (sweep point, replicate).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub point: usize,
    pub replicate: usize,
    pub mode: String,
    pub aps: usize,
    pub antennas: usize,
    pub subcarriers: usize,
    pub symbols: usize,
    pub bandwidth_hz: f64,
    pub n_rx: usize,
    pub eta: f64,
    pub tx_set: String,
    pub rx_set: String,
    pub se_mean: Option<f64>,
    pub se_per_ue: String,
    pub se_closed_form_mean: Option<f64>,
    pub se_bound_dmimo_mean: Option<f64>,
    pub sinr_sen_avg_db: Option<f64>,
    pub sinr_sen_closed_avg_db: Option<f64>,
    pub snr_drn_avg_db: Option<f64>,
    pub entropy: Option<f64>,
    pub wall_time_s: f64,
    pub error: String,
}

/// Documented CSV column order.
pub const CSV_COLUMNS: [&str; 22] = [
    "point",
    "replicate",
    "mode",
    "aps",
    "antennas",
    "subcarriers",
    "symbols",
    "bandwidth_hz",
    "n_rx",
    "eta",
    "tx_set",
    "rx_set",
    "se_mean",
    "se_per_ue",
    "se_closed_form_mean",
    "se_bound_dmimo_mean",
    "sinr_sen_avg_db",
    "sinr_sen_closed_avg_db",
    "snr_drn_avg_db",
    "entropy",
    "wall_time_s",
    "error",
];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionSummary {
    pub geometry: usize,
    pub n_rx_max: usize,
    pub rx: Vec<usize>,
    pub entropy: Option<f64>,
    /// Random-allocation entropy quantiles (5%, 25%, 50%, 75%, 95%).
    pub random_quantiles: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub rows: Vec<ResultRow>,
    /// Fused image and report of replicate 0 per point (when requested).
    pub images: Vec<(String, Image, MetricReport)>,
    pub selections: Vec<SelectionSummary>,
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

/// Substream for (geometry, replicate): ChaCha stream id from the indices.
pub fn substream(seed: u64, geometry: usize, replicate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((geometry as u64) << 32) | replicate as u64);
    rng
}

/// (tx, rx, geometry, seed) of a designed bank.
type BankKey = (Vec<usize>, Vec<usize>, usize, u64);

struct PointSetup {
    base: Scenario,
    roles: Roles,
    bank: std::result::Result<WaveformBank, String>,
}

fn point_scenario(config: &ExperimentConfig, p: &SweepPoint) -> ScenarioConfig {
    let mut s = config.scenario.clone();
    s.aps = p.aps;
    s.antennas = p.antennas;
    s.subcarriers = p.subcarriers;
    s.bandwidth_hz = p.bandwidth_hz;
    s
}

/// Waveform bank with one sequence per AP for the selection cache. Designed
/// over the full-duplex lag set when feasible, pseudo-random otherwise.
pub fn cache_bank(base: &Scenario, params: &RunParams, seed: u64) -> Result<WaveformBank> {
    let roles = Roles::for_mode(Mode::Drn, base.aps.len(), &[]);
    match design_bank(base, &roles, params, seed) {
        Ok(b) => Ok(b),
        Err(Error::Infeasible { .. }) => {
            let support = pipeline::waveform_support(base, &roles, params)?;
            WaveformBank::pseudo_random(roles.tx.len(), &base.grid, support, seed)
        }
        Err(e) => Err(e),
    }
}

fn select_rx(
    config: &ExperimentConfig,
    base: &Scenario,
    n_rx: usize,
    geometry: usize,
) -> Result<(Vec<usize>, SelectionSummary)> {
    let n = base.aps.len();
    let mut summary = SelectionSummary {
        geometry,
        n_rx_max: n_rx,
        rx: Vec::new(),
        entropy: None,
        random_quantiles: Vec::new(),
    };
    let rx = match (&config.selection, config.run.mode) {
        (_, Mode::Dmimo) => Vec::new(),
        (_, Mode::Drn) => (0..n).collect(),
        (SelectionConfig::Fixed { rx }, _) => rx.clone(),
        (method, Mode::Disac) => {
            if n_rx == 0 || n_rx >= n {
                return Err(Error::Config(format!("n_rx = {n_rx} must lie in 1..{n}")));
            }
            let bank = cache_bank(base, &config.run, config.seed)?;
            let cache = saf_cache(base, &bank, &config.run)?;
            let result = match method {
                SelectionConfig::Ga(g) => solve_ga(
                    &cache,
                    n_rx,
                    &GaConfig {
                        seed: g.seed ^ config.seed,
                        ..g.clone()
                    },
                )?,
                _ => solve_exhaustive(&cache, n_rx)?,
            };
            let rnd = random_baseline(&cache, n_rx, 200, config.seed)?;
            summary.entropy = Some(result.entropy);
            summary.random_quantiles = [0.05, 0.25, 0.5, 0.75, 0.95]
                .iter()
                .filter_map(|q| selection::quantile(&rnd, *q))
                .collect();
            result.allocation.rx()
        }
    };
    summary.rx = rx.clone();
    Ok((rx, summary))
}

/// Runs every (sweep point, replicate). Results are in table order regardless
/// of the thread count.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepOutput> {
    config.validate()?;
    let points = config.points();
    let mut setups: BTreeMap<usize, PointSetup> = BTreeMap::new();
    let mut selections = Vec::new();
    let mut bank_cache: BTreeMap<BankKey, std::result::Result<WaveformBank, String>> = BTreeMap::new();
    for p in &points {
        if setups.contains_key(&p.geometry) {
            continue;
        }
        let sc = point_scenario(config, p);
        let base = sc.base()?;
        let (rx, summary) = select_rx(config, &base, p.n_rx, p.geometry)?;
        selections.push(summary);
        let roles = Roles::for_mode(config.run.mode, base.aps.len(), &rx);
        let key = (
            roles.tx.clone(),
            roles.rx.clone(),
            p.subcarriers,
            p.bandwidth_hz.to_bits(),
        );
        let bank = bank_cache
            .entry(key)
            .or_insert_with(|| design_bank(&base, &roles, &config.run, config.seed).map_err(|e| e.to_string()))
            .clone();
        setups.insert(p.geometry, PointSetup { base, roles, bank });
    }

    let tasks: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|i| (0..config.replicates).map(move |r| (i, r)))
        .collect();
    let images = Mutex::new(Vec::new());
    let rows: Vec<ResultRow> = tasks
        .par_iter()
        .map(|&(i, rep)| {
            let p = &points[i];
            let setup = &setups[&p.geometry];
            let start = Instant::now();
            let mut row = empty_row(config, p, rep, &setup.roles);
            let outcome = setup.bank.clone().map_err(Error::Config).and_then(|bank| {
                let mut rng = substream(config.seed, p.geometry, rep);
                let sc = point_scenario(config, p);
                let scenario = sc.populate(&setup.base, &mut rng);
                let params = RunParams {
                    clusters: sc.clusters,
                    ..config.run.clone()
                };
                simulate(&scenario, &setup.roles, &bank, &params, p.eta, &mut rng)
            });
            match outcome {
                Ok(snap) => {
                    fill_row(&mut row, &snap.report);
                    if config.save_images && rep == 0 {
                        if let Some(img) = snap.image {
                            images.lock().expect("image list").push((p.label(), img, snap.report));
                        }
                    }
                }
                Err(e) => row.error = e.to_string(),
            }
            row.wall_time_s = start.elapsed().as_secs_f64();
            row
        })
        .collect();
    let mut images = images.into_inner().expect("image list");
    images.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(SweepOutput {
        rows,
        images,
        selections,
    })
}

fn empty_row(config: &ExperimentConfig, p: &SweepPoint, rep: usize, roles: &Roles) -> ResultRow {
    ResultRow {
        point: p.index,
        replicate: rep,
        mode: format!("{:?}", config.run.mode).to_lowercase(),
        aps: p.aps,
        antennas: p.antennas,
        subcarriers: p.subcarriers,
        symbols: config.scenario.symbols,
        bandwidth_hz: p.bandwidth_hz,
        n_rx: roles.rx.len(),
        eta: pipeline::effective_eta(config.run.mode, p.eta),
        tx_set: join(&roles.tx),
        rx_set: join(&roles.rx),
        se_mean: None,
        se_per_ue: String::new(),
        se_closed_form_mean: None,
        se_bound_dmimo_mean: None,
        sinr_sen_avg_db: None,
        sinr_sen_closed_avg_db: None,
        snr_drn_avg_db: None,
        entropy: None,
        wall_time_s: 0.0,
        error: String::new(),
    }
}

fn fill_row(row: &mut ResultRow, r: &MetricReport) {
    row.se_mean = r.se_mean();
    row.se_per_ue = join(&r.se_per_ue);
    row.se_closed_form_mean = metrics::mean(&r.se_closed_form);
    row.se_bound_dmimo_mean = metrics::mean(&r.se_bound_dmimo);
    row.sinr_sen_avg_db = r.sinr_sen_avg_db;
    let ok: Vec<_> = r.sinr_sen.iter().filter(|p| p.peak_identified).collect();
    let closed: Vec<f64> = ok.iter().filter_map(|p| p.closed_form).collect();
    row.sinr_sen_closed_avg_db = metrics::mean(&closed).map(metrics::to_db);
    let drn: Vec<f64> = ok.iter().map(|p| p.bound_drn).collect();
    row.snr_drn_avg_db = metrics::mean(&drn).map(metrics::to_db);
    row.entropy = r.entropy;
}

/// Header-only output for an empty table.
pub fn write_csv<W: std::io::Write>(rows: &[ResultRow], w: W) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    let fail = |e: csv::Error| Error::Numeric(format!("csv: {e}"));
    wr.write_record(CSV_COLUMNS).map_err(fail)?;
    for r in rows {
        wr.serialize(r).map_err(fail)?;
    }
    wr.flush().map_err(|e| Error::Numeric(format!("csv: {e}")))?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    rd.deserialize()
        .collect::<std::result::Result<Vec<ResultRow>, _>>()
        .map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub library: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub seed: u64,
    pub replicates: usize,
    pub points: Vec<SweepPoint>,
    pub selections: Vec<SelectionSummary>,
    pub results: String,
    pub images: Vec<String>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

/// Writes `results.csv`, `manifest.json` and `images/<label>.txt` (+ `.json`
/// metric reports) into `dir`.
pub fn emit_results(config: &ExperimentConfig, out: &SweepOutput, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join("results.csv");
    let f = std::fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    write_csv(&out.rows, std::io::BufWriter::new(f))?;
    let mut image_files = Vec::new();
    if !out.images.is_empty() {
        let img_dir = dir.join("images");
        std::fs::create_dir_all(&img_dir).map_err(|e| Error::io(&img_dir, e))?;
        for (label, img, report) in &out.images {
            let name = format!("images/{label}.txt");
            img.save(&dir.join(&name))?;
            report.save(&dir.join(format!("images/{label}.json")))?;
            image_files.push(name);
        }
    }
    let manifest = Manifest {
        library: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: config.clone(),
        seed: config.seed,
        replicates: config.replicates,
        points: config.points(),
        selections: out.selections.clone(),
        results: "results.csv".into(),
        images: image_files,
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Numeric(e.to_string()))?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        c.scenario.aps = 4;
        c.scenario.antennas = 2;
        c.scenario.subcarriers = 64;
        c.scenario.symbols = 2;
        c.scenario.roi.pitch = 0.5;
        c.scenario.ues = 1;
        c.replicates = 2;
        c.run.realizations = 4;
        c.sweep.eta = vec![0.2, 0.8];
        c.selection = SelectionConfig::Exhaustive;
        c
    }

    #[test]
    fn toml_round_trip_and_defaults() {
        let c = small();
        let text = c.to_toml().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), c);
        let d = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(d, ExperimentConfig::default());
        let e =
            ExperimentConfig::from_toml("[sweep]\neta = [0.0, 0.5]\n[selection]\nmethod = \"fixed\"\nrx = [0, 3]\n")
                .unwrap();
        assert_eq!(e.selection, SelectionConfig::Fixed { rx: vec![0, 3] });
        assert!(ExperimentConfig::from_toml("[sweep]\neta = [1.5]").is_err());
        assert!(ExperimentConfig::from_toml("bogus = 1").is_err());
    }

    #[test]
    fn power_scales_inversely_with_subcarriers() {
        let s = ScenarioConfig::default();
        let p128 = s.power_watt(128);
        assert!((p128 - dbm_to_watt(-15.0)).abs() < 1e-18);
        assert!((s.power_watt(512) * 4.0 - p128).abs() < 1e-18);
    }

    #[test]
    fn point_enumeration() {
        let mut c = small();
        c.selection = SelectionConfig::Ga(GaConfig::default());
        c.sweep.n_rx = vec![1, 2];
        let pts = c.points();
        assert_eq!(pts.len(), 4);
        assert_eq!(pts[0].geometry, pts[1].geometry);
        assert_ne!(pts[1].geometry, pts[2].geometry);
        c.run.mode = Mode::Drn;
        assert!(c.points().iter().all(|p| p.eta == 0.0));
        c.run.mode = Mode::Dmimo;
        assert!(c.points().iter().all(|p| p.eta == 1.0 && p.n_rx == 0));
    }

    #[test]
    fn empty_table_is_header_only() {
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim(), CSV_COLUMNS.join(","));
    }

    #[test]
    fn sweep_is_deterministic_and_round_trips() {
        let c = small();
        let a = run_sweep(&c).unwrap();
        assert_eq!(a.rows.len(), 4);
        assert!(a.rows.iter().all(|r| r.error.is_empty()), "{:?}", a.rows[0].error);
        let b = run_sweep(&c).unwrap();
        let (mut ba, mut bb) = (Vec::new(), Vec::new());
        write_csv(&a.rows, &mut ba).unwrap();
        write_csv(&b.rows, &mut bb).unwrap();
        let strip = |v: Vec<u8>| -> Vec<String> {
            // wall time is the only non-deterministic column
            String::from_utf8(v)
                .unwrap()
                .lines()
                .map(|l| {
                    let mut f: Vec<&str> = l.split(',').collect();
                    let n = f.len();
                    f.remove(n - 2);
                    f.join(",")
                })
                .collect()
        };
        assert_eq!(strip(ba), strip(bb));

        let dir = tempfile::tempdir().unwrap();
        let mut c2 = c.clone();
        c2.save_images = true;
        let out = run_sweep(&c2).unwrap();
        let m = emit_results(&c2, &out, dir.path()).unwrap();
        let manifest = Manifest::load(&m).unwrap();
        assert_eq!(manifest.config, c2);
        assert_eq!(manifest.images.len(), 2);
        let rows = read_csv(&dir.path().join("results.csv")).unwrap();
        assert_eq!(rows.len(), 4);
        let img = Image::load(&dir.path().join(&manifest.images[0])).unwrap();
        assert_eq!(img.shape(), (10, 10));
    }

    #[test]
    fn benchmark_modes() {
        let mut c = small();
        c.replicates = 1;
        c.run.mode = Mode::Dmimo;
        let r = run_sweep(&c).unwrap();
        assert!(r
            .rows
            .iter()
            .all(|r| r.entropy.is_none() && r.sinr_sen_avg_db.is_none() && r.se_mean.is_some()));
        c.run.mode = Mode::Drn;
        c.scenario.subcarriers = 128;
        let r = run_sweep(&c).unwrap();
        assert!(
            r.rows
                .iter()
                .all(|r| r.eta == 0.0 && r.entropy.is_some() && r.se_mean.is_none()),
            "{:?}",
            r.rows
        );
    }
}
