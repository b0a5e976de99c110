use disac::experiment::{emit_results, read_csv, run_sweep, ExperimentConfig, Manifest};
use disac::pipeline::Mode;

fn config(mode: Mode) -> ExperimentConfig {
    let mut c = ExperimentConfig {
        replicates: 2,
        save_images: true,
        ..ExperimentConfig::default()
    };
    c.scenario.subcarriers = 128;
    c.scenario.symbols = 1;
    c.scenario.roi.pitch = 0.25;
    c.run.mode = mode;
    c.run.realizations = 8;
    c.sweep.eta = vec![0.2, 0.8];
    c
}

#[test]
fn results_are_identical_across_thread_counts() {
    let c = config(Mode::Disac);
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let a = one.install(|| run_sweep(&c)).unwrap();
    let b = three.install(|| run_sweep(&c)).unwrap();
    let strip = |rows: &[disac::experiment::ResultRow]| {
        rows.iter()
            .map(|r| disac::experiment::ResultRow {
                wall_time_s: 0.0,
                ..r.clone()
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(strip(&a.rows), strip(&b.rows));
}

#[test]
fn benchmark_columns() {
    let out = run_sweep(&config(Mode::Dmimo)).unwrap();
    for r in &out.rows {
        assert_eq!(r.eta, 1.0);
        assert!(r.sinr_sen_avg_db.is_none() && r.entropy.is_none());
        let (se, bound) = (r.se_mean.unwrap(), r.se_bound_dmimo_mean.unwrap());
        assert!(se <= bound + 1e-9);
    }
    // nine full-duplex waveforms need M >= 9 |support|
    let mut drn = config(Mode::Drn);
    drn.scenario.subcarriers = 512;
    let out = run_sweep(&drn).unwrap();
    assert!(out.rows.iter().all(|r| r.error.is_empty()), "{:?}", out.rows[0].error);
    assert!(out
        .rows
        .iter()
        .all(|r| r.eta == 0.0 && r.entropy.is_some() && r.se_mean.is_none()));
}

#[test]
fn emitted_files_round_trip() {
    let c = config(Mode::Disac);
    let out = run_sweep(&c).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_results(&c, &out, dir.path()).unwrap();
    let csv = dir.path().join("results.csv");
    assert_eq!(read_csv(&csv).unwrap().len(), out.rows.len());
    let manifest = Manifest::load(&dir.path().join("manifest.json")).unwrap();
    assert_eq!(manifest.config, c);
    let first = std::fs::read(&csv).unwrap();
    let dir2 = tempfile::tempdir().unwrap();
    let again = run_sweep(&c).unwrap();
    emit_results(&c, &again, dir2.path()).unwrap();
    let second = std::fs::read(dir2.path().join("results.csv")).unwrap();
    // wall time differs between runs; compare everything else
    let cut = |b: &[u8]| {
        String::from_utf8(b.to_vec())
            .unwrap()
            .lines()
            .map(|l| {
                let mut f: Vec<&str> = l.split(',').collect();
                let n = f.len();
                f[n - 2] = "";
                f.join(",")
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(cut(&first), cut(&second));
}
