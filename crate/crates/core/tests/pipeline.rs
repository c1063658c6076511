#![allow(clippy::needless_range_loop)]

use twoway::analysis::{analyze, noe, pnc_isi_fixed_point};
use twoway::config::{load_config, Memory};
use twoway::montecarlo::{simulate, simulate_parallel, SimOptions};
use twoway::sweep::{compare_report, configure, read_csv, run_sweep, write_csv, Mode, SweepSpec, SweepVariable};
use twoway::{BlockingProfile, Scheme, SystemConfig, SystemModel};

fn isi_reference() -> SystemConfig {
    let base = SystemConfig::reference(BlockingProfile::Low).with_memory(Memory::uniform(3)).unwrap();
    configure(&base, SweepVariable::Xavg, 3e-17, BlockingProfile::Low).unwrap()
}

#[test]
fn toml_round_trip_preserves_results() {
    let cfg = isi_reference();
    let reloaded = load_config(&cfg.to_toml()).unwrap();
    let (a, b) = (SystemModel::new(cfg).unwrap(), SystemModel::new(reloaded).unwrap());
    for scheme in Scheme::ALL {
        assert_eq!(analyze(&a, scheme).unwrap().avg_bep, analyze(&b, scheme).unwrap().avg_bep);
    }
}

#[test]
fn memory_analysis_tracks_simulation() {
    let model = SystemModel::new(isi_reference()).unwrap();
    let analysis = pnc_isi_fixed_point(&model, 1e-12, 10_000).unwrap().breakdown.avg_bep;
    let sim = simulate(&model, Scheme::Pnc, &SimOptions::new(200_000, 7)).unwrap();
    assert!((analysis - sim.avg_bep).abs() / sim.avg_bep < 0.2, "{analysis} vs {}", sim.avg_bep);
}

#[test]
fn clean_history_forms_match_genie_runs() {
    let model = SystemModel::new(isi_reference()).unwrap();
    for scheme in Scheme::ALL {
        let approx = noe(&model, scheme).unwrap();
        let mut opts = SimOptions::new(200_000, 11);
        opts.genie = true;
        let sim = simulate_parallel(&model, scheme, &opts, 2).unwrap();
        for i in 0..2 {
            let z = (sim.pe[i] - approx[i]) / sim.stderr[i].max(1e-12);
            assert!(z.abs() < 4.0, "{scheme} T{}: z = {z}", i + 1);
        }
    }
}

#[test]
fn sweep_csv_round_trips_into_comparison() {
    let base = SystemConfig::reference(BlockingProfile::Low);
    let spec = SweepSpec {
        variable: SweepVariable::Zeta,
        grid: vec![3e-17, 1e-16],
        schemes: Scheme::ALL.to_vec(),
        blockings: vec![BlockingProfile::Custom],
        modes: vec![Mode::Analysis, Mode::Simulation],
        trials: 100_000,
        seed: 3,
    };
    let rows = run_sweep(&spec, &base, 2).unwrap();
    let mut buf = Vec::new();
    write_csv(&rows, &mut buf).unwrap();
    let parsed = read_csv(buf.as_slice()).unwrap();
    assert_eq!(parsed.len(), rows.len());
    let report = compare_report(&parsed).unwrap();
    assert_eq!(report.points.len(), 4);
    assert!(report.passes(4.0), "{}", report.table());
}
