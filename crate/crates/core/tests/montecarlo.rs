use critlab_core::montecarlo::{
    abs_normal_mean, direction_of_divergence, phase_sweep, run_ensemble, run_paths, write_sweep_csv, EnsembleConfig,
    SWEEP_COLUMNS,
};
use critlab_core::spectral::{perron_frobenius, NonNegativeMatrix, TOL_EIG};
use critlab_core::{
    BisexualModel, Error, MultitypeModel, NoiseLaw, OffspringFamily, ProcessModel, RandomStream, SpectralData,
    StopReason, StopRule, SyntheticModel,
};
use rand::RngCore;

fn half() -> SpectralData {
    let m = NonNegativeMatrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
    perron_frobenius(&m, TOL_EIG).unwrap()
}

fn small_cfg(n: u64, seed: u64, x0: Vec<f64>, upper: f64) -> EnsembleConfig {
    EnsembleConfig::new(n, seed, StopRule::new(100_000, upper).unwrap(), x0)
}

#[test]
fn zero_offspring_dies_in_one_step() {
    let model = BisexualModel::new(1, 0.0, OffspringFamily::Degenerate { rho: 0, tau: 0 }).unwrap();
    let report = run_ensemble(&model, &small_cfg(50, 1, vec![5.0], 1e6), 2).unwrap();
    assert_eq!(report.extinction.freq, 1.0);
    assert_eq!(report.mean_steps, 1.0);
    assert!(report.direction_stats.is_none());

    let paths = run_paths(&model, &small_cfg(5, 1, vec![5.0], 1e6), 1).unwrap();
    assert_eq!(direction_of_divergence(&paths, model.spectral()), Err(Error::NoDivergentTrajectories));
}

#[test]
fn reports_do_not_depend_on_thread_count() {
    let model = BisexualModel::new(1, 0.9, OffspringFamily::Equidispersed).unwrap();
    let cfg = small_cfg(64, 42, vec![30.0], 3_000.0);
    let one = run_ensemble(&model, &cfg, 1).unwrap();
    for threads in [4, 16] {
        assert_eq!(run_ensemble(&model, &cfg, threads).unwrap(), one);
    }
    let other = run_ensemble(&model, &small_cfg(64, 43, vec![30.0], 3_000.0), 4).unwrap();
    assert_ne!(other, one);
}

#[test]
fn frequencies_partition_and_bracket() {
    let model = BisexualModel::new(1, 0.6, OffspringFamily::Equidispersed).unwrap();
    let mut cfg = small_cfg(200, 9, vec![20.0], 2_000.0);
    cfg.stop.horizon = 200;
    let r = run_ensemble(&model, &cfg, 4).unwrap();
    assert_eq!(r.extinction.count + r.divergence.count + r.horizon_exhausted.count, 200);
    let total = r.extinction.freq + r.divergence.freq + r.horizon_exhausted.freq;
    assert!((total - 1.0).abs() < 1e-12);
    for f in [r.extinction, r.divergence, r.horizon_exhausted] {
        assert!(f.ci_lo <= f.freq && f.freq <= f.ci_hi);
    }
}

#[test]
fn one_dimensional_direction_ratio_is_zero() {
    let model = BisexualModel::new(1, 1.5, OffspringFamily::Equidispersed).unwrap();
    let cfg = small_cfg(40, 3, vec![100.0], 1_000.0);
    let paths = run_paths(&model, &cfg, 2).unwrap();
    let stats = direction_of_divergence(&paths, model.spectral()).unwrap();
    assert_eq!((stats.median, stats.p90, stats.max), (0.0, 0.0, 0.0));
}

#[test]
fn frozen_ray_path_has_zero_ratio() {
    let model = SyntheticModel::power_law(half(), 1.0, 0.5, 1.0, 1.0, NoiseLaw::Zero).unwrap();
    let cfg = small_cfg(3, 0, vec![5.0, 5.0], 1e4);
    let paths = run_paths(&model, &cfg, 1).unwrap();
    assert!(paths.iter().all(|p| p.stop_reason == StopReason::HitUpper));
    let stats = direction_of_divergence(&paths, model.spectral()).unwrap();
    assert_eq!(stats.max, 0.0);
}

#[test]
fn gamma_hat_recovers_variance_slope() {
    let model = MultitypeModel::new(half(), 0.0, 1.0).unwrap();
    let cfg = small_cfg(1, 11, vec![1.0, 1.0], 10.0);
    let gamma = run_ensemble(&model, &cfg, 1).unwrap().gamma_hat.unwrap();
    assert!((gamma - 0.5).abs() < 0.05, "{gamma}");
}

#[test]
fn sweeps() {
    let cfg = small_cfg(10, 1, vec![5.0], 100.0);
    let build = |b: f64| BisexualModel::new(1, b, OffspringFamily::Equidispersed);
    assert!(phase_sweep(build, &[], &cfg, 2).unwrap().is_empty());
    assert!(phase_sweep(build, &[f64::NAN], &cfg, 2).is_err());

    let rows = phase_sweep(|_| BisexualModel::new(1, 0.0, OffspringFamily::Degenerate { rho: 0, tau: 0 }), &[0.0], &cfg, 1).unwrap();
    let mut out = Vec::new();
    write_sweep_csv(&mut out, &rows).unwrap();
    let text = String::from_utf8(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(SWEEP_COLUMNS));
    let row = lines.next().unwrap();
    assert_eq!(row.split(',').count(), SWEEP_COLUMNS.split(',').count());
    assert!(row.starts_with("0,10,10,0,0,1,") && row.ends_with(",NA"), "{row}");
}

#[test]
fn streams_are_disjoint() {
    let draws = |id| {
        let mut rng = RandomStream::new(5, id);
        (0..10_000).map(|_| rng.next_u64()).collect::<Vec<_>>()
    };
    let base = draws(0);
    for id in [1, 2, 1000, u64::MAX] {
        let other = draws(id);
        assert_ne!(other, base);
        assert!(other.iter().zip(&base).filter(|(a, b)| a == b).count() < 5);
    }
}

#[test]
fn standard_normal_absolute_mean() {
    let est = abs_normal_mean(1_000_000, 17);
    let target = (2.0 / std::f64::consts::PI).sqrt();
    assert!(est.z_score(target) <= 3.0, "{est:?}");
}
