//! Statistical behavior at scale: momentum moments for a million
//! processes, the moment laws of the generated streams, and the growth
//! of the detector's separation with the correlation coefficient.

use pcmsim::array::{ArrayConfig, ArraySim};
use pcmsim::baselines::{kahan_mean, mean_and_sample_std, weights_streaming};
use pcmsim::device::DeviceParams;
use pcmsim::engine::{self, momentum, EngineConfig, Modulation};
use pcmsim::ensemble::{EnsembleConfig, ProcessEnsemble, ProcessSource};

#[test]
fn million_process_momentum_matches_binomial_moments() {
    let config = EnsembleConfig {
        n: 1_000_000,
        n_correlated: 0,
        p: 0.01,
        c: 0.0,
        seed: 606,
        k_steps: 1000,
    };
    let mut e = ProcessEnsemble::synthetic(config).unwrap();
    let mut sum = 0u64;
    let mut steps = 0u64;
    while let Some(x) = e.next_step() {
        sum += momentum(x) as u64;
        steps += 1;
    }
    assert_eq!(steps, 1000);
    let mean = sum as f64 / steps as f64;
    let expected = 1_000_000.0 * 0.01;
    let tol = 3.0 * (1_000_000.0f64 * 0.01 * 0.99).sqrt();
    assert!(
        (mean - expected).abs() < tol,
        "mean momentum {mean} vs {expected} +- {tol}"
    );
}

#[test]
fn per_process_means_and_variances_follow_the_marginal_law() {
    // Mean -> p and variance -> p(1-p) for correlated and uncorrelated
    // processes alike, tested at K = 1e5 with 3 sigma bounds on a
    // representative sample of processes.
    let config = EnsembleConfig {
        n: 256,
        n_correlated: 64,
        p: 0.03,
        c: 0.25,
        seed: 17,
        k_steps: 100_000,
    };
    let mut e = ProcessEnsemble::synthetic(config).unwrap();
    let mut counts = vec![0u64; config.n];
    while let Some(x) = e.next_step() {
        for i in x.ones() {
            counts[i] += 1;
        }
    }
    let k = config.k_steps as f64;
    let tol_mean = 3.0 * (config.p * (1.0 - config.p) / k).sqrt();
    // Bernoulli variance is determined by the mean, so bounding the
    // mean bounds the empirical variance as well; check both anyway
    // for a handful of processes spread over both groups.
    let mut outside = 0usize;
    for &i in &[0usize, 1, 31, 63, 64, 100, 200, 255] {
        let mean = counts[i] as f64 / k;
        if (mean - config.p).abs() > tol_mean {
            outside += 1;
        }
        let var = mean * (1.0 - mean);
        let expected_var = config.p * (1.0 - config.p);
        assert!(
            (var - expected_var).abs() < 3.0 * tol_mean, // first-order propagation
            "process {i}: variance {var} vs {expected_var}"
        );
    }
    assert!(outside <= 1, "{outside} of 8 sampled processes outside 3 sigma");
}

#[test]
fn group_weight_means_track_the_closed_forms_across_correlations() {
    // The separation between group means grows with c; each group mean
    // stays within 3 analytic standard errors of its closed form.
    let mut last_gap = 0.0;
    for c in [0.05, 0.1, 0.2] {
        let config = EnsembleConfig {
            n: 400,
            n_correlated: 100,
            p: 0.04,
            c,
            seed: 9090,
            k_steps: 40_000,
        };
        let mut e = ProcessEnsemble::synthetic(config).unwrap();
        let w = weights_streaming(&mut e).unwrap();
        let (corr_mean, _) = mean_and_sample_std(&w.weights[..100]);
        let (unc_mean, _) = mean_and_sample_std(&w.weights[100..]);
        let (gm_c, gm_u) = pcmsim::baselines::expected_group_weight_moments(
            config.n,
            config.n_correlated,
            config.p,
            c,
            config.k_steps,
        )
        .unwrap();
        assert!(
            (corr_mean - gm_c.mean).abs() < 3.0 * gm_c.std_of_mean,
            "c={c}: correlated {corr_mean} vs {} +- {}",
            gm_c.mean,
            gm_c.std_of_mean
        );
        assert!(
            (unc_mean - gm_u.mean).abs() < 3.0 * gm_u.std_of_mean,
            "c={c}: uncorrelated {unc_mean} vs {} +- {}",
            gm_u.mean,
            gm_u.std_of_mean
        );
        let gap = corr_mean - unc_mean;
        assert!(gap > last_gap, "gap must grow with c: {gap} after {last_gap}");
        last_gap = gap;
    }
}

#[test]
fn detector_conductance_gap_grows_with_c() {
    // The same ladder seen through the devices: the mean conductance
    // gap between groups increases with c (fixed seed ladder).
    let mut last_gap = 0.0;
    for c in [0.05, 0.1, 0.2] {
        let config = EnsembleConfig {
            n: 400,
            n_correlated: 100,
            p: 0.04,
            c,
            seed: 4242,
            k_steps: 40_000,
        };
        let cfg = EngineConfig {
            modulation: Modulation::Duration,
            duration_scale_ns: 0.025,
            set_amplitude_ua: 50.0,
            t_min_ns: 0.0,
            readout_period: 40_000,
            ..EngineConfig::default()
        };
        let mut source = ProcessEnsemble::synthetic(config).unwrap();
        let mut array = ArraySim::new(ArrayConfig {
            n_devices: 400,
            params: DeviceParams::constant_growth(0.02),
            master_seed: 24,
        })
        .unwrap();
        let result = engine::run(&mut source, &mut array, &cfg).unwrap();
        let gap = kahan_mean(&result.replica_means_us[..100])
            - kahan_mean(&result.replica_means_us[100..]);
        assert!(
            gap > last_gap,
            "conductance gap must grow with c: {gap} after {last_gap}"
        );
        last_gap = gap;
    }
}
