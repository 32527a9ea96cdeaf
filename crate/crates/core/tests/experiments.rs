mod common;

use lattice::evalkit::{
    ablation_suite, analyze_cases, evaluate, fit_seed, multi_seed_run, relative_improvement, score_cases, Degenerate,
    ExperimentConfig,
};
use lattice::gate::{calibrate_threshold, ThresholdGrid};
use lattice::hybrid::Ablation;
use lattice::pipeline::fit_lattice;
use lattice::seqcore::Mode;
use lattice::{Exec, LatticeError};

#[test]
fn same_seed_same_predictor() {
    let data = common::small_data(Mode::Discrete);
    let cfg = common::quick_config(Mode::Discrete, 4);
    let (a, ra) = fit_lattice(&data.train, &cfg, Exec::Parallel).unwrap();
    let (b, rb) = fit_lattice(&data.train, &cfg, Exec::Parallel).unwrap();
    assert_eq!(a, b);
    assert_eq!(ra, rb);
    let (c, _) = fit_lattice(&data.train, &common::quick_config(Mode::Discrete, 5), Exec::Parallel).unwrap();
    assert_ne!(a.backbone, c.backbone);
}

#[test]
fn sequential_and_parallel_agree_exactly() {
    for mode in [Mode::Discrete, Mode::Continuous] {
        let data = common::small_data(mode);
        let cfg = common::quick_config(mode, 6);
        let (seq, _) = fit_lattice(&data.train, &cfg, Exec::Sequential).unwrap();
        let (par, _) = fit_lattice(&data.train, &cfg, Exec::Parallel).unwrap();
        assert_eq!(seq, par);
        let a = analyze_cases(&seq, &data.test, Exec::Sequential).unwrap();
        let b = analyze_cases(&par, &data.test, Exec::Parallel).unwrap();
        assert_eq!(a.len(), b.len());
        assert!(a.iter().zip(&b).all(|(x, y)| x.seq_index == y.seq_index && x.analysis == y.analysis));
    }
}

#[test]
fn evaluate_is_deterministic() {
    let (p, data) = common::quick_predictor(Mode::Discrete, 0);
    let a = evaluate(&p, &data.test, Exec::Parallel).unwrap();
    let b = evaluate(&p, &data.test, Exec::Sequential).unwrap();
    assert_eq!(a, b);
    let r = a.metrics.ranking().unwrap();
    assert!(r.hr[0] <= r.hr[1] && r.hr[1] <= r.hr[2]);
    assert_eq!(a.phase_counts.iter().sum::<usize>(), a.cases);
}

#[test]
fn identical_arms_give_zero_improvement() {
    let data = common::small_data(Mode::Discrete);
    let mut cfg = ExperimentConfig::new(common::quick_config(Mode::Discrete, 0));
    cfg.baseline = cfg.lattice.ablation;
    let report = multi_seed_run(&data, &cfg, &[0, 1, 2], Exec::Parallel).unwrap();
    for m in &report.summary {
        assert_eq!(m.improvement_mean, 0.0, "{}", m.metric);
        assert_eq!(m.test.degenerate, Some(Degenerate::NoDifference));
        assert_eq!(m.test.p, 1.0);
    }
}

#[test]
fn multi_seed_needs_two_seeds() {
    let data = common::small_data(Mode::Discrete);
    let cfg = ExperimentConfig::new(common::quick_config(Mode::Discrete, 0));
    let err = multi_seed_run(&data, &cfg, &[7], Exec::Parallel).unwrap_err();
    assert!(matches!(err, LatticeError::TooFewSamples(1)));
}

#[test]
fn report_improvements_match_the_per_seed_numbers() {
    let data = common::small_data(Mode::Continuous);
    let cfg = ExperimentConfig::new(common::quick_config(Mode::Continuous, 0));
    let report = multi_seed_run(&data, &cfg, &[0, 1, 2], Exec::Parallel).unwrap();
    let mse = report.metric("MSE").unwrap();
    assert!(!mse.higher_is_better);
    let by_hand: Vec<f64> = report
        .per_seed
        .iter()
        .map(|s| {
            let (b, l) = (s.baseline.metrics.get("MSE").unwrap(), s.lattice.metrics.get("MSE").unwrap());
            100.0 * (b - l) / b
        })
        .collect();
    let expect = by_hand.iter().sum::<f64>() / by_hand.len() as f64;
    assert!((mse.improvement_mean - expect).abs() < 1e-9);
    assert_eq!(report.per_seed.iter().map(|s| s.seed).collect::<Vec<_>>(), vec![0, 1, 2]);
}

#[test]
fn default_grid_gives_five_rows_with_falling_coverage() {
    let (p, data) = common::quick_predictor(Mode::Discrete, 0);
    let cal = calibrate_threshold(&p, data.val.as_ref().unwrap(), &ThresholdGrid::default(), Exec::Parallel).unwrap();
    let thetas: Vec<f64> = cal.rows.iter().map(|r| r.theta).collect();
    assert_eq!(thetas, vec![0.2, 0.3, 0.4, 0.5, 0.6]);
    assert!(cal.rows.windows(2).all(|w| w[1].coverage <= w[0].coverage));
    assert_eq!(cal.metric_name, "HR@10");
    let best = cal.rows.iter().map(|r| r.metric).fold(f64::NEG_INFINITY, f64::max);
    let chosen = cal.rows.iter().find(|r| r.theta == cal.theta).unwrap();
    assert_eq!(chosen.metric, best);
    // ties resolve to the larger threshold
    assert!(cal.rows.iter().all(|r| r.metric < best || r.theta <= cal.theta));
}

#[test]
fn calibrated_seed_uses_validation_theta() {
    let data = common::small_data(Mode::Discrete);
    let mut cfg = ExperimentConfig::new(common::quick_config(Mode::Discrete, 0));
    cfg.calibrate = Some(ThresholdGrid::default());
    let fit = fit_seed(&data, &cfg, 0, Exec::Parallel).unwrap();
    let direct = calibrate_threshold(&fit.predictor, data.val.as_ref().unwrap(), &ThresholdGrid::default(), Exec::Parallel).unwrap();
    assert_eq!(fit.theta, direct.theta);

    let mut no_val = data.clone();
    no_val.val = None;
    assert!(matches!(fit_seed(&no_val, &cfg, 0, Exec::Parallel), Err(LatticeError::InvalidConfig(_))));
}

#[test]
fn ablation_table_has_the_four_arms() {
    let data = common::small_data(Mode::Discrete);
    let cfg = ExperimentConfig::new(common::quick_config(Mode::Discrete, 0));
    let table = ablation_suite(&data, &cfg, &[0, 1], Exec::Parallel).unwrap();
    let names: Vec<&str> = table.arms.iter().map(|a| a.name.as_str()).collect();
    assert_eq!(
        names,
        vec!["LSTM-only", "LSTM + Archetypes (no gating)", "LSTM + Archetypes + Confidence Gating", "Full Lattice"]
    );
    // LSTM-only is the full system with archetypes switched off
    let fit = fit_seed(&data, &cfg, 0, Exec::Parallel).unwrap();
    let off = score_cases(&fit.predictor, &fit.test_cases, fit.theta, Ablation { archetypes: false, ..Ablation::FULL }).unwrap();
    assert_eq!(table.arms[0].outcomes[0], off);
    for arm in &table.arms {
        assert_eq!(arm.outcomes.len(), 2);
    }
    let base = table.arms[0].values("HR@10");
    let full = table.arms[3].values("HR@10");
    let by_hand = (0..2).map(|i| 100.0 * (full[i] - base[i]) / base[i]).sum::<f64>() / 2.0;
    assert!((table.improvement(3, "HR@10", true) - by_hand).abs() < 1e-9);
    assert_eq!(table.improvement(0, "HR@10", true), 0.0);
}

#[test]
fn relative_improvement_signs() {
    assert_eq!(relative_improvement(0.5, 0.6, true), 100.0 * 0.09999999999999998 / 0.5);
    assert!(relative_improvement(2.0, 1.0, false) > 0.0);
    assert!(relative_improvement(2.0, 3.0, false) < 0.0);
    assert_eq!(relative_improvement(0.0, 0.0, true), 0.0);
}
