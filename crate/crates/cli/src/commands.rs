use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use lattice::bundle::Bundle;
use lattice::evalkit::{
    ablation_suite, analyze_cases, multi_seed_run, prediction_rows, relative_improvement, score_cases, EvalOutcome,
    ExperimentConfig, SeedResult,
};
use lattice::gate::{calibrate_on_cases, GateReason};
use lattice::hybrid::Ablation;
use lattice::pipeline::fit_lattice;
use lattice::seqcore::{Mode, Series};
use lattice::synth::{gen_shifted, SynthSpec};
use lattice::Exec;
use log::info;

use crate::config::{Format, RunConfig};
use crate::data::{load, synth_seeds};
use crate::{CliError, Stage};

const EXEC: Exec = Exec::Parallel;

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
    }
    fs::write(path, text).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    info!("wrote {}", path.display());
    Ok(())
}

fn bundle_path(cfg: &RunConfig, explicit: Option<&Path>) -> PathBuf {
    explicit.map_or_else(|| cfg.out.join("bundle.model"), Path::to_path_buf)
}

fn load_bundle(path: &Path) -> Result<Bundle, CliError> {
    if !path.exists() {
        return Err(CliError::Usage(format!("no bundle at {} (run `lattice train` first)", path.display())));
    }
    Bundle::load(path).stage("load bundle")
}

fn save_bundle(bundle: &Bundle, path: &Path) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
    }
    bundle.save(path).stage("save bundle")?;
    info!("wrote {}", path.display());
    Ok(())
}

fn calibration_tsv(cal: &lattice::gate::Calibration) -> String {
    let mut s = format!("theta\tcoverage\t{}\n", cal.metric_name);
    for r in &cal.rows {
        let _ = writeln!(s, "{}\t{}\t{}", r.theta, r.coverage, r.metric);
    }
    s
}

pub fn train(cfg: &RunConfig, bundle: Option<&Path>) -> Result<(), CliError> {
    let loaded = load(cfg)?;
    let data = &loaded.data;
    info!(
        "training on {} sequences ({} events), seed {}",
        data.train.len(),
        data.train.num_events(),
        cfg.lattice.backbone.seed
    );
    let (mut predictor, report) = fit_lattice(&data.train, &cfg.lattice, EXEC).stage("train")?;
    for (e, l) in report.training.epoch_losses.iter().enumerate() {
        info!("epoch {} loss {l:.6}", e + 1);
    }
    info!("k-means converged in {} iterations", report.kmeans_iterations);
    let calibrated = cfg.theta.is_none();
    if calibrated {
        let val = data.val.as_ref().filter(|v| !v.is_empty()).ok_or_else(|| {
            CliError::Usage("theta not set and no validation data to calibrate on".into())
        })?;
        let cases = analyze_cases(&predictor, val, EXEC).stage("calibrate")?;
        let cal = calibrate_on_cases(&predictor, &cases, &cfg.grid.values().stage("calibrate")?, predictor.ablation)
            .stage("calibrate")?;
        info!("calibrated theta = {}", cal.theta);
        predictor.gate.theta = cal.theta;
        write(&cfg.out.join("calibration.tsv"), &calibration_tsv(&cal))?;
    }
    let b = Bundle { predictor, vocab: loaded.vocab, norm: loaded.norm, calibrated };
    save_bundle(&b, &bundle_path(cfg, bundle))
}

pub fn calibrate(cfg: &RunConfig, bundle: Option<&Path>) -> Result<(), CliError> {
    let path = bundle_path(cfg, bundle);
    let mut b = load_bundle(&path)?;
    let loaded = load(cfg)?;
    let val = loaded
        .data
        .val
        .filter(|v| !v.is_empty())
        .ok_or_else(|| CliError::Usage("validation partition is empty".into()))?;
    let cal = lattice::gate::calibrate_threshold(&b.predictor, &val, &cfg.grid, EXEC).stage("calibrate")?;
    info!("calibrated theta = {} ({} rows)", cal.theta, cal.rows.len());
    write(&cfg.out.join("calibration.tsv"), &calibration_tsv(&cal))?;
    b.predictor.gate.theta = cal.theta;
    b.calibrated = true;
    save_bundle(&b, &path)
}

fn seed_report(r: &SeedResult, baseline_only: bool) -> String {
    let mut s = String::new();
    if baseline_only {
        s.push_str("metric\tbaseline\n");
        for (name, v, _) in r.baseline.metrics.entries() {
            let _ = writeln!(s, "{name}\t{v}");
        }
        return s;
    }
    s.push_str("metric\tbaseline\tlattice\timprovement_pct\n");
    for ((name, b, higher), (_, l, _)) in r.baseline.metrics.entries().into_iter().zip(r.lattice.metrics.entries()) {
        let _ = writeln!(s, "{name}\t{b}\t{l}\t{}", relative_improvement(b, l, higher));
    }
    let _ = writeln!(s, "activation_rate\t\t{}\t", r.lattice.activation_rate);
    let _ = writeln!(s, "mean_confidence\t\t{}\t", r.lattice.mean_confidence);
    let _ = writeln!(s, "theta\t\t{}\t", r.theta);
    let _ = writeln!(s, "cases\t{}\t{}\t", r.baseline.cases, r.lattice.cases);
    s
}

fn aggregate_tsv(per_seed: &[SeedResult], baseline_only: bool) -> Result<String, CliError> {
    let mut s = String::new();
    if per_seed.len() < 2 {
        let r = &per_seed[0];
        s.push_str("metric\tbaseline\tlattice\timprovement_pct\tt\tp\n");
        for ((name, b, higher), (_, l, _)) in r.baseline.metrics.entries().into_iter().zip(r.lattice.metrics.entries()) {
            if baseline_only {
                let _ = writeln!(s, "{name}\t{b}\t\t\tNA\tNA");
            } else {
                let _ = writeln!(s, "{name}\t{b}\t{l}\t{}\tNA\tNA", relative_improvement(b, l, higher));
            }
        }
    } else {
        let summary = lattice::evalkit::summarize(per_seed).stage("aggregate")?;
        s.push_str("metric\tbaseline_mean\tbaseline_std\tlattice_mean\tlattice_std\timprovement_mean_pct\timprovement_std_pct\tt\tp\n");
        for m in summary {
            if baseline_only {
                let _ = writeln!(s, "{}\t{}\t{}\t\t\t\t\t\t", m.metric, m.baseline_mean, m.baseline_std);
            } else {
                let _ = writeln!(
                    s,
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    m.metric,
                    m.baseline_mean,
                    m.baseline_std,
                    m.lattice_mean,
                    m.lattice_std,
                    m.improvement_mean,
                    m.improvement_std,
                    m.test.t,
                    m.test.p
                );
            }
        }
    }
    if !baseline_only {
        let act: Vec<f64> = per_seed.iter().map(|r| r.lattice.activation_rate).collect();
        let _ = writeln!(s, "activation_rate\t\t\t{}\t\t\t\t\t", act.iter().sum::<f64>() / act.len() as f64);
    }
    Ok(s)
}

pub fn evaluate(cfg: &RunConfig, bundle: Option<&Path>) -> Result<(), CliError> {
    let loaded = load(cfg)?;
    let per_seed = if cfg.seeds.len() >= 2 {
        let mut ecfg = ExperimentConfig::new(cfg.lattice);
        if cfg.theta.is_none() {
            ecfg.calibrate = Some(cfg.grid);
        }
        info!("retraining for {} seeds", cfg.seeds.len());
        multi_seed_run(&loaded.data, &ecfg, &cfg.seeds, EXEC).stage("evaluate")?.per_seed
    } else {
        let b = load_bundle(&bundle_path(cfg, bundle))?;
        let p = &b.predictor;
        let theta = cfg.theta.unwrap_or(p.gate.theta);
        let cases = analyze_cases(p, &loaded.data.test, EXEC).stage("evaluate")?;
        if cfg.dump_predictions {
            write(&cfg.out.join("predictions.tsv"), &predictions_tsv(p, &cases, theta))?;
        }
        vec![SeedResult {
            seed: p.backbone.config().seed,
            theta,
            baseline: score_cases(p, &cases, theta, Ablation::LSTM_ONLY).stage("evaluate")?,
            lattice: score_cases(p, &cases, theta, p.ablation).stage("evaluate")?,
            final_train_loss: f64::NAN,
        }]
    };
    for r in &per_seed {
        let (name, b, _) = r.baseline.metrics.headline();
        let (_, l, _) = r.lattice.metrics.headline();
        if cfg.baseline_only {
            info!("seed {}: {name} backbone {b:.4}", r.seed);
        } else {
            info!("seed {}: {name} backbone {b:.4} lattice {l:.4} activation {:.3}", r.seed, r.lattice.activation_rate);
        }
        write(&cfg.out.join(format!("report_seed{}.tsv", r.seed)), &seed_report(r, cfg.baseline_only))?;
    }
    write(&cfg.out.join("aggregate.tsv"), &aggregate_tsv(&per_seed, cfg.baseline_only)?)
}

fn predictions_tsv(p: &lattice::hybrid::LatticePredictor, cases: &[lattice::evalkit::Case], theta: f64) -> String {
    let mut s = String::from("seq\tphase\tconfidence\tactive\treason\tprediction\n");
    for r in prediction_rows(p, cases, theta, p.ablation) {
        let pred = match r.value {
            Some(v) => v.to_string(),
            None => r.top.iter().map(usize::to_string).collect::<Vec<_>>().join(","),
        };
        let d = r.decision;
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{pred}",
            r.seq_index,
            d.phase.index(),
            d.confidence,
            d.active,
            d.reason.name()
        );
    }
    s
}

/// Stress-test result for one magnitude.
struct StressRow {
    magnitude: f64,
    outcome: EvalOutcome,
    backbone: EvalOutcome,
    d_min_ratio: f64,
    identity: bool,
}

pub fn stress(cfg: &RunConfig, bundle: Option<&Path>) -> Result<(), CliError> {
    if cfg.format != Format::Synth {
        return Err(CliError::Usage("stress generates shifted synthetic data; use format = synth".into()));
    }
    let b = load_bundle(&bundle_path(cfg, bundle))?;
    let p = &b.predictor;
    let theta = cfg.theta.unwrap_or(p.gate.theta);
    let test_seed = synth_seeds(&cfg.synth)[2];
    let base_d = p.distances.mean();
    let mut rows = Vec::new();
    for &m in cfg.magnitudes.as_deref().unwrap_or(&[4.0]) {
        let shifted = gen_shifted(&cfg.synth.with_seed(test_seed), m).stage("shift")?;
        let cases = analyze_cases(p, &shifted.dataset, EXEC).stage("stress")?;
        let outcome = score_cases(p, &cases, theta, p.ablation).stage("stress")?;
        let backbone = score_cases(p, &cases, theta, Ablation::LSTM_ONLY).stage("stress")?;
        // every below-threshold refusal must return the backbone scores bit for bit
        let refusals_exact = cases.iter().all(|c| {
            let pred = p.combine(&c.analysis, theta, p.ablation);
            pred.decision.reason != GateReason::BelowTheta || pred.scores == c.analysis.backbone
        });
        let all_refused = cases.iter().all(|c| p.combine(&c.analysis, theta, p.ablation).decision.reason == GateReason::BelowTheta);
        let identity = refusals_exact && (!all_refused || outcome.metrics == backbone.metrics);
        let d_mean = cases.iter().map(|c| c.analysis.confidence.d_min).sum::<f64>() / cases.len() as f64;
        info!(
            "magnitude {m}: activation {:.3}, mean confidence {:.3} (theta {theta}), d_min ratio {:.2}, identity {}",
            outcome.activation_rate,
            outcome.mean_confidence,
            d_mean / base_d,
            if identity { "pass" } else { "FAIL" }
        );
        rows.push(StressRow { magnitude: m, outcome, backbone, d_min_ratio: d_mean / base_d, identity });
    }
    let metric = rows[0].outcome.metrics.headline().0;
    let mut s = format!(
        "magnitude\ttheta\tactivation_rate\tmean_confidence\td_min_ratio\tbackbone_{metric}\tlattice_{metric}\tidentity\n"
    );
    for r in &rows {
        let _ = writeln!(
            s,
            "{}\t{theta}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.magnitude,
            r.outcome.activation_rate,
            r.outcome.mean_confidence,
            r.d_min_ratio,
            r.backbone.metrics.headline().1,
            r.outcome.metrics.headline().1,
            if r.identity { "pass" } else { "fail" }
        );
    }
    write(&cfg.out.join("stress.tsv"), &s)
}

pub fn ablate(cfg: &RunConfig) -> Result<(), CliError> {
    let loaded = load(cfg)?;
    let mut ecfg = ExperimentConfig::new(cfg.lattice);
    if cfg.theta.is_none() {
        ecfg.calibrate = Some(cfg.grid);
    }
    let table = ablation_suite(&loaded.data, &ecfg, &cfg.seeds, EXEC).stage("ablate")?;
    let metrics: Vec<(&str, bool)> = match cfg.mode {
        Mode::Discrete => vec![("HR@10", true), ("NDCG@10", true)],
        Mode::Continuous => vec![("MSE", false), ("MAE", false)],
    };
    let mut s = String::from("arm");
    for (m, _) in &metrics {
        let _ = write!(s, "\t{m}_mean\t{m}_std\t{m}_improvement_pct");
    }
    s.push_str("\tactivation_rate\n");
    for (i, arm) in table.arms.iter().enumerate() {
        s.push_str(&arm.name);
        for &(m, higher) in &metrics {
            let _ = write!(s, "\t{}\t{}\t{}", arm.mean(m), arm.std(m), table.improvement(i, m, higher));
        }
        let _ = writeln!(s, "\t{}", arm.activation_rate());
        info!("{:40} {} {:.4}", arm.name, metrics[0].0, arm.mean(metrics[0].0));
    }
    write(&cfg.out.join("ablation.tsv"), &s)
}

pub fn synth(cfg: &RunConfig, output: Option<&Path>, shift: f64) -> Result<(), CliError> {
    let spec: SynthSpec = cfg.synth.with_seed(cfg.seeds[0]);
    let shift = cfg.magnitudes.as_ref().and_then(|m| m.first().copied()).unwrap_or(shift);
    let corpus = gen_shifted(&spec, shift).stage("synthesize")?;
    let path = output.map_or_else(|| cfg.out.join("synth.tsv"), Path::to_path_buf);
    let mut s = String::new();
    if spec.mode == Mode::Discrete {
        s.push_str("user\titem\ttimestamp\n");
    }
    for seq in &corpus.dataset.sequences {
        match &seq.series {
            Series::Items(items) => {
                for (t, i) in items.iter().enumerate() {
                    let _ = writeln!(s, "{}\t{i}\t{t}", seq.owner);
                }
            }
            Series::Values(v) => {
                let _ = writeln!(s, "{}", v.iter().map(f64::to_string).collect::<Vec<_>>().join(" "));
            }
        }
    }
    write(&path, &s)?;
    let labels: String = corpus
        .dataset
        .sequences
        .iter()
        .zip(&corpus.labels)
        .map(|(q, l)| format!("{}\t{l}\n", q.owner))
        .collect();
    let mut lp = path.clone().into_os_string();
    lp.push(".labels");
    write(Path::new(&lp), &labels)
}

