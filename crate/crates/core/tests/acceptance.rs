//! Acceptance suite. Runs every criterion in order and prints one PASS/FAIL line
//! per criterion; exits non-zero if any fails.
//!
//! Set `LATTICE_ML1M=/path/to/ratings.dat` to also run the extended MovieLens 1M
//! comparison (hours on a laptop); otherwise it is reported as skipped.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lattice::archetype::{fit_kmeans, fit_transitions, ArchetypeModel, ArchetypeStructure, KMeansConfig};
use lattice::backbone::{grad_check, BackboneConfig, BehaviorEmbedding, LstmBackbone, NextScores, Optimizer};
use lattice::evalkit::stats::mean;
use lattice::evalkit::{
    analyze_cases, fit_seed, paired_t_test, rank_of, score_cases, top_k, Case, EvalOutcome, ExperimentConfig,
    ExperimentData, RankingMetrics, SeedFit, CUTOFFS,
};
use lattice::gate::{confidence, DistanceDistribution, GateConfig, GateReason};
use lattice::hybrid::{Ablation, LatticePredictor, PopularityPrior};
use lattice::pipeline::{embed_all, fit_lattice, LatticeConfig};
use lattice::seqcore::{ItemVocab, Mode, Sequence, SequenceDataset};
use lattice::synth::{gen_dataset, gen_shifted, SynthSpec};
use lattice::Exec;

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const THETA: f64 = 0.4;
const SHIFT: f64 = 9.0;
const HR10: &str = "HR@10";

struct Verdict {
    id: &'static str,
    title: &'static str,
    pass: bool,
    detail: String,
    secs: f64,
    budget: f64,
}

fn report(v: &Verdict) -> bool {
    let in_time = v.secs <= v.budget;
    let ok = v.pass && in_time;
    println!(
        "{} {:<5} {}: {} [{:.1}s of {:.0}s{}]",
        if ok { "PASS" } else { "FAIL" },
        v.id,
        v.title,
        v.detail,
        v.secs,
        v.budget,
        if in_time { "" } else { ", over budget" }
    );
    ok
}

fn backbone(mode: Mode) -> BackboneConfig {
    BackboneConfig {
        mode,
        embed_dim: 32,
        hidden_dim: 64,
        epochs: 5,
        batch_size: 256,
        learning_rate: 0.001,
        seed: 0,
        optimizer: Optimizer::adam(),
        clip_norm: 5.0,
    }
}

fn experiment(mode: Mode) -> ExperimentConfig {
    let mut lattice = LatticeConfig { backbone: backbone(mode), num_archetypes: 5, ..Default::default() };
    lattice.gate.theta = THETA;
    ExperimentConfig::new(lattice)
}

fn synth_data(spec: &SynthSpec) -> ExperimentData {
    ExperimentData {
        train: gen_dataset(&spec.with_seed(100)).unwrap().dataset,
        val: None,
        test: gen_dataset(&spec.with_seed(300)).unwrap().dataset,
    }
}

struct Fitted {
    fit: SeedFit,
    secs: f64,
}

fn fit_all(data: &ExperimentData, cfg: &ExperimentConfig) -> Vec<Fitted> {
    SEEDS
        .iter()
        .map(|&s| {
            let t = Instant::now();
            let fit = fit_seed(data, cfg, s, Exec::Parallel).unwrap();
            Fitted { fit, secs: t.elapsed().as_secs_f64() }
        })
        .collect()
}

fn mean_d_min(cases: &[Case]) -> f64 {
    mean(&cases.iter().map(|c| c.analysis.confidence.d_min).collect::<Vec<_>>())
}

fn same_bits(a: &NextScores, b: &NextScores) -> bool {
    match (a, b) {
        (NextScores::Distribution(x), NextScores::Distribution(y)) => {
            x.len() == y.len() && x.iter().zip(y).all(|(p, q)| p.to_bits() == q.to_bits())
        }
        (NextScores::Value(x), NextScores::Value(y)) => x.to_bits() == y.to_bits(),
        _ => false,
    }
}

fn mse(o: &EvalOutcome) -> f64 {
    o.metrics.get("MSE").unwrap()
}

// Criterion 1: an all-refusing gate reproduces the backbone bit for bit.
fn fallback_identity(cont: &Fitted, shifted: &[Case], shift_secs: f64) -> Verdict {
    let t = Instant::now();
    let p = &cont.fit.predictor;
    let full = score_cases(p, shifted, THETA, Ablation::FULL).unwrap();
    let base = score_cases(p, shifted, THETA, Ablation::LSTM_ONLY).unwrap();
    let identical = shifted
        .iter()
        .filter(|c| same_bits(&p.combine(&c.analysis, THETA, Ablation::FULL).scores, &c.analysis.backbone))
        .count();
    // In-distribution refusals must also fall back exactly, case by case.
    let mut refused = 0;
    let mut refused_identical = 0;
    for c in &cont.fit.test_cases {
        let pred = p.combine(&c.analysis, THETA, Ablation::FULL);
        if pred.decision.reason == GateReason::BelowTheta {
            refused += 1;
            refused_identical += same_bits(&pred.scores, &c.analysis.backbone) as usize;
        }
    }
    let pass = full.activation_rate == 0.0
        && identical == shifted.len()
        && full.metrics == base.metrics
        && refused > 0
        && refused_identical == refused;
    Verdict {
        id: "AC1",
        title: "fallback identity",
        pass,
        detail: format!(
            "shifted activation {:.3}, {identical}/{} cases bitwise equal, metrics equal {}, in-distribution refusals identical {refused_identical}/{refused}",
            full.activation_rate,
            shifted.len(),
            full.metrics == base.metrics
        ),
        secs: cont.secs + shift_secs + t.elapsed().as_secs_f64(),
        budget: 60.0,
    }
}

// Criterion 2: the gate refuses a test set that lies far from every archetype.
fn refusal(cont: &Fitted, shifted: &[Case], shift_secs: f64) -> Verdict {
    let t = Instant::now();
    let p = &cont.fit.predictor;
    let ratio = mean_d_min(shifted) / p.distances.mean();
    let o = score_cases(p, shifted, THETA, Ablation::FULL).unwrap();
    Verdict {
        id: "AC2",
        title: "refusal under shift (continuous, K_true=3, 2000 sequences)",
        pass: ratio >= 2.0 && o.activation_rate == 0.0 && o.mean_confidence < THETA,
        detail: format!(
            "d_min ratio {ratio:.2} (need >= 2), activation {:.3} (need 0), mean confidence {:.4} (need < {THETA})",
            o.activation_rate, o.mean_confidence
        ),
        secs: cont.secs + shift_secs + t.elapsed().as_secs_f64(),
        budget: 120.0,
    }
}

fn discrete_refusal_info(fit: &Fitted, spec: &SynthSpec) {
    let p = &fit.fit.predictor;
    let shifted = gen_shifted(&spec.with_seed(400), SHIFT).unwrap().dataset;
    let cases = analyze_cases(p, &shifted, Exec::Parallel).unwrap();
    let o = score_cases(p, &cases, THETA, Ablation::FULL).unwrap();
    println!(
        "INFO  AC2   discrete shift (V=50, K_true=3, magnitude {SHIFT}): d_min ratio {:.2}, activation {:.3}, mean confidence {:.3}",
        mean_d_min(&cases) / p.distances.mean(),
        o.activation_rate,
        o.mean_confidence
    );
}

struct ArmScores {
    lstm: Vec<EvalOutcome>,
    no_gating: Vec<EvalOutcome>,
    gated: Vec<EvalOutcome>,
    full: Vec<EvalOutcome>,
}

fn score_arms(fits: &[Fitted]) -> ArmScores {
    let arm = |a: Ablation| -> Vec<EvalOutcome> {
        fits.iter().map(|f| score_cases(&f.fit.predictor, &f.fit.test_cases, THETA, a).unwrap()).collect()
    };
    ArmScores {
        lstm: arm(Ablation::LSTM_ONLY),
        no_gating: arm(Ablation::NO_GATING),
        gated: arm(Ablation::GATED),
        full: arm(Ablation::FULL),
    }
}

fn hr10(outcomes: &[EvalOutcome]) -> Vec<f64> {
    outcomes.iter().map(|o| o.metrics.get(HR10).unwrap()).collect()
}

fn fmt_all(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" ")
}

// Criterion 3: with in-distribution data the gate opens and the blend helps.
fn activation_with_gain(arms: &ArmScores, fit_secs: f64) -> Verdict {
    let base = hr10(&arms.lstm);
    let full = hr10(&arms.full);
    let gains: Vec<f64> = base.iter().zip(&full).map(|(b, f)| 100.0 * (f - b) / b).collect();
    let every = base.iter().zip(&full).all(|(b, f)| f > b);
    let test = paired_t_test(&full, &base).unwrap();
    let act: Vec<f64> = arms.full.iter().map(|o| o.activation_rate).collect();
    let pass = every && mean(&gains) >= 10.0 && test.p < 0.05 && act.iter().all(|&a| a > 0.5);
    Verdict {
        id: "AC3",
        title: "activation with gain (discrete, 5 seeds)",
        pass,
        detail: format!(
            "HR@10 lstm [{}] lattice [{}], gain {:+.1}% (need >= +10%), p = {:.2e}, activation [{}]",
            fmt_all(&base),
            fmt_all(&full),
            mean(&gains),
            test.p,
            fmt_all(&act)
        ),
        secs: fit_secs,
        budget: 600.0,
    }
}

// Criterion 4: arm ordering in distribution, and the cost of removing the gate under shift.
fn ablation_ordering(arms: &ArmScores, disc_secs: f64, cont: &[Fitted], cont_shifted: &[Vec<Case>], cont_secs: f64) -> Verdict {
    let t = Instant::now();
    let (ng, g, l) = (mean(&hr10(&arms.no_gating)), mean(&hr10(&arms.gated)), mean(&hr10(&arms.lstm)));
    let ordered = ng >= g && g >= l;
    let mut worse = 0;
    let mut equal = 0;
    let (mut bb_mse, mut ng_mse) = (Vec::new(), Vec::new());
    for (f, cases) in cont.iter().zip(cont_shifted) {
        let p = &f.fit.predictor;
        let b = score_cases(p, cases, THETA, Ablation::LSTM_ONLY).unwrap();
        let n = score_cases(p, cases, THETA, Ablation::NO_GATING).unwrap();
        let gt = score_cases(p, cases, THETA, Ablation::GATED).unwrap();
        worse += (mse(&n) > mse(&b)) as usize;
        equal += (mse(&gt).to_bits() == mse(&b).to_bits()) as usize;
        bb_mse.push(mse(&b));
        ng_mse.push(mse(&n));
    }
    let n = cont.len();
    Verdict {
        id: "AC4",
        title: "ablation ordering",
        pass: ordered && worse == n && equal == n,
        detail: format!(
            "mean HR@10 no-gating {ng:.4} >= gated {g:.4} >= lstm {l:.4}: {ordered}; shifted MSE backbone [{}] no-gating [{}], no-gating worse {worse}/{n}, gated == backbone {equal}/{n}",
            fmt_all(&bb_mse),
            fmt_all(&ng_mse)
        ),
        secs: disc_secs + cont_secs + t.elapsed().as_secs_f64(),
        budget: 600.0,
    }
}

fn reference_metrics(scores: &[f64], target: usize) -> RankingMetrics {
    // rank by counting, no sorting: items strictly ahead plus lower-index ties
    let t = scores[target];
    let mut rank = 1;
    for (j, &s) in scores.iter().enumerate() {
        if s > t || (s == t && j < target) {
            rank += 1;
        }
    }
    let mut m = RankingMetrics::default();
    for (i, &k) in CUTOFFS.iter().enumerate() {
        if rank <= k {
            m.hr[i] = 1.0;
            m.ndcg[i] = 1.0 / ((rank + 1) as f64).log2();
        }
    }
    m.mrr = 1.0 / rank as f64;
    m
}

// Criterion 5: ranking metrics against a brute-force reference.
fn metric_oracle() -> Verdict {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut lib, mut refs) = (Vec::new(), Vec::new());
    let mut mismatches = 0;
    for case in 0..1000 {
        let v = rng.random_range(1..=60);
        // every third case draws from a handful of levels to force ties
        let scores: Vec<f64> = (0..v)
            .map(|_| if case % 3 == 0 { rng.random_range(0..4) as f64 } else { rng.random::<f64>() })
            .collect();
        let target = rng.random_range(0..v);
        let expect = reference_metrics(&scores, target);
        let by_rank = RankingMetrics::from_rank(rank_of(&scores, target));
        let ranked = top_k(&scores, v);
        let mut by_list = RankingMetrics::default();
        for (i, &k) in CUTOFFS.iter().enumerate() {
            by_list.hr[i] = lattice::evalkit::hit_rate_at_k(&ranked, target, k);
            by_list.ndcg[i] = lattice::evalkit::ndcg_at_k(&ranked, target, k);
        }
        by_list.mrr = lattice::evalkit::mrr(&ranked, target);
        if by_rank != expect || by_list != expect {
            mismatches += 1;
        }
        lib.push(by_rank);
        refs.push(expect);
    }
    let agg_equal = RankingMetrics::mean(&lib) == reference_mean(&refs);
    Verdict {
        id: "AC5",
        title: "metric oracle equivalence",
        pass: mismatches == 0 && agg_equal,
        detail: format!("1000 cases, {mismatches} per-case mismatches, aggregate equal {agg_equal}"),
        secs: t.elapsed().as_secs_f64(),
        budget: 10.0,
    }
}

fn reference_mean(cases: &[RankingMetrics]) -> RankingMetrics {
    let n = cases.len() as f64;
    let mut m = RankingMetrics::default();
    for i in 0..3 {
        m.hr[i] = cases.iter().fold(0.0, |a, c| a + c.hr[i]) / n;
        m.ndcg[i] = cases.iter().fold(0.0, |a, c| a + c.ndcg[i]) / n;
    }
    m.mrr = cases.iter().fold(0.0, |a, c| a + c.mrr) / n;
    m
}

// Criterion 6: BPTT against central differences.
fn gradients() -> Verdict {
    let t = Instant::now();
    let mut worst = 0.0f64;
    let mut max_params = 0;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(600 + seed);
        let continuous = seed % 2 == 1;
        let mode = if continuous { Mode::Continuous } else { Mode::Discrete };
        let cfg = BackboneConfig { mode, embed_dim: 3, hidden_dim: 4, seed, ..BackboneConfig::default() };
        let model = LstmBackbone::init(cfg, (!continuous).then_some(5)).unwrap();
        let len = rng.random_range(3..=8);
        let seq = if continuous {
            Sequence::values("g", (0..len).map(|_| rng.random_range(-2.0..2.0)).collect())
        } else {
            Sequence::items("g", (0..len).map(|_| rng.random_range(0..5)).collect())
        };
        let g = grad_check(&model, seq.view(), 1e-5).unwrap();
        worst = worst.max(g.max_rel_error);
        max_params = max_params.max(g.num_params);
    }
    Verdict {
        id: "AC6",
        title: "gradient correctness",
        pass: worst < 1e-4 && max_params <= 200,
        detail: format!("10 seeds, <= {max_params} parameters, max relative error {worst:.2e} (need < 1e-4)"),
        secs: t.elapsed().as_secs_f64(),
        budget: 30.0,
    }
}

fn random_point(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-scale..scale)).collect()
}

fn random_items(rng: &mut ChaCha8Rng, v: usize, n: usize, max_len: usize) -> SequenceDataset {
    let seqs = (0..n)
        .map(|i| {
            let len = rng.random_range(1..=max_len);
            Sequence::items(format!("u{i}"), (0..len).map(|_| rng.random_range(0..v)).collect())
        })
        .collect();
    SequenceDataset::discrete(ItemVocab::identity(v), seqs).unwrap()
}

// Criterion 7: transition rows and gate-on score vectors are distributions.
fn probability_invariants() -> Verdict {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut rows, mut row_err) = (0usize, 0.0f64);
    while rows < 10_000 {
        let v = rng.random_range(2..=40);
        let k = rng.random_range(1..=5);
        let n = rng.random_range(1..=30);
        let train = random_items(&mut rng, v, n, 12);
        let embs: Vec<BehaviorEmbedding> = (0..train.len()).map(|_| BehaviorEmbedding(random_point(&mut rng, 3, 1.0))).collect();
        let cents: Vec<Vec<f64>> = (0..k).map(|_| random_point(&mut rng, 3, 1.0)).collect();
        let tc = fit_transitions(&train, &embs, &cents, rng.random_range(0.01..2.0)).unwrap();
        for a in 0..k {
            for from in 0..v {
                row_err = row_err.max((tc.dense_row(a, from).iter().sum::<f64>() - 1.0).abs());
                rows += 1;
            }
        }
    }

    let (mut on, mut score_err) = (0usize, 0.0f64);
    let mut predictor_seed = 0u64;
    while on < 10_000 {
        predictor_seed += 1;
        let v = rng.random_range(2..=30);
        let k = rng.random_range(1..=5);
        let bb_cfg = BackboneConfig { mode: Mode::Discrete, embed_dim: 4, hidden_dim: 6, seed: predictor_seed, ..BackboneConfig::default() };
        let backbone = LstmBackbone::init(bb_cfg, Some(v)).unwrap();
        let train = random_items(&mut rng, v, 20, 10);
        let centroids: Vec<Vec<f64>> = (0..k).map(|_| random_point(&mut rng, 6, 0.5)).collect();
        let embs = embed_all(&backbone, &train, Exec::Sequential).unwrap();
        let structure = ArchetypeStructure::Transitions(fit_transitions(&train, &embs, &centroids, rng.random_range(0.01..2.0)).unwrap());
        let distances = DistanceDistribution::from_distances((0..50).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
        let pred = LatticePredictor {
            backbone,
            archetypes: ArchetypeModel { centroids, structure },
            distances,
            gate: GateConfig { lambda: rng.random_range(0.0..=1.0), ..GateConfig::default() },
            popularity: Some(PopularityPrior::fit(&train).unwrap()),
            popularity_weight: rng.random_range(0.0..=1.0),
            ablation: Ablation::FULL,
        };
        let inputs = random_items(&mut rng, v, 200, 15);
        for s in &inputs.sequences {
            let a = pred.analyze(s.view()).unwrap();
            let theta = rng.random_range(0.0..0.6);
            for arm in [Ablation::NO_GATING, Ablation::GATED, Ablation::FULL] {
                let p = pred.combine(&a, theta, arm);
                if p.decision.active {
                    let sum: f64 = p.scores.distribution().unwrap().iter().sum();
                    score_err = score_err.max((sum - 1.0).abs());
                    on += 1;
                }
            }
        }
    }
    Verdict {
        id: "AC7",
        title: "probability invariants",
        pass: row_err <= 1e-9 && score_err <= 1e-6,
        detail: format!(
            "{rows} transition rows, max |sum - 1| {row_err:.1e} (need <= 1e-9); {on} gate-on score vectors, max |sum - 1| {score_err:.1e} (need <= 1e-6)"
        ),
        secs: t.elapsed().as_secs_f64(),
        budget: 30.0,
    }
}

// Criterion 8: confidence is a calibrated percentile and falls with distance.
fn confidence_calibration() -> Verdict {
    let t = Instant::now();
    let spec = SynthSpec { num_sequences: 400, ..SynthSpec::default() };
    let train = gen_dataset(&spec.with_seed(800)).unwrap().dataset;
    let bb = BackboneConfig { embed_dim: 8, hidden_dim: 16, epochs: 2, batch_size: 32, learning_rate: 0.01, optimizer: Optimizer::adam(), ..backbone(Mode::Discrete) };
    let cfg = LatticeConfig { backbone: bb, ..Default::default() };
    let (p, _) = fit_lattice(&train, &cfg, Exec::Parallel).unwrap();
    let embs = embed_all(&p.backbone, &train, Exec::Parallel).unwrap();
    let cs = &p.archetypes.centroids;
    let pct = mean(&embs.iter().map(|e| 1.0 - confidence(e, cs, &p.distances).value).collect::<Vec<_>>());

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let dim = cs[0].len();
    let mut probes: Vec<(f64, f64)> = (0..5000)
        .map(|i| {
            let c = &cs[i % cs.len()];
            let scale = 3.0 * p.distances.mean() * rng.random::<f64>();
            let dir = random_point(&mut rng, dim, 1.0);
            let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            let e = BehaviorEmbedding(c.iter().zip(&dir).map(|(a, d)| a + scale * d / norm).collect());
            let conf = confidence(&e, cs, &p.distances);
            (conf.d_min, conf.value)
        })
        .collect();
    probes.sort_by(|a, b| a.0.total_cmp(&b.0));
    let violations = probes.windows(2).filter(|w| w[1].1 > w[0].1).count();
    Verdict {
        id: "AC8",
        title: "confidence calibration",
        pass: (pct - 0.5).abs() <= 0.05 && violations == 0,
        detail: format!(
            "mean training percentile {pct:.4} over {} sequences (need 0.5 +/- 0.05); {violations} monotonicity violations over {} sorted probes",
            embs.len(),
            probes.len()
        ),
        secs: t.elapsed().as_secs_f64(),
        budget: 10.0,
    }
}

fn sse(points: &[Vec<f64>], members: &[usize]) -> f64 {
    if members.is_empty() {
        return 0.0;
    }
    let dim = points[0].len();
    let c: Vec<f64> = (0..dim).map(|d| members.iter().map(|&i| points[i][d]).sum::<f64>() / members.len() as f64).collect();
    members.iter().map(|&i| points[i].iter().zip(&c).map(|(x, m)| (x - m) * (x - m)).sum::<f64>()).sum()
}

// Criterion 9: Lloyd never increases inertia and finds the optimum on tiny inputs.
fn kmeans_properties() -> Verdict {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut trace_violations = 0;
    for trial in 0..200u64 {
        let n = rng.random_range(10..=200);
        let dim = rng.random_range(1..=5);
        let pts: Vec<Vec<f64>> = (0..n).map(|_| random_point(&mut rng, dim, 10.0)).collect();
        let fit = fit_kmeans(&pts, &KMeansConfig::new(rng.random_range(1..=6), trial)).unwrap();
        trace_violations += fit.inertia_trace.windows(2).filter(|w| w[1] > w[0]).count();
    }
    let (mut worst_gap, mut trials) = (0.0f64, 0);
    for trial in 0..300u64 {
        let n = rng.random_range(2..=8);
        let dim = rng.random_range(1..=3);
        let pts: Vec<Vec<f64>> = (0..n).map(|_| random_point(&mut rng, dim, 5.0)).collect();
        let fit = fit_kmeans(&pts, &KMeansConfig::new(2, trial)).unwrap();
        // every 2-partition with both sides non-empty; the last point stays on side 0
        let best = (1..(1u32 << (n - 1)))
            .map(|mask| {
                let (a, b): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| mask >> i & 1 == 1);
                sse(&pts, &a) + sse(&pts, &b)
            })
            .fold(f64::INFINITY, f64::min);
        worst_gap = worst_gap.max((fit.inertia - best).abs() / best.max(1e-12));
        trials += 1;
    }
    Verdict {
        id: "AC9",
        title: "k-means properties",
        pass: trace_violations == 0 && worst_gap <= 1e-9,
        detail: format!(
            "200 fits, {trace_violations} inertia increases; {trials} exhaustive K=2 checks, worst relative gap to optimum {worst_gap:.1e}"
        ),
        secs: t.elapsed().as_secs_f64(),
        budget: 10.0,
    }
}

// Extended: the full MovieLens 1M comparison, only when the ratings file is supplied.
fn movielens() -> Option<Verdict> {
    let path = std::env::var("LATTICE_ML1M").ok()?;
    let t = Instant::now();
    let file = std::fs::File::open(&path).unwrap();
    let events = lattice::seqcore::read_events(std::io::BufReader::new(file)).unwrap();
    let ds = SequenceDataset::from_events(&events).unwrap();
    let split = lattice::seqcore::SplitSpec::default();
    let train = lattice::seqcore::temporal_split(&ds, &split).unwrap().train;
    let (_, test) = lattice::seqcore::history_views(&ds, &split).unwrap();
    let data = ExperimentData { train, val: None, test };
    let fits = fit_all(&data, &experiment(Mode::Discrete));
    let arms = score_arms(&fits);
    let base = hr10(&arms.lstm);
    let full = hr10(&arms.full);
    let gain = mean(&base.iter().zip(&full).map(|(b, f)| 100.0 * (f - b) / b).collect::<Vec<_>>());
    Some(Verdict {
        id: "AC10",
        title: "MovieLens 1M extended run",
        pass: gain > 15.0,
        detail: format!("HR@10 lstm [{}] lattice [{}], mean gain {gain:+.1}% (need > +15%)", fmt_all(&base), fmt_all(&full)),
        secs: t.elapsed().as_secs_f64(),
        budget: f64::INFINITY,
    })
}

fn main() {
    let mut ok = true;
    ok &= report(&metric_oracle());
    ok &= report(&gradients());
    ok &= report(&probability_invariants());
    ok &= report(&confidence_calibration());
    ok &= report(&kmeans_properties());

    let cont_spec = SynthSpec::continuous();
    let cont_data = synth_data(&cont_spec);
    let cont = fit_all(&cont_data, &experiment(Mode::Continuous));
    let t = Instant::now();
    let shifted = gen_shifted(&cont_spec.with_seed(400), SHIFT).unwrap().dataset;
    let gen_secs = t.elapsed().as_secs_f64();
    let mut cont_shifted = Vec::new();
    let mut shift_secs = Vec::new();
    for f in &cont {
        let t = Instant::now();
        cont_shifted.push(analyze_cases(&f.fit.predictor, &shifted, Exec::Parallel).unwrap());
        shift_secs.push(gen_secs + t.elapsed().as_secs_f64());
    }
    ok &= report(&fallback_identity(&cont[0], &cont_shifted[0], shift_secs[0]));
    ok &= report(&refusal(&cont[0], &cont_shifted[0], shift_secs[0]));

    let disc_spec = SynthSpec::default();
    let disc = fit_all(&synth_data(&disc_spec), &experiment(Mode::Discrete));
    discrete_refusal_info(&disc[0], &disc_spec);
    let t = Instant::now();
    let arms = score_arms(&disc);
    let disc_secs = disc.iter().map(|f| f.secs).sum::<f64>() + t.elapsed().as_secs_f64();
    ok &= report(&activation_with_gain(&arms, disc_secs));
    let cont_secs = cont.iter().map(|f| f.secs).sum::<f64>() + shift_secs.iter().sum::<f64>();
    ok &= report(&ablation_ordering(&arms, disc_secs, &cont, &cont_shifted, cont_secs));

    match movielens() {
        Some(v) => ok &= report(&v),
        None => println!("SKIP  AC10  MovieLens 1M extended run: set LATTICE_ML1M to the ratings.dat path"),
    }
    if !ok {
        std::process::exit(1);
    }
}
