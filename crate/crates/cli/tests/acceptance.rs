//! Acceptance suite. Each criterion prints one verdict line and the
//! criteria run one at a time so their wall-clock budgets are meaningful.

use std::io::Write;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use otpool::bench::{self, BenchRow};
use otpool::checks::{self, normal_matrix};
use otpool::config::BenchConfig;
use otpool::parallel::RayonExecutor;
use otpool_core::datagen::{
    build_toy_dataset_with, make_class_set, sample_mixed_gamma, seeded_stream, uniform01, DatasetShape, ToyDataset,
};
use otpool_core::embedding::{
    attention_weights, embed, grouped_aggregate, GroupedActivation, ReferenceSet,
};
use otpool_core::toytrain::{
    backward, evaluate_with, forward, loss, train_with, AggregatorKind, ToyModel, ToyModelConfig, TrainConfig,
};
use otpool_core::transport::{sinkhorn, squared_distances, SinkhornConfig, SinkhornDomain};
use otpool_core::Matrix;
use rand_core::RngCore;
use statrs::distribution::{ContinuousCDF, Gamma};

static SERIAL: Mutex<()> = Mutex::new(());

fn report(id: &str, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    // bypasses the test harness capture so the verdict always reaches the log
    let mut out = std::io::stdout().lock();
    writeln!(out, "acceptance criterion {id} [{verdict}] {name}: {detail}").unwrap();
    out.flush().unwrap();
}

fn run(id: &str, name: &str, budget: Option<Duration>, body: impl FnOnce() -> (bool, String)) {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let (ok, detail) = body();
    let elapsed = start.elapsed();
    let in_time = budget.is_none_or(|b| elapsed <= b);
    let timing = match budget {
        Some(b) => format!("{:.2}s of {:.0}s budget", elapsed.as_secs_f64(), b.as_secs_f64()),
        None => format!("{:.2}s", elapsed.as_secs_f64()),
    };
    report(id, name, ok && in_time, &format!("{detail}; {timing}"));
    assert!(ok, "criterion {id} failed: {detail}");
    assert!(in_time, "criterion {id} over budget: {timing}");
}

fn below(rng: &mut impl RngCore, n: usize) -> usize {
    (rng.next_u64() % n as u64) as usize
}

fn uniform_matrix(rng: &mut impl RngCore, rows: usize, cols: usize) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| uniform01(rng)).collect()).unwrap()
}

fn random_weights(rng: &mut impl RngCore, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| 0.1 + uniform01(rng)).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

fn shuffled(rng: &mut impl RngCore, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, below(rng, i + 1));
    }
    order
}

#[test]
fn criterion_1_sinkhorn_feasibility() {
    run("1", "Sinkhorn feasibility", Some(Duration::from_secs(10)), || {
        let mut rng = seeded_stream(1, 0);
        let mut worst = 0.0f64;
        let mut unconverged = 0;
        for _ in 0..1000 {
            let nx = 1 + below(&mut rng, 64);
            let nz = 1 + below(&mut rng, 64);
            let d = 1 + below(&mut rng, 32);
            let eps = [0.1, 1.0, 2.0][below(&mut rng, 3)];
            let x = uniform_matrix(&mut rng, d, nx);
            let z = uniform_matrix(&mut rng, d, nz);
            let a = random_weights(&mut rng, nx);
            let b = random_weights(&mut rng, nz);
            let cost = squared_distances(&x, &z).unwrap();
            let cfg = SinkhornConfig::default().with_epsilon(eps).with_max_iterations(10_000).with_tolerance(1e-9);
            let plan = sinkhorn(&cost, &a, &b, &cfg).unwrap();
            unconverged += usize::from(!plan.converged);
            worst = worst.max(plan.marginal_residual);
        }
        (unconverged == 0 && worst < 1e-6, format!("1000 instances, {unconverged} unconverged, worst residual {worst:.2e}"))
    });
}

#[test]
fn criterion_2_small_epsilon_exactness() {
    run("2", "exactness at small epsilon", Some(Duration::from_secs(5)), || {
        let r = checks::assignment_suite(0, 100).unwrap();
        (
            r.passed(),
            format!("{} instances, {} outside 2%, worst relative error {:.3e}", r.trials, r.failures, r.worst_relative_error),
        )
    });
}

#[test]
fn criterion_3_distance_preservation() {
    run("3", "distance preservation", Some(Duration::from_secs(30)), || {
        let r = checks::distance_suite(0, 200, 16, 1.0, 20).unwrap();
        (r.passed(), format!("{} pairs, Spearman {:.4} (need >= 0.9)", r.pairs, r.spearman))
    });
}

#[test]
fn criterion_4_gradient_correctness() {
    run("4", "gradient correctness", Some(Duration::from_secs(10)), || {
        let sample = [0.0, 0.42, 1.7, 0.0, 0.93, 2.6, 0.11];
        let label = 2;
        let step = 1e-4;
        let mut worst = 0.0f64;
        let mut checked = 0;
        for domain in [SinkhornDomain::Scaling, SinkhornDomain::Log] {
            for kind in [AggregatorKind::Stats, AggregatorKind::Ot { ref_size: 3 }, AggregatorKind::OtAttention { ref_size: 3 }] {
                let cfg = ToyModelConfig {
                    hidden_width: 6,
                    feature_dim: 3,
                    n_classes: 4,
                    aggregator: kind,
                    reference_init_std: 0.5,
                    sinkhorn: SinkhornConfig::default().with_domain(domain).unrolled(20),
                    ..Default::default()
                };
                let mut model = ToyModel::new(cfg, 77).unwrap();
                if let Some(u) = model.reference.as_mut().and_then(|r| r.attention_element_mut()) {
                    u.copy_from_slice(&[0.4, -0.3, 0.2]);
                }
                let objective = |m: &ToyModel| loss(&forward(m, &sample).unwrap().0, label).unwrap();
                let (_, tape) = forward(&model, &sample).unwrap();
                let grads = backward(&model, &tape, label).unwrap();
                for (t, (_, an)) in grads.tensors().iter().enumerate() {
                    for (i, a) in an.iter().enumerate() {
                        let mut plus = model.clone();
                        plus.tensors_mut()[t].1[i] += step;
                        let mut minus = model.clone();
                        minus.tensors_mut()[t].1[i] -= step;
                        let fd = (objective(&plus) - objective(&minus)) / (2.0 * step);
                        worst = worst.max((a - fd).abs() / (1e-8 + 1e-4 * a.abs().max(fd.abs())));
                        checked += 1;
                    }
                }
            }
        }
        // ratio < 1 means |an − fd| < 1e-8 + 1e-4·max(|an|, |fd|)
        (worst < 1.0, format!("{checked} partial derivatives, worst error/tolerance ratio {worst:.3}"))
    });
}

fn smoke_model(aggregator: AggregatorKind, n_classes: usize, seed: u64) -> ToyModel {
    ToyModel::new(ToyModelConfig { aggregator, n_classes, ..Default::default() }, seed).unwrap()
}

/// Accuracy of the maximum-likelihood rule that knows every class's true
/// parameters; no learned model can beat it in expectation.
fn bayes_accuracy(ds: &ToyDataset) -> f64 {
    let ll = |c: usize, s: &[f32]| -> f64 {
        let p = &ds.classes[c];
        let g = statrs::function::gamma::ln_gamma(p.k);
        s.iter()
            .map(|&x| {
                let x = f64::from(x);
                if x == 0.0 {
                    p.p.ln()
                } else {
                    (1.0 - p.p).ln() + (p.k - 1.0) * x.ln() - x / p.theta - g - p.k * p.theta.ln()
                }
            })
            .sum()
    };
    let mut hits = 0;
    for c in 0..ds.n_classes() {
        for i in 0..ds.shape.test_per_class {
            let s = ds.test_sample(c, i);
            let best = (0..ds.n_classes()).max_by(|&a, &b| ll(a, s).total_cmp(&ll(b, s))).unwrap();
            hits += usize::from(best == c);
        }
    }
    hits as f64 / ds.test_len() as f64
}

fn toy_ordering(shape: DatasetShape, kinds: &[(&str, AggregatorKind)], train: &TrainConfig, seeds: &[u64]) -> (Vec<f64>, f64) {
    let exec = RayonExecutor::new(0).unwrap();
    let mut sums = vec![0.0; kinds.len()];
    let mut bayes = 0.0;
    for &seed in seeds {
        let ds = build_toy_dataset_with(&exec, &shape, 100 + seed).unwrap();
        bayes += bayes_accuracy(&ds) / seeds.len() as f64;
        for (k, (_, kind)) in kinds.iter().enumerate() {
            let model = smoke_model(*kind, shape.n_classes, seed);
            let cfg = TrainConfig { seed, ..train.clone() };
            let (trained, _) = train_with(&exec, &ds, model, &cfg, |_, _| {}).unwrap();
            sums[k] += evaluate_with(&exec, &trained, &ds).unwrap() / seeds.len() as f64;
        }
    }
    (sums, bayes)
}

fn describe(kinds: &[(&str, AggregatorKind)], acc: &[f64], bayes: f64) -> String {
    let parts: Vec<String> = kinds.iter().zip(acc).map(|((n, _), a)| format!("{n} {:.2}%", 100.0 * a)).collect();
    format!("{}; Bayes limit {:.2}%", parts.join(", "), 100.0 * bayes)
}

#[test]
fn criterion_5_toy_ordering_smoke() {
    run("5", "toy ordering (smoke: 20 classes, 1000 per class, 3 seeds)", Some(Duration::from_secs(15 * 60)), || {
        let shape = DatasetShape { n_classes: 20, train_per_class: 1000, test_per_class: 1000, train_set_size: 25, test_set_size: 50 };
        let kinds = [
            ("Stats", AggregatorKind::Stats),
            ("OT-2", AggregatorKind::Ot { ref_size: 2 }),
            ("OT-16", AggregatorKind::Ot { ref_size: 16 }),
        ];
        // one epoch here is 1/50 of a full-size epoch, hence the larger step
        let train = TrainConfig { epochs: 20, learning_rate: 1e-2, ..Default::default() };
        let (acc, bayes) = toy_ordering(shape, &kinds, &train, &[0, 1, 2]);
        let ok = acc[2] > acc[0] && acc[0] > acc[1];
        (ok, format!("need OT-16 > Stats > OT-2; {}", describe(&kinds, &acc, bayes)))
    });
}

#[test]
#[ignore = "full-size toy reproduction takes many hours on one core"]
fn criterion_5_toy_ordering_full() {
    run("5-full", "toy ordering (100 classes, 10^6 samples, 3 seeds)", None, || {
        let kinds = [
            ("Stats", AggregatorKind::Stats),
            ("OT-2", AggregatorKind::Ot { ref_size: 2 }),
            ("OT-8", AggregatorKind::Ot { ref_size: 8 }),
            ("OT-16", AggregatorKind::Ot { ref_size: 16 }),
            ("OT-32", AggregatorKind::Ot { ref_size: 32 }),
        ];
        let (acc, bayes) = toy_ordering(DatasetShape::default(), &kinds, &TrainConfig::default(), &[0, 1, 2]);
        let [stats, ot2, ot8, ot16, ot32] = [acc[0], acc[1], acc[2], acc[3], acc[4]];
        let ok = ot32 > ot16 && ot16 > ot8 && ot8 > stats && stats > ot2 && stats - ot2 >= 0.10 && ot32 - stats >= 0.05;
        let table = "Table 1 reference: Stats 20.6, OT-2 6.8, OT-8 26.4, OT-16 28.6, OT-32 29.8";
        (ok, format!("{}; {table}", describe(&kinds, &acc, bayes)))
    });
}

#[test]
fn criterion_6_permutation_invariance() {
    run("6", "permutation invariance", None, || {
        let mut rng = seeded_stream(6, 0);
        let kinds = [AggregatorKind::Stats, AggregatorKind::Ot { ref_size: 8 }, AggregatorKind::OtAttention { ref_size: 8 }];
        let mut worst = 0.0f64;
        for (k, kind) in kinds.iter().enumerate() {
            let mut model = smoke_model(*kind, 5, k as u64);
            if let Some(u) = model.reference.as_mut().and_then(|r| r.attention_element_mut()) {
                u.iter_mut().for_each(|x| *x = uniform01(&mut rng) - 0.5);
            }
            for _ in 0..100 {
                let n = 1 + below(&mut rng, 60);
                let x: Vec<f64> = (0..n).map(|_| 3.0 * uniform01(&mut rng)).collect();
                let order = shuffled(&mut rng, n);
                let y: Vec<f64> = order.iter().map(|&i| x[i]).collect();
                let (a, _) = forward(&model, &x).unwrap();
                let (b, _) = forward(&model, &y).unwrap();
                worst = a.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(worst, f64::max);
            }
        }
        // embeddings with and without attention
        for attention in [false, true] {
            for _ in 0..100 {
                let (d, n, nz) = (1 + below(&mut rng, 4), 1 + below(&mut rng, 50), 1 + below(&mut rng, 16));
                let x = uniform_matrix(&mut rng, d, n);
                let mut reference = ReferenceSet::new(uniform_matrix(&mut rng, d, nz)).unwrap();
                let a = if attention {
                    let u = normal_matrix(&mut rng, 1, d).into_vec();
                    reference = reference.with_attention(u.clone()).unwrap();
                    attention_weights(&u, &x).unwrap()
                } else {
                    vec![1.0 / n as f64; n]
                };
                let order = shuffled(&mut rng, n);
                let cfg = SinkhornConfig::default();
                let e1 = embed(&x, &a, &reference, &cfg).unwrap();
                let a2: Vec<f64> = order.iter().map(|&i| a[i]).collect();
                let e2 = embed(&x.select_columns(&order), &a2, &reference, &cfg).unwrap();
                worst = worst.max(e1.entries.max_abs_diff(&e2.entries).unwrap());
            }
        }
        (worst <= 1e-9, format!("300 model inputs and 200 embeddings, worst deviation {worst:.2e}"))
    });
}

#[test]
fn criterion_7_mixed_gamma_fidelity() {
    run("7", "mixed-Gamma generator fidelity", Some(Duration::from_secs(10)), || {
        let draws = 100_000;
        let triples = make_class_set(5, &mut seeded_stream(7, 0));
        let mut ok = true;
        let mut notes = Vec::new();
        for (i, t) in triples.iter().enumerate() {
            let x = sample_mixed_gamma(t, draws, &mut seeded_stream(7, 1 + i as u64)).unwrap();
            let zeros = x.iter().filter(|&&v| v == 0.0).count() as f64 / draws as f64;
            let band = 3.0 * (t.p * (1.0 - t.p) / draws as f64).sqrt();
            let mut pos: Vec<f64> = x.into_iter().filter(|&v| v > 0.0).collect();
            pos.sort_by(f64::total_cmp);
            let g = Gamma::new(t.k, 1.0 / t.theta).unwrap();
            let n = pos.len() as f64;
            let ks = pos
                .iter()
                .enumerate()
                .map(|(j, &v)| {
                    let f = g.cdf(v);
                    (f - j as f64 / n).abs().max(((j + 1) as f64 / n - f).abs())
                })
                .fold(0.0, f64::max);
            let critical = 1.628 / n.sqrt();
            ok &= (zeros - t.p).abs() <= band && ks < critical;
            notes.push(format!("p={:.3} zero-fraction {:.4} (band {:.4}), KS {:.4} < {:.4}", t.p, zeros, band, ks, critical));
        }
        (ok, notes.join("; "))
    });
}

#[test]
fn criterion_8_grouped_layout_properties() {
    run("8", "grouped aggregation layout (stands in for the non-reproducible speaker results)", None, || {
        let mut rng = seeded_stream(8, 0);
        let (c, f, t, nz) = (6, 4, 30, 5);
        let data = (0..c * f * t).map(|_| uniform01(&mut rng)).collect();
        let act = GroupedActivation::new(c, f, t, data).unwrap();
        let refs: Vec<ReferenceSet> = (0..f)
            .map(|_| ReferenceSet::new(uniform_matrix(&mut rng, c, nz)).unwrap().with_attention(vec![0.0; c]).unwrap())
            .collect();
        let cfg = SinkhornConfig::default();
        let out = grouped_aggregate(&act, &refs, &cfg, false).unwrap();
        let shape_ok = out.len() == f * c * nz;
        let norms_ok = out.chunks(c * nz).all(|g| (g.iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0).abs() < 1e-12);
        let permuted = grouped_aggregate(&act.permute_frames(&shuffled(&mut rng, t)), &refs, &cfg, false).unwrap();
        let perm = out.iter().zip(&permuted).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let neutral = grouped_aggregate(&act, &refs, &cfg, true).unwrap();
        let att = out.iter().zip(&neutral).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        (
            shape_ok && norms_ok && perm < 1e-9 && att < 1e-12,
            format!("length {} (expect {}), unit groups {norms_ok}, frame-order deviation {perm:.1e}, zero-attention deviation {att:.1e}", out.len(), f * c * nz),
        )
    });
}

#[test]
fn criterion_9_benchmark_monotonicity() {
    run("9", "benchmark monotonicity", None, || {
        let cfg = BenchConfig {
            channels: 16,
            freqs: 2,
            frames: vec![100],
            ref_sizes: vec![4, 16, 64],
            iterations: vec![5, 40, 320],
            repetitions: 30,
            ..Default::default()
        };
        let rows = bench::run(&cfg).unwrap();
        let cell = |nz: usize, it: usize| -> &BenchRow { rows.iter().find(|r| r.ref_size == nz && r.iterations == it).unwrap() };
        let mut ok = true;
        for &nz in &cfg.ref_sizes {
            for w in cfg.iterations.windows(2) {
                ok &= cell(nz, w[1]).ot_median_us > cell(nz, w[0]).ot_median_us;
            }
        }
        for &it in &cfg.iterations {
            for w in cfg.ref_sizes.windows(2) {
                ok &= cell(w[1], it).ot_median_us > cell(w[0], it).ot_median_us;
            }
        }
        ok &= rows.iter().all(|r| r.ot_median_us > r.stats_median_us);
        let base = cell(16, 40);
        let detail = format!(
            "OT median us by (N_z, iterations): {}; at N_z=16, 40 iterations OT/Stats time ratio {:.1} (report only)",
            rows.iter().map(|r| format!("({},{})={:.0}", r.ref_size, r.iterations, r.ot_median_us)).collect::<Vec<_>>().join(" "),
            base.ot_median_us / base.stats_median_us
        );
        (ok, detail)
    });
}

