//! Central finite differences against the hand-written reverse pass.

use otpool_core::embedding::BarycenterScale;
use otpool_core::toytrain::{
    backward, backward_from_logits, forward, loss, AggregatorKind, ToyModel, ToyModelConfig,
};
use otpool_core::transport::{SinkhornConfig, SinkhornDomain};

const STEP: f64 = 1e-4;
const REL_TOL: f64 = 1e-4;
const ABS_SLACK: f64 = 1e-8;

fn small_model(aggregator: AggregatorKind, l2: bool, barycenter: BarycenterScale) -> ToyModel {
    small_model_in(aggregator, l2, barycenter, SinkhornDomain::Log)
}

fn small_model_in(
    aggregator: AggregatorKind,
    l2: bool,
    barycenter: BarycenterScale,
    domain: SinkhornDomain,
) -> ToyModel {
    let cfg = ToyModelConfig {
        hidden_width: 5,
        feature_dim: 4,
        n_classes: 3,
        aggregator,
        l2_normalize: l2,
        barycenter,
        reference_init_std: 0.5,
        sinkhorn: SinkhornConfig::default().with_epsilon(1.0).with_domain(domain).unrolled(3),
    };
    let mut model = ToyModel::new(cfg, 2024).unwrap();
    // move away from the zero start so the attention softmax is exercised
    if let Some(u) = model.reference.as_mut().and_then(|r| r.attention_element_mut()) {
        u.copy_from_slice(&[0.3, -0.2, 0.5, 0.1]);
    }
    model
}

const SAMPLE: [f64; 6] = [0.0, 0.42, 1.7, 0.0, 0.93, 2.6];
const LABEL: usize = 1;

fn objective(model: &ToyModel) -> f64 {
    let (logits, _) = forward(model, &SAMPLE).unwrap();
    loss(&logits, LABEL).unwrap()
}

/// Worst violation ratio `|an − fd| / (ABS_SLACK + REL_TOL·max(|an|, |fd|))`
/// over every parameter; below 1 means the check passes.
fn gradient_check(model: &ToyModel) -> (f64, String) {
    let (_, tape) = forward(model, &SAMPLE).unwrap();
    let grads = backward(model, &tape, LABEL).unwrap();
    let analytic: Vec<(String, Vec<f64>)> =
        grads.tensors().iter().map(|(n, t)| (n.to_string(), t.to_vec())).collect();
    let mut worst = (0.0, String::new());
    for (t, (name, an)) in analytic.iter().enumerate() {
        for (i, a) in an.iter().enumerate() {
            let mut plus = model.clone();
            plus.tensors_mut()[t].1[i] += STEP;
            let mut minus = model.clone();
            minus.tensors_mut()[t].1[i] -= STEP;
            let fd = (objective(&plus) - objective(&minus)) / (2.0 * STEP);
            let ratio = (a - fd).abs() / (ABS_SLACK + REL_TOL * a.abs().max(fd.abs()));
            if ratio > worst.0 {
                worst = (ratio, format!("{name}[{i}]: analytic {a:e}, numeric {fd:e}"));
            }
        }
    }
    worst
}

#[test]
fn gradients_match_finite_differences_for_every_aggregator() {
    let kinds = [
        AggregatorKind::Stats,
        AggregatorKind::Ot { ref_size: 4 },
        AggregatorKind::OtAttention { ref_size: 4 },
    ];
    for domain in [SinkhornDomain::Scaling, SinkhornDomain::Log] {
        for kind in kinds {
            for l2 in [false, true] {
                let model = small_model_in(kind, l2, BarycenterScale::Verbatim, domain);
                let (ratio, at) = gradient_check(&model);
                assert!(ratio < 1.0, "{domain:?} {kind:?} l2={l2}: worst {ratio:.3} at {at}");
            }
        }
    }
}

#[test]
fn gradients_match_with_column_mass_rescaling() {
    let model = small_model(AggregatorKind::OtAttention { ref_size: 4 }, false, BarycenterScale::ColumnMass);
    let (ratio, at) = gradient_check(&model);
    assert!(ratio < 1.0, "worst {ratio:.3} at {at}");
}

#[test]
fn stats_model_has_no_reference_gradients() {
    let model = small_model(AggregatorKind::Stats, false, BarycenterScale::Verbatim);
    let (_, tape) = forward(&model, &SAMPLE).unwrap();
    let grads = backward(&model, &tape, LABEL).unwrap();
    assert!(grads.reference_points.is_none());
    assert!(grads.attention_element.is_none());
}

#[test]
fn zero_upstream_gives_zero_gradients() {
    for kind in [AggregatorKind::Stats, AggregatorKind::OtAttention { ref_size: 4 }] {
        let model = small_model(kind, true, BarycenterScale::Verbatim);
        let (_, tape) = forward(&model, &SAMPLE).unwrap();
        let grads = backward_from_logits(&model, &tape, &[0.0; 3]).unwrap();
        assert!(grads.is_zero());
    }
}

#[test]
fn non_finite_upstream_is_named() {
    let model = small_model(AggregatorKind::Ot { ref_size: 4 }, false, BarycenterScale::Verbatim);
    let (_, tape) = forward(&model, &SAMPLE).unwrap();
    let err = backward_from_logits(&model, &tape, &[f64::NAN, 0.0, 0.0]).unwrap_err();
    assert_eq!(err, otpool_core::Error::NonFinite { node: "logits" });
}

#[test]
fn both_domains_compute_the_same_layer() {
    let kind = AggregatorKind::OtAttention { ref_size: 4 };
    let scaling = small_model_in(kind, false, BarycenterScale::Verbatim, SinkhornDomain::Scaling);
    let log = small_model_in(kind, false, BarycenterScale::Verbatim, SinkhornDomain::Log);
    let (ls, ts) = forward(&scaling, &SAMPLE).unwrap();
    let (ll, tl) = forward(&log, &SAMPLE).unwrap();
    for (a, b) in ls.iter().zip(&ll) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
    let gs = backward(&scaling, &ts, LABEL).unwrap();
    let gl = backward(&log, &tl, LABEL).unwrap();
    for ((name, a), (_, b)) in gs.tensors().into_iter().zip(gl.tensors()) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < 1e-10 * (1.0 + x.abs()), "{name}: {x} vs {y}");
        }
    }
}
