use pairdistill::corpus::{
    feature_of_segment, parse_jsonl, segment_dialogue, Corpus, Dialogue, SegmentOptions, Speaker,
};
use pairdistill::scores::{aggregate, bucketize, ece};
use pairdistill::simulator::{generate_world, simulate_draws, true_logit, LabelerDraws, WorldConfig};
use pairdistill::student::{pairwise_loss_grad, pointwise_loss_grad, Architecture, PairExample, StudentModel};
use proptest::prelude::*;

fn dialogue_strategy(d: usize) -> impl Strategy<Value = Dialogue> {
    prop::collection::vec(
        (
            prop::collection::vec(-5.0..5.0f64, d),
            any::<bool>(),
            prop::option::of("[a-z ]{0,12}"),
        ),
        1..12,
    )
    .prop_map(|rows| {
        Dialogue::new(
            "p",
            rows.into_iter().map(|(x, positive, text)| {
                let speaker = if positive { Speaker::Agent } else { Speaker::Customer };
                (speaker, text, Some(x), Some(vec![u8::from(positive)]))
            }),
        )
        .unwrap()
    })
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn model_strategy() -> impl Strategy<Value = StudentModel> {
    (1usize..5, prop_oneof![Just(None), (1usize..4).prop_map(Some)]).prop_flat_map(|(d, hidden)| {
        let arch = hidden.map_or(Architecture::Linear, |hidden| Architecture::Mlp1 { hidden });
        let n = arch.parameter_count(d);
        prop::collection::vec(-1.5..1.5f64, n).prop_map(move |theta| StudentModel::from_parts(arch, d, theta).unwrap())
    })
}

/// Central differences of an arbitrary loss, computed independently of the library.
fn numeric_gradient(theta: &[f64], loss: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let h = 1e-6;
    (0..theta.len())
        .map(|i| {
            let mut plus = theta.to_vec();
            let mut minus = theta.to_vec();
            plus[i] += h;
            minus[i] -= h;
            (loss(&plus) - loss(&minus)) / (2.0 * h)
        })
        .collect()
}

fn with_theta(model: &StudentModel, theta: &[f64]) -> StudentModel {
    StudentModel::from_parts(model.architecture, model.d, theta.to_vec()).unwrap()
}

fn assert_close(analytic: &[f64], numeric: &[f64]) -> Result<(), TestCaseError> {
    let scale = analytic.iter().chain(numeric).fold(1e-3f64, |m, v| m.max(v.abs()));
    for (a, n) in analytic.iter().zip(numeric) {
        prop_assert!((a - n).abs() / scale < 1e-5, "analytic {a} numeric {n}");
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn one_segment_per_utterance(dialogue in dialogue_strategy(3), window in prop::option::of(1usize..5)) {
        let options = SegmentOptions { window, recency: 0.7 };
        let segments = segment_dialogue(&dialogue, &options).unwrap();
        prop_assert_eq!(segments.len(), dialogue.len());
        for (i, seg) in segments.iter().enumerate() {
            prop_assert_eq!(seg.end_index, i + 1);
            prop_assert!(seg.window_start >= 1 && seg.window_start <= seg.end_index);
            if let Some(w) = window {
                prop_assert_eq!(seg.end_index - seg.window_start + 1, w.min(seg.end_index));
            } else {
                prop_assert_eq!(seg.window_start, 1);
            }
        }
    }

    #[test]
    fn unit_recency_is_plain_mean(dialogue in dialogue_strategy(4)) {
        let n = dialogue.len();
        let got = feature_of_segment(&dialogue, 1, n, 1.0).unwrap();
        for (c, got) in got.iter().enumerate() {
            let mean = dialogue.utterances.iter().map(|u| u.features.as_ref().unwrap()[c]).sum::<f64>() / n as f64;
            prop_assert!((got - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn recency_weights_brute_force(dialogue in dialogue_strategy(2), gamma in 0.05..1.0f64) {
        let n = dialogue.len();
        let got = feature_of_segment(&dialogue, 1, n, gamma).unwrap();
        let weights: Vec<f64> = (1..=n).map(|j| gamma.powi((n - j) as i32)).collect();
        let total: f64 = weights.iter().sum();
        for (c, got) in got.iter().enumerate() {
            let want = dialogue.utterances.iter().zip(&weights).map(|(u, w)| w * u.features.as_ref().unwrap()[c]).sum::<f64>() / total;
            prop_assert!((got - want).abs() < 1e-9);
        }
    }

    #[test]
    fn corpus_round_trips(dialogues in prop::collection::vec(dialogue_strategy(2), 1..4)) {
        let dialogues: Vec<Dialogue> = dialogues
            .into_iter()
            .enumerate()
            .map(|(i, d)| Dialogue { id: format!("d{i}"), ..d })
            .collect();
        let corpus = Corpus::new(dialogues).unwrap();
        let text = corpus.to_jsonl().unwrap();
        let back = parse_jsonl(text.as_bytes(), std::path::Path::new("mem")).unwrap();
        prop_assert_eq!(back, corpus);
    }

    #[test]
    fn aggregate_ignores_member_order(rows in prop::collection::vec(prop::collection::vec(0u8..2, 5), 1..8), shift in 0usize..5) {
        let rotated: Vec<Vec<u8>> = rows.iter().map(|r| { let mut r = r.clone(); r.rotate_left(shift); r }).collect();
        let draws = |draws| LabelerDraws { dialogue_id: "x".into(), class_index: 0, draws, session_bias: 0.0 };
        let a = aggregate(&draws(rows.clone())).unwrap();
        let b = aggregate(&draws(rotated)).unwrap();
        prop_assert_eq!(&a.s, &b.s);
        for (s, r) in a.s.iter().zip(&rows) {
            prop_assert!((s - r.iter().map(|&v| f64::from(v)).sum::<f64>() / 5.0).abs() < 1e-15);
        }
    }

    #[test]
    fn ece_is_bounded(items in prop::collection::vec((0.0..=1.0f64, 0u8..2), 1..200), m in 2usize..12) {
        let buckets = bucketize(&items, m).unwrap();
        prop_assert_eq!(buckets.iter().map(|b| b.count).sum::<usize>(), items.len());
        let e = ece(&buckets).unwrap();
        prop_assert!((0.0..=1.0).contains(&e));
    }

    #[test]
    fn pairwise_loss_depends_on_logit_difference(
        x in prop::collection::vec(-2.0..2.0f64, 3),
        y in prop::collection::vec(-2.0..2.0f64, 3),
        w in prop::collection::vec(-2.0..2.0f64, 3),
        bias in -5.0..5.0f64,
        ds in 0.0..1.0f64,
    ) {
        let pair = PairExample { preferred: x, other: y, delta_s: ds };
        let mut theta = w.clone();
        theta.push(0.0);
        let base = StudentModel::from_parts(Architecture::Linear, 3, theta.clone()).unwrap();
        theta[3] = bias;
        let shifted = StudentModel::from_parts(Architecture::Linear, 3, theta).unwrap();
        let (l0, _) = pairwise_loss_grad(&base, &pair, 0.5).unwrap();
        let (l1, _) = pairwise_loss_grad(&shifted, &pair, 0.5).unwrap();
        prop_assert!((l0 - l1).abs() < 1e-12);
    }

    #[test]
    fn larger_margin_costs_more(
        x in prop::collection::vec(-2.0..2.0f64, 2),
        y in prop::collection::vec(-2.0..2.0f64, 2),
        ds in 0.01..1.0f64,
        alpha in 0.0..2.0f64,
    ) {
        let model = StudentModel::from_parts(Architecture::Linear, 2, vec![0.7, -0.3, 0.1]).unwrap();
        let pair = PairExample { preferred: x, other: y, delta_s: ds };
        let (low, _) = pairwise_loss_grad(&model, &pair, alpha).unwrap();
        let (high, _) = pairwise_loss_grad(&model, &pair, alpha + 0.5).unwrap();
        prop_assert!(high > low);
    }

    #[test]
    fn pointwise_gradient_matches_finite_differences(model in model_strategy(), seed in prop::collection::vec(-2.0..2.0f64, 4), t in 0.0..=1.0f64) {
        let x = &seed[..model.d];
        let (_, analytic) = pointwise_loss_grad(&model, x, t).unwrap();
        let numeric = numeric_gradient(&model.theta, |theta| pointwise_loss_grad(&with_theta(&model, theta), x, t).unwrap().0);
        assert_close(&analytic, &numeric)?;
    }

    #[test]
    fn pairwise_gradient_matches_finite_differences(
        model in model_strategy(),
        a in prop::collection::vec(-2.0..2.0f64, 4),
        b in prop::collection::vec(-2.0..2.0f64, 4),
        ds in 0.0..1.0f64,
    ) {
        let pair = PairExample { preferred: a[..model.d].to_vec(), other: b[..model.d].to_vec(), delta_s: ds };
        let (_, analytic) = pairwise_loss_grad(&model, &pair, 0.5).unwrap();
        let numeric = numeric_gradient(&model.theta, |theta| pairwise_loss_grad(&with_theta(&model, theta), &pair, 0.5).unwrap().0);
        assert_close(&analytic, &numeric)?;
    }

    #[test]
    fn linear_pointwise_closed_form(
        theta in prop::collection::vec(-2.0..2.0f64, 4),
        x in prop::collection::vec(-3.0..3.0f64, 3),
        t in 0.0..=1.0f64,
    ) {
        let model = StudentModel::from_parts(Architecture::Linear, 3, theta.clone()).unwrap();
        let z = theta[0] * x[0] + theta[1] * x[1] + theta[2] * x[2] + theta[3];
        let (loss, grad) = pointwise_loss_grad(&model, &x, t).unwrap();
        let p = sigmoid(z);
        prop_assert!((loss - (-(t * p.ln() + (1.0 - t) * (1.0 - p).ln()))).abs() < 1e-12);
        for (i, g) in grad.iter().enumerate() {
            let xi = if i < 3 { x[i] } else { 1.0 };
            prop_assert!((g - (p - t) * xi).abs() < 1e-12);
        }
    }

    #[test]
    fn model_json_round_trips(model in model_strategy()) {
        let back = StudentModel::from_json(&model.to_json().unwrap()).unwrap();
        prop_assert_eq!(back, model);
    }
}

// Larger ensembles track the labeler's own positive rate more closely.
#[test]
fn score_error_shrinks_with_ensemble_size() {
    let config = WorldConfig {
        d: 6,
        n_dialogues: 150,
        sigma_session: 0.0,
        sigma_prompt: 0.0,
        seed: 3,
        ..WorldConfig::default()
    };
    let corpus = generate_world(&config).unwrap();
    let concepts = config.concepts();
    let mse = |k| {
        let mut total = 0.0;
        let mut n = 0;
        for (dialogue, draws) in corpus
            .dialogues
            .iter()
            .zip(simulate_draws(&corpus, k, &config, 0).unwrap())
        {
            let s = aggregate(&draws).unwrap().s;
            for (u, s) in dialogue.utterances.iter().zip(s) {
                // Bernoulli rate of one draw: logistic noise of scale sigma_draw on the clean logit
                let z = true_logit(&concepts, u.features.as_ref().unwrap(), 0).clamp(-30.0, 30.0);
                let rate = sigmoid(z / config.sigma_draw);
                total += (s - rate).powi(2);
                n += 1;
            }
        }
        total / n as f64
    };
    let errors: Vec<f64> = [1, 4, 16, 64].iter().map(|&k| mse(k)).collect();
    for pair in errors.windows(2) {
        assert!(pair[1] < pair[0], "{errors:?}");
    }
    // variance of a k-draw mean scales as 1/k
    assert!((errors[0] / errors[3] - 64.0).abs() < 16.0, "{errors:?}");
}
