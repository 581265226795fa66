use proptest::prelude::*;
use semloop_core::explainers::{Explanation, FeatureKind};
use semloop_core::learner::{ClassDistribution, Classifier, SoftmaxRegression};
use semloop_core::oracle::ClassKnowledge;
use semloop_core::strategies::{completion_mixture, correction_mixture, psi};
use semloop_core::topic_model::{GibbsSampler, InferParams, LdaModel, TopicMixture};

const TOL: f64 = 1e-9;

fn on_simplex(p: &[f64]) -> bool {
    p.iter().all(|&x| (0.0..=1.0 + TOL).contains(&x)) && (p.iter().sum::<f64>() - 1.0).abs() < TOL
}

fn mixture(k: usize) -> impl Strategy<Value = TopicMixture> {
    prop::collection::vec(0.0f64..1.0, k).prop_filter_map("non-zero", |v| psi(&v).map(TopicMixture))
}

fn explanation(k: usize) -> impl Strategy<Value = Explanation> {
    prop::collection::btree_map(0..k as u32, -1.0f64..1.0, 0..=k).prop_map(|m| Explanation {
        target_class: 0,
        kind: FeatureKind::Topic,
        features: m.into_iter().collect(),
        intercept: 0.0,
        surrogate_r2: 0.0,
        local_prediction: 0.0,
        model_prediction: 0.0,
    })
}

fn knowledge(k: usize) -> impl Strategy<Value = ClassKnowledge> {
    prop::collection::btree_map(0..k as u32, -1.0f64..1.0, 0..=k).prop_map(ClassKnowledge::new)
}

fn random_model(k: usize, v: usize) -> impl Strategy<Value = LdaModel> {
    prop::collection::vec(0.01f64..1.0, k * v).prop_map(move |raw| {
        let mut phi = raw;
        for row in phi.chunks_mut(v) {
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= s);
        }
        LdaModel { k, alpha: 0.1, beta: 0.01, vocab_size: v, vocab_hash: 0, seed: 0, phi, topic_word_counts: vec![0; k * v] }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn psi_lands_on_the_simplex(w in prop::collection::vec(0.0f64..100.0, 1..20)) {
        match psi(&w) {
            Some(p) => prop_assert!(on_simplex(&p)),
            None => prop_assert!(w.iter().all(|&x| x == 0.0)),
        }
    }

    #[test]
    fn corrected_mixtures_stay_on_the_simplex(
        theta in mixture(6),
        e in explanation(6),
        gs in knowledge(6),
        lambda in 0.0f64..=1.0,
    ) {
        if let Ok(c) = correction_mixture(&theta, &e, &gs, lambda) {
            prop_assert!(on_simplex(&c.mixture.0));
        } else {
            // Only a fully zeroed mixture without positive knowledge can fail.
            prop_assert!(gs.positive().next().is_none());
        }
        if let Some(m) = completion_mixture(&theta, &e, &gs, lambda).unwrap() {
            prop_assert!(on_simplex(&m.0));
        }
    }

    #[test]
    fn class_distributions_stay_on_the_simplex(scores in prop::collection::vec(-700.0f64..700.0, 1..12)) {
        let p = ClassDistribution::softmax(&scores);
        prop_assert!(on_simplex(&p.0));
    }

    #[test]
    fn predictions_stay_on_the_simplex(
        weights in prop::collection::vec(-5.0f64..5.0, 8 * 3),
        tokens in prop::collection::vec(0u32..8, 0..30),
    ) {
        let mut m = SoftmaxRegression::zeros(8, 3);
        m.weights = weights;
        prop_assert!(on_simplex(&m.predict_proba_tokens(&tokens).unwrap().0));
    }

    #[test]
    fn inferred_mixtures_stay_on_the_simplex(
        lda in random_model(4, 10),
        tokens in prop::collection::vec(0u32..10, 1..40),
        seed in any::<u64>(),
    ) {
        let params = InferParams { burn_in: 5, samples: 5 };
        let (theta, assignment) = lda.infer(&tokens, &params, seed);
        prop_assert!(on_simplex(&theta.0));
        prop_assert_eq!(assignment.0.len(), tokens.len());
        prop_assert!(assignment.0.iter().all(|&z| z < 4));
        prop_assert_eq!(lda.infer(&tokens, &params, seed).0, theta);
    }

    #[test]
    fn sampled_documents_have_the_requested_length(
        lda in random_model(3, 7),
        theta in mixture(3),
        length in 1usize..200,
        seed in any::<u64>(),
    ) {
        let doc = lda.sample_document(&theta, length, seed).unwrap();
        prop_assert_eq!(doc.len(), length);
        prop_assert!(doc.iter().all(|&w| w < 7));
        prop_assert_eq!(lda.sample_document(&theta, length, seed).unwrap(), doc);
    }

    #[test]
    fn gibbs_sweeps_conserve_counts(
        docs in prop::collection::vec(prop::collection::vec(0u32..12, 0..25), 1..8),
        k in 2usize..5,
        seed in any::<u64>(),
    ) {
        let mut expected = vec![0u64; 12];
        for d in &docs {
            for &w in d {
                expected[w as usize] += 1;
            }
        }
        let mut s = GibbsSampler::new(&docs, k, 12, 0.1, 0.01, seed);
        for _ in 0..3 {
            s.sweep();
            prop_assert_eq!(s.word_totals(), expected.clone());
            for (d, z) in docs.iter().zip(s.assignments()) {
                prop_assert_eq!(d.len(), z.len());
            }
        }
    }
}
