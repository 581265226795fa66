use semloop_core::corpus::Document;
use semloop_core::explainers::FeatureKind;
use semloop_core::oracle::{build_topic_gs, GsParams};
use semloop_core::synthetic::{disjoint_topic_corpus, DisjointTopicSpec};
use semloop_core::topic_model::{fit_lda, select_k, CoherenceParams, InferParams, LdaModel, LdaParams, TopicMixture};

/// `k` topics over `k · per_topic` words; word `w` belongs to topic
/// `w / per_topic` with probability proportional to `w % per_topic + 1`.
fn block_model(k: usize, per_topic: usize) -> LdaModel {
    let v = k * per_topic;
    let mut phi = vec![0.0; k * v];
    let norm = (per_topic * (per_topic + 1) / 2) as f64;
    for t in 0..k {
        for i in 0..per_topic {
            phi[t * v + t * per_topic + i] = (i + 1) as f64 / norm;
        }
    }
    LdaModel { k, alpha: 0.1, beta: 0.01, vocab_size: v, vocab_hash: 0, seed: 0, phi, topic_word_counts: vec![0; k * v] }
}

#[test]
fn even_mixture_splits_tokens_evenly() {
    let lda = block_model(2, 5);
    let theta = TopicMixture(vec![0.5, 0.5]);
    for seed in 0..5 {
        let doc = lda.sample_document(&theta, 10_000, seed).unwrap();
        assert_eq!(doc.len(), 10_000);
        let share = doc.iter().filter(|&&w| w < 5).count() as f64 / 10_000.0;
        assert!((share - 0.5).abs() <= 0.02, "seed {seed}: {share}");
    }
}

#[test]
fn word_frequencies_follow_the_generative_process() {
    let lda = block_model(3, 4);
    let theta = TopicMixture(vec![0.2, 0.5, 0.3]);
    let n = 20_000;
    let doc = lda.sample_document(&theta, n, 17).unwrap();
    let mut observed = [0usize; 12];
    for &w in &doc {
        observed[w as usize] += 1;
    }
    // Expected word probability: the topic's share times the word's rank weight.
    let chi2: f64 = (0..12)
        .map(|w| {
            let p = theta.0[w / 4] * ((w % 4) + 1) as f64 / 10.0;
            let e = p * n as f64;
            (observed[w] as f64 - e).powi(2) / e
        })
        .sum();
    // 11 degrees of freedom; the 0.999 quantile is 31.26.
    assert!(chi2 < 31.26, "chi2 = {chi2}");
}

#[test]
fn sampling_rejects_off_simplex_mixtures() {
    let lda = block_model(2, 3);
    assert!(lda.sample_document(&TopicMixture(vec![0.7, 0.7]), 5, 0).is_err());
    assert!(lda.sample_document(&TopicMixture(vec![1.0]), 5, 0).is_err());
    let a = lda.sample_document(&TopicMixture(vec![0.3, 0.7]), 50, 9).unwrap();
    assert_eq!(a, lda.sample_document(&TopicMixture(vec![0.3, 0.7]), 50, 9).unwrap());
}

#[test]
fn inferred_mixture_tracks_the_generating_one() {
    let lda = block_model(3, 4);
    let tokens = lda.sample_document(&TopicMixture(vec![0.6, 0.0, 0.4]), 400, 3).unwrap();
    let (theta, assignment) = lda.infer(&tokens, &InferParams::default(), 5);
    assert!((theta.0[0] - 0.6).abs() < 0.1 && (theta.0[2] - 0.4).abs() < 0.1, "{:?}", theta.0);
    assert!(theta.0[1] < 0.05);
    // Disjoint vocabularies pin every token to its own topic.
    for (&w, &z) in tokens.iter().zip(&assignment.0) {
        assert_eq!(z, w as usize / 4);
    }
}

fn three_topic_corpus() -> semloop_core::corpus::LabeledCorpus {
    disjoint_topic_corpus(&DisjointTopicSpec {
        topics: 3,
        words_per_topic: 15,
        docs: 150,
        doc_length: 30,
        mixing: 0.05,
        seed: 4,
    })
}

#[test]
fn coherence_picks_the_generating_topic_count() {
    let corpus = three_topic_corpus();
    let params = LdaParams { iterations: 200, seed: 1, ..Default::default() };
    let sel = select_k(&corpus.documents, &corpus.vocabulary, &[2, 3, 5, 8], &params, &CoherenceParams::default()).unwrap();
    assert_eq!(sel.best_k, 3, "{:?}", sel.reports.iter().map(|(k, r)| (*k, r.mean)).collect::<Vec<_>>());
    assert_eq!(sel.reports.len(), 4);
    for (_, r) in &sel.reports {
        let mean = r.per_topic.iter().sum::<f64>() / r.per_topic.len() as f64;
        assert!((mean - r.mean).abs() < 1e-12);
    }
    let single = select_k(&corpus.documents, &corpus.vocabulary, &[7], &params, &CoherenceParams::default()).unwrap();
    assert_eq!(single.best_k, 7);
}

#[test]
fn topic_gold_standard_points_at_the_class_topic() {
    let corpus = disjoint_topic_corpus(&DisjointTopicSpec {
        topics: 2,
        words_per_topic: 20,
        docs: 200,
        doc_length: 30,
        mixing: 0.2,
        seed: 8,
    });
    let lda = fit_lda(&corpus.documents, &corpus.vocabulary, 2, &LdaParams { seed: 3, ..Default::default() }).unwrap();
    // Learned topic ids are arbitrary; map each to the generating vocabulary of
    // its strongest word.
    let owner = |t: usize| -> usize {
        let w = lda.top_words(t, 1)[0];
        corpus.vocabulary.term(w)[1..3].parse().unwrap()
    };
    let gs = build_topic_gs(&corpus, &lda, &InferParams::default(), &GsParams::default()).unwrap();
    assert_eq!(gs.kind, FeatureKind::Topic);
    for c in 0..2 {
        let top = gs.class(c).positive().next().expect("non-empty GS⁺").0 as usize;
        assert_eq!(owner(top), c);
    }
    assert!(gs.source_f1 > 0.9);
}

#[test]
fn empty_documents_are_rejected() {
    let corpus = three_topic_corpus();
    let empty = vec![Document::new("e", "", vec![])];
    assert!(fit_lda(&empty, &corpus.vocabulary, 3, &LdaParams::default()).is_err());
}
