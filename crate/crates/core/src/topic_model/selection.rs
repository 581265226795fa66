use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{cv_coherence, fit_lda, CoherenceParams, CoherenceReport, LdaParams};
use crate::corpus::{Document, Vocabulary};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelection {
    pub best_k: usize,
    pub reports: Vec<(usize, CoherenceReport)>,
}

/// Fits one model per candidate and returns the K with the highest mean
/// coherence; ties go to the smaller K.
pub fn select_k(
    docs: &[Document],
    vocab: &Vocabulary,
    candidates: &[usize],
    lda: &LdaParams,
    coherence: &CoherenceParams,
) -> Result<KSelection> {
    if candidates.is_empty() {
        return Err(Error::InvalidConfig("no topic-count candidates".into()));
    }
    let mut reports = Vec::with_capacity(candidates.len());
    for &k in candidates {
        let model = fit_lda(docs, vocab, k, lda)?;
        reports.push((k, cv_coherence(&model, docs, coherence)));
    }
    let best_k = reports
        .iter()
        .fold(None::<(usize, f64)>, |best, (k, r)| match best {
            Some((bk, bm)) if bm > r.mean || (bm == r.mean && bk <= *k) => Some((bk, bm)),
            _ => Some((*k, r.mean)),
        })
        .map(|(k, _)| k)
        .expect("non-empty");
    Ok(KSelection { best_k, reports })
}
