//! User authority and the Q&A pair quality feature.

use crate::corpus::{Corpus, QAPair};

/// sqrt(best-answer count) saturates at this value.
pub const AUTHORITY_CAP: f64 = 20.0;

/// min(sqrt(A_u), 20) / 20
pub fn authority_score(best_answer_count: u64) -> f64 {
    (best_answer_count as f64).sqrt().min(AUTHORITY_CAP) / AUTHORITY_CAP
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct QualityFeature {
    pub s_asker: f64,
    pub s_answerer: f64,
}

impl QualityFeature {
    pub fn mean(self) -> f64 {
        0.5 * (self.s_asker + self.s_answerer)
    }
}

/// Authority of the asker and of the answerer. Users missing from the
/// metadata count as having no best answers.
pub fn quality_feature(pair: &QAPair, corpus: &Corpus) -> QualityFeature {
    QualityFeature {
        s_asker: authority_score(corpus.best_answer_count(&pair.asker_id)),
        s_answerer: authority_score(corpus.best_answer_count(&pair.answerer_id)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{IngestOptions, QaRecord, UserRecord};
    use proptest::prelude::*;

    #[test]
    fn authority_fixed_points() {
        assert_eq!(authority_score(0), 0.0);
        assert_eq!(authority_score(100), 0.5);
        assert_eq!(authority_score(400), 1.0);
        assert_eq!(authority_score(10_000), 1.0);
        assert_eq!(authority_score(25), 0.25);
    }

    fn corpus(asker: &str, answerer: &str, users: &[(&str, u64)]) -> Corpus {
        let rec = QaRecord {
            id: "1".into(),
            question: "q".into(),
            answer: "a".into(),
            asker: asker.into(),
            answerer: answerer.into(),
            ..Default::default()
        };
        let users = users
            .iter()
            .map(|(u, n)| UserRecord { user_id: (*u).into(), best_answer_count: *n })
            .collect();
        Corpus::from_records(vec![rec], users, &IngestOptions::default()).unwrap()
    }

    #[test]
    fn quality_pairs() {
        let c = corpus("x", "y", &[("x", 100), ("y", 400)]);
        let f = quality_feature(&c.pairs[0], &c);
        assert_eq!((f.s_asker, f.s_answerer), (0.5, 1.0));

        let c = corpus("x", "y", &[]);
        assert_eq!(quality_feature(&c.pairs[0], &c), QualityFeature::default());

        let c = corpus("x", "x", &[("x", 25)]);
        let f = quality_feature(&c.pairs[0], &c);
        assert_eq!((f.s_asker, f.s_answerer), (0.25, 0.25));
    }

    proptest! {
        #[test]
        fn authority_monotone_and_bounded(a in 0u64..1_000_000, b in 0u64..1_000_000) {
            let (lo, hi) = (a.min(b), a.max(b));
            prop_assert!(authority_score(lo) <= authority_score(hi));
            prop_assert!((0.0..=1.0).contains(&authority_score(a)));
            if a >= 400 {
                prop_assert_eq!(authority_score(a), 1.0);
            }
        }
    }
}
