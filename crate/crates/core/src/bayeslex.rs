//! Label-free re-weighting of a seed lexicon by the method of moments.
//!
//! For every term `w` two cross-moments are accumulated over documents:
//!
//! ```text
//! m+(w) = 1/D * sum_d (c_d(w) / n_d) * (s+_d excluding w / n_d)
//! m-(w) = 1/D * sum_d (c_d(w) / n_d) * (s-_d excluding w / n_d)
//! ```
//!
//! where `c_d(w)` is the effective count of `w` in document `d`, `n_d` the
//! raw document length and `s+_d`/`s-_d` the summed effective counts of
//! positive/negative seed terms. A term that co-occurs more with positive
//! seeds than negative ones gets `r(w) = m+(w) - m-(w) > 0`.
//!
//! Within each polarity the fitted weights are `|r(w)|` rescaled to sum to
//! that polarity's share of all tokens in the corpus.
//!
//! The Dirichlet-compound variant damps repeated occurrences inside one
//! document with `log2(1 + c)` before any moment is taken.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{PostCollection, TextField};
use crate::error::{Error, Result};
use crate::lexicon::{Lexicon, Polarity};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedLexicon {
    positive: BTreeSet<String>,
    negative: BTreeSet<String>,
}

impl SeedLexicon {
    pub fn new<S: Into<String>>(
        positive: impl IntoIterator<Item = S>,
        negative: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        let positive: BTreeSet<String> = positive.into_iter().map(Into::into).collect();
        let negative: BTreeSet<String> = negative.into_iter().map(Into::into).collect();
        if positive.is_empty() || negative.is_empty() {
            return Err(Error::Validation(
                "seed lexicon needs at least one positive and one negative term".into(),
            ));
        }
        if let Some(t) = positive.intersection(&negative).next() {
            return Err(Error::Validation(format!(
                "seed term {t:?} is both positive and negative"
            )));
        }
        Ok(Self { positive, negative })
    }

    /// Seeds from the polarity column of a lexicon; neutral entries are skipped.
    pub fn from_lexicon<T: Scalar>(lex: &Lexicon<T>) -> Result<Self> {
        Self::new(
            lex.terms_with(Polarity::Positive),
            lex.terms_with(Polarity::Negative),
        )
    }

    pub fn positive(&self) -> &BTreeSet<String> {
        &self.positive
    }

    pub fn negative(&self) -> &BTreeSet<String> {
        &self.negative
    }

    pub fn polarity(&self, term: &str) -> Option<Polarity> {
        if self.positive.contains(term) {
            Some(Polarity::Positive)
        } else if self.negative.contains(term) {
            Some(Polarity::Negative)
        } else {
            None
        }
    }

    pub fn lowercased(&self) -> Result<Self> {
        Self::new(
            self.positive.iter().map(|t| t.to_lowercase()),
            self.negative.iter().map(|t| t.to_lowercase()),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CountModel {
    Multinomial,
    Dcm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum VocabularyMode {
    /// Only seed terms are re-weighted.
    #[value(name = "seed")]
    SeedOnly,
    /// Every term of the corpus vocabulary gets a weight.
    Full,
}

/// Raw count under the chosen model: unchanged for the multinomial,
/// `log2(1 + raw)` for the Dirichlet-compound variant.
pub fn effective_count<T: Scalar>(raw: u64, model: CountModel) -> T {
    let raw = T::from_u64(raw).expect("count representable");
    match model {
        CountModel::Multinomial => raw,
        CountModel::Dcm => (raw + T::one()).log2(),
    }
}

/// Per-document cross-moment contributions plus the aggregates needed for
/// fitting. Sums are taken in sorted order, so document order never
/// changes a result.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentStats<T> {
    model: CountModel,
    doc_lengths: Vec<u64>,
    positive_mass: Vec<T>,
    negative_mass: Vec<T>,
    contributions: BTreeMap<String, Vec<[T; 2]>>,
}

fn sorted_sum<T: Scalar>(mut values: Vec<T>) -> T {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    values.into_iter().fold(T::zero(), |a, b| a + b)
}

impl<T: Scalar> MomentStats<T> {
    pub fn new(model: CountModel) -> Self {
        Self {
            model,
            doc_lengths: Vec::new(),
            positive_mass: Vec::new(),
            negative_mass: Vec::new(),
            contributions: BTreeMap::new(),
        }
    }

    /// Accumulates one document. Empty documents are not retained.
    pub fn add_document<'a>(
        &mut self,
        tokens: impl IntoIterator<Item = &'a str>,
        seed: &SeedLexicon,
    ) {
        let mut raw: BTreeMap<&str, u64> = BTreeMap::new();
        let mut n = 0u64;
        for t in tokens {
            *raw.entry(t).or_insert(0) += 1;
            n += 1;
        }
        if n == 0 {
            return;
        }
        let effective: Vec<(&str, T, Option<Polarity>)> = raw
            .iter()
            .map(|(t, c)| (*t, effective_count::<T>(*c, self.model), seed.polarity(t)))
            .collect();
        let mut s_pos = T::zero();
        let mut s_neg = T::zero();
        for (_, c, pol) in &effective {
            match pol {
                Some(Polarity::Positive) => s_pos = s_pos + *c,
                Some(Polarity::Negative) => s_neg = s_neg + *c,
                _ => {}
            }
        }
        let len = T::from_u64(n).unwrap();
        for (term, c, pol) in effective {
            let excl_pos = if pol == Some(Polarity::Positive) {
                (s_pos - c).max(T::zero())
            } else {
                s_pos
            };
            let excl_neg = if pol == Some(Polarity::Negative) {
                (s_neg - c).max(T::zero())
            } else {
                s_neg
            };
            let freq = c / len;
            self.contributions
                .entry(term.to_string())
                .or_default()
                .push([freq * (excl_pos / len), freq * (excl_neg / len)]);
        }
        self.doc_lengths.push(n);
        self.positive_mass.push(s_pos);
        self.negative_mass.push(s_neg);
    }

    pub fn merge(mut self, other: &Self) -> Result<Self> {
        if self.model != other.model {
            return Err(Error::Config(
                "cannot merge moments of different count models".into(),
            ));
        }
        for (term, c) in &other.contributions {
            self.contributions
                .entry(term.clone())
                .or_default()
                .extend_from_slice(c);
        }
        self.doc_lengths.extend_from_slice(&other.doc_lengths);
        self.positive_mass.extend_from_slice(&other.positive_mass);
        self.negative_mass.extend_from_slice(&other.negative_mass);
        Ok(self)
    }

    pub fn model(&self) -> CountModel {
        self.model
    }

    pub fn n_docs(&self) -> usize {
        self.doc_lengths.len()
    }

    pub fn doc_lengths(&self) -> &[u64] {
        &self.doc_lengths
    }

    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.contributions.keys().map(String::as_str)
    }

    /// `(m+(w), m-(w))`; zero for terms never seen.
    pub fn moments(&self, term: &str) -> (T, T) {
        let d = T::from_count(self.n_docs().max(1));
        self.contributions
            .get(term)
            .map_or((T::zero(), T::zero()), |c| {
                let pos = sorted_sum(c.iter().map(|x| x[0]).collect());
                let neg = sorted_sum(c.iter().map(|x| x[1]).collect());
                (pos / d, neg / d)
            })
    }

    /// Share of all corpus tokens taken by seed terms of `polarity`.
    pub fn mass_share(&self, polarity: Polarity) -> T {
        let total: u64 = self.doc_lengths.iter().sum();
        let mass = match polarity {
            Polarity::Positive => &self.positive_mass,
            Polarity::Negative => &self.negative_mass,
            Polarity::Neutral => return T::zero(),
        };
        let s = sorted_sum(mass.clone());
        if total == 0 {
            T::zero()
        } else {
            s / T::from_u64(total).unwrap()
        }
    }
}

pub fn compute_moments<T: Scalar>(
    docs: &PostCollection,
    field: TextField,
    seed: &SeedLexicon,
    model: CountModel,
) -> Result<MomentStats<T>> {
    let mut stats = MomentStats::new(model);
    for post in docs {
        if let Some(tokens) = post.tokens_for(field) {
            stats.add_document(tokens.iter().map(|t| t.surface.as_str()), seed);
        }
    }
    if stats.n_docs() == 0 {
        return Err(Error::Estimation(
            "no non-empty documents to estimate from".into(),
        ));
    }
    Ok(stats)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedLexicon<T> {
    /// Fitted probabilities, polarity from the sign of the moment difference.
    pub base: Lexicon<T>,
    pub model: CountModel,
    /// Raw moment difference `m+(w) - m-(w)` per emitted term.
    pub diagnostics: BTreeMap<String, T>,
}

impl<T: Scalar> FittedLexicon<T> {
    pub fn weight_sum(&self, polarity: Polarity) -> T {
        self.base
            .iter()
            .filter(|(_, e)| e.polarity == polarity)
            .fold(T::zero(), |a, (_, e)| a + e.weight)
    }
}

/// Turns accumulated moments into a fitted lexicon.
pub fn fit_from_moments<T: Scalar>(
    moments: &MomentStats<T>,
    seed: &SeedLexicon,
    vocabulary: VocabularyMode,
    name: &str,
) -> Result<FittedLexicon<T>> {
    let candidates: Vec<&str> = match vocabulary {
        VocabularyMode::SeedOnly => seed
            .positive()
            .iter()
            .chain(seed.negative())
            .map(String::as_str)
            .collect(),
        VocabularyMode::Full => moments.vocabulary().collect(),
    };
    let mut diagnostics = BTreeMap::new();
    let mut totals = [T::zero(); 2];
    for term in candidates {
        let (mp, mn) = moments.moments(term);
        let r = mp - mn;
        if r > T::zero() {
            totals[0] = totals[0] + r;
        } else if r < T::zero() {
            totals[1] = totals[1] - r;
        } else {
            continue;
        }
        diagnostics.insert(term.to_string(), r);
    }
    if diagnostics.is_empty() {
        return Err(Error::DegenerateFit(
            "every candidate term has zero moment difference".into(),
        ));
    }
    let shares = [
        moments.mass_share(Polarity::Positive),
        moments.mass_share(Polarity::Negative),
    ];
    let mut base = Lexicon::new(name);
    for (term, r) in &diagnostics {
        let (i, polarity) = if *r > T::zero() {
            (0, Polarity::Positive)
        } else {
            (1, Polarity::Negative)
        };
        base.insert(term.clone(), r.abs() / totals[i] * shares[i], polarity)?;
    }
    Ok(FittedLexicon {
        base,
        model: moments.model(),
        diagnostics,
    })
}

pub fn fit_bayesian_lexicon<T: Scalar>(
    docs: &PostCollection,
    field: TextField,
    seed: &SeedLexicon,
    model: CountModel,
    vocabulary: VocabularyMode,
) -> Result<FittedLexicon<T>> {
    let moments = compute_moments(docs, field, seed, model)?;
    let name = match model {
        CountModel::Multinomial => "fitted-multinomial",
        CountModel::Dcm => "fitted-dcm",
    };
    fit_from_moments(&moments, seed, vocabulary, name)
}
