//! Term-weight lexicons: TSV loading, PMI-difference induction from a
//! two-class corpus, and matching against token streams.
//!
//! The induced weight of a term `w` for classes `pos`/`neg` is
//!
//! ```text
//! log2 p(w,pos) / (p(w) p(pos))  -  log2 p(w,neg) / (p(w) p(neg))
//! ```
//!
//! with add-alpha smoothed token-level estimates (see [`ClassCorpusStats`]).
//! With `analyst`/`amateur` classes this is an expert-likeness score; with
//! `bullish`/`bearish` it is a market-sentiment score.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Post, TextField, Token};
use crate::error::{Error, Result};
use crate::io::read_lines;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Polarity {
    Positive,
    Negative,
    Neutral,
}

impl Polarity {
    pub fn of_sign<T: Scalar>(weight: T) -> Polarity {
        if weight > T::zero() {
            Polarity::Positive
        } else if weight < T::zero() {
            Polarity::Negative
        } else {
            Polarity::Neutral
        }
    }

    fn code(self) -> Option<&'static str> {
        match self {
            Polarity::Positive => Some("P"),
            Polarity::Negative => Some("N"),
            Polarity::Neutral => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry<T> {
    pub weight: T,
    pub polarity: Polarity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon<T> {
    name: String,
    entries: BTreeMap<String, Entry<T>>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Skip the first line.
    pub has_header: bool,
    /// Mark every entry neutral regardless of sign or polarity column.
    pub count_only: bool,
}

impl<T: Scalar> Lexicon<T> {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            entries: BTreeMap::new(),
        }
    }

    /// Builds a sign-carrying lexicon: polarity follows the sign of each weight.
    pub fn from_signed<S: Into<String>>(
        name: impl Into<String>,
        weights: impl IntoIterator<Item = (S, T)>,
    ) -> Result<Self> {
        let mut lex = Self::new(name);
        for (term, w) in weights {
            lex.insert(term, w, Polarity::of_sign(w))?;
        }
        Ok(lex)
    }

    pub fn insert(&mut self, term: impl Into<String>, weight: T, polarity: Polarity) -> Result<()> {
        let term = term.into();
        if term.is_empty() {
            return Err(Error::Validation(format!(
                "lexicon {}: empty term",
                self.name
            )));
        }
        if !weight.is_finite() {
            return Err(Error::Validation(format!(
                "lexicon {}: non-finite weight for {term:?}",
                self.name
            )));
        }
        if self.entries.contains_key(&term) {
            return Err(Error::Validation(format!(
                "lexicon {}: duplicate term {term:?}",
                self.name
            )));
        }
        self.entries.insert(term, Entry { weight, polarity });
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn get(&self, term: &str) -> Option<&Entry<T>> {
        self.entries.get(term)
    }

    pub fn weight(&self, term: &str) -> Option<T> {
        self.entries.get(term).map(|e| e.weight)
    }

    pub fn polarity(&self, term: &str) -> Option<Polarity> {
        self.entries.get(term).map(|e| e.polarity)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in term order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Entry<T>)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn terms_with(&self, polarity: Polarity) -> impl Iterator<Item = &str> {
        self.entries
            .iter()
            .filter(move |(_, e)| e.polarity == polarity)
            .map(|(k, _)| k.as_str())
    }

    /// Lowercased copy. When two terms fold together the first in term order
    /// is kept.
    pub fn folded(&self) -> Self {
        let mut entries = BTreeMap::new();
        for (term, entry) in &self.entries {
            entries.entry(term.to_lowercase()).or_insert(*entry);
        }
        Self {
            name: self.name.clone(),
            entries,
        }
    }

    /// Reads `term<TAB>weight[<TAB>P|N]`. A line with only a term gets weight 1.
    /// Without a polarity column the polarity follows the weight sign.
    pub fn load_tsv(path: &Path, name: impl Into<String>, opts: LoadOptions) -> Result<Self> {
        let mut lex = Self::new(name);
        let err = |line: usize, message: String| Error::Parse {
            path: path.display().to_string(),
            line,
            message,
        };
        for (line_no, line) in read_lines(path)?.into_iter().skip(opts.has_header as usize) {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            let term = cols[0].trim();
            let weight = match cols.get(1).map(|s| s.trim()) {
                None | Some("") => T::one(),
                Some(s) => {
                    let v: f64 = s
                        .parse()
                        .map_err(|_| err(line_no, format!("bad weight {s:?}")))?;
                    T::lit(v)
                }
            };
            let polarity = if opts.count_only {
                Polarity::Neutral
            } else {
                match cols.get(2).map(|s| s.trim()) {
                    Some("P") | Some("p") => Polarity::Positive,
                    Some("N") | Some("n") => Polarity::Negative,
                    None | Some("") => {
                        if cols.len() < 2 {
                            Polarity::Neutral
                        } else {
                            Polarity::of_sign(weight)
                        }
                    }
                    Some(other) => return Err(err(line_no, format!("bad polarity {other:?}"))),
                }
            };
            lex.insert(term, weight, polarity)
                .map_err(|e| err(line_no, e.to_string()))?;
        }
        Ok(lex)
    }

    /// `term<TAB>weight<TAB>P|N` lines in term order; neutral entries omit
    /// the polarity column.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (term, e) in &self.entries {
            let _ = match e.polarity.code() {
                Some(code) => writeln!(out, "{term}\t{}\t{code}", e.weight),
                None => writeln!(out, "{term}\t{}", e.weight),
            };
        }
        out
    }
}

/// Token counts per (term, class) for a two-class corpus, plus the
/// smoothing constant used when turning them into probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassCorpusStats<T> {
    classes: [String; 2],
    counts: BTreeMap<String, [u64; 2]>,
    class_totals: [u64; 2],
    alpha: T,
}

impl<T: Scalar> ClassCorpusStats<T> {
    /// Empty statistics over two distinct class names, stored in sorted order.
    pub fn new(class_a: &str, class_b: &str, alpha: T) -> Result<Self> {
        if class_a == class_b {
            return Err(Error::Config(format!(
                "induction needs two distinct classes, got {class_a:?} twice"
            )));
        }
        if alpha.is_nan() || alpha < T::zero() || !alpha.is_finite() {
            return Err(Error::Config(format!(
                "alpha must be finite and >= 0, got {alpha}"
            )));
        }
        let mut classes = [class_a.to_string(), class_b.to_string()];
        classes.sort();
        Ok(Self {
            classes,
            counts: BTreeMap::new(),
            class_totals: [0, 0],
            alpha,
        })
    }

    fn class_index(&self, class: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == class)
    }

    /// Adds one document's tokens under `class`.
    pub fn add_document<'a>(
        &mut self,
        class: &str,
        tokens: impl IntoIterator<Item = &'a str>,
    ) -> Result<()> {
        let ci = self.class_index(class).ok_or_else(|| {
            Error::Config(format!("class {class:?} is not one of {:?}", self.classes))
        })?;
        for t in tokens {
            self.counts.entry(t.to_string()).or_insert([0, 0])[ci] += 1;
            self.class_totals[ci] += 1;
        }
        Ok(())
    }

    /// Sums two partial tallies over the same classes.
    pub fn merge(mut self, other: &Self) -> Result<Self> {
        if self.classes != other.classes {
            return Err(Error::Config(
                "cannot merge stats over different classes".into(),
            ));
        }
        for (term, c) in &other.counts {
            let e = self.counts.entry(term.clone()).or_insert([0, 0]);
            e[0] += c[0];
            e[1] += c[1];
        }
        self.class_totals[0] += other.class_totals[0];
        self.class_totals[1] += other.class_totals[1];
        Ok(self)
    }

    pub fn classes(&self) -> &[String; 2] {
        &self.classes
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn vocab_size(&self) -> usize {
        self.counts.len()
    }

    pub fn total_tokens(&self) -> u64 {
        self.class_totals[0] + self.class_totals[1]
    }

    pub fn count(&self, term: &str, class: &str) -> u64 {
        match (self.counts.get(term), self.class_index(class)) {
            (Some(c), Some(i)) => c[i],
            _ => 0,
        }
    }

    pub fn class_total(&self, class: &str) -> u64 {
        self.class_index(class).map_or(0, |i| self.class_totals[i])
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.counts.keys().map(String::as_str)
    }

    fn denominator(&self) -> T {
        T::from_u64(self.total_tokens()).unwrap()
            + self.alpha * T::from_count(self.vocab_size()) * T::lit(2.0)
    }

    /// Smoothed joint probability `(count(w,c) + alpha) / (N + 2 alpha |V|)`.
    pub fn p_joint(&self, term: &str, class: &str) -> T {
        (T::from_u64(self.count(term, class)).unwrap() + self.alpha) / self.denominator()
    }

    pub fn p_term(&self, term: &str) -> T {
        self.p_joint(term, &self.classes[0]) + self.p_joint(term, &self.classes[1])
    }

    /// Smoothed class prior `(total(c) + alpha |V|) / (N + 2 alpha |V|)`,
    /// the marginal of [`Self::p_joint`] over terms.
    pub fn p_class(&self, class: &str) -> T {
        (T::from_u64(self.class_total(class)).unwrap()
            + self.alpha * T::from_count(self.vocab_size()))
            / self.denominator()
    }

    pub fn pmi(&self, term: &str, class: &str) -> Result<T> {
        let joint = self.p_joint(term, class);
        if joint <= T::zero() {
            return Err(Error::NumericDomain {
                term: term.to_string(),
                message: format!("zero smoothed joint probability with class {class:?}"),
            });
        }
        Ok((joint / (self.p_term(term) * self.p_class(class))).log2())
    }
}

/// Token-level statistics of `docs` (tokens from `field`), which must carry
/// exactly two distinct class labels.
pub fn collect_stats<T: Scalar>(
    docs: &[(Post, String)],
    field: TextField,
    alpha: T,
) -> Result<ClassCorpusStats<T>> {
    let mut classes: Vec<&str> = docs.iter().map(|(_, c)| c.as_str()).collect();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() != 2 {
        return Err(Error::Config(format!(
            "induction needs exactly two classes, found {}: {:?}",
            classes.len(),
            classes
        )));
    }
    let mut stats = ClassCorpusStats::new(classes[0], classes[1], alpha)?;
    for (post, class) in docs {
        let tokens = post.tokens_for(field).ok_or_else(|| {
            Error::Validation(format!("document {} has no {field:?} text", post.id))
        })?;
        stats.add_document(class, tokens.iter().map(|t| t.surface.as_str()))?;
    }
    Ok(stats)
}

/// PMI-difference lexicon: `pmi(w, pos) - pmi(w, neg)` for every term seen.
pub fn induce_pmi_lexicon<T: Scalar>(
    stats: &ClassCorpusStats<T>,
    pos_class: &str,
    neg_class: &str,
) -> Result<Lexicon<T>> {
    for c in [pos_class, neg_class] {
        if stats.class_index(c).is_none() {
            return Err(Error::Config(format!(
                "class {c:?} is not one of {:?}",
                stats.classes()
            )));
        }
    }
    if pos_class == neg_class {
        return Err(Error::Config(
            "positive and negative class must differ".into(),
        ));
    }
    let mut lex = Lexicon::new(format!("pmi:{pos_class}-{neg_class}"));
    for term in stats.terms() {
        let w = stats.pmi(term, pos_class)? - stats.pmi(term, neg_class)?;
        lex.insert(term, w, Polarity::of_sign(w))?;
    }
    Ok(lex)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    CountPositive,
    CountNegative,
    CountAll,
    SumWeights,
    SumSignedWeights,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MatchOptions<T> {
    /// Count each matched term once per post instead of once per occurrence.
    pub presence_only: bool,
    /// Ignore entries whose weight is below this value.
    pub min_weight: Option<T>,
}

/// Scores a token stream against a lexicon. Unmatched streams score 0.
pub fn match_lexicon<T: Scalar>(
    tokens: &[Token],
    lexicon: &Lexicon<T>,
    mode: MatchMode,
    opts: &MatchOptions<T>,
) -> T {
    let mut occurrences: BTreeMap<&str, usize> = BTreeMap::new();
    for t in tokens {
        if let Some(e) = lexicon.get(&t.surface) {
            if opts.min_weight.is_some_and(|m| e.weight < m) {
                continue;
            }
            *occurrences.entry(t.surface.as_str()).or_insert(0) += 1;
        }
    }
    let mut total = T::zero();
    for (term, n) in occurrences {
        let e = lexicon.get(term).expect("matched term present");
        let n = T::from_count(if opts.presence_only { 1 } else { n });
        total = total
            + match mode {
                MatchMode::CountPositive if e.polarity == Polarity::Positive => n,
                MatchMode::CountNegative if e.polarity == Polarity::Negative => n,
                MatchMode::CountAll => n,
                MatchMode::SumWeights => e.weight * n,
                MatchMode::SumSignedWeights => match e.polarity {
                    Polarity::Positive => e.weight * n,
                    Polarity::Negative => -(e.weight * n),
                    Polarity::Neutral => T::zero(),
                },
                _ => T::zero(),
            };
    }
    total
}
