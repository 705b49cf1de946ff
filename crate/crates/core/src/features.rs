//! Per-post feature components and their pool-wide min-max normalization.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::de::{self, Deserializer, MapAccess, Visitor};
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};

use crate::corpus::tokenize::TagDictionary;
use crate::corpus::{PosTag, Post, PostCollection, TextField, Token};
use crate::error::{Error, Result};
use crate::io::read_jsonl;
use crate::lexicon::{match_lexicon, Lexicon, MatchMode, MatchOptions};
use crate::scalar::Scalar;

/// The thirteen named inputs of the aggregators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Component {
    Len,
    Finprolex,
    FinwordPos,
    FinwordNeg,
    Fls,
    NonFls,
    NotFls,
    PosTone,
    NegTone,
    Lm,
    Nouns,
    Cards,
    Verbs,
}

impl Component {
    pub const ALL: [Component; 13] = [
        Component::Len,
        Component::Finprolex,
        Component::FinwordPos,
        Component::FinwordNeg,
        Component::Fls,
        Component::NonFls,
        Component::NotFls,
        Component::PosTone,
        Component::NegTone,
        Component::Lm,
        Component::Nouns,
        Component::Cards,
        Component::Verbs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Component::Len => "len",
            Component::Finprolex => "finprolex",
            Component::FinwordPos => "finword_pos",
            Component::FinwordNeg => "finword_neg",
            Component::Fls => "fls",
            Component::NonFls => "non_fls",
            Component::NotFls => "not_fls",
            Component::PosTone => "pos_tone",
            Component::NegTone => "neg_tone",
            Component::Lm => "lm",
            Component::Nouns => "nouns",
            Component::Cards => "cards",
            Component::Verbs => "verbs",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Component {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Component::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown feature component {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector<T> {
    values: [T; 13],
}

impl<T: Scalar> Default for FeatureVector<T> {
    fn default() -> Self {
        Self {
            values: [T::zero(); 13],
        }
    }
}

impl<T: Scalar> FeatureVector<T> {
    pub fn get(&self, c: Component) -> T {
        self.values[c.index()]
    }

    pub fn set(&mut self, c: Component, v: T) {
        self.values[c.index()] = v;
    }

    pub fn with(mut self, c: Component, v: T) -> Self {
        self.set(c, v);
        self
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Component, T)>) -> Self {
        let mut fv = Self::default();
        for (c, v) in pairs {
            fv.set(c, v);
        }
        fv
    }

    pub fn iter(&self) -> impl Iterator<Item = (Component, T)> + '_ {
        Component::ALL.into_iter().map(|c| (c, self.get(c)))
    }

    /// `a * self + b * other`, componentwise.
    pub fn combine(&self, a: T, other: &Self, b: T) -> Self {
        let mut out = Self::default();
        for c in Component::ALL {
            out.set(c, a * self.get(c) + b * other.get(c));
        }
        out
    }
}

impl<T: Scalar> Serialize for FeatureVector<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(13))?;
        for (c, v) in self.iter() {
            map.serialize_entry(c.name(), &v)?;
        }
        map.end()
    }
}

impl<'de, T: Scalar> Deserialize<'de> for FeatureVector<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct FvVisitor<T>(std::marker::PhantomData<T>);

        impl<'de, T: Scalar> Visitor<'de> for FvVisitor<T> {
            type Value = FeatureVector<T>;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a map of feature component names to numbers")
            }

            fn visit_map<A: MapAccess<'de>>(
                self,
                mut access: A,
            ) -> std::result::Result<Self::Value, A::Error> {
                let mut fv = FeatureVector::default();
                while let Some((k, v)) = access.next_entry::<String, T>()? {
                    let c = Component::from_str(&k).map_err(de::Error::custom)?;
                    fv.set(c, v);
                }
                Ok(fv)
            }
        }

        deserializer.deserialize_map(FvVisitor(std::marker::PhantomData))
    }
}

/// One line of the feature file emitted by `score`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FeatureRow<T> {
    pub post_id: String,
    pub components: FeatureVector<T>,
}

pub fn load_features<T: Scalar>(path: &Path) -> Result<BTreeMap<String, FeatureVector<T>>> {
    let mut out = BTreeMap::new();
    for (line, row) in read_jsonl::<FeatureRow<T>>(path)? {
        if out.insert(row.post_id.clone(), row.components).is_some() {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line,
                message: format!("duplicate post_id {:?}", row.post_id),
            });
        }
    }
    Ok(out)
}

/// Class vocabulary of an external sentence classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassSet {
    /// Forward-looking statement classes.
    Fls,
    /// Positive / negative financial tone.
    Tone,
}

impl ClassSet {
    pub fn classes(self) -> &'static [&'static str] {
        match self {
            ClassSet::Fls => &["FLS", "NON_FLS", "NOT_FLS"],
            ClassSet::Tone => &["pos_tone", "neg_tone"],
        }
    }

    pub fn components(self) -> &'static [Component] {
        match self {
            ClassSet::Fls => &[Component::Fls, Component::NonFls, Component::NotFls],
            ClassSet::Tone => &[Component::PosTone, Component::NegTone],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub post_id: String,
    pub sentence_index: usize,
    pub logits: BTreeMap<String, f64>,
}

/// Sentence-level logits from an external classifier, keyed by
/// `(post_id, sentence_index)`, stored in [`ClassSet::classes`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable<T> {
    class_set: ClassSet,
    rows: BTreeMap<(String, usize), Vec<T>>,
}

impl<T: Scalar> ScoreTable<T> {
    pub fn new(class_set: ClassSet) -> Self {
        Self {
            class_set,
            rows: BTreeMap::new(),
        }
    }

    pub fn class_set(&self) -> ClassSet {
        self.class_set
    }

    pub fn insert(
        &mut self,
        post_id: &str,
        sentence: usize,
        logits: &BTreeMap<String, T>,
    ) -> Result<()> {
        let classes = self.class_set.classes();
        if logits.len() != classes.len() || classes.iter().any(|c| !logits.contains_key(*c)) {
            return Err(Error::Format(format!(
                "post {post_id} sentence {sentence}: logit keys {:?} do not match {classes:?}",
                logits.keys().collect::<Vec<_>>()
            )));
        }
        if let Some(bad) = logits.values().find(|v| !v.is_finite()) {
            return Err(Error::Format(format!(
                "post {post_id} sentence {sentence}: non-finite logit {bad}"
            )));
        }
        let row = classes.iter().map(|c| logits[*c]).collect();
        if self
            .rows
            .insert((post_id.to_string(), sentence), row)
            .is_some()
        {
            return Err(Error::Format(format!(
                "post {post_id} sentence {sentence}: duplicate row"
            )));
        }
        Ok(())
    }

    pub fn load(path: &Path, class_set: ClassSet) -> Result<Self> {
        let mut table = Self::new(class_set);
        for (line, r) in read_jsonl::<ScoreRecord>(path)? {
            let logits = r.logits.into_iter().map(|(k, v)| (k, T::lit(v))).collect();
            table
                .insert(&r.post_id, r.sentence_index, &logits)
                .map_err(|e| Error::Parse {
                    path: path.display().to_string(),
                    line,
                    message: e.to_string(),
                })?;
        }
        Ok(table)
    }

    pub fn rows_for<'a>(&'a self, post_id: &'a str) -> impl Iterator<Item = &'a [T]> + 'a {
        self.rows
            .range((post_id.to_string(), 0)..=(post_id.to_string(), usize::MAX))
            .map(|(_, v)| v.as_slice())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// How sentence logits are folded into one post score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SentenceAggregation {
    /// Softmax per sentence, then the mean over sentences.
    #[default]
    MeanOfSoftmax,
    /// Sum logits over sentences, then one softmax.
    SoftmaxOfSum,
}

fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total = exps.iter().fold(T::zero(), |a, &b| a + b);
    exps.into_iter().map(|e| e / total).collect()
}

/// Class scores of one post in [`ClassSet::classes`] order. Posts with no
/// rows score 0 for every class.
pub fn model_score_feature<T: Scalar>(
    post_id: &str,
    table: &ScoreTable<T>,
    aggregation: SentenceAggregation,
) -> Vec<T> {
    let k = table.class_set().classes().len();
    let rows: Vec<&[T]> = table.rows_for(post_id).collect();
    if rows.is_empty() {
        return vec![T::zero(); k];
    }
    match aggregation {
        SentenceAggregation::MeanOfSoftmax => {
            let mut acc = vec![T::zero(); k];
            for row in &rows {
                for (a, p) in acc.iter_mut().zip(softmax(row)) {
                    *a = *a + p;
                }
            }
            let n = T::from_count(rows.len());
            acc.into_iter().map(|a| a / n).collect()
        }
        SentenceAggregation::SoftmaxOfSum => {
            let mut sum = vec![T::zero(); k];
            for row in &rows {
                for (s, l) in sum.iter_mut().zip(row.iter()) {
                    *s = *s + *l;
                }
            }
            softmax(&sum)
        }
    }
}

pub fn length_feature<T: Scalar>(tokens: &[Token]) -> T {
    T::from_count(tokens.len())
}

/// Raw `(nouns, cards, verbs)` occurrence counts.
pub fn pos_features(tags: &[PosTag]) -> (usize, usize, usize) {
    tags.iter().fold((0, 0, 0), |(n, c, v), t| match t {
        PosTag::Noun => (n + 1, c, v),
        PosTag::Cardinal => (n, c + 1, v),
        PosTag::Verb => (n, c, v + 1),
        PosTag::Other => (n, c, v),
    })
}

/// Min-max scaling onto `[0, 1]`; a constant pool maps to all zeros.
pub fn normalize_pool<T: Scalar>(values: &BTreeMap<String, T>) -> BTreeMap<String, T> {
    let (min, max) = values
        .values()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let range = max - min;
    values
        .iter()
        .map(|(k, &v)| {
            let scaled = if range > T::zero() {
                (v - min) / range
            } else {
                T::zero()
            };
            (k.clone(), scaled)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FinprolexMode {
    /// Occurrences of any entry.
    #[default]
    Count,
    /// Sum of entry weights, for a fitted lexicon.
    Weights,
}

/// External resources feeding the features. Anything left `None` yields a
/// zero component.
#[derive(Debug, Clone, Default)]
pub struct FeatureResources<T> {
    pub finprolex: Option<Lexicon<T>>,
    pub finprolex_mode: FinprolexMode,
    /// Market-sentiment lexicon; polarity drives the two switch counts.
    pub finword: Option<Lexicon<T>>,
    /// Fitted financial sentiment lexicon.
    pub lm: Option<Lexicon<T>>,
    pub fls: Option<ScoreTable<T>>,
    pub tone: Option<ScoreTable<T>>,
    /// Enables POS counts; the dictionary backs the fallback tagger.
    pub pos_tags: Option<TagDictionary>,
}

/// Which text each feature family reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextSelector {
    pub len: TextField,
    pub finprolex: TextField,
    pub pos: TextField,
    pub finword: TextField,
    pub lm: TextField,
}

impl Default for TextSelector {
    fn default() -> Self {
        Self {
            len: TextField::Primary,
            finprolex: TextField::Primary,
            pos: TextField::Primary,
            finword: TextField::Translated,
            lm: TextField::Translated,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct FeatureOptions<T> {
    pub text: TextSelector,
    pub sentence_aggregation: SentenceAggregation,
    /// Lowercase tokens and lexicon terms before matching.
    pub fold_case: bool,
    pub presence_only: bool,
    pub finprolex_min_weight: Option<T>,
    /// Components left unnormalized.
    pub raw_components: BTreeSet<Component>,
}

impl<T: Scalar> FeatureOptions<T> {
    pub fn standard() -> Self {
        Self {
            fold_case: true,
            ..Self::default()
        }
    }
}

fn tokens_of<'a>(post: &'a Post, field: TextField) -> std::borrow::Cow<'a, [Token]> {
    post.tokens_for(field).unwrap_or_else(|| {
        log::debug!("post {} has no {field:?} text; using primary", post.id);
        post.primary_tokens()
    })
}

fn folded_tokens(tokens: &[Token]) -> Vec<Token> {
    tokens
        .iter()
        .map(|t| Token {
            surface: t.surface.to_lowercase(),
            pos: t.pos,
        })
        .collect()
}

/// Raw (unnormalized) components of one post.
pub fn raw_features<T: Scalar>(
    post: &Post,
    res: &FeatureResources<T>,
    opts: &FeatureOptions<T>,
) -> FeatureVector<T> {
    let mut fv = FeatureVector::default();
    fv.set(
        Component::Len,
        length_feature(&tokens_of(post, opts.text.len)),
    );

    let lexicon_tokens = |field: TextField| -> Vec<Token> {
        let t = tokens_of(post, field);
        if opts.fold_case {
            folded_tokens(&t)
        } else {
            t.into_owned()
        }
    };
    let base = MatchOptions {
        presence_only: opts.presence_only,
        min_weight: None,
    };

    if let Some(lex) = &res.finprolex {
        let tokens = lexicon_tokens(opts.text.finprolex);
        let mode = match res.finprolex_mode {
            FinprolexMode::Count => MatchMode::CountAll,
            FinprolexMode::Weights => MatchMode::SumWeights,
        };
        let mo = MatchOptions {
            min_weight: opts.finprolex_min_weight,
            ..base
        };
        fv.set(Component::Finprolex, match_lexicon(&tokens, lex, mode, &mo));
    }
    if let Some(lex) = &res.finword {
        let tokens = lexicon_tokens(opts.text.finword);
        fv.set(
            Component::FinwordPos,
            match_lexicon(&tokens, lex, MatchMode::CountPositive, &base),
        );
        fv.set(
            Component::FinwordNeg,
            match_lexicon(&tokens, lex, MatchMode::CountNegative, &base),
        );
    }
    if let Some(lex) = &res.lm {
        let tokens = lexicon_tokens(opts.text.lm);
        fv.set(
            Component::Lm,
            match_lexicon(&tokens, lex, MatchMode::SumSignedWeights, &base),
        );
    }
    for table in [&res.fls, &res.tone].into_iter().flatten() {
        let scores = model_score_feature(&post.id, table, opts.sentence_aggregation);
        for (c, s) in table.class_set().components().iter().zip(scores) {
            fv.set(*c, s);
        }
    }
    if let Some(dict) = &res.pos_tags {
        let tags = post.pos_tags(opts.text.pos, dict).unwrap_or_else(|| {
            post.pos_tags(TextField::Primary, dict)
                .expect("primary text")
        });
        let (n, c, v) = pos_features(&tags);
        fv.set(Component::Nouns, T::from_count(n));
        fv.set(Component::Cards, T::from_count(c));
        fv.set(Component::Verbs, T::from_count(v));
    }
    fv
}

fn warn_missing<T: Scalar>(res: &FeatureResources<T>) {
    let missing = [
        (res.finprolex.is_none(), "finprolex"),
        (res.finword.is_none(), "finword_pos/finword_neg"),
        (res.lm.is_none(), "lm"),
        (res.fls.is_none(), "fls/non_fls/not_fls"),
        (res.tone.is_none(), "pos_tone/neg_tone"),
        (res.pos_tags.is_none(), "nouns/cards/verbs"),
    ];
    for (absent, what) in missing {
        if absent {
            log::warn!("no resource for {what}; component set to 0");
        }
    }
}

/// Raw features for every post, then min-max normalization of each
/// component over the pool (except those listed in `raw_components`).
pub fn build_feature_vectors<T: Scalar>(
    pool: &PostCollection,
    res: &FeatureResources<T>,
    opts: &FeatureOptions<T>,
) -> BTreeMap<String, FeatureVector<T>> {
    warn_missing(res);
    let folded;
    let res = if opts.fold_case {
        folded = FeatureResources {
            finprolex: res.finprolex.as_ref().map(Lexicon::folded),
            finword: res.finword.as_ref().map(Lexicon::folded),
            lm: res.lm.as_ref().map(Lexicon::folded),
            ..res.clone()
        };
        &folded
    } else {
        res
    };
    let raw: Vec<(String, FeatureVector<T>)> = pool
        .as_slice()
        .par_iter()
        .map(|p| (p.id.clone(), raw_features(p, res, opts)))
        .collect();
    let mut out: BTreeMap<String, FeatureVector<T>> = raw.iter().cloned().collect();
    for c in Component::ALL {
        if opts.raw_components.contains(&c) {
            continue;
        }
        let column: BTreeMap<String, T> =
            raw.iter().map(|(id, fv)| (id.clone(), fv.get(c))).collect();
        for (id, v) in normalize_pool(&column) {
            out.get_mut(&id).expect("id from pool").set(c, v);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::Polarity;
    use approx::assert_relative_eq;

    fn logits(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn length_counts_tokens() {
        assert_eq!(length_feature::<f64>(&[]), 0.0);
        let toks: Vec<Token> = (0..37).map(|i| Token::new(format!("t{i}"))).collect();
        assert_eq!(length_feature::<f64>(&toks), 37.0);
    }

    #[test]
    fn supplied_tokens_win() {
        let post = Post::new("p", "台積電大漲")
            .with_tokens(vec![Token::new("台積電"), Token::new("大漲")]);
        let fallback = crate::corpus::tokenize::fallback_tokenize(&post.text_primary).len();
        assert_eq!(fallback, 5);
        assert_eq!(length_feature::<f64>(&post.primary_tokens()), 2.0);
    }

    #[test]
    fn uniform_logits() {
        let mut t = ScoreTable::<f64>::new(ClassSet::Fls);
        t.insert(
            "p",
            0,
            &logits(&[("FLS", 0.0), ("NON_FLS", 0.0), ("NOT_FLS", 0.0)]),
        )
        .unwrap();
        for v in model_score_feature("p", &t, SentenceAggregation::MeanOfSoftmax) {
            assert_relative_eq!(v, 1.0 / 3.0, max_relative = 1e-15);
        }
        assert_eq!(
            model_score_feature("q", &t, SentenceAggregation::MeanOfSoftmax),
            vec![0.0; 3]
        );
    }

    #[test]
    fn mirrored_sentences_average_to_half() {
        let mut t = ScoreTable::<f64>::new(ClassSet::Tone);
        t.insert("p", 0, &logits(&[("pos_tone", 2.0), ("neg_tone", 0.0)]))
            .unwrap();
        t.insert("p", 1, &logits(&[("pos_tone", 0.0), ("neg_tone", 2.0)]))
            .unwrap();
        let e2 = 2f64.exp();
        let oracle = (e2 / (e2 + 1.0) + 1.0 / (e2 + 1.0)) / 2.0;
        let v = model_score_feature("p", &t, SentenceAggregation::MeanOfSoftmax);
        assert_relative_eq!(v[0], oracle, max_relative = 1e-12);
        assert_relative_eq!(v[0], 0.5, max_relative = 1e-12);
        assert_relative_eq!(v[1], 0.5, max_relative = 1e-12);
        let w = model_score_feature("p", &t, SentenceAggregation::SoftmaxOfSum);
        assert_relative_eq!(w[0], 0.5, max_relative = 1e-12);
    }

    #[test]
    fn score_table_key_mismatch() {
        let mut t = ScoreTable::<f64>::new(ClassSet::Tone);
        assert!(matches!(
            t.insert("p", 0, &logits(&[("pos_tone", 1.0)])),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            t.insert("p", 0, &logits(&[("pos_tone", 1.0), ("FLS", 0.0)])),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn rows_are_per_post() {
        let mut t = ScoreTable::<f64>::new(ClassSet::Tone);
        t.insert("a", 0, &logits(&[("pos_tone", 1.0), ("neg_tone", 0.0)]))
            .unwrap();
        t.insert("ab", 0, &logits(&[("pos_tone", 0.0), ("neg_tone", 1.0)]))
            .unwrap();
        t.insert("a", 3, &logits(&[("pos_tone", 1.0), ("neg_tone", 0.0)]))
            .unwrap();
        assert_eq!(t.rows_for("a").count(), 2);
        assert_eq!(t.rows_for("ab").count(), 1);
    }

    #[test]
    fn pos_counts() {
        assert_eq!(pos_features(&[PosTag::Other, PosTag::Other]), (0, 0, 0));
        assert_eq!(
            pos_features(&[PosTag::Noun, PosTag::Noun, PosTag::Cardinal, PosTag::Verb]),
            (2, 1, 1)
        );
    }

    fn pool(values: &[(&str, f64)]) -> BTreeMap<String, f64> {
        values.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn min_max() {
        let out = normalize_pool(&pool(&[("a", 10.0), ("b", 20.0), ("c", 30.0)]));
        assert_eq!(out, pool(&[("a", 0.0), ("b", 0.5), ("c", 1.0)]));
        let flat = normalize_pool(&pool(&[("a", 5.0), ("b", 5.0)]));
        assert_eq!(flat, pool(&[("a", 0.0), ("b", 0.0)]));
        assert!(normalize_pool::<f64>(&BTreeMap::new()).is_empty());
    }

    #[test]
    fn feature_vector_serde() {
        let fv = FeatureVector::<f64>::default()
            .with(Component::Len, 0.5)
            .with(Component::Verbs, 1.0);
        let json = serde_json::to_string(&fv).unwrap();
        assert!(json.starts_with(r#"{"len":0.5,"finprolex":0.0"#));
        let back: FeatureVector<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, fv);
        let partial: FeatureVector<f64> = serde_json::from_str(r#"{"lm":0.25}"#).unwrap();
        assert_eq!(partial.get(Component::Lm), 0.25);
        assert_eq!(partial.get(Component::Len), 0.0);
        assert!(serde_json::from_str::<FeatureVector<f64>>(r#"{"bogus":1}"#).is_err());
    }

    fn sample_pool() -> PostCollection {
        PostCollection::new(vec![
            Post::new("a", "台積電 看好 目標 600").with_translation("TSMC bullish target 600 good"),
            Post::new("b", "賣出").with_translation("sell decline"),
            Post::new("c", "持有 觀望 3.5").with_translation("hold and wait"),
        ])
        .unwrap()
    }

    #[test]
    fn single_post_pool_is_all_zero() {
        let pool = PostCollection::new(vec![Post::new("x", "a b c")]).unwrap();
        let res = FeatureResources::<f64> {
            pos_tags: Some(TagDictionary::new()),
            ..Default::default()
        };
        let fvs = build_feature_vectors(&pool, &res, &FeatureOptions::standard());
        assert!(fvs["x"].iter().all(|(_, v)| v == 0.0));
    }

    #[test]
    fn base_configuration_zero_components() {
        let finword = Lexicon::from_signed(
            "ntusd",
            [("good", 1.2), ("bullish", 0.8), ("decline", -0.9)],
        )
        .unwrap();
        let res = FeatureResources {
            finword: Some(finword),
            finprolex: Some(Lexicon::from_signed("fpl", [("看", 1.0), ("目", 0.5)]).unwrap()),
            ..Default::default()
        };
        let fvs = build_feature_vectors(&sample_pool(), &res, &FeatureOptions::standard());
        for fv in fvs.values() {
            for c in [
                Component::Lm,
                Component::PosTone,
                Component::NegTone,
                Component::Nouns,
                Component::Cards,
                Component::Verbs,
            ] {
                assert_eq!(fv.get(c), 0.0);
            }
        }
        assert_eq!(fvs["a"].get(Component::FinwordPos), 1.0);
        assert_eq!(fvs["b"].get(Component::FinwordNeg), 1.0);
        assert_eq!(fvs["a"].get(Component::Len), 1.0);
        assert_eq!(fvs["b"].get(Component::Len), 0.0);
    }

    #[test]
    fn raw_components_are_kept() {
        let res = FeatureResources::<f64>::default();
        let mut opts = FeatureOptions::standard();
        opts.raw_components.insert(Component::Len);
        let fvs = build_feature_vectors(&sample_pool(), &res, &opts);
        // "台積電 看好 目標 600" -> 3 + 2 + 2 + 1 fallback tokens
        assert_eq!(fvs["a"].get(Component::Len), 8.0);
    }

    #[test]
    fn case_folding() {
        let lm = {
            let mut l = Lexicon::new("lm");
            l.insert("GOOD", 0.02626, Polarity::Positive).unwrap();
            l
        };
        let pool = sample_pool();
        let res = FeatureResources {
            lm: Some(lm),
            ..Default::default()
        };
        let mut opts = FeatureOptions::standard();
        opts.raw_components.insert(Component::Lm);
        let fvs = build_feature_vectors(&pool, &res, &opts);
        assert_eq!(fvs["a"].get(Component::Lm), 0.02626);
        opts.fold_case = false;
        let fvs = build_feature_vectors(&pool, &res, &opts);
        assert_eq!(fvs["a"].get(Component::Lm), 0.0);
    }
}
