//! Posts, labeled pairs, and their JSON-lines loaders.
//!
//! Ground-truth MPP and ML are stored as fractions (`0.2439` is 24.39%).
//! Tokens and POS tags may be supplied pre-segmented; otherwise the
//! fallback tokenizer and tagger in [`tokenize`] are used on demand.

pub mod tokenize;

use std::borrow::Cow;
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::read_jsonl;
use tokenize::{fallback_pos_tag, fallback_tokenize, TagDictionary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PosTag {
    Noun,
    Verb,
    Cardinal,
    Other,
}

impl PosTag {
    pub fn as_str(self) -> &'static str {
        match self {
            PosTag::Noun => "NOUN",
            PosTag::Verb => "VERB",
            PosTag::Cardinal => "CARDINAL",
            PosTag::Other => "OTHER",
        }
    }

    /// Accepts the four canonical names plus common tagger spellings:
    /// Penn (`NN*`, `VB*`, `CD`), universal (`NUM`), and jieba-style
    /// lowercase prefixes (`n*`, `v*`, `m`). Anything else is `OTHER`.
    pub fn parse_lenient(tag: &str) -> PosTag {
        match tag {
            "NOUN" | "noun" => return PosTag::Noun,
            "VERB" | "verb" => return PosTag::Verb,
            "CARDINAL" | "cardinal" | "CD" | "NUM" | "num" | "m" => return PosTag::Cardinal,
            "OTHER" | "other" => return PosTag::Other,
            _ => {}
        }
        if tag.starts_with("NN") || (tag.starts_with('n') && tag.len() <= 3) {
            PosTag::Noun
        } else if tag.starts_with("VB") || (tag.starts_with('v') && tag.len() <= 3) {
            PosTag::Verb
        } else {
            PosTag::Other
        }
    }
}

impl fmt::Display for PosTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub pos: Option<PosTag>,
}

impl Token {
    pub fn new(surface: impl Into<String>) -> Self {
        Self {
            surface: surface.into(),
            pos: None,
        }
    }

    pub fn tagged(surface: impl Into<String>, pos: PosTag) -> Self {
        Self {
            surface: surface.into(),
            pos: Some(pos),
        }
    }
}

/// Which text of a post a feature reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TextField {
    Primary,
    Translated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Post {
    pub id: String,
    pub text_primary: String,
    pub text_translated: Option<String>,
    pub mpp: Option<f64>,
    pub ml: Option<f64>,
    /// Pre-segmented tokens of `text_primary`.
    pub tokens: Option<Vec<Token>>,
    /// Pre-segmented tokens of `text_translated`.
    pub tokens_translated: Option<Vec<Token>>,
    /// `[start, end)` token ranges of the primary tokens.
    pub sentences: Option<Vec<Range<usize>>>,
}

impl Post {
    pub fn new(id: impl Into<String>, text_primary: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text_primary: text_primary.into(),
            text_translated: None,
            mpp: None,
            ml: None,
            tokens: None,
            tokens_translated: None,
            sentences: None,
        }
    }

    pub fn with_translation(mut self, text: impl Into<String>) -> Self {
        self.text_translated = Some(text.into());
        self
    }

    pub fn with_truth(mut self, mpp: f64, ml: f64) -> Self {
        self.mpp = Some(mpp);
        self.ml = Some(ml);
        self
    }

    pub fn with_tokens(mut self, tokens: Vec<Token>) -> Self {
        self.tokens = Some(tokens);
        self
    }

    /// Copy with both texts and any supplied token surfaces lowercased.
    pub fn case_folded(&self) -> Self {
        let fold = |tokens: &Vec<Token>| {
            tokens
                .iter()
                .map(|t| Token {
                    surface: t.surface.to_lowercase(),
                    pos: t.pos,
                })
                .collect()
        };
        Self {
            text_primary: self.text_primary.to_lowercase(),
            text_translated: self.text_translated.as_ref().map(|t| t.to_lowercase()),
            tokens: self.tokens.as_ref().map(fold),
            tokens_translated: self.tokens_translated.as_ref().map(fold),
            ..self.clone()
        }
    }

    pub fn text(&self, field: TextField) -> Option<&str> {
        match field {
            TextField::Primary => Some(&self.text_primary),
            TextField::Translated => self.text_translated.as_deref(),
        }
    }

    /// Tokens of the chosen text: supplied ones when present, otherwise the
    /// fallback segmentation. `None` only when the translated text is
    /// requested and the post has none.
    pub fn tokens_for(&self, field: TextField) -> Option<Cow<'_, [Token]>> {
        let (supplied, text) = match field {
            TextField::Primary => (self.tokens.as_deref(), Some(self.text_primary.as_str())),
            TextField::Translated => (
                self.tokens_translated.as_deref(),
                self.text_translated.as_deref(),
            ),
        };
        match (supplied, text) {
            (Some(tokens), _) => Some(Cow::Borrowed(tokens)),
            (None, Some(text)) => Some(Cow::Owned(fallback_tokenize(text))),
            (None, None) => None,
        }
    }

    /// Primary tokens, supplied or fallback.
    pub fn primary_tokens(&self) -> Cow<'_, [Token]> {
        self.tokens_for(TextField::Primary)
            .expect("primary text always present")
    }

    /// POS tags of the chosen text; supplied tags win over the fallback tagger.
    pub fn pos_tags(&self, field: TextField, dict: &TagDictionary) -> Option<Vec<PosTag>> {
        let tokens = self.tokens_for(field)?;
        Some(
            tokens
                .iter()
                .map(|t| t.pos.unwrap_or_else(|| fallback_pos_tag(t, dict)))
                .collect(),
        )
    }

    fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::Validation("post id must be non-empty".into()));
        }
        for (field, tokens) in [
            ("tokens", &self.tokens),
            ("tokens_translated", &self.tokens_translated),
        ] {
            if let Some(tokens) = tokens {
                if tokens.iter().any(|t| t.surface.is_empty()) {
                    return Err(Error::Validation(format!(
                        "post {}: empty surface in {field}",
                        self.id
                    )));
                }
            }
        }
        if let Some(sentences) = &self.sentences {
            let n_tokens = self.primary_tokens().len();
            let mut prev_end = 0;
            for r in sentences {
                if r.start >= r.end || r.start < prev_end || r.end > n_tokens {
                    return Err(Error::Validation(format!(
                        "post {}: sentence range [{}, {}) is empty, overlapping, out of order, or beyond {} tokens",
                        self.id, r.start, r.end, n_tokens
                    )));
                }
                prev_end = r.end;
            }
        }
        Ok(())
    }
}

/// Wire form of a post, one JSON object per line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PostRecord {
    pub id: String,
    pub text_primary: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text_translated: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mpp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ml: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens_translated: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos_translated: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentences: Option<Vec<[usize; 2]>>,
}

fn zip_tags(
    id: &str,
    tokens: Option<Vec<String>>,
    pos: Option<Vec<String>>,
) -> Result<Option<Vec<Token>>> {
    match (tokens, pos) {
        (None, None) => Ok(None),
        (None, Some(_)) => Err(Error::Validation(format!(
            "post {id}: pos tags given without tokens"
        ))),
        (Some(tokens), None) => Ok(Some(tokens.into_iter().map(Token::new).collect())),
        (Some(tokens), Some(tags)) => {
            if tokens.len() != tags.len() {
                return Err(Error::Validation(format!(
                    "post {id}: {} tokens but {} pos tags",
                    tokens.len(),
                    tags.len()
                )));
            }
            Ok(Some(
                tokens
                    .into_iter()
                    .zip(tags)
                    .map(|(s, t)| Token::tagged(s, PosTag::parse_lenient(&t)))
                    .collect(),
            ))
        }
    }
}

fn split_tags(tokens: &Option<Vec<Token>>) -> (Option<Vec<String>>, Option<Vec<String>>) {
    match tokens {
        None => (None, None),
        Some(tokens) => {
            let surfaces = tokens.iter().map(|t| t.surface.clone()).collect();
            let tags = if tokens.iter().all(|t| t.pos.is_some()) && !tokens.is_empty() {
                Some(
                    tokens
                        .iter()
                        .map(|t| t.pos.unwrap().as_str().to_string())
                        .collect(),
                )
            } else {
                None
            };
            (Some(surfaces), tags)
        }
    }
}

impl TryFrom<PostRecord> for Post {
    type Error = Error;

    fn try_from(r: PostRecord) -> Result<Self> {
        let tokens = zip_tags(&r.id, r.tokens, r.pos)?;
        let tokens_translated = zip_tags(&r.id, r.tokens_translated, r.pos_translated)?;
        let post = Post {
            id: r.id,
            text_primary: r.text_primary,
            text_translated: r.text_translated,
            mpp: r.mpp,
            ml: r.ml,
            tokens,
            tokens_translated,
            sentences: r
                .sentences
                .map(|s| s.into_iter().map(|[a, b]| a..b).collect()),
        };
        post.validate()?;
        Ok(post)
    }
}

impl From<&Post> for PostRecord {
    fn from(p: &Post) -> Self {
        let (tokens, pos) = split_tags(&p.tokens);
        let (tokens_translated, pos_translated) = split_tags(&p.tokens_translated);
        PostRecord {
            id: p.id.clone(),
            text_primary: p.text_primary.clone(),
            text_translated: p.text_translated.clone(),
            mpp: p.mpp,
            ml: p.ml,
            tokens,
            pos,
            tokens_translated,
            pos_translated,
            sentences: p
                .sentences
                .as_ref()
                .map(|s| s.iter().map(|r| [r.start, r.end]).collect()),
        }
    }
}

/// Posts in file order with unique ids.
#[derive(Debug, Clone, Default)]
pub struct PostCollection {
    posts: Vec<Post>,
    index: HashMap<String, usize>,
}

impl PostCollection {
    pub fn new(posts: Vec<Post>) -> Result<Self> {
        let mut index = HashMap::with_capacity(posts.len());
        for (i, post) in posts.iter().enumerate() {
            post.validate()?;
            if index.insert(post.id.clone(), i).is_some() {
                return Err(Error::Validation(format!(
                    "duplicate post id {:?}",
                    post.id
                )));
            }
        }
        Ok(Self { posts, index })
    }

    pub fn get(&self, id: &str) -> Option<&Post> {
        self.index.get(id).map(|&i| &self.posts[i])
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Post> {
        self.posts.iter()
    }

    pub fn as_slice(&self) -> &[Post] {
        &self.posts
    }

    pub fn len(&self) -> usize {
        self.posts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posts.is_empty()
    }
}

impl<'a> IntoIterator for &'a PostCollection {
    type Item = &'a Post;
    type IntoIter = std::slice::Iter<'a, Post>;

    fn into_iter(self) -> Self::IntoIter {
        self.posts.iter()
    }
}

fn line_error(path: &Path, line: usize, err: Error) -> Error {
    match err {
        Error::Validation(message) => Error::Parse {
            path: path.display().to_string(),
            line,
            message,
        },
        other => other,
    }
}

/// Loads a post-JSONL file. Blank lines are ignored.
pub fn load_posts(path: &Path) -> Result<PostCollection> {
    let mut posts = Vec::new();
    let mut seen = HashSet::new();
    for (line, record) in read_jsonl::<PostRecord>(path)? {
        let post = Post::try_from(record).map_err(|e| line_error(path, line, e))?;
        if !seen.insert(post.id.clone()) {
            return Err(Error::Validation(format!(
                "{}:{line}: duplicate post id {:?}",
                path.display(),
                post.id
            )));
        }
        posts.push(post);
    }
    PostCollection::new(posts)
}

/// Loads post-JSONL records that carry a class label under `class_field`,
/// for two-class lexicon induction.
pub fn load_class_docs(path: &Path, class_field: &str) -> Result<Vec<(Post, String)>> {
    let mut docs = Vec::new();
    for (line, value) in read_jsonl::<serde_json::Value>(path)? {
        let class = value
            .get(class_field)
            .and_then(|v| v.as_str())
            .ok_or_else(|| Error::Parse {
                path: path.display().to_string(),
                line,
                message: format!("missing string field {class_field:?}"),
            })?
            .to_string();
        let record: PostRecord = serde_json::from_value(value).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line,
            message: e.to_string(),
        })?;
        let post = Post::try_from(record).map_err(|e| line_error(path, line, e))?;
        docs.push((post, class));
    }
    Ok(docs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPair {
    pub post1: Post,
    pub post2: Post,
    pub mpp_label: u8,
    pub ml_label: u8,
}

impl LabeledPair {
    pub fn new(post1: Post, post2: Post, mpp_label: u8, ml_label: u8) -> Result<Self> {
        for (name, label) in [("mpp_label", mpp_label), ("ml_label", ml_label)] {
            if label > 1 {
                return Err(Error::Validation(format!(
                    "{name} must be 0 or 1, got {label}"
                )));
            }
        }
        Ok(Self {
            post1,
            post2,
            mpp_label,
            ml_label,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairRecord {
    pub post1: PostRecord,
    pub post2: PostRecord,
    pub mpp_label: i64,
    pub ml_label: i64,
}

impl TryFrom<PairRecord> for LabeledPair {
    type Error = Error;

    fn try_from(r: PairRecord) -> Result<Self> {
        let label = |name: &str, v: i64| -> Result<u8> {
            match v {
                0 | 1 => Ok(v as u8),
                _ => Err(Error::Validation(format!("{name} must be 0 or 1, got {v}"))),
            }
        };
        let mpp = label("mpp_label", r.mpp_label)?;
        let ml = label("ml_label", r.ml_label)?;
        LabeledPair::new(Post::try_from(r.post1)?, Post::try_from(r.post2)?, mpp, ml)
    }
}

impl From<&LabeledPair> for PairRecord {
    fn from(p: &LabeledPair) -> Self {
        PairRecord {
            post1: (&p.post1).into(),
            post2: (&p.post2).into(),
            mpp_label: p.mpp_label.into(),
            ml_label: p.ml_label.into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairCollection {
    pairs: Vec<LabeledPair>,
}

impl PairCollection {
    pub fn new(pairs: Vec<LabeledPair>) -> Self {
        Self { pairs }
    }

    pub fn iter(&self) -> std::slice::Iter<'_, LabeledPair> {
        self.pairs.iter()
    }

    pub fn as_slice(&self) -> &[LabeledPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn into_vec(self) -> Vec<LabeledPair> {
        self.pairs
    }

    /// Distinct posts across all pairs, first occurrence wins, in order of
    /// appearance.
    pub fn distinct_posts(&self) -> Result<PostCollection> {
        let mut seen = HashSet::new();
        let mut posts = Vec::new();
        for pair in &self.pairs {
            for post in [&pair.post1, &pair.post2] {
                if seen.insert(post.id.as_str()) {
                    posts.push(post.clone());
                }
            }
        }
        PostCollection::new(posts)
    }
}

impl<'a> IntoIterator for &'a PairCollection {
    type Item = &'a LabeledPair;
    type IntoIter = std::slice::Iter<'a, LabeledPair>;

    fn into_iter(self) -> Self::IntoIter {
        self.pairs.iter()
    }
}

pub fn load_pairs(path: &Path) -> Result<PairCollection> {
    let mut pairs = Vec::new();
    for (line, record) in read_jsonl::<PairRecord>(path)? {
        pairs.push(LabeledPair::try_from(record).map_err(|e| line_error(path, line, e))?);
    }
    Ok(PairCollection::new(pairs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn single_record() {
        let f = write_tmp(r#"{"id":"p1","text_primary":"買進台積電","mpp":0.1,"ml":-0.05}"#);
        let posts = load_posts(f.path()).unwrap();
        assert_eq!(posts.len(), 1);
        let p = posts.get("p1").unwrap();
        assert_eq!(p.text_primary, "買進台積電");
        assert_eq!(p.mpp, Some(0.1));
        assert_eq!(p.ml, Some(-0.05));
    }

    #[test]
    fn empty_file() {
        let f = write_tmp("");
        assert!(load_posts(f.path()).unwrap().is_empty());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let f = write_tmp(
            "{\"id\":\"p1\",\"text_primary\":\"a\"}\n{\"id\":\"p1\",\"text_primary\":\"b\"}\n",
        );
        let err = load_posts(f.path()).unwrap_err();
        assert!(
            matches!(err, Error::Validation(ref m) if m.contains("duplicate")),
            "{err}"
        );
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let f = write_tmp("{\"id\":\"p1\",\"text_primary\":\"a\"}\n{not json\n");
        match load_posts(f.path()).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn missing_file() {
        let err = load_posts(Path::new("/nonexistent/posts.jsonl")).unwrap_err();
        assert!(matches!(err, Error::MissingFile(_)));
        assert!(err.is_validation());
    }

    #[test]
    fn supplied_tokens_and_tags() {
        let f = write_tmp(
            r#"{"id":"p","text_primary":"x","tokens":["台積電","漲","3"],"pos":["n","v","m"],"sentences":[[0,2],[2,3]]}"#,
        );
        let posts = load_posts(f.path()).unwrap();
        let p = posts.get("p").unwrap();
        let tags: Vec<_> = p
            .tokens
            .as_ref()
            .unwrap()
            .iter()
            .map(|t| t.pos.unwrap())
            .collect();
        assert_eq!(tags, [PosTag::Noun, PosTag::Verb, PosTag::Cardinal]);
        assert_eq!(p.sentences.as_ref().unwrap(), &vec![0..2, 2..3]);
    }

    #[test]
    fn bad_sentence_ranges() {
        for sentences in ["[[0,2],[1,3]]", "[[1,1]]", "[[0,9]]", "[[2,3],[0,1]]"] {
            let f = write_tmp(&format!(
                r#"{{"id":"p","text_primary":"a b c","sentences":{sentences}}}"#
            ));
            assert!(load_posts(f.path()).is_err(), "{sentences}");
        }
    }

    #[test]
    fn misaligned_tags() {
        let f = write_tmp(r#"{"id":"p","text_primary":"x","tokens":["a","b"],"pos":["NOUN"]}"#);
        assert!(load_posts(f.path()).is_err());
    }

    fn pair_line(mpp: i64, ml: i64) -> String {
        format!(
            r#"{{"post1":{{"id":"a","text_primary":"x"}},"post2":{{"id":"b","text_primary":"y"}},"mpp_label":{mpp},"ml_label":{ml}}}"#
        )
    }

    #[test]
    fn pairs_round_trip() {
        let f = write_tmp(&pair_line(1, 0));
        let pairs = load_pairs(f.path()).unwrap();
        assert_eq!(pairs.len(), 1);
        let p = &pairs.as_slice()[0];
        assert_eq!((p.mpp_label, p.ml_label), (1, 0));
        assert_eq!(p.post1.id, "a");
        assert_eq!(p.post2.text_primary, "y");
    }

    #[test]
    fn pair_label_out_of_domain() {
        let f = write_tmp(&pair_line(2, 0));
        assert!(load_pairs(f.path()).is_err());
        let f = write_tmp(&pair_line(0, -1));
        assert!(load_pairs(f.path()).is_err());
    }

    #[test]
    fn hundred_pairs_in_order() {
        let lines: Vec<String> = (0..100)
            .map(|i| {
                format!(
                    r#"{{"post1":{{"id":"a{i}","text_primary":"x"}},"post2":{{"id":"b{i}","text_primary":"y"}},"mpp_label":{},"ml_label":{}}}"#,
                    i % 2,
                    (i / 2) % 2
                )
            })
            .collect();
        let content = lines.join("\n");
        let f = write_tmp(&content);
        let pairs = load_pairs(f.path()).unwrap();
        assert_eq!(pairs.len(), content.lines().count());
        for (i, p) in pairs.iter().enumerate() {
            assert_eq!(p.post1.id, format!("a{i}"));
        }
    }

    #[test]
    fn distinct_posts_dedups_by_id() {
        let shared = Post::new("s", "shared");
        let pairs = PairCollection::new(
            (0..3)
                .map(|i| {
                    LabeledPair::new(shared.clone(), Post::new(format!("o{i}"), "o"), 1, 0).unwrap()
                })
                .collect(),
        );
        let pool = pairs.distinct_posts().unwrap();
        assert_eq!(pool.len(), 4);
    }

    #[test]
    fn class_docs() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, r#"{{"id":"d1","text_primary":"a","source":"analyst"}}"#).unwrap();
        writeln!(f, r#"{{"id":"d2","text_primary":"b","source":"amateur"}}"#).unwrap();
        let docs = load_class_docs(f.path(), "source").unwrap();
        assert_eq!(docs[1].1, "amateur");
        assert!(load_class_docs(f.path(), "label").is_err());
    }

    #[test]
    fn record_round_trip() {
        let post = Post::new("p", "台積電")
            .with_translation("TSMC")
            .with_truth(0.2, -0.1)
            .with_tokens(vec![Token::tagged("台積電", PosTag::Noun)]);
        let back = Post::try_from(PostRecord::from(&post)).unwrap();
        assert_eq!(back, post);
    }

    #[test]
    fn lenient_tags() {
        assert_eq!(PosTag::parse_lenient("NNS"), PosTag::Noun);
        assert_eq!(PosTag::parse_lenient("VBD"), PosTag::Verb);
        assert_eq!(PosTag::parse_lenient("CD"), PosTag::Cardinal);
        assert_eq!(PosTag::parse_lenient("NUM"), PosTag::Cardinal);
        assert_eq!(PosTag::parse_lenient("nr"), PosTag::Noun);
        assert_eq!(PosTag::parse_lenient("JJ"), PosTag::Other);
    }
}
