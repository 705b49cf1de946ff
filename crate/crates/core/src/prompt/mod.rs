//! Few-shot prompts for pairwise comparison.
//!
//! A labeled example renders as
//!
//! ```text
//! post1 : <t1> post2: <t2> > maximal potential profit (MPP)| <mpp># maximal loss (ML)| <ml>.
//! ```
//!
//! and a query is the same line cut right after the `>`. Shots are shuffled
//! under a seed and appended while the estimated token count stays within
//! the budget; the query goes last.

pub mod endpoint;

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::tokenize::is_cjk;
use crate::corpus::{LabeledPair, Post, TextField};
use crate::error::{Error, Result};
use crate::io::read_to_string;

pub const MPP_MARKER: &str = "maximal potential profit (MPP)|";
pub const ML_MARKER: &str = "maximal loss (ML)|";
pub const SHOT_SEPARATOR: &str = "\n";
pub const DEFAULT_BUDGET: usize = 4000;

/// Surface strings for the two binary labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVocabulary {
    label_to_text: [String; 2],
    text_to_label: BTreeMap<String, u8>,
}

impl Default for LabelVocabulary {
    fn default() -> Self {
        Self::new("more", "less").expect("default vocabulary is valid")
    }
}

impl LabelVocabulary {
    /// `one` renders label 1, `zero` renders label 0.
    pub fn new(one: &str, zero: &str) -> Result<Self> {
        for text in [one, zero] {
            if text.is_empty() || text.trim() != text || text.contains(['#', '.', '|', '\n']) {
                return Err(Error::Validation(format!(
                    "label text {text:?} must be non-empty, without surrounding spaces, and free of # . | or newlines"
                )));
            }
        }
        if one == zero {
            return Err(Error::Validation(format!(
                "label texts must differ, both are {one:?}"
            )));
        }
        Ok(Self {
            label_to_text: [zero.to_string(), one.to_string()],
            text_to_label: [(zero.to_string(), 0), (one.to_string(), 1)].into(),
        })
    }

    pub fn text(&self, label: u8) -> &str {
        &self.label_to_text[usize::from(label.min(1))]
    }

    pub fn label(&self, text: &str) -> Option<u8> {
        self.text_to_label.get(text).copied()
    }

    /// Reads a JSON object `{"1": "...", "0": "..."}`.
    pub fn load(path: &Path) -> Result<Self> {
        let map: BTreeMap<String, String> = serde_json::from_str(&read_to_string(path)?)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        match (map.get("1"), map.get("0"), map.len()) {
            (Some(one), Some(zero), 2) => Self::new(one, zero),
            _ => Err(Error::Config(format!(
                "{}: vocabulary must have exactly the keys \"1\" and \"0\"",
                path.display()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptShot {
    pub text: String,
    pub token_estimate: usize,
}

impl PromptShot {
    /// A shot with a caller-supplied estimate.
    pub fn with_estimate(text: impl Into<String>, token_estimate: usize) -> Self {
        Self {
            text: text.into(),
            token_estimate,
        }
    }
}

fn post_text(post: &Post, field: TextField) -> Result<&str> {
    post.text(field)
        .ok_or_else(|| Error::Validation(format!("post {} has no {field:?} text", post.id)))
}

fn pair_texts(pair: &LabeledPair, field: TextField) -> Result<(&str, &str)> {
    Ok((
        post_text(&pair.post1, field)?,
        post_text(&pair.post2, field)?,
    ))
}

/// `post1 : <t1> post2: <t2> >`
pub fn build_query(pair: &LabeledPair, field: TextField) -> Result<String> {
    let (t1, t2) = pair_texts(pair, field)?;
    Ok(format!("post1 : {t1} post2: {t2} >"))
}

pub fn render_answer(mpp_label: u8, ml_label: u8, vocab: &LabelVocabulary) -> String {
    format!(
        " {MPP_MARKER} {}# {ML_MARKER} {}.",
        vocab.text(mpp_label),
        vocab.text(ml_label)
    )
}

pub fn build_shot(
    pair: &LabeledPair,
    vocab: &LabelVocabulary,
    field: TextField,
) -> Result<PromptShot> {
    let text = build_query(pair, field)? + &render_answer(pair.mpp_label, pair.ml_label, vocab);
    let token_estimate = estimate_tokens(&text).max(1);
    Ok(PromptShot {
        text,
        token_estimate,
    })
}

/// One token per CJK character plus a quarter token (rounded up) per
/// other character.
pub fn estimate_tokens(text: &str) -> usize {
    let (cjk, other) = text.chars().fold((0usize, 0usize), |(c, o), ch| {
        if is_cjk(ch) {
            (c + 1, o)
        } else {
            (c, o + 1)
        }
    });
    cjk + other.div_ceil(4)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackedPrompt {
    pub shots: Vec<PromptShot>,
    pub query: String,
    /// Sum of the shot estimates and the query estimate.
    pub total_token_estimate: usize,
    pub budget: usize,
}

impl PackedPrompt {
    /// Shots then query, newline-separated.
    pub fn text(&self) -> String {
        let mut out = String::new();
        for shot in &self.shots {
            out.push_str(&shot.text);
            out.push_str(SHOT_SEPARATOR);
        }
        out.push_str(&self.query);
        out
    }
}

/// Shuffles `shots` under `seed` and takes them in that order until the
/// next one would push the estimate past `budget`.
pub fn pack_prompt(
    shots: &[PromptShot],
    query: &str,
    budget: usize,
    seed: u64,
) -> Result<PackedPrompt> {
    let query_estimate = estimate_tokens(query);
    if query_estimate > budget {
        return Err(Error::Budget {
            needed: query_estimate,
            budget,
        });
    }
    let mut order: Vec<&PromptShot> = shots.iter().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut total = query_estimate;
    let mut chosen = Vec::new();
    for shot in order {
        if total + shot.token_estimate > budget {
            break;
        }
        total += shot.token_estimate;
        chosen.push(shot.clone());
    }
    Ok(PackedPrompt {
        shots: chosen,
        query: query.to_string(),
        total_token_estimate: total,
        budget,
    })
}

fn label_at(segment: &str, vocab: &LabelVocabulary, which: &str) -> Result<u8> {
    let text = segment.trim();
    vocab
        .label(text)
        .ok_or_else(|| Error::Unparseable(format!("{which} label {text:?} not in vocabulary")))
}

/// Reads the first answer block of a completion back into
/// `(mpp_label, ml_label)`.
pub fn parse_completion(text: &str, vocab: &LabelVocabulary) -> Result<(u8, u8)> {
    let mpp_start = text
        .find(MPP_MARKER)
        .ok_or_else(|| Error::Unparseable("MPP marker not found".into()))?
        + MPP_MARKER.len();
    let rest = &text[mpp_start..];
    let ml_at = rest
        .find(ML_MARKER)
        .ok_or_else(|| Error::Unparseable("ML marker not found after MPP marker".into()))?;
    let mpp_segment = &rest[..ml_at];
    let mpp_segment = mpp_segment.split('#').next().unwrap_or(mpp_segment);
    let after_ml = &rest[ml_at + ML_MARKER.len()..];
    let ml_end = after_ml.find(['.', '#', '\n']).unwrap_or(after_ml.len());
    Ok((
        label_at(mpp_segment, vocab, "MPP")?,
        label_at(&after_ml[..ml_end], vocab, "ML")?,
    ))
}

/// Input/target strings for a text-to-text trainer.
pub fn t5_format(
    pair: &LabeledPair,
    vocab: &LabelVocabulary,
    field: TextField,
) -> Result<(String, String)> {
    let (t1, t2) = pair_texts(pair, field)?;
    Ok((
        format!("post1 : {t1} post2 : {t2}  </s>"),
        format!(
            "maximal potential profit (MPP) : {} maximal loss (ML) : {} </s>",
            vocab.text(pair.mpp_label),
            vocab.text(pair.ml_label)
        ),
    ))
}
