//! Evaluation protocols: average ground truth of the top-scoring fraction of
//! a pool, and pairwise comparison accuracy. Also the seeded held-out split.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{PairCollection, PostCollection};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Slack when turning `fraction * n` into a count, so that `0.1 * 30`
/// selects 3 posts rather than 4.
const SIZE_EPS: f64 = 1e-9;

fn ceil_count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64 - SIZE_EPS).ceil().max(0.0) as usize).min(n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingResult {
    pub selected_ids: Vec<String>,
    /// Mean ground-truth MPP of the selected posts that carry one.
    pub avg_mpp: Option<f64>,
    pub avg_ml: Option<f64>,
    pub fraction: f64,
}

/// Order-independent mean: values are summed in ascending order.
fn mean(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    Some(values.iter().sum::<f64>() / values.len() as f64)
}

/// Ids sorted by descending score, ties by ascending id.
pub fn sort_by_score<T: Scalar>(scores: &BTreeMap<String, T>) -> Result<Vec<(&str, T)>> {
    if let Some((id, _)) = scores.iter().find(|(_, s)| s.is_nan()) {
        return Err(Error::Validation(format!("score of post {id} is NaN")));
    }
    let mut ranked: Vec<(&str, T)> = scores.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    ranked.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.0.cmp(b.0))
    });
    Ok(ranked)
}

pub fn rank_top_fraction<T: Scalar>(
    scores: &BTreeMap<String, T>,
    posts: &PostCollection,
    fraction: f64,
) -> Result<RankingResult> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Validation(format!(
            "fraction must be in (0, 1], got {fraction}"
        )));
    }
    if posts.is_empty() {
        return Err(Error::Validation("cannot rank an empty pool".into()));
    }
    let mut pool_scores = BTreeMap::new();
    for post in posts {
        let s = scores
            .get(&post.id)
            .ok_or_else(|| Error::Validation(format!("no score for post {}", post.id)))?;
        pool_scores.insert(post.id.clone(), *s);
    }
    let ranked = sort_by_score(&pool_scores)?;
    let k = ceil_count(fraction, ranked.len()).max(1);
    let selected_ids: Vec<String> = ranked[..k].iter().map(|(id, _)| id.to_string()).collect();

    let mut mpps = Vec::new();
    let mut mls = Vec::new();
    for id in &selected_ids {
        let post = posts.get(id).expect("id from pool");
        match (post.mpp, post.ml) {
            (Some(mpp), Some(ml)) => {
                mpps.push(mpp);
                mls.push(ml);
            }
            (mpp, ml) => {
                log::warn!("selected post {id} lacks ground truth; excluded from averages");
                mpps.extend(mpp);
                mls.extend(ml);
            }
        }
    }
    Ok(RankingResult {
        selected_ids,
        avg_mpp: mean(&mut mpps),
        avg_ml: mean(&mut mls),
        fraction,
    })
}

/// Meaning of label 1 in a pair: the first post's value is higher, or lower.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum LabelConvention {
    #[default]
    #[value(name = "higher-is-1")]
    HigherIs1,
    #[value(name = "higher-is-0")]
    HigherIs0,
}

/// Predicted label for one pair; tied scores predict 0.
pub fn predict_label<T: Scalar>(first: T, second: T, convention: LabelConvention) -> u8 {
    let one = match convention {
        LabelConvention::HigherIs1 => first > second,
        LabelConvention::HigherIs0 => first < second,
    };
    one as u8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseReport {
    pub mpp_accuracy: f64,
    pub ml_accuracy: f64,
    pub n_pairs: usize,
    /// Completions that could not be parsed; counted as incorrect.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unparseable: Option<usize>,
}

impl PairwiseReport {
    pub fn from_counts(mpp_correct: usize, ml_correct: usize, n_pairs: usize) -> Result<Self> {
        if n_pairs == 0 {
            return Err(Error::Validation("no pairs to evaluate".into()));
        }
        Ok(Self {
            mpp_accuracy: mpp_correct as f64 / n_pairs as f64,
            ml_accuracy: ml_correct as f64 / n_pairs as f64,
            n_pairs,
            unparseable: None,
        })
    }
}

/// `scores` maps post id to `(mpp_score, ml_score)`.
pub fn pairwise_accuracy<T: Scalar>(
    pairs: &PairCollection,
    scores: &BTreeMap<String, (T, T)>,
    convention: LabelConvention,
) -> Result<PairwiseReport> {
    let lookup = |id: &str| {
        scores
            .get(id)
            .copied()
            .ok_or_else(|| Error::Validation(format!("no score for post {id}")))
    };
    let (mut mpp_ok, mut ml_ok) = (0, 0);
    for pair in pairs {
        let (m1, l1) = lookup(&pair.post1.id)?;
        let (m2, l2) = lookup(&pair.post2.id)?;
        mpp_ok += (predict_label(m1, m2, convention) == pair.mpp_label) as usize;
        ml_ok += (predict_label(l1, l2, convention) == pair.ml_label) as usize;
    }
    PairwiseReport::from_counts(mpp_ok, ml_ok, pairs.len())
}

/// Seeded shuffle, then `ceil(ratio * n)` pairs to validation and the rest
/// to training. Returns `(train, val)`.
pub fn split_holdout(
    pairs: &PairCollection,
    ratio: f64,
    seed: u64,
) -> Result<(PairCollection, PairCollection)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Validation(format!(
            "split ratio must be in (0, 1), got {ratio}"
        )));
    }
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_val = ceil_count(ratio, pairs.len());
    let all = pairs.as_slice();
    let pick = |idx: &[usize]| PairCollection::new(idx.iter().map(|&i| all[i].clone()).collect());
    Ok((pick(&order[n_val..]), pick(&order[..n_val])))
}

/// Pools the distinct posts of all pairs, scores them with `scorer`, and
/// ranks the pool.
pub fn rank_pairwise_pool<T, F>(
    pairs: &PairCollection,
    scorer: F,
    fraction: f64,
) -> Result<RankingResult>
where
    T: Scalar,
    F: FnOnce(&PostCollection) -> Result<BTreeMap<String, T>>,
{
    let pool = pairs.distinct_posts()?;
    let scores = scorer(&pool)?;
    rank_top_fraction(&scores, &pool, fraction)
}
