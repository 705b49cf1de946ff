//! Features, then an aggregator spec, then per-post scores.

use std::collections::BTreeMap;

use crate::aggregate::{score, AggregatorSpec, TargetMetric};
use crate::corpus::{PairCollection, PostCollection};
use crate::error::Result;
use crate::eval::{
    pairwise_accuracy, rank_pairwise_pool, LabelConvention, PairwiseReport, RankingResult,
};
use crate::features::{build_feature_vectors, FeatureOptions, FeatureResources, FeatureVector};
use crate::scalar::Scalar;

/// Scores every feature vector for `target`. With `invert_ml` the ML
/// scores are negated so that a lower aggregate ranks first.
pub fn score_features<T: Scalar>(
    features: &BTreeMap<String, FeatureVector<T>>,
    spec: &AggregatorSpec<T>,
    target: TargetMetric,
    invert_ml: bool,
) -> BTreeMap<String, T> {
    let flip = invert_ml && target == TargetMetric::Ml;
    features
        .iter()
        .map(|(id, fv)| {
            let s = score(fv, spec, target);
            (id.clone(), if flip { -s } else { s })
        })
        .collect()
}

/// `(mpp_score, ml_score)` per post.
pub fn paired_scores<T: Scalar>(
    features: &BTreeMap<String, FeatureVector<T>>,
    spec: &AggregatorSpec<T>,
    invert_ml: bool,
) -> BTreeMap<String, (T, T)> {
    let mpp = score_features(features, spec, TargetMetric::Mpp, invert_ml);
    let ml = score_features(features, spec, TargetMetric::Ml, invert_ml);
    mpp.into_iter()
        .zip(ml.into_values())
        .map(|((id, a), b)| (id, (a, b)))
        .collect()
}

pub struct Pipeline<T> {
    pub resources: FeatureResources<T>,
    pub options: FeatureOptions<T>,
    pub spec: AggregatorSpec<T>,
    pub invert_ml: bool,
}

impl<T: Scalar> Pipeline<T> {
    pub fn features(&self, pool: &PostCollection) -> BTreeMap<String, FeatureVector<T>> {
        build_feature_vectors(pool, &self.resources, &self.options)
    }

    pub fn scores(&self, pool: &PostCollection, target: TargetMetric) -> BTreeMap<String, T> {
        score_features(&self.features(pool), &self.spec, target, self.invert_ml)
    }

    /// Ranks the distinct posts of `pairs`, normalizing over that pool.
    pub fn rank_pairs(
        &self,
        pairs: &PairCollection,
        target: TargetMetric,
        fraction: f64,
    ) -> Result<RankingResult> {
        rank_pairwise_pool(pairs, |pool| Ok(self.scores(pool, target)), fraction)
    }

    pub fn pairwise(
        &self,
        pairs: &PairCollection,
        convention: LabelConvention,
    ) -> Result<PairwiseReport> {
        let features = self.features(&pairs.distinct_posts()?);
        pairwise_accuracy(
            pairs,
            &paired_scores(&features, &self.spec, self.invert_ml),
            convention,
        )
    }
}
