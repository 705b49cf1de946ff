//! Command-line front end. Every option can also come from a TOML run
//! config (`--config`); flags win over config values.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::aggregate::{resolve_spec, TargetMetric};
use crate::bayeslex::{fit_bayesian_lexicon, CountModel, SeedLexicon, VocabularyMode};
use crate::corpus::tokenize::TagDictionary;
use crate::corpus::{load_class_docs, load_pairs, load_posts, PairCollection, TextField};
use crate::error::{Error, Result};
use crate::eval::{rank_top_fraction, split_holdout, LabelConvention, PairwiseReport};
use crate::features::{
    load_features, ClassSet, Component, FeatureOptions, FeatureResources, FeatureRow,
    FinprolexMode, ScoreTable, SentenceAggregation, TextSelector,
};
use crate::io::{read_jsonl, to_jsonl, write_output};
use crate::lexicon::{collect_stats, induce_pmi_lexicon, Lexicon, LoadOptions};
use crate::pipeline::{score_features, Pipeline};
use crate::prompt::endpoint::{run_batch, BatchOptions, CompletionRequest, HttpEndpoint};
use crate::prompt::{
    build_query, build_shot, pack_prompt, parse_completion, t5_format, LabelVocabulary,
    DEFAULT_BUDGET,
};

/// Everything a run can be configured with. Mirrors the command-line flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub posts: Option<PathBuf>,
    pub pairs: Option<PathBuf>,
    pub docs: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub shots: Option<PathBuf>,
    pub finprolex: Option<PathBuf>,
    pub finword: Option<PathBuf>,
    pub lm: Option<PathBuf>,
    pub fls_scores: Option<PathBuf>,
    pub tone_scores: Option<PathBuf>,
    pub tags: Option<PathBuf>,
    pub seed_lexicon: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub lexicon_header: Option<bool>,
    pub finprolex_mode: Option<FinprolexMode>,
    pub finprolex_min_weight: Option<f64>,
    pub sentence_aggregation: Option<SentenceAggregation>,
    pub case_sensitive: Option<bool>,
    pub presence_only: Option<bool>,
    pub raw_components: Option<Vec<String>>,
    pub text: Option<TextSelector>,
    pub spec: Option<String>,
    pub target: Option<TargetMetric>,
    pub invert_ml: Option<bool>,
    pub fraction: Option<f64>,
    pub label_convention: Option<LabelConvention>,
    pub split_ratio: Option<f64>,
    pub seed: Option<u64>,
    pub budget: Option<usize>,
    pub field: Option<TextField>,
    pub class_field: Option<String>,
    pub pos_class: Option<String>,
    pub neg_class: Option<String>,
    pub alpha: Option<f64>,
    pub model: Option<CountModel>,
    pub vocabulary: Option<VocabularyMode>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
            _ => Error::io(path, e),
        })?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "oprank",
    version,
    about = "Score, rank and compare investor opinion posts"
)]
#[command(arg_required_else_help = true)]
pub struct Cli {
    /// TOML run config; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output file (default: standard output).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Induce a PMI lexicon from a two-class corpus.
    Induce(InduceArgs),
    /// Fit lexicon weights from unlabeled posts and a seed lexicon.
    Fit(FitArgs),
    /// Compute normalized feature vectors.
    Score(ScoreArgs),
    /// Score feature vectors with an aggregator spec, best first.
    Rank(RankArgs),
    /// Average ground truth of the top-scoring fraction.
    EvalRanking(EvalRankingArgs),
    /// Pairwise comparison accuracy of an aggregator spec.
    EvalPairwise(EvalPairwiseArgs),
    /// Pack few-shot prompts for query pairs.
    BuildPrompts(BuildPromptsArgs),
    /// Send prompts to the completion endpoint.
    Complete(CompleteArgs),
    /// Score completions against pair labels.
    ParseCompletions(ParseCompletionsArgs),
    /// Write text-to-text training rows for pairs.
    ExportT5(ExportT5Args),
}

#[derive(Debug, Args)]
pub struct InduceArgs {
    #[arg(long)]
    pub docs: Option<PathBuf>,
    /// Key holding each document's class.
    #[arg(long)]
    pub class_field: Option<String>,
    #[arg(long = "pos")]
    pub pos_class: Option<String>,
    #[arg(long = "neg")]
    pub neg_class: Option<String>,
    /// Additive smoothing (default 0.5).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Text to count (default primary).
    #[arg(long, value_enum)]
    pub field: Option<TextField>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub docs: Option<PathBuf>,
    /// Seed lexicon TSV with polarity.
    #[arg(long = "seed")]
    pub seed_lexicon: Option<PathBuf>,
    /// Default multinomial.
    #[arg(long, value_enum)]
    pub model: Option<CountModel>,
    /// Default seed.
    #[arg(long = "vocab", value_enum)]
    pub vocabulary: Option<VocabularyMode>,
    /// Text to fit on (default translated).
    #[arg(long, value_enum)]
    pub field: Option<TextField>,
    #[arg(long)]
    pub lexicon_header: bool,
}

#[derive(Debug, Args, Default)]
pub struct ResourceArgs {
    #[arg(long)]
    pub finprolex: Option<PathBuf>,
    #[arg(long)]
    pub finword: Option<PathBuf>,
    #[arg(long)]
    pub lm: Option<PathBuf>,
    #[arg(long)]
    pub fls_scores: Option<PathBuf>,
    #[arg(long)]
    pub tone_scores: Option<PathBuf>,
    /// Term/tag TSV; enables POS counts.
    #[arg(long)]
    pub tags: Option<PathBuf>,
    /// Lexicon files start with a header line.
    #[arg(long)]
    pub lexicon_header: bool,
    #[arg(long, value_enum)]
    pub finprolex_mode: Option<FinprolexMode>,
    /// Ignore FinProLex entries below this weight.
    #[arg(long)]
    pub finprolex_min_weight: Option<f64>,
    #[arg(long, value_enum)]
    pub sentence_aggregation: Option<SentenceAggregation>,
    /// Match lexicon terms without case folding.
    #[arg(long)]
    pub case_sensitive: bool,
    /// Count each lexicon term once per post.
    #[arg(long)]
    pub presence_only: bool,
    /// Components to leave unnormalized, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub raw_components: Option<Vec<String>>,
    #[arg(long, value_enum)]
    pub len_field: Option<TextField>,
    #[arg(long, value_enum)]
    pub finprolex_field: Option<TextField>,
    #[arg(long, value_enum)]
    pub pos_field: Option<TextField>,
    #[arg(long, value_enum)]
    pub finword_field: Option<TextField>,
    #[arg(long, value_enum)]
    pub lm_field: Option<TextField>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub posts: Option<PathBuf>,
    #[command(flatten)]
    pub resources: ResourceArgs,
}

#[derive(Debug, Args)]
pub struct SpecArgs {
    /// base-1, bayesdcm-2, multinomial-3, or a spec file.
    #[arg(long)]
    pub spec: Option<String>,
    /// Negate ML scores so that lower aggregates rank first.
    #[arg(long)]
    pub invert_ml: bool,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[command(flatten)]
    pub spec: SpecArgs,
    #[arg(long, value_enum)]
    pub target: Option<TargetMetric>,
}

#[derive(Debug, Args)]
pub struct EvalRankingArgs {
    #[arg(long)]
    pub posts: Option<PathBuf>,
    /// Pool the distinct posts of a pair file instead of --posts.
    #[arg(long, conflicts_with = "posts")]
    pub pairs: Option<PathBuf>,
    /// Precomputed feature rows; otherwise computed from the resources.
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[command(flatten)]
    pub spec: SpecArgs,
    #[arg(long, value_enum)]
    pub target: Option<TargetMetric>,
    /// Default 0.1.
    #[arg(long)]
    pub fraction: Option<f64>,
    #[command(flatten)]
    pub resources: ResourceArgs,
}

#[derive(Debug, Args)]
pub struct EvalPairwiseArgs {
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    #[command(flatten)]
    pub spec: SpecArgs,
    #[arg(long, value_enum)]
    pub label_convention: Option<LabelConvention>,
    /// Evaluate on a held-out share of the pairs.
    #[arg(long)]
    pub split_ratio: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub resources: ResourceArgs,
}

#[derive(Debug, Args)]
pub struct BuildPromptsArgs {
    /// Query pairs.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    /// Labeled pairs to draw shots from.
    #[arg(long)]
    pub shots: Option<PathBuf>,
    /// Default 4000.
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON object {"1": ..., "0": ...}; default more/less.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub field: Option<TextField>,
}

#[derive(Debug, Args)]
pub struct CompleteArgs {
    /// Prompt rows from build-prompts.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub model: String,
    #[arg(long, default_value_t = 32)]
    pub max_tokens: usize,
    #[arg(long, default_value_t = 0.0)]
    pub temperature: f64,
    /// Requests in flight at once.
    #[arg(long, default_value_t = 4)]
    pub max_in_flight: usize,
    /// Per-request timeout in seconds.
    #[arg(long, default_value_t = 60)]
    pub timeout: u64,
    #[arg(long, default_value_t = 2)]
    pub retries: usize,
}

#[derive(Debug, Args)]
pub struct ParseCompletionsArgs {
    /// Completion rows {id, text}; id is the pair's line index.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long)]
    pub pairs: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportT5Args {
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub field: Option<TextField>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PromptRow {
    pub id: String,
    pub prompt: String,
    pub n_shots: usize,
    pub total_token_estimate: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CompletionRow {
    pub id: String,
    #[serde(default)]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Serialize)]
struct RankRow<'a> {
    post_id: &'a str,
    score: f64,
}

#[derive(Debug, Serialize)]
struct T5Row {
    input: String,
    target: String,
}

fn pick<T: Clone>(flag: Option<T>, config: &Option<T>) -> Option<T> {
    flag.or_else(|| config.clone())
}

fn need<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| {
        Error::Config(format!(
            "--{flag} is required (flag or config key {})",
            flag.replace('-', "_")
        ))
    })
}

/// Fails on the first referenced path that does not exist.
fn check_paths<'a>(paths: impl IntoIterator<Item = &'a PathBuf>) -> Result<()> {
    for p in paths {
        if !p.exists() {
            return Err(Error::MissingFile(p.clone()));
        }
    }
    Ok(())
}

struct ResolvedResources {
    finprolex: Option<PathBuf>,
    finword: Option<PathBuf>,
    lm: Option<PathBuf>,
    fls_scores: Option<PathBuf>,
    tone_scores: Option<PathBuf>,
    tags: Option<PathBuf>,
    lexicon_header: bool,
    finprolex_mode: FinprolexMode,
    options: FeatureOptions<f64>,
}

impl ResolvedResources {
    fn new(args: ResourceArgs, cfg: &RunConfig) -> Result<Self> {
        let raw_components = pick(args.raw_components, &cfg.raw_components)
            .unwrap_or_default()
            .iter()
            .map(|s| s.trim().parse::<Component>())
            .collect::<Result<BTreeSet<_>>>()?;
        let base = cfg.text.unwrap_or_default();
        let text = TextSelector {
            len: args.len_field.unwrap_or(base.len),
            finprolex: args.finprolex_field.unwrap_or(base.finprolex),
            pos: args.pos_field.unwrap_or(base.pos),
            finword: args.finword_field.unwrap_or(base.finword),
            lm: args.lm_field.unwrap_or(base.lm),
        };
        Ok(Self {
            finprolex: pick(args.finprolex, &cfg.finprolex),
            finword: pick(args.finword, &cfg.finword),
            lm: pick(args.lm, &cfg.lm),
            fls_scores: pick(args.fls_scores, &cfg.fls_scores),
            tone_scores: pick(args.tone_scores, &cfg.tone_scores),
            tags: pick(args.tags, &cfg.tags),
            lexicon_header: args.lexicon_header || cfg.lexicon_header.unwrap_or(false),
            finprolex_mode: pick(args.finprolex_mode, &cfg.finprolex_mode).unwrap_or_default(),
            options: FeatureOptions {
                text,
                sentence_aggregation: pick(args.sentence_aggregation, &cfg.sentence_aggregation)
                    .unwrap_or_default(),
                fold_case: !(args.case_sensitive || cfg.case_sensitive.unwrap_or(false)),
                presence_only: args.presence_only || cfg.presence_only.unwrap_or(false),
                finprolex_min_weight: pick(args.finprolex_min_weight, &cfg.finprolex_min_weight),
                raw_components,
            },
        })
    }

    fn paths(&self) -> impl Iterator<Item = &PathBuf> {
        [
            &self.finprolex,
            &self.finword,
            &self.lm,
            &self.fls_scores,
            &self.tone_scores,
            &self.tags,
        ]
        .into_iter()
        .flatten()
    }

    fn load(&self) -> Result<(FeatureResources<f64>, FeatureOptions<f64>)> {
        let lex = |path: &Option<PathBuf>, name: &str| -> Result<Option<Lexicon<f64>>> {
            path.as_deref()
                .map(|p| {
                    Lexicon::load_tsv(
                        p,
                        name,
                        LoadOptions {
                            has_header: self.lexicon_header,
                            count_only: false,
                        },
                    )
                })
                .transpose()
        };
        let table = |path: &Option<PathBuf>, set: ClassSet| {
            path.as_deref()
                .map(|p| ScoreTable::load(p, set))
                .transpose()
        };
        let resources = FeatureResources {
            finprolex: lex(&self.finprolex, "finprolex")?,
            finprolex_mode: self.finprolex_mode,
            finword: lex(&self.finword, "finword")?,
            lm: lex(&self.lm, "lm")?,
            fls: table(&self.fls_scores, ClassSet::Fls)?,
            tone: table(&self.tone_scores, ClassSet::Tone)?,
            pos_tags: self.tags.as_deref().map(TagDictionary::load).transpose()?,
        };
        Ok((resources, self.options.clone()))
    }
}

fn json_report<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn load_vocab(path: Option<PathBuf>) -> Result<LabelVocabulary> {
    path.as_deref()
        .map(LabelVocabulary::load)
        .unwrap_or_else(|| Ok(LabelVocabulary::default()))
}

fn pipeline(
    spec: SpecArgs,
    resources: &ResolvedResources,
    cfg: &RunConfig,
) -> Result<Pipeline<f64>> {
    let (res, opts) = resources.load()?;
    Ok(Pipeline {
        resources: res,
        options: opts,
        spec: resolve_spec(&need(pick(spec.spec, &cfg.spec), "spec")?)?,
        invert_ml: spec.invert_ml || cfg.invert_ml.unwrap_or(false),
    })
}

fn check_spec_arg(spec: &SpecArgs, cfg: &RunConfig) -> Result<String> {
    let spec = need(pick(spec.spec.clone(), &cfg.spec), "spec")?;
    resolve_spec::<f64>(&spec)?;
    Ok(spec)
}

fn run_command(command: Command, cfg: &RunConfig) -> Result<String> {
    match command {
        Command::Induce(a) => {
            let docs = need(pick(a.docs, &cfg.docs), "docs")?;
            check_paths([&docs])?;
            let class_field = need(pick(a.class_field, &cfg.class_field), "class-field")?;
            let pos = need(pick(a.pos_class, &cfg.pos_class), "pos")?;
            let neg = need(pick(a.neg_class, &cfg.neg_class), "neg")?;
            let alpha = pick(a.alpha, &cfg.alpha).unwrap_or(0.5);
            let field = pick(a.field, &cfg.field).unwrap_or(TextField::Primary);
            let docs = load_class_docs(&docs, &class_field)?;
            let stats = collect_stats::<f64>(&docs, field, alpha)?;
            Ok(induce_pmi_lexicon(&stats, &pos, &neg)?.to_tsv())
        }
        Command::Fit(a) => {
            let docs = need(pick(a.docs, &cfg.docs), "docs")?;
            let seed_path = need(pick(a.seed_lexicon, &cfg.seed_lexicon), "seed")?;
            check_paths([&docs, &seed_path])?;
            let header = a.lexicon_header || cfg.lexicon_header.unwrap_or(false);
            let seed_lex = Lexicon::<f64>::load_tsv(
                &seed_path,
                "seed",
                LoadOptions {
                    has_header: header,
                    count_only: false,
                },
            )?;
            let seed = SeedLexicon::from_lexicon(&seed_lex)?.lowercased()?;
            let posts = load_posts(&docs)?;
            let model = pick(a.model, &cfg.model).unwrap_or(CountModel::Multinomial);
            let vocabulary =
                pick(a.vocabulary, &cfg.vocabulary).unwrap_or(VocabularyMode::SeedOnly);
            let field = pick(a.field, &cfg.field).unwrap_or(TextField::Translated);
            let lowered = crate::corpus::PostCollection::new(
                posts.iter().map(|p| p.case_folded()).collect(),
            )?;
            let fitted = fit_bayesian_lexicon::<f64>(&lowered, field, &seed, model, vocabulary)?;
            Ok(fitted.base.to_tsv())
        }
        Command::Score(a) => {
            let posts = need(pick(a.posts, &cfg.posts), "posts")?;
            let resources = ResolvedResources::new(a.resources, cfg)?;
            check_paths(std::iter::once(&posts).chain(resources.paths()))?;
            let (res, opts) = resources.load()?;
            let pool = load_posts(&posts)?;
            let features = crate::features::build_feature_vectors(&pool, &res, &opts);
            to_jsonl(
                features
                    .into_iter()
                    .map(|(post_id, components)| FeatureRow {
                        post_id,
                        components,
                    }),
            )
        }
        Command::Rank(a) => {
            let features = need(pick(a.features, &cfg.features), "features")?;
            check_paths([&features])?;
            let spec_name = check_spec_arg(&a.spec, cfg)?;
            let target = pick(a.target, &cfg.target).unwrap_or(TargetMetric::Mpp);
            let invert = a.spec.invert_ml || cfg.invert_ml.unwrap_or(false);
            let fvs = load_features::<f64>(&features)?;
            let scores = score_features(&fvs, &resolve_spec(&spec_name)?, target, invert);
            let ranked = crate::eval::sort_by_score(&scores)?;
            to_jsonl(
                ranked
                    .into_iter()
                    .map(|(post_id, score)| RankRow { post_id, score }),
            )
        }
        Command::EvalRanking(a) => {
            let posts = pick(a.posts, &cfg.posts);
            let pairs = if posts.is_none() {
                pick(a.pairs, &cfg.pairs)
            } else {
                None
            };
            if posts.is_none() && pairs.is_none() {
                return Err(Error::Config("--posts or --pairs is required".into()));
            }
            let features = pick(a.features, &cfg.features);
            let resources = ResolvedResources::new(a.resources, cfg)?;
            check_paths(
                posts
                    .iter()
                    .chain(&pairs)
                    .chain(&features)
                    .chain(resources.paths()),
            )?;
            check_spec_arg(&a.spec, cfg)?;
            let target = pick(a.target, &cfg.target).unwrap_or(TargetMetric::Mpp);
            let fraction = pick(a.fraction, &cfg.fraction).unwrap_or(0.1);
            if !(fraction > 0.0 && fraction <= 1.0) {
                return Err(Error::Validation(format!(
                    "fraction must be in (0, 1], got {fraction}"
                )));
            }
            let pipe = pipeline(a.spec, &resources, cfg)?;
            let pool = match (&posts, &pairs) {
                (Some(p), _) => load_posts(p)?,
                (None, Some(p)) => load_pairs(p)?.distinct_posts()?,
                (None, None) => unreachable!(),
            };
            let scores = match &features {
                Some(path) => {
                    let fvs = load_features::<f64>(path)?;
                    if let Some(missing) = pool.iter().find(|p| !fvs.contains_key(&p.id)) {
                        return Err(Error::Validation(format!(
                            "no feature row for post {}",
                            missing.id
                        )));
                    }
                    let fvs = fvs
                        .into_iter()
                        .filter(|(id, _)| pool.get(id).is_some())
                        .collect();
                    score_features(&fvs, &pipe.spec, target, pipe.invert_ml)
                }
                None => pipe.scores(&pool, target),
            };
            json_report(&rank_top_fraction(&scores, &pool, fraction)?)
        }
        Command::EvalPairwise(a) => {
            let pairs_path = need(pick(a.pairs, &cfg.pairs), "pairs")?;
            let resources = ResolvedResources::new(a.resources, cfg)?;
            check_paths(std::iter::once(&pairs_path).chain(resources.paths()))?;
            check_spec_arg(&a.spec, cfg)?;
            let convention = pick(a.label_convention, &cfg.label_convention).unwrap_or_default();
            let split = pick(a.split_ratio, &cfg.split_ratio);
            let seed = pick(a.seed, &cfg.seed).unwrap_or(0);
            let pipe = pipeline(a.spec, &resources, cfg)?;
            let mut pairs = load_pairs(&pairs_path)?;
            if let Some(ratio) = split {
                pairs = split_holdout(&pairs, ratio, seed)?.1;
            }
            json_report(&pipe.pairwise(&pairs, convention)?)
        }
        Command::BuildPrompts(a) => {
            let pairs_path = need(pick(a.pairs, &cfg.pairs), "pairs")?;
            let shots_path = need(pick(a.shots, &cfg.shots), "shots")?;
            let vocab_path = pick(a.vocab, &cfg.vocab);
            check_paths([&pairs_path, &shots_path].into_iter().chain(&vocab_path))?;
            let vocab = load_vocab(vocab_path)?;
            let budget = pick(a.budget, &cfg.budget).unwrap_or(DEFAULT_BUDGET);
            let seed = pick(a.seed, &cfg.seed).unwrap_or(0);
            let field = pick(a.field, &cfg.field).unwrap_or(TextField::Primary);
            let shots = load_pairs(&shots_path)?
                .iter()
                .map(|p| build_shot(p, &vocab, field))
                .collect::<Result<Vec<_>>>()?;
            let mut rows = Vec::new();
            for (i, pair) in load_pairs(&pairs_path)?.iter().enumerate() {
                let packed = pack_prompt(
                    &shots,
                    &build_query(pair, field)?,
                    budget,
                    seed.wrapping_add(i as u64),
                )?;
                rows.push(PromptRow {
                    id: i.to_string(),
                    prompt: packed.text(),
                    n_shots: packed.shots.len(),
                    total_token_estimate: packed.total_token_estimate,
                });
            }
            to_jsonl(rows)
        }
        Command::Complete(a) => {
            check_paths([&a.input])?;
            let endpoint = HttpEndpoint::from_env(Duration::from_secs(a.timeout))?;
            let requests: Vec<(String, CompletionRequest)> = read_jsonl::<PromptRow>(&a.input)?
                .into_iter()
                .map(|(_, row)| {
                    let req = CompletionRequest {
                        model: a.model.clone(),
                        prompt: row.prompt,
                        max_tokens: a.max_tokens,
                        temperature: a.temperature,
                    };
                    (row.id, req)
                })
                .collect();
            let opts = BatchOptions {
                max_in_flight: a.max_in_flight,
                retries: a.retries,
            };
            let results = run_batch(&endpoint, &requests, opts);
            // Keep input order in the output.
            let rows = requests.iter().map(|(id, _)| match &results[id] {
                Ok(text) => CompletionRow {
                    id: id.clone(),
                    text: Some(text.clone()),
                    error: None,
                },
                Err(e) => CompletionRow {
                    id: id.clone(),
                    text: None,
                    error: Some(e.to_string()),
                },
            });
            to_jsonl(rows)
        }
        Command::ParseCompletions(a) => {
            let pairs_path = need(pick(a.pairs, &cfg.pairs), "pairs")?;
            let vocab_path = pick(a.vocab, &cfg.vocab);
            check_paths([&a.input, &pairs_path].into_iter().chain(&vocab_path))?;
            let vocab = load_vocab(vocab_path)?;
            let pairs = load_pairs(&pairs_path)?;
            let completions: BTreeMap<String, Option<String>> =
                read_jsonl::<CompletionRow>(&a.input)?
                    .into_iter()
                    .map(|(_, row)| (row.id, row.text))
                    .collect();
            json_report(&score_completions(&pairs, &completions, &vocab)?)
        }
        Command::ExportT5(a) => {
            let pairs_path = need(pick(a.pairs, &cfg.pairs), "pairs")?;
            let vocab_path = pick(a.vocab, &cfg.vocab);
            check_paths(std::iter::once(&pairs_path).chain(&vocab_path))?;
            let vocab = load_vocab(vocab_path)?;
            let field = pick(a.field, &cfg.field).unwrap_or(TextField::Primary);
            let rows = load_pairs(&pairs_path)?
                .iter()
                .map(|p| t5_format(p, &vocab, field).map(|(input, target)| T5Row { input, target }))
                .collect::<Result<Vec<_>>>()?;
            to_jsonl(rows)
        }
    }
}

/// Accuracy of completions keyed by pair index. Missing or unparseable
/// completions count as wrong on both metrics.
pub fn score_completions(
    pairs: &PairCollection,
    completions: &BTreeMap<String, Option<String>>,
    vocab: &LabelVocabulary,
) -> Result<PairwiseReport> {
    let (mut mpp_ok, mut ml_ok, mut bad) = (0, 0, 0);
    for (i, pair) in pairs.iter().enumerate() {
        let parsed = match completions.get(&i.to_string()).and_then(Option::as_deref) {
            Some(text) => parse_completion(text, vocab),
            None => Err(Error::Unparseable(format!("no completion for pair {i}"))),
        };
        match parsed {
            Ok((mpp, ml)) => {
                mpp_ok += (mpp == pair.mpp_label) as usize;
                ml_ok += (ml == pair.ml_label) as usize;
            }
            Err(e) => {
                log::debug!("pair {i}: {e}");
                bad += 1;
            }
        }
    }
    let mut report = PairwiseReport::from_counts(mpp_ok, ml_ok, pairs.len())?;
    report.unparseable = Some(bad);
    Ok(report)
}

/// Parses `argv`, runs the command, and returns the process exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Error::Validation("--jobs must be positive".into()));
        }
        if rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .is_err()
        {
            log::debug!("worker pool already initialized");
        }
    }
    let out = pick(cli.out, &cfg.out);
    let output = run_command(cli.command, &cfg)?;
    write_output(out.as_deref(), &output)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{LabeledPair, Post};

    #[test]
    fn config_round_trip() {
        let cfg = RunConfig {
            posts: Some("data/posts.jsonl".into()),
            spec: Some("bayesdcm-2".into()),
            target: Some(TargetMetric::Ml),
            label_convention: Some(LabelConvention::HigherIs0),
            raw_components: Some(vec!["len".into(), "finprolex".into()]),
            text: Some(TextSelector::default()),
            seed: Some(7),
            fraction: Some(0.1),
            model: Some(CountModel::Dcm),
            vocabulary: Some(VocabularyMode::SeedOnly),
            sentence_aggregation: Some(SentenceAggregation::SoftmaxOfSum),
            ..RunConfig::default()
        };
        let text = cfg.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
        assert!(RunConfig::from_toml("no_such_key = 1").is_err());
    }

    #[test]
    fn flags_override_config() {
        let cfg = RunConfig {
            spec: Some("base-1".into()),
            ..RunConfig::default()
        };
        assert_eq!(
            pick(Some("multinomial-3".to_string()), &cfg.spec).unwrap(),
            "multinomial-3"
        );
        assert_eq!(pick(None, &cfg.spec).unwrap(), "base-1");
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run(["oprank"]), 1);
        assert_eq!(run(["oprank", "no-such-command"]), 1);
        assert_eq!(run(["oprank", "--version"]), 0);
        assert_eq!(
            run([
                "oprank",
                "eval-ranking",
                "--posts",
                "/nonexistent/posts.jsonl",
                "--spec",
                "base-1"
            ]),
            1
        );
    }

    #[test]
    fn completions_scored() {
        let pair = |m, l| LabeledPair::new(Post::new("a", "x"), Post::new("b", "y"), m, l).unwrap();
        let pairs = PairCollection::new(vec![pair(1, 0), pair(0, 0), pair(1, 1)]);
        let ok = " maximal potential profit (MPP)| more# maximal loss (ML)| less.";
        let completions: BTreeMap<String, Option<String>> = [
            ("0".to_string(), Some(ok.to_string())),
            ("1".to_string(), Some("junk".to_string())),
        ]
        .into();
        let r = score_completions(&pairs, &completions, &LabelVocabulary::default()).unwrap();
        assert_eq!(r.n_pairs, 3);
        assert_eq!(r.unparseable, Some(2));
        assert!((r.mpp_accuracy - 1.0 / 3.0).abs() < 1e-15);
        assert!((r.ml_accuracy - 1.0 / 3.0).abs() < 1e-15);
    }
}
