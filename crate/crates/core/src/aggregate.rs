//! Weighted-sum aggregators turning a feature vector into an MPP or ML score.
//!
//! A spec is a list of groups, each a weight times a small linear
//! combination of components. The symbolic component `finword_switch`
//! reads `finword_pos` when scoring MPP and `finword_neg` when scoring ML;
//! it is the only place the two targets differ.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{Component, FeatureVector};
use crate::io::read_to_string;
use crate::scalar::Scalar;

pub const BASE_1: &str = "base-1";
pub const BAYESDCM_2: &str = "bayesdcm-2";
pub const MULTINOMIAL_3: &str = "multinomial-3";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TargetMetric {
    Mpp,
    Ml,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpecComponent {
    Feature(Component),
    FinwordSwitch,
}

impl SpecComponent {
    pub const SWITCH_NAME: &'static str = "finword_switch";

    pub fn name(self) -> &'static str {
        match self {
            SpecComponent::Feature(c) => c.name(),
            SpecComponent::FinwordSwitch => Self::SWITCH_NAME,
        }
    }

    fn resolve(self, target: TargetMetric) -> Component {
        match (self, target) {
            (SpecComponent::Feature(c), _) => c,
            (SpecComponent::FinwordSwitch, TargetMetric::Mpp) => Component::FinwordPos,
            (SpecComponent::FinwordSwitch, TargetMetric::Ml) => Component::FinwordNeg,
        }
    }
}

impl FromStr for SpecComponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == Self::SWITCH_NAME {
            Ok(SpecComponent::FinwordSwitch)
        } else {
            Component::from_str(s).map(SpecComponent::Feature)
        }
    }
}

impl fmt::Display for SpecComponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term<T> {
    pub component: SpecComponent,
    pub coefficient: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Group<T> {
    pub weight: T,
    pub terms: Vec<Term<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregatorSpec<T> {
    name: String,
    groups: Vec<Group<T>>,
}

#[derive(Serialize, Deserialize)]
struct TermFile {
    component: String,
    #[serde(default = "one")]
    coefficient: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Serialize, Deserialize)]
struct GroupFile {
    weight: f64,
    terms: Vec<TermFile>,
}

#[derive(Serialize, Deserialize)]
struct SpecFile {
    name: String,
    groups: Vec<GroupFile>,
}

impl<T: Scalar> AggregatorSpec<T> {
    pub fn new(name: impl Into<String>, groups: Vec<Group<T>>) -> Result<Self> {
        let spec = Self {
            name: name.into(),
            groups,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        let mentions = |c: Component| {
            self.groups
                .iter()
                .flat_map(|g| &g.terms)
                .any(|t| t.component == SpecComponent::Feature(c))
        };
        if mentions(Component::FinwordPos) && mentions(Component::FinwordNeg) {
            return Err(Error::Config(format!(
                "spec {}: use finword_switch instead of both finword_pos and finword_neg",
                self.name
            )));
        }
        let finite = self
            .groups
            .iter()
            .all(|g| g.weight.is_finite() && g.terms.iter().all(|t| t.coefficient.is_finite()));
        if !finite {
            return Err(Error::Config(format!(
                "spec {}: non-finite weight",
                self.name
            )));
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn groups(&self) -> &[Group<T>] {
        &self.groups
    }

    /// Every component the spec reads, in first-mention order.
    pub fn components(&self) -> Vec<SpecComponent> {
        let mut out = Vec::new();
        for t in self.groups.iter().flat_map(|g| &g.terms) {
            if !out.contains(&t.component) {
                out.push(t.component);
            }
        }
        out
    }

    /// Net coefficient of `finword_switch` after group weights.
    pub fn switch_coefficient(&self) -> T {
        self.groups
            .iter()
            .flat_map(|g| g.terms.iter().map(move |t| (g.weight, t)))
            .filter(|(_, t)| t.component == SpecComponent::FinwordSwitch)
            .fold(T::zero(), |acc, (w, t)| acc + w * t.coefficient)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: SpecFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let groups = file
            .groups
            .into_iter()
            .map(|g| {
                Ok(Group {
                    weight: T::lit(g.weight),
                    terms: g
                        .terms
                        .into_iter()
                        .map(|t| {
                            Ok(Term {
                                component: t.component.parse()?,
                                coefficient: T::lit(t.coefficient),
                            })
                        })
                        .collect::<Result<_>>()?,
                })
            })
            .collect::<Result<_>>()?;
        Self::new(file.name, groups)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        let file = SpecFile {
            name: self.name.clone(),
            groups: self
                .groups
                .iter()
                .map(|g| GroupFile {
                    weight: g.weight.to_f64_lossy(),
                    terms: g
                        .terms
                        .iter()
                        .map(|t| TermFile {
                            component: t.component.name().to_string(),
                            coefficient: t.coefficient.to_f64_lossy(),
                        })
                        .collect(),
                })
                .collect(),
        };
        toml::to_string(&file).expect("spec serializes")
    }
}

fn group<T: Scalar>(weight: f64, terms: &[(SpecComponent, f64)]) -> Group<T> {
    Group {
        weight: T::lit(weight),
        terms: terms
            .iter()
            .map(|&(component, c)| Term {
                component,
                coefficient: T::lit(c),
            })
            .collect(),
    }
}

/// The three published heuristic functions.
pub fn builtin_specs<T: Scalar>() -> BTreeMap<String, AggregatorSpec<T>> {
    use Component::*;
    use SpecComponent::{Feature as F, FinwordSwitch as Switch};

    let fls = [(F(Fls), 1.0), (F(NonFls), 0.5), (F(NotFls), -1.0)];
    let tone = [(F(PosTone), 1.0), (F(NegTone), -1.0), (F(Lm), 1.0)];
    let pos = [(F(Nouns), 1.0), (F(Cards), 1.0), (F(Verbs), -1.0)];

    let base: Vec<Group<T>> = vec![
        group(1.0, &[(F(Len), 1.0)]),
        group(1.0, &[(F(Finprolex), 1.0)]),
        group(1.0, &[(Switch, 1.0)]),
        group(1.0, &fls),
    ];
    let mut bayes = base.clone();
    bayes.push(group(1.0, &tone));
    bayes.push(group(1.0, &pos));
    let multinomial = vec![
        group(0.5, &[(F(Len), 1.0), (F(Finprolex), 1.0)]),
        group(0.33, &fls),
        group(0.33, &tone),
        group(0.33, &pos),
        group(1.0, &[(Switch, 1.0)]),
    ];

    [
        (BASE_1, base),
        (BAYESDCM_2, bayes),
        (MULTINOMIAL_3, multinomial),
    ]
    .into_iter()
    .map(|(name, groups)| {
        (
            name.to_string(),
            AggregatorSpec::new(name, groups).expect("built-in spec is valid"),
        )
    })
    .collect()
}

/// A built-in spec by name, or else a spec file at that path.
pub fn resolve_spec<T: Scalar>(name_or_path: &str) -> Result<AggregatorSpec<T>> {
    if let Some(spec) = builtin_specs().remove(name_or_path) {
        return Ok(spec);
    }
    let path = Path::new(name_or_path);
    if path.exists() {
        AggregatorSpec::load(path)
    } else {
        Err(Error::Config(format!(
            "{name_or_path:?} is neither a built-in spec ({BASE_1}, {BAYESDCM_2}, {MULTINOMIAL_3}) nor a spec file"
        )))
    }
}

/// `sum_g weight_g * sum_t coefficient_t * component_t`.
pub fn score<T: Scalar>(
    fv: &FeatureVector<T>,
    spec: &AggregatorSpec<T>,
    target: TargetMetric,
) -> T {
    spec.groups.iter().fold(T::zero(), |acc, g| {
        let inner = g.terms.iter().fold(T::zero(), |s, t| {
            s + t.coefficient * fv.get(t.component.resolve(target))
        });
        acc + g.weight * inner
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use Component::*;

    fn fv(pairs: &[(Component, f64)]) -> FeatureVector<f64> {
        FeatureVector::from_pairs(pairs.iter().copied())
    }

    #[test]
    fn zero_vector_scores_zero() {
        for spec in builtin_specs::<f64>().values() {
            for target in [TargetMetric::Mpp, TargetMetric::Ml] {
                assert_eq!(score(&FeatureVector::default(), spec, target), 0.0);
            }
        }
    }

    #[test]
    fn base_worked_example() {
        let specs = builtin_specs::<f64>();
        let v = fv(&[(Len, 1.0), (Finprolex, 1.0), (FinwordPos, 1.0), (Fls, 1.0)]);
        assert_eq!(score(&v, &specs[BASE_1], TargetMetric::Mpp), 4.0);
    }

    #[test]
    fn multinomial_worked_example() {
        let specs = builtin_specs::<f64>();
        let v = fv(&[
            (Len, 1.0),
            (Finprolex, 1.0),
            (NonFls, 1.0),
            (PosTone, 0.6),
            (NegTone, 0.2),
            (Lm, 0.1),
            (Nouns, 0.5),
            (Cards, 0.5),
            (Verbs, 0.2),
            (FinwordNeg, 2.0),
        ]);
        assert_relative_eq!(
            score(&v, &specs[MULTINOMIAL_3], TargetMetric::Ml),
            3.594,
            epsilon = 1e-12
        );
    }

    #[test]
    fn builtin_structure() {
        let specs = builtin_specs::<f64>();
        assert_eq!(specs.len(), 3);
        assert_eq!(specs[BASE_1].groups().len(), 4);
        let mut a = specs[BAYESDCM_2].components();
        let mut b = specs[MULTINOMIAL_3].components();
        a.sort_by_key(|c| c.name());
        b.sort_by_key(|c| c.name());
        assert_eq!(a, b);
        for s in specs.values() {
            assert_eq!(s.switch_coefficient(), 1.0);
        }
    }

    #[test]
    fn toml_round_trip_is_stable() {
        for spec in builtin_specs::<f64>().values() {
            let text = spec.to_toml();
            let back = AggregatorSpec::<f64>::from_toml(&text).unwrap();
            assert_eq!(&back, spec);
            assert_eq!(back.to_toml(), text);
        }
    }

    #[test]
    fn unknown_component_rejected_at_load() {
        let text =
            "name = \"x\"\n[[groups]]\nweight = 1.0\nterms = [{ component = \"sentiment\" }]\n";
        assert!(matches!(
            AggregatorSpec::<f64>::from_toml(text),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn both_finword_literals_rejected() {
        let text = "name = \"x\"\n[[groups]]\nweight = 1.0\nterms = [{ component = \"finword_pos\" }, { component = \"finword_neg\", coefficient = -1.0 }]\n";
        assert!(AggregatorSpec::<f64>::from_toml(text).is_err());
    }

    #[test]
    fn custom_spec_default_coefficient() {
        let text = "name = \"ml-stylistic\"\n[[groups]]\nweight = 2.0\nterms = [{ component = \"len\" }, { component = \"verbs\", coefficient = -0.5 }]\n";
        let spec = AggregatorSpec::<f64>::from_toml(text).unwrap();
        assert_eq!(
            score(&fv(&[(Len, 1.0), (Verbs, 1.0)]), &spec, TargetMetric::Ml),
            1.0
        );
    }

    #[test]
    fn resolve_by_name_or_error() {
        assert_eq!(resolve_spec::<f64>("base-1").unwrap().name(), "base-1");
        assert!(resolve_spec::<f64>("base-9").is_err());
    }

    #[test]
    fn f32_scoring() {
        let specs = builtin_specs::<f32>();
        let v = FeatureVector::<f32>::from_pairs([
            (Len, 1.0),
            (Finprolex, 1.0),
            (FinwordPos, 1.0),
            (Fls, 1.0),
        ]);
        assert_eq!(score(&v, &specs[BASE_1], TargetMetric::Mpp), 4.0);
    }
}
