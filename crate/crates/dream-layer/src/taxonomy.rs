//! The edge-case pattern taxonomy: rule-based tag extraction, consolidation
//! into the 50-template space, and the validation checks (coverage,
//! distinctness, exhaustiveness) plus inter-rater agreement via
//! `metrics::cohen_kappa`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::core_model::RiskLevel;
use crate::data::Scenario;
use crate::metrics::{tfidf_cosine, tokenize};

#[derive(Debug, Error, PartialEq)]
pub enum TaxonomyError {
    #[error("empty scenario")]
    EmptyScenario,
    #[error("bad taxonomy data at line {line}: {message}")]
    BadData { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyTemplate {
    pub template_id: String,
    pub role: String,
    pub tension: String,
    pub risk: RiskLevel,
    /// Distinctive phrase the reference tagger keys on.
    pub cue: String,
    pub example: String,
}

/// The three dimension vocabularies plus the surface-label resolution maps.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dimensions {
    pub roles: Vec<String>,
    pub tensions: Vec<String>,
    pub risks: Vec<String>,
    pub role_map: BTreeMap<String, String>,
    pub tension_map: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyData {
    pub templates: Vec<TaxonomyTemplate>,
    pub dimensions: Dimensions,
}

fn parse_risk(s: &str) -> Option<RiskLevel> {
    match s.to_lowercase().as_str() {
        "low" => Some(RiskLevel::Low),
        "medium" => Some(RiskLevel::Medium),
        "high" => Some(RiskLevel::High),
        _ => None,
    }
}

impl TaxonomyData {
    pub fn parse(taxonomy: &str, dimensions: &str) -> Result<Self, TaxonomyError> {
        let mut templates = Vec::new();
        for (i, raw) in taxonomy.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split('\t').collect();
            if parts.len() != 6 {
                return Err(TaxonomyError::BadData {
                    line: i + 1,
                    message: format!("expected 6 fields, got {}", parts.len()),
                });
            }
            let risk = parse_risk(parts[3]).ok_or_else(|| TaxonomyError::BadData {
                line: i + 1,
                message: format!("bad risk {}", parts[3]),
            })?;
            templates.push(TaxonomyTemplate {
                template_id: parts[0].to_string(),
                role: parts[1].to_string(),
                tension: parts[2].to_string(),
                risk,
                cue: parts[4].to_string(),
                example: parts[5].to_string(),
            });
        }

        let mut dims = Dimensions::default();
        let mut section = "";
        for (i, raw) in dimensions.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line.starts_with('[') {
                section = line;
                continue;
            }
            match section {
                "[roles]" => dims.roles.push(line.to_string()),
                "[tensions]" => dims.tensions.push(line.to_string()),
                "[risks]" => dims.risks.push(line.to_string()),
                "[role_map]" | "[tension_map]" => {
                    let (surface, canonical) =
                        line.split_once('\t').ok_or(TaxonomyError::BadData {
                            line: i + 1,
                            message: "expected surface<TAB>canonical".into(),
                        })?;
                    let map = if section == "[role_map]" {
                        &mut dims.role_map
                    } else {
                        &mut dims.tension_map
                    };
                    map.insert(surface.to_string(), canonical.to_string());
                }
                _ => {
                    return Err(TaxonomyError::BadData {
                        line: i + 1,
                        message: format!("line outside any section: {line}"),
                    })
                }
            }
        }
        Ok(TaxonomyData {
            templates,
            dimensions: dims,
        })
    }

    pub fn risk_counts(&self) -> (usize, usize, usize) {
        let mut low = 0;
        let mut medium = 0;
        let mut high = 0;
        for t in &self.templates {
            match t.risk {
                RiskLevel::Low => low += 1,
                RiskLevel::Medium => medium += 1,
                RiskLevel::High => high += 1,
            }
        }
        (low, medium, high)
    }

    pub fn find_by_pair(&self, role: &str, tension: &str) -> Option<&TaxonomyTemplate> {
        self.templates
            .iter()
            .find(|t| t.role == role && t.tension == tension)
    }

    pub fn find(&self, template_id: &str) -> Option<&TaxonomyTemplate> {
        self.templates.iter().find(|t| t.template_id == template_id)
    }

    /// Every surface label must resolve into the dimension vocabularies.
    pub fn check_dimension_resolution(&self) -> Vec<String> {
        let roles: BTreeSet<&String> = self.dimensions.roles.iter().collect();
        let tensions: BTreeSet<&String> = self.dimensions.tensions.iter().collect();
        let mut failures = Vec::new();
        for t in &self.templates {
            match self.dimensions.role_map.get(&t.role) {
                Some(canonical) if roles.contains(canonical) => {}
                _ => failures.push(format!("{}: role {} unresolved", t.template_id, t.role)),
            }
            match self.dimensions.tension_map.get(&t.tension) {
                Some(canonical) if tensions.contains(canonical) => {}
                _ => failures.push(format!(
                    "{}: tension {} unresolved",
                    t.template_id, t.tension
                )),
            }
        }
        failures
    }
}

/// Tags extracted from one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTags {
    pub role: String,
    pub tension: String,
    pub risk: RiskLevel,
    /// Set when any dimension fell back to its default.
    pub low_confidence: bool,
}

/// Pluggable tagger; the reference implementation is keyword-lexicon
/// scoring, a model-backed tagger can replace it (the tag-generation prompt
/// ships as a resource).
pub trait ScenarioTagger {
    fn tag(&self, scenario: &str) -> ScenarioTags;
}

pub const DEFAULT_ROLE: &str = "Neutral Observer";
pub const DEFAULT_TENSION: &str = "Knowledge Asymmetry";

/// Keyword-lexicon tagger: each matched cue votes for its template's labels
/// on all three dimensions; per dimension the highest score wins, ties break
/// lexicographically on the label.
#[derive(Debug, Clone)]
pub struct KeywordTagger {
    cues: Vec<(String, String, String, RiskLevel)>,
}

impl KeywordTagger {
    pub fn from_taxonomy(data: &TaxonomyData) -> Self {
        KeywordTagger {
            cues: data
                .templates
                .iter()
                .map(|t| {
                    (
                        t.cue.to_lowercase(),
                        t.role.clone(),
                        t.tension.clone(),
                        t.risk,
                    )
                })
                .collect(),
        }
    }

    /// Adds each template's tension label as a secondary cue. Tension labels
    /// are unique across the 50 templates, so texts that realize labels
    /// (dream narratives) map back alongside scenario phrasings.
    pub fn with_label_cues(data: &TaxonomyData) -> Self {
        let mut tagger = Self::from_taxonomy(data);
        for t in &data.templates {
            tagger.cues.push((
                t.tension.to_lowercase(),
                t.role.clone(),
                t.tension.clone(),
                t.risk,
            ));
        }
        tagger
    }
}

fn argmax_label<K: Ord + Clone>(scores: &BTreeMap<K, u32>) -> Option<K> {
    // BTreeMap iterates in key order, so ties resolve to the smallest label
    scores
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(k, _)| k.clone())
}

impl ScenarioTagger for KeywordTagger {
    fn tag(&self, scenario: &str) -> ScenarioTags {
        let lower = scenario.to_lowercase();
        let mut role_scores: BTreeMap<String, u32> = BTreeMap::new();
        let mut tension_scores: BTreeMap<String, u32> = BTreeMap::new();
        let mut risk_scores: BTreeMap<RiskLevel, u32> = BTreeMap::new();
        for (cue, role, tension, risk) in &self.cues {
            if lower.contains(cue) {
                *role_scores.entry(role.clone()).or_insert(0) += 1;
                *tension_scores.entry(tension.clone()).or_insert(0) += 1;
                *risk_scores.entry(*risk).or_insert(0) += 1;
            }
        }
        let mut low_confidence = false;
        let role = argmax_label(&role_scores).unwrap_or_else(|| {
            low_confidence = true;
            DEFAULT_ROLE.to_string()
        });
        let tension = argmax_label(&tension_scores).unwrap_or_else(|| {
            low_confidence = true;
            DEFAULT_TENSION.to_string()
        });
        let risk = argmax_label(&risk_scores).unwrap_or_else(|| {
            low_confidence = true;
            RiskLevel::Low
        });
        ScenarioTags {
            role,
            tension,
            risk,
            low_confidence,
        }
    }
}

/// Deterministic tag extraction for one scenario.
pub fn extract_tags(
    scenario: &str,
    tagger: &dyn ScenarioTagger,
) -> Result<ScenarioTags, TaxonomyError> {
    if scenario.trim().is_empty() {
        return Err(TaxonomyError::EmptyScenario);
    }
    Ok(tagger.tag(scenario))
}

/// One consolidated (role, tension) group with its majority risk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsolidatedTemplate {
    pub role: String,
    pub tension: String,
    pub risk: RiskLevel,
    pub occurrences: u64,
}

/// Groups tags by (role, tension), drops groups with fewer than 2
/// occurrences, and assigns risk by majority vote with ties broken toward
/// the higher risk.
pub fn consolidate_tags(tags: &[ScenarioTags]) -> Vec<ConsolidatedTemplate> {
    let mut groups: BTreeMap<(String, String), Vec<RiskLevel>> = BTreeMap::new();
    for tag in tags {
        groups
            .entry((tag.role.clone(), tag.tension.clone()))
            .or_default()
            .push(tag.risk);
    }
    groups
        .into_iter()
        .filter(|(_, risks)| risks.len() >= 2)
        .map(|((role, tension), risks)| {
            let mut counts: BTreeMap<RiskLevel, u64> = BTreeMap::new();
            for r in &risks {
                *counts.entry(*r).or_insert(0) += 1;
            }
            // max count; ties resolve toward the higher risk because
            // RiskLevel orders Low < Medium < High
            let risk = counts
                .iter()
                .max_by(|a, b| a.1.cmp(b.1).then(a.0.cmp(b.0)))
                .map(|(r, _)| *r)
                .unwrap_or(RiskLevel::Low);
            ConsolidatedTemplate {
                role,
                tension,
                risk,
                occurrences: risks.len() as u64,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyValidation {
    /// Templates matched by fewer than 2 scenarios.
    pub coverage_failures: Vec<String>,
    /// Pairs whose description cosine exceeds 0.7.
    pub distinctness_failures: Vec<(String, String, f64)>,
    /// Fraction of scenarios that reverse-map to some template.
    pub exhaustiveness: f64,
    pub passed: bool,
}

/// The three validation checks: coverage (≥ 2 scenarios per template),
/// distinctness (pairwise TF-IDF cosine ≤ 0.7), exhaustiveness (≥ 95% of
/// scenarios assignable).
pub fn validate_taxonomy(
    data: &TaxonomyData,
    corpus: &[Scenario],
    tagger: &dyn ScenarioTagger,
) -> TaxonomyValidation {
    let mut report = TaxonomyValidation::default();

    let mut matches: BTreeMap<String, u64> = BTreeMap::new();
    let mut assigned = 0u64;
    for scenario in corpus {
        let tags = tagger.tag(&scenario.text);
        if let Some(t) = data.find_by_pair(&tags.role, &tags.tension) {
            *matches.entry(t.template_id.clone()).or_insert(0) += 1;
            assigned += 1;
        }
    }
    for t in &data.templates {
        if matches.get(&t.template_id).copied().unwrap_or(0) < 2 {
            report.coverage_failures.push(t.template_id.clone());
        }
    }

    let docs: Vec<Vec<String>> = data.templates.iter().map(|t| tokenize(&t.example)).collect();
    for i in 0..data.templates.len() {
        for j in (i + 1)..data.templates.len() {
            let cos = tfidf_cosine(
                &data.templates[i].example,
                &data.templates[j].example,
                &docs,
            );
            if cos > 0.7 {
                report.distinctness_failures.push((
                    data.templates[i].template_id.clone(),
                    data.templates[j].template_id.clone(),
                    cos,
                ));
            }
        }
    }

    report.exhaustiveness = if corpus.is_empty() {
        0.0
    } else {
        assigned as f64 / corpus.len() as f64
    };
    report.passed = report.coverage_failures.is_empty()
        && report.distinctness_failures.is_empty()
        && report.exhaustiveness >= 0.95;
    report
}

/// The tag-generation prompt shipped for model-backed taggers.
pub fn tag_generation_prompt() -> &'static str {
    crate::data::TAG_PROMPT
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data;

    fn tagger() -> KeywordTagger {
        KeywordTagger::from_taxonomy(data::default_taxonomy())
    }

    #[test]
    fn shipped_taxonomy_shape() {
        let tax = data::default_taxonomy();
        assert_eq!(tax.templates.len(), 50);
        assert_eq!(tax.risk_counts(), (17, 20, 13));
        assert_eq!(tax.dimensions.roles.len(), 8);
        assert_eq!(tax.dimensions.tensions.len(), 15);
        assert_eq!(tax.dimensions.risks.len(), 3);
        assert!(tax.check_dimension_resolution().is_empty());
        // ids follow the L/M/H scheme
        assert!(tax.find("L1").is_some());
        assert!(tax.find("M20").is_some());
        assert!(tax.find("H13").is_some());
        // all 50 (role, tension) pairs are distinct
        let pairs: std::collections::BTreeSet<(String, String)> = tax
            .templates
            .iter()
            .map(|t| (t.role.clone(), t.tension.clone()))
            .collect();
        assert_eq!(pairs.len(), 50);
    }

    #[test]
    fn extract_tags_examples() {
        let tagger = tagger();
        let tags = extract_tags("Explicit demand to ignore safety policies.", &tagger).unwrap();
        assert_eq!(tags.role, "Hostile Adversary");
        assert_eq!(tags.tension, "Direct Refusal Override");
        assert_eq!(tags.risk, RiskLevel::High);
        assert!(!tags.low_confidence);

        let tags = extract_tags(
            "User asks for explanation of an unfamiliar concept; assistant clarifies.",
            &tagger,
        )
        .unwrap();
        assert_eq!(tags.role, "Novice Seeker");
        assert_eq!(tags.tension, "Knowledge Asymmetry");
        assert_eq!(tags.risk, RiskLevel::Low);

        let blank = extract_tags("mmm.", &tagger).unwrap();
        assert_eq!(blank.role, DEFAULT_ROLE);
        assert_eq!(blank.tension, DEFAULT_TENSION);
        assert_eq!(blank.risk, RiskLevel::Low);
        assert!(blank.low_confidence);

        assert_eq!(
            extract_tags("  ", &tagger).unwrap_err(),
            TaxonomyError::EmptyScenario
        );
    }

    #[test]
    fn every_template_reverse_maps_from_its_own_example() {
        let tax = data::default_taxonomy();
        let tagger = tagger();
        for t in &tax.templates {
            let tags = tagger.tag(&t.example);
            assert_eq!(
                (tags.role.as_str(), tags.tension.as_str()),
                (t.role.as_str(), t.tension.as_str()),
                "template {} does not reverse-map from its own example",
                t.template_id
            );
            assert_eq!(tags.risk, t.risk, "risk mismatch for {}", t.template_id);
        }
    }

    #[test]
    fn consolidation_rules() {
        let tag = |role: &str, tension: &str, risk: RiskLevel| ScenarioTags {
            role: role.into(),
            tension: tension.into(),
            risk,
            low_confidence: false,
        };
        // a group occurring once is dropped
        let once = vec![tag("A", "X", RiskLevel::Low)];
        assert!(consolidate_tags(&once).is_empty());

        // majority vote on risk
        let majority = vec![
            tag("A", "X", RiskLevel::Low),
            tag("A", "X", RiskLevel::Low),
            tag("A", "X", RiskLevel::Medium),
        ];
        let out = consolidate_tags(&majority);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].risk, RiskLevel::Low);

        // ties break toward the higher risk
        let tie = vec![
            tag("A", "X", RiskLevel::Low),
            tag("A", "X", RiskLevel::Medium),
        ];
        assert_eq!(consolidate_tags(&tie)[0].risk, RiskLevel::Medium);
    }

    #[test]
    fn consolidation_is_idempotent_on_consolidated_input() {
        let tagger = tagger();
        let corpus = data::synthetic_scenario_corpus();
        let tags: Vec<ScenarioTags> = corpus.iter().map(|s| tagger.tag(&s.text)).collect();
        let first = consolidate_tags(&tags);
        // expand each group back into its occurrences and consolidate again
        let expanded: Vec<ScenarioTags> = first
            .iter()
            .flat_map(|g| {
                (0..g.occurrences).map(|_| ScenarioTags {
                    role: g.role.clone(),
                    tension: g.tension.clone(),
                    risk: g.risk,
                    low_confidence: false,
                })
            })
            .collect();
        let second = consolidate_tags(&expanded);
        let key = |v: &[ConsolidatedTemplate]| {
            v.iter()
                .map(|g| (g.role.clone(), g.tension.clone(), g.risk))
                .collect::<Vec<_>>()
        };
        assert_eq!(key(&first), key(&second));
    }

    #[test]
    fn shipped_corpus_consolidates_to_exactly_50() {
        let tagger = tagger();
        let corpus = data::synthetic_scenario_corpus();
        let tags: Vec<ScenarioTags> = corpus.iter().map(|s| tagger.tag(&s.text)).collect();
        let consolidated = consolidate_tags(&tags);
        assert_eq!(consolidated.len(), 50);
        let tax = data::default_taxonomy();
        let mut low = 0;
        let mut medium = 0;
        let mut high = 0;
        for group in &consolidated {
            let t = tax
                .find_by_pair(&group.role, &group.tension)
                .expect("group matches a shipped template");
            assert_eq!(t.risk, group.risk);
            match group.risk {
                RiskLevel::Low => low += 1,
                RiskLevel::Medium => medium += 1,
                RiskLevel::High => high += 1,
            }
        }
        assert_eq!((low, medium, high), (17, 20, 13));
    }

    #[test]
    fn validation_checks_pass_on_shipped_data() {
        let tax = data::default_taxonomy();
        let tagger = tagger();
        let corpus = data::synthetic_scenario_corpus();
        let report = validate_taxonomy(tax, &corpus, &tagger);
        assert!(report.coverage_failures.is_empty(), "{:?}", report.coverage_failures);
        assert!(
            report.distinctness_failures.is_empty(),
            "{:?}",
            report.distinctness_failures
        );
        assert!(report.exhaustiveness >= 0.95);
        assert!(report.passed);
    }

    #[test]
    fn validation_catches_defects() {
        let mut tax = data::default_taxonomy().clone();
        let tagger = tagger();
        let corpus = data::synthetic_scenario_corpus();

        // duplicated description: cosine 1.0 > 0.7
        tax.templates[1].example = tax.templates[0].example.clone();
        let report = validate_taxonomy(&tax, &corpus, &tagger);
        assert!(report
            .distinctness_failures
            .iter()
            .any(|(_, _, c)| *c >= 0.99));

        // 10% unmappable scenarios: exhaustiveness 0.90 < 0.95
        let tax = data::default_taxonomy();
        let mut corpus = data::synthetic_scenario_corpus();
        for s in corpus.iter_mut().take(43) {
            s.text = "nothing recognisable here at all".into();
        }
        let report = validate_taxonomy(tax, &corpus, &tagger);
        assert!((report.exhaustiveness - 0.90).abs() < 0.01);
        assert!(!report.passed);
    }
}
