//! Poisoning defenses and safety routing: source-entropy gates, concentration
//! caps, motif-diversity throttling, frequency-anomaly detection, inter-agent
//! sanitisation and nightmare routing.
//!
//! All pool-level entropies here are in nats; the coverage experiment uses
//! bits (see `metrics`).

use std::collections::BTreeMap;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::core_model::{InteractionTemplate, Motif, ProvenanceDistribution};

#[derive(Debug, Error, PartialEq)]
pub enum GovernanceError {
    #[error("invalid distribution: negative fraction for source {0}")]
    NegativeFraction(String),
    #[error("insufficient history: need at least 3 batches, got {0}")]
    InsufficientHistory(usize),
    #[error("bad pattern line {line}: {message}")]
    BadPattern { line: usize, message: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GovernanceConfig {
    /// Minimum provenance entropy H_S, nats.
    pub min_source_entropy: f64,
    /// Maximum single-source contribution share.
    pub max_source_share: f64,
    /// Pool-wide motif entropy floor, nats.
    pub motif_diversity_threshold: f64,
    /// Throttling only applies above this many active motif types.
    pub motif_diversity_min_types: usize,
    pub diversity_window_days: u64,
    pub anomaly_z_threshold: f64,
    /// Rolling window (number of prior batches) for anomaly scoring.
    pub anomaly_window: usize,
    pub w_pattern: f64,
    pub w_model: f64,
    pub w_anomaly: f64,
    pub intent_threshold: f64,
}

impl Default for GovernanceConfig {
    fn default() -> Self {
        GovernanceConfig {
            min_source_entropy: 0.6,
            max_source_share: 0.40,
            motif_diversity_threshold: 2.5,
            motif_diversity_min_types: 20,
            diversity_window_days: 30,
            anomaly_z_threshold: 3.0,
            anomaly_window: 8,
            w_pattern: 0.5,
            w_model: 0.3,
            w_anomaly: 0.2,
            intent_threshold: 0.4,
        }
    }
}

/// Shannon entropy (nats) of a provenance distribution. Empty → 0.
pub fn source_entropy(p: &ProvenanceDistribution) -> Result<f64, GovernanceError> {
    let mut h = 0.0;
    for (source, &f) in &p.fractions {
        if f < 0.0 {
            return Err(GovernanceError::NegativeFraction(source.clone()));
        }
        if f > 0.0 {
            h -= f * f.ln();
        }
    }
    Ok(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateDecision {
    Promote,
    DownWeight,
    Quarantine,
}

/// Diversity-aware aggregation gate: promote iff H_S clears the entropy floor
/// AND no source exceeds the share cap; quarantine when both fail; down-weight
/// when exactly one fails.
pub fn check_motif_provenance(m: &Motif, cfg: &GovernanceConfig) -> GateDecision {
    gate_provenance(&m.provenance, cfg)
}

/// Same gate over a bare provenance distribution (also used for whole
/// batches at review time).
pub fn gate_provenance(p: &ProvenanceDistribution, cfg: &GovernanceConfig) -> GateDecision {
    if p.is_empty() {
        return GateDecision::Quarantine;
    }
    let entropy_ok = source_entropy(p).unwrap_or(0.0) >= cfg.min_source_entropy;
    let share_ok = p.max_share() <= cfg.max_source_share;
    match (entropy_ok, share_ok) {
        (true, true) => GateDecision::Promote,
        (false, false) => GateDecision::Quarantine,
        _ => GateDecision::DownWeight,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThrottleDecision {
    pub throttled: bool,
    /// Motif clusters quarantined pending operator resolution.
    pub quarantined_clusters: Vec<String>,
    pub human_review: bool,
}

/// Motif-type entropy (nats) over the rolling window plus the throttle
/// decision. Throttling quarantines dominant clusters (share above the
/// source cap) and flags human review.
pub fn motif_diversity(
    window_counts: &BTreeMap<String, u64>,
    cfg: &GovernanceConfig,
) -> (f64, ThrottleDecision) {
    let active: Vec<(&String, u64)> = window_counts
        .iter()
        .filter(|(_, &c)| c > 0)
        .map(|(l, &c)| (l, c))
        .collect();
    let total: u64 = active.iter().map(|(_, c)| c).sum();
    let h = if total == 0 {
        0.0
    } else {
        active
            .iter()
            .map(|(_, c)| {
                let p = *c as f64 / total as f64;
                -p * p.ln()
            })
            .sum()
    };
    let throttled = active.len() > cfg.motif_diversity_min_types && h < cfg.motif_diversity_threshold;
    let quarantined_clusters = if throttled {
        active
            .iter()
            .filter(|(_, c)| *c as f64 / total as f64 > cfg.max_source_share)
            .map(|(l, _)| (*l).clone())
            .collect()
    } else {
        Vec::new()
    };
    (
        h,
        ThrottleDecision {
            throttled,
            quarantined_clusters,
            human_review: throttled,
        },
    )
}

/// Rolling z-score of the current per-batch count against prior batches.
/// Flags on z ≥ threshold, or on any spike above a zero-variance history.
pub fn detect_frequency_anomaly(
    history: &[u64],
    current: u64,
    cfg: &GovernanceConfig,
) -> Result<(f64, bool), GovernanceError> {
    if history.len() < 3 {
        return Err(GovernanceError::InsufficientHistory(history.len()));
    }
    let window: Vec<f64> = history
        .iter()
        .rev()
        .take(cfg.anomaly_window)
        .rev()
        .map(|&c| c as f64)
        .collect();
    let mean = window.iter().sum::<f64>() / window.len() as f64;
    let var = window.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (window.len() - 1) as f64;
    let std = var.sqrt();
    if std == 0.0 {
        let spike = (current as f64) > mean;
        return Ok((if spike { f64::INFINITY } else { 0.0 }, spike));
    }
    let z = (current as f64 - mean) / std;
    Ok((z, z >= cfg.anomaly_z_threshold))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InjectionCategory {
    ToolCall,
    PolicyOverride,
    MetaPrompt,
    ExecutablePattern,
}

/// One guard pattern: literal or regex, with its category.
#[derive(Debug, Clone)]
pub struct InjectionPattern {
    pub category: InjectionCategory,
    pub regex: Regex,
    pub source: String,
}

/// The configured injection-pattern set.
#[derive(Debug, Clone, Default)]
pub struct PatternSet {
    pub patterns: Vec<InjectionPattern>,
}

impl PatternSet {
    /// Parses the pattern file format: one pattern per line,
    /// `category<TAB>kind<TAB>pattern` where kind is `literal` or `regex`.
    /// Lines starting with `#` are comments.
    pub fn parse(text: &str) -> Result<PatternSet, GovernanceError> {
        let mut patterns = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.splitn(3, '\t');
            let (cat, kind, pat) = match (parts.next(), parts.next(), parts.next()) {
                (Some(c), Some(k), Some(p)) => (c, k, p),
                _ => {
                    return Err(GovernanceError::BadPattern {
                        line: i + 1,
                        message: "expected category<TAB>kind<TAB>pattern".into(),
                    })
                }
            };
            let category = match cat {
                "tool_call" => InjectionCategory::ToolCall,
                "policy_override" => InjectionCategory::PolicyOverride,
                "meta_prompt" => InjectionCategory::MetaPrompt,
                "executable_pattern" => InjectionCategory::ExecutablePattern,
                other => {
                    return Err(GovernanceError::BadPattern {
                        line: i + 1,
                        message: format!("unknown category {other}"),
                    })
                }
            };
            let expr = match kind {
                "literal" => format!("(?i){}", regex::escape(pat)),
                "regex" => format!("(?i){pat}"),
                other => {
                    return Err(GovernanceError::BadPattern {
                        line: i + 1,
                        message: format!("unknown kind {other}"),
                    })
                }
            };
            let regex = Regex::new(&expr).map_err(|e| GovernanceError::BadPattern {
                line: i + 1,
                message: e.to_string(),
            })?;
            patterns.push(InjectionPattern {
                category,
                regex,
                source: pat.to_string(),
            });
        }
        Ok(PatternSet { patterns })
    }

    pub fn matches(&self, text: &str) -> bool {
        self.patterns.iter().any(|p| p.regex.is_match(text))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemovedSpan {
    pub text: String,
    pub category: InjectionCategory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SanitisationReport {
    pub cleaned: String,
    pub removed: Vec<RemovedSpan>,
}

/// Strips every match of the configured injection patterns. Removal loops to
/// a fixpoint so the result carries no residual match; output never grows.
pub fn sanitise_message(text: &str, patterns: &PatternSet) -> SanitisationReport {
    let mut cleaned = text.to_string();
    let mut removed = Vec::new();
    // Re-scan after each pass: removing one span can expose another.
    for _ in 0..16 {
        let mut changed = false;
        for p in &patterns.patterns {
            while let Some(m) = p.regex.find(&cleaned.clone()) {
                removed.push(RemovedSpan {
                    text: m.as_str().to_string(),
                    category: p.category,
                });
                cleaned.replace_range(m.range(), "");
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    // collapse doubled spaces introduced by removal
    while cleaned.contains("  ") {
        cleaned = cleaned.replace("  ", " ");
    }
    SanitisationReport {
        cleaned: cleaned.trim().to_string(),
        removed,
    }
}

/// Pluggable model-based intent scorer. The reference implementation is a
/// phrase lexicon; a real classifier slots in behind the same trait.
pub trait IntentModel {
    fn score(&self, text: &str) -> f64;
}

/// Reference scorer: fraction of lexicon phrases present in the text.
#[derive(Debug, Clone)]
pub struct LexiconIntentModel {
    pub phrases: Vec<String>,
}

impl LexiconIntentModel {
    pub fn parse(text: &str) -> Self {
        LexiconIntentModel {
            phrases: text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(|l| l.to_lowercase())
                .collect(),
        }
    }
}

impl IntentModel for LexiconIntentModel {
    fn score(&self, text: &str) -> f64 {
        if self.phrases.is_empty() {
            return 0.0;
        }
        let lower = text.to_lowercase();
        let hits = self.phrases.iter().filter(|p| lower.contains(*p)).count();
        hits as f64 / self.phrases.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentScore {
    pub pattern_score: f64,
    pub model_score: f64,
    pub anomaly_score: f64,
    pub combined: f64,
    pub routed_nightmare: bool,
}

/// Weighted ensemble of (i) injection-pattern matching, (ii) the pluggable
/// model scorer and (iii) an anomaly score supplied by the caller. Items at
/// or above the threshold are routed to the nightmare curriculum.
pub fn score_manipulative_intent(
    text: &str,
    anomaly_score: f64,
    patterns: &PatternSet,
    model: &dyn IntentModel,
    cfg: &GovernanceConfig,
) -> IntentScore {
    let pattern_score = if patterns.matches(text) { 1.0 } else { 0.0 };
    let model_score = model.score(text).clamp(0.0, 1.0);
    let anomaly_score = anomaly_score.clamp(0.0, 1.0);
    let combined =
        cfg.w_pattern * pattern_score + cfg.w_model * model_score + cfg.w_anomaly * anomaly_score;
    IntentScore {
        pattern_score,
        model_score,
        anomaly_score,
        combined,
        routed_nightmare: combined >= cfg.intent_threshold,
    }
}

/// Intent scoring over a template's surface fields.
pub fn score_template_intent(
    t: &InteractionTemplate,
    anomaly_score: f64,
    patterns: &PatternSet,
    model: &dyn IntentModel,
    cfg: &GovernanceConfig,
) -> IntentScore {
    let text = t.surface_tokens().join(" ");
    score_manipulative_intent(&text, anomaly_score, patterns, model, cfg)
}

/// Configured governance stack handed to the pool's batch review: gates,
/// patterns and the pluggable intent model.
pub struct GovernanceEngine {
    pub config: GovernanceConfig,
    pub patterns: PatternSet,
    pub model: Box<dyn IntentModel + Send + Sync>,
}

impl Default for GovernanceEngine {
    fn default() -> Self {
        GovernanceEngine {
            config: GovernanceConfig::default(),
            patterns: crate::data::default_patterns().clone(),
            model: Box::new(crate::data::default_intent_model().clone()),
        }
    }
}

impl GovernanceEngine {
    pub fn assess_template(&self, t: &InteractionTemplate) -> IntentScore {
        score_template_intent(t, 0.0, &self.patterns, self.model.as_ref(), &self.config)
    }

    pub fn assess_text(&self, text: &str, anomaly_score: f64) -> IntentScore {
        score_manipulative_intent(text, anomaly_score, &self.patterns, self.model.as_ref(), &self.config)
    }
}
