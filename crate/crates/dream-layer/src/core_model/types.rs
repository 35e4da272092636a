//! The shared record types: episodes, interaction templates, dream narratives,
//! motifs, behavioural priors and the policy head.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::Timestamp;

/// Pool segmentation key. Cross-partition sampling is off by default, so
/// these three labels decide who can ever see a template.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PartitionKey {
    pub language: String,
    pub jurisdiction: String,
    pub community: String,
}

impl PartitionKey {
    pub fn new(language: &str, jurisdiction: &str, community: &str) -> Self {
        PartitionKey {
            language: language.to_string(),
            jurisdiction: jurisdiction.to_string(),
            community: community.to_string(),
        }
    }
}

/// One raw dialogue turn. Episodes never enter the pool; they exist only as
/// abstraction input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: String,
    pub text: String,
}

/// A raw (synthetic) dialogue record entering abstraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub episode_id: String,
    pub agent_id: String,
    pub partition: PartitionKey,
    pub turns: Vec<Turn>,
    pub created_at: Timestamp,
}

impl Episode {
    /// All turn text concatenated, in order. The generalisation ratio is
    /// measured against this.
    pub fn full_text(&self) -> String {
        self.turns
            .iter()
            .map(|t| t.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Positive,
    Negative,
    Neutral,
}

/// Outcome valence: polarity plus optional intensity in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Valence {
    pub polarity: Polarity,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intensity: Option<f64>,
}

impl Valence {
    pub fn neutral() -> Self {
        Valence {
            polarity: Polarity::Neutral,
            intensity: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskLevel {
    Low,
    Medium,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateStatus {
    Queued,
    Cooling,
    ReviewedOk,
    Quarantined,
    Rejected,
    Nightmare,
}

/// Goal structure: a goal type plus slot labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Goal {
    pub goal_type: String,
    pub slots: BTreeSet<String>,
}

/// The de-identified 5-tuple (roles, tension sequence, event slots, goal,
/// valence) plus pool metadata. This is the unit of sharing; nothing else
/// ever leaves an agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionTemplate {
    pub template_id: String,
    pub roles: BTreeSet<String>,
    pub tension_sequence: Vec<String>,
    pub event_slots: BTreeSet<String>,
    pub goal: Goal,
    pub valence: Valence,
    pub risk_level: RiskLevel,
    pub partition: PartitionKey,
    /// Pseudonymous source identifier; governance-visible only.
    pub source: String,
    pub submitted_at: Timestamp,
    pub status: TemplateStatus,
}

impl InteractionTemplate {
    /// Tokens of every surface field, in canonical order. Audit gates (NER,
    /// surviving n-grams, generalisation ratio) run over these.
    pub fn surface_tokens(&self) -> Vec<String> {
        let mut text = Vec::new();
        for r in &self.roles {
            text.push(r.clone());
        }
        text.extend(self.tension_sequence.iter().cloned());
        for z in &self.event_slots {
            text.push(z.clone());
        }
        text.push(self.goal.goal_type.clone());
        for s in &self.goal.slots {
            text.push(s.clone());
        }
        crate::metrics::tokenize(&text.join(" "))
    }
}

/// Validation outcome: violations are data, not failures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every structural invariant of a template and reports all
/// violations at once.
pub fn validate_template(t: &InteractionTemplate) -> ValidationReport {
    let mut violations = Vec::new();
    if t.template_id.is_empty() {
        violations.push("template id empty".to_string());
    }
    if t.roles.is_empty() {
        violations.push("roles empty".to_string());
    }
    if t.roles.iter().any(|r| r.trim().is_empty()) {
        violations.push("role label empty".to_string());
    }
    if t.tension_sequence.is_empty() {
        violations.push("tension sequence empty".to_string());
    }
    if t.tension_sequence.iter().any(|s| s.trim().is_empty()) {
        violations.push("tension label empty".to_string());
    }
    if t.goal.goal_type.trim().is_empty() {
        violations.push("goal type empty".to_string());
    }
    if let Some(i) = t.valence.intensity {
        if !(0.0..=1.0).contains(&i) {
            violations.push("intensity out of range".to_string());
        }
    }
    for (label, value) in [
        ("language", &t.partition.language),
        ("jurisdiction", &t.partition.jurisdiction),
        ("community", &t.partition.community),
    ] {
        if value.trim().is_empty() {
            violations.push(format!("partition {label} empty"));
        }
    }
    if t.source.trim().is_empty() {
        violations.push("source empty".to_string());
    }
    ValidationReport { violations }
}

/// Offline-generated narrative. The dream tag is a permanent marker: it is
/// not optional and decoding rejects records where it is absent or false.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DreamNarrative {
    pub dream_id: String,
    pub template_id: String,
    pub text: String,
    #[serde(deserialize_with = "require_true")]
    pub dream_tag: bool,
    pub temperature_used: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    pub created_at: Timestamp,
    pub hard_purge_at: Timestamp,
    pub motif_labels: BTreeSet<String>,
}

fn require_true<'de, D>(d: D) -> Result<bool, D::Error>
where
    D: serde::Deserializer<'de>,
{
    let v = bool::deserialize(d)?;
    if !v {
        return Err(serde::de::Error::custom("dream_tag must be true"));
    }
    Ok(v)
}

/// Structural key of a motif: a role pair, a tension subsequence of length
/// ≥ 2 and the valence polarity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StructuralSignature {
    pub role_pair: (String, String),
    pub tension_subsequence: Vec<String>,
    pub valence_polarity: Polarity,
}

/// Per-source contribution fractions for a motif. Fractions are non-negative
/// and sum to 1 (±1e-9) when non-empty.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ProvenanceDistribution {
    pub fractions: BTreeMap<String, f64>,
}

impl ProvenanceDistribution {
    pub fn from_counts(counts: &BTreeMap<String, u64>) -> Self {
        let total: u64 = counts.values().sum();
        let mut fractions = BTreeMap::new();
        if total > 0 {
            for (source, c) in counts {
                fractions.insert(source.clone(), *c as f64 / total as f64);
            }
        }
        ProvenanceDistribution { fractions }
    }

    pub fn is_empty(&self) -> bool {
        self.fractions.is_empty()
    }

    pub fn max_share(&self) -> f64 {
        self.fractions.values().cloned().fold(0.0, f64::max)
    }

    /// Number of distinct contributing sources.
    pub fn source_count(&self) -> usize {
        self.fractions.len()
    }
}

/// A recurring cross-dream structural pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Motif {
    pub motif_label: String,
    pub structural_signature: StructuralSignature,
    pub count: u64,
    pub provenance: ProvenanceDistribution,
    pub first_seen: Timestamp,
    pub last_seen: Timestamp,
}

/// Where a prior came from: which templates, how often the motif recurred,
/// and when it was distilled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceTrace {
    pub source_template_ids: BTreeSet<String>,
    pub motif_frequency: u64,
    pub distilled_at: Timestamp,
}

/// A damped, capped, provenance-traced policy delta.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviouralPrior {
    pub prior_id: String,
    pub dimension: String,
    pub delta: f64,
    /// In [0.1, 0.3].
    pub damping: f64,
    /// |applied_change| ≤ 0.2 once applied.
    pub applied_change: f64,
    pub provenance_trace: ProvenanceTrace,
    pub active: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub revoked_at: Option<Timestamp>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyAuditRecord {
    pub prior_id: String,
    pub dimension: String,
    pub applied_change: f64,
    pub at: Timestamp,
}

/// Named preference dimensions plus an append-only audit log. Factual or
/// retrieval state has no representation here by construction.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PolicyHead {
    pub initial: BTreeMap<String, f64>,
    pub current: BTreeMap<String, f64>,
    pub audit_log: Vec<PolicyAuditRecord>,
}

impl PolicyHead {
    pub fn new(dimensions: impl IntoIterator<Item = (String, f64)>) -> Self {
        let initial: BTreeMap<String, f64> = dimensions.into_iter().collect();
        PolicyHead {
            current: initial.clone(),
            initial,
            audit_log: Vec::new(),
        }
    }

    pub fn value(&self, dimension: &str) -> f64 {
        self.current.get(dimension).copied().unwrap_or(0.0)
    }

    /// Reconstructs the dimension values by replaying the audit log from the
    /// initial values.
    pub fn replay(&self) -> BTreeMap<String, f64> {
        let mut values = self.initial.clone();
        for rec in &self.audit_log {
            *values.entry(rec.dimension.clone()).or_insert(0.0) += rec.applied_change;
        }
        values
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_template() -> InteractionTemplate {
        InteractionTemplate {
            template_id: "t-1".into(),
            roles: ["Novice Seeker".to_string()].into_iter().collect(),
            tension_sequence: vec!["Knowledge Asymmetry".into()],
            event_slots: BTreeSet::new(),
            goal: Goal {
                goal_type: "clarify unfamiliar concept".into(),
                slots: BTreeSet::new(),
            },
            valence: Valence::neutral(),
            risk_level: RiskLevel::Low,
            partition: PartitionKey::new("en", "EU", "hobbyists"),
            source: "src-1".into(),
            submitted_at: Timestamp::from_day(0),
            status: TemplateStatus::Queued,
        }
    }

    #[test]
    fn empty_roles_is_a_violation() {
        let mut t = sample_template();
        t.roles.clear();
        let report = validate_template(&t);
        assert!(report.violations.iter().any(|v| v == "roles empty"));
    }

    #[test]
    fn intensity_out_of_range_is_a_violation() {
        let mut t = sample_template();
        t.valence.intensity = Some(1.5);
        let report = validate_template(&t);
        assert!(report
            .violations
            .iter()
            .any(|v| v == "intensity out of range"));
    }

    #[test]
    fn well_formed_taxonomy_template_is_ok() {
        let t = sample_template();
        assert!(validate_template(&t).is_ok());
    }

    #[test]
    fn provenance_from_counts_sums_to_one() {
        let counts: BTreeMap<String, u64> =
            [("a".to_string(), 2), ("b".to_string(), 3)].into_iter().collect();
        let p = ProvenanceDistribution::from_counts(&counts);
        let sum: f64 = p.fractions.values().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!((p.max_share() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn policy_head_replay_matches_current_after_manual_log() {
        let mut head = PolicyHead::new([("dim".to_string(), 0.0)]);
        head.audit_log.push(PolicyAuditRecord {
            prior_id: "p1".into(),
            dimension: "dim".into(),
            applied_change: 0.15,
            at: Timestamp::from_day(1),
        });
        *head.current.get_mut("dim").unwrap() += 0.15;
        assert_eq!(head.replay(), head.current);
    }
}
