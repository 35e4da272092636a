//! Motif extraction from the dream store and bounded policy distillation:
//! recurring structural patterns become damped, capped, provenance-traced
//! behavioural priors, with full audit and revocation.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::core_model::{
    BehaviouralPrior, InteractionTemplate, Motif, PolicyAuditRecord, PolicyHead, Polarity,
    ProvenanceDistribution, ProvenanceTrace, StructuralSignature, TemplateStatus, Timestamp,
};
use crate::dream_engine::{markers, stable_hash, DreamStore, QueryMode};
use crate::governance::{check_motif_provenance, GateDecision, GovernanceConfig};

#[derive(Debug, Error, PartialEq)]
pub enum DistillError {
    #[error("motif extraction requires dream_mode context")]
    NotDreamMode,
    #[error("prior {0} already applied")]
    AlreadyApplied(String),
    #[error("unknown prior {0}")]
    UnknownPrior(String),
    #[error("prior {0} already revoked")]
    AlreadyRevoked(String),
    #[error("bad mapping line {line}: {message}")]
    BadMapping { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq)]
struct MappingEntry {
    role_a: Option<String>,
    role_b: Option<String>,
    subsequence: Vec<String>,
    /// A trailing `-> *` in the table makes this a prefix rule.
    prefix: bool,
    polarity: Option<Polarity>,
    dimension: String,
    delta: f64,
}

/// Structural signature → (policy dimension, delta). Exact subsequence rules
/// take precedence over prefix rules.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MotifMappingTable {
    entries: Vec<MappingEntry>,
}

impl MotifMappingTable {
    pub fn parse(text: &str) -> Result<Self, DistillError> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split('\t').collect();
            if parts.len() != 6 {
                return Err(DistillError::BadMapping {
                    line: i + 1,
                    message: format!("expected 6 tab-separated fields, got {}", parts.len()),
                });
            }
            let wildcard = |s: &str| {
                if s == "*" {
                    None
                } else {
                    Some(s.to_string())
                }
            };
            let mut labels: Vec<String> = parts[2]
                .split("->")
                .map(|s| s.trim().to_lowercase())
                .collect();
            let prefix = labels.last().map(|l| l == "*").unwrap_or(false);
            if prefix {
                labels.pop();
            }
            let polarity = match parts[3] {
                "*" => None,
                "positive" => Some(Polarity::Positive),
                "negative" => Some(Polarity::Negative),
                "neutral" => Some(Polarity::Neutral),
                other => {
                    return Err(DistillError::BadMapping {
                        line: i + 1,
                        message: format!("bad polarity {other}"),
                    })
                }
            };
            let delta: f64 = parts[5].parse().map_err(|_| DistillError::BadMapping {
                line: i + 1,
                message: format!("bad delta {}", parts[5]),
            })?;
            if delta.abs() > 1.0 {
                return Err(DistillError::BadMapping {
                    line: i + 1,
                    message: "|delta| must be ≤ 1".into(),
                });
            }
            entries.push(MappingEntry {
                role_a: wildcard(parts[0]),
                role_b: wildcard(parts[1]),
                subsequence: labels,
                prefix,
                polarity,
                dimension: parts[4].to_string(),
                delta,
            });
        }
        Ok(MotifMappingTable { entries })
    }

    /// Dimensions this table can write to.
    pub fn dimensions(&self) -> BTreeSet<String> {
        self.entries.iter().map(|e| e.dimension.clone()).collect()
    }

    pub fn lookup(&self, sig: &StructuralSignature) -> Option<(String, f64)> {
        let sub: Vec<String> = sig
            .tension_subsequence
            .iter()
            .map(|s| s.to_lowercase())
            .collect();
        let matches = |e: &MappingEntry| {
            if let Some(a) = &e.role_a {
                if a != &sig.role_pair.0 {
                    return false;
                }
            }
            if let Some(b) = &e.role_b {
                if b != &sig.role_pair.1 {
                    return false;
                }
            }
            if let Some(p) = e.polarity {
                if p != sig.valence_polarity {
                    return false;
                }
            }
            if e.prefix {
                sub.len() >= e.subsequence.len() && sub[..e.subsequence.len()] == e.subsequence[..]
            } else {
                sub == e.subsequence
            }
        };
        self.entries
            .iter()
            .filter(|e| !e.prefix)
            .find(|e| matches(e))
            .or_else(|| self.entries.iter().filter(|e| e.prefix).find(|e| matches(e)))
            .map(|e| (e.dimension.clone(), e.delta))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistillationConfig {
    /// Patterns must recur at least this often to be distilled.
    pub motif_threshold: u64,
    /// New priors weigh 10–30% of existing behaviour.
    pub damping: f64,
    /// Maximum influence per policy dimension per cycle.
    pub cap: f64,
}

impl Default for DistillationConfig {
    fn default() -> Self {
        DistillationConfig {
            motif_threshold: 3,
            damping: 0.2,
            cap: 0.2,
        }
    }
}

/// A motif plus the trace data distillation needs (the core `Motif` record
/// keeps only the spec fields).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedMotif {
    pub motif: Motif,
    pub template_ids: BTreeSet<String>,
    pub dream_ids: BTreeSet<String>,
}

fn role_pair(roles: &[String]) -> (String, String) {
    let mut sorted: Vec<&String> = roles.iter().collect();
    sorted.sort();
    sorted.dedup();
    match sorted.len() {
        0 => (String::new(), String::new()),
        1 => (sorted[0].clone(), sorted[0].clone()),
        _ => (sorted[0].clone(), sorted[1].clone()),
    }
}

/// Scans the ephemeral store (dream_mode only) for recurring structural
/// patterns: contiguous tension subsequences of length ≥ 2, keyed with the
/// role pair and valence polarity, counted once per dream. Motifs subsumed
/// by a longer motif with identical support are dropped, keeping maximal
/// repeated subsequences.
pub fn extract_motifs(
    store: &DreamStore,
    mode: QueryMode,
    templates: &BTreeMap<String, InteractionTemplate>,
) -> Result<Vec<ExtractedMotif>, DistillError> {
    if mode != QueryMode::DreamMode {
        return Err(DistillError::NotDreamMode);
    }
    struct Aggregate {
        count: u64,
        source_counts: BTreeMap<String, u64>,
        template_ids: BTreeSet<String>,
        dream_ids: BTreeSet<String>,
        first_seen: Timestamp,
        last_seen: Timestamp,
    }
    let mut aggregates: BTreeMap<(String, String, Vec<String>, String), Aggregate> =
        BTreeMap::new();

    for narrative in store.scannable() {
        let Some(template) = templates.get(&narrative.template_id) else {
            continue;
        };
        if template.status == TemplateStatus::Nightmare {
            continue;
        }
        let marks = markers(&narrative.text);
        let roles: Vec<String> = marks
            .iter()
            .filter(|(k, _)| k == "role")
            .map(|(_, l)| l.clone())
            .collect();
        let tensions: Vec<String> = marks
            .iter()
            .filter(|(k, _)| k == "tension")
            .map(|(_, l)| l.clone())
            .collect();
        let pair = role_pair(&roles);
        let polarity = format!("{:?}", template.valence.polarity);

        let mut seen: BTreeSet<Vec<String>> = BTreeSet::new();
        for len in 2..=tensions.len() {
            for window in tensions.windows(len) {
                seen.insert(window.to_vec());
            }
        }
        for sub in seen {
            let key = (pair.0.clone(), pair.1.clone(), sub, polarity.clone());
            let agg = aggregates.entry(key).or_insert_with(|| Aggregate {
                count: 0,
                source_counts: BTreeMap::new(),
                template_ids: BTreeSet::new(),
                dream_ids: BTreeSet::new(),
                first_seen: narrative.created_at,
                last_seen: narrative.created_at,
            });
            agg.count += 1;
            *agg.source_counts.entry(template.source.clone()).or_insert(0) += 1;
            agg.template_ids.insert(template.template_id.clone());
            agg.dream_ids.insert(narrative.dream_id.clone());
            agg.first_seen = agg.first_seen.min(narrative.created_at);
            agg.last_seen = agg.last_seen.max(narrative.created_at);
        }
    }

    // keep only maximal subsequences at equal support
    let keys: Vec<_> = aggregates.keys().cloned().collect();
    let mut subsumed: BTreeSet<(String, String, Vec<String>, String)> = BTreeSet::new();
    for key in &keys {
        for other in &keys {
            if key == other || key.0 != other.0 || key.1 != other.1 || key.3 != other.3 {
                continue;
            }
            let (short, long) = (&key.2, &other.2);
            if short.len() < long.len()
                && long.windows(short.len()).any(|w| w == short.as_slice())
                && aggregates[key].count == aggregates[other].count
            {
                subsumed.insert(key.clone());
                break;
            }
        }
    }

    Ok(aggregates
        .into_iter()
        .filter(|(key, _)| !subsumed.contains(key))
        .map(|((a, b, sub, polarity), agg)| {
            let polarity = match polarity.as_str() {
                "Positive" => Polarity::Positive,
                "Negative" => Polarity::Negative,
                _ => Polarity::Neutral,
            };
            ExtractedMotif {
                motif: Motif {
                    motif_label: sub.join(" → "),
                    structural_signature: StructuralSignature {
                        role_pair: (a, b),
                        tension_subsequence: sub,
                        valence_polarity: polarity,
                    },
                    count: agg.count,
                    provenance: ProvenanceDistribution::from_counts(&agg.source_counts),
                    first_seen: agg.first_seen,
                    last_seen: agg.last_seen,
                },
                template_ids: agg.template_ids,
                dream_ids: agg.dream_ids,
            }
        })
        .collect())
}

/// Splits motifs into distillation candidates and skipped ones: eligible iff
/// the recurrence threshold is met and provenance gates promote.
pub fn candidate_motifs(
    motifs: Vec<ExtractedMotif>,
    cfg: &DistillationConfig,
    gov: &GovernanceConfig,
) -> (Vec<ExtractedMotif>, Vec<(String, String)>) {
    let mut eligible = Vec::new();
    let mut skipped = Vec::new();
    for em in motifs {
        if em.motif.count < cfg.motif_threshold {
            skipped.push((
                em.motif.motif_label.clone(),
                format!("count {} below threshold {}", em.motif.count, cfg.motif_threshold),
            ));
            continue;
        }
        match check_motif_provenance(&em.motif, gov) {
            GateDecision::Promote => eligible.push(em),
            decision => skipped.push((
                em.motif.motif_label.clone(),
                format!("provenance gate: {decision:?}"),
            )),
        }
    }
    (eligible, skipped)
}

/// Maps an eligible motif to a behavioural prior via the table. Unmapped
/// signatures yield `None`; the caller logs the reason.
pub fn map_motif_to_prior(
    em: &ExtractedMotif,
    table: &MotifMappingTable,
    cfg: &DistillationConfig,
    now: Timestamp,
) -> Option<BehaviouralPrior> {
    let (dimension, delta) = table.lookup(&em.motif.structural_signature)?;
    let id_hash = stable_hash(&format!("{}|{}", em.motif.motif_label, dimension));
    Some(BehaviouralPrior {
        prior_id: format!("prior-{id_hash:016x}-d{}", now.day),
        dimension,
        delta,
        damping: cfg.damping,
        applied_change: 0.0,
        provenance_trace: ProvenanceTrace {
            source_template_ids: em.template_ids.clone(),
            motif_frequency: em.motif.count,
            distilled_at: now,
        },
        active: true,
        revoked_at: None,
    })
}

/// Per-cycle accumulator: the cap applies to the cumulative change of each
/// dimension within one distillation cycle.
#[derive(Debug, Clone, Default)]
pub struct CycleState {
    changes: BTreeMap<String, f64>,
}

/// Applies a prior to the head: applied_change = clamp(damping × delta),
/// further clamped so the dimension's cumulative per-cycle change stays
/// within ±cap. Append-only audit record either way.
pub fn apply_update(
    head: &mut PolicyHead,
    prior: &mut BehaviouralPrior,
    cfg: &DistillationConfig,
    cycle: &mut CycleState,
    now: Timestamp,
) -> Result<PolicyAuditRecord, DistillError> {
    if head.audit_log.iter().any(|r| r.prior_id == prior.prior_id) {
        return Err(DistillError::AlreadyApplied(prior.prior_id.clone()));
    }
    let raw = (prior.damping * prior.delta).clamp(-cfg.cap, cfg.cap);
    let already = cycle.changes.get(&prior.dimension).copied().unwrap_or(0.0);
    let total = (already + raw).clamp(-cfg.cap, cfg.cap);
    let applied = total - already;
    prior.applied_change = applied;
    *head.current.entry(prior.dimension.clone()).or_insert(0.0) += applied;
    head.initial.entry(prior.dimension.clone()).or_insert(0.0);
    cycle.changes.insert(prior.dimension.clone(), total);
    let record = PolicyAuditRecord {
        prior_id: prior.prior_id.clone(),
        dimension: prior.dimension.clone(),
        applied_change: applied,
        at: now,
    };
    head.audit_log.push(record.clone());
    Ok(record)
}

/// Retroactive removal: the dimension returns to its pre-apply value and the
/// revocation is logged.
pub fn revoke_prior(
    head: &mut PolicyHead,
    prior: &mut BehaviouralPrior,
    now: Timestamp,
) -> Result<(), DistillError> {
    if !prior.active || prior.revoked_at.is_some() {
        return Err(DistillError::AlreadyRevoked(prior.prior_id.clone()));
    }
    if !head.audit_log.iter().any(|r| r.prior_id == prior.prior_id) {
        return Err(DistillError::UnknownPrior(prior.prior_id.clone()));
    }
    *head.current.entry(prior.dimension.clone()).or_insert(0.0) -= prior.applied_change;
    head.audit_log.push(PolicyAuditRecord {
        prior_id: prior.prior_id.clone(),
        dimension: prior.dimension.clone(),
        applied_change: -prior.applied_change,
        at: now,
    });
    prior.active = false;
    prior.revoked_at = Some(now);
    Ok(())
}

/// The policy head plus the registry of every prior ever applied; the CLI's
/// persistence unit.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PolicyState {
    pub head: PolicyHead,
    pub priors: BTreeMap<String, BehaviouralPrior>,
}

impl PolicyState {
    pub fn revoke(&mut self, prior_id: &str, now: Timestamp) -> Result<(), DistillError> {
        let prior = self
            .priors
            .get_mut(prior_id)
            .ok_or_else(|| DistillError::UnknownPrior(prior_id.to_string()))?;
        revoke_prior(&mut self.head, prior, now)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DistillationReport {
    pub motifs_found: u64,
    pub eligible: u64,
    pub applied_priors: Vec<String>,
    pub skipped: Vec<(String, String)>,
}

/// One exclusive distillation pass: extract → gate → map → apply, marking
/// contributing dreams distilled (frozen) so they are never double-counted.
pub fn distill_cycle(
    store: &mut DreamStore,
    templates: &BTreeMap<String, InteractionTemplate>,
    table: &MotifMappingTable,
    cfg: &DistillationConfig,
    gov: &GovernanceConfig,
    policy: &mut PolicyState,
    now: Timestamp,
) -> Result<DistillationReport, DistillError> {
    let motifs = extract_motifs(store, QueryMode::DreamMode, templates)?;
    let motifs_found = motifs.len() as u64;
    let (eligible, mut skipped) = candidate_motifs(motifs, cfg, gov);
    let mut report = DistillationReport {
        motifs_found,
        eligible: eligible.len() as u64,
        ..Default::default()
    };
    let mut cycle = CycleState::default();
    let mut distilled_dreams: BTreeSet<String> = BTreeSet::new();
    for em in &eligible {
        match map_motif_to_prior(em, table, cfg, now) {
            Some(mut prior) => {
                if policy.priors.contains_key(&prior.prior_id) {
                    skipped.push((em.motif.motif_label.clone(), "already applied".into()));
                    continue;
                }
                apply_update(&mut policy.head, &mut prior, cfg, &mut cycle, now)?;
                report.applied_priors.push(prior.prior_id.clone());
                policy.priors.insert(prior.prior_id.clone(), prior);
                distilled_dreams.extend(em.dream_ids.iter().cloned());
            }
            None => {
                skipped.push((em.motif.motif_label.clone(), "no mapping for signature".into()));
            }
        }
    }
    store.mark_distilled(&distilled_dreams.into_iter().collect::<Vec<_>>());
    report.skipped = skipped;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core_model::{Goal, PartitionKey, RiskLevel, Valence};
    use crate::data;
    use crate::dream_engine::generate_dream;
    use std::collections::BTreeSet;

    fn template_with_tensions(id: &str, source: &str, tensions: &[&str]) -> InteractionTemplate {
        InteractionTemplate {
            template_id: id.to_string(),
            roles: ["novice seeker".to_string(), "domain guide".to_string()]
                .into_iter()
                .collect(),
            tension_sequence: tensions.iter().map(|s| s.to_string()).collect(),
            event_slots: BTreeSet::new(),
            goal: Goal {
                goal_type: "resolve visual aid ambiguity".into(),
                slots: BTreeSet::new(),
            },
            valence: Valence {
                polarity: Polarity::Negative,
                intensity: Some(0.3),
            },
            risk_level: RiskLevel::Low,
            partition: PartitionKey::new("en", "EU", "hobbyists"),
            source: source.to_string(),
            submitted_at: Timestamp::from_day(0),
            status: TemplateStatus::ReviewedOk,
        }
    }

    fn store_with(templates: &[InteractionTemplate], dreams_per: usize) -> (DreamStore, BTreeMap<String, InteractionTemplate>) {
        let cfg = data::default_dream_config();
        let now = Timestamp::from_day(1);
        let mut store = DreamStore::default();
        let mut map = BTreeMap::new();
        for t in templates {
            map.insert(t.template_id.clone(), t.clone());
            for seed in 0..dreams_per {
                let n = generate_dream(t, &cfg, seed as u64, now).unwrap();
                store.store_dream(n, now, &cfg).unwrap();
            }
        }
        (store, map)
    }

    #[test]
    fn recurring_pattern_yields_one_motif() {
        let t = template_with_tensions("t1", "src-a", &["boundary enforcement", "stalled resolution"]);
        let (store, map) = store_with(&[t], 5);
        let motifs = extract_motifs(&store, QueryMode::DreamMode, &map).unwrap();
        assert_eq!(motifs.len(), 1);
        assert_eq!(motifs[0].motif.count, 5);
        assert_eq!(
            motifs[0].motif.motif_label,
            "boundary enforcement → stalled resolution"
        );
        assert_eq!(motifs[0].dream_ids.len(), 5);
    }

    #[test]
    fn empty_store_and_disjoint_signatures() {
        let empty = DreamStore::default();
        let motifs = extract_motifs(&empty, QueryMode::DreamMode, &BTreeMap::new()).unwrap();
        assert!(motifs.is_empty());

        assert_eq!(
            extract_motifs(&empty, QueryMode::Online, &BTreeMap::new()).unwrap_err(),
            DistillError::NotDreamMode
        );

        let t1 = template_with_tensions("t1", "a", &["clarification attempt", "boundary enforcement"]);
        let t2 = template_with_tensions("t2", "b", &["time pressure surge", "stalled resolution"]);
        let (store, map) = store_with(&[t1, t2], 1);
        let motifs = extract_motifs(&store, QueryMode::DreamMode, &map).unwrap();
        assert_eq!(motifs.len(), 2);
        assert!(motifs.iter().all(|m| m.motif.count == 1));
    }

    #[test]
    fn shared_subsequence_surfaces_across_templates() {
        let t1 = template_with_tensions("t1", "a", &["clarification attempt", "boundary enforcement", "stalled resolution"]);
        let t2 = template_with_tensions("t2", "b", &["time pressure surge", "boundary enforcement", "stalled resolution"]);
        let (store, map) = store_with(&[t1, t2], 2);
        let motifs = extract_motifs(&store, QueryMode::DreamMode, &map).unwrap();
        let shared = motifs
            .iter()
            .find(|m| m.motif.motif_label == "boundary enforcement → stalled resolution")
            .expect("shared bigram motif");
        assert_eq!(shared.motif.count, 4);
        // full-length motifs stay as well, at their own support
        assert!(motifs
            .iter()
            .any(|m| m.motif.structural_signature.tension_subsequence.len() == 3));
    }

    #[test]
    fn candidate_gates() {
        let gov = GovernanceConfig::default();
        let cfg = DistillationConfig::default();

        let t = template_with_tensions("t1", "only-source", &["boundary enforcement", "stalled resolution"]);
        let (store, map) = store_with(&[t], 2);
        let motifs = extract_motifs(&store, QueryMode::DreamMode, &map).unwrap();
        let (eligible, skipped) = candidate_motifs(motifs, &cfg, &gov);
        assert!(eligible.is_empty());
        assert!(skipped[0].1.contains("below threshold"));

        // count 3 from three equal sources: eligible
        let ts: Vec<_> = (0..3)
            .map(|i| {
                template_with_tensions(
                    &format!("t{i}"),
                    &format!("src-{i}"),
                    &["boundary enforcement", "stalled resolution"],
                )
            })
            .collect();
        let (store, map) = store_with(&ts, 1);
        let motifs = extract_motifs(&store, QueryMode::DreamMode, &map).unwrap();
        let (eligible, _) = candidate_motifs(motifs, &cfg, &gov);
        assert_eq!(eligible.len(), 1);

        // count 10 from a single source: quarantined by provenance
        let t = template_with_tensions("t1", "only-source", &["boundary enforcement", "stalled resolution"]);
        let (store, map) = store_with(&[t], 10);
        let motifs = extract_motifs(&store, QueryMode::DreamMode, &map).unwrap();
        let (eligible, skipped) = candidate_motifs(motifs, &cfg, &gov);
        assert!(eligible.is_empty());
        assert!(skipped[0].1.contains("Quarantine"));
    }

    #[test]
    fn mapping_examples() {
        let table = data::default_motif_mapping();
        let cfg = DistillationConfig::default();
        let now = Timestamp::from_day(9);

        let ts: Vec<_> = (0..3)
            .map(|i| {
                template_with_tensions(
                    &format!("t{i}"),
                    &format!("src-{i}"),
                    &["boundary enforcement", "stalled resolution"],
                )
            })
            .collect();
        let (store, map) = store_with(&ts, 1);
        let motifs = extract_motifs(&store, QueryMode::DreamMode, &map).unwrap();
        let prior = map_motif_to_prior(&motifs[0], table, &cfg, now).unwrap();
        assert_eq!(prior.dimension, "alternative_representation_channels");
        assert!(prior.delta > 0.0);
        assert_eq!(prior.provenance_trace.motif_frequency, 3);
        assert_eq!(prior.provenance_trace.source_template_ids.len(), 3);

        let harmonised = ExtractedMotif {
            motif: Motif {
                motif_label: "x".into(),
                structural_signature: StructuralSignature {
                    role_pair: ("a".into(), "b".into()),
                    tension_subsequence: vec![
                        "conflicting constraint surfacing".into(),
                        "harmonised integration".into(),
                    ],
                    valence_polarity: Polarity::Positive,
                },
                count: 4,
                provenance: ProvenanceDistribution::default(),
                first_seen: now,
                last_seen: now,
            },
            template_ids: BTreeSet::new(),
            dream_ids: BTreeSet::new(),
        };
        let prior = map_motif_to_prior(&harmonised, table, &cfg, now).unwrap();
        assert_eq!(prior.dimension, "metaphorical_reframing");

        let unmapped = ExtractedMotif {
            motif: Motif {
                motif_label: "y".into(),
                structural_signature: StructuralSignature {
                    role_pair: ("a".into(), "b".into()),
                    tension_subsequence: vec!["nothing known".into(), "at all".into()],
                    valence_polarity: Polarity::Neutral,
                },
                count: 4,
                provenance: ProvenanceDistribution::default(),
                first_seen: now,
                last_seen: now,
            },
            template_ids: BTreeSet::new(),
            dream_ids: BTreeSet::new(),
        };
        assert!(map_motif_to_prior(&unmapped, table, &cfg, now).is_none());
    }

    fn test_prior(id: &str, dimension: &str, delta: f64, damping: f64) -> BehaviouralPrior {
        BehaviouralPrior {
            prior_id: id.to_string(),
            dimension: dimension.to_string(),
            delta,
            damping,
            applied_change: 0.0,
            provenance_trace: ProvenanceTrace {
                source_template_ids: BTreeSet::new(),
                motif_frequency: 3,
                distilled_at: Timestamp::from_day(0),
            },
            active: true,
            revoked_at: None,
        }
    }

    #[test]
    fn apply_update_arithmetic_and_cap() {
        let cfg = DistillationConfig::default();
        let now = Timestamp::from_day(1);
        let mut head = PolicyHead::new([("dim".to_string(), 0.0)]);
        let mut cycle = CycleState::default();

        let mut p = test_prior("p1", "dim", 0.5, 0.3);
        apply_update(&mut head, &mut p, &cfg, &mut cycle, now).unwrap();
        assert!((p.applied_change - 0.15).abs() < 1e-12);

        let mut head2 = PolicyHead::new([("dim".to_string(), 0.0)]);
        let mut cycle2 = CycleState::default();
        let mut p2 = test_prior("p2", "dim", 1.0, 0.3);
        apply_update(&mut head2, &mut p2, &cfg, &mut cycle2, now).unwrap();
        assert!((p2.applied_change - 0.2).abs() < 1e-12);

        // zero delta still logs
        let mut p3 = test_prior("p3", "dim", 0.0, 0.2);
        apply_update(&mut head2, &mut p3, &cfg, &mut cycle2, now).unwrap();
        assert_eq!(p3.applied_change, 0.0);
        assert_eq!(head2.audit_log.len(), 2);

        // re-applying errors
        let mut dup = test_prior("p2", "dim", 1.0, 0.3);
        assert_eq!(
            apply_update(&mut head2, &mut dup, &cfg, &mut cycle2, now).unwrap_err(),
            DistillError::AlreadyApplied("p2".into())
        );

        // per-cycle cumulative cap
        let mut head3 = PolicyHead::new([("dim".to_string(), 0.0)]);
        let mut cycle3 = CycleState::default();
        let mut a = test_prior("a", "dim", 1.0, 0.3);
        let mut b = test_prior("b", "dim", 1.0, 0.3);
        apply_update(&mut head3, &mut a, &cfg, &mut cycle3, now).unwrap();
        apply_update(&mut head3, &mut b, &cfg, &mut cycle3, now).unwrap();
        assert!((head3.value("dim") - 0.2).abs() < 1e-12);
        assert_eq!(b.applied_change, 0.0);
    }

    #[test]
    fn revoke_restores_and_errors() {
        let cfg = DistillationConfig::default();
        let now = Timestamp::from_day(1);
        let mut head = PolicyHead::new([("dim".to_string(), 0.1)]);
        let mut cycle = CycleState::default();
        let mut p = test_prior("p1", "dim", 0.5, 0.3);
        apply_update(&mut head, &mut p, &cfg, &mut cycle, now).unwrap();
        assert!((head.value("dim") - 0.25).abs() < 1e-12);
        revoke_prior(&mut head, &mut p, now.add_days(1)).unwrap();
        assert!((head.value("dim") - 0.1).abs() < 1e-12);
        assert!(!p.active);
        assert_eq!(
            revoke_prior(&mut head, &mut p, now.add_days(2)).unwrap_err(),
            DistillError::AlreadyRevoked("p1".into())
        );
        assert_eq!(head.replay(), head.current);

        let mut policy = PolicyState::default();
        assert_eq!(
            policy.revoke("ghost", now).unwrap_err(),
            DistillError::UnknownPrior("ghost".into())
        );
    }

    #[test]
    fn full_cycle_distills_and_freezes() {
        let ts: Vec<_> = (0..3)
            .map(|i| {
                template_with_tensions(
                    &format!("t{i}"),
                    &format!("src-{i}"),
                    &["boundary enforcement", "stalled resolution"],
                )
            })
            .collect();
        let (mut store, map) = store_with(&ts, 1);
        let table = data::default_motif_mapping();
        let cfg = DistillationConfig::default();
        let gov = GovernanceConfig::default();
        let mut policy = PolicyState::default();
        let report = distill_cycle(
            &mut store,
            &map,
            table,
            &cfg,
            &gov,
            &mut policy,
            Timestamp::from_day(2),
        )
        .unwrap();
        assert_eq!(report.applied_priors.len(), 1);
        assert!(policy.head.value("alternative_representation_channels") > 0.0);
        // contributing dreams are frozen out of the next scan
        assert_eq!(store.scannable().count(), 0);
        let again = distill_cycle(
            &mut store,
            &map,
            table,
            &cfg,
            &gov,
            &mut policy,
            Timestamp::from_day(3),
        )
        .unwrap();
        assert!(again.applied_priors.is_empty());
    }
}
