//! The shared template pool: cooling queue, batch review, partition
//! segmentation, rate-limited sampling and provenance statistics.
//!
//! The pool is event-sourced: every mutation appends an event, and replaying
//! the event log from empty reproduces the state exactly. The CLI persists
//! the log plus periodic snapshots in this module's canonical format.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abstraction::{AuditResult, Verdict};
use crate::core_model::{
    validate_template, InteractionTemplate, PartitionKey, ProvenanceDistribution, TemplateStatus,
    Timestamp,
};
use crate::governance::{gate_provenance, GateDecision, GovernanceEngine};

#[derive(Debug, Error, PartialEq)]
pub enum PoolError {
    #[error("audit required: template was not submitted with a passing audit")]
    AuditRequired,
    #[error("invalid template: {0}")]
    InvalidTemplate(String),
    #[error("duplicate template id {0}")]
    DuplicateTemplate(String),
    #[error("rate limited until {next_allowed_at}")]
    RateLimited { next_allowed_at: Timestamp },
    #[error("partition denied: cross-partition sampling is disabled")]
    PartitionDenied,
    #[error("day {0} is not on the batch schedule")]
    NotBatchDay(u64),
    #[error("sample count must be at least 1")]
    ZeroSample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolConfig {
    /// Mandatory cooling, in whole days; valid range 3–14.
    pub cooling_days: u64,
    /// Batch reviews run on days divisible by this period.
    pub batch_period_days: u64,
    pub daily_sample_limit: u32,
    /// Back-off base in day fractions (default one hour).
    pub backoff_base: f64,
    pub cross_partition_sampling: bool,
    /// Sampling weight applied to down-weighted batches.
    pub down_weight_factor: f64,
    /// Source-domination gates only apply to batches at least this large.
    pub domination_min_batch: usize,
}

impl Default for PoolConfig {
    fn default() -> Self {
        PoolConfig {
            cooling_days: 7,
            batch_period_days: 7,
            daily_sample_limit: 5,
            backoff_base: 1.0 / 24.0,
            cross_partition_sampling: false,
            down_weight_factor: 0.5,
            domination_min_batch: 5,
        }
    }
}

impl PoolConfig {
    pub fn validate(&self) -> Result<(), PoolError> {
        if !(3..=14).contains(&self.cooling_days) {
            return Err(PoolError::InvalidTemplate(format!(
                "cooling_days {} outside [3,14]",
                self.cooling_days
            )));
        }
        if self.daily_sample_limit == 0 {
            return Err(PoolError::InvalidTemplate("daily_sample_limit must be ≥ 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleLedger {
    pub agent_id: String,
    pub day: u64,
    pub samples_today: u32,
    pub over_limit_attempts: u32,
    pub next_allowed_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub template: InteractionTemplate,
    pub cooling_until: Timestamp,
    /// Set at the batch review that made the template sampleable.
    pub available_at: Option<Timestamp>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewDecision {
    pub template_id: String,
    pub status: TemplateStatus,
    pub weight: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewReport {
    pub at: Timestamp,
    pub decisions: Vec<ReviewDecision>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum PoolEvent {
    Submitted {
        template: InteractionTemplate,
        cooling_until: Timestamp,
        at: Timestamp,
    },
    BatchReviewed {
        at: Timestamp,
        decisions: Vec<ReviewDecision>,
    },
    Sampled {
        agent_id: String,
        partition: PartitionKey,
        template_ids: Vec<String>,
        at: Timestamp,
    },
    RateLimited {
        agent_id: String,
        at: Timestamp,
        next_allowed_at: Timestamp,
        attempts: u32,
    },
    StatusChanged {
        template_id: String,
        status: TemplateStatus,
        reason: String,
        at: Timestamp,
    },
}

/// Request side of `sample_templates`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRequest {
    pub agent_id: String,
    pub partition: PartitionKey,
    pub k: usize,
    #[serde(default)]
    pub cross_partition: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MotifLabelStat {
    pub count: u64,
    pub distinct_sources: u64,
    pub distinct_agents: u64,
    pub distinct_deployments: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PoolStats {
    pub total: u64,
    pub by_status: BTreeMap<String, u64>,
    pub distinct_sources: u64,
    /// Coarse provenance per motif label (tension-state labels of reviewed
    /// templates).
    pub per_motif_label: BTreeMap<String, MotifLabelStat>,
}

/// The central pool. A single logical service: all mutations funnel through
/// `apply`, and the event log is the source of truth.
#[derive(Debug, Clone, Default)]
pub struct PoolState {
    pub config: PoolConfig,
    pub entries: BTreeMap<String, PoolEntry>,
    pub ledgers: BTreeMap<String, SampleLedger>,
    pub events: Vec<PoolEvent>,
}

impl PoolState {
    pub fn new(config: PoolConfig) -> Self {
        PoolState {
            config,
            ..Default::default()
        }
    }

    /// Rebuilds a pool from an event log.
    pub fn replay(config: PoolConfig, events: &[PoolEvent]) -> Self {
        let mut state = PoolState::new(config);
        for event in events {
            state.apply(event.clone());
        }
        state
    }

    fn apply(&mut self, event: PoolEvent) {
        match &event {
            PoolEvent::Submitted {
                template,
                cooling_until,
                ..
            } => {
                let mut t = template.clone();
                t.status = TemplateStatus::Cooling;
                self.entries.insert(
                    t.template_id.clone(),
                    PoolEntry {
                        template: t,
                        cooling_until: *cooling_until,
                        available_at: None,
                        weight: 1.0,
                    },
                );
            }
            PoolEvent::BatchReviewed { at, decisions } => {
                for d in decisions {
                    if let Some(entry) = self.entries.get_mut(&d.template_id) {
                        entry.template.status = d.status;
                        entry.weight = d.weight;
                        if d.status == TemplateStatus::ReviewedOk {
                            entry.available_at = Some(*at);
                        }
                    }
                }
            }
            PoolEvent::Sampled {
                agent_id,
                template_ids,
                at,
                ..
            } => {
                let limit = self.config.daily_sample_limit;
                let ledger = self.ledger_for(agent_id, *at);
                ledger.samples_today += template_ids.len() as u32;
                ledger.over_limit_attempts = 0;
                debug_assert!(ledger.samples_today <= limit);
            }
            PoolEvent::RateLimited {
                agent_id,
                at,
                next_allowed_at,
                attempts,
            } => {
                let ledger = self.ledger_for(agent_id, *at);
                ledger.over_limit_attempts = *attempts;
                ledger.next_allowed_at = *next_allowed_at;
            }
            PoolEvent::StatusChanged {
                template_id,
                status,
                ..
            } => {
                if let Some(entry) = self.entries.get_mut(template_id) {
                    entry.template.status = *status;
                }
            }
        }
        self.events.push(event);
    }

    fn ledger_for(&mut self, agent_id: &str, now: Timestamp) -> &mut SampleLedger {
        let ledger = self
            .ledgers
            .entry(agent_id.to_string())
            .or_insert_with(|| SampleLedger {
                agent_id: agent_id.to_string(),
                day: now.day,
                samples_today: 0,
                over_limit_attempts: 0,
                next_allowed_at: Timestamp::from_day(0),
            });
        if ledger.day != now.day {
            // day rollover: limits and back-off counters are day-scoped
            ledger.day = now.day;
            ledger.samples_today = 0;
            ledger.over_limit_attempts = 0;
        }
        ledger
    }

    /// Rollover-adjusted ledger snapshot. Error paths read this so the state
    /// only ever changes through applied events.
    fn ledger_view(&self, agent_id: &str, now: Timestamp) -> SampleLedger {
        let mut ledger = self
            .ledgers
            .get(agent_id)
            .cloned()
            .unwrap_or_else(|| SampleLedger {
                agent_id: agent_id.to_string(),
                day: now.day,
                samples_today: 0,
                over_limit_attempts: 0,
                next_allowed_at: Timestamp::from_day(0),
            });
        if ledger.day != now.day {
            ledger.day = now.day;
            ledger.samples_today = 0;
            ledger.over_limit_attempts = 0;
        }
        ledger
    }

    /// Submits an audited template into the cooling queue. Availability
    /// requires both the cooling deadline and a subsequent batch review.
    pub fn submit_template(
        &mut self,
        template: InteractionTemplate,
        audit: &AuditResult,
        now: Timestamp,
    ) -> Result<Timestamp, PoolError> {
        if audit.verdict != Verdict::Pass {
            return Err(PoolError::AuditRequired);
        }
        let report = validate_template(&template);
        if !report.is_ok() {
            return Err(PoolError::InvalidTemplate(report.violations.join("; ")));
        }
        if self.entries.contains_key(&template.template_id) {
            return Err(PoolError::DuplicateTemplate(template.template_id));
        }
        let cooling_until = now.add_days(self.config.cooling_days);
        self.apply(PoolEvent::Submitted {
            template,
            cooling_until,
            at: now,
        });
        Ok(cooling_until)
    }

    fn is_batch_day(&self, now: Timestamp) -> bool {
        self.config.batch_period_days > 0 && now.day % self.config.batch_period_days == 0
    }

    /// Server-side batch review of every cooled template, batched per
    /// partition. Batches dominated by few sources are quarantined or
    /// down-weighted wholesale; surviving templates are assessed
    /// individually for manipulative intent.
    pub fn run_batch_review(
        &mut self,
        now: Timestamp,
        gov: &GovernanceEngine,
    ) -> Result<ReviewReport, PoolError> {
        if !self.is_batch_day(now) {
            return Err(PoolError::NotBatchDay(now.day));
        }
        let mut batches: BTreeMap<PartitionKey, Vec<String>> = BTreeMap::new();
        for (id, entry) in &self.entries {
            if entry.template.status == TemplateStatus::Cooling && entry.cooling_until <= now {
                batches
                    .entry(entry.template.partition.clone())
                    .or_default()
                    .push(id.clone());
            }
        }
        let mut decisions = Vec::new();
        for (_, ids) in batches {
            let mut source_counts: BTreeMap<String, u64> = BTreeMap::new();
            for id in &ids {
                *source_counts
                    .entry(self.entries[id].template.source.clone())
                    .or_insert(0) += 1;
            }
            let provenance = ProvenanceDistribution::from_counts(&source_counts);
            let batch_gate = if ids.len() >= self.config.domination_min_batch {
                gate_provenance(&provenance, &gov.config)
            } else {
                GateDecision::Promote
            };
            match batch_gate {
                GateDecision::Quarantine => {
                    for id in ids {
                        decisions.push(ReviewDecision {
                            template_id: id,
                            status: TemplateStatus::Quarantined,
                            weight: 0.0,
                            reason: "batch dominated by concentrated sources".into(),
                        });
                    }
                }
                gate => {
                    let weight = if gate == GateDecision::DownWeight {
                        self.config.down_weight_factor
                    } else {
                        1.0
                    };
                    for id in ids {
                        let score = gov.assess_template(&self.entries[&id].template);
                        let (status, reason) = if score.routed_nightmare {
                            (
                                TemplateStatus::Nightmare,
                                format!("manipulative intent {:.2}", score.combined),
                            )
                        } else {
                            (TemplateStatus::ReviewedOk, "clean".into())
                        };
                        decisions.push(ReviewDecision {
                            template_id: id,
                            status,
                            weight,
                            reason,
                        });
                    }
                }
            }
        }
        let report = ReviewReport {
            at: now,
            decisions: decisions.clone(),
        };
        self.apply(PoolEvent::BatchReviewed { at: now, decisions });
        Ok(report)
    }

    /// Uniform (weight-scaled) draw without replacement from the agent's
    /// partition, rate-limited per day with exponential back-off.
    pub fn sample_templates(
        &mut self,
        req: &SampleRequest,
        now: Timestamp,
        seed: u64,
    ) -> Result<Vec<InteractionTemplate>, PoolError> {
        if req.k == 0 {
            return Err(PoolError::ZeroSample);
        }
        if req.cross_partition && !self.config.cross_partition_sampling {
            return Err(PoolError::PartitionDenied);
        }
        let limit = self.config.daily_sample_limit;
        let backoff_base = self.config.backoff_base;
        let ledger = self.ledger_view(&req.agent_id, now);
        if now < ledger.next_allowed_at {
            return Err(PoolError::RateLimited {
                next_allowed_at: ledger.next_allowed_at,
            });
        }
        let allowance = limit.saturating_sub(ledger.samples_today) as usize;
        if allowance == 0 {
            let attempts = ledger.over_limit_attempts + 1;
            let delay = backoff_base * 2f64.powi(attempts as i32 - 1);
            let next_allowed_at = now.add_frac_days(delay);
            self.apply(PoolEvent::RateLimited {
                agent_id: req.agent_id.clone(),
                at: now,
                next_allowed_at,
                attempts,
            });
            return Err(PoolError::RateLimited { next_allowed_at });
        }

        let mut candidates: Vec<(String, f64)> = self
            .entries
            .values()
            .filter(|e| e.template.status == TemplateStatus::ReviewedOk)
            .filter(|e| req.cross_partition || e.template.partition == req.partition)
            .map(|e| (e.template.template_id.clone(), e.weight))
            .collect();

        let n = req.k.min(allowance).min(candidates.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut drawn = Vec::with_capacity(n);
        for _ in 0..n {
            let total: f64 = candidates.iter().map(|(_, w)| w).sum();
            if total <= 0.0 {
                break;
            }
            let mut x = rng.gen::<f64>() * total;
            let mut idx = candidates.len() - 1;
            for (i, (_, w)) in candidates.iter().enumerate() {
                x -= w;
                if x <= 0.0 {
                    idx = i;
                    break;
                }
            }
            drawn.push(candidates.remove(idx).0);
        }
        self.apply(PoolEvent::Sampled {
            agent_id: req.agent_id.clone(),
            partition: req.partition.clone(),
            template_ids: drawn.clone(),
            at: now,
        });
        Ok(drawn
            .iter()
            .map(|id| self.entries[id].template.clone())
            .collect())
    }

    /// Resolves a quarantined template back to reviewed (explicit operator
    /// action) or rejects it outright.
    pub fn set_status(
        &mut self,
        template_id: &str,
        status: TemplateStatus,
        reason: &str,
        now: Timestamp,
    ) -> Result<(), PoolError> {
        if !self.entries.contains_key(template_id) {
            return Err(PoolError::InvalidTemplate(format!(
                "unknown template {template_id}"
            )));
        }
        self.apply(PoolEvent::StatusChanged {
            template_id: template_id.to_string(),
            status,
            reason: reason.to_string(),
            at: now,
        });
        Ok(())
    }

    /// Coarse provenance statistics, optionally restricted to a partition.
    pub fn pool_stats(&self, partition: Option<&PartitionKey>) -> PoolStats {
        let mut stats = PoolStats::default();
        let mut sources = BTreeSet::new();
        let mut per_label: BTreeMap<String, (BTreeSet<String>, BTreeSet<String>, BTreeSet<String>, u64)> =
            BTreeMap::new();
        for entry in self.entries.values() {
            if let Some(p) = partition {
                if &entry.template.partition != p {
                    continue;
                }
            }
            stats.total += 1;
            let status = format!("{:?}", entry.template.status);
            *stats.by_status.entry(to_snake(&status)).or_insert(0) += 1;
            sources.insert(entry.template.source.clone());
            if entry.template.status == TemplateStatus::ReviewedOk {
                for label in &entry.template.tension_sequence {
                    let slot = per_label.entry(label.clone()).or_default();
                    slot.0.insert(entry.template.source.clone());
                    slot.1.insert(entry.template.source.clone());
                    slot.2.insert(entry.template.partition.community.clone());
                    slot.3 += 1;
                }
            }
        }
        stats.distinct_sources = sources.len() as u64;
        stats.per_motif_label = per_label
            .into_iter()
            .map(|(label, (users, agents, deployments, count))| {
                (
                    label,
                    MotifLabelStat {
                        count,
                        distinct_sources: users.len() as u64,
                        distinct_agents: agents.len() as u64,
                        distinct_deployments: deployments.len() as u64,
                    },
                )
            })
            .collect();
        stats
    }

    /// Sampleable entries in a partition (status reviewed_ok).
    pub fn available_in(&self, partition: &PartitionKey) -> usize {
        self.entries
            .values()
            .filter(|e| {
                e.template.status == TemplateStatus::ReviewedOk
                    && &e.template.partition == partition
            })
            .count()
    }
}

fn to_snake(debug: &str) -> String {
    let mut out = String::new();
    for (i, c) in debug.chars().enumerate() {
        if c.is_uppercase() {
            if i > 0 {
                out.push('_');
            }
            out.extend(c.to_lowercase());
        } else {
            out.push(c);
        }
    }
    out
}
