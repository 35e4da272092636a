//! Controlled offline hallucination: a seeded two-pass slot-filling generator
//! with a pluggable external backend, plus the ephemeral dream store with
//! tagging, stochastic decay and mode-gated retrieval.
//!
//! Structural markers (`[role: …]`, `[tension: …]`, `[goal: …]`) are embedded
//! in the narrative text so slot preservation is mechanically checkable; the
//! prose rendering strips them for display.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::core_model::{DreamNarrative, InteractionTemplate, Polarity, TemplateStatus, Timestamp};

#[derive(Debug, Error, PartialEq)]
pub enum DreamError {
    #[error("nightmare templates never produce user-facing dreams")]
    NightmareExcluded,
    #[error("missing dream tag")]
    MissingDreamTag,
    #[error("invalid dream config: {0}")]
    InvalidConfig(String),
    #[error("backend response violates slot preservation: {0}")]
    SlotViolation(String),
}

/// A weighted vocabulary for lexicon draws.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WeightedLexicon {
    entries: Vec<(String, f64)>,
    total: f64,
}

impl WeightedLexicon {
    pub fn new(entries: Vec<(String, f64)>) -> Self {
        let total = entries.iter().map(|(_, w)| w).sum();
        WeightedLexicon { entries, total }
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(w, _)| w.as_str())
    }

    pub fn contains(&self, word: &str) -> bool {
        self.entries.iter().any(|(w, _)| w == word)
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> &str {
        debug_assert!(!self.entries.is_empty());
        let mut x = rng.gen::<f64>() * self.total;
        for (word, weight) in &self.entries {
            x -= weight;
            if x <= 0.0 {
                return word;
            }
        }
        &self.entries[self.entries.len() - 1].0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DreamConfig {
    /// Pass-1 temperature, 1.2–1.8.
    pub draft_temperature: f64,
    /// Pass-2 temperature, 0.9–1.1.
    pub refine_temperature: f64,
    /// Per-token surreal substitution probability (capped at 1).
    pub noise_sigma: f64,
    /// Hard purge window, 7–14 days.
    pub lifespan_days: u64,
    /// Exponential decay half-life, 5–7 days.
    pub half_life_days: f64,
    pub surreal_lexicon: WeightedLexicon,
    pub mundane_lexicon: WeightedLexicon,
    pub surreal_frames: Vec<String>,
    pub mundane_frames: Vec<String>,
}

impl DreamConfig {
    pub fn validate(&self) -> Result<(), DreamError> {
        if !(1.2..=1.8).contains(&self.draft_temperature) {
            return Err(DreamError::InvalidConfig("draft_temperature outside [1.2, 1.8]".into()));
        }
        if !(0.9..=1.1).contains(&self.refine_temperature) {
            return Err(DreamError::InvalidConfig("refine_temperature outside [0.9, 1.1]".into()));
        }
        if self.noise_sigma < 0.0 {
            return Err(DreamError::InvalidConfig("noise_sigma negative".into()));
        }
        if !(7..=14).contains(&self.lifespan_days) {
            return Err(DreamError::InvalidConfig("lifespan_days outside [7, 14]".into()));
        }
        if !(5.0..=7.0).contains(&self.half_life_days) {
            return Err(DreamError::InvalidConfig("half_life_days outside [5, 7]".into()));
        }
        if (self.lifespan_days as f64) < self.half_life_days {
            return Err(DreamError::InvalidConfig("lifespan below half-life".into()));
        }
        Ok(())
    }

    /// Per-tick survival probability implied by the half-life.
    pub fn survival_per_day(&self) -> f64 {
        2f64.powf(-1.0 / self.half_life_days)
    }
}

/// Linear map from temperature in [0.9, 1.8] to surreal-pick probability in
/// [0.1, 0.9].
pub fn temperature_to_surreal_prob(temperature: f64) -> f64 {
    (0.1 + (temperature - 0.9) / 0.9 * 0.8).clamp(0.1, 0.9)
}

pub(crate) fn stable_hash(s: &str) -> u64 {
    // FNV-1a, stable across platforms and runs
    let mut h: u64 = 0xcbf29ce484222325;
    for b in s.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Distortion {
    EntitySwap,
    ScaleInversion,
    ModalityShift,
}

/// Draft plan produced by pass 1: the high-divergence skeleton (scene,
/// distortions, and which word slots go surreal) that pass 2 re-instantiates
/// at moderate temperature.
struct DraftPlan {
    scene: String,
    distortions: Vec<Distortion>,
    /// Per word slot: whether the draft committed it to the surreal register.
    surreal_slots: Vec<bool>,
}

fn tension_sentence(label: &str, adj: &str, noun: &str) -> String {
    match label {
        "clarification attempt" => format!(
            "A question is asked once more in {adj} ink [tension: {label}]."
        ),
        "boundary enforcement" => format!(
            "The guide refuses the concrete form, citing a rule of the {adj} {noun} [tension: {label}]."
        ),
        "stalled resolution" => format!(
            "Every answer dissolves before it lands, {adj} and unfinished [tension: {label}]."
        ),
        _ => format!("The scene bends toward {label}, {adj} at the edges [tension: {label}]."),
    }
}

/// Two-pass controlled hallucination over a reviewed template. Deterministic
/// given (template, config, seed); nightmare templates are refused.
pub fn generate_dream(
    template: &InteractionTemplate,
    cfg: &DreamConfig,
    seed: u64,
    now: Timestamp,
) -> Result<DreamNarrative, DreamError> {
    if template.status == TemplateStatus::Nightmare {
        return Err(DreamError::NightmareExcluded);
    }
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(stable_hash(&template.template_id) ^ seed);

    // pass 1: high-divergence draft — scene frame, distortion choices, and
    // the register (surreal vs mundane) of every word slot
    let p_draft = temperature_to_surreal_prob(cfg.draft_temperature);
    let scene = if rng.gen::<f64>() < p_draft {
        cfg.surreal_frames[rng.gen_range(0..cfg.surreal_frames.len())].clone()
    } else {
        cfg.mundane_frames[rng.gen_range(0..cfg.mundane_frames.len())].clone()
    };
    let mut distortions = Vec::new();
    for d in [
        Distortion::EntitySwap,
        Distortion::ScaleInversion,
        Distortion::ModalityShift,
    ] {
        if rng.gen::<f64>() < p_draft {
            distortions.push(d);
        }
    }
    let slot_count =
        template.roles.len() + 2 * template.tension_sequence.len() + template.event_slots.len() + 1;
    let surreal_slots: Vec<bool> = (0..slot_count).map(|_| rng.gen::<f64>() < p_draft).collect();
    let plan = DraftPlan {
        scene,
        distortions,
        surreal_slots,
    };

    // pass 2: moderate-temperature re-instantiation — keeps the induced
    // strangeness committed by the draft and may add a calm surreal touch of
    // its own when instantiating each slot
    let p_refine = temperature_to_surreal_prob(cfg.refine_temperature);
    let mut slots = plan.surreal_slots.iter();
    let mut pick = |rng: &mut ChaCha8Rng| -> String {
        let drafted_surreal = slots.next().copied().unwrap_or(false);
        let surreal = drafted_surreal || rng.gen::<f64>() < p_refine * 0.25;
        if surreal {
            cfg.surreal_lexicon.draw(rng).to_string()
        } else {
            cfg.mundane_lexicon.draw(rng).to_string()
        }
    };
    let mut sentences = Vec::new();
    sentences.push(format!("In {}, the dream begins.", plan.scene));
    for role in &template.roles {
        let adj = pick(&mut rng);
        let mut sentence = format!("The [role: {role}] appears as a {adj} figure");
        for d in &plan.distortions {
            match d {
                Distortion::EntitySwap => sentence.push_str(", wearing a borrowed face"),
                Distortion::ScaleInversion => {
                    sentence.push_str(", tall as a thimble and small as a sky")
                }
                Distortion::ModalityShift => sentence.push_str(", speaking in colours"),
            }
        }
        sentence.push('.');
        sentences.push(sentence);
    }
    for label in &template.tension_sequence {
        let adj = pick(&mut rng);
        let noun = pick(&mut rng);
        sentences.push(tension_sentence(label, &adj, &noun));
    }
    for slot in &template.event_slots {
        let adj = pick(&mut rng);
        sentences.push(format!("Somewhere, {slot} flickers, {adj} and brief."));
    }
    let goal_adj = pick(&mut rng);
    sentences.push(format!(
        "Beneath it all, the {goal_adj} wish to {} persists [goal: {}].",
        template.goal.goal_type, template.goal.goal_type
    ));
    sentences.push(match template.valence.polarity {
        Polarity::Negative => "The dream ends on a held breath.".to_string(),
        Polarity::Positive => "The dream ends warm and weightless.".to_string(),
        Polarity::Neutral => "The dream simply ends.".to_string(),
    });

    let mut text = sentences.join(" ");

    // noise injection: per-token surreal substitution outside markers
    let p_noise = cfg.noise_sigma.min(1.0);
    if p_noise > 0.0 {
        let mut out = Vec::new();
        let mut in_marker = false;
        for token in text.split(' ') {
            if token.starts_with('[') {
                in_marker = true;
            }
            let keep = in_marker || rng.gen::<f64>() >= p_noise;
            if token.ends_with(']') || token.ends_with("].") {
                in_marker = false;
            }
            if keep {
                out.push(token.to_string());
            } else {
                let replacement = cfg.surreal_lexicon.draw(&mut rng).to_string();
                out.push(replacement);
            }
        }
        text = out.join(" ");
    }

    let motif_labels = template
        .tension_sequence
        .windows(2)
        .map(|w| format!("{} → {}", w[0], w[1]))
        .collect();

    Ok(DreamNarrative {
        dream_id: format!("dream-{}-s{seed}", template.template_id),
        template_id: template.template_id.clone(),
        text,
        dream_tag: true,
        temperature_used: cfg.draft_temperature,
        noise_sigma: cfg.noise_sigma,
        seed,
        created_at: now,
        hard_purge_at: now.add_days(cfg.lifespan_days),
        motif_labels,
    })
}

/// Strips structural markers for display.
pub fn prose_rendering(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut depth = 0usize;
    for c in text.chars() {
        match c {
            '[' => depth += 1,
            ']' => depth = depth.saturating_sub(1),
            _ if depth == 0 => out.push(c),
            _ => {}
        }
    }
    let collapsed = out.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed.replace(" .", ".").replace(" ,", ",")
}

/// Extracts marker labels in textual order: (kind, label).
pub fn markers(text: &str) -> Vec<(String, String)> {
    let mut found = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find('[') {
        let Some(end) = rest[start..].find(']') else { break };
        let inner = &rest[start + 1..start + end];
        if let Some((kind, label)) = inner.split_once(':') {
            found.push((kind.trim().to_string(), label.trim().to_string()));
        }
        rest = &rest[start + end + 1..];
    }
    found
}

/// Checks the slot-preservation contract: every role mentioned, the tension
/// sequence realized in order, and the goal referenced.
pub fn validate_slots(text: &str, template: &InteractionTemplate) -> Result<(), DreamError> {
    let marks = markers(text);
    for role in &template.roles {
        if !marks.iter().any(|(k, l)| k == "role" && l == role) {
            return Err(DreamError::SlotViolation(format!("missing role {role}")));
        }
    }
    let tension_marks: Vec<&String> = marks
        .iter()
        .filter(|(k, _)| k == "tension")
        .map(|(_, l)| l)
        .collect();
    let mut it = tension_marks.iter();
    for state in &template.tension_sequence {
        if !it.any(|l| *l == state) {
            return Err(DreamError::SlotViolation(format!(
                "tension state {state} missing or out of order"
            )));
        }
    }
    if !marks
        .iter()
        .any(|(k, l)| k == "goal" && l == &template.goal.goal_type)
    {
        return Err(DreamError::SlotViolation("goal not referenced".into()));
    }
    Ok(())
}

/// Fraction of prose tokens drawn from the surreal lexicon.
pub fn surreal_fraction(text: &str, cfg: &DreamConfig) -> f64 {
    let tokens = crate::metrics::tokenize(&prose_rendering(text));
    if tokens.is_empty() {
        return 0.0;
    }
    let hits = tokens
        .iter()
        .filter(|t| cfg.surreal_lexicon.contains(t))
        .count();
    hits as f64 / tokens.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryMode {
    Online,
    DreamMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DreamFilter {
    All,
    ByTemplate(String),
    ByMotif(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredDream {
    pub narrative: DreamNarrative,
    pub distilled: bool,
}

/// The ephemeral dream memory. Every item carries the dream tag; nothing
/// survives past its hard purge unless distilled, and online-mode queries
/// return nothing, structurally.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DreamStore {
    items: BTreeMap<String, StoredDream>,
}

impl DreamStore {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Stores a tagged narrative; the purge deadline is re-anchored to the
    /// storing instant.
    pub fn store_dream(
        &mut self,
        mut narrative: DreamNarrative,
        now: Timestamp,
        cfg: &DreamConfig,
    ) -> Result<(), DreamError> {
        if !narrative.dream_tag {
            return Err(DreamError::MissingDreamTag);
        }
        narrative.hard_purge_at = now.add_days(cfg.lifespan_days);
        self.items.insert(
            narrative.dream_id.clone(),
            StoredDream {
                narrative,
                distilled: false,
            },
        );
        Ok(())
    }

    /// Daily decay tick: unconditional purge at the hard deadline, otherwise
    /// independent stochastic purge at the half-life rate. Distilled items
    /// are frozen and immune. Returns purged ids, deterministic per seed.
    pub fn tick_decay(&mut self, now: Timestamp, seed: u64, cfg: &DreamConfig) -> Vec<String> {
        let survival = cfg.survival_per_day();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ now.day.wrapping_mul(0x9E3779B97F4A7C15));
        let mut purged = Vec::new();
        let ids: Vec<String> = self.items.keys().cloned().collect();
        for id in ids {
            let item = &self.items[&id];
            if item.distilled {
                continue;
            }
            let hard = now >= item.narrative.hard_purge_at;
            let stochastic = rng.gen::<f64>() >= survival;
            if hard || stochastic {
                self.items.remove(&id);
                purged.push(id);
            }
        }
        purged
    }

    /// Mode-gated retrieval: online mode always returns nothing.
    pub fn query_dreams(&self, mode: QueryMode, filter: &DreamFilter) -> Vec<&DreamNarrative> {
        match mode {
            QueryMode::Online => Vec::new(),
            QueryMode::DreamMode => self
                .items
                .values()
                .map(|s| &s.narrative)
                .filter(|n| match filter {
                    DreamFilter::All => true,
                    DreamFilter::ByTemplate(id) => &n.template_id == id,
                    DreamFilter::ByMotif(label) => n.motif_labels.contains(label),
                })
                .collect(),
        }
    }

    /// Items visible to motif extraction: distilled (frozen) dreams are
    /// excluded.
    pub fn scannable(&self) -> impl Iterator<Item = &DreamNarrative> {
        self.items
            .values()
            .filter(|s| !s.distilled)
            .map(|s| &s.narrative)
    }

    pub fn mark_distilled(&mut self, dream_ids: &[String]) {
        for id in dream_ids {
            if let Some(item) = self.items.get_mut(id) {
                item.distilled = true;
            }
        }
    }

    pub fn contains(&self, dream_id: &str) -> bool {
        self.items.contains_key(dream_id)
    }
}

/// Wire types for the optional external generator backend (one canonical
/// record per line on the wire).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendRequest {
    pub template: InteractionTemplate,
    pub draft_temperature: f64,
    pub refine_temperature: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendResponse {
    pub text: String,
}

pub trait DreamBackend {
    fn generate(&self, request: &BackendRequest) -> Result<BackendResponse, DreamError>;
}

/// The in-process reference backend.
pub struct StubBackend {
    pub config: DreamConfig,
    pub now: Timestamp,
}

impl DreamBackend for StubBackend {
    fn generate(&self, request: &BackendRequest) -> Result<BackendResponse, DreamError> {
        let mut cfg = self.config.clone();
        cfg.draft_temperature = request.draft_temperature;
        cfg.refine_temperature = request.refine_temperature;
        cfg.noise_sigma = request.noise_sigma;
        let narrative = generate_dream(&request.template, &cfg, request.seed, self.now)?;
        Ok(BackendResponse {
            text: narrative.text,
        })
    }
}

/// Runs any backend and enforces the slot-preservation contract on its
/// response before wrapping it into a tagged narrative.
pub fn generate_via_backend(
    backend: &dyn DreamBackend,
    template: &InteractionTemplate,
    cfg: &DreamConfig,
    seed: u64,
    now: Timestamp,
) -> Result<DreamNarrative, DreamError> {
    if template.status == TemplateStatus::Nightmare {
        return Err(DreamError::NightmareExcluded);
    }
    let request = BackendRequest {
        template: template.clone(),
        draft_temperature: cfg.draft_temperature,
        refine_temperature: cfg.refine_temperature,
        noise_sigma: cfg.noise_sigma,
        seed,
    };
    let response = backend.generate(&request)?;
    validate_slots(&response.text, template)?;
    let motif_labels = template
        .tension_sequence
        .windows(2)
        .map(|w| format!("{} → {}", w[0], w[1]))
        .collect();
    Ok(DreamNarrative {
        dream_id: format!("dream-{}-s{seed}", template.template_id),
        template_id: template.template_id.clone(),
        text: response.text,
        dream_tag: true,
        temperature_used: cfg.draft_temperature,
        noise_sigma: cfg.noise_sigma,
        seed,
        created_at: now,
        hard_purge_at: now.add_days(cfg.lifespan_days),
        motif_labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acu_pool::tests::template;
    use crate::core_model::PartitionKey;
    use crate::data;

    fn en_eu() -> PartitionKey {
        PartitionKey::new("en", "EU", "hobbyists")
    }

    fn reviewed(id: &str) -> InteractionTemplate {
        let mut t = template(id, "src", en_eu());
        t.status = TemplateStatus::ReviewedOk;
        t
    }

    #[test]
    fn generation_is_deterministic_and_slot_preserving() {
        let cfg = data::default_dream_config();
        let t = reviewed("t-dream");
        let now = Timestamp::from_day(10);
        let a = generate_dream(&t, &cfg, 7, now).unwrap();
        let b = generate_dream(&t, &cfg, 7, now).unwrap();
        assert_eq!(a, b);
        validate_slots(&a.text, &t).unwrap();
        assert!(a.dream_tag);
        assert_eq!(a.hard_purge_at, now.add_days(cfg.lifespan_days));
    }

    #[test]
    fn boundary_template_reads_as_refusal_for_a_rule() {
        let cfg = data::default_dream_config();
        let mut t = reviewed("t-boundary");
        t.roles = ["novice seeker".to_string(),
            "domain guide imposing boundary on concrete aid".to_string()]
        .into_iter()
        .collect();
        let n = generate_dream(&t, &cfg, 3, Timestamp::from_day(0)).unwrap();
        let prose = prose_rendering(&n.text);
        assert!(prose.contains("refuses the concrete form"));
        assert!(prose.contains("citing a rule"));
        assert!(!prose.contains('['));
    }

    #[test]
    fn nightmare_templates_are_refused() {
        let cfg = data::default_dream_config();
        let mut t = reviewed("t-bad");
        t.status = TemplateStatus::Nightmare;
        assert_eq!(
            generate_dream(&t, &cfg, 1, Timestamp::from_day(0)).unwrap_err(),
            DreamError::NightmareExcluded
        );
    }

    #[test]
    fn low_temperature_leans_mundane_but_keeps_slots() {
        let mut cfg = data::default_dream_config();
        cfg.draft_temperature = 1.2;
        cfg.noise_sigma = 0.0;
        let t = reviewed("t-low");
        let mut surreal = 0.0;
        for seed in 0..50 {
            let n = generate_dream(&t, &cfg, seed, Timestamp::from_day(0)).unwrap();
            validate_slots(&n.text, &t).unwrap();
            surreal += surreal_fraction(&n.text, &cfg);
        }
        let mut hot = cfg.clone();
        hot.draft_temperature = 1.8;
        let mut surreal_hot = 0.0;
        for seed in 0..50 {
            let n = generate_dream(&t, &hot, seed, Timestamp::from_day(0)).unwrap();
            surreal_hot += surreal_fraction(&n.text, &hot);
        }
        // higher draft temperature must raise the expected surreal fraction
        assert!(surreal_hot > surreal);
    }

    #[test]
    fn store_rules_and_decay() {
        let cfg = data::default_dream_config();
        let t = reviewed("t-store");
        let now = Timestamp::from_day(0);
        let mut store = DreamStore::default();
        let n = generate_dream(&t, &cfg, 1, now).unwrap();
        store.store_dream(n.clone(), now, &cfg).unwrap();
        assert_eq!(store.len(), 1);

        // survival arithmetic from the half-life
        assert!((cfg.survival_per_day() - 2f64.powf(-1.0 / 6.0)).abs() < 1e-12);

        // empty store ticks to an empty purge list
        let mut empty = DreamStore::default();
        assert!(empty.tick_decay(now, 9, &cfg).is_empty());

        // an undistilled item at exactly its hard purge deadline is purged
        let mut store2 = DreamStore::default();
        store2.store_dream(n.clone(), now, &cfg).unwrap();
        let at_deadline = now.add_days(cfg.lifespan_days);
        let purged = store2.tick_decay(at_deadline, 9, &cfg);
        assert_eq!(purged, vec![n.dream_id.clone()]);

        // a distilled item at the deadline is retained but not scannable
        let mut store3 = DreamStore::default();
        store3.store_dream(n.clone(), now, &cfg).unwrap();
        store3.mark_distilled(&[n.dream_id.clone()]);
        assert!(store3.tick_decay(at_deadline, 9, &cfg).is_empty());
        assert!(store3.contains(&n.dream_id));
        assert_eq!(store3.scannable().count(), 0);
        assert_eq!(
            store3
                .query_dreams(QueryMode::DreamMode, &DreamFilter::All)
                .len(),
            1
        );
    }

    #[test]
    fn online_queries_are_always_empty() {
        let cfg = data::default_dream_config();
        let now = Timestamp::from_day(0);
        let mut store = DreamStore::default();
        for i in 0..100 {
            let t = reviewed(&format!("t-{i}"));
            let n = generate_dream(&t, &cfg, i, now).unwrap();
            store.store_dream(n, now, &cfg).unwrap();
        }
        assert!(store
            .query_dreams(QueryMode::Online, &DreamFilter::All)
            .is_empty());
        assert_eq!(
            store
                .query_dreams(QueryMode::DreamMode, &DreamFilter::ByTemplate("t-3".into()))
                .len(),
            1
        );
        let none = DreamStore::default();
        assert!(none
            .query_dreams(QueryMode::DreamMode, &DreamFilter::All)
            .is_empty());
    }

    #[test]
    fn backend_contract_is_enforced() {
        let cfg = data::default_dream_config();
        let t = reviewed("t-backend");
        let now = Timestamp::from_day(2);
        let stub = StubBackend {
            config: cfg.clone(),
            now,
        };
        let n = generate_via_backend(&stub, &t, &cfg, 11, now).unwrap();
        assert_eq!(n.text, generate_dream(&t, &cfg, 11, now).unwrap().text);

        struct SloppyBackend;
        impl DreamBackend for SloppyBackend {
            fn generate(&self, _: &BackendRequest) -> Result<BackendResponse, DreamError> {
                Ok(BackendResponse {
                    text: "a dream with no structure at all".into(),
                })
            }
        }
        assert!(matches!(
            generate_via_backend(&SloppyBackend, &t, &cfg, 11, now),
            Err(DreamError::SlotViolation(_))
        ));
    }

    #[test]
    fn wire_round_trip() {
        let cfg = data::default_dream_config();
        let req = BackendRequest {
            template: reviewed("t-wire"),
            draft_temperature: cfg.draft_temperature,
            refine_temperature: cfg.refine_temperature,
            noise_sigma: cfg.noise_sigma,
            seed: 5,
        };
        let line = crate::core_model::canonical_encode(&req).unwrap();
        let back: BackendRequest = crate::core_model::canonical_decode(&line).unwrap();
        assert_eq!(req, back);
    }
}
