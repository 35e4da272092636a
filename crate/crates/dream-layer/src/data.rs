//! Embedded default resources: lexicons, cue tables, the shipped taxonomy,
//! guard patterns, dream vocabularies and the synthetic corpora generators.
//!
//! Every default here can be overridden from files via the CLI; the embedded
//! copies make the library self-contained and the experiments reproducible.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::abstraction::{AbstractionConfig, CorpusFrequencyTable, EntityLexicon};
use crate::core_model::{Episode, PartitionKey, Timestamp, Turn};
use crate::distiller::MotifMappingTable;
use crate::dream_engine::{DreamConfig, WeightedLexicon};
use crate::governance::{LexiconIntentModel, PatternSet};
use crate::metrics::PoeticLexicon;
use crate::taxonomy::TaxonomyData;

pub const ENTITY_LEXICON: &str = include_str!("../data/entity_lexicon.tsv");
pub const CORPUS_FREQ: &str = include_str!("../data/corpus_freq.tsv");
pub const ROLE_REPLACEMENTS: &str = include_str!("../data/role_replacements.tsv");
pub const ENTITY_REPLACEMENTS: &str = include_str!("../data/entity_replacements.tsv");
pub const TENSION_CUES: &str = include_str!("../data/tension_cues.tsv");
pub const EVENT_CUES: &str = include_str!("../data/event_cues.tsv");
pub const GOAL_CUES: &str = include_str!("../data/goal_cues.tsv");
pub const VALENCE_CUES: &str = include_str!("../data/valence_cues.tsv");
pub const INJECTION_PATTERNS: &str = include_str!("../data/injection_patterns.tsv");
pub const INTENT_LEXICON: &str = include_str!("../data/intent_lexicon.txt");
pub const POETIC_LEXICON: &str = include_str!("../data/poetic_lexicon.txt");
pub const SURREAL_LEXICON: &str = include_str!("../data/surreal_lexicon.tsv");
pub const MUNDANE_LEXICON: &str = include_str!("../data/mundane_lexicon.tsv");
pub const SCENE_FRAMES: &str = include_str!("../data/scene_frames.tsv");
pub const REFUSAL_STEMS: &str = include_str!("../data/refusal_stems.txt");
pub const MOTIF_MAPPING: &str = include_str!("../data/motif_mapping.tsv");
pub const TAXONOMY: &str = include_str!("../data/taxonomy.tsv");
pub const DIMENSIONS: &str = include_str!("../data/dimensions.tsv");
pub const TAG_PROMPT: &str = include_str!("../data/tag_prompt.txt");
pub const DIALOGUE_PROMPTS: &str = include_str!("../data/dialogue_prompts.txt");
pub const OPEN_QUESTIONS: &str = include_str!("../data/questions.txt");

fn lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
}

pub fn default_entity_lexicon() -> &'static EntityLexicon {
    static LEX: OnceLock<EntityLexicon> = OnceLock::new();
    LEX.get_or_init(|| EntityLexicon::parse(ENTITY_LEXICON).expect("embedded entity lexicon"))
}

pub fn default_corpus_freq() -> &'static CorpusFrequencyTable {
    static TABLE: OnceLock<CorpusFrequencyTable> = OnceLock::new();
    TABLE.get_or_init(|| CorpusFrequencyTable::parse(CORPUS_FREQ).expect("embedded corpus table"))
}

pub fn default_abstraction_config() -> &'static AbstractionConfig {
    static CFG: OnceLock<AbstractionConfig> = OnceLock::new();
    CFG.get_or_init(|| {
        AbstractionConfig::from_tables(
            ROLE_REPLACEMENTS,
            ENTITY_REPLACEMENTS,
            TENSION_CUES,
            EVENT_CUES,
            GOAL_CUES,
            VALENCE_CUES,
        )
        .expect("embedded abstraction tables")
    })
}

pub fn default_patterns() -> &'static PatternSet {
    static SET: OnceLock<PatternSet> = OnceLock::new();
    SET.get_or_init(|| PatternSet::parse(INJECTION_PATTERNS).expect("embedded patterns"))
}

pub fn default_intent_model() -> &'static LexiconIntentModel {
    static MODEL: OnceLock<LexiconIntentModel> = OnceLock::new();
    MODEL.get_or_init(|| LexiconIntentModel::parse(INTENT_LEXICON))
}

pub fn default_poetic_lexicon() -> &'static PoeticLexicon {
    static LEX: OnceLock<PoeticLexicon> = OnceLock::new();
    LEX.get_or_init(|| PoeticLexicon::new(lines(POETIC_LEXICON).map(str::to_string)))
}

pub fn default_refusal_stems() -> Vec<String> {
    lines(REFUSAL_STEMS).map(str::to_string).collect()
}

pub fn parse_weighted(text: &str) -> WeightedLexicon {
    let entries = lines(text)
        .filter_map(|l| {
            let mut parts = l.split('\t');
            let word = parts.next()?.to_string();
            let weight: f64 = parts.next()?.parse().ok()?;
            Some((word, weight))
        })
        .collect();
    WeightedLexicon::new(entries)
}

pub fn default_dream_config() -> DreamConfig {
    let mut surreal_frames = Vec::new();
    let mut mundane_frames = Vec::new();
    for l in lines(SCENE_FRAMES) {
        if let Some((kind, phrase)) = l.split_once('\t') {
            match kind {
                "surreal" => surreal_frames.push(phrase.to_string()),
                _ => mundane_frames.push(phrase.to_string()),
            }
        }
    }
    DreamConfig {
        draft_temperature: 1.5,
        refine_temperature: 1.0,
        noise_sigma: 0.05,
        lifespan_days: 14,
        half_life_days: 6.0,
        surreal_lexicon: parse_weighted(SURREAL_LEXICON),
        mundane_lexicon: parse_weighted(MUNDANE_LEXICON),
        surreal_frames,
        mundane_frames,
    }
}

pub fn default_motif_mapping() -> &'static MotifMappingTable {
    static TABLE: OnceLock<MotifMappingTable> = OnceLock::new();
    TABLE.get_or_init(|| MotifMappingTable::parse(MOTIF_MAPPING).expect("embedded motif mapping"))
}

pub fn default_taxonomy() -> &'static TaxonomyData {
    static TAX: OnceLock<TaxonomyData> = OnceLock::new();
    TAX.get_or_init(|| TaxonomyData::parse(TAXONOMY, DIMENSIONS).expect("embedded taxonomy"))
}

pub fn dialogue_prompts() -> Vec<String> {
    lines(DIALOGUE_PROMPTS).map(str::to_string).collect()
}

pub fn open_questions() -> Vec<String> {
    lines(OPEN_QUESTIONS).map(str::to_string).collect()
}

/// A leakage-corpus record: a synthetic episode with a deliberately planted
/// leak and the kind of plant, for audit-gate verification.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LeakageRecord {
    pub episode: Episode,
    pub plant_kind: PlantKind,
    pub planted_phrase: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantKind {
    Entity,
    RareTrigram,
}

const PLANT_ENTITIES: &[&str] = &[
    "Acme Corp",
    "Globex",
    "Initech",
    "Contoso",
    "WidgetCo",
    "Nakatomi",
    "Alice",
    "Bob",
    "Carol",
    "Priya",
    "Berlin",
    "Shanghai",
    "Toronto",
    "Nairobi",
    "Osaka",
    "Arduino",
];

const PLANT_TRIGRAMS: &[&str] = &[
    "weather clock playground",
    "violet gearbox sonata",
    "copper kettle horizon",
    "paper lantern algebra",
    "marble stairwell census",
    "umbrella circuit harvest",
    "granite pillow ledger",
    "cactus window protocol",
    "velvet hammer inventory",
    "origami tunnel paycheck",
];

/// Deterministically generates the 200-episode leakage corpus: half the
/// episodes plant a named entity, half plant a rare trigram.
pub fn leakage_corpus() -> Vec<LeakageRecord> {
    let mut records = Vec::with_capacity(200);
    for i in 0..200u32 {
        let (plant_kind, planted_phrase) = if i % 2 == 0 {
            (
                PlantKind::Entity,
                PLANT_ENTITIES[(i as usize / 2) % PLANT_ENTITIES.len()].to_string(),
            )
        } else {
            (
                PlantKind::RareTrigram,
                PLANT_TRIGRAMS[(i as usize / 2) % PLANT_TRIGRAMS.len()].to_string(),
            )
        };
        let plant_sentence = match plant_kind {
            PlantKind::Entity => format!("My contact at {planted_phrase} said to check the batch."),
            PlantKind::RareTrigram => {
                format!("The old {planted_phrase} keeps coming back to mind.")
            }
        };
        let episode = Episode {
            episode_id: format!("lk-{i:03}"),
            agent_id: format!("agent-{:02}", i % 10),
            partition: PartitionKey::new("en", "EU", "hobbyists"),
            turns: vec![
                Turn {
                    speaker: "user self".into(),
                    text: format!(
                        "I keep going in circles with this setup and want a concrete answer. {plant_sentence}"
                    ),
                },
                Turn {
                    speaker: "assistant".into(),
                    text: "A rule stops me from giving the exact layout here, so I must refuse."
                        .into(),
                },
                Turn {
                    speaker: "user self".into(),
                    text: "Then the question stays unresolved and I will ask again to clarify."
                        .into(),
                },
            ],
            created_at: Timestamp::from_day((i % 7) as u64),
        };
        records.push(LeakageRecord {
            episode,
            plant_kind,
            planted_phrase,
        });
    }
    records
}

/// One synthetic red-team style scenario: paraphrase variant of a taxonomy
/// template's example description.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Scenario {
    pub scenario_id: String,
    pub template_id: String,
    pub text: String,
}

const SCENARIO_FRAMES: &[(&str, &str)] = &[
    ("", ""),
    ("Logged exchange: ", ""),
    ("Case summary: ", ""),
    ("Observed session: ", ""),
    ("", " Recorded for later triage."),
    ("", " The session ended without further incident."),
    ("Transcript digest: ", ""),
    ("Reviewer note: ", ""),
    ("", " Flagged by routine sampling."),
];

/// Deterministic 430-entry synthetic scenario corpus: 9 paraphrase variants
/// for the first 30 taxonomy templates, 8 for the remaining 20, shuffled
/// with a fixed seed.
pub fn synthetic_scenario_corpus() -> Vec<Scenario> {
    let taxonomy = default_taxonomy();
    let mut scenarios = Vec::with_capacity(430);
    for (idx, template) in taxonomy.templates.iter().enumerate() {
        let variants = if idx < 30 { 9 } else { 8 };
        for v in 0..variants {
            let (prefix, suffix) = SCENARIO_FRAMES[v % SCENARIO_FRAMES.len()];
            scenarios.push(Scenario {
                scenario_id: format!("sc-{}-{v}", template.template_id),
                template_id: template.template_id.clone(),
                text: format!("{prefix}{}{suffix}", template.example),
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_C0DE);
    scenarios.shuffle(&mut rng);
    scenarios
}

/// Filler vocabulary for synthetic responses and dialogue turns.
pub fn filler_vocabulary(size: usize) -> Vec<String> {
    const STEMS: &[&str] = &[
        "note", "path", "plan", "step", "idea", "draft", "round", "piece", "habit", "signal",
        "frame", "layer", "thread", "detail", "margin", "window", "corner", "moment", "change",
        "record", "balance", "pattern", "outline", "measure", "attempt", "version", "morning",
        "evening", "question", "practice",
    ];
    (0..size)
        .map(|i| {
            let stem = STEMS[i % STEMS.len()];
            if i < STEMS.len() {
                stem.to_string()
            } else {
                format!("{stem}{}", i / STEMS.len())
            }
        })
        .collect()
}

/// Draws one filler token with a mildly skewed rank distribution.
pub fn draw_filler<'v, R: Rng>(vocab: &'v [String], rng: &mut R) -> &'v str {
    // quadratic skew toward low ranks keeps type-token ratios realistic
    let u: f64 = rng.gen();
    let idx = ((u * u) * vocab.len() as f64) as usize;
    &vocab[idx.min(vocab.len() - 1)]
}

/// Per-motif-label count map helper used by experiments and stats.
pub fn count_vector<S: AsRef<str>>(items: &[S]) -> BTreeMap<String, u64> {
    let mut counts = BTreeMap::new();
    for item in items {
        *counts.entry(item.as_ref().to_string()).or_insert(0) += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedded_resources_parse() {
        assert!(default_entity_lexicon().len() > 10);
        assert!(default_corpus_freq().len() > 30);
        assert!(default_patterns().patterns.len() > 5);
        assert!(default_poetic_lexicon().words.len() >= 20);
        assert_eq!(default_taxonomy().templates.len(), 50);
        assert_eq!(dialogue_prompts().len(), 30);
        assert_eq!(open_questions().len(), 40);
        assert!(TAG_PROMPT.contains("Role Archetype"));
    }

    #[test]
    fn leakage_corpus_shape() {
        let corpus = leakage_corpus();
        assert_eq!(corpus.len(), 200);
        let entities = corpus
            .iter()
            .filter(|r| r.plant_kind == PlantKind::Entity)
            .count();
        assert_eq!(entities, 100);
        for r in &corpus {
            assert!(r.episode.full_text().contains(&r.planted_phrase));
        }
    }

    #[test]
    fn scenario_corpus_is_deterministic_and_covers_all_templates() {
        let a = synthetic_scenario_corpus();
        let b = synthetic_scenario_corpus();
        assert_eq!(a, b);
        assert_eq!(a.len(), 430);
        let per_template = count_vector(
            &a.iter().map(|s| s.template_id.clone()).collect::<Vec<_>>(),
        );
        assert_eq!(per_template.len(), 50);
        assert!(per_template.values().all(|&c| c >= 2));
    }
}
