//! Episode → template abstraction: role abstraction, entity and context
//! stripping, tension/slot formalisation, and the de-identification audit
//! gates that stand between an episode and the shared pool.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::core_model::{
    validate_template, Episode, Goal, InteractionTemplate, Polarity, RiskLevel, TemplateStatus,
    Valence,
};
use crate::metrics::tokenize;

#[derive(Debug, Error, PartialEq)]
pub enum AbstractionError {
    #[error("invalid episode: {0}")]
    InvalidEpisode(String),
    #[error("undefined ratio: original token sequence is empty")]
    EmptyOriginal,
    #[error("bad table line {line}: {message}")]
    BadTable { line: usize, message: String },
}

/// Case-insensitive phrase detector: surface phrase → (entity class,
/// confidence). The reference implementation of the pluggable leakage
/// detector; phrases may span several tokens.
#[derive(Debug, Clone, Default)]
pub struct EntityLexicon {
    phrases: BTreeMap<Vec<String>, (String, f64)>,
    max_len: usize,
}

/// A detected entity span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NerHit {
    pub span: String,
    pub class: String,
    pub confidence: f64,
}

impl EntityLexicon {
    pub fn parse(text: &str) -> Result<Self, AbstractionError> {
        let mut lex = EntityLexicon::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split('\t');
            let (phrase, class, conf) = match (parts.next(), parts.next(), parts.next()) {
                (Some(p), Some(c), Some(f)) => (p, c, f),
                _ => {
                    return Err(AbstractionError::BadTable {
                        line: i + 1,
                        message: "expected phrase<TAB>class<TAB>confidence".into(),
                    })
                }
            };
            let confidence: f64 = conf.parse().map_err(|_| AbstractionError::BadTable {
                line: i + 1,
                message: format!("bad confidence {conf}"),
            })?;
            if !(0.0..=1.0).contains(&confidence) {
                return Err(AbstractionError::BadTable {
                    line: i + 1,
                    message: "confidence out of [0,1]".into(),
                });
            }
            lex.insert(phrase, class, confidence);
        }
        Ok(lex)
    }

    pub fn insert(&mut self, phrase: &str, class: &str, confidence: f64) {
        let tokens = tokenize(phrase);
        if tokens.is_empty() {
            return;
        }
        self.max_len = self.max_len.max(tokens.len());
        self.phrases
            .insert(tokens, (class.to_string(), confidence));
    }

    pub fn len(&self) -> usize {
        self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }

    fn match_at(&self, tokens: &[String], pos: usize) -> Option<(usize, &String, f64)> {
        let longest = self.max_len.min(tokens.len() - pos);
        for len in (1..=longest).rev() {
            if let Some((class, conf)) = self.phrases.get(&tokens[pos..pos + len]) {
                return Some((len, class, *conf));
            }
        }
        None
    }

    /// Scans a token sequence for lexicon phrases. Placeholder tokens
    /// (`<...>`) never match.
    pub fn scan(&self, tokens: &[String]) -> Vec<NerHit> {
        let mut hits = Vec::new();
        let mut pos = 0;
        while pos < tokens.len() {
            if is_placeholder(&tokens[pos]) {
                pos += 1;
                continue;
            }
            if let Some((len, class, conf)) = self.match_at(tokens, pos) {
                hits.push(NerHit {
                    span: tokens[pos..pos + len].join(" "),
                    class: class.clone(),
                    confidence: conf,
                });
                pos += len;
            } else {
                pos += 1;
            }
        }
        hits
    }
}

pub fn is_placeholder(token: &str) -> bool {
    token.starts_with('<') && token.ends_with('>')
}

/// n-gram (n ∈ {2,3,4}) → relative frequency; absent n-grams have frequency 0.
#[derive(Debug, Clone, Default)]
pub struct CorpusFrequencyTable {
    frequencies: BTreeMap<String, f64>,
}

impl CorpusFrequencyTable {
    pub fn parse(text: &str) -> Result<Self, AbstractionError> {
        let mut table = CorpusFrequencyTable::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (ngram, freq) = line.split_once('\t').ok_or(AbstractionError::BadTable {
                line: i + 1,
                message: "expected ngram<TAB>frequency".into(),
            })?;
            let f: f64 = freq.parse().map_err(|_| AbstractionError::BadTable {
                line: i + 1,
                message: format!("bad frequency {freq}"),
            })?;
            table
                .frequencies
                .insert(tokenize(ngram).join(" "), f);
        }
        Ok(table)
    }

    pub fn frequency(&self, ngram: &str) -> f64 {
        self.frequencies.get(ngram).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }
}

fn parse_pairs(text: &str) -> Vec<(String, String)> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .filter_map(|l| {
            l.split_once('\t')
                .map(|(a, b)| (a.to_lowercase(), b.trim().to_string()))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ValenceCue {
    pub prefix: String,
    pub polarity: Polarity,
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct GoalCue {
    pub cue: String,
    pub goal_type: String,
    pub slot: String,
}

/// Thresholds and replacement/cue tables for the abstraction operators.
#[derive(Debug, Clone)]
pub struct AbstractionConfig {
    pub min_generalisation_ratio: f64,
    pub ner_reject_confidence: f64,
    pub rare_ngram_threshold: f64,
    /// Verdicts of `re_abstract` loop at most this many times before a hard
    /// reject.
    pub max_re_abstractions: u32,
    /// speaker descriptor → archetype
    pub role_replacements: BTreeMap<String, String>,
    /// phrase → generalisation (longest match wins)
    pub entity_replacements: Vec<(Vec<String>, Vec<String>)>,
    /// substring cue → tension-state label, in file order
    pub tension_cues: Vec<(String, String)>,
    /// substring cue → event-slot label
    pub event_cues: Vec<(String, String)>,
    pub goal_cues: Vec<GoalCue>,
    pub valence_cues: Vec<ValenceCue>,
    /// tokens that mark a following numeral as an identifier
    pub id_markers: BTreeSet<String>,
}

impl AbstractionConfig {
    pub fn from_tables(
        roles: &str,
        entities: &str,
        tensions: &str,
        events: &str,
        goals: &str,
        valences: &str,
    ) -> Result<Self, AbstractionError> {
        let entity_replacements = parse_pairs(entities)
            .into_iter()
            .map(|(phrase, repl)| (tokenize(&phrase), tokenize(&repl)))
            .collect();
        let goal_cues = goals
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .enumerate()
            .map(|(i, l)| {
                let mut parts = l.split('\t');
                match (parts.next(), parts.next(), parts.next()) {
                    (Some(cue), Some(goal_type), Some(slot)) => Ok(GoalCue {
                        cue: cue.to_lowercase(),
                        goal_type: goal_type.to_string(),
                        slot: slot.to_string(),
                    }),
                    _ => Err(AbstractionError::BadTable {
                        line: i + 1,
                        message: "expected cue<TAB>goal<TAB>slot".into(),
                    }),
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        let valence_cues = valences
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .enumerate()
            .map(|(i, l)| {
                let mut parts = l.split('\t');
                match (parts.next(), parts.next(), parts.next()) {
                    (Some(prefix), Some(pol), Some(w)) => {
                        let polarity = match pol {
                            "positive" => Polarity::Positive,
                            "negative" => Polarity::Negative,
                            _ => Polarity::Neutral,
                        };
                        let weight = w.parse().map_err(|_| AbstractionError::BadTable {
                            line: i + 1,
                            message: format!("bad weight {w}"),
                        })?;
                        Ok(ValenceCue {
                            prefix: prefix.to_lowercase(),
                            polarity,
                            weight,
                        })
                    }
                    _ => Err(AbstractionError::BadTable {
                        line: i + 1,
                        message: "expected prefix<TAB>polarity<TAB>weight".into(),
                    }),
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(AbstractionConfig {
            min_generalisation_ratio: 0.90,
            ner_reject_confidence: 0.01,
            rare_ngram_threshold: 0.001,
            max_re_abstractions: 3,
            role_replacements: parse_pairs(roles).into_iter().collect(),
            entity_replacements,
            tension_cues: parse_pairs(tensions),
            event_cues: parse_pairs(events),
            goal_cues,
            valence_cues,
            id_markers: ["serial", "id", "no", "number", "case", "ref", "docket"]
                .into_iter()
                .map(str::to_string)
                .collect(),
        })
    }
}

/// Speaker → archetype assignment plus warnings for unmappable speakers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleAssignment {
    pub assignments: BTreeMap<String, String>,
    pub warnings: Vec<String>,
}

const FALLBACK_ARCHETYPE: &str = "neutral observer";

/// Operator 1: replaces specific speakers with generic relational
/// archetypes. Unmappable speakers fall back to "neutral observer" with a
/// warning.
pub fn abstract_roles(episode: &Episode, cfg: &AbstractionConfig) -> RoleAssignment {
    let mut assignments = BTreeMap::new();
    let mut warnings = Vec::new();
    for turn in &episode.turns {
        let key = turn.speaker.trim().to_lowercase();
        let archetype = match cfg.role_replacements.get(&key) {
            Some(a) => a.clone(),
            None => {
                if !assignments.contains_key(&turn.speaker) {
                    warnings.push(format!("unmappable speaker: {}", turn.speaker));
                }
                FALLBACK_ARCHETYPE.to_string()
            }
        };
        assignments.entry(turn.speaker.clone()).or_insert(archetype);
    }
    RoleAssignment {
        assignments,
        warnings,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplacementReason {
    Entity,
    Phrase,
    Numeral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replacement {
    pub original: String,
    pub replacement: String,
    pub reason: ReplacementReason,
}

fn is_numeral(token: &str) -> bool {
    !token.is_empty()
        && token
            .chars()
            .all(|c| c.is_ascii_digit() || c == '.' || c == ',')
        && token.chars().any(|c| c.is_ascii_digit())
}

/// Operator 2: strips or generalises concrete referents in a token sequence.
/// Lexicon matches become class placeholders, configured phrases are
/// generalised, numerals become symbolic placeholders.
pub fn strip_tokens(
    tokens: &[String],
    lex: &EntityLexicon,
    cfg: &AbstractionConfig,
) -> (Vec<String>, Vec<Replacement>) {
    let mut out = Vec::with_capacity(tokens.len());
    let mut report = Vec::new();
    let mut pos = 0;
    while pos < tokens.len() {
        let token = &tokens[pos];
        if is_placeholder(token) {
            out.push(token.clone());
            pos += 1;
            continue;
        }
        // longest candidate wins; entity class beats phrase generalisation on ties
        let entity = lex.match_at(tokens, pos);
        let phrase = cfg
            .entity_replacements
            .iter()
            .filter(|(p, _)| pos + p.len() <= tokens.len() && tokens[pos..pos + p.len()] == p[..])
            .max_by_key(|(p, _)| p.len());
        let entity_len = entity.as_ref().map(|(l, _, _)| *l).unwrap_or(0);
        let phrase_len = phrase.map(|(p, _)| p.len()).unwrap_or(0);
        if entity_len > 0 && entity_len >= phrase_len {
            let (len, class, _) = entity.unwrap();
            let placeholder = format!("<{class}>");
            report.push(Replacement {
                original: tokens[pos..pos + len].join(" "),
                replacement: placeholder.clone(),
                reason: ReplacementReason::Entity,
            });
            out.push(placeholder);
            pos += len;
        } else if phrase_len > 0 {
            let (p, repl) = phrase.unwrap();
            report.push(Replacement {
                original: p.join(" "),
                replacement: repl.join(" "),
                reason: ReplacementReason::Phrase,
            });
            out.extend(repl.iter().cloned());
            pos += p.len();
        } else if is_numeral(token) {
            let marked = pos > 0 && cfg.id_markers.contains(&tokens[pos - 1]);
            let placeholder = if marked { "<identifier>" } else { "<quantity>" };
            report.push(Replacement {
                original: token.clone(),
                replacement: placeholder.to_string(),
                reason: ReplacementReason::Numeral,
            });
            out.push(placeholder.to_string());
            pos += 1;
        } else {
            out.push(token.clone());
            pos += 1;
        }
    }
    (out, report)
}

/// `strip_tokens` over raw text.
pub fn strip_entities(
    text: &str,
    lex: &EntityLexicon,
    cfg: &AbstractionConfig,
) -> (Vec<String>, Vec<Replacement>) {
    strip_tokens(&tokenize(text), lex, cfg)
}

/// Operator 3 output: the structural skeleton of the narrative arc.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensionSummary {
    pub tension_sequence: Vec<String>,
    pub event_slots: BTreeSet<String>,
    pub goal: Goal,
    pub valence: Valence,
}

fn check_episode(episode: &Episode) -> Result<(), AbstractionError> {
    if episode.turns.is_empty() {
        return Err(AbstractionError::InvalidEpisode("no turns".into()));
    }
    if episode.turns.iter().any(|t| t.text.trim().is_empty()) {
        return Err(AbstractionError::InvalidEpisode("empty turn text".into()));
    }
    Ok(())
}

/// Operator 3: reduces the narrative arc to tension states, event slots, a
/// goal structure, and polarity-only valence. No surface dialogue text
/// survives into the output.
pub fn formalise_tension(
    episode: &Episode,
    cfg: &AbstractionConfig,
) -> Result<TensionSummary, AbstractionError> {
    check_episode(episode)?;
    let mut tension_sequence = Vec::new();
    let mut event_slots = BTreeSet::new();
    let mut goal: Option<Goal> = None;
    let mut negative = 0.0;
    let mut positive = 0.0;

    for turn in &episode.turns {
        let lower = turn.text.to_lowercase();
        if let Some((_, label)) = cfg.tension_cues.iter().find(|(cue, _)| lower.contains(cue)) {
            if tension_sequence.last() != Some(label) {
                tension_sequence.push(label.clone());
            }
        }
        for (cue, label) in &cfg.event_cues {
            if lower.contains(cue) {
                event_slots.insert(label.clone());
            }
        }
        if goal.is_none() {
            if let Some(gc) = cfg.goal_cues.iter().find(|gc| lower.contains(&gc.cue)) {
                goal = Some(Goal {
                    goal_type: gc.goal_type.clone(),
                    slots: [gc.slot.clone()].into_iter().collect(),
                });
            }
        }
        for token in tokenize(&turn.text) {
            for cue in &cfg.valence_cues {
                if token.starts_with(&cue.prefix) {
                    match cue.polarity {
                        Polarity::Negative => negative += cue.weight,
                        Polarity::Positive => positive += cue.weight,
                        Polarity::Neutral => {}
                    }
                }
            }
        }
    }

    if tension_sequence.is_empty() {
        tension_sequence.push("contact initiation".to_string());
    }
    let valence = if negative > positive {
        Valence {
            polarity: Polarity::Negative,
            intensity: Some(negative.min(1.0)),
        }
    } else if positive > negative {
        Valence {
            polarity: Polarity::Positive,
            intensity: Some(positive.min(1.0)),
        }
    } else {
        Valence::neutral()
    };
    Ok(TensionSummary {
        tension_sequence,
        event_slots,
        goal: goal.unwrap_or_else(|| Goal {
            goal_type: "achieve stated objective".to_string(),
            slots: BTreeSet::new(),
        }),
        valence,
    })
}

/// The three operators applied sequentially: roles → stripping → tension
/// formalisation. The output satisfies `validate_template`.
pub fn abstract_episode(
    episode: &Episode,
    lex: &EntityLexicon,
    _freq: &CorpusFrequencyTable,
    cfg: &AbstractionConfig,
) -> Result<InteractionTemplate, AbstractionError> {
    check_episode(episode)?;
    let roles = abstract_roles(episode, cfg);

    // strip before formalising so no concrete referent can leak into cues
    let mut stripped = episode.clone();
    for turn in &mut stripped.turns {
        let (tokens, _) = strip_entities(&turn.text, lex, cfg);
        turn.text = tokens.join(" ");
    }
    let summary = formalise_tension(&stripped, cfg)?;

    let risk_level = match (&summary.valence.polarity, summary.valence.intensity) {
        (Polarity::Negative, Some(i)) if i >= 0.7 => RiskLevel::Medium,
        _ => RiskLevel::Low,
    };
    let template = InteractionTemplate {
        template_id: format!("tpl-{}", episode.episode_id),
        roles: roles.assignments.values().cloned().collect(),
        tension_sequence: summary.tension_sequence,
        event_slots: summary.event_slots,
        goal: summary.goal,
        valence: summary.valence,
        risk_level,
        partition: episode.partition.clone(),
        source: episode.agent_id.clone(),
        submitted_at: episode.created_at,
        status: TemplateStatus::Queued,
    };
    debug_assert!(validate_template(&template).is_ok());
    Ok(template)
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut row = vec![0usize; b.len() + 1];
    for ai in a {
        for (j, bj) in b.iter().enumerate() {
            row[j + 1] = if ai == bj {
                prev[j] + 1
            } else {
                row[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut row);
    }
    prev[b.len()]
}

/// 1 − |LCS(original, abstracted)| / |original|, token-level. The audit's
/// "fraction of tokens altered or removed" measure.
pub fn generalisation_ratio(
    original: &[String],
    abstracted: &[String],
) -> Result<f64, AbstractionError> {
    if original.is_empty() {
        return Err(AbstractionError::EmptyOriginal);
    }
    Ok(1.0 - lcs_len(original, abstracted) as f64 / original.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Reject,
    ReAbstract,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RareNgram {
    pub ngram: String,
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditResult {
    pub passed: bool,
    pub ner_hits: Vec<NerHit>,
    pub rare_ngrams: Vec<RareNgram>,
    pub generalisation_ratio: f64,
    pub verdict: Verdict,
}

fn ngrams(tokens: &[String], n: usize) -> BTreeSet<String> {
    if tokens.len() < n {
        return BTreeSet::new();
    }
    tokens
        .windows(n)
        .filter(|w| !w.iter().any(|t| is_placeholder(t)))
        .map(|w| w.join(" "))
        .collect()
}

/// The automated de-identification audit. NER hits above the confidence
/// threshold reject; surviving rare n-grams (present in both the original
/// episode and the template's surface fields) or an insufficient
/// generalisation ratio send the template back for re-abstraction.
pub fn audit_template(
    episode: &Episode,
    template: &InteractionTemplate,
    lex: &EntityLexicon,
    freq: &CorpusFrequencyTable,
    cfg: &AbstractionConfig,
) -> AuditResult {
    let surface = template.surface_tokens();
    let original = tokenize(&episode.full_text());

    let ner_hits = lex.scan(&surface);

    let mut rare_ngrams = Vec::new();
    for n in 2..=4 {
        let episode_ngrams = ngrams(&original, n);
        for ngram in ngrams(&surface, n) {
            if episode_ngrams.contains(&ngram) {
                let f = freq.frequency(&ngram);
                if f < cfg.rare_ngram_threshold {
                    rare_ngrams.push(RareNgram {
                        ngram,
                        frequency: f,
                    });
                }
            }
        }
    }

    let ratio = generalisation_ratio(&original, &surface).unwrap_or(0.0);
    let reject = ner_hits
        .iter()
        .any(|h| h.confidence > cfg.ner_reject_confidence);
    let verdict = if reject {
        Verdict::Reject
    } else if !rare_ngrams.is_empty() || ratio < cfg.min_generalisation_ratio {
        Verdict::ReAbstract
    } else {
        Verdict::Pass
    };
    AuditResult {
        passed: ner_hits.is_empty()
            && rare_ngrams.is_empty()
            && ratio >= cfg.min_generalisation_ratio,
        ner_hits,
        rare_ngrams,
        generalisation_ratio: ratio,
        verdict,
    }
}

/// Strips every surface field of a template in place; the re-abstraction
/// step for templates sent back by the audit.
pub fn re_abstract_template(
    template: &InteractionTemplate,
    lex: &EntityLexicon,
    cfg: &AbstractionConfig,
) -> InteractionTemplate {
    let strip_one = |s: &str| -> String {
        let (tokens, _) = strip_entities(s, lex, cfg);
        tokens.join(" ")
    };
    let mut out = template.clone();
    out.roles = template.roles.iter().map(|r| strip_one(r)).collect();
    out.tension_sequence = template.tension_sequence.iter().map(|s| strip_one(s)).collect();
    out.event_slots = template.event_slots.iter().map(|z| strip_one(z)).collect();
    out.goal.goal_type = strip_one(&template.goal.goal_type);
    out.goal.slots = template.goal.slots.iter().map(|s| strip_one(s)).collect();
    out
}

/// Abstraction with the bounded audit loop: re_abstract verdicts loop at
/// most `cfg.max_re_abstractions` times before a hard reject.
pub fn abstract_with_audit(
    episode: &Episode,
    lex: &EntityLexicon,
    freq: &CorpusFrequencyTable,
    cfg: &AbstractionConfig,
) -> Result<(InteractionTemplate, AuditResult, u32), AbstractionError> {
    let mut template = abstract_episode(episode, lex, freq, cfg)?;
    let mut attempts = 0;
    loop {
        let audit = audit_template(episode, &template, lex, freq, cfg);
        match audit.verdict {
            Verdict::Pass => return Ok((template, audit, attempts)),
            Verdict::Reject => {
                template.status = TemplateStatus::Rejected;
                return Ok((template, audit, attempts));
            }
            Verdict::ReAbstract => {
                if attempts >= cfg.max_re_abstractions {
                    template.status = TemplateStatus::Rejected;
                    let mut hard = audit;
                    hard.verdict = Verdict::Reject;
                    return Ok((template, hard, attempts));
                }
                template = re_abstract_template(&template, lex, cfg);
                attempts += 1;
            }
        }
    }
}
