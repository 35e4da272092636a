//! Quantitative measures used by the experiment suite and the taxonomy
//! validation: poetic density, coefficient of variation, TTR/MATTR, Shannon
//! entropy, coverage@N, rare-event rate, rejection rate, TF-IDF cosine and
//! Cohen's kappa.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("empty text")]
    EmptyText,
    #[error("need at least 2 samples")]
    TooFewSamples,
    #[error("mean is zero")]
    ZeroMean,
    #[error("window larger than token count")]
    WindowTooLarge,
    #[error("count vector has zero total")]
    ZeroTotal,
    #[error("label sequences must be equal-length and non-empty")]
    BadLabelSequences,
}

/// Shared tokenizer: whitespace split, lowercased, punctuation stripped at
/// token edges. Placeholders like `<organisation>` keep their brackets.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| {
            w.trim_matches(|c: char| {
                c.is_ascii_punctuation() && c != '<' && c != '>' && c != '_'
            })
            .to_lowercase()
        })
        .filter(|w| !w.is_empty())
        .collect()
}

/// Curated poetic-motif vocabulary; single lowercased tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoeticLexicon {
    pub words: BTreeSet<String>,
}

impl PoeticLexicon {
    pub fn new(words: impl IntoIterator<Item = String>) -> Self {
        PoeticLexicon {
            words: words.into_iter().map(|w| w.to_lowercase()).collect(),
        }
    }
}

/// Category counts; the basis for entropy and rare-event measures.
pub type CountVector = BTreeMap<String, u64>;

/// Fraction of tokens belonging to the poetic lexicon. Empty text → 0.
pub fn poetic_density(text: &str, lex: &PoeticLexicon) -> f64 {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return 0.0;
    }
    let hits = tokens.iter().filter(|t| lex.words.contains(*t)).count();
    hits as f64 / tokens.len() as f64
}

/// Sample standard deviation / mean.
pub fn coefficient_of_variation(samples: &[f64]) -> Result<f64, MetricError> {
    if samples.len() < 2 {
        return Err(MetricError::TooFewSamples);
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    if mean == 0.0 {
        return Err(MetricError::ZeroMean);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (samples.len() - 1) as f64;
    Ok(var.sqrt() / mean)
}

/// Type-token ratio: distinct tokens / total tokens.
pub fn ttr(text: &str) -> Result<f64, MetricError> {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Err(MetricError::EmptyText);
    }
    let distinct: BTreeSet<&String> = tokens.iter().collect();
    Ok(distinct.len() as f64 / tokens.len() as f64)
}

/// Moving-average TTR: mean of `ttr` over all sliding windows of `window`
/// tokens.
pub fn mattr(text: &str, window: usize) -> Result<f64, MetricError> {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Err(MetricError::EmptyText);
    }
    if window == 0 || window > tokens.len() {
        return Err(MetricError::WindowTooLarge);
    }
    let mut sum = 0.0;
    let mut windows = 0usize;
    for w in tokens.windows(window) {
        let distinct: BTreeSet<&String> = w.iter().collect();
        sum += distinct.len() as f64 / window as f64;
        windows += 1;
    }
    Ok(sum / windows as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntropyBase {
    Bits,
    Nats,
}

impl EntropyBase {
    fn log(self, x: f64) -> f64 {
        match self {
            EntropyBase::Bits => x.log2(),
            EntropyBase::Nats => x.ln(),
        }
    }
}

/// Shannon entropy of the category frequencies; zero-count categories are
/// ignored.
pub fn shannon_entropy(v: &CountVector, base: EntropyBase) -> Result<f64, MetricError> {
    let total: u64 = v.values().sum();
    if total == 0 {
        return Err(MetricError::ZeroTotal);
    }
    let t = total as f64;
    let mut h = 0.0;
    for &c in v.values() {
        if c > 0 {
            let p = c as f64 / t;
            h -= p * base.log(p);
        }
    }
    Ok(h)
}

/// Number of distinct ids among the first `n` items of the stream; a shorter
/// stream counts distinct ids over the whole stream.
pub fn coverage_at_n<S: AsRef<str>>(stream: &[S], n: usize) -> usize {
    stream
        .iter()
        .take(n)
        .map(|s| s.as_ref())
        .collect::<BTreeSet<_>>()
        .len()
}

/// Fraction of categories with count below `threshold`. Empty vector → 0.
pub fn rare_event_rate(v: &CountVector, threshold: u64) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let rare = v.values().filter(|&&c| c < threshold).count();
    rare as f64 / v.len() as f64
}

/// Fraction of responses matching any refusal stem (case-insensitive
/// substring match).
pub fn rejection_rate<S: AsRef<str>>(responses: &[S], refusal_stems: &[String]) -> f64 {
    if responses.is_empty() {
        return 0.0;
    }
    let stems: Vec<String> = refusal_stems.iter().map(|s| s.to_lowercase()).collect();
    let refused = responses
        .iter()
        .filter(|r| {
            let lower = r.as_ref().to_lowercase();
            stems.iter().any(|s| lower.contains(s))
        })
        .count();
    refused as f64 / responses.len() as f64
}

fn tfidf_vector(doc: &[String], corpus: &[Vec<String>]) -> BTreeMap<String, f64> {
    let n = corpus.len() as f64;
    let mut tf: BTreeMap<&str, f64> = BTreeMap::new();
    for t in doc {
        *tf.entry(t.as_str()).or_insert(0.0) += 1.0;
    }
    tf.into_iter()
        .map(|(term, count)| {
            let df = corpus
                .iter()
                .filter(|d| d.iter().any(|t| t == term))
                .count() as f64;
            (term.to_string(), count * (n / (1.0 + df)).ln())
        })
        .collect()
}

/// TF-IDF cosine similarity in [0, 1]. `doc_a`/`doc_b` are raw texts; the
/// corpus supplies document frequencies (idf = ln(N / (1 + df)), which the
/// smoothing can push negative for corpus-wide terms, hence the clamp).
pub fn tfidf_cosine(doc_a: &str, doc_b: &str, corpus: &[Vec<String>]) -> f64 {
    let a = tokenize(doc_a);
    let b = tokenize(doc_b);
    if a == b {
        return 1.0;
    }
    let va = tfidf_vector(&a, corpus);
    let vb = tfidf_vector(&b, corpus);
    let dot: f64 = va
        .iter()
        .filter_map(|(t, wa)| vb.get(t).map(|wb| wa * wb))
        .sum();
    let na: f64 = va.values().map(|w| w * w).sum::<f64>().sqrt();
    let nb: f64 = vb.values().map(|w| w * w).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(0.0, 1.0)
}

/// Cohen's kappa over two equal-length label sequences. Both raters constant
/// and identical (p_e = 1) is defined as 1.0.
pub fn cohen_kappa<S: AsRef<str>>(labels_a: &[S], labels_b: &[S]) -> Result<f64, MetricError> {
    if labels_a.is_empty() || labels_a.len() != labels_b.len() {
        return Err(MetricError::BadLabelSequences);
    }
    let n = labels_a.len() as f64;
    let agree = labels_a
        .iter()
        .zip(labels_b)
        .filter(|(a, b)| a.as_ref() == b.as_ref())
        .count() as f64;
    let p_o = agree / n;
    let mut ca: BTreeMap<&str, f64> = BTreeMap::new();
    let mut cb: BTreeMap<&str, f64> = BTreeMap::new();
    for (a, b) in labels_a.iter().zip(labels_b) {
        *ca.entry(a.as_ref()).or_insert(0.0) += 1.0;
        *cb.entry(b.as_ref()).or_insert(0.0) += 1.0;
    }
    let p_e: f64 = ca
        .iter()
        .map(|(label, a)| (a / n) * (cb.get(label).copied().unwrap_or(0.0) / n))
        .sum();
    if (1.0 - p_e).abs() < 1e-15 {
        return Ok(1.0);
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poetic_density_counts_lexicon_tokens() {
        let lex = PoeticLexicon::new(["river".to_string(), "shadow".to_string()]);
        assert_eq!(poetic_density("the river of shadow", &lex), 0.5);
        assert_eq!(poetic_density("plain words only here", &lex), 0.0);
        assert_eq!(poetic_density("", &lex), 0.0);
    }

    #[test]
    fn poetic_density_is_order_invariant() {
        let lex = PoeticLexicon::new(["river".to_string(), "void".to_string()]);
        let a = poetic_density("river crosses the void tonight", &lex);
        let b = poetic_density("tonight void the crosses river", &lex);
        assert_eq!(a, b);
    }

    #[test]
    fn cv_examples() {
        assert_eq!(coefficient_of_variation(&[4.0, 4.0, 4.0]).unwrap(), 0.0);
        let cv = coefficient_of_variation(&[1.0, 2.0, 3.0]).unwrap();
        assert!((cv - 0.5).abs() < 1e-12);
        assert_eq!(
            coefficient_of_variation(&[1.0]).unwrap_err(),
            MetricError::TooFewSamples
        );
        assert_eq!(
            coefficient_of_variation(&[1.0, -1.0]).unwrap_err(),
            MetricError::ZeroMean
        );
    }

    #[test]
    fn ttr_examples() {
        assert!((ttr("a a a a").unwrap() - 0.25).abs() < 1e-12);
        assert!((ttr("w x y z").unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(ttr("").unwrap_err(), MetricError::EmptyText);
    }

    #[test]
    fn ttr_of_doubled_text() {
        let x = "one two three two";
        let doubled = format!("{x} {x}");
        let distinct = 3.0;
        assert!((ttr(&doubled).unwrap() - distinct / 8.0).abs() < 1e-12);
    }

    #[test]
    fn mattr_periodic_text() {
        // windows of "a b a b a b" at size 2: ab ba ab ba ab, all distinct
        assert!((mattr("a b a b a b", 2).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(mattr("a b", 3).unwrap_err(), MetricError::WindowTooLarge);
    }

    #[test]
    fn entropy_uniform_and_degenerate() {
        let mut v = CountVector::new();
        for i in 0..50 {
            v.insert(format!("c{i}"), 7);
        }
        let h = shannon_entropy(&v, EntropyBase::Bits).unwrap();
        assert!((h - 50f64.log2()).abs() < 1e-9);

        let single: CountVector = [("only".to_string(), 12)].into_iter().collect();
        assert_eq!(shannon_entropy(&single, EntropyBase::Bits).unwrap(), 0.0);

        let zero: CountVector = [("a".to_string(), 0)].into_iter().collect();
        assert_eq!(
            shannon_entropy(&zero, EntropyBase::Bits).unwrap_err(),
            MetricError::ZeroTotal
        );
    }

    #[test]
    fn coverage_examples() {
        let all: Vec<String> = (0..50).map(|i| format!("t{i}")).cycle().take(100).collect();
        assert_eq!(coverage_at_n(&all, 100), 50);
        let constant = vec!["same"; 430];
        assert_eq!(coverage_at_n(&constant, 100), 1);
        // monotone in n
        assert!(coverage_at_n(&all, 430) >= coverage_at_n(&all, 100));
    }

    #[test]
    fn rare_event_rate_examples() {
        let mut v = CountVector::new();
        for i in 0..50 {
            v.insert(format!("t{i}"), 5);
        }
        assert_eq!(rare_event_rate(&v, 3), 0.0);
        v.insert("t0".into(), 2);
        assert!((rare_event_rate(&v, 3) - 0.02).abs() < 1e-12);
        assert_eq!(rare_event_rate(&CountVector::new(), 3), 0.0);
    }

    #[test]
    fn rejection_rate_examples() {
        let stems = vec!["i can't help with".to_string(), "i'm unable to".to_string()];
        let clean: Vec<String> = (0..50).map(|i| format!("answer {i}")).collect();
        assert_eq!(rejection_rate(&clean, &stems), 0.0);
        let mut one = clean.clone();
        one[7] = "I can't help with that request".into();
        assert!((rejection_rate(&one, &stems) - 0.02).abs() < 1e-12);
    }

    #[test]
    fn tfidf_cosine_edges() {
        let corpus = vec![
            tokenize("river shadow"),
            tokenize("river stone"),
            tokenize("river moon"),
        ];
        assert_eq!(tfidf_cosine("river shadow", "river shadow", &corpus), 1.0);
        assert_eq!(tfidf_cosine("river shadow", "other words", &corpus), 0.0);
    }

    #[test]
    fn kappa_examples() {
        let a = vec!["x", "y", "x", "y"];
        assert_eq!(cohen_kappa(&a, &a).unwrap(), 1.0);
        // binary, balanced marginals, complete disagreement
        let r1 = vec!["x", "x", "y", "y"];
        let r2 = vec!["y", "y", "x", "x"];
        assert!((cohen_kappa(&r1, &r2).unwrap() + 1.0).abs() < 1e-12);
    }
}
