//! Shared domain types, their invariants, the canonical record codec, and the
//! virtual clock used by every other module.

mod clock;
mod codec;
mod types;

pub use clock::{SimClock, Timestamp};
pub use codec::{canonical_decode, canonical_encode, decode_lines, encode_lines, CanonicalError};
pub use types::{
    validate_template, StructuralSignature, BehaviouralPrior, DreamNarrative, Episode, Goal, InteractionTemplate,
    Motif, PartitionKey, PolicyAuditRecord, PolicyHead, Polarity, ProvenanceDistribution,
    ProvenanceTrace, RiskLevel, TemplateStatus, Turn, Valence, ValidationReport,
};
