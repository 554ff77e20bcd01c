//! The three verifier machines, instance encoding, and certificate schemas.
//!
//! Builds machine specs from transcribed transition tables (optionally with a
//! sanitization phase prepended), converts SAT/Subset-Sum instances to and
//! from their tape encodings, and exposes the position-wise certificate
//! alphabet that drives floor-edge enumeration during simulation.

use crate::tm::{MachineSpec, ResolverVariant, Rule};
use crate::tok::{t, Tok};
use thiserror::Error;

pub type MachineKind = ResolverVariant;

#[derive(Debug, Error)]
pub enum MachineError {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("invalid certificate: {0}")]
    BadCertificate(String),
    #[error("parse error: {0}")]
    Parse(String),
}

/// A SAT or Subset-Sum problem instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProblemInstance {
    Sat {
        /// Clauses of signed 1-based variable indices (no zeros).
        clauses: Vec<Vec<i64>>,
        /// Variable count; every |literal| lies in [1, k].
        k: u32,
    },
    SubsetSum { target: u64, elements: Vec<u64> },
}

impl ProblemInstance {
    pub fn sat(clauses: Vec<Vec<i64>>) -> Result<Self, MachineError> {
        let mut k = 0i64;
        for clause in &clauses {
            if clause.is_empty() {
                return Err(MachineError::InvalidInstance("empty clause".into()));
            }
            for &lit in clause {
                if lit == 0 {
                    return Err(MachineError::InvalidInstance("zero literal".into()));
                }
                k = k.max(lit.abs());
            }
        }
        if clauses.is_empty() {
            return Err(MachineError::InvalidInstance("no clauses".into()));
        }
        Ok(ProblemInstance::Sat {
            clauses,
            k: k as u32,
        })
    }

    pub fn subset_sum(target: u64, elements: Vec<u64>) -> Self {
        ProblemInstance::SubsetSum { target, elements }
    }
}

/// Where certificate cells live and which symbols each position admits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CertificateSchema {
    pub kind: SchemaKind,
    /// Cell index of the first certificate cell (just after "#").
    pub region_start: i64,
    /// Hard bound on certificate length in cells (terminator included).
    pub max_length: u32,
    /// Terminating symbol, when the format has one (";" for subset-sum).
    pub terminator: Option<Tok>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemaKind {
    /// Fixed-length truth string: exactly `cert_len` cells of T/F.
    SatBool { cert_len: u32 },
    /// "_"-separated decimal numbers closed by ";".
    SubsetDigits,
}

impl CertificateSchema {
    /// Symbols admissible at certificate position `pos` given the symbols
    /// already placed at positions 0..pos. Empty set = no further symbols.
    ///
    /// The subset-sum grammar is one-symbol-lookback: digits may follow a
    /// digit or a separator (or start the string), "_" closes a number so it
    /// needs a preceding digit, and ";" may only follow "_".
    pub fn alphabet_at(&self, pos: u32, prefix: &[Tok]) -> Vec<Tok> {
        debug_assert_eq!(prefix.len() as u32, pos);
        self.alphabet_after(pos, prefix.last().copied())
    }

    /// Same admissibility computed from the previous symbol alone; the
    /// grammars never look further back. `last` must be None exactly at
    /// position 0.
    pub fn alphabet_after(&self, pos: u32, last: Option<Tok>) -> Vec<Tok> {
        debug_assert_eq!(pos == 0, last.is_none());
        if pos >= self.max_length {
            return vec![];
        }
        match self.kind {
            SchemaKind::SatBool { cert_len } => {
                if pos < cert_len {
                    vec![t("T"), t("F")]
                } else {
                    vec![]
                }
            }
            SchemaKind::SubsetDigits => {
                let last = last.as_ref().map(Tok::as_str);
                if last == Some(";") {
                    return vec![];
                }
                let mut out: Vec<Tok> = (0..10u8).map(|d| t(&d.to_string())).collect();
                match last {
                    Some(s) if s.len() == 1 && s.as_bytes()[0].is_ascii_digit() => {
                        out.push(t("_"));
                    }
                    Some("_") => out.push(t(";")),
                    _ => {}
                }
                out
            }
        }
    }
}

/// Spec-level entry point mirroring the schema contract.
pub fn certificate_alphabet(schema: &CertificateSchema, pos: u32, prefix: &[Tok]) -> Vec<Tok> {
    schema.alphabet_at(pos, prefix)
}

/// An instance rendered onto the tape, with region boundaries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedTape {
    pub tokens: Vec<Tok>,
    /// Cells 0..instance_len hold the instance text including "#".
    pub instance_len: usize,
    /// Number of certificate cells present on this tape (0 in simulation
    /// mode, where certificate cells are enumerated lazily).
    pub cert_len: usize,
    pub schema: CertificateSchema,
}

/// Splits a raw tape string into one token per character.
pub fn tokenize_tape(text: &str) -> Vec<Tok> {
    text.chars().map(|c| Tok::ch(c)).collect()
}

/// Renders the instance region (everything up to and including "#").
pub fn render_instance(instance: &ProblemInstance) -> String {
    match instance {
        ProblemInstance::Sat { clauses, .. } => {
            let body = clauses
                .iter()
                .map(|c| {
                    c.iter()
                        .map(|l| l.to_string())
                        .collect::<Vec<_>>()
                        .join("_")
                })
                .collect::<Vec<_>>()
                .join("&");
            format!("{body}_#")
        }
        ProblemInstance::SubsetSum { target, elements } => {
            let body = elements
                .iter()
                .map(|a| a.to_string())
                .collect::<Vec<_>>()
                .join("_");
            format!("{target}_@_{body}#")
        }
    }
}

/// Parses a raw tape string into an instance plus any certificate text that
/// follows "#". Accepts exactly the printed formats: no whitespace tolerance.
pub fn parse_instance(text: &str) -> Result<(ProblemInstance, Option<String>), MachineError> {
    let text = text.trim_end_matches(['\n', '\r']);
    let hash = text
        .find('#')
        .ok_or_else(|| MachineError::Parse("missing '#'".into()))?;
    let (region, cert) = text.split_at(hash);
    let cert = &cert[1..];
    let cert = if cert.is_empty() {
        None
    } else {
        Some(cert.to_string())
    };

    if let Some(at) = region.find('@') {
        let (target_part, rest) = region.split_at(at);
        let target_part = target_part
            .strip_suffix('_')
            .ok_or_else(|| MachineError::Parse("target must end with '_'".into()))?;
        let target: u64 = target_part
            .parse()
            .map_err(|_| MachineError::Parse(format!("bad target {target_part:?}")))?;
        let elems = rest[1..]
            .strip_prefix('_')
            .ok_or_else(|| MachineError::Parse("element list must begin with '_'".into()))?;
        // A trailing separator before "#" is accepted on input but not
        // reproduced when rendering.
        let elems = elems.strip_suffix('_').unwrap_or(elems);
        let mut elements = Vec::new();
        if !elems.is_empty() {
            for part in elems.split('_') {
                let a: u64 = part
                    .parse()
                    .map_err(|_| MachineError::Parse(format!("bad element {part:?}")))?;
                elements.push(a);
            }
        }
        Ok((ProblemInstance::SubsetSum { target, elements }, cert))
    } else {
        let region = region
            .strip_suffix('_')
            .ok_or_else(|| MachineError::Parse("formula must end with '_' before '#'".into()))?;
        let mut clauses = Vec::new();
        for clause_text in region.split('&') {
            let mut clause = Vec::new();
            for lit_text in clause_text.split('_') {
                if lit_text.is_empty() {
                    return Err(MachineError::Parse("empty literal".into()));
                }
                let lit: i64 = lit_text
                    .parse()
                    .map_err(|_| MachineError::Parse(format!("bad literal {lit_text:?}")))?;
                clause.push(lit);
            }
            clauses.push(clause);
        }
        let instance = ProblemInstance::sat(clauses)?;
        Ok((instance, cert))
    }
}

fn schema_for(instance: &ProblemInstance, region_start: i64) -> CertificateSchema {
    match instance {
        ProblemInstance::Sat { k, .. } => CertificateSchema {
            kind: SchemaKind::SatBool { cert_len: *k },
            region_start,
            max_length: *k,
            terminator: None,
        },
        ProblemInstance::SubsetSum { elements, .. } => {
            // The element region between "@" and "#" (leading "_" included)
            // bounds the certificate; one extra cell fits the ";" after a
            // full-subset listing.
            let region_len: usize = 1 + elements
                .iter()
                .map(|a| a.to_string().len() + 1)
                .sum::<usize>()
                .saturating_sub(1)
                .max(0);
            CertificateSchema {
                kind: SchemaKind::SubsetDigits,
                region_start,
                max_length: region_len as u32 + 1,
                terminator: Some(t(";")),
            }
        }
    }
}

/// Lays the instance (and optionally a certificate) onto tape tokens.
pub fn encode_instance(
    instance: &ProblemInstance,
    certificate: Option<&str>,
) -> Result<EncodedTape, MachineError> {
    let prefix = render_instance(instance);
    let instance_len = prefix.chars().count();
    let schema = schema_for(instance, instance_len as i64);
    let mut tokens = tokenize_tape(&prefix);
    let mut cert_len = 0;
    if let Some(cert) = certificate {
        let cert_tokens = tokenize_tape(cert);
        validate_certificate(&schema, &cert_tokens)?;
        cert_len = cert_tokens.len();
        tokens.extend(cert_tokens);
    }
    Ok(EncodedTape {
        tokens,
        instance_len,
        cert_len,
        schema,
    })
}

fn validate_certificate(schema: &CertificateSchema, cert: &[Tok]) -> Result<(), MachineError> {
    for (pos, &sym) in cert.iter().enumerate() {
        let allowed = schema.alphabet_at(pos as u32, &cert[..pos]);
        if !allowed.contains(&sym) {
            return Err(MachineError::BadCertificate(format!(
                "symbol {sym} not admissible at certificate position {pos}"
            )));
        }
    }
    Ok(())
}

const R: i32 = 1;
const L: i32 = -1;

fn sat_id_rules() -> Vec<Rule> {
    vec![
        Rule::new("Check", "_", "Check", "_", R),
        Rule::new("Check", "-", "Not", "-", R),
        Rule::new("Check", "D", "Inc.D", "?", R),
        Rule::new("Not", "D", "Inc.D", "!", R),
        Rule::new("Skip", "&", "Check", "_", R),
        Rule::new("Skip", "#", "Accept", "_", R),
        Rule::new("Skip", "*", "Skip", "_", R),
        Rule::new("Check", "&", "Reject", "_", R),
        Rule::new("Check", "#", "Reject", "_", R),
        Rule::new("Inc.N", "_", "Forward.N", "_", R),
        Rule::new("Inc.N", "&", "Forward.N", "&", R),
        Rule::new("Inc.N", "#", "Dec.(N-1)", "#", R),
        Rule::new("Inc.N", "D", "Inc.(10N+D)", "_", R),
        Rule::new("Forward.N", "*", "Forward.N", "*", R),
        Rule::new("Forward.N", "#", "Dec.(N-1)", "#", R),
        Rule::new("Dec.N", "T", "Dec.(N-1)", "T", R),
        Rule::new("Dec.N", "F", "Dec.(N-1)", "F", R),
        Rule::new("Dec.0", "T", "Backward.T", "T", L),
        Rule::new("Dec.0", "F", "Backward.F", "F", L),
        Rule::new("Backward.T", "*", "Backward.T", "*", L),
        Rule::new("Backward.F", "*", "Backward.F", "*", L),
        Rule::new("Backward.T", "?", "Skip", "_", R),
        Rule::new("Backward.F", "?", "Check", "_", R),
        Rule::new("Backward.T", "!", "Check", "_", R),
        Rule::new("Backward.F", "!", "Skip", "_", R),
    ]
}

fn sat_fixed_rules() -> Vec<Rule> {
    vec![
        Rule::new("Check.S", "_", "Check.S", "_", R),
        Rule::new("Check.S", "-", "CheckNot.S", "-", R),
        Rule::new("Check.S", "0", "Unknown.S", "_", R),
        Rule::new("Check.S", "D", "UnknownTerm.S", "D", R),
        Rule::new("Check.S", "T", "Skip.S", "T", R),
        Rule::new("Check.S", "F", "Check.S", "F", R),
        Rule::new("Check.S", "&", "Reject", "_", R),
        Rule::new("Check.S", "#", "Reject", "_", R),
        Rule::new("CheckNot.S", "_", "CheckNot.S", "_", R),
        Rule::new("CheckNot.S", "T", "Check.S", "T", R),
        Rule::new("CheckNot.S", "F", "Skip.S", "F", R),
        Rule::new("CheckNot.S", "D", "UnknownTerm.S", "D", R),
        Rule::new("CheckNot.S", "0", "Unknown.S", "_", R),
        Rule::new("Unknown.S", "_", "Unknown.S", "_", R),
        Rule::new("Unknown.S", "0", "Unknown.S", "_", R),
        Rule::new("Unknown.S", "D", "UnknownTerm.S", "D", R),
        Rule::new("Unknown.S", "T", "Skip.S", "T", R),
        Rule::new("Unknown.S", "F", "Unknown.S", "F", R),
        Rule::new("Unknown.S", "-", "UnknownNot.S", "-", R),
        Rule::new("Unknown.S", "&", "Check.Free", "&", R),
        Rule::new("Unknown.S", "#", "Fetch", "#", R),
        Rule::new("UnknownNot.S", "_", "UnknownNot.S", "_", R),
        Rule::new("UnknownNot.S", "T", "Unknown.S", "T", R),
        Rule::new("UnknownNot.S", "F", "Skip.S", "F", R),
        Rule::new("UnknownNot.S", "D", "UnknownTerm.S", "D", R),
        Rule::new("UnknownNot.S", "0", "Unknown.S", "_", R),
        Rule::new("UnknownTerm.S", "D", "UnknownTerm.S", "D", R),
        Rule::new("UnknownTerm.S", "_", "Unknown.S", "_", R),
        Rule::new("UnknownTerm.S", "&", "Check.Free", "&", R),
        Rule::new("UnknownTerm.S", "#", "Fetch", "#", R),
        Rule::new("Skip.S", "*", "Skip.S", "_", R),
        Rule::new("Skip.Free", "&", "Check.Free", "&", R),
        Rule::new("Skip.Free", "#", "Fetch", "#", R),
        Rule::new("Skip.Forwarded", "&", "Check.Forwarded", "&", R),
        Rule::new("Skip.Forwarded", "#", "Accept", "#", R),
        Rule::new("Fetch", "_", "Fetch", "_", R),
        Rule::new("Fetch", "T", "Backward.B", "_", L),
        Rule::new("Fetch", "F", "Backward.B", "_", L),
        Rule::new("Backward.B", "*", "Backward.B", "*", L),
        Rule::new("Backward.B", "1", "BackwardFrom1.B", "0", L),
        Rule::new("Backward.B", "0", "Borrow.B", "9", L),
        Rule::new("Backward.B", "D", "BackwardInTerm.B", "D-1", L),
        Rule::new("Backward.B", "eps", "Check.Forwarded", "eps", R),
        Rule::new("Borrow.B", "0", "Borrow.B", "9", L),
        Rule::new("Borrow.B", "D", "BackwardInTerm.B", "D-1", L),
        Rule::new("BackwardInTerm.B", "D", "BackwardInTerm.B", "D", L),
        Rule::new("BackwardInTerm.B", "_", "Backward.B", "_", L),
        Rule::new("BackwardInTerm.B", "&", "Backward.B", "&", L),
        Rule::new("BackwardInTerm.B", "-", "Backward.B", "-", L),
        Rule::new("BackwardInTerm.B", "eps", "Check.Forwarded", "eps", R),
        Rule::new("BackwardFrom1.B", "D", "BackwardInTerm.B", "D", L),
        Rule::new("BackwardFrom1.B", "_", "Assign.B", "_", R),
        Rule::new("BackwardFrom1.B", "-", "Assign.B", "-", R),
        Rule::new("BackwardFrom1.B", "&", "Assign.B", "&", R),
        Rule::new("BackwardFrom1.B", "eps", "Assign.B", "eps", R),
        Rule::new("Assign.B", "0", "Backward.B", "B", L),
    ]
}

fn subset_sum_rules() -> Vec<Rule> {
    vec![
        Rule::new("Forward", "#", "FindDigitToMatch", "#", R),
        Rule::new("Forward", "*", "Forward", "*", R),
        Rule::new("FindDigitToMatch", "~", "FindDigitToMatch", "~", R),
        Rule::new("FindDigitToMatch", "M", "BackwardToMatch.M", "~", L),
        Rule::new("FindDigitToMatch", "(D)", "FindDigitToMatch", "(D)", R),
        Rule::new("FindDigitToMatch", "_", "BackwardToCheckMatch", "~", L),
        Rule::new("FindDigitToMatch", ";", "BackwardToCheckSum", ";", L),
        Rule::new("BackwardToMatch.M", "D", "BackwardToMatch.M", "D", L),
        Rule::new("BackwardToMatch.M", "|", "BackwardToMatch.M", "|", L),
        Rule::new("BackwardToMatch.M", "_", "MatchPosition.M", "|", R),
        Rule::new("BackwardToMatch.M", "~", "BackwardToMatch.M", "~", L),
        Rule::new("BackwardToMatch.M", "#", "BackwardToMatch.M", "#", L),
        Rule::new("BackwardToMatch.M", "(D)", "MatchPosition.M", "D", R),
        Rule::new("MatchPosition.M", "|", "BackwardToMatch.M", "|", L),
        Rule::new("MatchPosition.M", "~", "BackwardToMatch.M", "~", L),
        Rule::new("MatchPosition.M", "M", "BackwardToMatch.M", "(M)", L),
        Rule::new("MatchPosition.M", "D", "BackwardToMatch.M", "D", L),
        Rule::new("MatchPosition.M", "#", "BackwardToMatch.M", "#", L),
        Rule::new("BackwardToMatch.M", "@", "CheckForward", "@", L),
        Rule::new("CheckForward", "(D)", "Forward", "(D)", R),
        Rule::new("CheckForward", "*", "CheckForward", "*", R),
        Rule::new("CheckForward", "#", "Reject", "_", L),
        Rule::new("BackwardToCheckMatch", "#", "MatchedDigits", "#", L),
        Rule::new("BackwardToCheckMatch", "|", "MatchedDigits", "_", L),
        Rule::new("BackwardToCheckMatch", "(D)", "BackwardToCheckMatch", "D", L),
        Rule::new("BackwardToCheckMatch", "*", "BackwardToCheckMatch", "*", L),
        Rule::new("BackwardToCheckMatch", "@", "Reject", "_", L),
        Rule::new("MatchedDigits", "(M)", "BackwardToSubtract.M", "$", L),
        Rule::new("MatchedDigits", "D", "BackwardToCheckMatch", "D", L),
        Rule::new("MatchedDigits", "~", "BackwardToCheckMatch", "~", L),
        Rule::new("MatchedDigits", "|", "MatchedDigits", "_", L),
        Rule::new("BackwardToSubtract.M", "@", "SumArea.M", "@", L),
        Rule::new("BackwardToSubtract.M", "*", "BackwardToSubtract.M", "*", L),
        Rule::new("SumArea.M", "D", "SumArea.M", "D", L),
        Rule::new("SumArea.M", "|", "SumArea.M", "|", L),
        Rule::new("SumArea.M", "_", "Subtract.M", "|", L),
        Rule::new("SumArea.M", "(D)", "Subtract.M", "D", L),
        Rule::new("Subtract.M", "D", "Borrow.B", "(D)-(M)", L),
        Rule::new("Borrow.0", "*", "ReturnToErase", "*", R),
        Rule::new("Borrow.1", "0", "Borrow.1", "9", L),
        Rule::new("Borrow.1", "D", "ReturnToErase", "D-1", R),
        Rule::new("Borrow.1", "eps", "Reject", "_", L),
        Rule::new("ReturnToErase", "$", "EraseNext", "$", L),
        Rule::new("ReturnToErase", "*", "ReturnToErase", "*", R),
        Rule::new("EraseNext", "M", "BackwardToSubtract.M", "$", L),
        Rule::new("EraseNext", "|", "ConvertErased", "_", R),
        Rule::new("ConvertErased", "$", "ConvertErased", "~", R),
        Rule::new("ConvertErased", "*", "RestoreMarks", "*", L),
        Rule::new("RestoreMarks", "(D)", "RestoreMarks", "D", L),
        Rule::new("RestoreMarks", "|", "RestoreMarks", "_", L),
        Rule::new("RestoreMarks", "@", "RestoreSum", "@", L),
        Rule::new("RestoreMarks", "*", "RestoreMarks", "*", L),
        Rule::new("RestoreSum", "(D)", "RestoreSum", "D", L),
        Rule::new("RestoreSum", "|", "RestoreSum", "_", L),
        Rule::new("RestoreSum", "eps", "Forward", "eps", R),
        Rule::new("RestoreSum", "*", "RestoreSum", "*", L),
        Rule::new("BackwardToCheckSum", "@", "CheckSum", "@", L),
        Rule::new("BackwardToCheckSum", "(D)", "Reject", "(D)", L),
        Rule::new("BackwardToCheckSum", "*", "BackwardToCheckSum", "*", L),
        Rule::new("CheckSum", "_", "CheckSum", "_", L),
        Rule::new("CheckSum", "0", "CheckSum", "0", L),
        Rule::new("CheckSum", "eps", "Accept", "_", L),
        Rule::new("CheckSum", "*", "Reject", "_", L),
    ]
}

/// Sanitization-phase rows: scan to "#", validate the certificate region,
/// rewind, and enter the main routine at `entry`.
fn sanitizer_rules(kind: MachineKind, entry: &str) -> Vec<Rule> {
    let mut rows = vec![
        Rule::new("InputCheck", "#", "CertificateCheck", "#", R),
        Rule::new("InputCheck", "*", "InputCheck", "*", R),
    ];
    match kind {
        MachineKind::SatId | MachineKind::SatFixed => {
            rows.push(Rule::new("CertificateCheck", "T", "CertificateCheck", "T", R));
            rows.push(Rule::new("CertificateCheck", "F", "CertificateCheck", "F", R));
            rows.push(Rule::new("CertificateCheck", "eps", "BackToBeginning", "eps", L));
            rows.push(Rule::new("CertificateCheck", "*", "Reject", "_", R));
        }
        MachineKind::SubsetSum => {
            rows.push(Rule::new("CertificateCheck", "D", "CertificateCheck", "D", R));
            rows.push(Rule::new("CertificateCheck", "_", "CertificateCheck", "_", R));
            rows.push(Rule::new("CertificateCheck", ";", "BackToBeginning", ";", L));
            rows.push(Rule::new("CertificateCheck", "*", "Reject", "_", R));
        }
    }
    rows.push(Rule::new("BackToBeginning", "*", "BackToBeginning", "*", L));
    rows.push(Rule::new("BackToBeginning", "eps", entry, "eps", R));
    rows
}

fn digits() -> impl Iterator<Item = Tok> {
    (0..10u8).map(|d| t(&d.to_string()))
}

fn sat_alphabet(with_markers: bool) -> Vec<Tok> {
    let mut a: Vec<Tok> = digits().collect();
    for s in ["-", "&", "_", "#", ";", "T", "F"] {
        a.push(t(s));
    }
    if with_markers {
        a.push(t("?"));
        a.push(t("!"));
    }
    a.push(t("eps"));
    a
}

fn subset_sum_alphabet() -> Vec<Tok> {
    let mut a: Vec<Tok> = digits().collect();
    for s in ["_", "@", "#", ";", "~", "|", "$"] {
        a.push(t(s));
    }
    a.extend((0..10u8).map(Tok::circled));
    a.push(t("eps"));
    a
}

/// Builds one of the three verifier machines for `instance`. With `sanitize`
/// set, the certificate-validation phase is prepended and becomes the entry
/// point; it hands control to the main routine's usual initial state.
pub fn build_machine(
    kind: MachineKind,
    instance: &ProblemInstance,
    sanitize: bool,
) -> Result<MachineSpec, MachineError> {
    let (rules, entry, param_bound, alphabet) = match kind {
        MachineKind::SatId => {
            let ProblemInstance::Sat { k, .. } = instance else {
                return Err(MachineError::InvalidInstance(
                    "sat-id machine needs a SAT instance".into(),
                ));
            };
            if *k == 0 {
                return Err(MachineError::InvalidInstance(
                    "sat-id machine needs k >= 1".into(),
                ));
            }
            (sat_id_rules(), "Check", Some(*k), sat_alphabet(true))
        }
        MachineKind::SatFixed => {
            if !matches!(instance, ProblemInstance::Sat { .. }) {
                return Err(MachineError::InvalidInstance(
                    "sat-fixed machine needs a SAT instance".into(),
                ));
            }
            (sat_fixed_rules(), "Check.Forwarded", None, sat_alphabet(false))
        }
        MachineKind::SubsetSum => {
            if !matches!(instance, ProblemInstance::SubsetSum { .. }) {
                return Err(MachineError::InvalidInstance(
                    "subset-sum machine needs a subset-sum instance".into(),
                ));
            }
            (subset_sum_rules(), "Forward", None, subset_sum_alphabet())
        }
    };
    let sanitizer = if sanitize {
        sanitizer_rules(kind, entry)
    } else {
        vec![]
    };
    let q_init = if sanitize { t("InputCheck") } else { t(entry) };
    Ok(MachineSpec::new(
        kind,
        rules,
        sanitizer,
        q_init,
        t("Accept"),
        t("Reject"),
        param_bound,
        alphabet,
    ))
}

/// The symbolic tables as printed, independent of any instance: used by the
/// table-dump interface. Returns (main rows, sanitizer rows).
pub fn reference_tables(kind: MachineKind) -> (Vec<Rule>, Vec<Rule>) {
    let (rules, entry) = match kind {
        MachineKind::SatId => (sat_id_rules(), "Check"),
        MachineKind::SatFixed => (sat_fixed_rules(), "Check.Forwarded"),
        MachineKind::SubsetSum => (subset_sum_rules(), "Forward"),
    };
    (rules, sanitizer_rules(kind, entry))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{default_budget, eval_cnf, subset_sum_solve, OracleWitness};
    use crate::tm::{resolve_transition, run_direct, Decision};

    fn sat_instance(clauses: &[&[i64]]) -> ProblemInstance {
        ProblemInstance::sat(clauses.iter().map(|c| c.to_vec()).collect()).unwrap()
    }

    #[test]
    fn resolver_examples_sat_id() {
        let inst = sat_instance(&[&[1, 2, 3, 4, 5, 6, 7, 8, 9, 10]]);
        let spec = build_machine(MachineKind::SatId, &inst, false).unwrap();
        assert_eq!(
            resolve_transition(&spec, t("Check"), t("-")),
            (t("Not"), t("-"), 1)
        );
        assert_eq!(
            resolve_transition(&spec, t("Inc.7"), t("&")),
            (t("Forward.7"), t("&"), 1)
        );
        // Decimal expansion overflowing k resolves to the +1 rejection.
        assert_eq!(
            resolve_transition(&spec, t("Inc.7"), t("5")),
            (t("Reject"), t("_"), 1)
        );
        // In-range expansion: 10*1+0 = 10 <= k.
        assert_eq!(
            resolve_transition(&spec, t("Inc.1"), t("0")),
            (t("Inc.10"), t("_"), 1)
        );
        assert_eq!(
            resolve_transition(&spec, t("Dec.0"), t("T")),
            (t("Backward.T"), t("T"), -1)
        );
        assert_eq!(
            resolve_transition(&spec, t("Dec.3"), t("F")),
            (t("Dec.2"), t("F"), 1)
        );
    }

    #[test]
    fn resolver_examples_sat_fixed() {
        let inst = sat_instance(&[&[1]]);
        let spec = build_machine(MachineKind::SatFixed, &inst, false).unwrap();
        assert_eq!(
            resolve_transition(&spec, t("Skip.Forwarded"), t("#")),
            (t("Accept"), t("#"), 1)
        );
        // Fetch erases the certificate symbol and instantiates the truth
        // parameter from it.
        assert_eq!(
            resolve_transition(&spec, t("Fetch"), t("T")),
            (t("Backward.T"), t("_"), -1)
        );
        // The parameter survives reads that are not T/F...
        assert_eq!(
            resolve_transition(&spec, t("Backward.T"), t("#")),
            (t("Backward.T"), t("#"), -1)
        );
        // ...including borrows and in-term scans...
        assert_eq!(
            resolve_transition(&spec, t("Backward.F"), t("0")),
            (t("Borrow.F"), t("9"), -1)
        );
        assert_eq!(
            resolve_transition(&spec, t("Borrow.F"), t("7")),
            (t("BackwardInTerm.F"), t("6"), -1)
        );
        // ...and is written out at the assignment site.
        assert_eq!(
            resolve_transition(&spec, t("Assign.F"), t("0")),
            (t("Backward.F"), t("F"), -1)
        );
        // Scan-mode propagation through .S rows.
        assert_eq!(
            resolve_transition(&spec, t("Check.Forwarded"), t("0")),
            (t("Unknown.Forwarded"), t("_"), 1)
        );
        assert_eq!(
            resolve_transition(&spec, t("Skip.Free"), t("&")),
            (t("Check.Free"), t("&"), 1)
        );
    }

    #[test]
    fn resolver_examples_subset_sum() {
        let inst = ProblemInstance::subset_sum(3, vec![1, 3, 5]);
        let spec = build_machine(MachineKind::SubsetSum, &inst, false).unwrap();
        assert_eq!(
            resolve_transition(&spec, t("Subtract.3"), t("1")),
            (t("Borrow.1"), t("(8)"), -1)
        );
        assert_eq!(
            resolve_transition(&spec, t("Subtract.3"), t("5")),
            (t("Borrow.0"), t("(2)"), -1)
        );
        // The M class captures the digit read in an unparameterized state.
        assert_eq!(
            resolve_transition(&spec, t("FindDigitToMatch"), t("7")),
            (t("BackwardToMatch.7"), t("~"), -1)
        );
        // Exact-match bail: stored digit differs from the read digit, so the
        // generic digit row applies instead.
        assert_eq!(
            resolve_transition(&spec, t("MatchPosition.4"), t("7")),
            (t("BackwardToMatch.4"), t("7"), -1)
        );
        assert_eq!(
            resolve_transition(&spec, t("MatchPosition.4"), t("4")),
            (t("BackwardToMatch.4"), t("(4)"), -1)
        );
        // Circled capture via the (M) class.
        assert_eq!(
            resolve_transition(&spec, t("MatchedDigits"), t("(6)")),
            (t("BackwardToSubtract.6"), t("$"), -1)
        );
        assert_eq!(
            resolve_transition(&spec, t("Borrow.1"), t("0")),
            (t("Borrow.1"), t("9"), -1)
        );
        assert_eq!(
            resolve_transition(&spec, t("Borrow.1"), t("4")),
            (t("ReturnToErase"), t("3"), 1)
        );
    }

    fn run_tape(kind: MachineKind, tape: &str) -> Decision {
        let (instance, _) = parse_instance(tape).unwrap();
        let spec = build_machine(kind, &instance, false).unwrap();
        let tokens = tokenize_tape(tape);
        run_direct(&spec, &tokens, default_budget(tokens.len())).decision
    }

    #[test]
    fn run_smoke_sat_fixed() {
        assert_eq!(
            run_tape(MachineKind::SatFixed, "1_2_3_#TFF"),
            Decision::Accept
        );
        assert_eq!(
            run_tape(MachineKind::SatFixed, "1_2_3_#FFF"),
            Decision::Reject
        );
    }

    #[test]
    fn run_smoke_sat_fixed_malformed() {
        // "1_&#T" parses as no valid instance, so drive the machine on the
        // raw tape directly: Check.S reading '&' rejects.
        let inst = sat_instance(&[&[1]]);
        let spec = build_machine(MachineKind::SatFixed, &inst, false).unwrap();
        let tokens = tokenize_tape("1_&#T");
        let run = run_direct(&spec, &tokens, default_budget(tokens.len()));
        assert_eq!(run.decision, Decision::Reject);
    }

    #[test]
    fn run_smoke_subset_sum() {
        assert_eq!(
            run_tape(MachineKind::SubsetSum, "3_@_1_3_5#3_;"),
            Decision::Accept
        );
        assert_eq!(
            run_tape(MachineKind::SubsetSum, "4_@_1_3_5#3_;"),
            Decision::Reject
        );
        assert_eq!(
            run_tape(MachineKind::SubsetSum, "4_@_1_3_5#1_3_;"),
            Decision::Accept
        );
        assert_eq!(
            run_tape(MachineKind::SubsetSum, "9_@_1_3_5#1_3_5_;"),
            Decision::Accept
        );
        // A trailing separator before "#" is also a valid encoding.
        assert_eq!(
            run_tape(MachineKind::SubsetSum, "3_@_1_3_5_#3_;"),
            Decision::Accept
        );
    }

    #[test]
    fn run_smoke_subset_sum_multidigit() {
        assert_eq!(
            run_tape(MachineKind::SubsetSum, "20_@_20#20_;"),
            Decision::Accept
        );
        assert_eq!(
            run_tape(MachineKind::SubsetSum, "21_@_20#20_;"),
            Decision::Reject
        );
        assert_eq!(
            run_tape(MachineKind::SubsetSum, "32_@_19_13#13_19_;"),
            Decision::Accept
        );
        assert_eq!(
            run_tape(MachineKind::SubsetSum, "26_@_13_13#13_13_;"),
            Decision::Accept
        );
        assert_eq!(
            run_tape(MachineKind::SubsetSum, "13_@_13_13#13_;"),
            Decision::Accept
        );
        // 5 - 13 underflows and must reject.
        assert_eq!(
            run_tape(MachineKind::SubsetSum, "5_@_13#13_;"),
            Decision::Reject
        );
        // 1 matches no complete element (12 only shares a prefix).
        assert_eq!(
            run_tape(MachineKind::SubsetSum, "1_@_12#1_;"),
            Decision::Reject
        );
        // 100 - 1 exercises borrow propagation across zeros.
        assert_eq!(
            run_tape(MachineKind::SubsetSum, "100_@_1_99#1_99_;"),
            Decision::Accept
        );
    }

    /// Reference acceptance condition for a selection run: the listed numbers
    /// form a sub-multiset of the instance elements and add up to the target.
    fn is_valid_selection(target: u64, elements: &[u64], cert: &[u64]) -> bool {
        let mut pool = elements.to_vec();
        for c in cert {
            match pool.iter().position(|e| e == c) {
                Some(i) => {
                    pool.swap_remove(i);
                }
                None => return false,
            }
        }
        cert.iter().sum::<u64>() == target
    }

    #[test]
    fn subset_sum_machine_agrees_with_multiset_semantics() {
        use rand::seq::SliceRandom;
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5e1ec7);
        for round in 0..300 {
            let k = rng.gen_range(1..=4);
            let elements: Vec<u64> = (0..k).map(|_| rng.gen_range(1..=30)).collect();
            // Start from a random sub-multiset, then occasionally perturb a
            // value or the target so both outcomes stay well represented.
            let mut cert: Vec<u64> = Vec::new();
            for &v in &elements {
                if rng.gen_bool(0.6) {
                    cert.push(if rng.gen_bool(0.15) {
                        rng.gen_range(1..=30)
                    } else {
                        v
                    });
                }
            }
            if cert.is_empty() {
                cert.push(rng.gen_range(1..=30));
            }
            cert.shuffle(&mut rng);
            let target: u64 = if rng.gen_bool(0.7) {
                cert.iter().sum()
            } else {
                rng.gen_range(1..=60)
            };
            let expected = if is_valid_selection(target, &elements, &cert) {
                Decision::Accept
            } else {
                Decision::Reject
            };
            let join = |xs: &[u64]| {
                xs.iter()
                    .map(u64::to_string)
                    .collect::<Vec<_>>()
                    .join("_")
            };
            let tape = format!("{}_@_{}#{}_;", target, join(&elements), join(&cert));
            assert_eq!(
                run_tape(MachineKind::SubsetSum, &tape),
                expected,
                "round {round}: tape {tape}"
            );
        }
    }

    #[test]
    fn subset_sum_machine_accepts_oracle_witnesses() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x817e55);
        for _ in 0..120 {
            let k = rng.gen_range(1..=5);
            let elements: Vec<u64> = (0..k).map(|_| rng.gen_range(1..=25)).collect();
            let target = rng.gen_range(1..=80);
            let solved = subset_sum_solve(target, &elements);
            if let Some(OracleWitness::Subset(values)) = solved.witness {
                assert!(!values.is_empty(), "positive elements, positive target");
                let join = |xs: &[u64]| {
                    xs.iter()
                        .map(u64::to_string)
                        .collect::<Vec<_>>()
                        .join("_")
                };
                let tape = format!("{}_@_{}#{}_;", target, join(&elements), join(&values));
                assert_eq!(
                    run_tape(MachineKind::SubsetSum, &tape),
                    Decision::Accept,
                    "tape {tape}"
                );
            }
        }
    }

    #[test]
    fn run_smoke_sat_id() {
        let inst = sat_instance(&[&[1, 2], &[-1, 2]]);
        let spec = build_machine(MachineKind::SatId, &inst, false).unwrap();
        for (cert, expect) in [
            ("TT", Decision::Accept),
            ("TF", Decision::Reject),
            ("FT", Decision::Accept),
            ("FF", Decision::Reject),
        ] {
            let tape = encode_instance(&inst, Some(cert)).unwrap();
            let run = run_direct(&spec, &tape.tokens, default_budget(tape.tokens.len()));
            assert_eq!(run.decision, expect, "cert {cert}");
        }
    }

    #[test]
    fn sat_fixed_matches_cnf_evaluator_on_small_formulas() {
        // Mixed variable orderings exercise truth-parameter propagation
        // across already-substituted cells.
        let formulas: &[&[&[i64]]] = &[
            &[&[2, 1], &[1, 2]],
            &[&[-2, 1], &[2, -1]],
            &[&[3], &[-1, 2], &[2, 3, -1]],
            &[&[1], &[-1]],
            &[&[-3, -2, -1]],
        ];
        for clauses in formulas {
            let inst = sat_instance(clauses);
            let ProblemInstance::Sat { clauses: cl, k } = &inst else {
                unreachable!()
            };
            let spec = build_machine(MachineKind::SatFixed, &inst, false).unwrap();
            for word in 0..(1u32 << k) {
                let assignment: Vec<bool> =
                    (0..*k).map(|j| (word >> (k - 1 - j)) & 1 == 0).collect();
                let cert: String = assignment
                    .iter()
                    .map(|&b| if b { 'T' } else { 'F' })
                    .collect();
                let tape = encode_instance(&inst, Some(&cert)).unwrap();
                let run = run_direct(&spec, &tape.tokens, default_budget(tape.tokens.len()));
                let expected = eval_cnf(
                    &cl.iter()
                        .map(|c| c.iter().map(|&l| l as i32).collect())
                        .collect::<Vec<Vec<i32>>>(),
                    &assignment,
                );
                assert_eq!(
                    run.decision == Decision::Accept,
                    expected,
                    "formula {clauses:?} cert {cert}"
                );
            }
        }
    }

    #[test]
    fn encode_matches_printed_formats() {
        let sat = sat_instance(&[&[1, 2, 3], &[-9, 10, 1]]);
        assert_eq!(render_instance(&sat), "1_2_3&-9_10_1_#");
        let ss = ProblemInstance::subset_sum(1, vec![1, 3, 5, 7, 10, 20]);
        let tape = encode_instance(&ss, Some("3_5_7_;")).unwrap();
        let text: String = tape.tokens.iter().map(|t| t.to_string()).collect();
        assert_eq!(text, "1_@_1_3_5_7_10_20#3_5_7_;");
    }

    #[test]
    fn parse_round_trips() {
        for text in [
            "1_2_3&-9_10_1_#",
            "-5_3_-1_#",
            "120_@_19_19_47_14_34_120_43_12_22#",
            "1_@_1_3_5_7_10_20#",
        ] {
            let (inst, cert) = parse_instance(text).unwrap();
            assert_eq!(cert, None);
            assert_eq!(render_instance(&inst), text);
        }
        let (inst, cert) = parse_instance("3_@_1_3_5#3_;").unwrap();
        assert_eq!(inst, ProblemInstance::subset_sum(3, vec![1, 3, 5]));
        assert_eq!(cert.as_deref(), Some("3_;"));
    }

    #[test]
    fn certificate_alphabet_follows_grammar() {
        let sat = sat_instance(&[&[1, -2]]);
        let tape = encode_instance(&sat, None).unwrap();
        assert_eq!(tape.schema.alphabet_at(0, &[]), vec![t("T"), t("F")]);
        assert_eq!(tape.schema.alphabet_at(1, &[t("T")]), vec![t("T"), t("F")]);
        assert_eq!(tape.schema.alphabet_at(2, &[t("T"), t("F")]), vec![]);

        let ss = ProblemInstance::subset_sum(3, vec![1, 3, 5]);
        let tape = encode_instance(&ss, None).unwrap();
        let digits_only = tape.schema.alphabet_at(0, &[]);
        assert_eq!(digits_only.len(), 10);
        assert!(digits_only.iter().all(|s| s.digit().is_some()));
        let after_digit = tape.schema.alphabet_at(1, &[t("3")]);
        assert!(after_digit.contains(&t("_")));
        assert!(!after_digit.contains(&t(";")));
        let after_sep = tape.schema.alphabet_at(2, &[t("3"), t("_")]);
        assert!(after_sep.contains(&t(";")));
        assert!(!after_sep.contains(&t("_")));
        let done = tape.schema.alphabet_at(3, &[t("3"), t("_"), t(";")]);
        assert!(done.is_empty());
    }

    #[test]
    fn sanitizer_agrees_on_well_formed_and_rejects_malformed() {
        let inst = sat_instance(&[&[1, 2], &[-2, 1]]);
        let plain = build_machine(MachineKind::SatFixed, &inst, false).unwrap();
        let sanitized = build_machine(MachineKind::SatFixed, &inst, true).unwrap();
        assert_eq!(sanitized.q_init, t("InputCheck"));
        for cert in ["TT", "TF", "FT", "FF"] {
            let tape = encode_instance(&inst, Some(cert)).unwrap();
            let a = run_direct(&plain, &tape.tokens, default_budget(tape.tokens.len()));
            let b = run_direct(&sanitized, &tape.tokens, 4 * default_budget(tape.tokens.len()));
            assert_eq!(a.decision, b.decision, "cert {cert}");
        }
        // A malformed certificate symbol rejects during CertificateCheck.
        let mut tokens = tokenize_tape("1_2&-2_1_#");
        tokens.push(t("T"));
        tokens.push(t("x"));
        let run = run_direct(&sanitized, &tokens, 4 * default_budget(tokens.len()));
        assert_eq!(run.decision, Decision::Reject);
        assert!(run
            .trace
            .iter()
            .any(|s| s.state == t("CertificateCheck") && s.next_state == t("Reject")));
    }

    #[test]
    fn build_rejects_k_zero() {
        let inst = ProblemInstance::Sat {
            clauses: vec![],
            k: 0,
        };
        assert!(build_machine(MachineKind::SatId, &inst, false).is_err());
    }
}
