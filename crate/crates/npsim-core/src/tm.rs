//! Single-tape deterministic Turing machines with symbolic transition rules.
//!
//! Rule tables are stored exactly as written — states like `Inc.N` and read
//! classes like `D` or `(M)` are patterns, not concrete entries. Three
//! resolver variants instantiate them at lookup time: one with k-bounded
//! integer state families, one with scan-mode/truth-value suffixes, and one
//! with digit capture plus circled-digit arithmetic.

use crate::tok::{t, Tok};
use std::collections::BTreeMap;
use std::fmt;

/// Head movement: −1 (left) or +1 (right).
pub type Move = i32;

/// One symbolic transition-table row, kept in table order for dumps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rule {
    pub state: Tok,
    pub read: Tok,
    pub next: Tok,
    pub write: Tok,
    pub mv: Move,
}

impl Rule {
    pub fn new(state: &str, read: &str, next: &str, write: &str, mv: Move) -> Self {
        debug_assert!(mv == 1 || mv == -1);
        Rule {
            state: t(state),
            read: t(read),
            next: t(next),
            write: t(write),
            mv,
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{}\t{}\t{}\t{:+}",
            self.state, self.read, self.next, self.write, self.mv
        )
    }
}

/// Which δ-resolution procedure interprets the rule table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ResolverVariant {
    SatId,
    SatFixed,
    SubsetSum,
}

impl ResolverVariant {
    pub fn name(self) -> &'static str {
        match self {
            ResolverVariant::SatId => "sat-id",
            ResolverVariant::SatFixed => "sat-fixed",
            ResolverVariant::SubsetSum => "subset-sum",
        }
    }
}

/// A fully built machine: symbolic rows plus everything the resolver needs.
#[derive(Debug, Clone)]
pub struct MachineSpec {
    pub variant: ResolverVariant,
    /// Main verification rows, in printed-table order.
    pub rules: Vec<Rule>,
    /// Sanitization-phase rows (present only when built with sanitize).
    pub sanitizer_rules: Vec<Rule>,
    pub q_init: Tok,
    pub q_acc: Tok,
    pub q_rej: Tok,
    /// Upper bound k for integer state families (state params range over
    /// 0..=k); `None` when the variant has no such families.
    pub param_bound: Option<u32>,
    /// Tape alphabet Γ; symbols outside it never materialize graph nodes.
    pub alphabet: Vec<Tok>,
    table: BTreeMap<(Tok, Tok), (Tok, Tok, Move)>,
}

impl MachineSpec {
    pub fn new(
        variant: ResolverVariant,
        rules: Vec<Rule>,
        sanitizer_rules: Vec<Rule>,
        q_init: Tok,
        q_acc: Tok,
        q_rej: Tok,
        param_bound: Option<u32>,
        alphabet: Vec<Tok>,
    ) -> Self {
        let mut table = BTreeMap::new();
        for r in rules.iter().chain(sanitizer_rules.iter()) {
            let prev = table.insert((r.state, r.read), (r.next, r.write, r.mv));
            debug_assert!(prev.is_none(), "duplicate rule key {} / {}", r.state, r.read);
        }
        MachineSpec {
            variant,
            rules,
            sanitizer_rules,
            q_init,
            q_acc,
            q_rej,
            param_bound,
            alphabet,
            table,
        }
    }

    pub fn is_halting(&self, state: Tok) -> bool {
        state == self.q_acc || state == self.q_rej
    }

    pub fn in_alphabet(&self, symbol: Tok) -> bool {
        self.alphabet.contains(&symbol)
    }

    fn lookup(&self, state: Tok, class: Tok) -> Option<(Tok, Tok, Move)> {
        self.table.get(&(state, class)).copied()
    }

    /// True iff `state` names a member of this machine's finite state set,
    /// honoring the instantiation bound on integer families.
    pub fn state_in_range(&self, state: Tok) -> bool {
        match self.variant {
            ResolverVariant::SatId => {
                let base = state.base();
                let param = state.param();
                match base {
                    "Check" | "Not" | "Skip" | "Accept" | "Reject" | "InputCheck"
                    | "CertificateCheck" | "BackToBeginning" => param.is_none(),
                    "Backward" => matches!(param, Some("T") | Some("F")),
                    "Inc" | "Forward" | "Dec" => match param.and_then(|p| p.parse::<i64>().ok())
                    {
                        Some(n) => n >= 0 && n <= i64::from(self.param_bound.unwrap_or(0)),
                        None => false,
                    },
                    _ => false,
                }
            }
            // The other two variants build only states drawn from fixed
            // finite families; no range check is required.
            _ => true,
        }
    }
}

const BLANK: &str = "eps";

pub fn blank() -> Tok {
    t(BLANK)
}

fn reject_triple(spec: &MachineSpec) -> (Tok, Tok, Move) {
    (spec.q_rej, t("_"), -1)
}

/// Resolves δ(state, symbol) for a non-halting state. Undefined pairs map to
/// the fixed rejection triple (Reject, "_", −1); parameterized states that
/// instantiate outside their range map to (Reject, "_", +1).
pub fn resolve_transition(spec: &MachineSpec, state: Tok, symbol: Tok) -> (Tok, Tok, Move) {
    debug_assert!(!spec.is_halting(state));
    match spec.variant {
        ResolverVariant::SatId => resolve_sat_id(spec, state, symbol),
        ResolverVariant::SatFixed => resolve_sat_fixed(spec, state, symbol),
        ResolverVariant::SubsetSum => resolve_subset_sum(spec, state, symbol),
    }
}

fn resolve_sat_id(spec: &MachineSpec, state: Tok, symbol: Tok) -> (Tok, Tok, Move) {
    let addr = state.param();
    let altstate = addr.map(|_| Tok::with_param(state.base(), "N"));

    let mut classes: Vec<Tok> = vec![symbol];
    if symbol.digit().is_some() {
        classes.push(t("D"));
    }
    classes.push(t("*"));

    for s in classes {
        let hit = spec
            .lookup(state, s)
            .or_else(|| altstate.and_then(|a| spec.lookup(a, s)));
        let Some((mut q, mut out, dir)) = hit else {
            continue;
        };

        if q.param() == Some("D") {
            if let Some(d) = symbol.digit() {
                q = Tok::with_param(q.base(), &d.to_string());
            }
        }
        if q.param() == Some("N") {
            let n = addr.and_then(|a| a.parse::<i64>().ok());
            match n {
                Some(n) => q = Tok::with_param(q.base(), &n.to_string()),
                None => return reject_triple(spec),
            }
        } else if q.param() == Some("(N-1)") {
            let n = addr.and_then(|a| a.parse::<i64>().ok());
            match n {
                Some(n) => q = Tok::with_param(q.base(), &(n - 1).to_string()),
                None => return reject_triple(spec),
            }
        } else if q.param() == Some("(10N+D)") {
            let n = addr.and_then(|a| a.parse::<i64>().ok());
            match (n, symbol.digit()) {
                (Some(n), Some(d)) => {
                    q = Tok::with_param(q.base(), &(10 * n + i64::from(d)).to_string())
                }
                _ => return reject_triple(spec),
            }
        }

        if !spec.state_in_range(q) {
            return (spec.q_rej, t("_"), 1);
        }

        if out.as_str() == "*" {
            out = symbol;
        }
        return (q, out, dir);
    }
    reject_triple(spec)
}

fn is_truth(tok: Tok) -> bool {
    matches!(tok.as_str(), "T" | "F")
}

fn resolve_sat_fixed(spec: &MachineSpec, state: Tok, symbol: Tok) -> (Tok, Tok, Move) {
    let sub = state.param();
    let altstate = sub.map(|p| {
        if p.len() == 1 && p.as_bytes()[0].is_ascii_digit() {
            Tok::with_param(state.base(), "D")
        } else if p == "T" || p == "F" {
            Tok::with_param(state.base(), "B")
        } else {
            Tok::with_param(state.base(), "S")
        }
    });

    let mut classes: Vec<Tok> = vec![symbol];
    if symbol.digit().is_some() {
        classes.push(t("D"));
    } else if is_truth(symbol) {
        classes.push(t("B"));
    }
    classes.push(t("*"));

    for s in classes {
        let (mut q, mut out, dir);
        if let Some(hit) = spec.lookup(state, s) {
            (q, out, dir) = hit;
        } else if let Some(hit) = altstate.and_then(|a| spec.lookup(a, s)) {
            (q, out, dir) = hit;
            let p = sub.expect("altstate implies a parameter");
            let alt = altstate.expect("altstate was hit");
            let suffix = alt.param().expect("altstates are parameterized");
            if out.as_str() == suffix {
                out = t(p);
            }
            if q.param() == Some(suffix) {
                q = Tok::with_param(q.base(), p);
            }
        } else {
            continue;
        }

        if q.param() == Some("B") && is_truth(symbol) {
            q = Tok::with_param(q.base(), symbol.as_str());
        }

        if out.as_str() == "D" && symbol.digit().is_some() {
            out = symbol;
        } else if out.as_str() == "D-1" {
            match symbol.digit() {
                Some(d) if d >= 1 => out = t(&(d - 1).to_string()),
                _ => return reject_triple(spec),
            }
        } else if out.as_str() == "*" {
            out = symbol;
        }
        return (q, out, dir);
    }
    reject_triple(spec)
}

fn resolve_subset_sum(spec: &MachineSpec, state: Tok, symbol: Tok) -> (Tok, Tok, Move) {
    let addr = state.param().filter(|p| p.len() == 1 && p.as_bytes()[0].is_ascii_digit());
    let addr_digit = addr.map(|p| p.as_bytes()[0] - b'0');
    let altstate = addr.map(|_| Tok::with_param(state.base(), "M"));

    let mut classes: Vec<Tok> = vec![symbol];
    if symbol.digit().is_some() {
        classes.push(t("M"));
        classes.push(t("D"));
    } else if symbol.circled_digit().is_some() {
        classes.push(t("(M)"));
        classes.push(t("(D)"));
    }
    classes.push(t("*"));

    for s in classes {
        if let Some(triple) = try_subset_sum(spec, state, altstate, addr_digit, symbol, s) {
            return triple;
        }
    }
    reject_triple(spec)
}

fn try_subset_sum(
    spec: &MachineSpec,
    state: Tok,
    altstate: Option<Tok>,
    addr_digit: Option<u8>,
    symbol: Tok,
    s: Tok,
) -> Option<(Tok, Tok, Move)> {
    let mut m: Option<u8> = None;
    let mut d: Option<u8> = None;

    let (mut q, mut out, dir);
    if let Some(hit) = spec.lookup(state, s) {
        (q, out, dir) = hit;
    } else if let Some(hit) = altstate.and_then(|a| spec.lookup(a, s)) {
        // An exact-match class only applies when the stored digit equals the
        // digit under the head.
        if s.as_str() == "M" && addr_digit != symbol.digit() {
            return None;
        }
        (q, out, dir) = hit;
        m = addr_digit;
    } else {
        return None;
    }

    match s.as_str() {
        "M" => m = symbol.digit().or(m),
        "(M)" => m = symbol.circled_digit().or(m),
        "D" => d = symbol.digit(),
        "(D)" => d = symbol.circled_digit(),
        _ => {}
    }

    if q.param() == Some("M") {
        if let Some(m) = m {
            q = Tok::with_param(q.base(), &m.to_string());
        }
    }

    if q.param() == Some("B") && out.as_str() == "(D)-(M)" {
        if let (Some(d), Some(m)) = (d, m) {
            let n = (10 + d - m) % 10;
            let borrow = u8::from(d < m);
            q = Tok::with_param(q.base(), &borrow.to_string());
            return Some((q, Tok::circled(n), dir));
        }
    }

    match out.as_str() {
        "(M)" => out = Tok::circled(m.expect("write class (M) requires a captured digit")),
        "D" => {
            if let Some(d) = d {
                out = t(&d.to_string());
            }
        }
        "D-1" => {
            if let Some(d) = d {
                debug_assert!(d >= 1, "D-1 write reached with D = 0");
                out = t(&d.saturating_sub(1).to_string());
            }
        }
        "(D)" => {
            if let Some(d) = d {
                out = Tok::circled(d);
            }
        }
        "*" => out = symbol,
        _ => {}
    }
    Some((q, out, dir))
}

/// A machine configuration: control state, sparse two-sided tape, head.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Configuration {
    pub state: Tok,
    pub tape: BTreeMap<i64, Tok>,
    pub head: i64,
    pub steps: u64,
}

impl Configuration {
    /// Places the input at cells 0..n−1 with the head on cell 0.
    pub fn start(spec: &MachineSpec, input: &[Tok]) -> Self {
        let blank_tok = blank();
        let tape = input
            .iter()
            .enumerate()
            .filter(|(_, &s)| s != blank_tok)
            .map(|(i, &s)| (i as i64, s))
            .collect();
        Configuration {
            state: spec.q_init,
            tape,
            head: 0,
            steps: 0,
        }
    }

    pub fn read(&self) -> Tok {
        self.tape.get(&self.head).copied().unwrap_or_else(blank)
    }
}

/// One executed transition, as recorded in a run trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceStep {
    pub state: Tok,
    pub head: i64,
    pub read: Tok,
    pub write: Tok,
    pub mv: Move,
    pub next_state: Tok,
}

/// Advances one step in place; the caller checks for halting states.
pub fn step(spec: &MachineSpec, config: &mut Configuration) -> TraceStep {
    let read = config.read();
    let (next, write, mv) = resolve_transition(spec, config.state, read);
    let record = TraceStep {
        state: config.state,
        head: config.head,
        read,
        write,
        mv,
        next_state: next,
    };
    if write == blank() {
        config.tape.remove(&config.head);
    } else {
        config.tape.insert(config.head, write);
    }
    config.head += i64::from(mv);
    config.state = next;
    config.steps += 1;
    record
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Accept,
    Reject,
    StepLimit,
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::Accept => "accept",
            Decision::Reject => "reject",
            Decision::StepLimit => "step-limit",
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub decision: Decision,
    pub trace: Vec<TraceStep>,
    pub final_config: Configuration,
}

/// Runs the machine from the standard start configuration until it halts or
/// exhausts `max_steps`.
pub fn run_direct(spec: &MachineSpec, input: &[Tok], max_steps: u64) -> RunResult {
    let mut config = Configuration::start(spec, input);
    let mut trace = Vec::new();
    while !spec.is_halting(config.state) && config.steps < max_steps {
        trace.push(step(spec, &mut config));
    }
    let decision = if config.state == spec.q_acc {
        Decision::Accept
    } else if config.state == spec.q_rej {
        Decision::Reject
    } else {
        Decision::StepLimit
    };
    RunResult {
        decision,
        trace,
        final_config: config,
    }
}
