//! Lazily materialized dynamic computation graph.
//!
//! Vertices are machine configurations keyed by (cell index, visit tier,
//! state, symbol) plus the transition case of the previous visit to the same
//! cell; edges are single head moves stored in per-cell-pair slices with
//! adjacency sets on both endpoints. The module provides the precedence
//! relations between revisits (node- and edge-level), structural edge
//! classifiers, graph copying, and the traversal helpers used by walk
//! extension: floor-edge enumeration, continuation above precedents, weak
//! ceiling adjacency, and path-restricted candidate filtering.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use crate::machines::{EncodedTape, CertificateSchema};
use crate::tm::{blank, resolve_transition, MachineSpec, Move, TraceStep};
use crate::tok::Tok;

/// Growable array over a signed index range, extending itself with default
/// items on first access past either end while preserving existing cells.
#[derive(Debug, Clone)]
pub struct CellVec<T> {
    base: i64,
    items: VecDeque<T>,
}

impl<T: Default> CellVec<T> {
    pub fn new() -> Self {
        CellVec {
            base: 0,
            items: VecDeque::new(),
        }
    }

    /// First index currently backed by storage.
    pub fn base(&self) -> i64 {
        self.base
    }

    /// One past the last index currently backed by storage.
    pub fn end(&self) -> i64 {
        self.base + self.items.len() as i64
    }

    pub fn is_defined(&self, index: i64) -> bool {
        index >= self.base && index < self.end()
    }

    pub fn get(&self, index: i64) -> Option<&T> {
        if self.is_defined(index) {
            self.items.get((index - self.base) as usize)
        } else {
            None
        }
    }

    pub fn get_mut(&mut self, index: i64) -> Option<&mut T> {
        if self.is_defined(index) {
            self.items.get_mut((index - self.base) as usize)
        } else {
            None
        }
    }

    /// Accesses `index`, growing the array toward it with default items if it
    /// lies outside the current range (cells in between are created too).
    pub fn ensure(&mut self, index: i64) -> &mut T {
        if self.items.is_empty() {
            self.base = index;
            self.items.push_back(T::default());
        } else if index >= self.end() {
            for _ in self.end()..=index {
                self.items.push_back(T::default());
            }
        } else if index < self.base {
            for _ in index..self.base {
                self.items.push_front(T::default());
            }
            self.base = index;
        }
        &mut self.items[(index - self.base) as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, &T)> {
        let base = self.base;
        self.items
            .iter()
            .enumerate()
            .map(move |(k, v)| (base + k as i64, v))
    }
}

impl<T: Default> Default for CellVec<T> {
    fn default() -> Self {
        CellVec::new()
    }
}

/// The set of configurations sharing a cell index, visit tier, control state,
/// and read symbol. Its transition attributes (written symbol, head move,
/// next state) are resolved once and cached by the owning graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct TransitionCaseKey {
    pub index: i64,
    pub tier: u32,
    pub state: Tok,
    pub symbol: Tok,
}

impl TransitionCaseKey {
    pub fn new(index: i64, tier: u32, state: Tok, symbol: Tok) -> Self {
        TransitionCaseKey {
            index,
            tier,
            state,
            symbol,
        }
    }
}

impl fmt::Display for TransitionCaseKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{}",
            self.index, self.tier, self.state, self.symbol
        )
    }
}

/// A graph vertex: a transition case plus the case of the previous visit to
/// the same cell (absent exactly on first visits, tier 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct NodeKey {
    pub case: TransitionCaseKey,
    pub ipred_case: Option<TransitionCaseKey>,
}

impl NodeKey {
    pub fn new(case: TransitionCaseKey, ipred_case: Option<TransitionCaseKey>) -> Self {
        debug_assert_eq!(case.tier == 0, ipred_case.is_none());
        if let Some(p) = &ipred_case {
            debug_assert_eq!(p.index, case.index);
            debug_assert_eq!(p.tier + 1, case.tier);
        }
        NodeKey { case, ipred_case }
    }

    pub fn index(&self) -> i64 {
        self.case.index
    }

    pub fn tier(&self) -> u32 {
        self.case.tier
    }

    pub fn state(&self) -> Tok {
        self.case.state
    }

    pub fn symbol(&self) -> Tok {
        self.case.symbol
    }
}

impl fmt::Display for NodeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.ipred_case {
            Some(p) => write!(f, "({}|{},{})", self.case, p.state, p.symbol),
            None => write!(f, "({}|-)", self.case),
        }
    }
}

/// A directed edge between two vertices in adjacent cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct EdgeRef {
    pub tail: NodeKey,
    pub head: NodeKey,
}

impl EdgeRef {
    pub fn new(tail: NodeKey, head: NodeKey) -> Self {
        debug_assert_eq!((tail.index() - head.index()).abs(), 1);
        EdgeRef { tail, head }
    }

    /// Slice index: the smaller of the two endpoint cell indices.
    pub fn edge_index(&self) -> i64 {
        self.tail.index().min(self.head.index())
    }

    /// +1 for a rightward move, -1 for leftward.
    pub fn dir(&self) -> i64 {
        if self.head.index() > self.tail.index() {
            1
        } else {
            -1
        }
    }
}

impl fmt::Display for EdgeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.tail, self.head)
    }
}

/// Cached transition attributes of a (state, symbol) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Resolution {
    pub next_state: Tok,
    pub output: Tok,
    pub mv: Move,
}

/// One entry of a walk or boundary surface: the last transition case seen at
/// a cell, or the last edge whose tail entered the cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceEntry {
    Case(TransitionCaseKey),
    Edge(EdgeRef),
}

/// Per-cell record of the most recent case/edge, as maintained by walks.
pub type Surface = BTreeMap<i64, SurfaceEntry>;

/// A set of candidate edges plus an optional boundary marker standing for
/// "no previous visit: enumerate floor continuations".
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EdgeSelection {
    pub edges: BTreeSet<EdgeRef>,
    pub floor_marker: bool,
}

impl EdgeSelection {
    pub fn is_empty(&self) -> bool {
        self.edges.is_empty() && !self.floor_marker
    }
}

/// Structural classification of one edge against current graph contents.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EdgeFlags {
    pub floor: bool,
    pub merging: bool,
    pub splitting: bool,
    pub combined_merging: bool,
    pub combining: bool,
    pub pseudo_combining: bool,
    pub folding_at_tail: bool,
    pub folding_at_head: bool,
}

/// Adjacency record of one vertex within one edge slice: heads of its
/// outgoing edges and tails of its incoming edges crossing this slice.
#[derive(Debug, Clone, Default)]
struct Slot {
    out: BTreeSet<NodeKey>,
    inc: BTreeSet<NodeKey>,
}

/// All edges between cells i and i+1: adjacency keyed separately by the
/// vertices on the lower (cell i) and upper (cell i+1) side, so that each
/// vertex carries four adjacency sets across its two incident slices.
#[derive(Debug, Clone, Default)]
struct EdgeSlice {
    lo: BTreeMap<NodeKey, Slot>,
    hi: BTreeMap<NodeKey, Slot>,
}

/// state -> symbol -> materialized vertices of that case.
type CaseMap = BTreeMap<Tok, BTreeMap<Tok, BTreeSet<NodeKey>>>;

/// tier -> cases (grown on demand, lowest tier first).
type TierColumn = Vec<CaseMap>;

/// The dynamic computation graph of one machine on one initial tape.
#[derive(Debug, Clone)]
pub struct DynamicGraph {
    machine: Arc<MachineSpec>,
    tape: EncodedTape,
    alphabet: BTreeSet<Tok>,
    nodes: CellVec<TierColumn>,
    slices: CellVec<EdgeSlice>,
    node_count: usize,
    edge_count: usize,
    resolve_memo: RefCell<BTreeMap<(Tok, Tok), Resolution>>,
}

impl DynamicGraph {
    /// A fresh graph over `tape`; nothing is materialized yet.
    pub fn new(machine: Arc<MachineSpec>, tape: EncodedTape) -> Self {
        let alphabet = machine.alphabet.iter().copied().collect();
        DynamicGraph {
            machine,
            tape,
            alphabet,
            nodes: CellVec::new(),
            slices: CellVec::new(),
            node_count: 0,
            edge_count: 0,
            resolve_memo: RefCell::new(BTreeMap::new()),
        }
    }

    pub fn machine(&self) -> &MachineSpec {
        &self.machine
    }

    pub fn machine_arc(&self) -> Arc<MachineSpec> {
        Arc::clone(&self.machine)
    }

    pub fn tape(&self) -> &EncodedTape {
        &self.tape
    }

    pub fn schema(&self) -> &CertificateSchema {
        &self.tape.schema
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// True when the graph holds no edges (vertices may still exist).
    pub fn is_empty(&self) -> bool {
        self.edge_count == 0
    }

    pub fn is_halting_state(&self, state: Tok) -> bool {
        self.machine.is_halting(state)
    }

    pub fn is_accepting_state(&self, state: Tok) -> bool {
        state == self.machine.q_acc
    }

    /// Cached transition attributes; must not be asked about halting states.
    pub fn resolution(&self, state: Tok, symbol: Tok) -> Resolution {
        debug_assert!(
            !self.machine.is_halting(state),
            "no transition out of halting state {state}"
        );
        if let Some(r) = self.resolve_memo.borrow().get(&(state, symbol)) {
            return *r;
        }
        let (next_state, output, mv) = resolve_transition(&self.machine, state, symbol);
        let r = Resolution {
            next_state,
            output,
            mv,
        };
        self.resolve_memo.borrow_mut().insert((state, symbol), r);
        r
    }

    pub fn case_resolution(&self, case: &TransitionCaseKey) -> Resolution {
        self.resolution(case.state, case.symbol)
    }

    /// Symbol the case writes, or None for halting cases (which write nothing).
    pub fn output_of(&self, case: &TransitionCaseKey) -> Option<Tok> {
        if self.machine.is_halting(case.state) {
            None
        } else {
            Some(self.case_resolution(case).output)
        }
    }

    /// Cell the head occupies after the case's move, or None when halting.
    pub fn next_index_of(&self, node: &NodeKey) -> Option<i64> {
        if self.machine.is_halting(node.state()) {
            None
        } else {
            Some(node.index() + i64::from(self.case_resolution(&node.case).mv))
        }
    }

    /// The unique start vertex of the machine on this tape.
    pub fn start_node(&mut self) -> NodeKey {
        let symbol = self.initial_symbol(0);
        let q_init = self.machine.q_init;
        self.materialize_node(0, 0, q_init, symbol, None)
            .expect("start symbol must be in the tape alphabet")
    }

    /// Tape content of `cell` before any head writes: the encoded token in
    /// the input region, blank elsewhere (certificate cells hold no fixed
    /// symbol; enumeration chooses them).
    pub fn initial_symbol(&self, cell: i64) -> Tok {
        if cell >= 0 && (cell as usize) < self.tape.tokens.len() {
            self.tape.tokens[cell as usize]
        } else {
            blank()
        }
    }

    // ------------------------------------------------------------------
    // Vertices
    // ------------------------------------------------------------------

    /// Creates (or finds) the vertex with the given key. Containers along the
    /// access path come into being on first touch; the call is idempotent.
    /// Symbols outside the tape alphabet yield no vertex.
    pub fn materialize_node(
        &mut self,
        index: i64,
        tier: u32,
        state: Tok,
        symbol: Tok,
        ipred_case: Option<TransitionCaseKey>,
    ) -> Option<NodeKey> {
        if !self.alphabet.contains(&symbol) {
            return None;
        }
        let key = NodeKey::new(TransitionCaseKey::new(index, tier, state, symbol), ipred_case);
        let column = self.nodes.ensure(index);
        while column.len() <= tier as usize {
            column.push(CaseMap::new());
        }
        let set = column[tier as usize]
            .entry(state)
            .or_default()
            .entry(symbol)
            .or_default();
        if set.insert(key) {
            self.node_count += 1;
        }
        Some(key)
    }

    pub fn node_exists(&self, v: &NodeKey) -> bool {
        self.case_set(&v.case).is_some_and(|set| set.contains(v))
    }

    fn case_set(&self, case: &TransitionCaseKey) -> Option<&BTreeSet<NodeKey>> {
        self.nodes
            .get(case.index)?
            .get(case.tier as usize)?
            .get(&case.state)?
            .get(&case.symbol)
    }

    /// Materialized vertices sharing `case` (any previous-visit context).
    pub fn case_members(&self, case: &TransitionCaseKey) -> Vec<NodeKey> {
        self.case_set(case)
            .map(|s| s.iter().copied().collect())
            .unwrap_or_default()
    }

    /// Materialized vertices of the previous visit's case, empty on tier 0.
    pub fn node_iprec(&self, v: &NodeKey) -> Vec<NodeKey> {
        match &v.ipred_case {
            Some(p) => self.case_members(p),
            None => Vec::new(),
        }
    }

    /// Materialized vertices of the next visit to the same cell: one tier up,
    /// reading what `v` wrote, with `v`'s case as their previous visit.
    pub fn node_isucc(&self, v: &NodeKey) -> Vec<NodeKey> {
        let Some(written) = self.output_of(&v.case) else {
            return Vec::new();
        };
        let Some(column) = self.nodes.get(v.index()) else {
            return Vec::new();
        };
        let Some(cases) = column.get(v.tier() as usize + 1) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for symbol_map in cases.values() {
            if let Some(set) = symbol_map.get(&written) {
                for s in set {
                    if s.ipred_case == Some(v.case) {
                        out.push(*s);
                    }
                }
            }
        }
        out.sort();
        out
    }

    /// True when some incoming/outgoing edge pair of `v` shares a slice: the
    /// head reverses direction at `v`.
    pub fn is_folding(&self, v: &NodeKey) -> bool {
        let left = self
            .slices
            .get(v.index() - 1)
            .and_then(|s| s.hi.get(v))
            .is_some_and(|slot| !slot.out.is_empty() && !slot.inc.is_empty());
        if left {
            return true;
        }
        self.slices
            .get(v.index())
            .and_then(|s| s.lo.get(v))
            .is_some_and(|slot| !slot.out.is_empty() && !slot.inc.is_empty())
    }

    // ------------------------------------------------------------------
    // Edges
    // ------------------------------------------------------------------

    /// Inserts `e`, materializing both endpoints. Returns false if present.
    pub fn add_edge(&mut self, e: &EdgeRef) -> bool {
        debug_assert!(
            !self.machine.is_halting(e.tail.state()),
            "edge out of halting state {}",
            e.tail
        );
        let tail_ok = self
            .materialize_node(
                e.tail.index(),
                e.tail.tier(),
                e.tail.state(),
                e.tail.symbol(),
                e.tail.ipred_case,
            )
            .is_some();
        let head_ok = self
            .materialize_node(
                e.head.index(),
                e.head.tier(),
                e.head.state(),
                e.head.symbol(),
                e.head.ipred_case,
            )
            .is_some();
        assert!(
            tail_ok && head_ok,
            "edge endpoints must use tape-alphabet symbols: {e}"
        );
        let slice = self.slices.ensure(e.edge_index());
        let inserted = if e.dir() > 0 {
            let a = slice.lo.entry(e.tail).or_default().out.insert(e.head);
            let b = slice.hi.entry(e.head).or_default().inc.insert(e.tail);
            debug_assert_eq!(a, b);
            a
        } else {
            let a = slice.hi.entry(e.tail).or_default().out.insert(e.head);
            let b = slice.lo.entry(e.head).or_default().inc.insert(e.tail);
            debug_assert_eq!(a, b);
            a
        };
        if inserted {
            self.edge_count += 1;
        }
        inserted
    }

    /// Removes `e` if present (endpoints stay materialized). Returns whether
    /// anything was removed.
    pub fn remove_edge(&mut self, e: &EdgeRef) -> bool {
        let Some(slice) = self.slices.get_mut(e.edge_index()) else {
            return false;
        };
        let (tail_side, head_side) = if e.dir() > 0 {
            (&mut slice.lo, &mut slice.hi)
        } else {
            (&mut slice.hi, &mut slice.lo)
        };
        let removed = match tail_side.get_mut(&e.tail) {
            Some(slot) => slot.out.remove(&e.head),
            None => false,
        };
        if !removed {
            return false;
        }
        if tail_side
            .get(&e.tail)
            .is_some_and(|s| s.out.is_empty() && s.inc.is_empty())
        {
            tail_side.remove(&e.tail);
        }
        if let Some(slot) = head_side.get_mut(&e.head) {
            slot.inc.remove(&e.tail);
            if slot.out.is_empty() && slot.inc.is_empty() {
                head_side.remove(&e.head);
            }
        }
        self.edge_count -= 1;
        true
    }

    pub fn has_edge(&self, e: &EdgeRef) -> bool {
        let Some(slice) = self.slices.get(e.edge_index()) else {
            return false;
        };
        let side = if e.dir() > 0 { &slice.lo } else { &slice.hi };
        side.get(&e.tail).is_some_and(|s| s.out.contains(&e.head))
    }

    /// Edges into `v`, ordered by tail key (left-cell tails first).
    pub fn incoming_edges(&self, v: &NodeKey) -> Vec<EdgeRef> {
        let mut out = Vec::new();
        if let Some(slot) = self.slices.get(v.index() - 1).and_then(|s| s.hi.get(v)) {
            out.extend(slot.inc.iter().map(|t| EdgeRef::new(*t, *v)));
        }
        if let Some(slot) = self.slices.get(v.index()).and_then(|s| s.lo.get(v)) {
            out.extend(slot.inc.iter().map(|t| EdgeRef::new(*t, *v)));
        }
        out
    }

    /// Edges out of `v`, ordered by head key (left-cell heads first).
    pub fn outgoing_edges(&self, v: &NodeKey) -> Vec<EdgeRef> {
        let mut out = Vec::new();
        if let Some(slot) = self.slices.get(v.index() - 1).and_then(|s| s.hi.get(v)) {
            out.extend(slot.out.iter().map(|h| EdgeRef::new(*v, *h)));
        }
        if let Some(slot) = self.slices.get(v.index()).and_then(|s| s.lo.get(v)) {
            out.extend(slot.out.iter().map(|h| EdgeRef::new(*v, *h)));
        }
        out
    }

    pub fn in_degree(&self, v: &NodeKey) -> usize {
        let left = self
            .slices
            .get(v.index() - 1)
            .and_then(|s| s.hi.get(v))
            .map_or(0, |s| s.inc.len());
        let right = self
            .slices
            .get(v.index())
            .and_then(|s| s.lo.get(v))
            .map_or(0, |s| s.inc.len());
        left + right
    }

    pub fn out_degree(&self, v: &NodeKey) -> usize {
        let left = self
            .slices
            .get(v.index() - 1)
            .and_then(|s| s.hi.get(v))
            .map_or(0, |s| s.out.len());
        let right = self
            .slices
            .get(v.index())
            .and_then(|s| s.lo.get(v))
            .map_or(0, |s| s.out.len());
        left + right
    }

    /// Edges ending at the tail of `e`.
    pub fn prev_edges(&self, e: &EdgeRef) -> Vec<EdgeRef> {
        self.incoming_edges(&e.tail)
    }

    /// Edges starting at the head of `e`.
    pub fn next_edges(&self, e: &EdgeRef) -> Vec<EdgeRef> {
        self.outgoing_edges(&e.head)
    }

    /// All edges in canonical (tail, head) order.
    pub fn all_edges(&self) -> BTreeSet<EdgeRef> {
        let mut out = BTreeSet::new();
        for (_, slice) in self.slices.iter() {
            for (u, slot) in &slice.lo {
                for v in &slot.out {
                    out.insert(EdgeRef::new(*u, *v));
                }
                for v in &slot.inc {
                    out.insert(EdgeRef::new(*v, *u));
                }
            }
        }
        out
    }

    // ------------------------------------------------------------------
    // Edge-level precedence relations
    // ------------------------------------------------------------------

    /// Edges one revisit below `e` over the same cell pair: edges (v', u')
    /// with v' a previous-visit vertex of head(e), running back to the tail's
    /// cell, whose head u' is the tail itself, a previous-visit vertex of the
    /// tail, or (indirectly) more than one visit below the tail.
    pub fn edge_iprec(&self, e: &EdgeRef) -> Vec<EdgeRef> {
        let mut out = Vec::new();
        for vp in self.node_iprec(&e.head) {
            for cand in self.outgoing_edges(&vp) {
                if cand.head.index() != e.tail.index() {
                    continue;
                }
                let up = cand.head;
                let related = up == e.tail
                    || e.tail.ipred_case == Some(up.case)
                    || e.tail.tier() > up.tier() + 1;
                if related {
                    out.push(cand);
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }

    /// Edges one revisit above `e` over the same cell pair: edges (v', u')
    /// with u' a next-visit vertex of tail(e), entered from the head's cell,
    /// whose tail v' is the head itself, a next-visit vertex of the head, or
    /// (indirectly) more than one visit above it.
    pub fn edge_isucc(&self, e: &EdgeRef) -> Vec<EdgeRef> {
        let head_written = self.output_of(&e.head.case);
        let mut out = Vec::new();
        for us in self.node_isucc(&e.tail) {
            for cand in self.incoming_edges(&us) {
                if cand.tail.index() != e.head.index() {
                    continue;
                }
                let vp = cand.tail;
                let above_head = vp.ipred_case == Some(e.head.case)
                    && head_written.is_some_and(|w| vp.symbol() == w);
                let related = vp == e.head || above_head || vp.tier() > e.head.tier() + 1;
                if related {
                    out.push(cand);
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }

    /// Connection count: outgoing edges within `e`'s slice over all
    /// previous-visit vertices of the head.
    pub fn count_precedents(&self, e: &EdgeRef) -> usize {
        let Some(slice) = self.slices.get(e.edge_index()) else {
            return 0;
        };
        let mut count = 0;
        for p in self.node_iprec(&e.head) {
            if let Some(slot) = slice.lo.get(&p) {
                count += slot.out.len();
            }
            if let Some(slot) = slice.hi.get(&p) {
                count += slot.out.len();
            }
        }
        count
    }

    /// Connection count: incoming edges within `e`'s slice over all
    /// next-visit vertices of the tail.
    pub fn count_succedents(&self, e: &EdgeRef) -> usize {
        let Some(slice) = self.slices.get(e.edge_index()) else {
            return 0;
        };
        let mut count = 0;
        for s in self.node_isucc(&e.tail) {
            if let Some(slot) = slice.lo.get(&s) {
                count += slot.inc.len();
            }
            if let Some(slot) = slice.hi.get(&s) {
                count += slot.inc.len();
            }
        }
        count
    }

    // ------------------------------------------------------------------
    // Edge classification
    // ------------------------------------------------------------------

    pub fn is_merging(&self, e: &EdgeRef) -> bool {
        self.in_degree(&e.head) >= 2
    }

    pub fn is_splitting(&self, e: &EdgeRef) -> bool {
        self.out_degree(&e.tail) >= 2
    }

    /// Part of a pair entering the same head from two tails of one case.
    pub fn is_combined_merging(&self, e: &EdgeRef) -> bool {
        self.incoming_edges(&e.head)
            .iter()
            .any(|f| f.tail != e.tail && f.tail.case == e.tail.case)
    }

    /// Local detection of a combining pair: a same-case peer of the head must
    /// exist, and either some edge enters a peer within this slice from a
    /// tail of a different case, or exactly one endpoint of `e` folds (the
    /// asymmetric configuration where the pair spans two slices).
    pub fn is_combining(&self, e: &EdgeRef) -> bool {
        let peers: Vec<NodeKey> = self
            .case_members(&e.head.case)
            .into_iter()
            .filter(|w| *w != e.head)
            .collect();
        if peers.is_empty() {
            return false;
        }
        let asymmetric_fold = self.is_folding(&e.tail) != self.is_folding(&e.head);
        if asymmetric_fold {
            return true;
        }
        for w in &peers {
            for f in self.incoming_edges(w) {
                if f.edge_index() == e.edge_index() && f.tail.case != e.tail.case {
                    return true;
                }
            }
        }
        false
    }

    /// Head does not fold, but one of its next-visit vertices does.
    pub fn is_pseudo_combining(&self, e: &EdgeRef) -> bool {
        if self.is_folding(&e.head) {
            return false;
        }
        self.node_isucc(&e.head).iter().any(|s| self.is_folding(s))
    }

    pub fn classify_edge(&self, e: &EdgeRef) -> EdgeFlags {
        EdgeFlags {
            floor: e.head.tier() == 0,
            merging: self.is_merging(e),
            splitting: self.is_splitting(e),
            combined_merging: self.is_combined_merging(e),
            combining: self.is_combining(e),
            pseudo_combining: self.is_pseudo_combining(e),
            folding_at_tail: self.is_folding(&e.tail),
            folding_at_head: self.is_folding(&e.head),
        }
    }

    // ------------------------------------------------------------------
    // Copying
    // ------------------------------------------------------------------

    /// Structural clone over the occupied slice range; mutations of the copy
    /// leave the original untouched. Vertices without edges are not carried
    /// over.
    pub fn copy_graph(&self) -> DynamicGraph {
        let mut g = DynamicGraph::new(Arc::clone(&self.machine), self.tape.clone());
        g.resolve_memo = RefCell::new(self.resolve_memo.borrow().clone());
        for (_, slice) in self.slices.iter() {
            for (u, slot) in &slice.lo {
                for v in &slot.inc {
                    g.add_edge(&EdgeRef::new(*v, *u));
                }
                for v in &slot.out {
                    g.add_edge(&EdgeRef::new(*u, *v));
                }
            }
        }
        g
    }

    // ------------------------------------------------------------------
    // Continuation helpers
    // ------------------------------------------------------------------

    /// First-visit continuations of `v`: one edge per symbol admissible at
    /// the next cell (fixed input token, blank outside all regions, or the
    /// certificate alphabet derived from the previously materialized
    /// first-visit symbols of the preceding certificate cell).
    pub fn get_floor_next_edges(&mut self, v: &NodeKey) -> Vec<EdgeRef> {
        let r = self.case_resolution(&v.case);
        let cell = v.index() + i64::from(r.mv);
        let mut edges = BTreeSet::new();
        for symbol in self.admissible_first_symbols(cell) {
            if let Some(z) = self.materialize_node(cell, 0, r.next_state, symbol, None) {
                edges.insert(EdgeRef::new(*v, z));
            }
        }
        edges.into_iter().collect()
    }

    /// Symbols a first visit of `cell` may read.
    fn admissible_first_symbols(&self, cell: i64) -> Vec<Tok> {
        let instance_len = self.tape.instance_len as i64;
        if cell >= 0 && cell < instance_len {
            return vec![self.tape.tokens[cell as usize]];
        }
        let schema = &self.tape.schema;
        let start = schema.region_start;
        let end = start + i64::from(schema.max_length);
        if cell < start || cell >= end {
            return vec![blank()];
        }
        let pos = (cell - start) as u32;
        if pos == 0 {
            return schema.alphabet_after(0, None);
        }
        // One-symbol lookback over every first-visit symbol materialized at
        // the preceding certificate cell. A symbol with no admissible
        // continuation closes the certificate, so the tape reads blank from
        // there on.
        let mut symbols: BTreeSet<Tok> = BTreeSet::new();
        let mut lasts: BTreeSet<Tok> = BTreeSet::new();
        if let Some(cases) = self.nodes.get(cell - 1).and_then(|c| c.first()) {
            for symbol_map in cases.values() {
                for (sym, set) in symbol_map {
                    if !set.is_empty() {
                        lasts.insert(*sym);
                    }
                }
            }
        }
        for last in lasts {
            let continuations = if last == blank() {
                Vec::new()
            } else {
                schema.alphabet_after(pos, Some(last))
            };
            if continuations.is_empty() {
                symbols.insert(blank());
            } else {
                symbols.extend(continuations);
            }
        }
        symbols.into_iter().collect()
    }

    /// Continuations of `u` above known precedent edges at the next cell: for
    /// each precedent edge (v, w), the edge from `u` to the vertex one tier
    /// above v reading what v wrote; a floor marker defers to first-visit
    /// enumeration.
    pub fn get_next_edges_above_ipreds(
        &mut self,
        u: &NodeKey,
        preds: &EdgeSelection,
    ) -> Vec<EdgeRef> {
        let mut out: BTreeSet<EdgeRef> = BTreeSet::new();
        if preds.floor_marker {
            out.extend(self.get_floor_next_edges(u));
        }
        let preds_edges: Vec<EdgeRef> = preds.edges.iter().copied().collect();
        for e in preds_edges {
            let v = e.tail;
            let r_u = self.case_resolution(&u.case);
            let Some(written) = self.output_of(&v.case) else {
                continue;
            };
            let z = self
                .materialize_node(v.index(), v.tier() + 1, r_u.next_state, written, Some(v.case))
                .expect("written symbols stay in the tape alphabet");
            assert_eq!(
                (u.index() - z.index()).abs(),
                1,
                "precedent edge does not border the vertex being extended"
            );
            out.insert(EdgeRef::new(*u, z));
        }
        out.into_iter().collect()
    }

    /// Backward search from the head of `e0` along previous-visit vertices:
    /// chains pass through folding vertices, non-folding stops contribute
    /// their incoming edges, and exhausted chains contribute the boundary
    /// marker. Empty for halting heads.
    pub fn get_forward_weak_ceiling_adjacent_edges(&self, e0: &EdgeRef) -> EdgeSelection {
        let mut sel = EdgeSelection::default();
        if self.machine.is_halting(e0.head.state()) {
            return sel;
        }
        let mut visited: BTreeSet<NodeKey> = BTreeSet::new();
        let mut queue: VecDeque<NodeKey> = VecDeque::new();
        queue.push_back(e0.head);
        while let Some(u) = queue.pop_front() {
            if !visited.insert(u) {
                continue;
            }
            if self.is_folding(&u) || u == e0.head {
                let preds = self.node_iprec(&u);
                if preds.is_empty() {
                    sel.floor_marker = true;
                }
                for p in preds {
                    if !visited.contains(&p) {
                        queue.push_back(p);
                    }
                }
            } else {
                sel.edges.extend(self.incoming_edges(&u));
            }
        }
        sel
    }

    /// Keeps the candidates reachable backward from `anchor` along incoming
    /// edges without crossing the anchor's boundary slice; boundary markers
    /// pass through unchanged.
    pub fn filter_with_path_backward(
        &self,
        anchor: &EdgeRef,
        candidates: &EdgeSelection,
    ) -> EdgeSelection {
        let mut kept = EdgeSelection {
            edges: BTreeSet::new(),
            floor_marker: candidates.floor_marker,
        };
        if candidates.edges.is_empty() {
            return kept;
        }
        let head = anchor.head;
        let i0 = match self.next_index_of(&head) {
            Some(next) => head.index().min(next),
            None => anchor.edge_index(),
        };
        let mut visited: BTreeSet<EdgeRef> = BTreeSet::new();
        let mut queue: VecDeque<EdgeRef> = VecDeque::new();
        queue.push_back(*anchor);
        while let Some(e) = queue.pop_front() {
            if !visited.insert(e) {
                continue;
            }
            if candidates.edges.contains(&e) {
                kept.edges.insert(e);
            }
            if e.edge_index() == i0 {
                continue;
            }
            for p in self.prev_edges(&e) {
                queue.push_back(p);
            }
        }
        kept
    }

    /// Keeps the candidates reachable forward from `anchor` along outgoing
    /// edges, stopping at any other edge over the anchor's slice.
    pub fn filter_with_path_forward(
        &self,
        anchor: &EdgeRef,
        candidates: &BTreeSet<EdgeRef>,
    ) -> BTreeSet<EdgeRef> {
        let mut kept = BTreeSet::new();
        let i0 = anchor.edge_index();
        let mut visited: BTreeSet<EdgeRef> = BTreeSet::new();
        let mut queue: VecDeque<EdgeRef> = VecDeque::new();
        queue.push_back(*anchor);
        while let Some(e) = queue.pop_front() {
            if !visited.insert(e) {
                continue;
            }
            if candidates.contains(&e) {
                kept.insert(e);
            }
            if e != *anchor && e.edge_index() == i0 {
                continue;
            }
            for n in self.next_edges(&e) {
                queue.push_back(n);
            }
        }
        kept
    }

    // ------------------------------------------------------------------
    // Trace embedding and dumping
    // ------------------------------------------------------------------

    /// Maps a direct run trace onto the graph: one vertex per configuration
    /// (tiers counted per cell, previous-visit cases tracked), one edge per
    /// step. Returns the walk's edges in execution order.
    pub fn embed_trace(&mut self, input: &[Tok], trace: &[TraceStep]) -> Vec<EdgeRef> {
        let mut tape: BTreeMap<i64, Tok> = input
            .iter()
            .enumerate()
            .filter(|(_, s)| **s != blank())
            .map(|(i, s)| (i as i64, *s))
            .collect();
        let mut last_case: BTreeMap<i64, TransitionCaseKey> = BTreeMap::new();
        let mut edges = Vec::new();
        let mut prev: Option<NodeKey> = None;
        for (k, step) in trace.iter().enumerate() {
            let node = self.embed_config(step.head, step.state, step.read, &mut last_case);
            if let Some(p) = prev {
                let e = EdgeRef::new(p, node);
                self.add_edge(&e);
                edges.push(e);
            }
            if step.write == blank() {
                tape.remove(&step.head);
            } else {
                tape.insert(step.head, step.write);
            }
            if k + 1 == trace.len() {
                let final_head = step.head + i64::from(step.mv);
                let final_symbol = tape.get(&final_head).copied().unwrap_or_else(blank);
                let z = self.embed_config(final_head, step.next_state, final_symbol, &mut last_case);
                let e = EdgeRef::new(node, z);
                self.add_edge(&e);
                edges.push(e);
            }
            prev = Some(node);
        }
        edges
    }

    fn embed_config(
        &mut self,
        cell: i64,
        state: Tok,
        symbol: Tok,
        last_case: &mut BTreeMap<i64, TransitionCaseKey>,
    ) -> NodeKey {
        let (tier, ipred) = match last_case.get(&cell) {
            Some(p) => (p.tier + 1, Some(*p)),
            None => (0, None),
        };
        let node = self
            .materialize_node(cell, tier, state, symbol, ipred)
            .expect("trace symbols lie in the tape alphabet");
        last_case.insert(cell, node.case);
        node
    }

    /// One line per edge in canonical order: `(i,t,q,s|ipred) -> (...)`.
    pub fn dump_edges(&self) -> String {
        let mut out = String::new();
        for e in self.all_edges() {
            out.push_str(&format!("{e}\n"));
        }
        out
    }
}
