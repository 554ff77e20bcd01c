//! Feasibility pruning over dynamic computation graphs.
//!
//! Given a computation graph assembled from machine walks, a set of start
//! vertices `v0`, and a set of designated final edges `ef`, this module
//! removes every edge that can no longer lie on a complete walk from a start
//! vertex to a final edge. The construction runs in three phases:
//!
//! 1. [`compute_cover_edges`] registers the edges that close walk segments
//!    off from above, so later phases never treat them as dangling tips.
//! 2. [`step_pendant_edges_with_reachable_graph`] restricts the graph to the
//!    part reachable from `v0` and flags the boundary edges that cannot
//!    continue any walk: dead ends, orphaned revisits, uncovered tips.
//! 3. [`compute_feasible_graph`] removes the flagged edges and cascades the
//!    removal to neighbors that become unextendable in turn, stopping early
//!    once every final edge has died.
//!
//! [`prune_walk`] wraps the phases for the walk search's "this walk turned
//! out useless, cut it and recompute" step, optionally shielding the last
//! in-graph edges of abandoned branches so their prefixes survive the
//! recomputation.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::graph::{DynamicGraph, EdgeRef, NodeKey};

// ---------------------------------------------------------------------------
// Cover registry
// ---------------------------------------------------------------------------

/// Per-slice registry of protected edges: edges that terminate walk segments
/// from above and therefore must not be flagged as dangling. Lookup is by the
/// edge's slice index.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CoverIndexMap {
    map: BTreeMap<i64, BTreeSet<EdgeRef>>,
}

impl CoverIndexMap {
    pub fn new() -> Self {
        CoverIndexMap::default()
    }

    pub fn contains(&self, e: &EdgeRef) -> bool {
        self.map
            .get(&e.edge_index())
            .is_some_and(|set| set.contains(e))
    }

    pub fn insert(&mut self, e: EdgeRef) -> bool {
        self.map.entry(e.edge_index()).or_default().insert(e)
    }

    pub fn remove(&mut self, e: &EdgeRef) -> bool {
        let Some(set) = self.map.get_mut(&e.edge_index()) else {
            return false;
        };
        let hit = set.remove(e);
        if set.is_empty() {
            self.map.remove(&e.edge_index());
        }
        hit
    }

    /// Total number of registered edges across all slices.
    pub fn len(&self) -> usize {
        self.map.values().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// All registered edges in (slice, canonical) order.
    pub fn edges(&self) -> impl Iterator<Item = &EdgeRef> {
        self.map.values().flatten()
    }

    /// The registered edges of one slice, if any.
    pub fn at_index(&self, index: i64) -> Option<&BTreeSet<EdgeRef>> {
        self.map.get(&index)
    }
}

// ---------------------------------------------------------------------------
// Feasible graph
// ---------------------------------------------------------------------------

/// A pruned computation graph in which every remaining edge can still lie on
/// a complete walk from a start vertex to a final edge, together with the
/// boundary data the pruning was computed against.
#[derive(Debug, Clone)]
pub struct FeasibleGraph {
    /// The pruned copy. The input graph is never mutated.
    pub graph: DynamicGraph,
    /// Start vertices walks may depart from.
    pub v0: BTreeSet<NodeKey>,
    /// Surviving final edges. Empty exactly when nothing is feasible.
    pub ef: BTreeSet<EdgeRef>,
    /// The cover registry the elimination ran against.
    pub cover: CoverIndexMap,
}

impl FeasibleGraph {
    /// True when elimination consumed every final edge: nothing is feasible.
    pub fn is_empty(&self) -> bool {
        self.graph.is_empty()
    }
}

/// A fresh graph over the same machine and tape, with no edges.
fn empty_like(g: &DynamicGraph) -> DynamicGraph {
    DynamicGraph::new(g.machine_arc(), g.tape().clone())
}

// ---------------------------------------------------------------------------
// Cover computation
// ---------------------------------------------------------------------------

/// Edges that sit one step behind `e` in walk order: candidates for covering
/// `e` from below so that `e` itself keeps counting as covered from above.
///
/// Two families qualify:
/// * edges entering `e`'s tail across the slice behind `e` (relative to its
///   direction of travel), and
/// * edges entering the first non-folding vertex of a descending
///   previous-visit chain. The chain starts at the tail when the tail is a
///   folding vertex; for final edges (`toward_final`) it may also start at
///   the head, which additionally contributes its own incoming edges
///   whenever it is non-folding.
///
/// No path connectivity is required here; [`compute_cover_edges`] applies
/// the reachability filter afterwards.
pub fn weak_ceiling_adjacent_edges(
    g: &DynamicGraph,
    e: &EdgeRef,
    toward_final: bool,
) -> BTreeSet<EdgeRef> {
    let mut out: BTreeSet<EdgeRef> = BTreeSet::new();
    let mut push = |f: EdgeRef| {
        if f != *e {
            out.insert(f);
        }
    };

    let behind = e.edge_index() - e.dir();
    for f in g.incoming_edges(&e.tail) {
        if f.edge_index() == behind {
            push(f);
        }
    }

    let mut stack: Vec<NodeKey> = Vec::new();
    let mut seen: BTreeSet<NodeKey> = BTreeSet::new();
    if g.is_folding(&e.tail) && seen.insert(e.tail) {
        stack.push(e.tail);
    }
    if toward_final {
        if !g.is_folding(&e.head) {
            for f in g.incoming_edges(&e.head) {
                push(f);
            }
        }
        if seen.insert(e.head) {
            stack.push(e.head);
        }
    }
    while let Some(x) = stack.pop() {
        for y in g.node_iprec(&x) {
            if g.is_folding(&y) {
                if seen.insert(y) {
                    stack.push(y);
                }
            } else {
                for f in g.incoming_edges(&y) {
                    push(f);
                }
            }
        }
    }
    out
}

/// Keeps only the candidates met on some backward path from a final edge:
/// one traversal over incoming edges starting at `ef`, retaining every
/// visited edge that the candidate registry `c0` already holds.
fn collect_edges_with_path(
    g: &DynamicGraph,
    c0: &CoverIndexMap,
    ef: &BTreeSet<EdgeRef>,
) -> CoverIndexMap {
    let mut out = CoverIndexMap::new();
    let mut visited: BTreeSet<EdgeRef> = BTreeSet::new();
    let mut queue: VecDeque<EdgeRef> = ef.iter().copied().collect();
    while let Some(e) = queue.pop_front() {
        if !visited.insert(e) {
            continue;
        }
        if c0.contains(&e) {
            out.insert(e);
        }
        for f in g.prev_edges(&e) {
            queue.push_back(f);
        }
    }
    out
}

/// Computes the cover registry for `ef`: the closure of `ef` under weak
/// ceiling adjacency, restricted to edges lying on some backward path from a
/// final edge. The result contains every edge that terminates a walk segment
/// from above, and nothing outside the adjacency closure.
pub fn compute_cover_edges(g: &DynamicGraph, ef: &BTreeSet<EdgeRef>) -> CoverIndexMap {
    let mut candidates = CoverIndexMap::new();
    let mut queue: VecDeque<EdgeRef> = VecDeque::new();
    for e in ef {
        candidates.insert(*e);
        queue.push_back(*e);
    }
    while let Some(f) = queue.pop_front() {
        for e in weak_ceiling_adjacent_edges(g, &f, ef.contains(&f)) {
            if candidates.insert(e) {
                queue.push_back(e);
            }
        }
    }
    collect_edges_with_path(g, &candidates, ef)
}

// ---------------------------------------------------------------------------
// Pendant detection
// ---------------------------------------------------------------------------

/// True when `e` hangs loose on one of its sides: the endpoint there has no
/// other edge crossing the next slice outward and is not a folding vertex
/// (folding vertices legitimately turn the walk around instead of extending
/// it outward).
pub fn is_ex_pendant(g: &DynamicGraph, e: &EdgeRef) -> bool {
    let i = e.edge_index();
    let (lo, hi) = if e.dir() > 0 {
        (e.tail, e.head)
    } else {
        (e.head, e.tail)
    };
    let side_clear = |v: &NodeKey, slice: i64| {
        g.incoming_edges(v)
            .iter()
            .chain(g.outgoing_edges(v).iter())
            .all(|f| f.edge_index() != slice)
    };
    (side_clear(&lo, i - 1) && !g.is_folding(&lo))
        || (side_clear(&hi, i + 1) && !g.is_folding(&hi))
}

/// Restricts `g` to the subgraph reachable from `v0` along forward and
/// backward edge adjacency, and flags every reachable edge that cannot
/// extend a walk:
///
/// * no revisit continues it from above and the cover registry does not
///   protect it;
/// * it re-enters a cell (head tier above zero) but no previous visit
///   precedes it;
/// * nothing follows it and it is not a final edge;
/// * nothing precedes it and its tail is not a start vertex;
/// * it hangs loose on a side ([`is_ex_pendant`]) and is neither a final
///   edge nor a start edge — those are legitimate walk boundaries.
///
/// Returns the flagged edges and the reachable subgraph.
pub fn step_pendant_edges_with_reachable_graph(
    g: &DynamicGraph,
    cover: &CoverIndexMap,
    v0: &BTreeSet<NodeKey>,
    ef: &BTreeSet<EdgeRef>,
) -> (BTreeSet<EdgeRef>, DynamicGraph) {
    let mut h = empty_like(g);
    let mut flagged: BTreeSet<EdgeRef> = BTreeSet::new();
    let mut queue: VecDeque<EdgeRef> = VecDeque::new();
    for v in v0 {
        queue.extend(g.outgoing_edges(v));
    }
    while let Some(e) = queue.pop_front() {
        if h.has_edge(&e) {
            continue;
        }
        h.add_edge(&e);

        if !cover.contains(&e) && g.edge_isucc(&e).is_empty() {
            flagged.insert(e);
        }
        if e.head.tier() > 0 && g.edge_iprec(&e).is_empty() {
            flagged.insert(e);
        }
        if !ef.contains(&e) && !v0.contains(&e.tail) && is_ex_pendant(g, &e) {
            flagged.insert(e);
        }
        if !ef.contains(&e) {
            let next = g.next_edges(&e);
            if next.is_empty() {
                flagged.insert(e);
            } else {
                queue.extend(next);
            }
        }
        if !v0.contains(&e.tail) {
            let prev = g.prev_edges(&e);
            if prev.is_empty() {
                flagged.insert(e);
            } else {
                queue.extend(prev);
            }
        }
    }
    (flagged, h)
}

// ---------------------------------------------------------------------------
// Feasible graph construction
// ---------------------------------------------------------------------------

/// Builds the feasible graph of `g` with respect to start vertices `v0` and
/// final edges `ef`: the subgraph in which every edge can still lie on a
/// complete walk. `removal_seed` lists edges to eliminate unconditionally
/// (the caller's "what if this edge were gone" probe); the cascade extends
/// from the seeds and the flagged boundary edges together.
///
/// Elimination dequeues one edge at a time and, before removing it, enqueues
/// the neighbors that lose their support:
///
/// 1. everything following a non-merging edge,
/// 2. revisits above it that had no other connection below,
/// 3. unprotected previous visits below it that had no other connection
///    above,
/// 4. everything preceding a non-splitting edge, final edges excepted.
///
/// Removing the last final edge aborts construction: nothing is feasible and
/// the empty graph is returned. An empty `ef` therefore yields the empty
/// graph immediately.
pub fn compute_feasible_graph(
    g: &DynamicGraph,
    v0: &BTreeSet<NodeKey>,
    ef: &BTreeSet<EdgeRef>,
    removal_seed: &BTreeSet<EdgeRef>,
) -> FeasibleGraph {
    let cover = compute_cover_edges(g, ef);
    if ef.is_empty() {
        return FeasibleGraph {
            graph: empty_like(g),
            v0: v0.clone(),
            ef: BTreeSet::new(),
            cover,
        };
    }
    let (flagged, mut h) = step_pendant_edges_with_reachable_graph(g, &cover, v0, ef);
    let mut ef_live = ef.clone();
    let mut queue: VecDeque<EdgeRef> = flagged.union(removal_seed).copied().collect();
    while let Some(e) = queue.pop_front() {
        if !h.has_edge(&e) {
            continue;
        }
        if !h.is_merging(&e) {
            queue.extend(h.next_edges(&e));
        }
        for f in h.edge_isucc(&e) {
            if h.count_precedents(&f) == 1 {
                queue.push_back(f);
            }
        }
        for f in h.edge_iprec(&e) {
            if !cover.contains(&f) && h.count_succedents(&f) == 1 {
                queue.push_back(f);
            }
        }
        if !h.is_splitting(&e) {
            for f in h.prev_edges(&e) {
                if !ef_live.contains(&f) {
                    queue.push_back(f);
                }
            }
        }
        h.remove_edge(&e);
        if ef_live.remove(&e) && ef_live.is_empty() {
            return FeasibleGraph {
                graph: empty_like(g),
                v0: v0.clone(),
                ef: BTreeSet::new(),
                cover,
            };
        }
    }
    ef_live.retain(|e| h.has_edge(e));
    FeasibleGraph {
        graph: h,
        v0: v0.clone(),
        ef: ef_live,
        cover,
    }
}

// ---------------------------------------------------------------------------
// Walk pruning
// ---------------------------------------------------------------------------

/// The first merging edge of `walk` in `g`, or its final edge when the walk
/// never merges: the natural cut point that invalidates the walk while
/// keeping its reusable prefix.
fn find_first_merging_edge_or_final(g: &DynamicGraph, walk: &[EdgeRef]) -> EdgeRef {
    for e in walk {
        if g.is_merging(e) {
            return *e;
        }
    }
    *walk.last().expect("walk must be nonempty")
}

/// Walks the universe graph `g_u` from the start vertices through edges
/// still present in `g`, and at every exit point — the first edge of an
/// abandoned branch missing from `g` whose head is a revisit vertex that
/// still has support in `g` — re-adds that edge to `g` and records it.
/// The recorded edges act as temporary final edges so the branch prefix
/// survives recomputation.
fn add_final_edges_of_obsolete_walks(
    g_u: &DynamicGraph,
    g: &mut DynamicGraph,
    v0: &BTreeSet<NodeKey>,
) -> BTreeSet<EdgeRef> {
    let mut obsolete: BTreeSet<EdgeRef> = BTreeSet::new();
    let mut visited: BTreeSet<EdgeRef> = BTreeSet::new();
    let mut queue: VecDeque<EdgeRef> = VecDeque::new();
    for v in v0 {
        queue.extend(g_u.outgoing_edges(v));
    }
    while let Some(e) = queue.pop_front() {
        if !visited.insert(e) {
            continue;
        }
        if g.has_edge(&e) {
            queue.extend(g_u.next_edges(&e));
        } else if e.head.tier() > 0 && g.in_degree(&e.head) > 0 {
            g.add_edge(&e);
            obsolete.insert(e);
        }
    }
    obsolete
}

/// Invalidates `walk` inside the feasible graph `fg`: cuts its first merging
/// edge (or its final edge when it never merges) and recomputes feasibility.
/// With `preserve_obsolete`, the last in-graph edges of branches abandoned in
/// the universe graph `g_u` are shielded as temporary final edges during the
/// recomputation and dropped from the returned graph afterwards, so the cut
/// never recovers an edge that was already ruled out.
pub fn prune_walk(
    g_u: &DynamicGraph,
    fg: &FeasibleGraph,
    walk: &[EdgeRef],
    preserve_obsolete: bool,
) -> FeasibleGraph {
    assert!(!walk.is_empty(), "cannot prune an empty walk");
    let cut = find_first_merging_edge_or_final(&fg.graph, walk);
    let mut work = fg.graph.clone();
    let mut obsolete: BTreeSet<EdgeRef> = BTreeSet::new();
    if preserve_obsolete {
        obsolete = add_final_edges_of_obsolete_walks(g_u, &mut work, &fg.v0);
    }
    work.remove_edge(&cut);
    let ef_ext: BTreeSet<EdgeRef> = fg.ef.union(&obsolete).copied().collect();
    let mut out = compute_feasible_graph(&work, &fg.v0, &ef_ext, &BTreeSet::new());
    for e in &obsolete {
        out.graph.remove_edge(e);
        out.ef.remove(e);
        out.cover.remove(e);
    }
    out
}
