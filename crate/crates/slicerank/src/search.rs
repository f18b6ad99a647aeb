//! Exact search for the largest A ⊆ F_q^n containing no nontrivial
//! three-term progression whose common difference lies in S_1 × ⋯ × S_n —
//! the ground truth the analytic bounds are checked against.
//!
//! Forbidden progressions form a 3-uniform hypergraph on the q^n points;
//! the searcher is a branch-and-bound maximum-independent-set solver with
//! simple cardinality pruning. "Nontrivial" means the difference vector is
//! nonzero; individual coordinates may be zero since 0 ∈ S_ℓ.

use std::collections::{BTreeSet, HashSet};
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};
use std::time::{Duration, Instant};

use std::sync::Arc;

use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf::{make_field_arc, Elem, FieldSpec, Vector};

/// Default cap on q^n when materializing the progression hypergraph.
pub const DEFAULT_VERTEX_GATE: u64 = 19683; // 3^9

const SOLVER_STACK: usize = 64 << 20;

/// The problem a user poses: (q, n, S_1..S_n with 0 ∈ S_ℓ), with the
/// derived complement average μ and exponent parameter α.
#[derive(Clone, Debug)]
pub struct DifferenceInstance {
    field: Arc<FieldSpec>,
    n: u16,
    sets: Vec<BTreeSet<Elem>>,
}

impl DifferenceInstance {
    pub fn new(field: Arc<FieldSpec>, sets: Vec<BTreeSet<Elem>>) -> Result<Self> {
        if sets.is_empty() || sets.len() > u16::MAX as usize {
            return Err(Error::InvalidInstance(format!(
                "need between 1 and {} coordinate sets, got {}",
                u16::MAX,
                sets.len()
            )));
        }
        let zero = field.zero();
        for (i, s) in sets.iter().enumerate() {
            if !s.contains(&zero) {
                return Err(Error::InvalidInstance(format!(
                    "difference set S_{} does not contain 0",
                    i + 1
                )));
            }
        }
        Ok(DifferenceInstance {
            field,
            n: sets.len() as u16,
            sets,
        })
    }

    pub fn uniform(field: Arc<FieldSpec>, n: u16, set: BTreeSet<Elem>) -> Result<Self> {
        Self::new(field, vec![set; n as usize])
    }

    pub fn field(&self) -> &Arc<FieldSpec> {
        &self.field
    }

    pub fn n(&self) -> u16 {
        self.n
    }

    pub fn sets(&self) -> &[BTreeSet<Elem>] {
        &self.sets
    }

    /// |S| when all coordinate sets coincide.
    pub fn uniform_size(&self) -> Option<usize> {
        let first = &self.sets[0];
        self.sets.iter().all(|s| s == first).then_some(first.len())
    }

    /// μ = (1/n) Σ_ℓ (q − |S_ℓ|), the average complement size.
    pub fn mu(&self) -> Ratio<i64> {
        let q = self.field.q() as i64;
        let total: i64 = self.sets.iter().map(|s| q - s.len() as i64).sum();
        Ratio::new(total, self.n as i64)
    }

    /// α = 1/3 + μ/(3(q−1)).
    pub fn alpha(&self) -> Ratio<i64> {
        let q = self.field.q() as i64;
        Ratio::new(1, 3) + self.mu() / Ratio::from_integer(3 * (q - 1))
    }

    pub fn allowed_difference(&self, s: &Vector) -> bool {
        s.entries()
            .iter()
            .zip(&self.sets)
            .all(|(e, set)| set.contains(e))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(InstanceJson {
            p: self.field.p(),
            k: self.field.k(),
            n: self.n,
            sets: self
                .sets
                .iter()
                .map(|s| s.iter().map(|&e| self.field.elem_to_string(e)).collect())
                .collect(),
        })
        .expect("instance serialization cannot fail")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let parsed: InstanceJson = serde_json::from_value(value.clone())
            .map_err(|e| Error::InvalidInstance(format!("bad instance JSON: {e}")))?;
        let field = make_field_arc(parsed.p, parsed.k)?;
        if parsed.sets.len() != parsed.n as usize {
            return Err(Error::InvalidInstance(format!(
                "{} coordinate sets given but n = {}",
                parsed.sets.len(),
                parsed.n
            )));
        }
        let sets = parsed
            .sets
            .iter()
            .map(|strs| strs.iter().map(|s| field.parse_elem(s)).collect())
            .collect::<Result<_>>()?;
        Self::new(field, sets)
    }
}

#[derive(Serialize, Deserialize)]
struct InstanceJson {
    p: u32,
    k: u32,
    n: u16,
    sets: Vec<Vec<String>>,
}

/// All q^n points as vertices (canonical index order) and every forbidden
/// progression {a, a+s, a+2s} as a 3-element edge, deduplicated.
#[derive(Clone, Debug)]
pub struct ApHypergraph {
    field: Arc<FieldSpec>,
    n: u16,
    vertex_count: usize,
    edges: Vec<[u32; 3]>,
    incident: Vec<Vec<u32>>,
}

impl ApHypergraph {
    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[[u32; 3]] {
        &self.edges
    }

    pub fn field(&self) -> &Arc<FieldSpec> {
        &self.field
    }

    pub fn n(&self) -> u16 {
        self.n
    }

    pub fn vertex_vector(&self, v: u32) -> Vector {
        self.field.vector_from_index(v as usize, self.n as usize)
    }

    fn is_independent(&self, members: &[bool]) -> bool {
        self.edges
            .iter()
            .all(|e| !e.iter().all(|&v| members[v as usize]))
    }
}

/// Enumerates every (a, s) with s ∈ ΠS_ℓ \ {0}; the sorted-triple hash set
/// absorbs the double counting from s and −s (and any further rerootings).
pub fn build_hypergraph(inst: &DifferenceInstance, gate: u64) -> Result<ApHypergraph> {
    let field = inst.field();
    let n = inst.n() as usize;
    let vertex_count = (field.q() as u128)
        .checked_pow(inst.n() as u32)
        .filter(|&v| v <= gate as u128)
        .ok_or(Error::TooLarge {
            what: "hypergraph vertices q^n",
            size: (field.q() as u128).saturating_pow(inst.n() as u32),
            gate: gate as u128,
        })? as usize;

    // Materialize the allowed nonzero differences.
    let mut diffs: Vec<Vector> = Vec::new();
    let per_coord: Vec<Vec<Elem>> = inst
        .sets()
        .iter()
        .map(|s| s.iter().copied().collect())
        .collect();
    let mut odometer = vec![0usize; n];
    loop {
        let v = Vector::new(
            odometer
                .iter()
                .zip(&per_coord)
                .map(|(&i, coord)| coord[i])
                .collect(),
        );
        if !field.vec_is_zero(&v) {
            diffs.push(v);
        }
        let mut pos = n;
        loop {
            if pos == 0 {
                break;
            }
            pos -= 1;
            odometer[pos] += 1;
            if odometer[pos] < per_coord[pos].len() {
                break;
            }
            odometer[pos] = 0;
        }
        if odometer.iter().all(|&i| i == 0) {
            break;
        }
    }

    let mut edge_set: HashSet<[u32; 3]> = HashSet::new();
    for a_id in 0..vertex_count {
        let a = field.vector_from_index(a_id, n);
        for s in &diffs {
            let b = field.vec_add(&a, s);
            let c = field.vec_add(&b, s);
            let mut tri = [
                a_id as u32,
                field.vector_index(&b) as u32,
                field.vector_index(&c) as u32,
            ];
            tri.sort_unstable();
            debug_assert!(tri[0] < tri[1] && tri[1] < tri[2], "q odd, s != 0");
            edge_set.insert(tri);
        }
    }
    let mut edges: Vec<[u32; 3]> = edge_set.into_iter().collect();
    edges.sort_unstable();

    let mut incident = vec![Vec::new(); vertex_count];
    for (i, e) in edges.iter().enumerate() {
        for &v in e {
            incident[v as usize].push(i as u32);
        }
    }
    Ok(ApHypergraph {
        field: field.clone(),
        n: inst.n(),
        vertex_count,
        edges,
        incident,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexOrder {
    /// Descending edge degree, ties by canonical index.
    #[default]
    DegreeDesc,
    /// The exact reverse; used as an independent solver configuration.
    DegreeDescReversed,
}

#[derive(Clone, Debug)]
pub struct SearchOptions {
    pub budget: Duration,
    pub workers: usize,
    pub order: VertexOrder,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            budget: Duration::from_secs(60),
            workers: 1,
            order: VertexOrder::DegreeDesc,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchStatus {
    Exact,
    LowerBound,
}

#[derive(Clone, Debug)]
pub struct SearchResult {
    pub size: usize,
    /// Independent set of that size, in canonical vector order. The
    /// lexicographically least maximum set in single-worker exact runs
    /// (when `witness_lex_least` is set); any maximum set otherwise.
    pub best_set: Vec<Vector>,
    pub status: SearchStatus,
    pub nodes_explored: u64,
    pub wall_time: Duration,
    pub witness_lex_least: bool,
}

pub fn result_to_json(result: &SearchResult, inst: &DifferenceInstance) -> serde_json::Value {
    let field = inst.field();
    serde_json::json!({
        "size": result.size,
        "status": result.status,
        "nodes_explored": result.nodes_explored,
        "wall_time_ms": result.wall_time.as_millis() as u64,
        "witness_lex_least": result.witness_lex_least,
        "best_set": result.best_set.iter().map(|v| field.vector_to_string(v)).collect::<Vec<_>>(),
        "instance": inst.to_json(),
    })
}

struct Dfs<'a> {
    h: &'a ApHypergraph,
    order: &'a [u32],
    edge_cnt: Vec<u8>,
    in_set: Vec<bool>,
    /// Number of incident edges whose other two vertices are chosen; a
    /// vertex with a positive count can never join the set deeper in the
    /// current subtree, since includes only accumulate along a path.
    blocked: Vec<u16>,
    chosen: Vec<u32>,
    local_best_size: usize,
    local_best_set: Vec<u32>,
    shared_best: &'a AtomicUsize,
    nodes: u64,
    deadline: Instant,
    aborted: bool,
}

impl<'a> Dfs<'a> {
    fn new(
        h: &'a ApHypergraph,
        order: &'a [u32],
        shared_best: &'a AtomicUsize,
        deadline: Instant,
    ) -> Self {
        Dfs {
            h,
            order,
            edge_cnt: vec![0; h.edges.len()],
            in_set: vec![false; h.vertex_count],
            blocked: vec![0; h.vertex_count],
            chosen: Vec::new(),
            local_best_size: 0,
            local_best_set: Vec::new(),
            shared_best,
            nodes: 0,
            deadline,
            aborted: false,
        }
    }

    fn include(&mut self, v: u32) {
        self.in_set[v as usize] = true;
        for &e in &self.h.incident[v as usize] {
            let cnt = &mut self.edge_cnt[e as usize];
            *cnt += 1;
            if *cnt == 2 {
                // The remaining unchosen vertex of this edge is now barred.
                for &w in &self.h.edges[e as usize] {
                    if !self.in_set[w as usize] {
                        self.blocked[w as usize] += 1;
                    }
                }
            }
        }
        self.chosen.push(v);
        let size = self.chosen.len();
        if size > self.local_best_size {
            self.local_best_size = size;
            self.local_best_set = self.chosen.clone();
        }
        self.shared_best.fetch_max(size, AtomicOrdering::Relaxed);
    }

    fn unwind(&mut self, v: u32) {
        self.chosen.pop();
        for &e in &self.h.incident[v as usize] {
            let cnt = &mut self.edge_cnt[e as usize];
            if *cnt == 2 {
                for &w in &self.h.edges[e as usize] {
                    if !self.in_set[w as usize] {
                        self.blocked[w as usize] -= 1;
                    }
                }
            }
            *cnt -= 1;
        }
        self.in_set[v as usize] = false;
    }

    fn run(&mut self, pos: usize) {
        if self.aborted {
            return;
        }
        self.nodes += 1;
        if self.nodes & 0xFFF == 0 && Instant::now() >= self.deadline {
            self.aborted = true;
            return;
        }
        let best = self.shared_best.load(AtomicOrdering::Relaxed);
        if self.chosen.len() + (self.order.len() - pos) <= best {
            return;
        }
        if pos == self.order.len() {
            return;
        }
        // Cardinality prune over the vertices that can still be included.
        let free = self.order[pos..]
            .iter()
            .filter(|&&v| self.blocked[v as usize] == 0)
            .count();
        if self.chosen.len() + free <= best {
            return;
        }
        let v = self.order[pos];
        if self.blocked[v as usize] == 0 {
            self.include(v);
            self.run(pos + 1);
            self.unwind(v);
        }
        self.run(pos + 1);
    }
}

fn vertex_order(h: &ApHypergraph, order: VertexOrder) -> Vec<u32> {
    let mut vs: Vec<u32> = (0..h.vertex_count as u32).collect();
    vs.sort_by_key(|&v| (std::cmp::Reverse(h.incident[v as usize].len()), v));
    if order == VertexOrder::DegreeDescReversed {
        vs.reverse();
    }
    vs
}

fn greedy_incumbent(h: &ApHypergraph, order: &[u32]) -> Vec<u32> {
    let mut edge_cnt = vec![0u8; h.edges.len()];
    let mut chosen = Vec::new();
    for &v in order {
        if h.incident[v as usize]
            .iter()
            .all(|&e| edge_cnt[e as usize] < 2)
        {
            for &e in &h.incident[v as usize] {
                edge_cnt[e as usize] += 1;
            }
            chosen.push(v);
        }
    }
    chosen
}

/// Valid include/exclude decision prefixes of the given depth; splitting
/// the search at these roots keeps the explored tree (and hence the exact
/// size) independent of worker scheduling.
fn decision_prefixes(h: &ApHypergraph, order: &[u32], depth: usize) -> Vec<Vec<(u32, bool)>> {
    let mut out = Vec::new();
    let mut edge_cnt = vec![0u8; h.edges.len()];
    let mut prefix: Vec<(u32, bool)> = Vec::new();

    fn rec(
        h: &ApHypergraph,
        order: &[u32],
        depth: usize,
        pos: usize,
        edge_cnt: &mut Vec<u8>,
        prefix: &mut Vec<(u32, bool)>,
        out: &mut Vec<Vec<(u32, bool)>>,
    ) {
        if pos == depth {
            out.push(prefix.clone());
            return;
        }
        let v = order[pos];
        let can = h.incident[v as usize]
            .iter()
            .all(|&e| edge_cnt[e as usize] < 2);
        if can {
            for &e in &h.incident[v as usize] {
                edge_cnt[e as usize] += 1;
            }
            prefix.push((v, true));
            rec(h, order, depth, pos + 1, edge_cnt, prefix, out);
            prefix.pop();
            for &e in &h.incident[v as usize] {
                edge_cnt[e as usize] -= 1;
            }
        }
        prefix.push((v, false));
        rec(h, order, depth, pos + 1, edge_cnt, prefix, out);
        prefix.pop();
    }

    rec(h, order, depth, 0, &mut edge_cnt, &mut prefix, &mut out);
    out
}

/// Include-first depth-first search in canonical index order; the first
/// independent set of the target size it finds is the lexicographically
/// least one. Returns None when the deadline strikes first.
fn lex_least_max_set(h: &ApHypergraph, target: usize, deadline: Instant) -> Option<Vec<u32>> {
    struct Lex<'a> {
        h: &'a ApHypergraph,
        edge_cnt: Vec<u8>,
        in_set: Vec<bool>,
        blocked: Vec<u16>,
        chosen: Vec<u32>,
        deadline: Instant,
        nodes: u64,
        aborted: bool,
    }

    impl Lex<'_> {
        fn rec(&mut self, pos: usize, target: usize) -> bool {
            if self.chosen.len() == target {
                return true;
            }
            self.nodes += 1;
            if self.nodes & 0xFFF == 0 && Instant::now() >= self.deadline {
                self.aborted = true;
            }
            if self.aborted {
                return false;
            }
            let total = self.h.vertex_count;
            if self.chosen.len() + (total - pos) < target {
                return false;
            }
            let free = (pos..total).filter(|&v| self.blocked[v] == 0).count();
            if self.chosen.len() + free < target {
                return false;
            }
            let v = pos as u32;
            if self.blocked[pos] == 0 {
                self.in_set[pos] = true;
                for &e in &self.h.incident[pos] {
                    let cnt = &mut self.edge_cnt[e as usize];
                    *cnt += 1;
                    if *cnt == 2 {
                        for &w in &self.h.edges[e as usize] {
                            if !self.in_set[w as usize] {
                                self.blocked[w as usize] += 1;
                            }
                        }
                    }
                }
                self.chosen.push(v);
                if self.rec(pos + 1, target) {
                    return true;
                }
                self.chosen.pop();
                for &e in &self.h.incident[pos] {
                    let cnt = &mut self.edge_cnt[e as usize];
                    if *cnt == 2 {
                        for &w in &self.h.edges[e as usize] {
                            if !self.in_set[w as usize] {
                                self.blocked[w as usize] -= 1;
                            }
                        }
                    }
                    *cnt -= 1;
                }
                self.in_set[pos] = false;
            }
            self.rec(pos + 1, target)
        }
    }

    if target == 0 {
        return Some(Vec::new());
    }
    let mut lex = Lex {
        h,
        edge_cnt: vec![0; h.edges.len()],
        in_set: vec![false; h.vertex_count],
        blocked: vec![0; h.vertex_count],
        chosen: Vec::new(),
        deadline,
        nodes: 0,
        aborted: false,
    };
    if lex.rec(0, target) {
        Some(lex.chosen)
    } else {
        None
    }
}

/// Branch-and-bound over vertices in descending edge-degree order with a
/// greedy initial incumbent and cardinality pruning. The reported size is
/// exact when the search completes within the budget and is independent of
/// the worker count; multi-worker runs share the incumbent monotonically.
pub fn max_independent_exact(h: &ApHypergraph, opts: &SearchOptions) -> Result<SearchResult> {
    let start = Instant::now();
    let deadline = start + opts.budget;
    let workers = opts.workers.max(1);

    let solved = std::thread::scope(|scope| {
        std::thread::Builder::new()
            .stack_size(SOLVER_STACK)
            .spawn_scoped(scope, || solve_inner(h, opts, workers, deadline))
            .expect("spawning solver thread")
            .join()
            .expect("solver thread panicked")
    });
    let (best_size, best_ids, nodes, aborted, lex_least) = solved;

    let mut members = vec![false; h.vertex_count];
    for &v in &best_ids {
        members[v as usize] = true;
    }
    if !h.is_independent(&members) || best_ids.len() != best_size {
        return Err(Error::InvariantViolation(
            "solver emitted a dependent or mis-sized witness".into(),
        ));
    }

    let mut sorted_ids = best_ids;
    sorted_ids.sort_unstable();
    Ok(SearchResult {
        size: best_size,
        best_set: sorted_ids.iter().map(|&v| h.vertex_vector(v)).collect(),
        status: if aborted {
            SearchStatus::LowerBound
        } else {
            SearchStatus::Exact
        },
        nodes_explored: nodes,
        wall_time: start.elapsed(),
        witness_lex_least: lex_least,
    })
}

fn solve_inner(
    h: &ApHypergraph,
    opts: &SearchOptions,
    workers: usize,
    deadline: Instant,
) -> (usize, Vec<u32>, u64, bool, bool) {
    let order = vertex_order(h, opts.order);
    let greedy = greedy_incumbent(h, &order);
    let shared_best = AtomicUsize::new(greedy.len());

    let mut best_size = greedy.len();
    let mut best_ids = greedy;
    let mut nodes;
    let aborted;

    if workers == 1 {
        let mut dfs = Dfs::new(h, &order, &shared_best, deadline);
        dfs.run(0);
        nodes = dfs.nodes;
        aborted = dfs.aborted;
        if dfs.local_best_size > best_size {
            best_size = dfs.local_best_size;
            best_ids = dfs.local_best_set;
        }
    } else {
        let depth = if h.vertex_count < 2 {
            0
        } else {
            10.min(h.vertex_count - 1)
        };
        let prefixes = decision_prefixes(h, &order, depth);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .stack_size(SOLVER_STACK)
            .build()
            .expect("building solver thread pool");
        let results: Vec<(usize, Vec<u32>, u64, bool)> = pool.install(|| {
            prefixes
                .par_iter()
                .map(|prefix| {
                    let mut dfs = Dfs::new(h, &order, &shared_best, deadline);
                    for &(v, included) in prefix {
                        if included {
                            dfs.include(v);
                        }
                    }
                    dfs.run(depth);
                    (
                        dfs.local_best_size,
                        dfs.local_best_set,
                        dfs.nodes,
                        dfs.aborted,
                    )
                })
                .collect()
        });
        nodes = 0;
        let mut any_abort = false;
        for (size, set, task_nodes, task_abort) in results {
            nodes += task_nodes;
            any_abort |= task_abort;
            if size > best_size {
                best_size = size;
                best_ids = set;
            }
        }
        aborted = any_abort;
    }

    debug_assert_eq!(best_size, shared_best.load(AtomicOrdering::Relaxed));

    // Canonical witness: only meaningful once the size is proven exact.
    let mut lex_least = false;
    if !aborted && workers == 1 {
        if let Some(ids) = lex_least_max_set(h, best_size, deadline) {
            best_ids = ids;
            lex_least = true;
        }
    }
    (best_size, best_ids, nodes, aborted, lex_least)
}

/// Membership test: finds a forbidden progression inside `vectors`, if any,
/// as (x, x+s, x+2s) with s ∈ ΠS_ℓ \ {0}. Quadratic in |A| via
/// s = (z − x)/2 over ordered pairs.
pub fn check_set(vectors: &[Vector], inst: &DifferenceInstance) -> Result<Option<[Vector; 3]>> {
    let field = inst.field();
    let n = inst.n() as usize;
    let mut ids = BTreeSet::new();
    for v in vectors {
        if v.len() != n {
            return Err(Error::InvalidInput(format!(
                "vector has {} coordinates, expected {n}",
                v.len()
            )));
        }
        if !ids.insert(field.vector_index(v)) {
            return Err(Error::InvalidInput(format!(
                "duplicate vector {}",
                field.vector_to_string(v)
            )));
        }
    }
    let sorted: Vec<Vector> = ids
        .iter()
        .map(|&id| field.vector_from_index(id, n))
        .collect();
    for x in &sorted {
        for z in &sorted {
            if x == z {
                continue;
            }
            let s = field.vec_half(&field.vec_sub(z, x));
            if !inst.allowed_difference(&s) {
                continue;
            }
            let mid = field.vec_add(x, &s);
            if ids.contains(&field.vector_index(&mid)) {
                return Ok(Some([x.clone(), mid, z.clone()]));
            }
        }
    }
    Ok(None)
}
