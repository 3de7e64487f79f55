//! Preemptive single-team relaxation of the shift scheduling problem,
//! solved as a maximum-flow problem over minute slots.
//!
//! Every minute inside some job's window becomes a slot node that can hold
//! one minute of work. Source→job edges carry each job's duration, job→slot
//! and slot→sink edges carry 1. The job set is preemptively schedulable by
//! one team iff the maximum flow equals the total duration; because
//! preemption and slot-splitting only relax the real problem, an infeasible
//! relaxation certifies that the contiguous single-team problem is
//! infeasible too.
//!
//! On infeasibility the residual graph localizes the conflict: a job with
//! spare source capacity was left short of minutes, and the jobs it can
//! reach through residual job↔slot edges are exactly the ones holding the
//! slots it would need. Each such reachable set becomes a cut candidate;
//! [`remove_redundant`] keeps only the inclusion-minimal ones.
//!
//! Defined for a single team. Multi-team callers get a typed
//! [`RappError::UnsupportedTeamCount`] and must use a heuristic instead.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use thiserror::Error;

use crate::shifts::{Job, JobId};

/// A set of jobs that cannot all stay in the same shift.
pub type CutSet = BTreeSet<JobId>;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RappError {
    #[error("relaxation-based cut extraction is defined for 1 team, not {0}")]
    UnsupportedTeamCount(u32),
    #[error("cut extraction requires an infeasible network (flow {max_flow} covers demand {required_flow})")]
    NetworkFeasible { max_flow: i64, required_flow: i64 },
}

/// Generic integral max-flow network (Dinic's algorithm). Edges are stored
/// as parallel arrays where edge `e ^ 1` is the reverse of edge `e`, and
/// `cap` always holds the *remaining* capacity, so `cap[e ^ 1]` of a
/// forward edge is the flow it carries.
pub struct FlowNetwork {
    adj: Vec<Vec<u32>>,
    to: Vec<u32>,
    cap: Vec<i64>,
}

impl FlowNetwork {
    pub fn new(nodes: usize) -> Self {
        FlowNetwork { adj: vec![Vec::new(); nodes], to: Vec::new(), cap: Vec::new() }
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    /// Adds a directed edge and returns its id; `id ^ 1` is the reverse.
    pub fn add_edge(&mut self, from: usize, to: usize, cap: i64) -> usize {
        debug_assert!(cap >= 0);
        let id = self.to.len();
        self.to.push(to as u32);
        self.cap.push(cap);
        self.to.push(from as u32);
        self.cap.push(0);
        self.adj[from].push(id as u32);
        self.adj[to].push(id as u32 + 1);
        id
    }

    pub fn residual(&self, edge: usize) -> i64 {
        self.cap[edge]
    }

    pub fn flow(&self, edge: usize) -> i64 {
        self.cap[edge ^ 1]
    }

    pub fn max_flow(&mut self, source: usize, sink: usize) -> i64 {
        let n = self.adj.len();
        let mut total = 0;
        let mut level = vec![u32::MAX; n];
        let mut iter = vec![0usize; n];
        loop {
            level.iter_mut().for_each(|l| *l = u32::MAX);
            level[source] = 0;
            let mut queue = VecDeque::from([source]);
            while let Some(u) = queue.pop_front() {
                for &e in &self.adj[u] {
                    let v = self.to[e as usize] as usize;
                    if self.cap[e as usize] > 0 && level[v] == u32::MAX {
                        level[v] = level[u] + 1;
                        queue.push_back(v);
                    }
                }
            }
            if level[sink] == u32::MAX {
                return total;
            }
            iter.iter_mut().for_each(|i| *i = 0);
            loop {
                let pushed = self.augment(source, sink, i64::MAX, &level, &mut iter);
                if pushed == 0 {
                    break;
                }
                total += pushed;
            }
        }
    }

    fn augment(
        &mut self,
        u: usize,
        sink: usize,
        limit: i64,
        level: &[u32],
        iter: &mut [usize],
    ) -> i64 {
        if u == sink {
            return limit;
        }
        while iter[u] < self.adj[u].len() {
            let e = self.adj[u][iter[u]] as usize;
            let v = self.to[e] as usize;
            if self.cap[e] > 0 && level[v] == level[u] + 1 {
                let pushed = self.augment(v, sink, limit.min(self.cap[e]), level, iter);
                if pushed > 0 {
                    self.cap[e] -= pushed;
                    self.cap[e ^ 1] += pushed;
                    return pushed;
                }
            }
            iter[u] += 1;
        }
        0
    }

    /// Forces `amount` of flow onto an edge without running the solver —
    /// lets tests reproduce a specific flow before extracting cuts.
    #[cfg(test)]
    fn force_flow(&mut self, edge: usize, amount: i64) {
        assert!(self.cap[edge] >= amount);
        self.cap[edge] -= amount;
        self.cap[edge ^ 1] += amount;
    }
}

/// The relaxation network for one shift's jobs, with the node bookkeeping
/// needed to read cuts back out of the residual graph.
pub struct RappNetwork {
    net: FlowNetwork,
    source: usize,
    sink: usize,
    jobs: Vec<JobId>,
    job_node: Vec<usize>,
    /// Slot minute → node index.
    slot_node: BTreeMap<i64, usize>,
    source_edges: Vec<usize>,
    required_flow: i64,
    overlong: Vec<JobId>,
    max_flow: Option<i64>,
}

/// Outcome of the relaxation: feasibility verdict plus, when infeasible,
/// the redundancy-filtered cuts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RappCertificate {
    pub feasible: bool,
    pub max_flow: i64,
    pub required_flow: i64,
    /// Jobs whose duration exceeds their own window — individually
    /// impossible, detected before the flow runs.
    pub overlong: Vec<JobId>,
    /// Empty when feasible; otherwise inclusion-minimal job sets that
    /// cannot all remain in this shift.
    pub cuts: Vec<CutSet>,
}

/// Builds the slot network for `jobs`. Slot `x` covers minute `[x, x+1)`
/// and is usable by a job iff `release ≤ x` and `x + 1 ≤ deadline`, so a
/// job with integer bounds sees exactly `deadline − release` slots.
pub fn build_network(jobs: &[Job]) -> RappNetwork {
    let mut slot_minutes: BTreeSet<i64> = BTreeSet::new();
    for j in jobs {
        for x in j.release_min..j.deadline_min {
            slot_minutes.insert(x);
        }
    }
    let source = 0;
    let sink = 1;
    let mut next = 2;
    let job_node: Vec<usize> = jobs
        .iter()
        .map(|_| {
            let n = next;
            next += 1;
            n
        })
        .collect();
    let slot_node: BTreeMap<i64, usize> = slot_minutes
        .iter()
        .map(|&x| {
            let n = next;
            next += 1;
            (x, n)
        })
        .collect();
    let mut net = FlowNetwork::new(next);
    let mut source_edges = Vec::with_capacity(jobs.len());
    let mut required_flow = 0;
    let mut overlong = Vec::new();
    for (i, j) in jobs.iter().enumerate() {
        source_edges.push(net.add_edge(source, job_node[i], j.duration_min));
        required_flow += j.duration_min;
        if j.duration_min > j.deadline_min - j.release_min {
            overlong.push(j.id);
        }
        for x in j.release_min..j.deadline_min {
            net.add_edge(job_node[i], slot_node[&x], 1);
        }
    }
    for &node in slot_node.values() {
        net.add_edge(node, sink, 1);
    }
    RappNetwork {
        net,
        source,
        sink,
        jobs: jobs.iter().map(|j| j.id).collect(),
        job_node,
        slot_node,
        source_edges,
        required_flow,
        overlong,
        max_flow: None,
    }
}

impl RappNetwork {
    pub fn required_flow(&self) -> i64 {
        self.required_flow
    }

    pub fn run_max_flow(&mut self) -> i64 {
        let f = self.net.max_flow(self.source, self.sink);
        self.max_flow = Some(f);
        f
    }

    /// One raw cut per job left short of minutes: the job itself plus every
    /// job reachable from it through residual job↔slot edges (edges
    /// touching source or sink are not traversed). Raw cuts may repeat or
    /// nest — run [`remove_redundant`] afterwards.
    pub fn extract_cuts(&self) -> Result<Vec<CutSet>, RappError> {
        let max_flow = self.max_flow.expect("run_max_flow before extract_cuts");
        if max_flow == self.required_flow {
            return Err(RappError::NetworkFeasible {
                max_flow,
                required_flow: self.required_flow,
            });
        }
        let node_to_job: BTreeMap<usize, usize> =
            self.job_node.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        let mut cuts = Vec::new();
        for (qi, &edge) in self.source_edges.iter().enumerate() {
            if self.net.residual(edge) == 0 {
                continue;
            }
            let mut cut: CutSet = BTreeSet::from([self.jobs[qi]]);
            let mut seen = vec![false; self.net.node_count()];
            seen[self.source] = true;
            seen[self.sink] = true;
            seen[self.job_node[qi]] = true;
            let mut stack = vec![self.job_node[qi]];
            while let Some(u) = stack.pop() {
                for &e in &self.net.adj[u] {
                    let v = self.net.to[e as usize] as usize;
                    if self.net.cap[e as usize] > 0 && !seen[v] {
                        seen[v] = true;
                        if let Some(&ji) = node_to_job.get(&v) {
                            cut.insert(self.jobs[ji]);
                        }
                        stack.push(v);
                    }
                }
            }
            cuts.push(cut);
        }
        Ok(cuts)
    }

    /// Graphviz rendering of the network with `flow/capacity` edge labels.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph rapp {\n  rankdir=LR;\n");
        out.push_str("  source [shape=circle];\n  sink [shape=circle];\n");
        for (i, id) in self.jobs.iter().enumerate() {
            let _ = writeln!(out, "  j{i} [label=\"{id}\" shape=box];");
        }
        for (&minute, &node) in &self.slot_node {
            let _ = writeln!(out, "  n{node} [label=\"t{minute}\" shape=ellipse];");
        }
        for (i, &e) in self.source_edges.iter().enumerate() {
            let _ = writeln!(
                out,
                "  source -> j{i} [label=\"{}/{}\"];",
                self.net.flow(e),
                self.net.flow(e) + self.net.residual(e)
            );
        }
        for (i, &jn) in self.job_node.iter().enumerate() {
            for &e in &self.net.adj[jn] {
                let e = e as usize;
                // Forward edges only (even ids are the edges we added).
                if e % 2 == 0 && self.net.to[e] as usize != self.source {
                    let v = self.net.to[e] as usize;
                    let _ = writeln!(
                        out,
                        "  j{i} -> n{v} [label=\"{}/{}\"];",
                        self.net.flow(e),
                        self.net.flow(e) + self.net.residual(e)
                    );
                }
            }
        }
        for &node in self.slot_node.values() {
            for &e in &self.net.adj[node] {
                let e = e as usize;
                if e % 2 == 0 && self.net.to[e] as usize == self.sink {
                    let _ = writeln!(
                        out,
                        "  n{node} -> sink [label=\"{}/{}\"];",
                        self.net.flow(e),
                        self.net.flow(e) + self.net.residual(e)
                    );
                }
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Runs the relaxation end to end for one team: build, max flow, verdict,
/// and (when infeasible) redundancy-filtered cuts.
pub fn solve_rapp(jobs: &[Job]) -> RappCertificate {
    let mut net = build_network(jobs);
    let max_flow = net.run_max_flow();
    let feasible = max_flow == net.required_flow;
    let cuts = if feasible {
        Vec::new()
    } else {
        remove_redundant(net.extract_cuts().expect("infeasible network"))
    };
    RappCertificate {
        feasible,
        max_flow,
        required_flow: net.required_flow,
        overlong: net.overlong.clone(),
        cuts,
    }
}

/// As [`solve_rapp`] but refuses team counts the relaxation does not model.
pub fn solve_rapp_for_teams(jobs: &[Job], teams: u32) -> Result<RappCertificate, RappError> {
    if teams != 1 {
        return Err(RappError::UnsupportedTeamCount(teams));
    }
    Ok(solve_rapp(jobs))
}

/// Keeps only inclusion-minimal cuts: processed in ascending cardinality,
/// a cut is dropped iff some already-kept cut is a subset of it (duplicates
/// count). The result is an antichain under set inclusion.
pub fn remove_redundant(mut cuts: Vec<CutSet>) -> Vec<CutSet> {
    cuts.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    let mut kept: Vec<CutSet> = Vec::new();
    for cut in cuts {
        if kept.iter().any(|k| k.is_subset(&cut)) {
            continue;
        }
        kept.push(cut);
    }
    kept
}
