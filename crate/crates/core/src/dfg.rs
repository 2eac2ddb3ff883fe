//! Per-signal dataflow graphs: def-use dependencies labeled with source
//! lines and the guard conditions controlling each assignment.

use crate::elaborate::{ElabExpr, ElabStmt, ElaboratedDesign, Process, SignalId};
use serde::Serialize;
use std::collections::{HashMap, HashSet, VecDeque};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DfgError {
    #[error("unknown signal '{0}'")]
    UnknownSignal(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DepKind {
    /// Same-cycle dependency (continuous assign or combinational block).
    Comb,
    /// Crosses a register: the source was read one cycle earlier.
    Seq,
}

/// One guard enclosing an assignment, with the branch it must select.
#[derive(Debug, Clone)]
pub struct Guard {
    pub kind: GuardKind,
    pub line: u32,
}

#[derive(Debug, Clone)]
pub enum GuardKind {
    Truthy(ElabExpr),
    Falsy(ElabExpr),
    /// Case arm: selector matches one of the labels.
    CaseMatch { selector: ElabExpr, labels: Vec<ElabExpr> },
    /// Default arm: selector matches none of the labels.
    CaseDefault { selector: ElabExpr, all_labels: Vec<ElabExpr> },
}

/// One assignment that can define `dst`: its data sources, the guards that
/// must select it, and the guard signals themselves.
#[derive(Debug, Clone)]
pub struct DfgDep {
    pub kind: DepKind,
    /// Line of the assignment statement.
    pub line: u32,
    pub data_srcs: Vec<SignalId>,
    pub guards: Vec<Guard>,
    /// (signal read by a guard, line of that guard statement)
    pub guard_srcs: Vec<(SignalId, u32)>,
    /// For register deps, the line of the owning always block's event
    /// control: the commit depends on the listed edges.
    pub process_line: Option<u32>,
}

/// Backward-reachable def-use graph from one target signal.
#[derive(Debug, Clone)]
pub struct Dfg {
    pub target: SignalId,
    pub deps: HashMap<SignalId, Vec<DfgDep>>,
    pub nodes: HashSet<SignalId>,
    /// Declaration line of every node; definition sites participate in
    /// slices so declaration-level faults remain localizable.
    pub decl_lines: HashMap<SignalId, u32>,
}

impl Dfg {
    /// Static backward slice: every line reachable ignoring guards and time.
    pub fn static_slice(&self) -> std::collections::BTreeSet<u32> {
        let mut lines = std::collections::BTreeSet::new();
        for deps in self.deps.values() {
            for dep in deps {
                lines.insert(dep.line);
                if let Some(pl) = dep.process_line {
                    lines.insert(pl);
                }
                for (_, gline) in &dep.guard_srcs {
                    lines.insert(*gline);
                }
                for g in &dep.guards {
                    lines.insert(g.line);
                }
            }
        }
        for l in self.decl_lines.values() {
            lines.insert(*l);
        }
        lines
    }

    /// The combinational projection must be acyclic; cycles may only pass
    /// through registers.
    pub fn comb_projection_acyclic(&self) -> bool {
        // Kahn's algorithm over Comb edges restricted to graph nodes
        let mut indegree: HashMap<SignalId, usize> = self.nodes.iter().map(|&n| (n, 0)).collect();
        let mut out_edges: HashMap<SignalId, Vec<SignalId>> = HashMap::new();
        let mut edge_count = 0usize;
        for (&dst, deps) in &self.deps {
            for dep in deps {
                if dep.kind != DepKind::Comb {
                    continue;
                }
                for src in dep.data_srcs.iter().chain(dep.guard_srcs.iter().map(|(s, _)| s)) {
                    if !self.nodes.contains(src) {
                        continue;
                    }
                    out_edges.entry(*src).or_default().push(dst);
                    *indegree.entry(dst).or_insert(0) += 1;
                    edge_count += 1;
                }
            }
        }
        let mut queue: VecDeque<SignalId> = indegree.iter().filter(|(_, &d)| d == 0).map(|(&n, _)| n).collect();
        let mut removed = 0usize;
        while let Some(n) = queue.pop_front() {
            for &m in out_edges.get(&n).into_iter().flatten() {
                let d = indegree.get_mut(&m).unwrap();
                *d -= 1;
                removed += 1;
                if *d == 0 {
                    queue.push_back(m);
                }
            }
        }
        removed == edge_count
    }
}

/// Every assignment in the design, indexed by defined signal. Built once and
/// filtered per target by [`build_dfg`].
pub fn collect_deps(elab: &ElaboratedDesign) -> HashMap<SignalId, Vec<DfgDep>> {
    let mut deps: HashMap<SignalId, Vec<DfgDep>> = HashMap::new();
    for p in &elab.processes {
        match p {
            Process::Assign { lhs, rhs, line, .. } => {
                let mut data = Vec::new();
                rhs.read_signals(&mut data);
                dedup(&mut data);
                let mut bases = Vec::new();
                lhs.bases(&mut bases);
                for b in bases {
                    deps.entry(b).or_default().push(DfgDep {
                        kind: DepKind::Comb,
                        line: *line,
                        data_srcs: data.clone(),
                        guards: Vec::new(),
                        guard_srcs: Vec::new(),
                        process_line: None,
                    });
                }
            }
            Process::Comb { body, .. } => walk_body(body, DepKind::Comb, None, &mut Vec::new(), &mut deps),
            Process::Seq { body, line, .. } => walk_body(body, DepKind::Seq, Some(*line), &mut Vec::new(), &mut deps),
        }
    }
    deps
}

fn walk_body(
    body: &[ElabStmt],
    kind: DepKind,
    process_line: Option<u32>,
    guards: &mut Vec<Guard>,
    deps: &mut HashMap<SignalId, Vec<DfgDep>>,
) {
    for stmt in body {
        match stmt {
            ElabStmt::Assign { lhs, rhs, kind: _, line } => {
                let mut data = Vec::new();
                rhs.read_signals(&mut data);
                dedup(&mut data);
                let mut guard_srcs = Vec::new();
                for g in guards.iter() {
                    let mut sigs = Vec::new();
                    match &g.kind {
                        GuardKind::Truthy(e) | GuardKind::Falsy(e) => e.read_signals(&mut sigs),
                        GuardKind::CaseMatch { selector, labels } => {
                            selector.read_signals(&mut sigs);
                            for l in labels {
                                l.read_signals(&mut sigs);
                            }
                        }
                        GuardKind::CaseDefault { selector, all_labels } => {
                            selector.read_signals(&mut sigs);
                            for l in all_labels {
                                l.read_signals(&mut sigs);
                            }
                        }
                    }
                    dedup(&mut sigs);
                    guard_srcs.extend(sigs.into_iter().map(|s| (s, g.line)));
                }
                let mut bases = Vec::new();
                lhs.bases(&mut bases);
                for b in bases {
                    deps.entry(b).or_default().push(DfgDep {
                        kind,
                        line: *line,
                        data_srcs: data.clone(),
                        guards: guards.clone(),
                        guard_srcs: guard_srcs.clone(),
                        process_line,
                    });
                }
            }
            ElabStmt::If { cond, then_body, else_body, line } => {
                guards.push(Guard { kind: GuardKind::Truthy(cond.clone()), line: *line });
                walk_body(then_body, kind, process_line, guards, deps);
                guards.pop();
                guards.push(Guard { kind: GuardKind::Falsy(cond.clone()), line: *line });
                walk_body(else_body, kind, process_line, guards, deps);
                guards.pop();
            }
            ElabStmt::Case { selector, arms, default, line } => {
                let all_labels: Vec<ElabExpr> = arms.iter().flat_map(|(ls, _)| ls.iter().cloned()).collect();
                for (labels, body) in arms {
                    guards.push(Guard {
                        kind: GuardKind::CaseMatch { selector: selector.clone(), labels: labels.clone() },
                        line: *line,
                    });
                    walk_body(body, kind, process_line, guards, deps);
                    guards.pop();
                }
                guards.push(Guard {
                    kind: GuardKind::CaseDefault { selector: selector.clone(), all_labels },
                    line: *line,
                });
                walk_body(default, kind, process_line, guards, deps);
                guards.pop();
            }
        }
    }
}

fn dedup(v: &mut Vec<SignalId>) {
    v.sort_unstable();
    v.dedup();
}

/// Backward-reachable dependency graph from `signal`.
pub fn build_dfg(elab: &ElaboratedDesign, signal: &str) -> Result<Dfg, DfgError> {
    let target = elab.lookup(signal).ok_or_else(|| DfgError::UnknownSignal(signal.to_string()))?;
    let all = collect_deps(elab);
    let mut nodes = HashSet::new();
    let mut deps = HashMap::new();
    let mut decl_lines = HashMap::new();
    let mut queue = VecDeque::new();
    nodes.insert(target);
    queue.push_back(target);
    while let Some(sig) = queue.pop_front() {
        let Some(sig_deps) = all.get(&sig) else { continue };
        for dep in sig_deps {
            for src in dep.data_srcs.iter().chain(dep.guard_srcs.iter().map(|(s, _)| s)) {
                if nodes.insert(*src) {
                    queue.push_back(*src);
                }
            }
        }
        deps.insert(sig, sig_deps.clone());
    }
    for &n in &nodes {
        decl_lines.insert(n, elab.signal(n).decl_line);
    }
    Ok(Dfg { target, deps, nodes, decl_lines })
}
