use std::collections::{BTreeSet, HashSet};

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use super::RuleBase;

/// Rule dependency graph of one rule base. Edge `a -> b` means some
/// consequent variable of rule `a` appears in an antecedent of rule `b`.
/// Nodes are rule positions in source order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyGraph {
    rules: Vec<String>,
    edges: BTreeSet<(usize, usize)>,
}

pub fn dependency_graph(rb: &RuleBase) -> DependencyGraph {
    let reads: Vec<HashSet<&str>> = rb
        .rules
        .iter()
        .map(|r| r.antecedents.iter().map(|c| c.variable.as_str()).collect())
        .collect();
    let mut edges = BTreeSet::new();
    for (from, rule) in rb.rules.iter().enumerate() {
        for (to, read) in reads.iter().enumerate() {
            if rule
                .consequents
                .iter()
                .any(|a| read.contains(a.variable.as_str()))
            {
                edges.insert((from, to));
            }
        }
    }
    DependencyGraph {
        rules: rb.rules.iter().map(|r| r.id.clone()).collect(),
        edges,
    }
}

impl DependencyGraph {
    pub fn rule_ids(&self) -> &[String] {
        &self.rules
    }

    /// Edges as rule-id pairs, ordered by (source, target) position.
    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> + '_ {
        self.edges
            .iter()
            .map(|&(a, b)| (self.rules[a].as_str(), self.rules[b].as_str()))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, from: &str, to: &str) -> bool {
        self.edges().any(|(a, b)| a == from && b == to)
    }

    /// Strongly connected components with at least two rules, each listed in
    /// source order, components ordered by their first rule.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let mut g = DiGraph::<(), ()>::new();
        let nodes: Vec<_> = (0..self.rules.len()).map(|_| g.add_node(())).collect();
        for &(a, b) in &self.edges {
            g.add_edge(nodes[a], nodes[b], ());
        }
        let mut sccs: Vec<Vec<usize>> = tarjan_scc(&g)
            .into_iter()
            .filter(|c| c.len() >= 2)
            .map(|c| {
                let mut ids: Vec<usize> = c.into_iter().map(|n| n.index()).collect();
                ids.sort_unstable();
                ids
            })
            .collect();
        sccs.sort();
        sccs
    }
}
