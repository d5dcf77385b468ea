//! Bi-hierarchy test for assignment-constraint families.
//!
//! A family is bi-hierarchical when it splits into two laminar parts (inside
//! each part, any two sets are nested or disjoint). Two sets *cross* when they
//! intersect and neither contains the other; crossing sets must land in
//! different parts, so the family is bi-hierarchical exactly when the
//! crossing graph is bipartite.

use std::collections::{BTreeSet, VecDeque};

use serde::Serialize;

use crate::game::{AraGame, AssignmentConstraint, CellIndex};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ImplementabilityWitness {
    /// Constraint indices of the two laminar parts.
    Partition {
        first: Vec<usize>,
        second: Vec<usize>,
    },
    /// Constraint indices along an odd cycle of pairwise-crossing sets.
    OddCycle { constraints: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Implementability {
    pub bi_hierarchical: bool,
    pub witness: ImplementabilityWitness,
}

pub fn check_implementability(game: &AraGame) -> Implementability {
    classify(game.constraints())
}

pub fn crosses(a: &BTreeSet<CellIndex>, b: &BTreeSet<CellIndex>) -> bool {
    let intersects = a.intersection(b).next().is_some();
    intersects && !a.is_subset(b) && !b.is_subset(a)
}

/// Classifies an arbitrary constraint list.
pub fn classify(constraints: &[AssignmentConstraint]) -> Implementability {
    let supports: Vec<BTreeSet<CellIndex>> = constraints.iter().map(|s| s.support()).collect();
    classify_sets(&supports)
}

pub fn classify_sets(sets: &[BTreeSet<CellIndex>]) -> Implementability {
    let m = sets.len();
    let mut adj = vec![Vec::new(); m];
    for i in 0..m {
        for j in (i + 1)..m {
            if crosses(&sets[i], &sets[j]) {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }

    let mut color: Vec<Option<bool>> = vec![None; m];
    let mut parent: Vec<usize> = (0..m).collect();
    let mut depth = vec![0usize; m];
    for start in 0..m {
        if color[start].is_some() {
            continue;
        }
        color[start] = Some(false);
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            let cu = color[u].expect("queued nodes are colored");
            for &v in &adj[u] {
                match color[v] {
                    None => {
                        color[v] = Some(!cu);
                        parent[v] = u;
                        depth[v] = depth[u] + 1;
                        queue.push_back(v);
                    }
                    Some(cv) if cv == cu => {
                        return Implementability {
                            bi_hierarchical: false,
                            witness: ImplementabilityWitness::OddCycle {
                                constraints: odd_cycle(u, v, &parent, &depth),
                            },
                        };
                    }
                    Some(_) => {}
                }
            }
        }
    }

    let (first, second): (Vec<usize>, Vec<usize>) = (0..m).partition(|&i| color[i] == Some(false));
    Implementability {
        bi_hierarchical: true,
        witness: ImplementabilityWitness::Partition { first, second },
    }
}

/// Cycle through the BFS-tree paths of `u` and `v` (same color, adjacent).
fn odd_cycle(u: usize, v: usize, parent: &[usize], depth: &[usize]) -> Vec<usize> {
    let (mut a, mut b) = (u, v);
    let mut left = vec![a];
    let mut right = vec![b];
    while depth[a] > depth[b] {
        a = parent[a];
        left.push(a);
    }
    while depth[b] > depth[a] {
        b = parent[b];
        right.push(b);
    }
    while a != b {
        a = parent[a];
        b = parent[b];
        left.push(a);
        right.push(b);
    }
    right.pop();
    right.reverse();
    left.extend(right);
    left
}

/// True when no two sets in `part` cross.
pub fn is_laminar(sets: &[BTreeSet<CellIndex>], part: &[usize]) -> bool {
    part.iter()
        .enumerate()
        .all(|(x, &i)| part[x + 1..].iter().all(|&j| !crosses(&sets[i], &sets[j])))
}
