use super::AnalyticsError;
use crate::model::CorrelationMatrix;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, PartialEq)]
pub struct MstEdge {
    pub a: String,
    pub b: String,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MstEdges {
    /// In the order Kruskal accepted them.
    pub edges: Vec<MstEdge>,
    pub sectors: Option<BTreeMap<String, String>>,
}

impl MstEdges {
    pub fn total_distance(&self) -> f64 {
        self.edges.iter().map(|e| e.distance).sum()
    }
}

/// `sqrt(2 (1 - rho))`.
pub fn correlation_distance(rho: f64) -> f64 {
    (2.0 * (1.0 - rho)).max(0.0).sqrt()
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.0[root] != root {
            root = self.0[root];
        }
        let mut cur = x;
        while self.0[cur] != root {
            let next = self.0[cur];
            self.0[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.0[ra.max(rb)] = ra.min(rb);
        true
    }
}

/// Minimum spanning tree of the correlation distance graph. Ties are broken
/// by the lexicographically smaller label pair.
pub fn mst(
    corr: &CorrelationMatrix,
    labels: &[String],
    sectors: Option<&BTreeMap<String, String>>,
) -> Result<MstEdges, AnalyticsError> {
    let n = corr.n();
    if labels.len() != n {
        return Err(AnalyticsError::InvalidArgument(format!("{} labels for a {n}x{n} matrix", labels.len())));
    }
    if labels.iter().collect::<BTreeSet<_>>().len() != n {
        return Err(AnalyticsError::InvalidArgument("labels must be distinct".into()));
    }
    let mut candidates = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = if labels[i] < labels[j] { (i, j) } else { (j, i) };
            candidates.push((correlation_distance(corr.get(i, j)), a, b));
        }
    }
    candidates.sort_by(|x, y| {
        x.0.total_cmp(&y.0)
            .then_with(|| labels[x.1].cmp(&labels[y.1]))
            .then_with(|| labels[x.2].cmp(&labels[y.2]))
    });
    let mut uf = UnionFind((0..n).collect());
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    for (distance, a, b) in candidates {
        if uf.union(a, b) {
            edges.push(MstEdge {
                a: labels[a].clone(),
                b: labels[b].clone(),
                distance,
            });
            if edges.len() + 1 == n {
                break;
            }
        }
    }
    let sectors = sectors.map(|s| {
        labels
            .iter()
            .filter_map(|l| s.get(l).map(|sec| (l.clone(), sec.clone())))
            .collect()
    });
    Ok(MstEdges { edges, sectors })
}
