//! Grouping overfitted components: assignments `[L] -> [K]`, single-linkage
//! dendrograms over a dissimilarity matrix, dendrogram cuts, and aggregation
//! of a mixture into a mixing measure.

use std::io::Write;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::metrics::DistanceMatrix;
use crate::mixture::{GaussianMixture, MixingMeasure};

/// A surjective map from `L` components onto `K` groups, stored 0-based.
///
/// Serializes as a JSON array of 1-based group numbers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    map: Vec<usize>,
    k: usize,
}

impl Assignment {
    pub fn new(map: Vec<usize>, k: usize) -> Result<Self> {
        let mut seen = vec![false; k];
        for &g in &map {
            if g >= k {
                return Err(Error::InvalidAssignment(format!("group {g} out of range for K = {k}")));
            }
            seen[g] = true;
        }
        if let Some(empty) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidAssignment(format!("group {} is empty", empty + 1)));
        }
        Ok(Self { map, k })
    }

    /// Infers `K` as the number of distinct labels after canonical relabeling.
    pub fn from_labels(labels: &[usize]) -> Self {
        let (map, k) = canonical_labels(labels);
        Self { map, k }
    }

    pub fn identity(l: usize) -> Self {
        Self {
            map: (0..l).collect(),
            k: l,
        }
    }

    pub fn constant(l: usize) -> Self {
        Self {
            map: vec![0; l],
            k: 1,
        }
    }

    pub fn map(&self) -> &[usize] {
        &self.map
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn group_of(&self, i: usize) -> usize {
        self.map[i]
    }

    pub fn members(&self, g: usize) -> Vec<usize> {
        (0..self.map.len()).filter(|&i| self.map[i] == g).collect()
    }

    /// Relabels groups in order of first occurrence.
    pub fn canonical(&self) -> Self {
        Self::from_labels(&self.map)
    }

    /// Equality up to relabeling of groups.
    pub fn same_partition(&self, other: &Self) -> bool {
        self.canonical() == other.canonical()
    }
}

impl Serialize for Assignment {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.map.iter().map(|g| g + 1))
    }
}

impl<'de> Deserialize<'de> for Assignment {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<usize>::deserialize(d)?;
        if raw.contains(&0) {
            return Err(serde::de::Error::custom("assignment labels are 1-based"));
        }
        let k = raw.iter().copied().max().unwrap_or(0);
        Assignment::new(raw.into_iter().map(|g| g - 1).collect(), k).map_err(serde::de::Error::custom)
    }
}

/// Relabels arbitrary labels to `0..K` in order of first occurrence.
pub fn canonical_labels(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut lookup = std::collections::HashMap::new();
    let map = labels
        .iter()
        .map(|l| {
            let next = lookup.len();
            *lookup.entry(*l).or_insert(next)
        })
        .collect();
    (map, lookup.len())
}

/// Anything that can serve as a dense symmetric dissimilarity.
pub trait Dissimilarity {
    fn size(&self) -> usize;
    fn dist(&self, i: usize, j: usize) -> f64;
}

impl Dissimilarity for DistanceMatrix {
    fn size(&self) -> usize {
        self.len()
    }

    fn dist(&self, i: usize, j: usize) -> f64 {
        self.get(i, j)
    }
}

/// One agglomeration step. Leaves are `0..n`; the cluster created at step `s`
/// has id `n + s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
}

/// Ordered merges with non-decreasing heights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    leaves: usize,
    merges: Vec<Merge>,
}

impl Dendrogram {
    pub fn leaves(&self) -> usize {
        self.leaves
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    pub fn heights(&self) -> Vec<f64> {
        self.merges.iter().map(|m| m.height).collect()
    }

    /// CSV with header `id_a,id_b,height`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "id_a,id_b,height")?;
        for m in &self.merges {
            writeln!(out, "{},{},{:.16e}", m.a, m.b, m.height)?;
        }
        Ok(())
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
}

/// Builds a dendrogram from the edges of a spanning tree, merging in order of
/// (weight, smaller endpoint, larger endpoint).
fn dendrogram_from_tree(n: usize, mut edges: Vec<(usize, usize, f64)>) -> Dendrogram {
    edges.sort_by(|x, y| {
        x.2.total_cmp(&y.2)
            .then(x.0.min(x.1).cmp(&y.0.min(y.1)))
            .then(x.0.max(x.1).cmp(&y.0.max(y.1)))
    });
    let mut uf = UnionFind::new(n);
    let mut cluster_id: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for (step, (i, j, h)) in edges.into_iter().enumerate() {
        let (ri, rj) = (uf.find(i), uf.find(j));
        let (a, b) = (cluster_id[ri].min(cluster_id[rj]), cluster_id[ri].max(cluster_id[rj]));
        uf.parent[rj] = ri;
        cluster_id[ri] = n + step;
        merges.push(Merge { a, b, height: h });
    }
    Dendrogram { leaves: n, merges }
}

/// Minimum spanning tree by Prim's algorithm on a dense dissimilarity,
/// returned as `(from, to, weight)` edges. Ties go to the lowest index.
pub fn minimum_spanning_tree<D: Dissimilarity + ?Sized>(d: &D) -> Vec<(usize, usize, f64)> {
    let n = d.size();
    if n == 0 {
        return Vec::new();
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut from = vec![0usize; n];
    let mut edges = Vec::with_capacity(n - 1);
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        let mut next = usize::MAX;
        let mut next_dist = f64::INFINITY;
        for v in 0..n {
            if in_tree[v] {
                continue;
            }
            let dv = d.dist(current, v);
            if dv < best[v] {
                best[v] = dv;
                from[v] = current;
            }
            if next == usize::MAX || best[v] < next_dist {
                next = v;
                next_dist = best[v];
            }
        }
        in_tree[next] = true;
        edges.push((from[next], next, next_dist));
        current = next;
    }
    edges
}

/// Single-linkage agglomeration via the minimum spanning tree.
pub fn single_linkage<D: Dissimilarity + ?Sized>(d: &D) -> Dendrogram {
    dendrogram_from_tree(d.size(), minimum_spanning_tree(d))
}

/// Agglomeration rules available for grouping components.
///
/// Only single linkage carries the recovery guarantee under Hellinger
/// separation; complete linkage is provided for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Linkage {
    #[default]
    Single,
    Complete,
}

/// Hierarchical clustering under the chosen linkage.
pub fn hierarchical<D: Dissimilarity + ?Sized>(d: &D, linkage: Linkage) -> Dendrogram {
    match linkage {
        Linkage::Single => single_linkage(d),
        Linkage::Complete => complete_linkage(d),
    }
}

// O(n^3) agglomeration; used on component sets of at most a few hundred.
fn complete_linkage<D: Dissimilarity + ?Sized>(d: &D) -> Dendrogram {
    let n = d.size();
    let mut active: Vec<(usize, Vec<usize>)> = (0..n).map(|i| (i, vec![i])).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for step in 0..n.saturating_sub(1) {
        let mut best = (f64::INFINITY, 0, 1);
        for x in 0..active.len() {
            for y in (x + 1)..active.len() {
                let h = active[x]
                    .1
                    .iter()
                    .flat_map(|&i| active[y].1.iter().map(move |&j| (i, j)))
                    .map(|(i, j)| d.dist(i, j))
                    .fold(0.0_f64, f64::max);
                if h < best.0 {
                    best = (h, x, y);
                }
            }
        }
        let (h, x, y) = best;
        let (id_y, members_y) = active.remove(y);
        let (id_x, members_x) = &mut active[x];
        merges.push(Merge {
            a: (*id_x).min(id_y),
            b: (*id_x).max(id_y),
            height: h,
        });
        members_x.extend(members_y);
        *id_x = n + step;
    }
    Dendrogram { leaves: n, merges }
}

/// Cuts the dendrogram into `k` groups by undoing its `k - 1` last merges.
pub fn cut(dendro: &Dendrogram, k: usize) -> Result<Assignment> {
    let n = dendro.leaves;
    if k == 0 {
        return Err(Error::InvalidParameter("cannot cut into zero groups".into()));
    }
    if k > n {
        return Err(Error::TooManyGroups { k, l: n });
    }
    let mut uf = UnionFind::new(2 * n);
    for (step, m) in dendro.merges.iter().take(n - k).enumerate() {
        uf.parent[m.a] = n + step;
        uf.parent[m.b] = n + step;
    }
    let roots: Vec<usize> = (0..n).map(|i| uf.find(i)).collect();
    Ok(Assignment::from_labels(&roots))
}

/// Aggregates `q` by `alpha` into the mixing measure whose atom `k` is the
/// renormalized sub-mixture over `alpha^{-1}(k)`, with weight equal to the
/// total weight of that group.
pub fn group(q: &GaussianMixture, alpha: &Assignment) -> Result<MixingMeasure> {
    if alpha.len() != q.len() {
        return Err(Error::LengthMismatch(alpha.len(), q.len()));
    }
    let mut group_weights = Vec::with_capacity(alpha.k());
    let mut atoms = Vec::with_capacity(alpha.k());
    for g in 0..alpha.k() {
        let members = alpha.members(g);
        if members.is_empty() {
            return Err(Error::InvalidAssignment(format!("group {} is empty", g + 1)));
        }
        let total: f64 = members.iter().map(|&l| q.weights()[l]).sum();
        let weights = members.iter().map(|&l| q.weights()[l] / total).collect();
        let comps = members.iter().map(|&l| q.components()[l].clone()).collect();
        group_weights.push(total);
        atoms.push(GaussianMixture::new(weights, comps)?);
    }
    MixingMeasure::new(group_weights, atoms)
}

/// A pair that breaks the within `<= eta` / between `>= 2 eta` dichotomy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdViolation {
    pub i: usize,
    pub j: usize,
    pub distance: f64,
    pub same_group: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCheck {
    pub passed: bool,
    pub violations: Vec<ThresholdViolation>,
}

/// Checks that every within-group distance is `<= eta` and every
/// between-group distance is `>= 2 eta`.
pub fn threshold_check(d: &DistanceMatrix, alpha: &Assignment, eta: f64) -> Result<ThresholdCheck> {
    if d.len() != alpha.len() {
        return Err(Error::LengthMismatch(d.len(), alpha.len()));
    }
    let mut violations = Vec::new();
    for i in 0..d.len() {
        for j in (i + 1)..d.len() {
            let same_group = alpha.group_of(i) == alpha.group_of(j);
            let distance = d.get(i, j);
            let ok = if same_group { distance <= eta } else { distance >= 2.0 * eta };
            if !ok {
                violations.push(ThresholdViolation {
                    i,
                    j,
                    distance,
                    same_group,
                });
            }
        }
    }
    Ok(ThresholdCheck {
        passed: violations.is_empty(),
        violations,
    })
}
