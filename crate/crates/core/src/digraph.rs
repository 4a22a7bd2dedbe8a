//! Finite digraphs, binary-relation algebra, paths, fences, linkedness and
//! smooth parts.

use crate::bitset::BitSet;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Direction token of an abstract path step: traverse an edge forwards or
/// backwards.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub enum Dir {
    Fwd,
    Bwd,
}

impl Dir {
    pub fn flip(self) -> Dir {
        match self {
            Dir::Fwd => Dir::Bwd,
            Dir::Bwd => Dir::Fwd,
        }
    }
}

/// An abstract path: a finite sequence of direction tokens.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct AbstractPath(pub Vec<Dir>);

impl AbstractPath {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of forward tokens minus number of backward tokens.
    pub fn algebraic_length(&self) -> i64 {
        self.0
            .iter()
            .map(|d| match d {
                Dir::Fwd => 1i64,
                Dir::Bwd => -1,
            })
            .sum()
    }

    /// Reversal: reverse the order and flip every token.
    pub fn reversed(&self) -> AbstractPath {
        AbstractPath(self.0.iter().rev().map(|d| d.flip()).collect())
    }

    pub fn concat(&self, other: &AbstractPath) -> AbstractPath {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        AbstractPath(v)
    }
}

/// A binary relation on `0..n`, stored densely one bit-row per source.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinRel {
    n: usize,
    rows: Vec<BitSet>,
}

impl BinRel {
    pub fn empty(n: usize) -> Self {
        BinRel { n, rows: vec![BitSet::new(n); n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut r = BinRel::empty(n);
        for i in 0..n {
            r.insert(i, i);
        }
        r
    }

    pub fn full(n: usize) -> Self {
        BinRel { n, rows: vec![BitSet::full(n); n] }
    }

    pub fn from_pairs<I: IntoIterator<Item = (usize, usize)>>(n: usize, pairs: I) -> Self {
        let mut r = BinRel::empty(n);
        for (a, b) in pairs {
            r.insert(a, b);
        }
        r
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn insert(&mut self, a: usize, b: usize) {
        self.rows[a].insert(b);
    }

    pub fn remove(&mut self, a: usize, b: usize) {
        self.rows[a].remove(b);
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        self.rows[a].contains(b)
    }

    pub fn row(&self, a: usize) -> &BitSet {
        &self.rows[a]
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |a| self.rows[a].iter().map(move |b| (a, b)))
    }

    pub fn count(&self) -> usize {
        self.rows.iter().map(|r| r.count()).sum()
    }

    pub fn is_full(&self) -> bool {
        self.count() == self.n * self.n
    }

    fn check_same_n(&self, other: &BinRel) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DomainMismatch(self.n, other.n));
        }
        Ok(())
    }

    /// Relational composition: `(a, c)` whenever `(a, b)` here and `(b, c)` in
    /// `other` for some `b`.
    pub fn compose(&self, other: &BinRel) -> Result<BinRel> {
        self.check_same_n(other)?;
        let mut out = BinRel::empty(self.n);
        for a in 0..self.n {
            let row = &mut out.rows[a];
            for b in self.rows[a].iter() {
                row.union_with(&other.rows[b]);
            }
        }
        Ok(out)
    }

    pub fn inverse(&self) -> BinRel {
        let mut out = BinRel::empty(self.n);
        for (a, b) in self.pairs() {
            out.insert(b, a);
        }
        out
    }

    pub fn intersect(&self, other: &BinRel) -> Result<BinRel> {
        self.check_same_n(other)?;
        let mut out = self.clone();
        for a in 0..self.n {
            out.rows[a].intersect_with(&other.rows[a]);
        }
        Ok(out)
    }

    pub fn union(&self, other: &BinRel) -> Result<BinRel> {
        self.check_same_n(other)?;
        let mut out = self.clone();
        for a in 0..self.n {
            out.rows[a].union_with(&other.rows[a]);
        }
        Ok(out)
    }

    /// k-fold composition with itself; `power(0)` is the identity.
    pub fn power(&self, k: usize) -> BinRel {
        let mut out = BinRel::identity(self.n);
        for _ in 0..k {
            out = out.compose(self).expect("same domain");
        }
        out
    }

    /// Restriction to a vertex set on both coordinates.
    pub fn restrict(&self, set: &BitSet) -> BinRel {
        let mut out = BinRel::empty(self.n);
        for a in set.iter() {
            let mut row = self.rows[a].clone();
            row.intersect_with(set);
            out.rows[a] = row;
        }
        out
    }

    /// Restriction of the second coordinate only.
    pub fn restrict_right(&self, set: &BitSet) -> BinRel {
        let mut out = self.clone();
        for a in 0..self.n {
            out.rows[a].intersect_with(set);
        }
        out
    }

    /// Restriction of the first coordinate only.
    pub fn restrict_left(&self, set: &BitSet) -> BinRel {
        let mut out = BinRel::empty(self.n);
        for a in set.iter() {
            out.rows[a] = self.rows[a].clone();
        }
        out
    }

    /// Image of a vertex set: `{ b : exists a in set with (a,b) }`.
    pub fn image(&self, set: &BitSet) -> BitSet {
        let mut out = BitSet::new(self.n);
        for a in set.iter() {
            out.union_with(&self.rows[a]);
        }
        out
    }

    /// Preimage of a vertex set: `{ a : exists b in set with (a,b) }`.
    pub fn preimage(&self, set: &BitSet) -> BitSet {
        let mut out = BitSet::new(self.n);
        for a in 0..self.n {
            if self.rows[a].intersects(set) {
                out.insert(a);
            }
        }
        out
    }

    pub fn is_reflexive_on(&self, set: &BitSet) -> bool {
        set.iter().all(|a| self.contains(a, a))
    }

    pub fn is_symmetric(&self) -> bool {
        self.pairs().all(|(a, b)| self.contains(b, a))
    }

    pub fn is_transitive(&self) -> bool {
        for (a, b) in self.pairs() {
            if !self.rows[b].is_subset(&self.rows[a]) {
                return false;
            }
        }
        true
    }

    /// Is this an equivalence relation on the given carrier set (and empty
    /// outside it)?
    pub fn is_equivalence_on(&self, set: &BitSet) -> bool {
        self.is_reflexive_on(set)
            && self.is_symmetric()
            && self.is_transitive()
            && self.pairs().all(|(a, b)| set.contains(a) && set.contains(b))
    }
}

impl std::fmt::Debug for BinRel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_set().entries(self.pairs()).finish()
    }
}

/// A relation of fixed arity, stored as a sorted duplicate-free tuple list.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct KaryRel {
    pub arity: usize,
    pub domain: usize,
    tuples: Vec<Vec<usize>>,
}

impl KaryRel {
    pub fn new(arity: usize, domain: usize, mut tuples: Vec<Vec<usize>>) -> Result<Self> {
        for t in &tuples {
            if t.len() != arity {
                return Err(Error::ArityMismatch { expected: arity, got: t.len() });
            }
            if t.iter().any(|&v| v >= domain) {
                return Err(Error::BadParameter(format!("tuple entry out of domain: {t:?}")));
            }
        }
        tuples.sort();
        tuples.dedup();
        Ok(KaryRel { arity, domain, tuples })
    }

    pub fn empty(arity: usize, domain: usize) -> Self {
        KaryRel { arity, domain, tuples: Vec::new() }
    }

    pub fn tuples(&self) -> &[Vec<usize>] {
        &self.tuples
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn contains(&self, t: &[usize]) -> bool {
        self.tuples.binary_search_by(|probe| probe.as_slice().cmp(t)).is_ok()
    }

    pub fn from_binrel(r: &BinRel) -> Self {
        KaryRel {
            arity: 2,
            domain: r.n(),
            tuples: r.pairs().map(|(a, b)| vec![a, b]).collect(),
        }
    }

    pub fn to_binrel(&self) -> Result<BinRel> {
        if self.arity != 2 {
            return Err(Error::ArityMismatch { expected: 2, got: self.arity });
        }
        Ok(BinRel::from_pairs(self.domain, self.tuples.iter().map(|t| (t[0], t[1]))))
    }

    pub fn from_unary_set(s: &BitSet) -> Self {
        KaryRel { arity: 1, domain: s.len(), tuples: s.iter().map(|v| vec![v]).collect() }
    }

    pub fn to_unary_set(&self) -> Result<BitSet> {
        if self.arity != 1 {
            return Err(Error::ArityMismatch { expected: 1, got: self.arity });
        }
        Ok(BitSet::from_iter(self.domain, self.tuples.iter().map(|t| t[0])))
    }

    /// Projection onto the given coordinate positions, in the given order.
    pub fn project(&self, coords: &[usize]) -> Result<KaryRel> {
        if coords.iter().any(|&c| c >= self.arity) {
            return Err(Error::BadParameter("projection coordinate out of range".into()));
        }
        KaryRel::new(
            coords.len(),
            self.domain,
            self.tuples.iter().map(|t| coords.iter().map(|&c| t[c]).collect()).collect(),
        )
    }
}

/// A finite digraph: `n` vertices and one binary edge relation.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Digraph {
    n: usize,
    edges: BinRel,
}

impl Digraph {
    pub fn new(n: usize, edge_list: &[(usize, usize)]) -> Result<Self> {
        for &(a, b) in edge_list {
            if a >= n || b >= n {
                return Err(Error::BadParameter(format!("edge ({a},{b}) out of range for n={n}")));
            }
        }
        Ok(Digraph { n, edges: BinRel::from_pairs(n, edge_list.iter().copied()) })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_rel(&self) -> &BinRel {
        &self.edges
    }

    pub fn edge_list(&self) -> Vec<(usize, usize)> {
        self.edges.pairs().collect()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(a, b)
    }

    pub fn out_neighbours(&self, a: usize) -> &BitSet {
        self.edges.row(a)
    }

    /// Induced subgraph on a vertex set, keeping the original vertex indices.
    pub fn induced(&self, set: &BitSet) -> Digraph {
        Digraph { n: self.n, edges: self.edges.restrict(set) }
    }

    /// A digraph is smooth when every vertex of the carrier has an incoming
    /// and an outgoing edge within the carrier.
    pub fn is_smooth_on(&self, set: &BitSet) -> bool {
        let inv = self.edges.inverse();
        set.iter().all(|v| {
            self.edges.row(v).intersects(set) && inv.row(v).intersects(set)
        })
    }

    pub fn is_smooth(&self) -> bool {
        self.is_smooth_on(&BitSet::full(self.n))
    }

    /// First vertex violating smoothness, if any.
    pub fn smoothness_witness(&self) -> Option<usize> {
        let inv = self.edges.inverse();
        let all = BitSet::full(self.n);
        (0..self.n).find(|&v| !self.edges.row(v).intersects(&all) || !inv.row(v).intersects(&all))
    }
}

/// The relation induced by the height-`k`, repetition-`n` fence: `n` rounds of
/// `k` forward steps followed by `k` backward steps.
pub fn fence_relation(g: &Digraph, k: usize, n: usize) -> Result<BinRel> {
    if k == 0 || n == 0 {
        return Err(Error::BadParameter("fence parameters must be >= 1".into()));
    }
    let fwd = g.edge_rel().power(k);
    let one = fwd.compose(&fwd.inverse())?;
    Ok(one.power(n))
}

/// The k-linkedness relation: the fixpoint of the fence relation in the
/// repetition count, together with a flag telling whether it is full.
///
/// Requires a smooth digraph; on non-smooth inputs fence classes degenerate.
pub fn linkedness(g: &Digraph, k: usize) -> Result<(BinRel, bool)> {
    if let Some(v) = g.smoothness_witness() {
        return Err(Error::NotSmooth(v));
    }
    if k == 0 {
        return Err(Error::BadParameter("linkedness parameter must be >= 1".into()));
    }
    let one = fence_relation(g, k, 1)?;
    let mut cur = one.clone();
    loop {
        let next = cur.compose(&one)?;
        if next == cur {
            break;
        }
        cur = next;
    }
    let is_full = cur.is_full();
    Ok((cur, is_full))
}

/// Linkedness restricted to a carrier set: fixpoint of fences of the induced
/// digraph, with fullness meaning full on the carrier.
pub fn linkedness_on(g: &Digraph, set: &BitSet, k: usize) -> Result<(BinRel, bool)> {
    let sub = g.induced(set);
    if !sub.is_smooth_on(set) {
        let v = set.iter().find(|&v| {
            !sub.edge_rel().row(v).intersects(set) || !sub.edge_rel().inverse().row(v).intersects(set)
        });
        return Err(Error::NotSmooth(v.unwrap_or(0)));
    }
    if k == 0 {
        return Err(Error::BadParameter("linkedness parameter must be >= 1".into()));
    }
    let fwd = sub.edge_rel().power(k).restrict(set);
    let one = fwd.compose(&fwd.inverse())?;
    let mut cur = one.clone();
    loop {
        let next = cur.compose(&one)?;
        if next == cur {
            break;
        }
        cur = next;
    }
    let m = set.count();
    let is_full = cur.count() == m * m;
    Ok((cur, is_full))
}

/// Largest subset of `domain` on which the induced digraph is smooth.
/// Iteratively prunes vertices lacking an in- or out-neighbour inside the
/// current set. The empty set is a legal value.
pub fn smooth_part(g: &Digraph, domain: &BitSet) -> BitSet {
    let inv = g.edge_rel().inverse();
    let mut cur = domain.clone();
    loop {
        let mut next = BitSet::new(g.n());
        for v in cur.iter() {
            if g.edge_rel().row(v).intersects(&cur) && inv.row(v).intersects(&cur) {
                next.insert(v);
            }
        }
        if next == cur {
            return cur;
        }
        cur = next;
    }
}

/// Partition of the vertex set into weakly connected components
/// (undirected-reachability classes), each sorted, ordered by smallest member.
pub fn weak_components(g: &Digraph) -> Vec<Vec<usize>> {
    weak_components_on(g, &BitSet::full(g.n()))
}

/// Weak components of the induced digraph on a carrier set.
pub fn weak_components_on(g: &Digraph, set: &BitSet) -> Vec<Vec<usize>> {
    let sym = g.edge_rel().union(&g.edge_rel().inverse()).expect("same domain").restrict(set);
    let mut seen = BitSet::new(g.n());
    let mut comps = Vec::new();
    for start in set.iter() {
        if seen.contains(start) {
            continue;
        }
        let mut comp = Vec::new();
        let mut stack = vec![start];
        seen.insert(start);
        while let Some(v) = stack.pop() {
            comp.push(v);
            for w in sym.row(v).iter() {
                if !seen.contains(w) {
                    seen.insert(w);
                    stack.push(w);
                }
            }
        }
        comp.sort_unstable();
        comps.push(comp);
    }
    comps.sort();
    comps
}

/// A closed walk witnessing algebraic length 1: a vertex sequence plus the
/// direction tokens connecting consecutive vertices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Walk {
    pub vertices: Vec<usize>,
    pub dirs: Vec<Dir>,
}

impl Walk {
    pub fn algebraic_length(&self) -> i64 {
        AbstractPath(self.dirs.clone()).algebraic_length()
    }

    /// Checks the walk is a realisation in `g` with equal endpoints.
    pub fn is_closed_unit_walk(&self, g: &Digraph) -> bool {
        if self.vertices.len() != self.dirs.len() + 1 {
            return false;
        }
        if self.vertices.first() != self.vertices.last() {
            return false;
        }
        if self.algebraic_length() != 1 {
            return false;
        }
        self.dirs.iter().enumerate().all(|(i, d)| {
            let (a, b) = (self.vertices[i], self.vertices[i + 1]);
            match d {
                Dir::Fwd => g.has_edge(a, b),
                Dir::Bwd => g.has_edge(b, a),
            }
        })
    }
}

/// Searches for a closed walk of algebraic length 1.
///
/// Runs a BFS per start vertex over states (vertex, running algebraic length)
/// with the length clamped to `|len| <= 2*n^2 + 1`; walks longer than that
/// bound cannot reach new states, so the search is complete at this bound.
pub fn find_unit_walk(g: &Digraph) -> Option<Walk> {
    let n = g.n();
    if n == 0 {
        return None;
    }
    let bound = 2 * (n as i64) * (n as i64) + 1;
    let width = (2 * bound + 1) as usize;
    let inv = g.edge_rel().inverse();
    let state = |v: usize, d: i64| -> usize { v * width + (d + bound) as usize };

    for start in 0..n {
        // parent[s] = (previous state, direction taken)
        let mut parent: Vec<Option<(usize, Dir)>> = vec![None; n * width];
        let start_state = state(start, 0);
        parent[start_state] = Some((start_state, Dir::Fwd)); // sentinel
        let mut queue = std::collections::VecDeque::from([(start, 0i64)]);
        let target = state(start, 1);
        'bfs: while let Some((v, d)) = queue.pop_front() {
            let steps: [(Dir, i64); 2] = [(Dir::Fwd, 1), (Dir::Bwd, -1)];
            for (dir, delta) in steps {
                let nd = d + delta;
                if nd.abs() > bound {
                    continue;
                }
                let nbrs = match dir {
                    Dir::Fwd => g.edge_rel().row(v),
                    Dir::Bwd => inv.row(v),
                };
                for w in nbrs.iter() {
                    let s = state(w, nd);
                    if parent[s].is_none() {
                        parent[s] = Some((state(v, d), dir));
                        if s == target {
                            break 'bfs;
                        }
                        queue.push_back((w, nd));
                    }
                }
            }
        }
        if parent[target].is_some() && target != start_state {
            // reconstruct
            let mut vertices = Vec::new();
            let mut dirs = Vec::new();
            let mut cur = target;
            while cur != start_state {
                let (prev, dir) = parent[cur].unwrap();
                vertices.push(cur / width);
                dirs.push(dir);
                cur = prev;
            }
            vertices.push(start);
            vertices.reverse();
            dirs.reverse();
            let walk = Walk { vertices, dirs };
            debug_assert!(walk.is_closed_unit_walk(g));
            return Some(walk);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    pub fn cycle(n: usize) -> Digraph {
        Digraph::new(n, &(0..n).map(|i| (i, (i + 1) % n)).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn compose_on_three_cycle() {
        let g = cycle(3);
        let sq = g.edge_rel().compose(g.edge_rel()).unwrap();
        assert_eq!(sq, BinRel::from_pairs(3, [(0, 2), (1, 0), (2, 1)]));
    }

    #[test]
    fn inverse_is_involutive() {
        let g = cycle(5);
        assert_eq!(g.edge_rel().inverse().inverse(), *g.edge_rel());
    }

    #[test]
    fn power_three_on_three_cycle_is_identity() {
        let g = cycle(3);
        assert_eq!(g.edge_rel().power(3), BinRel::identity(3));
    }

    #[test]
    fn fence_on_three_cycle_is_identity() {
        let g = cycle(3);
        assert_eq!(fence_relation(&g, 1, 1).unwrap(), BinRel::identity(3));
    }

    #[test]
    fn fence_on_loop_vertex_is_full() {
        let g = Digraph::new(1, &[(0, 0)]).unwrap();
        for k in 1..4 {
            for n in 1..4 {
                assert!(fence_relation(&g, k, n).unwrap().is_full());
            }
        }
    }

    #[test]
    fn fence_monotone_in_repetitions() {
        // any smooth digraph: F(k,1) subset of F(k,2)
        let g = Digraph::new(4, &[(0, 1), (1, 2), (2, 3), (3, 0), (1, 0)]).unwrap();
        assert!(g.is_smooth());
        for k in 1..4 {
            let f1 = fence_relation(&g, k, 1).unwrap();
            let f2 = fence_relation(&g, k, 2).unwrap();
            assert_eq!(f1.union(&f2).unwrap(), f2);
        }
    }

    #[test]
    fn linkedness_on_loop_is_full() {
        let g = Digraph::new(1, &[(0, 0)]).unwrap();
        assert!(linkedness(&g, 1).unwrap().1);
    }

    #[test]
    fn linkedness_on_three_cycle_has_three_classes() {
        let g = cycle(3);
        for k in 1..=6 {
            let (rel, full) = linkedness(&g, k).unwrap();
            assert!(!full);
            assert_eq!(rel, BinRel::identity(3));
        }
    }

    #[test]
    fn linkedness_rejects_non_smooth() {
        let g = Digraph::new(2, &[(0, 1)]).unwrap();
        assert!(matches!(linkedness(&g, 1), Err(Error::NotSmooth(_))));
    }

    #[test]
    fn linkedness_is_equivalence_on_smooth() {
        let g = Digraph::new(4, &[(0, 1), (1, 0), (0, 2), (2, 3), (3, 2), (1, 3)]).unwrap();
        assert!(g.is_smooth());
        for k in 1..4 {
            let (rel, _) = linkedness(&g, k).unwrap();
            assert!(rel.is_equivalence_on(&BitSet::full(4)));
        }
    }

    #[test]
    fn smooth_part_examples() {
        // two-vertex path: empty smooth part
        let g = Digraph::new(2, &[(0, 1)]).unwrap();
        assert!(smooth_part(&g, &BitSet::full(2)).is_empty());
        // loop at 0 plus an edge out: only the loop survives
        let g = Digraph::new(2, &[(0, 0), (0, 1)]).unwrap();
        assert_eq!(smooth_part(&g, &BitSet::full(2)).to_vec(), vec![0]);
        // three-cycle is already smooth
        let g = cycle(3);
        assert_eq!(smooth_part(&g, &BitSet::full(3)).count(), 3);
    }

    #[test]
    fn smooth_part_output_is_smooth_and_maximal() {
        let g = Digraph::new(5, &[(0, 1), (1, 2), (2, 0), (2, 3), (3, 4)]).unwrap();
        let sp = smooth_part(&g, &BitSet::full(5));
        assert!(g.is_smooth_on(&sp));
        assert_eq!(sp.to_vec(), vec![0, 1, 2]);
    }

    #[test]
    fn weak_components_examples() {
        let g = Digraph::new(3, &[]).unwrap();
        assert_eq!(weak_components(&g).len(), 3);
        let g = cycle(3);
        assert_eq!(weak_components(&g), vec![vec![0, 1, 2]]);
        let g = Digraph::new(6, &[(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)]).unwrap();
        assert_eq!(weak_components(&g), vec![vec![0, 1, 2], vec![3, 4, 5]]);
    }

    #[test]
    fn unit_walk_on_loop() {
        let g = Digraph::new(1, &[(0, 0)]).unwrap();
        let w = find_unit_walk(&g).unwrap();
        assert!(w.is_closed_unit_walk(&g));
        assert_eq!(w.dirs.len(), 1);
    }

    #[test]
    fn no_unit_walk_on_three_cycle() {
        assert!(find_unit_walk(&cycle(3)).is_none());
    }

    #[test]
    fn unit_walk_on_cycle_with_reversed_chord() {
        // three-cycle plus one symmetric edge gives algebraic length 1
        let g = Digraph::new(3, &[(0, 1), (1, 2), (2, 0), (1, 0)]).unwrap();
        let w = find_unit_walk(&g).unwrap();
        assert!(w.is_closed_unit_walk(&g));
    }

    #[test]
    fn unit_walk_iff_linked_small() {
        // cross-check on assorted small smooth weakly connected digraphs
        let cases: Vec<Digraph> = vec![
            cycle(3),
            cycle(4),
            Digraph::new(3, &[(0, 1), (1, 2), (2, 0), (1, 0)]).unwrap(),
            Digraph::new(4, &[(0, 1), (1, 0), (0, 2), (2, 3), (3, 2), (2, 0)]).unwrap(),
            Digraph::new(2, &[(0, 1), (1, 0)]).unwrap(),
            Digraph::new(4, &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)]).unwrap(),
        ];
        for g in cases {
            assert!(g.is_smooth());
            assert_eq!(weak_components(&g).len(), 1);
            let has_unit = find_unit_walk(&g).is_some();
            let linked = (1..=8).any(|k| linkedness(&g, k).map(|(_, f)| f).unwrap_or(false));
            assert_eq!(has_unit, linked, "mismatch on {:?}", g.edge_list());
        }
    }

    #[test]
    fn kary_rel_sorted_unique() {
        let r = KaryRel::new(2, 3, vec![vec![2, 1], vec![0, 0], vec![2, 1]]).unwrap();
        assert_eq!(r.tuples(), &[vec![0, 0], vec![2, 1]]);
        assert!(r.contains(&[2, 1]));
        assert!(!r.contains(&[1, 2]));
    }
}
