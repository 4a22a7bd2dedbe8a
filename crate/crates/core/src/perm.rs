//! Permutation groups given by generators: orbits on vertices and tuples,
//! quotient digraphs, invariance and reductionistic-set tests.

use crate::bitset::BitSet;
use crate::digraph::{BinRel, Digraph, KaryRel};
use crate::error::{Error, Result};
use std::cell::OnceCell;
use std::collections::{HashMap, HashSet, VecDeque};

pub type Perm = Vec<usize>;

pub fn perm_is_bijection(p: &[usize], n: usize) -> bool {
    if p.len() != n {
        return false;
    }
    let mut seen = vec![false; n];
    for &v in p {
        if v >= n || seen[v] {
            return false;
        }
        seen[v] = true;
    }
    true
}

pub fn perm_compose(f: &[usize], g: &[usize]) -> Perm {
    // apply f first, then g
    f.iter().map(|&v| g[v]).collect()
}

pub fn perm_inverse(f: &[usize]) -> Perm {
    let mut inv = vec![0; f.len()];
    for (i, &v) in f.iter().enumerate() {
        inv[v] = i;
    }
    inv
}

/// Default cap on materialised group closures.
pub const DEFAULT_CLOSURE_CAP: usize = 1_000_000;

/// A permutation group on `0..degree` given by generators. The full element
/// list is materialised lazily by breadth-first closure, capped.
#[derive(Clone, Debug)]
pub struct PermGroup {
    degree: usize,
    gens: Vec<Perm>,
    closure_cap: usize,
    closure: OnceCell<Vec<Perm>>,
}

impl PermGroup {
    pub fn new(degree: usize, gens: Vec<Perm>) -> Result<Self> {
        for (index, g) in gens.iter().enumerate() {
            if !perm_is_bijection(g, degree) {
                return Err(Error::NotABijection { index });
            }
        }
        Ok(PermGroup { degree, gens, closure_cap: DEFAULT_CLOSURE_CAP, closure: OnceCell::new() })
    }

    pub fn trivial(degree: usize) -> Self {
        PermGroup::new(degree, Vec::new()).expect("no generators to validate")
    }

    pub fn with_closure_cap(mut self, cap: usize) -> Self {
        self.closure_cap = cap;
        self
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn generators(&self) -> &[Perm] {
        &self.gens
    }

    /// Checks every generator is an automorphism of `g`.
    pub fn check_automorphisms(&self, g: &Digraph) -> Result<()> {
        if g.n() != self.degree {
            return Err(Error::DomainMismatch(g.n(), self.degree));
        }
        for (index, p) in self.gens.iter().enumerate() {
            for (u, v) in g.edge_list() {
                if !g.has_edge(p[u], p[v]) {
                    return Err(Error::NotAnAutomorphism { index, u, v });
                }
            }
        }
        Ok(())
    }

    /// All group elements, by breadth-first closure of the generators.
    pub fn elements(&self) -> Result<&[Perm]> {
        if let Some(c) = self.closure.get() {
            return Ok(c);
        }
        let mut seen: HashSet<Perm> = HashSet::new();
        let identity: Perm = (0..self.degree).collect();
        let mut queue = VecDeque::from([identity.clone()]);
        seen.insert(identity);
        let mut out = Vec::new();
        while let Some(f) = queue.pop_front() {
            out.push(f.clone());
            if out.len() + queue.len() > self.closure_cap {
                return Err(Error::ClosureCapExceeded(self.closure_cap));
            }
            for gen in &self.gens {
                let h = perm_compose(&f, gen);
                if seen.insert(h.clone()) {
                    queue.push_back(h);
                }
            }
        }
        out.sort();
        let _ = self.closure.set(out);
        Ok(self.closure.get().unwrap())
    }

    pub fn order(&self) -> Result<usize> {
        Ok(self.elements()?.len())
    }

    /// Orbit of a tuple under the componentwise action, via generator BFS.
    pub fn tuple_orbit(&self, t: &[usize]) -> Vec<Vec<usize>> {
        let mut seen: HashSet<Vec<usize>> = HashSet::new();
        let mut queue = VecDeque::from([t.to_vec()]);
        seen.insert(t.to_vec());
        while let Some(cur) = queue.pop_front() {
            for gen in &self.gens {
                let img: Vec<usize> = cur.iter().map(|&v| gen[v]).collect();
                if seen.insert(img.clone()) {
                    queue.push_back(img);
                }
            }
        }
        let mut v: Vec<_> = seen.into_iter().collect();
        v.sort();
        v
    }

    /// Orbit of a vertex set under the setwise action.
    pub fn set_orbit(&self, s: &BitSet) -> Vec<BitSet> {
        let mut seen: HashSet<Vec<usize>> = HashSet::new();
        let start = s.to_vec();
        let mut queue = VecDeque::from([start.clone()]);
        seen.insert(start);
        while let Some(cur) = queue.pop_front() {
            for gen in &self.gens {
                let mut img: Vec<usize> = cur.iter().map(|&v| gen[v]).collect();
                img.sort_unstable();
                if seen.insert(img.clone()) {
                    queue.push_back(img);
                }
            }
        }
        let mut v: Vec<_> = seen.into_iter().collect();
        v.sort();
        v.into_iter().map(|m| BitSet::from_iter(self.degree, m)).collect()
    }
}

/// Orbit partition of the k-tuple space under a group.
#[derive(Clone, Debug)]
pub struct OrbitPartition {
    pub arity: usize,
    pub orbits: Vec<Vec<Vec<usize>>>,
    index: HashMap<Vec<usize>, usize>,
}

impl OrbitPartition {
    pub fn orbit_of(&self, t: &[usize]) -> Option<usize> {
        self.index.get(t).copied()
    }

    pub fn len(&self) -> usize {
        self.orbits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orbits.is_empty()
    }

    /// Vertex-orbit id of a single point (arity-1 partitions only).
    pub fn class_of_vertex(&self, v: usize) -> usize {
        debug_assert_eq!(self.arity, 1);
        self.index[&vec![v]]
    }

    pub fn orbit_sets(&self, degree: usize) -> Vec<BitSet> {
        debug_assert_eq!(self.arity, 1);
        self.orbits
            .iter()
            .map(|o| BitSet::from_iter(degree, o.iter().map(|t| t[0])))
            .collect()
    }
}

/// Exact orbit partition of all k-tuples. Arity is capped at 4; the tuple
/// space for larger arities explodes under the blow-up constructions.
pub fn orbits(gp: &PermGroup, k: usize) -> Result<OrbitPartition> {
    if k == 0 || k > 4 {
        return Err(Error::Guard(format!("tuple-orbit arity {k} outside 1..=4")));
    }
    let n = gp.degree();
    let total: usize = n.pow(k as u32);
    let mut index: HashMap<Vec<usize>, usize> = HashMap::with_capacity(total);
    let mut orbits_out: Vec<Vec<Vec<usize>>> = Vec::new();
    let mut tuple = vec![0usize; k];
    'outer: loop {
        if !index.contains_key(&tuple) {
            let orbit = gp.tuple_orbit(&tuple);
            let id = orbits_out.len();
            for t in &orbit {
                index.insert(t.clone(), id);
            }
            orbits_out.push(orbit);
        }
        // next tuple in lexicographic order
        for i in (0..k).rev() {
            tuple[i] += 1;
            if tuple[i] < n {
                continue 'outer;
            }
            tuple[i] = 0;
        }
        break;
    }
    Ok(OrbitPartition { arity: k, orbits: orbits_out, index })
}

/// Quotient digraph on 1-orbits, plus a witness edge lying inside an orbit
/// when one exists (a pseudoloop witness).
pub fn orbit_digraph(g: &Digraph, gp: &PermGroup) -> Result<(Digraph, OrbitPartition, Option<(usize, usize)>)> {
    gp.check_automorphisms(g)?;
    let part = orbits(gp, 1)?;
    let m = part.len();
    let mut edges = Vec::new();
    let mut witness = None;
    for (u, v) in g.edge_list() {
        let (ou, ov) = (part.class_of_vertex(u), part.class_of_vertex(v));
        edges.push((ou, ov));
        if ou == ov && witness.is_none() {
            witness = Some((u, v));
        }
    }
    Ok((Digraph::new(m, &edges)?, part, witness))
}

/// Relation invariance under every generator (hence under the whole group).
pub fn is_invariant_binrel(rel: &BinRel, gp: &PermGroup) -> Result<bool> {
    if rel.n() != gp.degree() {
        return Err(Error::DomainMismatch(rel.n(), gp.degree()));
    }
    for gen in gp.generators() {
        for (a, b) in rel.pairs() {
            if !rel.contains(gen[a], gen[b]) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

pub fn is_invariant_kary(rel: &KaryRel, gp: &PermGroup) -> Result<bool> {
    if rel.domain != gp.degree() {
        return Err(Error::DomainMismatch(rel.domain, gp.degree()));
    }
    for gen in gp.generators() {
        for t in rel.tuples() {
            let img: Vec<usize> = t.iter().map(|&v| gen[v]).collect();
            if !rel.contains(&img) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// A proper set is reductionistic exactly when its orbit under the setwise
/// action is a family of pairwise disjoint sets.
pub fn is_reductionistic(h: &BitSet, gp: &PermGroup) -> Result<bool> {
    if h.len() != gp.degree() {
        return Err(Error::DomainMismatch(h.len(), gp.degree()));
    }
    let count = h.count();
    if count == 0 || count == gp.degree() {
        return Err(Error::NotProper);
    }
    let orbit = gp.set_orbit(h);
    for (i, a) in orbit.iter().enumerate() {
        for b in orbit.iter().skip(i + 1) {
            if a.intersects(b) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Restriction of a group to a reductionistic set: the group on `|H|` points
/// generated by the restrictions of all closure elements fixing `H` setwise.
/// Returns the restricted group together with the sorted carrier (the i-th
/// point of the restriction is `carrier[i]`).
pub fn restrict_group(gp: &PermGroup, h: &BitSet) -> Result<(PermGroup, Vec<usize>)> {
    if !is_reductionistic(h, gp)? {
        return Err(Error::NotReductionistic);
    }
    let carrier = h.to_vec();
    let pos: HashMap<usize, usize> = carrier.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut gens: HashSet<Perm> = HashSet::new();
    for f in gp.elements()? {
        if carrier.iter().all(|&v| h.contains(f[v])) {
            let restricted: Perm = carrier.iter().map(|&v| pos[&f[v]]).collect();
            gens.insert(restricted);
        }
    }
    let identity: Perm = (0..carrier.len()).collect();
    gens.remove(&identity);
    let mut gens: Vec<Perm> = gens.into_iter().collect();
    gens.sort();
    Ok((PermGroup::new(carrier.len(), gens)?, carrier))
}

/// The action of the group on the blocks of an invariant partition: each
/// element of the image is a permutation of block indices, paired with a
/// witness group element inducing it.
pub fn block_action(gp: &PermGroup, blocks: &[BitSet]) -> Result<Vec<(Perm, Perm)>> {
    let block_of: HashMap<usize, usize> = blocks
        .iter()
        .enumerate()
        .flat_map(|(i, b)| b.iter().map(move |v| (v, i)))
        .collect();
    let induce = |f: &Perm| -> Result<Perm> {
        let mut img = vec![usize::MAX; blocks.len()];
        for (i, b) in blocks.iter().enumerate() {
            let v = b.iter().next().expect("blocks are nonempty");
            let j = *block_of
                .get(&f[v])
                .ok_or_else(|| Error::BadParameter("partition does not cover image".into()))?;
            // invariance: the whole block must land in block j
            for w in b.iter() {
                if block_of.get(&f[w]) != Some(&j) {
                    return Err(Error::BadParameter("partition is not invariant".into()));
                }
            }
            img[i] = j;
        }
        Ok(img)
    };
    let identity: Perm = (0..gp.degree()).collect();
    let id_action = induce(&identity)?;
    let mut seen: HashMap<Perm, Perm> = HashMap::new();
    seen.insert(id_action.clone(), identity.clone());
    let mut queue = VecDeque::from([(id_action, identity)]);
    let mut out = Vec::new();
    while let Some((act, wit)) = queue.pop_front() {
        out.push((act.clone(), wit.clone()));
        for gen in gp.generators() {
            let new_wit = perm_compose(&wit, gen);
            let new_act = induce(&new_wit)?;
            if !seen.contains_key(&new_act) {
                seen.insert(new_act.clone(), new_wit.clone());
                queue.push_back((new_act, new_wit));
            }
        }
    }
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn trivial_group_orbits_are_singletons() {
        let gp = PermGroup::trivial(4);
        let part = orbits(&gp, 1).unwrap();
        assert_eq!(part.len(), 4);
    }

    #[test]
    fn swap_group_on_six_vertices_has_three_orbits() {
        let (_, gp) = fixtures::fig1();
        let part = orbits(&gp, 1).unwrap();
        assert_eq!(part.len(), 3);
        for o in &part.orbits {
            assert_eq!(o.len(), 2);
        }
    }

    #[test]
    fn symmetric_group_is_two_transitive() {
        // S_3 on 3 points: diagonal and off-diagonal 2-orbits
        let gp = PermGroup::new(3, vec![vec![1, 0, 2], vec![1, 2, 0]]).unwrap();
        assert_eq!(gp.order().unwrap(), 6);
        let part = orbits(&gp, 2).unwrap();
        assert_eq!(part.len(), 2);
    }

    #[test]
    fn arity_guard() {
        let gp = PermGroup::trivial(3);
        assert!(matches!(orbits(&gp, 5), Err(Error::Guard(_))));
        assert!(matches!(orbits(&gp, 0), Err(Error::Guard(_))));
    }

    #[test]
    fn fig1_orbit_digraph_matches_pattern_without_loop() {
        let (g, gp) = fixtures::fig1();
        let (q, part, witness) = orbit_digraph(&g, &gp).unwrap();
        assert!(witness.is_none());
        assert_eq!(q.n(), 3);
        let (o0, o1, o2) = (
            part.class_of_vertex(0),
            part.class_of_vertex(2),
            part.class_of_vertex(4),
        );
        assert!(q.has_edge(o0, o2) && q.has_edge(o2, o1));
        assert!(q.has_edge(o0, o1) && q.has_edge(o1, o0));
        assert!(!q.has_edge(o0, o0) && !q.has_edge(o1, o1) && !q.has_edge(o2, o2));
    }

    #[test]
    fn in_orbit_edge_yields_loop_witness() {
        let g = Digraph::new(2, &[(0, 1)]).unwrap();
        let gp = PermGroup::new(2, vec![vec![1, 0]]).unwrap();
        // swap is an automorphism only if (1,0) is also an edge; use symmetric edge
        let g = Digraph::new(2, &[(0, 1), (1, 0)]).unwrap();
        let (q, _, witness) = orbit_digraph(&g, &gp).unwrap();
        assert_eq!(q.n(), 1);
        assert!(q.has_edge(0, 0));
        assert!(witness.is_some());
        let _ = g;
    }

    #[test]
    fn quotient_by_trivial_group_is_isomorphic() {
        let g = Digraph::new(3, &[(0, 1), (1, 2), (2, 0)]).unwrap();
        let gp = PermGroup::trivial(3);
        let (q, _, w) = orbit_digraph(&g, &gp).unwrap();
        assert_eq!(q.n(), 3);
        assert_eq!(q.edge_list().len(), 3);
        assert!(w.is_none());
    }

    #[test]
    fn invariance_checks() {
        let (g, gp) = fixtures::fig1();
        assert!(is_invariant_binrel(g.edge_rel(), &gp).unwrap());
        let singleton = KaryRel::new(1, 6, vec![vec![0]]).unwrap();
        assert!(!is_invariant_kary(&singleton, &gp).unwrap());
        let part = orbits(&gp, 1).unwrap();
        for o in part.orbit_sets(6) {
            assert!(is_invariant_kary(&KaryRel::from_unary_set(&o), &gp).unwrap());
        }
    }

    #[test]
    fn reductionistic_examples_from_windings_instance() {
        let (_, gp) = fixtures::fig1();
        // vertex layout: 0=A0,1=B0,2=A1,3=B1,4=A2,5=B2
        let orbit0 = BitSet::from_iter(6, [0, 1]);
        assert!(is_reductionistic(&orbit0, &gp).unwrap());
        // A0, A1, B2
        let good = BitSet::from_iter(6, [0, 2, 5]);
        assert!(is_reductionistic(&good, &gp).unwrap());
        // A0, A1, B2, B0
        let bad = BitSet::from_iter(6, [0, 2, 5, 1]);
        assert!(!is_reductionistic(&bad, &gp).unwrap());
    }

    #[test]
    fn restrict_group_to_orbit_keeps_swap() {
        let (_, gp) = fixtures::fig1();
        let orbit0 = BitSet::from_iter(6, [0, 1]);
        let (restricted, carrier) = restrict_group(&gp, &orbit0).unwrap();
        assert_eq!(carrier, vec![0, 1]);
        assert_eq!(restricted.order().unwrap(), 2);
    }

    #[test]
    fn restricted_orbits_are_orbit_restrictions() {
        let (_, gp) = fixtures::fig1();
        let h = BitSet::from_iter(6, [0, 2, 5]);
        let (restricted, carrier) = restrict_group(&gp, &h).unwrap();
        let big = orbits(&gp, 1).unwrap();
        let small = orbits(&restricted, 1).unwrap();
        // every restricted orbit must be the intersection of a big orbit with H
        for o in &small.orbits {
            let lifted: Vec<usize> = o.iter().map(|t| carrier[t[0]]).collect();
            let big_id = big.class_of_vertex(lifted[0]);
            let expect: Vec<usize> = big.orbits[big_id]
                .iter()
                .map(|t| t[0])
                .filter(|v| h.contains(*v))
                .collect();
            assert_eq!(lifted, expect);
        }
        let _ = small;
    }

    #[test]
    fn trivial_group_restriction_is_trivial() {
        let gp = PermGroup::trivial(5);
        let h = BitSet::from_iter(5, [1, 3]);
        let (restricted, _) = restrict_group(&gp, &h).unwrap();
        assert_eq!(restricted.order().unwrap(), 1);
    }

    #[test]
    fn orbit_refinement_under_subgroup_chains() {
        // gens1 subset of gens2: orbits(gens1) refine orbits(gens2)
        let g1 = PermGroup::new(4, vec![vec![1, 0, 2, 3]]).unwrap();
        let g2 = PermGroup::new(4, vec![vec![1, 0, 2, 3], vec![0, 1, 3, 2]]).unwrap();
        for k in 1..=2 {
            let p1 = orbits(&g1, k).unwrap();
            let p2 = orbits(&g2, k).unwrap();
            for o in &p1.orbits {
                let target = p2.orbit_of(&o[0]).unwrap();
                for t in o {
                    assert_eq!(p2.orbit_of(t), Some(target));
                }
            }
        }
    }

    #[test]
    fn block_action_on_orbit_partition() {
        let (_, gp) = fixtures::fig1();
        let part = orbits(&gp, 1).unwrap();
        let blocks = part.orbit_sets(6);
        let action = block_action(&gp, &blocks).unwrap();
        // the swap fixes every orbit blockwise, so the induced action is trivial
        assert_eq!(action.len(), 1);
    }
}
