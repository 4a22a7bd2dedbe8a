//! Brute-force polymorphism existence via indicator structures, the
//! four-edge identity digraph, and the three-orbit-pattern identity checks.

use crate::bitset::BitSet;
use crate::digraph::{Digraph, KaryRel};
use crate::error::{Error, Result};
use crate::finitise::{compute_alpha, instance_view};
use crate::perm::PermGroup;
use crate::ppengine::{evaluate, Atom, NamedStructure, PPFormula};
use std::collections::HashMap;

/// A system of height-one identities for one operation symbol: each equation
/// equates two argument patterns over a shared variable alphabet.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdentitySpec {
    pub arity: usize,
    pub num_vars: usize,
    pub equations: Vec<(Vec<usize>, Vec<usize>)>,
}

impl IdentitySpec {
    pub fn new(arity: usize, num_vars: usize, equations: Vec<(Vec<usize>, Vec<usize>)>) -> Result<Self> {
        for (l, r) in &equations {
            if l.len() != arity || r.len() != arity {
                return Err(Error::ArityMismatch { expected: arity, got: l.len().max(r.len()) });
            }
            if l.iter().chain(r.iter()).any(|&v| v >= num_vars) {
                return Err(Error::BadParameter("equation variable out of range".into()));
            }
        }
        Ok(IdentitySpec { arity, num_vars, equations })
    }

    /// s(a,r,e,a) = s(r,a,r,e) over the three-letter alphabet a, r, e.
    pub fn siggers4() -> Self {
        IdentitySpec::new(4, 3, vec![(vec![0, 1, 2, 0], vec![1, 0, 1, 2])]).expect("static spec")
    }
}

/// Domain guard for the indicator search, overridable via `LOOPSMITH_MAX_N`.
fn poly_domain_guard() -> usize {
    std::env::var("LOOPSMITH_MAX_N")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(5)
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }
    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let root = self.find(self.parent[x]);
            self.parent[x] = root;
        }
        self.parent[x]
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

fn rank(tuple: &[usize], d: usize) -> usize {
    tuple.iter().fold(0, |acc, &v| acc * d + v)
}

fn unrank(mut r: usize, d: usize, k: usize) -> Vec<usize> {
    let mut t = vec![0; k];
    for i in (0..k).rev() {
        t[i] = r % d;
        r /= d;
    }
    t
}

/// An operation table found by the search: `table[rank(args)] = value`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OperationTable {
    pub arity: usize,
    pub domain: usize,
    pub table: Vec<usize>,
}

impl OperationTable {
    pub fn apply(&self, args: &[usize]) -> usize {
        self.table[rank(args, self.domain)]
    }
}

/// Backtracking homomorphism search from the identity-collapsed power
/// structure into the given structure. Returns an operation table preserving
/// every relation and satisfying every equation, when one exists.
pub fn find_polymorphism(s: &NamedStructure, spec: &IdentitySpec) -> Result<Option<OperationTable>> {
    let d = s.domain;
    if d == 0 {
        return Err(Error::BadParameter("empty domain".into()));
    }
    if d > poly_domain_guard() {
        return Err(Error::Guard(format!(
            "indicator search limited to {} elements (set LOOPSMITH_MAX_N to override)",
            poly_domain_guard()
        )));
    }
    let k = spec.arity;
    let total = d.pow(k as u32);
    // identify equation-forced tuples
    let mut uf = UnionFind::new(total);
    let mut assign = vec![0usize; spec.num_vars];
    'outer: loop {
        for (l, r) in &spec.equations {
            let lt: Vec<usize> = l.iter().map(|&v| assign[v]).collect();
            let rt: Vec<usize> = r.iter().map(|&v| assign[v]).collect();
            uf.union(rank(&lt, d), rank(&rt, d));
        }
        for i in (0..spec.num_vars).rev() {
            assign[i] += 1;
            if assign[i] < d {
                continue 'outer;
            }
            assign[i] = 0;
        }
        break;
    }
    let mut class_of = vec![0usize; total];
    let mut class_index: HashMap<usize, usize> = HashMap::new();
    for t in 0..total {
        let root = uf.find(t);
        let next = class_index.len();
        let id = *class_index.entry(root).or_insert(next);
        class_of[t] = id;
    }
    let nv = class_index.len();

    // indicator constraints per relation
    let mut unary_general: Vec<(usize, String)> = Vec::new();
    let mut binary: Vec<(usize, usize, String)> = Vec::new();
    let mut higher: Vec<(Vec<usize>, String)> = Vec::new();
    for name in s.names().map(String::from).collect::<Vec<_>>() {
        let rel = s.get(&name)?;
        match rel.arity {
            1 => {
                for t in 0..total {
                    let tup = unrank(t, d, k);
                    if tup.iter().all(|&v| rel.contains(&[v])) {
                        unary_general.push((class_of[t], name.clone()));
                    }
                }
            }
            2 => {
                for t in 0..total {
                    let tt = unrank(t, d, k);
                    'us: for u in 0..total {
                        let uu = unrank(u, d, k);
                        for i in 0..k {
                            if !rel.contains(&[tt[i], uu[i]]) {
                                continue 'us;
                            }
                        }
                        binary.push((class_of[t], class_of[u], name.clone()));
                    }
                }
            }
            m => {
                let mut idxs = vec![0usize; m];
                'gen: loop {
                    let tuples: Vec<Vec<usize>> = idxs.iter().map(|&t| unrank(t, d, k)).collect();
                    let ok = (0..k).all(|i| {
                        let col: Vec<usize> = tuples.iter().map(|t| t[i]).collect();
                        rel.contains(&col)
                    });
                    if ok {
                        higher.push((idxs.iter().map(|&t| class_of[t]).collect(), name.clone()));
                    }
                    for i in (0..m).rev() {
                        idxs[i] += 1;
                        if idxs[i] < total {
                            continue 'gen;
                        }
                        idxs[i] = 0;
                    }
                    break;
                }
            }
        }
    }

    // candidate domains, pruned by unary indicator constraints
    let mut candidates: Vec<BitSet> = vec![BitSet::full(d); nv];
    for (cls, name) in &unary_general {
        let rel = s.get(name)?;
        let mut allowed = BitSet::new(d);
        for v in 0..d {
            if rel.contains(&[v]) {
                allowed.insert(v);
            }
        }
        candidates[*cls].intersect_with(&allowed);
    }
    // adjacency lists over binary constraints: (other, relation, this-is-first)
    let mut adj: Vec<Vec<(usize, String, bool)>> = vec![Vec::new(); nv];
    for (a, b, name) in &binary {
        adj[*a].push((*b, name.clone(), true));
        adj[*b].push((*a, name.clone(), false));
    }
    // value order: descending degree in the structure
    let mut degree = vec![0usize; d];
    for name in s.names().map(String::from).collect::<Vec<_>>() {
        for t in s.get(&name)?.tuples() {
            for &v in t {
                degree[v] += 1;
            }
        }
    }
    let mut value_order: Vec<usize> = (0..d).collect();
    value_order.sort_by_key(|&v| std::cmp::Reverse(degree[v]));
    // variable order: most-constrained first
    let mut var_order: Vec<usize> = (0..nv).collect();
    var_order.sort_by_key(|&v| std::cmp::Reverse(adj[v].len()));

    struct Search<'a> {
        s: &'a NamedStructure,
        adj: &'a [Vec<(usize, String, bool)>],
        higher: &'a [(Vec<usize>, String)],
        candidates: &'a [BitSet],
        value_order: &'a [usize],
        var_order: &'a [usize],
    }

    impl Search<'_> {
        fn consistent(&self, var: usize, val: usize, assignment: &[Option<usize>]) -> bool {
            for (other, name, forward) in &self.adj[var] {
                if let Some(ov) = assignment[*other] {
                    let pair = if *forward { [val, ov] } else { [ov, val] };
                    if !self.s.get(name).map(|r| r.contains(&pair)).unwrap_or(false) {
                        return false;
                    }
                }
            }
            for (cls, name) in self.higher {
                if cls.contains(&var) {
                    let mut tup = Vec::with_capacity(cls.len());
                    let mut complete = true;
                    for &c in cls.iter() {
                        let v = if c == var { Some(val) } else { assignment[c] };
                        match v {
                            Some(v) => tup.push(v),
                            None => {
                                complete = false;
                                break;
                            }
                        }
                    }
                    if complete && !self.s.get(name).map(|r| r.contains(&tup)).unwrap_or(false) {
                        return false;
                    }
                }
            }
            true
        }

        fn run(&self, pos: usize, assignment: &mut [Option<usize>]) -> bool {
            if pos == self.var_order.len() {
                return true;
            }
            let var = self.var_order[pos];
            for &val in self.value_order {
                if !self.candidates[var].contains(val) {
                    continue;
                }
                if self.consistent(var, val, assignment) {
                    assignment[var] = Some(val);
                    if self.run(pos + 1, assignment) {
                        return true;
                    }
                    assignment[var] = None;
                }
            }
            false
        }
    }

    let search = Search {
        s,
        adj: &adj,
        higher: &higher,
        candidates: &candidates,
        value_order: &value_order,
        var_order: &var_order,
    };
    let mut assignment: Vec<Option<usize>> = vec![None; nv];
    if !search.run(0, &mut assignment) {
        return Ok(None);
    }
    let table: Vec<usize> = (0..total).map(|t| assignment[class_of[t]].unwrap()).collect();
    let op = OperationTable { arity: k, domain: d, table };
    verify_polymorphism(s, spec, &op)?;
    Ok(Some(op))
}

/// Independent re-check: the table preserves every relation and satisfies
/// every equation.
pub fn verify_polymorphism(
    s: &NamedStructure,
    spec: &IdentitySpec,
    op: &OperationTable,
) -> Result<()> {
    let d = s.domain;
    let k = op.arity;
    let mut assign = vec![0usize; spec.num_vars];
    'outer: loop {
        for (l, r) in &spec.equations {
            let lt: Vec<usize> = l.iter().map(|&v| assign[v]).collect();
            let rt: Vec<usize> = r.iter().map(|&v| assign[v]).collect();
            if op.apply(&lt) != op.apply(&rt) {
                return Err(Error::Defect(format!("equation violated at {assign:?}")));
            }
        }
        for i in (0..spec.num_vars).rev() {
            assign[i] += 1;
            if assign[i] < d {
                continue 'outer;
            }
            assign[i] = 0;
        }
        break;
    }
    for name in s.names().map(String::from).collect::<Vec<_>>() {
        let rel = s.get(&name)?;
        let m = rel.arity;
        let tuples = rel.tuples();
        if tuples.is_empty() {
            continue;
        }
        let mut picks = vec![0usize; k];
        'sel: loop {
            let mut image = Vec::with_capacity(m);
            for coord in 0..m {
                let args: Vec<usize> = picks.iter().map(|&p| tuples[p][coord]).collect();
                image.push(op.apply(&args));
            }
            if !rel.contains(&image) {
                return Err(Error::Defect(format!("relation {name} not preserved")));
            }
            for i in (0..k).rev() {
                picks[i] += 1;
                if picks[i] < tuples.len() {
                    continue 'sel;
                }
                picks[i] = 0;
            }
            break;
        }
    }
    Ok(())
}

/// Structure wrapper for a plain digraph.
pub fn digraph_structure(g: &Digraph) -> NamedStructure {
    let mut s = NamedStructure::new(g.n());
    s.insert("edge", KaryRel::from_binrel(g.edge_rel())).expect("same domain");
    s
}

/// The four-edge digraph on three tuples (a -> r, r -> a, a -> e, e -> r),
/// closed under the supplied operations applied edgewise.
pub fn siggers_graph(
    a: &[usize],
    e: &[usize],
    r: &[usize],
    ops: &[OperationTable],
    closure_bound: usize,
) -> Result<Digraph> {
    if a.len() != e.len() || e.len() != r.len() {
        return Err(Error::ArityMismatch { expected: a.len(), got: e.len().max(r.len()) });
    }
    let mut verts: Vec<Vec<usize>> = vec![a.to_vec(), r.to_vec(), e.to_vec()];
    let mut index: HashMap<Vec<usize>, usize> =
        verts.iter().enumerate().map(|(i, v)| (v.clone(), i)).collect();
    let mut edges: Vec<(usize, usize)> = vec![(0, 1), (1, 0), (0, 2), (2, 1)];
    loop {
        let mut changed = false;
        let current_edges = edges.clone();
        for op in ops {
            let m = op.arity;
            let mut picks = vec![0usize; m];
            'sel: loop {
                let src: Vec<usize> = (0..a.len())
                    .map(|c| {
                        let args: Vec<usize> =
                            picks.iter().map(|&p| verts[current_edges[p].0][c]).collect();
                        op.apply(&args)
                    })
                    .collect();
                let dst: Vec<usize> = (0..a.len())
                    .map(|c| {
                        let args: Vec<usize> =
                            picks.iter().map(|&p| verts[current_edges[p].1][c]).collect();
                        op.apply(&args)
                    })
                    .collect();
                let next = verts.len();
                let si = *index.entry(src.clone()).or_insert_with(|| {
                    verts.push(src.clone());
                    next
                });
                let next = verts.len();
                let di = *index.entry(dst.clone()).or_insert_with(|| {
                    verts.push(dst.clone());
                    next
                });
                if verts.len() > closure_bound {
                    return Err(Error::Guard("closure bound exceeded".into()));
                }
                if !edges.contains(&(si, di)) {
                    edges.push((si, di));
                    changed = true;
                }
                for i in (0..m).rev() {
                    picks[i] += 1;
                    if picks[i] < current_edges.len() {
                        continue 'sel;
                    }
                    picks[i] = 0;
                }
                break;
            }
        }
        if !changed {
            break;
        }
    }
    Digraph::new(verts.len(), &edges)
}

/// Outcome of the three-orbit-pattern check.
#[derive(Clone, Debug)]
pub struct PatternReport {
    /// Quotient orbit ids playing the roles 0, 1, 2 of the pattern.
    pub roles: [usize; 3],
    pub union_identities_hold: [bool; 3],
    pub alpha_formula_matches: bool,
}

impl PatternReport {
    pub fn passes(&self) -> bool {
        self.union_identities_hold.iter().all(|&b| b) && self.alpha_formula_matches
    }
}

/// Verifies, on an instance whose orbit quotient is the pattern
/// 0 -> 2, 2 -> 1, 0 <-> 1, the three orbit-union identities and the
/// displayed refinement definition, all by evaluation.
pub fn check_siggerscrap(g: &Digraph, gp: &PermGroup) -> Result<PatternReport> {
    let view = instance_view(g, gp)?;
    let q = &view.quotient_w;
    if q.n() != 3 {
        return Err(Error::Precondition("quotient must have exactly three orbits".into()));
    }
    // identify roles by degree signature: role 0 has out 2 / in 1, role 1
    // has out 1 / in 2, role 2 has out 1 / in 1
    let sig = |v: usize| {
        let out = q.out_neighbours(v).count();
        let inn = q.edge_rel().inverse().row(v).count();
        (out, inn)
    };
    let role0 = (0..3).find(|&v| sig(v) == (2, 1));
    let role1 = (0..3).find(|&v| sig(v) == (1, 2));
    let role2 = (0..3).find(|&v| sig(v) == (1, 1));
    let (r0, r1, r2) = match (role0, role1, role2) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => return Err(Error::Precondition("quotient does not match the pattern".into())),
    };
    let mut want = vec![(r0, r2), (r2, r1), (r0, r1), (r1, r0)];
    want.sort_unstable();
    let mut actual = q.edge_list();
    actual.sort_unstable();
    if actual != want {
        return Err(Error::Precondition("quotient does not match the pattern".into()));
    }

    let set = |o: usize| view.orbit_sets[o].clone();
    let union = |a: usize, b: usize| {
        let mut s = set(a);
        s.union_with(&set(b));
        s
    };
    let step = |s: &BitSet| g.edge_rel().inverse().preimage(s);
    let back = |s: &BitSet| g.edge_rel().preimage(s);
    // images: S + edge is the set of successors of S, S + reversed edge the
    // set of predecessors
    let fwd_img = |s: &BitSet| g.edge_rel().image(s);
    let _ = (step, back);
    let id0 = fwd_img(&fwd_img(&set(r0))) == union(r0, r1);
    let id1 = g.edge_rel().preimage(&set(r1)) == union(r0, r2);
    let id2 = fwd_img(&set(r0)) == union(r1, r2);

    // the displayed refinement definition over edge and the pair restriction
    let alpha = compute_alpha(g, gp)?;
    let mut s = NamedStructure::new(g.n());
    s.insert("edge", KaryRel::from_binrel(g.edge_rel()))?;
    s.insert("alpha01", KaryRel::from_binrel(&alpha.restricted_to(&union(r0, r1))))?;
    let f = PPFormula::new(
        vec!["x", "y"],
        vec!["u", "u2", "v", "v2"],
        vec![
            Atom { rel: "edge".into(), args: vec!["x".into(), "u".into()] },
            Atom { rel: "alpha01".into(), args: vec!["u".into(), "u2".into()] },
            Atom { rel: "edge".into(), args: vec!["y".into(), "u2".into()] },
            Atom { rel: "edge".into(), args: vec!["v".into(), "x".into()] },
            Atom { rel: "alpha01".into(), args: vec!["v".into(), "v2".into()] },
            Atom { rel: "edge".into(), args: vec!["v2".into(), "y".into()] },
        ],
    );
    let defined = evaluate(&s, &f)?.to_binrel()?;
    let alpha_matches = defined == alpha.as_binrel();

    Ok(PatternReport {
        roles: [r0, r1, r2],
        union_identities_hold: [id0, id1, id2],
        alpha_formula_matches: alpha_matches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn three_cycle_has_siggers_operation() {
        let g = fixtures::directed_cycle(3);
        let op = find_polymorphism(&digraph_structure(&g), &IdentitySpec::siggers4())
            .unwrap()
            .expect("affine structure admits one");
        verify_polymorphism(&digraph_structure(&g), &IdentitySpec::siggers4(), &op).unwrap();
    }

    #[test]
    fn symmetric_triangle_has_no_siggers_operation() {
        let g = fixtures::k3_symmetric();
        let found = find_polymorphism(&digraph_structure(&g), &IdentitySpec::siggers4()).unwrap();
        assert!(found.is_none());
    }

    #[test]
    fn loop_gives_an_operation() {
        let g = Digraph::new(2, &[(0, 0), (0, 1), (1, 0)]).unwrap();
        let op = find_polymorphism(&digraph_structure(&g), &IdentitySpec::siggers4())
            .unwrap()
            .expect("constant map to the loop works");
        verify_polymorphism(&digraph_structure(&g), &IdentitySpec::siggers4(), &op).unwrap();
    }

    #[test]
    fn guard_rejects_large_domains() {
        let g = fixtures::directed_cycle(7);
        assert!(matches!(
            find_polymorphism(&digraph_structure(&g), &IdentitySpec::siggers4()),
            Err(Error::Guard(_))
        ));
    }

    #[test]
    fn bare_identity_digraph_has_four_edges() {
        let g = siggers_graph(&[0], &[1], &[2], &[], 100).unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(g.edge_list().len(), 4);
    }

    #[test]
    fn projection_closure_adds_nothing() {
        let proj1 = OperationTable { arity: 2, domain: 3, table: (0..9).map(|i| i / 3).collect() };
        let proj2 = OperationTable { arity: 2, domain: 3, table: (0..9).map(|i| i % 3).collect() };
        let g = siggers_graph(&[0], &[1], &[2], &[proj1, proj2], 100).unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(g.edge_list().len(), 4);
    }

    #[test]
    fn pattern_check_on_windings_instance() {
        let (g, gp) = fixtures::fig1();
        let report = check_siggerscrap(&g, &gp).unwrap();
        assert!(report.passes(), "{report:?}");
    }

    #[test]
    fn pattern_check_rejects_wrong_shapes() {
        let g = fixtures::directed_cycle(4);
        let gp = PermGroup::trivial(4);
        assert!(check_siggerscrap(&g, &gp).is_err());
        let g3 = fixtures::directed_cycle(3);
        let gp3 = PermGroup::trivial(3);
        assert!(check_siggerscrap(&g3, &gp3).is_err());
    }
}
