//! Primitive positive formulas: AST, evaluation over finite named-relation
//! structures, tree detection, blow-up lifting, and auxiliary relation
//! constructors.

use crate::bitset::BitSet;
use crate::digraph::{BinRel, Digraph, KaryRel};
use crate::error::{Error, Result};
use crate::finitise::FinitisingEquivalence;
use crate::perm::PermGroup;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, HashSet};

/// Cap on materialised tuple counts during evaluation.
const TABLE_CAP: usize = 4_000_000;

/// Cap on materialised or-relations.
pub const OR_CAP: usize = TABLE_CAP;

/// A finite structure: a domain `0..domain` and named relations on it.
#[derive(Clone, Debug, Default)]
pub struct NamedStructure {
    pub domain: usize,
    rels: BTreeMap<String, KaryRel>,
}

impl NamedStructure {
    pub fn new(domain: usize) -> Self {
        NamedStructure { domain, rels: BTreeMap::new() }
    }

    pub fn insert(&mut self, name: impl Into<String>, rel: KaryRel) -> Result<()> {
        if rel.domain != self.domain {
            return Err(Error::DomainMismatch(rel.domain, self.domain));
        }
        self.rels.insert(name.into(), rel);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&KaryRel> {
        self.rels.get(name).ok_or_else(|| Error::UnknownRelation(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.rels.keys().map(|s| s.as_str())
    }
}

/// One conjunct: a relation name applied to variables.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Atom {
    pub rel: String,
    pub args: Vec<String>,
}

/// A primitive positive formula: free variables, existential variables,
/// conjoined atoms, and optional parameter bindings pinning a variable to a
/// domain element.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PPFormula {
    pub free: Vec<String>,
    pub exists: Vec<String>,
    pub atoms: Vec<Atom>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, usize>,
}

impl PPFormula {
    pub fn new(free: Vec<&str>, exists: Vec<&str>, atoms: Vec<Atom>) -> Self {
        PPFormula {
            free: free.into_iter().map(String::from).collect(),
            exists: exists.into_iter().map(String::from).collect(),
            atoms,
            params: BTreeMap::new(),
        }
    }

    pub fn with_param(mut self, var: &str, value: usize) -> Self {
        self.params.insert(var.to_string(), value);
        self
    }

    fn all_vars(&self) -> Vec<String> {
        let mut vars = self.free.clone();
        vars.extend(self.exists.iter().cloned());
        vars
    }

    fn validate(&self, s: &NamedStructure) -> Result<()> {
        let all_vars = self.all_vars();
        let declared: HashSet<&str> = all_vars.iter().map(|v| v.as_str()).collect();
        for atom in &self.atoms {
            let rel = s.get(&atom.rel)?;
            if rel.arity != atom.args.len() {
                return Err(Error::ArityMismatch { expected: rel.arity, got: atom.args.len() });
            }
            for a in &atom.args {
                if !declared.contains(a.as_str()) {
                    return Err(Error::BadParameter(format!("undeclared variable {a}")));
                }
            }
        }
        for (v, &e) in &self.params {
            if !declared.contains(v.as_str()) {
                return Err(Error::BadParameter(format!("parameter binds unknown variable {v}")));
            }
            if e >= s.domain {
                return Err(Error::BadParameter(format!("parameter value {e} outside domain")));
            }
        }
        Ok(())
    }
}

fn declared_all_vars(f: &PPFormula) -> Vec<String> {
    let mut vars = f.free.clone();
    vars.extend(f.exists.iter().cloned());
    vars
}

/// Intermediate join table: a relation over a set of named columns.
struct Table {
    vars: Vec<String>,
    rows: Vec<Vec<usize>>,
}

impl Table {
    fn project_out(&mut self, var: &str) {
        if let Some(idx) = self.vars.iter().position(|v| v == var) {
            self.vars.remove(idx);
            for row in &mut self.rows {
                row.remove(idx);
            }
            self.rows.sort_unstable();
            self.rows.dedup();
        }
    }
}

fn join(a: &Table, b: &Table) -> Result<Table> {
    let shared: Vec<usize> = a
        .vars
        .iter()
        .enumerate()
        .filter_map(|(i, v)| b.vars.iter().position(|w| w == v).map(|j| i * b.vars.len() + j))
        .collect();
    let shared_pairs: Vec<(usize, usize)> =
        shared.iter().map(|&x| (x / b.vars.len().max(1), x % b.vars.len().max(1))).collect();
    let b_extra: Vec<usize> =
        (0..b.vars.len()).filter(|j| !shared_pairs.iter().any(|&(_, jj)| jj == *j)).collect();
    let mut out_vars = a.vars.clone();
    out_vars.extend(b_extra.iter().map(|&j| b.vars[j].clone()));

    let mut index: HashMap<Vec<usize>, Vec<usize>> = HashMap::new();
    for (ri, row) in b.rows.iter().enumerate() {
        let key: Vec<usize> = shared_pairs.iter().map(|&(_, j)| row[j]).collect();
        index.entry(key).or_default().push(ri);
    }
    let mut rows = Vec::new();
    for ra in &a.rows {
        let key: Vec<usize> = shared_pairs.iter().map(|&(i, _)| ra[i]).collect();
        if let Some(matches) = index.get(&key) {
            for &ri in matches {
                let rb = &b.rows[ri];
                let mut row = ra.clone();
                row.extend(b_extra.iter().map(|&j| rb[j]));
                rows.push(row);
                if rows.len() > TABLE_CAP {
                    return Err(Error::Guard("join table exceeds cap".into()));
                }
            }
        }
    }
    rows.sort_unstable();
    rows.dedup();
    Ok(Table { vars: out_vars, rows })
}

/// Exact solution set of a pp-formula, computed by conjunctive-query join
/// with eager projection of dead existential variables.
pub fn evaluate(s: &NamedStructure, f: &PPFormula) -> Result<KaryRel> {
    f.validate(s)?;
    let all_vars = declared_all_vars(f);
    let free_set: HashSet<&str> = f.free.iter().map(|v| v.as_str()).collect();

    // initial tables: one per atom, parameters folded in as filters
    let mut tables: Vec<Table> = Vec::new();
    for atom in &f.atoms {
        let rel = s.get(&atom.rel)?;
        let mut cols: Vec<String> = Vec::new();
        for a in &atom.args {
            if !cols.contains(a) {
                cols.push(a.clone());
            }
        }
        let mut rows = Vec::new();
        'tuples: for t in rel.tuples() {
            let mut assign: HashMap<&str, usize> = HashMap::new();
            for (pos, a) in atom.args.iter().enumerate() {
                if let Some(&prev) = assign.get(a.as_str()) {
                    if prev != t[pos] {
                        continue 'tuples;
                    }
                } else {
                    if let Some(&pv) = f.params.get(a) {
                        if pv != t[pos] {
                            continue 'tuples;
                        }
                    }
                    assign.insert(a, t[pos]);
                }
            }
            rows.push(cols.iter().map(|c| assign[c.as_str()]).collect());
        }
        rows.sort_unstable();
        rows.dedup();
        tables.push(Table { vars: cols, rows });
    }
    // variables appearing in no atom range over the whole domain (or their
    // pinned parameter value)
    let mut in_atoms: HashSet<&str> = HashSet::new();
    for atom in &f.atoms {
        for a in &atom.args {
            in_atoms.insert(a);
        }
    }
    for v in &all_vars {
        if !in_atoms.contains(v.as_str()) && free_set.contains(v.as_str()) {
            let rows: Vec<Vec<usize>> = match f.params.get(v) {
                Some(&e) => vec![vec![e]],
                None => (0..s.domain).map(|x| vec![x]).collect(),
            };
            tables.push(Table { vars: vec![v.clone()], rows });
        }
    }
    if tables.is_empty() {
        // no atoms, no free variables: the empty tuple holds trivially
        return KaryRel::new(0, s.domain, vec![vec![]]);
    }

    // slab of live tables plus a variable-to-table index
    let mut slab: Vec<Option<Table>> = tables.into_iter().map(Some).collect();
    let mut var_tabs: HashMap<String, HashSet<usize>> = HashMap::new();
    for (i, t) in slab.iter().enumerate() {
        for v in &t.as_ref().unwrap().vars {
            var_tabs.entry(v.clone()).or_default().insert(i);
        }
    }
    // eliminate existential variables greedily by estimated join cost
    let mut remaining: Vec<String> = f
        .exists
        .iter()
        .filter(|v| in_atoms.contains(v.as_str()))
        .cloned()
        .collect();
    while !remaining.is_empty() {
        let (pos, _) = remaining
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let cost: f64 = var_tabs
                    .get(v)
                    .map(|ids| {
                        ids.iter()
                            .map(|&id| slab[id].as_ref().unwrap().rows.len().max(1) as f64)
                            .product()
                    })
                    .unwrap_or(0.0);
                (i, cost)
            })
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        let var = remaining.remove(pos);
        let ids: Vec<usize> = var_tabs.get(&var).map(|s| s.iter().copied().collect()).unwrap_or_default();
        if ids.is_empty() {
            continue;
        }
        let mut involved: Vec<Table> = ids
            .iter()
            .map(|&id| {
                let t = slab[id].take().unwrap();
                for v in &t.vars {
                    if let Some(set) = var_tabs.get_mut(v) {
                        set.remove(&id);
                    }
                }
                t
            })
            .collect();
        involved.sort_by_key(|t| t.rows.len());
        let mut acc = involved.remove(0);
        for t in involved {
            acc = join(&acc, &t)?;
        }
        // project the variable out unless something else still uses it
        let still_used = var_tabs.get(&var).map(|s| !s.is_empty()).unwrap_or(false);
        if !still_used && !free_set.contains(var.as_str()) {
            acc.project_out(&var);
        }
        let new_id = slab.len();
        for v in &acc.vars {
            var_tabs.entry(v.clone()).or_default().insert(new_id);
        }
        slab.push(Some(acc));
    }
    // join everything left
    let mut tables: Vec<Table> = slab.into_iter().flatten().collect();
    tables.sort_by_key(|t| t.rows.len());
    let mut acc = tables.remove(0);
    for t in tables {
        acc = join(&acc, &t)?;
    }
    // project to the free variables, in order; frees not present range freely
    let mut missing_frees: Vec<&String> =
        f.free.iter().filter(|v| !acc.vars.contains(v)).collect();
    missing_frees.retain(|v| in_atoms.contains(v.as_str()) || !in_atoms.contains(v.as_str()));
    for v in missing_frees {
        let rows: Vec<Vec<usize>> = match f.params.get(v) {
            Some(&e) => vec![vec![e]],
            None => (0..s.domain).map(|x| vec![x]).collect(),
        };
        acc = join(&acc, &Table { vars: vec![v.clone()], rows })?;
    }
    let cols: Vec<usize> =
        f.free.iter().map(|v| acc.vars.iter().position(|w| w == v).unwrap()).collect();
    let tuples: Vec<Vec<usize>> =
        acc.rows.iter().map(|r| cols.iter().map(|&c| r[c]).collect()).collect();
    KaryRel::new(f.free.len(), s.domain, tuples)
}

/// Reference semantics: enumerate every assignment. Exponential; test oracle.
pub fn naive_evaluate(s: &NamedStructure, f: &PPFormula) -> Result<KaryRel> {
    f.validate(s)?;
    let vars = declared_all_vars(f);
    let k = vars.len();
    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut assign = vec![0usize; k];
    let idx: HashMap<&str, usize> = vars.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect();
    'outer: loop {
        let ok = f.params.iter().all(|(v, &e)| assign[idx[v.as_str()]] == e)
            && f.atoms.iter().all(|atom| {
                let t: Vec<usize> = atom.args.iter().map(|a| assign[idx[a.as_str()]]).collect();
                s.get(&atom.rel).map(|r| r.contains(&t)).unwrap_or(false)
            });
        if ok {
            out.push(f.free.iter().map(|v| assign[idx[v.as_str()]]).collect());
        }
        for i in (0..k).rev() {
            assign[i] += 1;
            if assign[i] < s.domain {
                continue 'outer;
            }
            assign[i] = 0;
        }
        break;
    }
    if k == 0 {
        out.push(vec![]);
    }
    KaryRel::new(f.free.len(), s.domain, out)
}

/// Variable/conjunct incidence graph is connected and acyclic.
pub fn is_tree(f: &PPFormula) -> bool {
    let vars = declared_all_vars(f);
    let var_nodes: HashMap<&str, usize> =
        vars.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect();
    let v = vars.len();
    let total = v + f.atoms.len();
    if total == 0 {
        return true;
    }
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); total];
    let mut edge_count = 0;
    for (ai, atom) in f.atoms.iter().enumerate() {
        let mut seen: HashSet<&str> = HashSet::new();
        for a in &atom.args {
            if seen.insert(a) {
                if let Some(&vi) = var_nodes.get(a.as_str()) {
                    adj[vi].push(v + ai);
                    adj[v + ai].push(vi);
                    edge_count += 1;
                }
            }
        }
    }
    if edge_count != total - 1 {
        return false;
    }
    // connectivity
    let mut seen = vec![false; total];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut count = 0;
    while let Some(x) = stack.pop() {
        count += 1;
        for &y in &adj[x] {
            if !seen[y] {
                seen[y] = true;
                stack.push(y);
            }
        }
    }
    count == total
}

/// Lifts a tree-shaped unary definition over a quotient with class
/// parameters to the base structure: each class parameter becomes an
/// existential variable restricted by the class predicate named by
/// `class_rel`.
pub fn lift_tree_def(f: &PPFormula, class_rel: impl Fn(usize) -> String) -> Result<PPFormula> {
    if !is_tree(f) {
        return Err(Error::Precondition("lift requires a tree formula".into()));
    }
    if f.free.len() != 1 {
        return Err(Error::Precondition("lift requires a unary output".into()));
    }
    let mut out = f.clone();
    out.params.clear();
    for (var, &class) in &f.params {
        if !out.exists.contains(var) && !out.free.contains(var) {
            out.exists.push(var.clone());
        }
        if out.free.contains(var) {
            return Err(Error::Precondition("parameters must bind quantified variables".into()));
        }
        out.atoms.push(Atom { rel: class_rel(class), args: vec![var.clone()] });
    }
    Ok(out)
}

/// The relation holding when the left block is in `r` or the right block is
/// in `s`; arity is the sum of both arities.
pub fn or_relation(r: &KaryRel, s: &KaryRel) -> Result<KaryRel> {
    if r.domain != s.domain {
        return Err(Error::DomainMismatch(r.domain, s.domain));
    }
    let d = r.domain;
    let total_arity = r.arity + s.arity;
    let size_bound = (r.len() as u128) * (d as u128).pow(s.arity as u32)
        + (s.len() as u128) * (d as u128).pow(r.arity as u32);
    if size_bound > TABLE_CAP as u128 {
        return Err(Error::Guard(format!("or-relation would hold ~{size_bound} tuples")));
    }
    let mut tuples: Vec<Vec<usize>> = Vec::new();
    let all = |k: usize| -> Vec<Vec<usize>> {
        let mut out = vec![vec![]];
        for _ in 0..k {
            out = out
                .into_iter()
                .flat_map(|t| {
                    (0..d).map(move |x| {
                        let mut t2 = t.clone();
                        t2.push(x);
                        t2
                    })
                })
                .collect();
        }
        out
    };
    let right_all = all(s.arity);
    for t in r.tuples() {
        for u in &right_all {
            let mut row = t.clone();
            row.extend_from_slice(u);
            tuples.push(row);
        }
    }
    let left_all = all(r.arity);
    for u in s.tuples() {
        for t in &left_all {
            let mut row = t.clone();
            row.extend_from_slice(u);
            tuples.push(row);
        }
    }
    KaryRel::new(total_arity, d, tuples)
}

/// The class-closed orbit of a tuple holding one representative per class:
/// the smallest componentwise-class-stable relation containing the orbit of
/// the lexicographic representative tuple.
pub fn build_ig(g: &Digraph, gp: &PermGroup, alpha: &FinitisingEquivalence) -> Result<KaryRel> {
    let _ = g;
    let rep: Vec<usize> = alpha
        .classes()
        .iter()
        .map(|c| c.iter().next().expect("classes are nonempty"))
        .collect();
    let orbit = gp.tuple_orbit(&rep);
    alpha_closure_of_tuples(&orbit, alpha, gp.degree())
}

/// Componentwise class closure of a tuple set.
pub fn alpha_closure_of_tuples(
    tuples: &[Vec<usize>],
    alpha: &FinitisingEquivalence,
    domain: usize,
) -> Result<KaryRel> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    for t in tuples {
        let mut partial: Vec<Vec<usize>> = vec![vec![]];
        for &v in t {
            let class = alpha.class_set_of(v);
            let mut next = Vec::new();
            for p in &partial {
                for w in class.iter() {
                    let mut q = p.clone();
                    q.push(w);
                    next.push(q);
                }
            }
            if next.len() > TABLE_CAP {
                return Err(Error::Guard("class closure exceeds cap".into()));
            }
            partial = next;
        }
        out.extend(partial);
        if out.len() > TABLE_CAP {
            return Err(Error::Guard("class closure exceeds cap".into()));
        }
    }
    let arity = tuples.first().map(|t| t.len()).unwrap_or(0);
    KaryRel::new(arity, domain, out)
}

/// Elements reachable through `r` simultaneously from every class of the
/// class-stable set `h`: the conjunction over classes of one existential
/// witness each. The empty `h` yields the full domain.
pub fn oplus(h: &BitSet, r: &BinRel, alpha: &FinitisingEquivalence) -> Result<BitSet> {
    if !alpha.is_union_of_classes(h) {
        return Err(Error::Precondition("set is not class-stable".into()));
    }
    let mut out = BitSet::full(h.len());
    for class in alpha.classes() {
        if class.is_subset(h) {
            out.intersect_with(&r.image(class));
        }
    }
    Ok(out)
}

/// An ordered list of named relation definitions: primitives of the licensed
/// vocabulary, or formulas over earlier names.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PrimitiveDef {
    /// The edge relation of the instance.
    Edge,
    /// A union of at most two vertex orbits, as a unary relation.
    OrbitUnion(Vec<usize>),
    /// The finitising equivalence restricted to one orbit or an adjacent
    /// orbit pair.
    AlphaRestriction(Vec<usize>),
    /// A single class of the finitising equivalence, as a unary relation.
    ClassParam(usize),
    /// A named input relation; licensed when it is an orbit of a tuple, or
    /// the class closure of one.
    NamedInput { orbit_of: Vec<usize>, class_closed: bool },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Body {
    Primitive(PrimitiveDef),
    Formula(PPFormula),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptDef {
    pub name: String,
    pub arity: usize,
    pub body: Body,
}

/// A replayable definition chain with a designated output relation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct PPScript {
    pub defs: Vec<ScriptDef>,
    pub output: String,
}

impl PPScript {
    pub fn push_primitive(&mut self, name: impl Into<String>, arity: usize, p: PrimitiveDef) -> String {
        let name = name.into();
        self.defs.push(ScriptDef { name: name.clone(), arity, body: Body::Primitive(p) });
        name
    }

    pub fn push_formula(&mut self, name: impl Into<String>, f: PPFormula) -> String {
        let name = name.into();
        self.defs.push(ScriptDef { name: name.clone(), arity: f.free.len(), body: Body::Formula(f) });
        name
    }

    /// Replays the script over interpretations of the primitives, returning
    /// the structure of all defined relations.
    pub fn replay(
        &self,
        domain: usize,
        primitive: &mut dyn FnMut(&PrimitiveDef) -> Result<KaryRel>,
    ) -> Result<NamedStructure> {
        let mut s = NamedStructure::new(domain);
        for def in &self.defs {
            let rel = match &def.body {
                Body::Primitive(p) => primitive(p)?,
                Body::Formula(f) => evaluate(&s, f)?,
            };
            if rel.arity != def.arity {
                return Err(Error::ArityMismatch { expected: def.arity, got: rel.arity });
            }
            if s.rels.contains_key(&def.name) {
                return Err(Error::BadParameter(format!("duplicate definition {}", def.name)));
            }
            s.insert(def.name.clone(), rel)?;
        }
        s.get(&self.output)?;
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn three_cycle_structure() -> NamedStructure {
        let g = fixtures::directed_cycle(3);
        let mut s = NamedStructure::new(3);
        s.insert("edge", KaryRel::from_binrel(g.edge_rel())).unwrap();
        s
    }

    #[test]
    fn two_step_successor_on_three_cycle() {
        let s = three_cycle_structure();
        let f = PPFormula::new(
            vec!["x", "y"],
            vec!["z"],
            vec![
                Atom { rel: "edge".into(), args: vec!["x".into(), "z".into()] },
                Atom { rel: "edge".into(), args: vec!["z".into(), "y".into()] },
            ],
        );
        let r = evaluate(&s, &f).unwrap();
        assert_eq!(r.tuples(), &[vec![0, 2], vec![1, 0], vec![2, 1]]);
    }

    #[test]
    fn empty_formula_gives_full_domain() {
        let s = three_cycle_structure();
        let f = PPFormula::new(vec!["x"], vec![], vec![]);
        let r = evaluate(&s, &f).unwrap();
        assert_eq!(r.len(), 3);
    }

    #[test]
    fn evaluate_matches_naive_on_random_formulas() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..120 {
            let domain = rng.gen_range(2..=5);
            let mut s = NamedStructure::new(domain);
            for name in ["r", "s"] {
                let arity = rng.gen_range(1..=3);
                let mut tuples = Vec::new();
                for _ in 0..rng.gen_range(0..=domain.pow(arity as u32)) {
                    tuples.push((0..arity).map(|_| rng.gen_range(0..domain)).collect());
                }
                s.insert(name, KaryRel::new(arity, domain, tuples).unwrap()).unwrap();
            }
            let vars = ["a", "b", "c", "d", "e", "f"];
            let n_free = rng.gen_range(0..=2);
            let n_exists = rng.gen_range(0..=3);
            let free: Vec<&str> = vars[..n_free].to_vec();
            let exists: Vec<&str> = vars[n_free..n_free + n_exists].to_vec();
            let pool: Vec<&str> = vars[..n_free + n_exists].to_vec();
            if pool.is_empty() {
                continue;
            }
            let mut atoms = Vec::new();
            for _ in 0..rng.gen_range(0..=4) {
                let rel = if rng.gen_bool(0.5) { "r" } else { "s" };
                let arity = s.get(rel).unwrap().arity;
                atoms.push(Atom {
                    rel: rel.into(),
                    args: (0..arity).map(|_| pool[rng.gen_range(0..pool.len())].to_string()).collect(),
                });
            }
            let mut f = PPFormula::new(free, exists, atoms);
            if rng.gen_bool(0.3) && !pool.is_empty() {
                f = f.with_param(pool[rng.gen_range(0..pool.len())], rng.gen_range(0..domain));
            }
            let fast = evaluate(&s, &f).unwrap();
            let slow = naive_evaluate(&s, &f).unwrap();
            assert_eq!(fast, slow, "formula {f:?}");
        }
    }

    #[test]
    fn evaluate_is_monotone_in_relations() {
        let s = three_cycle_structure();
        let mut bigger = s.clone();
        let mut r = KaryRel::from_binrel(fixtures::directed_cycle(3).edge_rel());
        let mut tuples = r.tuples().to_vec();
        tuples.push(vec![0, 0]);
        r = KaryRel::new(2, 3, tuples).unwrap();
        bigger.insert("edge", r).unwrap();
        let f = PPFormula::new(
            vec!["x", "y"],
            vec!["z"],
            vec![
                Atom { rel: "edge".into(), args: vec!["x".into(), "z".into()] },
                Atom { rel: "edge".into(), args: vec!["z".into(), "y".into()] },
            ],
        );
        let small = evaluate(&s, &f).unwrap();
        let big = evaluate(&bigger, &f).unwrap();
        for t in small.tuples() {
            assert!(big.contains(t));
        }
    }

    #[test]
    fn tree_detection() {
        let single = PPFormula::new(
            vec!["x", "y"],
            vec![],
            vec![Atom { rel: "edge".into(), args: vec!["x".into(), "y".into()] }],
        );
        assert!(is_tree(&single));
        let triangle = PPFormula::new(
            vec!["x"],
            vec!["y", "z"],
            vec![
                Atom { rel: "edge".into(), args: vec!["x".into(), "y".into()] },
                Atom { rel: "edge".into(), args: vec!["y".into(), "z".into()] },
                Atom { rel: "edge".into(), args: vec!["z".into(), "x".into()] },
            ],
        );
        assert!(!is_tree(&triangle));
        // fences are chains, hence trees
        let fence = PPFormula::new(
            vec!["x", "y"],
            vec!["m"],
            vec![
                Atom { rel: "edge".into(), args: vec!["x".into(), "m".into()] },
                Atom { rel: "edge".into(), args: vec!["y".into(), "m".into()] },
            ],
        );
        assert!(is_tree(&fence));
    }

    #[test]
    fn or_relation_examples() {
        let d = 3;
        let empty = KaryRel::empty(1, d);
        assert!(or_relation(&empty, &empty).unwrap().is_empty());
        let full = KaryRel::new(1, d, (0..d).map(|x| vec![x]).collect()).unwrap();
        let x = KaryRel::new(1, d, vec![vec![1]]).unwrap();
        assert_eq!(or_relation(&full, &x).unwrap().len(), d * d);
        // |OR(R,R)| = 2|R| d^k - |R|^2 for arity-k R
        let r = KaryRel::new(2, d, vec![vec![0, 1], vec![1, 2], vec![2, 2]]).unwrap();
        let or = or_relation(&r, &r).unwrap();
        assert_eq!(or.len(), 2 * r.len() * d * d - r.len() * r.len());
    }

    #[test]
    fn script_replay_round_trip() {
        let mut script = PPScript::default();
        script.push_primitive("edge", 2, PrimitiveDef::Edge);
        let f = PPFormula::new(
            vec!["x", "y"],
            vec!["z"],
            vec![
                Atom { rel: "edge".into(), args: vec!["x".into(), "z".into()] },
                Atom { rel: "edge".into(), args: vec!["z".into(), "y".into()] },
            ],
        );
        script.push_formula("two_step", f);
        script.output = "two_step".into();
        let g = fixtures::directed_cycle(3);
        let mut interp = |p: &PrimitiveDef| match p {
            PrimitiveDef::Edge => Ok(KaryRel::from_binrel(g.edge_rel())),
            _ => Err(Error::BadParameter("unexpected primitive".into())),
        };
        let s = script.replay(3, &mut interp).unwrap();
        assert_eq!(s.get("two_step").unwrap().len(), 3);
        // serialisation round trip
        let text = serde_json::to_string(&script).unwrap();
        let back: PPScript = serde_json::from_str(&text).unwrap();
        assert_eq!(back, script);
    }
}
