//! Mutable pipeline state: the current domain, its symmetries, classes, the
//! accumulated definition script, and an incrementally replayed structure
//! that keeps the script honest.

use crate::bitset::BitSet;
use crate::digraph::{BinRel, Digraph, KaryRel};
use crate::error::{Error, Result};
use crate::finitise::FinitisingEquivalence;
use crate::perm::{Perm, PermGroup};
use crate::ppengine::{evaluate, Atom, NamedStructure, PPFormula, PPScript, PrimitiveDef};
use std::collections::HashMap;

use super::pipeline_interpret_primitive;
use super::{Certificate, TraceStep};

#[derive(Clone, Debug)]
pub struct PipelineOptions {
    /// Cross-check every emitted definition against its set-theoretic value.
    pub assert_desk: bool,
    pub closure_cap: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions { assert_desk: true, closure_cap: crate::perm::DEFAULT_CLOSURE_CAP }
    }
}

pub(crate) struct SigmaResult {
    /// Blocks of global class indices.
    pub blocks: Vec<Vec<usize>>,
    pub output: String,
}

pub struct State<'a> {
    pub(crate) g0: &'a Digraph,
    pub(crate) alpha0: FinitisingEquivalence,
    pub(crate) orbit_sets0: Vec<BitSet>,
    pub(crate) quotient_w0: Digraph,
    pub(crate) gens0: Vec<Perm>,
    pub(crate) opts: PipelineOptions,

    dom: BitSet,
    /// All closure elements of the original group preserving the current
    /// domain setwise; a group under composition.
    stab: Vec<Perm>,
    /// Current orbits with their top-level orbit ids.
    orbits: Vec<(usize, BitSet)>,
    /// Global indices of the classes inside the current domain.
    class_ids: Vec<usize>,

    pub(crate) script: PPScript,
    replay: NamedStructure,
    dom_name: Option<String>,
    trace: Vec<TraceStep>,
    fresh: usize,
    union_names: HashMap<Vec<usize>, String>,
    alpha_names: HashMap<Vec<usize>, String>,
    class_names: HashMap<usize, String>,
    orbit_pred_names: HashMap<usize, String>,
}

impl<'a> State<'a> {
    pub(crate) fn new(
        g: &'a Digraph,
        gp: &PermGroup,
        alpha: FinitisingEquivalence,
        view: &crate::finitise::InstanceView,
        opts: &PipelineOptions,
    ) -> Result<Self> {
        let closure = gp.clone().with_closure_cap(opts.closure_cap).elements()?.to_vec();
        let mut script = PPScript::default();
        let mut replay = NamedStructure::new(g.n());
        script.push_primitive("edge", 2, PrimitiveDef::Edge);
        replay.insert("edge", KaryRel::from_binrel(g.edge_rel()))?;
        let class_ids = (0..alpha.len()).collect();
        Ok(State {
            g0: g,
            orbit_sets0: view.orbit_sets.clone(),
            quotient_w0: view.quotient_w.clone(),
            gens0: gp.generators().to_vec(),
            alpha0: alpha,
            opts: opts.clone(),
            dom: BitSet::full(g.n()),
            stab: closure,
            orbits: view.orbit_sets.iter().cloned().enumerate().collect(),
            class_ids,
            script,
            replay,
            dom_name: None,
            trace: Vec::new(),
            fresh: 0,
            union_names: HashMap::new(),
            alpha_names: HashMap::new(),
            class_names: HashMap::new(),
            orbit_pred_names: HashMap::new(),
        })
    }

    // ---- basic views -----------------------------------------------------

    pub(crate) fn domain(&self) -> &BitSet {
        &self.dom
    }

    pub(crate) fn induced(&self) -> Digraph {
        self.g0.induced(&self.dom)
    }

    pub(crate) fn edge_rel(&self) -> BinRel {
        self.g0.edge_rel().restrict(&self.dom)
    }

    pub(crate) fn class_count(&self) -> usize {
        self.class_ids.len()
    }

    pub(crate) fn class_ids(&self) -> &[usize] {
        &self.class_ids
    }

    pub(crate) fn class_set(&self, local: usize) -> &BitSet {
        &self.alpha0.classes()[self.class_ids[local]]
    }

    pub(crate) fn local_class_of(&self, v: usize) -> usize {
        let global = self.alpha0.class_of(v);
        self.class_ids.iter().position(|&c| c == global).expect("vertex inside the domain")
    }

    pub(crate) fn orbits(&self) -> &[(usize, BitSet)] {
        &self.orbits
    }

    pub(crate) fn orbit_set(&self, local: usize) -> &BitSet {
        &self.orbits[local].1
    }

    pub(crate) fn local_orbit_of(&self, v: usize) -> usize {
        self.orbits.iter().position(|(_, s)| s.contains(v)).expect("vertex inside the domain")
    }

    pub(crate) fn dom_name(&self) -> Option<&str> {
        self.dom_name.as_deref()
    }

    pub(crate) fn trace_mut(&mut self) -> &mut Vec<TraceStep> {
        &mut self.trace
    }

    pub(crate) fn fresh_name(&mut self, hint: &str) -> String {
        self.fresh += 1;
        format!("{}_{}", hint, self.fresh)
    }

    /// Quotient by the current classes, as a digraph on local class indices.
    pub(crate) fn quotient_alpha(&self) -> Digraph {
        let m = self.class_ids.len();
        let mut class_of = HashMap::new();
        for (local, &global) in self.class_ids.iter().enumerate() {
            for v in self.alpha0.classes()[global].iter() {
                class_of.insert(v, local);
            }
        }
        let edges: Vec<(usize, usize)> = self
            .edge_rel()
            .pairs()
            .map(|(a, b)| (class_of[&a], class_of[&b]))
            .collect();
        Digraph::new(m, &edges).expect("local indices in range")
    }

    /// Quotient by the current orbits, on local orbit indices.
    pub(crate) fn quotient_w(&self) -> Digraph {
        let m = self.orbits.len();
        let mut orbit_of = HashMap::new();
        for (local, (_, s)) in self.orbits.iter().enumerate() {
            for v in s.iter() {
                orbit_of.insert(v, local);
            }
        }
        let edges: Vec<(usize, usize)> = self
            .edge_rel()
            .pairs()
            .map(|(a, b)| (orbit_of[&a], orbit_of[&b]))
            .collect();
        Digraph::new(m, &edges).expect("local indices in range")
    }

    /// A binary relation factored to local class indices.
    pub(crate) fn rel_mod_alpha(&self, rel: &BinRel) -> BinRel {
        let m = self.class_ids.len();
        let mut out = BinRel::empty(m);
        for (a, b) in rel.pairs() {
            out.insert(self.local_class_of(a), self.local_class_of(b));
        }
        out
    }

    pub(crate) fn is_stable(&self, rel: &BinRel) -> bool {
        crate::finitise::is_alpha_stable_binrel(rel, &self.alpha0)
    }

    pub(crate) fn is_class_union(&self, set: &BitSet) -> bool {
        self.alpha0.is_union_of_classes(set)
    }

    pub(crate) fn is_orbit_union(&self, set: &BitSet) -> bool {
        self.orbits.iter().all(|(_, s)| s.is_subset(set) || !s.intersects(set))
    }

    pub(crate) fn is_invariant(&self, rel: &BinRel) -> bool {
        self.stab.iter().all(|f| rel.pairs().all(|(a, b)| rel.contains(f[a], f[b])))
    }

    /// Class restricted to the current domain as a global relation.
    pub(crate) fn alpha_restricted(&self, set: &BitSet) -> BinRel {
        self.alpha0.restricted_to(set)
    }

    /// The distinct permutations of local classes the symmetries induce,
    /// each with a witnessing full permutation.
    pub(crate) fn class_action(&self) -> Vec<(Vec<usize>, Perm)> {
        let mut seen: HashMap<Vec<usize>, Perm> = HashMap::new();
        for f in &self.stab {
            let act: Vec<usize> = (0..self.class_ids.len())
                .map(|local| {
                    let v = self.class_set(local).iter().next().unwrap();
                    self.local_class_of(f[v])
                })
                .collect();
            seen.entry(act).or_insert_with(|| f.clone());
        }
        let mut out: Vec<_> = seen.into_iter().collect();
        out.sort();
        out
    }

    /// Orbit of a tuple under the current symmetries.
    pub(crate) fn tuple_orbit(&self, t: &[usize]) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> =
            self.stab.iter().map(|f| t.iter().map(|&v| f[v]).collect()).collect();
        out.sort();
        out.dedup();
        out
    }

    // ---- invariants ------------------------------------------------------

    pub(crate) fn assert_invariants(&self) -> Result<()> {
        let induced = self.induced();
        if !induced.is_smooth_on(&self.dom) {
            return Err(Error::Defect("current domain lost smoothness".into()));
        }
        let jw = self.quotient_w();
        for v in 0..jw.n() {
            if jw.has_edge(v, v) {
                return Err(Error::Defect("orbit quotient grew a loop".into()));
            }
        }
        if self.class_ids.len() < 2 {
            return Err(Error::Defect("quotient collapsed to one class".into()));
        }
        Ok(())
    }

    /// Smallest k for which the class quotient is k-linked.
    pub(crate) fn smallest_linked_k(&self) -> Result<usize> {
        let j = self.quotient_alpha();
        let bound = j.n() * j.n() + 1;
        for k in 1..=bound {
            if crate::digraph::linkedness(&j, k)?.1 {
                if k > j.n() {
                    return Err(Error::Defect(format!(
                        "linkedness parameter {k} exceeded the class count {}",
                        j.n()
                    )));
                }
                return Ok(k);
            }
        }
        Err(Error::Defect("class quotient is not linked at any height".into()))
    }

    pub(crate) fn power_full_mod_alpha(&self, k: usize) -> Result<bool> {
        let j = self.quotient_alpha();
        Ok(j.edge_rel().power(k).is_full())
    }

    /// Stabilisation count of the fence relation at the given height on a
    /// digraph: the first repetition count at which it stops growing.
    pub(crate) fn fence_stab_count(j: &Digraph, k: usize) -> Result<usize> {
        let one = crate::digraph::fence_relation(j, k, 1)?;
        let mut cur = one.clone();
        let mut n = 1;
        loop {
            let next = cur.compose(&one)?;
            if next == cur {
                return Ok(n);
            }
            cur = next;
            n += 1;
        }
    }

    // ---- script emission -------------------------------------------------

    /// Pushes a primitive definition, interprets it, and records it in the
    /// replayed structure.
    pub(crate) fn define_primitive(&mut self, name: &str, arity: usize, p: PrimitiveDef) -> Result<String> {
        let rel = pipeline_interpret_primitive(
            self.g0,
            &self.gens0,
            &self.alpha0,
            &self.orbit_sets0,
            &self.quotient_w0,
            &p,
        )?;
        if rel.arity != arity {
            return Err(Error::ArityMismatch { expected: arity, got: rel.arity });
        }
        self.script.push_primitive(name, arity, p);
        self.replay.insert(name, rel)?;
        Ok(name.to_string())
    }

    /// Pushes a formula definition, evaluates it over the replayed
    /// structure, and optionally checks it against an expected value.
    pub(crate) fn define_formula(
        &mut self,
        name: &str,
        f: PPFormula,
        expected: Option<&KaryRel>,
    ) -> Result<String> {
        if std::env::var("LOOPSMITH_DEBUG").is_ok() {
            eprintln!("define {} atoms={} vars={}", name, f.atoms.len(), f.free.len() + f.exists.len());
        }
        let rel = evaluate(&self.replay, &f)?;
        if let Some(want) = expected {
            if &rel != want {
                return Err(Error::Defect(format!(
                    "definition {name} evaluates to {} tuples, expected {}",
                    rel.len(),
                    want.len()
                )));
            }
        }
        self.script.push_formula(name, f);
        self.replay.insert(name, rel)?;
        Ok(name.to_string())
    }

    pub(crate) fn defined(&self, name: &str) -> Result<&KaryRel> {
        self.replay.get(name)
    }

    pub(crate) fn eval_here(&self, f: &PPFormula) -> Result<KaryRel> {
        evaluate(&self.replay, f)
    }

    /// Appends domain-membership atoms for the given variables.
    pub(crate) fn dom_atoms(&self, vars: &[String], atoms: &mut Vec<Atom>) {
        if let Some(dn) = &self.dom_name {
            for v in vars {
                atoms.push(Atom { rel: dn.clone(), args: vec![v.clone()] });
            }
        }
    }

    /// Unary predicate for a union of one or two current orbits.
    pub(crate) fn orbit_union_name(&mut self, locals: &[usize]) -> Result<String> {
        let mut tops: Vec<usize> = locals.iter().map(|&l| self.orbits[l].0).collect();
        tops.sort_unstable();
        tops.dedup();
        if tops.is_empty() || tops.len() > 2 {
            return Err(Error::Guard("orbit unions limited to two orbits".into()));
        }
        if let Some(n) = self.union_names.get(&tops) {
            return Ok(n.clone());
        }
        let base = format!(
            "orbits_{}",
            tops.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("_")
        );
        let prim = format!("{base}_top");
        self.define_primitive(&prim, 1, PrimitiveDef::OrbitUnion(tops.clone()))?;
        let name = if self.dom_name.is_some() {
            let wrapped = self.fresh_name(&base);
            let mut atoms = vec![Atom { rel: prim.clone(), args: vec!["x".into()] }];
            self.dom_atoms(&["x".to_string()], &mut atoms);
            self.define_formula(&wrapped, PPFormula::new(vec!["x"], vec![], atoms), None)?
        } else {
            prim
        };
        self.union_names.insert(tops, name.clone());
        Ok(name)
    }

    /// Predicate for one current orbit.
    pub(crate) fn orbit_pred_name(&mut self, local: usize) -> Result<String> {
        if let Some(n) = self.orbit_pred_names.get(&local) {
            return Ok(n.clone());
        }
        let name = self.orbit_union_name(&[local])?;
        self.orbit_pred_names.insert(local, name.clone());
        Ok(name)
    }

    /// The refinement restricted to one current orbit or an adjacent pair.
    pub(crate) fn alpha_restriction_name(&mut self, locals: &[usize]) -> Result<String> {
        let mut tops: Vec<usize> = locals.iter().map(|&l| self.orbits[l].0).collect();
        tops.sort_unstable();
        tops.dedup();
        if tops.is_empty() || tops.len() > 2 {
            return Err(Error::Guard("restrictions limited to orbit pairs".into()));
        }
        if tops.len() == 2
            && !self.quotient_w0.has_edge(tops[0], tops[1])
            && !self.quotient_w0.has_edge(tops[1], tops[0])
        {
            return Err(Error::Guard("restriction requires adjacent orbits".into()));
        }
        if let Some(n) = self.alpha_names.get(&tops) {
            return Ok(n.clone());
        }
        let base = format!(
            "alpha_{}",
            tops.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("_")
        );
        let prim = format!("{base}_top");
        self.define_primitive(&prim, 2, PrimitiveDef::AlphaRestriction(tops.clone()))?;
        let name = if self.dom_name.is_some() {
            let wrapped = self.fresh_name(&base);
            let mut atoms =
                vec![Atom { rel: prim.clone(), args: vec!["x".into(), "y".into()] }];
            self.dom_atoms(&["x".to_string(), "y".to_string()], &mut atoms);
            self.define_formula(&wrapped, PPFormula::new(vec!["x", "y"], vec![], atoms), None)?
        } else {
            prim
        };
        self.alpha_names.insert(tops, name.clone());
        Ok(name)
    }

    /// Singleton-class predicate (a parameter of the definition chain).
    pub(crate) fn class_param_name(&mut self, global: usize) -> Result<String> {
        if let Some(n) = self.class_names.get(&global) {
            return Ok(n.clone());
        }
        let name = format!("class_{global}");
        self.define_primitive(&name, 1, PrimitiveDef::ClassParam(global))?;
        self.class_names.insert(global, name.clone());
        Ok(name)
    }

    /// Named-input relation: the orbit of a seed tuple under the original
    /// symmetries, optionally closed under componentwise class replacement,
    /// then cut down to the current domain.
    pub(crate) fn named_orbit_input(
        &mut self,
        hint: &str,
        seed: Vec<usize>,
        class_closed: bool,
    ) -> Result<String> {
        let arity = seed.len();
        let prim_name = self.fresh_name(&format!("{hint}_orb"));
        self.define_primitive(
            &prim_name,
            arity,
            PrimitiveDef::NamedInput { orbit_of: seed.clone(), class_closed },
        )?;
        if self.dom_name.is_none() {
            return Ok(prim_name);
        }
        let vars: Vec<String> = (0..arity).map(|i| format!("w{i}")).collect();
        let mut atoms = vec![Atom { rel: prim_name.clone(), args: vars.clone() }];
        self.dom_atoms(&vars, &mut atoms);
        let wrapped = self.fresh_name(hint);
        let f = PPFormula {
            free: vars,
            exists: vec![],
            atoms,
            params: Default::default(),
        };
        let expected = if self.opts.assert_desk {
            // the wrapped relation must be the orbit under the current
            // symmetries (plus closure), computed directly
            let mut tuples = self.tuple_orbit(&seed);
            if class_closed {
                let closed =
                    crate::ppengine::alpha_closure_of_tuples(&tuples, &self.alpha0, self.g0.n())?;
                tuples = closed.tuples().to_vec();
            }
            tuples.retain(|t| t.iter().all(|&v| self.dom.contains(v)));
            Some(KaryRel::new(arity, self.g0.n(), tuples)?)
        } else {
            None
        };
        self.define_formula(&wrapped, f, expected.as_ref())
    }

    /// The class-closed orbit of one representative per class of the given
    /// local classes (sorted), as a named input cut to the domain.
    pub(crate) fn ig_projection(&mut self, hint: &str, locals: &[usize]) -> Result<String> {
        let seed: Vec<usize> =
            locals.iter().map(|&l| self.class_set(l).iter().next().unwrap()).collect();
        self.named_orbit_input(hint, seed, true)
    }

    /// Chain formula for the k-fold edge power, domain-restricted.
    pub(crate) fn edge_power_formula(&self, k: usize) -> PPFormula {
        let var = |i: usize| format!("p{i}");
        let mut atoms = Vec::new();
        for i in 0..k {
            atoms.push(Atom { rel: "edge".into(), args: vec![var(i), var(i + 1)] });
        }
        let vars: Vec<String> = (0..=k).map(var).collect();
        self.dom_atoms(&vars, &mut atoms);
        PPFormula {
            free: vec![var(0), var(k)],
            exists: (1..k).map(var).collect(),
            atoms,
            params: Default::default(),
        }
    }

    /// Chain formula for the height-k, reps-n fence, with every variable
    /// restricted by the named unary predicate (or just the domain).
    pub(crate) fn fence_formula(
        &self,
        k: usize,
        reps: usize,
        restrict: Option<&str>,
    ) -> PPFormula {
        let len = 2 * k * reps;
        let var = |i: usize| format!("f{i}");
        let mut atoms = Vec::new();
        for i in 0..len {
            let fwd = (i % (2 * k)) < k;
            let (x, y) = if fwd { (var(i), var(i + 1)) } else { (var(i + 1), var(i)) };
            atoms.push(Atom { rel: "edge".into(), args: vec![x, y] });
        }
        let vars: Vec<String> = (0..=len).map(var).collect();
        match restrict {
            Some(r) => {
                for v in &vars {
                    atoms.push(Atom { rel: r.to_string(), args: vec![v.clone()] });
                }
            }
            None => self.dom_atoms(&vars, &mut atoms),
        }
        PPFormula {
            free: vec![var(0), var(len)],
            exists: (1..len).map(var).collect(),
            atoms,
            params: Default::default(),
        }
    }

    // ---- restriction -----------------------------------------------------

    /// Replaces the domain by a class-stable reductionistic proper subset
    /// already defined in the script under `h_name`.
    pub(crate) fn restrict_to(&mut self, h: &BitSet, h_name: String) -> Result<()> {
        let count = h.count();
        if count == 0 || count >= self.dom.count() || !h.is_subset(&self.dom) {
            return Err(Error::Defect("restriction target is not a proper subset".into()));
        }
        if !self.is_class_union(h) {
            return Err(Error::Defect("restriction target is not class-stable".into()));
        }
        // reductionistic: the setwise orbit under the current symmetries is
        // a family of pairwise disjoint sets
        let mut images: Vec<Vec<usize>> = self
            .stab
            .iter()
            .map(|f| {
                let mut img: Vec<usize> = h.iter().map(|v| f[v]).collect();
                img.sort_unstable();
                img
            })
            .collect();
        images.sort();
        images.dedup();
        for (i, a) in images.iter().enumerate() {
            for b in images.iter().skip(i + 1) {
                if a.iter().any(|v| b.binary_search(v).is_ok()) {
                    return Err(Error::Defect("restriction target is not reductionistic".into()));
                }
            }
        }
        let new_stab: Vec<Perm> =
            self.stab.iter().filter(|f| h.iter().all(|v| h.contains(f[v]))).cloned().collect();
        // orbits restrict
        let mut new_orbits: Vec<(usize, BitSet)> = Vec::new();
        for (top, s) in &self.orbits {
            let mut r = s.clone();
            r.intersect_with(h);
            if !r.is_empty() {
                new_orbits.push((*top, r));
            }
        }
        if self.opts.assert_desk {
            // restricted orbits are orbits of the restricted symmetries
            for (_, s) in &new_orbits {
                let v = s.iter().next().unwrap();
                let mut orbit = BitSet::new(self.g0.n());
                for f in &new_stab {
                    orbit.insert(f[v]);
                }
                if &orbit != s {
                    return Err(Error::Defect("orbit restriction property failed".into()));
                }
            }
        }
        let new_classes: Vec<usize> = self
            .class_ids
            .iter()
            .copied()
            .filter(|&c| self.alpha0.classes()[c].is_subset(h))
            .collect();
        if new_classes.len() >= self.class_ids.len() {
            return Err(Error::Defect("restriction did not shrink the class count".into()));
        }
        self.dom = h.clone();
        self.stab = new_stab;
        self.orbits = new_orbits;
        self.class_ids = new_classes;
        self.dom_name = Some(h_name);
        self.orbit_pred_names.clear();
        self.union_names.clear();
        self.alpha_names.clear();
        Ok(())
    }

    /// Initial restriction: the weak component of the unit walk, defined as
    /// the blow-up of a linkedness class of its quotient.
    pub(crate) fn restrict_to_unit_component(&mut self, anchor: usize) -> Result<()> {
        let comps = crate::digraph::weak_components(self.g0);
        let comp = comps
            .iter()
            .find(|c| c.contains(&anchor))
            .ok_or_else(|| Error::Defect("anchor outside every component".into()))?;
        let h = BitSet::from_iter(self.g0.n(), comp.iter().copied());
        if h.count() == self.dom.count() {
            return Ok(());
        }
        // the component is the blow-up of a linkedness class on its quotient
        let sub_class_ids: Vec<usize> = self
            .class_ids
            .iter()
            .copied()
            .filter(|&c| self.alpha0.classes()[c].is_subset(&h))
            .collect();
        let j = {
            let mut class_of = HashMap::new();
            for (local, &global) in sub_class_ids.iter().enumerate() {
                for v in self.alpha0.classes()[global].iter() {
                    class_of.insert(v, local);
                }
            }
            let edges: Vec<(usize, usize)> = self
                .g0
                .edge_rel()
                .restrict(&h)
                .pairs()
                .map(|(a, b)| (class_of[&a], class_of[&b]))
                .collect();
            Digraph::new(sub_class_ids.len(), &edges)?
        };
        let mut k = None;
        for cand in 1..=j.n() {
            if crate::digraph::linkedness(&j, cand)?.1 {
                k = Some(cand);
                break;
            }
        }
        let k = k.ok_or_else(|| {
            Error::Defect("unit-walk component quotient is not linked at any height".into())
        })?;
        let reps = Self::fence_stab_count(&j, k)?;
        let anchor_class = self.alpha0.class_of(anchor);
        let cls = self.class_param_name(anchor_class)?;
        let fence = self.fence_formula(k, reps, None);
        let fx = fence.free[0].clone();
        let fy = fence.free[1].clone();
        let mut atoms = fence.atoms.clone();
        atoms.push(Atom { rel: cls, args: vec![fy.clone()] });
        let mut exists = fence.exists.clone();
        exists.push(fy);
        let f = PPFormula { free: vec![fx], exists, atoms, params: Default::default() };
        let expected = KaryRel::from_unary_set(&h);
        let name = self.fresh_name("component");
        self.define_formula(&name, f, Some(&expected))?;
        self.restrict_to(&h, name)?;
        self.trace.push(TraceStep::RestrictToComponent { classes_kept: self.class_ids.len() });
        Ok(())
    }

    pub(crate) fn into_hardness(mut self, component: Vec<usize>, sigma: SigmaResult) -> Certificate {
        self.script.output = sigma.output;
        Certificate::Hardness {
            component,
            alpha_classes: self.alpha0.classes().iter().map(|c| c.to_vec()).collect(),
            sigma: sigma.blocks,
            script: self.script,
            trace: self.trace,
        }
    }
}
