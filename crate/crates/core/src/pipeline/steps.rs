//! The individual reduction steps of the master induction. Every relation is
//! computed set-theoretically first; the emitted definitions are evaluated
//! alongside and must reproduce those values exactly.

use crate::bitset::BitSet;
use crate::digraph::{fence_relation, linkedness, weak_components_on, BinRel, Digraph, KaryRel};
use crate::error::{Error, Result};
use crate::paths::{build_central_escape, MergedPath, PathCtx};
use crate::ppengine::{Atom, PPFormula};
use std::collections::{BTreeMap, BTreeSet};

use super::state::{SigmaResult, State};
use super::TraceStep;

pub(crate) struct CentralData {
    pub rel: BinRel,
    pub name: String,
}

pub(crate) struct TsrData {
    pub t: KaryRel,
    pub or_name: String,
}

pub(crate) enum Marcin {
    Central(CentralData),
    OrTsr(TsrData),
}

pub(crate) struct OrPair {
    pub rel2: BinRel,
    pub name: String,
    pub d_l: BitSet,
    pub d_r: BitSet,
}

pub(crate) struct UnaryOr {
    pub u: BitSet,
    pub name: String,
    pub rel2: BinRel,
}

pub(crate) enum OrOutcome {
    Reduced,
    OrUnary(UnaryOr),
}

pub(crate) enum TsrOutcome {
    OrUnary(UnaryOr),
    Sigma(SigmaResult),
}

pub(crate) enum SigmaOutcome {
    Reduced,
    Sigma(SigmaResult),
}

fn unary(set: &BitSet) -> KaryRel {
    KaryRel::from_unary_set(set)
}

fn blow(state: &State, locals: &[usize]) -> BitSet {
    let mut out = BitSet::new(state.g0.n());
    for &l in locals {
        out.union_with(state.class_set(l));
    }
    out
}

fn classes_in(state: &State, set: &BitSet) -> Vec<usize> {
    (0..state.class_count()).filter(|&l| state.class_set(l).is_subset(set)).collect()
}

fn or_pairs_on(dom: &BitSet, left: &BitSet, right: &BitSet) -> BinRel {
    let mut out = BinRel::empty(dom.len());
    for x in dom.iter() {
        for y in dom.iter() {
            if left.contains(x) || right.contains(y) {
                out.insert(x, y);
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// the full case: shrink to a component of the smooth part of a linkedness
// class one height down
// ---------------------------------------------------------------------------

pub(crate) fn step_full_case(state: &mut State, k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::Defect("a loopless quotient cannot have a full edge power at height one".into()));
    }
    let j = state.quotient_alpha();
    let (beta, beta_full) = linkedness(&j, k - 1)?;
    if beta_full {
        return Err(Error::Defect("the quotient is already linked one height down".into()));
    }
    // the linkedness class of the first local class
    let kprime_j = {
        let mut s = beta.row(0).clone();
        s.insert(0);
        s
    };
    let sp_j = crate::digraph::smooth_part(&j, &kprime_j);
    if sp_j.is_empty() {
        return Err(Error::Defect("smooth part of a full-power linkedness class is empty".into()));
    }
    let comps = weak_components_on(&j, &sp_j);
    let k_j: Vec<usize> = comps[0].clone();
    let k_set_j = BitSet::from_iter(j.n(), k_j.iter().copied());
    if !crate::digraph::linkedness_on(&j, &k_set_j, k - 1)?.1 {
        return Err(Error::Defect("chosen component is not linked one height down".into()));
    }

    let kprime_blow = blow(state, &kprime_j.to_vec());
    let sp_blow = blow(state, &sp_j.to_vec());
    let k_blow = blow(state, &k_j);

    // definitions: linkedness class, its smooth part, the component
    let reps = State::fence_stab_count(&j, k - 1)?;
    let anchor_class = state.class_ids()[0];
    let cls0 = state.class_param_name(anchor_class)?;
    let fence = state.fence_formula(k - 1, reps, None);
    let fx = fence.free[0].clone();
    let fy = fence.free[1].clone();
    let mut atoms = fence.atoms.clone();
    atoms.push(Atom { rel: cls0, args: vec![fy.clone()] });
    let mut exists = fence.exists.clone();
    exists.push(fy);
    let kprime_name = state.fresh_name("linkclass");
    state.define_formula(
        &kprime_name,
        PPFormula { free: vec![fx], exists, atoms, params: Default::default() },
        Some(&unary(&kprime_blow)),
    )?;

    let walk_len = kprime_j.count();
    let sp_name = state.fresh_name("smoothpart");
    {
        let mut atoms = vec![Atom { rel: kprime_name.clone(), args: vec!["x".into()] }];
        let mut exists = Vec::new();
        let mut prev = "x".to_string();
        for t in 0..walk_len {
            let v = format!("fw{t}");
            atoms.push(Atom { rel: "edge".into(), args: vec![prev.clone(), v.clone()] });
            atoms.push(Atom { rel: kprime_name.clone(), args: vec![v.clone()] });
            exists.push(v.clone());
            prev = v;
        }
        let mut prev = "x".to_string();
        for t in 0..walk_len {
            let v = format!("bw{t}");
            atoms.push(Atom { rel: "edge".into(), args: vec![v.clone(), prev.clone()] });
            atoms.push(Atom { rel: kprime_name.clone(), args: vec![v.clone()] });
            exists.push(v.clone());
            prev = v;
        }
        state.define_formula(
            &sp_name,
            PPFormula {
                free: vec!["x".into()],
                exists,
                atoms,
                params: Default::default(),
            },
            Some(&unary(&sp_blow)),
        )?;
    }

    let j_sp = j.induced(&sp_j);
    let reps2 = State::fence_stab_count(&j_sp, k - 1)?;
    let comp_anchor = state.class_ids()[k_j[0]];
    let cls_star = state.class_param_name(comp_anchor)?;
    let fence2 = state.fence_formula(k - 1, reps2, Some(&sp_name));
    let fx = fence2.free[0].clone();
    let fy = fence2.free[1].clone();
    let mut atoms = fence2.atoms.clone();
    atoms.push(Atom { rel: cls_star, args: vec![fy.clone()] });
    let mut exists = fence2.exists.clone();
    exists.push(fy);
    let k_name = state.fresh_name("component");
    state.define_formula(
        &k_name,
        PPFormula { free: vec![fx], exists, atoms, params: Default::default() },
        Some(&unary(&k_blow)),
    )?;

    state.restrict_to(&k_blow, k_name)?;
    let kept = state.class_count();
    state.trace_mut().push(TraceStep::FullCase { k, classes_kept: kept });
    Ok(())
}

// ---------------------------------------------------------------------------
// central-or-TSR: the fence shrinking loop, then the symmetric OR witness
// ---------------------------------------------------------------------------

fn centre_locals(state: &State, rel: &BinRel) -> Vec<usize> {
    let m = state.class_count();
    let rel_j = state.rel_mod_alpha(rel);
    (0..m).filter(|&a| (0..m).all(|b| rel_j.contains(a, b))).collect()
}

pub(crate) fn step_marcinsmagic(state: &mut State, k: usize) -> Result<Marcin> {
    let j = state.quotient_alpha();
    let e_cur = state.edge_rel();
    let ek = e_cur.power(k);
    let ek_name = state.fresh_name("edgepow");
    state.define_formula(&ek_name, state.edge_power_formula(k), Some(&KaryRel::from_binrel(&ek)))?;
    if state.rel_mod_alpha(&ek).is_full() {
        return Err(Error::Defect("edge power is full; the full case should have fired".into()));
    }
    if !centre_locals(state, &ek).is_empty() {
        return Ok(Marcin::Central(CentralData { rel: ek, name: ek_name }));
    }
    // smallest fence count at which the quotient fence is full
    let mut ell = None;
    for cand in 1..=(j.n() * j.n() + 1) {
        if fence_relation(&j, k, cand)?.is_full() {
            ell = Some(cand);
            break;
        }
    }
    let ell = ell.ok_or_else(|| Error::Defect("quotient is linked but no fence is full".into()))?;
    let (r_rel, r_name) = if ell == 1 {
        (ek, ek_name)
    } else {
        let induced = state.induced();
        let rf = fence_relation(&induced, k, ell - 1)?.restrict(state.domain());
        let name = state.fresh_name("fence");
        let f = state.fence_formula(k, ell - 1, None);
        state.define_formula(&name, f, Some(&KaryRel::from_binrel(&rf)))?;
        (rf, name)
    };
    // shrink C orbit by orbit
    let mut c_set = state.domain().clone();
    let mut c_name = {
        let name = state.fresh_name("centre_dom");
        let mut atoms = Vec::new();
        state.dom_atoms(&["x".to_string()], &mut atoms);
        state.define_formula(
            &name,
            PPFormula { free: vec!["x".into()], exists: vec![], atoms, params: Default::default() },
            Some(&unary(&c_set)),
        )?
    };
    for o_local in 0..state.orbits().len() {
        let o_classes = classes_in(state, &state.orbit_set(o_local).clone());
        // (O (+) R) within C
        let mut oplus = state.domain().clone();
        for &l in &o_classes {
            oplus.intersect_with(&r_rel.image(state.class_set(l)));
        }
        oplus.intersect_with(&c_set);
        let mut w = r_rel.preimage(&oplus);
        w.intersect_with(state.domain());
        // per-class fullness must hold; the orbit-level check splits the cases
        if state.opts.assert_desk {
            for &l in &o_classes {
                let mut single = r_rel.image(state.class_set(l));
                single.intersect_with(&c_set);
                let mut back = r_rel.preimage(&single);
                back.intersect_with(state.domain());
                if &back != state.domain() {
                    return Err(Error::Defect("single-class reach is not everything".into()));
                }
            }
        }
        let oplus_name = {
            let pr = state.ig_projection("pr_orbit", &o_classes)?;
            let m = o_classes.len();
            let vars: Vec<String> = (0..m).map(|i| format!("w{i}")).collect();
            let mut atoms = vec![Atom { rel: pr, args: vars.clone() }];
            for v in &vars {
                atoms.push(Atom { rel: r_name.clone(), args: vec![v.clone(), "x".into()] });
            }
            atoms.push(Atom { rel: c_name.clone(), args: vec!["x".into()] });
            let name = state.fresh_name("oplus");
            state.define_formula(
                &name,
                PPFormula { free: vec!["x".into()], exists: vars, atoms, params: Default::default() },
                Some(&unary(&oplus)),
            )?
        };
        if &w != state.domain() {
            return step_trick_m2(state, r_rel, r_name, c_set, c_name, o_local, oplus, oplus_name);
        }
        c_set = oplus;
        c_name = oplus_name;
        // the paired-reach relation must stay full modulo the classes
        let rc = {
            let rr = r_rel.restrict_right(&c_set);
            rr.compose(&rr.inverse())?
        };
        if !state.rel_mod_alpha(&rc).is_full() {
            let name = state.fresh_name("paired");
            let f = PPFormula::new(
                vec!["x", "y"],
                vec!["z"],
                vec![
                    Atom { rel: r_name.clone(), args: vec!["x".into(), "z".into()] },
                    Atom { rel: r_name.clone(), args: vec!["y".into(), "z".into()] },
                    Atom { rel: c_name.clone(), args: vec!["z".into()] },
                ],
            );
            state.define_formula(&name, f, Some(&KaryRel::from_binrel(&rc)))?;
            let centre = centre_locals(state, &rc);
            if centre.is_empty() || centre.len() == state.class_count() {
                return Err(Error::Defect("paired-reach relation has a degenerate centre".into()));
            }
            return Ok(Marcin::Central(CentralData { rel: rc, name }));
        }
    }
    let centre = centre_locals(state, &r_rel);
    if centre.is_empty() || centre.len() == state.class_count() {
        return Err(Error::Defect("fence relation has a degenerate centre after the loop".into()));
    }
    Ok(Marcin::Central(CentralData { rel: r_rel, name: r_name }))
}

#[allow(clippy::too_many_arguments)]
fn step_trick_m2(
    state: &mut State,
    r_rel: BinRel,
    r_name: String,
    c_set: BitSet,
    c_name: String,
    o_local: usize,
    _oplus_o: BitSet,
    _oplus_name: String,
) -> Result<Marcin> {
    let o_classes = classes_in(state, &state.orbit_set(o_local).clone());
    let reach = |locals: &[usize]| -> BitSet {
        let mut x = state.domain().clone();
        for &l in locals {
            x.intersect_with(&r_rel.image(state.class_set(l)));
        }
        x.intersect_with(&c_set);
        let mut w = r_rel.preimage(&x);
        w.intersect_with(state.domain());
        w
    };
    // maximal class union S inside the orbit with full reach
    let mut s_locals: Vec<usize> = Vec::new();
    for &l in &o_classes {
        let mut trial = s_locals.clone();
        trial.push(l);
        if &reach(&trial) == state.domain() {
            s_locals = trial;
        }
    }
    if s_locals.is_empty() || s_locals.len() == o_classes.len() {
        return Err(Error::Defect("maximal class union inside the orbit is degenerate".into()));
    }
    let s_set: BTreeSet<usize> = s_locals.iter().copied().collect();
    let actions = state.class_action();
    let image_of = |act: &[usize], set: &BTreeSet<usize>| -> BTreeSet<usize> {
        set.iter().map(|&l| act[l]).collect()
    };
    let moved: Vec<usize> = (0..actions.len())
        .filter(|&i| image_of(&actions[i].0, &s_set) != s_set)
        .collect();
    if moved.is_empty() {
        return Err(Error::Defect("a proper class union inside an orbit cannot be invariant".into()));
    }
    let ell = 1 + moved
        .iter()
        .map(|&i| image_of(&actions[i].0, &s_set).intersection(&s_set).count())
        .max()
        .unwrap();
    // maximise the reached-class count over moved symmetries and choices of
    // ell distinct classes inside S
    let mut best: Option<(usize, usize, Vec<usize>)> = None;
    let subsets = combinations(&s_locals, ell);
    for &ai in &moved {
        for subset in &subsets {
            let mut u: BTreeSet<usize> = s_set.clone();
            for &l in subset {
                u.insert(actions[ai].0[l]);
            }
            let u_locals: Vec<usize> = u.into_iter().collect();
            let w = reach(&u_locals);
            let count = classes_in(state, &w).len();
            let cand = (count, ai, subset.clone());
            let better = match &best {
                None => true,
                Some((bc, bai, bs)) => {
                    count > *bc || (count == *bc && (ai, subset) < (*bai, bs))
                }
            };
            if better {
                best = Some(cand);
            }
        }
    }
    let (_, ai, subset) = best.ok_or_else(|| Error::Defect("no symmetry choice found".into()))?;
    let mut u_set: BTreeSet<usize> = s_set.clone();
    for &l in &subset {
        u_set.insert(actions[ai].0[l]);
    }
    let u_locals: Vec<usize> = u_set.iter().copied().collect();
    let wset = reach(&u_locals);
    if wset.is_empty() || &wset == state.domain() {
        return Err(Error::Defect("symmetric reach is degenerate".into()));
    }
    if !state.is_class_union(&wset) {
        return Err(Error::Defect("symmetric reach is not class-stable".into()));
    }
    let w_classes: BTreeSet<usize> = classes_in(state, &wset).into_iter().collect();
    // distinct images of the reached class set under all symmetries
    let mut images: Vec<BTreeSet<usize>> = actions
        .iter()
        .map(|(act, _)| image_of(act, &w_classes))
        .collect();
    images.sort();
    images.dedup();
    let n_classes = state.class_count();
    let all_locals: Vec<usize> = (0..n_classes).collect();
    let mut arity = None;
    'sizes: for size in 1..=n_classes {
        for sub in combinations(&all_locals, size) {
            let sset: BTreeSet<usize> = sub.iter().copied().collect();
            if !images.iter().any(|img| sset.is_subset(img)) {
                arity = Some(size);
                break 'sizes;
            }
        }
    }
    let k_t = arity.ok_or_else(|| Error::Defect("every class subset is covered".into()))?;
    if k_t >= n_classes {
        return Err(Error::Defect("witness arity reached the class count".into()));
    }
    // T: tuples whose coordinates fit inside one image
    let image_sets: Vec<BitSet> = images
        .iter()
        .map(|img| blow(state, &img.iter().copied().collect::<Vec<_>>()))
        .collect();
    let mut t_tuples: Vec<Vec<usize>> = Vec::new();
    for img in &image_sets {
        let elems = img.to_vec();
        let count = elems.len().pow(k_t as u32);
        if t_tuples.len() + count > 2_000_000 {
            return Err(Error::Guard("symmetric witness relation exceeds the cap".into()));
        }
        let mut idx = vec![0usize; k_t];
        'tuples: loop {
            t_tuples.push(idx.iter().map(|&i| elems[i]).collect());
            for p in (0..k_t).rev() {
                idx[p] += 1;
                if idx[p] < elems.len() {
                    continue 'tuples;
                }
                idx[p] = 0;
            }
            break;
        }
    }
    let t = KaryRel::new(k_t, state.g0.n(), t_tuples)?;
    if !crate::finitise::is_alpha_stable_kary(&t, &state.alpha0) {
        return Err(Error::Defect("witness relation is not class-stable".into()));
    }
    // or-relation, confined to the current domain
    let dom_elems = state.domain().to_vec();
    let dom_k = dom_elems.len().pow(k_t as u32);
    if dom_k.saturating_mul(t.len()) > crate::ppengine::OR_CAP {
        return Err(Error::Guard("or-relation over the witness exceeds the cap".into()));
    }
    let mut or_tuples: Vec<Vec<usize>> = Vec::new();
    let all_k: Vec<Vec<usize>> = {
        let mut out = vec![vec![]];
        for _ in 0..k_t {
            out = out
                .into_iter()
                .flat_map(|p| {
                    dom_elems.iter().map(move |&x| {
                        let mut q = p.clone();
                        q.push(x);
                        q
                    })
                })
                .collect();
        }
        out
    };
    for lt in t.tuples() {
        for rt in &all_k {
            let mut row = lt.clone();
            row.extend_from_slice(rt);
            or_tuples.push(row);
        }
    }
    for rt in t.tuples() {
        for lt in &all_k {
            let mut row = lt.clone();
            row.extend_from_slice(rt);
            or_tuples.push(row);
        }
    }
    let or_rel = KaryRel::new(2 * k_t, state.g0.n(), or_tuples)?;

    // script: the doubled witness formula
    let m = w_classes.len();
    let n_s = s_locals.len();
    let u_seed: Vec<usize> = w_classes
        .iter()
        .map(|&l| state.class_set(l).iter().next().unwrap())
        .collect();
    let o_u = state.named_orbit_input("witness_reps", u_seed, false)?;
    let s_reps: Vec<usize> =
        s_locals.iter().map(|&l| state.class_set(l).iter().next().unwrap()).collect();
    let wit = actions[ai].1.clone();
    let mut of_seed = s_reps.clone();
    of_seed.extend(s_reps.iter().map(|&v| wit[v]));
    let o_f = state.named_orbit_input("moved_pair", of_seed, false)?;
    let o_s = state.named_orbit_input("block_reps", s_reps.clone(), false)?;
    let alpha_o = state.alpha_restriction_name(&[o_local])?;
    let o_pred = state.orbit_pred_name(o_local)?;

    // phi block: constrains (xs, ys, vs) through shared witnesses
    let phi_atoms = |prefix: &str,
                     xs: &[String],
                     ys: &[String],
                     vs: &[String],
                     exists: &mut Vec<String>,
                     atoms: &mut Vec<Atom>| {
        let wvars: Vec<String> = (0..m).map(|i| format!("{prefix}_w{i}")).collect();
        atoms.push(Atom { rel: o_u.clone(), args: wvars.clone() });
        exists.extend(wvars.iter().cloned());
        for x in xs.iter().chain(ys.iter().take(n_s)) {
            atoms.push(Atom { rel: o_pred.clone(), args: vec![x.clone()] });
        }
        let mut block = |anchor: &String, tag: String, exists: &mut Vec<String>, atoms: &mut Vec<Atom>| {
            let hub = format!("{tag}_hub");
            atoms.push(Atom { rel: r_name.clone(), args: vec![anchor.clone(), hub.clone()] });
            atoms.push(Atom { rel: c_name.clone(), args: vec![hub.clone()] });
            exists.push(hub.clone());
            for (jx, x) in xs.iter().enumerate() {
                let xv = format!("{tag}_x{jx}");
                atoms.push(Atom { rel: r_name.clone(), args: vec![xv.clone(), hub.clone()] });
                atoms.push(Atom { rel: alpha_o.clone(), args: vec![x.clone(), xv.clone()] });
                exists.push(xv);
            }
            for (jy, y) in ys.iter().take(ell).enumerate() {
                let yv = format!("{tag}_y{jy}");
                atoms.push(Atom { rel: r_name.clone(), args: vec![yv.clone(), hub.clone()] });
                atoms.push(Atom { rel: alpha_o.clone(), args: vec![y.clone(), yv.clone()] });
                exists.push(yv);
            }
        };
        for (i, w) in wvars.iter().enumerate() {
            block(w, format!("{prefix}_b{i}"), exists, atoms);
        }
        for (i, v) in vs.iter().enumerate() {
            block(v, format!("{prefix}_c{i}"), exists, atoms);
        }
    };

    let vs: Vec<String> = (0..k_t).map(|i| format!("v{i}")).collect();
    let vps: Vec<String> = (0..k_t).map(|i| format!("vp{i}")).collect();
    let xs: Vec<String> = (0..n_s).map(|i| format!("sx{i}")).collect();
    let ys: Vec<String> = (0..n_s).map(|i| format!("sy{i}")).collect();
    let zs: Vec<String> = (0..n_s).map(|i| format!("sz{i}")).collect();
    let mut atoms = Vec::new();
    let mut exists: Vec<String> = Vec::new();
    exists.extend(xs.iter().cloned());
    exists.extend(ys.iter().cloned());
    exists.extend(zs.iter().cloned());
    let mut of_args = xs.clone();
    of_args.extend(zs.iter().cloned());
    atoms.push(Atom { rel: o_f, args: of_args });
    atoms.push(Atom { rel: o_s, args: ys.clone() });
    phi_atoms("l", &xs, &ys, &vs, &mut exists, &mut atoms);
    phi_atoms("r", &ys, &zs, &vps, &mut exists, &mut atoms);
    let mut frees = vs.clone();
    frees.extend(vps.iter().cloned());
    state.dom_atoms(&frees, &mut atoms);
    let w_name = state.fresh_name("or_witness");
    state.define_formula(
        &w_name,
        PPFormula { free: frees, exists, atoms, params: Default::default() },
        Some(&or_rel),
    )?;
    state.trace_mut().push(TraceStep::OrBranch { arity: 2 * k_t });
    Ok(Marcin::OrTsr(TsrData { t, or_name: w_name }))
}

fn combinations(items: &[usize], size: usize) -> Vec<Vec<usize>> {
    if size > items.len() {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..size).collect();
    loop {
        out.push(idx.iter().map(|&i| items[i]).collect());
        // advance
        let mut p = size;
        loop {
            if p == 0 {
                return out;
            }
            p -= 1;
            if idx[p] + 1 <= items.len() - (size - p) {
                idx[p] += 1;
                for q in p + 1..size {
                    idx[q] = idx[q - 1] + 1;
                }
                break;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// central to OR: the boundary escape plus thinned side relations
// ---------------------------------------------------------------------------

pub(crate) fn step_central_to_or(state: &mut State, central: CentralData) -> Result<OrPair> {
    let CentralData { rel: r_rel, name: r_name } = central;
    if state.opts.assert_desk && !state.is_invariant(&r_rel) {
        return Err(Error::Defect("central relation is not invariant".into()));
    }
    let centre = centre_locals(state, &r_rel);
    let c_blow = blow(state, &centre);
    if c_blow.is_empty() || &c_blow == state.domain() {
        return Err(Error::Defect("centre is degenerate".into()));
    }
    if !state.is_orbit_union(&c_blow) {
        return Err(Error::Defect("centre is not orbit-stable".into()));
    }
    // adjacent orbit pair across the centre boundary
    let quotient_w = state.quotient_w();
    let n_orb = state.orbits().len();
    let inside: Vec<bool> = (0..n_orb).map(|o| state.orbit_set(o).is_subset(&c_blow)).collect();
    let mut pair = None;
    'outer: for a in 0..n_orb {
        for b in 0..n_orb {
            if quotient_w.has_edge(a, b) {
                if inside[a] && !inside[b] {
                    pair = Some((a, b));
                    break 'outer;
                }
                if !inside[a] && inside[b] {
                    pair = Some((b, a));
                    break 'outer;
                }
            }
        }
    }
    let (o_in, o_out) =
        pair.ok_or_else(|| Error::Defect("no boundary edge next to the centre".into()))?;

    let induced = state.induced();
    let orbit_sets: Vec<BitSet> = state.orbits().iter().map(|(_, s)| s.clone()).collect();
    let ctx = PathCtx { g: &induced, quotient: &quotient_w, orbit_sets: &orbit_sets };
    let c_orbit_ids = BitSet::from_iter(n_orb, (0..n_orb).filter(|&o| inside[o]));
    let escape = build_central_escape(&ctx, &c_orbit_ids, o_in, o_out)?;
    let merged = MergedPath::of(&escape.pi, &escape.pi_prime)?;
    let g_pair = ctx.gamma_merge(&merged);

    let mut oo_set = state.orbit_set(o_in).clone();
    oo_set.union_with(state.orbit_set(o_out));
    let alpha_oo = state.alpha_restricted(&oo_set);
    let s_l = r_rel.inverse().compose(&alpha_oo)?;
    let s_r = alpha_oo.compose(&g_pair)?.compose(&r_rel)?;
    if state.opts.assert_desk {
        if !state.is_stable(&s_l) || !state.is_stable(&s_r) {
            return Err(Error::Defect("side relations are not class-stable".into()));
        }
        for x in state.domain().iter() {
            for y in state.orbit_set(o_in).iter() {
                if !s_l.contains(x, y) {
                    return Err(Error::Defect("left side misses the inside orbit".into()));
                }
            }
            for y in state.orbit_set(o_out).iter() {
                if !s_r.contains(y, x) {
                    return Err(Error::Defect("right side misses the outside orbit".into()));
                }
            }
        }
    }
    let o_out_set = state.orbit_set(o_out).clone();
    let o_in_set = state.orbit_set(o_in).clone();
    let mut d_l = BitSet::new(state.g0.n());
    let mut d_r = BitSet::new(state.g0.n());
    for o in 0..n_orb {
        let os = state.orbit_set(o);
        if os.iter().all(|x| o_out_set.iter().all(|y| s_l.contains(x, y))) {
            d_l.union_with(os);
        }
        if os.iter().all(|y| o_in_set.iter().all(|x| s_r.contains(x, y))) {
            d_r.union_with(os);
        }
    }
    if !c_blow.is_subset(&d_l) || !c_blow.is_subset(&d_r) {
        return Err(Error::Defect("centre escaped the side sets".into()));
    }
    if &d_l == state.domain() || &d_r == state.domain() {
        return Err(Error::Defect("side sets are not proper".into()));
    }
    // thinned sides and their composition
    let b_classes = classes_in(state, &o_out_set);
    let a_classes = classes_in(state, &o_in_set);
    let mut s_final: Option<BinRel> = None;
    let mut sl_thin: BTreeMap<usize, BinRel> = BTreeMap::new();
    let mut sr_thin: BTreeMap<usize, BinRel> = BTreeMap::new();
    for &b in &b_classes {
        let mut bm = s_l.preimage(state.class_set(b));
        bm.intersect_with(state.domain());
        let slb = if bm == d_l {
            s_l.clone()
        } else {
            let mut z = state.domain().clone();
            for l in classes_in(state, &bm) {
                z.intersect_with(&s_l.image(state.class_set(l)));
            }
            s_l.restrict_right(&z)
        };
        sl_thin.insert(b, slb);
    }
    for &a in &a_classes {
        let mut am = s_r.image(state.class_set(a));
        am.intersect_with(state.domain());
        let sra = if am == d_r {
            s_r.clone()
        } else {
            let mut z = state.domain().clone();
            for l in classes_in(state, &am) {
                z.intersect_with(&s_r.preimage(state.class_set(l)));
            }
            s_r.restrict_left(&z)
        };
        sr_thin.insert(a, sra);
    }
    for &b in &b_classes {
        for &a in &a_classes {
            let comp = sl_thin[&b].compose(&sr_thin[&a])?;
            s_final = Some(match s_final {
                None => comp,
                Some(acc) => acc.intersect(&comp)?,
            });
        }
    }
    let s_final = s_final.ok_or_else(|| Error::Defect("no boundary classes".into()))?;
    let or2 = or_pairs_on(state.domain(), &d_l, &d_r);
    if s_final != or2 {
        return Err(Error::Defect("thinned composition is not the or-relation".into()));
    }

    // script
    let alpha_oo_name = state.alpha_restriction_name(&[o_out, o_in])?;
    let gp_name = {
        let len = merged.dirs.len();
        let var = |i: usize| format!("g{i}");
        let mut atoms = Vec::new();
        for (i, &(a, b)) in merged.pairs.iter().enumerate() {
            let u = state.orbit_union_name(&[a, b])?;
            atoms.push(Atom { rel: u, args: vec![var(i)] });
        }
        for (i, d) in merged.dirs.iter().enumerate() {
            let (x, y) = match d {
                crate::digraph::Dir::Fwd => (var(i), var(i + 1)),
                crate::digraph::Dir::Bwd => (var(i + 1), var(i)),
            };
            atoms.push(Atom { rel: "edge".into(), args: vec![x, y] });
        }
        let vars: Vec<String> = (0..=len).map(var).collect();
        state.dom_atoms(&vars, &mut atoms);
        let name = state.fresh_name("escape");
        state.define_formula(
            &name,
            PPFormula {
                free: vec![var(0), var(len)],
                exists: (1..len).map(var).collect(),
                atoms,
                params: Default::default(),
            },
            Some(&KaryRel::from_binrel(&g_pair)),
        )?
    };
    let sl_name = {
        let f = PPFormula::new(
            vec!["x", "y"],
            vec!["z"],
            vec![
                Atom { rel: r_name.clone(), args: vec!["z".into(), "x".into()] },
                Atom { rel: alpha_oo_name.clone(), args: vec!["z".into(), "y".into()] },
            ],
        );
        let name = state.fresh_name("side_l");
        state.define_formula(&name, f, Some(&KaryRel::from_binrel(&s_l)))?
    };
    let sr_name = {
        let f = PPFormula::new(
            vec!["x", "y"],
            vec!["z", "w"],
            vec![
                Atom { rel: alpha_oo_name.clone(), args: vec!["x".into(), "z".into()] },
                Atom { rel: gp_name.clone(), args: vec!["z".into(), "w".into()] },
                Atom { rel: r_name.clone(), args: vec!["w".into(), "y".into()] },
            ],
        );
        let name = state.fresh_name("side_r");
        state.define_formula(&name, f, Some(&KaryRel::from_binrel(&s_r)))?
    };
    let mut slb_names: BTreeMap<usize, String> = BTreeMap::new();
    let mut sra_names: BTreeMap<usize, String> = BTreeMap::new();
    for &b in &b_classes {
        let mut bm = s_l.preimage(state.class_set(b));
        bm.intersect_with(state.domain());
        let name = if bm == d_l {
            sl_name.clone()
        } else {
            let mut cls = classes_in(state, &bm);
            cls.push(b);
            let pr = state.ig_projection("pr_thin_l", &cls)?;
            let b_global = state.class_ids()[b];
            let b_pred = state.class_param_name(b_global)?;
            let mvars: Vec<String> = (0..cls.len()).map(|i| format!("w{i}")).collect();
            let mut atoms = vec![Atom { rel: pr, args: mvars.clone() }];
            atoms.push(Atom {
                rel: b_pred,
                args: vec![mvars.last().unwrap().clone()],
            });
            for v in mvars.iter().take(cls.len() - 1) {
                atoms.push(Atom { rel: sl_name.clone(), args: vec![v.clone(), "y".into()] });
            }
            atoms.push(Atom { rel: sl_name.clone(), args: vec!["x".into(), "y".into()] });
            let name = state.fresh_name("thin_l");
            state.define_formula(
                &name,
                PPFormula {
                    free: vec!["x".into(), "y".into()],
                    exists: mvars,
                    atoms,
                    params: Default::default(),
                },
                Some(&KaryRel::from_binrel(&sl_thin[&b])),
            )?
        };
        slb_names.insert(b, name);
    }
    for &a in &a_classes {
        let mut am = s_r.image(state.class_set(a));
        am.intersect_with(state.domain());
        let name = if am == d_r {
            sr_name.clone()
        } else {
            let mut cls = classes_in(state, &am);
            cls.push(a);
            let pr = state.ig_projection("pr_thin_r", &cls)?;
            let a_global = state.class_ids()[a];
            let a_pred = state.class_param_name(a_global)?;
            let mvars: Vec<String> = (0..cls.len()).map(|i| format!("w{i}")).collect();
            let mut atoms = vec![Atom { rel: pr, args: mvars.clone() }];
            atoms.push(Atom {
                rel: a_pred,
                args: vec![mvars.last().unwrap().clone()],
            });
            for v in mvars.iter().take(cls.len() - 1) {
                atoms.push(Atom { rel: sr_name.clone(), args: vec!["x".into(), v.clone()] });
            }
            atoms.push(Atom { rel: sr_name.clone(), args: vec!["x".into(), "y".into()] });
            let name = state.fresh_name("thin_r");
            state.define_formula(
                &name,
                PPFormula {
                    free: vec!["x".into(), "y".into()],
                    exists: mvars,
                    atoms,
                    params: Default::default(),
                },
                Some(&KaryRel::from_binrel(&sr_thin[&a])),
            )?
        };
        sra_names.insert(a, name);
    }
    let mut atoms = Vec::new();
    let mut exists = Vec::new();
    for (&b, bname) in &slb_names {
        for (&a, aname) in &sra_names {
            let mid = format!("m_{b}_{a}");
            atoms.push(Atom { rel: bname.clone(), args: vec!["x".into(), mid.clone()] });
            atoms.push(Atom { rel: aname.clone(), args: vec![mid.clone(), "y".into()] });
            exists.push(mid);
        }
    }
    let or_name = state.fresh_name("or_sides");
    state.define_formula(
        &or_name,
        PPFormula {
            free: vec!["x".into(), "y".into()],
            exists,
            atoms,
            params: Default::default(),
        },
        Some(&KaryRel::from_binrel(&or2)),
    )?;
    state.trace_mut().push(TraceStep::CentralToOr);
    Ok(OrPair { rel2: or2, name: or_name, d_l, d_r })
}

// ---------------------------------------------------------------------------
// the smooth-part scan producing the auxiliary domain, with its definition
// inlined so membership atoms stay individually removable
// ---------------------------------------------------------------------------

pub(crate) struct AuxDomain {
    pub set: BitSet,
    pub name: String,
    /// Definition of the domain with one free variable `x`; every atom whose
    /// relation is the source set is a removable restriction.
    pub psi: PPFormula,
    pub source_name: String,
}

pub(crate) fn build_aux_domain(state: &mut State, c_set: &BitSet, c_name: &str) -> Result<AuxDomain> {
    if c_set.is_empty() {
        return Err(Error::Defect("auxiliary domain from an empty set".into()));
    }
    // forward and backward image chains at class level, scanned for a
    // nonempty proper smooth part
    let induced = state.induced();
    let build_psi = |steps: usize, forward: bool, walk_len: usize| -> PPFormula {
        // membership: reachable from the source in `steps` steps
        let member = |target: &str, tag: &str, atoms: &mut Vec<Atom>, exists: &mut Vec<String>| {
            let mut prev = format!("{tag}_c");
            atoms.push(Atom { rel: c_name.to_string(), args: vec![prev.clone()] });
            exists.push(prev.clone());
            for s in 0..steps {
                let next =
                    if s + 1 == steps { target.to_string() } else { format!("{tag}_s{s}") };
                let (x, y) = if forward { (prev.clone(), next.clone()) } else { (next.clone(), prev.clone()) };
                atoms.push(Atom { rel: "edge".into(), args: vec![x, y] });
                if s + 1 != steps {
                    exists.push(next.clone());
                }
                prev = next;
            }
            if steps == 0 {
                // the member is the source vertex itself: identify by reuse
                // of the source atom on the target
                atoms.pop();
                exists.pop();
                atoms.push(Atom { rel: c_name.to_string(), args: vec![target.to_string()] });
            }
        };
        let mut atoms = Vec::new();
        let mut exists = Vec::new();
        member("x", "m", &mut atoms, &mut exists);
        let mut prev = "x".to_string();
        for t in 0..walk_len {
            let v = format!("fw{t}");
            atoms.push(Atom { rel: "edge".into(), args: vec![prev.clone(), v.clone()] });
            member(&v, &format!("mf{t}"), &mut atoms, &mut exists);
            exists.push(v.clone());
            prev = v;
        }
        let mut prev = "x".to_string();
        for t in 0..walk_len {
            let v = format!("bw{t}");
            atoms.push(Atom { rel: "edge".into(), args: vec![v.clone(), prev.clone()] });
            member(&v, &format!("mb{t}"), &mut atoms, &mut exists);
            exists.push(v.clone());
            prev = v;
        }
        let mut f = PPFormula { free: vec!["x".into()], exists, atoms, params: Default::default() };
        let vars: Vec<String> = f
            .free
            .iter()
            .cloned()
            .chain(f.exists.iter().cloned())
            .collect();
        state.dom_atoms(&vars, &mut f.atoms);
        f
    };
    for forward in [true, false] {
        let mut cur = c_set.clone();
        let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
        let mut steps = 0usize;
        loop {
            if !seen.insert(cur.to_vec()) {
                break;
            }
            let sp = crate::digraph::smooth_part(&induced, &cur);
            if !sp.is_empty() && &sp != state.domain() {
                let walk_len = classes_in(state, &cur).len();
                let psi = build_psi(steps, forward, walk_len);
                let name = state.fresh_name("aux_dom");
                state.define_formula(&name, psi.clone(), Some(&unary(&sp)))?;
                return Ok(AuxDomain {
                    set: sp,
                    name,
                    psi,
                    source_name: c_name.to_string(),
                });
            }
            cur = if forward {
                let mut img = induced.edge_rel().image(&cur);
                img.intersect_with(state.domain());
                img
            } else {
                let mut img = induced.edge_rel().inverse().image(&cur);
                img.intersect_with(state.domain());
                img
            };
            steps += 1;
        }
    }
    Err(Error::Defect("image scan found no proper smooth part".into()))
}

// ---------------------------------------------------------------------------
// shared conjunct-removal machinery
// ---------------------------------------------------------------------------

struct RemovalOutcome {
    /// Ternary definition: the last removed restriction's variable freed.
    s_name: String,
    s_rel: KaryRel,
    /// Relation on local classes defined just before the critical removal.
    before_mod: BinRel,
}

/// Builds the height-k fence over the auxiliary domain with the membership
/// definition inlined, then removes source-membership atoms one prefix at a
/// time until the stop predicate flips; the critical atom's variable is
/// freed.
fn conjunct_removal(
    state: &mut State,
    k: usize,
    aux: &AuxDomain,
    stop_flips: impl Fn(&BinRel) -> bool,
) -> Result<RemovalOutcome> {
    let j = state.quotient_alpha();
    let h_classes = classes_in(state, &aux.set);
    let j_h = {
        let hs = BitSet::from_iter(j.n(), h_classes.iter().copied());
        j.induced(&hs)
    };
    let reps = State::fence_stab_count(&j, k)?.max(State::fence_stab_count(&j_h, k)?);
    let len = 2 * k * reps;
    let var = |i: usize| format!("q{i}");
    let mut atoms: Vec<Atom> = Vec::new();
    let mut exists: Vec<String> = Vec::new();
    // removable: indices of source-membership atoms attached to existential
    // fence variables
    let mut removable: Vec<usize> = Vec::new();
    for i in 0..len {
        let fwd = (i % (2 * k)) < k;
        let (x, y) = if fwd { (var(i), var(i + 1)) } else { (var(i + 1), var(i)) };
        atoms.push(Atom { rel: "edge".into(), args: vec![x, y] });
    }
    for i in 0..=len {
        let v = var(i);
        let inner = rename_formula(&aux.psi, &format!("r{i}"), &v);
        let base = atoms.len();
        for (ai, a) in inner.atoms.iter().enumerate() {
            if i != 0 && i != len && a.rel == aux.source_name {
                removable.push(base + ai);
            }
        }
        atoms.extend(inner.atoms);
        exists.extend(inner.exists);
        if i != 0 && i != len {
            exists.push(v);
        }
    }
    let make = |drop_prefix: usize, free_extra: Option<usize>| -> PPFormula {
        let dropped: BTreeSet<usize> = removable.iter().take(drop_prefix).copied().collect();
        let kept: Vec<Atom> = atoms
            .iter()
            .enumerate()
            .filter(|(i, _)| !dropped.contains(i))
            .map(|(_, a)| a.clone())
            .collect();
        let mut free = vec![var(0), var(len)];
        let mut ex = exists.clone();
        if let Some(idx) = free_extra {
            let freed_var = atoms[removable[idx]].args[0].clone();
            ex.retain(|v| v != &freed_var);
            free.push(freed_var);
        }
        PPFormula { free, exists: ex, atoms: kept, params: Default::default() }
    };
    let eval_mod = |state: &State, t: usize| -> Result<BinRel> {
        let f = make(t, None);
        let rel = state.eval_here(&f)?;
        Ok(state.rel_mod_alpha(&rel.to_binrel()?))
    };
    let d0 = eval_mod(state, 0)?;
    if stop_flips(&d0) {
        return Err(Error::Defect("stop condition held before any removal".into()));
    }
    if !stop_flips(&eval_mod(state, removable.len())?) {
        return Err(Error::Defect("stop condition never flips".into()));
    }
    // monotone: binary search the smallest flip point
    let (mut lo, mut hi) = (0usize, removable.len());
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if stop_flips(&eval_mod(state, mid)?) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let before_mod = eval_mod(state, lo)?;
    // remove the prefix below the flip plus the critical atom, freeing its
    // variable
    let f = {
        let dropped: BTreeSet<usize> = removable.iter().take(hi).copied().collect();
        let mut f = make(lo, Some(hi - 1));
        f.atoms = atoms
            .iter()
            .enumerate()
            .filter(|(i, _)| !dropped.contains(i))
            .map(|(_, a)| a.clone())
            .collect();
        f
    };
    let s_name = state.fresh_name("pivot");
    let s_rel = state.eval_here(&f)?;
    state.define_formula(&s_name, f, Some(&s_rel.clone()))?;
    Ok(RemovalOutcome { s_name, s_rel, before_mod })
}

fn rename_formula(f: &PPFormula, prefix: &str, free_subst: &str) -> PPFormula {
    debug_assert_eq!(f.free.len(), 1);
    let map = |v: &String| -> String {
        if v == &f.free[0] {
            free_subst.to_string()
        } else {
            format!("{prefix}_{v}")
        }
    };
    PPFormula {
        free: vec![free_subst.to_string()],
        exists: f.exists.iter().map(|v| format!("{prefix}_{v}")).collect(),
        atoms: f
            .atoms
            .iter()
            .map(|a| Atom { rel: a.rel.clone(), args: a.args.iter().map(map).collect() })
            .collect(),
        params: Default::default(),
    }
}

/// Linkedness equivalence on the classes inside a set, in local class
/// indices, plus the fullness flag.
fn linkedness_on_classes(state: &State, set: &BitSet, k: usize) -> Result<(BinRel, bool)> {
    let j = state.quotient_alpha();
    let locals = classes_in(state, set);
    let jls = BitSet::from_iter(j.n(), locals.iter().copied());
    crate::digraph::linkedness_on(&j, &jls, k)
}

// ---------------------------------------------------------------------------
// OR over side sets to OR over a unary set
// ---------------------------------------------------------------------------

pub(crate) fn step_or_to_unary(state: &mut State, k: usize, or: OrPair) -> Result<OrOutcome> {
    // the left side is definable from the or-relation and the class-closed
    // representative orbit
    let orbit_outside_dr = state
        .orbits()
        .iter()
        .position(|(_, s)| !s.intersects(&or.d_r))
        .ok_or_else(|| Error::Defect("right side covers every orbit".into()))?;
    let first_class = classes_in(state, &state.orbit_set(orbit_outside_dr).clone())[0];
    let mut order = vec![first_class];
    order.extend((0..state.class_count()).filter(|&l| l != first_class));
    let ig = state.ig_projection("reps_left", &order)?;
    let dl_name = {
        let vars: Vec<String> = (0..order.len()).map(|i| format!("y{i}")).collect();
        let mut atoms = vec![Atom { rel: ig, args: vars.clone() }];
        atoms.push(Atom { rel: or.name.clone(), args: vec!["x".into(), vars[0].clone()] });
        let name = state.fresh_name("left_side");
        state.define_formula(
            &name,
            PPFormula { free: vec!["x".into()], exists: vars, atoms, params: Default::default() },
            Some(&unary(&or.d_l)),
        )?
    };
    let aux = build_aux_domain(state, &or.d_l, &dl_name)?;
    if !state.is_orbit_union(&aux.set) {
        return Err(Error::Defect("auxiliary domain is not orbit-stable".into()));
    }
    let (_, linked) = linkedness_on_classes(state, &aux.set, k)?;
    if linked {
        let kept_set = aux.set.clone();
        state.restrict_to(&kept_set, aux.name)?;
        let kept = state.class_count();
        state.trace_mut().push(TraceStep::OrToUnaryReduced { classes_kept: kept });
        return Ok(OrOutcome::Reduced);
    }
    let (beta, _) = linkedness_on_classes(state, &aux.set, k)?;
    let h_locals =
        BitSet::from_iter(state.class_count(), classes_in(state, &aux.set).into_iter());
    let beta_for_stop = beta.clone();
    let outcome =
        conjunct_removal(state, k, &aux, move |d| d.restrict(&h_locals) != beta_for_stop)?;
    if state.opts.assert_desk && outcome.before_mod != beta {
        return Err(Error::Defect("pre-critical relation deviates from the linkedness classes".into()));
    }
    // witnesses: a class pair outside the linkedness equivalence reachable
    // by the freed relation
    let s_bin = &outcome.s_rel;
    let mut witness = None;
    for t in s_bin.tuples() {
        let (a, b, c) = (t[0], t[1], t[2]);
        if !beta.contains(state.local_class_of(a), state.local_class_of(b)) {
            witness = Some((a, b, c));
            break;
        }
    }
    let (a, b, c) =
        witness.ok_or_else(|| Error::Defect("freed relation exposes no new class pair".into()))?;
    if or.d_l.contains(c) {
        return Err(Error::Defect("pivot witness landed inside the left side".into()));
    }
    let (la, lb) = (state.local_class_of(a), state.local_class_of(b));
    let mut order = vec![la, lb];
    order.extend((0..state.class_count()).filter(|&l| l != la && l != lb));
    let ig_ab = state.ig_projection("reps_pair", &order)?;
    let n_cls = state.class_count();
    let u = or.d_r.clone();
    let or_uu = or_pairs_on(state.domain(), &u, &u);
    let name = {
        let zs: Vec<String> = (0..n_cls - 2).map(|i| format!("z{i}")).collect();
        let mut args = vec!["y0".to_string(), "y2".to_string()];
        args.extend(zs.iter().cloned());
        let mut atoms = vec![Atom { rel: ig_ab, args }];
        atoms.push(Atom {
            rel: outcome.s_name.clone(),
            args: vec!["y0".into(), "y1".into(), "cap1".into()],
        });
        atoms.push(Atom { rel: or.name.clone(), args: vec!["cap1".into(), "x1".into()] });
        atoms.push(Atom {
            rel: outcome.s_name.clone(),
            args: vec!["y1".into(), "y2".into(), "cap2".into()],
        });
        atoms.push(Atom { rel: or.name.clone(), args: vec!["cap2".into(), "x2".into()] });
        let mut exists = vec![
            "y0".to_string(),
            "y1".to_string(),
            "y2".to_string(),
            "cap1".to_string(),
            "cap2".to_string(),
        ];
        exists.extend(zs);
        let name = state.fresh_name("or_unary");
        state.define_formula(
            &name,
            PPFormula {
                free: vec!["x1".into(), "x2".into()],
                exists,
                atoms,
                params: Default::default(),
            },
            Some(&KaryRel::from_binrel(&or_uu)),
        )?
    };
    state.trace_mut().push(TraceStep::OrToUnaryOr);
    Ok(OrOutcome::OrUnary(UnaryOr { u, name, rel2: or_uu }))
}

// ---------------------------------------------------------------------------
// symmetric witness to a proper equivalence (or a unary OR first)
// ---------------------------------------------------------------------------

/// A formula over one virtual relation symbol standing for the symmetric
/// witness, kept equality-free with its frees confined to witness atoms.
#[derive(Clone, Debug)]
struct OverT {
    free: Vec<String>,
    exists: Vec<String>,
    t_atoms: Vec<Vec<String>>,
    aux_atoms: Vec<Atom>,
}

impl OverT {
    fn identity(arity: usize) -> Self {
        let free: Vec<String> = (0..arity).map(|i| format!("t{i}")).collect();
        OverT { free: free.clone(), exists: vec![], t_atoms: vec![free], aux_atoms: vec![] }
    }

    fn atom_count(&self) -> usize {
        self.t_atoms.len()
    }

    fn instantiate(
        &self,
        args: &[String],
        prefix: &str,
        exists: &mut Vec<String>,
        t_atoms: &mut Vec<Vec<String>>,
        aux_atoms: &mut Vec<Atom>,
    ) {
        let map = |v: &String| -> String {
            match self.free.iter().position(|f| f == v) {
                Some(i) => args[i].clone(),
                None => format!("{prefix}_{v}"),
            }
        };
        exists.extend(self.exists.iter().map(|v| format!("{prefix}_{v}")));
        for t in &self.t_atoms {
            t_atoms.push(t.iter().map(map).collect());
        }
        for a in &self.aux_atoms {
            aux_atoms.push(Atom { rel: a.rel.clone(), args: a.args.iter().map(map).collect() });
        }
    }

    /// Replaces every witness atom by a named or-relation atom sharing the
    /// given block of fresh free variables.
    fn transport(&self, or_name: &str, block: &[String]) -> PPFormula {
        let mut free = self.free.clone();
        free.extend(block.iter().cloned());
        let mut atoms = self.aux_atoms.clone();
        for t in &self.t_atoms {
            let mut args = t.clone();
            args.extend(block.iter().cloned());
            atoms.push(Atom { rel: or_name.to_string(), args });
        }
        PPFormula { free, exists: self.exists.clone(), atoms, params: Default::default() }
    }
}

/// Totally symmetric, totally reflexive relations factored to classes:
/// membership is "has a repeat, or its class set is a full support".
#[derive(Clone, Debug, PartialEq, Eq)]
struct TsrSupports {
    arity: usize,
    n: usize,
    supports: BTreeSet<Vec<usize>>,
}

impl TsrSupports {
    fn contains_set(&self, sorted_distinct: &[usize]) -> bool {
        sorted_distinct.len() < self.arity || self.supports.contains(&sorted_distinct.to_vec())
    }

    fn is_full(&self) -> bool {
        let all: Vec<usize> = (0..self.n).collect();
        combinations(&all, self.arity).into_iter().all(|c| self.supports.contains(&c))
    }

    /// The widened relation: a tuple belongs when some shared witness class
    /// completes every sub-selection into the current relation.
    fn widen(&self, ell: usize) -> TsrSupports {
        let all: Vec<usize> = (0..self.n).collect();
        let mut supports = BTreeSet::new();
        for cand in combinations(&all, ell) {
            let ok = (0..self.n).any(|y| {
                combinations(&cand, self.arity - 1).into_iter().all(|sub| {
                    if sub.contains(&y) {
                        true
                    } else {
                        let mut s = sub.clone();
                        s.push(y);
                        s.sort_unstable();
                        self.contains_set(&s)
                    }
                })
            });
            if ok {
                supports.insert(cand);
            }
        }
        TsrSupports { arity: ell, n: self.n, supports }
    }
}

pub(crate) fn step_tsr_to_sigma(state: &mut State, tsr: TsrData) -> Result<TsrOutcome> {
    let TsrData { t, or_name } = tsr;
    let n0 = t.arity;
    if n0 == 1 {
        // the witness is already unary
        let u = t.to_unary_set()?;
        if !state.is_orbit_union(&u) {
            return Err(Error::Defect("unary witness is not orbit-stable".into()));
        }
        let or2 = {
            let mut out = BinRel::empty(state.g0.n());
            for x in state.domain().iter() {
                for y in state.domain().iter() {
                    if u.contains(x) || u.contains(y) {
                        out.insert(x, y);
                    }
                }
            }
            out
        };
        state.trace_mut().push(TraceStep::TsrToOr);
        return Ok(TsrOutcome::OrUnary(UnaryOr { u, name: or_name, rel2: or2 }));
    }
    // factor to classes
    if !crate::finitise::is_alpha_stable_kary(&t, &state.alpha0) {
        return Err(Error::Defect("witness relation is not class-stable".into()));
    }
    let n_cls = state.class_count();
    let mut supports = BTreeSet::new();
    for tup in t.tuples() {
        let mut cls: Vec<usize> = tup.iter().map(|&v| state.local_class_of(v)).collect();
        cls.sort_unstable();
        cls.dedup();
        if cls.len() == n0 {
            supports.insert(cls);
        }
    }
    let r0 = TsrSupports { arity: n0, n: n_cls, supports };
    // sanity: total reflexivity at class level
    if state.opts.assert_desk {
        for tup in t.tuples() {
            let mut cls: Vec<usize> = tup.iter().map(|&v| state.local_class_of(v)).collect();
            cls.sort_unstable();
            cls.dedup();
            if !r0.contains_set(&cls) {
                return Err(Error::Defect("support factoring lost a tuple".into()));
            }
        }
    }

    let blow_set = |locals: &BTreeSet<usize>| -> BitSet {
        blow(state, &locals.iter().copied().collect::<Vec<_>>())
    };

    // binary and not linked: transitive closure directly
    if n0 == 2 {
        let mut tc = BinRel::empty(n_cls);
        for s in &r0.supports {
            tc.insert(s[0], s[1]);
            tc.insert(s[1], s[0]);
        }
        for i in 0..n_cls {
            tc.insert(i, i);
        }
        loop {
            let next = tc.union(&tc.compose(&tc)?)?;
            if next == tc {
                break;
            }
            tc = next;
        }
        if !tc.is_full() {
            // sigma is the closure; transport it through the or-relation
            let m = n_cls;
            let chain = |vars: (String, String), tag: &str| -> OverT {
                let mut exists = Vec::new();
                let mut t_atoms = Vec::new();
                let mut prev = vars.0.clone();
                for i in 0..m {
                    let next = if i + 1 == m { vars.1.clone() } else { format!("{tag}_c{i}") };
                    t_atoms.push(vec![prev.clone(), next.clone()]);
                    if i + 1 != m {
                        exists.push(next.clone());
                    }
                    prev = next;
                }
                OverT { free: vec![vars.0, vars.1], exists, t_atoms, aux_atoms: vec![] }
            };
            let sigma_def = chain(("s0".into(), "s1".into()), "tc");
            let blocks = equivalence_blocks(&tc, n_cls);
            return finish_sigma(state, &or_name, n0, sigma_def, blocks, None);
        }
    }
    // widen until self-reproducing or everything full
    let mut cur = r0;
    let mut cur_def = OverT::identity(n0);
    loop {
        if cur.arity > n_cls {
            return Err(Error::Defect("witness arity exceeded the class count".into()));
        }
        let self_widened = cur.widen(cur.arity);
        if self_widened == cur {
            // second stop: universal sections define the equivalence
            if cur.arity <= 2 {
                return Err(Error::Defect("binary self-reproducing witness must be linked".into()));
            }
            let sigma = pq_equivalence(&cur)?;
            let blocks = equivalence_blocks(&sigma, n_cls);
            if sigma.is_full() {
                return Err(Error::Defect("central equivalence is full".into()));
            }
            let sigma_def = centre_style_def(state, &cur_def, cur.arity, 2)?;
            return finish_sigma(state, &or_name, n0, sigma_def, blocks, Some(cur.arity));
        }
        let mut next = None;
        for ell in cur.arity..=n_cls {
            let w = cur.widen(ell);
            if !w.is_full() {
                next = Some((ell, w));
                break;
            }
        }
        match next {
            None => {
                // first stop: the relation is centred
                let centre: Vec<usize> = (0..n_cls)
                    .filter(|&y| {
                        let all: Vec<usize> = (0..n_cls).collect();
                        combinations(&all, cur.arity - 1).into_iter().all(|sub| {
                            if sub.contains(&y) {
                                true
                            } else {
                                let mut s = sub.clone();
                                s.push(y);
                                s.sort_unstable();
                                cur.contains_set(&s)
                            }
                        })
                    })
                    .collect();
                if centre.is_empty() || centre.len() == n_cls {
                    return Err(Error::Defect("centred witness has a degenerate centre".into()));
                }
                let centre_set: BTreeSet<usize> = centre.iter().copied().collect();
                let u = blow_set(&centre_set);
                if !state.is_orbit_union(&u) {
                    return Err(Error::Defect("centre is not orbit-stable".into()));
                }
                let c_def = centre_style_def(state, &cur_def, cur.arity, 1)?;
                // two transports: OR(C, T) then OR(C, C)
                let block1: Vec<String> = (0..n0).map(|i| format!("blk{i}")).collect();
                let or_c_t = {
                    let mut f = c_def.transport(&or_name, &block1);
                    let frees = f.free.clone();
                    state.dom_atoms(&frees, &mut f.atoms);
                    let name = state.fresh_name("or_centre_t");
                    let expected = or_mixed(state, &u, &t)?;
                    state.define_formula(&name, f, Some(&expected))?
                };
                let or_t_c = {
                    // permuted reference: witness block first, then the point
                    let vars: Vec<String> =
                        (0..=n0).map(|i| format!("p{i}")).collect();
                    let mut args = vec![vars[n0].clone()];
                    args.extend(vars[..n0].iter().cloned());
                    let f = PPFormula {
                        free: vars.clone(),
                        exists: vec![],
                        atoms: vec![Atom { rel: or_c_t.clone(), args }],
                        params: Default::default(),
                    };
                    let name = state.fresh_name("or_t_centre");
                    state.define_formula(&name, f, None)?
                };
                let or_uu_rel = or_pairs_on(state.domain(), &u, &u);
                let final_name = {
                    let block: Vec<String> = vec!["yy".into()];
                    let mut f = c_def.transport(&or_t_c, &block);
                    let frees = f.free.clone();
                    state.dom_atoms(&frees, &mut f.atoms);
                    let name = state.fresh_name("or_unary");
                    state.define_formula(&name, f, Some(&KaryRel::from_binrel(&or_uu_rel)))?
                };
                state.trace_mut().push(TraceStep::TsrToOr);
                return Ok(TsrOutcome::OrUnary(UnaryOr { u, name: final_name, rel2: or_uu_rel }));
            }
            Some((ell, w)) => {
                // compose the widening pattern over the current definition
                let frees: Vec<String> = (0..ell).map(|i| format!("t{i}")).collect();
                let mut exists = vec!["wit".to_string()];
                let mut t_atoms = Vec::new();
                let mut aux_atoms = Vec::new();
                for (ci, sub) in combinations(&(0..ell).collect::<Vec<_>>(), cur.arity - 1)
                    .into_iter()
                    .enumerate()
                {
                    let mut args = vec!["wit".to_string()];
                    args.extend(sub.iter().map(|&i| frees[i].clone()));
                    cur_def.instantiate(
                        &args,
                        &format!("wd{ci}"),
                        &mut exists,
                        &mut t_atoms,
                        &mut aux_atoms,
                    );
                }
                if t_atoms.len() > 50_000 {
                    return Err(Error::Guard("widening definition exceeded the size cap".into()));
                }
                cur_def = OverT { free: frees, exists, t_atoms, aux_atoms };
                cur = w;
            }
        }
    }
}

/// The universal-section equivalence of a self-reproducing witness.
fn pq_equivalence(cur: &TsrSupports) -> Result<BinRel> {
    let n = cur.n;
    let mut sigma = BinRel::empty(n);
    let all: Vec<usize> = (0..n).collect();
    for a in 0..n {
        sigma.insert(a, a);
        for b in 0..n {
            if a == b {
                continue;
            }
            let ok = combinations(&all, cur.arity - 2).into_iter().all(|sub| {
                let mut s = vec![a, b];
                s.extend(sub);
                s.sort_unstable();
                s.dedup();
                cur.contains_set(&s)
            });
            if ok {
                sigma.insert(a, b);
            }
        }
    }
    if !sigma.is_symmetric() || !sigma.is_transitive() {
        return Err(Error::Defect("universal sections fail to be an equivalence".into()));
    }
    Ok(sigma)
}

/// Blocks of a partial equivalence: elements lacking the diagonal pair are
/// outside its carrier and yield no block.
fn equivalence_blocks(sigma: &BinRel, n: usize) -> Vec<Vec<usize>> {
    let mut seen = vec![false; n];
    let mut blocks = Vec::new();
    for a in 0..n {
        if seen[a] || !sigma.contains(a, a) {
            continue;
        }
        let mut block = Vec::new();
        for b in 0..n {
            if sigma.contains(a, b) {
                block.push(b);
                seen[b] = true;
            }
        }
        blocks.push(block);
    }
    blocks
}

/// The displayed section definition: one representative tuple of every
/// class, conjoined with all sorted selections filling the remaining
/// coordinates of the current witness definition.
fn centre_style_def(
    state: &mut State,
    cur_def: &OverT,
    arity: usize,
    free_count: usize,
) -> Result<OverT> {
    let n_cls = state.class_count();
    let ig = state.ig_projection("reps_all", &(0..n_cls).collect::<Vec<_>>())?;
    let frees: Vec<String> = (0..free_count).map(|i| format!("s{i}")).collect();
    let yvars: Vec<String> = (0..n_cls).map(|i| format!("rep{i}")).collect();
    let mut exists = yvars.clone();
    let mut t_atoms = Vec::new();
    let mut aux_atoms = vec![Atom { rel: ig, args: yvars.clone() }];
    let picks = multisets(n_cls, arity - free_count);
    for (ci, pick) in picks.into_iter().enumerate() {
        let mut args = frees.clone();
        args.extend(pick.iter().map(|&i| yvars[i].clone()));
        cur_def.instantiate(&args, &format!("ct{ci}"), &mut exists, &mut t_atoms, &mut aux_atoms);
    }
    if t_atoms.len() > 50_000 {
        return Err(Error::Guard("section definition exceeded the size cap".into()));
    }
    Ok(OverT { free: frees, exists, t_atoms, aux_atoms })
}

fn multisets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; k];
    if k == 0 {
        return vec![vec![]];
    }
    'outer: loop {
        out.push(cur.clone());
        let mut i = k;
        loop {
            if i == 0 {
                break 'outer;
            }
            i -= 1;
            if cur[i] + 1 < n {
                cur[i] += 1;
                for j in i + 1..k {
                    cur[j] = cur[i];
                }
                continue 'outer;
            }
        }
    }
    out
}

/// {(s, t) : s in left or t in right} over the current domain, with mixed
/// arities: left unary, right the witness arity.
fn or_mixed(state: &State, left: &BitSet, t: &KaryRel) -> Result<KaryRel> {
    let dom = state.domain().to_vec();
    let k = t.arity;
    if dom.len().pow(k as u32).saturating_mul(dom.len()) > crate::ppengine::OR_CAP {
        return Err(Error::Guard("mixed or-relation exceeds the cap".into()));
    }
    let mut all_k = vec![vec![]];
    for _ in 0..k {
        all_k = all_k
            .into_iter()
            .flat_map(|p: Vec<usize>| {
                dom.iter().map(move |&x| {
                    let mut q = p.clone();
                    q.push(x);
                    q
                })
            })
            .collect();
    }
    let mut tuples = Vec::new();
    for &x in &dom {
        if left.contains(x) {
            for rt in &all_k {
                let mut row = vec![x];
                row.extend_from_slice(rt);
                tuples.push(row);
            }
        }
    }
    for rt in t.tuples() {
        for &x in &dom {
            let mut row = vec![x];
            row.extend_from_slice(rt);
            tuples.push(row);
        }
    }
    KaryRel::new(1 + k, state.g0.n(), tuples)
}

/// Transports an equivalence definition through the or-relation twice and
/// closes out the certificate data.
fn finish_sigma(
    state: &mut State,
    or_name: &str,
    t_arity: usize,
    sigma_def: OverT,
    blocks_local: Vec<Vec<usize>>,
    _from_arity: Option<usize>,
) -> Result<TsrOutcome> {
    let sigma_blow = {
        let mut rel = BinRel::empty(state.g0.n());
        for block in &blocks_local {
            let set = blow(state, block);
            for a in set.iter() {
                for b in set.iter() {
                    rel.insert(a, b);
                }
            }
        }
        rel
    };
    let block1: Vec<String> = (0..t_arity).map(|i| format!("blk{i}")).collect();
    let or_s_t = {
        let mut f = sigma_def.transport(or_name, &block1);
        let frees = f.free.clone();
        state.dom_atoms(&frees, &mut f.atoms);
        let name = state.fresh_name("or_sigma_t");
        state.define_formula(&name, f, None)?
    };
    let or_t_s = {
        let vars: Vec<String> = (0..t_arity + 2).map(|i| format!("p{i}")).collect();
        let mut args = vec![vars[t_arity].clone(), vars[t_arity + 1].clone()];
        args.extend(vars[..t_arity].iter().cloned());
        let f = PPFormula {
            free: vars.clone(),
            exists: vec![],
            atoms: vec![Atom { rel: or_s_t, args }],
            params: Default::default(),
        };
        let name = state.fresh_name("or_t_sigma");
        state.define_formula(&name, f, None)?
    };
    let expected = {
        let dom = state.domain().to_vec();
        let mut tuples = Vec::new();
        for &a in &dom {
            for &b in &dom {
                for &c in &dom {
                    for &d in &dom {
                        if sigma_blow.contains(a, b) || sigma_blow.contains(c, d) {
                            tuples.push(vec![a, b, c, d]);
                        }
                    }
                }
            }
        }
        KaryRel::new(4, state.g0.n(), tuples)?
    };
    let final_name = {
        let block: Vec<String> = vec!["fy1".into(), "fy2".into()];
        let mut f = sigma_def.transport(&or_t_s, &block);
        let frees = f.free.clone();
        state.dom_atoms(&frees, &mut f.atoms);
        let name = state.fresh_name("or_sigma_sigma");
        state.define_formula(&name, f, Some(&expected))?
    };
    let blocks: Vec<Vec<usize>> = blocks_local
        .iter()
        .map(|b| b.iter().map(|&l| state.class_ids()[l]).collect())
        .collect();
    state.trace_mut().push(TraceStep::TsrToSigma);
    Ok(TsrOutcome::Sigma(SigmaResult { blocks, output: final_name }))
}

// ---------------------------------------------------------------------------
// unary OR to the final equivalence
// ---------------------------------------------------------------------------

pub(crate) fn step_unary_to_sigma(state: &mut State, k: usize, or: UnaryOr) -> Result<SigmaOutcome> {
    let UnaryOr { u, name: or_name, rel2 } = or;
    if u.is_empty() {
        return Err(Error::Defect("unary witness is empty".into()));
    }
    if !state.is_orbit_union(&u) {
        return Err(Error::Defect("unary witness is not orbit-stable".into()));
    }
    let u_name = {
        let f = PPFormula::new(
            vec!["x"],
            vec![],
            vec![Atom { rel: or_name.clone(), args: vec!["x".into(), "x".into()] }],
        );
        let name = state.fresh_name("unary_side");
        state.define_formula(&name, f, Some(&unary(&u)))?
    };
    let _ = rel2;
    let aux = build_aux_domain(state, &u, &u_name)?;
    if !state.is_orbit_union(&aux.set) {
        return Err(Error::Defect("auxiliary domain is not orbit-stable".into()));
    }
    let (beta, linked) = linkedness_on_classes(state, &aux.set, k)?;
    if linked {
        let kept_set = aux.set.clone();
        state.restrict_to(&kept_set, aux.name)?;
        let kept = state.class_count();
        state.trace_mut().push(TraceStep::UnaryReduced { classes_kept: kept });
        return Ok(SigmaOutcome::Reduced);
    }
    let _ = beta;
    let h_locals: Vec<usize> = classes_in(state, &aux.set);
    let h_local_set = BitSet::from_iter(state.class_count(), h_locals.iter().copied());
    let gen_equiv = |d: &BinRel| -> BinRel {
        // generated equivalence on the classes inside the auxiliary domain
        let mut rel = d.restrict(&h_local_set);
        rel = rel.union(&rel.inverse()).expect("same domain");
        for l in h_local_set.iter() {
            rel.insert(l, l);
        }
        loop {
            let next = rel.union(&rel.compose(&rel).expect("same domain")).expect("same domain");
            if next == rel {
                return rel;
            }
            rel = next;
        }
    };
    let full_on_h = |rel: &BinRel| -> bool {
        let m = h_local_set.count();
        rel.count() == m * m
    };
    let outcome = conjunct_removal(state, k, &aux, |d| full_on_h(&gen_equiv(d)))?;
    let sigma_local = gen_equiv(&outcome.before_mod);
    if full_on_h(&sigma_local) {
        return Err(Error::Defect("pre-critical equivalence is already full".into()));
    }
    // pick the carrier: one orbit whose classes split, or an adjacent pair
    // with whole-orbit blocks apart
    let blocks = equivalence_blocks(&sigma_local, state.class_count());
    let blocks: Vec<Vec<usize>> =
        blocks.into_iter().filter(|b| h_local_set.contains(b[0])).collect();
    let block_of = |l: usize| blocks.iter().position(|b| b.contains(&l));
    let mut p_locals: Option<Vec<usize>> = None;
    for o in 0..state.orbits().len() {
        if !state.orbit_set(o).is_subset(&aux.set) {
            continue;
        }
        let cls = classes_in(state, &state.orbit_set(o).clone());
        let mut seen_blocks: BTreeSet<usize> = BTreeSet::new();
        for &l in &cls {
            if let Some(b) = block_of(l) {
                seen_blocks.insert(b);
            }
        }
        if seen_blocks.len() >= 2 {
            p_locals = Some(vec![o]);
            break;
        }
    }
    if p_locals.is_none() {
        let qw = state.quotient_w();
        'outer: for a in 0..state.orbits().len() {
            for b in 0..state.orbits().len() {
                if !qw.has_edge(a, b) {
                    continue;
                }
                if !state.orbit_set(a).is_subset(&aux.set)
                    || !state.orbit_set(b).is_subset(&aux.set)
                {
                    continue;
                }
                let ca = classes_in(state, &state.orbit_set(a).clone());
                let cb = classes_in(state, &state.orbit_set(b).clone());
                if block_of(ca[0]) != block_of(cb[0]) {
                    p_locals = Some(vec![a, b]);
                    break 'outer;
                }
            }
        }
    }
    let p_locals =
        p_locals.ok_or_else(|| Error::Defect("no carrier orbit pair splits the equivalence".into()))?;
    let alphap = state.alpha_restriction_name(&p_locals)?;
    let mut p_set = BitSet::new(state.g0.n());
    for &o in &p_locals {
        p_set.union_with(state.orbit_set(o));
    }
    let p_classes: Vec<usize> = classes_in(state, &p_set);
    let sigma_blocks_p: Vec<Vec<usize>> = blocks
        .iter()
        .map(|b| b.iter().copied().filter(|l| p_classes.contains(l)).collect::<Vec<_>>())
        .filter(|b: &Vec<usize>| !b.is_empty())
        .collect();
    if sigma_blocks_p.len() < 2 {
        return Err(Error::Defect("carrier does not split into two blocks".into()));
    }
    // the doubled zigzag definition
    let m = h_locals.len();
    let nn = 2 * m;
    let zigzag = |yv: &str, zv: &str, xs: &[String], tag: &str, atoms: &mut Vec<Atom>, exists: &mut Vec<String>| {
        let mut prev = yv.to_string();
        for t in 0..m {
            let a_next = if t + 1 == m { zv.to_string() } else { format!("{tag}_a{t}") };
            let mid = format!("{tag}_m{t}");
            atoms.push(Atom {
                rel: outcome.s_name.clone(),
                args: vec![prev.clone(), mid.clone(), xs[2 * t].clone()],
            });
            atoms.push(Atom {
                rel: outcome.s_name.clone(),
                args: vec![a_next.clone(), mid.clone(), xs[2 * t + 1].clone()],
            });
            exists.push(mid);
            if t + 1 != m {
                exists.push(a_next.clone());
            }
            prev = a_next;
        }
    };
    let xs: Vec<String> = (0..nn).map(|i| format!("ux{i}")).collect();
    let yy: Vec<String> = (0..nn).map(|i| format!("uy{i}")).collect();
    let mut atoms = Vec::new();
    let mut exists: Vec<String> = Vec::new();
    exists.extend(xs.iter().cloned());
    exists.extend(yy.iter().cloned());
    for x in &xs {
        for y in &yy {
            atoms.push(Atom { rel: or_name.clone(), args: vec![x.clone(), y.clone()] });
        }
    }
    for (pv, fv) in [("up", "u"), ("vp", "v"), ("yp", "y"), ("zp", "z")] {
        atoms.push(Atom { rel: alphap.clone(), args: vec![pv.into(), fv.into()] });
        exists.push(pv.to_string());
    }
    zigzag("up", "vp", &xs, "zl", &mut atoms, &mut exists);
    zigzag("yp", "zp", &yy, "zr", &mut atoms, &mut exists);
    let expected = {
        let mut sig = BinRel::empty(state.g0.n());
        for b in &sigma_blocks_p {
            let set = blow(state, b);
            for x in set.iter() {
                for y in set.iter() {
                    sig.insert(x, y);
                }
            }
        }
        let p_elems = p_set.to_vec();
        let mut tuples = Vec::new();
        for &a in &p_elems {
            for &b in &p_elems {
                for &c in &p_elems {
                    for &d in &p_elems {
                        if sig.contains(a, b) || sig.contains(c, d) {
                            tuples.push(vec![a, b, c, d]);
                        }
                    }
                }
            }
        }
        KaryRel::new(4, state.g0.n(), tuples)?
    };
    let final_name = {
        let f = PPFormula {
            free: vec!["u".into(), "v".into(), "y".into(), "z".into()],
            exists,
            atoms,
            params: Default::default(),
        };
        let name = state.fresh_name("or_sigma_carrier");
        state.define_formula(&name, f, Some(&expected))?
    };
    let blocks_global: Vec<Vec<usize>> = sigma_blocks_p
        .iter()
        .map(|b| b.iter().map(|&l| state.class_ids()[l]).collect())
        .collect();
    state.trace_mut().push(TraceStep::UnarySigma);
    Ok(SigmaOutcome::Sigma(SigmaResult { blocks: blocks_global, output: final_name }))
}
