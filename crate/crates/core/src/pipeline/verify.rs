//! Independent certificate audit: primitives are licensed and interpreted
//! from scratch, the script is replayed, and the output is compared to the
//! blow-up computed from the claimed equivalence.

use crate::bitset::BitSet;
use crate::digraph::{Digraph, KaryRel};
use crate::error::{Error, Result};
use crate::finitise::{compute_alpha, FinitisingEquivalence};
use crate::perm::{Perm, PermGroup};
use crate::ppengine::{alpha_closure_of_tuples, or_relation, PrimitiveDef};

use super::Certificate;

/// Structured verification result: `ok` with the reasons for any rejection.
#[derive(Clone, Debug, Default)]
pub struct VerifyOutcome {
    pub ok: bool,
    pub reasons: Vec<String>,
}

impl VerifyOutcome {
    fn fail(reason: impl Into<String>) -> Self {
        VerifyOutcome { ok: false, reasons: vec![reason.into()] }
    }
}

/// Interprets a licensed primitive over the instance.
pub(crate) fn pipeline_interpret_primitive(
    g: &Digraph,
    gens: &[Perm],
    alpha: &FinitisingEquivalence,
    orbit_sets: &[BitSet],
    quotient_w: &Digraph,
    p: &PrimitiveDef,
) -> Result<KaryRel> {
    match p {
        PrimitiveDef::Edge => Ok(KaryRel::from_binrel(g.edge_rel())),
        PrimitiveDef::OrbitUnion(ids) => {
            if ids.is_empty() || ids.len() > 2 {
                return Err(Error::Guard("orbit unions limited to two orbits".into()));
            }
            let mut s = BitSet::new(g.n());
            for &i in ids {
                let set = orbit_sets
                    .get(i)
                    .ok_or_else(|| Error::BadParameter(format!("orbit {i} out of range")))?;
                s.union_with(set);
            }
            Ok(KaryRel::from_unary_set(&s))
        }
        PrimitiveDef::AlphaRestriction(ids) => {
            if ids.is_empty() || ids.len() > 2 {
                return Err(Error::Guard("restrictions limited to orbit pairs".into()));
            }
            if ids.len() == 2
                && !quotient_w.has_edge(ids[0], ids[1])
                && !quotient_w.has_edge(ids[1], ids[0])
            {
                return Err(Error::Guard("restriction requires adjacent orbits".into()));
            }
            let mut s = BitSet::new(g.n());
            for &i in ids {
                let set = orbit_sets
                    .get(i)
                    .ok_or_else(|| Error::BadParameter(format!("orbit {i} out of range")))?;
                s.union_with(set);
            }
            Ok(KaryRel::from_binrel(&alpha.restricted_to(&s)))
        }
        PrimitiveDef::ClassParam(c) => {
            let set = alpha
                .classes()
                .get(*c)
                .ok_or_else(|| Error::BadParameter(format!("class {c} out of range")))?;
            Ok(KaryRel::from_unary_set(set))
        }
        PrimitiveDef::NamedInput { orbit_of, class_closed } => {
            if orbit_of.iter().any(|&v| v >= g.n()) {
                return Err(Error::BadParameter("seed tuple out of range".into()));
            }
            let gp = PermGroup::new(g.n(), gens.to_vec())?;
            let orbit = gp.tuple_orbit(orbit_of);
            if *class_closed {
                alpha_closure_of_tuples(&orbit, alpha, g.n())
            } else {
                KaryRel::new(orbit_of.len(), g.n(), orbit)
            }
        }
    }
}

/// Audits a certificate from scratch. Never trusts the construction: the
/// refinement, orbits, primitives and the final blow-up are all recomputed.
pub fn verify_certificate(g: &Digraph, gp: &PermGroup, cert: &Certificate) -> Result<VerifyOutcome> {
    match cert {
        Certificate::Pseudoloop { orbit, edge } => {
            if !g.has_edge(edge.0, edge.1) {
                return Ok(VerifyOutcome::fail(format!("claimed edge {edge:?} is absent")));
            }
            let part = crate::perm::orbits(gp, 1)?;
            if part.class_of_vertex(edge.0) != part.class_of_vertex(edge.1) {
                return Ok(VerifyOutcome::fail("edge endpoints lie in different orbits"));
            }
            if part.class_of_vertex(edge.0) != *orbit {
                return Ok(VerifyOutcome::fail("claimed orbit does not match the edge"));
            }
            Ok(VerifyOutcome { ok: true, reasons: vec![] })
        }
        Certificate::Hardness { alpha_classes, sigma, script, .. } => {
            let alpha = compute_alpha(g, gp)?;
            let recomputed: Vec<Vec<usize>> = alpha.classes().iter().map(|c| c.to_vec()).collect();
            if &recomputed != alpha_classes {
                return Ok(VerifyOutcome::fail("class list does not match the instance"));
            }
            // sigma: disjoint blocks of valid class ids, at least two blocks
            if sigma.len() < 2 {
                return Ok(VerifyOutcome::fail("sigma-not-proper-or-mismatch: fewer than two blocks"));
            }
            let mut seen = std::collections::HashSet::new();
            for block in sigma {
                if block.is_empty() {
                    return Ok(VerifyOutcome::fail("sigma-not-proper-or-mismatch: empty block"));
                }
                for &c in block {
                    if c >= alpha.len() || !seen.insert(c) {
                        return Ok(VerifyOutcome::fail(
                            "sigma-not-proper-or-mismatch: block contents invalid",
                        ));
                    }
                }
            }
            let view = crate::finitise::instance_view(g, gp)?;
            let mut interp = |p: &PrimitiveDef| {
                pipeline_interpret_primitive(
                    g,
                    gp.generators(),
                    &alpha,
                    &view.orbit_sets,
                    &view.quotient_w,
                    p,
                )
            };
            let replayed = match script.replay(g.n(), &mut interp) {
                Ok(s) => s,
                Err(e) => return Ok(VerifyOutcome::fail(format!("script replay failed: {e}"))),
            };
            let output = match replayed.get(&script.output) {
                Ok(r) => r.clone(),
                Err(e) => return Ok(VerifyOutcome::fail(format!("missing output: {e}"))),
            };
            // expected: blow-up of the OR-relation over sigma on its carrier
            let carrier: Vec<usize> = sigma.iter().flatten().copied().collect();
            let m = alpha.len();
            let mut sig_rel_tuples = Vec::new();
            for block in sigma {
                for &a in block {
                    for &b in block {
                        sig_rel_tuples.push(vec![a, b]);
                    }
                }
            }
            let sig_rel = KaryRel::new(2, m, sig_rel_tuples)?;
            let or4 = or_relation(&sig_rel, &sig_rel)?;
            let carrier_set: std::collections::HashSet<usize> = carrier.into_iter().collect();
            let confined: Vec<Vec<usize>> = or4
                .tuples()
                .iter()
                .filter(|t| t.iter().all(|c| carrier_set.contains(c)))
                .cloned()
                .collect();
            let or4 = KaryRel::new(4, m, confined)?;
            let expected = crate::finitise::blow_up_kary(&or4, &alpha)?;
            if output != expected {
                return Ok(VerifyOutcome::fail(format!(
                    "output relation mismatch: {} tuples vs expected {}",
                    output.len(),
                    expected.len()
                )));
            }
            Ok(VerifyOutcome { ok: true, reasons: vec![] })
        }
    }
}
