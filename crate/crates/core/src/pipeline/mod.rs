//! The master induction: repeatedly shrink the instance along class-stable
//! reductionistic subsets until an in-orbit edge is found or the class
//! blow-up of an OR-relation over a proper equivalence is defined and
//! verified.

mod state;
mod steps;
mod verify;

pub use state::{PipelineOptions, State};
pub use verify::{verify_certificate, VerifyOutcome};
pub(crate) use verify::pipeline_interpret_primitive;

use crate::digraph::Digraph;
use crate::error::{Error, Result};
use crate::finitise::compute_alpha;
use crate::perm::PermGroup;
use crate::ppengine::PPScript;
use serde::{Deserialize, Serialize};

/// One applied step of the master induction, for auditability.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraceStep {
    RestrictToComponent { classes_kept: usize },
    FullCase { k: usize, classes_kept: usize },
    CentralBranch,
    OrBranch { arity: usize },
    CentralToOr,
    OrToUnaryReduced { classes_kept: usize },
    OrToUnaryOr,
    TsrToOr,
    TsrToSigma,
    UnaryReduced { classes_kept: usize },
    UnarySigma,
}

/// The pipeline's verdict, with everything needed for independent checking.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Certificate {
    /// An edge of the instance inside a single vertex orbit.
    Pseudoloop { orbit: usize, edge: (usize, usize) },
    /// A definition script whose output evaluates to the class blow-up of
    /// the OR-relation over a proper equivalence on part of the quotient.
    Hardness {
        /// The weak component the pipeline restricted to first.
        component: Vec<usize>,
        /// The classes of the finitising refinement of the full instance.
        alpha_classes: Vec<Vec<usize>>,
        /// Blocks of class indices; at least two blocks.
        sigma: Vec<Vec<usize>>,
        script: PPScript,
        trace: Vec<TraceStep>,
    },
}

/// Decides the dichotomy for one instance. Rejects non-smooth inputs and
/// inputs without a closed walk of algebraic length one.
pub fn run_master(g: &Digraph, gp: &PermGroup, opts: &PipelineOptions) -> Result<Certificate> {
    gp.check_automorphisms(g)?;
    if let Some(v) = g.smoothness_witness() {
        return Err(Error::Precondition(format!("not smooth: vertex {v} lacks an edge")));
    }
    let unit = crate::digraph::find_unit_walk(g).ok_or_else(|| {
        Error::Precondition("no closed walk of algebraic length one".to_string())
    })?;
    let view = crate::finitise::instance_view(g, gp)?;
    if let Some((u, v)) = view.loop_witness {
        let orbit = view.orbit_part.class_of_vertex(u);
        return Ok(Certificate::Pseudoloop { orbit, edge: (u, v) });
    }
    let alpha = compute_alpha(g, gp)?;
    let mut state = State::new(g, gp, alpha, &view, opts)?;
    state.restrict_to_unit_component(unit.vertices[0])?;
    let component = state.domain().to_vec();

    loop {
        state.assert_invariants()?;
        let k = state.smallest_linked_k()?;
        if state.power_full_mod_alpha(k)? {
            steps::step_full_case(&mut state, k)?;
            continue;
        }
        match steps::step_marcinsmagic(&mut state, k)? {
            steps::Marcin::Central(central) => {
                let or2 = steps::step_central_to_or(&mut state, central)?;
                match steps::step_or_to_unary(&mut state, k, or2)? {
                    steps::OrOutcome::Reduced => continue,
                    steps::OrOutcome::OrUnary(u) => {
                        match steps::step_unary_to_sigma(&mut state, k, u)? {
                            steps::SigmaOutcome::Reduced => continue,
                            steps::SigmaOutcome::Sigma(sig) => {
                                return Ok(state.into_hardness(component, sig));
                            }
                        }
                    }
                }
            }
            steps::Marcin::OrTsr(tsr) => match steps::step_tsr_to_sigma(&mut state, tsr)? {
                steps::TsrOutcome::OrUnary(u) => {
                    match steps::step_unary_to_sigma(&mut state, k, u)? {
                        steps::SigmaOutcome::Reduced => continue,
                        steps::SigmaOutcome::Sigma(sig) => {
                            return Ok(state.into_hardness(component, sig));
                        }
                    }
                }
                steps::TsrOutcome::Sigma(sig) => {
                    return Ok(state.into_hardness(component, sig));
                }
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::perm::PermGroup;

    #[test]
    fn pseudoloop_when_an_orbit_holds_an_edge() {
        // smooth, algebraic length one, and the swap orbit {0,1} carries the
        // edge 0 -> 1
        let g = Digraph::new(
            4,
            &[(0, 1), (1, 0), (0, 2), (1, 2), (2, 3), (3, 0), (3, 1)],
        )
        .unwrap();
        let gp = PermGroup::new(4, vec![vec![1, 0, 2, 3]]).unwrap();
        let cert = run_master(&g, &gp, &PipelineOptions::default()).unwrap();
        match cert {
            Certificate::Pseudoloop { edge, .. } => assert!(g.has_edge(edge.0, edge.1)),
            _ => panic!("expected a pseudoloop"),
        }
        assert!(verify_certificate(&g, &gp, &cert).unwrap().ok);
    }

    #[test]
    fn rejects_non_smooth_and_no_unit_walk() {
        let g = Digraph::new(2, &[(0, 1)]).unwrap();
        let gp = PermGroup::trivial(2);
        assert!(matches!(
            run_master(&g, &gp, &PipelineOptions::default()),
            Err(Error::Precondition(_))
        ));
        let g = fixtures::directed_cycle(3);
        let gp = PermGroup::trivial(3);
        assert!(matches!(
            run_master(&g, &gp, &PipelineOptions::default()),
            Err(Error::Precondition(_))
        ));
        // the six-vertex winding instance has no unit walk either
        let (g, gp) = fixtures::fig1();
        assert!(matches!(
            run_master(&g, &gp, &PipelineOptions::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn hardness_on_chorded_three_cycle() {
        let g = fixtures::three_cycle_with_chord();
        let gp = PermGroup::trivial(3);
        let cert = run_master(&g, &gp, &PipelineOptions::default()).unwrap();
        match &cert {
            Certificate::Hardness { sigma, .. } => assert!(sigma.len() >= 2),
            _ => panic!("expected hardness"),
        }
        let outcome = verify_certificate(&g, &gp, &cert).unwrap();
        assert!(outcome.ok, "{:?}", outcome.reasons);
    }

    #[test]
    fn hardness_on_symmetric_triangle() {
        let g = fixtures::k3_symmetric();
        let gp = PermGroup::trivial(3);
        let cert = run_master(&g, &gp, &PipelineOptions::default()).unwrap();
        let outcome = verify_certificate(&g, &gp, &cert).unwrap();
        assert!(outcome.ok, "{:?}", outcome.reasons);
    }
}
