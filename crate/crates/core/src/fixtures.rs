//! Small named instances used across tests and the corpus generator.

use crate::digraph::Digraph;
use crate::perm::PermGroup;

/// The six-vertex double winding over the three-orbit pattern, with the
/// fibrewise swap as its symmetry. Vertex layout: 0=A0, 1=B0, 2=A1, 3=B1,
/// 4=A2, 5=B2; orbits are {A_i, B_i}.
pub fn fig1() -> (Digraph, PermGroup) {
    let g = Digraph::new(
        6,
        &[
            (0, 4), // A0 -> A2
            (1, 5), // B0 -> B2
            (4, 2), // A2 -> A1
            (5, 3), // B2 -> B1
            (2, 1), // A1 -> B0
            (1, 2), // B0 -> A1
            (0, 3), // A0 -> B1
            (3, 0), // B1 -> A0
        ],
    )
    .expect("static edges in range");
    let gp = PermGroup::new(6, vec![vec![1, 0, 3, 2, 5, 4]]).expect("swap is a bijection");
    gp.check_automorphisms(&g).expect("swap is an automorphism");
    (g, gp)
}

/// The three-vertex quotient pattern: 0 -> 2, 2 -> 1, 0 <-> 1.
pub fn siggers_pattern() -> Digraph {
    Digraph::new(3, &[(0, 2), (2, 1), (0, 1), (1, 0)]).expect("static edges in range")
}

/// A directed cycle.
pub fn directed_cycle(n: usize) -> Digraph {
    Digraph::new(n, &(0..n).map(|i| (i, (i + 1) % n)).collect::<Vec<_>>())
        .expect("static edges in range")
}

/// The directed 4-cycle with the rotation-by-two symmetry.
pub fn four_cycle_rot2() -> (Digraph, PermGroup) {
    let g = directed_cycle(4);
    let gp = PermGroup::new(4, vec![vec![2, 3, 0, 1]]).expect("rotation is a bijection");
    gp.check_automorphisms(&g).expect("rotation is an automorphism");
    (g, gp)
}

/// K3 as a symmetric digraph (every pair in both directions).
pub fn k3_symmetric() -> Digraph {
    Digraph::new(3, &[(0, 1), (1, 0), (0, 2), (2, 0), (1, 2), (2, 1)]).expect("static edges")
}

/// Three-cycle with one symmetric edge: smooth, loopless, algebraic length 1.
pub fn three_cycle_with_chord() -> Digraph {
    Digraph::new(3, &[(0, 1), (1, 2), (2, 0), (1, 0)]).expect("static edges")
}
