//! Seeded instance generation: random digraphs with trivial groups, sampled
//! automorphism subgroups, and winding constructions over loopless
//! quotients. Deterministic from the seed.

use crate::digraph::Digraph;
use crate::error::{Error, Result};
use crate::fixtures;
use crate::perm::{perm_is_bijection, PermGroup};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// How the symmetry group of a generated instance is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroupMode {
    Trivial,
    SampledAutomorphisms,
    Covering,
}

#[derive(Clone, Debug)]
pub struct GenParams {
    pub n_min: usize,
    pub n_max: usize,
    pub density: f64,
    pub mode: GroupMode,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams { n_min: 3, n_max: 7, density: 0.35, mode: GroupMode::Trivial }
    }
}

#[derive(Clone, Debug)]
pub struct GeneratedInstance {
    pub name: String,
    pub g: Digraph,
    pub gp: PermGroup,
}

/// One deterministic instance per seed.
pub fn generate(seed: u64, params: &GenParams) -> Result<GeneratedInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match params.mode {
        GroupMode::Trivial => {
            let (g, _) = random_digraph(&mut rng, params);
            Ok(GeneratedInstance {
                name: format!("trivial-{seed}"),
                gp: PermGroup::trivial(g.n()),
                g,
            })
        }
        GroupMode::SampledAutomorphisms => {
            let (g, _) = random_digraph(&mut rng, params);
            let auts = automorphisms(&g);
            let nontrivial: Vec<_> =
                auts.into_iter().filter(|p| p.iter().enumerate().any(|(i, &v)| i != v)).collect();
            let mut gens = Vec::new();
            if !nontrivial.is_empty() {
                let count = rng.gen_range(1..=2.min(nontrivial.len()));
                for _ in 0..count {
                    gens.push(nontrivial[rng.gen_range(0..nontrivial.len())].clone());
                }
                gens.sort();
                gens.dedup();
            }
            let gp = PermGroup::new(g.n(), gens)?;
            Ok(GeneratedInstance { name: format!("sampled-{seed}"), g, gp })
        }
        GroupMode::Covering => {
            let (g, gp, base) = random_winding(&mut rng, params)?;
            Ok(GeneratedInstance { name: format!("winding-{seed}-over-{base}"), g, gp })
        }
    }
}

fn random_digraph(rng: &mut ChaCha8Rng, params: &GenParams) -> (Digraph, usize) {
    let n = rng.gen_range(params.n_min..=params.n_max);
    let mut edges = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if a != b && rng.gen_bool(params.density) {
                edges.push((a, b));
            }
        }
    }
    (Digraph::new(n, &edges).expect("edges in range"), n)
}

/// All automorphisms of a digraph, by brute force over permutations.
/// Intended for small instances only.
pub fn automorphisms(g: &Digraph) -> Vec<Vec<usize>> {
    let n = g.n();
    let mut out = Vec::new();
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        if perm_is_bijection(&perm, n)
            && g.edge_list().iter().all(|&(a, b)| g.has_edge(perm[a], perm[b]))
        {
            out.push(perm.clone());
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    out
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// A cyclic winding over a loopless base: vertices are (base vertex, layer),
/// every base edge gets a layer shift, and the deck rotation is the group.
fn random_winding(
    rng: &mut ChaCha8Rng,
    params: &GenParams,
) -> Result<(Digraph, PermGroup, String)> {
    // base: either the three-orbit pattern or a small random loopless
    // smooth digraph
    let (base, base_name): (Digraph, String) = if rng.gen_bool(0.5) {
        (fixtures::siggers_pattern(), "pattern".to_string())
    } else {
        loop {
            let nb = rng.gen_range(3..=4);
            let mut edges = Vec::new();
            for a in 0..nb {
                for b in 0..nb {
                    if a != b && rng.gen_bool(0.5) {
                        edges.push((a, b));
                    }
                }
            }
            let cand = Digraph::new(nb, &edges)?;
            if cand.is_smooth() {
                break (cand, format!("base{nb}"));
            }
        }
    };
    let layers = rng.gen_range(2..=3usize);
    let nb = base.n();
    let n = nb * layers;
    let vid = |v: usize, layer: usize| v * layers + layer;
    let mut edges = Vec::new();
    for (u, v) in base.edge_list() {
        let shift = rng.gen_range(0..layers);
        for l in 0..layers {
            edges.push((vid(u, l), vid(v, (l + shift) % layers)));
        }
    }
    let g = Digraph::new(n, &edges)?;
    let rho: Vec<usize> = (0..n)
        .map(|x| {
            let (v, l) = (x / layers, x % layers);
            vid(v, (l + 1) % layers)
        })
        .collect();
    let gp = PermGroup::new(n, vec![rho])?;
    gp.check_automorphisms(&g).map_err(|e| Error::Defect(format!("deck rotation broke: {e}")))?;
    Ok((g, gp, base_name))
}

/// Generates instances until one passes the filter; errors after the cap.
pub fn generate_filtered(
    seed: u64,
    params: &GenParams,
    max_tries: u64,
    filter: impl Fn(&GeneratedInstance) -> bool,
) -> Result<GeneratedInstance> {
    for t in 0..max_tries {
        let inst = generate(seed.wrapping_mul(1_000_003).wrapping_add(t), params)?;
        if filter(&inst) {
            return Ok(inst);
        }
    }
    Err(Error::Guard(format!("no instance matched the filter within {max_tries} tries")))
}

/// All loopless digraphs on `n` vertices, up to isomorphism, satisfying the
/// given filter. Exhaustive; meant for n <= 4.
pub fn enumerate_loopless_up_to_iso(n: usize, filter: impl Fn(&Digraph) -> bool) -> Vec<Digraph> {
    let slots: Vec<(usize, usize)> =
        (0..n).flat_map(|a| (0..n).filter(move |&b| b != a).map(move |b| (a, b))).collect();
    let mut perms: Vec<Vec<usize>> = Vec::new();
    let mut p: Vec<usize> = (0..n).collect();
    loop {
        perms.push(p.clone());
        if !next_permutation(&mut p) {
            break;
        }
    }
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for mask in 0u64..(1 << slots.len()) {
        let edges: Vec<(usize, usize)> = slots
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, &e)| e)
            .collect();
        let g = Digraph::new(n, &edges).expect("slots in range");
        if !filter(&g) {
            continue;
        }
        // canonical form: the lexicographically smallest permuted edge set
        let canon = perms
            .iter()
            .map(|p| {
                let mut es: Vec<(usize, usize)> =
                    edges.iter().map(|&(a, b)| (p[a], p[b])).collect();
                es.sort_unstable();
                es
            })
            .min()
            .unwrap();
        if seen.insert(canon) {
            out.push(g);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let p = GenParams::default();
        let a = generate(42, &p).unwrap();
        let b = generate(42, &p).unwrap();
        assert_eq!(a.g.edge_list(), b.g.edge_list());
        assert_eq!(a.name, b.name);
    }

    #[test]
    fn winding_quotient_matches_base_orbits() {
        let p = GenParams { mode: GroupMode::Covering, ..Default::default() };
        for seed in 0..10 {
            let inst = generate(seed, &p).unwrap();
            let part = crate::perm::orbits(&inst.gp, 1).unwrap();
            // fibres are orbits: count = base size
            assert_eq!(part.len() * (inst.g.n() / part.len()), inst.g.n());
            for o in &part.orbits {
                assert_eq!(o.len(), inst.g.n() / part.len());
            }
        }
    }

    #[test]
    fn exhaustive_enumeration_small() {
        let all = enumerate_loopless_up_to_iso(3, |g| g.is_smooth());
        // a smooth loopless digraph on 3 vertices must cover all vertices
        // with in/out edges; the directed 3-cycle is among them
        assert!(all.iter().any(|g| g.edge_list().len() == 3));
        assert!(!all.is_empty());
    }

    #[test]
    fn sampled_automorphism_generators_are_automorphisms() {
        let p = GenParams { mode: GroupMode::SampledAutomorphisms, ..Default::default() };
        for seed in 0..20 {
            let inst = generate(seed, &p).unwrap();
            inst.gp.check_automorphisms(&inst.g).unwrap();
        }
    }
}
