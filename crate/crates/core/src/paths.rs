//! Orbit-labelled paths, merges, induced relations, proper separation, and
//! the constructive algorithms producing properly separated pairs.

use crate::bitset::BitSet;
use crate::digraph::{BinRel, Digraph, Dir};
use crate::error::{Error, Result};

/// An abstract path together with one orbit label per position.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct LabelledPath {
    pub dirs: Vec<Dir>,
    pub labels: Vec<usize>,
}

impl LabelledPath {
    pub fn empty(start: usize) -> Self {
        LabelledPath { dirs: Vec::new(), labels: vec![start] }
    }

    pub fn new(dirs: Vec<Dir>, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != dirs.len() + 1 {
            return Err(Error::BadParameter("label count must be edge count + 1".into()));
        }
        Ok(LabelledPath { dirs, labels })
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    pub fn first(&self) -> usize {
        self.labels[0]
    }

    pub fn last(&self) -> usize {
        *self.labels.last().unwrap()
    }

    pub fn push(&mut self, d: Dir, label: usize) {
        self.dirs.push(d);
        self.labels.push(label);
    }

    /// Reversal: reversed token sequence with flipped tokens, reversed labels.
    pub fn reversed(&self) -> LabelledPath {
        LabelledPath {
            dirs: self.dirs.iter().rev().map(|d| d.flip()).collect(),
            labels: self.labels.iter().rev().copied().collect(),
        }
    }

    /// Concatenation; the junction labels must agree.
    pub fn concat(&self, other: &LabelledPath) -> Result<LabelledPath> {
        if self.last() != other.first() {
            return Err(Error::BadParameter("junction labels disagree".into()));
        }
        let mut dirs = self.dirs.clone();
        dirs.extend_from_slice(&other.dirs);
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels[1..]);
        Ok(LabelledPath { dirs, labels })
    }

    /// k-fold concatenation of a path whose first and last labels agree.
    pub fn power(&self, k: usize) -> Result<LabelledPath> {
        if self.first() != self.last() {
            return Err(Error::BadParameter("power needs equal endpoints".into()));
        }
        let mut out = LabelledPath::empty(self.first());
        for _ in 0..k {
            out = out.concat(self)?;
        }
        Ok(out)
    }

    pub fn algebraic_length(&self) -> i64 {
        self.dirs
            .iter()
            .map(|d| match d {
                Dir::Fwd => 1i64,
                Dir::Bwd => -1,
            })
            .sum()
    }
}

/// Two labellings of one abstract path, read positionwise as label pairs.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct MergedPath {
    pub dirs: Vec<Dir>,
    pub pairs: Vec<(usize, usize)>,
}

impl MergedPath {
    pub fn of(top: &LabelledPath, bottom: &LabelledPath) -> Result<Self> {
        if top.dirs != bottom.dirs {
            return Err(Error::BadParameter("merge needs a shared abstract path".into()));
        }
        Ok(MergedPath {
            dirs: top.dirs.clone(),
            pairs: top.labels.iter().copied().zip(bottom.labels.iter().copied()).collect(),
        })
    }
}

/// Evaluation context: the base digraph plus its orbit structure.
pub struct PathCtx<'a> {
    pub g: &'a Digraph,
    pub quotient: &'a Digraph,
    pub orbit_sets: &'a [BitSet],
}

impl<'a> PathCtx<'a> {
    fn step_rel(&self, d: Dir) -> BinRel {
        match d {
            Dir::Fwd => self.g.edge_rel().clone(),
            Dir::Bwd => self.g.edge_rel().inverse(),
        }
    }

    fn run(&self, dirs: &[Dir], position_sets: &[BitSet]) -> BinRel {
        let mut rel = BinRel::identity(self.g.n()).restrict(&position_sets[0]);
        for (i, &d) in dirs.iter().enumerate() {
            let step = self.step_rel(d).restrict_right(&position_sets[i + 1]);
            rel = rel.compose(&step).expect("same domain");
        }
        rel
    }

    fn label_sets(&self, labels: &[usize]) -> Vec<BitSet> {
        labels.iter().map(|&l| self.orbit_sets[l].clone()).collect()
    }

    /// The relation induced by a labelled path: all (a, b) admitting a
    /// realisation with every intermediate vertex in its prescribed orbit.
    pub fn gamma(&self, path: &LabelledPath) -> BinRel {
        self.run(&path.dirs, &self.label_sets(&path.labels))
    }

    /// The relation induced by a merge: intermediate vertices may lie in
    /// either orbit of the positionwise pair.
    pub fn gamma_merge(&self, m: &MergedPath) -> BinRel {
        let sets: Vec<BitSet> = m
            .pairs
            .iter()
            .map(|&(a, b)| {
                let mut s = self.orbit_sets[a].clone();
                s.union_with(&self.orbit_sets[b]);
                s
            })
            .collect();
        self.run(&m.dirs, &sets)
    }

    pub fn is_realisable(&self, path: &LabelledPath) -> bool {
        self.gamma(path).count() > 0
    }

    /// Does every step follow an actual quotient edge in its direction?
    pub fn is_quotient_walk(&self, path: &LabelledPath) -> bool {
        path.dirs.iter().enumerate().all(|(i, d)| {
            let (a, b) = (path.labels[i], path.labels[i + 1]);
            match d {
                Dir::Fwd => self.quotient.has_edge(a, b),
                Dir::Bwd => self.quotient.has_edge(b, a),
            }
        })
    }

    /// Proper separation: both labellings realisable, and every crossing
    /// hybrid labelling (top prefix then bottom suffix) non-realisable.
    pub fn is_properly_separated(&self, top: &LabelledPath, bottom: &LabelledPath) -> Result<bool> {
        if top.dirs != bottom.dirs {
            return Err(Error::BadParameter("separation needs a shared abstract path".into()));
        }
        if !self.is_realisable(top) || !self.is_realisable(bottom) {
            return Ok(false);
        }
        for i in 1..=top.len() {
            let mut labels = top.labels[..i].to_vec();
            labels.extend_from_slice(&bottom.labels[i..]);
            let hybrid = LabelledPath::new(top.dirs.clone(), labels)?;
            if self.is_realisable(&hybrid) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Writes `n = s*k + t*l` with `s, t > 0`, smallest `t` first. Requires
/// coprime `k, l`, `n > k*l`, and `n` coprime with both.
pub fn euclid_hammer(k: usize, l: usize, n: usize) -> Result<(usize, usize)> {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    if k == 0 || l == 0 || gcd(k, l) != 1 {
        return Err(Error::BadParameter("k and l must be coprime positive integers".into()));
    }
    if n <= k * l {
        return Err(Error::BadParameter("n must exceed k*l".into()));
    }
    if gcd(n, k) != 1 || gcd(n, l) != 1 {
        return Err(Error::BadParameter("n must be coprime with k and with l".into()));
    }
    positive_combination(k, l, n)
        .ok_or_else(|| Error::Defect("representable n admitted no positive combination".into()))
}

/// `n = s*k + t*l` with `s, t >= 1` and `t` minimal, when one exists.
/// No coprimality demanded; every `n > k*l` with `gcd(k,l) = 1` works.
pub fn positive_combination(k: usize, l: usize, n: usize) -> Option<(usize, usize)> {
    let mut t = 1;
    while t * l < n {
        let rest = n - t * l;
        if rest % k == 0 {
            return Some((rest / k, t));
        }
        t += 1;
    }
    None
}

/// A properly separated pair under construction: two label rows over one
/// shared direction sequence.
#[derive(Clone, Debug)]
struct SepPair {
    dirs: Vec<Dir>,
    top: Vec<usize>,
    bottom: Vec<usize>,
}

impl SepPair {
    fn new(top: usize, bottom: usize) -> Self {
        SepPair { dirs: Vec::new(), top: vec![top], bottom: vec![bottom] }
    }

    fn len(&self) -> usize {
        self.dirs.len()
    }

    fn top_end(&self) -> usize {
        *self.top.last().unwrap()
    }

    fn bottom_end(&self) -> usize {
        *self.bottom.last().unwrap()
    }

    fn push(&mut self, d: Dir, top: usize, bottom: usize) {
        self.dirs.push(d);
        self.top.push(top);
        self.bottom.push(bottom);
    }

    /// Push a step whose bottom label trails one position behind the top row.
    fn push_trailing(&mut self, d: Dir, top: usize) {
        let trail = self.top_end();
        self.push(d, top, trail);
    }

    fn append(&mut self, other: &SepPair) -> Result<()> {
        if self.top_end() != other.top[0] || self.bottom_end() != other.bottom[0] {
            return Err(Error::Defect("separated-pair junction mismatch".into()));
        }
        self.dirs.extend_from_slice(&other.dirs);
        self.top.extend_from_slice(&other.top[1..]);
        self.bottom.extend_from_slice(&other.bottom[1..]);
        Ok(())
    }

    fn into_paths(self) -> (LabelledPath, LabelledPath) {
        (
            LabelledPath { dirs: self.dirs.clone(), labels: self.top },
            LabelledPath { dirs: self.dirs, labels: self.bottom },
        )
    }
}

/// Reachability in at least one step; `(v, v)` present exactly when `v` lies
/// on a directed cycle.
fn transitive_closure(g: &Digraph) -> BinRel {
    let mut tc = g.edge_rel().clone();
    loop {
        let next = tc.union(&tc.compose(g.edge_rel()).unwrap()).unwrap();
        if next == tc {
            return tc;
        }
        tc = next;
    }
}

fn same_scc(tc: &BinRel, a: usize, b: usize) -> bool {
    a == b || (tc.contains(a, b) && tc.contains(b, a))
}

/// Shortest directed path from `from` to the first vertex satisfying `pred`,
/// walking forward; ties broken by vertex index. Includes both endpoints.
/// `allowed` restricts the vertices the walk may touch after the start.
fn bfs_to(
    q: &Digraph,
    from: usize,
    pred: impl Fn(usize) -> bool,
    allowed: impl Fn(usize) -> bool,
) -> Option<Vec<usize>> {
    if pred(from) {
        return Some(vec![from]);
    }
    let mut parent = vec![usize::MAX; q.n()];
    parent[from] = from;
    let mut queue = std::collections::VecDeque::from([from]);
    while let Some(v) = queue.pop_front() {
        for w in q.out_neighbours(v).iter() {
            if parent[w] != usize::MAX || !allowed(w) {
                continue;
            }
            parent[w] = v;
            if pred(w) {
                let mut path = vec![w];
                let mut cur = w;
                while cur != from {
                    cur = parent[cur];
                    path.push(cur);
                }
                path.reverse();
                return Some(path);
            }
            queue.push_back(w);
        }
    }
    None
}

/// Shortest directed cycle through `v`, as the vertex list of the closed walk
/// without the repeated endpoint; ties broken lexicographically by BFS order.
fn shortest_cycle_through(q: &Digraph, v: usize) -> Option<Vec<usize>> {
    let mut best: Option<Vec<usize>> = None;
    for w in q.out_neighbours(v).iter() {
        // shortest path w -> v, then close with v -> w
        let path = if w == v {
            Some(vec![v])
        } else {
            bfs_to(q, w, |x| x == v, |_| true).map(|p| {
                let mut c = vec![v];
                c.extend_from_slice(&p[..p.len() - 1]);
                c
            })
        };
        if let Some(c) = path {
            let better = match &best {
                None => true,
                Some(b) => c.len() < b.len() || (c.len() == b.len() && c < *b),
            };
            if better {
                best = Some(c);
            }
        }
    }
    best
}

/// shortest backward path from `from` to the first vertex on a cycle: the
/// returned list is a forward walk ending at `from`.
fn approach_from_cycle(q: &Digraph, tc: &BinRel, from: usize) -> Result<Vec<usize>> {
    let rev_edges: Vec<(usize, usize)> = q.edge_list().into_iter().map(|(a, b)| (b, a)).collect();
    let rev = Digraph::new(q.n(), &rev_edges)?;
    let path = bfs_to(&rev, from, |x| tc.contains(x, x), |_| true)
        .ok_or_else(|| Error::Defect("smooth quotient must reach a cycle backwards".into()))?;
    Ok(path.into_iter().rev().collect())
}

/// Maximal-length segment of a closed walk `c`: a quotient edge
/// `c[j] -> c[i]` maximising `(i - j) mod k`; ties broken by smallest (j, i).
fn maximal_segment(q: &Digraph, c: &[usize]) -> Result<(usize, usize, usize)> {
    let k = c.len();
    let mut best: Option<(usize, usize, usize)> = None;
    for j in 0..k {
        for i in 0..k {
            if q.has_edge(c[j], c[i]) {
                let p = (i + k - j) % k;
                if p == 0 {
                    return Err(Error::Defect("zero-length segment implies a quotient loop".into()));
                }
                let better = match best {
                    None => true,
                    Some((bp, bj, bi)) => p > bp || (p == bp && (j, i) < (bj, bi)),
                };
                if better {
                    best = Some((p, j, i));
                }
            }
        }
    }
    best.map(|(p, j, i)| (p, j, i)).ok_or_else(|| Error::Defect("cycle without segments".into()))
}

/// The core recursive construction: given orbits with quotient edges
/// `u -> u_p` and `v -> v_p`, and a core step (`Fwd` needs `u -> v`, `Bwd`
/// needs `v -> u`), produce a properly separated pair whose top extends the
/// core step from `u` to `v` and whose bottom runs from `u_p` to `v_p`.
/// Returns the pair and the index of the core step in the direction list.
fn claim_pair(
    q: &Digraph,
    tc: &BinRel,
    u: usize,
    v: usize,
    u_p: usize,
    v_p: usize,
    core: Dir,
) -> Result<(SepPair, usize)> {
    match core {
        Dir::Bwd => {
            // reduce a backward core to a forward one through an in-neighbour
            debug_assert!(q.has_edge(v, u));
            let qq = (0..q.n())
                .find(|&x| q.has_edge(x, v))
                .ok_or_else(|| Error::Defect("smooth quotient vertex without in-neighbour".into()))?;
            let mut pair = SepPair::new(u, u_p);
            pair.push(Dir::Bwd, v, u);
            pair.push(Dir::Bwd, qq, v);
            let (tail, tail_core) = claim_pair(q, tc, qq, v, v, v_p, Dir::Fwd)?;
            let offset = pair.len();
            pair.append(&tail)?;
            // the forward tail's core cancels against the approach; the
            // surviving core of the whole pair is the first backward step
            let _ = offset + tail_core;
            Ok((pair, 0))
        }
        Dir::Fwd => {
            debug_assert!(q.has_edge(u, v));
            if same_scc(tc, u, v) {
                if same_scc(tc, u, v_p) {
                    claim_case_same_component(q, tc, u, v, u_p, v_p)
                } else {
                    // detour through a successor of v inside the component
                    let w = (0..q.n())
                        .find(|&x| q.has_edge(v, x) && same_scc(tc, u, x))
                        .ok_or_else(|| Error::Defect("nontrivial component must be smooth".into()))?;
                    let w_p = (0..q.n())
                        .find(|&x| q.has_edge(v_p, x))
                        .ok_or_else(|| Error::Defect("smooth quotient vertex without out-neighbour".into()))?;
                    let (m1, c1) = claim_case_same_component(q, tc, u, v, u_p, w)?;
                    let (m2, _) = claim_pair(q, tc, v, v_p, w, w_p, Dir::Fwd)?;
                    let mut pair = m1;
                    let core_pos = c1;
                    pair.append(&m2)?;
                    let mut m3 = SepPair::new(v_p, w_p);
                    m3.push(Dir::Bwd, v, v_p);
                    pair.append(&m3)?;
                    Ok((pair, core_pos))
                }
            } else {
                claim_case_cross_component(q, tc, u, v, u_p, v_p)
            }
        }
    }
}

/// Core edge inside one strongly connected component, with `v_p` in it too.
fn claim_case_same_component(
    q: &Digraph,
    tc: &BinRel,
    u: usize,
    v: usize,
    u_p: usize,
    v_p: usize,
) -> Result<(SepPair, usize)> {
    // minimal-length cycle within the component
    let mut cycle: Option<Vec<usize>> = None;
    for x in 0..q.n() {
        if same_scc(tc, u, x) {
            if let Some(c) = shortest_cycle_through(q, x) {
                if c.iter().all(|&y| same_scc(tc, u, y)) {
                    let better = match &cycle {
                        None => true,
                        Some(b) => c.len() < b.len() || (c.len() == b.len() && c < *b),
                    };
                    if better {
                        cycle = Some(c);
                    }
                }
            }
        }
    }
    let mut c = cycle.ok_or_else(|| Error::Defect("component with an edge must contain a cycle".into()))?;
    let k = c.len();
    // walk from the cycle forward to u, then relabel the cycle to start there
    let to_u = bfs_to(q, c[0], |x| x == u, |x| same_scc(tc, u, x))
        .ok_or_else(|| Error::Defect("strongly connected component must reach u".into()))?;
    // rotate so the cycle starts at the walk's origin (it already does), and
    // more generally allow hitting the cycle anywhere along a shortest walk
    let mut u_walk = to_u;
    if let Some(hit) = u_walk.iter().position(|&x| c.contains(&x)) {
        // start the approach at the last cycle vertex on the walk
        let mut last_hit = hit;
        for (idx, x) in u_walk.iter().enumerate() {
            if c.contains(x) {
                last_hit = idx;
            }
        }
        u_walk = u_walk.split_off(last_hit);
        let pos = c.iter().position(|&x| x == u_walk[0]).unwrap();
        c.rotate_left(pos);
    }
    let m = u_walk.len() - 1; // u_walk = [C0, ..., u]
    // forward walk from v_p back to the cycle start
    let back = bfs_to(q, v_p, |x| x == c[0], |x| same_scc(tc, u, x))
        .ok_or_else(|| Error::Defect("strongly connected component must close up".into()))?;
    let mut qwalk = u_walk.clone();
    qwalk.push(v);
    qwalk.extend_from_slice(&back);
    let qlen = qwalk.len(); // q vertices, q-1 edges, ends at C0

    let mut pair = SepPair::new(u, u_p);
    // phase A: trailing backward from u down to the cycle, one step onto it
    for j in (0..m).rev() {
        pair.push_trailing(Dir::Bwd, u_walk[j]);
    }
    pair.push_trailing(Dir::Bwd, c[k - 1]);
    let phase_a = pair.len();
    // phase B: both rows run forward around the combined closed walk
    let mut top_b: Vec<usize> = Vec::new();
    top_b.extend(qwalk.iter().copied()); // C0 ... C0 (q vertices)
    for s in 1..k {
        top_b.push(c[s]);
    }
    top_b.push(c[0]);
    let mut bot_b: Vec<usize> = Vec::new();
    for s in 1..k {
        bot_b.push(c[s]);
    }
    bot_b.push(c[0]);
    bot_b.extend(qwalk[1..].iter().copied());
    bot_b.push(c[1 % k]);
    debug_assert_eq!(top_b.len(), bot_b.len());
    for t in 0..top_b.len() {
        pair.push(Dir::Fwd, top_b[t], bot_b[t]);
    }
    let core_pos = phase_a + m + 1; // the step qwalk[m] -> qwalk[m+1], i.e. u -> v
    // phase C: trailing backward around the cycle and back down to v
    for s in (0..k).rev() {
        pair.push_trailing(Dir::Bwd, c[s]);
    }
    for t in (m + 1..qlen - 1).rev() {
        pair.push_trailing(Dir::Bwd, qwalk[t]);
    }
    debug_assert_eq!(pair.top_end(), v);
    debug_assert_eq!(pair.bottom_end(), v_p);
    debug_assert_eq!(pair.top[core_pos], u);
    debug_assert_eq!(pair.top[core_pos + 1], v);
    Ok((pair, core_pos))
}

/// Core edge leaving the strongly connected component of `u`.
fn claim_case_cross_component(
    q: &Digraph,
    tc: &BinRel,
    u: usize,
    v: usize,
    u_p: usize,
    v_p: usize,
) -> Result<(SepPair, usize)> {
    let on_cycle = |x: usize| tc.contains(x, x);
    // nearest cycle reachable backwards from u, approached forwards
    let u_walk = approach_from_cycle(q, tc, u)?; // [x, ..., u], x on a cycle
    let m = u_walk.len() - 1;
    let mut c = shortest_cycle_through(q, u_walk[0])
        .ok_or_else(|| Error::Defect("cycle vertex without a cycle".into()))?;
    // nearest cycle reachable forwards from v via v_p
    let d_walk = bfs_to(q, v_p, on_cycle, |_| true)
        .ok_or_else(|| Error::Defect("smooth quotient must reach a cycle forwards".into()))?;
    let d0 = *d_walk.last().unwrap();
    let d = shortest_cycle_through(q, d0)
        .ok_or_else(|| Error::Defect("cycle vertex without a cycle".into()))?;
    let l = d.len();

    let mut qwalk = u_walk.clone();
    qwalk.push(v);
    qwalk.extend_from_slice(&d_walk);
    let qlen = qwalk.len(); // ends at D0

    // coprimality repair when the short chords make cycle lengths collide
    let k0 = c.len();
    let has_chord = k0 >= 2 && (q.has_edge(c[k0 - 1], c[1 % k0]) || q.has_edge(c[(k0 + k0 - 2) % k0], c[0]));
    let (p, j, i);
    let (mm, mm_p); // m and m' with  m*l = m'*k - p + 1
    if !has_chord {
        p = 1;
        j = 0;
        i = 1 % k0;
        // m' k = m l with m' > qlen - 1, both minimal
        let g = gcd(k0, l);
        let step = l / g;
        let mut cand = step;
        while cand <= qlen - 1 {
            cand += step;
        }
        mm_p = cand;
        mm = mm_p * k0 / l;
    } else {
        // replace the cycle by a longer closed walk of length coprime with l
        let kk = k0;
        let mut nn = kk * (kk - 1) + kk + 1;
        let (s, t) = loop {
            if gcd(nn, l) == 1 {
                if let Some(st) = positive_combination(kk, kk - 1, nn - kk) {
                    break st;
                }
            }
            nn += 1;
        };
        let mut seq: Vec<usize> = Vec::with_capacity(nn);
        if q.has_edge(c[kk - 1], c[1 % kk]) {
            // loops on C_1..C_{k-1}, then the rest of C, then s full rounds
            seq.push(c[0]);
            seq.push(c[1]);
            for _ in 0..t {
                for x in c.iter().skip(2) {
                    seq.push(*x);
                }
                seq.push(c[1]);
            }
            for x in c.iter().skip(2) {
                seq.push(*x);
            }
            for _ in 0..s {
                for x in c.iter() {
                    seq.push(*x);
                }
            }
        } else {
            // loops on C_0..C_{k-2}, then s+1 full rounds
            for _ in 0..t {
                for x in c.iter().take(kk - 1) {
                    seq.push(*x);
                }
            }
            for _ in 0..=s {
                for x in c.iter() {
                    seq.push(*x);
                }
            }
        }
        debug_assert_eq!(seq.len(), nn);
        debug_assert_eq!(seq[0], c[0]);
        c = seq;
        let (pp, jj, ii) = maximal_segment(q, &c)?;
        p = pp;
        j = jj;
        i = ii;
        // smallest m' = (p-1) * k^{-1} mod l with m' > qlen - 1 + p and m >= 1
        let kc = c.len();
        let mut cand = 0usize;
        let mm_pair = loop {
            cand += 1;
            if (cand * kc) % l == (p - 1) % l && cand > qlen - 1 + p && cand * kc + 1 > p {
                let num = cand * kc - p + 1;
                if num % l == 0 && num / l >= 1 {
                    break (num / l, cand);
                }
            }
        };
        mm = mm_pair.0;
        mm_p = mm_pair.1;
    }
    let k = c.len();

    let mut pair = SepPair::new(u, u_p);
    // phase A: trailing backward to the cycle start, then around to position
    // j-1 with the bottom row ending on position j
    for t in (0..m).rev() {
        pair.push_trailing(Dir::Bwd, u_walk[t]);
    }
    let back_steps = if j == 1 { k } else { (k + 1 - j) % k };
    for s in 1..=back_steps {
        pair.push_trailing(Dir::Bwd, c[(k - s) % k]);
    }
    debug_assert_eq!(pair.top_end(), c[(j + k - 1) % k]);
    debug_assert_eq!(pair.bottom_end(), c[j % k]);
    // phase B: forward; the top row rounds the cycle and runs out to D, the
    // bottom takes the segment shortcut and a long catch-up round. The walk
    // lengths agree because m*l = m'*k - p + 1.
    let top_start = pair.len();
    let steps_to_zero = k + 1 - j; // from position j-1 forward to position 0
    {
        let start_pos = (j + k - 1) % k;
        let mut top_w: Vec<usize> = Vec::new();
        for s in 1..=steps_to_zero {
            top_w.push(c[(start_pos + s) % k]);
        }
        top_w.extend(qwalk[1..].iter().copied());
        for s in 0..mm * l {
            top_w.push(d[(1 + s) % l]);
        }
        let mut bot_w: Vec<usize> = Vec::new();
        bot_w.push(c[i]);
        for s in 1..=mm_p * k - p {
            bot_w.push(c[(i + s) % k]);
        }
        for s in 1..=k - j {
            bot_w.push(c[(j + s) % k]);
        }
        bot_w.extend(qwalk[1..].iter().copied());
        bot_w.push(d[1 % l]);
        if top_w.len() != bot_w.len() {
            return Err(Error::Defect(format!(
                "phase-B length mismatch: {} vs {}",
                top_w.len(),
                bot_w.len()
            )));
        }
        for t in 0..top_w.len() {
            pair.push(Dir::Fwd, top_w[t], bot_w[t]);
        }
    }
    let core_pos = top_start + steps_to_zero + m;
    // phase C: trailing backward off D and down the connecting walk to v
    for s in (0..mm * l).rev() {
        pair.push_trailing(Dir::Bwd, d[s % l]);
    }
    for t in (m + 1..qlen - 1).rev() {
        pair.push_trailing(Dir::Bwd, qwalk[t]);
    }
    debug_assert_eq!(pair.top_end(), v);
    debug_assert_eq!(pair.bottom_end(), v_p);
    debug_assert_eq!(pair.top[core_pos], u);
    debug_assert_eq!(pair.top[core_pos + 1], v);
    Ok((pair, core_pos))
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Output of [`build_separated_pair`]: the extension, its relabelling, and
/// the positions at which the original path's labels survive inside the
/// extension.
#[derive(Clone, Debug)]
pub struct SeparatedPair {
    pub extension: LabelledPath,
    pub relabelling: LabelledPath,
    pub embedding: Vec<usize>,
}

/// Extends a realisable orbit-labelled path from `O` to `O` into a properly
/// separated pair whose second row runs from `p_orbit` to `p_orbit`.
/// Requires a loopless quotient of a smooth digraph and a quotient edge
/// between the path's endpoint orbit and `p_orbit` (either direction; the
/// reverse direction runs on the reversed digraph with flipped tokens).
pub fn build_separated_pair(
    ctx: &PathCtx,
    pi: &LabelledPath,
    p_orbit: usize,
) -> Result<SeparatedPair> {
    let q = ctx.quotient;
    for v in 0..q.n() {
        if q.has_edge(v, v) {
            return Err(Error::Precondition("quotient has a loop".into()));
        }
    }
    if let Some(v) = ctx.g.smoothness_witness() {
        return Err(Error::NotSmooth(v));
    }
    let o = pi.first();
    if pi.last() != o {
        return Err(Error::Precondition("path must start and end at one orbit".into()));
    }
    if !q.has_edge(o, p_orbit) {
        if !q.has_edge(p_orbit, o) {
            return Err(Error::Precondition("endpoint orbit must be adjacent to the target".into()));
        }
        let flip = |p: &LabelledPath| LabelledPath {
            dirs: p.dirs.iter().map(|d| d.flip()).collect(),
            labels: p.labels.clone(),
        };
        let rev_g = Digraph::new(
            ctx.g.n(),
            &ctx.g.edge_list().into_iter().map(|(a, b)| (b, a)).collect::<Vec<_>>(),
        )?;
        let rev_q =
            Digraph::new(q.n(), &q.edge_list().into_iter().map(|(a, b)| (b, a)).collect::<Vec<_>>())?;
        let rev_ctx = PathCtx { g: &rev_g, quotient: &rev_q, orbit_sets: ctx.orbit_sets };
        let out = build_separated_pair(&rev_ctx, &flip(pi), p_orbit)?;
        let result = SeparatedPair {
            extension: flip(&out.extension),
            relabelling: flip(&out.relabelling),
            embedding: out.embedding,
        };
        if !ctx.is_properly_separated(&result.extension, &result.relabelling)? {
            return Err(Error::Defect("flipped pair failed the separation check".into()));
        }
        return Ok(result);
    }
    if !ctx.is_realisable(pi) {
        return Err(Error::Precondition("path is not realisable".into()));
    }
    let tc = transitive_closure(q);
    let mut pair = SepPair::new(o, p_orbit);
    let mut embedding = vec![0usize];
    let steps = pi.len();
    for jstep in 0..steps {
        let (cu, cv) = (pi.labels[jstep], pi.labels[jstep + 1]);
        let u_p = pair.bottom_end();
        let v_p = if jstep + 1 == steps {
            p_orbit
        } else {
            (0..q.n())
                .find(|&x| q.has_edge(cv, x))
                .ok_or_else(|| Error::Defect("smooth quotient vertex without out-neighbour".into()))?
        };
        let (piece, core) = claim_pair(q, &tc, cu, cv, u_p, v_p, pi.dirs[jstep])?;
        let offset = pair.len();
        pair.append(&piece)?;
        embedding.push(offset + core + 1);
    }
    let (extension, relabelling) = pair.into_paths();
    // the checker is the oracle: never trust the construction
    if !ctx.is_properly_separated(&extension, &relabelling)? {
        return Err(Error::Defect("constructed pair failed the separation check".into()));
    }
    for (jl, &pos) in embedding.iter().enumerate() {
        if extension.labels[pos] != pi.labels[jl] {
            return Err(Error::Defect("extension does not embed the original labels".into()));
        }
    }
    Ok(SeparatedPair { extension, relabelling, embedding })
}

/// Output of [`build_central_escape`].
#[derive(Clone, Debug)]
pub struct CentralEscape {
    pub pi: LabelledPath,
    pub pi_prime: LabelledPath,
    pub o_in_new: usize,
    pub o_out_new: usize,
}

/// Builds a properly separated pair crossing the boundary of an orbit-union
/// `c_orbits`: the top row runs from `o_in` (inside) to a new outside orbit,
/// the bottom from `o_out` (outside) to a new inside orbit.
pub fn build_central_escape(
    ctx: &PathCtx,
    c_orbits: &BitSet,
    o_in: usize,
    o_out: usize,
) -> Result<CentralEscape> {
    let q = ctx.quotient;
    for v in 0..q.n() {
        if q.has_edge(v, v) {
            return Err(Error::Precondition("quotient has a loop".into()));
        }
    }
    if !c_orbits.contains(o_in) || c_orbits.contains(o_out) {
        return Err(Error::Precondition("orbit sides do not match the union".into()));
    }
    let out_to_in = q.has_edge(o_out, o_in);
    let in_to_out = q.has_edge(o_in, o_out);
    if !out_to_in && !in_to_out {
        return Err(Error::Precondition("orbits are not adjacent".into()));
    }
    let escape = if out_to_in {
        central_escape_core(q, c_orbits, o_in, o_out)?
    } else {
        // run on the reversed quotient, then flip every direction token
        let rev_edges: Vec<(usize, usize)> = q.edge_list().into_iter().map(|(a, b)| (b, a)).collect();
        let rev = Digraph::new(q.n(), &rev_edges)?;
        let mut esc = central_escape_core(&rev, c_orbits, o_in, o_out)?;
        esc.pi.dirs = esc.pi.dirs.iter().map(|d| d.flip()).collect();
        esc.pi_prime.dirs = esc.pi_prime.dirs.iter().map(|d| d.flip()).collect();
        esc
    };
    if !ctx.is_properly_separated(&escape.pi, &escape.pi_prime)? {
        return Err(Error::Defect("escape pair failed the separation check".into()));
    }
    if !c_orbits.contains(escape.o_in_new) || c_orbits.contains(escape.o_out_new) {
        return Err(Error::Defect("escape endpoints landed on the wrong side".into()));
    }
    Ok(escape)
}

/// The directed construction, assuming the quotient edge `o_out -> o_in`.
fn central_escape_core(
    q: &Digraph,
    c_orbits: &BitSet,
    o_in: usize,
    o_out: usize,
) -> Result<CentralEscape> {
    debug_assert!(q.has_edge(o_out, o_in));
    // case 1: a forward walk through the union that escapes it
    let inside = |x: usize| c_orbits.contains(x);
    if let Some(walk) = bfs_to(q, o_in, |x| !inside(x), |_| true) {
        // keep only walks whose interior stays inside
        if walk[..walk.len() - 1].iter().all(|&x| inside(x)) {
            let mut pair = SepPair::new(o_in, o_out);
            for &x in &walk[1..] {
                pair.push_trailing(Dir::Fwd, x);
            }
            let o_in_new = walk[walk.len() - 2];
            let o_out_new = *walk.last().unwrap();
            let (pi, pi_prime) = pair.into_paths();
            return Ok(CentralEscape { pi, pi_prime, o_in_new, o_out_new });
        }
    }
    // case 2: everything forward-reachable stays inside; head for the first
    // cycle and use a maximal segment of it
    let tc = transitive_closure(q);
    let on_cycle = |x: usize| tc.contains(x, x);
    let walk = bfs_to(q, o_in, on_cycle, |x| inside(x))
        .ok_or_else(|| Error::Defect("forward-closed set in a smooth quotient holds a cycle".into()))?;
    let z = *walk.last().unwrap();
    let cyc = shortest_cycle_through(q, z)
        .ok_or_else(|| Error::Defect("cycle vertex without a cycle".into()))?;
    let kk = cyc.len();
    let (p, jj, ii) = maximal_segment(q, &cyc)?;
    let _ = p;
    let t = walk.len() - 1; // approach edges
    let mut pair = SepPair::new(o_in, o_out);
    // phase 1: trailing forward along the approach walk and round to P_{i+1}
    for &x in &walk[1..] {
        pair.push_trailing(Dir::Fwd, x);
    }
    for s in 1..=ii + 1 {
        pair.push_trailing(Dir::Fwd, cyc[s % kk]);
    }
    // the segment step: top retreats one, bottom jumps back along the segment
    pair.push(Dir::Bwd, cyc[ii % kk], cyc[jj]);
    // phase 3: top backs off the cycle and down the approach to o_out;
    // bottom keeps walking backwards around the cycle
    let mut bot_pos = jj;
    let mut top_seq: Vec<usize> = Vec::new();
    for s in (0..ii).rev() {
        top_seq.push(cyc[s]);
    }
    for s in (0..t).rev() {
        top_seq.push(walk[s]);
    }
    top_seq.push(o_out);
    for &tv in &top_seq {
        bot_pos = (bot_pos + kk - 1) % kk;
        pair.push(Dir::Bwd, tv, cyc[bot_pos]);
    }
    let o_in_new = cyc[bot_pos];
    let o_out_new = o_out;
    let (pi, pi_prime) = pair.into_paths();
    Ok(CentralEscape { pi, pi_prime, o_in_new, o_out_new })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::perm::{orbit_digraph, OrbitPartition, PermGroup};

    fn fig1_ctx() -> (Digraph, Digraph, Vec<BitSet>) {
        let (g, gp) = fixtures::fig1();
        let (q, part, _) = orbit_digraph(&g, &gp).unwrap();
        let sets = part.orbit_sets(g.n());
        (g, q, sets)
    }

    fn ctx<'a>(g: &'a Digraph, q: &'a Digraph, sets: &'a [BitSet]) -> PathCtx<'a> {
        PathCtx { g, quotient: q, orbit_sets: sets }
    }

    #[test]
    fn gamma_of_empty_path_is_identity_on_orbit() {
        let (g, q, sets) = fig1_ctx();
        let c = ctx(&g, &q, &sets);
        let o0 = sets.iter().position(|s| s.contains(0)).unwrap();
        let p = LabelledPath::empty(o0);
        let rel = c.gamma(&p);
        assert_eq!(rel, BinRel::identity(6).restrict(&sets[o0]));
    }

    #[test]
    fn gamma_of_forward_step_follows_orbit_edges() {
        let (g, q, sets) = fig1_ctx();
        let c = ctx(&g, &q, &sets);
        let o0 = sets.iter().position(|s| s.contains(0)).unwrap();
        let o2 = sets.iter().position(|s| s.contains(4)).unwrap();
        let p = LabelledPath::new(vec![Dir::Fwd], vec![o0, o2]).unwrap();
        let rel = c.gamma(&p);
        // A0 -> A2 and B0 -> B2
        assert_eq!(rel, BinRel::from_pairs(6, [(0, 4), (1, 5)]));
    }

    #[test]
    fn gamma_merge_contains_both_rows() {
        let (g, q, sets) = fig1_ctx();
        let c = ctx(&g, &q, &sets);
        let o0 = sets.iter().position(|s| s.contains(0)).unwrap();
        let o1 = sets.iter().position(|s| s.contains(2)).unwrap();
        let top = LabelledPath::new(vec![Dir::Fwd], vec![o0, o1]).unwrap();
        let bottom = LabelledPath::new(vec![Dir::Fwd], vec![o1, o0]).unwrap();
        let m = MergedPath::of(&top, &bottom).unwrap();
        let gm = c.gamma_merge(&m);
        let want = c.gamma(&top).union(&c.gamma(&bottom)).unwrap();
        assert_eq!(gm.union(&want).unwrap(), gm);
    }

    #[test]
    fn equal_rows_are_not_separated() {
        let (g, q, sets) = fig1_ctx();
        let c = ctx(&g, &q, &sets);
        let o0 = sets.iter().position(|s| s.contains(0)).unwrap();
        let o2 = sets.iter().position(|s| s.contains(4)).unwrap();
        let p = LabelledPath::new(vec![Dir::Fwd], vec![o0, o2]).unwrap();
        assert!(!c.is_properly_separated(&p, &p).unwrap());
    }

    #[test]
    fn euclid_examples() {
        assert_eq!(euclid_hammer(2, 3, 7).unwrap(), (2, 1));
        let (s, t) = euclid_hammer(3, 4, 13).unwrap();
        assert!(s > 0 && t > 0 && 3 * s + 4 * t == 13);
        assert!(euclid_hammer(2, 4, 11).is_err());
        assert!(euclid_hammer(2, 3, 6).is_err());
        assert!(euclid_hammer(2, 3, 8).is_err());
    }

    #[test]
    fn separated_pair_on_windings_instance() {
        let (g, q, sets) = fig1_ctx();
        let c = ctx(&g, &q, &sets);
        let o0 = sets.iter().position(|s| s.contains(0)).unwrap();
        let o2 = sets.iter().position(|s| s.contains(4)).unwrap();
        let pi = LabelledPath::empty(o0);
        let out = build_separated_pair(&c, &pi, o2).unwrap();
        assert!(c.is_properly_separated(&out.extension, &out.relabelling).unwrap());
        assert_eq!(out.extension.first(), o0);
        assert_eq!(out.extension.last(), o0);
        assert_eq!(out.relabelling.first(), o2);
        assert_eq!(out.relabelling.last(), o2);
    }

    #[test]
    fn separated_pair_extends_nonempty_paths() {
        let (g, q, sets) = fig1_ctx();
        let c = ctx(&g, &q, &sets);
        let o0 = sets.iter().position(|s| s.contains(0)).unwrap();
        let o1 = sets.iter().position(|s| s.contains(2)).unwrap();
        let pi = LabelledPath::new(vec![Dir::Fwd, Dir::Bwd], vec![o0, o1, o0]).unwrap();
        assert!(c.is_realisable(&pi));
        let out = build_separated_pair(&c, &pi, o1).unwrap();
        for (jl, &pos) in out.embedding.iter().enumerate() {
            assert_eq!(out.extension.labels[pos], pi.labels[jl]);
        }
        assert!(c.is_properly_separated(&out.extension, &out.relabelling).unwrap());
    }

    #[test]
    fn central_escape_linear_case() {
        // quotient: 0 <-> 1, 1 -> 2, 2 -> 0 say; C = {1}?? build a concrete
        // fixture: edges 3 -> 0 (out->in), walk 0 -> 1 -> 2 exits C = {0,1}
        let q = Digraph::new(4, &[(3, 0), (0, 1), (1, 2), (2, 3), (2, 0), (1, 3)]).unwrap();
        // base digraph: use the quotient itself with trivial group
        let gp = PermGroup::trivial(4);
        let (qq, part, _) = orbit_digraph(&q, &gp).unwrap();
        let sets = part.orbit_sets(4);
        let c = ctx(&q, &qq, &sets);
        let cset = BitSet::from_iter(4, [0, 1]);
        let esc = build_central_escape(&c, &cset, 0, 3).unwrap();
        assert!(c.is_properly_separated(&esc.pi, &esc.pi_prime).unwrap());
        assert!(cset.contains(esc.o_in_new));
        assert!(!cset.contains(esc.o_out_new));
        assert_eq!(esc.pi.first(), 0);
        assert_eq!(esc.pi_prime.first(), 3);
    }

    #[test]
    fn central_escape_cycle_case() {
        // C = {0,1,2} covers a directed 3-cycle with no forward exit;
        // o_out = 3 with 3 -> 0 and the cycle feeding 3 is absent forwards
        let q = Digraph::new(4, &[(0, 1), (1, 2), (2, 0), (3, 0), (1, 3)]).unwrap();
        // make it smooth: 3 needs an in-edge; 1 -> 3 gives it one.
        let gp = PermGroup::trivial(4);
        let (qq, part, _) = orbit_digraph(&q, &gp).unwrap();
        let sets = part.orbit_sets(4);
        let c = ctx(&q, &qq, &sets);
        let cset = BitSet::from_iter(4, [0, 1, 2]);
        // forward from 0 stays in {0,1,2}? no: 1 -> 3 escapes. Use o_in = 2.
        // forward from 2: 2 -> 0 -> 1 -> 3 escapes as well; so case 1 fires.
        let esc = build_central_escape(&c, &cset, 0, 3).unwrap();
        assert!(c.is_properly_separated(&esc.pi, &esc.pi_prime).unwrap());
    }

    #[test]
    fn positive_combination_matches_identity() {
        for k in 1..10usize {
            for l in 1..10usize {
                if gcd(k, l) != 1 {
                    continue;
                }
                for n in (k * l + 1)..(k * l + 40) {
                    let (s, t) = positive_combination(k, l, n).unwrap();
                    assert!(s > 0 && t > 0);
                    assert_eq!(s * k + t * l, n);
                }
            }
        }
    }

    // seeded random loopless smooth quotients exercise every claim case
    #[test]
    fn separated_pairs_on_random_quotients() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut tested = 0;
        for _ in 0..200 {
            let n = rng.gen_range(2..=6);
            let mut edges = Vec::new();
            for a in 0..n {
                for b in 0..n {
                    if a != b && rng.gen_bool(0.35) {
                        edges.push((a, b));
                    }
                }
            }
            let g = match Digraph::new(n, &edges) {
                Ok(g) => g,
                Err(_) => continue,
            };
            if !g.is_smooth() {
                continue;
            }
            let gp = PermGroup::trivial(n);
            let (q, part, w) = orbit_digraph(&g, &gp).unwrap();
            if w.is_some() {
                continue;
            }
            let sets = part.orbit_sets(n);
            let c = PathCtx { g: &g, quotient: &q, orbit_sets: &sets };
            for o in 0..n {
                for p in 0..n {
                    if !q.has_edge(o, p) {
                        continue;
                    }
                    let pi = LabelledPath::empty(o);
                    let out = build_separated_pair(&c, &pi, p).unwrap();
                    assert!(c.is_properly_separated(&out.extension, &out.relabelling).unwrap());
                    tested += 1;
                }
            }
        }
        assert!(tested > 50, "too few cases exercised: {tested}");
    }

    #[test]
    fn separation_reversal_closure() {
        let (g, q, sets) = fig1_ctx();
        let c = ctx(&g, &q, &sets);
        let o0 = sets.iter().position(|s| s.contains(0)).unwrap();
        let o2 = sets.iter().position(|s| s.contains(4)).unwrap();
        let pi = LabelledPath::empty(o0);
        let out = build_separated_pair(&c, &pi, o2).unwrap();
        // properly separated (pi, rho) implies properly separated (-rho, -pi)
        let rp = out.relabelling.reversed();
        let ep = out.extension.reversed();
        assert!(c.is_properly_separated(&rp, &ep).unwrap());
    }

    #[test]
    fn orbit_partition_is_usable_for_contexts() {
        // smoke test that the helper types compose
        let (g, gp) = fixtures::fig1();
        let (_, part, _): (Digraph, OrbitPartition, _) = orbit_digraph(&g, &gp).unwrap();
        assert_eq!(part.len(), 3);
    }
}
