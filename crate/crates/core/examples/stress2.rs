use loopsmith_core::corpus::{generate, GenParams, GroupMode};
use loopsmith_core::digraph::find_unit_walk;
use loopsmith_core::pipeline::{run_master, PipelineOptions};

fn main() {
    let opts = PipelineOptions::default();
    let params = GenParams { n_min: 3, n_max: 6, density: 0.4, mode: GroupMode::Trivial };
    for seed in 0..400u64 {
        let inst = match generate(seed, &params) { Ok(i) => i, Err(_) => continue };
        if inst.g.smoothness_witness().is_some() { continue; }
        if find_unit_walk(&inst.g).is_none() { continue; }
        eprintln!("seed {seed} n={} edges={}", inst.g.n(), inst.g.edge_list().len());
        let t0 = std::time::Instant::now();
        let r = run_master(&inst.g, &inst.gp, &opts);
        eprintln!("  -> {:?} in {:?}", r.as_ref().map(|_| "ok").map_err(|e| format!("{e}")), t0.elapsed());
    }
}
