use loopsmith_core::corpus::{generate, GenParams, GroupMode};
use loopsmith_core::digraph::find_unit_walk;
use loopsmith_core::pipeline::{run_master, PipelineOptions};

fn main() {
    let opts = PipelineOptions::default();
    let params = GenParams { n_min: 3, n_max: 6, density: 0.4, mode: GroupMode::Trivial };
    let seed: u64 = std::env::args().nth(1).unwrap().parse().unwrap();
    let inst = generate(seed, &params).unwrap();
    assert!(inst.g.smoothness_witness().is_none());
    assert!(find_unit_walk(&inst.g).is_some());
    println!("n={} edges={:?}", inst.g.n(), inst.g.edge_list());
    match run_master(&inst.g, &inst.gp, &opts) {
        Ok(c) => println!("ok {:?}", match c { loopsmith_core::pipeline::Certificate::Hardness{trace,..} => format!("{trace:?}"), _ => "pseudo".into() }),
        Err(e) => println!("ERR {e}"),
    }
}
