// quick stress harness over generated corpora
use loopsmith_core::corpus::{generate, GenParams, GroupMode};
use loopsmith_core::digraph::find_unit_walk;
use loopsmith_core::finitise::instance_view;
use loopsmith_core::pipeline::{run_master, verify_certificate, PipelineOptions, Certificate};

fn main() {
    let opts = PipelineOptions::default();
    let mut stats = (0usize, 0usize, 0usize, 0usize); // hardness, pseudoloop, rejected, errors
    for mode in [GroupMode::Trivial, GroupMode::SampledAutomorphisms, GroupMode::Covering] {
        let params = GenParams { n_min: 3, n_max: 6, density: 0.4, mode };
        for seed in 0..400u64 {
            let inst = match generate(seed, &params) { Ok(i) => i, Err(_) => continue };
            if inst.g.smoothness_witness().is_some() { stats.2 += 1; continue; }
            if find_unit_walk(&inst.g).is_none() { stats.2 += 1; continue; }
            let view = match instance_view(&inst.g, &inst.gp) { Ok(v) => v, Err(e) => { println!("VIEW ERR {} {:?}: {e}", inst.name, mode); stats.3 += 1; continue } };
            match run_master(&inst.g, &inst.gp, &opts) {
                Ok(cert) => {
                    match &cert {
                        Certificate::Pseudoloop { .. } => stats.1 += 1,
                        Certificate::Hardness { .. } => stats.0 += 1,
                    }
                    match verify_certificate(&inst.g, &inst.gp, &cert) {
                        Ok(out) if out.ok => {}
                        Ok(out) => { println!("VERIFY FAIL {} edges={:?} gens={:?} reasons={:?}", inst.name, inst.g.edge_list(), inst.gp.generators(), out.reasons); stats.3 += 1; }
                        Err(e) => { println!("VERIFY ERR {}: {e}", inst.name); stats.3 += 1; }
                    }
                    if view.loop_witness.is_none() && matches!(cert, Certificate::Pseudoloop{..}) {
                        println!("WRONG VERDICT {}", inst.name); stats.3 += 1;
                    }
                }
                Err(e) => {
                    println!("RUN ERR {} edges={:?} gens={:?}: {e}", inst.name, inst.g.edge_list(), inst.gp.generators());
                    stats.3 += 1;
                }
            }
        }
    }
    println!("hardness={} pseudoloop={} skipped={} errors={}", stats.0, stats.1, stats.2, stats.3);
}
