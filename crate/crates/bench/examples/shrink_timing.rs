// temporary timing probe
use rsp_core::decision::DecisionPair;
use rsp_core::model::{count_candidates_in, generate, GenKind};
use rsp_core::shrink::shrink_improved;
use std::time::Instant;

fn main() {
    let inst = generate(GenKind::Uniform, 4096, 5).unwrap();
    for l in [16usize, 64, 256] {
        let decision = DecisionPair::bfs(&inst);
        let t0 = Instant::now();
        let out = shrink_improved(&inst, l, &decision, 7).unwrap();
        let shrink_t = t0.elapsed().as_secs_f64();
        let t1 = Instant::now();
        let count = count_candidates_in(&inst, &out.interval);
        let count_t = t1.elapsed().as_secs_f64();
        println!(
            "L={l}: shrink {:.2}s, count {} ({:.2}s), decides {}, probes {}",
            shrink_t, count, count_t, decision.total_calls(), out.selection.total()
        );
    }
}
