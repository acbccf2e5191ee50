//! One-run failure probe.
use cogmesh::{simulate_run, SimConfig};

fn main() {
    let cfg = SimConfig { service_density: 60, ..SimConfig::default() };
    for seed in [0u64, 1, 2] {
        eprintln!("--- seed {seed} ---");
        let out = simulate_run(&cfg, seed).unwrap();
        eprintln!(
            "completed {}/{} exec_failures={} dups={}",
            out.completed, out.issued, out.exec_failure_events, out.duplicate_executions
        );
        for t in &out.requests {
            eprintln!(
                "  req {} ok={} steps={} cycles={} ct={:.2}",
                t.index, t.completed, t.executed.len(), t.cycles, t.ct_s
            );
        }
    }
}
