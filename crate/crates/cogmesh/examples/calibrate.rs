//! Temporary sweep harness used to calibrate arena size and failure bounds.
//! Run with `cargo run --release -p cogmesh --example calibrate`.

use cogmesh::{simulate_run, MobilityClass, SimConfig};

const RUNS: u64 = 30;

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

struct Cell {
    pfr: f64,
    efr: f64,
    ct: f64,
}

fn cell(cfg: &SimConfig, runs: u64) -> Cell {
    let mut pfr = Vec::new();
    let mut efr = Vec::new();
    let mut ct = Vec::new();
    for seed in 0..runs {
        let out = simulate_run(cfg, seed).expect("run failed");
        pfr.push(out.record.pfr);
        if let Some(e) = out.record.efr {
            efr.push(e);
        }
        if out.completed > 0 {
            ct.push(out.record.ct_s);
        }
    }
    Cell { pfr: mean(&pfr), efr: mean(&efr), ct: mean(&ct) }
}

fn main() {
    let base = SimConfig::default();

    for budget in [400u64, 300] {
        for range_m in [250.0, 235.0, 220.0] {
            let cfg = |density, mobility| SimConfig {
                range_m,
                stall_cycle_limit: 100,
                session_grace_ticks: 5,
                cycle_budget: budget,
                service_density: density,
                mobility,
                ..base.clone()
            };
            let s20 = cell(&cfg(20, MobilityClass::Slow), RUNS);
            let f20 = cell(&cfg(20, MobilityClass::Fast), RUNS);
            let s40 = cell(&cfg(40, MobilityClass::Slow), RUNS);
            let s60 = cell(&cfg(60, MobilityClass::Slow), RUNS);
            let f60 = cell(&cfg(60, MobilityClass::Fast), RUNS);
            let trend = s20.pfr > s40.pfr && s40.pfr > s60.pfr;
            let drop = s60.pfr == 0.0 || s20.pfr >= 5.0 * s60.pfr;
            let mob = f20.pfr > s20.pfr;
            println!(
                "budget={budget} r={range_m:3}: slow 20/40/60 = {:.3}/{:.3}/{:.3} fast20={:.3} fast60={:.3} ct(s60)={:.1} efr(f20/f60)={:.3}/{:.3} [trend {} drop {} mobility {} margin {:+.3}]",
                s20.pfr, s40.pfr, s60.pfr, f20.pfr, f60.pfr, s60.ct, f20.efr, f60.efr,
                ok(trend), ok(drop), ok(mob), f20.pfr - s20.pfr,
            );
        }
    }
}

fn ok(b: bool) -> &'static str {
    if b {
        "PASS"
    } else {
        "FAIL"
    }
}
