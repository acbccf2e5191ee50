//! Attention-parameter search: integer hill climbing over the five
//! global parameters in [10, 50], scored by adaptability-mode runs.
//! Failed plans dominate the score, then execution failures, then
//! composition time — so the search pushes toward configurations that
//! recover well from mid-composition goal switches.

use anyhow::Result;
use cogmesh::procedural::{tune_parameters, TuningMode};
use cogmesh::{simulate_run, GlobalParams, RunMode, SimConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PARAM_MIN: i64 = 10;
const PARAM_MAX: i64 = 50;
/// Seeds averaged per candidate evaluation.
const SEEDS_PER_EVAL: u64 = 2;

/// Result of one search: the accepted configuration, its score, and
/// how much of the run budget was spent.
pub struct SearchOutcome {
    pub best: GlobalParams,
    pub score: f64,
    pub simulation_runs: u64,
    pub candidates_accepted: u32,
}

fn to_ints(p: &GlobalParams) -> [i64; 5] {
    [
        p.activation_threshold as i64,
        p.mean_activation as i64,
        p.wm_energy as i64,
        p.goal_energy as i64,
        p.protected_goal_energy as i64,
    ]
}

fn to_params(v: [i64; 5]) -> GlobalParams {
    GlobalParams {
        activation_threshold: v[0] as f64,
        mean_activation: v[1] as f64,
        wm_energy: v[2] as f64,
        goal_energy: v[3] as f64,
        protected_goal_energy: v[4] as f64,
    }
}

/// Mean score over the evaluation seeds; lower is better.
fn evaluate(cfg: &SimConfig, base_seed: u64) -> Result<f64> {
    let mut total = 0.0;
    for s in 0..SEEDS_PER_EVAL {
        let out = simulate_run(cfg, base_seed.wrapping_add(s))?;
        let r = &out.record;
        // A request that never completes is worse than any completed
        // one, so PFR carries the most weight; an unknown EFR (nothing
        // completed) scores as the worst case.
        total += 10.0 * r.pfr + r.efr.unwrap_or(1.0) + r.ct_s / 100.0;
    }
    Ok(total / SEEDS_PER_EVAL as f64)
}

/// The neutral default seeds the search; modes whose ordering it
/// violates start from a uniform redraw inside the constraint instead.
fn starting_point(mode: TuningMode, rng: &mut ChaCha8Rng) -> [i64; 5] {
    let neutral = to_ints(&GlobalParams::c1());
    if mode.constraint_holds(&to_params(neutral)) {
        return neutral;
    }
    loop {
        let mut v = [0i64; 5];
        for slot in &mut v {
            *slot = rng.gen_range(PARAM_MIN..=PARAM_MAX);
        }
        if mode.constraint_holds(&to_params(v)) {
            return v;
        }
    }
}

/// Climb until the run budget is exhausted: nudge one parameter a few
/// integer steps, keep the change only when the score strictly
/// improves and the mode's ordering constraint still holds.
pub fn hill_climb(
    base: &SimConfig,
    mode: TuningMode,
    run_budget: u64,
    seed: u64,
) -> Result<SearchOutcome> {
    let mut cfg = base.clone();
    cfg.mode = RunMode::Adaptability;
    cfg.user_count = cfg.user_count.max(2);
    cfg.config_id = "learned".to_owned();

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_CA11);
    let mut current = starting_point(mode, &mut rng);
    cfg.params = to_params(current);
    let mut best_score = evaluate(&cfg, seed)?;
    let mut spent = SEEDS_PER_EVAL;
    let mut accepted = 0u32;

    while spent + SEEDS_PER_EVAL <= run_budget {
        // Propose an in-constraint neighbour without spending budget.
        let mut candidate;
        let mut tries = 0;
        loop {
            let axis = rng.gen_range(0..5);
            let delta: i64 = [-3, -2, -1, 1, 2, 3][rng.gen_range(0..6)];
            candidate = current;
            candidate[axis] = (candidate[axis] + delta).clamp(PARAM_MIN, PARAM_MAX);
            if candidate != current && mode.constraint_holds(&to_params(candidate)) {
                break;
            }
            tries += 1;
            if tries > 64 {
                // Cornered (e.g. every move clamps back); stop early.
                let best = tune_parameters(mode, to_params(current))?;
                return Ok(SearchOutcome {
                    best,
                    score: best_score,
                    simulation_runs: spent,
                    candidates_accepted: accepted,
                });
            }
        }
        cfg.params = to_params(candidate);
        let score = evaluate(&cfg, seed)?;
        spent += SEEDS_PER_EVAL;
        if score < best_score {
            best_score = score;
            current = candidate;
            accepted += 1;
            log::info!(
                "accepted {:?} score {best_score:.4} after {spent} runs",
                candidate
            );
        }
    }

    let best = tune_parameters(mode, to_params(current))?;
    Ok(SearchOutcome {
        best,
        score: best_score,
        simulation_runs: spent,
        candidates_accepted: accepted,
    })
}
