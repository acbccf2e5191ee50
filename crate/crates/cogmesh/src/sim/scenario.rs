//! Seeded scenario construction: the service catalog, the request
//! chains, and the trigger/ambient context facts a run presents to its
//! requesters.
//!
//! Generated catalogs encode each composition as a premise relay: every
//! chain service consumes the current leg premise and asserts the next
//! one, so the plan emerges from situation-driven selection rather than
//! from an explicit planner. Because the input leg is consumed, a chain
//! step can never run twice: its trigger is physically gone once it has
//! fired.
//!
//! Catalogs with room also carry an alternative tail that relays through
//! b-legs to a second target. Its entry services hook every leg from the
//! switch point onward but additionally require a plan-revision premise
//! that only a goal switch makes observable — so the branch is inert
//! until the user actually changes their mind, and the old tail running
//! a step further never strands the new goal.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::domain::{
    AbstractId, AbstractService, Catalog, ConcreteId, ConcreteService, DeviceId, Premise,
    PremiseSet, QosDirection, QosVector,
};

use super::SimConfig;

/// Ambient context facts available to generated scenarios.
pub const CTX_POOL: usize = 4;

/// Bounds for per-realizer execution latency (seconds).
const EXEC_LATENCY_RANGE: (f64, f64) = (0.3, 1.2);

/// The premise a goal switch makes observable. Alternative-tail services
/// require it, so they cannot fire while the original request stands.
pub fn plan_revised() -> Premise {
    Premise::new("plan", "revised")
}

/// A run's world description: who offers what, and which premise each
/// request chain must ultimately assert.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub catalog: Arc<Catalog>,
    pub chain_a: Vec<AbstractId>,
    pub chain_b: Vec<AbstractId>,
    /// Final premise of the primary chain (the request's target).
    pub target_a: Premise,
    /// Final premise of the branch chain (the post-switch target).
    pub target_b: Premise,
    /// Facts presented only at request start (the trigger).
    pub start_context: Vec<(String, String)>,
    /// Facts re-presented periodically while a request runs.
    pub ambient_context: Vec<(String, String)>,
    /// Model execution time per realizer.
    pub exec_latency_s: BTreeMap<ConcreteId, f64>,
}

impl Scenario {
    /// Build a seeded catalog at the configured scale, hosted across
    /// `providers`.
    pub fn generate(config: &SimConfig, providers: &[DeviceId], rng: &mut ChaCha8Rng) -> Scenario {
        assert!(!providers.is_empty(), "generated scenarios need providers");
        let cl = config.composition_length as usize;
        let mid = config.composition_length.div_ceil(2) as usize;
        // The branch needs an entry hook per post-switch a-leg plus the
        // b-relays between them.
        let branch = 2 * (cl - mid);
        let tail = if config.abstract_services as usize >= cl + branch { branch } else { 0 };

        let mut catalog = Catalog::new();
        let mut exec_latency_s = BTreeMap::new();
        let mut chain_a = Vec::with_capacity(cl);
        let mut chain_b = Vec::new();

        let leg = |side: char, index: usize| Premise::new("leg", format!("{side}{index}"));

        // Primary chain: task-i relays leg a{i} to leg a{i+1}.
        for i in 0..cl {
            let id = AbstractId(format!("task-{i}"));
            let mut pre = PremiseSet::from([leg('a', i)]);
            extend_with_context(&mut pre, config, rng);
            let add = PremiseSet::from([leg('a', i + 1)]);
            let del = PremiseSet::from([leg('a', i)]);
            register_service(
                &mut catalog,
                &mut exec_latency_s,
                id.clone(),
                pre,
                add,
                del,
                config,
                providers,
                rng,
            );
            chain_a.push(id);
        }

        if tail > 0 {
            // Entry hooks: wherever the old tail has advanced to, one
            // revision-gated service turns that a-leg into a b-leg.
            for j in mid..=cl {
                let id = AbstractId(format!("alt-{j}"));
                let mut pre = PremiseSet::from([leg('a', j), plan_revised()]);
                extend_with_context(&mut pre, config, rng);
                let add = PremiseSet::from([leg('b', (j + 1).min(cl))]);
                let del = PremiseSet::from([leg('a', j)]);
                register_service(
                    &mut catalog,
                    &mut exec_latency_s,
                    id.clone(),
                    pre,
                    add,
                    del,
                    config,
                    providers,
                    rng,
                );
            }
            // Relays along the alternative tail itself.
            for j in mid + 1..cl {
                let id = AbstractId(format!("btask-{j}"));
                let mut pre = PremiseSet::from([leg('b', j)]);
                extend_with_context(&mut pre, config, rng);
                let add = PremiseSet::from([leg('b', j + 1)]);
                let del = PremiseSet::from([leg('b', j)]);
                register_service(
                    &mut catalog,
                    &mut exec_latency_s,
                    id.clone(),
                    pre,
                    add,
                    del,
                    config,
                    providers,
                    rng,
                );
            }
            chain_b.extend(chain_a[..mid].iter().cloned());
            chain_b.push(AbstractId(format!("alt-{mid}")));
            chain_b.extend((mid + 1..cl).map(|j| AbstractId(format!("btask-{j}"))));
        } else {
            chain_b = chain_a.clone();
        }

        // Distractors fill the catalog to the configured size; their
        // trigger premises never occur, so they compete for attention
        // without ever being executable.
        let used = cl + tail;
        for m in 0..(config.abstract_services as usize).saturating_sub(used) {
            let id = AbstractId(format!("aux-{m}"));
            let mut pre = PremiseSet::from([Premise::new(format!("aux-need-{m}"), "up")]);
            extend_with_context(&mut pre, config, rng);
            let add = PremiseSet::from([Premise::new(format!("aux-out-{m}"), "done")]);
            register_service(
                &mut catalog,
                &mut exec_latency_s,
                id,
                pre,
                add,
                PremiseSet::new(),
                config,
                providers,
                rng,
            );
        }

        let target_a = leg('a', cl);
        let target_b = if tail > 0 { leg('b', cl) } else { leg('a', cl) };
        Scenario {
            catalog: Arc::new(catalog),
            chain_a,
            chain_b,
            target_a,
            target_b,
            start_context: vec![("leg".to_owned(), "a0".to_owned())],
            ambient_context: (0..CTX_POOL).map(|k| (format!("ctx-{k}"), "ok".to_owned())).collect(),
            exec_latency_s,
        }
    }
}

/// Add `conds − 1` ambient context premises to a precondition set,
/// with the count drawn uniformly from the configured range.
fn extend_with_context(pre: &mut PremiseSet, config: &SimConfig, rng: &mut ChaCha8Rng) {
    let conds = rng.gen_range(config.conds_min..=config.conds_max) as usize;
    let mut pool: Vec<usize> = (0..CTX_POOL).collect();
    pool.shuffle(rng);
    for k in pool.into_iter().take(conds.saturating_sub(1)) {
        pre.insert(Premise::new(format!("ctx-{k}"), "ok"));
    }
}

/// Register one abstract service with its full realizer set. Every
/// realizer carries the abstract conditions verbatim, hosts are spread
/// over distinct providers, and QoS is drawn per realizer.
#[allow(clippy::too_many_arguments)]
fn register_service(
    catalog: &mut Catalog,
    exec_latency_s: &mut BTreeMap<ConcreteId, f64>,
    id: AbstractId,
    pre: PremiseSet,
    add: PremiseSet,
    del: PremiseSet,
    config: &SimConfig,
    providers: &[DeviceId],
    rng: &mut ChaCha8Rng,
) {
    let copies = config.concrete_per_abstract as usize;
    let mut hosts: Vec<DeviceId> = providers.to_vec();
    hosts.shuffle(rng);
    let mut realizers = Vec::with_capacity(copies);
    for q in 0..copies {
        let cid = ConcreteId(format!("{}-r{q}", id.0));
        let host = hosts[q % hosts.len()];
        let accuracy = rng.gen_range(0.5..1.0);
        let latency = rng.gen_range(EXEC_LATENCY_RANGE.0..EXEC_LATENCY_RANGE.1);
        exec_latency_s.insert(cid.clone(), latency);
        catalog
            .register_concrete(ConcreteService {
                id: cid.clone(),
                realizes: id.clone(),
                inputs: Vec::new(),
                outputs: Vec::new(),
                preconditions: pre.clone(),
                postconditions: add.clone(),
                qos: QosVector::new()
                    .with("accuracy", accuracy, QosDirection::HigherBetter)
                    .with("latency", latency, QosDirection::LowerBetter),
                context: PremiseSet::new(),
                host,
            })
            .expect("generated concrete ids are unique");
        realizers.push(cid);
    }
    catalog
        .register_abstract(AbstractService {
            id,
            preconditions: pre,
            add_list: add,
            del_list: del,
            realizers,
        })
        .expect("realizers mirror the abstract conditions");
}

/// The six-step shopping errand on one device: locating the user,
/// finding a market, comparing distances, choosing who goes, sharing
/// the list, and heading out. Used as the emergent-chaining fixture.
pub fn shopping_errand(host: DeviceId) -> Scenario {
    let steps: [(&str, (&str, &str), (&str, &str)); 6] = [
        ("get-location", ("party-plan", "active"), ("user-location", "known")),
        ("find-place", ("user-location", "known"), ("market-located", "yes")),
        ("calculate-distance", ("market-located", "yes"), ("distance-known", "yes")),
        ("who-is-nearer", ("distance-known", "yes"), ("nearest-user", "chosen")),
        ("share-shopping-list", ("nearest-user", "chosen"), ("list-shared", "yes")),
        ("go-to-place", ("list-shared", "yes"), ("at-market", "yes")),
    ];
    let mut catalog = Catalog::new();
    let mut exec_latency_s = BTreeMap::new();
    let mut chain = Vec::with_capacity(steps.len());
    for (name, pre, post) in steps {
        let id = AbstractId(name.to_owned());
        let cid = ConcreteId(format!("{name}-impl"));
        let pre = PremiseSet::from([Premise::new(pre.0, pre.1)]);
        let add = PremiseSet::from([Premise::new(post.0, post.1)]);
        let del = pre.clone();
        exec_latency_s.insert(cid.clone(), 0.1);
        catalog
            .register_concrete(ConcreteService {
                id: cid.clone(),
                realizes: id.clone(),
                inputs: Vec::new(),
                outputs: Vec::new(),
                preconditions: pre.clone(),
                postconditions: add.clone(),
                qos: QosVector::new()
                    .with("accuracy", 0.9, QosDirection::HigherBetter)
                    .with("latency", 0.1, QosDirection::LowerBetter),
                context: PremiseSet::new(),
                host,
            })
            .expect("errand ids are unique");
        catalog
            .register_abstract(AbstractService {
                id: id.clone(),
                preconditions: pre,
                add_list: add,
                del_list: del,
                realizers: vec![cid],
            })
            .expect("errand realizer mirrors its abstract");
        chain.push(id);
    }
    Scenario {
        catalog: Arc::new(catalog),
        chain_a: chain.clone(),
        chain_b: chain,
        target_a: Premise::new("at-market", "yes"),
        target_b: Premise::new("at-market", "yes"),
        start_context: vec![("party-plan".to_owned(), "active".to_owned())],
        ambient_context: Vec::new(),
        exec_latency_s,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::RunMode;
    use rand::SeedableRng;

    fn providers(n: u32) -> Vec<DeviceId> {
        (1..=n).map(DeviceId).collect()
    }

    fn generate(seed: u64, config: &SimConfig) -> Scenario {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Scenario::generate(config, &providers(20), &mut rng)
    }

    #[test]
    fn chains_relay_leg_premises_in_order() {
        let config = SimConfig::default();
        let s = generate(1, &config);
        assert_eq!(s.chain_a.len(), 5);
        for (i, id) in s.chain_a.iter().enumerate() {
            let svc = s.catalog.abstract_service(id).unwrap();
            assert!(svc.preconditions.contains(&Premise::new("leg", format!("a{i}"))));
            assert!(svc.add_list.contains(&Premise::new("leg", format!("a{}", i + 1))));
            // The relay consumes its input, so a step can never rerun.
            assert!(svc.del_list.contains(&Premise::new("leg", format!("a{i}"))));
        }
        assert_eq!(s.target_a, Premise::new("leg", "a5"));
    }

    #[test]
    fn branch_tail_hooks_at_the_switch_leg() {
        let config = SimConfig {
            mode: RunMode::Adaptability,
            user_count: 2,
            ..SimConfig::default()
        };
        let s = generate(2, &config);
        assert_eq!(s.chain_b.len(), 5);
        // Shared prefix, then the first branch service consumes the
        // mid-chain leg.
        assert_eq!(s.chain_b[..3], s.chain_a[..3]);
        let first_alt = s.catalog.abstract_service(&s.chain_b[3]).unwrap();
        assert!(first_alt.preconditions.contains(&Premise::new("leg", "a3")));
        assert!(first_alt.del_list.contains(&Premise::new("leg", "a3")));
        assert_eq!(s.target_b, Premise::new("leg", "b5"));
    }

    #[test]
    fn every_post_switch_leg_has_a_revision_gated_hook() {
        let s = generate(2, &SimConfig::default());
        for j in 3..=5 {
            let hook = s.catalog.abstract_service(&AbstractId(format!("alt-{j}"))).unwrap();
            assert!(hook.preconditions.contains(&Premise::new("leg", format!("a{j}"))));
            assert!(hook.preconditions.contains(&plan_revised()));
            let lands = Premise::new("leg", format!("b{}", (j + 1).min(5)));
            assert!(hook.add_list.contains(&lands));
        }
        // Nothing outside the alternative tail's entry hooks requires the
        // revision premise, and nothing else produces b-legs.
        for svc in s.catalog.abstracts() {
            if !svc.id.0.starts_with("alt-") {
                assert!(!svc.preconditions.contains(&plan_revised()), "{:?}", svc.id);
            }
            if !svc.id.0.starts_with("alt-") && !svc.id.0.starts_with("btask-") {
                assert!(
                    svc.add_list.iter().all(|p| !(p.key == "leg" && p.value.starts_with('b'))),
                    "{:?} asserts a b-leg",
                    svc.id
                );
            }
        }
    }

    #[test]
    fn precondition_counts_respect_the_configured_range() {
        let config = SimConfig::default();
        let s = generate(3, &config);
        for svc in s.catalog.abstracts() {
            let n = svc.preconditions.len();
            assert!(
                (config.conds_min as usize..=config.conds_max as usize).contains(&n),
                "{:?} has {n} preconditions",
                svc.id
            );
        }
    }

    #[test]
    fn catalogs_hit_the_configured_scale() {
        let config = SimConfig::default();
        let s = generate(4, &config);
        assert_eq!(s.catalog.abstract_count(), 10);
        assert_eq!(s.catalog.concrete_count(), 40);
        for svc in s.catalog.abstracts() {
            assert_eq!(svc.realizers.len(), 4);
            let hosts: std::collections::BTreeSet<DeviceId> =
                s.catalog.realizers_of(&svc.id).map(|c| c.host).collect();
            assert_eq!(hosts.len(), 4, "realizers of {:?} share hosts", svc.id);
        }
        for latency in s.exec_latency_s.values() {
            assert!((EXEC_LATENCY_RANGE.0..EXEC_LATENCY_RANGE.1).contains(latency));
        }
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        let config = SimConfig::default();
        let (a, b) = (generate(9, &config), generate(9, &config));
        let ids = |s: &Scenario| {
            s.catalog
                .concretes()
                .map(|c| (c.id.clone(), c.host, format!("{:?}", c.qos)))
                .collect::<Vec<_>>()
        };
        assert_eq!(ids(&a), ids(&b));
    }

    #[test]
    fn errand_chain_is_the_six_named_steps() {
        let s = shopping_errand(DeviceId(7));
        let names: Vec<&str> = s.chain_a.iter().map(|a| a.0.as_str()).collect();
        assert_eq!(
            names,
            [
                "get-location",
                "find-place",
                "calculate-distance",
                "who-is-nearer",
                "share-shopping-list",
                "go-to-place"
            ]
        );
        assert!(s.catalog.concretes().all(|c| c.host == DeviceId(7)));
    }
}
