//! Semantic memory: a small spreading-activation concept network.
//!
//! Nodes are concepts; undirected links carry a *conceptual length* in
//! (0, 1] — the shorter the link, the closer the concepts. Activation
//! spreads each cycle from nodes above the activation threshold to
//! their neighbours,
//!
//! ```text
//! B_i ← clip( B_i + Σ_{j active, j~i} (k − L_{i,j}),  0, ceiling )
//! ```
//!
//! and decays multiplicatively between cycles. Nodes may carry a
//! premise ("home is a place"); whenever such a node is above
//! threshold, its premise is offered to the rest of the architecture
//! as a semantic association. Link lengths are not static: a link
//! whose endpoints are repeatedly active together shrinks, so often
//! co-used concepts drift closer.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::{Premise, PremiseSet};

/// Network constants. The activation scale is 0–100 with the
/// threshold half-way; the per-neighbour gain `k` is 1.0, so spreading
/// modulates rather than drives — threshold crossings come from being
/// cued directly or from many co-active neighbours.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SlipnetConfig {
    pub ceiling: f64,
    pub activation_threshold: f64,
    /// `k` in the update rule.
    pub link_gain: f64,
    /// Multiplicative decay applied by [`Slipnet::decay`].
    pub decay_factor: f64,
    /// Link shrink factor applied when both endpoints are active.
    pub shrink_factor: f64,
    pub min_length: f64,
    /// Activation added to a node matched by a cue premise.
    pub cue_boost: f64,
}

impl Default for SlipnetConfig {
    fn default() -> Self {
        Self {
            ceiling: 100.0,
            activation_threshold: 50.0,
            link_gain: 1.0,
            decay_factor: 0.9,
            shrink_factor: 0.95,
            min_length: 0.05,
            cue_boost: 60.0,
        }
    }
}

/// One concept. `emits` is the premise the node contributes while
/// active, if it asserts anything beyond its own existence.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SlipnetNode {
    pub concept: String,
    pub activation: f64,
    pub emits: Option<Premise>,
}

/// Undirected link between two nodes, by index.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SlipnetLink {
    pub a: usize,
    pub b: usize,
    pub length: f64,
}

/// The network.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Slipnet {
    config: SlipnetConfig,
    nodes: Vec<SlipnetNode>,
    index: BTreeMap<String, usize>,
    links: Vec<SlipnetLink>,
}

impl Slipnet {
    pub fn new(config: SlipnetConfig) -> Self {
        Self { config, nodes: Vec::new(), index: BTreeMap::new(), links: Vec::new() }
    }

    pub fn config(&self) -> &SlipnetConfig {
        &self.config
    }

    /// Add a concept node (idempotent on the concept name). Returns its
    /// index.
    pub fn add_node(&mut self, concept: impl Into<String>, emits: Option<Premise>) -> usize {
        let concept = concept.into();
        if let Some(&i) = self.index.get(&concept) {
            if emits.is_some() {
                self.nodes[i].emits = emits;
            }
            return i;
        }
        let i = self.nodes.len();
        self.index.insert(concept.clone(), i);
        self.nodes.push(SlipnetNode { concept, activation: 0.0, emits });
        i
    }

    /// Link two concepts at the given conceptual length (must be
    /// positive; clamped up to the configured minimum).
    pub fn add_link(&mut self, a: &str, b: &str, length: f64) {
        assert!(length > 0.0, "conceptual length must be positive");
        let a = self.add_node(a, None);
        let b = self.add_node(b, None);
        let length = length.max(self.config.min_length);
        self.links.push(SlipnetLink { a, b, length });
    }

    pub fn activation(&self, concept: &str) -> Option<f64> {
        self.index.get(concept).map(|&i| self.nodes[i].activation)
    }

    /// Force a node's activation (tests and snapshot restore).
    pub fn set_activation(&mut self, concept: &str, value: f64) {
        if let Some(&i) = self.index.get(concept) {
            self.nodes[i].activation = value.clamp(0.0, self.config.ceiling);
        }
    }

    /// Boost every node whose concept appears as the key or the value
    /// of a cue premise.
    pub fn cue(&mut self, premises: &PremiseSet) {
        let ceiling = self.config.ceiling;
        let boost = self.config.cue_boost;
        for p in premises {
            for name in [&p.key, &p.value] {
                if let Some(&i) = self.index.get(name) {
                    let node = &mut self.nodes[i];
                    node.activation = (node.activation + boost).min(ceiling);
                }
            }
        }
    }

    /// One spreading step: every node gains `k − L` per active
    /// neighbour, computed from the pre-step activations, then clips to
    /// [0, ceiling]. Afterwards, links whose endpoints are both active
    /// shrink by the configured factor (down to the minimum length).
    pub fn spread(&mut self) {
        let threshold = self.config.activation_threshold;
        let k = self.config.link_gain;
        let before: Vec<f64> = self.nodes.iter().map(|n| n.activation).collect();
        let mut delta = vec![0.0f64; self.nodes.len()];
        for link in &self.links {
            if before[link.a] > threshold {
                delta[link.b] += k - link.length;
            }
            if before[link.b] > threshold {
                delta[link.a] += k - link.length;
            }
        }
        for (node, d) in self.nodes.iter_mut().zip(delta) {
            node.activation = (node.activation + d).clamp(0.0, self.config.ceiling);
        }
        let shrink = self.config.shrink_factor;
        let min_len = self.config.min_length;
        for link in &mut self.links {
            if self.nodes[link.a].activation > threshold
                && self.nodes[link.b].activation > threshold
            {
                link.length = (link.length * shrink).max(min_len);
            }
        }
    }

    /// Multiplicative decay, applied once per cognitive cycle outside
    /// the spreading step.
    pub fn decay(&mut self) {
        for node in &mut self.nodes {
            node.activation *= self.config.decay_factor;
        }
    }

    /// Premises carried by currently active nodes.
    pub fn emissions(&self) -> PremiseSet {
        self.nodes
            .iter()
            .filter(|n| n.activation > self.config.activation_threshold)
            .filter_map(|n| n.emits.clone())
            .collect()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn total_activation(&self) -> f64 {
        self.nodes.iter().map(|n| n.activation).sum()
    }

    pub fn link_length(&self, a: &str, b: &str) -> Option<f64> {
        let ia = *self.index.get(a)?;
        let ib = *self.index.get(b)?;
        self.links
            .iter()
            .find(|l| (l.a == ia && l.b == ib) || (l.a == ib && l.b == ia))
            .map(|l| l.length)
    }

    pub(crate) fn nodes(&self) -> &[SlipnetNode] {
        &self.nodes
    }

    pub(crate) fn links(&self) -> &[SlipnetLink] {
        &self.links
    }

    pub(crate) fn restore(
        config: SlipnetConfig,
        nodes: Vec<SlipnetNode>,
        links: Vec<SlipnetLink>,
    ) -> Self {
        let index =
            nodes.iter().enumerate().map(|(i, n)| (n.concept.clone(), i)).collect();
        Self { config, nodes, index, links }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::premises;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn net() -> Slipnet {
        Slipnet::new(SlipnetConfig::default())
    }

    #[test]
    fn one_active_neighbour_contributes_gain_minus_length() {
        let mut s = net();
        s.add_node("a", None);
        s.add_node("b", None);
        s.add_link("a", "b", 0.5);
        s.set_activation("a", 80.0);
        s.spread();
        // k = 1, L = 0.5 → b gains 0.5; a has no active neighbour.
        assert_relative_eq!(s.activation("b").unwrap(), 0.5);
        assert_relative_eq!(s.activation("a").unwrap(), 80.0);
    }

    #[test]
    fn contributions_sum_over_active_neighbours() {
        let mut s = net();
        s.add_link("x", "m", 0.2);
        s.add_link("y", "m", 0.9);
        s.set_activation("x", 60.0);
        s.set_activation("y", 60.0);
        s.spread();
        // (1 − 0.2) + (1 − 0.9) = 0.9.
        assert_relative_eq!(s.activation("m").unwrap(), 0.9);
    }

    #[test]
    fn isolated_node_is_untouched_by_spreading() {
        let mut s = net();
        s.add_node("lonely", None);
        s.set_activation("lonely", 42.0);
        s.spread();
        assert_relative_eq!(s.activation("lonely").unwrap(), 42.0);
    }

    #[test]
    fn activation_is_clipped_at_the_ceiling() {
        let mut s = net();
        s.add_link("a", "b", 0.1);
        s.set_activation("a", 100.0);
        s.set_activation("b", 99.8);
        s.spread();
        assert_relative_eq!(s.activation("b").unwrap(), 100.0);
    }

    #[test]
    fn decay_is_a_separate_multiplicative_step() {
        let mut s = net();
        s.add_node("a", None);
        s.set_activation("a", 50.0);
        s.decay();
        assert_relative_eq!(s.activation("a").unwrap(), 45.0);
    }

    #[test]
    fn co_active_endpoints_shrink_their_link() {
        let mut s = net();
        s.add_link("a", "b", 0.4);
        s.set_activation("a", 90.0);
        s.set_activation("b", 90.0);
        s.spread();
        assert_relative_eq!(s.link_length("a", "b").unwrap(), 0.4 * 0.95);
        // Repeated co-activity bottoms out at the minimum length.
        for _ in 0..100 {
            s.set_activation("a", 90.0);
            s.set_activation("b", 90.0);
            s.spread();
        }
        assert_relative_eq!(s.link_length("a", "b").unwrap(), 0.05);
    }

    #[test]
    fn cued_concept_emits_its_premise() {
        let mut s = net();
        s.add_node("home", Some(Premise::new("home", "is-a-place")));
        s.add_node("place", None);
        s.add_link("home", "place", 0.1);
        // The premise ⟨place,home⟩ names both concepts; "home" carries
        // the association.
        s.cue(&premises([("place", "home")]));
        s.spread();
        let out = s.emissions();
        assert!(out.contains(&Premise::new("home", "is-a-place")));
    }

    #[test]
    fn inactive_nodes_stay_silent() {
        let mut s = net();
        s.add_node("home", Some(Premise::new("home", "is-a-place")));
        s.set_activation("home", 49.0);
        assert!(s.emissions().is_empty());
    }

    proptest! {
        /// Total activation never exceeds nodeCount · ceiling, whatever
        /// the topology and starting state.
        #[test]
        fn total_activation_is_bounded(
            activations in proptest::collection::vec(0.0f64..100.0, 2..8),
            lengths in proptest::collection::vec(0.05f64..1.0, 1..12),
        ) {
            let mut s = net();
            let n = activations.len();
            for i in 0..n {
                s.add_node(format!("n{i}"), None);
            }
            for (e, len) in lengths.iter().enumerate() {
                let a = e % n;
                let b = (e + 1) % n;
                if a != b {
                    s.add_link(&format!("n{a}"), &format!("n{b}"), *len);
                }
            }
            for (i, act) in activations.iter().enumerate() {
                s.set_activation(&format!("n{i}"), *act);
            }
            for _ in 0..5 {
                s.spread();
                prop_assert!(s.total_activation() <= n as f64 * 100.0 + 1e-9);
            }
        }
    }
}
