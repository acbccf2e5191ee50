//! Premise ↔ bit-code codec for the episodic memories.
//!
//! Each premise symbol gets a pseudo-random high-dimensional code,
//! derived deterministically from the scenario seed and the premise
//! text, and remembered in a codebook. Distinct premises land ~n/2
//! bits apart (near-orthogonal), so codes double as addresses.
//! Decoding finds the nearest codebook entry and accepts it only
//! within a radius — a vector far from every known premise decodes to
//! nothing rather than to noise.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::declarative::sdm::BitCode;
use crate::domain::Premise;

/// Stable 64-bit FNV-1a, used to fold premise text into the seed so
/// codes don't depend on encode order or process-level hash state.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Seeded random-projection codebook.
pub struct Codec {
    bits: usize,
    seed: u64,
    decode_radius: u32,
    book: BTreeMap<Premise, BitCode>,
}

impl Codec {
    pub fn new(bits: usize, decode_radius: u32, seed: u64) -> Self {
        Self { bits, seed, decode_radius, book: BTreeMap::new() }
    }

    /// Codec sized for the default 256-bit memories: accept decodes
    /// within a quarter of the address length.
    pub fn with_seed(seed: u64) -> Self {
        Self::new(256, 64, seed)
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    fn derive(&self, premise: &Premise) -> BitCode {
        let mut h = fnv1a(premise.key.as_bytes());
        h ^= fnv1a(premise.value.as_bytes()).rotate_left(32);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ h);
        BitCode::random(self.bits, &mut rng)
    }

    /// Code for a premise, interning it in the codebook. The code is a
    /// pure function of (seed, premise), so interning order is
    /// irrelevant.
    pub fn encode(&mut self, premise: &Premise) -> BitCode {
        if let Some(code) = self.book.get(premise) {
            return code.clone();
        }
        let code = self.derive(premise);
        self.book.insert(premise.clone(), code.clone());
        code
    }

    /// Pre-register a premise so vectors can decode to it even before
    /// it is ever encoded (scenario premise alphabets do this up
    /// front).
    pub fn register(&mut self, premise: &Premise) {
        self.encode(premise);
    }

    /// Nearest-codebook decode, or `None` when nothing is close
    /// enough. Distance ties resolve to the lexicographically smallest
    /// premise.
    pub fn decode(&self, code: &BitCode) -> Option<Premise> {
        let mut best: Option<(u32, &Premise)> = None;
        for (premise, known) in &self.book {
            let d = known.hamming(code);
            let better = match best {
                None => true,
                Some((bd, _)) => d < bd,
            };
            if better {
                best = Some((d, premise));
            }
        }
        match best {
            Some((d, premise)) if d <= self.decode_radius => Some(premise.clone()),
            _ => None,
        }
    }

    pub fn known_premises(&self) -> impl Iterator<Item = &Premise> {
        self.book.keys()
    }

    pub fn len(&self) -> usize {
        self.book.len()
    }

    pub fn is_empty(&self) -> bool {
        self.book.is_empty()
    }

    pub(crate) fn seed(&self) -> u64 {
        self.seed
    }

    pub(crate) fn decode_radius(&self) -> u32 {
        self.decode_radius
    }

    pub(crate) fn entries(&self) -> impl Iterator<Item = (&Premise, &BitCode)> {
        self.book.iter()
    }

    pub(crate) fn restore(
        bits: usize,
        decode_radius: u32,
        seed: u64,
        book: BTreeMap<Premise, BitCode>,
    ) -> Self {
        Self { bits, seed, decode_radius, book }
    }
}
