//! Sparse distributed memory: a content-addressable episodic store.
//!
//! The memory owns `H` *hard locations*, each a random n-bit address
//! with n signed counters. Writing a pattern touches every location
//! within a Hamming radius of the write address and nudges its
//! counters bit-wise (+1 for a one, −1 for a zero, saturating). Reading
//! majority-votes the counters of the locations around the cue, then
//! feeds the result back as the next cue — up to ten steps or until the
//! readout reproduces itself. A readout whose votes tie on more than a
//! quarter of the bits is treated as silence (no recall): that is what
//! an empty or hopelessly ambiguous memory looks like.
//!
//! Addresses and contents are distinct, so the store works both
//! auto-associatively (pattern stored at itself) and as an associative
//! chain (outcome stored at the address of its context).

use rand::RngCore;

/// Fixed-length bit vector backed by 64-bit words.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitCode {
    words: Vec<u64>,
    len: usize,
}

impl BitCode {
    pub fn zeros(len: usize) -> Self {
        assert!(len > 0, "bit code length must be positive");
        Self { words: vec![0; len.div_ceil(64)], len }
    }

    /// Uniformly random code.
    pub fn random(len: usize, rng: &mut impl RngCore) -> Self {
        let mut code = Self::zeros(len);
        for w in &mut code.words {
            *w = rng.next_u64();
        }
        code.mask_tail();
        code
    }

    fn mask_tail(&mut self) {
        let tail = self.len % 64;
        if tail != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << tail) - 1;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, bit: bool) {
        debug_assert!(i < self.len);
        let mask = 1u64 << (i % 64);
        if bit {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn flip(&mut self, i: usize) {
        debug_assert!(i < self.len);
        self.words[i / 64] ^= 1u64 << (i % 64);
    }

    /// Number of differing bits.
    pub fn hamming(&self, other: &BitCode) -> u32 {
        debug_assert_eq!(self.len, other.len);
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }

    pub(crate) fn words(&self) -> &[u64] {
        &self.words
    }

    pub(crate) fn from_words(words: Vec<u64>, len: usize) -> Self {
        let mut code = Self { words, len };
        code.mask_tail();
        code
    }
}

impl std::fmt::Debug for BitCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BitCode[{}b:", self.len)?;
        for w in &self.words {
            write!(f, "{w:016x}")?;
        }
        write!(f, "]")
    }
}

/// Sizing and readout parameters.
///
/// Defaults are classic small-Kanerva values: 256-bit addresses, 1000
/// hard locations, and an access radius of 111 bits, which activates
/// about 2% of the locations per access (≈ 20) — enough that a write
/// practically never falls into dead air and modest cue noise still
/// overlaps the written set.
#[derive(Clone, Debug, PartialEq)]
pub struct SdmConfig {
    pub address_bits: usize,
    pub locations: usize,
    pub access_radius: u32,
    pub max_iterations: usize,
    /// Readouts with more than this fraction of tied bits count as
    /// silence.
    pub tie_fraction: f64,
}

impl Default for SdmConfig {
    fn default() -> Self {
        Self {
            address_bits: 256,
            locations: 1000,
            access_radius: 111,
            max_iterations: 10,
            tie_fraction: 0.25,
        }
    }
}

/// Outcome of a retrieval.
#[derive(Clone, Debug, PartialEq)]
pub enum Recall {
    Hit(BitCode),
    /// The votes tied on too many bits (count reported), or no location
    /// fell within the access radius of the cue.
    NoRecall { tie_bits: usize },
}

impl Recall {
    pub fn hit(&self) -> Option<&BitCode> {
        match self {
            Recall::Hit(code) => Some(code),
            Recall::NoRecall { .. } => None,
        }
    }
}

/// The memory itself: hard-location addresses plus their counters.
pub struct Sdm {
    config: SdmConfig,
    addresses: Vec<BitCode>,
    counters: Vec<Vec<i8>>,
    writes: u64,
}

impl Sdm {
    /// Allocate with random hard-location addresses drawn from `rng`.
    pub fn new(config: SdmConfig, rng: &mut impl RngCore) -> Self {
        let addresses: Vec<BitCode> =
            (0..config.locations).map(|_| BitCode::random(config.address_bits, rng)).collect();
        Self::with_addresses(config, addresses)
    }

    /// Allocate with caller-chosen addresses (small-instance oracles).
    pub fn with_addresses(config: SdmConfig, addresses: Vec<BitCode>) -> Self {
        assert_eq!(addresses.len(), config.locations);
        for a in &addresses {
            assert_eq!(a.len(), config.address_bits);
        }
        let counters = vec![vec![0i8; config.address_bits]; config.locations];
        Self { config, addresses, counters, writes: 0 }
    }

    pub fn config(&self) -> &SdmConfig {
        &self.config
    }

    pub fn writes(&self) -> u64 {
        self.writes
    }

    fn activated(&self, cue: &BitCode) -> Vec<usize> {
        self.addresses
            .iter()
            .enumerate()
            .filter(|(_, addr)| addr.hamming(cue) <= self.config.access_radius)
            .map(|(i, _)| i)
            .collect()
    }

    /// Store `content` at `address`; auto-associative callers pass the
    /// same code twice. Returns the number of locations touched.
    pub fn store(&mut self, address: &BitCode, content: &BitCode) -> usize {
        assert_eq!(address.len(), self.config.address_bits);
        assert_eq!(content.len(), self.config.address_bits);
        let hits = self.activated(address);
        for &loc in &hits {
            let row = &mut self.counters[loc];
            for (bit, counter) in row.iter_mut().enumerate() {
                if content.get(bit) {
                    *counter = counter.saturating_add(1);
                } else {
                    *counter = counter.saturating_sub(1);
                }
            }
        }
        self.writes += 1;
        hits.len()
    }

    /// One majority-vote readout at `cue`. Tied bits inherit the cue's
    /// bit so iteration stays deterministic.
    fn read_once(&self, cue: &BitCode) -> (BitCode, usize, usize) {
        let hits = self.activated(cue);
        let n = self.config.address_bits;
        let mut sums = vec![0i32; n];
        for &loc in &hits {
            for (bit, &counter) in self.counters[loc].iter().enumerate() {
                sums[bit] += i32::from(counter);
            }
        }
        let mut out = cue.clone();
        let mut ties = 0;
        for (bit, &sum) in sums.iter().enumerate() {
            match sum.cmp(&0) {
                std::cmp::Ordering::Greater => out.set(bit, true),
                std::cmp::Ordering::Less => out.set(bit, false),
                std::cmp::Ordering::Equal => ties += 1,
            }
        }
        (out, ties, hits.len())
    }

    /// Iterated retrieval. Returns the recall outcome and the total
    /// number of location touches (for the memory ledger).
    ///
    /// Iteration follows the associative chain: each clean readout is
    /// fed back as the next cue. A fixpoint is a hit; a step that turns
    /// tie-heavy *after* a clean readout means the chain simply ended,
    /// so the last clean readout is returned.
    pub fn retrieve(&self, cue: &BitCode) -> (Recall, usize) {
        assert_eq!(cue.len(), self.config.address_bits);
        let n = self.config.address_bits;
        let tie_limit = (self.config.tie_fraction * n as f64).floor() as usize;
        let mut touched = 0;
        let mut current = cue.clone();
        let mut last_clean: Option<BitCode> = None;
        for _ in 0..self.config.max_iterations.max(1) {
            let (out, ties, hits) = self.read_once(&current);
            touched += hits;
            if ties > tie_limit {
                return match last_clean {
                    Some(code) => (Recall::Hit(code), touched),
                    None => (Recall::NoRecall { tie_bits: ties }, touched),
                };
            }
            if Some(&out) == last_clean.as_ref() || out == current {
                return (Recall::Hit(out), touched);
            }
            current = out.clone();
            last_clean = Some(out);
        }
        (Recall::Hit(current), touched)
    }

    pub(crate) fn addresses(&self) -> &[BitCode] {
        &self.addresses
    }

    pub(crate) fn counters(&self) -> &[Vec<i8>] {
        &self.counters
    }

    pub(crate) fn restore(
        config: SdmConfig,
        addresses: Vec<BitCode>,
        counters: Vec<Vec<i8>>,
        writes: u64,
    ) -> Self {
        assert_eq!(addresses.len(), config.locations);
        assert_eq!(counters.len(), config.locations);
        Self { config, addresses, counters, writes }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn exact_cue_round_trip_is_lossless() {
        let mut r = rng(7);
        let mut mem = Sdm::new(SdmConfig::default(), &mut r);
        // 5% of the locations is the advertised clean-recall load.
        let patterns: Vec<BitCode> = (0..50).map(|_| BitCode::random(256, &mut r)).collect();
        for p in &patterns {
            let touched = mem.store(p, p);
            assert!(touched > 0, "write fell into dead air");
        }
        for p in &patterns {
            let (recall, _) = mem.retrieve(p);
            assert_eq!(recall.hit().expect("expected recall"), p, "bit errors on exact cue");
        }
    }

    #[test]
    fn noisy_cue_converges_to_the_stored_pattern() {
        let mut r = rng(11);
        let mut mem = Sdm::new(SdmConfig::default(), &mut r);
        let patterns: Vec<BitCode> = (0..20).map(|_| BitCode::random(256, &mut r)).collect();
        for p in &patterns {
            mem.store(p, p);
        }
        let mut cue = patterns[3].clone();
        for bit in (0..256).step_by(13).take(20) {
            cue.flip(bit);
        }
        let (recall, _) = mem.retrieve(&cue);
        assert_eq!(recall.hit().expect("expected recall"), &patterns[3]);
    }

    #[test]
    fn empty_memory_reports_no_recall() {
        let mut r = rng(3);
        let mem = Sdm::new(SdmConfig::default(), &mut r);
        let cue = BitCode::random(256, &mut r);
        let (recall, _) = mem.retrieve(&cue);
        assert_eq!(recall, Recall::NoRecall { tie_bits: 256 });
    }

    /// Tiny hand-built instance: two locations at the two stored
    /// patterns. A cue equidistant from both activates both, every
    /// counter vote cancels, and the memory stays silent.
    #[test]
    fn equidistant_cue_ties_out() {
        let n = 16;
        let config = SdmConfig {
            address_bits: n,
            locations: 2,
            access_radius: 8,
            ..SdmConfig::default()
        };
        let a = BitCode::zeros(n);
        let mut b = BitCode::zeros(n);
        for i in 0..n {
            b.set(i, true);
        }
        let mut mem = Sdm::with_addresses(config, vec![a.clone(), b.clone()]);
        mem.store(&a, &a);
        mem.store(&b, &b);
        let mut cue = BitCode::zeros(n);
        for i in 0..8 {
            cue.set(i, true); // Hamming 8 from both
        }
        let (recall, _) = mem.retrieve(&cue);
        assert!(matches!(recall, Recall::NoRecall { tie_bits: 16 }));
    }

    /// Same instance, cue nearer to one pattern: exhaustive distance
    /// check says only that pattern's location fires, so the readout is
    /// that pattern exactly.
    #[test]
    fn cue_near_one_of_two_patterns_recalls_it() {
        let n = 16;
        let config = SdmConfig {
            address_bits: n,
            locations: 2,
            access_radius: 4,
            ..SdmConfig::default()
        };
        let a = BitCode::zeros(n);
        let mut b = BitCode::zeros(n);
        for i in 0..n {
            b.set(i, true);
        }
        let mut mem = Sdm::with_addresses(config, vec![a.clone(), b.clone()]);
        mem.store(&a, &a);
        mem.store(&b, &b);
        let mut cue = a.clone();
        cue.flip(0);
        cue.flip(5); // distance 2 from a, 14 from b
        let (recall, _) = mem.retrieve(&cue);
        assert_eq!(recall.hit().expect("expected recall"), &a);
    }

    #[test]
    fn counters_saturate_instead_of_wrapping() {
        let mut r = rng(5);
        let mut mem = Sdm::new(SdmConfig::default(), &mut r);
        let p = BitCode::random(256, &mut r);
        for _ in 0..300 {
            mem.store(&p, &p);
        }
        let (recall, _) = mem.retrieve(&p);
        assert_eq!(recall.hit().expect("expected recall"), &p);
        let max = mem.counters().iter().flatten().map(|&c| i32::from(c)).max().unwrap();
        assert_eq!(max, 127);
    }

    #[test]
    fn hetero_associative_chain_returns_last_clean_readout() {
        let mut r = rng(9);
        let mut mem = Sdm::new(SdmConfig::default(), &mut r);
        let context = BitCode::random(256, &mut r);
        let outcome = BitCode::random(256, &mut r);
        mem.store(&context, &outcome);
        // Reading at the context yields the outcome; nothing is stored
        // at the outcome, so the chain ends there and the outcome is
        // the result.
        let (recall, _) = mem.retrieve(&context);
        assert_eq!(recall.hit().expect("expected recall"), &outcome);
    }

    #[test]
    fn access_radius_touches_a_small_location_fraction() {
        let mut r = rng(13);
        let mut mem = Sdm::new(SdmConfig::default(), &mut r);
        let p = BitCode::random(256, &mut r);
        let touched = mem.store(&p, &p);
        // Expected ≈ 2% of 1000; allow generous slack either side.
        assert!((4..=60).contains(&touched), "touched {touched} locations");
    }

    #[test]
    fn same_seed_builds_identical_memories() {
        let a = Sdm::new(SdmConfig::default(), &mut rng(42));
        let b = Sdm::new(SdmConfig::default(), &mut rng(42));
        assert_eq!(a.addresses(), b.addresses());
    }

    #[test]
    fn hamming_distance_counts_differing_bits() {
        let mut a = BitCode::zeros(100);
        let mut b = BitCode::zeros(100);
        a.set(0, true);
        a.set(64, true);
        b.set(64, true);
        b.set(99, true);
        assert_eq!(a.hamming(&b), 2);
        assert_eq!(a.hamming(&a), 0);
    }
}
