//! Long-term declarative memories and their cueing interface.
//!
//! Three episodic stores (what the *user* asked, how *providers*
//! behaved, what the *network* did) share one premise codec, and a
//! slipnet carries semantic associations. Once per cycle the agent
//! cues all of them with the active working-memory premises; whatever
//! comes back — decoded episodic recalls plus the premises of active
//! slipnet concepts — is the association set `D` that flows back into
//! working memory.
//!
//! Episodes are stored associatively: the *context* premise is the
//! address, the *outcome* premise is the content. Cueing with a
//! context the agent has lived through before surfaces the outcome it
//! led to ("provider-3 was unreliable").

pub mod codec;
pub mod sdm;
pub mod slipnet;

use std::collections::BTreeMap;
use std::io::{self, Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domain::{Premise, PremiseSet};
use codec::Codec;
use sdm::{BitCode, Recall, Sdm, SdmConfig};
use slipnet::{Slipnet, SlipnetConfig, SlipnetLink, SlipnetNode};

/// Which episodic store an episode belongs to.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum MemoryKind {
    User,
    Provider,
    Network,
}

impl MemoryKind {
    pub const ALL: [MemoryKind; 3] = [MemoryKind::User, MemoryKind::Provider, MemoryKind::Network];
}

/// Configuration for the whole declarative layer.
#[derive(Clone, Debug)]
pub struct DeclarativeConfig {
    pub sdm: SdmConfig,
    pub slipnet: SlipnetConfig,
    /// Decode acceptance radius for the codec.
    pub decode_radius: u32,
}

impl Default for DeclarativeConfig {
    fn default() -> Self {
        Self { sdm: SdmConfig::default(), slipnet: SlipnetConfig::default(), decode_radius: 64 }
    }
}

/// Result of one cue pass, with the ledger-relevant page count.
pub struct CueOutcome {
    pub associations: PremiseSet,
    /// Hard-location touches this cue caused (or re-caused, for
    /// memoized cues — the pages are in active use either way).
    pub pages_touched: usize,
}

/// The declarative layer of one agent.
pub struct DeclarativeMemory {
    codec: Codec,
    user: Sdm,
    provider: Sdm,
    network: Sdm,
    slipnet: Slipnet,
    /// Memoized episodic lookups per cue premise; recomputed after any
    /// store. Results are identical with or without the cache — it
    /// exists because cues repeat for as long as a premise stays in
    /// working memory.
    recall_cache: BTreeMap<Premise, (Vec<Premise>, usize)>,
}

impl DeclarativeMemory {
    /// Build the layer. `codec_seed` is shared across a scenario (one
    /// codebook per scenario); `instance_seed` individualizes this
    /// agent's hard-location addresses.
    pub fn new(config: &DeclarativeConfig, codec_seed: u64, instance_seed: u64) -> Self {
        let mk = |salt: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(instance_seed.wrapping_add(salt));
            Sdm::new(config.sdm.clone(), &mut rng)
        };
        Self {
            codec: Codec::new(config.sdm.address_bits, config.decode_radius, codec_seed),
            user: mk(0x55e1),
            provider: mk(0x9d2f),
            network: mk(0xc3a7),
            slipnet: Slipnet::new(config.slipnet.clone()),
            recall_cache: BTreeMap::new(),
        }
    }

    fn store_of(&self, kind: MemoryKind) -> &Sdm {
        match kind {
            MemoryKind::User => &self.user,
            MemoryKind::Provider => &self.provider,
            MemoryKind::Network => &self.network,
        }
    }

    fn store_of_mut(&mut self, kind: MemoryKind) -> &mut Sdm {
        match kind {
            MemoryKind::User => &mut self.user,
            MemoryKind::Provider => &mut self.provider,
            MemoryKind::Network => &mut self.network,
        }
    }

    /// Record that `context` led to `outcome` in the given store.
    /// Returns the number of hard locations touched.
    pub fn store_episode(
        &mut self,
        kind: MemoryKind,
        context: &Premise,
        outcome: &Premise,
    ) -> usize {
        let address = self.codec.encode(context);
        let content = self.codec.encode(outcome);
        let touched = self.store_of_mut(kind).store(&address, &content);
        self.recall_cache.clear();
        touched
    }

    /// Cue every memory with the active working-memory premises and
    /// collect the association set `D`.
    pub fn cue(&mut self, wm_active: &PremiseSet) -> CueOutcome {
        let mut associations = PremiseSet::new();
        let mut pages = 0usize;
        for premise in wm_active {
            if let Some((hits, cost)) = self.recall_cache.get(premise) {
                associations.extend(hits.iter().cloned());
                pages += cost;
                continue;
            }
            let cue = self.codec.encode(premise);
            let mut hits = Vec::new();
            let mut cost = 0usize;
            for kind in MemoryKind::ALL {
                let (recall, touched) = self.store_of(kind).retrieve(&cue);
                cost += touched;
                if let Recall::Hit(code) = recall {
                    if let Some(found) = self.codec.decode(&code) {
                        if &found != premise {
                            hits.push(found);
                        }
                    }
                }
            }
            hits.sort();
            hits.dedup();
            associations.extend(hits.iter().cloned());
            pages += cost;
            self.recall_cache.insert(premise.clone(), (hits, cost));
        }
        self.slipnet.cue(wm_active);
        self.slipnet.spread();
        associations.extend(self.slipnet.emissions());
        CueOutcome { associations, pages_touched: pages }
    }

    /// Per-cycle decay of the semantic layer.
    pub fn tick(&mut self) {
        self.slipnet.decay();
    }

    pub fn slipnet(&self) -> &Slipnet {
        &self.slipnet
    }

    pub fn slipnet_mut(&mut self) -> &mut Slipnet {
        &mut self.slipnet
    }

    pub fn codec_mut(&mut self) -> &mut Codec {
        &mut self.codec
    }

    pub fn episodes_stored(&self) -> u64 {
        MemoryKind::ALL.iter().map(|&k| self.store_of(k).writes()).sum()
    }

    // --- binary snapshot -------------------------------------------------

    const MAGIC: &'static [u8; 4] = b"CGDM";
    const VERSION: u32 = 1;

    /// Serialize the whole layer (codec book, three counter arrays,
    /// slipnet node/link table) to a versioned binary snapshot.
    pub fn save(&self, w: &mut impl Write) -> io::Result<()> {
        w.write_all(Self::MAGIC)?;
        put_u32(w, Self::VERSION)?;
        // codec
        put_u32(w, self.codec.bits() as u32)?;
        put_u32(w, self.codec.decode_radius())?;
        put_u64(w, self.codec.seed())?;
        put_u32(w, self.codec.len() as u32)?;
        for (premise, code) in self.codec.entries() {
            put_str(w, &premise.key)?;
            put_str(w, &premise.value)?;
            put_code(w, code)?;
        }
        for kind in MemoryKind::ALL {
            let sdm = self.store_of(kind);
            let cfg = sdm.config();
            put_u32(w, cfg.address_bits as u32)?;
            put_u32(w, cfg.locations as u32)?;
            put_u32(w, cfg.access_radius)?;
            put_u32(w, cfg.max_iterations as u32)?;
            put_f64(w, cfg.tie_fraction)?;
            put_u64(w, sdm.writes())?;
            for addr in sdm.addresses() {
                put_code(w, addr)?;
            }
            for row in sdm.counters() {
                let bytes: Vec<u8> = row.iter().map(|&c| c as u8).collect();
                w.write_all(&bytes)?;
            }
        }
        // slipnet
        let cfg = self.slipnet.config();
        for v in [
            cfg.ceiling,
            cfg.activation_threshold,
            cfg.link_gain,
            cfg.decay_factor,
            cfg.shrink_factor,
            cfg.min_length,
            cfg.cue_boost,
        ] {
            put_f64(w, v)?;
        }
        put_u32(w, self.slipnet.node_count() as u32)?;
        for node in self.slipnet.nodes() {
            put_str(w, &node.concept)?;
            put_f64(w, node.activation)?;
            match &node.emits {
                Some(p) => {
                    w.write_all(&[1])?;
                    put_str(w, &p.key)?;
                    put_str(w, &p.value)?;
                }
                None => w.write_all(&[0])?,
            }
        }
        put_u32(w, self.slipnet.links().len() as u32)?;
        for link in self.slipnet.links() {
            put_u32(w, link.a as u32)?;
            put_u32(w, link.b as u32)?;
            put_f64(w, link.length)?;
        }
        Ok(())
    }

    /// Restore a layer from [`save`](Self::save) output.
    pub fn load(r: &mut impl Read) -> io::Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != Self::MAGIC {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "not a memory snapshot"));
        }
        let version = get_u32(r)?;
        if version != Self::VERSION {
            return Err(io::Error::new(
                io::ErrorKind::InvalidData,
                format!("unsupported snapshot version {version}"),
            ));
        }
        let bits = get_u32(r)? as usize;
        let decode_radius = get_u32(r)?;
        let seed = get_u64(r)?;
        let book_len = get_u32(r)?;
        let mut book = BTreeMap::new();
        for _ in 0..book_len {
            let key = get_str(r)?;
            let value = get_str(r)?;
            let code = get_code(r, bits)?;
            book.insert(Premise::new(key, value), code);
        }
        let codec = Codec::restore(bits, decode_radius, seed, book);
        let mut stores = Vec::with_capacity(3);
        for _ in 0..3 {
            let address_bits = get_u32(r)? as usize;
            let locations = get_u32(r)? as usize;
            let access_radius = get_u32(r)?;
            let max_iterations = get_u32(r)? as usize;
            let tie_fraction = get_f64(r)?;
            let writes = get_u64(r)?;
            let mut addresses = Vec::with_capacity(locations);
            for _ in 0..locations {
                addresses.push(get_code(r, address_bits)?);
            }
            let mut counters = Vec::with_capacity(locations);
            for _ in 0..locations {
                let mut bytes = vec![0u8; address_bits];
                r.read_exact(&mut bytes)?;
                counters.push(bytes.into_iter().map(|b| b as i8).collect());
            }
            let config = SdmConfig {
                address_bits,
                locations,
                access_radius,
                max_iterations,
                tie_fraction,
            };
            stores.push(Sdm::restore(config, addresses, counters, writes));
        }
        let network = stores.pop().unwrap();
        let provider = stores.pop().unwrap();
        let user = stores.pop().unwrap();
        let slipnet_cfg = SlipnetConfig {
            ceiling: get_f64(r)?,
            activation_threshold: get_f64(r)?,
            link_gain: get_f64(r)?,
            decay_factor: get_f64(r)?,
            shrink_factor: get_f64(r)?,
            min_length: get_f64(r)?,
            cue_boost: get_f64(r)?,
        };
        let node_count = get_u32(r)?;
        let mut nodes = Vec::with_capacity(node_count as usize);
        for _ in 0..node_count {
            let concept = get_str(r)?;
            let activation = get_f64(r)?;
            let mut flag = [0u8; 1];
            r.read_exact(&mut flag)?;
            let emits = if flag[0] == 1 {
                let key = get_str(r)?;
                let value = get_str(r)?;
                Some(Premise::new(key, value))
            } else {
                None
            };
            nodes.push(SlipnetNode { concept, activation, emits });
        }
        let link_count = get_u32(r)?;
        let mut links = Vec::with_capacity(link_count as usize);
        for _ in 0..link_count {
            let a = get_u32(r)? as usize;
            let b = get_u32(r)? as usize;
            let length = get_f64(r)?;
            links.push(SlipnetLink { a, b, length });
        }
        let slipnet = Slipnet::restore(slipnet_cfg, nodes, links);
        Ok(Self { codec, user, provider, network, slipnet, recall_cache: BTreeMap::new() })
    }
}

fn put_u32(w: &mut impl Write, v: u32) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_u64(w: &mut impl Write, v: u64) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_f64(w: &mut impl Write, v: f64) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_str(w: &mut impl Write, s: &str) -> io::Result<()> {
    put_u32(w, s.len() as u32)?;
    w.write_all(s.as_bytes())
}

fn put_code(w: &mut impl Write, code: &BitCode) -> io::Result<()> {
    for word in code.words() {
        put_u64(w, *word)?;
    }
    Ok(())
}

fn get_u32(r: &mut impl Read) -> io::Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn get_u64(r: &mut impl Read) -> io::Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn get_f64(r: &mut impl Read) -> io::Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

fn get_str(r: &mut impl Read) -> io::Result<String> {
    let len = get_u32(r)? as usize;
    if len > 1 << 20 {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "string length out of range"));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}

fn get_code(r: &mut impl Read, bits: usize) -> io::Result<BitCode> {
    let words = bits.div_ceil(64);
    let mut data = Vec::with_capacity(words);
    for _ in 0..words {
        data.push(get_u64(r)?);
    }
    Ok(BitCode::from_words(data, bits))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::premises;

    fn layer(seed: u64) -> DeclarativeMemory {
        DeclarativeMemory::new(&DeclarativeConfig::default(), 1000 + seed, seed)
    }

    #[test]
    fn stored_failure_episode_surfaces_on_matching_context() {
        let mut mem = layer(1);
        let ctx = Premise::new("provider", "p3");
        let outcome = Premise::new("provider-p3", "unreliable");
        mem.store_episode(MemoryKind::Provider, &ctx, &outcome);
        let cue = premises([("provider", "p3")]);
        let out = mem.cue(&cue);
        assert!(out.associations.contains(&outcome));
        assert!(out.pages_touched > 0);
    }

    #[test]
    fn unknown_context_recalls_nothing() {
        let mut mem = layer(2);
        mem.store_episode(
            MemoryKind::Network,
            &Premise::new("node", "n7"),
            &Premise::new("node-n7", "departed"),
        );
        let out = mem.cue(&premises([("totally", "unrelated")]));
        assert!(out.associations.is_empty());
    }

    #[test]
    fn slipnet_associations_join_the_cue_result() {
        let mut mem = layer(3);
        mem.slipnet_mut().add_node("home", Some(Premise::new("home", "is-a-place")));
        mem.slipnet_mut().add_node("place", None);
        mem.slipnet_mut().add_link("home", "place", 0.1);
        let out = mem.cue(&premises([("place", "home")]));
        assert!(out.associations.contains(&Premise::new("home", "is-a-place")));
    }

    #[test]
    fn memoized_cues_match_fresh_cues() {
        let mut mem = layer(4);
        let ctx = Premise::new("user", "u1");
        let outcome = Premise::new("user-u1", "asked-food");
        mem.store_episode(MemoryKind::User, &ctx, &outcome);
        let cue = premises([("user", "u1")]);
        let first = mem.cue(&cue);
        let second = mem.cue(&cue);
        assert_eq!(first.associations, second.associations);
        assert_eq!(first.pages_touched, second.pages_touched);
    }

    #[test]
    fn snapshot_round_trips() {
        let mut mem = layer(5);
        mem.store_episode(
            MemoryKind::Provider,
            &Premise::new("provider", "p1"),
            &Premise::new("provider-p1", "unreliable"),
        );
        mem.slipnet_mut().add_node("home", Some(Premise::new("home", "is-a-place")));
        mem.slipnet_mut().set_activation("home", 77.0);
        let mut buf = Vec::new();
        mem.save(&mut buf).unwrap();
        let mut restored = DeclarativeMemory::load(&mut buf.as_slice()).unwrap();
        let cue = premises([("provider", "p1")]);
        assert_eq!(restored.cue(&cue).associations, mem.cue(&cue).associations);
        assert_eq!(restored.slipnet().activation("home"), Some(77.0));
        assert_eq!(restored.episodes_stored(), 1);
    }

    #[test]
    fn snapshot_rejects_foreign_bytes() {
        let bytes = b"not a snapshot at all";
        assert!(DeclarativeMemory::load(&mut bytes.as_ref()).is_err());
    }
}
