//! Counter-based random streams keyed by position in the sweep.
//!
//! Every replication owns a ChaCha key built from
//! `(master_seed, diversity_index, cost_index, replication, variant)`; inside
//! it the environment and each agent read from their own ChaCha stream id.
//! Nothing is drawn sequentially from a shared generator, so any replication
//! or agent stream can be materialised on any worker in any order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

const POPULARITY_VARIANT: u64 = 0x706f_706d_6b74_0001;
const BASELINE_VARIANT: u64 = 0x706f_706d_6b74_0002;

const ENVIRONMENT_STREAM: u64 = 0;

/// The random streams for one replication.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamFamily {
    key: [u8; 32],
}

/// Streams for replication `replication` of grid cell `(diversity_index, cost_index)`.
pub fn derive_streams(
    master_seed: u64,
    diversity_index: usize,
    cost_index: usize,
    replication: usize,
) -> StreamFamily {
    StreamFamily::keyed(
        master_seed,
        diversity_index,
        cost_index,
        replication,
        POPULARITY_VARIANT,
    )
}

impl StreamFamily {
    fn keyed(
        master_seed: u64,
        diversity_index: usize,
        cost_index: usize,
        replication: usize,
        variant: u64,
    ) -> Self {
        let diversity_index = u32::try_from(diversity_index).expect("diversity index fits u32");
        let cost_index = u32::try_from(cost_index).expect("cost index fits u32");
        let mut key = [0u8; 32];
        key[0..8].copy_from_slice(&master_seed.to_le_bytes());
        key[8..12].copy_from_slice(&diversity_index.to_le_bytes());
        key[12..16].copy_from_slice(&cost_index.to_le_bytes());
        key[16..24].copy_from_slice(&(replication as u64).to_le_bytes());
        key[24..32].copy_from_slice(&variant.to_le_bytes());
        Self { key }
    }

    /// Shorthand for the streams of cell (0, 0), replication 0.
    pub fn from_seed(seed: u64) -> Self {
        derive_streams(seed, 0, 0, 0)
    }

    /// An independent family for the random-search control run of the same
    /// replication.
    pub fn baseline(&self) -> Self {
        let mut key = self.key;
        key[24..32].copy_from_slice(&BASELINE_VARIANT.to_le_bytes());
        Self { key }
    }

    fn stream(&self, id: u64) -> StreamRng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(id);
        rng
    }

    /// Stream used to draw the shared objective utilities.
    pub fn environment(&self) -> StreamRng {
        self.stream(ENVIRONMENT_STREAM)
    }

    /// Private stream of the agent deciding at (0-based) position `agent_index`.
    pub fn agent(&self, agent_index: usize) -> StreamRng {
        self.stream(agent_index as u64 + 1)
    }
}
