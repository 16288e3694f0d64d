use super::MetricError;

/// Bucket count of the default hashed embedding.
pub const HASHED_DIMENSION: usize = 256;

/// Fixed seed mixed into the trigram hash.
pub const HASH_SEED: u64 = 0x9e37_79b9_7f4a_7c15;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Maps tokens to unit-norm vectors.
///
/// Implementations must be deterministic: the same token always yields the
/// same vector.
pub trait EmbeddingProvider: Send + Sync {
    fn dimension(&self) -> usize;

    /// Embeds a batch of tokens, one vector per token in input order.
    fn embed(&self, tokens: &[String]) -> Result<Vec<Vec<f64>>, MetricError>;

    fn name(&self) -> String;
}

/// Signed feature hashing of boundary-padded character trigrams.
#[derive(Debug, Clone)]
pub struct HashedTrigramEmbedder {
    dimension: usize,
    seed: u64,
}

impl Default for HashedTrigramEmbedder {
    fn default() -> Self {
        Self { dimension: HASHED_DIMENSION, seed: HASH_SEED }
    }
}

impl HashedTrigramEmbedder {
    pub fn new(dimension: usize, seed: u64) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        Self { dimension, seed }
    }

    pub fn embed_token(&self, token: &str) -> Result<Vec<f64>, MetricError> {
        if token.is_empty() {
            return Err(MetricError::EmptyToken);
        }
        let padded: Vec<char> = std::iter::once('<')
            .chain(token.chars())
            .chain(std::iter::once('>'))
            .collect();
        // All trigrams can cancel through collisions; re-salting until the
        // vector is non-zero keeps the unit-norm contract.
        for salt in 0u64.. {
            let mut v = vec![0.0; self.dimension];
            for gram in padded.windows(3) {
                let mut buf = [0u8; 12];
                let mut len = 0;
                for c in gram {
                    len += c.encode_utf8(&mut buf[len..]).len();
                }
                let h = hash(&buf[..len], self.seed.wrapping_add(salt));
                let bucket = ((h >> 1) % self.dimension as u64) as usize;
                v[bucket] += if h & 1 == 0 { 1.0 } else { -1.0 };
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                v.iter_mut().for_each(|x| *x /= norm);
                return Ok(v);
            }
        }
        unreachable!()
    }
}

/// FNV-1a over the bytes with a seeded offset, finished with the
/// splitmix64 mixer so the low bit and bucket bits are well spread.
fn hash(bytes: &[u8], seed: u64) -> u64 {
    let mut h = FNV_OFFSET ^ seed;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h ^= h >> 30;
    h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h ^= h >> 27;
    h = h.wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

impl EmbeddingProvider for HashedTrigramEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, tokens: &[String]) -> Result<Vec<Vec<f64>>, MetricError> {
        tokens.iter().map(|t| self.embed_token(t)).collect()
    }

    fn name(&self) -> String {
        format!("hashed-trigram(d={},seed={:#x})", self.dimension, self.seed)
    }
}

/// Default provider applied to one token.
pub fn embed_hashed_trigrams(token: &str) -> Result<Vec<f64>, MetricError> {
    HashedTrigramEmbedder::default().embed_token(token)
}
