use super::{Embedder, EmbeddingVector, ProviderError};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, b| (h ^ u64::from(*b)).wrapping_mul(FNV_PRIME))
}

/// Lowercased alphanumeric tokens.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

pub const DEFAULT_DIMENSION: usize = 256;
pub const MIN_DIMENSION: usize = 8;

/// Signed feature-hashing bag-of-words embedder.
///
/// Each token is hashed with FNV-1a; the hash picks a bucket (`hash mod D`)
/// and a sign (bit 63). Counts are accumulated and the result L2-normalized,
/// so the vector depends only on the token multiset up to scale.
#[derive(Debug, Clone)]
pub struct DeterministicEmbedder {
    dimension: usize,
    id: String,
}

impl DeterministicEmbedder {
    pub fn new(dimension: usize) -> Result<Self, ProviderError> {
        if dimension < MIN_DIMENSION {
            return Err(ProviderError::InvalidConfig(format!(
                "embedding dimension {dimension} is below the minimum of {MIN_DIMENSION}"
            )));
        }
        Ok(Self {
            dimension,
            id: format!("local-fnv-{dimension}"),
        })
    }

    fn accumulate(&self, text: &str) -> Vec<f64> {
        let mut acc = vec![0.0; self.dimension];
        for token in tokenize(text) {
            let h = fnv1a64(token.as_bytes());
            let bucket = (h % self.dimension as u64) as usize;
            acc[bucket] += if h >> 63 == 0 { 1.0 } else { -1.0 };
        }
        acc
    }
}

impl Default for DeterministicEmbedder {
    fn default() -> Self {
        Self::new(DEFAULT_DIMENSION).expect("default dimension is valid")
    }
}

impl Embedder for DeterministicEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, ProviderError> {
        if text.trim().is_empty() {
            return Err(ProviderError::EmptyInput);
        }
        EmbeddingVector::normalized(self.accumulate(text)).ok_or(ProviderError::EmptyInput)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_vectors() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn deterministic_and_unit_norm() {
        let e = DeterministicEmbedder::default();
        let a = e.embed("autonomous vehicle").unwrap();
        let b = e.embed("autonomous vehicle").unwrap();
        assert_eq!(a, b);
        assert!((a.norm() - 1.0).abs() < 1e-12);
        assert_eq!(a.len(), 256);
    }

    #[test]
    fn empty_and_punctuation_only_inputs() {
        let e = DeterministicEmbedder::default();
        assert!(matches!(e.embed(""), Err(ProviderError::EmptyInput)));
        assert!(matches!(e.embed("   \t"), Err(ProviderError::EmptyInput)));
        assert!(matches!(e.embed("?!, --"), Err(ProviderError::EmptyInput)));
    }

    #[test]
    fn scale_and_order_invariance() {
        let e = DeterministicEmbedder::default();
        assert_eq!(e.embed("car car").unwrap(), e.embed("car").unwrap());
        assert_eq!(
            e.embed("remote robotic surgery").unwrap(),
            e.embed("Surgery, robotic... REMOTE").unwrap()
        );
    }

    #[test]
    fn rejects_tiny_dimensions() {
        assert!(DeterministicEmbedder::new(4).is_err());
        assert!(DeterministicEmbedder::new(8).is_ok());
    }
}
