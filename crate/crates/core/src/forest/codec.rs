//! Binary model format.
//!
//! Little-endian layout:
//!
//! ```text
//! magic   4 bytes  "PYRF"
//! version u16      = 1
//! flags   u16      bit 0 bootstrap, bits 1-3 generator id
//! seed    u64
//! n_trees u32
//! n_feat  u32
//! per tree:
//!   node_count u32
//!   node records, 21 bytes each:
//!     kind          u8   0 leaf, 1 internal
//!     feature_index u32  0 for leaves
//!     value         f64  leaf value or split threshold
//!     left          u32  child index, or n_samples for leaves
//!     right         u32  child index, 0 for leaves
//! checksum u64     FNV-1a 64 of all preceding bytes
//! ```
//!
//! The decoder validates structure before the checksum so truncation
//! and corruption are reported distinctly, then walks every tree to
//! reject dangling or cyclic child references.

use thiserror::Error;

use crate::rng::fnv1a64;

use super::{Forest, TreeNode};

pub const FORMAT_VERSION: u16 = 1;
const MAGIC: [u8; 4] = *b"PYRF";
const NODE_RECORD_LEN: usize = 21;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("bad magic: not a model file")]
    BadMagic,
    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u16),
    #[error("truncated model payload")]
    Truncated,
    #[error("checksum mismatch: model file is corrupted")]
    ChecksumMismatch,
    #[error("malformed model: {0}")]
    Malformed(String),
}

pub fn serialize_forest(forest: &Forest) -> Vec<u8> {
    let n_nodes: usize = forest.trees.iter().map(|t| t.len()).sum();
    let mut out = Vec::with_capacity(24 + forest.trees.len() * 4 + n_nodes * NODE_RECORD_LEN + 8);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&forest.flags.to_le_bytes());
    out.extend_from_slice(&forest.seed.to_le_bytes());
    out.extend_from_slice(&(forest.trees.len() as u32).to_le_bytes());
    out.extend_from_slice(&forest.n_features.to_le_bytes());
    for tree in &forest.trees {
        out.extend_from_slice(&(tree.len() as u32).to_le_bytes());
        for node in tree {
            match *node {
                TreeNode::Leaf { value, n_samples } => {
                    out.push(0);
                    out.extend_from_slice(&0u32.to_le_bytes());
                    out.extend_from_slice(&value.to_le_bytes());
                    out.extend_from_slice(&n_samples.to_le_bytes());
                    out.extend_from_slice(&0u32.to_le_bytes());
                }
                TreeNode::Internal {
                    feature_index,
                    threshold,
                    left,
                    right,
                } => {
                    out.push(1);
                    out.extend_from_slice(&feature_index.to_le_bytes());
                    out.extend_from_slice(&threshold.to_le_bytes());
                    out.extend_from_slice(&left.to_le_bytes());
                    out.extend_from_slice(&right.to_le_bytes());
                }
            }
        }
    }
    let checksum = fnv1a64(&out);
    out.extend_from_slice(&checksum.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if self.pos + n > self.bytes.len() {
            return Err(DecodeError::Truncated);
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, DecodeError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, DecodeError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, DecodeError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn deserialize_forest(bytes: &[u8]) -> Result<Forest, DecodeError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(DecodeError::BadMagic);
    }
    let version = r.u16()?;
    if version != FORMAT_VERSION {
        return Err(DecodeError::UnsupportedVersion(version));
    }
    let flags = r.u16()?;
    let seed = r.u64()?;
    let n_trees = r.u32()? as usize;
    let n_features = r.u32()?;

    let mut trees = Vec::with_capacity(n_trees.min(1 << 20));
    for _ in 0..n_trees {
        let node_count = r.u32()? as usize;
        if node_count == 0 {
            return Err(DecodeError::Malformed("tree with zero nodes".into()));
        }
        // Bound the allocation by the remaining payload.
        if node_count.saturating_mul(NODE_RECORD_LEN) > bytes.len() - r.pos {
            return Err(DecodeError::Truncated);
        }
        let mut tree = Vec::with_capacity(node_count);
        for _ in 0..node_count {
            let kind = r.u8()?;
            let feature_index = r.u32()?;
            let value = r.f64()?;
            let left = r.u32()?;
            let right = r.u32()?;
            let node = match kind {
                0 => {
                    if right != 0 {
                        return Err(DecodeError::Malformed("leaf with nonzero right field".into()));
                    }
                    TreeNode::Leaf {
                        value,
                        n_samples: left,
                    }
                }
                1 => {
                    if left as usize >= node_count || right as usize >= node_count {
                        return Err(DecodeError::Malformed("child index out of range".into()));
                    }
                    TreeNode::Internal {
                        feature_index,
                        threshold: value,
                        left,
                        right,
                    }
                }
                k => return Err(DecodeError::Malformed(format!("unknown node kind {k}"))),
            };
            tree.push(node);
        }
        validate_tree(&tree)?;
        trees.push(tree);
    }
    let checksum = r.u64()?;
    if r.pos != bytes.len() {
        return Err(DecodeError::Malformed("trailing bytes after checksum".into()));
    }
    if fnv1a64(&bytes[..bytes.len() - 8]) != checksum {
        return Err(DecodeError::ChecksumMismatch);
    }
    Ok(Forest {
        seed,
        flags,
        n_features,
        trees,
    })
}

/// Every node must be reachable from the root exactly once.
fn validate_tree(tree: &[TreeNode]) -> Result<(), DecodeError> {
    let mut visited = vec![false; tree.len()];
    let mut stack = vec![0u32];
    let mut count = 0usize;
    while let Some(idx) = stack.pop() {
        let idx = idx as usize;
        if visited[idx] {
            return Err(DecodeError::Malformed("cyclic or shared node reference".into()));
        }
        visited[idx] = true;
        count += 1;
        if let TreeNode::Internal { left, right, .. } = tree[idx] {
            stack.push(left);
            stack.push(right);
        }
    }
    if count != tree.len() {
        return Err(DecodeError::Malformed("unreachable nodes in tree".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::{fit_forest, HyperParams, RNG_ID};
    use crate::rng::Xoshiro256PlusPlus;
    use crate::telemetry::FeatureTable;

    fn single_leaf_forest() -> Forest {
        Forest {
            seed: 3,
            flags: FLAGS,
            n_features: 2,
            trees: vec![vec![TreeNode::Leaf { value: 4.0, n_samples: 7 }]],
        }
    }

    const FLAGS: u16 = 1 | (RNG_ID << 1);

    #[test]
    fn single_leaf_layout_matches_hand_assembled_bytes() {
        // Assembled field by field from the format table.
        let mut expected = Vec::new();
        expected.extend_from_slice(b"PYRF");
        expected.extend_from_slice(&1u16.to_le_bytes()); // version
        expected.extend_from_slice(&FLAGS.to_le_bytes()); // flags
        expected.extend_from_slice(&3u64.to_le_bytes()); // seed
        expected.extend_from_slice(&1u32.to_le_bytes()); // n_trees
        expected.extend_from_slice(&2u32.to_le_bytes()); // n_features
        expected.extend_from_slice(&1u32.to_le_bytes()); // node_count
        expected.push(0); // leaf
        expected.extend_from_slice(&0u32.to_le_bytes()); // feature_index
        expected.extend_from_slice(&4.0f64.to_le_bytes()); // value
        expected.extend_from_slice(&7u32.to_le_bytes()); // n_samples in `left`
        expected.extend_from_slice(&0u32.to_le_bytes()); // right
        let checksum = fnv1a64(&expected);
        expected.extend_from_slice(&checksum.to_le_bytes());

        assert_eq!(serialize_forest(&single_leaf_forest()), expected);
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let forest = single_leaf_forest();
        let bytes = serialize_forest(&forest);
        let decoded = deserialize_forest(&bytes).unwrap();
        assert_eq!(decoded, forest);
        assert_eq!(serialize_forest(&decoded), bytes);
    }

    #[test]
    fn flipped_magic_byte_is_rejected() {
        let mut bytes = serialize_forest(&single_leaf_forest());
        bytes[0] ^= 0xFF;
        assert_eq!(deserialize_forest(&bytes), Err(DecodeError::BadMagic));
    }

    #[test]
    fn unsupported_version_is_rejected() {
        let mut bytes = serialize_forest(&single_leaf_forest());
        bytes[4] = 9;
        assert_eq!(deserialize_forest(&bytes), Err(DecodeError::UnsupportedVersion(9)));
    }

    #[test]
    fn truncation_is_detected() {
        let bytes = serialize_forest(&single_leaf_forest());
        for cut in [3, 10, 25, bytes.len() - 9] {
            assert_eq!(
                deserialize_forest(&bytes[..cut]),
                Err(DecodeError::Truncated),
                "cut at {cut}"
            );
        }
    }

    #[test]
    fn corruption_fails_the_checksum() {
        let mut bytes = serialize_forest(&single_leaf_forest());
        let value_offset = 24 + 4 + 1 + 4; // header, node_count, kind, feature_index
        bytes[value_offset] ^= 0x01;
        assert_eq!(deserialize_forest(&bytes), Err(DecodeError::ChecksumMismatch));

        let mut bytes = serialize_forest(&single_leaf_forest());
        let last = bytes.len() - 1;
        bytes[last] ^= 0x01; // checksum itself
        assert_eq!(deserialize_forest(&bytes), Err(DecodeError::ChecksumMismatch));
    }

    #[test]
    fn dangling_child_reference_is_malformed() {
        let forest = Forest {
            seed: 0,
            flags: FLAGS,
            n_features: 1,
            trees: vec![vec![TreeNode::Internal {
                feature_index: 0,
                threshold: 0.5,
                left: 5,
                right: 6,
            }]],
        };
        let bytes = serialize_forest(&forest);
        assert!(matches!(
            deserialize_forest(&bytes),
            Err(DecodeError::Malformed(_))
        ));
    }

    #[test]
    fn fitted_forest_round_trips_with_bit_equal_predictions() {
        let mut rng = Xoshiro256PlusPlus::new(17);
        let n_rows = 50;
        let rows: Vec<f64> = (0..n_rows * 3).map(|_| rng.uniform_f64()).collect();
        let targets: Vec<f64> = (0..n_rows).map(|_| rng.uniform_f64() * 5.0).collect();
        let table = FeatureTable {
            state_names: vec!["a".into(), "b".into(), "c".into()],
            feature_names: vec!["a_lag0".into(), "b_lag0".into(), "c_lag0".into()],
            target_names: vec!["y".into()],
            lag: 0,
            n_rows,
            n_features: 3,
            rows,
            targets,
            row_timestamps: (0..n_rows as i64).collect(),
            norm_stats: None,
        };
        let model = fit_forest(
            &table,
            "y",
            &HyperParams { n_estimators: 11, seed: 23, ..HyperParams::default() },
        )
        .unwrap();
        let bytes = serialize_forest(&model.forest);
        let decoded = deserialize_forest(&bytes).unwrap();
        assert_eq!(serialize_forest(&decoded), bytes);
        for i in 0..table.n_rows {
            let a = model.forest.predict(table.row(i)).unwrap();
            let b = decoded.predict(table.row(i)).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
