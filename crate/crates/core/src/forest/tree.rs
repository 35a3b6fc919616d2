use std::collections::BTreeMap;

use rand::seq::index;
use rand::Rng;

use super::{check_samples, entropy_counts, ForestError, ForestParams, Node, Sample, Tree};
use crate::rng::Stream;

/// Gains within this distance of zero are treated as zero.
const GAIN_EPS: f64 = 1e-12;

/// Samples sharing a feature vector, collapsed into label counts.
#[derive(Debug, Clone, Copy)]
struct Row {
    mask: u64,
    pos: u64,
    neg: u64,
}

fn pack(features: &[bool]) -> u64 {
    features
        .iter()
        .enumerate()
        .fold(0u64, |m, (i, &b)| if b { m | (1 << i) } else { m })
}

fn rows_from<'a, I>(weighted: I) -> Vec<Row>
where
    I: IntoIterator<Item = (&'a Sample, u64)>,
{
    let mut by_mask: BTreeMap<u64, Row> = BTreeMap::new();
    for (s, w) in weighted {
        let mask = pack(&s.features);
        let row = by_mask.entry(mask).or_insert(Row { mask, pos: 0, neg: 0 });
        if s.label {
            row.pos += w;
        } else {
            row.neg += w;
        }
    }
    by_mask.into_values().collect()
}

/// Resample `samples.len()` samples with replacement.
pub fn bootstrap(samples: &[Sample], rng: &mut Stream) -> Vec<Sample> {
    bootstrap_counts(samples.len(), rng)
        .into_iter()
        .enumerate()
        .flat_map(|(i, c)| std::iter::repeat_n(&samples[i], c as usize))
        .cloned()
        .collect()
}

fn bootstrap_counts(n: usize, rng: &mut Stream) -> Vec<u64> {
    let mut counts = vec![0u64; n];
    for _ in 0..n {
        counts[rng.random_range(0..n)] += 1;
    }
    counts
}

/// Grow one tree greedily on `samples`. `rng` picks the per-node feature
/// subsets; with every feature considered at each node it is not consumed.
pub fn train_tree(
    samples: &[Sample],
    params: &ForestParams,
    rng: &mut Stream,
) -> Result<Tree, ForestError> {
    params.validate()?;
    let n_features = check_samples(samples)?;
    let rows = rows_from(samples.iter().map(|s| (s, 1)));
    Ok(Tree {
        n_features,
        root: grow(rows, 0, n_features, params, rng),
    })
}

pub(super) fn train_bagged(
    samples: &[Sample],
    n_features: usize,
    params: &ForestParams,
    rng: &mut Stream,
) -> Tree {
    let counts = bootstrap_counts(samples.len(), rng);
    let rows = rows_from(
        samples
            .iter()
            .zip(counts)
            .filter(|(_, c)| *c > 0),
    );
    Tree {
        n_features,
        root: grow(rows, 0, n_features, params, rng),
    }
}

fn grow(rows: Vec<Row>, depth: usize, n_features: usize, params: &ForestParams, rng: &mut Stream) -> Node {
    let pos: u64 = rows.iter().map(|r| r.pos).sum();
    let neg: u64 = rows.iter().map(|r| r.neg).sum();
    let n = pos + neg;
    let leaf = Node::Leaf {
        label: pos > neg,
        samples: n,
    };
    let min_leaf = params.min_leaf as u64;
    if pos == 0
        || neg == 0
        || params.max_depth.is_some_and(|d| depth >= d)
        || n < 2 * min_leaf
        || n_features == 0
    {
        return leaf;
    }

    let k = params.features_per_split.count(n_features);
    let candidates: Vec<usize> = if k >= n_features {
        (0..n_features).collect()
    } else {
        let mut c = index::sample(rng, n_features, k).into_vec();
        c.sort_unstable();
        c
    };

    let parent_h = entropy_counts(pos as f64, neg as f64);
    let mut best: Option<(usize, f64)> = None;
    for &f in &candidates {
        let bit = 1u64 << f;
        let (tp, tn) = rows
            .iter()
            .filter(|r| r.mask & bit != 0)
            .fold((0u64, 0u64), |(p, q), r| (p + r.pos, q + r.neg));
        let (fp, fn_) = (pos - tp, neg - tn);
        let (nt, nf) = (tp + tn, fp + fn_);
        if nt < min_leaf || nf < min_leaf {
            continue;
        }
        let child_h = (nt as f64 * entropy_counts(tp as f64, tn as f64)
            + nf as f64 * entropy_counts(fp as f64, fn_ as f64))
            / n as f64;
        // zero-gain splits are allowed so parity structure stays learnable;
        // the pruning below removes the ones that lead nowhere
        let gain = (parent_h - child_h).max(0.0);
        let gain = if gain < GAIN_EPS { 0.0 } else { gain };
        if best.is_none_or(|(_, g)| gain > g) {
            best = Some((f, gain));
        }
    }
    let Some((feature, gain)) = best else {
        return leaf;
    };

    let bit = 1u64 << feature;
    let (with, without): (Vec<Row>, Vec<Row>) = rows.into_iter().partition(|r| r.mask & bit != 0);
    let if_true = grow(with, depth + 1, n_features, params, rng);
    let if_false = grow(without, depth + 1, n_features, params, rng);

    // A split whose two sides predict the same label changes no prediction;
    // fold it back into a leaf so it contributes no importance.
    if let (Node::Leaf { label: a, .. }, Node::Leaf { label: b, .. }) = (&if_true, &if_false) {
        if a == b {
            return leaf;
        }
    }
    Node::Split {
        feature,
        gain,
        samples: n,
        if_false: Box::new(if_false),
        if_true: Box::new(if_true),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::FeatureSubset;
    use rand::SeedableRng;

    fn params(max_depth: Option<usize>, min_leaf: usize) -> ForestParams {
        ForestParams {
            n_trees: 1,
            max_depth,
            features_per_split: FeatureSubset::All,
            min_leaf,
        }
    }

    fn s(f: &[bool], label: bool) -> Sample {
        Sample::new(f.to_vec(), label, "p")
    }

    #[test]
    fn single_perfect_split() {
        let data = vec![
            s(&[true, false], true),
            s(&[true, true], true),
            s(&[false, false], false),
            s(&[false, true], false),
        ];
        let mut rng = Stream::seed_from_u64(0);
        let t = train_tree(&data, &params(None, 1), &mut rng).unwrap();
        assert_eq!(t.root.depth(), 1);
        assert!(matches!(t.root, Node::Split { feature: 0, .. }));
        assert!(data.iter().all(|x| t.predict(&x.features).unwrap() == x.label));
    }

    #[test]
    fn pure_labels_make_a_leaf() {
        let data = vec![s(&[true], true), s(&[false], true)];
        let t = train_tree(&data, &params(None, 1), &mut Stream::seed_from_u64(0)).unwrap();
        assert_eq!(t.root, Node::Leaf { label: true, samples: 2 });
    }

    #[test]
    fn xor_needs_depth_two() {
        let data = vec![
            s(&[false, false], false),
            s(&[false, true], true),
            s(&[true, false], true),
            s(&[true, true], false),
        ];
        // both root candidates gain zero bits; the zero-gain split on feature 0
        // is kept because its subtrees are decisive
        let t = train_tree(&data, &params(Some(2), 1), &mut Stream::seed_from_u64(0)).unwrap();
        assert_eq!(t.root.depth(), 2);
        assert!(matches!(t.root, Node::Split { feature: 0, gain, .. } if gain == 0.0));
        assert!(data.iter().all(|x| t.predict(&x.features).unwrap() == x.label));
        let shallow = train_tree(&data, &params(Some(1), 1), &mut Stream::seed_from_u64(0)).unwrap();
        assert!(data.iter().any(|x| shallow.predict(&x.features).unwrap() != x.label));
    }

    #[test]
    fn uninformative_splits_are_pruned() {
        // every mask has a false majority, so no split can change a prediction
        let data = vec![
            s(&[true, false], true),
            s(&[true, false], false),
            s(&[true, false], false),
            s(&[false, true], false),
            s(&[false, false], true),
            s(&[false, false], false),
        ];
        let t = train_tree(&data, &params(None, 1), &mut Stream::seed_from_u64(0)).unwrap();
        assert_eq!(t.root, Node::Leaf { label: false, samples: 6 });
    }

    #[test]
    fn min_leaf_blocks_small_children() {
        let data = vec![
            s(&[true], true),
            s(&[false], false),
            s(&[false], false),
            s(&[false], false),
        ];
        let t = train_tree(&data, &params(None, 2), &mut Stream::seed_from_u64(0)).unwrap();
        assert!(matches!(t.root, Node::Leaf { label: false, samples: 4 }));
    }

    #[test]
    fn tie_on_gain_prefers_lowest_feature() {
        let data = vec![s(&[true, true], true), s(&[false, false], false)];
        let t = train_tree(&data, &params(None, 1), &mut Stream::seed_from_u64(0)).unwrap();
        assert!(matches!(t.root, Node::Split { feature: 0, .. }));
    }

    #[test]
    fn bootstrap_keeps_size_and_leaf_counts_sum() {
        let data: Vec<Sample> = (0..37)
            .map(|i| s(&[i % 2 == 0, i % 3 == 0], i % 2 == 0))
            .collect();
        let mut rng = Stream::seed_from_u64(9);
        let boot = bootstrap(&data, &mut rng);
        assert_eq!(boot.len(), data.len());
        let t = train_tree(&boot, &params(None, 1), &mut rng).unwrap();
        assert_eq!(t.leaf_total(), 37);
    }
}
