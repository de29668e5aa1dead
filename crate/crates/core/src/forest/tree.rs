//! CART regression tree fitting.
//!
//! Greedy top-down growth. Each node that attempts a split draws a
//! subset of feature indices from the tree's generator (depth-first
//! preorder, left child before right), enumerates midpoint thresholds
//! between consecutive distinct sorted values of each drawn feature and
//! keeps the split with the smallest summed child deviance (equivalent
//! to maximal variance reduction). Ties keep the lowest feature index,
//! then the lowest threshold.
//!
//! Internally the fitter maintains one presorted position array per
//! feature, stably partitioned at each split, so no per-node sorting is
//! needed. All running statistics use Welford accumulation.

use crate::rng::Xoshiro256PlusPlus;

use super::{HyperParams, TreeNode};

/// Sentinel for child slots that are patched once the child is built.
const UNPATCHED: u32 = u32::MAX;

struct NodeTask {
    start: usize,
    end: usize,
    depth: usize,
    /// (parent arena index, is_left_child); None for the root.
    parent_slot: Option<(usize, bool)>,
    /// Node mean/deviance carried from the parent's winning scan.
    stats: Option<(f64, f64)>,
}

struct Workspace {
    /// Column-major sample values, `xt[f * n + i]` for position `i`.
    xt: Vec<f64>,
    /// Per feature, sample positions sorted by (value, position).
    order: Vec<u32>,
    /// Target per sample position.
    y: Vec<f64>,
    goes_left: Vec<bool>,
    tmp: Vec<u32>,
    rev_mean: Vec<f64>,
    rev_m2: Vec<f64>,
    subset: Vec<u32>,
    pool: Vec<u32>,
}

/// Fit one tree on the given sample positions.
///
/// `samples` maps sample position to row index in `rows` (bootstrap
/// resolution happens before this call; the caller has already drawn
/// those indices from `rng`).
pub(crate) fn fit_tree_with_samples(
    rows: &[f64],
    n_features: usize,
    y: &[f64],
    samples: &[u32],
    hyper: &HyperParams,
    features_per_split: usize,
    rng: &mut Xoshiro256PlusPlus,
) -> Vec<TreeNode> {
    let n = samples.len();
    let nf = n_features;
    let mut ws = Workspace {
        xt: vec![0.0; nf * n],
        order: vec![0; nf * n],
        y: Vec::with_capacity(n),
        goes_left: vec![false; n],
        tmp: vec![0; n],
        rev_mean: vec![0.0; n],
        rev_m2: vec![0.0; n],
        subset: Vec::with_capacity(features_per_split),
        pool: Vec::with_capacity(nf),
    };
    for (i, &row) in samples.iter().enumerate() {
        let base = row as usize * nf;
        for f in 0..nf {
            ws.xt[f * n + i] = rows[base + f];
        }
        ws.y.push(y[row as usize]);
    }
    for f in 0..nf {
        let (xt, order) = (&ws.xt[f * n..(f + 1) * n], &mut ws.order[f * n..(f + 1) * n]);
        for (i, slot) in order.iter_mut().enumerate() {
            *slot = i as u32;
        }
        order.sort_unstable_by(|&a, &b| {
            xt[a as usize]
                .total_cmp(&xt[b as usize])
                .then(a.cmp(&b))
        });
    }

    let depth_limit = hyper.max_depth.unwrap_or(usize::MAX);
    let mut nodes: Vec<TreeNode> = Vec::new();
    let mut stack = vec![NodeTask {
        start: 0,
        end: n,
        depth: 0,
        parent_slot: None,
        stats: None,
    }];

    while let Some(task) = stack.pop() {
        let s = task.end - task.start;
        let (mean, m2) = task.stats.unwrap_or_else(|| {
            // Root statistics in sample-position order.
            let mut mean = 0.0;
            let mut m2 = 0.0;
            for (i, &v) in ws.y[task.start..task.end].iter().enumerate() {
                let delta = v - mean;
                mean += delta / (i + 1) as f64;
                m2 += delta * (v - mean);
            }
            (mean, m2)
        });

        let node_index = nodes.len();
        if let Some((parent, is_left)) = task.parent_slot {
            if let TreeNode::Internal { left, right, .. } = &mut nodes[parent] {
                if is_left {
                    *left = node_index as u32;
                } else {
                    *right = node_index as u32;
                }
            }
        }

        let can_split = s >= hyper.min_samples_split && task.depth < depth_limit && m2 > 0.0;
        let split = if can_split {
            best_split(&mut ws, n, task.start, task.end, hyper, features_per_split, rng)
        } else {
            None
        };

        match split {
            None => {
                nodes.push(TreeNode::Leaf {
                    value: mean,
                    n_samples: s as u32,
                });
            }
            Some(best) => {
                nodes.push(TreeNode::Internal {
                    feature_index: best.feature as u32,
                    threshold: best.threshold,
                    left: UNPATCHED,
                    right: UNPATCHED,
                });
                partition(&mut ws, n, nf, task.start, task.end, best.feature, best.n_left);
                let mid = task.start + best.n_left;
                // Right pushed first so the left child pops (and is
                // built, drawing its feature subset) first.
                stack.push(NodeTask {
                    start: mid,
                    end: task.end,
                    depth: task.depth + 1,
                    parent_slot: Some((node_index, false)),
                    stats: Some((best.right_mean, best.right_m2)),
                });
                stack.push(NodeTask {
                    start: task.start,
                    end: mid,
                    depth: task.depth + 1,
                    parent_slot: Some((node_index, true)),
                    stats: Some((best.left_mean, best.left_m2)),
                });
            }
        }
    }
    nodes
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    /// Boundary position within the feature's sorted segment.
    n_left: usize,
    left_mean: f64,
    left_m2: f64,
    right_mean: f64,
    right_m2: f64,
}

fn best_split(
    ws: &mut Workspace,
    n: usize,
    start: usize,
    end: usize,
    hyper: &HyperParams,
    features_per_split: usize,
    rng: &mut Xoshiro256PlusPlus,
) -> Option<BestSplit> {
    let s = end - start;
    let min_leaf = hyper.min_samples_leaf;
    let nf = ws.xt.len() / n;
    rng.distinct_sorted_into(nf, features_per_split, &mut ws.pool, &mut ws.subset);

    let mut best: Option<BestSplit> = None;
    let mut best_score = f64::INFINITY;
    // Workspace fields are borrowed separately to scan while writing
    // scratch.
    let subset = std::mem::take(&mut ws.subset);
    for &f in &subset {
        let f = f as usize;
        let seg = &ws.order[f * n + start..f * n + end];
        let col = &ws.xt[f * n..(f + 1) * n];

        // Suffix Welford stats: rev_m2[j] is the deviance of samples
        // [j..s) of this segment.
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for (k, &pos) in seg.iter().enumerate().rev() {
            let yv = ws.y[pos as usize];
            let count = (s - k) as f64;
            let delta = yv - mean;
            mean += delta / count;
            m2 += delta * (yv - mean);
            ws.rev_mean[k] = mean;
            ws.rev_m2[k] = m2;
        }

        // Forward scan: add one sample to the left side, then test the
        // boundary before the next sample.
        let mut left_mean = 0.0;
        let mut left_m2 = 0.0;
        let mut prev_val = col[seg[0] as usize];
        for j in 1..s {
            let prev_pos = seg[j - 1] as usize;
            let yv = ws.y[prev_pos];
            let delta = yv - left_mean;
            left_mean += delta / j as f64;
            left_m2 += delta * (yv - left_mean);

            let val = col[seg[j] as usize];
            if val > prev_val {
                if j >= min_leaf && s - j >= min_leaf {
                    let threshold = 0.5 * (prev_val + val);
                    // Degenerate adjacency: the midpoint must route the
                    // right block right.
                    if threshold < val {
                        let score = left_m2 + ws.rev_m2[j];
                        if score < best_score {
                            best_score = score;
                            best = Some(BestSplit {
                                feature: f,
                                threshold,
                                n_left: j,
                                left_mean,
                                left_m2,
                                right_mean: ws.rev_mean[j],
                                right_m2: ws.rev_m2[j],
                            });
                        }
                    }
                }
                prev_val = val;
            }
        }
    }
    ws.subset = subset;
    best
}

/// Stably partition every feature's sorted segment by the winning
/// split's left set (the first `n_left` positions of the winning
/// feature's segment).
fn partition(
    ws: &mut Workspace,
    n: usize,
    nf: usize,
    start: usize,
    end: usize,
    feature: usize,
    n_left: usize,
) {
    let seg = &ws.order[feature * n + start..feature * n + start + n_left];
    for &pos in seg {
        ws.goes_left[pos as usize] = true;
    }
    for f in 0..nf {
        let seg = &mut ws.order[f * n + start..f * n + end];
        let mut w = 0;
        ws.tmp.clear();
        for k in 0..seg.len() {
            let pos = seg[k];
            if ws.goes_left[pos as usize] {
                seg[w] = pos;
                w += 1;
            } else {
                ws.tmp.push(pos);
            }
        }
        seg[w..].copy_from_slice(&ws.tmp);
    }
    let seg = &ws.order[feature * n + start..feature * n + start + n_left];
    for &pos in seg {
        ws.goes_left[pos as usize] = false;
    }
}
