//! Level-wise regression tree engine over per-row gradient/hessian pairs.
//!
//! One grower serves every tree-based estimator. With gradient −w·y and
//! hessian w the split gain reduces to the classic weighted variance
//! criterion and leaves hold weighted target means; with the residual
//! gradient and regularization terms it is second-order boosting. Feature
//! orders are sorted once per fit and reused across trees and levels.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// A fitted tree; node 0 is the root and rows with feature value less than
/// or equal to a split threshold descend left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub nodes: Vec<TreeNode>,
}

impl TreeModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }
}

/// Growth constraints and regularization for one tree.
#[derive(Debug, Clone)]
pub struct GrowParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// Minimum hessian mass per child; 0 disables the constraint.
    pub min_child_weight: f64,
    /// Added to the hessian in every leaf value and gain denominator.
    pub lambda: f64,
    /// Subtracted from every split gain; splits with gain ≤ 0 are not made.
    pub gamma: f64,
    /// When set, each split considers only this many features, drawn without
    /// replacement from the candidate set.
    pub features_per_split: Option<usize>,
}

/// Row orders per feature, ties broken by row index. Built once per fit.
pub struct Presorted {
    order: Vec<Vec<u32>>,
}

impl Presorted {
    pub fn new(x: &Matrix) -> Self {
        let order = (0..x.cols())
            .map(|f| {
                let mut idx: Vec<u32> = (0..x.rows() as u32).collect();
                idx.sort_by(|&a, &b| {
                    x.get(a as usize, f)
                        .partial_cmp(&x.get(b as usize, f))
                        .expect("finite feature values")
                        .then(a.cmp(&b))
                });
                idx
            })
            .collect();
        Presorted { order }
    }
}

fn leaf_value(g: f64, h: f64, lambda: f64) -> f64 {
    let den = h + lambda;
    if den > 0.0 {
        -g / den
    } else {
        0.0
    }
}

struct Pending {
    node_id: usize,
    depth: usize,
    g: f64,
    h: f64,
    count: usize,
}

#[derive(Clone, Copy)]
struct Best {
    gain: f64,
    feature: usize,
    threshold: f64,
    gl: f64,
    hl: f64,
    cl: usize,
}

/// Grow one tree on the rows in `rows`, reading gradients and hessians by
/// absolute row index. `candidate_features` lists the columns available to
/// this tree (already column-subsampled by the caller when applicable);
/// `rng` is consumed only for per-split feature draws. Split candidates are
/// midpoints between consecutive distinct values; among equal gains the
/// lowest feature index and then the lowest threshold wins. When a
/// `gain_sink` is supplied, every committed split adds its gain to the
/// sink's entry for the split feature.
pub fn grow_tree(
    x: &Matrix,
    presorted: &Presorted,
    rows: &[u32],
    g: &[f64],
    h: &[f64],
    candidate_features: &[usize],
    params: &GrowParams,
    rng: &mut ChaCha8Rng,
    mut gain_sink: Option<&mut Vec<f64>>,
) -> TreeModel {
    let mut in_node: Vec<i32> = vec![-1; x.rows()];
    let mut g0 = 0.0;
    let mut h0 = 0.0;
    for &r in rows {
        in_node[r as usize] = 0;
        g0 += g[r as usize];
        h0 += h[r as usize];
    }
    let mut nodes = vec![TreeNode::Leaf {
        value: leaf_value(g0, h0, params.lambda),
    }];
    let mut level = vec![Pending {
        node_id: 0,
        depth: 0,
        g: g0,
        h: h0,
        count: rows.len(),
    }];

    let mask_words = (x.cols() + 63) / 64;
    while !level.is_empty() {
        let mut slot_of: Vec<i32> = vec![-1; nodes.len()];
        let mut splitting = vec![false; level.len()];
        let mut masks: Vec<Option<Vec<u64>>> = vec![None; level.len()];
        for (slot, p) in level.iter().enumerate() {
            slot_of[p.node_id] = slot as i32;
            let can = p.depth < params.max_depth
                && p.count >= params.min_samples_split
                && p.count >= 2 * params.min_samples_leaf;
            splitting[slot] = can;
            if can {
                if let Some(m) = params.features_per_split {
                    let m = m.clamp(1, candidate_features.len());
                    let chosen = rand::seq::index::sample(rng, candidate_features.len(), m);
                    let mut bits = vec![0u64; mask_words];
                    for ci in chosen.iter() {
                        let f = candidate_features[ci];
                        bits[f / 64] |= 1 << (f % 64);
                    }
                    masks[slot] = Some(bits);
                }
            }
        }

        let mut best: Vec<Option<Best>> = vec![None; level.len()];
        let mut scan_gl = vec![0.0; level.len()];
        let mut scan_hl = vec![0.0; level.len()];
        let mut scan_cl = vec![0usize; level.len()];
        let mut scan_prev = vec![0.0; level.len()];
        let mut scan_seen = vec![false; level.len()];

        for &f in candidate_features {
            for slot in 0..level.len() {
                scan_gl[slot] = 0.0;
                scan_hl[slot] = 0.0;
                scan_cl[slot] = 0;
                scan_seen[slot] = false;
            }
            for &r32 in &presorted.order[f] {
                let r = r32 as usize;
                let nid = in_node[r];
                if nid < 0 {
                    continue;
                }
                let slot = slot_of[nid as usize];
                if slot < 0 {
                    continue;
                }
                let slot = slot as usize;
                if !splitting[slot] {
                    continue;
                }
                if let Some(bits) = &masks[slot] {
                    if bits[f / 64] & (1 << (f % 64)) == 0 {
                        continue;
                    }
                }
                let v = x.get(r, f);
                let p = &level[slot];
                if scan_seen[slot] && v > scan_prev[slot] {
                    let threshold = 0.5 * (scan_prev[slot] + v);
                    // Degenerate midpoints of adjacent floats would desync
                    // the evaluated partition from the applied one.
                    if threshold > scan_prev[slot] && threshold < v {
                        let cl = scan_cl[slot];
                        let cr = p.count - cl;
                        let hl = scan_hl[slot];
                        let hr = p.h - hl;
                        if cl >= params.min_samples_leaf
                            && cr >= params.min_samples_leaf
                            && hl >= params.min_child_weight
                            && hr >= params.min_child_weight
                        {
                            let gl = scan_gl[slot];
                            let gr = p.g - gl;
                            let gain = 0.5
                                * (gl * gl / (hl + params.lambda)
                                    + gr * gr / (hr + params.lambda)
                                    - p.g * p.g / (p.h + params.lambda))
                                - params.gamma;
                            if gain > 0.0 && best[slot].map_or(true, |b| gain > b.gain) {
                                best[slot] = Some(Best {
                                    gain,
                                    feature: f,
                                    threshold,
                                    gl,
                                    hl,
                                    cl,
                                });
                            }
                        }
                    }
                }
                scan_gl[slot] += g[r];
                scan_hl[slot] += h[r];
                scan_cl[slot] += 1;
                scan_prev[slot] = v;
                scan_seen[slot] = true;
            }
        }

        let mut next: Vec<Pending> = Vec::new();
        let mut child_of: Vec<Option<(usize, usize, usize, f64)>> = vec![None; level.len()];
        for (slot, p) in level.iter().enumerate() {
            if let Some(b) = best[slot] {
                if let Some(sink) = gain_sink.as_deref_mut() {
                    sink[b.feature] += b.gain;
                }
                let left_id = nodes.len();
                let right_id = nodes.len() + 1;
                let gr = p.g - b.gl;
                let hr = p.h - b.hl;
                nodes[p.node_id] = TreeNode::Split {
                    feature: b.feature,
                    threshold: b.threshold,
                    left: left_id,
                    right: right_id,
                };
                nodes.push(TreeNode::Leaf {
                    value: leaf_value(b.gl, b.hl, params.lambda),
                });
                nodes.push(TreeNode::Leaf {
                    value: leaf_value(gr, hr, params.lambda),
                });
                child_of[slot] = Some((left_id, right_id, b.feature, b.threshold));
                next.push(Pending {
                    node_id: left_id,
                    depth: p.depth + 1,
                    g: b.gl,
                    h: b.hl,
                    count: b.cl,
                });
                next.push(Pending {
                    node_id: right_id,
                    depth: p.depth + 1,
                    g: gr,
                    h: hr,
                    count: p.count - b.cl,
                });
            }
        }

        for &r32 in rows {
            let r = r32 as usize;
            let nid = in_node[r];
            if nid < 0 {
                continue;
            }
            let slot = slot_of[nid as usize];
            if slot < 0 {
                continue;
            }
            match child_of[slot as usize] {
                Some((l, rt, f, thr)) => {
                    in_node[r] = if x.get(r, f) <= thr { l as i32 } else { rt as i32 };
                }
                None => in_node[r] = -1,
            }
        }
        level = next;
    }
    TreeModel { nodes }
}
