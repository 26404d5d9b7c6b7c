//! Binary regression trees with variance-reduction splits.
//!
//! Split candidates are the midpoints of consecutive sorted unique values of
//! each candidate variable; gain ties break toward the lower variable index
//! so tree construction is deterministic given the candidate set.

use nalgebra::DMatrix;

use super::Predictor;

/// A node: either a leaf mean or a split routing `row[var] <= threshold` to
/// the left child.
#[derive(Debug, Clone)]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        var: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Binary tree stored as a node arena with the root at index 0.
#[derive(Debug, Clone)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    var,
                    threshold,
                    left,
                    right,
                } => {
                    i = if row[*var] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    /// Every split threshold on `var`, for piecewise-constancy checks.
    pub fn thresholds(&self, var: usize) -> Vec<f64> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { var: v, threshold, .. } if *v == var => Some(*threshold),
                _ => None,
            })
            .collect()
    }
}

impl Predictor for RegressionTree {
    fn predict_row(&self, row: &[f64]) -> f64 {
        RegressionTree::predict_row(self, row)
    }
}

/// Best split of `rows` on `var`: (threshold, gain) where gain is the SSE
/// reduction, requiring at least `min_leaf` rows on each side.
pub(super) fn best_split_on_var(
    x: &DMatrix<f64>,
    y: &[f64],
    rows: &[usize],
    var: usize,
    min_leaf: usize,
) -> Option<(f64, f64)> {
    let mut order: Vec<usize> = rows.to_vec();
    order.sort_by(|&a, &b| x[(a, var)].partial_cmp(&x[(b, var)]).unwrap());
    let n = order.len();
    let total: f64 = order.iter().map(|&i| y[i]).sum();
    let mut left_sum = 0.0;
    let mut left_n = 0usize;
    let mut best: Option<(f64, f64)> = None;
    for w in 0..n - 1 {
        let i = order[w];
        left_sum += y[i];
        left_n += 1;
        let v = x[(i, var)];
        let v_next = x[(order[w + 1], var)];
        if v == v_next {
            continue; // not a boundary between distinct values
        }
        if left_n < min_leaf || n - left_n < min_leaf {
            continue;
        }
        // SSE reduction = sum_L^2/n_L + sum_R^2/n_R - total^2/n
        let right_sum = total - left_sum;
        let right_n = (n - left_n) as f64;
        let gain = left_sum * left_sum / left_n as f64 + right_sum * right_sum / right_n
            - total * total / n as f64;
        let threshold = 0.5 * (v + v_next);
        if best.map_or(true, |(_, g)| gain > g) {
            best = Some((threshold, gain));
        }
    }
    best
}

/// Grow a CART tree on `rows` by recursive best-gain splitting over the
/// candidate variables produced by `candidates` (called once per node).
pub(super) fn grow_tree<F>(
    x: &DMatrix<f64>,
    y: &[f64],
    rows: &[usize],
    min_leaf: usize,
    max_depth: usize,
    candidates: &mut F,
) -> RegressionTree
where
    F: FnMut() -> Vec<usize>,
{
    let mut nodes = Vec::new();
    grow_node(x, y, rows, min_leaf, max_depth, 0, candidates, &mut nodes);
    RegressionTree { nodes }
}

#[allow(clippy::too_many_arguments)]
fn grow_node<F>(
    x: &DMatrix<f64>,
    y: &[f64],
    rows: &[usize],
    min_leaf: usize,
    max_depth: usize,
    depth: usize,
    candidates: &mut F,
    nodes: &mut Vec<Node>,
) -> usize
where
    F: FnMut() -> Vec<usize>,
{
    let mean = rows.iter().map(|&i| y[i]).sum::<f64>() / rows.len() as f64;
    let here = nodes.len();
    nodes.push(Node::Leaf { value: mean });
    if depth >= max_depth || rows.len() < 2 * min_leaf {
        return here;
    }
    let mut vars = candidates();
    vars.sort_unstable(); // ascending order makes gain ties deterministic
    let mut best: Option<(usize, f64, f64)> = None;
    for var in vars {
        if let Some((threshold, gain)) = best_split_on_var(x, y, rows, var, min_leaf) {
            // strict improvement keeps the lowest variable index on ties
            if gain > 1e-12 && best.map_or(true, |(_, _, g)| gain > g) {
                best = Some((var, threshold, gain));
            }
        }
    }
    let Some((var, threshold, _)) = best else {
        return here;
    };
    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
        rows.iter().partition(|&&i| x[(i, var)] <= threshold);
    let left = grow_node(
        x, y, &left_rows, min_leaf, max_depth, depth + 1, candidates, nodes,
    );
    let right = grow_node(
        x, y, &right_rows, min_leaf, max_depth, depth + 1, candidates, nodes,
    );
    nodes[here] = Node::Split {
        var,
        threshold,
        left,
        right,
    };
    here
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    fn step_data() -> (DMatrix<f64>, Vec<f64>) {
        // y jumps at x0 = 2.5
        let x = DMatrix::from_fn(6, 2, |i, j| if j == 0 { i as f64 } else { (i % 2) as f64 });
        let y = vec![1.0, 1.0, 1.0, 5.0, 5.0, 5.0];
        (x, y)
    }

    #[test]
    fn best_split_finds_step_boundary() {
        let (x, y) = step_data();
        let rows: Vec<usize> = (0..6).collect();
        let (threshold, gain) = best_split_on_var(&x, &y, &rows, 0, 1).unwrap();
        assert_abs_diff_eq!(threshold, 2.5, epsilon = 1e-12);
        // SSE drops from 24 to 0
        assert_abs_diff_eq!(gain, 24.0, epsilon = 1e-9);
    }

    #[test]
    fn full_tree_interpolates() {
        let x = DMatrix::from_fn(10, 1, |i, _| i as f64);
        let y: Vec<f64> = (0..10).map(|i| ((i * 37) % 11) as f64).collect();
        let rows: Vec<usize> = (0..10).collect();
        let tree = grow_tree(&x, &y, &rows, 1, usize::MAX, &mut || vec![0]);
        for i in 0..10 {
            assert_abs_diff_eq!(tree.predict_row(&[i as f64]), y[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn depth_zero_is_training_mean() {
        let (x, y) = step_data();
        let rows: Vec<usize> = (0..6).collect();
        let tree = grow_tree(&x, &y, &rows, 1, 0, &mut || vec![0, 1]);
        assert_eq!(tree.n_leaves(), 1);
        assert_abs_diff_eq!(tree.predict_row(&[99.0, 0.0]), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn predictions_piecewise_constant_between_thresholds() {
        let (x, y) = step_data();
        let rows: Vec<usize> = (0..6).collect();
        let tree = grow_tree(&x, &y, &rows, 1, usize::MAX, &mut || vec![0, 1]);
        // perturbations that cross no split threshold leave predictions fixed
        let mut ts = tree.thresholds(0);
        ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for i in 0..6 {
            let base = x[(i, 0)];
            let eps = 0.01; // smaller than any gap to a threshold midpoint
            for delta in [-eps, eps] {
                let moved = base + delta;
                let crosses = ts
                    .iter()
                    .any(|&t| (base <= t) != (moved <= t));
                if !crosses {
                    assert_eq!(
                        tree.predict_row(&[moved, x[(i, 1)]]),
                        tree.predict_row(&[base, x[(i, 1)]]),
                    );
                }
            }
        }
    }

    #[test]
    fn tie_breaks_toward_lower_variable_index() {
        // two identical columns: the split must use column 0
        let x = DMatrix::from_fn(6, 2, |i, _| i as f64);
        let y = vec![0.0, 0.0, 0.0, 4.0, 4.0, 4.0];
        let rows: Vec<usize> = (0..6).collect();
        let tree = grow_tree(&x, &y, &rows, 1, 1, &mut || vec![1, 0]);
        match &tree.nodes[0] {
            Node::Split { var, .. } => assert_eq!(*var, 0),
            _ => panic!("expected a split"),
        }
    }
}
