use rand::seq::index::sample;
use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Training mean at this node.
        value: f64,
    },
}

/// A CART regression tree stored as a node arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    pub(crate) nodes: Vec<Node>,
}

pub(crate) struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub n_try: usize,
}

impl RegressionTree {
    /// Grows a tree on rows `idx` (with repetition for bootstrap samples).
    /// `x` is column-major: `x[f][r]`.
    pub(crate) fn fit<R: Rng>(x: &[Vec<f64>], y: &[f64], idx: Vec<usize>, params: &TreeParams, rng: &mut R) -> Self {
        let mut tree = Self { nodes: Vec::new() };
        tree.grow(x, y, idx, 0, params, rng);
        tree
    }

    fn grow<R: Rng>(
        &mut self,
        x: &[Vec<f64>],
        y: &[f64],
        idx: Vec<usize>,
        depth: usize,
        params: &TreeParams,
        rng: &mut R,
    ) -> usize {
        let id = self.nodes.len();
        let value = idx.iter().map(|&r| y[r]).sum::<f64>() / idx.len() as f64;
        self.nodes.push(Node::Leaf { value });
        let can_split = idx.len() >= 2 * params.min_samples_leaf && params.max_depth.is_none_or(|d| depth < d);
        if !can_split {
            return id;
        }
        let Some((feature, threshold)) = best_split(x, y, &idx, params, rng) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x[feature][i] <= threshold);
        let left = self.grow(x, y, l, depth + 1, params, rng);
        let right = self.grow(x, y, r, depth + 1, params, rng);
        self.nodes[id] = Node::Split { feature, threshold, left, right, value };
        id
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut k = 0;
        loop {
            match self.nodes[k] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right, .. } => {
                    k = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn n_splits(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Split { .. })).count()
    }

    /// Adds to `acc[f]` the reduction in squared error, measured on rows
    /// `idx`, of every split on feature `f`. Node predictions are the
    /// training means, so on out-of-bag rows a split can increase the error.
    pub(crate) fn sse_reduction(&self, x: &[Vec<f64>], y: &[f64], idx: &[usize], acc: &mut [f64]) {
        self.visit(0, x, y, idx.to_vec(), acc);
    }

    fn visit(&self, k: usize, x: &[Vec<f64>], y: &[f64], idx: Vec<usize>, acc: &mut [f64]) {
        if idx.is_empty() {
            return;
        }
        if let Node::Split { feature, threshold, left, right, value } = self.nodes[k] {
            let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x[feature][i] <= threshold);
            let sse = |rows: &[usize], m: f64| rows.iter().map(|&i| (y[i] - m).powi(2)).sum::<f64>();
            let before = sse(&idx, value);
            let after = sse(&l, self.node_value(left)) + sse(&r, self.node_value(right));
            acc[feature] += before - after;
            self.visit(left, x, y, l, acc);
            self.visit(right, x, y, r, acc);
        }
    }

    fn node_value(&self, k: usize) -> f64 {
        match self.nodes[k] {
            Node::Leaf { value } | Node::Split { value, .. } => value,
        }
    }
}

/// Best variance-reducing split over a random subset of `n_try` features.
/// Ties keep the lowest feature index, then the lowest threshold.
fn best_split<R: Rng>(x: &[Vec<f64>], y: &[f64], idx: &[usize], params: &TreeParams, rng: &mut R) -> Option<(usize, f64)> {
    let n_features = x.len();
    let mut features = sample(rng, n_features, params.n_try.min(n_features)).into_vec();
    features.sort_unstable();
    let n = idx.len();
    let total: f64 = idx.iter().map(|&i| y[i]).sum();
    let total_sq: f64 = idx.iter().map(|&i| y[i] * y[i]).sum();
    let parent = total_sq - total * total / n as f64;
    if parent <= 1e-12 * total_sq.max(1.0) {
        return None;
    }
    let mut best: Option<(f64, usize, f64)> = None;
    let mut order = idx.to_vec();
    for &f in &features {
        let col = &x[f];
        order.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
        let (mut sl, mut sql) = (0.0, 0.0);
        for k in 0..n - 1 {
            let yi = y[order[k]];
            sl += yi;
            sql += yi * yi;
            let nl = k + 1;
            let nr = n - nl;
            if nl < params.min_samples_leaf || nr < params.min_samples_leaf {
                continue;
            }
            let (a, b) = (col[order[k]], col[order[k + 1]]);
            if a >= b {
                continue;
            }
            let sr = total - sl;
            let sqr = total_sq - sql;
            let child = (sql - sl * sl / nl as f64) + (sqr - sr * sr / nr as f64);
            let gain = parent - child;
            if gain > 1e-12 * parent && best.is_none_or(|(g, _, _)| gain > g) {
                best = Some((gain, f, a + (b - a) / 2.0));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}
