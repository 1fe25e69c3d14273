use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub const GBT_MIN_ROWS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GbtParams {
    pub rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
}

impl Default for GbtParams {
    fn default() -> Self {
        Self {
            rounds: 200,
            max_depth: 3,
            learning_rate: 0.1,
        }
    }
}

impl GbtParams {
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::InvalidConfig("gbt rounds must be at least 1".into()));
        }
        if self.max_depth == 0 {
            return Err(Error::InvalidConfig("gbt depth must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "gbt learning rate {} outside (0, 1]",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf(f64),
    /// Rows with `x[feature] <= threshold` go to `left`.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Regression tree stored as a node arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbtModel {
    pub base: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
    /// Training MSE after each round.
    pub train_mse: Vec<f64>,
    n_features: usize,
}

struct Best {
    gain: f64,
    feature: usize,
    threshold: f64,
    /// Position in the node's sorted order of the last left row.
    cut: usize,
}

struct Builder<'a> {
    x: &'a Matrix,
    residual: &'a [f64],
    max_depth: usize,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    /// `sorted[f]` holds the node's rows ordered by feature `f`.
    fn grow(&mut self, sorted: Vec<Vec<usize>>, depth: usize) -> usize {
        let rows = &sorted[0];
        let n = rows.len();
        let total: f64 = rows.iter().map(|&i| self.residual[i]).sum();
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf(total / n as f64));
        if depth == self.max_depth || n < 2 {
            return id;
        }
        let base_score = total * total / n as f64;
        let mut best: Option<Best> = None;
        for (f, order) in sorted.iter().enumerate() {
            let mut left_sum = 0.0;
            for pos in 0..n - 1 {
                let i = order[pos];
                left_sum += self.residual[i];
                let here = self.x.get(i, f);
                let next = self.x.get(order[pos + 1], f);
                if here == next {
                    continue;
                }
                let nl = (pos + 1) as f64;
                let nr = (n - pos - 1) as f64;
                let right_sum = total - left_sum;
                let gain = left_sum * left_sum / nl + right_sum * right_sum / nr - base_score;
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(Best {
                        gain,
                        feature: f,
                        threshold: here,
                        cut: pos,
                    });
                }
            }
        }
        let scale: f64 = rows.iter().map(|&i| self.residual[i] * self.residual[i]).sum();
        let Some(best) = best.filter(|b| b.gain > 1e-12 * scale.max(f64::MIN_POSITIVE)) else {
            return id;
        };
        let mut goes_left = vec![false; self.x.rows()];
        for &i in &sorted[best.feature][..=best.cut] {
            goes_left[i] = true;
        }
        let (mut left, mut right) = (Vec::with_capacity(sorted.len()), Vec::with_capacity(sorted.len()));
        for order in sorted {
            let (l, r): (Vec<usize>, Vec<usize>) = order.into_iter().partition(|&i| goes_left[i]);
            left.push(l);
            right.push(r);
        }
        let l = self.grow(left, depth + 1);
        let r = self.grow(right, depth + 1);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: l,
            right: r,
        };
        id
    }
}

fn mse(y: &[f64], pred: &[f64]) -> f64 {
    y.iter().zip(pred).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64
}

/// Squared-error gradient boosting with exact greedy splits.
pub fn gbt_fit(x: &Matrix, y: &[f64], params: &GbtParams) -> Result<GbtModel> {
    params.validate()?;
    if y.len() != x.rows() {
        return Err(Error::dim(format!("{} targets for {} rows", y.len(), x.rows())));
    }
    if x.rows() < GBT_MIN_ROWS {
        return Err(Error::Fit(format!(
            "gbt needs at least {GBT_MIN_ROWS} rows, got {}",
            x.rows()
        )));
    }
    if !x.all_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("gbt inputs must be finite".into()));
    }
    let n = y.len();
    let base = y.iter().sum::<f64>() / n as f64;
    let mut model = GbtModel {
        base,
        learning_rate: params.learning_rate,
        trees: Vec::new(),
        train_mse: Vec::new(),
        n_features: x.cols(),
    };
    if y.iter().all(|&v| v == y[0]) {
        model.base = y[0];
        return Ok(model);
    }
    let presorted: Vec<Vec<usize>> = (0..x.cols())
        .map(|f| {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)).then(a.cmp(&b)));
            order
        })
        .collect();
    let mut pred = vec![base; n];
    let mut residual = vec![0.0; n];
    for _ in 0..params.rounds {
        for i in 0..n {
            residual[i] = y[i] - pred[i];
        }
        let mut builder = Builder {
            x,
            residual: &residual,
            max_depth: params.max_depth,
            nodes: Vec::new(),
        };
        builder.grow(presorted.clone(), 0);
        let tree = Tree { nodes: builder.nodes };
        for (i, p) in pred.iter_mut().enumerate() {
            *p += params.learning_rate * tree.predict_row(x.row(i));
        }
        model.train_mse.push(mse(y, &pred));
        model.trees.push(tree);
    }
    Ok(model)
}

impl GbtModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.base
            + self.learning_rate * self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>()
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.n_features {
            return Err(Error::dim(format!(
                "input width {} vs model width {}",
                x.cols(),
                self.n_features
            )));
        }
        Ok(x.row_iter().map(|r| self.predict_row(r)).collect())
    }
}

pub fn gbt_predict(model: &GbtModel, x: &Matrix) -> Result<Vec<f64>> {
    model.predict(x)
}
