//! Bagged regression trees on binned features. Deliberately rough: deep
//! trees with small leaves interpolate the training data, which is what
//! makes in-sample nuisance predictions overfit.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    fn predict(&self, row: &[f64]) -> f64 {
        match self {
            Node::Leaf(v) => *v,
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if row[*feature] <= *threshold {
                    left.predict(row)
                } else {
                    right.predict(row)
                }
            }
        }
    }
}

pub struct TreeEnsemble {
    trees: Vec<Node>,
}

pub struct TreeParams {
    pub trees: usize,
    pub depth: usize,
    pub min_leaf: usize,
    pub bins: usize,
    pub seed: u64,
}

struct Builder<'a> {
    bins: &'a [Vec<u16>],
    edges: &'a [Vec<f64>],
    y: &'a [f64],
    w: &'a [f64],
    depth: usize,
    min_leaf: usize,
}

impl Builder<'_> {
    fn leaf(&self, rows: &[usize]) -> Node {
        let (mut s, mut t) = (0.0, 0.0);
        for &r in rows {
            s += self.w[r] * self.y[r];
            t += self.w[r];
        }
        Node::Leaf(if t > 0.0 { s / t } else { 0.0 })
    }

    fn build(&self, rows: Vec<usize>, level: usize) -> Node {
        if level >= self.depth || rows.len() < 2 * self.min_leaf {
            return self.leaf(&rows);
        }
        let (mut sy, mut sw) = (0.0, 0.0);
        for &r in &rows {
            sy += self.w[r] * self.y[r];
            sw += self.w[r];
        }
        let mut best: Option<(f64, usize, usize)> = None;
        for (f, edges) in self.edges.iter().enumerate() {
            let nb = edges.len() + 1;
            if nb < 2 {
                continue;
            }
            let mut hs = vec![0.0; nb];
            let mut hw = vec![0.0; nb];
            let mut hc = vec![0usize; nb];
            for &r in &rows {
                let b = self.bins[f][r] as usize;
                hs[b] += self.w[r] * self.y[r];
                hw[b] += self.w[r];
                hc[b] += 1;
            }
            let (mut ls, mut lw, mut lc) = (0.0, 0.0, 0usize);
            for b in 0..nb - 1 {
                ls += hs[b];
                lw += hw[b];
                lc += hc[b];
                let rc = rows.len() - lc;
                if lc < self.min_leaf || rc < self.min_leaf {
                    continue;
                }
                let rw = sw - lw;
                if lw <= 0.0 || rw <= 0.0 {
                    continue;
                }
                let rs = sy - ls;
                // reduction in weighted squared error, up to a constant
                let gain = ls * ls / lw + rs * rs / rw;
                if best.map_or(true, |(g, _, _)| gain > g + 1e-12) {
                    best = Some((gain, f, b));
                }
            }
        }
        let parent = sy * sy / sw;
        match best {
            Some((gain, f, b)) if gain > parent + 1e-12 => {
                let (l, r): (Vec<usize>, Vec<usize>) =
                    rows.into_iter().partition(|&r| (self.bins[f][r] as usize) <= b);
                Node::Split {
                    feature: f,
                    threshold: self.edges[f][b],
                    left: Box::new(self.build(l, level + 1)),
                    right: Box::new(self.build(r, level + 1)),
                }
            }
            _ => self.leaf(&rows),
        }
    }
}

/// Quantile cut points (at most `bins - 1`) for one feature.
fn cut_points(values: &[f64], bins: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    sorted.dedup();
    if sorted.len() <= bins {
        return sorted.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    }
    let mut cuts: Vec<f64> = (1..bins)
        .map(|k| {
            let i = k * sorted.len() / bins;
            0.5 * (sorted[i - 1] + sorted[i])
        })
        .collect();
    cuts.dedup();
    cuts
}

impl TreeEnsemble {
    pub fn fit(x: &DMatrix<f64>, y: &[f64], w: Option<&[f64]>, params: &TreeParams) -> TreeEnsemble {
        let n = x.nrows();
        let p = x.ncols();
        let edges: Vec<Vec<f64>> = (0..p)
            .map(|f| cut_points(&x.column(f).iter().copied().collect::<Vec<_>>(), params.bins.max(2)))
            .collect();
        let bins: Vec<Vec<u16>> = (0..p)
            .map(|f| {
                (0..n)
                    .map(|r| edges[f].partition_point(|&c| c < x[(r, f)]) as u16)
                    .collect()
            })
            .collect();
        let base_w: Vec<f64> = w.map_or_else(|| vec![1.0; n], |w| w.to_vec());
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut trees = Vec::with_capacity(params.trees);
        for _ in 0..params.trees.max(1) {
            // bootstrap multiplicities act as weights
            let mut counts = vec![0.0; n];
            for _ in 0..n {
                counts[rng.gen_range(0..n)] += 1.0;
            }
            let bw: Vec<f64> = counts.iter().zip(&base_w).map(|(c, w)| c * w).collect();
            let rows: Vec<usize> = (0..n).filter(|&r| bw[r] > 0.0).collect();
            let builder = Builder {
                bins: &bins,
                edges: &edges,
                y,
                w: &bw,
                depth: params.depth,
                min_leaf: params.min_leaf.max(1),
            };
            trees.push(builder.build(rows, 0));
        }
        TreeEnsemble { trees }
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let n = x.nrows();
        let mut row = vec![0.0; x.ncols()];
        (0..n)
            .map(|r| {
                for (c, v) in row.iter_mut().enumerate() {
                    *v = x[(r, c)];
                }
                self.trees.iter().map(|t| t.predict(&row)).sum::<f64>() / self.trees.len() as f64
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_a_step_function() {
        let n = 400;
        let x = DMatrix::from_fn(n, 1, |r, _| r as f64 / n as f64);
        let y: Vec<f64> = (0..n).map(|r| if r < n / 2 { 0.0 } else { 1.0 }).collect();
        let params = TreeParams {
            trees: 10,
            depth: 3,
            min_leaf: 5,
            bins: 32,
            seed: 1,
        };
        let m = TreeEnsemble::fit(&x, &y, None, &params);
        let probe = DMatrix::from_column_slice(2, 1, &[0.1, 0.9]);
        let p = m.predict(&probe);
        assert!(p[0] < 0.05 && p[1] > 0.95);
    }
}
