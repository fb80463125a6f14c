//! k-nearest-neighbour distances with a kd-tree, and the
//! Kozachenko–Leonenko differential entropy estimator.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{Error, Result};
use crate::rng::SeededRng;

const LEAF_SIZE: usize = 16;
const JITTER: f64 = 1e-10;
const JITTER_SEED: u64 = 0x6b6e_6e;

enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// Static kd-tree over the rows of a point set.
pub struct KdTree {
    dim: usize,
    /// Row-major copy of the points.
    coords: Vec<f64>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl KdTree {
    pub fn new(points: &DMatrix<f64>) -> Self {
        let (n, dim) = points.shape();
        let mut coords = Vec::with_capacity(n * dim);
        for r in 0..n {
            coords.extend(points.row(r).iter());
        }
        let mut tree = Self {
            dim,
            coords,
            order: (0..n).collect(),
            nodes: Vec::new(),
        };
        if n > 0 {
            tree.build(0, n);
        }
        tree
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let axis = (0..self.dim)
            .map(|a| {
                let (lo, hi) =
                    self.order[start..end]
                        .iter()
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                            let v = self.coords[i * self.dim + a];
                            (lo.min(v), hi.max(v))
                        });
                (a, hi - lo)
            })
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .map_or(0, |(a, _)| a);
        let mid = start + (end - start) / 2;
        let (dim, coords) = (self.dim, &self.coords);
        self.order[start..end].select_nth_unstable_by(mid - start, |&i, &j| {
            coords[i * dim + axis].total_cmp(&coords[j * dim + axis])
        });
        let value = self.coords[self.order[mid] * dim + axis];
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    /// Squared distances to the `k` nearest rows other than `skip`, ascending.
    pub fn nearest(&self, query: &[f64], k: usize, skip: Option<usize>) -> Vec<f64> {
        let mut best: Vec<f64> = Vec::with_capacity(k + 1);
        if !self.nodes.is_empty() && k > 0 {
            self.search(0, query, k, skip, &mut best);
        }
        best
    }

    fn search(&self, node: usize, query: &[f64], k: usize, skip: Option<usize>, best: &mut Vec<f64>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    if Some(i) == skip {
                        continue;
                    }
                    let d2: f64 = self.point(i).iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum();
                    if best.len() < k || d2 < best[k - 1] {
                        let pos = best.partition_point(|&b| b <= d2);
                        best.insert(pos, d2);
                        best.truncate(k);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = query[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, query, k, skip, best);
                if best.len() < k || diff * diff <= best[k - 1] {
                    self.search(far, query, k, skip, best);
                }
            }
        }
    }
}

/// Euclidean distance from every row to its `k`-th nearest other row.
pub fn kth_neighbor_distances(points: &DMatrix<f64>, k: usize) -> Result<Vec<f64>> {
    let n = points.nrows();
    if k == 0 || n <= k {
        return Err(Error::invalid(format!("need more than k = {k} points, got {n}")));
    }
    let tree = KdTree::new(points);
    Ok((0..n)
        .into_par_iter()
        .map(|i| tree.nearest(tree.point(i), k, Some(i))[k - 1].sqrt())
        .collect())
}

/// `ln` of the volume of the unit `d`-ball.
fn log_unit_ball(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    h * PI.ln() - ln_gamma(h + 1.0)
}

/// Kozachenko–Leonenko estimate of the differential entropy (nats) of the
/// distribution behind the rows of `samples`:
/// `ψ(S) − ψ(k) + ln V_d + (d/S) Σ ln ε_i`.
///
/// Coincident points would give zero distances; in that case every point is
/// perturbed by a seeded Gaussian jitter of relative size `1e-10` first.
pub fn knn_entropy(samples: &DMatrix<f64>, k: usize) -> Result<f64> {
    let (n, d) = samples.shape();
    if d == 0 {
        return Err(Error::invalid("entropy needs at least one dimension"));
    }
    if !samples.iter().all(|v| v.is_finite()) {
        return Err(Error::invalid("samples contain non-finite values"));
    }
    let mut eps = kth_neighbor_distances(samples, k)?;
    if eps.contains(&0.0) {
        let first = samples.row(0);
        if samples.row_iter().all(|r| r == first) {
            return Err(Error::Degenerate("all samples are identical".into()));
        }
        // proportional to the data so the estimate stays scale-equivariant
        let scale = JITTER * samples.amax();
        let mut rng = SeededRng::new(JITTER_SEED);
        let jittered = samples.map(|v| v + scale * rng.normal());
        eps = kth_neighbor_distances(&jittered, k)?;
        if eps.contains(&0.0) {
            return Err(Error::Degenerate("duplicate samples survive jitter".into()));
        }
    }
    let mean_log: f64 = eps.iter().map(|e| e.ln()).sum::<f64>() / n as f64;
    Ok(digamma(n as f64) - digamma(k as f64) + log_unit_ball(d) + d as f64 * mean_log)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force(points: &DMatrix<f64>, k: usize) -> Vec<f64> {
        (0..points.nrows())
            .map(|i| {
                let mut d: Vec<f64> = (0..points.nrows())
                    .filter(|&j| j != i)
                    .map(|j| (points.row(i) - points.row(j)).norm())
                    .collect();
                d.sort_by(f64::total_cmp);
                d[k - 1]
            })
            .collect()
    }

    #[test]
    fn tree_matches_brute_force() {
        let mut rng = SeededRng::new(1);
        for &(n, d, k) in &[(300, 1, 1), (500, 3, 5), (200, 6, 3), (40, 2, 39)] {
            let pts = DMatrix::from_fn(n, d, |_, _| rng.normal());
            let fast = kth_neighbor_distances(&pts, k).unwrap();
            assert_eq!(fast, brute_force(&pts, k));
        }
    }

    #[test]
    fn unit_ball_volumes() {
        assert!((log_unit_ball(1) - 2f64.ln()).abs() < 1e-12);
        assert!((log_unit_ball(2) - PI.ln()).abs() < 1e-12);
        assert!((log_unit_ball(3) - (4.0 * PI / 3.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn gaussian_entropy_is_recovered() {
        let mut rng = SeededRng::new(2);
        let pts = DMatrix::from_fn(10_000, 1, |_, _| 2.0 * rng.normal());
        let h = knn_entropy(&pts, 5).unwrap();
        assert!((h - 2.1121).abs() < 0.05, "{h}");
    }

    #[test]
    fn scaling_shifts_by_d_ln_c() {
        let mut rng = SeededRng::new(3);
        let pts = DMatrix::from_fn(2000, 3, |_, _| rng.normal());
        let h = knn_entropy(&pts, 5).unwrap();
        let hc = knn_entropy(&(&pts * 7.0), 5).unwrap();
        assert!((hc - h - 3.0 * 7f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn scaling_with_duplicates() {
        let mut rng = SeededRng::new(5);
        let mut pts = DMatrix::from_fn(1000, 2, |_, _| rng.normal());
        for r in 0..20 {
            pts.row_mut(r).fill(0.0);
        }
        let h = knn_entropy(&pts, 5).unwrap();
        for c in [0.1, 10.0] {
            let hc = knn_entropy(&(&pts * c), 5).unwrap();
            assert!((hc - h - 2.0 * f64::ln(c)).abs() < 1e-9);
        }
    }

    #[test]
    fn duplicates_and_degenerate_input() {
        let mut rng = SeededRng::new(4);
        let mut pts = DMatrix::from_fn(500, 2, |_, _| rng.normal());
        for r in 250..500 {
            let src = pts.row(r - 250).into_owned();
            pts.row_mut(r).copy_from(&src);
        }
        let h = knn_entropy(&pts, 1).unwrap();
        assert!(h.is_finite());
        assert_eq!(h, knn_entropy(&pts, 1).unwrap());
        let same = DMatrix::from_element(100, 2, 1.5);
        assert!(matches!(knn_entropy(&same, 5), Err(Error::Degenerate(_))));
        assert!(matches!(
            knn_entropy(&pts.rows(0, 5).into_owned(), 5),
            Err(Error::InvalidArgument(_))
        ));
    }
}
