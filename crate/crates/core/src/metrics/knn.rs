use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Neighbour rank used for every k-NN manifold.
pub const DEFAULT_K: usize = 3;

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Union of balls around each point of a set, each ball reaching the
/// point's k-th nearest other element.
///
/// Points are kept sorted by their first coordinate so that neighbour and
/// membership scans can stop once the gap along that axis alone exceeds the
/// relevant radius. The answers are identical to exhaustive scans.
#[derive(Debug, Clone)]
pub struct KnnManifold {
    sorted: Array2<f64>,
    /// Position in the caller's ordering of each sorted row.
    order: Vec<usize>,
    radii_sq: Vec<f64>,
    max_radius_sq: f64,
    k: usize,
}

impl KnnManifold {
    pub fn new(points: ArrayView2<f64>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Parameter("k must be at least 1".into()));
        }
        if points.nrows() <= k {
            return Err(Error::Parameter(format!(
                "k-NN manifold with k = {k} needs more than {k} points, got {}",
                points.nrows()
            )));
        }
        if points.ncols() == 0 {
            return Err(Error::Shape("zero-dimensional features".into()));
        }
        let mut order: Vec<usize> = (0..points.nrows()).collect();
        order.sort_by(|&a, &b| points[[a, 0]].total_cmp(&points[[b, 0]]).then(a.cmp(&b)));
        let sorted = points.select(Axis(0), &order);
        let radii_sq: Vec<f64> = (0..sorted.nrows()).map(|i| kth_sq_distance(&sorted, i, k)).collect();
        let max_radius_sq = radii_sq.iter().copied().fold(0.0, f64::max);
        Ok(KnnManifold { sorted, order, radii_sq, max_radius_sq, k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// k-th neighbour distance of every point, in the caller's order.
    pub fn radii(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (pos, &orig) in self.order.iter().enumerate() {
            out[orig] = self.radii_sq[pos].sqrt();
        }
        out
    }

    /// Whether some ball of the manifold contains `phi`.
    pub fn contains(&self, phi: ArrayView1<f64>) -> bool {
        let x = phi[0];
        let start = self.sorted.column(0).as_slice().map_or_else(
            || self.sorted.column(0).iter().position(|&v| v >= x).unwrap_or(self.len()),
            |col| col.partition_point(|&v| v < x),
        );
        let covers = |j: usize| sq_dist(phi, self.sorted.row(j)) <= self.radii_sq[j];
        let mut up = start;
        let mut down = start;
        loop {
            let mut progressed = false;
            if up < self.len() {
                let dx = self.sorted[[up, 0]] - x;
                if dx * dx <= self.max_radius_sq {
                    if covers(up) {
                        return true;
                    }
                    up += 1;
                    progressed = true;
                } else {
                    up = self.len();
                }
            }
            if down > 0 {
                let dx = x - self.sorted[[down - 1, 0]];
                if dx * dx <= self.max_radius_sq {
                    if covers(down - 1) {
                        return true;
                    }
                    down -= 1;
                    progressed = true;
                } else {
                    down = 0;
                }
            }
            if !progressed {
                return false;
            }
        }
    }

    /// Fraction of `queries` inside the manifold.
    pub fn coverage(&self, queries: ArrayView2<f64>) -> Result<f64> {
        if queries.nrows() == 0 {
            return Err(Error::Parameter("no query points".into()));
        }
        if queries.ncols() != self.sorted.ncols() {
            return Err(Error::Shape(format!(
                "queries have {} dims, manifold has {}",
                queries.ncols(),
                self.sorted.ncols()
            )));
        }
        let hits = queries.rows().into_iter().filter(|q| self.contains(*q)).count();
        Ok(hits as f64 / queries.nrows() as f64)
    }
}

/// Squared distance from row `i` to its k-th nearest other row of `sorted`.
fn kth_sq_distance(sorted: &Array2<f64>, i: usize, k: usize) -> f64 {
    let n = sorted.nrows();
    let me = sorted.row(i);
    let x = me[0];
    // ascending buffer of the k smallest distances seen so far
    let mut best = vec![f64::INFINITY; k];
    let mut up = i + 1;
    let mut down = i;
    loop {
        let bound = best[k - 1];
        let mut progressed = false;
        if up < n {
            let dx = sorted[[up, 0]] - x;
            if dx * dx <= bound {
                offer(&mut best, sq_dist(me, sorted.row(up)));
                up += 1;
                progressed = true;
            } else {
                up = n;
            }
        }
        if down > 0 {
            let dx = x - sorted[[down - 1, 0]];
            if dx * dx <= best[k - 1] {
                offer(&mut best, sq_dist(me, sorted.row(down - 1)));
                down -= 1;
                progressed = true;
            } else {
                down = 0;
            }
        }
        if !progressed {
            return best[k - 1];
        }
    }
}

fn offer(best: &mut Vec<f64>, d: f64) {
    let k = best.len();
    if d < best[k - 1] {
        let pos = best.partition_point(|&b| b <= d);
        best.insert(pos, d);
        best.pop();
    }
}

/// Distance from element `index` of `set` to its k-th nearest other element.
pub fn knn_threshold(index: usize, set: ArrayView2<f64>, k: usize) -> Result<f64> {
    if index >= set.nrows() {
        return Err(Error::Parameter(format!("index {index} outside a set of {}", set.nrows())));
    }
    Ok(knn_radii(set, k)?[index])
}

pub fn knn_radii(set: ArrayView2<f64>, k: usize) -> Result<Vec<f64>> {
    Ok(KnnManifold::new(set, k)?.radii())
}

/// The binary manifold indicator `f(φ, Φ)`.
pub fn manifold_membership(phi: ArrayView1<f64>, set: ArrayView2<f64>, k: usize) -> Result<bool> {
    Ok(KnnManifold::new(set, k)?.contains(phi))
}

/// Share of generated points inside the real manifold.
pub fn precision(generated: ArrayView2<f64>, real: ArrayView2<f64>, k: usize) -> Result<f64> {
    KnnManifold::new(real, k)?.coverage(generated)
}

/// Share of real points inside the generated manifold.
pub fn recall(real: ArrayView2<f64>, generated: ArrayView2<f64>, k: usize) -> Result<f64> {
    KnnManifold::new(generated, k)?.coverage(real)
}

/// Recall restricted to a subset of the real points.
pub fn partial_recall(subset: ArrayView2<f64>, generated: ArrayView2<f64>, k: usize) -> Result<f64> {
    if subset.nrows() == 0 {
        return Err(Error::Parameter("partial recall of an empty subset".into()));
    }
    recall(subset, generated, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr1, arr2};

    #[test]
    fn collinear_thresholds() {
        let set = arr2(&[[0.0], [1.0], [3.0]]);
        assert_eq!(knn_radii(set.view(), 1).unwrap(), vec![1.0, 1.0, 2.0]);
        assert_eq!(knn_threshold(2, set.view(), 1).unwrap(), 2.0);
    }

    #[test]
    fn duplicates_have_zero_threshold() {
        let set = arr2(&[[1.0, 1.0], [1.0, 1.0], [1.0, 1.0], [1.0, 1.0], [5.0, 5.0]]);
        let r = knn_radii(set.view(), 3).unwrap();
        assert_eq!(&r[..4], &[0.0; 4]);
    }

    #[test]
    fn too_small_set_is_an_error() {
        let set = arr2(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]);
        assert!(KnnManifold::new(set.view(), 3).is_err());
        assert!(partial_recall(Array2::<f64>::zeros((0, 2)).view(), set.view(), 1).is_err());
    }

    #[test]
    fn far_point_is_outside() {
        let set = arr2(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.5, 0.5]]);
        assert!(manifold_membership(arr1(&[0.5, 0.5]).view(), set.view(), 3).unwrap());
        assert!(!manifold_membership(arr1(&[150.0, 150.0]).view(), set.view(), 3).unwrap());
    }
}
