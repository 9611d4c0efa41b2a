//! Exact dynamic time warping against a pivot demonstration.

use crate::error::{Result, VfError};
use crate::geometry::{distance_sq, ManifoldPoint};

use super::demo::Demonstration;

#[derive(Debug, Clone, PartialEq)]
pub struct DtwResult {
    pub cost: f64,
    /// Monotone `(i, j)` index pairs from `(0, 0)` to the last samples.
    pub path: Vec<(usize, usize)>,
}

/// Symmetric step pattern, unit weights, local cost = geodesic distance.
pub fn dtw(a: &[ManifoldPoint], b: &[ManifoldPoint]) -> Result<DtwResult> {
    if a.is_empty() || b.is_empty() {
        return Err(VfError::Empty("dtw sequence"));
    }
    let (n, m) = (a.len(), b.len());
    let mut c = vec![f64::INFINITY; n * m];
    for i in 0..n {
        for j in 0..m {
            let local = distance_sq(&a[i], &b[j])?.sqrt();
            let prev = if i == 0 && j == 0 {
                0.0
            } else {
                let mut best = f64::INFINITY;
                if i > 0 && j > 0 {
                    best = best.min(c[(i - 1) * m + j - 1]);
                }
                if i > 0 {
                    best = best.min(c[(i - 1) * m + j]);
                }
                if j > 0 {
                    best = best.min(c[i * m + j - 1]);
                }
                best
            };
            c[i * m + j] = local + prev;
        }
    }
    // Backtrack, preferring the diagonal on ties.
    let (mut i, mut j) = (n - 1, m - 1);
    let mut path = vec![(i, j)];
    while i > 0 || j > 0 {
        let (ni, nj) = if i == 0 {
            (0, j - 1)
        } else if j == 0 {
            (i - 1, 0)
        } else {
            let d = c[(i - 1) * m + j - 1];
            let u = c[(i - 1) * m + j];
            let l = c[i * m + j - 1];
            if d <= u && d <= l {
                (i - 1, j - 1)
            } else if u <= l {
                (i - 1, j)
            } else {
                (i, j - 1)
            }
        };
        i = ni;
        j = nj;
        path.push((i, j));
    }
    path.reverse();
    Ok(DtwResult { cost: c[n * m - 1], path })
}

/// Warp every demonstration onto the normalized time axis of the first one.
///
/// Each sample of demo `k` gets the mean pivot time over the pivot samples it
/// is matched with.
pub fn dtw_align(demos: &[Demonstration]) -> Result<Vec<Demonstration>> {
    let pivot = demos.first().ok_or(VfError::Empty("demonstration list"))?;
    let tau = pivot.normalized_times();
    let mut out = Vec::with_capacity(demos.len());
    for (k, d) in demos.iter().enumerate() {
        if d.manifold() != pivot.manifold() {
            return Err(VfError::ManifoldMismatch { expected: pivot.manifold(), got: d.manifold() });
        }
        let times = if k == 0 {
            tau.clone()
        } else {
            let r = dtw(&pivot.points, &d.points)?;
            let mut sum = vec![0.0; d.len()];
            let mut cnt = vec![0usize; d.len()];
            for &(p, q) in &r.path {
                sum[q] += tau[p];
                cnt[q] += 1;
            }
            sum.iter().zip(&cnt).map(|(s, c)| s / *c as f64).collect()
        };
        out.push(Demonstration { times, points: d.points.clone(), velocities: d.velocities.clone() });
    }
    Ok(out)
}
