use crate::error::{Error, Result};

use super::distance::{product_distance, ProductPoint};

/// Largest sample count accepted by [`wasserstein2_exact`].
pub const W2_MAX_SAMPLES: usize = 512;

/// Minimum-cost perfect matching on a square cost matrix (row-major),
/// `σ[i]` is the column of row `i`. Shortest augmenting paths with
/// potentials, `O(n³)`.
pub fn assignment(cost: &[f64], n: usize) -> Vec<usize> {
    assert_eq!(cost.len(), n * n);
    let inf = f64::INFINITY;
    // 1-based arrays with a virtual column 0
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut sigma = vec![0; n];
    for j in 1..=n {
        sigma[p[j] - 1] = j - 1;
    }
    sigma
}

/// Exact `𝒲₂` between two equal-weight empirical measures with the same
/// number of atoms. The optimal cost is summed in row order.
pub fn wasserstein2_exact(p: &[ProductPoint], q: &[ProductPoint]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::SampleCountMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    let n = p.len();
    if n > W2_MAX_SAMPLES {
        return Err(Error::TooManySamples {
            n,
            max: W2_MAX_SAMPLES,
        });
    }
    if n == 0 {
        return Err(Error::InvalidParameter("empty sample".into()));
    }
    let mut cost = Vec::with_capacity(n * n);
    for a in p {
        for b in q {
            cost.push(product_distance(*a, *b).powi(2));
        }
    }
    let sigma = assignment(&cost, n);
    let total: f64 = (0..n).map(|i| cost[i * n + sigma[i]]).sum();
    Ok((total / n as f64).sqrt())
}
