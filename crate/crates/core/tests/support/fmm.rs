//! First-order fast marching on a uniform grid, used as an independent oracle
//! for the routing potential.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[derive(Clone, Copy, PartialEq)]
struct Trial {
    t: f64,
    i: usize,
    j: usize,
}

impl Eq for Trial {}

impl Ord for Trial {
    fn cmp(&self, other: &Self) -> Ordering {
        other.t.total_cmp(&self.t)
    }
}

impl PartialOrd for Trial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Travel time `T` with `|∇T| = 1/f` on an `(n+1)×(n+1)` grid over
/// `[0, len]²`, `T = 0` at the listed grid points. Values are indexed `j*(n+1)+i`.
pub fn fast_marching(n: usize, len: f64, speed: impl Fn(f64, f64) -> f64, sources: &[(usize, usize)]) -> Vec<f64> {
    let m = n + 1;
    let h = len / n as f64;
    let mut t = vec![f64::INFINITY; m * m];
    let mut done = vec![false; m * m];
    let mut heap = BinaryHeap::new();
    for &(i, j) in sources {
        t[j * m + i] = 0.0;
        heap.push(Trial { t: 0.0, i, j });
    }
    while let Some(Trial { i, j, .. }) = heap.pop() {
        if done[j * m + i] {
            continue;
        }
        done[j * m + i] = true;
        let neighbours = [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)];
        for (di, dj) in neighbours {
            let (ni, nj) = (i as i64 + di, j as i64 + dj);
            if ni < 0 || nj < 0 || ni >= m as i64 || nj >= m as i64 {
                continue;
            }
            let (ni, nj) = (ni as usize, nj as usize);
            if done[nj * m + ni] {
                continue;
            }
            let val = |a: usize, b: usize| if done[b * m + a] { t[b * m + a] } else { f64::INFINITY };
            let tx = f64::min(
                if ni > 0 { val(ni - 1, nj) } else { f64::INFINITY },
                if ni + 1 < m { val(ni + 1, nj) } else { f64::INFINITY },
            );
            let ty = f64::min(
                if nj > 0 { val(ni, nj - 1) } else { f64::INFINITY },
                if nj + 1 < m { val(ni, nj + 1) } else { f64::INFINITY },
            );
            let r = h / speed(ni as f64 * h, nj as f64 * h);
            let (a, b) = if tx <= ty { (tx, ty) } else { (ty, tx) };
            let cand = if b - a >= r {
                a + r
            } else {
                0.5 * (a + b + (2.0 * r * r - (a - b) * (a - b)).sqrt())
            };
            if cand < t[nj * m + ni] {
                t[nj * m + ni] = cand;
                heap.push(Trial { t: cand, i: ni, j: nj });
            }
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_distances_are_exact() {
        let t = fast_marching(10, 1.0, |_, _| 1.0, &[(0, 0)]);
        assert!((t[10] - 1.0).abs() < 1e-12);
        assert!((t[10 * 11] - 1.0).abs() < 1e-12);
        let diag = t[10 * 11 + 10];
        assert!(diag > 2f64.sqrt() - 1e-12 && diag < 2f64.sqrt() + 0.1);
    }
}
