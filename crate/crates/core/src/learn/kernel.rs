use alloc::boxed::Box;
use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use super::par::par_map;

/// exp(−γ‖a − b‖²).
pub fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    libm::exp(-gamma * sq_dist(a, b))
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Largest example count for which full pairwise matrices are precomputed.
pub(crate) const DENSE_LIMIT: usize = 6000;

/// Dense symmetric n×n matrix in single precision.
pub(crate) struct Dense {
    n: usize,
    values: Vec<f32>,
}

impl Dense {
    pub(crate) fn sq_dists(x: &[&[f64]]) -> Self {
        let n = x.len();
        let rows: Vec<usize> = (0..n).collect();
        let parts = par_map(&rows, |&i| x.iter().map(|xj| sq_dist(x[i], xj) as f32).collect::<Vec<f32>>());
        Self { n, values: parts.concat() }
    }

    pub(crate) fn rbf_from_dists(d: &Dense, gamma: f64) -> Self {
        let rows: Vec<usize> = (0..d.n).collect();
        let parts = par_map(&rows, |&i| {
            d.row(i).iter().map(|&v| libm::exp(-gamma * v as f64) as f32).collect::<Vec<f32>>()
        });
        Self { n: d.n, values: parts.concat() }
    }

    #[inline]
    pub(crate) fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.n..(i + 1) * self.n]
    }
}

/// Kernel values over a fixed example set at one γ: either a precomputed
/// matrix or the raw features.
#[derive(Clone, Copy)]
pub(crate) struct KernelSpace<'a> {
    pub x: &'a [&'a [f64]],
    pub gamma: f64,
    pub gram: Option<&'a Dense>,
}

impl KernelSpace<'_> {
    #[inline]
    pub(crate) fn k(&self, i: usize, j: usize) -> f64 {
        match self.gram {
            Some(g) => g.row(i)[j] as f64,
            None => rbf(self.x[i], self.x[j], self.gamma),
        }
    }
}

/// Rows of the kernel restricted to a subset of positions, as the solver sees them.
pub(crate) trait KernelRows {
    fn len(&self) -> usize;
    fn diag(&self, i: usize) -> f64;
    fn row(&mut self, i: usize, out: &mut [f64]);
}

const CACHE_BYTES: usize = 256 << 20;

pub(crate) struct SubsetRows<'a> {
    space: KernelSpace<'a>,
    idx: &'a [usize],
    cache: Vec<Option<Box<[f32]>>>,
    order: VecDeque<usize>,
    capacity: usize,
}

impl<'a> SubsetRows<'a> {
    pub(crate) fn new(space: KernelSpace<'a>, idx: &'a [usize]) -> Self {
        let n = idx.len();
        let capacity = if space.gram.is_some() { 0 } else { (CACHE_BYTES / (4 * n.max(1))).max(2) };
        Self { space, idx, cache: if capacity > 0 { vec![None; n] } else { Vec::new() }, order: VecDeque::new(), capacity }
    }
}

impl KernelRows for SubsetRows<'_> {
    fn len(&self) -> usize {
        self.idx.len()
    }

    fn diag(&self, i: usize) -> f64 {
        self.space.k(self.idx[i], self.idx[i])
    }

    fn row(&mut self, i: usize, out: &mut [f64]) {
        let gi = self.idx[i];
        if let Some(g) = self.space.gram {
            let r = g.row(gi);
            for (o, &t) in out.iter_mut().zip(self.idx) {
                *o = r[t] as f64;
            }
            return;
        }
        if self.cache[i].is_none() {
            if self.order.len() >= self.capacity {
                if let Some(old) = self.order.pop_front() {
                    self.cache[old] = None;
                }
            }
            let xi = self.space.x[gi];
            let r: Box<[f32]> = self.idx.iter().map(|&t| rbf(xi, self.space.x[t], self.space.gamma) as f32).collect();
            self.cache[i] = Some(r);
            self.order.push_back(i);
        }
        if let Some(r) = &self.cache[i] {
            for (o, &v) in out.iter_mut().zip(r.iter()) {
                *o = v as f64;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_and_direct_agree() {
        let pts: Vec<Vec<f64>> = (0..7).map(|i| vec![i as f64 * 0.3, libm::sin(i as f64)]).collect();
        let x: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
        let d = Dense::sq_dists(&x);
        let g = Dense::rbf_from_dists(&d, 0.7);
        let dense = KernelSpace { x: &x, gamma: 0.7, gram: Some(&g) };
        let direct = KernelSpace { x: &x, gamma: 0.7, gram: None };
        let idx = [1usize, 4, 6];
        let (mut a, mut b) = (SubsetRows::new(dense, &idx), SubsetRows::new(direct, &idx));
        let (mut ra, mut rb) = ([0.0; 3], [0.0; 3]);
        for i in 0..3 {
            a.row(i, &mut ra);
            b.row(i, &mut rb);
            for (u, v) in ra.iter().zip(&rb) {
                assert!((u - v).abs() < 1e-6);
            }
            assert!((a.diag(i) - 1.0).abs() < 1e-7);
        }
    }
}
