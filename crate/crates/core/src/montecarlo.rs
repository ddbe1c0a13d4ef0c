//! Order-preserving parallel fan-out over trajectories and compensated
//! accumulators, so Monte Carlo aggregates do not depend on thread count.

use rayon::prelude::*;

use crate::linalg::{Operator, C64};

/// Trajectories evaluated per parallel block; results are folded in index order.
pub const BLOCK: usize = 256;

/// Maps `0..count` in parallel and folds the results sequentially in index order.
pub fn ordered_fold<T, E, F, G>(count: usize, map: F, mut fold: G) -> Result<(), E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync,
    G: FnMut(usize, T),
{
    let mut start = 0;
    while start < count {
        let end = (start + BLOCK).min(count);
        let block: Vec<Result<T, E>> = (start..end).into_par_iter().map(&map).collect();
        for (offset, item) in block.into_iter().enumerate() {
            fold(start + offset, item?);
        }
        start = end;
    }
    Ok(())
}

/// Maps `0..count` in parallel, keeping index order.
pub fn ordered_map<T, E, F>(count: usize, map: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync,
{
    let mut out = Vec::with_capacity(count);
    ordered_fold(count, map, |_, x| out.push(x))?;
    Ok(out)
}

/// Kahan–Babuška compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = KahanSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Entrywise compensated mean and variance of a stream of operators.
#[derive(Debug, Clone)]
pub struct OperatorMoments {
    re: Vec<KahanSum>,
    im: Vec<KahanSum>,
    re_sq: Vec<KahanSum>,
    im_sq: Vec<KahanSum>,
    dim: usize,
    count: usize,
}

impl OperatorMoments {
    pub fn new(dim: usize) -> Self {
        Self {
            re: vec![KahanSum::default(); dim * dim],
            im: vec![KahanSum::default(); dim * dim],
            re_sq: vec![KahanSum::default(); dim * dim],
            im_sq: vec![KahanSum::default(); dim * dim],
            dim,
            count: 0,
        }
    }

    pub fn add(&mut self, x: &Operator) {
        for (k, z) in x.iter().enumerate() {
            self.re[k].add(z.re);
            self.im[k].add(z.im);
            self.re_sq[k].add(z.re * z.re);
            self.im_sq[k].add(z.im * z.im);
        }
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> Operator {
        let n = self.count.max(1) as f64;
        Operator::from_iterator(
            self.dim,
            self.dim,
            self.re
                .iter()
                .zip(&self.im)
                .map(|(r, i)| C64::new(r.value() / n, i.value() / n)),
        )
    }

    /// Entrywise standard errors of the mean, `se(Re) + i·se(Im)`.
    pub fn entry_stderr(&self) -> Operator {
        let n = self.count as f64;
        let se = |sum: &KahanSum, sq: &KahanSum| {
            if self.count < 2 {
                return 0.0;
            }
            let m = sum.value() / n;
            ((sq.value() / n - m * m).max(0.0) / (n - 1.0)).sqrt()
        };
        Operator::from_iterator(
            self.dim,
            self.dim,
            (0..self.dim * self.dim).map(|k| C64::new(se(&self.re[k], &self.re_sq[k]), se(&self.im[k], &self.im_sq[k]))),
        )
    }

    /// Standard error of the mean measured in Hilbert–Schmidt norm:
    /// `sqrt(Σ_entries Var(entry) / M)`.
    pub fn hs_stderr(&self) -> f64 {
        self.entry_stderr().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_recovers_small_terms() {
        let mut s = KahanSum::default();
        s.add(1e16);
        for _ in 0..1000 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 1000.0);
    }

    #[test]
    fn operator_moments_of_two_samples() {
        let mut m = OperatorMoments::new(1);
        m.add(&Operator::from_element(1, 1, C64::new(1.0, 2.0)));
        m.add(&Operator::from_element(1, 1, C64::new(3.0, 2.0)));
        assert_eq!(m.mean()[(0, 0)], C64::new(2.0, 2.0));
        let se = m.entry_stderr()[(0, 0)];
        assert!((se.re - 1.0).abs() < 1e-15 && se.im.abs() < 1e-15);
        assert!((m.hs_stderr() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ordered_map_keeps_order() {
        let v: Vec<usize> = ordered_map(1000, |k| Ok::<_, ()>(k * 2)).unwrap();
        assert!(v.iter().enumerate().all(|(k, x)| *x == 2 * k));
    }

    #[test]
    fn ordered_fold_propagates_errors() {
        let r = ordered_fold(10, |k| if k == 7 { Err(k) } else { Ok(k) }, |_, _| {});
        assert_eq!(r, Err(7));
    }
}
