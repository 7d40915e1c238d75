//! Brute-force reference filters over any ring.
//!
//! These are deliberately naive; they serve as ground truth for the
//! minimal-filtering transforms (exact over rationals) and for the
//! generator's self-check.

use rand::Rng;

use crate::matrix::{rat, Matrix, Rational, Ring};

/// The `d.len() - g.len() + 1` valid outputs of correlating `d` with `g`.
pub fn fir_valid<T: Ring>(d: &[T], g: &[T]) -> Vec<T> {
    assert!(d.len() >= g.len(), "input shorter than filter");
    (0..=d.len() - g.len())
        .map(|j| {
            g.iter()
                .enumerate()
                .fold(T::zero(), |acc, (i, gi)| acc + d[i + j].clone() * gi.clone())
        })
        .collect()
}

/// Valid 2-d correlation (no filter flip).
pub fn correlate_valid_2d<T: Ring>(d: &Matrix<T>, g: &Matrix<T>) -> Matrix<T> {
    assert!(d.rows() >= g.rows() && d.cols() >= g.cols(), "input smaller than filter");
    Matrix::from_fn(d.rows() - g.rows() + 1, d.cols() - g.cols() + 1, |y, x| {
        let mut acc = T::zero();
        for u in 0..g.rows() {
            for v in 0..g.cols() {
                acc = acc + d.get(y + u, x + v).clone() * g.get(u, v).clone();
            }
        }
        acc
    })
}

/// Small random rational `p/q` with `|p| <= 9`, `1 <= q <= 7`.
pub fn random_rational<R: Rng + ?Sized>(rng: &mut R) -> Rational {
    rat(rng.gen_range(-9..=9), rng.gen_range(1..=7))
}

pub fn random_rational_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Matrix<Rational> {
    Matrix::from_fn(rows, cols, |_, _| random_rational(rng))
}
