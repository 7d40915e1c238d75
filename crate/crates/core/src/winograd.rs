//! Minimal filtering algorithms `F(m, r)` and their 2-d nesting.
//!
//! An algorithm is a triple of transforms `(Bᵀ, G, Aᵀ)` such that the `m`
//! valid outputs of an `r`-tap correlation over `α = m + r - 1` inputs are
//! `Aᵀ [(G g) ⊙ (Bᵀ d)]`. Nesting two 1-d algorithms gives the 2-d form
//! `Aᵀ [(G g Gᵀ) ⊙ (Bᵀ d B)] A`.
//!
//! Transforms are held as exact rationals and lowered to floating point once
//! per use site with [`WinogradAlgorithm::lower`].

use crate::error::{ConvError, Result};
use crate::matrix::{rat, Matrix, Rational, Ring};
use crate::scalar::Real;

/// Per-tile 2-d transform instruction counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransformFlops {
    /// Data transform (β).
    pub data: u64,
    /// Filter transform (γ).
    pub filter: u64,
    /// Inverse transform (δ).
    pub inverse: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WinogradAlgorithm {
    m: usize,
    r: usize,
    bt: Matrix<Rational>,
    g: Matrix<Rational>,
    at: Matrix<Rational>,
    flops: Option<TransformFlops>,
}

impl WinogradAlgorithm {
    /// Assembles an algorithm, checking the dimension contract
    /// (`Bᵀ: α×α`, `G: α×r`, `Aᵀ: m×α`).
    pub fn new(
        m: usize,
        r: usize,
        bt: Matrix<Rational>,
        g: Matrix<Rational>,
        at: Matrix<Rational>,
    ) -> Result<Self> {
        if m == 0 || r == 0 {
            return Err(ConvError::InvalidConfig("F(m, r) needs m, r >= 1".into()));
        }
        let alpha = m + r - 1;
        let ok = bt.shape() == (alpha, alpha) && g.shape() == (alpha, r) && at.shape() == (m, alpha);
        if !ok {
            return Err(ConvError::ShapeMismatch(format!(
                "F({m},{r}) transforms must be {alpha}x{alpha}, {alpha}x{r}, {m}x{alpha}; got {:?}, {:?}, {:?}",
                bt.shape(),
                g.shape(),
                at.shape()
            )));
        }
        Ok(WinogradAlgorithm { m, r, bt, g, at, flops: None })
    }

    pub fn with_flops(mut self, flops: TransformFlops) -> Self {
        self.flops = Some(flops);
        self
    }

    /// One of the hand-derived algorithms F(2,3), F(3,2), F(4,3).
    pub fn builtin(m: usize, r: usize) -> Result<Self> {
        let q = |rows: &[&[(i64, i64)]]| {
            Matrix::from_rows(
                rows.iter()
                    .map(|row| row.iter().map(|&(p, d)| rat(p, d)).collect())
                    .collect(),
            )
            .expect("static matrix")
        };
        let z = |rows: &[&[i64]]| {
            Matrix::from_rows(
                rows.iter()
                    .map(|row| row.iter().map(|&p| rat(p, 1)).collect())
                    .collect(),
            )
            .expect("static matrix")
        };
        let alg = match (m, r) {
            (2, 3) => WinogradAlgorithm::new(
                2,
                3,
                z(&[&[1, 0, -1, 0], &[0, 1, 1, 0], &[0, -1, 1, 0], &[0, 1, 0, -1]]),
                q(&[
                    &[(1, 1), (0, 1), (0, 1)],
                    &[(1, 2), (1, 2), (1, 2)],
                    &[(1, 2), (-1, 2), (1, 2)],
                    &[(0, 1), (0, 1), (1, 1)],
                ]),
                z(&[&[1, 1, 1, 0], &[0, 1, -1, -1]]),
            )?
            .with_flops(TransformFlops { data: 32, filter: 28, inverse: 24 }),
            (3, 2) => WinogradAlgorithm::new(
                3,
                2,
                z(&[&[1, 0, -1, 0], &[0, 1, 1, 0], &[0, -1, 1, 0], &[0, -1, 0, 1]]),
                q(&[
                    &[(1, 1), (0, 1)],
                    &[(1, 2), (1, 2)],
                    &[(1, 2), (-1, 2)],
                    &[(0, 1), (1, 1)],
                ]),
                z(&[&[1, 1, 1, 0], &[0, 1, -1, 0], &[0, 1, 1, 1]]),
            )?,
            (4, 3) => WinogradAlgorithm::new(
                4,
                3,
                z(&[
                    &[4, 0, -5, 0, 1, 0],
                    &[0, -4, -4, 1, 1, 0],
                    &[0, 4, -4, -1, 1, 0],
                    &[0, -2, -1, 2, 1, 0],
                    &[0, 2, -1, -2, 1, 0],
                    &[0, 4, 0, -5, 0, 1],
                ]),
                q(&[
                    &[(1, 4), (0, 1), (0, 1)],
                    &[(-1, 6), (-1, 6), (-1, 6)],
                    &[(-1, 6), (1, 6), (-1, 6)],
                    &[(1, 24), (1, 12), (1, 6)],
                    &[(1, 24), (-1, 12), (1, 6)],
                    &[(0, 1), (0, 1), (1, 1)],
                ]),
                z(&[
                    &[1, 1, 1, 1, 1, 0],
                    &[0, 1, -1, 2, -2, 0],
                    &[0, 1, 1, 4, 4, 0],
                    &[0, 1, -1, 8, -8, 1],
                ]),
            )?
            .with_flops(TransformFlops { data: 156, filter: 72, inverse: 100 }),
            _ => return Err(ConvError::UnsupportedAlgorithm { m, r }),
        };
        Ok(alg)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn r(&self) -> usize {
        self.r
    }

    /// Input tile length `m + r - 1`.
    pub fn alpha(&self) -> usize {
        self.m + self.r - 1
    }

    pub fn bt(&self) -> &Matrix<Rational> {
        &self.bt
    }

    pub fn g(&self) -> &Matrix<Rational> {
        &self.g
    }

    pub fn at(&self) -> &Matrix<Rational> {
        &self.at
    }

    /// Per-tile 2-d (β, γ, δ) for the square nesting, when known.
    pub fn transform_flop_counts(&self) -> Result<TransformFlops> {
        self.flops.ok_or(ConvError::NotProfiled { m: self.m, r: self.r })
    }

    /// Exact transforms usable with the generic tile operations.
    pub fn exact(&self) -> Transforms<Rational> {
        Transforms {
            m: self.m,
            r: self.r,
            bt: self.bt.clone(),
            g: self.g.clone(),
            at: self.at.clone(),
        }
    }

    /// Transforms rounded once to `T`.
    pub fn lower<T: Real>(&self) -> Transforms<T> {
        Transforms {
            m: self.m,
            r: self.r,
            bt: self.bt.lower(),
            g: self.g.lower(),
            at: self.at.lower(),
        }
    }
}

/// μ(F(m, r)) = m + r - 1.
pub fn minimal_multiplies_1d(m: usize, r: usize) -> usize {
    m + r - 1
}

/// μ(F(m×n, r×s)) = (m + r - 1)(n + s - 1).
pub fn minimal_multiplies_2d(m: usize, n: usize, r: usize, s: usize) -> usize {
    minimal_multiplies_1d(m, r) * minimal_multiplies_1d(n, s)
}

/// The three transforms of one 1-d algorithm, over scalar type `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transforms<T> {
    pub m: usize,
    pub r: usize,
    pub bt: Matrix<T>,
    pub g: Matrix<T>,
    pub at: Matrix<T>,
}

impl<T: Ring> Transforms<T> {
    pub fn alpha(&self) -> usize {
        self.m + self.r - 1
    }

    /// `m` outputs of an `r`-tap correlation over `α` inputs.
    pub fn filter_tile_1d(&self, d: &[T], g: &[T]) -> Result<Vec<T>> {
        if d.len() != self.alpha() || g.len() != self.r {
            return Err(ConvError::ShapeMismatch(format!(
                "F({},{}) needs d of length {} and g of length {}, got {} and {}",
                self.m,
                self.r,
                self.alpha(),
                self.r,
                d.len(),
                g.len()
            )));
        }
        let u = self.g.matmul(&Matrix::column(g.to_vec()))?;
        let v = self.bt.matmul(&Matrix::column(d.to_vec()))?;
        let y = self.at.matmul(&u.hadamard(&v)?)?;
        Ok(y.as_slice().to_vec())
    }
}

/// `F(m×n, r×s)` built by nesting a row algorithm `F(m, r)` with a column
/// algorithm `F(n, s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Nested2d<T> {
    pub rows: Transforms<T>,
    pub cols: Transforms<T>,
}

impl<T: Ring> Nested2d<T> {
    pub fn square(t: Transforms<T>) -> Self {
        Nested2d { rows: t.clone(), cols: t }
    }

    pub fn new(rows: Transforms<T>, cols: Transforms<T>) -> Self {
        Nested2d { rows, cols }
    }

    pub fn tile_dims(&self) -> (usize, usize) {
        (self.rows.alpha(), self.cols.alpha())
    }

    pub fn output_dims(&self) -> (usize, usize) {
        (self.rows.m, self.cols.m)
    }

    pub fn filter_dims(&self) -> (usize, usize) {
        (self.rows.r, self.cols.r)
    }

    /// `U = G g Gᵀ`.
    pub fn transform_filter(&self, g: &Matrix<T>) -> Result<Matrix<T>> {
        expect_dims("filter", g, self.filter_dims())?;
        self.rows.g.matmul(g)?.matmul(&self.cols.g.transpose())
    }

    /// `V = Bᵀ d B`.
    pub fn transform_data(&self, d: &Matrix<T>) -> Result<Matrix<T>> {
        expect_dims("data tile", d, self.tile_dims())?;
        self.rows.bt.matmul(d)?.matmul(&self.cols.bt.transpose())
    }

    /// `Y = Aᵀ M A`.
    pub fn inverse_transform(&self, m: &Matrix<T>) -> Result<Matrix<T>> {
        expect_dims("transformed tile", m, self.tile_dims())?;
        self.rows.at.matmul(m)?.matmul(&self.cols.at.transpose())
    }

    /// Elementwise product stage: one multiply per input element.
    pub fn multiply_stage(&self, u: &Matrix<T>, v: &Matrix<T>) -> Result<Matrix<T>> {
        u.hadamard(v)
    }

    /// Valid correlation of an `α_h×α_w` tile with an `r×s` filter.
    pub fn filter_tile_2d(&self, d: &Matrix<T>, g: &Matrix<T>) -> Result<Matrix<T>> {
        let u = self.transform_filter(g)?;
        let v = self.transform_data(d)?;
        self.inverse_transform(&self.multiply_stage(&u, &v)?)
    }
}

fn expect_dims<T>(what: &str, m: &Matrix<T>, dims: (usize, usize)) -> Result<()> {
    if m.shape() != dims {
        return Err(ConvError::ShapeMismatch(format!(
            "{what} must be {}x{}, got {}x{}",
            dims.0,
            dims.1,
            m.rows(),
            m.cols()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instrument::{count_multiplies, Counted};
    use crate::oracle::{correlate_valid_2d, fir_valid, random_rational_matrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn row(m: &Matrix<Rational>, r: usize) -> Vec<Rational> {
        m.row(r).to_vec()
    }

    fn ints(v: &[i64]) -> Vec<Rational> {
        v.iter().map(|&x| rat(x, 1)).collect()
    }

    #[test]
    fn builtin_entries() {
        let f23 = WinogradAlgorithm::builtin(2, 3).unwrap();
        assert_eq!(row(f23.g(), 1), vec![rat(1, 2); 3]);
        assert_eq!(row(f23.bt(), 0), ints(&[1, 0, -1, 0]));
        assert_eq!(row(f23.at(), 0), ints(&[1, 1, 1, 0]));

        let f43 = WinogradAlgorithm::builtin(4, 3).unwrap();
        assert_eq!(row(f43.g(), 0), vec![rat(1, 4), rat(0, 1), rat(0, 1)]);
        assert_eq!(row(f43.bt(), 0), ints(&[4, 0, -5, 0, 1, 0]));
        assert_eq!(row(f43.at(), 1), ints(&[0, 1, -1, 2, -2, 0]));

        let f32_ = WinogradAlgorithm::builtin(3, 2).unwrap();
        assert_eq!(row(f32_.at(), 2), ints(&[0, 1, 1, 1]));
        assert_eq!(f32_.g().cols(), 2);

        assert!(matches!(
            WinogradAlgorithm::builtin(6, 3),
            Err(ConvError::UnsupportedAlgorithm { m: 6, r: 3 })
        ));
    }

    #[test]
    fn constructor_checks_dimensions() {
        let f = WinogradAlgorithm::builtin(2, 3).unwrap();
        let err = WinogradAlgorithm::new(2, 3, f.bt().clone(), f.g().transpose(), f.at().clone());
        assert!(matches!(err, Err(ConvError::ShapeMismatch(_))));
    }

    #[test]
    fn multiply_counts() {
        assert_eq!(minimal_multiplies_1d(2, 3), 4);
        assert_eq!(minimal_multiplies_1d(1, 7), 7);
        assert_eq!(minimal_multiplies_1d(4, 3), 6);
        assert_eq!(minimal_multiplies_2d(4, 4, 3, 3), 36);
    }

    #[test]
    fn flop_counts() {
        let f = |m, r| WinogradAlgorithm::builtin(m, r).unwrap().transform_flop_counts();
        assert_eq!(f(2, 3).unwrap(), TransformFlops { data: 32, filter: 28, inverse: 24 });
        assert_eq!(f(4, 3).unwrap(), TransformFlops { data: 156, filter: 72, inverse: 100 });
        assert!(matches!(f(3, 2), Err(ConvError::NotProfiled { m: 3, r: 2 })));
    }

    #[test]
    fn filter_tile_1d_examples() {
        let t = WinogradAlgorithm::builtin(2, 3).unwrap().exact();
        assert_eq!(t.filter_tile_1d(&ints(&[1, 2, 3, 4]), &ints(&[1, 1, 1])).unwrap(), ints(&[6, 9]));
        assert_eq!(t.filter_tile_1d(&ints(&[1, 2, 3, 4]), &ints(&[0, 0, 0])).unwrap(), ints(&[0, 0]));
        assert!(t.filter_tile_1d(&ints(&[1, 2, 3]), &ints(&[1, 1, 1])).is_err());

        let t = WinogradAlgorithm::builtin(4, 3).unwrap().exact();
        let d = ints(&[1, 0, 0, 0, 0, 0]);
        let g = ints(&[1, 2, 3]);
        let y = t.filter_tile_1d(&d, &g).unwrap();
        assert_eq!(y, fir_valid(&d, &g));
        assert_eq!(y, ints(&[1, 0, 0, 0]));
    }

    #[test]
    fn filter_tile_2d_examples() {
        let f = Nested2d::square(WinogradAlgorithm::builtin(2, 3).unwrap().exact());
        let d = Matrix::from_fn(4, 4, |_, _| rat(1, 1));
        let g = Matrix::from_fn(3, 3, |_, _| rat(1, 1));
        assert_eq!(f.filter_tile_2d(&d, &g).unwrap(), Matrix::from_fn(2, 2, |_, _| rat(9, 1)));

        let zero_g = Matrix::<Rational>::zeros(3, 3);
        assert!(f.filter_tile_2d(&d, &zero_g).unwrap().is_zero());
        assert!(f.filter_tile_2d(&zero_g, &g).is_err());
    }

    #[test]
    fn transform_stage_examples() {
        let f = Nested2d::square(WinogradAlgorithm::builtin(2, 3).unwrap().exact());
        let u = f.transform_filter(&Matrix::from_fn(3, 3, |_, _| rat(1, 1))).unwrap();
        // Row sums of G are 1, 3/2, 1/2, 1.
        assert_eq!(*u.get(0, 0), rat(1, 1));
        assert_eq!(*u.get(1, 1), rat(9, 4));
        assert_eq!(*u.get(2, 2), rat(1, 4));
        assert!(f.transform_data(&Matrix::zeros(4, 4)).unwrap().is_zero());
        assert!(f.inverse_transform(&Matrix::zeros(4, 4)).unwrap().is_zero());
        assert_eq!(f.inverse_transform(&Matrix::zeros(4, 4)).unwrap().shape(), (2, 2));
    }

    #[test]
    fn builtins_are_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for (m, r) in [(2, 3), (3, 2), (4, 3)] {
            let f = Nested2d::square(WinogradAlgorithm::builtin(m, r).unwrap().exact());
            let a = m + r - 1;
            for _ in 0..100 {
                let d = random_rational_matrix(&mut rng, a, a);
                let g = random_rational_matrix(&mut rng, r, r);
                assert_eq!(f.filter_tile_2d(&d, &g).unwrap(), correlate_valid_2d(&d, &g));
            }
        }
    }

    #[test]
    fn non_square_nesting_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = Nested2d::new(
            WinogradAlgorithm::builtin(2, 3).unwrap().exact(),
            WinogradAlgorithm::builtin(3, 2).unwrap().exact(),
        );
        for _ in 0..50 {
            let d = random_rational_matrix(&mut rng, 4, 4);
            let g = random_rational_matrix(&mut rng, 3, 2);
            let y = f.filter_tile_2d(&d, &g).unwrap();
            assert_eq!(y.shape(), (2, 3));
            assert_eq!(y, correlate_valid_2d(&d, &g));
        }
    }

    #[test]
    fn multiply_stage_is_one_per_input() {
        for (m, r) in [(2, 3), (3, 2), (4, 3)] {
            let f = Nested2d::square(WinogradAlgorithm::builtin(m, r).unwrap().lower::<Counted>());
            let a = m + r - 1;
            let u = Matrix::from_fn(a, a, |i, j| Counted((i + 2 * j) as f64));
            let v = Matrix::from_fn(a, a, |i, j| Counted((3 * i + j) as f64));
            let (_, n) = count_multiplies(|| f.multiply_stage(&u, &v).unwrap());
            assert_eq!(n as usize, a * a);
        }
    }

    #[test]
    fn rank_one_tiles_factor_into_1d() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for (m, r) in [(2, 3), (4, 3)] {
            let t = WinogradAlgorithm::builtin(m, r).unwrap().lower::<f64>();
            let f = Nested2d::square(t.clone());
            let a = m + r - 1;
            let du: Vec<f64> = (0..a).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let dv: Vec<f64> = (0..a).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let gp: Vec<f64> = (0..r).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let gq: Vec<f64> = (0..r).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let d = Matrix::from_fn(a, a, |i, j| du[i] * dv[j]);
            let g = Matrix::from_fn(r, r, |i, j| gp[i] * gq[j]);
            let y = f.filter_tile_2d(&d, &g).unwrap();
            let yr = t.filter_tile_1d(&du, &gp).unwrap();
            let yc = t.filter_tile_1d(&dv, &gq).unwrap();
            for i in 0..m {
                for j in 0..m {
                    assert!((y.get(i, j) - yr[i] * yc[j]).abs() < 1e-12);
                }
            }
        }
    }

    /// Channel-reduced single-tile error at fp32 against an fp64 direct sum.
    fn tile_error(m: usize, trials: usize, channels: usize, seed: u64) -> f64 {
        let alg = WinogradAlgorithm::builtin(m, 3).unwrap();
        let f = Nested2d::square(alg.lower::<f32>());
        let a = m + 2;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        for _ in 0..trials {
            let mut acc = Matrix::<f32>::zeros(a, a);
            let mut truth = Matrix::<f64>::zeros(m, m);
            for _ in 0..channels {
                let d = Matrix::from_fn(a, a, |_, _| rng.gen_range(-1.0f32..1.0));
                let g = Matrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0f32..1.0));
                let prod = f
                    .multiply_stage(&f.transform_filter(&g).unwrap(), &f.transform_data(&d).unwrap())
                    .unwrap();
                acc = Matrix::from_fn(a, a, |i, j| acc.get(i, j) + prod.get(i, j));
                let exact = correlate_valid_2d(&d.map(|&v| v as f64), &g.map(|&v| v as f64));
                truth = Matrix::from_fn(m, m, |i, j| truth.get(i, j) + exact.get(i, j));
            }
            let y = f.inverse_transform(&acc).unwrap();
            for i in 0..m {
                for j in 0..m {
                    worst = worst.max((*y.get(i, j) as f64 - truth.get(i, j)).abs());
                }
            }
        }
        worst
    }

    #[test]
    fn larger_tiles_lose_more_accuracy() {
        let e2 = tile_error(2, 1000, 8, 77);
        let e4 = tile_error(4, 1000, 8, 77);
        assert!(e4 >= e2, "F(4,3) error {e4} < F(2,3) error {e2}");
    }
}
