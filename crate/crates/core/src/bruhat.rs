//! Bruhat decomposition `A = U1 P U2` and its update under two-mode operators.
//!
//! `U1` is upper triangular with unit diagonal, `U2` upper triangular and
//! invertible, and `P` a permutation stored as labels: `P[i, p[i]] = 1`, so
//! row `i` of `P U2` is row `p[i]` of `U2`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, UnitaryMatrix, ONE, ZERO, ZERO_RELATIVE};
use crate::mzi::{zeroing_angles, Mat2, MziParams};

/// `images[i] = j` iff `P[i, j] = 1`.
pub type Permutation = Vec<usize>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BruhatState {
    pub u1: ComplexMatrix,
    pub p: Permutation,
    pub u2: ComplexMatrix,
}

fn block_tolerance(block: &Mat2) -> f64 {
    let norm = block.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    ZERO_RELATIVE * norm / 2.0
}

/// Decomposes a unitary.
pub fn bruhat_decompose(a: &UnitaryMatrix) -> Result<BruhatState> {
    decompose_matrix(a.matrix())
}

/// Decomposes any square invertible matrix by eliminating rows from the
/// bottom up, pivoting each row on its leftmost entry that is not already a
/// pivot column of a lower row.
pub fn decompose_matrix(a: &ComplexMatrix) -> Result<BruhatState> {
    if !a.is_square() {
        return Err(Error::Dimension(format!("{}x{} matrix is not square", a.rows(), a.cols())));
    }
    let m = a.rows();
    let tol = a.zero_tolerance();
    let mut b = a.clone();
    let mut u1 = ComplexMatrix::identity(m);
    let mut pivot_row: Vec<Option<usize>> = vec![None; m];
    let mut p = vec![usize::MAX; m];

    for i in (0..m).rev() {
        let mut found = None;
        for c in 0..m {
            if let Some(r) = pivot_row[c] {
                let f = b[(i, c)] / b[(r, c)];
                if f != ZERO {
                    for k in c + 1..m {
                        let v = b[(r, k)];
                        b[(i, k)] -= f * v;
                    }
                    for row in 0..m {
                        let v = u1[(row, i)];
                        u1[(row, r)] += f * v;
                    }
                }
                b[(i, c)] = ZERO;
            } else if b[(i, c)].norm() > tol {
                found = Some(c);
                break;
            } else {
                b[(i, c)] = ZERO;
            }
        }
        let c = found.ok_or(Error::Singular)?;
        pivot_row[c] = Some(i);
        p[i] = c;
    }

    let mut u2 = ComplexMatrix::zeros(m, m);
    for i in 0..m {
        u2.row_mut(p[i]).copy_from_slice(b.row(i));
    }
    Ok(BruhatState { u1, p, u2 })
}

impl BruhatState {
    pub fn identity(m: usize) -> Self {
        Self {
            u1: ComplexMatrix::identity(m),
            p: (0..m).collect(),
            u2: ComplexMatrix::identity(m),
        }
    }

    pub fn modes(&self) -> usize {
        self.p.len()
    }

    /// `U1 P U2`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let m = self.modes();
        let mut pu2 = ComplexMatrix::zeros(m, m);
        for i in 0..m {
            pu2.row_mut(i).copy_from_slice(self.u2.row(self.p[i]));
        }
        self.u1.matmul(&pu2)
    }

    pub fn is_sorted(&self) -> bool {
        self.p.iter().enumerate().all(|(i, &j)| i == j)
    }

    fn swap_columns(&mut self, i: usize) {
        self.u1.swap_cols(i, i + 1);
        self.p.swap(i, i + 1);
    }

    /// Divides columns `i`, `i + 1` of `U1` by their diagonal entries and
    /// pushes the factors into the matching rows of `U2`.
    fn renormalize(&mut self, i: usize) {
        for c in [i, i + 1] {
            let d = self.u1[(c, c)];
            if d == ONE {
                continue;
            }
            for r in 0..c {
                self.u1[(r, c)] /= d;
            }
            self.u1[(c, c)] = ONE;
            let q = self.p[c];
            self.u2.row_mut(q).iter_mut().for_each(|z| *z *= d);
        }
    }

    fn apply_impl(&mut self, i: usize, e: &Mat2, force_swap: bool) -> Result<()> {
        let m = self.modes();
        if i + 1 >= m {
            return Err(Error::Dimension(format!("two-mode operator on ({i}, {}) with {m} modes", i + 1)));
        }
        let det = e[0][0] * e[1][1] - e[0][1] * e[1][0];
        if det.norm() <= ZERO_RELATIVE * e.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>() {
            return Err(Error::Singular);
        }
        self.u1.rotate_rows(i, i + 1, e);
        for c in 0..i {
            self.u1[(i, c)] = ZERO;
            self.u1[(i + 1, c)] = ZERO;
        }
        let block = [
            [self.u1[(i, i)], self.u1[(i, i + 1)]],
            [self.u1[(i + 1, i)], self.u1[(i + 1, i + 1)]],
        ];
        let tol = block_tolerance(&block);
        let (beta, gamma) = (block[1][0], block[1][1]);

        if !force_swap && beta.norm() <= tol {
            self.u1[(i + 1, i)] = ZERO;
        } else if force_swap || gamma.norm() <= tol {
            self.u1[(i + 1, i + 1)] = ZERO;
            self.swap_columns(i);
        } else {
            if self.p[i] < self.p[i + 1] {
                self.swap_columns(i);
            }
            // now p[i] > p[i + 1]: zero the subdiagonal entry with a column
            // operation and compensate in U2
            let f = self.u1[(i + 1, i)] / self.u1[(i + 1, i + 1)];
            for r in 0..=i {
                let v = self.u1[(r, i + 1)];
                self.u1[(r, i)] -= f * v;
            }
            self.u1[(i + 1, i)] = ZERO;
            let (j1, j2) = (self.p[i], self.p[i + 1]);
            for c in j1..m {
                let v = self.u2[(j1, c)];
                self.u2[(j2, c)] += f * v;
            }
        }
        self.renormalize(i);
        Ok(())
    }

    /// Bruhat state of `E A` where `E` acts on modes `i`, `i + 1`.
    pub fn apply_two_mode(&self, i: usize, e: &Mat2) -> Result<BruhatState> {
        let mut next = self.clone();
        next.apply_impl(i, e, false)?;
        Ok(next)
    }

    /// In-place variant of [`apply_two_mode`](Self::apply_two_mode).
    pub fn apply_two_mode_mut(&mut self, i: usize, e: &Mat2) -> Result<()> {
        self.apply_impl(i, e, false)
    }

    /// The MZI that exchanges labels `i` and `i + 1`: it maps
    /// `(b, 1)^T -> (b', 0)^T` with `b = U1[i, i + 1]`.
    pub fn swap_rows_mzi_mut(&mut self, i: usize) -> MziParams {
        let b = self.u1[(i, i + 1)];
        let params = zeroing_angles(b, ONE).expect("second amplitude is one");
        self.apply_impl(i, &params.transfer(), true)
            .expect("MZI transfer matrices are invertible");
        params
    }

    pub fn swap_rows_mzi(&self, i: usize) -> (MziParams, BruhatState) {
        let mut next = self.clone();
        let params = next.swap_rows_mzi_mut(i);
        (params, next)
    }

    /// With `p` sorted, `U1 U2` for a unitary tracked matrix is diagonal.
    pub fn diagonal(&self) -> Option<Vec<Complex64>> {
        if !self.is_sorted() {
            return None;
        }
        Some((0..self.modes()).map(|c| self.u2[(c, c)]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::haar_random_unitary;
    use crate::mzi::mzi_matrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Labels from ranks: `rank(A[i.., ..=j]) = #{r >= i : p[r] <= j}`.
    fn rank_profile_permutation(a: &ComplexMatrix) -> Permutation {
        let m = a.rows();
        let rank = |i: usize, j: usize| -> usize {
            if i >= m {
                return 0;
            }
            let rows: Vec<usize> = (i..m).collect();
            a.submatrix(&rows, 0..j + 1).rank(1e-9)
        };
        let mut p = vec![0; m];
        for i in 0..m {
            // p[i] is the first column where row i adds to the rank below it
            p[i] = (0..m)
                .find(|&j| rank(i, j) - rank(i + 1, j) == 1)
                .expect("invertible");
        }
        p
    }

    fn check_shape(s: &BruhatState) {
        let m = s.modes();
        for r in 0..m {
            assert_eq!(s.u1[(r, r)], ONE);
            for c in 0..r {
                assert_eq!(s.u1[(r, c)], ZERO);
                assert_eq!(s.u2[(r, c)], ZERO);
            }
            assert!(s.u2[(r, r)] != ZERO);
        }
    }

    fn random_2x2(rng: &mut ChaCha8Rng) -> Mat2 {
        let mut z = || Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        [[z(), z()], [z(), z()]]
    }

    #[test]
    fn identity_and_permutations() {
        let s = bruhat_decompose(&UnitaryMatrix::identity(5)).unwrap();
        assert_eq!(s, BruhatState::identity(5));

        let perm = vec![2, 0, 3, 1];
        let q = ComplexMatrix::permutation(&perm);
        let s = decompose_matrix(&q).unwrap();
        assert_eq!(s.u1, ComplexMatrix::identity(4));
        assert_eq!(s.u2, ComplexMatrix::identity(4));
        // labels: row i holds a one in column p[i]
        for i in 0..4 {
            assert_eq!(q[(i, s.p[i])], ONE);
        }
    }

    #[test]
    fn haar_reconstruction_and_rank_profile() {
        let u = haar_random_unitary(6, 11).unwrap();
        let s = bruhat_decompose(&u).unwrap();
        check_shape(&s);
        assert!(s.reconstruct().distance(u.matrix()) < 1e-9);
        assert_eq!(s.p, rank_profile_permutation(u.matrix()));
    }

    #[test]
    fn singular_input_is_rejected() {
        let a = ComplexMatrix::from_rows(&[vec![ONE, ONE], vec![ONE, ONE]]).unwrap();
        assert_eq!(decompose_matrix(&a), Err(Error::Singular));
    }

    #[test]
    fn apply_identity_is_noop() {
        let u = haar_random_unitary(5, 3).unwrap();
        let s = bruhat_decompose(&u).unwrap();
        let id = [[ONE, ZERO], [ZERO, ONE]];
        for i in 0..4 {
            let t = s.apply_two_mode(i, &id).unwrap();
            assert_eq!(t.p, s.p);
            assert!(t.reconstruct().distance(&s.reconstruct()) < 1e-12);
        }
    }

    #[test]
    fn gamma_zero_swaps_labels() {
        // on the identity state the block of E U1 is E itself; a swap MZI has
        // a zero bottom-right entry
        let s = BruhatState::identity(4);
        let e = MziParams::new(0.0, 0.0).transfer();
        let t = s.apply_two_mode(1, &e).unwrap();
        assert_eq!(t.p, vec![0, 2, 1, 3]);
        check_shape(&t);
    }

    #[test]
    fn singular_operator_is_rejected() {
        let s = BruhatState::identity(3);
        let e = [[ONE, ONE], [ONE, ONE]];
        assert_eq!(s.apply_two_mode(0, &e), Err(Error::Singular));
    }

    #[test]
    fn swap_rows_examples() {
        let s = BruhatState::identity(3);
        let (p, t) = s.swap_rows_mzi(0);
        assert_eq!((p.theta, p.phi), (0.0, 0.0));
        assert_eq!(t.p, vec![1, 0, 2]);

        let mut s = BruhatState::identity(3);
        s.u1[(1, 2)] = ONE;
        let (p, t) = s.swap_rows_mzi(1);
        assert!((p.theta - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert_eq!(t.p, vec![0, 2, 1]);
        check_shape(&t);
        let e = mzi_matrix(p);
        let mut expect = s.reconstruct();
        expect.rotate_rows(1, 2, &[[e.matrix()[(0, 0)], e.matrix()[(0, 1)]], [e.matrix()[(1, 0)], e.matrix()[(1, 1)]]]);
        assert!(t.reconstruct().distance(&expect) < 1e-12);
    }

    #[test]
    fn sorted_unitary_state_is_diagonal() {
        // sort the labels of a Haar unitary with label swaps, then check U1 U2
        let u = haar_random_unitary(6, 5).unwrap();
        let mut s = bruhat_decompose(&u).unwrap();
        let mut r = u.matrix().clone();
        loop {
            let Some(i) = (0..5).find(|&i| s.p[i] > s.p[i + 1]) else { break };
            let params = s.swap_rows_mzi_mut(i);
            r.rotate_rows(i, i + 1, &params.transfer());
        }
        let d = s.diagonal().unwrap();
        assert!(s.reconstruct().distance(&r) < 1e-9);
        assert!(ComplexMatrix::diagonal(&d).distance(&r) < 1e-9);
    }

    #[test]
    fn uniqueness_against_rank_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for trial in 0..1000u64 {
            let m = rng.random_range(1..=10);
            let u = haar_random_unitary(m, trial).unwrap();
            // also exercise non-generic permutation structure
            let mut perm: Vec<usize> = (0..m).collect();
            for k in (1..m).rev() {
                perm.swap(k, rng.random_range(0..=k));
            }
            let a = if trial % 2 == 0 {
                u.into_inner()
            } else {
                let s = bruhat_decompose(&u).unwrap();
                // upper-triangular factors around a chosen permutation
                let mut pu2 = ComplexMatrix::zeros(m, m);
                for i in 0..m {
                    pu2.row_mut(i).copy_from_slice(s.u2.row(perm[i]));
                }
                s.u1.matmul(&pu2)
            };
            let s = decompose_matrix(&a).unwrap();
            assert_eq!(s.p, rank_profile_permutation(&a), "trial {trial}");
            if trial % 2 == 1 {
                assert_eq!(s.p, perm);
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(300))]

            #[test]
            fn update_matches_recomputation(seed in any::<u64>(), m in 2usize..=8, steps in 1usize..=12) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let u = haar_random_unitary(m, seed).unwrap();
                let mut s = bruhat_decompose(&u).unwrap();
                let mut a = u.into_inner();
                for _ in 0..steps {
                    let i = rng.random_range(0..m - 1);
                    let e = random_2x2(&mut rng);
                    let old = s.p.clone();
                    s.apply_two_mode_mut(i, &e).unwrap();
                    a.rotate_rows(i, i + 1, &e);
                    check_shape(&s);
                    // locality: at most the transposition of i, i + 1
                    let mut swapped = old.clone();
                    swapped.swap(i, i + 1);
                    prop_assert!(s.p == old || s.p == swapped);
                    let scale = a.frobenius_norm();
                    prop_assert!(s.reconstruct().distance(&a) < 1e-9 * scale.max(1.0));
                    prop_assert_eq!(&s.p, &decompose_matrix(&a).unwrap().p);
                }
            }

            #[test]
            fn swap_rows_exchanges_labels(seed in any::<u64>(), m in 2usize..=8) {
                let u = haar_random_unitary(m, seed).unwrap();
                let s = bruhat_decompose(&u).unwrap();
                let i = (seed as usize) % (m - 1);
                let (_, t) = s.swap_rows_mzi(i);
                let mut expect = s.p.clone();
                expect.swap(i, i + 1);
                prop_assert_eq!(&t.p, &expect);
                check_shape(&t);
            }
        }
    }
}
