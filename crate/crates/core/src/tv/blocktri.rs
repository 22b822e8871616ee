//! Cholesky factorization of symmetric positive-definite block-tridiagonal
//! matrices.
//!
//! With diagonal blocks `A_t` and sub-diagonal blocks `B_t` (block row `t`,
//! column `t - 1`), the factor `L` is lower block-bidiagonal:
//!
//! ```text
//! L_1 L_1' = A_1
//! C_t      = B_t L_{t-1}^{-T}
//! L_t L_t' = A_t - C_t C_t'
//! ```
//!
//! Work is `O(T b^3)` for `T` blocks of size `b`; solves are `O(T b^2)` per
//! right-hand side.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BlockTridiagCholesky {
    block: usize,
    /// Lower-triangular diagonal factors `L_t`.
    diag: Vec<DMatrix<f64>>,
    /// `C_t` for `t >= 1`; `coupling[0]` is unused (empty).
    coupling: Vec<DMatrix<f64>>,
}

impl BlockTridiagCholesky {
    /// Factors the matrix with diagonal blocks `diag` and sub-diagonal blocks
    /// `sub` (`sub.len() == diag.len() - 1`, `sub[t]` couples block `t + 1`
    /// to block `t`).
    pub fn factor(diag: Vec<DMatrix<f64>>, sub: &[DMatrix<f64>]) -> Result<Self> {
        let n = diag.len();
        if n == 0 {
            return Err(Error::ShapeError("no blocks".into()));
        }
        let b = diag[0].nrows();
        if sub.len() + 1 != n
            || diag.iter().any(|a| a.shape() != (b, b))
            || sub.iter().any(|s| s.shape() != (b, b))
        {
            return Err(Error::ShapeError("inconsistent block shapes".into()));
        }

        let mut factors: Vec<DMatrix<f64>> = Vec::with_capacity(n);
        let mut coupling = Vec::with_capacity(n);
        coupling.push(DMatrix::zeros(0, 0));
        for (t, mut a) in diag.into_iter().enumerate() {
            if t > 0 {
                // C_t = B_t L_{t-1}^{-T}  <=>  L_{t-1} C_t' = B_t'
                let ct_t = factors[t - 1]
                    .solve_lower_triangular(&sub[t - 1].transpose())
                    .ok_or_else(|| Error::Singular(format!("zero pivot before block {t}")))?;
                let c = ct_t.transpose();
                a -= &c * &ct_t;
                coupling.push(c);
            }
            let chol = Cholesky::<f64, Dyn>::new(a)
                .ok_or_else(|| Error::Singular(format!("block {t} is not positive definite")))?;
            factors.push(chol.unpack());
        }
        Ok(Self {
            block: b,
            diag: factors,
            coupling,
        })
    }

    pub fn block_size(&self) -> usize {
        self.block
    }

    pub fn n_blocks(&self) -> usize {
        self.diag.len()
    }

    /// Solves in place. `rhs` is `(n_blocks * block) x r`, block `t` in rows
    /// `t*block .. (t+1)*block`.
    pub fn solve_mut(&self, rhs: &mut DMatrix<f64>) -> Result<()> {
        let b = self.block;
        let n = self.n_blocks();
        if rhs.nrows() != n * b {
            return Err(Error::ShapeError(format!(
                "rhs has {} rows, system has {}",
                rhs.nrows(),
                n * b
            )));
        }

        // forward: L z = rhs
        let mut prev: Option<DMatrix<f64>> = None;
        for t in 0..n {
            let mut blk = rhs.rows(t * b, b).clone_owned();
            if let Some(z) = &prev {
                blk -= &self.coupling[t] * z;
            }
            if !self.diag[t].solve_lower_triangular_mut(&mut blk) {
                return Err(Error::Singular(format!("zero pivot in block {t}")));
            }
            rhs.rows_mut(t * b, b).copy_from(&blk);
            prev = Some(blk);
        }

        // backward: L' x = z
        let mut next: Option<DMatrix<f64>> = None;
        for t in (0..n).rev() {
            let mut blk = rhs.rows(t * b, b).clone_owned();
            if let Some(x) = &next {
                blk -= self.coupling[t + 1].tr_mul(x);
            }
            if !self.diag[t].tr_solve_lower_triangular_mut(&mut blk) {
                return Err(Error::Singular(format!("zero pivot in block {t}")));
            }
            rhs.rows_mut(t * b, b).copy_from(&blk);
            next = Some(blk);
        }
        Ok(())
    }
}
