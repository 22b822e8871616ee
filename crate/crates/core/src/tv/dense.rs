use nalgebra::DMatrix;

use super::{StateLayout, TvProblem};
use crate::error::{Error, Result};

/// Stacked least-squares solve by dense QR.
///
/// Builds the full `(T*k + T*d) x T*d` regression, observation rows on
/// top of state-difference rows, and solves it directly. Cost is cubic in
/// `T*d`, so this is only a reference for checking the fast solvers on
/// small problems.
pub fn dense_stacked_solve(problem: &TvProblem) -> Result<DMatrix<f64>> {
    let StateLayout { k, m, t_len } = problem.layout;
    let d = k * m;
    let n = t_len * d;
    let rows = t_len * k + n;
    let mut a = DMatrix::<f64>::zeros(rows, n);
    let mut b = nalgebra::DVector::<f64>::zeros(rows);

    for t in 0..t_len {
        for i in 0..k {
            let r = t * k + i;
            let sw = problem.obs_weights[i].sqrt();
            for (j, x) in problem.row(t, i).iter().enumerate() {
                a[(r, t * d + i * m + j)] = sw * x;
            }
            b[r] = sw * problem.y[(t, i)];
        }
    }
    let sl = problem.lambda.sqrt();
    for t in 0..t_len {
        for s in 0..d {
            let r = t_len * k + t * d + s;
            a[(r, t * d + s)] = sl;
            if t == 0 {
                b[r] = sl * problem.gamma0[s];
            } else {
                a[(r, (t - 1) * d + s)] = -sl;
            }
        }
    }

    let qr = a.qr();
    let qtb = qr.q().transpose() * b;
    let x = qr
        .r()
        .solve_upper_triangular(&qtb)
        .ok_or_else(|| Error::Singular("dense stacked system".into()))?;
    Ok(DMatrix::from_fn(t_len, d, |t, s| x[t * d + s]))
}
