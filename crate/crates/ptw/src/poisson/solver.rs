//! Direct solver for the discrete Poisson equation.
//!
//! The stencil coefficients depend on κ only, so the discrete operator is
//! block-circulant in θ: a DFT in θ decouples it into one tridiagonal
//! κ-system per wavenumber. Nonzero wavenumbers are strictly diagonally
//! dominant and solved by the Thomas algorithm; the zero mode carries the
//! kernel (constants) and the compatibility defect, and is solved as a
//! bordered system with the invariant-measure gauge `Σ w·g = 0`. The defect
//! multiplier λ lands on the normalized weight column, so the reported
//! residual equals |λ| at the most-weighted node.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{PtwError, Result};

use super::operator::{kappa_row, kappa_weights, theta_symbol, Grid, OperatorOptions};

/// Solve `L_h g = f - λ c` with `Σ w g = 0`; returns `(g, λ)`.
pub(crate) fn solve_fourier(
    grid: &Grid,
    alpha: f64,
    opts: &OperatorOptions,
    f: &[f64],
) -> Result<(Vec<f64>, f64)> {
    grid.validate_for_alpha(alpha)?;
    let (nt, nk) = (grid.n_theta, grid.n_kappa);
    if f.len() != grid.n_nodes() {
        return Err(PtwError::IncompatibleRhs(format!(
            "rhs has {} entries, grid has {}",
            f.len(),
            grid.n_nodes()
        )));
    }

    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(nt);
    let inv = planner.plan_fft_inverse(nt);

    // forward DFT along θ for every κ row: fhat[m][j]
    let mut fhat = vec![vec![Complex64::new(0.0, 0.0); nk]; nt];
    let mut col = vec![Complex64::new(0.0, 0.0); nt];
    for j in 0..nk {
        for i in 0..nt {
            col[i] = Complex64::new(f[grid.idx(i, j)], 0.0);
        }
        fwd.process(&mut col);
        for m in 0..nt {
            fhat[m][j] = col[m] / nt as f64;
        }
    }

    let rows: Vec<(f64, f64, f64)> = (0..nk).map(|j| kappa_row(grid, alpha, j)).collect();
    let h_th = grid.h_theta();
    let wk = kappa_weights(grid, alpha);
    let wmax = wk.iter().cloned().fold(0.0f64, f64::max);

    let mut ghat = vec![vec![Complex64::new(0.0, 0.0); nk]; nt];
    let mut lambda = 0.0;

    for m in 0..nt {
        if m == 0 {
            let rhs: Vec<f64> = fhat[0].iter().map(|c| c.re).collect();
            let (g0, lam) = solve_mode_zero(&rows, &wk, wmax, &rhs)?;
            for j in 0..nk {
                ghat[0][j] = Complex64::new(g0[j], 0.0);
            }
            lambda = lam;
        } else {
            let mut sub = vec![Complex64::new(0.0, 0.0); nk];
            let mut diag = vec![Complex64::new(0.0, 0.0); nk];
            let mut sup = vec![Complex64::new(0.0, 0.0); nk];
            for j in 0..nk {
                let (s, d, u) = rows[j];
                sub[j] = Complex64::new(s, 0.0);
                sup[j] = Complex64::new(u, 0.0);
                diag[j] = Complex64::new(d, 0.0)
                    + theta_symbol(grid.kappa(j), h_th, opts.theta_scheme, m);
            }
            ghat[m] = thomas(&sub, &mut diag, &sup, &mut fhat[m].clone())?;
        }
    }

    // inverse DFT back to the grid
    let mut g = vec![0.0; grid.n_nodes()];
    for j in 0..nk {
        for m in 0..nt {
            col[m] = ghat[m][j];
        }
        inv.process(&mut col);
        for i in 0..nt {
            g[grid.idx(i, j)] = col[i].re;
        }
    }

    // polish the gauge: remove the (tiny) residual mean exactly
    let nt_f = nt as f64;
    let mut mean = 0.0;
    for i in 0..nt {
        for j in 0..nk {
            mean += wk[j] / nt_f * g[grid.idx(i, j)];
        }
    }
    for v in &mut g {
        *v -= mean;
    }

    Ok((g, lambda))
}

/// Bordered zero-mode system: `[[T, c], [w^T, 0]] [g; λ] = [rhs; 0]` with
/// `c = w / ‖w‖_∞`. `T` is singular (constants), the border makes the system
/// nonsingular; dense LU with partial pivoting.
fn solve_mode_zero(
    rows: &[(f64, f64, f64)],
    wk: &[f64],
    wmax: f64,
    rhs: &[f64],
) -> Result<(Vec<f64>, f64)> {
    let nk = rows.len();
    let n = nk + 1;
    let mut a = vec![0.0f64; n * n];
    for (j, &(sub, diag, sup)) in rows.iter().enumerate() {
        if j > 0 {
            a[j * n + j - 1] = sub;
        }
        a[j * n + j] = diag;
        if j + 1 < nk {
            a[j * n + j + 1] = sup;
        }
        a[j * n + nk] = wk[j] / wmax;
        a[nk * n + j] = wk[j];
    }
    let mut b = vec![0.0f64; n];
    b[..nk].copy_from_slice(rhs);
    let x = lu_solve(&mut a, &mut b, n)?;
    Ok((x[..nk].to_vec(), x[nk]))
}

/// Dense LU with partial pivoting; solves in place.
fn lu_solve(a: &mut [f64], b: &mut [f64], n: usize) -> Result<Vec<f64>> {
    let mut piv: Vec<usize> = (0..n).collect();
    for k in 0..n {
        // pivot search
        let mut pk = k;
        let mut pmax = a[piv[k] * n + k].abs();
        for r in (k + 1)..n {
            let v = a[piv[r] * n + k].abs();
            if v > pmax {
                pmax = v;
                pk = r;
            }
        }
        if pmax < 1e-300 {
            return Err(PtwError::NoConvergence("singular bordered system".into()));
        }
        piv.swap(k, pk);
        let prow = piv[k];
        let pivot = a[prow * n + k];
        for r in (k + 1)..n {
            let row = piv[r];
            let factor = a[row * n + k] / pivot;
            if factor != 0.0 {
                a[row * n + k] = factor;
                for c in (k + 1)..n {
                    a[row * n + c] -= factor * a[prow * n + c];
                }
            }
        }
    }
    // forward substitution
    let mut y = vec![0.0; n];
    for k in 0..n {
        let mut acc = b[piv[k]];
        for c in 0..k {
            acc -= a[piv[k] * n + c] * y[c];
        }
        y[k] = acc;
    }
    // back substitution
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let mut acc = y[k];
        for c in (k + 1)..n {
            acc -= a[piv[k] * n + c] * x[c];
        }
        x[k] = acc / a[piv[k] * n + k];
    }
    Ok(x)
}

/// Thomas algorithm for a complex tridiagonal system; consumes `diag`/`rhs`.
fn thomas(
    sub: &[Complex64],
    diag: &mut [Complex64],
    sup: &[Complex64],
    rhs: &mut [Complex64],
) -> Result<Vec<Complex64>> {
    let n = diag.len();
    for j in 1..n {
        let denom = diag[j - 1];
        if denom.norm_sqr() < 1e-280 {
            return Err(PtwError::NoConvergence("tridiagonal pivot underflow".into()));
        }
        let w = sub[j] / denom;
        diag[j] -= w * sup[j - 1];
        rhs[j] -= w * rhs[j - 1];
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    let last = diag[n - 1];
    if last.norm_sqr() < 1e-280 {
        return Err(PtwError::NoConvergence("tridiagonal pivot underflow".into()));
    }
    x[n - 1] = rhs[n - 1] / last;
    for j in (0..n - 1).rev() {
        x[j] = (rhs[j] - sup[j] * x[j + 1]) / diag[j];
    }
    Ok(x)
}
