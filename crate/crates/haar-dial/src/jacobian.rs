//! Jacobian of the map from cascade parameters to scaled output weights.
//!
//! The map sends (r_0, r_1, .., r_{n-1}) to x_i = r_0 r_{i+1} prod_{k<=i}
//! (1 - r_k) with the convention r_n = 1; r_0 is an overall scale and the
//! rest are reflectivities. Its Jacobian is lower Hessenberg and its
//! determinant factorizes, which is what makes the dialled marginals
//! independent. Everything here pins that factorization against plain
//! numerics.

use crate::error::{Error, Result};
use crate::jsonfmt;
use crate::sampler::{unit_open, RngStream, StreamKind};
use serde::{Deserialize, Serialize};

/// Central-difference step. The map is multilinear in each coordinate, so
/// the truncation error is exactly zero and only rounding remains.
pub const FD_STEP: f64 = 1e-6;
/// Relative agreement required between determinant evaluations.
pub const DET_REL_TOL: f64 = 1e-5;
/// Agreement required inside the column-elimination check.
pub const REDUCTION_TOL: f64 = 1e-10;

/// Evaluation point. `r[0]` is the scale, `r[1..]` are reflectivities.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianPoint {
    pub n: usize,
    pub r: Vec<f64>,
}

impl JacobianPoint {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Domain(format!(
                "jacobian check needs n >= 2, got {}",
                self.n
            )));
        }
        if self.r.len() != self.n {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.n,
                self.r.len()
            )));
        }
        if !(self.r[0] > 0.0 && self.r[0].is_finite()) {
            return Err(Error::Domain(format!(
                "scale parameter must be positive and finite, got {}",
                self.r[0]
            )));
        }
        for (k, &rk) in self.r.iter().enumerate().skip(1) {
            if !(0.0..=1.0).contains(&rk) {
                return Err(Error::Domain(format!(
                    "reflectivity r_{k} = {rk} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }

    /// Draw an interior point: scale in [0.1, 10], reflectivities in
    /// [0.05, 0.95]. The margins keep finite differences and pivots away
    /// from the degenerate boundary.
    pub fn sample(n: usize, stream: &RngStream) -> Self {
        let mut rng = stream.rng();
        let mut r = Vec::with_capacity(n);
        r.push(0.1 + 9.9 * unit_open(&mut rng));
        for _ in 1..n {
            r.push(0.05 + 0.9 * unit_open(&mut rng));
        }
        JacobianPoint { n, r }
    }
}

/// The forward map. Output weights sum to r_0.
pub fn x_map(p: &JacobianPoint) -> Result<Vec<f64>> {
    p.validate()?;
    let n = p.n;
    let mut out = Vec::with_capacity(n);
    let mut survive = p.r[0];
    for i in 0..n {
        let r_next = if i + 1 < n { p.r[i + 1] } else { 1.0 };
        out.push(survive * r_next);
        if i + 1 < n {
            survive *= 1.0 - p.r[i + 1];
        }
    }
    Ok(out)
}

/// Closed-form |det J| = r_0^{n-1} prod_{k=1}^{n-1} (1 - r_k)^{n-1-k}.
pub fn jacobian_closed_form(p: &JacobianPoint) -> Result<f64> {
    p.validate()?;
    let n = p.n;
    let mut det = p.r[0].powi((n - 1) as i32);
    for k in 1..n {
        det *= (1.0 - p.r[k]).powi((n - 1 - k) as i32);
    }
    Ok(det)
}

/// Row-major n x n Jacobian from the closed-form partial derivatives.
pub fn analytic_jacobian(p: &JacobianPoint) -> Result<Vec<f64>> {
    p.validate()?;
    let n = p.n;
    let r = &p.r;
    let x = x_map(p)?;
    let mut j = vec![0.0; n * n];
    for i in 0..n {
        let r_next = if i + 1 < n { r[i + 1] } else { 1.0 };
        // d x_i / d r_0 drops the scale factor
        j[i * n] = x[i] / r[0];
        // d x_i / d r_l for 1 <= l <= i flips one survival factor
        for l in 1..=i.min(n - 1) {
            let mut v = -r[0] * r_next;
            for k in 1..=i {
                if k != l {
                    v *= 1.0 - r[k];
                }
            }
            j[i * n + l] = v;
        }
        // d x_i / d r_{i+1} keeps all survival factors
        if i + 1 < n {
            let mut v = r[0];
            for k in 1..=i {
                v *= 1.0 - r[k];
            }
            j[i * n + i + 1] = v;
        }
    }
    Ok(j)
}

/// Central-difference Jacobian with step `h`.
pub fn fd_jacobian(p: &JacobianPoint, h: f64) -> Result<Vec<f64>> {
    p.validate()?;
    if h.is_nan() || h <= 0.0 {
        return Err(Error::Domain(format!("step must be positive, got {h}")));
    }
    let n = p.n;
    let mut j = vec![0.0; n * n];
    for col in 0..n {
        let mut hi = p.clone();
        let mut lo = p.clone();
        hi.r[col] += h;
        lo.r[col] -= h;
        let xh = x_map(&hi)?;
        let xl = x_map(&lo)?;
        for row in 0..n {
            j[row * n + col] = (xh[row] - xl[row]) / (2.0 * h);
        }
    }
    Ok(j)
}

/// |det| by partial-pivoted LU. Consumes the buffer.
pub fn abs_det(mat: &mut [f64], n: usize) -> Result<f64> {
    if mat.len() != n * n {
        return Err(Error::Shape(format!(
            "expected {} entries for an {n}x{n} determinant, got {}",
            n * n,
            mat.len()
        )));
    }
    let mut det = 1.0f64;
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if mat[row * n + col].abs() > mat[pivot * n + col].abs() {
                pivot = row;
            }
        }
        let pval = mat[pivot * n + col];
        if pval == 0.0 {
            return Ok(0.0);
        }
        if pivot != col {
            for k in 0..n {
                mat.swap(pivot * n + k, col * n + k);
            }
        }
        det *= mat[col * n + col];
        for row in col + 1..n {
            let f = mat[row * n + col] / mat[col * n + col];
            for k in col..n {
                mat[row * n + k] -= f * mat[col * n + k];
            }
        }
    }
    Ok(det.abs())
}

/// Eliminate column 0 of the analytic Jacobian against the superdiagonal and
/// confirm the intermediate entries follow their closed form, the surviving
/// element lands on 1, and the shifted matrix is lower triangular with the
/// factorized determinant on its diagonal.
pub fn hessenberg_reduction_check(p: &JacobianPoint) -> Result<bool> {
    p.validate()?;
    let n = p.n;
    let r = &p.r;
    let mut j = analytic_jacobian(p)?;
    let mut ok = true;

    for k in 1..n {
        let pivot = j[(k - 1) * n + k];
        if pivot.abs() < 1e-300 {
            return Err(Error::Degenerate(format!(
                "superdiagonal pivot at step {k} is zero; some r_l = 1 or r_0 = 0"
            )));
        }
        let mult = j[(k - 1) * n] / pivot;
        for row in 0..n {
            j[row * n] -= j[row * n + k] * mult;
        }
        // Row k-1 was just eliminated.
        ok &= j[(k - 1) * n].abs() <= REDUCTION_TOL * (1.0 + r[0].abs());
        // Remaining rows must match r_{i+1} prod_{l=k+1}^{i} (1 - r_l).
        for i in k..n {
            let r_next = if i + 1 < n { r[i + 1] } else { 1.0 };
            let mut want = r_next;
            for l in k + 1..=i {
                want *= 1.0 - r[l];
            }
            ok &= (j[i * n] - want).abs() <= REDUCTION_TOL * (1.0 + want.abs());
        }
    }
    ok &= (j[(n - 1) * n] - 1.0).abs() <= REDUCTION_TOL;

    // Columns (1, .., n-1, transformed 0) form a lower-triangular matrix
    // whose diagonal multiplies out to the closed-form determinant.
    let mut diag_product = 1.0;
    for col in 1..n {
        diag_product *= j[(col - 1) * n + col];
        for row in 0..col.saturating_sub(1) {
            ok &= j[row * n + col] == 0.0;
        }
    }
    let closed = jacobian_closed_form(p)?;
    ok &= (diag_product.abs() - closed).abs() <= DET_REL_TOL * closed;
    Ok(ok)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JacobianRow {
    pub n: usize,
    pub max_rel_err_fd: f64,
    pub max_rel_err_closed: f64,
    pub reductions_pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JacobianReport {
    pub dim_max: usize,
    pub points: usize,
    pub seed: u64,
    pub per_n: Vec<JacobianRow>,
    pub pass: bool,
}

impl JacobianReport {
    pub fn to_json(&self) -> String {
        jsonfmt::to_string(self)
    }
}

/// Compare |det| of the analytic and finite-difference Jacobians and the
/// closed form at `points` random interior points for every n up to
/// `dim_max`, and run the elimination check at each point.
pub fn jacobian_report(dim_max: usize, points: usize, seed: u64) -> Result<JacobianReport> {
    if dim_max < 2 {
        return Err(Error::Domain(format!(
            "dim_max must be at least 2, got {dim_max}"
        )));
    }
    if points < 1 {
        return Err(Error::Domain("need at least one evaluation point".into()));
    }
    let mut per_n = Vec::new();
    let mut pass = true;
    for n in 2..=dim_max {
        let mut worst_fd = 0.0f64;
        let mut worst_closed = 0.0f64;
        let mut reductions = true;
        for lane in 0..points {
            let stream = RngStream::new(seed, lane as u32, n, 0, StreamKind::Jacobian);
            let p = JacobianPoint::sample(n, &stream);
            let closed = jacobian_closed_form(&p)?;
            let mut a = analytic_jacobian(&p)?;
            let det_a = abs_det(&mut a, n)?;
            let mut f = fd_jacobian(&p, FD_STEP)?;
            let det_f = abs_det(&mut f, n)?;
            worst_fd = worst_fd.max((det_a - det_f).abs() / closed);
            worst_closed = worst_closed.max((det_a - closed).abs() / closed);
            reductions &= hessenberg_reduction_check(&p)?;
        }
        pass &= worst_fd <= DET_REL_TOL && worst_closed <= DET_REL_TOL && reductions;
        per_n.push(JacobianRow {
            n,
            max_rel_err_fd: worst_fd,
            max_rel_err_closed: worst_closed,
            reductions_pass: reductions,
        });
    }
    Ok(JacobianReport {
        dim_max,
        points,
        seed,
        per_n,
        pass,
    })
}
