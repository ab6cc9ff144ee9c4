//! Real-scalar abstraction and the small numeric kernels shared by the
//! analytic modules: normal CDF, least-squares fits, medians.

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating scalar the analytic kernels are generic over. Blanket-implemented
/// for anything float-like (`f32`, `f64`); the crate-level [`crate::Real`]
/// alias pins the concrete type used by the domain layer.
pub trait RealScalar:
    Float + FromPrimitive + ToPrimitive + std::fmt::Debug + std::fmt::Display
{
}

impl<T> RealScalar for T where
    T: Float + FromPrimitive + ToPrimitive + std::fmt::Debug + std::fmt::Display
{
}

/// Error function, evaluated in f64 precision.
pub fn erf<R: RealScalar>(x: R) -> R {
    R::from_f64(libm::erf(x.to_f64().unwrap_or(f64::NAN))).unwrap()
}

/// Standard normal CDF.
pub fn normal_cdf<R: RealScalar>(z: R) -> R {
    let half = R::from_f64(0.5).unwrap();
    let sqrt2 = R::from_f64(std::f64::consts::SQRT_2).unwrap();
    half * (R::one() + erf(z / sqrt2))
}

/// Ordinary least squares of `y` on `x`: returns `(slope, intercept, r_squared)`,
/// or `None` with fewer than two distinct abscissae. A zero-variance `y` fits
/// exactly (`r_squared = 1`).
pub fn fit_line<R: RealScalar>(xs: &[R], ys: &[R]) -> Option<(R, R, R)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = R::from_usize(xs.len()).unwrap();
    let mean_x = xs.iter().fold(R::zero(), |a, &b| a + b) / n;
    let mean_y = ys.iter().fold(R::zero(), |a, &b| a + b) / n;
    let mut sxx = R::zero();
    let mut sxy = R::zero();
    let mut syy = R::zero();
    for (&x, &y) in xs.iter().zip(ys) {
        let dx = x - mean_x;
        let dy = y - mean_y;
        sxx = sxx + dx * dx;
        sxy = sxy + dx * dy;
        syy = syy + dy * dy;
    }
    if sxx.is_zero() {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let r2 = if syy.is_zero() {
        R::one()
    } else {
        let ss_res = syy - slope * sxy;
        R::one() - ss_res / syy
    };
    Some((slope, intercept, r2))
}

/// Least squares of `y` against the basis `{x, ln x, 1}`: returns the three
/// coefficients, or `None` when the normal equations are singular (fewer than
/// three distinct abscissae).
pub fn fit_linear_log<R: RealScalar>(xs: &[R], ys: &[R]) -> Option<(R, R, R)> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return None;
    }
    let mut ata = [[R::zero(); 3]; 3];
    let mut atb = [R::zero(); 3];
    for (&x, &y) in xs.iter().zip(ys) {
        if x <= R::zero() {
            return None;
        }
        let row = [x, x.ln(), R::one()];
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] = ata[i][j] + row[i] * row[j];
            }
            atb[i] = atb[i] + row[i] * y;
        }
    }
    solve3(ata, atb)
}

/// 3x3 linear solve with partial pivoting; `None` on a (near-)singular system.
fn solve3<R: RealScalar>(mut a: [[R; 3]; 3], mut b: [R; 3]) -> Option<(R, R, R)> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| {
            a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if a[pivot][col].abs() < R::from_f64(1e-12).unwrap() {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] = a[row][k] - f * a[col][k];
            }
            b[row] = b[row] - f * b[col];
        }
    }
    let z = b[2] / a[2][2];
    let y = (b[1] - a[1][2] * z) / a[1][1];
    let x = (b[0] - a[0][1] * y - a[0][2] * z) / a[0][0];
    Some((x, y, z))
}

/// Median of a non-empty slice (average of the middle pair for even lengths).
pub fn median<R: RealScalar>(values: &[R]) -> Option<R> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / R::from_u8(2).unwrap()
    })
}
