//! Maximal coupling of solid-ball uniform jumps.
//!
//! Chain X proposes `x* = x + u_x` with `u_x` uniform in the ball of radius
//! `r`. Chain Y's proposal is built from X's: if `x*` also lies in Y's ball the
//! two proposals are identical, otherwise Y's jump is `u_x` translated along
//! the X→Y axis just far enough to leave the overlap of the two balls. Either
//! way Y's jump is itself uniform in its own ball.

use crate::error::{Error, Result};
use crate::kernel::euclidean;

const PRECONDITION_TOL: f64 = 1e-9;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Uniform jump inside the ball of radius `r` around `x`.
///
/// `dir` supplies `d` standard normals (the direction), `mag` a uniform whose
/// `1/d` power scales the radius.
pub fn jump(x: &[f64], r: f64, dir: &[f64], mag: f64) -> Result<Vec<f64>> {
    if r.is_nan() || r <= 0.0 {
        return Err(Error::InvalidParameter(format!("jump radius must be positive, got {r}")));
    }
    if dir.len() != x.len() {
        return Err(Error::InvalidParameter(format!(
            "direction has {} coordinates, point has {}",
            dir.len(),
            x.len()
        )));
    }
    let len = norm(dir);
    if len == 0.0 || !len.is_finite() {
        return Err(Error::ZeroDirection);
    }
    let scale = r * mag.powf(1.0 / x.len() as f64) / len;
    Ok(x.iter().zip(dir).map(|(xi, ui)| xi + scale * ui).collect())
}

/// Y's proposal given X's origin `x`, X's proposal `x_star` and Y's origin `y`.
pub fn max_couple(x: &[f64], x_star: &[f64], y: &[f64], r: f64) -> Result<Vec<f64>> {
    if x.len() != x_star.len() || x.len() != y.len() {
        return Err(Error::InvalidParameter("coupled points differ in dimension".into()));
    }
    let jump_len = euclidean(x_star, x);
    if jump_len > r + PRECONDITION_TOL {
        return Err(Error::Precondition(format!(
            "|x* - x| = {jump_len} exceeds radius {r}"
        )));
    }
    if euclidean(y, x_star) <= r || x == y {
        return Ok(x_star.to_vec());
    }

    let u_x: Vec<f64> = x_star.iter().zip(x).map(|(a, b)| a - b).collect();
    let half = 0.5 * euclidean(y, x);
    let v: Vec<f64> = y.iter().zip(x).map(|(a, b)| 0.5 * (a - b) / half).collect();
    let along = dot(&u_x, &v);
    let c: Vec<f64> = v
        .iter()
        .zip(&u_x)
        .map(|(vi, ui)| half * vi + ui - along * vi)
        .collect();
    let cc = dot(&c, &c);

    if cc.sqrt() < r {
        let w = -half + (half * half + r * r - cc).sqrt();
        Ok(y.iter()
            .zip(&u_x)
            .zip(&v)
            .map(|((yi, ui), vi)| yi + ui + 2.0 * w * vi)
            .collect())
    } else {
        Ok(y.iter().zip(&u_x).map(|(yi, ui)| yi + ui).collect())
    }
}

/// Metropolis–Hastings acceptance: true when `r_mh <= exp(U(x) - U(x*))`.
///
/// `u_x` and `u_star` are the negative log densities at the origin and the
/// proposal. An infinite `u_star` is always rejected.
pub fn mh_accept(u_x: f64, u_star: f64, r_mh: f64) -> bool {
    if u_star == f64::INFINITY {
        return false;
    }
    r_mh <= (u_x - u_star).exp()
}

/// Returns `x_star` if the M–H test accepts the move, otherwise `x`.
pub fn mh_test<'a, U>(neg_log_density: U, x: &'a [f64], x_star: &'a [f64], r_mh: f64) -> &'a [f64]
where
    U: Fn(&[f64]) -> f64,
{
    if mh_accept(neg_log_density(x), neg_log_density(x_star), r_mh) {
        x_star
    } else {
        x
    }
}
