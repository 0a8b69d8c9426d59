//! Small dense-vector helpers. Everything here works on plain slices.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn norm1(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).sum()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn scale(a: &[f64], c: f64) -> Vec<f64> {
    a.iter().map(|x| c * x).collect()
}

/// Max absolute coordinate difference.
pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Angle in radians between two vectors, `None` if either is zero.
///
/// Uses `atan2(|a_perp|, a . b_hat)` which stays accurate for nearly
/// parallel vectors where `acos` loses all precision.
pub fn angle_between(a: &[f64], b: &[f64]) -> Option<f64> {
    let nb = norm2(b);
    if nb == 0.0 || a.iter().all(|&x| x == 0.0) {
        return None;
    }
    let along = dot(a, b) / nb;
    let perp = a
        .iter()
        .zip(b)
        .map(|(x, y)| {
            let r = x - along * y / nb;
            r * r
        })
        .sum::<f64>()
        .sqrt();
    Some(perp.atan2(along))
}

/// Euclidean projection onto the ball of radius `r` centred at the origin.
pub fn project_to_ball(v: &mut [f64], r: f64) {
    let n = norm2(v);
    if n > r {
        let c = r / n;
        v.iter_mut().for_each(|x| *x *= c);
    }
}
