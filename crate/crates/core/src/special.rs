//! Riccati–Bessel functions used to match radial solutions to free waves.

/// Spherical Bessel function of the first kind, `j_l(x)`.
pub fn spherical_j(l: u32, x: f64) -> f64 {
    if x == 0.0 {
        return if l == 0 { 1.0 } else { 0.0 };
    }
    if x < l as f64 + 1.5 {
        return series_j(l, x);
    }
    let (s, c) = x.sin_cos();
    let mut j0 = s / x;
    if l == 0 {
        return j0;
    }
    let mut j1 = s / (x * x) - c / x;
    for n in 1..l {
        let j2 = (2 * n + 1) as f64 / x * j1 - j0;
        j0 = j1;
        j1 = j2;
    }
    j1
}

fn series_j(l: u32, x: f64) -> f64 {
    // x^l / (2l+1)!!
    let mut pref = 1.0;
    for n in 0..l {
        pref *= x / (2 * n + 3) as f64;
    }
    let half = -0.5 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 1..200 {
        term *= half / (n as f64 * (2 * l + 2 * n + 1) as f64);
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    pref * sum
}

/// Spherical Bessel function of the second kind, `y_l(x)` (negative near 0).
pub fn spherical_y(l: u32, x: f64) -> f64 {
    let (s, c) = x.sin_cos();
    let mut y0 = -c / x;
    if l == 0 {
        return y0;
    }
    let mut y1 = -c / (x * x) - s / x;
    for n in 1..l {
        let y2 = (2 * n + 1) as f64 / x * y1 - y0;
        y0 = y1;
        y1 = y2;
    }
    y1
}

/// `x j_l(x)`, regular at the origin.
pub fn riccati_j(l: u32, x: f64) -> f64 {
    x * spherical_j(l, x)
}

/// `x y_l(x)`; `riccati_y(0, x) = -cos x`.
pub fn riccati_y(l: u32, x: f64) -> f64 {
    x * spherical_y(l, x)
}
