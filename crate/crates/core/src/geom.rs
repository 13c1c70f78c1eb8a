//! Small fixed-size vector and triangle helpers used throughout the crate.

pub type Vec3 = [f64; 3];

pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn normalize(a: Vec3) -> Option<Vec3> {
    let n = norm(a);
    if n > 0.0 && n.is_finite() {
        Some(scale(a, 1.0 / n))
    } else {
        None
    }
}

pub fn dist(a: Vec3, b: Vec3) -> f64 {
    norm(sub(a, b))
}

/// Unsigned area of the triangle (a, b, c).
pub fn triangle_area(a: Vec3, b: Vec3, c: Vec3) -> f64 {
    0.5 * norm(cross(sub(b, a), sub(c, a)))
}

/// Cotangent of the angle at `apex` in the triangle (apex, a, b), computed
/// from dot and cross products so near-degenerate angles stay finite in the
/// same way their sine and cosine do.
pub fn cotangent(apex: Vec3, a: Vec3, b: Vec3) -> f64 {
    let u = sub(a, apex);
    let v = sub(b, apex);
    dot(u, v) / norm(cross(u, v))
}

/// Tangent of half the angle at `apex` in the triangle (apex, a, b), using
/// the identity tan(g/2) = |u x v| / (|u||v| + u.v), which is stable for
/// small angles.
pub fn tan_half_angle(apex: Vec3, a: Vec3, b: Vec3) -> f64 {
    let u = sub(a, apex);
    let v = sub(b, apex);
    norm(cross(u, v)) / (norm(u) * norm(v) + dot(u, v))
}

/// Signed volume contribution of the triangle (a, b, c) with respect to the
/// origin: det[a b c] / 6.
pub fn signed_volume(a: Vec3, b: Vec3, c: Vec3) -> f64 {
    dot(a, cross(b, c)) / 6.0
}

/// Applies a 3x3 rotation matrix (rows) to a vector.
pub fn rotate(r: &[[f64; 3]; 3], v: Vec3) -> Vec3 {
    [dot(r[0], v), dot(r[1], v), dot(r[2], v)]
}

/// Solves a dense 3x3 system with partial pivoting. Returns `None` when the
/// best pivot falls below `pivot_tol` in magnitude.
pub fn solve3(a: &[[f64; 3]; 3], b: Vec3, pivot_tol: f64) -> Option<Vec3> {
    let mut m = [
        [a[0][0], a[0][1], a[0][2], b[0]],
        [a[1][0], a[1][1], a[1][2], b[1]],
        [a[2][0], a[2][1], a[2][2], b[2]],
    ];
    for col in 0..3 {
        let mut piv = col;
        for row in col + 1..3 {
            if m[row][col].abs() > m[piv][col].abs() {
                piv = row;
            }
        }
        if m[piv][col].abs() < pivot_tol {
            return None;
        }
        m.swap(col, piv);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..4 {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    let mut x = [0.0; 3];
    for col in (0..3).rev() {
        let mut s = m[col][3];
        for k in col + 1..3 {
            s -= m[col][k] * x[k];
        }
        x[col] = s / m[col][col];
    }
    Some(x)
}
