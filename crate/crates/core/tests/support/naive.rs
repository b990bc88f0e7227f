//! Direct per-definition enumerations, written without the crate's
//! neighbor tables or adjoint machinery.

#![allow(dead_code)]

/// Flow stored as `[y][x] = (dx, dy)`.
pub type Field = Vec<Vec<(f64, f64)>>;

pub fn field(h: usize, w: usize, data: &[f64]) -> Field {
    (0..h)
        .map(|y| (0..w).map(|x| (data[2 * (y * w + x)], data[2 * (y * w + x) + 1])).collect())
        .collect()
}

fn comp(v: (f64, f64), k: usize) -> f64 {
    if k == 0 {
        v.0
    } else {
        v.1
    }
}

pub fn so_sum(f: &Field) -> f64 {
    let h = f.len() as i64;
    let w = f[0].len() as i64;
    let at = |y: i64, x: i64| f[y as usize][x as usize];
    let mut total = 0.0;
    for y in 0..h {
        for x in 0..w {
            for (dy, dx) in [(0i64, 1i64), (1, 0)] {
                let (ay, ax, by, bx) = (y - dy, x - dx, y + dy, x + dx);
                if ay < 0 || ax < 0 || by >= h || bx >= w {
                    continue;
                }
                for k in 0..2 {
                    total += (comp(at(ay, ax), k) + comp(at(by, bx), k) - 2.0 * comp(at(y, x), k)).abs();
                }
            }
        }
    }
    total
}

pub fn tv_sum(f: &Field) -> f64 {
    let mut total = 0.0;
    for y in 0..f.len() {
        for x in 0..f[0].len() {
            for k in 0..2 {
                if x + 1 < f[0].len() {
                    total += (comp(f[y][x + 1], k) - comp(f[y][x], k)).abs();
                }
                if y + 1 < f.len() {
                    total += (comp(f[y + 1][x], k) - comp(f[y][x], k)).abs();
                }
            }
        }
    }
    total
}

/// Sum of the piecewise penalty over every anchor `p` (inside `region` when
/// given) and every in-grid 4-neighbor; also returns the number of terms.
pub fn preserve_sum(f: &Field, rv: f64, rh: f64, region: Option<&[Vec<f64>]>) -> (f64, usize) {
    let h = f.len() as i64;
    let w = f[0].len() as i64;
    let mut total = 0.0;
    let mut count = 0;
    for y in 0..h {
        for x in 0..w {
            if let Some(m) = region {
                if m[y as usize][x as usize] <= 0.5 {
                    continue;
                }
            }
            for (dy, dx) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                let (uy, ux) = (y + dy, x + dx);
                if uy < 0 || ux < 0 || uy >= h || ux >= w {
                    continue;
                }
                let p = f[y as usize][x as usize];
                let u = f[uy as usize][ux as usize];
                let (d, r) = if dy != 0 {
                    (((y as f64 + p.1) - (uy as f64 + u.1)).abs(), rv)
                } else {
                    (((x as f64 + p.0) - (ux as f64 + u.0)).abs(), rh)
                };
                total += if d > r {
                    d
                } else if d < r {
                    r - d
                } else {
                    0.0
                };
                count += 1;
            }
        }
    }
    (total, count)
}

pub fn l1_sum(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

pub fn bce_mean(pred: &[f64], target: &[f64]) -> f64 {
    let eps = 1e-7;
    let mut total = 0.0;
    for (p, t) in pred.iter().zip(target) {
        let p = p.max(eps).min(1.0 - eps);
        total -= t * p.ln() + (1.0 - t) * (1.0 - p).ln();
    }
    total / pred.len() as f64
}

/// Bilinear backward warp of one plane with zero padding outside the grid.
pub fn warp_plane(plane: &[Vec<f64>], f: &Field) -> Vec<Vec<f64>> {
    let h = plane.len() as i64;
    let w = plane[0].len() as i64;
    let get = |y: i64, x: i64| {
        if y < 0 || x < 0 || y >= h || x >= w {
            0.0
        } else {
            plane[y as usize][x as usize]
        }
    };
    (0..h)
        .map(|y| {
            (0..w)
                .map(|x| {
                    let (dx, dy) = f[y as usize][x as usize];
                    let (sx, sy) = (x as f64 + dx, y as f64 + dy);
                    let (x0, y0) = (sx.floor(), sy.floor());
                    let (tx, ty) = (sx - x0, sy - y0);
                    let (x0, y0) = (x0 as i64, y0 as i64);
                    get(y0, x0) * (1.0 - tx) * (1.0 - ty)
                        + get(y0, x0 + 1) * tx * (1.0 - ty)
                        + get(y0 + 1, x0) * (1.0 - tx) * ty
                        + get(y0 + 1, x0 + 1) * tx * ty
                })
                .collect()
        })
        .collect()
}
