//! Grid search oracle for I_max on two qubits.
//!
//! Both product factors range over a cubic grid of Bloch vectors restricted to
//! the unit ball. Data processing gives D_max(ρ‖σ_L⊗σ_R) ≥ D_max(ρ_L‖σ_L), and
//! likewise on the right, so candidates are visited in order of these
//! single-side bounds and the scan stops as soon as they exceed the incumbent.
//! A pair only needs its λ_max when t·(I⊗σ_R) − B is positive definite for the
//! incumbent t, which a 4×4 Cholesky decides. Grids with resolutions 11, 21, 41
//! are nested, so the coarser grids are scanned first to seed the incumbent and
//! refining never increases the value.

use super::{product_dmax, MeasureResult, Method};
use crate::error::{Error, Result};
use crate::linalg::{c64, BipartiteCut, ComplexMatrix, DensityOperator, Keep, SubState};

type M2 = [[c64; 2]; 2];
type M4 = [[c64; 4]; 4];

const Z: c64 = c64 { re: 0.0, im: 0.0 };

struct Point {
    r: [f64; 3],
    sigma: M2,
    interior: bool,
    /// σ^{-1/2} on the support (pseudo-inverse on the boundary)
    s: M2,
    /// projector onto supp σ
    p: M2,
    /// single-side bound λ_max(S ρ_side S), infinite on a support leak
    bound: f64,
}

fn bloch(r: [f64; 3]) -> M2 {
    [
        [c64::new((1.0 + r[2]) / 2.0, 0.0), c64::new(r[0] / 2.0, -r[1] / 2.0)],
        [c64::new(r[0] / 2.0, r[1] / 2.0), c64::new((1.0 - r[2]) / 2.0, 0.0)],
    ]
}

/// f(σ) for f applied to the eigenvalues (1 ± |r|)/2, with f(0) = 0.
fn spectral(r: [f64; 3], f: impl Fn(f64) -> f64) -> M2 {
    let n = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
    let lp = (1.0 + n) / 2.0;
    let lm = (1.0 - n) / 2.0;
    let fp = if lp > 1e-12 { f(lp) } else { 0.0 };
    let fm = if lm > 1e-12 { f(lm) } else { 0.0 };
    let u = if n > 0.0 { [r[0] / n, r[1] / n, r[2] / n] } else { [0.0, 0.0, 1.0] };
    // f(σ) = (fp + fm)/2 I + (fp − fm)/2 u·σ⃗
    let a = (fp + fm) / 2.0;
    let b = if n > 0.0 { (fp - fm) / 2.0 } else { 0.0 };
    [
        [c64::new(a + b * u[2], 0.0), c64::new(b * u[0], -b * u[1])],
        [c64::new(b * u[0], b * u[1]), c64::new(a - b * u[2], 0.0)],
    ]
}

fn sandwich2(s: &M2, m: &M2) -> M2 {
    let mut out = [[Z; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let mut acc = Z;
            for k in 0..2 {
                for l in 0..2 {
                    acc += s[i][k] * m[k][l] * s[l][j];
                }
            }
            out[i][j] = acc;
        }
    }
    out
}

fn lmax2(m: &M2) -> f64 {
    let a = m[0][0].re;
    let d = m[1][1].re;
    let b = m[0][1].norm();
    (a + d) / 2.0 + (((a - d) / 2.0).powi(2) + b * b).sqrt()
}

fn trace2(m: &M2) -> f64 {
    m[0][0].re + m[1][1].re
}

/// Largest root of the characteristic polynomial of a PSD 4×4 matrix, by
/// Newton iteration from the Frobenius norm, which lies above it.
fn lmax4(x: &M4) -> f64 {
    let mut x2 = [[Z; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            let mut acc = Z;
            for k in 0..4 {
                acc += x[i][k] * x[k][j];
            }
            x2[i][j] = acc;
        }
    }
    let mut p1 = 0.0;
    let mut p2 = 0.0;
    let mut p3 = 0.0;
    let mut p4 = 0.0;
    for i in 0..4 {
        p1 += x[i][i].re;
        p2 += x2[i][i].re;
        for j in 0..4 {
            p3 += (x2[i][j] * x[j][i]).re;
            p4 += x2[i][j].norm_sqr();
        }
    }
    let e1 = p1;
    let e2 = (e1 * p1 - p2) / 2.0;
    let e3 = (e2 * p1 - e1 * p2 + p3) / 3.0;
    let e4 = (e3 * p1 - e2 * p2 + e1 * p3 - p4) / 4.0;
    let mut l = p2.max(0.0).sqrt();
    for _ in 0..200 {
        let f = (((l - e1) * l + e2) * l - e3) * l + e4;
        let df = ((4.0 * l - 3.0 * e1) * l + 2.0 * e2) * l - e3;
        if df <= 0.0 {
            break;
        }
        let next = l - f / df;
        if !(next < l) || l - next <= 1e-15 * l {
            l = next.min(l);
            break;
        }
        l = next;
    }
    l
}

fn to2(m: &ComplexMatrix) -> M2 {
    [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]]
}

fn grid(res: usize, marginal: &M2) -> Vec<Point> {
    let coord = |i: usize| -1.0 + (2 * i) as f64 / (res - 1) as f64;
    let mut out = Vec::new();
    for i in 0..res {
        for j in 0..res {
            for k in 0..res {
                let r = [coord(i), coord(j), coord(k)];
                let n2 = r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
                if n2 > 1.0 + 1e-12 {
                    continue;
                }
                let s = spectral(r, |x| x.powf(-0.5));
                let p = spectral(r, |_| 1.0);
                let inside = trace2(&sandwich2(&p, marginal));
                let bound = if trace2(marginal) - inside > crate::linalg::SUPPORT_LEAK_TOL {
                    f64::INFINITY
                } else {
                    lmax2(&sandwich2(&s, marginal))
                };
                let interior = 1.0 - n2.sqrt() > 1e-12;
                out.push(Point { r, sigma: bloch(r), interior, s, p, bound });
            }
        }
    }
    out.sort_by(|a, b| a.bound.total_cmp(&b.bound));
    out
}

/// Whether a Hermitian 4×4 matrix is positive definite (Cholesky).
fn positive_definite(m: &M4) -> bool {
    let mut l = [[Z; 4]; 4];
    for j in 0..4 {
        let mut d = m[j][j].re;
        for k in 0..j {
            d -= l[j][k].norm_sqr();
        }
        if !(d > 0.0) {
            return false;
        }
        let d = d.sqrt();
        l[j][j] = c64::new(d, 0.0);
        for i in j + 1..4 {
            let mut acc = m[i][j];
            for k in 0..j {
                acc -= l[i][k] * l[j][k].conj();
            }
            l[i][j] = acc / d;
        }
    }
    true
}

struct Scan {
    t: f64,
    left: [f64; 3],
    right: [f64; 3],
    visited: usize,
}

fn scan(rho4: &M4, total: f64, left: &[Point], right: &[Point], mut best: Scan) -> Scan {
    for pl in left {
        if pl.bound >= best.t {
            break;
        }
        // B = (S_L⊗I) ρ (S_L⊗I) and the part of ρ inside supp σ_L
        let mut b = [[Z; 4]; 4];
        let mut pb = [[Z; 4]; 4];
        for a in 0..2 {
            for c in 0..2 {
                for a2 in 0..2 {
                    for c2 in 0..2 {
                        let mut acc = Z;
                        let mut accp = Z;
                        for e in 0..2 {
                            for e2 in 0..2 {
                                let v = rho4[e * 2 + c][e2 * 2 + c2];
                                acc += pl.s[a][e] * v * pl.s[e2][a2];
                                accp += pl.p[a][e] * v * pl.p[e2][a2];
                            }
                        }
                        b[a * 2 + c][a2 * 2 + c2] = acc;
                        pb[a * 2 + c][a2 * 2 + c2] = accp;
                    }
                }
            }
        }
        for pr in right {
            if pr.bound >= best.t {
                break;
            }
            best.visited += 1;
            if pr.interior && best.t.is_finite() {
                // λ_max < t  ⟺  t·(I⊗σ_R) − B ≻ 0
                let mut m = [[Z; 4]; 4];
                for i in 0..4 {
                    for j in 0..4 {
                        let id = if i / 2 == j / 2 { pr.sigma[i % 2][j % 2] * best.t } else { Z };
                        m[i][j] = id - b[i][j];
                    }
                }
                if !positive_definite(&m) {
                    continue;
                }
            } else {
                let mut inside = 0.0;
                for a in 0..2 {
                    for c in 0..2 {
                        for e in 0..2 {
                            for e2 in 0..2 {
                                inside += (pr.p[c][e] * pb[a * 2 + e][a * 2 + e2] * pr.p[e2][c]).re;
                            }
                        }
                    }
                }
                if total - inside > crate::linalg::SUPPORT_LEAK_TOL {
                    continue;
                }
            }
            let mut x = [[Z; 4]; 4];
            for a in 0..2 {
                for c in 0..2 {
                    for a2 in 0..2 {
                        for c2 in 0..2 {
                            let mut acc = Z;
                            for e in 0..2 {
                                for e2 in 0..2 {
                                    acc += pr.s[c][e] * b[a * 2 + e][a2 * 2 + e2] * pr.s[e2][c2];
                                }
                            }
                            x[a * 2 + c][a2 * 2 + c2] = acc;
                        }
                    }
                }
            }
            let t = lmax4(&x);
            if t < best.t {
                best.t = t;
                best.left = pl.r;
                best.right = pr.r;
            }
        }
    }
    best
}

/// I_max of a two-qubit sub-state by exhaustive search over a Bloch grid.
pub fn imax_bruteforce(rho: &SubState, cut: &BipartiteCut, resolution: usize) -> Result<MeasureResult> {
    cut.check(rho.matrix())?;
    if cut.d_l != 2 || cut.d_r != 2 {
        return Err(Error::UnsupportedDimension(format!(
            "grid search needs a 2x2 cut, got {}x{}",
            cut.d_l, cut.d_r
        )));
    }
    if resolution < 3 || resolution % 2 == 0 {
        return Err(Error::contract("grid resolution must be odd and at least 3"));
    }
    let m = rho.matrix();
    let mut rho4 = [[Z; 4]; 4];
    for (i, row) in rho4.iter_mut().enumerate() {
        for (j, z) in row.iter_mut().enumerate() {
            *z = m[(i, j)];
        }
    }
    let marg_l = to2(&crate::linalg::partial_trace(m, cut, Keep::Left)?);
    let marg_r = to2(&crate::linalg::partial_trace(m, cut, Keep::Right)?);
    let total = rho.trace();

    let mut levels = vec![resolution];
    while (levels[levels.len() - 1] - 1) % 2 == 0 && (levels[levels.len() - 1] - 1) / 2 >= 4 {
        levels.push((levels[levels.len() - 1] - 1) / 2 + 1);
    }
    let mut best = Scan { t: f64::INFINITY, left: [0.0; 3], right: [0.0; 3], visited: 0 };
    for &res in levels.iter().rev() {
        best = scan(&rho4, total, &grid(res, &marg_l), &grid(res, &marg_r), best);
    }
    if !best.t.is_finite() {
        return Err(Error::NoConvergence { routine: "imax_bruteforce", iterations: best.visited });
    }
    let to_state = |r: [f64; 3]| -> Result<DensityOperator> {
        let m = bloch(r);
        DensityOperator::from_matrix(ComplexMatrix::from_rows(&[m[0].to_vec(), m[1].to_vec()])?)
    };
    let sl = to_state(best.left)?;
    let sr = to_state(best.right)?;
    let value = product_dmax(rho, &sl, &sr, cut)?;
    Ok(MeasureResult {
        value,
        witness: Some((sl, sr)),
        method: Method::Bruteforce,
        converged: true,
        iterations: best.visited,
        distance_to_center: None,
    })
}
