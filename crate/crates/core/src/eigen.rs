//! Symmetric eigendecomposition via Householder tridiagonalization followed
//! by the implicit-shift QL iteration.
//!
//! This is the classic tred2/tql2 pair. It is deterministic, allocation-light,
//! and fast enough for the 531x531 covariance handled here. Verified against
//! an independent solver and algebraic identities in the tests.

use ndarray::Array2;

use crate::scalar::Scalar;

/// Eigenvalues (ascending) and the matching orthonormal eigenvectors as
/// matrix columns.
#[derive(Clone, Debug)]
pub struct SymEigen<T> {
    pub values: Vec<T>,
    pub vectors: Array2<T>,
}

/// Decomposes a symmetric matrix. Symmetry is assumed, not checked; feed it
/// `(A + A^T) / 2` if in doubt.
pub fn sym_eigen<T: Scalar>(a: &Array2<T>) -> SymEigen<T> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix must be square");
    let mut z = a.clone();
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    tred2(&mut z, &mut d, &mut e);
    tql2(&mut z, &mut d, &mut e);

    // Sort ascending by eigenvalue, carrying the vectors along.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).unwrap_or(std::cmp::Ordering::Equal));
    let values: Vec<T> = order.iter().map(|&i| d[i]).collect();
    let mut vectors = Array2::zeros((n, n));
    for (new_col, &old_col) in order.iter().enumerate() {
        for r in 0..n {
            vectors[[r, new_col]] = z[[r, old_col]];
        }
    }
    SymEigen { values, vectors }
}

/// Householder reduction of a real symmetric matrix to tridiagonal form.
/// On output `a` holds the accumulated orthogonal transform, `d` the
/// diagonal, and `e` the subdiagonal (in `e[1..]`).
fn tred2<T: Scalar>(a: &mut Array2<T>, d: &mut [T], e: &mut [T]) {
    let n = d.len();
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = T::zero();
        if l > 0 {
            let mut scale = T::zero();
            for k in 0..=l {
                scale += a[[i, k]].abs();
            }
            if scale == T::zero() {
                e[i] = a[[i, l]];
            } else {
                for k in 0..=l {
                    a[[i, k]] = a[[i, k]] / scale;
                    h += a[[i, k]] * a[[i, k]];
                }
                let f = a[[i, l]];
                let g = if f >= T::zero() { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                a[[i, l]] = f - g;
                let mut f_acc = T::zero();
                for j in 0..=l {
                    a[[j, i]] = a[[i, j]] / h;
                    let mut g_acc = T::zero();
                    for k in 0..=j {
                        g_acc += a[[j, k]] * a[[i, k]];
                    }
                    for k in j + 1..=l {
                        g_acc += a[[k, j]] * a[[i, k]];
                    }
                    e[j] = g_acc / h;
                    f_acc += e[j] * a[[i, j]];
                }
                let hh = f_acc / (h + h);
                for j in 0..=l {
                    let f = a[[i, j]];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        let delta = f * e[k] + g * a[[i, k]];
                        a[[j, k]] = a[[j, k]] - delta;
                    }
                }
            }
        } else {
            e[i] = a[[i, l]];
        }
        d[i] = h;
    }
    d[0] = T::zero();
    e[0] = T::zero();
    for i in 0..n {
        if d[i] != T::zero() {
            for j in 0..i {
                let mut g = T::zero();
                for k in 0..i {
                    g += a[[i, k]] * a[[k, j]];
                }
                for k in 0..i {
                    let delta = g * a[[k, i]];
                    a[[k, j]] = a[[k, j]] - delta;
                }
            }
        }
        d[i] = a[[i, i]];
        a[[i, i]] = T::one();
        for j in 0..i {
            a[[j, i]] = T::zero();
            a[[i, j]] = T::zero();
        }
    }
}

fn hypot<T: Scalar>(a: T, b: T) -> T {
    let (a, b) = (a.abs(), b.abs());
    let (big, small) = if a > b { (a, b) } else { (b, a) };
    if big == T::zero() {
        T::zero()
    } else {
        let r = small / big;
        big * (T::one() + r * r).sqrt()
    }
}

/// QL iteration with implicit shifts on a tridiagonal matrix, accumulating
/// eigenvectors into `z` (which must hold the tred2 transform on entry).
fn tql2<T: Scalar>(z: &mut Array2<T>, d: &mut [T], e: &mut [T]) {
    let n = d.len();
    if n <= 1 {
        return;
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = T::zero();

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= T::epsilon() * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter <= 64, "tql2 failed to converge");

            let mut g = (d[l + 1] - d[l]) / (T::c(2.0) * e[l]);
            let mut r = hypot(g, T::one());
            let sign_r = if g >= T::zero() { r.abs() } else { -r.abs() };
            g = d[m] - d[l] + e[l] / (g + sign_r);
            let mut s = T::one();
            let mut c = T::one();
            let mut p = T::zero();
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = hypot(f, g);
                e[i + 1] = r;
                if r == T::zero() {
                    d[i + 1] -= p;
                    e[m] = T::zero();
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + T::c(2.0) * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    f = z[[k, i + 1]];
                    z[[k, i + 1]] = s * z[[k, i]] + c * f;
                    z[[k, i]] = c * z[[k, i]] - s * f;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = T::zero();
        }
    }
}
