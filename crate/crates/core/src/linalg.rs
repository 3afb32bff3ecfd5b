//! Least squares by Householder QR with column pivoting (Businger–Golub).

/// Relative threshold on `|R_kk| / |R_00|` below which the design is treated as rank deficient.
pub(crate) const RANK_TOLERANCE: f64 = 1e-10;

/// Solves `min ‖X b − y‖` for a column-major `rows × cols` matrix.
///
/// Both `x` and `y` are overwritten. Returns `None` when the numerical rank
/// is below `cols` (including when `rows < cols`).
pub(crate) fn least_squares(
    x: &mut [f64],
    rows: usize,
    cols: usize,
    y: &mut [f64],
    rel_tol: f64,
) -> Option<Vec<f64>> {
    debug_assert_eq!(x.len(), rows * cols);
    debug_assert_eq!(y.len(), rows);
    if rows < cols || cols == 0 {
        return None;
    }
    let mut perm: Vec<usize> = (0..cols).collect();
    let mut diag = vec![0.0; cols];
    let mut lead = 0.0;

    for k in 0..cols {
        // pivot on the largest remaining column norm
        let (mut best, mut best_norm) = (k, -1.0);
        for j in k..cols {
            let col = &x[j * rows + k..(j + 1) * rows];
            let norm: f64 = col.iter().map(|v| v * v).sum();
            if norm > best_norm {
                best = j;
                best_norm = norm;
            }
        }
        if best != k {
            for i in 0..rows {
                x.swap(k * rows + i, best * rows + i);
            }
            perm.swap(k, best);
        }

        let alpha = best_norm.sqrt();
        if k == 0 {
            lead = alpha;
        }
        if alpha == 0.0 || alpha <= rel_tol * lead {
            return None;
        }

        // Householder vector v = x_k + sign(x_kk) ‖x_k‖ e_k, stored in place
        let pivot = x[k * rows + k];
        let rkk = if pivot >= 0.0 { -alpha } else { alpha };
        x[k * rows + k] = pivot - rkk;
        let vnorm2: f64 = x[k * rows + k..(k + 1) * rows].iter().map(|v| v * v).sum();

        let (head, tail) = x.split_at_mut((k + 1) * rows);
        let v = &head[k * rows + k..(k + 1) * rows];
        for j in 0..cols - k - 1 {
            let col = &mut tail[j * rows + k..(j + 1) * rows];
            let dot: f64 = v.iter().zip(col.iter()).map(|(a, b)| a * b).sum();
            let scale = 2.0 * dot / vnorm2;
            for (c, vi) in col.iter_mut().zip(v) {
                *c -= scale * vi;
            }
        }
        let target = &mut y[k..];
        let dot: f64 = v.iter().zip(target.iter()).map(|(a, b)| a * b).sum();
        let scale = 2.0 * dot / vnorm2;
        for (c, vi) in target.iter_mut().zip(v) {
            *c -= scale * vi;
        }
        diag[k] = rkk;
    }

    // back substitution on R b = (Qᵀ y)[..cols]
    let mut b = vec![0.0; cols];
    for k in (0..cols).rev() {
        let mut acc = y[k];
        for j in k + 1..cols {
            acc -= x[j * rows + k] * b[j];
        }
        b[k] = acc / diag[k];
    }
    let mut out = vec![0.0; cols];
    for (k, &p) in perm.iter().enumerate() {
        out[p] = b[k];
    }
    Some(out)
}
