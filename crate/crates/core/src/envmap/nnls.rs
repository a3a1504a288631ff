//! Lawson–Hanson active-set NNLS on the normal equations.

use nalgebra::{DMatrix, DVector};

/// Minimises `½ xᵀ M x − bᵀ x` subject to `x ≥ 0`, with `M = AᵀA` symmetric
/// positive semi-definite and `b = Aᵀy`. Equivalent to `min ‖Ax − y‖²`.
pub fn nnls(m: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = b.len();
    assert_eq!(m.shape(), (n, n), "NNLS system shape mismatch");
    let scale = m.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    let tol = 1e-12 * scale * b.amax().max(1.0);
    let mut x = DVector::<f64>::zeros(n);
    let mut passive = vec![false; n];

    let solve_passive = |passive: &[bool]| -> DVector<f64> {
        let idx: Vec<usize> = (0..n).filter(|&i| passive[i]).collect();
        let k = idx.len();
        let mut sub = DMatrix::<f64>::from_fn(k, k, |i, j| m[(idx[i], idx[j])]);
        let rhs = DVector::<f64>::from_fn(k, |i, _| b[idx[i]]);
        // Tiny ridge keeps collinear lobes solvable.
        for i in 0..k {
            sub[(i, i)] += 1e-13 * scale;
        }
        let sol = match sub.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => sub
                .pseudo_inverse(1e-14 * scale)
                .map(|p| p * &rhs)
                .unwrap_or_else(|_| DVector::zeros(k)),
        };
        let mut s = DVector::<f64>::zeros(n);
        for (i, &j) in idx.iter().enumerate() {
            s[j] = sol[i];
        }
        s
    };

    for _ in 0..3 * n + 10 {
        let w = b - m * &x;
        let candidate = (0..n)
            .filter(|&j| !passive[j])
            .max_by(|&a, &c| w[a].total_cmp(&w[c]));
        let j = match candidate {
            Some(j) if w[j] > tol => j,
            _ => break,
        };
        passive[j] = true;
        loop {
            let s = solve_passive(&passive);
            let bad: Vec<usize> = (0..n).filter(|&i| passive[i] && s[i] <= 0.0).collect();
            if bad.is_empty() {
                x = s;
                break;
            }
            let alpha = bad
                .iter()
                .map(|&i| x[i] / (x[i] - s[i]))
                .fold(f64::INFINITY, f64::min);
            x += (s - &x) * alpha;
            for i in 0..n {
                if passive[i] && x[i] <= tol.max(1e-15 * x.amax()) {
                    passive[i] = false;
                    x[i] = 0.0;
                }
            }
            if !passive.iter().any(|p| *p) {
                break;
            }
        }
    }
    x.iter_mut().for_each(|v| *v = v.max(0.0));
    x
}
