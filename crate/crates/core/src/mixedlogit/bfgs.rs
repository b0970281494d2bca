//! Dense BFGS with a backtracking Armijo line search, for the small
//! parameter vectors of per-category mixed logit fits.

#[derive(Clone, Debug)]
pub struct BfgsOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes `f`, which returns `(value, gradient)`.
pub fn minimize<F>(mut f: F, x0: Vec<f64>, grad_tol: f64, max_iter: usize) -> BfgsOutcome
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let mut x = x0;
    let (mut fx, mut g) = f(&x);
    let mut h = identity(n);
    let norm = |v: &[f64]| v.iter().fold(0.0f64, |m, a| m.max(a.abs()));

    for iter in 0..max_iter {
        let gn = norm(&g);
        if gn < grad_tol {
            return BfgsOutcome { x, value: fx, grad_norm: gn, iterations: iter, converged: true };
        }
        let mut dir: Vec<f64> = (0..n).map(|i| -dot_row(&h, i, &g)).collect();
        let mut slope: f64 = dir.iter().zip(&g).map(|(d, gi)| d * gi).sum();
        if !(slope < 0.0) {
            // Not a descent direction: restart from steepest descent.
            h = identity(n);
            dir = g.iter().map(|v| -v).collect();
            slope = -g.iter().map(|v| v * v).sum::<f64>();
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + step * di).collect();
            let (ft, gt) = f(&trial);
            if ft.is_finite() && ft <= fx + 1e-4 * step * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, f_new, g_new)) = accepted else {
            return BfgsOutcome { x, value: fx, grad_norm: gn, iterations: iter, converged: false };
        };

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rel_change = (fx - f_new).abs() / fx.abs().max(1.0);
        x = x_new;
        fx = f_new;
        g = g_new;
        if sy > 1e-12 {
            update_inverse_hessian(&mut h, &s, &y, sy);
        }
        if rel_change < 1e-14 && norm(&g) < grad_tol.sqrt() {
            return BfgsOutcome { x, value: fx, grad_norm: norm(&g), iterations: iter + 1, converged: true };
        }
    }
    let gn = norm(&g);
    BfgsOutcome { x, value: fx, grad_norm: gn, iterations: max_iter, converged: gn < grad_tol }
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

fn dot_row(m: &[Vec<f64>], i: usize, v: &[f64]) -> f64 {
    m[i].iter().zip(v).map(|(a, b)| a * b).sum()
}

/// `H <- (I - rho s y') H (I - rho y s') + rho s s'`.
fn update_inverse_hessian(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| dot_row(h, i, y)).collect();
    let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
    for i in 0..n {
        for j in 0..n {
            h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_rosenbrock() {
        let out = minimize(
            |x| {
                let (a, b) = (x[0], x[1]);
                let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
                let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
                (f, g)
            },
            vec![-1.2, 1.0],
            1e-8,
            500,
        );
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-6 && (out.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn quadratic_in_few_steps() {
        let out = minimize(
            |x| {
                let f = 0.5 * (3.0 * x[0] * x[0] + x[1] * x[1]) - x[0];
                (f, vec![3.0 * x[0] - 1.0, x[1]])
            },
            vec![5.0, 5.0],
            1e-10,
            100,
        );
        assert!(out.converged && out.iterations < 20);
        assert!((out.x[0] - 1.0 / 3.0).abs() < 1e-9);
    }
}
