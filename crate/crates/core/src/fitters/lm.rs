//! Damped least squares with a finite-difference Jacobian.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Relative parameter-step tolerance.
    pub xtol: f64,
    /// Tolerance on the scaled gradient used to decide convergence.
    pub gtol: f64,
    pub lambda0: f64,
    /// Absolute finite-difference steps; relative steps are used when absent.
    pub steps: Option<Vec<f64>>,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            xtol: 1e-8,
            gtol: 1e-6,
            lambda0: 1e-3,
            steps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Sum of squared residuals after each accepted step, starting with the initial cost.
    pub cost_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub gradient: f64,
}

impl LmOutcome {
    pub fn cost(&self) -> f64 {
        *self.cost_history.last().unwrap_or(&f64::NAN)
    }
}

fn cost(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn jacobian<F>(f: &F, p: &[f64], m: usize, steps: Option<&[f64]>) -> DMatrix<f64>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = p.len();
    let mut jac = DMatrix::zeros(m, n);
    let mut plus = vec![0.0; m];
    let mut minus = vec![0.0; m];
    let mut q = p.to_vec();
    for j in 0..n {
        let h = match steps {
            Some(st) => st[j],
            None => (f64::EPSILON.cbrt() * p[j].abs()).max(1e-10),
        };
        q[j] = p[j] + h;
        f(&q, &mut plus);
        q[j] = p[j] - h;
        f(&q, &mut minus);
        q[j] = p[j];
        for i in 0..m {
            jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    jac
}

/// Minimize Σ rᵢ(p)² where `residuals(p, r)` fills `r` of length `m`.
pub fn levenberg_marquardt<F>(residuals: F, m: usize, p0: &[f64], opts: &LmOptions) -> LmOutcome
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = p0.len();
    let mut p = p0.to_vec();
    let mut r = vec![0.0; m];
    residuals(&p, &mut r);
    let mut c = cost(&r);
    // Zero-residual problems stop once the residual norm has dropped 10⁸-fold.
    let data_floor = {
        let scale = r.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(1e-300);
        (scale * 1e-14).powi(2).max(1e-16 * c)
    };
    let mut history = vec![c];
    let mut lambda = opts.lambda0;
    let mut iterations = 0;
    let mut jac = jacobian(&residuals, &p, m, opts.steps.as_deref());
    let mut trial = vec![0.0; m];
    let mut small_step = false;

    while iterations < opts.max_iter && c > data_floor && !small_step {
        iterations += 1;
        let rv = DVector::from_column_slice(&r);
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &rv;
        let max_diag = (0..n).map(|j| jtj[(j, j)]).fold(0.0_f64, f64::max);
        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for j in 0..n {
                a[(j, j)] += lambda * jtj[(j, j)].max(1e-12 * max_diag).max(1e-300);
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let delta = chol.solve(&(-&g));
            let q: Vec<f64> = p.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
            residuals(&q, &mut trial);
            let ct = cost(&trial);
            if ct.is_finite() && ct < c {
                small_step = delta
                    .iter()
                    .zip(&p)
                    .all(|(d, v)| d.abs() <= opts.xtol * (v.abs() + opts.xtol));
                p = q;
                std::mem::swap(&mut r, &mut trial);
                c = ct;
                history.push(c);
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            break;
        }
        jac = jacobian(&residuals, &p, m, opts.steps.as_deref());
    }

    let gradient = scaled_gradient(&jac, &r);
    let converged = c <= data_floor || gradient <= opts.gtol;
    let stderr = standard_errors(&jac, c, m, n);
    LmOutcome {
        params: p,
        stderr,
        cost_history: history,
        iterations,
        converged,
        gradient,
    }
}

/// max_j |J_jᵀ r| / (‖J_j‖ ‖r‖): cosine between the residual and each column.
fn scaled_gradient(jac: &DMatrix<f64>, r: &[f64]) -> f64 {
    let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    if rn == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0_f64;
    for j in 0..jac.ncols() {
        let col = jac.column(j);
        let cn = col.norm();
        if cn == 0.0 {
            continue;
        }
        let dot: f64 = col.iter().zip(r).map(|(a, b)| a * b).sum();
        worst = worst.max(dot.abs() / (cn * rn));
    }
    worst
}

fn standard_errors(jac: &DMatrix<f64>, c: f64, m: usize, n: usize) -> Vec<f64> {
    if m <= n {
        return vec![f64::NAN; n];
    }
    let jtj = jac.transpose() * jac;
    let s2 = c / (m - n) as f64;
    match jtj.try_inverse() {
        Some(inv) => (0..n).map(|j| (inv[(j, j)] * s2).max(0.0).sqrt()).collect(),
        None => vec![f64::NAN; n],
    }
}
