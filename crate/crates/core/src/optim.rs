//! Small dense optimizers: a primal active-set solver for convex quadratic
//! programs with linear inequality constraints, and BFGS with
//! finite-difference gradients.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Solution of a quadratic program.
#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// Indices of the constraints active at the solution.
    pub active: Vec<usize>,
    pub iterations: usize,
}

/// Minimize `x' H x / 2 + g' x` subject to `A x >= b`, starting from the
/// feasible point `x0`. `H` must be positive definite.
pub fn solve_qp(h: &DMatrix<f64>, g: &DVector<f64>, a: &DMatrix<f64>, b: &DVector<f64>, x0: &DVector<f64>) -> Result<QpSolution> {
    let n = h.nrows();
    let mc = a.nrows();
    let scale = 1.0 + b.amax() + x0.amax();
    let feas_tol = 1e-10 * scale;
    let mut x = x0.clone();
    let residual = |x: &DVector<f64>, i: usize| a.row(i).dot(&x.transpose()) - b[i];
    if (0..mc).any(|i| residual(&x, i) < -feas_tol) {
        return Err(Error::InvalidInput("quadratic program started from an infeasible point".into()));
    }
    let mut working: Vec<usize> = (0..mc).filter(|&i| residual(&x, i) <= feas_tol).collect();
    let max_iter = 50 * (n + mc + 1);
    for it in 0..max_iter {
        let k = working.len();
        let mut kkt = DMatrix::zeros(n + k, n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(h);
        for (r, &i) in working.iter().enumerate() {
            for c in 0..n {
                kkt[(n + r, c)] = a[(i, c)];
                kkt[(c, n + r)] = -a[(i, c)];
            }
        }
        let mut rhs = DVector::zeros(n + k);
        rhs.rows_mut(0, n).copy_from(&(-(h * &x + g)));
        let sol = kkt
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Numerical("singular KKT system in quadratic program".into()))?;
        let p = sol.rows(0, n).into_owned();
        if p.amax() <= 1e-13 * (1.0 + x.amax()) {
            let lambda = sol.rows(n, k);
            let (mut worst, mut worst_val) = (None, -1e-12 * (1.0 + g.amax()));
            for (r, &l) in lambda.iter().enumerate() {
                if l < worst_val {
                    worst_val = l;
                    worst = Some(r);
                }
            }
            match worst {
                None => return Ok(QpSolution { x, active: working, iterations: it }),
                Some(r) => {
                    working.remove(r);
                }
            }
            continue;
        }
        let mut step = 1.0;
        let mut blocking = None;
        for i in 0..mc {
            if working.contains(&i) {
                continue;
            }
            let ap = a.row(i).dot(&p.transpose());
            if ap < 0.0 {
                let t = (-residual(&x, i) / ap).max(0.0);
                if t < step {
                    step = t;
                    blocking = Some(i);
                }
            }
        }
        x += &p * step;
        if let Some(i) = blocking {
            working.push(i);
        }
    }
    Err(Error::Numerical("quadratic program did not converge".into()))
}

/// Options for [`minimize_bfgs`].
#[derive(Debug, Clone)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Finite-difference step in the (unconstrained) parameter space.
    pub fd_step: f64,
    /// Largest allowed change of any coordinate in one step.
    pub max_step: f64,
    /// Stop when the objective changes by less than this relative amount.
    pub f_tol: f64,
    pub grad_tol: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self { max_iter: 100, fd_step: 1e-5, max_step: 2.0, f_tol: 1e-10, grad_tol: 1e-6 }
    }
}

#[derive(Debug, Clone)]
pub struct BfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    /// Whether a convergence criterion was met (rather than the iteration cap).
    pub converged: bool,
}

/// Central-difference gradient, falling back to one-sided differences where
/// an evaluation is not finite.
pub fn fd_gradient<F: FnMut(&[f64]) -> f64>(f: &mut F, x: &[f64], fx: f64, step: f64, evals: &mut usize) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + step;
        let fp = f(&probe);
        probe[i] = x[i] - step;
        let fm = f(&probe);
        probe[i] = x[i];
        *evals += 2;
        g[i] = match (fp.is_finite(), fm.is_finite()) {
            (true, true) => (fp - fm) / (2.0 * step),
            (true, false) => (fp - fx) / step,
            (false, true) => (fx - fm) / step,
            (false, false) => 0.0,
        };
    }
    g
}

/// Minimize `f` over the coordinates where `free` is true, keeping the others
/// at their values in `x0`. Non-finite objective values are treated as
/// infeasible and rejected by the line search. The result never has a larger
/// objective than `x0`.
pub fn minimize_bfgs<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], free: &[bool], opts: &BfgsOptions) -> BfgsResult {
    let idx: Vec<usize> = (0..x0.len()).filter(|&i| free[i]).collect();
    let d = idx.len();
    let mut full = x0.to_vec();
    let mut evaluations = 0usize;
    let mut sub = |z: &[f64], evals: &mut usize| {
        for (k, &i) in idx.iter().enumerate() {
            full[i] = z[k];
        }
        *evals += 1;
        f(&full)
    };
    let mut x: Vec<f64> = idx.iter().map(|&i| x0[i]).collect();
    let mut fx = sub(&x, &mut evaluations);
    if d == 0 || !fx.is_finite() {
        return BfgsResult { x: x0.to_vec(), f: fx, iterations: 0, evaluations, converged: d == 0 };
    }
    let grad_of = |sub: &mut dyn FnMut(&[f64], &mut usize) -> f64, x: &[f64], fx: f64, evals: &mut usize| {
        let mut inner = |z: &[f64]| sub(z, &mut 0);
        fd_gradient(&mut inner, x, fx, opts.fd_step, evals)
    };
    let mut g = DVector::from_vec(grad_of(&mut sub, &x, fx, &mut evaluations));
    let mut hinv = DMatrix::<f64>::identity(d, d);
    let mut first = true;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        if g.amax() <= opts.grad_tol {
            converged = true;
            break;
        }
        let mut p = -(&hinv * &g);
        let mut slope = g.dot(&p);
        if slope >= 0.0 || slope.is_nan() {
            hinv = DMatrix::identity(d, d);
            p = -g.clone();
            slope = g.dot(&p);
        }
        let pmax = p.amax();
        if pmax > opts.max_step {
            p *= opts.max_step / pmax;
            slope = g.dot(&p);
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = x.iter().zip(p.iter()).map(|(xi, pi)| xi + alpha * pi).collect();
            let ft = sub(&trial, &mut evaluations);
            if ft.is_finite() && ft <= fx + 1e-4 * alpha * slope {
                accepted = Some((trial, ft));
                break;
            }
            alpha *= 0.5;
        }
        let Some((xn, fnew)) = accepted else {
            converged = true;
            break;
        };
        let gn = DVector::from_vec(grad_of(&mut sub, &xn, fnew, &mut evaluations));
        let s = DVector::from_iterator(d, xn.iter().zip(&x).map(|(a, b)| a - b));
        let y = &gn - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if first {
                hinv *= sy / y.dot(&y);
                first = false;
            }
            let rho = 1.0 / sy;
            let i = DMatrix::<f64>::identity(d, d);
            let left = &i - &s * y.transpose() * rho;
            let right = &i - &y * s.transpose() * rho;
            hinv = &left * &hinv * &right + &s * s.transpose() * rho;
        }
        let change = (fx - fnew).abs();
        x = xn;
        g = gn;
        let done = change <= opts.f_tol * (1.0 + fnew.abs());
        fx = fnew;
        if done {
            converged = true;
            break;
        }
    }
    let mut out = x0.to_vec();
    for (k, &i) in idx.iter().enumerate() {
        out[i] = x[k];
    }
    BfgsResult { x: out, f: fx, iterations, evaluations, converged }
}

/// Golden-section minimization of a unimodal function on `[lo, hi]`.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - r * (hi - lo);
    let mut d = lo + r * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while (hi - lo).abs() > tol * (c.abs() + d.abs()).max(f64::MIN_POSITIVE) {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - r * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + r * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}
