//! Offline benchmark: the best fixed output in hindsight.
//!
//! The time integral is replaced by a left-Riemann sum on `grid_k` points
//! and the coupled constraint is imposed at every grid time. The resulting
//! convex program is solved by sequential quadratic programming whose
//! subproblems go to a Mehrotra predictor-corrector interior-point method;
//! for quadratic costs and affine constraints one subproblem is exact.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::problem::LocalProblem;
use crate::scalar::Real;

pub const DEFAULT_GRID_K: usize = 2000;
pub const KKT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOptions<T: Real> {
    pub grid_k: usize,
    pub tolerance: T,
    pub max_iterations: usize,
    /// Starting point of the interior-point iteration; the box centre when
    /// absent.
    pub start: Option<DVector<T>>,
}

impl<T: Real> Default for OracleOptions<T> {
    fn default() -> Self {
        Self {
            grid_k: DEFAULT_GRID_K,
            tolerance: T::tol(KKT_TOLERANCE),
            max_iterations: 200,
            start: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OfflineSolution<T: Real> {
    /// Stacked `y*`.
    pub y_star: DVector<T>,
    /// `y*` split per agent.
    pub blocks: Vec<DVector<T>>,
    /// Max of stationarity, infeasibility and complementarity residuals of
    /// the discretised problem (objective scaled by `1/grid_k`).
    pub kkt_residual: T,
    /// `min_{k,j} -Σ_i g_ij(t_k, y*_i)`.
    pub feasibility_margin: T,
    /// `Σ_k Δt f(t_k, y*)`.
    pub objective: T,
    pub iterations: usize,
}

/// `t_k = kT/K`, `k = 0, …, K - 1`.
pub fn time_grid<T: Real>(horizon: T, grid_k: usize) -> Vec<T> {
    let k = T::from_usize_lossy(grid_k);
    (0..grid_k).map(|i| T::from_usize_lossy(i) * horizon / k).collect()
}

fn offsets<T: Real>(problems: &[LocalProblem<T>]) -> Vec<usize> {
    let mut out = Vec::with_capacity(problems.len() + 1);
    let mut acc = 0;
    out.push(0);
    for p in problems {
        acc += p.output_dim();
        out.push(acc);
    }
    out
}

fn split<T: Real>(y: &DVector<T>, off: &[usize]) -> Vec<DVector<T>> {
    off.windows(2).map(|w| y.rows(w[0], w[1] - w[0]).into_owned()).collect()
}

/// Convex QP `min ½yᵀQy + cᵀy` s.t. `Gy ≤ h`.
struct Qp<T: Real> {
    q: DMatrix<T>,
    c: DVector<T>,
    g: DMatrix<T>,
    h: DVector<T>,
}

struct QpSolution<T: Real> {
    y: DVector<T>,
    z: DVector<T>,
    iterations: usize,
}

fn max_step<T: Real>(v: &DVector<T>, dv: &DVector<T>) -> T {
    v.iter().zip(dv.iter()).fold(T::one(), |a, (&vi, &di)| if di < T::zero() { a.min(-vi / di) } else { a })
}

fn inf_norm<T: Real>(v: &DVector<T>) -> T {
    v.iter().fold(T::zero(), |a, &b| a.max(b.abs()))
}

impl<T: Real> Qp<T> {
    fn solve_newton(
        &self,
        chol: &nalgebra::Cholesky<T, nalgebra::Dyn>,
        s: &DVector<T>,
        z: &DVector<T>,
        r_d: &DVector<T>,
        r_p: &DVector<T>,
        r_c: &DVector<T>,
    ) -> (DVector<T>, DVector<T>, DVector<T>) {
        // Δz = S⁻¹(Z r_p - r_c) + W G Δy,  Δs = -r_p - G Δy.
        let t = DVector::from_fn(s.len(), |i, _| (z[i] * r_p[i] - r_c[i]) / s[i]);
        let rhs = -(r_d + self.g.tr_mul(&t));
        let dy = chol.solve(&rhs);
        let gdy = &self.g * &dy;
        let dz = DVector::from_fn(s.len(), |i, _| t[i] + z[i] / s[i] * gdy[i]);
        let ds = -(r_p + gdy);
        (dy, ds, dz)
    }

    fn solve(&self, start: &DVector<T>, tol: T, max_iter: usize) -> Result<QpSolution<T>> {
        let m = self.h.len();
        let mut y = start.clone();
        let gy = &self.g * &y;
        let mut s = DVector::from_fn(m, |i, _| (self.h[i] - gy[i]).max(T::one()));
        let mut z = DVector::from_element(m, T::one());
        let mf = T::from_usize_lossy(m);
        let target = tol * T::lit(1e-2);
        for it in 0..max_iter {
            let r_d = &self.q * &y + &self.c + self.g.tr_mul(&z);
            let r_p = &self.g * &y + &s - &self.h;
            let mu = s.dot(&z) / mf;
            if inf_norm(&r_d) <= target && inf_norm(&r_p) <= target && mu <= target * T::lit(1e-2) {
                return Ok(QpSolution { y, z, iterations: it });
            }
            let mut w_g = self.g.clone();
            for (i, mut row) in w_g.row_iter_mut().enumerate() {
                row *= z[i] / s[i];
            }
            let mut mat = &self.q + self.g.tr_mul(&w_g);
            let n = mat.nrows();
            let scale = mat.diagonal().iter().fold(T::one(), |a, &b| a.max(b.abs()));
            let chol = loop {
                match mat.clone().cholesky() {
                    Some(c) => break c,
                    None => {
                        for i in 0..n {
                            mat[(i, i)] += scale * T::lit(1e-12);
                        }
                    }
                }
            };
            let r_c = s.component_mul(&z);
            let (_, ds_a, dz_a) = self.solve_newton(&chol, &s, &z, &r_d, &r_p, &r_c);
            let ap = max_step(&s, &ds_a);
            let ad = max_step(&z, &dz_a);
            let mu_aff = (&s + &ds_a * ap).dot(&(&z + &dz_a * ad)) / mf;
            let sigma = (mu_aff / mu).powi(3).min(T::one());
            let r_c = DVector::from_fn(m, |i, _| s[i] * z[i] + ds_a[i] * dz_a[i] - sigma * mu);
            let (dy, ds, dz) = self.solve_newton(&chol, &s, &z, &r_d, &r_p, &r_c);
            let frac = T::lit(0.99);
            let ap = (max_step(&s, &ds) * frac).min(T::one());
            let ad = (max_step(&z, &dz) * frac).min(T::one());
            y += dy * ap;
            s += ds * ap;
            z += dz * ad;
            if !y.iter().chain(z.iter()).all(|v| v.is_finite_value()) {
                return Err(Error::Numerical("interior-point iterate became non-finite".into()));
            }
            if inf_norm(&z) > T::lit(1e14) {
                return Err(Error::Infeasible("dual iterates diverge; sampled constraint set is empty".into()));
            }
        }
        let r_p = &self.g * &y + &s - &self.h;
        let r_d = &self.q * &y + &self.c + self.g.tr_mul(&z);
        let res = inf_norm(&r_p).max(inf_norm(&r_d));
        if inf_norm(&r_p) > tol.sqrt() {
            return Err(Error::Infeasible(format!("primal residual stalled at {res}")));
        }
        Err(Error::NonConvergence {
            iterations: max_iter,
            residual: res.to_f64_lossy(),
        })
    }
}

/// Solves the discretised offline problem on `[0, horizon]`.
pub fn offline_optimum<T: Real>(
    problems: &[LocalProblem<T>],
    horizon: T,
    options: &OracleOptions<T>,
) -> Result<OfflineSolution<T>> {
    if problems.is_empty() {
        return Err(Error::Structure("no problems".into()));
    }
    if options.grid_k < 2 {
        return Err(Error::Config { rule: "grid_k >= 2", detail: format!("grid_k = {}", options.grid_k) });
    }
    if !(horizon > T::zero()) {
        return Err(Error::Precondition("offline optimum needs a positive horizon".into()));
    }
    let q = problems[0].constraint_dim();
    if problems.iter().any(|p| p.constraint_dim() != q) {
        return Err(Error::Structure("agents disagree on the constraint dimension".into()));
    }
    let off = offsets(problems);
    let dim = *off.last().unwrap();
    let grid = time_grid(horizon, options.grid_k);
    let kf = T::from_usize_lossy(options.grid_k);

    let lower = DVector::from_iterator(dim, problems.iter().flat_map(|p| p.output_set.lower().iter().copied()));
    let upper = DVector::from_iterator(dim, problems.iter().flat_map(|p| p.output_set.upper().iter().copied()));
    let mut y = match &options.start {
        Some(s) if s.len() != dim => return Err(Error::dim("oracle start", dim, s.len())),
        Some(s) => s.clone(),
        None => (&lower + &upper) * T::lit(0.5),
    };
    // Strictly inside the box, so the slack initialisation is sensible.
    for k in 0..dim {
        let pad = (upper[k] - lower[k]) * T::lit(1e-3);
        y[k] = y[k].max(lower[k] + pad).min(upper[k] - pad);
    }

    let m = options.grid_k * q + 2 * dim;
    let mut total_iterations = 0;
    let mut z = DVector::zeros(m);
    let mut g_mat = DMatrix::zeros(m, dim);
    let mut h_vec = DVector::zeros(m);
    for outer in 0..50 {
        let blocks = split(&y, &off);
        // Quadratic model of the averaged cost around y.
        let mut hess = DMatrix::zeros(dim, dim);
        let mut grad_avg = DVector::zeros(dim);
        for &t in &grid {
            for (i, p) in problems.iter().enumerate() {
                let (a, b) = (off[i], off[i + 1]);
                grad_avg.rows_mut(a, b - a).axpy(T::one() / kf, &p.cost.gradient(t, &blocks[i]), T::one());
                hess.view_mut((a, a), (b - a, b - a)).zip_apply(&p.cost.hessian(t, &blocks[i]), |x, v| *x += v / kf);
            }
        }
        // Linearised coupled constraints, one block of q rows per grid time.
        for (k, &t) in grid.iter().enumerate() {
            let mut rhs = DVector::zeros(q);
            for (i, p) in problems.iter().enumerate() {
                let (a, b) = (off[i], off[i + 1]);
                let (jac, g0) = match p.constraint.affine_parts(t) {
                    Some(parts) => parts,
                    None => {
                        let jac = p.constraint.jacobian(t, &blocks[i]);
                        let g0 = p.constraint.value(t, &blocks[i]) - &jac * &blocks[i];
                        (jac, g0)
                    }
                };
                g_mat.view_mut((k * q, a), (q, b - a)).copy_from(&jac);
                rhs -= g0;
            }
            h_vec.rows_mut(k * q, q).copy_from(&rhs);
        }
        let base = options.grid_k * q;
        for k in 0..dim {
            g_mat.row_mut(base + k).fill(T::zero());
            g_mat[(base + k, k)] = T::one();
            h_vec[base + k] = upper[k];
            g_mat.row_mut(base + dim + k).fill(T::zero());
            g_mat[(base + dim + k, k)] = -T::one();
            h_vec[base + dim + k] = -lower[k];
        }
        let qp = Qp {
            c: &grad_avg - &hess * &y,
            q: hess,
            g: g_mat.clone(),
            h: h_vec.clone(),
        };
        let sol = qp.solve(&y, options.tolerance, options.max_iterations)?;
        total_iterations += sol.iterations;
        let change = inf_norm(&(&sol.y - &y));
        y = sol.y;
        z = sol.z;
        if change <= options.tolerance * T::lit(1e-3) || outer > 0 && change <= options.tolerance {
            break;
        }
    }

    // Residuals of the discretised problem at the final point.
    let blocks = split(&y, &off);
    let mut grad = DVector::zeros(dim);
    let mut objective = T::zero();
    let dt = horizon / kf;
    let mut margin = T::infinity();
    let mut max_viol = T::zero();
    let mut max_comp = T::zero();
    for (k, &t) in grid.iter().enumerate() {
        let mut sum_g = DVector::zeros(q);
        for (i, p) in problems.iter().enumerate() {
            let (a, b) = (off[i], off[i + 1]);
            grad.rows_mut(a, b - a).axpy(T::one() / kf, &p.cost.gradient(t, &blocks[i]), T::one());
            objective += p.cost.value(t, &blocks[i]) * dt;
            sum_g += p.constraint.value(t, &blocks[i]);
        }
        for j in 0..q {
            margin = margin.min(-sum_g[j]);
            max_viol = max_viol.max(sum_g[j]);
            max_comp = max_comp.max((z[k * q + j] * sum_g[j]).abs());
        }
    }
    // Constraint Jacobian at y* for stationarity.
    for (k, &t) in grid.iter().enumerate() {
        for (i, p) in problems.iter().enumerate() {
            let (a, b) = (off[i], off[i + 1]);
            let jac = p.constraint.jacobian(t, &blocks[i]);
            g_mat.view_mut((k * q, a), (q, b - a)).copy_from(&jac);
        }
    }
    let base = options.grid_k * q;
    for k in 0..dim {
        max_viol = max_viol.max(y[k] - upper[k]).max(lower[k] - y[k]);
        max_comp = max_comp
            .max((z[base + k] * (upper[k] - y[k])).abs())
            .max((z[base + dim + k] * (y[k] - lower[k])).abs());
    }
    let stationarity = inf_norm(&(grad + g_mat.tr_mul(&z)));
    let kkt_residual = stationarity.max(max_viol).max(max_comp);
    if kkt_residual > options.tolerance {
        return Err(Error::NonConvergence {
            iterations: total_iterations,
            residual: kkt_residual.to_f64_lossy(),
        });
    }
    Ok(OfflineSolution {
        blocks,
        y_star: y,
        kkt_residual,
        feasibility_margin: margin,
        objective,
        iterations: total_iterations,
    })
}

/// Memoised oracle results keyed by a caller-chosen scenario key, the
/// horizon and the grid size.
#[derive(Debug, Default, Clone)]
pub struct OracleCache<T: Real> {
    entries: Arc<Mutex<HashMap<(String, u64, usize), OfflineSolution<T>>>>,
}

impl<T: Real> OracleCache<T> {
    pub fn new() -> Self {
        Self {
            entries: Arc::new(Mutex::new(HashMap::new())),
        }
    }

    pub fn get_or_solve(
        &self,
        key: &str,
        problems: &[LocalProblem<T>],
        horizon: T,
        options: &OracleOptions<T>,
    ) -> Result<OfflineSolution<T>> {
        let k = (key.to_owned(), horizon.to_f64_lossy().to_bits(), options.grid_k);
        if let Some(hit) = self.entries.lock().expect("oracle cache poisoned").get(&k) {
            return Ok(hit.clone());
        }
        let sol = offline_optimum(problems, horizon, options)?;
        self.entries.lock().expect("oracle cache poisoned").insert(k, sol.clone());
        Ok(sol)
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("oracle cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
