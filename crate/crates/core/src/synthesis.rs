//! Plant models, regulator equations, stabilising gains and the Lyapunov
//! certificate used by the closed-form performance bounds.

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};
use crate::linalg::{
    self, block_diag, controllability_matrix, numerical_rank, spectral_abscissa, spectral_norm,
    solve_lyapunov,
};
use crate::scalar::Real;

/// Relative singular-value cutoff for numerical rank decisions.
pub const RANK_TOLERANCE: f64 = 1e-8;
/// Maximum admissible Frobenius residual of each regulator equation.
pub const REGULATOR_TOLERANCE: f64 = 1e-10;
/// Spectral abscissa below which a matrix is declared Hurwitz.
pub const HURWITZ_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_STABILITY_MARGIN: f64 = 0.5;

const NEWTON_KLEINMAN_MAX_ITERS: usize = 100;

/// One agent's state-space model `ẋ = A x + B u`, `y = C x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiModel<T: Real> {
    pub a: DMatrix<T>,
    pub b: DMatrix<T>,
    pub c: DMatrix<T>,
}

impl<T: Real> LtiModel<T> {
    pub fn new(a: DMatrix<T>, b: DMatrix<T>, c: DMatrix<T>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::dim("A must be square", n, a.ncols()));
        }
        if b.nrows() != n {
            return Err(Error::dim("B rows", n, b.nrows()));
        }
        if c.ncols() != n {
            return Err(Error::dim("C columns", n, c.ncols()));
        }
        if n == 0 || b.ncols() == 0 || c.nrows() == 0 {
            return Err(Error::Structure("empty model dimensions".into()));
        }
        Ok(Self { a, b, c })
    }

    /// `A = 0`, `B = C = I` of dimension `dim`.
    pub fn single_integrator(dim: usize) -> Self {
        Self {
            a: DMatrix::zeros(dim, dim),
            b: DMatrix::identity(dim, dim),
            c: DMatrix::identity(dim, dim),
        }
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    pub fn m(&self) -> usize {
        self.b.ncols()
    }
    pub fn p(&self) -> usize {
        self.c.nrows()
    }

    fn check_dims(&self) -> Result<()> {
        Self::new(self.a.clone(), self.b.clone(), self.c.clone()).map(|_| ())
    }

    pub fn is_controllable(&self) -> bool {
        let ctrb = controllability_matrix(&self.a, &self.b);
        numerical_rank(&ctrb, T::lit(RANK_TOLERANCE)) == self.n()
    }

    /// PBH test: every eigenvalue with real part `≥ 0` is observable.
    pub fn is_detectable(&self) -> bool {
        pbh_stabilizable(&self.a.transpose(), &self.c.transpose(), T::zero())
    }

    /// The dual pair `(Aᵀ, Cᵀ, Bᵀ)`.
    pub fn dual(&self) -> Self {
        Self {
            a: self.a.transpose(),
            b: self.c.transpose(),
            c: self.b.transpose(),
        }
    }
}

/// PBH stabilizability of `(a, b)` with respect to the half-plane
/// `Re λ > -margin`.
fn pbh_stabilizable<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>, margin: T) -> bool {
    let n = a.nrows();
    let m = b.ncols();
    for lambda in linalg::eigenvalues(a) {
        if lambda.re <= -margin - T::lit(HURWITZ_TOLERANCE) {
            continue;
        }
        let mut pbh = DMatrix::<Complex<T>>::zeros(n, n + m);
        for i in 0..n {
            for j in 0..n {
                let mut v = Complex::new(-a[(i, j)], T::zero());
                if i == j {
                    v += lambda;
                }
                pbh[(i, j)] = v;
            }
            for j in 0..m {
                pbh[(i, n + j)] = Complex::new(b[(i, j)], T::zero());
            }
        }
        let sv = pbh.svd(false, false).singular_values;
        let smax = sv.iter().copied().fold(T::zero(), |x, y| x.max(y));
        let rank = sv
            .iter()
            .filter(|&&s| s > T::lit(RANK_TOLERANCE) * smax)
            .count();
        if rank < n {
            return false;
        }
    }
    true
}

/// Feed-forward matrices satisfying `BΓ = Ψ`, `BΥ = AΨ`, `CΨ = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegulatorSolution<T: Real> {
    pub gamma: DMatrix<T>,
    pub psi: DMatrix<T>,
    pub upsilon: DMatrix<T>,
}

impl<T: Real> RegulatorSolution<T> {
    /// Frobenius residuals of the three equations.
    pub fn residuals(&self, model: &LtiModel<T>) -> [T; 3] {
        let p = model.p();
        [
            (&model.b * &self.gamma - &self.psi).norm(),
            (&model.b * &self.upsilon - &model.a * &self.psi).norm(),
            (&model.c * &self.psi - DMatrix::identity(p, p)).norm(),
        ]
    }
}

/// Full gain set for one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSet<T: Real> {
    pub k: DMatrix<T>,
    pub h: DMatrix<T>,
    pub gamma: DMatrix<T>,
    pub psi: DMatrix<T>,
    pub upsilon: DMatrix<T>,
}

impl<T: Real> GainSet<T> {
    /// Synthesises `K`, `H` with the given margin and solves the regulator
    /// equations.
    pub fn synthesize(model: &LtiModel<T>, stability_margin: T) -> Result<Self> {
        let reg = solve_regulator_equations(model)?;
        let k = synthesize_state_feedback(model, stability_margin)?;
        let h = synthesize_observer_gain(model, stability_margin)?;
        Ok(Self {
            k,
            h,
            gamma: reg.gamma,
            psi: reg.psi,
            upsilon: reg.upsilon,
        })
    }

    /// Checks the Hurwitz and residual invariants against `model`.
    pub fn verify(&self, model: &LtiModel<T>) -> Result<()> {
        let reg = RegulatorSolution {
            gamma: self.gamma.clone(),
            psi: self.psi.clone(),
            upsilon: self.upsilon.clone(),
        };
        let worst = reg
            .residuals(model)
            .into_iter()
            .fold(T::zero(), |a, b| a.max(b));
        if worst > T::tol(REGULATOR_TOLERANCE) {
            return Err(Error::RegulatorInconsistent {
                residual: worst.to_f64_lossy(),
            });
        }
        if !is_hurwitz(&(&model.a - &model.b * &self.k)) {
            return Err(Error::Synthesis("A - BK is not Hurwitz".into()));
        }
        if !is_hurwitz(&(&model.a - &self.h * &model.c)) {
            return Err(Error::Synthesis("A - HC is not Hurwitz".into()));
        }
        Ok(())
    }
}

/// Tests `rank [CB, 0; -AB, B] = n + p`.
pub fn check_rank_condition<T: Real>(model: &LtiModel<T>) -> Result<bool> {
    model.check_dims()?;
    let (n, m, p) = (model.n(), model.m(), model.p());
    let mut stacked = DMatrix::<T>::zeros(p + n, 2 * m);
    let cb = &model.c * &model.b;
    let ab = &model.a * &model.b;
    stacked.view_mut((0, 0), (p, m)).copy_from(&cb);
    stacked.view_mut((p, 0), (n, m)).copy_from(&(-ab));
    stacked.view_mut((p, m), (n, m)).copy_from(&model.b);
    Ok(numerical_rank(&stacked, T::lit(RANK_TOLERANCE)) == n + p)
}

/// Solves the regulator equations as one stacked linear system in the
/// unknown entries of `(Γ, Ψ, Υ)`.
///
/// Square nonsingular systems use an LU factorisation; everything else falls
/// back to the minimum-norm least-squares solution. A residual above
/// [`REGULATOR_TOLERANCE`] is reported as inconsistency.
pub fn solve_regulator_equations<T: Real>(model: &LtiModel<T>) -> Result<RegulatorSolution<T>> {
    model.check_dims()?;
    let (n, m, p) = (model.n(), model.m(), model.p());
    let eye_p = DMatrix::<T>::identity(p, p);
    let eye_np = DMatrix::<T>::identity(n * p, n * p);
    let kb = linalg::kron(&eye_p, &model.b);
    let ka = linalg::kron(&eye_p, &model.a);
    let kc = linalg::kron(&eye_p, &model.c);

    // Unknown layout: [vec Γ (m·p), vec Ψ (n·p), vec Υ (m·p)].
    let (gm, ps, up) = (m * p, n * p, m * p);
    let rows = 2 * n * p + p * p;
    let cols = gm + ps + up;
    let mut sys = DMatrix::<T>::zeros(rows, cols);
    sys.view_mut((0, 0), (n * p, gm)).copy_from(&kb);
    sys.view_mut((0, gm), (n * p, ps)).copy_from(&(-&eye_np));
    sys.view_mut((n * p, gm), (n * p, ps)).copy_from(&(-ka));
    sys.view_mut((n * p, gm + ps), (n * p, up)).copy_from(&kb);
    sys.view_mut((2 * n * p, gm), (p * p, ps)).copy_from(&kc);
    let mut rhs = nalgebra::DVector::<T>::zeros(rows);
    rhs.rows_mut(2 * n * p, p * p)
        .copy_from(&linalg::vectorize(&eye_p));

    let mut solution = None;
    if rows == cols {
        solution = sys.clone().lu().solve(&rhs);
    }
    let solution = match solution {
        Some(s) => s,
        None => {
            let svd = sys.clone().svd(true, true);
            let smax = svd
                .singular_values
                .iter()
                .copied()
                .fold(T::zero(), |a, b| a.max(b));
            svd.solve(&rhs, T::lit(RANK_TOLERANCE) * smax)
                .map_err(|e| Error::Numerical(format!("regulator least squares: {e}")))?
        }
    };

    let gamma = linalg::unvectorize(&solution.rows(0, gm).into_owned(), m, p);
    let psi = linalg::unvectorize(&solution.rows(gm, ps).into_owned(), n, p);
    let upsilon = linalg::unvectorize(&solution.rows(gm + ps, up).into_owned(), m, p);
    let out = RegulatorSolution {
        gamma,
        psi,
        upsilon,
    };
    let worst = out
        .residuals(model)
        .into_iter()
        .fold(T::zero(), |a, b| a.max(b));
    if !(worst <= T::tol(REGULATOR_TOLERANCE)) {
        return Err(Error::RegulatorInconsistent {
            residual: worst.to_f64_lossy(),
        });
    }
    Ok(out)
}

/// True iff every eigenvalue of `m` has real part below `-1e-9`.
pub fn is_hurwitz<T: Real>(m: &DMatrix<T>) -> bool {
    m.is_square() && spectral_abscissa(m) < -T::lit(HURWITZ_TOLERANCE)
}

/// State feedback `K` with `Re λ(A - BK) ≤ -margin`.
///
/// Infinite-horizon LQR with `Q = I`, `R = I` on the shifted pair
/// `(A + margin·I, B)`. The Riccati equation is solved by Newton–Kleinman
/// iteration seeded with Bass's eigenvalue-shifting gain. A zero margin on a
/// Hurwitz `A` returns `K = 0`.
pub fn synthesize_state_feedback<T: Real>(model: &LtiModel<T>, stability_margin: T) -> Result<DMatrix<T>> {
    model.check_dims()?;
    if stability_margin < T::zero() {
        return Err(Error::Precondition("stability margin must be nonnegative".into()));
    }
    if stability_margin == T::zero() && is_hurwitz(&model.a) {
        return Ok(DMatrix::zeros(model.m(), model.n()));
    }
    if !model.is_controllable() {
        return Err(Error::Synthesis("(A, B) is not controllable".into()));
    }
    let k = shifted_lqr(&model.a, &model.b, stability_margin)?;
    let abscissa = spectral_abscissa(&(&model.a - &model.b * &k));
    if abscissa > -stability_margin + T::tol(1e-9) || !abscissa.is_finite_value() {
        return Err(Error::Synthesis(format!(
            "closed loop abscissa {abscissa} misses margin {stability_margin}"
        )));
    }
    Ok(k)
}

/// Observer gain `H` with `Re λ(A - HC) ≤ -margin`, computed as the transpose
/// of the state feedback of the dual pair.
pub fn synthesize_observer_gain<T: Real>(model: &LtiModel<T>, stability_margin: T) -> Result<DMatrix<T>> {
    model.check_dims()?;
    if !model.is_detectable() {
        return Err(Error::Synthesis("(A, C) is not detectable".into()));
    }
    let dual = model.dual();
    if stability_margin == T::zero() && is_hurwitz(&dual.a) {
        return Ok(DMatrix::zeros(model.n(), model.p()));
    }
    if !dual.is_controllable() {
        return Err(Error::Synthesis(
            "(A, C) detectable but not observable; margin placement unsupported".into(),
        ));
    }
    let kd = shifted_lqr(&dual.a, &dual.b, stability_margin)?;
    let h = kd.transpose();
    let abscissa = spectral_abscissa(&(&model.a - &h * &model.c));
    if abscissa > -stability_margin + T::tol(1e-9) || !abscissa.is_finite_value() {
        return Err(Error::Synthesis(format!(
            "observer abscissa {abscissa} misses margin {stability_margin}"
        )));
    }
    Ok(h)
}

fn shifted_lqr<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>, margin: T) -> Result<DMatrix<T>> {
    let n = a.nrows();
    let eye = DMatrix::<T>::identity(n, n);
    let shifted = a + &eye * margin;

    // Bass: (As + βI) W + W (As + βI)ᵀ = 2BBᵀ with -(As + βI) Hurwitz,
    // then K0 = Bᵀ W⁻¹ places the spectrum of As - B K0 on Re = -β.
    let min_re = linalg::eigenvalues(&shifted)
        .into_iter()
        .map(|l| l.re)
        .fold(T::infinity(), |x, y| x.min(y));
    let beta = (-min_re).max(T::zero()) + T::one();
    let neg = -(&shifted + &eye * beta).transpose();
    let w = solve_lyapunov(&neg, &(b * b.transpose() * T::lit(2.0)))?.x;
    let w_inv = w
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .or_else(|| w.try_inverse())
        .ok_or_else(|| Error::Numerical("Bass gramian is singular".into()))?;
    let mut k = b.transpose() * w_inv;

    let r_eye = DMatrix::<T>::identity(b.ncols(), b.ncols());
    let mut x_prev: Option<DMatrix<T>> = None;
    for _ in 0..NEWTON_KLEINMAN_MAX_ITERS {
        let closed = &shifted - b * &k;
        if !is_hurwitz(&closed) {
            return Err(Error::Numerical(
                "Newton-Kleinman iterate lost stability".into(),
            ));
        }
        let q = &eye + k.transpose() * &r_eye * &k;
        let x = solve_lyapunov(&closed, &q)?.x;
        k = b.transpose() * &x;
        if let Some(prev) = &x_prev {
            if (&x - prev).norm() <= T::tol(1e-13) * x.norm().max(T::one()) {
                return Ok(k);
            }
        }
        x_prev = Some(x);
    }
    Err(Error::Numerical(
        "Newton-Kleinman iteration did not converge".into(),
    ))
}

/// Certificate matrix `P ≻ 0` with `A_Hᵀ P + P A_H + ς₂ I ≺ 0`.
#[derive(Debug, Clone)]
pub struct CertificateMatrix<T: Real> {
    pub p: DMatrix<T>,
    pub varsigma1: T,
    pub varsigma2: T,
    /// Set when the Lyapunov operator is badly conditioned.
    pub warning: Option<String>,
}

impl<T: Real> CertificateMatrix<T> {
    pub fn quadratic_form(&self, z: &nalgebra::DVector<T>) -> T {
        (z.transpose() * &self.p * z)[(0, 0)]
    }

    /// Minimum eigenvalue of `-(A_Hᵀ P + P A_H + ς₂ I)`.
    pub fn decrease_margin(&self, a_h: &DMatrix<T>) -> T {
        let n = self.p.nrows();
        let m = a_h.transpose() * &self.p
            + &self.p * a_h
            + DMatrix::<T>::identity(n, n) * self.varsigma2;
        linalg::min_symmetric_eigenvalue(&(-m))
    }
}

/// Slack added to `ς₂` on the right-hand side of the Lyapunov equation.
pub const CERTIFICATE_SLACK: f64 = 0.1;

/// Solves `A_Hᵀ P + P A_H = -(ς₂ + δ) I` with `δ = 0.1 ς₂`.
///
/// `varsigma1` is only carried along for reporting.
pub fn solve_certificate_matrix<T: Real>(a_h: &DMatrix<T>, varsigma2: T) -> Result<CertificateMatrix<T>> {
    solve_certificate_with(a_h, varsigma2, T::zero())
}

fn solve_certificate_with<T: Real>(a_h: &DMatrix<T>, varsigma2: T, varsigma1: T) -> Result<CertificateMatrix<T>> {
    if !(varsigma2 > T::zero()) {
        return Err(Error::Precondition("varsigma2 must be positive".into()));
    }
    if !is_hurwitz(a_h) {
        return Err(Error::Precondition("A_H is not Hurwitz".into()));
    }
    let n = a_h.nrows();
    let rhs = DMatrix::<T>::identity(n, n) * (varsigma2 * (T::one() + T::lit(CERTIFICATE_SLACK)));
    let sol = solve_lyapunov(a_h, &rhs)?;
    let warning = (sol.rcond < T::lit(1e-12))
        .then(|| format!("Lyapunov operator ill-conditioned (rcond {})", sol.rcond));
    Ok(CertificateMatrix {
        p: sol.x,
        varsigma1,
        varsigma2,
        warning,
    })
}

/// Per-agent block `[A - HC, 0; BK, A - BK]` of the error/tracking dynamics.
pub fn error_dynamics_matrix<T: Real>(model: &LtiModel<T>, gains: &GainSet<T>) -> DMatrix<T> {
    let n = model.n();
    let mut a_h = DMatrix::<T>::zeros(2 * n, 2 * n);
    a_h.view_mut((0, 0), (n, n))
        .copy_from(&(&model.a - &gains.h * &model.c));
    a_h.view_mut((n, 0), (n, n))
        .copy_from(&(&model.b * &gains.k));
    a_h.view_mut((n, n), (n, n))
        .copy_from(&(&model.a - &model.b * &gains.k));
    a_h
}

/// Network-wide certificate. Because every matrix in the error dynamics is
/// block diagonal over agents, `P` is block diagonal too (after grouping each
/// agent's `(e_x, x - Ψη)` coordinates); the blocks are stored separately.
#[derive(Debug, Clone)]
pub struct NetworkCertificate<T: Real> {
    pub blocks: Vec<CertificateMatrix<T>>,
    pub varsigma1: T,
    pub varsigma2: T,
}

impl<T: Real> NetworkCertificate<T> {
    /// `ς₁ = εl/4`, `ς₂ = 1.01 · max{‖C A_c‖², ‖BK‖²} / (4ς₁)` with the norms
    /// taken over the block-diagonal network matrices.
    pub fn synthesize(
        agents: &[(&LtiModel<T>, &GainSet<T>)],
        epsilon: T,
        strong_convexity: T,
    ) -> Result<Self> {
        if !(epsilon > T::zero() && strong_convexity > T::zero()) {
            return Err(Error::Precondition(
                "certificate needs positive step size and strong convexity".into(),
            ));
        }
        let varsigma1 = epsilon * strong_convexity / T::lit(4.0);
        let mut worst = T::zero();
        for (model, gains) in agents {
            let ac = &model.a - &model.b * &gains.k;
            let c_ac = spectral_norm(&(&model.c * &ac));
            let bk = spectral_norm(&(&model.b * &gains.k));
            worst = worst.max(c_ac * c_ac).max(bk * bk);
        }
        let varsigma2 = (worst / (T::lit(4.0) * varsigma1) * T::lit(1.01)).max(T::tol(1e-12));
        let blocks = agents
            .iter()
            .map(|(model, gains)| {
                solve_certificate_with(&error_dynamics_matrix(model, gains), varsigma2, varsigma1)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            blocks,
            varsigma1,
            varsigma2,
        })
    }

    /// `Σ_i z_iᵀ P_i z_i` with `z_i = (e_x,i, x_i - Ψ_i η_i)`.
    pub fn energy(&self, z: &[nalgebra::DVector<T>]) -> T {
        self.blocks
            .iter()
            .zip(z)
            .fold(T::zero(), |acc, (b, zi)| acc + b.quadratic_form(zi))
    }

    pub fn dense(&self) -> DMatrix<T> {
        let ps: Vec<_> = self.blocks.iter().map(|b| b.p.clone()).collect();
        block_diag(&ps)
    }
}
