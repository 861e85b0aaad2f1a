//! Ground truth for localization: principal eigenvector by power iteration,
//! inverse participation ratio, region thresholds and an RK4 integrator for
//! the linear dynamics `dx/dt = (αI + βA) x`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{is_connected, Graph};
use crate::rng::Rng64;

/// Dominant eigenpair of an adjacency matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralResult {
    pub lambda1: f64,
    /// Unit-norm principal eigenvector with positive entry sum.
    pub pev: Vec<f64>,
    pub iterations: usize,
    /// Final `‖Au − λu‖₂`.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 1_000_000,
        }
    }
}

/// Power iteration on `A + I`.
///
/// The unit shift keeps bipartite graphs (where `-λ1` is also an
/// eigenvalue of `A`) from oscillating. Iteration starts at `1/√n` and
/// stops once the residual of the Rayleigh pair drops to `tol`.
pub fn power_iteration(g: &Graph, tol: f64, max_iter: usize) -> Result<SpectralResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParams(format!("tolerance must be positive, got {tol}")));
    }
    if !is_connected(g) {
        return Err(Error::PreconditionViolation(
            "power iteration needs a connected graph".into(),
        ));
    }
    let n = g.n();
    let mut u = vec![1.0 / (n as f64).sqrt(); n];
    let mut au = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for iter in 0..=max_iter {
        g.adjacency_matvec(&u, &mut au);
        let lambda = dot(&u, &au);
        residual = au
            .iter()
            .zip(&u)
            .map(|(a, x)| (a - lambda * x).powi(2))
            .sum::<f64>()
            .sqrt();
        if residual <= tol {
            let sign = if u.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
            u.iter_mut().for_each(|x| *x *= sign);
            return Ok(SpectralResult {
                lambda1: lambda,
                pev: u,
                iterations: iter,
                residual,
            });
        }
        if iter == max_iter {
            break;
        }
        for (x, a) in u.iter_mut().zip(&au) {
            *x += a;
        }
        let norm = dot(&u, &u).sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::NumericFailure(format!(
                "iterate norm {norm} at iteration {iter}"
            )));
        }
        u.iter_mut().for_each(|x| *x /= norm);
    }
    Err(Error::ConvergenceFailure {
        iterations: max_iter,
        residual,
    })
}

/// [`power_iteration`] with a [`SpectralConfig`].
pub fn principal_eigenpair(g: &Graph, cfg: &SpectralConfig) -> Result<SpectralResult> {
    power_iteration(g, cfg.tol, cfg.max_iter)
}

/// Inverse participation ratio `Σ v⁴ / (Σ v²)²`.
pub fn ipr(v: &[f64]) -> Result<f64> {
    // scale by the largest magnitude so tiny or huge vectors do not
    // underflow or overflow in the fourth power
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("IPR of a non-finite vector".into()));
    }
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if !(scale > 0.0) {
        return Err(Error::InvalidInput("IPR of an all-zero vector".into()));
    }
    let (mut s2, mut s4) = (0.0, 0.0);
    for &x in v {
        let y = x / scale;
        let y2 = y * y;
        s2 += y2;
        s4 += y2 * y2;
    }
    Ok(s4 / (s2 * s2))
}

/// Localization region of an IPR value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionLabel {
    Delocalized = 1,
    WeaklyLocalized = 2,
    StronglyLocalized = 3,
}

impl RegionLabel {
    pub const ALL: [RegionLabel; 3] = [
        RegionLabel::Delocalized,
        RegionLabel::WeaklyLocalized,
        RegionLabel::StronglyLocalized,
    ];

    /// Numeric code 1, 2 or 3.
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(RegionLabel::Delocalized),
            2 => Some(RegionLabel::WeaklyLocalized),
            3 => Some(RegionLabel::StronglyLocalized),
            _ => None,
        }
    }

    /// Zero-based index, for confusion-matrix layout.
    pub fn index(self) -> usize {
        self as usize - 1
    }

    pub fn name(self) -> &'static str {
        match self {
            RegionLabel::Delocalized => "delocalized",
            RegionLabel::WeaklyLocalized => "weakly_localized",
            RegionLabel::StronglyLocalized => "strongly_localized",
        }
    }
}

/// IPR thresholds `τ1 < τ2` with flexibility width `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionThresholds {
    pub tau1: f64,
    pub tau2: f64,
    pub epsilon: f64,
}

impl Default for RegionThresholds {
    fn default() -> Self {
        Self {
            tau1: 0.05,
            tau2: 0.2,
            epsilon: 1e-6,
        }
    }
}

impl RegionThresholds {
    pub fn new(tau1: f64, tau2: f64, epsilon: f64) -> Result<Self> {
        let th = Self { tau1, tau2, epsilon };
        th.validate()?;
        Ok(th)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau1 > 0.0 && self.tau1 < self.tau2 && self.tau2 < 1.0) {
            return Err(Error::InvalidParams(format!(
                "thresholds must satisfy 0 < tau1 < tau2 < 1, got {} and {}",
                self.tau1, self.tau2
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParams(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    /// Whether the thresholds are meaningful for graphs on `n` nodes
    /// (`τ1 ≥ 1/n`).
    pub fn admits_size(&self, n: usize) -> bool {
        self.tau1 >= 1.0 / n as f64
    }
}

pub fn classify_region(y: f64, th: &RegionThresholds) -> RegionLabel {
    if y <= th.tau1 - th.epsilon {
        RegionLabel::Delocalized
    } else if y < th.tau2 + th.epsilon {
        RegionLabel::WeaklyLocalized
    } else {
        RegionLabel::StronglyLocalized
    }
}

/// Linear dynamics `dx/dt = (αI + βA) x` integrated up to `t_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsParams {
    pub alpha: f64,
    pub beta: f64,
    pub x0: Vec<f64>,
    pub t_max: f64,
    pub dt: f64,
}

impl DynamicsParams {
    /// Parameters with the step from [`stable_dt`].
    pub fn for_graph(g: &Graph, alpha: f64, beta: f64, x0: Vec<f64>, t_max: f64) -> Self {
        Self {
            alpha,
            beta,
            dt: stable_dt(g, alpha, beta),
            x0,
            t_max,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.beta == 0.0 || !self.beta.is_finite() || !self.alpha.is_finite() {
            return Err(Error::InvalidParams(format!(
                "need finite alpha and nonzero beta, got alpha = {}, beta = {}",
                self.alpha, self.beta
            )));
        }
        if !(self.dt > 0.0) || !(self.t_max >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "need dt > 0 and t_max >= 0, got dt = {}, t_max = {}",
                self.dt, self.t_max
            )));
        }
        if self.x0.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "initial state has {} entries for {n} nodes",
                self.x0.len()
            )));
        }
        if self.x0.iter().all(|&x| x == 0.0) {
            return Err(Error::InvalidInput("initial state is all zero".into()));
        }
        Ok(())
    }
}

/// Upper bound on the spectral radius of `A` for a connected graph:
/// `min(d_max, √(2m − n + 1))`.
pub fn spectral_radius_bound(g: &Graph) -> f64 {
    let n = g.n() as f64;
    let m = g.edge_count() as f64;
    let hong = (2.0 * m - n + 1.0).max(0.0).sqrt();
    (g.max_degree() as f64).min(hong)
}

/// RK4 step for which every mode of `αI + βA` satisfies `|dt·μ| ≤ 1`.
/// On that range the RK4 amplification factor is positive and increasing,
/// so mode ordering (and hence the limiting direction) is preserved.
pub fn stable_dt(g: &Graph, alpha: f64, beta: f64) -> f64 {
    let bound = alpha.abs() + beta.abs() * spectral_radius_bound(g);
    if bound > 0.0 {
        1.0 / bound
    } else {
        1.0
    }
}

/// Nonnegative random initial state with entries in `[0, 1)`, redrawn if it
/// comes out all zero.
pub fn random_initial_state(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = Rng64::new(seed);
    loop {
        let x: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
        if x.iter().any(|&v| v > 0.0) {
            return x;
        }
    }
}

/// Integrate the dynamics with classic RK4, renormalizing after every step.
/// Returns the unit-norm state at `t_max`.
pub fn integrate_dynamics(g: &Graph, p: &DynamicsParams) -> Result<Vec<f64>> {
    if !is_connected(g) {
        return Err(Error::PreconditionViolation(
            "dynamics integration needs a connected graph".into(),
        ));
    }
    let n = g.n();
    p.validate(n)?;
    let rhs = |x: &[f64], out: &mut [f64]| {
        g.adjacency_matvec(x, out);
        for (o, &xi) in out.iter_mut().zip(x) {
            *o = p.alpha * xi + p.beta * *o;
        }
    };
    let mut x = p.x0.clone();
    normalize(&mut x)?;
    let steps = (p.t_max / p.dt).ceil() as usize;
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    for step in 0..steps {
        let h = if step + 1 == steps {
            p.t_max - p.dt * step as f64
        } else {
            p.dt
        };
        rhs(&x, &mut k1);
        axpy_into(&x, 0.5 * h, &k1, &mut tmp);
        rhs(&tmp, &mut k2);
        axpy_into(&x, 0.5 * h, &k2, &mut tmp);
        rhs(&tmp, &mut k3);
        axpy_into(&x, h, &k3, &mut tmp);
        rhs(&tmp, &mut k4);
        for i in 0..n {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        normalize(&mut x).map_err(|_| {
            Error::NumericFailure(format!("state diverged at step {step} (t = {})", step as f64 * p.dt))
        })?;
    }
    Ok(x)
}

/// IPR of the principal eigenvector under the default configuration.
pub fn label_graph(g: &Graph) -> Result<f64> {
    label_graph_with(g, &SpectralConfig::default())
}

pub fn label_graph_with(g: &Graph, cfg: &SpectralConfig) -> Result<f64> {
    ipr(&principal_eigenpair(g, cfg)?.pev)
}

/// Cosine similarity of two vectors.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b) / (dot(a, a).sqrt() * dot(b, b).sqrt())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy_into(x: &[f64], a: f64, y: &[f64], out: &mut [f64]) {
    for ((o, &xi), &yi) in out.iter_mut().zip(x).zip(y) {
        *o = xi + a * yi;
    }
}

fn normalize(x: &mut [f64]) -> Result<()> {
    let norm = dot(x, x).sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::NumericFailure(format!("state norm {norm}")));
    }
    x.iter_mut().for_each(|v| *v /= norm);
    Ok(())
}
