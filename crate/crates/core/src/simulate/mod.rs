//! Synthetic noisy observations of a continuous martingale with a
//! rank-controlled, time-varying spot covariance.
//!
//! Covariance paths are stored in factor form `Σ(i/n) = F_i F_iᵀ` with
//! `F_i ∈ ℝ^{d×k}`. The Euler step `F_i ζ_i / √n` with `ζ_i ~ N(0, I_k)` has
//! the same law as `Σ(i/n)^{1/2} ξ_i / √n`, and keeps the rank exact.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{eig_sym, SymMatrix};
use crate::rng;
use crate::spectral::ObservationGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ScenarioKind {
    /// `Σ(t) = A(t)A(t)ᵀ`, `A(t) = [√b_k e_k + B̃_k(t)]_{k ≤ r}`: rank exactly r.
    H0RankR,
    /// As `H0RankR` with `r + 1` columns, the (r+1)-st eigenvalue replaced by
    /// `lambda2_star` at every time.
    H1RankR1,
    /// `Σ` constant, given by `sigma` (identity when absent).
    ConstantSigma,
    /// `Σ ≡ 0`.
    PureNoise,
    /// Two factors whose loadings rotate from `span(e₁, e₂)` towards
    /// `span(e₃, e₄)`; locally rank 2, rank 4 when integrated over the day.
    RotatingFactors,
}

impl ScenarioKind {
    pub fn tag(self) -> &'static str {
        match self {
            ScenarioKind::H0RankR => "H0_RANK_R",
            ScenarioKind::H1RankR1 => "H1_RANK_R1",
            ScenarioKind::ConstantSigma => "CONSTANT_SIGMA",
            ScenarioKind::PureNoise => "PURE_NOISE",
            ScenarioKind::RotatingFactors => "ROTATING_FACTORS",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimScenario {
    pub d: usize,
    pub n: usize,
    pub eta: f64,
    pub kind: ScenarioKind,
    /// Base rank.
    pub r: usize,
    pub lambda2_star: f64,
    pub base_diag: Vec<f64>,
    pub seed: u64,
    /// Row-major `d×d` covariance for `ConstantSigma`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<f64>>,
}

impl SimScenario {
    /// Rank-1 null with `base_diag = (1)`.
    pub fn h0(d: usize, n: usize, eta: f64, seed: u64) -> Self {
        SimScenario {
            d,
            n,
            eta,
            kind: ScenarioKind::H0RankR,
            r: 1,
            lambda2_star: 0.0,
            base_diag: vec![1.0],
            seed,
            sigma: None,
        }
    }

    /// Rank-1 plus a second eigenvalue fixed at `lambda2_star`, `base_diag = (1, 0.5)`.
    pub fn h1(d: usize, n: usize, eta: f64, lambda2_star: f64, seed: u64) -> Self {
        SimScenario {
            kind: ScenarioKind::H1RankR1,
            lambda2_star,
            base_diag: vec![1.0, 0.5],
            ..Self::h0(d, n, eta, seed)
        }
    }

    pub fn pure_noise(d: usize, n: usize, eta: f64, seed: u64) -> Self {
        SimScenario {
            kind: ScenarioKind::PureNoise,
            r: 0,
            base_diag: vec![],
            ..Self::h0(d, n, eta, seed)
        }
    }

    pub fn constant(sigma: &SymMatrix, n: usize, eta: f64, seed: u64) -> Self {
        let d = sigma.dim();
        SimScenario {
            kind: ScenarioKind::ConstantSigma,
            r: 0,
            base_diag: vec![],
            sigma: Some(sigma.as_matrix().transpose().as_slice().to_vec()),
            ..Self::h0(d, n, eta, seed)
        }
    }

    pub fn rotating(d: usize, n: usize, eta: f64, seed: u64) -> Self {
        SimScenario {
            kind: ScenarioKind::RotatingFactors,
            r: 2,
            base_diag: vec![1.0, 0.5],
            ..Self::h0(d, n, eta, seed)
        }
    }

    /// Power studies index alternatives by `λ₂*`; zero means the null.
    pub fn h0_or_h1(d: usize, n: usize, eta: f64, lambda2_star: f64, seed: u64) -> Self {
        if lambda2_star > 0.0 {
            Self::h1(d, n, eta, lambda2_star, seed)
        } else {
            Self::h0(d, n, eta, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::Config("dimension d must be at least 1".into()));
        }
        if self.n < 2 {
            return Err(Error::Config(format!("n = {} must be at least 2", self.n)));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::Config(format!("eta = {} must be >= 0", self.eta)));
        }
        if !(self.lambda2_star >= 0.0 && self.lambda2_star.is_finite()) {
            return Err(Error::Config("lambda2_star must be >= 0".into()));
        }
        if self.base_diag.iter().any(|b| !(*b >= 0.0 && b.is_finite())) {
            return Err(Error::Config("base_diag entries must be >= 0".into()));
        }
        match self.kind {
            ScenarioKind::H0RankR => {
                if self.lambda2_star != 0.0 {
                    return Err(Error::Config("the null scenario requires lambda2_star = 0".into()));
                }
                if self.r == 0 || self.r > self.d {
                    return Err(Error::Config(format!("rank r = {} outside 1..={}", self.r, self.d)));
                }
                if self.base_diag.len() != self.r && self.base_diag.len() != self.r + 1 {
                    return Err(Error::Config(format!(
                        "base_diag needs {} or {} entries, got {}",
                        self.r,
                        self.r + 1,
                        self.base_diag.len()
                    )));
                }
                if self.base_diag.len() == self.r + 1 && self.r + 1 > self.d {
                    return Err(Error::Config(format!("d = {} is too small for {} factors", self.d, self.r + 1)));
                }
            }
            ScenarioKind::H1RankR1 => {
                if self.d < 2 || self.r + 1 > self.d {
                    return Err(Error::Config(format!(
                        "rank {} alternative needs d >= {}, got d = {}",
                        self.r + 1,
                        (self.r + 1).max(2),
                        self.d
                    )));
                }
                if self.lambda2_star <= 0.0 {
                    return Err(Error::Config("alternative requires lambda2_star > 0".into()));
                }
                if self.base_diag.len() != self.r + 1 {
                    return Err(Error::Config(format!(
                        "base_diag needs {} entries, got {}",
                        self.r + 1,
                        self.base_diag.len()
                    )));
                }
            }
            ScenarioKind::RotatingFactors => {
                if self.d < 4 {
                    return Err(Error::Config("rotating factors need d >= 4".into()));
                }
                if self.base_diag.len() != 2 {
                    return Err(Error::Config("rotating factors need two base_diag entries".into()));
                }
            }
            ScenarioKind::ConstantSigma => {
                if let Some(s) = &self.sigma {
                    if s.len() != self.d * self.d {
                        return Err(Error::DimensionMismatch {
                            expected: self.d * self.d,
                            got: s.len(),
                        });
                    }
                }
            }
            ScenarioKind::PureNoise => {}
        }
        Ok(())
    }
}

/// `Σ(i/n) = F_i F_iᵀ` on the grid `i = 0..n`.
#[derive(Debug, Clone)]
pub struct CovariancePath {
    n: usize,
    d: usize,
    k: usize,
    /// `F_i` column-major, one `d×k` slab per time; a single slab when constant.
    factors: Vec<f64>,
    constant: bool,
    pub rank_claim: usize,
}

impl CovariancePath {
    /// Path with the same factor at every time.
    pub fn constant(n: usize, factor: DMatrix<f64>, rank_claim: usize) -> Self {
        CovariancePath {
            n,
            d: factor.nrows(),
            k: factor.ncols(),
            factors: factor.as_slice().to_vec(),
            constant: true,
            rank_claim,
        }
    }

    /// Path from a factor function `i ↦ F_i` evaluated at `i = 0..n`.
    pub fn from_fn(n: usize, d: usize, k: usize, rank_claim: usize, mut f: impl FnMut(usize) -> DMatrix<f64>) -> Self {
        let mut factors = Vec::with_capacity((n + 1) * d * k);
        for i in 0..=n {
            let fi = f(i);
            assert_eq!((fi.nrows(), fi.ncols()), (d, k), "factor shape");
            factors.extend_from_slice(fi.as_slice());
        }
        CovariancePath {
            n,
            d,
            k,
            factors,
            constant: false,
            rank_claim,
        }
    }

    /// Number of grid intervals.
    pub fn n_fine(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Number of factor columns.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn is_constant(&self) -> bool {
        self.constant
    }

    fn slab(&self, i: usize) -> &[f64] {
        let len = self.d * self.k;
        let at = if self.constant { 0 } else { i * len };
        &self.factors[at..at + len]
    }

    pub fn factor(&self, i: usize) -> DMatrix<f64> {
        assert!(i <= self.n, "time index out of range");
        DMatrix::from_column_slice(self.d, self.k, self.slab(i))
    }

    /// `Σ(i/n)`.
    pub fn sigma(&self, i: usize) -> SymMatrix {
        let f = self.factor(i);
        SymMatrix::symmetrize(&(&f * f.transpose())).expect("finite factor")
    }

    /// `max_s ‖Σ(s + δ) − Σ(s)‖_F / δ^{1/2}` with `δ = lag/n`.
    pub fn holder_proxy(&self, lag: usize) -> f64 {
        if lag == 0 || lag > self.n || self.constant {
            return 0.0;
        }
        let delta = lag as f64 / self.n as f64;
        (0..=self.n - lag)
            .map(|i| {
                (self.sigma(i + lag).as_matrix() - self.sigma(i).as_matrix()).norm() / delta.sqrt()
            })
            .fold(0.0, f64::max)
    }
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Brownian matrix `B̃(i/n)` for `i = 0..n`, `d×k` slabs column-major, `B̃(0) = 0`.
fn brownian<R: Rng + ?Sized>(n: usize, d: usize, k: usize, rng: &mut R) -> Vec<f64> {
    let len = d * k;
    let sd = (1.0 / n as f64).sqrt();
    let mut out = vec![0.0; (n + 1) * len];
    for i in 1..=n {
        for e in 0..len {
            out[i * len + e] = out[(i - 1) * len + e] + sd * normal(rng);
        }
    }
    out
}

/// `A(t) = [√b_k e_k + B̃_k(t)]`.
fn loading(d: usize, base: &[f64], b: &[f64]) -> DMatrix<f64> {
    let k = base.len();
    let mut a = DMatrix::from_column_slice(d, k, b);
    for (c, bc) in base.iter().enumerate() {
        a[(c, c)] += bc.sqrt();
    }
    a
}

/// Factor with the last of `k` eigenvalues of `AAᵀ` replaced by `lambda`,
/// leading eigenvalues and all eigenvectors unchanged.
fn adjust_last_eigenvalue(a: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    let k = a.ncols();
    let gram = SymMatrix::symmetrize(&(a.transpose() * a)).expect("finite loading");
    let eig = eig_sym(&gram).expect("finite gram");
    let mut f = a * &eig.vectors;
    let mu = eig.values[k - 1];
    let last = if mu > 0.0 {
        f.column(k - 1) * (lambda / mu).sqrt()
    } else {
        // the last direction collapsed; any unit vector orthogonal to the rest
        orthogonal_unit(&f.columns(0, k - 1).into_owned()) * lambda.sqrt()
    };
    f.set_column(k - 1, &last);
    f
}

fn orthogonal_unit(cols: &DMatrix<f64>) -> nalgebra::DVector<f64> {
    let d = cols.nrows();
    for e in 0..d {
        let mut v = nalgebra::DVector::zeros(d);
        v[e] = 1.0;
        for c in cols.column_iter() {
            let nc = c.norm_squared();
            if nc > 0.0 {
                let proj = c.dot(&v) / nc;
                v -= c * proj;
            }
        }
        let norm = v.norm();
        if norm > 1e-6 {
            return v / norm;
        }
    }
    nalgebra::DVector::zeros(d)
}

/// Factor of a constant PSD matrix: eigen square root with negative
/// eigenvalues clipped at zero. Returns the factor and its numerical rank.
pub fn psd_factor(sigma: &SymMatrix) -> Result<(DMatrix<f64>, usize)> {
    let eig = eig_sym(sigma)?;
    let d = sigma.dim();
    let top = eig.values[0].abs().max(f64::MIN_POSITIVE);
    let mut f = DMatrix::zeros(d, d);
    let mut rank = 0;
    for (c, lam) in eig.values.iter().enumerate() {
        if *lam > 1e-12 * top {
            rank += 1;
        }
        f.set_column(c, &(eig.vectors.column(c) * lam.max(0.0).sqrt()));
    }
    Ok((f, rank))
}

fn path_from_brownian(scn: &SimScenario, b: &[f64], k: usize) -> CovariancePath {
    let (n, d) = (scn.n, scn.d);
    let slab = d * k;
    match scn.kind {
        ScenarioKind::H0RankR if k == scn.r => CovariancePath::from_fn(n, d, k, scn.r, |i| {
            loading(d, &scn.base_diag, &b[i * slab..(i + 1) * slab])
        }),
        ScenarioKind::H0RankR => CovariancePath::from_fn(n, d, scn.r, scn.r, |i| {
            let a = loading(d, &scn.base_diag, &b[i * slab..(i + 1) * slab]);
            adjust_last_eigenvalue(&a, 0.0).columns(0, scn.r).into_owned()
        }),
        ScenarioKind::H1RankR1 => CovariancePath::from_fn(n, d, k, scn.r + 1, |i| {
            let a = loading(d, &scn.base_diag, &b[i * slab..(i + 1) * slab]);
            adjust_last_eigenvalue(&a, scn.lambda2_star)
        }),
        ScenarioKind::RotatingFactors => {
            // b is a scalar Brownian angle perturbation
            CovariancePath::from_fn(n, d, 2, 2, |i| {
                let t = i as f64 / n as f64;
                let theta = std::f64::consts::FRAC_PI_2 * t + 0.25 * b[i];
                let (s, c) = theta.sin_cos();
                let mut f = DMatrix::zeros(d, 2);
                let (a1, a2) = (scn.base_diag[0].sqrt(), scn.base_diag[1].sqrt());
                f[(0, 0)] = a1 * c;
                f[(2, 0)] = a1 * s;
                f[(1, 1)] = a2 * c;
                f[(3, 1)] = a2 * s;
                f
            })
        }
        ScenarioKind::ConstantSigma | ScenarioKind::PureNoise => unreachable!(),
    }
}

/// Covariance path of a scenario, drawn from `rng`.
pub fn gen_covariance_path<R: Rng + ?Sized>(scn: &SimScenario, rng: &mut R) -> Result<CovariancePath> {
    scn.validate()?;
    let (n, d) = (scn.n, scn.d);
    match scn.kind {
        ScenarioKind::PureNoise => Ok(CovariancePath::constant(n, DMatrix::zeros(d, 0), 0)),
        ScenarioKind::ConstantSigma => {
            let sigma = match &scn.sigma {
                Some(s) => SymMatrix::from_row_slice(d, s)?,
                None => SymMatrix::identity(d),
            };
            let (f, rank) = psd_factor(&sigma)?;
            Ok(CovariancePath::constant(n, f, rank))
        }
        ScenarioKind::RotatingFactors => {
            let b = brownian(n, 1, 1, rng);
            let path = path_from_brownian(scn, &b, 1);
            Ok(path)
        }
        ScenarioKind::H0RankR | ScenarioKind::H1RankR1 => {
            let k = scn.base_diag.len();
            let b = brownian(n, d, k, rng);
            Ok(path_from_brownian(scn, &b, k))
        }
    }
}

/// Same as [`gen_covariance_path`] with the Brownian part frozen at zero.
pub fn gen_covariance_path_frozen(scn: &SimScenario) -> Result<CovariancePath> {
    scn.validate()?;
    match scn.kind {
        ScenarioKind::H0RankR | ScenarioKind::H1RankR1 => {
            let k = scn.base_diag.len();
            let b = vec![0.0; (scn.n + 1) * scn.d * k];
            Ok(path_from_brownian(scn, &b, k))
        }
        ScenarioKind::RotatingFactors => Ok(path_from_brownian(scn, &vec![0.0; scn.n + 1], 1)),
        _ => gen_covariance_path(scn, &mut rng::seeded(scn.seed)),
    }
}

/// Euler scheme for `X` started at 0 plus i.i.d. `N(0, η²)` noise.
pub fn simulate_observations<R: Rng + ?Sized>(
    path: &CovariancePath,
    eta: f64,
    scenario: &str,
    seed: Option<u64>,
    rng: &mut R,
) -> Result<ObservationGrid> {
    let (n, d, k) = (path.n, path.d, path.k);
    let sd = (1.0 / n as f64).sqrt();
    let mut x = vec![0.0; d];
    let mut values = vec![0.0; (n + 1) * d];
    let mut zeta = vec![0.0; k];
    for i in 0..n {
        if k > 0 {
            zeta.iter_mut().for_each(|z| *z = sd * normal(rng));
            let f = path.slab(i);
            for (c, z) in zeta.iter().enumerate() {
                let col = &f[c * d..(c + 1) * d];
                for (xr, fr) in x.iter_mut().zip(col) {
                    *xr += fr * z;
                }
            }
        }
        values[(i + 1) * d..(i + 2) * d].copy_from_slice(&x);
    }
    if eta > 0.0 {
        for v in values.iter_mut() {
            *v += eta * normal(rng);
        }
    }
    ObservationGrid::new(d, values, eta, seed, scenario)
}

/// Path and observations for a scenario, both from `stream(scn.seed, rep)`.
pub fn simulate_scenario(scn: &SimScenario, rep: u64) -> Result<(CovariancePath, ObservationGrid)> {
    let mut rng = rng::stream(scn.seed, rep);
    let path = gen_covariance_path(scn, &mut rng)?;
    let grid = simulate_observations(&path, scn.eta, scn.kind.tag(), Some(scn.seed), &mut rng)?;
    Ok((path, grid))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frozen_core() {
        let scn = SimScenario::h1(4, 10, 0.0, 0.01, 1);
        let path = gen_covariance_path_frozen(&scn).unwrap();
        let s = path.sigma(3);
        let expected = SymMatrix::from_diagonal(&[1.0, 0.01, 0.0, 0.0]);
        assert!((s.as_matrix() - expected.as_matrix()).abs().max() < 1e-15);
        let raw = SimScenario::h0(4, 10, 0.0, 1);
        let s0 = gen_covariance_path_frozen(&raw).unwrap().sigma(5);
        assert_eq!(s0, SymMatrix::from_diagonal(&[1.0, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn h0_rank_one() {
        let scn = SimScenario::h0(6, 200, 0.0, 3);
        let path = gen_covariance_path(&scn, &mut rng::seeded(3)).unwrap();
        assert_eq!(path.rank_claim, 1);
        for i in (0..=200).step_by(17) {
            let ev = path.sigma(i).eigenvalues().unwrap();
            assert!(ev[0] > 0.0);
            assert!(ev[1].abs() <= 1e-12 * ev[0]);
        }
    }

    #[test]
    fn h1_prescribed_second_eigenvalue() {
        let scn = SimScenario::h1(5, 300, 0.0, 0.01, 9);
        let path = gen_covariance_path(&scn, &mut rng::seeded(9)).unwrap();
        let mut min2 = f64::INFINITY;
        for i in 0..=300 {
            let ev = path.sigma(i).eigenvalues().unwrap();
            assert!(ev[2].abs() < 1e-13);
            min2 = min2.min(ev[1]);
        }
        assert!((min2 - 0.01).abs() < 1e-13);
    }

    #[test]
    fn adjustment_keeps_leading_eigenpair() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.2, 0.3, 0.7, -0.1, 0.4]);
        let before = SymMatrix::symmetrize(&(&a * a.transpose())).unwrap().eigen().unwrap();
        let f = adjust_last_eigenvalue(&a, 0.05);
        let after = SymMatrix::symmetrize(&(&f * f.transpose())).unwrap().eigen().unwrap();
        assert!((before.values[0] - after.values[0]).abs() < 1e-13);
        assert!((after.values[1] - 0.05).abs() < 1e-13);
        let dot = before.vectors.column(0).dot(&after.vectors.column(0)).abs();
        assert!((dot - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rank_two_scenarios_need_two_dims() {
        let scn = SimScenario::h1(1, 10, 0.0, 0.1, 1);
        assert!(gen_covariance_path(&scn, &mut rng::seeded(1)).is_err());
        let mut bad = SimScenario::h0(3, 10, 0.0, 1);
        bad.lambda2_star = 0.1;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn noiseless_zero_covariance_is_flat() {
        let scn = SimScenario::pure_noise(3, 50, 0.0, 1);
        let (_, grid) = simulate_scenario(&scn, 0).unwrap();
        assert!(grid.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn realized_variance_identity() {
        let scn = SimScenario::constant(&SymMatrix::identity(3), 20_000, 0.0, 4);
        let (_, grid) = simulate_scenario(&scn, 0).unwrap();
        for k in 0..3 {
            let rv: f64 = grid.increments(k).iter().map(|x| x * x).sum();
            // sd of RV is sqrt(2/n) = 0.01
            assert!((rv - 1.0).abs() < 0.05, "rv = {rv}");
        }
    }

    #[test]
    fn pure_noise_increment_autocorrelation() {
        let scn = SimScenario::pure_noise(2, 40_000, 0.3, 5);
        let (_, grid) = simulate_scenario(&scn, 0).unwrap();
        for k in 0..2 {
            let dy = grid.increments(k);
            let num: f64 = dy.windows(2).map(|w| w[0] * w[1]).sum();
            let den: f64 = dy.iter().map(|x| x * x).sum();
            assert!((num / den + 0.5).abs() < 0.02);
        }
    }

    #[test]
    fn replay() {
        let scn = SimScenario::h1(4, 100, 0.01, 0.2, 77);
        let a = simulate_scenario(&scn, 3).unwrap().1;
        let b = simulate_scenario(&scn, 3).unwrap().1;
        assert_eq!(a, b);
        assert_ne!(a, simulate_scenario(&scn, 4).unwrap().1);
    }

    #[test]
    fn constant_factor_clips_negative() {
        let s = SymMatrix::from_diagonal(&[2.0, -1e-15, 0.5]);
        let (f, rank) = psd_factor(&s).unwrap();
        assert_eq!(rank, 2);
        let back = &f * f.transpose();
        assert!((back[(0, 0)] - 2.0).abs() < 1e-14 && back[(1, 1)] == 0.0);
    }

    #[test]
    fn rotating_is_locally_rank_two() {
        let scn = SimScenario::rotating(5, 100, 0.0, 1);
        let path = gen_covariance_path(&scn, &mut rng::seeded(1)).unwrap();
        let ev = path.sigma(40).eigenvalues().unwrap();
        assert!((ev[0] - 1.0).abs() < 1e-12 && (ev[1] - 0.5).abs() < 1e-12 && ev[2].abs() < 1e-12);
        assert!(path.holder_proxy(1) > 0.0);
    }
}
