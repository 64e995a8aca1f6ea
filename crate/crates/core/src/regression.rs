//! Tucker tensor autoregression.
//!
//! The response is modelled as `Y = A + ⟨X, B⟩ + E`, where every non-sample
//! mode of `X` is contracted against the leading modes of `B`, and `B` carries
//! a Tucker structure. Estimation minimises `‖Y - Ŷ‖² + λ‖B‖²` by alternating
//! exact ridge solves over the core and each factor matrix. The intercept is
//! absorbed by centring both sides.
//!
//! Every block update is expressed through the Gram matrices `XᵀX` and `XᵀY`
//! (with the relevant mode moved last), so its cost does not grow with the
//! number of samples.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{kron_all, leading_left_singular, psd_solve_min_norm, random_orthonormal, spd_solve};
use crate::tensor::{contract, mode_multiply, unfold, DenseTensor, ModePairing, TuckerFactors};

/// Largest regressor dimension for which the closed-form solve is used to
/// seed the factors.
const SPECTRAL_INIT_MAX_FEATURES: usize = 4096;

/// Serialised as the string `"full"` or a list of per-mode ranks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RankRepr", into = "RankRepr")]
pub enum RankSpec {
    Full,
    Explicit(Vec<usize>),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RankRepr {
    Keyword(String),
    List(Vec<usize>),
}

impl TryFrom<RankRepr> for RankSpec {
    type Error = String;
    fn try_from(r: RankRepr) -> std::result::Result<Self, String> {
        match r {
            RankRepr::Keyword(k) if k == "full" => Ok(RankSpec::Full),
            RankRepr::Keyword(k) => Err(format!("ranks must be \"full\" or a list, found {k:?}")),
            RankRepr::List(v) => Ok(RankSpec::Explicit(v)),
        }
    }
}

impl From<RankSpec> for RankRepr {
    fn from(r: RankSpec) -> Self {
        match r {
            RankSpec::Full => RankRepr::Keyword("full".into()),
            RankSpec::Explicit(v) => RankRepr::List(v),
        }
    }
}

impl RankSpec {
    /// Per-mode ranks for a coefficient of the given shape.
    pub fn resolve(&self, coefficient_shape: &[usize]) -> Result<Vec<usize>> {
        match self {
            RankSpec::Full => Ok(coefficient_shape.to_vec()),
            RankSpec::Explicit(r) => {
                if r.len() != coefficient_shape.len() {
                    return Err(Error::InvalidArgument(format!(
                        "{} ranks given for a coefficient of order {}",
                        r.len(),
                        coefficient_shape.len()
                    )));
                }
                for (mode, (&rank, &extent)) in r.iter().zip(coefficient_shape).enumerate() {
                    if rank == 0 {
                        return Err(Error::InvalidArgument(format!("rank at mode {mode} is zero")));
                    }
                    if rank > extent {
                        return Err(Error::RankExceedsExtent { mode, rank, extent });
                    }
                }
                Ok(r.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub max_sweeps: usize,
    pub rel_tol: f64,
    pub lambda_grid: Vec<f64>,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            max_sweeps: 200,
            rel_tol: 1e-8,
            lambda_grid: vec![0.0, 1.0, 5.0, 10.0, 20.0, 50.0],
            train_fraction: 0.9,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_sweeps == 0 {
            return Err(Error::InvalidArgument("max_sweeps must be at least 1".into()));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidArgument("rel_tol must be positive".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "train_fraction {} outside (0, 1)",
                self.train_fraction
            )));
        }
        if let Some(l) = self.lambda_grid.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
            return Err(Error::InvalidArgument(format!(
                "lambda {l} in grid is not a nonnegative number"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// Penalised objective after each sweep.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    pub n_sweeps: usize,
    /// Out-of-sample R², filled in when a held-out set was scored.
    pub predicted_r2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TarModel {
    intercept: DenseTensor,
    coefficient: TuckerFactors,
    lambda: f64,
    ranks: Vec<usize>,
    response_mean: DenseTensor,
    n_feature_modes: usize,
}

impl TarModel {
    /// Wraps a dense coefficient as a trivially-factored Tucker tensor.
    pub fn from_dense(
        intercept: DenseTensor,
        coefficient: DenseTensor,
        n_feature_modes: usize,
        lambda: f64,
        response_mean: DenseTensor,
    ) -> Result<Self> {
        let shape = coefficient.shape().to_vec();
        if n_feature_modes == 0 || n_feature_modes >= shape.len() {
            return Err(Error::InvalidArgument(format!(
                "{n_feature_modes} feature modes for a coefficient of order {}",
                shape.len()
            )));
        }
        if intercept.shape()[0] != 1 || intercept.shape()[1..] != shape[n_feature_modes..] {
            return Err(Error::DimensionMismatch(format!(
                "intercept {:?} does not match coefficient {:?}",
                intercept.shape(),
                shape
            )));
        }
        if response_mean.shape() != intercept.shape() {
            return Err(Error::DimensionMismatch("response mean shape".into()));
        }
        if !(lambda >= 0.0) {
            return Err(Error::InvalidArgument(format!("lambda {lambda} is negative")));
        }
        let factors = shape.iter().map(|&e| DMatrix::identity(e, e)).collect();
        Ok(TarModel {
            intercept,
            coefficient: TuckerFactors::new(coefficient, factors)?,
            lambda,
            ranks: shape,
            response_mean,
            n_feature_modes,
        })
    }

    pub fn intercept(&self) -> &DenseTensor {
        &self.intercept
    }

    pub fn coefficient(&self) -> &TuckerFactors {
        &self.coefficient
    }

    pub fn coefficient_tensor(&self) -> DenseTensor {
        self.coefficient.reconstruct()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    /// Training-sample mean of the response, the centring constant of R².
    pub fn response_mean(&self) -> &DenseTensor {
        &self.response_mean
    }

    pub fn n_feature_modes(&self) -> usize {
        self.n_feature_modes
    }
}

/// `X_t = panel_t`, `Y_t = panel_{t+lag}`; mode 0 indexes samples in both.
pub fn build_lagged_pairs(panel: &DenseTensor, lag: usize) -> Result<(DenseTensor, DenseTensor)> {
    let t = panel.shape()[0];
    if lag == 0 {
        return Err(Error::InvalidArgument("lag must be at least 1".into()));
    }
    if lag >= t {
        return Err(Error::InvalidArgument(format!(
            "lag {lag} leaves no samples from {t} observations"
        )));
    }
    Ok((panel.slice_first(0..t - lag)?, panel.slice_first(lag..t)?))
}

fn check_pair(x: &DenseTensor, y: &DenseTensor) -> Result<()> {
    if x.order() < 2 || y.order() < 2 {
        return Err(Error::InvalidShape(
            "regressor and response need a sample mode plus at least one more".into(),
        ));
    }
    if x.shape()[0] != y.shape()[0] {
        return Err(Error::DimensionMismatch(format!(
            "regressor has {} samples, response has {}",
            x.shape()[0],
            y.shape()[0]
        )));
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("regressor".into()));
    }
    if !y.is_finite() {
        return Err(Error::NonFinite("response".into()));
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda {lambda} must be nonnegative")));
    }
    Ok(())
}

fn centered(x: &DenseTensor) -> Result<(DenseTensor, DenseTensor)> {
    let mean = x.mean_over_first();
    Ok((x.sub_broadcast_first(&mean)?, mean))
}

/// Ridge solution `(XᵀX + λI)⁻¹ XᵀY` on centred sample-mode unfoldings,
/// returned as a `(Π I) × (Π J)` matrix.
pub fn closed_form_fit(x: &DenseTensor, y: &DenseTensor, lambda: f64) -> Result<DMatrix<f64>> {
    check_pair(x, y)?;
    check_lambda(lambda)?;
    let (xc, _) = centered(x)?;
    let (yc, _) = centered(y)?;
    let xu = xc.as_matrix(1);
    let yu = yc.as_matrix(1);
    ridge_from_gram(&xu.tr_mul(&xu), &xu.tr_mul(&yu), lambda)
}

fn ridge_from_gram(xtx: &DMatrix<f64>, xty: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    let mut lhs = xtx.clone();
    for i in 0..lhs.nrows() {
        lhs[(i, i)] += lambda;
    }
    spd_solve(&lhs, xty, "closed-form ridge solve")
}

struct Problem {
    n_feature_modes: usize,
    coef_shape: Vec<usize>,
    xu: DMatrix<f64>,
    yu: DMatrix<f64>,
    xtx: DMatrix<f64>,
    xty: DMatrix<f64>,
    /// Per feature mode `d`: Gram matrices with feature mode `d` moved last.
    leading: Vec<(DMatrix<f64>, DMatrix<f64>)>,
    /// Per response mode `e`: `XᵀY` with response mode `e` moved last.
    trailing: Vec<DMatrix<f64>>,
    lambda: f64,
}

fn move_last(n: usize, d: usize) -> Vec<usize> {
    (0..n).filter(|&m| m != d).chain(std::iter::once(d)).collect()
}

impl Problem {
    fn new(xc: &DenseTensor, yc: &DenseTensor, lambda: f64) -> Result<Self> {
        let n = xc.order() - 1;
        let m = yc.order() - 1;
        let coef_shape: Vec<usize> = xc.shape()[1..].iter().chain(&yc.shape()[1..]).copied().collect();
        let xu = xc.as_matrix(1);
        let yu = yc.as_matrix(1);
        let xtx = xu.tr_mul(&xu);
        let xty = xu.tr_mul(&yu);
        let mut leading = Vec::with_capacity(n);
        for d in 0..n {
            let perm: Vec<usize> = std::iter::once(0)
                .chain(move_last(n, d).into_iter().map(|k| k + 1))
                .collect();
            let xp = xc.permute(&perm)?.as_matrix(1);
            leading.push((xp.tr_mul(&xp), xp.tr_mul(&yu)));
        }
        let mut trailing = Vec::with_capacity(m);
        for e in 0..m {
            let perm: Vec<usize> = std::iter::once(0)
                .chain(move_last(m, e).into_iter().map(|k| k + 1))
                .collect();
            let yp = yc.permute(&perm)?.as_matrix(1);
            trailing.push(xu.tr_mul(&yp));
        }
        Ok(Problem {
            n_feature_modes: n,
            coef_shape,
            xu,
            yu,
            xtx,
            xty,
            leading,
            trailing,
            lambda,
        })
    }

    fn order(&self) -> usize {
        self.coef_shape.len()
    }

    fn features(&self) -> usize {
        self.xtx.nrows()
    }

    fn objective(&self, b: &DenseTensor) -> f64 {
        let bm = b.as_matrix(self.n_feature_modes);
        let resid = &self.yu - &self.xu * &bm;
        resid.norm_squared() + self.lambda * bm.norm_squared()
    }

    fn residual_sq(&self, b: &DenseTensor) -> f64 {
        let bm = b.as_matrix(self.n_feature_modes);
        (&self.yu - &self.xu * &bm).norm_squared()
    }

    /// Exact minimiser over the core with the factors fixed.
    fn update_core(&self, factors: &[DMatrix<f64>], ranks: &[usize]) -> Result<DenseTensor> {
        let n = self.n_feature_modes;
        let ur = kron_all(&factors[..n]);
        let uc = kron_all(&factors[n..]);
        let xur = &self.xtx * &ur;
        let mut lhs = ur.tr_mul(&xur);
        if self.lambda > 0.0 {
            lhs += ur.tr_mul(&ur) * self.lambda;
        }
        let rhs = ur.tr_mul(&self.xty) * &uc;
        let left = spd_solve(&lhs, &rhs, "core update")?;
        let g = spd_solve(&uc.tr_mul(&uc), &left.transpose(), "core update (response factors)")?.transpose();
        DenseTensor::from_matrix(&g, ranks.to_vec())
    }

    /// Core multiplied by every factor except the one at `skip`.
    fn partial(&self, core: &DenseTensor, factors: &[DMatrix<f64>], skip: usize) -> Result<DenseTensor> {
        let mut c = core.clone();
        for (d, u) in factors.iter().enumerate() {
            if d != skip {
                c = mode_multiply(&c, u, d)?;
            }
        }
        Ok(c)
    }

    /// Ridge solve for feature-side factor `d`; `c` is the core times every other factor.
    fn update_feature_factor(&self, c: &DenseTensor, d: usize) -> Result<DMatrix<f64>> {
        let n = self.n_feature_modes;
        let rank = c.shape()[d];
        let extent = self.coef_shape[d];
        let perm: Vec<usize> = move_last(n, d).into_iter().chain(n..self.order()).collect();
        let cp = c.permute(&perm)?;
        let q: usize = self.coef_shape[n..].iter().product();
        let a_len = self.features() / extent;
        // rows (a, r), columns q
        let cm = cp.as_matrix(n);
        let e = &cm * cm.transpose();
        let (xtx_d, xty_d) = &self.leading[d];
        debug_assert_eq!(cm.ncols(), q);

        let dim = extent * rank;
        let mut lhs = DMatrix::zeros(dim, dim);
        for i in 0..extent {
            for ip in 0..extent {
                for a in 0..a_len {
                    for b in 0..a_len {
                        let g = xtx_d[(a * extent + i, b * extent + ip)];
                        if g == 0.0 {
                            continue;
                        }
                        for r in 0..rank {
                            for rp in 0..rank {
                                lhs[(i * rank + r, ip * rank + rp)] += g * e[(a * rank + r, b * rank + rp)];
                            }
                        }
                    }
                }
            }
        }
        if self.lambda > 0.0 {
            for r in 0..rank {
                for rp in 0..rank {
                    let k: f64 = (0..a_len).map(|a| e[(a * rank + r, a * rank + rp)]).sum();
                    for i in 0..extent {
                        lhs[(i * rank + r, i * rank + rp)] += self.lambda * k;
                    }
                }
            }
        }
        let t = xty_d * cm.transpose();
        let rhs = DMatrix::from_fn(dim, 1, |row, _| {
            let (i, r) = (row / rank, row % rank);
            (0..a_len).map(|a| t[(a * extent + i, a * rank + r)]).sum()
        });
        let sol = psd_solve_min_norm(&lhs, &rhs);
        Ok(DMatrix::from_fn(extent, rank, |i, r| sol[(i * rank + r, 0)]))
    }

    fn update_response_factor(&self, c: &DenseTensor, d: usize) -> Result<DMatrix<f64>> {
        let n = self.n_feature_modes;
        let m = self.order() - n;
        let e = d - n;
        let rank = c.shape()[d];
        let extent = self.coef_shape[d];
        let perm: Vec<usize> = (0..n).chain(move_last(m, e).into_iter().map(|k| k + n)).collect();
        // rows p, columns (c, s)
        let cm = c.permute(&perm)?.as_matrix(n);
        let c_len = cm.ncols() / rank;
        let z = cm.tr_mul(&(&self.xtx * &cm));
        let mut s = DMatrix::from_fn(rank, rank, |r, rp| {
            (0..c_len).map(|k| z[(k * rank + r, k * rank + rp)]).sum()
        });
        if self.lambda > 0.0 {
            let kk = cm.tr_mul(&cm);
            for r in 0..rank {
                for rp in 0..rank {
                    let v: f64 = (0..c_len).map(|k| kk[(k * rank + r, k * rank + rp)]).sum();
                    s[(r, rp)] += self.lambda * v;
                }
            }
        }
        let w = self.trailing[e].tr_mul(&cm);
        let rhs = DMatrix::from_fn(extent, rank, |j, r| {
            (0..c_len).map(|k| w[(k * extent + j, k * rank + r)]).sum()
        });
        let sol = psd_solve_min_norm(&s, &rhs.transpose());
        Ok(sol.transpose())
    }
}

/// Replaces `factor` by an orthonormal basis and pushes the triangular part into the core.
fn normalize_factor(core: &DenseTensor, factor: DMatrix<f64>, d: usize) -> Result<(DenseTensor, DMatrix<f64>)> {
    let qr = factor.qr();
    let r = qr.r();
    let q = qr.q();
    let core = mode_multiply(core, &r, d)?;
    Ok((core, q))
}

fn initial_factors(problem: &Problem, ranks: &[usize], seed: u64) -> Result<Vec<DMatrix<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spectral = if problem.features() <= SPECTRAL_INIT_MAX_FEATURES {
        ridge_from_gram(&problem.xtx, &problem.xty, problem.lambda)
            .or_else(|_| {
                let scale = problem.xtx.trace() / problem.features() as f64;
                ridge_from_gram(&problem.xtx, &problem.xty, 1e-6 * scale.max(f64::MIN_POSITIVE))
            })
            .ok()
    } else {
        None
    };
    match spectral {
        Some(bm) => {
            let b = DenseTensor::from_matrix(&bm, problem.coef_shape.clone())?;
            (0..problem.order())
                .map(|d| Ok(leading_left_singular(&unfold(&b, d)?, ranks[d], &mut rng)))
                .collect()
        }
        None => {
            log::debug!("closed-form start unavailable, using random orthonormal factors");
            Ok((0..problem.order())
                .map(|d| random_orthonormal(problem.coef_shape[d], ranks[d], &mut rng))
                .collect())
        }
    }
}

/// Penalised alternating least squares for the Tucker-structured coefficient.
pub fn als_fit(
    x: &DenseTensor,
    y: &DenseTensor,
    ranks: &RankSpec,
    lambda: f64,
    config: &FitConfig,
) -> Result<(TarModel, FitReport)> {
    check_pair(x, y)?;
    check_lambda(lambda)?;
    if config.max_sweeps == 0 || !(config.rel_tol > 0.0) {
        return Err(Error::InvalidArgument(
            "max_sweeps >= 1 and rel_tol > 0 required".into(),
        ));
    }
    let (xc, x_mean) = centered(x)?;
    let (yc, y_mean) = centered(y)?;
    let problem = Problem::new(&xc, &yc, lambda)?;
    let ranks = ranks.resolve(&problem.coef_shape)?;
    let n = problem.n_feature_modes;

    let mut factors = initial_factors(&problem, &ranks, config.seed)?;
    let mut core = DenseTensor::zeros(ranks.clone())?;
    let mut trace = Vec::new();
    let mut converged = false;

    for sweep in 0..config.max_sweeps {
        core = problem.update_core(&factors, &ranks)?;
        for d in 0..problem.order() {
            let c = problem.partial(&core, &factors, d)?;
            let u = if d < n {
                problem.update_feature_factor(&c, d)?
            } else {
                problem.update_response_factor(&c, d)?
            };
            let (new_core, q) = normalize_factor(&core, u, d)?;
            core = new_core;
            factors[d] = q;
        }
        let b = TuckerFactors::new(core.clone(), factors.clone())?.reconstruct();
        let obj = problem.objective(&b);
        if !obj.is_finite() {
            return Err(Error::NonFinite(format!("objective at sweep {}", sweep + 1)));
        }
        if let Some(&prev) = trace.last() {
            let prev: f64 = prev;
            if prev - obj <= config.rel_tol * prev.max(f64::MIN_POSITIVE) {
                converged = true;
            }
        }
        trace.push(obj);
        if converged {
            break;
        }
    }

    let coefficient = TuckerFactors::new(core, factors)?;
    let b = coefficient.reconstruct();
    let pairing = ModePairing::autoregressive(n)?;
    let fitted_mean = contract(&x_mean, &b, &pairing)?;
    let intercept = y_mean.lin_comb(1.0, &fitted_mean, -1.0)?;
    log::debug!(
        "als_fit lambda={lambda} sweeps={} objective={:?} residual={}",
        trace.len(),
        trace.last(),
        problem.residual_sq(&b)
    );
    let report = FitReport {
        n_sweeps: trace.len(),
        objective_trace: trace,
        converged,
        predicted_r2: None,
    };
    Ok((
        TarModel {
            intercept,
            coefficient,
            lambda,
            ranks,
            response_mean: y_mean,
            n_feature_modes: n,
        },
        report,
    ))
}

/// `A + ⟨X, B⟩`, broadcasting the intercept over samples.
pub fn predict(model: &TarModel, x: &DenseTensor) -> Result<DenseTensor> {
    let n = model.n_feature_modes;
    let b_shape = model.coefficient.target_shape();
    if x.order() != n + 1 || x.shape()[1..] != b_shape[..n] {
        return Err(Error::DimensionMismatch(format!(
            "regressor {:?} does not match coefficient {:?}",
            x.shape(),
            b_shape
        )));
    }
    let b = model.coefficient_tensor();
    let fitted = contract(x, &b, &ModePairing::autoregressive(n)?)?;
    let neg = model.intercept.map(|v| -v);
    fitted.sub_broadcast_first(&neg)
}

/// `1 - ‖Y - Ŷ‖² / ‖Y - ȳ_train‖²`.
pub fn predicted_r2(model: &TarModel, x_test: &DenseTensor, y_test: &DenseTensor) -> Result<f64> {
    check_pair(x_test, y_test)?;
    let yhat = predict(model, x_test)?;
    if yhat.shape() != y_test.shape() {
        return Err(Error::DimensionMismatch(format!(
            "prediction {:?} vs response {:?}",
            yhat.shape(),
            y_test.shape()
        )));
    }
    let sse = y_test.lin_comb(1.0, &yhat, -1.0)?.frobenius_norm_sq();
    let sst = y_test.sub_broadcast_first(&model.response_mean)?.frobenius_norm_sq();
    if sst == 0.0 {
        return Err(Error::ZeroTotalSumOfSquares);
    }
    Ok(1.0 - sse / sst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSelection {
    pub best_lambda: f64,
    /// `(lambda, predicted R²)` in ascending lambda order.
    pub table: Vec<(f64, f64)>,
}

/// Chronological split: the first `train_fraction` of samples train.
pub fn split_train_test(
    x: &DenseTensor,
    y: &DenseTensor,
    train_fraction: f64,
) -> Result<((DenseTensor, DenseTensor), (DenseTensor, DenseTensor))> {
    let n = x.shape()[0];
    let n_train = (train_fraction * n as f64).floor() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::InvalidArgument(format!(
            "train fraction {train_fraction} of {n} samples leaves an empty split"
        )));
    }
    Ok((
        (x.slice_first(0..n_train)?, y.slice_first(0..n_train)?),
        (x.slice_first(n_train..n)?, y.slice_first(n_train..n)?),
    ))
}

/// Lambda grid search on one lag-1 split of a `(T, I_1, …)` panel.
pub fn select_lambda(panel: &DenseTensor, ranks: &RankSpec, config: &FitConfig) -> Result<LambdaSelection> {
    let (x, y) = build_lagged_pairs(panel, 1)?;
    select_lambda_pairs(&x, &y, ranks, config)
}

pub fn select_lambda_pairs(
    x: &DenseTensor,
    y: &DenseTensor,
    ranks: &RankSpec,
    config: &FitConfig,
) -> Result<LambdaSelection> {
    config.validate()?;
    if config.lambda_grid.is_empty() {
        return Err(Error::InvalidArgument("lambda grid is empty".into()));
    }
    check_pair(x, y)?;
    let ((x_tr, y_tr), (x_te, y_te)) = split_train_test(x, y, config.train_fraction)?;
    let mut grid = config.lambda_grid.clone();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let score = |lambda: f64| -> Result<(f64, f64)> {
        let (model, _) = als_fit(&x_tr, &y_tr, ranks, lambda, config)?;
        Ok((lambda, predicted_r2(&model, &x_te, &y_te)?))
    };
    #[cfg(feature = "parallel")]
    let table: Vec<(f64, f64)> = {
        use rayon::prelude::*;
        grid.par_iter().map(|&l| score(l)).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let table: Vec<(f64, f64)> = grid.iter().map(|&l| score(l)).collect::<Result<_>>()?;

    let mut best: Option<(f64, f64)> = None;
    for &(lambda, r2) in &table {
        if r2.is_nan() {
            continue;
        }
        if best.is_none_or(|(_, b)| r2 > b) {
            best = Some((lambda, r2));
        }
    }
    let (best_lambda, _) =
        best.ok_or_else(|| Error::InvalidArgument("predicted R² undefined for every lambda".into()))?;
    Ok(LambdaSelection { best_lambda, table })
}
