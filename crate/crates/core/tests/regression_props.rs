#![allow(clippy::needless_range_loop)]

mod common;

use common::*;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use tarnet::regression::{
    als_fit, build_lagged_pairs, closed_form_fit, predict, predicted_r2, select_lambda, FitConfig, RankSpec, TarModel,
};
use tarnet::tensor::{contract, DenseTensor, ModePairing, TuckerFactors};
use tarnet::Error;

fn orthonormal(rows: usize, cols: usize, r: &mut impl Rng) -> DMatrix<f64> {
    to_dmatrix(&random_matrix(rows, cols, r))
        .qr()
        .q()
        .columns(0, cols)
        .into_owned()
}

/// `(X, Y)` with `Y = ⟨X, B⟩ + σ E`, samples on mode 0.
fn simulate(b: &DenseTensor, n_feat: usize, n: usize, sigma: f64, r: &mut impl Rng) -> (DenseTensor, DenseTensor) {
    let mut xs = vec![n];
    xs.extend(&b.shape()[..n_feat]);
    let x = random_tensor(&xs, r);
    let y = contract(&x, b, &ModePairing::autoregressive(n_feat).unwrap()).unwrap();
    let noise = random_tensor(y.shape(), r);
    (x, y.lin_comb(1.0, &noise, sigma).unwrap())
}

fn cfg() -> FitConfig {
    FitConfig {
        max_sweeps: 500,
        rel_tol: 1e-12,
        ..FitConfig::default()
    }
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<f64> {
    (0..m.nrows())
        .flat_map(|r| (0..m.ncols()).map(move |c| m[(r, c)]))
        .collect()
}

#[test]
fn lagged_pairs_by_enumeration() {
    let panel = DenseTensor::new(vec![4, 2, 2], (0..16).map(f64::from).collect()).unwrap();
    let (x, y) = build_lagged_pairs(&panel, 1).unwrap();
    assert_eq!(x.shape(), &[3, 2, 2]);
    for t in 0..3 {
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(at(&x, &[t, i, j]), at(&panel, &[t, i, j]));
                assert_eq!(at(&y, &[t, i, j]), at(&panel, &[t + 1, i, j]));
            }
        }
    }
    assert!(build_lagged_pairs(&panel, 4).is_err());
}

#[test]
fn noiseless_full_rank_identification() {
    let mut r = rng(100);
    let b_true = random_tensor(&[3, 2, 2, 2], &mut r);
    let (x, y) = simulate(&b_true, 2, 200, 0.0, &mut r);
    let (model, report) = als_fit(&x, &y, &RankSpec::Full, 0.0, &cfg()).unwrap();
    let obj = *report.objective_trace.last().unwrap();
    assert!(obj <= 1e-16 * y.frobenius_norm_sq(), "objective {obj}");
    assert!(frob_rel_err(model.coefficient_tensor().data(), b_true.data()) < 1e-6);
    let yhat = predict(&model, &x).unwrap();
    assert!(frob_rel_err(yhat.data(), y.data()) < 1e-6);
}

#[test]
fn full_rank_matches_closed_form_and_normal_equations() {
    let mut r = rng(101);
    let b_true = random_tensor(&[3, 2, 3, 2], &mut r);
    let (x, y) = simulate(&b_true, 2, 120, 0.5, &mut r);
    let closed = closed_form_fit(&x, &y, 5.0).unwrap();
    let oracle: Vec<f64> = ridge_oracle(&x, &y, 5.0).concat();
    assert!(frob_rel_err(&matrix_rows(&closed), &oracle) < 1e-10);
    let (model, _) = als_fit(&x, &y, &RankSpec::Full, 5.0, &cfg()).unwrap();
    assert!(frob_rel_err(model.coefficient_tensor().data(), &oracle) < 1e-8);
}

#[test]
fn closed_form_small_system_matches_hand_solve() {
    let mut r = rng(102);
    let x = random_tensor(&[50, 6], &mut r);
    let y = random_tensor(&[50, 4], &mut r);
    let got = closed_form_fit(&x, &y, 1.0).unwrap();
    assert_eq!(got.shape(), (6, 4));
    let want = ridge_oracle(&x, &y, 1.0).concat();
    assert!(frob_rel_err(&matrix_rows(&got), &want) < 1e-12);
}

#[test]
fn closed_form_orthonormal_regressors() {
    let mut r = rng(103);
    let raw = to_dmatrix(&random_matrix(40, 3, &mut r));
    let means = raw.row_mean();
    let centred = DMatrix::from_fn(40, 3, |i, j| raw[(i, j)] - means[j]);
    let q = centred.qr().q().columns(0, 3).into_owned();
    let x = DenseTensor::from_fn(vec![40, 3], |ix| q[(ix[0], ix[1])]).unwrap();
    let y = random_tensor(&[40, 2], &mut r);
    let got = closed_form_fit(&x, &y, 0.0).unwrap();
    let want = q.transpose() * y.as_matrix(1);
    assert!((got - want).norm() < 1e-12);
}

#[test]
fn closed_form_shrinks_under_huge_lambda() {
    let mut r = rng(104);
    let x = random_tensor(&[60, 4], &mut r);
    let y = random_tensor(&[60, 3], &mut r);
    let scale = closed_form_fit(&x, &y, 0.0).unwrap().amax();
    let shrunk = closed_form_fit(&x, &y, 1e12).unwrap().amax();
    assert!(shrunk < 1e-6 * scale, "{shrunk} vs {scale}");
}

#[test]
fn singular_unregularised_system_is_reported() {
    let mut r = rng(105);
    let x = random_tensor(&[3, 4, 2], &mut r);
    let y = random_tensor(&[3, 2], &mut r);
    let err = als_fit(&x, &y, &RankSpec::Full, 0.0, &cfg()).unwrap_err();
    assert!(matches!(err, Error::Singular(_)), "{err:?}");
    assert!(err.to_string().contains("lambda"));
    assert!(als_fit(&x, &y, &RankSpec::Full, 1.0, &cfg()).is_ok());
}

#[test]
fn rank_and_finiteness_errors() {
    let mut r = rng(106);
    let x = random_tensor(&[10, 3], &mut r);
    let mut y = random_tensor(&[10, 2], &mut r);
    assert!(matches!(
        als_fit(&x, &y, &RankSpec::Explicit(vec![4, 2]), 1.0, &cfg()),
        Err(Error::RankExceedsExtent { .. })
    ));
    y.data_mut()[3] = f64::NAN;
    assert!(matches!(
        als_fit(&x, &y, &RankSpec::Full, 1.0, &cfg()),
        Err(Error::NonFinite(_))
    ));
}

#[test]
fn low_rank_factor_subspaces_are_recovered() {
    let mut r = rng(107);
    let shape = [5, 4, 5, 4];
    let ranks = [2, 2, 2, 2];
    let core = random_tensor(&ranks, &mut r).map(|v| 3.0 * v);
    let truth: Vec<DMatrix<f64>> = shape
        .iter()
        .zip(&ranks)
        .map(|(&n, &k)| orthonormal(n, k, &mut r))
        .collect();
    let b_true = TuckerFactors::new(core, truth.clone()).unwrap().reconstruct();
    let (x, y) = simulate(&b_true, 2, 400, 0.01, &mut r);
    let (model, _) = als_fit(&x, &y, &RankSpec::Explicit(ranks.to_vec()), 0.0, &cfg()).unwrap();
    for (d, (u, fitted)) in truth.iter().zip(model.coefficient().factors()).enumerate() {
        let q = fitted.clone().qr().q().columns(0, fitted.ncols()).into_owned();
        let cosines = (u.transpose() * q).singular_values();
        let worst = cosines.min().clamp(-1.0, 1.0).acos().to_degrees();
        assert!(worst < 5.0, "mode {d}: largest principal angle {worst}°");
    }
}

#[test]
fn shrinkage_is_monotone_in_lambda() {
    let mut r = rng(108);
    let b_true = random_tensor(&[3, 2, 3, 2], &mut r);
    let (x, y) = simulate(&b_true, 2, 80, 1.0, &mut r);
    let mut prev = f64::INFINITY;
    for lambda in [0.0, 1.0, 5.0, 10.0, 20.0, 50.0, 200.0] {
        let (model, _) = als_fit(&x, &y, &RankSpec::Full, lambda, &cfg()).unwrap();
        let norm = model.coefficient_tensor().frobenius_norm();
        assert!(norm <= prev * (1.0 + 1e-12), "lambda {lambda}: {norm} > {prev}");
        prev = norm;
    }
}

#[test]
fn centering_changes_only_the_intercept() {
    let mut r = rng(109);
    let b_true = random_tensor(&[3, 2, 2], &mut r);
    let (x, y) = simulate(&b_true, 2, 60, 0.3, &mut r);
    let shifted = y.map(|v| v + 7.5);
    let (m1, _) = als_fit(&x, &y, &RankSpec::Full, 2.0, &cfg()).unwrap();
    let (m2, _) = als_fit(&x, &shifted, &RankSpec::Full, 2.0, &cfg()).unwrap();
    let (b1, b2) = (m1.coefficient_tensor(), m2.coefficient_tensor());
    let diff = b1.lin_comb(1.0, &b2, -1.0).unwrap().frobenius_norm();
    assert!(diff < 1e-9, "B moved by {diff}");
    for (a1, a2) in m1.intercept().data().iter().zip(m2.intercept().data()) {
        assert!((a2 - a1 - 7.5).abs() < 1e-9);
    }
}

#[test]
fn residual_matches_unpenalised_objective() {
    let mut r = rng(110);
    for (ranks, lambda) in [(RankSpec::Full, 3.0), (RankSpec::Explicit(vec![2, 1, 2]), 0.5)] {
        let b_true = random_tensor(&[3, 2, 2], &mut r);
        let (x, y) = simulate(&b_true, 2, 70, 0.2, &mut r);
        let (model, report) = als_fit(&x, &y, &ranks, lambda, &cfg()).unwrap();
        let resid = y
            .lin_comb(1.0, &predict(&model, &x).unwrap(), -1.0)
            .unwrap()
            .frobenius_norm();
        let penalty = lambda * model.coefficient_tensor().frobenius_norm_sq();
        let unpenalised = (report.objective_trace.last().unwrap() - penalty).sqrt();
        assert!(
            (resid - unpenalised).abs() < 1e-9 * resid.max(1.0),
            "{resid} vs {unpenalised}"
        );
    }
}

#[test]
fn predict_special_cases() {
    let mut r = rng(111);
    let x = random_tensor(&[5, 2, 3], &mut r);
    let a = random_tensor(&[1, 2, 3], &mut r);
    let zero = DenseTensor::zeros(vec![2, 3, 2, 3]).unwrap();
    let m = TarModel::from_dense(a.clone(), zero, 2, 0.0, a.clone()).unwrap();
    let p = predict(&m, &x).unwrap();
    for t in 0..5 {
        assert_eq!(&p.data()[t * 6..(t + 1) * 6], a.data());
    }
    let ident = DenseTensor::from_fn(vec![2, 3, 2, 3], |ix| (ix[0] == ix[2] && ix[1] == ix[3]) as u8 as f64).unwrap();
    let zeros = DenseTensor::zeros(vec![1, 2, 3]).unwrap();
    let m = TarModel::from_dense(zeros.clone(), ident, 2, 0.0, zeros).unwrap();
    assert_eq!(predict(&m, &x).unwrap(), x);
    assert!(predict(&m, &random_tensor(&[5, 3, 2], &mut r)).is_err());
}

#[test]
fn predicted_r2_cases() {
    let mut r = rng(112);
    let x = random_tensor(&[20, 2], &mut r);
    let b = random_tensor(&[2, 2], &mut r);
    let y = contract(&x, &b, &ModePairing::autoregressive(1).unwrap()).unwrap();
    let mean = y.mean_over_first();
    let perfect =
        TarModel::from_dense(DenseTensor::zeros(vec![1, 2]).unwrap(), b.clone(), 1, 0.0, mean.clone()).unwrap();
    assert!((predicted_r2(&perfect, &x, &y).unwrap() - 1.0).abs() < 1e-12);

    let zero_b = DenseTensor::zeros(vec![2, 2]).unwrap();
    let mean_model = TarModel::from_dense(mean.clone(), zero_b, 1, 0.0, mean.clone()).unwrap();
    assert!(predicted_r2(&mean_model, &x, &y).unwrap().abs() < 1e-12);

    let noisy = y.lin_comb(1.0, &random_tensor(&[20, 2], &mut r), 0.5).unwrap();
    let (model, _) = als_fit(
        &x.slice_first(0..15).unwrap(),
        &noisy.slice_first(0..15).unwrap(),
        &RankSpec::Full,
        1.0,
        &cfg(),
    )
    .unwrap();
    let (xt, yt) = (x.slice_first(15..20).unwrap(), noisy.slice_first(15..20).unwrap());
    let yhat = predict(&model, &xt).unwrap();
    let train_mean: Vec<f64> = (0..2)
        .map(|c| (0..15).map(|t| noisy.data()[t * 2 + c]).sum::<f64>() / 15.0)
        .collect();
    let mut sse = 0.0;
    let mut sst = 0.0;
    for t in 0..5 {
        for c in 0..2 {
            let v = yt.data()[t * 2 + c];
            sse += (v - yhat.data()[t * 2 + c]).powi(2);
            sst += (v - train_mean[c]).powi(2);
        }
    }
    let got = predicted_r2(&model, &xt, &yt).unwrap();
    assert!((got - (1.0 - sse / sst)).abs() < 1e-12);

    let flat = DenseTensor::new(vec![3, 2], vec![1.0; 6]).unwrap();
    let m = TarModel::from_dense(
        DenseTensor::new(vec![1, 2], vec![1.0, 1.0]).unwrap(),
        DenseTensor::zeros(vec![2, 2]).unwrap(),
        1,
        0.0,
        DenseTensor::new(vec![1, 2], vec![1.0, 1.0]).unwrap(),
    )
    .unwrap();
    assert!(matches!(
        predicted_r2(&m, &flat, &flat),
        Err(Error::ZeroTotalSumOfSquares)
    ));
}

/// Deterministic rotation dynamics: `z_{t+1} = z_t Q` with orthogonal `Q`.
pub fn rotation_panel(t_len: usize, shape: &[usize], seed: u64) -> DenseTensor {
    let mut r = rng(seed);
    let p: usize = shape.iter().product();
    let q = orthonormal(p, p, &mut r);
    let mut z = nalgebra::RowDVector::from_vec(gaussian_vec(p, &mut r));
    let mut data = Vec::with_capacity(t_len * p);
    for _ in 0..t_len {
        data.extend(z.iter().copied());
        z = &z * &q;
    }
    let mut full = vec![t_len];
    full.extend(shape);
    DenseTensor::new(full, data).unwrap()
}

#[test]
fn lambda_selection_cases() {
    let noiseless = rotation_panel(200, &[2, 2], 120);
    let grid = |g: &[f64]| FitConfig {
        lambda_grid: g.to_vec(),
        ..cfg()
    };
    let sel = select_lambda(&noiseless, &RankSpec::Full, &grid(&[0.0, 1.0, 5.0])).unwrap();
    assert_eq!(sel.best_lambda, 0.0, "{:?}", sel.table);

    let mut r = rng(121);
    let noise = random_tensor(&[100, 5, 4], &mut r);
    let sel = select_lambda(&noise, &RankSpec::Full, &grid(&[0.0, 50.0])).unwrap();
    assert_eq!(sel.best_lambda, 50.0, "{:?}", sel.table);

    let sel = select_lambda(&noise, &RankSpec::Full, &grid(&[5.0])).unwrap();
    assert_eq!(sel.best_lambda, 5.0);
    assert_eq!(sel.table.len(), 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn objective_trace_never_increases(
        seed in any::<u64>(),
        lambda in prop::sample::select(vec![0.0, 0.1, 1.0, 10.0]),
        r0 in 1usize..=3, r1 in 1usize..=2, r2 in 1usize..=3, r3 in 1usize..=2,
    ) {
        let mut r = rng(seed);
        let b_true = random_tensor(&[3, 2, 3, 2], &mut r);
        let (x, y) = simulate(&b_true, 2, 40, 0.5, &mut r);
        let (_, report) = als_fit(&x, &y, &RankSpec::Explicit(vec![r0, r1, r2, r3]), lambda, &FitConfig { seed, ..cfg() }).unwrap();
        for w in report.objective_trace.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-9), "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn full_rank_als_equals_ridge(seed in any::<u64>(), lambda in 0.1f64..50.0) {
        let mut r = rng(seed);
        let b_true = random_tensor(&[2, 2, 3], &mut r);
        let (x, y) = simulate(&b_true, 2, 30, 1.0, &mut r);
        let (model, _) = als_fit(&x, &y, &RankSpec::Full, lambda, &cfg()).unwrap();
        let want = ridge_oracle(&x, &y, lambda).concat();
        prop_assert!(frob_rel_err(model.coefficient_tensor().data(), &want) < 1e-8);
    }
}
