use ndarray::Array2;

use rnd_core::capacity::{capacity_diag_from_normalized, log_grid, Spectrum};
use rnd_core::kernel::gram;
use rnd_core::linalg::eigh;
use rnd_core::stats::log_log_slope;
use rnd_core::synth::SyntheticPair;
use rnd_core::{evaluate, fit_full, fit_nystrom, subsample_plan, KernelSpec, Label};

#[test]
fn gram_matrices_are_psd() {
    let pair = SyntheticPair::gauss_scale(2, 1.0, 0.7).unwrap();
    let x = pair.draw(Label::P, 120, 7).unwrap();
    for k in [
        KernelSpec::gaussian(0.8, 2).unwrap(),
        KernelSpec::laplacian(1.5, 2).unwrap(),
        KernelSpec::polynomial(3, 1.0, 10.0, 2).unwrap(),
    ] {
        let g = gram(&k, &x).unwrap();
        let top = eigh(&g).unwrap().eigenvalues;
        let scale = top[0].abs().max(1.0);
        let min = top.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min >= -1e-10 * scale, "{:?}: min eigenvalue {min}", k.family());
    }
}

/// Random orthogonal basis with a prescribed spectrum `i^-2`.
fn power_spectrum_matrix(n: usize) -> Array2<f64> {
    let pts = SyntheticPair::default_pair().draw(Label::P, n * n, 11).unwrap();
    let raw = Array2::from_shape_fn((n, n), |(i, j)| pts.row(i * n + j)[0]);
    let sym = &raw + &raw.t();
    let q = eigh(&sym).unwrap().eigenvectors;
    let lam = Array2::from_diag(&ndarray::Array1::from_iter((1..=n).map(|i| 1.0 / (i as f64 * i as f64))));
    let a = q.dot(&lam).dot(&q.t());
    // Exact symmetry for the factorization's check.
    Array2::from_shape_fn((n, n), |(i, j)| if i <= j { a[[i, j]] } else { a[[j, i]] })
}

#[test]
fn power_decay_gives_half_slope() {
    let n = 400;
    let a = power_spectrum_matrix(n);
    let spectrum = Spectrum::from_normalized(&a).unwrap();
    let alphas = log_grid(10f64.powf(-3.5), 1e-2, 8);
    let n_eff: Vec<f64> = alphas.iter().map(|&al| spectrum.effective_dimension(al)).collect();
    let slope = log_log_slope(&alphas, &n_eff);
    assert!((slope + 0.5).abs() < 0.05, "slope {slope}");

    // The diagonal path sees the same trace.
    for &al in &alphas {
        let diag = capacity_diag_from_normalized(&a, al).unwrap();
        let mean = diag.iter().sum::<f64>() / n as f64;
        let expected: f64 = (1..=n).map(|i| 1.0 / (i as f64 * i as f64)).map(|l| l / (l + al)).sum();
        assert!((mean - expected).abs() < 1e-8 * expected, "alpha {al}: {mean} vs {expected}");
    }
}

#[test]
fn nystrom_equals_rescaled_full_fit_on_subsample() {
    // With N = M, the subsample system is the full system on the subsample
    // with alpha scaled by N / m.
    let (n, m, alpha) = (200, 40, 0.05);
    let pair = SyntheticPair::default_pair();
    let xp = pair.draw(Label::P, n, 21).unwrap();
    let xq = pair.draw(Label::Q, n, 22).unwrap();
    let k = KernelSpec::gaussian(1.0, 1).unwrap();
    let plan = subsample_plan(n, n, m, 23).unwrap();
    let nys = fit_nystrom(&k, &xp, &xq, alpha, &plan).unwrap();
    let sub_p = xp.select(&plan.p_indices).unwrap();
    let sub_q = xq.select(&plan.q_indices).unwrap();
    let reference = fit_full(&k, &sub_p, &sub_q, alpha * n as f64 / m as f64).unwrap();
    let t = pair.draw(Label::P, 50, 24).unwrap();
    let a = evaluate(&nys, &t).unwrap();
    let b = evaluate(&reference, &t).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-10 * y.abs().max(1.0), "{x} vs {y}");
    }
}

#[test]
fn self_ratio_matches_spectral_form() {
    // xq = xp gives beta(X) = A (alpha I + A)^{-1} 1 with A = K / N.
    let xp = SyntheticPair::default_pair().draw(Label::P, 60, 31).unwrap();
    let k = KernelSpec::gaussian(1.0, 1).unwrap();
    let alpha = 0.01;
    let model = fit_full(&k, &xp, &xp, alpha).unwrap();
    let a = gram(&k, &xp).unwrap() / 60.0;
    let eig = eigh(&a).unwrap();
    let ones = ndarray::Array1::<f64>::ones(60);
    let coords = eig.eigenvectors.t().dot(&ones);
    let scaled = ndarray::Array1::from_iter(
        coords.iter().zip(&eig.eigenvalues).map(|(c, l)| c * l.max(0.0) / (l.max(0.0) + alpha)),
    );
    let expected = eig.eigenvectors.dot(&scaled);
    let got = evaluate(&model, &xp).unwrap();
    for (g, e) in got.iter().zip(expected.iter()) {
        assert!((g - e).abs() < 1e-9, "{g} vs {e}");
    }
}
