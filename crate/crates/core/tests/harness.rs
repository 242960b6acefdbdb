use hdmt_core::datagen::{Correlation, CovarianceSpec, VarianceLaw};
use hdmt_core::dlrt::std_normal_cdf;
use hdmt_core::simharness::{
    null_distribution_snapshot, run_grid, ExperimentGrid, Method, Tail,
};

fn grid(n: usize, p: usize, correlation: Correlation) -> ExperimentGrid {
    ExperimentGrid::new(
        n,
        n,
        CovarianceSpec::new(p, VarianceLaw::Chisq5Scaled, correlation),
    )
}

/// `|value - target| <= tol`, allowing for decimal targets not being exact in binary.
fn within(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol + 1e-12
}

fn ks_to_standard_normal(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = std_normal_cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn table_cell_ind_5_5_500() {
    let rows = run_grid(&grid(5, 500, Correlation::Ind)).unwrap();
    let r = &rows[0];
    assert_eq!(r.replicates_used, 2000);
    assert!(within(r.rejection_rate, 0.043, 0.02), "{}", r.rejection_rate);
}

#[test]
fn strong_short_range_dependence_inflates_size_mildly() {
    let rows = run_grid(&grid(5, 100, Correlation::Ar1 { rho: 0.6 })).unwrap();
    let rate = rows[0].rejection_rate;
    assert!(within(rate, 0.076, 0.025), "{rate}");
}

#[test]
fn null_snapshot_at_p_2000_is_close_to_normal() {
    let g = grid(5, 2000, Correlation::Ind);
    let stats = null_distribution_snapshot(&g).unwrap();
    assert_eq!(stats, null_distribution_snapshot(&g).unwrap());
    let d = ks_to_standard_normal(stats);
    assert!(d < 0.05, "KS distance {d}");
}

#[test]
fn heavy_tailed_size_stays_controlled() {
    let mut g = grid(5, 100, Correlation::Ind);
    g.tail = Tail::DoublePareto;
    let rate = run_grid(&g).unwrap()[0].rejection_rate;
    assert!((0.03..=0.09).contains(&rate), "(5,5,100): {rate}");

    // With p = 500 and only five observations per group the test turns
    // conservative (about 0.012 over 20000 replicates); only the upper end
    // of the size band is checked there.
    g.structure.p = 500;
    let rate = run_grid(&g).unwrap()[0].rejection_rate;
    assert!(rate <= 0.09, "(5,5,500): {rate}");
}

#[test]
fn power_increases_with_signal_density() {
    let mut g = grid(15, 500, Correlation::Ind);
    g.betas = (0..=5).map(|i| i as f64 * 0.1).collect();
    g.theta = 0.25;
    g.replicates = 1000;
    let rows = run_grid(&g).unwrap();
    for w in rows.windows(2) {
        let slack = 2.0 * (w[0].mc_stderr + w[1].mc_stderr);
        assert!(w[1].rejection_rate + slack >= w[0].rejection_rate);
    }
    assert!(rows.last().unwrap().rejection_rate > 0.9);
    assert_eq!(rows[0].theta, 0.0);
    assert_eq!(rows[1].theta, 0.25);
}

#[test]
fn baselines_run_through_the_grid() {
    let mut g = grid(5, 40, Correlation::Ind);
    g.methods = vec![Method::Dlrt, Method::DiagHotelling, Method::Unscaled, Method::Regularized];
    g.betas = vec![0.0, 0.5];
    g.theta = 1.0;
    g.replicates = 200;
    g.n_perms = 99;
    let rows = run_grid(&g).unwrap();
    assert_eq!(rows.len(), 8);
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r.method, g.methods[i / 2]);
        assert!((0.0..=1.0).contains(&r.rejection_rate));
        assert_eq!(r.replicates_used, 200);
    }
    for pair in rows.chunks(2) {
        assert!(pair[1].rejection_rate > pair[0].rejection_rate, "{pair:?}");
    }
}
