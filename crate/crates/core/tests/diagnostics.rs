use divfree::diagnostics::{
    alpha_exponent, cfl_sweep, convergence_study, energy_identity_residual, energy_residual, thread_budget, CflForm, StudyConfig,
};
use divfree::forms::SparseMat;
use divfree::manufactured::taylor_green;

fn short(cfg: StudyConfig<f64>, t: f64) -> StudyConfig<f64> {
    StudyConfig { final_time: t, ..cfg }
}

#[test]
fn energy_residual_of_zero_fields_is_zero() {
    let m = SparseMat::from_triplets(3, 3, vec![(0, 0, 1.0), (1, 1, 2.0), (2, 2, 3.0)]);
    let z = [0.0; 3];
    assert_eq!(energy_residual(&m, &z, &z, &z, 0.0, 0.0, 0.1), 0.0);
}

#[test]
fn energy_residual_matches_its_definition() {
    let m = SparseMat::from_triplets(2, 2, vec![(0, 0, 2.0), (0, 1, 0.5), (1, 0, 0.5), (1, 1, 1.0)]);
    let (u, w, v): ([f64; 2], [f64; 2], [f64; 2]) = ([1.0, -1.0], [0.5, 0.25], [0.3, 0.1]);
    let r = energy_residual(&m, &u, &w, &v, 0.7, 0.2, 0.1);
    let d = [v[0] - w[0], v[1] - w[1]];
    let expected = m.bilinear(&v, &v) - m.bilinear(&u, &u) + 0.1 * 0.7 + 0.1 * 0.2 - m.bilinear(&d, &d);
    assert!((r - expected).abs() <= 1e-15);
    assert_eq!(energy_identity_residual(4.0, 3.0, 0.5, 10.0, 5.0, 0.1), 3.0 - 4.0 + 1.0 + 0.5 - 0.5);
}

#[test]
fn alpha_recovers_power_laws() {
    for alpha in [1.0, 4.0 / 3.0, 1.2] {
        let rho = 0.37;
        let (h0, h1) = (1.0 / 40.0, 1.0 / 80.0);
        let a = alpha_exponent(h0, rho * f64::powf(h0, alpha), h1, rho * f64::powf(h1, alpha));
        assert!((a - alpha).abs() <= 1e-12);
    }
}

#[test]
fn cfl_schedules() {
    assert_eq!(CflForm::Standard.tau(0.5, 0.25), Some(0.125));
    assert!((CflForm::FourThirds.tau(1.0, 0.125f64).unwrap() - 0.0625).abs() <= 1e-15);
    assert_eq!(CflForm::Search.tau(1.0, 0.1f64), None);
}

#[test]
fn thread_budget_is_at_least_one() {
    assert_eq!(thread_budget(Some(3)), 3);
    assert_eq!(thread_budget(Some(0)), 1);
    assert!(thread_budget(None) >= 1);
}

#[test]
fn convergence_study_tabulates_rates() {
    let p = taylor_green(0.0).unwrap();
    let cfg = short(StudyConfig::new(1, vec![4, 8, 16], CflForm::FourThirds, 1.0), 0.25);
    let t = convergence_study(&cfg, &p).unwrap();
    assert_eq!(t.rows.iter().map(|r| r.n).collect::<Vec<_>>(), vec![4, 8, 16]);
    assert!(t.rows[0].l2_rate.is_none() && t.rows[0].h1_rate.is_none());
    for w in t.rows.windows(2) {
        let (a, b) = (w[0].errors().unwrap(), w[1].errors().unwrap());
        assert!(b.l2 < a.l2);
        let rate = (a.l2 / b.l2).ln() / 2f64.ln();
        assert!((w[1].l2_rate.unwrap() - rate).abs() <= 1e-12);
    }
    for r in &t.rows {
        assert!(r.report.max_div <= 1e-10);
        assert!(r.report.final_velocity.is_none());
        assert_eq!(r.report.records.last().unwrap().t, 0.25);
    }
}

#[test]
fn convergence_study_records_blow_up_rows() {
    let p = taylor_green(0.0).unwrap();
    let cfg = StudyConfig::new(1, vec![8, 16], CflForm::Standard, 2.0);
    let t = convergence_study(&cfg, &p).unwrap();
    assert!(t.rows.iter().any(|r| r.report.blow_up.is_some()));
    for r in &t.rows {
        if r.report.blow_up.is_some() {
            assert!(r.errors().is_none());
            assert!(r.l2_rate.is_none());
        }
    }
}

#[test]
fn studies_reject_bad_configurations() {
    let p = taylor_green(0.0).unwrap();
    assert!(convergence_study(&StudyConfig::new(1, vec![], CflForm::Standard, 0.5), &p).is_err());
    assert!(convergence_study(&StudyConfig::new(1, vec![8, 4], CflForm::Standard, 0.5), &p).is_err());
    assert!(convergence_study(&StudyConfig::new(1, vec![4], CflForm::Search, 0.5), &p).is_err());
    assert!(convergence_study(&StudyConfig::new(1, vec![4], CflForm::Standard, 0.0), &p).is_err());
    assert!(convergence_study(&StudyConfig::new(3, vec![4], CflForm::Standard, 0.5), &p).is_err());
    assert!(cfl_sweep(&StudyConfig::new(1, vec![], CflForm::Search, 0.5), &p).is_err());
}

#[test]
fn search_sweep_finds_monotone_limits() {
    let p = taylor_green(0.0).unwrap();
    let cfg = StudyConfig::new(1, vec![4, 8], CflForm::Search, 0.0);
    let s = cfl_sweep(&cfg, &p).unwrap();
    assert_eq!(s.rows.len(), 2);
    let taus: Vec<f64> = s.rows.iter().map(|r| r.tau_max.unwrap()).collect();
    assert!(taus[1] <= taus[0]);
    // h = 1/8: the limit lies in [1/24, 1/12]
    assert!((1.0 / 24.0..=1.0 / 12.0).contains(&taus[1]));
    for r in &s.rows {
        let m = r.denominator.unwrap();
        assert_eq!(r.tau_max.unwrap(), 1.0 / m as f64);
        assert!(r.report.as_ref().unwrap().max_div <= 1e-10);
        let trials: Vec<_> = s.trace.iter().filter(|t| t.n == r.n).collect();
        assert_eq!(trials[0].denominator, Some(2 * r.n));
        assert!(trials.last().unwrap().stable);
        assert!(trials[..trials.len() - 1].iter().all(|t| !t.stable && t.blow_up.is_some()));
        for w in trials.windows(2) {
            assert_eq!(w[1].denominator.unwrap(), w[0].denominator.unwrap() + 2);
        }
    }
    assert!(s.rows[0].alpha.is_none());
    let a = alpha_exponent(0.25, taus[0], 0.125, taus[1]);
    assert_eq!(s.rows[1].alpha, Some(a));
}

#[test]
fn fixed_sweeps_report_blow_up_as_missing_limit() {
    let p = taylor_green(0.0).unwrap();
    let cfg = StudyConfig::new(1, vec![8], CflForm::Standard, 0.7);
    let s = cfl_sweep(&cfg, &p).unwrap();
    assert!(s.rows[0].tau_max.is_none() && s.rows[0].report.is_none());
    assert!(!s.trace[0].stable);
}

#[test]
fn sweeps_are_deterministic() {
    let p = taylor_green(0.0).unwrap();
    let cfg = short(StudyConfig::new(1, vec![4, 6], CflForm::FourThirds, 1.0), 0.5);
    let a = cfl_sweep(&cfg, &p).unwrap();
    let b = cfl_sweep(&StudyConfig { threads: Some(1), ..cfg }, &p).unwrap();
    for (x, y) in a.rows.iter().zip(&b.rows) {
        assert_eq!(x.tau_max, y.tau_max);
        assert_eq!(x.report.as_ref().unwrap().final_errors, y.report.as_ref().unwrap().final_errors);
    }
}
