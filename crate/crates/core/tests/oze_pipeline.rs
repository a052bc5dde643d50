use rcm_oze::expansion::{assemble_up_to, series_p, series_q, DiscretePhi, IntegrationMethod};
use rcm_oze::oze::{
    mean_cluster_from_q, oze_residual, solve_oze_fourier, solve_oze_neumann, GridFunction, GridGeometry,
};
use rcm_oze::ConnectionFunction;

fn desk() -> DiscretePhi {
    let phi = ConnectionFunction::gilbert(1, 1.0).unwrap();
    DiscretePhi::new(&phi, GridGeometry::new(1, 256, 1.0 / 16.0).unwrap()).unwrap()
}

#[test]
fn series_through_the_solver() {
    let phi = desk();
    let coeffs = assemble_up_to(3, &phi, IntegrationMethod::Elimination).unwrap();
    for t in [0.05, 0.1, 0.2] {
        let p = series_p(t, &coeffs, phi.mass()).unwrap();
        let q = series_q(t, &coeffs, phi.mass()).unwrap();
        let sol = solve_oze_fourier(&p.values, t).unwrap();
        assert!(sol.min_denominator > 0.0);
        let res = oze_residual(&p.values, &sol.q, t).unwrap();
        assert!(res <= 1e-10 * p.values.sup_norm(), "t={t}: residual {res}");
        let diff = sol.q.max_abs_diff(&q.values).unwrap();
        eprintln!(
            "t={t}: |Q(P_N) - Q_N| = {diff:.3e}, tails P {:.3e} Q {:.3e} (c2 {:.3} / {:.3})",
            p.tail_bound, q.tail_bound, p.c2, q.c2
        );
        assert!(diff <= p.tail_bound + q.tail_bound, "t={t}");
        let m = mean_cluster_from_q(&sol.q, t).unwrap();
        let direct = 1.0 + t * p.values.integral();
        assert!((m.mean_size / direct - 1.0).abs() < 1e-8);
    }
}

#[test]
fn neumann_agrees_on_the_series() {
    let phi = desk();
    let coeffs = assemble_up_to(3, &phi, IntegrationMethod::Elimination).unwrap();
    let t = 0.1;
    let p = series_p(t, &coeffs, phi.mass()).unwrap().values;
    assert!(t * p.l1_norm() <= 0.5);
    let f = solve_oze_fourier(&p, t).unwrap();
    let n = solve_oze_neumann(&p, t, 200, 1e-14).unwrap();
    assert!(f.q.max_abs_diff(&n.q).unwrap() <= 1e-8);
}

#[test]
fn grid_files_round_trip() {
    let phi = desk();
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("phi.csv");
    let bin = dir.path().join("phi.bin");
    phi.grid().write_csv(std::fs::File::create(&csv).unwrap()).unwrap();
    phi.grid().write_binary(std::fs::File::create(&bin).unwrap()).unwrap();
    let a = GridFunction::read_csv(std::io::BufReader::new(std::fs::File::open(&csv).unwrap())).unwrap();
    let b = GridFunction::read_binary(std::fs::File::open(&bin).unwrap()).unwrap();
    assert_eq!(&b, phi.grid());
    assert_eq!(a.geometry(), phi.geometry());
    assert!(a.max_abs_diff(phi.grid()).unwrap() == 0.0);
}
