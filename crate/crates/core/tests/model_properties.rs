use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson};

use rcm_oze::model::{sample_rcm, BoxGeometry, ConnectionFunction};
use rcm_oze::RngSpec;

fn desk() -> (ConnectionFunction, BoxGeometry) {
    (ConnectionFunction::gilbert(1, 1.0).unwrap(), BoxGeometry::periodic(1, 40.0).unwrap())
}

#[test]
fn origin_degree_is_poisson() {
    let (phi, b) = desk();
    let t = 0.5;
    let reps = 100_000u64;
    let max = 6usize;
    let counts = (0..reps)
        .into_par_iter()
        .fold(
            || vec![0u64; max + 1],
            |mut acc, r| {
                let s = sample_rcm(t, &phi, &b, &[vec![0.0]], RngSpec::task_stream(11, 0, r)).unwrap();
                acc[s.degree(0).min(max)] += 1;
                acc
            },
        )
        .reduce(|| vec![0u64; max + 1], |a, b| a.iter().zip(&b).map(|(x, y)| x + y).collect());
    let pois = Poisson::new(t * phi.mass()).unwrap();
    let mut chi2 = 0.0;
    for k in 0..=max {
        let p = if k < max { pois.pmf(k as u64) } else { 1.0 - (0..max).map(|j| pois.pmf(j as u64)).sum::<f64>() };
        let expected = p * reps as f64;
        chi2 += (counts[k] as f64 - expected).powi(2) / expected;
    }
    let p_value = 1.0 - ChiSquared::new(max as f64).unwrap().cdf(chi2);
    assert!(p_value > 1e-3, "chi2 = {chi2}, p = {p_value}");
}

#[test]
fn point_count_mean() {
    let (phi, b) = desk();
    let t = 0.3;
    let n = 4000u64;
    let total: usize = (0..n)
        .into_par_iter()
        .map(|r| sample_rcm(t, &phi, &b, &[], RngSpec::new(5, r)).unwrap().len())
        .sum();
    let mean = total as f64 / n as f64;
    let expected = t * b.volume();
    assert!((mean - expected).abs() <= 4.0 * (expected / n as f64).sqrt(), "{mean} vs {expected}");
}

#[test]
fn clusters_partition_and_are_symmetric() {
    for (d, side) in [(1usize, 12.0), (2, 8.0)] {
        let phi = ConnectionFunction::gilbert(d, 1.0).unwrap();
        let b = BoxGeometry::periodic(d, side).unwrap();
        for r in 0..20 {
            let s = sample_rcm(0.6, &phi, &b, &[vec![0.0; d]], RngSpec::new(3, r)).unwrap();
            let clusters: Vec<Vec<usize>> = (0..s.len()).map(|i| s.cluster_of(i)).collect();
            let mut seen = vec![0usize; s.len()];
            for (i, c) in clusters.iter().enumerate() {
                assert!(c.contains(&i));
                for &j in c {
                    assert!(clusters[j].contains(&i), "asymmetric membership");
                }
                // count each distinct cluster once, from its smallest member
                if c[0] == i {
                    c.iter().for_each(|&j| seen[j] += 1);
                }
            }
            assert!(seen.iter().all(|&k| k == 1), "clusters do not partition the vertices");
        }
    }
}

#[test]
fn edges_respect_truncation_and_reproduce() {
    let phi = ConnectionFunction::exponential(2, 2.0).unwrap();
    let b = BoxGeometry::periodic(2, 40.0).unwrap();
    let spec = RngSpec::new(9, 4);
    let s = sample_rcm(0.05, &phi, &b, &[vec![0.0, 0.0]], spec).unwrap();
    for &(i, j) in s.edges() {
        assert!(b.distance(s.point(i as usize), s.point(j as usize)) <= phi.truncation_radius());
    }
    let again = sample_rcm(0.05, &phi, &b, &[vec![0.0, 0.0]], spec).unwrap();
    assert_eq!(serde_json::to_vec(&s).unwrap(), serde_json::to_vec(&again).unwrap());
}
