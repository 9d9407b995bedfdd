mod support;

use meta4diag_core::priors::{
    parse_correlation_prior, parse_variance_prior, CorrelationPrior, PcCorrelation, PcStrategy, PriorSpec,
    TablePrior, VariancePrior,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use support::adaptive_simpson;

fn variance_families() -> Vec<VariancePrior> {
    let table = TablePrior::new(vec![0.1, 0.5, 1.0, 2.0, 4.0], vec![0.2, 1.0, 0.8, 0.3, 0.05], 0.0, f64::INFINITY)
        .unwrap();
    vec![
        VariancePrior::pc(3.0, 0.05).unwrap(),
        VariancePrior::pc(1.0, 0.01).unwrap(),
        VariancePrior::Tnormal { mean: 0.0, variance: 10.0 },
        VariancePrior::Tnormal { mean: 1.5, variance: 0.5 },
        VariancePrior::Hcauchy { scale: 2.0 },
        VariancePrior::Unif { lower: 0.0, upper: 5.0 },
        VariancePrior::Unif { lower: 0.5, upper: 2.0 },
        VariancePrior::Invgamma { shape: 0.25, rate: 0.025 },
        VariancePrior::Invgamma { shape: 2.0, rate: 1.0 },
        VariancePrior::Table(table),
    ]
}

fn correlation_families() -> Vec<CorrelationPrior> {
    let table = TablePrior::new(vec![-0.9, -0.3, 0.0, 0.5, 0.95], vec![0.1, 0.6, 1.0, 0.7, 0.2], -1.0, 1.0).unwrap();
    vec![
        CorrelationPrior::Normal { mean: 0.0, variance: 5.0 },
        CorrelationPrior::Normal { mean: -1.0, variance: 0.4 },
        CorrelationPrior::Beta { a: 2.0, b: 3.0 },
        CorrelationPrior::Beta { a: 0.7, b: 0.7 },
        CorrelationPrior::Table(table),
        CorrelationPrior::Pc(fig2(PcStrategy::Left)),
        CorrelationPrior::Pc(fig2(PcStrategy::Right)),
        CorrelationPrior::Pc(fig2(PcStrategy::Both)),
        CorrelationPrior::Pc(catheter()),
    ]
}

fn fig2(strategy: PcStrategy) -> PcCorrelation {
    match strategy {
        PcStrategy::Left => PcCorrelation::calibrate(strategy, -0.2, Some(0.4), Some((-0.8, 0.1)), None),
        PcStrategy::Right => PcCorrelation::calibrate(strategy, -0.2, Some(0.4), None, Some((0.8, 0.1))),
        PcStrategy::Both => PcCorrelation::calibrate(strategy, -0.2, None, Some((-0.8, 0.1)), Some((0.8, 0.1))),
    }
    .unwrap()
}

fn catheter() -> PcCorrelation {
    PcCorrelation::calibrate(PcStrategy::Left, -0.1, Some(0.5), Some((-0.95, 0.05)), None).unwrap()
}

#[test]
fn variance_priors_integrate_to_one() {
    for p in variance_families() {
        let internal = adaptive_simpson(&|t| p.ln_density_internal(t).exp(), -40.0, 40.0, 1e-10);
        assert!((internal - 1.0).abs() < 1e-3, "{p:?}: internal scale {internal}");
        let native = adaptive_simpson(&|t| p.variance_density(t.exp()) * t.exp(), -60.0, 60.0, 1e-10);
        assert!((native - 1.0).abs() < 1e-3, "{p:?}: variance scale {native}");
    }
}

#[test]
fn correlation_priors_integrate_to_one() {
    for p in correlation_families() {
        let internal = adaptive_simpson(&|z| p.ln_density_internal(z).exp(), -1000.0, 1000.0, 1e-10);
        assert!((internal - 1.0).abs() < 1e-3, "{p:?}: {internal}");
    }
}

#[test]
fn pc_variance_tail_matches_the_contrast() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let u = rng.random_range(0.05..10.0);
        let a = rng.random_range(0.001..0.999);
        let p = VariancePrior::pc(u, a).unwrap();
        let rate = p.pc_rate().unwrap();
        assert!(((-rate * u).exp() - a).abs() < 1e-6);
        let upper = u + 60.0 / rate;
        let tail = adaptive_simpson(&|s| p.native_density(s), u, upper, 1e-12);
        assert!((tail - a).abs() < 1e-6, "u={u} a={a}: {tail}");
    }
}

fn numeric_cdf(p: &PcCorrelation, x: f64) -> f64 {
    let prior = CorrelationPrior::Pc(*p);
    adaptive_simpson(&|z| prior.ln_density_internal(z).exp(), -1000.0, x.atanh(), 1e-12)
}

fn numeric_upper(p: &PcCorrelation, x: f64) -> f64 {
    let prior = CorrelationPrior::Pc(*p);
    adaptive_simpson(&|z| prior.ln_density_internal(z).exp(), x.atanh(), 1000.0, 1e-12)
}

#[test]
fn pc_correlation_contrasts_are_reproduced() {
    let cases = [
        (fig2(PcStrategy::Left), vec![(-0.2, 0.4), (-0.8, 0.1)]),
        (fig2(PcStrategy::Right), vec![(-0.2, 0.4), (0.8, 0.9)]),
        (fig2(PcStrategy::Both), vec![(-0.8, 0.1), (0.8, 0.9)]),
        (catheter(), vec![(-0.1, 0.5), (-0.95, 0.05)]),
    ];
    for (p, contrasts) in cases {
        for (x, target) in contrasts {
            let cdf = if target > 0.5 && x > p.rho0 { 1.0 - numeric_upper(&p, x) } else { numeric_cdf(&p, x) };
            assert!((cdf - target).abs() < 1e-4, "{p:?}: P(rho < {x}) = {cdf}, want {target}");
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..20 {
        let rho0 = rng.random_range(-0.6..0.6);
        let omega = rng.random_range(0.2..0.8);
        // Tail probabilities near omega give rates so small that the mass
        // sits closer to |rho| = 1 than double precision resolves.
        let u1 = rng.random_range(-0.97..rho0 - 0.1);
        let u2 = rng.random_range(rho0 + 0.1..0.97);
        let a1 = rng.random_range(0.01..omega * 0.3);
        let a2 = rng.random_range(0.01..(1.0 - omega) * 0.3);
        let left = PcCorrelation::calibrate(PcStrategy::Left, rho0, Some(omega), Some((u1, a1)), None).unwrap();
        assert!((numeric_cdf(&left, u1) - a1).abs() < 1e-4, "{left:?} u1={u1} a1={a1}: {}", numeric_cdf(&left, u1));
        assert!((numeric_cdf(&left, rho0) - omega).abs() < 1e-4);
        let right = PcCorrelation::calibrate(PcStrategy::Right, rho0, Some(omega), None, Some((u2, a2))).unwrap();
        assert!((numeric_upper(&right, u2) - a2).abs() < 1e-4);
        assert!((1.0 - numeric_upper(&right, rho0) - omega).abs() < 1e-4);
        if let Ok(both) = PcCorrelation::calibrate(PcStrategy::Both, rho0, None, Some((u1, a1)), Some((u2, a2))) {
            assert!((numeric_cdf(&both, u1) - a1).abs() < 1e-4);
            assert!((numeric_upper(&both, u2) - a2).abs() < 1e-4);
        }
    }
}

#[test]
fn seven_slot_layout_parses_the_documented_example() {
    let par = [Some(1.0), Some(-0.1), Some(0.5), Some(-0.95), Some(0.05), None, None];
    let parsed = parse_correlation_prior("PC", &par).unwrap();
    assert_eq!(parsed, CorrelationPrior::Pc(catheter()));
    let json = r#"{"var.prior":"PC","var.par":[3,0.05],"cor.prior":"PC","cor.par":[1,-0.1,0.5,-0.95,0.05,null,null]}"#;
    let spec: PriorSpec = serde_json::from_str(json).unwrap();
    assert!(spec.resolve().is_ok());
    assert!(parse_variance_prior("PC", &[Some(3.0), Some(1.5)]).is_err());
    assert!(parse_correlation_prior("PC", &[Some(1.0), Some(-0.2), Some(0.1), Some(-0.8), Some(0.3), None, None]).is_err());
}
