//! Simulation study: scenario generation, estimator grid and metrics.

mod dgp;
mod grid;

pub use dgp::{
    generate, generate_n, replicate_rng, Confounding, DgpConfig, Effect, GeneratedData, Scenario,
    ScenarioSpec, Strength,
};
pub use grid::{
    mix_seed, run_grid, run_scenarios, CellMetrics, CellReport, EstimatorSpec, Interval,
    ReplicateOutcome, SimReport,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{window, Window};

    #[test]
    fn twelve_distinct_scenarios() {
        let all = Scenario::all();
        assert_eq!(all.len(), 12);
        for (i, s) in all.iter().enumerate() {
            assert_eq!(s.index(), i);
            assert_eq!(s.to_string().parse::<Scenario>().unwrap(), *s);
        }
        let mut labels: Vec<String> = all.iter().map(|s| s.to_string()).collect();
        labels.sort();
        labels.dedup();
        assert_eq!(labels.len(), 12);
    }

    #[test]
    fn true_risk_ratios() {
        let rr = |e| {
            ScenarioSpec::new(Scenario {
                strength: Strength::Strong,
                confounding: Confounding::Low,
                effect: e,
            })
            .true_rr()
        };
        assert_eq!(rr(Effect::None), 1.0);
        assert!((rr(Effect::Low) - 2.117).abs() < 1e-3);
        assert!((rr(Effect::High) - 4.4817).abs() < 1e-4);
    }

    #[test]
    fn generation_is_deterministic_per_replicate() {
        let spec = ScenarioSpec {
            n: 2_000,
            ..ScenarioSpec::new("weak/high/low".parse().unwrap())
        };
        assert_eq!(generate(&spec, 3).unwrap(), generate(&spec, 3).unwrap());
        assert_ne!(generate(&spec, 3).unwrap(), generate(&spec, 4).unwrap());
        let other = ScenarioSpec {
            seed: 9,
            ..spec.clone()
        };
        assert_ne!(generate(&spec, 3).unwrap(), generate(&other, 3).unwrap());
    }

    #[test]
    fn generated_records_are_valid() {
        for sc in Scenario::all() {
            let spec = ScenarioSpec {
                n: 5_000,
                ..ScenarioSpec::new(sc)
            };
            let g = generate_n(&spec, 0, 5_000).unwrap();
            assert!(g.observations.iter().all(|o| o.x > 0.01 && o.x < 0.6));
            assert!((g.clipped as f64) < 0.001 * 5_000.0);
        }
    }

    #[test]
    fn overflowing_outcome_model_is_rejected() {
        let mut spec = ScenarioSpec::new("strong/high/high".parse().unwrap());
        spec.dgp.b0 = -1.0;
        spec.dgp.b_u_high = 1.0;
        assert!(matches!(
            generate(&spec, 0),
            Err(crate::Error::ProbabilityOverflow { .. })
        ));
    }

    #[test]
    fn single_cell_report_with_gmm() {
        let spec = ScenarioSpec {
            replications: 1,
            bandwidths: vec![0.1],
            ..ScenarioSpec::new("strong/low/high".parse().unwrap())
        };
        let est = [EstimatorSpec::Gmm { bootstrap: 200 }];
        let rep = run_grid(&spec, &est, &crate::mcmc::SamplerConfig::default()).unwrap();
        assert_eq!(rep.cells.len(), 1);
        let cell = &rep.cells[0];
        let m = cell.metrics.unwrap();
        // recompute the single estimate independently
        let data = generate(&spec, 0).unwrap();
        let s = window(&data, &Window::new(0.2, 0.1).unwrap()).unwrap();
        let plug = crate::data::plug_in_rrt(&s.cell_counts()).unwrap();
        assert!((m.mean_estimate - plug).abs() < 1e-8 * plug);
        assert!((m.bias - (plug - spec.true_rr())).abs() < 1e-8 * plug);
        assert!(m.rmse >= m.bias.abs());
    }

    #[test]
    fn estimator_parsing() {
        assert_eq!(
            EstimatorSpec::parse("gmm", false, 10).unwrap(),
            EstimatorSpec::Gmm { bootstrap: 10 }
        );
        let e = EstimatorSpec::parse("pois.flex+c", false, 10).unwrap();
        assert_eq!(e.label(), "pois.flex+c");
        assert_eq!(
            EstimatorSpec::parse("pois.pois", true, 10).unwrap().label(),
            "pois.pois+c"
        );
        let err = EstimatorSpec::parse("wald", false, 10)
            .unwrap_err()
            .to_string();
        assert!(err.contains("gmm") && err.contains("pois.prod.flex"));
    }

    #[test]
    fn zero_replications_is_a_config_error() {
        let spec = ScenarioSpec {
            replications: 0,
            ..ScenarioSpec::new(Scenario::all()[0])
        };
        assert!(matches!(
            run_grid(&spec, &[EstimatorSpec::default()], &Default::default()),
            Err(crate::Error::Config(_))
        ));
    }
}
