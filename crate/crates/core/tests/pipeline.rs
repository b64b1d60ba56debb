//! Generate, fit and score a small portfolio end to end.

use proptest::prelude::*;
use tci_core::centrality::{featurize_with, WeightScheme};
use tci_core::likelihood::ModelData;
use tci_core::predict::{adev_table, posterior_sample, reserve, score, PredictConfig};
use tci_core::sem::{fit, FitConfig};
use tci_core::synth::{generate, GenConfig};

fn quick() -> FitConfig {
    FitConfig {
        iterations: 8,
        mh_steps: 4,
        retain: vec![2, 4],
        averaging_window: 3,
        ..FitConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn fitted_models_produce_valid_scores(seed in any::<u64>(), latent in any::<bool>()) {
        let gen = generate(&GenConfig { target_truncated_share: Some(0.3), ..GenConfig::small(seed) }).unwrap();
        let g = &gen.graph;
        let cfg = FitConfig { latent_effects: latent, seed, ..quick() };
        let fitted = fit(g, WeightScheme::Unit, &cfg).unwrap();
        let est = &fitted.estimate;
        prop_assert_eq!(est.trace.len(), cfg.iterations);
        prop_assert!(est.params.beta[0] >= 0.0);
        prop_assert!(est.params.psi > 0.0 && est.params.rho.abs() < 1.0);
        if !latent {
            prop_assert_eq!(est.params.beta, [0.0; 3]);
            prop_assert_eq!(est.params.nu, [0.0; 3]);
        }

        let data = ModelData::new(g, featurize_with(g, fitted.weight_scheme, &fitted.scaling).unwrap()).unwrap();
        let pc = PredictConfig { draws: 30, sweeps: 60, seed };
        let sample = posterior_sample(&data, &est.params, &est.latents, &pc).unwrap();
        prop_assert_eq!(sample.len(), if latent { 30 } else { 1 });
        let report = score(&data, &sample).unwrap();
        prop_assert_eq!(report.scores.len(), g.connections().len());
        for (s, c) in report.scores.iter().zip(g.connections()) {
            prop_assert_eq!(s.id, c.id.0);
            prop_assert!((0.0..=1.0).contains(&s.p_pos) && (0.0..=1.0).contains(&s.p_star));
            prop_assert!(s.p_pos_se >= 0.0);
            match s.p_ur {
                Some(p) => prop_assert!(!c.observed_claim && (0.0..=1.0).contains(&p)),
                None => prop_assert!(c.observed_claim),
            }
        }
        prop_assert!(report.reserve >= 0.0);
        prop_assert!((report.reserve - reserve(&report.scores)).abs() < 1e-12);
        let table = adev_table(&report, &gen.truth.actual_claim).unwrap();
        prop_assert!(table.observed >= 0.0 && table.unreported >= 0.0 && table.complete >= 0.0);
    }
}

#[test]
fn posterior_sampling_is_reproducible() {
    let gen = generate(&GenConfig::small(5)).unwrap();
    let fitted = fit(&gen.graph, WeightScheme::Unit, &quick()).unwrap();
    let data = ModelData::new(&gen.graph, featurize_with(&gen.graph, WeightScheme::Unit, &fitted.scaling).unwrap()).unwrap();
    let pc = PredictConfig { draws: 20, sweeps: 40, seed: 9 };
    let a = score(&data, &posterior_sample(&data, &fitted.estimate.params, &fitted.estimate.latents, &pc).unwrap()).unwrap();
    let b = score(&data, &posterior_sample(&data, &fitted.estimate.params, &fitted.estimate.latents, &pc).unwrap()).unwrap();
    assert_eq!(format!("{a:?}"), format!("{b:?}"));
}
