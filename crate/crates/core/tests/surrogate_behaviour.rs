use tpms_core::acquisition::{sample_candidates, select_batch, AcquisitionConfig, UncertaintyForm};
use tpms_core::curve_lab::CanonicalCurve;
use tpms_core::surrogate::{train_ensemble, EnsembleModel, MlpSpec, TrainingConfig, TrainingRecord, TrainingSet};
use tpms_core::tpms_field::{Primitive, WeightVector};

const STRAIN_MAX: f64 = 0.5;

fn loop_for(f: f64) -> CanonicalCurve<f64> {
    let grid = CanonicalCurve::grid_for(STRAIN_MAX);
    let slope = 2.0 + 3.0 * f;
    let load: Vec<f64> = grid.iter().map(|e| slope * e).collect();
    let unload: Vec<f64> = grid.iter().map(|e| slope * e * (e / STRAIN_MAX).powi(2)).collect();
    CanonicalCurve::new(STRAIN_MAX, load, unload).unwrap()
}

/// Designs on the gyroid-diamond edge with a diamond fraction of at most 0.3.
fn near_task() -> TrainingSet<f64> {
    let records = (0..16)
        .map(|i| {
            let f = 0.3 * i as f64 / 15.0;
            TrainingRecord {
                weights: WeightVector::pair(Primitive::Diamond, Primitive::Gyroid, f).unwrap(),
                curve: loop_for(f),
            }
        })
        .collect();
    TrainingSet::new(records).unwrap()
}

fn trained(seed: u64) -> EnsembleModel<f64> {
    let config = TrainingConfig {
        ensemble_size: 6,
        max_epochs: 120,
        patience: 30,
        strain_stride: 4,
        holdout_fraction: 0.0,
        seed,
        ..TrainingConfig::default()
    };
    train_ensemble(&MlpSpec::compact(), &near_task(), &config).unwrap()
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

#[test]
fn spread_grows_away_from_the_data() {
    let near: Vec<WeightVector<f64>> = (0..9)
        .map(|i| WeightVector::pair(Primitive::Diamond, Primitive::Gyroid, 0.3 * i as f64 / 8.0).unwrap())
        .collect();
    let far: Vec<WeightVector<f64>> = [
        Primitive::SchwarzP,
        Primitive::Iwp,
        Primitive::Lidinoid,
        Primitive::SplitP,
    ]
    .iter()
    .flat_map(|&p| [0.7, 0.85, 1.0].map(|f| WeightVector::pair(p, Primitive::Neovius, f).unwrap()))
    .collect();
    for seed in 0..5 {
        let model = trained(seed);
        let sd = |ws: &[WeightVector<f64>]| -> Vec<f64> {
            model.score_pool(ws, STRAIN_MAX).iter().map(|p| p.1.sqrt()).collect()
        };
        let (n, f) = (median(sd(&near)), median(sd(&far)));
        assert!(f > n, "seed {seed}: far {f} vs near {n}");
    }
}

#[test]
fn exploration_weight_buys_uncertainty() {
    let model = trained(7);
    let pool = sample_candidates(3000, 3).unwrap();
    let spread = |kappa: f64| -> f64 {
        let config = AcquisitionConfig {
            kappa,
            radius: 0.2,
            batch_size: 20,
            exclusion: Vec::new(),
            uncertainty: UncertaintyForm::StdDev,
        };
        let sel = select_batch(&pool, &model, &config).unwrap();
        sel.picks.iter().map(|p| p.variance.sqrt()).sum::<f64>() / sel.picks.len() as f64
    };
    let greedy = spread(0.0);
    let explore = spread(10.0);
    assert!(explore >= greedy, "κ = 10: {explore}, κ = 0: {greedy}");
}

#[test]
fn near_designs_are_fitted() {
    let model = trained(1);
    let w = WeightVector::pair(Primitive::Diamond, Primitive::Gyroid, 0.15).unwrap();
    let (mean, _) = model.predict_dissipation(&w, STRAIN_MAX);
    let truth = tpms_core::curve_lab::energy_dissipation(&loop_for(0.15));
    assert!((mean - truth).abs() < 0.25 * truth, "{mean} vs {truth}");
}
