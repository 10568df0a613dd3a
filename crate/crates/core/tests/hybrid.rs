use yieldnet::ann::{Activation, NetworkParams, Samples};
use yieldnet::data::{synthesize, CropRecord, Dataset, SynthSpec};
use yieldnet::hybrid::{
    ann_ica_fitness, prepare, train_ann_ica, train_ica_weights, HybridConfig, HyperParams, IcaMode,
    TrainingBudget,
};
use yieldnet::ica::{self, IcaSettings};
use yieldnet::search::stream_rng;

fn relabel(ds: &Dataset, f: impl Fn(&CropRecord) -> f64) -> Dataset {
    Dataset::new(
        ds.records()
            .iter()
            .map(|r| CropRecord {
                yield_t_ha: f(r),
                ..r.clone()
            })
            .collect(),
    )
}

fn wheat(seed: u64) -> Dataset {
    let ds = synthesize(&SynthSpec {
        seed,
        n_per_crop: 10,
        ..SynthSpec::default()
    })
    .unwrap();
    ds.filter_crop(&yieldnet::data::Crop::Wheat)
}

fn linear_target(r: &CropRecord) -> f64 {
    1.0 + 0.004 * r.attrs[1] + 0.01 * r.attrs[2] - 0.3 * r.attrs[3] + 0.05 * r.attrs[4]
}

#[test]
fn zero_target_is_learned_to_near_zero() {
    let cfg = HybridConfig::default();
    let p = prepare(&wheat(1), &cfg).unwrap();
    let zeroed = |s: &Samples| Samples::new(s.features().to_vec(), s.n_features(), vec![0.0; s.len()]).unwrap();
    let budget = TrainingBudget {
        epochs: 500,
        patience: 50,
    };
    let x = [6.0, 3.0, 1.0, 0.05];
    let fitness = ann_ica_fitness(&x, &zeroed(&p.fit), &zeroed(&p.val), &budget, 7, 0.5);
    assert!(fitness < 0.05, "fitness {fitness}");
}

#[test]
fn ica_selection_beats_random_draws_on_linear_data() {
    let cfg = HybridConfig {
        ica: IcaSettings {
            n_countries: 12,
            n_imperialists: 3,
            max_decades: 8,
            ..IcaSettings::default()
        },
        search_budget: TrainingBudget {
            epochs: 100,
            patience: 20,
        },
        seed: 5,
        ..HybridConfig::default()
    };
    let ds = relabel(&wheat(2), linear_target);
    let model = train_ann_ica(&ds, &cfg).unwrap();
    let p = prepare(&ds, &cfg).unwrap();
    let model_val = model.params.mse(&p.val).unwrap().sqrt();

    // ten random meta-parameter vectors, each trained the same way
    let bounds = HyperParams::search_bounds();
    let mut rng = stream_rng(99, &[1]);
    let mut random: Vec<f64> = (0..10)
        .map(|_| {
            let h = yieldnet::hybrid::decode_country(&bounds.sample(&mut rng)).unwrap();
            match yieldnet::hybrid::train_candidate(
                &h,
                &p.fit,
                &p.val,
                &cfg.final_budget,
                cfg.init_seed(),
                cfg.init_scale,
            ) {
                Ok((params, _)) => params.mse(&p.val).unwrap().sqrt(),
                Err(_) => f64::INFINITY,
            }
        })
        .collect();
    random.sort_by(f64::total_cmp);
    let median = 0.5 * (random[4] + random[5]);
    assert!(model_val <= median, "{model_val} > {median}");
}

#[test]
fn weight_mode_shrinks_linear_network_loss() {
    let mut hits = 0;
    for seed in 0..20u64 {
        let cfg = HybridConfig {
            ica_mode: IcaMode::Weights,
            ica: IcaSettings {
                n_countries: 20,
                n_imperialists: 3,
                max_decades: 20,
                ..IcaSettings::default()
            },
            network: HyperParams {
                hidden: 2,
                hidden_activation: Activation::Identity,
                output_activation: Activation::Identity,
                learning_rate: 0.1,
            },
            final_budget: TrainingBudget {
                epochs: 500,
                patience: 50,
            },
            seed,
            ..HybridConfig::default()
        };
        let ds = relabel(&wheat(100 + seed), linear_target);
        let model = train_ica_weights(&ds, &cfg).unwrap();
        let p = prepare(&ds, &cfg).unwrap();
        let topo = cfg.network.topology(7).unwrap();
        let initial = ica::initial_countries(&cfg.ica_weight_config(topo.param_count()).unwrap())
            .into_iter()
            .map(|c| NetworkParams::from_flat(topo, c).unwrap().mse(&p.fit).unwrap())
            .fold(f64::INFINITY, f64::min);
        let last = model.params.mse(&p.fit).unwrap();
        if last * 10.0 < initial {
            hits += 1;
        }
    }
    assert!(hits >= 18, "{hits}/20");
}

#[test]
fn weight_mode_handoff_is_exact() {
    let cfg = HybridConfig {
        ica_mode: IcaMode::Weights,
        ica: IcaSettings {
            n_countries: 8,
            n_imperialists: 2,
            max_decades: 5,
            ..IcaSettings::default()
        },
        final_budget: TrainingBudget {
            epochs: 50,
            patience: 10,
        },
        ..HybridConfig::default()
    };
    let model = train_ann_ica(&wheat(3), &cfg).unwrap();
    let one = model.phase_one.as_ref().unwrap();
    assert_eq!(model.history.initial_train_loss.to_bits(), one.loss.to_bits());
    assert!(model.is_consistent());
}

