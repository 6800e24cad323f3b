use regcls_core::model::TrainConfig;
use regcls_core::sampling::{build_dataset, Regime, SamplingSpec, ScenarioSpec};
use regcls_core::synth::function_from_seed;
use regcls_core::train::{train, Task};

#[test]
fn clean_uniform_training_reduces_error_tenfold_on_most_functions() {
    let mut reduced = 0;
    let mut report = Vec::new();
    for index in 0..10 {
        let f = function_from_seed(index).unwrap();
        let data = build_dataset(&f, &ScenarioSpec::clean(), &SamplingSpec::new(Regime::Uniform), 0).unwrap();
        let out = train(&data.train, &Task::regression(), &TrainConfig::default()).unwrap();
        let ratio = out.initial_train_mse / out.final_train_mse;
        report.push(format!("f{index}: {ratio:.1}x"));
        if ratio >= 10.0 {
            reduced += 1;
        }
    }
    assert!(reduced >= 8, "{}", report.join(", "));
}
