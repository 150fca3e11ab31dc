//! End-to-end gradient checks: the full pipeline loss against central finite
//! differences, over every learnable parameter.

use automan_core::autodiff::{finite_difference_check_many, Tape, Var};
use automan_core::data::{
    dataset_from_parts, fit_statistics, synthesize, ColumnKind, ColumnSpec, Dataset, Labels,
    Schema, TaskKind,
};
use automan_core::pipeline::{PipelineConfig, PipelineModel};
use automan_core::rng::Rng;
use automan_core::Result;

fn fd_check_model(model: &PipelineModel, dataset: &Dataset) -> f64 {
    let batch = model.batch(dataset, &dataset.all_rows()).unwrap();
    let build = |tape: &mut Tape, vars: &[Var]| -> Result<Var> {
        model.batch_loss(tape, vars, &batch)
    };
    let thetas = model.params.values().to_vec();
    finite_difference_check_many(&build, &thetas, 1e-4).unwrap()
}

#[test]
fn full_pipeline_gradients_match_finite_differences() {
    // 8 samples, 6 numeric features, regression with MAE loss. The
    // product+log distribution keeps every transformed column at O(0.1..1)
    // scale, so no parameter's true gradient sits below what central
    // differences can resolve; the step size uses the top of the allowed
    // range for the same reason.
    let ds = synthesize("product+log", 8, 6, 48).unwrap();
    let stats = fit_statistics(&ds).unwrap();
    let model = PipelineModel::new(&ds, stats, PipelineConfig::default(), 48).unwrap();
    let err = fd_check_model(&model, &ds);
    assert!(err < 1e-4, "max relative error {err}");
}

#[test]
fn mixed_schema_gradients_match_finite_differences() {
    // Categorical + temporal routing exercises the GroupBy masks and the
    // temporal masks alongside the numeric bank.
    let schema = Schema::new(
        vec![
            ColumnSpec { name: "x1".into(), kind: ColumnKind::Numerical },
            ColumnSpec { name: "x2".into(), kind: ColumnKind::Numerical },
            ColumnSpec { name: "x3".into(), kind: ColumnKind::Numerical },
            ColumnSpec { name: "grp".into(), kind: ColumnKind::Categorical },
            ColumnSpec { name: "ts".into(), kind: ColumnKind::Temporal { lookback: 4 } },
        ],
        "y",
        TaskKind::Classification,
    )
    .unwrap();
    let n = 8;
    let mut rng = Rng::new(1913);
    let numeric: Vec<f64> = (0..n * 3).map(|_| rng.range(0.3, 2.0)).collect();
    let cat_codes: Vec<usize> = (0..n).map(|i| i % 2).collect();
    let windows: Vec<f64> = (0..n * 4).map(|_| rng.normal()).collect();
    let labels = Labels::Classes { values: (0..n).map(|i| i % 2).collect(), classes: 2 };
    let ds = dataset_from_parts(
        schema,
        numeric,
        cat_codes,
        vec![vec!["a".into(), "b".into()]],
        vec![windows],
        labels,
    )
    .unwrap();

    let stats = fit_statistics(&ds).unwrap();
    let config = PipelineConfig { h: 5, h_glb: 12, hidden: 32 };
    let model = PipelineModel::new(&ds, stats, config, 1913).unwrap();
    let err = fd_check_model(&model, &ds);
    assert!(err < 1e-4, "max relative error {err}");
}
