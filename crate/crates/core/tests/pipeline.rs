use supsom::*;

fn regression_data(seed: u64) -> (Dataset, Dataset) {
    let data: Dataset = synthetic_regression(300, 0.05, &mut rng_from_seed(seed)).unwrap();
    train_test_split(&data, 0.5, &mut rng_from_seed(seed + 1)).unwrap()
}

#[test]
fn model_file_round_trip_preserves_predictions() {
    let (train, test) = regression_data(1);
    let config = Config::new(8, 8).with_iterations(800, 800).with_seed(2);
    let opts = TrainOptions {
        task: Task::Regression,
        scale: true,
    };
    let model = train_model(&train, &config, opts, 0).unwrap();
    let back = SomModel::from_json(&model.to_json().unwrap()).unwrap();
    assert_eq!(back, model);
    assert_eq!(back.predict(&test).unwrap(), model.predict(&test).unwrap());
}

#[test]
fn classification_round_trip_and_output_map() {
    let data: Dataset = synthetic_blobs(200, 3, 9.0, &mut rng_from_seed(3)).unwrap();
    let config = Config::new(5, 6).with_iterations(500, 1000).with_seed(4);
    let opts = TrainOptions {
        task: Task::Classification,
        scale: false,
    };
    let model = train_model(&data, &config, opts, 0).unwrap();
    let back = SomModel::from_json(&model.to_json().unwrap()).unwrap();
    assert_eq!(back.predict(&data).unwrap(), model.predict(&data).unwrap());

    let mut out = Vec::new();
    model.write_output_map(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text.lines().count(), 1 + 30);
    assert!(text.starts_with("row,column,value\n0,0,"));
}

#[test]
fn unsupported_format_version_is_rejected() {
    let (train, _) = regression_data(5);
    let config = Config::new(3, 3).with_iterations(50, 50);
    let opts = TrainOptions {
        task: Task::None,
        scale: false,
    };
    let model = train_model(&train, &config, opts, 0).unwrap();
    let json = model
        .to_json()
        .unwrap()
        .replace("\"format_version\": 1", "\"format_version\": 99");
    assert!(matches!(
        SomModel::from_json(&json),
        Err(SomError::Model(_))
    ));
    assert!(model.predict(&train).is_err());
}

#[test]
fn prediction_selects_features_by_name() {
    let (train, test) = regression_data(6);
    let config = Config::new(6, 6).with_iterations(400, 400).with_seed(1);
    let opts = TrainOptions {
        task: Task::Regression,
        scale: false,
    };
    let model = train_model(&train, &config, opts, 0).unwrap();
    let swapped = test.select_features(&["x1".into(), "x0".into()]).unwrap();
    assert_eq!(
        model.predict(&swapped).unwrap(),
        model.predict(&test).unwrap()
    );
    let missing = test.select_features(&["x0".into()]).unwrap();
    assert!(matches!(
        model.predict(&missing),
        Err(SomError::MissingColumn(_))
    ));
}

#[test]
fn supervised_fit_leaves_map_frozen() {
    let (train, _) = regression_data(7);
    let config = Config::new(7, 7).with_iterations(500, 500).with_seed(3);
    let som = fit_unsupervised(train.features(), &config, &mut rng_from_seed(1)).unwrap();
    let snapshot = som.clone();
    let before = som.transform(train.features()).unwrap();
    let y = train.continuous_labels().unwrap();
    fit_regressor(&som, train.features(), y, &config, &mut rng_from_seed(2)).unwrap();
    assert_eq!(som.transform(train.features()).unwrap(), before);
    assert_eq!(som, snapshot);
}

#[test]
fn single_precision_pipeline_matches_shape_of_double() {
    let data: Dataset32 = synthetic_regression(200, 0.05, &mut rng_from_seed(8)).unwrap();
    let (train, test) = train_test_split(&data, 0.5, &mut rng_from_seed(9)).unwrap();
    let config = Config32::new(8, 8).with_iterations(1000, 1000).with_seed(1);
    let opts = TrainOptions {
        task: Task::Regression,
        scale: false,
    };
    let model: SomModel32 = train_model(&train, &config, opts, 0).unwrap();
    let report = evaluate(&model, Some(&train), Some(&test)).unwrap();
    assert!(report.section("test").unwrap().get("r2").unwrap() > 0.8);
}

#[test]
fn batch_mode_trains_a_usable_map() {
    let (train, test) = regression_data(10);
    let mut config = Config::new(8, 8).with_iterations(30, 1500).with_seed(5);
    config.update_mode = UpdateMode::Batch;
    let opts = TrainOptions {
        task: Task::Regression,
        scale: false,
    };
    let model = train_model(&train, &config, opts, 0).unwrap();
    let report = evaluate(&model, None, Some(&test)).unwrap();
    assert!(
        report.section("test").unwrap().get("r2").unwrap() > 0.8,
        "{}",
        report.render()
    );
}

#[test]
fn cross_validation_scales_per_fold_and_is_seeded() {
    let data: Dataset = synthetic_blobs(150, 3, 9.0, &mut rng_from_seed(11)).unwrap();
    let config = Config::new(5, 5).with_iterations(300, 600).with_seed(12);
    let opts = TrainOptions {
        task: Task::Classification,
        scale: true,
    };
    let a = cross_validate(&data, &config, opts, 4).unwrap();
    let b = cross_validate(&data, &config.clone().with_seed(13), opts, 4).unwrap();
    assert_eq!(a.folds.len(), 4);
    assert_eq!(a.folds.iter().map(|f| f.test_size).sum::<usize>(), 150);
    assert_ne!(a.render(), b.render());
    let mean = a
        .folds
        .iter()
        .map(|f| f.test.get("kappa").unwrap())
        .sum::<f64>()
        / 4.0;
    assert!((a.fold_mean("test", "kappa").unwrap() - mean).abs() <= 1e-12);
}
