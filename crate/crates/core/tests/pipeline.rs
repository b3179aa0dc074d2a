use ridgelive::ingest::DatasetManifest;
use ridgelive::pipeline::{
    cmd_extract, cmd_score, cmd_select, cmd_train, features_to_text, history_is_consistent, parse_features, RunConfig,
};
use ridgelive::synth::{write_dataset, DatasetSpec};
use ridgelive::{Label, Split};

fn config() -> RunConfig {
    let mut c = RunConfig { seed: 11, ..RunConfig::default() };
    c.forest.n_trees = 25;
    c
}

fn dataset(dir: &std::path::Path) -> DatasetManifest {
    write_dataset(dir, &DatasetSpec { per_class: 16, seed: 11, ..DatasetSpec::default() }).unwrap()
}

#[test]
fn test_split_has_no_influence_on_mask_or_model() {
    let dir = tempfile::tempdir().unwrap();
    let full = dataset(dir.path());
    let c = config();

    let run = |m: &DatasetManifest| {
        let rows = cmd_extract(m, &c).unwrap().rows;
        let train: Vec<_> = rows.iter().filter(|r| r.record.split == Split::Train).cloned().collect();
        let subset = cmd_select(&train, &c, 6).unwrap();
        let model = cmd_train(&rows, &subset.mask, &c).unwrap();
        (features_to_text(&train), subset, model.to_string())
    };
    let (fa, sa, ma) = run(&full);
    let (fb, sb, mb) = run(&full.filter_split(Split::Train));
    assert_eq!(fa, fb);
    assert_eq!(sa, sb);
    assert_eq!(ma, mb);
    assert!(history_is_consistent(&sa));
}

#[test]
fn feature_rows_follow_manifest_order_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let m = dataset(dir.path());
    let ex = cmd_extract(&m, &config()).unwrap();
    assert!(ex.failures.is_empty());
    let paths: Vec<_> = ex.rows.iter().map(|r| &r.record.path).collect();
    let want: Vec<_> = m.records().iter().map(|r| &r.path).collect();
    assert_eq!(paths, want);
    let text = features_to_text(&ex.rows);
    assert_eq!(parse_features(&text).unwrap(), ex.rows);
}

#[test]
fn scores_cover_only_the_requested_split() {
    let dir = tempfile::tempdir().unwrap();
    let m = dataset(dir.path());
    let c = config();
    let rows = cmd_extract(&m, &c).unwrap().rows;
    let train: Vec<_> = rows.iter().filter(|r| r.record.split == Split::Train).cloned().collect();
    let model = cmd_train(&train, &[true; 13], &c).unwrap();
    let s = cmd_score(&model, &rows, Some(Split::Test)).unwrap();
    assert_eq!(s.len(), m.filter_split(Split::Test).len());
    assert!(s.iter().all(|x| (0.0..=1.0).contains(&x.score)));
    let lives = s.iter().filter(|x| x.label == Label::Live).count();
    assert_eq!(lives, 8);
}
