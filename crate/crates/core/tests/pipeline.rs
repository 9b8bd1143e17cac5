use std::path::Path;

use narrative_core::corpus::{render_documents, Document};
use narrative_core::format::Header;
use narrative_core::pipeline::{builtin_triplets, ingest, run_pipeline, PipelineConfig, RunManifest, StageStatus};
use narrative_core::synthgen::{gen_noise_run, EventPool, RunConfig};
use narrative_core::Error;

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

#[test]
fn config_round_trips_through_toml() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = PipelineConfig::default();
    cfg.paths.docs = dir.path().join("docs.nfv1");
    cfg.paths.out = dir.path().join("run");
    cfg.seed = 42;
    let text = cfg.to_toml();
    let back = PipelineConfig::from_toml(&text, Path::new("/elsewhere")).unwrap();
    assert_eq!(back, cfg);
}

#[test]
fn relative_paths_resolve_against_the_config() {
    let cfg = PipelineConfig::from_toml("[paths]\ndocs = \"d.nfv1\"\nout = \"run\"\n", Path::new("/data/x")).unwrap();
    assert_eq!(cfg.paths.docs, Path::new("/data/x/d.nfv1"));
    assert_eq!(cfg.paths.out, Path::new("/data/x/run"));
    assert_eq!(cfg.changepoint.max_depth, 3);
    assert_eq!(cfg.changepoint.min_days, 4);
}

#[test]
fn validation_rejects_bad_configs() {
    let dir = tempfile::tempdir().unwrap();
    let docs = dir.path().join("d.nfv1");
    write(&docs, "#nfv1\n");
    let base = format!("[paths]\ndocs = \"{}\"\nout = \"run\"\n", docs.display());
    assert!(PipelineConfig::from_toml(&base, dir.path()).unwrap().validate().is_ok());
    for extra in [
        "[network]\nalpha_local = 1.5\n",
        "[clustering]\nthreshold = 0.0\n",
        "[changepoint]\nmin_days = 0\n",
        "[changepoint.classifier]\ncv_folds = 1\n",
        "[significance]\nk = 0\n",
    ] {
        let cfg = PipelineConfig::from_toml(&format!("{base}{extra}"), dir.path()).unwrap();
        assert!(matches!(cfg.validate(), Err(Error::Config(_))), "{extra}");
    }
    let missing = "[paths]\ndocs = \"d.nfv1\"\ntriplets = \"nope.nfv1\"\nout = \"run\"\n";
    assert!(PipelineConfig::from_toml(missing, dir.path()).unwrap().validate().is_err());
    assert!(PipelineConfig::from_toml("[paths]\nbogus = 1\n", dir.path()).is_err());
}

#[test]
fn ingest_falls_back_to_builtin_extractor() {
    let docs = vec![
        Document::new("a", 0, "President Trump appoints Vice President Pence. Nothing here."),
        Document::new("b", 86_400, "I love this coffee shop"),
    ];
    let text = render_documents(&Header::default(), &docs);
    let (corpus, triplets, warnings) = ingest(&text, None).unwrap();
    assert!(warnings.is_empty());
    assert_eq!(triplets, builtin_triplets(&corpus));
    assert!(triplets.iter().any(|t| t.doc_id == "a" && t.a0 == "president trump"));
    assert!(triplets.iter().all(|t| t.timestamp == corpus.get(&t.doc_id).unwrap().timestamp));
    assert!(matches!(ingest("#nfv1\n", None), Err(Error::EmptyCorpus)));
    let bad = "#nfv1\n{\"doc_id\":\"zz\",\"a0\":\"a\",\"verb_sense\":\"say.01\",\"a1\":\"b\"}\n";
    assert!(ingest(&text, Some(bad)).is_err());
}

fn small_run(dir: &Path) -> PipelineConfig {
    let pool = EventPool::bundled().unwrap();
    let cfg = RunConfig {
        days: 12,
        change_days: vec![6],
        draws_per_day: 40,
        ..RunConfig::default()
    };
    let run = gen_noise_run(&pool, 0.2, 1, &cfg).unwrap();
    write(&dir.join("docs.nfv1"), &run.documents_file());
    write(&dir.join("trip.nfv1"), &run.triplets_file());
    let text = "seed = 5\n[paths]\ndocs = \"docs.nfv1\"\ntriplets = \"trip.nfv1\"\nout = \"run\"\n\
        [changepoint]\nvocab_size = 400\n[changepoint.classifier]\nn_trees = 10\n\
        [changepoint.significance]\nrule = \"permutation\"\nrounds = 4\nquantile = 0.95\n";
    PipelineConfig::from_toml(text, dir).unwrap()
}

#[test]
fn stages_run_then_skip_and_resume() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_run(dir.path());
    let first = run_pipeline(&cfg).unwrap();
    assert!(first.stages.iter().all(|(_, s)| *s == StageStatus::Ran));
    let manifest = RunManifest::read(&cfg.paths.out).unwrap();
    assert_eq!(manifest.stages.len(), 6);
    assert_eq!(manifest.seed, 5);

    let second = run_pipeline(&cfg).unwrap();
    assert!(second.stages.iter().all(|(_, s)| *s == StageStatus::Skipped));

    // a changed clustering setting reruns clustering and everything after it
    let mut changed = cfg.clone();
    changed.clustering.threshold = 0.3;
    let third = run_pipeline(&changed).unwrap();
    let ran: Vec<&str> = third.stages.iter().filter(|(_, s)| *s == StageStatus::Ran).map(|(n, _)| *n).collect();
    assert_eq!(&ran[..2], ["cluster", "rank"]);
    assert!(!ran.contains(&"ingest") && !ran.contains(&"detect"));

    // a deleted output is regenerated
    std::fs::remove_file(cfg.paths.out.join("detect/segment_tree.json")).unwrap();
    let fourth = run_pipeline(&changed).unwrap();
    assert!(fourth.stages.contains(&("detect", StageStatus::Ran)));
}

#[test]
fn failing_stage_is_named_and_keeps_earlier_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_run(dir.path());
    // vectors file that lacks every text the cluster stage needs
    let vecs = dir.path().join("v.nfv1");
    write(&vecs, "#nfv1 kind=vectors dim=2 count=1\n{\"text\":\"a\",\"vector\":[1.0,0.0]}\n");
    cfg.paths.vectors = Some(vecs);
    let err = run_pipeline(&cfg).unwrap_err();
    match err {
        Error::Stage { stage, source } => {
            assert_eq!(stage, "cluster");
            assert!(matches!(*source, Error::MissingEmbeddings(_)));
        }
        other => panic!("unexpected {other:?}"),
    }
    assert!(cfg.paths.out.join("detect/segment_tree.json").is_file());
    let m = RunManifest::read(&cfg.paths.out).unwrap();
    assert!(m.stages.contains_key("detect") && !m.stages.contains_key("cluster"));
}
