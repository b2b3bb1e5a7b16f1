//! Bundled datasets, study-file ingestion and the report files.

use std::path::PathBuf;

use flexmeta::analysis::{analyze, run_analysis, RunConfig};
use flexmeta::ingest::{parse_studies, read_studies, IngestError};
use flexmeta::report::{posterior_csv, predictive_csv, write_outputs, POSTERIOR_HEADER};
use flexmeta::sampler::SamplerConfig;
use flexmeta::{synth, Family};

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn small_run(families: Vec<Family>) -> RunConfig {
    let mut cfg = RunConfig::new(data_dir().join("skew_normal_k20.csv"));
    cfg.families = families;
    cfg.sampler = SamplerConfig {
        chains: 2,
        warmup: 300,
        keep: 2_000,
        seed: 17,
        ..SamplerConfig::default()
    };
    cfg.timestamp = Some("fixed".into());
    cfg
}

#[test]
fn shipped_files_match_generators() {
    let skew = std::fs::read_to_string(data_dir().join("skew_normal_k20.csv")).unwrap();
    assert_eq!(skew, synth::to_csv(&synth::skew_normal_dataset()));
    let normal = std::fs::read_to_string(data_dir().join("normal_k10.csv")).unwrap();
    assert_eq!(normal, synth::to_csv(&synth::normal_dataset()));
    assert!(synth::sample_skewness(&synth::skew_normal_dataset()) <= synth::SKEW_THRESHOLD);
}

#[test]
fn ingest_examples() {
    let two = parse_studies("study,y,se\nA,0.5,0.2\nB,-0.1,0.3".as_bytes()).unwrap();
    assert_eq!(two.len(), 2);
    assert_eq!((two[1].id.as_str(), two[1].y, two[1].se), ("B", -0.1, 0.3));
    let var = parse_studies("study,y,var\nA,1,0.04\n".as_bytes()).unwrap();
    assert!((var[0].se - 0.2).abs() < 1e-15);
    let zero = parse_studies("study,y,se\nA,1,0\n".as_bytes()).unwrap_err();
    assert!(matches!(zero, IngestError::NonPositive { row: 1, .. }), "{zero:?}");
    assert!(zero.to_string().contains("row 1"), "{zero}");
    assert!(parse_studies("study,y,se,var\nA,1,1,1\n".as_bytes()).is_err());
    assert!(parse_studies("study,y\nA,1\n".as_bytes()).is_err());
    assert!(parse_studies("study,y,se\nA,x,1\n".as_bytes()).is_err());
    assert_eq!(read_studies(&data_dir().join("normal_k10.csv")).unwrap(), synth::normal_dataset());
}

#[test]
fn report_structure_and_files() {
    let cfg = small_run(vec![Family::Normal, Family::SkewNormal]);
    let report = run_analysis(&cfg).unwrap();
    assert_eq!(report.posterior.len(), 2);
    assert_eq!(report.predictive.len(), 2);
    assert_eq!(report.diagnostics.len(), 2);
    assert_eq!(report.posterior[1].family, Family::SkewNormal);
    assert_eq!(report.classic.k, 20);

    let dir = tempfile::tempdir().unwrap();
    write_outputs(&report, dir.path()).unwrap();
    for f in [
        "report.json",
        "posterior.csv",
        "predictive.csv",
        "classic.csv",
        "density_normal_mu.csv",
        "density_normal_pred.csv",
        "density_skew-normal_mu.csv",
        "density_skew-normal_pred.csv",
    ] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    for key in ["classic", "posterior", "predictive", "diagnostics", "provenance", "timestamp"] {
        assert!(json.get(key).is_some(), "{key}");
    }
    assert_eq!(json["provenance"]["seed"], 17);
    let grid = std::fs::read_to_string(dir.path().join("density_normal_mu.csv")).unwrap();
    assert!(grid.starts_with("theta,density\n"));
    assert_eq!(grid.lines().count(), 513);
}

#[test]
fn csv_reparses_at_full_precision() {
    let report = analyze(&synth::skew_normal_dataset(), &small_run(vec![Family::Normal, Family::StudentT])).unwrap();
    let text = posterior_csv(&report);
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(rd.headers().unwrap().iter().collect::<Vec<_>>().join(","), POSTERIOR_HEADER);
    for (rec, row) in rd.records().zip(&report.posterior) {
        let rec = rec.unwrap();
        let num = |i: usize| rec[i].parse::<f64>().unwrap();
        assert_eq!(&rec[0], row.family.cli_name());
        assert_eq!(num(1), row.mean);
        assert_eq!(num(2), row.sd);
        assert_eq!(num(3), row.cri95.lower);
        assert_eq!(num(4), row.cri95.upper);
        assert_eq!(num(5), row.prob_below_zero);
        assert_eq!(num(6), row.dic);
        assert_eq!(num(7), row.p_d);
    }
    let text = predictive_csv(&report);
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    for (rec, row) in rd.records().zip(&report.predictive) {
        let rec = rec.unwrap();
        assert_eq!(rec[3].parse::<f64>().unwrap(), row.pi95.lower);
        assert_eq!(rec[4].parse::<f64>().unwrap(), row.pi95.upper);
    }
}
