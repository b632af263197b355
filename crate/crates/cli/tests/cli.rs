use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Copies a fixture into a fresh temporary directory.
fn staged(name: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    copy_dir(&fixture(name), dir.path());
    dir
}

fn copy_dir(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for entry in std::fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_dir(&entry.path(), &target);
        } else {
            std::fs::copy(entry.path(), target).unwrap();
        }
    }
}

fn vmetrics(dir: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vmetrics"))
        .arg(dir.join("vmetrics.properties"))
        .args(extra)
        .output()
        .unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn guarded_if_golden_csv() {
    let dir = staged("guarded_if");
    let out = vmetrics(
        dir.path(),
        &[
            "--set",
            "metrics.code_metrics=",
            "--set",
            "metrics.function_measures.all_variations=McCabe[code]",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("out/metrics.csv")).unwrap();
    assert_eq!(csv, "file;function;line;McCabe[code]\nguarded_if.c;func;1;2\n");
    assert!(stderr(&out).contains("measured 1 functions with 1 variants"));
}

#[test]
fn guarded_if_mccabe_family() {
    let dir = staged("guarded_if");
    let out = vmetrics(dir.path(), &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("out/metrics.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    let header: Vec<&str> = lines[0].split(';').collect();
    let row: Vec<&str> = lines[1].split(';').collect();
    assert_eq!(header.len(), row.len());
    let value = |name: &str| row[header.iter().position(|h| *h == name).unwrap()];
    assert_eq!(value("McCabe[code]"), "2");
    assert_eq!(value("McCabe[vp]"), "2");
    assert_eq!(value("McCabe[combined]"), "3");
    assert_eq!(value("McCabe[vp]×One"), "2");
}

#[test]
fn dump_ast_is_stable() {
    let dir = staged("guarded_if");
    let out = vmetrics(dir.path(), &["--dump-ast"]);
    assert!(out.status.success());
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "SourceFile guarded_if.c [1-7]\n  Function func [1-7]\n    CppBlock #ifdef guard=`A` group=0.0 [2-6]\n      \
         Branch If `if (...)` [3-5]\n        SingleStatement `a_statement;` [4-4]\n"
    );
}

#[test]
fn dump_tables() {
    let dir = staged("guarded_if");
    let out = vmetrics(dir.path(), &["--dump-tables"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("[feature_size]\nA = 2\n"), "{text}");
    assert!(text.contains("[sd_vp]\nA = 1\n"));
}

#[test]
fn missing_source_tree_fails_without_output() {
    let dir = staged("guarded_if");
    let out = vmetrics(dir.path(), &["--set", "source_tree=nowhere"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("source_tree"));
    assert!(!dir.path().join("out/metrics.csv").exists());
}

#[test]
fn missing_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = vmetrics(dir.path(), &[]);
    assert!(!out.status.success());
}

#[test]
fn strict_mode_rejects_unmodeled_features() {
    let dir = staged("guarded_if");
    std::fs::write(dir.path().join("model.fm"), "feature B type=bool file=k\n").unwrap();
    let lenient = vmetrics(dir.path(), &[]);
    assert!(lenient.status.success());
    assert!(stderr(&lenient).contains("feature `A` is referenced but not modeled"));
    std::fs::remove_file(dir.path().join("out/metrics.csv")).unwrap();

    let strict = vmetrics(dir.path(), &["--set", "features.strict=true"]);
    assert!(!strict.status.success());
    assert!(!dir.path().join("out/metrics.csv").exists());
}

#[test]
fn bad_feature_model_is_reported_with_location() {
    let dir = staged("guarded_if");
    std::fs::write(
        dir.path().join("model.fm"),
        "feature A type=bool file=k\nfeature A type=bool file=k\n",
    )
    .unwrap();
    let out = vmetrics(dir.path(), &[]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains(":2:"), "{}", stderr(&out));
}

#[test]
fn unparsable_files_are_skipped() {
    let dir = staged("guarded_if");
    std::fs::write(dir.path().join("src/broken.c"), "void g() {\n#ifdef B\n}\n").unwrap();
    let out = vmetrics(dir.path(), &[]);
    assert!(out.status.success());
    assert!(stderr(&out).contains("1 failed"), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("out/metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn build_model_feeds_features_per_function() {
    let dir = staged("guarded_if");
    let out = vmetrics(
        dir.path(),
        &["--set", "build_model=build.txt", "--set", "metrics.code_metrics=FpF"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("out/metrics.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    let header: Vec<&str> = lines[0].split(';').collect();
    let row: Vec<&str> = lines[1].split(';').collect();
    let value = |name: &str| row[header.iter().position(|h| *h == name).unwrap()];
    let got: Vec<&str> = (1..=5).map(|v| value(&format!("FpF[{v}]"))).collect();
    assert_eq!(got, ["1", "0", "1", "1", "2"]);
}

#[test]
fn unknown_metric_is_a_config_error() {
    let dir = staged("guarded_if");
    let out = vmetrics(dir.path(), &["--set", "metrics.code_metrics=Halstead"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("Halstead"));
}
