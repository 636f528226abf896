use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn exprembed(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_exprembed")).current_dir(dir).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

const SOURCES: &str = "\
# sources
mul sin x cot x
pow add x INT+ 1 INT+ 2
add ln x ln INT+ 2
sin x
add add pow x INT+ 2 mul INT+ 5 x INT+ 6
mul mul mul mul mul mul x x x x x x x
";

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&exprembed(dir.path(), &["gen-data", "--no-such-flag"])), 2);
    assert_eq!(code(&exprembed(dir.path(), &["gen-data", "--rules", "nonsense"])), 2);
    fs::write(dir.path().join("bad.toml"), "colour = 1\n").unwrap();
    assert_eq!(code(&exprembed(dir.path(), &["--config", "bad.toml", "gen-data"])), 2);
    assert_eq!(code(&exprembed(dir.path(), &["infer", "--checkpoint", "x", "--expr", "sin"])), 2);
}

#[test]
fn bad_inputs_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("pairs.tsv"), "sin x\tcos\n").unwrap();
    let out = exprembed(dir.path(), &["train", "--pairs", "pairs.tsv"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("pairs.tsv:1"));
    assert_eq!(code(&exprembed(dir.path(), &["train", "--pairs", "missing.tsv"])), 3);
}

#[test]
fn divergence_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("pairs.tsv"), "sin x\tcos add x neg div pi INT+ 2\nmul sin x cot x\tcos x\n").unwrap();
    let args = [
        "train",
        "--pairs",
        "pairs.tsv",
        "--learning-rate",
        "1e40",
        "--max-steps",
        "20",
        "--d-model",
        "8",
        "--n-heads",
        "2",
    ];
    let out = exprembed(dir.path(), &args);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!dir.path().join("model.ckpt").exists());
}

#[test]
fn pipeline_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("sources.txt"), SOURCES).unwrap();
    let gen = ["--threads", "2", "gen-data", "--sources", "sources.txt", "--val-size", "1", "--test-size", "1"];
    let out = exprembed(d, &gen);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["train.tsv", "val-pairs.tsv", "val.txt", "test.txt", "stats.tsv", "run-manifest-gen-data.json"] {
        assert!(d.join(f).exists(), "{f} missing");
    }
    let stats = fs::read_to_string(d.join("stats.tsv")).unwrap();
    assert!(stats.starts_with("split\texpressions\tpairs\toperators\tlength\n"));
    assert_eq!(stats.lines().count(), 4);
    // The six-operator source exceeds the default cap of five.
    let all = [
        fs::read_to_string(d.join("train.tsv")).unwrap(),
        fs::read_to_string(d.join("val.txt")).unwrap(),
        fs::read_to_string(d.join("test.txt")).unwrap(),
    ]
    .concat();
    assert!(!all.contains("mul mul mul mul mul"));
    assert!(all.contains("cos x"));

    let train =
        ["train", "--pairs", "train.tsv", "--max-steps", "5", "--d-model", "16", "--n-heads", "2", "--d-ff", "32"];
    let out = exprembed(d, &train);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    fs::write(
        d.join("classes.txt"),
        "SPLIT unseen\nCLASS a\nsin x\ncos add x neg div pi INT+ 2\nCLASS b\nmul sin x cot x\ncos x\n",
    )
    .unwrap();
    let out = exprembed(d, &["embed", "--checkpoint", "model.ckpt", "--classes", "classes.txt"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let index = fs::read_to_string(d.join("index.tsv")).unwrap();
    assert_eq!(index.lines().next(), Some("dim=16"));
    assert_eq!(index.lines().filter(|l| !l.starts_with('#') && !l.starts_with("dim=")).count(), 4);

    let out = exprembed(d, &["eval", "scorek", "--index", "index.tsv", "--k", "1"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("split\tunseen"));
    assert_eq!(code(&exprembed(d, &["eval", "scorek", "--index", "index.tsv", "--split", "train"])), 3);

    let out = exprembed(d, &["eval", "pca", "--index", "index.tsv"]);
    assert_eq!(code(&out), 0);
    assert!(fs::read_to_string(d.join("pca.svg")).unwrap().contains("<svg"));
    assert_eq!(fs::read_to_string(d.join("pca.csv")).unwrap().lines().count(), 5);

    let out =
        exprembed(d, &["eval", "generation", "--checkpoint", "model.ckpt", "--exprs", "val.txt", "--beam", "1,3"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(d.join("generation.tsv")).unwrap().lines().count(), 3);

    let out = exprembed(d, &["infer", "--checkpoint", "model.ckpt", "--expr", "sin x", "--beam", "2"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("rank\tlog_prob"));

    let out = exprembed(d, &["class-pairs", "--classes", "classes.txt"]);
    assert_eq!(code(&out), 0);
    assert_eq!(fs::read_to_string(d.join("class-pairs.tsv")).unwrap().lines().count(), 4);

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("run-manifest-train.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 42);
    assert_eq!(manifest["config"]["model"]["d_model"], 16);
    assert_eq!(manifest["outputs"][0]["path"], "model.ckpt");
}
