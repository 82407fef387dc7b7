mod common;

use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Command, Output, Stdio};

use serde_json::Value;
use snipex::ingest::{read_jsonl, write_jsonl};
use snipex::local::ComparableOutcome;
use snipex_core::{ExecutionOutcome, Snippet};

use common::*;

fn snipex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_snipex"))
        .args(args)
        .env("SNIPEX_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn ingest_header_only_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let posts = dir.path().join("Posts.csv");
    let blocks = dir.path().join("Blocks.csv");
    std::fs::write(
        &posts,
        "Id,PostTypeId,ParentId,AcceptedAnswerId,CreationDate,Score,Tags\n",
    )
    .unwrap();
    std::fs::write(
        &blocks,
        "Id,PostId,PostBlockTypeId,RootPostBlockVersionId,LineCount,Length,Content\n",
    )
    .unwrap();
    let corpus = dir.path().join("corpus.jsonl");
    let out = snipex(&["ingest", "--posts", p(&posts), "--blocks", p(&blocks), "-o", p(&corpus)]);
    let summary: Value = serde_json::from_str(&ok(&out)).unwrap();
    assert_eq!(summary["snippets"], 0);
    assert_eq!(std::fs::read_to_string(&corpus).unwrap(), "");
}

#[test]
fn ingest_mini_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let m = mini_dir();
    let corpus = dir.path().join("corpus.jsonl");
    let out = snipex(&[
        "ingest",
        "--posts",
        p(&m.join("Posts.csv")),
        "--blocks",
        p(&m.join("PostBlockVersion.csv")),
        "--refs",
        p(&m.join("refs.csv")),
        "-o",
        p(&corpus),
    ]);
    let summary: Value = serde_json::from_str(&ok(&out)).unwrap();
    assert_eq!(summary["summary"]["orphan_answers"], 1);
    let snippets: Vec<Snippet> = read_jsonl(&corpus).unwrap();
    let expected = mini_expected();
    let ids: Vec<u64> = snippets.iter().map(|s| s.snippet_id).collect();
    assert_eq!(ids, expected.keys().copied().collect::<Vec<_>>());
    assert!(snippets.iter().all(|s| s.tags == ["python"]));
    assert!(snippets.iter().any(|s| s.is_accepted) && snippets.iter().any(|s| s.github_ref_count > 0));
    // the superseded draft of a block is not in the corpus
    assert!(!snippets.iter().any(|s| s.content == "print 'draft'"));

    let top = snipex(&["top-imports", "--corpus", p(&corpus), "-n", "3"]);
    let top: Value = serde_json::from_str(&ok(&top)).unwrap();
    assert!(top.to_string().contains("sys"), "{top}");
}

#[test]
fn ingest_reports_missing_column() {
    let dir = tempfile::tempdir().unwrap();
    let posts = dir.path().join("Posts.csv");
    std::fs::write(&posts, "Id,PostTypeId\n").unwrap();
    let out = snipex(&["ingest", "--posts", p(&posts), "--blocks", p(&posts), "-o", "-"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("error:") && err.contains("ParentId"), "{err}");
}

#[test]
fn export_taxonomy() {
    let t: Value = serde_json::from_str(&ok(&snipex(&["export-taxonomy"]))).unwrap();
    assert_eq!(t["codes"].as_array().unwrap().len(), 58);
}

#[test]
fn analyze_without_results_explains() {
    let out = snipex(&["analyze", "--results", "/nonexistent/outcomes.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("run-local"));
}

#[test]
fn analyze_tables_from_expected_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let expected = mini_expected();
    let outcomes: Vec<ExecutionOutcome> = expected
        .iter()
        .flat_map(|(id, row)| row.iter().map(|(i, s)| outcome(*id, i, *s)))
        .collect();
    let results = dir.path().join("outcomes.jsonl");
    write_jsonl(&results, &outcomes).unwrap();
    let corpus = dir.path().join("corpus.jsonl");
    write_jsonl(&corpus, &mini_snippets()).unwrap();

    let ok2 = |id: &u64| expected[id]["py2"].name() == "Success";
    let ok3 = |id: &u64| expected[id]["py3"].name() == "Success";
    let either = expected.keys().filter(|id| ok2(id) || ok3(id)).count();
    let overall = format!("{:.2}", 100.0 * either as f64 / expected.len() as f64);

    let table2 = ok(&snipex(&[
        "analyze",
        "--results",
        p(&results),
        "--report",
        "table2",
        "--pair",
        "py2,py3",
    ]));
    assert!(
        table2.contains(&format!("Overall success rate (either): {overall}%")),
        "{table2}"
    );
    let both = expected.keys().filter(|id| ok2(id) && ok3(id)).count();
    let yes_yes = table2
        .lines()
        .find(|l| l.starts_with("Yes") && l[16..].starts_with("Yes"))
        .unwrap();
    assert_eq!(yes_yes.split_whitespace().nth(2).unwrap(), both.to_string());

    let table1 = ok(&snipex(&[
        "analyze",
        "--results",
        p(&results),
        "--report",
        "table1",
        "--top",
        "5",
    ]));
    assert!(table1.contains("SyntaxError") && table1.contains("Success"), "{table1}");

    let series = dir.path().join("series");
    let json = ok(&snipex(&[
        "analyze",
        "--results",
        p(&results),
        "--corpus",
        p(&corpus),
        "--iterations",
        "200",
        "--series-dir",
        p(&series),
    ]));
    let report: Value = serde_json::from_str(&json).unwrap();
    assert_eq!(report["with_metadata"], expected.len());
    assert!(series.join("line_count_py2.csv").exists());
    let accepted = &report["group_comparisons"][0]["comparison"];
    assert!(accepted.get("ok").is_some(), "{accepted}");

    let summary = ok(&snipex(&[
        "analyze",
        "--results",
        p(&results),
        "--corpus",
        p(&corpus),
        "--iterations",
        "50",
        "--report",
        "summary",
    ]));
    assert!(summary.contains("Snippets: 58"), "{summary}");
}

fn sh_configs(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("configs.json");
    std::fs::write(
        &path,
        r#"[{"id": "a", "command": ["/bin/sh", "{file}"]},
            {"id": "b", "command": ["/bin/sh", "-c", "sleep 0.05; exec /bin/sh \"$0\"", "{file}"]}]"#,
    )
    .unwrap();
    path
}

fn sh_corpus(dir: &Path) -> std::path::PathBuf {
    let template = mini_snippets().remove(0);
    let snippets: Vec<Snippet> = (1..=24)
        .map(|i| Snippet {
            snippet_id: i,
            content: match i % 3 {
                0 => "exit 0".into(),
                1 => "echo 'NameError: x' >&2; exit 1".into(),
                _ => "exit 4".into(),
            },
            ..template.clone()
        })
        .collect();
    let path = dir.join("corpus.jsonl");
    write_jsonl(&path, &snippets).unwrap();
    path
}

fn comparable(path: &Path) -> Vec<ComparableOutcome> {
    read_jsonl::<ExecutionOutcome>(path)
        .unwrap()
        .iter()
        .map(ComparableOutcome::from)
        .collect()
}

#[test]
fn run_local_matches_serve_and_work() {
    let dir = tempfile::tempdir().unwrap();
    let configs = sh_configs(dir.path());
    let corpus = sh_corpus(dir.path());

    let local = dir.path().join("local.jsonl");
    ok(&snipex(&[
        "run-local",
        "--corpus",
        p(&corpus),
        "--configs",
        p(&configs),
        "--parallelism",
        "4",
        "-o",
        p(&local),
    ]));

    let store = format!("file://{}", dir.path().join("store").display());
    let mut serve = Command::new(env!("CARGO_BIN_EXE_snipex"))
        .args([
            "serve",
            "--listen",
            "127.0.0.1:0",
            "--exit-when-done",
            "--store",
            &store,
        ])
        .args(["--corpus", p(&corpus), "--configs", p(&configs)])
        .env("SNIPEX_LOG", "warn")
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    let mut serve_out = BufReader::new(serve.stdout.take().unwrap());
    serve_out.read_line(&mut line).unwrap();
    let addr: Value = serde_json::from_str(&line).unwrap();
    let api = format!("http://{}", addr["listening"].as_str().unwrap());
    let workers: Vec<_> = (0..2)
        .map(|_| {
            Command::new(env!("CARGO_BIN_EXE_snipex"))
                .args([
                    "work",
                    "--exit-when-drained",
                    "--parallelism",
                    "2",
                    "--api",
                    &api,
                    "--configs",
                    p(&configs),
                ])
                .env("SNIPEX_LOG", "warn")
                .stdout(Stdio::null())
                .spawn()
                .unwrap()
        })
        .collect();
    for mut w in workers {
        assert!(w.wait().unwrap().success());
    }
    assert!(serve.wait().unwrap().success());
    line.clear();
    serve_out.read_line(&mut line).unwrap();
    let progress: Value = serde_json::from_str(&line).unwrap();
    assert_eq!(
        (progress["done"].clone(), progress["total"].clone()),
        (24.into(), 24.into())
    );

    let remote = dir.path().join("remote.jsonl");
    ok(&snipex(&[
        "export-results",
        "--store",
        &store,
        "--configs",
        p(&configs),
        "-o",
        p(&remote),
    ]));
    let local = comparable(&local);
    assert_eq!(local.len(), 48);
    assert_eq!(local, comparable(&remote));
    let names: Vec<&str> = local[..6].iter().map(|o| o.final_status.name()).collect();
    assert_eq!(
        names,
        [
            "NameError",
            "NameError",
            "ExitCodeException",
            "ExitCodeException",
            "Success",
            "Success"
        ]
    );
}

#[test]
fn work_rejects_broken_interpreter() {
    let dir = tempfile::tempdir().unwrap();
    let configs = dir.path().join("configs.json");
    std::fs::write(
        &configs,
        r#"[{"id": "x", "command": ["/nonexistent/python", "{file}"]}]"#,
    )
    .unwrap();
    let out = snipex(&["work", "--api", "http://127.0.0.1:9", "--configs", p(&configs)]);
    assert_eq!(out.status.code(), Some(1));
}
