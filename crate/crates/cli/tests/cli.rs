use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use translaw_core::eval::{parse_scores_csv, render_weighted, WeightVector};
use translaw_core::gateway::{accrue_cost, render_cost_report, ComparisonInputs, UsageRecord};
use translaw_core::ProviderRegistry;

fn translaw(args: &[&str], stdin: Option<&str>) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_translaw"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut pipe = child.stdin.take().unwrap();
    pipe.write_all(stdin.unwrap_or_default().as_bytes()).unwrap();
    drop(pipe);
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write(dir: &Path, name: &str, content: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, content).unwrap();
    path.to_str().unwrap().to_string()
}

const MOCK_ROLES: [&str; 6] = ["--translator", "mock", "--annotator", "mock", "--proofreader", "mock"];

#[test]
fn translate_with_mock_writes_both_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "judgment.txt", "The appeal is dismissed.\n\nCosts to the respondent.\n");
    let mut args = vec!["translate"];
    args.extend(MOCK_ROLES);
    args.push(&input);
    let o = translaw(&args, None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let txt = std::fs::read_to_string(dir.path().join("judgment.translaw.txt")).unwrap();
    assert_eq!(txt, "【譯】The appeal is dismissed.\n\n【譯】Costs to the respondent.");
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("judgment.translaw.json")).unwrap()).unwrap();
    assert_eq!(json["doc_id"], "judgment");
    assert_eq!(json["paragraphs"].as_array().unwrap().len(), 2);
}

#[test]
fn translate_twice_with_data_dir_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "doc.txt", "First.\n\nSecond.\n\nThird.");
    let run = |n: &str| {
        let data = dir.path().join(format!("data{n}"));
        let out = dir.path().join(format!("out{n}"));
        let mut args = vec!["translate".to_string()];
        args.extend(MOCK_ROLES.map(String::from));
        args.extend(["--data-dir".into(), data.to_str().unwrap().into(), "--out".into(), out.to_str().unwrap().into(), input.clone()]);
        let o = translaw(&args.iter().map(String::as_str).collect::<Vec<_>>(), None);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let read = |p: std::path::PathBuf| std::fs::read_to_string(p).unwrap();
        (read(out.with_extension("json")), read(out.with_extension("txt")), read(data.join("tm.jsonl")))
    };
    let (a, b) = (run("1"), run("2"));
    assert_eq!(a.1, b.1);
    assert_eq!(a.2.lines().count(), 3);
    let strip = |s: &str| s.lines().filter(|l| !l.contains("created_at")).collect::<Vec<_>>().join("\n");
    assert_eq!(strip(&a.0), strip(&b.0));
}

#[test]
fn human_mode_reads_piped_annotations() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "h.txt", "One.\n\nTwo.");
    let mut args = vec!["translate", "--human"];
    args.extend(MOCK_ROLES);
    args.push(&input);
    let o = translaw(&args, Some("ERR: \"【譯】\" | CW | 〔譯〕 | \n\n\n"));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("accepted 1"));
    let txt = std::fs::read_to_string(dir.path().join("h.translaw.txt")).unwrap();
    assert_eq!(txt, "〔譯〕One.\n\n【譯】Two.");
}

#[test]
fn usage_errors_exit_2_and_name_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "a.txt", "A.");

    let o = translaw(&["translate", "--translator", "mock", "--proofreader", "mock", &input], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--annotator"), "{}", stderr(&o));

    let mut args = vec!["translate"];
    args.extend(MOCK_ROLES);
    args.push("/no/such/file.txt");
    assert_eq!(translaw(&args, None).status.code(), Some(2));

    let o = translaw(&["translate", "--translator", "nope", "--annotator", "mock", "--proofreader", "mock", &input], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--translator"), "{}", stderr(&o));

    let mut args = vec!["translate", "--rounds", "9"];
    args.extend(MOCK_ROLES);
    args.push(&input);
    let o = translaw(&args, None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--rounds"), "{}", stderr(&o));

    let mut args = vec!["translate", "--target", "xx"];
    args.extend(MOCK_ROLES);
    args.push(&input);
    assert_eq!(translaw(&args, None).status.code(), Some(2));

    let empty = write(dir.path(), "empty.txt", "\n\n  \n");
    let mut args = vec!["translate"];
    args.extend(MOCK_ROLES);
    args.push(&empty);
    assert_eq!(translaw(&args, None).status.code(), Some(2));
}

#[test]
fn unreachable_provider_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let providers = write(
        dir.path(),
        "providers.toml",
        "[[providers]]\nname = \"down\"\nendpoint = \"http://127.0.0.1:9/v1/chat/completions\"\nmax_context_tokens = 4096\n\n\
         [[providers]]\nname = \"mock\"\nendpoint = \"builtin\"\nmax_context_tokens = 4096\n",
    );
    let input = write(dir.path(), "a.txt", "A.");
    let o = translaw(
        &["translate", "--providers", &providers, "--translator", "down", "--annotator", "mock", "--proofreader", "mock", &input],
        None,
    );
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("job failed"));
    assert!(!dir.path().join("a.translaw.json").exists());
}

const SCORES: &str = "segment_id,system,A,C,S
1,GPT-4o,8.91,9.05,9.82
1,TransLaw-ChatGPT,9.32,9.33,9.92
1,TransLaw-HumanAnno,9.16,9.36,9.96
";

#[test]
fn eval_acs_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let scores = write(dir.path(), "scores.csv", SCORES);
    let o = translaw(&["eval", "acs", "--weights", "0.6,0.3,0.1", &scores], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = parse_scores_csv(SCORES.as_bytes()).unwrap();
    let expected = render_weighted(&rows, &WeightVector::new(0.6, 0.3, 0.1).unwrap()).unwrap();
    assert_eq!(stdout(&o), expected);
    let gpt = stdout(&o).lines().find(|l| l.starts_with("GPT-4o")).unwrap().to_string();
    assert!(gpt.ends_with("9.04"), "{gpt}");

    assert_eq!(stdout(&translaw(&["eval", "acs", &scores], None)), expected);
    let o = translaw(&["eval", "acs", "--weights", "0.5,0.5,0.5", &scores], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--weights"));
    let bad = write(dir.path(), "bad.csv", "segment_id,system,A,C,S\n1,x,11,1,1\n");
    assert_eq!(translaw(&["eval", "acs", &bad], None).status.code(), Some(2));
}

#[test]
fn eval_report_against_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let scores = write(dir.path(), "scores.csv", SCORES);
    let o = translaw(&["eval", "report", "--baseline", "GPT-4o", &scores], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("9.32 (+4.60%)") && out.contains("9.33 (+3.09%)") && out.contains("9.92 (+1.02%)"), "{out}");
    let csv = stdout(&translaw(&["eval", "report", "--csv", "--baseline", "GPT-4o", &scores], None));
    assert!(csv.starts_with("system,segments,A,C,S"));
    assert_eq!(translaw(&["eval", "report", "--baseline", "nobody", &scores], None).status.code(), Some(2));
}

const PRICES: &str = "[[providers]]\nname = \"per-1k\"\nendpoint = \"builtin\"\nmax_context_tokens = 100000\n\
                      price_per_1k_input = 0.01\nprice_per_1k_output = 0.01\n";

const USAGE: &str = r#"{"phase":"translator","input_tokens":8000,"output_tokens":0,"provider":"per-1k"}
{"phase":"annotator","input_tokens":5000,"output_tokens":0,"provider":"per-1k"}

{"phase":"proofreader","input_tokens":12000,"output_tokens":10000,"provider":"per-1k"}
"#;

#[test]
fn cost_report_and_comparisons() {
    let dir = tempfile::tempdir().unwrap();
    let prices = write(dir.path(), "prices.toml", PRICES);
    let usage = write(dir.path(), "usage.jsonl", USAGE);
    let o = translaw(&["cost", "--prices", &prices, "--words", "11585", "--human-rate", "0.12", "--baseline", "0.39", &usage], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    for needle in ["Total        US$0.35", "US$1390.20", "3972x", "10.26% cheaper", "US$0.08", "US$0.05", "US$0.22"] {
        assert!(out.contains(needle), "{needle} missing from\n{out}");
    }
    let registry = ProviderRegistry::from_toml_str(PRICES).unwrap();
    let records: Vec<UsageRecord> = USAGE.lines().filter(|l| !l.is_empty()).map(|l| serde_json::from_str(l).unwrap()).collect();
    let report = accrue_cost(&records, &registry).unwrap();
    let cmp = ComparisonInputs { words: Some(11585), human_rate: Some(0.12), baseline: Some(0.39) };
    assert_eq!(out, render_cost_report(&report, cmp).unwrap());

    let unknown = write(dir.path(), "unknown.jsonl", r#"{"phase":"translator","input_tokens":1,"output_tokens":1,"provider":"ghost"}"#);
    let o = translaw(&["cost", "--prices", &prices, &unknown], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("ghost"));
    assert_eq!(translaw(&["cost", "--prices", &prices, "--words", "10", &usage], None).status.code(), Some(2));
}

#[test]
fn corpus_stats_on_jsonl() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = write(
        dir.path(),
        "c.jsonl",
        "{\"doc_id\":\"a\",\"index\":0,\"src\":\"Appeal.\",\"tgt\":\"上訴。\"}\n{\"doc_id\":\"a\",\"index\":1,\"src\":\"Costs.\",\"tgt\":\"訟費。\"}\n{\"doc_id\":\"b\",\"index\":0,\"src\":\"Bail.\",\"tgt\":\"保釋。\"}\n",
    );
    let o = translaw(&["corpus", "stats", &corpus], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let stats: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(stats["document_count"], 2);
    assert_eq!(stats["pair_count"], 3);
    assert_eq!(stats["target_chars"], 9);
    assert_eq!(translaw(&["corpus", "stats", "/no/such/corpus.jsonl"], None).status.code(), Some(2));
}

#[test]
fn serve_rejects_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "server.toml", "bogus_key = 1\n");
    assert_eq!(translaw(&["serve", "--config", &cfg], None).status.code(), Some(2));
    assert_eq!(translaw(&["--version"], None).status.code(), Some(0));
}
