use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

fn core_fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn rsgym(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rsgym")).args(args).output().unwrap()
}

fn rsgym_stdin(args: &[&str], input: &str) -> Output {
    use std::io::Write;
    let mut child = Command::new(env!("CARGO_BIN_EXE_rsgym"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

const ABOVE_5: &str = "PENALTY_DEFINITION\nTYPE PRO\nSHAPE ABOVE\nTARGET 5\nBOUNDARY LINEAR\nSTRENGTH 10\nEND_PENALTY_DEFINITION\n";
const INVERTED: &str = "PENALTY_DEFINITION\nTYPE PRO\nABSOLUTE 5\nDELTA_START -5\nDELTA_END 0\nPENALTIES 0 0 0 0 -10 -20\nBEFORE_FUNCTION CONSTANT\nAFTER_FUNCTION LINEAR\nEND_PENALTY_DEFINITION\n";

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn compile_above_five_from_stdin() {
    let o = rsgym_stdin(&["compile"], ABOVE_5);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        stdout(&o),
        "PENALTY_DEFINITION\nTYPE PRO\nABSOLUTE 5\nDELTA_START -1\nDELTA_END 1\nBEFORE_FUNCTION CONSTANT\nAFTER_FUNCTION LINEAR\nPENALTIES 0 0 10\nEND_PENALTY_DEFINITION\n"
    );
    let json = rsgym_stdin(&["compile", "-", "--format", "json"], ABOVE_5);
    let v: serde_json::Value = serde_json::from_str(&stdout(&json)).unwrap();
    assert_eq!(v["text"].as_str().unwrap(), stdout(&o));
}

#[test]
fn verify_reports_the_divergence_of_the_inverted_block() {
    let dir = tempfile::tempdir().unwrap();
    let intent = write(dir.path(), "intent.txt", ABOVE_5);
    let wrong = write(dir.path(), "wrong.txt", INVERTED);
    let o = rsgym(&["verify", &intent, &wrong]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stdout(&o), "block 1: NOT equivalent; first divergence at occupancy 4: expected 0, got -10\n");
    let o = rsgym(&["verify", &intent, &wrong, "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["equivalent"], false);
    assert_eq!(v["blocks"][0]["first_divergence"]["occupancy"]["count"], 4);
    let o = rsgym(&["verify", &intent]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "block 1: equivalent on 65 points\n");
}

#[test]
fn eval_counts_and_fractions() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "a.txt", ABOVE_5);
    let o = rsgym(&["eval", &f, "--at", "4,5,6,8"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "block\toccupancy\tenergy\n1\t4\t0\n1\t5\t0\n1\t6\t10\n1\t8\t30\n");
    let o = rsgym(&["eval", &f, "--at", "0.5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("occupancy kind mismatch"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_two_and_name_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "a.txt", ABOVE_5);
    let o = rsgym(&["eval", &f, "--at", "five"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--at"));
    let o = rsgym(&["compile", "--frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--frobnicate"));
    let o = rsgym(&["eval", &f]);
    assert_eq!(o.status.code(), Some(2));
    let golden = core_fixtures().join("golden/config.toml");
    let o = rsgym(&["replay", "--config", golden.to_str().unwrap(), "--transcript", "x.json", "--out", "o", "--backend", "external"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--backend"), "{}", stderr(&o));
    let o = rsgym(&["run", "--config", golden.to_str().unwrap(), "--replicas", "0", "--out", "o"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--replicas"));
}

#[test]
fn domain_errors_exit_one() {
    let o = rsgym_stdin(&["compile"], &ABOVE_5.replace("ABOVE", "SIDEWAYS"));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("<stdin>: line 3, column 7: invalid SHAPE 'SIDEWAYS'"), "{}", stderr(&o));
    let o = rsgym(&["compile", "/nonexistent/blocks.txt"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn parse_action_prints_a_record() {
    let call = std::fs::read_to_string(core_fixtures().join("rotamer_call.txt")).unwrap();
    let o = rsgym_stdin(&["parse-action"], &format!("Some reasoning first.\n{call}"));
    assert!(o.status.success(), "{}", stdout(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["ok"], true);
    assert_eq!(v["action"]["action"], "rotamer_change");

    let hidden = "<think><action tag=\"run\"><name>go_back_to_step</name><step>1</step></action></think>\n<action tag=\"run\"><name>go_back_to_step</name><step>9</step></action>";
    let o = rsgym_stdin(&["parse-action", "--step", "3", "--reasoning-tags", "<think>", "</think>"], hidden);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["ok"], false);
    assert!(v["error"].as_str().unwrap().contains('9'), "{v}");
}

#[test]
fn render_script_writes_penalty_files() {
    let call = std::fs::read_to_string(core_fixtures().join("rotamer_call.txt")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "call.txt", &call);
    let out = dir.path().join("out");
    let o = rsgym(&["render-script", &input, "--step", "2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let xml = stdout(&o);
    assert!(xml.starts_with("<ROSETTASCRIPTS>"), "{xml}");
    assert_eq!(std::fs::read_to_string(out.join("step_02.xml")).unwrap(), xml);
    let comps: Vec<_> = std::fs::read_dir(&out).unwrap().filter(|e| e.as_ref().unwrap().path().extension().unwrap() == "comp").collect();
    assert_eq!(comps.len(), 3);

    let args = r#"{"action":"backbone_change","mover":"small","mover_params":"angle_max=\"7.0\"","residue_selectors":null,"mover_selector_name":null}"#;
    let o = rsgym_stdin(&["render-script"], args);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("<Small"));
}

#[test]
fn replay_matches_the_golden_run() {
    let golden = core_fixtures().join("golden");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = rsgym(&[
        "replay",
        "--config",
        golden.join("config.toml").to_str().unwrap(),
        "--transcript",
        golden.join("transcript.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("seed: 7"));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["queries"], 30);
    let expected = golden.join("expected");
    for f in ["trajectory.jsonl", "history.md", "states/step_00.txt", "states/step_13.txt"] {
        assert_eq!(std::fs::read(out.join(f)).unwrap(), std::fs::read(expected.join(f)).unwrap(), "{f}");
    }
    for f in ["report.json", "transcript.json", "percentiles.csv", "scripts/step_01.xml", "scripts/step_01/comp_1_0.comp"] {
        assert!(out.join(f).is_file(), "{f}");
    }

    // Eight copies of the log are enough trials for the bootstrap table.
    let logs = dir.path().join("logs");
    let mut args = vec!["stats".to_string()];
    for i in 0..8 {
        let d = logs.join(format!("trial{i}"));
        std::fs::create_dir_all(&d).unwrap();
        std::fs::copy(out.join("trajectory.jsonl"), d.join("trajectory.jsonl")).unwrap();
        args.push(d.join("trajectory.jsonl").to_str().unwrap().to_string());
    }
    let report_dir = dir.path().join("report");
    args.extend(["--out".to_string(), report_dir.to_str().unwrap().to_string()]);
    let o = rsgym(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert!(o.status.success(), "{}", stderr(&o));
    let boot = std::fs::read_to_string(report_dir.join("bootstrap.csv")).unwrap();
    assert!(boot.lines().count() >= 3, "{boot}");
    let pct = std::fs::read_to_string(report_dir.join("percentiles.csv")).unwrap();
    assert_eq!(pct.lines().count(), 1 + 8 * 13);
    assert!(pct.lines().nth(1).unwrap().starts_with("trial0,1,"));
}

#[test]
fn bench_penalty_replays_a_transcript() {
    let lines = std::fs::read_to_string(core_fixtures().join("bench/simplified.jsonl")).unwrap();
    let responses: Vec<serde_json::Value> = lines
        .lines()
        .map(|l| {
            let v: serde_json::Value = serde_json::from_str(l).unwrap();
            serde_json::json!({ "text": v["text"] })
        })
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let t = write(dir.path(), "t.json", &serde_json::json!({ "responses": responses }).to_string());
    let o = rsgym(&["bench-penalty", "--syntax", "simplified", "--transcript", &t]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("89/90"), "{}", stderr(&o));
    let csv = stdout(&o);
    assert!(csv.starts_with("model,syntax,prompt,"), "{csv}");
    assert_eq!(csv.lines().count(), 1 + 9 + 1);
}

#[test]
fn example_configs_load() {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["canonical_mock.toml", "ncaa_mock.toml"] {
        let cfg = rsgym::config::RunConfig::load(&configs.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(cfg.model.is_some(), "{name}");
        let prepared = cfg.prepare().unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(prepared.initial.len(), 1);
    }
    let text = std::fs::read_to_string(configs.join("rosetta_external.toml")).unwrap();
    let cfg = rsgym::config::RunConfig::parse(&text, &configs.join("rosetta_external.toml")).unwrap();
    assert_eq!(cfg.objectives().objectives().len(), 2);
}
