use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn polarlens(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polarlens"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

const CATALOG: &str = "influencer_id,handle,party\na1,@a1,A\na2,@a2,A\na3,@a3,A\nb1,@b1,B\nb2,@b2,B\nb3,@b3,B\n";

fn record(day: u32, src: &str, dst: &str) -> String {
    format!("{{\"ts\":\"2020-03-{day:02}T12:00:00Z\",\"src\":\"{src}\",\"dst\":\"{dst}\"}}\n")
}

/// Two audiences with a little crossover.
fn two_camp_records() -> String {
    let mut out = String::new();
    for u in 0..12 {
        let (home, away) = if u < 6 { ("a", "b") } else { ("b", "a") };
        for k in 1..=3 {
            out += &record(1 + u, &format!("u{u}"), &format!("{home}{k}"));
        }
        if u % 3 == 0 {
            out += &record(20, &format!("u{u}"), &format!("{away}{}", 1 + u % 2));
        }
    }
    out
}

fn corpus_args<'a>(records: &'a str, catalog: &'a str, out: &'a str) -> Vec<&'a str> {
    vec!["--records", records, "--catalog", catalog, "--out", out]
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = polarlens(&["ideology", "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
    assert_eq!(polarlens(&[]).status.code(), Some(1));
    assert_eq!(polarlens(&["--help"]).status.code(), Some(0));
}

#[test]
fn unknown_influencer_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let recs = two_camp_records() + &record(25, "u1", "zz9");
    let r = write(tmp.path(), "r.jsonl", &recs);
    let c = write(tmp.path(), "c.csv", CATALOG);
    let out = tmp.path().join("out").display().to_string();
    let mut args = vec!["ingest"];
    args.extend(corpus_args(&r, &c, &out));
    let o = polarlens(&args);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("zz9"), "{}", stderr(&o));
}

#[test]
fn malformed_record_reports_its_line() {
    let tmp = tempfile::tempdir().unwrap();
    let r = write(tmp.path(), "r.jsonl", &(record(1, "u1", "a1") + "{\"ts\":\"bad\"}\n"));
    let c = write(tmp.path(), "c.csv", CATALOG);
    let out = tmp.path().join("out").display().to_string();
    let mut args = vec!["ingest"];
    args.extend(corpus_args(&r, &c, &out));
    let o = polarlens(&args);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn degenerate_matrix_is_a_numerical_error() {
    let tmp = tempfile::tempdir().unwrap();
    let mut recs = String::new();
    for u in 0..4 {
        for dst in ["a1", "a2", "b1"] {
            recs += &record(1 + u, &format!("u{u}"), dst);
        }
    }
    let r = write(tmp.path(), "r.jsonl", &recs);
    let c = write(tmp.path(), "c.csv", CATALOG);
    let out = tmp.path().join("out").display().to_string();
    let mut args = vec!["ideology"];
    args.extend(corpus_args(&r, &c, &out));
    let o = polarlens(&args);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("rank 0"), "{}", stderr(&o));
}

#[test]
fn ideology_writes_scores_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let r = write(tmp.path(), "r.jsonl", &two_camp_records());
    let c = write(tmp.path(), "c.csv", CATALOG);
    let out = tmp.path().join("out");
    let out_s = out.display().to_string();
    let mut args = vec!["ideology", "--anchor", "B"];
    args.extend(corpus_args(&r, &c, &out_s));
    let o = polarlens(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let scores = fs::read_to_string(out.join("2020/scores.csv")).unwrap();
    let mut lines = scores.lines();
    assert_eq!(lines.next(), Some("id,kind,party,score,year"));
    let influencer = |id: &str| -> f64 {
        scores
            .lines()
            .find(|l| l.starts_with(&format!("{id},influencer,")))
            .unwrap()
            .split(',')
            .nth(3)
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!(influencer("b1") < 0.0 && influencer("a1") > 0.0);

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["subcommand"], "ideology");
    assert_eq!(manifest["config"]["anchor"], "B");
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 2);
    let outputs = manifest["outputs"].as_array().unwrap();
    assert!(outputs.iter().any(|o| o == "2020/scores.csv"), "{outputs:?}");
}

#[test]
fn dip_subcommand_reads_scores() {
    let tmp = tempfile::tempdir().unwrap();
    let mut scores = String::from("id,kind,party,score,year\n");
    for k in 0..30 {
        let v = if k % 2 == 0 { -1.0 } else { 1.0 } + 0.01 * k as f64;
        scores += &format!("i{k},influencer,A,{v},2020\n");
    }
    scores += "extra,influencer,A,0.5,2021\n";
    let s = write(tmp.path(), "scores.csv", &scores);
    let out = tmp.path().join("dip").display().to_string();

    let o = polarlens(&["dip", "--scores", &s, "--out", &out]);
    assert_eq!(o.status.code(), Some(1), "multi-year file needs --year");

    let o = polarlens(&["dip", "--scores", &s, "--year", "2020", "--n-boot", "500", "--out", &out]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["n"], 30);
    assert!(v["p_value"].as_f64().unwrap() < 0.01);
    assert!(Path::new(&out).join("dip.json").exists());

    let o = polarlens(&["dip", "--scores", &s, "--year", "2020", "--n-boot", "5", "--out", &out]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn synth_rejects_unknown_preset_and_writes_corpus() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("s");
    let out_s = out.display().to_string();
    assert_eq!(polarlens(&["synth", "--preset", "nope", "--out", &out_s]).status.code(), Some(1));
    let o = polarlens(&["synth", "--preset", "two-bloc", "--seed", "4", "--out", &out_s]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["records.jsonl", "catalog_2020.csv", "truth.json", "manifest.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let truth: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("truth.json")).unwrap()).unwrap();
    assert_eq!(truth["seed"], 4);
}
