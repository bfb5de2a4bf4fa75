//! End-to-end checks of the command-line pipeline through the real binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn privscore(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_privscore"))
        .current_dir(dir)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(path: &Path, contents: &str) {
    std::fs::write(path, contents).unwrap();
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap_or_else(|_| panic!("missing file {}", path.display()))
}

fn small_gen_config(seed: u64, users: usize) -> String {
    format!(
        "seed = {seed}\nusers = {users}\nitems = 6\nattitude_coupling = 0.5\n\n\
         [graph]\nmodel = \"preferential_attachment\"\nedges_per_node = 3.0\n"
    )
}

struct Workspace {
    _guard: tempfile::TempDir,
    root: PathBuf,
}

fn workspace() -> Workspace {
    let guard = tempfile::tempdir().unwrap();
    let root = guard.path().to_path_buf();
    Workspace {
        _guard: guard,
        root,
    }
}

#[test]
fn generate_is_deterministic_per_seed() {
    let ws = workspace();
    write(&ws.root.join("gen.toml"), &small_gen_config(11, 200));
    let started = std::time::Instant::now();
    let a = privscore(&ws.root, &["generate", "--config", "gen.toml", "--out", "a"]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert!(
        started.elapsed().as_secs_f64() < 1.0,
        "200-user generation took {:.2}s",
        started.elapsed().as_secs_f64()
    );
    let b = privscore(&ws.root, &["generate", "--config", "gen.toml", "--out", "b"]);
    assert!(b.status.success());
    for file in [
        "manifest.json",
        "users.csv",
        "items.csv",
        "edges.csv",
        "granularity.csv",
        "ground_truth.json",
    ] {
        assert_eq!(
            read(&ws.root.join("a").join(file)),
            read(&ws.root.join("b").join(file)),
            "{file} differs between identical-seed runs"
        );
    }
}

#[test]
fn generate_rejects_missing_required_field() {
    let ws = workspace();
    write(&ws.root.join("gen.toml"), "seed = 1\nitems = 4\n");
    let out = privscore(&ws.root, &["generate", "--config", "gen.toml", "--out", "x"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("users"), "stderr: {stderr}");
}

#[test]
fn ingest_reports_warnings_and_round_trips() {
    let ws = workspace();
    write(
        &ws.root.join("edges.csv"),
        "source,target\nali,ayse\nayse,ali\nali,omer\nomer,omer\n",
    );
    write(
        &ws.root.join("granularity.csv"),
        "user_id,item_id,bytes\nali,about,431\nayse,about,120\nfatma,email,25\nali,email,10\n",
    );
    let out = privscore(
        &ws.root,
        &[
            "ingest",
            "--edges",
            "edges.csv",
            "--granularity",
            "granularity.csv",
            "--out",
            "bundle",
        ],
    );
    assert!(out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("duplicate edge"), "stderr: {stderr}");
    assert!(stderr.contains("self-loop"), "stderr: {stderr}");
    assert!(stderr.contains("fatma"), "stderr: {stderr}");

    // Re-ingesting the bundle's own files reproduces the same content.
    let first_manifest = read(&ws.root.join("bundle/manifest.json"));
    let out = privscore(
        &ws.root,
        &[
            "ingest",
            "--edges",
            "bundle/edges.csv",
            "--granularity",
            "bundle/granularity.csv",
            "--out",
            "bundle2",
        ],
    );
    assert!(out.status.success());
    assert_eq!(first_manifest, read(&ws.root.join("bundle2/manifest.json")));
    assert_eq!(
        read(&ws.root.join("bundle/granularity.csv")),
        read(&ws.root.join("bundle2/granularity.csv"))
    );
}

#[test]
fn ingest_rejects_negative_bytes_with_line() {
    let ws = workspace();
    write(&ws.root.join("edges.csv"), "source,target\na,b\n");
    write(
        &ws.root.join("granularity.csv"),
        "user_id,item_id,bytes\na,about,10\nb,about,-4\n",
    );
    let out = privscore(
        &ws.root,
        &[
            "ingest",
            "--edges",
            "edges.csv",
            "--granularity",
            "granularity.csv",
            "--out",
            "bundle",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("granularity.csv:3"), "stderr: {stderr}");
    assert!(stderr.contains("negative"), "stderr: {stderr}");
}

#[test]
fn score_all_zero_responses_yields_zero_psn() {
    let ws = workspace();
    write(&ws.root.join("edges.csv"), "source,target\na,b\nb,c\n");
    write(
        &ws.root.join("responses.csv"),
        "user_id,item_id,shared\na,email,0\na,about,0\n",
    );
    let out = privscore(
        &ws.root,
        &[
            "ingest",
            "--edges",
            "edges.csv",
            "--responses",
            "responses.csv",
            "--out",
            "bundle",
        ],
    );
    assert!(out.status.success());
    let out = privscore(
        &ws.root,
        &[
            "score",
            "--bundle",
            "bundle",
            "--out",
            "scores",
            "--models",
            "psn",
        ],
    );
    assert!(out.status.success());
    let scores = read(&ws.root.join("scores/scores_psn.csv"));
    assert!(scores.contains("user_id,score"));
    for line in scores.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let (_, value) = line.split_once(',').unwrap();
        assert_eq!(value, "0");
    }
}

#[test]
fn psna_header_records_damping_and_intrinsic() {
    let ws = workspace();
    write(&ws.root.join("gen.toml"), &small_gen_config(7, 150));
    assert!(privscore(&ws.root, &["generate", "--config", "gen.toml", "--out", "bundle"])
        .status
        .success());
    let out = privscore(
        &ws.root,
        &[
            "score",
            "--bundle",
            "bundle",
            "--out",
            "scores",
            "--models",
            "psna",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let scores = read(&ws.root.join("scores/scores_psna.csv"));
    assert!(scores.contains("# damping: 0.85"), "{scores}");
    assert!(scores.contains("# intrinsic: PSI"), "{scores}");
    assert!(scores.contains("# manifest: "), "{scores}");
}

#[test]
fn graph_models_require_edges() {
    let ws = workspace();
    write(&ws.root.join("edges.csv"), "source,target\n");
    write(
        &ws.root.join("responses.csv"),
        "user_id,item_id,shared\na,email,1\nb,email,0\n",
    );
    assert!(privscore(
        &ws.root,
        &[
            "ingest",
            "--edges",
            "edges.csv",
            "--responses",
            "responses.csv",
            "--out",
            "bundle"
        ],
    )
    .status
    .success());
    let out = privscore(
        &ws.root,
        &[
            "score",
            "--bundle",
            "bundle",
            "--out",
            "scores",
            "--models",
            "psc:prc",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("social graph"), "stderr: {stderr}");
}

#[test]
fn normalized_betweenness_is_a_flag() {
    let ws = workspace();
    write(&ws.root.join("gen.toml"), &small_gen_config(29, 60));
    assert!(privscore(&ws.root, &["generate", "--config", "gen.toml", "--out", "bundle"])
        .status
        .success());
    for (dir, extra) in [("raw", None), ("scaled", Some("--normalized-bc"))] {
        let mut args = vec!["score", "--bundle", "bundle", "--out", dir, "--models", "psc:bc"];
        if let Some(flag) = extra {
            args.push(flag);
        }
        assert!(privscore(&ws.root, &args).status.success());
    }
    let parse = |dir: &str| -> Vec<f64> {
        read(&ws.root.join(dir).join("scores_psc_bc.csv"))
            .lines()
            .filter(|l| !l.starts_with('#') && !l.starts_with("user_id"))
            .map(|l| l.split_once(',').unwrap().1.parse().unwrap())
            .collect()
    };
    let raw = parse("raw");
    let scaled = parse("scaled");
    let pairs = (59.0 * 58.0) / 2.0;
    for (a, b) in raw.iter().zip(&scaled) {
        assert!((a / pairs - b).abs() < 1e-12);
    }
    assert!(read(&ws.root.join("scaled/scores_psc_bc.csv")).contains("# normalized: true"));
}

#[test]
fn unknown_model_is_rejected() {
    let ws = workspace();
    write(&ws.root.join("gen.toml"), &small_gen_config(3, 80));
    assert!(privscore(&ws.root, &["generate", "--config", "gen.toml", "--out", "bundle"])
        .status
        .success());
    let out = privscore(
        &ws.root,
        &[
            "score",
            "--bundle",
            "bundle",
            "--out",
            "scores",
            "--models",
            "psq",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("psq"));
}

#[test]
fn non_convergence_exits_two_but_writes_results() {
    let ws = workspace();
    write(&ws.root.join("gen.toml"), &small_gen_config(5, 200));
    assert!(privscore(&ws.root, &["generate", "--config", "gen.toml", "--out", "bundle"])
        .status
        .success());
    let out = privscore(
        &ws.root,
        &[
            "score",
            "--bundle",
            "bundle",
            "--out",
            "scores",
            "--models",
            "psi",
            "--fit-max-iter",
            "1",
            "--fit-tol",
            "1e-12",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    let scores = read(&ws.root.join("scores/scores_psi.csv"));
    assert!(scores.contains("# converged: false"));
    let diag = read(&ws.root.join("scores/fit_psi.json"));
    assert!(diag.contains("\"converged\": false"));
}

#[test]
fn full_small_pipeline_with_evaluate() {
    let ws = workspace();
    write(&ws.root.join("gen.toml"), &small_gen_config(13, 300));
    assert!(privscore(&ws.root, &["generate", "--config", "gen.toml", "--out", "bundle"])
        .status
        .success());
    let out = privscore(
        &ws.root,
        &[
            "score", "--bundle", "bundle", "--out", "scores",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for stem in ["psn", "psi", "psgn", "psgi", "psc_prc", "psc_evc", "psc_cc", "psc_bc", "psna"] {
        assert!(
            ws.root.join(format!("scores/scores_{stem}.csv")).exists(),
            "missing scores_{stem}.csv"
        );
    }

    let out = privscore(
        &ws.root,
        &[
            "evaluate",
            "--bundle",
            "bundle",
            "--scores",
            "scores",
            "--out",
            "report",
            "--k-groups",
            "3,4,6",
            "--spearman",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    // Correlation matrix: diagonal exactly 1.
    let correlations = read(&ws.root.join("report/correlations.csv"));
    let rows: Vec<&str> = correlations
        .lines()
        .filter(|l| !l.starts_with('#'))
        .collect();
    let header: Vec<&str> = rows[0].split(',').collect();
    for (pos, row) in rows[1..].iter().enumerate() {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields[0], header[pos + 1]);
        assert_eq!(fields[pos + 1], "1", "diagonal of {row}");
    }
    assert!(ws.root.join("report/correlations_spearman.csv").exists());

    // Goodness-of-fit summary has one row per K per model.
    let summary = read(&ws.root.join("report/gof_summary.csv"));
    for k in ["3", "4", "6"] {
        for model in ["PSN", "PSI", "PSGN", "PSGI"] {
            assert!(
                summary.contains(&format!("{k},{model},")),
                "missing {k}/{model} in {summary}"
            );
        }
    }

    // Characteristic curves cover the attitude grid with probabilities.
    let curves = read(&ws.root.join("report/curves.csv"));
    assert!(curves.contains("item_id,level,theta,probability"));
    assert!(curves.contains("\n"));
    let text = read(&ws.root.join("report/summary.txt"));
    assert!(text.contains("reference"));
    assert!(text.contains("avg clustering coefficient"));

    // Damping sweep covers 0.05 .. 0.95.
    let sweep = read(&ws.root.join("report/damping_sweep.csv"));
    assert!(sweep.contains("\n0.05,"));
    assert!(sweep.contains("\n0.95,"));
}

#[test]
fn evaluate_names_missing_score_files() {
    let ws = workspace();
    write(&ws.root.join("gen.toml"), &small_gen_config(17, 100));
    assert!(privscore(&ws.root, &["generate", "--config", "gen.toml", "--out", "bundle"])
        .status
        .success());
    std::fs::create_dir_all(ws.root.join("empty_scores")).unwrap();
    let out = privscore(
        &ws.root,
        &[
            "evaluate",
            "--bundle",
            "bundle",
            "--scores",
            "empty_scores",
            "--out",
            "report",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("scores_psn.csv"), "stderr: {stderr}");
}

#[test]
fn scoring_is_idempotent_byte_for_byte() {
    let ws = workspace();
    write(&ws.root.join("gen.toml"), &small_gen_config(23, 150));
    assert!(privscore(&ws.root, &["generate", "--config", "gen.toml", "--out", "bundle"])
        .status
        .success());
    for out_dir in ["s1", "s2"] {
        let out = privscore(
            &ws.root,
            &[
                "score", "--bundle", "bundle", "--out", out_dir, "--models", "psn,psi,psna",
            ],
        );
        assert!(out.status.success());
    }
    for file in [
        "scores_psn.csv",
        "scores_psi.csv",
        "scores_psna.csv",
        "fit_psi.json",
        "run_manifest.json",
    ] {
        assert_eq!(
            read(&ws.root.join("s1").join(file)),
            read(&ws.root.join("s2").join(file)),
            "{file} differs between identical runs"
        );
    }
}
