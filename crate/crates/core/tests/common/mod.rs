#![allow(dead_code)]

use std::path::{Path, PathBuf};

use clap::Parser;
use ctlens::cli::{run, Cli};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

/// Run the CLI in-process and return its stdout.
pub fn cli(args: &[&str]) -> ctlens::Result<String> {
    let argv = std::iter::once("ctlens").chain(args.iter().copied());
    let parsed = Cli::try_parse_from(argv).unwrap_or_else(|e| panic!("bad test argv {args:?}: {e}"));
    let mut out = Vec::new();
    run(parsed, &mut out)?;
    Ok(String::from_utf8(out).expect("utf-8 output"))
}

pub fn cli_ok(args: &[&str]) -> String {
    cli(args).unwrap_or_else(|e| panic!("ctlens {args:?} failed: {e}"))
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

/// Reports written by one end-to-end run over the bundled fixture.
#[derive(Debug, PartialEq, Eq)]
pub struct SmokeArtifacts {
    pub eval: String,
    pub prompt_report: String,
    pub prevalence_json: String,
    pub prevalence_md: String,
    pub engagement: String,
    pub ecdf_csv: String,
}

/// ingest, sample, import labels, split, embed, train, eval, prompt-run,
/// prompt-report, classify, prevalence, engagement; all offline.
pub fn run_smoke(dir: &Path) -> SmokeArtifacts {
    let store = dir.join("store");
    let s = p(&store);
    let f = |name: &str| dir.join(name);
    let posts = fixture("posts.ndjson");
    let labels = fixture("labels.csv");

    cli_ok(&["--store", s, "ingest", p(&posts)]);
    cli_ok(&[
        "--store",
        s,
        "sample",
        "--n",
        "30",
        "--seed",
        "7",
        "--out",
        p(&f("sample.txt")),
    ]);
    cli_ok(&["--store", s, "import-labels", p(&labels)]);
    cli_ok(&["--store", s, "split", "--k", "3", "--seed", "11"]);
    cli_ok(&["--store", s, "embed", "--provider", "mock", "--dim", "64"]);
    cli_ok(&["--store", s, "train", "--model", "lr", "--out", p(&f("model.json"))]);
    cli_ok(&[
        "--store",
        s,
        "eval",
        "--model",
        "lr",
        "--split",
        "default",
        "--out",
        p(&f("eval.json")),
    ]);
    cli_ok(&[
        "--store",
        s,
        "prompt-run",
        "--strategy",
        "simple",
        "--shots",
        "0",
        "--runs",
        "10",
        "--llm-provider",
        "mock",
    ]);
    cli_ok(&[
        "--store",
        s,
        "prompt-run",
        "--strategy",
        "sbs",
        "--shots",
        "1",
        "--runs",
        "3",
        "--split",
        "default",
        "--llm-provider",
        "mock",
    ]);
    cli_ok(&["--store", s, "prompt-report", "--out", p(&f("prompt.json"))]);
    cli_ok(&[
        "--store",
        s,
        "classify",
        "--model-file",
        p(&f("model.json")),
        "--out",
        p(&f("pred.ndjson")),
    ]);
    let prevalence_json = cli_ok(&[
        "--store",
        s,
        "prevalence",
        "--predictions",
        p(&f("pred.ndjson")),
        "--metrics",
        p(&f("eval.json")),
        "--out",
        p(&f("prevalence.md")),
    ]);
    let ecdf_dir = format!("{}/", p(&f("ecdf")));
    cli_ok(&[
        "engagement",
        "--predictions",
        p(&f("pred.ndjson")),
        "--out",
        p(&f("engagement.json")),
        "--ecdf-csv",
        &ecdf_dir,
    ]);

    let read = |path: PathBuf| std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    SmokeArtifacts {
        eval: read(f("eval.json")),
        prompt_report: read(f("prompt.json")),
        prevalence_json,
        prevalence_md: read(f("prevalence.md")),
        engagement: read(f("engagement.json")),
        ecdf_csv: read(f("ecdf").join("ecdf.csv")),
    }
}

/// Serve `app` on an ephemeral local port from a background runtime and
/// return its base URL.
pub fn spawn_server(app: axum::Router) -> String {
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().expect("runtime");
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.expect("bind");
            tx.send(listener.local_addr().expect("addr")).expect("send addr");
            axum::serve(listener, app).await.expect("serve");
        });
    });
    format!("http://{}", rx.recv().expect("server address"))
}
