use std::process::{Command, Output};

use prophetcomp_cli::commands::{ComplexityRecord, RatioRecord, SimulateRecord, Table1Record, VerifyRecord};
use prophetcomp_cli::output::Envelope;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

/// Runs the binary on a whitespace-separated argument line.
fn run(line: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prophetcomp"))
        .args(line.split_whitespace())
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .env_remove("PROPHETCOMP_LOG")
        .output()
        .expect("spawn cli")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf8")
}

/// Parses stdout into the record type and checks it serializes back to the
/// same JSON.
fn round_trip<R: DeserializeOwned + Serialize>(out: &Output) -> Envelope<R> {
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(out.status.code(), Some(0), "stderr: {err}");
    let raw: Value = serde_json::from_slice(&out.stdout).expect("json");
    let env: Envelope<R> = serde_json::from_value(raw.clone()).expect("schema");
    assert_eq!(serde_json::to_value(&env).unwrap(), raw);
    env
}

fn finite(e: Envelope<ComplexityRecord>) -> prophetcomp::ComplexityReport {
    match e.result {
        ComplexityRecord::Finite(r) => r,
        other => panic!("finite report expected, got {other:?}"),
    }
}

#[test]
fn ratio_examples() {
    let e: Envelope<RatioRecord> = round_trip(&run("ratio --m 1000 --n 1000 --k 1"));
    let expected = 1.0 - 0.999f64.powi(1000);
    assert!((e.result.gamma - expected).abs() < 1e-11, "{}", e.result.gamma);
    assert_eq!(e.manifest.command, "ratio");
    assert_eq!(e.manifest.timestamp, 1_700_000_000);

    let e: Envelope<RatioRecord> = round_trip(&run("ratio --m 2 --n 2 --k 2"));
    assert_eq!(e.result.gamma, 1.0);

    let e: Envelope<RatioRecord> = round_trip(&run("ratio --m 5 --n 4 --k 2"));
    assert_eq!(e.result.gamma, 57.0 / 64.0);
    assert_eq!(e.result.optimal_quantile, 0.5);
}

#[test]
fn complexity_examples() {
    let r = finite(round_trip(&run("complexity --k 1 --epsilon 0.01")));
    for v in [r.lower, r.upper, r.poisson_estimate] {
        assert!((v - 4.60517).abs() < 1e-5, "{v}");
    }

    let r = finite(round_trip(&run("complexity --k 2 --epsilon 0.367879")));
    assert!((r.lower - 0.5).abs() < 1e-6);
    let psi = r.psi_at_t_star.unwrap();
    assert!((psi - 1.5731).abs() < 1e-4, "{psi}");

    let r = finite(round_trip(&run("complexity --k 5 --epsilon 1e-6 --n 1000")));
    let f = r.finite_n_value.expect("finite-n value");
    assert!(
        r.lower <= f.ratio && f.ratio <= r.upper,
        "{} {} {}",
        r.lower,
        f.ratio,
        r.upper
    );
}

#[test]
fn complexity_epsilon_edges() {
    let out = run("complexity --k 3 --epsilon 0");
    let e: Envelope<ComplexityRecord> = round_trip(&out);
    assert!(matches!(e.result, ComplexityRecord::Infinite { k: 3, .. }));
    assert!(stdout(&out).contains("\"status\": \"infinite\""));

    for eps in ["1.5", "-0.1", "1"] {
        let out = run(&format!("complexity --k 2 --epsilon {eps}"));
        assert_eq!(out.status.code(), Some(2), "{eps}");
    }
}

#[test]
fn table1_values_and_reproducibility() {
    let e: Envelope<Table1Record> = round_trip(&run("table1"));
    let got: Vec<&str> = e.result.rows.iter().map(|r| r.beta_display.as_str()).collect();
    assert_eq!(got, ["1.376", "1.330", "1.293", "1.265", "1.244"]);
    assert_eq!(e.result.n, 1000);
    for fmt in ["json", "csv", "text"] {
        let line = format!("--format {fmt} table1");
        assert_eq!(run(&line).stdout, run(&line).stdout, "{fmt}");
    }
}

#[test]
fn verify_examples() {
    let e: Envelope<VerifyRecord> = round_trip(&run("verify --m 10 --n 10 --k 2 --grid 10000"));
    assert!(e.result.passed, "{:?}", e.result.failures());

    let e: Envelope<VerifyRecord> = round_trip(&run("verify --m 2 --n 2 --k 2"));
    assert!(e.result.passed, "{:?}", e.result.failures());

    let e: Envelope<VerifyRecord> = round_trip(&run("verify --m 7 --n 5 --k 3 --lp-cells 200"));
    let lp = e.result.lp.expect("lp requested");
    assert!(lp.passed && lp.gap < 5e-3, "{lp:?}");
}

#[test]
fn simulate_examples() {
    let line = "simulate --dist uniform:0,1 --m 10 --n 10 --k 1 --q auto --trials 1000000 --seed 7";
    let e: Envelope<SimulateRecord> = round_trip(&run(line));
    assert!(e.result.alg.z.abs() <= 4.0, "{:?}", e.result.alg);
    assert_eq!(e.result.q, 0.1);
    assert_eq!(e.manifest.seed, Some(7));

    let line = "simulate --dist exp:1 --m 3 --n 3 --k 3 --q 1 --trials 100000";
    let e: Envelope<SimulateRecord> = round_trip(&run(line));
    assert_eq!(e.result.alg.closed_form, 3.0);
    assert!(e.result.alg.z.abs() <= 4.0);
    // accepting everything is the prophet when m = n = k
    assert_eq!(e.result.alg.mc_mean, e.result.opt.mc_mean);

    let line = "simulate --dist atomwc:auto --m 20 --n 20 --k 2 --trials 1000000";
    let e: Envelope<SimulateRecord> = round_trip(&run(line));
    let r = &e.result;
    let slack = 4.0 * r.ratio.stderr + 0.01 * r.gamma;
    assert!((r.ratio.mc_mean - r.gamma).abs() <= slack, "{r:?}");
}

#[test]
fn usage_errors_exit_2() {
    let cases = [
        "ratio --m 1 --n 2 --k 2",
        "ratio --m 3 --n 3 --k 0",
        "verify --m 3 --n 3 --k 1 --lp-cells 1",
        "simulate --dist uniform:1,0 --m 3 --n 3 --k 1",
        "simulate --dist uniform:0,1 --m 3 --n 3 --k 1 --q 1.5",
        "--threads 0 table1",
        "frobnicate",
    ];
    for line in cases {
        let out = run(line);
        assert_eq!(out.status.code(), Some(2), "{line}");
        assert!(out.stdout.is_empty(), "{line}");
        assert!(!out.stderr.is_empty(), "{line}");
    }
    let out = run("simulate --dist foo:1 --m 3 --n 3 --k 1");
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    for name in ["uniform", "exp", "pareto", "table", "atomwc"] {
        assert!(err.contains(name), "grammar missing {name}: {err}");
    }
}

#[test]
fn csv_headers_are_fixed() {
    let cases = [
        ("ratio --m 5 --n 4 --k 2", "m,n,k,gamma,optimal_quantile"),
        (
            "complexity --k 2 --epsilon 0.1 --n-grid 10,50",
            "k,epsilon,status,lower,upper,closed_form_upper,t_star,psi_at_t_star,poisson_estimate,n,m,beta_n",
        ),
        ("table1", "k,upper_bound,epsilon,n,m,beta"),
        (
            "verify --m 4 --n 4 --k 2 --grid 200",
            "m,n,k,check,max_residual,passed,witness",
        ),
        (
            "simulate --dist uniform:0,1 --m 4 --n 4 --k 2 --trials 1000",
            "m,n,k,q,quantity,closed_form,mc_mean,stderr,z",
        ),
    ];
    for (line, header) in cases {
        let out = run(&format!("--format csv {line}"));
        assert_eq!(out.status.code(), Some(0), "{line}");
        let text = stdout(&out);
        assert_eq!(text.lines().next(), Some(header), "{line}");
        let width = header.split(',').count();
        assert!(text.lines().count() > 1, "{line}");
        for row in text.lines().skip(1) {
            assert_eq!(row.split(',').count(), width, "{row}");
        }
    }
}

#[test]
fn simulation_is_thread_count_invariant() {
    let line = "simulate --dist pareto:3,1 --m 6 --n 5 --k 2 --trials 50000 --seed 11";
    let serial = run(&format!("--threads 1 {line}"));
    let parallel = run(&format!("--threads 3 {line}"));
    assert_eq!(serial.status.code(), Some(0));
    assert_eq!(serial.stdout, parallel.stdout);
}

#[test]
fn diagnostics_stay_on_stderr() {
    let out = Command::new(env!("CARGO_BIN_EXE_prophetcomp"))
        .args(["table1"])
        .env("PROPHETCOMP_LOG", "debug")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let _: Value = serde_json::from_slice(&out.stdout).expect("stdout stays pure json");
    assert!(!out.stderr.is_empty());
}
