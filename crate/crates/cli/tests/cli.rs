use std::path::Path;
use std::process::{Command, Output};

use adavits::io::container::write_phonemes;
use adavits::io::write_config;
use adavits::text2ppg::PhonemeSequence;
use adavits::ModelConfig;

fn adavits(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adavits")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = adavits(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fails_with(args: &[&str], code: &str) {
    let out = adavits(args);
    assert!(!out.status.success(), "{args:?} should fail");
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with(&format!("error[{code}]: ")), "{err}");
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn analyze_json_is_consistent() {
    let out = ok(&["analyze", "--json", "--seconds", "2", "--convention", "mac1"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let modules = v["modules"].as_array().unwrap();
    assert_eq!(modules.len(), 5);
    let sum: u64 = modules.iter().map(|m| m["params"].as_u64().unwrap()).sum();
    assert_eq!(v["total_params"].as_u64().unwrap(), sum);
    assert_eq!(v["frames"], 160);
    assert_eq!(v["convention"], "mac1");
    assert!(v["flow_coupling_params"].as_u64().unwrap() > 0);

    let table = ok(&["analyze", "--scope", "all", "--set", "attention_kind=scaled_dot"]);
    assert!(table.contains("mcd") && table.contains("total"));
}

#[test]
fn workflow_on_micro_config() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    let cfg = ModelConfig::micro();
    write_config(&cfg, p("micro.cfg")).unwrap();
    write_phonemes(
        &PhonemeSequence::new(vec![1, 4, 9, 2, 7, 3, 11, 5], cfg.vocab_size).unwrap(),
        p("ph.advt"),
    )
    .unwrap();
    let c = s(&p("micro.cfg")).to_string();

    ok(&["init-weights", "--config", &c, "--seed", "3", "--out", s(&p("w.advt"))]);
    ok(&["init-weights", "--config", &c, "--seed", "3", "--out", s(&p("w2.advt"))]);
    assert_eq!(
        std::fs::read(p("w.advt")).unwrap(),
        std::fs::read(p("w2.advt")).unwrap()
    );

    let t2p = ok(&[
        "text2ppg",
        "--config",
        &c,
        "--weights",
        s(&p("w.advt")),
        "--phonemes",
        s(&p("ph.advt")),
        "--out",
        s(&p("ppg.advt")),
    ]);
    let frames = serde_json::from_str::<serde_json::Value>(&t2p).unwrap()["frames"]
        .as_u64()
        .unwrap() as usize;
    assert!(frames > 0);

    let synth = |out: &str| {
        ok(&[
            "synthesize",
            "--config",
            &c,
            "--weights",
            s(&p("w.advt")),
            "--ppg",
            s(&p("ppg.advt")),
            "--speaker",
            "2",
            "--seed",
            "9",
            "--out",
            s(&p(out)),
        ])
    };
    let summary: serde_json::Value = serde_json::from_str(&synth("a.wav")).unwrap();
    synth("b.wav");
    let a = std::fs::read(p("a.wav")).unwrap();
    assert_eq!(a, std::fs::read(p("b.wav")).unwrap());
    assert_eq!(a.len(), 44 + 2 * frames * cfg.hop_length);
    assert_eq!(summary["bytes"].as_u64().unwrap() as usize, a.len());

    let losses = ok(&[
        "losses",
        "--config",
        &c,
        "--weights",
        s(&p("w.advt")),
        "--wav",
        s(&p("a.wav")),
        "--ppg",
        s(&p("ppg.advt")),
        "--speaker",
        "2",
        "--json",
    ]);
    let r: serde_json::Value = serde_json::from_str(&losses).unwrap();
    let g = |k: &str| r[k].as_f64().unwrap();
    assert_eq!(g("l_cvae"), g("l_kl") + 45.0 * g("l_recon") + 10.0 * g("l_ppg"));
    assert_eq!(g("l_g"), g("l_adv_g") + 2.0 * g("l_fm") + g("l_cvae"));

    fails_with(
        &[
            "synthesize",
            "--config",
            &c,
            "--weights",
            s(&p("w.advt")),
            "--ppg",
            s(&p("ppg.advt")),
            "--speaker",
            "99",
            "--out",
            s(&p("x.wav")),
        ],
        "unknown_speaker",
    );
    fails_with(
        &[
            "synthesize",
            "--weights",
            s(&p("w.advt")),
            "--ppg",
            s(&p("ppg.advt")),
            "--speaker",
            "0",
            "--out",
            s(&p("x.wav")),
        ],
        "shape",
    );
    let mut bad = std::fs::read(p("w.advt")).unwrap();
    bad[0] = b'Z';
    std::fs::write(p("bad.advt"), &bad).unwrap();
    fails_with(
        &[
            "text2ppg",
            "--config",
            &c,
            "--weights",
            s(&p("bad.advt")),
            "--phonemes",
            s(&p("ph.advt")),
            "--out",
            s(&p("y.advt")),
        ],
        "bad_magic",
    );
    std::fs::write(p("broken.cfg"), "fft_size = 64\nfft_size = 64\n").unwrap();
    fails_with(&["analyze", "--config", s(&p("broken.cfg"))], "config_parse");
}

#[test]
fn errors_are_single_line() {
    fails_with(&["analyze", "--seconds", "0"], "invalid_argument");
    fails_with(&["analyze", "--convention", "mac3"], "usage");
    fails_with(&["frobnicate"], "usage");
    fails_with(&["selftest", "--filter", "no_such_check"], "error");
}

#[test]
fn selftest_subset_passes() {
    let out = ok(&["selftest", "--filter", "sharing"]);
    assert!(out.starts_with("PASS sharing_identity"));
}
