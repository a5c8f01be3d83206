use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use resilience_cli::{ModelDocument, SchedulerDocument};
use resilience_core::model::fixtures::{plant, random_model};
use resilience_core::rational::rat;
use resilience_core::synth::FiniteMemoryScheduler;
use resilience_core::{synthesize, MdpWithRepair, TransformedMdp};

fn example(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("resilience-documents-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn run(args: &[&Path]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_resilience"))
        .args(args)
        .output()
        .unwrap()
}

fn run_str(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_resilience"))
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn shipped_model_matches_fixture() {
    let text = std::fs::read_to_string(example("plant.json")).unwrap();
    assert_eq!(ModelDocument::parse(&text).unwrap().to_raw().unwrap(), plant());
}

#[test]
fn model_documents_round_trip() {
    for seed in 0..100 {
        let raw = random_model(seed, 6).to_raw();
        let doc = ModelDocument::from_raw(&raw);
        let back = ModelDocument::parse(&doc.to_json()).unwrap();
        assert_eq!(back, doc);
        assert_eq!(MdpWithRepair::validated(&back.to_raw().unwrap()).unwrap().to_raw(), raw);
    }
}

#[test]
fn scheduler_documents_round_trip() {
    let mut seen = 0;
    for seed in 0..60 {
        let m = random_model(seed, 6);
        let p = [rat(1, 2), rat(2, 3), rat(4, 5), rat(1, 1)][(seed / 4 % 4) as usize].clone();
        let s = synthesize(&m, &p, seed % 4).unwrap();
        let Some(sched) = s.scheduler() else { continue };
        let doc = SchedulerDocument::from_composed(&s.transformed, &s.components, sched, &p, s.availability().unwrap());
        let back = SchedulerDocument::parse(&doc.to_json()).unwrap();
        assert_eq!(back, doc);
        let bound = back.bind(&s.transformed).unwrap();
        assert_eq!(bound, sched.rendered);
        let memoryless = back.bind_memoryless(&s.transformed).unwrap();
        assert_eq!(
            FiniteMemoryScheduler::from_memoryless(&s.transformed, &memoryless).rules,
            sched.rendered.rules
        );
        seen += 1;
    }
    assert!(seen > 20);
}

#[test]
fn shipped_optimum_binds_to_the_synthesized_scheduler() {
    let m = MdpWithRepair::validated(&plant()).unwrap();
    let s = synthesize(&m, &rat(4, 5), 2).unwrap();
    let text = std::fs::read_to_string(example("plant_optimal.json")).unwrap();
    let doc = SchedulerDocument::parse(&text).unwrap();
    let mt = TransformedMdp::new(&m, 2);
    assert_eq!(doc.bind(&mt).unwrap(), s.scheduler().unwrap().rendered);
}

#[test]
fn validate_exit_codes() {
    let ok = run(&[Path::new("validate"), &example("plant.json")]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(ok.stderr.is_empty());

    let text = std::fs::read_to_string(example("plant.json")).unwrap();
    let bad_prob = scratch("bad_prob.json");
    std::fs::write(&bad_prob, text.replace("\"1/2\"", "\"1/0\"")).unwrap();
    assert_eq!(run(&[Path::new("validate"), &bad_prob]).status.code(), Some(3));

    // the repair state may fall back into the error before any operational state
    let loop_back = scratch("loop_back.json");
    std::fs::write(
        &loop_back,
        text.replace(
            "{ \"target\": \"rep\", \"prob\": \"1/2\" }",
            "{ \"target\": \"error\", \"prob\": \"1/2\" }",
        ),
    )
    .unwrap();
    let o = run(&[Path::new("validate"), &loop_back]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("invalid"));

    let not_json = scratch("not_json.json");
    std::fs::write(&not_json, "states: []").unwrap();
    assert_eq!(run(&[Path::new("validate"), &not_json]).status.code(), Some(3));
}

#[test]
fn synthesize_writes_a_document() {
    let out = scratch("synth.json");
    let o = run_str(&[
        "synthesize",
        example("plant.json").to_str().unwrap(),
        "--threshold",
        "0.8",
        "--cost-bound",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stderr.is_empty());
    let doc = SchedulerDocument::parse(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(doc.availability.as_deref(), Some("9/10"));
    assert_eq!(doc.threshold, "4/5");

    let usage = run_str(&[
        "synthesize",
        example("plant.json").to_str().unwrap(),
        "--threshold",
        "0",
        "--cost-bound",
        "2",
    ]);
    assert_eq!(usage.status.code(), Some(4));
}

#[test]
fn synthesize_dumps() {
    let o = run_str(&[
        "synthesize",
        example("plant.json").to_str().unwrap(),
        "--threshold",
        "4/5",
        "--cost-bound",
        "2",
        "--dump-lp",
        "--dump-components",
    ]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("\\ resiliency\nMaximize"));
    assert!(text.contains("res[error]"));
    assert!(text.contains("component 0: availability 1\n  states: op2\n"));
    assert!(text.ends_with("availability: 9/10 (0.900000)\n"));
}

#[test]
fn verify_exit_codes() {
    let model = example("plant.json");
    let ok = run(&[Path::new("verify"), &model, &example("plant_optimal.json")]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(ok.stderr.is_empty());
    assert!(String::from_utf8_lossy(&ok.stdout).contains("res 4/5 (0.800000) >= threshold 4/5"));

    let text = std::fs::read_to_string(example("beta_always.json")).unwrap();
    let partial = scratch("partial.json");
    std::fs::write(
        &partial,
        text.replace(
            "      { \"state\": \"op2\", \"distribution\": [{ \"action\": \"a\", \"prob\": \"1\" }] }\n",
            "",
        )
        .replace("\"1\" }] },\n    ]", "\"1\" }] }\n    ]"),
    )
    .unwrap();
    let o = run(&[Path::new("verify"), &model, &partial]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("op2"));

    let unknown = scratch("unknown.json");
    std::fs::write(&unknown, text.replace("\"beta\"", "\"gamma\"")).unwrap();
    assert_eq!(run(&[Path::new("verify"), &model, &unknown]).status.code(), Some(2));

    // the optimum stays resilient for weaker thresholds and fails stronger ones
    let opt = example("plant_optimal.json");
    let weaker = run_str(&[
        "verify",
        model.to_str().unwrap(),
        opt.to_str().unwrap(),
        "--threshold",
        "1/2",
    ]);
    assert_eq!(weaker.status.code(), Some(0));
    let stronger = run_str(&[
        "verify",
        model.to_str().unwrap(),
        opt.to_str().unwrap(),
        "--threshold",
        "9/10",
    ]);
    assert_eq!(stronger.status.code(), Some(1));
}

#[test]
fn simulate_output() {
    let args = [
        "simulate",
        example("plant.json").to_str().unwrap().to_owned().leak(),
        example("plant_optimal.json").to_str().unwrap().to_owned().leak(),
        "--steps",
        "5000",
        "--trials",
        "0",
    ];
    let o = run_str(&args);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stderr.is_empty());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("mean availability: n/a"));

    let mut args = args.to_vec();
    args[6] = "30";
    let text = String::from_utf8(run_str(&args).stdout).unwrap();
    let mean: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("mean availability: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((0.0..=1.0).contains(&mean));
}
