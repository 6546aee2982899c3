use std::path::Path;
use std::process::{Command, Output};

use vaulted_voice::eval::{compute_roc, read_outcomes_csv, read_roc_summary};
use vaulted_voice::gmm::MODEL_MAGIC;
use vaulted_voice::vault::{EnrollmentRecord, ServerKey};

const SYNTH: &str = "speakers=4,phrases=8,takes=6";

fn vvv(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vvv"))
        .current_dir(dir)
        .env("VVV_PASSWORD", "hunter2")
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("terminated by signal")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn keygen_writes_a_loadable_key_and_refuses_to_overwrite() {
    let dir = tempfile::tempdir().unwrap();
    let out = vvv(dir.path(), &["keygen", "--seed", "7"]);
    assert_eq!(code(&out), 0, "{out:?}");
    let key = ServerKey::from_file_bytes(&std::fs::read(dir.path().join("server.key")).unwrap()).unwrap();
    assert_eq!(key.key_id(), ServerKey::from_seed(7).key_id());
    assert!(stdout(&out).contains(&format!("{:016x}", key.key_id())), "{}", stdout(&out));

    assert_eq!(code(&vvv(dir.path(), &["keygen"])), 2);
    assert_eq!(code(&vvv(dir.path(), &["keygen", "--force"])), 0);
    let replaced = ServerKey::from_file_bytes(&std::fs::read(dir.path().join("server.key")).unwrap()).unwrap();
    assert_ne!(replaced.key_id(), key.key_id());
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&vvv(d, &["keygen", "--seed", "1"])), 0);
    let enroll = ["enroll", "--synth", SYNTH, "--speaker", "spk-00", "--seed", "3"];
    assert_eq!(code(&vvv(d, &enroll)), 0);
    assert_eq!(code(&vvv(d, &enroll)), 2, "duplicate enrollment");

    let verify = |extra: &[&str]| {
        let mut args = vec!["verify", "--synth", SYNTH, "--claim", "spk-00"];
        args.extend_from_slice(extra);
        vvv(d, &args)
    };
    assert_eq!(code(&verify(&[])), 0);
    assert_eq!(code(&verify(&["--session", "imposter"])), 1);
    assert_eq!(code(&verify(&["--as", "spk-02"])), 1);
    assert_eq!(code(&vvv(d, &["verify", "--synth", SYNTH, "--claim", "nobody", "--as", "spk-00"])), 1);

    let wrong = Command::new(env!("CARGO_BIN_EXE_vvv"))
        .current_dir(d)
        .env("VVV_PASSWORD", "not it")
        .args(["verify", "--synth", SYNTH, "--claim", "spk-00"])
        .output()
        .unwrap();
    assert_eq!(code(&wrong), 3);

    assert_eq!(code(&vvv(d, &["revoke", "--id", "spk-00"])), 0);
    assert_eq!(code(&verify(&[])), 1);
    assert_eq!(code(&vvv(d, &["revoke", "--id", "spk-00"])), 2);
    assert_eq!(code(&vvv(d, &["revoke", "--id", "ghost"])), 2);

    assert_eq!(code(&vvv(d, &["enroll", "--synth", SYNTH, "--speaker", "spk-00", "--bits-per-question", "2"])), 0);
    assert_eq!(code(&verify(&["--pairs", "5"])), 0);

    assert_eq!(code(&vvv(d, &["verify", "--corpus", "no/such/dir", "--claim", "spk-00"])), 2);
    assert_eq!(code(&vvv(d, &["enroll", "--synth", "voices=3", "--speaker", "spk-00"])), 2);
    assert_eq!(code(&vvv(d, &["frobnicate"])), 2);
}

#[test]
fn stored_record_matches_the_phrase_list() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&vvv(d, &["keygen", "--seed", "2"])), 0);
    let t = d.join("enroll.hex");
    let out = vvv(
        d,
        &["enroll", "--synth", SYNTH, "--speaker", "spk-01", "--seed", "4", "--transcript", t.to_str().unwrap()],
    );
    assert_eq!(code(&out), 0, "{out:?}");

    let files: Vec<_> = std::fs::read_dir(d.join("records")).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(files.len(), 1);
    let bytes = std::fs::read(&files[0]).unwrap();
    assert!(!bytes.windows(4).any(|w| w == MODEL_MAGIC));
    assert!(!bytes.windows(7).any(|w| w == b"hunter2"));
    let record = EnrollmentRecord::from_bytes(&bytes).unwrap();
    assert_eq!(record.user_id, "spk-01");
    assert_eq!(record.pairs.len(), 8);
    assert_eq!(record.created_at, 0);

    let hex = std::fs::read_to_string(&t).unwrap();
    assert!(hex.lines().all(|l| l.starts_with("C> ") || l.starts_with("S> ")));
    assert!(!hex.contains(&hex_of(MODEL_MAGIC)));
}

fn hex_of(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[test]
fn eval_summaries_agree_with_the_outcome_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = vvv(dir.path(), &["eval", "--synth", SYNTH, "--out", "run"]);
    assert_eq!(code(&out), 0, "{out:?}");
    let run = dir.path().join("run");
    assert_eq!(std::fs::read_dir(&run).unwrap().count(), 10);
    for exp in ["baseline1", "baseline2", "vaulted_dedicated", "vaulted_all_vs_all"] {
        let (summary, refs) = read_roc_summary(&run.join(format!("{exp}_roc.csv"))).unwrap();
        let outcomes = read_outcomes_csv(&run.join(format!("{exp}_outcomes.csv"))).unwrap();
        let again = compute_roc(&outcomes).unwrap();
        assert_eq!(summary.eer, again.eer, "{exp}");
        assert_eq!(summary.points, again.points, "{exp}");
        assert!(!refs.is_empty());
        assert!(stdout(&out).contains(&format!("{:.4}", summary.eer)));
    }
    let report = std::fs::read_to_string(run.join("security_report.txt")).unwrap();
    assert!(report.contains("2^-8"), "{report}");
}
