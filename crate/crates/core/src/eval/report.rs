//! Evaluation driver and its on-disk outputs.
//!
//! ROC files hold a `threshold,far,frr` table followed by `#` summary lines:
//!
//! ```text
//! threshold,far,frr
//! 2.5,1,0
//! ...
//! # kind,distance
//! # eer,0.05,1.21
//! # reference,mit-baseline-1,0.08
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{
    build_models, run_baseline_on, run_vaulted_on, security_report, Corpus, EvalError,
    ExperimentConfig, RocCurve, RocPoint, ScoreKind, SecurityReport, SplitPlan, TrialOutcome, VaultedMode,
};
use crate::gmm::ScoreDirection;
use crate::protocol::write_atomic;

/// A published error rate shown next to a computed curve. Never derived
/// from data in this crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferencePoint {
    /// Stem of the ROC file the annotation belongs to.
    pub experiment: &'static str,
    pub label: &'static str,
    pub eer: f64,
}

pub const REFERENCE_POINTS: [ReferencePoint; 5] = [
    ReferencePoint { experiment: "baseline1", label: "mit-baseline-1", eer: 0.08 },
    ReferencePoint { experiment: "baseline2", label: "mit-baseline-2", eer: 0.06 },
    ReferencePoint { experiment: "vaulted_dedicated", label: "mit-vaulted-dedicated", eer: 0.0 },
    ReferencePoint { experiment: "vaulted_all_vs_all", label: "mit-vaulted-all-vs-all", eer: 0.06 },
    ReferencePoint { experiment: "vaulted_all_vs_all", label: "prior-work-vaulted", eer: 0.11 },
];

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSettings {
    pub experiment: ExperimentConfig,
    /// Direction used for the vaulted experiments. Baselines always run both.
    pub direction: ScoreDirection,
    pub bits_per_question: u32,
    /// Phrase count for the security report; defaults to the smallest
    /// per-speaker phrase count in the corpus.
    pub phrases: Option<u32>,
    /// Free-form corpus description copied into `config.txt`.
    pub corpus_label: String,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            experiment: ExperimentConfig::default(),
            direction: ScoreDirection::GalleryVariance,
            bits_per_question: 1,
            phrases: None,
            corpus_label: String::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalOutputs {
    pub baseline1: (Vec<TrialOutcome>, RocCurve),
    pub baseline2: (Vec<TrialOutcome>, RocCurve),
    pub dedicated: (Vec<TrialOutcome>, RocCurve),
    pub all_vs_all: (Vec<TrialOutcome>, RocCurve),
    pub security: SecurityReport,
    /// `(speaker, phrase, reason)` for untrainable phrases.
    pub skipped: Vec<(String, String, String)>,
    /// Every file written, in write order.
    pub files: Vec<PathBuf>,
}

fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

fn csv_err(e: impl std::fmt::Display) -> EvalError {
    EvalError::Csv(e.to_string())
}

fn roc_csv_bytes(curve: &RocCurve, experiment: &str) -> Result<Vec<u8>, EvalError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["threshold", "far", "frr"]).map_err(csv_err)?;
    for p in &curve.points {
        w.write_record([fmt_f64(p.threshold), fmt_f64(p.far), fmt_f64(p.frr)])
            .map_err(csv_err)?;
    }
    let mut out = w.into_inner().map_err(csv_err)?;
    let mut tail = String::new();
    let _ = writeln!(tail, "# kind,{}", curve.kind.as_str());
    let _ = writeln!(tail, "# eer,{},{}", fmt_f64(curve.eer), fmt_f64(curve.eer_threshold));
    for r in REFERENCE_POINTS.iter().filter(|r| r.experiment == experiment) {
        let _ = writeln!(tail, "# reference,{},{}", r.label, fmt_f64(r.eer));
    }
    out.extend_from_slice(tail.as_bytes());
    Ok(out)
}

/// Writes `<dir>/<experiment>_roc.csv` and returns its path.
pub fn write_roc_csv(curve: &RocCurve, dir: &Path, experiment: &str) -> Result<PathBuf, EvalError> {
    let path = dir.join(format!("{experiment}_roc.csv"));
    write_atomic(&path, &roc_csv_bytes(curve, experiment)?).map_err(|e| EvalError::io(&path, e))?;
    Ok(path)
}

/// Reads back a ROC file written by [`write_roc_csv`], together with its
/// reference annotations as `(label, eer)`.
pub fn read_roc_summary(path: &Path) -> Result<(RocCurve, Vec<(String, f64)>), EvalError> {
    let text = fs::read_to_string(path).map_err(|e| EvalError::io(path, e))?;
    let num = |s: &str| s.parse::<f64>().map_err(|_| EvalError::Csv(format!("{}: bad number {s:?}", path.display())));
    let mut points = Vec::new();
    let (mut kind, mut eer, mut references) = (None, None, Vec::new());
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != 3 {
            return Err(EvalError::Csv(format!("{}: expected 3 columns", path.display())));
        }
        points.push(RocPoint {
            threshold: num(&rec[0])?,
            far: num(&rec[1])?,
            frr: num(&rec[2])?,
        });
    }
    for line in text.lines().filter_map(|l| l.strip_prefix("# ")) {
        let fields: Vec<&str> = line.split(',').collect();
        match fields.as_slice() {
            ["kind", k] => kind = ScoreKind::parse(k),
            ["eer", v, t] => eer = Some((num(v)?, num(t)?)),
            ["reference", label, v] => references.push((label.to_string(), num(v)?)),
            _ => return Err(EvalError::Csv(format!("{}: unknown summary line {line:?}", path.display()))),
        }
    }
    let (Some(kind), Some((eer, eer_threshold))) = (kind, eer) else {
        return Err(EvalError::Csv(format!("{}: missing summary lines", path.display())));
    };
    Ok((
        RocCurve {
            kind,
            points,
            eer,
            eer_threshold,
        },
        references,
    ))
}

const OUTCOME_HEADER: [&str; 8] = ["trial_id", "genuine", "score", "kind", "claimed", "claimant", "phrase", "direction"];

/// Writes `<dir>/<experiment>_outcomes.csv` and returns its path. An empty
/// `phrase` cell means the trial spans all phrases.
pub fn write_outcomes_csv(outcomes: &[TrialOutcome], dir: &Path, experiment: &str) -> Result<PathBuf, EvalError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(OUTCOME_HEADER).map_err(csv_err)?;
    for o in outcomes {
        w.write_record([
            o.trial_id.as_str(),
            if o.genuine { "1" } else { "0" },
            &fmt_f64(o.score),
            o.kind.as_str(),
            &o.claimed,
            &o.claimant,
            o.phrase.as_deref().unwrap_or(""),
            o.direction.as_str(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(csv_err)?;
    let path = dir.join(format!("{experiment}_outcomes.csv"));
    write_atomic(&path, &bytes).map_err(|e| EvalError::io(&path, e))?;
    Ok(path)
}

pub fn read_outcomes_csv(path: &Path) -> Result<Vec<TrialOutcome>, EvalError> {
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = rdr.headers().map_err(csv_err)?;
    if header.iter().ne(OUTCOME_HEADER) {
        return Err(EvalError::Csv(format!("{}: unexpected header", path.display())));
    }
    let bad = |what: &str, v: &str| EvalError::Csv(format!("{}: bad {what} {v:?}", path.display()));
    rdr.records()
        .map(|rec| {
            let r = rec.map_err(csv_err)?;
            Ok(TrialOutcome {
                trial_id: r[0].to_string(),
                genuine: match &r[1] {
                    "1" => true,
                    "0" => false,
                    v => return Err(bad("genuine flag", v)),
                },
                score: r[2].parse().map_err(|_| bad("score", &r[2]))?,
                kind: ScoreKind::parse(&r[3]).ok_or_else(|| bad("score kind", &r[3]))?,
                claimed: r[4].to_string(),
                claimant: r[5].to_string(),
                phrase: (!r[6].is_empty()).then(|| r[6].to_string()),
                direction: ScoreDirection::parse(&r[7]).ok_or_else(|| bad("direction", &r[7]))?,
            })
        })
        .collect()
}

fn config_text(corpus: &Corpus, settings: &EvalSettings, security: &SecurityReport) -> String {
    let x = &settings.experiment;
    let mut s = String::new();
    let _ = writeln!(s, "corpus = {}", settings.corpus_label);
    let _ = writeln!(s, "speakers = {}", corpus.speakers.len());
    let _ = writeln!(s, "seed = {}", x.seed);
    let _ = writeln!(s, "vaulted_direction = {}", settings.direction);
    let _ = writeln!(s, "bits_per_question = {}", settings.bits_per_question);
    let _ = writeln!(s, "security_phrases = {}", security.num_phrases);
    let _ = writeln!(s, "mfcc = {:?}", x.mfcc);
    let _ = writeln!(s, "train = {:?}", x.train);
    s
}

/// Runs both baselines and both vaulted modes on one seeded split and
/// writes every CSV, `security_report.txt` and `config.txt` into `out_dir`.
pub fn run_evaluation(corpus: &Corpus, settings: &EvalSettings, out_dir: &Path) -> Result<EvalOutputs, EvalError> {
    let min_phrases = corpus.speakers.values().map(|p| p.len()).min().unwrap_or(0);
    let num_phrases = settings.phrases.unwrap_or(u32::try_from(min_phrases).unwrap_or(u32::MAX));
    let security = security_report(num_phrases, settings.bits_per_question, false)?;
    let compromised = security_report(num_phrases, settings.bits_per_question, true)?;

    let cfg = &settings.experiment;
    let split = SplitPlan::new(corpus, cfg.seed)?;
    let models = build_models(corpus, &split, cfg)?;
    let baseline1 = run_baseline_on(&models, ScoreDirection::GalleryVariance)?;
    let baseline2 = run_baseline_on(&models, ScoreDirection::ProbeVariance)?;
    let dedicated = run_vaulted_on(&models, settings.direction, VaultedMode::Dedicated, cfg.seed)?;
    let all_vs_all = run_vaulted_on(&models, settings.direction, VaultedMode::AllVsAll, cfg.seed)?;

    fs::create_dir_all(out_dir).map_err(|e| EvalError::io(out_dir, e))?;
    let mut files = Vec::new();
    for (name, (outcomes, curve)) in [
        ("baseline1", &baseline1),
        ("baseline2", &baseline2),
        ("vaulted_dedicated", &dedicated),
        ("vaulted_all_vs_all", &all_vs_all),
    ] {
        files.push(write_roc_csv(curve, out_dir, name)?);
        files.push(write_outcomes_csv(outcomes, out_dir, name)?);
    }
    let path = out_dir.join("security_report.txt");
    let text = format!("{}\n{}", security.to_text(), compromised.to_text());
    write_atomic(&path, text.as_bytes()).map_err(|e| EvalError::io(&path, e))?;
    files.push(path);
    let path = out_dir.join("config.txt");
    write_atomic(&path, config_text(corpus, settings, &security).as_bytes()).map_err(|e| EvalError::io(&path, e))?;
    files.push(path);

    Ok(EvalOutputs {
        baseline1,
        baseline2,
        dedicated,
        all_vs_all,
        security,
        skipped: models.skipped,
        files,
    })
}
