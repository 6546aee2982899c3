//! The `vvv` command line.
//!
//! Exit codes: 0 accept or success, 1 reject, 2 usage or input error,
//! 3 integrity or authentication failure.

mod corpus_args;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub use corpus_args::{parse_synth_spec, CorpusArgs};

use crate::eval::{gallery_count, run_evaluation, EvalError, EvalSettings, ExperimentConfig, SplitPlan};
use crate::gmm::ScoreDirection;
use crate::protocol::{
    run_enrollment, run_verification, train_from_clips, write_atomic, ClientConfig, DirStore, ProtocolError,
    RecordStore, Server, ServerConfig, Transcript, Utterances, DEFAULT_THRESHOLD,
};
use crate::vault::{AttributedModel, ServerKey, MIN_KDF_ITERATIONS, SALT_LEN};

pub const PASSWORD_ENV: &str = "VVV_PASSWORD";

#[derive(Debug, Parser)]
#[command(name = "vvv", version, about = "Vaulted voice verification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create a server key file.
    Keygen(KeygenArgs),
    /// Enroll a corpus speaker.
    Enroll(EnrollArgs),
    /// Verify a claimed identity with a corpus speaker's voice.
    Verify(VerifyArgs),
    /// Run the baseline and vaulted experiments.
    Eval(EvalArgs),
    /// Revoke an enrollment record.
    Revoke(RevokeArgs),
}

#[derive(Debug, Args)]
pub struct KeygenArgs {
    /// Key file to create.
    #[arg(long, default_value = "server.key")]
    pub out: PathBuf,
    /// Overwrite an existing key file.
    #[arg(long)]
    pub force: bool,
    /// Derive the key from a seed instead of OS randomness (testing only).
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ServerArgs {
    /// Server key file written by `keygen`.
    #[arg(long, default_value = "server.key")]
    pub key: PathBuf,
    /// Directory holding one record file per user.
    #[arg(long, default_value = "records")]
    pub store: PathBuf,
    /// Seeds every random choice; records then carry timestamp 0.
    #[arg(long)]
    pub seed: Option<u64>,    /// Seeds the gallery/probe split of the corpus.
    #[arg(long, default_value_t = 42)]
    pub split_seed: u64,
}

#[derive(Debug, Args)]
pub struct EnrollArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub server: ServerArgs,
    /// Corpus speaker to enroll; also the user id.
    #[arg(long)]
    pub speaker: String,
    /// Bits per challenge entry; each entry holds 2^b models.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=7))]
    pub bits_per_question: u8,
    /// Password-stretching iterations.
    #[arg(long, default_value_t = MIN_KDF_ITERATIONS)]
    pub kdf_iterations: u32,
    /// Write the hex transcript of the exchange here.
    #[arg(long)]
    pub transcript: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SessionChoice {
    /// Held-out genuine takes of the speaker.
    Probe,
    /// Held-out takes from the speaker's dedicated imposter session.
    Imposter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirectionArg {
    Gallery,
    Probe,
}

impl From<DirectionArg> for ScoreDirection {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Gallery => ScoreDirection::GalleryVariance,
            DirectionArg::Probe => ScoreDirection::ProbeVariance,
        }
    }
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub server: ServerArgs,
    /// Claimed user id.
    #[arg(long)]
    pub claim: String,
    /// Corpus speaker whose recordings answer; defaults to the claimant.
    #[arg(long = "as")]
    pub as_speaker: Option<String>,
    /// Which held-out recordings answer the challenge.
    #[arg(long, value_enum, default_value_t = SessionChoice::Probe)]
    pub session: SessionChoice,
    /// Challenge entries; defaults to every enrolled pair.
    #[arg(long)]
    pub pairs: Option<usize>,
    /// Fraction of correct bits needed to accept.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
    /// Which model supplies the variance when scoring.
    #[arg(long, value_enum, default_value_t = DirectionArg::Gallery)]
    pub direction: DirectionArg,
    /// Write the hex transcript of the exchange here.
    #[arg(long)]
    pub transcript: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Output directory for the CSV files and reports.
    #[arg(long)]
    pub out: PathBuf,
    /// Seeds the gallery/probe split and trial sampling.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Bits per question for the guessing bound.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..=64))]
    pub bits_per_question: u32,
    /// Direction for the vaulted experiments.
    #[arg(long, value_enum, default_value_t = DirectionArg::Gallery)]
    pub direction: DirectionArg,
}

#[derive(Debug, Args)]
pub struct RevokeArgs {
    /// User id to revoke.
    #[arg(long)]
    pub id: String,
    /// Directory holding one record file per user.
    #[arg(long, default_value = "records")]
    pub store: PathBuf,
}

/// A failed command and the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub const REJECT: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const INTEGRITY: u8 = 3;

    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: Self::USAGE,
            message: message.into(),
        }
    }

    fn protocol(e: ProtocolError) -> Self {
        let code = match &e {
            e if e.is_integrity_failure() => Self::INTEGRITY,
            ProtocolError::Revoked | ProtocolError::UnknownUser => Self::REJECT,
            _ => Self::USAGE,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        Self::usage(e.to_string())
    }
}

impl From<ProtocolError> for Failure {
    fn from(e: ProtocolError) -> Self {
        Self::protocol(e)
    }
}

type Outcome = Result<u8, Failure>;

/// Parses `std::env::args`, runs the command and reports errors on stderr.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { Failure::USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("vvv: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

pub fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Keygen(a) => keygen(&a),
        Command::Enroll(a) => enroll(&a),
        Command::Verify(a) => verify(&a),
        Command::Eval(a) => eval(&a),
        Command::Revoke(a) => revoke(&a),
    }
}

fn rng_for(seed: Option<u64>) -> ChaCha20Rng {
    seed.map_or_else(ChaCha20Rng::from_entropy, ChaCha20Rng::seed_from_u64)
}

fn keygen(a: &KeygenArgs) -> Outcome {
    if a.out.exists() && !a.force {
        return Err(Failure::usage(format!("{} exists; pass --force to overwrite", a.out.display())));
    }
    let mut rng = rng_for(a.seed);
    let key = ServerKey::generate(&mut rng);
    write_atomic(&a.out, &key.to_file_bytes()).map_err(|e| Failure::usage(format!("{}: {e}", a.out.display())))?;
    let salt: [u8; SALT_LEN] = rng.gen();
    println!("key id: {:016x}", key.key_id());
    println!("wrote {}", a.out.display());
    println!("user salt template: {}", hex::encode(salt));
    Ok(0)
}

fn load_key(path: &Path) -> Result<ServerKey, Failure> {
    let bytes = fs::read(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    ServerKey::from_file_bytes(&bytes).map_err(|e| Failure {
        code: Failure::INTEGRITY,
        message: format!("{}: {e}", path.display()),
    })
}

/// Reads the password from `VVV_PASSWORD`, or prompts without echo.
pub fn read_password() -> Result<String, Failure> {
    let pw = match std::env::var(PASSWORD_ENV) {
        Ok(pw) => pw,
        Err(_) => rpassword::prompt_password("password: ").map_err(|e| Failure::usage(format!("password prompt: {e}")))?,
    };
    if pw.is_empty() {
        return Err(Failure::usage("empty password"));
    }
    Ok(pw)
}

fn open_server(args: &ServerArgs, config: ServerConfig) -> Result<Server<DirStore>, Failure> {
    let key = load_key(&args.key)?;
    let store = DirStore::open(&args.store)?;
    Ok(Server::new(key, store, config)?)
}

fn save_transcript(path: Option<&Path>, t: &Transcript) -> Result<(), Failure> {
    if let Some(p) = path {
        write_atomic(p, t.to_hex().as_bytes()).map_err(|e| Failure::usage(format!("{}: {e}", p.display())))?;
    }
    Ok(())
}

fn enroll(a: &EnrollArgs) -> Outcome {
    let corpus = a.corpus.load()?;
    let phrases: Vec<String> = corpus.phrases(&a.speaker).map(String::from).collect();
    if phrases.is_empty() {
        return Err(Failure::usage(format!("speaker {:?} not in corpus", a.speaker)));
    }
    let split = SplitPlan::new(&corpus, a.server.split_seed)?;
    let exp = ExperimentConfig::default();
    let imposter = corpus.imposters.get(&a.speaker).cloned().unwrap_or_default();

    let mut gallery = BTreeMap::new();
    let mut pool: BTreeMap<String, Vec<AttributedModel>> = BTreeMap::new();
    for phrase in &phrases {
        let s = split.get(&a.speaker, phrase).expect("split covers every phrase");
        let enroll = corpus.enrollment_takes(&a.speaker, phrase);
        let clips: Vec<_> = s.gallery.iter().map(|&i| enroll[i].clip.clone()).collect();
        gallery.insert(phrase.clone(), clips);
        let imp = corpus.imposter_takes(&a.speaker, phrase);
        let clips: Vec<_> = s.chaff.iter().map(|&i| imp[i].clip.clone()).collect();
        let chaff = train_from_clips(&clips, phrase, &exp.mfcc, &exp.train)?;
        pool.entry(phrase.clone()).or_default().push(AttributedModel::new(&imposter, chaff));
    }
    if a.bits_per_question > 1 {
        // wider groups also draw on the other speakers' enrollment models
        for other in corpus.speaker_ids().filter(|&s| s != a.speaker && s != imposter) {
            for phrase in &phrases {
                let takes = corpus.enrollment_takes(other, phrase);
                if takes.is_empty() {
                    continue;
                }
                let clips: Vec<_> = takes[..gallery_count(takes.len())].iter().map(|t| t.clip.clone()).collect();
                let m = train_from_clips(&clips, phrase, &exp.mfcc, &exp.train)?;
                pool.entry(phrase.clone()).or_default().push(AttributedModel::new(other, m));
            }
        }
    }

    let password = read_password()?;
    let config = ServerConfig {
        phrases: phrases.clone(),
        bits_per_question: a.bits_per_question,
        seed: a.server.seed,
        fixed_time: a.server.seed.map(|_| 0),
        ..ServerConfig::default()
    };
    let mut server = open_server(&a.server, config)?;
    let live = Utterances {
        clips: gallery,
        mfcc: exp.mfcc,
        train: exp.train,
    };
    let client = ClientConfig {
        kdf_iterations: a.kdf_iterations,
        seed: a.server.seed.map(|s| s ^ 0x636c_6965_6e74),
        ..ClientConfig::default()
    };
    let (result, transcript) = run_enrollment(&mut server, &a.speaker, &password, &live, &pool, &client);
    save_transcript(a.transcript.as_deref(), &transcript)?;
    let receipt = result?;
    println!("enrolled {} with {} pairs", receipt.user_id, receipt.pair_ids.len());
    Ok(0)
}

fn verify(a: &VerifyArgs) -> Outcome {
    if !(a.threshold > 0.0 && a.threshold <= 1.0) {
        return Err(Failure::usage(format!("threshold must be in (0, 1], got {}", a.threshold)));
    }
    let corpus = a.corpus.load()?;
    let speaker = a.as_speaker.as_deref().unwrap_or(&a.claim);
    let split = SplitPlan::new(&corpus, a.server.split_seed)?;
    let mut clips = BTreeMap::new();
    for phrase in corpus.phrases(speaker) {
        let s = split.get(speaker, phrase).expect("split covers every phrase");
        let (takes, idx) = match a.session {
            SessionChoice::Probe => (corpus.enrollment_takes(speaker, phrase), &s.probe),
            SessionChoice::Imposter => (corpus.imposter_takes(speaker, phrase), &s.attack),
        };
        clips.insert(phrase.to_string(), idx.iter().map(|&i| takes[i].clip.clone()).collect());
    }
    if clips.is_empty() {
        return Err(Failure::usage(format!("speaker {speaker:?} not in corpus")));
    }
    let password = read_password()?;
    let config = ServerConfig {
        threshold: a.threshold,
        pairs_per_challenge: a.pairs,
        seed: a.server.seed,
        fixed_time: a.server.seed.map(|_| 0),
        ..ServerConfig::default()
    };
    let mut server = open_server(&a.server, config)?;
    let exp = ExperimentConfig::default();
    let live = Utterances {
        clips,
        mfcc: exp.mfcc,
        train: exp.train,
    };
    let client = ClientConfig {
        direction: a.direction.into(),
        ..ClientConfig::default()
    };
    let (result, transcript) = run_verification(&mut server, &a.claim, &password, &live, &client);
    save_transcript(a.transcript.as_deref(), &transcript)?;
    let d = result?;
    println!(
        "{}: {}/{} bits correct ({:.4}), threshold {}",
        if d.accept { "accept" } else { "reject" },
        d.correct,
        d.total,
        d.accuracy(),
        d.threshold
    );
    Ok(if d.accept { 0 } else { Failure::REJECT })
}

fn eval(a: &EvalArgs) -> Outcome {
    let corpus = a.corpus.load()?;
    let settings = EvalSettings {
        experiment: ExperimentConfig {
            seed: a.seed,
            ..ExperimentConfig::default()
        },
        direction: a.direction.into(),
        bits_per_question: a.bits_per_question,
        phrases: None,
        corpus_label: a.corpus.label(),
    };
    let out = run_evaluation(&corpus, &settings, &a.out)?;
    for (name, curve) in [
        ("baseline 1 (gallery variance)", &out.baseline1.1),
        ("baseline 2 (probe variance)", &out.baseline2.1),
        ("vaulted, dedicated imposters", &out.dedicated.1),
        ("vaulted, all vs all", &out.all_vs_all.1),
    ] {
        println!("{name:32} EER {:.4}", curve.eer);
    }
    println!(
        "guessing bound: 2^-{} = {}%",
        out.security.total_bits,
        out.security.percent_2dp()
    );
    for (s, p, why) in &out.skipped {
        eprintln!("skipped {s}/{p}: {why}");
    }
    println!("wrote {} files to {}", out.files.len(), a.out.display());
    Ok(0)
}

fn revoke(a: &RevokeArgs) -> Outcome {
    let mut store = DirStore::open(&a.store)?;
    let mut rec = store.load(&a.id)?.ok_or_else(|| Failure::usage(format!("no record for {:?}", a.id)))?;
    rec.revoke().map_err(|e| Failure::usage(e.to_string()))?;
    store.save(&rec)?;
    println!("revoked {}", a.id);
    Ok(0)
}
