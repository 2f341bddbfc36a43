//! The `lsr` command line: validate, encode, decode, train, tag, eval,
//! convert.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 internal failure.
//! Any failure prints exactly one machine-parsable line to stderr
//! (`lsr: error: <category>: <message>`). Output files are written to a
//! temporary file and renamed into place, so a failed run never leaves a
//! partial file. Given the same inputs and seed, outputs are byte-identical
//! regardless of `--jobs`.

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::constraints::{build_masks, ConstraintError, LatticeMasks, LexcatConstraintTable};
use crate::convert::{
    parse_cupt, parse_dimsum, to_dimsum, to_parseme, write_cupt, write_dimsum, ConvertError,
};
use crate::corpus::{
    parse_conllulex, parse_conllulex_lenient, write_conllulex, CorpusError, Inventory, Sentence,
    Token,
};
use crate::crf::emissions::FeatureConfig;
use crate::crf::model_io::{load_model, serialize_model, ModelIoError};
use crate::crf::vectors::{parse_vectors, VectorsError};
use crate::crf::{self, CrfError, EmissionKind, TrainConfig};
use crate::metrics::{dimsum_report, parseme_report, streusle_report, MetricsError};
use crate::tagcodec::{decode, encode, format_tag, parse_tag, CodecError, LexTag};

/// A failure, sorted by whose fault it is: `Usage` exits 1, `Data` exits 2,
/// `Internal` exits 3.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Data(m) => write!(f, "data: {m}"),
            CliError::Internal(m) => write!(f, "internal: {m}"),
        }
    }
}

macro_rules! data_error {
    ($($ty:ty),* $(,)?) => {$(
        impl From<$ty> for CliError {
            fn from(e: $ty) -> CliError {
                CliError::Data(one_line(&e.to_string()))
            }
        }
    )*};
}

data_error!(
    CorpusError,
    ConvertError,
    MetricsError,
    CodecError,
    VectorsError,
    ModelIoError,
    ConstraintError,
    std::io::Error,
);

impl From<CrfError> for CliError {
    fn from(e: CrfError) -> CliError {
        match e {
            // A search failure means the transition automaton admitted no
            // path at all — an invariant breach, not a data problem.
            CrfError::Search(_) => CliError::Internal(one_line(&e.to_string())),
            CrfError::MissingVectors => CliError::Usage(one_line(&e.to_string())),
            other => CliError::Data(one_line(&other.to_string())),
        }
    }
}

/// Collapse a message onto one line so stderr stays machine-parsable.
fn one_line(msg: &str) -> String {
    msg.lines().collect::<Vec<_>>().join(" | ")
}

#[derive(Parser)]
#[command(
    name = "lsr",
    version,
    about = "Lexical semantic recognition: MWE + supersense tagging",
    disable_help_subcommand = true
)]
struct Cli {
    /// Worker threads for per-sentence work (0 = all cores).
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check every structural invariant of a .conllulex file.
    ///
    /// Prints one line per violation (sent_id, rule, message, tab-separated)
    /// and exits 0 only when the whole file is well-formed.
    Validate {
        /// Input .conllulex file.
        input: PathBuf,
    },
    /// Rewrite a .conllulex file as one tag per token.
    ///
    /// Output keeps the comment lines and writes `form<TAB>tag` rows, one
    /// sentence per blank-line-separated block.
    Encode {
        /// Input .conllulex file.
        input: PathBuf,
        /// Output file (stdout when omitted).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Rebuild sentence structure from a tag file (inverse of encode).
    Decode {
        /// Input tag file (`form<TAB>tag` rows).
        input: PathBuf,
        /// Output .conllulex file (stdout when omitted).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Train a CRF tagger and write the model file.
    Train {
        /// Training corpus (.conllulex).
        train: PathBuf,
        /// Development corpus for early stopping (.conllulex).
        #[arg(long)]
        dev: PathBuf,
        /// Where to write the model.
        #[arg(short, long)]
        output: PathBuf,
        /// Append per-epoch records to this log file.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Emission parameterization.
        #[arg(long, value_enum, default_value_t = Emissions::Feature)]
        emissions: Emissions,
        /// Dense token vectors for the training corpus (projection only).
        #[arg(long)]
        vectors: Option<PathBuf>,
        /// Dense token vectors for the dev corpus (projection only).
        #[arg(long)]
        dev_vectors: Option<PathBuf>,
        /// Which columns supply POS/lemma to the features.
        #[arg(long, value_enum, default_value_t = PosSource::Gold)]
        pos_source: PosSource,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        max_epochs: Option<usize>,
        #[arg(long)]
        clip_norm: Option<f64>,
        #[arg(long)]
        patience: Option<usize>,
        #[arg(long)]
        l2: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Tag a corpus with a trained model under constrained decoding.
    Tag {
        /// Input file; lexical columns beyond the first ten are ignored.
        input: PathBuf,
        /// Trained model file.
        #[arg(short, long)]
        model: PathBuf,
        /// Output file (stdout when omitted).
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Output format.
        #[arg(long, value_enum, default_value_t = TagFormat::Conllulex)]
        format: TagFormat,
        /// Dense token vectors (required for projection models).
        #[arg(long)]
        vectors: Option<PathBuf>,
        /// Which columns supply POS/lemma to features and constraints.
        #[arg(long, value_enum, default_value_t = PosSource::Gold)]
        pos_source: PosSource,
        /// Category/POS constraint table (bundled table when omitted).
        #[arg(long)]
        constraints: Option<PathBuf>,
        /// Decode over the full lattice, ignoring the constraint table.
        #[arg(long)]
        unconstrained: bool,
    },
    /// Score a predicted corpus against gold and print a metric report.
    Eval {
        /// Which task family's metrics and file format to use.
        #[arg(long, value_enum)]
        task: Task,
        /// Gold file.
        gold: PathBuf,
        /// Predicted file.
        pred: PathBuf,
        /// Print a tab-separated report instead of the aligned table.
        #[arg(long)]
        machine: bool,
    },
    /// Project a .conllulex corpus into a shared-task format.
    Convert {
        /// Input .conllulex file.
        input: PathBuf,
        /// Target format.
        #[arg(long, value_enum)]
        to: Target,
        /// Output file (stdout when omitted).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Emissions {
    Feature,
    Projection,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PosSource {
    /// UPOS and LEMMA columns as written.
    Gold,
    /// `PredUPOS=`/`PredLemma=` attributes of the MISC column.
    Misc,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TagFormat {
    Conllulex,
    Tags,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Task {
    Streusle,
    Parseme,
    Dimsum,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Target {
    Cupt,
    Dimsum,
}

/// Parse argv and run. Returns the process exit code; printing already done.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let line = e
                .to_string()
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ")
                .to_string();
            eprintln!("lsr: error: usage: {line}");
            return 1;
        }
    };
    // Tests may call run() repeatedly in one process; a second global-pool
    // build fails harmlessly.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global();
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("lsr: error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Validate { input } => cmd_validate(&input),
        Command::Encode { input, output } => cmd_encode(&input, output.as_deref()),
        Command::Decode { input, output } => cmd_decode(&input, output.as_deref()),
        Command::Train {
            train,
            dev,
            output,
            log,
            emissions,
            vectors,
            dev_vectors,
            pos_source,
            learning_rate,
            batch_size,
            max_epochs,
            clip_norm,
            patience,
            l2,
            seed,
        } => {
            let mut config = TrainConfig::default();
            if let Some(v) = learning_rate {
                config.learning_rate = v;
            }
            if let Some(v) = batch_size {
                config.batch_size = v;
            }
            if let Some(v) = max_epochs {
                config.max_epochs = v;
            }
            if let Some(v) = clip_norm {
                config.clip_norm = v;
            }
            if let Some(v) = patience {
                config.patience = v;
            }
            if let Some(v) = l2 {
                config.l2 = v;
            }
            if let Some(v) = seed {
                config.seed = v;
            }
            cmd_train(TrainArgs {
                train: &train,
                dev: &dev,
                output: &output,
                log: log.as_deref(),
                emissions,
                vectors: vectors.as_deref(),
                dev_vectors: dev_vectors.as_deref(),
                pos_source,
                config,
            })
        }
        Command::Tag {
            input,
            model,
            output,
            format,
            vectors,
            pos_source,
            constraints,
            unconstrained,
        } => cmd_tag(TagArgs {
            input: &input,
            model: &model,
            output: output.as_deref(),
            format,
            vectors: vectors.as_deref(),
            pos_source,
            constraints: constraints.as_deref(),
            unconstrained,
        }),
        Command::Eval { task, gold, pred, machine } => cmd_eval(task, &gold, &pred, machine),
        Command::Convert { input, to, output } => cmd_convert(&input, to, output.as_deref()),
    }
}

/// Write to a sibling temporary file and rename into place, so readers never
/// observe a partial file.
fn write_atomic(path: &Path, content: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(content)?;
    tmp.persist(path).map_err(|e| CliError::Data(one_line(&e.to_string())))?;
    Ok(())
}

fn emit(output: Option<&Path>, content: &str) -> Result<(), CliError> {
    match output {
        Some(path) => write_atomic(path, content.as_bytes()),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn read_input(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("{}: {}", path.display(), one_line(&e.to_string()))))
}

fn cmd_validate(input: &Path) -> Result<(), CliError> {
    let text = read_input(input)?;
    let (sentences, faults) = parse_conllulex_lenient(&text, Inventory::bundled())?;
    for (sent_id, violations) in &faults {
        for v in violations {
            println!("{sent_id}\t{}\t{}", v.rule, one_line(&v.message));
        }
    }
    if faults.is_empty() {
        eprintln!("lsr: validate: {} sentences ok", sentences.len());
        Ok(())
    } else {
        Err(CliError::Data(format!(
            "{} of {} sentences violate invariants",
            faults.len(),
            sentences.len() + faults.len()
        )))
    }
}

fn render_tags(comments: &[String], tokens: &[Token], tags: &[LexTag]) -> String {
    let mut out = String::new();
    for c in comments {
        out.push_str(c);
        out.push('\n');
    }
    for (tok, tag) in tokens.iter().zip(tags) {
        out.push_str(&tok.form);
        out.push('\t');
        out.push_str(&format_tag(tag));
        out.push('\n');
    }
    out.push('\n');
    out
}

fn cmd_encode(input: &Path, output: Option<&Path>) -> Result<(), CliError> {
    let text = read_input(input)?;
    let sentences = parse_conllulex(&text, Inventory::bundled())?;
    let mut out = String::new();
    for s in &sentences {
        let tags = encode(s)?;
        out.push_str(&render_tags(&s.comments, &s.tokens, &tags));
    }
    emit(output, &out)
}

fn cmd_decode(input: &Path, output: Option<&Path>) -> Result<(), CliError> {
    let text = read_input(input)?;
    let inv = Inventory::bundled();
    let mut sentences: Vec<Sentence> = Vec::new();
    let mut comments: Vec<String> = Vec::new();
    let mut rows: Vec<(usize, String, LexTag)> = Vec::new();

    let mut flush = |comments: &mut Vec<String>,
                     rows: &mut Vec<(usize, String, LexTag)>,
                     line: usize|
     -> Result<(), CliError> {
        if comments.is_empty() && rows.is_empty() {
            return Ok(());
        }
        if rows.is_empty() {
            return Err(CliError::Data(format!("line {line}: comment block with no token rows")));
        }
        let tags: Vec<LexTag> = rows.iter().map(|(_, _, t)| t.clone()).collect();
        let structure = decode(&tags).map_err(|e| {
            CliError::Data(format!("line {}: {}", rows[0].0, one_line(&e.to_string())))
        })?;
        let tokens = rows
            .iter()
            .enumerate()
            .map(|(i, (_, form, _))| Token::simple(i + 1, form, "_", "_"))
            .collect();
        sentences.push(Sentence {
            comments: std::mem::take(comments),
            tokens,
            units: structure.units,
            weak_groups: structure.weak_groups,
            extra_rows: Vec::new(),
        });
        rows.clear();
        Ok(())
    };

    let mut block_start = 1;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.strip_suffix('\r').unwrap_or(raw);
        if trimmed.is_empty() {
            flush(&mut comments, &mut rows, block_start)?;
            block_start = line + 1;
            continue;
        }
        if trimmed.starts_with('#') {
            if !rows.is_empty() {
                return Err(CliError::Data(format!("line {line}: comment after token rows")));
            }
            comments.push(trimmed.to_string());
            continue;
        }
        let (form, tag) = trimmed.split_once('\t').ok_or_else(|| {
            CliError::Data(format!("line {line}: expected `form<TAB>tag`, got `{trimmed}`"))
        })?;
        let tag = parse_tag(tag.trim(), inv)
            .map_err(|e| CliError::Data(format!("line {line}: {}", one_line(&e.to_string()))))?;
        rows.push((line, form.to_string(), tag));
    }
    flush(&mut comments, &mut rows, block_start)?;

    emit(output, &write_conllulex(&sentences))
}

/// Replace each token's UPOS/lemma with `PredUPOS=`/`PredLemma=` from MISC.
fn apply_pos_source(sentences: &mut [Sentence], source: PosSource) -> Result<(), CliError> {
    if source == PosSource::Gold {
        return Ok(());
    }
    for (i, s) in sentences.iter_mut().enumerate() {
        let id = s.sent_id().unwrap_or("?").to_string();
        for tok in &mut s.tokens {
            let mut upos = None;
            let mut lemma = None;
            for field in tok.misc.split('|') {
                if let Some(v) = field.strip_prefix("PredUPOS=") {
                    upos = Some(v.to_string());
                }
                if let Some(v) = field.strip_prefix("PredLemma=") {
                    lemma = Some(v.to_string());
                }
            }
            match (upos, lemma) {
                (Some(u), Some(l)) => {
                    tok.upos = u;
                    tok.lemma = l;
                }
                _ => {
                    return Err(CliError::Data(format!(
                        "sentence {} (`{id}`) token {}: MISC lacks PredUPOS=/PredLemma=",
                        i + 1,
                        tok.index
                    )))
                }
            }
        }
    }
    Ok(())
}

fn read_vector_file(
    path: &Path,
    sentences: &[Sentence],
    what: &str,
) -> Result<(usize, Vec<Vec<Vec<f64>>>), CliError> {
    let (dim, vecs) = parse_vectors(&read_input(path)?)?;
    if vecs.len() != sentences.len() {
        return Err(CliError::Data(format!(
            "{what} vectors cover {} sentences but the corpus has {}",
            vecs.len(),
            sentences.len()
        )));
    }
    for (i, (v, s)) in vecs.iter().zip(sentences).enumerate() {
        if v.len() != s.tokens.len() {
            return Err(CliError::Data(format!(
                "{what} vectors: sentence {} has {} vectors for {} tokens",
                i + 1,
                v.len(),
                s.tokens.len()
            )));
        }
    }
    Ok((dim, vecs))
}

struct TrainArgs<'a> {
    train: &'a Path,
    dev: &'a Path,
    output: &'a Path,
    log: Option<&'a Path>,
    emissions: Emissions,
    vectors: Option<&'a Path>,
    dev_vectors: Option<&'a Path>,
    pos_source: PosSource,
    config: TrainConfig,
}

fn cmd_train(args: TrainArgs<'_>) -> Result<(), CliError> {
    let inv = Inventory::bundled();
    let mut train_sents = parse_conllulex(&read_input(args.train)?, inv)?;
    let mut dev_sents = parse_conllulex(&read_input(args.dev)?, inv)?;
    apply_pos_source(&mut train_sents, args.pos_source)?;
    apply_pos_source(&mut dev_sents, args.pos_source)?;

    let (kind, train_vecs, dev_vecs) = match args.emissions {
        Emissions::Feature => {
            if args.vectors.is_some() || args.dev_vectors.is_some() {
                return Err(CliError::Usage(
                    "--vectors/--dev-vectors only apply to --emissions projection".into(),
                ));
            }
            (EmissionKind::Feature(FeatureConfig::default()), None, None)
        }
        Emissions::Projection => {
            let (vp, dp) = match (args.vectors, args.dev_vectors) {
                (Some(v), Some(d)) => (v, d),
                _ => {
                    return Err(CliError::Usage(
                        "--emissions projection needs --vectors and --dev-vectors".into(),
                    ))
                }
            };
            let (dim, tv) = read_vector_file(vp, &train_sents, "train")?;
            let (dev_dim, dv) = read_vector_file(dp, &dev_sents, "dev")?;
            if dev_dim != dim {
                return Err(CliError::Data(format!(
                    "vector dimension mismatch: train {dim}, dev {dev_dim}"
                )));
            }
            (EmissionKind::Projection { dim }, Some(tv), Some(dv))
        }
    };

    let (model, report) = crf::train(
        &train_sents,
        &dev_sents,
        kind,
        &args.config,
        train_vecs.as_deref(),
        dev_vecs.as_deref(),
    )?;

    write_atomic(args.output, &serialize_model(&model)?)?;

    if let Some(log_path) = args.log {
        let mut log = fs::OpenOptions::new().create(true).append(true).open(log_path)?;
        writeln!(
            log,
            "# train={} dev={} emissions={} seed={} tagset={} unseen_dev_tags={}",
            args.train.display(),
            args.dev.display(),
            match args.emissions {
                Emissions::Feature => "feature",
                Emissions::Projection => "projection",
            },
            args.config.seed,
            report.tagset_len,
            report.unseen_dev_tags,
        )?;
        for record in &report.records {
            let line = serde_json::to_string(record)
                .map_err(|e| CliError::Internal(one_line(&e.to_string())))?;
            writeln!(log, "{line}")?;
        }
        writeln!(
            log,
            "# best_epoch={} best_dev_accuracy={} stopped_early={}",
            report.best_epoch.map_or("none".to_string(), |e| e.to_string()),
            report.best_dev_accuracy.map_or("none".to_string(), |a| format!("{a:.6}")),
            report.stopped_early,
        )?;
    }

    println!(
        "trained {} epochs; tagset {}; best dev accuracy {}; model {}",
        report.records.len(),
        report.tagset_len,
        report.best_dev_accuracy.map_or("n/a".to_string(), |a| format!("{a:.4}")),
        args.output.display(),
    );
    Ok(())
}

struct TagArgs<'a> {
    input: &'a Path,
    model: &'a Path,
    output: Option<&'a Path>,
    format: TagFormat,
    vectors: Option<&'a Path>,
    pos_source: PosSource,
    constraints: Option<&'a Path>,
    unconstrained: bool,
}

/// A sentence to tag: only tokens and comments are read from the input;
/// any lexical annotation it carries is ignored.
struct TokenBlock {
    comments: Vec<String>,
    tokens: Vec<Token>,
    extra_rows: Vec<(usize, String)>,
}

/// Reads the first ten columns of a CoNLL-U-shaped file (.conllulex files
/// qualify; so do bare .conllu ones). Range and empty-node rows are kept
/// verbatim for the output.
fn read_token_blocks(text: &str) -> Result<Vec<TokenBlock>, CliError> {
    let mut blocks = Vec::new();
    let mut comments: Vec<String> = Vec::new();
    let mut tokens: Vec<Token> = Vec::new();
    let mut extra_rows: Vec<(usize, String)> = Vec::new();

    let mut flush = |comments: &mut Vec<String>,
                     tokens: &mut Vec<Token>,
                     extra_rows: &mut Vec<(usize, String)>,
                     line: usize|
     -> Result<(), CliError> {
        if comments.is_empty() && tokens.is_empty() {
            return Ok(());
        }
        if tokens.is_empty() {
            return Err(CliError::Data(format!("line {line}: comment block with no token rows")));
        }
        blocks.push(TokenBlock {
            comments: std::mem::take(comments),
            tokens: std::mem::take(tokens),
            extra_rows: std::mem::take(extra_rows),
        });
        Ok(())
    };

    let mut block_start = 1;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let row = raw.strip_suffix('\r').unwrap_or(raw);
        if row.is_empty() {
            flush(&mut comments, &mut tokens, &mut extra_rows, block_start)?;
            block_start = line + 1;
            continue;
        }
        if row.starts_with('#') {
            comments.push(row.to_string());
            continue;
        }
        let cols: Vec<&str> = row.split('\t').collect();
        if cols.len() < 10 {
            return Err(CliError::Data(format!(
                "line {line}: expected at least 10 tab-separated columns, found {}",
                cols.len()
            )));
        }
        if cols[0].contains('-') || cols[0].contains('.') {
            extra_rows.push((tokens.len() + 1, row.to_string()));
            continue;
        }
        let index: usize = cols[0]
            .parse()
            .map_err(|_| CliError::Data(format!("line {line}: bad token id `{}`", cols[0])))?;
        if index != tokens.len() + 1 {
            return Err(CliError::Data(format!(
                "line {line}: token id {index} out of order (expected {})",
                tokens.len() + 1
            )));
        }
        tokens.push(Token {
            index,
            form: cols[1].to_string(),
            lemma: cols[2].to_string(),
            upos: cols[3].to_string(),
            xpos: cols[4].to_string(),
            feats: cols[5].to_string(),
            head: cols[6].to_string(),
            deprel: cols[7].to_string(),
            deps: cols[8].to_string(),
            misc: cols[9].to_string(),
        });
    }
    flush(&mut comments, &mut tokens, &mut extra_rows, block_start)?;
    Ok(blocks)
}

fn cmd_tag(args: TagArgs<'_>) -> Result<(), CliError> {
    let model = load_model(args.model)?;
    let blocks = read_token_blocks(&read_input(args.input)?)?;

    // Feature/constraint tokens may differ from the output tokens when the
    // predicted POS/lemma columns are selected.
    let mut feature_tokens: Vec<Vec<Token>> = blocks.iter().map(|b| b.tokens.clone()).collect();
    if args.pos_source == PosSource::Misc {
        for (i, toks) in feature_tokens.iter_mut().enumerate() {
            for tok in toks.iter_mut() {
                let mut upos = None;
                let mut lemma = None;
                for field in tok.misc.split('|') {
                    if let Some(v) = field.strip_prefix("PredUPOS=") {
                        upos = Some(v.to_string());
                    }
                    if let Some(v) = field.strip_prefix("PredLemma=") {
                        lemma = Some(v.to_string());
                    }
                }
                match (upos, lemma) {
                    (Some(u), Some(l)) => {
                        tok.upos = u;
                        tok.lemma = l;
                    }
                    _ => {
                        return Err(CliError::Data(format!(
                            "sentence {} token {}: MISC lacks PredUPOS=/PredLemma=",
                            i + 1,
                            tok.index
                        )))
                    }
                }
            }
        }
    }

    let vectors = match (&model.kind, args.vectors) {
        (EmissionKind::Projection { .. }, Some(path)) => {
            let (dim, vecs) = parse_vectors(&read_input(path)?)?;
            if let EmissionKind::Projection { dim: want } = model.kind {
                if dim != want {
                    return Err(CliError::Data(format!(
                        "vector dimension {dim} but the model expects {want}"
                    )));
                }
            }
            if vecs.len() != blocks.len() {
                return Err(CliError::Data(format!(
                    "vectors cover {} sentences but the corpus has {}",
                    vecs.len(),
                    blocks.len()
                )));
            }
            Some(vecs)
        }
        (EmissionKind::Projection { .. }, None) => {
            return Err(CliError::Usage("this model needs --vectors".into()))
        }
        (EmissionKind::Feature(_), Some(_)) => {
            return Err(CliError::Usage("--vectors only applies to projection models".into()))
        }
        (EmissionKind::Feature(_), None) => None,
    };

    let loaded_table;
    let table = match args.constraints {
        Some(path) => {
            loaded_table = LexcatConstraintTable::parse(&read_input(path)?)?;
            &loaded_table
        }
        None => LexcatConstraintTable::bundled(),
    };

    let scores = Arc::new(model.transition_scores());
    let results: Vec<Result<crf::Tagged, CliError>> = feature_tokens
        .par_iter()
        .enumerate()
        .map(|(i, toks)| {
            let masks = if args.unconstrained {
                LatticeMasks::unconstrained(toks.len(), model.automaton.clone())
            } else {
                let pairs: Vec<(&str, &str)> =
                    toks.iter().map(|t| (t.upos.as_str(), t.lemma.as_str())).collect();
                build_masks(&pairs, &model.tagset, model.automaton.clone(), table)?
            };
            let vs = vectors.as_ref().map(|v| v[i].as_slice());
            model.tag_with(&scores, toks, vs, masks).map_err(CliError::from)
        })
        .collect();

    let mut out = String::new();
    for (i, (block, result)) in blocks.iter().zip(results).enumerate() {
        let tagged = result.map_err(|e| match e {
            CliError::Data(m) => CliError::Data(format!("sentence {}: {m}", i + 1)),
            CliError::Internal(m) => CliError::Internal(format!("sentence {}: {m}", i + 1)),
            other => other,
        })?;
        if tagged.relaxed {
            let id = block
                .comments
                .iter()
                .find_map(|c| c.strip_prefix("# sent_id = "))
                .unwrap_or("?");
            eprintln!(
                "lsr: warning: sentence {} (`{id}`): no path satisfied the constraints; \
                 decoded without them",
                i + 1
            );
        }
        match args.format {
            TagFormat::Tags => {
                out.push_str(&render_tags(&block.comments, &block.tokens, &tagged.tags));
            }
            TagFormat::Conllulex => {
                let structure = decode(&tagged.tags).map_err(|e| {
                    CliError::Internal(format!("sentence {}: {}", i + 1, one_line(&e.to_string())))
                })?;
                let sentence = Sentence {
                    comments: block.comments.clone(),
                    tokens: block.tokens.clone(),
                    units: structure.units,
                    weak_groups: structure.weak_groups,
                    extra_rows: block.extra_rows.clone(),
                };
                out.push_str(&write_conllulex(std::slice::from_ref(&sentence)));
            }
        }
    }
    emit(args.output, &out)
}

fn cmd_eval(task: Task, gold: &Path, pred: &Path, machine: bool) -> Result<(), CliError> {
    let gold_text = read_input(gold)?;
    let pred_text = read_input(pred)?;
    let inv = Inventory::bundled();
    let report = match task {
        Task::Streusle => streusle_report(
            &parse_conllulex(&gold_text, inv)?,
            &parse_conllulex(&pred_text, inv)?,
        )?,
        Task::Parseme => parseme_report(&parse_cupt(&gold_text)?, &parse_cupt(&pred_text)?)?,
        Task::Dimsum => dimsum_report(&parse_dimsum(&gold_text)?, &parse_dimsum(&pred_text)?)?,
    };
    if machine {
        print!("{}", report.machine_tsv());
    } else {
        print!("{}", report.human_table());
    }
    Ok(())
}

fn cmd_convert(input: &Path, to: Target, output: Option<&Path>) -> Result<(), CliError> {
    let sentences = parse_conllulex(&read_input(input)?, Inventory::bundled())?;
    let content = match to {
        Target::Cupt => {
            let projected: Vec<_> = sentences.iter().map(to_parseme).collect();
            write_cupt(&projected)
        }
        Target::Dimsum => {
            let projected: Vec<_> = sentences.iter().map(to_dimsum).collect();
            write_dimsum(&projected)
        }
    };
    emit(output, &content)
}
