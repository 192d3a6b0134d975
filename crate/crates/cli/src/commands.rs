use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde_json::{json, Value};

use clausegen::chunk::{read_parsed_corpus, write_parsed_corpus, ParsedSentence, ReadMode};
use clausegen::corpus::{build_vocab, encode, split_corpus, CorpusMode, ParallelPair, Vocabulary};
use clausegen::eval::{bleu, evaluate, NgramLm};
use clausegen::extract::{build_pair, ExtractionRecord};
use clausegen::generator::{
    retrieval_baseline, select_best, train, Candidate, ClauseTable, DecodeConfig, DevExample, Dims, DuplicationPenalty,
    GenerationMode, Generated, Generator, Seq2SeqParams, TrainConfig, TrainingExample,
};
use clausegen::mark::{detect_insertion_position, render_marked, MarkedTarget};
use clausegen::Error;

use crate::config::{usage, Mode, RunConfig, Target};
use crate::manifest::{sidecar, Manifest};

/// Output cap beyond the input length when decoding.
const MAX_EXTRA: usize = 40;

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn read_sentences(path: &Path, config: &RunConfig) -> Result<(Vec<ParsedSentence>, usize)> {
    let mode = if config.strict { ReadMode::Strict } else { ReadMode::Lenient };
    let mut reader = read_parsed_corpus(open(path)?, mode);
    let mut sentences = Vec::new();
    for item in reader.by_ref() {
        sentences.push(item.with_context(|| format!("reading {}", path.display()))?);
    }
    for d in reader.diagnostics() {
        log::warn!("{}: skipped {d}", path.display());
    }
    Ok((sentences, reader.diagnostics().len()))
}

fn read_records(path: &Path) -> Result<Vec<ExtractionRecord>> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(ExtractionRecord::from_json_line(&line).with_context(|| format!("{}: line {}", path.display(), i + 1))?);
    }
    Ok(out)
}

fn write_lines<I, S>(path: &Path, lines: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut out = create(path)?;
    for l in lines {
        writeln!(out, "{}", l.as_ref())?;
    }
    out.flush()?;
    Ok(())
}

fn read_text_corpus(path: &Path) -> Result<Vec<Vec<String>>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text.lines().map(|l| l.split_whitespace().map(String::from).collect()).collect())
}

fn marked_target(target: Target) -> MarkedTarget {
    match target {
        Target::Full => MarkedTarget::FullSentence,
        Target::Clause => MarkedTarget::ClauseOnly,
    }
}

/// Mode and target an earlier stage was run with, from its manifest.
fn upstream_settings(manifest: &Path) -> Result<(String, String)> {
    let text = fs::read_to_string(manifest).with_context(|| format!("reading {}", manifest.display()))?;
    let v: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", manifest.display()))?;
    let field = |k: &str| {
        v["config"][k].as_str().map(String::from).with_context(|| format!("{}: missing config.{k}", manifest.display()))
    };
    Ok((field("mode")?, field("target")?))
}

fn require_same_settings(manifest: &Path, config: &RunConfig, check_target: bool) -> Result<()> {
    let (mode, target) = upstream_settings(manifest)?;
    let ours = serde_json::to_value(config)?;
    if ours["mode"] != mode.as_str() {
        return Err(usage(format!("mode: {} was built with `{mode}`, pass --mode {mode}", manifest.display())));
    }
    if check_target && mode == "pipeline" && ours["target"] != target.as_str() {
        return Err(usage(format!("target: {} was built with `{target}`, pass --target {target}", manifest.display())));
    }
    Ok(())
}

pub fn extract(input: &Path, output: &Path, config: &RunConfig) -> Result<()> {
    let (sentences, skipped_lines) = read_sentences(input, config)?;
    let mut out = create(output)?;
    let mut extracted = 0;
    for s in &sentences {
        if let Some(record) = build_pair(s, config.seed)? {
            writeln!(out, "{}", record.to_json_line())?;
            extracted += 1;
        }
    }
    out.flush()?;
    let rate = if sentences.is_empty() { 0.0 } else { extracted as f64 / sentences.len() as f64 };
    eprintln!("extracted {extracted} of {} sentences ({:.1}%)", sentences.len(), 100.0 * rate);

    let mut manifest = Manifest::new("extract", config);
    manifest.input(input)?;
    manifest.stats = json!({
        "sentences": sentences.len(),
        "extracted": extracted,
        "extraction_rate": rate,
        "skipped_lines": skipped_lines,
    });
    manifest.write(&sidecar(output))
}

pub fn build_corpus(records_path: &Path, out_dir: &Path, config: &RunConfig) -> Result<()> {
    let corpus_mode = match config.mode {
        Mode::End2end => CorpusMode::End2End,
        Mode::Pipeline => CorpusMode::Marked(marked_target(config.target)),
        Mode::Retrieval => return Err(usage("mode: retrieval needs no corpus build; use end2end or pipeline")),
    };
    let records = read_records(records_path)?;
    let total = records.len();
    let split = split_corpus(records, config.dev_size, config.test_size, config.seed, corpus_mode)?;
    let vocab = build_vocab(&split.train, config.vocab_cap)?;

    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    write_lines(&out_dir.join("train.pairs.jsonl"), split.train.iter().map(ParallelPair::to_json_line))?;
    write_lines(&out_dir.join("train.records.jsonl"), split.train_records.iter().map(ExtractionRecord::to_json_line))?;
    for (name, part) in [("dev", &split.dev), ("test", &split.test)] {
        write_lines(&out_dir.join(format!("{name}.records.jsonl")), part.iter().map(ExtractionRecord::to_json_line))?;
        let mut simple = create(&out_dir.join(format!("{name}.simple.jsonl")))?;
        write_parsed_corpus(&mut simple, part.iter().map(|r| &r.simple))?;
        simple.flush()?;
        write_lines(&out_dir.join(format!("{name}.simple.txt")), part.iter().map(|r| r.simple.surfaces().join(" ")))?;
        write_lines(&out_dir.join(format!("{name}.complex.txt")), part.iter().map(|r| r.complex_surfaces().join(" ")))?;
    }
    let mut v = create(&out_dir.join("vocab.txt"))?;
    vocab.write(&mut v)?;
    v.flush()?;

    eprintln!(
        "{} train pairs ({} duplicates dropped), {} dev, {} test, vocabulary {}",
        split.train.len(),
        split.deduplicated.len(),
        split.dev.len(),
        split.test.len(),
        vocab.len()
    );
    let mut manifest = Manifest::new("build-corpus", config);
    manifest.input(records_path)?;
    manifest.stats = json!({
        "records": total,
        "train": split.train.len(),
        "deduplicated": split.deduplicated.len(),
        "dev": split.dev.len(),
        "test": split.test.len(),
        "vocab": vocab.len(),
    });
    manifest.write(&out_dir.join("manifest.json"))
}

fn read_vocab(path: &Path) -> Result<Vocabulary> {
    Vocabulary::read(open(path)?).with_context(|| format!("reading {}", path.display()))
}

pub fn train_model(corpus: &Path, out_dir: &Path, config: &RunConfig) -> Result<()> {
    if config.mode == Mode::Retrieval {
        return Err(usage("mode: retrieval has no model to train"));
    }
    require_same_settings(&corpus.join("manifest.json"), config, true)?;
    let pairs_path = corpus.join("train.pairs.jsonl");
    let dev_path = corpus.join("dev.records.jsonl");
    let vocab_path = corpus.join("vocab.txt");
    let vocab = read_vocab(&vocab_path)?;

    let mut examples = Vec::new();
    for (i, line) in open(&pairs_path)?.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let pair = ParallelPair::from_json_line(&line).with_context(|| format!("{}: line {}", pairs_path.display(), i + 1))?;
        examples.push(TrainingExample::new(&encode(&pair.input, &vocab).ids, &encode(&pair.output, &vocab).ids));
    }

    let mut dev = Vec::new();
    let mut dev_skipped = 0;
    for r in read_records(&dev_path)? {
        let source = match config.mode {
            Mode::Pipeline => match detect_insertion_position(&r.simple) {
                Ok(mark) => render_marked(&r.simple, &mark)?,
                Err(Error::NoInsertionPoint(_)) => {
                    dev_skipped += 1;
                    continue;
                }
                Err(e) => return Err(e.into()),
            },
            _ => r.simple.surfaces(),
        };
        let reference = match (config.mode, config.target) {
            (Mode::Pipeline, Target::Clause) => r.clause_surfaces(),
            _ => r.complex_surfaces(),
        };
        dev.push(DevExample::new(&encode(&source, &vocab).ids, &source, reference));
    }

    let dims = Dims::new(vocab.len(), config.embed_dim, config.hidden_dim);
    dims.validate()?;
    let mut params = Seq2SeqParams::<f32>::init(dims, config.seed);
    let train_config = TrainConfig {
        lr: config.lr,
        batch_size: config.batch_size,
        epochs: config.epochs,
        seed: config.seed,
        threads: config.threads,
        ..TrainConfig::default()
    };
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let reports = train(&mut params, &examples, &dev, &vocab, &train_config, MAX_EXTRA, |report, p| {
        let path = out_dir.join(format!("epoch-{:03}.ckpt", report.epoch));
        let mut out = BufWriter::new(File::create(&path)?);
        p.write_checkpoint(&mut out)?;
        out.flush()?;
        Ok(())
    })?;
    let best = select_best(&reports).expect("at least one epoch");
    fs::copy(out_dir.join(format!("epoch-{:03}.ckpt", best.epoch)), out_dir.join("best.ckpt"))?;
    fs::copy(&vocab_path, out_dir.join("vocab.txt"))?;
    let mut log = String::from("epoch\tloss\tdev_bleu\n");
    for r in &reports {
        log.push_str(&format!("{}\t{:.6}\t{:.6}\n", r.epoch, r.loss, r.dev_bleu));
    }
    fs::write(out_dir.join("train.log"), log)?;
    eprintln!("best epoch {} (dev BLEU {:.4})", best.epoch, best.dev_bleu);

    let mut manifest = Manifest::new("train", config);
    for p in [&pairs_path, &dev_path, &vocab_path] {
        manifest.input(p)?;
    }
    manifest.stats = json!({
        "examples": examples.len(),
        "dev": dev.len(),
        "dev_without_insertion_point": dev_skipped,
        "parameters": params.num_params(),
        "dims": { "vocab": dims.vocab, "embed": dims.embed, "hidden": dims.hidden },
        "best_epoch": best.epoch,
        "epochs": reports,
    });
    manifest.write(&out_dir.join("manifest.json"))
}

pub struct GenerateArgs<'a> {
    pub model: Option<&'a Path>,
    pub checkpoint: Option<&'a Path>,
    pub clauses: Option<&'a Path>,
    pub input: &'a Path,
    pub output: &'a Path,
    pub text: Option<&'a Path>,
}

pub fn generate(args: &GenerateArgs, config: &RunConfig) -> Result<()> {
    let (sentences, skipped_lines) = read_sentences(args.input, config)?;
    let mut manifest = Manifest::new("generate", config);
    manifest.input(args.input)?;

    let (results, violations, unmarked) = if config.mode == Mode::Retrieval {
        let clauses = args.clauses.ok_or_else(|| usage("--clauses: required in retrieval mode"))?;
        manifest.input(clauses)?;
        let table = ClauseTable::from_records(&read_records(clauses)?);
        let mut results = Vec::with_capacity(sentences.len());
        let mut unmarked = 0;
        for s in &sentences {
            let generated = match detect_insertion_position(s) {
                Ok(mark) => {
                    let input = render_marked(s, &mark)?;
                    let tokens = retrieval_baseline(&input, &table)?;
                    Generated { id: s.id().into(), input, candidates: vec![Candidate::new(tokens, 0.0)], violations: 0 }
                }
                Err(Error::NoInsertionPoint(_)) => {
                    unmarked += 1;
                    Generated { id: s.id().into(), input: s.surfaces(), candidates: Vec::new(), violations: 0 }
                }
                Err(e) => return Err(e.into()),
            };
            results.push(generated);
        }
        (results, 0, unmarked)
    } else {
        let model = args.model.ok_or_else(|| usage("--model: required unless --mode retrieval"))?;
        require_same_settings(&model.join("manifest.json"), config, true)?;
        let ckpt = args.checkpoint.map(PathBuf::from).unwrap_or_else(|| model.join("best.ckpt"));
        let vocab_path = model.join("vocab.txt");
        let vocab = read_vocab(&vocab_path)?;
        let params = Seq2SeqParams::<f32>::read_checkpoint(open(&ckpt)?)
            .with_context(|| format!("reading {}", ckpt.display()))?;
        if params.dims.vocab != vocab.len() {
            bail!("{}: vocabulary size {} does not match {}", ckpt.display(), params.dims.vocab, vocab.len());
        }
        manifest.input(&ckpt)?;
        manifest.input(&vocab_path)?;
        let generator = Generator {
            params: &params,
            vocab: &vocab,
            mode: if config.mode == Mode::End2end { GenerationMode::End2End } else { GenerationMode::Pipeline },
            target: marked_target(config.target),
            config: DecodeConfig {
                beam_width: config.beam_width,
                nbest: config.nbest,
                penalty: DuplicationPenalty::new(config.dup_lambda)?,
                max_extra: MAX_EXTRA,
                ..DecodeConfig::default()
            },
        };
        let mut results = Vec::with_capacity(sentences.len());
        let (mut violations, mut unmarked) = (0, 0);
        for (s, r) in sentences.iter().zip(generator.generate_all(&sentences)) {
            match r {
                Ok(g) => {
                    violations += g.violations;
                    results.push(g);
                }
                Err(Error::NoInsertionPoint(_)) => {
                    log::warn!("{}: no noun to modify, emitting it unchanged", s.id());
                    unmarked += 1;
                    results.push(Generated { id: s.id().into(), input: s.surfaces(), candidates: Vec::new(), violations: 0 });
                }
                Err(e) => return Err(e.into()),
            }
        }
        (results, violations, unmarked)
    };

    let mut out = create(args.output)?;
    for g in &results {
        writeln!(out, "{}", serde_json::to_string(g)?)?;
    }
    out.flush()?;
    if let Some(text) = args.text {
        write_lines(text, results.iter().map(|g| g.output().join(" ")))?;
    }
    let fallbacks = results.iter().filter(|g| g.candidates.is_empty()).count();
    eprintln!("generated {} sentences ({fallbacks} left unchanged, {violations} candidates rejected)", results.len());
    manifest.stats = json!({
        "sentences": results.len(),
        "skipped_lines": skipped_lines,
        "without_insertion_point": unmarked,
        "unchanged": fallbacks,
        "rejected_candidates": violations,
    });
    manifest.write(&sidecar(args.output))
}

pub struct EvaluateArgs<'a> {
    pub lm_corpus: &'a Path,
    pub generated: &'a Path,
    pub references: Option<&'a Path>,
    pub uniform: bool,
    pub output: Option<&'a Path>,
}

pub fn evaluate_outputs(args: &EvaluateArgs, config: &RunConfig) -> Result<()> {
    let lm_corpus = read_text_corpus(args.lm_corpus)?;
    let generated = read_text_corpus(args.generated)?;
    if generated.is_empty() {
        bail!("{}: no sentences to score", args.generated.display());
    }
    let lm = if args.uniform {
        NgramLm::uniform(lm_corpus.iter().flatten())
    } else {
        NgramLm::fit(&lm_corpus, config.ngram_order)?
    };
    let report = evaluate(&lm, &generated)?;
    let mut result = serde_json::to_value(&report)?;
    result["lm"] = json!({
        "order": lm.order(),
        "vocab": lm.vocab_size(),
        "training_sentences": lm_corpus.len(),
    });
    let mut manifest = Manifest::new("evaluate", config);
    manifest.input(args.lm_corpus)?;
    manifest.input(args.generated)?;
    if let Some(refs) = args.references {
        let references = read_text_corpus(refs)?;
        if references.len() != generated.len() {
            bail!("{} has {} lines but {} has {}", refs.display(), references.len(), args.generated.display(), generated.len());
        }
        result["bleu"] = json!(bleu(&generated, &references)?);
        manifest.input(refs)?;
    }
    let mut text = serde_json::to_string_pretty(&result)?;
    text.push('\n');
    print!("{text}");
    if let Some(path) = args.output {
        fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
        manifest.stats = result;
        manifest.write(&sidecar(path))?;
    }
    Ok(())
}

pub fn mark(input: &Path, output: Option<&Path>, config: &RunConfig) -> Result<()> {
    let (sentences, _) = read_sentences(input, config)?;
    let mut lines = Vec::with_capacity(sentences.len());
    for s in &sentences {
        match detect_insertion_position(s) {
            Ok(m) => lines.push(render_marked(s, &m)?.join(" ")),
            Err(Error::NoInsertionPoint(_)) if !config.strict => eprintln!("{}: no noun to mark, skipped", s.id()),
            Err(e) => return Err(e.into()),
        }
    }
    match output {
        Some(path) => write_lines(path, &lines),
        None => {
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            for l in &lines {
                writeln!(out, "{l}")?;
            }
            Ok(())
        }
    }
}
