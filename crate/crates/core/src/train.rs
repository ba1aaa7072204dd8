//! Training loop: shuffled mini-batches, CRF loss, Adam, per-epoch dev
//! evaluation with Viterbi decoding, checkpoints and early stopping.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::Checkpoint;
use crate::config::TrainConfig;
use crate::corpus::{
    load_corpus, load_embeddings, make_batches, random_embeddings, segment_from_labels, Example, LabelSequence,
    Sentence, Vocabulary,
};
use crate::error::{Error, Result};
use crate::eval::{f1_score, throughput, EvalReport, Stopwatch};
use crate::layers::Mode;
use crate::model::{ModelParams, Segmenter, EMBEDDINGS};
use crate::optim::AdamState;
use crate::segment::segment_sentence;

/// Random streams derived from the master seed. Shuffling uses its own
/// per-epoch streams inside [`make_batches`].
const INIT_STREAM: u64 = 0;
const DROPOUT_STREAM: u64 = 2;

pub const LAST_CHECKPOINT: &str = "last.ckpt";
pub const BEST_CHECKPOINT: &str = "best.ckpt";

pub fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    pub dev: EvalReport,
    pub sentences_per_sec: f64,
}

impl EpochLog {
    /// `epoch \t loss \t P \t R \t F \t sentences/s`
    pub fn line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{:.1}",
            self.epoch, self.mean_loss, self.dev.precision, self.dev.recall, self.dev.f1, self.sentences_per_sec
        )
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub epochs: Vec<EpochLog>,
    pub best_epoch: Option<usize>,
    pub best_dev_f: Option<f64>,
    pub last_checkpoint: PathBuf,
    pub best_checkpoint: PathBuf,
    /// Fraction of vocabulary characters found in the embedding file.
    pub embedding_hit_rate: Option<f64>,
}

/// Dev sentences with their gold segmentation as a single-spaced line.
pub struct DevSet {
    sentences: Vec<Sentence>,
    gold: Vec<String>,
}

impl DevSet {
    pub fn new(data: &[(Sentence, LabelSequence)]) -> Result<Self> {
        let mut gold = Vec::with_capacity(data.len());
        for (s, l) in data {
            gold.push(segment_from_labels(s.chars(), &l.0)?.join(" "));
        }
        Ok(DevSet {
            sentences: data.iter().map(|(s, _)| s.clone()).collect(),
            gold,
        })
    }

    pub fn evaluate(&self, model: &Segmenter<f64>, vocab: &Vocabulary) -> Result<EvalReport> {
        let pred = self
            .sentences
            .iter()
            .map(|s| segment_sentence(model, vocab, s))
            .collect::<Result<Vec<_>>>()?;
        f1_score(&self.gold, &pred)
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }
}

fn prepare_checkpoint_dir(dir: &Path) -> Result<()> {
    let unwritable = |e: std::io::Error| Error::Config(format!("checkpoint directory {} is not writable: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(unwritable)?;
    let probe = dir.join(".write-probe");
    fs::write(&probe, b"").map_err(unwritable)?;
    fs::remove_file(&probe).map_err(unwritable)
}

/// Runs training as described by `config`, writing one line per epoch to
/// `log`.
pub fn train(config: &TrainConfig, log: &mut dyn Write) -> Result<TrainOutcome> {
    config.validate()?;
    let train_path = config
        .train
        .as_ref()
        .ok_or_else(|| Error::Config("no training corpus (`train = <path>`)".into()))?;
    prepare_checkpoint_dir(&config.checkpoint_dir)?;

    let mut train_data = load_corpus(train_path)?;
    let dev_data = match &config.dev {
        Some(p) => load_corpus(p)?,
        None => {
            if config.dev_holdout == 0 || train_data.len() <= config.dev_holdout {
                return Err(Error::Config(format!(
                    "cannot hold out {} dev sentences from a corpus of {}; set `dev` or `dev_holdout`",
                    config.dev_holdout,
                    train_data.len()
                )));
            }
            train_data.split_off(train_data.len() - config.dev_holdout)
        }
    };
    if train_data.is_empty() {
        return Err(Error::Config("training corpus is empty".into()));
    }

    let vocab = Vocabulary::from_sentences(train_data.iter().map(|(s, _)| s));
    let mut init_rng = stream(config.seed, INIT_STREAM);
    let (embeddings, hit_rate) = match &config.embeddings {
        Some(p) => {
            let table = load_embeddings(p, &vocab, config.conv.n, &mut init_rng)?;
            (table.table, Some(table.hit_rate))
        }
        None => (random_embeddings(vocab.len(), config.conv.n, &mut init_rng), None),
    };
    let params = ModelParams::init(&config.conv, embeddings, &mut init_rng)?;
    let mut model = Segmenter::new(config.conv.clone(), params)?;
    let mut optimizer = AdamState::new(model.params.named().iter().map(|(_, t)| t.shape()));
    let mut dropout_rng = stream(config.seed, DROPOUT_STREAM);

    let examples = train_data
        .iter()
        .map(|(s, l)| Example::new(&vocab, s, l))
        .collect::<Result<Vec<_>>>()?;
    let dev = DevSet::new(&dev_data)?;

    let last_checkpoint = config.checkpoint_dir.join(LAST_CHECKPOINT);
    let best_checkpoint = config.checkpoint_dir.join(BEST_CHECKPOINT);
    let mut outcome = TrainOutcome {
        epochs: Vec::new(),
        best_epoch: None,
        best_dev_f: None,
        last_checkpoint,
        best_checkpoint,
        embedding_hit_rate: hit_rate,
    };
    let snapshot = |model: &Segmenter<f64>, optimizer: &AdamState<f64>, epoch: usize, best_dev_f: Option<f64>| Checkpoint {
        config: config.clone(),
        vocab: vocab.clone(),
        params: model.params.clone(),
        optimizer: optimizer.clone(),
        epoch,
        best_dev_f,
    };
    snapshot(&model, &optimizer, 0, None).save(&outcome.last_checkpoint)?;

    let mut grads = model.params.zeros_like();
    let mut stale = 0;

    for epoch in 1..=config.ep {
        let batches = make_batches(&examples, config.bs, config.seed, epoch as u64, config.sort_by_length)?;
        let mut watch = Stopwatch::new();
        watch.start();
        let mut total_loss = 0.0;
        for (b, batch) in batches.iter().enumerate() {
            grads.fill_zero();
            let batch_loss = model.batch_loss_and_gradient(batch, &mut Mode::Train(&mut dropout_rng), &mut grads)?;
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b + 1 });
            }
            total_loss += batch_loss;
            grads.scale_assign(1.0 / batch.len() as f64);
            let frozen = config.freeze_embeddings;
            optimizer.step(
                &config.adam,
                model
                    .params
                    .named_mut()
                    .into_iter()
                    .zip(grads.named())
                    .map(|((name, p), (_, g))| {
                        let g = (!(frozen && name == EMBEDDINGS)).then_some(g);
                        (name, p, g)
                    }),
            )?;
        }
        watch.stop();

        let report = dev.evaluate(&model, &vocab)?;
        let entry = EpochLog {
            epoch,
            mean_loss: total_loss / examples.len() as f64,
            sentences_per_sec: throughput(examples.len(), watch.elapsed())?,
            dev: report,
        };
        writeln!(log, "{}", entry.line()).map_err(|e| Error::Io {
            context: "epoch log".into(),
            source: e,
        })?;

        let improved = outcome.best_dev_f.is_none_or(|best| entry.dev.f1 > best);
        if improved {
            outcome.best_dev_f = Some(entry.dev.f1);
            outcome.best_epoch = Some(epoch);
        }
        let current = snapshot(&model, &optimizer, epoch, outcome.best_dev_f);
        current.save(&outcome.last_checkpoint)?;
        if improved {
            current.save(&outcome.best_checkpoint)?;
            stale = 0;
        } else {
            stale += 1;
        }
        outcome.epochs.push(entry);
        if config.patience > 0 && stale >= config.patience {
            break;
        }
    }
    Ok(outcome)
}
