//! Plain-text training configuration: `key = value` lines, `#` comments.
//!
//! Every key has a default, so an empty file describes the reference model
//! (n = 100, lr = 0.001, fs = 100, ly = 4, s = 3, dp = 0.3, sl = 1,
//! ep = 100, bs = 32).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::layers::{ConvConfig, STRIDE};
use crate::optim::AdamConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub conv: ConvConfig,
    pub adam: AdamConfig,
    pub ep: usize,
    pub bs: usize,
    pub seed: u64,
    /// Epochs without dev improvement before stopping; 0 disables.
    pub patience: usize,
    pub freeze_embeddings: bool,
    pub sort_by_length: bool,
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    /// Sentences held out from the end of the training corpus when no dev
    /// corpus is given.
    pub dev_holdout: usize,
    pub embeddings: Option<PathBuf>,
    pub checkpoint_dir: PathBuf,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            conv: ConvConfig::default(),
            adam: AdamConfig::default(),
            ep: 100,
            bs: 32,
            seed: 1,
            patience: 10,
            freeze_embeddings: false,
            sort_by_length: false,
            train: None,
            dev: None,
            dev_holdout: 2000,
            embeddings: None,
            checkpoint_dir: PathBuf::from("checkpoints"),
        }
    }
}

fn parse_value<V: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<V> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("line {line}: invalid value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str, line: usize) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("line {line}: `{key}` expects true or false, got `{value}`"))),
    }
}

fn optional_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

impl TrainConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = TrainConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {line_no}: expected `key = value`")))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "n" => c.conv.n = parse_value(key, value, line_no)?,
                "fs" => c.conv.fs = parse_value(key, value, line_no)?,
                "ly" => c.conv.ly = parse_value(key, value, line_no)?,
                "s" => c.conv.s = parse_value(key, value, line_no)?,
                "dp" => c.conv.dp = parse_value(key, value, line_no)?,
                "scheme" => c.conv.scheme = value.parse()?,
                "sl" => {
                    let sl: usize = parse_value(key, value, line_no)?;
                    if sl != STRIDE {
                        return Err(Error::Config(format!("line {line_no}: stride sl must be {STRIDE}")));
                    }
                }
                "lr" => c.adam.lr = parse_value(key, value, line_no)?,
                "beta1" => c.adam.beta1 = parse_value(key, value, line_no)?,
                "beta2" => c.adam.beta2 = parse_value(key, value, line_no)?,
                "eps" => c.adam.eps = parse_value(key, value, line_no)?,
                "ep" => c.ep = parse_value(key, value, line_no)?,
                "bs" => c.bs = parse_value(key, value, line_no)?,
                "seed" => c.seed = parse_value(key, value, line_no)?,
                "patience" => c.patience = parse_value(key, value, line_no)?,
                "freeze_embeddings" => c.freeze_embeddings = parse_bool(key, value, line_no)?,
                "sort_by_length" => c.sort_by_length = parse_bool(key, value, line_no)?,
                "train" => c.train = optional_path(value),
                "dev" => c.dev = optional_path(value),
                "dev_holdout" => c.dev_holdout = parse_value(key, value, line_no)?,
                "embeddings" => c.embeddings = optional_path(value),
                "checkpoint_dir" => c.checkpoint_dir = PathBuf::from(value),
                other => return Err(Error::Config(format!("line {line_no}: unknown key `{other}`"))),
            }
        }
        c.validate()?;
        Ok(c)
    }

    /// Reads a config file; relative paths inside it resolve against the
    /// file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut c = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [&mut c.train, &mut c.dev, &mut c.embeddings].into_iter().flatten() {
            resolve(p);
        }
        resolve(&mut c.checkpoint_dir);
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.conv.validate()?;
        self.adam.validate()?;
        if self.bs == 0 {
            return Err(Error::Config("batch size bs must be at least 1".into()));
        }
        Ok(())
    }

    /// Canonical text form listing every key; parses back to an equal value.
    pub fn to_text(&self) -> String {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let mut out = String::new();
        let c = &self.conv;
        let a = &self.adam;
        let _ = writeln!(out, "n = {}", c.n);
        let _ = writeln!(out, "fs = {}", c.fs);
        let _ = writeln!(out, "ly = {}", c.ly);
        let _ = writeln!(out, "s = {}", c.s);
        let _ = writeln!(out, "dp = {}", c.dp);
        let _ = writeln!(out, "sl = {STRIDE}");
        let _ = writeln!(out, "scheme = {}", c.scheme);
        let _ = writeln!(out, "lr = {}", a.lr);
        let _ = writeln!(out, "beta1 = {}", a.beta1);
        let _ = writeln!(out, "beta2 = {}", a.beta2);
        let _ = writeln!(out, "eps = {:e}", a.eps);
        let _ = writeln!(out, "ep = {}", self.ep);
        let _ = writeln!(out, "bs = {}", self.bs);
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "patience = {}", self.patience);
        let _ = writeln!(out, "freeze_embeddings = {}", self.freeze_embeddings);
        let _ = writeln!(out, "sort_by_length = {}", self.sort_by_length);
        let _ = writeln!(out, "train = {}", path(&self.train));
        let _ = writeln!(out, "dev = {}", path(&self.dev));
        let _ = writeln!(out, "dev_holdout = {}", self.dev_holdout);
        let _ = writeln!(out, "embeddings = {}", path(&self.embeddings));
        let _ = writeln!(out, "checkpoint_dir = {}", self.checkpoint_dir.display());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::Scheme;

    #[test]
    fn empty_config_is_reference_model() {
        let c = TrainConfig::parse("").unwrap();
        assert_eq!(c, TrainConfig::default());
        assert_eq!((c.conv.n, c.conv.fs, c.conv.ly, c.conv.s), (100, 100, 4, 3));
        assert_eq!((c.conv.dp, c.adam.lr), (0.3, 0.001));
        assert_eq!((c.ep, c.bs, c.dev_holdout), (100, 32, 2000));
        assert_eq!((c.adam.beta1, c.adam.beta2, c.adam.eps), (0.9, 0.999, 1e-8));
        assert_eq!(c.conv.scheme, Scheme::Future);
    }

    #[test]
    fn parses_keys_and_comments() {
        let c = TrainConfig::parse("# tiny\nn = 8 # width\nfs=8\nscheme = past\nfreeze_embeddings = true\ntrain = a.txt\n").unwrap();
        assert_eq!(c.conv.n, 8);
        assert_eq!(c.conv.scheme, Scheme::Past);
        assert!(c.freeze_embeddings);
        assert_eq!(c.train, Some(PathBuf::from("a.txt")));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(TrainConfig::parse("bogus = 1").is_err());
        assert!(TrainConfig::parse("n").is_err());
        assert!(TrainConfig::parse("sl = 2").is_err());
        assert!(TrainConfig::parse("dp = 1.0").is_err());
        assert!(TrainConfig::parse("bs = 0").is_err());
        assert!(TrainConfig::parse("ly = x").is_err());
    }

    #[test]
    fn text_round_trip() {
        let mut c = TrainConfig::default();
        c.conv.scheme = Scheme::Past;
        c.dev = Some(PathBuf::from("dev.txt"));
        c.adam.eps = 3.5e-9;
        assert_eq!(TrainConfig::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn relative_paths_follow_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        fs::write(&path, "train = data/train.txt\ncheckpoint_dir = out\n").unwrap();
        let c = TrainConfig::from_file(&path).unwrap();
        assert_eq!(c.train.unwrap(), dir.path().join("data/train.txt"));
        assert_eq!(c.checkpoint_dir, dir.path().join("out"));
    }
}
