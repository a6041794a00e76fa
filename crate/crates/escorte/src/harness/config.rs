use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::action::ActionConfig;
use crate::reid::ReidConfig;
use crate::simworld::CorpusSpec;

use super::evaluate::WindowEncoding;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: {msg}")]
    BadValue { key: String, msg: String },
}

/// Parse a plain-text `key = value` file. `#` starts a comment; blank lines
/// are ignored; later assignments win.
pub fn load_kv_file(path: &Path) -> Result<Vec<(String, String)>, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Parse {
                line: i + 1,
                msg: format!("expected `key = value`, got `{raw}`"),
            });
        };
        out.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue {
        key: key.to_string(),
        msg: format!("cannot parse `{value}`"),
    })
}

/// Documented keys: `dims` (three integers: input hidden embed), `margin`,
/// `lr`, `steps`, `batch`, `seed`.
pub fn parse_reid_config(path: &Path) -> Result<ReidConfig, ConfigError> {
    let mut config = ReidConfig::default();
    for (key, value) in load_kv_file(path)? {
        match key.as_str() {
            "dims" => {
                let parts: Vec<&str> = value.split_whitespace().collect();
                if parts.len() != 3 {
                    return Err(ConfigError::BadValue {
                        key,
                        msg: "expected three integers: input hidden embed".into(),
                    });
                }
                config.in_dim = parse_num("dims", parts[0])?;
                config.hidden_dim = parse_num("dims", parts[1])?;
                config.embed_dim = parse_num("dims", parts[2])?;
            }
            "margin" => config.margin = parse_num(&key, &value)?,
            "lr" => config.lr = parse_num(&key, &value)?,
            "steps" => config.steps = parse_num(&key, &value)?,
            "batch" => config.batch = parse_num(&key, &value)?,
            "seed" => config.seed = parse_num(&key, &value)?,
            _ => return Err(ConfigError::UnknownKey(key)),
        }
    }
    Ok(config)
}

/// Documented keys: `w`, `d` (or `d = auto` to derive from the corpus),
/// `heads`, `ff_width`, `lr`, `steps`, `batch`, `seed`, and `input`
/// (`feat_geom` | `feat`). Returns the window encoding alongside the model
/// config; `dim = 0` means "derive from corpus and encoding".
pub fn parse_action_config(path: &Path) -> Result<(ActionConfig, WindowEncoding), ConfigError> {
    let mut config = ActionConfig {
        dim: 0,
        ff_width: 0,
        ..ActionConfig::default()
    };
    let mut encoding = WindowEncoding::FeatureGeometry;
    for (key, value) in load_kv_file(path)? {
        match key.as_str() {
            "w" => config.window = parse_num(&key, &value)?,
            "d" => {
                config.dim = if value == "auto" {
                    0
                } else {
                    parse_num(&key, &value)?
                }
            }
            "heads" => config.heads = parse_num(&key, &value)?,
            "ff_width" => config.ff_width = parse_num(&key, &value)?,
            "lr" => config.lr = parse_num(&key, &value)?,
            "steps" => config.steps = parse_num(&key, &value)?,
            "batch" => config.batch = parse_num(&key, &value)?,
            "seed" => config.seed = parse_num(&key, &value)?,
            "input" => {
                encoding = WindowEncoding::from_name(&value).ok_or(ConfigError::BadValue {
                    key,
                    msg: "expected feat_geom or feat".into(),
                })?
            }
            _ => return Err(ConfigError::UnknownKey(key)),
        }
    }
    Ok((config, encoding))
}

/// Parsed scenario file: the corpus template plus the sequence count.
#[derive(Debug, Clone)]
pub struct ScenarioFile {
    pub spec: CorpusSpec,
    pub sequences: usize,
}

/// Documented keys: `sequences`, `fps`, `dim`, `identities`, `sigma`,
/// `occlusion`, `max_distractors`, `duration_min_s`, `duration_max_s`,
/// `split_train`, `split_dev`, `split_test`.
pub fn parse_scenario(path: &Path) -> Result<ScenarioFile, ConfigError> {
    let mut spec = CorpusSpec::default();
    let mut sequences = 100usize;
    for (key, value) in load_kv_file(path)? {
        match key.as_str() {
            "sequences" => sequences = parse_num(&key, &value)?,
            "fps" => spec.fps = parse_num(&key, &value)?,
            "dim" => spec.dim = parse_num(&key, &value)?,
            "identities" => spec.identities = parse_num(&key, &value)?,
            "sigma" => spec.sigma = parse_num(&key, &value)?,
            "occlusion" => spec.occlusion_prob = parse_num(&key, &value)?,
            "max_distractors" => spec.max_distractors = parse_num(&key, &value)?,
            "duration_min_s" => spec.duration_range.0 = parse_num(&key, &value)?,
            "duration_max_s" => spec.duration_range.1 = parse_num(&key, &value)?,
            "split_train" => spec.split_fractions.0 = parse_num(&key, &value)?,
            "split_dev" => spec.split_fractions.1 = parse_num(&key, &value)?,
            "split_test" => spec.split_fractions.2 = parse_num(&key, &value)?,
            _ => return Err(ConfigError::UnknownKey(key)),
        }
    }
    Ok(ScenarioFile { spec, sequences })
}
