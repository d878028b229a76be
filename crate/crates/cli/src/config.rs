//! Line-oriented `key = value` experiment config files for `ar-curve`.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown and
//! duplicate keys are errors. List-valued keys take space-separated
//! tokens; kernels are `linear` or `rbf:<gamma>`; network architectures
//! are comma-joined layer sizes (`8,4`) or `none` for an affine map.

use std::collections::BTreeMap;
use std::path::PathBuf;

use rejopt_core::evaluation::{default_w_r_grid, HyperGrid};
use rejopt_core::{Error, ExperimentConfig, KernelSpec, Method, Result};

#[derive(Debug)]
pub struct FileConfig {
    pub data: PathBuf,
    pub experiment: ExperimentConfig,
}

const KNOWN_KEYS: &[&str] = &[
    "data",
    "dataset",
    "method",
    "fractions",
    "w_r",
    "repetitions",
    "folds",
    "seed",
    "h",
    "kernels",
    "cs",
    "hidden",
    "lrs",
    "epochs",
];

fn bad(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::InvalidParam(format!("config line {line}: {msg}"))
}

pub fn parse_kernel(token: &str) -> Result<KernelSpec> {
    if token == "linear" {
        return Ok(KernelSpec::Linear);
    }
    if let Some(g) = token.strip_prefix("rbf:") {
        let gamma: f64 = g
            .parse()
            .map_err(|_| Error::InvalidParam(format!("bad rbf width in `{token}`")))?;
        let spec = KernelSpec::Rbf { gamma };
        spec.validate()?;
        return Ok(spec);
    }
    Err(Error::InvalidParam(format!(
        "unknown kernel `{token}` (expected `linear` or `rbf:<gamma>`)"
    )))
}

pub fn parse_hidden(token: &str) -> Result<Vec<usize>> {
    if token == "none" {
        return Ok(Vec::new());
    }
    token
        .split(',')
        .map(|t| {
            t.parse::<usize>()
                .ok()
                .filter(|&s| s > 0)
                .ok_or_else(|| Error::InvalidParam(format!("bad layer size in `{token}`")))
        })
        .collect()
}

struct Entry {
    line: usize,
    value: String,
}

fn list<T>(e: &Entry, what: &str, parse: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    let items: Vec<T> = e
        .value
        .split_whitespace()
        .map(|t| parse(t).map_err(|err| bad(e.line, err)))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(bad(e.line, format!("{what} must list at least one value")));
    }
    Ok(items)
}

pub fn parse_config(text: &str) -> Result<FileConfig> {
    let mut entries: BTreeMap<&str, Entry> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| bad(n, format!("expected `key = value`, got `{line}`")))?;
        let key = key.trim();
        let known = KNOWN_KEYS
            .iter()
            .find(|&&k| k == key)
            .ok_or_else(|| bad(n, format!("unknown key `{key}`")))?;
        let prev = entries.insert(*known, Entry { line: n, value: value.trim().to_string() });
        if let Some(prev) = prev {
            return Err(bad(n, format!("duplicate key `{key}` (first set on line {})", prev.line)));
        }
    }

    let required = |key: &str| {
        entries
            .get(key)
            .ok_or_else(|| Error::InvalidParam(format!("config is missing required key `{key}`")))
    };

    let data = PathBuf::from(&required("data")?.value);
    let method = {
        let e = required("method")?;
        Method::parse(&e.value).map_err(|err| bad(e.line, err))?
    };
    let fractions = list(required("fractions")?, "fractions", |t| {
        t.parse::<f64>().map_err(|_| Error::InvalidParam(format!("bad fraction `{t}`")))
    })?;
    let w_r_grid = match entries.get("w_r") {
        Some(e) => list(e, "w_r", |t| {
            t.parse::<f64>().map_err(|_| Error::InvalidParam(format!("bad w_r `{t}`")))
        })?,
        None => default_w_r_grid(),
    };
    let scalar = |key: &str, default: u64| -> Result<u64> {
        match entries.get(key) {
            Some(e) => e.value.parse().map_err(|_| bad(e.line, format!("bad {key} `{}`", e.value))),
            None => Ok(default),
        }
    };
    let repetitions = scalar("repetitions", 100)? as usize;
    let folds = scalar("folds", 5)? as usize;
    let seed = scalar("seed", 0)?;
    let epochs = scalar("epochs", 200)? as usize;
    let h = match entries.get("h") {
        Some(e) => e.value.parse().map_err(|_| bad(e.line, format!("bad h `{}`", e.value)))?,
        None => 1.0,
    };
    let dataset = match entries.get("dataset") {
        Some(e) => e.value.clone(),
        None => data
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into()),
    };

    let grid = match method {
        Method::RejoNn => {
            let hidden = match entries.get("hidden") {
                Some(e) => list(e, "hidden", parse_hidden)?,
                None => vec![vec![8]],
            };
            let lrs = match entries.get("lrs") {
                Some(e) => list(e, "lrs", |t| {
                    t.parse::<f64>().map_err(|_| Error::InvalidParam(format!("bad lr `{t}`")))
                })?,
                None => vec![0.1],
            };
            HyperGrid::Mlp { hidden, lrs, epochs }
        }
        _ => {
            let kernels = match entries.get("kernels") {
                Some(e) => list(e, "kernels", parse_kernel)?,
                None => vec![KernelSpec::Rbf { gamma: 1.0 }],
            };
            let cs = match entries.get("cs") {
                Some(e) => list(e, "cs", |t| {
                    t.parse::<f64>().map_err(|_| Error::InvalidParam(format!("bad C `{t}`")))
                })?,
                None => vec![1.0],
            };
            HyperGrid::Svm { kernels, cs }
        }
    };

    let experiment = ExperimentConfig {
        dataset,
        method,
        grid,
        w_r_grid,
        fractions,
        repetitions,
        base_seed: seed,
        folds,
        h,
    };
    experiment.validate()?;
    Ok(FileConfig { data, experiment })
}
