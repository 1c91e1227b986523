//! Configuration files: TOML with the sections `stream`, `input`, `pipeline`,
//! `eval`, `tune` and `bench`. Every unknown or ill-typed key is collected so
//! one error lists all offenders.

use std::path::{Path, PathBuf};

use driftguard::baselines::DetectorKind;
use driftguard::datagen::{CsvOptions, StreamConfig, StreamKind};
use driftguard::eval::EvalOptions;
use driftguard::params::{ParamValue, KEYS};
use driftguard::pipeline::PipelineConfig;
use driftguard::regressors::RegressorKind;
use driftguard::tune::{ParamRange, SearchSpace, SequdOptions};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::error::{CliError, CliResult};

/// Column selection for delimited files that are not in the stream format.
#[derive(Debug, Clone, PartialEq)]
pub struct InputSpec {
    pub target: String,
    pub features: Vec<String>,
    pub csv: CsvOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneSpec {
    pub options: SequdOptions,
    /// Held-out replays averaged by the objective.
    pub replays: usize,
    pub space: SearchSpace,
}

impl Default for TuneSpec {
    fn default() -> Self {
        TuneSpec {
            options: SequdOptions::default(),
            replays: 1,
            space: SearchSpace::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Synthetic(StreamConfig),
    File {
        stream: PathBuf,
        truth: Option<PathBuf>,
        input: Option<InputSpec>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub source: DatasetSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSpec {
    pub datasets: Vec<Dataset>,
    pub regressors: Vec<RegressorKind>,
    pub detectors: Vec<DetectorKind>,
    pub seeds: Vec<u64>,
    /// Per-detector search spaces; cells whose detector has one are tuned first.
    pub spaces: Vec<(DetectorKind, SearchSpace)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Config {
    pub stream: Option<StreamConfig>,
    pub input: Option<InputSpec>,
    pub pipeline: PipelineConfig,
    pub eval: EvalOptions,
    pub tune: TuneSpec,
    pub bench: Option<BenchSpec>,
    /// Hex SHA-256 of the file text; `None` for built-in defaults.
    pub sha256: Option<String>,
}

/// Collects problems while walking the document.
#[derive(Default)]
struct Issues(Vec<String>);

impl Issues {
    fn unknown(&mut self, key: &str) {
        self.0.push(format!("unknown key `{key}`"));
    }

    fn bad(&mut self, key: &str, msg: impl std::fmt::Display) {
        self.0.push(format!("`{key}`: {msg}"));
    }
}

fn scalar(v: &Value) -> Option<ParamValue> {
    match v {
        Value::Boolean(b) => Some(ParamValue::Bool(*b)),
        Value::Integer(i) => Some(ParamValue::Int(*i)),
        Value::Float(x) => Some(ParamValue::Float(*x)),
        Value::String(s) => Some(ParamValue::Str(s.clone())),
        _ => None,
    }
}

fn to_toml(v: &ParamValue) -> Value {
    match v {
        ParamValue::Bool(b) => Value::Boolean(*b),
        ParamValue::Int(i) => Value::Integer(*i),
        ParamValue::Float(x) => Value::Float(*x),
        ParamValue::Str(s) => Value::String(s.clone()),
    }
}

/// Flattens nested tables into dotted keys. Tables holding a `values` array
/// are kept whole (categorical search ranges).
fn flatten<'a>(table: &'a Table, prefix: &str, out: &mut Vec<(String, &'a Value)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            Value::Table(t) if !t.contains_key("values") => flatten(t, &key, out),
            _ => out.push((key, v)),
        }
    }
}

fn as_table<'a>(v: &'a Value, key: &str, issues: &mut Issues) -> Option<&'a Table> {
    match v {
        Value::Table(t) => Some(t),
        _ => {
            issues.bad(key, "expected a table");
            None
        }
    }
}

fn usize_of(v: &Value, key: &str, issues: &mut Issues) -> Option<usize> {
    match v {
        Value::Integer(i) if *i >= 0 => Some(*i as usize),
        _ => {
            issues.bad(key, "expected a non-negative integer");
            None
        }
    }
}

fn f64_of(v: &Value, key: &str, issues: &mut Issues) -> Option<f64> {
    match v {
        Value::Float(x) => Some(*x),
        Value::Integer(i) => Some(*i as f64),
        _ => {
            issues.bad(key, "expected a number");
            None
        }
    }
}

fn bool_of(v: &Value, key: &str, issues: &mut Issues) -> Option<bool> {
    match v {
        Value::Boolean(b) => Some(*b),
        _ => {
            issues.bad(key, "expected true or false");
            None
        }
    }
}

fn str_of<'a>(v: &'a Value, key: &str, issues: &mut Issues) -> Option<&'a str> {
    match v {
        Value::String(s) => Some(s),
        _ => {
            issues.bad(key, "expected a string");
            None
        }
    }
}

fn strings_of(v: &Value, key: &str, issues: &mut Issues) -> Option<Vec<String>> {
    match v {
        Value::Array(a) if a.iter().all(|x| x.is_str()) => {
            Some(a.iter().filter_map(|x| x.as_str().map(str::to_string)).collect())
        }
        _ => {
            issues.bad(key, "expected an array of strings");
            None
        }
    }
}

/// Applies one `stream` key; returns false for unknown keys.
fn set_stream(cfg: &mut StreamConfig, key: &str, full: &str, v: &Value, issues: &mut Issues) -> bool {
    match key {
        "kind" => {
            if let Some(s) = str_of(v, full, issues) {
                match StreamKind::parse(s) {
                    Some(k) => cfg.kind = k,
                    None => issues.bad(full, format!("expected abrupt, incremental or mixed, got `{s}`")),
                }
            }
        }
        "n_segments" => cfg.n_segments = usize_of(v, full, issues).unwrap_or(cfg.n_segments),
        "segment_len" => cfg.segment_len = usize_of(v, full, issues).unwrap_or(cfg.segment_len),
        "d" => cfg.d = usize_of(v, full, issues).unwrap_or(cfg.d),
        "transition_len" => cfg.transition_len = usize_of(v, full, issues).unwrap_or(cfg.transition_len),
        "noise_var" => cfg.noise_var = f64_of(v, full, issues).unwrap_or(cfg.noise_var),
        "delta" => cfg.delta = f64_of(v, full, issues).unwrap_or(cfg.delta),
        "spread_is_std" => cfg.spread_is_std = bool_of(v, full, issues).unwrap_or(cfg.spread_is_std),
        "noise_free" => cfg.noise_free = bool_of(v, full, issues).unwrap_or(cfg.noise_free),
        "seed" => cfg.seed = usize_of(v, full, issues).map_or(cfg.seed, |s| s as u64),
        _ => return false,
    }
    true
}

fn parse_stream(t: &Table, prefix: &str, issues: &mut Issues) -> StreamConfig {
    let mut cfg = StreamConfig::default();
    for (k, v) in t {
        let full = format!("{prefix}.{k}");
        if !set_stream(&mut cfg, k, &full, v, issues) {
            issues.unknown(&full);
        }
    }
    if let Err(e) = cfg.validate() {
        issues.bad(prefix, e);
    }
    cfg
}

/// Applies one `input` key; returns false for unknown keys.
fn set_input(spec: &mut InputSpec, key: &str, full: &str, v: &Value, issues: &mut Issues) -> bool {
    match key {
        "target" => spec.target = str_of(v, full, issues).unwrap_or_default().to_string(),
        "features" => spec.features = strings_of(v, full, issues).unwrap_or_default(),
        "missing" => {
            if let Some(codes) = strings_of(v, full, issues) {
                spec.csv.missing_codes.extend(codes);
            }
        }
        "delimiter" => match str_of(v, full, issues).map(str::as_bytes) {
            Some([b]) => spec.csv.delimiter = *b,
            Some(_) => issues.bad(full, "expected a single-byte delimiter"),
            None => {}
        },
        _ => return false,
    }
    true
}

fn empty_input() -> InputSpec {
    InputSpec {
        target: String::new(),
        features: Vec::new(),
        csv: CsvOptions::default(),
    }
}

fn check_input(spec: &InputSpec, prefix: &str, issues: &mut Issues) {
    if spec.target.is_empty() {
        issues.bad(prefix, "missing `target`");
    }
}

fn parse_input(t: &Table, prefix: &str, issues: &mut Issues) -> InputSpec {
    let mut spec = empty_input();
    for (k, v) in t {
        let full = format!("{prefix}.{k}");
        if !set_input(&mut spec, k, &full, v, issues) {
            issues.unknown(&full);
        }
    }
    check_input(&spec, prefix, issues);
    spec
}

fn parse_pipeline(t: &Table, issues: &mut Issues) -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    let mut flat = Vec::new();
    flatten(t, "", &mut flat);
    for (k, v) in flat {
        let full = format!("pipeline.{k}");
        let Some(p) = scalar(v) else {
            issues.bad(&full, "expected a scalar value");
            continue;
        };
        match cfg.set(&k, &p) {
            Ok(()) => {}
            Err(driftguard::Error::UnknownKey(_)) => issues.unknown(&full),
            Err(e) => issues.bad(&full, e),
        }
    }
    if let Err(e) = cfg.validate(None) {
        issues.bad("pipeline", e);
    }
    cfg
}

fn parse_eval(t: &Table, issues: &mut Issues) -> EvalOptions {
    let mut o = EvalOptions::default();
    for (k, v) in t {
        let full = format!("eval.{k}");
        match k.as_str() {
            "tolerance" => o.tolerance = usize_of(v, &full, issues).map_or(o.tolerance, |x| x as u64),
            "transition_len" => o.transition_len = usize_of(v, &full, issues).map_or(o.transition_len, |x| x as u64),
            "include_warnings" => o.include_warnings = bool_of(v, &full, issues).unwrap_or(o.include_warnings),
            _ => issues.unknown(&full),
        }
    }
    o
}

fn parse_range(v: &Value, key: &str, issues: &mut Issues) -> Option<ParamRange> {
    match v {
        Value::Array(a) if a.len() == 2 => match (&a[0], &a[1]) {
            (Value::Integer(lo), Value::Integer(hi)) => Some(ParamRange::Integer { lo: *lo, hi: *hi }),
            (lo, hi) => match (
                lo.as_float().or(lo.as_integer().map(|i| i as f64)),
                hi.as_float().or(hi.as_integer().map(|i| i as f64)),
            ) {
                (Some(lo), Some(hi)) => Some(ParamRange::Continuous { lo, hi }),
                _ => {
                    issues.bad(key, "range bounds must be numbers");
                    None
                }
            },
        },
        Value::Table(t) if t.len() == 1 => match t.get("values") {
            Some(Value::Array(a)) => {
                let vals: Option<Vec<ParamValue>> = a.iter().map(scalar).collect();
                match vals {
                    Some(v) if !v.is_empty() => Some(ParamRange::Categorical(v)),
                    _ => {
                        issues.bad(key, "`values` must be a nonempty array of scalars");
                        None
                    }
                }
            }
            _ => {
                issues.bad(key, "expected `{ values = [...] }`");
                None
            }
        },
        _ => {
            issues.bad(key, "expected `[lo, hi]` or `{ values = [...] }`");
            None
        }
    }
}

fn parse_space(t: &Table, prefix: &str, issues: &mut Issues) -> SearchSpace {
    let mut space = SearchSpace::new();
    let mut flat = Vec::new();
    flatten(t, "", &mut flat);
    for (k, v) in flat {
        let full = format!("{prefix}.{k}");
        if !KEYS.contains(&k.as_str()) {
            issues.unknown(&full);
            continue;
        }
        if let Some(r) = parse_range(v, &full, issues) {
            space = space.with(&k, r);
        }
    }
    if let Err(e) = space.validate() {
        issues.bad(prefix, e);
    }
    space
}

fn parse_tune(t: &Table, issues: &mut Issues) -> TuneSpec {
    let mut spec = TuneSpec::default();
    let o = &mut spec.options;
    for (k, v) in t {
        let full = format!("tune.{k}");
        match k.as_str() {
            "n_rounds" => o.n_rounds = usize_of(v, &full, issues).unwrap_or(o.n_rounds),
            "points_per_round" => o.points_per_round = usize_of(v, &full, issues).unwrap_or(o.points_per_round),
            "shrink" => o.shrink = f64_of(v, &full, issues).unwrap_or(o.shrink),
            "seed" => o.seed = usize_of(v, &full, issues).map_or(o.seed, |s| s as u64),
            "replays" => spec.replays = usize_of(v, &full, issues).unwrap_or(spec.replays),
            "space" => {
                if let Some(t) = as_table(v, &full, issues) {
                    spec.space = parse_space(t, &full, issues);
                }
            }
            _ => issues.unknown(&full),
        }
    }
    if spec.replays == 0 {
        issues.bad("tune.replays", "must be at least 1");
    }
    spec
}

fn parse_dataset(t: &Table, prefix: &str, base: &Path, issues: &mut Issues) -> Option<Dataset> {
    let mut name = None;
    let mut synth = StreamConfig::default();
    let mut synth_keys = false;
    let mut stream = None;
    let mut truth = None;
    let mut input = empty_input();
    let mut input_keys = false;
    for (k, v) in t {
        let full = format!("{prefix}.{k}");
        match k.as_str() {
            "name" => name = str_of(v, &full, issues).map(str::to_string),
            "stream" => stream = str_of(v, &full, issues).map(|p| base.join(p)),
            "truth" => truth = str_of(v, &full, issues).map(|p| base.join(p)),
            _ if set_stream(&mut synth, k, &full, v, issues) => synth_keys = true,
            _ if set_input(&mut input, k, &full, v, issues) => input_keys = true,
            _ => issues.unknown(&full),
        }
    }
    let Some(name) = name else {
        issues.bad(prefix, "missing `name`");
        return None;
    };
    let source = match stream {
        Some(stream) => {
            if synth_keys {
                issues.bad(prefix, "a file dataset takes no generator keys");
            }
            if input_keys {
                check_input(&input, prefix, issues);
            }
            DatasetSource::File {
                stream,
                truth,
                input: input_keys.then_some(input),
            }
        }
        None => {
            if truth.is_some() || input_keys {
                issues.bad(prefix, "`truth` and column keys need `stream`");
            }
            if let Err(e) = synth.validate() {
                issues.bad(prefix, e);
            }
            DatasetSource::Synthetic(synth)
        }
    };
    Some(Dataset { name, source })
}

fn parse_bench(t: &Table, base: &Path, issues: &mut Issues) -> BenchSpec {
    let mut spec = BenchSpec {
        datasets: Vec::new(),
        regressors: vec![RegressorKind::Huber],
        detectors: vec![DetectorKind::EwmadDt],
        seeds: vec![0],
        spaces: Vec::new(),
    };
    for (k, v) in t {
        let full = format!("bench.{k}");
        match k.as_str() {
            "datasets" => match v {
                Value::Array(a) => {
                    for (i, d) in a.iter().enumerate() {
                        let p = format!("{full}[{i}]");
                        if let Some(d) = as_table(d, &p, issues).and_then(|t| parse_dataset(t, &p, base, issues)) {
                            spec.datasets.push(d);
                        }
                    }
                }
                _ => issues.bad(&full, "expected an array of tables (`[[bench.datasets]]`)"),
            },
            "regressors" => {
                if let Some(names) = strings_of(v, &full, issues) {
                    spec.regressors = names
                        .iter()
                        .filter_map(|n| {
                            let r = RegressorKind::parse(n);
                            if r.is_none() {
                                issues.bad(&full, format!("unknown regressor `{n}`"));
                            }
                            r
                        })
                        .collect();
                }
            }
            "detectors" => {
                if let Some(names) = strings_of(v, &full, issues) {
                    spec.detectors = names
                        .iter()
                        .filter_map(|n| {
                            let d = DetectorKind::parse(n);
                            if d.is_none() {
                                issues.bad(&full, format!("unknown detector `{n}`"));
                            }
                            d
                        })
                        .collect();
                }
            }
            "seeds" => match v {
                Value::Array(a) if a.iter().all(|x| matches!(x, Value::Integer(i) if *i >= 0)) => {
                    spec.seeds = a.iter().filter_map(Value::as_integer).map(|i| i as u64).collect();
                }
                _ => issues.bad(&full, "expected an array of non-negative integers"),
            },
            "spaces" => {
                if let Some(t) = as_table(v, &full, issues) {
                    for (det, space) in t {
                        let p = format!("{full}.{det}");
                        match (DetectorKind::parse(det), as_table(space, &p, issues)) {
                            (Some(d), Some(s)) => spec.spaces.push((d, parse_space(s, &p, issues))),
                            (None, _) => issues.bad(&p, format!("unknown detector `{det}`")),
                            _ => {}
                        }
                    }
                }
            }
            _ => issues.unknown(&full),
        }
    }
    if spec.datasets.is_empty() || spec.regressors.is_empty() || spec.detectors.is_empty() || spec.seeds.is_empty() {
        issues.bad(
            "bench",
            "datasets, regressors, detectors and seeds must all be nonempty",
        );
    }
    spec
}

impl Config {
    /// Parses configuration text; relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> CliResult<Config> {
        let doc: Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        let mut issues = Issues::default();
        let mut cfg = Config::default();
        for (section, v) in &doc {
            let Some(t) = as_table(v, section, &mut issues) else {
                continue;
            };
            match section.as_str() {
                "stream" => cfg.stream = Some(parse_stream(t, "stream", &mut issues)),
                "input" => cfg.input = Some(parse_input(t, "input", &mut issues)),
                "pipeline" => cfg.pipeline = parse_pipeline(t, &mut issues),
                "eval" => cfg.eval = parse_eval(t, &mut issues),
                "tune" => cfg.tune = parse_tune(t, &mut issues),
                "bench" => cfg.bench = Some(parse_bench(t, base, &mut issues)),
                _ => issues.unknown(section),
            }
        }
        if !issues.0.is_empty() {
            return Err(CliError::Config(issues.0.join("; ")));
        }
        cfg.sha256 = Some(sha256_hex(text.as_bytes()));
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Config> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Config::parse(&text, base)
    }

    /// Built-in defaults when no file is given.
    pub fn load_or_default(path: Option<&Path>) -> CliResult<Config> {
        path.map_or_else(|| Ok(Config::default()), Config::load)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// A complete configuration file for `pipeline`, `eval` and optionally
/// `input`, loadable by [`Config::load`].
pub fn pipeline_toml(pipeline: &PipelineConfig, eval: &EvalOptions, input: Option<&InputSpec>) -> String {
    let mut p = Table::new();
    for (key, value) in pipeline.to_params() {
        let mut node = &mut p;
        let mut parts: Vec<&str> = key.split('.').collect();
        let leaf = parts.pop().unwrap_or(key);
        for part in parts {
            node = node
                .entry(part)
                .or_insert_with(|| Value::Table(Table::new()))
                .as_table_mut()
                .expect("dotted keys nest tables only");
        }
        node.insert(leaf.to_string(), to_toml(&value));
    }
    let mut e = Table::new();
    e.insert("tolerance".into(), Value::Integer(eval.tolerance as i64));
    e.insert("transition_len".into(), Value::Integer(eval.transition_len as i64));
    e.insert("include_warnings".into(), Value::Boolean(eval.include_warnings));
    let mut doc = Table::new();
    doc.insert("pipeline".into(), Value::Table(p));
    doc.insert("eval".into(), Value::Table(e));
    if let Some(spec) = input {
        let defaults = CsvOptions::default();
        let extra: Vec<Value> = spec
            .csv
            .missing_codes
            .iter()
            .filter(|c| !defaults.missing_codes.contains(c))
            .map(|c| Value::String(c.clone()))
            .collect();
        let mut i = Table::new();
        i.insert("target".into(), Value::String(spec.target.clone()));
        i.insert(
            "features".into(),
            Value::Array(spec.features.iter().cloned().map(Value::String).collect()),
        );
        i.insert("missing".into(), Value::Array(extra));
        i.insert(
            "delimiter".into(),
            Value::String((spec.csv.delimiter as char).to_string()),
        );
        doc.insert("input".into(), Value::Table(i));
    }
    toml::to_string(&doc).expect("tables of scalars always serialize")
}
