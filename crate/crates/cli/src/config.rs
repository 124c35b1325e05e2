//! Resolved run configuration and its flat `key = value` text form.
//!
//! Values are layered: experiment defaults, then the config file, then
//! command-line flags. Flags and file entries go through the same parser.

use std::fmt::Write as _;
use std::path::PathBuf;

use gibbs_lsi::GibbsParams;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Jsonl,
    Csv,
    Both,
}

impl Format {
    fn name(self) -> &'static str {
        match self {
            Format::Jsonl => "jsonl",
            Format::Csv => "csv",
            Format::Both => "both",
        }
    }

    pub fn csv(self) -> bool {
        self != Format::Jsonl
    }

    pub fn jsonl(self) -> bool {
        self != Format::Csv
    }
}

pub const EXPERIMENTS: [&str; 9] = [
    "sample",
    "hessian",
    "convexity-scan",
    "lsi-bracket",
    "bd-optimize",
    "bd-transfer",
    "blowup-scan",
    "hessian-of-v",
    "vt-scan",
];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub experiment: String,
    pub p: f64,
    pub k: f64,
    pub lambda: f64,
    pub r: f64,
    pub l: f64,
    pub eps0: f64,
    pub sigma: f64,
    /// `None` lets the experiment choose (only `blowup-scan` does).
    pub n: Option<usize>,
    pub m: Vec<usize>,
    pub oversampling: usize,
    pub samples: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub format: Format,
    pub t: Vec<f64>,
    pub epochs: usize,
    pub a: f64,
    pub potential: String,
    pub drift: String,
    pub cutoff: String,
    pub focusing: bool,
    pub n_r: usize,
    pub n_theta: usize,
    pub chain_steps: usize,
}

impl RunConfig {
    pub fn defaults_for(experiment: &str) -> Self {
        let focusing_high = matches!(experiment, "blowup-scan" | "hessian-of-v" | "vt-scan");
        let (n, samples, m): (Option<usize>, usize, Vec<usize>) = match experiment {
            "sample" => (Some(16), 1000, vec![1]),
            "hessian" | "convexity-scan" => (Some(8), 1000, vec![1]),
            "lsi-bracket" => (Some(0), 0, vec![1]),
            "bd-optimize" | "bd-transfer" => (Some(2), 2000, vec![1]),
            "blowup-scan" => (None, 20_000_000, vec![1, 2, 4, 8, 16]),
            "hessian-of-v" => (Some(16), 200_000, vec![0, 2, 4]),
            "vt-scan" => (Some(16), 100_000, vec![1]),
            _ => (Some(8), 1000, vec![1]),
        };
        Self {
            experiment: experiment.to_string(),
            p: if focusing_high { 5.0 } else { 4.0 },
            k: 1.0,
            lambda: 0.0,
            r: if experiment == "hessian-of-v" { 10.0 } else { 1.0 },
            l: 1.0,
            eps0: 0.1,
            sigma: 5.0,
            n,
            m,
            oversampling: 4,
            samples,
            seed: 0,
            out: PathBuf::from("out"),
            format: Format::Both,
            t: (0..=24).map(|i| 1e-3 * 10f64.powf(i as f64 / 6.0)).collect(),
            epochs: 40,
            a: 1.0,
            potential: "linear".into(),
            drift: "deterministic_constant".into(),
            cutoff: "sharp".into(),
            focusing: true,
            n_r: 400,
            n_theta: 128,
            chain_steps: 20_000,
        }
    }

    pub fn gibbs(&self) -> GibbsParams {
        GibbsParams {
            p: self.p,
            k: self.k,
            lambda: self.lambda,
            r: self.r,
            l: self.l,
            eps0: self.eps0,
            sigma: self.sigma,
            n: self.n.unwrap_or(0),
        }
    }

    pub fn truncation(&self) -> usize {
        self.n.unwrap_or(0)
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = value.trim();
        match key.trim() {
            "experiment" => {
                if value != self.experiment {
                    return err(format!("config is for experiment {value:?}, not {:?}", self.experiment));
                }
            }
            "p" => self.p = num(key, value)?,
            "K" => self.k = num(key, value)?,
            "Lambda" => self.lambda = num(key, value)?,
            "R" => self.r = num(key, value)?,
            "L" => self.l = num(key, value)?,
            "eps0" => self.eps0 = num(key, value)?,
            "sigma" => self.sigma = num(key, value)?,
            "N" => self.n = if value == "auto" { None } else { Some(num(key, value)?) },
            "M" => self.m = list(key, value)?,
            "oversampling" => self.oversampling = num(key, value)?,
            "samples" => self.samples = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "format" => {
                self.format = match value {
                    "jsonl" => Format::Jsonl,
                    "csv" => Format::Csv,
                    "both" => Format::Both,
                    _ => return err(format!("format must be jsonl, csv or both, got {value:?}")),
                }
            }
            "t" => self.t = list(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "a" => self.a = num(key, value)?,
            "potential" => self.potential = value.into(),
            "drift" => self.drift = value.into(),
            "cutoff" => self.cutoff = value.into(),
            "focusing" => self.focusing = num(key, value)?,
            "n_r" => self.n_r = num(key, value)?,
            "n_theta" => self.n_theta = num(key, value)?,
            "chain_steps" => self.chain_steps = num(key, value)?,
            other => return err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    /// Parses a config file body: one `key = value` per line, `#` comments.
    pub fn apply_file(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return err(format!("line {}: expected key = value, got {line:?}", i + 1));
            };
            self.set(k, v).map_err(|e| ConfigError(format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    /// The text form read back by [`RunConfig::apply_file`].
    pub fn to_text(&self) -> String {
        let join = |xs: &[String]| xs.join(",");
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").expect("writing to a string");
        kv("experiment", self.experiment.clone());
        kv("p", self.p.to_string());
        kv("K", self.k.to_string());
        kv("Lambda", self.lambda.to_string());
        kv("R", self.r.to_string());
        kv("L", self.l.to_string());
        kv("eps0", self.eps0.to_string());
        kv("sigma", self.sigma.to_string());
        kv("N", self.n.map_or("auto".into(), |n| n.to_string()));
        kv("M", join(&self.m.iter().map(|m| m.to_string()).collect::<Vec<_>>()));
        kv("oversampling", self.oversampling.to_string());
        kv("samples", self.samples.to_string());
        kv("seed", self.seed.to_string());
        kv("out", self.out.display().to_string());
        kv("format", self.format.name().into());
        kv("t", join(&self.t.iter().map(|t| t.to_string()).collect::<Vec<_>>()));
        kv("epochs", self.epochs.to_string());
        kv("a", self.a.to_string());
        kv("potential", self.potential.clone());
        kv("drift", self.drift.clone());
        kv("cutoff", self.cutoff.clone());
        kv("focusing", self.focusing.to_string());
        kv("n_r", self.n_r.to_string());
        kv("n_theta", self.n_theta.to_string());
        kv("chain_steps", self.chain_steps.to_string());
        s
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| ConfigError(format!("{key}: cannot parse {value:?}: {e}")))
}

fn list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.split(',').filter(|s| !s.trim().is_empty()).map(|s| num(key, s.trim())).collect()
}

/// Range checks; the message names the violated invariant.
pub fn validate_config(c: &RunConfig) -> Result<(), ConfigError> {
    if !EXPERIMENTS.contains(&c.experiment.as_str()) {
        return err(format!("unknown experiment {:?}", c.experiment));
    }
    if !(2.0..6.0).contains(&c.p) {
        return err(format!("p must satisfy 2 <= p < 6, got {}", c.p));
    }
    if !(c.sigma > c.p / 2.0 + 1.0) {
        return err(format!("sigma must satisfy sigma > p/2 + 1 = {}, got {}", c.p / 2.0 + 1.0, c.sigma));
    }
    if c.experiment == "convexity-scan" && !(c.r > 1.0 / 16.0) {
        return err(format!("R must satisfy R > 1/16 for convexity-scan, got {}", c.r));
    }
    if c.experiment != "lsi-bracket" {
        let mut g = c.gibbs();
        g.n = g.n.max(1);
        g.validate().map_err(|e| ConfigError(e.to_string()))?;
    }
    if c.oversampling == 0 {
        return err("oversampling must be >= 1");
    }
    if c.experiment != "lsi-bracket" && c.samples == 0 {
        return err("samples must be >= 1");
    }
    if c.m.is_empty() {
        return err("M must list at least one level");
    }
    if c.experiment == "blowup-scan" && !(c.p > 4.0) {
        return err(format!("blowup-scan requires 4 < p < 6, got p = {}", c.p));
    }
    if c.experiment == "vt-scan" && (c.t.is_empty() || c.t.iter().any(|t| !(*t > 0.0))) {
        return err("t must list positive heat times");
    }
    if !["linear", "soft", "smoothed"].contains(&c.potential.as_str()) {
        return err(format!("potential must be linear, soft or smoothed, got {:?}", c.potential));
    }
    if !["deterministic_constant", "deterministic_time_dependent", "linear_feedback"].contains(&c.drift.as_str()) {
        return err(format!("unknown drift class {:?}", c.drift));
    }
    if !["none", "sharp", "polynomial"].contains(&c.cutoff.as_str()) {
        return err(format!("cutoff must be none, sharp or polynomial, got {:?}", c.cutoff));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_for_every_experiment() {
        for e in EXPERIMENTS {
            validate_config(&RunConfig::defaults_for(e)).unwrap();
        }
    }

    #[test]
    fn boundary_cases_are_rejected() {
        let mut c = RunConfig::defaults_for("sample");
        c.p = 6.0;
        assert!(validate_config(&c).unwrap_err().0.contains("p < 6"));
        let mut c = RunConfig::defaults_for("sample");
        c.sigma = c.p / 2.0 + 1.0;
        assert!(validate_config(&c).unwrap_err().0.contains("sigma"));
        let mut c = RunConfig::defaults_for("convexity-scan");
        c.r = 1.0 / 16.0;
        assert!(validate_config(&c).unwrap_err().0.contains("R > 1/16"));
    }

    #[test]
    fn text_round_trips() {
        let mut c = RunConfig::defaults_for("blowup-scan");
        c.set("M", "1,2,4").unwrap();
        c.set("seed", "7").unwrap();
        c.set("t", "0.1,0.30000000000000004").unwrap();
        let mut d = RunConfig::defaults_for("blowup-scan");
        d.apply_file(&c.to_text()).unwrap();
        assert_eq!(c, d);
        assert!(d.apply_file("K 1").is_err());
        assert!(d.apply_file("bogus = 1").is_err());
        assert!(RunConfig::defaults_for("sample").apply_file("experiment = vt-scan").is_err());
    }
}
