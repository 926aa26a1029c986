//! Experiment configuration: a flat key=value document with dotted
//! sections, chosen so diffs stay one line per change.
//!
//! Grammar: one `key = value` per line, `#` starts a comment, blank
//! lines are ignored. Lists are comma separated. Unknown keys are
//! rejected, and validation reports every violation in one pass rather
//! than stopping at the first.
//!
//! `emit` writes the fully resolved document (defaults included) with
//! keys sorted, which makes it canonical: the run id is a content hash
//! of that text, so identical settings always collide to the same id
//! and any edit, including the seed, changes it.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("invalid config:\n{}", violations.join("\n"))]
    Invalid { violations: Vec<String> },
    #[error("sweep grid has {got} cells, cap is {cap}")]
    SweepTooLarge { got: u64, cap: u64 },
    #[error("sweep has no axes")]
    EmptySweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Exact,
    Sample,
    Ledger,
    Tailsum,
    Profile,
    Fit,
}

impl TaskKind {
    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Exact => "exact",
            TaskKind::Sample => "sample",
            TaskKind::Ledger => "ledger",
            TaskKind::Tailsum => "tailsum",
            TaskKind::Profile => "profile",
            TaskKind::Fit => "fit",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "exact" => TaskKind::Exact,
            "sample" => TaskKind::Sample,
            "ledger" => TaskKind::Ledger,
            "tailsum" => TaskKind::Tailsum,
            "profile" => TaskKind::Profile,
            "fit" => TaskKind::Fit,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProposalKind {
    UnitStep,
    Geometric,
}

/// Fully resolved experiment description. Task-specific fields stay
/// `None` unless the document sets them; validation enforces presence
/// for the task that needs each one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task: TaskKind,
    pub alpha: f64,
    pub beta: f64,
    pub p: f64,
    pub half_width: u64,
    pub omega: i64,
    pub seed: u64,
    pub burn_in: u64,
    pub sweeps: Option<u64>,
    pub thinning: u64,
    pub proposal: ProposalKind,
    pub proposal_q: f64,
    pub kmax: Option<u32>,
    pub dump: bool,
    pub ledger_t: Option<i64>,
    pub ledger_n: Option<u64>,
    pub tailsum_sizes: Option<Vec<u64>>,
    pub profile_sizes: Option<Vec<u64>>,
    pub fit_xs: Option<Vec<f64>>,
    pub fit_ys: Option<Vec<f64>>,
    pub out_dir: String,
    pub eps: f64,
    pub budget: u64,
}

const KNOWN_KEYS: &[&str] = &[
    "task",
    "model.alpha",
    "model.beta",
    "model.p",
    "geometry.n",
    "geometry.omega",
    "run.seed",
    "run.burn_in",
    "run.sweeps",
    "run.thinning",
    "run.proposal",
    "run.proposal_q",
    "exact.kmax",
    "exact.dump",
    "ledger.t",
    "ledger.n",
    "tailsum.sizes",
    "profile.sizes",
    "fit.xs",
    "fit.ys",
    "output.dir",
    "compute.eps",
    "compute.budget",
];

/// Parses a document whose `task` key names the task.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    parse_config_with_task(text, None)
}

/// Parses a document, with the task optionally imposed from outside
/// (the CLI subcommand). A conflicting `task` key is a violation.
pub fn parse_config_with_task(
    text: &str,
    forced: Option<TaskKind>,
) -> Result<ExperimentConfig, ConfigError> {
    let mut violations = Vec::new();
    let raw = collect_pairs(text, &mut violations);

    let get = |key: &str| raw.get(key).map(|(_, v)| v.clone());

    let task = match (get("task"), forced) {
        (Some(s), f) => match TaskKind::from_name(&s) {
            Some(t) => {
                if let Some(forced_t) = f {
                    if forced_t != t {
                        violations.push(format!(
                            "task: document says '{}' but the subcommand is '{}'",
                            t.name(),
                            forced_t.name()
                        ));
                    }
                }
                Some(t)
            }
            None => {
                violations.push(format!(
                    "task: unknown task '{s}' (expected one of exact, sample, ledger, tailsum, profile, fit)"
                ));
                f
            }
        },
        (None, Some(t)) => Some(t),
        (None, None) => {
            violations.push("task: missing (set it or use a subcommand)".to_string());
            None
        }
    };

    let mut cfg = ExperimentConfig {
        task: task.unwrap_or(TaskKind::Exact),
        alpha: 2.5,
        beta: 1.0,
        p: 2.0,
        half_width: 2,
        omega: 0,
        seed: 0,
        burn_in: 1000,
        sweeps: None,
        thinning: 1,
        proposal: ProposalKind::UnitStep,
        proposal_q: 0.5,
        kmax: None,
        dump: false,
        ledger_t: None,
        ledger_n: None,
        tailsum_sizes: None,
        profile_sizes: None,
        fit_xs: None,
        fit_ys: None,
        out_dir: "runs".to_string(),
        eps: 1e-10,
        budget: 10_000_000,
    };

    macro_rules! set {
        ($key:expr, $parse:expr, $slot:expr) => {
            if let Some(v) = raw.get($key) {
                match $parse(&v.1) {
                    Ok(x) => $slot = x,
                    Err(msg) => violations.push(format!("{}: {msg} (got '{}')", $key, v.1)),
                }
            }
        };
    }

    set!("model.alpha", parse_f64, cfg.alpha);
    set!("model.beta", parse_f64, cfg.beta);
    set!("model.p", parse_f64, cfg.p);
    set!("geometry.n", parse_u64, cfg.half_width);
    set!("geometry.omega", parse_i64, cfg.omega);
    set!("run.seed", parse_u64, cfg.seed);
    set!("run.burn_in", parse_u64, cfg.burn_in);
    set!("run.thinning", parse_u64, cfg.thinning);
    set!("run.proposal_q", parse_f64, cfg.proposal_q);
    set!("exact.dump", parse_bool, cfg.dump);
    set!("output.dir", parse_string, cfg.out_dir);
    set!("compute.eps", parse_f64, cfg.eps);
    set!("compute.budget", parse_u64, cfg.budget);

    macro_rules! set_opt {
        ($key:expr, $parse:expr, $slot:expr) => {
            if let Some(v) = raw.get($key) {
                match $parse(&v.1) {
                    Ok(x) => $slot = Some(x),
                    Err(msg) => violations.push(format!("{}: {msg} (got '{}')", $key, v.1)),
                }
            }
        };
    }

    set_opt!("run.sweeps", parse_u64, cfg.sweeps);
    set_opt!("exact.kmax", parse_u32, cfg.kmax);
    set_opt!("ledger.t", parse_i64, cfg.ledger_t);
    set_opt!("ledger.n", parse_u64, cfg.ledger_n);
    set_opt!("tailsum.sizes", parse_u64_list, cfg.tailsum_sizes);
    set_opt!("profile.sizes", parse_u64_list, cfg.profile_sizes);
    set_opt!("fit.xs", parse_f64_list, cfg.fit_xs);
    set_opt!("fit.ys", parse_f64_list, cfg.fit_ys);

    if let Some(v) = raw.get("run.proposal") {
        match v.1.as_str() {
            "unit-step" => cfg.proposal = ProposalKind::UnitStep,
            "geometric" => cfg.proposal = ProposalKind::Geometric,
            other => violations.push(format!(
                "run.proposal: expected 'unit-step' or 'geometric' (got '{other}')"
            )),
        }
    }

    validate(&cfg, &mut violations);

    if violations.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError::Invalid { violations })
    }
}

fn collect_pairs(text: &str, violations: &mut Vec<String>) -> BTreeMap<String, (usize, String)> {
    let mut raw: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let stripped = match line.find('#') {
            Some(i) => &line[..i],
            None => line,
        }
        .trim();
        if stripped.is_empty() {
            continue;
        }
        let Some((key, value)) = stripped.split_once('=') else {
            violations.push(format!("line {lineno}: expected 'key = value'"));
            continue;
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if !KNOWN_KEYS.contains(&key.as_str()) && !key.starts_with("sweep.") {
            violations.push(format!("line {lineno}: unknown key '{key}'"));
            continue;
        }
        if key.starts_with("sweep.") {
            // Sweep axes are handled by parse_sweep; here they only
            // need to name a real key.
            let target = &key["sweep.".len()..];
            if !KNOWN_KEYS.contains(&target) {
                violations.push(format!("line {lineno}: unknown key '{key}'"));
            }
            continue;
        }
        if raw.insert(key.clone(), (lineno, value)).is_some() {
            violations.push(format!("line {lineno}: duplicate key '{key}'"));
        }
    }
    raw
}

fn validate(cfg: &ExperimentConfig, violations: &mut Vec<String>) {
    if !(cfg.alpha > 1.0) || !cfg.alpha.is_finite() {
        violations.push(format!(
            "model.alpha: must be finite and > 1 (got {})",
            cfg.alpha
        ));
    }
    if !(cfg.beta > 0.0) || !cfg.beta.is_finite() {
        violations.push(format!(
            "model.beta: must be finite and > 0 (got {})",
            cfg.beta
        ));
    }
    if !(1.0..=2.0).contains(&cfg.p) {
        violations.push(format!("model.p: must lie in [1, 2] (got {})", cfg.p));
    }
    if cfg.half_width == 0 {
        violations.push("geometry.n: must be >= 1".to_string());
    }
    if cfg.thinning == 0 {
        violations.push("run.thinning: must be >= 1".to_string());
    }
    if !(cfg.proposal_q > 0.0 && cfg.proposal_q < 1.0) {
        violations.push(format!(
            "run.proposal_q: must lie in (0, 1) (got {})",
            cfg.proposal_q
        ));
    }
    if !(cfg.eps > 0.0) || !cfg.eps.is_finite() {
        violations.push(format!(
            "compute.eps: must be finite and > 0 (got {})",
            cfg.eps
        ));
    }
    if cfg.budget == 0 {
        violations.push("compute.budget: must be >= 1".to_string());
    }
    if cfg.kmax == Some(0) {
        violations.push("exact.kmax: must be >= 1".to_string());
    }
    if cfg.sweeps == Some(0) {
        violations.push("run.sweeps: must be >= 1".to_string());
    }
    if cfg.ledger_n == Some(0) {
        violations.push("ledger.n: must be >= 1".to_string());
    }
    if let Some(n) = cfg.ledger_n {
        // The step box {|i| < n} must fit inside {-hw..hw}.
        if n > cfg.half_width + 1 {
            violations.push(format!(
                "ledger.n: step box of half-width {n} does not fit in geometry.n = {}",
                cfg.half_width
            ));
        }
    }
    for (key, sizes) in [
        ("tailsum.sizes", &cfg.tailsum_sizes),
        ("profile.sizes", &cfg.profile_sizes),
    ] {
        if let Some(s) = sizes {
            if s.is_empty() || s.contains(&0) || s.windows(2).any(|w| w[0] >= w[1]) {
                violations.push(format!(
                    "{key}: must be a strictly increasing list of positive sizes"
                ));
            }
        }
    }
    if let (Some(xs), Some(ys)) = (&cfg.fit_xs, &cfg.fit_ys) {
        if xs.len() != ys.len() {
            violations.push(format!(
                "fit.xs, fit.ys: lengths differ ({} vs {})",
                xs.len(),
                ys.len()
            ));
        }
    }

    let missing = |violations: &mut Vec<String>, key: &str| {
        violations.push(format!(
            "{key}: required for the {} task",
            cfg.task.name()
        ));
    };
    match cfg.task {
        TaskKind::Exact => {
            if cfg.kmax.is_none() {
                missing(violations, "exact.kmax");
            }
        }
        TaskKind::Sample => {
            if cfg.sweeps.is_none() {
                missing(violations, "run.sweeps");
            }
        }
        TaskKind::Ledger => {
            if cfg.kmax.is_none() {
                missing(violations, "exact.kmax");
            }
            if cfg.ledger_t.is_none() {
                missing(violations, "ledger.t");
            }
            if cfg.ledger_n.is_none() {
                missing(violations, "ledger.n");
            }
        }
        TaskKind::Tailsum => {
            if cfg.tailsum_sizes.is_none() {
                missing(violations, "tailsum.sizes");
            }
        }
        TaskKind::Profile => {
            if cfg.profile_sizes.is_none() {
                missing(violations, "profile.sizes");
            }
            if cfg.sweeps.is_none() {
                missing(violations, "run.sweeps");
            }
        }
        TaskKind::Fit => {
            if cfg.fit_xs.is_none() {
                missing(violations, "fit.xs");
            }
            if cfg.fit_ys.is_none() {
                missing(violations, "fit.ys");
            }
        }
    }
}

fn parse_f64(s: &str) -> Result<f64, String> {
    s.parse::<f64>().map_err(|_| "expected a number".to_string())
}

fn parse_u64(s: &str) -> Result<u64, String> {
    s.parse::<u64>()
        .map_err(|_| "expected a nonnegative integer".to_string())
}

fn parse_u32(s: &str) -> Result<u32, String> {
    s.parse::<u32>()
        .map_err(|_| "expected a nonnegative integer".to_string())
}

fn parse_i64(s: &str) -> Result<i64, String> {
    s.parse::<i64>().map_err(|_| "expected an integer".to_string())
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err("expected 'true' or 'false'".to_string()),
    }
}

fn parse_string(s: &str) -> Result<String, String> {
    if s.is_empty() {
        Err("expected a nonempty value".to_string())
    } else {
        Ok(s.to_string())
    }
}

fn split_list(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty())
}

fn parse_u64_list(s: &str) -> Result<Vec<u64>, String> {
    let out: Result<Vec<u64>, _> = split_list(s).map(parse_u64).collect();
    let out = out?;
    if out.is_empty() {
        return Err("expected a comma separated list".to_string());
    }
    Ok(out)
}

fn parse_f64_list(s: &str) -> Result<Vec<f64>, String> {
    let out: Result<Vec<f64>, _> = split_list(s).map(parse_f64).collect();
    let out = out?;
    if out.is_empty() {
        return Err("expected a comma separated list".to_string());
    }
    Ok(out)
}

impl ExperimentConfig {
    /// Canonical document: every field explicit, keys sorted, values in
    /// shortest round-trip form. Parsing it back reproduces `self`.
    pub fn emit(&self) -> String {
        let mut pairs: Vec<(String, String)> = vec![
            ("task".into(), self.task.name().into()),
            ("model.alpha".into(), self.alpha.to_string()),
            ("model.beta".into(), self.beta.to_string()),
            ("model.p".into(), self.p.to_string()),
            ("geometry.n".into(), self.half_width.to_string()),
            ("geometry.omega".into(), self.omega.to_string()),
            ("run.seed".into(), self.seed.to_string()),
            ("run.burn_in".into(), self.burn_in.to_string()),
            ("run.thinning".into(), self.thinning.to_string()),
            (
                "run.proposal".into(),
                match self.proposal {
                    ProposalKind::UnitStep => "unit-step".into(),
                    ProposalKind::Geometric => "geometric".to_string(),
                },
            ),
            ("run.proposal_q".into(), self.proposal_q.to_string()),
            ("exact.dump".into(), self.dump.to_string()),
            ("output.dir".into(), self.out_dir.clone()),
            ("compute.eps".into(), self.eps.to_string()),
            ("compute.budget".into(), self.budget.to_string()),
        ];
        let mut push_opt = |key: &str, v: Option<String>| {
            if let Some(v) = v {
                pairs.push((key.into(), v));
            }
        };
        push_opt("run.sweeps", self.sweeps.map(|v| v.to_string()));
        push_opt("exact.kmax", self.kmax.map(|v| v.to_string()));
        push_opt("ledger.t", self.ledger_t.map(|v| v.to_string()));
        push_opt("ledger.n", self.ledger_n.map(|v| v.to_string()));
        push_opt("tailsum.sizes", self.tailsum_sizes.as_ref().map(join_u64));
        push_opt("profile.sizes", self.profile_sizes.as_ref().map(join_u64));
        push_opt("fit.xs", self.fit_xs.as_ref().map(join_f64));
        push_opt("fit.ys", self.fit_ys.as_ref().map(join_f64));
        pairs.sort();
        let mut out = String::new();
        for (k, v) in pairs {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Deterministic run id: first 16 hex digits of the hash of the
    /// canonical document (which contains the seed).
    pub fn run_id(&self) -> String {
        let digest = Sha256::digest(self.emit().as_bytes());
        let mut id = String::with_capacity(16);
        for byte in &digest[..8] {
            let _ = write!(id, "{byte:02x}");
        }
        id
    }
}

fn join_u64(v: &Vec<u64>) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn join_f64(v: &Vec<f64>) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// A sweep: one base document plus axes taken from `sweep.<key>` lines.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axes: Vec<(String, Vec<String>)>,
    pub cells: Vec<ExperimentConfig>,
}

pub const SWEEP_CELL_CAP: u64 = 4096;

/// Expands `sweep.<key> = v1, v2, ...` lines into the Cartesian grid of
/// configs, substituting each axis value for the key in the base
/// document. An axis key set in the base too would be shadowed
/// silently, so that is rejected.
pub fn parse_sweep(
    text: &str,
    forced: Option<TaskKind>,
    cap: u64,
) -> Result<SweepSpec, ConfigError> {
    let mut violations = Vec::new();
    let mut axes: Vec<(String, Vec<String>)> = Vec::new();
    let mut base_lines: Vec<String> = Vec::new();

    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let stripped = match line.find('#') {
            Some(i) => &line[..i],
            None => line,
        }
        .trim();
        if stripped.is_empty() {
            continue;
        }
        let Some((key, value)) = stripped.split_once('=') else {
            base_lines.push(line.to_string());
            continue;
        };
        let key = key.trim();
        if let Some(target) = key.strip_prefix("sweep.") {
            if !KNOWN_KEYS.contains(&target) {
                violations.push(format!("line {lineno}: unknown key '{key}'"));
                continue;
            }
            let values: Vec<String> = split_list(value).map(str::to_string).collect();
            if values.is_empty() {
                violations.push(format!("line {lineno}: '{key}' lists no values"));
                continue;
            }
            if axes.iter().any(|(k, _)| k == target) {
                violations.push(format!("line {lineno}: duplicate axis '{key}'"));
                continue;
            }
            axes.push((target.to_string(), values));
        } else {
            if axes.iter().any(|(k, _)| k == key) {
                violations.push(format!(
                    "line {lineno}: '{key}' is both a base key and a sweep axis"
                ));
                continue;
            }
            base_lines.push(line.to_string());
        }
    }
    // The base-vs-axis clash can also appear with the axis line second.
    for (axis, _) in &axes {
        let clash = base_lines.iter().any(|l| {
            l.split_once('=')
                .map(|(k, _)| k.trim() == axis)
                .unwrap_or(false)
        });
        if clash {
            violations.push(format!(
                "sweep.{axis}: '{axis}' is both a base key and a sweep axis"
            ));
        }
    }
    if !violations.is_empty() {
        return Err(ConfigError::Invalid { violations });
    }
    if axes.is_empty() {
        return Err(ConfigError::EmptySweep);
    }

    let mut total: u64 = 1;
    for (_, vals) in &axes {
        total = total.saturating_mul(vals.len() as u64);
    }
    if total > cap {
        return Err(ConfigError::SweepTooLarge { got: total, cap });
    }

    let base_text = base_lines.join("\n");
    let mut cells = Vec::with_capacity(total as usize);
    let mut index = vec![0usize; axes.len()];
    loop {
        let mut text = base_text.clone();
        for (slot, (key, vals)) in index.iter().zip(&axes) {
            let _ = write!(text, "\n{key} = {}", vals[*slot]);
        }
        cells.push(parse_config_with_task(&text, forced)?);

        let mut carry = axes.len();
        while carry > 0 {
            index[carry - 1] += 1;
            if index[carry - 1] < axes[carry - 1].1.len() {
                break;
            }
            index[carry - 1] = 0;
            carry -= 1;
        }
        if carry == 0 {
            break;
        }
    }
    Ok(SweepSpec { axes, cells })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL_EXACT: &str = "task = exact\nexact.kmax = 3\n";

    #[test]
    fn minimal_document_fills_defaults() {
        let cfg = parse_config(MINIMAL_EXACT).unwrap();
        assert_eq!(cfg.task, TaskKind::Exact);
        assert_eq!(cfg.kmax, Some(3));
        assert_eq!(cfg.alpha, 2.5);
        assert_eq!(cfg.beta, 1.0);
        assert_eq!(cfg.p, 2.0);
        assert_eq!(cfg.eps, 1e-10);
        assert_eq!(cfg.proposal, ProposalKind::UnitStep);
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.out_dir, "runs");
        assert_eq!(cfg.budget, 10_000_000);
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let text = "# a comment\n\ntask = exact # trailing\n  exact.kmax = 2\n";
        assert!(parse_config(text).is_ok());
    }

    #[test]
    fn all_violations_reported_in_one_pass() {
        let text = "task = exact\nmodel.alpha = 0.5\nmodel.beta = -1\nmodel.p = 3\nbogus = 1\n";
        let err = parse_config(text).unwrap_err();
        let ConfigError::Invalid { violations } = err else {
            panic!("wrong error kind");
        };
        // alpha, beta, p, unknown key, missing kmax.
        assert_eq!(violations.len(), 5, "{violations:?}");
        assert!(violations.iter().any(|v| v.contains("> 1")));
        assert!(violations.iter().any(|v| v.contains("bogus")));
        assert!(violations.iter().any(|v| v.contains("exact.kmax")));
    }

    #[test]
    fn unknown_and_duplicate_and_malformed_lines() {
        let text = "task = exact\nexact.kmax = 2\nexact.kmax = 3\nnot a pair\nmodle.alpha = 2\n";
        let ConfigError::Invalid { violations } = parse_config(text).unwrap_err() else {
            panic!()
        };
        assert!(violations.iter().any(|v| v.contains("duplicate")));
        assert!(violations.iter().any(|v| v.contains("expected 'key = value'")));
        assert!(violations.iter().any(|v| v.contains("modle.alpha")));
    }

    #[test]
    fn task_specific_requirements() {
        for (task, needed) in [
            ("sample", "run.sweeps"),
            ("ledger", "ledger.t"),
            ("tailsum", "tailsum.sizes"),
            ("profile", "profile.sizes"),
            ("fit", "fit.xs"),
        ] {
            let text = format!("task = {task}\n");
            let ConfigError::Invalid { violations } = parse_config(&text).unwrap_err() else {
                panic!()
            };
            assert!(
                violations.iter().any(|v| v.contains(needed)),
                "{task}: {violations:?}"
            );
        }
    }

    #[test]
    fn forced_task_fills_and_conflicts() {
        let cfg = parse_config_with_task("exact.kmax = 2\n", Some(TaskKind::Exact)).unwrap();
        assert_eq!(cfg.task, TaskKind::Exact);
        let err =
            parse_config_with_task("task = sample\nrun.sweeps = 10\n", Some(TaskKind::Exact))
                .unwrap_err();
        let ConfigError::Invalid { violations } = err else {
            panic!()
        };
        assert!(violations.iter().any(|v| v.contains("subcommand")));
    }

    #[test]
    fn step_box_must_fit_window() {
        let text = "task = ledger\nexact.kmax = 2\nledger.t = 1\nledger.n = 4\ngeometry.n = 2\n";
        let ConfigError::Invalid { violations } = parse_config(text).unwrap_err() else {
            panic!()
        };
        assert!(violations.iter().any(|v| v.contains("does not fit")));
        // n = hw + 1 is snug.
        let ok = "task = ledger\nexact.kmax = 2\nledger.t = 1\nledger.n = 3\ngeometry.n = 2\n";
        assert!(parse_config(ok).is_ok());
    }

    #[test]
    fn lists_parse_and_validate() {
        let cfg = parse_config("task = tailsum\ntailsum.sizes = 16, 32, 64\n").unwrap();
        assert_eq!(cfg.tailsum_sizes, Some(vec![16, 32, 64]));
        let bad = parse_config("task = tailsum\ntailsum.sizes = 32, 16\n").unwrap_err();
        let ConfigError::Invalid { violations } = bad else { panic!() };
        assert!(violations.iter().any(|v| v.contains("strictly increasing")));
        let lens =
            parse_config("task = fit\nfit.xs = 1,2,3,4\nfit.ys = 1,2,3\n").unwrap_err();
        let ConfigError::Invalid { violations } = lens else { panic!() };
        assert!(violations.iter().any(|v| v.contains("lengths differ")));
    }

    #[test]
    fn emit_reparse_round_trip() {
        let text = "task = ledger\nexact.kmax = 4\nledger.t = 2\nledger.n = 2\n\
                    model.alpha = 2.25\nmodel.p = 1.5\nrun.seed = 99\n\
                    run.proposal = geometric\nrun.proposal_q = 0.37\n";
        let cfg = parse_config(text).unwrap();
        let emitted = cfg.emit();
        let back = parse_config(&emitted).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(emitted, back.emit());
    }

    #[test]
    fn round_trip_survives_awkward_floats() {
        let text = "task = fit\nfit.xs = 0.1, 16, 1e-3, 1234.5678\nfit.ys = 1,2,3,4\n\
                    model.beta = 0.30000000000000004\n";
        let cfg = parse_config(text).unwrap();
        assert_eq!(parse_config(&cfg.emit()).unwrap(), cfg);
    }

    #[test]
    fn run_id_depends_on_seed_and_params() {
        let a = parse_config(MINIMAL_EXACT).unwrap();
        let mut b = a.clone();
        b.seed = 1;
        let mut c = a.clone();
        c.alpha = 3.0;
        assert_eq!(a.run_id().len(), 16);
        assert_eq!(a.run_id(), parse_config(MINIMAL_EXACT).unwrap().run_id());
        assert_ne!(a.run_id(), b.run_id());
        assert_ne!(a.run_id(), c.run_id());
        assert!(a.run_id().chars().all(|c| c.is_ascii_hexdigit()));
    }

    #[test]
    fn sweep_expands_cartesian_grid() {
        let text = "task = exact\nexact.kmax = 2\nsweep.model.alpha = 2.5, 3.5\n\
                    sweep.model.beta = 0.5, 1\n";
        let spec = parse_sweep(text, None, SWEEP_CELL_CAP).unwrap();
        assert_eq!(spec.axes.len(), 2);
        assert_eq!(spec.cells.len(), 4);
        let pairs: Vec<(f64, f64)> = spec.cells.iter().map(|c| (c.alpha, c.beta)).collect();
        assert_eq!(
            pairs,
            vec![(2.5, 0.5), (2.5, 1.0), (3.5, 0.5), (3.5, 1.0)]
        );
        // Ids all distinct.
        let ids: std::collections::BTreeSet<String> =
            spec.cells.iter().map(|c| c.run_id()).collect();
        assert_eq!(ids.len(), 4);
    }

    #[test]
    fn sweep_rejects_clashes_and_caps() {
        let clash = "task = exact\nexact.kmax = 2\nmodel.alpha = 2.5\nsweep.model.alpha = 3, 4\n";
        assert!(matches!(
            parse_sweep(clash, None, SWEEP_CELL_CAP),
            Err(ConfigError::Invalid { .. })
        ));
        let no_axis = "task = exact\nexact.kmax = 2\n";
        assert!(matches!(
            parse_sweep(no_axis, None, SWEEP_CELL_CAP),
            Err(ConfigError::EmptySweep)
        ));
        let big = "task = exact\nexact.kmax = 2\nsweep.model.alpha = 2.5, 3, 3.5\n";
        assert!(matches!(
            parse_sweep(big, None, 2),
            Err(ConfigError::SweepTooLarge { got: 3, cap: 2 })
        ));
    }

    #[test]
    fn sweep_cell_inherits_validation() {
        let text = "task = exact\nexact.kmax = 2\nsweep.model.alpha = 2.5, 0.5\n";
        assert!(matches!(
            parse_sweep(text, None, SWEEP_CELL_CAP),
            Err(ConfigError::Invalid { .. })
        ));
    }
}
