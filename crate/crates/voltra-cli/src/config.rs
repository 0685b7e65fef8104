//! Strict sectioned key-value run configuration.
//!
//! Format: `[section]` headers, `key = value` lines, `#` comment lines, blank
//! lines. Every section and key must be consumed by the command being run;
//! anything left over is rejected with a diagnostic naming the offender and
//! its line. All numeric fields are validated against the library's
//! preconditions here, before any work is dispatched.

use std::cell::Cell;

use anyhow::{anyhow, bail, Context, Result};
use voltra::cgf::hawkes_implied_curve;
use voltra::{AfiModel, AfvModel, ForwardCurve, JumpLaw, JumpSpec, Kernel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Resolvent,
    Riccati,
    Cgf,
    SimulateAfv,
    SimulateAfi,
    HfLimit,
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Resolvent => "resolvent",
            Command::Riccati => "riccati",
            Command::Cgf => "cgf",
            Command::SimulateAfv => "simulate-afv",
            Command::SimulateAfi => "simulate-afi",
            Command::HfLimit => "hf-limit",
            Command::Validate => "validate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Thinning,
    Grid,
}

#[derive(Debug, Clone)]
pub enum ModelCfg {
    Afv(AfvModel),
    Afi {
        model: AfiModel,
        mu: Option<f64>,
        scheme: Scheme,
    },
}

#[derive(Debug, Clone)]
pub struct Numerics {
    pub dt: f64,
    pub horizons: Vec<f64>,
    pub us: Vec<f64>,
    pub seed: u64,
    pub n_paths: usize,
}

#[derive(Debug)]
pub struct RunConfig {
    pub command: Command,
    pub kernel: Option<Kernel>,
    pub curve: Option<ForwardCurve>,
    pub jumps: Option<JumpSpec>,
    pub model: Option<ModelCfg>,
    pub numerics: Numerics,
    /// `resolvent` command only.
    pub gamma: Option<f64>,
    /// `hf-limit` command only.
    pub eps: Vec<f64>,
    /// `validate` command only.
    pub fast_audit: bool,
}

// ---------------------------------------------------------------------------
// raw document

struct Entry {
    key: String,
    value: String,
    line: usize,
    used: Cell<bool>,
}

struct Section {
    name: String,
    line: usize,
    entries: Vec<Entry>,
    used: Cell<bool>,
}

struct Document {
    sections: Vec<Section>,
}

impl Document {
    fn parse(text: &str) -> Result<Document> {
        let mut sections: Vec<Section> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') {
                continue;
            }
            if let Some(name) = s.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| anyhow!("line {line}: malformed section header '{s}'"))?
                    .trim();
                if name.is_empty() {
                    bail!("line {line}: empty section name");
                }
                if sections.iter().any(|sec| sec.name == name) {
                    bail!("line {line}: duplicate section [{name}]");
                }
                sections.push(Section {
                    name: name.to_string(),
                    line,
                    entries: Vec::new(),
                    used: Cell::new(false),
                });
                continue;
            }
            let (key, value) = s
                .split_once('=')
                .ok_or_else(|| anyhow!("line {line}: expected `key = value` or `[section]`, got '{s}'"))?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                bail!("line {line}: empty key");
            }
            let section = sections
                .last_mut()
                .ok_or_else(|| anyhow!("line {line}: key '{key}' appears before any [section]"))?;
            if section.entries.iter().any(|e| e.key == key) {
                bail!("line {line}: duplicate key '{key}' in [{}]", section.name);
            }
            section.entries.push(Entry {
                key: key.to_string(),
                value: value.to_string(),
                line,
                used: Cell::new(false),
            });
        }
        Ok(Document { sections })
    }

    fn section(&self, name: &str) -> Option<&Section> {
        let s = self.sections.iter().find(|s| s.name == name)?;
        s.used.set(true);
        Some(s)
    }

    /// Strictness backstop: everything present must have been consumed.
    fn check_consumed(&self, command: Command) -> Result<()> {
        for s in &self.sections {
            if !s.used.get() {
                bail!(
                    "line {}: section [{}] is not used by the `{}` command",
                    s.line,
                    s.name,
                    command.name()
                );
            }
            for e in &s.entries {
                if !e.used.get() {
                    bail!("line {}: unknown key '{}' in [{}]", e.line, e.key, s.name);
                }
            }
        }
        Ok(())
    }
}

impl Section {
    fn get(&self, key: &str) -> Option<&Entry> {
        let e = self.entries.iter().find(|e| e.key == key)?;
        e.used.set(true);
        Some(e)
    }

    fn require(&self, key: &str) -> Result<&Entry> {
        self.get(key)
            .ok_or_else(|| anyhow!("[{}] (line {}): missing required key '{key}'", self.name, self.line))
    }

    fn f64(&self, key: &str) -> Result<Option<f64>> {
        self.get(key).map(|e| e.parse_f64(&self.name)).transpose()
    }

    fn require_f64(&self, key: &str) -> Result<f64> {
        self.require(key)?.parse_f64(&self.name)
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.f64(key)?.unwrap_or(default))
    }

    fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.get(key).map(|e| e.parse_f64_list(&self.name)).transpose()
    }

    fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        match self.get(key) {
            None => Ok(default),
            Some(e) => e
                .value
                .parse::<u64>()
                .map_err(|_| e.type_error(&self.name, "a non-negative integer")),
        }
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.get(key) {
            None => Ok(default),
            Some(e) => e
                .value
                .parse::<usize>()
                .map_err(|_| e.type_error(&self.name, "a non-negative integer")),
        }
    }

    fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(default),
            Some(e) => match e.value.as_str() {
                "true" => Ok(true),
                "false" => Ok(false),
                _ => Err(e.type_error(&self.name, "true or false")),
            },
        }
    }
}

impl Entry {
    fn type_error(&self, section: &str, expected: &str) -> anyhow::Error {
        anyhow!(
            "[{section}] {} (line {}): expected {expected}, got '{}'",
            self.key,
            self.line,
            self.value
        )
    }

    fn parse_f64(&self, section: &str) -> Result<f64> {
        self.value
            .parse::<f64>()
            .map_err(|_| self.type_error(section, "a number"))
    }

    fn parse_f64_list(&self, section: &str) -> Result<Vec<f64>> {
        self.value
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| self.type_error(section, "a comma-separated list of numbers"))
    }
}

// ---------------------------------------------------------------------------
// typed construction

fn build_kernel(doc: &Document) -> Result<Option<Kernel>> {
    let Some(s) = doc.section("kernel") else {
        return Ok(None);
    };
    let ty = s.require("type")?;
    let ctx = |e: voltra::Error| anyhow!("[kernel] (line {}): {e}", ty.line);
    let kernel = match ty.value.as_str() {
        "constant" => Kernel::constant(s.require_f64("zeta")?).map_err(ctx)?,
        "exponential" => {
            Kernel::exponential(s.require_f64("zeta")?, s.require_f64("lambda")?).map_err(ctx)?
        }
        "power_law" => {
            Kernel::power_law(s.require_f64("zeta")?, s.require_f64("alpha")?).map_err(ctx)?
        }
        "mittag_leffler" => Kernel::mittag_leffler(
            s.require_f64("zeta")?,
            s.require_f64("alpha")?,
            s.require_f64("lambda")?,
        )
        .map_err(ctx)?,
        _ => {
            return Err(ty.type_error(
                "kernel",
                "one of constant | exponential | power_law | mittag_leffler",
            ))
        }
    };
    Ok(Some(kernel))
}

fn build_curve(doc: &Document) -> Result<Option<ForwardCurve>> {
    let Some(s) = doc.section("curve") else {
        return Ok(None);
    };
    let ty = s.require("type")?;
    let ctx = |e: voltra::Error| anyhow!("[curve] (line {}): {e}", ty.line);
    let curve = match ty.value.as_str() {
        "flat" => ForwardCurve::flat(s.require_f64("value")?).map_err(ctx)?,
        "heston" => ForwardCurve::heston_implied(
            s.require_f64("v0")?,
            s.require_f64("theta")?,
            s.require_f64("mean_reversion")?,
        )
        .map_err(ctx)?,
        "rough_heston" => ForwardCurve::rough_heston_implied(
            s.require_f64("v0")?,
            s.require_f64("theta")?,
            s.require_f64("mean_reversion")?,
            s.require_f64("alpha")?,
        )
        .map_err(ctx)?,
        "tabulated" => {
            let ts = s
                .require("times")?
                .parse_f64_list("curve")?;
            let vals = s
                .require("values")?
                .parse_f64_list("curve")?;
            ForwardCurve::tabulated(ts, vals).map_err(ctx)?
        }
        _ => {
            return Err(ty.type_error(
                "curve",
                "one of flat | heston | rough_heston | tabulated",
            ))
        }
    };
    Ok(Some(curve))
}

fn parse_law(e: &Entry) -> Result<JumpLaw> {
    let ctx = |err: voltra::Error| anyhow!("[jumps] {} (line {}): {err}", e.key, e.line);
    let spec = e.value.trim();
    let (kind, rest) = spec
        .split_once(char::is_whitespace)
        .unwrap_or((spec, ""));
    let rest = rest.trim();
    let scalar = |what: &str| -> Result<f64> {
        rest.parse::<f64>()
            .map_err(|_| e.type_error("jumps", what))
    };
    match kind {
        "dirac" => JumpLaw::dirac(scalar("`dirac <size>`")?).map_err(ctx),
        "exponential" => JumpLaw::exponential(scalar("`exponential <mean>`")?).map_err(ctx),
        "discrete" => {
            let (pts, wts) = rest
                .split_once('@')
                .ok_or_else(|| e.type_error("jumps", "`discrete x1,x2,... @ w1,w2,...`"))?;
            let parse = |part: &str| -> Result<Vec<f64>> {
                part.split(',')
                    .map(|p| p.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| e.type_error("jumps", "`discrete x1,x2,... @ w1,w2,...`"))
            };
            JumpLaw::discrete(parse(pts)?, parse(wts)?).map_err(ctx)
        }
        _ => Err(e.type_error("jumps", "a law: dirac | exponential | discrete")),
    }
}

fn build_jumps(doc: &Document) -> Result<Option<JumpSpec>> {
    let Some(s) = doc.section("jumps") else {
        return Ok(None);
    };
    let plus = parse_law(s.require("law_plus")?)?;
    let minus = parse_law(s.require("law_minus")?)?;
    let gp = s.require_f64("gamma_plus")?;
    let gm = s.require_f64("gamma_minus")?;
    let spec = JumpSpec::new(plus, minus, gp, gm)
        .map_err(|e| anyhow!("[jumps] (line {}): {e}", s.line))?;
    Ok(Some(spec))
}

fn build_numerics(doc: &Document, command: Command) -> Result<Numerics> {
    let (dt, horizons, us, seed, n_paths);
    match doc.section("numerics") {
        None => {
            dt = 1e-3;
            horizons = vec![1.0];
            us = Vec::new();
            seed = 42;
            n_paths = 10_000;
        }
        Some(s) => {
            dt = s.f64_or("dt", 1e-3)?;
            horizons = s.f64_list("horizon")?.unwrap_or_else(|| vec![1.0]);
            us = s.f64_list("u")?.unwrap_or_default();
            seed = s.u64_or("seed", 42)?;
            n_paths = s.usize_or("n_paths", 10_000)?;
        }
    }
    if !(dt > 0.0 && dt.is_finite()) {
        bail!("[numerics] dt: must be positive and finite, got {dt}");
    }
    if horizons.is_empty() {
        bail!("[numerics] horizon: list must not be empty");
    }
    for &h in &horizons {
        if !(h > 0.0 && h.is_finite()) {
            bail!("[numerics] horizon: must be positive and finite, got {h}");
        }
        let ratio = h / dt;
        if (ratio - ratio.round()).abs() > 1e-6 * ratio.round().max(1.0) {
            bail!("[numerics] horizon: {h} is not a whole multiple of dt = {dt}");
        }
    }
    if horizons.len() > 1 && command != Command::Cgf {
        bail!(
            "[numerics] horizon: `{}` takes a single horizon, got {} values",
            command.name(),
            horizons.len()
        );
    }
    for &u in &us {
        if !(0.0..=1.0).contains(&u) {
            bail!("[numerics] u: values must lie in [0,1], got {u}");
        }
    }
    let needs_u = matches!(
        command,
        Command::Riccati | Command::Cgf | Command::SimulateAfv | Command::SimulateAfi | Command::HfLimit
    );
    if needs_u && us.is_empty() {
        bail!("[numerics] u: required for `{}` (comma-separated list in [0,1])", command.name());
    }
    if command == Command::HfLimit && us.len() != 1 {
        bail!("[numerics] u: `hf-limit` sweeps a single u, got {} values", us.len());
    }
    if n_paths == 0 {
        bail!("[numerics] n_paths: must be at least 1");
    }
    Ok(Numerics {
        dt,
        horizons,
        us,
        seed,
        n_paths,
    })
}

fn build_model(
    doc: &Document,
    command: Command,
    kernel: &Option<Kernel>,
    curve: &Option<ForwardCurve>,
    jumps: &Option<JumpSpec>,
) -> Result<Option<ModelCfg>> {
    let Some(s) = doc.section("model") else {
        return Ok(None);
    };
    let kernel = kernel
        .clone()
        .ok_or_else(|| anyhow!("[model] (line {}): requires a [kernel] section", s.line))?;
    let ty = s.require("type")?;
    match ty.value.as_str() {
        "afv" => {
            let rho = s.require_f64("rho")?;
            let curve = curve.clone().ok_or_else(|| {
                anyhow!("[model] (line {}): type afv requires a [curve] section", s.line)
            })?;
            if jumps.is_some() {
                bail!("[model] (line {}): a [jumps] section has no effect for type afv", s.line);
            }
            let model = AfvModel::new(kernel, curve, rho)
                .map_err(|e| anyhow!("[model] (line {}): {e}", s.line))?;
            Ok(Some(ModelCfg::Afv(model)))
        }
        "afi" => {
            let jumps = jumps.clone().ok_or_else(|| {
                anyhow!("[model] (line {}): type afi requires a [jumps] section", s.line)
            })?;
            let mu = s.f64("mu")?;
            if let Some(mu) = mu {
                if !(mu > 0.0 && mu.is_finite()) {
                    bail!("[model] mu: must be positive and finite, got {mu}");
                }
            }
            let scheme = match s.get("scheme") {
                None => Scheme::Thinning,
                Some(e) => match e.value.as_str() {
                    "thinning" => Scheme::Thinning,
                    "grid" => Scheme::Grid,
                    _ => return Err(e.type_error("model", "thinning or grid")),
                },
            };
            let curve = match (curve.clone(), mu) {
                (Some(_), Some(_)) => bail!(
                    "[model] (line {}): give either a baseline `mu` or a [curve] section, not both",
                    s.line
                ),
                (Some(c), None) => c,
                (None, Some(mu)) => hawkes_implied_curve(mu, &kernel, jumps.gamma_hat())
                    .map_err(|e| anyhow!("[model] (line {}): {e}", s.line))?,
                (None, None) => bail!(
                    "[model] (line {}): type afi needs either a [curve] section or a baseline `mu`",
                    s.line
                ),
            };
            if command == Command::SimulateAfi && scheme == Scheme::Thinning && mu.is_none() {
                bail!(
                    "[model] (line {}): the thinning scheme needs the baseline `mu` \
                     (a hand-written [curve] has no event representation); set scheme = grid",
                    s.line
                );
            }
            let model = AfiModel::new(kernel, curve, jumps)
                .map_err(|e| anyhow!("[model] (line {}): {e}", s.line))?;
            Ok(Some(ModelCfg::Afi { model, mu, scheme }))
        }
        _ => Err(ty.type_error("model", "afv or afi")),
    }
}

pub fn parse_config(text: &str, command: Command) -> Result<RunConfig> {
    let doc = Document::parse(text)?;

    let mut kernel = None;
    let mut numerics = Numerics {
        dt: 1e-3,
        horizons: vec![1.0],
        us: Vec::new(),
        seed: 42,
        n_paths: 10_000,
    };
    if command != Command::Validate {
        kernel = build_kernel(&doc)?;
        numerics = build_numerics(&doc, command)?;
    }

    // command-specific sections
    let mut gamma = None;
    let mut eps = Vec::new();
    let mut fast_audit = false;
    let mut curve = None;
    let mut jumps = None;
    let mut model = None;

    match command {
        Command::Resolvent => {
            let s = doc
                .section("resolvent")
                .ok_or_else(|| anyhow!("`resolvent` needs a [resolvent] section with `gamma`"))?;
            let g = s.require_f64("gamma")?;
            if !g.is_finite() {
                bail!("[resolvent] gamma: must be finite, got {g}");
            }
            gamma = Some(g);
            if kernel.is_none() {
                bail!("`resolvent` needs a [kernel] section");
            }
        }
        Command::Riccati | Command::Cgf | Command::SimulateAfv | Command::SimulateAfi => {
            curve = build_curve(&doc)?;
            jumps = build_jumps(&doc)?;
            model = build_model(&doc, command, &kernel, &curve, &jumps)?;
            if model.is_none() {
                bail!("`{}` needs a [model] section", command.name());
            }
            match (command, model.as_ref().unwrap()) {
                (Command::SimulateAfv, ModelCfg::Afi { .. }) => {
                    bail!("`simulate-afv` needs model type afv")
                }
                (Command::SimulateAfi, ModelCfg::Afv(_)) => {
                    bail!("`simulate-afi` needs model type afi")
                }
                _ => {}
            }
        }
        Command::HfLimit => {
            curve = build_curve(&doc)?;
            jumps = build_jumps(&doc)?;
            if kernel.is_none() || curve.is_none() || jumps.is_none() {
                bail!("`hf-limit` needs [kernel], [curve] and [jumps] sections");
            }
            eps = match doc.section("hf") {
                None => vec![1e-1, 1e-2, 1e-3, 1e-4],
                Some(s) => s
                    .f64_list("eps")?
                    .unwrap_or_else(|| vec![1e-1, 1e-2, 1e-3, 1e-4]),
            };
            for &e in &eps {
                if !(e > 0.0 && e <= 1.0) {
                    bail!("[hf] eps: values must lie in (0,1], got {e}");
                }
            }
        }
        Command::Validate => {
            if let Some(s) = doc.section("validate") {
                fast_audit = s.bool_or("fast", false)?;
            }
        }
    }

    doc.check_consumed(command)?;
    Ok(RunConfig {
        command,
        kernel,
        curve,
        jumps,
        model,
        numerics,
        gamma,
        eps,
        fast_audit,
    })
}

/// Read and parse a config file, with the path in any diagnostic.
pub fn load(path: &std::path::Path, command: Command) -> Result<(String, RunConfig)> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let cfg = parse_config(&text, command)
        .with_context(|| format!("in config {}", path.display()))?;
    Ok((text, cfg))
}
