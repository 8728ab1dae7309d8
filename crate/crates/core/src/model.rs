//! System-under-test model, variable-strength configuration, and the test
//! case / test suite value types every other module works on.
//!
//! Parameters are indexed from 0 and parameter `i` takes values
//! `0..levels[i]`. Models are written in exponent notation, e.g.
//! `"4^3 5^3 6^2"`, and configurations as `"t=2; sub=0,1,2:3"`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Parameter level counts of the system under test.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SutModel {
    levels: Vec<usize>,
}

impl SutModel {
    pub fn new(levels: Vec<usize>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidArgument("model needs at least one parameter".into()));
        }
        if let Some(i) = levels.iter().position(|&v| v == 0) {
            return Err(Error::InvalidArgument(format!(
                "parameter {i} has zero levels"
            )));
        }
        Ok(Self { levels })
    }

    /// Uniform model with `k` parameters of `v` levels each.
    pub fn uniform(v: usize, k: usize) -> Result<Self> {
        Self::new(vec![v; k])
    }

    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    /// Number of parameters (k).
    pub fn num_params(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, param: usize) -> usize {
        self.levels[param]
    }

    /// Number of distinct test cases (product of all level counts), saturating.
    pub fn exhaustive_size(&self) -> usize {
        self.levels
            .iter()
            .fold(1usize, |acc, &v| acc.saturating_mul(v))
    }

    pub fn is_valid_case(&self, case: &TestCase) -> bool {
        case.values.len() == self.levels.len()
            && case.values.iter().zip(&self.levels).all(|(&x, &v)| x < v)
    }
}

/// Parses whitespace-separated `<v>^<count>` or bare `<v>` terms.
pub fn parse_model(spec: &str) -> Result<SutModel> {
    let mut levels = Vec::new();
    for term in spec.split_whitespace() {
        let (base, count) = match term.split_once('^') {
            Some((b, c)) => (b, c),
            None => (term, "1"),
        };
        let v: usize = base
            .parse()
            .map_err(|_| Error::parse(term, "level count is not a non-negative integer"))?;
        let count: usize = count
            .parse()
            .map_err(|_| Error::parse(term, "exponent is not a non-negative integer"))?;
        if v < 1 {
            return Err(Error::parse(term, "level count must be at least 1"));
        }
        if count < 1 {
            return Err(Error::parse(term, "exponent must be at least 1"));
        }
        levels.extend(std::iter::repeat(v).take(count));
    }
    if levels.is_empty() {
        return Err(Error::parse(spec, "empty model"));
    }
    Ok(SutModel { levels })
}

/// Exponent notation with runs of equal levels grouped, e.g. `4^3 5^3 6^2`.
pub fn render_model(model: &SutModel) -> String {
    let mut terms = Vec::new();
    let mut iter = model.levels.iter().peekable();
    while let Some(&v) = iter.next() {
        let mut count = 1;
        while iter.peek() == Some(&&v) {
            iter.next();
            count += 1;
        }
        if count == 1 {
            terms.push(v.to_string());
        } else {
            terms.push(format!("{v}^{count}"));
        }
    }
    terms.join(" ")
}

impl FromStr for SutModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_model(s)
    }
}

impl fmt::Display for SutModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_model(self))
    }
}

/// A parameter subset that must be covered at its own strength.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SubConfig {
    /// Sorted ascending. Duplicates are kept so validation can reject them.
    pub params: Vec<usize>,
    pub strength: usize,
}

impl SubConfig {
    pub fn new(mut params: Vec<usize>, strength: usize) -> Self {
        params.sort_unstable();
        Self { params, strength }
    }
}

/// Main interaction strength plus optional higher-strength sub-configurations.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VscaConfig {
    pub strength: usize,
    pub subs: Vec<SubConfig>,
}

impl VscaConfig {
    /// Uniform-strength config with no sub-configurations.
    pub fn uniform(strength: usize) -> Self {
        Self {
            strength,
            subs: Vec::new(),
        }
    }

    pub fn with_sub(mut self, params: Vec<usize>, strength: usize) -> Self {
        self.subs.push(SubConfig::new(params, strength));
        self
    }
}

/// Parses a single sub-configuration, `"1,2,3:2"`.
pub fn parse_sub(text: &str) -> Result<SubConfig> {
    let text = text.trim();
    let (idx, strength) = text
        .rsplit_once(':')
        .ok_or_else(|| Error::parse(text, "expected `<i,j,...>:<strength>`"))?;
    let strength: usize = strength
        .trim()
        .parse()
        .map_err(|_| Error::parse(text, "strength is not an integer"))?;
    let params = idx
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| Error::parse(text, format!("bad parameter index `{}`", p.trim())))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SubConfig::new(params, strength))
}

/// Parses `"t=<int>; sub=<i,j,k>:<strength>; ..."`.
pub fn parse_config(text: &str) -> Result<VscaConfig> {
    let mut strength = None;
    let mut subs = Vec::new();
    for part in text.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| Error::parse(part, "expected `key=value`"))?;
        match key.trim() {
            "t" => {
                if strength.is_some() {
                    return Err(Error::parse(part, "main strength given twice"));
                }
                strength = Some(
                    value
                        .trim()
                        .parse::<usize>()
                        .map_err(|_| Error::parse(part, "strength is not an integer"))?,
                );
            }
            "sub" => subs.push(parse_sub(value)?),
            other => return Err(Error::parse(part, format!("unknown key `{other}`"))),
        }
    }
    let strength = strength.ok_or_else(|| Error::parse(text, "missing `t=<strength>`"))?;
    Ok(VscaConfig { strength, subs })
}

pub fn render_config(config: &VscaConfig) -> String {
    let mut out = format!("t={}", config.strength);
    for sub in &config.subs {
        let idx: Vec<String> = sub.params.iter().map(|p| p.to_string()).collect();
        out.push_str(&format!("; sub={}:{}", idx.join(","), sub.strength));
    }
    out
}

impl FromStr for VscaConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_config(s)
    }
}

impl fmt::Display for VscaConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_config(self))
    }
}

/// Non-fatal findings from [`validate_config`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConfigWarning {
    /// The sub-configuration's strength does not exceed the main strength,
    /// so its tuples are already required by the main level.
    RedundantSub { index: usize, strength: usize },
}

impl fmt::Display for ConfigWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigWarning::RedundantSub { index, strength } => write!(
                f,
                "sub-configuration {index} has strength {strength}, not above the main strength; its coverage is implied"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidatedConfig {
    pub config: VscaConfig,
    pub warnings: Vec<ConfigWarning>,
}

pub fn validate_config(model: &SutModel, config: VscaConfig) -> Result<ValidatedConfig> {
    let k = model.num_params();
    let t = config.strength;
    if t < 1 || t > k {
        return Err(Error::InvalidConfig(format!(
            "main strength {t} outside 1..={k}"
        )));
    }
    let mut warnings = Vec::new();
    for (index, sub) in config.subs.iter().enumerate() {
        let n = sub.params.len();
        if sub.strength < 1 || sub.strength > n || n > k {
            return Err(Error::InvalidConfig(format!(
                "sub-configuration {index}: strength {} with {n} parameters (k = {k})",
                sub.strength
            )));
        }
        if let Some(&p) = sub.params.iter().find(|&&p| p >= k) {
            return Err(Error::InvalidConfig(format!(
                "sub-configuration {index}: parameter index {p} out of range 0..{k}"
            )));
        }
        if let Some(w) = sub.params.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidConfig(format!(
                "sub-configuration {index}: duplicate parameter index {}",
                w[0]
            )));
        }
        if sub.strength <= t {
            let warning = ConfigWarning::RedundantSub {
                index,
                strength: sub.strength,
            };
            log::warn!("{warning}");
            warnings.push(warning);
        }
    }
    Ok(ValidatedConfig { config, warnings })
}

/// One row of the covering array: a value index per parameter.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TestCase {
    pub values: Vec<usize>,
}

impl TestCase {
    pub fn new(values: Vec<usize>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl From<Vec<usize>> for TestCase {
    fn from(values: Vec<usize>) -> Self {
        Self { values }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestSuite {
    pub model: SutModel,
    pub config: VscaConfig,
    pub cases: Vec<TestCase>,
}

impl TestSuite {
    pub fn new(model: SutModel, config: VscaConfig) -> Self {
        Self {
            model,
            config,
            cases: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }
}
