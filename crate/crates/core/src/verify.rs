//! Brute-force coverage oracle, run statistics, and the suite file format.
//!
//! The oracle enumerates the required tuple universe on its own (recursive
//! subset enumeration, odometer over values) and never touches
//! [`crate::tuples::TupleStore`], so it can catch bugs there.
//!
//! Suite files look like:
//!
//! ```text
//! # model: 3^5
//! # config: t=2
//! 0,0,0,0,0
//! 0,1,1,1,1
//! ```

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{parse_config, parse_model, render_config, render_model, TestCase, TestSuite, VscaConfig};
use crate::pso::RunResult;

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    pub required: usize,
    pub covered: usize,
    /// Uncovered `(parameter indices, values)` pairs, in enumeration order.
    pub missing: Vec<(Vec<usize>, Vec<usize>)>,
    pub coverage_pct: f64,
}

impl CoverageReport {
    pub fn is_complete(&self) -> bool {
        self.missing.is_empty()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "required: {}", self.required);
        let _ = writeln!(out, "covered: {}", self.covered);
        let _ = writeln!(out, "missing: {}", self.missing.len());
        let _ = writeln!(out, "coverage: {:.2}%", self.coverage_pct);
        for (params, values) in &self.missing {
            let _ = writeln!(out, "  missing {} = {}", join(params, ","), join(values, "-"));
        }
        out
    }

    /// Summary row with a header.
    pub fn to_csv(&self) -> String {
        format!(
            "required,covered,missing,coverage_pct\n{},{},{},{:.2}\n",
            self.required,
            self.covered,
            self.missing.len(),
            self.coverage_pct
        )
    }
}

fn join(items: &[usize], sep: &str) -> String {
    items.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(sep)
}

/// Every `size`-subset of `pool`, ascending, by recursion.
fn subsets(pool: &[usize], size: usize) -> Vec<Vec<usize>> {
    fn go(pool: &[usize], size: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == size {
            out.push(prefix.clone());
            return;
        }
        let need = size - prefix.len();
        for i in 0..pool.len() {
            if pool.len() - i < need {
                break;
            }
            prefix.push(pool[i]);
            go(&pool[i + 1..], size, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if size <= pool.len() {
        go(pool, size, &mut Vec::new(), &mut out);
    }
    out
}

/// The distinct parameter subsets whose value tuples `config` requires.
pub fn required_combinations(num_params: usize, config: &VscaConfig) -> BTreeSet<Vec<usize>> {
    let all: Vec<usize> = (0..num_params).collect();
    let mut combos: BTreeSet<Vec<usize>> = subsets(&all, config.strength).into_iter().collect();
    for sub in &config.subs {
        let mut pool = sub.params.clone();
        pool.sort_unstable();
        pool.dedup();
        combos.extend(subsets(&pool, sub.strength));
    }
    combos
}

pub fn verify_suite(suite: &TestSuite) -> CoverageReport {
    let levels = suite.model.levels();
    let mut required = 0;
    let mut missing = Vec::new();
    for combo in required_combinations(levels.len(), &suite.config) {
        let seen: BTreeSet<Vec<usize>> = suite
            .cases
            .iter()
            .map(|c| combo.iter().map(|&p| c.values[p]).collect())
            .collect();
        let mut tuple = vec![0usize; combo.len()];
        'odometer: loop {
            required += 1;
            if !seen.contains(&tuple) {
                missing.push((combo.clone(), tuple.clone()));
            }
            for slot in (0..tuple.len()).rev() {
                tuple[slot] += 1;
                if tuple[slot] < levels[combo[slot]] {
                    continue 'odometer;
                }
                tuple[slot] = 0;
            }
            break;
        }
    }
    let covered = required - missing.len();
    let coverage_pct = if required == 0 {
        100.0
    } else {
        covered as f64 / required as f64 * 100.0
    };
    CoverageReport {
        required,
        covered,
        missing,
        coverage_pct,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteStats {
    pub best: usize,
    /// Arithmetic mean rounded to two decimals.
    pub mean: f64,
    pub sizes: Vec<usize>,
}

impl SuiteStats {
    pub fn mean_text(&self) -> String {
        format!("{:.2}", self.mean)
    }
}

pub fn stats_from_sizes(sizes: &[usize]) -> Result<SuiteStats> {
    let best = *sizes
        .iter()
        .min()
        .ok_or_else(|| Error::InvalidArgument("no runs to summarize".into()))?;
    let mean = sizes.iter().sum::<usize>() as f64 / sizes.len() as f64;
    Ok(SuiteStats {
        best,
        mean: (mean * 100.0).round() / 100.0,
        sizes: sizes.to_vec(),
    })
}

pub fn suite_stats(results: &[RunResult]) -> Result<SuiteStats> {
    let sizes: Vec<usize> = results.iter().map(RunResult::size).collect();
    stats_from_sizes(&sizes)
}

pub fn write_suite(suite: &TestSuite) -> String {
    let mut out = format!(
        "# model: {}\n# config: {}\n",
        render_model(&suite.model),
        render_config(&suite.config)
    );
    for case in &suite.cases {
        out.push_str(&join(&case.values, ","));
        out.push('\n');
    }
    out
}

pub fn read_suite(text: &str) -> Result<TestSuite> {
    let mut model = None;
    let mut config = None;
    let mut cases = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(m) = comment.strip_prefix("model:") {
                model = Some(parse_model(m.trim())?);
            } else if let Some(c) = comment.strip_prefix("config:") {
                config = Some(parse_config(c.trim())?);
            }
            continue;
        }
        let model = model
            .as_ref()
            .ok_or_else(|| Error::parse(line, "test case before `# model:` header"))?;
        let values = line
            .split(',')
            .map(|v| v.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::parse(line, format!("line {}: not a list of integers", lineno + 1)))?;
        let case = TestCase::new(values);
        if !model.is_valid_case(&case) {
            return Err(Error::parse(
                line,
                format!("line {}: not a valid case for model {model}", lineno + 1),
            ));
        }
        cases.push(case);
    }
    let model = model.ok_or_else(|| Error::parse(text.lines().next().unwrap_or(""), "missing `# model:` header"))?;
    let config = config.ok_or_else(|| Error::parse(text.lines().next().unwrap_or(""), "missing `# config:` header"))?;
    Ok(TestSuite { model, config, cases })
}
