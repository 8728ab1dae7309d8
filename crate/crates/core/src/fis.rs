//! Mamdani fuzzy controller for the swarm's inertia weight.
//!
//! Three search-performance measures, each a percentage, are fuzzified
//! with triangular membership functions: the normalized current fitness
//! (NCF) and the distances of a particle to its personal best (d1) and to
//! the global best (d2). Four rules map them to a `low` or `high` inertia
//! selection:
//!
//! | rule | NCF     | d1   | d2      | w    |
//! |------|---------|------|---------|------|
//! | 1    | low     | low  | low     | low  |
//! | 2    | not low | low  | low     | high |
//! | 3    | medium  | low  | not low | high |
//! | 4    | high    | high | high    | high |
//!
//! Firing strength is the minimum of the antecedent degrees, consequents
//! are clipped and max-aggregated, and the centroid of the aggregate
//! (sampled at 1001 evenly spaced points of `[0, 100]`) is the selection
//! percentage. The weight is `selection / 100 * w_max`, clamped to
//! `[w_min, w_max]`.

use std::cell::RefCell;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const UNIVERSE_MAX: f64 = 100.0;
pub const CENTROID_SAMPLES: usize = 1001;
const CENTROID_CACHE_LIMIT: usize = 1 << 16;

/// Triangular membership function on `[0, 100]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct Triangle {
    left: f64,
    peak: f64,
    right: f64,
}

impl Triangle {
    pub fn new(left: f64, peak: f64, right: f64) -> Result<Self> {
        let ordered = left <= peak && peak <= right;
        let in_range = (0.0..=UNIVERSE_MAX).contains(&left) && (0.0..=UNIVERSE_MAX).contains(&right);
        if !ordered || !in_range {
            return Err(Error::InvalidArgument(format!(
                "membership triangle ({left}, {peak}, {right}) must satisfy 0 <= left <= peak <= right <= 100"
            )));
        }
        Ok(Self { left, peak, right })
    }

    pub fn degree(&self, x: f64) -> f64 {
        if x == self.peak {
            1.0
        } else if x <= self.left || x >= self.right {
            0.0
        } else if x < self.peak {
            (x - self.left) / (self.peak - self.left)
        } else {
            (self.right - x) / (self.right - self.peak)
        }
    }
}

impl TryFrom<[f64; 3]> for Triangle {
    type Error = Error;

    fn try_from([l, p, r]: [f64; 3]) -> Result<Self> {
        Triangle::new(l, p, r)
    }
}

impl From<Triangle> for [f64; 3] {
    fn from(t: Triangle) -> Self {
        [t.left, t.peak, t.right]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Low,
    Medium,
    High,
    /// Complement of `Low`: `1 - low`.
    NotLow,
}

/// `low` / `medium` / `high` membership functions of one variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelSet {
    pub low: Triangle,
    pub medium: Triangle,
    pub high: Triangle,
}

impl Default for LabelSet {
    fn default() -> Self {
        Self {
            low: Triangle { left: 0.0, peak: 0.0, right: 50.0 },
            medium: Triangle { left: 25.0, peak: 50.0, right: 75.0 },
            high: Triangle { left: 50.0, peak: 100.0, right: 100.0 },
        }
    }
}

impl LabelSet {
    pub fn degree(&self, label: Label, x: f64) -> f64 {
        match label {
            Label::Low => self.low.degree(x),
            Label::Medium => self.medium.degree(x),
            Label::High => self.high.degree(x),
            Label::NotLow => 1.0 - self.low.degree(x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Input {
    Ncf,
    D1,
    D2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputLabel {
    Low,
    High,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyRule {
    pub antecedent: Vec<(Input, Label)>,
    pub consequent: OutputLabel,
}

impl FuzzyRule {
    fn new(ncf: Label, d1: Label, d2: Label, consequent: OutputLabel) -> Self {
        Self {
            antecedent: vec![(Input::Ncf, ncf), (Input::D1, d1), (Input::D2, d2)],
            consequent,
        }
    }
}

pub fn default_rules() -> Vec<FuzzyRule> {
    use Label::*;
    vec![
        // near convergence: refine locally
        FuzzyRule::new(Low, Low, Low, OutputLabel::Low),
        // stuck in a local optimum
        FuzzyRule::new(NotLow, Low, Low, OutputLabel::High),
        FuzzyRule::new(Medium, Low, NotLow, OutputLabel::High),
        FuzzyRule::new(High, High, High, OutputLabel::High),
    ]
}

/// Membership layout and weight range. Every field falls back to its
/// default when absent from a config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FisConfig {
    pub ncf: LabelSet,
    pub d1: LabelSet,
    pub d2: LabelSet,
    pub output: LabelSet,
    pub w_max: f64,
    pub w_min: f64,
}

impl Default for FisConfig {
    fn default() -> Self {
        Self {
            ncf: LabelSet::default(),
            d1: LabelSet::default(),
            d2: LabelSet::default(),
            output: LabelSet::default(),
            w_max: 0.9,
            w_min: 0.1,
        }
    }
}

impl FisConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: FisConfig =
            toml::from_str(text).map_err(|e| Error::parse("membership config", e.to_string()))?;
        if !(config.w_min > 0.0 && config.w_min <= config.w_max) {
            return Err(Error::InvalidArgument(format!(
                "weight range [{}, {}] is not ordered and positive",
                config.w_min, config.w_max
            )));
        }
        Ok(config)
    }

    fn input(&self, input: Input) -> &LabelSet {
        match input {
            Input::Ncf => &self.ncf,
            Input::D1 => &self.d1,
            Input::D2 => &self.d2,
        }
    }
}

/// Outcome of one inference step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inference {
    /// Defuzzified selection percentage; `None` when no rule fired.
    pub w_selection: Option<f64>,
    pub w: f64,
}

#[derive(Debug, Clone)]
pub struct FisController {
    config: FisConfig,
    rules: Vec<FuzzyRule>,
    /// Output membership degrees at each centroid sample point.
    low_samples: Vec<f64>,
    high_samples: Vec<f64>,
    /// Centroids keyed by the exact bits of the two clip levels.
    centroids: RefCell<FxHashMap<(u64, u64), f64>>,
    last_w: f64,
}

impl Default for FisController {
    fn default() -> Self {
        Self::new(FisConfig::default())
    }
}

impl FisController {
    pub fn new(config: FisConfig) -> Self {
        let xs = sample_points();
        Self {
            low_samples: xs.iter().map(|&x| config.output.low.degree(x)).collect(),
            high_samples: xs.iter().map(|&x| config.output.high.degree(x)).collect(),
            rules: default_rules(),
            centroids: RefCell::default(),
            last_w: config.w_max,
            config,
        }
    }

    pub fn config(&self) -> &FisConfig {
        &self.config
    }

    pub fn rules(&self) -> &[FuzzyRule] {
        &self.rules
    }

    pub fn last_w(&self) -> f64 {
        self.last_w
    }

    /// Restores the start-of-search weight, `w_max`.
    pub fn reset(&mut self) {
        self.last_w = self.config.w_max;
    }

    /// Inference that records the emitted weight as the fallback for the
    /// next call.
    pub fn infer(&mut self, ncf: f64, d1: f64, d2: f64) -> Result<Inference> {
        let out = self.evaluate(ncf, d1, d2, self.last_w)?;
        self.last_w = out.w;
        Ok(out)
    }

    /// Stateless inference: `last_w` is returned unchanged if no rule fires.
    pub fn evaluate(&self, ncf: f64, d1: f64, d2: f64, last_w: f64) -> Result<Inference> {
        for (name, x) in [("NCF", ncf), ("d1", d1), ("d2", d2)] {
            if !(0.0..=UNIVERSE_MAX).contains(&x) {
                return Err(Error::InvalidArgument(format!("{name} = {x} outside [0, 100]")));
            }
        }
        let (low, high) = self.firing_strengths(ncf, d1, d2);
        if low <= 0.0 && high <= 0.0 {
            return Ok(Inference { w_selection: None, w: last_w });
        }
        let selection = self.centroid(low, high);
        Ok(Inference {
            w_selection: Some(selection),
            w: self.weight_from_selection(selection),
        })
    }

    /// Aggregated firing strength of the `low` and `high` consequents.
    pub fn firing_strengths(&self, ncf: f64, d1: f64, d2: f64) -> (f64, f64) {
        let mut low = 0.0f64;
        let mut high = 0.0f64;
        for rule in &self.rules {
            let strength = rule
                .antecedent
                .iter()
                .map(|&(input, label)| {
                    let x = match input {
                        Input::Ncf => ncf,
                        Input::D1 => d1,
                        Input::D2 => d2,
                    };
                    self.config.input(input).degree(label, x)
                })
                .fold(1.0f64, f64::min);
            match rule.consequent {
                OutputLabel::Low => low = low.max(strength),
                OutputLabel::High => high = high.max(strength),
            }
        }
        (low, high)
    }

    fn centroid(&self, low: f64, high: f64) -> f64 {
        let key = (low.to_bits(), high.to_bits());
        if let Some(&c) = self.centroids.borrow().get(&key) {
            return c;
        }
        let c = self.sampled_centroid(low, high);
        let mut cache = self.centroids.borrow_mut();
        if cache.len() >= CENTROID_CACHE_LIMIT {
            cache.clear();
        }
        cache.insert(key, c);
        c
    }

    fn sampled_centroid(&self, low: f64, high: f64) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, (&l, &h)) in self.low_samples.iter().zip(&self.high_samples).enumerate() {
            let mu = l.min(low).max(h.min(high));
            num += sample_x(i) * mu;
            den += mu;
        }
        if den > 0.0 {
            num / den
        } else {
            // Clipped output sets with zero area; only reachable with
            // degenerate custom membership functions.
            UNIVERSE_MAX / 2.0
        }
    }

    /// `selection / 100 * w_max`, clamped to `[w_min, w_max]`.
    pub fn weight_from_selection(&self, selection: f64) -> f64 {
        (selection / UNIVERSE_MAX * self.config.w_max).clamp(self.config.w_min, self.config.w_max)
    }
}

fn sample_x(i: usize) -> f64 {
    i as f64 * UNIVERSE_MAX / (CENTROID_SAMPLES - 1) as f64
}

fn sample_points() -> Vec<f64> {
    (0..CENTROID_SAMPLES).map(sample_x).collect()
}

/// Normalized current fitness, as a percentage of the `[min, max]` range.
/// A collapsed range counts as fully fit.
pub fn compute_ncf(current: usize, min: usize, max: usize) -> Result<f64> {
    if current < min || current > max {
        return Err(Error::InvalidArgument(format!(
            "fitness {current} outside [{min}, {max}]"
        )));
    }
    if max == min {
        return Ok(UNIVERSE_MAX);
    }
    Ok((current - min) as f64 / (max - min) as f64 * UNIVERSE_MAX)
}

/// Euclidean distance between `x` and `reference` as a percentage of
/// `max_distance`, clamped to `[0, 100]`.
pub fn compute_distance_pct(x: &[f64], reference: &[f64], max_distance: f64) -> Result<f64> {
    if x.len() != reference.len() {
        return Err(Error::InvalidArgument(format!(
            "vector lengths differ: {} vs {}",
            x.len(),
            reference.len()
        )));
    }
    if !(max_distance > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "max distance {max_distance} must be positive"
        )));
    }
    let dist = x
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok((dist / max_distance * UNIVERSE_MAX).clamp(0.0, UNIVERSE_MAX))
}

/// Diagonal of the search box: the norm of `(v_0 - 1, ..., v_{k-1} - 1)`.
pub fn max_distance(levels: &[usize]) -> f64 {
    levels
        .iter()
        .map(|&v| ((v - 1) * (v - 1)) as f64)
        .sum::<f64>()
        .sqrt()
}

/// Stagnation index `(nubf_max - nubf_k) / nubf_k`; `None` when `nubf_k`
/// is zero.
pub fn compute_nor_nubf(nubf_k: usize, nubf_max: usize) -> Result<Option<f64>> {
    if nubf_k > nubf_max {
        return Err(Error::InvalidArgument(format!(
            "unchanged-best count {nubf_k} exceeds maximum {nubf_max}"
        )));
    }
    if nubf_k == 0 {
        return Ok(None);
    }
    Ok(Some((nubf_max - nubf_k) as f64 / nubf_k as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    /// Reference Mamdani pipeline: trapezoid-rule integration of the
    /// aggregated output on a fine grid, written independently of the
    /// controller's sampled centroid.
    fn reference_centroid(low_clip: f64, high_clip: f64) -> f64 {
        let n = 200_000;
        let tri = |x: f64, l: f64, p: f64, r: f64| -> f64 {
            if x < l || x > r {
                0.0
            } else if x <= p {
                if p == l { 1.0 } else { (x - l) / (p - l) }
            } else if r == p {
                1.0
            } else {
                (r - x) / (r - p)
            }
        };
        let mu = |x: f64| {
            let lo = tri(x, 0.0, 0.0, 50.0).min(low_clip);
            let hi = tri(x, 50.0, 100.0, 100.0).min(high_clip);
            lo.max(hi)
        };
        let h = 100.0 / n as f64;
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..=n {
            let x = i as f64 * h;
            let wgt = if i == 0 || i == n { 0.5 } else { 1.0 };
            num += wgt * x * mu(x);
            den += wgt * mu(x);
        }
        num / den
    }

    #[test]
    fn triangle_degrees() {
        let t = Triangle::new(25.0, 50.0, 75.0).unwrap();
        assert_eq!(t.degree(50.0), 1.0);
        assert_eq!(t.degree(25.0), 0.0);
        assert_eq!(t.degree(80.0), 0.0);
        assert_eq!(t.degree(37.5), 0.5);
        let shoulder = Triangle::new(0.0, 0.0, 50.0).unwrap();
        assert_eq!(shoulder.degree(0.0), 1.0);
        assert_eq!(shoulder.degree(25.0), 0.5);
        assert!(Triangle::new(10.0, 5.0, 20.0).is_err());
        assert!(Triangle::new(-1.0, 5.0, 20.0).is_err());
    }

    #[test]
    fn ncf_examples() {
        assert_eq!(compute_ncf(10, 0, 10).unwrap(), 100.0);
        assert_eq!(compute_ncf(3, 3, 9).unwrap(), 0.0);
        assert_eq!(compute_ncf(5, 0, 10).unwrap(), 50.0);
        assert_eq!(compute_ncf(4, 4, 4).unwrap(), 100.0);
        assert!(compute_ncf(11, 0, 10).is_err());
        assert!(compute_ncf(1, 2, 10).is_err());
    }

    #[test]
    fn distance_examples() {
        let x = [0.0, 1.0, 2.0];
        assert_eq!(compute_distance_pct(&x, &x, 3.0).unwrap(), 0.0);

        let levels = [3, 3, 3, 3];
        let md = max_distance(&levels);
        assert_eq!(md, 4.0);
        let zero = [0.0; 4];
        assert_eq!(compute_distance_pct(&zero, &[2.0; 4], md).unwrap(), 100.0);
        assert_eq!(compute_distance_pct(&zero, &[2.0, 0.0, 0.0, 0.0], md).unwrap(), 50.0);

        assert!(compute_distance_pct(&zero, &[0.0; 3], md).is_err());
        assert!(compute_distance_pct(&zero, &zero, 0.0).is_err());
    }

    #[test]
    fn nor_nubf_examples() {
        assert_eq!(compute_nor_nubf(7, 7).unwrap(), Some(0.0));
        assert_eq!(compute_nor_nubf(1, 100).unwrap(), Some(99.0));
        assert_eq!(compute_nor_nubf(0, 100).unwrap(), None);
        assert!(compute_nor_nubf(5, 4).is_err());
    }

    // 1001-point centroids computed outside this crate (numpy, same
    // sampling grid) for the default layout.
    const SAMPLED_LOW_ONLY: f64 = 16.63333333333333;
    const SAMPLED_HIGH_ONLY: f64 = 83.36666666666667;
    const SAMPLED_MIXED: [(f64, f64); 4] = [
        (5.0, 26.356412859560066),
        (12.5, 36.725344952795936),
        (25.0, 50.0),
        (40.0, 66.38429652042362),
    ];
    /// Sampling at 0.1 spacing stays within half a step of the integral.
    const SAMPLING_TOL: f64 = 0.05;

    #[test]
    fn corner_cases_fire_single_rules() {
        let fis = FisController::default();
        assert_eq!(fis.firing_strengths(0.0, 0.0, 0.0), (1.0, 0.0));
        assert_eq!(fis.firing_strengths(100.0, 100.0, 100.0), (0.0, 1.0));

        let low = fis.evaluate(0.0, 0.0, 0.0, 0.9).unwrap();
        let sel = low.w_selection.unwrap();
        assert!(close(sel, SAMPLED_LOW_ONLY, 1e-9), "{sel}");
        assert!(close(sel, reference_centroid(1.0, 0.0), SAMPLING_TOL));
        assert!(low.w <= 0.5);
        assert!(close(low.w, SAMPLED_LOW_ONLY / 100.0 * 0.9, 1e-12));

        let high = fis.evaluate(100.0, 100.0, 100.0, 0.1).unwrap();
        let sel = high.w_selection.unwrap();
        assert!(close(sel, SAMPLED_HIGH_ONLY, 1e-9), "{sel}");
        assert!(close(sel, reference_centroid(0.0, 1.0), SAMPLING_TOL));
        assert!(high.w >= 0.5);
        assert!(close(high.w, SAMPLED_HIGH_ONLY / 100.0 * 0.9, 1e-12));
    }

    #[test]
    fn mixed_firing_matches_reference() {
        let fis = FisController::default();
        // d1 = d2 = 0: rule 1 fires at low(ncf), rule 2 at 1 - low(ncf).
        for (ncf, sampled) in SAMPLED_MIXED {
            let (lo, hi) = fis.firing_strengths(ncf, 0.0, 0.0);
            let expected_lo = 1.0 - ncf / 50.0;
            assert!(close(lo, expected_lo, 1e-12));
            assert!(close(hi, 1.0 - expected_lo, 1e-12));
            let sel = fis.evaluate(ncf, 0.0, 0.0, 0.5).unwrap().w_selection.unwrap();
            assert!(close(sel, sampled, 1e-9), "ncf={ncf} sel={sel}");
            assert!(close(sel, reference_centroid(lo, hi), SAMPLING_TOL));
        }
    }

    #[test]
    fn full_selection_gives_w_max() {
        let fis = FisController::default();
        assert_eq!(fis.weight_from_selection(100.0), 0.9);
        assert_eq!(fis.weight_from_selection(0.0), 0.1);
    }

    #[test]
    fn no_fire_holds_last_weight() {
        let mut fis = FisController::default();
        assert_eq!(fis.last_w(), 0.9);
        // NCF high but d1 low: no rule's antecedent is satisfied.
        assert_eq!(fis.firing_strengths(100.0, 0.0, 100.0), (0.0, 0.0));
        let out = fis.infer(100.0, 0.0, 100.0).unwrap();
        assert_eq!(out.w_selection, None);
        assert_eq!(out.w, 0.9);

        let low = fis.infer(0.0, 0.0, 0.0).unwrap().w;
        assert_eq!(fis.last_w(), low);
        assert_eq!(fis.infer(100.0, 0.0, 100.0).unwrap().w, low);
        fis.reset();
        assert_eq!(fis.last_w(), 0.9);
    }

    #[test]
    fn rejects_out_of_range_inputs() {
        let fis = FisController::default();
        assert!(fis.evaluate(-0.1, 0.0, 0.0, 0.5).is_err());
        assert!(fis.evaluate(0.0, 100.5, 0.0, 0.5).is_err());
        assert!(fis.evaluate(0.0, 0.0, f64::NAN, 0.5).is_err());
    }

    #[test]
    fn ten_thousand_random_triples_stay_in_range() {
        let mut fis = FisController::default();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..10_000 {
            let (a, b, c) = (rng.gen_range(0.0..=100.0), rng.gen_range(0.0..=100.0), rng.gen_range(0.0..=100.0));
            let w = fis.infer(a, b, c).unwrap().w;
            assert!((0.1..=0.9).contains(&w), "w={w} at ({a}, {b}, {c})");
        }
    }

    #[test]
    fn config_file_overrides() {
        let cfg = FisConfig::from_toml("w_max = 0.8\n[ncf]\nlow = [0, 0, 40]\nmedium = [20, 50, 80]\nhigh = [60, 100, 100]\n").unwrap();
        assert_eq!(cfg.w_max, 0.8);
        assert_eq!(cfg.w_min, 0.1);
        assert_eq!(cfg.ncf.low, Triangle::new(0.0, 0.0, 40.0).unwrap());
        assert_eq!(cfg.d1, LabelSet::default());
        assert!(FisConfig::from_toml("[ncf]\nlow = [10, 0, 40]\nmedium = [20, 50, 80]\nhigh = [60, 100, 100]").is_err());
        assert!(FisConfig::from_toml("w_min = 0.95").is_err());
        assert!(FisConfig::from_toml("bogus = 1").is_err());
    }

    proptest! {
        #[test]
        fn degrees_are_sane(x in 0.0f64..=100.0) {
            let set = LabelSet::default();
            let degrees = [set.low.degree(x), set.medium.degree(x), set.high.degree(x)];
            for d in degrees {
                prop_assert!((0.0..=1.0).contains(&d));
            }
            let sum: f64 = degrees.iter().sum();
            prop_assert!(sum > 0.0 && sum <= 2.0);
        }

        #[test]
        fn lower_ncf_never_raises_w(a in 0.0f64..=50.0, b in 0.0f64..=50.0) {
            let fis = FisController::default();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let w_lo = fis.evaluate(lo, 0.0, 0.0, 0.5).unwrap().w;
            let w_hi = fis.evaluate(hi, 0.0, 0.0, 0.5).unwrap().w;
            prop_assert!(w_lo <= w_hi + 1e-12, "w({lo})={w_lo} > w({hi})={w_hi}");
        }

        #[test]
        fn evaluation_is_deterministic(a in 0.0f64..=100.0, b in 0.0f64..=100.0, c in 0.0f64..=100.0, last in 0.1f64..=0.9) {
            let fis = FisController::default();
            prop_assert_eq!(fis.evaluate(a, b, c, last).unwrap(), fis.evaluate(a, b, c, last).unwrap());
        }
    }
}
