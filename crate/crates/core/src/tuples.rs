//! Parameter-combination generation and the uncovered-tuple store.
//!
//! The store maps each required parameter combination to the hash set of
//! its value tuples that no accepted test case has covered yet. A value
//! tuple is packed into a `u64` as a mixed-radix number over the level
//! counts of the combination's parameters, so membership and deletion are
//! a single hash probe.

use std::fmt;

use indexmap::IndexMap;
use rustc_hash::FxHashSet;

use crate::error::{Error, Result};
use crate::model::{SutModel, TestCase, VscaConfig};

/// Strictly increasing parameter indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamCombination(Vec<usize>);

impl ParamCombination {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(format!(
                "combination {indices:?} is not strictly increasing"
            )));
        }
        Ok(Self(indices))
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for ParamCombination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|i| i.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

/// All `t`-combinations of `0..k` in lexicographic order.
///
/// Iterative: a stack holds the next candidate value for each open slot of
/// the combination, so memory is bounded by `t` whatever `k` is. Popping a
/// value re-opens the slot it belongs to; values are pushed while they can
/// still be extended to a full combination.
pub fn generate_param_combinations(k: usize, t: usize) -> Result<Vec<ParamCombination>> {
    if t < 1 || t > k {
        return Err(Error::InvalidArgument(format!(
            "combination size {t} outside 1..={k}"
        )));
    }
    let mut out = Vec::with_capacity(binomial(k, t));
    let mut comb = vec![0usize; t];
    let mut stack: Vec<usize> = Vec::with_capacity(t + 1);
    stack.push(0);
    while let Some(mut v) = stack.pop() {
        let mut i = stack.len();
        while v + (t - i) <= k {
            comb[i] = v;
            i += 1;
            v += 1;
            stack.push(v);
            if i == t {
                out.push(ParamCombination(comb.clone()));
                break;
            }
        }
    }
    Ok(out)
}

/// Binomial coefficient, saturating on overflow.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    usize::try_from(acc).unwrap_or(usize::MAX)
}

#[derive(Debug, Clone)]
struct TupleSet {
    /// Level count of each parameter in the key, in key order.
    radices: Vec<usize>,
    uncovered: FxHashSet<u64>,
}

impl TupleSet {
    fn full(radices: Vec<usize>) -> Self {
        let size: u64 = radices.iter().map(|&r| r as u64).product();
        Self {
            radices,
            uncovered: (0..size).collect(),
        }
    }

    fn unpack(&self, mut packed: u64) -> Vec<usize> {
        let mut values = vec![0; self.radices.len()];
        for (slot, &r) in values.iter_mut().zip(&self.radices).rev() {
            *slot = (packed % r as u64) as usize;
            packed /= r as u64;
        }
        values
    }
}

#[inline]
fn pack(indices: &[usize], levels: &[usize], values: &[usize]) -> u64 {
    indices
        .iter()
        .fold(0u64, |acc, &p| acc * levels[p] as u64 + values[p] as u64)
}

/// Uncovered value tuples keyed by parameter combination.
#[derive(Debug, Clone)]
pub struct TupleStore {
    levels: Vec<usize>,
    entries: IndexMap<ParamCombination, TupleSet>,
    initial_total: usize,
    remaining: usize,
}

impl TupleStore {
    /// Every tuple required by `config` over `model`: all main-strength
    /// combinations, then every sub-strength combination drawn from each
    /// sub-configuration's parameters. A combination required more than
    /// once appears under a single key.
    ///
    /// `config` is expected to have passed [`crate::model::validate_config`].
    pub fn build(model: &SutModel, config: &VscaConfig) -> Result<Self> {
        let levels = model.levels().to_vec();
        let mut entries: IndexMap<ParamCombination, TupleSet> = IndexMap::new();
        let mut insert = |comb: ParamCombination| {
            entries.entry(comb).or_insert_with_key(|c| {
                TupleSet::full(c.indices().iter().map(|&p| levels[p]).collect())
            });
        };
        for comb in generate_param_combinations(model.num_params(), config.strength)? {
            insert(comb);
        }
        for sub in &config.subs {
            for local in generate_param_combinations(sub.params.len(), sub.strength)? {
                let global = local.indices().iter().map(|&i| sub.params[i]).collect();
                insert(ParamCombination::new(global)?);
            }
        }
        let total = entries.values().map(|e| e.uncovered.len()).sum();
        Ok(Self {
            levels,
            entries,
            initial_total: total,
            remaining: total,
        })
    }

    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    pub fn initial_total(&self) -> usize {
        self.initial_total
    }

    /// Number of uncovered tuples left.
    pub fn remaining_count(&self) -> usize {
        self.remaining
    }

    /// Number of combinations that still have uncovered tuples. This is the
    /// largest value [`TupleStore::coverage_count`] can return.
    pub fn entry_count(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn combinations(&self) -> impl Iterator<Item = &ParamCombination> {
        self.entries.keys()
    }

    pub fn coverage_count(&self, case: &TestCase) -> usize {
        self.count_values(&case.values)
    }

    /// Number of entries whose uncovered set contains the projection of
    /// `values`. Read-only.
    pub fn count_values(&self, values: &[usize]) -> usize {
        debug_assert_eq!(values.len(), self.levels.len());
        self.entries
            .iter()
            .filter(|(comb, set)| {
                set.uncovered
                    .contains(&pack(comb.indices(), &self.levels, values))
            })
            .count()
    }

    /// Deletes every tuple `case` covers and drops emptied entries.
    /// Returns the number of tuples removed.
    pub fn remove_covered(&mut self, case: &TestCase) -> usize {
        let levels = &self.levels;
        let mut removed = 0;
        self.entries.retain(|comb, set| {
            if set
                .uncovered
                .remove(&pack(comb.indices(), levels, &case.values))
            {
                removed += 1;
            }
            !set.uncovered.is_empty()
        });
        self.remaining -= removed;
        removed
    }

    /// The smallest uncovered tuple of the entry at `entry_index`, as
    /// `(parameter indices, values)`.
    pub fn uncovered_at(&self, entry_index: usize) -> Option<(&[usize], Vec<usize>)> {
        let (comb, set) = self.entries.get_index(entry_index)?;
        let packed = set.uncovered.iter().copied().min()?;
        Some((comb.indices(), set.unpack(packed)))
    }

    /// Uncovered tuples of every entry, each list sorted.
    pub fn uncovered_tuples(&self) -> Vec<(ParamCombination, Vec<Vec<usize>>)> {
        self.entries
            .iter()
            .map(|(comb, set)| {
                let mut packed: Vec<u64> = set.uncovered.iter().copied().collect();
                packed.sort_unstable();
                (comb.clone(), packed.into_iter().map(|p| set.unpack(p)).collect())
            })
            .collect()
    }

    /// Debug dump: one line per entry, `i,j,...: a-b c-d ...`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (comb, tuples) in self.uncovered_tuples() {
            let rendered: Vec<String> = tuples
                .iter()
                .map(|t| {
                    t.iter()
                        .map(|v| v.to_string())
                        .collect::<Vec<_>>()
                        .join("-")
                })
                .collect();
            out.push_str(&format!("{comb}: {}\n", rendered.join(" ")));
        }
        out
    }

    #[cfg(test)]
    fn from_entries(levels: Vec<usize>, entries: Vec<(Vec<usize>, Vec<Vec<usize>>)>) -> Self {
        let mut map = IndexMap::new();
        for (idx, tuples) in entries {
            let radices: Vec<usize> = idx.iter().map(|&p| levels[p]).collect();
            let uncovered = tuples
                .iter()
                .map(|t| t.iter().zip(&radices).fold(0u64, |a, (&v, &r)| a * r as u64 + v as u64))
                .collect();
            map.insert(ParamCombination(idx), TupleSet { radices, uncovered });
        }
        let total = map.values().map(|e: &TupleSet| e.uncovered.len()).sum();
        Self {
            levels,
            entries: map,
            initial_total: total,
            remaining: total,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_model;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn combos(k: usize, t: usize) -> Vec<Vec<usize>> {
        generate_param_combinations(k, t)
            .unwrap()
            .into_iter()
            .map(|c| c.0)
            .collect()
    }

    /// Brute force: every (combination, tuple) pair over all index pairs and value pairs.
    fn brute_force_pairs(levels: &[usize]) -> BTreeSet<(usize, usize, usize, usize)> {
        let mut out = BTreeSet::new();
        for a in 0..levels.len() {
            for b in a + 1..levels.len() {
                for x in 0..levels[a] {
                    for y in 0..levels[b] {
                        out.insert((a, b, x, y));
                    }
                }
            }
        }
        out
    }

    #[test]
    fn combination_examples() {
        assert_eq!(combos(3, 2), vec![vec![0, 1], vec![0, 2], vec![1, 2]]);
        assert_eq!(combos(4, 4), vec![vec![0, 1, 2, 3]]);
        assert_eq!(combos(4, 1), vec![vec![0], vec![1], vec![2], vec![3]]);
    }

    #[test]
    fn fifteen_choose_two_matches_nested_loops() {
        let mut expected = Vec::new();
        for a in 0..15 {
            for b in a + 1..15 {
                expected.push(vec![a, b]);
            }
        }
        assert_eq!(expected.len(), 105);
        assert_eq!(combos(15, 2), expected);
    }

    #[test]
    fn combination_argument_errors() {
        assert!(generate_param_combinations(3, 4).is_err());
        assert!(generate_param_combinations(3, 0).is_err());
    }

    #[test]
    fn store_sizes() {
        let m = parse_model("3^5").unwrap();
        let store = TupleStore::build(&m, &VscaConfig::uniform(2)).unwrap();
        assert_eq!(store.initial_total(), brute_force_pairs(m.levels()).len());
        assert_eq!(store.initial_total(), 90);
        assert_eq!(store.entry_count(), 10);

        let m2 = parse_model("2^2").unwrap();
        let store = TupleStore::build(&m2, &VscaConfig::uniform(2)).unwrap();
        assert_eq!(store.entry_count(), 1);
        assert_eq!(store.initial_total(), 4);

        // Main level: all 3-subsets of 5 columns with 27 tuples each. Sub
        // level: the 3 pairs of {1,2,3} with 9 tuples each. Brute-force
        // union of distinct (combination, tuple) pairs.
        let mut union = BTreeSet::new();
        for a in 0..5 {
            for b in a + 1..5 {
                for c in b + 1..5 {
                    for x in 0..27 {
                        union.insert((vec![a, b, c], x));
                    }
                }
            }
        }
        for (a, b) in [(1, 2), (1, 3), (2, 3)] {
            for x in 0..9 {
                union.insert((vec![a, b], x));
            }
        }
        let c = VscaConfig::uniform(3).with_sub(vec![1, 2, 3], 2);
        let store = TupleStore::build(&m, &c).unwrap();
        assert_eq!(union.len(), 297);
        assert_eq!(store.initial_total(), 297);
    }

    #[test]
    fn equal_strength_sub_is_absorbed() {
        let m = parse_model("3^5").unwrap();
        let c = VscaConfig::uniform(2).with_sub(vec![0, 1, 2], 2);
        let store = TupleStore::build(&m, &c).unwrap();
        assert_eq!(store.initial_total(), 90);
    }

    #[test]
    fn count_and_remove() {
        let m = parse_model("3^5").unwrap();
        let mut store = TupleStore::build(&m, &VscaConfig::uniform(2)).unwrap();
        let zero = TestCase::new(vec![0; 5]);
        assert_eq!(store.coverage_count(&zero), 10);
        assert_eq!(store.remove_covered(&zero), 10);
        assert_eq!(store.remaining_count(), 80);
        assert_eq!(store.coverage_count(&zero), 0);
        assert_eq!(store.remove_covered(&zero), 0);
        assert_eq!(store.remaining_count(), 80);

        // Recount by brute force: the pairs not hit by the all-zero row.
        let remaining: usize = brute_force_pairs(m.levels())
            .iter()
            .filter(|&&(_, _, x, y)| !(x == 0 && y == 0))
            .count();
        assert_eq!(remaining, store.remaining_count());
    }

    #[test]
    fn exhausting_a_single_entry() {
        let mut store = TupleStore::from_entries(vec![3, 3], vec![(vec![0, 1], vec![vec![2, 2]])]);
        let case = TestCase::new(vec![2, 2]);
        assert_eq!(store.coverage_count(&case), 1);
        assert_eq!(store.remove_covered(&case), 1);
        assert!(store.is_empty());
        assert_eq!(store.remaining_count(), 0);
        assert_eq!(store.coverage_count(&case), 0);
    }

    #[test]
    fn dump_format() {
        let store = TupleStore::from_entries(
            vec![3, 3, 2],
            vec![(vec![0, 2], vec![vec![2, 1], vec![0, 1]]), (vec![1, 2], vec![vec![1, 0]])],
        );
        assert_eq!(store.dump(), "0,2: 0-1 2-1\n1,2: 1-0\n");
        assert_eq!(store.uncovered_at(0).unwrap(), (&[0usize, 2][..], vec![0, 1]));
        assert!(store.uncovered_at(2).is_none());
    }

    fn brute_force_combos(k: usize, t: usize) -> Vec<Vec<usize>> {
        // Odometer over all t-tuples of 0..k, keeping strictly increasing ones.
        let mut out = Vec::new();
        let total = k.pow(t as u32);
        for code in 0..total {
            let mut digits = vec![0; t];
            let mut c = code;
            for d in digits.iter_mut().rev() {
                *d = c % k;
                c /= k;
            }
            if digits.windows(2).all(|w| w[0] < w[1]) {
                out.push(digits);
            }
        }
        out
    }

    #[test]
    fn combinations_match_odometer_up_to_seven() {
        for k in 1..=7 {
            for t in 1..=k {
                assert_eq!(combos(k, t), brute_force_combos(k, t), "k={k} t={t}");
                assert_eq!(combos(k, t).len(), binomial(k, t));
            }
        }
    }

    fn arb_store_and_case() -> impl Strategy<Value = (SutModel, VscaConfig, Vec<Vec<usize>>)> {
        (prop::collection::vec(1usize..5, 2..6), 1usize..3)
            .prop_flat_map(|(levels, t)| {
                let k = levels.len();
                let t = t.min(k);
                let cases = prop::collection::vec(
                    levels.iter().map(|&v| 0..v).collect::<Vec<_>>(),
                    1..12,
                );
                let sub = prop::sample::subsequence((0..k).collect::<Vec<_>>(), 1..=k);
                (Just(levels), Just(t), sub, cases)
            })
            .prop_map(|(levels, t, sub, cases)| {
                let s = sub.len().min(t + 1);
                let model = SutModel::new(levels).unwrap();
                (model, VscaConfig::uniform(t).with_sub(sub, s), cases)
            })
    }

    proptest! {
        #[test]
        fn count_agrees_with_delete((model, config, cases) in arb_store_and_case()) {
            let mut store = TupleStore::build(&model, &config).unwrap();
            for values in cases {
                let case = TestCase::new(values);
                let mut copy = store.clone();
                prop_assert_eq!(store.coverage_count(&case), copy.remove_covered(&case));
                let before = store.remaining_count();
                let removed = store.remove_covered(&case);
                prop_assert_eq!(store.remaining_count(), before - removed);
                prop_assert!(store.coverage_count(&case) == 0);
            }
        }

        #[test]
        fn exhaustive_removal_conserves_total(levels in prop::collection::vec(1usize..4, 1..5), t in 1usize..4) {
            let model = SutModel::new(levels).unwrap();
            let t = t.min(model.num_params());
            let mut store = TupleStore::build(&model, &VscaConfig::uniform(t)).unwrap();
            let initial = store.initial_total();
            let mut removed = 0;
            let mut values = vec![0; model.num_params()];
            'outer: loop {
                removed += store.remove_covered(&TestCase::new(values.clone()));
                for (i, v) in values.iter_mut().enumerate().rev() {
                    *v += 1;
                    if *v < model.level(i) { continue 'outer; }
                    *v = 0;
                }
                break;
            }
            prop_assert_eq!(removed, initial);
            prop_assert!(store.is_empty());
        }

        #[test]
        fn uniform_total_is_binomial_times_power(k in 1usize..7, v in 1usize..5, t in 1usize..7) {
            prop_assume!(t <= k);
            let model = SutModel::uniform(v, k).unwrap();
            let store = TupleStore::build(&model, &VscaConfig::uniform(t)).unwrap();
            prop_assert_eq!(store.initial_total(), binomial(k, t) * v.pow(t as u32));
        }
    }
}
