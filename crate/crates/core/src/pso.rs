//! Particle swarm search for one test case at a time.
//!
//! Each particle is a point in the box `[0, v_0 - 1] x ... x [0, v_{k-1} - 1]`
//! and is rounded to the nearest test case for evaluation. Fitness is the
//! number of store entries whose uncovered tuples the rounded case hits.
//! [`generate_suite`] repeatedly runs a fresh swarm, commits the global
//! best, and deletes the tuples it covers until nothing is left.
//!
//! Two inertia policies share the engine: `Fpso` asks the fuzzy
//! controller for `w` before every particle move; `Cpso` decreases `w`
//! linearly from `w_max` to `w_min` across the iterations.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fis::{compute_distance_pct, compute_ncf, compute_nor_nubf, max_distance, FisConfig, FisController};
use crate::model::{validate_config, SutModel, TestCase, TestSuite, VscaConfig};
use crate::tuples::TupleStore;
use crate::verify::verify_suite;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Fuzzy-adapted inertia weight.
    Fpso,
    /// Linearly decreasing inertia weight.
    Cpso,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Fpso => "fpso",
            Variant::Cpso => "cpso",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fpso" => Ok(Variant::Fpso),
            "cpso" => Ok(Variant::Cpso),
            _ => Err(Error::parse(s, "variant must be `fpso` or `cpso`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwarmParams {
    pub swarm_size: usize,
    pub max_iterations: usize,
    pub c1: f64,
    pub c2: f64,
    pub variant: Variant,
    pub seed: u64,
    /// Membership layout and the `[w_min, w_max]` inertia range.
    pub fis: FisConfig,
}

impl Default for SwarmParams {
    fn default() -> Self {
        Self {
            swarm_size: 80,
            max_iterations: 100,
            c1: 2.0,
            c2: 2.0,
            variant: Variant::Fpso,
            seed: 0,
            fis: FisConfig::default(),
        }
    }
}

impl SwarmParams {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn w_max(&self) -> f64 {
        self.fis.w_max
    }

    pub fn w_min(&self) -> f64 {
        self.fis.w_min
    }

    pub fn validate(&self) -> Result<()> {
        if self.swarm_size < 2 {
            return Err(Error::InvalidArgument(format!(
                "swarm size {} must be at least 2",
                self.swarm_size
            )));
        }
        if self.max_iterations < 1 {
            return Err(Error::InvalidArgument("at least one iteration is required".into()));
        }
        Ok(())
    }

    /// Inertia of the linear schedule at 1-based `iteration`.
    pub fn linear_weight(&self, iteration: usize) -> f64 {
        if self.max_iterations <= 1 {
            return self.w_max();
        }
        let frac = (iteration - 1) as f64 / (self.max_iterations - 1) as f64;
        self.w_max() - (self.w_max() - self.w_min()) * frac
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub fitness: usize,
    pub pbest_position: Vec<f64>,
    pub pbest_fitness: usize,
}

impl Particle {
    /// A particle at rest at `position`, which is also its personal best.
    pub fn at_rest(position: Vec<f64>, fitness: usize) -> Self {
        Self {
            velocity: vec![0.0; position.len()],
            pbest_position: position.clone(),
            position,
            fitness,
            pbest_fitness: fitness,
        }
    }
}

/// Rounds to the nearest level (ties toward zero) and clamps to `0..v`.
pub fn discretize_into(position: &[f64], levels: &[usize], out: &mut [usize]) {
    for ((slot, &x), &v) in out.iter_mut().zip(position).zip(levels) {
        let top = (v - 1) as f64;
        *slot = (x - 0.5).ceil().clamp(0.0, top) as usize;
    }
}

pub fn discretize(position: &[f64], levels: &[usize]) -> TestCase {
    let mut values = vec![0; position.len()];
    discretize_into(position, levels, &mut values);
    TestCase::new(values)
}

/// Coverage count of the test case `position` rounds to.
pub fn fitness(position: &[f64], store: &TupleStore) -> usize {
    store.coverage_count(&discretize(position, store.levels()))
}

/// `w * v + c1 * r1 * (pbest - x) + c2 * r2 * (gbest - x)` with the given
/// draws, clamped per dimension to `[-(v_i - 1), v_i - 1]`.
#[allow(clippy::too_many_arguments)]
pub fn velocity_step(
    particle: &mut Particle,
    gbest: &[f64],
    w: f64,
    c1: f64,
    c2: f64,
    r1: f64,
    r2: f64,
    levels: &[usize],
) {
    for d in 0..particle.velocity.len() {
        let x = particle.position[d];
        let vmax = (levels[d] - 1) as f64;
        let v = w * particle.velocity[d]
            + c1 * r1 * (particle.pbest_position[d] - x)
            + c2 * r2 * (gbest[d] - x);
        particle.velocity[d] = v.clamp(-vmax, vmax);
    }
}

/// Velocity update drawing one cognitive and then one social factor from
/// `rng`, both uniform on `[0, 1)`, shared across all dimensions.
pub fn velocity_update<R: Rng + ?Sized>(
    particle: &mut Particle,
    gbest: &[f64],
    w: f64,
    c1: f64,
    c2: f64,
    levels: &[usize],
    rng: &mut R,
) {
    let r1: f64 = rng.gen();
    let r2: f64 = rng.gen();
    velocity_step(particle, gbest, w, c1, c2, r1, r2, levels);
}

pub fn position_update(particle: &mut Particle, levels: &[usize]) {
    for ((x, &v), &lv) in particle.position.iter_mut().zip(&particle.velocity).zip(levels) {
        *x = (*x + v).clamp(0.0, (lv - 1) as f64);
    }
}

/// Swarm-wide summary of one iteration. Measures are averaged over the
/// particles; `w_selection` over the inferences where a rule fired.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub gbest_fitness: usize,
    pub ncf: f64,
    pub d1: f64,
    pub d2: f64,
    pub nor_nubf: Option<f64>,
    pub w_selection: Option<f64>,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestLog {
    /// Tuples newly covered by the accepted case.
    pub gain: usize,
    /// The swarm found nothing new and the case was built from an
    /// uncovered tuple instead.
    pub repaired: bool,
    pub iterations: Vec<IterationRecord>,
}

#[derive(Debug, Clone)]
pub struct OneTest {
    pub case: TestCase,
    pub log: TestLog,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub suite: TestSuite,
    pub tests: Vec<TestLog>,
    pub seed: u64,
    pub variant: Variant,
}

impl RunResult {
    pub fn size(&self) -> usize {
        self.suite.len()
    }
}

fn random_position<R: Rng + ?Sized>(levels: &[usize], rng: &mut R) -> Vec<f64> {
    levels
        .iter()
        .map(|&v| if v > 1 { rng.gen_range(0.0..=(v - 1) as f64) } else { 0.0 })
        .collect()
}

/// Runs one swarm against `store` and returns the best case found. The
/// store is not modified.
pub fn generate_one_test<R: Rng + ?Sized>(
    store: &TupleStore,
    params: &SwarmParams,
    controller: &mut FisController,
    rng: &mut R,
) -> Result<OneTest> {
    if store.is_empty() {
        return Err(Error::EmptyStore);
    }
    params.validate()?;
    let levels = store.levels();
    let k = levels.len();
    let ceiling = store.entry_count();
    let diag = max_distance(levels);
    let pct = |a: &[f64], b: &[f64]| -> Result<f64> {
        if diag > 0.0 {
            compute_distance_pct(a, b, diag)
        } else {
            Ok(0.0)
        }
    };
    let mut scratch = vec![0usize; k];
    let mut eval = |pos: &[f64]| {
        discretize_into(pos, levels, &mut scratch);
        store.count_values(&scratch)
    };

    controller.reset();
    let mut swarm: Vec<Particle> = (0..params.swarm_size)
        .map(|_| {
            let pos = random_position(levels, rng);
            let f = eval(&pos);
            Particle::at_rest(pos, f)
        })
        .collect();
    let mut best = 0;
    for (i, p) in swarm.iter().enumerate() {
        if p.pbest_fitness > swarm[best].pbest_fitness {
            best = i;
        }
    }
    let mut gbest = swarm[best].pbest_position.clone();
    let mut gbest_fitness = swarm[best].pbest_fitness;

    let mut records = Vec::new();
    let mut unchanged = 0;
    for iteration in 1..=params.max_iterations {
        if gbest_fitness == ceiling {
            // Nothing can beat covering every remaining entry.
            break;
        }
        let mut improved = false;
        let (mut sum_ncf, mut sum_d1, mut sum_d2, mut sum_w) = (0.0, 0.0, 0.0, 0.0);
        let (mut sum_sel, mut fired) = (0.0, 0usize);
        for p in swarm.iter_mut() {
            let ncf = compute_ncf(p.fitness, 0, ceiling)?;
            let d1 = pct(&p.position, &p.pbest_position)?;
            let d2 = pct(&p.position, &gbest)?;
            let w = match params.variant {
                Variant::Fpso => {
                    let out = controller.infer(ncf, d1, d2)?;
                    if let Some(sel) = out.w_selection {
                        sum_sel += sel;
                        fired += 1;
                    }
                    out.w
                }
                Variant::Cpso => params.linear_weight(iteration),
            };
            sum_ncf += ncf;
            sum_d1 += d1;
            sum_d2 += d2;
            sum_w += w;

            velocity_update(p, &gbest, w, params.c1, params.c2, levels, rng);
            position_update(p, levels);
            p.fitness = eval(&p.position);
            if p.fitness > p.pbest_fitness {
                p.pbest_fitness = p.fitness;
                p.pbest_position.copy_from_slice(&p.position);
            }
            if p.pbest_fitness > gbest_fitness {
                gbest_fitness = p.pbest_fitness;
                gbest.copy_from_slice(&p.pbest_position);
                improved = true;
            }
        }
        unchanged = if improved { 0 } else { unchanged + 1 };
        let n = params.swarm_size as f64;
        let nor_nubf = compute_nor_nubf(unchanged, params.max_iterations)?;
        log::trace!(
            "iteration {iteration}: gbest={gbest_fitness} nor_nubf={nor_nubf:?} w={:.4}",
            sum_w / n
        );
        records.push(IterationRecord {
            iteration,
            gbest_fitness,
            ncf: sum_ncf / n,
            d1: sum_d1 / n,
            d2: sum_d2 / n,
            nor_nubf,
            w_selection: (fired > 0).then(|| sum_sel / fired as f64),
            w: sum_w / n,
        });
    }

    let mut case = discretize(&gbest, levels);
    let mut gain = store.coverage_count(&case);
    let repaired = gain == 0;
    if repaired {
        case = repair(store, rng)?;
        gain = store.coverage_count(&case);
        debug_assert!(gain > 0);
    }
    Ok(OneTest {
        case,
        log: TestLog {
            gain,
            repaired,
            iterations: records,
        },
    })
}

/// A case built around one uncovered tuple of a randomly chosen entry,
/// with every other parameter drawn uniformly.
fn repair<R: Rng + ?Sized>(store: &TupleStore, rng: &mut R) -> Result<TestCase> {
    let entry = rng.gen_range(0..store.entry_count());
    let (params, values) = store.uncovered_at(entry).ok_or(Error::EmptyStore)?;
    let mut case: Vec<usize> = store.levels().iter().map(|&v| rng.gen_range(0..v)).collect();
    for (&p, &x) in params.iter().zip(&values) {
        case[p] = x;
    }
    Ok(TestCase::new(case))
}

/// Builds a complete suite one test at a time, then checks it with the
/// independent coverage oracle.
pub fn generate_suite(model: &SutModel, config: &VscaConfig, params: &SwarmParams) -> Result<RunResult> {
    let config = validate_config(model, config.clone())?.config;
    params.validate()?;
    let mut store = TupleStore::build(model, &config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut controller = FisController::new(params.fis);
    let mut suite = TestSuite::new(model.clone(), config);
    let mut tests = Vec::new();

    while !store.is_empty() {
        let one = generate_one_test(&store, params, &mut controller, &mut rng)?;
        let removed = store.remove_covered(&one.case);
        debug_assert_eq!(removed, one.log.gain);
        log::debug!(
            "test {}: covered {removed}, {} left{}",
            suite.len() + 1,
            store.remaining_count(),
            if one.log.repaired { " (repaired)" } else { "" }
        );
        suite.cases.push(one.case);
        tests.push(one.log);
    }

    let report = verify_suite(&suite);
    if !report.is_complete() {
        return Err(Error::CoverageGap {
            missing: report.missing.len(),
            required: report.required,
        });
    }
    Ok(RunResult {
        suite,
        tests,
        seed: params.seed,
        variant: params.variant,
    })
}
