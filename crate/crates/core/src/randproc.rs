//! Random processes whose realizations are trajectories of `φ`.
//!
//! At each time `t_i` of a finite grid the process takes one of `m` labeled
//! alternatives with fixed probabilities `p₁..p_m`, independently across
//! times. Labeling the alternative by the first symbol of an infinite index
//! (deeper symbols free) turns the per-time state sets into modules, and a
//! sampled path becomes the label of a point in module 1: step `i` of the
//! path is the first symbol of `φⁱ` of that point.
//!
//! Sampling uses ChaCha8 seeded with the run seed; realization `r` reads
//! stream `r`, so samples are reproducible regardless of how they are
//! scheduled across threads.

use std::collections::BTreeSet;
use std::ops::RangeInclusive;
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::dynamics::{phi_n, point_value, DynamicsError, ModularPoint};
use crate::structure::{
    set_distance, Budget, ModularStructure, ModuleSpace, SetDescriptor, StructureError,
};
use crate::symseq::{Alphabet, SeqError, Symbol, SymbolSeq, DEFAULT_TOLERANCE};

const PROBABILITY_SUM_TOL: f64 = 1e-12;
const LABEL_DEPTH: usize = 64;

/// Points per half-open function interval in the discrete-time example.
pub const INTERVAL_GRID_POINTS: usize = 101;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProcessError {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("invalid probabilities: {0}")]
    InvalidProbabilities(String),
    #[error("function ranges overlap (closest gap {gap})")]
    RangesOverlap { gap: f64 },
    #[error("state at step {step} is not a single point or single sampled function")]
    NotPathValued { step: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Sequence(#[from] SeqError),
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// Finite strictly increasing time grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self, ProcessError> {
        if times.is_empty() {
            return Err(ProcessError::InvalidGrid("grid is empty".into()));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(ProcessError::InvalidGrid("non-finite time".into()));
        }
        if let Some(w) = times.windows(2).find(|w| w[0] >= w[1]) {
            return Err(ProcessError::InvalidGrid(format!(
                "{} is not followed by a larger time ({})",
                w[0], w[1]
            )));
        }
        Ok(TimeGrid { times })
    }

    /// `t_i = i / denom` for `i` in `range`, each computed by one division.
    pub fn rational(range: RangeInclusive<usize>, denom: f64) -> Result<Self, ProcessError> {
        TimeGrid::new(range.map(|i| i as f64 / denom).collect())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

pub type StateFn = dyn Fn(usize, f64, Symbol) -> SetDescriptor + Send + Sync;

/// `m` alternatives per time with time-independent probabilities.
#[derive(Clone)]
pub struct RandomProcessSpec {
    alphabet: Alphabet,
    probabilities: Vec<f64>,
    state_at: Arc<StateFn>,
}

impl std::fmt::Debug for RandomProcessSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RandomProcessSpec")
            .field("alphabet", &self.alphabet.size())
            .field("probabilities", &self.probabilities)
            .finish()
    }
}

impl RandomProcessSpec {
    /// `state_at(i, t_i, a)` is the alternative labeled `a` at grid step `i`.
    pub fn new<F>(
        alphabet: Alphabet,
        probabilities: Vec<f64>,
        state_at: F,
    ) -> Result<Self, ProcessError>
    where
        F: Fn(usize, f64, Symbol) -> SetDescriptor + Send + Sync + 'static,
    {
        validate_probabilities(alphabet, &probabilities)?;
        Ok(RandomProcessSpec {
            alphabet,
            probabilities,
            state_at: Arc::new(state_at),
        })
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn state(&self, step: usize, t: f64, symbol: Symbol) -> SetDescriptor {
        (self.state_at)(step, t, symbol)
    }
}

pub fn validate_probabilities(alphabet: Alphabet, p: &[f64]) -> Result<(), ProcessError> {
    if p.len() != alphabet.size() {
        return Err(ProcessError::InvalidProbabilities(format!(
            "{} values for {} symbols",
            p.len(),
            alphabet.size()
        )));
    }
    if p.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(ProcessError::InvalidProbabilities(
            "every probability must be positive".into(),
        ));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > PROBABILITY_SUM_TOL {
        return Err(ProcessError::InvalidProbabilities(format!(
            "probabilities sum to {sum}"
        )));
    }
    Ok(())
}

/// One sampled path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Realization {
    pub times: Vec<f64>,
    pub symbols: Vec<Symbol>,
    pub values: Vec<SetDescriptor>,
    pub seed: u64,
    pub stream: u64,
}

impl Realization {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// Realization on stream 0 of `seed`.
pub fn sample_realization(
    spec: &RandomProcessSpec,
    grid: &TimeGrid,
    seed: u64,
    length: usize,
) -> Result<Realization, ProcessError> {
    sample_stream(spec, grid, seed, 0, length)
}

/// Realization number `stream` of the run seeded with `seed`.
pub fn sample_stream(
    spec: &RandomProcessSpec,
    grid: &TimeGrid,
    seed: u64,
    stream: u64,
    length: usize,
) -> Result<Realization, ProcessError> {
    if length > grid.len() {
        return Err(ProcessError::InvalidArgument(format!(
            "length {length} exceeds grid of {} times",
            grid.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let dist = WeightedIndex::new(&spec.probabilities)
        .map_err(|e| ProcessError::InvalidProbabilities(e.to_string()))?;
    let symbols: Vec<Symbol> = (0..length)
        .map(|_| dist.sample(&mut rng) as Symbol + 1)
        .collect();
    let times = grid.times[..length].to_vec();
    let values = symbols
        .iter()
        .enumerate()
        .map(|(i, &a)| spec.state(i, times[i], a))
        .collect();
    Ok(Realization {
        times,
        symbols,
        values,
        seed,
        stream,
    })
}

/// The realization's symbols as a finite label in module `j`.
pub fn realization_to_point(
    realization: &Realization,
    j: usize,
) -> Result<ModularPoint, ProcessError> {
    let alphabet = match realization.symbols.iter().max() {
        Some(&m) if m >= 2 => Alphabet::new(m as usize)?,
        _ => Alphabet::new(2)?,
    };
    realization_to_point_in(realization, j, alphabet)
}

pub fn realization_to_point_in(
    realization: &Realization,
    j: usize,
    alphabet: Alphabet,
) -> Result<ModularPoint, ProcessError> {
    Ok(ModularPoint::new(
        j,
        SymbolSeq::finite(alphabet, realization.symbols.clone())?,
    )?)
}

/// A process together with the modular structure its labeling induces.
#[derive(Clone, Debug)]
pub struct ProcessModel {
    pub name: String,
    pub spec: RandomProcessSpec,
    pub structure: ModularStructure,
    pub grid: TimeGrid,
}

/// Module `j` holds the alternatives at step `j − 1`; the first label symbol
/// picks the alternative and deeper symbols are free.
fn labeled_structure<T>(
    name: &str,
    spec: &RandomProcessSpec,
    time_of: T,
    range_hint: RangeInclusive<usize>,
) -> ModularStructure
where
    T: Fn(usize) -> Option<f64> + Send + Sync + 'static,
{
    let spec = spec.clone();
    let alphabet = spec.alphabet();
    ModularStructure::new(name, alphabet, range_hint, move |j| {
        let step = j.checked_sub(1)?;
        let t = time_of(step)?;
        let spec = spec.clone();
        Some(ModuleSpace::new(
            j,
            alphabet,
            LABEL_DEPTH,
            move |prefix: &[Symbol]| match prefix.first() {
                Some(&a) => spec.state(step, t, a),
                None => union_all(alphabet.symbols().map(|a| spec.state(step, t, a))),
            },
        ))
    })
}

/// Union of point sets or of function sets on one grid.
fn union_all(parts: impl Iterator<Item = SetDescriptor>) -> SetDescriptor {
    let mut acc: Option<SetDescriptor> = None;
    for part in parts {
        acc = Some(match (acc, part) {
            (None, p) => p,
            (Some(SetDescriptor::Points(mut a)), SetDescriptor::Points(b)) => {
                for q in b {
                    if !a.contains(&q) {
                        a.push(q);
                    }
                }
                SetDescriptor::Points(a)
            }
            (
                Some(SetDescriptor::GridFunctions { grid, mut values }),
                SetDescriptor::GridFunctions { values: more, .. },
            ) => {
                for v in more {
                    if !values.contains(&v) {
                        values.push(v);
                    }
                }
                SetDescriptor::GridFunctions { grid, values }
            }
            (
                Some(SetDescriptor::Interval { lo, hi }),
                SetDescriptor::Interval { lo: c, hi: d },
            ) => SetDescriptor::Interval {
                lo: lo.min(c),
                hi: hi.max(d),
            },
            (Some(a), _) => a,
        });
    }
    acc.expect("alphabet has at least two symbols")
}

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// `X(t) = f_a(t)` with probability `p_a`; the ranges of the `f_a` over the
/// grid must be pairwise disjoint.
///
/// Returns the model and the smallest gap between distinct ranges.
pub fn example1_structure(
    functions: Vec<ScalarFn>,
    probabilities: Vec<f64>,
    grid: TimeGrid,
) -> Result<(ProcessModel, f64), ProcessError> {
    let alphabet = Alphabet::new(functions.len())?;
    let gap = range_gap(&functions, &grid);
    if gap <= DEFAULT_TOLERANCE {
        return Err(ProcessError::RangesOverlap { gap });
    }
    let fs = functions.clone();
    let spec = RandomProcessSpec::new(alphabet, probabilities, move |_, t, a| {
        SetDescriptor::point(fs[a as usize - 1](t))
    })?;
    let times = grid.times.clone();
    let structure = labeled_structure(
        "function-family",
        &spec,
        move |i| times.get(i).copied(),
        1..=grid.len(),
    );
    Ok((
        ProcessModel {
            name: "function-family".into(),
            spec,
            structure,
            grid,
        },
        gap,
    ))
}

/// Smallest `|f_a(s) − f_b(t)|` over `a ≠ b` and grid times `s, t`.
fn range_gap(functions: &[ScalarFn], grid: &TimeGrid) -> f64 {
    let mut tagged: Vec<(f64, usize)> = functions
        .iter()
        .enumerate()
        .flat_map(|(a, f)| grid.times.iter().map(move |&t| (f(t), a)))
        .collect();
    tagged.sort_by(|x, y| x.0.total_cmp(&y.0));
    tagged
        .windows(2)
        .filter(|w| w[0].1 != w[1].1)
        .map(|w| w[1].0 - w[0].0)
        .fold(f64::INFINITY, f64::min)
}

/// `X(t) ∈ {t, −t}` with probability ½ each, on `t_i = i/100`, `i = 100..=400`.
///
/// Module `j` holds `t = (j + 99)/100`; modules past the grid follow the
/// same formula.
pub fn example2_structure() -> ProcessModel {
    let alphabet = Alphabet::new(2).expect("two symbols");
    let spec = RandomProcessSpec::new(alphabet, vec![0.5, 0.5], |_, t, a| {
        SetDescriptor::point(if a == 1 { t } else { -t })
    })
    .expect("fair coin");
    let grid = TimeGrid::rational(100..=400, 100.0).expect("increasing grid");
    let structure = labeled_structure(
        "plus-minus-t",
        &spec,
        |i| Some((i + 100) as f64 / 100.0),
        1..=grid.len(),
    );
    ProcessModel {
        name: "plus-minus-t".into(),
        spec,
        structure,
        grid,
    }
}

/// Grid of [`INTERVAL_GRID_POINTS`] points on `[i/10, (i+1)/10)`, stopping
/// one gap short of the right end.
pub fn interval_grid(i: usize) -> Vec<f64> {
    let n = INTERVAL_GRID_POINTS;
    (0..n)
        .map(|k| (i * n + k) as f64 / (10 * n) as f64)
        .collect()
}

/// Discrete time `i` in `i_range`: `X(i)` is `f_i(t) = t` or `g_i(t) = −t`
/// on `[i/10, (i+1)/10)` with probability ½ each, under the sup metric.
///
/// Step `k` of the grid is `i = i_range.start() + k`, recorded at time
/// `i/10`. Modules past the range follow the same formula.
pub fn example3_structure(i_range: RangeInclusive<usize>) -> Result<ProcessModel, ProcessError> {
    if i_range.is_empty() || *i_range.start() == 0 {
        return Err(ProcessError::InvalidArgument(
            "interval index range must be nonempty and start at 1 or more".into(),
        ));
    }
    let alphabet = Alphabet::new(2)?;
    let first = *i_range.start();
    let spec = RandomProcessSpec::new(alphabet, vec![0.5, 0.5], move |step, _, a| {
        let grid = interval_grid(first + step);
        let values = grid.iter().map(|&t| if a == 1 { t } else { -t }).collect();
        SetDescriptor::grid_function(grid, values)
    })?;
    let grid = TimeGrid::rational(i_range.clone(), 10.0)?;
    let structure = labeled_structure(
        "interval-functions",
        &spec,
        move |k| Some((first + k) as f64 / 10.0),
        1..=grid.len(),
    );
    Ok(ProcessModel {
        name: "interval-functions".into(),
        spec,
        structure,
        grid,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymbolFrequency {
    pub symbol: Symbol,
    pub count: usize,
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub samples: usize,
    pub prefix_len: usize,
    pub seed: u64,
    pub valid_prefixes: usize,
    pub valid_prefix_fraction: f64,
    /// Distinct prefixes observed.
    pub coverage: usize,
    /// `m^prefix_len`.
    pub possible_prefixes: usize,
    pub frequency_table: Vec<SymbolFrequency>,
}

/// Samples `n_samples` prefixes of length `prefix_len` and checks that each
/// one, read as a label in module 1, is a trajectory of `φ`: the depth-1
/// cell of `φˢ` equals the sampled state at step `s`.
pub fn equivalence_report(
    model: &ProcessModel,
    n_samples: usize,
    prefix_len: usize,
    seed: u64,
    budget: Budget,
) -> Result<EquivalenceReport, ProcessError> {
    let alphabet = model.spec.alphabet();
    let possible = alphabet.word_count(prefix_len);
    if possible > budget.max_prefixes {
        return Err(StructureError::BudgetExceeded {
            required: possible,
            limit: budget.max_prefixes,
        }
        .into());
    }
    if prefix_len == 0 || prefix_len > model.grid.len() {
        return Err(ProcessError::InvalidArgument(format!(
            "prefix length must lie in 1..={}",
            model.grid.len()
        )));
    }
    let outcomes = (0..n_samples as u64)
        .into_par_iter()
        .map(|r| -> Result<(Vec<Symbol>, bool), ProcessError> {
            let real = sample_stream(&model.spec, &model.grid, seed, r, prefix_len)?;
            let point = realization_to_point_in(&real, 1, alphabet)?;
            let mut valid = true;
            for (s, value) in real.values.iter().enumerate() {
                let cell = point_value(&model.structure, &phi_n(&point, s)?, 1)?;
                if !cell.same_set(value, 0.0)? {
                    valid = false;
                    break;
                }
            }
            Ok((real.symbols, valid))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut counts = vec![0usize; alphabet.size()];
    let mut seen = BTreeSet::new();
    let mut valid_prefixes = 0;
    for (symbols, valid) in outcomes {
        for &a in &symbols {
            counts[a as usize - 1] += 1;
        }
        valid_prefixes += usize::from(valid);
        seen.insert(symbols);
    }
    let draws = n_samples * prefix_len;
    let ratio = |num: usize, den: usize| {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let frequency_table = counts
        .iter()
        .enumerate()
        .map(|(i, &count)| SymbolFrequency {
            symbol: i as Symbol + 1,
            count,
            frequency: ratio(count, draws),
        })
        .collect();
    Ok(EquivalenceReport {
        samples: n_samples,
        prefix_len,
        seed,
        valid_prefixes,
        valid_prefix_fraction: ratio(valid_prefixes, n_samples),
        coverage: seen.len(),
        possible_prefixes: possible,
        frequency_table,
    })
}

/// How a realization becomes a `(t, x)` polyline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PathMode {
    /// One vertex per time for point states; every grid sample for
    /// function states.
    #[default]
    Vertices,
    /// Point states held constant on `[t_i, t_{i+1})`: two vertices per
    /// segment. Function states are emitted as in `Vertices`.
    Step,
}

/// Polyline vertices of a realization.
pub fn path_vertices(
    realization: &Realization,
    mode: PathMode,
) -> Result<Vec<(f64, f64)>, ProcessError> {
    let n = realization.len();
    let mut out = Vec::new();
    for (i, value) in realization.values.iter().enumerate() {
        let t = realization.times[i];
        match value {
            SetDescriptor::Points(pts) if pts.len() == 1 && pts[0].len() == 1 => {
                let x = pts[0][0];
                match mode {
                    PathMode::Vertices => out.push((t, x)),
                    PathMode::Step if n == 1 => out.push((t, x)),
                    PathMode::Step if i + 1 < n => {
                        out.push((t, x));
                        out.push((realization.times[i + 1], x));
                    }
                    PathMode::Step => {}
                }
            }
            SetDescriptor::GridFunctions { grid, values } if values.len() == 1 => {
                out.extend(grid.iter().copied().zip(values[0].iter().copied()));
            }
            _ => return Err(ProcessError::NotPathValued { step: i }),
        }
    }
    Ok(out)
}

/// CSV with header `t,x` and one row per vertex.
pub fn emit_path_csv(realization: &Realization, mode: PathMode) -> Result<String, ProcessError> {
    Ok(crate::render::path_csv(&path_vertices(realization, mode)?))
}

/// Whether a parsed `(t, x)` path is consistent with the process: every
/// vertex must equal an alternative of the step whose time (or function
/// grid) it belongs to.
pub fn path_matches_spec(
    model: &ProcessModel,
    realization: &Realization,
    rows: &[(f64, f64)],
    mode: PathMode,
) -> Result<bool, ProcessError> {
    let expected = path_vertices(realization, mode)?;
    if expected.len() != rows.len() {
        return Ok(false);
    }
    for (i, value) in realization.values.iter().enumerate() {
        let state = model
            .spec
            .state(i, realization.times[i], realization.symbols[i]);
        if set_distance(&state, value)? != 0.0 || !state.same_set(value, 0.0)? {
            return Ok(false);
        }
    }
    Ok(expected.iter().zip(rows).all(|(a, b)| a == b))
}
