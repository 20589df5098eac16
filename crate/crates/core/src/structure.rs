//! Metric-space modules with prefix-labeled cells.
//!
//! A [`ModuleSpace`] maps every finite prefix `i₁…iₙ` to the cell of all
//! elements whose labels extend it. A [`ModularStructure`] is a factory for
//! the countable family of modules `j = 1, 2, …`. The certifiers here check
//! nesting, the diameter condition, the separation condition and the
//! resulting (strong) modular chaotic structure on a finite range of modules
//! and depths. They report finite facts; nothing asymptotic is claimed.

use std::fmt;
use std::ops::RangeInclusive;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::symseq::{Alphabet, SeqError, Symbol, DEFAULT_TOLERANCE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StructureError {
    #[error("prefix length {requested} exceeds supported depth {max_depth}")]
    DepthExceeded { requested: usize, max_depth: usize },
    #[error(transparent)]
    Sequence(#[from] SeqError),
    #[error("descriptors live in different spaces: {0}")]
    IncompatibleDescriptors(String),
    #[error("invalid set descriptor: {0}")]
    InvalidDescriptor(String),
    #[error("enumeration needs {required} prefixes, budget allows {limit}")]
    BudgetExceeded { required: usize, limit: usize },
    #[error("module {0} is not available from this structure")]
    ModuleUnavailable(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// A bounded set in some metric space.
///
/// * `Points`: finitely many points of ℝ^d with the Euclidean metric.
/// * `Interval`: a closed real interval.
/// * `GridFunctions`: finitely many real functions sampled on one shared
///   grid, with the sup metric over the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetDescriptor {
    Points(Vec<Vec<f64>>),
    Interval {
        lo: f64,
        hi: f64,
    },
    GridFunctions {
        grid: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
}

impl SetDescriptor {
    /// Points on the real line.
    pub fn scalars(xs: &[f64]) -> Self {
        SetDescriptor::Points(xs.iter().map(|&x| vec![x]).collect())
    }

    pub fn point(x: f64) -> Self {
        SetDescriptor::Points(vec![vec![x]])
    }

    pub fn interval(lo: f64, hi: f64) -> Self {
        SetDescriptor::Interval { lo, hi }
    }

    pub fn grid_function(grid: Vec<f64>, values: Vec<f64>) -> Self {
        SetDescriptor::GridFunctions {
            grid,
            values: vec![values],
        }
    }

    pub fn validate(&self) -> Result<(), StructureError> {
        let bad = |msg: &str| Err(StructureError::InvalidDescriptor(msg.to_string()));
        match self {
            SetDescriptor::Points(pts) => {
                let Some(first) = pts.first() else {
                    return bad("point set is empty");
                };
                if first.is_empty() {
                    return bad("points must have dimension ≥ 1");
                }
                if pts.iter().any(|p| p.len() != first.len()) {
                    return bad("points have mixed dimensions");
                }
                if pts.iter().flatten().any(|x| !x.is_finite()) {
                    return bad("non-finite coordinate");
                }
            }
            SetDescriptor::Interval { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                    return bad("interval needs finite lo ≤ hi");
                }
            }
            SetDescriptor::GridFunctions { grid, values } => {
                if grid.is_empty() || values.is_empty() {
                    return bad("grid functions need a nonempty grid and at least one function");
                }
                if grid.windows(2).any(|w| w[0] >= w[1]) {
                    return bad("grid must be strictly increasing");
                }
                if values.iter().any(|v| v.len() != grid.len()) {
                    return bad("every function needs one value per grid point");
                }
            }
        }
        Ok(())
    }

    /// Largest pairwise distance.
    pub fn diameter(&self) -> f64 {
        match self {
            SetDescriptor::Points(pts) => max_pairwise(pts, |a, b| euclid(a, b)),
            SetDescriptor::Interval { lo, hi } => hi - lo,
            SetDescriptor::GridFunctions { values, .. } => {
                max_pairwise(values, |a, b| sup_gap(a, b))
            }
        }
    }

    /// Number of elements when finite, `None` for a nondegenerate interval.
    pub fn cardinality(&self) -> Option<usize> {
        match self {
            SetDescriptor::Points(pts) => Some(pts.len()),
            SetDescriptor::Interval { lo, hi } => (lo == hi).then_some(1),
            SetDescriptor::GridFunctions { values, .. } => Some(values.len()),
        }
    }

    /// Whether `other ⊆ self`, with elements matched up to `tol`.
    pub fn contains(&self, other: &SetDescriptor, tol: f64) -> Result<bool, StructureError> {
        use SetDescriptor::*;
        Ok(match (self, other) {
            (Points(outer), Points(inner)) => {
                same_dim(outer, inner)?;
                inner
                    .iter()
                    .all(|p| outer.iter().any(|q| euclid(p, q) <= tol))
            }
            (Interval { lo, hi }, Points(inner)) => {
                one_dim(inner)?;
                inner.iter().all(|p| p[0] >= lo - tol && p[0] <= hi + tol)
            }
            (Interval { lo, hi }, Interval { lo: a, hi: b }) => *a >= lo - tol && *b <= hi + tol,
            (Points(outer), Interval { lo, hi }) => {
                one_dim(outer)?;
                hi - lo <= tol && outer.iter().any(|p| (p[0] - lo).abs() <= tol)
            }
            (
                GridFunctions {
                    grid: g1,
                    values: outer,
                },
                GridFunctions {
                    grid: g2,
                    values: inner,
                },
            ) => {
                same_grid(g1, g2, tol)?;
                inner
                    .iter()
                    .all(|f| outer.iter().any(|g| sup_gap(f, g) <= tol))
            }
            _ => return Err(incompatible(self, other)),
        })
    }

    /// Mutual containment.
    pub fn same_set(&self, other: &SetDescriptor, tol: f64) -> Result<bool, StructureError> {
        Ok(self.contains(other, tol)? && other.contains(self, tol)?)
    }

    fn variant_name(&self) -> &'static str {
        match self {
            SetDescriptor::Points(_) => "points",
            SetDescriptor::Interval { .. } => "interval",
            SetDescriptor::GridFunctions { .. } => "grid_functions",
        }
    }
}

fn incompatible(a: &SetDescriptor, b: &SetDescriptor) -> StructureError {
    StructureError::IncompatibleDescriptors(format!("{} vs {}", a.variant_name(), b.variant_name()))
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn sup_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn max_pairwise<T>(items: &[T], dist: impl Fn(&T, &T) -> f64) -> f64 {
    let mut best = 0.0f64;
    for (i, a) in items.iter().enumerate() {
        for b in &items[i + 1..] {
            best = best.max(dist(a, b));
        }
    }
    best
}

fn min_pairwise<T>(xs: &[T], ys: &[T], dist: impl Fn(&T, &T) -> f64) -> f64 {
    xs.iter()
        .flat_map(|a| ys.iter().map(|b| dist(a, b)))
        .fold(f64::INFINITY, f64::min)
}

fn same_dim(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<(), StructureError> {
    match (a.first(), b.first()) {
        (Some(p), Some(q)) if p.len() == q.len() => Ok(()),
        _ => Err(StructureError::IncompatibleDescriptors(
            "point dimensions differ".into(),
        )),
    }
}

fn one_dim(pts: &[Vec<f64>]) -> Result<(), StructureError> {
    if pts.iter().all(|p| p.len() == 1) {
        Ok(())
    } else {
        Err(StructureError::IncompatibleDescriptors(
            "interval compared with non-scalar points".into(),
        ))
    }
}

fn same_grid(a: &[f64], b: &[f64], tol: f64) -> Result<(), StructureError> {
    if a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol) {
        Ok(())
    } else {
        Err(StructureError::IncompatibleDescriptors(
            "function grids differ".into(),
        ))
    }
}

fn interval_gap(a_lo: f64, a_hi: f64, b_lo: f64, b_hi: f64) -> f64 {
    (b_lo - a_hi).max(a_lo - b_hi).max(0.0)
}

/// `δ(A, B) = inf { d(x, y) : x ∈ A, y ∈ B }`.
pub fn set_distance(a: &SetDescriptor, b: &SetDescriptor) -> Result<f64, StructureError> {
    use SetDescriptor::*;
    Ok(match (a, b) {
        (Points(xs), Points(ys)) => {
            same_dim(xs, ys)?;
            min_pairwise(xs, ys, |p, q| euclid(p, q))
        }
        (Interval { lo, hi }, Interval { lo: c, hi: d }) => interval_gap(*lo, *hi, *c, *d),
        (Interval { lo, hi }, Points(pts)) | (Points(pts), Interval { lo, hi }) => {
            one_dim(pts)?;
            pts.iter()
                .map(|p| interval_gap(*lo, *hi, p[0], p[0]))
                .fold(f64::INFINITY, f64::min)
        }
        (
            GridFunctions {
                grid: g1,
                values: fs,
            },
            GridFunctions {
                grid: g2,
                values: gs,
            },
        ) => {
            same_grid(g1, g2, DEFAULT_TOLERANCE)?;
            min_pairwise(fs, gs, |f, g| sup_gap(f, g))
        }
        _ => return Err(incompatible(a, b)),
    })
}

/// Limits on exhaustive prefix enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub max_prefixes: usize,
}

impl Default for Budget {
    /// Degree 8 over two symbols.
    fn default() -> Self {
        Budget { max_prefixes: 256 }
    }
}

impl Budget {
    pub fn prefixes(
        self,
        alphabet: Alphabet,
        len: usize,
    ) -> Result<Vec<Vec<Symbol>>, StructureError> {
        let required = alphabet.word_count(len);
        if required > self.max_prefixes {
            return Err(StructureError::BudgetExceeded {
                required,
                limit: self.max_prefixes,
            });
        }
        Ok(alphabet.words(len))
    }
}

pub type CellFn = dyn Fn(&[Symbol]) -> SetDescriptor + Send + Sync;

/// One module `(F_j, d_j)` with its labeling.
#[derive(Clone)]
pub struct ModuleSpace {
    index: usize,
    alphabet: Alphabet,
    max_depth: usize,
    cells: Arc<CellFn>,
}

impl fmt::Debug for ModuleSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModuleSpace")
            .field("index", &self.index)
            .field("alphabet", &self.alphabet.size())
            .field("max_depth", &self.max_depth)
            .finish()
    }
}

impl ModuleSpace {
    /// `cells(&[])` must be the whole module set.
    pub fn new<F>(index: usize, alphabet: Alphabet, max_depth: usize, cells: F) -> Self
    where
        F: Fn(&[Symbol]) -> SetDescriptor + Send + Sync + 'static,
    {
        ModuleSpace {
            index,
            alphabet,
            max_depth,
            cells: Arc::new(cells),
        }
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    /// The cell `F^j_{prefix}`.
    pub fn cell(&self, prefix: &[Symbol]) -> Result<SetDescriptor, StructureError> {
        if prefix.len() > self.max_depth {
            return Err(StructureError::DepthExceeded {
                requested: prefix.len(),
                max_depth: self.max_depth,
            });
        }
        self.alphabet.check_all(prefix)?;
        let cell = (self.cells)(prefix);
        cell.validate()?;
        Ok(cell)
    }

    pub fn whole(&self) -> Result<SetDescriptor, StructureError> {
        self.cell(&[])
    }

    fn check_depth(&self, depth: usize) -> Result<(), StructureError> {
        if depth > self.max_depth {
            Err(StructureError::DepthExceeded {
                requested: depth,
                max_depth: self.max_depth,
            })
        } else {
            Ok(())
        }
    }

    /// Two labels name the same point when their depth-limited cells are
    /// within `tol` of each other.
    pub fn labels_equivalent(
        &self,
        a: &[Symbol],
        b: &[Symbol],
        tol: f64,
    ) -> Result<bool, StructureError> {
        Ok(set_distance(&self.cell(a)?, &self.cell(b)?)? <= tol)
    }
}

pub type ModuleFactory = dyn Fn(usize) -> Option<ModuleSpace> + Send + Sync;

/// The union of modules `F^j`, `j = 1, 2, …`, produced on demand.
#[derive(Clone)]
pub struct ModularStructure {
    name: String,
    alphabet: Alphabet,
    range_hint: RangeInclusive<usize>,
    factory: Arc<ModuleFactory>,
}

impl fmt::Debug for ModularStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModularStructure")
            .field("name", &self.name)
            .field("alphabet", &self.alphabet.size())
            .field("range_hint", &self.range_hint)
            .finish()
    }
}

impl ModularStructure {
    pub fn new<F>(
        name: impl Into<String>,
        alphabet: Alphabet,
        range_hint: RangeInclusive<usize>,
        factory: F,
    ) -> Self
    where
        F: Fn(usize) -> Option<ModuleSpace> + Send + Sync + 'static,
    {
        ModularStructure {
            name: name.into(),
            alphabet,
            range_hint,
            factory: Arc::new(factory),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn range_hint(&self) -> RangeInclusive<usize> {
        self.range_hint.clone()
    }

    pub fn module(&self, j: usize) -> Result<ModuleSpace, StructureError> {
        if j == 0 {
            return Err(StructureError::ModuleUnavailable(0));
        }
        let module = (self.factory)(j).ok_or(StructureError::ModuleUnavailable(j))?;
        if module.index != j || module.alphabet != self.alphabet {
            return Err(StructureError::InvalidArgument(format!(
                "factory returned module {} over {} symbols for request {j}",
                module.index,
                module.alphabet.size()
            )));
        }
        Ok(module)
    }
}

/// Result of [`check_nesting`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NestingReport {
    pub depth: usize,
    pub ok: bool,
    /// First child prefix (depth-first by level, lexicographic) not contained
    /// in its parent.
    pub violation: Option<Vec<Symbol>>,
}

/// Checks `cell(p·a) ⊆ cell(p)` for every prefix `p` shorter than `depth`.
pub fn check_nesting(
    module: &ModuleSpace,
    depth: usize,
    budget: Budget,
    tol: f64,
) -> Result<NestingReport, StructureError> {
    module.check_depth(depth)?;
    for level in 1..=depth {
        let parents = budget.prefixes(module.alphabet, level - 1)?;
        budget.prefixes(module.alphabet, level)?;
        let found = parents
            .par_iter()
            .map(|parent| -> Result<Option<Vec<Symbol>>, StructureError> {
                let outer = module.cell(parent)?;
                for a in module.alphabet.symbols() {
                    let mut child = parent.clone();
                    child.push(a);
                    if !outer.contains(&module.cell(&child)?, tol)? {
                        return Ok(Some(child));
                    }
                }
                Ok(None)
            })
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(violation) = found.into_iter().flatten().next() {
            return Ok(NestingReport {
                depth,
                ok: false,
                violation: Some(violation),
            });
        }
    }
    Ok(NestingReport {
        depth,
        ok: true,
        violation: None,
    })
}

/// Largest cell diameter at one depth.
pub fn max_cell_diameter(
    module: &ModuleSpace,
    depth: usize,
    budget: Budget,
) -> Result<f64, StructureError> {
    module.check_depth(depth)?;
    let prefixes = budget.prefixes(module.alphabet, depth)?;
    let diams = prefixes
        .par_iter()
        .map(|p| module.cell(p).map(|c| c.diameter()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(diams.into_iter().fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiameterReport {
    /// `table[n]` is the largest diameter over depth-`n` cells.
    pub table: Vec<f64>,
    pub threshold: f64,
    pub nonincreasing: bool,
    pub verdict: bool,
}

fn nonincreasing(values: &[f64], tol: f64) -> bool {
    values.windows(2).all(|w| w[1] <= w[0] + tol)
}

pub fn diameter_report(
    module: &ModuleSpace,
    max_depth_checked: usize,
    threshold: f64,
    budget: Budget,
    tol: f64,
) -> Result<DiameterReport, StructureError> {
    module.check_depth(max_depth_checked)?;
    let table = (0..=max_depth_checked)
        .map(|d| max_cell_diameter(module, d, budget))
        .collect::<Result<Vec<_>, _>>()?;
    let nonincreasing = nonincreasing(&table, tol);
    let verdict = nonincreasing && table[max_depth_checked] <= threshold;
    Ok(DiameterReport {
        table,
        threshold,
        nonincreasing,
        verdict,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparationWitness {
    pub prefix: Vec<Symbol>,
    pub partner: Vec<Symbol>,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparationReport {
    pub degree: usize,
    /// `min_i max_j δ(cell_i, cell_j)` over all depth-`degree` prefixes.
    pub epsilon: f64,
    /// One entry per prefix, in lexicographic order.
    pub witnesses: Vec<SeparationWitness>,
}

impl SeparationReport {
    pub fn witness_for(&self, prefix: &[Symbol]) -> Option<&SeparationWitness> {
        self.witnesses.iter().find(|w| w.prefix == prefix)
    }
}

/// Full scan of the separation condition at one degree.
///
/// Ties for the best partner go to the lexicographically smallest prefix.
pub fn separation_report(
    module: &ModuleSpace,
    degree: usize,
    budget: Budget,
) -> Result<SeparationReport, StructureError> {
    module.check_depth(degree)?;
    let prefixes = budget.prefixes(module.alphabet, degree)?;
    let cells = prefixes
        .par_iter()
        .map(|p| module.cell(p))
        .collect::<Result<Vec<_>, _>>()?;
    let witnesses = (0..prefixes.len())
        .into_par_iter()
        .map(|i| -> Result<SeparationWitness, StructureError> {
            let mut best = (0usize, f64::NEG_INFINITY);
            for (j, other) in cells.iter().enumerate() {
                let d = set_distance(&cells[i], other)?;
                if d > best.1 {
                    best = (j, d);
                }
            }
            Ok(SeparationWitness {
                prefix: prefixes[i].clone(),
                partner: prefixes[best.0].clone(),
                distance: best.1,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let epsilon = witnesses
        .iter()
        .map(|w| w.distance)
        .fold(f64::INFINITY, f64::min);
    Ok(SeparationReport {
        degree,
        epsilon,
        witnesses,
    })
}

/// Parameters shared by both certifiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyParams {
    /// Inclusive module range `[first, last]`.
    pub j_range: (usize, usize),
    /// Depth of the nesting and diameter scans (modular certificate).
    pub depth: usize,
    /// Depths checked by the strong certificate.
    #[serde(default)]
    pub strong_depths: Vec<usize>,
    /// Separation degree `n(j)`, the same for every checked module.
    pub degree: usize,
    pub threshold: f64,
    #[serde(default)]
    pub budget: Budget,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}

impl CertifyParams {
    pub fn new(j_range: (usize, usize), depth: usize, degree: usize) -> Self {
        CertifyParams {
            j_range,
            depth,
            strong_depths: (1..=depth).collect(),
            degree,
            threshold: DEFAULT_TOLERANCE,
            budget: Budget::default(),
            tolerance: DEFAULT_TOLERANCE,
        }
    }

    fn modules(&self, structure: &ModularStructure) -> Result<Vec<usize>, StructureError> {
        let (lo, hi) = self.j_range;
        let hint = structure.range_hint();
        if lo == 0 || lo > hi || !hint.contains(&lo) || !hint.contains(&hi) {
            return Err(StructureError::InvalidArgument(format!(
                "module range {lo}..={hi} is not inside the available range {}..={}",
                hint.start(),
                hint.end()
            )));
        }
        Ok((lo..=hi).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    Modular,
    Strong,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModuleCheck {
    pub j: usize,
    pub nesting: NestingReport,
    pub diameter: DiameterReport,
    pub separation_degree: usize,
    pub separation_epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub kind: CertificateKind,
    pub structure: String,
    pub j_range: (usize, usize),
    pub depths: Vec<usize>,
    pub degree: usize,
    pub threshold: f64,
    pub modules: Vec<ModuleCheck>,
    /// Strong certificate only: `(depth, sup_j max diameter)`.
    pub sup_diameters: Option<Vec<(usize, f64)>>,
    pub eps0: f64,
    pub eps0_module: usize,
    pub verdict: bool,
    pub statement: String,
}

fn check_modules(
    structure: &ModularStructure,
    js: &[usize],
    depths: &[usize],
    params: &CertifyParams,
) -> Result<Vec<ModuleCheck>, StructureError> {
    let nest_depth = depths.iter().copied().max().unwrap_or(0);
    js.par_iter()
        .map(|&j| {
            let module = structure.module(j)?;
            let nesting = check_nesting(&module, nest_depth, params.budget, params.tolerance)?;
            let diameter = if depths.len() == nest_depth + 1
                && depths.iter().enumerate().all(|(i, &d)| i == d)
            {
                diameter_report(
                    &module,
                    nest_depth,
                    params.threshold,
                    params.budget,
                    params.tolerance,
                )?
            } else {
                let table = depths
                    .iter()
                    .map(|&d| max_cell_diameter(&module, d, params.budget))
                    .collect::<Result<Vec<_>, _>>()?;
                let ok = nonincreasing(&table, params.tolerance);
                let last = *table.last().unwrap_or(&0.0);
                DiameterReport {
                    verdict: ok && last <= params.threshold,
                    nonincreasing: ok,
                    table,
                    threshold: params.threshold,
                }
            };
            let separation = separation_report(&module, params.degree, params.budget)?;
            Ok(ModuleCheck {
                j,
                nesting,
                diameter,
                separation_degree: params.degree,
                separation_epsilon: separation.epsilon,
            })
        })
        .collect()
}

fn minimum_separation(checks: &[ModuleCheck]) -> (f64, usize) {
    checks.iter().fold((f64::INFINITY, 0), |best, c| {
        if c.separation_epsilon < best.0 {
            (c.separation_epsilon, c.j)
        } else {
            best
        }
    })
}

/// Finite-range evidence for a modular chaotic structure.
///
/// Verdict: every checked module nests, passes its diameter check, and the
/// minimum separation constant is positive.
pub fn modular_certificate(
    structure: &ModularStructure,
    params: &CertifyParams,
) -> Result<Certificate, StructureError> {
    let js = params.modules(structure)?;
    let depths: Vec<usize> = (0..=params.depth).collect();
    let modules = check_modules(structure, &js, &depths, params)?;
    let (eps0, eps0_module) = minimum_separation(&modules);
    let verdict =
        eps0 > params.tolerance && modules.iter().all(|c| c.nesting.ok && c.diameter.verdict);
    let statement = format!(
        "checked modules {}..={} of '{}': nesting and diameters to depth {}, separation at degree {}; \
         eps0 is the minimum over this range only",
        params.j_range.0,
        params.j_range.1,
        structure.name(),
        params.depth,
        params.degree
    );
    Ok(Certificate {
        kind: CertificateKind::Modular,
        structure: structure.name().to_string(),
        j_range: params.j_range,
        depths,
        degree: params.degree,
        threshold: params.threshold,
        modules,
        sup_diameters: None,
        eps0,
        eps0_module,
        verdict,
        statement,
    })
}

/// Like [`modular_certificate`], but the diameter condition is judged on
/// `sup_j max diam` at each of `params.strong_depths`.
pub fn strong_certificate(
    structure: &ModularStructure,
    params: &CertifyParams,
) -> Result<Certificate, StructureError> {
    if params.strong_depths.is_empty() {
        return Err(StructureError::InvalidArgument(
            "strong certificate needs at least one depth".into(),
        ));
    }
    let mut depths = params.strong_depths.clone();
    depths.sort_unstable();
    depths.dedup();
    let js = params.modules(structure)?;
    let modules = check_modules(structure, &js, &depths, params)?;
    let sup: Vec<(usize, f64)> = depths
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            (
                d,
                modules
                    .iter()
                    .map(|c| c.diameter.table[i])
                    .fold(0.0, f64::max),
            )
        })
        .collect();
    let sup_values: Vec<f64> = sup.iter().map(|&(_, v)| v).collect();
    let sup_ok = nonincreasing(&sup_values, params.tolerance)
        && sup_values.last().is_some_and(|&v| v <= params.threshold);
    let (eps0, eps0_module) = minimum_separation(&modules);
    let verdict = sup_ok && eps0 > params.tolerance && modules.iter().all(|c| c.nesting.ok);
    let statement = format!(
        "checked modules {}..={} of '{}': sup of cell diameters at depths {:?}, separation at degree {}; \
         eps0 is the minimum over this range only",
        params.j_range.0,
        params.j_range.1,
        structure.name(),
        depths,
        params.degree
    );
    Ok(Certificate {
        kind: CertificateKind::Strong,
        structure: structure.name().to_string(),
        j_range: params.j_range,
        depths,
        degree: params.degree,
        threshold: params.threshold,
        modules,
        sup_diameters: Some(sup),
        eps0,
        eps0_module,
        verdict,
        statement,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m2() -> Alphabet {
        Alphabet::new(2).unwrap()
    }

    /// Cells `{t}` / `{−t}` decided by the first symbol.
    fn plus_minus(j: usize, t: f64) -> ModuleSpace {
        ModuleSpace::new(j, m2(), 64, move |p: &[Symbol]| match p.first() {
            None => SetDescriptor::scalars(&[t, -t]),
            Some(1) => SetDescriptor::point(t),
            Some(_) => SetDescriptor::point(-t),
        })
    }

    /// Dyadic subintervals of `[0, width]`.
    fn dyadic(j: usize, width: f64) -> ModuleSpace {
        ModuleSpace::new(j, m2(), 16, move |p: &[Symbol]| {
            let mut lo = 0.0;
            let mut w = width;
            for &s in p {
                w /= 2.0;
                if s == 2 {
                    lo += w;
                }
            }
            SetDescriptor::interval(lo, lo + w)
        })
    }

    fn constant(j: usize) -> ModuleSpace {
        ModuleSpace::new(j, m2(), 16, |_: &[Symbol]| {
            SetDescriptor::interval(0.0, 1.0)
        })
    }

    #[test]
    fn cell_lookup() {
        let m = plus_minus(1, 1.0);
        assert_eq!(m.cell(&[1]).unwrap(), SetDescriptor::point(1.0));
        assert_eq!(m.cell(&[2]).unwrap(), SetDescriptor::point(-1.0));
        assert_eq!(m.cell(&[]).unwrap(), SetDescriptor::scalars(&[1.0, -1.0]));
        assert!(matches!(
            m.cell(&[3]),
            Err(StructureError::Sequence(SeqError::SymbolOutOfRange { .. }))
        ));
        assert!(matches!(
            m.cell(&[1; 65]),
            Err(StructureError::DepthExceeded { .. })
        ));
    }

    #[test]
    fn set_distance_cases() {
        assert_eq!(
            set_distance(&SetDescriptor::point(1.0), &SetDescriptor::point(-1.0)).unwrap(),
            2.0
        );
        assert_eq!(
            set_distance(
                &SetDescriptor::interval(0.0, 2.0),
                &SetDescriptor::interval(1.0, 3.0)
            )
            .unwrap(),
            0.0
        );
        assert_eq!(
            set_distance(
                &SetDescriptor::interval(0.0, 1.0),
                &SetDescriptor::point(3.5)
            )
            .unwrap(),
            2.5
        );
        let grid: Vec<f64> = (0..101).map(|k| 1.0 + k as f64 * 0.1 / 101.0).collect();
        let f = SetDescriptor::grid_function(grid.clone(), grid.clone());
        let g = SetDescriptor::grid_function(grid.clone(), grid.iter().map(|t| -t).collect());
        let oracle = grid.iter().map(|t| (t - (-t)).abs()).fold(0.0, f64::max);
        assert_eq!(set_distance(&f, &g).unwrap(), oracle);
        assert!((oracle - (2.2 - 2.0 * 0.1 / 101.0)).abs() < 1e-12);
        assert!(matches!(
            set_distance(&f, &SetDescriptor::point(0.0)),
            Err(StructureError::IncompatibleDescriptors(_))
        ));
    }

    #[test]
    fn diameter_cases() {
        assert_eq!(SetDescriptor::interval(0.0, 3.0).diameter(), 3.0);
        assert_eq!(SetDescriptor::scalars(&[1.0, -1.0]).diameter(), 2.0);
        assert_eq!(SetDescriptor::point(7.0).diameter(), 0.0);
        assert_eq!(
            SetDescriptor::Points(vec![vec![0.0, 0.0], vec![3.0, 4.0]]).diameter(),
            5.0
        );
    }

    #[test]
    fn invalid_descriptors() {
        assert!(SetDescriptor::Points(vec![]).validate().is_err());
        assert!(SetDescriptor::interval(2.0, 1.0).validate().is_err());
        assert!(SetDescriptor::grid_function(vec![0.0, 1.0], vec![1.0])
            .validate()
            .is_err());
    }

    #[test]
    fn nesting_cases() {
        let m = plus_minus(1, 1.0);
        assert!(check_nesting(&m, 3, Budget::default(), 1e-9).unwrap().ok);
        assert!(check_nesting(&m, 0, Budget::default(), 1e-9).unwrap().ok);
        let broken = ModuleSpace::new(1, m2(), 8, |p: &[Symbol]| match p {
            [] => SetDescriptor::interval(0.0, 1.0),
            [1] => SetDescriptor::interval(0.0, 0.5),
            [2] => SetDescriptor::interval(0.5, 1.0),
            [1, 2, ..] => SetDescriptor::interval(0.6, 0.7),
            _ => SetDescriptor::interval(0.0, 0.0),
        });
        let rep = check_nesting(&broken, 3, Budget::default(), 1e-9).unwrap();
        assert!(!rep.ok);
        assert_eq!(rep.violation, Some(vec![1, 2]));
    }

    #[test]
    fn diameter_report_cases() {
        let rep = diameter_report(&plus_minus(1, 1.0), 1, 1e-9, Budget::default(), 1e-9).unwrap();
        assert_eq!(rep.table, vec![2.0, 0.0]);
        assert!(rep.verdict);
        let rep = diameter_report(&constant(1), 4, 1e-3, Budget::default(), 1e-9).unwrap();
        assert!(!rep.verdict);
        let rep = diameter_report(&dyadic(1, 1.0), 4, 0.1, Budget::default(), 1e-9).unwrap();
        assert_eq!(rep.table, vec![1.0, 0.5, 0.25, 0.125, 0.0625]);
        assert!(rep.verdict);
    }

    #[test]
    fn separation_cases() {
        assert_eq!(
            separation_report(&plus_minus(1, 1.0), 1, Budget::default())
                .unwrap()
                .epsilon,
            2.0
        );
        assert_eq!(
            separation_report(&plus_minus(1, 4.0), 1, Budget::default())
                .unwrap()
                .epsilon,
            8.0
        );
        assert_eq!(
            separation_report(&constant(1), 2, Budget::default())
                .unwrap()
                .epsilon,
            0.0
        );
        let rep = separation_report(&dyadic(1, 1.0), 2, Budget::default()).unwrap();
        assert_eq!(rep.witnesses.len(), 4);
        // [0,.25] is farthest from [.75,1]: gap 0.5; the middle cells reach 0.25.
        assert_eq!(rep.witness_for(&[1, 1]).unwrap().partner, vec![2, 2]);
        assert_eq!(rep.epsilon, 0.25);
    }

    #[test]
    fn separation_budget() {
        let err = separation_report(&dyadic(1, 1.0), 9, Budget::default()).unwrap_err();
        assert_eq!(
            err,
            StructureError::BudgetExceeded {
                required: 512,
                limit: 256
            }
        );
    }

    #[test]
    fn certificates() {
        let s = ModularStructure::new("pm", m2(), 1..=10, |j| Some(plus_minus(j, j as f64)));
        let cert = modular_certificate(&s, &CertifyParams::new((1, 10), 3, 1)).unwrap();
        assert!(cert.verdict);
        assert_eq!(cert.eps0, 2.0);
        assert_eq!(cert.eps0_module, 1);
        let single = modular_certificate(&s, &CertifyParams::new((4, 4), 2, 1)).unwrap();
        assert_eq!(single.eps0, 8.0);
        assert_eq!(single.modules.len(), 1);

        let degenerate = ModularStructure::new("d", m2(), 1..=3, |j| {
            Some(if j == 2 {
                constant(j)
            } else {
                plus_minus(j, 1.0)
            })
        });
        let cert = modular_certificate(&degenerate, &CertifyParams::new((1, 3), 2, 1)).unwrap();
        assert!(!cert.verdict);
        assert_eq!(cert.eps0, 0.0);

        assert!(modular_certificate(&s, &CertifyParams::new((1, 11), 2, 1)).is_err());
    }

    #[test]
    fn strong_certificate_rejects_growing_diameters() {
        let s = ModularStructure::new("grow", m2(), 1..=50, |j| Some(dyadic(j, j as f64)));
        let mut params = CertifyParams::new((1, 50), 4, 1);
        params.threshold = 0.5;
        params.strong_depths = vec![1, 2, 3, 4];
        let cert = strong_certificate(&s, &params).unwrap();
        // each module halves its diameters, but the sup at depth 4 is 50/16
        for c in &cert.modules {
            assert!(c.diameter.nonincreasing);
        }
        assert_eq!(
            cert.sup_diameters.as_ref().unwrap().last().unwrap().1,
            50.0 / 16.0
        );
        assert!(!cert.verdict);
        params.strong_depths.clear();
        assert!(matches!(
            strong_certificate(&s, &params),
            Err(StructureError::InvalidArgument(_))
        ));
    }

    #[test]
    fn labels_equivalent_through_cells() {
        let m = plus_minus(1, 1.0);
        assert!(m.labels_equivalent(&[1, 1], &[1, 2], 1e-9).unwrap());
        assert!(!m.labels_equivalent(&[1], &[2], 1e-9).unwrap());
    }
}
