//! The modular similarity map and constructive chaos witnesses.
//!
//! `φ` sends the point labeled `i₁ i₂ i₃ …` in module `j` to the point
//! labeled `i₂ i₃ …` in module `j + 1`. Lower and upper indices move
//! together, so `φⁿ` lands in module `j + n` with the label shifted by `n`.
//!
//! Closeness between points is by indexing (the `(k, m)`-neighborhood);
//! separation uses the module metrics through depth-limited cells. Distances
//! between labeled points are intervals: proximity claims use the upper end,
//! separation claims the lower end.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::structure::{
    separation_report, set_distance, Budget, ModularStructure, SetDescriptor, StructureError,
};
use crate::symseq::{
    contains_word, MetricInterval, SeqError, Symbol, SymbolSeq, DEFAULT_TOLERANCE,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error(transparent)]
    Sequence(#[from] SeqError),
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error("points live in different modules ({0} vs {1})")]
    ModuleMismatch(usize, usize),
    #[error("offset {offset} reaches below module 1 from module {module}")]
    InvalidOffset { module: usize, offset: usize },
    #[error("no witness found: {0}")]
    NotFound(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// A point of the union: module index `j ≥ 1` and its label.
#[derive(Debug, Clone, Serialize)]
pub struct ModularPoint {
    pub module: usize,
    pub label: SymbolSeq,
}

impl ModularPoint {
    pub fn new(module: usize, label: SymbolSeq) -> Result<Self, DynamicsError> {
        if module == 0 {
            return Err(DynamicsError::InvalidArgument(
                "module indices start at 1".into(),
            ));
        }
        Ok(ModularPoint { module, label })
    }
}

pub fn phi(p: &ModularPoint) -> Result<ModularPoint, DynamicsError> {
    phi_n(p, 1)
}

/// `φⁿ(p) = (j + n, σⁿ(label))`.
pub fn phi_n(p: &ModularPoint, n: usize) -> Result<ModularPoint, DynamicsError> {
    Ok(ModularPoint {
        module: p.module + n,
        label: p.label.shift(n)?,
    })
}

fn check_alphabet(structure: &ModularStructure, p: &ModularPoint) -> Result<(), DynamicsError> {
    let (a, b) = (structure.alphabet(), p.label.alphabet());
    if a != b {
        return Err(SeqError::AlphabetMismatch(a.size() as u16, b.size() as u16).into());
    }
    Ok(())
}

/// The cell of `p`'s module at the first `depth` symbols of its label.
pub fn point_value(
    structure: &ModularStructure,
    p: &ModularPoint,
    depth: usize,
) -> Result<SetDescriptor, DynamicsError> {
    check_alphabet(structure, p)?;
    let module = structure.module(p.module)?;
    Ok(module.cell(&p.label.prefix(depth)?)?)
}

/// Bounds on `δ_j` between two labeled points of one module.
///
/// With distinct depth-`depth` cells `A`, `B` the interval is
/// `[δ(A, B), δ(A, B) + diam A + diam B]`; when the prefixes agree both
/// points lie in one cell and the interval is `[0, diam A]`.
pub fn point_distance(
    structure: &ModularStructure,
    a: &ModularPoint,
    b: &ModularPoint,
    depth: usize,
) -> Result<MetricInterval, DynamicsError> {
    if a.module != b.module {
        return Err(DynamicsError::ModuleMismatch(a.module, b.module));
    }
    check_alphabet(structure, a)?;
    check_alphabet(structure, b)?;
    let module = structure.module(a.module)?;
    let pa = a.label.prefix(depth)?;
    let pb = b.label.prefix(depth)?;
    let ca = module.cell(&pa)?;
    if pa == pb {
        return Ok(MetricInterval::bounded(0.0, ca.diameter(), Some(depth)));
    }
    let cb = module.cell(&pb)?;
    let lo = set_distance(&ca, &cb)?;
    Ok(MetricInterval::bounded(
        lo,
        lo + ca.diameter() + cb.diameter(),
        Some(depth),
    ))
}

/// `a` is in the `(k, len)`-neighborhood of `b`: `a.j + k = b.j` and
/// `a`'s symbols `k+1..k+len` equal `b`'s symbols `1..len`.
pub fn in_km_neighborhood(
    a: &ModularPoint,
    b: &ModularPoint,
    k: usize,
    len: usize,
) -> Result<bool, DynamicsError> {
    if len == 0 {
        return Err(DynamicsError::InvalidArgument(
            "neighborhood length must be at least 1".into(),
        ));
    }
    if a.module + k != b.module {
        return Ok(false);
    }
    let ours = a.label.shift(k)?.prefix(len)?;
    Ok(ours == b.label.prefix(len)?)
}

/// Outcome of [`verify_affine_similarity`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AffineReport {
    pub prefix: Vec<Symbol>,
    pub order: usize,
    pub j_start: usize,
    pub extensions: usize,
    /// Module reached by every image (all images agree).
    pub landing_module: usize,
    /// `j + n`, what `n` applications of the one-step map give.
    pub computed_index: usize,
    /// `j + n + 1`, the index written in the closed-form identity for `φⁿ`.
    pub stated_index: usize,
    /// Image cells coincide with the depth-`n` cells of module `j + n`.
    pub covers_computed_index: bool,
    /// Image cells coincide with the depth-`n` cells of module `j + n + 1`.
    pub covers_stated_index: bool,
}

/// Applies `φⁿ` to a representative of every extension of `prefix` and
/// compares the images, truncated at depth `n`, against the depth-`n`
/// cells of modules `j + n` and `j + n + 1`.
pub fn verify_affine_similarity(
    structure: &ModularStructure,
    prefix: &[Symbol],
    j_start: usize,
    budget: Budget,
    tol: f64,
) -> Result<AffineReport, DynamicsError> {
    let alphabet = structure.alphabet();
    alphabet.check_all(prefix)?;
    let n = prefix.len();
    let extensions = budget.prefixes(alphabet, n)?;
    let mut images = Vec::with_capacity(extensions.len());
    let mut landing = Vec::with_capacity(extensions.len());
    for w in &extensions {
        let label =
            SymbolSeq::eventually_periodic(alphabet, [prefix, w.as_slice()].concat(), vec![1])?;
        let image = phi_n(&ModularPoint::new(j_start, label)?, n)?;
        landing.push(image.module);
        images.push(point_value(structure, &image, n)?);
    }
    let landing_module = landing[0];
    if landing.iter().any(|&m| m != landing_module) {
        return Err(DynamicsError::Precondition(
            "images landed in different modules".into(),
        ));
    }
    let covers = |j: usize| -> Result<bool, DynamicsError> {
        let module = structure.module(j)?;
        let targets = extensions
            .iter()
            .map(|w| module.cell(w))
            .collect::<Result<Vec<_>, _>>()?;
        let matched =
            |xs: &[SetDescriptor], ys: &[SetDescriptor]| -> Result<bool, StructureError> {
                for x in xs {
                    let mut hit = false;
                    for y in ys {
                        if x.same_set(y, tol)? {
                            hit = true;
                            break;
                        }
                    }
                    if !hit {
                        return Ok(false);
                    }
                }
                Ok(true)
            };
        Ok(matched(&targets, &images)? && matched(&images, &targets)?)
    };
    Ok(AffineReport {
        prefix: prefix.to_vec(),
        order: n,
        j_start,
        extensions: extensions.len(),
        landing_module,
        computed_index: j_start + n,
        stated_index: j_start + n + 1,
        covers_computed_index: covers(j_start + n)?,
        covers_stated_index: covers(j_start + n + 1)?,
    })
}

/// Search settings for [`find_sensitivity_witness`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityParams {
    pub kappa: f64,
    /// Separation constant of a certified structure.
    pub eps0: f64,
    /// Separation degree used for the partner cell.
    pub degree: usize,
    pub max_shared_prefix: usize,
    /// Random companions tried per shared-prefix length when the partner
    /// recipe fails.
    pub random_trials: usize,
    pub seed: u64,
    pub budget: Budget,
    pub tolerance: f64,
}

impl SensitivityParams {
    pub fn new(kappa: f64, eps0: f64) -> Self {
        SensitivityParams {
            kappa,
            eps0,
            degree: 1,
            max_shared_prefix: 48,
            random_trials: 16,
            seed: 0,
            budget: Budget::default(),
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CompanionSource {
    SeparationPartner,
    Random,
}

#[derive(Debug, Clone, Serialize)]
pub struct SensitivityWitness {
    pub base: ModularPoint,
    pub companion: ModularPoint,
    pub shared_prefix_len: usize,
    pub iterate: usize,
    pub depth: usize,
    pub initial_distance: MetricInterval,
    pub separated_distance: f64,
    pub source: CompanionSource,
}

/// Shares a prefix of length `k` with `p` so that the shared depth-`k` cell
/// is thinner than `kappa`, then switches to a separation partner of
/// `σᵏ(p)`'s depth-`degree` cell in module `j + k`. After `k` iterates the
/// two points sit in cells at least `ε₀` apart.
pub fn find_sensitivity_witness(
    structure: &ModularStructure,
    p: &ModularPoint,
    params: &SensitivityParams,
) -> Result<SensitivityWitness, DynamicsError> {
    if params.eps0 <= params.tolerance {
        return Err(DynamicsError::Precondition(format!(
            "separation constant {} is not positive",
            params.eps0
        )));
    }
    if params.degree == 0 {
        return Err(DynamicsError::InvalidArgument(
            "separation degree must be at least 1".into(),
        ));
    }
    check_alphabet(structure, p)?;
    let alphabet = structure.alphabet();
    let base_module = structure.module(p.module)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    for k in 0..=params.max_shared_prefix.min(base_module.max_depth()) {
        let shared = p.label.prefix(k)?;
        if base_module.cell(&shared)?.diameter() >= params.kappa {
            continue;
        }
        let target = structure.module(p.module + k)?;
        if params.degree > target.max_depth() {
            continue;
        }
        let own = p.label.shift(k)?.prefix(params.degree)?;
        let report = separation_report(&target, params.degree, params.budget)?;
        let partner = report
            .witness_for(&own)
            .map(|w| w.partner.clone())
            .ok_or_else(|| DynamicsError::Precondition("separation scan missed a prefix".into()))?;
        let attempt =
            |tail: Vec<Symbol>, source| -> Result<Option<SensitivityWitness>, DynamicsError> {
                let label = SymbolSeq::eventually_periodic(
                    alphabet,
                    [shared.as_slice(), &tail].concat(),
                    vec![1],
                )?;
                let companion = ModularPoint::new(p.module, label)?;
                let initial = point_distance(structure, p, &companion, k)?;
                let separated = point_distance(
                    structure,
                    &phi_n(p, k)?,
                    &phi_n(&companion, k)?,
                    params.degree,
                )?;
                if initial.hi < params.kappa && separated.lo >= params.eps0 - params.tolerance {
                    let shared_prefix_len = crate::symseq::agreement_prefix_length(
                        &p.label,
                        &companion.label,
                        k + params.degree,
                    )?;
                    return Ok(Some(SensitivityWitness {
                        base: p.clone(),
                        companion,
                        shared_prefix_len,
                        iterate: k,
                        depth: params.degree,
                        initial_distance: initial,
                        separated_distance: separated.lo,
                        source,
                    }));
                }
                Ok(None)
            };
        if let Some(w) = attempt(partner, CompanionSource::SeparationPartner)? {
            return Ok(w);
        }
        for _ in 0..params.random_trials {
            let tail: Vec<Symbol> = (0..params.degree)
                .map(|_| rng.random_range(1..=alphabet.size() as Symbol))
                .collect();
            if let Some(w) = attempt(tail, CompanionSource::Random)? {
                return Ok(w);
            }
        }
    }
    Err(DynamicsError::NotFound(format!(
        "no companion within shared prefix ≤ {} reaches separation {}",
        params.max_shared_prefix, params.eps0
    )))
}

/// Recomputes both distances of a witness with fresh [`point_distance`] calls.
pub fn validate_sensitivity(
    structure: &ModularStructure,
    w: &SensitivityWitness,
    kappa: f64,
    eps0: f64,
    tol: f64,
) -> Result<bool, DynamicsError> {
    let initial = point_distance(structure, &w.base, &w.companion, w.iterate)?;
    let separated = point_distance(
        structure,
        &phi_n(&w.base, w.iterate)?,
        &phi_n(&w.companion, w.iterate)?,
        w.depth,
    )?;
    let shares = w.base.label.prefix(w.shared_prefix_len)?
        == w.companion.label.prefix(w.shared_prefix_len)?
        && w.base.label.symbol_at(w.shared_prefix_len + 1)?
            != w.companion.label.symbol_at(w.shared_prefix_len + 1)?;
    Ok(shares && initial.hi < kappa && separated.lo >= eps0 - tol)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitivityWitness {
    pub source_module: usize,
    pub target: Vec<Symbol>,
    /// `φ^shift(source)` starts with `target`.
    pub shift: usize,
    pub landing_module: usize,
}

impl TransitivityWitness {
    /// The landing point's neighbor: module `landing_module`, label
    /// `target` followed by 1s.
    pub fn target_point(&self, source: &ModularPoint) -> Result<ModularPoint, DynamicsError> {
        let label =
            SymbolSeq::eventually_periodic(source.label.alphabet(), self.target.clone(), vec![1])?;
        ModularPoint::new(self.landing_module, label)
    }
}

/// Locates `target` in the source label: `source` is then in the
/// `(shift, |target|)`-neighborhood of any point of module
/// `source.j + shift` whose label starts with `target`.
pub fn find_transitivity_witness(
    source: &ModularPoint,
    target: &[Symbol],
    horizon: usize,
) -> Result<TransitivityWitness, DynamicsError> {
    if target.is_empty() {
        return Err(DynamicsError::InvalidArgument(
            "target prefix must be nonempty".into(),
        ));
    }
    source.label.alphabet().check_all(target)?;
    let pos = contains_word(&source.label, target, horizon)?.ok_or_else(|| {
        DynamicsError::NotFound(format!("target {target:?} absent within horizon {horizon}"))
    })?;
    let shift = pos - 1;
    Ok(TransitivityWitness {
        source_module: source.module,
        target: target.to_vec(),
        shift,
        landing_module: source.module + shift,
    })
}

/// A periodic point in module `target.j − offset` lying in the
/// `(offset, l)`-neighborhood of `target`.
///
/// Its block is the rotation of `target`'s first `l` symbols that puts
/// `target`'s first symbol at position `offset + 1`.
pub fn periodic_point_in_neighborhood(
    target: &ModularPoint,
    l: usize,
    offset: usize,
) -> Result<ModularPoint, DynamicsError> {
    if l == 0 {
        return Err(DynamicsError::InvalidArgument(
            "block length must be at least 1".into(),
        ));
    }
    if offset >= target.module {
        return Err(DynamicsError::InvalidOffset {
            module: target.module,
            offset,
        });
    }
    let head = target.label.prefix(l)?;
    let r = offset % l;
    let block: Vec<Symbol> = (0..l).map(|q| head[(q + l - r) % l]).collect();
    ModularPoint::new(
        target.module - offset,
        crate::symseq::make_periodic(target.label.alphabet(), block)?,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnpredictabilityEntry {
    pub l: usize,
    pub kappa: usize,
    pub matched_len: usize,
    /// First separation index: `i_{κ+ζ} ≠ i_ζ` while `i_{κ+s} = i_s` for `s < ζ`.
    pub zeta: usize,
    /// Induced cell distance when a structure is attached.
    pub cell_distance: Option<MetricInterval>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnpredictabilityReport {
    pub horizon: usize,
    pub entries: Vec<UnpredictabilityEntry>,
    /// Schedule values with no witness inside the horizon.
    pub not_found: Vec<usize>,
}

impl UnpredictabilityReport {
    pub fn complete(&self) -> bool {
        self.not_found.is_empty()
    }
}

/// `z[k]` = length of the longest common prefix of `s` and `s[k..]`.
fn z_array(s: &[Symbol]) -> Vec<usize> {
    let n = s.len();
    let mut z = vec![0; n];
    if n == 0 {
        return z;
    }
    z[0] = n;
    let (mut l, mut r) = (0, 0);
    for i in 1..n {
        if i < r {
            z[i] = (r - i).min(z[i - l]);
        }
        while i + z[i] < n && s[z[i]] == s[i + z[i]] {
            z[i] += 1;
        }
        if i + z[i] > r {
            l = i;
            r = i + z[i];
        }
    }
    z
}

/// Finite-horizon unpredictability evidence.
///
/// For each `l` of the schedule, the smallest `κ` beyond the previous entry
/// such that `φ^κ(p)` repeats the first `l` symbols of `p` and then, at some
/// `ζ > l` inside the horizon, differs from `p`.
pub fn check_unpredictability(
    p: &ModularPoint,
    l_schedule: &[usize],
    horizon: usize,
    structure: Option<(&ModularStructure, usize)>,
) -> Result<UnpredictabilityReport, DynamicsError> {
    if l_schedule.contains(&0) {
        return Err(DynamicsError::InvalidArgument(
            "schedule entries must be at least 1".into(),
        ));
    }
    let s = p.label.prefix_clamped(horizon);
    let h = s.len();
    let z = z_array(&s);
    let mut entries = Vec::new();
    let mut not_found = Vec::new();
    let mut last_kappa = 0usize;
    for &l in l_schedule {
        let hit = (last_kappa + 1..h).find(|&k| z[k] >= l && k + z[k] < h);
        match hit {
            Some(kappa) => {
                let zeta = z[kappa] + 1;
                let cell_distance = match structure {
                    Some((st, depth)) => {
                        // time ζ−1 along both orbits, compared in the module of φ^{κ+ζ−1}(p)
                        let module = p.module + kappa + zeta - 1;
                        let a = ModularPoint::new(module, p.label.shift(kappa + zeta - 1)?)?;
                        let b = ModularPoint::new(module, p.label.shift(zeta - 1)?)?;
                        Some(point_distance(st, &a, &b, depth)?)
                    }
                    None => None,
                };
                entries.push(UnpredictabilityEntry {
                    l,
                    kappa,
                    matched_len: z[kappa],
                    zeta,
                    cell_distance,
                });
                last_kappa = kappa;
            }
            None => not_found.push(l),
        }
    }
    Ok(UnpredictabilityReport {
        horizon: h,
        entries,
        not_found,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistanceEvent {
    pub iterate: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiYorkeParams {
    pub horizon: usize,
    pub kappa: f64,
    pub eps: f64,
    /// Cell depth used for separation lower bounds.
    pub depth: usize,
    /// Longest shared prefix examined for proximity upper bounds.
    pub agreement_cap: usize,
    pub tolerance: f64,
}

impl LiYorkeParams {
    pub fn new(horizon: usize, kappa: f64, eps: f64) -> Self {
        LiYorkeParams {
            horizon,
            kappa,
            eps,
            depth: 1,
            agreement_cap: 64,
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LiYorkeReport {
    pub first: ModularPoint,
    pub second: ModularPoint,
    pub horizon: usize,
    pub kappa: f64,
    pub eps: f64,
    pub proximal_count: usize,
    pub separated_count: usize,
    /// Iterates whose distance upper bound is below `kappa`.
    pub proximal: Vec<DistanceEvent>,
    /// Iterates whose distance lower bound is at least `eps`.
    pub separated: Vec<DistanceEvent>,
}

/// Scans iterates `1..=horizon` of a pair started in one module.
pub fn liyorke_report(
    structure: &ModularStructure,
    a: &ModularPoint,
    b: &ModularPoint,
    params: &LiYorkeParams,
) -> Result<LiYorkeReport, DynamicsError> {
    if a.module != b.module {
        return Err(DynamicsError::ModuleMismatch(a.module, b.module));
    }
    check_alphabet(structure, a)?;
    check_alphabet(structure, b)?;
    let read = params.horizon + params.agreement_cap.max(params.depth) + 1;
    let sa = a.label.prefix_clamped(read);
    let sb = b.label.prefix_clamped(read);
    let mut proximal = Vec::new();
    let mut separated = Vec::new();
    for k in 1..=params.horizon {
        let module = structure.module(a.module + k)?;
        let avail = sa.len().min(sb.len()).saturating_sub(k);
        let cap = params.agreement_cap.min(module.max_depth()).min(avail);
        let shared = sa[k..k + cap]
            .iter()
            .zip(&sb[k..k + cap])
            .take_while(|(x, y)| x == y)
            .count();
        let upper = module.cell(&sa[k..k + shared])?.diameter();
        if upper < params.kappa {
            proximal.push(DistanceEvent {
                iterate: k,
                distance: upper,
            });
        }
        let depth = params.depth.min(module.max_depth());
        if avail >= depth {
            let lower = if shared >= depth {
                0.0
            } else {
                set_distance(
                    &module.cell(&sa[k..k + depth])?,
                    &module.cell(&sb[k..k + depth])?,
                )?
            };
            if lower >= params.eps - params.tolerance {
                separated.push(DistanceEvent {
                    iterate: k,
                    distance: lower,
                });
            }
        }
    }
    Ok(LiYorkeReport {
        first: a.clone(),
        second: b.clone(),
        horizon: params.horizon,
        kappa: params.kappa,
        eps: params.eps,
        proximal_count: proximal.len(),
        separated_count: separated.len(),
        proximal,
        separated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::ModuleSpace;
    use crate::symseq::{
        make_periodic, scrambled_pair, universal_sequence, Alphabet, BlockSchedule,
    };

    fn m2() -> Alphabet {
        Alphabet::new(2).unwrap()
    }

    /// Module j carries `{t, −t}` with `t = (j + 99) / 100`.
    fn plus_minus() -> ModularStructure {
        ModularStructure::new("pm", m2(), 1..=301, |j| {
            let t = (j + 99) as f64 / 100.0;
            Some(ModuleSpace::new(j, m2(), 64, move |p: &[Symbol]| {
                match p.first() {
                    None => SetDescriptor::scalars(&[t, -t]),
                    Some(1) => SetDescriptor::point(t),
                    Some(_) => SetDescriptor::point(-t),
                }
            }))
        })
    }

    fn periodic_point(j: usize, block: &[Symbol]) -> ModularPoint {
        ModularPoint::new(j, make_periodic(m2(), block.to_vec()).unwrap()).unwrap()
    }

    fn point(j: usize, prefix: &[Symbol], block: &[Symbol]) -> ModularPoint {
        ModularPoint::new(
            j,
            SymbolSeq::eventually_periodic(m2(), prefix.to_vec(), block.to_vec()).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn phi_cases() {
        let p = point(1, &[1], &[2]);
        let q = phi(&p).unwrap();
        assert_eq!(q.module, 2);
        assert_eq!(q.label.prefix(3).unwrap(), vec![2, 2, 2]);
        let per = periodic_point(4, &[1, 2, 2]);
        let back = phi_n(&per, 3).unwrap();
        assert_eq!(back.module, 7);
        assert_eq!(back.label.prefix(9).unwrap(), per.label.prefix(9).unwrap());
        let twice = phi(&phi(&p).unwrap()).unwrap();
        let direct = phi_n(&p, 2).unwrap();
        assert_eq!(
            (twice.module, twice.label.prefix(5).unwrap()),
            (direct.module, direct.label.prefix(5).unwrap())
        );
        assert_eq!(
            phi_n(&p, 0).unwrap().label.prefix(4).unwrap(),
            p.label.prefix(4).unwrap()
        );
        let q = phi_n(&periodic_point(2, &[1, 2]), 3).unwrap();
        assert_eq!(
            (q.module, q.label.prefix(4).unwrap()),
            (5, vec![2, 1, 2, 1])
        );
    }

    #[test]
    fn point_value_and_distance() {
        let s = plus_minus();
        let a = point(1, &[1], &[2]);
        let b = point(1, &[2], &[1]);
        assert_eq!(point_value(&s, &a, 1).unwrap(), SetDescriptor::point(1.0));
        assert_eq!(
            point_value(&s, &a, 0).unwrap(),
            SetDescriptor::scalars(&[1.0, -1.0])
        );
        let d = point_distance(&s, &a, &b, 1).unwrap();
        assert_eq!((d.lo, d.hi), (2.0, 2.0));
        let same = point_distance(&s, &a, &a, 3).unwrap();
        assert_eq!((same.lo, same.hi), (0.0, 0.0));
        // two labels of the same point
        let a2 = point(1, &[1, 1], &[1]);
        assert!(point_distance(&s, &a, &a2, 5).unwrap().contains(0.0, 0.0));
        assert_eq!(
            point_distance(&s, &a, &point(2, &[1], &[1]), 1).unwrap_err(),
            DynamicsError::ModuleMismatch(1, 2)
        );
    }

    #[test]
    fn neighborhood_cases() {
        let a = point(1, &[1, 2, 1, 1], &[1]);
        let b = point(3, &[1, 1], &[1]);
        assert!(in_km_neighborhood(&a, &b, 2, 2).unwrap());
        assert!(!in_km_neighborhood(&a, &point(4, &[1, 1], &[1]), 2, 2).unwrap());
        let short = ModularPoint::new(1, SymbolSeq::finite(m2(), vec![1, 2, 1]).unwrap()).unwrap();
        let far = ModularPoint::new(3, SymbolSeq::finite(m2(), vec![1, 1, 1, 1]).unwrap()).unwrap();
        assert!(matches!(
            in_km_neighborhood(&short, &far, 2, 4),
            Err(DynamicsError::Sequence(SeqError::HorizonExceeded { .. }))
        ));
    }

    #[test]
    fn affine_similarity_probe() {
        let s = plus_minus();
        let r = verify_affine_similarity(&s, &[1], 1, Budget::default(), 1e-12).unwrap();
        assert_eq!(r.landing_module, 2);
        assert!(r.covers_computed_index);
        assert!(!r.covers_stated_index);
        let r0 = verify_affine_similarity(&s, &[], 5, Budget::default(), 1e-12).unwrap();
        assert_eq!((r0.extensions, r0.landing_module), (1, 5));
        assert!(r0.covers_computed_index);
        let r3 = verify_affine_similarity(&s, &[2, 1, 2], 1, Budget::default(), 1e-12).unwrap();
        assert_eq!((r3.extensions, r3.landing_module), (8, 4));
        let tight = Budget { max_prefixes: 4 };
        assert!(matches!(
            verify_affine_similarity(&s, &[1, 1, 1], 1, tight, 1e-12),
            Err(DynamicsError::Structure(
                StructureError::BudgetExceeded { .. }
            ))
        ));
    }

    #[test]
    fn sensitivity_recipe_flips_next_symbol() {
        let s = plus_minus();
        let p = point(5, &[2, 1, 1], &[1, 2]);
        let params = SensitivityParams::new(2f64.powi(-10), 2.0);
        let w = find_sensitivity_witness(&s, &p, &params).unwrap();
        assert_eq!(w.iterate, 1);
        assert_eq!(w.shared_prefix_len, 1);
        assert_eq!(w.source, CompanionSource::SeparationPartner);
        assert_eq!(w.companion.label.symbol_at(2).unwrap(), 2);
        assert!(w.separated_distance >= 2.0);
        assert!(validate_sensitivity(&s, &w, params.kappa, 2.0, 1e-9).unwrap());

        let wide = SensitivityParams::new(10.0, 2.0);
        assert_eq!(find_sensitivity_witness(&s, &p, &wide).unwrap().iterate, 0);
        let none = SensitivityParams::new(0.1, 0.0);
        assert!(matches!(
            find_sensitivity_witness(&s, &p, &none),
            Err(DynamicsError::Precondition(_))
        ));
    }

    #[test]
    fn transitivity_cases() {
        let src = ModularPoint::new(1, universal_sequence(m2())).unwrap();
        let w = find_transitivity_witness(&src, &[2, 2, 1], 1000).unwrap();
        assert!(w.shift + 3 <= crate::symseq::universal_construction_len(m2(), 3));
        assert!(in_km_neighborhood(&src, &w.target_point(&src).unwrap(), w.shift, 3).unwrap());
        assert_eq!(
            find_transitivity_witness(&src, &[1, 2], 100).unwrap().shift,
            0
        );
        assert!(matches!(
            find_transitivity_witness(&src, &[1, 3], 100),
            Err(DynamicsError::Sequence(SeqError::SymbolOutOfRange { .. }))
        ));
        let c = periodic_point(1, &[1]);
        assert!(matches!(
            find_transitivity_witness(&c, &[2], 50),
            Err(DynamicsError::NotFound(_))
        ));
    }

    #[test]
    fn periodic_neighbor_cases() {
        let target = point(3, &[1, 2, 2], &[1]);
        let p = periodic_point_in_neighborhood(&target, 3, 0).unwrap();
        assert_eq!(p.module, 3);
        assert_eq!(p.label.periodic_parts().unwrap().1, &[1, 2, 2]);
        let q = periodic_point_in_neighborhood(&target, 3, 2).unwrap();
        assert_eq!(q.module, 1);
        assert_eq!(q.label.shift(2).unwrap().prefix(3).unwrap(), vec![1, 2, 2]);
        assert!(in_km_neighborhood(&q, &target, 2, 3).unwrap());
        assert_eq!(
            periodic_point_in_neighborhood(&target, 3, 3).unwrap_err(),
            DynamicsError::InvalidOffset {
                module: 3,
                offset: 3
            }
        );
    }

    #[test]
    fn z_array_matches_naive() {
        let s: Vec<Symbol> = universal_sequence(m2()).prefix(300).unwrap();
        let z = z_array(&s);
        for k in 1..s.len() {
            let naive = s.iter().zip(&s[k..]).take_while(|(x, y)| x == y).count();
            assert_eq!(z[k], naive, "k={k}");
        }
    }

    #[test]
    fn unpredictability_cases() {
        let u = ModularPoint::new(1, universal_sequence(m2())).unwrap();
        let rep = check_unpredictability(&u, &[1, 2, 3, 4], 10_000, None).unwrap();
        assert!(rep.complete());
        assert_eq!(rep.entries.len(), 4);
        let s = u.label.prefix(10_000).unwrap();
        let mut prev = 0;
        for e in &rep.entries {
            assert!(e.kappa > prev);
            prev = e.kappa;
            assert!(e.zeta > e.l);
            assert_eq!(s[e.kappa..e.kappa + e.zeta - 1], s[..e.zeta - 1]);
            assert_ne!(s[e.kappa + e.zeta - 1], s[e.zeta - 1]);
        }
        let c = periodic_point(1, &[1]);
        assert_eq!(
            check_unpredictability(&c, &[1], 1000, None)
                .unwrap()
                .not_found,
            vec![1]
        );
        let per = periodic_point(1, &[1, 1, 2]);
        let rep = check_unpredictability(&per, &[1, 2, 3, 4], 1000, None).unwrap();
        assert!(!rep.complete());
        assert!(rep.not_found.contains(&3) && rep.not_found.contains(&4));
    }

    #[test]
    fn unpredictability_records_cell_distance() {
        let s = plus_minus();
        let u = ModularPoint::new(1, universal_sequence(m2())).unwrap();
        let rep = check_unpredictability(&u, &[1, 2], 1000, Some((&s, 1))).unwrap();
        for e in &rep.entries {
            assert!(e.cell_distance.unwrap().lo >= 2.0);
        }
    }

    #[test]
    fn liyorke_cases() {
        let s = plus_minus();
        let (a, b) = scrambled_pair(m2(), BlockSchedule::Doubling);
        let a = ModularPoint::new(1, a).unwrap();
        let b = ModularPoint::new(1, b).unwrap();
        let params = LiYorkeParams::new(1000, 2f64.powi(-10), 2.0);
        let rep = liyorke_report(&s, &a, &b, &params).unwrap();
        // differences at 5, 10, 19, 36, 69, 134, 263, 520 are first symbols of iterates 4, 9, …
        assert_eq!(
            rep.separated.iter().map(|e| e.iterate).collect::<Vec<_>>(),
            vec![1, 4, 9, 18, 35, 68, 133, 262, 519]
        );
        assert_eq!(rep.proximal_count, 1000 - 9);

        let same = liyorke_report(&s, &a, &a, &params).unwrap();
        assert_eq!((same.proximal_count, same.separated_count), (1000, 0));

        let one = point(1, &[1, 1, 1, 2], &[1]);
        let other = point(1, &[1, 1, 1, 1], &[1]);
        let rep = liyorke_report(&s, &one, &other, &params).unwrap();
        assert_eq!(rep.separated_count, 1);
        assert!(matches!(
            liyorke_report(&s, &one, &point(2, &[1], &[1]), &params),
            Err(DynamicsError::ModuleMismatch(1, 2))
        ));
    }
}
