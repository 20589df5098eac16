//! Symbol sequences over the alphabet `{1..m}`.
//!
//! A [`SymbolSeq`] is one lower-index label `i₁ i₂ i₃ …`. Three
//! representations are supported:
//!
//! * eventually periodic (`prefix` followed by endless repetitions of `block`),
//! * generator backed (lazily produced, memoized, shared between shifts),
//! * a finite prefix with a hard horizon.
//!
//! Everything that would inspect infinitely many symbols takes an explicit
//! horizon. The one exception is [`sigma_distance`] on two eventually periodic
//! inputs, where the tail of
//!
//! ```text
//! d(s, t) = Σ_{k≥1} |s_k − t_k| / 2^{k−1}
//! ```
//!
//! is a geometric series and is summed in closed form.

use std::fmt;
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

/// A 1-based symbol.
pub type Symbol = u16;

/// Default absolute tolerance for real comparisons.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// Beyond this many terms every summand of the sequence metric underflows to 0.
const METRIC_TERM_CAP: usize = 1100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeqError {
    #[error("alphabet size {0} is below 2")]
    InvalidAlphabet(usize),
    #[error("symbol {symbol} outside 1..={m}")]
    SymbolOutOfRange { symbol: Symbol, m: u16 },
    #[error("periodic block must be nonempty")]
    EmptyBlock,
    #[error("position {requested} lies beyond horizon {horizon}")]
    HorizonExceeded { requested: usize, horizon: usize },
    #[error("alphabet mismatch ({0} vs {1} symbols)")]
    AlphabetMismatch(u16, u16),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// The symbol set `{1..m}` with `m ≥ 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct Alphabet(u16);

impl Alphabet {
    pub fn new(m: usize) -> Result<Self, SeqError> {
        if !(2..=u16::MAX as usize).contains(&m) {
            return Err(SeqError::InvalidAlphabet(m));
        }
        Ok(Alphabet(m as u16))
    }

    pub fn size(self) -> usize {
        self.0 as usize
    }

    pub fn check(self, symbol: Symbol) -> Result<Symbol, SeqError> {
        if symbol == 0 || symbol > self.0 {
            Err(SeqError::SymbolOutOfRange { symbol, m: self.0 })
        } else {
            Ok(symbol)
        }
    }

    pub fn check_all(self, symbols: &[Symbol]) -> Result<(), SeqError> {
        symbols.iter().try_for_each(|&s| self.check(s).map(|_| ()))
    }

    pub fn symbols(self) -> impl Iterator<Item = Symbol> + Clone {
        1..=self.0
    }

    /// Largest possible gap `|a − b|` between two symbols.
    pub fn max_gap(self) -> f64 {
        f64::from(self.0 - 1)
    }

    /// Number of words of length `len`, saturating at `usize::MAX`.
    pub fn word_count(self, len: usize) -> usize {
        let mut n: usize = 1;
        for _ in 0..len {
            n = n.saturating_mul(self.size());
        }
        n
    }

    /// All words of length `len` in lexicographic order.
    pub fn words(self, len: usize) -> Vec<Vec<Symbol>> {
        let mut out = Vec::with_capacity(self.word_count(len));
        let mut word = vec![1; len];
        loop {
            out.push(word.clone());
            if !next_word(&mut word, self.0) {
                return out;
            }
        }
    }
}

impl TryFrom<usize> for Alphabet {
    type Error = SeqError;
    fn try_from(m: usize) -> Result<Self, Self::Error> {
        Alphabet::new(m)
    }
}

impl From<Alphabet> for usize {
    fn from(a: Alphabet) -> usize {
        a.size()
    }
}

/// Lexicographic successor in place; `false` once the last word is passed.
fn next_word(word: &mut [Symbol], m: Symbol) -> bool {
    for pos in (0..word.len()).rev() {
        if word[pos] < m {
            word[pos] += 1;
            return true;
        }
        word[pos] = 1;
    }
    false
}

/// Bounds `lo ≤ d ≤ hi` on a distance that may only be partially computed.
///
/// `horizon` is `None` when the value is exact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricInterval {
    pub lo: f64,
    pub hi: f64,
    pub horizon: Option<usize>,
}

impl MetricInterval {
    pub fn exact(value: f64) -> Self {
        MetricInterval {
            lo: value,
            hi: value,
            horizon: None,
        }
    }

    pub fn bounded(lo: f64, hi: f64, horizon: Option<usize>) -> Self {
        debug_assert!(0.0 <= lo && lo <= hi, "invalid interval [{lo}, {hi}]");
        MetricInterval { lo, hi, horizon }
    }

    pub fn is_exact(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, value: f64, tol: f64) -> bool {
        value >= self.lo - tol && value <= self.hi + tol
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Growth of the agreement blocks used by [`scrambled_pair`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BlockSchedule {
    /// Block `n` (from 0) has length `2^n`.
    #[default]
    Doubling,
    /// Block `n` has length `start + n·step`.
    Linear { start: usize, step: usize },
}

impl BlockSchedule {
    pub fn block_len(self, n: usize) -> usize {
        match self {
            BlockSchedule::Doubling => 1usize.checked_shl(n as u32).unwrap_or(usize::MAX),
            BlockSchedule::Linear { start, step } => {
                start.max(1).saturating_add(n.saturating_mul(step))
            }
        }
    }

    /// 1-based positions at which the two members of a scrambled pair differ,
    /// up to and including `horizon`.
    pub fn disagreement_positions(self, horizon: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut pos = 0usize;
        for n in 0.. {
            pos = pos.saturating_add(self.block_len(n)).saturating_add(1);
            if pos > horizon {
                break;
            }
            out.push(pos);
        }
        out
    }
}

/// Which member of a scrambled pair a generator produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairRole {
    First,
    Second,
}

/// Identifies the rule behind a generator-backed sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "generator")]
pub enum GeneratorId {
    /// All words of length 1, 2, 3, … concatenated in lexicographic order.
    Universal,
    /// One member of a scrambled pair built on top of the universal sequence.
    Scrambled {
        role: PairRole,
        schedule: BlockSchedule,
    },
    /// Independent uniform symbols from a seeded ChaCha8 stream.
    Random { seed: u64 },
}

enum GenState {
    Universal {
        word: Vec<Symbol>,
    },
    Scrambled {
        base: Arc<Generator>,
        next_flip: usize,
        segment: usize,
    },
    Random(Box<ChaCha8Rng>),
}

struct Memo {
    symbols: Vec<Symbol>,
    state: GenState,
}

/// Lazily extended, memoized symbol source. Shifted views share one memo.
struct Generator {
    alphabet: Alphabet,
    id: GeneratorId,
    memo: Mutex<Memo>,
}

impl Generator {
    fn new(alphabet: Alphabet, id: GeneratorId) -> Arc<Self> {
        let state = match id {
            GeneratorId::Universal => GenState::Universal { word: vec![1] },
            GeneratorId::Scrambled { schedule, .. } => GenState::Scrambled {
                base: Generator::new(alphabet, GeneratorId::Universal),
                next_flip: schedule.block_len(0) + 1,
                segment: 0,
            },
            GeneratorId::Random { seed } => {
                GenState::Random(Box::new(ChaCha8Rng::seed_from_u64(seed)))
            }
        };
        Arc::new(Generator {
            alphabet,
            id,
            memo: Mutex::new(Memo {
                symbols: Vec::new(),
                state,
            }),
        })
    }

    /// Copies symbols at 0-based positions `from..to`.
    fn read(&self, from: usize, to: usize) -> Vec<Symbol> {
        let mut memo = self.memo.lock().expect("generator memo poisoned");
        let m = self.alphabet.0;
        let Memo { symbols, state } = &mut *memo;
        while symbols.len() < to {
            match state {
                GenState::Universal { word } => {
                    symbols.extend_from_slice(word);
                    if !next_word(word, m) {
                        *word = vec![1; word.len() + 1];
                    }
                }
                GenState::Scrambled {
                    base,
                    next_flip,
                    segment,
                } => {
                    let start = symbols.len();
                    let chunk = (to - start).max(256);
                    let base_syms = base.read(start, start + chunk);
                    let schedule = match self.id {
                        GeneratorId::Scrambled { schedule, .. } => schedule,
                        _ => unreachable!(),
                    };
                    let flips = matches!(
                        self.id,
                        GeneratorId::Scrambled {
                            role: PairRole::Second,
                            ..
                        }
                    );
                    for (i, s) in base_syms.into_iter().enumerate() {
                        let pos = start + i + 1;
                        if pos == *next_flip {
                            symbols.push(if flips { s % m + 1 } else { s });
                            *segment += 1;
                            *next_flip = next_flip
                                .saturating_add(schedule.block_len(*segment))
                                .saturating_add(1);
                        } else {
                            symbols.push(s);
                        }
                    }
                }
                GenState::Random(rng) => {
                    let extra = to - symbols.len();
                    symbols.extend((0..extra).map(|_| rng.random_range(1..=m)));
                }
            }
        }
        symbols[from..to].to_vec()
    }
}

#[derive(Clone)]
enum Repr {
    Periodic {
        prefix: Arc<[Symbol]>,
        block: Arc<[Symbol]>,
    },
    Generated {
        source: Arc<Generator>,
        offset: usize,
    },
    Finite {
        symbols: Arc<[Symbol]>,
        start: usize,
    },
}

/// One infinite (or horizon-bounded) label over `{1..m}`.
///
/// Values are immutable; [`SymbolSeq::shift`] returns a new view.
#[derive(Clone)]
pub struct SymbolSeq {
    alphabet: Alphabet,
    repr: Repr,
}

impl SymbolSeq {
    /// `prefix` followed by endless repetitions of `block`.
    pub fn eventually_periodic(
        alphabet: Alphabet,
        prefix: Vec<Symbol>,
        block: Vec<Symbol>,
    ) -> Result<Self, SeqError> {
        if block.is_empty() {
            return Err(SeqError::EmptyBlock);
        }
        alphabet.check_all(&prefix)?;
        alphabet.check_all(&block)?;
        Ok(SymbolSeq {
            alphabet,
            repr: Repr::Periodic {
                prefix: prefix.into(),
                block: block.into(),
            },
        })
    }

    /// A sequence known only up to `symbols.len()`.
    pub fn finite(alphabet: Alphabet, symbols: Vec<Symbol>) -> Result<Self, SeqError> {
        alphabet.check_all(&symbols)?;
        Ok(SymbolSeq {
            alphabet,
            repr: Repr::Finite {
                symbols: symbols.into(),
                start: 0,
            },
        })
    }

    pub fn generated(alphabet: Alphabet, id: GeneratorId) -> Self {
        SymbolSeq {
            alphabet,
            repr: Repr::Generated {
                source: Generator::new(alphabet, id),
                offset: 0,
            },
        }
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    /// Number of readable symbols, or `None` when unbounded.
    pub fn horizon(&self) -> Option<usize> {
        match &self.repr {
            Repr::Finite { symbols, start } => Some(symbols.len() - start),
            _ => None,
        }
    }

    pub fn is_eventually_periodic(&self) -> bool {
        matches!(self.repr, Repr::Periodic { .. })
    }

    /// `(prefix, block)` for eventually periodic sequences.
    pub fn periodic_parts(&self) -> Option<(&[Symbol], &[Symbol])> {
        match &self.repr {
            Repr::Periodic { prefix, block } => Some((prefix, block)),
            _ => None,
        }
    }

    pub fn generator(&self) -> Option<(GeneratorId, usize)> {
        match &self.repr {
            Repr::Generated { source, offset } => Some((source.id, *offset)),
            _ => None,
        }
    }

    /// Symbol at 1-based position `k`.
    pub fn symbol_at(&self, k: usize) -> Result<Symbol, SeqError> {
        if k == 0 {
            return Err(SeqError::InvalidArgument("positions are 1-based".into()));
        }
        match &self.repr {
            Repr::Periodic { prefix, block } => Ok(periodic_symbol(prefix, block, k)),
            Repr::Generated { source, offset } => Ok(source.read(offset + k - 1, offset + k)[0]),
            Repr::Finite { symbols, start } => {
                let horizon = symbols.len() - start;
                if k > horizon {
                    Err(SeqError::HorizonExceeded {
                        requested: k,
                        horizon,
                    })
                } else {
                    Ok(symbols[start + k - 1])
                }
            }
        }
    }

    /// The first `n` symbols.
    pub fn prefix(&self, n: usize) -> Result<Vec<Symbol>, SeqError> {
        match &self.repr {
            Repr::Periodic { prefix, block } => {
                Ok((1..=n).map(|k| periodic_symbol(prefix, block, k)).collect())
            }
            Repr::Generated { source, offset } => Ok(source.read(*offset, offset + n)),
            Repr::Finite { symbols, start } => {
                let horizon = symbols.len() - start;
                if n > horizon {
                    Err(SeqError::HorizonExceeded {
                        requested: n,
                        horizon,
                    })
                } else {
                    Ok(symbols[*start..start + n].to_vec())
                }
            }
        }
    }

    /// Up to `n` symbols, stopping early at a finite horizon.
    pub fn prefix_clamped(&self, n: usize) -> Vec<Symbol> {
        let n = self.horizon().map_or(n, |h| n.min(h));
        self.prefix(n).expect("clamped prefix is readable")
    }

    /// The Bernoulli shift applied `n` times.
    pub fn shift(&self, n: usize) -> Result<SymbolSeq, SeqError> {
        let repr = match &self.repr {
            Repr::Periodic { prefix, block } => {
                if n <= prefix.len() {
                    Repr::Periodic {
                        prefix: prefix[n..].into(),
                        block: block.clone(),
                    }
                } else {
                    let r = (n - prefix.len()) % block.len();
                    let rotated: Vec<Symbol> =
                        block[r..].iter().chain(&block[..r]).copied().collect();
                    Repr::Periodic {
                        prefix: Arc::from(Vec::new()),
                        block: rotated.into(),
                    }
                }
            }
            Repr::Generated { source, offset } => Repr::Generated {
                source: source.clone(),
                offset: offset + n,
            },
            Repr::Finite { symbols, start } => {
                let horizon = symbols.len() - start;
                if n > horizon {
                    return Err(SeqError::HorizonExceeded {
                        requested: n,
                        horizon,
                    });
                }
                Repr::Finite {
                    symbols: symbols.clone(),
                    start: start + n,
                }
            }
        };
        Ok(SymbolSeq {
            alphabet: self.alphabet,
            repr,
        })
    }

    fn kind_name(&self) -> &'static str {
        match self.repr {
            Repr::Periodic { .. } => "eventually_periodic",
            Repr::Generated { .. } => "generated",
            Repr::Finite { .. } => "finite",
        }
    }
}

fn periodic_symbol(prefix: &[Symbol], block: &[Symbol], k: usize) -> Symbol {
    if k <= prefix.len() {
        prefix[k - 1]
    } else {
        block[(k - 1 - prefix.len()) % block.len()]
    }
}

impl fmt::Debug for SymbolSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let head = self.prefix_clamped(12);
        write!(
            f,
            "SymbolSeq[{}; m={}; {:?}…]",
            self.kind_name(),
            self.alphabet.0,
            head
        )
    }
}

const SERIALIZED_HEAD: usize = 16;

impl Serialize for SymbolSeq {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match &self.repr {
            Repr::Periodic { prefix, block } => {
                let mut s = serializer.serialize_struct("SymbolSeq", 3)?;
                s.serialize_field("kind", "eventually_periodic")?;
                s.serialize_field("prefix", &prefix[..])?;
                s.serialize_field("block", &block[..])?;
                s.end()
            }
            Repr::Generated { source, offset } => {
                let mut s = serializer.serialize_struct("SymbolSeq", 4)?;
                s.serialize_field("kind", "generated")?;
                s.serialize_field("source", &source.id)?;
                s.serialize_field("offset", offset)?;
                s.serialize_field("head", &self.prefix_clamped(SERIALIZED_HEAD))?;
                s.end()
            }
            Repr::Finite { symbols, start } => {
                let mut s = serializer.serialize_struct("SymbolSeq", 2)?;
                s.serialize_field("kind", "finite")?;
                s.serialize_field("symbols", &symbols[*start..])?;
                s.end()
            }
        }
    }
}

/// Repeats `block` forever.
pub fn make_periodic(alphabet: Alphabet, block: Vec<Symbol>) -> Result<SymbolSeq, SeqError> {
    SymbolSeq::eventually_periodic(alphabet, Vec::new(), block)
}

/// Concatenation of every word of length 1, 2, 3, … in lexicographic order.
///
/// Every finite word occurs in it, which makes it the candidate
/// unpredictable label and the source for transitivity witnesses.
pub fn universal_sequence(alphabet: Alphabet) -> SymbolSeq {
    SymbolSeq::generated(alphabet, GeneratorId::Universal)
}

/// Length of the prefix of [`universal_sequence`] that holds all words of
/// length `1..=max_len`.
pub fn universal_construction_len(alphabet: Alphabet, max_len: usize) -> usize {
    (1..=max_len)
        .map(|l| l.saturating_mul(alphabet.word_count(l)))
        .fold(0usize, usize::saturating_add)
}

pub fn random_sequence(alphabet: Alphabet, seed: u64) -> SymbolSeq {
    SymbolSeq::generated(alphabet, GeneratorId::Random { seed })
}

/// Two non-periodic labels that agree on blocks growing per `schedule`
/// and differ at the single position right after each block.
///
/// The first member is the universal sequence; the second equals it except
/// at the disagreement positions, where the symbol is cycled to `s mod m + 1`.
pub fn scrambled_pair(alphabet: Alphabet, schedule: BlockSchedule) -> (SymbolSeq, SymbolSeq) {
    (
        SymbolSeq::generated(
            alphabet,
            GeneratorId::Scrambled {
                role: PairRole::First,
                schedule,
            },
        ),
        SymbolSeq::generated(
            alphabet,
            GeneratorId::Scrambled {
                role: PairRole::Second,
                schedule,
            },
        ),
    )
}

fn same_alphabet(a: &SymbolSeq, b: &SymbolSeq) -> Result<(), SeqError> {
    if a.alphabet != b.alphabet {
        Err(SeqError::AlphabetMismatch(a.alphabet.0, b.alphabet.0))
    } else {
        Ok(())
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Distance in `Σ_m`.
///
/// Two eventually periodic inputs give an exact (degenerate) interval.
/// Otherwise the first `horizon` terms are summed and the tail is bounded by
/// `(m − 1)·2^{−(horizon−1)}`; finite prefixes clamp the horizon to what is
/// readable.
pub fn sigma_distance(
    a: &SymbolSeq,
    b: &SymbolSeq,
    horizon: usize,
) -> Result<MetricInterval, SeqError> {
    same_alphabet(a, b)?;
    if horizon == 0 {
        return Err(SeqError::InvalidArgument(
            "horizon must be at least 1".into(),
        ));
    }
    if let (Some((pa, ba)), Some((pb, bb))) = (a.periodic_parts(), b.periodic_parts()) {
        return Ok(MetricInterval::exact(periodic_distance(pa, ba, pb, bb)));
    }
    let h = [a.horizon(), b.horizon()]
        .into_iter()
        .flatten()
        .fold(horizon, usize::min);
    let lo = weighted_gap_sum(&a.prefix(h)?, &b.prefix(h)?);
    let tail = a.alphabet.max_gap() * 0.5f64.powi(h as i32 - 1);
    Ok(MetricInterval::bounded(lo, lo + tail, Some(h)))
}

fn weighted_gap_sum(a: &[Symbol], b: &[Symbol]) -> f64 {
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(i, (&x, &y))| f64::from(x.abs_diff(y)) * 0.5f64.powi(i as i32))
        .sum()
}

fn periodic_distance(pa: &[Symbol], ba: &[Symbol], pb: &[Symbol], bb: &[Symbol]) -> f64 {
    let pre = pa.len().max(pb.len());
    let period = ba.len() / gcd(ba.len(), bb.len()) * bb.len();
    let terms = |range: std::ops::Range<usize>| -> f64 {
        range
            .map(|k| {
                let gap = periodic_symbol(pa, ba, k).abs_diff(periodic_symbol(pb, bb, k));
                f64::from(gap) * 0.5f64.powi(k as i32 - 1)
            })
            .sum()
    };
    if pre + period > METRIC_TERM_CAP {
        return terms(1..METRIC_TERM_CAP + 1);
    }
    let head = terms(1..pre + 1);
    let cycle = terms(pre + 1..pre + period + 1);
    head + cycle / (1.0 - 0.5f64.powi(period as i32))
}

/// Smallest 1-based start `p ≤ horizon − |word| + 1` where `word` occurs.
pub fn contains_word(
    seq: &SymbolSeq,
    word: &[Symbol],
    horizon: usize,
) -> Result<Option<usize>, SeqError> {
    if word.is_empty() {
        return Err(SeqError::InvalidArgument("word must be nonempty".into()));
    }
    if horizon < word.len() {
        return Ok(None);
    }
    let hay = seq.prefix_clamped(horizon);
    Ok(hay
        .windows(word.len())
        .position(|w| w == word)
        .map(|p| p + 1))
}

/// Largest `L ≤ horizon` with `a_k = b_k` for all `k ≤ L`.
pub fn agreement_prefix_length(
    a: &SymbolSeq,
    b: &SymbolSeq,
    horizon: usize,
) -> Result<usize, SeqError> {
    same_alphabet(a, b)?;
    if let (Some((pa, ba)), Some((pb, bb))) = (a.periodic_parts(), b.periodic_parts()) {
        // Beyond prefix + lcm the comparison repeats.
        let limit = pa.len().max(pb.len()) + ba.len() / gcd(ba.len(), bb.len()) * bb.len();
        let first_diff = (1..=limit.min(horizon))
            .find(|&k| periodic_symbol(pa, ba, k) != periodic_symbol(pb, bb, k));
        return Ok(first_diff.map_or(horizon, |k| k - 1));
    }
    let sa = a.prefix_clamped(horizon);
    let sb = b.prefix_clamped(horizon);
    Ok(sa.iter().zip(&sb).take_while(|(x, y)| x == y).count())
}
