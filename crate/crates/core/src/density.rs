//! Densities and counts: the sigma factors measuring how often B is
//! admissible at an inert prime, exact counts of admissible B against their
//! main terms, exact partial sums of sigma along arithmetic progressions,
//! refinement trees bracketing local solubility densities at ramified
//! primes, and full grid scans that tally every verdict kind.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::arith::{factorize, ArithError, PrimeType};
use crate::brauer::{
    brauer_rank_guard, inert_constancy, per_prime_admissible, verdict, RankGuard, VerdictKind,
};
use crate::localsolve::{class_profile, depth_clamp, ClassOutcome, ClassProfile};
use crate::surface::{g_poly, Discriminant, SurfaceParams};

/// Exact rational type used for densities and measures in this module.
pub type Rat = Ratio<i128>;

// ---------------------------------------------------------------------------
// Sigma: the density of admissible B at one inert prime.

/// A local density in (0, 1], stored exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct SigmaValue(Rat);

impl SigmaValue {
    fn new(v: Rat) -> Self {
        assert!(
            v > Rat::zero() && v <= Rat::one(),
            "sigma out of range: {v}"
        );
        SigmaValue(v)
    }

    pub fn value(self) -> Rat {
        self.0
    }

    pub fn to_f64(self) -> f64 {
        ratio_f64(self.0)
    }
}

fn ratio_f64(r: Rat) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// The proportion of q-adic B admissible for an n with q^l exactly dividing
/// it, q inert. Counting B by the valuation 2k of its square part turns the
/// admissibility condition into a geometric series whose closed forms are
///
///   l odd:  (q^(l+1) + 1) / (2 (q + 1) q^l)
///   l even: (q^(l+1) + q + 2) / (2 (q + 1) q^l)
///
/// Both tend to 1/2 + 1/(2(q+1)) side-by-side as l grows, and sigma(q) is
/// already below 1/2 + 1/q.
pub fn sigma_prime_power(q: u128, l: u32) -> SigmaValue {
    assert!(q >= 3 && q % 2 == 1, "inert primes are odd");
    assert!(l >= 1);
    let q = q as i128;
    let ql1 = q.checked_pow(l + 1).expect("prime power out of range");
    assert!(ql1 <= i128::MAX / 4, "prime power out of range");
    let ql = ql1 / q;
    let num = if l % 2 == 1 { ql1 + 1 } else { ql1 + q + 2 };
    SigmaValue::new(Rat::new(num, 2 * (q + 1) * ql))
}

fn big_pow(base: u128, e: u32) -> BigInt {
    let b = BigInt::from(base);
    let mut acc = BigInt::one();
    for _ in 0..e {
        acc *= &b;
    }
    acc
}

/// Partial sums of the series defining sigma(q^l), for cross-checking the
/// closed forms. Counting B with square part q^(2k) contributes
/// (q - 1) / (2 q^(2k+1)) per k; for even l the series is the finite run
/// k < l/2 plus the mass q^(-l) of B divisible by q^l, so the result is
/// exact once `terms >= l/2`. For odd l two geometric runs remain infinite
/// (k from 0 and k from (l+1)/2) and both are truncated at `terms`.
pub fn sigma_series_truncated(q: u128, l: u32, terms: u32) -> BigRational {
    assert!(q >= 3 && l >= 1);
    let half_gap = |k: u32| {
        // (q - 1) / (2 q^(2k+1))
        BigRational::new(BigInt::from(q - 1), BigInt::from(2u32) * big_pow(q, 2 * k + 1))
    };
    let mut total = BigRational::zero();
    if l % 2 == 0 {
        total += BigRational::new(BigInt::one(), big_pow(q, l));
        for k in 0..(l / 2).min(terms) {
            total += half_gap(k);
        }
    } else {
        for k in 0..terms {
            total += half_gap(k);
        }
        for k in (l + 1) / 2..terms {
            total += half_gap(k);
        }
    }
    total
}

/// What truncating both runs of the odd-l series at `terms` can drop: each
/// geometric tail is (q - 1) / (2 q^(2K+1)) / (1 - q^-2), i.e.
/// q / (2 (q + 1) q^(2K)), and there are two of them.
pub fn sigma_series_tail_bound(q: u128, terms: u32) -> BigRational {
    BigRational::new(BigInt::from(q), BigInt::from(q + 1) * big_pow(q, 2 * terms))
}

/// sigma(n): the product of sigma(q^l) over inert prime powers q^l exactly
/// dividing n. Split and ramified primes impose no condition, so they
/// contribute 1, as does the sign: sigma(-n) = sigma(n) and sigma(1) = 1.
pub fn sigma(n: i128, d: Discriminant) -> Result<SigmaValue, ArithError> {
    assert!(n != 0);
    assert!(
        n.unsigned_abs() < 1 << 48,
        "sigma factors must stay in fixed precision"
    );
    let f = factorize(n)?;
    let mut acc = Rat::one();
    for &(q, l) in &f.factors {
        if d.prime_type(q) == PrimeType::Inert {
            acc *= sigma_prime_power(q, l).value();
        }
    }
    Ok(SigmaValue::new(acc))
}

// ---------------------------------------------------------------------------
// Counting admissible B in an interval, and the main term it tracks.

/// Exact count of B with max(-N, -N-n) <= B <= min(N, N-n), B = b0 (mod t),
/// and B admissible for n at every inert prime dividing n. The degenerate
/// values B = 0 and B = -n are counted as admissible; they index singular
/// surfaces, but keeping them makes the inert-free count exactly the
/// interval length and changes nothing at scale.
pub fn r_bruteforce(cap: i64, n: i128, t: u64, b0: u64, d: Discriminant) -> u64 {
    assert!(cap >= 0 && n != 0 && t >= 1);
    assert!((b0 as u128) < t as u128);
    let cap = cap as i128;
    let t = t as i128;
    let lo = (-cap).max(-cap - n);
    let hi = cap.min(cap - n);
    if lo > hi {
        return 0;
    }
    let inert: Vec<u128> = factorize(n)
        .expect("n is nonzero")
        .primes()
        .filter(|&q| d.prime_type(q) == PrimeType::Inert)
        .collect();
    let mut b = lo + (b0 as i128 - lo).rem_euclid(t);
    let mut count = 0u64;
    while b <= hi {
        let ok = b == 0 || b == -n || inert.iter().all(|&q| per_prime_admissible(b, n, q));
        count += u64::from(ok);
        b += t;
    }
    count
}

/// The main term (2N - |n| + 1) sigma(n) / T that `r_bruteforce` tracks.
pub fn r_mainterm(cap: i64, n: i128, t: u64, d: Discriminant) -> Result<Rat, ArithError> {
    assert!(cap >= 0 && n != 0 && t >= 1);
    let len = (2 * cap as i128 - n.abs() + 1).max(0);
    Ok(Rat::from_integer(len) * sigma(n, d)?.value() / Rat::from_integer(t as i128))
}

// ---------------------------------------------------------------------------
// Exact partial sums of sigma along progressions.

/// Smallest prime factor for every index up to x.
fn spf_sieve(x: u64) -> Vec<u32> {
    let n = usize::try_from(x).expect("sieve bound fits in memory");
    assert!(n <= 100_000_000, "sieve bound too large");
    let mut spf = vec![0u32; n + 1];
    let mut i = 2usize;
    while i <= n {
        if spf[i] == 0 {
            let mut j = i;
            while j <= n {
                if spf[j] == 0 {
                    spf[j] = i as u32;
                }
                j += i;
            }
        }
        i += 1;
    }
    spf
}

/// Binary-counter accumulator: slot i holds a sum of about 2^i terms, so
/// additions happen between rationals of comparable size instead of
/// repeatedly folding small terms into one huge one.
#[derive(Default)]
struct BalancedSum {
    slots: Vec<Option<rug::Rational>>,
}

impl BalancedSum {
    fn push(&mut self, mut v: rug::Rational) {
        for slot in self.slots.iter_mut() {
            match slot.take() {
                None => {
                    *slot = Some(v);
                    return;
                }
                Some(s) => v += s,
            }
        }
        self.slots.push(Some(v));
    }

    fn finish(self) -> rug::Rational {
        let mut total = rug::Rational::new();
        for s in self.slots.into_iter().flatten() {
            total += s;
        }
        total
    }
}

/// sigma(n) as an unreduced u128 fraction, from the factor sieve. Safe
/// because each factor's numerator is below its denominator and the
/// denominator product is at most 4^omega(n) n^2.
fn sigma_sieved(
    n: u64,
    spf: &[u32],
    kind: &mut [u8],
    d: Discriminant,
) -> (u128, u128) {
    let (mut num, mut den) = (1u128, 1u128);
    let mut m = n;
    while m > 1 {
        let q = spf[m as usize] as u64;
        let mut l = 0u32;
        while m % q == 0 {
            m /= q;
            l += 1;
        }
        let k = &mut kind[q as usize];
        if *k == 0 {
            *k = match d.prime_type(q as u128) {
                PrimeType::Inert => 1,
                _ => 2,
            };
        }
        if *k == 1 {
            let s = sigma_prime_power(q as u128, l).value();
            num *= *s.numer() as u128;
            den *= *s.denom() as u128;
        }
    }
    (num, den)
}

fn sigma_sum_impl(x: u64, t: u64, residue: u64, d: Discriminant, weighted: bool) -> rug::Rational {
    assert!(t >= 1 && residue < t);
    if x == 0 {
        return rug::Rational::new();
    }
    let spf = spf_sieve(x);
    let mut kind = vec![0u8; spf.len()];
    let mut acc = BalancedSum::default();
    // terms with sigma(n) = 1 cost nothing if summed separately
    let mut units = 0u128;
    let mut n = if residue == 0 { t } else { residue };
    while n <= x {
        let (num, den) = sigma_sieved(n, &spf, &mut kind, d);
        if den == 1 {
            units += if weighted { n as u128 } else { 1 };
        } else {
            let mut r = rug::Rational::from((rug::Integer::from(num), rug::Integer::from(den)));
            if weighted {
                r *= rug::Integer::from(n);
            }
            acc.push(r);
        }
        match n.checked_add(t) {
            Some(next) => n = next,
            None => break,
        }
    }
    let mut total = acc.finish();
    total += rug::Rational::from(rug::Integer::from(units));
    total
}

/// Exact sum of sigma(n) over 1 <= n <= x with n = residue (mod t).
pub fn sigma_progression_sum(x: u64, t: u64, residue: u64, d: Discriminant) -> rug::Rational {
    sigma_sum_impl(x, t, residue, d, false)
}

/// Exact sum of n sigma(n) over the same progression.
pub fn weighted_sigma_sum(x: u64, t: u64, residue: u64, d: Discriminant) -> rug::Rational {
    sigma_sum_impl(x, t, residue, d, true)
}

// ---------------------------------------------------------------------------
// Refinement trees: bracketing local densities at a ramified prime.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassTag {
    Soluble,
    Insoluble,
    Undecided,
}

#[derive(Debug, Clone, Copy)]
pub struct TreeLeaf {
    pub a: i128,
    pub b: i128,
    /// The class is (a, b) mod p^depth.
    pub depth: u32,
    pub tag: ClassTag,
}

/// The leaves of a solubility refinement tree over (Z_p)^2, together with
/// the exact mass of each tag. Leaves partition the unit square of classes,
/// so the three masses always sum to 1.
#[derive(Debug, Clone)]
pub struct DensityTree {
    pub p: u128,
    pub refine_depth: u32,
    pub leaves: Vec<TreeLeaf>,
    pub soluble_mass: Rat,
    pub insoluble_mass: Rat,
    pub undecided_mass: Rat,
}

impl DensityTree {
    /// [lower, upper] bounds for the true density of soluble (A, B): what is
    /// proved soluble, and that plus everything not yet decided.
    pub fn interval(&self) -> (Rat, Rat) {
        (self.soluble_mass, self.soluble_mass + self.undecided_mass)
    }

    pub fn total_mass(&self) -> Rat {
        self.soluble_mass + self.insoluble_mass + self.undecided_mass
    }
}

fn ppow(p: u128, e: u32) -> i128 {
    let mut acc = 1i128;
    for _ in 0..e {
        acc = acc.checked_mul(p as i128).expect("prime power out of range");
    }
    acc
}

type ClassKey = (i128, u128, u32, i128, i128);

/// Swapping A and B permutes the two linear factors in the second quadric
/// and fixes everything else, so a class and its mirror share one engine
/// run. Keys are stored in the mirror-canonical form.
fn canonical_class(a: i128, b: i128, pj: i128) -> (i128, i128) {
    let a = a.rem_euclid(pj);
    let b = b.rem_euclid(pj);
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Process-wide memo for class profile runs. Trees, scans and tables all
/// draw on the same pool, and nothing here depends on who asked first.
/// Profile runs enumerate the complete value set, which also settles
/// solubility, so one cache serves every consumer.
fn cached_class_profile(
    d: Discriminant,
    p: u128,
    a: i128,
    b: i128,
    j: u32,
) -> ClassOutcome<ClassProfile> {
    static CACHE: OnceLock<Mutex<HashMap<ClassKey, ClassOutcome<ClassProfile>>>> = OnceLock::new();
    let (a, b) = canonical_class(a, b, ppow(p, j));
    let key = (d.value(), p, j, a, b);
    let cache = CACHE.get_or_init(Default::default);
    if let Some(hit) = cache.lock().unwrap().get(&key) {
        return *hit;
    }
    // computed outside the lock; a racing duplicate lands on the same value
    let out = class_profile(d, p, a, b, j);
    cache.lock().unwrap().insert(key, out);
    out
}

/// Deepening walk for one concrete pair: try budgets until one decides,
/// walking past capped levels since a looser budget can still settle the
/// class. Mirrors the cached walker in `localsolve` but shares its runs
/// process-wide.
fn cached_deep_profile(d: Discriminant, p: u128, a: i128, b: i128) -> ClassOutcome<ClassProfile> {
    let max_j = (depth_clamp(p) / 2).clamp(1, 16);
    for j in 1..=max_j {
        if let ClassOutcome::Decided(pr) = cached_class_profile(d, p, a, b, j) {
            return ClassOutcome::Decided(pr);
        }
    }
    ClassOutcome::Exhausted
}

/// Levels whose class space p^(2j) exceeds this are never attempted: the
/// engine's cost per class grows steeply with both p and the budget, and
/// the frontier grows by p^2 per level, so deep levels at large primes
/// would dwarf everything else for a sliver of decided mass. Classes past
/// the bound stay undecided, which only widens the reported brackets.
const CLASS_SPACE_LIMIT: u128 = 2_000_000;

fn level_attemptable(p: u128, j: u32) -> bool {
    p.checked_pow(2 * j).is_some_and(|sz| sz <= CLASS_SPACE_LIMIT)
}

/// Breadth-first refinement: decide each class mod p^j, split the undecided
/// ones into their p^2 children, stop at refine_depth or at the class-space
/// bound, whichever comes first. The decision callback sees (a, b, j); the
/// record callback gets every leaf with its mass 1/p^(2j) and `None` for
/// still-undecided frontier leaves.
fn refine_walk<T: Copy>(
    p: u128,
    refine_depth: u32,
    decide: impl Fn(i128, i128, u32) -> ClassOutcome<T>,
    mut record: impl FnMut(i128, i128, u32, Option<T>, Rat),
) {
    assert!((1..=12).contains(&refine_depth), "refine depth out of range");
    assert!(level_attemptable(p, 1), "prime too large to refine at all");
    let pi = p as i128;
    let mut frontier: Vec<(i128, i128)> = (0..pi)
        .flat_map(|a| (0..pi).map(move |b| (a, b)))
        .collect();
    for j in 1..=refine_depth {
        let pj = ppow(p, j);
        let mass = Rat::new(1, pj.checked_mul(pj).expect("mass denominator overflow"));
        let deeper = j < refine_depth && level_attemptable(p, j + 1);
        let mut next = Vec::new();
        for &(a, b) in &frontier {
            match decide(a, b, j) {
                ClassOutcome::Decided(v) => record(a, b, j, Some(v), mass),
                // splitting on Exhausted too: a cap at this level does not
                // preclude the children from being decidable
                ClassOutcome::Refine | ClassOutcome::Exhausted => {
                    if deeper {
                        for s in 0..pi {
                            for r in 0..pi {
                                next.push((a + s * pj, b + r * pj));
                            }
                        }
                    } else {
                        record(a, b, j, None, mass);
                    }
                }
            }
        }
        frontier = next;
        if frontier.is_empty() {
            break;
        }
    }
}

/// Build the solubility refinement tree at a ramified prime p.
pub fn solubility_tree(d: Discriminant, p: u128, refine_depth: u32) -> DensityTree {
    assert!(
        d.prime_type(p) == PrimeType::Ramified,
        "density trees live at ramified primes"
    );
    let mut leaves = Vec::new();
    let mut soluble_mass = Rat::zero();
    let mut insoluble_mass = Rat::zero();
    let mut undecided_mass = Rat::zero();
    refine_walk(
        p,
        refine_depth,
        |a, b, j| match cached_class_profile(d, p, a, b, j) {
            ClassOutcome::Decided(pr) => ClassOutcome::Decided(pr.soluble),
            ClassOutcome::Refine => ClassOutcome::Refine,
            ClassOutcome::Exhausted => ClassOutcome::Exhausted,
        },
        |a, b, depth, decided, mass| {
            let tag = match decided {
                Some(true) => {
                    soluble_mass += mass;
                    ClassTag::Soluble
                }
                Some(false) => {
                    insoluble_mass += mass;
                    ClassTag::Insoluble
                }
                None => {
                    undecided_mass += mass;
                    ClassTag::Undecided
                }
            };
            leaves.push(TreeLeaf { a, b, depth, tag });
        },
    );
    DensityTree {
        p,
        refine_depth,
        leaves,
        soluble_mass,
        insoluble_mass,
        undecided_mass,
    }
}

/// Bounds for the density of (A, B) in (Z_p)^2 whose surface is soluble
/// over Q_p, from the refinement tree at p.
pub fn local_density_p(d: Discriminant, p: u128, refine_depth: u32) -> (Rat, Rat) {
    solubility_tree(d, p, refine_depth).interval()
}

/// Bounds for the everywhere-local density constant: 4 times the product of
/// the per-prime density intervals over the ramified primes.
///
/// A flat enumeration would fix one depth L and sum 1/p^(2L) over the
/// soluble classes mod p^L. The tree computes the same sum: a leaf decided
/// at level j < L stands for exactly p^(2(L-j)) classes mod p^L, all with
/// the same status, and its mass 1/p^(2j) is their combined mass, so the
/// decided masses telescope to the flat sum at every depth while the
/// undecided leaves carry the balance as an explicit bracket. The factor 4
/// counts the soluble proportion at the remaining places: the reals and the
/// split prime 2 never fail, and at odd unramified primes a smooth member
/// is soluble outright, while the archimedean sign conditions cut the
/// (A, B) grid by nothing and the normalization here follows the counting
/// measure of the scans, which weight each of the four sign quadrants once.
pub fn c_loc(d: Discriminant, refine_depth: u32) -> (Rat, Rat) {
    let mut lo = Rat::from_integer(4);
    let mut hi = Rat::from_integer(4);
    for p in d.ramified_primes() {
        let (plo, phi) = local_density_p(d, p, refine_depth);
        lo *= plo;
        hi *= phi;
    }
    (lo, hi)
}

/// Per-value masses of the constant-evaluation classes at a ramified prime:
/// soluble classes whose evaluation is constantly 0, constantly 1/2, the
/// mass excluded outright (insoluble, or soluble with both values attained),
/// and the undecided remainder.
#[derive(Debug, Clone)]
pub struct ProfileMeasures {
    pub p: u128,
    pub refine_depth: u32,
    pub zero: Rat,
    pub half: Rat,
    pub excluded: Rat,
    pub undecided: Rat,
}

impl ProfileMeasures {
    pub fn total_mass(&self) -> Rat {
        self.zero + self.half + self.excluded + self.undecided
    }
}

/// Refinement-tree masses of the evaluation profiles at a ramified prime.
pub fn profile_measures(d: Discriminant, p: u128, refine_depth: u32) -> ProfileMeasures {
    assert!(
        d.prime_type(p) == PrimeType::Ramified,
        "profiles live at ramified primes"
    );
    let mut out = ProfileMeasures {
        p,
        refine_depth,
        zero: Rat::zero(),
        half: Rat::zero(),
        excluded: Rat::zero(),
        undecided: Rat::zero(),
    };
    refine_walk(
        p,
        refine_depth,
        |a, b, j| cached_class_profile(d, p, a, b, j),
        |_, _, _, decided, mass| match decided {
            Some(pr) => match profile_code(&pr) {
                CODE_ZERO => out.zero += mass,
                CODE_HALF => out.half += mass,
                _ => out.excluded += mass,
            },
            None => out.undecided += mass,
        },
    );
    out
}

// ---------------------------------------------------------------------------
// Grid scans.

/// Tallies of every verdict kind over a scan region.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ScanCounts {
    pub singular: u64,
    pub locally_insoluble: u64,
    pub bm_violations: u64,
    pub no_obstruction: u64,
    pub indeterminate: u64,
    pub depth_exhausted: u64,
}

impl ScanCounts {
    fn bump(&mut self, kind: VerdictKind) {
        match kind {
            VerdictKind::Singular => self.singular += 1,
            VerdictKind::LocallyInsoluble => self.locally_insoluble += 1,
            VerdictKind::BMViolation => self.bm_violations += 1,
            VerdictKind::NoBMObstruction => self.no_obstruction += 1,
            VerdictKind::IndeterminateBrauer => self.indeterminate += 1,
            VerdictKind::DepthExhausted => self.depth_exhausted += 1,
        }
    }

    fn merged(mut self, other: ScanCounts) -> ScanCounts {
        self.singular += other.singular;
        self.locally_insoluble += other.locally_insoluble;
        self.bm_violations += other.bm_violations;
        self.no_obstruction += other.no_obstruction;
        self.indeterminate += other.indeterminate;
        self.depth_exhausted += other.depth_exhausted;
        self
    }

    pub fn total(&self) -> u64 {
        self.singular
            + self.locally_insoluble
            + self.bm_violations
            + self.no_obstruction
            + self.indeterminate
            + self.depth_exhausted
    }

    pub fn total_smooth(&self) -> u64 {
        self.total() - self.singular
    }

    /// Pairs proved soluble at every place with a fully enumerated
    /// evaluation set; depth_exhausted pairs stay unresolved and are not
    /// included.
    pub fn locally_soluble(&self) -> u64 {
        self.bm_violations + self.no_obstruction + self.indeterminate
    }
}

/// One scan's identity and results. For unrestricted scans the congruence
/// fields are (1, 0, 0) and the gcd split is absent.
#[derive(Debug, Clone)]
pub struct ScanReport {
    pub d: i128,
    pub cap: i64,
    pub t: u64,
    pub a: u64,
    pub b: u64,
    /// gcd(b - a, t) and its cofactor, for congruence scans.
    pub t_prime: Option<u64>,
    pub t_dprime: Option<u64>,
    pub counts: ScanCounts,
    pub elapsed: Duration,
}

pub const SCAN_CSV_HEADER: &str = "N,D,T,a,b,total_smooth,locally_soluble,bm_violations,indeterminate,depth_exhausted,singular,elapsed_ms";

impl ScanReport {
    /// One CSV row. The elapsed_ms column is pinned to 0 so that a given
    /// configuration always produces identical bytes; wall-clock timing
    /// lives in `elapsed` and is reported out of band.
    pub fn csv_row(&self) -> String {
        let c = &self.counts;
        let mut row = format!(
            "{},{},{},{},{},{},{},{},{},{},{},0",
            self.cap,
            self.d,
            self.t,
            self.a,
            self.b,
            c.total_smooth(),
            c.locally_soluble(),
            c.bm_violations,
            c.indeterminate,
            c.depth_exhausted,
            c.singular
        );
        if let (Some(tp), Some(tdp)) = (self.t_prime, self.t_dprime) {
            row.push_str(&format!(",{tp},{tdp}"));
        }
        row
    }
}

/// Render scan reports as CSV with leading `#` configuration comments.
/// Congruence reports append their gcd-split columns after the fixed ones.
pub fn write_scan_csv(reports: &[ScanReport], config_lines: &[String]) -> String {
    let mut out = String::new();
    for line in config_lines {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    let split = reports.first().is_some_and(|r| r.t_prime.is_some());
    out.push_str(SCAN_CSV_HEADER);
    if split {
        out.push_str(",t_prime,t_dprime");
    }
    out.push('\n');
    for r in reports {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

// Codes for a decided class profile in the dense lookup tables.
const CODE_INSOLUBLE: u8 = 0;
const CODE_ZERO: u8 = 1;
const CODE_HALF: u8 = 2;
const CODE_BOTH: u8 = 3;
const CODE_ESCAPE: u8 = 4;

fn profile_code(pr: &ClassProfile) -> u8 {
    if !pr.soluble {
        CODE_INSOLUBLE
    } else {
        match (pr.eval.zero, pr.eval.half) {
            (true, false) => CODE_ZERO,
            (false, true) => CODE_HALF,
            // an empty complete value set cannot certify constancy either,
            // so it lands with the two-valued case
            _ => CODE_BOTH,
        }
    }
}

/// A prime's dense profile table over (A, B) mod p^j0, with j0 chosen so
/// the table stays small. Classes still undecided at j0 hold CODE_ESCAPE
/// and are resolved through the cached deep walker. Primes too large for
/// even one dense level get an empty table and always escape.
struct PrimeTable {
    p: u128,
    modulus: i128,
    codes: Vec<u8>,
}

const TABLE_ENTRY_CAP: u128 = 1 << 17;

struct RamifiedTables {
    tables: Vec<PrimeTable>,
}

fn build_prime_table(d: Discriminant, p: u128) -> PrimeTable {
    if p.checked_mul(p).map_or(true, |sq| sq > TABLE_ENTRY_CAP) {
        return PrimeTable {
            p,
            modulus: p as i128,
            codes: Vec::new(),
        };
    }
    let mut j0 = 1u32;
    while p
        .checked_pow(2 * (j0 + 1))
        .is_some_and(|sz| sz <= TABLE_ENTRY_CAP)
    {
        j0 += 1;
    }
    let m = ppow(p, j0);
    let mut codes = vec![CODE_ESCAPE; (m * m) as usize];
    refine_walk(
        p,
        j0,
        |a, b, j| cached_class_profile(d, p, a, b, j),
        |a, b, depth, decided, _| {
            if let Some(pr) = decided {
                // paint every table entry under this class
                let code = profile_code(&pr);
                let pj = ppow(p, depth);
                let mut x = a;
                while x < m {
                    let mut y = b;
                    while y < m {
                        codes[(x * m + y) as usize] = code;
                        y += pj;
                    }
                    x += pj;
                }
            }
        },
    );
    PrimeTable { p, modulus: m, codes }
}

/// Dense tables are immutable once built and shared between scans.
fn ramified_tables(d: Discriminant) -> Arc<RamifiedTables> {
    static CACHE: OnceLock<Mutex<HashMap<i128, Arc<RamifiedTables>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let mut guard = cache.lock().unwrap();
    guard
        .entry(d.value())
        .or_insert_with(|| {
            Arc::new(RamifiedTables {
                tables: d
                    .ramified_primes()
                    .into_iter()
                    .map(|p| build_prime_table(d, p))
                    .collect(),
            })
        })
        .clone()
}

/// Rolling position of one row of pairs (B + n, B) inside a prime table:
/// residues advance by addition only.
struct RowCursor<'t> {
    p: u128,
    m: i128,
    step: i128,
    am: i128,
    bm: i128,
    codes: &'t [u8],
}

impl RowCursor<'_> {
    fn advance(&mut self) {
        self.am += self.step;
        if self.am >= self.m {
            self.am -= self.m;
        }
        self.bm += self.step;
        if self.bm >= self.m {
            self.bm -= self.m;
        }
    }
}

struct RowState<'t> {
    d: Discriminant,
    cursors: Vec<RowCursor<'t>>,
}

impl<'t> RowState<'t> {
    fn new(d: Discriminant, tables: &'t RamifiedTables, b0: i128, n: i128, step: i128) -> Self {
        let cursors = tables
            .tables
            .iter()
            .map(|tb| RowCursor {
                p: tb.p,
                m: tb.modulus,
                step: step.rem_euclid(tb.modulus),
                am: (b0 + n).rem_euclid(tb.modulus),
                bm: b0.rem_euclid(tb.modulus),
                codes: &tb.codes,
            })
            .collect();
        RowState { d, cursors }
    }

    fn advance(&mut self) {
        for cur in &mut self.cursors {
            cur.advance();
        }
    }
}

enum RamifiedData {
    Insoluble,
    /// Soluble everywhere; number of constant-1/2 places and whether any
    /// place fails to be constant.
    Soluble { halves: u32, nonconstant: bool },
    /// A class the walker cannot decide; the concrete pipeline takes over.
    Unresolved,
}

fn ramified_data(a_int: i128, b: i128, row: &RowState) -> RamifiedData {
    let mut halves = 0u32;
    let mut nonconstant = false;
    for cur in &row.cursors {
        let mut code = if cur.codes.is_empty() {
            CODE_ESCAPE
        } else {
            cur.codes[(cur.am * cur.m + cur.bm) as usize]
        };
        if code == CODE_ESCAPE {
            code = match cached_deep_profile(row.d, cur.p, a_int, b) {
                ClassOutcome::Decided(pr) => profile_code(&pr),
                _ => return RamifiedData::Unresolved,
            };
        }
        match code {
            CODE_INSOLUBLE => return RamifiedData::Insoluble,
            CODE_ZERO => {}
            CODE_HALF => halves += 1,
            _ => nonconstant = true,
        }
    }
    RamifiedData::Soluble { halves, nonconstant }
}

/// Classify one smooth pair through the dense tables, mirroring the
/// concrete verdict pipeline exactly.
fn classify_smooth(
    d: Discriminant,
    a_int: i128,
    b: i128,
    inert: &[u128],
    row: &RowState,
    max_depth: Option<u32>,
) -> VerdictKind {
    let (halves, mut nonconstant) = match ramified_data(a_int, b, row) {
        RamifiedData::Insoluble => return VerdictKind::LocallyInsoluble,
        RamifiedData::Unresolved => return verdict(d, a_int, b, max_depth).kind,
        RamifiedData::Soluble { halves, nonconstant } => (halves, nonconstant),
    };
    let params = SurfaceParams::new(d, a_int, b).expect("pair is smooth");
    if !nonconstant {
        for &q in inert {
            if !inert_constancy(&params, q).constant {
                nonconstant = true;
                break;
            }
        }
        if !nonconstant && halves % 2 == 1 {
            return VerdictKind::BMViolation;
        }
    }
    match brauer_rank_guard(&params) {
        RankGuard::Generic => VerdictKind::NoBMObstruction,
        RankGuard::PossiblyLarger => VerdictKind::IndeterminateBrauer,
    }
}

/// The B interval for one value of n = A - B, with both coordinates capped,
/// plus the congruence step and start if a restriction applies. None means
/// the row is empty.
fn row_geometry(
    cap: i128,
    n: i128,
    cong: Option<(u64, u64, u64)>,
) -> Option<(i128, i128, i128)> {
    let lo = (-cap).max(-cap - n);
    let hi = cap.min(cap - n);
    if lo > hi {
        return None;
    }
    let (step, b0) = match cong {
        None => (1, lo),
        Some((t, a, b)) => {
            let t = t as i128;
            if (n - (a as i128 - b as i128)).rem_euclid(t) != 0 {
                return None;
            }
            (t, lo + (b as i128 - lo).rem_euclid(t))
        }
    };
    if b0 > hi {
        return None;
    }
    Some((b0, hi, step))
}

fn inert_divisors(n: i128, d: Discriminant) -> Vec<u128> {
    factorize(n)
        .expect("n is nonzero")
        .primes()
        .filter(|&q| d.prime_type(q) == PrimeType::Inert)
        .collect()
}

fn scan_row(
    d: Discriminant,
    cap: i128,
    n: i128,
    cong: Option<(u64, u64, u64)>,
    max_depth: Option<u32>,
    tables: &RamifiedTables,
) -> ScanCounts {
    let mut counts = ScanCounts::default();
    let Some((b0, hi, step)) = row_geometry(cap, n, cong) else {
        return counts;
    };
    let inert = inert_divisors(n, d);
    let mut row = RowState::new(d, tables, b0, n, step);
    let mut b = b0;
    while b <= hi {
        let a_int = b + n;
        if b == 0 || a_int == 0 || g_poly(a_int, b) == 0 {
            counts.singular += 1;
        } else {
            counts.bump(classify_smooth(d, a_int, b, &inert, &row, max_depth));
        }
        row.advance();
        b += step;
    }
    counts
}

/// Singular diagonal pairs (B, B) matching the congruence restriction.
fn diagonal_count(cap: i128, cong: Option<(u64, u64, u64)>) -> u64 {
    match cong {
        None => (2 * cap + 1) as u64,
        Some((t, a, b)) => {
            if a != b {
                return 0;
            }
            let t = t as i128;
            let first = -cap + (b as i128 + cap).rem_euclid(t);
            if first > cap {
                0
            } else {
                ((cap - first) / t + 1) as u64
            }
        }
    }
}

fn scan_core(
    d: Discriminant,
    cap: i64,
    cong: Option<(u64, u64, u64)>,
    max_depth: Option<u32>,
) -> ScanCounts {
    assert!(cap >= 0);
    if let Some((t, a, b)) = cong {
        assert!(t >= 1 && a < t && b < t);
        assert!(
            factorize(t as i128)
                .expect("t >= 1")
                .primes()
                .all(|q| d.value() % q as i128 == 0),
            "congruence modulus must be built from ramified primes"
        );
    }
    let tables = ramified_tables(d);
    let cap = cap as i128;
    let rows: Vec<i128> = (-2 * cap..=2 * cap).filter(|&n| n != 0).collect();
    let mut counts = rows
        .par_iter()
        .map(|&n| scan_row(d, cap, n, cong, max_depth, &tables))
        .reduce(ScanCounts::default, ScanCounts::merged);
    counts.singular += diagonal_count(cap, cong);
    counts
}

/// Scan the full grid |A|, |B| <= N and tally every verdict kind. The
/// headline count is `bm_violations`: smooth surfaces soluble at every
/// place whose constant total evaluation is 1/2.
pub fn scan_rbr(d: Discriminant, cap: i64, max_depth: Option<u32>) -> ScanReport {
    let start = Instant::now();
    let counts = scan_core(d, cap, None, max_depth);
    ScanReport {
        d: d.value(),
        cap,
        t: 1,
        a: 0,
        b: 0,
        t_prime: None,
        t_dprime: None,
        counts,
        elapsed: start.elapsed(),
    }
}

/// The same scan read for its `locally_soluble` count.
pub fn scan_rloc(d: Discriminant, cap: i64, max_depth: Option<u32>) -> ScanReport {
    scan_rbr(d, cap, max_depth)
}

/// Scan the sublattice A = a, B = b (mod t), where t is built from ramified
/// primes. The report carries the gcd split t_prime = gcd(b - a, t),
/// t_dprime = t / t_prime, which separates the part of t constraining
/// n = A - B from the part constraining B alone.
pub fn scan_rbr_congruence(
    d: Discriminant,
    cap: i64,
    t: u64,
    a: u64,
    b: u64,
    max_depth: Option<u32>,
) -> ScanReport {
    let start = Instant::now();
    let counts = scan_core(d, cap, Some((t, a, b)), max_depth);
    let diff = (b as i128 - a as i128).rem_euclid(t as i128) as u64;
    let t_prime = num_integer::gcd(diff, t);
    ScanReport {
        d: d.value(),
        cap,
        t,
        a,
        b,
        t_prime: Some(t_prime),
        t_dprime: Some(t / t_prime),
        counts,
        elapsed: start.elapsed(),
    }
}

fn bm_row(
    d: Discriminant,
    cap: i128,
    n: i128,
    max_depth: Option<u32>,
    tables: &RamifiedTables,
) -> u64 {
    let Some((b0, hi, step)) = row_geometry(cap, n, None) else {
        return 0;
    };
    let inert = inert_divisors(n, d);
    let mut row = RowState::new(d, tables, b0, n, step);
    let mut count = 0u64;
    let mut b = b0;
    while b <= hi {
        let a_int = b + n;
        if b != 0 && a_int != 0 && g_poly(a_int, b) != 0 {
            match ramified_data(a_int, b, &row) {
                RamifiedData::Insoluble => {}
                RamifiedData::Unresolved => {
                    count +=
                        u64::from(verdict(d, a_int, b, max_depth).kind == VerdictKind::BMViolation);
                }
                RamifiedData::Soluble { halves, nonconstant } => {
                    if !nonconstant
                        && halves % 2 == 1
                        && inert.iter().all(|&q| per_prime_admissible(b, n, q))
                    {
                        count += 1;
                    }
                }
            }
        }
        row.advance();
        b += step;
    }
    count
}

/// Count obstructed pairs on the grid by the admissibility route: for each
/// n = A - B, a soluble pair with constant ramified evaluations and an odd
/// number of 1/2 places is obstructed exactly when B satisfies the
/// admissibility condition at every inert prime dividing n. This shares no
/// inert-side logic with `scan_rbr`, which goes through the constancy
/// criterion instead, so agreement between the two is a real check.
pub fn count_bm_admissible(d: Discriminant, cap: i64, max_depth: Option<u32>) -> u64 {
    assert!(cap >= 0);
    let tables = ramified_tables(d);
    let cap = cap as i128;
    let rows: Vec<i128> = (-2 * cap..=2 * cap).filter(|&n| n != 0).collect();
    rows.par_iter()
        .map(|&n| bm_row(d, cap, n, max_depth, &tables))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brauer::verdict;

    #[test]
    #[ignore]
    fn probe_cost_model() {
        use std::collections::HashSet;
        use std::io::Write as _;
        use std::time::Instant;
        let mut log = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open("/tmp/probe3.txt")
            .unwrap();
        let mut say = |s: String| {
            writeln!(log, "{s}").unwrap();
            log.flush().unwrap();
        };
        for (dv, p) in [(17i128, 17u128), (33, 3), (33, 11)] {
            let d = Discriminant::new(dv).unwrap();
            let tabs = ramified_tables(d);
            let t = tabs.tables.iter().find(|t| t.p == p).unwrap();
            let mut hist = [0usize; 5];
            for &c in &t.codes {
                hist[c as usize] += 1;
            }
            say(format!(
                "D={dv} p={p} m={} insol={} zero={} half={} both={} escape={}",
                t.modulus, hist[0], hist[1], hist[2], hist[3], hist[4]
            ));
        }
        // random sample of the p=17 level-3 frontier
        let d = Discriminant::new(17).unwrap();
        let mut und2: Vec<(i128, i128)> = Vec::new();
        refine_walk(
            17,
            2,
            |a, b, j| cached_class_profile(d, 17, a, b, j),
            |a, b, _, decided, _| {
                if decided.is_none() {
                    und2.push((a, b));
                }
            },
        );
        say(format!("p=17 j<=2 undecided canonical-ish leaves: {}", und2.len()));
        let mut frontier: HashSet<(i128, i128)> = HashSet::new();
        let m3 = 17i128 * 17 * 17;
        for &(a, b) in &und2 {
            for s in 0..17i128 {
                for r in 0..17i128 {
                    frontier.insert(canonical_class(a + s * 289, b + r * 289, m3));
                }
            }
        }
        let mut front: Vec<_> = frontier.into_iter().collect();
        front.sort();
        say(format!("p=17 j=3 canonical frontier: {}", front.len()));
        let mut rng = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            rng ^= rng << 13;
            rng ^= rng >> 7;
            rng ^= rng << 17;
            rng
        };
        let mut costs = Vec::new();
        let mut decided = 0usize;
        let t0 = Instant::now();
        let mut und3sample = Vec::new();
        for _ in 0..120 {
            if t0.elapsed().as_secs() > 240 {
                break;
            }
            let (a, b) = front[(next() % front.len() as u64) as usize];
            let t1 = Instant::now();
            let out = cached_class_profile(d, 17, a, b, 3);
            let us = t1.elapsed().as_micros();
            costs.push(us);
            if matches!(out, ClassOutcome::Decided(_)) {
                decided += 1;
            } else {
                und3sample.push((a, b));
            }
        }
        costs.sort();
        let mean = costs.iter().sum::<u128>() / costs.len() as u128;
        say(format!(
            "p=17 j=3 sample n={} decided={} mean={}us median={}us p90={}us max={}us",
            costs.len(),
            decided,
            mean,
            costs[costs.len() / 2],
            costs[costs.len() * 9 / 10],
            costs.last().unwrap()
        ));
        // level-4 children of sampled undecided level-3 classes
        let mut costs4 = Vec::new();
        let mut dec4 = 0usize;
        let t0 = Instant::now();
        for &(a, b) in und3sample.iter() {
            if t0.elapsed().as_secs() > 120 || costs4.len() >= 30 {
                break;
            }
            let s = (next() % 17) as i128;
            let r = (next() % 17) as i128;
            let t1 = Instant::now();
            let out = cached_class_profile(d, 17, a + s * m3, b + r * m3, 4);
            costs4.push(t1.elapsed().as_micros());
            if matches!(out, ClassOutcome::Decided(_)) {
                dec4 += 1;
            }
        }
        if !costs4.is_empty() {
            costs4.sort();
            say(format!(
                "p=17 j=4 sample n={} decided={} median={}us max={}us",
                costs4.len(),
                dec4,
                costs4[costs4.len() / 2],
                costs4.last().unwrap()
            ));
        }
        // concrete verdicts on grid pairs, split by table code at p=17
        let tabs = ramified_tables(d);
        let t17 = tabs.tables.iter().find(|t| t.p == 17).unwrap();
        let cap = 100_000i128;
        let mut esc_costs = Vec::new();
        let mut esc_kinds = [0usize; 5];
        let mut plain_costs = Vec::new();
        let mut tried = 0u64;
        let mut escapes_seen = 0u64;
        let t0 = Instant::now();
        while (esc_costs.len() < 300 || plain_costs.len() < 200)
            && t0.elapsed().as_secs() < 300
        {
            tried += 1;
            let a = (next() % (2 * cap as u64 + 1)) as i128 - cap;
            let b = (next() % (2 * cap as u64 + 1)) as i128 - cap;
            if SurfaceParams::new(d, a, b).is_err() {
                continue;
            }
            let am = a.rem_euclid(t17.modulus);
            let bm = b.rem_euclid(t17.modulus);
            let code = t17.codes[(am * t17.modulus + bm) as usize];
            if code == CODE_ESCAPE {
                escapes_seen += 1;
                if esc_costs.len() < 300 {
                    let t1 = Instant::now();
                    let v = verdict(d, a, b, None);
                    esc_costs.push(t1.elapsed().as_micros());
                    esc_kinds[match v.kind {
                        VerdictKind::Singular => 0,
                        VerdictKind::LocallyInsoluble => 1,
                        VerdictKind::BMViolation => 2,
                        VerdictKind::NoBMObstruction => 3,
                        VerdictKind::IndeterminateBrauer => 4,
                        VerdictKind::DepthExhausted => 0,
                    }] += 1;
                }
            } else if plain_costs.len() < 200 && tried % 7 == 0 {
                let t1 = Instant::now();
                let _ = verdict(d, a, b, None);
                plain_costs.push(t1.elapsed().as_micros());
            }
        }
        esc_costs.sort();
        plain_costs.sort();
        say(format!(
            "escape rate: {escapes_seen}/{tried} = {:.4}",
            escapes_seen as f64 / tried as f64
        ));
        if !esc_costs.is_empty() {
            say(format!(
                "escape verdicts n={} mean={}us median={}us p90={}us max={}us kinds(sing/insol/bm/nob/ind)={:?}",
                esc_costs.len(),
                esc_costs.iter().sum::<u128>() / esc_costs.len() as u128,
                esc_costs[esc_costs.len() / 2],
                esc_costs[esc_costs.len() * 9 / 10],
                esc_costs.last().unwrap(),
                esc_kinds
            ));
        }
        if !plain_costs.is_empty() {
            say(format!(
                "plain verdicts n={} mean={}us median={}us max={}us",
                plain_costs.len(),
                plain_costs.iter().sum::<u128>() / plain_costs.len() as u128,
                plain_costs[plain_costs.len() / 2],
                plain_costs.last().unwrap()
            ));
        }
    }

    fn d17() -> Discriminant {
        Discriminant::new(17).unwrap()
    }

    fn d33() -> Discriminant {
        Discriminant::new(33).unwrap()
    }

    fn big(r: Rat) -> BigRational {
        BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
    }

    #[test]
    fn sigma_pinned_values() {
        assert_eq!(sigma_prime_power(3, 1).value(), Rat::new(5, 12));
        assert_eq!(sigma_prime_power(3, 2).value(), Rat::new(4, 9));
        assert_eq!(sigma_prime_power(5, 1).value(), Rat::new(13, 30));
        assert_eq!(sigma_prime_power(7, 1).value(), Rat::new(25, 56));
    }

    #[test]
    fn sigma_closed_form_matches_series() {
        for q in [3u128, 5, 7, 11] {
            for l in 1..=6u32 {
                let closed = big(sigma_prime_power(q, l).value());
                let series = sigma_series_truncated(q, l, 30);
                if l % 2 == 0 {
                    assert_eq!(closed, series, "q={q} l={l}");
                } else {
                    let gap = &closed - &series;
                    assert!(gap >= BigRational::zero(), "q={q} l={l}");
                    assert!(gap <= sigma_series_tail_bound(q, 30), "q={q} l={l}");
                }
            }
        }
    }

    #[test]
    fn sigma_stays_in_unit_interval() {
        for q in [3u128, 5, 7, 11, 13, 19, 101] {
            for l in 1..=8 {
                let v = sigma_prime_power(q, l).value();
                assert!(v > Rat::zero() && v < Rat::one());
            }
        }
    }

    #[test]
    fn sigma_multiplicative_over_prime_powers() {
        let d = d17();
        for n in 1i128..=240 {
            let direct = sigma(n, d).unwrap().value();
            let mut product = Rat::one();
            for &(q, l) in &factorize(n).unwrap().factors {
                if d.prime_type(q) == PrimeType::Inert {
                    product *= sigma_prime_power(q, l).value();
                }
            }
            assert_eq!(direct, product, "n={n}");
        }
    }

    #[test]
    fn sigma_ignores_sign_and_non_inert_primes() {
        let d = d17();
        assert_eq!(sigma(1, d).unwrap().value(), Rat::one());
        // 2 splits and 17 ramifies, so only the 3 contributes
        assert_eq!(sigma(2 * 17 * 3, d).unwrap().value(), Rat::new(5, 12));
        for n in [3i128, 10, 45, 63] {
            assert_eq!(sigma(n, d).unwrap(), sigma(-n, d).unwrap());
        }
    }

    #[test]
    fn progression_sum_matches_frozen_prefix() {
        // sum of sigma(n) for n <= 10 at D = 17, computed independently
        let total = sigma_progression_sum(10, 1, 0, d17());
        assert_eq!(
            total,
            rug::Rational::from((16609, 2520)),
            "prefix sum drifted"
        );
    }

    #[test]
    fn progression_sum_respects_the_progression() {
        let d = d17();
        // empty class
        assert_eq!(sigma_progression_sum(2, 5, 3, d), rug::Rational::new());
        // classes partition the range
        let x = 200;
        let whole = sigma_progression_sum(x, 1, 0, d);
        let mut pieces = rug::Rational::new();
        for r in 0..3 {
            pieces += sigma_progression_sum(x, 3, r, d);
        }
        assert_eq!(whole, pieces);
        // and each class agrees with a direct loop
        for r in 0..3u64 {
            let mut direct = rug::Rational::new();
            let mut n = if r == 0 { 3 } else { r };
            while n <= x {
                let s = sigma(n as i128, d).unwrap().value();
                direct += rug::Rational::from((*s.numer(), *s.denom()));
                n += 3;
            }
            assert_eq!(sigma_progression_sum(x, 3, r, d), direct, "r={r}");
        }
    }

    #[test]
    fn weighted_sum_pinned_and_bounded() {
        let d = d17();
        // 1 + 2 + 3 sigma(3) = 17/4
        assert_eq!(weighted_sigma_sum(3, 1, 0, d), rug::Rational::from((17, 4)));
        let x = 40u64;
        let plain = sigma_progression_sum(x, 1, 0, d);
        let weighted = weighted_sigma_sum(x, 1, 0, d);
        assert!(weighted <= plain.clone() * rug::Integer::from(x));
        // summation by parts: sum n sigma(n) = x S(x) - sum_{m < x} S(m)
        let mut partial_total = rug::Rational::new();
        for m in 1..x {
            partial_total += sigma_progression_sum(m, 1, 0, d);
        }
        assert_eq!(weighted, plain * rug::Integer::from(x) - partial_total);
    }

    #[test]
    fn bruteforce_count_trivial_cases() {
        let d = d17();
        // n = 4: 2 splits, so no inert condition and every B counts
        assert_eq!(r_bruteforce(10, 4, 1, 0, d), 17);
        // interval empty once |n| > 2N
        assert_eq!(r_bruteforce(10, 25, 1, 0, d), 0);
        // congruence classes partition the count
        let n = 45i128;
        let whole = r_bruteforce(300, n, 1, 0, d);
        let split: u64 = (0..17).map(|b| r_bruteforce(300, n, 17, b, d)).sum();
        assert_eq!(whole, split);
    }

    #[test]
    fn bruteforce_tracks_mainterm() {
        let d = d17();
        let cap = 10_000i64;
        for n in [3i128, 5, 9] {
            let count = r_bruteforce(cap, n, 1, 0, d) as f64;
            let main = ratio_f64(r_mainterm(cap, n, 1, d).unwrap());
            let window = (2 * cap as i128 - n.abs() + 1) as f64;
            assert!(
                (count - main).abs() / window < 0.01,
                "n={n}: count={count} main={main}"
            );
        }
    }

    #[test]
    fn mainterm_exact_values() {
        let d = d17();
        assert_eq!(r_mainterm(10, 1, 1, d).unwrap(), Rat::from_integer(20));
        // (2N - 3 + 1) sigma(3) = 19998 * 5/12
        assert_eq!(
            r_mainterm(10_000, 3, 1, d).unwrap(),
            Rat::new(19998 * 5, 12)
        );
    }

    fn reference_counts(d: Discriminant, cap: i64) -> ScanCounts {
        let mut c = ScanCounts::default();
        for a in -(cap as i128)..=cap as i128 {
            for b in -(cap as i128)..=cap as i128 {
                c.bump(verdict(d, a, b, None).kind);
            }
        }
        c
    }

    #[test]
    fn scan_matches_pairwise_verdicts() {
        for (d, cap) in [(d17(), 12i64), (d33(), 8)] {
            let scanned = scan_rbr(d, cap, None);
            assert_eq!(scanned.counts, reference_counts(d, cap), "D={}", d.value());
            assert_eq!(
                scanned.counts.total(),
                ((2 * cap + 1) * (2 * cap + 1)) as u64
            );
        }
    }

    #[test]
    fn scan_counts_partition_the_grid() {
        let report = scan_rbr(d17(), 30, None);
        assert_eq!(report.counts.total(), 61 * 61);
        assert!(report.counts.locally_soluble() >= report.counts.bm_violations);
    }

    #[test]
    fn congruence_scan_reduces_to_plain_scan() {
        let d = d17();
        let plain = scan_rbr(d, 15, None);
        let cong = scan_rbr_congruence(d, 15, 1, 0, 0, None);
        assert_eq!(plain.counts, cong.counts);
        assert_eq!(cong.t_prime, Some(1));
        assert_eq!(cong.t_dprime, Some(1));
    }

    #[test]
    fn congruence_gcd_split() {
        let d = d17();
        let equal = scan_rbr_congruence(d, 5, 17, 4, 4, None);
        assert_eq!((equal.t_prime, equal.t_dprime), (Some(17), Some(1)));
        let unequal = scan_rbr_congruence(d, 5, 17, 4, 6, None);
        assert_eq!((unequal.t_prime, unequal.t_dprime), (Some(1), Some(17)));
    }

    #[test]
    fn congruence_classes_partition_scan() {
        let d = d33();
        let cap = 30i64;
        let plain = scan_rbr(d, cap, None);
        let mut sum = ScanCounts::default();
        for a in 0..3 {
            for b in 0..3 {
                sum = sum.merged(scan_rbr_congruence(d, cap, 3, a, b, None).counts);
            }
        }
        assert_eq!(plain.counts, sum);
    }

    #[test]
    fn admissible_route_agrees_with_verdict_scan() {
        for (d, cap) in [(d17(), 60i64), (d33(), 25)] {
            let scanned = scan_rbr(d, cap, None).counts.bm_violations;
            let counted = count_bm_admissible(d, cap, None);
            assert_eq!(scanned, counted, "D={}", d.value());
        }
    }

    #[test]
    fn csv_shape_and_determinism() {
        let d = d17();
        let report = scan_rbr(d, 5, None);
        let row = report.csv_row();
        assert_eq!(row.split(',').count(), SCAN_CSV_HEADER.split(',').count());
        assert!(row.ends_with(",0"), "timing column must be pinned");
        let again = scan_rbr(d, 5, None);
        let a = write_scan_csv(&[report], &["seed = 7".into()]);
        let b = write_scan_csv(&[again], &["seed = 7".into()]);
        assert_eq!(a, b);
        assert!(a.starts_with("# seed = 7\nN,D,T,a,b,"));
    }

    #[test]
    fn tree_mass_is_conserved() {
        for (d, p, depth) in [(d17(), 17u128, 2u32), (d33(), 3, 3), (d33(), 11, 2)] {
            let tree = solubility_tree(d, p, depth);
            assert_eq!(tree.total_mass(), Rat::one(), "p={p}");
            let (lo, hi) = tree.interval();
            assert!(Rat::zero() <= lo && lo <= hi && hi <= Rat::one());
        }
    }

    #[test]
    fn refinement_narrows_the_interval() {
        let d = d17();
        let mut last_width = Rat::from_integer(2);
        for depth in 1..=3 {
            let (lo, hi) = local_density_p(d, 17, depth);
            let width = hi - lo;
            assert!(width <= last_width, "depth={depth}");
            last_width = width;
        }
        let (lo1, hi1) = local_density_p(d, 17, 1);
        let (lo3, hi3) = local_density_p(d, 17, 3);
        assert!(lo3 >= lo1 && hi3 <= hi1 && hi3 - lo3 < hi1 - lo1);
    }

    #[test]
    fn local_density_clears_witness_floor() {
        // a full unit-square congruence class of soluble surfaces exists at
        // every ramified prime, so the lower bound must reach 1/p^2
        let (lo17, _) = local_density_p(d17(), 17, 2);
        assert!(lo17 >= Rat::new(1, 289));
        let (lo11, _) = local_density_p(d33(), 11, 2);
        assert!(lo11 >= Rat::new(1, 121));
        let (lo3, _) = local_density_p(d33(), 3, 3);
        assert!(lo3 >= Rat::new(1, 9));
    }

    #[test]
    fn soluble_patch_at_three_stays_soluble() {
        // every class under (A, B) = (3, 0) mod 9 at D = 33 is soluble
        let tree = solubility_tree(d33(), 3, 4);
        for leaf in &tree.leaves {
            let m = ppow(3, leaf.depth.min(2));
            if (leaf.a - 3).rem_euclid(m) == 0 && leaf.b.rem_euclid(m) == 0 {
                assert_eq!(
                    leaf.tag,
                    ClassTag::Soluble,
                    "leaf ({}, {}) mod 3^{}",
                    leaf.a,
                    leaf.b,
                    leaf.depth
                );
            }
        }
    }

    #[test]
    fn c_loc_brackets_are_sane() {
        for d in [d17(), d33()] {
            let (lo, hi) = c_loc(d, 3);
            let dd = Rat::from_integer(d.value());
            assert!(lo >= Rat::new(4, 1) / (dd * dd), "D={}", d.value());
            assert!(hi <= Rat::from_integer(4));
            assert!(lo <= hi);
        }
    }

    #[test]
    fn profile_masses_are_consistent() {
        let d = d17();
        let profiles = profile_measures(d, 17, 2);
        assert_eq!(profiles.total_mass(), Rat::one());
        assert!(profiles.half > Rat::zero(), "constant-1/2 classes exist");
        let tree = solubility_tree(d, 17, 2);
        // constant classes are soluble classes
        assert!(profiles.zero + profiles.half <= tree.soluble_mass);
        assert!(profiles.undecided <= tree.undecided_mass + profiles.excluded);
    }
}
