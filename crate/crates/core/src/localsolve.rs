//! Solubility of a family member over every completion, and the set of
//! values the Brauer evaluation takes at ramified primes, by bounded-depth
//! breadth-first Hensel lifting.
//!
//! Only ramified primes require a search. There the search state is a
//! frontier of primitive residue classes mod p^k that satisfy both quadrics.
//! A class is *certified* once some 2x2 minor of the derivative matrix has
//! valuation e with k >= 2e + 1; a certified class contains a Z_p point
//! congruent to it mod p^{k-e}. Uncertified classes are extended digit by
//! digit: the lift condition mod p^{k+1} is linear in the new digit vector,
//! so children are enumerated by solving a 2x4 system over F_p rather than
//! scanning p^4 candidates.
//!
//! The same engine runs in a second mode where the parameters (A, B) are
//! only known modulo p^j. Every quantity the search consumes is then checked
//! to be independent of the hidden digits; if a step would depend on them,
//! the engine reports that the parameter class must be refined instead of
//! guessing. This mode powers residue-class tables, local densities, and
//! measure computations, where one search decides a whole class of surfaces.

use crate::arith::{
    inv_mod_prime, kronecker, sqrt_mod_prime, valuation, Place, PrimeType,
};
use crate::surface::{Discriminant, PointVector, SurfaceParams};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};

/// Hard ceiling on search depth regardless of what the sentinel bound says.
pub const GLOBAL_DEPTH_CAP: u32 = 30;
/// Widest frontier the search will hold before giving up honestly.
pub const FRONTIER_CAP: usize = 200_000;
/// Total node budget per search.
pub const WORK_CAP: usize = 3_000_000;
/// Fibers and child sets of size ~p^2 are only materialized below this.
const MATERIALIZE_PRIME_LIMIT: u128 = 2_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolubilityStatus {
    Soluble,
    Insoluble,
    DepthExhausted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolubilityOutcome {
    pub status: SolubilityStatus,
    /// A certified residue class mod p^k, present whenever a ramified search
    /// proved solubility.
    pub witness: Option<PointVector>,
    pub depth_used: u32,
}

/// One of the two values the local Brauer evaluation can take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EvalValue {
    Zero,
    Half,
}

/// The set of evaluation values attained on the certified branches at one
/// ramified prime. `complete` records whether the enumeration provably saw
/// every attainable value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalSet {
    pub zero: bool,
    pub half: bool,
    pub complete: bool,
}

impl EvalSet {
    pub fn is_empty(&self) -> bool {
        !self.zero && !self.half
    }

    pub fn len(&self) -> usize {
        usize::from(self.zero) + usize::from(self.half)
    }

    /// A provably constant evaluation: complete with exactly one value.
    pub fn constant_value(&self) -> Option<EvalValue> {
        if !self.complete {
            return None;
        }
        match (self.zero, self.half) {
            (true, false) => Some(EvalValue::Zero),
            (false, true) => Some(EvalValue::Half),
            _ => None,
        }
    }
}

/// Smallest l such that p^l divides none of the four sentinel values. The
/// sentinels are eighth powers of G, A, B and A - B, so this is
/// 1 + 8 * max of the base valuations; the eighth powers themselves are
/// never materialized (they overflow for scan-sized parameters).
pub fn required_depth(params: &SurfaceParams, p: u128) -> u32 {
    assert!(
        params.d.prime_type(p) == PrimeType::Ramified,
        "required_depth is only meaningful at ramified primes"
    );
    let vmax = [params.a, params.b, params.n, params.g]
        .iter()
        .map(|&x| valuation(x, p))
        .max()
        .unwrap();
    1 + 8 * vmax
}

/// Largest k with p^k < 2^63, the deepest modulus the fixed-width
/// arithmetic supports.
pub fn depth_clamp(p: u128) -> u32 {
    let bound = (1u128 << 63) / p;
    let mut k = 0;
    let mut v = 1u128;
    while v < bound {
        v *= p;
        k += 1;
    }
    k
}

fn p_pow(p: u128, k: u32) -> i128 {
    debug_assert!(k <= depth_clamp(p));
    (0..k).fold(1i128, |acc, _| acc * p as i128)
}

/// Whether the residue class `t` mod p^k (which must satisfy both quadrics)
/// lifts to a Z_p point by the minor criterion: some 2x2 minor of the
/// derivative matrix has valuation e with k >= 2e + 1.
pub fn hensel_certificate(params: &SurfaceParams, p: u128, t: &PointVector) -> bool {
    let (tp, k) = match t.modulus {
        Some((tp, k)) => (tp, k),
        None => panic!("hensel_certificate needs a residue vector, not an exact point"),
    };
    assert_eq!(tp, p);
    let m = p_pow(p, k);
    let (q1, q2) = quadrics_mod(params.d.value(), params.a, params.b, &t.t, m);
    assert!(
        q1 == 0 && q2 == 0,
        "certificate queried on a non-solution class"
    );
    match min_minor_valuation(params.d.value(), params.a, params.b, &t.t, p, k) {
        Some(e) => 2 * e + 1 <= k,
        None => false,
    }
}

/// Solubility over the completion at `place`. Odd unramified primes, p = 2
/// (split, as D = 1 mod 8 forces), and the real place are soluble outright;
/// ramified primes run the lifting search. `max_depth` overrides the default
/// cap of min(8 * required_depth + 1, 30).
pub fn solubility_at_p(
    params: &SurfaceParams,
    place: Place,
    max_depth: Option<u32>,
) -> SolubilityOutcome {
    let p = match place {
        Place::Infinity => return immediate_soluble(),
        Place::Prime(p) => p,
    };
    match params.d.prime_type(p) {
        PrimeType::Split | PrimeType::Inert => immediate_soluble(),
        PrimeType::Ramified => {
            let report = Engine::new(params, p, None, false, effective_cap(params, p, max_depth)).run();
            outcome_from_report(p, &report)
        }
    }
}

/// The set of evaluation values over the certified branches at a ramified
/// prime. Insoluble primes give the empty set, complete. The search exits
/// early once both values have been seen.
pub fn eval_set_at_ramified(params: &SurfaceParams, p: u128, max_depth: Option<u32>) -> EvalSet {
    assert!(
        params.d.prime_type(p) == PrimeType::Ramified,
        "evaluation sets are only defined at ramified primes"
    );
    let report = Engine::new(params, p, None, true, effective_cap(params, p, max_depth)).run();
    EvalSet {
        zero: report.zero,
        half: report.half,
        complete: report.complete(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EverywhereReport {
    /// One entry per ramified prime; every other place is soluble for free.
    pub outcomes: BTreeMap<u128, SolubilityOutcome>,
    pub overall: SolubilityStatus,
}

/// Solubility over all completions at once: the ramified primes decide it.
pub fn solubility_everywhere(params: &SurfaceParams, max_depth: Option<u32>) -> EverywhereReport {
    let mut outcomes = BTreeMap::new();
    let mut overall = SolubilityStatus::Soluble;
    for p in params.d.ramified_primes() {
        let out = solubility_at_p(params, Place::Prime(p), max_depth);
        match out.status {
            SolubilityStatus::Insoluble => overall = SolubilityStatus::Insoluble,
            SolubilityStatus::DepthExhausted if overall == SolubilityStatus::Soluble => {
                overall = SolubilityStatus::DepthExhausted
            }
            _ => {}
        }
        outcomes.insert(p, out);
    }
    EverywhereReport { outcomes, overall }
}

fn immediate_soluble() -> SolubilityOutcome {
    SolubilityOutcome {
        status: SolubilityStatus::Soluble,
        witness: None,
        depth_used: 0,
    }
}

fn effective_cap(params: &SurfaceParams, p: u128, max_depth: Option<u32>) -> u32 {
    let default = (8 * required_depth(params, p) + 1).min(GLOBAL_DEPTH_CAP);
    max_depth.unwrap_or(default).min(depth_clamp(p))
}

fn outcome_from_report(p: u128, report: &EngineReport) -> SolubilityOutcome {
    match report.soluble {
        Some(true) => {
            let (t, k) = report.witness.expect("soluble search carries a witness");
            SolubilityOutcome {
                status: SolubilityStatus::Soluble,
                witness: Some(PointVector::modular(t, p, k).expect("witness is primitive")),
                depth_used: k,
            }
        }
        Some(false) => SolubilityOutcome {
            status: SolubilityStatus::Insoluble,
            witness: None,
            depth_used: report.depth,
        },
        None => SolubilityOutcome {
            status: SolubilityStatus::DepthExhausted,
            witness: None,
            depth_used: report.depth,
        },
    }
}

// ---------------------------------------------------------------------------
// Residue-class interface: decide a whole class of parameter pairs at once.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassOutcome<T> {
    /// The answer holds for every smooth pair in the class.
    Decided(T),
    /// The answer depends on digits of (A, B) beyond p^j; split the class.
    Refine,
    /// The search hit a cap before deciding.
    Exhausted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassProfile {
    pub soluble: bool,
    pub eval: EvalSet,
}

/// Solubility at p for every smooth (A, B) in a fixed class mod p^j.
pub fn class_solubility(d: Discriminant, p: u128, a: i128, b: i128, j: u32) -> ClassOutcome<bool> {
    class_run(d, p, a, b, j, false).map_decided(|r| r.soluble.unwrap())
}

/// Solubility and the full evaluation set for a class mod p^j.
pub fn class_profile(d: Discriminant, p: u128, a: i128, b: i128, j: u32) -> ClassOutcome<ClassProfile> {
    class_run(d, p, a, b, j, true).map_decided(|r| ClassProfile {
        soluble: r.soluble.unwrap(),
        eval: EvalSet {
            zero: r.zero,
            half: r.half,
            complete: true,
        },
    })
}

enum ClassRun {
    Decided(EngineReport),
    Refine,
    Exhausted,
}

impl ClassRun {
    fn map_decided<T>(self, f: impl FnOnce(&EngineReport) -> T) -> ClassOutcome<T> {
        match self {
            ClassRun::Decided(r) => ClassOutcome::Decided(f(&r)),
            ClassRun::Refine => ClassOutcome::Refine,
            ClassRun::Exhausted => ClassOutcome::Exhausted,
        }
    }
}

fn class_run(d: Discriminant, p: u128, a: i128, b: i128, j: u32, want_eval: bool) -> ClassRun {
    assert!(j >= 1);
    assert!(
        d.prime_type(p) == PrimeType::Ramified,
        "class decisions are only needed at ramified primes"
    );
    let pj = p_pow(p, j.min(depth_clamp(p)));
    let max_k = (2 * j).min(GLOBAL_DEPTH_CAP).min(depth_clamp(p));
    let report = Engine {
        d: d.value(),
        p,
        a: a.rem_euclid(pj),
        b: b.rem_euclid(pj),
        budget: Some(j),
        want_eval,
        max_k,
        ..Engine::empty()
    }
    .run();
    if report.soluble == Some(true) && !want_eval {
        return ClassRun::Decided(report);
    }
    if report.refine {
        return ClassRun::Refine;
    }
    if report.exhausted {
        return ClassRun::Exhausted;
    }
    // frontier drained: solubility settled, and in eval mode the value set
    // is exhaustive (or maximal via the early exit)
    ClassRun::Decided(report)
}

/// Memoized walk down the class tree: refine a pair's class until the
/// profile is decided. Shared by scans so that equal residues never rerun
/// the search.
pub struct ClassTable {
    d: Discriminant,
    p: u128,
    max_j: u32,
    cache: HashMap<(u32, i128, i128), ClassOutcome<ClassProfile>>,
}

impl ClassTable {
    pub fn new(d: Discriminant, p: u128) -> Self {
        let max_j = (depth_clamp(p) / 2).clamp(1, 16);
        ClassTable {
            d,
            p,
            max_j,
            cache: HashMap::new(),
        }
    }

    pub fn profile(&mut self, a: i128, b: i128) -> ClassOutcome<ClassProfile> {
        for j in 1..=self.max_j {
            let pj = p_pow(self.p, j);
            let key = (j, a.rem_euclid(pj), b.rem_euclid(pj));
            let out = *self
                .cache
                .entry(key)
                .or_insert_with(|| class_profile(self.d, self.p, key.1, key.2, j));
            if let ClassOutcome::Decided(profile) = out {
                return ClassOutcome::Decided(profile);
            }
            // walk on even when capped out: a deeper budget loosens the
            // resolution guards, which can collapse the very width that
            // overran the caps
        }
        ClassOutcome::Exhausted
    }
}

// ---------------------------------------------------------------------------
// The search engine.

#[derive(Clone, Copy)]
struct Node {
    t: [i128; 5],
    k: u32,
    pivot: u8,
    /// Minor valuation of an inherited certificate, if any.
    cert: Option<u32>,
}

#[derive(Debug, Clone, Copy)]
struct EngineReport {
    soluble: Option<bool>,
    zero: bool,
    half: bool,
    refine: bool,
    exhausted: bool,
    witness: Option<([i128; 5], u32)>,
    depth: u32,
}

impl EngineReport {
    fn complete(&self) -> bool {
        // either every branch was followed to its end, or both values were
        // seen and the set cannot grow
        (self.zero && self.half) || (!self.exhausted && !self.refine)
    }
}

struct Engine {
    d: i128,
    p: u128,
    a: i128,
    b: i128,
    /// (A, B) are only trusted modulo p^budget; None means exact.
    budget: Option<u32>,
    want_eval: bool,
    max_k: u32,
    soluble: Option<bool>,
    zero: bool,
    half: bool,
    refine: bool,
    exhausted: bool,
    witness: Option<([i128; 5], u32)>,
    depth: u32,
    frontier: Vec<Node>,
    work: usize,
}

enum CertCheck {
    Certified(u32),
    No,
    Refine,
}

enum ResolveCheck {
    Value(EvalValue),
    /// The two side quotients force contradictory symbols, which no exact
    /// solution can do, so nothing above this class solves the system.
    Empty,
    Deeper,
    Refine,
}

enum ExtendCheck {
    Done,
    Refine,
    Overflow,
}

impl Engine {
    fn empty() -> Self {
        Engine {
            d: 0,
            p: 0,
            a: 0,
            b: 0,
            budget: None,
            want_eval: false,
            max_k: 0,
            soluble: None,
            zero: false,
            half: false,
            refine: false,
            exhausted: false,
            witness: None,
            depth: 1,
            frontier: Vec::new(),
            work: 0,
        }
    }

    fn new(params: &SurfaceParams, p: u128, budget: Option<u32>, want_eval: bool, max_k: u32) -> Self {
        assert!(
            params.a.unsigned_abs() < (1 << 62) && params.b.unsigned_abs() < (1 << 62),
            "parameters too large for the fixed-width local search"
        );
        Engine {
            d: params.d.value(),
            p,
            a: params.a,
            b: params.b,
            budget,
            want_eval,
            max_k,
            ..Engine::empty()
        }
    }

    fn run(mut self) -> EngineReport {
        debug_assert!(self.p % 2 == 1 && self.d % self.p as i128 == 0);
        if self.seed_depth_one() {
            let mut level = std::mem::take(&mut self.frontier);
            let mut k = 1;
            'levels: while !level.is_empty() && !self.finished() {
                if self.want_eval {
                    // a pool can only grow the set by its one value, so what
                    // remains there is bare existence; answer it depth first
                    // instead of carrying the whole breadth of the locus
                    let (pools, rest) = self.partition_level(level);
                    for (i, pool) in pools.into_iter().enumerate() {
                        if pool.is_empty() {
                            continue;
                        }
                        let v = if i == 0 {
                            EvalValue::Zero
                        } else {
                            EvalValue::Half
                        };
                        self.probe_uniform(pool, v);
                        if self.refine || self.exhausted {
                            break 'levels;
                        }
                    }
                    level = rest;
                }
                let mut next = Vec::new();
                for node in &level {
                    self.work += 1;
                    if self.work > WORK_CAP {
                        self.exhausted = true;
                        break 'levels;
                    }
                    if !self.process_node(node, &mut next) || self.finished() {
                        break 'levels;
                    }
                    if next.len() > FRONTIER_CAP {
                        self.exhausted = true;
                        break 'levels;
                    }
                }
                level = next;
                k += 1;
                self.depth = self.depth.max(k);
            }
        }
        if self.soluble.is_none() && !self.refine && !self.exhausted {
            // every branch died: no primitive solutions deep enough
            self.soluble = Some(false);
        }
        EngineReport {
            soluble: self.soluble,
            zero: self.zero,
            half: self.half,
            refine: self.refine,
            exhausted: self.exhausted,
            witness: self.witness,
            depth: self.depth,
        }
    }

    fn finished(&self) -> bool {
        if self.want_eval {
            self.zero && self.half
        } else {
            self.soluble == Some(true)
        }
    }

    /// Splits a level into probe pools, one per still-unrecorded forced value,
    /// and the remainder whose evaluations are not yet visible. Nodes with
    /// nothing left to contribute (value already recorded and solubility
    /// settled, or provably empty) are dropped on the way.
    fn partition_level(&self, level: Vec<Node>) -> ([Vec<Node>; 2], Vec<Node>) {
        let mut pools = [Vec::new(), Vec::new()];
        let mut rest = Vec::new();
        for node in level {
            match self.try_resolve(&node) {
                ResolveCheck::Value(v) => {
                    let seen = match v {
                        EvalValue::Zero => self.zero,
                        EvalValue::Half => self.half,
                    };
                    if seen && self.soluble == Some(true) {
                        continue;
                    }
                    pools[v as usize].push(node);
                }
                ResolveCheck::Empty => {}
                _ => rest.push(node),
            }
        }
        (pools, rest)
    }

    /// Depth-first existence search over a pool whose every branch is forced
    /// to evaluate to `v`. Exits on the first certificate. Deep loci can
    /// widen by p^2 per level until the certificates appear, far past any
    /// frontier the breadth-first walk could hold, while a single certified
    /// branch is only as long as the certification depth.
    fn probe_uniform(&mut self, pool: Vec<Node>, v: EvalValue) {
        let mut stack = pool;
        while let Some(node) = stack.pop() {
            self.work += 1;
            if self.work > WORK_CAP || stack.len() > FRONTIER_CAP {
                self.exhausted = true;
                return;
            }
            self.depth = self.depth.max(node.k);
            match self.try_certify(&node) {
                CertCheck::Certified(_) => {
                    if self.soluble.is_none() {
                        self.soluble = Some(true);
                        self.witness = Some((node.t, node.k));
                    }
                    self.record(v);
                    return;
                }
                CertCheck::Refine => {
                    self.refine = true;
                    return;
                }
                CertCheck::No => {}
            }
            match self.extend(&node, None, &mut stack) {
                ExtendCheck::Done => {}
                ExtendCheck::Refine => {
                    self.refine = true;
                    return;
                }
                ExtendCheck::Overflow => {
                    self.exhausted = true;
                    return;
                }
            }
        }
        // the whole locus died: v is never realized and nothing is lost
    }

    /// Depth-1 structure. With t1 a unit, x = t0/t1 must satisfy
    /// f(x) = x^2 + (A + B - 1)x + AB = 0 mod p (both quadrics reduce to the
    /// conic t2^2 = x t1^2 there since p | D), and t2/t1 is a square root of
    /// x. Classes with p | t1 reduce to (0,0,0,*,*); those never certify
    /// (every matrix entry is divisible by p on that locus) and die at the
    /// next level, where both quadrics demand a unit times D to vanish mod
    /// p^2 while the lift condition has a zero row. They are skipped.
    ///
    /// Returns false when the search already finished.
    fn seed_depth_one(&mut self) -> bool {
        let p = self.p as i128;
        let a0 = self.a.rem_euclid(p);
        let b0 = self.b.rem_euclid(p);
        let c1 = (a0 + b0 - 1).rem_euclid(p);
        let c0 = (a0 * b0).rem_euclid(p);
        let disc = (c1 * c1 - 4 * c0).rem_euclid(p);
        let mut roots: Vec<i128> = Vec::new();
        if let Some(r) = sqrt_mod_prime(disc, self.p) {
            let r = r as i128;
            let inv2 = inv_mod_prime(2, self.p) as i128;
            let x1 = ((-c1 + r).rem_euclid(p) * inv2).rem_euclid(p);
            let x2 = ((-c1 - r).rem_euclid(p) * inv2).rem_euclid(p);
            roots.push(x1);
            if x2 != x1 {
                roots.push(x2);
            }
            roots.sort_unstable();
        }
        // First pass: certified roots settle solubility and often the
        // evaluation without touching the free (t3, t4) coordinates, which
        // the minors at this depth do not see.
        let mut pending: Vec<(i128, Option<u32>)> = Vec::new();
        for &x in &roots {
            let chi_x = kronecker(x, p);
            if chi_x == -1 {
                continue;
            }
            if chi_x == 0 {
                // x = 0: the class (0, 1, 0, *, *); every minor vanishes mod p
                pending.push((x, None));
                continue;
            }
            let m01 = (-2 * (x * x - c0)).rem_euclid(p);
            let fprime = (2 * x + c1).rem_euclid(p);
            if m01 == 0 && fprime == 0 {
                pending.push((x, None));
                continue;
            }
            // certified at depth 1
            if self.soluble.is_none() {
                self.soluble = Some(true);
                let invx = inv_mod_prime(x, self.p) as i128;
                let s = sqrt_mod_prime(x, self.p).unwrap() as i128;
                self.witness = Some(([1, invx, (s * invx).rem_euclid(p), 0, 0], 1));
            }
            if !self.want_eval {
                return false;
            }
            match self.root_eval(x, a0, b0) {
                Some(v) => self.record(v),
                None => pending.push((x, Some(0))),
            }
        }
        if self.finished() {
            return false;
        }
        // Second pass: only now pay for the p^2-sized fibers.
        for (x, cert) in pending {
            if !self.push_fiber(x, cert) {
                return false;
            }
        }
        !self.frontier.is_empty() || !self.finished()
    }

    /// Evaluation at a depth-1 certified root class: the quotient unit is
    /// x + A (or x + B) when it is a unit mod p; both choices agree because
    /// (x + A)(x + B) = f(x) + x = x mod p, a square.
    fn root_eval(&self, x: i128, a0: i128, b0: i128) -> Option<EvalValue> {
        let p = self.p as i128;
        let ua = (x + a0).rem_euclid(p);
        let ub = (x + b0).rem_euclid(p);
        if ua != 0 {
            if ub != 0 {
                debug_assert_eq!(kronecker(ua, p), kronecker(ub, p));
            }
            Some(value_from_symbol(kronecker(ua, p)))
        } else if ub != 0 {
            Some(value_from_symbol(kronecker(ub, p)))
        } else {
            None
        }
    }

    fn record(&mut self, v: EvalValue) {
        match v {
            EvalValue::Zero => self.zero = true,
            EvalValue::Half => self.half = true,
        }
    }

    /// Materialize the (t3, t4) fiber over one root. Returns false when the
    /// search must stop (cap or oversized prime).
    fn push_fiber(&mut self, x: i128, cert: Option<u32>) -> bool {
        if self.p > MATERIALIZE_PRIME_LIMIT {
            self.exhausted = true;
            return false;
        }
        let p = self.p as i128;
        let (t, pivot) = if x == 0 {
            ([0i128, 1, 0], 1u8)
        } else {
            let invx = inv_mod_prime(x, self.p) as i128;
            let s = sqrt_mod_prime(x, self.p).unwrap() as i128;
            ([1, invx, (s * invx).rem_euclid(p)], 0u8)
        };
        let mut seeds = vec![t];
        if x != 0 && t[2] != 0 {
            seeds.push([t[0], t[1], (p - t[2]).rem_euclid(p)]);
        }
        for s in seeds {
            for c3 in 0..p {
                for c4 in 0..p {
                    self.frontier.push(Node {
                        t: [s[0], s[1], s[2], c3, c4],
                        k: 1,
                        pivot,
                        cert,
                    });
                }
            }
            if self.frontier.len() > FRONTIER_CAP {
                self.exhausted = true;
                return false;
            }
        }
        true
    }

    /// Returns false to stop the whole search (refinement or a hard cap).
    fn process_node(&mut self, node: &Node, next: &mut Vec<Node>) -> bool {
        let cert = match node.cert {
            Some(e) => Some(e),
            None => match self.try_certify(node) {
                CertCheck::Certified(e) => Some(e),
                CertCheck::Refine => {
                    self.refine = true;
                    return false;
                }
                CertCheck::No => None,
            },
        };
        if let Some(_e) = cert {
            if self.soluble.is_none() {
                self.soluble = Some(true);
                self.witness = Some((node.t, node.k));
            }
            if !self.want_eval {
                return false;
            }
            match self.try_resolve(node) {
                ResolveCheck::Value(v) => {
                    // the valuation pattern is fixed by the known digits, so
                    // the entire subtree shares this value
                    self.record(v);
                    return true;
                }
                ResolveCheck::Empty => {
                    // a certified class holds an exact solution, whose two
                    // symbols never disagree
                    debug_assert!(false);
                }
                ResolveCheck::Refine => {
                    self.refine = true;
                    return false;
                }
                ResolveCheck::Deeper => {}
            }
        }
        match self.extend(node, cert, next) {
            ExtendCheck::Done => true,
            ExtendCheck::Refine => {
                self.refine = true;
                false
            }
            ExtendCheck::Overflow => {
                self.exhausted = true;
                false
            }
        }
    }

    fn try_certify(&self, node: &Node) -> CertCheck {
        match min_minor_valuation(self.d, self.a, self.b, &node.t, self.p, node.k) {
            Some(e) if 2 * e + 1 <= node.k => match self.budget {
                // a minor valuation at or past the known parameter digits
                // could be an artifact of the representative
                Some(j) if e >= j => CertCheck::Refine,
                _ => CertCheck::Certified(e),
            },
            _ => CertCheck::No,
        }
    }

    /// The evaluation at a certified class, when the quotient valuation is
    /// already visible in the known digits: ev = 0 iff (q, D)_p = 1 with
    /// q = t1 (t0 + X t1) for the choice X among A, B of smaller valuation.
    fn try_resolve(&self, node: &Node) -> ResolveCheck {
        let pk = p_pow(self.p, node.k);
        let ra = (node.t[0] + self.a * node.t[1]).rem_euclid(pk);
        let rb = (node.t[0] + self.b * node.t[1]).rem_euclid(pk);
        let va = (ra != 0).then(|| valuation(ra, self.p));
        let vb = (rb != 0).then(|| valuation(rb, self.p));
        let (v, r, tie) = match (va, vb) {
            (None, None) => return ResolveCheck::Deeper,
            (Some(va), None) => (va, ra, None),
            (None, Some(vb)) => (vb, rb, None),
            (Some(va), Some(vb)) => {
                if vb < va {
                    (vb, rb, None)
                } else if va < vb {
                    (va, ra, None)
                } else {
                    (va, ra, Some(rb))
                }
            }
        };
        if let Some(j) = self.budget {
            if v >= j {
                // hidden parameter digits reach the unit part of the quotient
                return ResolveCheck::Refine;
            }
        }
        let s = self.symbol(node.t[1] * r);
        if let Some(rb) = tie {
            // an exact solution makes the product of the two quotients a
            // value of the norm form x^2 - D y^2, so their symbols agree;
            // a contradiction means no exact solution lies above this class
            if s != self.symbol(node.t[1] * rb) {
                return ResolveCheck::Empty;
            }
        }
        ResolveCheck::Value(value_from_symbol(s))
    }

    fn symbol(&self, u: i128) -> i32 {
        crate::arith::hilbert_symbol(u, self.d, Place::Prime(self.p))
    }

    fn extend(&self, node: &Node, cert: Option<u32>, next: &mut Vec<Node>) -> ExtendCheck {
        let k = node.k;
        if k + 1 > self.max_k {
            // out of depth; under a budget the cap 2j is the uniformity
            // horizon itself, so ask for more digits instead of giving up
            return match self.budget {
                Some(j) if self.max_k == 2 * j => ExtendCheck::Refine,
                _ => ExtendCheck::Overflow,
            };
        }
        let p = self.p as i128;
        let pk = p_pow(self.p, k);
        let pk1 = pk * p;
        if let Some(j) = self.budget {
            // the lift condition must not depend on hidden digits of (A, B):
            // perturbing A by p^j alpha shifts Q2 by p^j alpha t1 (t0 + B t1)
            // plus the symmetric term and p^{2j} alpha beta t1^2
            if 2 * j < k + 1 {
                return ExtendCheck::Refine;
            }
            debug_assert!(node.t[1] % p != 0);
            for x in [self.a, self.b] {
                let w = node.t[0] + x * node.t[1];
                if w != 0 && j + valuation(w, self.p) < k + 1 {
                    return ExtendCheck::Refine;
                }
            }
        }
        let (q1, q2) = quadrics_mod(self.d, self.a, self.b, &node.t, pk1);
        debug_assert!(q1 % pk == 0 && q2 % pk == 0);
        let rhs = [((q1 / pk) % p) as u64, ((q2 / pk) % p) as u64];
        let rows = jacobian_rows_mod(self.d, self.a, self.b, &node.t, p);
        let mut m = [[0u64; 4]; 2];
        let mut cols = [0usize; 4];
        let mut ci = 0;
        for col in 0..5 {
            if col == node.pivot as usize {
                continue;
            }
            m[0][ci] = rows[0][col] as u64;
            m[1][ci] = rows[1][col] as u64;
            cols[ci] = col;
            ci += 1;
        }
        let (particular, basis) = match solve_2x4_mod_p(m, rhs, self.p) {
            None => return ExtendCheck::Done, // inconsistent: the class dies
            Some(s) => s,
        };
        let count = (self.p as u128).pow(basis.len() as u32);
        if count > FRONTIER_CAP as u128
            || (basis.len() >= 2 && self.p > MATERIALIZE_PRIME_LIMIT)
        {
            return ExtendCheck::Overflow;
        }
        let pu = self.p as u64;
        for idx in 0..count as usize {
            let mut delta = particular;
            let mut rem = idx;
            for bv in &basis {
                let coef = (rem % self.p as usize) as u64;
                rem /= self.p as usize;
                for i in 0..4 {
                    delta[i] = (delta[i] + coef * bv[i]) % pu;
                }
            }
            let mut t = node.t;
            for i in 0..4 {
                t[cols[i]] += pk * delta[i] as i128;
            }
            next.push(Node {
                t,
                k: k + 1,
                pivot: node.pivot,
                cert,
            });
        }
        ExtendCheck::Done
    }
}

fn value_from_symbol(sym: i32) -> EvalValue {
    if sym == 1 {
        EvalValue::Zero
    } else {
        EvalValue::Half
    }
}

/// Both quadrics at `t`, reduced mod m, with every intermediate reduced so
/// nothing exceeds m^2 < 2^126.
fn quadrics_mod(d: i128, a: i128, b: i128, t: &[i128; 5], m: i128) -> (i128, i128) {
    let r = |x: i128| x.rem_euclid(m);
    let t = t.map(r);
    let (a, b, d) = (r(a), r(b), r(d));
    let t22 = r(t[2] * t[2]);
    let q1 = r(t22 - r(d * r(t[3] * t[3])) - r(t[0] * t[1]));
    let fa = r(t[0] + r(a * t[1]));
    let fb = r(t[0] + r(b * t[1]));
    let q2 = r(t22 - r(d * r(t[4] * t[4])) - r(fa * fb));
    (q1, q2)
}

fn jacobian_rows_mod(d: i128, a: i128, b: i128, t: &[i128; 5], m: i128) -> [[i128; 5]; 2] {
    let r = |x: i128| x.rem_euclid(m);
    let t = t.map(r);
    let (a, b, d) = (r(a), r(b), r(d));
    let s = r(a + b);
    let pr = r(a * b);
    [
        [t[1], t[0], r(-2 * t[2]), r(2 * r(d * t[3])), 0],
        [
            r(2 * t[0] + r(s * t[1])),
            r(r(s * t[0]) + r(2 * r(pr * t[1]))),
            r(-2 * t[2]),
            0,
            r(2 * r(d * t[4])),
        ],
    ]
}

/// Minimum p-adic valuation over the ten 2x2 minors of the derivative
/// matrix at `t`, read mod p^k; None when every minor vanishes there.
fn min_minor_valuation(d: i128, a: i128, b: i128, t: &[i128; 5], p: u128, k: u32) -> Option<u32> {
    let m = p_pow(p, k);
    let rows = jacobian_rows_mod(d, a, b, t, m);
    let mut best: Option<u32> = None;
    for i in 0..5 {
        for j in i + 1..5 {
            let det = (rows[0][i] * rows[1][j] - rows[0][j] * rows[1][i]).rem_euclid(m);
            if det != 0 {
                let v = valuation(det, p);
                if best.map_or(true, |b| v < b) {
                    best = Some(v);
                }
            }
        }
    }
    best
}

/// Reduced row echelon solve of a 2x4 system over F_p. Returns a particular
/// solution and a basis of the null space, or None if inconsistent.
fn solve_2x4_mod_p(
    mut m: [[u64; 4]; 2],
    mut rhs: [u64; 2],
    p: u128,
) -> Option<([u64; 4], Vec<[u64; 4]>)> {
    let pu = p as u64;
    let mulp = |x: u64, y: u64| ((x as u128 * y as u128) % p) as u64;
    let mut pivots: Vec<(usize, usize)> = Vec::new(); // (row, col)
    let mut row = 0;
    for col in 0..4 {
        let src = (row..2).find(|&r| m[r][col] != 0);
        let src = match src {
            Some(s) => s,
            None => continue,
        };
        m.swap(row, src);
        rhs.swap(row, src);
        let inv = inv_mod_prime(m[row][col] as i128, p) as u64;
        for x in &mut m[row] {
            *x = mulp(*x, inv);
        }
        rhs[row] = mulp(rhs[row], inv);
        for r in 0..2 {
            if r != row && m[r][col] != 0 {
                let f = m[r][col];
                for c in 0..4 {
                    m[r][c] = (m[r][c] + pu - mulp(f, m[row][c])) % pu;
                }
                rhs[r] = (rhs[r] + pu - mulp(f, rhs[row])) % pu;
            }
        }
        pivots.push((row, col));
        row += 1;
        if row == 2 {
            break;
        }
    }
    for r in row..2 {
        if rhs[r] != 0 {
            return None;
        }
    }
    let mut particular = [0u64; 4];
    for &(r, c) in &pivots {
        particular[c] = rhs[r];
    }
    let pivot_cols: Vec<usize> = pivots.iter().map(|&(_, c)| c).collect();
    let mut basis = Vec::new();
    for free in 0..4 {
        if pivot_cols.contains(&free) {
            continue;
        }
        let mut v = [0u64; 4];
        v[free] = 1;
        for &(r, c) in &pivots {
            v[c] = (pu - m[r][free]) % pu;
        }
        basis.push(v);
    }
    Some((particular, basis))
}

// ---------------------------------------------------------------------------
// Slow reference implementations: levelwise lifting by brute digit
// enumeration, no linear algebra. Test-suite material, kept public so the
// acceptance harness can call them.

pub mod naive {
    use super::*;

    fn quadrics_vanish(d: i128, a: i128, b: i128, t: &[i128; 5], m: i128) -> bool {
        let (q1, q2) = quadrics_mod(d, a, b, t, m);
        q1 == 0 && q2 == 0
    }

    /// All normalized primitive solution classes mod p: the first unit
    /// coordinate is scaled to 1 and everything before it is zero.
    pub fn classes_mod_p(d: i128, a: i128, b: i128, p: u128) -> Vec<([i128; 5], u8)> {
        let pi = p as i128;
        let mut out = Vec::new();
        for pivot in 0..5usize {
            let free = 4 - pivot;
            let total = pi.pow(free as u32);
            for idx in 0..total {
                let mut t = [0i128; 5];
                t[pivot] = 1;
                let mut rem = idx;
                for c in (pivot + 1)..5 {
                    t[c] = rem % pi;
                    rem /= pi;
                }
                if quadrics_vanish(d, a, b, &t, pi) {
                    out.push((t, pivot as u8));
                }
            }
        }
        out
    }

    fn extend(d: i128, a: i128, b: i128, p: u128, t: &[i128; 5], pivot: u8, k: u32) -> Vec<[i128; 5]> {
        let pi = p as i128;
        let pk = p_pow(p, k);
        let pk1 = pk * pi;
        let mut out = Vec::new();
        let total = pi.pow(4);
        for idx in 0..total {
            let mut child = *t;
            let mut rem = idx;
            for c in 0..5 {
                if c == pivot as usize {
                    continue;
                }
                child[c] += pk * (rem % pi);
                rem /= pi;
            }
            if quadrics_vanish(d, a, b, &child, pk1) {
                out.push(child);
            }
        }
        out
    }

    fn certified(d: i128, a: i128, b: i128, p: u128, t: &[i128; 5], k: u32) -> bool {
        matches!(min_minor_valuation(d, a, b, t, p, k), Some(e) if 2 * e + 1 <= k)
    }

    pub fn solubility(d: i128, a: i128, b: i128, p: u128, max_k: u32) -> SolubilityStatus {
        let mut frontier = classes_mod_p(d, a, b, p);
        for k in 1..=max_k {
            if frontier
                .iter()
                .any(|(t, _)| certified(d, a, b, p, t, k))
            {
                return SolubilityStatus::Soluble;
            }
            if frontier.is_empty() {
                return SolubilityStatus::Insoluble;
            }
            if k == max_k {
                break;
            }
            frontier = frontier
                .iter()
                .flat_map(|(t, piv)| {
                    extend(d, a, b, p, t, *piv, k)
                        .into_iter()
                        .map(move |c| (c, *piv))
                })
                .collect();
        }
        if frontier.is_empty() {
            SolubilityStatus::Insoluble
        } else {
            SolubilityStatus::DepthExhausted
        }
    }

    /// Evaluation values over certified classes, with the quotient read off
    /// directly from the class digits.
    pub fn eval_values(d: i128, a: i128, b: i128, p: u128, max_k: u32) -> EvalSet {
        let mut set = EvalSet {
            zero: false,
            half: false,
            complete: true,
        };
        let mut frontier = classes_mod_p(d, a, b, p);
        for k in 1..=max_k {
            let mut keep = Vec::new();
            for (t, piv) in frontier {
                if certified(d, a, b, p, &t, k) {
                    let pk = p_pow(p, k);
                    let ra = (t[0] + a * t[1]).rem_euclid(pk);
                    let rb = (t[0] + b * t[1]).rem_euclid(pk);
                    let pick = match (ra != 0, rb != 0) {
                        (true, true) => {
                            if valuation(rb, p) < valuation(ra, p) {
                                Some(rb)
                            } else {
                                Some(ra)
                            }
                        }
                        (true, false) => Some(ra),
                        (false, true) => Some(rb),
                        (false, false) => None,
                    };
                    if let Some(r) = pick {
                        let sym =
                            crate::arith::hilbert_symbol(t[1] * r, d, Place::Prime(p));
                        if sym == 1 {
                            set.zero = true;
                        } else {
                            set.half = true;
                        }
                        continue; // subtree settled
                    }
                }
                keep.push((t, piv));
            }
            if (set.zero && set.half) || keep.is_empty() {
                return set;
            }
            if k == max_k {
                set.complete = false;
                return set;
            }
            frontier = keep
                .iter()
                .flat_map(|(t, piv)| {
                    extend(d, a, b, p, t, *piv, k)
                        .into_iter()
                        .map(move |c| (c, *piv))
                })
                .collect();
        }
        set.complete = false;
        set
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::g_poly;

    fn params(d: i128, a: i128, b: i128) -> SurfaceParams {
        SurfaceParams::new(Discriminant::new(d).unwrap(), a, b).unwrap()
    }

    #[test]
    fn required_depth_examples() {
        assert_eq!(required_depth(&params(17, 1, 2), 17), 1);
        assert_eq!(required_depth(&params(33, 1, 5), 11), 1);
        // A = 3, B = 6: the base valuations at 3 are (1, 1, 1, 0)
        assert_eq!(required_depth(&params(33, 3, 6), 3), 9);
        assert_eq!(required_depth(&params(33, 9, 2), 3), 17);
    }

    #[test]
    fn certificate_examples() {
        let s = params(33, 3, 9);
        let t = PointVector::modular([1, 1, 1, 0, 0], 3, 1).unwrap();
        assert!(hensel_certificate(&s, 3, &t));
        // a class where the whole derivative matrix vanishes mod 3
        let t = PointVector::modular([0, 0, 0, 1, 0], 3, 1).unwrap();
        assert!(!hensel_certificate(&s, 3, &t));
    }

    #[test]
    fn unramified_places_are_immediate() {
        let s = params(17, 3, 5);
        for place in [Place::Infinity, Place::Prime(2), Place::Prime(5), Place::Prime(13)] {
            let out = solubility_at_p(&s, place, None);
            assert_eq!(out.status, SolubilityStatus::Soluble);
            assert_eq!(out.depth_used, 0);
            assert!(out.witness.is_none());
        }
    }

    #[test]
    fn soluble_with_constant_zero_evaluation() {
        // A = -D mod 9 and B = 0 mod 9 gives a smooth reduction point and a
        // constant evaluation at 3
        for (a, b) in [(3, 9), (12, 9), (3, 18), (-6, 9)] {
            let s = params(33, a, b);
            let out = solubility_at_p(&s, Place::Prime(3), None);
            assert_eq!(out.status, SolubilityStatus::Soluble, "(a,b)=({a},{b})");
            let w = out.witness.unwrap();
            assert!(hensel_certificate(&s, 3, &w));
            let ev = eval_set_at_ramified(&s, 3, None);
            assert_eq!(
                ev,
                EvalSet { zero: true, half: false, complete: true },
                "(a,b)=({a},{b})"
            );
        }
    }

    #[test]
    fn insoluble_pair_at_seventeen() {
        // x^2 + 2x + 2 has roots 3 and 12 mod 17, both non-squares
        let s = params(17, 1, 2);
        let out = solubility_at_p(&s, Place::Prime(17), None);
        assert_eq!(out.status, SolubilityStatus::Insoluble);
        assert_eq!(
            naive::solubility(17, 1, 2, 17, 3),
            SolubilityStatus::Insoluble
        );
        let ev = eval_set_at_ramified(&s, 17, None);
        assert!(ev.is_empty() && ev.complete);
        assert_eq!(naive::eval_values(17, 1, 2, 17, 3), ev);
    }

    #[test]
    fn depth_one_skip_matches_naive_class_list() {
        // for the insoluble pair the naive depth-1 classes are exactly the
        // (0,0,0,*,*) ones the engine declines to materialize
        let classes = naive::classes_mod_p(17, 1, 2, 17);
        assert_eq!(classes.len(), 18);
        assert!(classes
            .iter()
            .all(|(t, _)| t[0] == 0 && t[1] == 0 && t[2] == 0));
    }

    #[test]
    fn oracle_equivalence_d33_p3() {
        let d = 33;
        for a in 0..27i128 {
            for b in 0..27i128 {
                if a == 0 || b == 0 || a == b || g_poly(a, b) == 0 {
                    continue;
                }
                let s = params(d, a, b);
                if required_depth(&s, 3) > 2 {
                    continue;
                }
                let got = solubility_at_p(&s, Place::Prime(3), None).status;
                let want = naive::solubility(d, a, b, 3, 3);
                assert_eq!(got, want, "(a,b)=({a},{b})");
            }
        }
    }

    #[test]
    fn oracle_equivalence_d65_p5() {
        let d = 65;
        for a in 0..25i128 {
            for b in 0..25i128 {
                if a == 0 || b == 0 || a == b || g_poly(a, b) == 0 {
                    continue;
                }
                let s = params(d, a, b);
                if required_depth(&s, 5) > 2 {
                    continue;
                }
                let got = solubility_at_p(&s, Place::Prime(5), None).status;
                let want = naive::solubility(d, a, b, 5, 3);
                assert_eq!(got, want, "(a,b)=({a},{b})");
            }
        }
    }

    #[test]
    fn eval_agreement_with_naive() {
        let d = 33;
        for a in 1..9i128 {
            for b in 1..9i128 {
                if a == b || g_poly(a, b) == 0 {
                    continue;
                }
                let s = params(d, a, b);
                let got = eval_set_at_ramified(&s, 3, None);
                let want = naive::eval_values(d, a, b, 3, 6);
                if want.complete {
                    assert_eq!(got, want, "(a,b)=({a},{b})");
                }
                // a complete set at a soluble prime is never empty
                if got.complete
                    && solubility_at_p(&s, Place::Prime(3), None).status
                        == SolubilityStatus::Soluble
                {
                    assert!(!got.is_empty(), "(a,b)=({a},{b})");
                }
            }
        }
    }

    #[test]
    fn both_values_occur_and_exit_complete() {
        let mut found = false;
        'outer: for a in 1..40i128 {
            for b in 1..40i128 {
                if a == b || g_poly(a, b) == 0 {
                    continue;
                }
                let s = params(17, a, b);
                let ev = eval_set_at_ramified(&s, 17, None);
                if ev.zero && ev.half {
                    assert!(ev.complete);
                    found = true;
                    break 'outer;
                }
            }
        }
        assert!(found, "no pair with both evaluation values in range");
    }

    #[test]
    fn witness_stable_under_deeper_caps() {
        for (d, a, b, p) in [(33, 3, 9, 3), (33, 1, 5, 3), (17, 3, 5, 17), (65, 2, 7, 5)] {
            let s = params(d, a, b);
            let first = solubility_at_p(&s, Place::Prime(p), None);
            let second = solubility_at_p(&s, Place::Prime(p), Some(25));
            assert_eq!(first.status, second.status);
            if first.status == SolubilityStatus::Soluble && first.witness.is_some() {
                assert_eq!(first.witness, second.witness);
            }
        }
    }

    #[test]
    fn witness_minor_valuation_is_bounded() {
        for a in 1..20i128 {
            for b in 1..20i128 {
                if a == b || g_poly(a, b) == 0 {
                    continue;
                }
                let s = params(33, a, b);
                let out = solubility_at_p(&s, Place::Prime(3), None);
                if let Some(w) = out.witness {
                    let (_, k) = w.modulus.map(|(p, k)| (p, k)).unwrap();
                    let e = min_minor_valuation(33, a, b, &w.t, 3, k).unwrap();
                    assert!(e <= 4 * required_depth(&s, 3), "(a,b)=({a},{b})");
                }
            }
        }
    }

    #[test]
    fn everywhere_report_shape() {
        let s = params(33, 3, 9);
        let rep = solubility_everywhere(&s, None);
        assert_eq!(rep.outcomes.keys().copied().collect::<Vec<_>>(), vec![3, 11]);
        let s = params(17, 1, 2);
        let rep = solubility_everywhere(&s, None);
        assert_eq!(rep.overall, SolubilityStatus::Insoluble);
        assert_eq!(rep.outcomes.len(), 1);
    }

    #[test]
    fn class_decisions_match_concrete_runs() {
        let d = Discriminant::new(33).unwrap();
        let mut table = ClassTable::new(d, 3);
        for a in 1..60i128 {
            for b in 1..60i128 {
                if a == b || g_poly(a, b) == 0 {
                    continue;
                }
                let s = params(33, a, b);
                let concrete_sol = solubility_at_p(&s, Place::Prime(3), None).status;
                let concrete_ev = eval_set_at_ramified(&s, 3, None);
                match table.profile(a, b) {
                    ClassOutcome::Decided(profile) => {
                        assert_eq!(
                            profile.soluble,
                            concrete_sol == SolubilityStatus::Soluble,
                            "(a,b)=({a},{b})"
                        );
                        if concrete_ev.complete {
                            assert_eq!(profile.eval, concrete_ev, "(a,b)=({a},{b})");
                        }
                    }
                    other => panic!("undecided class for (a,b)=({a},{b}): {other:?}"),
                }
                // the solubility-only decision must agree whenever it fires
                for j in 1..=6u32 {
                    if let ClassOutcome::Decided(s3) = class_solubility(d, 3, a, b, j) {
                        assert_eq!(
                            s3,
                            concrete_sol == SolubilityStatus::Soluble,
                            "(a,b)=({a},{b}) j={j}"
                        );
                        break;
                    }
                }
            }
        }
    }

    #[test]
    fn generic_classes_decide_at_depth_one() {
        let d = Discriminant::new(17).unwrap();
        for a in 0..17i128 {
            for b in 0..17i128 {
                let generic =
                    a != 0 && b != 0 && (a * b * (a - b)) % 17 != 0 && g_poly(a, b) % 17 != 0;
                if generic {
                    assert!(matches!(
                        class_profile(d, 17, a, b, 1),
                        ClassOutcome::Decided(_)
                    ));
                }
            }
        }
    }

    #[test]
    fn deep_pairs_complete_via_existence_probe() {
        // Census of all solution classes of (A,B) = (18,27) at p = 3: 972
        // branches certify with value 0 at depth 3, and the branches over
        // x = 0 all force the same nonzero symbol from depth 4 on, widen to
        // 2.1e6 classes, and first certify at depth 7. Only the depth-first
        // existence probe reaches that certificate.
        let d = Discriminant::new(33).unwrap();
        let s = SurfaceParams::new(d, 18, 27).unwrap();
        let ev = eval_set_at_ramified(&s, 3, None);
        assert!(ev.complete && ev.zero && ev.half);
        let mut table = ClassTable::new(d, 3);
        match table.profile(18, 27) {
            ClassOutcome::Decided(prof) => {
                assert!(prof.soluble);
                assert!(prof.eval.zero && prof.eval.half && prof.eval.complete);
            }
            other => panic!("expected a decision, got {other:?}"),
        }

        // (3,54) resolves the other way: its depth-2 nonzero-symbol branches
        // all die one level later and the certificates at depth 7 repeat the
        // value 0, so the set stays {0} and closes without the deep walk.
        let s = SurfaceParams::new(d, 3, 54).unwrap();
        let ev = eval_set_at_ramified(&s, 3, None);
        assert!(ev.complete && ev.zero && !ev.half);
        match table.profile(3, 54) {
            ClassOutcome::Decided(prof) => {
                assert!(prof.soluble);
                assert!(prof.eval.zero && !prof.eval.half && prof.eval.complete);
            }
            other => panic!("expected a decision, got {other:?}"),
        }
    }

    #[test]
    fn depth_clamp_values() {
        assert_eq!(depth_clamp(3), 39);
        assert_eq!(depth_clamp(17), 15);
        assert!(p_pow(17, 15) < 1i128 << 63);
    }
}
