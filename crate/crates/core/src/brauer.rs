//! Behavior of the quaternion Brauer class at inert primes, the equivalent
//! admissibility criterion on B, the rank guard, and the combined verdict
//! on the Hasse principle for one surface.
//!
//! At an inert prime q the evaluation is constant if and only if a closed
//! condition on the q-adic square classes of A, B and D holds, and when it
//! is constant the value is 0. Constancy at every place forces the sum of
//! local evaluations to be constant on the adelic points; if that constant
//! is 1/2 (an odd number of ramified places contributing 1/2), no rational
//! point can exist even though all completions have points.

use crate::arith::{factorize, is_perfect_square, is_square_in_qp, valuation, ArithError, Place, PrimeType};
use crate::localsolve::{
    eval_set_at_ramified, solubility_everywhere, EvalSet, EvalValue, SolubilityStatus,
};
use crate::surface::{Discriminant, SurfaceParams};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InertBehavior {
    /// When the evaluation is constant at an inert prime, the value is 0.
    pub constant: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerdictKind {
    Singular,
    LocallyInsoluble,
    BMViolation,
    NoBMObstruction,
    IndeterminateBrauer,
    DepthExhausted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RamifiedSummary {
    pub p: u128,
    pub status: SolubilityStatus,
    pub eval: Option<EvalSet>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InertSummary {
    pub q: u128,
    pub constant: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictDetail {
    pub ramified: Vec<RamifiedSummary>,
    /// Inert primes dividing A - B, the only ones where constancy can fail.
    pub inert: Vec<InertSummary>,
    /// Ramified places whose evaluation is constantly 1/2.
    pub half_places: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HasseVerdict {
    pub kind: VerdictKind,
    pub detail: VerdictDetail,
}

/// Whether the evaluation is constant at the inert prime q. After swapping
/// so that v = nu_q(A) <= nu_q(B): for v odd, constant iff B is a q-adic
/// square; for v even, constant unless nu_q(B - A) > v and BD is a q-adic
/// square.
pub fn inert_constancy(params: &SurfaceParams, q: u128) -> InertBehavior {
    assert!(q != 2, "q = 2 is split here, not inert");
    assert!(
        params.d.prime_type(q) == PrimeType::Inert,
        "inert_constancy requires an inert prime"
    );
    let (a, b) = if valuation(params.a, q) <= valuation(params.b, q) {
        (params.a, params.b)
    } else {
        (params.b, params.a)
    };
    let va = valuation(a, q);
    let place = Place::Prime(q);
    let constant = if va % 2 == 1 {
        is_square_in_qp(b, place)
    } else {
        !(valuation(b - a, q) > va && is_square_in_qp(b * params.d.value(), place))
    };
    InertBehavior { constant }
}

/// The admissibility condition on B for n at one inert prime q, with
/// l = nu_q(n): vacuous for l = 0; for l odd, B must be a q-adic square or
/// B + n must be a square with even valuation above l; for l even, either
/// q^l | B or B is a square with valuation below l.
pub fn per_prime_admissible(b: i128, n: i128, q: u128) -> bool {
    assert!(n != 0);
    assert!(b != 0 && b + n != 0, "degenerate B");
    let l = valuation(n, q);
    if l == 0 {
        return true;
    }
    let place = Place::Prime(q);
    if l % 2 == 1 {
        if is_square_in_qp(b, place) {
            return true;
        }
        let v = valuation(b + n, q);
        v > l && v % 2 == 0 && is_square_in_qp(b + n, place)
    } else {
        let vb = valuation(b, q);
        vb >= l || (vb % 2 == 0 && is_square_in_qp(b, place))
    }
}

/// B admissible for n: the per-prime condition at every inert prime
/// dividing n. n is factored once.
pub fn is_admissible(b: i128, n: i128, d: Discriminant) -> Result<bool, ArithError> {
    assert!(n != 0 && b != 0 && b + n != 0);
    let f = factorize(n)?;
    let ok = f
        .primes()
        .filter(|&q| d.prime_type(q) == PrimeType::Inert)
        .all(|q| per_prime_admissible(b, n, q));
    Ok(ok)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RankGuard {
    /// The quaternion class generates the whole Brauer quotient (order at
    /// most 2), so "no obstruction by this class" means no obstruction.
    Generic,
    PossiblyLarger,
}

/// Generic unless -AB or D((A+B-1)^2 - 4AB) is a rational square.
pub fn brauer_rank_guard(params: &SurfaceParams) -> RankGuard {
    let minus_ab = -params.a * params.b;
    let dg = params.d.value() * params.g;
    if is_perfect_square(minus_ab) || is_perfect_square(dg) {
        RankGuard::PossiblyLarger
    } else {
        RankGuard::Generic
    }
}

/// Full pipeline for one (possibly singular) parameter pair.
pub fn verdict(d: Discriminant, a: i128, b: i128, max_depth: Option<u32>) -> HasseVerdict {
    let params = match SurfaceParams::new(d, a, b) {
        Ok(p) => p,
        Err(_) => {
            return HasseVerdict {
                kind: VerdictKind::Singular,
                detail: VerdictDetail::default(),
            }
        }
    };
    let everywhere = solubility_everywhere(&params, max_depth);
    let mut detail = VerdictDetail::default();
    for (&p, out) in &everywhere.outcomes {
        detail.ramified.push(RamifiedSummary {
            p,
            status: out.status,
            eval: None,
        });
    }
    match everywhere.overall {
        SolubilityStatus::Insoluble => {
            return HasseVerdict {
                kind: VerdictKind::LocallyInsoluble,
                detail,
            }
        }
        SolubilityStatus::DepthExhausted => {
            return HasseVerdict {
                kind: VerdictKind::DepthExhausted,
                detail,
            }
        }
        SolubilityStatus::Soluble => {}
    }
    let mut all_constant = true;
    let mut undetermined = false;
    for summary in &mut detail.ramified {
        let ev = eval_set_at_ramified(&params, summary.p, max_depth);
        summary.eval = Some(ev);
        match ev.constant_value() {
            Some(EvalValue::Half) => detail.half_places += 1,
            Some(EvalValue::Zero) => {}
            None if ev.complete => all_constant = false,
            // value set not fully enumerated: constancy is unknown
            None => undetermined = true,
        }
    }
    for q in factorize(params.n).expect("n nonzero").primes() {
        if d.prime_type(q) != PrimeType::Inert {
            continue;
        }
        let behavior = inert_constancy(&params, q);
        detail.inert.push(InertSummary {
            q,
            constant: behavior.constant,
        });
        if !behavior.constant {
            all_constant = false;
        }
    }
    let kind = if undetermined {
        VerdictKind::DepthExhausted
    } else if all_constant && detail.half_places % 2 == 1 {
        // a constant total evaluation of 1/2 empties the Brauer-Manin set
        // regardless of whether further Brauer classes exist
        VerdictKind::BMViolation
    } else if brauer_rank_guard(&params) == RankGuard::Generic {
        VerdictKind::NoBMObstruction
    } else {
        VerdictKind::IndeterminateBrauer
    };
    HasseVerdict { kind, detail }
}
