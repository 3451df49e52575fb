//! Small wired-in consistency checks behind the CLI's `selftest` command:
//! a fast subset of the full verification suite, each check named so a
//! failure can be reported by name and scripted against.

use crate::analytic::{constant_csv_row, gamma_three_quarters, lambda0, CONSTANT_CSV_HEADER};
use crate::arith::{hilbert_symbol, Place};
use crate::brauer::{verdict, VerdictKind};
use crate::density::{
    c_loc, scan_rbr, sigma, sigma_prime_power, sigma_progression_sum, sigma_series_tail_bound,
    sigma_series_truncated, Rat, SCAN_CSV_HEADER,
};
use crate::surface::Discriminant;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Signed;
use rug::Float;

/// Deliberate corruption switches used to prove the harness actually fails
/// when a component lies. Armed from the environment so the CLI contract
/// can be exercised end to end.
#[derive(Debug, Default, Clone, Copy)]
pub struct FaultInjection {
    pub corrupt_sigma: bool,
}

impl FaultInjection {
    /// Reads HASSESCAN_FAULT; the value "sigma" corrupts the sigma closed
    /// forms before they are compared.
    pub fn from_env() -> Self {
        let fault = std::env::var("HASSESCAN_FAULT").unwrap_or_default();
        FaultInjection {
            corrupt_sigma: fault == "sigma",
        }
    }
}

pub struct Check {
    pub name: &'static str,
    runner: fn(&FaultInjection) -> Result<(), String>,
}

impl Check {
    pub fn run(&self, faults: &FaultInjection) -> Result<(), String> {
        (self.runner)(faults)
    }
}

pub fn checks() -> &'static [Check] {
    &[
        Check {
            name: "sigma closed form",
            runner: check_sigma_closed_form,
        },
        Check {
            name: "sigma multiplicativity",
            runner: check_sigma_multiplicative,
        },
        Check {
            name: "sigma progression prefix",
            runner: check_progression_prefix,
        },
        Check {
            name: "hilbert product formula",
            runner: check_hilbert_product,
        },
        Check {
            name: "verdict pipeline",
            runner: check_verdict_pipeline,
        },
        Check {
            name: "scan partition",
            runner: check_scan_partition,
        },
        Check {
            name: "local density floor",
            runner: check_density_floor,
        },
        Check {
            name: "analytic constants",
            runner: check_constants,
        },
        Check {
            name: "csv shape",
            runner: check_csv_shape,
        },
    ]
}

/// Runs every check, returning (name, outcome) pairs in order.
pub fn run_all(faults: &FaultInjection) -> Vec<(&'static str, Result<(), String>)> {
    checks().iter().map(|c| (c.name, c.run(faults))).collect()
}

fn d17() -> Discriminant {
    Discriminant::new(17).unwrap()
}

fn d33() -> Discriminant {
    Discriminant::new(33).unwrap()
}

fn rat_big(r: Rat) -> BigRational {
    BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
}

fn check_sigma_closed_form(faults: &FaultInjection) -> Result<(), String> {
    let pins = [
        (3u128, 1u32, Rat::new(5, 12)),
        (3, 2, Rat::new(4, 9)),
        (5, 1, Rat::new(13, 30)),
        (7, 1, Rat::new(25, 56)),
    ];
    for (q, l, want) in pins {
        let mut got = sigma_prime_power(q, l).value();
        if faults.corrupt_sigma {
            got += Rat::new(1, 1000);
        }
        if got != want {
            return Err(format!("sigma({q}^{l}) = {got}, expected {want}"));
        }
    }
    for q in [3u128, 5, 7, 11] {
        for l in 1..=4u32 {
            let mut closed = rat_big(sigma_prime_power(q, l).value());
            if faults.corrupt_sigma {
                closed += rat_big(Rat::new(1, 1000));
            }
            let series = sigma_series_truncated(q, l, 25);
            let tail = sigma_series_tail_bound(q, 25);
            let gap = (closed - series).abs();
            if gap > tail {
                return Err(format!("sigma({q}^{l}) differs from its series by {gap}"));
            }
        }
    }
    Ok(())
}

fn check_sigma_multiplicative(_: &FaultInjection) -> Result<(), String> {
    let d = d17();
    for m in 1..=40i128 {
        for n in 1..=40i128 {
            if num_integer::gcd(m, n) != 1 {
                continue;
            }
            let lhs = sigma(m * n, d).map_err(|e| e.to_string())?.value();
            let rhs =
                sigma(m, d).map_err(|e| e.to_string())?.value() * sigma(n, d).map_err(|e| e.to_string())?.value();
            if lhs != rhs {
                return Err(format!("sigma({m}*{n}) != sigma({m})sigma({n})"));
            }
        }
    }
    Ok(())
}

fn check_progression_prefix(_: &FaultInjection) -> Result<(), String> {
    let got = sigma_progression_sum(10, 1, 0, d17());
    let want = rug::Rational::from((16609, 2520));
    if got != want {
        return Err(format!("sum sigma(1..10) = {got}, expected 16609/2520"));
    }
    Ok(())
}

fn check_hilbert_product(_: &FaultInjection) -> Result<(), String> {
    let mut state = 0x243f6a8885a308d3u64;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        state
    };
    for _ in 0..500 {
        let a = (next() % 4001) as i128 - 2000;
        let b = (next() % 4001) as i128 - 2000;
        if a == 0 || b == 0 {
            continue;
        }
        let mut product = hilbert_symbol(a, b, Place::Infinity);
        let mut support = vec![2u128];
        for n in [a, b] {
            let mut m = n.unsigned_abs();
            let mut p = 3u128;
            while p * p <= m {
                if m % p == 0 {
                    support.push(p);
                    while m % p == 0 {
                        m /= p;
                    }
                }
                p += 2;
            }
            if m > 2 {
                support.push(m);
            }
        }
        support.sort_unstable();
        support.dedup();
        for p in support {
            product *= hilbert_symbol(a, b, Place::Prime(p));
        }
        if product != 1 {
            return Err(format!("product formula fails for ({a}, {b})"));
        }
    }
    Ok(())
}

fn check_verdict_pipeline(_: &FaultInjection) -> Result<(), String> {
    let d = d17();
    if verdict(d, 2, 2, None).kind != VerdictKind::Singular {
        return Err("A = B should be singular".into());
    }
    let v = verdict(d, 1, 2, None);
    if v.kind == VerdictKind::DepthExhausted {
        return Err("small smooth pair exhausted the depth budget".into());
    }
    if verdict(d, 1, 2, None).kind != v.kind {
        return Err("verdict is not deterministic".into());
    }
    Ok(())
}

fn check_scan_partition(_: &FaultInjection) -> Result<(), String> {
    let report = scan_rbr(d17(), 5, None);
    let total = report.counts.total();
    if total != 121 {
        return Err(format!("scan categories sum to {total}, expected 121"));
    }
    for a in -5..=5i128 {
        for b in -5..=5i128 {
            let kind = verdict(d17(), a, b, None).kind;
            if kind == VerdictKind::BMViolation {
                // every violation the pairwise pipeline sees must be counted
                if report.counts.bm_violations == 0 {
                    return Err(format!("violation at ({a}, {b}) missing from scan"));
                }
            }
        }
    }
    Ok(())
}

fn check_density_floor(_: &FaultInjection) -> Result<(), String> {
    for d in [d17(), d33()] {
        let (lo, hi) = c_loc(d, 1);
        let floor = Rat::new(4, d.value() * d.value());
        if lo < floor {
            return Err(format!("c_loc lower bound {lo} under 4/D^2 for D={}", d.value()));
        }
        if hi > Rat::new(4, 1) {
            return Err(format!("c_loc upper bound {hi} exceeds 4"));
        }
    }
    Ok(())
}

fn check_constants(_: &FaultInjection) -> Result<(), String> {
    let direct = Float::with_val(256, 0.75).gamma();
    if (gamma_three_quarters() - direct).abs() > 1e-50 {
        return Err("Gamma(3/4) literal disagrees with direct evaluation".into());
    }
    let lam = lambda0(d17(), 1, 2_000).map_err(|e| e.to_string())?;
    let frozen = Float::with_val(
        256,
        Float::parse("0.767653692832084494311271111278093030139209225656934629450075").unwrap(),
    );
    if (lam.value.clone() - frozen).abs() > 1e-3 {
        return Err(format!("lambda0(17) = {} strays from its frozen value", lam.value));
    }
    Ok(())
}

fn check_csv_shape(_: &FaultInjection) -> Result<(), String> {
    if SCAN_CSV_HEADER.split(',').count() != 12 {
        return Err("scan CSV header is not 12 columns".into());
    }
    let report = scan_rbr(d17(), 2, None);
    if report.csv_row().split(',').count() != 12 {
        return Err("scan CSV row is not 12 columns".into());
    }
    if CONSTANT_CSV_HEADER.split(',').count() != 5 {
        return Err("constants CSV header is not 5 columns".into());
    }
    let lam = lambda0(d17(), 1, 1_000).map_err(|e| e.to_string())?;
    if constant_csv_row("lambda0", &lam, "D=17").split(',').count() != 5 {
        return Err("constants CSV row is not 5 columns".into());
    }
    Ok(())
}
