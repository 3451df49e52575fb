//! The parametrized family of quartic del Pezzo surfaces studied by this
//! crate, cut out in P^4 with coordinates (t0, t1, t2, t3, t4) by
//!
//! ```text
//! Q1: t2^2 - D t3^2 = t0 t1
//! Q2: t2^2 - D t4^2 = (t0 + A t1)(t0 + B t1)
//! ```
//!
//! with D a squarefree integer > 1 congruent to 1 mod 8 and A, B integers.
//! Smoothness of the intersection is equivalent to A, B, A - B and the
//! companion value G(A, B) all being nonzero.

use crate::arith::{factorize, is_perfect_square, PrimeType};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SurfaceError {
    #[error("discriminant must be > 1, got {0}")]
    DiscriminantTooSmall(i128),
    #[error("discriminant must be 1 mod 8, got {0}")]
    DiscriminantNotOneMod8(i128),
    #[error("discriminant must be squarefree, got {0}")]
    DiscriminantNotSquarefree(i128),
    #[error("discriminant must not be a perfect square, got {0}")]
    DiscriminantSquare(i128),
    #[error("surface is singular: A = 0 or B = 0")]
    SingularAxis,
    #[error("surface is singular: A = B")]
    SingularDiagonal,
    #[error("surface is singular: G(A, B) = 0")]
    SingularCompanion,
    #[error("residue vector has no unit coordinate mod {0}")]
    ImprimitivePoint(u128),
}

/// A validated discriminant: squarefree, greater than 1, congruent to 1 mod 8.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Discriminant(i128);

impl Discriminant {
    pub fn new(d: i128) -> Result<Self, SurfaceError> {
        if d <= 1 {
            return Err(SurfaceError::DiscriminantTooSmall(d));
        }
        if d.rem_euclid(8) != 1 {
            return Err(SurfaceError::DiscriminantNotOneMod8(d));
        }
        if is_perfect_square(d) {
            return Err(SurfaceError::DiscriminantSquare(d));
        }
        let f = factorize(d).expect("nonzero");
        if !f.is_squarefree() {
            return Err(SurfaceError::DiscriminantNotSquarefree(d));
        }
        Ok(Discriminant(d))
    }

    pub fn value(self) -> i128 {
        self.0
    }

    /// Ramified primes, i.e. the prime divisors of D, ascending.
    pub fn ramified_primes(self) -> Vec<u128> {
        factorize(self.0).expect("nonzero").primes().collect()
    }

    pub fn prime_type(self, p: u128) -> PrimeType {
        crate::arith::prime_type(p, self.0)
    }
}

/// The companion value `G(A, B) = (A + B - 1)^2 - 4AB`; its vanishing is one
/// of the three degenerations of the family.
pub fn g_poly(a: i128, b: i128) -> i128 {
    let s = a + b - 1;
    s * s - 4 * a * b
}

/// Whether the surface with parameters (A, B) is smooth; D plays no role.
pub fn is_smooth(a: i128, b: i128) -> bool {
    a != 0 && b != 0 && a != b && g_poly(a, b) != 0
}

/// A point of P^4 with integer coordinates, either exact or a residue vector
/// mod p^k. Residue vectors are required to be primitive: some coordinate is
/// a unit mod p.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PointVector {
    pub t: [i128; 5],
    /// `None` for exact integer points, `Some((p, k))` for a vector mod p^k.
    pub modulus: Option<(u128, u32)>,
}

impl PointVector {
    pub fn exact(t: [i128; 5]) -> Self {
        PointVector { t, modulus: None }
    }

    pub fn modular(t: [i128; 5], p: u128, k: u32) -> Result<Self, SurfaceError> {
        let m = (p as i128).pow(k);
        let t = t.map(|x| x.rem_euclid(m));
        if t.iter().all(|x| x % p as i128 == 0) {
            return Err(SurfaceError::ImprimitivePoint(p));
        }
        Ok(PointVector {
            t,
            modulus: Some((p, k)),
        })
    }
}

/// Parameters (D; A, B) of a smooth member of the family, with the two
/// derived quantities every module downstream keeps asking for: n = A - B
/// and g = G(A, B).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SurfaceParams {
    pub d: Discriminant,
    pub a: i128,
    pub b: i128,
    pub n: i128,
    pub g: i128,
}

impl SurfaceParams {
    /// Validate smoothness: A, B nonzero, A != B, G(A, B) != 0.
    pub fn new(d: Discriminant, a: i128, b: i128) -> Result<Self, SurfaceError> {
        if a == 0 || b == 0 {
            return Err(SurfaceError::SingularAxis);
        }
        if a == b {
            return Err(SurfaceError::SingularDiagonal);
        }
        let g = g_poly(a, b);
        if g == 0 {
            return Err(SurfaceError::SingularCompanion);
        }
        Ok(SurfaceParams {
            d,
            a,
            b,
            n: a - b,
            g,
        })
    }

    /// Both quadrics at a point, as (Q1, Q2), reduced mod the modulus when
    /// the point carries one.
    pub fn eval_quadrics(&self, pt: &PointVector) -> (i128, i128) {
        let (q1, q2) = self.eval_quadrics_raw(&pt.t);
        match pt.modulus {
            None => (q1, q2),
            Some((p, k)) => {
                let m = (p as i128).pow(k);
                (q1.rem_euclid(m), q2.rem_euclid(m))
            }
        }
    }

    /// Exact evaluation on a bare coordinate array.
    pub fn eval_quadrics_raw(&self, t: &[i128; 5]) -> (i128, i128) {
        let [t0, t1, t2, t3, t4] = *t;
        let d = self.d.value();
        let q1 = t2 * t2 - d * t3 * t3 - t0 * t1;
        let q2 = t2 * t2 - d * t4 * t4 - (t0 + self.a * t1) * (t0 + self.b * t1);
        (q1, q2)
    }

    /// The 2 x 5 derivative matrix used for Hensel certificates, evaluated at
    /// `t`. Rows are the gradients of -Q1 and -Q2, so that row 1 reads
    /// (t1, t0, -2t2, 2D t3, 0); flipping both rows leaves every 2 x 2 minor
    /// unchanged, so rank and minor valuations match the plain gradient.
    pub fn jacobian(&self, t: &[i128; 5]) -> [[i128; 5]; 2] {
        let [t0, t1, t2, t3, t4] = *t;
        let d = self.d.value();
        let (a, b) = (self.a, self.b);
        [
            [t1, t0, -2 * t2, 2 * d * t3, 0],
            [
                2 * t0 + (a + b) * t1,
                (a + b) * t0 + 2 * a * b * t1,
                -2 * t2,
                0,
                2 * d * t4,
            ],
        ]
    }

    /// The four sentinel values whose p-adic valuations bound how deep the
    /// local analysis must look: eighth powers of G(A, B), A, B, and A - B.
    pub fn g_sentinels(&self) -> [i128; 4] {
        [
            self.g.pow(8),
            self.a.pow(8),
            self.b.pow(8),
            self.n.pow(8),
        ]
    }

    /// The product A * B * (A - B) * G(A, B); a prime divides some sentinel
    /// iff it divides this.
    pub fn sentinel_product(&self) -> i128 {
        self.a * self.b * self.n * self.g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discriminant_validation() {
        assert!(Discriminant::new(17).is_ok());
        assert!(Discriminant::new(33).is_ok());
        assert!(Discriminant::new(65).is_ok());
        assert_eq!(
            Discriminant::new(1).unwrap_err(),
            SurfaceError::DiscriminantTooSmall(1)
        );
        assert_eq!(
            Discriminant::new(-7).unwrap_err(),
            SurfaceError::DiscriminantTooSmall(-7)
        );
        assert_eq!(
            Discriminant::new(21).unwrap_err(),
            SurfaceError::DiscriminantNotOneMod8(21)
        );
        assert_eq!(
            Discriminant::new(153).unwrap_err(), // 9 * 17, but 153 = 1 mod 8
            SurfaceError::DiscriminantNotSquarefree(153)
        );
        assert_eq!(
            Discriminant::new(25).unwrap_err(),
            SurfaceError::DiscriminantSquare(25)
        );
        assert_eq!(
            Discriminant::new(9).unwrap_err(),
            SurfaceError::DiscriminantSquare(9)
        );
    }

    #[test]
    fn discriminant_ramified_primes() {
        assert_eq!(Discriminant::new(17).unwrap().ramified_primes(), vec![17]);
        assert_eq!(Discriminant::new(33).unwrap().ramified_primes(), vec![3, 11]);
        assert_eq!(Discriminant::new(65).unwrap().ramified_primes(), vec![5, 13]);
    }

    #[test]
    fn g_poly_identity() {
        // two expansions of (A + B - 1)^2 - 4AB
        for a in -100i128..=100 {
            for b in -100i128..=100 {
                let expanded = a * a - 2 * a * b + b * b - 2 * a - 2 * b + 1;
                assert_eq!(g_poly(a, b), expanded);
                let shifted = (a - b) * (a - b) - 2 * (a + b) + 1;
                assert_eq!(g_poly(a, b), shifted);
            }
        }
        assert_eq!(g_poly(1, 1), -3);
        assert_eq!(g_poly(0, 0), 1);
        assert_eq!(g_poly(2, 5), -4);
        assert_eq!(g_poly(1, 2), -4);
        assert_eq!(g_poly(4, 1), 0);
        assert_eq!(g_poly(1, 4), 0);
        assert_eq!(g_poly(9, 4), 0);
    }

    #[test]
    fn smoothness_validation() {
        let d = Discriminant::new(17).unwrap();
        assert!(SurfaceParams::new(d, 2, 5).is_ok());
        assert!(SurfaceParams::new(d, -1, 1).is_ok());
        assert!(is_smooth(1, 2));
        assert!(!is_smooth(2, 2));
        assert!(!is_smooth(4, 1));
        assert_eq!(
            SurfaceParams::new(d, 0, 5).unwrap_err(),
            SurfaceError::SingularAxis
        );
        assert_eq!(
            SurfaceParams::new(d, 3, 0).unwrap_err(),
            SurfaceError::SingularAxis
        );
        assert_eq!(
            SurfaceParams::new(d, 4, 4).unwrap_err(),
            SurfaceError::SingularDiagonal
        );
        assert_eq!(
            SurfaceParams::new(d, 4, 1).unwrap_err(),
            SurfaceError::SingularCompanion
        );
        assert_eq!(
            SurfaceParams::new(d, 9, 4).unwrap_err(),
            SurfaceError::SingularCompanion
        );
        // smoothness is symmetric in A and B
        for a in -12i128..=12 {
            for b in -12i128..=12 {
                assert_eq!(is_smooth(a, b), is_smooth(b, a));
            }
        }
    }

    #[test]
    fn derived_params_stay_in_sync() {
        let d = Discriminant::new(33).unwrap();
        for a in -15i128..=15 {
            for b in -15i128..=15 {
                if let Ok(s) = SurfaceParams::new(d, a, b) {
                    assert_eq!(s.n, a - b);
                    assert_eq!(s.g, g_poly(a, b));
                }
            }
        }
    }

    #[test]
    fn quadric_evaluation() {
        let d = Discriminant::new(17).unwrap();
        let s = SurfaceParams::new(d, 2, 5).unwrap();
        // Q1(1, 1, 0, 0, 0) = -1; Q2 = -(1 + 2)(1 + 5) = -18
        assert_eq!(s.eval_quadrics_raw(&[1, 1, 0, 0, 0]), (-1, -18));
        // 25 - 17 = 8 = t0 t1 makes the first quadric vanish
        let (q1, _) = s.eval_quadrics_raw(&[8, 1, 5, 1, 0]);
        assert_eq!(q1, 0);
        // (1:1:1:0:0) kills Q1 for every member; Q2 = 1 - (1+A)(1+B)
        let s2 = SurfaceParams::new(d, 1, 2).unwrap();
        assert_eq!(s2.eval_quadrics_raw(&[1, 1, 1, 0, 0]), (0, 1 - 2 * 3));
        assert_eq!(s2.eval_quadrics_raw(&[0, 0, 0, 0, 0]), (0, 0));
        assert_eq!(s2.eval_quadrics_raw(&[2, 1, 2, 0, 1]), (2, -25));
    }

    #[test]
    fn quadric_evaluation_mod_point_modulus() {
        let d = Discriminant::new(17).unwrap();
        let s = SurfaceParams::new(d, 1, 2).unwrap();
        let pt = PointVector::modular([2, 1, 2, 0, 1], 3, 2).unwrap();
        let (q1, q2) = s.eval_quadrics(&pt);
        assert_eq!((q1, q2), (2i128.rem_euclid(9), (-25i128).rem_euclid(9)));
        assert_eq!(
            s.eval_quadrics(&PointVector::exact([2, 1, 2, 0, 1])),
            (2, -25)
        );
        assert_eq!(
            PointVector::modular([3, 9, 6, 27, 3], 3, 2).unwrap_err(),
            SurfaceError::ImprimitivePoint(3)
        );
        // coordinates get reduced into [0, p^k)
        let pt = PointVector::modular([-1, 10, 0, 0, 0], 3, 2).unwrap();
        assert_eq!(pt.t, [8, 1, 0, 0, 0]);
    }

    #[test]
    fn jacobian_pinned_rows() {
        let d = Discriminant::new(17).unwrap();
        let s = SurfaceParams::new(d, 1, 2).unwrap();
        assert_eq!(
            s.jacobian(&[1, 1, 1, 0, 0]),
            [[1, 1, -2, 0, 0], [5, 7, -2, 0, 0]]
        );
        assert_eq!(s.jacobian(&[0, 0, 0, 0, 0]), [[0; 5]; 2]);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        // Each quadric is polynomial, so exact forward differences of the
        // right order recover the derivative: f(t + e_i) - f(t) =
        // df/dt_i + (second-order term), and the second-order term is the
        // pure coefficient of e_i^2, recoverable from f(t + 2 e_i). The
        // matrix rows carry the opposite sign.
        let d = Discriminant::new(33).unwrap();
        let s = SurfaceParams::new(d, -3, 7).unwrap();
        let pts: [[i128; 5]; 4] = [
            [1, 2, 3, 4, 5],
            [-7, 3, 0, 2, -1],
            [0, 0, 1, 0, 0],
            [5, -5, 2, 2, 2],
        ];
        for t in pts {
            let jac = s.jacobian(&t);
            for i in 0..5 {
                let mut t1 = t;
                t1[i] += 1;
                let mut t2 = t;
                t2[i] += 2;
                let f0 = s.eval_quadrics_raw(&t);
                let f1 = s.eval_quadrics_raw(&t1);
                let f2 = s.eval_quadrics_raw(&t2);
                // f(x+1) - f(x) = f' + c and f(x+2) - 2 f(x+1) + f(x) = 2c
                // where c is the quadratic coefficient in direction i.
                let c1 = (f2.0 - 2 * f1.0 + f0.0) / 2;
                assert_eq!(jac[0][i], -(f1.0 - f0.0 - c1));
                let c2 = (f2.1 - 2 * f1.1 + f0.1) / 2;
                assert_eq!(jac[1][i], -(f1.1 - f0.1 - c2));
            }
        }
    }

    #[test]
    fn sentinels() {
        let d = Discriminant::new(17).unwrap();
        let s = SurfaceParams::new(d, 2, 5).unwrap();
        assert_eq!(
            s.g_sentinels(),
            [(-4i128).pow(8), 256, 390625, (-3i128).pow(8)]
        );
        assert_eq!(s.sentinel_product(), 2 * 5 * (-3) * (-4));
        let s = SurfaceParams::new(d, 1, 2).unwrap();
        assert_eq!(s.g_sentinels(), [(-4i128).pow(8), 1, 256, 1]);
    }
}
