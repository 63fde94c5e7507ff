use super::{integrate_adaptive, Quadrature, RayIntervals, SpiderPoint, StepFunction};
use crate::error::{Error, Result};
use crate::scalar::{from_usize, Scalar};

/// `u ↦ (alpha + beta·u) / (gamma + delta·u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mobius<S> {
    pub alpha: S,
    pub beta: S,
    pub gamma: S,
    pub delta: S,
}

impl<S: Scalar> Mobius<S> {
    pub fn new(alpha: S, beta: S, gamma: S, delta: S) -> Self {
        Self {
            alpha,
            beta,
            gamma,
            delta,
        }
    }

    pub fn constant(c: S) -> Self {
        Self::new(c, S::zero(), S::one(), S::zero())
    }

    pub fn eval(&self, u: &S) -> S {
        (self.alpha.clone() + self.beta.clone() * u.clone())
            / (self.gamma.clone() + self.delta.clone() * u.clone())
    }

    pub fn is_constant(&self) -> bool {
        self.slope_numerator().is_zero()
    }

    /// Sign-carrying numerator of the derivative, `beta·gamma - alpha·delta`.
    pub fn slope_numerator(&self) -> S {
        self.beta.clone() * self.gamma.clone() - self.alpha.clone() * self.delta.clone()
    }

    /// Part of `[lo, hi]` where the value exceeds `s` (or reaches it when
    /// `strict` is false), assuming the denominator is positive there.
    pub fn superlevel_within(&self, s: &S, lo: &S, hi: &S, strict: bool) -> Option<(S, S)> {
        // alpha + beta u > s (gamma + delta u)  <=>  slope·u > offset
        let slope = self.beta.clone() - s.clone() * self.delta.clone();
        let offset = s.clone() * self.gamma.clone() - self.alpha.clone();
        let holds = |lhs: &S, rhs: &S| if strict { lhs > rhs } else { lhs >= rhs };
        if slope.is_zero() {
            return holds(&S::zero(), &offset).then(|| (lo.clone(), hi.clone()));
        }
        let root = offset / slope.clone();
        let (a, b) = if slope > S::zero() {
            (S::max_of(root, lo.clone()), hi.clone())
        } else {
            (lo.clone(), S::min_of(root, hi.clone()))
        };
        if a < b || (a == b && !strict && a >= *lo && a <= *hi) {
            Some((a, b))
        } else {
            None
        }
    }

    pub fn to_f64(&self) -> Mobius<f64> {
        Mobius::new(
            self.alpha.to_f64_lossy(),
            self.beta.to_f64_lossy(),
            self.gamma.to_f64_lossy(),
            self.delta.to_f64_lossy(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MobiusPiece<S> {
    pub lo: S,
    pub hi: S,
    pub map: Mobius<S>,
}

/// A function on the spider domain given on each ray by Möbius pieces that
/// tile `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseMobius<S> {
    rays: Vec<Vec<MobiusPiece<S>>>,
}

impl<S: Scalar> PiecewiseMobius<S> {
    pub fn new(rays: Vec<Vec<MobiusPiece<S>>>) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if rays.is_empty() {
            return bad("k must be at least 1".into());
        }
        for (ray, pieces) in rays.iter().enumerate() {
            let Some(first) = pieces.first() else {
                return bad(format!("ray {ray} has no pieces"));
            };
            if !first.lo.is_zero() || !pieces[pieces.len() - 1].hi.is_one() {
                return bad(format!("pieces on ray {ray} must tile [0, 1]"));
            }
            for w in pieces.windows(2) {
                if w[0].hi != w[1].lo {
                    return bad(format!("gap between pieces on ray {ray}"));
                }
            }
            for p in pieces {
                if p.lo > p.hi {
                    return bad(format!("reversed piece on ray {ray}"));
                }
                let den_lo = p.map.gamma.clone() + p.map.delta.clone() * p.lo.clone();
                let den_hi = p.map.gamma.clone() + p.map.delta.clone() * p.hi.clone();
                if den_lo <= S::zero() || den_hi <= S::zero() {
                    return bad(format!("non-positive denominator on ray {ray}"));
                }
            }
        }
        Ok(Self { rays })
    }

    pub fn k(&self) -> usize {
        self.rays.len()
    }

    pub fn ray(&self, ray: usize) -> &[MobiusPiece<S>] {
        &self.rays[ray]
    }

    pub fn piece_count(&self) -> usize {
        self.rays.iter().map(Vec::len).sum()
    }

    pub fn value_at(&self, x: &SpiderPoint<S>) -> S {
        let pieces = &self.rays[x.ray];
        let idx = pieces
            .partition_point(|p| p.hi <= x.pos)
            .min(pieces.len() - 1);
        pieces[idx].map.eval(&x.pos)
    }

    /// `{g > s}` (or `{g >= s}`) as canonical per-ray intervals, solved exactly per piece.
    pub fn superlevel_set(&self, s: &S, strict: bool) -> RayIntervals<S> {
        let mut out = RayIntervals::empty(self.k());
        for (ray, pieces) in self.rays.iter().enumerate() {
            for p in pieces {
                if let Some((a, b)) = p.map.superlevel_within(s, &p.lo, &p.hi, strict) {
                    out.push(ray, a, b);
                }
            }
        }
        out.canonical()
    }

    /// `λ_k(g > s)`.
    pub fn level_measure(&self, s: &S) -> S {
        let set = self.superlevel_set(s, true);
        (0..self.k())
            .flat_map(|r| set.ray(r).iter())
            .fold(S::zero(), |acc, (lo, hi)| acc + hi.clone() - lo.clone())
            / from_usize(self.k())
    }

    /// `∫_{g > s} |f| dλ_k`.
    pub fn restricted_integral(&self, f: &StepFunction<S>, s: &S) -> S {
        f.integral_abs_over(&self.superlevel_set(s, true))
    }

    pub fn to_f64(&self) -> PiecewiseMobius<f64> {
        PiecewiseMobius {
            rays: self
                .rays
                .iter()
                .map(|ps| {
                    ps.iter()
                        .map(|p| MobiusPiece {
                            lo: p.lo.to_f64_lossy(),
                            hi: p.hi.to_f64_lossy(),
                            map: p.map.to_f64(),
                        })
                        .collect()
                })
                .collect(),
        }
    }

    /// `{k, rays: [[{lo, hi, alpha, beta, gamma, delta}, …], …]}`; each piece is
    /// `u ↦ (alpha + beta·u)/(gamma + delta·u)` on `[lo, hi)`.
    pub fn to_json(&self) -> serde_json::Value {
        let rays: Vec<serde_json::Value> = self
            .rays
            .iter()
            .map(|ps| {
                ps.iter()
                    .map(|p| {
                        serde_json::json!({
                            "lo": p.lo.to_json(),
                            "hi": p.hi.to_json(),
                            "alpha": p.map.alpha.to_json(),
                            "beta": p.map.beta.to_json(),
                            "gamma": p.map.gamma.to_json(),
                            "delta": p.map.delta.to_json(),
                        })
                    })
                    .collect()
            })
            .collect();
        serde_json::json!({ "k": self.k(), "rays": rays })
    }

    /// Largest jump between adjacent pieces at their shared endpoint.
    pub fn max_discontinuity(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for pieces in &self.rays {
            for w in pieces.windows(2) {
                let left = w[0].map.eval(&w[0].hi).to_f64_lossy();
                let right = w[1].map.eval(&w[1].lo).to_f64_lossy();
                worst = worst.max((left - right).abs() / left.abs().max(right.abs()).max(1.0));
            }
        }
        worst
    }
}

impl PiecewiseMobius<f64> {
    /// `∫ |g|^p dλ_k` by adaptive Gauss–Legendre per piece.
    pub fn lp_norm_pow(&self, p: f64, tol: f64) -> Quadrature {
        let mut total = Quadrature {
            value: 0.0,
            error: 0.0,
        };
        for pieces in &self.rays {
            for piece in pieces {
                let m = &piece.map;
                if piece.hi <= piece.lo {
                    continue;
                }
                let q = if m.is_constant() || (m.beta == 0.0 && m.delta == 0.0) {
                    let v = m.eval(&piece.lo).abs().powf(p);
                    Quadrature {
                        value: v * (piece.hi - piece.lo),
                        error: 0.0,
                    }
                } else {
                    integrate_adaptive(&|u: f64| m.eval(&u).abs().powf(p), piece.lo, piece.hi, tol)
                };
                total = total + q;
            }
        }
        let k = self.k() as f64;
        Quadrature {
            value: total.value / k,
            error: total.error / k,
        }
    }

    pub fn lp_norm(&self, p: f64, tol: f64) -> Result<Quadrature> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::InvalidParameter(format!("p = {p} must exceed 1")));
        }
        let q = self.lp_norm_pow(p, tol);
        let value = q.value.powf(1.0 / p);
        // first-order propagation through x ↦ x^{1/p}
        let error = if q.value > 0.0 {
            value * q.error / (p * q.value)
        } else {
            q.error
        };
        Ok(Quadrature { value, error })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{ratio, Rational};

    #[test]
    fn superlevel_of_decreasing_piece() {
        // 0.3 / (u + 0.2) on [0.1, 1]: exceeds 0.5 for u < 0.4
        let m = Mobius::new(ratio(3, 10), ratio(0, 1), ratio(1, 5), ratio(1, 1));
        let got = m.superlevel_within(&ratio(1, 2), &ratio(1, 10), &ratio(1, 1), true);
        assert_eq!(got, Some((ratio(1, 10), ratio(2, 5))));
        assert_eq!(
            m.superlevel_within(&ratio(5, 1), &ratio(1, 10), &ratio(1, 1), true),
            None
        );
    }

    #[test]
    fn constant_piece_level_sets() {
        let g = PiecewiseMobius::new(vec![vec![MobiusPiece {
            lo: ratio(0, 1),
            hi: ratio(1, 1),
            map: Mobius::constant(ratio(2, 1)),
        }]])
        .unwrap();
        assert_eq!(
            g.level_measure(&ratio(2, 1)),
            Rational::from_integer(0.into())
        );
        assert_eq!(g.level_measure(&ratio(1, 1)), ratio(1, 1));
        assert_eq!(
            g.superlevel_set(&ratio(2, 1), false).ray(0),
            &[(ratio(0, 1), ratio(1, 1))]
        );
    }

    #[test]
    fn tiling_is_validated() {
        let piece = |lo: f64, hi: f64| MobiusPiece {
            lo,
            hi,
            map: Mobius::constant(1.0),
        };
        assert!(PiecewiseMobius::new(vec![vec![piece(0.0, 0.5), piece(0.6, 1.0)]]).is_err());
        assert!(PiecewiseMobius::new(vec![vec![piece(0.0, 0.5), piece(0.5, 1.0)]]).is_ok());
        let bad_den = MobiusPiece {
            lo: 0.0,
            hi: 1.0,
            map: Mobius::new(1.0, 0.0, -0.5, 1.0),
        };
        assert!(PiecewiseMobius::new(vec![vec![bad_den]]).is_err());
    }

    #[test]
    fn lp_norm_of_reciprocal_piece() {
        // g(u) = 1/(1+u) on one ray: ∫ g^2 = 1/2
        let g = PiecewiseMobius::new(vec![vec![MobiusPiece {
            lo: 0.0,
            hi: 1.0,
            map: Mobius::new(1.0, 0.0, 1.0, 1.0),
        }]])
        .unwrap();
        let q = g.lp_norm_pow(2.0, 1e-12);
        assert!((q.value - 0.5).abs() < 1e-13);
    }
}
