use std::sync::OnceLock;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

const ORDER: usize = 10;
const MAX_DEPTH: usize = 48;

fn rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(ORDER))
}

fn fixed(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (nodes, weights) = rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    nodes
        .iter()
        .zip(weights)
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

/// Integral value with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
}

impl std::ops::Add for Quadrature {
    type Output = Quadrature;
    fn add(self, rhs: Self) -> Self {
        Quadrature {
            value: self.value + rhs.value,
            error: self.error + rhs.error,
        }
    }
}

/// Adaptive 10-point Gauss–Legendre: a panel is accepted once its estimate
/// agrees with the sum over its two halves to within `tol`, measured relative
/// to the panel value when that exceeds one.
pub fn integrate_adaptive(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Quadrature {
    fn go(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> Quadrature {
        let m = 0.5 * (a + b);
        let left = fixed(f, a, m);
        let right = fixed(f, m, b);
        let err = (left + right - whole).abs();
        if err <= tol * (left + right).abs().max(1.0) || depth >= MAX_DEPTH || m <= a || m >= b {
            Quadrature {
                value: left + right,
                error: err,
            }
        } else {
            go(f, a, m, left, 0.5 * tol, depth + 1) + go(f, m, b, right, 0.5 * tol, depth + 1)
        }
    }
    if b <= a {
        return Quadrature {
            value: 0.0,
            error: 0.0,
        };
    }
    go(f, a, b, fixed(f, a, b), tol, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(ORDER);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        let p18: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(18)).sum();
        assert!((p18 - 2.0 / 19.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_rational_integrands() {
        let q = integrate_adaptive(&|x: f64| (1.0 / (0.01 + x)).powf(2.5), 0.0, 1.0, 1e-12);
        let exact = (0.01f64.powf(-1.5) - 1.01f64.powf(-1.5)) / 1.5;
        assert!(
            (q.value - exact).abs() < 1e-9 * exact,
            "{} vs {}",
            q.value,
            exact
        );
    }
}
