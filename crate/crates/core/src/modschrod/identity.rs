//! Check of the polar chain rule for `(1/psi) d/dpsi*`.
//!
//! With `psi = R exp(iS/hbar)` exact Wirtinger calculus gives
//! `(1/psi) df/dpsi* = (1/2R) df/dR + (i hbar / 2R^2) df/dS`.
//! The variant without the factors 1/2 is evaluated alongside so its
//! deviation can be reported. All derivatives come from dual numbers.

use num_complex::Complex64;

use crate::dual::Dual;

/// A closed-form `f(psi, psi*)`.
pub type TestFunction = fn(Dual, Dual) -> Dual;

#[derive(Debug, Clone, PartialEq)]
pub struct ChainRuleCase {
    pub name: String,
    /// Max over probes of `|lhs - rhs| / max(|lhs|, 1)`, exact coefficients.
    pub exact_deviation: f64,
    /// Same with the factor-2 coefficients `(1/R) d/dR + (i hbar/R^2) d/dS`.
    pub printed_deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainRuleReport {
    pub cases: Vec<ChainRuleCase>,
}

impl ChainRuleReport {
    pub fn max_exact_deviation(&self) -> f64 {
        self.cases.iter().map(|c| c.exact_deviation).fold(0.0, f64::max)
    }
}

fn sides(f: TestFunction, r: f64, s: f64, hbar: f64) -> (Complex64, Complex64, Complex64) {
    let theta = s / hbar;
    let (q, p) = (r * theta.cos(), r * theta.sin());
    let i = Dual::i();
    // d/dq and d/dp
    let dq = {
        let q = Dual::variable(q);
        let p = Dual::real(p);
        f(q + i * p, q - i * p).deriv
    };
    let dp = {
        let q = Dual::real(q);
        let p = Dual::variable(p);
        f(q + i * p, q - i * p).deriv
    };
    let d_star = (dq + Complex64::i() * dp) * 0.5;
    let psi = Complex64::new(q, p);
    let lhs = d_star / psi;

    let phase = |s: Dual| (i * s.scale(1.0 / hbar)).exp();
    let dr = {
        let rr = Dual::variable(r);
        let e = phase(Dual::real(s));
        f(rr * e, rr * e.conj()).deriv
    };
    let ds = {
        let rr = Dual::real(r);
        let e = phase(Dual::variable(s));
        f(rr * e, rr * e.conj()).deriv
    };
    let exact = dr / (2.0 * r) + Complex64::i() * hbar / (2.0 * r * r) * ds;
    let printed = dr / r + Complex64::i() * hbar / (r * r) * ds;
    (lhs, exact, printed)
}

/// Runs the identity on `functions` at every `(R, S)` probe.
pub fn chain_rule_check_with(functions: &[(&str, TestFunction)], probes: &[(f64, f64)], hbar: f64) -> ChainRuleReport {
    let cases = functions
        .iter()
        .map(|&(name, f)| {
            let mut exact_deviation: f64 = 0.0;
            let mut printed_deviation: f64 = 0.0;
            for &(r, s) in probes {
                let (lhs, exact, printed) = sides(f, r, s, hbar);
                let scale = lhs.norm().max(1.0);
                exact_deviation = exact_deviation.max((lhs - exact).norm() / scale);
                printed_deviation = printed_deviation.max((lhs - printed).norm() / scale);
            }
            ChainRuleCase {
                name: name.to_string(),
                exact_deviation,
                printed_deviation,
            }
        })
        .collect();
    ChainRuleReport { cases }
}

fn modulus_squared(psi: Dual, psi_star: Dual) -> Dual {
    psi * psi_star
}

fn identity(psi: Dual, _: Dual) -> Dual {
    psi
}

fn exp_modulus(psi: Dual, psi_star: Dual) -> Dual {
    (psi * psi_star).exp()
}

fn cubic(psi: Dual, psi_star: Dual) -> Dual {
    psi * psi * psi_star
}

fn offset_gaussian(psi: Dual, psi_star: Dual) -> Dual {
    let c = Dual::constant(Complex64::new(0.7, -0.4));
    -((psi - c) * (psi_star - c.conj())).scale(0.5)
}

fn offset_gaussian_exp(psi: Dual, psi_star: Dual) -> Dual {
    offset_gaussian(psi, psi_star).exp()
}

/// The standard suite: `psi psi*`, `psi`, `exp(psi psi*)`, `psi^2 psi*` and an
/// off-centre Gaussian, probed at a spread of amplitudes and phases.
pub fn chain_rule_check(hbar: f64) -> ChainRuleReport {
    let functions: [(&str, TestFunction); 5] = [
        ("psi psi*", modulus_squared),
        ("psi", identity),
        ("exp(psi psi*)", exp_modulus),
        ("psi^2 psi*", cubic),
        ("offset gaussian", offset_gaussian_exp),
    ];
    let mut probes = Vec::new();
    for r in [0.3, 0.8, 1.0, 1.7] {
        for s in [0.0, 0.9, -2.1, 3.0] {
            probes.push((r, s * hbar));
        }
    }
    chain_rule_check_with(&functions, &probes, hbar)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modulus_squared_shows_factor_two() {
        let r = chain_rule_check_with(&[("m", modulus_squared)], &[(1.3, 0.4)], 1.0);
        assert!(r.cases[0].exact_deviation < 1e-14);
        assert!((r.cases[0].printed_deviation - 1.0).abs() < 1e-14);
    }

    #[test]
    fn suite_is_exact() {
        for hbar in [1.0, 0.5] {
            let r = chain_rule_check(hbar);
            assert!(r.max_exact_deviation() < 1e-10, "{r:?}");
            let id = r.cases.iter().find(|c| c.name == "psi").unwrap();
            assert!(id.printed_deviation < 1e-12);
        }
    }
}
