//! Hamiltonians H(p), their gradients, and the monotone Lax-Friedrichs flux.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Supported Hamiltonian families.
///
/// `Power` evaluates the smoothed form `(delta + |p|^2)^(gamma/2)`; `delta = 0`
/// recovers `|p|^gamma`. `Custom` is a tabulated Lipschitz profile of `|p|`,
/// piecewise linear between breakpoints and extended with the last slope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum HamiltonianKind {
    Quadratic,
    Power {
        gamma: f64,
        delta: f64,
    },
    Custom {
        breakpoints: Vec<f64>,
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hamiltonian {
    pub kind: HamiltonianKind,
    /// Radius within which callers expect gradients to live; used only as a
    /// default when sizing the Lax-Friedrichs dissipation.
    pub lipschitz_radius_hint: f64,
}

impl Hamiltonian {
    pub fn quadratic() -> Hamiltonian {
        Hamiltonian {
            kind: HamiltonianKind::Quadratic,
            lipschitz_radius_hint: 1.0,
        }
    }

    pub fn power(gamma: f64, delta: f64) -> Result<Hamiltonian> {
        if !gamma.is_finite() || gamma <= 1.0 || !delta.is_finite() || delta < 0.0 {
            return Err(Error::Input(format!(
                "power Hamiltonian needs gamma > 1 and delta >= 0, got gamma={gamma}, delta={delta}"
            )));
        }
        Ok(Hamiltonian {
            kind: HamiltonianKind::Power { gamma, delta },
            lipschitz_radius_hint: 1.0,
        })
    }

    /// The identically-zero Hamiltonian (heat-flow experiments).
    pub fn zero() -> Hamiltonian {
        Hamiltonian {
            kind: HamiltonianKind::Custom {
                breakpoints: vec![0.0, 1.0],
                values: vec![0.0, 0.0],
            },
            lipschitz_radius_hint: 1.0,
        }
    }

    /// Eikonal profile H(p) = |p| as a tabulated custom Hamiltonian.
    pub fn eikonal() -> Hamiltonian {
        Hamiltonian {
            kind: HamiltonianKind::Custom {
                breakpoints: vec![0.0, 1.0],
                values: vec![0.0, 1.0],
            },
            lipschitz_radius_hint: 1.0,
        }
    }

    pub fn custom_table(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Hamiltonian> {
        if breakpoints.len() < 2
            || breakpoints.len() != values.len()
            || breakpoints[0] != 0.0
            || breakpoints.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::Input(
                "custom table needs >= 2 strictly increasing breakpoints starting at 0".into(),
            ));
        }
        if breakpoints.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "custom Hamiltonian table".into(),
            });
        }
        Ok(Hamiltonian {
            kind: HamiltonianKind::Custom {
                breakpoints,
                values,
            },
            lipschitz_radius_hint: 1.0,
        })
    }

    /// H(p).
    pub fn eval(&self, p: &[f64]) -> Result<f64> {
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("Hamiltonian argument {p:?}"),
            });
        }
        let sq: f64 = p.iter().map(|v| v * v).sum();
        Ok(match &self.kind {
            HamiltonianKind::Quadratic => sq,
            HamiltonianKind::Power { gamma, delta } => (delta + sq).powf(gamma / 2.0),
            HamiltonianKind::Custom {
                breakpoints,
                values,
            } => table_eval(breakpoints, values, sq.sqrt()),
        })
    }

    /// D_p H(p). At `p = 0` with a non-differentiable profile this selects the
    /// zero subgradient, which keeps the adjoint drift bounded.
    pub fn grad(&self, p: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; p.len()];
        self.grad_into(p, &mut out);
        out
    }

    /// Allocation-free form of [`grad`](Self::grad) for hot loops.
    pub fn grad_into(&self, p: &[f64], out: &mut [f64]) {
        let sq: f64 = p.iter().map(|v| v * v).sum();
        match &self.kind {
            HamiltonianKind::Quadratic => {
                for (o, v) in out.iter_mut().zip(p) {
                    *o = 2.0 * v;
                }
            }
            HamiltonianKind::Power { gamma, delta } => {
                if sq == 0.0 && *delta == 0.0 && *gamma < 2.0 {
                    out.fill(0.0);
                    return;
                }
                let factor = gamma * (delta + sq).powf((gamma - 2.0) / 2.0);
                for (o, v) in out.iter_mut().zip(p) {
                    *o = factor * v;
                }
            }
            HamiltonianKind::Custom {
                breakpoints,
                values,
            } => {
                let r = sq.sqrt();
                if r == 0.0 {
                    out.fill(0.0);
                    return;
                }
                let slope = table_slope(breakpoints, values, r);
                for (o, v) in out.iter_mut().zip(p) {
                    *o = slope * v / r;
                }
            }
        }
    }

    /// Largest |dH/dp_i| over the box `|p_j| <= radius` for all axes.
    ///
    /// Used to size the Lax-Friedrichs dissipation from an a priori gradient
    /// range.
    pub fn grad_component_sup(&self, radius: f64, dim: usize) -> f64 {
        let r = radius.max(0.0);
        match &self.kind {
            HamiltonianKind::Quadratic => 2.0 * r,
            HamiltonianKind::Power { gamma, delta } => {
                if *gamma >= 2.0 {
                    let sq = (dim as f64) * r * r;
                    gamma * (delta + sq).powf((gamma - 2.0) / 2.0) * r
                } else {
                    // decreasing prefactor: extra axes only shrink it
                    gamma * (delta + r * r).powf((gamma - 2.0) / 2.0) * r
                }
            }
            HamiltonianKind::Custom {
                breakpoints,
                values,
            } => max_abs_slope(breakpoints, values),
        }
    }

    /// Monotone Lax-Friedrichs numerical Hamiltonian.
    ///
    /// `sigma` must dominate |dH/dp_i| over the gradient range of the data
    /// (caller supplies it from the Lipschitz certificate); then the flux is
    /// non-decreasing in `p_minus` and non-increasing in `p_plus`.
    pub fn lax_friedrichs(&self, p_minus: &[f64], p_plus: &[f64], sigma: &[f64]) -> Result<f64> {
        if sigma.iter().any(|&s| s < 0.0) {
            return Err(Error::Input(format!(
                "negative dissipation sigma {sigma:?}"
            )));
        }
        let mid: Vec<f64> = p_minus
            .iter()
            .zip(p_plus)
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        let mut value = self.eval(&mid)?;
        for i in 0..mid.len() {
            value -= 0.5 * sigma[i] * (p_plus[i] - p_minus[i]);
        }
        Ok(value)
    }
}

fn table_eval(breaks: &[f64], values: &[f64], r: f64) -> f64 {
    let last = breaks.len() - 1;
    if r >= breaks[last] {
        let slope = (values[last] - values[last - 1]) / (breaks[last] - breaks[last - 1]);
        return values[last] + slope * (r - breaks[last]);
    }
    let j = breaks.partition_point(|&b| b <= r).max(1);
    let (b0, b1) = (breaks[j - 1], breaks[j]);
    let (v0, v1) = (values[j - 1], values[j]);
    v0 + (v1 - v0) * (r - b0) / (b1 - b0)
}

fn table_slope(breaks: &[f64], values: &[f64], r: f64) -> f64 {
    let last = breaks.len() - 1;
    let j = if r >= breaks[last] {
        last
    } else {
        breaks.partition_point(|&b| b <= r).max(1)
    };
    (values[j] - values[j - 1]) / (breaks[j] - breaks[j - 1])
}

fn max_abs_slope(breaks: &[f64], values: &[f64]) -> f64 {
    breaks
        .windows(2)
        .zip(values.windows(2))
        .map(|(b, v)| ((v[1] - v[0]) / (b[1] - b[0])).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn quadratic_eval_and_grad() {
        let h = Hamiltonian::quadratic();
        assert_eq!(h.eval(&[3.0, 4.0]).unwrap(), 25.0);
        assert_eq!(h.grad(&[3.0, 4.0]), vec![6.0, 8.0]);
    }

    #[test]
    fn power_eval() {
        let h = Hamiltonian::power(3.0, 0.0).unwrap();
        assert!((h.eval(&[2.0]).unwrap() - 8.0).abs() < 1e-14);
        let hd = Hamiltonian::power(3.0, 1.0).unwrap();
        assert!((hd.eval(&[0.0]).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn power_grad_matches_closed_form() {
        let h = Hamiltonian::power(3.0, 0.0).unwrap();
        let g = h.grad(&[2.0]);
        assert!((g[0] - 12.0).abs() < 1e-12, "gamma |p|^(gamma-2) p = 3*2*2");
    }

    #[test]
    fn subgradient_convention_at_origin() {
        let h = Hamiltonian::power(1.5, 0.0).unwrap();
        assert_eq!(h.grad(&[0.0, 0.0]), vec![0.0, 0.0]);
        let e = Hamiltonian::eikonal();
        assert_eq!(e.grad(&[0.0]), vec![0.0]);
    }

    #[test]
    fn non_finite_argument_rejected() {
        let h = Hamiltonian::quadratic();
        assert!(h.eval(&[f64::NAN]).is_err());
    }

    #[test]
    fn grad_matches_finite_differences() {
        // Oracle: centered finite differences of eval at step 1e-5.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let specs = [
            Hamiltonian::quadratic(),
            Hamiltonian::power(1.5, 0.3).unwrap(),
            Hamiltonian::power(3.0, 1e-2).unwrap(),
        ];
        let step = 1e-5;
        for spec in &specs {
            for _ in 0..100 {
                let mut p = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                let norm: f64 = p.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 1.0 {
                    p.iter_mut().for_each(|v| *v /= norm);
                }
                let grad = spec.grad(&p);
                for i in 0..2 {
                    let mut fwd = p;
                    let mut bwd = p;
                    fwd[i] += step;
                    bwd[i] -= step;
                    let fd = (spec.eval(&fwd).unwrap() - spec.eval(&bwd).unwrap()) / (2.0 * step);
                    assert!(
                        (grad[i] - fd).abs() <= 1e-6,
                        "{:?} at {p:?}: grad {} vs fd {fd}",
                        spec.kind,
                        grad[i]
                    );
                }
            }
        }
    }

    #[test]
    fn lax_friedrichs_consistency() {
        let h = Hamiltonian::quadratic();
        let p = [0.7, -0.2];
        let lf = h.lax_friedrichs(&p, &p, &[3.0, 3.0]).unwrap();
        assert_eq!(lf, h.eval(&p).unwrap());
    }

    #[test]
    fn lax_friedrichs_arithmetic_example() {
        let h = Hamiltonian::quadratic();
        let lf = h.lax_friedrichs(&[0.0], &[2.0], &[4.0]).unwrap();
        assert!(
            (lf - (1.0 - 4.0)).abs() < 1e-14,
            "H(1) - 4*(2-0)/2 = -3, got {lf}"
        );
    }

    #[test]
    fn lax_friedrichs_rejects_negative_sigma() {
        let h = Hamiltonian::quadratic();
        assert!(h.lax_friedrichs(&[0.0], &[1.0], &[-1.0]).is_err());
    }

    #[test]
    fn lax_friedrichs_monotone_under_dominating_sigma() {
        // Randomized check: non-increasing in p_plus, non-decreasing in p_minus.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = Hamiltonian::quadratic();
        for _ in 0..1000 {
            let pm = [rng.gen_range(-1.0..1.0)];
            let pp = [rng.gen_range(-1.0..1.0)];
            // sigma must dominate 2|p| over the perturbed range |p| <= 1.3
            let sigma = [2.0 * 1.3_f64];
            let base = h.lax_friedrichs(&pm, &pp, &sigma).unwrap();
            let d = rng.gen_range(0.0..0.3);
            let up = h.lax_friedrichs(&pm, &[pp[0] + d], &sigma).unwrap();
            assert!(up <= base + 1e-12, "not non-increasing in p_plus");
            let dn = h.lax_friedrichs(&[pm[0] + d], &pp, &sigma).unwrap();
            assert!(dn + 1e-12 >= base, "not non-decreasing in p_minus");
        }
    }

    #[test]
    fn quadratic_equals_power_two() {
        let q = Hamiltonian::quadratic();
        let p2 = Hamiltonian::power(2.0, 0.0).unwrap();
        for p in [[0.3, -0.8], [1.5, 2.0], [0.0, 0.0]] {
            assert!((q.eval(&p).unwrap() - p2.eval(&p).unwrap()).abs() < 1e-14);
            let gq = q.grad(&p);
            let gp = p2.grad(&p);
            assert!((gq[0] - gp[0]).abs() < 1e-14 && (gq[1] - gp[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_hamiltonian_is_zero() {
        let z = Hamiltonian::zero();
        assert_eq!(z.eval(&[0.9]).unwrap(), 0.0);
        assert_eq!(z.grad(&[0.9]), vec![0.0]);
        assert_eq!(z.grad_component_sup(5.0, 1), 0.0);
    }

    #[test]
    fn custom_table_extends_linearly() {
        let h = Hamiltonian::custom_table(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 1.5]).unwrap();
        assert!((h.eval(&[0.5]).unwrap() - 0.5).abs() < 1e-14);
        assert!(
            (h.eval(&[3.0]).unwrap() - 2.0).abs() < 1e-14,
            "last slope 0.5 extends"
        );
        assert!((h.grad_component_sup(10.0, 1) - 1.0).abs() < 1e-14);
    }
}
