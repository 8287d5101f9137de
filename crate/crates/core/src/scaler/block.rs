//! Two-parameter Poisson sub-problems.
//!
//! Both conditional updates of the scaling model have the same shape: a run
//! of cells with linear predictor `η_k = p + offset_k + q·slope_k`, where
//! `(p, q)` is `(α_i, θ_i)` for a document and `(ψ_j, β_j)` for a feature.

/// `exp` with the linear predictor clamped to `±clamp`.
#[inline]
pub(crate) fn rate(eta: f64, clamp: f64) -> f64 {
    eta.clamp(-clamp, clamp).exp()
}

pub(crate) struct PairProblem<'a> {
    pub counts: &'a [f64],
    pub offset: &'a [f64],
    pub slope: &'a [f64],
    pub clamp: f64,
}

/// Gradient and (positive) information matrix `[[a, b], [b, c]]`.
pub(crate) struct PairDerivatives {
    pub gradient: [f64; 2],
    pub info: [f64; 3],
}

const MAX_NEWTON_STEPS: usize = 50;
const MAX_HALVINGS: usize = 40;
const GRADIENT_TOL: f64 = 1e-12;

impl PairProblem<'_> {
    pub fn objective(&self, p: f64, q: f64) -> f64 {
        let mut total = 0.0;
        for k in 0..self.counts.len() {
            let eta = p + self.offset[k] + q * self.slope[k];
            total += self.counts[k] * eta - rate(eta, self.clamp);
        }
        total
    }

    pub fn derivatives(&self, p: f64, q: f64) -> PairDerivatives {
        let (mut g0, mut g1, mut a, mut b, mut c) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for k in 0..self.counts.len() {
            let s = self.slope[k];
            let lambda = rate(p + self.offset[k] + q * s, self.clamp);
            let r = self.counts[k] - lambda;
            g0 += r;
            g1 += r * s;
            a += lambda;
            b += lambda * s;
            c += lambda * s * s;
        }
        PairDerivatives {
            gradient: [g0, g1],
            info: [a, b, c],
        }
    }

    /// Damped Newton ascent from `start`, run until the gradient vanishes to
    /// working precision. Never returns a point with a lower objective than
    /// the start.
    pub fn maximize(&self, start: (f64, f64)) -> (f64, f64) {
        let (mut p, mut q) = start;
        let start_value = self.objective(p, q);
        let mut current = start_value;
        for _ in 0..MAX_NEWTON_STEPS {
            let PairDerivatives { gradient: [g0, g1], info: [a, b, c] } = self.derivatives(p, q);
            if g0.abs() <= GRADIENT_TOL * a.max(1.0) && g1.abs() <= GRADIENT_TOL * c.max(1.0) {
                break;
            }
            let det = a * c - b * b;
            let (mut dp, mut dq) = if det > 1e-12 * a * c && det.is_finite() {
                ((c * g0 - b * g1) / det, (a * g1 - b * g0) / det)
            } else {
                // Singular block (e.g. constant slope): move the offset only.
                (if a > 0.0 { g0 / a } else { 0.0 }, 0.0)
            };
            if !(dp.is_finite() && dq.is_finite()) {
                break;
            }
            // Near the optimum the objective change drowns in rounding, so a
            // step is accepted within that noise.
            let slack = 64.0 * f64::EPSILON * current.abs().max(1.0);
            let mut accepted = false;
            for _ in 0..MAX_HALVINGS {
                let candidate = self.objective(p + dp, q + dq);
                if candidate >= current - slack {
                    p += dp;
                    q += dq;
                    current = candidate;
                    accepted = true;
                    break;
                }
                dp *= 0.5;
                dq *= 0.5;
            }
            let small = dp.abs() <= 1e-14 * (1.0 + p.abs()) && dq.abs() <= 1e-14 * (1.0 + q.abs());
            if !accepted || small {
                break;
            }
        }
        if current < start_value {
            return start;
        }
        (p, q)
    }
}
