//! Scalar kernel of the perishable public-goods game.
//!
//! A player discovering content at rate `y` while neighbours jointly discover
//! at rate `x` stays informed with probability `1 - exp(-tau (y + x))` and pays
//! the polynomial cost `theta / (alpha + 1) * y^(alpha + 1)`. Everything here
//! is a pure function of its arguments.

use std::f64::consts::E;

use serde::Serialize;

use crate::error::{Error, Result};

const HALLEY_MAX_ITERATIONS: usize = 64;
const NEWTON_MAX_ITERATIONS: usize = 200;

/// Constants of the game: cost exponent `alpha`, cost scale `theta` and
/// shelf-life `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    alpha: f64,
    theta: f64,
    tau: f64,
}

impl ModelParams {
    pub fn new(alpha: f64, theta: f64, tau: f64) -> Result<Self> {
        for (name, value) in [("alpha", alpha), ("theta", theta), ("tau", tau)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and > 0, got {value}"
                )));
            }
        }
        Ok(Self { alpha, theta, tau })
    }

    /// Parameters with the cost normalised to `theta = 1`.
    pub fn normalized(alpha: f64, tau: f64) -> Result<Self> {
        Self::new(alpha, 1.0, tau)
    }

    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        Self::new(self.alpha, self.theta, tau)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// True when the closed-form best response applies.
    pub fn is_normalized(&self) -> bool {
        self.theta == 1.0
    }

    pub fn is_quadratic(&self) -> bool {
        self.alpha == 1.0
    }
}

fn check_nonnegative(name: &str, value: f64) -> Result<()> {
    if value.is_nan() || value < 0.0 {
        return Err(Error::Domain(format!("{name} must be >= 0, got {value}")));
    }
    Ok(())
}

/// Principal branch of the Lambert W function on `[0, inf)`.
pub fn lambert_w(x: f64) -> Result<f64> {
    check_nonnegative("lambert_w argument", x)?;
    Ok(lambert_w0(x))
}

/// Unchecked principal branch; callers guarantee `x >= 0`.
pub(crate) fn lambert_w0(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return f64::INFINITY;
    }
    let mut w = if x < 1.0 {
        x
    } else if x < E {
        x.ln_1p() * 0.8
    } else {
        let l = x.ln();
        l - l.ln()
    };
    for _ in 0..HALLEY_MAX_ITERATIONS {
        let ew = w.exp();
        let f = w * ew - x;
        if f == 0.0 {
            break;
        }
        let wp1 = w + 1.0;
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        w -= step;
        if step.abs() <= 4.0 * f64::EPSILON * w.abs() {
            break;
        }
    }
    w
}

/// `W(exp(log_x))` without forming `exp(log_x)` when it would overflow.
pub(crate) fn lambert_w_of_exp(log_x: f64) -> f64 {
    if log_x < 700.0 {
        return lambert_w0(log_x.exp());
    }
    // w + ln w = log_x
    let mut w = log_x - log_x.ln();
    for _ in 0..NEWTON_MAX_ITERATIONS {
        let step = (w + w.ln() - log_x) / (1.0 + 1.0 / w);
        w -= step;
        if step.abs() <= 4.0 * f64::EPSILON * w {
            break;
        }
    }
    w
}

/// Effort cost `theta / (alpha + 1) * y^(alpha + 1)`.
pub fn cost(y: f64, params: &ModelParams) -> Result<f64> {
    check_nonnegative("effort", y)?;
    Ok(cost_unchecked(y, params))
}

fn cost_unchecked(y: f64, params: &ModelParams) -> f64 {
    params.theta / (params.alpha + 1.0) * y.powf(params.alpha + 1.0)
}

/// Mean utility per unit of time of a player exerting `y_own` while its
/// neighbours jointly exert `y_neighbors`.
pub fn utility(y_own: f64, y_neighbors: f64, params: &ModelParams) -> Result<f64> {
    check_nonnegative("own effort", y_own)?;
    check_nonnegative("neighbour effort", y_neighbors)?;
    Ok(utility_unchecked(y_own, y_neighbors, params))
}

pub(crate) fn utility_unchecked(y_own: f64, y_neighbors: f64, params: &ModelParams) -> f64 {
    -(-params.tau * (y_own + y_neighbors)).exp_m1() - cost_unchecked(y_own, params)
}

/// Best response of a player to the summed effort of its neighbours.
pub fn best_response(y_neighbors: f64, params: &ModelParams) -> Result<f64> {
    check_nonnegative("neighbour effort", y_neighbors)?;
    Ok(BestResponseCurve::new(*params).respond(y_neighbors))
}

/// Best-response map with its parameter-dependent constants precomputed.
///
/// For `theta = 1` the response is `(alpha/tau) W(tau^((alpha+1)/alpha)/alpha * exp(-tau y/alpha))`.
/// Other cost scales solve the first-order condition
/// `tau exp(-tau (phi + y)) = theta phi^alpha` numerically.
#[derive(Debug, Clone, Copy)]
pub struct BestResponseCurve {
    params: ModelParams,
    log_coefficient: f64,
    max_effort: f64,
}

impl BestResponseCurve {
    pub fn new(params: ModelParams) -> Self {
        let a = params.alpha;
        let log_coefficient = (a + 1.0) / a * params.tau.ln() - a.ln();
        let mut curve = Self {
            params,
            log_coefficient,
            max_effort: 0.0,
        };
        curve.max_effort = curve.respond(0.0);
        curve
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// `phi(0)`, the upper bound of every response.
    pub fn max_effort(&self) -> f64 {
        self.max_effort
    }

    /// Response to neighbour effort `y`. Negative `y` is accepted so that
    /// finite differences can straddle zero.
    pub fn respond(&self, y: f64) -> f64 {
        let p = &self.params;
        if p.is_normalized() {
            let log_arg = self.log_coefficient - p.tau * y / p.alpha;
            p.alpha / p.tau * lambert_w_of_exp(log_arg)
        } else {
            solve_first_order_condition(y, p)
        }
    }

    /// Slope `d phi / d y`. Implicit differentiation of the first-order
    /// condition gives `-w / (1 + w)` with `w = tau phi / alpha` for any
    /// `alpha` and `theta`.
    pub fn slope(&self, y: f64) -> f64 {
        let w = self.params.tau * self.respond(y) / self.params.alpha;
        -w / (1.0 + w)
    }
}

/// Root of `ln tau - tau (e^u + y) - ln theta - alpha u = 0` in `u = ln phi`.
///
/// The left side is concave and decreasing in `u`. Dropping the `e^u` term
/// gives an upper bound, and Newton's method started there moves
/// monotonically towards the root; a bisection fallback keeps each iterate
/// inside the bracket.
fn solve_first_order_condition(y: f64, p: &ModelParams) -> f64 {
    let (a, t) = (p.alpha, p.tau);
    let base = t.ln() - t * y - p.theta.ln();
    let g = |u: f64| base - t * u.exp() - a * u;
    let mut hi = base / a;
    if hi == f64::NEG_INFINITY || hi.exp() == 0.0 {
        return 0.0;
    }
    let mut lo = (base - t * hi.exp()) / a;
    let mut u = hi;
    for _ in 0..NEWTON_MAX_ITERATIONS {
        let gu = g(u);
        if gu > 0.0 {
            lo = u;
        } else {
            hi = u;
        }
        let mut next = u - gu / (-t * u.exp() - a);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let step = (next - u).abs();
        u = next;
        if step <= 4.0 * f64::EPSILON * u.abs().max(1.0) {
            break;
        }
    }
    u.exp()
}

/// Analytic slope of the quadratic-cost (`alpha = 1`, `theta = 1`) best
/// response: `-W(tau^2 e^(-tau y)) / (1 + W(tau^2 e^(-tau y)))`.
pub fn best_response_derivative(y_neighbors: f64, tau: f64) -> Result<f64> {
    check_nonnegative("neighbour effort", y_neighbors)?;
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tau must be > 0, got {tau}"
        )));
    }
    let w = lambert_w_of_exp(2.0 * tau.ln() - tau * y_neighbors);
    Ok(-w / (1.0 + w))
}

/// Best-response slope for arbitrary parameters.
pub fn best_response_slope(y_neighbors: f64, params: &ModelParams) -> Result<f64> {
    check_nonnegative("neighbour effort", y_neighbors)?;
    Ok(BestResponseCurve::new(*params).slope(y_neighbors))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must be finite and > 0, got {alpha}"
        )));
    }
    Ok(())
}

/// Shelf-life maximising the effort of an isolated player, `e^(1/(alpha+1))`.
pub fn tau_star_isolated(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok((1.0 / (alpha + 1.0)).exp())
}

/// Shelf-life maximising the symmetric-equilibrium effort on a `degree`-regular
/// graph, `(e / (1 + D)^alpha)^(1/(alpha+1))`.
pub fn tau_star_symmetric(alpha: f64, degree: u32) -> Result<f64> {
    check_alpha(alpha)?;
    let d = f64::from(degree);
    Ok((E / (1.0 + d).powf(alpha)).powf(1.0 / (alpha + 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Bisection on `w e^w = x` over a bracket that always contains the root.
    fn w_by_bisection(x: f64) -> f64 {
        let (mut lo, mut hi) = (0.0_f64, x.max(1.0));
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid * mid.exp() < x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Bisection on the first-order condition `tau e^(-tau(p+y)) - theta p^alpha`.
    fn response_by_bisection(y: f64, p: &ModelParams) -> f64 {
        let foc = |v: f64| p.tau() * (-p.tau() * (v + y)).exp() - p.theta() * v.powf(p.alpha());
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        while foc(hi) > 0.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if foc(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn quad(tau: f64) -> ModelParams {
        ModelParams::normalized(1.0, tau).unwrap()
    }

    #[test]
    fn params_reject_nonpositive() {
        assert!(ModelParams::new(0.0, 1.0, 1.0).is_err());
        assert!(ModelParams::new(1.0, -1.0, 1.0).is_err());
        assert!(ModelParams::new(1.0, 1.0, f64::NAN).is_err());
        assert!(ModelParams::new(1.0, 1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn lambert_w_examples() {
        assert_eq!(lambert_w(0.0).unwrap(), 0.0);
        assert!((lambert_w(E).unwrap() - 1.0).abs() < 1e-15);
        let oracle = w_by_bisection(1.0);
        assert!((oracle - 0.567_143_290_409_784).abs() < 1e-12);
        assert!((lambert_w(1.0).unwrap() - oracle).abs() < 1e-12);
        assert!(matches!(lambert_w(-0.1), Err(Error::Domain(_))));
        assert!(lambert_w(f64::NAN).is_err());
    }

    #[test]
    fn lambert_w_of_exp_matches_direct_and_large_arguments() {
        for l in [-50.0, -1.0, 0.0, 3.0, 100.0, 650.0] {
            let direct = lambert_w0(f64::exp(l));
            assert!((lambert_w_of_exp(l) - direct).abs() <= 1e-13 * direct.max(1e-300));
        }
        let w = lambert_w_of_exp(5000.0);
        assert!((w + w.ln() - 5000.0).abs() < 1e-10);
    }

    #[test]
    fn cost_examples() {
        let p = quad(1.0);
        assert_eq!(cost(0.0, &p).unwrap(), 0.0);
        assert!((cost(2.0, &p).unwrap() - 2.0).abs() < 1e-15);
        let cubic = ModelParams::normalized(2.0, 1.0).unwrap();
        assert!((cost(1.0, &cubic).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(cost(-1.0, &p).is_err());
    }

    #[test]
    fn utility_examples() {
        let p = quad(1.0);
        assert_eq!(utility(0.0, 0.0, &p).unwrap(), 0.0);
        assert!((utility(0.0, 1e6, &p).unwrap() - 1.0).abs() < 1e-15);
        let direct = 1.0 - (-1.0_f64).exp() - 0.5;
        assert!((utility(1.0, 0.0, &p).unwrap() - direct).abs() < 1e-15);
        assert!((direct - 0.132_120_558_828_557_7).abs() < 1e-15);
        assert!(utility(-0.1, 0.0, &p).is_err());
        assert!(utility(0.0, -0.1, &p).is_err());
    }

    #[test]
    fn best_response_examples() {
        let p = quad(1.0);
        let oracle = response_by_bisection(0.0, &p);
        assert!((best_response(0.0, &p).unwrap() - oracle).abs() < 1e-12);
        assert!((oracle - 0.567_143_290_409_784).abs() < 1e-12);
        assert_eq!(best_response(1e6, &p).unwrap(), 0.0);
        assert!(best_response(-1.0, &p).is_err());

        // y = D ytilde with the symmetric value for D = 2
        let ytilde = lambert_w(3.0).unwrap() / 3.0;
        assert!((best_response(2.0 * ytilde, &p).unwrap() - ytilde).abs() < 1e-12);
    }

    #[test]
    fn max_effort_matches_closed_form() {
        for &(alpha, tau) in &[(1.0, 1.0), (2.0, 0.5), (0.5, 3.0), (1.0, 10.0)] {
            let p = ModelParams::normalized(alpha, tau).unwrap();
            let curve = BestResponseCurve::new(p);
            let expected =
                alpha / tau * lambert_w(tau.powf((alpha + 1.0) / alpha) / alpha).unwrap();
            assert!((curve.max_effort() - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn unnormalized_cost_matches_rescaled_closed_form() {
        // theta != 1 still has the closed form
        // (alpha/tau) W((tau/alpha) (tau/theta)^(1/alpha) e^(-tau y / alpha)).
        for &(alpha, theta, tau, y) in &[
            (1.0, 2.0, 1.0, 0.0),
            (1.0, 0.25, 3.0, 0.4),
            (2.0, 5.0, 0.7, 1.3),
            (0.5, 60.0, 2.0, 0.01),
        ] {
            let p = ModelParams::new(alpha, theta, tau).unwrap();
            let arg = tau / alpha * (tau / theta).powf(1.0 / alpha) * (-tau * y / alpha).exp();
            let expected = alpha / tau * lambert_w(arg).unwrap();
            let got = best_response(y, &p).unwrap();
            assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
            assert!((got - response_by_bisection(y, &p)).abs() < 1e-12);
        }
    }

    #[test]
    fn unnormalized_response_underflows_to_zero() {
        let p = ModelParams::new(1.0, 2.0, 5.0).unwrap();
        assert_eq!(best_response(1e6, &p).unwrap(), 0.0);
    }

    #[test]
    fn derivative_examples() {
        let w1 = lambert_w(1.0).unwrap();
        let d = best_response_derivative(0.0, 1.0).unwrap();
        assert!((d + w1 / (1.0 + w1)).abs() < 1e-15);
        assert!((d + 0.361_896_256_634_889_2).abs() < 1e-12);
        assert_eq!(best_response_derivative(1e6, 2.0).unwrap(), 0.0);
        assert!(best_response_derivative(0.0, 1e-9).unwrap().abs() < 1e-17);
        assert!(best_response_derivative(0.0, 0.0).is_err());
    }

    #[test]
    fn slope_matches_finite_differences_for_general_alpha() {
        let h = 1e-5;
        for &(alpha, theta, tau, y) in &[
            (2.0, 1.0, 1.5, 0.3),
            (0.7, 1.0, 4.0, 0.1),
            (1.5, 3.0, 2.0, 0.5),
        ] {
            let p = ModelParams::new(alpha, theta, tau).unwrap();
            let curve = BestResponseCurve::new(p);
            let fd = (curve.respond(y + h) - curve.respond(y - h)) / (2.0 * h);
            assert!((curve.slope(y) - fd).abs() < 1e-6);
        }
    }

    #[test]
    fn tau_star_examples() {
        assert!((tau_star_isolated(1.0).unwrap() - 1.648_721_270_700_128).abs() < 1e-15);
        assert!((tau_star_isolated(1e9).unwrap() - 1.0).abs() < 1e-8);
        assert!((tau_star_symmetric(1.0, 1).unwrap() - 1.165_821_990_798_562).abs() < 1e-14);
        assert!(tau_star_symmetric(1.0, 1_000_000).unwrap() < 2e-3);
        assert!(tau_star_isolated(0.0).is_err());
    }

    #[test]
    fn tau_star_isolated_is_grid_argmax() {
        let step = 0.01;
        let grid = (0..=490).map(|k| 0.1 + step * f64::from(k));
        let best = grid
            .map(|tau| (tau, BestResponseCurve::new(quad(tau)).max_effort()))
            .fold((0.0, f64::MIN), |acc, t| if t.1 > acc.1 { t } else { acc });
        assert!((best.0 - 1.648_72).abs() <= step);
    }

    #[test]
    fn response_maximizes_utility_on_grid() {
        for &(tau, y) in &[(1.0, 0.0), (0.5, 0.7), (5.0, 0.05), (2.0, 2.0)] {
            let p = quad(tau);
            let curve = BestResponseCurve::new(p);
            let phi = curve.respond(y);
            let step = 1e-4;
            let n = (2.0 * curve.max_effort() / step).ceil() as usize;
            let (mut arg, mut best) = (0.0, f64::MIN);
            for k in 0..=n {
                let v = k as f64 * step;
                let u = utility_unchecked(v, y, &p);
                if u > best {
                    best = u;
                    arg = v;
                }
            }
            assert!((phi - arg).abs() <= step, "tau={tau} y={y}: {phi} vs {arg}");
        }
    }

    proptest! {
        #[test]
        fn lambert_w_round_trip(x in 0.0_f64..1e6) {
            let w = lambert_w(x).unwrap();
            prop_assert!(w >= 0.0);
            prop_assert!((w * w.exp() - x).abs() <= 1e-12 * x.max(1.0));
        }

        #[test]
        fn lambert_w_monotone(a in 0.0_f64..1e4, b in 0.0_f64..1e4) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(lambert_w(lo).unwrap() <= lambert_w(hi).unwrap());
        }

        #[test]
        fn response_is_nonincreasing(
            y1 in 0.0_f64..20.0, dy in 0.0_f64..5.0,
            alpha in 0.3_f64..3.0, theta in 0.2_f64..5.0, tau in 0.05_f64..20.0,
        ) {
            let p = ModelParams::new(alpha, theta, tau).unwrap();
            let curve = BestResponseCurve::new(p);
            let (r1, r2) = (curve.respond(y1), curve.respond(y1 + dy));
            prop_assert!(r2 <= r1);
            prop_assert!(r1 <= curve.max_effort() && r2 >= 0.0);
        }

        #[test]
        fn first_order_condition_holds(
            y in 0.0_f64..5.0, alpha in 0.3_f64..3.0, theta in 0.2_f64..5.0, tau in 0.05_f64..20.0,
        ) {
            let p = ModelParams::new(alpha, theta, tau).unwrap();
            let phi = best_response(y, &p).unwrap();
            let residual = tau * (-tau * (phi + y)).exp() - theta * phi.powf(alpha);
            prop_assert!(residual.abs() <= 1e-10, "residual {}", residual);
        }

        #[test]
        fn analytic_derivative_matches_central_difference(y in 1e-4_f64..10.0, tau in 0.05_f64..20.0) {
            let h = 1e-5;
            let p = quad(tau);
            let curve = BestResponseCurve::new(p);
            let fd = (curve.respond(y + h) - curve.respond(y - h)) / (2.0 * h);
            let d = best_response_derivative(y, tau).unwrap();
            prop_assert!(d <= 0.0 && d > -1.0);
            prop_assert!((d - fd).abs() <= 1e-6);
        }

        #[test]
        fn response_is_grid_maximizer(y in 0.0_f64..3.0, tau in 0.1_f64..8.0) {
            let p = quad(tau);
            let phi = best_response(y, &p).unwrap();
            let u_phi = utility(phi, y, &p).unwrap();
            // the response beats every probe on a coarse grid and its neighbours
            for k in 0..200 {
                let v = 2.0 * phi.max(1e-3) * f64::from(k) / 199.0;
                prop_assert!(utility(v, y, &p).unwrap() <= u_phi + 1e-15);
            }
        }
    }
}
