//! Numerical diagnostics for the drift-diffusion `dX = -q(X) dt + eps dB`.
//!
//! Sample-based checks of the dissipativity and coercivity conditions on
//! `q`, linear-growth constants, generator values for `V = ||x||^2` and
//! `W = ||x - xbar||^2 / 2`, Monte Carlo hitting times of a ball, and
//! ergodic time averages. Simulations run the unconstrained dynamics (no box
//! projection).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::descent::descent_direction;
use crate::dynamics::{em_step_in_place, StepParams};
use crate::error::{Error, Result};
use crate::model::{dot, norm, DecisionVector, EvaluationBudget, Problem};
use crate::rng::RngStream;

const SWEEP_TAG: u64 = 0x7377_6570;
const HITTING_TAG: u64 = 0x6869_7474;
const PATH_TAG: u64 = 0x7061_7468;

/// Directions per radius in [`radial_sweep`].
pub const SWEEP_DIRECTIONS: usize = 64;

/// A drift field `q: R^n -> R^n`.
pub trait DriftField: Send + Sync {
    fn dim(&self) -> usize;

    fn descriptor(&self) -> String;

    fn drift_into(&self, x: &[f64], out: &mut [f64]);

    fn drift(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.drift_into(x, &mut out);
        out
    }
}

/// `q(x) = beta * (x - center)`: the Ornstein-Uhlenbeck drift.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearField {
    pub beta: f64,
    pub center: Vec<f64>,
}

impl LinearField {
    pub fn new(beta: f64, dim: usize) -> Self {
        Self {
            beta,
            center: vec![0.0; dim],
        }
    }

    pub fn centered(beta: f64, center: Vec<f64>) -> Self {
        Self { beta, center }
    }
}

impl DriftField for LinearField {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn descriptor(&self) -> String {
        format!("linear(beta={}, center={:?})", self.beta, self.center)
    }

    fn drift_into(&self, x: &[f64], out: &mut [f64]) {
        for ((o, xi), ci) in out.iter_mut().zip(x).zip(&self.center) {
            *o = self.beta * (xi - ci);
        }
    }
}

/// `q(x) = x / ||x||` (and 0 at the origin): bounded, so not coercive.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialUnitField {
    pub dim: usize,
}

impl DriftField for RadialUnitField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn descriptor(&self) -> String {
        "radial-unit".into()
    }

    fn drift_into(&self, x: &[f64], out: &mut [f64]) {
        let r = norm(x);
        for (o, xi) in out.iter_mut().zip(x) {
            *o = if r > 0.0 { xi / r } else { 0.0 };
        }
    }
}

/// The min-norm descent field of a problem, using its analytic Jacobian when
/// present and centered differences otherwise.
pub struct ProblemField<P: Problem> {
    pub problem: P,
}

impl<P: Problem> DriftField for ProblemField<P> {
    fn dim(&self) -> usize {
        self.problem.n_var()
    }

    fn descriptor(&self) -> String {
        format!("descent field of {}", self.problem.name())
    }

    fn drift_into(&self, x: &[f64], out: &mut [f64]) {
        let budget = EvaluationBudget::unlimited();
        match descent_direction(&self.problem, x, None, &budget, true) {
            Ok(d) => out.copy_from_slice(&d.q),
            Err(_) => out.fill(f64::NAN),
        }
    }
}

/// Wraps a closure as a field.
pub struct FnField<F: Fn(&[f64], &mut [f64]) + Send + Sync> {
    pub dim: usize,
    pub name: String,
    pub f: F,
}

impl<F: Fn(&[f64], &mut [f64]) + Send + Sync> DriftField for FnField<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn descriptor(&self) -> String {
        self.name.clone()
    }

    fn drift_into(&self, x: &[f64], out: &mut [f64]) {
        (self.f)(x, out)
    }
}

/// Parses a field name: `ou:beta=<b>`, `identity`, `radial-unit` or `zero`.
pub fn field_from_spec(spec: &str, dim: usize) -> Result<Box<dyn DriftField>> {
    if dim == 0 {
        return Err(Error::Config("field dimension must be positive".into()));
    }
    let (name, args) = match spec.split_once(':') {
        Some((n, a)) => (n, Some(a)),
        None => (spec, None),
    };
    match (name, args) {
        ("ou", Some(args)) => {
            let beta = args
                .strip_prefix("beta=")
                .and_then(|b| b.parse::<f64>().ok())
                .filter(|b| b.is_finite())
                .ok_or_else(|| Error::Config(format!("malformed field parameters '{args}' (expected beta=<number>)")))?;
            Ok(Box::new(LinearField::new(beta, dim)))
        }
        ("identity", None) => Ok(Box::new(LinearField::new(1.0, dim))),
        ("zero", None) => Ok(Box::new(LinearField::new(0.0, dim))),
        ("radial-unit", None) => Ok(Box::new(RadialUnitField { dim })),
        _ => Err(Error::Config(format!(
            "unknown field '{spec}' (known: ou:beta=<b>, identity, zero, radial-unit)"
        ))),
    }
}

/// Points on spheres of radius `r, 2r, 4r, 8r`, [`SWEEP_DIRECTIONS`] seeded
/// Gaussian directions per sphere.
pub fn radial_sweep(dim: usize, r: f64, seed: u64) -> Vec<DecisionVector> {
    let mut stream = RngStream::keyed(seed, &[SWEEP_TAG, dim as u64]);
    let mut out = Vec::with_capacity(4 * SWEEP_DIRECTIONS);
    for scale in [1.0, 2.0, 4.0, 8.0] {
        let mut produced = 0;
        while produced < SWEEP_DIRECTIONS {
            let d = stream.gaussian_draw(dim);
            let len = norm(&d);
            if len < 1e-12 {
                continue;
            }
            let radius = scale * r;
            out.push(DecisionVector::from_vec_unchecked(d.iter().map(|v| radius * v / len).collect()));
            produced += 1;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub theta0: Option<f64>,
    pub r: f64,
    pub mu: Option<f64>,
    pub samples_tested: usize,
    pub pass_fraction: f64,
    /// Largest `required - attained` over the samples; positive means a failure.
    pub worst_violation: f64,
    /// `(1 + theta0^2 / 2)^-1`, for dissipativity reports.
    pub kappa: Option<f64>,
}

pub fn kappa(theta0: f64) -> f64 {
    1.0 / (1.0 + 0.5 * theta0 * theta0)
}

fn check_samples(samples: &[DecisionVector], r: f64, dim: usize) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::invalid("at least one sample is required"));
    }
    for (i, s) in samples.iter().enumerate() {
        if s.len() != dim {
            return Err(Error::invalid(format!("sample {i} has dimension {}, field has {dim}", s.len())));
        }
        // Sweep points are built as r * unit vector; allow for rounding.
        if s.norm() < r * (1.0 - 1e-12) {
            return Err(Error::invalid(format!(
                "sample {i} has norm {} inside radius {r}",
                s.norm()
            )));
        }
    }
    Ok(())
}

fn summarize(violations: &[f64]) -> (f64, f64) {
    let passed = violations.iter().filter(|v| **v <= 0.0).count();
    let worst = violations.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (passed as f64 / violations.len() as f64, worst)
}

/// Dissipativity: `x . q(x) >= (1 + theta0^2/2) * max(1, ||q(x)||^2)` at
/// every sample (all samples must satisfy `||x|| >= r`).
pub fn check_assumption_a(
    field: &dyn DriftField,
    theta0: f64,
    r: f64,
    samples: &[DecisionVector],
) -> Result<AssumptionReport> {
    if !(theta0 > 0.0) {
        return Err(Error::invalid(format!("theta0 must be positive, got {theta0}")));
    }
    if !(r >= 1.0) {
        return Err(Error::invalid(format!("radius must be at least 1, got {r}")));
    }
    check_samples(samples, r, field.dim())?;
    let factor = 1.0 + 0.5 * theta0 * theta0;
    let violations: Vec<f64> = samples
        .iter()
        .map(|x| {
            let q = field.drift(x);
            factor * dot(&q, &q).max(1.0) - dot(x, &q)
        })
        .collect();
    let (pass_fraction, worst_violation) = summarize(&violations);
    Ok(AssumptionReport {
        theta0: Some(theta0),
        r,
        mu: None,
        samples_tested: samples.len(),
        pass_fraction,
        worst_violation,
        kappa: Some(kappa(theta0)),
    })
}

/// Coercivity: `||q(x)|| >= mu * ||x||` at every sample.
pub fn check_assumption_b(
    field: &dyn DriftField,
    mu: f64,
    r: f64,
    samples: &[DecisionVector],
) -> Result<AssumptionReport> {
    if !(mu > 0.0) {
        return Err(Error::invalid(format!("mu must be positive, got {mu}")));
    }
    check_samples(samples, r, field.dim())?;
    let violations: Vec<f64> = samples
        .iter()
        .map(|x| mu * x.norm() - norm(&field.drift(x)))
        .collect();
    let (pass_fraction, worst_violation) = summarize(&violations);
    Ok(AssumptionReport {
        theta0: None,
        r,
        mu: Some(mu),
        samples_tested: samples.len(),
        pass_fraction,
        worst_violation,
        kappa: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthEstimate {
    pub l_hat: f64,
    pub c1_hat: f64,
    pub c2_hat: f64,
}

/// `L = max ||q(x)|| / (1 + ||x||)` over the samples, `C1 = 3L`,
/// `C2 = L + eps^2 n`.
pub fn estimate_growth(field: &dyn DriftField, samples: &[DecisionVector], eps: f64, n: usize) -> Result<GrowthEstimate> {
    if samples.is_empty() {
        return Err(Error::invalid("at least one sample is required"));
    }
    let l_hat = samples
        .iter()
        .map(|x| norm(&field.drift(x)) / (1.0 + x.norm()))
        .fold(0.0, f64::max);
    Ok(GrowthEstimate {
        l_hat,
        c1_hat: 3.0 * l_hat,
        c2_hat: l_hat + eps * eps * n as f64,
    })
}

/// Generator applied to `V(x) = ||x||^2`: `-2 x . q(x) + eps^2 n`.
pub fn generator_v(field: &dyn DriftField, x: &[f64], eps: f64) -> f64 {
    -2.0 * dot(x, &field.drift(x)) + eps * eps * x.len() as f64
}

/// Generator applied to `W(x) = ||x - xbar||^2 / 2`:
/// `-(x - xbar) . q(x) + eps^2 n / 2`.
pub fn generator_w(field: &dyn DriftField, x: &[f64], xbar: &[f64], eps: f64) -> f64 {
    let q = field.drift(x);
    let shifted: f64 = x.iter().zip(xbar).zip(&q).map(|((a, b), c)| (a - b) * c).sum();
    -shifted + 0.5 * eps * eps * x.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftConditionReport {
    pub lambda: f64,
    pub radius: f64,
    /// Samples with `||x - xbar|| > radius`; the others are ignored.
    pub samples_tested: usize,
    pub pass_fraction: f64,
    /// Largest `LW(x) + lambda` among tested samples.
    pub worst_excess: f64,
}

/// Checks the Foster-Lyapunov condition `LW(x) <= -lambda` at the samples
/// lying outside the ball of `radius` around `xbar`.
pub fn check_drift_condition(
    field: &dyn DriftField,
    xbar: &[f64],
    eps: f64,
    lambda: f64,
    radius: f64,
    samples: &[DecisionVector],
) -> DriftConditionReport {
    let excess: Vec<f64> = samples
        .iter()
        .filter(|x| {
            let d: f64 = x.iter().zip(xbar).map(|(a, b)| (a - b) * (a - b)).sum();
            d.sqrt() > radius
        })
        .map(|x| generator_w(field, x, xbar, eps) + lambda)
        .collect();
    let (pass_fraction, worst_excess) = if excess.is_empty() {
        (1.0, f64::NEG_INFINITY)
    } else {
        summarize(&excess)
    };
    DriftConditionReport {
        lambda,
        radius,
        samples_tested: excess.len(),
        pass_fraction,
        worst_excess,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingTimeEstimate {
    /// Mean time (steps * sigma). A lower bound when `hit_fraction < 1`,
    /// since non-hitting replicas count as `max_steps * sigma`.
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub hit_fraction: f64,
    pub replicas: usize,
}

impl HittingTimeEstimate {
    pub fn relative_ci_width(&self) -> f64 {
        (self.ci_high - self.ci_low) / self.mean
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Steps until the path first enters `{ ||x - xbar|| <= p }`, or `None`.
fn first_hit(
    field: &dyn DriftField,
    x0: &[f64],
    xbar: &[f64],
    p: f64,
    params: StepParams,
    max_steps: u64,
    stream: &mut RngStream,
) -> Result<Option<u64>> {
    if dist(x0, xbar) <= p {
        return Ok(Some(0));
    }
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut q = vec![0.0; n];
    let mut eta = vec![0.0; n];
    for step in 1..=max_steps {
        field.drift_into(&x, &mut q);
        stream.fill_gaussian(&mut eta);
        em_step_in_place(&mut x, &q, params, &eta)?;
        if dist(&x, xbar) <= p {
            return Ok(Some(step));
        }
    }
    Ok(None)
}

/// Monte Carlo estimate of the expected first hitting time of the ball of
/// radius `p` around `xbar`, with a normal-approximation 95% interval.
/// Replica `i` uses the stream keyed by `(seed, i)`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_hitting_time(
    field: &dyn DriftField,
    x0: &[f64],
    xbar: &[f64],
    p: f64,
    params: StepParams,
    replicas: usize,
    max_steps: u64,
    seed: u64,
) -> Result<HittingTimeEstimate> {
    if !(p > 0.0) || replicas == 0 {
        return Err(Error::invalid("hitting time needs p > 0 and at least one replica"));
    }
    if x0.len() != field.dim() || xbar.len() != field.dim() {
        return Err(Error::invalid("x0 and xbar must match the field dimension"));
    }
    let outcomes: Vec<Option<u64>> = (0..replicas)
        .into_par_iter()
        .map(|i| {
            let mut stream = RngStream::keyed(seed, &[HITTING_TAG, i as u64]);
            first_hit(field, x0, xbar, p, params, max_steps, &mut stream)
        })
        .collect::<Result<_>>()?;

    let hits = outcomes.iter().filter(|o| o.is_some()).count();
    let times: Vec<f64> = outcomes
        .iter()
        .map(|o| o.unwrap_or(max_steps) as f64 * params.sigma())
        .collect();
    let r = replicas as f64;
    let mean = times.iter().sum::<f64>() / r;
    let half = if replicas > 1 {
        let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (r - 1.0);
        1.96 * (var / r).sqrt()
    } else {
        0.0
    };
    Ok(HittingTimeEstimate {
        mean,
        ci_low: mean - half,
        ci_high: mean + half,
        hit_fraction: hits as f64 / r,
        replicas,
    })
}

/// Time average of `phi` over the states after steps `burn_in + 1 ..= horizon`
/// of one simulated path.
pub fn ergodic_average(
    field: &dyn DriftField,
    x0: &[f64],
    params: StepParams,
    horizon_steps: u64,
    burn_in_steps: u64,
    phi: &dyn Fn(&[f64]) -> f64,
    seed: u64,
) -> Result<f64> {
    if horizon_steps <= burn_in_steps {
        return Err(Error::invalid("horizon must exceed burn-in"));
    }
    let n = x0.len();
    let mut stream = RngStream::keyed(seed, &[PATH_TAG]);
    let mut x = x0.to_vec();
    let mut q = vec![0.0; n];
    let mut eta = vec![0.0; n];
    let mut total = 0.0;
    for step in 1..=horizon_steps {
        field.drift_into(&x, &mut q);
        stream.fill_gaussian(&mut eta);
        em_step_in_place(&mut x, &q, params, &eta)?;
        if step > burn_in_steps {
            total += phi(&x);
        }
    }
    Ok(total / (horizon_steps - burn_in_steps) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSummary {
    pub steps: u64,
    pub max_norm: f64,
    pub final_norm: f64,
}

/// Simulates one path and tracks the largest `||X_t||`. Overflow is an error.
pub fn simulate_path_extent(
    field: &dyn DriftField,
    x0: &[f64],
    params: StepParams,
    steps: u64,
    seed: u64,
) -> Result<PathSummary> {
    let n = x0.len();
    let mut stream = RngStream::keyed(seed, &[PATH_TAG]);
    let mut x = x0.to_vec();
    let mut q = vec![0.0; n];
    let mut eta = vec![0.0; n];
    let mut max_sq = dot(&x, &x);
    for step in 1..=steps {
        field.drift_into(&x, &mut q);
        stream.fill_gaussian(&mut eta);
        em_step_in_place(&mut x, &q, params, &eta).map_err(|_| {
            Error::overflow(format!("path left the finite range at step {step}"))
        })?;
        max_sq = max_sq.max(dot(&x, &x));
    }
    Ok(PathSummary {
        steps,
        max_norm: max_sq.sqrt(),
        final_norm: norm(&x),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ou(beta: f64, dim: usize) -> LinearField {
        LinearField::new(beta, dim)
    }

    #[test]
    fn ou_field_is_dissipative_and_coercive() {
        let f = ou(0.5, 3);
        let samples = radial_sweep(3, 2.0, 1);
        assert_eq!(samples.len(), 256);
        let a = check_assumption_a(&f, 1.0, 2.0, &samples).unwrap();
        assert_eq!(a.pass_fraction, 1.0);
        assert!(a.worst_violation <= 0.0);
        assert!((a.kappa.unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let b = check_assumption_b(&f, 0.5, 2.0, &samples).unwrap();
        assert_eq!(b.pass_fraction, 1.0);
    }

    #[test]
    fn identity_field_fails_dissipativity() {
        let f = ou(1.0, 2);
        let samples = radial_sweep(2, 1.0, 2);
        let a = check_assumption_a(&f, 1.0, 1.0, &samples).unwrap();
        assert_eq!(a.pass_fraction, 0.0);
        assert!(a.worst_violation > 0.0);
    }

    #[test]
    fn kappa_limit() {
        assert!((kappa(1e-9) - 1.0).abs() < 1e-15);
        assert!(kappa(2.0) < 1.0);
    }

    #[test]
    fn bounded_field_fails_coercivity() {
        let f = RadialUnitField { dim: 2 };
        let samples = radial_sweep(2, 20.0, 3);
        let b = check_assumption_b(&f, 0.1, 20.0, &samples).unwrap();
        assert_eq!(b.pass_fraction, 0.0);
    }

    #[test]
    fn checker_preconditions() {
        let f = ou(0.5, 2);
        let inside = vec![DecisionVector::new(vec![0.1, 0.1]).unwrap()];
        assert!(matches!(check_assumption_a(&f, 1.0, 2.0, &inside), Err(Error::InvalidArgument(_))));
        let outside = radial_sweep(2, 2.0, 0);
        assert!(matches!(check_assumption_b(&f, 0.0, 2.0, &outside), Err(Error::InvalidArgument(_))));
        assert!(check_assumption_a(&f, 0.0, 2.0, &outside).is_err());
        assert!(check_assumption_a(&f, 1.0, 0.5, &outside).is_err());
    }

    #[test]
    fn kappa_bound_follows_from_dissipativity() {
        for beta in [0.3, 0.5, 0.6] {
            let f = ou(beta, 3);
            let samples = radial_sweep(3, 2.0, 7);
            let theta0 = 1.0;
            let a = check_assumption_a(&f, theta0, 2.0, &samples).unwrap();
            if a.pass_fraction == 1.0 {
                for x in &samples {
                    let q = norm(&f.drift(x));
                    if q >= 1.0 {
                        assert!(q <= kappa(theta0) * x.norm() + 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn growth_estimates() {
        let f = ou(0.5, 2);
        let near = estimate_growth(&f, &radial_sweep(2, 1.0, 0), 0.15, 2).unwrap();
        let far = estimate_growth(&f, &radial_sweep(2, 1_000.0, 0), 0.15, 2).unwrap();
        assert!(near.l_hat < far.l_hat);
        assert!(far.l_hat < 0.5 && far.l_hat > 0.4999);
        assert!((far.c1_hat - 3.0 * far.l_hat).abs() < 1e-15);

        let zero = estimate_growth(&ou(0.0, 2), &radial_sweep(2, 1.0, 0), 0.15, 2).unwrap();
        assert_eq!(zero.l_hat, 0.0);
        assert!((zero.c2_hat - 0.045).abs() < 1e-15);

        let bounded = estimate_growth(&RadialUnitField { dim: 2 }, &radial_sweep(2, 1.0, 0), 0.1, 2).unwrap();
        assert!(bounded.l_hat <= 1.0);
    }

    #[test]
    fn generator_values() {
        let f = ou(0.5, 2);
        // ||x||^2 = 4
        assert!((generator_v(&f, &[2.0, 0.0], 0.15) - (-3.955)).abs() < 1e-12);
        assert!((generator_v(&f, &[0.0, 0.0], 0.15) - 0.045).abs() < 1e-15);
        let rot = FnField {
            dim: 2,
            name: "rotation".into(),
            f: |x: &[f64], out: &mut [f64]| {
                out[0] = -x[1];
                out[1] = x[0];
            },
        };
        assert!((generator_v(&rot, &[1.3, -0.4], 0.15) - 0.045).abs() < 1e-15);

        let xbar = [1.0, -1.0, 0.5];
        let g = LinearField::centered(0.5, xbar.to_vec());
        assert!((generator_w(&g, &xbar, &xbar, 0.15) - 0.033_75).abs() < 1e-15);
        // ||x - xbar||^2 = 9
        let x = [3.0, 1.0, -0.5];
        assert!((generator_w(&g, &x, &xbar, 0.15) - (-4.466_25)).abs() < 1e-12);
        assert!((generator_w(&ou(0.0, 3), &x, &xbar, 0.15) - 0.033_75).abs() < 1e-15);
    }

    #[test]
    fn generator_is_affine_in_the_field() {
        let a = ou(0.5, 3);
        let b = RadialUnitField { dim: 3 };
        let sum = FnField {
            dim: 3,
            name: "sum".into(),
            f: |x: &[f64], out: &mut [f64]| {
                let (qa, qb) = (ou(0.5, 3).drift(x), RadialUnitField { dim: 3 }.drift(x));
                for i in 0..3 {
                    out[i] = qa[i] + qb[i];
                }
            },
        };
        let eps = 0.15;
        let c = eps * eps * 3.0;
        for x in radial_sweep(3, 1.5, 4) {
            let lhs = generator_v(&sum, &x, eps) - c;
            let rhs = (generator_v(&a, &x, eps) - c) + (generator_v(&b, &x, eps) - c);
            assert!((lhs - rhs).abs() < 1e-9);
        }
    }

    #[test]
    fn drift_condition_helper() {
        let f = ou(0.5, 2);
        let samples = radial_sweep(2, 1.0, 5);
        let ok = check_drift_condition(&f, &[0.0, 0.0], 0.15, 0.1, 1.0, &samples);
        assert_eq!(ok.pass_fraction, 1.0);
        let zero = check_drift_condition(&ou(0.0, 2), &[0.0, 0.0], 0.15, 0.1, 1.0, &samples);
        assert_eq!(zero.pass_fraction, 0.0);
    }

    #[test]
    fn hitting_time_immediate() {
        let f = ou(0.5, 2);
        let p = StepParams::new(0.01, 0.15).unwrap();
        let h = estimate_hitting_time(&f, &[0.5, 0.0], &[0.0, 0.0], 1.0, p, 20, 100, 1).unwrap();
        assert_eq!(h.mean, 0.0);
        assert_eq!(h.hit_fraction, 1.0);
        let h = estimate_hitting_time(&f, &[3.0, 0.0], &[0.0, 0.0], 10.0, p, 5, 100, 1).unwrap();
        assert_eq!(h.mean, 0.0);
    }

    #[test]
    fn hitting_time_censoring() {
        // A zero field with tiny noise cannot cross 4 units in 10 steps.
        let p = StepParams::new(0.01, 0.01).unwrap();
        let h = estimate_hitting_time(&ou(0.0, 2), &[5.0, 0.0], &[0.0, 0.0], 1.0, p, 10, 10, 1).unwrap();
        assert_eq!(h.hit_fraction, 0.0);
        assert!((h.mean - 0.1).abs() < 1e-12);
    }

    #[test]
    fn hitting_time_ci_shrinks_with_replicas() {
        let f = ou(0.5, 2);
        let p = StepParams::new(0.01, 0.5).unwrap();
        let small = estimate_hitting_time(&f, &[3.0, 0.0], &[0.0, 0.0], 1.0, p, 2_000, 1_000_000, 11).unwrap();
        let large = estimate_hitting_time(&f, &[3.0, 0.0], &[0.0, 0.0], 1.0, p, 4_000, 1_000_000, 12).unwrap();
        let ratio = (large.ci_high - large.ci_low) / (small.ci_high - small.ci_low);
        assert!((ratio / std::f64::consts::FRAC_1_SQRT_2 - 1.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn hitting_time_is_schedule_independent() {
        let f = ou(0.5, 2);
        let p = StepParams::new(0.01, 0.15).unwrap();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let a = one.install(|| estimate_hitting_time(&f, &[5.0, 0.0], &[0.0, 0.0], 1.0, p, 64, 10_000, 3)).unwrap();
        let b = estimate_hitting_time(&f, &[5.0, 0.0], &[0.0, 0.0], 1.0, p, 64, 10_000, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ergodic_average_basics() {
        let f = ou(0.5, 2);
        let p = StepParams::new(0.01, 0.15).unwrap();
        let one = ergodic_average(&f, &[1.0, 1.0], p, 1_000, 100, &|_| 1.0, 0).unwrap();
        assert_eq!(one, 1.0);
        let bounded = ergodic_average(&f, &[1.0, 1.0], p, 10_000, 100, &|x| x[0].sin(), 0).unwrap();
        assert!((-1.0..=1.0).contains(&bounded));
        assert!(ergodic_average(&f, &[1.0, 1.0], p, 100, 100, &|_| 1.0, 0).is_err());
    }

    #[test]
    fn field_registry() {
        let f = field_from_spec("ou:beta=0.5", 2).unwrap();
        assert_eq!(f.drift(&[2.0, -4.0]), vec![1.0, -2.0]);
        assert_eq!(field_from_spec("identity", 2).unwrap().drift(&[3.0, 1.0]), vec![3.0, 1.0]);
        assert_eq!(field_from_spec("zero", 1).unwrap().drift(&[3.0]), vec![0.0]);
        for bad in ["ou", "ou:beta=", "ou:gamma=1", "identity:x", "spiral"] {
            assert!(matches!(field_from_spec(bad, 2), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn problem_field_matches_descent_direction() {
        use crate::problems::QuadraticFamily;
        let q = QuadraticFamily::new(vec![vec![0.0, 0.0]], vec![0.25], None).unwrap();
        let f = ProblemField { problem: q };
        assert_eq!(f.drift(&[2.0, -1.0]), vec![1.0, -0.5]);
    }
}
