//! Euler-Maruyama discretization of `dX = -q(X) dt + eps dB`, box
//! projection, and the noise-free descent flow.

use serde::{Deserialize, Serialize};

use crate::descent::descent_direction;
use crate::error::{Error, Result};
use crate::model::{BoxBounds, DecisionVector, EvaluationBudget, Problem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepParams {
    sigma: f64,
    eps: f64,
}

impl StepParams {
    pub fn new(sigma: f64, eps: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!("step size must be positive, got {sigma}")));
        }
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::invalid(format!("noise intensity must be non-negative, got {eps}")));
        }
        Ok(Self { sigma, eps })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Coefficient `eps * sqrt(sigma)` multiplying the Gaussian draw.
    pub fn noise_scale(&self) -> f64 {
        self.eps * self.sigma.sqrt()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DecisionVector>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> Option<&DecisionVector> {
        self.states.last()
    }
}

/// `x - sigma * q + eps * sqrt(sigma) * eta`.
pub fn em_step(x: &[f64], q: &[f64], params: StepParams, eta: &[f64]) -> Result<DecisionVector> {
    if q.len() != x.len() || eta.len() != x.len() {
        return Err(Error::invalid(format!(
            "dimension mismatch: x {}, q {}, eta {}",
            x.len(),
            q.len(),
            eta.len()
        )));
    }
    let mut out = x.to_vec();
    em_step_in_place(&mut out, q, params, eta)?;
    Ok(DecisionVector::from_vec_unchecked(out))
}

/// In-place variant of [`em_step`] for long simulations.
pub(crate) fn em_step_in_place(x: &mut [f64], q: &[f64], params: StepParams, eta: &[f64]) -> Result<()> {
    let scale = params.noise_scale();
    for ((xi, qi), ei) in x.iter_mut().zip(q).zip(eta) {
        *xi = *xi - params.sigma * qi + scale * ei;
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::overflow("euler-maruyama step produced a non-finite state"));
    }
    Ok(())
}

/// Componentwise clamp onto `bounds`.
pub fn project_box(x: &[f64], bounds: &BoxBounds) -> DecisionVector {
    let mut out = x.to_vec();
    project_box_in_place(&mut out, bounds);
    DecisionVector::from_vec_unchecked(out)
}

pub(crate) fn project_box_in_place(x: &mut [f64], bounds: &BoxBounds) {
    for ((v, lo), hi) in x.iter_mut().zip(bounds.lower()).zip(bounds.upper()) {
        *v = v.clamp(*lo, *hi);
    }
}

/// Iterates `x <- x - sigma * q(x)` for `steps` steps without noise or
/// projection, recording every state (including `x0`) at times `k * sigma`.
///
/// Uses the analytic Jacobian when the problem has one, centered differences
/// otherwise. Evaluations are not budgeted.
pub fn deterministic_flow<P: Problem + ?Sized>(
    problem: &P,
    x0: &[f64],
    sigma: f64,
    steps: usize,
) -> Result<Trajectory> {
    let params = StepParams::new(sigma, 0.0)?;
    let budget = EvaluationBudget::unlimited();
    let zeros = vec![0.0; x0.len()];
    let mut traj = Trajectory {
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
    };
    traj.times.push(0.0);
    traj.states.push(DecisionVector::new(x0.to_vec())?);

    let mut x = x0.to_vec();
    for k in 1..=steps {
        // A diverging state typically shows up first as a non-finite gradient.
        let d = match descent_direction(problem, &x, None, &budget, true) {
            Ok(d) => d,
            Err(Error::InvalidArgument(msg) | Error::Evaluation(msg)) => {
                return Err(Error::NumericalOverflow {
                    context: format!("{msg} at flow step {k}"),
                    partial: Some(Box::new(traj)),
                });
            }
            Err(e) => return Err(e),
        };
        if let Err(Error::NumericalOverflow { context, .. }) =
            em_step_in_place(&mut x, &d.q, params, &zeros)
        {
            return Err(Error::NumericalOverflow {
                context: format!("{context} at flow step {k}"),
                partial: Some(Box::new(traj)),
            });
        }
        traj.times.push(k as f64 * sigma);
        traj.states.push(DecisionVector::from_vec_unchecked(x.clone()));
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::QuadraticFamily;
    use crate::rng::RngStream;
    use proptest::prelude::*;

    #[test]
    fn step_params_validation() {
        assert!(StepParams::new(0.0, 0.1).is_err());
        assert!(StepParams::new(0.1, -0.1).is_err());
        assert!(StepParams::new(0.1, 0.0).is_ok());
    }

    #[test]
    fn em_step_deterministic_limit() {
        let p = StepParams::new(0.1, 0.0).unwrap();
        let x = em_step(&[1.0, 1.0], &[1.0, 1.0], p, &[3.0, -2.0]).unwrap();
        assert_eq!(x.as_slice(), &[0.9, 0.9]);
    }

    #[test]
    fn em_step_pure_noise_increment() {
        let p = StepParams::new(0.04, 0.15).unwrap();
        let eta = [0.7, -1.3];
        let x = em_step(&[2.0, -1.0], &[0.0, 0.0], p, &eta).unwrap();
        for i in 0..2 {
            let inc = x[i] - [2.0, -1.0][i];
            assert!((inc - 0.15 * 0.2 * eta[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn em_increment_variance() {
        let p = StepParams::new(0.04, 0.15).unwrap();
        let mut s = RngStream::new(11, 0);
        let steps = 100_000;
        let mut sums = [0.0; 2];
        let mut sq = [0.0; 2];
        let mut x = vec![0.0, 0.0];
        for _ in 0..steps {
            let eta = s.gaussian_draw(2);
            let next = em_step(&x, &[0.0, 0.0], p, &eta).unwrap();
            for i in 0..2 {
                let d = next[i] - x[i];
                sums[i] += d;
                sq[i] += d * d;
            }
            x = next.into_inner();
        }
        for i in 0..2 {
            let mean = sums[i] / steps as f64;
            let var = (sq[i] - steps as f64 * mean * mean) / (steps - 1) as f64;
            assert!((var / 9e-4 - 1.0).abs() < 0.02, "var {var}");
        }
    }

    #[test]
    fn em_step_overflow() {
        let p = StepParams::new(1.0, 0.0).unwrap();
        let err = em_step(&[f64::MAX], &[-f64::MAX], p, &[0.0]).unwrap_err();
        assert!(matches!(err, Error::NumericalOverflow { .. }));
    }

    #[test]
    fn project_box_examples() {
        let b = BoxBounds::uniform(2, 0.0, 1.0).unwrap();
        assert_eq!(project_box(&[0.3, 0.7], &b).as_slice(), &[0.3, 0.7]);
        assert_eq!(project_box(&[-1.0, 5.0], &b).as_slice(), &[0.0, 1.0]);
        assert_eq!(project_box(&[0.0, 1.0], &b).as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn flow_from_stationary_point_is_constant() {
        let quad = QuadraticFamily::symmetric_pair(2, 1.0).unwrap();
        let t = deterministic_flow(&quad, &[0.0, 0.0], 0.1, 5).unwrap();
        assert_eq!(t.len(), 6);
        for s in &t.states {
            assert!(s.norm() < 1e-12);
        }
    }

    #[test]
    fn flow_single_quadratic_matches_linear_recursion() {
        // f = ||x||^2 / 2 is c = 0.5 around the origin: gradient x.
        let quad = QuadraticFamily::new(vec![vec![0.0, 0.0]], vec![0.5], None).unwrap();
        let t = deterministic_flow(&quad, &[1.0, 0.0], 0.1, 20).unwrap();
        for (k, s) in t.states.iter().enumerate() {
            assert!((s[0] - 0.9f64.powi(k as i32)).abs() < 1e-12);
            assert_eq!(s[1], 0.0);
            assert!((t.times[k] - 0.1 * k as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn flow_decreases_every_objective_on_convex_pair() {
        // sigma_safe for c = 1: gradients 2(x - a), so sigma <= 0.05 keeps steps short.
        let quad = QuadraticFamily::new(
            vec![vec![1.0, 0.0, 0.5], vec![-1.0, 0.5, 0.0]],
            vec![1.0, 1.0],
            None,
        )
        .unwrap();
        let t = deterministic_flow(&quad, &[2.0, -3.0, 1.5], 0.05, 200).unwrap();
        let fs: Vec<_> = t.states.iter().map(|s| quad.evaluate(s).unwrap()).collect();
        for w in fs.windows(2) {
            for i in 0..2 {
                assert!(w[1][i] <= w[0][i] + 1e-9, "{:?} -> {:?}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn flow_overflow_attaches_partial_trajectory() {
        // Huge step on a steep quadratic diverges geometrically.
        let quad = QuadraticFamily::new(vec![vec![0.0]], vec![1.0], None).unwrap();
        let err = deterministic_flow(&quad, &[1.0], 10.0, 10_000).unwrap_err();
        match err {
            Error::NumericalOverflow { partial: Some(t), .. } => {
                assert!(t.len() > 1);
                assert!(t.last().unwrap()[0].is_finite());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn em_step_with_zero_noise_matches_flow_step(x in prop::collection::vec(-5.0..5.0f64, 3), sigma in 0.001..0.5f64) {
            let quad = QuadraticFamily::new(vec![vec![1.0, 0.0, -1.0], vec![0.0, 2.0, 0.0]], vec![1.0, 0.5], None).unwrap();
            let flow = deterministic_flow(&quad, &x, sigma, 1).unwrap();
            let d = descent_direction(&quad, &x, None, &EvaluationBudget::unlimited(), true).unwrap();
            let step = em_step(&x, &d.q, StepParams::new(sigma, 0.0).unwrap(), &[9.0, 9.0, 9.0]).unwrap();
            prop_assert_eq!(flow.states[1].as_slice(), step.as_slice());
        }

        #[test]
        fn em_step_is_affine_in_noise(
            x in prop::collection::vec(-5.0..5.0f64, 2),
            q in prop::collection::vec(-5.0..5.0f64, 2),
            a in prop::collection::vec(-3.0..3.0f64, 2),
            b in prop::collection::vec(-3.0..3.0f64, 2),
        ) {
            let p = StepParams::new(0.04, 0.15).unwrap();
            let ab: Vec<f64> = a.iter().zip(&b).map(|(u, v)| u + v).collect();
            let lhs = em_step(&x, &q, p, &ab).unwrap();
            let rhs = em_step(&x, &q, p, &a).unwrap();
            for i in 0..2 {
                prop_assert!(((lhs[i] - rhs[i]) - p.noise_scale() * b[i]).abs() < 1e-12);
            }
        }

        #[test]
        fn projection_is_idempotent_and_nonexpansive(
            x in prop::collection::vec(-3.0..3.0f64, 3),
            y in prop::collection::vec(-3.0..3.0f64, 3),
        ) {
            let b = BoxBounds::new(vec![-1.0, 0.0, 0.5], vec![1.0, 2.0, 0.75]).unwrap();
            let px = project_box(&x, &b);
            prop_assert_eq!(&project_box(&px, &b), &px);
            prop_assert!(b.contains(&px));
            let py = project_box(&y, &b);
            let inf = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(s, t)| (s - t).abs()).fold(0.0, f64::max);
            prop_assert!(inf(&px, &py) <= inf(&x, &y) + 1e-15);
        }
    }
}
