//! Benchmark problems: scalable DTLZ2 and a convex quadratic family with a
//! known Pareto set.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::descent::Jacobian;
use crate::error::{Error, Result};
use crate::model::{BoxBounds, ObjectiveVector, Problem};
use crate::rng::RngStream;

/// Default number of distance variables for DTLZ2 (`n = m + k - 1`).
pub const DTLZ2_DEFAULT_K: usize = 10;

/// Slack outside `[0, 1]` that the DTLZ2 problem interface accepts, so that
/// centered finite differences can straddle the box faces. The objective
/// formula is smooth across the faces.
pub const DTLZ2_FD_SLACK: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct Dtlz2 {
    m: usize,
    k: usize,
    bounds: BoxBounds,
}

impl Dtlz2 {
    pub fn new(m: usize, k: usize) -> Result<Self> {
        if m < 2 || k < 1 {
            return Err(Error::invalid(format!("DTLZ2 needs m >= 2 and k >= 1, got m={m}, k={k}")));
        }
        let n = m + k - 1;
        Ok(Self {
            m,
            k,
            bounds: BoxBounds::uniform(n, 0.0, 1.0)?,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.m + self.k - 1
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n() {
            return Err(Error::invalid(format!(
                "DTLZ2(m={}, k={}) expects {} variables, got {}",
                self.m,
                self.k,
                self.n(),
                x.len()
            )));
        }
        Ok(())
    }

    fn check_box(&self, x: &[f64], slack: f64) -> Result<()> {
        self.check_dim(x)?;
        if let Some(i) = x
            .iter()
            .position(|v| !(v.is_finite() && *v >= -slack && *v <= 1.0 + slack))
        {
            return Err(Error::invalid(format!(
                "DTLZ2 variable {i} = {} lies outside [0, 1]",
                x[i]
            )));
        }
        Ok(())
    }

    fn g(&self, x: &[f64]) -> f64 {
        x[self.m - 1..].iter().map(|v| (v - 0.5).powi(2)).sum()
    }

    /// The objective formula without box validation.
    fn objectives(&self, x: &[f64]) -> Vec<f64> {
        let m = self.m;
        let radius = 1.0 + self.g(x);
        (0..m)
            .map(|j| {
                // Objective j uses cos of the first m-1-j angles and, for j > 0,
                // sin of angle m-1-j.
                let cos_count = m - 1 - j;
                let mut v = radius;
                for xi in &x[..cos_count] {
                    v *= (xi * FRAC_PI_2).cos();
                }
                if j > 0 {
                    v *= (x[cos_count] * FRAC_PI_2).sin();
                }
                v
            })
            .collect()
    }

    fn jacobian(&self, x: &[f64]) -> Jacobian {
        let (m, n) = (self.m, self.n());
        let radius = 1.0 + self.g(x);
        let cos: Vec<f64> = x[..m - 1].iter().map(|v| (v * FRAC_PI_2).cos()).collect();
        let sin: Vec<f64> = x[..m - 1].iter().map(|v| (v * FRAC_PI_2).sin()).collect();
        let mut jac = Jacobian::zeros(m, n);
        for j in 0..m {
            let cos_count = m - 1 - j;
            let angular = |skip: Option<usize>| -> f64 {
                let mut v = 1.0;
                for (i, c) in cos[..cos_count].iter().enumerate() {
                    if Some(i) != skip {
                        v *= c;
                    }
                }
                v
            };
            let sin_term = if j > 0 { sin[cos_count] } else { 1.0 };
            let shape = angular(None) * sin_term;

            for i in 0..cos_count {
                let d = -FRAC_PI_2 * sin[i] * angular(Some(i)) * sin_term;
                jac.set(j, i, radius * d);
            }
            if j > 0 {
                jac.set(j, cos_count, radius * angular(None) * FRAC_PI_2 * cos[cos_count]);
            }
            for d in m - 1..n {
                jac.set(j, d, shape * 2.0 * (x[d] - 0.5));
            }
        }
        jac
    }
}

/// DTLZ2 objectives at `x`, which must lie in `[0, 1]^n`.
pub fn dtlz2_evaluate(spec: &Dtlz2, x: &[f64]) -> Result<ObjectiveVector> {
    spec.check_box(x, 0.0)?;
    Ok(ObjectiveVector::from_values(spec.objectives(x)))
}

impl Problem for Dtlz2 {
    fn name(&self) -> String {
        format!("dtlz2(m={},k={})", self.m, self.k)
    }

    fn n_var(&self) -> usize {
        self.n()
    }

    fn n_obj(&self) -> usize {
        self.m
    }

    fn bounds(&self) -> &BoxBounds {
        &self.bounds
    }

    fn evaluate(&self, x: &[f64]) -> Result<ObjectiveVector> {
        self.check_box(x, DTLZ2_FD_SLACK)?;
        Ok(ObjectiveVector::from_values(self.objectives(x)))
    }

    fn analytic_jacobian(&self, x: &[f64]) -> Option<Jacobian> {
        self.check_dim(x).ok()?;
        Some(self.jacobian(x))
    }
}

/// `count` points uniform on the non-negative orthant of the unit sphere in
/// `R^m`: the DTLZ2 Pareto front.
pub fn dtlz2_reference_front(m: usize, count: usize, seed: u64) -> Result<Vec<ObjectiveVector>> {
    if m < 1 || count < m {
        return Err(Error::invalid(format!(
            "reference front needs count >= m, got m={m}, count={count}"
        )));
    }
    let mut stream = RngStream::keyed(seed, &[0x7265_6600, m as u64]);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut p = stream.gaussian_draw(m);
        let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-12 {
            continue;
        }
        for v in &mut p {
            *v = v.abs() / norm;
        }
        out.push(ObjectiveVector::from_values(p));
    }
    Ok(out)
}

/// Reference front size used for DTLZ2 when none is configured.
pub fn default_reference_front_size(m: usize) -> usize {
    if m <= 5 {
        1_000
    } else {
        5_000
    }
}

/// `f_i(x) = c_i ||x - a_i||^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticFamily {
    centers: Vec<Vec<f64>>,
    scales: Vec<f64>,
    bounds: BoxBounds,
}

impl QuadraticFamily {
    /// Bounds default to `[-10, 10]^n`.
    pub fn new(centers: Vec<Vec<f64>>, scales: Vec<f64>, bounds: Option<BoxBounds>) -> Result<Self> {
        let n = centers.first().map_or(0, Vec::len);
        if centers.is_empty() || n == 0 {
            return Err(Error::invalid("quadratic family needs at least one non-empty center"));
        }
        if centers.iter().any(|c| c.len() != n || c.iter().any(|v| !v.is_finite())) {
            return Err(Error::invalid("quadratic centers must be finite and of equal length"));
        }
        if scales.len() != centers.len() || scales.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
            return Err(Error::invalid("quadratic scales must be positive, one per center"));
        }
        let bounds = match bounds {
            Some(b) if b.dim() != n => {
                return Err(Error::invalid("bounds dimension does not match centers"))
            }
            Some(b) => b,
            None => BoxBounds::uniform(n, -10.0, 10.0)?,
        };
        Ok(Self {
            centers,
            scales,
            bounds,
        })
    }

    /// Two objectives with centers `+e_1` and `-e_1` and equal scale `c`.
    pub fn symmetric_pair(n: usize, c: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        let mut a = vec![0.0; n];
        a[0] = 1.0;
        let b: Vec<f64> = a.iter().map(|v| -v).collect();
        Self::new(vec![a, b], vec![c, c], Some(BoxBounds::uniform(n, -5.0, 5.0)?))
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_var() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "quadratic family expects {} finite variables",
                self.n_var()
            )));
        }
        Ok(())
    }

    /// Exact gradients `2 c_i (x - a_i)`.
    pub fn quadratic_jacobian(&self, x: &[f64]) -> Result<Jacobian> {
        self.check(x)?;
        let rows = self
            .centers
            .iter()
            .zip(&self.scales)
            .map(|(a, c)| x.iter().zip(a).map(|(xi, ai)| 2.0 * c * (xi - ai)).collect())
            .collect();
        Jacobian::from_rows(rows)
    }

    pub fn quadratic_evaluate(&self, x: &[f64]) -> Result<ObjectiveVector> {
        self.check(x)?;
        let f = self
            .centers
            .iter()
            .zip(&self.scales)
            .map(|(a, c)| c * x.iter().zip(a).map(|(xi, ai)| (xi - ai).powi(2)).sum::<f64>())
            .collect();
        ObjectiveVector::new(f).map_err(|e| Error::Evaluation(e.to_string()))
    }

    /// Image of the segment between the first two centers, for the equal-scale
    /// two-objective case where that segment is the Pareto set.
    pub fn segment_front(&self, count: usize) -> Result<Vec<ObjectiveVector>> {
        if self.centers.len() != 2 || self.scales[0] != self.scales[1] || count < 2 {
            return Err(Error::invalid(
                "segment front needs two equal-scale objectives and count >= 2",
            ));
        }
        (0..count)
            .map(|i| {
                let t = i as f64 / (count - 1) as f64;
                let x: Vec<f64> = self.centers[0]
                    .iter()
                    .zip(&self.centers[1])
                    .map(|(a, b)| a + t * (b - a))
                    .collect();
                self.quadratic_evaluate(&x)
            })
            .collect()
    }
}

impl Problem for QuadraticFamily {
    fn name(&self) -> String {
        format!("quadratic(m={},n={})", self.centers.len(), self.n_var())
    }

    fn n_var(&self) -> usize {
        self.centers[0].len()
    }

    fn n_obj(&self) -> usize {
        self.centers.len()
    }

    fn bounds(&self) -> &BoxBounds {
        &self.bounds
    }

    fn evaluate(&self, x: &[f64]) -> Result<ObjectiveVector> {
        self.quadratic_evaluate(x)
    }

    fn analytic_jacobian(&self, x: &[f64]) -> Option<Jacobian> {
        self.quadratic_jacobian(x).ok()
    }
}

/// Named problem instances available to the experiment runner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum ProblemConfig {
    Dtlz2 {
        #[serde(default = "default_m")]
        m: usize,
        #[serde(default = "default_k")]
        k: usize,
    },
    Quad2 {
        #[serde(default = "default_quad_n")]
        n: usize,
    },
}

fn default_m() -> usize {
    3
}

fn default_k() -> usize {
    DTLZ2_DEFAULT_K
}

fn default_quad_n() -> usize {
    2
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig::Dtlz2 {
            m: default_m(),
            k: default_k(),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Benchmark {
    Dtlz2(Dtlz2),
    Quad2(QuadraticFamily),
}

impl ProblemConfig {
    /// Registry lookup by name. `m` applies to DTLZ2; `size` is `k` for DTLZ2
    /// and `n` for quad2.
    pub fn from_name(name: &str, m: Option<usize>, size: Option<usize>) -> Result<Self> {
        match name {
            "dtlz2" => Ok(ProblemConfig::Dtlz2 {
                m: m.unwrap_or_else(default_m),
                k: size.unwrap_or_else(default_k),
            }),
            "quad2" => Ok(ProblemConfig::Quad2 {
                n: size.unwrap_or_else(default_quad_n),
            }),
            other => Err(Error::Config(format!(
                "unknown problem '{other}' (known: dtlz2, quad2)"
            ))),
        }
    }

    pub fn build(&self) -> Result<Benchmark> {
        let built = match *self {
            ProblemConfig::Dtlz2 { m, k } => Dtlz2::new(m, k).map(Benchmark::Dtlz2),
            ProblemConfig::Quad2 { n } => QuadraticFamily::symmetric_pair(n, 1.0).map(Benchmark::Quad2),
        };
        built.map_err(|e| Error::Config(e.to_string()))
    }
}

impl Benchmark {
    pub fn problem(&self) -> &dyn Problem {
        match self {
            Benchmark::Dtlz2(p) => p,
            Benchmark::Quad2(p) => p,
        }
    }

    pub fn default_front_size(&self) -> usize {
        match self {
            Benchmark::Dtlz2(p) => default_reference_front_size(p.m()),
            Benchmark::Quad2(_) => 1_000,
        }
    }

    pub fn reference_front(&self, count: usize, seed: u64) -> Result<Vec<ObjectiveVector>> {
        match self {
            Benchmark::Dtlz2(p) => dtlz2_reference_front(p.m(), count, seed),
            Benchmark::Quad2(p) => p.segment_front(count),
        }
    }
}
