//! One-step conditional expectations: Euler-Maruyama proposals pushed through
//! a tensor Gauss-Hermite rule and evaluated on an interpolated field.

use crate::error::{Error, Result};
use crate::meshfree::VectorField;
use crate::pointcloud::DomainBox;
use crate::quadrature::{GaussHermiteRule, TensorRule};

/// State dynamics `dX = b(X,u) dt + sigma(X,u) dW`.
///
/// `diffusion` writes a `d x m` row-major matrix (`out[i*m + k]`).
pub trait Dynamics: Sync {
    fn state_dim(&self) -> usize;
    fn noise_dim(&self) -> usize;
    fn drift(&self, x: &[f64], u: &[f64], out: &mut [f64]);
    fn diffusion(&self, x: &[f64], u: &[f64], out: &mut [f64]);
}

/// Dynamics from a pair of closures.
pub struct FnDynamics<B, S> {
    d: usize,
    m: usize,
    drift: B,
    diffusion: S,
}

impl<B, S> FnDynamics<B, S>
where
    B: Fn(&[f64], &[f64], &mut [f64]) + Sync,
    S: Fn(&[f64], &[f64], &mut [f64]) + Sync,
{
    pub fn new(d: usize, m: usize, drift: B, diffusion: S) -> Self {
        Self { d, m, drift, diffusion }
    }
}

impl<B, S> Dynamics for FnDynamics<B, S>
where
    B: Fn(&[f64], &[f64], &mut [f64]) + Sync,
    S: Fn(&[f64], &[f64], &mut [f64]) + Sync,
{
    fn state_dim(&self) -> usize {
        self.d
    }

    fn noise_dim(&self) -> usize {
        self.m
    }

    fn drift(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        (self.drift)(x, u, out)
    }

    fn diffusion(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        (self.diffusion)(x, u, out)
    }
}

/// Dynamics frozen at one control value and step size.
#[derive(Clone, Copy)]
pub struct OneStepModel<'a> {
    dynamics: &'a dyn Dynamics,
    u: &'a [f64],
    dt: f64,
}

impl<'a> OneStepModel<'a> {
    pub fn new(dynamics: &'a dyn Dynamics, u: &'a [f64], dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        Ok(Self { dynamics, u, dt })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn control(&self) -> &[f64] {
        self.u
    }

    pub fn state_dim(&self) -> usize {
        self.dynamics.state_dim()
    }

    pub fn noise_dim(&self) -> usize {
        self.dynamics.noise_dim()
    }

    /// Drift and scaled diffusion at `x`, ready for many proposals.
    pub fn freeze(&self, x: &[f64]) -> Result<FrozenStep> {
        let d = self.state_dim();
        let m = self.noise_dim();
        if x.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: x.len() });
        }
        let mut mean = vec![0.0; d];
        self.dynamics.drift(x, self.u, &mut mean);
        for (mi, xi) in mean.iter_mut().zip(x) {
            *mi = xi + *mi * self.dt;
        }
        let mut vol = vec![0.0; d * m];
        self.dynamics.diffusion(x, self.u, &mut vol);
        let sq = self.dt.sqrt();
        vol.iter_mut().for_each(|v| *v *= sq);
        Ok(FrozenStep { d, m, mean, vol })
    }
}

/// `x + b dt` and `sigma sqrt(dt)` at a fixed starting point.
#[derive(Debug, Clone)]
pub struct FrozenStep {
    d: usize,
    m: usize,
    mean: Vec<f64>,
    vol: Vec<f64>,
}

impl FrozenStep {
    /// Writes `x + b dt + sigma sqrt(dt) xi` into `out`; false if non-finite.
    pub fn propose(&self, xi: &[f64], out: &mut [f64]) -> bool {
        let mut finite = true;
        for i in 0..self.d {
            let row = &self.vol[i * self.m..(i + 1) * self.m];
            let v = self.mean[i] + row.iter().zip(xi).map(|(s, z)| s * z).sum::<f64>();
            finite &= v.is_finite();
            out[i] = v;
        }
        finite
    }
}

fn overflow_at(x: &[f64], what: &str) -> Error {
    Error::NumericOverflow {
        context: format!("{what} from node {x:?}"),
    }
}

/// One Euler-Maruyama step `x + b(x,u) dt + sigma(x,u) sqrt(dt) xi`.
pub fn euler_step(model: &OneStepModel, x: &[f64], xi: &[f64]) -> Result<Vec<f64>> {
    if xi.len() != model.noise_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.noise_dim(),
            got: xi.len(),
        });
    }
    let step = model.freeze(x)?;
    let mut out = vec![0.0; model.state_dim()];
    if !step.propose(xi, &mut out) {
        return Err(overflow_at(x, "Euler step"));
    }
    Ok(out)
}

/// Tensor quadrature over the noise increments of one step, reusable across
/// many query points.
#[derive(Debug, Clone)]
pub struct StepExpectation {
    tensor: TensorRule,
}

/// Result of one combined conditional-expectation pass.
#[derive(Debug, Clone, PartialEq)]
pub struct CondExpValue {
    /// `E[field(x~)]`, one entry per component.
    pub mean: Vec<f64>,
    /// `E[field_c(x~) sqrt(dt) xi_k]` at `[c*m + k]`.
    pub dw: Vec<f64>,
    /// Number of quadrature proposals that left the domain box.
    pub out_of_domain: usize,
}

impl StepExpectation {
    pub fn new(rule: &GaussHermiteRule, noise_dim: usize) -> Result<Self> {
        Ok(Self {
            tensor: TensorRule::new(rule, noise_dim)?,
        })
    }

    pub fn nodes(&self) -> usize {
        self.tensor.len()
    }

    /// Computes both `E[field]` and `E[field sqrt(dt) xi]` at `x`; when
    /// `with_dw` is false the `dw` part is left empty.
    pub fn eval(
        &self,
        field: &dyn VectorField,
        model: &OneStepModel,
        x: &[f64],
        domain: Option<&DomainBox>,
        with_dw: bool,
    ) -> Result<CondExpValue> {
        let d = model.state_dim();
        let m = model.noise_dim();
        if self.tensor.dim() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: self.tensor.dim(),
            });
        }
        let k = field.components();
        let step = model.freeze(x)?;
        let sq = model.dt().sqrt();
        let mut mean = vec![0.0; k];
        let mut dw = if with_dw { vec![0.0; k * m] } else { Vec::new() };
        let mut proposal = vec![0.0; d];
        let mut value = vec![0.0; k];
        let mut out_of_domain = 0;
        for (xi, w) in self.tensor.iter() {
            if !step.propose(xi, &mut proposal) {
                return Err(overflow_at(x, "Euler proposal"));
            }
            if let Some(b) = domain {
                if !b.contains(&proposal) {
                    out_of_domain += 1;
                }
            }
            field.eval(&proposal, &mut value);
            for c in 0..k {
                let v = w * value[c];
                mean[c] += v;
                if with_dw {
                    for j in 0..m {
                        dw[c * m + j] += v * sq * xi[j];
                    }
                }
            }
        }
        if mean.iter().chain(&dw).any(|v| !v.is_finite()) {
            return Err(overflow_at(x, "conditional expectation"));
        }
        Ok(CondExpValue {
            mean,
            dw,
            out_of_domain,
        })
    }
}

/// `E^x[field(x~)]` componentwise.
pub fn cond_exp(
    field: &dyn VectorField,
    model: &OneStepModel,
    x: &[f64],
    rule: &GaussHermiteRule,
) -> Result<Vec<f64>> {
    let se = StepExpectation::new(rule, model.noise_dim())?;
    Ok(se.eval(field, model, x, None, false)?.mean)
}

/// `E^x[field_i(x~) sqrt(dt) xi_k]` as a `components x m` row-major matrix.
pub fn cond_exp_dw(
    field: &dyn VectorField,
    model: &OneStepModel,
    x: &[f64],
    rule: &GaussHermiteRule,
) -> Result<Vec<f64>> {
    let se = StepExpectation::new(rule, model.noise_dim())?;
    Ok(se.eval(field, model, x, None, true)?.dw)
}
