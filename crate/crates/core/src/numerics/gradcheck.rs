//! Central finite-difference gradient checking.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::graph::{Graph, Var};
use super::tensor::{ParamStore, Tensor};
use crate::error::Result;

/// Relative error of the analytic gradient for each checked input:
/// `‖analytic − numeric‖₂ / max(‖analytic‖₂, ‖numeric‖₂)`.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    /// What each error refers to: `input {i}` or a parameter name.
    pub labels: Vec<String>,
    pub relative_errors: Vec<f64>,
}

impl GradCheckReport {
    pub fn max_relative_error(&self) -> f64 {
        self.relative_errors.iter().cloned().fold(0.0, f64::max)
    }

    /// Label and error of the worst entry.
    pub fn worst(&self) -> Option<(&str, f64)> {
        self.labels
            .iter()
            .zip(&self.relative_errors)
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(l, e)| (l.as_str(), *e))
    }
}

fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).powi(2))
        .sum::<f64>()
        .sqrt();
    let na = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nn = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
    let denom = na.max(nn);
    if denom < 1e-12 {
        diff
    } else {
        diff / denom
    }
}

/// Projects a non-scalar output onto fixed random weights so every output
/// element contributes to the checked scalar.
fn scalarize(g: &mut Graph, out: Var) -> Result<Var> {
    if g.value(out).numel() == 1 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let w = Tensor::rand_uniform(g.shape(out), -1.0, 1.0, &mut rng);
    let w = g.constant(w)?;
    let p = g.mul(out, w)?;
    g.sum(p)
}

fn evaluate<F>(build: &F, inputs: &[Tensor]) -> Result<f64>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let mut g = Graph::new();
    let vars = inputs
        .iter()
        .map(|t| g.input(t.clone()))
        .collect::<Result<Vec<_>>>()?;
    let out = build(&mut g, &vars)?;
    let loss = scalarize(&mut g, out)?;
    Ok(g.value(loss).item())
}

/// Compares the backward pass of `build` against central differences with
/// step `eps` for every element of every input in `check`.
pub fn check_gradients<F>(
    build: F,
    inputs: &[Tensor],
    check: &[usize],
    eps: f64,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let mut g = Graph::new();
    let vars = inputs
        .iter()
        .map(|t| g.input(t.clone()))
        .collect::<Result<Vec<_>>>()?;
    let out = build(&mut g, &vars)?;
    let loss = scalarize(&mut g, out)?;
    g.backward(loss)?;

    let mut relative_errors = Vec::with_capacity(check.len());
    for &idx in check {
        let analytic = g
            .grad(vars[idx])
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(inputs[idx].shape()));
        let mut perturbed = inputs.to_vec();
        let mut numeric = vec![0.0; inputs[idx].numel()];
        for (e, slot) in numeric.iter_mut().enumerate() {
            let orig = inputs[idx].data()[e];
            perturbed[idx].data_mut()[e] = orig + eps;
            let plus = evaluate(&build, &perturbed)?;
            perturbed[idx].data_mut()[e] = orig - eps;
            let minus = evaluate(&build, &perturbed)?;
            perturbed[idx].data_mut()[e] = orig;
            *slot = (plus - minus) / (2.0 * eps);
        }
        relative_errors.push(relative_error(analytic.data(), &numeric));
    }
    Ok(GradCheckReport {
        labels: check.iter().map(|i| format!("input {i}")).collect(),
        relative_errors,
    })
}

/// Like [`check_gradients`] but for parameters read through
/// [`Graph::param`]: every tensor of `params` named in `names` (all of them
/// when `None`) is perturbed element by element.
pub fn check_param_gradients<F>(
    build: F,
    params: &ParamStore,
    names: Option<&[&str]>,
    eps: f64,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, &ParamStore) -> Result<Var>,
{
    let run = |p: &ParamStore| -> Result<f64> {
        let mut g = Graph::new();
        let out = build(&mut g, p)?;
        let loss = scalarize(&mut g, out)?;
        Ok(g.value(loss).item())
    };
    let mut g = Graph::new();
    let out = build(&mut g, params)?;
    let loss = scalarize(&mut g, out)?;
    g.backward(loss)?;
    let grads = g.param_grads();

    let selected: Vec<String> = match names {
        Some(n) => n.iter().map(|s| s.to_string()).collect(),
        None => params.names().map(str::to_string).collect(),
    };
    let mut perturbed = params.clone();
    let mut relative_errors = Vec::with_capacity(selected.len());
    for name in &selected {
        let base = params.require(name)?.clone();
        let analytic = grads
            .get(name)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(base.shape()));
        let mut numeric = vec![0.0; base.numel()];
        for (e, slot) in numeric.iter_mut().enumerate() {
            let orig = base.data()[e];
            perturbed.get_mut(name).expect("present").data_mut()[e] = orig + eps;
            let plus = run(&perturbed)?;
            perturbed.get_mut(name).expect("present").data_mut()[e] = orig - eps;
            let minus = run(&perturbed)?;
            perturbed.get_mut(name).expect("present").data_mut()[e] = orig;
            *slot = (plus - minus) / (2.0 * eps);
        }
        relative_errors.push(relative_error(analytic.data(), &numeric));
    }
    Ok(GradCheckReport {
        labels: selected,
        relative_errors,
    })
}
