use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Result, Tape, Tensor, TensorError, Var};

/// Gradients below this magnitude are compared in absolute terms.
///
/// Central differences of an `f32` loss carry rounding noise of order
/// `ulp(loss) / ε`, roughly 1e-4 for an O(1) loss at ε = 1e-3, so a pure
/// ratio is meaningless for tiny gradients.
pub const RELATIVE_ERROR_FLOOR: f32 = 1.0;

/// `|a − n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f32, numeric: f32) -> f32 {
    let scale = analytic.abs().max(numeric.abs()).max(RELATIVE_ERROR_FLOOR);
    (analytic - numeric).abs() / scale
}

#[derive(Clone, Debug)]
pub struct GradCheckOptions {
    pub eps: f32,
    /// Check at most this many randomly chosen elements per input.
    pub max_elements: Option<usize>,
    pub seed: u64,
    /// Skip elements whose one-sided differences disagree by more than
    /// this relative error: the function has a kink within `±eps` there,
    /// so the central difference says nothing about the derivative at `x`.
    pub kink_tolerance: Option<f32>,
}

impl GradCheckOptions {
    pub fn new(eps: f32) -> Self {
        GradCheckOptions {
            eps,
            max_elements: None,
            seed: 0,
            kink_tolerance: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_error: f32,
    /// Tape gradient of each input (zeros for frozen ones).
    pub analytic: Vec<Tensor>,
    pub checked: usize,
    /// Elements skipped for straddling a kink.
    pub skipped: usize,
}

/// Largest relative error between tape gradients of the scalar `f` and
/// central differences `(f(x+ε) − f(x−ε)) / 2ε`, over every input element.
pub fn grad_check<F>(f: F, inputs: &[Tensor], eps: f32) -> Result<f32>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let trainable = vec![true; inputs.len()];
    Ok(grad_check_with(f, inputs, &trainable, &GradCheckOptions::new(eps))?.max_rel_error)
}

/// As [`grad_check`], with frozen inputs and optional element sampling.
/// Frozen inputs enter the tape with `requires_grad = false` and are not
/// perturbed.
pub fn grad_check_with<F>(
    f: F,
    inputs: &[Tensor],
    trainable: &[bool],
    opts: &GradCheckOptions,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    if opts.eps.is_nan() || opts.eps <= 0.0 || trainable.len() != inputs.len() {
        return Err(TensorError::Contract(
            "grad_check: bad epsilon or trainable mask".into(),
        ));
    }
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs
        .iter()
        .zip(trainable)
        .map(|(t, &rg)| tape.leaf(t.clone(), rg))
        .collect();
    let loss = f(&mut tape, &vars)?;
    tape.backward(loss)?;
    let analytic: Vec<Tensor> = vars.iter().map(|&v| tape.grad(v)).collect();

    let eval = |values: &[Tensor]| -> Result<f32> {
        let mut t = Tape::new();
        let vs: Vec<Var> = values.iter().map(|v| t.constant(v.clone())).collect();
        let out = f(&mut t, &vs)?;
        Ok(t.value(out).item())
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut work = inputs.to_vec();
    let mut worst = 0.0f32;
    let mut checked = 0;
    let mut skipped = 0;
    let base = if opts.kink_tolerance.is_some() {
        eval(inputs)?
    } else {
        0.0
    };
    for (k, input) in inputs.iter().enumerate() {
        if !trainable[k] {
            continue;
        }
        let n = input.numel();
        let indices: Vec<usize> = match opts.max_elements {
            Some(m) if m < n => rand::seq::index::sample(&mut rng, n, m).into_vec(),
            _ => (0..n).collect(),
        };
        for i in indices {
            let orig = input.data()[i];
            work[k].data_mut()[i] = orig + opts.eps;
            let plus = eval(&work)?;
            work[k].data_mut()[i] = orig - opts.eps;
            let minus = eval(&work)?;
            work[k].data_mut()[i] = orig;
            if let Some(tol) = opts.kink_tolerance {
                if relative_error((plus - base) / opts.eps, (base - minus) / opts.eps) > tol {
                    skipped += 1;
                    continue;
                }
            }
            let numeric = (plus - minus) / (2.0 * opts.eps);
            worst = worst.max(relative_error(analytic[k].data()[i], numeric));
            checked += 1;
        }
    }
    Ok(GradCheckReport {
        max_rel_error: worst,
        analytic,
        checked,
        skipped,
    })
}
