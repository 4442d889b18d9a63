use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Gradients, ParamRegistry};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct GradCheckOptions {
    pub eps: f64,
    pub tol: f64,
    /// Lower bound on the total number of checked coordinates.
    pub min_coords: usize,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            eps: 1e-4,
            tol: 1e-4,
            min_coords: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CoordCheck {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub tol: f64,
    pub checks: Vec<CoordCheck>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= self.tol
    }

    pub fn worst(&self) -> Option<&CoordCheck> {
        self.checks
            .iter()
            .max_by(|a, b| a.rel_error.total_cmp(&b.rel_error))
    }

    /// Coordinates that miss `tol` even after allowing `abs_floor` of
    /// absolute slack. See [`roundoff_floor`].
    pub fn violations(&self, abs_floor: f64) -> Vec<&CoordCheck> {
        self.checks
            .iter()
            .filter(|c| {
                let scale = c.analytic.abs().max(c.numeric.abs());
                (c.analytic - c.numeric).abs() > self.tol * scale + abs_floor
            })
            .collect()
    }

    pub fn params_covered(&self) -> usize {
        let mut names: Vec<&str> = self.checks.iter().map(|c| c.param.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        names.len()
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Absolute error a central difference can carry from rounding alone when
/// the loss is near `loss`: a few ulps of the loss divided by `2 * eps`.
/// Gradients much smaller than this cannot be checked to a relative
/// tolerance at that step size.
pub fn roundoff_floor(loss: f64, eps: f64) -> f64 {
    16.0 * f64::EPSILON * loss.abs().max(1.0) / (2.0 * eps)
}

/// Compares analytic gradients with central differences on a random subset
/// of coordinates covering every parameter. Each parameter also gets its
/// largest-gradient coordinate checked.
///
/// `loss_fn(params, Some(grads))` must accumulate the analytic gradient into
/// `grads`; with `None` it only evaluates the loss.
pub fn grad_check<F>(
    loss_fn: F,
    params: &mut ParamRegistry,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport>
where
    F: Fn(&ParamRegistry, Option<&mut Gradients>) -> Result<f64>,
{
    if params.num_scalars() == 0 {
        return Err(Error::NothingToCheck);
    }
    let mut grads = Gradients::zeros_like(params);
    let base = loss_fn(params, Some(&mut grads))?;
    if !base.is_finite() {
        return Err(Error::NonFiniteLoss(format!("loss is {base}")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let nonempty = params
        .ids()
        .filter(|&id| !params.get(id).is_empty())
        .count();
    let per_param = opts.min_coords.div_ceil(nonempty.max(1));
    let mut coords = Vec::new();
    for id in params.ids() {
        let size = params.get(id).len();
        if size == 0 {
            continue;
        }
        let mut picked: Vec<usize> = sample(&mut rng, size, per_param.min(size)).into_vec();
        let g = grads.get(id).data();
        let top = (0..size)
            .max_by(|&a, &b| g[a].abs().total_cmp(&g[b].abs()))
            .expect("non-empty");
        if !picked.contains(&top) {
            picked.push(top);
        }
        picked.sort_unstable();
        coords.extend(picked.into_iter().map(|k| (id, k)));
    }

    let mut checks = Vec::with_capacity(coords.len());
    let mut max_rel_error: f64 = 0.0;
    for (id, k) in coords {
        let orig = params.get(id).data()[k];
        params.get_mut(id).data_mut()[k] = orig + opts.eps;
        let plus = loss_fn(params, None);
        params.get_mut(id).data_mut()[k] = orig - opts.eps;
        let minus = loss_fn(params, None);
        params.get_mut(id).data_mut()[k] = orig;
        let (plus, minus) = (plus?, minus?);
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFiniteLoss(format!(
                "loss not finite when perturbing {}[{k}]",
                params.name(id)
            )));
        }
        let numeric = (plus - minus) / (2.0 * opts.eps);
        let analytic = grads.get(id).data()[k];
        let rel_error = relative_error(analytic, numeric);
        max_rel_error = max_rel_error.max(rel_error);
        checks.push(CoordCheck {
            param: params.name(id).to_string(),
            index: k,
            analytic,
            numeric,
            rel_error,
        });
    }
    Ok(GradCheckReport {
        max_rel_error,
        tol: opts.tol,
        checks,
    })
}
