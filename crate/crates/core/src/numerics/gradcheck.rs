use rand::seq::index;
use rand::Rng;

use super::{ParamSet, Real};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Probe {
    pub tensor: String,
    pub offset: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub probes: Vec<Probe>,
}

impl GradCheckReport {
    pub fn worst(&self) -> Option<&Probe> {
        self.probes
            .iter()
            .max_by(|a, b| a.rel_error.total_cmp(&b.rel_error))
    }
}

/// `|a - n| / max(|a|, |n|, 1e-8)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares `analytic` against central differences of `loss_fn` at
/// `n_probes` distinct coordinates drawn uniformly from `params`.
///
/// The perturbation is applied in the parameter type `F`; the difference
/// quotient divides by the step actually representable in `F`. `loss_fn` may
/// evaluate at any precision `G`, and the difference of the two losses is
/// taken in `G`.
pub fn grad_check<F, G, R, L>(
    params: &ParamSet<F>,
    analytic: &ParamSet<F>,
    mut loss_fn: L,
    n_probes: usize,
    h: f64,
    rng: &mut R,
) -> Result<GradCheckReport>
where
    F: Real,
    G: Real,
    R: Rng + ?Sized,
    L: FnMut(&ParamSet<F>) -> Result<G>,
{
    params.check_same_layout(analytic)?;
    let total = params.num_params();
    let n = n_probes.min(total);
    let mut work = params.clone();
    let mut probes = Vec::with_capacity(n);
    for flat in index::sample(rng, total, n).into_iter() {
        let (ti, off) = params.locate(flat).expect("index within parameter count");
        let original = params.at(ti).data()[off];
        let up = original + F::of(h);
        let down = original - F::of(h);

        work.at_mut(ti).data_mut()[off] = up;
        let f_up = loss_fn(&work)?;
        work.at_mut(ti).data_mut()[off] = down;
        let f_down = loss_fn(&work)?;
        work.at_mut(ti).data_mut()[off] = original;

        if !f_up.is_finite() || !f_down.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite loss probing `{}`[{off}]",
                params.name_at(ti)
            )));
        }
        let numeric = (f_up - f_down).as_f64() / (up.as_f64() - down.as_f64());
        let a = analytic.at(ti).data()[off].as_f64();
        probes.push(Probe {
            tensor: params.name_at(ti).to_string(),
            offset: off,
            analytic: a,
            numeric,
            rel_error: relative_error(a, numeric),
        });
    }
    let max_rel_error = probes.iter().map(|p| p.rel_error).fold(0.0, f64::max);
    Ok(GradCheckReport { max_rel_error, probes })
}
