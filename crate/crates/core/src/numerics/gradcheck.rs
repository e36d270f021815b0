//! Central-difference verification of tape gradients.

use rand::seq::index::sample;

use super::tape::{Tape, Var};
use super::tensor::{ParamId, ParamStore};
use crate::error::{CgflError, Result};
use crate::seed::rng_for;

/// Denominator floor for the relative error, so coordinates whose true
/// derivative is ~0 are judged on absolute error instead.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct GradCheckConfig {
    pub eps: f64,
    pub tol: f64,
    /// Coordinates sampled per parameter tensor; `None` checks all of them.
    pub coords_per_param: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            eps: 1e-5,
            tol: 1e-4,
            coords_per_param: Some(4),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CoordinateCheck {
    pub param: ParamId,
    pub name: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
    /// The stencil crossed a rectifier kink, so the central difference does
    /// not estimate the derivative. Excluded from pass/fail.
    pub kink: bool,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub checks: Vec<CoordinateCheck>,
    pub max_rel_error: f64,
    pub tol: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().any(|c| !c.kink) && self.max_rel_error < self.tol
    }

    pub fn failures(&self) -> impl Iterator<Item = &CoordinateCheck> {
        self.checks
            .iter()
            .filter(move |c| !c.kink && c.rel_error >= self.tol)
    }

    pub fn kinks(&self) -> usize {
        self.checks.iter().filter(|c| c.kink).count()
    }
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_ERROR_FLOOR)
}

fn evaluate<F>(build_loss: &mut F, store: &ParamStore) -> Result<(f64, Vec<bool>)>
where
    F: FnMut(&mut Tape, &ParamStore) -> Result<Var>,
{
    let mut tape = Tape::new();
    let loss = build_loss(&mut tape, store)?;
    Ok((tape.scalar(loss), tape.activation_pattern()))
}

/// Compares reverse-mode gradients of `build_loss` against central
/// differences on sampled coordinates of `params`.
pub fn finite_difference_check<F>(
    mut build_loss: F,
    store: &mut ParamStore,
    params: &[ParamId],
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport>
where
    F: FnMut(&mut Tape, &ParamStore) -> Result<Var>,
{
    if !(1e-7..=1e-3).contains(&cfg.eps) {
        return Err(CgflError::invalid(format!(
            "finite-difference step {} outside [1e-7, 1e-3]",
            cfg.eps
        )));
    }
    let mut tape = Tape::new();
    let loss = build_loss(&mut tape, store)?;
    let base = tape.scalar(loss);
    let pattern = tape.activation_pattern();
    tape.backward(loss, store)?;
    drop(tape);
    let (again, _) = evaluate(&mut build_loss, store)?;
    if base.to_bits() != again.to_bits() {
        return Err(CgflError::ContractViolation(format!(
            "loss builder is not deterministic: {base} vs {again}"
        )));
    }

    let analytic: Vec<Vec<f64>> = params
        .iter()
        .map(|&p| {
            let t = store.get(p);
            t.grad().map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; t.len()])
        })
        .collect();

    let mut rng = rng_for(cfg.seed, "gradcheck", 0);
    let mut checks = Vec::new();
    for (pi, &p) in params.iter().enumerate() {
        let len = store.get(p).len();
        let coords: Vec<usize> = match cfg.coords_per_param {
            Some(k) if k < len => {
                let mut c = sample(&mut rng, len, k).into_vec();
                c.sort_unstable();
                c
            }
            _ => (0..len).collect(),
        };
        for idx in coords {
            let orig = store.get(p).data()[idx];
            store.get_mut(p).data_mut()[idx] = orig + cfg.eps;
            let plus = evaluate(&mut build_loss, store);
            store.get_mut(p).data_mut()[idx] = orig - cfg.eps;
            let minus = evaluate(&mut build_loss, store);
            store.get_mut(p).data_mut()[idx] = orig;
            let (plus, plus_pattern) = plus?;
            let (minus, minus_pattern) = minus?;
            let numeric = (plus - minus) / (2.0 * cfg.eps);
            let kink = plus_pattern != pattern || minus_pattern != pattern;
            let a = analytic[pi][idx];
            checks.push(CoordinateCheck {
                param: p,
                name: store.name(p).to_string(),
                index: idx,
                analytic: a,
                numeric,
                rel_error: relative_error(a, numeric),
                kink,
            });
        }
    }
    let max_rel_error = checks
        .iter()
        .filter(|c| !c.kink)
        .map(|c| c.rel_error)
        .fold(0.0, f64::max);
    Ok(GradCheckReport {
        checks,
        max_rel_error,
        tol: cfg.tol,
    })
}
