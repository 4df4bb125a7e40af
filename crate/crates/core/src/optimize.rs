//! Scalar minimization and root bracketing on top of `argmin`'s Brent solvers.

use std::cell::RefCell;

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::brent::{BrentOpt, BrentRoot};

use crate::error::{Error, Result};

struct Objective<'a, F> {
    f: &'a F,
    failure: &'a RefCell<Option<Error>>,
}

impl<F: Fn(f64) -> Result<f64>> CostFunction for Objective<'_, F> {
    type Param = f64;
    type Output = f64;

    fn cost(&self, x: &f64) -> std::result::Result<f64, argmin::core::Error> {
        match (self.f)(*x) {
            Ok(v) => Ok(v),
            Err(e) => {
                let msg = e.to_string();
                *self.failure.borrow_mut() = Some(e);
                Err(argmin::core::Error::msg(msg))
            }
        }
    }
}

fn run_error(failure: &RefCell<Option<Error>>, err: argmin::core::Error) -> Error {
    failure
        .borrow_mut()
        .take()
        .unwrap_or_else(|| Error::Calibration(format!("scalar solver: {err}")))
}

/// Minimizer of `f` on `[lo, hi]`, returned as `(x, f(x))`, to absolute tolerance `xtol`.
pub fn minimize_scalar<F: Fn(f64) -> Result<f64>>(f: &F, lo: f64, hi: f64, xtol: f64) -> Result<(f64, f64)> {
    if !(lo < hi) {
        return Err(Error::invalid("bracket", "lower end must be below upper end"));
    }
    let failure = RefCell::new(None);
    let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    let solver = BrentOpt::new(lo, hi).set_tolerance((xtol / scale).max(1e-15), xtol.max(1e-300));
    let res = Executor::new(Objective { f, failure: &failure }, solver)
        .configure(|s| s.max_iters(500))
        .run()
        .map_err(|e| run_error(&failure, e))?;
    let st = res.state();
    match st.get_best_param() {
        Some(&x) => Ok((x, st.get_best_cost())),
        None => Err(Error::Calibration("minimizer returned no point".into())),
    }
}

/// Root of `f` inside `[lo, hi]`; the end values must differ in sign.
pub fn find_root<F: Fn(f64) -> Result<f64>>(f: &F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let (flo, fhi) = (f(lo)?, f(hi)?);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::Calibration(format!("no sign change on [{lo:e}, {hi:e}]")));
    }
    let failure = RefCell::new(None);
    let res = Executor::new(Objective { f, failure: &failure }, BrentRoot::new(lo, hi, tol))
        .configure(|s| s.param(0.5 * (lo + hi)).max_iters(500))
        .run()
        .map_err(|e| run_error(&failure, e))?;
    res.state()
        .get_best_param()
        .copied()
        .ok_or_else(|| Error::Calibration("root finder returned no point".into()))
}

/// Evaluates `f` on `n` evenly spaced points of `[lo, hi]`.
pub fn grid<F: Fn(f64) -> Result<f64>>(f: &F, lo: f64, hi: f64, n: usize) -> Result<Vec<(f64, f64)>> {
    (0..n)
        .map(|i| {
            let x = if n == 1 { lo } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 };
            f(x).map(|y| (x, y))
        })
        .collect()
}

/// Grid scan followed by Brent refinement inside the cell around the best grid point.
pub fn scan_then_minimize<F: Fn(f64) -> Result<f64>>(
    f: &F,
    lo: f64,
    hi: f64,
    n: usize,
    xtol: f64,
) -> Result<(f64, f64)> {
    let pts = grid(f, lo, hi, n.max(3))?;
    refine_grid_minimum(f, &pts, xtol)
}

/// Brent refinement between the neighbours of the lowest point of an evaluated grid.
pub fn refine_grid_minimum<F: Fn(f64) -> Result<f64>>(f: &F, pts: &[(f64, f64)], xtol: f64) -> Result<(f64, f64)> {
    if pts.len() < 3 {
        return Err(Error::invalid("grid", "needs at least three points"));
    }
    let (best, _) = pts
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, p)| if p.1 < acc.1 { (i, p.1) } else { acc });
    let a = pts[best.saturating_sub(1)].0;
    let b = pts[(best + 1).min(pts.len() - 1)].0;
    let (x, fx) = minimize_scalar(f, a, b, xtol)?;
    if fx <= pts[best].1 {
        Ok((x, fx))
    } else {
        Ok(pts[best])
    }
}
