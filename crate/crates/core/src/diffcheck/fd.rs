use serde::{Deserialize, Serialize};

use crate::error::{MonolabError, Result};
use crate::qcore::linalg::{self, CMatrix, CVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Order {
    First,
    Second,
}

/// Finite-difference step control.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdStep {
    pub h: f64,
    pub richardson: bool,
}

impl FdStep {
    pub fn validate(&self) -> Result<()> {
        if !(1e-6..=1e-2).contains(&self.h) {
            return Err(MonolabError::Config(format!("fd step {} outside [1e-6, 1e-2]", self.h)));
        }
        Ok(())
    }
}

fn central<F: FnMut(f64) -> Result<f64>>(g: &mut F, f0: f64, h: f64, order: Order) -> Result<f64> {
    let fp = g(h)?;
    let fm = g(-h)?;
    Ok(match order {
        Order::First => (fp - fm) / (2.0 * h),
        Order::Second => (fp - 2.0 * f0 + fm) / (h * h),
    })
}

/// Derivative of s ↦ g(s) at 0 with optional Richardson extrapolation.
pub fn fd_scalar<F: FnMut(f64) -> Result<f64>>(mut g: F, step: FdStep, order: Order) -> Result<f64> {
    let f0 = match order {
        Order::First => 0.0,
        Order::Second => g(0.0)?,
    };
    let d1 = central(&mut g, f0, step.h, order)?;
    if !step.richardson {
        return Ok(d1);
    }
    let d2 = central(&mut g, f0, step.h / 2.0, order)?;
    Ok((4.0 * d2 - d1) / 3.0)
}

/// First or second directional derivative of f at ρ along A.
///
/// The direction is rescaled to unit Frobenius norm before stepping so that
/// `h` is an absolute step in matrix space; the result is scaled back.
pub fn fd_directional<F>(f: F, rho: &CMatrix, a: &CMatrix, step: FdStep, order: Order) -> Result<f64>
where
    F: Fn(&CMatrix) -> Result<f64>,
{
    let norm = linalg::frobenius(a);
    if norm == 0.0 {
        return Ok(0.0);
    }
    let unit = a.unscale(norm);
    let d = fd_scalar(|s| f(&(rho + unit.scale(s))), step, order)?;
    Ok(match order {
        Order::First => d * norm,
        Order::Second => d * norm * norm,
    })
}

/// Directional derivative of a function of amplitudes along v.
pub fn fd_amplitude<F>(f: F, alpha: &CVector, v: &CVector, step: FdStep, order: Order) -> Result<f64>
where
    F: Fn(&CVector) -> Result<f64>,
{
    let norm = v.norm();
    if norm == 0.0 {
        return Ok(0.0);
    }
    let unit = v.unscale(norm);
    let d = fd_scalar(|s| f(&(alpha + unit.scale(s))), step, order)?;
    Ok(match order {
        Order::First => d * norm,
        Order::Second => d * norm * norm,
    })
}
