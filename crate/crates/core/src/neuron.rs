//! Pointwise leaky integrate-and-fire dynamics.
//!
//! The membrane update is the discrete iteration
//!
//! ```text
//! u[t] = alpha[t] * u[t-1] + x[t]
//! alpha[t] = 1 - dt/tau   if o[t-1] = 0
//!          = 0            if o[t-1] = 1
//! o[t] = 1 if u[t] >= v_th else 0
//! ```
//!
//! where `x` is the synaptic input with the `dt/tau` factor already folded
//! into the weights. Resetting happens only through `alpha`; the potential is
//! never clamped or reduced by subtraction.
//!
//! The spike function has no useful derivative, so the backward pass uses a
//! surrogate: the arctangent `atan(s * (u - v_th)) / pi + 1/2` (whose slope is
//! `s / (pi * (1 + (s * (u - v_th))^2))`) or a rectangular window.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Membrane constants shared by every neuron in a network. Times are in ms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifConstants {
    pub tau: f64,
    pub dt: f64,
}

impl LifConstants {
    /// Resting potential; fixed at 0 mV.
    pub const V_REST: f64 = 0.0;

    pub fn new(tau: f64, dt: f64) -> Result<Self> {
        if !(tau > 0.0 && dt > 0.0 && dt <= tau) {
            return Err(Error::Config(format!(
                "membrane constants need 0 < dt <= tau, got tau={tau}, dt={dt}"
            )));
        }
        Ok(Self { tau, dt })
    }

    /// Decay applied to a neuron that did not spike on the previous step.
    #[inline]
    pub fn leak(&self) -> f64 {
        1.0 - self.dt / self.tau
    }
}

impl Default for LifConstants {
    fn default() -> Self {
        Self { tau: 2.0, dt: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NeuronState {
    pub u: f64,
    pub spiked: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateKind {
    Arctan,
    Rectangular,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSurrogate")]
pub struct SurrogateSpec {
    pub kind: SurrogateKind,
    /// Steepness for `Arctan`, window width for `Rectangular`.
    pub scale: f64,
}

impl SurrogateSpec {
    pub fn arctan() -> Self {
        Self {
            kind: SurrogateKind::Arctan,
            scale: PI,
        }
    }

    pub fn rectangular(width: f64) -> Self {
        Self {
            kind: SurrogateKind::Rectangular,
            scale: width,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scale > 0.0 && self.scale.is_finite() {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "surrogate scale must be positive, got {}",
                self.scale
            )))
        }
    }

    /// Smooth stand-in for the spike, used by the soft-forward oracle.
    pub fn value(&self, u: f64, v_th: f64) -> Result<f64> {
        match self.kind {
            SurrogateKind::Arctan => Ok(arctan_value(u - v_th, self.scale)),
            kind => Err(Error::UnsupportedSurrogate(kind)),
        }
    }

    /// Slope of the surrogate with respect to `u`. The slope with respect to
    /// `v_th` is its negation.
    #[inline]
    pub fn grad(&self, u: f64, v_th: f64) -> f64 {
        let z = u - v_th;
        match self.kind {
            SurrogateKind::Arctan => {
                let s = self.scale * z;
                self.scale / (PI * (1.0 + s * s))
            }
            SurrogateKind::Rectangular => {
                if z.abs() < self.scale / 2.0 {
                    1.0 / self.scale
                } else {
                    0.0
                }
            }
        }
    }
}

/// Serialized form; a missing scale takes the kind's default.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSurrogate {
    kind: SurrogateKind,
    scale: Option<f64>,
}

impl TryFrom<RawSurrogate> for SurrogateSpec {
    type Error = Error;

    fn try_from(r: RawSurrogate) -> Result<Self> {
        let s = match (r.kind, r.scale) {
            (SurrogateKind::Arctan, None) => Self::arctan(),
            (SurrogateKind::Rectangular, None) => Self::rectangular(1.0),
            (kind, Some(scale)) => Self { kind, scale },
        };
        s.validate()?;
        Ok(s)
    }
}

impl Default for SurrogateSpec {
    fn default() -> Self {
        Self::arctan()
    }
}

#[inline]
fn arctan_value(z: f64, scale: f64) -> f64 {
    (scale * z).atan() / PI + 0.5
}

#[inline]
pub fn decay_factor(spiked_prev: bool, c: &LifConstants) -> f64 {
    if spiked_prev {
        0.0
    } else {
        c.leak()
    }
}

/// One membrane update; returns the new potential.
#[inline]
pub fn lif_step(state: NeuronState, x: f64, c: &LifConstants) -> f64 {
    decay_factor(state.spiked, c) * state.u + x
}

/// Heaviside spike generation. Equality fires.
#[inline]
pub fn fire(u: f64, v_th: f64) -> bool {
    u >= v_th
}

pub fn surrogate_value(u: f64, v_th: f64, s: &SurrogateSpec) -> Result<f64> {
    s.value(u, v_th)
}

#[inline]
pub fn surrogate_grad(u: f64, v_th: f64, s: &SurrogateSpec) -> f64 {
    s.grad(u, v_th)
}
