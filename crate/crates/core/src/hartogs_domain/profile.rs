//! Radial profiles `r(t)` and `phi(t)` of the Hartogs domain.
//!
//! Both profiles are built from an anchor table: consecutive anchors are
//! joined by the C-infinity step [`smooth_transition`], and the first and last
//! anchor values are extended as flat tails. Because the step is flat to all
//! orders at both ends, the glued curve is smooth everywhere.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ProfileError {
    #[error("anchor table for `{curve}` must contain at least one anchor")]
    Empty { curve: &'static str },
    #[error("anchor table for `{curve}` is not strictly increasing in t at index {index}")]
    NotIncreasing { curve: &'static str, index: usize },
    #[error("anchor table for `{curve}` contains a non-finite entry at index {index}")]
    NonFinite { curve: &'static str, index: usize },
}

#[inline]
fn flat_exp(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

/// The smooth step `s(x) / (s(x) + s(1 - x))` with `s(x) = exp(-1/x)` for
/// `x > 0` and `0` otherwise. Equals 0 for `x <= 0`, 1 for `x >= 1`.
pub fn smooth_transition(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let a = flat_exp(x);
    let b = flat_exp(1.0 - x);
    a / (a + b)
}

/// First derivative of [`smooth_transition`].
pub fn smooth_transition_derivative(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    let a = flat_exp(x);
    let b = flat_exp(1.0 - x);
    let denom = (a + b) * (a + b);
    a * b * (1.0 / (x * x) + 1.0 / ((1.0 - x) * (1.0 - x))) / denom
}

/// One `(t, value)` anchor of a profile curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub t: f64,
    pub value: f64,
}

impl Anchor {
    pub const fn new(t: f64, value: f64) -> Self {
        Self { t, value }
    }
}

/// Where a parameter `t` falls relative to the anchor table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Segment {
    /// Flat tail before the first or after the last anchor.
    Tail { value: f64 },
    /// Between anchors `index` and `index + 1`; `x` is the local coordinate in `[0, 1]`.
    Blend { index: usize, x: f64 },
}

/// A smooth curve through a list of anchors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BlendCurve {
    anchors: Vec<Anchor>,
}

impl BlendCurve {
    pub fn new(curve: &'static str, anchors: Vec<Anchor>) -> Result<Self, ProfileError> {
        if anchors.is_empty() {
            return Err(ProfileError::Empty { curve });
        }
        for (index, a) in anchors.iter().enumerate() {
            if !a.t.is_finite() || !a.value.is_finite() {
                return Err(ProfileError::NonFinite { curve, index });
            }
            if index > 0 && anchors[index - 1].t >= a.t {
                return Err(ProfileError::NotIncreasing { curve, index });
            }
        }
        Ok(Self { anchors })
    }

    pub fn anchors(&self) -> &[Anchor] {
        &self.anchors
    }

    pub fn segment(&self, t: f64) -> Segment {
        let first = self.anchors[0];
        let last = self.anchors[self.anchors.len() - 1];
        if t <= first.t {
            return Segment::Tail { value: first.value };
        }
        if t >= last.t {
            return Segment::Tail { value: last.value };
        }
        // anchors are few (< 16); a linear scan beats a binary search here
        let index = self
            .anchors
            .windows(2)
            .position(|w| t < w[1].t)
            .expect("t lies strictly inside the anchor range");
        let (a, b) = (self.anchors[index], self.anchors[index + 1]);
        Segment::Blend {
            index,
            x: (t - a.t) / (b.t - a.t),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self.segment(t) {
            Segment::Tail { value } => value,
            Segment::Blend { index, x } => {
                let (a, b) = (self.anchors[index], self.anchors[index + 1]);
                if a.value == b.value {
                    a.value
                } else {
                    a.value + (b.value - a.value) * smooth_transition(x)
                }
            }
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match self.segment(t) {
            Segment::Tail { .. } => 0.0,
            Segment::Blend { index, x } => {
                let (a, b) = (self.anchors[index], self.anchors[index + 1]);
                (b.value - a.value) / (b.t - a.t) * smooth_transition_derivative(x)
            }
        }
    }

    /// Sign of the change across segment `index` (`+1`, `-1`, or `0` for a plateau).
    pub fn segment_trend(&self, index: usize) -> i8 {
        let d = self.anchors[index + 1].value - self.anchors[index].value;
        if d > 0.0 {
            1
        } else if d < 0.0 {
            -1
        } else {
            0
        }
    }
}

/// Serializable anchor tables of both profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileTable {
    pub r: Vec<Anchor>,
    pub phi: Vec<Anchor>,
}

/// The pair `(r, phi)` defining the domain `|w - exp(i phi(|z|))|^2 < r(|z|)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    r: BlendCurve,
    phi: BlendCurve,
}

impl RadialProfile {
    pub fn from_table(table: ProfileTable) -> Result<Self, ProfileError> {
        Ok(Self {
            r: BlendCurve::new("r", table.r)?,
            phi: BlendCurve::new("phi", table.phi)?,
        })
    }

    /// The reference construction: peaks of `r` at 2, 9, 16, plateaus at 1,
    /// tails at -1; `phi` winds from -2 up to 102 on `[4, 5]` and back on `[13, 14]`.
    pub fn standard() -> Self {
        Self::from_table(Self::standard_table()).expect("reference table is valid")
    }

    pub fn standard_table() -> ProfileTable {
        let a = Anchor::new;
        ProfileTable {
            r: vec![
                a(0.5, -1.0),
                a(2.0, 2.0),
                a(3.0, 1.0),
                a(8.0, 1.0),
                a(9.0, 2.0),
                a(10.0, 1.0),
                a(15.0, 1.0),
                a(16.0, 2.0),
                a(17.5, -1.0),
            ],
            phi: vec![
                a(4.0, -2.0),
                a(5.0, 102.0),
                a(6.0, 102.0),
                a(7.0, 98.0),
                a(11.0, 98.0),
                a(12.0, 102.0),
                a(13.0, 102.0),
                a(14.0, -2.0),
            ],
        }
    }

    pub fn table(&self) -> ProfileTable {
        ProfileTable {
            r: self.r.anchors().to_vec(),
            phi: self.phi.anchors().to_vec(),
        }
    }

    pub fn r_curve(&self) -> &BlendCurve {
        &self.r
    }

    pub fn phi_curve(&self) -> &BlendCurve {
        &self.phi
    }

    #[inline]
    pub fn r(&self, t: f64) -> f64 {
        self.r.eval(t)
    }

    #[inline]
    pub fn phi(&self, t: f64) -> f64 {
        self.phi.eval(t)
    }

    #[inline]
    pub fn r_prime(&self, t: f64) -> f64 {
        self.r.derivative(t)
    }

    #[inline]
    pub fn phi_prime(&self, t: f64) -> f64 {
        self.phi.derivative(t)
    }
}

impl Default for RadialProfile {
    fn default() -> Self {
        Self::standard()
    }
}
