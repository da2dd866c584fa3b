use serde::{Serialize, Serializer};

/// Outcome of thresholding a nonnegative residual with hysteresis: true below
/// `tol`, false above `10·tol`, indeterminate in between.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flag {
    True,
    False,
    Indeterminate,
}

pub const HYSTERESIS_FACTOR: f64 = 10.0;

impl Flag {
    pub fn from_residual(residual: f64, tol: f64) -> Flag {
        if residual <= tol {
            Flag::True
        } else if residual > HYSTERESIS_FACTOR * tol || residual.is_nan() {
            Flag::False
        } else {
            Flag::Indeterminate
        }
    }

    pub fn is_true(self) -> bool {
        self == Flag::True
    }
}

impl Serialize for Flag {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Flag::True => s.serialize_bool(true),
            Flag::False => s.serialize_bool(false),
            Flag::Indeterminate => s.serialize_str("indeterminate"),
        }
    }
}

/// A flag together with the residual and threshold it was derived from.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GatedFlag {
    pub value: Flag,
    pub residual: f64,
    pub tol: f64,
}

impl GatedFlag {
    pub fn new(residual: f64, tol: f64) -> Self {
        GatedFlag {
            value: Flag::from_residual(residual, tol),
            residual,
            tol,
        }
    }
}
