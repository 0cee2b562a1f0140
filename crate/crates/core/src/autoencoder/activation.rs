use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Elementwise hidden activation together with its derivatives and antiderivative.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Relu,
    Linear,
}

impl Activation {
    pub const ALL: [Activation; 3] = [Activation::Sigmoid, Activation::Relu, Activation::Linear];

    #[inline]
    pub fn apply(self, u: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(u),
            Activation::Relu => u.max(0.0),
            Activation::Linear => u,
        }
    }

    /// `h'(u)`; relu uses `h'(0) = 0`.
    #[inline]
    pub fn derivative(self, u: f64) -> f64 {
        match self {
            Activation::Sigmoid => {
                let s = sigmoid(u);
                s * (1.0 - s)
            }
            Activation::Relu => {
                if u > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => 1.0,
        }
    }

    /// `h''(u)`, zero almost everywhere for the piecewise-linear activations.
    #[inline]
    pub fn second_derivative(self, u: f64) -> f64 {
        match self {
            Activation::Sigmoid => {
                let s = sigmoid(u);
                s * (1.0 - s) * (1.0 - 2.0 * s)
            }
            Activation::Relu | Activation::Linear => 0.0,
        }
    }

    /// Antiderivative `H` with `H' = h`, additive constant chosen so that the
    /// sigmoid case is the softplus and the others vanish at 0.
    #[inline]
    pub fn antiderivative(self, u: f64) -> f64 {
        match self {
            Activation::Sigmoid => softplus(u),
            Activation::Relu => {
                let p = u.max(0.0);
                0.5 * p * p
            }
            Activation::Linear => 0.5 * u * u,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Sigmoid => "sigmoid",
            Activation::Relu => "relu",
            Activation::Linear => "linear",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sigmoid" | "sig" => Ok(Activation::Sigmoid),
            "relu" => Ok(Activation::Relu),
            "linear" => Ok(Activation::Linear),
            other => Err(format!("unknown activation `{other}` (expected sigmoid, relu or linear)")),
        }
    }
}

#[inline]
pub fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^u)` without overflow.
#[inline]
pub fn softplus(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}
