//! Unary candidate functions used to replace learned activations.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Candidate unary function `g`. Declaration order is the library order and
/// breaks R² ties during selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Candidate {
    Identity,
    Square,
    Cube,
    Quartic,
    Exp,
    Log,
    Sqrt,
    Abs,
    Sin,
    Tanh,
    Sigmoid,
    Reciprocal,
    Constant,
}

/// Arguments of `exp` above this are treated as outside the domain.
const EXP_MAX_ARG: f64 = 700.0;
const RECIPROCAL_MIN_ABS: f64 = 1e-12;

impl Candidate {
    pub const ALL: [Candidate; 13] = [
        Candidate::Identity,
        Candidate::Square,
        Candidate::Cube,
        Candidate::Quartic,
        Candidate::Exp,
        Candidate::Log,
        Candidate::Sqrt,
        Candidate::Abs,
        Candidate::Sin,
        Candidate::Tanh,
        Candidate::Sigmoid,
        Candidate::Reciprocal,
        Candidate::Constant,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Candidate::Identity => "x",
            Candidate::Square => "x^2",
            Candidate::Cube => "x^3",
            Candidate::Quartic => "x^4",
            Candidate::Exp => "exp",
            Candidate::Log => "log",
            Candidate::Sqrt => "sqrt",
            Candidate::Abs => "abs",
            Candidate::Sin => "sin",
            Candidate::Tanh => "tanh",
            Candidate::Sigmoid => "sigmoid",
            Candidate::Reciprocal => "1/x",
            Candidate::Constant => "0",
        }
    }

    /// Integer power for the polynomial candidates.
    pub fn power(self) -> Option<u32> {
        match self {
            Candidate::Identity => Some(1),
            Candidate::Square => Some(2),
            Candidate::Cube => Some(3),
            Candidate::Quartic => Some(4),
            _ => None,
        }
    }

    pub fn in_domain(self, u: f64) -> bool {
        if !u.is_finite() {
            return false;
        }
        match self {
            Candidate::Exp => u <= EXP_MAX_ARG,
            Candidate::Log => u > 0.0,
            Candidate::Sqrt => u >= 0.0,
            Candidate::Reciprocal => u.abs() > RECIPROCAL_MIN_ABS,
            _ => true,
        }
    }

    /// `g(u)`; `None` outside the domain.
    pub fn eval(self, u: f64) -> Option<f64> {
        if !self.in_domain(u) {
            return None;
        }
        Some(match self {
            Candidate::Identity => u,
            Candidate::Square => u * u,
            Candidate::Cube => u * u * u,
            Candidate::Quartic => (u * u) * (u * u),
            Candidate::Exp => u.exp(),
            Candidate::Log => u.ln(),
            Candidate::Sqrt => u.sqrt(),
            Candidate::Abs => u.abs(),
            Candidate::Sin => u.sin(),
            Candidate::Tanh => u.tanh(),
            Candidate::Sigmoid => sigmoid(u),
            Candidate::Reciprocal => 1.0 / u,
            Candidate::Constant => 0.0,
        })
    }

    /// `g'(u)`; `None` where `g` is not differentiable in its domain.
    pub fn deriv(self, u: f64) -> Option<f64> {
        if !self.in_domain(u) {
            return None;
        }
        Some(match self {
            Candidate::Identity => 1.0,
            Candidate::Square => 2.0 * u,
            Candidate::Cube => 3.0 * u * u,
            Candidate::Quartic => 4.0 * u * u * u,
            Candidate::Exp => u.exp(),
            Candidate::Log => 1.0 / u,
            Candidate::Sqrt => {
                if u == 0.0 {
                    return None;
                }
                0.5 / u.sqrt()
            }
            Candidate::Abs => u.signum(),
            Candidate::Sin => u.cos(),
            Candidate::Tanh => {
                let t = u.tanh();
                1.0 - t * t
            }
            Candidate::Sigmoid => {
                let s = sigmoid(u);
                s * (1.0 - s)
            }
            Candidate::Reciprocal => -1.0 / (u * u),
            Candidate::Constant => 0.0,
        })
    }
}

pub(crate) fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

impl fmt::Display for Candidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let id = match self {
            Candidate::Identity => "identity",
            Candidate::Square => "square",
            Candidate::Cube => "cube",
            Candidate::Quartic => "quartic",
            Candidate::Exp => "exp",
            Candidate::Log => "log",
            Candidate::Sqrt => "sqrt",
            Candidate::Abs => "abs",
            Candidate::Sin => "sin",
            Candidate::Tanh => "tanh",
            Candidate::Sigmoid => "sigmoid",
            Candidate::Reciprocal => "reciprocal",
            Candidate::Constant => "constant",
        };
        f.write_str(id)
    }
}

impl FromStr for Candidate {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Candidate::ALL
            .iter()
            .copied()
            .find(|c| c.to_string() == s)
            .ok_or_else(|| format!("unknown candidate `{s}`"))
    }
}

/// Ordered candidate set searched during extraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<Candidate>", into = "Vec<Candidate>")]
pub struct CandidateLibrary {
    members: Vec<Candidate>,
}

impl CandidateLibrary {
    pub fn new(mut members: Vec<Candidate>) -> Self {
        members.sort();
        members.dedup();
        Self { members }
    }

    pub fn members(&self) -> &[Candidate] {
        &self.members
    }
}

impl From<Vec<Candidate>> for CandidateLibrary {
    fn from(members: Vec<Candidate>) -> Self {
        Self::new(members)
    }
}

impl From<CandidateLibrary> for Vec<Candidate> {
    fn from(lib: CandidateLibrary) -> Self {
        lib.members
    }
}

impl Default for CandidateLibrary {
    fn default() -> Self {
        Self::new(Candidate::ALL.to_vec())
    }
}
