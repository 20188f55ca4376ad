//! Synthetic training images.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pattern {
    /// Alternating black/white squares of side `cell`, black at the origin.
    Chessboard,
    /// Vertical black/white bars of width `cell`.
    Stripes,
    /// White discs of diameter `cell / 2` centred in each `cell x cell` tile.
    Dots,
}

impl std::str::FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "chessboard" => Ok(Pattern::Chessboard),
            "stripes" => Ok(Pattern::Stripes),
            "dots" => Ok(Pattern::Dots),
            other => Err(Error::Config(format!(
                "unknown pattern '{other}' (chessboard, stripes, dots)"
            ))),
        }
    }
}

/// A `size x size` two-level pattern with values `low` and `high`.
pub fn render_pattern(pattern: Pattern, size: usize, cell: usize, low: f64, high: f64) -> Result<Matrix> {
    if size == 0 || cell == 0 {
        return Err(Error::contract("pattern size and cell must be >= 1"));
    }
    let on = |b: bool| if b { high } else { low };
    Ok(match pattern {
        Pattern::Chessboard => Matrix::from_fn(size, size, |i, j| on((i / cell + j / cell) % 2 == 1)),
        Pattern::Stripes => Matrix::from_fn(size, size, |_, j| on((j / cell) % 2 == 1)),
        Pattern::Dots => {
            let r = cell as f64 / 4.0;
            let c = (cell as f64 - 1.0) / 2.0;
            Matrix::from_fn(size, size, |i, j| {
                let (di, dj) = ((i % cell) as f64 - c, (j % cell) as f64 - c);
                on(di * di + dj * dj <= r * r)
            })
        }
    })
}
