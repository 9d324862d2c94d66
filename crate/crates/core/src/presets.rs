//! Initial data of the bundled examples.
//!
//! Examples 1-3 start from a `cosh`-shaped dip in the orientation order
//! separating two grains with angles `theta1 = -pi/4`, `theta2 = pi/4`.
//! `Smooth` is a cosine profile used for refinement studies.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::Result;
use crate::grid::{Field, GridSpec};

const THETA1: f64 = -0.25 * PI;
const THETA2: f64 = 0.25 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    Example1,
    Example2,
    Example3,
    Smooth,
}

impl Preset {
    pub const EXAMPLES: [Preset; 3] = [Preset::Example1, Preset::Example2, Preset::Example3];

    /// Node count used by the examples.
    pub fn k(&self) -> usize {
        match self {
            Preset::Smooth => 100,
            _ => 50,
        }
    }

    pub fn dt(&self) -> f64 {
        match self {
            Preset::Example1 => 0.06,
            Preset::Example2 => 0.075,
            Preset::Example3 => 0.1414,
            Preset::Smooth => 0.001,
        }
    }

    pub fn steps(&self) -> usize {
        match self {
            Preset::Example1 => 200,
            Preset::Example2 => 128,
            Preset::Example3 => 200,
            Preset::Smooth => 500,
        }
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec::new(self.k(), self.dt(), self.steps()).expect("preset grid is valid")
    }

    pub fn eta0(&self, x: f64) -> f64 {
        match self {
            Preset::Example1 => {
                let a = dip_amplitude(0.5, 0.5, 0.5);
                if x < 0.5 {
                    a * x.cosh() + 1.0
                } else {
                    a * (x - 1.0).cosh() + 1.0
                }
            }
            Preset::Example2 | Preset::Example3 => {
                let a = dip_amplitude(0.25, 0.25, 0.75);
                let b = dip_amplitude(0.75, 0.25, 0.75);
                if x < 0.25 {
                    a * x.cosh() + 1.0
                } else {
                    b * (x - 1.0).cosh() + 1.0
                }
            }
            Preset::Smooth => 0.5 + 0.25 * (PI * x).cos(),
        }
    }

    pub fn theta0(&self, x: f64) -> f64 {
        match self {
            Preset::Example1 | Preset::Example2 => 0.5 * PI * x - 0.25 * PI,
            Preset::Example3 => {
                if x < 0.6 {
                    -0.25 * PI * x - 0.1 * PI
                } else {
                    0.125 * PI * x + 0.125 * PI
                }
            }
            Preset::Smooth => 0.25 * (PI * x).cos(),
        }
    }

    /// Nodal initial data on `grid`, ghosts folded.
    pub fn initial(&self, grid: &GridSpec) -> Result<(Field, Field)> {
        Ok((
            Field::from_fn(grid, |x| self.eta0(x))?,
            Field::from_fn(grid, |x| self.theta0(x))?,
        ))
    }
}

/// `-(1 / cosh(w)) |theta2 - theta1| / (|theta2 - theta1| + tanh(l) + tanh(r))`
fn dip_amplitude(w: f64, l: f64, r: f64) -> f64 {
    let jump = (THETA2 - THETA1).abs();
    -jump / (jump + l.tanh() + r.tanh()) / w.cosh()
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Preset::Example1 => "example1",
            Preset::Example2 => "example2",
            Preset::Example3 => "example3",
            Preset::Smooth => "smooth",
        };
        f.write_str(s)
    }
}

impl FromStr for Preset {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "example1" | "1" => Ok(Preset::Example1),
            "example2" | "2" => Ok(Preset::Example2),
            "example3" | "3" => Ok(Preset::Example3),
            "smooth" => Ok(Preset::Smooth),
            other => Err(format!("unknown preset `{other}`")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn example1_dip_amplitude() {
        let jump = 0.5 * PI;
        let a = -1.0 / 0.5f64.cosh() * jump / (jump + 2.0 * 0.5f64.tanh());
        assert_relative_eq!(a, -0.55831, epsilon = 5e-6);
        assert_relative_eq!(Preset::Example1.eta0(0.0), 1.0 + a, epsilon = 1e-15);
        assert_relative_eq!(Preset::Example1.eta0(0.0), 0.44169, epsilon = 5e-6);
        assert_relative_eq!(Preset::Example1.theta0(0.0), -0.25 * PI);
    }

    #[test]
    fn example3_angle_has_jump_at_0_6() {
        let g = Preset::Example3.grid();
        let (_, th) = Preset::Example3.initial(&g).unwrap();
        assert_relative_eq!(th.at(29), -0.25 * PI * 0.58 - 0.1 * PI, epsilon = 1e-14);
        assert_relative_eq!(th.at(30), 0.125 * PI * 0.6 + 0.125 * PI, epsilon = 1e-14);
    }

    #[test]
    fn presets_respect_ranges() {
        for p in Preset::EXAMPLES.iter().chain([Preset::Smooth].iter()) {
            let (h, th) = p.initial(&p.grid()).unwrap();
            assert!(h.min() >= 0.0 && h.max() <= 1.0, "{p}");
            assert!(th.max_abs() <= 0.25 * PI + 1e-12, "{p}");
        }
    }

    #[test]
    fn parse_names() {
        assert_eq!("Example2".parse::<Preset>().unwrap(), Preset::Example2);
        assert_eq!(Preset::Example3.to_string(), "example3");
        assert!("example4".parse::<Preset>().is_err());
    }
}
