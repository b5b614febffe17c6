//! Ω heatmap over a two-dimensional pose grid.

use singavoid_core::kinematics::{joint_lengths, socket_angles};
use singavoid_core::screw::omega_indices_with_reference;
use singavoid_core::{Pose, RobotGeometry};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coord {
    X,
    Z,
    Theta,
    Psi,
}

impl Coord {
    fn set(self, pose: &mut Pose, v: f64) {
        match self {
            Coord::X => pose.x = v,
            Coord::Z => pose.z = v,
            Coord::Theta => pose.theta = v,
            Coord::Psi => pose.psi = v,
        }
    }
}

impl FromStr for Coord {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "x" => Ok(Coord::X),
            "z" => Ok(Coord::Z),
            "theta" => Ok(Coord::Theta),
            "psi" => Ok(Coord::Psi),
            other => Err(format!("unknown pose coordinate {other:?} (x, z, theta, psi)")),
        }
    }
}

/// One grid axis, written `coord:min:max:n` on the command line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub coord: Coord,
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl Axis {
    pub fn value(&self, k: usize) -> f64 {
        if self.n == 1 {
            self.min
        } else {
            self.min + (self.max - self.min) * k as f64 / (self.n - 1) as f64
        }
    }
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [coord, min, max, n] = parts[..] else {
            return Err(format!("expected coord:min:max:n, got {s:?}"));
        };
        let num = |v: &str| v.parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
        let axis = Axis {
            coord: coord.parse()?,
            min: num(min)?,
            max: num(max)?,
            n: n.parse().map_err(|e| format!("{n:?}: {e}"))?,
        };
        if axis.n == 0 || !axis.min.is_finite() || !axis.max.is_finite() || axis.max < axis.min {
            return Err(format!("empty or inverted range in {s:?}"));
        }
        Ok(axis)
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.coord {
            Coord::X => "x",
            Coord::Z => "z",
            Coord::Theta => "theta",
            Coord::Psi => "psi",
        };
        write!(f, "{name}:{}:{}:{}", self.min, self.max, self.n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub pose: Pose,
    /// Joint lengths and socket angles within their limits.
    pub feasible: bool,
    /// `None` where the Jacobian cannot be evaluated.
    pub min_omega: Option<f64>,
    pub pair: Option<[usize; 2]>,
}

/// Evaluates minΩ on the grid `rows × cols`, holding the other coordinates at `base`.
pub fn sweep(geometry: &RobotGeometry, base: &Pose, rows: &Axis, cols: &Axis) -> Vec<Cell> {
    let reference = geometry.reference_det();
    let mut out = Vec::with_capacity(rows.n * cols.n);
    for r in 0..rows.n {
        for c in 0..cols.n {
            let mut pose = *base;
            rows.coord.set(&mut pose, rows.value(r));
            cols.coord.set(&mut pose, cols.value(c));
            let feasible = joint_lengths(&pose, geometry).is_ok_and(|q| geometry.joints_within_limits(&q))
                && socket_angles(&pose, geometry).is_ok_and(|a| (0..3).all(|l| a[l] < geometry.socket_limit_deg[l]));
            let omega = omega_indices_with_reference(&pose, geometry, reference).ok();
            out.push(Cell {
                pose,
                feasible,
                min_omega: omega.as_ref().map(|o| o.min),
                pair: omega.map(|o| [o.pair.0, o.pair.1]),
            });
        }
    }
    out
}

pub const SWEEP_COLUMNS: [&str; 8] = ["x", "z", "theta", "psi", "feasible", "min_omega", "pair_i", "pair_j"];

/// Long format, one row per grid point. Unavailable values are empty.
pub fn write_csv<W: Write>(w: W, cells: &[Cell]) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(SWEEP_COLUMNS)?;
    let opt = |v: Option<String>| v.unwrap_or_default();
    for cell in cells {
        let p = cell.pose;
        wr.write_record([
            p.x.to_string(),
            p.z.to_string(),
            p.theta.to_string(),
            p.psi.to_string(),
            u8::from(cell.feasible).to_string(),
            opt(cell.min_omega.map(|v| v.to_string())),
            opt(cell.pair.map(|p| p[0].to_string())),
            opt(cell.pair.map(|p| p[1].to_string())),
        ])?;
    }
    wr.flush()?;
    Ok(())
}
