//! The truncated rectangle `(-R, R) x (0, H)` and fields sampled on its nodes.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::closed_forms::Point;
use crate::error::{Error, Result};

/// How the height of the rectangle is chosen from its half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum HeightPolicy {
    /// `H = R^{1/4}`.
    #[default]
    QuarterPower,
    /// `H = R / 2`.
    HalfWidth,
    Fixed(f64),
}

impl HeightPolicy {
    pub fn height(&self, half_width: f64) -> f64 {
        match *self {
            HeightPolicy::QuarterPower => half_width.powf(0.25),
            HeightPolicy::HalfWidth => 0.5 * half_width,
            HeightPolicy::Fixed(h) => h,
        }
    }
}

/// Uniform node grid on `[-R, R] x [0, H]` with `nx` cells in `x`, `ny` in `y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub half_width: f64,
    pub height: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn new(half_width: f64, height: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::param("R", format!("must be positive, got {half_width}")));
        }
        if !(height > 0.0 && height.is_finite()) {
            return Err(Error::param("H", format!("must be positive, got {height}")));
        }
        if nx < 16 || !nx.is_multiple_of(2) {
            return Err(Error::param("nx", format!("must be even and >= 16, got {nx}")));
        }
        if ny < 8 {
            return Err(Error::param("ny", format!("must be >= 8, got {ny}")));
        }
        Ok(GridSpec {
            half_width,
            height,
            nx,
            ny,
        })
    }

    /// Grid with the requested spacings (rounded so that `nx` is even).
    pub fn with_spacing(half_width: f64, height: f64, hx: f64, hy: f64) -> Result<Self> {
        let nx = ((2.0 * half_width / hx / 2.0).round() as usize * 2).max(16);
        let ny = ((height / hy).round() as usize).max(8);
        Self::new(half_width, height, nx, ny)
    }

    pub fn hx(&self) -> f64 {
        2.0 * self.half_width / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.height / self.ny as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i == self.nx {
            self.half_width
        } else if 2 * i == self.nx {
            0.0
        } else {
            -self.half_width + i as f64 * self.hx()
        }
    }

    pub fn y(&self, j: usize) -> f64 {
        if j == self.ny {
            self.height
        } else {
            j as f64 * self.hy()
        }
    }

    pub fn point(&self, i: usize, j: usize) -> Point {
        Point::new(self.x(i), self.y(j))
    }

    /// Column index of the node `x = 0`.
    pub fn center_index(&self) -> usize {
        self.nx / 2
    }

    pub fn node_count(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn check_peclet(&self, c: f64) -> Result<()> {
        let product = c * self.hx();
        if product > 1.0 + 1e-12 {
            return Err(Error::Peclet { product });
        }
        Ok(())
    }
}

/// Node values, row-major in `j` then `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl Field {
    pub fn constant(grid: GridSpec, value: f64) -> Self {
        Field {
            grid,
            values: vec![value; grid.node_count()],
        }
    }

    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(Point) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.node_count());
        for j in 0..=grid.ny {
            for i in 0..=grid.nx {
                values.push(f(grid.point(i, j)));
            }
        }
        Field { grid, values }
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * (self.grid.nx + 1) + i
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.index(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.index(i, j);
        self.values[k] = v;
    }

    /// Values on `y = 0`, including both corners.
    pub fn bottom_trace(&self) -> &[f64] {
        &self.values[..=self.grid.nx]
    }

    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// CSV with header `x,y,v`, row-major in `j` then `i`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,y,v")?;
        for j in 0..=self.grid.ny {
            for i in 0..=self.grid.nx {
                writeln!(
                    out,
                    "{:.16e},{:.16e},{:.16e}",
                    self.grid.x(i),
                    self.grid.y(j),
                    self.at(i, j)
                )?;
            }
        }
        Ok(())
    }

    /// Reads a field written by `write_csv`; the grid is recovered from the coordinates.
    /// Leading `#` lines are skipped.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Field> {
        let bad = |msg: String| Error::param("field_csv", msg);
        let mut lines = input
            .lines()
            .filter(|l| !matches!(l, Ok(s) if s.starts_with('#')));
        let header = lines
            .next()
            .ok_or_else(|| bad("empty file".into()))?
            .map_err(|e| bad(e.to_string()))?;
        if header.trim() != "x,y,v" {
            return Err(bad(format!("unexpected header `{header}`")));
        }
        let mut rows = Vec::new();
        for (n, line) in lines.enumerate() {
            let line = line.map_err(|e| bad(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| bad(format!("data row {}: {e}", n + 1)))?;
            if parts.len() != 3 {
                return Err(bad(format!("data row {}: expected 3 columns", n + 1)));
            }
            rows.push([parts[0], parts[1], parts[2]]);
        }
        let nx = rows.iter().take_while(|r| r[1] == rows[0][1]).count().saturating_sub(1);
        if nx == 0 || rows.len() % (nx + 1) != 0 {
            return Err(bad("rows do not form a rectangular grid".into()));
        }
        let ny = rows.len() / (nx + 1) - 1;
        let half_width = rows[nx][0];
        let height = rows[rows.len() - 1][1];
        let grid = GridSpec::new(half_width, height, nx, ny)?;
        Ok(Field {
            grid,
            values: rows.iter().map(|r| r[2]).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_geometry() {
        let g = GridSpec::new(4.0, 2.0, 32, 16).unwrap();
        assert_eq!(g.hx(), 0.25);
        assert_eq!(g.hy(), 0.125);
        assert_eq!(g.x(g.center_index()), 0.0);
        assert_eq!(g.x(g.nx), 4.0);
        assert_eq!(g.y(g.ny), 2.0);
        assert!(GridSpec::new(4.0, 2.0, 33, 16).is_err());
        assert!(GridSpec::new(4.0, 2.0, 8, 16).is_err());
        assert!(GridSpec::new(4.0, 2.0, 32, 4).is_err());
        assert!(GridSpec::new(-1.0, 2.0, 32, 8).is_err());
        assert!(g.check_peclet(4.0).is_ok());
        assert!(matches!(g.check_peclet(4.1), Err(Error::Peclet { .. })));
    }

    #[test]
    fn height_policies() {
        assert_eq!(HeightPolicy::QuarterPower.height(16.0), 2.0);
        assert_eq!(HeightPolicy::HalfWidth.height(16.0), 8.0);
        assert_eq!(HeightPolicy::Fixed(3.0).height(16.0), 3.0);
    }

    #[test]
    fn csv_round_trip() {
        let g = GridSpec::new(1.5, 0.75, 16, 8).unwrap();
        let f = Field::from_fn(g, |p| (p.x * 1.3).sin() + p.y / 3.0);
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x,y,v\n"));
        assert_eq!(text.lines().count(), 1 + 17 * 9);
        let back = Field::read_csv(&buf[..]).unwrap();
        assert_eq!(back.grid, g);
        assert_eq!(back.values, f.values);
    }
}
