//! Nodal fields on a [`Grid`] and their on-disk formats.
//!
//! Binary layout (all little-endian): `n: u64`, `m: u64`, `half_width: f64`,
//! followed by `m^n` values as `f64`, axis 0 varying fastest.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::grid::{Grid, MAX_DIM};

/// Scalar nodal samples on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(LabError::InvalidArgument(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(LabError::InvalidArgument(format!(
                "non-finite value at node {i}"
            )));
        }
        Ok(Field {
            grid: *grid,
            values,
        })
    }

    /// Samples `f` at every node. `f` receives the first `n` coordinates.
    pub fn from_fn(grid: &Grid, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let n = grid.dim();
        let values = (0..grid.node_count())
            .map(|i| f(&grid.point(i)[..n]))
            .collect();
        Field {
            grid: *grid,
            values,
        }
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        Field {
            grid: *grid,
            values: vec![c; grid.node_count()],
        }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    pub fn zip_with(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        debug_assert_eq!(self.grid, other.grid);
        Field {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn add(&self, other: &Field) -> Field {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Field) -> Field {
        self.zip_with(other, |a, b| a * b)
    }

    /// Restriction to a sub-box grid whose nodes are a subset of this grid's nodes.
    pub fn restrict(&self, sub: &Grid) -> Result<Field> {
        let offset = subgrid_offset(&self.grid, sub)?;
        let n = sub.dim();
        let values = (0..sub.node_count())
            .map(|i| {
                let mi = sub.multi_index(i);
                let mut big = [0usize; MAX_DIM];
                for d in 0..n {
                    big[d] = mi[d] + offset;
                }
                self.values[self.grid.index(&big[..n])]
            })
            .collect();
        Ok(Field { grid: *sub, values })
    }

    /// Multilinear interpolation at an arbitrary point of the box (clamped).
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        let g = &self.grid;
        let n = g.dim();
        let m = g.nodes_per_axis();
        let mut base = [0usize; MAX_DIM];
        let mut frac = [0.0f64; MAX_DIM];
        for d in 0..n {
            let t = ((x[d] + g.half_width()) / g.spacing()).clamp(0.0, (m - 1) as f64);
            let i = (t.floor() as usize).min(m - 2);
            base[d] = i;
            frac[d] = t - i as f64;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << n) {
            let mut w = 1.0;
            let mut idx = [0usize; MAX_DIM];
            for d in 0..n {
                if corner >> d & 1 == 1 {
                    w *= frac[d];
                    idx[d] = base[d] + 1;
                } else {
                    w *= 1.0 - frac[d];
                    idx[d] = base[d];
                }
            }
            if w != 0.0 {
                acc += w * self.values[g.index(&idx[..n])];
            }
        }
        acc
    }

    pub fn write_binary(&self, mut w: impl Write) -> Result<()> {
        w.write_all(&(self.grid.dim() as u64).to_le_bytes())?;
        w.write_all(&(self.grid.nodes_per_axis() as u64).to_le_bytes())?;
        w.write_all(&self.grid.half_width().to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(mut r: impl Read) -> Result<Field> {
        let mut word = [0u8; 8];
        r.read_exact(&mut word)?;
        let n = u64::from_le_bytes(word) as usize;
        r.read_exact(&mut word)?;
        let m = u64::from_le_bytes(word) as usize;
        r.read_exact(&mut word)?;
        let hw = f64::from_le_bytes(word);
        let grid = Grid::new(n, hw, m)?;
        let mut values = Vec::with_capacity(grid.node_count());
        for _ in 0..grid.node_count() {
            r.read_exact(&mut word)?;
            values.push(f64::from_le_bytes(word));
        }
        Field::from_values(&grid, values)
    }

    /// CSV with one row per node: coordinates then the value.
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let n = self.grid.dim();
        let mut header: Vec<&str> = ["x", "y", "z"][..n].to_vec();
        header.push("value");
        out.write_record(&header)?;
        for (i, v) in self.values.iter().enumerate() {
            let p = self.grid.point(i);
            let mut row: Vec<String> = p[..n].iter().map(|c| format!("{c:e}")).collect();
            row.push(format!("{v:e}"));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Index offset of a sub-box grid inside a larger grid with the same spacing.
pub fn subgrid_offset(big: &Grid, sub: &Grid) -> Result<usize> {
    let mismatch = || LabError::InvalidArgument("grids are not nested with equal spacing".into());
    if big.dim() != sub.dim() || sub.nodes_per_axis() > big.nodes_per_axis() {
        return Err(mismatch());
    }
    if (big.spacing() - sub.spacing()).abs() > 1e-12 * big.spacing() {
        return Err(mismatch());
    }
    Ok((big.nodes_per_axis() - sub.nodes_per_axis()) / 2)
}

/// `n`-component nodal samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VecField {
    grid: Grid,
    components: Vec<Field>,
}

impl VecField {
    pub fn from_components(components: Vec<Field>) -> Result<Self> {
        let grid = *components
            .first()
            .ok_or_else(|| LabError::InvalidArgument("no components".into()))?
            .grid();
        if components.len() != grid.dim() || components.iter().any(|c| *c.grid() != grid) {
            return Err(LabError::InvalidArgument(
                "vector field needs n components on one grid".into(),
            ));
        }
        Ok(VecField { grid, components })
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        let n = grid.dim();
        let mut comps: Vec<Vec<f64>> = vec![Vec::with_capacity(grid.node_count()); n];
        for i in 0..grid.node_count() {
            let v = f(&grid.point(i)[..n]);
            for d in 0..n {
                comps[d].push(v[d]);
            }
        }
        VecField {
            grid: *grid,
            components: comps
                .into_iter()
                .map(|values| Field {
                    grid: *grid,
                    values,
                })
                .collect(),
        }
    }

    pub fn zeros(grid: &Grid) -> Self {
        VecField {
            grid: *grid,
            components: vec![Field::zeros(grid); grid.dim()],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn component(&self, d: usize) -> &Field {
        &self.components[d]
    }

    pub fn components(&self) -> &[Field] {
        &self.components
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(Field::is_zero)
    }

    pub fn magnitude_at(&self, i: usize) -> f64 {
        self.components
            .iter()
            .map(|c| c.values[i].powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Pointwise Euclidean length.
    pub fn magnitude(&self) -> Field {
        Field {
            grid: self.grid,
            values: (0..self.grid.node_count())
                .map(|i| self.magnitude_at(i))
                .collect(),
        }
    }

    pub fn dot_at(&self, other: &VecField, i: usize) -> f64 {
        self.components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.values[i] * b.values[i])
            .sum()
    }

    pub fn scaled(&self, c: f64) -> VecField {
        VecField {
            grid: self.grid,
            components: self.components.iter().map(|f| f.scaled(c)).collect(),
        }
    }

    pub fn add(&self, other: &VecField) -> VecField {
        VecField {
            grid: self.grid,
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.add(b))
                .collect(),
        }
    }

    pub fn restrict(&self, sub: &Grid) -> Result<VecField> {
        Ok(VecField {
            grid: *sub,
            components: self
                .components
                .iter()
                .map(|c| c.restrict(sub))
                .collect::<Result<_>>()?,
        })
    }
}

/// A field together with a per-node validity mask; invalid nodes are excluded
/// from every norm.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedField {
    pub field: Field,
    pub valid: Vec<bool>,
}

impl MaskedField {
    pub fn is_valid(&self, i: usize) -> bool {
        self.valid[i]
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }
}
