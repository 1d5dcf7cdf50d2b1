//! JSON problem bundles referencing field binaries.
//!
//! ```json
//! { "grid": {"n": 2, "half_width": 1.0, "m": 65},
//!   "coefficients": ["a00.field", "a01.field", "a10.field", "a11.field"],
//!   "forcing": "f.field", "field_term": ["F0.field", "F1.field"],
//!   "boundary": "g.field", "p": 4.0, "q": 8.0 }
//! ```
//! Omitted coefficients mean the identity; omitted data mean zero.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{CoefficientField, EllipticProblem};
use crate::error::{LabError, Result};
use crate::field::{Field, VecField};
use crate::grid::Grid;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub half_width: f64,
    pub m: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemManifest {
    pub grid: GridSpec,
    #[serde(default)]
    pub coefficients: Option<Vec<PathBuf>>,
    #[serde(default)]
    pub forcing: Option<PathBuf>,
    #[serde(default)]
    pub field_term: Option<Vec<PathBuf>>,
    #[serde(default)]
    pub boundary: Option<PathBuf>,
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub q: Option<f64>,
}

fn read_field(base: &Path, rel: &Path, grid: &Grid) -> Result<Field> {
    let field = Field::read_binary(BufReader::new(File::open(base.join(rel))?))?;
    if field.grid() != grid {
        return Err(LabError::Config(format!(
            "{} does not match the manifest grid",
            rel.display()
        )));
    }
    Ok(field)
}

impl ProblemManifest {
    pub fn load(path: &Path) -> Result<EllipticProblem> {
        let manifest: ProblemManifest = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        manifest.resolve(path.parent().unwrap_or(Path::new(".")))
    }

    pub fn resolve(&self, base: &Path) -> Result<EllipticProblem> {
        let grid = Grid::new(self.grid.n, self.grid.half_width, self.grid.m)?;
        let n = grid.dim();
        let a = match &self.coefficients {
            None => CoefficientField::identity(&grid),
            Some(paths) => CoefficientField::new(
                paths
                    .iter()
                    .map(|p| read_field(base, p, &grid))
                    .collect::<Result<Vec<_>>>()?,
            )?,
        };
        let forcing = match &self.forcing {
            None => Field::zeros(&grid),
            Some(p) => read_field(base, p, &grid)?,
        };
        let field_term = match &self.field_term {
            None => VecField::zeros(&grid),
            Some(paths) if paths.len() == n => VecField::from_components(
                paths
                    .iter()
                    .map(|p| read_field(base, p, &grid))
                    .collect::<Result<Vec<_>>>()?,
            )?,
            Some(paths) => {
                return Err(LabError::Config(format!(
                    "field_term needs {n} components, got {}",
                    paths.len()
                )))
            }
        };
        let boundary = match &self.boundary {
            None => Field::zeros(&grid),
            Some(p) => read_field(base, p, &grid)?,
        };
        let problem = EllipticProblem::new(a, forcing, field_term, boundary)?;
        let (p, q) = (problem.p, problem.q);
        problem.with_exponents(self.p.unwrap_or(p), self.q.unwrap_or(q))
    }

    /// Writes the problem's fields next to a manifest at `path`.
    pub fn save(problem: &EllipticProblem, path: &Path) -> Result<()> {
        let dir = path.parent().unwrap_or(Path::new("."));
        std::fs::create_dir_all(dir)?;
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("problem")
            .to_string();
        let write = |name: String, f: &Field| -> Result<PathBuf> {
            let rel = PathBuf::from(format!("{stem}_{name}.field"));
            f.write_binary(std::io::BufWriter::new(File::create(dir.join(&rel))?))?;
            Ok(rel)
        };
        let g = problem.grid();
        let n = g.dim();
        let coefficients = (0..n * n)
            .map(|k| write(format!("a{}{}", k / n, k % n), &problem.coefficients.entries()[k]))
            .collect::<Result<Vec<_>>>()?;
        let field_term = (0..n)
            .map(|d| write(format!("F{d}"), problem.field_term.component(d)))
            .collect::<Result<Vec<_>>>()?;
        let manifest = ProblemManifest {
            grid: GridSpec {
                n,
                half_width: g.half_width(),
                m: g.nodes_per_axis(),
            },
            coefficients: Some(coefficients),
            forcing: Some(write("f".into(), &problem.forcing)?),
            field_term: Some(field_term),
            boundary: Some(write("g".into(), &problem.boundary)?),
            p: Some(problem.p),
            q: Some(problem.q),
        };
        std::fs::write(path, serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }
}
