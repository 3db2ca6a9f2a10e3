//! Legacy ASCII VTK unstructured grids carrying a per-vertex density.

use std::io::{self, Write};
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::SolverConfig;
use crate::mesh::TriMesh;

const VTK_TRIANGLE: u32 = 5;
const MAX_TITLE: usize = 255;

#[derive(Debug, Error)]
pub enum VtkError {
    #[error("density has {got} values for {expected} vertices")]
    Length { expected: usize, got: usize },
    #[error("density value {value} at vertex {index} is not finite")]
    NonFinite { index: usize, value: f64 },
    #[error("title must be a single line of at most {MAX_TITLE} bytes")]
    Title,
    #[error("malformed file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Contents of a density file.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub title: String,
    pub points: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub rho: Vec<f64>,
}

/// First 16 hex digits of the SHA-256 of the serialized config, ignoring
/// the output directory.
pub fn config_digest(cfg: &SolverConfig) -> String {
    let canonical = SolverConfig {
        out_dir: SolverConfig::default().out_dir,
        ..cfg.clone()
    };
    let hash = Sha256::digest(canonical.to_config_string().as_bytes());
    hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

pub fn density_title(mesh: &TriMesh, t: f64, digest: &str) -> String {
    let (nx, ny) = mesh.grid_shape();
    format!("bhtopo density nx={nx} ny={ny} t={t:?} config={digest}")
}

/// `rho_t0.500000.vtk`
pub fn snapshot_file_name(t: f64) -> String {
    format!("rho_t{t:.6}.vtk")
}

pub fn format_density_vtk(mesh: &TriMesh, rho: &[f64], title: &str) -> Result<String, VtkError> {
    let nv = mesh.num_vertices();
    if rho.len() != nv {
        return Err(VtkError::Length {
            expected: nv,
            got: rho.len(),
        });
    }
    if let Some((index, &value)) = rho.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(VtkError::NonFinite { index, value });
    }
    if title.len() > MAX_TITLE || title.contains(['\n', '\r']) {
        return Err(VtkError::Title);
    }
    let nt = mesh.num_triangles();
    let mut s = String::with_capacity(64 * nv + 16 * nt);
    s.push_str("# vtk DataFile Version 3.0\n");
    s.push_str(title);
    s.push_str("\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    s.push_str(&format!("POINTS {nv} double\n"));
    for p in &mesh.vertices {
        s.push_str(&format!("{:?} {:?} 0\n", p[0], p[1]));
    }
    s.push_str(&format!("CELLS {nt} {}\n", 4 * nt));
    for tri in &mesh.triangles {
        s.push_str(&format!("3 {} {} {}\n", tri[0], tri[1], tri[2]));
    }
    s.push_str(&format!("CELL_TYPES {nt}\n"));
    for _ in 0..nt {
        s.push_str("5\n");
    }
    s.push_str(&format!("POINT_DATA {nv}\nSCALARS rho double 1\nLOOKUP_TABLE default\n"));
    for r in rho {
        s.push_str(&format!("{r:?}\n"));
    }
    Ok(s)
}

pub fn write_density_vtk(
    mesh: &TriMesh,
    rho: &[f64],
    title: &str,
    path: &Path,
) -> Result<(), VtkError> {
    let text = format_density_vtk(mesh, rho, title)?;
    let mut file = std::fs::File::create(path)?;
    file.write_all(text.as_bytes())?;
    Ok(())
}

struct Tokens<'a> {
    inner: std::str::SplitWhitespace<'a>,
}

impl<'a> Tokens<'a> {
    fn next(&mut self, what: &str) -> Result<&'a str, VtkError> {
        self.inner
            .next()
            .ok_or_else(|| VtkError::Format(format!("unexpected end of file reading {what}")))
    }

    fn expect(&mut self, keyword: &str) -> Result<(), VtkError> {
        let tok = self.next(keyword)?;
        if tok == keyword {
            Ok(())
        } else {
            Err(VtkError::Format(format!("expected `{keyword}`, got `{tok}`")))
        }
    }

    fn count(&mut self, what: &str) -> Result<usize, VtkError> {
        let tok = self.next(what)?;
        tok.parse()
            .map_err(|_| VtkError::Format(format!("bad {what} `{tok}`")))
    }

    fn float(&mut self, what: &str) -> Result<f64, VtkError> {
        let tok = self.next(what)?;
        tok.parse()
            .map_err(|_| VtkError::Format(format!("bad {what} `{tok}`")))
    }
}

/// Reads files in the layout produced by [`format_density_vtk`].
pub fn parse_density_vtk(text: &str) -> Result<DensityField, VtkError> {
    let mut lines = text.splitn(4, '\n');
    let magic = lines.next().unwrap_or_default();
    if !magic.starts_with("# vtk DataFile Version") {
        return Err(VtkError::Format("missing VTK magic line".into()));
    }
    let title = lines
        .next()
        .ok_or_else(|| VtkError::Format("missing title".into()))?
        .trim_end_matches('\r')
        .to_string();
    let encoding = lines.next().unwrap_or_default().trim();
    if encoding != "ASCII" {
        return Err(VtkError::Format(format!("unsupported encoding `{encoding}`")));
    }
    let mut tok = Tokens {
        inner: lines.next().unwrap_or_default().split_whitespace(),
    };
    tok.expect("DATASET")?;
    tok.expect("UNSTRUCTURED_GRID")?;

    tok.expect("POINTS")?;
    let nv = tok.count("point count")?;
    let ty = tok.next("point type")?;
    if ty != "double" && ty != "float" {
        return Err(VtkError::Format(format!("unsupported point type `{ty}`")));
    }
    let mut points = Vec::new();
    for _ in 0..nv {
        let x = tok.float("coordinate")?;
        let y = tok.float("coordinate")?;
        tok.float("coordinate")?;
        points.push([x, y]);
    }

    tok.expect("CELLS")?;
    let nt = tok.count("cell count")?;
    let size = tok.count("cell list size")?;
    if nt.checked_mul(4) != Some(size) {
        return Err(VtkError::Format(format!("cell list size {size} does not match {nt} triangles")));
    }
    let mut triangles = Vec::new();
    for _ in 0..nt {
        if tok.count("cell arity")? != 3 {
            return Err(VtkError::Format("only triangles are supported".into()));
        }
        let mut tri = [0; 3];
        for v in &mut tri {
            *v = tok.count("vertex index")?;
            if *v >= nv {
                return Err(VtkError::Format(format!("vertex index {v} out of range")));
            }
        }
        triangles.push(tri);
    }

    tok.expect("CELL_TYPES")?;
    if tok.count("cell type count")? != nt {
        return Err(VtkError::Format("CELL_TYPES count mismatch".into()));
    }
    for _ in 0..nt {
        if tok.count("cell type")? != VTK_TRIANGLE as usize {
            return Err(VtkError::Format("only triangle cells are supported".into()));
        }
    }

    tok.expect("POINT_DATA")?;
    if tok.count("point data count")? != nv {
        return Err(VtkError::Format("POINT_DATA count mismatch".into()));
    }
    tok.expect("SCALARS")?;
    tok.expect("rho")?;
    tok.next("scalar type")?;
    tok.expect("1")?;
    tok.expect("LOOKUP_TABLE")?;
    tok.next("lookup table name")?;
    let mut rho = Vec::new();
    for _ in 0..nv {
        rho.push(tok.float("density")?);
    }
    if let Some(extra) = tok.inner.next() {
        return Err(VtkError::Format(format!("trailing data `{extra}`")));
    }
    Ok(DensityField {
        title,
        points,
        triangles,
        rho,
    })
}

pub fn read_density_vtk(path: &Path) -> Result<DensityField, VtkError> {
    parse_density_vtk(&std::fs::read_to_string(path)?)
}
