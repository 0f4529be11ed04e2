//! File formats.
//!
//! * Binary grid: header `n: u64, param: f64, kmax: u64`, then one or more row-major
//!   n x n planes of little-endian f64. Kernel tables store (ε, κ) in the header and the
//!   planes K1, K2; vorticity snapshots store (t, 0) and one plane.
//! * Particle snapshot: header `N: u64, t: f64`, then (x1, x2, ξ) per particle as
//!   little-endian f64.
//! * CSV: particles `t,i,x1,x2,xi`; fields `t,i,j,xi`; measures `x1,x2,weight`.

use std::io::{Read, Write};

use crate::dynamics::VortexEnsemble;
use crate::error::{Error, Result};
use crate::field::VorticityField;
use crate::kernels::MollifiedKernel;
use crate::metrics::SignedAtomicMeasure;
use crate::torus::TorusPoint;

/// Contents of a binary grid file.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFile {
    pub n: usize,
    pub param: f64,
    pub kmax: u64,
    /// Planes of n * n values each, in file order.
    pub planes: Vec<Vec<f64>>,
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    Ok(f64::from_bits(read_u64(r)?))
}

pub fn write_grid<W: Write>(mut w: W, n: usize, param: f64, kmax: u64, planes: &[&[f64]]) -> Result<()> {
    w.write_all(&(n as u64).to_le_bytes())?;
    w.write_all(&param.to_le_bytes())?;
    w.write_all(&kmax.to_le_bytes())?;
    for p in planes {
        if p.len() != n * n {
            return Err(Error::Format(format!("plane has {} values, expected {}", p.len(), n * n)));
        }
        for v in p.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_grid<R: Read>(mut r: R) -> Result<GridFile> {
    let n = read_u64(&mut r)? as usize;
    let param = read_f64(&mut r)?;
    let kmax = read_u64(&mut r)?;
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    let plane_bytes = n * n * 8;
    if n == 0 || rest.is_empty() || rest.len() % plane_bytes != 0 {
        return Err(Error::Format(format!(
            "payload of {} bytes is not a whole number of {n} x {n} planes",
            rest.len()
        )));
    }
    let planes = rest
        .chunks(plane_bytes)
        .map(|c| {
            c.chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
                .collect()
        })
        .collect();
    Ok(GridFile { n, param, kmax, planes })
}

/// Kernel table as a grid file: header (n, ε, κ), planes K1 and K2 at displacement
/// (i h, j h).
pub fn write_kernel_table<W: Write>(w: W, kernel: &MollifiedKernel) -> Result<()> {
    let t = kernel.table();
    let k1: Vec<f64> = t.values().iter().map(|v| v[0]).collect();
    let k2: Vec<f64> = t.values().iter().map(|v| v[1]).collect();
    write_grid(w, t.n(), kernel.eps(), kernel.kmax() as u64, &[&k1, &k2])
}

pub fn write_field_binary<W: Write>(w: W, field: &VorticityField) -> Result<()> {
    write_grid(w, field.n(), field.time(), 0, &[field.values()])
}

pub fn read_field_binary<R: Read>(r: R) -> Result<VorticityField> {
    let g = read_grid(r)?;
    if g.planes.len() != 1 {
        return Err(Error::Format(format!("expected one plane, found {}", g.planes.len())));
    }
    VorticityField::from_values(g.n, g.planes.into_iter().next().expect("one plane"), g.param)
}

pub fn write_field_csv<W: Write>(w: W, fields: &[VorticityField]) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["t", "i", "j", "xi"])?;
    for f in fields {
        let n = f.n();
        for (idx, v) in f.values().iter().enumerate() {
            w.write_record([
                f.time().to_string(),
                (idx / n).to_string(),
                (idx % n).to_string(),
                v.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read the first time slice of a field CSV.
pub fn read_field_csv<R: Read>(r: R) -> Result<VorticityField> {
    let mut rd = csv::Reader::from_reader(r);
    let mut t0 = None;
    let mut cells = Vec::new();
    for rec in rd.deserialize() {
        let (t, i, j, xi): (f64, usize, usize, f64) = rec?;
        match t0 {
            None => t0 = Some(t),
            Some(s) if s != t => break,
            _ => {}
        }
        cells.push((i, j, xi));
    }
    let n = (cells.len() as f64).sqrt().round() as usize;
    if n == 0 || n * n != cells.len() {
        return Err(Error::Format(format!("{} cells do not form a square grid", cells.len())));
    }
    let mut values = vec![f64::NAN; n * n];
    for (i, j, xi) in cells {
        if i >= n || j >= n {
            return Err(Error::Format(format!("cell ({i}, {j}) outside the {n} x {n} grid")));
        }
        values[i * n + j] = xi;
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::Format("missing grid cells".into()));
    }
    VorticityField::from_values(n, values, t0.unwrap_or(0.0))
}

pub fn write_particles_csv<'a, W: Write>(w: W, snapshots: impl IntoIterator<Item = &'a VortexEnsemble>) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["t", "i", "x1", "x2", "xi"])?;
    for ens in snapshots {
        for (i, (p, xi)) in ens.positions().iter().zip(ens.intensities()).enumerate() {
            w.write_record([
                ens.time().to_string(),
                i.to_string(),
                p.x1().to_string(),
                p.x2().to_string(),
                xi.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One particle snapshot: time, positions and intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub positions: Vec<TorusPoint>,
    pub intensities: Vec<f64>,
}

pub fn write_snapshot<W: Write>(mut w: W, ens: &VortexEnsemble) -> Result<()> {
    w.write_all(&(ens.len() as u64).to_le_bytes())?;
    w.write_all(&ens.time().to_le_bytes())?;
    for (p, xi) in ens.positions().iter().zip(ens.intensities()) {
        for v in [p.x1(), p.x2(), *xi] {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<Snapshot> {
    let n = read_u64(&mut r)? as usize;
    let t = read_f64(&mut r)?;
    let mut positions = Vec::with_capacity(n);
    let mut intensities = Vec::with_capacity(n);
    for _ in 0..n {
        let x1 = read_f64(&mut r)?;
        let x2 = read_f64(&mut r)?;
        positions.push(TorusPoint::wrap(x1, x2)?);
        intensities.push(read_f64(&mut r)?);
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(Error::Format("trailing bytes after snapshot payload".into()));
    }
    Ok(Snapshot { t, positions, intensities })
}

pub fn read_measure_csv<R: Read>(r: R) -> Result<SignedAtomicMeasure> {
    let mut rd = csv::Reader::from_reader(r);
    let mut atoms = Vec::new();
    for rec in rd.deserialize() {
        let (x1, x2, w): (f64, f64, f64) = rec?;
        atoms.push((TorusPoint::wrap(x1, x2)?, w));
    }
    Ok(SignedAtomicMeasure::new(atoms))
}

pub fn write_measure_csv<W: Write>(w: W, mu: &SignedAtomicMeasure) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["x1", "x2", "weight"])?;
    for (p, m) in mu.atoms() {
        w.write_record([p.x1().to_string(), p.x2().to_string(), m.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Potential φ on the support points as CSV (x1, x2, phi).
pub fn write_potential_csv<W: Write>(w: W, points: &[TorusPoint], potential: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["x1", "x2", "phi"])?;
    for (p, v) in points.iter().zip(potential) {
        w.write_record([p.x1().to_string(), p.x2().to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
