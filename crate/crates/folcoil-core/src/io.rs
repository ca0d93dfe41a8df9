//! On-disk formats: fields as a small header plus a flat little-endian f64
//! block (row-major), CSV dumps for inspection, and forms as JSON manifests
//! of named components referencing field blocks. See docs/formats.md.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{FolError, Result};
use crate::field::ScalarField;
use crate::forms::{FormComponent, FullForm};
use crate::grid::{GridRef, PeriodicGrid};

const MAGIC: &[u8; 8] = b"FOLCOIL1";

/// Write a field: magic, dim (u32), per-axis name length + bytes + resolution
/// (u32 each), then the samples as little-endian f64 in row-major order.
pub fn write_field(field: &ScalarField, w: &mut impl Write) -> Result<()> {
    w.write_all(MAGIC)?;
    let grid = field.grid();
    w.write_all(&(grid.dim() as u32).to_le_bytes())?;
    for (name, &res) in grid.axes().iter().zip(grid.resolutions()) {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(res as u32).to_le_bytes())?;
    }
    for v in field.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_field(r: &mut impl Read) -> Result<ScalarField> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(FolError::Invalid("bad field magic".to_string()));
    }
    let dim = read_u32(r)? as usize;
    if dim == 0 || dim > 5 {
        return Err(FolError::Invalid(format!("bad field dim {dim}")));
    }
    let mut names = Vec::with_capacity(dim);
    let mut res = Vec::with_capacity(dim);
    for _ in 0..dim {
        let len = read_u32(r)? as usize;
        let mut buf = vec![0u8; len];
        r.read_exact(&mut buf)?;
        names.push(String::from_utf8(buf).map_err(|_| {
            FolError::Invalid("bad axis name encoding".to_string())
        })?);
        res.push(read_u32(r)? as usize);
    }
    let name_refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    let grid = PeriodicGrid::new(&name_refs, &res)?;
    let mut values = vec![0.0f64; grid.len()];
    let mut buf = [0u8; 8];
    for v in values.iter_mut() {
        r.read_exact(&mut buf)?;
        *v = f64::from_le_bytes(buf);
    }
    ScalarField::new(grid, values)
}

pub fn save_field(field: &ScalarField, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    write_field(field, &mut f)
}

pub fn load_field(path: &Path) -> Result<ScalarField> {
    let mut f = std::fs::File::open(path)?;
    read_field(&mut f)
}

/// CSV dump: one row per node, coordinates then the sample value.
pub fn write_field_csv(field: &ScalarField, w: &mut impl Write) -> Result<()> {
    let grid = field.grid();
    let header: Vec<String> = grid.axes().to_vec();
    writeln!(w, "{},value", header.join(","))?;
    for (i, v) in field.values().iter().enumerate() {
        let coords = grid.coords(i);
        let row: Vec<String> = coords.iter().map(|c| format!("{c:.17e}")).collect();
        writeln!(w, "{},{v:.17e}", row.join(","))?;
    }
    Ok(())
}

/// Form manifest: JSON naming each component by its multi-index, with the
/// component fields appended after the manifest as consecutive field blocks.
pub fn write_full_form(form: &FullForm, w: &mut impl Write) -> Result<()> {
    #[derive(serde::Serialize)]
    struct Manifest<'a> {
        schema: &'static str,
        degree: usize,
        axes: &'a [String],
        components: Vec<Vec<usize>>,
    }
    let manifest = Manifest {
        schema: "folcoil-form-v1",
        degree: form.degree(),
        axes: form.grid().axes(),
        components: form.components().iter().map(|c| c.index.clone()).collect(),
    };
    let json = serde_json::to_string(&manifest)
        .map_err(|e| FolError::Invalid(format!("manifest encoding: {e}")))?;
    w.write_all(&(json.len() as u32).to_le_bytes())?;
    w.write_all(json.as_bytes())?;
    for comp in form.components() {
        write_field(&comp.field, w)?;
    }
    Ok(())
}

pub fn read_full_form(r: &mut impl Read) -> Result<FullForm> {
    #[derive(serde::Deserialize)]
    struct Manifest {
        schema: String,
        degree: usize,
        axes: Vec<String>,
        components: Vec<Vec<usize>>,
    }
    let len = read_u32(r)? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    let manifest: Manifest = serde_json::from_slice(&buf)
        .map_err(|e| FolError::Invalid(format!("manifest decoding: {e}")))?;
    if manifest.schema != "folcoil-form-v1" {
        return Err(FolError::Invalid(format!(
            "unknown form schema `{}`",
            manifest.schema
        )));
    }
    let mut components = Vec::with_capacity(manifest.components.len());
    let mut grid: Option<GridRef> = None;
    for index in manifest.components {
        let field = read_field(r)?;
        if field.grid().axes() != manifest.axes.as_slice() {
            return Err(FolError::Invalid("component axes mismatch".to_string()));
        }
        grid.get_or_insert_with(|| field.grid().clone());
        components.push(FormComponent { index, field });
    }
    let grid = grid.ok_or_else(|| FolError::Invalid("form with no components".to_string()))?;
    FullForm::from_components(grid, manifest.degree, components)
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::max_abs_diff;

    #[test]
    fn field_binary_round_trip() {
        let g = PeriodicGrid::new(&["x", "q1"], &[16, 8]).unwrap();
        let f = ScalarField::from_fn(g, |c| c[0].sin() + 0.25 * c[1].cos());
        let mut buf = Vec::new();
        write_field(&f, &mut buf).unwrap();
        let back = read_field(&mut buf.as_slice()).unwrap();
        assert_eq!(back.grid().axes(), f.grid().axes());
        assert!(max_abs_diff(&back, &f) <= 0.0);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let g = PeriodicGrid::new(&["x"], &[8]).unwrap();
        let f = ScalarField::constant(g, 1.0);
        let mut buf = Vec::new();
        write_field_csv(&f, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x,value\n"));
        assert_eq!(text.lines().count(), 9);
    }
}
