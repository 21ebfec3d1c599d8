//! File formats: field dumps (.mvf), coefficient dumps (.cff), divergence-form
//! coefficients (.dfc), sorted-key JSON reports and RFC-4180 CSV tables.
//!
//! * `.mvf`: flat little-endian f64 node-major blade-minor values, with a
//!   JSON sidecar `<path>.json` carrying the grid, blade order, scalar type
//!   and the optional affine/polynomial part.
//! * `.cff`: same layout with one 2^n x 2^n row-major block per node, plus a
//!   JSON sidecar.
//! * `.dfc`: single file, one compact JSON header line, then flat
//!   little-endian f64 n x n blocks per node.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::algebra::{blade_count, Multivector};
use crate::coefficient::{CoefficientField, CoefficientStructure};
use crate::divform::DivFormCoefficient;
use crate::error::{Error, Result};
use crate::grid::{GridSpec, MultivectorField};
use crate::poly::PolyMultivector;

#[derive(Clone, Debug, Serialize, Deserialize)]
struct PolyTermRecord {
    exponents: Vec<u8>,
    coeffs: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct MvfHeader {
    dim: usize,
    points: usize,
    box_len: f64,
    /// Blade bitmasks in storage order.
    blade_order: Vec<u32>,
    scalar_type: String,
    affine_part: Option<Vec<PolyTermRecord>>,
}

fn poly_to_records(poly: &PolyMultivector) -> Vec<PolyTermRecord> {
    poly.terms()
        .map(|(idx, coeff)| PolyTermRecord {
            exponents: idx[..poly.dim()].to_vec(),
            coeffs: coeff.coeffs().to_vec(),
        })
        .collect()
}

fn poly_from_records(dim: usize, records: &[PolyTermRecord]) -> Result<PolyMultivector> {
    let mut poly = PolyMultivector::zero(dim);
    for rec in records {
        if rec.exponents.len() != dim || rec.coeffs.len() != blade_count(dim) {
            return Err(Error::Format("malformed polynomial term record".into()));
        }
        poly.add_term(
            {
                let mut idx = [0u8; crate::algebra::MAX_DIM];
                idx[..dim].copy_from_slice(&rec.exponents);
                idx
            },
            Multivector::from_coeffs(dim, rec.coeffs.clone()),
        );
    }
    Ok(poly)
}

fn write_f64_slice(path: &Path, values: &[f64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes)?;
    Ok(())
}

fn read_f64_vec(bytes: &[u8]) -> Result<Vec<f64>> {
    if bytes.len() % 8 != 0 {
        return Err(Error::Format("binary payload not a multiple of 8 bytes".into()));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    std::path::PathBuf::from(s)
}

/// Dump a field: binary values at `path`, JSON sidecar at `<path>.json`.
pub fn write_mvf(path: &Path, field: &MultivectorField) -> Result<()> {
    let spec = field.spec();
    let header = MvfHeader {
        dim: spec.dim,
        points: spec.points,
        box_len: spec.box_len,
        blade_order: (0..blade_count(spec.dim) as u32).collect(),
        scalar_type: "f64".into(),
        affine_part: field.poly().map(poly_to_records),
    };
    write_json_sorted(&sidecar_path(path), &header)?;
    write_f64_slice(path, field.values())
}

pub fn read_mvf(path: &Path) -> Result<MultivectorField> {
    let header: MvfHeader = serde_json::from_slice(&fs::read(sidecar_path(path))?)?;
    if header.scalar_type != "f64" {
        return Err(Error::Format(format!(
            "unsupported scalar type {}",
            header.scalar_type
        )));
    }
    let expected: Vec<u32> = (0..blade_count(header.dim) as u32).collect();
    if header.blade_order != expected {
        return Err(Error::Format("unexpected blade order".into()));
    }
    let spec = GridSpec::new(header.dim, header.points, header.box_len)?;
    let values = read_f64_vec(&fs::read(path)?)?;
    if values.len() != spec.node_count() * spec.n_blades() {
        return Err(Error::Format(format!(
            "value count {} does not match grid {}x{}",
            values.len(),
            spec.node_count(),
            spec.n_blades()
        )));
    }
    let poly = match &header.affine_part {
        Some(records) => Some(poly_from_records(header.dim, records)?),
        None => None,
    };
    Ok(MultivectorField::from_values(spec, values, poly))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct CffHeader {
    dim: usize,
    points: usize,
    box_len: f64,
    norm_bound: f64,
    structure: CoefficientStructure,
}

/// Dump a coefficient field: per-node row-major blocks plus a JSON sidecar.
pub fn write_cff(path: &Path, m: &CoefficientField) -> Result<()> {
    let spec = m.spec();
    let header = CffHeader {
        dim: spec.dim,
        points: spec.points,
        box_len: spec.box_len,
        norm_bound: m.norm_bound(),
        structure: m.structure(),
    };
    write_json_sorted(&sidecar_path(path), &header)?;
    write_f64_slice(path, m.blocks())
}

pub fn read_cff(path: &Path) -> Result<CoefficientField> {
    let header: CffHeader = serde_json::from_slice(&fs::read(sidecar_path(path))?)?;
    let spec = GridSpec::new(header.dim, header.points, header.box_len)?;
    let blocks = read_f64_vec(&fs::read(path)?)?;
    let nb = spec.n_blades();
    if blocks.len() != spec.node_count() * nb * nb {
        return Err(Error::Format("block count does not match grid".into()));
    }
    CoefficientField::from_blocks(spec, blocks, header.structure)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct DfcHeader {
    n: usize,
    #[serde(rename = "N")]
    points: usize,
    #[serde(rename = "L")]
    box_len: f64,
    lambda: f64,
    #[serde(rename = "Lambda")]
    lambda_upper: f64,
}

/// Single-file divergence-form coefficient: JSON header line + flat blocks.
pub fn write_dfc(path: &Path, a: &DivFormCoefficient) -> Result<()> {
    let spec = a.spec();
    let header = DfcHeader {
        n: spec.dim,
        points: spec.points,
        box_len: spec.box_len,
        lambda: a.lambda(),
        lambda_upper: a.lambda_upper(),
    };
    let mut file = fs::File::create(path)?;
    let header_value = serde_json::to_value(&header)?;
    serde_json::to_writer(&mut file, &header_value)?;
    file.write_all(b"\n")?;
    let n = spec.dim;
    let mut bytes = Vec::with_capacity(spec.node_count() * n * n * 8);
    for node in 0..spec.node_count() {
        let block = a.block_at(node);
        for r in 0..n {
            for c in 0..n {
                bytes.extend_from_slice(&block[(r, c)].to_le_bytes());
            }
        }
    }
    file.write_all(&bytes)?;
    Ok(())
}

pub fn read_dfc(path: &Path) -> Result<DivFormCoefficient> {
    let mut file = fs::File::open(path)?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes)?;
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Format("missing dfc header line".into()))?;
    let header: DfcHeader = serde_json::from_slice(&bytes[..newline])?;
    let spec = GridSpec::new(header.n, header.points, header.box_len)?;
    let blocks = read_f64_vec(&bytes[newline + 1..])?;
    let n = spec.dim;
    if blocks.len() != spec.node_count() * n * n {
        return Err(Error::Format("dfc block count does not match grid".into()));
    }
    DivFormCoefficient::from_blocks(spec, blocks, header.lambda, header.lambda_upper)
}

/// Write any serializable report as pretty JSON with sorted keys
/// (serialization goes through a `serde_json::Value`, whose object maps
/// are ordered).
pub fn write_json_sorted<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let value = serde_json::to_value(value)?;
    let mut out = serde_json::to_vec_pretty(&value)?;
    out.push(b'\n');
    fs::write(path, out)?;
    Ok(())
}

/// RFC-4180 CSV dump of a symmetric distance matrix with an index header.
pub fn write_distance_matrix_csv(path: &Path, dist: &[Vec<f64>]) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_path(path)
        .map_err(csv_err)?;
    let n = dist.len();
    let mut header = vec!["index".to_string()];
    header.extend((0..n).map(|j| j.to_string()));
    writer.write_record(&header).map_err(csv_err)?;
    for (j, row) in dist.iter().enumerate() {
        let mut rec = vec![j.to_string()];
        rec.extend(row.iter().map(|d| format!("{d:.17e}")));
        writer.write_record(&rec).map_err(csv_err)?;
    }
    writer.flush()?;
    Ok(())
}

/// Cross-validation rows as CSV.
pub fn write_cross_validation_csv(
    path: &Path,
    rows: &[crate::divform::CrossValidationRow],
) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_path(path)
        .map_err(csv_err)?;
    writer
        .write_record([
            "instance",
            "div_residual_hminus",
            "beltrami_residual",
            "cayley_norm",
            "iterations",
            "mean_flux",
        ])
        .map_err(csv_err)?;
    for row in rows {
        writer
            .write_record([
                row.instance.to_string(),
                format!("{:.17e}", row.div_residual_hminus),
                format!("{:.17e}", row.beltrami_residual),
                format!("{:.17e}", row.cayley_norm),
                row.iterations.to_string(),
                format!("{:.17e}", row.mean_flux),
            ])
            .map_err(csv_err)?;
    }
    writer.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(format!("csv: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BoxRegion;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mvf_roundtrip_preserves_field_and_poly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("field.mvf");
        let spec = GridSpec::two_pi(2, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let mut f = crate::grid::random_band_limited(spec, 2, &mut rng);
        f.set_poly(Some(crate::poly::PolyMultivector::scalar_monomial(
            2,
            &[1, 1],
            0.5,
        )));
        write_mvf(&path, &f).unwrap();
        let g = read_mvf(&path).unwrap();
        assert_eq!(f.spec(), g.spec());
        assert_eq!(f.values(), g.values());
        assert_eq!(f.poly(), g.poly());
    }

    #[test]
    fn cff_roundtrip_preserves_blocks() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("coef.cff");
        let spec = GridSpec::two_pi(2, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(62);
        let m = crate::coefficient::random_smooth_coefficient(
            spec,
            CoefficientStructure::GradePreserving,
            0.5,
            2,
            Some(BoxRegion::new(0.25, 0.75).unwrap()),
            &mut rng,
        )
        .unwrap();
        write_cff(&path, &m).unwrap();
        let back = read_cff(&path).unwrap();
        assert_eq!(m.blocks(), back.blocks());
        assert_eq!(m.structure(), back.structure());
        assert!((m.norm_bound() - back.norm_bound()).abs() < 1e-15);
    }

    #[test]
    fn dfc_roundtrip_preserves_coefficient() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("coef.dfc");
        let spec = GridSpec::two_pi(2, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(63);
        let a =
            crate::divform::random_symmetric_coefficient(spec, 0.5, 2.0, 2, &mut rng).unwrap();
        write_dfc(&path, &a).unwrap();
        let back = read_dfc(&path).unwrap();
        for node in [0usize, 17, 63] {
            assert!((a.block_at(node) - back.block_at(node)).norm() < 1e-15);
        }
        assert_eq!(a.lambda(), back.lambda());
        assert_eq!(a.lambda_upper(), back.lambda_upper());
    }

    #[test]
    fn json_reports_have_sorted_keys() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.json");
        #[derive(Serialize)]
        struct Demo {
            zebra: u32,
            alpha: u32,
            middle: u32,
        }
        write_json_sorted(
            &path,
            &Demo {
                zebra: 1,
                alpha: 2,
                middle: 3,
            },
        )
        .unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let a = text.find("alpha").unwrap();
        let m = text.find("middle").unwrap();
        let z = text.find("zebra").unwrap();
        assert!(a < m && m < z, "{text}");
    }
}
