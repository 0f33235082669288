//! `.fld` field snapshots.
//!
//! Layout: one line of JSON header terminated by `\n`, followed by the raw
//! payload of little-endian `f64` pairs `(re, im)`, node-major, row-major
//! within each matrix.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{GridField, MatrixField, RealField, ScalarField, SurfaceDomain};
use crate::error::{Error, Result};

pub const FORMAT: &str = "higgslab-fld";
pub const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueKind {
    Scalar,
    /// `dim` complex numbers per node.
    Vector,
    /// `dim x dim` complex matrix per node.
    Matrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub format: String,
    pub version: u32,
    pub domain: SurfaceDomain,
    pub value_kind: ValueKind,
    pub dim: usize,
    pub count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl Header {
    fn per_node(&self) -> usize {
        match self.value_kind {
            ValueKind::Scalar => 1,
            ValueKind::Vector => self.dim,
            ValueKind::Matrix => self.dim * self.dim,
        }
    }

    pub fn payload_bytes(&self) -> usize {
        self.count * self.per_node() * 16
    }
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub header: Header,
    pub data: Vec<Complex64>,
}

fn header(domain: &SurfaceDomain, kind: ValueKind, dim: usize, label: Option<&str>) -> Header {
    Header {
        format: FORMAT.into(),
        version: VERSION,
        domain: *domain,
        value_kind: kind,
        dim,
        count: domain.node_count(),
        label: label.map(str::to_string),
    }
}

pub fn encode(header: &Header, data: &[Complex64]) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec(header)?;
    out.push(b'\n');
    out.reserve(data.len() * 16);
    for z in data {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<Snapshot> {
    let nl = bytes
        .iter()
        .position(|b| *b == b'\n')
        .ok_or_else(|| Error::Snapshot("missing header line".into()))?;
    let header: Header = serde_json::from_slice(&bytes[..nl])
        .map_err(|e| Error::Snapshot(format!("bad header: {e}")))?;
    if header.format != FORMAT {
        return Err(Error::Snapshot(format!("unknown format tag {:?}", header.format)));
    }
    if header.version != VERSION {
        return Err(Error::Snapshot(format!("unsupported version {}", header.version)));
    }
    if header.count != header.domain.node_count() {
        return Err(Error::Snapshot(format!(
            "header declares {} nodes but domain grid {}x{} has {}",
            header.count,
            header.domain.side(),
            header.domain.side(),
            header.domain.node_count()
        )));
    }
    let payload = &bytes[nl + 1..];
    let expected = header.payload_bytes();
    if payload.len() < expected {
        return Err(Error::Truncated {
            expected,
            found: payload.len(),
            missing: expected - payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(Error::Snapshot(format!(
            "{} trailing bytes after payload of {expected}",
            payload.len() - expected
        )));
    }
    let data = payload
        .chunks_exact(16)
        .map(|ch| {
            let re = f64::from_le_bytes(ch[..8].try_into().unwrap());
            let im = f64::from_le_bytes(ch[8..].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect();
    Ok(Snapshot { header, data })
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}

pub fn write_scalar(path: &Path, f: &ScalarField, label: Option<&str>) -> Result<()> {
    let h = header(&f.domain, ValueKind::Scalar, 1, label);
    write_bytes(path, &encode(&h, &f.values)?)
}

pub fn write_real(path: &Path, f: &RealField, label: Option<&str>) -> Result<()> {
    write_scalar(path, &f.to_complex(), label)
}

pub fn write_matrix(path: &Path, f: &MatrixField, label: Option<&str>) -> Result<()> {
    let d = f.dim();
    let h = header(&f.domain, ValueKind::Matrix, d, label);
    let mut data = Vec::with_capacity(f.values.len() * d * d);
    for m in &f.values {
        for i in 0..d {
            for j in 0..d {
                data.push(m[(i, j)]);
            }
        }
    }
    write_bytes(path, &encode(&h, &data)?)
}

/// Several real fields of equal domain stored as one vector-valued snapshot.
pub fn write_components(path: &Path, comps: &[RealField], label: Option<&str>) -> Result<()> {
    let domain = comps
        .first()
        .ok_or_else(|| Error::Snapshot("no components".into()))?
        .domain;
    for c in comps {
        if c.domain != domain {
            return Err(Error::DomainMismatch);
        }
    }
    let h = header(&domain, ValueKind::Vector, comps.len(), label);
    let mut data = Vec::with_capacity(domain.node_count() * comps.len());
    for node in 0..domain.node_count() {
        for c in comps {
            data.push(Complex64::new(c.values[node], 0.0));
        }
    }
    write_bytes(path, &encode(&h, &data)?)
}

pub fn read(path: &Path) -> Result<Snapshot> {
    let bytes = std::fs::read(path)?;
    decode(&bytes).map_err(|e| match e {
        Error::Snapshot(msg) => Error::Snapshot(format!("{}: {msg}", path.display())),
        other => other,
    })
}

impl Snapshot {
    fn expect(&self, kind: ValueKind) -> Result<()> {
        if self.header.value_kind != kind {
            return Err(Error::Snapshot(format!(
                "expected {kind:?} values, found {:?}",
                self.header.value_kind
            )));
        }
        Ok(())
    }

    pub fn into_scalar(self) -> Result<ScalarField> {
        self.expect(ValueKind::Scalar)?;
        GridField::new(self.header.domain, self.data)
    }

    /// Real part; rejects non-finite values and non-zero imaginary parts.
    pub fn into_real(self) -> Result<RealField> {
        let f = self.into_scalar()?;
        for (i, z) in f.values.iter().enumerate() {
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::Snapshot(format!("non-finite value at node {i}")));
            }
            if z.im != 0.0 {
                return Err(Error::Snapshot(format!("complex value at node {i} in a real field")));
            }
        }
        Ok(f.re())
    }

    pub fn into_matrix(self) -> Result<MatrixField> {
        self.expect(ValueKind::Matrix)?;
        let d = self.header.dim;
        let values = self
            .data
            .chunks_exact(d * d)
            .map(|ch| DMatrix::from_fn(d, d, |i, j| ch[i * d + j]))
            .collect();
        GridField::new(self.header.domain, values)
    }

    pub fn into_components(self) -> Result<Vec<RealField>> {
        self.expect(ValueKind::Vector)?;
        let d = self.header.dim;
        let domain = self.header.domain;
        let mut comps = vec![Vec::with_capacity(domain.node_count()); d];
        for ch in self.data.chunks_exact(d) {
            for (k, z) in ch.iter().enumerate() {
                comps[k].push(z.re);
            }
        }
        comps.into_iter().map(|v| GridField::new(domain, v)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use proptest::prelude::*;

    fn sample() -> (Header, Vec<Complex64>) {
        let d = SurfaceDomain::patch(16, 1.5).unwrap();
        let h = header(&d, ValueKind::Scalar, 1, Some("z"));
        let data = (0..d.node_count()).map(|i| d.coord(i)).collect();
        (h, data)
    }

    #[test]
    fn truncated_names_missing_bytes() {
        let (h, data) = sample();
        let mut bytes = encode(&h, &data).unwrap();
        bytes.truncate(bytes.len() - 20);
        match decode(&bytes) {
            Err(Error::Truncated { missing, .. }) => assert_eq!(missing, 20),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn header_grid_mismatch_names_shapes() {
        let (mut h, data) = sample();
        h.count = 100;
        let bytes = encode(&h, &data).unwrap();
        let err = decode(&bytes).unwrap_err().to_string();
        assert!(err.contains("100") && err.contains("17x17") && err.contains("289"), "{err}");
    }

    #[test]
    fn matrix_layout_is_row_major() {
        let d = SurfaceDomain::square_torus(16).unwrap();
        let m = MatrixField::constant(d, DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0), c(4.0, 0.0)]));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.fld");
        write_matrix(&p, &m, None).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        let nl = bytes.iter().position(|b| *b == b'\n').unwrap();
        let second = f64::from_le_bytes(bytes[nl + 17..nl + 25].try_into().unwrap());
        assert_eq!(second, 2.0);
        assert_eq!(read(&p).unwrap().into_matrix().unwrap(), m);
    }

    proptest! {
        #[test]
        fn roundtrip_scalar(vals in proptest::collection::vec((-1e6f64..1e6, -1e6f64..1e6), 256)) {
            let d = SurfaceDomain::square_torus(16).unwrap();
            let f = ScalarField::new(d, vals.iter().map(|(a, b)| c(*a, *b)).collect()).unwrap();
            let h = header(&d, ValueKind::Scalar, 1, None);
            let back = decode(&encode(&h, &f.values).unwrap()).unwrap().into_scalar().unwrap();
            prop_assert_eq!(back, f);
        }
    }
}
