//! On-disk format: a single JSON envelope for states, decompositions,
//! channels, nonnegative matrices and certificates.
//!
//! Complex entries are explicit `[re, im]` pairs so files stay diffable and
//! auditable. Serialization is deterministic: struct field order is fixed and
//! the metadata map is ordered.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::apps::{ChannelRep, NonnegMatrix};
use crate::cone::Cone2;
use crate::config::Config;
use crate::error::{Error, Result};
use crate::linalg::{entries_finite, CMat, C64};
use crate::schmidt::MpdoCores;
use crate::separator::SepCertificate;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    DenseState,
    Mpdo,
    Channel,
    NonnegMatrix,
    Certificate,
}

/// One complex number as `[re, im]`.
pub type CEntry = [f64; 2];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateFile {
    pub schema_version: String,
    pub kind: Kind,
    pub dims: Vec<usize>,
    pub payload: serde_json::Value,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct DensePayload {
    /// Row-major entries of the full matrix.
    entries: Vec<CEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct MpdoPayload {
    bond_dims: Vec<usize>,
    hermitian: bool,
    /// Per site, per bond pair (row-major), row-major matrix entries.
    cores: Vec<Vec<Vec<CEntry>>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ChannelPayload {
    d_in: usize,
    d_out: usize,
    terms: Vec<ChannelTerm>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ChannelTerm {
    p: Vec<CEntry>,
    q: Vec<CEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct NonnegPayload {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CertificatePayload {
    bond_dims: Vec<usize>,
    cores: Vec<Vec<Vec<CEntry>>>,
    residual: f64,
    min_factor_eig: f64,
    tolerances: Config,
    cone_metadata: Vec<Cone2>,
}

fn mat_to_entries(m: &CMat) -> Vec<CEntry> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push([m[(i, j)].re, m[(i, j)].im]);
        }
    }
    out
}

fn entries_to_mat(rows: usize, cols: usize, entries: &[CEntry]) -> Result<CMat> {
    if entries.len() != rows * cols {
        return Err(Error::Parse(format!(
            "{} entries for a {rows}x{cols} matrix",
            entries.len()
        )));
    }
    let m = CMat::from_fn(rows, cols, |i, j| {
        let [re, im] = entries[i * cols + j];
        C64::new(re, im)
    });
    if !entries_finite(&m) {
        return Err(Error::Parse("non-finite matrix entry".into()));
    }
    Ok(m)
}

fn check_schema(file: &StateFile, kind: Kind) -> Result<()> {
    if file.schema_version != SCHEMA_VERSION {
        return Err(Error::Parse(format!(
            "unrecognized schema version {:?}",
            file.schema_version
        )));
    }
    if file.kind != kind {
        return Err(Error::Parse(format!(
            "expected a {kind:?} file, found {:?}",
            file.kind
        )));
    }
    Ok(())
}

fn payload<T: serde::de::DeserializeOwned>(file: &StateFile) -> Result<T> {
    serde_json::from_value(file.payload.clone()).map_err(|e| Error::Parse(e.to_string()))
}

fn to_value<T: Serialize>(payload: &T) -> serde_json::Value {
    serde_json::to_value(payload).expect("payload serialization is infallible")
}

pub fn save(path: &Path, file: &StateFile) -> Result<()> {
    let text = serde_json::to_string_pretty(file).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn load(path: &Path) -> Result<StateFile> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))
}

pub fn dense_state_file(rho: &CMat, dims: &[usize], metadata: BTreeMap<String, String>) -> StateFile {
    StateFile {
        schema_version: SCHEMA_VERSION.into(),
        kind: Kind::DenseState,
        dims: dims.to_vec(),
        payload: to_value(&DensePayload {
            entries: mat_to_entries(rho),
        }),
        metadata,
    }
}

pub fn dense_from_file(file: &StateFile) -> Result<(CMat, Vec<usize>)> {
    check_schema(file, Kind::DenseState)?;
    let p: DensePayload = payload(file)?;
    let total: usize = file.dims.iter().product();
    if total == 0 {
        return Err(Error::Parse("empty dimension list".into()));
    }
    let rho = entries_to_mat(total, total, &p.entries)
        .map_err(|_| Error::DimensionMismatch(format!(
            "payload holds {} entries, dims {:?} require {}",
            p.entries.len(),
            file.dims,
            total * total
        )))?;
    Ok((rho, file.dims.clone()))
}

fn cores_to_payload(cores: &[Vec<CMat>]) -> Vec<Vec<Vec<CEntry>>> {
    cores
        .iter()
        .map(|site| site.iter().map(mat_to_entries).collect())
        .collect()
}

fn payload_to_cores(
    dims: &[usize],
    raw: &[Vec<Vec<CEntry>>],
) -> Result<Vec<Vec<CMat>>> {
    if raw.len() != dims.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} core sites for {} dims",
            raw.len(),
            dims.len()
        )));
    }
    raw.iter()
        .zip(dims)
        .map(|(site, &d)| site.iter().map(|e| entries_to_mat(d, d, e)).collect())
        .collect()
}

pub fn mpdo_file(cores: &MpdoCores, metadata: BTreeMap<String, String>) -> StateFile {
    StateFile {
        schema_version: SCHEMA_VERSION.into(),
        kind: Kind::Mpdo,
        dims: cores.dims.clone(),
        payload: to_value(&MpdoPayload {
            bond_dims: cores.bond_dims.clone(),
            hermitian: cores.hermitian,
            cores: cores_to_payload(&cores.cores),
        }),
        metadata,
    }
}

pub fn mpdo_from_file(file: &StateFile) -> Result<MpdoCores> {
    check_schema(file, Kind::Mpdo)?;
    let p: MpdoPayload = payload(file)?;
    let cores = payload_to_cores(&file.dims, &p.cores)?;
    MpdoCores::new(file.dims.clone(), p.bond_dims, cores, p.hermitian)
}

pub fn channel_file(ch: &ChannelRep, metadata: BTreeMap<String, String>) -> StateFile {
    StateFile {
        schema_version: SCHEMA_VERSION.into(),
        kind: Kind::Channel,
        dims: vec![ch.d_out, ch.d_in],
        payload: to_value(&ChannelPayload {
            d_in: ch.d_in,
            d_out: ch.d_out,
            terms: ch
                .terms
                .iter()
                .map(|(p, q)| ChannelTerm {
                    p: mat_to_entries(p),
                    q: mat_to_entries(q),
                })
                .collect(),
        }),
        metadata,
    }
}

pub fn channel_from_file(file: &StateFile) -> Result<ChannelRep> {
    check_schema(file, Kind::Channel)?;
    let p: ChannelPayload = payload(file)?;
    let terms = p
        .terms
        .iter()
        .map(|t| {
            Ok((
                entries_to_mat(p.d_out, p.d_out, &t.p)?,
                entries_to_mat(p.d_in, p.d_in, &t.q)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    ChannelRep::new(p.d_in, p.d_out, terms)
}

pub fn nonneg_file(m: &NonnegMatrix, metadata: BTreeMap<String, String>) -> StateFile {
    StateFile {
        schema_version: SCHEMA_VERSION.into(),
        kind: Kind::NonnegMatrix,
        dims: vec![m.rows, m.cols],
        payload: to_value(&NonnegPayload {
            rows: m.rows,
            cols: m.cols,
            entries: m.entries.clone(),
        }),
        metadata,
    }
}

pub fn nonneg_from_file(file: &StateFile) -> Result<NonnegMatrix> {
    check_schema(file, Kind::NonnegMatrix)?;
    let p: NonnegPayload = payload(file)?;
    NonnegMatrix::new(p.rows, p.cols, p.entries)
}

pub fn certificate_file(cert: &SepCertificate, metadata: BTreeMap<String, String>) -> StateFile {
    StateFile {
        schema_version: SCHEMA_VERSION.into(),
        kind: Kind::Certificate,
        dims: cert.decomposition.dims.clone(),
        payload: to_value(&CertificatePayload {
            bond_dims: cert.decomposition.bond_dims.clone(),
            cores: cores_to_payload(&cert.decomposition.cores),
            residual: cert.residual,
            min_factor_eig: cert.min_factor_eig,
            tolerances: cert.tolerances.clone(),
            cone_metadata: cert.cone_metadata.clone(),
        }),
        metadata,
    }
}

pub fn certificate_from_file(file: &StateFile) -> Result<SepCertificate> {
    check_schema(file, Kind::Certificate)?;
    let p: CertificatePayload = payload(file)?;
    let cores = payload_to_cores(&file.dims, &p.cores)?;
    let decomposition = MpdoCores::new(file.dims.clone(), p.bond_dims, cores, true)?;
    Ok(SepCertificate {
        decomposition,
        residual: p.residual,
        min_factor_eig: p.min_factor_eig,
        tolerances: p.tolerances,
        cone_metadata: p.cone_metadata,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{ONE, ZERO};
    use crate::separator::separate_bipartite;
    use tempfile::tempdir;

    fn example1() -> CMat {
        let sx = CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
        (CMat::identity(4, 4) + sx.kronecker(&sx)) * C64::new(0.5, 0.0)
    }

    #[test]
    fn dense_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("state.json");
        let file = dense_state_file(&example1(), &[2, 2], BTreeMap::new());
        save(&path, &file).unwrap();
        let back = load(&path).unwrap();
        let (rho, dims) = dense_from_file(&back).unwrap();
        assert_eq!(dims, vec![2, 2]);
        assert!((rho - example1()).norm() == 0.0);
    }

    #[test]
    fn certificate_round_trip_and_determinism() {
        let cfg = Config::default();
        let cert = separate_bipartite(&example1(), 2, 2, &cfg).unwrap();
        let dir = tempdir().unwrap();
        let p1 = dir.path().join("a.json");
        let p2 = dir.path().join("b.json");
        save(&p1, &certificate_file(&cert, BTreeMap::new())).unwrap();
        save(&p2, &certificate_file(&cert, BTreeMap::new())).unwrap();
        assert_eq!(
            std::fs::read(&p1).unwrap(),
            std::fs::read(&p2).unwrap(),
            "serialization must be byte-identical"
        );
        let back = certificate_from_file(&load(&p1).unwrap()).unwrap();
        assert_eq!(back.residual, cert.residual);
        assert_eq!(back.decomposition.bond_dims, cert.decomposition.bond_dims);
        assert_eq!(back.cone_metadata.len(), 1);
    }

    #[test]
    fn wrong_kind_is_a_parse_error() {
        let file = dense_state_file(&example1(), &[2, 2], BTreeMap::new());
        assert!(matches!(nonneg_from_file(&file), Err(Error::Parse(_))));
    }

    #[test]
    fn wrong_schema_version_rejected() {
        let mut file = dense_state_file(&example1(), &[2, 2], BTreeMap::new());
        file.schema_version = "0".into();
        assert!(matches!(dense_from_file(&file), Err(Error::Parse(_))));
    }

    #[test]
    fn entry_count_mismatch_is_dimension_error() {
        let mut file = dense_state_file(&example1(), &[2, 2], BTreeMap::new());
        file.dims = vec![2, 3];
        assert!(matches!(
            dense_from_file(&file),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn nonneg_round_trip() {
        let m = NonnegMatrix::new(2, 3, vec![1.0, 0.5, 0.0, 2.0, 0.0, 3.0]).unwrap();
        let file = nonneg_file(&m, BTreeMap::new());
        let back = nonneg_from_file(&file).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn channel_round_trip() {
        let sx = CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
        let ch = ChannelRep::new(
            2,
            2,
            vec![
                (CMat::identity(2, 2), CMat::identity(2, 2)),
                (sx.clone(), sx.clone()),
            ],
        )
        .unwrap();
        let back = channel_from_file(&channel_file(&ch, BTreeMap::new())).unwrap();
        assert_eq!(back.terms.len(), 2);
        assert!((&back.terms[1].0 - sx).norm() == 0.0);
    }
}
