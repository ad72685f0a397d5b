//! Dataset manifests, CSV matrices, and the binary parameter file.
//!
//! # Parameter file layout
//!
//! ```text
//! NCDD-PARAMS 1\n
//! {JSON header: model spec, seed, free-variable count, group sizes}\n
//! <n_free little-endian f64 values>
//! ```
//!
//! The header is written with a fixed field order, so identical parameters
//! always produce identical bytes.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngSeed;
use crate::training::{ModelSpec, TrainableParameters};
use crate::types::{GraphSignalSample, SimilarityMatrix, Topology};

pub const MANIFEST_VERSION: &str = "ncdd-dataset/1";
pub const PARAMS_MAGIC: &str = "NCDD-PARAMS";
pub const PARAMS_VERSION: u32 = 1;

fn integral(x: f64, what: &str) -> Result<usize> {
    let r = x.round();
    if (x - r).abs() > 1e-9 * x.abs().max(1.0) || r < 0.0 {
        return Err(Error::Config(format!("{what} = {x} is not a whole number of samples")));
    }
    Ok(r as usize)
}

/// Cuts an `N x L_total` recording into windows of `window_s` seconds that
/// overlap by `overlap_s`. Timestamps are window start times in seconds.
pub fn window_recording(
    recording: &Array2<f64>,
    window_s: f64,
    overlap_s: f64,
    rate_hz: f64,
) -> Result<Vec<GraphSignalSample>> {
    if !(rate_hz > 0.0) || !(overlap_s >= 0.0) || !(window_s > overlap_s) {
        return Err(Error::Config(format!(
            "need window_s > overlap_s >= 0 and rate_hz > 0, got {window_s}, {overlap_s}, {rate_hz}"
        )));
    }
    let t = integral(window_s * rate_hz, "window length")?;
    let stride = integral((window_s - overlap_s) * rate_hz, "window stride")?;
    let total = recording.ncols();
    let mut out = Vec::new();
    let mut start = 0;
    while start + t <= total {
        let values = recording.slice(ndarray::s![.., start..start + t]).to_owned();
        out.push(GraphSignalSample::new(values, out.len()).with_timestamp(start as f64 / rate_hz));
        start += stride;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative paths resolve against the manifest's directory.
    pub path: PathBuf,
    #[serde(default)]
    pub label: Option<u8>,
    #[serde(default)]
    pub timestamp: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: String,
    pub n_nodes: usize,
    pub t_len: usize,
    pub sampling_rate_hz: f64,
    pub entries: Vec<ManifestEntry>,
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(bytes).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = read_to_string(path)?;
    let manifest: DatasetManifest = serde_json::from_str(&text).map_err(|e| {
        Error::parse(format!("{}:{}:{}", path.display(), e.line(), e.column()), e.to_string())
    })?;
    if manifest.version != MANIFEST_VERSION {
        return Err(Error::VersionMismatch {
            expected: MANIFEST_VERSION.into(),
            found: manifest.version,
        });
    }
    Ok(manifest)
}

/// Reads every sample named by the manifest, in parallel, checking shapes.
pub fn read_dataset(manifest_path: &Path) -> Result<(DatasetManifest, Vec<GraphSignalSample>)> {
    let manifest = read_manifest(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new(""));
    let samples = manifest
        .entries
        .par_iter()
        .enumerate()
        .map(|(i, entry)| {
            let path = base.join(&entry.path);
            if !path.is_file() {
                return Err(Error::parse(
                    path.display().to_string(),
                    "file referenced by the manifest does not exist",
                ));
            }
            let values = read_matrix_csv(&path)?;
            if values.dim() != (manifest.n_nodes, manifest.t_len) {
                return Err(Error::parse(
                    path.display().to_string(),
                    format!(
                        "expected {} x {} values, found {} x {}",
                        manifest.n_nodes,
                        manifest.t_len,
                        values.nrows(),
                        values.ncols()
                    ),
                ));
            }
            let mut s = GraphSignalSample::new(values, i);
            s.label = entry.label;
            s.timestamp = entry.timestamp;
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, samples))
}

/// Writes `samples/sample_<index>.csv` files and `manifest.json` under `dir`.
/// Returns the manifest path.
pub fn write_dataset(dir: &Path, samples: &[GraphSignalSample], sampling_rate_hz: f64) -> Result<PathBuf> {
    let first = samples
        .first()
        .ok_or_else(|| Error::PreconditionViolated("no samples to write".into()))?;
    let (n_nodes, t_len) = (first.n_nodes(), first.t_len());
    let entries = samples
        .par_iter()
        .map(|s| {
            let rel = PathBuf::from("samples").join(format!("sample_{:06}.csv", s.index));
            write_matrix_csv(&dir.join(&rel), &s.values)?;
            Ok(ManifestEntry {
                path: rel,
                label: s.label,
                timestamp: s.timestamp,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = DatasetManifest {
        version: MANIFEST_VERSION.into(),
        n_nodes,
        t_len,
        sampling_rate_hz,
        entries,
    };
    let path = dir.join("manifest.json");
    write_json(&path, &manifest)?;
    Ok(path)
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Numerical(format!("cannot serialize {}: {e}", path.display())))?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| {
        Error::parse(format!("{}:{}:{}", path.display(), e.line(), e.column()), e.to_string())
    })
}

/// One row per line, comma-separated, shortest round-trip float formatting.
pub fn write_matrix_csv(path: &Path, m: &Array2<f64>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(create(path)?);
    for row in m.rows() {
        w.write_record(row.iter().map(|x| x.to_string()))
            .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_matrix_csv(path: &Path) -> Result<Array2<f64>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for record in r.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::parse(format!("{}:{line}", path.display()), e.to_string())
        })?;
        let line = record.position().map_or(rows as u64 + 1, |p| p.line());
        if *cols.get_or_insert(record.len()) != record.len() {
            return Err(Error::parse(
                format!("{}:{line}", path.display()),
                format!("expected {} fields, found {}", cols.unwrap_or(0), record.len()),
            ));
        }
        for (c, field) in record.iter().enumerate() {
            let x: f64 = field.parse().map_err(|_| {
                Error::parse(
                    format!("{}:{line}:{}", path.display(), c + 1),
                    format!("'{field}' is not a number"),
                )
            })?;
            values.push(x);
        }
        rows += 1;
    }
    let cols = cols.unwrap_or(0);
    if rows == 0 || cols == 0 {
        return Err(Error::parse(path.display().to_string(), "empty matrix"));
    }
    Ok(Array2::from_shape_vec((rows, cols), values).expect("rectangular by construction"))
}

pub fn write_similarity(s: &SimilarityMatrix, path: &Path) -> Result<()> {
    write_matrix_csv(path, s.values())
}

pub fn read_similarity(path: &Path) -> Result<SimilarityMatrix> {
    SimilarityMatrix::new(read_matrix_csv(path)?)
}

/// File name of the similarity matrix of the sample with the given index.
pub fn similarity_file_name(index: usize) -> String {
    format!("similarity_{index:06}.csv")
}

/// Writes one matrix per sample into `dir`, named by sample index.
pub fn write_similarities(dir: &Path, samples: &[GraphSignalSample], similarities: &[SimilarityMatrix]) -> Result<()> {
    if samples.len() != similarities.len() {
        return Err(Error::dims(
            format!("{} similarity matrices", samples.len()),
            similarities.len(),
        ));
    }
    samples
        .par_iter()
        .zip(similarities)
        .try_for_each(|(sample, s)| write_similarity(s, &dir.join(similarity_file_name(sample.index))))
}

/// Reads the matrix of every sample from `dir`, in sample order.
pub fn read_similarities(dir: &Path, samples: &[GraphSignalSample]) -> Result<Vec<SimilarityMatrix>> {
    samples
        .par_iter()
        .map(|sample| {
            let path = dir.join(similarity_file_name(sample.index));
            if !path.is_file() {
                return Err(Error::parse(path.display().to_string(), "similarity file does not exist"));
            }
            read_similarity(&path)
        })
        .collect()
}

/// One classified test sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub index: usize,
    pub label: u8,
    pub score: f64,
}

/// CSV with an `index,label,score` header.
pub fn write_scores(path: &Path, rows: &[ScoreRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for row in rows {
        w.serialize(row)
            .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_adjacency(topology: &Topology, path: &Path) -> Result<()> {
    write_matrix_csv(path, &topology.adjacency().mapv(f64::from))
}

pub fn read_adjacency(path: &Path) -> Result<Topology> {
    let m = read_matrix_csv(path)?;
    if let Some(((r, c), x)) = m.indexed_iter().find(|(_, &x)| x != 0.0 && x != 1.0) {
        return Err(Error::parse(
            format!("{}:{}:{}", path.display(), r + 1, c + 1),
            format!("adjacency entries must be 0 or 1, found {x}"),
        ));
    }
    Topology::from_adjacency(&m.mapv(|x| x as u8))
}

#[derive(Debug, Serialize, Deserialize)]
struct ParamsHeader {
    spec: ModelSpec,
    seed: RngSeed,
    n_free: usize,
    groups: Vec<(String, usize)>,
}

pub fn write_parameters(params: &TrainableParameters, path: &Path) -> Result<()> {
    let layout = params.layout()?;
    let header = ParamsHeader {
        spec: params.spec,
        seed: params.seed,
        n_free: params.free.len(),
        groups: layout.groups(),
    };
    let json = serde_json::to_string(&header)
        .map_err(|e| Error::Numerical(format!("cannot serialize parameter header: {e}")))?;
    let mut bytes = format!("{PARAMS_MAGIC} {PARAMS_VERSION}\n{json}\n").into_bytes();
    bytes.reserve(params.free.len() * 8);
    for x in &params.free {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
    write_bytes(path, &bytes)
}

pub fn read_parameters(path: &Path) -> Result<TrainableParameters> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut magic = String::new();
    let expected = format!("{PARAMS_MAGIC} {PARAMS_VERSION}");
    let found = match r.read_line(&mut magic) {
        Ok(_) => magic.trim_end().to_string(),
        Err(_) => "<unreadable header>".to_string(),
    };
    if found != expected {
        return Err(Error::VersionMismatch { expected, found });
    }
    let mut header_line = String::new();
    r.read_line(&mut header_line).map_err(|e| Error::io(path, e))?;
    let header: ParamsHeader = serde_json::from_str(&header_line)
        .map_err(|e| Error::parse(format!("{}:2:{}", path.display(), e.column()), e.to_string()))?;
    let mut body = Vec::new();
    r.read_to_end(&mut body).map_err(|e| Error::io(path, e))?;
    if body.len() != header.n_free * 8 {
        return Err(Error::parse(
            path.display().to_string(),
            format!("expected {} bytes of parameters, found {}", header.n_free * 8, body.len()),
        ));
    }
    let free: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let params = TrainableParameters {
        spec: header.spec,
        free,
        seed: header.seed,
    };
    let layout = params.layout()?;
    if layout.n_free() != header.n_free || layout.groups() != header.groups {
        return Err(Error::parse(
            path.display().to_string(),
            "parameter groups do not match the stored model spec",
        ));
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{Activation, AggregatorKind};
    use crate::features::FeatureConfig;
    use crate::training::ParameterMode;
    use rand::Rng;

    fn random_matrix(n: usize, m: usize, seed: u64) -> Array2<f64> {
        let mut rng = RngSeed(seed).rng();
        Array2::from_shape_fn((n, m), |_| rng.random_range(-1e3..1e3) * rng.random_range(0.0..1.0f64).powi(7))
    }

    #[test]
    fn windowing_examples() {
        let rec = Array2::from_shape_fn((2, 256 * 10), |(u, t)| (u * 10000 + t) as f64);
        let w = window_recording(&rec, 2.5, 1.5, 256.0).unwrap();
        assert_eq!(w[0].t_len(), 640);
        assert_eq!(w[1].values[[0, 0]], 256.0);
        assert_eq!(w.len(), (2560 - 640) / 256 + 1);
        assert_eq!(w[3].timestamp, Some(3.0));
        let disjoint = window_recording(&rec, 2.5, 0.0, 256.0).unwrap();
        assert_eq!(disjoint[1].values[[0, 0]], 640.0);
        assert!(window_recording(&rec.slice(ndarray::s![.., ..100]).to_owned(), 2.5, 1.5, 256.0)
            .unwrap()
            .is_empty());
        assert!(matches!(window_recording(&rec, 1.0, 0.5, 255.0), Err(Error::Config(_))));
        assert!(window_recording(&rec, 1.0, 1.0, 256.0).is_err());
    }

    #[test]
    fn matrix_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let m = random_matrix(5, 7, 1);
        let p = dir.path().join("m.csv");
        write_matrix_csv(&p, &m).unwrap();
        assert_eq!(read_matrix_csv(&p).unwrap(), m);
    }

    #[test]
    fn similarity_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let a = random_matrix(6, 6, 2);
        let s = SimilarityMatrix::new(&a + &a.t()).unwrap();
        let p = dir.path().join("s.csv");
        write_similarity(&s, &p).unwrap();
        let back = read_similarity(&p).unwrap();
        let diff = (back.values() - s.values()).mapv(f64::abs).fold(0.0f64, |a, &b| a.max(b));
        assert!(diff < 1e-12);
    }

    #[test]
    fn parse_errors_name_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        fs::write(&p, "1,2\n3,x\n").unwrap();
        let err = read_matrix_csv(&p).unwrap_err().to_string();
        assert!(err.contains("bad.csv:2"), "{err}");
        fs::write(&p, "1,2\n3\n").unwrap();
        assert!(matches!(read_matrix_csv(&p), Err(Error::Parse { .. })));
    }

    #[test]
    fn dataset_round_trip_and_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        let samples: Vec<GraphSignalSample> = (0..4)
            .map(|i| {
                GraphSignalSample::new(random_matrix(3, 8, i as u64), i)
                    .with_label((i % 2) as u8)
                    .with_timestamp(i as f64 * 0.5)
            })
            .collect();
        let manifest = write_dataset(dir.path(), &samples, 64.0).unwrap();
        let (m, back) = read_dataset(&manifest).unwrap();
        assert_eq!(m.entries[0].path, PathBuf::from("samples/sample_000000.csv"));
        assert_eq!(back, samples);

        fs::remove_file(dir.path().join("samples/sample_000002.csv")).unwrap();
        let err = read_dataset(&manifest).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
        assert!(err.to_string().contains("sample_000002.csv"));
    }

    #[test]
    fn manifest_version_checked() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("manifest.json");
        fs::write(&p, r#"{"version":"other/9","n_nodes":1,"t_len":1,"sampling_rate_hz":1.0,"entries":[]}"#).unwrap();
        assert!(matches!(read_manifest(&p), Err(Error::VersionMismatch { .. })));
    }

    fn params() -> TrainableParameters {
        let spec = ModelSpec {
            feature: FeatureConfig::frequency(2, 5, 64.0),
            t_len: 20,
            k: 1,
            aggregator: AggregatorKind::Max,
            activation: Activation::Softmax,
            theta_mode: ParameterMode::DiagonalRepeated,
            psi_mode: ParameterMode::Full,
            cn_epsilon: 1e-12,
            theta_scale: 0.3,
        };
        let mut p = TrainableParameters::initialize(spec, RngSeed(4)).unwrap();
        p.free[0] = std::f64::consts::PI * 1e-300;
        p
    }

    #[test]
    fn parameter_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = params();
        let path = dir.path().join("p.bin");
        write_parameters(&p, &path).unwrap();
        let back = read_parameters(&path).unwrap();
        assert_eq!(back, p);
        let again = dir.path().join("q.bin");
        write_parameters(&back, &again).unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(&again).unwrap());
    }

    #[test]
    fn corrupt_parameter_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.bin");
        write_parameters(&params(), &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[12] = b'7';
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_parameters(&path), Err(Error::VersionMismatch { .. })));
        fs::write(&path, b"garbage").unwrap();
        assert!(matches!(read_parameters(&path), Err(Error::VersionMismatch { .. })));
    }

    #[test]
    fn truncated_parameter_body() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.bin");
        write_parameters(&params(), &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(read_parameters(&path), Err(Error::Parse { .. })));
    }

    #[test]
    fn adjacency_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let t = Topology::from_edges(4, &[(0, 3), (1, 2)]).unwrap();
        let path = dir.path().join("a.csv");
        write_adjacency(&t, &path).unwrap();
        assert_eq!(read_adjacency(&path).unwrap(), t);
        fs::write(&path, "1,2\n2,1\n").unwrap();
        assert!(matches!(read_adjacency(&path), Err(Error::Parse { .. })));
    }

    #[test]
    fn similarity_directory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let samples: Vec<GraphSignalSample> = [3, 12]
            .iter()
            .map(|&i| GraphSignalSample::new(Array2::zeros((4, 4)), i))
            .collect();
        let sims: Vec<SimilarityMatrix> = (0..2)
            .map(|k| {
                let a = random_matrix(4, 4, 10 + k);
                SimilarityMatrix::new(&a + &a.t()).unwrap()
            })
            .collect();
        write_similarities(dir.path(), &samples, &sims).unwrap();
        assert!(dir.path().join("similarity_000012.csv").is_file());
        assert_eq!(read_similarities(dir.path(), &samples).unwrap(), sims);
        let missing = vec![GraphSignalSample::new(Array2::zeros((4, 4)), 5)];
        assert!(matches!(read_similarities(dir.path(), &missing), Err(Error::Parse { .. })));
    }

    #[test]
    fn scores_have_a_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("scores.csv");
        write_scores(&p, &[ScoreRow { index: 4, label: 1, score: 0.75 }]).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "index,label,score\n4,1,0.75\n");
    }
}
