//! Model-state serialization: a single self-describing text file holding the
//! hyperparameters, every cluster feature, and every stored point with its
//! assignment, so that chunks may arrive across process runs.
//!
//! Layout: a magic/version line, a checksum line covering the rest of the
//! file, header fields, one record per cluster in (id, n, m, m_new, Q, SS)
//! order, then one CSV-style line per point. Numbers are serialized as
//! shortest round-trip decimals, so save -> load -> save is byte-identical.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::cf::{ClusterFeature, HyperParams};
use crate::engine::{DriftMode, Model};
use crate::error::{Error, Result};
use crate::store::{ClusterId, Point, PointId, PointStore};
use crate::vecmath::Vector;

const MAGIC: &str = "cfica-state";
const VERSION: u32 = 1;

fn snapshot_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Snapshot {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn write_vector(out: &mut String, tag: &str, v: &Vector) {
    out.push_str(tag);
    for c in v.components() {
        write!(out, " {c}").unwrap();
    }
    out.push('\n');
}

fn render_body(model: &Model, store: &PointStore) -> Result<String> {
    let mut out = String::new();
    writeln!(out, "dim {}", model.dimension()).unwrap();
    let p = model.params();
    writeln!(
        out,
        "params k={} p={} lambda={} theta={} delta={}",
        p.k, p.p, p.lambda, p.theta, p.delta
    )
    .unwrap();
    writeln!(out, "drift_mode {}", model.drift_mode().as_str()).unwrap();
    writeln!(out, "generation {}", model.generation()).unwrap();
    writeln!(out, "next_cluster_id {}", model.next_cluster_id()).unwrap();
    writeln!(out, "clusters {}", model.active_count()).unwrap();
    for cf in model.clusters() {
        writeln!(out, "cluster {} {}", cf.cluster_id(), cf.n()).unwrap();
        write_vector(&mut out, "m", cf.mean_snapshot());
        write_vector(&mut out, "m_new", cf.mean_running());
        writeln!(out, "q {}", cf.farthest_points().len()).unwrap();
        for (pid, v) in cf.farthest_points() {
            write_vector(&mut out, &format!("qpt {pid}"), v);
        }
        write_vector(&mut out, "ss", cf.squared_sum());
    }
    writeln!(out, "points {}", store.len()).unwrap();
    for (pid, sp) in store.iter() {
        let label = sp.label.as_deref().unwrap_or("");
        if label.contains(',') || label.contains('\n') {
            return Err(Error::Corrupt(format!(
                "label of point {pid} contains a delimiter and cannot be serialized"
            )));
        }
        write!(out, "{},{},{label}", pid, sp.cluster).unwrap();
        for c in sp.features.components() {
            write!(out, ",{c}").unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

/// Writes the full model + store state atomically (temp file then rename).
pub fn save_snapshot(path: &Path, model: &Model, store: &PointStore) -> Result<()> {
    model.check_consistency(store)?;
    let body = render_body(model, store)?;
    let digest = Sha256::digest(body.as_bytes());
    let content = format!("{MAGIC} {VERSION}\nchecksum {digest:x}\n{body}");

    let dir = path.parent().filter(|d| !d.as_os_str().is_empty());
    let tmp: PathBuf = match dir {
        Some(d) => d.join(format!(
            ".{}.tmp",
            path.file_name().unwrap().to_string_lossy()
        )),
        None => PathBuf::from(format!(".{}.tmp", path.to_string_lossy())),
    };
    fs::write(&tmp, content)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

struct LineReader<'a> {
    lines: std::str::Lines<'a>,
    line_no: usize,
    path: &'a Path,
}

impl<'a> LineReader<'a> {
    fn next_line(&mut self, section: &str) -> Result<&'a str> {
        self.line_no += 1;
        self.lines
            .next()
            .ok_or_else(|| snapshot_err(self.path, format!("truncated in section '{section}'")))
    }

    fn err(&self, section: &str, detail: impl std::fmt::Display) -> Error {
        snapshot_err(
            self.path,
            format!("section '{section}', line {}: {detail}", self.line_no),
        )
    }
}

fn parse_tagged<'a>(r: &mut LineReader<'a>, tag: &str, section: &str) -> Result<&'a str> {
    let line = r.next_line(section)?;
    line.strip_prefix(tag)
        .and_then(|rest| rest.strip_prefix(' ').or(Some(rest).filter(|s| s.is_empty())))
        .ok_or_else(|| r.err(section, format!("expected '{tag} …', got '{line}'")))
}

fn parse_num<T: std::str::FromStr>(r: &LineReader<'_>, s: &str, section: &str) -> Result<T> {
    s.parse()
        .map_err(|_| r.err(section, format!("bad number '{s}'")))
}

fn parse_vector(r: &LineReader<'_>, s: &str, dim: usize, section: &str) -> Result<Vector> {
    let comps = s
        .split(' ')
        .filter(|t| !t.is_empty())
        .map(|t| parse_num::<f64>(r, t, section))
        .collect::<Result<Vec<f64>>>()?;
    if comps.len() != dim {
        return Err(r.err(
            section,
            format!("vector has {} components, expected {dim}", comps.len()),
        ));
    }
    Ok(comps.into())
}

/// Loads a snapshot, verifying version, checksum, and model/store
/// consistency. A corrupt or truncated file yields an error naming the
/// failing section; no partial model is returned.
pub fn load_snapshot(path: &Path) -> Result<(Model, PointStore)> {
    let content = fs::read_to_string(path)
        .map_err(|e| snapshot_err(path, format!("cannot read: {e}")))?;
    let mut r = LineReader {
        lines: content.lines(),
        line_no: 0,
        path,
    };

    let magic_line = r.next_line("header")?;
    let version = magic_line
        .strip_prefix(MAGIC)
        .map(str::trim)
        .ok_or_else(|| snapshot_err(path, format!("not a {MAGIC} file")))?;
    if version != VERSION.to_string() {
        return Err(Error::SnapshotVersion {
            found: version.to_string(),
            supported: VERSION,
        });
    }
    let checksum = parse_tagged(&mut r, "checksum", "header")?.to_string();
    let body_start = content
        .find("\nchecksum ")
        .and_then(|i| content[i + 1..].find('\n').map(|j| i + 1 + j + 1))
        .ok_or_else(|| snapshot_err(path, "malformed checksum line"))?;
    let digest = Sha256::digest(content[body_start..].as_bytes());
    if format!("{digest:x}") != checksum {
        return Err(snapshot_err(path, "checksum mismatch: file is corrupt or truncated"));
    }

    let dim_s = parse_tagged(&mut r, "dim", "header")?;
    let dim: usize = parse_num(&r, dim_s, "header")?;
    let params_line = parse_tagged(&mut r, "params", "header")?;
    let mut kv: BTreeMap<&str, &str> = BTreeMap::new();
    for tok in params_line.split(' ') {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| r.err("header", format!("bad params token '{tok}'")))?;
        kv.insert(k, v);
    }
    let get = |key: &str| -> Result<&str> {
        kv.get(key)
            .copied()
            .ok_or_else(|| snapshot_err(path, format!("params missing '{key}'")))
    };
    let params = HyperParams {
        k: parse_num(&r, get("k")?, "header")?,
        p: parse_num(&r, get("p")?, "header")?,
        lambda: parse_num(&r, get("lambda")?, "header")?,
        theta: parse_num(&r, get("theta")?, "header")?,
        delta: parse_num(&r, get("delta")?, "header")?,
    };
    let drift_str = parse_tagged(&mut r, "drift_mode", "header")?;
    let drift_mode = DriftMode::parse(drift_str)
        .ok_or_else(|| r.err("header", format!("unknown drift mode '{drift_str}'")))?;
    let gen_s = parse_tagged(&mut r, "generation", "header")?;
    let generation: u64 = parse_num(&r, gen_s, "header")?;
    let next_s = parse_tagged(&mut r, "next_cluster_id", "header")?;
    let next_cluster_id: u64 = parse_num(&r, next_s, "header")?;

    let cc_s = parse_tagged(&mut r, "clusters", "clusters")?;
    let cluster_count: usize = parse_num(&r, cc_s, "clusters")?;
    let mut clusters = BTreeMap::new();
    for _ in 0..cluster_count {
        let head = parse_tagged(&mut r, "cluster", "clusters")?;
        let (id_s, n_s) = head
            .split_once(' ')
            .ok_or_else(|| r.err("clusters", "expected 'cluster <id> <n>'"))?;
        let cid = ClusterId(parse_num(&r, id_s, "clusters")?);
        let n: u64 = parse_num(&r, n_s, "clusters")?;
        let m_s = parse_tagged(&mut r, "m", "clusters")?;
        let m = parse_vector(&r, m_s, dim, "clusters")?;
        let mn_s = parse_tagged(&mut r, "m_new", "clusters")?;
        let m_new = parse_vector(&r, mn_s, dim, "clusters")?;
        let qc_s = parse_tagged(&mut r, "q", "clusters")?;
        let q_count: usize = parse_num(&r, qc_s, "clusters")?;
        let mut q = Vec::with_capacity(q_count);
        for _ in 0..q_count {
            let rest = parse_tagged(&mut r, "qpt", "clusters")?;
            let (pid_s, vec_s) = rest
                .split_once(' ')
                .ok_or_else(|| r.err("clusters", "expected 'qpt <point_id> <components…>'"))?;
            let pid = PointId(parse_num(&r, pid_s, "clusters")?);
            q.push((pid, parse_vector(&r, vec_s, dim, "clusters")?));
        }
        let ss_s = parse_tagged(&mut r, "ss", "clusters")?;
        let ss = parse_vector(&r, ss_s, dim, "clusters")?;
        let cf = ClusterFeature::from_parts(cid, n, m, m_new, q, ss)
            .map_err(|e| r.err("clusters", e))?;
        if clusters.insert(cid, cf).is_some() {
            return Err(r.err("clusters", format!("duplicate cluster id {cid}")));
        }
    }

    let model = Model::from_parts(
        params,
        drift_mode,
        clusters,
        dim,
        generation,
        next_cluster_id,
    )
    .map_err(|e| snapshot_err(path, format!("invalid model: {e}")))?;

    let pc_s = parse_tagged(&mut r, "points", "points")?;
    let point_count: usize = parse_num(&r, pc_s, "points")?;
    let mut store = PointStore::new(dim);
    for cid in model.clusters().map(|cf| cf.cluster_id()) {
        store.register_cluster(cid);
    }
    for _ in 0..point_count {
        let line = r.next_line("points")?;
        let mut parts = line.splitn(3 + dim, ',');
        let pid = PointId(parse_num(
            &r,
            parts.next().ok_or_else(|| r.err("points", "missing point id"))?,
            "points",
        )?);
        let cid = ClusterId(parse_num(
            &r,
            parts
                .next()
                .ok_or_else(|| r.err("points", "missing cluster id"))?,
            "points",
        )?);
        let label_s = parts
            .next()
            .ok_or_else(|| r.err("points", "missing label field"))?;
        let label = if label_s.is_empty() {
            None
        } else {
            Some(label_s.to_string())
        };
        let features: Vec<f64> = parts
            .map(|t| parse_num::<f64>(&r, t, "points"))
            .collect::<Result<_>>()?;
        if features.len() != dim {
            return Err(r.err(
                "points",
                format!("point has {} features, expected {dim}", features.len()),
            ));
        }
        let point = Point::new(pid, features, label);
        store
            .append_point(&point, cid)
            .map_err(|e| r.err("points", e))?;
    }

    model
        .check_consistency(&store)
        .map_err(|e| snapshot_err(path, format!("inconsistent state: {e}")))?;
    Ok((model, store))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::IngestReport;
    use crate::kmeans::KMeansConfig;

    fn pt(id: u64, f: &[f64], label: &str) -> Point {
        Point::new(PointId(id), f.to_vec(), Some(label.to_string()))
    }

    fn sample_state() -> (Model, PointStore) {
        let points = vec![
            pt(0, &[0.0, 0.1], "a"),
            pt(1, &[0.5, 0.0], "a"),
            pt(2, &[9.0, 9.5], "b"),
            pt(3, &[9.5, 9.0], "b"),
        ];
        let hp = HyperParams {
            k: 2,
            p: 3,
            lambda: 10.0,
            theta: 4.0,
            delta: 0.1,
        };
        let mut store = PointStore::new(2);
        let model = Model::bootstrap(
            &points,
            hp,
            DriftMode::PerPoint,
            &KMeansConfig::new(2, 0),
            &mut store,
        )
        .unwrap();
        (model, store)
    }

    #[test]
    fn round_trip_identity() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.state");
        let (mut model, mut store) = sample_state();
        model
            .ingest_chunk(&[pt(4, &[1.0, 1.0], "a")], &mut store)
            .unwrap();
        save_snapshot(&path, &model, &store).unwrap();
        let (m2, s2) = load_snapshot(&path).unwrap();
        assert_eq!(model, m2);
        assert_eq!(store, s2);
        // save -> load -> save is byte-identical
        let path2 = dir.path().join("s2.state");
        save_snapshot(&path2, &m2, &s2).unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(&path2).unwrap());
    }

    #[test]
    fn loaded_state_clusters_identically() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.state");
        let (model, store) = sample_state();
        save_snapshot(&path, &model, &store).unwrap();
        let (mut m2, mut s2) = load_snapshot(&path).unwrap();
        let (mut m1, mut s1) = (model, store);
        let chunk = vec![pt(10, &[0.2, 0.2], "a"), pt(11, &[50.0, 50.0], "c")];
        let r1 = m1.ingest_chunk(&chunk, &mut s1).unwrap();
        let r2 = m2.ingest_chunk(&chunk, &mut s2).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(m1, m2);
        assert_eq!(s1, s2);
    }

    #[test]
    fn truncated_file_errors_without_partial_state() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.state");
        let (model, store) = sample_state();
        save_snapshot(&path, &model, &store).unwrap();
        let content = fs::read_to_string(&path).unwrap();
        let cut = content.len() - 30;
        fs::write(&path, &content[..cut]).unwrap();
        let err = load_snapshot(&path).unwrap_err();
        assert!(matches!(err, Error::Snapshot { .. }), "{err}");
        assert!(err.to_string().contains("checksum"));
    }

    #[test]
    fn corrupted_number_fails_checksum() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.state");
        let (model, store) = sample_state();
        save_snapshot(&path, &model, &store).unwrap();
        let content = fs::read_to_string(&path).unwrap().replace("9.5", "9.6");
        fs::write(&path, content).unwrap();
        assert!(load_snapshot(&path).is_err());
    }

    #[test]
    fn version_mismatch_is_explicit() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.state");
        fs::write(&path, "cfica-state 99\nchecksum 00\n").unwrap();
        let err = load_snapshot(&path).unwrap_err();
        assert!(matches!(err, Error::SnapshotVersion { .. }));
    }

    #[test]
    fn generation_persists_and_advances() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.state");
        let (mut model, mut store) = sample_state();
        model.ingest_chunk(&[], &mut store).unwrap();
        assert_eq!(model.generation(), 1);
        save_snapshot(&path, &model, &store).unwrap();
        let (mut m2, mut s2) = load_snapshot(&path).unwrap();
        assert_eq!(m2.generation(), 1);
        m2.ingest_chunk(&[pt(9, &[1.0, 1.0], "a")], &mut s2).unwrap();
        save_snapshot(&path, &m2, &s2).unwrap();
        let (m3, _) = load_snapshot(&path).unwrap();
        assert_eq!(m3.generation(), 2);
    }

    #[test]
    fn members_counts_reconcile_or_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.state");
        let (model, store) = sample_state();
        save_snapshot(&path, &model, &store).unwrap();
        // splice one point's cluster id to the other cluster and fix checksum
        let content = fs::read_to_string(&path).unwrap();
        let body_start = content.find("\ndim").unwrap() + 1;
        let mut body = content[body_start..].to_string();
        let cluster_of_p0 = store.assignments()[&PointId(0)];
        let other = model
            .clusters()
            .map(|c| c.cluster_id())
            .find(|c| *c != cluster_of_p0)
            .unwrap();
        body = body.replace(
            &format!("\n0,{cluster_of_p0},a"),
            &format!("\n0,{other},a"),
        );
        let digest = Sha256::digest(body.as_bytes());
        fs::write(&path, format!("cfica-state 1\nchecksum {digest:x}\n{body}")).unwrap();
        let err = load_snapshot(&path).unwrap_err();
        assert!(err.to_string().contains("inconsisten"), "{err}");
        let _ = IngestReport::default();
    }
}
