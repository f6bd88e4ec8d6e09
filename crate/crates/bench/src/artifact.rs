//! Stamped artifacts: every file the runner writes records the digest of the
//! configuration that produced it and the digest of its own inputs, so a
//! rerun can tell whether it is still valid.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use xaibench_core::data::{Dataset, FeatureKind, Matrix};
use xaibench_core::explainers::{Attribution, AttributionFlags, Method};

const CONFIG_KEY: &str = "config_digest=";
const STAGE_KEY: &str = "stage_digest=";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stamp {
    pub config_digest: String,
    pub stage_digest: String,
}

impl Stamp {
    pub fn new(config_digest: &str, stage_digest: &str) -> Self {
        Stamp { config_digest: config_digest.into(), stage_digest: stage_digest.into() }
    }

    pub fn comment_lines(&self) -> Vec<String> {
        vec![format!("{CONFIG_KEY}{}", self.config_digest), format!("{STAGE_KEY}{}", self.stage_digest)]
    }

    fn header(&self) -> String {
        self.comment_lines().iter().map(|l| format!("# {l}\n")).collect()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Digest of the canonical JSON encoding of `value`.
pub fn digest_of<S: Serialize + ?Sized>(value: &S) -> String {
    sha256_hex(&serde_json::to_vec(value).expect("serializable"))
}

/// Writes via a temporary sibling and a rename so readers never see a torn file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))
}

/// Stamp of an existing artifact, if it has one.
pub fn read_stamp(path: &Path) -> Option<Stamp> {
    let is_json = path.extension().is_some_and(|e| e == "json");
    if is_json {
        let v: serde_json::Value = serde_json::from_slice(&fs::read(path).ok()?).ok()?;
        let s = v.get("stamp").or_else(|| v.get("metadata").and_then(|m| m.get("stamp")))?;
        return serde_json::from_value(s.clone()).ok();
    }
    let file = fs::File::open(path).ok()?;
    let mut config = None;
    let mut stage = None;
    for line in BufReader::new(file).lines() {
        let line = line.ok()?;
        let Some(c) = line.strip_prefix("# ") else { break };
        if let Some(v) = c.strip_prefix(CONFIG_KEY) {
            config = Some(v.to_string());
        } else if let Some(v) = c.strip_prefix(STAGE_KEY) {
            stage = Some(v.to_string());
        }
    }
    Some(Stamp { config_digest: config?, stage_digest: stage? })
}

/// Whether `path` exists and was produced from inputs with `stage_digest`.
pub fn is_current(path: &Path, stage_digest: &str) -> bool {
    read_stamp(path).is_some_and(|s| s.stage_digest == stage_digest)
}

/// Rewrites the config digest of a reused artifact.
pub fn restamp(path: &Path, stamp: &Stamp) -> Result<()> {
    match read_stamp(path) {
        Some(s) if s == *stamp => return Ok(()),
        Some(s) if s.stage_digest != stamp.stage_digest => bail!("{} is stale", path.display()),
        None => bail!("{} carries no stamp", path.display()),
        Some(_) => {}
    }
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let out = if path.extension().is_some_and(|e| e == "json") {
        let mut v: serde_json::Value = serde_json::from_str(&text)?;
        let slot = if v.get("stamp").is_some() { &mut v["stamp"] } else { &mut v["metadata"]["stamp"] };
        *slot = serde_json::to_value(stamp)?;
        serde_json::to_string_pretty(&v)? + "\n"
    } else {
        let is_stamp = |l: &str| {
            l.strip_prefix("# ").is_some_and(|c| c.starts_with(CONFIG_KEY) || c.starts_with(STAGE_KEY))
        };
        let rest: String = text.lines().filter(|l| !is_stamp(l)).map(|l| format!("{l}\n")).collect();
        stamp.header() + &rest
    };
    write_atomic(path, out.as_bytes())
}

#[derive(Serialize, Deserialize)]
struct Envelope<P> {
    stamp: Stamp,
    payload: P,
}

pub fn write_json<P: Serialize>(path: &Path, stamp: &Stamp, payload: &P) -> Result<()> {
    let text = serde_json::to_string_pretty(&Envelope { stamp: stamp.clone(), payload })? + "\n";
    write_atomic(path, text.as_bytes())
}

pub fn read_json<P: for<'de> Deserialize<'de>>(path: &Path) -> Result<P> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let env: Envelope<P> = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(env.payload)
}

/// Writes a CSV body (already rendered) beneath the stamp header.
pub fn write_csv_text(path: &Path, stamp: &Stamp, body: &str) -> Result<()> {
    write_atomic(path, (stamp.header() + body).as_bytes())
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))
}

fn comment_value(path: &Path, key: &str) -> Result<Option<String>> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    for line in BufReader::new(file).lines() {
        let line = line?;
        let Some(c) = line.strip_prefix("# ") else { break };
        if let Some(v) = c.strip_prefix(key) {
            return Ok(Some(v.to_string()));
        }
    }
    Ok(None)
}

const KINDS_KEY: &str = "feature_kinds=";
const PROVENANCE_KEY: &str = "provenance=";

pub fn write_dataset(path: &Path, stamp: &Stamp, ds: &Dataset<f64>) -> Result<()> {
    let mut comments = stamp.comment_lines();
    let kinds: Vec<&str> = ds
        .feature_kinds()
        .iter()
        .map(|k| match k {
            FeatureKind::Continuous => "continuous",
            FeatureKind::Discrete => "discrete",
        })
        .collect();
    comments.push(format!("{KINDS_KEY}{}", kinds.join(",")));
    comments.push(format!("{PROVENANCE_KEY}{}", ds.provenance()));
    let mut buf = Vec::new();
    ds.write_csv(&mut buf, &comments)?;
    write_atomic(path, &buf)
}

pub fn read_dataset(path: &Path) -> Result<Dataset<f64>> {
    let mut r = csv_reader(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let Some((label, names)) = header.split_last() else { bail!("{}: empty header", path.display()) };
    if label != "label" {
        bail!("{}: last column must be `label`", path.display());
    }
    let m = names.len();
    let kinds: Vec<FeatureKind> = match comment_value(path, KINDS_KEY)? {
        Some(v) => v
            .split(',')
            .map(|k| match k {
                "discrete" => Ok(FeatureKind::Discrete),
                "continuous" => Ok(FeatureKind::Continuous),
                other => Err(anyhow::anyhow!("unknown feature kind {other:?}")),
            })
            .collect::<Result<_>>()?,
        None => vec![FeatureKind::Continuous; m],
    };
    let provenance = comment_value(path, PROVENANCE_KEY)?.unwrap_or_default();
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != m + 1 {
            bail!("{}: row {} has {} fields, expected {}", path.display(), i + 1, rec.len(), m + 1);
        }
        for v in rec.iter().take(m) {
            data.push(v.parse::<f64>().with_context(|| format!("{}: row {}", path.display(), i + 1))?);
        }
        labels.push(rec[m].parse::<u8>().with_context(|| format!("{}: row {} label", path.display(), i + 1))?);
    }
    let n = labels.len();
    Ok(Dataset::new(Matrix::new(n, m, data)?, labels, names.to_vec(), kinds, provenance)?)
}

pub fn render_attributions(atts: &[Attribution<f64>], feature_names: &[String]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["instance_id".to_string(), "method".into(), "base_value".into()];
    header.extend(feature_names.iter().map(|n| format!("phi_{n}")));
    header.extend(["target_output", "regularized", "incomplete", "fidelity"].map(String::from));
    w.write_record(&header)?;
    for a in atts {
        let mut rec = vec![a.instance_id.to_string(), a.method.name().to_string(), a.base_value.to_string()];
        rec.extend(a.values.iter().map(f64::to_string));
        rec.push(a.target_output.to_string());
        rec.push(a.flags.regularized.to_string());
        rec.push(a.flags.incomplete.to_string());
        rec.push(a.flags.fidelity.map(|f| f.to_string()).unwrap_or_default());
        w.write_record(&rec)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn read_attributions(path: &Path) -> Result<Vec<Attribution<f64>>> {
    let mut r = csv_reader(path)?;
    let width = r.headers()?.len();
    if width < 8 {
        bail!("{}: too few attribution columns", path.display());
    }
    let m = width - 7;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> { Ok(rec[i].parse::<f64>()?) };
        let method: Method = rec[1].parse()?;
        let values = (0..m).map(|j| num(3 + j)).collect::<Result<Vec<_>>>()?;
        let mut a = Attribution::new(rec[0].parse()?, method, values, num(2)?, num(3 + m)?);
        a.flags = AttributionFlags {
            regularized: rec[4 + m].parse()?,
            incomplete: rec[5 + m].parse()?,
            fidelity: if rec[6 + m].is_empty() { None } else { Some(num(6 + m)?) },
        };
        out.push(a);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_round_trip_and_restamp() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let x = Matrix::from_rows(&[vec![0.1, 2.0], vec![1.0 / 3.0, 1.0]]).unwrap();
        let ds = Dataset::new(x, vec![0, 1], vec!["a".into(), "b".into()], vec![FeatureKind::Continuous, FeatureKind::Discrete], "unit")
            .unwrap();
        let stamp = Stamp::new("c1", "s1");
        write_dataset(&path, &stamp, &ds).unwrap();
        assert_eq!(read_dataset(&path).unwrap(), ds);
        assert!(is_current(&path, "s1"));
        assert!(!is_current(&path, "s2"));
        restamp(&path, &Stamp::new("c2", "s1")).unwrap();
        assert_eq!(read_stamp(&path).unwrap().config_digest, "c2");
        assert_eq!(read_dataset(&path).unwrap(), ds);
        assert!(restamp(&path, &Stamp::new("c2", "other")).is_err());
    }

    #[test]
    fn attribution_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        let mut a = Attribution::new(4, Method::Lime, vec![0.1, -1e-17], 0.25, 0.7);
        a.flags.fidelity = Some(0.5);
        let b = Attribution::new(9, Method::Lime, vec![0.0, 2.0], 0.0, 1.0);
        let body = render_attributions(&[a.clone(), b.clone()], &["x1".into(), "x2".into()]).unwrap();
        assert!(body.starts_with("instance_id,method,base_value,phi_x1,phi_x2,target_output"));
        write_csv_text(&path, &Stamp::new("c", "s"), &body).unwrap();
        assert_eq!(read_attributions(&path).unwrap(), vec![a, b]);
    }

    #[test]
    fn json_envelope() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.json");
        write_json(&path, &Stamp::new("c", "s"), &vec![1.5, 2.0]).unwrap();
        assert_eq!(read_json::<Vec<f64>>(&path).unwrap(), vec![1.5, 2.0]);
        restamp(&path, &Stamp::new("d", "s")).unwrap();
        assert_eq!(read_stamp(&path).unwrap(), Stamp::new("d", "s"));
        assert!(read_stamp(&dir.path().join("missing.csv")).is_none());
    }
}
