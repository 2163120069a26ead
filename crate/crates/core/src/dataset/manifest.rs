//! Line-delimited manifest with sidecar binary payloads.
//!
//! ```text
//! {"version":"jm3d-1","dim":32}
//! {"id":"s0","parent":"bed","sub":"bunk","cloud_file":"clouds/s0.bin",
//!  "views":[{"angle":0,"kind":"rgb","feature_file":"features/s0.bin","row":0}, ...]}
//! ```
//!
//! Paths are relative to the manifest's directory. `row` selects a row of a
//! multi-row feature file and defaults to 0.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::binio;
use super::cloud::PointCloud;
use super::views::{angle_bucket, Raster, ViewKind, ViewPayload, ViewRecord};
use super::{Dataset, TripletSample};
use crate::error::{Error, Result};

pub const MANIFEST_VERSION: &str = "jm3d-1";
pub const MANIFEST_FILE: &str = "manifest.jsonl";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub version: String,
    pub dim: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewDescriptor {
    pub angle: i64,
    pub kind: ViewKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub row: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_file: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleDescriptor {
    pub id: String,
    pub parent: String,
    #[serde(default)]
    pub sub: Option<String>,
    pub cloud_file: String,
    pub views: Vec<ViewDescriptor>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetManifest {
    pub version: String,
    pub dim: usize,
    pub records: Vec<SampleDescriptor>,
}

/// Accepts either a manifest file or a directory containing `manifest.jsonl`.
pub fn manifest_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(MANIFEST_FILE)
    } else {
        path.to_path_buf()
    }
}

/// Parses and fully validates a manifest and every payload it references.
/// On failure the error lists every violating record.
pub fn load_manifest(path: &Path) -> Result<(DatasetManifest, Vec<TripletSample>)> {
    let path = manifest_path(path);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();

    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header_line) = lines
        .next()
        .ok_or_else(|| Error::Validation(vec![format!("{}: empty manifest", path.display())]))?;
    let header: ManifestHeader = serde_json::from_str(header_line)
        .map_err(|e| Error::Validation(vec![format!("line 1: malformed header: {e}")]))?;
    if header.version != MANIFEST_VERSION {
        return Err(Error::Validation(vec![format!(
            "line 1: unsupported version {:?}, expected {MANIFEST_VERSION:?}",
            header.version
        )]));
    }
    if header.dim == 0 {
        return Err(Error::Validation(vec!["line 1: dim must be positive".into()]));
    }

    let mut problems = Vec::new();
    let mut records = Vec::new();
    let mut samples = Vec::new();
    let mut seen = HashSet::new();
    let mut feature_cache: BTreeMap<PathBuf, Result<(usize, Vec<Vec<f32>>)>> = BTreeMap::new();

    for (lineno, line) in lines {
        let lineno = lineno + 1;
        let rec: SampleDescriptor = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => {
                problems.push(format!("line {lineno}: malformed record: {e}"));
                continue;
            }
        };
        let before = problems.len();
        let who = format!("line {lineno} (id {:?})", rec.id);
        if rec.id.is_empty() {
            problems.push(format!("{who}: empty id"));
        } else if !seen.insert(rec.id.clone()) {
            problems.push(format!("{who}: duplicate id"));
        }
        if rec.parent.trim().is_empty() {
            problems.push(format!("{who}: empty parent category"));
        }
        if rec.views.is_empty() {
            problems.push(format!("{who}: no views"));
        }

        let cloud = match binio::read_cloud(&base.join(&rec.cloud_file)) {
            Ok(pts) => {
                let pts = pts
                    .iter()
                    .map(|p| [p[0] as f64, p[1] as f64, p[2] as f64])
                    .collect();
                match PointCloud::new(pts) {
                    Ok(c) => Some(c),
                    Err(e) => {
                        problems.push(format!("{who}: cloud {}: {e}", rec.cloud_file));
                        None
                    }
                }
            }
            Err(e) => {
                problems.push(format!("{who}: cloud: {e}"));
                None
            }
        };

        let mut views = Vec::with_capacity(rec.views.len());
        for (k, v) in rec.views.iter().enumerate() {
            let angle = match u32::try_from(v.angle).map_err(|_| ()).and_then(|a| {
                angle_bucket(a).map(|_| a).map_err(|_| ())
            }) {
                Ok(a) => a,
                Err(()) => {
                    problems.push(format!(
                        "{who}: view {k}: angle {} is not a multiple of 12 in [0, 348]",
                        v.angle
                    ));
                    continue;
                }
            };
            let payload = match (&v.feature_file, &v.image_file) {
                (Some(f), None) => {
                    let fp = base.join(f);
                    let loaded = feature_cache
                        .entry(fp.clone())
                        .or_insert_with(|| binio::read_features(&fp));
                    match loaded {
                        Ok((dim, rows)) => {
                            let row = v.row.unwrap_or(0);
                            if *dim != header.dim {
                                problems.push(format!(
                                    "{who}: view {k}: feature dim {dim} does not match manifest dim {}",
                                    header.dim
                                ));
                                None
                            } else if let Some(r) = rows.get(row) {
                                Some(ViewPayload::Feature(r.iter().map(|&x| x as f64).collect()))
                            } else {
                                problems.push(format!(
                                    "{who}: view {k}: row {row} out of range ({} rows in {f})",
                                    rows.len()
                                ));
                                None
                            }
                        }
                        Err(e) => {
                            problems.push(format!("{who}: view {k}: {e}"));
                            None
                        }
                    }
                }
                (None, Some(img)) => match read_raster(&base.join(img)) {
                    Ok(r) => Some(ViewPayload::Raster(r)),
                    Err(e) => {
                        problems.push(format!("{who}: view {k}: {e}"));
                        None
                    }
                },
                _ => {
                    problems.push(format!(
                        "{who}: view {k}: exactly one of feature_file or image_file is required"
                    ));
                    None
                }
            };
            if let Some(p) = payload {
                views.push(ViewRecord {
                    angle_deg: angle,
                    kind: v.kind,
                    payload: Some(p),
                });
            }
        }

        if problems.len() == before {
            samples.push(TripletSample {
                id: rec.id.clone(),
                cloud: cloud.expect("validated"),
                views,
                parent: rec.parent.clone(),
                sub: rec.sub.clone(),
            });
        }
        records.push(rec);
    }

    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }
    Ok((
        DatasetManifest {
            version: header.version,
            dim: header.dim,
            records,
        },
        samples,
    ))
}

/// Loads a manifest and builds the category tree over its samples.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let (manifest, samples) = load_manifest(path)?;
    Dataset::new(manifest.dim, samples)
}

fn read_raster(path: &Path) -> Result<Raster> {
    let img = image::open(path).map_err(|e| {
        Error::Validation(vec![format!("{}: cannot decode image: {e}", path.display())])
    })?;
    let (data, channels) = match img {
        image::DynamicImage::ImageLuma8(g) => (g.into_raw(), 1),
        other => (other.to_rgb8().into_raw(), 3),
    };
    let (width, height) = image::image_dimensions(path).map_err(|e| {
        Error::Validation(vec![format!("{}: cannot decode image: {e}", path.display())])
    })?;
    Ok(Raster {
        height: height as usize,
        width: width as usize,
        channels,
        data,
    })
}

fn write_raster(path: &Path, r: &Raster) -> Result<()> {
    let (w, h) = (r.width as u32, r.height as u32);
    let res = match r.channels {
        1 => image::GrayImage::from_raw(w, h, r.data.clone()).map(|i| i.save(path)),
        3 => image::RgbImage::from_raw(w, h, r.data.clone()).map(|i| i.save(path)),
        4 => image::RgbaImage::from_raw(w, h, r.data.clone()).map(|i| i.save(path)),
        c => {
            return Err(Error::Input(format!("cannot write raster with {c} channels")));
        }
    };
    match res {
        Some(Ok(())) => Ok(()),
        Some(Err(e)) => Err(Error::Input(format!("{}: {e}", path.display()))),
        None => Err(Error::Input(format!(
            "{}: raster buffer does not match {}×{}×{}",
            path.display(),
            r.height,
            r.width,
            r.channels
        ))),
    }
}

fn file_stem(idx: usize, id: &str) -> String {
    let clean: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("{idx:05}_{clean}")
}

/// Writes `manifest.jsonl` plus `clouds/`, `features/` and `images/`
/// payloads under `dir`. Coordinates and features are stored as `f32`.
pub fn write_dataset(dir: &Path, dataset: &Dataset) -> Result<PathBuf> {
    for sub in ["clouds", "features", "images"] {
        fs::create_dir_all(dir.join(sub)).map_err(|e| Error::io(dir.join(sub), e))?;
    }
    let header = ManifestHeader {
        version: MANIFEST_VERSION.into(),
        dim: dataset.dim,
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');

    for (idx, s) in dataset.samples.iter().enumerate() {
        let stem = file_stem(idx, &s.id);
        let cloud_file = format!("clouds/{stem}.bin");
        let pts: Vec<[f32; 3]> = s
            .cloud
            .points()
            .iter()
            .map(|p| [p[0] as f32, p[1] as f32, p[2] as f32])
            .collect();
        binio::write_cloud(&dir.join(&cloud_file), &pts)?;

        let feature_file = format!("features/{stem}.bin");
        let mut rows: Vec<Vec<f32>> = Vec::new();
        let mut views = Vec::with_capacity(s.views.len());
        for (k, v) in s.views.iter().enumerate() {
            let mut d = ViewDescriptor {
                angle: v.angle_deg as i64,
                kind: v.kind,
                feature_file: None,
                row: None,
                image_file: None,
            };
            match &v.payload {
                Some(ViewPayload::Feature(f)) => {
                    if f.len() != dataset.dim {
                        return Err(Error::shape("write_dataset feature", &[f.len()], &[dataset.dim]));
                    }
                    d.feature_file = Some(feature_file.clone());
                    d.row = Some(rows.len());
                    rows.push(f.iter().map(|&x| x as f32).collect());
                }
                Some(ViewPayload::Raster(r)) => {
                    let img = format!("images/{stem}_{k:03}.png");
                    write_raster(&dir.join(&img), r)?;
                    d.image_file = Some(img);
                }
                None => {
                    return Err(Error::Input(format!(
                        "sample {:?} view {k} has no payload",
                        s.id
                    )))
                }
            }
            views.push(d);
        }
        if !rows.is_empty() {
            binio::write_features(&dir.join(&feature_file), &rows, dataset.dim)?;
        }
        let rec = SampleDescriptor {
            id: s.id.clone(),
            parent: s.parent.clone(),
            sub: s.sub.clone(),
            cloud_file,
            views,
        };
        out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
        out.push('\n');
    }
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, out).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
