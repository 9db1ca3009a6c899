//! Dataset manifests: deterministic enumeration of the decodable still
//! frames under a directory. GIFs contribute one entry per frame; an
//! undecodable file is logged and skipped so a single corrupt gallery file
//! cannot abort a multi-thousand-frame ingest.

use super::{decode_gif_frames, load_pnm, Image, ImageIoError, Result};
use std::fmt;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetRole {
    Content,
    Style,
}

impl fmt::Display for DatasetRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatasetRole::Content => write!(f, "content"),
            DatasetRole::Style => write!(f, "style"),
        }
    }
}

impl std::str::FromStr for DatasetRole {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "content" => Ok(DatasetRole::Content),
            "style" => Ok(DatasetRole::Style),
            other => Err(format!("unknown dataset role '{other}'")),
        }
    }
}

/// One decodable still frame: a PNM file (frame 0) or a GIF frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub frame: usize,
    pub width: usize,
    pub height: usize,
}

impl ManifestEntry {
    /// Decode the image this entry refers to.
    pub fn load(&self) -> Result<Image> {
        if is_gif(&self.path) {
            let mut frames = decode_gif_frames(&self.path)?;
            if self.frame >= frames.len() {
                return Err(ImageIoError::GifNoFrames);
            }
            Ok(frames.swap_remove(self.frame))
        } else {
            load_pnm(&self.path)
        }
    }

    /// File stem plus `_f<k>` for GIF frames beyond a single-image file.
    pub fn stem(&self) -> String {
        let base = self
            .path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "image".to_string());
        if is_gif(&self.path) {
            format!("{base}_f{:03}", self.frame)
        } else {
            base
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub role: DatasetRole,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn count(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Serialize as `role,path,frame,width,height` CSV with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("role,path,frame,width,height\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                self.role,
                e.path.display(),
                e.frame,
                e.width,
                e.height
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(ImageIoError::ManifestParse {
            line: 1,
            reason: "empty manifest".into(),
        })?;
        if header.trim() != "role,path,frame,width,height" {
            return Err(ImageIoError::ManifestParse {
                line: 1,
                reason: format!("unexpected header '{header}'"),
            });
        }
        let mut role = None;
        let mut entries = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(ImageIoError::ManifestParse {
                    line: i + 1,
                    reason: format!("expected 5 fields, got {}", fields.len()),
                });
            }
            let r: DatasetRole = fields[0].parse().map_err(|e| ImageIoError::ManifestParse {
                line: i + 1,
                reason: e,
            })?;
            role.get_or_insert(r);
            let parse_num = |s: &str| {
                s.parse::<usize>().map_err(|_| ImageIoError::ManifestParse {
                    line: i + 1,
                    reason: format!("bad number '{s}'"),
                })
            };
            entries.push(ManifestEntry {
                path: PathBuf::from(fields[1]),
                frame: parse_num(fields[2])?,
                width: parse_num(fields[3])?,
                height: parse_num(fields[4])?,
            });
        }
        Ok(DatasetManifest {
            role: role.unwrap_or(DatasetRole::Content),
            entries,
        })
    }
}

fn is_gif(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("gif"))
}

fn is_pnm(path: &Path) -> bool {
    path.extension().is_some_and(|e| {
        e.eq_ignore_ascii_case("pgm") || e.eq_ignore_ascii_case("ppm") || e.eq_ignore_ascii_case("pnm")
    })
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let rd = std::fs::read_dir(dir).map_err(|source| ImageIoError::DirUnreadable {
        path: dir.display().to_string(),
        source,
    })?;
    for entry in rd {
        let entry = entry.map_err(|source| ImageIoError::DirUnreadable {
            path: dir.display().to_string(),
            source,
        })?;
        let path = entry.path();
        if path.is_dir() {
            collect_files(&path, out)?;
        } else if is_gif(&path) || is_pnm(&path) {
            out.push(path);
        }
    }
    Ok(())
}

/// Recursively enumerate decodable frames under `dir` in lexicographic path
/// order. Undecodable files are skipped with a warning; an unreadable
/// directory is fatal.
pub fn build_manifest(dir: impl AsRef<Path>, role: DatasetRole) -> Result<DatasetManifest> {
    let mut files = Vec::new();
    collect_files(dir.as_ref(), &mut files)?;
    files.sort_by(|a, b| a.as_os_str().cmp(b.as_os_str()));

    let mut entries = Vec::new();
    for path in files {
        if is_gif(&path) {
            match decode_gif_frames(&path) {
                Ok(frames) => {
                    for (frame, img) in frames.iter().enumerate() {
                        entries.push(ManifestEntry {
                            path: path.clone(),
                            frame,
                            width: img.width(),
                            height: img.height(),
                        });
                    }
                }
                Err(e) => log::warn!("skipping undecodable {}: {e}", path.display()),
            }
        } else {
            match load_pnm(&path) {
                Ok(img) => entries.push(ManifestEntry {
                    path: path.clone(),
                    frame: 0,
                    width: img.width(),
                    height: img.height(),
                }),
                Err(e) => log::warn!("skipping undecodable {}: {e}", path.display()),
            }
        }
    }
    Ok(DatasetManifest { role, entries })
}

#[cfg(test)]
mod tests {
    use super::super::gif::oracle::{encode_gif, OracleFrame};
    use super::super::save_pnm;
    use super::*;

    fn fixture_dir() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        let gray = Image::new(2, 2, 1, vec![0.0, 0.25, 0.5, 1.0]).unwrap();
        save_pnm(&gray, dir.path().join("a.pgm")).unwrap();
        save_pnm(&gray, dir.path().join("b.pgm")).unwrap();
        let frames: Vec<OracleFrame> = (0..3)
            .map(|k| OracleFrame::full(3, 3, vec![k; 9]))
            .collect();
        let palette = [[0, 0, 0], [100, 100, 100], [200, 200, 200], [255, 255, 255]];
        std::fs::write(
            dir.path().join("c.gif"),
            encode_gif(3, 3, &palette, 0, &frames),
        )
        .unwrap();
        dir
    }

    #[test]
    fn counts_pnm_files_and_gif_frames() {
        let dir = fixture_dir();
        let m = build_manifest(dir.path(), DatasetRole::Style).unwrap();
        assert_eq!(m.count(), 5); // 2 PGMs + 3 GIF frames
        for e in &m.entries {
            assert!(e.load().is_ok());
        }
    }

    #[test]
    fn empty_dir_yields_empty_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let m = build_manifest(dir.path(), DatasetRole::Content).unwrap();
        assert_eq!(m.count(), 0);
    }

    #[test]
    fn manifest_is_deterministic() {
        let dir = fixture_dir();
        let a = build_manifest(dir.path(), DatasetRole::Style).unwrap();
        let b = build_manifest(dir.path(), DatasetRole::Style).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn corrupt_file_is_skipped_not_fatal() {
        let dir = fixture_dir();
        std::fs::write(dir.path().join("bad.pgm"), b"not a pnm").unwrap();
        let m = build_manifest(dir.path(), DatasetRole::Style).unwrap();
        assert_eq!(m.count(), 5);
    }

    #[test]
    fn missing_dir_is_fatal() {
        assert!(build_manifest("/nonexistent/definitely/missing", DatasetRole::Content).is_err());
    }

    #[test]
    fn csv_roundtrip() {
        let dir = fixture_dir();
        let m = build_manifest(dir.path(), DatasetRole::Style).unwrap();
        let back = DatasetManifest::from_csv(&m.to_csv()).unwrap();
        assert_eq!(back, m);
    }
}
