//! Dataset manifest: one `<relative-path> <hex-digest>` per line.
//!
//! Lines starting with `#` are comments, except the directive
//! `# base-url: <url>` which tells `fetch` where files live. A digest of `-`
//! marks an entry whose digest has not been pinned yet.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ManifestEntry {
    pub path: String,
    pub digest: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Manifest {
    pub base_url: Option<String>,
    pub comments: Vec<String>,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn parse(text: &str) -> Result<Self> {
        let mut m = Manifest::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(c) = line.strip_prefix('#') {
                let c = c.trim();
                match c.strip_prefix("base-url:") {
                    Some(url) => m.base_url = Some(url.trim().to_string()),
                    None => m.comments.push(c.to_string()),
                }
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(path), Some(digest), None) = (parts.next(), parts.next(), parts.next())
            else {
                return Err(Error::Format(format!(
                    "manifest line {}: expected `<path> <digest>`, got {line:?}",
                    n + 1
                )));
            };
            let digest = match digest {
                "-" => None,
                d if d.len() == 64 && d.bytes().all(|b| b.is_ascii_hexdigit()) => {
                    Some(d.to_ascii_lowercase())
                }
                d => {
                    return Err(Error::Format(format!(
                        "manifest line {}: {d:?} is not a sha256 hex digest",
                        n + 1
                    )))
                }
            };
            m.entries.push(ManifestEntry {
                path: path.to_string(),
                digest,
            });
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            let _ = writeln!(out, "# {c}");
        }
        if let Some(url) = &self.base_url {
            let _ = writeln!(out, "# base-url: {url}");
        }
        for e in &self.entries {
            let _ = writeln!(out, "{} {}", e.path, e.digest.as_deref().unwrap_or("-"));
        }
        out
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Corrupt {
    pub path: String,
    pub expected: String,
    pub actual: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct VerifyReport {
    pub ok: Vec<String>,
    pub missing: Vec<String>,
    pub corrupt: Vec<Corrupt>,
    pub unpinned: Vec<String>,
    pub extra: Vec<String>,
}

impl VerifyReport {
    pub fn is_ok(&self) -> bool {
        self.missing.is_empty()
            && self.corrupt.is_empty()
            && self.unpinned.is_empty()
            && self.extra.is_empty()
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "{} ok, {} missing, {} corrupt, {} unpinned, {} extra",
            self.ok.len(),
            self.missing.len(),
            self.corrupt.len(),
            self.unpinned.len(),
            self.extra.len()
        );
        for m in &self.missing {
            let _ = write!(s, "\nmissing  {m}");
        }
        for c in &self.corrupt {
            let _ = write!(s, "\ncorrupt  {} expected {} actual {}", c.path, c.expected, c.actual);
        }
        for u in &self.unpinned {
            let _ = write!(s, "\nunpinned {u}");
        }
        for e in &self.extra {
            let _ = write!(s, "\nextra    {e}");
        }
        s
    }
}

/// Check `dir` against `manifest_path`. The manifest file itself is not
/// reported as extra when it lives inside `dir`.
pub fn verify_manifest(dir: &Path, manifest_path: &Path) -> Result<VerifyReport> {
    let manifest = Manifest::load(manifest_path)?;
    let mut on_disk = BTreeSet::new();
    collect_files(dir, dir, &mut on_disk)?;
    if let (Ok(m), Ok(d)) = (manifest_path.canonicalize(), dir.canonicalize()) {
        if let Ok(rel) = m.strip_prefix(&d) {
            on_disk.remove(&rel_string(rel));
        }
    }

    let mut report = VerifyReport::default();
    let mut listed = BTreeSet::new();
    for e in &manifest.entries {
        listed.insert(e.path.clone());
        let full = dir.join(&e.path);
        if !full.is_file() {
            report.missing.push(e.path.clone());
            continue;
        }
        let Some(expected) = &e.digest else {
            report.unpinned.push(e.path.clone());
            continue;
        };
        let actual = sha256_file(&full)?;
        if &actual == expected {
            report.ok.push(e.path.clone());
        } else {
            report.corrupt.push(Corrupt {
                path: e.path.clone(),
                expected: expected.clone(),
                actual,
            });
        }
    }
    report.extra = on_disk.difference(&listed).cloned().collect();
    Ok(report)
}

fn rel_string(p: &Path) -> String {
    p.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

fn collect_files(root: &Path, dir: &Path, out: &mut BTreeSet<String>) -> Result<()> {
    let rd = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in rd {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path: PathBuf = entry.path();
        let name = entry.file_name();
        if name.to_string_lossy().starts_with('.') {
            continue;
        }
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else if let Ok(rel) = path.strip_prefix(root) {
            out.insert(rel_string(rel));
        }
    }
    Ok(())
}

/// Manifest entries for the physical-movement runs of `subjects`, in the
/// PhysioNet directory layout (`S001/S001R03.edf`), digests unpinned.
pub fn movement_entries(subjects: impl IntoIterator<Item = u16>, runs: &[u8]) -> Vec<ManifestEntry> {
    subjects
        .into_iter()
        .flat_map(|s| {
            runs.iter().map(move |r| ManifestEntry {
                path: format!("S{s:03}/S{s:03}R{r:02}.edf"),
                digest: None,
            })
        })
        .collect()
}
