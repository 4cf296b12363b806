use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::PipelineError;

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub shape_id: u32,
    pub category: String,
    /// `.obj` mesh or `.xyz` point cloud.
    pub mesh: PathBuf,
    /// Per-face labels, one per line.
    pub labels: Option<PathBuf>,
}

impl ManifestEntry {
    pub fn is_cloud(&self) -> bool {
        self.mesh.extension().is_some_and(|e| e.eq_ignore_ascii_case("xyz"))
    }
}

/// Dataset listing. Text form:
///
/// ```text
/// seed = 3
/// # id category mesh [labels]
/// 0 chair meshes/0.obj meshes/0.labels
/// ```
///
/// Relative paths are resolved against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub seed: u64,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    /// Parses and checks that ids are unique and every path exists.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Input(format!("manifest {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let m = Self::parse(&text, base)?;
        m.check_paths()?;
        Ok(m)
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self, PipelineError> {
        let mut m = Manifest::default();
        let mut ids = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| PipelineError::Input(format!("manifest line {}: {msg}", i + 1));
            if let Some((k, v)) = line.split_once('=') {
                if k.trim() != "seed" {
                    return Err(err(format!("unknown key {}", k.trim())));
                }
                m.seed = v.trim().parse().map_err(|_| err(format!("bad seed {}", v.trim())))?;
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if !(3..=4).contains(&f.len()) {
                return Err(err("expected `id category mesh [labels]`".into()));
            }
            let shape_id: u32 = f[0].parse().map_err(|_| err(format!("bad shape id {}", f[0])))?;
            if !ids.insert(shape_id) {
                return Err(err(format!("duplicate shape id {shape_id}")));
            }
            m.entries.push(ManifestEntry {
                shape_id,
                category: f[1].to_string(),
                mesh: base.join(f[2]),
                labels: f.get(3).map(|p| base.join(p)),
            });
        }
        Ok(m)
    }

    fn check_paths(&self) -> Result<(), PipelineError> {
        for e in &self.entries {
            for p in std::iter::once(&e.mesh).chain(e.labels.as_ref()) {
                if !p.is_file() {
                    return Err(PipelineError::Input(format!("shape {}: missing file {}", e.shape_id, p.display())));
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, shape_id: u32) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.shape_id == shape_id)
    }

    /// Text form with paths relative to `base` where possible.
    pub fn to_text(&self, base: &Path) -> String {
        let rel = |p: &Path| p.strip_prefix(base).unwrap_or(p).display().to_string();
        let mut s = format!("seed = {}\n", self.seed);
        for e in &self.entries {
            let _ = write!(s, "{} {} {}", e.shape_id, e.category, rel(&e.mesh));
            if let Some(l) = &e.labels {
                let _ = write!(s, " {}", rel(l));
            }
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_check() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.obj"), "").unwrap();
        let text = "seed = 4\n# shapes\n3 chair a.obj\n";
        let path = dir.path().join("m.txt");
        std::fs::write(&path, text).unwrap();
        let m = Manifest::load(&path).unwrap();
        assert_eq!(m.seed, 4);
        assert_eq!(m.entries[0].mesh, dir.path().join("a.obj"));
        assert!(!m.entries[0].is_cloud());
        assert_eq!(Manifest::parse(&m.to_text(dir.path()), dir.path()).unwrap(), m);

        std::fs::write(&path, "3 chair a.obj\n5 chair b.obj\n").unwrap();
        let e = Manifest::load(&path).unwrap_err().to_string();
        assert!(e.contains("shape 5"), "{e}");
        assert!(Manifest::parse("1 a x.obj\n1 a y.obj", dir.path()).is_err());
        assert!(Manifest::parse("colour = 2", dir.path()).is_err());
    }
}
