use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{RunConfig, ScenarioError};

/// Fixed-width float formatting (17 significant digits) for CSV cells.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn io(path: &Path, e: impl std::fmt::Display) -> ScenarioError {
    ScenarioError::Io(format!("{}: {e}", path.display()))
}

/// Files written by one command into one output directory.
#[derive(Debug)]
pub struct Bundle {
    pub dir: PathBuf,
    pub files: Vec<String>,
    pub warnings: Vec<String>,
}

impl Bundle {
    pub fn create(dir: &Path) -> Result<Self, ScenarioError> {
        fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        Ok(Bundle { dir: dir.to_path_buf(), files: Vec::new(), warnings: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Writes a CSV with a header row; rows must match the header width.
    pub fn csv<I>(&mut self, name: &str, header: &[&str], rows: I) -> Result<(), ScenarioError>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let path = self.path(name);
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(&path).map_err(|e| io(&path, e))?;
        w.write_record(header).map_err(|e| io(&path, e))?;
        for r in rows {
            w.write_record(&r).map_err(|e| io(&path, e))?;
        }
        w.flush().map_err(|e| io(&path, e))?;
        self.files.push(name.into());
        Ok(())
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<(), ScenarioError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| ScenarioError::Io(e.to_string()))?;
        text.push('\n');
        self.text(name, &text)
    }

    pub fn text(&mut self, name: &str, text: &str) -> Result<(), ScenarioError> {
        let path = self.path(name);
        fs::write(&path, text).map_err(|e| io(&path, e))?;
        self.files.push(name.into());
        Ok(())
    }

    /// Writes `manifest.json`, the reproduction recipe for every other file.
    pub fn finish(mut self, command: &str, cfg: &RunConfig, notes: &[(&str, String)]) -> Result<Self, ScenarioError> {
        let manifest = Manifest {
            tool: "vines",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed: cfg.seed,
            files: &self.files,
            warnings: &self.warnings,
            notes: notes.iter().map(|(k, v)| ((*k).to_string(), v.clone())).collect(),
            config: cfg,
        };
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| ScenarioError::Io(e.to_string()))?;
        text.push('\n');
        let path = self.path("manifest.json");
        fs::write(&path, text).map_err(|e| io(&path, e))?;
        self.files.push("manifest.json".into());
        Ok(self)
    }

    /// Wall-clock timings live apart from the manifest so that reruns stay byte-identical.
    pub fn timing(&self, seconds: f64, extra: &[(&str, f64)]) -> Result<(), ScenarioError> {
        let mut m = serde_json::Map::new();
        m.insert("wall_seconds".into(), seconds.into());
        for (k, v) in extra {
            m.insert((*k).into(), (*v).into());
        }
        let path = self.path("timing.json");
        let text = serde_json::to_string_pretty(&m).map_err(|e| ScenarioError::Io(e.to_string()))? + "\n";
        fs::write(&path, text).map_err(|e| io(&path, e))
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'a str,
    version: &'a str,
    command: &'a str,
    seed: u64,
    files: &'a [String],
    warnings: &'a [String],
    notes: std::collections::BTreeMap<String, String>,
    config: &'a RunConfig,
}

/// Fixed-bin histogram over `[lo, hi]`; the top edge belongs to the last bin.
/// Values outside the range are not counted.
pub fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<usize> {
    let mut counts = vec![0; bins];
    let w = (hi - lo) / bins as f64;
    for &v in values {
        if v >= lo && v <= hi {
            let k = (((v - lo) / w) as usize).min(bins - 1);
            counts[k] += 1;
        }
    }
    counts
}

/// Empirical CDF as sorted `(value, F(value))` steps; ties collapse to one step.
pub fn ecdf(values: &[f64]) -> Vec<(f64, f64)> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, x) in v.iter().enumerate() {
        let f = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == *x => last.1 = f,
            _ => out.push((*x, f)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_cells() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(0.1).parse::<f64>().unwrap(), 0.1);
        assert_eq!(fmt_f64(f64::NEG_INFINITY), "-inf");
    }

    #[test]
    fn histogram_edges() {
        let h = histogram(&[0.0, 4.99, 5.0, 100.0, 101.0, -1.0], 0.0, 100.0, 20);
        assert_eq!(h[0], 2);
        assert_eq!(h[1], 1);
        assert_eq!(h[19], 1);
        assert_eq!(h.iter().sum::<usize>(), 4);
    }

    #[test]
    fn ecdf_steps() {
        assert_eq!(ecdf(&[42.0]), vec![(42.0, 1.0)]);
        assert_eq!(ecdf(&[3.0, 1.0, 3.0, 2.0]), vec![(1.0, 0.25), (2.0, 0.5), (3.0, 1.0)]);
    }

    #[test]
    fn bundle_writes_manifest_last() {
        let dir = tempfile::tempdir().unwrap();
        let mut b = Bundle::create(dir.path()).unwrap();
        b.csv("a.csv", &["x", "y"], vec![vec![fmt_f64(1.0), fmt_f64(2.0)]]).unwrap();
        let b = b.finish("test", &RunConfig::default(), &[]).unwrap();
        assert_eq!(b.files, vec!["a.csv", "manifest.json"]);
        let text = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
        assert_eq!(text, "x,y\n1.0000000000000000e0,2.0000000000000000e0\n");
        let cfg = RunConfig::load(&dir.path().join("manifest.json")).unwrap();
        assert_eq!(cfg, RunConfig::default());
    }
}
