use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use crate::error::Result;

/// Everything needed to regenerate a run's numeric output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config: RunConfig,
    /// SHA-256 over the command, seed, config and any input files.
    pub input_hash: String,
}

impl Manifest {
    pub fn new(command: &str, seed: u64, config: &RunConfig, extra_inputs: &[&[u8]]) -> Result<Self> {
        let mut config = config.clone();
        config.seed = seed;
        let mut hasher = Sha256::new();
        hasher.update(command.as_bytes());
        hasher.update([0]);
        hasher.update(serde_json::to_vec(&config)?);
        for input in extra_inputs {
            hasher.update([0]);
            hasher.update(input);
        }
        Ok(Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            config,
            input_hash: hex::encode(hasher.finalize()),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Writes through a sibling temporary file and a rename, so readers never
/// see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// A CSV table built in memory; every row gets the manifest hash appended.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    hash: String,
}

impl Table {
    pub fn new(header: &[&str], manifest: &Manifest) -> Self {
        let mut header: Vec<String> = header.iter().map(|s| s.to_string()).collect();
        header.push("manifest_hash".into());
        Table {
            header,
            rows: Vec::new(),
            hash: manifest.input_hash.clone(),
        }
    }

    pub fn push(&mut self, mut row: Vec<String>) {
        row.push(self.hash.clone());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.into_inner().map_err(|e| e.into_error().into())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }
}

/// Shortest round-trip decimal form.
pub fn num(x: f64) -> String {
    x.to_string()
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Errors below this are at the oracle's accuracy floor and excluded from
/// rate fits.
pub const SLOPE_ERROR_FLOOR: f64 = 1e-12;

/// Least-squares slope of `log e` against `log h`. Pairs with `e` below the
/// floor or non-finite values are skipped; `None` when fewer than two
/// distinct `h` remain.
pub fn fit_loglog_slope(pairs: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = pairs
        .iter()
        .filter(|(h, e)| h.is_finite() && *h > 0.0 && e.is_finite() && *e >= SLOPE_ERROR_FLOOR)
        .map(|(h, e)| (h.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// Paths written by a command.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outputs {
    pub files: Vec<PathBuf>,
}

impl Outputs {
    pub fn write(&mut self, path: PathBuf, bytes: &[u8]) -> Result<()> {
        write_atomic(&path, bytes)?;
        self.files.push(path);
        Ok(())
    }

    pub fn table(&mut self, path: PathBuf, table: &Table) -> Result<()> {
        let bytes = table.to_bytes()?;
        self.write(path, &bytes)
    }
}

fn py_list(xs: &[f64]) -> String {
    let items: Vec<String> = xs
        .iter()
        .map(|x| if x.is_finite() { format!("{x:e}") } else { "float('nan')".into() })
        .collect();
    format!("[{}]", items.join(", "))
}

const PY_HEADER: &str = "import matplotlib\nmatplotlib.use(\"Agg\")\nimport matplotlib.pyplot as plt\n\n";

pub fn convergence_plot(h: &[f64], err: &[f64], slope: Option<f64>, png: &str) -> String {
    let label = slope.map(|s| format!("fitted slope {s:.3}")).unwrap_or_else(|| "slope undefined".into());
    format!(
        "{PY_HEADER}h = {}\nerr = {}\nplt.loglog(h, err, \"o-\", label=\"{label}\")\n\
         plt.xlabel(\"fill distance h\")\nplt.ylabel(\"sup error\")\nplt.legend()\nplt.grid(True, which=\"both\")\n\
         plt.savefig(\"{png}\", dpi=150)\n",
        py_list(h),
        py_list(err)
    )
}

/// Error-vs-size curves together with the reference `size^(-r/(2d+1))`.
pub fn size_plot(size: &[f64], curves: &[(&str, &[f64])], exponent: f64, png: &str) -> String {
    let mut s = format!("{PY_HEADER}size = {}\n", py_list(size));
    for (i, (label, ys)) in curves.iter().enumerate() {
        s += &format!("y{i} = {}\nplt.loglog(size, y{i}, \"o-\", label=\"{label}\")\n", py_list(ys));
    }
    s += &format!(
        "ref_exp = {exponent:e}\nif size and y0[0] == y0[0]:\n    \
         plt.loglog(size, [y0[0] * (s / size[0]) ** (-1.0 / ref_exp) for s in size], \"k--\", \
         label=\"size ~ eps^-(2d+1)/r\")\n\
         plt.xlabel(\"network size\")\nplt.ylabel(\"sup error\")\nplt.legend()\nplt.grid(True, which=\"both\")\n\
         plt.savefig(\"{png}\", dpi=150)\n"
    );
    s
}

pub fn tstar_plot(t: &[f64], min_det: &[f64], tstar: Option<f64>, png: &str) -> String {
    let mut s = format!(
        "{PY_HEADER}t = {}\nmin_det = {}\nplt.plot(t, min_det, \"o-\")\nplt.axhline(0.0, color=\"k\", lw=0.5)\n",
        py_list(t),
        py_list(min_det)
    );
    if let Some(ts) = tstar {
        s += &format!("plt.axvline({ts:e}, color=\"r\", ls=\"--\", label=\"T* = {ts:.4}\")\nplt.legend()\n");
    }
    s += &format!("plt.xlabel(\"t\")\nplt.ylabel(\"min det\")\nplt.savefig(\"{png}\", dpi=150)\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_exact_power_law() {
        let pairs: Vec<(f64, f64)> = [0.1f64, 0.05, 0.025].iter().map(|h| (*h, 3.0 * h.powi(4))).collect();
        assert!((fit_loglog_slope(&pairs).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn slope_undefined_or_filtered() {
        assert_eq!(fit_loglog_slope(&[(0.1, 1e-3)]), None);
        assert_eq!(fit_loglog_slope(&[]), None);
        assert_eq!(fit_loglog_slope(&[(0.1, 1e-3), (0.05, 1e-13)]), None);
        let s = fit_loglog_slope(&[(0.2, 4e-2), (0.1, 1e-2), (0.05, 1e-14)]).unwrap();
        assert!((s - 2.0).abs() < 1e-12);
    }

    #[test]
    fn manifest_hash_tracks_inputs() {
        let cfg = RunConfig::default();
        let a = Manifest::new("oracle", 1, &cfg, &[]).unwrap();
        assert_eq!(a.input_hash, Manifest::new("oracle", 1, &cfg, &[]).unwrap().input_hash);
        assert_ne!(a.input_hash, Manifest::new("oracle", 2, &cfg, &[]).unwrap().input_hash);
        assert_ne!(a.input_hash, Manifest::new("solve", 1, &cfg, &[]).unwrap().input_hash);
        assert_ne!(a.input_hash, Manifest::new("oracle", 1, &cfg, &[b"x"]).unwrap().input_hash);
        assert_eq!(a.input_hash.len(), 64);
        let back: Manifest = serde_json::from_str(&a.to_json().unwrap()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn table_quotes_and_appends_hash() {
        let m = Manifest::new("oracle", 0, &RunConfig::default(), &[]).unwrap();
        let mut t = Table::new(&["a", "status"], &m);
        t.push(vec![num(0.1), "error: bad, \"x\"".into()]);
        let text = String::from_utf8(t.to_bytes().unwrap()).unwrap();
        assert!(text.starts_with("a,status,manifest_hash\n"));
        assert!(text.contains("\"error: bad, \"\"x\"\"\""));
        assert!(text.trim_end().ends_with(&m.input_hash));
    }

    #[test]
    fn atomic_write_leaves_no_temp_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        write_atomic(&p, b"x").unwrap();
        write_atomic(&p, b"y").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"y");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
