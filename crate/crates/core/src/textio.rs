//! Deterministic text output helpers shared by the CSV writers.

use std::fs;
use std::io;
use std::path::Path;

/// Format a float with 17 significant digits ('.' decimal, no locale) so the
/// printed value round-trips through parsing.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        // Avoid "-0" artifacts in output files.
        return "0".to_string();
    }
    format!("{:.16e}", x)
}

/// Optional float column: empty cell when absent.
pub fn fmt_opt_f64(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Write `contents` to `path` atomically: write a sibling temp file, then
/// rename over the target.
pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let file_name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let tmp = dir.join(format!(".{}.tmp", file_name.to_string_lossy()));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for &x in &[0.1, -3.25e-17, 1.0 / 3.0, 9.9e300, 0.0] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }

    #[test]
    fn optional_floats() {
        assert_eq!(fmt_opt_f64(None), "");
        assert!(!fmt_opt_f64(Some(1.5)).is_empty());
    }
}
