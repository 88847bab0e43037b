use std::fs;
use std::path::Path;

use anyhow::{bail, Context};

use crate::error::{CmdResult, Failure};

/// Numeric rows of a CSV file. A first line that does not parse is taken
/// as a header and skipped; blank lines are ignored.
pub fn read_rows(path: &Path) -> CmdResult<Vec<Vec<f64>>> {
    let parse = || -> anyhow::Result<Vec<Vec<f64>>> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let row: Result<Vec<f64>, _> = line.split(',').map(|v| v.trim().parse::<f64>()).collect();
            match row {
                Ok(r) => rows.push(r),
                Err(_) if i == 0 => continue,
                Err(e) => bail!("{}:{}: {e}", path.display(), i + 1),
            }
        }
        if rows.is_empty() {
            bail!("{} holds no numeric rows", path.display());
        }
        Ok(rows)
    };
    parse().map_err(Failure::Usage)
}

/// Every value of a CSV file in row-major order.
pub fn read_values(path: &Path) -> CmdResult<Vec<f64>> {
    Ok(read_rows(path)?.concat())
}

pub fn read_text(path: &Path) -> CmdResult<String> {
    fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::Usage)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_skipped_and_bad_rows_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        fs::write(&p, "x,y\n1,2\n\n3, 4\n").unwrap();
        assert_eq!(read_rows(&p).unwrap(), vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(read_values(&p).unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
        fs::write(&p, "1\nfoo\n").unwrap();
        assert!(matches!(read_rows(&p), Err(Failure::Usage(_))));
        assert!(read_rows(&dir.path().join("missing.csv")).is_err());
    }
}
