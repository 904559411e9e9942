//! CSV tables, the resume journal and the diagnostics stream.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

/// Twelve significant digits, independent of locale.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.11e}")
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// One CSV record without the trailing newline; quoting is left to `csv`.
pub fn record(fields: &[String]) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(fields).expect("in-memory write");
    let mut s = String::from_utf8(w.into_inner().expect("flush")).expect("utf8 fields");
    s.pop();
    s
}

pub fn header_comments(command: &str, config_hash: &str) -> String {
    format!("# cirsim {} {}\n# config_sha256 {}\n", env!("CARGO_PKG_VERSION"), command, config_hash)
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum JournalEntry {
    Start { config_sha256: String, rows: usize },
    Row { index: usize, line: String, diagnostics: BTreeMap<String, f64> },
}

/// Append-only record of finished rows next to the output table.
pub struct Journal {
    file: File,
    pub path: PathBuf,
}

pub struct Restored {
    pub rows: BTreeMap<usize, (String, BTreeMap<String, f64>)>,
}

pub fn journal_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".journal");
    out.with_file_name(name)
}

impl Journal {
    /// Opens the journal; with `resume` an existing one is read back and must
    /// belong to the same configuration.
    pub fn open(out: &Path, config_hash: &str, rows: usize, resume: bool) -> anyhow::Result<(Self, Restored)> {
        let path = journal_path(out);
        let mut restored = Restored { rows: BTreeMap::new() };
        let exists = path.exists();
        if resume && exists {
            let reader = BufReader::new(File::open(&path)?);
            for (n, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                // a torn last line from an interrupted write is dropped
                let Ok(entry) = serde_json::from_str::<JournalEntry>(&line) else { continue };
                match entry {
                    JournalEntry::Start { config_sha256, rows: r } => {
                        if n != 0 || config_sha256 != config_hash || r != rows {
                            bail!("journal {} belongs to a different configuration", path.display());
                        }
                    }
                    JournalEntry::Row { index, line, diagnostics } => {
                        if index < rows {
                            restored.rows.insert(index, (line, diagnostics));
                        }
                    }
                }
            }
            let file = OpenOptions::new().append(true).open(&path)?;
            return Ok((Self { file, path }, restored));
        }
        let mut file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        let start = JournalEntry::Start { config_sha256: config_hash.into(), rows };
        writeln!(file, "{}", serde_json::to_string(&start)?)?;
        file.flush()?;
        Ok((Self { file, path }, restored))
    }

    pub fn append(&mut self, index: usize, line: &str, diagnostics: &BTreeMap<String, f64>) -> anyhow::Result<()> {
        let e = JournalEntry::Row { index, line: line.into(), diagnostics: diagnostics.clone() };
        writeln!(self.file, "{}", serde_json::to_string(&e)?)?;
        self.file.flush()?;
        Ok(())
    }

    pub fn remove(self) -> anyhow::Result<()> {
        drop(self.file);
        fs::remove_file(&self.path)?;
        Ok(())
    }
}

/// Writes `text` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, text: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_os_string();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, text)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn diagnostics_line(index: usize, diagnostics: &BTreeMap<String, f64>) -> String {
    #[derive(Serialize)]
    struct Line<'a> {
        index: usize,
        #[serde(flatten)]
        d: &'a BTreeMap<String, f64>,
    }
    serde_json::to_string(&Line { index, d: diagnostics }).expect("finite map serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_carry_twelve_digits() {
        assert_eq!(fmt_f64(1.0), "1.00000000000e0");
        assert_eq!(fmt_f64(-0.125), "-1.25000000000e-1");
        assert_eq!(fmt_opt(None), "");
    }

    #[test]
    fn records_quote_commas() {
        assert_eq!(record(&["a".into(), "b,c".into()]), "a,\"b,c\"");
    }

    #[test]
    fn journal_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("t.csv");
        let d = BTreeMap::from([("x".to_string(), 1.5)]);
        {
            let (mut j, r) = Journal::open(&out, "h", 3, false).unwrap();
            assert!(r.rows.is_empty());
            j.append(2, "row2", &d).unwrap();
        }
        let (_, r) = Journal::open(&out, "h", 3, true).unwrap();
        assert_eq!(r.rows[&2].0, "row2");
        assert!(Journal::open(&out, "other", 3, true).is_err());
    }
}
