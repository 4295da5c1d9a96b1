//! Result files and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use seqbudget::evolution::RankedMember;

pub const FORMAT_VERSION: u32 = 1;

/// Header lines every output file starts with.
pub fn header(w: &mut impl Write, hash: &str, extra: &[String]) -> std::io::Result<()> {
    writeln!(w, "# format_version={FORMAT_VERSION}")?;
    writeln!(w, "# config_hash={hash}")?;
    for line in extra {
        writeln!(w, "# {line}")?;
    }
    Ok(())
}

/// Front members, one line each: chromosome, g1, g2, raw cost, g3, rank,
/// fitness.
pub fn write_front(
    w: &mut impl Write,
    hash: &str,
    extra: &[String],
    members: &[RankedMember],
) -> std::io::Result<()> {
    header(w, hash, extra)?;
    writeln!(w, "chromosome,g1,g2,raw_cost,g3,rank,fitness")?;
    for m in members {
        let o = &m.objectives;
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            m.chromosome, o.coverage, o.accuracy, o.raw_cost, o.inverse_cost, m.rank, m.fitness
        )?;
    }
    Ok(())
}

/// Writes a file in full, creating parent directories.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    /// File name relative to the output directory.
    pub front_file: Option<String>,
    pub generations: usize,
    pub halt: String,
    /// Front members recovered in each generation, when a reference front
    /// was available.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recovery: Option<Vec<usize>>,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub command: String,
    pub config_hash: String,
    /// Where the configuration was read from.
    pub config_origin: PathBuf,
    /// Directory relative dataset paths resolve against.
    pub config_base_dir: PathBuf,
    /// The configuration file verbatim.
    pub config_text: String,
    pub seeds: Vec<u64>,
    /// Baseline choice, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    /// The GA settings in force after defaults were filled in.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effective_ga: Option<serde_json::Value>,
    pub runs: Vec<RunRecord>,
    pub outputs: Vec<String>,
    pub wall_time_secs: f64,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| crate::config::usage(format!("cannot read {}: {e}", path.display())))?;
        let m: Manifest = serde_json::from_str(&text)
            .map_err(|e| crate::config::usage(format!("{}: {e}", path.display())))?;
        if m.format_version != FORMAT_VERSION {
            return Err(crate::config::usage(format!(
                "{}: manifest format {} is not supported (expected {FORMAT_VERSION})",
                path.display(),
                m.format_version
            )));
        }
        Ok(m)
    }

    pub fn write(&self, out: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        write_file(&out.join("manifest.json"), json.as_bytes())
    }
}
