//! File writers. Every file carries the artifact version and the config
//! hash; CSV values use 17 significant digits.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{CliError, CliResult};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Stamp {
    pub version: &'static str,
    pub config_hash: String,
}

impl Stamp {
    pub fn new(config_hash: String) -> Self {
        Self {
            version: VERSION,
            config_hash,
        }
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    artifact: &'static str,
    version: &'static str,
    config_hash: &'a str,
    kind: &'a str,
    data: &'a T,
}

/// Round-trip exact decimal form of a double.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write to a sibling temporary file, then rename into place.
fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp).map_err(|e| CliError::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| CliError::io(&tmp, e))?;
    f.sync_all().map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, stamp: &Stamp, kind: &str, data: &T) -> CliResult<()> {
    let env = Envelope {
        artifact: "surfnoise",
        version: stamp.version,
        config_hash: &stamp.config_hash,
        kind,
        data,
    };
    let mut text = serde_json::to_string_pretty(&env).map_err(|e| CliError::io(path, e))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Read back the `data` member of a file written by [`write_json`] if its
/// hash matches.
pub fn read_json_data(path: &Path, stamp: &Stamp) -> Option<serde_json::Value> {
    let text = fs::read_to_string(path).ok()?;
    let v: serde_json::Value = serde_json::from_str(&text).ok()?;
    if v.get("config_hash")?.as_str()? != stamp.config_hash || v.get("version")?.as_str()? != stamp.version {
        return None;
    }
    v.get("data").cloned()
}

pub fn write_csv(path: &Path, stamp: &Stamp, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    let mut text = format!("# surfnoise {} config_sha256={}\n", stamp.version, stamp.config_hash);
    text.push_str(&header.join(","));
    text.push('\n');
    for r in rows {
        debug_assert_eq!(r.len(), header.len());
        text.push_str(&r.join(","));
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}

/// File-name tag for one (N, T/w0) point.
pub fn point_tag(n: usize, t: f64) -> String {
    format!("N{n}_T{t}")
}

/// Local d ln S / d ln w by centred differences (one-sided at the ends).
pub fn local_slopes(omega: &[f64], s: &[f64]) -> Vec<f64> {
    let n = omega.len();
    if n < 2 {
        return vec![f64::NAN; n];
    }
    let slope = |a: usize, b: usize| (s[b] / s[a]).ln() / (omega[b] / omega[a]).ln();
    (0..n)
        .map(|i| match i {
            0 => slope(0, 1),
            i if i == n - 1 => slope(n - 2, n - 1),
            i => slope(i - 1, i + 1),
        })
        .collect()
}
