//! Deterministic CSV/JSON artifact writers. Every file starts with a comment
//! line carrying the schema tag and the resolved configuration, so each run
//! is self-describing.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::CliError;

pub const VERSION_STRING: &str = concat!("cogarq-v", env!("CARGO_PKG_VERSION"));

pub const SWEEP_HEADER: &str = "w,policy,r_p,r_s,r,stderr_r,horizon,replications,seed,version";
pub const CLOSEDFORM_HEADER: &str = "w,m_star,r_p,r_s,r";
pub const M_VS_W_HEADER: &str = "w,m_star,m_greedy";
pub const ESTIMATION_HEADER: &str = "length,seed,p_ee_hat,p_ne_hat";
pub const DEGRADATION_HEADER: &str = "w,length,mean_r_true,mean_r_estimated,mean_degradation";

pub fn ensure_out_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Usage(format!("cannot create output dir {}: {e}", dir.display())))
}

pub fn write_csv(
    dir: &Path,
    file_name: &str,
    schema: &str,
    config: &serde_json::Value,
    header: &str,
    rows: &[String],
) -> Result<PathBuf, CliError> {
    ensure_out_dir(dir)?;
    let path = dir.join(file_name);
    let mut out = String::new();
    out.push_str(&format!("# schema={schema} config={config}\n"));
    out.push_str(header);
    out.push('\n');
    for row in rows {
        out.push_str(row);
        out.push('\n');
    }
    write_atomically(&path, out.as_bytes())?;
    Ok(path)
}

pub fn write_json(
    dir: &Path,
    file_name: &str,
    value: &serde_json::Value,
) -> Result<PathBuf, CliError> {
    ensure_out_dir(dir)?;
    let path = dir.join(file_name);
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Usage(format!("serialization failed: {e}")))?;
    write_atomically(&path, text.as_bytes())?;
    Ok(path)
}

pub fn write_text(dir: &Path, file_name: &str, text: &str) -> Result<PathBuf, CliError> {
    ensure_out_dir(dir)?;
    let path = dir.join(file_name);
    write_atomically(&path, text.as_bytes())?;
    Ok(path)
}

fn write_atomically(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    let mut file = std::fs::File::create(&tmp)
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", tmp.display())))?;
    file.write_all(bytes)
        .and_then(|_| file.flush())
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", tmp.display())))?;
    drop(file);
    std::fs::rename(&tmp, path)
        .map_err(|e| CliError::Usage(format!("cannot finalize {}: {e}", path.display())))
}
