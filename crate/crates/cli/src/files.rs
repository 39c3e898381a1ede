//! Small file-handling helpers shared by the subcommands.

use std::path::Path;

use anyhow::{bail, Context};

/// Refuses to clobber existing outputs unless `--force` was given.
pub fn check_overwrite(paths: &[&Path], force: bool) -> anyhow::Result<()> {
    if force {
        return Ok(());
    }
    for path in paths {
        if path.exists() {
            bail!(
                "refusing to overwrite {} (pass --force to allow)",
                path.display()
            );
        }
    }
    Ok(())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
