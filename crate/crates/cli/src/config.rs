//! TOML run configuration. Flags win over file values, file values over
//! built-in defaults.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::error::CliError;
use crate::output::Format;

/// Top-level keys apply to every command; tables named after a command
/// (`[que]`, `[bounds.auxlemma]`, ...) hold its parameters under the long
/// flag names.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct FileConfig {
    pub format: Option<Format>,
    pub output: Option<PathBuf>,
    pub workers: Option<usize>,
    #[serde(flatten)]
    pub sections: toml::Table,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::invalid(format!("config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::invalid(format!("config {}: {e}", path.display())))
    }

    fn lookup(&self, path: &[&str]) -> Option<&toml::Value> {
        let (last, head) = path.split_last()?;
        let mut table = &self.sections;
        for key in head {
            table = table.get(*key)?.as_table()?;
        }
        table.get(*last)
    }

    /// File value at `section.key` unless the flag was given.
    pub fn pick<T: DeserializeOwned>(&self, flag: Option<T>, section: &[&str], key: &str) -> Result<Option<T>, CliError> {
        if flag.is_some() {
            return Ok(flag);
        }
        let mut path = section.to_vec();
        path.push(key);
        match self.lookup(&path) {
            None => Ok(None),
            Some(v) => v
                .clone()
                .try_into()
                .map(Some)
                .map_err(|e| CliError::invalid(format!("config key {}: {e}", path.join(".")))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_beat_file_values() {
        let cfg: FileConfig = toml::from_str(
            "format = \"csv\"\n[que]\nk = [12, 24]\n[bounds.auxlemma]\ntrials = 5\n",
        )
        .unwrap();
        assert_eq!(cfg.format, Some(Format::Csv));
        assert_eq!(cfg.pick::<Vec<u32>>(None, &["que"], "k").unwrap(), Some(vec![12, 24]));
        assert_eq!(cfg.pick(Some(vec![60u32]), &["que"], "k").unwrap(), Some(vec![60]));
        assert_eq!(cfg.pick::<u32>(None, &["bounds", "auxlemma"], "trials").unwrap(), Some(5));
        assert_eq!(cfg.pick::<u32>(None, &["bounds", "unit-sum"], "trials").unwrap(), None);
        assert!(cfg.pick::<u32>(None, &["que"], "k").is_err());
    }
}
