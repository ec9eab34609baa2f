//! Flat `key = value` configuration files.
//!
//! Keys are the long flag names (`snapshot-every`, `rho`, ...); `_` and `-`
//! are interchangeable. Flags on the command line win over file values,
//! which win over built-in defaults.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::CliError;

#[derive(Debug)]
pub struct ConfigFile {
    path: PathBuf,
    entries: BTreeMap<String, (usize, String)>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(path, &text)
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Config(format!(
                    "{}:{line_no}: expected 'key = value', got '{line}'",
                    path.display()
                )));
            };
            let key = normalize(key.trim());
            if key.is_empty() {
                return Err(CliError::Config(format!("{}:{line_no}: empty key", path.display())));
            }
            if let Some((first, _)) = entries.insert(key.clone(), (line_no, value.trim().to_string())) {
                return Err(CliError::Config(format!(
                    "{}:{line_no}: field '{key}' already set on line {first}",
                    path.display()
                )));
            }
        }
        Ok(Self {
            path: path.to_path_buf(),
            entries,
        })
    }

    /// Removes and parses `key`, if present.
    pub fn take<T>(&mut self, key: &str) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((line, value)) => value
                .parse()
                .map(Some)
                .map_err(|e| CliError::Config(format!("{}:{line}: field '{key}': {e}", self.path.display()))),
        }
    }

    /// Fails on the first key no command consumed.
    pub fn finish(self) -> Result<(), CliError> {
        match self.entries.iter().min_by_key(|(_, (line, _))| *line) {
            None => Ok(()),
            Some((key, (line, _))) => Err(CliError::Config(format!(
                "{}:{line}: unknown field '{key}'",
                self.path.display()
            ))),
        }
    }
}

fn normalize(key: &str) -> String {
    key.replace('_', "-").to_ascii_lowercase()
}

/// Resolves one setting: flag, then config file, then `default`.
pub struct Resolver {
    file: Option<ConfigFile>,
}

impl Resolver {
    pub fn new(path: Option<&Path>) -> Result<Self, CliError> {
        Ok(Self {
            file: path.map(ConfigFile::load).transpose()?,
        })
    }

    #[cfg(test)]
    fn from_file(file: ConfigFile) -> Self {
        Self { file: Some(file) }
    }

    pub fn get<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.get_opt(key, flag)?.unwrap_or(default))
    }

    pub fn get_opt<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        // Parse the file value even when a flag overrides it, so typos still surface.
        let from_file = match self.file.as_mut() {
            Some(f) => f.take(key)?,
            None => None,
        };
        Ok(flag.or(from_file))
    }

    pub fn finish(self) -> Result<(), CliError> {
        self.file.map_or(Ok(()), ConfigFile::finish)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(text: &str) -> ConfigFile {
        ConfigFile::parse(Path::new("run.conf"), text).unwrap()
    }

    #[test]
    fn parses_comments_and_separators() {
        let mut f = file("# header\nrho = 0.3\nsnapshot_every=50 # inline\n\n");
        assert_eq!(f.take::<f64>("rho").unwrap(), Some(0.3));
        assert_eq!(f.take::<u64>("snapshot-every").unwrap(), Some(50));
        assert_eq!(f.take::<u64>("seed").unwrap(), None);
        f.finish().unwrap();
    }

    #[test]
    fn flag_beats_file_beats_default() {
        let mut r = Resolver::from_file(file("rho = 0.3\nseed = 9\n"));
        assert_eq!(r.get("rho", Some(0.1), 0.2).unwrap(), 0.1);
        assert_eq!(r.get("seed", None, 0u64).unwrap(), 9);
        assert_eq!(r.get("gamma", None, 0.5).unwrap(), 0.5);
        r.finish().unwrap();
    }

    #[test]
    fn diagnostics_name_line_and_field() {
        let err = ConfigFile::parse(Path::new("c"), "rho 0.3").unwrap_err();
        assert!(err.to_string().contains("c:1"), "{err}");

        let mut f = file("seed = 1\nrho = lots\n");
        let err = f.take::<f64>("rho").unwrap_err().to_string();
        assert!(err.contains("run.conf:2") && err.contains("'rho'"), "{err}");

        let mut f = file("seed = 1\nbogus = 2\n");
        f.take::<u64>("seed").unwrap();
        let err = f.finish().unwrap_err().to_string();
        assert!(err.contains(":2: unknown field 'bogus'"), "{err}");

        let err = ConfigFile::parse(Path::new("c"), "a=1\na=2").unwrap_err().to_string();
        assert!(err.contains("line 1"), "{err}");
    }
}
