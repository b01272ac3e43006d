//! Flat key=value config files with `[section]` headers.
//!
//! Lines are `key = value`; `#` starts a comment; values may be scalars or
//! comma-separated lists. Deliberately small: diff-friendly configs, no
//! nesting, no quoting.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct KvFile {
    origin: PathBuf,
    sections: BTreeMap<String, KvSection>,
}

#[derive(Debug, Clone, Default)]
pub struct KvSection {
    entries: BTreeMap<String, (String, usize)>,
}

impl KvFile {
    pub fn parse_str(text: &str, origin: impl Into<PathBuf>) -> Result<Self> {
        let origin = origin.into();
        let mut sections: BTreeMap<String, KvSection> = BTreeMap::new();
        let mut current = String::new();
        sections.insert(String::new(), KvSection::default());
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| Error::ConfigParse {
                    path: origin.clone(),
                    line: lineno + 1,
                    reason: "section header missing closing `]`".into(),
                })?;
                current = name.trim().to_string();
                sections.entry(current.clone()).or_default();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::ConfigParse {
                path: origin.clone(),
                line: lineno + 1,
                reason: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(Error::ConfigParse {
                    path: origin.clone(),
                    line: lineno + 1,
                    reason: "empty key".into(),
                });
            }
            sections
                .get_mut(&current)
                .unwrap()
                .entries
                .insert(key, (value.trim().to_string(), lineno + 1));
        }
        Ok(KvFile { origin, sections })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::ConfigIo {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse_str(&text, path)
    }

    pub fn section<'a>(&'a self, name: &'a str) -> Kv<'a> {
        Kv {
            file: self,
            section: name,
            data: self.sections.get(name),
        }
    }

    pub fn has_section(&self, name: &str) -> bool {
        self.sections.contains_key(name)
    }

    pub fn origin(&self) -> &Path {
        &self.origin
    }
}

/// Accessor for one section; `get_*` return `Ok(None)` when the key is absent,
/// `req_*` error out with the qualified field name.
#[derive(Clone, Copy)]
pub struct Kv<'a> {
    file: &'a KvFile,
    section: &'a str,
    data: Option<&'a KvSection>,
}

impl<'a> Kv<'a> {
    fn field(&self, key: &str) -> String {
        if self.section.is_empty() {
            key.to_string()
        } else {
            format!("{}.{}", self.section, key)
        }
    }

    pub fn raw(&self, key: &str) -> Option<&'a str> {
        self.data
            .and_then(|s| s.entries.get(key))
            .map(|(v, _)| v.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>> {
        self.raw(key)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::config(self.field(key), format!("not a number: `{v}`")))
            })
            .transpose()
    }

    pub fn req_f64(&self, key: &str) -> Result<f64> {
        self.get_f64(key)?
            .ok_or_else(|| Error::config(self.field(key), "missing required key"))
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.get_f64(key)?.unwrap_or(default))
    }

    pub fn get_u64(&self, key: &str) -> Result<Option<u64>> {
        self.raw(key)
            .map(|v| {
                v.parse::<u64>().map_err(|_| {
                    Error::config(self.field(key), format!("not a non-negative integer: `{v}`"))
                })
            })
            .transpose()
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        Ok(self.get_u64(key)?.unwrap_or(default))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        Ok(self.u64_or(key, default as u64)? as usize)
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => match v {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                other => Err(Error::config(
                    self.field(key),
                    format!("not a boolean: `{other}`"),
                )),
            },
        }
    }

    pub fn string_or(&self, key: &str, default: &str) -> String {
        self.raw(key).unwrap_or(default).to_string()
    }

    pub fn get_f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.raw(key)
            .map(|v| {
                v.split(',')
                    .map(|item| {
                        item.trim().parse::<f64>().map_err(|_| {
                            Error::config(
                                self.field(key),
                                format!("list item not a number: `{}`", item.trim()),
                            )
                        })
                    })
                    .collect()
            })
            .transpose()
    }

    pub fn req_f64_list(&self, key: &str) -> Result<Vec<f64>> {
        self.get_f64_list(key)?
            .ok_or_else(|| Error::config(self.field(key), "missing required key"))
    }

    pub fn exists(&self) -> bool {
        self.data.is_some()
    }

    pub fn origin(&self) -> &Path {
        self.file.origin()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# top comment
alpha = 1.5
[grid]
n_points = 256   # trailing comment
span = 5.0
labels = 1.0, 2.5, -3
flag = yes
";

    #[test]
    fn parses_sections_and_scalars() {
        let f = KvFile::parse_str(SAMPLE, "test.cfg").unwrap();
        assert_eq!(f.section("").req_f64("alpha").unwrap(), 1.5);
        let grid = f.section("grid");
        assert_eq!(grid.u64_or("n_points", 0).unwrap(), 256);
        assert_eq!(grid.req_f64("span").unwrap(), 5.0);
        assert_eq!(grid.req_f64_list("labels").unwrap(), vec![1.0, 2.5, -3.0]);
        assert!(grid.bool_or("flag", false).unwrap());
    }

    #[test]
    fn missing_key_names_field() {
        let f = KvFile::parse_str(SAMPLE, "test.cfg").unwrap();
        let err = f.section("grid").req_f64("absent").unwrap_err();
        assert!(err.to_string().contains("grid.absent"), "{err}");
    }

    #[test]
    fn bad_number_is_an_error() {
        let f = KvFile::parse_str("x = notanumber\n", "t.cfg").unwrap();
        assert!(f.section("").req_f64("x").is_err());
    }

    #[test]
    fn bad_line_reports_location() {
        let err = KvFile::parse_str("[grid]\njunk line\n", "t.cfg").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("t.cfg:2"), "{msg}");
    }
}
