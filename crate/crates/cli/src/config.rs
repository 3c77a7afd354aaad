//! Optional `key=value` settings file named by `ADERDG_CONFIG`.

use std::fs;
use std::path::Path;

pub const CONFIG_ENV: &str = "ADERDG_CONFIG";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Settings {
    /// Largest N accepted by `verify` and the other commands.
    pub max_order: usize,
    pub digits: u32,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            max_order: 24,
            digits: 120,
        }
    }
}

impl Settings {
    /// Defaults overridden by the file named in `ADERDG_CONFIG`, if set.
    pub fn load() -> Result<Self, String> {
        match std::env::var_os(CONFIG_ENV) {
            Some(path) => Self::from_file(Path::new(&path)),
            None => Ok(Self::default()),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// Blank lines and `#` comments are skipped; unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut s = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key=value", i + 1))?;
            let value = value.trim();
            let bad = |what: &str| format!("line {}: {what} must be a positive integer, got {value:?}", i + 1);
            match key.trim() {
                "max_order" => s.max_order = value.parse().map_err(|_| bad("max_order"))?,
                "digits" => s.digits = value.parse().map_err(|_| bad("digits"))?,
                other => return Err(format!("line {}: unknown key {other:?}", i + 1)),
            }
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_overrides_and_comments() {
        let s = Settings::parse("# extended run\nmax_order = 75\n\ndigits=1000 # high\n").unwrap();
        assert_eq!(s, Settings { max_order: 75, digits: 1000 });
        assert_eq!(Settings::parse("").unwrap(), Settings::default());
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(Settings::parse("max_order").is_err());
        assert!(Settings::parse("digits = many").is_err());
        assert!(Settings::parse("colour = blue").is_err());
    }
}
