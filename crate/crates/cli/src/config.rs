//! Flat key=value config files and flag/config merging.
//!
//! Files are UTF-8 text, one `key = value` per line, `#` starts a
//! comment. Command-line flags take precedence over config keys; keys a
//! command does not know are rejected so that typos fail loudly.

use std::collections::HashMap;
use std::path::Path;

use crate::CliError;

#[derive(Debug, Default)]
pub struct Overlay {
    values: HashMap<String, String>,
}

impl Overlay {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let mut values = HashMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Config(format!("cannot read config {}: {e}", path.display()))
            })?;
            for (lineno, raw) in text.lines().enumerate() {
                let line = raw.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let Some((key, value)) = line.split_once('=') else {
                    return Err(CliError::Config(format!(
                        "{}:{}: expected key = value, got {raw:?}",
                        path.display(),
                        lineno + 1
                    )));
                };
                values.insert(key.trim().to_string(), value.trim().to_string());
            }
        }
        Ok(Overlay { values })
    }

    /// Reject keys the invoking command does not understand.
    pub fn check_known(&self, known: &[&str]) -> Result<(), CliError> {
        for key in self.values.keys() {
            if !known.contains(&key.as_str()) {
                return Err(CliError::Config(format!("unknown config key {key:?}")));
            }
        }
        Ok(())
    }

    /// Flag value if given, else config value, else default.
    pub fn pick<T: std::str::FromStr>(
        &self,
        flag: Option<T>,
        key: &str,
        default: T,
    ) -> Result<T, CliError> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.values.get(key) {
            Some(raw) => raw
                .parse()
                .map_err(|_| CliError::Config(format!("config key {key} = {raw:?} is invalid"))),
            None => Ok(default),
        }
    }

    /// Flag value if given, else config value, else None.
    pub fn pick_opt<T: std::str::FromStr>(
        &self,
        flag: Option<T>,
        key: &str,
    ) -> Result<Option<T>, CliError> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| CliError::Config(format!("config key {key} = {raw:?} is invalid"))),
            None => Ok(None),
        }
    }
}

/// "A:B" span strings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Span(pub f64, pub f64);

impl std::str::FromStr for Span {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| format!("expected A:B, got {s:?}"))?;
        let a: f64 = a.trim().parse().map_err(|e| format!("bad span start: {e}"))?;
        let b: f64 = b.trim().parse().map_err(|e| format!("bad span end: {e}"))?;
        if !a.is_finite() || !b.is_finite() || a == b {
            return Err(format!("degenerate span {s:?}"));
        }
        Ok(Span(a, b))
    }
}

/// "re,im" complex strings (the imaginary part may be omitted).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComplexArg(pub f64, pub f64);

impl std::str::FromStr for ComplexArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (re, im) = match s.split_once(',') {
            Some((re, im)) => (re.trim(), im.trim()),
            None => (s.trim(), "0"),
        };
        let re: f64 = re.parse().map_err(|e| format!("bad real part: {e}"))?;
        let im: f64 = im.parse().map_err(|e| format!("bad imaginary part: {e}"))?;
        Ok(ComplexArg(re, im))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn parses_key_value_lines() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "# comment\nc = 1.0\nk= 2 # trailing\n\ntau = 1:10").unwrap();
        let overlay = Overlay::load(Some(file.path())).unwrap();
        overlay.check_known(&["c", "k", "tau"]).unwrap();
        assert_eq!(overlay.pick(None::<f64>, "c", 0.0).unwrap(), 1.0);
        assert_eq!(overlay.pick(None::<f64>, "k", 0.0).unwrap(), 2.0);
        assert_eq!(
            overlay.pick(None::<Span>, "tau", Span(0.0, 1.0)).unwrap(),
            Span(1.0, 10.0)
        );
        // flags beat config
        assert_eq!(overlay.pick(Some(7.0), "c", 0.0).unwrap(), 7.0);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_lines() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "mystery = 1").unwrap();
        let overlay = Overlay::load(Some(file.path())).unwrap();
        assert!(overlay.check_known(&["c"]).is_err());

        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "no equals sign").unwrap();
        assert!(Overlay::load(Some(file.path())).is_err());
    }

    #[test]
    fn span_and_complex_parsing() {
        assert_eq!("1:100".parse::<Span>().unwrap(), Span(1.0, 100.0));
        assert!("1".parse::<Span>().is_err());
        assert!("1:1".parse::<Span>().is_err());
        assert_eq!("0.5,0.8".parse::<ComplexArg>().unwrap(), ComplexArg(0.5, 0.8));
        assert_eq!("2".parse::<ComplexArg>().unwrap(), ComplexArg(2.0, 0.0));
    }
}
