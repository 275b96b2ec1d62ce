//! CSV tables and `key: value` result files.

use std::path::Path;

use crate::error::{Error, Result};

/// Floating-point text with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.16e}")
    }
}

/// Comma-separated table with a header row.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Csv {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Csv {
            header: header.iter().map(|h| h.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: &[f64]) {
        assert_eq!(
            row.len(),
            self.header.len(),
            "row width differs from the header"
        );
        self.rows.push(row.to_vec());
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn render(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(e.to_string());
        let mut put = || -> Result<()> {
            w.write_record(&self.header).map_err(io)?;
            for r in &self.rows {
                w.write_record(r.iter().map(|&v| fmt_f64(v))).map_err(io)?;
            }
            Ok(())
        };
        put().expect("writing CSV into memory");
        String::from_utf8(w.into_inner().expect("in-memory CSV flush"))
            .expect("CSV output is UTF-8")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }
}

/// Ordered `key: value` lines with dotted nested keys.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResultFile {
    entries: Vec<(String, String)>,
}

impl ResultFile {
    pub fn num(&mut self, key: &str, v: f64) {
        self.entries.push((key.to_string(), fmt_f64(v)));
    }

    pub fn int(&mut self, key: &str, v: u64) {
        self.entries.push((key.to_string(), v.to_string()));
    }

    pub fn text(&mut self, key: &str, v: &str) {
        self.entries.push((key.to_string(), v.replace('\n', " ")));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        self.entries
            .iter()
            .map(|(k, v)| format!("{k}: {v}\n"))
            .collect()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }
}

/// Parse a `key: value` file back into pairs.
pub fn parse_result(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| l.split_once(": "))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
            let mantissa = s
                .split('e')
                .next()
                .unwrap()
                .trim_start_matches('-')
                .replace('.', "");
            assert_eq!(mantissa.len(), 17);
        }
    }

    #[test]
    fn csv_and_result_render() {
        let mut c = Csv::new(&["a", "b"]);
        c.push(&[1.0, 0.5]);
        assert_eq!(
            c.render(),
            "a,b\n1.0000000000000000e0,5.0000000000000000e-1\n"
        );
        let mut r = ResultFile::default();
        r.num("ledger.eps_qae", 0.25);
        r.text("mode", "faithful");
        let parsed = parse_result(&r.render());
        assert_eq!(
            parsed[0],
            (
                "ledger.eps_qae".to_string(),
                "2.5000000000000000e-1".to_string()
            )
        );
        assert_eq!(r.get("mode"), Some("faithful"));
    }
}
