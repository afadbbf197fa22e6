//! Text formats shared by the CSV and JSON artifacts.

use std::fmt::Write as _;

/// A float with 17 significant digits in scientific notation, the format used
/// in every CSV column. Non-finite values print as `nan`, `inf`, `-inf`.
pub fn fmt17(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.16e}")
    }
}

/// Minimal CSV table: a header and rows of already formatted cells.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len(), "row width mismatch");
        self.rows.push(row);
    }

    /// Serialised text with `\n` line endings. Cells containing commas or
    /// quotes are quoted.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let line = |cells: &[String], out: &mut String| {
            for (i, c) in cells.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                if c.contains([',', '"', '\n']) {
                    let _ = write!(out, "\"{}\"", c.replace('"', "\"\""));
                } else {
                    out.push_str(c);
                }
            }
            out.push('\n');
        };
        line(&self.header, &mut out);
        for r in &self.rows {
            line(r, &mut out);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23] {
            let s = fmt17(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            assert_eq!(s.split('e').next().unwrap().trim_start_matches('-').replace('.', "").len(), 17);
        }
        assert_eq!(fmt17(f64::NAN), "nan");
    }

    #[test]
    fn csv_quotes_when_needed() {
        let mut t = CsvTable::new(&["poly", "v"]);
        t.push(vec!["n^3,n".into(), "1".into()]);
        assert_eq!(t.to_csv(), "poly,v\n\"n^3,n\",1\n");
    }
}
