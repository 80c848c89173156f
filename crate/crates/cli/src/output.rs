//! Writers for the output files. Each file is written once, by one thread.

use std::fs;
use std::path::Path;

use k3limit::io::{fmt_f64, to_json_string};
use num_complex::Complex64;
use serde::Serialize;

use crate::CliError;

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    fs::write(path, to_json_string(value)?)?;
    Ok(())
}

pub fn f(x: f64) -> String {
    fmt_f64(x)
}

pub fn re_im(z: Complex64) -> [String; 2] {
    [fmt_f64(z.re), fmt_f64(z.im)]
}

/// A CSV table whose first line records the seed as a `#` comment.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(seed: u64, header: &[&str]) -> Csv {
        Csv {
            text: format!("# seed={seed}\n{}\n", header.join(",")),
        }
    }

    pub fn row<S: AsRef<str>>(&mut self, cells: impl IntoIterator<Item = S>) {
        let cells: Vec<String> = cells.into_iter().map(|c| c.as_ref().to_string()).collect();
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    /// Prepends the seed comment to a table rendered elsewhere.
    pub fn from_rendered(seed: u64, body: &str) -> Csv {
        Csv {
            text: format!("# seed={seed}\n{body}"),
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        fs::write(path, &self.text)?;
        Ok(())
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

/// Inserts a seed comment after the opening `<svg …>` tag.
pub fn svg_with_seed(seed: u64, svg: &str) -> String {
    match svg.find('>') {
        Some(i) if svg[..i].contains("<svg") => format!("{}\n<!-- seed={seed} -->{}", &svg[..=i], &svg[i + 1..]),
        _ => format!("<!-- seed={seed} -->\n{svg}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_rows_and_seed_line() {
        let mut t = Csv::new(7, &["a", "b"]);
        t.row([f(0.1), "x".to_string()]);
        assert_eq!(t.as_str(), "# seed=7\na,b\n1.0000000000000001e-1,x\n");
    }

    #[test]
    fn seed_comment_follows_the_root_tag() {
        let s = svg_with_seed(3, "<svg width=\"1\"><g/></svg>");
        assert_eq!(s, "<svg width=\"1\">\n<!-- seed=3 --><g/></svg>");
    }
}
