//! CSV helpers shared by the modules and the command line.

use std::io::Write;

use crate::error::{Error, Result};

/// Writes a header and numeric rows. Floats use Rust's shortest round-trip
/// formatting, so output is byte-reproducible.
pub fn write_table<W, I, R>(w: W, header: &[String], rows: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = R>,
    R: AsRef<[f64]>,
{
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header)?;
    for row in rows {
        out.write_record(row.as_ref().iter().map(|v| v.to_string()))?;
    }
    out.flush()?;
    Ok(())
}

/// A parsed numeric table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }
}

/// Parses a headed CSV of finite numbers with a consistent column count.
pub fn read_table(text: &str) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.is_empty() || header.iter().any(String::is_empty) {
        return Err(Error::Schema("table header has empty column names".into()));
    }
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::Schema(format!(
                "row {} has {} fields, header has {}",
                line + 1,
                rec.len(),
                header.len()
            )));
        }
        let mut row = Vec::with_capacity(rec.len());
        for field in rec.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Schema(format!("row {}: '{field}' is not a number", line + 1)))?;
            if !v.is_finite() {
                return Err(Error::Schema(format!("row {}: non-finite value", line + 1)));
            }
            row.push(v);
        }
        rows.push(row);
    }
    Ok(Table { header, rows })
}

/// A `(time, value)` series pulled out of a trajectory or series CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub times_ns: Vec<f64>,
    pub values: Vec<f64>,
}

/// Reads `time_ns` and the named column. Times must be nondecreasing.
pub fn read_series(text: &str, column: &str) -> Result<Series> {
    let table = read_table(text)?;
    let times_ns = table.column("time_ns").ok_or_else(|| Error::Schema("missing 'time_ns' column".into()))?;
    let values = table.column(column).ok_or_else(|| Error::Schema(format!("missing '{column}' column")))?;
    if times_ns.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Schema("time_ns must be nondecreasing".into()));
    }
    Ok(Series { times_ns, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_round_trip() {
        let mut buf = Vec::new();
        let header = vec!["time_ns".to_string(), "P_0".to_string()];
        write_table(&mut buf, &header, vec![vec![0.0, 1.0], vec![0.5, 0.25]]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "time_ns,P_0\n0,1\n0.5,0.25\n");
        let s = read_series(&text, "P_0").unwrap();
        assert_eq!(s.values, vec![1.0, 0.25]);
    }

    #[test]
    fn rejects_malformed() {
        assert!(read_table("a,b\n1,2,3\n").is_err());
        assert!(read_table("a,b\n1,x\n").is_err());
        assert!(read_table("a,b\n1,NaN\n").is_err());
        assert!(read_series("time_ns,v\n1,0\n0,1\n", "v").is_err());
        assert!(read_series("t,v\n1,0\n", "v").is_err());
    }
}
