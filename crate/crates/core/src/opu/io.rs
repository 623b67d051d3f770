use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Reads every numeric field of a header-less CSV, row by row.
pub fn read_vector_csv<R: Read>(input: R) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        for field in record.iter().filter(|f| !f.is_empty()) {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::param("csv", format!("`{field}` is not a number")))?;
            out.push(v);
        }
    }
    Ok(out)
}

/// Writes `index,ideal,noisy` rows.
pub fn write_trace_csv<W: Write>(out: W, ideal: &[f64], noisy: &[f64]) -> Result<()> {
    if ideal.len() != noisy.len() {
        return Err(Error::shape(
            format!("{} noisy samples", ideal.len()),
            noisy.len(),
        ));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "ideal", "noisy"])?;
    for (i, (a, b)) in ideal.iter().zip(noisy).enumerate() {
        w.write_record([i.to_string(), a.to_string(), b.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_rows_and_columns() {
        let v = read_vector_csv("1, -2.5\n3\n\n0.25,\n".as_bytes()).unwrap();
        assert_eq!(v, vec![1.0, -2.5, 3.0, 0.25]);
        assert!(read_vector_csv("1,x".as_bytes()).is_err());
    }

    #[test]
    fn trace_layout() {
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &[0.5, 1.0], &[0.52, 0.98]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "index,ideal,noisy\n0,0.5,0.52\n1,1,0.98\n"
        );
    }
}
