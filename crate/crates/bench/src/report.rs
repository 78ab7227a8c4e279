use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::BenchError;

/// One CSV row: a single timed repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub scenario: String,
    pub backend: String,
    pub strategy: String,
    pub threads: usize,
    pub run: usize,
    pub seconds: f64,
}

const HEADER: [&str; 6] = ["scenario", "backend", "strategy", "threads", "run", "seconds"];

/// Writes the header even when there are no rows.
pub fn write_csv(rows: &[Sample], out: impl Write) -> Result<(), BenchError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(input: impl Read) -> Result<Vec<Sample>, BenchError> {
    let mut r = csv::Reader::from_reader(input);
    if r.headers()?.iter().ne(HEADER) {
        return Err(BenchError::Usage(format!("unexpected CSV header {:?}", r.headers()?)));
    }
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mean;

    fn sample(run: usize, seconds: f64) -> Sample {
        Sample {
            scenario: "lock".into(),
            backend: "bf".into(),
            strategy: "protection-set".into(),
            threads: 4,
            run,
            seconds,
        }
    }

    #[test]
    fn empty_file_has_the_header() {
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "scenario,backend,strategy,threads,run,seconds\n");
    }

    #[test]
    fn round_trip_keeps_the_mean() {
        let rows: Vec<_> = [0.1, 0.2, 1.0 / 3.0, 2.5e-7, 12.0].iter().enumerate().map(|(i, &s)| sample(i + 1, s)).collect();
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8_lossy(&buf).lines().count(), 6);
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, rows);
        let m = |rs: &[Sample]| mean(&rs.iter().map(|r| r.seconds).collect::<Vec<_>>());
        assert_eq!(m(&back), m(&rows));
    }

    #[test]
    fn foreign_header_is_rejected() {
        assert!(read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }
}
