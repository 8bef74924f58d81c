//! Breath-track CSV: header `t,p1,p2,p3,p4`, seconds and hPa, LF endings.

use std::io::{Read, Write};

use super::sim::{PressureFrame, PILLOWS};
use super::SimError;

pub const TRACK_HEADER: [&str; 5] = ["t", "p1", "p2", "p3", "p4"];

/// Writes frames with shortest round-trip float formatting, so reading the
/// track back yields bit-identical values.
pub fn write_track<W: Write>(out: W, frames: &[PressureFrame]) -> Result<(), SimError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(TRACK_HEADER)?;
    for f in frames {
        w.write_record([
            f.t.to_string(),
            f.values[0].to_string(),
            f.values[1].to_string(),
            f.values[2].to_string(),
            f.values[3].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a track; `seq` is the row index. Time must be strictly increasing.
pub fn read_track<R: Read>(input: R) -> Result<Vec<PressureFrame>, SimError> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().map(str::trim).ne(TRACK_HEADER) {
        return Err(SimError::Track(format!(
            "expected header `{}`, found `{}`",
            TRACK_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut frames: Vec<PressureFrame> = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64, SimError> {
            let field = rec.get(i).unwrap_or("");
            field
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| SimError::Track(format!("row {}: bad value `{field}` in column {}", row + 1, TRACK_HEADER[i])))
        };
        let t = parse(0)?;
        let mut values = [0.0; PILLOWS];
        for (i, v) in values.iter_mut().enumerate() {
            *v = parse(i + 1)?;
        }
        if let Some(prev) = frames.last() {
            if t <= prev.t {
                return Err(SimError::Track(format!("row {}: time {t} does not increase", row + 1)));
            }
        }
        frames.push(PressureFrame { t, seq: row as u64, values });
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::breath::{SimConfig, Simulator};

    #[test]
    fn round_trip_is_exact() {
        let frames = Simulator::new(&SimConfig::default(), 5).unwrap().run(300);
        let mut buf = Vec::new();
        write_track(&mut buf, &frames).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,p1,p2,p3,p4\n"));
        assert!(!text.contains('\r'));
        assert_eq!(read_track(buf.as_slice()).unwrap(), frames);
    }

    #[test]
    fn rejects_bad_header_and_time() {
        assert!(read_track("a,b,c,d,e\n0,1,2,3,4\n".as_bytes()).is_err());
        assert!(read_track("t,p1,p2,p3,p4\n0,1,2,3,4\n0,1,2,3,4\n".as_bytes()).is_err());
        assert!(read_track("t,p1,p2,p3,p4\n0,1,x,3,4\n".as_bytes()).is_err());
        assert!(read_track("t,p1,p2,p3,p4\n".as_bytes()).unwrap().is_empty());
    }
}
