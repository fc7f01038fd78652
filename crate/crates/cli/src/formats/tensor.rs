//! `PTENSOR v1` dumps: a header line `PTENSOR v1 J V`, then the `V^J`
//! entries in mixed-radix order, either one decimal per line or as
//! little-endian `f64` bytes.

use tui_core::tensor::PopTensor;

use super::FormatError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TensorFormat {
    Csv,
    Binary,
}

/// Largest tensor a dump may declare (entries).
pub const MAX_DUMP_CELLS: usize = 1 << 26;

fn header(t: &PopTensor) -> String {
    format!("PTENSOR v1 {} {}\n", t.num_observed(), t.levels())
}

pub fn write(t: &PopTensor, format: TensorFormat) -> Vec<u8> {
    let mut out = header(t).into_bytes();
    match format {
        TensorFormat::Csv => {
            for x in t.as_slice() {
                // Display prints the shortest string that round-trips.
                out.extend_from_slice(format!("{x}\n").as_bytes());
            }
        }
        TensorFormat::Binary => {
            for x in t.as_slice() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
    }
    out
}

/// Parses a dump; `format = None` picks CSV when the body is text with the
/// right number of lines, binary when it has exactly `8 V^J` bytes.
pub fn read(bytes: &[u8], format: Option<TensorFormat>) -> Result<PopTensor, FormatError> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| FormatError::new("tensor dump: missing header line"))?;
    let head = std::str::from_utf8(&bytes[..nl]).map_err(|_| FormatError::new("tensor dump: header is not UTF-8"))?;
    let fields: Vec<&str> = head.trim_end_matches('\r').split(' ').collect();
    let (jn, v) = match fields[..] {
        ["PTENSOR", "v1", j, v] => match (j.parse::<usize>(), v.parse::<usize>()) {
            (Ok(j), Ok(v)) => (j, v),
            _ => return Err(FormatError::new(format!("tensor dump: bad header {head:?}"))),
        },
        _ => return Err(FormatError::new(format!("tensor dump: expected header `PTENSOR v1 J V`, got {head:?}"))),
    };
    let cells = tui_core::index::checked_pow(v, jn)
        .filter(|&c| c <= MAX_DUMP_CELLS && jn >= 1 && v >= 2)
        .ok_or_else(|| FormatError::new(format!("tensor dump: J={jn} V={v} is out of range")))?;
    let body = &bytes[nl + 1..];
    let as_csv = || -> Result<Vec<f64>, FormatError> {
        let text = std::str::from_utf8(body).map_err(|_| FormatError::new("tensor dump: CSV body is not UTF-8"))?;
        let vals = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.trim().parse::<f64>().map_err(|_| FormatError::new(format!("tensor dump: bad value {l:?}"))))
            .collect::<Result<Vec<_>, _>>()?;
        if vals.len() != cells {
            return Err(FormatError::new(format!("tensor dump: {} values, header says {cells}", vals.len())));
        }
        Ok(vals)
    };
    let as_binary = || -> Result<Vec<f64>, FormatError> {
        if body.len() != 8 * cells {
            return Err(FormatError::new(format!("tensor dump: {} payload bytes, expected {}", body.len(), 8 * cells)));
        }
        Ok(body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect())
    };
    let data = match format {
        Some(TensorFormat::Csv) => as_csv()?,
        Some(TensorFormat::Binary) => as_binary()?,
        None => as_csv().or_else(|e| as_binary().map_err(|_| e))?,
    };
    PopTensor::new(jn, v, data).map_err(FormatError::core)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        let t = PopTensor::new(2, 3, vec![0.1, 0.2, 0.05, 0.05, 0.1, 0.1, 0.3, 0.0, 0.1]).unwrap();
        for f in [TensorFormat::Csv, TensorFormat::Binary] {
            let bytes = write(&t, f);
            assert!(bytes.starts_with(b"PTENSOR v1 2 3\n"));
            assert_eq!(read(&bytes, Some(f)).unwrap(), t);
            assert_eq!(read(&bytes, None).unwrap(), t);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(read(b"PTENSOR v2 1 2\n0.5\n0.5\n", None).is_err());
        assert!(read(b"PTENSOR v1 1 2\n0.5\n", None).is_err());
        assert!(read(b"PTENSOR v1 1 2\n0.5\nx\n", None).is_err());
        assert!(read(b"no newline", None).is_err());
        assert!(read(b"PTENSOR v1 1 2\n-0.5\n1.5\n", None).is_err());
    }
}
