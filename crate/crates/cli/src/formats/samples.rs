//! Sample CSVs (`y1,...,yJ` header, one observation per line) and their
//! metadata sidecar.

use std::fmt::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tui_core::empirical::SampleSet;

use super::FormatError;

pub const RNG_NAME: &str = "chacha8, seed_from_u64(seed), stream = block index, 4096 rows per block";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleMeta {
    /// SHA-256 of the canonical model JSON (without seed).
    pub spec_sha256: String,
    pub seed: u64,
    pub n: usize,
    #[serde(rename = "J")]
    pub num_observed: usize,
    #[serde(rename = "V")]
    pub levels: usize,
    pub rng: String,
}

pub fn spec_hash(canonical_json: &str) -> String {
    hex::encode(Sha256::digest(canonical_json.as_bytes()))
}

pub fn write_csv(s: &SampleSet) -> String {
    let jn = s.num_observed;
    let mut out = String::with_capacity(s.data.len() * 2 + 8 * jn);
    let header: Vec<String> = (1..=jn).map(|j| format!("y{j}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..s.n {
        for (p, y) in s.row(i).iter().enumerate() {
            if p > 0 {
                out.push(',');
            }
            write!(out, "{y}").expect("writing to a String cannot fail");
        }
        out.push('\n');
    }
    out
}

pub fn read_csv(text: &str, levels: usize, seed: u64) -> Result<SampleSet, FormatError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| FormatError::new("samples: empty file"))?;
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    let expected: Vec<String> = (1..=names.len()).map(|j| format!("y{j}")).collect();
    if names != expected {
        return Err(FormatError::new(format!("samples: header must be y1..yJ, got {header:?}")));
    }
    let jn = names.len();
    let mut data = Vec::new();
    for (i, line) in lines.enumerate() {
        let before = data.len();
        for cell in line.split(',') {
            let y: u8 = cell
                .trim()
                .parse()
                .map_err(|_| FormatError::new(format!("samples line {}: bad value {cell:?}", i + 2)))?;
            data.push(y);
        }
        if data.len() - before != jn {
            return Err(FormatError::new(format!("samples line {}: expected {jn} values", i + 2)));
        }
    }
    SampleSet::new(jn, levels, seed, data).map_err(FormatError::core)
}
