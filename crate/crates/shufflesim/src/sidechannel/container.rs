//! Trace campaign container: a binary file holding a JSON header (workload,
//! mode, sigma, campaign seed, input width) followed by per-trace records
//! (input bytes, length, f32 samples, little-endian). Campaigns resume by
//! counting the records already present.

use std::fs::{File, OpenOptions};
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::LeakTrace;

const MAGIC: &[u8; 4] = b"SVTR";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignHeader {
    pub workload: String,
    pub mode: String,
    pub sigma: f64,
    pub campaign_seed: u64,
    pub input_len: u32,
    /// Total traces the campaign intends to collect.
    pub planned_traces: u64,
}

#[derive(Debug, Error)]
pub enum ContainerError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("not a trace container (bad magic)")]
    BadMagic,
    #[error("unsupported container version {0}")]
    BadVersion(u32),
    #[error("corrupt container header: {0}")]
    BadHeader(String),
    #[error("truncated trace record at index {0}")]
    Truncated(usize),
}

pub fn write_container(
    path: &Path,
    header: &CampaignHeader,
    traces: &[LeakTrace],
) -> Result<(), ContainerError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let hdr = serde_json::to_vec(header).map_err(|e| ContainerError::BadHeader(e.to_string()))?;
    w.write_all(&(hdr.len() as u32).to_le_bytes())?;
    w.write_all(&hdr)?;
    for t in traces {
        write_record(&mut w, header.input_len as usize, t)?;
    }
    w.flush()?;
    Ok(())
}

/// Appends records to an existing container (resume support).
pub fn append_traces(path: &Path, traces: &[LeakTrace]) -> Result<(), ContainerError> {
    let (header, _) = read_header(path)?;
    let mut w = BufWriter::new(OpenOptions::new().append(true).open(path)?);
    for t in traces {
        write_record(&mut w, header.input_len as usize, t)?;
    }
    w.flush()?;
    Ok(())
}

fn write_record<W: Write>(
    w: &mut W,
    input_len: usize,
    t: &LeakTrace,
) -> Result<(), ContainerError> {
    debug_assert_eq!(t.input.len(), input_len);
    w.write_all(&t.input)?;
    w.write_all(&t.seed.to_le_bytes())?;
    w.write_all(&(t.samples.len() as u32).to_le_bytes())?;
    for s in &t.samples {
        w.write_all(&s.to_le_bytes())?;
    }
    Ok(())
}

fn read_header(path: &Path) -> Result<(CampaignHeader, BufReader<File>), ContainerError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(ContainerError::BadMagic);
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        return Err(ContainerError::BadVersion(version));
    }
    r.read_exact(&mut word)?;
    let len = u32::from_le_bytes(word) as usize;
    let mut hdr = vec![0u8; len];
    r.read_exact(&mut hdr)?;
    let header: CampaignHeader =
        serde_json::from_slice(&hdr).map_err(|e| ContainerError::BadHeader(e.to_string()))?;
    Ok((header, r))
}

/// Reads the header and every complete trace record.
pub fn read_container(path: &Path) -> Result<(CampaignHeader, Vec<LeakTrace>), ContainerError> {
    let (header, mut r) = read_header(path)?;
    let mut traces = Vec::new();
    loop {
        let mut input = vec![0u8; header.input_len as usize];
        match r.read_exact(&mut input) {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        }
        let mut seed8 = [0u8; 8];
        r.read_exact(&mut seed8)
            .map_err(|_| ContainerError::Truncated(traces.len()))?;
        let mut word = [0u8; 4];
        r.read_exact(&mut word)
            .map_err(|_| ContainerError::Truncated(traces.len()))?;
        let n = u32::from_le_bytes(word) as usize;
        let mut raw = vec![0u8; n * 4];
        r.read_exact(&mut raw)
            .map_err(|_| ContainerError::Truncated(traces.len()))?;
        let samples = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        traces.push(LeakTrace {
            samples,
            input,
            seed: u64::from_le_bytes(seed8),
        });
    }
    Ok((header, traces))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn sample_traces(n: usize) -> Vec<LeakTrace> {
        (0..n)
            .map(|i| LeakTrace {
                samples: (0..10 + i).map(|s| s as f32 * 0.5).collect(),
                input: vec![i as u8; 5],
                seed: i as u64 * 31,
            })
            .collect()
    }

    fn header(n: u64) -> CampaignHeader {
        CampaignHeader {
            workload: "mac5".into(),
            mode: "inorder".into(),
            sigma: 0.5,
            campaign_seed: 1234,
            input_len: 5,
            planned_traces: n,
        }
    }

    #[test]
    fn round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("t.svtr");
        let traces = sample_traces(7);
        write_container(&path, &header(7), &traces).unwrap();
        let (h, got) = read_container(&path).unwrap();
        assert_eq!(h, header(7));
        assert_eq!(got, traces);
    }

    #[test]
    fn append_resumes() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("t.svtr");
        let traces = sample_traces(10);
        write_container(&path, &header(10), &traces[..4]).unwrap();
        let (_, partial) = read_container(&path).unwrap();
        assert_eq!(partial.len(), 4);
        append_traces(&path, &traces[4..]).unwrap();
        let (_, all) = read_container(&path).unwrap();
        assert_eq!(all, traces);
    }

    #[test]
    fn rejects_garbage() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.svtr");
        std::fs::write(&path, b"not a container").unwrap();
        assert!(matches!(
            read_container(&path),
            Err(ContainerError::BadMagic)
        ));
    }
}
