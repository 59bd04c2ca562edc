//! Dense vector files: little-endian binary with a u64 length header, or text
//! with one value per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VectorFormat {
    Bin,
    Txt,
}

pub fn write_vector(path: &Path, x: &[f64], format: VectorFormat) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?);
    match format {
        VectorFormat::Bin => {
            w.write_all(&(x.len() as u64).to_le_bytes())?;
            for v in x {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        VectorFormat::Txt => {
            for v in x {
                writeln!(w, "{v:e}")?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_vector(path: &Path, format: VectorFormat) -> Result<Vec<f64>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    match format {
        VectorFormat::Bin => {
            let mut bytes = Vec::new();
            BufReader::new(file).read_to_end(&mut bytes)?;
            if bytes.len() < 8 {
                bail!("{}: missing length header", path.display());
            }
            let (head, body) = bytes.split_at(8);
            let len = u64::from_le_bytes(head.try_into().unwrap()) as usize;
            if body.len() != 8 * len {
                bail!("{}: header says {len} values but file holds {} bytes of data", path.display(), body.len());
            }
            Ok(body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
        }
        VectorFormat::Txt => BufReader::new(file)
            .lines()
            .enumerate()
            .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty()))
            .map(|(i, l)| {
                let l = l?;
                l.trim()
                    .parse::<f64>()
                    .with_context(|| format!("{} line {}: not a number: {l:?}", path.display(), i + 1))
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_both_formats() {
        let dir = tempfile::tempdir().unwrap();
        let x = vec![1.5, -0.0, 3e-300, f64::MAX, -7.25];
        for fmt in [VectorFormat::Bin, VectorFormat::Txt] {
            let p = dir.path().join("v");
            write_vector(&p, &x, fmt).unwrap();
            assert_eq!(read_vector(&p, fmt).unwrap(), x);
        }
        let p = dir.path().join("bad");
        std::fs::write(&p, [3u8, 0, 0, 0, 0, 0, 0, 0, 1, 2]).unwrap();
        assert!(read_vector(&p, VectorFormat::Bin).is_err());
    }
}
