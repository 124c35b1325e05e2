//! Flat field records and JSON-lines output.
//!
//! Binary layout: `N` as little-endian `u64`, then `2(2N+1)` little-endian
//! `f64` values `Re û(n), Im û(n)` for `n = -N..=N`. The CSV record carries
//! the same numbers on one comma-separated line, formatted with the shortest
//! representation that parses back to the identical `f64`.

use std::io::{BufRead, Read, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::{SpectralField, SpectralSpace};

pub fn write_field_binary<W: Write>(u: &SpectralField, mut w: W) -> Result<()> {
    w.write_all(&(u.space().max_frequency() as u64).to_le_bytes())?;
    for x in u.to_real_vec() {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

/// Reads one binary record; the grid uses the default oversampling.
pub fn read_field_binary<R: Read>(mut r: R) -> Result<SpectralField> {
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    let n = u64::from_le_bytes(word);
    if n > (1 << 24) {
        return Err(Error::Parse(format!("implausible truncation N = {n}")));
    }
    let space = SpectralSpace::new(n as usize);
    let mut x = Vec::with_capacity(space.real_dim());
    for _ in 0..space.real_dim() {
        r.read_exact(&mut word)?;
        x.push(f64::from_le_bytes(word));
    }
    SpectralField::from_real_vec(&space, &x)
}

pub fn field_to_csv_record(u: &SpectralField) -> String {
    let mut line = u.space().max_frequency().to_string();
    for x in u.to_real_vec() {
        line.push(',');
        line.push_str(&x.to_string());
    }
    line
}

pub fn field_from_csv_record(line: &str) -> Result<SpectralField> {
    let mut parts = line.trim().split(',');
    let n: usize = parts
        .next()
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::Parse("missing truncation N".into()))?;
    let x = parts
        .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("bad coefficient {s:?}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    SpectralField::from_real_vec(&SpectralSpace::new(n), &x)
}

pub fn read_fields_csv<R: BufRead>(r: R) -> Result<Vec<SpectralField>> {
    r.lines()
        .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|l| field_from_csv_record(&l?))
        .collect()
}

/// Writes `record` as one JSON line.
pub fn write_jsonl<W: Write, T: Serialize>(mut w: W, record: &T) -> Result<()> {
    serde_json::to_writer(&mut w, record).map_err(|e| Error::Parse(e.to_string()))?;
    w.write_all(b"\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::sample_mu;
    use crate::rng::RngStream;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn binary_round_trip_is_bit_exact(n in 0usize..20, seed in any::<u64>(), scale in -1e3f64..1e3) {
            let space = SpectralSpace::new(n);
            let u = &sample_mu(&space, &mut RngStream::new(seed, 0).rng()) * scale;
            let mut buf = Vec::new();
            write_field_binary(&u, &mut buf).unwrap();
            prop_assert_eq!(buf.len(), 8 + 8 * space.real_dim());
            let back = read_field_binary(&buf[..]).unwrap();
            let bits = |f: &SpectralField| f.to_real_vec().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&back), bits(&u));
        }

        #[test]
        fn csv_round_trip_is_exact(n in 0usize..12, seed in any::<u64>()) {
            let space = SpectralSpace::new(n);
            let u = sample_mu(&space, &mut RngStream::new(seed, 1).rng());
            let back = field_from_csv_record(&field_to_csv_record(&u)).unwrap();
            prop_assert_eq!(back, u);
        }
    }

    #[test]
    fn malformed_records_are_rejected() {
        assert!(field_from_csv_record("2,1,2,3").is_err());
        assert!(field_from_csv_record("x,1").is_err());
        assert!(read_field_binary(&[1u8, 0, 0][..]).is_err());
    }

    #[test]
    fn csv_reader_skips_blank_lines() {
        let text = "0,1,2\n\n1,0,0,1,1,0,0\n";
        let fields = read_fields_csv(text.as_bytes()).unwrap();
        assert_eq!(fields.len(), 2);
        assert_eq!(fields[1].coeff(0), num_complex::Complex64::new(1.0, 1.0));
    }
}
