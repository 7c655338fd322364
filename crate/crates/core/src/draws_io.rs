//! Draw files.
//!
//! CSV: header `iter,kappa_1..kappa_L,beta_1_1..beta_{J-1}_p,loss`, one row per
//! stored iteration, coefficients class-major.
//!
//! Binary: the 6-byte magic `BCMLR1`, then `N, p, L, S` as little-endian `u64`,
//! then `S` records of `iter: u64`, `L` changepoints as `u64`, `(J-1) p`
//! coefficients as `f64`, and the loss as `f64`, all little-endian.
//!
//! Neither format records the minimum segment length, so draws read back
//! validate against a minimum of 1.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::gibbs::PosteriorDraws;

pub const MAGIC: &[u8; 6] = b"BCMLR1";

fn fmt_err(e: impl std::fmt::Display) -> Error {
    Error::Format(e.to_string())
}

impl PosteriorDraws {
    pub fn csv_header(&self) -> Vec<String> {
        let mut h = vec!["iter".to_string()];
        h.extend((1..=self.n_changepoints).map(|l| format!("kappa_{l}")));
        for j in 1..=self.n_changepoints {
            h.extend((1..=self.p).map(|d| format!("beta_{j}_{d}")));
        }
        h.push("loss".into());
        h
    }

    pub fn write_csv_to<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.csv_header()).map_err(fmt_err)?;
        for s in 0..self.n_draws() {
            let mut rec = vec![self.iterations[s].to_string()];
            rec.extend(self.kappa_draw(s).iter().map(|k| k.to_string()));
            rec.extend(self.beta_draw(s).iter().map(|b| b.to_string()));
            rec.push(self.loss[s].to_string());
            w.write_record(rec).map_err(fmt_err)?;
        }
        w.flush().map_err(fmt_err)
    }

    /// Reads draws written by [`PosteriorDraws::write_csv_to`]; `n` is the
    /// series length, which the CSV does not carry.
    pub fn read_csv_from<R: Read>(input: R, n: usize) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers().map_err(fmt_err)?.clone();
        let l = header.iter().filter(|h| h.starts_with("kappa_")).count();
        let nb = header.iter().filter(|h| h.starts_with("beta_")).count();
        if header.get(0) != Some("iter") || header.iter().last() != Some("loss") || header.len() != 2 + l + nb {
            return Err(Error::Format("unexpected draw CSV header".into()));
        }
        if (l == 0 && nb != 0) || (l > 0 && nb % l != 0) {
            return Err(Error::Format(format!("{nb} coefficient columns for {l} changepoints")));
        }
        let p = nb.checked_div(l).unwrap_or(0);
        let mut draws = PosteriorDraws::empty(n, p, l, 1, false);
        for rec in r.records() {
            let rec = rec.map_err(fmt_err)?;
            let field = |i: usize| rec.get(i).ok_or_else(|| Error::Format("short record".into()));
            draws.iterations.push(field(0)?.parse().map_err(fmt_err)?);
            for i in 0..l {
                draws.kappa.push(field(1 + i)?.parse().map_err(fmt_err)?);
            }
            for i in 0..nb {
                draws.beta.push(field(1 + l + i)?.parse().map_err(fmt_err)?);
            }
            draws.loss.push(field(1 + l + nb)?.parse().map_err(fmt_err)?);
        }
        draws.check_changepoints()?;
        Ok(draws)
    }

    pub fn write_binary_to<W: Write>(&self, mut out: W) -> Result<()> {
        let io = |e: std::io::Error| fmt_err(e);
        out.write_all(MAGIC).map_err(io)?;
        for v in [self.n, self.p, self.n_changepoints, self.n_draws()] {
            out.write_all(&(v as u64).to_le_bytes()).map_err(io)?;
        }
        for s in 0..self.n_draws() {
            out.write_all(&(self.iterations[s] as u64).to_le_bytes()).map_err(io)?;
            for &k in self.kappa_draw(s) {
                out.write_all(&(k as u64).to_le_bytes()).map_err(io)?;
            }
            for &b in self.beta_draw(s) {
                out.write_all(&b.to_le_bytes()).map_err(io)?;
            }
            out.write_all(&self.loss[s].to_le_bytes()).map_err(io)?;
        }
        out.flush().map_err(io)
    }

    pub fn read_binary_from<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 6];
        input.read_exact(&mut magic).map_err(fmt_err)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a draw file (bad magic)".into()));
        }
        let mut word = [0u8; 8];
        let mut next_u64 = |input: &mut R| -> Result<u64> {
            input.read_exact(&mut word).map_err(fmt_err)?;
            Ok(u64::from_le_bytes(word))
        };
        let n = next_u64(&mut input)? as usize;
        let p = next_u64(&mut input)? as usize;
        let l = next_u64(&mut input)? as usize;
        let s = next_u64(&mut input)? as usize;
        let mut draws = PosteriorDraws::empty(n, p, l, 1, false);
        for _ in 0..s {
            draws.iterations.push(next_u64(&mut input)? as usize);
            for _ in 0..l {
                draws.kappa.push(next_u64(&mut input)? as usize);
            }
            for _ in 0..l * p {
                draws.beta.push(f64::from_bits(next_u64(&mut input)?));
            }
            draws.loss.push(f64::from_bits(next_u64(&mut input)?));
        }
        draws.check_changepoints()?;
        Ok(draws)
    }

    fn check_changepoints(&self) -> Result<()> {
        for s in 0..self.n_draws() {
            crate::data::ChangepointVector::new(self.kappa_draw(s).to_vec(), self.n, 1)?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv_to(std::io::BufWriter::new(f))
    }

    pub fn save_binary(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_binary_to(std::io::BufWriter::new(f))
    }

    /// Reads either format, chosen by the magic bytes.
    pub fn load(path: &Path, n: usize) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.starts_with(MAGIC) {
            PosteriorDraws::read_binary_from(bytes.as_slice())
        } else {
            PosteriorDraws::read_csv_from(bytes.as_slice(), n)
        }
    }
}
