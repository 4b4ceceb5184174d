//! Channel matrix specifications: `identity`, `bsc:p`, `uniform-mix:g`, or a
//! path to a JSON file holding a row-stochastic matrix.

use std::path::Path;

use anyhow::{bail, Context, Result};
use permch_core::channel::Dmc;

pub fn parse_dmc(spec: &str, q: usize) -> Result<Dmc> {
    let build = |r: permch_core::Result<Dmc>| r.map_err(|e| anyhow::anyhow!("bad channel: {e}"));
    if spec == "identity" {
        return build(Dmc::identity(q));
    }
    if let Some(p) = spec.strip_prefix("bsc:") {
        if q != 2 {
            bail!("bsc channels need --q 2");
        }
        let p: f64 = p.parse().context("bsc crossover must be a number")?;
        return build(Dmc::bsc(p));
    }
    if let Some(g) = spec.strip_prefix("uniform-mix:") {
        let g: f64 = g.parse().context("mix weight must be a number")?;
        return build(Dmc::uniform_mix(q, g));
    }
    let path = Path::new(spec);
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read channel file {}", path.display()))?;
    let rows: Vec<Vec<f64>> = serde_json::from_str(&text)
        .with_context(|| format!("{} must hold a JSON matrix", path.display()))?;
    if rows.len() != q {
        bail!("channel file has {} rows, expected q = {q}", rows.len());
    }
    build(Dmc::new(rows))
}

/// Parses an `n` grid: a single value, a comma list, or `a..b` which doubles
/// from `a` up to `b`.
pub fn parse_n_grid(spec: &str) -> Result<Vec<u32>> {
    if let Some((lo, hi)) = spec.split_once("..") {
        let lo: u32 = lo.parse().context("bad grid start")?;
        let hi: u32 = hi.parse().context("bad grid end")?;
        if lo == 0 || hi < lo {
            bail!("grid must satisfy 0 < start <= end");
        }
        let mut out = Vec::new();
        let mut n = lo;
        while n <= hi {
            out.push(n);
            match n.checked_mul(2) {
                Some(next) => n = next,
                None => break,
            }
        }
        return Ok(out);
    }
    spec.split(',')
        .map(|part| part.trim().parse::<u32>().context("bad grid entry"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_n_grid("8..64").unwrap(), vec![8, 16, 32, 64]);
        assert_eq!(parse_n_grid("12").unwrap(), vec![12]);
        assert_eq!(parse_n_grid("4,6,9").unwrap(), vec![4, 6, 9]);
        assert!(parse_n_grid("9..4").is_err());
    }

    #[test]
    fn shorthands() {
        assert!(parse_dmc("identity", 3).is_ok());
        assert!(parse_dmc("bsc:0.1", 2).is_ok());
        assert!(parse_dmc("bsc:0.1", 3).is_err());
        assert!(parse_dmc("uniform-mix:0.5", 4).is_ok());
        assert!(parse_dmc("missing.json", 2).is_err());
    }
}
