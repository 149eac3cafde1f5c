use std::path::Path;

use crate::error::{dim_err, Error, Result};
use crate::numerics::Matrix;

/// Parses `n d` on the first line followed by `n` rows of `d` reals.
pub fn parse_embeddings(text: &str) -> Result<Matrix> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let head = lines.next().ok_or_else(|| Error::Config("empty embedding file".into()))?;
    let dims: Vec<usize> = head
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Config(format!("bad header token {t:?}"))))
        .collect::<Result<_>>()?;
    let [n, d] = dims[..] else {
        return Err(Error::Config(format!("header must be \"n d\", got {head:?}")));
    };
    let mut data = Vec::with_capacity(n * d);
    let mut count = 0;
    for (i, line) in lines.enumerate() {
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::Config(format!("row {i}: bad number {t:?}"))))
            .collect::<Result<_>>()?;
        if row.len() != d {
            return Err(dim_err(format!("row {i} has {} values, expected {d}", row.len())));
        }
        data.extend(row);
        count += 1;
    }
    if count != n {
        return Err(dim_err(format!("header promises {n} rows, found {count}")));
    }
    let m = Matrix::new(n, d, data)?;
    if !m.is_finite() {
        return Err(Error::Config("embedding file has non-finite entries".into()));
    }
    Ok(m)
}

pub fn load_embeddings(path: &Path) -> Result<Matrix> {
    parse_embeddings(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_rejects() {
        let m = parse_embeddings("2 3\n1 2 3\n4 5 6\n").unwrap();
        assert_eq!(m.shape(), (2, 3));
        assert_eq!(m[(1, 2)], 6.0);
        assert!(parse_embeddings("2 3\n1 2 3\n4 5\n").is_err());
        assert!(parse_embeddings("2 3\n1 2 3\n").is_err());
        assert!(parse_embeddings("2\n1 2\n").is_err());
        assert!(parse_embeddings("").is_err());
    }
}
