use crate::error::{Error, Result};

/// Splits a decimal literal into `(digits, scale)` with value `digits / 10^scale`.
fn decimal(s: &str) -> Result<(i64, u32)> {
    let bad = || Error::Config(format!("`{s}` is not a plain decimal number"));
    let s = s.trim();
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    if int.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !int.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let scale = frac.len() as u32;
    if scale > 12 {
        return Err(Error::Config(format!("`{s}` has more than 12 decimals")));
    }
    let digits = format!("{int}{frac}").parse::<i64>().map_err(|_| bad())?;
    Ok((digits, scale))
}

fn rescale((digits, scale): (i64, u32), to: u32) -> i64 {
    digits * 10i64.pow(to - scale)
}

/// Parses `lo:hi:step` (inclusive), a comma list, or a single level.
///
/// Levels are generated on the integer lattice of the finest decimal
/// precision, so `0.1:0.9:0.1` yields exactly the doubles of `0.1`, ..., `0.9`.
pub fn parse_p_grid(spec: &str) -> Result<Vec<f64>> {
    let grid = if let [lo, hi, step] = spec.split(':').collect::<Vec<_>>()[..] {
        let (lo, hi, step) = (decimal(lo)?, decimal(hi)?, decimal(step)?);
        let scale = lo.1.max(hi.1).max(step.1);
        let (lo, hi, step) = (rescale(lo, scale), rescale(hi, scale), rescale(step, scale));
        if step <= 0 || hi < lo {
            return Err(Error::Config(format!("empty p grid `{spec}`")));
        }
        let denom = 10f64.powi(scale as i32);
        (0..)
            .map(|j| lo + j * step)
            .take_while(|&v| v <= hi)
            .map(|v| v as f64 / denom)
            .collect()
    } else if spec.contains(':') {
        return Err(Error::Config(format!("p grid `{spec}` must look like lo:hi:step")));
    } else {
        spec.split(',')
            .map(|t| {
                let (d, s) = decimal(t)?;
                Ok(d as f64 / 10f64.powi(s as i32))
            })
            .collect::<Result<Vec<_>>>()?
    };
    if let Some(p) = grid.iter().find(|&&p| !(p > 0.0 && p < 1.0)) {
        return Err(Error::Config(format!("p level {p} outside (0, 1)")));
    }
    Ok(grid)
}

/// Comma list of unsigned integers.
pub fn parse_usize_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|t| t.trim().parse().map_err(|_| Error::Config(format!("bad integer `{t}` in `{s}`"))))
        .collect()
}

pub fn parse_f64_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse().map_err(|_| Error::Config(format!("bad number `{t}` in `{s}`"))))
        .collect()
}

pub fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_hit_exact_doubles() {
        let g = parse_p_grid("0.1:0.9:0.1").unwrap();
        assert_eq!(g, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]);
        let g = parse_p_grid("0.2:0.8:0.05").unwrap();
        assert_eq!(g.len(), 13);
        assert_eq!(g[3], 0.35);
        assert_eq!(g[12], 0.8);
        assert_eq!(parse_p_grid(".5").unwrap(), vec![0.5]);
        assert_eq!(parse_p_grid("0.25,0.5").unwrap(), vec![0.25, 0.5]);
    }

    #[test]
    fn rejects_bad_grids() {
        for s in ["0:1:0.1", "0.1:0.9:0", "0.9:0.1:0.1", "a:b:c", "1.5", "0.1:0.2", "-0.1", "1e-1"] {
            assert!(parse_p_grid(s).is_err(), "{s}");
        }
    }

    #[test]
    fn lists() {
        assert_eq!(parse_usize_list("5, 10").unwrap(), vec![5, 10]);
        assert!(parse_usize_list("5,x").is_err());
        assert_eq!(parse_f64_list("1,0.75").unwrap(), vec![1.0, 0.75]);
        assert_eq!(join(&[0.1, 0.25]), "0.1,0.25");
    }
}
