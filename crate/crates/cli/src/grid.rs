//! Range arguments: integer `START:END[:STEP]` and float `LO:HI:N`.

use std::str::FromStr;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntRange(Vec<usize>);

impl IntRange {
    pub fn values(&self) -> &[usize] {
        &self.0
    }
}

impl FromStr for IntRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parse = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("{s:?}: {e}"));
        let parts: Vec<&str> = s.split(':').collect();
        let (start, end, step) = match parts.as_slice() {
            [one] => {
                let v = parse(one)?;
                (v, v, 1)
            }
            [a, b] => (parse(a)?, parse(b)?, 1),
            [a, b, c] => (parse(a)?, parse(b)?, parse(c)?),
            _ => return Err(format!("{s:?}: expected N or START:END[:STEP]")),
        };
        if step == 0 || end < start {
            return Err(format!("{s:?}: empty range"));
        }
        Ok(IntRange((start..=end).step_by(step).collect()))
    }
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    lo: f64,
    hi: f64,
    n: usize,
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.lo];
        }
        (0..self.n)
            .map(|i| {
                if i + 1 == self.n {
                    self.hi
                } else {
                    self.lo + (self.hi - self.lo) * i as f64 / (self.n - 1) as f64
                }
            })
            .collect()
    }
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, n] = parts.as_slice() else {
            return Err(format!("grid {s:?}: expected LO:HI:N"));
        };
        let float = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("grid {s:?}: {e}"));
        let (lo, hi) = (float(lo)?, float(hi)?);
        let n = n.trim().parse::<usize>().map_err(|e| format!("grid {s:?}: {e}"))?;
        if n == 0 || !lo.is_finite() || !hi.is_finite() || hi < lo {
            return Err(format!("grid {s:?}: empty or reversed"));
        }
        Ok(Grid { lo, hi, n })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!("7".parse::<IntRange>().unwrap().values(), &[7]);
        assert_eq!("100:400:100".parse::<IntRange>().unwrap().values(), &[100, 200, 300, 400]);
        assert_eq!("2:4".parse::<IntRange>().unwrap().values(), &[2, 3, 4]);
        assert!("5:1".parse::<IntRange>().is_err());
        assert!("1:5:0".parse::<IntRange>().is_err());
    }

    #[test]
    fn grids() {
        let g: Grid = "0.9:1:3".parse().unwrap();
        assert_eq!(g.points(), vec![0.9, 0.95, 1.0]);
        assert_eq!("0.5:0.5:1".parse::<Grid>().unwrap().points(), vec![0.5]);
        assert!("1:0:3".parse::<Grid>().is_err());
        assert!("0:1".parse::<Grid>().is_err());
    }
}
