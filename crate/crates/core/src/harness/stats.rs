use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

pub const ALPHA: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairedT {
    /// Statistic of the differences a − b; ±inf when they are all equal and
    /// nonzero.
    pub t: f64,
    pub df: usize,
    /// Two-tailed critical value at [`ALPHA`].
    pub critical: f64,
    pub significant: bool,
}

/// Two-tailed critical value of Student's t at significance `alpha`.
pub fn t_critical(df: usize, alpha: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(1.0 - alpha / 2.0)
}

/// Paired t-test on per-split values. When the differences have zero
/// variance the verdict is "significant" iff they are nonzero.
pub fn paired_t(a: &[f64], b: &[f64]) -> Result<PairedT> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Config("a paired t-test needs at least two pairs".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    let df = n - 1;
    let critical = t_critical(df, ALPHA);
    let all_equal = d.iter().all(|x| *x == d[0]);
    let (t, significant) = if all_equal {
        if d[0] == 0.0 {
            (0.0, false)
        } else {
            (d[0].signum() * f64::INFINITY, true)
        }
    } else {
        let t = mean / (var.sqrt() / (n as f64).sqrt());
        (t, t.abs() > critical)
    };
    Ok(PairedT {
        t,
        df,
        critical,
        significant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn critical_value_for_ten_splits() {
        assert!((t_critical(9, 0.05) - 2.262).abs() < 5e-4);
    }

    #[test]
    fn examples() {
        let a = [0.1, 0.2, 0.3];
        let r = paired_t(&a, &a).unwrap();
        assert_eq!((r.t, r.significant), (0.0, false));
        let r = paired_t(&[2.0, 3.0, 4.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!(r.significant && r.t == f64::INFINITY);
        let r = paired_t(&[1.0, -1.0, 2.0, -2.0], &[0.0; 4]).unwrap();
        assert_eq!((r.t, r.significant), (0.0, false));
        assert!(matches!(paired_t(&[1.0], &[1.0, 2.0]), Err(Error::LengthMismatch(1, 2))));
    }

    #[test]
    fn matches_textbook_statistic() {
        let a = [0.20, 0.18, 0.22, 0.19, 0.21];
        let b = [0.18, 0.17, 0.20, 0.19, 0.18];
        // d = [.02, .01, .02, 0, .03], mean .016, sd = sqrt(.00013)
        let r = paired_t(&a, &b).unwrap();
        let want = 0.016 / (0.00013f64.sqrt() / 5f64.sqrt());
        assert!((r.t - want).abs() < 1e-9);
        assert_eq!(r.df, 4);
        assert!(r.significant);
    }
}
