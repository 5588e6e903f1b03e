//! Small numeric helpers shared across modules.

/// Hölder conjugate `p / (p - 1)` with `1' = ∞` and `∞' = 1`.
pub fn conjugate(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

/// `1/p`, with `1/∞ = 0`.
pub fn recip(p: f64) -> f64 {
    if p.is_infinite() {
        0.0
    } else {
        1.0 / p
    }
}

/// `l^p` norm of a finite sequence; `p = ∞` is the max norm.
pub fn lp_norm<I>(values: I, p: f64) -> f64
where
    I: IntoIterator<Item = f64>,
{
    if p.is_infinite() {
        return values.into_iter().fold(0.0f64, |m, v| m.max(v.abs()));
    }
    if p == 1.0 {
        return values.into_iter().map(f64::abs).sum();
    }
    // Scale by the max to avoid overflow for large p.
    let values: Vec<f64> = values.into_iter().map(f64::abs).collect();
    let max = values.iter().fold(0.0f64, |m, &v| m.max(v));
    if max == 0.0 {
        return 0.0;
    }
    if p == 2.0 {
        return max * values.iter().map(|v| (v / max) * (v / max)).sum::<f64>().sqrt();
    }
    max * values.iter().map(|v| (v / max).powf(p)).sum::<f64>().powf(1.0 / p)
}

/// A unit-`l^p` vector `u` with `⟨u, v⟩ = ‖v‖_{p'}` (Hölder equality).
///
/// Returns zeros for a zero input.
pub fn holder_witness(v: &[f64], p: f64) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if max == 0.0 {
        return out;
    }
    if p == 1.0 {
        // Dual is l^∞: all weight on the largest entry (first on ties).
        let i = v.iter().position(|x| x.abs() == max).unwrap();
        out[i] = v[i].signum();
        return out;
    }
    if p.is_infinite() {
        for (o, x) in out.iter_mut().zip(v) {
            if *x != 0.0 {
                *o = x.signum();
            }
        }
        return out;
    }
    let pc = conjugate(p);
    let norm = lp_norm(v.iter().map(|x| x / max), pc);
    for (o, x) in out.iter_mut().zip(v) {
        if *x != 0.0 {
            *o = x.signum() * ((x.abs() / max) / norm).powf(pc - 1.0);
        }
    }
    out
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the stream for trial `t` of the size-`n` run.
pub fn trial_seed(seed: u64, n: u64, trial: u64) -> u64 {
    seed ^ mix64(mix64(n) ^ trial.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// Ordinary least squares fit `y = a + b x`; returns `(b, se(b), a)`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let se = if x.len() > 2 {
        let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    (slope, se, intercept)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n - 1 denominator).
pub fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

/// Serde adapter for exponents that may be written as `"inf"`.
pub mod serde_exponent {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &f64, s: S) -> Result<S::Ok, S::Error> {
        if value.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*value)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Text(s) => super::parse_exponent(&s).map_err(de::Error::custom),
        }
    }
}

/// Parses a real or one of `inf`, `infinity`, `∞`.
pub fn parse_exponent(s: &str) -> std::result::Result<f64, String> {
    let t = s.trim().to_ascii_lowercase();
    match t.as_str() {
        "inf" | "infinity" | "∞" => Ok(f64::INFINITY),
        _ => match t.parse::<f64>() {
            Ok(v) if v >= 1.0 => Ok(v),
            Ok(v) => Err(format!("exponent {v} must lie in [1, inf]")),
            Err(e) => Err(format!("bad exponent {s:?}: {e}")),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conjugates() {
        assert_eq!(conjugate(1.0), f64::INFINITY);
        assert_eq!(conjugate(f64::INFINITY), 1.0);
        assert_eq!(conjugate(2.0), 2.0);
        assert!((conjugate(1.2) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn norms() {
        let v = [3.0, -4.0];
        assert_eq!(lp_norm(v, 2.0), 5.0);
        assert_eq!(lp_norm(v, 1.0), 7.0);
        assert_eq!(lp_norm(v, f64::INFINITY), 4.0);
        assert!((lp_norm(v, 3.0) - 91f64.powf(1.0 / 3.0)).abs() < 1e-12);
        assert_eq!(lp_norm(std::iter::empty(), 2.0), 0.0);
    }

    #[test]
    fn witness_attains_dual_norm() {
        let v = [0.3, -1.2, 0.0, 0.7];
        for p in [1.0, 1.5, 2.0, 4.0, f64::INFINITY] {
            let u = holder_witness(&v, p);
            assert!(lp_norm(u.iter().copied(), p) <= 1.0 + 1e-12);
            let pairing: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
            let dual = lp_norm(v, conjugate(p));
            assert!((pairing - dual).abs() < 1e-12 * dual.max(1.0), "p={p}");
        }
    }

    #[test]
    fn ols_recovers_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let (b, se, a) = ols_slope(&x, &y);
        assert!((b + 0.5).abs() < 1e-12 && (a - 2.0).abs() < 1e-12 && se < 1e-12);
    }

    #[test]
    fn trial_seeds_differ() {
        assert_ne!(trial_seed(1, 1024, 0), trial_seed(1, 1024, 1));
        assert_ne!(trial_seed(1, 1024, 0), trial_seed(1, 2048, 0));
        assert_eq!(trial_seed(7, 10, 3), trial_seed(7, 10, 3));
    }

    #[test]
    fn exponent_parsing() {
        assert_eq!(parse_exponent("inf").unwrap(), f64::INFINITY);
        assert_eq!(parse_exponent(" 1.5 ").unwrap(), 1.5);
        assert!(parse_exponent("abc").is_err());
        assert!(parse_exponent("0.5").is_err());
    }
}
