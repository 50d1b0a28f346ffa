use serde::{Deserialize, Serialize};

use super::grid::GridSpec;
use crate::error::{Error, Result};

/// Named potential families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialPreset {
    /// `-a(a+1) kappa^2 sech^2(kappa x)` with `kappa^2` given.
    PoschlTeller { a: f64, kappa2: f64 },
    /// `-depth * exp(-x^2 / width^2)`.
    GaussianWell { depth: f64, width: f64 },
    /// Samples `(x, V)` read from a two column CSV and interpolated linearly.
    Table { x: Vec<f64>, v: Vec<f64> },
}

impl Default for PotentialPreset {
    fn default() -> Self {
        PotentialPreset::PoschlTeller { a: 1.5, kappa2: 0.35 }
    }
}

impl PotentialPreset {
    /// Parses `"poschl_teller a=1.5 kappa2=0.35"` or `"gaussian_well depth=1 width=2"`.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut parts = spec.split_whitespace();
        let name = parts.next().ok_or_else(|| Error::Config("empty potential preset".into()))?;
        let mut kv = std::collections::BTreeMap::new();
        for p in parts {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key=value in preset, got {p}")))?;
            let v: f64 = v.parse().map_err(|_| Error::Config(format!("bad number in preset: {p}")))?;
            kv.insert(k.to_string(), v);
        }
        let get = |k: &str, d: f64| kv.get(k).copied().unwrap_or(d);
        match name {
            "poschl_teller" => {
                let kappa2 = match kv.get("kappa") {
                    Some(k) => k * k,
                    None => get("kappa2", 0.35),
                };
                Ok(PotentialPreset::PoschlTeller { a: get("a", 1.5), kappa2 })
            }
            "gaussian_well" => Ok(PotentialPreset::GaussianWell { depth: get("depth", 1.0), width: get("width", 1.0) }),
            other => Err(Error::Config(format!("unknown potential preset {other}"))),
        }
    }

    pub fn from_csv(path: &std::path::Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .from_path(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let (mut x, mut v) = (Vec::new(), Vec::new());
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Config(e.to_string()))?;
            let a = rec.get(0).and_then(|s| s.trim().parse::<f64>().ok());
            let b = rec.get(1).and_then(|s| s.trim().parse::<f64>().ok());
            match (a, b) {
                (Some(a), Some(b)) => {
                    x.push(a);
                    v.push(b);
                }
                _ if x.is_empty() => continue,
                _ => return Err(Error::Config(format!("bad row in {}", path.display()))),
            }
        }
        if x.len() < 2 || x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("potential table needs increasing x with at least two rows".into()));
        }
        Ok(PotentialPreset::Table { x, v })
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            PotentialPreset::PoschlTeller { a, kappa2 } => {
                let k = kappa2.sqrt();
                let s = 1.0 / (k * x).cosh();
                -a * (a + 1.0) * kappa2 * s * s
            }
            PotentialPreset::GaussianWell { depth, width } => -depth * (-(x / width).powi(2)).exp(),
            PotentialPreset::Table { x: xs, v } => {
                if x <= xs[0] || x >= xs[xs.len() - 1] {
                    return 0.0;
                }
                let i = xs.partition_point(|&p| p <= x) - 1;
                let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
                v[i] * (1.0 - t) + v[i + 1] * t
            }
        }
    }

    pub fn sample(&self, grid: &GridSpec) -> Vec<f64> {
        grid.sample(|x| self.eval(x))
    }

    /// Closed-form bound levels of `-d^2 + V` when known.
    pub fn exact_levels(&self) -> Option<Vec<f64>> {
        match self {
            PotentialPreset::PoschlTeller { a, kappa2 } => {
                let mut out = Vec::new();
                let mut k = 0.0;
                while k < *a - 1e-12 {
                    out.push(-kappa2 * (a - k) * (a - k));
                    k += 1.0;
                }
                Some(out)
            }
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_strings() {
        assert_eq!(PotentialPreset::parse("poschl_teller a=2 kappa=0.5").unwrap(), PotentialPreset::PoschlTeller { a: 2.0, kappa2: 0.25 });
        assert_eq!(PotentialPreset::parse("gaussian_well depth=3").unwrap(), PotentialPreset::GaussianWell { depth: 3.0, width: 1.0 });
        assert!(matches!(PotentialPreset::parse("square"), Err(Error::Config(_))));
        assert!(matches!(PotentialPreset::parse("poschl_teller a"), Err(Error::Config(_))));
        assert!(matches!(PotentialPreset::parse(""), Err(Error::Config(_))));
    }

    #[test]
    fn poschl_teller_levels_in_closed_form() {
        let l = PotentialPreset::default().exact_levels().unwrap();
        assert_eq!(l.len(), 2);
        assert!((l[0] + 0.7875).abs() < 1e-12);
        assert!((l[1] + 0.0875).abs() < 1e-12);
        assert!((PotentialPreset::default().eval(0.0) + 1.5 * 2.5 * 0.35).abs() < 1e-12);
    }

    #[test]
    fn table_interpolates_and_vanishes_outside() {
        let t = PotentialPreset::Table { x: vec![-1.0, 0.0, 1.0], v: vec![0.0, -2.0, 0.0] };
        assert_eq!(t.eval(-0.5), -1.0);
        assert_eq!(t.eval(2.0), 0.0);
        assert_eq!(t.eval(-1.0), 0.0);
    }
}
