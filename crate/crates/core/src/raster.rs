//! Binary observation lattice, the logistic link, and raster file formats.
//!
//! Time bins `k` and trials `r` are 1-based in every public signature. The
//! bins are stored densely in bin-major order: entry `(k, r)` lives at
//! `(k - 1) * n_trials + (r - 1)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SmurfError};

/// Probability of an event in one bin, `λΔ = e^{x+z} / (1 + e^{x+z})`.
pub fn cif(x_k: f64, z_r: f64) -> Result<f64> {
    if !x_k.is_finite() || !z_r.is_finite() {
        return Err(invalid(format!("cif inputs must be finite (x={x_k}, z={z_r})")));
    }
    Ok(logistic(x_k + z_r))
}

/// Logistic function kept strictly inside (0, 1).
#[inline]
pub fn logistic(s: f64) -> f64 {
    let p = if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    };
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// Converts a per-bin probability into a rate in Hz.
pub fn rate_hz(lambda_bin: f64, delta_s: f64) -> Result<f64> {
    if !(delta_s > 0.0) || !delta_s.is_finite() {
        return Err(invalid(format!("delta_s must be positive, got {delta_s}")));
    }
    if !(0.0..=1.0).contains(&lambda_bin) {
        return Err(invalid(format!(
            "lambda_bin must lie in [0, 1], got {lambda_bin}"
        )));
    }
    Ok(lambda_bin / delta_s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub n_bins: usize,
    pub n_trials: usize,
    /// Bin-major `n_bins * n_trials` values, nominally 0 or 1.
    pub bins: Vec<u8>,
    pub delta_s: f64,
    pub cue_bin: usize,
    pub cond_start_trial: usize,
    pub u_x: Vec<u8>,
    pub u_z: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    EmptyLattice,
    BinsShape { expected: usize, got: usize },
    NonBinaryBin { k: usize, r: usize, value: u8 },
    NonPositiveDelta(f64),
    CueBinOutOfRange { cue_bin: usize, n_bins: usize },
    CondStartOutOfRange { cond_start_trial: usize, n_trials: usize },
    InputLength { which: &'static str, expected: usize, got: usize },
    NonBinaryInput { which: &'static str, index: usize, value: u8 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyLattice => write!(f, "raster must have at least one bin and one trial"),
            Violation::BinsShape { expected, got } => {
                write!(f, "bins has {got} entries, expected {expected}")
            }
            Violation::NonBinaryBin { k, r, value } => {
                write!(f, "bin ({k},{r}) holds {value}, expected 0 or 1")
            }
            Violation::NonPositiveDelta(d) => write!(f, "delta_s must be positive, got {d}"),
            Violation::CueBinOutOfRange { cue_bin, n_bins } => {
                write!(f, "cue_bin out of range ({cue_bin} not in 1..={n_bins})")
            }
            Violation::CondStartOutOfRange {
                cond_start_trial,
                n_trials,
            } => write!(
                f,
                "cond_start_trial out of range ({cond_start_trial} not in 1..={n_trials})"
            ),
            Violation::InputLength {
                which,
                expected,
                got,
            } => write!(f, "{which} has length {got}, expected {expected}"),
            Violation::NonBinaryInput {
                which,
                index,
                value,
            } => write!(f, "{which}[{index}] holds {value}, expected 0 or 1"),
        }
    }
}

/// Every violated raster invariant, in a stable order. Empty means valid.
pub fn validate_raster(raster: &Raster) -> Vec<Violation> {
    let mut out = Vec::new();
    let (k_n, r_n) = (raster.n_bins, raster.n_trials);
    if k_n == 0 || r_n == 0 {
        out.push(Violation::EmptyLattice);
    }
    if raster.bins.len() != k_n * r_n {
        out.push(Violation::BinsShape {
            expected: k_n * r_n,
            got: raster.bins.len(),
        });
    } else {
        for (i, &v) in raster.bins.iter().enumerate() {
            if v > 1 {
                out.push(Violation::NonBinaryBin {
                    k: i / r_n + 1,
                    r: i % r_n + 1,
                    value: v,
                });
            }
        }
    }
    if !(raster.delta_s > 0.0) || !raster.delta_s.is_finite() {
        out.push(Violation::NonPositiveDelta(raster.delta_s));
    }
    if raster.cue_bin < 1 || raster.cue_bin > k_n {
        out.push(Violation::CueBinOutOfRange {
            cue_bin: raster.cue_bin,
            n_bins: k_n,
        });
    }
    if raster.cond_start_trial < 1 || raster.cond_start_trial > r_n {
        out.push(Violation::CondStartOutOfRange {
            cond_start_trial: raster.cond_start_trial,
            n_trials: r_n,
        });
    }
    for (which, seq, expected) in [("u_x", &raster.u_x, k_n), ("u_z", &raster.u_z, r_n)] {
        if seq.len() != expected {
            out.push(Violation::InputLength {
                which,
                expected,
                got: seq.len(),
            });
        }
        for (index, &value) in seq.iter().enumerate() {
            if value > 1 {
                out.push(Violation::NonBinaryInput {
                    which,
                    index: index + 1,
                    value,
                });
            }
        }
    }
    out
}

impl Raster {
    /// Builds a raster from a bin-major bin vector and validates it.
    pub fn new(
        n_bins: usize,
        n_trials: usize,
        bins: Vec<u8>,
        delta_s: f64,
        cue_bin: usize,
        cond_start_trial: usize,
    ) -> Result<Self> {
        let u_x = (1..=n_bins).map(|k| u8::from(k >= cue_bin)).collect();
        let u_z = (1..=n_trials)
            .map(|r| u8::from(r >= cond_start_trial))
            .collect();
        Raster {
            n_bins,
            n_trials,
            bins,
            delta_s,
            cue_bin,
            cond_start_trial,
            u_x,
            u_z,
        }
        .validated()
    }

    /// All-zero raster with the default cue/conditioning indicators.
    pub fn zeros(
        n_bins: usize,
        n_trials: usize,
        delta_s: f64,
        cue_bin: usize,
        cond_start_trial: usize,
    ) -> Result<Self> {
        Self::new(
            n_bins,
            n_trials,
            vec![0; n_bins * n_trials],
            delta_s,
            cue_bin,
            cond_start_trial,
        )
    }

    pub fn validated(self) -> Result<Self> {
        let violations = validate_raster(&self);
        if violations.is_empty() {
            Ok(self)
        } else {
            let msg: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            Err(invalid(msg.join("; ")))
        }
    }

    #[inline]
    pub fn get(&self, k: usize, r: usize) -> u8 {
        self.bins[(k - 1) * self.n_trials + (r - 1)]
    }

    #[inline]
    pub fn set(&mut self, k: usize, r: usize, value: u8) {
        self.bins[(k - 1) * self.n_trials + (r - 1)] = value;
    }

    /// Bins of time step `k` across all trials.
    #[inline]
    pub fn bin_row(&self, k: usize) -> &[u8] {
        let start = (k - 1) * self.n_trials;
        &self.bins[start..start + self.n_trials]
    }

    pub fn total_events(&self) -> u64 {
        self.bins.iter().map(|&b| u64::from(b)).sum()
    }

    /// Swaps the roles of time and trials, including landmarks and inputs.
    pub fn transposed(&self) -> Raster {
        let mut bins = vec![0u8; self.bins.len()];
        for k in 1..=self.n_bins {
            for r in 1..=self.n_trials {
                bins[(r - 1) * self.n_bins + (k - 1)] = self.get(k, r);
            }
        }
        Raster {
            n_bins: self.n_trials,
            n_trials: self.n_bins,
            bins,
            delta_s: self.delta_s,
            cue_bin: self.cond_start_trial,
            cond_start_trial: self.cue_bin,
            u_x: self.u_z.clone(),
            u_z: self.u_x.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = RasterDoc {
            delta_s: self.delta_s,
            cue_bin: self.cue_bin,
            cond_start_trial: self.cond_start_trial,
            u_x: self.u_x.clone(),
            u_z: self.u_z.clone(),
            bins: (1..=self.n_trials)
                .map(|r| (1..=self.n_bins).map(|k| self.get(k, r)).collect())
                .collect(),
        };
        serde_json::to_string(&doc).map_err(|e| SmurfError::Format(e.to_string()))
    }

    /// Parses the canonical JSON document and validates the result.
    pub fn from_json(text: &str) -> Result<Raster> {
        let doc: RasterDoc =
            serde_json::from_str(text).map_err(|e| SmurfError::Format(e.to_string()))?;
        let n_trials = doc.bins.len();
        let n_bins = doc.bins.first().map_or(0, Vec::len);
        let bins = trial_rows_to_bin_major(&doc.bins, n_bins)?;
        Raster {
            n_bins,
            n_trials,
            bins,
            delta_s: doc.delta_s,
            cue_bin: doc.cue_bin,
            cond_start_trial: doc.cond_start_trial,
            u_x: doc.u_x,
            u_z: doc.u_z,
        }
        .validated()
    }

    /// Parses a bins-only CSV (one row per trial, one column per bin).
    /// Landmarks are supplied by the caller; the inputs default to the
    /// post-cue and conditioning indicators.
    pub fn from_csv(
        text: &str,
        delta_s: f64,
        cue_bin: usize,
        cond_start_trial: usize,
    ) -> Result<Raster> {
        let mut rows = Vec::new();
        for (line_no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|cell| {
                    cell.trim().parse::<u8>().map_err(|_| {
                        SmurfError::Format(format!(
                            "line {}: cannot parse {:?} as a bin value",
                            line_no + 1,
                            cell.trim()
                        ))
                    })
                })
                .collect::<Result<Vec<u8>>>()?;
            rows.push(row);
        }
        let n_bins = rows.first().map_or(0, Vec::len);
        let bins = trial_rows_to_bin_major(&rows, n_bins)?;
        Raster::new(n_bins, rows.len(), bins, delta_s, cue_bin, cond_start_trial)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.bins.len() * 2);
        for r in 1..=self.n_trials {
            for k in 1..=self.n_bins {
                if k > 1 {
                    out.push(',');
                }
                out.push(if self.get(k, r) == 0 { '0' } else { '1' });
            }
            out.push('\n');
        }
        out
    }
}

fn trial_rows_to_bin_major(rows: &[Vec<u8>], n_bins: usize) -> Result<Vec<u8>> {
    let n_trials = rows.len();
    let mut bins = vec![0u8; n_bins * n_trials];
    for (r, row) in rows.iter().enumerate() {
        if row.len() != n_bins {
            return Err(SmurfError::Format(format!(
                "trial {} has {} bins, expected {n_bins}",
                r + 1,
                row.len()
            )));
        }
        for (k, &v) in row.iter().enumerate() {
            bins[k * n_trials + r] = v;
        }
    }
    Ok(bins)
}

#[derive(Serialize, Deserialize)]
struct RasterDoc {
    delta_s: f64,
    cue_bin: usize,
    cond_start_trial: usize,
    u_x: Vec<u8>,
    u_z: Vec<u8>,
    bins: Vec<Vec<u8>>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_second_raster() -> Raster {
        Raster::zeros(2000, 45, 0.001, 1001, 16).unwrap()
    }

    #[test]
    fn cif_at_origin_is_half() {
        assert_eq!(cif(0.0, 0.0).unwrap(), 0.5);
    }

    #[test]
    fn cif_at_minus_four() {
        let expected = (-4.0f64).exp() / (1.0 + (-4.0f64).exp());
        assert!((cif(-1.5, -2.5).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.01799).abs() < 1e-5);
    }

    #[test]
    fn cif_small_rate_matches_product_form() {
        for s in [-3.0, -4.0, -6.0, -10.0] {
            let (x, z) = (s * 0.3, s * 0.7);
            let p = cif(x, z).unwrap();
            assert!(((p - x.exp() * z.exp()) / p).abs() < 0.05, "s={s}");
        }
    }

    #[test]
    fn cif_rejects_non_finite() {
        assert!(cif(f64::NAN, 0.0).is_err());
        assert!(cif(0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn cif_stays_inside_unit_interval() {
        for s in [-800.0, -40.0, 40.0, 800.0] {
            let p = cif(s, 0.0).unwrap();
            assert!(p > 0.0 && p < 1.0, "s={s} gave {p}");
        }
    }

    #[test]
    fn rate_conversion() {
        assert!((rate_hz(0.06, 0.001).unwrap() - 60.0).abs() < 1e-9);
        assert_eq!(rate_hz(0.0, 0.005).unwrap(), 0.0);
        assert!((rate_hz(0.02, 0.001).unwrap() - 20.0).abs() < 1e-9);
        assert!(rate_hz(0.5, 0.0).is_err());
        assert!(rate_hz(0.5, -1.0).is_err());
    }

    #[test]
    fn well_formed_raster_validates() {
        assert!(validate_raster(&two_second_raster()).is_empty());
    }

    #[test]
    fn non_binary_entry_is_located() {
        let mut raster = two_second_raster();
        raster.set(3, 7, 2);
        let v = validate_raster(&raster);
        assert_eq!(v, vec![Violation::NonBinaryBin { k: 3, r: 7, value: 2 }]);
        assert!(v[0].to_string().contains("(3,7)"));
    }

    #[test]
    fn cue_bin_past_end_is_reported() {
        let mut raster = two_second_raster();
        raster.cue_bin = raster.n_bins + 1;
        let v = validate_raster(&raster);
        assert_eq!(v.len(), 1);
        assert!(v[0].to_string().contains("cue_bin out of range"));
    }

    #[test]
    fn several_violations_are_all_reported() {
        let mut raster = two_second_raster();
        raster.delta_s = 0.0;
        raster.cond_start_trial = 0;
        raster.u_x.pop();
        raster.u_z[0] = 3;
        assert_eq!(validate_raster(&raster).len(), 4);
    }

    #[test]
    fn json_round_trip_preserves_layout() {
        let mut raster = Raster::zeros(4, 3, 0.005, 2, 2).unwrap();
        raster.set(1, 3, 1);
        raster.set(4, 1, 1);
        let text = raster.to_json().unwrap();
        assert!(text.contains("\"bins\":[[0,0,0,1],[0,0,0,0],[1,0,0,0]]"));
        assert_eq!(Raster::from_json(&text).unwrap(), raster);
    }

    #[test]
    fn json_rejects_ragged_and_invalid() {
        let ragged = r#"{"delta_s":0.001,"cue_bin":1,"cond_start_trial":1,"u_x":[0,0],"u_z":[0,0],"bins":[[0,1],[0]]}"#;
        assert!(Raster::from_json(ragged).is_err());
        let bad = r#"{"delta_s":0.001,"cue_bin":1,"cond_start_trial":1,"u_x":[0,0],"u_z":[0],"bins":[[0,2]]}"#;
        assert!(Raster::from_json(bad).is_err());
        assert!(Raster::from_json("{not json").is_err());
    }

    #[test]
    fn csv_rows_are_trials() {
        let raster = Raster::from_csv("0,1,0\n1,0,0\n", 0.001, 2, 2).unwrap();
        assert_eq!((raster.n_bins, raster.n_trials), (3, 2));
        assert_eq!(raster.get(2, 1), 1);
        assert_eq!(raster.get(1, 2), 1);
        assert_eq!(raster.u_x, vec![0, 1, 1]);
        assert_eq!(raster.u_z, vec![0, 1]);
        assert_eq!(raster.to_csv(), "0,1,0\n1,0,0\n");
        assert!(Raster::from_csv("0,x\n", 0.001, 1, 1).is_err());
    }

    #[test]
    fn transpose_swaps_axes() {
        let mut raster = Raster::zeros(3, 2, 0.001, 2, 1).unwrap();
        raster.set(3, 1, 1);
        let t = raster.transposed();
        assert_eq!((t.n_bins, t.n_trials), (2, 3));
        assert_eq!(t.get(1, 3), 1);
        assert_eq!(t.transposed(), raster);
    }
}
