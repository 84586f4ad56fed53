//! On-disk formats: fit documents, the binary draws sidecar, and the CSV
//! exports of summary surfaces.
//!
//! Sidecar layout (little-endian): the 8-byte magic `SMRFDRW1`, then three
//! `u64` giving the number of draws, bins and trials, then one row of `f64`
//! per draw holding `x_1..x_K` followed by `z_1..z_R`.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::em::{FitResult, TraceEntry};
use crate::error::{Result, SmurfError};
use crate::model::{ModelParams, PosteriorDraws};
use crate::summaries::{EffectSamples, Learning, Surface};

pub const DRAWS_MAGIC: &[u8; 8] = b"SMRFDRW1";

/// JSON form of a [`FitResult`]; the draws themselves live in the sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDocument {
    pub params_hat: ModelParams,
    pub initial_params: ModelParams,
    /// Parameters the retained draws were sampled under.
    pub draws_params: ModelParams,
    pub trace: Vec<TraceEntry>,
    pub converged: bool,
    pub iterations: usize,
    pub seed: u64,
    pub n_bins: usize,
    pub n_trials: usize,
    pub n_draws: usize,
    pub burn_in_discarded: usize,
    pub sweeps: u64,
    pub clamped_pg_draws: u64,
    /// File name of the draws sidecar, relative to the document.
    pub draws_sidecar: Option<String>,
}

impl FitDocument {
    pub fn from_fit(fit: &FitResult, seed: u64, draws_sidecar: Option<String>) -> FitDocument {
        FitDocument {
            params_hat: fit.params_hat,
            initial_params: fit.initial_params,
            draws_params: fit.draws.theta_at,
            trace: fit.trace.clone(),
            converged: fit.converged,
            iterations: fit.iterations,
            seed,
            n_bins: fit.draws.n_bins(),
            n_trials: fit.draws.n_trials(),
            n_draws: fit.draws.len(),
            burn_in_discarded: fit.draws.burn_in_discarded,
            sweeps: fit.stats.sweeps,
            clamped_pg_draws: fit.stats.clamped,
            draws_sidecar,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| SmurfError::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<FitDocument> {
        serde_json::from_str(text).map_err(|e| SmurfError::Format(format!("fit result: {e}")))
    }
}

pub fn write_draws<W: Write>(mut out: W, draws: &PosteriorDraws) -> Result<()> {
    out.write_all(DRAWS_MAGIC)?;
    for n in [draws.len(), draws.n_bins(), draws.n_trials()] {
        out.write_all(&(n as u64).to_le_bytes())?;
    }
    let mut row = Vec::with_capacity(8 * (draws.n_bins() + draws.n_trials()));
    for (x, z) in draws.iter() {
        row.clear();
        for v in x.iter().chain(z) {
            row.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&row)?;
    }
    out.flush()?;
    Ok(())
}

fn read_u64<R: Read>(input: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    input.read_exact(&mut buf).map_err(truncated)?;
    Ok(u64::from_le_bytes(buf))
}

fn truncated(e: io::Error) -> SmurfError {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        SmurfError::Format("draws sidecar is truncated".into())
    } else {
        SmurfError::Io(e)
    }
}

/// Reads a sidecar; the metadata not stored in it is supplied by the caller.
pub fn read_draws<R: Read>(
    mut input: R,
    theta_at: ModelParams,
    burn_in_discarded: usize,
    seed: u64,
) -> Result<PosteriorDraws> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic).map_err(truncated)?;
    if &magic != DRAWS_MAGIC {
        return Err(SmurfError::Format("draws sidecar has a bad magic header".into()));
    }
    let n = read_u64(&mut input)? as usize;
    let n_bins = read_u64(&mut input)? as usize;
    let n_trials = read_u64(&mut input)? as usize;
    if n == 0 || n_bins == 0 || n_trials == 0 {
        return Err(SmurfError::Format("draws sidecar header has a zero dimension".into()));
    }
    let width = n_bins
        .checked_add(n_trials)
        .and_then(|w| w.checked_mul(8))
        .ok_or_else(|| SmurfError::Format("draws sidecar header is implausible".into()))?;
    let mut draws =
        PosteriorDraws::with_capacity(n_bins, n_trials, 0, theta_at, burn_in_discarded, seed);
    let mut row = vec![0u8; width];
    let mut values = vec![0.0; n_bins + n_trials];
    for _ in 0..n {
        input.read_exact(&mut row).map_err(truncated)?;
        for (v, b) in values.iter_mut().zip(row.chunks_exact(8)) {
            *v = f64::from_le_bytes(b.try_into().expect("8-byte chunk"));
        }
        draws.push(&values[..n_bins], &values[n_bins..])?;
    }
    let mut rest = [0u8; 1];
    if input.read(&mut rest)? != 0 {
        return Err(SmurfError::Format("draws sidecar has trailing bytes".into()));
    }
    Ok(draws)
}

/// Writes `bytes` to a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| SmurfError::Io(io::Error::new(io::ErrorKind::InvalidInput, "no file name")))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Surface as CSV: one row per trial, one column per bin, no header.
pub fn surface_csv(surface: &Surface) -> String {
    let mut out = String::with_capacity(surface.values.len() * 12);
    for r in 1..=surface.n_trials {
        for k in 1..=surface.n_bins {
            if k > 1 {
                out.push(',');
            }
            out.push_str(&surface.get(k, r).to_string());
        }
        out.push('\n');
    }
    out
}

/// Pointwise posterior quantiles of an effect, one row per index.
pub fn effect_csv(effect: &EffectSamples) -> String {
    let mut out = String::from("index,q025,q25,median,q75,q975\n");
    for q in effect.quantiles() {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            q.index, q.q025, q.q25, q.median, q.q75, q.q975
        ));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub detected: bool,
    pub learning_trial: Option<usize>,
    pub learning_bin: Option<usize>,
    pub learning_time_ms: Option<f64>,
    pub threshold: f64,
}

impl Detection {
    pub fn new(learning: Option<Learning>, cue_bin: usize, delta_s: f64, threshold: f64) -> Self {
        Detection {
            detected: learning.is_some(),
            learning_trial: learning.map(|l| l.learning_trial),
            learning_bin: learning.map(|l| l.learning_bin),
            learning_time_ms: learning.map(|l| l.learning_time_ms(cue_bin, delta_s)),
            threshold,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_draws() -> PosteriorDraws {
        let pairs: Vec<_> = (0..4)
            .map(|i| {
                let f = i as f64;
                (vec![f, -f, 0.5 * f], vec![1e-300 * f, f64::MAX / (f + 1.0)])
            })
            .collect();
        PosteriorDraws::from_pairs(&pairs, ModelParams::default()).unwrap()
    }

    #[test]
    fn sidecar_round_trip_is_exact() {
        let draws = sample_draws();
        let mut buf = Vec::new();
        write_draws(&mut buf, &draws).unwrap();
        assert_eq!(&buf[..8], b"SMRFDRW1");
        assert_eq!(buf.len(), 8 + 24 + 4 * 5 * 8);
        let back = read_draws(buf.as_slice(), ModelParams::default(), 0, 0).unwrap();
        assert_eq!(back, draws);
    }

    #[test]
    fn sidecar_rejects_corruption() {
        let draws = sample_draws();
        let mut buf = Vec::new();
        write_draws(&mut buf, &draws).unwrap();
        let p = ModelParams::default();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_draws(bad.as_slice(), p, 0, 0), Err(SmurfError::Format(_))));
        let short = &buf[..buf.len() - 3];
        assert!(matches!(read_draws(short, p, 0, 0), Err(SmurfError::Format(_))));
        let mut long = buf.clone();
        long.push(0);
        assert!(matches!(read_draws(long.as_slice(), p, 0, 0), Err(SmurfError::Format(_))));
    }

    #[test]
    fn surface_csv_has_trials_as_rows() {
        let s = Surface {
            n_bins: 3,
            n_trials: 2,
            values: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
        };
        assert_eq!(surface_csv(&s), "1,3,5\n2,4,6\n");
    }

    #[test]
    fn effect_csv_layout() {
        let e = EffectSamples {
            n_draws: 2,
            len: 2,
            values: vec![1.0, 10.0, 3.0, 30.0],
        };
        let csv = effect_csv(&e);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "index,q025,q25,median,q75,q975");
        assert_eq!(lines[1], "1,1.05,1.5,2,2.5,2.95");
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn detection_json_fields() {
        let d = Detection::new(
            Some(Learning {
                learning_bin: 1101,
                learning_trial: 17,
            }),
            1001,
            0.001,
            0.95,
        );
        assert!((d.learning_time_ms.unwrap() - 100.0).abs() < 1e-9);
        let none = Detection::new(None, 1001, 0.001, 1.0);
        let json = serde_json::to_string(&none).unwrap();
        assert!(json.contains("\"detected\":false"));
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = std::env::temp_dir().join(format!("smurf-io-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let p = dir.join("out.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(&dir).unwrap().count(), 1);
        fs::remove_dir_all(&dir).unwrap();
    }
}
