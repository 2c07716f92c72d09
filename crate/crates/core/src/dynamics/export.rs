use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{ChainState, DynamicsConfig, InitialDistribution, Process, Trajectory};
use crate::error::{Error, Result};

/// Leading bytes of the binary trajectory dump.
pub const BINARY_MAGIC: [u8; 4] = *b"LGVT";
const BINARY_VERSION: u32 = 1;

/// Columns `step, t, x1..xd, [v1..vd], bottom`.
pub fn write_csv<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    let d = traj.dim();
    let has_v = traj.states.iter().any(|s| s.v.is_some());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["step".to_string(), "t".to_string()];
    header.extend((1..=d).map(|i| format!("x{i}")));
    if has_v {
        header.extend((1..=d).map(|i| format!("v{i}")));
    }
    header.push("bottom".into());
    w.write_record(&header)?;
    for s in &traj.states {
        let mut row = vec![s.step.to_string(), s.t.to_string()];
        row.extend(s.x.iter().map(f64::to_string));
        if has_v {
            match &s.v {
                Some(v) => row.extend(v.iter().map(f64::to_string)),
                None => row.extend(std::iter::repeat_n(String::new(), d)),
            }
        }
        row.push((s.bottom as u8).to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Little-endian dump:
/// `magic, version u32, dim u32, has_v u8, process u8, gamma f64, mu f64,
/// eta f64, n u64`, then per state `step u64, t f64, bottom u8, x, [v]`.
pub fn write_binary<W: Write>(traj: &Trajectory, mut out: W) -> Result<()> {
    let d = traj.dim();
    let has_v = traj.states.iter().all(|s| s.v.is_some()) && !traj.states.is_empty();
    let (kind, gamma, mu) = match traj.process {
        Process::Overdamped => (0u8, 0.0, 0.0),
        Process::Underdamped { gamma, mu } => (1u8, gamma, mu),
    };
    out.write_all(&BINARY_MAGIC)?;
    out.write_all(&BINARY_VERSION.to_le_bytes())?;
    out.write_all(&(d as u32).to_le_bytes())?;
    out.write_all(&[has_v as u8, kind])?;
    for v in [gamma, mu, traj.eta] {
        out.write_all(&v.to_le_bytes())?;
    }
    out.write_all(&(traj.states.len() as u64).to_le_bytes())?;
    for s in &traj.states {
        out.write_all(&(s.step as u64).to_le_bytes())?;
        out.write_all(&s.t.to_le_bytes())?;
        out.write_all(&[s.bottom as u8])?;
        for v in &s.x {
            out.write_all(&v.to_le_bytes())?;
        }
        if has_v {
            for v in s.v.as_deref().unwrap_or_default() {
                out.write_all(&v.to_le_bytes())?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn take<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn f64_le<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_le_bytes(take(r)?))
}

pub fn read_binary<R: Read>(mut r: R) -> Result<Trajectory> {
    if take::<4, _>(&mut r)? != BINARY_MAGIC {
        return Err(Error::Format("not a trajectory dump (bad magic)".into()));
    }
    let version = u32::from_le_bytes(take(&mut r)?);
    if version != BINARY_VERSION {
        return Err(Error::Format(format!("unsupported dump version {version}")));
    }
    let d = u32::from_le_bytes(take(&mut r)?) as usize;
    let [has_v, kind] = take::<2, _>(&mut r)?;
    let gamma = f64_le(&mut r)?;
    let mu = f64_le(&mut r)?;
    let eta = f64_le(&mut r)?;
    let process = match kind {
        0 => Process::Overdamped,
        1 => Process::Underdamped { gamma, mu },
        k => return Err(Error::Format(format!("unknown process tag {k}"))),
    };
    let n = u64::from_le_bytes(take(&mut r)?) as usize;
    let mut states = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        let step = u64::from_le_bytes(take(&mut r)?) as usize;
        let t = f64_le(&mut r)?;
        let [bottom] = take::<1, _>(&mut r)?;
        let x = (0..d).map(|_| f64_le(&mut r)).collect::<Result<Vec<_>>>()?;
        let v = if has_v == 1 {
            Some((0..d).map(|_| f64_le(&mut r)).collect::<Result<Vec<_>>>()?)
        } else {
            None
        };
        states.push(ChainState {
            x,
            v,
            step,
            t,
            bottom: bottom != 0,
        });
    }
    if states.is_empty() {
        return Err(Error::Format("trajectory dump holds no states".into()));
    }
    Ok(Trajectory { process, eta, states })
}

/// Everything needed to reproduce a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub seed: u64,
    pub config: DynamicsConfig,
    pub initial: InitialDistribution,
    pub n_chains: usize,
    pub rng: String,
    pub version: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl RunManifest {
    pub fn new(config: &DynamicsConfig, initial: &InitialDistribution, n_chains: usize) -> Self {
        Self {
            seed: config.seed,
            config: config.clone(),
            initial: initial.clone(),
            n_chains,
            rng: "chacha8, stream = chain index".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            extra: BTreeMap::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::run_chain_seeded;
    use crate::potentials::GaussianPotential;

    fn sample(process: Process) -> Trajectory {
        let p = GaussianPotential::isotropic(2, 1.0).unwrap();
        let cfg = DynamicsConfig {
            process,
            eta: 0.1,
            steps: 5,
            radius_guard: Some(0.5),
            seed: 7,
        };
        run_chain_seeded(&p, &cfg, &InitialDistribution::StandardGaussian).unwrap()
    }

    #[test]
    fn binary_round_trip() {
        for process in [Process::Overdamped, Process::Underdamped { gamma: 2.0, mu: 1.0 }] {
            let tr = sample(process);
            let mut buf = Vec::new();
            write_binary(&tr, &mut buf).unwrap();
            assert_eq!(&buf[..4], b"LGVT");
            assert_eq!(read_binary(buf.as_slice()).unwrap(), tr);
        }
    }

    #[test]
    fn truncated_dump_is_rejected() {
        let tr = sample(Process::Overdamped);
        let mut buf = Vec::new();
        write_binary(&tr, &mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(read_binary(buf.as_slice()).is_err());
        assert!(read_binary(&b"NOPE"[..]).is_err());
    }

    #[test]
    fn csv_columns() {
        let tr = sample(Process::Underdamped { gamma: 2.0, mu: 1.0 });
        let mut buf = Vec::new();
        write_csv(&tr, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "step,t,x1,x2,v1,v2,bottom");
        assert_eq!(lines.count(), 6);
    }

    #[test]
    fn manifest_echoes_seed() {
        let cfg = DynamicsConfig {
            process: Process::Overdamped,
            eta: 0.1,
            steps: 5,
            radius_guard: None,
            seed: 99,
        };
        let m = RunManifest::new(&cfg, &InitialDistribution::GaussianScaled, 3);
        let json = serde_json::to_string(&m).unwrap();
        assert!(json.contains("\"seed\":99"));
        let back: RunManifest = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
    }
}
