//! Flat binary and CSV serialization for field snapshots and event logs.
//!
//! Field layout (version 1): magic "FFLD", u32 version, u32 dim, u32 n,
//! u8 law code, u64 seed, u64 value count, then little-endian f64 values in
//! interior-node order (row-major, axis 0 fastest).
//!
//! Event-log layout (version 1): magic "FEVT", u32 version, f64 eps, f64
//! alpha, f64 tau, f64 horizon, u64 seed, u32 observable count, u64 event
//! count, then per event: f64 time, 3×f64 center, and per observable the
//! five f64 columns (pre, post, tilde_pre, tilde_post, cond_var).

use std::io::{Read, Write};
use std::sync::Arc;

use crate::domain::Grid;
use crate::dynamics::{EventLog, EventRecord};
use crate::error::{Error, Result};
use crate::fields::{Field, LawTag};

const FIELD_MAGIC: &[u8; 4] = b"FFLD";
const EVENT_MAGIC: &[u8; 4] = b"FEVT";

fn w_u32(w: &mut impl Write, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn w_u64(w: &mut impl Write, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn w_f64(w: &mut impl Write, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn r_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn r_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn r_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn write_field(field: &Field, w: &mut impl Write) -> Result<()> {
    w.write_all(FIELD_MAGIC)?;
    w_u32(w, 1)?;
    w_u32(w, field.grid.dim() as u32)?;
    w_u32(w, field.grid.n as u32)?;
    w.write_all(&[field.law.code()])?;
    w_u64(w, field.seed)?;
    w_u64(w, field.values.len() as u64)?;
    for v in &field.values {
        w_f64(w, *v)?;
    }
    Ok(())
}

/// Read a field snapshot back onto its grid. The grid must match the
/// stored dimension, resolution and value count.
pub fn read_field(grid: &Arc<Grid>, r: &mut impl Read) -> Result<Field> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != FIELD_MAGIC {
        return Err(Error::DegenerateInput("not a field snapshot".into()));
    }
    let version = r_u32(r)?;
    if version != 1 {
        return Err(Error::DegenerateInput(format!("unknown field version {version}")));
    }
    let dim = r_u32(r)? as usize;
    let n = r_u32(r)? as usize;
    if dim != grid.dim() || n != grid.n {
        return Err(Error::GridMismatch);
    }
    let mut law_byte = [0u8; 1];
    r.read_exact(&mut law_byte)?;
    let law = LawTag::from_code(law_byte[0])
        .ok_or_else(|| Error::DegenerateInput("unknown law tag".into()))?;
    let seed = r_u64(r)?;
    let count = r_u64(r)? as usize;
    if count != grid.num_interior() {
        return Err(Error::GridMismatch);
    }
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        values.push(r_f64(r)?);
    }
    Ok(Field { grid: grid.clone(), values, law, seed })
}

/// Field values as CSV (x, y, z, value) for inspection.
pub fn write_field_csv(field: &Field, w: &mut impl Write) -> Result<()> {
    let d = field.grid.dim();
    let header: Vec<&str> = ["x", "y", "z"][..d].iter().chain(&["value"]).cloned().collect();
    writeln!(w, "{}", header.join(","))?;
    for (p, v) in field.grid.points.iter().zip(&field.values) {
        let coords: Vec<String> = (0..d).map(|a| format!("{:.17e}", p[a])).collect();
        writeln!(w, "{},{:.17e}", coords.join(","), v)?;
    }
    Ok(())
}

pub fn write_event_log(log: &EventLog, w: &mut impl Write) -> Result<()> {
    w.write_all(EVENT_MAGIC)?;
    w_u32(w, 1)?;
    w_f64(w, log.eps)?;
    w_f64(w, log.alpha)?;
    w_f64(w, log.tau)?;
    w_f64(w, log.horizon)?;
    w_u64(w, log.seed)?;
    w_u32(w, log.num_observables as u32)?;
    w_u64(w, log.events.len() as u64)?;
    for ev in &log.events {
        w_f64(w, ev.time)?;
        let mut c = [0.0f64; 3];
        c[..ev.center.len()].copy_from_slice(&ev.center);
        for v in c {
            w_f64(w, v)?;
        }
        for k in 0..log.num_observables {
            w_f64(w, ev.pre[k])?;
            w_f64(w, ev.post[k])?;
            w_f64(w, ev.tilde_pre[k])?;
            w_f64(w, ev.tilde_post[k])?;
            w_f64(w, ev.cond_var[k])?;
        }
    }
    Ok(())
}

/// Header and event rows of a serialized log (without the final field,
/// which travels separately as a field snapshot).
pub struct EventLogSummary {
    pub eps: f64,
    pub alpha: f64,
    pub tau: f64,
    pub horizon: f64,
    pub seed: u64,
    pub num_observables: usize,
    pub events: Vec<EventRecord>,
}

pub fn read_event_log(r: &mut impl Read) -> Result<EventLogSummary> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != EVENT_MAGIC {
        return Err(Error::DegenerateInput("not an event log".into()));
    }
    let version = r_u32(r)?;
    if version != 1 {
        return Err(Error::DegenerateInput(format!("unknown event-log version {version}")));
    }
    let eps = r_f64(r)?;
    let alpha = r_f64(r)?;
    let tau = r_f64(r)?;
    let horizon = r_f64(r)?;
    let seed = r_u64(r)?;
    let num_observables = r_u32(r)? as usize;
    let count = r_u64(r)? as usize;
    let mut events = Vec::with_capacity(count);
    for _ in 0..count {
        let time = r_f64(r)?;
        let mut center = vec![0.0; 3];
        for c in center.iter_mut() {
            *c = r_f64(r)?;
        }
        let mut pre = vec![0.0; num_observables];
        let mut post = vec![0.0; num_observables];
        let mut tilde_pre = vec![0.0; num_observables];
        let mut tilde_post = vec![0.0; num_observables];
        let mut cond_var = vec![0.0; num_observables];
        for k in 0..num_observables {
            pre[k] = r_f64(r)?;
            post[k] = r_f64(r)?;
            tilde_pre[k] = r_f64(r)?;
            tilde_post[k] = r_f64(r)?;
            cond_var[k] = r_f64(r)?;
        }
        events.push(EventRecord { time, center, pre, post, tilde_pre, tilde_post, cond_var });
    }
    Ok(EventLogSummary { eps, alpha, tau, horizon, seed, num_observables, events })
}

/// Event table as CSV: n, T_n, center coordinates, then per observable the
/// pre / post pairings.
pub fn write_event_log_csv(log: &EventLog, w: &mut impl Write) -> Result<()> {
    let mut header = vec!["n".to_string(), "t".to_string()];
    for a in ["ux", "uy", "uz"].iter().take(3) {
        header.push(a.to_string());
    }
    for k in 0..log.num_observables {
        header.push(format!("pre_{k}"));
        header.push(format!("post_{k}"));
    }
    writeln!(w, "{}", header.join(","))?;
    for (n, ev) in log.events.iter().enumerate() {
        let mut row = vec![n.to_string(), format!("{:.17e}", ev.time)];
        let mut c = [0.0f64; 3];
        c[..ev.center.len()].copy_from_slice(&ev.center);
        for v in c {
            row.push(format!("{v:.17e}"));
        }
        for k in 0..log.num_observables {
            row.push(format!("{:.17e}", ev.pre[k]));
            row.push(format!("{:.17e}", ev.post[k]));
        }
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_grid, DomainSpec};
    use crate::dynamics::{run_dynamics, DynamicsConfig};
    use crate::fields::{sample_lattice_gff, TestFn, TestFnKind};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn event_log_roundtrip() {
        let grid = build_grid(&DomainSpec::unit_square(), 32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = sample_lattice_gff(&grid, &mut rng).unwrap();
        let f = TestFn::new(&grid, TestFnKind::GaussianBump {
            center: vec![0.5, 0.5],
            width: 0.12,
            amplitude: 1.0,
        })
        .unwrap();
        let cfg = DynamicsConfig {
            eps: 0.12,
            clock_constant: 0.5,
            horizon: 0.004,
            seed: 3,
            ..Default::default()
        };
        let log = run_dynamics(&h, &[f], &cfg).unwrap();
        assert!(!log.events.is_empty());
        let mut buf = Vec::new();
        write_event_log(&log, &mut buf).unwrap();
        let back = read_event_log(&mut buf.as_slice()).unwrap();
        assert_eq!(back.events.len(), log.events.len());
        assert_eq!(back.num_observables, 1);
        for (a, b) in back.events.iter().zip(&log.events) {
            assert_eq!(a.time, b.time);
            assert_eq!(a.pre, b.pre);
            assert_eq!(a.post, b.post);
            assert_eq!(a.cond_var, b.cond_var);
        }
        let mut csv = Vec::new();
        write_event_log_csv(&log, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("n,t,ux,uy,uz,pre_0,post_0"));
        assert_eq!(text.lines().count(), log.events.len() + 1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]

        #[test]
        fn field_roundtrip_is_bit_exact(seed in 0u64..1_000) {
            let grid = build_grid(&DomainSpec::unit_square(), 24).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut h = sample_lattice_gff(&grid, &mut rng).unwrap();
            h.seed = seed;
            let mut buf = Vec::new();
            write_field(&h, &mut buf).unwrap();
            let back = read_field(&grid, &mut buf.as_slice()).unwrap();
            prop_assert_eq!(back.values, h.values);
            prop_assert_eq!(back.seed, seed);
            prop_assert!(back.law == h.law);
        }
    }
}
