//! Dense solver for the Boolean master equation.
//!
//! Every rule fires at unit rate: from state `x`, rule `i` moves the system
//! to `x` with bit `i` replaced by `B_i(x)`. The probability vector over all
//! `2^d` states is indexed by the integer encoding of [`State`] and advanced
//! with explicit Euler steps. The generator is applied matrix-free.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::network::{BooleanNetwork, State};
use crate::par::Exec;

/// Default largest `d` for dense vectors (2^26 doubles, 512 MiB).
pub const DEFAULT_STATE_CAP: usize = 26;

const MAGIC: &[u8; 5] = b"BMEQ1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolverConfig {
    pub cap: usize,
    pub exec: Exec,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            cap: DEFAULT_STATE_CAP,
            exec: Exec::default(),
        }
    }
}

/// Dense distribution `p[enc(x)] = P(x)` over `{0,1}^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    d: usize,
    p: Vec<f64>,
}

impl StateVector {
    pub fn new(d: usize, p: Vec<f64>) -> Result<Self> {
        if d >= usize::BITS as usize || p.len() != 1usize << d {
            return Err(Error::DimensionMismatch {
                expected: 1usize.checked_shl(d as u32).unwrap_or(0),
                found: p.len(),
            });
        }
        Ok(StateVector { d, p })
    }

    pub fn uniform(d: usize) -> Self {
        let n = 1usize << d;
        StateVector {
            d,
            p: vec![1.0 / n as f64; n],
        }
    }

    pub fn delta(d: usize, x: State) -> Self {
        let mut p = vec![0.0; 1 << d];
        p[x.encode()] = 1.0;
        StateVector { d, p }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.p
    }

    pub fn mass(&self) -> f64 {
        self.p.iter().sum()
    }

    pub fn max_abs_diff(&self, other: &StateVector) -> f64 {
        self.p
            .iter()
            .zip(&other.p)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Clamped species take a fixed value; all others are uniform.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct InitialCondition {
    pub clamped: BTreeMap<usize, bool>,
}

impl InitialCondition {
    pub fn uniform() -> Self {
        Self::default()
    }

    pub fn clamp(mut self, species: usize, value: bool) -> Self {
        self.clamped.insert(species, value);
        self
    }

    /// Parses `NAME=0|1` pairs separated by commas. An empty string or
    /// `uniform` gives the uniform distribution.
    pub fn parse(net: &BooleanNetwork, spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let mut ic = InitialCondition::uniform();
        if spec.is_empty() || spec.eq_ignore_ascii_case("uniform") {
            return Ok(ic);
        }
        for item in spec.split(',') {
            let (name, value) = item
                .split_once('=')
                .ok_or_else(|| Error::InvalidAssignment(format!("expected NAME=0|1, got `{item}`")))?;
            let name = name.trim();
            let index = net
                .index_of(name)
                .ok_or_else(|| Error::UnknownSpecies(name.to_string()))?;
            let value = match value.trim() {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::InvalidAssignment(format!(
                        "`{name}` must be 0 or 1, got `{other}`"
                    )))
                }
            };
            ic = ic.clamp(index, value);
        }
        Ok(ic)
    }

    pub fn to_state_vector(&self, d: usize) -> Result<StateVector> {
        if let Some(&s) = self.clamped.keys().find(|&&s| s >= d) {
            return Err(Error::InvalidAssignment(format!("species {s} out of range")));
        }
        let free = d - self.clamped.len();
        let weight = 1.0 / (1u64 << free) as f64;
        let (mask, value) = self.clamped.iter().fold((0u64, 0u64), |(m, v), (&s, &b)| {
            (m | 1 << s, v | u64::from(b) << s)
        });
        let p = (0..1u64 << d)
            .map(|x| if x & mask == value { weight } else { 0.0 })
            .collect();
        StateVector::new(d, p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub snapshots: Vec<StateVector>,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.snapshots.first().map_or(0, |s| s.dim())
    }

    pub fn last(&self) -> Option<(f64, &StateVector)> {
        self.times.last().copied().zip(self.snapshots.last())
    }

    /// Writes the `BMEQ1` binary layout: magic, `u32` d, `u32` snapshot
    /// count, the times, then each snapshot in encoding order, all
    /// little-endian.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let d = self.dim() as u32;
        w.write_all(MAGIC)?;
        w.write_all(&d.to_le_bytes())?;
        w.write_all(&(self.times.len() as u32).to_le_bytes())?;
        for t in &self.times {
            w.write_all(&t.to_le_bytes())?;
        }
        for s in &self.snapshots {
            for v in &s.p {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 5];
        r.read_exact(&mut magic)
            .map_err(|_| Error::MalformedTrajectory("missing header".into()))?;
        if &magic != MAGIC {
            return Err(Error::MalformedTrajectory("bad magic".into()));
        }
        let mut word = [0u8; 4];
        let mut read_u32 = |r: &mut R| -> Result<u32> {
            r.read_exact(&mut word)
                .map_err(|_| Error::MalformedTrajectory("truncated header".into()))?;
            Ok(u32::from_le_bytes(word))
        };
        let d = read_u32(&mut r)? as usize;
        let n = read_u32(&mut r)? as usize;
        if d > 40 {
            return Err(Error::MalformedTrajectory(format!("implausible dimension {d}")));
        }
        let mut read_f64s = |count: usize| -> Result<Vec<f64>> {
            let mut buf = vec![0u8; count * 8];
            r.read_exact(&mut buf)
                .map_err(|_| Error::MalformedTrajectory("truncated data".into()))?;
            Ok(buf
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect())
        };
        let times = read_f64s(n)?;
        let snapshots = (0..n)
            .map(|_| StateVector::new(d, read_f64s(1 << d)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(Trajectory { times, snapshots })
    }
}

/// State after rule `i` fires in `x`.
pub fn apply_rule(net: &BooleanNetwork, i: usize, x: State) -> State {
    x.with(i, net.eval_rule(i, x))
}

fn check_cap(net: &BooleanNetwork, cap: usize) -> Result<()> {
    let d = net.len();
    if d > cap || d >= 63 {
        return Err(Error::CapacityExceeded { d, cap });
    }
    Ok(())
}

/// Time derivative of `p` under the master equation.
pub fn rhs(net: &BooleanNetwork, p: &StateVector) -> Result<StateVector> {
    let mut out = StateVector {
        d: p.d,
        p: vec![0.0; p.p.len()],
    };
    rhs_into(net, p, &mut out, &SolverConfig::default())?;
    Ok(out)
}

/// Writes the derivative into `out`. Each entry collects the inflow from
/// the `d` possible predecessors (states differing in one bit) and the
/// outflow of the rules that change the state, so entries are computed
/// independently of each other.
pub fn rhs_into(
    net: &BooleanNetwork,
    p: &StateVector,
    out: &mut StateVector,
    config: &SolverConfig,
) -> Result<()> {
    check_cap(net, config.cap)?;
    let d = net.len();
    if p.d != d || out.d != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: if p.d != d { p.d } else { out.d },
        });
    }
    let src = &p.p;
    config.exec.fill(&mut out.p, |y| {
        let ys = State(y as u64);
        let mut gain = 0.0;
        let mut loss = 0.0;
        for i in 0..d {
            let bit = ys.get(i);
            let pred = State(ys.0 ^ (1 << i));
            if net.eval_rule(i, pred) == bit {
                gain += src[pred.encode()];
            }
            if net.eval_rule(i, ys) != bit {
                loss += src[y];
            }
        }
        gain - loss
    });
    Ok(())
}

/// `n` snapshot times spread uniformly over `[0, t_end]`. For `n <= 1`
/// only `t_end` is requested (the solver records time 0 regardless).
pub fn uniform_snapshot_times(t_end: f64, n: usize) -> Vec<f64> {
    if n <= 1 || t_end == 0.0 {
        return vec![t_end];
    }
    (0..n).map(|k| t_end * k as f64 / (n - 1) as f64).collect()
}

/// Explicit Euler integration from `ic` up to `t_end`.
///
/// `dt` must satisfy `0 < dt <= 1/d` so that no entry turns negative (a
/// state loses at most `d` units of rate). The step count is
/// `round(t_end / dt)`; snapshot times are rounded to the nearest step and
/// time 0 is always recorded.
pub fn integrate(
    net: &BooleanNetwork,
    ic: &InitialCondition,
    t_end: f64,
    dt: f64,
    snapshot_times: &[f64],
) -> Result<Trajectory> {
    integrate_with(net, ic, t_end, dt, snapshot_times, &SolverConfig::default())
}

pub fn integrate_with(
    net: &BooleanNetwork,
    ic: &InitialCondition,
    t_end: f64,
    dt: f64,
    snapshot_times: &[f64],
    config: &SolverConfig,
) -> Result<Trajectory> {
    check_cap(net, config.cap)?;
    let p0 = ic.to_state_vector(net.len())?;
    integrate_from(net, p0, t_end, dt, snapshot_times, config)
}

/// Like [`integrate_with`] but starting from an arbitrary distribution.
pub fn integrate_from(
    net: &BooleanNetwork,
    p0: StateVector,
    t_end: f64,
    dt: f64,
    snapshot_times: &[f64],
    config: &SolverConfig,
) -> Result<Trajectory> {
    check_cap(net, config.cap)?;
    let d = net.len();
    let max_dt = 1.0 / d as f64;
    if !(dt > 0.0 && dt <= max_dt * (1.0 + 1e-12)) {
        return Err(Error::InvalidTimeStep { dt, max: max_dt });
    }
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(Error::InvalidTime(format!("end time {t_end}")));
    }
    if p0.d != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: p0.d,
        });
    }
    if let Some(t) = snapshot_times
        .iter()
        .find(|&&t| !(t.is_finite() && (0.0..=t_end * (1.0 + 1e-12)).contains(&t)))
    {
        return Err(Error::InvalidTime(format!(
            "snapshot time {t} outside [0, {t_end}]"
        )));
    }
    let n_steps = (t_end / dt).round() as u64;
    let mut marks: Vec<u64> = snapshot_times
        .iter()
        .map(|t| ((t / dt).round() as u64).min(n_steps))
        .chain(std::iter::once(0))
        .collect();
    marks.sort_unstable();
    marks.dedup();

    let mut p = p0;
    let mut dp = StateVector {
        d,
        p: vec![0.0; p.p.len()],
    };
    let mut times = Vec::with_capacity(marks.len());
    let mut snapshots = Vec::with_capacity(marks.len());
    let mut next = marks.iter().peekable();
    for step in 0..=n_steps {
        if next.peek() == Some(&&step) {
            next.next();
            times.push(step as f64 * dt);
            snapshots.push(p.clone());
            if next.peek().is_none() {
                break;
            }
        }
        if step == n_steps {
            break;
        }
        rhs_into(net, &p, &mut dp, config)?;
        for (v, dv) in p.p.iter_mut().zip(&dp.p) {
            *v += dt * dv;
        }
    }
    Ok(Trajectory { times, snapshots })
}

/// Max-norm difference at `t_end` between step sizes `dt` and `dt/2`.
/// For a first-order method this estimates the error of the `dt/2` run.
pub fn richardson_check(
    net: &BooleanNetwork,
    ic: &InitialCondition,
    t_end: f64,
    dt: f64,
    config: &SolverConfig,
) -> Result<f64> {
    let coarse = integrate_with(net, ic, t_end, dt, &[t_end], config)?;
    let fine = integrate_with(net, ic, t_end, dt / 2.0, &[t_end], config)?;
    let (_, a) = coarse.last().expect("snapshot");
    let (_, b) = fine.last().expect("snapshot");
    Ok(a.max_abs_diff(b))
}

/// `<x_i> = sum_x x_i P(x)` for every species.
pub fn first_moments(p: &StateVector) -> Vec<f64> {
    let mut moments = vec![0.0; p.d];
    for (x, &v) in p.p.iter().enumerate() {
        for (i, m) in moments.iter_mut().enumerate() {
            if (x >> i) & 1 == 1 {
                *m += v;
            }
        }
    }
    moments
}

/// CSV with a `t` column followed by one column per species.
pub fn write_moments_csv<W: Write>(mut w: W, names: &[String], traj: &Trajectory) -> Result<()> {
    write!(w, "t")?;
    for name in names {
        write!(w, ",{name}")?;
    }
    writeln!(w)?;
    for (t, snap) in traj.times.iter().zip(&traj.snapshots) {
        write!(w, "{t}")?;
        for m in first_moments(snap) {
            write!(w, ",{m}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::tests::example;

    fn toggle() -> BooleanNetwork {
        BooleanNetwork::parse("A, !A").unwrap()
    }

    #[test]
    fn rule_application() {
        let net = example();
        assert_eq!(apply_rule(&net, 0, State(0)), State(0b00001));
        assert_eq!(apply_rule(&net, 0, State(0b00011)), State(0b00010));
        // B_2 = x2 at x2 = 1: fixed point.
        assert_eq!(apply_rule(&net, 2, State(0b00100)), State(0b00100));
    }

    #[test]
    fn toggle_derivative() {
        let dp = rhs(&toggle(), &StateVector::new(1, vec![1.0, 0.0]).unwrap()).unwrap();
        assert_eq!(dp.as_slice(), [-1.0, 1.0]);
    }

    #[test]
    fn derivative_sums_to_zero() {
        let net = example();
        let p = StateVector::new(5, (0..32).map(|k| (k * k % 7) as f64 / 90.0).collect()).unwrap();
        let dp = rhs(&net, &p).unwrap();
        assert!(dp.mass().abs() < 1e-15);
    }

    #[test]
    fn stationary_toy_network() {
        // A copies B, B toggles. Balance at 00 gives p00 = p01 + p10, and
        // complement symmetry gives p00 = p11, so p00 = 1/3.
        let net = BooleanNetwork::parse("A, B\nB, !B").unwrap();
        let traj = integrate(&net, &InitialCondition::uniform(), 60.0, 0.01, &[60.0]).unwrap();
        let (_, p) = traj.last().unwrap();
        let dp = rhs(&net, p).unwrap();
        assert!(dp.as_slice().iter().all(|v| v.abs() < 1e-12));
        assert!((p.as_slice()[0] - 1.0 / 3.0).abs() < 1e-9);
        assert!((p.as_slice()[1] - 1.0 / 6.0).abs() < 1e-9);
    }

    #[test]
    fn zero_end_time_returns_initial_condition() {
        let net = example();
        let ic = InitialCondition::uniform().clamp(1, true);
        let traj = integrate(&net, &ic, 0.0, 0.01, &[0.0]).unwrap();
        assert_eq!(traj.times, [0.0]);
        assert_eq!(traj.snapshots[0], ic.to_state_vector(5).unwrap());
    }

    #[test]
    fn toggle_relaxes_to_half() {
        let net = toggle();
        let ic = InitialCondition::uniform().clamp(0, false);
        let traj = integrate(&net, &ic, 10.0, 0.01, &[10.0]).unwrap();
        let (t, p) = traj.last().unwrap();
        assert!((t - 10.0).abs() < 1e-12);
        // Exact Euler recursion: p0 - 1/2 = (1 - 2 dt)^n / 2.
        let expected = 0.5 + 0.5 * (1.0f64 - 0.02).powi(1000);
        assert!((p.as_slice()[0] - expected).abs() < 1e-14);
        assert!((p.as_slice()[0] - 0.5).abs() < 1e-4);
    }

    #[test]
    fn example_moments_at_ten() {
        let net = example();
        let traj = integrate(&net, &InitialCondition::uniform(), 10.0, 0.01, &[10.0]).unwrap();
        let (_, p) = traj.last().unwrap();
        assert!((p.mass() - 1.0).abs() < 1e-12);
        let expected = [0.25011981, 0.74998921, 0.5, 0.25001079, 0.37501647];
        for (m, e) in first_moments(p).iter().zip(expected) {
            assert!((m - e).abs() < 1e-7, "{m} vs {e}");
        }
    }

    #[test]
    fn time_step_bound() {
        let net = example();
        let ic = InitialCondition::uniform();
        assert!(matches!(
            integrate(&net, &ic, 1.0, 0.25, &[]),
            Err(Error::InvalidTimeStep { .. })
        ));
        assert!(integrate(&net, &ic, 1.0, 0.2, &[]).is_ok());
        assert!(integrate(&net, &ic, 1.0, 0.0, &[]).is_err());
        assert!(integrate(&net, &ic, 1.0, 0.1, &[2.0]).is_err());
    }

    #[test]
    fn capacity_cap() {
        let net = example();
        let config = SolverConfig {
            cap: 4,
            exec: Exec::Sequential,
        };
        assert!(matches!(
            integrate_with(&net, &InitialCondition::uniform(), 1.0, 0.1, &[], &config),
            Err(Error::CapacityExceeded { d: 5, cap: 4 })
        ));
    }

    #[test]
    fn initial_condition_parsing() {
        let net = example();
        let ic = InitialCondition::parse(&net, "S1=1, S3=0").unwrap();
        let p = ic.to_state_vector(5).unwrap();
        assert!((p.mass() - 1.0).abs() < 1e-15);
        let m = first_moments(&p);
        assert_eq!(m, [0.5, 1.0, 0.5, 0.0, 0.5]);
        assert!(InitialCondition::parse(&net, "Q=1").is_err());
        assert!(InitialCondition::parse(&net, "S1=2").is_err());
        assert_eq!(
            InitialCondition::parse(&net, "uniform").unwrap(),
            InitialCondition::uniform()
        );
    }

    #[test]
    fn moments() {
        assert_eq!(first_moments(&StateVector::uniform(3)), [0.5; 3]);
        assert_eq!(first_moments(&StateVector::delta(3, State(0b111))), [1.0; 3]);
        assert_eq!(
            first_moments(&StateVector::new(1, vec![0.5, 0.5]).unwrap()),
            [0.5]
        );
    }

    #[test]
    fn binary_round_trip() {
        let net = example();
        let traj = integrate(
            &net,
            &InitialCondition::uniform(),
            1.0,
            0.1,
            &uniform_snapshot_times(1.0, 3),
        )
        .unwrap();
        assert_eq!(traj.times.len(), 3);
        let mut buf = Vec::new();
        traj.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..5], b"BMEQ1");
        assert_eq!(u32::from_le_bytes(buf[5..9].try_into().unwrap()), 5);
        assert_eq!(buf.len(), 5 + 8 + 3 * 8 + 3 * 32 * 8);
        assert_eq!(Trajectory::read_from(&buf[..]).unwrap(), traj);
        assert!(Trajectory::read_from(&buf[..40]).is_err());
        assert!(Trajectory::read_from(&b"NOPE1aaaaaaaa"[..]).is_err());
    }

    #[test]
    fn moments_csv_layout() {
        let net = toggle();
        let traj = integrate(&net, &InitialCondition::uniform(), 0.0, 0.5, &[]).unwrap();
        let mut buf = Vec::new();
        write_moments_csv(&mut buf, net.names(), &traj).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,A\n0,0.5\n");
    }

    #[test]
    fn richardson_estimate_shrinks() {
        let net = example();
        let ic = InitialCondition::uniform();
        let config = SolverConfig::default();
        let e1 = richardson_check(&net, &ic, 2.0, 0.1, &config).unwrap();
        let e2 = richardson_check(&net, &ic, 2.0, 0.05, &config).unwrap();
        assert!(e2 < e1 * 0.6, "{e1} {e2}");
    }
}
