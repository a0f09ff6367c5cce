//! Dormand–Prince 5(4) embedded Runge–Kutta integrator for small fixed-size systems.
//!
//! Integration runs in either direction of `t`. [`Dopri5::integrate`] reports every
//! accepted step to a callback that may stop the run; [`Dopri5::sample`] clips steps so
//! that a prescribed list of output nodes is hit exactly, which keeps the sampled values
//! independent of the adaptive step history.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// Difference between the 5th and embedded 4th order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Order of the propagated solution.
pub const ORDER: u32 = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Clone, Debug)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Self { rtol: 1e-12, atol: 1e-300, h_max: 0.5, max_steps: 2_000_000 }
    }
}

pub struct Outcome<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
    pub steps: usize,
    pub stopped: bool,
}

impl Dopri5 {
    pub fn with_tolerance(rtol: f64) -> Self {
        Self { rtol, ..Self::default() }
    }

    /// Integrates from `t0` to `t1`; `on_step` sees every accepted `(t, y)`.
    pub fn integrate<const N: usize, F, C>(
        &self,
        f: F,
        t0: f64,
        y0: [f64; N],
        t1: f64,
        on_step: C,
    ) -> Result<Outcome<N>>
    where
        F: Fn(f64, &[f64; N]) -> [f64; N],
        C: FnMut(f64, &[f64; N]) -> Control,
    {
        self.drive(&f, t0, y0, &[t1], on_step)
    }

    /// Integrates through `nodes` (monotone in the direction of travel, away from `t0`)
    /// and returns the state at every node. Steps are clipped to land on each node.
    pub fn sample<const N: usize, F>(
        &self,
        f: F,
        t0: f64,
        y0: [f64; N],
        nodes: &[f64],
    ) -> Result<Vec<[f64; N]>>
    where
        F: Fn(f64, &[f64; N]) -> [f64; N],
    {
        let mut out = Vec::with_capacity(nodes.len());
        let mut next = 0usize;
        while next < nodes.len() && nodes[next] == t0 {
            out.push(y0);
            next += 1;
        }
        if next == nodes.len() {
            return Ok(out);
        }
        self.drive(&f, t0, y0, &nodes[next..], |t, y| {
            if next < nodes.len() && t == nodes[next] {
                out.push(*y);
                next += 1;
            }
            Control::Continue
        })?;
        Ok(out)
    }

    fn drive<const N: usize, F, C>(
        &self,
        f: &F,
        t0: f64,
        y0: [f64; N],
        stops: &[f64],
        mut on_step: C,
    ) -> Result<Outcome<N>>
    where
        F: Fn(f64, &[f64; N]) -> [f64; N],
        C: FnMut(f64, &[f64; N]) -> Control,
    {
        let t1 = *stops.last().expect("at least one stop");
        let dir = if t1 >= t0 { 1.0 } else { -1.0 };
        let mut t = t0;
        let mut y = y0;
        let mut k1 = f(t, &y);
        let mut h = self.initial_step(&y, &k1, (t1 - t0).abs());
        let mut steps = 0usize;
        let mut last_err = 1e-4_f64;
        let mut stop_idx = 0usize;

        while (t1 - t) * dir > 0.0 {
            if steps >= self.max_steps {
                return Err(Error::NonConvergence { what: "ODE integration", iterations: steps });
            }
            while (stops[stop_idx] - t) * dir <= 0.0 {
                stop_idx += 1;
            }
            let target = stops[stop_idx];
            let remaining = (target - t).abs();
            let clipped = h >= remaining;
            let hs = if clipped { remaining } else { h };
            let (y_new, k7, err) = self.step(f, t, &y, &k1, hs * dir);
            if err <= 1.0 || hs < 1e-14 * t.abs().max(1.0) {
                steps += 1;
                t = if clipped { target } else { t + hs * dir };
                y = y_new;
                k1 = k7;
                if on_step(t, &y) == Control::Stop {
                    return Ok(Outcome { t, y, steps, stopped: true });
                }
                // PI step-size control; a clipped step does not shrink the proposal.
                let err = err.max(1e-10);
                let fac = 0.9 * err.powf(-0.7 / 5.0) * last_err.powf(0.4 / 5.0);
                let proposal = (hs * fac.clamp(0.2, 5.0)).min(self.h_max);
                h = if clipped { proposal.max(h) } else { proposal };
                last_err = err;
            } else {
                let fac = (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
                h = hs * fac;
            }
        }
        Ok(Outcome { t, y, steps, stopped: false })
    }

    fn initial_step<const N: usize>(&self, y: &[f64; N], dy: &[f64; N], span: f64) -> f64 {
        let mut d0 = 0.0_f64;
        let mut d1 = 0.0_f64;
        for i in 0..N {
            let sc = self.atol + self.rtol * y[i].abs();
            d0 = d0.max(y[i].abs() / sc);
            d1 = d1.max(dy[i].abs() / sc);
        }
        let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h.min(self.h_max).min(span.max(1e-12))
    }

    #[allow(clippy::type_complexity)]
    fn step<const N: usize, F>(
        &self,
        f: &F,
        t: f64,
        y: &[f64; N],
        k1: &[f64; N],
        h: f64,
    ) -> ([f64; N], [f64; N], f64)
    where
        F: Fn(f64, &[f64; N]) -> [f64; N],
    {
        let comb = |coef: &[(f64, &[f64; N])]| {
            let mut out = *y;
            for (c, k) in coef {
                for i in 0..N {
                    out[i] += h * c * k[i];
                }
            }
            out
        };
        let k2 = f(t + C2 * h, &comb(&[(A21, k1)]));
        let k3 = f(t + C3 * h, &comb(&[(A31, k1), (A32, &k2)]));
        let k4 = f(t + C4 * h, &comb(&[(A41, k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(t + C5 * h, &comb(&[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
        let k6 = f(t + h, &comb(&[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
        let y_new = comb(&[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let k7 = f(t + h, &y_new);
        let mut err = 0.0_f64;
        for i in 0..N {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = self.atol + self.rtol * y[i].abs().max(y_new[i].abs());
            err = err.max((e / sc).abs());
        }
        (y_new, k7, err)
    }
}
