//! Backward/forward sweep on a radial feeder with constant-power injections.

use num_complex::Complex64;
use serde::Serialize;

use crate::domain::RadialNetwork;
use crate::error::{CoreError, Result};

pub const SWEEP_TOL_PU: f64 = 1e-10;
pub const MAX_SWEEPS: usize = 100;

/// Exact AC state. Index `b` of `line_current_pu` is the line feeding bus
/// `b` (zero at the slack).
#[derive(Clone, Debug, Serialize)]
pub struct AcState {
    #[serde(skip)]
    pub voltage_pu: Vec<Complex64>,
    #[serde(skip)]
    pub line_current_pu: Vec<Complex64>,
    pub losses_kw: f64,
    pub sweeps: usize,
}

impl AcState {
    pub fn v_mag(&self, bus: usize) -> f64 {
        self.voltage_pu[bus].norm()
    }

    pub fn v_sqr(&self, bus: usize) -> f64 {
        self.voltage_pu[bus].norm_sqr()
    }

    pub fn i_sqr(&self, bus: usize) -> f64 {
        self.line_current_pu[bus].norm_sqr()
    }

    /// Active power entering the line feeding `bus` at its parent end (p.u.).
    pub fn sending_power_pu(&self, net: &RadialNetwork, bus: usize) -> Complex64 {
        let a = net.parent(bus).expect("line bus");
        self.voltage_pu[a] * self.line_current_pu[bus].conj()
    }
}

/// Solves the feeder for per-bus net injections (kW, kvar; generation
/// positive). The slack is held at 1∠0 p.u. and its own injection ignored.
pub fn ac_power_flow(net: &RadialNetwork, p_kw: &[f64], q_kvar: &[f64]) -> Result<AcState> {
    let n = net.bus_count();
    if p_kw.len() != n || q_kvar.len() != n {
        return Err(CoreError::Oracle(format!(
            "injections for {} / {} buses, network has {n}",
            p_kw.len(),
            q_kvar.len()
        )));
    }
    let base = net.base_power_kva;
    let s_inj: Vec<Complex64> = (0..n).map(|b| Complex64::new(p_kw[b] / base, q_kvar[b] / base)).collect();
    let z: Vec<Complex64> = (0..n)
        .map(|b| if b == RadialNetwork::SLACK { Complex64::new(0.0, 0.0) } else { Complex64::new(net.r_pu(b), net.x_pu(b)) })
        .collect();
    let order = net.topological_order();
    let children = net.children_lists();
    let mut v = vec![Complex64::new(1.0, 0.0); n];
    let mut j = vec![Complex64::new(0.0, 0.0); n];

    for sweep in 1..=MAX_SWEEPS {
        for &b in order.iter().rev() {
            if b == RadialNetwork::SLACK {
                continue;
            }
            let drawn = -(s_inj[b] / v[b]).conj();
            j[b] = drawn + children[b].iter().map(|&c| j[c]).sum::<Complex64>();
        }
        let mut delta: f64 = 0.0;
        for &b in &order {
            if let Some(a) = net.parent(b) {
                let next = v[a] - z[b] * j[b];
                delta = delta.max((next - v[b]).norm());
                v[b] = next;
            }
        }
        if !v.iter().all(|x| x.re.is_finite() && x.im.is_finite()) {
            break;
        }
        if delta < SWEEP_TOL_PU {
            let losses_kw = net.line_buses().map(|b| net.r_pu(b) * j[b].norm_sqr()).sum::<f64>() * base;
            return Ok(AcState { voltage_pu: v, line_current_pu: j, losses_kw, sweeps: sweep });
        }
    }
    Err(CoreError::Oracle(format!(
        "backward/forward sweep did not converge in {MAX_SWEEPS} sweeps (voltage collapse?)"
    )))
}
