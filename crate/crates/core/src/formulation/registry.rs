//! Typed handles over contiguous column blocks.

use fleetplan_engine::{ColId, Program};
use serde::{Deserialize, Serialize};

/// Row-major block of columns with a fixed shape.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub name: String,
    pub start: usize,
    pub shape: Vec<usize>,
}

impl Block {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn at(&self, idx: &[usize]) -> ColId {
        debug_assert_eq!(idx.len(), self.shape.len(), "{}", self.name);
        let mut flat = 0;
        for (i, (&k, &n)) in idx.iter().zip(&self.shape).enumerate() {
            debug_assert!(k < n, "{}: index {k} out of {n} on axis {i}", self.name);
            flat = flat * n + k;
        }
        self.start + flat
    }

    pub fn contains(&self, col: ColId) -> bool {
        col >= self.start && col < self.start + self.len()
    }

    /// Inverse of [`Block::at`].
    pub fn index_of(&self, col: ColId) -> Vec<usize> {
        let mut flat = col - self.start;
        let mut idx = vec![0; self.shape.len()];
        for (slot, &n) in idx.iter_mut().zip(&self.shape).rev() {
            *slot = flat % n;
            flat /= n;
        }
        idx
    }

    pub fn cols(&self) -> std::ops::Range<ColId> {
        self.start..self.start + self.len()
    }

    pub fn values<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        &x[self.cols()]
    }
}

/// Declares a block whose columns all share the same bounds pattern built
/// by `bounds(idx) -> (lower, upper, integer)`.
pub(crate) fn declare(
    program: &mut Program,
    name: &str,
    shape: &[usize],
    mut bounds: impl FnMut(&[usize]) -> (f64, f64, bool),
) -> Block {
    let block = Block {
        name: name.to_owned(),
        start: program.num_columns(),
        shape: shape.to_vec(),
    };
    let mut idx = vec![0usize; shape.len()];
    for _ in 0..block.len() {
        let (lo, hi, int) = bounds(&idx);
        program.add_column(lo, hi, int, 0.0);
        for axis in (0..shape.len()).rev() {
            idx[axis] += 1;
            if idx[axis] < shape[axis] {
                break;
            }
            idx[axis] = 0;
        }
    }
    block
}

/// Every decision variable of a built model, grouped by symbol.
///
/// For the head of each field: `n` EV slot, `k` EV model, `s` station slot,
/// `b` bus, `c` station model, `r` ride, `t` period, `l` line (bus `l + 1`),
/// `L` allowed station location (see `cs_locations`). The state axis has
/// `cs_slots + 1` entries; the last one is "in use".
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VariableRegistry {
    /// δ^EV[n,k]
    pub ev_invest: Option<Block>,
    /// δ^CS[s,b,c]
    pub cs_invest: Option<Block>,
    /// δ^use[n,r]
    pub ride_use: Option<Block>,
    /// δ^state[n,s,t]
    pub state: Option<Block>,
    /// p^EV[n,s,t] (kW, charging positive)
    pub p_ev: Option<Block>,
    /// Discharge part max(0, −p^EV)[n,s,t] (kW), only under the V2G cap.
    pub discharge: Option<Block>,
    /// s^EV[n,t] (kWh)
    pub soc: Option<Block>,
    /// p^CS[s,L,t] (kW)
    pub p_cs: Option<Block>,
    /// Bus of each allowed station location.
    pub cs_locations: Vec<usize>,
    /// e^away[n,r] (kWh)
    pub e_away: Option<Block>,
    /// p^PV[P,t] (kW) over `pv_buses`.
    pub p_pv: Option<Block>,
    pub pv_buses: Vec<usize>,
    /// i^sup[t], e^sup[t] (kW)
    pub i_sup: Option<Block>,
    pub e_sup: Option<Block>,
    /// Net slack exchange i^sup − e^sup (kW) and its reactive part (kvar).
    pub p_slack: Option<Block>,
    pub q_slack: Option<Block>,
    /// p^inj[b,t] (kW), q^inj[b,t] (kvar)
    pub p_inj: Option<Block>,
    pub q_inj: Option<Block>,
    /// p^line[l,t], q^line[l,t], i^sqr[l,t] (p.u.)
    pub p_line: Option<Block>,
    pub q_line: Option<Block>,
    pub i_sqr: Option<Block>,
    /// v^sqr[b,t] (p.u.²)
    pub v_sqr: Option<Block>,
    /// peak^imp[b] (kW)
    pub peak_bus: Option<Block>,
    /// peak^coll (kW), a one-element block.
    pub peak_coll: Option<Block>,
}

impl VariableRegistry {
    pub fn blocks(&self) -> impl Iterator<Item = &Block> {
        [
            &self.ev_invest,
            &self.cs_invest,
            &self.ride_use,
            &self.state,
            &self.p_ev,
            &self.discharge,
            &self.soc,
            &self.p_cs,
            &self.e_away,
            &self.p_pv,
            &self.i_sup,
            &self.e_sup,
            &self.p_slack,
            &self.q_slack,
            &self.p_inj,
            &self.q_inj,
            &self.p_line,
            &self.q_line,
            &self.i_sqr,
            &self.v_sqr,
            &self.peak_bus,
            &self.peak_coll,
        ]
        .into_iter()
        .flatten()
    }

    /// `symbol[i,j,...]` for a column, for dumps and diagnostics.
    pub fn describe(&self, col: ColId) -> String {
        self.blocks()
            .find(|b| b.contains(col))
            .map(|b| {
                let idx: Vec<String> = b.index_of(col).iter().map(|i| i.to_string()).collect();
                format!("{}[{}]", b.name, idx.join(","))
            })
            .unwrap_or_else(|| format!("x{col}"))
    }

    pub fn num_columns(&self) -> usize {
        self.blocks().map(Block::len).sum()
    }

    pub fn ev(&self) -> &Block {
        self.ev_invest.as_ref().expect("model has provider variables")
    }

    pub fn location_index(&self, bus: usize) -> Option<usize> {
        self.cs_locations.iter().position(|&b| b == bus)
    }

    pub fn pv_index(&self, bus: usize) -> Option<usize> {
        self.pv_buses.iter().position(|&b| b == bus)
    }
}
