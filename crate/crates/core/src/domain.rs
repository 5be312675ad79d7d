//! Domain types and pure index/set computations.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::CoreError;

pub const HOURS_PER_YEAR: f64 = 8760.0;

/// Uniform time grid made of one or more representative blocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub step_hours: f64,
    pub periods: usize,
    /// First period of every representative block, ascending, starting at 0.
    pub block_starts: Vec<usize>,
}

impl TimeGrid {
    pub fn new(step_hours: f64, periods: usize, block_starts: Vec<usize>) -> Self {
        Self {
            step_hours,
            periods,
            block_starts,
        }
    }

    /// Equal blocks of `block_len` periods.
    pub fn uniform(step_hours: f64, blocks: usize, block_len: usize) -> Self {
        Self::new(
            step_hours,
            blocks * block_len,
            (0..blocks).map(|b| b * block_len).collect(),
        )
    }

    /// Scale from the represented horizon to one year.
    pub fn annualization_factor(&self) -> f64 {
        HOURS_PER_YEAR / (self.periods as f64 * self.step_hours)
    }

    pub fn is_block_start(&self, t: usize) -> bool {
        self.block_starts.binary_search(&t).is_ok()
    }

    pub fn block_of(&self, t: usize) -> usize {
        match self.block_starts.binary_search(&t) {
            Ok(b) => b,
            Err(b) => b.saturating_sub(1),
        }
    }

    pub fn hours_represented(&self) -> f64 {
        self.periods as f64 * self.step_hours
    }
}

/// A bus and, for non-slack buses, the line feeding it from its parent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: usize,
    pub parent: Option<usize>,
    pub r_ohm: f64,
    pub x_ohm: f64,
    pub amp_limit_a: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialNetwork {
    /// Indexed by bus id; bus 0 is the slack (transformer) bus.
    pub buses: Vec<Bus>,
    pub v_min_sqr: f64,
    pub v_max_sqr: f64,
    pub transformer_kw: f64,
    pub base_voltage_v: f64,
    pub base_power_kva: f64,
}

impl RadialNetwork {
    pub const SLACK: usize = 0;

    pub fn bus_count(&self) -> usize {
        self.buses.len()
    }

    /// Non-slack buses, i.e. the ends of the lines.
    pub fn line_buses(&self) -> impl Iterator<Item = usize> + '_ {
        self.buses.iter().filter(|b| b.parent.is_some()).map(|b| b.id)
    }

    pub fn parent(&self, bus: usize) -> Option<usize> {
        self.buses[bus].parent
    }

    pub fn children(&self, bus: usize) -> Vec<usize> {
        self.buses
            .iter()
            .filter(|b| b.parent == Some(bus))
            .map(|b| b.id)
            .collect()
    }

    pub fn children_lists(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.buses.len()];
        for b in &self.buses {
            if let Some(a) = b.parent {
                if a < out.len() {
                    out[a].push(b.id);
                }
            }
        }
        out
    }

    pub fn impedance_base_ohm(&self) -> f64 {
        self.base_voltage_v * self.base_voltage_v / (self.base_power_kva * 1e3)
    }

    pub fn current_base_a(&self) -> f64 {
        self.base_power_kva * 1e3 / (3f64.sqrt() * self.base_voltage_v)
    }

    pub fn r_pu(&self, bus: usize) -> f64 {
        self.buses[bus].r_ohm / self.impedance_base_ohm()
    }

    pub fn x_pu(&self, bus: usize) -> f64 {
        self.buses[bus].x_ohm / self.impedance_base_ohm()
    }

    /// Squared ampacity of the line feeding `bus`, in p.u.².
    pub fn amp_limit_sqr_pu(&self, bus: usize) -> f64 {
        let i = self.buses[bus].amp_limit_a / self.current_base_a();
        i * i
    }

    /// Buses ordered root first, every parent before its children.
    pub fn topological_order(&self) -> Vec<usize> {
        let children = self.children_lists();
        let mut order = vec![Self::SLACK];
        let mut head = 0;
        while head < order.len() {
            let b = order[head];
            head += 1;
            order.extend(children[b].iter().copied());
        }
        order
    }

    /// Number of lines between `bus` and the slack.
    pub fn depth(&self, bus: usize) -> usize {
        let mut d = 0;
        let mut b = bus;
        while let Some(a) = self.buses[b].parent {
            b = a;
            d += 1;
            if d > self.buses.len() {
                break;
            }
        }
        d
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvCandidate {
    pub name: String,
    pub capacity_kwh: f64,
    pub power_kw: f64,
    pub price_eur: f64,
    pub annual_fixed_eur: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsCandidate {
    pub name: String,
    pub power_kw: f64,
    pub price_eur: f64,
}

/// Booked ride; the window `[departure, ret]` is closed on both ends.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RideRequest {
    pub id: usize,
    pub departure: usize,
    pub ret: usize,
    pub energy_kwh: f64,
}

impl RideRequest {
    pub fn covers(&self, t: usize) -> bool {
        self.departure <= t && t <= self.ret
    }

    pub fn overlaps(&self, other: &RideRequest) -> bool {
        self.departure <= other.ret && other.departure <= self.ret
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridFeeMode {
    VolumetricFlat,
    CapacityBased,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TariffSchedule {
    /// Energy component of the retail import price, grid fee excluded (€/kWh).
    pub import_price: Vec<f64>,
    pub export_price: Vec<f64>,
    pub away_price: f64,
    pub unserved_price: f64,
    /// Grid-usage fee under the flat volumetric tariff (€/kWh).
    pub volumetric_fee: f64,
    /// Reduced volumetric fee that comes with the capacity tariff (€/kWh).
    pub capacity_volumetric_fee: f64,
    /// Capacity tariff on the yearly peak import (€/kW/year).
    pub peak_fee: f64,
    /// Yearly charge that the flat tariff adds on top (€/year).
    pub fixed_peak_charge: f64,
}

impl TariffSchedule {
    pub fn grid_fee(&self, mode: GridFeeMode) -> f64 {
        match mode {
            GridFeeMode::VolumetricFlat => self.volumetric_fee,
            GridFeeMode::CapacityBased => self.capacity_volumetric_fee,
        }
    }

    pub fn effective_import_price(&self, t: usize, mode: GridFeeMode) -> f64 {
        self.import_price[t] + self.grid_fee(mode)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemberProfile {
    pub bus: usize,
    pub load_kw: Vec<f64>,
    pub pv_potential_kw: Vec<f64>,
    pub power_factor: f64,
}

impl MemberProfile {
    pub fn is_prosumer(&self) -> bool {
        self.pv_potential_kw.iter().any(|&p| p > 0.0)
    }

    /// `tan(acos(pf))`: reactive demand per unit of active load.
    pub fn reactive_ratio(&self) -> f64 {
        let pf = self.power_factor.clamp(1e-9, 1.0);
        (1.0 - pf * pf).sqrt() / pf
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinanceParams {
    pub discount_rate: f64,
    pub horizon_years: u32,
    pub soc_floor: f64,
    pub soc_departure: f64,
}

impl Default for FinanceParams {
    fn default() -> Self {
        Self {
            discount_rate: 0.02,
            horizon_years: 7,
            soc_floor: 0.2,
            soc_departure: 0.6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseBundle {
    pub network: RadialNetwork,
    pub grid: TimeGrid,
    pub members: Vec<MemberProfile>,
    pub tariffs: TariffSchedule,
    pub rides: Vec<RideRequest>,
    pub ev_catalog: Vec<EvCandidate>,
    pub cs_catalog: Vec<CsCandidate>,
    pub fleet_slots: usize,
    pub cs_slots: usize,
    pub finance: FinanceParams,
    /// Rating of public chargers used during rides (kW).
    pub away_power_kw: f64,
}

impl CaseBundle {
    pub fn periods(&self) -> usize {
        self.grid.periods
    }

    /// Household load per bus and period (kW), members on a bus summed.
    pub fn bus_load(&self) -> Vec<Vec<f64>> {
        self.sum_by_bus(|m| &m.load_kw)
    }

    /// PV potential per bus and period (kW).
    pub fn bus_pv_potential(&self) -> Vec<Vec<f64>> {
        self.sum_by_bus(|m| &m.pv_potential_kw)
    }

    /// Reactive household demand per bus and period (kvar).
    pub fn bus_reactive_load(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.periods()]; self.network.bus_count()];
        for m in &self.members {
            let k = m.reactive_ratio();
            for (o, l) in out[m.bus].iter_mut().zip(&m.load_kw) {
                *o += k * l;
            }
        }
        out
    }

    /// Aggregate household load per period (kW).
    pub fn total_load(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.periods()];
        for m in &self.members {
            for (o, l) in out.iter_mut().zip(&m.load_kw) {
                *o += l;
            }
        }
        out
    }

    fn sum_by_bus(&self, series: impl Fn(&MemberProfile) -> &Vec<f64>) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.periods()]; self.network.bus_count()];
        for m in &self.members {
            for (o, v) in out[m.bus].iter_mut().zip(series(m)) {
                *o += v;
            }
        }
        out
    }

    pub fn max_ev_capacity(&self) -> f64 {
        self.ev_catalog
            .iter()
            .map(|e| e.capacity_kwh)
            .fold(0.0, f64::max)
    }

    pub fn max_ev_power(&self) -> f64 {
        self.ev_catalog.iter().map(|e| e.power_kw).fold(0.0, f64::max)
    }

    pub fn max_cs_power(&self) -> f64 {
        self.cs_catalog.iter().map(|c| c.power_kw).fold(0.0, f64::max)
    }

    pub fn total_ride_demand(&self) -> f64 {
        self.rides.iter().map(|r| r.energy_kwh).sum()
    }
}

/// Index pairs `(i, j)`, `i < j`, of rides whose closed windows intersect.
pub fn overlapping_pairs(rides: &[RideRequest]) -> BTreeSet<(usize, usize)> {
    let mut order: Vec<usize> = (0..rides.len()).collect();
    order.sort_by_key(|&i| (rides[i].departure, i));
    let mut pairs = BTreeSet::new();
    for (pos, &i) in order.iter().enumerate() {
        for &j in &order[pos + 1..] {
            if rides[j].departure > rides[i].ret {
                break;
            }
            pairs.insert((i.min(j), i.max(j)));
        }
    }
    pairs
}

/// Indices of rides whose window contains `t`.
pub fn rides_active_at(rides: &[RideRequest], t: usize) -> Vec<usize> {
    rides
        .iter()
        .enumerate()
        .filter(|(_, r)| r.covers(t))
        .map(|(i, _)| i)
        .collect()
}

/// Indices of rides returning at `t`.
pub fn rides_returning_at(rides: &[RideRequest], t: usize) -> Vec<usize> {
    rides
        .iter()
        .enumerate()
        .filter(|(_, r)| r.ret == t)
        .map(|(i, _)| i)
        .collect()
}

/// Per-period active and returning ride lists, built in one pass.
#[derive(Clone, Debug, PartialEq)]
pub struct RideCalendar {
    pub active: Vec<Vec<usize>>,
    pub returning: Vec<Vec<usize>>,
}

impl RideCalendar {
    pub fn new(rides: &[RideRequest], periods: usize) -> Self {
        let mut active = vec![Vec::new(); periods];
        let mut returning = vec![Vec::new(); periods];
        for (i, r) in rides.iter().enumerate() {
            for slot in active.iter_mut().take(r.ret.min(periods.saturating_sub(1)) + 1).skip(r.departure) {
                slot.push(i);
            }
            if r.ret < periods {
                returning[r.ret].push(i);
            }
        }
        Self { active, returning }
    }
}

/// Uniform capital recovery factor.
pub fn capital_recovery_factor(rate: f64, years: u32) -> Result<f64, CoreError> {
    if !(rate >= 0.0) || !rate.is_finite() {
        return Err(CoreError::InvalidParameter(format!(
            "discount rate must be finite and non-negative, got {rate}"
        )));
    }
    if years == 0 {
        return Err(CoreError::InvalidParameter(
            "capital recovery horizon must be at least one year".into(),
        ));
    }
    let n = years as f64;
    if rate == 0.0 {
        return Ok(1.0 / n);
    }
    let growth = (1.0 + rate).powf(n);
    Ok(rate * growth / (growth - 1.0))
}

/// Energy that can be bought on the road during a ride (kWh).
pub fn away_energy_cap(ride: &RideRequest, away_power_kw: f64, step_hours: f64) -> f64 {
    away_power_kw * ride.ret.saturating_sub(ride.departure) as f64 * step_hours
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn error(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            field: field.into(),
            message: message.into(),
        });
    }

    fn warn(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.warnings.push(Violation {
            field: field.into(),
            message: message.into(),
        });
    }

    pub fn mentions(&self, field_prefix: &str) -> bool {
        self.violations.iter().any(|v| v.field.starts_with(field_prefix))
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for v in &self.violations {
            writeln!(f, "error   {}: {}", v.field, v.message)?;
        }
        for v in &self.warnings {
            writeln!(f, "warning {}: {}", v.field, v.message)?;
        }
        Ok(())
    }
}

/// Checks every type invariant of a case; an empty violation list means valid.
pub fn validate_case(case: &CaseBundle) -> ValidationReport {
    let mut rep = ValidationReport::default();
    validate_grid(&case.grid, &mut rep);
    validate_network(&case.network, &mut rep);
    let periods = case.grid.periods;
    let buses = case.network.bus_count();

    for (m, member) in case.members.iter().enumerate() {
        let field = format!("members[{m}]");
        if member.bus >= buses {
            rep.error(&field, format!("bus {} not in network", member.bus));
        } else if member.bus == RadialNetwork::SLACK {
            rep.error(&field, "members cannot sit on the slack bus");
        }
        if member.load_kw.len() != periods || member.pv_potential_kw.len() != periods {
            rep.error(
                &field,
                format!(
                    "series length {}/{} differs from {periods} periods",
                    member.load_kw.len(),
                    member.pv_potential_kw.len()
                ),
            );
        }
        if let Some(t) = member.load_kw.iter().position(|v| !(*v >= 0.0)) {
            rep.error(&field, format!("negative load at period {t}"));
        }
        if let Some(t) = member.pv_potential_kw.iter().position(|v| !(*v >= 0.0)) {
            rep.error(&field, format!("negative pv potential at period {t}"));
        }
        if !(member.power_factor > 0.0 && member.power_factor <= 1.0) {
            rep.error(&field, "power factor must lie in (0, 1]");
        }
    }

    let tar = &case.tariffs;
    if tar.import_price.len() != periods || tar.export_price.len() != periods {
        rep.error("tariffs", "price series length differs from the time grid");
    }
    if tar.import_price.iter().chain(&tar.export_price).any(|p| !(*p >= 0.0)) {
        rep.error("tariffs", "prices must be non-negative");
    }
    for (name, v) in [
        ("away_price", tar.away_price),
        ("unserved_price", tar.unserved_price),
        ("volumetric_fee", tar.volumetric_fee),
        ("capacity_volumetric_fee", tar.capacity_volumetric_fee),
        ("peak_fee", tar.peak_fee),
        ("fixed_peak_charge", tar.fixed_peak_charge),
    ] {
        if !(v >= 0.0) {
            rep.error(format!("tariffs.{name}"), "must be non-negative");
        }
    }
    let inverted = tar
        .import_price
        .iter()
        .zip(&tar.export_price)
        .filter(|(i, e)| i < e)
        .count();
    if inverted > 0 {
        rep.warn(
            "tariffs",
            format!("{inverted} periods with export price above import price"),
        );
    }

    for (i, r) in case.rides.iter().enumerate() {
        let field = format!("rides[{i}]");
        if r.departure > r.ret {
            rep.error(&field, "departure after return");
        }
        if r.ret >= periods {
            rep.error(&field, format!("return period {} beyond horizon", r.ret));
        }
        if !(r.energy_kwh >= 0.0) {
            rep.error(&field, "negative energy demand");
        }
    }
    let mut ids: Vec<usize> = case.rides.iter().map(|r| r.id).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        rep.error("rides", "duplicate ride ids");
    }

    for (k, ev) in case.ev_catalog.iter().enumerate() {
        if ![ev.capacity_kwh, ev.power_kw, ev.price_eur, ev.annual_fixed_eur]
            .iter()
            .all(|v| *v > 0.0)
        {
            rep.error(format!("ev_catalog[{k}]"), "all properties must be positive");
        }
    }
    for (k, cs) in case.cs_catalog.iter().enumerate() {
        if !(cs.power_kw > 0.0 && cs.price_eur > 0.0) {
            rep.error(format!("cs_catalog[{k}]"), "all properties must be positive");
        }
    }
    if case.fleet_slots < 1 {
        rep.error("fleet_slots", "at least one EV slot required");
    }
    if case.cs_slots < 1 {
        rep.error("cs_slots", "at least one station slot required");
    }
    let fin = &case.finance;
    if !(0.0..1.0).contains(&fin.discount_rate) {
        rep.error("finance.discount_rate", "must lie in [0, 1)");
    }
    if fin.horizon_years < 1 {
        rep.error("finance.horizon_years", "must be at least 1");
    }
    if !(0.0 <= fin.soc_floor && fin.soc_floor <= fin.soc_departure && fin.soc_departure <= 1.0) {
        rep.error("finance.soc", "need 0 <= soc_floor <= soc_departure <= 1");
    }
    if !(case.away_power_kw >= 0.0) {
        rep.error("away_power_kw", "must be non-negative");
    }
    rep
}

fn validate_grid(grid: &TimeGrid, rep: &mut ValidationReport) {
    if !(grid.step_hours > 0.0) {
        rep.error("grid.step_hours", "must be positive");
    }
    if grid.periods == 0 {
        rep.error("grid.periods", "empty horizon");
    }
    if grid.block_starts.first() != Some(&0) {
        rep.error("grid.block_starts", "first block must start at period 0");
    }
    if grid.block_starts.windows(2).any(|w| w[0] >= w[1])
        || grid.block_starts.iter().any(|&s| s >= grid.periods.max(1))
    {
        rep.error("grid.block_starts", "block starts must increase inside the horizon");
    }
}

fn validate_network(net: &RadialNetwork, rep: &mut ValidationReport) {
    let n = net.buses.len();
    if n == 0 {
        rep.error("network", "no buses");
        return;
    }
    for (i, b) in net.buses.iter().enumerate() {
        if b.id != i {
            rep.error("network.buses", format!("bus ids must be 0..{n} in order"));
            break;
        }
    }
    let roots: Vec<usize> = net
        .buses
        .iter()
        .filter(|b| b.parent.is_none())
        .map(|b| b.id)
        .collect();
    if roots != [RadialNetwork::SLACK] {
        rep.error(
            "network.tree",
            format!("exactly one root (the slack, bus 0) expected, found {roots:?}"),
        );
    }
    for b in &net.buses {
        match b.parent {
            Some(a) if a >= n => {
                rep.error("network.tree", format!("bus {} has unknown parent {a}", b.id));
            }
            Some(a) if a == b.id => {
                rep.error("network.tree", format!("bus {} is its own parent", b.id));
            }
            _ => {}
        }
        if b.parent.is_some() && !(b.r_ohm >= 0.0 && b.x_ohm >= 0.0) {
            rep.error(format!("network.buses[{}]", b.id), "negative impedance");
        }
        if b.parent.is_some() && !(b.amp_limit_a > 0.0) {
            rep.error(format!("network.buses[{}]", b.id), "ampacity must be positive");
        }
    }
    // Every parent chain must reach the slack within n steps.
    for start in 0..n {
        let mut b = start;
        let mut steps = 0;
        while let Some(a) = net.buses[b].parent {
            if a >= n {
                break;
            }
            b = a;
            steps += 1;
            if steps > n {
                rep.error(
                    "network.tree",
                    format!("cycle in parent relation through bus {start}"),
                );
                return;
            }
        }
    }
    if !(net.v_min_sqr < net.v_max_sqr && net.v_min_sqr > 0.0) {
        rep.error("network.voltage", "need 0 < v_min_sqr < v_max_sqr");
    }
    if !(net.transformer_kw > 0.0) {
        rep.error("network.transformer_kw", "must be positive");
    }
    if !(net.base_voltage_v > 0.0 && net.base_power_kva > 0.0) {
        rep.error("network.base", "per-unit bases must be positive");
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ride(id: usize, dep: usize, ret: usize) -> RideRequest {
        RideRequest {
            id,
            departure: dep,
            ret,
            energy_kwh: 5.0,
        }
    }

    #[test]
    fn overlap_examples() {
        assert_eq!(
            overlapping_pairs(&[ride(1, 10, 14), ride(2, 12, 16)]),
            BTreeSet::from([(0, 1)])
        );
        // Touching boundary counts.
        assert_eq!(
            overlapping_pairs(&[ride(1, 10, 14), ride(2, 14, 18)]),
            BTreeSet::from([(0, 1)])
        );
        assert!(overlapping_pairs(&[ride(1, 10, 14), ride(2, 15, 18)]).is_empty());
        assert!(overlapping_pairs(&[]).is_empty());
    }

    #[test]
    fn active_and_returning() {
        let rides = [ride(0, 10, 14)];
        assert_eq!(rides_active_at(&rides, 12), vec![0]);
        assert!(rides_active_at(&rides, 15).is_empty());
        assert_eq!(rides_active_at(&rides, 10), vec![0]);
        assert_eq!(rides_returning_at(&rides, 14), vec![0]);
        assert!(rides_returning_at(&rides, 13).is_empty());
    }

    #[test]
    fn calendar_matches_scans() {
        let rides = [ride(0, 0, 3), ride(1, 2, 2), ride(2, 5, 9)];
        let cal = RideCalendar::new(&rides, 10);
        for t in 0..10 {
            assert_eq!(cal.active[t], rides_active_at(&rides, t));
            assert_eq!(cal.returning[t], rides_returning_at(&rides, t));
        }
    }

    #[test]
    fn crf_zero_rate_and_limits() {
        assert_eq!(capital_recovery_factor(0.0, 7).unwrap(), 1.0 / 7.0);
        let big = capital_recovery_factor(10.0, 7).unwrap();
        assert!((big - 10.0).abs() / 10.0 < 1e-6);
        assert!(capital_recovery_factor(-0.01, 7).is_err());
        assert!(capital_recovery_factor(0.05, 0).is_err());
    }

    #[test]
    fn crf_matches_amortization_loop() {
        // Oracle: pay U·C every year on a debt compounding at the rate.
        for &(rate, years) in &[(0.05, 7u32), (0.02, 7), (0.1, 3), (0.07, 20)] {
            let u = capital_recovery_factor(rate, years).unwrap();
            let capital = 1000.0;
            let mut debt = capital;
            for _ in 0..years {
                debt = debt * (1.0 + rate) - u * capital;
            }
            assert!(debt.abs() < 1e-10 * capital, "rate {rate}: residual debt {debt}");
        }
    }

    #[test]
    fn crf_monotone() {
        let rates: Vec<f64> = (0..40).map(|i| i as f64 * 0.01).collect();
        for n in 1..30u32 {
            for w in rates.windows(2) {
                assert!(
                    capital_recovery_factor(w[1], n).unwrap()
                        > capital_recovery_factor(w[0], n).unwrap()
                );
            }
        }
        for &r in &rates {
            for n in 1..30u32 {
                assert!(
                    capital_recovery_factor(r, n + 1).unwrap()
                        < capital_recovery_factor(r, n).unwrap()
                );
            }
        }
    }

    #[test]
    fn away_cap_examples() {
        assert_eq!(away_energy_cap(&ride(0, 10, 18), 11.0, 0.25), 22.0);
        assert_eq!(away_energy_cap(&ride(0, 10, 10), 11.0, 0.25), 0.0);
    }

    #[test]
    fn annualization() {
        let g = TimeGrid::uniform(0.25, 4, 672);
        assert!((g.annualization_factor() * g.hours_represented() - 8760.0).abs() < 1e-9);
        assert_eq!(g.block_of(700), 1);
        assert!(g.is_block_start(1344));
    }
}
