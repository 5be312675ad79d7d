//! Case files: four CSV tables plus `case.toml` for scalars and catalogs.
//!
//! ```text
//! profiles.csv  bus_id,period,load_kw,pv_potential_kw
//! prices.csv    period,import_eur_per_kwh,export_eur_per_kwh
//! rides.csv     ride_id,dep_period,ret_period,energy_kwh
//! network.csv   bus_id,parent_id,r_ohm,x_ohm,amp_limit      (slack: empty parent)
//! ```
//!
//! Prices in `prices.csv` are the energy component only; grid fees live in
//! `case.toml`. Floats are written in shortest round-trip form, so a case
//! written and reloaded compares equal.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::domain::{
    validate_case, Bus, CaseBundle, CsCandidate, EvCandidate, FinanceParams, MemberProfile,
    RadialNetwork, RideRequest, TariffSchedule, TimeGrid,
};
use crate::error::{CoreError, Result};

pub const PROFILES_FILE: &str = "profiles.csv";
pub const PRICES_FILE: &str = "prices.csv";
pub const RIDES_FILE: &str = "rides.csv";
pub const NETWORK_FILE: &str = "network.csv";
pub const SCALARS_FILE: &str = "case.toml";

const PROFILE_HEADER: [&str; 4] = ["bus_id", "period", "load_kw", "pv_potential_kw"];
const PRICE_HEADER: [&str; 3] = ["period", "import_eur_per_kwh", "export_eur_per_kwh"];
const RIDE_HEADER: [&str; 4] = ["ride_id", "dep_period", "ret_period", "energy_kwh"];
const NETWORK_HEADER: [&str; 5] = ["bus_id", "parent_id", "r_ohm", "x_ohm", "amp_limit"];

/// Everything that is not a per-period or per-bus table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseScalars {
    pub grid: GridScalars,
    pub network: NetworkScalars,
    pub tariffs: TariffScalars,
    pub mobility: MobilityScalars,
    pub finance: FinanceParams,
    pub power_factor: f64,
    pub ev_catalog: Vec<EvCandidate>,
    pub cs_catalog: Vec<CsCandidate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridScalars {
    pub step_hours: f64,
    pub periods: usize,
    pub block_starts: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkScalars {
    pub v_min_sqr: f64,
    pub v_max_sqr: f64,
    pub transformer_kw: f64,
    pub base_voltage_v: f64,
    pub base_power_kva: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TariffScalars {
    pub away_price: f64,
    pub unserved_price: f64,
    pub volumetric_fee: f64,
    pub capacity_volumetric_fee: f64,
    pub peak_fee: f64,
    pub fixed_peak_charge: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MobilityScalars {
    pub fleet_slots: usize,
    pub cs_slots: usize,
    pub away_power_kw: f64,
}

impl CaseScalars {
    pub fn of(case: &CaseBundle) -> Result<Self> {
        let pf = case.members.first().map_or(0.8, |m| m.power_factor);
        if case.members.iter().any(|m| m.power_factor != pf) {
            return Err(CoreError::InvalidParameter(
                "case files carry a single power factor; members differ".into(),
            ));
        }
        let net = &case.network;
        let t = &case.tariffs;
        Ok(Self {
            grid: GridScalars {
                step_hours: case.grid.step_hours,
                periods: case.grid.periods,
                block_starts: case.grid.block_starts.clone(),
            },
            network: NetworkScalars {
                v_min_sqr: net.v_min_sqr,
                v_max_sqr: net.v_max_sqr,
                transformer_kw: net.transformer_kw,
                base_voltage_v: net.base_voltage_v,
                base_power_kva: net.base_power_kva,
            },
            tariffs: TariffScalars {
                away_price: t.away_price,
                unserved_price: t.unserved_price,
                volumetric_fee: t.volumetric_fee,
                capacity_volumetric_fee: t.capacity_volumetric_fee,
                peak_fee: t.peak_fee,
                fixed_peak_charge: t.fixed_peak_charge,
            },
            mobility: MobilityScalars {
                fleet_slots: case.fleet_slots,
                cs_slots: case.cs_slots,
                away_power_kw: case.away_power_kw,
            },
            finance: case.finance.clone(),
            power_factor: pf,
            ev_catalog: case.ev_catalog.clone(),
            cs_catalog: case.cs_catalog.clone(),
        })
    }
}

/// Paths of the four tables; `case.toml` is looked up next to the profiles.
#[derive(Clone, Debug)]
pub struct CasePaths {
    pub scalars: PathBuf,
    pub profiles: PathBuf,
    pub prices: PathBuf,
    pub rides: PathBuf,
    pub network: PathBuf,
}

impl CasePaths {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            scalars: dir.join(SCALARS_FILE),
            profiles: dir.join(PROFILES_FILE),
            prices: dir.join(PRICES_FILE),
            rides: dir.join(RIDES_FILE),
            network: dir.join(NETWORK_FILE),
        }
    }
}

pub fn load_case_dir(dir: &Path) -> Result<CaseBundle> {
    load_case_paths(&CasePaths::in_dir(dir))
}

/// Loads the four tables against the scalars in `case.toml` of the same
/// directory as `profile_path`.
pub fn load_case(
    profile_path: &Path,
    price_path: &Path,
    ride_path: &Path,
    network_path: &Path,
) -> Result<CaseBundle> {
    let dir = profile_path.parent().unwrap_or(Path::new("."));
    load_case_paths(&CasePaths {
        scalars: dir.join(SCALARS_FILE),
        profiles: profile_path.to_path_buf(),
        prices: price_path.to_path_buf(),
        rides: ride_path.to_path_buf(),
        network: network_path.to_path_buf(),
    })
}

pub fn load_case_paths(paths: &CasePaths) -> Result<CaseBundle> {
    let text = fs::read_to_string(&paths.scalars).map_err(|e| CoreError::io(&paths.scalars, e))?;
    let scalars: CaseScalars = toml::from_str(&text)
        .map_err(|e| CoreError::data(display(&paths.scalars), line_of(&text, &e), e.message()))?;
    let periods = scalars.grid.periods;

    let buses = read_network(&paths.network)?;
    let network = RadialNetwork {
        buses,
        v_min_sqr: scalars.network.v_min_sqr,
        v_max_sqr: scalars.network.v_max_sqr,
        transformer_kw: scalars.network.transformer_kw,
        base_voltage_v: scalars.network.base_voltage_v,
        base_power_kva: scalars.network.base_power_kva,
    };
    let (import_price, export_price) = read_prices(&paths.prices, periods)?;
    let members = read_profiles(&paths.profiles, periods, network.bus_count(), scalars.power_factor)?;
    let rides = read_rides(&paths.rides, periods)?;

    let t = &scalars.tariffs;
    let case = CaseBundle {
        network,
        grid: TimeGrid::new(
            scalars.grid.step_hours,
            periods,
            scalars.grid.block_starts.clone(),
        ),
        members,
        tariffs: TariffSchedule {
            import_price,
            export_price,
            away_price: t.away_price,
            unserved_price: t.unserved_price,
            volumetric_fee: t.volumetric_fee,
            capacity_volumetric_fee: t.capacity_volumetric_fee,
            peak_fee: t.peak_fee,
            fixed_peak_charge: t.fixed_peak_charge,
        },
        rides,
        ev_catalog: scalars.ev_catalog,
        cs_catalog: scalars.cs_catalog,
        fleet_slots: scalars.mobility.fleet_slots,
        cs_slots: scalars.mobility.cs_slots,
        finance: scalars.finance,
        away_power_kw: scalars.mobility.away_power_kw,
    };
    let report = validate_case(&case);
    if !report.is_valid() {
        return Err(CoreError::Invalid(report));
    }
    for w in &report.warnings {
        log::warn!("{}: {}", w.field, w.message);
    }
    Ok(case)
}

pub fn write_case_dir(case: &CaseBundle, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CoreError::io(dir, e))?;
    let scalars = CaseScalars::of(case)?;
    let text = toml::to_string(&scalars)
        .map_err(|e| CoreError::InvalidParameter(format!("case.toml encoding: {e}")))?;
    let path = dir.join(SCALARS_FILE);
    fs::write(&path, text).map_err(|e| CoreError::io(&path, e))?;

    let path = dir.join(NETWORK_FILE);
    let mut w = writer(&path)?;
    w.write_record(NETWORK_HEADER).map_err(|e| csv_io(&path, e))?;
    for b in &case.network.buses {
        let parent = b.parent.map(|p| p.to_string()).unwrap_or_default();
        w.write_record([
            b.id.to_string(),
            parent,
            b.r_ohm.to_string(),
            b.x_ohm.to_string(),
            b.amp_limit_a.to_string(),
        ])
        .map_err(|e| csv_io(&path, e))?;
    }
    w.flush().map_err(|e| CoreError::io(&path, e))?;

    let path = dir.join(PRICES_FILE);
    let mut w = writer(&path)?;
    w.write_record(PRICE_HEADER).map_err(|e| csv_io(&path, e))?;
    for (t, (i, e)) in case
        .tariffs
        .import_price
        .iter()
        .zip(&case.tariffs.export_price)
        .enumerate()
    {
        w.write_record([t.to_string(), i.to_string(), e.to_string()])
            .map_err(|e| csv_io(&path, e))?;
    }
    w.flush().map_err(|e| CoreError::io(&path, e))?;

    let path = dir.join(PROFILES_FILE);
    let mut w = writer(&path)?;
    w.write_record(PROFILE_HEADER).map_err(|e| csv_io(&path, e))?;
    for m in &case.members {
        for (t, (l, pv)) in m.load_kw.iter().zip(&m.pv_potential_kw).enumerate() {
            w.write_record([m.bus.to_string(), t.to_string(), l.to_string(), pv.to_string()])
                .map_err(|e| csv_io(&path, e))?;
        }
    }
    w.flush().map_err(|e| CoreError::io(&path, e))?;

    let path = dir.join(RIDES_FILE);
    let mut w = writer(&path)?;
    w.write_record(RIDE_HEADER).map_err(|e| csv_io(&path, e))?;
    for r in &case.rides {
        w.write_record([
            r.id.to_string(),
            r.departure.to_string(),
            r.ret.to_string(),
            r.energy_kwh.to_string(),
        ])
        .map_err(|e| csv_io(&path, e))?;
    }
    w.flush().map_err(|e| CoreError::io(&path, e))?;
    Ok(())
}

/// Short digest of a case's full content, used to refuse comparing runs
/// made on different inputs.
pub fn case_hash(case: &CaseBundle) -> String {
    use sha2::{Digest, Sha256};
    let bytes = serde_json::to_vec(case).expect("case serializes");
    hex::encode(&Sha256::digest(&bytes)[..8])
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_io(path, e))
}

fn csv_io(path: &Path, e: csv::Error) -> CoreError {
    CoreError::data(display(path), e.position().map_or(0, |p| p.line() as usize), e.to_string())
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

fn line_of(text: &str, e: &toml::de::Error) -> usize {
    e.span()
        .map_or(0, |s| text[..s.start.min(text.len())].lines().count().max(1))
}

/// Reads every record of a headed CSV, checking the header row exactly.
fn read_table<T: DeserializeOwned>(path: &Path, header: &[&str]) -> Result<Vec<(usize, T)>> {
    let file = display(path);
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => CoreError::io(path, io),
            other => CoreError::data(&file, 0, format!("{other:?}")),
        })?;
    let found: Vec<String> = rdr
        .headers()
        .map_err(|e| CoreError::data(&file, 1, e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    if found != header {
        return Err(CoreError::data(
            &file,
            1,
            format!("expected columns {}, found {}", header.join(","), found.join(",")),
        ));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            CoreError::data(&file, e.position().map_or(0, |p| p.line() as usize), e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let row: T = rec
            .deserialize(None)
            .map_err(|e| CoreError::data(&file, line, e.to_string()))?;
        out.push((line, row));
    }
    Ok(out)
}

#[derive(Deserialize)]
struct NetworkRow {
    bus_id: usize,
    parent_id: Option<usize>,
    r_ohm: f64,
    x_ohm: f64,
    amp_limit: f64,
}

fn read_network(path: &Path) -> Result<Vec<Bus>> {
    let file = display(path);
    let rows: Vec<(usize, NetworkRow)> = read_table(path, &NETWORK_HEADER)?;
    let mut buses = Vec::with_capacity(rows.len());
    for (expected, (line, row)) in rows.into_iter().enumerate() {
        if row.bus_id != expected {
            return Err(CoreError::data(
                &file,
                line,
                format!("bus ids must be listed as 0,1,2,...; expected {expected}, found {}", row.bus_id),
            ));
        }
        buses.push(Bus {
            id: row.bus_id,
            parent: row.parent_id,
            r_ohm: row.r_ohm,
            x_ohm: row.x_ohm,
            amp_limit_a: row.amp_limit,
        });
    }
    let n = buses.len();
    for (b, bus) in buses.iter().enumerate() {
        if let Some(p) = bus.parent {
            if p >= n {
                return Err(CoreError::data(&file, b + 2, format!("unknown parent bus {p}")));
            }
        }
    }
    Ok(buses)
}

#[derive(Deserialize)]
struct PriceRow {
    period: usize,
    import_eur_per_kwh: f64,
    export_eur_per_kwh: f64,
}

fn read_prices(path: &Path, periods: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let file = display(path);
    let rows: Vec<(usize, PriceRow)> = read_table(path, &PRICE_HEADER)?;
    let mut import = Vec::with_capacity(periods);
    let mut export = Vec::with_capacity(periods);
    for (expected, (line, row)) in rows.iter().enumerate() {
        if row.period != expected {
            return Err(CoreError::data(
                &file,
                *line,
                format!("period {} out of sequence, expected {expected}", row.period),
            ));
        }
        import.push(row.import_eur_per_kwh);
        export.push(row.export_eur_per_kwh);
    }
    if import.len() != periods {
        let line = rows.last().map_or(1, |(l, _)| *l);
        return Err(CoreError::data(
            &file,
            line,
            format!("{} price rows for a {periods}-period time grid", import.len()),
        ));
    }
    Ok((import, export))
}

#[derive(Deserialize)]
struct ProfileRow {
    bus_id: usize,
    period: usize,
    load_kw: f64,
    pv_potential_kw: f64,
}

fn read_profiles(
    path: &Path,
    periods: usize,
    bus_count: usize,
    power_factor: f64,
) -> Result<Vec<MemberProfile>> {
    let file = display(path);
    let rows: Vec<(usize, ProfileRow)> = read_table(path, &PROFILE_HEADER)?;
    let mut by_bus: BTreeMap<usize, (Vec<Option<f64>>, Vec<f64>)> = BTreeMap::new();
    for (line, row) in rows {
        if row.bus_id >= bus_count || row.bus_id == RadialNetwork::SLACK {
            return Err(CoreError::data(
                &file,
                line,
                format!("unknown member bus {}", row.bus_id),
            ));
        }
        if row.period >= periods {
            return Err(CoreError::data(
                &file,
                line,
                format!("period {} beyond the {periods}-period horizon", row.period),
            ));
        }
        let entry = by_bus
            .entry(row.bus_id)
            .or_insert_with(|| (vec![None; periods], vec![0.0; periods]));
        if entry.0[row.period].is_some() {
            return Err(CoreError::data(
                &file,
                line,
                format!("duplicate row for bus {} period {}", row.bus_id, row.period),
            ));
        }
        entry.0[row.period] = Some(row.load_kw);
        entry.1[row.period] = row.pv_potential_kw;
    }
    by_bus
        .into_iter()
        .map(|(bus, (load, pv))| {
            let missing = load.iter().filter(|v| v.is_none()).count();
            if missing > 0 {
                return Err(CoreError::data(
                    &file,
                    0,
                    format!("bus {bus}: {missing} of {periods} periods missing"),
                ));
            }
            Ok(MemberProfile {
                bus,
                load_kw: load.into_iter().flatten().collect(),
                pv_potential_kw: pv,
                power_factor,
            })
        })
        .collect()
}

#[derive(Deserialize)]
struct RideRow {
    ride_id: usize,
    dep_period: usize,
    ret_period: usize,
    energy_kwh: f64,
}

fn read_rides(path: &Path, periods: usize) -> Result<Vec<RideRequest>> {
    let file = display(path);
    let rows: Vec<(usize, RideRow)> = read_table(path, &RIDE_HEADER)?;
    rows.into_iter()
        .map(|(line, row)| {
            if row.ret_period >= periods {
                return Err(CoreError::data(
                    &file,
                    line,
                    format!("return period {} beyond the {periods}-period horizon", row.ret_period),
                ));
            }
            if row.dep_period > row.ret_period {
                return Err(CoreError::data(&file, line, "departure after return"));
            }
            Ok(RideRequest {
                id: row.ride_id,
                departure: row.dep_period,
                ret: row.ret_period,
                energy_kwh: row.energy_kwh,
            })
        })
        .collect()
}
