//! The public charging network: stations, connectors and their occupancy
//! state machine.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::demand::ChargeRequest;
use crate::domain::{AgentId, Location, Minute, Region, SocketType};
use crate::error::{Error, Result};
use crate::matching::access_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Premises {
    OnStreet,
    Supermarket,
    TrainStation,
    BusinessPark,
    Other,
}

impl Premises {
    pub fn parse(s: &str) -> Option<Premises> {
        match s.trim() {
            "on_street" => Some(Premises::OnStreet),
            "supermarket" => Some(Premises::Supermarket),
            "train_station" => Some(Premises::TrainStation),
            "business_park" => Some(Premises::BusinessPark),
            "other" => Some(Premises::Other),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Premises::OnStreet => "on_street",
            Premises::Supermarket => "supermarket",
            Premises::TrainStation => "train_station",
            Premises::BusinessPark => "business_park",
            Premises::Other => "other",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfferedServices {
    pub reservable: bool,
    /// Currency per kWh.
    pub charge_rate: f64,
    pub restricted_access: bool,
    pub roaming_enabled: bool,
    /// Multiplicative surcharge on the energy price for roaming users.
    pub roaming_surcharge: f64,
    /// On-site EV-only bays where queued vehicles may wait.
    pub reserved_ev_parking: u32,
}

/// Occupancy of a connector. Holder and expiry live inside the variants so
/// that a free connector can never carry a holder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "state")]
pub enum ConnectorState {
    Free,
    Reserved { holder: AgentId, expiry: Minute },
    Occupied { holder: AgentId },
    OutOfService,
}

impl ConnectorState {
    pub fn name(&self) -> &'static str {
        match self {
            ConnectorState::Free => "Free",
            ConnectorState::Reserved { .. } => "Reserved",
            ConnectorState::Occupied { .. } => "Occupied",
            ConnectorState::OutOfService => "OutOfService",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConnectorEvent {
    Reserve { agent: AgentId, expiry: Minute },
    PlugIn { agent: AgentId },
    Release,
    Fault,
    Repair,
}

impl fmt::Display for ConnectorEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConnectorEvent::Reserve { agent, expiry } => write!(f, "Reserve({agent}, {expiry})"),
            ConnectorEvent::PlugIn { agent } => write!(f, "PlugIn({agent})"),
            ConnectorEvent::Release => f.write_str("Release"),
            ConnectorEvent::Fault => f.write_str("Fault"),
            ConnectorEvent::Repair => f.write_str("Repair"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Connector {
    pub socket: SocketType,
    pub state: ConnectorState,
}

impl Connector {
    pub fn new(socket: SocketType) -> Self {
        Self {
            socket,
            state: ConnectorState::Free,
        }
    }

    pub fn holder(&self) -> Option<AgentId> {
        match self.state {
            ConnectorState::Reserved { holder, .. } | ConnectorState::Occupied { holder } => Some(holder),
            _ => None,
        }
    }

    pub fn reservation_expiry(&self) -> Option<Minute> {
        match self.state {
            ConnectorState::Reserved { expiry, .. } => Some(expiry),
            _ => None,
        }
    }

    pub fn is_free(&self) -> bool {
        self.state == ConnectorState::Free
    }

    /// Applies `event` in place. On error the connector is unchanged.
    pub fn apply(&mut self, event: ConnectorEvent) -> Result<()> {
        *self = transition(self, event)?;
        Ok(())
    }
}

/// The connector state machine.
///
/// | from \ event  | Reserve  | PlugIn          | Release | Fault        | Repair |
/// |---------------|----------|-----------------|---------|--------------|--------|
/// | Free          | Reserved | Occupied        | error   | OutOfService | error  |
/// | Reserved(h)   | error    | Occupied if h   | Free    | OutOfService | error  |
/// | Occupied      | error    | error           | Free    | OutOfService | error  |
/// | OutOfService  | error    | error           | error   | OutOfService | Free   |
///
/// A fault drops whoever held the connector.
pub fn transition(c: &Connector, event: ConnectorEvent) -> Result<Connector> {
    use ConnectorEvent as E;
    use ConnectorState as S;
    let next = match (c.state, event) {
        (S::Free, E::Reserve { agent, expiry }) => S::Reserved { holder: agent, expiry },
        (S::Free, E::PlugIn { agent }) => S::Occupied { holder: agent },
        (S::Reserved { holder, .. }, E::PlugIn { agent }) => {
            if holder != agent {
                return Err(Error::Access { holder, agent });
            }
            S::Occupied { holder }
        }
        (S::Reserved { .. } | S::Occupied { .. }, E::Release) => S::Free,
        (_, E::Fault) => S::OutOfService,
        (S::OutOfService, E::Repair) => S::Free,
        (state, event) => {
            return Err(Error::State {
                state: state.name().to_string(),
                event: event.to_string(),
            })
        }
    };
    Ok(Connector {
        socket: c.socket.clone(),
        state: next,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Station {
    pub id: String,
    pub operator_id: String,
    pub location: Location,
    pub premises: Premises,
    pub connectors: Vec<Connector>,
    pub services: OfferedServices,
}

impl Station {
    /// Frees every reservation whose expiry is at or before `now`; returns the
    /// dropped holders with their connector index.
    pub fn expire_reservations(&mut self, now: Minute) -> Vec<(usize, AgentId)> {
        let mut expired = Vec::new();
        for (i, c) in self.connectors.iter_mut().enumerate() {
            if let ConnectorState::Reserved { holder, expiry } = c.state {
                if expiry <= now {
                    c.state = ConnectorState::Free;
                    expired.push((i, holder));
                }
            }
        }
        expired
    }

    pub fn free_count(&self) -> usize {
        self.connectors.iter().filter(|c| c.is_free()).count()
    }

    pub fn max_rate_class(&self) -> Option<crate::domain::RateClass> {
        self.connectors.iter().map(|c| c.socket.rate_class).max()
    }
}

/// One row of the stations file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationRecord {
    pub station_id: String,
    pub operator_id: String,
    pub borough_id: String,
    pub x_km: f64,
    pub y_km: f64,
    pub premises: String,
    /// Semicolon-separated `socket:kW` list.
    pub sockets: String,
    pub reservable: bool,
    pub charge_rate: f64,
    pub restricted: bool,
    pub roaming: bool,
    pub surcharge: f64,
    pub reserved_parking: u32,
}

impl StationRecord {
    pub fn from_station(st: &Station) -> Self {
        Self {
            station_id: st.id.clone(),
            operator_id: st.operator_id.clone(),
            borough_id: st.location.borough_id.clone(),
            x_km: st.location.x,
            y_km: st.location.y,
            premises: st.premises.as_str().to_string(),
            sockets: st
                .connectors
                .iter()
                .map(|c| c.socket.to_string())
                .collect::<Vec<_>>()
                .join(";"),
            reservable: st.services.reservable,
            charge_rate: st.services.charge_rate,
            restricted: st.services.restricted_access,
            roaming: st.services.roaming_enabled,
            surcharge: st.services.roaming_surcharge,
            reserved_parking: st.services.reserved_ev_parking,
        }
    }

    fn to_station(&self) -> std::result::Result<Station, String> {
        if self.station_id.trim().is_empty() {
            return Err("empty station_id".into());
        }
        let premises =
            Premises::parse(&self.premises).ok_or_else(|| format!("unknown premises `{}`", self.premises))?;
        let connectors = self
            .sockets
            .split(';')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| SocketType::parse(s).map(Connector::new).map_err(|e| e.to_string()))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if connectors.is_empty() {
            return Err("station has zero connectors".into());
        }
        if !(self.charge_rate.is_finite() && self.charge_rate >= 0.0) {
            return Err("charge_rate must be >= 0".into());
        }
        if !(self.surcharge.is_finite() && self.surcharge >= 0.0) {
            return Err("surcharge must be >= 0".into());
        }
        if !(self.x_km.is_finite() && self.y_km.is_finite()) {
            return Err("non-finite coordinates".into());
        }
        Ok(Station {
            id: self.station_id.clone(),
            operator_id: self.operator_id.clone(),
            location: Location::new(self.x_km, self.y_km, self.borough_id.clone()),
            premises,
            connectors,
            services: OfferedServices {
                reservable: self.reservable,
                charge_rate: self.charge_rate,
                restricted_access: self.restricted,
                roaming_enabled: self.roaming,
                roaming_surcharge: self.surcharge,
                reserved_ev_parking: self.reserved_parking,
            },
        })
    }
}

/// The charging network. Stations are kept sorted by id, so iteration order is
/// the id order used for tie-breaking.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Network {
    stations: Vec<Station>,
    index: HashMap<String, usize>,
}

impl Network {
    pub fn from_stations(mut stations: Vec<Station>) -> Result<Self> {
        stations.sort_by(|a, b| a.id.cmp(&b.id));
        let mut index = HashMap::with_capacity(stations.len());
        for (i, s) in stations.iter().enumerate() {
            if index.insert(s.id.clone(), i).is_some() {
                return Err(Error::arg(format!("duplicate station id `{}`", s.id)));
            }
            if s.connectors.is_empty() {
                return Err(Error::arg(format!("station `{}` has zero connectors", s.id)));
            }
        }
        Ok(Self { stations, index })
    }

    pub fn stations(&self) -> &[Station] {
        &self.stations
    }

    pub fn stations_mut(&mut self) -> &mut [Station] {
        &mut self.stations
    }

    pub fn len(&self) -> usize {
        self.stations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stations.is_empty()
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn station(&self, id: &str) -> Result<&Station> {
        self.position(id)
            .map(|i| &self.stations[i])
            .ok_or_else(|| Error::Lookup(format!("unknown station `{id}`")))
    }

    pub fn station_mut(&mut self, id: &str) -> Result<&mut Station> {
        match self.position(id) {
            Some(i) => Ok(&mut self.stations[i]),
            None => Err(Error::Lookup(format!("unknown station `{id}`"))),
        }
    }

    pub fn connector_count(&self) -> usize {
        self.stations.iter().map(|s| s.connectors.len()).sum()
    }

    pub fn to_records(&self) -> Vec<StationRecord> {
        self.stations.iter().map(StationRecord::from_station).collect()
    }
}

/// Builds a network from station-file rows. Every connector starts `Free`.
pub fn load_network(records: &[StationRecord], region: &Region) -> Result<Network> {
    let mut stations = Vec::with_capacity(records.len());
    let mut seen: HashMap<&str, usize> = HashMap::new();
    for (i, rec) in records.iter().enumerate() {
        let row = i + 1;
        let fail = |message: String| Error::Ingestion {
            file: "stations".into(),
            row,
            message,
        };
        if !region.contains(&rec.borough_id) {
            return Err(fail(format!("unknown borough `{}`", rec.borough_id)));
        }
        if let Some(prev) = seen.insert(rec.station_id.as_str(), row) {
            return Err(fail(format!(
                "duplicate station id `{}` (first seen at row {prev})",
                rec.station_id
            )));
        }
        stations.push(rec.to_station().map_err(fail)?);
    }
    Network::from_stations(stations)
}

/// Whether one connector can serve the request's vehicle at the wanted rate.
pub fn connector_compatible(req: &ChargeRequest, c: &Connector) -> bool {
    req.sockets.contains(&c.socket.id) && c.socket.rate_class >= req.rate_class_wanted
}

/// Whether the station could ever serve the request: a matching connector and
/// access rights under the roaming policy.
pub fn compatible(req: &ChargeRequest, st: &Station, roaming_policy: bool) -> bool {
    st.connectors.iter().any(|c| connector_compatible(req, c))
        && access_for(&req.subscriptions, st, roaming_policy).allowed
}

/// Free connectors at `now`, after lapsing expired reservations.
pub fn available_connectors(network: &mut Network, station_id: &str, now: Minute) -> Result<usize> {
    let st = network.station_mut(station_id)?;
    st.expire_reservations(now);
    Ok(st.free_count())
}
