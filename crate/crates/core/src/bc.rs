//! Mass-flow boundary conditions for the aortic arch: velocity to mass
//! flow, peak snapshot with continuity, the four BC layouts, deviation
//! statistics and the text export format.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::VesselId;
use crate::scalar::{mean, Real};
use crate::trace::VelocityTrace;

pub const DEFAULT_DENSITY: f64 = 1060.0;
pub const DEFAULT_VISCOSITY: f64 = 0.004;
pub const THROAT_AREA_KEY: &str = "coarctation_throat_area_m2";
pub const BC_FILE_MAGIC: &str = "#coarcta-bc";
pub const BC_FILE_VERSION: &str = "v1";
pub const NOT_ADJUSTED: &str = "not_adjusted";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BcError {
    #[error("invalid fluid property: {0}")]
    InvalidFluid(String),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("no area configured for vessel `{0}`")]
    MissingArea(VesselId),
    #[error("mass-flow profile for `{vessel}`: {message}")]
    InvalidProfile { vessel: VesselId, message: String },
    #[error("profiles do not share a time grid (`{0}`)")]
    MismatchedGrid(VesselId),
    #[error("no profile for vessel `{0}`")]
    MissingProfile(VesselId),
    #[error("negative mass flow {value} at outlet `{vessel}`")]
    NegativeOutlet { vessel: VesselId, value: f64 },
    #[error("unknown bc type `{0}`")]
    UnknownBcType(String),
    #[error("invalid provenance `{0}`: must be non-empty without whitespace or commas")]
    InvalidProvenance(String),
    #[error("transient export needs a profile for `{0}`")]
    TransientProfileMissing(VesselId),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("deviation undefined for `{0}`: cross-model mean is zero")]
    ZeroMean(VesselId),
    #[error("deviation needs at least 2 values for `{vessel}`, found {found}")]
    TooFewValues { vessel: VesselId, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluidProperties<T> {
    /// kg/m³
    pub density: T,
    /// kg/(m·s); carried as metadata only.
    pub viscosity: T,
}

impl<T: Real> FluidProperties<T> {
    pub fn new(density: T, viscosity: T) -> Result<Self, BcError> {
        if !(density > T::zero() && density.is_finite()) {
            return Err(BcError::InvalidFluid(format!(
                "density must be positive, got {density}"
            )));
        }
        if !(viscosity >= T::zero() && viscosity.is_finite()) {
            return Err(BcError::InvalidFluid(format!(
                "viscosity must be non-negative, got {viscosity}"
            )));
        }
        Ok(Self { density, viscosity })
    }
}

impl<T: Real> Default for FluidProperties<T> {
    fn default() -> Self {
        Self {
            density: T::lit(DEFAULT_DENSITY),
            viscosity: T::lit(DEFAULT_VISCOSITY),
        }
    }
}

/// Cross-sectional areas in m² per vessel plus the coarctation throat.
#[derive(Debug, Clone, PartialEq)]
pub struct VesselGeometry<T> {
    areas: BTreeMap<VesselId, T>,
    throat_area: T,
}

impl<T: Real> VesselGeometry<T> {
    pub fn new(areas: BTreeMap<VesselId, T>, throat_area: T) -> Result<Self, BcError> {
        for (v, a) in &areas {
            if !(*a > T::zero() && a.is_finite()) {
                return Err(BcError::InvalidGeometry(format!(
                    "area of `{v}` must be positive, got {a}"
                )));
            }
        }
        if !(throat_area > T::zero() && throat_area.is_finite()) {
            return Err(BcError::InvalidGeometry(format!(
                "{THROAT_AREA_KEY} must be positive, got {throat_area}"
            )));
        }
        let aao = *areas
            .get(&VesselId::AscendingAorta)
            .ok_or(BcError::MissingArea(VesselId::AscendingAorta))?;
        if throat_area >= aao {
            return Err(BcError::InvalidGeometry(format!(
                "{THROAT_AREA_KEY} {throat_area} must be smaller than the ascending aorta area {aao}"
            )));
        }
        Ok(Self { areas, throat_area })
    }

    /// Placeholder areas for a synthetic adult arch. Not patient data.
    pub fn synthetic() -> Self {
        let areas = [
            (VesselId::AscendingAorta, 2.01e-4),
            (VesselId::InnominateArtery, 5.03e-5),
            (VesselId::LeftCommonCarotid, 1.96e-5),
            (VesselId::LeftSubclavian, 2.83e-5),
            (VesselId::Coarctation, 1.8e-5),
            (VesselId::DescendingAorta, 7.85e-5),
        ]
        .into_iter()
        .map(|(v, a)| (v, T::lit(a)))
        .collect();
        Self::new(areas, T::lit(1.8e-5)).expect("synthetic geometry is valid")
    }

    pub fn area(&self, vessel: VesselId) -> Result<T, BcError> {
        self.areas.get(&vessel).copied().ok_or(BcError::MissingArea(vessel))
    }

    pub fn throat_area(&self) -> T {
        self.throat_area
    }

    pub fn areas(&self) -> &BTreeMap<VesselId, T> {
        &self.areas
    }

    /// Flat `key = value` TOML: vessel names and the throat key.
    pub fn from_toml_str(text: &str) -> Result<Self, BcError> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| BcError::InvalidGeometry(e.to_string()))?;
        let mut areas = BTreeMap::new();
        let mut throat = None;
        for (key, value) in &table {
            let number = match value {
                toml::Value::Float(f) => *f,
                toml::Value::Integer(i) => *i as f64,
                _ => return Err(BcError::InvalidGeometry(format!("`{key}` must be a number"))),
            };
            if key == THROAT_AREA_KEY {
                throat = Some(T::lit(number));
            } else {
                let vessel: VesselId = key
                    .parse()
                    .map_err(|_| BcError::InvalidGeometry(format!("unknown key `{key}`")))?;
                areas.insert(vessel, T::lit(number));
            }
        }
        let throat = throat.ok_or_else(|| BcError::InvalidGeometry(format!("missing `{THROAT_AREA_KEY}`")))?;
        Self::new(areas, throat)
    }

    pub fn to_toml_string(&self) -> String {
        let mut out = String::new();
        for (v, a) in &self.areas {
            writeln!(out, "{v} = {:e}", a.to_f64_lossy()).expect("string write");
        }
        writeln!(out, "{THROAT_AREA_KEY} = {:e}", self.throat_area.to_f64_lossy()).expect("string write");
        out
    }
}

/// Mass flow in kg/s sampled on a time grid in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct MassFlowProfile<T> {
    times: Vec<T>,
    mass_flow: Vec<T>,
    pub vessel: VesselId,
}

impl<T: Real> MassFlowProfile<T> {
    pub fn new(times: Vec<T>, mass_flow: Vec<T>, vessel: VesselId) -> Result<Self, BcError> {
        let bad = |message: String| BcError::InvalidProfile { vessel, message };
        if times.len() != mass_flow.len() {
            return Err(bad(format!("{} times but {} values", times.len(), mass_flow.len())));
        }
        if times.is_empty() {
            return Err(bad("no samples".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(bad("times must be strictly increasing".into()));
        }
        if let Some(m) = mass_flow.iter().find(|m| !(**m >= T::zero() && m.is_finite())) {
            return Err(bad(format!("mass flow must be finite and non-negative, got {m}")));
        }
        Ok(Self {
            times,
            mass_flow,
            vessel,
        })
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn mass_flow(&self) -> &[T] {
        &self.mass_flow
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn peak(&self) -> T {
        self.mass_flow.iter().copied().fold(T::zero(), T::max)
    }
}

/// Plug flow: ṁ = ρ·A·v at every sample.
pub fn velocity_to_massflow<T: Real>(
    trace: &VelocityTrace<T>,
    geometry: &VesselGeometry<T>,
    fluid: &FluidProperties<T>,
) -> Result<MassFlowProfile<T>, BcError> {
    let area = geometry.area(trace.vessel)?;
    let flow = trace.velocities().iter().map(|&v| fluid.density * area * v).collect();
    MassFlowProfile::new(trace.times().to_vec(), flow, trace.vessel)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeakSnapshot<T> {
    pub t_peak: T,
    pub index: usize,
    pub values: BTreeMap<VesselId, T>,
}

/// Locates the inlet's peak (earliest on ties) and reads every profile at
/// that instant.
pub fn peak_snapshot<T: Real>(
    inlet: &MassFlowProfile<T>,
    all_profiles: &[MassFlowProfile<T>],
) -> Result<PeakSnapshot<T>, BcError> {
    let mut index = 0;
    for (i, &m) in inlet.mass_flow.iter().enumerate() {
        if m > inlet.mass_flow[index] {
            index = i;
        }
    }
    let mut values = BTreeMap::new();
    for p in all_profiles {
        if p.times != inlet.times {
            return Err(BcError::MismatchedGrid(p.vessel));
        }
        values.insert(p.vessel, p.mass_flow[index]);
    }
    Ok(PeakSnapshot {
        t_peak: inlet.times[index],
        index,
        values,
    })
}

/// Mass flow at the four outlets, in outlet order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutletFlows<T> {
    values: [T; 4],
}

impl<T: Real> OutletFlows<T> {
    pub fn new(values: [T; 4]) -> Result<Self, BcError> {
        for (vessel, value) in VesselId::OUTLETS.into_iter().zip(values) {
            if !(value >= T::zero() && value.is_finite()) {
                return Err(BcError::NegativeOutlet {
                    vessel,
                    value: value.to_f64_lossy(),
                });
            }
        }
        Ok(Self { values })
    }

    pub fn from_map(values: &BTreeMap<VesselId, T>) -> Result<Self, BcError> {
        let mut out = [T::zero(); 4];
        for (slot, vessel) in out.iter_mut().zip(VesselId::OUTLETS) {
            *slot = *values.get(&vessel).ok_or(BcError::MissingProfile(vessel))?;
        }
        Self::new(out)
    }

    pub fn get(&self, vessel: VesselId) -> Option<T> {
        VesselId::OUTLETS
            .iter()
            .position(|v| *v == vessel)
            .map(|i| self.values[i])
    }

    pub fn values(&self) -> [T; 4] {
        self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (VesselId, T)> + '_ {
        VesselId::OUTLETS.into_iter().zip(self.values)
    }
}

/// Inlet mass flow that conserves mass: the outlet sum, accumulated in
/// outlet order.
pub fn enforce_continuity<T: Real>(outlets: &OutletFlows<T>) -> T {
    outlets.values.iter().fold(T::zero(), |acc, &v| acc + v)
}

/// Peak values for a snapshot BC set: sample the predicted profiles at the
/// inlet's peak and return the outlet flows there.
pub fn snapshot_outlet_flows<T: Real>(
    profiles: &BTreeMap<VesselId, MassFlowProfile<T>>,
) -> Result<(PeakSnapshot<T>, OutletFlows<T>), BcError> {
    let inlet = profiles
        .get(&VesselId::AscendingAorta)
        .ok_or(BcError::MissingProfile(VesselId::AscendingAorta))?;
    let outlets: Vec<MassFlowProfile<T>> = VesselId::OUTLETS
        .iter()
        .map(|v| profiles.get(v).cloned().ok_or(BcError::MissingProfile(*v)))
        .collect::<Result<_, _>>()?;
    let snap = peak_snapshot(inlet, &outlets)?;
    let flows = OutletFlows::from_map(&snap.values)?;
    Ok((snap, flows))
}

/// Inlet profile replaced by the pointwise outlet sum.
pub fn continuity_inlet_profile<T: Real>(
    profiles: &BTreeMap<VesselId, MassFlowProfile<T>>,
) -> Result<MassFlowProfile<T>, BcError> {
    let first = profiles
        .get(&VesselId::OUTLETS[0])
        .ok_or(BcError::MissingProfile(VesselId::OUTLETS[0]))?;
    let mut sum = vec![T::zero(); first.len()];
    for v in VesselId::OUTLETS {
        let p = profiles.get(&v).ok_or(BcError::MissingProfile(v))?;
        if p.times != first.times {
            return Err(BcError::MismatchedGrid(v));
        }
        for (s, m) in sum.iter_mut().zip(&p.mass_flow) {
            *s += *m;
        }
    }
    MassFlowProfile::new(first.times.clone(), sum, VesselId::AscendingAorta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BcType {
    BC1,
    BC2,
    BC3,
    BC4,
}

impl BcType {
    pub const ALL: [BcType; 4] = [BcType::BC1, BcType::BC2, BcType::BC3, BcType::BC4];

    pub fn as_str(self) -> &'static str {
        match self {
            BcType::BC1 => "BC1",
            BcType::BC2 => "BC2",
            BcType::BC3 => "BC3",
            BcType::BC4 => "BC4",
        }
    }

    /// Boundary kind of `vessel` under this layout.
    pub fn kind(self, vessel: VesselId) -> BoundaryKind {
        use BoundaryKind::*;
        if vessel == VesselId::AscendingAorta {
            return MassFlow;
        }
        let dao = vessel == VesselId::DescendingAorta;
        match self {
            BcType::BC1 => ZeroPressure,
            BcType::BC2 => {
                if dao {
                    ZeroPressure
                } else {
                    MassFlow
                }
            }
            BcType::BC3 => ZeroPressureTargetMassFlow,
            BcType::BC4 => {
                if dao {
                    ZeroPressureTargetMassFlow
                } else {
                    MassFlow
                }
            }
        }
    }
}

impl fmt::Display for BcType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BcType {
    type Err = BcError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BcType::ALL
            .into_iter()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| BcError::UnknownBcType(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    MassFlow,
    ZeroPressure,
    ZeroPressureTargetMassFlow,
}

impl BoundaryKind {
    pub const ALL: [BoundaryKind; 3] = [
        BoundaryKind::MassFlow,
        BoundaryKind::ZeroPressure,
        BoundaryKind::ZeroPressureTargetMassFlow,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryKind::MassFlow => "mass_flow",
            BoundaryKind::ZeroPressure => "zero_pressure",
            BoundaryKind::ZeroPressureTargetMassFlow => "zero_pressure_target_mass_flow",
        }
    }

    pub fn units(self) -> &'static str {
        match self {
            BoundaryKind::MassFlow => "kg_per_s",
            BoundaryKind::ZeroPressure => "pa",
            BoundaryKind::ZeroPressureTargetMassFlow => "pa_kg_per_s",
        }
    }

    pub fn carries_value(self) -> bool {
        self != BoundaryKind::ZeroPressure
    }
}

impl fmt::Display for BoundaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundaryKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BoundaryKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown boundary kind `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Boundary<T> {
    pub vessel: VesselId,
    pub kind: BoundaryKind,
    /// kg/s, present exactly when the kind carries a mass flow.
    pub value: Option<T>,
}

/// Inlet and four outlets, in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryConditionSet<T> {
    pub bc_type: BcType,
    pub provenance: String,
    boundaries: [Boundary<T>; 5],
}

fn check_provenance(p: &str) -> Result<(), BcError> {
    if p.is_empty() || p.chars().any(|c| c.is_whitespace() || c == ',') {
        return Err(BcError::InvalidProvenance(p.to_string()));
    }
    Ok(())
}

impl<T: Real> BoundaryConditionSet<T> {
    pub fn boundaries(&self) -> &[Boundary<T>; 5] {
        &self.boundaries
    }

    pub fn inlet(&self) -> &Boundary<T> {
        &self.boundaries[0]
    }

    pub fn outlets(&self) -> &[Boundary<T>] {
        &self.boundaries[1..]
    }

    pub fn boundary(&self, vessel: VesselId) -> Option<&Boundary<T>> {
        self.boundaries.iter().find(|b| b.vessel == vessel)
    }

    pub fn value(&self, vessel: VesselId) -> Option<T> {
        self.boundary(vessel).and_then(|b| b.value)
    }

    /// Numeric boundaries in file order.
    pub fn valued_vessels(&self) -> Vec<VesselId> {
        self.boundaries
            .iter()
            .filter(|b| b.value.is_some())
            .map(|b| b.vessel)
            .collect()
    }
}

/// Builds one BC layout from continuity-consistent outlet flows; the inlet
/// value is their sum.
pub fn assemble_bc_set<T: Real>(
    bc_type: BcType,
    outlets: &OutletFlows<T>,
    provenance: &str,
) -> Result<BoundaryConditionSet<T>, BcError> {
    check_provenance(provenance)?;
    let inlet = enforce_continuity(outlets);
    let make = |vessel: VesselId, flow: T| {
        let kind = bc_type.kind(vessel);
        Boundary {
            vessel,
            kind,
            value: kind.carries_value().then_some(flow),
        }
    };
    let o = outlets.values;
    Ok(BoundaryConditionSet {
        bc_type,
        provenance: provenance.to_string(),
        boundaries: [
            make(VesselId::AscendingAorta, inlet),
            make(VesselId::OUTLETS[0], o[0]),
            make(VesselId::OUTLETS[1], o[1]),
            make(VesselId::OUTLETS[2], o[2]),
            make(VesselId::OUTLETS[3], o[3]),
        ],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportMode {
    Snapshot,
    Transient,
}

impl ExportMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ExportMode::Snapshot => "snapshot",
            ExportMode::Transient => "transient",
        }
    }
}

impl fmt::Display for ExportMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExportMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "snapshot" => Ok(ExportMode::Snapshot),
            "transient" => Ok(ExportMode::Transient),
            other => Err(format!("unknown bc mode `{other}` (expected snapshot or transient)")),
        }
    }
}

/// Renders a BC file. Transient mode also writes the full series of every
/// numeric boundary after its peak value.
pub fn export_bc<T: Real>(
    set: &BoundaryConditionSet<T>,
    mode: ExportMode,
    profiles: Option<&BTreeMap<VesselId, MassFlowProfile<T>>>,
) -> Result<String, BcError> {
    check_provenance(&set.provenance)?;
    let mut out = String::new();
    let w = |out: &mut String, args: fmt::Arguments<'_>| {
        out.write_fmt(args).expect("string write");
        out.push('\n');
    };
    w(
        &mut out,
        format_args!("{BC_FILE_MAGIC} {BC_FILE_VERSION} {} {}", set.bc_type, set.provenance),
    );
    for b in &set.boundaries {
        w(
            &mut out,
            format_args!("boundary,{},{},{}", b.vessel, b.kind, b.kind.units()),
        );
        let Some(value) = b.value else { continue };
        w(&mut out, format_args!("value,{},{}", b.vessel, value));
        if mode == ExportMode::Transient {
            let p = profiles
                .and_then(|m| m.get(&b.vessel))
                .ok_or(BcError::TransientProfileMissing(b.vessel))?;
            for (t, m) in p.times.iter().zip(&p.mass_flow) {
                w(&mut out, format_args!("point,{},{},{}", b.vessel, t, m));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedBc<T> {
    pub set: BoundaryConditionSet<T>,
    pub mode: ExportMode,
    pub profiles: BTreeMap<VesselId, MassFlowProfile<T>>,
}

pub fn parse_bc<T: Real>(text: &str) -> Result<ParsedBc<T>, BcError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let err = |line: usize, message: String| BcError::Parse { line, message };
    let (_, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let head: Vec<&str> = header.split(' ').collect();
    if head.len() != 4 || head[0] != BC_FILE_MAGIC || head[1] != BC_FILE_VERSION {
        return Err(err(1, format!("bad header `{header}`")));
    }
    let bc_type: BcType = head[2].parse()?;
    let provenance = head[3].to_string();
    check_provenance(&provenance)?;

    let mut boundaries: Vec<Boundary<T>> = Vec::new();
    let mut series: BTreeMap<VesselId, (Vec<T>, Vec<T>)> = BTreeMap::new();
    for (n, line) in lines {
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        let vessel = |s: &str| -> Result<VesselId, BcError> { s.parse().map_err(|e| err(n, format!("{e}"))) };
        let number = |s: &str| -> Result<T, BcError> { s.parse().map_err(|_| err(n, format!("bad number `{s}`"))) };
        let current = |boundaries: &mut Vec<Boundary<T>>, v: VesselId| -> Result<usize, BcError> {
            match boundaries.last() {
                Some(b) if b.vessel == v => Ok(boundaries.len() - 1),
                _ => Err(err(n, format!("record for `{v}` outside its boundary block"))),
            }
        };
        match (cells[0], cells.len()) {
            ("boundary", 4) => {
                let v = vessel(cells[1])?;
                let kind: BoundaryKind = cells[2].parse().map_err(|e| err(n, e))?;
                if cells[3] != kind.units() {
                    return Err(err(n, format!("units `{}` do not match kind `{kind}`", cells[3])));
                }
                boundaries.push(Boundary {
                    vessel: v,
                    kind,
                    value: None,
                });
            }
            ("value", 3) => {
                let v = vessel(cells[1])?;
                let i = current(&mut boundaries, v)?;
                if boundaries[i].value.is_some() {
                    return Err(err(n, format!("duplicate value for `{v}`")));
                }
                boundaries[i].value = Some(number(cells[2])?);
            }
            ("point", 4) => {
                let v = vessel(cells[1])?;
                current(&mut boundaries, v)?;
                let entry = series.entry(v).or_default();
                entry.0.push(number(cells[2])?);
                entry.1.push(number(cells[3])?);
            }
            _ => return Err(err(n, format!("unrecognised record `{line}`"))),
        }
    }

    let order: Vec<VesselId> = boundaries.iter().map(|b| b.vessel).collect();
    if order != VesselId::BOUNDARIES {
        return Err(err(
            0,
            format!("expected boundaries {:?}, found {order:?}", VesselId::BOUNDARIES),
        ));
    }
    for b in &boundaries {
        if b.kind != bc_type.kind(b.vessel) {
            return Err(err(
                0,
                format!(
                    "`{}` is `{}` but {bc_type} requires `{}`",
                    b.vessel,
                    b.kind,
                    bc_type.kind(b.vessel)
                ),
            ));
        }
        if b.kind.carries_value() != b.value.is_some() {
            return Err(err(
                0,
                format!("value presence for `{}` does not match kind `{}`", b.vessel, b.kind),
            ));
        }
    }
    let mode = if series.is_empty() {
        ExportMode::Snapshot
    } else {
        ExportMode::Transient
    };
    let mut profiles = BTreeMap::new();
    for b in &boundaries {
        match (series.remove(&b.vessel), b.value.is_some(), mode) {
            (Some((t, m)), true, _) => {
                profiles.insert(b.vessel, MassFlowProfile::new(t, m, b.vessel)?);
            }
            (None, true, ExportMode::Transient) => {
                return Err(err(0, format!("transient file lacks points for `{}`", b.vessel)));
            }
            _ => {}
        }
    }
    let boundaries: [Boundary<T>; 5] = boundaries.try_into().expect("five boundaries checked above");
    Ok(ParsedBc {
        set: BoundaryConditionSet {
            bc_type,
            provenance,
            boundaries,
        },
        mode,
        profiles,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deviation<T> {
    pub mean: T,
    pub mean_abs_deviation: T,
    pub percent: T,
    pub count: usize,
}

/// Mean absolute deviation from the mean, as a percentage of the mean.
pub fn deviation_percent<T: Real>(vessel: VesselId, values: &[T]) -> Result<Deviation<T>, BcError> {
    if values.len() < 2 {
        return Err(BcError::TooFewValues {
            vessel,
            found: values.len(),
        });
    }
    let m = mean(values);
    if m == T::zero() {
        return Err(BcError::ZeroMean(vessel));
    }
    let abs_dev: Vec<T> = values.iter().map(|v| (*v - m).abs()).collect();
    let mad = mean(&abs_dev);
    Ok(Deviation {
        mean: m,
        mean_abs_deviation: mad,
        percent: T::lit(100.0) * mad / m.abs(),
        count: values.len(),
    })
}

/// Per-vessel spread of numeric BC values across models. Vessels with
/// fewer than two numeric values are omitted.
pub fn bc_deviation_stats<T: Real>(
    sets: &[BoundaryConditionSet<T>],
) -> Result<BTreeMap<VesselId, Deviation<T>>, BcError> {
    let mut out = BTreeMap::new();
    for vessel in VesselId::BOUNDARIES {
        let values: Vec<T> = sets.iter().filter_map(|s| s.value(vessel)).collect();
        if values.len() >= 2 {
            out.insert(vessel, deviation_percent(vessel, &values)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::CaseId;

    fn profile(vessel: VesselId, m: &[f64]) -> MassFlowProfile<f64> {
        let times = (0..m.len()).map(|i| i as f64 * 0.1).collect();
        MassFlowProfile::new(times, m.to_vec(), vessel).unwrap()
    }

    #[test]
    fn plug_flow_mass_flow() {
        let times = crate::trace::uniform_times(0.5, 200);
        let trace = VelocityTrace::new(
            times,
            vec![1.0; 200],
            VesselId::AscendingAorta,
            CaseId::PreIntervention,
            120.0,
        )
        .unwrap();
        let mut areas = VesselGeometry::<f64>::synthetic().areas().clone();
        areas.insert(VesselId::AscendingAorta, 2e-4);
        let geo = VesselGeometry::new(areas, 1e-5).unwrap();
        let p = velocity_to_massflow(&trace, &geo, &FluidProperties::default()).unwrap();
        assert!((p.mass_flow()[7] - 0.212).abs() < 1e-15);
    }

    #[test]
    fn geometry_validation_and_toml() {
        let geo = VesselGeometry::<f64>::synthetic();
        let back = VesselGeometry::from_toml_str(&geo.to_toml_string()).unwrap();
        assert_eq!(back, geo);
        let err = VesselGeometry::<f64>::from_toml_str("ascending_aorta = 1e-4\ncoarctation_throat_area_m2 = 2e-4\n");
        assert!(matches!(err, Err(BcError::InvalidGeometry(_))));
        let err = VesselGeometry::<f64>::from_toml_str("aorta = 1e-4\ncoarctation_throat_area_m2 = 2e-5\n");
        assert!(err.unwrap_err().to_string().contains("aorta"));
        let mut areas = BTreeMap::new();
        areas.insert(VesselId::AscendingAorta, 1e-4);
        let geo = VesselGeometry::new(areas, 1e-5).unwrap();
        assert_eq!(
            geo.area(VesselId::DescendingAorta),
            Err(BcError::MissingArea(VesselId::DescendingAorta))
        );
    }

    #[test]
    fn snapshot_examples() {
        let inlet = profile(VesselId::AscendingAorta, &[0.0, 2.0, 1.0]);
        let out = profile(VesselId::InnominateArtery, &[0.0, 0.5, 0.4]);
        let s = peak_snapshot(&inlet, &[out]).unwrap();
        assert_eq!(s.t_peak, 0.1);
        assert_eq!(s.values[&VesselId::InnominateArtery], 0.5);
        let flat = profile(VesselId::AscendingAorta, &[1.0, 1.0, 1.0]);
        assert_eq!(peak_snapshot(&flat, &[]).unwrap().t_peak, 0.0);
        let short = profile(VesselId::LeftSubclavian, &[1.0, 1.0]);
        assert_eq!(
            peak_snapshot(&flat, &[short]),
            Err(BcError::MismatchedGrid(VesselId::LeftSubclavian))
        );
    }

    #[test]
    fn continuity_examples() {
        let o = OutletFlows::new([0.1_f64, 0.05, 0.05, 0.2]).unwrap();
        assert!((enforce_continuity(&o) - 0.4).abs() < 1e-15);
        assert_eq!(enforce_continuity(&OutletFlows::new([0.0; 4]).unwrap()), 0.0);
        assert!(matches!(
            OutletFlows::new([0.1, -0.01, 0.0, 0.0]),
            Err(BcError::NegativeOutlet { .. })
        ));
    }

    #[test]
    fn table_layouts() {
        use BoundaryKind::*;
        let rows = [
            (BcType::BC1, [ZeroPressure, ZeroPressure, ZeroPressure, ZeroPressure]),
            (BcType::BC2, [MassFlow, MassFlow, MassFlow, ZeroPressure]),
            (BcType::BC3, [ZeroPressureTargetMassFlow; 4]),
            (BcType::BC4, [MassFlow, MassFlow, MassFlow, ZeroPressureTargetMassFlow]),
        ];
        let o = OutletFlows::new([0.1_f64, 0.05, 0.05, 0.2]).unwrap();
        for (bc, kinds) in rows {
            let set = assemble_bc_set(bc, &o, "knn").unwrap();
            assert_eq!(set.inlet().kind, MassFlow);
            assert!(set.inlet().value.is_some());
            let got: Vec<BoundaryKind> = set.outlets().iter().map(|b| b.kind).collect();
            assert_eq!(got, kinds);
            for b in set.outlets() {
                assert_eq!(b.value.is_some(), b.kind != ZeroPressure);
            }
        }
        assert!(matches!("BC5".parse::<BcType>(), Err(BcError::UnknownBcType(_))));
        assert!(assemble_bc_set(BcType::BC1, &o, "two words").is_err());
    }

    #[test]
    fn snapshot_export_structure_and_round_trip() {
        let o = OutletFlows::new([0.1_f64, 0.05, 0.05, 0.2]).unwrap();
        let set = assemble_bc_set(BcType::BC1, &o, "not_adjusted").unwrap();
        let text = export_bc(&set, ExportMode::Snapshot, None).unwrap();
        assert!(text.starts_with(
            "#coarcta-bc v1 BC1 not_adjusted\nboundary,ascending_aorta,mass_flow,kg_per_s\nvalue,ascending_aorta,"
        ));
        assert_eq!(text.lines().filter(|l| l.starts_with("boundary,")).count(), 5);
        assert_eq!(text.lines().filter(|l| l.starts_with("value,")).count(), 1);
        let parsed = parse_bc::<f64>(&text).unwrap();
        assert_eq!(parsed.set, set);
        assert_eq!(parsed.mode, ExportMode::Snapshot);
    }

    #[test]
    fn transient_export_rows() {
        let mut profiles = BTreeMap::new();
        for (i, v) in VesselId::OUTLETS.into_iter().enumerate() {
            let m: Vec<f64> = (0..200).map(|k| (k as f64 * 0.01 + i as f64).sin().abs()).collect();
            profiles.insert(v, profile(v, &m));
        }
        profiles.insert(VesselId::AscendingAorta, continuity_inlet_profile(&profiles).unwrap());
        let (_, flows) = snapshot_outlet_flows(&profiles).unwrap();
        let set = assemble_bc_set(BcType::BC2, &flows, "knn").unwrap();
        let text = export_bc(&set, ExportMode::Transient, Some(&profiles)).unwrap();
        for v in [VesselId::AscendingAorta, VesselId::InnominateArtery] {
            let prefix = format!("point,{v},");
            assert_eq!(text.lines().filter(|l| l.starts_with(&prefix)).count(), 200);
        }
        assert_eq!(
            text.lines()
                .filter(|l| l.starts_with("point,descending_aorta,"))
                .count(),
            0
        );
        let parsed = parse_bc::<f64>(&text).unwrap();
        assert_eq!(parsed.set, set);
        assert_eq!(parsed.mode, ExportMode::Transient);
        assert_eq!(
            parsed.profiles[&VesselId::LeftSubclavian],
            profiles[&VesselId::LeftSubclavian]
        );
        assert!(matches!(
            export_bc(&set, ExportMode::Transient, None),
            Err(BcError::TransientProfileMissing(VesselId::AscendingAorta))
        ));
    }

    #[test]
    fn parse_rejects_tampered_files() {
        let o = OutletFlows::new([0.1_f64, 0.05, 0.05, 0.2]).unwrap();
        let text = export_bc(
            &assemble_bc_set(BcType::BC2, &o, "knn").unwrap(),
            ExportMode::Snapshot,
            None,
        )
        .unwrap();
        assert!(parse_bc::<f64>(&text.replace("BC2", "BC3")).is_err());
        assert!(parse_bc::<f64>(&text.replace("kg_per_s", "g_per_s")).is_err());
        assert!(parse_bc::<f64>(&text.replace("v1", "v2")).is_err());
    }

    #[test]
    fn deviation_examples() {
        let d = deviation_percent(VesselId::AscendingAorta, &[0.9_f64, 1.1]).unwrap();
        assert!((d.percent - 10.0).abs() < 1e-12);
        assert_eq!(
            deviation_percent(VesselId::AscendingAorta, &[0.3, 0.3])
                .unwrap()
                .percent,
            0.0
        );
        assert_eq!(
            deviation_percent(VesselId::AscendingAorta, &[0.0, 0.0]),
            Err(BcError::ZeroMean(VesselId::AscendingAorta))
        );
        let a = assemble_bc_set(BcType::BC1, &OutletFlows::new([0.1_f64, 0.1, 0.1, 0.1]).unwrap(), "a").unwrap();
        let b = assemble_bc_set(BcType::BC1, &OutletFlows::new([0.1, 0.1, 0.1, 0.3]).unwrap(), "b").unwrap();
        let stats = bc_deviation_stats(&[a, b]).unwrap();
        assert_eq!(stats.len(), 1);
        assert!((stats[&VesselId::AscendingAorta].percent - 0.1 / 0.5 * 100.0).abs() < 1e-9);
    }
}
