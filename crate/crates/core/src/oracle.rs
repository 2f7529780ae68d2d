//! Continuity surrogate for the flow solve: peak coarctation velocity from
//! a BC set, clinical pressure drop and error against a measurement.

use std::fmt::Write as _;

use thiserror::Error;

use crate::bc::{BcError, BcType, BoundaryConditionSet, FluidProperties, OutletFlows, VesselGeometry};
use crate::ids::VesselId;
use crate::scalar::Real;

/// Pressure drop above which intervention is usually indicated, mmHg.
pub const INTERVENTION_THRESHOLD_MMHG: f64 = 20.0;
pub const DEFAULT_MEASURED_VELOCITY: f64 = 3.49;
pub const ORACLE_HEADER: &str = "provenance,bc_type,v_max_m_per_s,dp_mmHg,percent_error,continuity_residual_kg_per_s";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("{bc_type} set `{provenance}` has no descending aorta flow and no reference outlet flows")]
    MissingDaoFlow { bc_type: BcType, provenance: String },
    #[error("measured velocity must be positive, got {0}")]
    NonPositiveMeasurement(f64),
    #[error("velocity must be non-negative, got {0}")]
    NegativeVelocity(f64),
    #[error(transparent)]
    Bc(#[from] BcError),
}

/// v = ṁ / (ρ·A_throat)
pub fn coarct_velocity_from_flow<T: Real>(dao_flow: T, geometry: &VesselGeometry<T>, fluid: &FluidProperties<T>) -> T {
    dao_flow / (fluid.density * geometry.throat_area())
}

/// Mass flow through the coarctation: the set's own descending aorta value,
/// else the reference flows, else the inlet minus the arch branches.
pub fn dao_flow<T: Real>(bc: &BoundaryConditionSet<T>, reference: Option<&OutletFlows<T>>) -> Result<T, OracleError> {
    if let Some(v) = bc.value(VesselId::DescendingAorta) {
        return Ok(v);
    }
    if let Some(v) = reference.and_then(|r| r.get(VesselId::DescendingAorta)) {
        return Ok(v);
    }
    let arch: Option<Vec<T>> = VesselId::OUTLETS
        .iter()
        .filter(|v| v.is_arch_branch())
        .map(|v| bc.value(*v))
        .collect();
    match (bc.inlet().value, arch) {
        (Some(inlet), Some(arch)) => Ok((inlet - arch.into_iter().fold(T::zero(), |a, b| a + b)).max(T::zero())),
        _ => Err(OracleError::MissingDaoFlow {
            bc_type: bc.bc_type,
            provenance: bc.provenance.clone(),
        }),
    }
}

pub fn coarct_velocity<T: Real>(
    bc: &BoundaryConditionSet<T>,
    geometry: &VesselGeometry<T>,
    fluid: &FluidProperties<T>,
    reference: Option<&OutletFlows<T>>,
) -> Result<T, OracleError> {
    Ok(coarct_velocity_from_flow(dao_flow(bc, reference)?, geometry, fluid))
}

/// ΔP = 4·v², v in m/s, ΔP in mmHg.
pub fn simplified_bernoulli<T: Real>(v_max: T) -> Result<T, OracleError> {
    if !(v_max >= T::zero()) {
        return Err(OracleError::NegativeVelocity(v_max.to_f64_lossy()));
    }
    Ok(T::lit(4.0) * v_max * v_max)
}

pub fn exceeds_intervention_threshold<T: Real>(pressure_drop: T) -> bool {
    pressure_drop > T::lit(INTERVENTION_THRESHOLD_MMHG)
}

pub fn percent_error<T: Real>(simulated: T, measured: T) -> Result<T, OracleError> {
    if !(measured > T::zero()) {
        return Err(OracleError::NonPositiveMeasurement(measured.to_f64_lossy()));
    }
    Ok(T::lit(100.0) * (simulated - measured).abs() / measured)
}

/// Inlet minus the outlet sum, using reference flows for outlets that carry
/// no value and the derived coarctation flow as a last resort.
pub fn continuity_residual<T: Real>(
    bc: &BoundaryConditionSet<T>,
    reference: Option<&OutletFlows<T>>,
) -> Result<T, OracleError> {
    let inlet = bc.inlet().value.expect("inlet always carries a mass flow");
    let mut sum = T::zero();
    for b in bc.outlets() {
        let v = match (b.value, reference.and_then(|r| r.get(b.vessel))) {
            (Some(v), _) | (None, Some(v)) => v,
            (None, None) if b.vessel == VesselId::DescendingAorta => dao_flow(bc, None)?,
            (None, None) => {
                return Err(OracleError::MissingDaoFlow {
                    bc_type: bc.bc_type,
                    provenance: bc.provenance.clone(),
                })
            }
        };
        sum += v;
    }
    Ok(inlet - sum)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport<T> {
    pub provenance: String,
    pub bc_type: BcType,
    pub peak_coarctation_velocity: T,
    pub pressure_drop: T,
    pub percent_error_vs_measured: T,
    pub continuity_residual: T,
}

impl<T: Real> OracleReport<T> {
    pub fn flags_intervention(&self) -> bool {
        exceeds_intervention_threshold(self.pressure_drop)
    }
}

pub fn evaluate_bc_set<T: Real>(
    bc: &BoundaryConditionSet<T>,
    geometry: &VesselGeometry<T>,
    fluid: &FluidProperties<T>,
    measured_velocity: T,
    reference: Option<&OutletFlows<T>>,
) -> Result<OracleReport<T>, OracleError> {
    let v = coarct_velocity(bc, geometry, fluid, reference)?;
    Ok(OracleReport {
        provenance: bc.provenance.clone(),
        bc_type: bc.bc_type,
        peak_coarctation_velocity: v,
        pressure_drop: simplified_bernoulli(v)?,
        percent_error_vs_measured: percent_error(v, measured_velocity)?,
        continuity_residual: continuity_residual(bc, reference)?,
    })
}

pub fn oracle_reports_to_csv<T: Real>(reports: &[OracleReport<T>]) -> String {
    let mut out = String::from(ORACLE_HEADER);
    out.push('\n');
    for r in reports {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.provenance,
            r.bc_type,
            r.peak_coarctation_velocity,
            r.pressure_drop,
            r.percent_error_vs_measured,
            r.continuity_residual
        )
        .expect("string write");
    }
    out
}
