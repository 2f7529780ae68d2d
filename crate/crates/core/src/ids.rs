//! Vessel and intervention-case identifiers.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown {kind} name `{name}`")]
pub struct UnknownName {
    pub kind: &'static str,
    pub name: String,
}

/// Measurement site along the aortic arch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VesselId {
    AscendingAorta,
    InnominateArtery,
    LeftCommonCarotid,
    LeftSubclavian,
    Coarctation,
    DescendingAorta,
}

impl VesselId {
    pub const ALL: [VesselId; 6] = [
        VesselId::AscendingAorta,
        VesselId::InnominateArtery,
        VesselId::LeftCommonCarotid,
        VesselId::LeftSubclavian,
        VesselId::Coarctation,
        VesselId::DescendingAorta,
    ];

    /// Outlets in the conventional order: outlet 1 to outlet 4.
    pub const OUTLETS: [VesselId; 4] = [
        VesselId::InnominateArtery,
        VesselId::LeftCommonCarotid,
        VesselId::LeftSubclavian,
        VesselId::DescendingAorta,
    ];

    /// Inlet followed by the four outlets.
    pub const BOUNDARIES: [VesselId; 5] = [
        VesselId::AscendingAorta,
        VesselId::InnominateArtery,
        VesselId::LeftCommonCarotid,
        VesselId::LeftSubclavian,
        VesselId::DescendingAorta,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VesselId::AscendingAorta => "ascending_aorta",
            VesselId::InnominateArtery => "innominate_artery",
            VesselId::LeftCommonCarotid => "left_common_carotid",
            VesselId::LeftSubclavian => "left_subclavian",
            VesselId::Coarctation => "coarctation",
            VesselId::DescendingAorta => "descending_aorta",
        }
    }

    pub fn is_arch_branch(self) -> bool {
        matches!(
            self,
            VesselId::InnominateArtery | VesselId::LeftCommonCarotid | VesselId::LeftSubclavian
        )
    }
}

impl fmt::Display for VesselId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VesselId {
    type Err = UnknownName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        VesselId::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| UnknownName {
                kind: "vessel",
                name: s.to_string(),
            })
    }
}

/// Whether a measurement was taken before or after the intervention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseId {
    PreIntervention,
    PostIntervention,
}

impl CaseId {
    pub const ALL: [CaseId; 2] = [CaseId::PreIntervention, CaseId::PostIntervention];

    pub fn as_str(self) -> &'static str {
        match self {
            CaseId::PreIntervention => "pre_intervention",
            CaseId::PostIntervention => "post_intervention",
        }
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CaseId {
    type Err = UnknownName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CaseId::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| UnknownName {
                kind: "case",
                name: s.to_string(),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for v in VesselId::ALL {
            assert_eq!(v.as_str().parse::<VesselId>().unwrap(), v);
        }
        for c in CaseId::ALL {
            assert_eq!(c.to_string().parse::<CaseId>().unwrap(), c);
        }
        assert!("aorta".parse::<VesselId>().is_err());
    }

    #[test]
    fn serde_uses_snake_case() {
        let s = serde_json::to_string(&VesselId::LeftCommonCarotid).unwrap();
        assert_eq!(s, "\"left_common_carotid\"");
    }
}
