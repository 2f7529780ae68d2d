use std::collections::BTreeMap;

use coarcta_core::bc::{
    assemble_bc_set, bc_deviation_stats, continuity_inlet_profile, deviation_percent, enforce_continuity, export_bc,
    parse_bc, peak_snapshot, snapshot_outlet_flows, velocity_to_massflow, BcType, ExportMode, FluidProperties,
    MassFlowProfile, OutletFlows, VesselGeometry,
};
use coarcta_core::oracle::{
    coarct_velocity, coarct_velocity_from_flow, continuity_residual, dao_flow, evaluate_bc_set, percent_error,
    simplified_bernoulli,
};
use coarcta_core::trace::{uniform_times, VelocityTrace};
use coarcta_core::{CaseId, VesselId};
use proptest::prelude::*;

const STEPS: usize = 200;

fn flows() -> impl Strategy<Value = [f64; 4]> {
    prop::array::uniform4(0.0f64..0.5)
}

fn series() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..3.0, STEPS)
}

fn trace(vessel: VesselId, v: Vec<f64>) -> VelocityTrace<f64> {
    VelocityTrace::new(uniform_times(0.44, STEPS), v, vessel, CaseId::PreIntervention, 135.6).unwrap()
}

fn profile(vessel: VesselId, m: Vec<f64>) -> MassFlowProfile<f64> {
    MassFlowProfile::new(uniform_times(0.44, m.len()), m, vessel).unwrap()
}

fn profiles(series: &[Vec<f64>]) -> BTreeMap<VesselId, MassFlowProfile<f64>> {
    VesselId::BOUNDARIES
        .into_iter()
        .zip(series)
        .map(|(v, m)| (v, profile(v, m.clone())))
        .collect()
}

fn geometry(throat: f64) -> VesselGeometry<f64> {
    let mut areas = VesselGeometry::<f64>::synthetic().areas().clone();
    areas.insert(VesselId::AscendingAorta, 1e-3);
    VesselGeometry::new(areas, throat).unwrap()
}

proptest! {
    #[test]
    fn mass_flow_is_linear_in_velocity(a in series(), b in series(), s in 0.0f64..10.0) {
        let geo = VesselGeometry::synthetic();
        let fluid = FluidProperties::default();
        let vessel = VesselId::DescendingAorta;
        let combined: Vec<f64> = a.iter().zip(&b).map(|(x, y)| s * x + y).collect();
        let ma = velocity_to_massflow(&trace(vessel, a), &geo, &fluid).unwrap();
        let mb = velocity_to_massflow(&trace(vessel, b), &geo, &fluid).unwrap();
        let mc = velocity_to_massflow(&trace(vessel, combined), &geo, &fluid).unwrap();
        for i in 0..STEPS {
            let want = s * ma.mass_flow()[i] + mb.mass_flow()[i];
            prop_assert!((mc.mass_flow()[i] - want).abs() <= 1e-12 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn peak_time_survives_monotone_rescaling(m in series(), s in 0.01f64..100.0, c in 0.0f64..5.0) {
        let inlet = profile(VesselId::AscendingAorta, m.clone());
        let moved = profile(VesselId::AscendingAorta, m.iter().map(|v| s * v.powi(3) + c).collect());
        let a = peak_snapshot(&inlet, std::slice::from_ref(&inlet)).unwrap();
        let b = peak_snapshot(&moved, std::slice::from_ref(&moved)).unwrap();
        prop_assert_eq!(a.t_peak, b.t_peak);
        prop_assert_eq!(a.index, b.index);
        let first_max = m.iter().position(|v| *v == m.iter().copied().fold(f64::MIN, f64::max)).unwrap();
        prop_assert_eq!(a.index, first_max);
    }

    #[test]
    fn snapshot_reads_every_outlet_at_the_inlet_peak(s in prop::collection::vec(series(), 5)) {
        let map = profiles(&s);
        let (snap, flows) = snapshot_outlet_flows(&map).unwrap();
        for (vessel, value) in flows.iter() {
            prop_assert_eq!(value, s[VesselId::BOUNDARIES.iter().position(|v| *v == vessel).unwrap()][snap.index]);
        }
    }

    #[test]
    fn continuity_holds_for_every_bc_type(o in flows()) {
        let flows = OutletFlows::new(o).unwrap();
        let inlet = ((o[0] + o[1]) + o[2]) + o[3];
        prop_assert_eq!(enforce_continuity(&flows), inlet);
        for bc in BcType::ALL {
            let set = assemble_bc_set(bc, &flows, "p").unwrap();
            prop_assert_eq!(set.inlet().value, Some(inlet));
            prop_assert_eq!(continuity_residual(&set, Some(&flows)).unwrap(), 0.0);
        }
    }

    #[test]
    fn inlet_profile_is_the_pointwise_outlet_sum(s in prop::collection::vec(series(), 5)) {
        let map = profiles(&s);
        let inlet = continuity_inlet_profile(&map).unwrap();
        for (i, m) in inlet.mass_flow().iter().enumerate() {
            prop_assert_eq!(*m, ((s[1][i] + s[2][i]) + s[3][i]) + s[4][i]);
        }
    }

    #[test]
    fn export_parse_is_lossless(o in flows(), s in prop::collection::vec(series(), 5), transient in any::<bool>()) {
        let flows = OutletFlows::new(o).unwrap();
        let mode = if transient { ExportMode::Transient } else { ExportMode::Snapshot };
        let map = profiles(&s);
        for bc in BcType::ALL {
            let set = assemble_bc_set(bc, &flows, "random_forest").unwrap();
            let text = export_bc(&set, mode, Some(&map)).unwrap();
            let parsed = parse_bc::<f64>(&text).unwrap();
            prop_assert_eq!(&parsed.set, &set);
            prop_assert_eq!(parsed.mode, mode);
            prop_assert_eq!(export_bc(&parsed.set, mode, Some(&parsed.profiles)).unwrap(), text);
        }
    }

    #[test]
    fn velocity_is_linear_in_flow_and_inverse_in_area(q in 0.0f64..1.0, s in 0.1f64..10.0, throat in 1e-6f64..1e-4) {
        let fluid = FluidProperties::default();
        let v = coarct_velocity_from_flow(q, &geometry(throat), &fluid);
        prop_assert!((coarct_velocity_from_flow(s * q, &geometry(throat), &fluid) - s * v).abs() <= 1e-12 * (1.0 + s * v));
        prop_assert!((coarct_velocity_from_flow(q, &geometry(s * throat), &fluid) - v / s).abs() <= 1e-12 * (1.0 + v / s));
    }

    #[test]
    fn bernoulli_is_homogeneous_of_degree_two(v in 0.0f64..10.0, s in 0.0f64..10.0) {
        let dp = simplified_bernoulli(v).unwrap();
        prop_assert!((simplified_bernoulli(s * v).unwrap() - s * s * dp).abs() <= 1e-12 * (1.0 + s * s * dp));
        prop_assert!(dp >= 0.0);
    }

    #[test]
    fn percent_error_is_scale_invariant(a in 0.0f64..10.0, m in 0.1f64..10.0, s in 0.1f64..10.0) {
        let e = percent_error(a, m).unwrap();
        prop_assert!((percent_error(s * a, s * m).unwrap() - e).abs() <= 1e-9 * (1.0 + e));
        prop_assert!(e >= 0.0);
    }

    #[test]
    fn dao_flow_is_the_same_for_every_bc_type(o in flows()) {
        let flows = OutletFlows::new(o).unwrap();
        let geo = geometry(1.8e-5);
        let fluid = FluidProperties::default();
        for bc in BcType::ALL {
            let set = assemble_bc_set(bc, &flows, "p").unwrap();
            prop_assert_eq!(dao_flow(&set, Some(&flows)).unwrap(), o[3]);
            let report = evaluate_bc_set(&set, &geo, &fluid, 3.49, Some(&flows)).unwrap();
            prop_assert_eq!(report.peak_coarctation_velocity, coarct_velocity(&set, &geo, &fluid, Some(&flows)).unwrap());
        }
    }

    #[test]
    fn deviation_is_scale_invariant_and_zero_when_equal(v in prop::collection::vec(0.01f64..1.0, 2..8), s in 0.1f64..10.0) {
        let d = deviation_percent(VesselId::DescendingAorta, &v).unwrap();
        let scaled: Vec<f64> = v.iter().map(|x| s * x).collect();
        let ds = deviation_percent(VesselId::DescendingAorta, &scaled).unwrap();
        prop_assert!((d.percent - ds.percent).abs() <= 1e-9 * (1.0 + d.percent));
        let flat = vec![v[0]; v.len()];
        prop_assert!(deviation_percent(VesselId::DescendingAorta, &flat).unwrap().percent < 1e-12);
    }
}

#[test]
fn deviation_stats_skip_boundaries_without_values() {
    let a = OutletFlows::<f64>::new([0.1, 0.02, 0.03, 0.2]).unwrap();
    let b = OutletFlows::new([0.12, 0.02, 0.035, 0.25]).unwrap();
    let sets = [
        assemble_bc_set(BcType::BC2, &a, "a").unwrap(),
        assemble_bc_set(BcType::BC2, &b, "b").unwrap(),
    ];
    let stats = bc_deviation_stats(&sets).unwrap();
    assert!(!stats.contains_key(&VesselId::DescendingAorta));
    assert_eq!(stats.len(), 4);
    assert_eq!(stats[&VesselId::LeftCommonCarotid].percent, 0.0);
    let inn = stats[&VesselId::InnominateArtery];
    assert!((inn.percent - 100.0 * 0.01 / 0.11).abs() < 1e-9);
}

#[test]
fn malformed_bc_files_are_rejected() {
    let flows = OutletFlows::<f64>::new([0.1, 0.02, 0.03, 0.2]).unwrap();
    let good = export_bc(
        &assemble_bc_set(BcType::BC3, &flows, "knn").unwrap(),
        ExportMode::Snapshot,
        None,
    )
    .unwrap();
    assert!(parse_bc::<f64>(&good).is_ok());
    let cases = [
        good.replacen("v1", "v9", 1),
        good.replacen("BC3", "BC7", 1),
        good.lines()
            .filter(|l| !l.starts_with("value,descending_aorta"))
            .collect::<Vec<_>>()
            .join("\n"),
        good.replacen("kg_per_s", "lb_per_s", 1),
        format!("{good}value,descending_aorta,-1\n"),
        good.replace("value,left_subclavian,", "value,left_subclavian,x"),
        String::new(),
    ];
    for (i, text) in cases.iter().enumerate() {
        assert!(parse_bc::<f64>(text).is_err(), "case {i} parsed:\n{text}");
    }
}

#[test]
fn transient_export_needs_profiles() {
    let flows = OutletFlows::<f64>::new([0.1, 0.02, 0.03, 0.2]).unwrap();
    let set = assemble_bc_set(BcType::BC1, &flows, "knn").unwrap();
    assert!(export_bc(&set, ExportMode::Transient, None).is_err());
}
