use hemo_core::solver::{BoundaryValues, SegmentSolver};
use hemo_core::{FluidProperties, SegmentState, VesselModel, VesselSegment};

fn vessel(length: f64, dz: f64, viscosity: f64) -> VesselModel {
    let seg = VesselSegment::new(1, "v", length, 1.0, 4.0e5, dz).unwrap();
    VesselModel::new(&seg, &FluidProperties::new(1.06, viscosity).unwrap())
}

#[test]
fn sealed_vessel_keeps_its_volume() {
    let m = vessel(20.0, 0.05, 0.0);
    let mut s = SegmentState::at_rest(&m);
    for k in 0..s.len() {
        let z = k as f64 * m.dz;
        let a = 1.0 + 0.1 * (-(z - 10.0).powi(2) / 2.0).exp();
        let w = m.to_characteristics(a, 0.0).unwrap();
        s.w1[k] = w.w1;
        s.w2[k] = w.w2;
        s.area[k] = a;
    }
    let solver = SegmentSolver::new(&m);
    let v0 = s.volume(m.dz);
    let dt = 5e-5;
    let transit = m.length / m.c0;
    let mut next = s.clone();
    let mut t = 0.0;
    while t < transit {
        // closed ends: v = 0 means W2 = W1
        let (w1_in, w2_out) = solver.outgoing(&s, dt).unwrap();
        let b = BoundaryValues {
            inlet_w2: w1_in,
            outlet_w1: w2_out,
        };
        solver.step_into(&s, dt, t, b, &mut next).unwrap();
        std::mem::swap(&mut s, &mut next);
        t += dt;
    }
    assert!(s.flow[0].abs() < 1e-9 && s.flow[s.len() - 1].abs() < 1e-9);
    let drift = (s.volume(m.dz) - v0).abs() / v0;
    assert!(drift < 5e-3, "volume drift {drift}");
}

/// Area profile at t = 0.05 s after a pulse enters a quiescent vessel.
fn pulse_profile(dz: f64, dt: f64) -> (VesselModel, Vec<f64>) {
    let m = vessel(40.0, dz, 0.045);
    let solver = SegmentSolver::new(&m);
    let mut s = SegmentState::at_rest(&m);
    let mut next = s.clone();
    let steps = (0.05 / dt).round() as usize;
    for n in 0..steps {
        let t = n as f64 * dt;
        let b = BoundaryValues {
            inlet_w2: 5.0 * (-((t + dt - 0.02) / 0.006f64).powi(2)).exp(),
            outlet_w1: 0.0,
        };
        solver.step_into(&s, dt, t, b, &mut next).unwrap();
        std::mem::swap(&mut s, &mut next);
    }
    (m, s.area)
}

#[test]
fn pulse_error_is_first_order() {
    let (coarse_m, coarse) = pulse_profile(0.2, 2e-4);
    let (_, half) = pulse_profile(0.1, 1e-4);
    let (_, reference) = pulse_profile(0.025, 2.5e-5);
    assert_eq!(coarse_m.cells, 200);
    let err = |a: &[f64], stride: usize| {
        (0..coarse.len()).map(|k| (a[k * stride] - reference[k * 8]).abs()).fold(0.0, f64::max)
    };
    let (e1, e2) = (err(&coarse, 1), err(&half, 2));
    let ratio = e2 / e1;
    assert!((0.35..=0.65).contains(&ratio), "errors {e1:.3e} → {e2:.3e}, ratio {ratio:.3}");
}
