//! Trace-level properties of the bundled scenarios.

use drive_observability::sim::{run_im_scenario, ImScenario, SignalProfile, SimTrace};

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn sensorless_error_concentrates_where_condition_is_violated() {
    let trace = run_im_scenario(&ImScenario::default()).unwrap();
    let err = trace.column("sensorless_flux_err").unwrap();
    let viol = trace.column("violated").unwrap();
    let t = trace.column("t").unwrap();
    let (mut inside, mut outside) = (Vec::new(), Vec::new());
    // Flux starts at zero, so the relative error is undefined until it builds up.
    for ((e, v), _) in err.iter().zip(&viol).zip(&t).filter(|(_, t)| **t >= 0.5) {
        assert!(e.is_finite());
        if *v != 0.0 {
            inside.push(e.abs())
        } else {
            outside.push(e.abs())
        }
    }
    let ratio = mean(&inside) / mean(&outside);
    println!("inside {:.3e} outside {:.3e} ratio {ratio:.1}", mean(&inside), mean(&outside));
    assert!(ratio >= 5.0, "{ratio}");
}

#[test]
fn reruns_are_bitwise_identical() {
    let mut sc = ImScenario::default();
    sc.duration = 0.5;
    for prof in [&mut sc.frequency, &mut sc.load] {
        let mut segs: Vec<_> = prof.segments().iter().filter(|s| s.t_start < 0.5).cloned().collect();
        segs.last_mut().unwrap().t_end = 0.5;
        *prof = SignalProfile::new(segs).unwrap();
    }
    let a = run_im_scenario(&sc).unwrap();
    let b = run_im_scenario(&sc).unwrap();
    let bits = |t: &SimTrace| -> Vec<u64> { t.rows.iter().flatten().map(|v| v.to_bits()).collect() };
    assert_eq!(bits(&a), bits(&b));
}
