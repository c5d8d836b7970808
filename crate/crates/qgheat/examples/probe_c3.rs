use qgheat::graph::{ConditionKind, EdgePotential, QuantumGraph};
use qgheat::heat::compare_trace;
use qgheat::parametrix::heat_coefficients;
use qgheat::spectrum::{find_eigenvalues, SpectrumOptions};
use std::f64::consts::PI;

fn main() {
    let q = QuantumGraph::interval(
        PI,
        ConditionKind::Neumann,
        ConditionKind::Neumann,
        EdgePotential::new(vec![0.0, 0.0, 1.0], PI),
    )
    .unwrap();
    let t0 = std::time::Instant::now();
    let res = find_eigenvalues(&q, 4000.0, &SpectrumOptions::default()).unwrap();
    println!("spectrum: {:?} ({} lines)", t0.elapsed(), res.lines.len());
    let coeffs = heat_coefficients(&q, 3).unwrap();
    let ts: Vec<f64> = (0..13).map(|i| 0.01 * 10.0f64.powf(i as f64 / 12.0)).collect();
    let cmp = compare_trace(&res, &coeffs, &ts, 3).unwrap();
    for r in &cmp.rows {
        println!("t={:.5e} resid={:+.6e} ratio_next={:.4}", r.t, r.residual,
            r.residual.abs() / r.t.powf(3.5));
    }
    println!("slope(full 13pts) = {:?}", cmp.slope);
    let ts12: Vec<f64> = (0..12).map(|i| 0.01 * 10.0f64.powf(i as f64 / 12.0)).collect();
    let cmp12 = compare_trace(&res, &coeffs, &ts12, 3).unwrap();
    println!("slope(12pts to 0.0825) = {:?}", cmp12.slope);
}
