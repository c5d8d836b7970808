use qgheat::graph::{ConditionKind, EdgePotential, QuantumGraph};
use qgheat::parametrix::{u_diagonal_closed, u_recursive};

fn main() {
    let mut state = 0x9e3779b97f4a7c15u64;
    let mut rnd = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    for case in 0..20 {
        let len = 1.0 + 1.5 * rnd();
        let coeffs: Vec<f64> = (0..4).map(|_| 2.0 * rnd() - 1.0).collect();
        let pot = EdgePotential::new(coeffs.clone(), len);
        let x = 0.1 + (len - 0.2) * rnd();
        let q = QuantumGraph::interval(len, ConditionKind::Neumann, ConditionKind::Neumann, pot.clone()).unwrap();
        for l in 1..=3usize {
            let rec = u_recursive(&pot, x, x, l).unwrap();
            let closed = u_diagonal_closed(&q, 0, x, l).unwrap();
            let scale = closed.abs().max(0.05);
            let rel = (rec - closed).abs() / scale;
            if rel > 1e-7 {
                println!("case {case} l={l}: len={len:.3} freq={:.2} x={x:.3} rec={rec:.10e} closed={closed:.10e} rel={rel:.3e}", pot.max_frequency());
            }
        }
    }
}
