//! Runs one self-similar test case and prints the flow error.
//!
//! Usage: `cargo run --release --example barenblatt -- <gamma> <N> [steps] [full|clipped]`
//! where the optional `steps` truncates the run after that many time steps
//! (`all` runs to the end).

use std::time::Instant;

use laguerre_flow::analysis::{run_barenblatt, BarenblattRun};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let gamma: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(2.0);
    let n: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(100);
    let mut run = BarenblattRun::standard(gamma, n);
    if let Some(steps) = args.get(3).and_then(|s| s.parse::<f64>().ok()) {
        run.t_end = run.t0 + steps * run.preset.tau(n);
    }
    if let Some(mode) = args.get(4) {
        run.mode = mode.parse().expect("mode is full or clipped");
    }
    let start = Instant::now();
    let out = run_barenblatt(&run).expect("run failed");
    let steps = out.trajectory.energies.len() - 1;
    println!(
        "gamma={gamma} N={n} steps={steps} newton={} error={:.4e} time={:.2}s",
        out.trajectory.newton_iterations,
        out.flow_error,
        start.elapsed().as_secs_f64()
    );
}
