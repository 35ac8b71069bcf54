//! Log-log slope fits of the kind used for convergence rates.

use lq_explore::harness::{loglog_slope, FIT_WINDOW};

fn main() -> lq_explore::Result<()> {
    let power: Vec<(f64, f64)> = (1..=100_000).map(|n| (n as f64, 3.0 * (n as f64).powf(0.73))).collect();
    let fit = loglog_slope(&power, FIT_WINDOW)?;
    println!("3 n^0.73: slope {:.6} intercept {:.6} r2 {:.6} from {} points", fit.slope, fit.intercept, fit.r2, fit.points);

    let wiggly: Vec<(f64, f64)> = (1..=100_000)
        .map(|n| {
            let x = n as f64;
            (x, x.powf(-0.5) * (1.0 + 0.2 * (x.ln() * 3.0).sin()))
        })
        .collect();
    println!("wiggly n^-0.5: slope {:.4}", loglog_slope(&wiggly, FIT_WINDOW)?.slope);

    match loglog_slope(&power, (1e6, 1e7)) {
        Ok(_) => println!("unexpected fit"),
        Err(e) => println!("empty window: {e}"),
    }
    Ok(())
}
