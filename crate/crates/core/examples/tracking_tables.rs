//! Prints windowed tracking errors for every controller and reference on a
//! preset, in the layout of the usual comparison tables.
//!
//! `cargo run --release --example tracking_tables -- [preset] [runs]`

use ensemble_control::harness::{compare_controllers, load_preset, ControllerKind, Window};
use ensemble_control::plant::{TrajectoryKind, TrajectorySpec};

fn main() -> ensemble_control::Result<()> {
    let mut args = std::env::args().skip(1);
    let preset = args.next().unwrap_or_else(|| "base".into());
    let runs: usize = args.next().and_then(|r| r.parse().ok()).unwrap_or(100);
    let controllers = [
        ControllerKind::Rls,
        ControllerKind::SingleAld(0),
        ControllerKind::Oracle,
        ControllerKind::Ensemble,
    ];
    for (lo, hi) in [(10, 100), (100, 300)] {
        println!("window {lo}-{hi}, {runs} runs, preset {preset}");
        for kind in [
            TrajectoryKind::FilteredSquare,
            TrajectoryKind::Triangle,
            TrajectoryKind::Sine,
        ] {
            let mut cfg = load_preset(&preset)?;
            cfg.trajectory = TrajectorySpec::standard(kind);
            cfg.steps = hi;
            let rows = compare_controllers(&cfg, &controllers, runs, Window::new(lo, hi))?;
            let cells: Vec<String> = rows
                .iter()
                .map(|s| format!("{}={:.4} (fail {})", s.controller, s.j_bar, s.runs_failed()))
                .collect();
            println!("  {kind:?}: {}", cells.join("  "));
        }
    }
    Ok(())
}
