//! The safety filter on deliberately colliding references: 12 drones on
//! a ring, half the swarm swapping to its antipodes through the center
//! while the other half holds. Prints the minimum inter-agent distance
//! with and without the filter and writes an SVG comparison.
//!
//! ```bash
//! cargo run --release --example crossing_filter
//! ```

use beatswarm::choreography::{compile_score, parse_score};
use beatswarm::config::Config;
use beatswarm::core::DroneState;
use beatswarm::filter::run_filter;
use beatswarm::music::{Beat, BeatTimeline};
use beatswarm::simkit::{line_chart, min_inter_agent_series, ChartSpec, Series};

fn main() {
    let n = 12;
    let radius = 2.0;
    let beats = [0.0, 20.0];
    let mut score = format!("swarm {n}\n");
    for (bi, &t) in beats.iter().enumerate() {
        for drone in 0..n {
            // even drones cross to their antipode, odd drones hold
            let swapped = bi == 1 && drone % 2 == 0;
            let angle = 2.0 * std::f64::consts::PI * drone as f64 / n as f64
                + if swapped { std::f64::consts::PI } else { 0.0 };
            score.push_str(&format!(
                "waypoint {t} drone {drone} -> ({:.6},{:.6},1.0)\n",
                radius * angle.cos(),
                radius * angle.sin()
            ));
        }
    }
    let timeline = BeatTimeline {
        duration: 21.0,
        beats: beats
            .iter()
            .map(|&t| Beat { t, novelty: 1.0, dbfs: -10.0, chord: None })
            .collect(),
    };

    let config = Config::default();
    let (model, limits) = (config.model().unwrap(), config.limits());
    let refs =
        compile_score(&parse_score(&score).unwrap(), &timeline, &limits, model.dt).unwrap();
    let initial: Vec<DroneState> =
        (0..n).map(|i| DroneState::at_rest(refs.positions[i][0])).collect();

    let start = std::time::Instant::now();
    let certified =
        run_filter(&refs, &initial, &model, &limits, &config.filter_config()).unwrap();
    println!(
        "filtered {} steps x {n} drones in {:.2} s ({:.2} ms per drone step)",
        certified.len(),
        start.elapsed().as_secs_f64(),
        certified.diagnostics.mean_solve_ms
    );

    let raw = min_inter_agent_series(&refs.positions, &limits).unwrap();
    let filtered = min_inter_agent_series(&certified.positions, &limits).unwrap();
    let min_of = |s: &[(f64, f64)]| s.iter().map(|(_, n)| *n).fold(f64::INFINITY, f64::min);
    println!("min ellipsoid-normalized distance, raw references: {:.3}", min_of(&raw));
    println!("min ellipsoid-normalized distance, filtered:       {:.3}", min_of(&filtered));
    println!("mean deviation per drone (cm): {:?}", certified.diagnostics.deviation_mean_cm.iter().map(|d| (d * 10.0).round() / 10.0).collect::<Vec<_>>());

    let to_points = |s: &[(f64, f64)]| {
        s.iter().enumerate().map(|(k, (_, v))| (certified.time_of(k), *v)).collect()
    };
    let chart = ChartSpec {
        title: "Minimum inter-agent distance, raw vs filtered",
        x_label: "time (s)",
        y_label: "min normalized distance",
        series: vec![
            Series { name: "raw references", points: to_points(&raw), color: "#ff7f0e" },
            Series { name: "filtered", points: to_points(&filtered), color: "#1f77b4" },
        ],
        h_lines: vec![(1.0, "collision-free threshold")],
    };
    let path = std::env::temp_dir().join("beatswarm_crossing.svg");
    std::fs::write(&path, line_chart(&chart)).unwrap();
    println!("chart written to {}", path.display());
}
