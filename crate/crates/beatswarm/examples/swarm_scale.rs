//! Scaling behavior: per-drone solve times as the swarm grows, in the
//! spirit of the distributed formulation (each drone's horizon problem is
//! independent given the prediction snapshot, so the work parallelizes).
//!
//! ```bash
//! cargo run --release --example swarm_scale
//! ```

use beatswarm::choreography::{compile_score, parse_score};
use beatswarm::config::Config;
use beatswarm::core::{DroneState, Vec3};
use beatswarm::filter::run_filter;
use beatswarm::music::{Beat, BeatTimeline};

fn main() {
    let config = Config::default();
    let model = config.model().unwrap();
    let mut limits = config.limits();
    limits.p_lo = Vec3::new(-10.0, -10.0, 0.2);
    limits.p_hi = Vec3::new(10.0, 10.0, 4.0);

    let timeline = BeatTimeline {
        duration: 21.0,
        beats: (0..=10)
            .map(|i| Beat { t: i as f64 * 2.0, novelty: 1.0, dbfs: -10.0, chord: None })
            .collect(),
    };

    println!("{:>7}  {:>10}  {:>12}  {:>14}", "drones", "radius", "ms/drone", "wall time (s)");
    for &n in &[5usize, 10, 20, 50, 100] {
        // keep the ring spacing comfortably above the collision envelope
        let radius = (n as f64 * 0.55 / (2.0 * std::f64::consts::PI)).max(1.5);
        let score_text = format!(
            "swarm {n}\nprimitive rotate from 0.0 to 20.0 {{angular_displacement=3.1416}} layout=circle({n},{radius:.2})\n"
        );
        let refs = compile_score(
            &parse_score(&score_text).unwrap(),
            &timeline,
            &limits,
            model.dt,
        )
        .unwrap();
        let initial: Vec<DroneState> =
            (0..n).map(|i| DroneState::at_rest(refs.positions[i][0])).collect();
        let start = std::time::Instant::now();
        let certified =
            run_filter(&refs, &initial, &model, &limits, &config.filter_config()).unwrap();
        println!(
            "{n:>7}  {radius:>10.2}  {:>12.3}  {:>14.2}",
            certified.diagnostics.mean_solve_ms,
            start.elapsed().as_secs_f64()
        );
    }
}
