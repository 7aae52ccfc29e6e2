//! The motion-primitive library: catalog, evaluation, and analytic
//! feasibility pre-checks.
//!
//! ```bash
//! cargo run --release --example primitive_tour
//! ```

use beatswarm::core::{PhysicalLimits, Vec3};
use beatswarm::primitives::{
    check_feasibility, eval_primitive, find, layout_circle, list_primitives, PrimitiveSpec,
};
use std::collections::BTreeMap;

fn main() {
    println!("== catalog ({} primitives) ==", list_primitives().len());
    for p in list_primitives() {
        let params: Vec<String> = p.params.iter().map(|q| q.name.clone()).collect();
        println!("  {:16} {} [{}]", p.name, p.description, params.join(", "));
    }

    let limits = PhysicalLimits::default();
    let anchors = layout_circle(6, 1.5, Vec3::new(0.0, 0.0, 1.0), &limits).unwrap();

    // sample a spiral: radius grows by exactly 0.5 m over the segment
    let def = find("spiral").unwrap();
    let spec = PrimitiveSpec {
        name: "spiral".into(),
        params: BTreeMap::from([
            ("angular_displacement".into(), 2.0 * std::f64::consts::PI),
            ("radius_growth".into(), 0.5),
        ]),
        t_start: 0.0,
        t_end: 8.0,
    };
    println!("\n== spiral trajectory of drone 0 ==");
    for i in 0..=8 {
        let t = i as f64;
        let p = eval_primitive(def, &spec, anchors[0], t).unwrap();
        let r = (p.x * p.x + p.y * p.y).sqrt();
        println!("  t={t:>4.1}  p={p}  radius={r:.3}");
    }

    println!("\n== feasibility reports ==");
    for (name, params, window) in [
        ("hover", vec![], 4.0),
        ("wave", vec![("amplitude", 0.2)], 4.0),
        // 10 revolutions in 2 s at radius 1.5: wildly over the speed limit
        ("rotate", vec![("angular_displacement", 20.0 * std::f64::consts::PI)], 2.0),
    ] {
        let def = find(name).unwrap();
        let spec = PrimitiveSpec {
            name: name.into(),
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            t_start: 0.0,
            t_end: window,
        };
        let report = check_feasibility(def, &spec, &anchors, &limits);
        println!(
            "  {:8} over {window} s: max speed {:7.2} m/s, thrust [{:5.2}, {:5.2}] -> {}",
            name,
            report.max_speed,
            report.min_thrust_demand,
            report.max_thrust_demand,
            if report.pass { "pass" } else { "FAIL" }
        );
        for v in &report.violations {
            println!("      {v}");
        }
    }
}
