//! Loads the bundled feeder, checks radiality and prints ground motion and
//! failure probability per component for three magnitudes.
//!
//! cargo run --release --example grid_and_fragility

use std::path::PathBuf;

use quake_restore::grid::{load_network_file, validate_radiality};
use quake_restore::grid::Point;
use quake_restore::seismic::{PgaField, SeismicEvent};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/synthetic13.json");
    let net = load_network_file(&path)?;
    let report = validate_radiality(&net);
    println!(
        "{}: {} buses, {} lines, {} components, radial: {}",
        path.file_name().unwrap().to_string_lossy(),
        net.buses.len(),
        net.lines.len(),
        net.component_count(),
        report.is_empty()
    );
    println!("peak load {:.2} MW at step {}", net.total_load(net.peak_step()), net.peak_step());

    let event = SeismicEvent::new(Point::new(-12.0, -14.0), 10.0, 6.5);
    let fields: Vec<(f64, Vec<f64>, Vec<f64>)> = [6.5, 7.5, 8.5]
        .into_iter()
        .map(|m| {
            let field = PgaField::median(&net, &event.with_magnitude(m))?;
            let p = field.failure_probabilities(&net)?;
            Ok((m, field.pga, p))
        })
        .collect::<Result<_, quake_restore::seismic::SeismicError>>()?;

    print!("{:<10}", "component");
    for (m, _, _) in &fields {
        print!("  M{m:<4} pga   p_fail");
    }
    println!();
    for (c, comp) in net.components.iter().enumerate() {
        print!("{:<10}", comp.id);
        for (_, pga, p) in &fields {
            print!("  {:>9.3}g {:>6.3}", pga[c], p[c]);
        }
        println!();
    }
    Ok(())
}
