//! Separate background noise from a ring-shaped support.
//!
//! A moderate-degree score hugs the ring tightly: points on the ring stay
//! near the training mean while the uniform background lights up by orders
//! of magnitude. Run with `cargo run --example ring_outliers`.

use christoffel::eval::{aupr, detection_curve, ScoredDataset};
use christoffel::ingest::{synth_cloud, SynthSpec};
use christoffel::model::{ChristoffelModel, FitOptions};

fn main() -> christoffel::Result<()> {
    let spec = SynthSpec::RingWithBackground {
        n_ring: 1000,
        n_background: 40,
    };
    let data = synth_cloud(&spec, 7)?;
    println!(
        "{}: {} points, {} planted outliers",
        data.name(),
        data.len(),
        data.positives()
    );

    let degree = 8;
    let model = ChristoffelModel::fit_points(data.points(), degree, &FitOptions::default())?;
    let scored = ScoredDataset::from_model(&model, &data)?;

    let (mut ring_mean, mut bg_mean) = (0.0, 0.0);
    for (s, &is_outlier) in scored.scores().iter().zip(data.labels()) {
        if is_outlier {
            bg_mean += s / data.positives() as f64;
        } else {
            ring_mean += s / (data.len() - data.positives()) as f64;
        }
    }
    println!("degree {degree}, basis size {}", model.basis().len());
    println!("mean score on the ring:       {ring_mean:10.2}");
    println!("mean score on the background: {bg_mean:10.2}");

    println!("\narea under precision-recall: {:.4}", aupr(&scored)?);
    println!("detection curve (fraction flagged -> fraction of outliers found):");
    let curve = detection_curve(&scored)?;
    // The curve has one point per distinct score; sample a handful.
    for &(x, y) in curve
        .points()
        .iter()
        .filter(|&&(x, _)| (x * 100.0).fract() == 0.0 || x <= 0.05)
        .take(12)
    {
        println!("  flag {:6.2}% -> recall {:6.2}%", x * 100.0, y * 100.0);
    }
    Ok(())
}
