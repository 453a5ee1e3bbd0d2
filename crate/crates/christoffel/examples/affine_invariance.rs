//! The score does not care how the data is rotated, scaled, or shifted.
//!
//! If every training point is pushed through an invertible affine map
//! x ↦ Ax + b and the model is refitted, the new score at the image of a
//! point equals the old score at the point itself. Units, axes, and
//! offsets all cancel — one reason no bandwidth parameter is needed.

use christoffel::ingest::{synth_cloud, SynthSpec};
use christoffel::model::{AffineMap, ChristoffelModel, FitOptions};

fn main() -> christoffel::Result<()> {
    let data = synth_cloud(&SynthSpec::TwoGaussians { n: 300 }, 3)?;
    let points = data.points();
    let opts = FitOptions::default();
    let model = ChristoffelModel::fit_points(points, 3, &opts)?;

    // Rotate by 1 radian, stretch one axis 50x, squeeze the other, shift
    // far away — as if the data were re-recorded in different units.
    let (c, s) = (1.0f64.cos(), 1.0f64.sin());
    let map = AffineMap::new(vec![50.0 * c, -50.0 * s, 0.1 * s, 0.1 * c], vec![-900.0, 4.5])?;
    let mapped: Vec<Vec<f64>> = points.iter().map(|x| map.apply(x)).collect();
    let remodel = ChristoffelModel::fit_points(&mapped, 3, &opts)?;

    println!("   original x            Q(x)        Q'(Ax+b)");
    let mut worst: f64 = 0.0;
    for x in points.iter().step_by(61) {
        let q = model.score(x)?;
        let q2 = remodel.score(&map.apply(x))?;
        worst = worst.max((q - q2).abs() / q);
        println!("  ({:7.3}, {:6.3})  {:12.8}  {:12.8}", x[0], x[1], q, q2);
    }
    println!("\nworst relative difference: {worst:.3e}");

    // The library also runs the whole experiment (map, refit, compare)
    // in one call over a probe set.
    let probes: Vec<Vec<f64>> = (0..200)
        .map(|i| {
            let t = i as f64 * 0.77;
            vec![3.0 * (t * 1.3).sin(), 3.0 * (t * 0.9).cos()]
        })
        .collect();
    let gap = model.affine_pushforward_check(points, map.linear(), map.offset(), &probes)?;
    println!("max gap over 200 probe points: {gap:.3e}");
    Ok(())
}
