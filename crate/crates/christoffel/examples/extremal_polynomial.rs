//! What the score means: an extremal polynomial at every point.
//!
//! Q(x̄) is the reciprocal of the smallest empirical mean square among all
//! degree-d polynomials pinned to 1 at x̄. Far from the data even the best
//! such polynomial must be large on the cloud, so 1/Q is tiny — and Markov's
//! inequality turns that into a certified bound: at least 1 − 1/Q(x̄) of
//! the training mass lies where the optimizer P* satisfies P*² ≤ 1.

use christoffel::ingest::{synth_cloud, SynthSpec};
use christoffel::model::{ChristoffelModel, FitOptions};

fn main() -> christoffel::Result<()> {
    let data = synth_cloud(&SynthSpec::TwoGaussians { n: 600 }, 31)?;
    let model = ChristoffelModel::fit_points(data.points(), 3, &FitOptions::default())?;

    println!("   target x̄          Q(x̄)      1/Q = min mean square   mass bound   observed");
    for target in [[1.4, 1.1], [0.0, 0.0], [2.8, -2.2], [-4.0, 4.0]] {
        let m = model.christoffel_minimizer(&target)?;
        let markov = model.markov_mass_bound(&target, data.points())?;

        // P* really is 1 at the target...
        let at_target = model.evaluate_polynomial(&m.coefficients, &target)?;
        assert!((at_target - 1.0).abs() < 1e-9);
        // ...and its empirical mean square really is 1/Q.
        let mean_sq: f64 = data
            .points()
            .iter()
            .map(|x| {
                let v = model.evaluate_polynomial(&m.coefficients, x).unwrap();
                v * v
            })
            .sum::<f64>()
            / data.len() as f64;
        assert!((mean_sq - m.attained_value).abs() <= 1e-8 * m.attained_value.max(1e-300));

        println!(
            "  ({:4.1}, {:4.1})  {:12.3}   {:18.3e}      {:8.5}    {:8.5}",
            target[0], target[1], m.score_at_target, m.attained_value, markov.bound, markov.empirical_mass
        );
    }
    println!("\nthe observed sublevel mass always beats its certified bound");
    Ok(())
}
