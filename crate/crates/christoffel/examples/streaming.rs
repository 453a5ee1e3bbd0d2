//! Maintain the score online, one point at a time.
//!
//! `OnlineInverse` keeps a rank-one-updated inverse of the (unnormalized)
//! moment matrix, so each insert and each score is O(s²) instead of a
//! fresh O(s³) factorization. The stream starts from a tiny seed ridge;
//! after n inserts the scores match a batch fit with ridge `ridge0 / n`.

use christoffel::ingest::{synth_cloud, SynthSpec};
use christoffel::model::{ChristoffelModel, FitOptions};
use christoffel::online::OnlineInverse;

fn main() -> christoffel::Result<()> {
    let data = synth_cloud(&SynthSpec::TwoGaussians { n: 3000 }, 77)?;
    let probe = [0.4, 0.3];

    let ridge0 = 1e-6;
    let mut online = OnlineInverse::new(2, 3, ridge0)?;
    println!("inserting {} points at degree 3 (basis size 10)", data.len());
    for (i, x) in data.points().iter().enumerate() {
        online.insert(x)?;
        if (i + 1) % 600 == 0 {
            println!(
                "  after {:4} points: Q({:?}) = {:.6}",
                i + 1,
                probe,
                online.score(&probe)?
            );
        }
    }

    // The same measure fitted in one batch, with the matched ridge.
    let opts = FitOptions {
        ridge: ridge0 / data.len() as f64,
        precondition: false,
    };
    let batch = ChristoffelModel::fit_points(data.points(), 3, &opts)?;

    let mut worst: f64 = 0.0;
    for x in data.points().iter().step_by(97) {
        let a = online.score(x)?;
        let b = batch.score(x)?;
        worst = worst.max((a - b).abs() / b);
    }
    println!("\nworst relative gap to the batch fit: {worst:.3e}");

    // A snapshot turns the stream into an ordinary model file.
    let snap = online.snapshot()?;
    let path = std::env::temp_dir().join("stream_snapshot.json");
    snap.save(&path)?;
    println!(
        "snapshot (n = {}) saved to {}",
        snap.count(),
        path.display()
    );
    Ok(())
}
