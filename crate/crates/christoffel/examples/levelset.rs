//! Draw the natural level set of a fitted score as terminal art.
//!
//! The sublevel set {Q ≤ s(d)} is a ready-made support estimate: s(d) is
//! the training mean of Q, so the contour needs no tuning. Cells inside
//! the set print as `#`, outside as `.`.

use christoffel::ingest::{synth_cloud, SynthSpec};
use christoffel::model::{ChristoffelModel, FitOptions};

fn main() -> christoffel::Result<()> {
    let data = synth_cloud(&SynthSpec::TwoGaussians { n: 800 }, 42)?;
    let model = ChristoffelModel::fit_points(data.points(), 4, &FitOptions::default())?;

    let (nx, ny) = (64, 24);
    let grid = model.levelset_grid(-3.2, 3.2, -2.4, 2.4, nx, ny)?;
    println!(
        "two blobs, degree {}, contour at Q = {}",
        model.degree(),
        grid.threshold
    );

    // Terminal rows go top to bottom; the grid stores y ascending.
    for iy in (0..ny).rev() {
        let row: String = (0..nx)
            .map(|ix| {
                if grid.values[iy * nx + ix] <= grid.threshold {
                    '#'
                } else {
                    '.'
                }
            })
            .collect();
        println!("{row}");
    }

    let inside = grid
        .values
        .iter()
        .filter(|&&q| q <= grid.threshold)
        .count();
    println!(
        "{inside}/{} grid cells inside the level set",
        grid.values.len()
    );

    // The same grid exports to CSV for real plotting tools.
    let out = std::env::temp_dir().join("levelset_grid.csv");
    let fine = model.levelset_grid(-3.2, 3.2, -2.4, 2.4, 200, 150)?;
    fine.write_csv(&out)?;
    println!("200x150 grid written to {}", out.display());
    Ok(())
}
