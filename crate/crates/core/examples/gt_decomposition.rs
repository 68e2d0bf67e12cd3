//! The corrected GT metric is conformally flat and decomposes under a polynomial change of chart.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cfwalker::curvature::CurvatureBundle;
use cfwalker::families::{build, FamilyId, FamilySpec};
use cfwalker::holonomy::{classify, curvature_span, default_base, sample_points, SAMPLE_RADIUS};
use cfwalker::walker::{coordinate_transform, gt_decomposition_map, max_metric_difference};

fn main() -> cfwalker::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let original = build(&FamilySpec::simple(FamilyId::GtOriginal, 2))?;
    let corrected = build(&FamilySpec::simple(FamilyId::GtCorrected, 2))?;
    let simplified = build(&FamilySpec::simple(FamilyId::GtSimplified, 2))?;

    let p = corrected.sample_point(&mut rng)?;
    for (name, g) in [("original", &original), ("corrected", &corrected)] {
        let w = CurvatureBundle::at(g, &p)?.weyl_norm().unwrap();
        println!("{name:<10} |W| = {w:.3e}");
    }

    let pulled = coordinate_transform(&corrected, &gt_decomposition_map())?;
    let pts: Vec<Vec<f64>> = (0..50)
        .map(|_| simplified.sample_point(&mut rng))
        .collect::<Result<_, _>>()?;
    println!(
        "pullback vs simplified: {:.1e}",
        max_metric_difference(&pulled, &simplified, &pts)?
    );

    let base = default_base(4);
    let span = curvature_span(
        &corrected,
        &base,
        &sample_points(&corrected, &base, 20, SAMPLE_RADIUS, 42)?,
        42,
    )?;
    println!("holonomy of the corrected metric: {}", classify(&span, 2));
    Ok(())
}
