//! Weyl tensor and scalar curvature across the built-in families.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cfwalker::curvature::CurvatureBundle;
use cfwalker::families::{build, FamilyId, FamilyParams, FamilySpec};

fn main() -> cfwalker::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    println!(
        "{:<20} {:>3} {:>12} {:>12} {:>12}",
        "family", "dim", "|W|", "|R|", "s"
    );
    for id in FamilyId::ALL {
        let n = if id == FamilyId::Product { 4 } else { 3 };
        let params = FamilyParams::random(&mut rng, n);
        let spec = if id.fixed_dim4() {
            FamilySpec::simple(id, 2)
        } else {
            FamilySpec::new(id, n, params)
        };
        let g = build(&spec)?;
        let p = g.sample_point(&mut rng)?;
        let b = CurvatureBundle::at(&g, &p)?;
        println!(
            "{:<20} {:>3} {:>12} {:>12.3e} {:>12.3e}",
            id.to_string(),
            g.dim,
            // no Weyl tensor below dimension 4
            b.weyl_norm()
                .map_or("-".to_string(), |w| format!("{w:.3e}")),
            b.riemann_lo.max_abs(),
            b.scalar
        );
    }
    Ok(())
}
