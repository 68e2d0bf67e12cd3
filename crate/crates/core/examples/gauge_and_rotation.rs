//! Gauge changes `v -> v + phi` and fiber rotations leave the geometry unchanged.

use cfwalker::claims::{transform_check, Transform};
use cfwalker::config::Config;
use cfwalker::families::{build, FamilyId, FamilySpec};
use cfwalker::fields::MultiPoly;
use cfwalker::walker::{gauge_transform, walker_extract};

fn main() -> cfwalker::Result<()> {
    let g = build(&FamilySpec::simple(FamilyId::SimF2, 2))?;
    // phi = x^1 u - 0.5 x^2
    let phi = MultiPoly::zero(4)
        .with_term(&[0, 1, 0, 1], 1.0)
        .with_term(&[0, 0, 2, 0], -0.5);
    let gauged = gauge_transform(&g, &phi)?;
    let pt = [0.1, 0.2, -0.3, 0.4];
    let (a, b) = (walker_extract(&g, &pt)?, walker_extract(&gauged, &pt)?);
    println!(
        "scalar before / after gauge: {:.12} / {:.12}",
        a.bundle.scalar, b.bundle.scalar
    );

    let cfg = Config {
        samples: 20,
        ns: vec![3],
        ..Config::default()
    };
    for kind in [Transform::Gauge, Transform::Rotation, Transform::Gt] {
        let r = transform_check(kind, &cfg)?;
        println!(
            "{:<20} {:<14} residual {:.1e} (tol {:.0e})",
            r.claim_id, r.family, r.max_residual, r.tolerance
        );
    }
    Ok(())
}
