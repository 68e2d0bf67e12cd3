//! Curvature spans transported to a base point, and the resulting holonomy labels.

use cfwalker::families::{build, FamilyId, FamilySpec, Sign};
use cfwalker::holonomy::{classify, curvature_span, default_base, sample_points, SAMPLE_RADIUS};

fn main() -> cfwalker::Result<()> {
    let cases = [
        (FamilyId::PpwaveF1, 2),
        (FamilyId::SimF2, 2),
        (FamilyId::SimF2, 3),
        (FamilyId::SphereF3, 2),
        (FamilyId::HypF4, 2),
        (FamilyId::Thc3Dec(Sign::Negative), 2),
        (FamilyId::GtCorrected, 2),
    ];
    for (id, n) in cases {
        let g = build(&FamilySpec::simple(id, n))?;
        let base = default_base(g.dim);
        let pts = sample_points(&g, &base, 20, SAMPLE_RADIUS, 42)?;
        let span = curvature_span(&g, &base, &pts, 42)?;
        println!(
            "{:<14} n={} span {:>2}  closed {:>2}  null line {:<5}  split {:<5}  -> {}",
            id.to_string(),
            n,
            span.dim,
            span.bracket_closed_dim,
            span.flags.preserves_null_line,
            span.flags.preserves_nondeg_subspace,
            classify(&span, n)
        );
    }
    Ok(())
}
