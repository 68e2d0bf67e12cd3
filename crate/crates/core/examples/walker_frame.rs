//! Walker data of a family-2 metric: frame, lambda, v, T and the Walker identities.

use cfwalker::families::{build, FamilyId, FamilySpec};
use cfwalker::walker::{walker_closed_forms, walker_extract};

fn main() -> cfwalker::Result<()> {
    let n = 3;
    let g = build(&FamilySpec::simple(FamilyId::SimF2, n))?;
    let pt = [0.2, 0.1, -0.3, 0.25, 0.4];
    let w = walker_extract(&g, &pt)?;

    println!(
        "frame relation defect  {:.1e}",
        w.frame.relation_defect(&w.bundle.g)
    );
    println!("lambda                 {:.6}", w.lambda);
    println!("v                      {:?}", w.vvec.as_slice());
    println!("trace T                {:.6}", w.trace_t());
    println!("fiber scalar s0        {:.6}", w.s0);
    println!("Walker identities      {:?}", w.lemma1_residuals());
    println!("Ricci formula residual {:.1e}", w.ricci_formula_residual());
    if let Some(r) = w.r_l_formula_residual() {
        println!("R_L formula residual   {r:.1e}");
    }

    let (p, t) = walker_closed_forms(&g, &pt)?;
    println!("closed form P gap      {:.1e}", p.sub(&w.p).max_abs());
    println!("closed form T gap      {:.1e}", (t - &w.t).amax());
    Ok(())
}
