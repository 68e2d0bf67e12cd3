//! Killing fields on the sphere and Lobachevskian charts.

use nalgebra::{DMatrix, DVector};

use cfwalker::families::Sign;
use cfwalker::killing::{
    chart_metric, flow_isometry_defect, killing_algebra_dim, killing_residual, killing_vector,
    lower, rank_points,
};

fn main() -> cfwalker::Result<()> {
    let n = 3;
    let b = DVector::from_vec(vec![0.5, -1.0, 0.25]);
    let m = DMatrix::from_row_slice(3, 3, &[0.0, 0.3, -0.2, -0.3, 0.0, 0.7, 0.2, -0.7, 0.0]);
    let p = [0.1, -0.2, 0.3];

    for sign in [Sign::Positive, Sign::Negative] {
        let h = chart_metric(n, sign)?;
        let x = killing_vector(sign, &b, &m)?;
        let a = lower(sign, &x);
        println!("{sign:?}");
        println!(
            "  Killing residual         {:.1e}",
            killing_residual(&h, &a, &p)?
        );
        // the same field on the other chart is not Killing
        let other = chart_metric(n, sign.flip())?;
        println!(
            "  on the opposite chart    {:.1e}",
            killing_residual(&other, &lower(sign.flip(), &x), &p)?
        );
        println!(
            "  flow isometry defect     {:.1e}",
            flow_isometry_defect(&h, &x, &p, 0.1, 20)?
        );
        for k in 2..=5 {
            println!(
                "  algebra dim (n = {k})     {}",
                killing_algebra_dim(sign, k, &rank_points(k))?
            );
        }
    }
    Ok(())
}
