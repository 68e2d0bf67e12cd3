//! Exact derivatives of a rational function with truncated Taylor jets.

use cfwalker::Jet;

fn main() -> cfwalker::Result<()> {
    let p = [0.3, -0.7];
    let v = Jet::seed_point(&p, 3)?;
    let (x, y) = (&v[0], &v[1]);

    // f = x^2 y / (1 + y^2)
    let f = (x * x * y) / (y * y + 1.0);
    println!("f        = {:.12}", f.value());
    println!("df/dx    = {:.12}", f.derivative(&[0]));
    println!("df/dy    = {:.12}", f.derivative(&[1]));
    println!("d2f/dxdy = {:.12}", f.derivative(&[0, 1]));
    println!("d3f/dy3  = {:.12}", f.derivative(&[1, 1, 1]));

    // hand derivative of x^2 y / (1 + y^2) in x
    let hand = 2.0 * p[0] * p[1] / (1.0 + p[1] * p[1]);
    println!("|df/dx - hand| = {:.1e}", (f.derivative(&[0]) - hand).abs());

    let r = (x * x + y * y + 1.0).sqrt();
    println!("sqrt(1 + |p|^2) gradient = {:?}", r.gradient());
    Ok(())
}
