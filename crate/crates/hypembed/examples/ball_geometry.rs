//! Poincare-ball basics: distances, the closed form at the origin, and the
//! sigmoid-norm re-parameterization with its analytic gradient.
//!
//! ```bash
//! cargo run --release -p hypembed --example ball_geometry
//! ```

use hypembed::ball::{poincare_distance, reparam, reparam_grad, BallPoint, Metric};
use hypembed::optim::check_gradient;

fn main() -> hypembed::Result<()> {
    let origin = BallPoint::new(vec![0.0, 0.0])?;
    let a = BallPoint::new(vec![0.5, 0.0])?;
    let b = BallPoint::new(vec![0.0, 0.5])?;
    let c = BallPoint::new(vec![0.9, 0.0])?;

    println!("distances (note how the boundary stretches):");
    for (name, p) in [("(0.5, 0)", &a), ("(0, 0.5)", &b), ("(0.9, 0)", &c)] {
        let d = poincare_distance(&origin, p);
        let closed = 2.0 * p.norm().atanh();
        println!("  d(0, {name}) = {d:.6}   closed form 2 atanh|v| = {closed:.6}");
    }
    println!(
        "  d(a, b) = {:.6} = d(b, a) = {:.6}",
        poincare_distance(&a, &b),
        poincare_distance(&b, &a)
    );
    // equal Euclidean gaps, very different hyperbolic ones
    let near = (
        BallPoint::new(vec![0.00, 0.0])?,
        BallPoint::new(vec![0.08, 0.0])?,
    );
    let far = (
        BallPoint::new(vec![0.90, 0.0])?,
        BallPoint::new(vec![0.98, 0.0])?,
    );
    println!(
        "  same 0.08 step: near origin {:.4}, near boundary {:.4}",
        poincare_distance(&near.0, &near.1),
        poincare_distance(&far.0, &far.1)
    );

    // A stored row is (raw direction, raw norm); the point is
    // sigmoid(raw_norm) * direction/|direction|, so it can never leave the
    // ball and plain Adam applies.
    let raw = vec![3.0, -4.0, 0.0, 0.5];
    let r = reparam(&raw)?;
    println!("\nreparameterized row {raw:?}:");
    println!("  unit dir {:?}", r.unit_dir);
    println!("  radius sigmoid(0.5) = {:.6}", r.radius);
    println!("  point {:?}", r.point);

    // distance-through-reparam gradient vs central differences
    let raw_u = vec![0.3, -0.2, 0.4, -0.6];
    let raw_v = vec![-0.5, 0.1, 0.2, -1.0];
    let mut x = raw_u.clone();
    x.extend_from_slice(&raw_v);
    let loss = |x: &[f64]| {
        let (u, v) = x.split_at(4);
        let ru = reparam(u).unwrap();
        let rv = reparam(v).unwrap();
        Metric::Hyperbolic.dist(&ru.point, &rv.point)
    };
    let ru = reparam(&raw_u)?;
    let rv = reparam(&raw_v)?;
    let (gu, gv) = Metric::Hyperbolic.dist_grad(&ru.point, &rv.point)?;
    let mut analytic = vec![0.0; 8];
    reparam_grad(&ru, &gu, &mut analytic[..4]);
    reparam_grad(&rv, &gv, &mut analytic[4..]);
    let check = check_gradient(loss, &x, &analytic);
    println!("\ngradient check over both raw rows: max rel err {:.2e}", check.max_rel_err);
    Ok(())
}
