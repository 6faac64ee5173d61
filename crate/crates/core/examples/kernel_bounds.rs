//! Left-hand integrals of the kernel bounds against their closed forms, over t.

use fkdirichlet::bounds::{choose_exponents, KernelConstants, Lemma23Check};

fn main() -> fkdirichlet::Result<()> {
    let kc = KernelConstants::identity(2, 0.25, 2f64.sqrt());
    let ec = choose_exponents(2, 3.0, 2.0)?;
    let bump = |y: &[f64]| {
        let r2 = ((y[0] - 0.5).powi(2) + (y[1] - 0.5).powi(2)) / 0.09;
        if r2 < 1.0 { (1.0 - r2).powi(3) } else { 0.0 }
    };
    let nu = move |y: &[f64]| (3.0 * y[0]).cos() * bump(y);
    let br = vec![vec![0.2, 0.8], vec![0.2, 0.8]];
    for t in [0.001, 0.01, 0.1, 1.0] {
        let c = Lemma23Check::pot(&kc, &ec, t, &[0.5, 0.5], &[0.0, 0.0], &[1.0, 1.0], &nu, &br);
        println!("t = {t:<6} lhs = {:.4e}  bound = {:.4e}  slack = {:.1}x", c.lhs, c.bound, c.bound / c.lhs);
    }
    Ok(())
}
