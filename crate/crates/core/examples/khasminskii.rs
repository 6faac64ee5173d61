//! Occupation and exponential moment of κ(1 − r²) on the unit ball of R³,
//! scaled to the closed-form threshold and to the one with the sphere area.

use fkdirichlet::bounds::{khasminskii_threshold, khasminskii_threshold_with_area, occupation_bound_mc, KernelConstants};
use fkdirichlet::coeffs::FnField;
use fkdirichlet::pathsim::{BoundaryRefinement, PathConfig};
use fkdirichlet::quadrature::adaptive;
use fkdirichlet::{CoefficientSet, Domain};

fn main() -> fkdirichlet::Result<()> {
    let dom = Domain::ball(vec![0.0; 3], 1.0)?;
    let cs = CoefficientSet::laplacian(dom.clone());
    let kc = KernelConstants::identity(3, 0.25, dom.diameter());
    let p = 2.0;
    let unit = (4.0 * std::f64::consts::PI * adaptive(|r| (1.0 - r * r).powi(2) * r * r, 0.0, 1.0, &[], 1e-12, 0.0)).sqrt();
    let mut pc = PathConfig::new(1e-3, 21);
    pc.refine = Some(BoundaryRefinement { band: 4.0, divisor: 16 });
    for (label, m) in [
        ("closed form", khasminskii_threshold(&kc, 3, p)?),
        ("with area", khasminskii_threshold_with_area(&kc, 3, p)?),
    ] {
        let kappa = m / unit;
        let w = FnField(move |x: &[f64]| kappa * (1.0 - x.iter().map(|v| v * v).sum::<f64>()));
        let r = occupation_bound_mc(&cs, &w, &[vec![0.0; 3]], 20_000, &pc)?;
        let q = &r.probes[0];
        println!(
            "{label:<12} M = {m:.4}  E∫w = {:.4} ± {:.4} (exact {:.4})  E exp∫w = {:.4}  θ = {}",
            q.occupation,
            q.occupation_se,
            kappa * 2.0 * (0.5 - 1.0 / 3.0 - 0.25 + 0.2),
            q.exp_moment,
            kc.theta
        );
    }
    Ok(())
}
