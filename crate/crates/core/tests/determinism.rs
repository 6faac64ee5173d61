use fkdirichlet::driver::{run_mc_estimate, verify_lemma22, RunConfig};

fn cfg(name: &str) -> RunConfig {
    let p = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name);
    RunConfig::from_file(&p).unwrap()
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn estimates_do_not_depend_on_worker_count() {
    let rc = cfg("full_nonsymmetric.cfg").with_overrides(&[("paths", "300".into())]).unwrap();
    let runs: Vec<Vec<(u64, u64)>> = [1, 3, 8]
        .into_iter()
        .map(|t| {
            in_pool(t, || run_mc_estimate(&rc).unwrap())
                .iter()
                .map(|r| (r.mean.to_bits(), r.stderr.to_bits()))
                .collect()
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0], runs[2]);
}

#[test]
fn coupled_refinement_is_reproducible() {
    let rc = cfg("bump_divergence.cfg").with_overrides(&[("lemma22.paths", "20".into())]).unwrap();
    let a = in_pool(1, || verify_lemma22(&rc).unwrap());
    let b = in_pool(5, || verify_lemma22(&rc).unwrap());
    let bits = |r: &fkdirichlet::driver::Lemma22Report| r.levels.iter().map(|l| l.rms.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
}

#[test]
fn seed_changes_the_draws() {
    let rc = cfg("harmonic_disk.cfg").with_overrides(&[("paths", "200".into())]).unwrap();
    let other = rc.with_overrides(&[("seed", "12".into())]).unwrap();
    assert_ne!(run_mc_estimate(&rc).unwrap()[0].mean, run_mc_estimate(&other).unwrap()[0].mean);
}

#[test]
fn resolvent_solve_does_not_depend_on_worker_count() {
    let rc = cfg("full_nonsymmetric.cfg");
    let sums: Vec<u64> = [1, 8]
        .into_iter()
        .map(|t| {
            in_pool(t, || {
                let xi = fkdirichlet::oracle::solve_xi_h_bhat(&rc.coeffs, rc.xi_delta).unwrap();
                xi.nodal_values().iter().map(|v| v.to_bits()).fold(0u64, |h, b| h.rotate_left(7) ^ b)
            })
        })
        .collect();
    assert_eq!(sums[0], sums[1]);
}
