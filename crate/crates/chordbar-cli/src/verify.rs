//! Self-verification suite: each property computes a worst-case error over a
//! fixed set of seeded instances and compares it against a pinned tolerance.

use crate::{Failure, VerifyArgs};
use chordbar::chordal::{self, CliqueForest, PickRule};
use chordbar::hessian::{self, HessianContext};
use chordbar::multifrontal::{self, CholeskyFactor};
use chordbar::oracle;
use chordbar::pattern::SparseSymMatrix;
use chordbar::supernodal;
use chordbar::symbolic::{self, SymbolicAnalysis};
use std::sync::Arc;

struct Instance {
    sym: Arc<SymbolicAnalysis>,
    x: SparseSymMatrix,
    f: CholeskyFactor,
    s: SparseSymMatrix,
}

struct Property {
    name: &'static str,
    tol: f64,
    run: fn(&[Instance], u64) -> Result<f64, String>,
}

const PROPERTIES: &[Property] = &[
    Property { name: "factor_product_roundtrip", tol: 1e-12, run: p_factor_roundtrip },
    Property { name: "projected_inverse_dense", tol: 1e-10, run: p_projected_inverse },
    Property { name: "completion_roundtrip", tol: 1e-9, run: p_completion_roundtrip },
    Property { name: "completion_factored_agreement", tol: 1e-11, run: p_completion_factored },
    Property { name: "supernodal_agreement", tol: 1e-11, run: p_supernodal },
    Property { name: "singleton_supernodes_exact", tol: 1e-14, run: p_singletons },
    Property { name: "hess_apply_dense", tol: 1e-9, run: p_hess_apply },
    Property { name: "hess_solve_roundtrip", tol: 1e-8, run: p_hess_solve },
    Property { name: "hess_factor_composition", tol: 1e-9, run: p_hess_factor },
    Property { name: "hess_adjoint_pairing", tol: 1e-10, run: p_hess_adjoint },
    Property { name: "hess_sparse_agreement", tol: 1e-12, run: p_hess_sparse },
    Property { name: "gradient_fd", tol: 1e-5, run: p_gradient_fd },
    Property { name: "clique_tree_structure", tol: 0.0, run: p_clique_tree },
];

pub fn run(args: &VerifyArgs) -> Result<bool, Failure> {
    if let Some(fault) = &args.inject_fault {
        if !PROPERTIES.iter().any(|p| p.name == fault) {
            return Err(Failure::Input(format!("unknown property '{fault}'")));
        }
    }

    let instances = build_instances(args.seed, args.max_n).map_err(Failure::Input)?;
    let selected: Vec<&Property> = PROPERTIES
        .iter()
        .filter(|p| args.suite.as_deref().map_or(true, |s| p.name.contains(s)))
        .collect();
    if selected.is_empty() {
        return Err(Failure::Input(format!(
            "no property matches '{}'",
            args.suite.as_deref().unwrap_or("")
        )));
    }

    let mut all_pass = true;
    for p in selected {
        let mut worst = (p.run)(&instances, args.seed).map_err(Failure::Check)?;
        if args.inject_fault.as_deref() == Some(p.name) {
            worst += if p.tol > 0.0 { 10.0 * p.tol } else { 1.0 };
        }
        let verdict = if worst <= p.tol { "PASS" } else { "FAIL" };
        println!("{verdict} {} tol {:.0e} worst {:.3e}", p.name, p.tol, worst);
        all_pass &= worst <= p.tol;
    }
    Ok(all_pass)
}

fn build_instances(seed: u64, max_n: usize) -> Result<Vec<Instance>, String> {
    let max_n = max_n.max(17);
    let patterns = vec![
        Arc::new(oracle::test_pattern_17()),
        oracle::gen_chordal(max_n, 0.1, seed.wrapping_mul(31).wrapping_add(1)),
        oracle::gen_chordal(2 * max_n / 3, 0.15, seed.wrapping_mul(31).wrapping_add(2)),
        Arc::new(oracle::band_pattern(max_n, 5)),
        Arc::new(oracle::arrow_pattern(max_n, 4)),
    ];
    let mut instances = Vec::new();
    for (i, pat) in patterns.into_iter().enumerate() {
        let sym = Arc::new(
            symbolic::etree_only(&pat).map_err(|e| format!("instance {i}: {e}"))?,
        );
        let x = oracle::gen_spd(sym.pattern(), seed.wrapping_add(100 + i as u64));
        let f = multifrontal::factor(&x, &sym).map_err(|e| format!("instance {i}: {e}"))?;
        let s = multifrontal::projected_inverse(&f);
        instances.push(Instance { sym, x, f, s });
    }
    Ok(instances)
}

fn rel_diff(a: &SparseSymMatrix, b: &SparseSymMatrix) -> f64 {
    let num = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    num / b.fro_norm().max(1e-300)
}

fn num_err(e: chordbar::Error) -> String {
    format!("numerical failure: {e}")
}

fn direction(inst: &Instance, seed: u64, offset: u64) -> SparseSymMatrix {
    oracle::gen_spd(inst.sym.pattern(), seed.wrapping_add(offset))
}

fn p_factor_roundtrip(instances: &[Instance], _seed: u64) -> Result<f64, String> {
    let mut worst = 0.0f64;
    for inst in instances {
        worst = worst.max(rel_diff(&multifrontal::product(&inst.f), &inst.x));
    }
    Ok(worst)
}

fn p_projected_inverse(instances: &[Instance], _seed: u64) -> Result<f64, String> {
    let mut worst = 0.0f64;
    for inst in instances {
        let dense = oracle::projected_inverse_dense(&inst.x)
            .ok_or("dense reference is singular")?;
        worst = worst.max(rel_diff(&inst.s, &dense));
    }
    Ok(worst)
}

fn p_completion_roundtrip(instances: &[Instance], _seed: u64) -> Result<f64, String> {
    let mut worst = 0.0f64;
    for inst in instances {
        let c = multifrontal::completion(&inst.s, &inst.sym).map_err(num_err)?;
        worst = worst.max(rel_diff(&multifrontal::projected_inverse(&c), &inst.s));
    }
    Ok(worst)
}

fn p_completion_factored(instances: &[Instance], _seed: u64) -> Result<f64, String> {
    let mut worst = 0.0f64;
    for inst in instances {
        let plain = multifrontal::completion(&inst.s, &inst.sym).map_err(num_err)?;
        let fact = multifrontal::completion_factored(&inst.s, &inst.sym).map_err(num_err)?;
        worst = worst.max(rel_diff(
            &multifrontal::product(&fact),
            &multifrontal::product(&plain),
        ));
    }
    Ok(worst)
}

fn p_supernodal(instances: &[Instance], _seed: u64) -> Result<f64, String> {
    let mut worst = 0.0f64;
    for inst in instances {
        let cf = Arc::new(chordal::clique_tree(&inst.sym, PickRule::default()));
        let bf = supernodal::sn_factor(&inst.x, &inst.sym, &cf).map_err(num_err)?;
        worst = worst.max(rel_diff(&supernodal::sn_product(&bf), &inst.x));
        worst = worst.max(rel_diff(&supernodal::sn_projected_inverse(&bf), &inst.s));

        let plain = multifrontal::completion(&inst.s, &inst.sym).map_err(num_err)?;
        let target = multifrontal::product(&plain);
        let blk = supernodal::sn_completion(&inst.s, &inst.sym, &cf).map_err(num_err)?;
        worst = worst.max(rel_diff(&supernodal::sn_product(&blk), &target));
        let blkf =
            supernodal::sn_completion_factored(&inst.s, &inst.sym, &cf).map_err(num_err)?;
        worst = worst.max(rel_diff(&supernodal::sn_product(&blkf), &target));
    }
    Ok(worst)
}

fn p_singletons(instances: &[Instance], _seed: u64) -> Result<f64, String> {
    let mut worst = 0.0f64;
    for inst in instances {
        let cf = Arc::new(CliqueForest::singletons(&inst.sym));
        let bf = supernodal::sn_factor(&inst.x, &inst.sym, &cf).map_err(num_err)?;
        for v in 0..inst.sym.order() {
            let d = inst.f.diag()[v];
            worst = worst.max((bf.dblock(v)[(0, 0)] - d).abs() / d.abs().max(1e-300));
            for (r, &l) in inst.f.lcol(v).iter().enumerate() {
                worst =
                    worst.max((bf.lblock(v)[(r, 0)] - l).abs() / l.abs().max(1.0));
            }
        }
    }
    Ok(worst)
}

fn p_hess_apply(instances: &[Instance], seed: u64) -> Result<f64, String> {
    let mut worst = 0.0f64;
    for inst in instances {
        let ctx = HessianContext::new(inst.f.clone());
        let y = direction(inst, seed, 1000);
        let dense = oracle::hess_apply_dense(&inst.x, &y).ok_or("dense reference is singular")?;
        let w = hessian::hess_apply(&ctx, &y).map_err(num_err)?;
        worst = worst.max(rel_diff(&w, &dense));
    }
    Ok(worst)
}

fn p_hess_solve(instances: &[Instance], seed: u64) -> Result<f64, String> {
    let mut worst = 0.0f64;
    for inst in instances {
        let ctx = HessianContext::new(inst.f.clone());
        let y = direction(inst, seed, 2000);
        let t = hessian::hess_solve(&ctx, &y).map_err(num_err)?;
        let back = hessian::hess_apply(&ctx, &t).map_err(num_err)?;
        worst = worst.max(rel_diff(&back, &y));
    }
    Ok(worst)
}

fn p_hess_factor(instances: &[Instance], seed: u64) -> Result<f64, String> {
    let mut worst = 0.0f64;
    for inst in instances {
        let ctx = HessianContext::new(inst.f.clone());
        let y = direction(inst, seed, 3000);
        let half = hessian::hess_factor_apply(&ctx, &y).map_err(num_err)?;
        let composed = hessian::hess_factor_adjoint(&ctx, &half).map_err(num_err)?;
        let full = hessian::hess_apply(&ctx, &y).map_err(num_err)?;
        worst = worst.max(rel_diff(&composed, &full));
    }
    Ok(worst)
}

fn p_hess_adjoint(instances: &[Instance], seed: u64) -> Result<f64, String> {
    let mut worst = 0.0f64;
    for inst in instances {
        let ctx = HessianContext::new(inst.f.clone());
        let y = direction(inst, seed, 4000);
        let w = direction(inst, seed, 5000);
        let ry = hessian::hess_factor_apply(&ctx, &y).map_err(num_err)?;
        let rw = hessian::hess_factor_adjoint(&ctx, &w).map_err(num_err)?;
        let lhs = ry.inner(&w);
        let rhs = y.inner(&rw);
        let scale = ry.fro_norm() * w.fro_norm();
        worst = worst.max((lhs - rhs).abs() / scale.max(1.0));
    }
    Ok(worst)
}

fn p_hess_sparse(instances: &[Instance], seed: u64) -> Result<f64, String> {
    use rand::Rng;
    use rand::SeedableRng;
    let mut worst = 0.0f64;
    for (i, inst) in instances.iter().enumerate() {
        let mut rng =
            rand_chacha::ChaCha8Rng::seed_from_u64(seed.wrapping_add(6000 + i as u64));
        let ctx = HessianContext::new(inst.f.clone());
        let pat = inst.sym.pattern();
        let n = inst.sym.order();
        let mut y = SparseSymMatrix::zeros(pat.clone());
        let mut support = Vec::new();
        for _ in 0..2 {
            let j = rng.random_range(0..n);
            let col = pat.col(j);
            let r = col[rng.random_range(0..col.len())];
            y.set(r, j, rng.random::<f64>() * 2.0 - 1.0);
            support.push(j);
        }
        support.sort_unstable();
        support.dedup();
        let full = hessian::hess_factor_apply(&ctx, &y).map_err(num_err)?;
        let pruned = hessian::hess_factor_apply_sparse(&ctx, &y, &support).map_err(num_err)?;
        let scale = full.fro_norm().max(1.0);
        for &j in &pruned.reachable {
            for (a, b) in full.col_values(j).iter().zip(pruned.w.col_values(j)) {
                worst = worst.max((a - b).abs() / scale);
            }
        }
    }
    Ok(worst)
}

fn p_gradient_fd(instances: &[Instance], seed: u64) -> Result<f64, String> {
    let mut worst = 0.0f64;
    for inst in instances {
        let y = direction(inst, seed, 7000);
        let step = oracle::default_fd_step(&inst.x, &y);
        let fd = oracle::finite_diff_gradient(&inst.x, &y, step)
            .map_err(|e| format!("numerical failure: {e}"))?;
        let analytic = -inst.s.inner(&y);
        worst = worst.max((analytic - fd).abs() / fd.abs().max(1.0));
    }
    Ok(worst)
}

fn p_clique_tree(instances: &[Instance], _seed: u64) -> Result<f64, String> {
    let mut violations = 0usize;
    for inst in instances {
        for rule in [PickRule::MaxDegreeEligible, PickRule::FirstEligible] {
            let cf = chordal::clique_tree(&inst.sym, rule);
            if chordal::verify_clique_tree(&cf, &inst.sym).is_err() {
                violations += 1;
            }
        }
    }
    Ok(violations as f64)
}
