//! Benchmark driver: times the sweep algorithms on generated or ingested
//! patterns and emits one CSV row per (algorithm, instance).

use crate::mm;
use crate::order::min_degree_order;
use crate::{BenchArgs, Failure, PatternKind, SparseHessianArgs};
use chordbar::chordal::{self, CliqueForest, PickRule};
use chordbar::hessian::{self, HessianContext};
use chordbar::multifrontal::{self, CholeskyFactor, Counters};
use chordbar::oracle;
use chordbar::pattern::SparseSymMatrix;
use chordbar::supernodal::{self, BlockCholeskyFactor};
use chordbar::symbolic::{self, SymbolicAnalysis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use std::io::Write as _;
use std::sync::Arc;
use std::time::Instant;

pub const CSV_HEADER: &str =
    "algorithm,pattern_kind,n,w_or_file,rep,seconds,checksum,counter1,counter2";

const SCALAR_ALGOS: &[&str] = &["factor", "projected_inverse", "completion", "completion_factored"];
const BLOCK_ALGOS: &[&str] = &[
    "sn_factor",
    "sn_projected_inverse",
    "sn_completion",
    "sn_completion_factored",
];
const HESS_ALGOS: &[&str] = &["hess_apply", "hess_solve", "hess_factor_apply"];

struct Instance {
    kind: String,
    w_or_file: String,
    sym: Arc<SymbolicAnalysis>,
}

struct Prepared {
    x: SparseSymMatrix,
    f: CholeskyFactor,
    s: SparseSymMatrix,
    cf: Option<Arc<CliqueForest>>,
    bf: Option<BlockCholeskyFactor>,
    ctx: Option<HessianContext>,
    y: SparseSymMatrix,
}

struct Row {
    algorithm: String,
    kind: String,
    n: usize,
    w_or_file: String,
    rep: usize,
    seconds: f64,
    checksum: u64,
    counter1: u64,
    counter2: u64,
}

impl Row {
    fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{:.6e},{:016x},{},{}",
            self.algorithm,
            self.kind,
            self.n,
            self.w_or_file,
            self.rep,
            self.seconds,
            self.checksum,
            self.counter1,
            self.counter2
        )
    }
}

struct Checksum(u64);

impl Checksum {
    fn new() -> Checksum {
        Checksum(0xcbf29ce484222325)
    }

    fn update(&mut self, values: &[f64]) {
        for v in values {
            for b in v.to_le_bytes() {
                self.0 ^= b as u64;
                self.0 = self.0.wrapping_mul(0x100000001b3);
            }
        }
    }

    fn finish(&self) -> u64 {
        self.0
    }
}

fn factor_checksum(f: &CholeskyFactor) -> u64 {
    let mut c = Checksum::new();
    c.update(f.lvals());
    c.update(f.diag());
    c.finish()
}

fn block_checksum(f: &BlockCholeskyFactor) -> u64 {
    let mut c = Checksum::new();
    for i in 0..f.forest().len() {
        c.update(f.dblock(i).data());
        c.update(f.lblock(i).data());
    }
    c.finish()
}

fn matrix_checksum(m: &SparseSymMatrix) -> u64 {
    let mut c = Checksum::new();
    c.update(m.values());
    c.finish()
}

fn check_err(e: chordbar::Error) -> Failure {
    Failure::Check(format!("numerical failure: {e}"))
}

pub fn run(args: &BenchArgs) -> Result<(), Failure> {
    for name in &args.algorithms {
        let known = SCALAR_ALGOS.contains(&name.as_str())
            || BLOCK_ALGOS.contains(&name.as_str())
            || HESS_ALGOS.contains(&name.as_str());
        if !known {
            return Err(Failure::Input(format!("unknown algorithm '{name}'")));
        }
    }
    if args.reps == 0 {
        return Err(Failure::Input("--reps must be at least 1".to_string()));
    }

    let instances = build_instances(args)?;
    let mut out = String::new();
    writeln!(out, "{CSV_HEADER}").unwrap();

    let mut check_failures = Vec::new();
    for inst in &instances {
        check_memory(args, inst)?;
        let prep = prepare(args, inst)?;
        for name in &args.algorithms {
            let row = time_algorithm(name, inst, &prep, args.reps)?;
            writeln!(out, "{}", row.to_csv()).unwrap();
        }
        if inst.sym.order() <= args.verify_cap {
            for line in cross_check(&args.algorithms, &prep)? {
                eprintln!("{line}");
                if line.starts_with("FAIL") {
                    check_failures.push(line);
                }
            }
        } else {
            eprintln!(
                "check skipped: n = {} exceeds --verify-cap {}",
                inst.sym.order(),
                args.verify_cap
            );
        }
    }

    write_output(args.out.as_deref(), &out)?;
    if check_failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(format!(
            "{} cross-check(s) failed",
            check_failures.len()
        )))
    }
}

fn write_output(path: Option<&std::path::Path>, contents: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, contents)
            .map_err(|e| Failure::Input(format!("{}: {e}", p.display()))),
        None => {
            std::io::stdout()
                .write_all(contents.as_bytes())
                .map_err(|e| Failure::Input(format!("stdout: {e}")))
        }
    }
}

fn build_instances(args: &BenchArgs) -> Result<Vec<Instance>, Failure> {
    match args.pattern {
        PatternKind::Band | PatternKind::Arrow => {
            let kind = match args.pattern {
                PatternKind::Band => "band",
                _ => "arrow",
            };
            let mut instances = Vec::new();
            for &w in &args.w {
                if w < 1 {
                    return Err(Failure::Input("--w must be at least 1".to_string()));
                }
                if args.n <= 3 * w {
                    return Err(Failure::Input(format!(
                        "--n {} is too small for bandwidth {w}; need n > 3w",
                        args.n
                    )));
                }
                let pat = Arc::new(match args.pattern {
                    PatternKind::Band => oracle::band_pattern(args.n, w),
                    _ => oracle::arrow_pattern(args.n, w),
                });
                let sym = symbolic::etree_only(&pat)
                    .map_err(|e| Failure::Input(format!("pattern rejected: {e}")))?;
                instances.push(Instance {
                    kind: kind.to_string(),
                    w_or_file: w.to_string(),
                    sym: Arc::new(sym),
                });
            }
            Ok(instances)
        }
        PatternKind::RandomChordal => {
            if !(args.density > 0.0 && args.density <= 1.0) {
                return Err(Failure::Input(format!(
                    "--density {} is outside (0, 1]",
                    args.density
                )));
            }
            let pat = oracle::gen_chordal(args.n, args.density, args.seed);
            let sym = symbolic::etree_only(&pat)
                .map_err(|e| Failure::Input(format!("pattern rejected: {e}")))?;
            Ok(vec![Instance {
                kind: "random-chordal".to_string(),
                w_or_file: format!("{}", args.density),
                sym: Arc::new(sym),
            }])
        }
        PatternKind::File => {
            let path = args
                .path
                .as_deref()
                .ok_or_else(|| Failure::Input("--pattern file requires --path".to_string()))?;
            let mmp = mm::read_pattern(path).map_err(Failure::Input)?;
            if mmp.mirrored > 0 {
                eprintln!(
                    "note: {} upper-triangle entries were mirrored into the lower triangle",
                    mmp.mirrored
                );
            }
            let raw = chordbar::SparsityPattern::from_entries(mmp.n, mmp.entries)
                .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
            let ord = min_degree_order(&raw);
            let sym = symbolic::fill_pattern(&raw, &ord)
                .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
            let basename = path
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string());
            Ok(vec![Instance {
                kind: "file".to_string(),
                w_or_file: basename,
                sym: Arc::new(sym),
            }])
        }
    }
}

fn check_memory(args: &BenchArgs, inst: &Instance) -> Result<(), Failure> {
    let mut scalars = inst.sym.peak_front_scalars();
    let needs_rcache = args
        .algorithms
        .iter()
        .any(|a| a == "hess_solve" || a == "hess_factor_apply");
    if needs_rcache {
        let sym = &inst.sym;
        scalars += (0..sym.order()).map(|j| sym.degree(j) * sym.degree(j)).sum::<usize>();
    }
    let bytes = scalars * 8;
    if bytes > args.mem_cap {
        return Err(Failure::Input(format!(
            "estimated working set {bytes} bytes exceeds --mem-cap {}",
            args.mem_cap
        )));
    }
    Ok(())
}

fn prepare(args: &BenchArgs, inst: &Instance) -> Result<Prepared, Failure> {
    let sym = &inst.sym;
    let x = oracle::gen_spd(sym.pattern(), args.seed);
    let f = multifrontal::factor(&x, sym).map_err(check_err)?;
    let s = multifrontal::projected_inverse(&f);

    let wants = |set: &[&str]| args.algorithms.iter().any(|a| set.contains(&a.as_str()));
    let cf = if wants(BLOCK_ALGOS) {
        Some(Arc::new(chordal::clique_tree(sym, PickRule::default())))
    } else {
        None
    };
    let bf = match &cf {
        Some(cf) if args.algorithms.iter().any(|a| a == "sn_projected_inverse") => {
            Some(supernodal::sn_factor(&x, sym, cf).map_err(check_err)?)
        }
        _ => None,
    };
    let (ctx, y) = if wants(HESS_ALGOS) {
        let ctx = HessianContext::new(f.clone());
        let y = oracle::gen_spd(sym.pattern(), args.seed.wrapping_add(1));
        (Some(ctx), y)
    } else {
        (None, SparseSymMatrix::zeros(sym.pattern().clone()))
    };
    Ok(Prepared { x, f, s, cf, bf, ctx, y })
}

fn time_algorithm(
    name: &str,
    inst: &Instance,
    prep: &Prepared,
    reps: usize,
) -> Result<Row, Failure> {
    let sym = &inst.sym;
    let run = |prep: &Prepared| -> Result<(u64, Counters), Failure> {
        match name {
            "factor" => {
                let (f, c) = multifrontal::factor_counted(&prep.x, sym).map_err(check_err)?;
                Ok((factor_checksum(&f), c))
            }
            "projected_inverse" => {
                let (s, c) = multifrontal::projected_inverse_counted(&prep.f);
                Ok((matrix_checksum(&s), c))
            }
            "completion" => {
                let (f, c) = multifrontal::completion_counted(&prep.s, sym).map_err(check_err)?;
                Ok((factor_checksum(&f), c))
            }
            "completion_factored" => {
                let (f, c) =
                    multifrontal::completion_factored_counted(&prep.s, sym).map_err(check_err)?;
                Ok((factor_checksum(&f), c))
            }
            "sn_factor" => {
                let cf = prep.cf.as_ref().unwrap();
                let (f, c) = supernodal::sn_factor_counted(&prep.x, sym, cf).map_err(check_err)?;
                Ok((block_checksum(&f), c))
            }
            "sn_projected_inverse" => {
                let bf = prep.bf.as_ref().unwrap();
                let (s, c) = supernodal::sn_projected_inverse_counted(bf);
                Ok((matrix_checksum(&s), c))
            }
            "sn_completion" => {
                let cf = prep.cf.as_ref().unwrap();
                let (f, c) =
                    supernodal::sn_completion_counted(&prep.s, sym, cf).map_err(check_err)?;
                Ok((block_checksum(&f), c))
            }
            "sn_completion_factored" => {
                let cf = prep.cf.as_ref().unwrap();
                let (f, c) = supernodal::sn_completion_factored_counted(&prep.s, sym, cf)
                    .map_err(check_err)?;
                Ok((block_checksum(&f), c))
            }
            "hess_apply" => {
                let ctx = prep.ctx.as_ref().unwrap();
                let w = hessian::hess_apply(ctx, &prep.y).map_err(check_err)?;
                Ok((matrix_checksum(&w), Counters::default()))
            }
            "hess_solve" => {
                let ctx = prep.ctx.as_ref().unwrap();
                let w = hessian::hess_solve(ctx, &prep.y).map_err(check_err)?;
                Ok((matrix_checksum(&w), Counters::default()))
            }
            "hess_factor_apply" => {
                let ctx = prep.ctx.as_ref().unwrap();
                let w = hessian::hess_factor_apply(ctx, &prep.y).map_err(check_err)?;
                Ok((matrix_checksum(&w), Counters::default()))
            }
            _ => unreachable!("algorithm list is validated up front"),
        }
    };

    // Warm run, untimed. Besides paging in the inputs this populates any
    // lazily built context state, so the timed repetitions measure the
    // steady-state cost of the sweep itself.
    let (checksum, counters) = run(prep)?;

    let mut times = Vec::with_capacity(reps);
    for _ in 0..reps {
        let t0 = Instant::now();
        let (c, _) = run(prep)?;
        times.push(t0.elapsed().as_secs_f64());
        if c != checksum {
            return Err(Failure::Check(format!(
                "{name}: checksum differs between repetitions"
            )));
        }
    }
    times.sort_by(f64::total_cmp);
    let seconds = times[times.len() / 2];

    Ok(Row {
        algorithm: name.to_string(),
        kind: inst.kind.clone(),
        n: sym.order(),
        w_or_file: inst.w_or_file.clone(),
        rep: reps,
        seconds,
        checksum,
        counter1: counters.frontal_assemblies,
        counter2: counters.retri_rotations,
    })
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

fn cross_check(algorithms: &[String], prep: &Prepared) -> Result<Vec<String>, Failure> {
    let sym = prep.f.sym().clone();
    let mut lines = Vec::new();
    let mut report = |name: &str, err: f64, tol: f64| {
        let verdict = if err <= tol { "ok" } else { "FAIL" };
        lines.push(format!("{verdict} check {name}: error {err:.3e} tol {tol:.0e}"));
    };

    for name in algorithms {
        match name.as_str() {
            "factor" => {
                let back = multifrontal::product(&prep.f);
                report("factor_roundtrip", rel_diff(&back, &prep.x), 1e-12);
            }
            "projected_inverse" => {
                let dense = oracle::projected_inverse_dense(&prep.x)
                    .ok_or_else(|| Failure::Check("dense reference is singular".to_string()))?;
                report("projected_inverse_dense", rel_diff(&prep.s, &dense), 1e-10);
            }
            "completion" => {
                let c = multifrontal::completion(&prep.s, &sym).map_err(check_err)?;
                let back = multifrontal::projected_inverse(&c);
                report("completion_roundtrip", rel_diff(&back, &prep.s), 1e-9);
            }
            "completion_factored" => {
                let plain = multifrontal::completion(&prep.s, &sym).map_err(check_err)?;
                let fact = multifrontal::completion_factored(&prep.s, &sym).map_err(check_err)?;
                report(
                    "completion_factored_agreement",
                    rel_diff(&multifrontal::product(&fact), &multifrontal::product(&plain)),
                    1e-11,
                );
            }
            "sn_factor" => {
                let cf = prep.cf.as_ref().unwrap();
                let bf = supernodal::sn_factor(&prep.x, &sym, cf).map_err(check_err)?;
                report(
                    "sn_factor_agreement",
                    rel_diff(&supernodal::sn_product(&bf), &prep.x),
                    1e-11,
                );
            }
            "sn_projected_inverse" => {
                let bf = prep.bf.as_ref().unwrap();
                report(
                    "sn_projected_inverse_agreement",
                    rel_diff(&supernodal::sn_projected_inverse(bf), &prep.s),
                    1e-11,
                );
            }
            "sn_completion" => {
                let cf = prep.cf.as_ref().unwrap();
                let plain = multifrontal::completion(&prep.s, &sym).map_err(check_err)?;
                let blk = supernodal::sn_completion(&prep.s, &sym, cf).map_err(check_err)?;
                report(
                    "sn_completion_agreement",
                    rel_diff(&supernodal::sn_product(&blk), &multifrontal::product(&plain)),
                    1e-11,
                );
            }
            "sn_completion_factored" => {
                let cf = prep.cf.as_ref().unwrap();
                let plain = multifrontal::completion(&prep.s, &sym).map_err(check_err)?;
                let blk =
                    supernodal::sn_completion_factored(&prep.s, &sym, cf).map_err(check_err)?;
                report(
                    "sn_completion_factored_agreement",
                    rel_diff(&supernodal::sn_product(&blk), &multifrontal::product(&plain)),
                    1e-11,
                );
            }
            "hess_apply" => {
                let ctx = prep.ctx.as_ref().unwrap();
                let dense = oracle::hess_apply_dense(&prep.x, &prep.y)
                    .ok_or_else(|| Failure::Check("dense reference is singular".to_string()))?;
                let w = hessian::hess_apply(ctx, &prep.y).map_err(check_err)?;
                report("hess_apply_dense", rel_diff(&w, &dense), 1e-9);
            }
            "hess_solve" => {
                let ctx = prep.ctx.as_ref().unwrap();
                let t = hessian::hess_solve(ctx, &prep.y).map_err(check_err)?;
                let back = hessian::hess_apply(ctx, &t).map_err(check_err)?;
                report("hess_solve_roundtrip", rel_diff(&back, &prep.y), 1e-8);
            }
            "hess_factor_apply" => {
                let ctx = prep.ctx.as_ref().unwrap();
                let half = hessian::hess_factor_apply(ctx, &prep.y).map_err(check_err)?;
                let composed = hessian::hess_factor_adjoint(ctx, &half).map_err(check_err)?;
                let full = hessian::hess_apply(ctx, &prep.y).map_err(check_err)?;
                report("hess_factor_composition", rel_diff(&composed, &full), 1e-9);
            }
            _ => unreachable!("algorithm list is validated up front"),
        }
    }
    Ok(lines)
}

pub fn run_sparse_hessian(args: &SparseHessianArgs) -> Result<(), Failure> {
    if args.w < 1 || args.n <= 3 * args.w {
        return Err(Failure::Input(format!(
            "need --w at least 1 and --n > 3w, got n {} w {}",
            args.n, args.w
        )));
    }
    if args.trials == 0 || args.nnz == 0 {
        return Err(Failure::Input("--trials and --nnz must be at least 1".to_string()));
    }

    let pat = Arc::new(oracle::band_pattern(args.n, args.w));
    let sym = Arc::new(
        symbolic::etree_only(&pat).map_err(|e| Failure::Input(format!("pattern rejected: {e}")))?,
    );
    let x = oracle::gen_spd(sym.pattern(), args.seed);
    let f = multifrontal::factor(&x, &sym).map_err(check_err)?;
    let ctx = HessianContext::new(f);

    let mut rng = ChaCha8Rng::seed_from_u64(args.seed.wrapping_mul(0x9e3779b97f4a7c15));
    let mut out = String::new();
    writeln!(out, "{CSV_HEADER}").unwrap();

    // Populate the cached inverse blocks before any timing.
    let warm = oracle::gen_spd(sym.pattern(), args.seed.wrapping_add(7));
    hessian::hess_factor_apply(&ctx, &warm).map_err(check_err)?;

    let mut ratios = Vec::with_capacity(args.trials);
    for trial in 0..args.trials {
        let mut y = SparseSymMatrix::zeros(sym.pattern().clone());
        let mut support = Vec::new();
        for _ in 0..args.nnz {
            let j = rng.random_range(0..args.n);
            let col = sym.pattern().col(j);
            let r = col[rng.random_range(0..col.len())];
            y.set(r, j, rng.random::<f64>() * 2.0 - 1.0);
            support.push(j);
        }
        support.sort_unstable();
        support.dedup();

        let t0 = Instant::now();
        let full = hessian::hess_factor_apply(&ctx, &y).map_err(check_err)?;
        let t_full = t0.elapsed().as_secs_f64();

        let t1 = Instant::now();
        let pruned = hessian::hess_factor_apply_sparse(&ctx, &y, &support).map_err(check_err)?;
        let t_pruned = t1.elapsed().as_secs_f64();

        let mut reachable = vec![false; args.n];
        for &j in &pruned.reachable {
            reachable[j] = true;
        }
        let mut worst = 0.0f64;
        for j in 0..args.n {
            if !reachable[j] {
                continue;
            }
            for (a, b) in full.col_values(j).iter().zip(pruned.w.col_values(j)) {
                worst = worst.max((a - b).abs());
            }
        }
        let scale = full.fro_norm().max(1.0);
        if worst / scale > 1e-12 {
            return Err(Failure::Check(format!(
                "trial {trial}: pruned result deviates by {:.3e} on the reachable set",
                worst / scale
            )));
        }

        ratios.push(t_full / t_pruned);
        let rows = [
            ("hess_factor_apply", t_full, matrix_checksum(&full), args.n as u64),
            (
                "hess_factor_apply_sparse",
                t_pruned,
                matrix_checksum(&pruned.w),
                pruned.reachable.len() as u64,
            ),
        ];
        for (alg, secs, sum, touched) in rows {
            let row = Row {
                algorithm: alg.to_string(),
                kind: "band".to_string(),
                n: args.n,
                w_or_file: args.w.to_string(),
                rep: trial + 1,
                seconds: secs,
                checksum: sum,
                counter1: touched,
                counter2: 0,
            };
            writeln!(out, "{}", row.to_csv()).unwrap();
        }
    }

    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let row = Row {
        algorithm: "pruning_ratio".to_string(),
        kind: "band".to_string(),
        n: args.n,
        w_or_file: args.w.to_string(),
        rep: args.trials,
        seconds: mean,
        checksum: 0,
        counter1: 0,
        counter2: 0,
    };
    writeln!(out, "{}", row.to_csv()).unwrap();
    eprintln!("mean full/pruned time ratio over {} trials: {mean:.2}", args.trials);
    write_output(args.out.as_deref(), &out)
}
