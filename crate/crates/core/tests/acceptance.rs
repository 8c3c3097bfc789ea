//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use itertools::Itertools;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use riskcal::conditional::{cone_system, dual_vertices, restricted_eval, verify_cone_witness};
use riskcal::lift::GeometryPoint;
use riskcal::lp::certificate_residuals;
use riskcal::probes::{crafted_probes, random_f1_probes, random_probes};
use riskcal::schema::{LoadedSpace, SpaceFile, UtilityFile};
use riskcal::space::{conditional_mass, independence_check};
use riskcal::utility::{is_commonotone_pair, ProductGrid};
use riskcal::{
    additivity_probe, build_uniform_grid, choquet_eval, conditional_eval, cone_decompose,
    core_extreme_points, lift_pair, recompose, tc_gap, CoherentUtility, ConditionalUtility,
    DistortionFunction, Filtration, OutcomeSpace, RandomVariable,
};

const TOL: f64 = 1e-9;
const SEED: u64 = 20181201;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration) -> Result<Duration, String> {
    let took = start.elapsed();
    ensure(took < limit, || {
        format!("runtime {took:?} exceeds {limit:?}")
    })?;
    Ok(took)
}

fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

fn load(name: &str) -> (SpaceFile, LoadedSpace) {
    let text = std::fs::read_to_string(data_path(name)).expect("shipped data file");
    let file = SpaceFile::parse(&text).expect("shipped file parses");
    let loaded = file.load().expect("shipped file is valid");
    (file, loaded)
}

fn utility_file(name: &str) -> CoherentUtility {
    let text = std::fs::read_to_string(data_path(name)).expect("shipped utility file");
    UtilityFile::parse(&text).unwrap().utility.build().unwrap()
}

fn rv(v: Vec<f64>) -> RandomVariable {
    RandomVariable::new(v).unwrap()
}

/// Lower-tail average `(1/α) ∫_0^α q(s) ds` computed from the quantile
/// function, independent of the Choquet code.
fn es_oracle(values: &[f64], probs: &[f64], alpha: f64) -> f64 {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut left = alpha;
    let mut acc = 0.0;
    for i in order {
        if left <= 0.0 {
            break;
        }
        let take = probs[i].min(left);
        acc += take * values[i];
        left -= take;
    }
    acc / alpha
}

/// Blockwise es under the conditional law.
fn conditional_es_oracle(
    x: &RandomVariable,
    space: &OutcomeSpace,
    filt: &Filtration,
    alpha: f64,
) -> Vec<f64> {
    filt.f1
        .blocks()
        .iter()
        .map(|block| {
            let total: f64 = block.iter().map(|&i| space.probs()[i]).sum();
            let vals: Vec<f64> = block.iter().map(|&i| x[i]).collect();
            let probs: Vec<f64> = block.iter().map(|&i| space.probs()[i] / total).collect();
            es_oracle(&vals, &probs, alpha)
        })
        .collect()
}

/// Minimum of `E_Q[x]` over every permutation marginal vector, without
/// deduplication.
fn permutation_vertices(psi: &DistortionFunction, probs: &[f64]) -> Vec<Vec<f64>> {
    let n = probs.len();
    (0..n)
        .permutations(n)
        .map(|perm| {
            let mut q = vec![0.0; n];
            let mut before = 0.0;
            let mut mass = 0.0;
            for (pos, &i) in perm.iter().enumerate() {
                mass += probs[i];
                let now = if pos + 1 == n { 1.0 } else { psi.eval(mass) };
                q[i] = now - before;
                before = now;
            }
            q
        })
        .collect()
}

fn min_dot(vertices: &[Vec<f64>], x: &[f64]) -> f64 {
    vertices
        .iter()
        .map(|q| q.iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let (_, loaded) = load("eight_outcome.json");
    let space = &loaded.space;
    let n = space.len();
    let utilities: Vec<(CoherentUtility, bool)> = vec![
        (utility_file("expectation.json"), false),
        (utility_file("es_quarter.json"), false),
        (utility_file("es_half.json"), false),
        (utility_file("power_half.json"), false),
        (utility_file("scenario_eight.json"), false),
        (
            CoherentUtility::ProductExample(ProductGrid { rows: 2, cols: 4 }),
            true,
        ),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut checks = 0usize;
    for (u, nonnegative) in &utilities {
        let lo = if *nonnegative { 0.0 } else { -1.0 };
        let xs = random_probes(n, 500, SEED, lo, 1.0);
        let ys = random_probes(n, 500, SEED + 1, lo, 1.0);
        let zero = u
            .eval(&RandomVariable::zeros(n), space)
            .map_err(|e| e.to_string())?;
        ensure(zero.abs() <= TOL, || format!("{u}: u(0) = {zero}"))?;
        for (x, y) in xs.iter().zip(&ys) {
            let ux = u.eval(x, space).unwrap();
            let uy = u.eval(y, space).unwrap();
            // monotonicity
            let bumped = x + &y.map(|v| v.abs());
            let ub = u.eval(&bumped, space).unwrap();
            ensure(ub >= ux - TOL, || format!("{u}: monotonicity {ub} < {ux}"))?;
            // translation
            let c: f64 = rng.gen_range(if *nonnegative { 0.0..=2.0 } else { -2.0..=2.0 });
            let ut = u.eval(&x.shift(c), space).unwrap();
            ensure((ut - ux - c).abs() <= TOL, || {
                format!("{u}: translation {ut} vs {}", ux + c)
            })?;
            // positive homogeneity
            let l: f64 = rng.gen_range(0.0..=3.0);
            let uh = u.eval(&x.scale(l), space).unwrap();
            ensure((uh - l * ux).abs() <= TOL, || {
                format!("{u}: homogeneity {uh} vs {}", l * ux)
            })?;
            // superadditivity
            let us = u.eval(&(x + y), space).unwrap();
            ensure(us >= ux + uy - TOL, || {
                format!("{u}: superadditivity {us} < {}", ux + uy)
            })?;
            checks += 4;
        }
    }
    let took = within(start, Duration::from_secs(5))?;
    Ok(format!(
        "{} utilities, {checks} axiom checks, {took:.2?}",
        utilities.len()
    ))
}

fn small_spaces() -> Vec<OutcomeSpace> {
    let mut spaces: Vec<OutcomeSpace> =
        (2..=6).map(|n| OutcomeSpace::uniform(n).unwrap()).collect();
    for masses in [
        vec![(1, 6), (2, 6), (3, 6)],
        vec![(1, 8), (1, 8), (2, 8), (4, 8)],
        vec![(2, 8), (1, 8), (2, 8), (3, 8)],
        vec![(1, 15), (2, 15), (3, 15), (4, 15), (5, 15)],
        vec![(1, 12), (1, 12), (2, 12), (2, 12), (3, 12), (3, 12)],
    ] {
        spaces.push(OutcomeSpace::from_fractions(&masses).unwrap());
    }
    spaces
}

fn distortions() -> Vec<DistortionFunction> {
    vec![
        DistortionFunction::Expectation,
        DistortionFunction::es(1, 4).unwrap(),
        DistortionFunction::es(1, 3).unwrap(),
        DistortionFunction::es(1, 2).unwrap(),
        DistortionFunction::power(0.5).unwrap(),
        DistortionFunction::power(1.0).unwrap(),
        DistortionFunction::piecewise(vec![(0.0, 0.0), (0.5, 0.2), (1.0, 1.0)]).unwrap(),
    ]
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut pairs = 0;
    let mut worst: f64 = 0.0;
    for (s, space) in small_spaces().iter().enumerate() {
        let probes = random_probes(space.len(), 500, SEED + s as u64, -1.0, 1.0);
        for psi in distortions() {
            let core = core_extreme_points(&psi, space).map_err(|e| e.to_string())?;
            let oracle = permutation_vertices(&psi, space.probs());
            for x in &probes {
                let c = choquet_eval(x, &psi, space);
                let lib = min_dot(core.measures(), x.values());
                let independent = min_dot(&oracle, x.values());
                worst = worst.max((c - lib).abs()).max((c - independent).abs());
            }
            ensure(worst <= TOL, || {
                format!("{psi} on {} outcomes: deviation {worst:e}", space.len())
            })?;
            pairs += 1;
        }
    }
    let took = within(start, Duration::from_secs(30))?;
    Ok(format!(
        "{pairs} (space, distortion) pairs × 500 probes, max deviation {worst:.1e}, {took:.2?}"
    ))
}

fn monotone_transform(rng: &mut ChaCha8Rng) -> impl Fn(f64) -> f64 {
    let kind = rng.gen_range(0..4);
    let a: f64 = rng.gen_range(0.0..=2.0);
    let b: f64 = rng.gen_range(-1.0..=1.0);
    move |z: f64| match kind {
        0 => a * z + b,
        1 => a * (z - b).max(0.0),
        2 => a * (3.0 * z).floor() / 3.0,
        _ => a * z.exp() + b,
    }
}

fn criterion_3() -> Outcome {
    let spaces = vec![
        OutcomeSpace::uniform(8).unwrap(),
        OutcomeSpace::from_fractions(&[(1, 10), (2, 10), (3, 10), (4, 10)]).unwrap(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst: f64 = 0.0;
    let mut pairs = 0;
    for space in &spaces {
        for z in random_probes(space.len(), 100, SEED + space.len() as u64, -1.0, 1.0) {
            let t1 = monotone_transform(&mut rng);
            let t2 = monotone_transform(&mut rng);
            let x = z.map(&t1);
            let y = z.map(&t2);
            ensure(
                is_commonotone_pair(&x, &y, space).unwrap().commonotone,
                || "generated pair not commonotone".into(),
            )?;
            for psi in distortions() {
                let gap = choquet_eval(&(&x + &y), &psi, space)
                    - choquet_eval(&x, &psi, space)
                    - choquet_eval(&y, &psi, space);
                worst = worst.max(gap.abs());
            }
            pairs += 1;
        }
    }
    ensure(worst <= TOL, || {
        format!("commonotone additivity gap {worst:e}")
    })?;

    let es = DistortionFunction::es(1, 2).unwrap();
    let space = &spaces[0];
    let mut positive = 0;
    let mut largest: f64 = 0.0;
    for z in random_probes(space.len(), 50, SEED + 99, -1.0, 1.0) {
        let t = monotone_transform(&mut rng);
        let x = z.clone();
        let y = z.map(|v| -t(v));
        let surplus = choquet_eval(&(&x + &y), &es, space)
            - choquet_eval(&x, &es, space)
            - choquet_eval(&y, &es, space);
        ensure(surplus >= -TOL, || {
            format!("superadditivity violated: {surplus}")
        })?;
        if surplus > TOL {
            positive += 1;
        }
        largest = largest.max(surplus);
    }
    ensure(positive > 0, || {
        "no anti-monotone pair shows a surplus".into()
    })?;
    Ok(format!(
        "{pairs} commonotone pairs, max gap {worst:.1e}; {positive}/50 anti-monotone pairs with surplus (max {largest:.3})"
    ))
}

fn criterion_4() -> Outcome {
    let (_, loaded) = load("eight_outcome.json");
    let (space, filt) = (&loaded.space, &loaded.filtration);
    for n in [2usize, 4] {
        let grid = build_uniform_grid(space, filt, n).map_err(|e| e.to_string())?;
        for k in 0..=n {
            let target = BigRational::new(BigInt::from(k), BigInt::from(n));
            let event = grid.level_set(k);
            for block in filt.f1.blocks() {
                let block_mass: BigRational = block.iter().map(|&i| space.mass(i).clone()).sum();
                let inside: BigRational = block
                    .iter()
                    .filter(|&&i| event.contains(i))
                    .map(|&i| space.mass(i).clone())
                    .sum();
                ensure(inside / block_mass == target, || {
                    format!("n={n} k={k}: conditional mass off")
                })?;
            }
            ensure(
                conditional_mass(event, &filt.f1, space)
                    .iter()
                    .all(|m| *m == target),
                || format!("n={n} k={k}: library conditional mass off"),
            )?;
        }
        // P(A ∩ {U = j/n}) = P(A) P(U = j/n), exactly
        for block in filt.f1.blocks() {
            let pa: BigRational = block.iter().map(|&i| space.mass(i).clone()).sum();
            for j in 1..=n {
                let level: Vec<usize> =
                    (0..space.len()).filter(|&i| grid.ranks()[i] == j).collect();
                let pu: BigRational = level.iter().map(|&i| space.mass(i).clone()).sum();
                let joint: BigRational = level
                    .iter()
                    .filter(|i| block.contains(i))
                    .map(|&i| space.mass(i).clone())
                    .sum();
                ensure(joint == pa.clone() * pu, || {
                    format!("n={n}: U not independent of block")
                })?;
            }
        }
        let report = independence_check(&grid.value_partition(), &filt.f1, space);
        ensure(report.independent && report.max_deviation.is_zero(), || {
            format!("n={n}: independence_check failed")
        })?;
    }
    Ok("n ∈ {2, 4}: conditional masses k/n and independence hold in exact arithmetic".into())
}

fn criterion_5() -> Outcome {
    let (file, loaded) = load("eight_outcome.json");
    let def = file.lift.clone().ok_or("eight-outcome file has no lift")?;
    let base = file.utility().unwrap().unwrap();
    ensure(base == CoherentUtility::expectation(), || {
        "shipped lift base is not the expectation".into()
    })?;
    let grid = build_uniform_grid(&loaded.space, &loaded.filtration, def.grid_n)
        .map_err(|e| e.to_string())?;
    let cu = ConditionalUtility::new(base, loaded.space, loaded.filtration).unwrap();
    let (f, g) = (rv(def.f.clone()), rv(def.g.clone()));
    let (pair, diag) = lift_pair(&cu, &grid, &f, &g).map_err(|e| e.to_string())?;

    ensure(
        pair.xi == rv(vec![1.0, 1.0, -1.0, -1.0, 1.0, 1.0, 1.0, 1.0]),
        || format!("xi = {:?}", pair.xi),
    )?;
    ensure(
        pair.eta == rv(vec![1.0, 1.0, -1.0, -1.0, -1.0, -1.0, -1.0, -1.0]),
        || format!("eta = {:?}", pair.eta),
    )?;
    ensure(pair.m == 1.0, || format!("m = {}", pair.m))?;
    for i in 0..8 {
        ensure(
            GeometryPoint::new(pair.xi[i], pair.eta[i]).in_v(pair.m),
            || format!("pair at {i} outside V"),
        )?;
    }
    ensure(
        is_commonotone_pair(&pair.xi, &pair.eta, cu.space())
            .unwrap()
            .commonotone,
        || "not commonotone".into(),
    )?;
    let norm = pair.xi.max_abs().max(pair.eta.max_abs());
    ensure(norm == 1.0 && norm <= 3.0 * pair.m, || {
        format!("norm {norm}")
    })?;
    ensure(diag.snap_error == 0.0, || {
        format!("snap error {}", diag.snap_error)
    })?;

    let probs = cu.space().probs().to_vec();
    let block_mean = |x: &RandomVariable, b: &[usize]| {
        b.iter().map(|&i| probs[i] * x[i]).sum::<f64>() / b.iter().map(|&i| probs[i]).sum::<f64>()
    };
    let f1 = &cu.filtration().f1;
    let sum = &pair.xi + &pair.eta;
    let u_xi = conditional_eval(&cu, &pair.xi).unwrap();
    let u_eta = conditional_eval(&cu, &pair.eta).unwrap();
    let u_sum = conditional_eval(&cu, &sum).unwrap();
    for block in f1.blocks() {
        let i = block[0];
        for (lib, oracle, target) in [
            (u_xi[i], block_mean(&pair.xi, block), f[i]),
            (u_eta[i], block_mean(&pair.eta, block), g[i]),
            (u_sum[i], block_mean(&sum, block), f[i] + g[i]),
        ] {
            ensure(
                (lib - target).abs() <= TOL && (oracle - target).abs() <= TOL,
                || format!("block {i}: {lib} / {oracle} vs {target}"),
            )?;
        }
    }
    Ok("xi = (1,1,-1,-1,1,1,1,1), eta = (1,1,-1,-1,-1,-1,-1,-1), values in V, commonotone, norm 1 ≤ 3m".into())
}

fn criterion_6() -> Outcome {
    let (_, loaded) = load("sixteen_outcome.json");
    let grid =
        build_uniform_grid(&loaded.space, &loaded.filtration, 8).map_err(|e| e.to_string())?;
    let cu = ConditionalUtility::new(
        CoherentUtility::es(1, 2).unwrap(),
        loaded.space,
        loaded.filtration,
    )
    .unwrap();
    let (space, filt) = (cu.space().clone(), cu.filtration().clone());
    let fs = random_f1_probes(&filt, 100, SEED, -1.0, 1.0);
    let gs = random_f1_probes(&filt, 100, SEED + 1, -1.0, 1.0);
    let mut worst_approx: f64 = f64::NEG_INFINITY;
    let mut worst_identity: f64 = 0.0;
    let mut max_snap: f64 = 0.0;
    for (f, g) in fs.iter().zip(&gs) {
        let (pair, diag) = lift_pair(&cu, &grid, f, g).map_err(|e| e.to_string())?;
        max_snap = max_snap.max(diag.snap_error);
        for i in 0..space.len() {
            ensure(
                GeometryPoint::new(pair.xi[i], pair.eta[i]).in_v(pair.m),
                || "pair outside V".into(),
            )?;
        }
        ensure(
            pair.xi.max_abs().max(pair.eta.max_abs()) <= 3.0 * pair.m + 1e-12,
            || "norm bound".into(),
        )?;
        ensure(
            is_commonotone_pair(&pair.xi, &pair.eta, &space)
                .unwrap()
                .commonotone,
            || "not commonotone".into(),
        )?;
        let u_xi = conditional_es_oracle(&pair.xi, &space, &filt, 0.5);
        let u_eta = conditional_es_oracle(&pair.eta, &space, &filt, 0.5);
        let u_sum = conditional_es_oracle(&(&pair.xi + &pair.eta), &space, &filt, 0.5);
        let fb = filt.f1.block_values(f);
        let gb = filt.f1.block_values(g);
        for geo in &diag.geometry {
            let b = geo.block;
            let bound = geo.d * diag.snap_error + TOL;
            worst_approx = worst_approx
                .max((u_xi[b] - fb[b]).abs() - bound)
                .max((u_eta[b] - gb[b]).abs() - bound);
            let lam = geo.lambda_achieved;
            worst_identity = worst_identity
                .max((u_xi[b] - geo.x_point.x - geo.d * lam).abs())
                .max((u_eta[b] - geo.x_point.y - geo.d * lam).abs())
                .max((u_sum[b] - u_xi[b] - u_eta[b]).abs());
        }
    }
    ensure(worst_approx <= 0.0, || {
        format!("approximation bound exceeded by {worst_approx:e}")
    })?;
    ensure(worst_identity <= TOL, || {
        format!("achieved-λ identities off by {worst_identity:e}")
    })?;
    Ok(format!(
        "100 pairs, n = 8: max snap {max_snap:.4}, identity residual {worst_identity:.1e}"
    ))
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let (file, loaded) = load("four_outcome.json");
    let witness_probe = rv(vec![0.0, 1.0, 2.0, 4.0]);
    let (space, filt) = (loaded.space.clone(), loaded.filtration.clone());
    let cu = ConditionalUtility::new(
        file.utility().unwrap().unwrap(),
        loaded.space,
        loaded.filtration,
    )
    .unwrap();
    let mut probes = file.probe_vectors().unwrap();
    probes.extend(crafted_probes(&space, &filt));
    let report = tc_gap(&cu, &probes).map_err(|e| e.to_string())?;
    ensure(report.max_gap >= 0.5, || {
        format!("max gap {}", report.max_gap)
    })?;
    ensure(report.witness == witness_probe, || {
        format!("witness {:?}", report.witness)
    })?;
    // hand values on the witness: u02 = mean of the worst half, recomposed = worst block
    let u02 = es_oracle(witness_probe.values(), space.probs(), 0.5);
    let inner = conditional_es_oracle(&witness_probe, &space, &filt, 0.5);
    let recomposed = es_oracle(
        &[inner[0], inner[0], inner[1], inner[1]],
        space.probs(),
        0.5,
    );
    ensure((u02 - 0.5).abs() <= TOL && recomposed.abs() <= TOL, || {
        format!("oracle {u02} / {recomposed}")
    })?;
    ensure(
        (report.rows[0].gap - (u02 - recomposed)).abs() <= TOL,
        || "library gap disagrees with oracle".into(),
    )?;

    let (file12, loaded12) = load("twelve_outcome.json");
    let def = file12.lift.clone().unwrap();
    let grid = build_uniform_grid(&loaded12.space, &loaded12.filtration, def.grid_n).unwrap();
    let cu12 = ConditionalUtility::new(
        file12.utility().unwrap().unwrap(),
        loaded12.space,
        loaded12.filtration,
    )
    .unwrap();
    let probe = additivity_probe(&cu12, &grid, &rv(def.f.clone()), &rv(def.g.clone()))
        .map_err(|e| e.to_string())?;
    ensure((probe.lifted_defect - 1.0).abs() <= TOL, || {
        format!("A = {}", probe.lifted_defect)
    })?;
    ensure(probe.commonotone, || "lifted pair not commonotone".into())?;

    // expectation base: recomposition and lifted additivity are exact
    let (_, loaded8) = load("eight_outcome.json");
    let grid8 = build_uniform_grid(&loaded8.space, &loaded8.filtration, 4).unwrap();
    let cu8 = ConditionalUtility::new(
        CoherentUtility::expectation(),
        loaded8.space,
        loaded8.filtration,
    )
    .unwrap();
    let random = random_probes(8, 200, SEED, -1.0, 1.0);
    let exp_gap = tc_gap(&cu8, &random).unwrap().max_gap;
    ensure(exp_gap <= TOL, || {
        format!("expectation max gap {exp_gap:e}")
    })?;
    let fs = random_f1_probes(cu8.filtration(), 200, SEED, -1.0, 1.0);
    let gs = random_f1_probes(cu8.filtration(), 200, SEED + 1, -1.0, 1.0);
    let mut worst_a: f64 = 0.0;
    for (f, g) in fs.iter().zip(&gs) {
        let p = additivity_probe(&cu8, &grid8, f, g).map_err(|e| e.to_string())?;
        worst_a = worst_a.max(p.lifted_defect.abs());
    }
    ensure(worst_a <= TOL, || format!("expectation |A| = {worst_a:e}"))?;
    let took = within(start, Duration::from_secs(10))?;
    Ok(format!(
        "es(1/2) gap {} at (0,1,2,4); A = {:.12} with commonotone lift; expectation gap {exp_gap:.1e}, |A| {worst_a:.1e}; {took:.2?}",
        report.max_gap, probe.lifted_defect
    ))
}

fn criterion_8() -> Outcome {
    let (file, loaded) = load("product_grid.json");
    let u = file.utility().unwrap().unwrap();
    let grid = match &u {
        CoherentUtility::ProductExample(g) => *g,
        other => return Err(format!("unexpected utility {other}")),
    };
    ensure(grid.rows == 64 && grid.cols == 64, || {
        "grid is not 64×64".into()
    })?;
    let tol = 2.0 / grid.rows as f64;
    let mut worst: f64 = 0.0;
    for x in random_f1_probes(&loaded.filtration, 100, SEED, 0.0, 1.0) {
        let mean = x.values().iter().sum::<f64>() / x.len() as f64;
        worst = worst.max((u.eval(&x, &loaded.space).unwrap() - mean).abs());
    }
    ensure(worst <= tol, || format!("F1 probes deviate by {worst}"))?;

    let half: Vec<f64> = (0..grid.outcomes())
        .map(|i| {
            if i % grid.cols < grid.cols / 2 {
                4.0
            } else {
                0.0
            }
        })
        .collect();
    let half = rv(half);
    let value = u.eval(&half, &loaded.space).unwrap();
    // each row contributes 4 · (1/2)^{1+α}
    let closed: f64 = (0..grid.rows)
        .map(|r| 4.0 * 0.5f64.powf(1.0 + (r as f64 + 0.5) / grid.rows as f64))
        .sum::<f64>()
        / grid.rows as f64;
    ensure((value - closed).abs() <= 1e-12, || {
        format!("value {value} vs closed form {closed}")
    })?;
    let deviation = (value - 2.0).abs();
    ensure(deviation > 10.0 * tol, || {
        format!("non-F1 deviation {deviation} not above {}", 10.0 * tol)
    })?;
    Ok(format!(
        "F1 max error {worst:.1e} ≤ {tol}; non-F1 probe |u − E| = {deviation:.4} > {}",
        10.0 * tol
    ))
}

fn criterion_9() -> Outcome {
    let (_, loaded) = load("eight_outcome.json");
    let cu = ConditionalUtility::new(
        CoherentUtility::expectation(),
        loaded.space,
        loaded.filtration,
    )
    .unwrap();
    let probs = cu.space().probs().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut verified = 0;
    for (k, x) in random_probes(8, 50, SEED, -1.0, 1.0)
        .into_iter()
        .enumerate()
    {
        let mean = cu.space().expectation(&x);
        let slack = if k % 5 == 0 {
            0.0
        } else {
            rng.gen_range(0.0..0.5)
        };
        let x = x.shift(slack - mean);
        let d = cone_decompose(&cu, &x).map_err(|e| e.to_string())?;
        ensure(d.feasible, || format!("probe {k} infeasible"))?;
        let w = d.witness.ok_or("feasible without witness")?;
        // independent re-check of the witness constraints
        ensure(cu.filtration().f1.is_measurable(&w.eta), || {
            "eta not F1-measurable".into()
        })?;
        let e_eta: f64 = w.eta.values().iter().zip(&probs).map(|(a, p)| a * p).sum();
        ensure(e_eta >= -TOL, || format!("E[eta] = {e_eta}"))?;
        for block in cu.filtration().f1.blocks() {
            let part: f64 = block.iter().map(|&i| probs[i] * w.zeta[i]).sum();
            ensure(part >= -TOL, || format!("E[zeta 1_A] = {part}"))?;
        }
        let exact = |v: f64| BigRational::from_float(v).unwrap();
        ensure(
            (0..8).all(|i| exact(w.eta[i]) + &w.zeta_exact[i] == exact(x[i])),
            || "eta + zeta != x".into(),
        )?;
        ensure(
            (&w.eta + &w.zeta).max_abs_diff(&x) <= 4.0 * f64::EPSILON,
            || "rounded zeta drifts".into(),
        )?;
        let check = verify_cone_witness(&cu, &x, &w).unwrap();
        ensure(check.holds(TOL), || {
            format!("library re-verification failed: {check:?}")
        })?;
        verified += 1;
    }

    let (file, loaded4) = load("four_outcome.json");
    let cu4 = ConditionalUtility::new(
        file.utility().unwrap().unwrap(),
        loaded4.space,
        loaded4.filtration,
    )
    .unwrap();
    let witness = rv(vec![0.0, 1.0, 2.0, 4.0]);
    let centered = witness.shift(-cu4.unconditional(&witness).unwrap());
    ensure(cu4.unconditional(&centered).unwrap().abs() <= TOL, || {
        "centering failed".into()
    })?;
    let d = cone_decompose(&cu4, &centered).map_err(|e| e.to_string())?;
    ensure(!d.feasible, || "centered witness decomposes".into())?;
    let cert = d.certificate.ok_or("no certificate")?;
    let (a, b) = cone_system(&cu4, &centered, &dual_vertices(&cu4).unwrap());
    ensure(cert.iter().all(|&w| w >= 0.0), || {
        "negative multiplier".into()
    })?;
    let (residual, wb) = certificate_residuals(&a, &b, &cert);
    ensure(residual <= TOL && wb < -TOL, || {
        format!("certificate residual {residual:e}, rhs {wb}")
    })?;
    let gap = (cu4.unconditional(&centered).unwrap() - recompose(&cu4, &centered).unwrap()).abs();
    ensure(gap > TOL, || {
        "infeasible verdict without a recomposition gap".into()
    })?;
    let u01_inner = restricted_eval(&cu4, &conditional_eval(&cu4, &centered).unwrap()).unwrap();
    Ok(format!(
        "{verified}/50 expectation probes decompose with verified witnesses; es(1/2) centered probe infeasible (certificate w·b = {wb:.4}, recomposed {u01_inner})"
    ))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("coherence axioms on shipped utilities", criterion_1),
        (
            "Choquet value equals minimum over core vertices",
            criterion_2,
        ),
        (
            "commonotone additivity and anti-monotone surplus",
            criterion_3,
        ),
        ("uniform grid masses and independence", criterion_4),
        ("golden expectation lift", criterion_5),
        ("lift approximation contract", criterion_6),
        (
            "recomposition gap and lifted additivity defect",
            criterion_7,
        ),
        ("product example linear on F1 only", criterion_8),
        ("cone decomposition consistency", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match std::panic::catch_unwind(check) {
            Ok(Ok(detail)) => println!("PASS criterion {}: {name} ({detail})", i + 1),
            Ok(Err(why)) => {
                failed += 1;
                println!("FAIL criterion {}: {name} ({why})", i + 1);
            }
            Err(_) => {
                failed += 1;
                println!("FAIL criterion {}: {name} (panicked)", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
