//! The ten acceptance criteria. Each test prints one `criterion N ... PASS|FAIL` line.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sobolev_trace::extension::{JetField, PartitionOfUnity, WhitneyExtension};
use sobolev_trace::functions::corpus;
use sobolev_trace::geometry::{whitney_decompose, whitney_fit, WhitneyFit};
use sobolev_trace::maximal::a1_norm;
use sobolev_trace::metrics::{QuasiMetricSpec, SupForm};
use sobolev_trace::poly::Basis;
use sobolev_trace::sobolev::{
    calibrate_poincare, gradient_magnitude, necessity_exponent, necessity_weight,
};
use sobolev_trace::trace::{divided_difference, divided_difference_symmetric, trace_1d_lp};
use sobolev_trace::{Cube, Grid, PointSet};
use sobolev_trace_cli::fixtures::{fixture, unit_grid, weight_fixtures};
use sobolev_trace_cli::suite::{
    bump_scaling_constant, distinct_sample, geodesic_ratio, max_drift, partition_sum_error,
    random_cube_family, tfm_check, whitney_fixtures, worst_chain_ratio,
};
use sobolev_trace_cli::{
    run_jet_pipeline, run_l1p_pipeline, Experiment, ExperimentConfig, PipelineSummary,
};

fn report(n: usize, name: &str, pass: bool, detail: String) {
    println!(
        "criterion {n:>2} {name:<28} {} : {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {n} ({name}) failed: {detail}");
}

fn experiment(json: &str) -> Experiment {
    ExperimentConfig::from_json(json)
        .unwrap()
        .resolve(Path::new("."))
        .unwrap()
}

#[test]
fn criterion_01_chain_inequality() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut chains = 0;
    for n in [1usize, 2] {
        let grid = unit_grid(n, if n == 1 { 256 } else { 32 }).unwrap();
        for q in [n as f64, n as f64 + 1.0] {
            for f in weight_fixtures() {
                let form = SupForm::new(&f.sample(&grid).unwrap(), q).unwrap();
                worst = worst.max(worst_chain_ratio(&form, 358, &mut rng).unwrap());
                chains += 358;
            }
        }
    }
    report(
        1,
        "chain inequality",
        chains >= 10_000 && worst <= 16.0 * (1.0 + 1e-12),
        format!("{chains} chains, max ratio {worst:.4} (bound 16)"),
    );
}

fn random_sets(rng: &mut ChaCha8Rng) -> Vec<PointSet> {
    let mut out: Vec<PointSet> = whitney_fixtures().into_iter().map(|(_, e)| e).collect();
    for n in [1usize, 2] {
        for _ in 0..3 {
            let k = rng.gen_range(2..=6);
            let pts: Vec<Vec<f64>> = (0..k)
                .map(|_| (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect())
                .collect();
            out.push(PointSet::new(pts).unwrap());
        }
    }
    out
}

fn levels(n: usize) -> u32 {
    if n == 1 {
        14
    } else {
        7
    }
}

#[test]
fn criterion_02_whitney_geometry() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut cubes, mut window, mut ratio, mut star) = (0, 0, 0, 0);
    for e in random_sets(&mut rng) {
        let n = e.dim();
        let w = whitney_decompose(&e, &Cube::new(vec![0.0; n], 1.0).unwrap(), levels(n)).unwrap();
        cubes += w.len();
        for (k, (q, &d)) in w.cubes().iter().zip(w.dists()).enumerate() {
            if whitney_fit(q.diam(), d) != WhitneyFit::Admissible {
                window += 1;
            }
            for (j, other) in w.cubes().iter().enumerate() {
                let touch = q.intersects(other);
                if touch != q.star().intersects(&other.star()) {
                    star += 1;
                }
                if touch && j != k {
                    let r = other.diam() / q.diam();
                    if !(0.25..=4.0).contains(&r) {
                        ratio += 1;
                    }
                }
            }
        }
    }
    report(
        2,
        "whitney geometry",
        window == 0 && ratio == 0 && star == 0,
        format!("{cubes} cubes; window violations {window}, touching-ratio violations {ratio}, star mismatches {star}"),
    );
}

#[test]
fn criterion_03_disjoint_families() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut excess = i64::MIN;
    let mut disjoint = true;
    for k in 0..50 {
        let (e, d) = tfm_check(&random_cube_family(1 + k % 2, &mut rng));
        excess = excess.max(e);
        disjoint &= d;
    }
    report(
        3,
        "disjoint subfamilies",
        excess <= 0 && disjoint,
        format!("50 families, max (count - bound) = {excess}, all disjoint: {disjoint}"),
    );
}

#[test]
fn criterion_04_geodesic_equivalence() {
    let q_of = |n: usize| n as f64 + 1.0;
    let mut worst_hop: f64 = 0.0;
    let mut worst_refine: f64 = 0.0;
    let mut finite = true;
    for n in [1usize, 2] {
        let base = if n == 1 { 128 } else { 16 };
        let grid = unit_grid(n, base).unwrap();
        for f in weight_fixtures().into_iter().filter(|f| f.a1) {
            let hops: Vec<f64> = [1, 3, 5]
                .iter()
                .map(|&r| geodesic_ratio(&f, &grid, q_of(n), r).unwrap())
                .collect();
            let refined = geodesic_ratio(&f, &grid.refine(), q_of(n), 3).unwrap();
            finite &= hops.iter().chain([&refined]).all(|v| v.is_finite());
            worst_hop = worst_hop.max(max_drift(&hops));
            worst_refine = worst_refine.max(max_drift(&[hops[1], refined]));
        }
    }
    let wall = fixture("wall").unwrap();
    let ratios: Vec<f64> = [128, 256, 512]
        .iter()
        .map(|&k| geodesic_ratio(&wall, &unit_grid(1, k).unwrap(), 2.0, 3).unwrap())
        .collect();
    let growth = ratios
        .windows(2)
        .map(|w| w[1] / w[0])
        .fold(f64::INFINITY, f64::min);
    report(
        4,
        "geodesic equivalence",
        finite && worst_hop < 0.25 && worst_refine < 0.25 && growth > 2.0,
        format!("A1 drift: hop {worst_hop:.4}, refine {worst_refine:.4}; wall ratios {ratios:.3?}, min growth {growth:.3}"),
    );
}

fn l1p_configs() -> Vec<String> {
    let mut out = vec![
        r#"{"n": 1, "p": 2, "grid": 128, "box": {"center": [0.5], "half_side": 5},
        "points": {"inline": [[0], [1]]}, "data": {"values": [0, 1]}}"#
            .to_string(),
    ];
    for name in ["sin-pi", "exp", "bump-narrow", "wave-plus-line"] {
        out.push(format!(
            r#"{{"n": 1, "p": 3, "grid": 128, "box": {{"center": [0], "half_side": 1}},
                "points": {{"random": {{"count": 5}}}}, "data": {{"function": "{name}"}}}}"#
        ));
    }
    for name in ["bump-wide", "wave-product", "poly-mix"] {
        out.push(format!(
            r#"{{"n": 2, "p": 3, "grid": 20, "box": {{"center": [0, 0], "half_side": 1}},
                "points": {{"inline": [[-0.3, 0.2], [0.1, -0.25], [0.4, 0.35]]}}, "data": {{"function": "{name}"}}}}"#
        ));
    }
    out
}

#[test]
fn criterion_05_mcshane_exactness() {
    let mut runs = 0;
    let mut worst_error: f64 = 0.0;
    let mut worst_excess: f64 = 0.0;
    for json in l1p_configs() {
        let r = run_l1p_pipeline(&experiment(&json)).unwrap();
        let s = &r.summary;
        worst_error = worst_error.max(s.error_on_set);
        worst_excess =
            worst_excess.max(s.extension_lipschitz.unwrap() / s.lipschitz_constant.unwrap());
        runs += 1;
    }
    report(
        5,
        "mcshane exactness",
        worst_error == 0.0 && worst_excess <= 1.0 + 1e-12,
        format!(
            "{runs} runs; max |F - f| on E = {worst_error:e}, max seminorm / L = {worst_excess:.6}"
        ),
    );
}

#[test]
fn criterion_06_partition_of_unity() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut sum_error: f64 = 0.0;
    let mut outside_star = 0;
    let mut growth: f64 = 0.0;
    let mut constants = Vec::new();
    for e in random_sets(&mut rng) {
        let n = e.dim();
        let w = whitney_decompose(&e, &Cube::new(vec![0.0; n], 1.0).unwrap(), levels(n)).unwrap();
        let partition = PartitionOfUnity::new(&w);
        let grid = unit_grid(n, if n == 1 { 512 } else { 48 }).unwrap();
        sum_error = sum_error.max(partition_sum_error(&partition, &grid));
        for x in grid.nodes() {
            for (q, s) in partition.series(&x, 0).unwrap_or_default() {
                if s.value() != 0.0 && !partition.stars()[q].contains_point(&x) {
                    outside_star += 1;
                }
            }
        }
        let (c, g) = bump_scaling_constant(&partition, 2);
        constants.push(c);
        growth = growth.max(g);
    }
    let cmax = constants.iter().copied().fold(0.0, f64::max);
    report(
        6,
        "partition of unity",
        sum_error <= 1e-10 && outside_star == 0 && growth <= 1.0 + 1e-9 && cmax.is_finite(),
        format!(
            "max |sum - 1| = {sum_error:e}, support violations {outside_star}, derivative constant <= {cmax:.1}, fine/coarse {growth:.4}"
        ),
    );
}

fn polynomial_config(n: usize, m: usize) -> String {
    // A generic polynomial of degree m - 1.
    let coeffs: Vec<String> = Basis::get(n, m - 1)
        .indices()
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let idx: Vec<String> = a.iter().map(|v| v.to_string()).collect();
            format!(
                r#""({})": {}"#,
                idx.join(","),
                0.5 + 0.25 * k as f64 * if k % 2 == 0 { 1.0 } else { -1.0 }
            )
        })
        .collect();
    let (center, pts, grid) = if n == 1 {
        ("[0]", "[[-0.3], [0.1], [0.45]]", 64)
    } else {
        ("[0, 0]", "[[-0.3, 0.2], [0.1, -0.25], [0.4, 0.35]]", 24)
    };
    format!(
        r#"{{"n": {n}, "m": {m}, "p": 3, "grid": {grid}, "box": {{"center": {center}, "half_side": 1}},
            "points": {{"inline": {pts}}}, "data": {{"polynomial": {{"coefficients": {{{}}}}}}}}}"#,
        coeffs.join(", ")
    )
}

#[test]
fn criterion_07_jet_reproduction() {
    let mut poly_error: f64 = 0.0;
    for n in [1usize, 2] {
        for m in 1..=3 {
            let r = run_jet_pipeline(&experiment(&polynomial_config(n, m))).unwrap();
            poly_error = poly_error.max(r.summary.polynomial_error.unwrap());
        }
    }

    let mut boundary_excess: f64 = 0.0;
    let mut linear_error: f64 = 0.0;
    for (_, e) in whitney_fixtures() {
        let n = e.dim();
        let bx = Cube::new(vec![0.0; n], 1.0).unwrap();
        let w = whitney_decompose(&e, &bx, levels(n)).unwrap();
        let partition = PartitionOfUnity::new(&w);
        let h = 1.0 / 32.0;
        for m in 1..=3 {
            let fs = corpus(n);
            for f in &fs {
                let jet = JetField::from_function(f, &e, m).unwrap();
                let ext = WhitneyExtension::new(&jet, &partition).unwrap();
                for i in 0..e.len() {
                    for beta in Basis::get(n, m - 1).indices() {
                        let err = ext.boundary_derivative_error(i, beta, h).unwrap();
                        boundary_excess = boundary_excess.max(err / (10.0 * h * h));
                    }
                }
            }
            let grid = unit_grid(n, if n == 1 { 256 } else { 32 }).unwrap();
            let a = JetField::from_function(&fs[3], &e, m).unwrap();
            let b = JetField::from_function(&fs[5], &e, m).unwrap();
            let combo = a.scale(2.0).add(&b.scale(-3.0)).unwrap();
            let fa = WhitneyExtension::new(&a, &partition)
                .unwrap()
                .on_grid(&grid, 0)
                .unwrap();
            let fb = WhitneyExtension::new(&b, &partition)
                .unwrap()
                .on_grid(&grid, 0)
                .unwrap();
            let fc = WhitneyExtension::new(&combo, &partition)
                .unwrap()
                .on_grid(&grid, 0)
                .unwrap();
            for i in 0..grid.len() {
                let lhs = fc.values().get(i);
                let rhs = 2.0 * fa.values().get(i) - 3.0 * fb.values().get(i);
                linear_error = linear_error.max((lhs - rhs).abs() / (1.0 + rhs.abs()));
            }
        }
    }
    report(
        7,
        "whitney jet reproduction",
        poly_error <= 1e-9 && boundary_excess <= 1.0 && linear_error <= 1e-12,
        format!(
            "polynomial error {poly_error:e}; boundary error / (10 h^2) <= {boundary_excess:e}; linearity defect {linear_error:e}"
        ),
    );
}

fn trace_config(name: &str, grid: usize, seed: u64) -> String {
    format!(
        r#"{{"n": 1, "p": 2, "grid": {grid}, "seed": {seed}, "box": {{"center": [0], "half_side": 1}},
            "points": {{"inline": [[-0.08], [-0.02], [0.03], [0.09]]}}, "data": {{"function": "{name}"}}}}"#
    )
}

fn ratios(s: &PipelineSummary) -> [f64; 2] {
    [
        s.trace_over_source.unwrap(),
        s.extension_over_trace.unwrap(),
    ]
}

#[test]
fn criterion_08_trace_equivalence() {
    // Two-point fixture: f# = 1/(|x| + |x - 1|), so on [c - R, c + R] with c = 1/2
    // the integral of (f#)^p is 1 + (1 - (2R)^{1-p}) / (p - 1).
    let p: f64 = 2.0;
    let radius: f64 = 5.0;
    let two = |grid: usize| {
        run_l1p_pipeline(&experiment(&format!(
            r#"{{"n": 1, "p": {p}, "grid": {grid}, "box": {{"center": [0.5], "half_side": {radius}}},
                "points": {{"inline": [[0], [1]]}}, "data": {{"values": [0, 1]}}}}"#
        )))
        .unwrap()
    };
    let box_oracle = 1.0 + (1.0 - (2.0 * radius).powf(1.0 - p)) / (p - 1.0);
    let full_oracle = 1.0 + 1.0 / (p - 1.0);
    let (coarse, fine) = (two(256), two(512));
    let quad = |r: &sobolev_trace_cli::PipelineResult| r.trace.functional_value.powf(p);
    let h = coarse.summary.spacing;
    let quad_ok = (quad(&coarse) - box_oracle).abs() <= h
        && (quad(&fine) - box_oracle).abs() <= 0.5 * h
        && full_oracle - box_oracle <= coarse.trace.tail_bound;
    let two_drift = max_drift(&[
        coarse.summary.extension_over_trace.unwrap(),
        fine.summary.extension_over_trace.unwrap(),
    ]);

    let mut drift: f64 = 0.0;
    let mut finite = true;
    let mut seed_free = true;
    let mut range = [f64::INFINITY, 0.0];
    for f in corpus(1).iter().take(10) {
        let a = run_l1p_pipeline(&experiment(&trace_config(&f.name, 128, 1))).unwrap();
        let b = run_l1p_pipeline(&experiment(&trace_config(&f.name, 128, 2))).unwrap();
        let c = run_l1p_pipeline(&experiment(&trace_config(&f.name, 256, 1))).unwrap();
        let (ra, rb, rc) = (ratios(&a.summary), ratios(&b.summary), ratios(&c.summary));
        finite &= ra.iter().chain(&rc).all(|v| v.is_finite() && *v > 0.0);
        seed_free &= ra == rb;
        for k in 0..2 {
            drift = drift.max(max_drift(&[ra[k], rc[k]]));
        }
        range = [range[0].min(rc[1]), range[1].max(rc[1])];
    }
    report(
        8,
        "trace equivalence",
        quad_ok && two_drift < 0.25 && finite && seed_free && drift < 0.25,
        format!(
            "two-point I^p {:.5} / {:.5} vs oracle {box_oracle:.5}, ratio drift {two_drift:.4}; corpus drift {drift:.4}, ||F||/I in [{:.3}, {:.3}], seed-free {seed_free}",
            quad(&coarse),
            quad(&fine),
            range[0],
            range[1]
        ),
    );
}

#[test]
fn criterion_09_divided_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let f = |x: f64| (2.1 * x).cos() * x + 0.3 * x.powi(3);
    let mut agreement: f64 = 0.0;
    for _ in 0..1000 {
        let m = rng.gen_range(1..=6);
        let s = distinct_sample(&mut rng, m + 1);
        let v: Vec<f64> = s.iter().map(|&x| f(x)).collect();
        let a = divided_difference(&v, &s).unwrap();
        let b = divided_difference_symmetric(&v, &s).unwrap();
        agreement = agreement.max((a - b).abs() / a.abs().max(1.0));
    }
    // Integer nodes keep every intermediate divided difference of an integer
    // polynomial an integer, so these are exact.
    let mut exact = true;
    for m in 1..=6usize {
        for _ in 0..50 {
            let s: Vec<f64> = distinct_sample(&mut rng, m + 1)
                .iter()
                .map(|x| x * 16.0)
                .collect();
            let top: Vec<f64> = s.iter().map(|x| x.powi(m as i32)).collect();
            let low: Vec<f64> = s
                .iter()
                .map(|x| (0..m).map(|k| (k as f64 - 2.0) * x.powi(k as i32)).sum())
                .collect();
            exact &= divided_difference(&top, &s).unwrap() == 1.0
                && divided_difference(&low, &s).unwrap() == 0.0;
        }
    }
    let e = [-0.6, -0.2, 0.05, 0.3, 0.7];
    let bx = Cube::new(vec![0.0], 4.0).unwrap();
    let grid = Grid::cell_centered(&bx, 512).unwrap();
    let p = 3.0;
    let mut range = [f64::INFINITY, 0.0f64];
    for f in corpus(1) {
        let v: Vec<f64> = e.iter().map(|&x| f.eval(&[x])).collect();
        for m in 1..=3 {
            let (a, b) = trace_1d_lp(&v, &e, m, p, &bx, &grid).unwrap();
            if b > 0.0 {
                range = [range[0].min(a / b), range[1].max(a / b)];
            }
        }
    }
    let bracket = (2f64.powf((1.0 - p) / p), 2.0);
    report(
        9,
        "divided differences",
        agreement <= 1e-10 && exact && range[0] >= bracket.0 && range[1] <= bracket.1,
        format!(
            "recurrence vs symmetric {agreement:e}; exact monomials {exact}; 1-D functional ratio in [{:.4}, {:.4}] within [{:.4}, 2]",
            range[0], range[1], bracket.0
        ),
    );
}

#[test]
fn criterion_10_poincare_calibration() {
    let mut drift: f64 = 0.0;
    let mut details = Vec::new();
    let mut necessity_ok = true;
    let mut worst_fsp: f64 = 0.0;
    let mut worst_lp: f64 = 0.0;
    for (n, q, coarse) in [
        (1usize, 1.5, 256usize),
        (1, 2.0, 256),
        (2, 2.5, 32),
        (2, 3.0, 32),
    ] {
        let fs = corpus(n);
        let a = calibrate_poincare(&fs, n, q, coarse).unwrap();
        let b = calibrate_poincare(&fs, n, q, 2 * coarse).unwrap();
        drift = drift.max(max_drift(&[a.poincare_constant, b.poincare_constant]));
        details.push(format!(
            "C({n},{q}) {:.4} -> {:.4}",
            a.poincare_constant, b.poincare_constant
        ));

        let grid = unit_grid(n, coarse).unwrap();
        let p = q + 1.0;
        let sigma = necessity_exponent(p, q);
        // Marcinkiewicz bound for the maximal function over clipped cubes, whose
        // weak-type constant is at most 6^n.
        let r = p / sigma;
        let maximal_bound = 2.0 * (r * 6f64.powi(n as i32) / (r - 1.0)).powf(1.0 / r);
        for f in &fs {
            let field = f.sample(&grid).unwrap();
            let Some(h) = necessity_weight(&field, p, q, a.lipschitz_constant).unwrap() else {
                continue;
            };
            let spec = QuasiMetricSpec::new(h.clone(), q).unwrap();
            necessity_ok &= a1_norm(&spec.power_weight().unwrap()).finite;
            for i in 0..grid.len() {
                for j in 0..grid.len() {
                    let num = (field.get(i) - field.get(j)).abs();
                    if num > 0.0 {
                        worst_fsp = worst_fsp.max(num / spec.delta_nodes(i, j).value);
                    }
                }
            }
            let g = gradient_magnitude(&field).unwrap();
            let lhs = h.field().lp_norm(p);
            let rhs = a.lipschitz_constant * maximal_bound.powf(1.0 / sigma) * g.lp_norm(p);
            worst_lp = worst_lp.max(lhs / rhs);
        }
    }
    report(
        10,
        "poincare calibration",
        drift < 0.10 && necessity_ok && worst_fsp <= 1.0 + 1e-12 && worst_lp <= 1.0,
        format!(
            "{}; max drift {drift:.4}; A1 finite {necessity_ok}; max |dF| / delta {worst_fsp:.4}; ||h||_p / bound {worst_lp:.4}",
            details.join(", ")
        ),
    );
}
