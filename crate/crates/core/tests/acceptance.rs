//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

mod common;

use common::*;
use loopwatch_core::matrix::DEFAULT_TERM_BUDGET as BUDGET;
use loopwatch_core::matrix::walk_oracle_with_suspects;
use loopwatch_core::*;
use rand::Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(actual: f64, expected: f64, tol: f64, what: &str) -> Result<(), String> {
    check((actual - expected).abs() <= tol, || {
        format!("{what}: got {actual}, expected {expected} ± {tol}")
    })
}

fn series_within(actual: &[f64], expected: &[f64], tol: f64, what: &str) -> Result<(), String> {
    check(actual.len() == expected.len(), || format!("{what}: length mismatch"))?;
    for (i, (a, e)) in actual.iter().zip(expected).enumerate() {
        within(*a, *e, tol, &format!("{what}[{}]", i + 1))?;
    }
    Ok(())
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Reorders per-vertex values by point label (vertices are stored in
/// first-appearance order).
fn by_label(g: &WeightedDigraph, values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by_key(|&i| g.vertices()[i].as_str().parse::<u32>().unwrap_or(u32::MAX));
    idx.into_iter().map(|i| values[i]).collect()
}

/// Clean six-point network: zero deviations at several z.
fn criterion_1() -> Outcome {
    let g = fixture("six_point_clean.csv");
    let mut worst = 0.0f64;
    for z in [2.0, 3.0, 0.5] {
        let s = power_diagonals(&g, z, 6).map_err(err)?;
        for step in &s.series {
            worst = worst.max(step.norm);
            check(step.norm <= 1e-9, || format!("z={z} r={}: norm {}", step.r, step.norm))?;
        }
    }
    Ok(format!("max norm {worst:.3e} over z in {{2,3,0.5}}, r=1..6"))
}

/// Erroneous six-point network: ℓ1 norm series and diag T^(4).
fn criterion_2() -> Outcome {
    let g = fixture("six_point_blunder.csv");
    let s = power_diagonals(&g, 2.0, 6).map_err(err)?;
    series_within(&s.norms(), &[0.0, 0.0, 0.0, 6.0, 7.5, 78.0], 1e-9, "norm")?;
    series_within(&by_label(&g, &s.series[3].diag), &[1.0, 1.5, 0.5, 0.5, 1.0, 1.5], 1e-9, "diag T4")?;
    Ok(format!("norms {:?}", s.norms()))
}

/// Asymptotic slope of the diagonal deviations at r = 4.
fn criterion_3() -> Outcome {
    let g = fixture("six_point_blunder.csv");
    let (e, c) = asymptotic_diag_slope(&g, 4, BUDGET).map_err(err)?;
    let c = by_label(&g, &c);
    check(e == 1.0 && c == vec![2.0, 3.0, 1.0, 1.0, 2.0, 3.0], || format!("got ({e}, {c:?})"))?;
    Ok(format!("({e}, {c:?})"))
}

/// Spectrum of the clean network, independent of z.
fn criterion_4() -> Outcome {
    let g = fixture("six_point_clean.csv");
    let expected = [3.092, 0.702, 0.0, 0.0, -1.285, -2.508];
    let base = spectrum(&g, 1.0).map_err(err)?;
    series_within(&base.eigenvalues, &expected, 2e-3, "eigenvalue")?;
    check(base.multiplicities.iter().any(|&(v, m)| v.abs() < 1e-6 && m == 2), || {
        format!("zero should be a double eigenvalue: {:?}", base.multiplicities)
    })?;
    let mut spread = 0.0f64;
    for z in [2.0, 3.0] {
        let s = spectrum(&g, z).map_err(err)?;
        check(!s.non_real, || format!("z={z}: non-real spectrum"))?;
        spread = spread.max(max_abs_diff(&s.eigenvalues, &base.eigenvalues));
    }
    check(spread <= 1e-8, || format!("spectra differ across z by {spread:e}"))?;
    Ok(format!("{:?}, spread {spread:.1e}", base.eigenvalues))
}

/// Single-variable correction of baseline 2-6.
fn criterion_5() -> Outcome {
    let g = fixture("six_point_blunder.csv");
    let arc = g.find_arc("2", "6").ok_or("arc 2-6 missing")?;
    let f = build_error_function(&g, &[arc], 2.0, 4, BUDGET).map_err(err)?;
    let coeff = |c: i32| f.terms().iter().find(|(k, _)| k == &vec![c]).map_or(0.0, |t| t.1);
    check(f.terms().len() == 2, || format!("expected two exponential terms: {:?}", f.terms()))?;
    check(coeff(1) == 24.0 && coeff(-1) == 6.0 && f.offset() == -24.0, || {
        format!("e(x) = {}·2^x + {}·2^-x + {}", coeff(1), coeff(-1), f.offset())
    })?;
    let m = minimize_error(&f, None).map_err(err)?;
    within(m.x_star[0], -1.0, 1e-8, "x*")?;
    check(m.e_min <= 1e-10, || format!("e_min {}", m.e_min))?;
    Ok(format!("e(x) = 24·2^x + 6·2^-x - 24, x* = {:.10}, e_min = {:.1e}", m.x_star[0], m.e_min))
}

/// Experimental network without blunders: ℓ2 series and order of diag T^(3).
fn criterion_6() -> Outcome {
    let g = fixture("survey_x.csv");
    let rep = detect(&g, &DetectConfig::default().with_r_max(6)).map_err(err)?;
    series_within(&rep.series.norms_l2(), &[0.0, 0.0, 0.003, 0.010, 0.075, 0.362], 5e-3, "norm_l2")?;
    let expected = [0.00113, 0.00094, 0.00117, 0.00139, 0.00099, 0.00157];
    let d3 = &rep.series.series[2].diag;
    for (i, (d, p)) in by_label(&g, d3).iter().zip(expected).enumerate() {
        check(d.abs() < p + 2e-3, || format!("diag T3[{}] = {d}", i + 1))?;
    }
    check(rep.verdict == Verdict::Minor, || format!("verdict {:?}", rep.verdict))?;
    Ok(format!(
        "norm_l2 {:?}, verdict minor",
        rep.series.norms_l2().iter().map(|v| (v * 1e3).round() / 1e3).collect::<Vec<_>>()
    ))
}

/// Experimental network with two blunders.
fn criterion_7() -> Outcome {
    let g = fixture("survey_x_blunders.csv");
    let rep = detect(&g, &DetectConfig::default().with_r_max(6)).map_err(err)?;
    series_within(&rep.series.norms_l2(), &[0.0, 0.0, 0.050, 0.157, 1.171, 5.505], 5e-3, "norm_l2")?;
    let d3 = &rep.series.series[2].diag;
    let argmax = (0..d3.len()).max_by(|&a, &b| d3[a].total_cmp(&d3[b])).unwrap();
    let top = g.vertices()[argmax].as_str();
    check(top == "4", || format!("largest diag T3 entry at point {top}"))?;
    check(rep.verdict == Verdict::Gross, || format!("verdict {:?}", rep.verdict))?;
    Ok(format!(
        "norm_l2 {:?}, max diag T3 at point {top}, verdict gross",
        rep.series.norms_l2().iter().map(|v| (v * 1e3).round() / 1e3).collect::<Vec<_>>()
    ))
}

/// Two-variable correction of baselines 4-5 and 1-4.
fn criterion_8() -> Outcome {
    let g = normalize_orientation(&fixture("survey_x_blunders.csv"));
    let a45 = g.find_arc("4", "5").ok_or("arc 4-5 missing")?;
    let a14 = g.find_arc("1", "4").ok_or("arc 1-4 missing")?;
    let suspects = [a45, a14];
    let f = build_error_function(&g, &suspects, 2.0, 4, BUDGET).map_err(err)?;
    let coeff = |c: [i32; 2]| f.terms().iter().find(|(k, _)| k[..] == c).map_or(f64::NAN, |t| t.1);
    let expected = [
        ([1, -1], 8.09),
        ([-1, 1], 7.91),
        ([1, 0], 26.09),
        ([-1, 0], 22.07),
        ([0, 1], 26.16),
        ([0, -1], 22.03),
    ];
    check(f.terms().len() == 6, || format!("expected six exponential terms, got {}", f.terms().len()))?;
    for (c, v) in expected {
        within(coeff(c), v, 5e-2, &format!("coefficient of 2^({}x + {}y)", c[0], c[1]))?;
    }
    within(f.offset(), -112.0, 5e-2, "constant")?;

    let res = correct(&g, &suspects, &DetectConfig::default().with_r_max(6), Some(4)).map_err(err)?;
    within(res.x_star[0], -0.124, 2e-3, "x*")?;
    within(res.x_star[1], -0.120, 2e-3, "y*")?;
    within(res.e_min, 0.02, 5e-3, "e_min")?;
    within(res.corrected.arcs()[a45].weight, 3207.809, 2e-3, "corrected 4-5")?;
    within(res.corrected.arcs()[a14].weight, 5472.839, 2e-3, "corrected 1-4")?;
    Ok(format!(
        "x* = ({:.4}, {:.4}), e_min = {:.4}, corrected ({:.3}, {:.3})",
        res.x_star[0],
        res.x_star[1],
        res.e_min,
        res.corrected.arcs()[a45].weight,
        res.corrected.arcs()[a14].weight
    ))
}

/// (a) symbolic powers equal brute-force walk enumeration.
fn criterion_9a() -> Outcome {
    let mut rng = rng(0x9a);
    let mut compared = 0usize;
    for case in 0..50 {
        let n = rng.gen_range(2..=6);
        let extra = rng.gen_range(0..=3);
        let g = if case % 2 == 0 {
            random_integer_network(&mut rng, n, extra)
        } else {
            random_real_network(&mut rng, n, extra, 50.0)
        };
        let k = rng.gen_range(0..=g.arcs().len().min(2));
        let suspects: Vec<usize> = (0..k).collect();
        let m = build_poly_matrix(&g, &suspects).map_err(err)?;
        let mut p = PolyMatrix::identity(n);
        for r in 0..=5 {
            if r > 0 {
                p = p.mul(&m, BUDGET).map_err(err)?;
            }
            for u in 0..n {
                for v in 0..n {
                    let oracle = walk_oracle_with_suspects(&g, &suspects, u, v, r).map_err(err)?;
                    check(p.get(u, v) == &oracle, || {
                        format!("case {case} r={r} ({u},{v}): {} vs {}", p.get(u, v), oracle)
                    })?;
                    compared += 1;
                }
            }
        }
    }
    Ok(format!("50 networks, {compared} entries equal"))
}

/// (b) consistent networks: zero deviations and z-independent spectra.
fn criterion_9b() -> Outcome {
    let mut rng = rng(0x9b);
    let mut worst_norm = 0.0f64;
    let mut worst_spectral = 0.0f64;
    for case in 0..50 {
        let n = rng.gen_range(2..=6);
        let extra = rng.gen_range(0..=4);
        let g = random_potential_network(&mut rng, n, extra);
        for z in [0.5, 2.0, 3.0] {
            let s = power_diagonals(&g, z, 6).map_err(err)?;
            for step in &s.series {
                worst_norm = worst_norm.max(step.norm);
                check(step.norm <= 1e-9, || format!("case {case} z={z} r={}: {}", step.r, step.norm))?;
            }
        }
        let base = spectrum(&g, 1.0).map_err(err)?;
        for z in [0.5, 2.0, 3.0] {
            let s = spectrum(&g, z).map_err(err)?;
            let d = s.distance(&base);
            worst_spectral = worst_spectral.max(d);
            check(d <= 1e-6, || format!("case {case} z={z}: spectrum moved by {d:e}"))?;
        }
    }
    Ok(format!("max norm {worst_norm:.1e}, max spectrum shift {worst_spectral:.1e}"))
}

/// (c) gauge fixing preserves diagonals of powers and traces.
fn criterion_9c() -> Outcome {
    let mut rng = rng(0x9c);
    let mut worst = 0.0f64;
    for case in 0..50 {
        let n = rng.gen_range(2..=8);
        let extra = rng.gen_range(0..=4);
        let g = random_real_network(&mut rng, n, extra, 10.0);
        let (gauged, _) = gauge_fix(&g).map_err(err)?;
        for z in [0.5, 2.0, 3.0] {
            let a = power_diagonals(&g, z, 6).map_err(err)?;
            let b = power_diagonals(&gauged, z, 6).map_err(err)?;
            let sa = power_sums(&g, z).map_err(err)?;
            let sb = power_sums(&gauged, z).map_err(err)?;
            let pa = a.series.iter().flat_map(|s| s.diag.iter().copied());
            let pb = b.series.iter().flat_map(|s| s.diag.iter().copied());
            for (x, y) in pa.chain(sa.0.iter().copied()).zip(pb.chain(sb.0.iter().copied())) {
                let rel = (x - y).abs() / x.abs().max(y.abs()).max(1.0);
                worst = worst.max(rel);
                check(rel <= 1e-9, || format!("case {case} z={z}: {x} vs {y}"))?;
            }
        }
    }
    Ok(format!("max relative difference {worst:.1e}"))
}

/// (d) power sums → characteristic polynomial → roots, and the determinant
/// cross-check.
fn criterion_9d() -> Outcome {
    let mut rng = rng(0x9d);
    let mut worst = 0.0f64;
    for case in 0..50 {
        let n = rng.gen_range(1..=8);
        let mut centres: Vec<i32> = (-10..=10).collect();
        rand::seq::SliceRandom::shuffle(&mut centres[..], &mut rng);
        let mut roots = Vec::new();
        for c in centres {
            let value = f64::from(c) * 0.5 + rng.gen_range(-0.1..0.1);
            for _ in 0..rng.gen_range(1..=3) {
                if roots.len() < n {
                    roots.push(value);
                }
            }
            if roots.len() == n {
                break;
            }
        }
        roots.sort_by(|a, b| b.total_cmp(a));
        let poly = charpoly_from_power_sums(&PowerSums::of_roots(&roots)).map_err(err)?;
        let s = Spectrum::from_roots(0.0, poly.polished_roots());
        let d = max_abs_diff(&s.eigenvalues, &roots);
        worst = worst.max(d);
        check(!s.non_real && d <= 1e-6, || format!("case {case}: {:?} vs {roots:?}", s.eigenvalues))?;
    }
    let mut worst_det = 0.0f64;
    for case in 0..50 {
        let n = rng.gen_range(1..=6);
        let roots: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let s = PowerSums::of_roots(&roots);
        let a = charpoly_from_power_sums(&s).map_err(err)?;
        let b = charpoly_by_determinant(&s).map_err(err)?;
        for (x, y) in a.0.iter().zip(&b.0) {
            let rel = (x - y).abs() / x.abs().max(y.abs()).max(1.0);
            worst_det = worst_det.max(rel);
            check(rel <= 1e-9, || format!("case {case}: {:?} vs {:?}", a.0, b.0))?;
        }
    }
    Ok(format!("root error {worst:.1e}, Newton vs determinant {worst_det:.1e}"))
}

/// (e) convexity of e and recovery of an injected blunder.
fn criterion_9e() -> Outcome {
    let mut rng = rng(0x9e);
    for case in 0..50 {
        let n = rng.gen_range(3..=6);
        let extra = rng.gen_range(1..=3);
        let g = random_real_network(&mut rng, n, extra, 3.0);
        let k = rng.gen_range(1..=g.arcs().len().min(3));
        let suspects: Vec<usize> = (g.arcs().len() - k..g.arcs().len()).collect();
        let f = build_error_function(&g, &suspects, 2.0, rng.gen_range(3..=5), BUDGET).map_err(err)?;
        for _ in 0..5 {
            let a: Vec<f64> = (0..k).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let b: Vec<f64> = (0..k).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let l: f64 = rng.gen_range(0.0..=1.0);
            let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| l * x + (1.0 - l) * y).collect();
            let lhs = f.value(&mid).map_err(err)?;
            let rhs = l * f.value(&a).map_err(err)? + (1.0 - l) * f.value(&b).map_err(err)?;
            check(lhs <= rhs + 1e-9, || format!("case {case}: convexity violated {lhs} > {rhs}"))?;
        }
    }
    let mut recovered = 0usize;
    let mut worst = 0.0f64;
    while recovered < 50 {
        let n = rng.gen_range(3..=6);
        let extra = rng.gen_range(1..=3);
        let g = random_potential_network(&mut rng, n, extra);
        // chords close cycles; pick an arc whose removal keeps the network connected
        let candidates: Vec<usize> =
            (0..g.arcs().len()).filter(|&i| remove_suspects(&g, &[i]).is_ok()).collect();
        let Some(&arc) = candidates.get(rng.gen_range(0..candidates.len().max(1))) else {
            continue;
        };
        let delta = rng.gen_range(0.5..=5.0);
        let mut w: Vec<f64> = g.arcs().iter().map(|a| a.weight).collect();
        w[arc] += delta;
        let corrupted = g.with_weights(&w);
        let res = correct(&corrupted, &[arc], &DetectConfig::default(), None).map_err(err)?;
        let e = (res.x_star[0] + delta).abs();
        worst = worst.max(e);
        check(e <= 1e-6, || format!("injected {delta}, recovered {}", -res.x_star[0]))?;
        recovered += 1;
    }
    Ok(format!("250 convexity probes; 50 blunders recovered, max error {worst:.1e}"))
}

/// (f) analytic gradient against central differences.
fn criterion_9f() -> Outcome {
    let mut rng = rng(0x9f);
    let mut worst = 0.0f64;
    for case in 0..50 {
        let vars = rng.gen_range(1..=3);
        let terms: Vec<Term> = (0..rng.gen_range(1..=6))
            .map(|_| {
                let mut e = AffineExponent::constant(rng.gen_range(-3.0..3.0));
                for v in 0..vars {
                    e = e.with_var(v, rng.gen_range(-2..=2));
                }
                Term {
                    exponent: e,
                    coeff: rng.gen_range(0.1..10.0),
                }
            })
            .collect();
        let p = ExpPoly::from_terms(terms);
        let z = rng.gen_range(0.3..3.0);
        let x: Vec<f64> = (0..vars).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let g = p.gradient(z, &x).map_err(err)?;
        let h = 1e-6;
        for i in 0..vars {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (p.eval(z, &xp).map_err(err)? - p.eval(z, &xm).map_err(err)?) / (2.0 * h);
            let rel = (g[i] - fd).abs() / g[i].abs().max(fd.abs()).max(1.0);
            worst = worst.max(rel);
            check(rel <= 1e-5, || format!("case {case}: gradient {} vs {fd}", g[i]))?;
        }
    }
    Ok(format!("max relative error {worst:.1e}"))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 14] = [
        ("1  clean six-point network has zero deviations", criterion_1),
        ("2  erroneous six-point network norm series", criterion_2),
        ("3  asymptotic diagonal slope at r=4", criterion_3),
        ("4  six-point spectrum, z-independent", criterion_4),
        ("5  single-arc correction x* = -1", criterion_5),
        ("6  experimental data, error-free series", criterion_6),
        ("7  experimental data, corrupted series", criterion_7),
        ("8  experimental data, two-arc correction", criterion_8),
        ("9a walk-enumeration oracle equivalence", criterion_9a),
        ("9b consistent networks: zero deviation, fixed spectrum", criterion_9b),
        ("9c gauge invariance of diagonals and traces", criterion_9c),
        ("9d power-sum root recovery and determinant identity", criterion_9d),
        ("9e convexity and injected-error recovery", criterion_9e),
        ("9f gradient vs central differences", criterion_9f),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
