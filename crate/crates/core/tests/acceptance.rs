//! Acceptance run: one pass/fail line per criterion, tolerances pinned below.
//! Criterion 9 is a heuristic trend and is reported without gating.

use std::sync::Arc;
use std::time::Instant;

use num_bigint::BigUint;
use num_rational::Ratio;

use normtorus::constants::{
    c233_prefactor, c233_prefactor_from_sums, mammo_closed_form, multicyclic_total_constant,
    multicyclic_wa_constant,
};
use normtorus::group::{alpha, FiniteAbelianGroup};
use normtorus::reduction::{lemma_cases, LEMMA_BOUND};
use normtorus::splitting::{classify_records, CharacterNormalization};
use normtorus::tuple::{discriminant, ExtensionTuple};
use normtorus::verify::{
    check_frobenius, check_indicator, check_lemmas, check_restriction, check_structure,
    groups_up_to, Fault, PropertyResult,
};

const GROUP_ORDER_BOUND: u64 = 200;
const LOCAL_CONDITIONS_SECONDS: f64 = 60.0;
const MAMMO_PRIME_BOUND: u64 = 10_000_000;
const MAMMO_TOLERANCE: f64 = 1e-8;
const IDENTITY_TOLERANCE: f64 = 1e-12;
const INDICATOR_WEIGHTED_BOUND: u64 = 10_000;
const MIN_CONGRUENCE_FUNCTIONS: u64 = 5;
const LEMMA_SECONDS: f64 = 300.0;
const MIN_FIELDS: u64 = 500;
const QUADRATIC_BOUND: u64 = 10_000;
const SEED: u64 = 1;

struct Line {
    id: u32,
    gating: bool,
    passed: bool,
    detail: String,
}

fn report(lines: &mut Vec<Line>, id: u32, gating: bool, passed: bool, detail: String) {
    println!(
        "criterion {id}: {} ({detail})",
        if passed { "PASS" } else { "FAIL" }
    );
    lines.push(Line {
        id,
        gating,
        passed,
        detail,
    });
}

fn summary(p: &PropertyResult) -> String {
    let first = p
        .failures
        .first()
        .map(|f| format!(", first failure: {f}"))
        .unwrap_or_default();
    format!("{} checked {}, {:.1}s{first}", p.name, p.checked, p.elapsed)
}

fn big(x: u32) -> BigUint {
    BigUint::from(10u32).pow(x)
}

fn local_conditions(lines: &mut Vec<Line>) {
    let t = Instant::now();
    let groups = groups_up_to(GROUP_ORDER_BOUND);
    let res = check_restriction(&groups, Fault::None);
    let secs = t.elapsed().as_secs_f64();
    let ok = res.iter().all(|r| r.passed) && secs < LOCAL_CONDITIONS_SECONDS;
    let detail = format!(
        "{} groups, {}; {}; total {secs:.1}s",
        groups.len(),
        summary(&res[0]),
        summary(&res[1])
    );
    report(lines, 1, true, ok, detail);
}

fn alpha_values(lines: &mut Vec<Line>) {
    let mut bad = Vec::new();
    let mut n_checked = 0;
    for ell in [2u32, 3, 5] {
        for n in 1..=3u32 {
            let a = FiniteAbelianGroup::elementary(ell, n as usize).unwrap();
            let l = ell as i128;
            let want = Ratio::new(l.pow(n) - 1, l.pow(n - 1) * (l - 1));
            let got = alpha(&a).unwrap();
            n_checked += 1;
            if got != want {
                bad.push(format!("{a}: {got} vs {want}"));
            }
        }
    }
    for d in ["4", "8", "9", "27", "25", "2.3", "4.3"] {
        let got = alpha(&FiniteAbelianGroup::parse(d).unwrap()).unwrap();
        n_checked += 1;
        if got != Ratio::from_integer(1) {
            bad.push(format!("cyclic {d}: {got}"));
        }
    }
    let got = alpha(&FiniteAbelianGroup::parse("2.3.3").unwrap()).unwrap();
    n_checked += 1;
    if got != Ratio::from_integer(1) {
        bad.push(format!("2.3.3: {got}"));
    }
    report(
        lines,
        2,
        true,
        bad.is_empty(),
        format!("{n_checked} exact values, mismatches {bad:?}"),
    );
}

fn discriminant_valuations(lines: &mut Vec<Line>) {
    let a = Arc::new(FiniteAbelianGroup::parse("2.3.3").unwrap());
    // order-3 slot u = (0,1,0), order-6 slot v = (1,0,1), order-2 slot w = (1,0,0)
    let cases: &[(&str, u64, u64)] = &[
        ("0.1.0:7;1.0.1:13;1.0.0:5", 5, 9),
        ("0.1.0:7;1.0.1:13;1.0.0:5", 7, 12),
        ("0.1.0:7;1.0.1:13;1.0.0:5", 13, 15),
        ("0.1.0:7;1.0.1:13;1.0.0:5", 11, 0),
        ("0.1.0:7;1.0.1:13;1.0.0:5", 3, 0),
        ("0.1.0:7;1.0.1:13;1.0.0:15", 3, 9),
        ("0.1.0:21;1.0.1:13;1.0.0:5", 3, 24),
        ("0.1.0:7;1.0.1:39;1.0.0:5", 3, 27),
        ("0.1.0:7;1.0.1:13;1.0.0:5", 2, 0),
        ("0.1.0:7;1.0.1:13;1.0.0:-5", 2, 18),
        ("0.1.0:7;1.0.1:13;1.0.0:10", 2, 27),
    ];
    let mut bad = Vec::new();
    for &(s, p, want) in cases {
        let t = ExtensionTuple::parse(a.clone(), s).unwrap();
        let got = discriminant(&t).unwrap().exponent(p);
        if got != want {
            bad.push(format!("{s} at {p}: {got} vs {want}"));
        }
    }
    report(
        lines,
        3,
        true,
        bad.is_empty(),
        format!("{} valuations, mismatches {bad:?}", cases.len()),
    );
}

fn mammo(lines: &mut Vec<Line>) {
    let total = multicyclic_total_constant(3, 2, MAMMO_PRIME_BOUND).unwrap();
    let closed = mammo_closed_form(MAMMO_PRIME_BOUND).unwrap();
    // the closed form is the leading coefficient C / Γ(4)
    let raw_leading = total.extras["raw_product"] / 6.0;
    let tails = total.extras["raw_product_heuristic_tail"] / 6.0 + closed.tail_bound;
    let diff = (raw_leading - closed.value).abs();
    let lhs = c233_prefactor_from_sums();
    let rhs = c233_prefactor();
    let id = (lhs - rhs).abs();
    let ok = diff <= MAMMO_TOLERANCE + tails && id <= IDENTITY_TOLERANCE;
    let detail = format!(
        "raw/G(4) {raw_leading:.12e}, closed {:.12e}, |diff| {diff:.2e}, relative {:.2e}, tails {tails:.2e}; identity |diff| {id:.2e}",
        closed.value,
        diff / closed.value
    );
    report(lines, 4, true, ok, detail);
}

fn indicator(lines: &mut Vec<Line>) {
    let r = check_indicator(&[(2, 2), (3, 2), (2, 3)], INDICATOR_WEIGHTED_BOUND, SEED);
    let enough = ["2.2", "3.3", "2.2.2"].iter().all(|d| {
        r.counts
            .get(&format!("congruence_functions_{d}"))
            .copied()
            .unwrap_or(0)
            >= MIN_CONGRUENCE_FUNCTIONS
    });
    let tuples: Vec<String> = ["2.2", "3.3", "2.2.2"]
        .iter()
        .map(|d| {
            format!(
                "{d}: {}",
                r.counts.get(&format!("tuples_{d}")).copied().unwrap_or(0)
            )
        })
        .collect();
    report(
        lines,
        5,
        true,
        r.passed && enough,
        format!("{}, tuples {}", summary(&r), tuples.join(", ")),
    );
}

fn lemmas(lines: &mut Vec<Line>) {
    let cases = lemma_cases(LEMMA_BOUND);
    let (r, reports) = check_lemmas(&cases);
    let sets: u64 = reports.iter().map(|x| x.sets_checked).sum();
    let ok = r.passed && r.elapsed < LEMMA_SECONDS;
    report(
        lines,
        6,
        true,
        ok,
        format!(
            "{} cases {cases:?}, {} pair sets, {}",
            reports.len(),
            sets,
            summary(&r)
        ),
    );
}

fn frobenius(lines: &mut Vec<Line>) {
    let mut ok = true;
    let mut parts = Vec::new();
    for (d, x) in [("2.2", 6u32), ("3.3", 24), ("2.3.3", 40)] {
        let r = check_frobenius(
            &Arc::new(FiniteAbelianGroup::parse(d).unwrap()),
            &big(x),
            12,
        );
        let fields = r.counts["fields"];
        ok &= r.passed && fields >= MIN_FIELDS;
        parts.push(format!("{d} X=1e{x}: {fields} fields, {}", summary(&r)));
    }
    report(lines, 7, true, ok, parts.join("; "));
}

fn structure(lines: &mut Vec<Line>) {
    let r = check_structure(
        &[
            ("3.3", big(20)),
            ("2.2", big(6)),
            ("4", big(6)),
            ("2.3.3", big(30)),
            ("2.4", big(10)),
        ],
        QUADRATIC_BOUND,
    );
    report(
        lines,
        8,
        true,
        r.passed,
        format!("{}, counts {:?}", summary(&r), r.counts),
    );
}

/// Least-squares slope of `y` against `x`.
fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn trend(lines: &mut Vec<Line>) {
    let a = Arc::new(FiniteAbelianGroup::parse("3.3").unwrap());
    let lo = 21.0f64;
    let hi = 30.0f64;
    let recs = classify_records(a.clone(), &big(hi as u32), &CharacterNormalization);
    let c = multicyclic_wa_constant(3, 2, 1_000_000).unwrap().extras["leading_coefficient"];
    let aut = 48.0;
    let mut xs = Vec::new();
    let mut ratios = Vec::new();
    for k in 0..10 {
        let e = lo + (hi - lo) * k as f64 / 9.0;
        let ln_x = e * std::f64::consts::LN_10;
        let bound = BigUint::from(10u32).pow(e.floor() as u32)
            * BigUint::from((10f64.powf(e.fract()) * 1e6) as u64)
            / BigUint::from(1_000_000u32);
        let wa = recs
            .iter()
            .filter(|r| r.verdict.wa && r.disc <= bound)
            .count() as f64
            / aut;
        xs.push(ln_x);
        ratios.push(wa / (c * (ln_x / 6.0).exp() * ln_x.powf(1.0 / 3.0)));
    }
    let m = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let s = slope(&xs, &ratios);
    let toward = (1.0 - m).signum() == s.signum();
    let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.3}")).collect();
    report(
        lines,
        9,
        false,
        toward,
        format!(
            "ratios [{}] for X = 1e21..1e30, slope {s:.2e} per log X, heuristic and not gating",
            shown.join(", ")
        ),
    );
}

#[test]
fn acceptance() {
    let mut lines = Vec::new();
    local_conditions(&mut lines);
    alpha_values(&mut lines);
    discriminant_valuations(&mut lines);
    mammo(&mut lines);
    indicator(&mut lines);
    lemmas(&mut lines);
    frobenius(&mut lines);
    structure(&mut lines);
    trend(&mut lines);
    let failed: Vec<String> = lines
        .iter()
        .filter(|l| l.gating && !l.passed)
        .map(|l| format!("{}: {}", l.id, l.detail))
        .collect();
    assert!(failed.is_empty(), "gating criteria failed: {failed:?}");
}
