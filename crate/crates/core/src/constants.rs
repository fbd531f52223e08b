//! Euler-product constants: a generic evaluator for products of rational local
//! factors in `x = p^{-1/k}`, made absolutely convergent by pairing against
//! `(1 - x^k)^s` and Dirichlet L-factors, with a certified tail; the
//! multicyclic total and weak-approximation constants; and the truncated
//! weak-approximation sum `κ` for `C2 x C3 x C3`.
//!
//! Logarithms of local factors are accumulated with compensated summation and
//! exponentiated once.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_rational::Ratio;
use serde::Serialize;
use statrs::function::gamma::{digamma, gamma};

use crate::arith::{for_each_prime, is_prime, least_primitive_root, pow_mod, primes_up_to};
use crate::error::{Error, Result};
use crate::group::FiniteAbelianGroup;
use crate::splitting::CharacterNormalization;

/// Default truncation bound for Euler products.
pub const DEFAULT_PRIME_BOUND: u64 = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FormulaRoute {
    RawProduct,
    LValueClosedForm,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstantReport {
    pub name: String,
    pub value: f64,
    pub tail_bound: f64,
    pub inputs: BTreeMap<String, String>,
    pub formula_route: FormulaRoute,
    pub tail_certified: bool,
    pub prime_bound: u64,
    pub extras: BTreeMap<String, f64>,
}

impl ConstantReport {
    /// `value` with `digits` significant digits.
    pub fn formatted(&self, digits: usize) -> String {
        format!("{:.*e}", digits.clamp(1, 17) - 1, self.value)
    }
}

/// Neumaier compensated summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Local factor `∏ poly_i(x)^{e_i}` for primes `p mod modulus ∈ residues`.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalRule {
    pub modulus: u64,
    pub residues: Vec<u64>,
    pub factors: Vec<(Vec<f64>, f64)>,
}

/// Multiplies every `p` by `∏_j (1 - χ_j(p) x^k)^{t_j}` for characters `χ_j`
/// mod the prime `modulus` (`χ_j(g^e) = e^{2πi j e/(q-1)}`, `g` the least
/// primitive root), and the total by `∏_j L(1, χ_j)^{t_j}`. Exponents must be
/// invariant under `j ↦ q-1-j`.
#[derive(Clone, Debug, PartialEq)]
pub struct LCompensation {
    pub modulus: u64,
    pub exponents: Vec<(u64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EulerProductSpec {
    pub name: String,
    /// `k` in `x = p^{-1/k}`.
    pub root: u32,
    /// First matching rule applies; unmatched primes get factor 1.
    pub rules: Vec<LocalRule>,
    /// `s` in `(1 - x^k)^s`, applied at every prime.
    pub pairing: f64,
    pub compensation: Option<LCompensation>,
    pub prefactor: f64,
    pub prime_bound: u64,
}

/// `L(1, χ_j) = -(1/q) Σ_a χ_j(a) ψ(a/q)` as `(re, im)`, for `χ_j != 1` mod an odd prime `q`.
pub fn l_value_mod_prime(q: u64, j: u64) -> (f64, f64) {
    assert!(is_prime(q) && q > 2 && j % (q - 1) != 0);
    if q == 3 {
        return (PI / (3.0 * 3f64.sqrt()), 0.0);
    }
    let g = least_primitive_root(q);
    let mut re = CompensatedSum::default();
    let mut im = CompensatedSum::default();
    let mut a = 1u64;
    for e in 0..q - 1 {
        let th = 2.0 * PI * ((j * e) % (q - 1)) as f64 / (q - 1) as f64;
        let psi = digamma(a as f64 / q as f64);
        re.add(th.cos() * psi);
        im.add(th.sin() * psi);
        a = a * g % q;
    }
    (-re.value() / q as f64, -im.value() / q as f64)
}

/// `L(1, χ)` for the nontrivial character mod 3 by the digamma series (the
/// closed form is used in [`l_value_mod_prime`]).
pub fn l_value_mod3_series() -> f64 {
    -(digamma(1.0 / 3.0) - digamma(2.0 / 3.0)) / 3.0
}

/// `log P(x)` as a power series up to `x^deg`, for `P(0) = 1`.
pub fn log_series(poly: &[f64], deg: usize) -> Vec<f64> {
    assert!((poly[0] - 1.0).abs() < 1e-15, "log_series needs P(0) = 1");
    let coef = |i: usize| poly.get(i).copied().unwrap_or(0.0);
    // L' = P'/P, so n L_n = n P_n - Σ_{i=1}^{n-1} i L_i P_{n-i}
    let mut l = vec![0.0; deg + 1];
    for n in 1..=deg {
        let mut s = n as f64 * coef(n);
        for i in 1..n {
            s -= i as f64 * l[i] * coef(n - i);
        }
        l[n] = s / n as f64;
    }
    l
}

/// `ln P(x)` computed as `ln_1p(P(x) - 1)`.
fn ln_poly(poly: &[f64], x: f64) -> f64 {
    let rest: f64 = poly[1..].iter().rev().fold(0.0, |acc, &c| acc * x + c) * x;
    rest.ln_1p()
}

/// Characters mod `q` as angles, for each residue.
struct CharTable {
    q: u64,
    /// residue -> Σ_j (t_j / 2, cos θ_j(r)) terms
    angles: Vec<Vec<(f64, f64)>>,
    log_l: f64,
}

impl CharTable {
    fn new(c: &LCompensation) -> Result<Self> {
        let q = c.modulus;
        if !is_prime(q) || q == 2 {
            return Err(Error::Unsupported(format!(
                "compensation modulus {q} must be an odd prime"
            )));
        }
        let mut ex: BTreeMap<u64, f64> = BTreeMap::new();
        for &(j, t) in &c.exponents {
            if j % (q - 1) == 0 {
                return Err(Error::Precondition(
                    "compensation by the principal character".into(),
                ));
            }
            *ex.entry(j % (q - 1)).or_default() += t;
        }
        for (&j, &t) in &ex {
            let tj = ex.get(&(q - 1 - j)).copied().unwrap_or(0.0);
            if (t - tj).abs() > 1e-12 {
                return Err(Error::Precondition(format!(
                    "exponent of χ_{j} differs from its conjugate"
                )));
            }
        }
        let g = least_primitive_root(q);
        let mut ind = vec![0u64; q as usize];
        let mut a = 1u64;
        for e in 0..q - 1 {
            ind[a as usize] = e;
            a = a * g % q;
        }
        let mut angles = vec![Vec::new(); q as usize];
        for r in 1..q {
            for (&j, &t) in &ex {
                let th = 2.0 * PI * ((j * ind[r as usize]) % (q - 1)) as f64 / (q - 1) as f64;
                angles[r as usize].push((t / 2.0, th.cos()));
            }
        }
        let mut log_l = 0.0;
        for (&j, &t) in &ex {
            let (re, im) = l_value_mod_prime(q, j);
            log_l += t * (re * re + im * im).sqrt().ln();
        }
        Ok(Self { q, angles, log_l })
    }

    /// Real quadratic factors `(1 - 2 cos θ y + y^2)^{t/2}` in the variable `y = x^k`.
    fn factors(&self, r: u64, k: u32) -> Vec<(Vec<f64>, f64)> {
        self.angles[(r % self.q) as usize]
            .iter()
            .map(|&(e, c)| {
                let mut p = vec![0.0; 2 * k as usize + 1];
                p[0] = 1.0;
                p[k as usize] = -2.0 * c;
                p[2 * k as usize] = 1.0;
                (p, e)
            })
            .collect()
    }
}

struct Prepared {
    spec: EulerProductSpec,
    chars: Option<CharTable>,
    period: u64,
}

impl Prepared {
    fn new(spec: &EulerProductSpec) -> Result<Self> {
        if spec.root == 0 {
            return Err(Error::Precondition("root k must be positive".into()));
        }
        for r in &spec.rules {
            for (p, _) in &r.factors {
                if p.is_empty() || (p[0] - 1.0).abs() > 1e-15 {
                    return Err(Error::Precondition(
                        "local polynomials must have constant term 1".into(),
                    ));
                }
            }
        }
        let chars = spec.compensation.as_ref().map(CharTable::new).transpose()?;
        let mut period = 1u64;
        for r in &spec.rules {
            period = num_integer::lcm(period, r.modulus);
        }
        if let Some(c) = &chars {
            period = num_integer::lcm(period, c.q);
        }
        Ok(Self {
            spec: spec.clone(),
            chars,
            period,
        })
    }

    /// All `(poly, exponent)` pieces of the local factor at primes `≡ r` mod the period.
    fn pieces(&self, r: u64) -> Vec<(Vec<f64>, f64)> {
        let k = self.spec.root as usize;
        let mut out = Vec::new();
        if let Some(rule) = self
            .spec
            .rules
            .iter()
            .find(|rule| rule.residues.contains(&(r % rule.modulus)))
        {
            out.extend(rule.factors.iter().cloned());
        }
        if self.spec.pairing != 0.0 {
            let mut p = vec![0.0; k + 1];
            p[0] = 1.0;
            p[k] = -1.0;
            out.push((p, self.spec.pairing));
        }
        if let Some(c) = &self.chars {
            if r % c.q != 0 {
                out.extend(c.factors(r, self.spec.root));
            }
        }
        out
    }

    fn log_factor(&self, pieces: &[(Vec<f64>, f64)], x: f64) -> f64 {
        pieces.iter().map(|(p, e)| e * ln_poly(p, x)).sum()
    }
}

/// `Σ_{p > P} p^{-σ} <= 1.25506 σ P^{1-σ} / ((σ - 1) ln P)`, from `π(t) < 1.25506 t / ln t`.
pub fn prime_zeta_tail(sigma: f64, p: f64) -> f64 {
    1.25506 * sigma * p.powf(1.0 - sigma) / ((sigma - 1.0) * p.ln())
}

/// Largest `K` with `|log F(p)| <= K x^{k+1}` for `x <= x0`, over all classes.
fn tail_constant(prep: &Prepared, classes: &[u64], x0: f64) -> Result<f64> {
    let k = prep.spec.root as usize;
    let mut worst: f64 = 0.0;
    for &r in classes {
        let pieces = prep.pieces(r);
        let deg = pieces.iter().map(|(p, _)| p.len()).max().unwrap_or(1) + k + 2;
        let mut series = vec![0.0; deg + 1];
        let mut k_r = 0.0;
        for (p, e) in &pieces {
            let s = log_series(p, deg);
            for (acc, v) in series.iter_mut().zip(&s) {
                *acc += e * v;
            }
            // majorant G = -log(1 - Q̄), Q̄ with absolute coefficients
            let qbar: f64 = p[1..]
                .iter()
                .enumerate()
                .map(|(i, c)| c.abs() * x0.powi(i as i32 + 1))
                .sum();
            if qbar >= 1.0 {
                return Err(Error::Precondition(
                    "majorant diverges at the truncation point".into(),
                ));
            }
            let mut absp: Vec<f64> = vec![1.0];
            absp.extend(p[1..].iter().map(|c| -c.abs()));
            let low: f64 = log_series(&absp, k)
                .iter()
                .enumerate()
                .map(|(i, c)| -c * x0.powi(i as i32))
                .sum();
            let g = -(1.0 - qbar).ln() - low;
            k_r += e.abs() * g.max(0.0) / x0.powi(k as i32 + 1);
        }
        let scale = series.iter().map(|c| c.abs()).fold(1.0, f64::max);
        for (j, c) in series.iter().enumerate().take(k + 1).skip(1) {
            if c.abs() > 1e-10 * scale {
                return Err(Error::Precondition(format!(
                    "{}: coefficient of x^{j} in the paired log factor is {c:.3e}, not 0; the product is not absolutely convergent",
                    prep.spec.name
                )));
            }
        }
        worst = worst.max(k_r);
    }
    Ok(worst)
}

fn coprime_classes(period: u64) -> Vec<u64> {
    (1..=period)
        .filter(|&r| num_integer::gcd(r, period) == 1)
        .collect()
}

/// Generic evaluator `c_0 = prefactor · ∏ L^{t} · ∏_{p <= P} F(p)` with a certified tail.
pub fn gk_c0(spec: &EulerProductSpec) -> Result<ConstantReport> {
    let prep = Prepared::new(spec)?;
    let p_bound = spec.prime_bound.max(3);
    let x0 = (p_bound as f64).powf(-1.0 / spec.root as f64);
    let classes = coprime_classes(prep.period);
    let kconst = tail_constant(&prep, &classes, x0)?;
    let mut cache: BTreeMap<u64, Vec<(Vec<f64>, f64)>> = BTreeMap::new();
    let mut log = CompensatedSum::default();
    let k = spec.root as f64;
    for_each_prime(spec.prime_bound, |p| {
        let r = p % prep.period;
        let pieces = cache.entry(r).or_insert_with(|| prep.pieces(r));
        log.add(prep.log_factor(pieces, (p as f64).powf(-1.0 / k)));
    });
    let log_l = prep.chars.as_ref().map(|c| c.log_l).unwrap_or(0.0);
    let value = spec.prefactor * (log.value() + log_l).exp();
    let sigma = (k + 1.0) / k;
    let tail_log = kconst * prime_zeta_tail(sigma, p_bound as f64);
    let tail = value.abs() * (tail_log.exp() - 1.0);
    let mut inputs = BTreeMap::new();
    inputs.insert("root".into(), spec.root.to_string());
    inputs.insert("pairing".into(), spec.pairing.to_string());
    let mut extras = BTreeMap::new();
    extras.insert("log_tail_bound".into(), tail_log);
    extras.insert("log_tail_constant".into(), kconst);
    Ok(ConstantReport {
        name: spec.name.clone(),
        value,
        tail_bound: tail,
        inputs,
        formula_route: if spec.compensation.is_some() {
            FormulaRoute::LValueClosedForm
        } else {
            FormulaRoute::RawProduct
        },
        tail_certified: true,
        prime_bound: spec.prime_bound,
        extras,
    })
}

/// The product without L-compensation, which may converge only conditionally.
/// The tail is a heuristic: the spread of the running log product over
/// `[P/4, P]`.
pub fn raw_truncated_product(spec: &EulerProductSpec) -> Result<ConstantReport> {
    let mut spec = spec.clone();
    spec.compensation = None;
    let prep = Prepared::new(&spec)?;
    let k = spec.root as f64;
    let mut cache: BTreeMap<u64, Vec<(Vec<f64>, f64)>> = BTreeMap::new();
    let mut log = CompensatedSum::default();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let quarter = spec.prime_bound / 4;
    for_each_prime(spec.prime_bound, |p| {
        let r = p % prep.period;
        let pieces = cache.entry(r).or_insert_with(|| prep.pieces(r));
        log.add(prep.log_factor(pieces, (p as f64).powf(-1.0 / k)));
        if p >= quarter {
            let v = log.value();
            lo = lo.min(v);
            hi = hi.max(v);
        }
    });
    let value = spec.prefactor * log.value().exp();
    let spread = if hi >= lo { hi - lo } else { 0.0 };
    let mut inputs = BTreeMap::new();
    inputs.insert("root".into(), spec.root.to_string());
    inputs.insert("pairing".into(), spec.pairing.to_string());
    Ok(ConstantReport {
        name: format!("{} (raw)", spec.name),
        value,
        tail_bound: value.abs() * (spread.exp() - 1.0),
        inputs,
        formula_route: FormulaRoute::RawProduct,
        tail_certified: false,
        prime_bound: spec.prime_bound,
        extras: BTreeMap::new(),
    })
}

fn check_odd_prime(ell: u64) -> Result<()> {
    if ell == 2 {
        return Err(Error::Unsupported(
            "l = 2 is excluded for the multicyclic constants".into(),
        ));
    }
    if !is_prime(ell) {
        return Err(Error::Precondition(format!("{ell} is not prime")));
    }
    Ok(())
}

fn all_nonprincipal(ell: u64, t: f64) -> LCompensation {
    LCompensation {
        modulus: ell,
        exponents: (1..ell - 1).map(|j| (j, t)).collect(),
    }
}

fn aut_elementary(ell: u64, n: u32) -> f64 {
    let ln = (ell as f64).powi(n as i32);
    (0..n).map(|i| ln - (ell as f64).powi(i as i32)).product()
}

/// Shared template: `prefactor · ∏_{p ≡ 1 (l)} (1 + c/p) ∏_p (1 - 1/p)^s`.
fn multicyclic_spec(
    name: &str,
    ell: u64,
    c: f64,
    s: f64,
    prefactor: f64,
    p: u64,
) -> EulerProductSpec {
    EulerProductSpec {
        name: name.into(),
        root: 1,
        rules: vec![LocalRule {
            modulus: ell,
            residues: vec![1],
            factors: vec![(vec![1.0, c], 1.0)],
        }],
        pairing: s,
        compensation: Some(all_nonprincipal(ell, s)),
        prefactor,
        prime_bound: p,
    }
}

fn ratio_str(r: Ratio<i128>) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

fn finish(
    mut rep: ConstantReport,
    raw: &ConstantReport,
    ell: u64,
    n: u32,
    exponent_key: &str,
    exponent: Ratio<i128>,
) -> ConstantReport {
    let e = *exponent.numer() as f64 / *exponent.denom() as f64;
    rep.inputs.insert("ell".into(), ell.to_string());
    rep.inputs.insert("n".into(), n.to_string());
    rep.inputs.insert(exponent_key.into(), ratio_str(exponent));
    rep.inputs
        .insert("log_exponent".into(), ratio_str(exponent - 1));
    let g = gamma(e);
    rep.extras
        .insert("leading_coefficient".into(), rep.value / g);
    rep.extras
        .insert("leading_coefficient_tail".into(), rep.tail_bound / g);
    rep.extras.insert("raw_product".into(), raw.value);
    rep.extras
        .insert("raw_product_heuristic_tail".into(), raw.tail_bound);
    rep
}

/// Total constant `C` for `F_l^n` fields; `extras.leading_coefficient` is `C / Γ(β)`.
pub fn multicyclic_total_constant(ell: u64, n: u32, prime_bound: u64) -> Result<ConstantReport> {
    check_odd_prime(ell)?;
    let a = FiniteAbelianGroup::elementary(ell as u32, n as usize)?;
    let beta_r = crate::group::alpha_total(&a)?;
    let l = ell as f64;
    let ln = l.powi(n as i32);
    let beta = (ln - 1.0) / (l - 1.0);
    let prefactor =
        (1.0 + (ln - 1.0) / (l * l)) / (aut_elementary(ell, n) * (ln - ln / l).powf(beta - 1.0));
    let spec = multicyclic_spec(
        "multicyclic_total",
        ell,
        ln - 1.0,
        beta,
        prefactor,
        prime_bound,
    );
    let rep = gk_c0(&spec)?;
    let raw = raw_truncated_product(&spec)?;
    Ok(finish(rep, &raw, ell, n, "alpha_total", beta_r))
}

/// Weak-approximation constant for `F_l^n` fields, with the stated `l`-adic
/// factor; `extras["variant.l_adic_wa_corrected"]` uses `1 + (l^n-1)/l^{n+1}`.
pub fn multicyclic_wa_constant(ell: u64, n: u32, prime_bound: u64) -> Result<ConstantReport> {
    check_odd_prime(ell)?;
    let a = FiniteAbelianGroup::elementary(ell as u32, n as usize)?;
    let alpha_r = crate::group::alpha(&a)?;
    let l = ell as f64;
    let ln = l.powi(n as i32);
    let alpha = (ln - 1.0) / (ln / l * (l - 1.0));
    let base = aut_elementary(ell, n) * (ln - ln / l).powf(alpha - 1.0);
    let stated = 1.0 + (ln - 1.0) / (l * l);
    let corrected = 1.0 + (ln - 1.0) / (ln * l);
    let spec = multicyclic_spec(
        "multicyclic_wa",
        ell,
        (ln - 1.0) / (ln / l),
        alpha,
        stated / base,
        prime_bound,
    );
    let rep = gk_c0(&spec)?;
    let raw = raw_truncated_product(&spec)?;
    let mut rep = finish(rep, &raw, ell, n, "alpha", alpha_r);
    let v = rep.value * corrected / stated;
    rep.extras.insert("variant.l_adic_wa_corrected".into(), v);
    rep.extras.insert(
        "variant.l_adic_wa_corrected_leading_coefficient".into(),
        v / gamma(alpha),
    );
    Ok(rep)
}

/// `17 π^4 / (2^4 3^17) ∏_{p ≡ 1 (3)} (1 + 8/p)(1 - 1/p)^8 ∏_{p ≡ 2 (3)} (1 - 1/p^2)^4`.
pub fn mammo_closed_form(prime_bound: u64) -> Result<ConstantReport> {
    let spec = EulerProductSpec {
        name: "mammo_closed_form".into(),
        root: 1,
        rules: vec![
            LocalRule {
                modulus: 3,
                residues: vec![1],
                factors: vec![(vec![1.0, 8.0], 1.0), (vec![1.0, -1.0], 8.0)],
            },
            LocalRule {
                modulus: 3,
                residues: vec![2],
                factors: vec![(vec![1.0, 0.0, -1.0], 4.0)],
            },
        ],
        pairing: 0.0,
        compensation: None,
        prefactor: 17.0 * PI.powi(4) / (16.0 * 3f64.powi(17)),
        prime_bound,
    };
    let mut r = gk_c0(&spec)?;
    r.formula_route = FormulaRoute::LValueClosedForm;
    Ok(r)
}

/// `∏_{p ≡ 1 (3)} (1 + c/(p^{1/3}(p+1)) + c/(p^{2/3}(p+1)))`; `c = 8` is the
/// unconditioned `(u, v)` sum, `c = 2` its restriction to one line.
pub fn c233_euler_product(c: f64, prime_bound: u64) -> Result<ConstantReport> {
    let spec = EulerProductSpec {
        name: format!("c233_product_{c}"),
        root: 3,
        rules: vec![LocalRule {
            modulus: 3,
            residues: vec![1],
            factors: vec![
                (vec![1.0, 0.0, 0.0, 1.0, c, c], 1.0),
                (vec![1.0, 0.0, 0.0, 1.0], -1.0),
            ],
        }],
        pairing: 0.0,
        compensation: None,
        prefactor: 1.0,
        prime_bound,
    };
    gk_c0(&spec)
}

/// `(109 + 3·3^{1/3}) / (2^4 3^3 π^2)`.
pub fn c233_prefactor() -> f64 {
    (109.0 + 3.0 * 3f64.cbrt()) / (432.0 * PI * PI)
}

/// `(1 + 3^{-8/3} + 1/81 + 1/3) · (9/π^2) / 48`.
pub fn c233_prefactor_from_sums() -> f64 {
    (1.0 + 3f64.powf(-8.0 / 3.0) + 1.0 / 81.0 + 1.0 / 3.0) * (9.0 / (PI * PI)) / 48.0
}

/// Recomputed prefactor of the unconditioned sum: w-sum `9/(2π^2)` and the prime 3
/// in any of the eight `u`- or `v`-slots.
pub fn c233_prefactor_recomputed() -> f64 {
    (1.0 + 8.0 * 3f64.powf(-8.0 / 3.0) + 8.0 / 27.0 + 1.0 / 3.0) * (9.0 / (2.0 * PI * PI)) / 48.0
}

/// Truncated sums over `(u, v)` with `∏ u^12 v^15 <= H`.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct KappaSums {
    /// all tuples (`U_H`)
    pub unconditioned: f64,
    /// WA on the merged `(Z/3)^2` tuple (`κ_H`)
    pub wa: f64,
    pub wa_surjective: f64,
    pub surjective: f64,
    /// the prime 3 added at each of the eight indices, summed over indices
    pub wa_with_3: f64,
    pub wa_surjective_with_3: f64,
    pub nodes: u64,
}

/// Per-prime data for the `κ` search.
struct KPrime {
    p: u64,
    ln: f64,
    wu: f64,
    wv: f64,
    /// `g^{(p-1)/3} mod p` for the normalized generator `g`
    zeta: u64,
    chi3_at_p: u32,
    chip_at_3: u32,
}

impl KPrime {
    fn new(p: u64, norm: &CharacterNormalization) -> Self {
        let pf = p as f64;
        let d = 1.0 + 1.0 / pf;
        Self {
            p,
            ln: pf.ln(),
            wu: pf.powf(-4.0 / 3.0) / d,
            wv: pf.powf(-5.0 / 3.0) / d,
            zeta: pow_mod(norm.generator(p), (p - 1) / 3, p),
            chi3_at_p: norm.odd_character(3, 3, p) as u32,
            chip_at_3: norm.odd_character(p, 3, 3) as u32,
        }
    }

    /// The mod-3 character of conductor `p` at `x`, as in [`CharacterNormalization::odd_character`].
    fn chi(&self, x: u64) -> u32 {
        let y = pow_mod(x % self.p, (self.p - 1) / 3, self.p);
        if y == 1 {
            0
        } else if y == self.zeta {
            1
        } else {
            2
        }
    }
}

type V2 = [u32; 2];

fn axpy(l: V2, c: u32, x: V2) -> V2 {
    [(l[0] + c * x[0]) % 3, (l[1] + c * x[1]) % 3]
}

fn in_line(v: V2, x: V2) -> bool {
    (v[0] * x[1] + 2 * v[1] * x[0]) % 3 == 0
}

struct KappaSearch<'a> {
    primes: &'a [KPrime],
    ln_h: f64,
    elems: Vec<V2>,
}

/// DFS state: chosen (prime index, element) and the Frobenius lift at each.
#[derive(Default)]
struct KState {
    idx: Vec<usize>,
    xs: Vec<V2>,
    lifts: Vec<V2>,
}

impl KappaSearch<'_> {
    fn run(&self) -> KappaSums {
        let mut s = KappaSums::default();
        self.dfs(0, 0.0, &mut KState::default(), &mut s);
        s
    }

    fn dfs(&self, start: usize, cost: f64, st: &mut KState, s: &mut KappaSums) {
        self.visit(st, s);
        let mut c_new = Vec::with_capacity(st.idx.len());
        let mut c_old = Vec::with_capacity(st.idx.len());
        for j in start..self.primes.len() {
            let kp = &self.primes[j];
            if cost + 12.0 * kp.ln > self.ln_h * (1.0 + 1e-12) {
                break;
            }
            // χ_q(p_new) for every earlier q, and χ_{p_new}(q)
            c_new.clear();
            c_old.clear();
            for &i in &st.idx {
                let q = &self.primes[i];
                c_new.push(q.chi(kp.p));
                c_old.push(kp.chi(q.p));
            }
            let mut base = [0u32; 2];
            for (b, &c) in c_new.iter().enumerate() {
                base = axpy(base, c, st.xs[b]);
            }
            for &x in &self.elems {
                for (b, l) in st.lifts.iter_mut().enumerate() {
                    *l = axpy(*l, c_old[b], x);
                }
                st.idx.push(j);
                st.xs.push(x);
                st.lifts.push(base);
                self.dfs(j + 1, cost + 12.0 * kp.ln, st, s);
                st.idx.pop();
                st.xs.pop();
                st.lifts.pop();
                for (b, l) in st.lifts.iter_mut().enumerate() {
                    *l = axpy(*l, 2 * c_old[b], x);
                }
            }
        }
    }

    fn visit(&self, st: &KState, s: &mut KappaSums) {
        s.nodes += 1;
        let k = st.idx.len();
        // sum over u/v types within the height bound
        let mut weight = CompensatedSum::default();
        let base: f64 = st.idx.iter().map(|&i| 12.0 * self.primes[i].ln).sum();
        for mask in 0u32..(1 << k) {
            let mut c = base;
            let mut w = 1.0;
            for (b, &i) in st.idx.iter().enumerate() {
                let kp = &self.primes[i];
                if mask >> b & 1 == 1 {
                    c += 3.0 * kp.ln;
                    w *= kp.wv;
                } else {
                    w *= kp.wu;
                }
            }
            if c <= self.ln_h * (1.0 + 1e-12) {
                weight.add(w);
            }
        }
        let w = weight.value();
        let xs = &st.xs;
        let wa = st.lifts.iter().zip(xs).all(|(l, x)| in_line(*l, *x));
        let surj = xs.iter().any(|a| !in_line(*a, xs[0]));
        s.unconditioned += w;
        if surj {
            s.surjective += w;
        }
        if wa {
            s.wa += w;
            if surj {
                s.wa_surjective += w;
            }
        }
        for &x0 in &self.elems {
            // the prime 3 at x0: every lift gains χ_3(p) x0, and 3 gets its own lift
            let mut ok = true;
            let mut lift3 = [0u32; 2];
            for (b, &i) in st.idx.iter().enumerate() {
                let kp = &self.primes[i];
                ok &= in_line(axpy(st.lifts[b], kp.chi3_at_p, x0), xs[b]);
                lift3 = axpy(lift3, kp.chip_at_3, xs[b]);
            }
            ok &= in_line(lift3, x0);
            if ok {
                s.wa_with_3 += w;
                if surj || xs.iter().any(|a| !in_line(*a, x0)) {
                    s.wa_surjective_with_3 += w;
                }
            }
        }
    }
}
/// The merged `(Z/3)^2` elements in the order used by the search.
fn z3_elements() -> Vec<V2> {
    let mut v = Vec::new();
    for a in 0..3 {
        for b in 0..3 {
            if (a, b) != (0, 0) {
                v.push([a, b]);
            }
        }
    }
    v
}

/// Truncated sums for height `H` (`ln_h = ln H`).
pub fn kappa_sums(ln_h: f64) -> KappaSums {
    let pmax = (ln_h / 12.0).exp() * (1.0 + 1e-9);
    let norm = CharacterNormalization;
    let primes: Vec<KPrime> = primes_up_to(pmax as u64)
        .into_iter()
        .filter(|&p| p % 3 == 1)
        .map(|p| KPrime::new(p, &norm))
        .collect();
    KappaSearch {
        primes: &primes,
        ln_h,
        elems: z3_elements(),
    }
    .run()
}

/// The stored tuple of a `κ` node, for cross-checks against `splitting`.
pub fn kappa_nodes(ln_h: f64) -> Vec<Vec<(u64, [u32; 2])>> {
    let pmax = (ln_h / 12.0).exp() * (1.0 + 1e-9);
    let primes: Vec<u64> = primes_up_to(pmax as u64)
        .into_iter()
        .filter(|&p| p % 3 == 1)
        .collect();
    let elems = z3_elements();
    let mut out = Vec::new();
    fn rec(
        primes: &[u64],
        elems: &[[u32; 2]],
        start: usize,
        cost: f64,
        ln_h: f64,
        cur: &mut Vec<(u64, [u32; 2])>,
        out: &mut Vec<Vec<(u64, [u32; 2])>>,
    ) {
        out.push(cur.clone());
        for j in start..primes.len() {
            let c = cost + 12.0 * (primes[j] as f64).ln();
            if c > ln_h * (1.0 + 1e-12) {
                break;
            }
            for &x in elems {
                cur.push((primes[j], x));
                rec(primes, elems, j + 1, c, ln_h, cur, out);
                cur.pop();
            }
        }
    }
    rec(&primes, &elems, 0, 0.0, ln_h, &mut Vec::new(), &mut out);
    out
}

/// `κ` truncated at `H = e^{ln_h}`; the tail bound is `E_upper - U_H`.
pub fn kappa_truncated(ln_h: f64, prime_bound: u64) -> Result<ConstantReport> {
    let s = kappa_sums(ln_h);
    let e = c233_euler_product(8.0, prime_bound)?;
    let tail = (e.value + e.tail_bound - s.unconditioned).max(0.0);
    let mut inputs = BTreeMap::new();
    inputs.insert("ln_height".into(), ln_h.to_string());
    let mut extras = BTreeMap::new();
    extras.insert("unconditioned_truncated".into(), s.unconditioned);
    extras.insert("euler_product".into(), e.value);
    extras.insert("euler_product_tail".into(), e.tail_bound);
    extras.insert("nodes".into(), s.nodes as f64);
    Ok(ConstantReport {
        name: "kappa".into(),
        value: s.wa,
        tail_bound: tail,
        inputs,
        formula_route: FormulaRoute::RawProduct,
        tail_certified: true,
        prime_bound,
        extras,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct C233Constants {
    pub wa_leading: ConstantReport,
    pub total_leading: ConstantReport,
    pub proportion: ConstantReport,
    pub identity_lhs: f64,
    pub identity_rhs: f64,
}

/// The stated `C2 x C3 x C3` constants, plus recomputed values under `variant.*` keys.
pub fn c233_constants(ln_h: f64, prime_bound: u64) -> Result<C233Constants> {
    let s = kappa_sums(ln_h);
    let e = c233_euler_product(8.0, prime_bound)?;
    let el = c233_euler_product(2.0, prime_bound)?;
    let (e_lo, e_hi) = (e.value - e.tail_bound, e.value + e.tail_bound);
    let gap = (e_hi - s.unconditioned).max(0.0);
    let pre = c233_prefactor();
    let rec = (9.0 / (2.0 * PI * PI)) / 48.0;
    let ins = 3f64.powf(-8.0 / 3.0) + 1.0 / 27.0;

    let mut inputs = BTreeMap::new();
    inputs.insert("group".into(), "2.3.3".into());
    inputs.insert("ln_height".into(), ln_h.to_string());
    inputs.insert(
        "alpha".into(),
        ratio_str(crate::group::alpha(&FiniteAbelianGroup::parse("2.3.3")?)?),
    );
    let report =
        |name: &str, value: f64, tail: f64, extras: BTreeMap<String, f64>| ConstantReport {
            name: name.into(),
            value,
            tail_bound: tail,
            inputs: inputs.clone(),
            formula_route: FormulaRoute::RawProduct,
            tail_certified: true,
            prime_bound,
            extras,
        };

    let mut ex_total = BTreeMap::new();
    ex_total.insert("euler_product".into(), e.value);
    ex_total.insert(
        "variant.hom_total_recomputed".into(),
        c233_prefactor_recomputed() * e.value,
    );
    // surjective (u, v): remove the tuples supported on one of the four lines
    let e_epi = e.value - 4.0 * (el.value - 1.0) - 1.0;
    let ins_epi = 8.0 * (e.value - el.value);
    let total_epi = rec * ((1.0 + 1.0 / 3.0) * e_epi + ins * ins_epi);
    ex_total.insert("variant.epi_total_recomputed".into(), total_epi);
    ex_total.insert("unconditioned_truncated".into(), s.unconditioned);
    let total_leading = report(
        "c233_total_leading",
        pre * e.value,
        pre * e.tail_bound,
        ex_total,
    );

    let mut ex_wa = BTreeMap::new();
    ex_wa.insert("kappa".into(), s.wa);
    ex_wa.insert("kappa_tail".into(), gap);
    let wa_hom = rec * ((1.0 + 1.0 / 3.0) * s.wa + ins * s.wa_with_3);
    let wa_hom_tail = rec * ((1.0 + 1.0 / 3.0) * gap + ins * 8.0 * gap);
    ex_wa.insert("variant.hom_wa_recomputed".into(), wa_hom);
    ex_wa.insert("variant.hom_wa_recomputed_tail".into(), wa_hom_tail);
    let wa_epi = rec * ((1.0 + 1.0 / 3.0) * s.wa_surjective + ins * s.wa_surjective_with_3);
    ex_wa.insert("variant.epi_wa_recomputed".into(), wa_epi);
    ex_wa.insert("variant.epi_wa_recomputed_tail".into(), wa_hom_tail);
    ex_wa.insert("nodes".into(), s.nodes as f64);
    let wa_leading = report("c233_wa_leading", pre * s.wa, pre * gap, ex_wa);

    let mut ex_p = BTreeMap::new();
    let p_lo = s.wa / e_hi;
    let p_hi = (s.wa + gap) / e_lo;
    ex_p.insert("lower".into(), p_lo);
    ex_p.insert("upper".into(), p_hi);
    let pe_lo = wa_epi / total_epi;
    ex_p.insert("variant.epi_proportion_recomputed".into(), pe_lo);
    ex_p.insert(
        "variant.epi_proportion_recomputed_upper".into(),
        (wa_epi + wa_hom_tail) / total_epi,
    );
    let proportion = report(
        "c233_proportion",
        s.wa / e.value,
        (p_hi - p_lo).max(0.0),
        ex_p,
    );

    Ok(C233Constants {
        wa_leading,
        total_leading,
        proportion,
        identity_lhs: c233_prefactor_from_sums(),
        identity_rhs: pre,
    })
}
