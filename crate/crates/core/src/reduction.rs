//! Congruence functions on `F_l^n`, the `f`-correctness test, its
//! character-sum indicator computed in exact cyclotomic arithmetic, the
//! exponent `α` with lifted residue classes, and an exhaustive verifier for the
//! two block lemmas on compatible pair sets.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use num_integer::Integer;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::arith::{dlog_mod, euler_phi, factorize, is_prime, least_primitive_root};
use crate::error::{Error, Result};
use crate::group::{adm_set, s_subspace, FiniteAbelianGroup, GroupElement, Subgroup};
use crate::splitting::{frobenius_image, frobenius_lift, CharacterNormalization};
use crate::tuple::ExtensionTuple;

/// `(f, g)` for `M`, with `f(p, ⟨a⟩) = ε_{a, p mod M} + B + ⟨a⟩` for `a ∉ B`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CongruenceFunction {
    pub modulus: u64,
    pub b: Subgroup,
    /// Twists keyed by (canonical line generator, `p mod M`); missing means 0.
    pub twists: BTreeMap<(GroupElement, u64), GroupElement>,
    /// Allowed Frobenius sets at the primes dividing `M`; missing means all of `A`.
    pub g: BTreeMap<u64, Vec<GroupElement>>,
}

/// Smallest nonzero element of `⟨a⟩`, the key of the line.
pub fn line_key(a: &FiniteAbelianGroup, x: &GroupElement) -> GroupElement {
    let ell = a.exponent() as i64;
    (1..ell)
        .map(|k| a.mul(k, x))
        .filter(|y| !a.is_zero(y))
        .min()
        .expect("nonzero")
}

fn require_elementary(a: &FiniteAbelianGroup) -> Result<u64> {
    if !a.is_elementary() || a.is_trivial() {
        return Err(Error::Unsupported(format!("{a} is not elementary abelian")));
    }
    Ok(a.exponent())
}

impl CongruenceFunction {
    /// All conditions vacuous: `B = A`, `M = 1`.
    pub fn vacuous(a: &FiniteAbelianGroup) -> Self {
        Self {
            modulus: 1,
            b: a.whole(),
            twists: BTreeMap::new(),
            g: BTreeMap::new(),
        }
    }

    pub fn validate(&self, a: &FiniteAbelianGroup) -> Result<()> {
        require_elementary(a)?;
        if self.modulus == 0 {
            return Err(Error::Precondition("M = 0".into()));
        }
        for (p, set) in &self.g {
            if !is_prime(*p) || self.modulus % p != 0 {
                return Err(Error::Precondition(format!(
                    "g is defined at {p}, not a prime factor of M"
                )));
            }
            if set.is_empty() {
                return Err(Error::Precondition(format!("g({p}) is empty")));
            }
        }
        for ((k, r), e) in &self.twists {
            a.validate(k)?;
            a.validate(e)?;
            if *r >= self.modulus {
                return Err(Error::Precondition(format!("residue {r} >= M")));
            }
        }
        Ok(())
    }

    pub fn twist(&self, a: &FiniteAbelianGroup, x: &GroupElement, p: u64) -> GroupElement {
        self.twists
            .get(&(line_key(a, x), p % self.modulus))
            .cloned()
            .unwrap_or_else(|| a.zero())
    }

    fn g_at(&self, a: &FiniteAbelianGroup, p: u64) -> Vec<GroupElement> {
        self.g
            .get(&p)
            .cloned()
            .unwrap_or_else(|| a.elements().collect())
    }

    fn m_primes(&self) -> Vec<u64> {
        factorize(self.modulus)
            .into_iter()
            .map(|(p, _)| p)
            .collect()
    }
}

/// A congruence function with its per-line tables precomputed for
/// evaluation on many tuples: membership in `B + <x>`, and both detectors
/// as exact cyclotomic values indexed by the element they are evaluated at.
pub struct PreparedCongruence<'a> {
    cf: &'a CongruenceFunction,
    ell: u64,
    keys: Vec<GroupElement>,
    /// Indexed by `x`: `None` for `x ∈ B`, else (membership in `B + <x>`, (Q1) detector at each `y`).
    lines: Vec<Option<(Vec<bool>, Vec<Option<Cyclotomic>>)>>,
    m_primes: Vec<u64>,
    g: BTreeMap<u64, Vec<GroupElement>>,
    /// (Q2) detector at each value of `Frob_p`.
    q2: BTreeMap<u64, Vec<Option<Cyclotomic>>>,
}

impl<'a> PreparedCongruence<'a> {
    pub fn new(a: &FiniteAbelianGroup, cf: &'a CongruenceFunction) -> Result<Self> {
        let ell = require_elementary(a)?;
        cf.validate(a)?;
        let all: Vec<GroupElement> = a.elements().collect();
        let keys = all
            .iter()
            .map(|x| {
                if a.is_zero(x) {
                    x.clone()
                } else {
                    line_key(a, x)
                }
            })
            .collect();
        let lines = all
            .iter()
            .map(|x| {
                if cf.b.contains(x) {
                    return None;
                }
                let bx = a.generated(&[cf.b.generators.clone(), vec![x.clone()]].concat());
                let mut mask = vec![false; all.len()];
                for e in &bx.elements {
                    mask[a.index(e)] = true;
                }
                let xs = annihilator(a, &bx);
                let det = all
                    .iter()
                    .map(|y| character_sum(a, &xs, y).div_exact(xs.len() as i128))
                    .collect();
                Some((mask, det))
            })
            .collect();
        let m_primes = cf.m_primes();
        let g: BTreeMap<u64, Vec<GroupElement>> =
            m_primes.iter().map(|&p| (p, cf.g_at(a, p))).collect();
        let q2 = g
            .iter()
            .map(|(&p, set)| {
                let det = all
                    .iter()
                    .map(|frob| {
                        let mut s = Cyclotomic::zero(ell as usize);
                        for alpha in set {
                            let c = character_sum(a, &all, &a.sub(frob, alpha));
                            s.coeffs.iter_mut().zip(c.coeffs).for_each(|(u, v)| *u += v);
                        }
                        s.div_exact(all.len() as i128)
                    })
                    .collect();
                (p, det)
            })
            .collect();
        Ok(Self {
            cf,
            ell,
            keys,
            lines,
            m_primes,
            g,
            q2,
        })
    }

    /// Primes at which the (Q2) conditions need `Frob_p`.
    pub fn q2_primes(&self) -> Vec<u64> {
        self.m_primes
            .iter()
            .copied()
            .filter(|&p| !(p == 2 && self.ell == 2))
            .collect()
    }

    fn twist(&self, a: &FiniteAbelianGroup, x: &GroupElement, p: u64) -> Option<&GroupElement> {
        self.cf
            .twists
            .get(&(self.keys[a.index(x)].clone(), p % self.cf.modulus))
    }

    fn shifted(
        &self,
        a: &FiniteAbelianGroup,
        frob: &GroupElement,
        x: &GroupElement,
        p: u64,
    ) -> usize {
        match self.twist(a, x, p) {
            Some(e) => a.index(&a.sub(frob, e)),
            None => a.index(frob),
        }
    }
}

/// The Frobenius data both tests consume: `(p, index of p, Frob lift)` for
/// odd ramified `p`, and `Frob_p` (or `None` if ramified) at requested primes.
pub struct LocalFrobenius {
    pub ramified: Vec<(u64, GroupElement, GroupElement)>,
    pub unramified: BTreeMap<u64, Option<GroupElement>>,
}

impl LocalFrobenius {
    pub fn new(
        t: &ExtensionTuple,
        q2_primes: &[u64],
        norm: &CharacterNormalization,
    ) -> Result<Self> {
        let ramified = t
            .odd_primes()
            .into_iter()
            .map(|(p, x)| {
                let f = frobenius_lift(t, p, norm);
                (p, x, f)
            })
            .collect();
        let mut unramified = BTreeMap::new();
        for &p in q2_primes {
            let v = if t.is_ramified(p) {
                None
            } else {
                Some(frobenius_image(t, p, norm)?)
            };
            unramified.insert(p, v);
        }
        Ok(Self {
            ramified,
            unramified,
        })
    }

    fn at(&self, p: u64) -> Result<&Option<GroupElement>> {
        self.unramified
            .get(&p)
            .ok_or_else(|| Error::Precondition(format!("Frobenius at {p} was not computed")))
    }
}

/// True iff `Frob` lies in `f` at every ramified `p ∤ 2M` and the (Q2) conditions hold at `p | M`.
pub fn f_correct(
    t: &ExtensionTuple,
    cf: &CongruenceFunction,
    norm: &CharacterNormalization,
) -> Result<bool> {
    let prep = PreparedCongruence::new(t.group(), cf)?;
    let loc = LocalFrobenius::new(t, &prep.q2_primes(), norm)?;
    f_correct_prepared(t.group(), &prep, &loc)
}

pub fn f_correct_prepared(
    a: &FiniteAbelianGroup,
    prep: &PreparedCongruence,
    loc: &LocalFrobenius,
) -> Result<bool> {
    let cf = prep.cf;
    for (p, x, frob) in &loc.ramified {
        if cf.modulus % p == 0 {
            continue;
        }
        let Some((mask, _)) = &prep.lines[a.index(x)] else {
            continue;
        };
        if !mask[prep.shifted(a, frob, x, *p)] {
            return Ok(false);
        }
    }
    for p in prep.q2_primes() {
        let Some(frob) = loc.at(p)? else {
            return Ok(false);
        };
        if !prep.g[&p].contains(frob) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// An element of `Z[x]/(x^l - 1)`; its image in `Z[ζ_l]` is what matters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cyclotomic {
    pub coeffs: Vec<i128>,
}

impl Cyclotomic {
    pub fn zero(ell: usize) -> Self {
        Self {
            coeffs: vec![0; ell],
        }
    }

    pub fn constant(ell: usize, c: i128) -> Self {
        let mut z = Self::zero(ell);
        z.coeffs[0] = c;
        z
    }

    /// Subtracts the minimum coefficient, i.e. a multiple of `1 + x + ... + x^{l-1}`.
    pub fn normalize(&mut self) {
        let m = *self.coeffs.iter().min().unwrap();
        self.coeffs.iter_mut().for_each(|c| *c -= m);
    }

    pub fn mul(&self, o: &Self) -> Self {
        let l = self.coeffs.len();
        let mut out = Self::zero(l);
        for (i, &x) in self.coeffs.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (j, &y) in o.coeffs.iter().enumerate() {
                out.coeffs[(i + j) % l] += x * y;
            }
        }
        out.normalize();
        out
    }

    /// `Some(c)` iff the element equals the integer `c` in `Z[ζ_l]`.
    pub fn as_integer(&self) -> Option<i128> {
        let l = self.coeffs.len();
        if l == 1 {
            return Some(self.coeffs[0]);
        }
        let rest = self.coeffs[1];
        if self.coeffs[1..].iter().all(|&c| c == rest) {
            Some(self.coeffs[0] - rest)
        } else {
            None
        }
    }

    /// Exact division by an integer, after normalization.
    pub fn div_exact(&self, d: i128) -> Option<Self> {
        let mut s = self.clone();
        s.normalize();
        if s.coeffs.iter().all(|c| c % d == 0) {
            Some(Self {
                coeffs: s.coeffs.iter().map(|c| c / d).collect(),
            })
        } else {
            None
        }
    }
}

/// `Σ_{x ∈ V} ζ^{⟨x, y⟩}` over a list of vectors `V`.
fn character_sum(a: &FiniteAbelianGroup, xs: &[GroupElement], y: &GroupElement) -> Cyclotomic {
    let ell = a.exponent() as usize;
    let mut s = Cyclotomic::zero(ell);
    for x in xs {
        s.coeffs[a.pairing(x, y) as usize] += 1;
    }
    s
}

/// `{x : ⟨γ, x⟩ = 0 for all γ ∈ H}`.
pub fn annihilator(a: &FiniteAbelianGroup, h: &Subgroup) -> Vec<GroupElement> {
    a.elements()
        .filter(|x| h.generators.iter().all(|g| a.pairing(x, g) == 0))
        .collect()
}

/// The product of the orthogonality detectors for (Q1) and (Q2), evaluated
/// exactly; errors if a detector is not 0 or 1.
pub fn indicator_via_characters(
    t: &ExtensionTuple,
    cf: &CongruenceFunction,
    norm: &CharacterNormalization,
) -> Result<bool> {
    let prep = PreparedCongruence::new(t.group(), cf)?;
    let loc = LocalFrobenius::new(t, &prep.q2_primes(), norm)?;
    indicator_prepared(t.group(), &prep, &loc)
}

pub fn indicator_prepared(
    a: &FiniteAbelianGroup,
    prep: &PreparedCongruence,
    loc: &LocalFrobenius,
) -> Result<bool> {
    let cf = prep.cf;
    let mut acc = Cyclotomic::constant(prep.ell as usize, 1);
    let mut push = |c: &Option<Cyclotomic>, what: &str| -> Result<()> {
        let v = c
            .as_ref()
            .ok_or_else(|| Error::Inconsistent(format!("{what} detector is not integral")))?;
        acc = acc.mul(v);
        Ok(())
    };
    for (p, x, frob) in &loc.ramified {
        if cf.modulus % p == 0 {
            continue;
        }
        let Some((_, det)) = &prep.lines[a.index(x)] else {
            continue;
        };
        push(&det[prep.shifted(a, frob, x, *p)], "(Q1)")?;
    }
    for p in prep.q2_primes() {
        // v_a ≢ 0 mod p fails when p is ramified
        let Some(frob) = loc.at(p)? else {
            return Ok(false);
        };
        push(&prep.q2[&p][a.index(frob)], "(Q2)")?;
    }
    match acc.as_integer() {
        Some(1) => Ok(true),
        Some(0) => Ok(false),
        _ => Err(Error::Inconsistent(format!(
            "indicator value {:?} is not 0 or 1",
            acc.coeffs
        ))),
    }
}

/// `Lift(H)`: units mod `lcm(M, l)` that are `1 mod l` and lie in `H` mod `M`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LiftSet {
    pub modulus: u64,
    pub ell: u64,
    pub h: BTreeSet<u64>,
    pub members: Vec<u64>,
}

impl LiftSet {
    pub fn new(modulus: u64, ell: u64, h: &[u64]) -> Self {
        let lc = modulus.lcm(&ell);
        let h: BTreeSet<u64> = h.iter().map(|x| x % modulus).collect();
        let members = (0..lc)
            .filter(|&x| x.gcd(&lc) == 1 && x % ell == 1 % ell && h.contains(&(x % modulus)))
            .collect();
        Self {
            modulus,
            ell,
            h,
            members,
        }
    }

    /// `|Lift(H)| / φ(lcm(M, l))`.
    pub fn density(&self) -> Ratio<i128> {
        Ratio::new(
            self.members.len() as i128,
            euler_phi(self.modulus.lcm(&self.ell)) as i128,
        )
    }
}

/// Units mod `M`.
pub fn units(modulus: u64) -> Vec<u64> {
    (0..modulus).filter(|&x| x.gcd(&modulus) == 1).collect()
}

/// `α = Σ_{a ∈ B-0} |Lift(H_a)|/φ + Σ_{a ∉ B} |B|/l^{n-1} |Lift(H_a)|/φ`; missing `H_a` means all units.
pub fn alpha_general(
    a: &FiniteAbelianGroup,
    b: &Subgroup,
    modulus: u64,
    h: &BTreeMap<GroupElement, Vec<u64>>,
) -> Result<Ratio<i128>> {
    let ell = require_elementary(a)?;
    let n = a.rank() as u32;
    let full = units(modulus);
    let mut out = Ratio::from_integer(0);
    let mut size_outside: Option<usize> = None;
    for x in a.nonzero_elements() {
        let hx = h.get(&x).unwrap_or(&full);
        let d = LiftSet::new(modulus, ell, hx).density();
        if b.contains(&x) {
            out += d;
        } else {
            let sz = hx
                .iter()
                .map(|r| r % modulus)
                .collect::<BTreeSet<_>>()
                .len();
            if *size_outside.get_or_insert(sz) != sz {
                return Err(Error::Precondition("|H_a| differs across a ∉ B".into()));
            }
            out += d * Ratio::new(b.order() as i128, (ell as i128).pow(n - 1));
        }
    }
    Ok(out)
}

/// A realization of `A -> A/A[l]` by Frobenius classes mod `M`: one prime
/// `q_i = 1 mod m_i` per factor of the quotient, with `(Z/M)^x -> ∏ Z/m_i`
/// through discrete logarithms.
pub struct QuotientModel {
    pub modulus: u64,
    pub primes: Vec<u64>,
    pub factors: Vec<u64>,
}

impl QuotientModel {
    pub fn new(a: &FiniteAbelianGroup, ell: u64) -> Self {
        let mut primes = Vec::new();
        let mut factors = Vec::new();
        let mut next = 2u64;
        for &d in a.factors() {
            let m = if d as u64 % ell == 0 {
                d as u64 / ell
            } else {
                d as u64
            };
            factors.push(m);
            if m == 1 {
                primes.push(1);
                continue;
            }
            let mut q = next.max(3);
            while !(is_prime(q) && q % m == 1 && q != ell) {
                q += 1;
            }
            primes.push(q);
            next = q + 1;
        }
        let modulus = primes.iter().product();
        Self {
            modulus,
            primes,
            factors,
        }
    }

    /// Image of a unit mod `M` in `∏ Z/m_i`.
    pub fn image(&self, x: u64) -> Vec<u64> {
        self.primes
            .iter()
            .zip(&self.factors)
            .map(|(&q, &m)| {
                if m == 1 {
                    0
                } else {
                    dlog_mod(least_primitive_root(q), x % q, q, q - 1, m)
                }
            })
            .collect()
    }
}

/// Image of `x` in `A/A[l]`, in the coordinates of [`QuotientModel`].
pub fn quotient_image(a: &FiniteAbelianGroup, ell: u64, x: &GroupElement) -> Vec<u64> {
    a.factors()
        .iter()
        .zip(&x.0)
        .map(|(&d, &c)| {
            let m = if d as u64 % ell == 0 {
                d as u64 / ell
            } else {
                d as u64
            };
            c as u64 % m
        })
        .collect()
}

/// `α(A)` through the reduction: `A[l] ≅ F_l^n`, `B = A[l] ∩ lA`, and `H_a`
/// the residues mod `M` whose Frobenius in `A/A[l]` is the image of `Adm(a)`.
pub fn alpha_via_reduction(a: &FiniteAbelianGroup) -> Result<Ratio<i128>> {
    let ell = a
        .ell()
        .ok_or_else(|| Error::Precondition("trivial group".into()))? as u64;
    let s = s_subspace(a);
    let model = QuotientModel::new(a, ell);
    // A[l] in F_l^n coordinates
    let tors_factors: Vec<usize> = (0..a.rank())
        .filter(|&i| a.factors()[i] as u64 % ell == 0)
        .collect();
    let n = tors_factors.len();
    let fl = FiniteAbelianGroup::elementary(ell as u32, n)?;
    let to_fl = |x: &GroupElement| -> GroupElement {
        GroupElement(
            tors_factors
                .iter()
                .map(|&i| x.0[i] / (a.factors()[i] / ell as u32))
                .collect(),
        )
    };
    let tors = a.torsion(ell as i64);
    let b_gens: Vec<GroupElement> = s.elements.iter().map(&to_fl).collect();
    let b = fl.generated(&b_gens);
    let us = units(model.modulus);
    let mut h = BTreeMap::new();
    for x in tors.elements.iter().filter(|x| !a.is_zero(x)) {
        let adm = adm_set(a, x)?;
        let allowed: BTreeSet<Vec<u64>> = adm
            .elements
            .iter()
            .map(|y| quotient_image(a, ell, y))
            .collect();
        let hx: Vec<u64> = us
            .iter()
            .copied()
            .filter(|&u| allowed.contains(&model.image(u)))
            .collect();
        h.insert(to_fl(x), hx);
    }
    alpha_general(&fl, &b, model.modulus, &h)
}

/// A seeded battery of congruence functions over `F_l^n`: vacuous, zero coset,
/// twisted cosets over a line `B`, residue-dependent twists with `g` at `p | M`.
pub fn congruence_battery(
    a: &FiniteAbelianGroup,
    seed: u64,
) -> Result<Vec<(String, CongruenceFunction)>> {
    let ell = require_elementary(a)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let elems: Vec<GroupElement> = a.elements().collect();
    let lines: BTreeSet<GroupElement> = a.nonzero_elements().map(|x| line_key(a, &x)).collect();
    let rand_el = |rng: &mut ChaCha8Rng| elems[rng.gen_range(0..elems.len())].clone();
    let mut out = vec![
        ("vacuous".to_string(), CongruenceFunction::vacuous(a)),
        (
            "zero-coset".to_string(),
            CongruenceFunction {
                modulus: 1,
                b: a.trivial_subgroup(),
                twists: BTreeMap::new(),
                g: BTreeMap::new(),
            },
        ),
    ];
    let e1 = a.element_at(a.order() as usize / ell as usize);
    let line_b = a.generated(&[e1]);
    let mut tw = BTreeMap::new();
    for k in &lines {
        tw.insert((k.clone(), 0), rand_el(&mut rng));
    }
    out.push((
        "twisted-line-B".to_string(),
        CongruenceFunction {
            modulus: 1,
            b: line_b,
            twists: tw,
            g: BTreeMap::new(),
        },
    ));
    for (name, m) in [
        ("twisted-mod-5", 5u64),
        ("twisted-mod-12", 12),
        ("twisted-mod-7", 7),
    ] {
        let mut tw = BTreeMap::new();
        for k in &lines {
            for r in units(m) {
                tw.insert((k.clone(), r), rand_el(&mut rng));
            }
        }
        let mut g = BTreeMap::new();
        for p in factorize(m).into_iter().map(|(p, _)| p) {
            let mut set: BTreeSet<GroupElement> = BTreeSet::new();
            set.insert(a.zero());
            for _ in 0..(elems.len() / 2) {
                set.insert(rand_el(&mut rng));
            }
            g.insert(p, set.into_iter().collect());
        }
        out.push((
            name.to_string(),
            CongruenceFunction {
                modulus: m,
                b: a.trivial_subgroup(),
                twists: tw,
                g,
            },
        ));
    }
    let mut g = BTreeMap::new();
    g.insert(3, vec![a.zero()]);
    out.push((
        "g-zero-at-3".to_string(),
        CongruenceFunction {
            modulus: 3,
            b: a.trivial_subgroup(),
            twists: BTreeMap::new(),
            g,
        },
    ));
    Ok(out)
}

/// The pair set `{(a, b) : a ∉ B, b ⊥ B + ⟨a⟩}` with its compatibility relation.
#[derive(Clone, Debug)]
pub struct PairIndexSet {
    pub ell: u64,
    pub pairs: Vec<(GroupElement, GroupElement)>,
}

impl PairIndexSet {
    pub fn new(a: &FiniteAbelianGroup, b: &Subgroup) -> Result<Self> {
        let ell = require_elementary(a)?;
        let mut pairs = Vec::new();
        for x in a.nonzero_elements().filter(|x| !b.contains(x)) {
            let bx = a.generated(&[b.generators.clone(), vec![x.clone()]].concat());
            for y in annihilator(a, &bx) {
                pairs.push((x.clone(), y));
            }
        }
        Ok(Self { ell, pairs })
    }

    pub fn compatible(&self, a: &FiniteAbelianGroup, i: usize, j: usize) -> bool {
        let (a1, b1) = &self.pairs[i];
        let (a2, b2) = &self.pairs[j];
        if self.ell == 2 {
            (a.pairing(a1, b2) + a.pairing(a2, b1)) % 2 == 0
        } else {
            a.pairing(a2, b1) == 0 && a.pairing(a1, b2) == 0
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LemmaReport {
    pub lemma: String,
    pub ell: u64,
    pub n: usize,
    pub b: Vec<String>,
    pub sets_checked: u64,
    pub counterexamples: Vec<Vec<String>>,
    pub elapsed: f64,
}

/// Default enumerable bound on `l^n`.
pub const LEMMA_BOUND: u64 = 27;

type Bits = Vec<u64>;

fn bit_set(b: &mut Bits, i: usize) {
    b[i / 64] |= 1 << (i % 64);
}

fn bit_has(b: &Bits, i: usize) -> bool {
    b[i / 64] >> (i % 64) & 1 == 1
}

fn bit_and(x: &Bits, y: &Bits) -> Bits {
    x.iter().zip(y).map(|(a, b)| a & b).collect()
}

fn bit_count(b: &Bits) -> usize {
    b.iter().map(|w| w.count_ones() as usize).sum()
}

fn bit_iter(b: &Bits) -> impl Iterator<Item = usize> + '_ {
    b.iter().enumerate().flat_map(|(k, &w)| {
        (0..64)
            .filter(move |i| w >> i & 1 == 1)
            .map(move |i| k * 64 + i)
    })
}

struct CliqueSearch<'a> {
    adj: &'a [Bits],
    thr: usize,
}

impl CliqueSearch<'_> {
    /// Bron-Kerbosch with pivoting, pruning branches that cannot reach `thr`.
    fn run(&self, r: &mut Vec<usize>, p: Bits, x: Bits, visit: &mut dyn FnMut(&[usize])) {
        let np = bit_count(&p);
        if r.len() + np < self.thr {
            return;
        }
        if np == 0 {
            if bit_count(&x) == 0 {
                visit(r);
            }
            return;
        }
        let pivot = bit_iter(&p)
            .chain(bit_iter(&x))
            .max_by_key(|&u| bit_count(&bit_and(&p, &self.adj[u])))
            .unwrap();
        let mut p = p;
        let mut x = x;
        let cand: Vec<usize> = bit_iter(&p)
            .filter(|&v| !bit_has(&self.adj[pivot], v))
            .collect();
        for v in cand {
            r.push(v);
            self.run(
                r,
                bit_and(&p, &self.adj[v]),
                bit_and(&x, &self.adj[v]),
                visit,
            );
            r.pop();
            p[v / 64] &= !(1 << (v % 64));
            bit_set(&mut x, v);
        }
    }
}

/// Whether a compatible set of size `>= l^n - |B|` has the lemma's shape.
fn has_lemma_shape(
    a: &FiniteAbelianGroup,
    b: &Subgroup,
    set: &[(GroupElement, GroupElement)],
) -> bool {
    let outside: BTreeSet<GroupElement> = a.nonzero_elements().filter(|x| !b.contains(x)).collect();
    if a.exponent() > 2 {
        let want: BTreeSet<(GroupElement, GroupElement)> =
            outside.iter().map(|x| (x.clone(), a.zero())).collect();
        let got: BTreeSet<(GroupElement, GroupElement)> = set.iter().cloned().collect();
        return want == got;
    }
    if set.len() != outside.len() {
        return false;
    }
    let f: BTreeMap<GroupElement, GroupElement> = set.iter().cloned().collect();
    if f.len() != set.len() || f.keys().cloned().collect::<BTreeSet<_>>() != outside {
        return false;
    }
    f.iter().all(|(s, fs)| {
        a.pairing(s, fs) == 0 && f.iter().all(|(t, ft)| a.pairing(s, ft) == a.pairing(t, fs))
    })
}

/// Checks the block lemma for `(l, n, B)`: every compatible subset of the pair
/// set of size `>= l^n - |B|` has the asserted shape. Maximal cliques of the
/// compatibility graph suffice, since a qualifying subset lies in a qualifying
/// maximal clique, which then has exactly `l^n - |B|` elements.
pub fn verify_block_lemma(ell: u64, n: usize, b: &Subgroup) -> Result<LemmaReport> {
    if !is_prime(ell) || n == 0 || ell.pow(n as u32) > LEMMA_BOUND {
        return Err(Error::Unsupported(format!(
            "l^n = {ell}^{n} exceeds the enumerable bound {LEMMA_BOUND}"
        )));
    }
    let start = Instant::now();
    let a = FiniteAbelianGroup::elementary(ell as u32, n)?;
    for g in &b.generators {
        a.validate(g)?;
    }
    let set = PairIndexSet::new(&a, b)?;
    let thr = a.order() as usize - b.order();
    let m = set.pairs.len();
    let words = m.div_ceil(64).max(1);
    let mut adj = vec![vec![0u64; words]; m];
    for i in 0..m {
        for j in 0..m {
            if i != j && set.compatible(&a, i, j) {
                bit_set(&mut adj[i], j);
            }
        }
    }
    let check = |members: &[usize]| -> Option<Vec<String>> {
        let xs: Vec<(GroupElement, GroupElement)> =
            members.iter().map(|&i| set.pairs[i].clone()).collect();
        if has_lemma_shape(&a, b, &xs) {
            None
        } else {
            Some(xs.iter().map(|(x, y)| format!("({x},{y})")).collect())
        }
    };
    let (sets_checked, counterexamples) = if m <= 20 {
        let mut checked = 0u64;
        let mut bad = Vec::new();
        for mask in 0u32..(1u32 << m) {
            if (mask.count_ones() as usize) < thr {
                continue;
            }
            let members: Vec<usize> = (0..m).filter(|&i| mask >> i & 1 == 1).collect();
            if members
                .iter()
                .all(|&i| members.iter().all(|&j| i == j || bit_has(&adj[i], j)))
            {
                checked += 1;
                if let Some(c) = check(&members) {
                    bad.push(c);
                }
            }
        }
        (checked, bad)
    } else {
        let search = CliqueSearch { adj: &adj, thr };
        let results: Vec<(u64, Vec<Vec<String>>)> = (0..m)
            .into_par_iter()
            .map(|v| {
                // vertex v with later neighbours as candidates, earlier ones excluded
                let mut p = vec![0u64; words];
                let mut x = vec![0u64; words];
                for u in bit_iter(&adj[v]) {
                    if u > v {
                        bit_set(&mut p, u);
                    } else {
                        bit_set(&mut x, u);
                    }
                }
                let mut checked = 0u64;
                let mut bad = Vec::new();
                search.run(&mut vec![v], p, x, &mut |r| {
                    checked += 1;
                    if let Some(c) = check(r) {
                        bad.push(c);
                    }
                });
                (checked, bad)
            })
            .collect();
        let checked = results.iter().map(|r| r.0).sum();
        let bad = results.into_iter().flat_map(|r| r.1).collect();
        (checked, bad)
    };
    Ok(LemmaReport {
        lemma: if ell == 2 {
            "block-alternating".into()
        } else {
            "block-zero".into()
        },
        ell,
        n,
        b: b.elements.iter().map(|e| e.to_string()).collect(),
        sets_checked,
        counterexamples,
        elapsed: start.elapsed().as_secs_f64(),
    })
}

/// All subspaces of `F_l^n`.
pub fn all_subspaces(a: &FiniteAbelianGroup) -> Vec<Subgroup> {
    let mut seen: BTreeMap<Vec<GroupElement>, Subgroup> = BTreeMap::new();
    let mut frontier = vec![a.trivial_subgroup()];
    seen.insert(frontier[0].elements.clone(), frontier[0].clone());
    while let Some(h) = frontier.pop() {
        for x in a.elements() {
            if h.contains(&x) {
                continue;
            }
            let k = a.generated(&[h.generators.clone(), vec![x]].concat());
            if !seen.contains_key(&k.elements) {
                seen.insert(k.elements.clone(), k.clone());
                frontier.push(k);
            }
        }
    }
    seen.into_values().collect()
}

/// The `(l, n)` with `l^n <= bound`.
pub fn lemma_cases(bound: u64) -> Vec<(u64, usize)> {
    let mut out = Vec::new();
    for ell in crate::arith::primes_up_to(bound) {
        let mut n = 1;
        while ell.pow(n as u32) <= bound {
            out.push((ell, n));
            n += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn grp(s: &str) -> Arc<FiniteAbelianGroup> {
        Arc::new(FiniteAbelianGroup::parse(s).unwrap())
    }

    #[test]
    fn f_correct_examples() {
        let n = CharacterNormalization;
        let a = grp("3.3");
        let t = ExtensionTuple::parse(a.clone(), "1.0:7;0.1:13").unwrap();
        assert!(f_correct(&t, &CongruenceFunction::vacuous(&a), &n).unwrap());
        let zero = CongruenceFunction {
            modulus: 1,
            b: a.trivial_subgroup(),
            twists: BTreeMap::new(),
            g: BTreeMap::new(),
        };
        assert!(!f_correct(&t, &zero, &n).unwrap());
        assert!(!indicator_via_characters(&t, &zero, &n).unwrap());
        let mut g = BTreeMap::new();
        g.insert(7, vec![a.zero()]);
        let ram = CongruenceFunction {
            modulus: 7,
            b: a.whole(),
            twists: BTreeMap::new(),
            g,
        };
        assert!(!f_correct(&t, &ram, &n).unwrap());
        assert!(!indicator_via_characters(&t, &ram, &n).unwrap());
        assert!(indicator_via_characters(&t, &CongruenceFunction::vacuous(&a), &n).unwrap());
    }

    #[test]
    fn alpha_general_examples() {
        for (ell, n) in [(2u32, 2usize), (3, 2), (5, 1), (3, 3)] {
            let a = FiniteAbelianGroup::elementary(ell, n).unwrap();
            let l = ell as i128;
            let ln = l.pow(n as u32);
            let v = alpha_general(&a, &a.trivial_subgroup(), 1, &BTreeMap::new()).unwrap();
            assert_eq!(v, Ratio::new(ln - 1, l.pow(n as u32 - 1) * (l - 1)));
            let w = alpha_general(&a, &a.whole(), 1, &BTreeMap::new()).unwrap();
            assert_eq!(w, Ratio::new(ln - 1, l - 1));
            let u = alpha_general(&a, &a.trivial_subgroup(), 35, &BTreeMap::new()).unwrap();
            if ell != 5 {
                assert_eq!(u, v);
            }
        }
    }

    #[test]
    fn lift_set_sizes() {
        for (m, ell) in [(7u64, 3u64), (8, 3), (5, 2), (9, 3), (12, 5)] {
            let h: Vec<u64> = units(m).into_iter().step_by(2).collect();
            let lift = LiftSet::new(m, ell, &h);
            if m.gcd(&ell) == 1 {
                assert_eq!(lift.members.len(), h.len());
            }
            let lc = m.lcm(&ell);
            assert!(lift
                .members
                .iter()
                .all(|&x| x % ell == 1 % ell && x.gcd(&lc) == 1));
        }
    }

    #[test]
    fn unequal_sizes_rejected() {
        let a = FiniteAbelianGroup::elementary(3, 1).unwrap();
        let mut h = BTreeMap::new();
        h.insert(a.element(&[1]).unwrap(), vec![1]);
        assert!(alpha_general(&a, &a.trivial_subgroup(), 7, &h).is_err());
    }

    #[test]
    fn reduction_alpha_small_groups() {
        for d in ["4", "9", "2.4", "3.9", "4.4", "2.2.4", "8", "2.3.3"] {
            let a = FiniteAbelianGroup::parse(d).unwrap();
            assert_eq!(
                alpha_via_reduction(&a).unwrap(),
                crate::group::alpha(&a).unwrap(),
                "{d}"
            );
        }
    }

    #[test]
    fn block_lemma_spec_cases() {
        let a = FiniteAbelianGroup::elementary(3, 2).unwrap();
        let r = verify_block_lemma(3, 2, &a.trivial_subgroup()).unwrap();
        assert!(r.counterexamples.is_empty() && r.sets_checked >= 1);
        let a = FiniteAbelianGroup::elementary(2, 2).unwrap();
        let r = verify_block_lemma(2, 2, &a.trivial_subgroup()).unwrap();
        assert!(r.counterexamples.is_empty() && r.sets_checked >= 1);
        let a = FiniteAbelianGroup::elementary(2, 3).unwrap();
        let line = a.generated(&[a.element(&[1, 0, 0]).unwrap()]);
        let r = verify_block_lemma(2, 3, &line).unwrap();
        assert!(r.counterexamples.is_empty());
        assert!(verify_block_lemma(2, 5, &a.trivial_subgroup()).is_err());
    }

    #[test]
    fn cyclotomic_integers() {
        let mut z = Cyclotomic {
            coeffs: vec![3, 1, 1],
        };
        assert_eq!(z.as_integer(), Some(2));
        z.normalize();
        assert_eq!(z.coeffs, vec![2, 0, 0]);
        assert_eq!(
            Cyclotomic {
                coeffs: vec![1, 2, 1]
            }
            .as_integer(),
            None
        );
    }

    #[test]
    fn subspace_counts() {
        // Gaussian binomial sums: 5 subspaces of F_2^2, 16 of F_2^3, 28 of F_3^3
        assert_eq!(
            all_subspaces(&FiniteAbelianGroup::elementary(2, 2).unwrap()).len(),
            5
        );
        assert_eq!(
            all_subspaces(&FiniteAbelianGroup::elementary(2, 3).unwrap()).len(),
            16
        );
        assert_eq!(
            all_subspaces(&FiniteAbelianGroup::elementary(3, 3).unwrap()).len(),
            28
        );
    }
}
