//! Frobenius elements, decomposition groups and the per-field verdicts
//! `|Ш(T)|`, `|A(T)|`, weak approximation and the Hasse norm principle.
//!
//! `Gal(Q^ab/Q)` is identified with `∏_q Z_q^x`. Each odd `q` is normalized by
//! the least primitive root modulo `q^2`, and `Z_2^x` by `x = ±5^k`. `Frob_p`
//! is the element with `x_q = p` for `q != p` and `x_p = 1`.

use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

use num_bigint::BigUint;
use rayon::prelude::*;
use serde::Serialize;

use crate::arith::{dlog_mod, least_primitive_root_sq, primes_up_to, two_adic_log, valuation};
use crate::error::{Error, Result};
use crate::group::{
    vanishing_form_count, wedge_dual_order, FiniteAbelianGroup, GroupElement, Subgroup,
};
use crate::tuple::{
    discriminant_unchecked, is_surjective, EnumOptions, ExtensionTuple, TupleEnumerator,
};

/// Pinned in every output artifact.
pub const NORMALIZATION_VERSION: &str = "lprq2-pm5-v1";

/// Generators are tabulated below this bound.
const GENERATOR_TABLE: u64 = 1 << 20;
static GENERATORS: OnceLock<Vec<u32>> = OnceLock::new();

/// The fixed choice of topological generators.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CharacterNormalization;

impl CharacterNormalization {
    pub fn version(&self) -> &'static str {
        NORMALIZATION_VERSION
    }

    /// Generator of `Z_q^x` for odd `q`.
    pub fn generator(&self, q: u64) -> u64 {
        let table = GENERATORS.get_or_init(|| {
            let mut t = vec![0u32; GENERATOR_TABLE as usize];
            for q in primes_up_to(GENERATOR_TABLE - 1)
                .into_iter()
                .filter(|&q| q > 2)
            {
                t[q as usize] = least_primitive_root_sq(q) as u32;
            }
            t
        });
        match table.get(q as usize) {
            Some(&g) if g != 0 => g as u64,
            _ => least_primitive_root_sq(q),
        }
    }

    /// Value in `Z/m` at `x` of the `q`-adic character (`q` odd, `m | (q-1) q^k`).
    pub fn odd_character(&self, q: u64, m: u64, x: u64) -> u64 {
        let k = valuation(m, q);
        let modulus = q.pow(k + 1);
        let n = (q - 1) * q.pow(k);
        dlog_mod(self.generator(q), x % modulus, modulus, n, m)
    }

    /// `k mod 2^j` with `x = ±5^k` in `Z_2^x`, and whether `x = 3 mod 4`.
    pub fn two_adic(&self, x: u64, j: u32) -> (u64, bool) {
        two_adic_log(x, j)
    }
}

/// Value of the tuple's homomorphism on the element with `x_q = x` for every
/// finite `q` in `skip`'s complement; components at `skip` are taken as 1.
fn evaluate_at(
    t: &ExtensionTuple,
    x: u64,
    skip: Option<u64>,
    norm: &CharacterNormalization,
) -> GroupElement {
    let a = t.group();
    let mut acc = a.zero();
    for (g, e) in t.entries() {
        let m = a.element_order(g);
        let mut k = 0u64;
        for &q in &e.primes {
            if Some(q) == skip {
                continue;
            }
            k += if q == 2 {
                norm.two_adic(x, valuation(m, 2)).0
            } else {
                norm.odd_character(q, m, x)
            };
        }
        if e.negative && skip != Some(2) && x % 4 == 3 {
            k += 1;
        }
        if k % m != 0 {
            acc = a.add(&acc, &a.mul((k % m) as i64, g));
        }
    }
    acc
}

/// `φ(Frob_p)` for a prime `p` unramified in `t`.
pub fn frobenius_image(
    t: &ExtensionTuple,
    p: u64,
    norm: &CharacterNormalization,
) -> Result<GroupElement> {
    if t.is_ramified(p) {
        return Err(Error::Precondition(format!(
            "{p} is ramified; use frobenius_lift for the Frobenius modulo inertia"
        )));
    }
    Ok(evaluate_at(t, p, None, norm))
}

/// A Frobenius lift at `p`: the image of `p` in every component except the one at `p`.
pub fn frobenius_lift(t: &ExtensionTuple, p: u64, norm: &CharacterNormalization) -> GroupElement {
    evaluate_at(t, p, Some(p), norm)
}

/// `φ(c)` for complex conjugation `c`, i.e. `x = -1` in every component.
pub fn complex_conjugation(t: &ExtensionTuple) -> GroupElement {
    let a = t.group();
    let mut acc = a.zero();
    for (g, e) in t.entries() {
        let m = a.element_order(g);
        for &q in e.primes.iter().filter(|&&q| q != 2) {
            // dlog(-1) = N/2 with N = (q-1) q^k
            let k = valuation(m, q);
            let half = (q - 1) / 2 * q.pow(k);
            acc = a.add(&acc, &a.mul((half % m) as i64, g));
        }
        if e.negative {
            acc = a.add(&acc, g);
        }
    }
    acc
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Place {
    Finite(u64),
    Infinite,
}

/// The local picture at one ramified place.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalData {
    pub place: Place,
    /// Generators of the inertia image; two elements only at 2.
    pub inertia: Vec<GroupElement>,
    /// Frobenius lift, absent at infinity.
    pub frobenius: Option<GroupElement>,
}

impl LocalData {
    pub fn generators(&self) -> Vec<GroupElement> {
        let mut g = self.inertia.clone();
        g.extend(self.frobenius.iter().cloned());
        g
    }

    pub fn decomposition_group(&self, a: &FiniteAbelianGroup) -> Subgroup {
        a.generated(&self.generators())
    }
}

/// Local data at a ramified place of `t`.
pub fn local_data(
    t: &ExtensionTuple,
    place: Place,
    norm: &CharacterNormalization,
) -> Result<LocalData> {
    match place {
        Place::Infinite => {
            let c = complex_conjugation(t);
            if t.group().is_zero(&c) {
                return Err(Error::Precondition("∞ is unramified".into()));
            }
            Ok(LocalData {
                place,
                inertia: vec![c],
                frobenius: None,
            })
        }
        Place::Finite(p) => {
            if !t.is_ramified(p) {
                return Err(Error::Precondition(format!("{p} is unramified")));
            }
            let mut inertia = Vec::new();
            if p == 2 {
                inertia.extend(t.sign_index().cloned());
                inertia.extend(t.two_index().cloned());
            } else {
                inertia.push(t.ramification().finite[&p].clone());
            }
            Ok(LocalData {
                place,
                inertia,
                frobenius: Some(frobenius_lift(t, p, norm)),
            })
        }
    }
}

/// `D_p = ⟨inertia, Frobenius lift⟩` at a ramified place.
pub fn decomposition_group(
    t: &ExtensionTuple,
    place: Place,
    norm: &CharacterNormalization,
) -> Result<Subgroup> {
    Ok(local_data(t, place, norm)?.decomposition_group(t.group()))
}

/// All ramified places of `t` with their local data.
pub fn all_local_data(t: &ExtensionTuple, norm: &CharacterNormalization) -> Vec<LocalData> {
    let mut out: Vec<LocalData> = t
        .ramified_primes()
        .into_iter()
        .map(|p| local_data(t, Place::Finite(p), norm).expect("ramified"))
        .collect();
    if let Ok(d) = local_data(t, Place::Infinite, norm) {
        out.push(d);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub sha_order: u128,
    pub at_order: u128,
    pub wa: bool,
    pub hnp: bool,
}

/// Verdict for a surjective tuple.
pub fn verdict(t: &ExtensionTuple, norm: &CharacterNormalization) -> Result<Verdict> {
    if !is_surjective(t) {
        return Err(Error::Precondition(
            "verdict needs a surjective tuple".into(),
        ));
    }
    Ok(hom_verdict(t, norm))
}

/// The same computation for any tuple: forms on `A` vanishing on every `D_p`.
pub fn hom_verdict(t: &ExtensionTuple, norm: &CharacterNormalization) -> Verdict {
    let a = t.group();
    let gens: Vec<Vec<GroupElement>> = all_local_data(t, norm)
        .iter()
        .map(|d| d.generators())
        .filter(|g| g.len() >= 2)
        .collect();
    let sha = vanishing_form_count(a, &gens);
    let total = wedge_dual_order(a);
    let at = total / sha;
    Verdict {
        sha_order: sha,
        at_order: at,
        wa: at == 1,
        hnp: sha == 1,
    }
}

/// Whether the inertia image at 2 needs two generators.
pub fn noncyclic_inertia_at_2(t: &ExtensionTuple) -> bool {
    match (t.sign_index(), t.two_index()) {
        (Some(s), Some(w)) => !t
            .group()
            .generated(&[s.clone(), w.clone()])
            .is_cyclic_in(t.group()),
        _ => false,
    }
}

trait CyclicCheck {
    fn is_cyclic_in(&self, a: &FiniteAbelianGroup) -> bool;
}

impl CyclicCheck for Subgroup {
    fn is_cyclic_in(&self, a: &FiniteAbelianGroup) -> bool {
        let n = self.order() as u64;
        self.elements.iter().any(|e| a.element_order(e) == n)
    }
}

/// One classified field (epimorphism) record.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldRecord {
    pub disc: BigUint,
    pub tuple: String,
    pub verdict: Verdict,
    pub noncyclic_inertia_2: bool,
}

impl FieldRecord {
    pub fn of(t: &ExtensionTuple, norm: &CharacterNormalization) -> Result<Self> {
        Ok(Self {
            disc: discriminant_unchecked(t).total,
            tuple: t.serialize(),
            verdict: verdict(t, norm)?,
            noncyclic_inertia_2: noncyclic_inertia_at_2(t),
        })
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.disc,
            self.tuple,
            self.verdict.sha_order,
            self.verdict.at_order,
            self.verdict.wa,
            self.verdict.hnp
        )
    }
}

pub const CSV_HEADER: &str = "disc,tuple,sha_order,at_order,wa,hnp";

/// Counts in one discriminant decade `[10^k, 10^{k+1})`, in fields.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct DecadeTally {
    pub fields: u128,
    pub wa_fields: u128,
    pub hnp_fail_fields: u128,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Tally {
    pub epimorphisms: u128,
    pub fields: u128,
    pub wa_fields: u128,
    pub hnp_fail_fields: u128,
    pub noncyclic_inertia_2_fields: u128,
    pub histogram: BTreeMap<u32, DecadeTally>,
}

/// Decimal exponent `floor(log10 d)` for `d >= 1`.
pub fn decade(d: &BigUint) -> u32 {
    d.to_string().len() as u32 - 1
}

/// Classifies every surjective tuple with discriminant `<= X`, records sorted
/// by `(disc, tuple)`.
pub fn classify_records(
    group: Arc<FiniteAbelianGroup>,
    bound: &BigUint,
    norm: &CharacterNormalization,
) -> Vec<FieldRecord> {
    let en = TupleEnumerator::new(group, bound, EnumOptions::surjective());
    let mut recs: Vec<FieldRecord> = en
        .branches()
        .into_par_iter()
        .flat_map_iter(|b| {
            let mut out = Vec::new();
            en.for_each_in_branch(b, &mut |t| {
                out.push(FieldRecord::of(t, norm).expect("surjective"))
            });
            out
        })
        .collect();
    sort_records(&mut recs);
    recs
}

pub fn sort_records(recs: &mut [FieldRecord]) {
    recs.sort_by(|x, y| x.disc.cmp(&y.disc).then_with(|| x.tuple.cmp(&y.tuple)));
}

/// Folds records into field counts; errors if a count is not divisible by `|Aut(A)|`.
pub fn tally_records(a: &FiniteAbelianGroup, recs: &[FieldRecord]) -> Result<Tally> {
    let mut raw = Tally::default();
    for r in recs {
        raw.epimorphisms += 1;
        raw.fields += 1;
        let h = raw.histogram.entry(decade(&r.disc)).or_default();
        h.fields += 1;
        if r.verdict.wa {
            raw.wa_fields += 1;
            h.wa_fields += 1;
        }
        if !r.verdict.hnp {
            raw.hnp_fail_fields += 1;
            h.hnp_fail_fields += 1;
        }
        if r.noncyclic_inertia_2 {
            raw.noncyclic_inertia_2_fields += 1;
        }
    }
    let div = |x: u128| crate::tuple::epis_to_fields(x, a);
    let mut out = Tally {
        epimorphisms: raw.epimorphisms,
        fields: div(raw.fields)?,
        wa_fields: div(raw.wa_fields)?,
        hnp_fail_fields: div(raw.hnp_fail_fields)?,
        noncyclic_inertia_2_fields: div(raw.noncyclic_inertia_2_fields)?,
        histogram: BTreeMap::new(),
    };
    for (k, h) in raw.histogram {
        out.histogram.insert(
            k,
            DecadeTally {
                fields: div(h.fields)?,
                wa_fields: div(h.wa_fields)?,
                hnp_fail_fields: div(h.hnp_fail_fields)?,
            },
        );
    }
    Ok(out)
}

/// `classify_range`: tallies fields, WA fields and HNP failures up to `X`.
pub fn classify_range(
    group: Arc<FiniteAbelianGroup>,
    bound: &BigUint,
    norm: &CharacterNormalization,
) -> Result<Tally> {
    let recs = classify_records(group.clone(), bound, norm);
    tally_records(&group, &recs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    fn grp(s: &str) -> Arc<FiniteAbelianGroup> {
        Arc::new(FiniteAbelianGroup::parse(s).unwrap())
    }

    fn tup(a: &Arc<FiniteAbelianGroup>, s: &str) -> ExtensionTuple {
        ExtensionTuple::parse(a.clone(), s).unwrap()
    }

    #[test]
    fn frobenius_examples() {
        let n = CharacterNormalization;
        let a = grp("3.3");
        let t = tup(&a, "1.0:7;0.1:13");
        assert_eq!(frobenius_lift(&t, 7, &n).0[1], 2);
        assert!(frobenius_image(&t, 7, &n).is_err());
        let c = grp("2");
        let t = tup(&c, "1:-1");
        for p in [5u64, 13, 17, 29] {
            assert_eq!(frobenius_image(&t, p, &n).unwrap().0, vec![0]);
        }
        for p in [3u64, 7, 11] {
            assert_eq!(frobenius_image(&t, p, &n).unwrap().0, vec![1]);
        }
        let z3 = grp("3");
        let t = tup(&z3, "1:7");
        assert_eq!(frobenius_image(&t, 2, &n).unwrap().0, vec![2]);
    }

    #[test]
    fn decomposition_examples() {
        let n = CharacterNormalization;
        let a = grp("3.3");
        let t = tup(&a, "1.0:7;0.1:13");
        assert_eq!(
            decomposition_group(&t, Place::Finite(7), &n)
                .unwrap()
                .order(),
            9
        );
        let b = grp("2.2");
        let t = tup(&b, "1.0:-1");
        let d = decomposition_group(&t, Place::Infinite, &n).unwrap();
        assert_eq!(d.order(), 2);
        assert!(d.contains(&b.element(&[1, 0]).unwrap()));
        assert!(decomposition_group(&t, Place::Finite(3), &n).is_err());
    }

    #[test]
    fn verdict_examples() {
        let n = CharacterNormalization;
        let a = grp("3.3");
        let v = verdict(&tup(&a, "1.0:7;0.1:13"), &n).unwrap();
        assert_eq!(
            v,
            Verdict {
                sha_order: 1,
                at_order: 3,
                wa: false,
                hnp: true
            }
        );
        assert!(verdict(&tup(&a, "1.0:7"), &n).is_err());
        let c = grp("4");
        let v = verdict(&tup(&c, "1:5;2:13"), &n).unwrap();
        assert!(v.wa && v.hnp);
    }

    #[test]
    fn empty_below_first_surjective_disc() {
        let n = CharacterNormalization;
        let x = BigUint::from(7u32).pow(12) - BigUint::one();
        let t = classify_range(grp("3.3"), &x, &n).unwrap();
        assert_eq!((t.fields, t.wa_fields, t.hnp_fail_fields), (0, 0, 0));
    }

    #[test]
    fn quadratic_fields_all_wa() {
        let n = CharacterNormalization;
        let t = classify_range(grp("2"), &BigUint::from(1000u32), &n).unwrap();
        assert_eq!(t.fields, t.wa_fields);
        assert_eq!(t.hnp_fail_fields, 0);
    }
}
