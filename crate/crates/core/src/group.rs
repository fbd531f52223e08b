//! Finite abelian groups in prime-power invariant-factor form, their subgroups,
//! the alternating forms `A x A -> Q/Z`, and the quantities built on them:
//! restriction tests, admissible sets, the exponent `alpha(A)` and `|Aut(A)|`.
//!
//! Groups here are small (a few thousand elements at most), so subgroups are
//! materialized as sorted element lists.

use std::fmt;

use num_integer::Integer;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::arith::prime_power;
use crate::error::{Error, Result};

/// `A = Z/d_1 + ... + Z/d_k`, each `d_i` a prime power, kept in the given order.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FiniteAbelianGroup {
    factors: Vec<u32>,
    primes: Vec<u32>,
    order: u64,
    exponent: u64,
    ell: Option<u32>,
}

/// Coordinates `c_i mod d_i`; ordering is lexicographic in the coordinates.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroupElement(pub Vec<u32>);

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|c| c.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

impl GroupElement {
    pub fn coords(&self) -> &[u32] {
        &self.0
    }
}

/// A subgroup with its generators and the full sorted element list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Subgroup {
    pub generators: Vec<GroupElement>,
    pub elements: Vec<GroupElement>,
}

impl Subgroup {
    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn contains(&self, e: &GroupElement) -> bool {
        self.elements.binary_search(e).is_ok()
    }

    pub fn is_trivial(&self) -> bool {
        self.elements.len() == 1
    }
}

/// The moduli `g_ij = gcd(d_i, d_j)` (i < j, only pairs with `g_ij > 1`) that
/// parametrize alternating forms: `lambda(e_i, e_j)` ranges over `(1/g_ij)Z/Z`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlternatingFormConstraint {
    pub pairs: Vec<(usize, usize, u32)>,
}

impl AlternatingFormConstraint {
    pub fn new(a: &FiniteAbelianGroup) -> Self {
        let k = a.rank();
        let mut pairs = Vec::new();
        for i in 0..k {
            for j in i + 1..k {
                let g = a.factors[i].gcd(&a.factors[j]);
                if g > 1 {
                    pairs.push((i, j, g));
                }
            }
        }
        Self { pairs }
    }

    /// `|Hom(wedge^2 A, Q/Z)|`.
    pub fn form_count(&self) -> u128 {
        self.pairs.iter().map(|&(_, _, g)| g as u128).product()
    }

    /// The residue `a_i b_j - a_j b_i mod g_ij` for each pair.
    pub fn minors(&self, a: &GroupElement, b: &GroupElement) -> Vec<u32> {
        self.pairs
            .iter()
            .map(|&(i, j, g)| {
                let g = g as i64;
                let m = a.0[i] as i64 * b.0[j] as i64 - a.0[j] as i64 * b.0[i] as i64;
                m.rem_euclid(g) as u32
            })
            .collect()
    }
}

impl FiniteAbelianGroup {
    pub fn new(factors: Vec<u32>) -> Result<Self> {
        let desc = factors
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join(".");
        let mut primes = Vec::with_capacity(factors.len());
        for &d in &factors {
            match prime_power(d as u64) {
                Some((p, _)) => primes.push(p as u32),
                None => {
                    return Err(Error::GroupDescriptor(
                        desc,
                        format!("factor {d} is not a prime power >= 2"),
                    ))
                }
            }
        }
        let order = factors
            .iter()
            .try_fold(1u64, |acc, &d| acc.checked_mul(d as u64))
            .filter(|&o| o <= 1 << 24)
            .ok_or_else(|| Error::GroupDescriptor(desc.clone(), "group too large".into()))?;
        let exponent = factors.iter().fold(1u64, |acc, &d| acc.lcm(&(d as u64)));
        let ell = primes.iter().copied().min();
        Ok(Self {
            factors,
            primes,
            order,
            exponent,
            ell,
        })
    }

    /// Parses a descriptor such as `2.3.3`; `1` is the trivial group.
    pub fn parse(desc: &str) -> Result<Self> {
        let desc = desc.trim();
        if desc == "1" {
            return Self::new(Vec::new());
        }
        let factors = desc
            .split('.')
            .map(|s| {
                s.trim().parse::<u32>().map_err(|_| {
                    Error::GroupDescriptor(desc.to_string(), format!("`{s}` is not an integer"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(factors)
    }

    pub fn descriptor(&self) -> String {
        if self.factors.is_empty() {
            return "1".into();
        }
        self.factors
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join(".")
    }

    /// `(Z/l)^n` in `n` factors.
    pub fn elementary(ell: u32, n: usize) -> Result<Self> {
        Self::new(vec![ell; n])
    }

    pub fn factors(&self) -> &[u32] {
        &self.factors
    }

    pub fn factor_prime(&self, i: usize) -> u32 {
        self.primes[i]
    }

    pub fn rank(&self) -> usize {
        self.factors.len()
    }

    pub fn order(&self) -> u64 {
        self.order
    }

    pub fn exponent(&self) -> u64 {
        self.exponent
    }

    /// Smallest prime dividing `|A|`; `None` for the trivial group.
    pub fn ell(&self) -> Option<u32> {
        self.ell
    }

    pub fn is_trivial(&self) -> bool {
        self.factors.is_empty()
    }

    /// Distinct primes dividing `|A|`, ascending.
    pub fn primes(&self) -> Vec<u32> {
        let mut p = self.primes.clone();
        p.sort_unstable();
        p.dedup();
        p
    }

    /// True when the group is `(Z/l)^n` for a single prime `l`.
    pub fn is_elementary(&self) -> bool {
        !self.factors.is_empty()
            && self.factors.iter().all(|&d| d == self.factors[0])
            && self.factors[0] == self.primes[0]
    }

    pub fn is_cyclic(&self) -> bool {
        let p = self.primes();
        p.len() == self.factors.len()
    }

    pub fn zero(&self) -> GroupElement {
        GroupElement(vec![0; self.rank()])
    }

    pub fn element(&self, coords: &[i64]) -> Result<GroupElement> {
        if coords.len() != self.rank() {
            return Err(Error::Element(format!(
                "expected {} coordinates, got {}",
                self.rank(),
                coords.len()
            )));
        }
        Ok(GroupElement(
            coords
                .iter()
                .zip(&self.factors)
                .map(|(&c, &d)| c.rem_euclid(d as i64) as u32)
                .collect(),
        ))
    }

    pub fn validate(&self, e: &GroupElement) -> Result<()> {
        if e.0.len() != self.rank() || e.0.iter().zip(&self.factors).any(|(&c, &d)| c >= d) {
            return Err(Error::Element(format!(
                "{e} is not in {}",
                self.descriptor()
            )));
        }
        Ok(())
    }

    /// Mixed-radix index with the first coordinate most significant, so index
    /// order equals element order.
    pub fn index(&self, e: &GroupElement) -> usize {
        e.0.iter()
            .zip(&self.factors)
            .fold(0usize, |acc, (&c, &d)| acc * d as usize + c as usize)
    }

    pub fn element_at(&self, mut idx: usize) -> GroupElement {
        let mut c = vec![0u32; self.rank()];
        for i in (0..self.rank()).rev() {
            let d = self.factors[i] as usize;
            c[i] = (idx % d) as u32;
            idx /= d;
        }
        GroupElement(c)
    }

    /// All elements in ascending order.
    pub fn elements(&self) -> impl Iterator<Item = GroupElement> + '_ {
        (0..self.order as usize).map(move |i| self.element_at(i))
    }

    pub fn nonzero_elements(&self) -> impl Iterator<Item = GroupElement> + '_ {
        (1..self.order as usize).map(move |i| self.element_at(i))
    }

    pub fn add(&self, a: &GroupElement, b: &GroupElement) -> GroupElement {
        GroupElement(
            a.0.iter()
                .zip(&b.0)
                .zip(&self.factors)
                .map(|((&x, &y), &d)| ((x as u64 + y as u64) % d as u64) as u32)
                .collect(),
        )
    }

    pub fn neg(&self, a: &GroupElement) -> GroupElement {
        self.mul(-1, a)
    }

    pub fn sub(&self, a: &GroupElement, b: &GroupElement) -> GroupElement {
        self.add(a, &self.neg(b))
    }

    pub fn mul(&self, k: i64, a: &GroupElement) -> GroupElement {
        GroupElement(
            a.0.iter()
                .zip(&self.factors)
                .map(|(&x, &d)| {
                    let d = d as i128;
                    ((x as i128 * k as i128).rem_euclid(d)) as u32
                })
                .collect(),
        )
    }

    pub fn is_zero(&self, a: &GroupElement) -> bool {
        a.0.iter().all(|&c| c == 0)
    }

    pub fn element_order(&self, a: &GroupElement) -> u64 {
        a.0.iter().zip(&self.factors).fold(1u64, |acc, (&c, &d)| {
            let d = d as u64;
            acc.lcm(&(d / d.gcd(&(c as u64))))
        })
    }

    /// The subgroup generated by `gens`.
    pub fn generated(&self, gens: &[GroupElement]) -> Subgroup {
        let n = self.order as usize;
        let mut seen = vec![false; n];
        let mut members = vec![self.zero()];
        seen[0] = true;
        for g in gens {
            if seen[self.index(g)] {
                continue;
            }
            let ord = self.element_order(g);
            let base = members.clone();
            let mut step = g.clone();
            for _ in 1..ord {
                for m in &base {
                    let s = self.add(m, &step);
                    let i = self.index(&s);
                    if !seen[i] {
                        seen[i] = true;
                        members.push(s);
                    }
                }
                step = self.add(&step, g);
            }
        }
        let elements = (0..n)
            .filter(|&i| seen[i])
            .map(|i| self.element_at(i))
            .collect();
        Subgroup {
            generators: gens.to_vec(),
            elements,
        }
    }

    pub fn whole(&self) -> Subgroup {
        let gens = (0..self.rank())
            .map(|i| {
                let mut c = vec![0; self.rank()];
                c[i] = 1;
                GroupElement(c)
            })
            .collect::<Vec<_>>();
        Subgroup {
            generators: gens,
            elements: self.elements().collect(),
        }
    }

    pub fn trivial_subgroup(&self) -> Subgroup {
        Subgroup {
            generators: Vec::new(),
            elements: vec![self.zero()],
        }
    }

    fn from_predicate(&self, pred: impl Fn(&GroupElement) -> bool) -> Subgroup {
        let elements: Vec<_> = self.elements().filter(|e| pred(e)).collect();
        let gens = self.minimal_generators(&elements);
        Subgroup {
            generators: gens,
            elements,
        }
    }

    /// A generating list for an element set that is known to be a subgroup.
    fn minimal_generators(&self, elements: &[GroupElement]) -> Vec<GroupElement> {
        let mut gens: Vec<GroupElement> = Vec::new();
        let mut cur = self.trivial_subgroup();
        let mut by_order: Vec<&GroupElement> = elements.iter().collect();
        by_order.sort_by_key(|e| std::cmp::Reverse(self.element_order(e)));
        for e in by_order {
            if cur.order() == elements.len() {
                break;
            }
            if !cur.contains(e) {
                gens.push(e.clone());
                cur = self.generated(&gens);
            }
        }
        gens
    }

    /// `A[k] = {a : k a = 0}`.
    pub fn torsion(&self, k: i64) -> Subgroup {
        self.from_predicate(|e| self.is_zero(&self.mul(k, e)))
    }

    /// `kA`.
    pub fn multiples(&self, k: i64) -> Subgroup {
        let mut set: Vec<GroupElement> = self.elements().map(|e| self.mul(k, &e)).collect();
        set.sort();
        set.dedup();
        let gens = self.minimal_generators(&set);
        Subgroup {
            generators: gens,
            elements: set,
        }
    }

    pub fn sum(&self, h: &Subgroup, k: &Subgroup) -> Subgroup {
        let mut gens = h.generators.clone();
        gens.extend(k.generators.iter().cloned());
        let mut s = self.generated(&gens);
        s.generators = gens;
        s
    }

    pub fn intersection(&self, h: &Subgroup, k: &Subgroup) -> Subgroup {
        let elements: Vec<_> = h
            .elements
            .iter()
            .filter(|e| k.contains(e))
            .cloned()
            .collect();
        let gens = self.minimal_generators(&elements);
        Subgroup {
            generators: gens,
            elements,
        }
    }

    /// `<y, a> = sum y_i a_i / d_i` in `(1/E)Z/Z`, returned as a numerator mod the exponent `E`.
    pub fn pairing(&self, y: &GroupElement, a: &GroupElement) -> u64 {
        let e = self.exponent;
        y.0.iter()
            .zip(&a.0)
            .zip(&self.factors)
            .fold(0u64, |acc, ((&yi, &ai), &d)| {
                (acc + (yi as u64 * ai as u64 % d as u64) * (e / d as u64)) % e
            })
    }

    /// Order of `<y, a>` in `Q/Z`.
    pub fn pairing_order(&self, y: &GroupElement, a: &GroupElement) -> u64 {
        let v = self.pairing(y, a);
        self.exponent / self.exponent.gcd(&v)
    }
}

impl fmt::Display for FiniteAbelianGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.descriptor())
    }
}

/// True iff every alternating form vanishes on `(a, b)`, i.e. `g_ij | a_i b_j - a_j b_i` for all `i < j`.
pub fn restriction_is_zero(a: &FiniteAbelianGroup, x: &GroupElement, y: &GroupElement) -> bool {
    AlternatingFormConstraint::new(a)
        .minors(x, y)
        .iter()
        .all(|&m| m == 0)
}

/// `A[l] ∩ lA` for the smallest prime `l` dividing `|A|`.
pub fn s_subspace(a: &FiniteAbelianGroup) -> Subgroup {
    match a.ell() {
        None => a.trivial_subgroup(),
        Some(l) => a.intersection(&a.torsion(l as i64), &a.multiples(l as i64)),
    }
}

/// `Adm(x) = {b : restriction_is_zero(A, x, b)}` for `x ∈ A[l] - {0}`.
pub fn adm_set(a: &FiniteAbelianGroup, x: &GroupElement) -> Result<Subgroup> {
    a.validate(x)?;
    let l = a
        .ell()
        .ok_or_else(|| Error::Precondition("trivial group".into()))?;
    if a.is_zero(x) {
        return Err(Error::Precondition(
            "adm_set needs a nonzero element".into(),
        ));
    }
    if !a.is_zero(&a.mul(l as i64, x)) {
        return Err(Error::Precondition(format!(
            "{x} is not l-torsion for l = {l}"
        )));
    }
    let c = AlternatingFormConstraint::new(a);
    Ok(a.from_predicate(|b| c.minors(x, b).iter().all(|&m| m == 0)))
}

/// `alpha(A) = sum_{a ∈ A[l]-0} |Adm(a)| / ((l-1)|A|)`.
pub fn alpha(a: &FiniteAbelianGroup) -> Result<Ratio<i128>> {
    let l = a
        .ell()
        .ok_or_else(|| Error::Precondition("alpha of the trivial group".into()))?;
    let torsion = a.torsion(l as i64);
    let mut total: i128 = 0;
    for x in torsion.elements.iter().filter(|e| !a.is_zero(e)) {
        total += adm_set(a, x)?.order() as i128;
    }
    Ok(Ratio::new(total, (l as i128 - 1) * a.order() as i128))
}

/// `(|A[l]| - 1)/(l - 1)`.
pub fn alpha_total(a: &FiniteAbelianGroup) -> Result<Ratio<i128>> {
    let l = a
        .ell()
        .ok_or_else(|| Error::Precondition("alpha_total of the trivial group".into()))?;
    let t = a.torsion(l as i64).order() as i128;
    Ok(Ratio::new(t - 1, l as i128 - 1))
}

/// `|Aut(A)|`, by the product formula for abelian `p`-groups on each primary part.
pub fn aut_order(a: &FiniteAbelianGroup) -> u128 {
    let mut total: u128 = 1;
    for p in a.primes() {
        let mut e: Vec<u32> = a
            .factors()
            .iter()
            .zip(&a.primes)
            .filter(|(_, &q)| q == p)
            .map(|(&d, _)| crate::arith::valuation(d as u64, p as u64))
            .collect();
        e.sort_unstable();
        let n = e.len();
        let p = p as u128;
        let pw = |k: u32| p.pow(k);
        let mut part: u128 = 1;
        for k in 0..n {
            let d_k = (0..n).filter(|&l| e[l] == e[k]).max().unwrap() as u32 + 1;
            let c_k = (0..n).filter(|&l| e[l] == e[k]).min().unwrap() as u32 + 1;
            part *= pw(d_k) - pw(k as u32);
            part *= pw(e[k]).pow(n as u32 - d_k);
            part *= pw(e[k] - 1).pow(n as u32 - c_k + 1);
        }
        total *= part;
    }
    total
}

/// `|Hom(wedge^2 A, Q/Z)|`.
pub fn wedge_dual_order(a: &FiniteAbelianGroup) -> u128 {
    AlternatingFormConstraint::new(a).form_count()
}

/// Number of alternating forms vanishing on `D x D` for every listed `D`.
pub fn sha_dual_dimension(a: &FiniteAbelianGroup, subgroups: &[Subgroup]) -> u128 {
    let gens: Vec<Vec<GroupElement>> = subgroups.iter().map(|s| s.generators.clone()).collect();
    vanishing_form_count(a, &gens)
}

/// As [`sha_dual_dimension`], with each subgroup given by generators only.
///
/// The forms split over primes. For each prime the conditions
/// `sum_ij c_ij m_ij(s,t) / g_ij = 0` on `c ∈ ∏ Z/g_ij` form a linear map into
/// `(Z/p^E)^r`; the count is `|domain| / |image|`, with the image size read off
/// a triangularization over `Z/p^E`.
pub fn vanishing_form_count(a: &FiniteAbelianGroup, gens: &[Vec<GroupElement>]) -> u128 {
    let cons = AlternatingFormConstraint::new(a);
    let mut total: u128 = 1;
    for p in a.primes() {
        let idx: Vec<usize> = cons
            .pairs
            .iter()
            .enumerate()
            .filter(|(_, &(i, _, _))| a.primes[i] == p)
            .map(|(k, _)| k)
            .collect();
        if idx.is_empty() {
            continue;
        }
        let pe = idx.iter().map(|&k| cons.pairs[k].2 as u64).max().unwrap();
        let mut cols: Vec<Vec<u64>> = Vec::new();
        for g in gens {
            for s in 0..g.len() {
                for t in s + 1..g.len() {
                    let m = cons.minors(&g[s], &g[t]);
                    cols.push(
                        idx.iter()
                            .map(|&k| m[k] as u64 * (pe / cons.pairs[k].2 as u64) % pe)
                            .collect(),
                    );
                }
            }
        }
        // rows indexed by form coordinates, columns by constraints
        let rows: Vec<Vec<u64>> = (0..idx.len())
            .map(|r| cols.iter().map(|c| c[r]).collect())
            .collect();
        let domain: u128 = idx.iter().map(|&k| cons.pairs[k].2 as u128).product();
        let image = span_order(rows, cols.len(), p as u64, pe);
        total *= domain / image;
    }
    total
}

/// Order of the subgroup of `(Z/p^E)^ncols` spanned by `rows`.
pub(crate) fn span_order(mut pool: Vec<Vec<u64>>, ncols: usize, p: u64, pe: u64) -> u128 {
    let val = |x: u64| -> u32 {
        if x == 0 {
            u32::MAX
        } else {
            crate::arith::valuation(x, p)
        }
    };
    let mut size: u128 = 1;
    for c in 0..ncols {
        pool.retain(|r| r.iter().any(|&x| x != 0));
        let Some((piv_i, v)) = pool
            .iter()
            .enumerate()
            .map(|(i, r)| (i, val(r[c])))
            .filter(|&(_, v)| v != u32::MAX)
            .min_by_key(|&(_, v)| v)
        else {
            continue;
        };
        let pivot = pool.swap_remove(piv_i);
        let pv = p.pow(v);
        let unit = pivot[c] / pv;
        let inv = mod_inverse(unit % pe, pe);
        for r in pool.iter_mut() {
            if r[c] != 0 {
                let f = (r[c] / pv) % pe * inv % pe;
                for (x, &y) in r.iter_mut().zip(&pivot) {
                    *x = (*x + pe - (f as u128 * y as u128 % pe as u128) as u64) % pe;
                }
            }
        }
        let scale = pe / pv;
        let tail: Vec<u64> = pivot
            .iter()
            .map(|&y| (scale as u128 * y as u128 % pe as u128) as u64)
            .collect();
        pool.push(tail);
        size *= scale as u128;
    }
    size
}

fn mod_inverse(u: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let e = (u as i64).extended_gcd(&(m as i64));
    debug_assert_eq!(e.gcd, 1);
    e.x.rem_euclid(m as i64) as u64
}

/// `l`-rank style invariant `d(A/H)`: the minimal number of generators of the quotient.
pub fn quotient_rank(a: &FiniteAbelianGroup, h: &Subgroup) -> u32 {
    let mut best = 0;
    for p in a.primes() {
        let hp = a.sum(h, &a.multiples(p as i64));
        let q = a.order() / hp.order() as u64;
        let r = crate::arith::valuation(q, p as u64);
        best = best.max(r);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(s: &str) -> FiniteAbelianGroup {
        FiniteAbelianGroup::parse(s).unwrap()
    }

    fn el(a: &FiniteAbelianGroup, c: &[i64]) -> GroupElement {
        a.element(c).unwrap()
    }

    #[test]
    fn parse_and_errors() {
        assert_eq!(g("2.3.3").order(), 18);
        assert_eq!(g("1").order(), 1);
        assert!(FiniteAbelianGroup::parse("6").is_err());
        assert!(FiniteAbelianGroup::parse("2.x").is_err());
        assert_eq!(g("4.9").exponent(), 36);
        assert_eq!(g("4.9").ell(), Some(2));
    }

    #[test]
    fn restriction_examples() {
        let a = g("2.2");
        assert!(!restriction_is_zero(&a, &el(&a, &[1, 0]), &el(&a, &[0, 1])));
        let c = g("4");
        for x in c.elements() {
            for y in c.elements() {
                assert!(restriction_is_zero(&c, &x, &y));
            }
        }
        let b = g("2.4");
        assert!(!restriction_is_zero(&b, &el(&b, &[1, 2]), &el(&b, &[0, 1])));
    }

    #[test]
    fn s_subspace_examples() {
        assert!(s_subspace(&g("2.2")).is_trivial());
        let c4 = g("4");
        assert_eq!(s_subspace(&c4).elements, vec![el(&c4, &[0]), el(&c4, &[2])]);
        let b = g("2.4");
        assert_eq!(
            s_subspace(&b).elements,
            vec![el(&b, &[0, 0]), el(&b, &[0, 2])]
        );
    }

    #[test]
    fn adm_examples() {
        let a = g("2.2");
        assert_eq!(
            adm_set(&a, &el(&a, &[1, 0])).unwrap().elements,
            vec![el(&a, &[0, 0]), el(&a, &[1, 0])]
        );
        let b = g("2.3.3");
        assert_eq!(adm_set(&b, &el(&b, &[1, 0, 0])).unwrap().order(), 18);
        let c = g("3.3");
        assert_eq!(
            adm_set(&c, &el(&c, &[1, 0])).unwrap().elements,
            vec![el(&c, &[0, 0]), el(&c, &[1, 0]), el(&c, &[2, 0])]
        );
        assert!(adm_set(&c, &c.zero()).is_err());
        let d = g("9");
        assert!(adm_set(&d, &el(&d, &[1])).is_err());
    }

    #[test]
    fn alpha_examples() {
        assert_eq!(alpha(&g("2.2")).unwrap(), Ratio::new(3, 2));
        assert_eq!(alpha(&g("8")).unwrap(), Ratio::from_integer(1));
        assert_eq!(alpha(&g("2.3.3")).unwrap(), Ratio::from_integer(1));
        assert!(alpha(&g("1")).is_err());
        assert_eq!(alpha_total(&g("3.3")).unwrap(), Ratio::from_integer(4));
        assert_eq!(alpha_total(&g("5")).unwrap(), Ratio::from_integer(1));
        assert_eq!(alpha_total(&g("2.2.2")).unwrap(), Ratio::from_integer(7));
    }

    #[test]
    fn aut_examples() {
        assert_eq!(aut_order(&g("2.2")), 6);
        assert_eq!(aut_order(&g("2.3.3")), 48);
        assert_eq!(aut_order(&g("3.3")), 48);
        assert_eq!(aut_order(&g("4")), 2);
        assert_eq!(aut_order(&g("2.4")), 8);
        assert_eq!(aut_order(&g("2.2.2")), 168);
        assert_eq!(aut_order(&g("4.4")), 96);
        assert_eq!(aut_order(&g("1")), 1);
    }

    #[test]
    fn sha_examples() {
        let a = g("2.2");
        assert_eq!(sha_dual_dimension(&a, &[]), 2);
        assert_eq!(sha_dual_dimension(&a, &[a.whole()]), 1);
        let c = g("3.3");
        let l1 = c.generated(&[el(&c, &[1, 0])]);
        let l2 = c.generated(&[el(&c, &[0, 1])]);
        assert_eq!(sha_dual_dimension(&c, &[l1, l2]), 3);
    }

    #[test]
    fn generated_and_rank() {
        let a = g("2.4");
        let h = a.generated(&[el(&a, &[1, 2])]);
        assert_eq!(h.order(), 2);
        assert_eq!(quotient_rank(&a, &h), 1);
        assert_eq!(quotient_rank(&a, &a.trivial_subgroup()), 2);
        assert_eq!(quotient_rank(&a, &a.whole()), 0);
        let b = g("2.3.3");
        assert_eq!(quotient_rank(&b, &b.trivial_subgroup()), 2);
    }
}
