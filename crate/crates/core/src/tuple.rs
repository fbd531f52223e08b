//! Tuples `(v_a)_{a ∈ A-0}` of signed squarefree, pairwise coprime integers that
//! parametrize homomorphisms `Gal(Qbar/Q) -> A`, their discriminants, the
//! weight function `Δ`, and a deterministic enumerator for all tuples below a
//! bound.
//!
//! An odd prime `q | v_a` contributes the character `x ↦ dlog(x_q)·a` of
//! `Z_q^x`; `2 | v_a` contributes the `5^k` exponent of `x_2`; `v_a < 0`
//! contributes `[x_2 = 3 mod 4]·a`. So `v = 3` is `Q(sqrt(-3))`, `v = -1` is
//! `Q(i)`, `v = -3` is `Q(sqrt 3)` and `v = 2` is `Q(sqrt 2)`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, ToPrimitive};

use crate::arith::{factorize, is_prime, valuation};
use crate::error::{Error, Result};
use crate::group::{FiniteAbelianGroup, GroupElement};

/// `v_a = ±∏ primes`; `negative` with no primes is `v_a = -1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct TupleEntry {
    pub negative: bool,
    pub primes: Vec<u64>,
}

impl TupleEntry {
    pub fn from_int(v: i64) -> Result<Self> {
        if v == 0 {
            return Err(Error::Tuple("v_a = 0".into()));
        }
        let fac = factorize(v.unsigned_abs());
        if fac.iter().any(|&(_, e)| e > 1) {
            return Err(Error::Tuple(format!("{v} is not squarefree")));
        }
        Ok(Self {
            negative: v < 0,
            primes: fac.into_iter().map(|(p, _)| p).collect(),
        })
    }

    pub fn is_one(&self) -> bool {
        !self.negative && self.primes.is_empty()
    }

    pub fn abs_value(&self) -> BigUint {
        self.primes.iter().fold(BigUint::one(), |acc, &p| acc * p)
    }

    pub fn value(&self) -> BigInt {
        let v = BigInt::from(self.abs_value());
        if self.negative {
            -v
        } else {
            v
        }
    }

    /// `v mod m` as a residue in `[0, m)`.
    pub fn residue(&self, m: u64) -> u64 {
        let r = self.primes.iter().fold(1u64 % m, |acc, &p| {
            ((acc as u128 * p as u128) % m as u128) as u64
        });
        if self.negative {
            (m - r) % m
        } else {
            r
        }
    }

    pub fn divisible_by(&self, p: u64) -> bool {
        self.primes.binary_search(&p).is_ok()
    }
}

impl fmt::Display for TupleEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

/// A point of the tuple space; entries equal to 1 are absent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtensionTuple {
    group: Arc<FiniteAbelianGroup>,
    entries: BTreeMap<GroupElement, TupleEntry>,
}

/// Where each ramified place sits: finite primes and the sign (`∞`) index.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct RamificationProfile {
    pub finite: BTreeMap<u64, GroupElement>,
    pub infinite: Option<GroupElement>,
}

impl ExtensionTuple {
    /// Builds and validates a tuple from `(a, v_a)` pairs; `v_a = 1` entries are dropped.
    pub fn new(group: Arc<FiniteAbelianGroup>, values: &[(GroupElement, i64)]) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (a, v) in values {
            let e = TupleEntry::from_int(*v)?;
            if entries.insert(a.clone(), e).is_some() {
                return Err(Error::Tuple(format!("index {a} given twice")));
            }
        }
        Self::from_entries(group, entries)
    }

    pub fn from_entries(
        group: Arc<FiniteAbelianGroup>,
        mut entries: BTreeMap<GroupElement, TupleEntry>,
    ) -> Result<Self> {
        entries.retain(|_, e| !e.is_one());
        let t = Self { group, entries };
        t.validate()?;
        Ok(t)
    }

    /// Skips validation; for callers that construct tuples structurally.
    pub(crate) fn from_entries_unchecked(
        group: Arc<FiniteAbelianGroup>,
        entries: BTreeMap<GroupElement, TupleEntry>,
    ) -> Self {
        Self { group, entries }
    }

    pub fn trivial(group: Arc<FiniteAbelianGroup>) -> Self {
        Self {
            group,
            entries: BTreeMap::new(),
        }
    }

    pub fn group(&self) -> &FiniteAbelianGroup {
        &self.group
    }

    pub fn group_arc(&self) -> &Arc<FiniteAbelianGroup> {
        &self.group
    }

    pub fn entries(&self) -> &BTreeMap<GroupElement, TupleEntry> {
        &self.entries
    }

    pub fn entry(&self, a: &GroupElement) -> Option<&TupleEntry> {
        self.entries.get(a)
    }

    pub fn v(&self, a: &GroupElement) -> BigInt {
        self.entries
            .get(a)
            .map(|e| e.value())
            .unwrap_or_else(BigInt::one)
    }

    /// Membership in the tuple space: squarefree, pairwise coprime (the sign
    /// counts as a place), congruence conditions, and positivity for `ord(a) > 2`.
    pub fn validate(&self) -> Result<()> {
        let a = &*self.group;
        let mut seen = std::collections::BTreeSet::new();
        let mut negatives = 0;
        for (x, e) in &self.entries {
            a.validate(x)?;
            if a.is_zero(x) {
                return Err(Error::Tuple("index 0 is not allowed".into()));
            }
            let ord = a.element_order(x);
            if e.negative {
                negatives += 1;
                if ord > 2 {
                    return Err(Error::Tuple(format!("v_{x} < 0 but ord({x}) = {ord} > 2")));
                }
            }
            if !e.primes.windows(2).all(|w| w[0] < w[1]) {
                return Err(Error::Tuple(format!("v_{x} is not squarefree")));
            }
            for &p in &e.primes {
                if !is_prime(p) {
                    return Err(Error::Tuple(format!("{p} in v_{x} is not prime")));
                }
                if !seen.insert(p) {
                    return Err(Error::Tuple(format!("{p} divides two entries")));
                }
                let prime_to_p = ord / (p.pow(valuation(ord, p)));
                if (p - 1) % prime_to_p != 0 {
                    return Err(Error::Tuple(format!(
                        "{p} | v_{x} but {p} != 1 mod {prime_to_p}"
                    )));
                }
            }
        }
        if negatives > 1 {
            return Err(Error::Tuple(
                "two negative entries are not coprime at ∞".into(),
            ));
        }
        Ok(())
    }

    pub fn ramification(&self) -> RamificationProfile {
        let mut r = RamificationProfile::default();
        for (a, e) in &self.entries {
            for &p in &e.primes {
                r.finite.insert(p, a.clone());
            }
            if e.negative {
                r.infinite = Some(a.clone());
            }
        }
        r
    }

    /// The index with `v < 0`, if any.
    pub fn sign_index(&self) -> Option<&GroupElement> {
        self.entries
            .iter()
            .find(|(_, e)| e.negative)
            .map(|(a, _)| a)
    }

    /// The index with `2 | v`, if any.
    pub fn two_index(&self) -> Option<&GroupElement> {
        self.entries
            .iter()
            .find(|(_, e)| e.primes.first() == Some(&2))
            .map(|(a, _)| a)
    }

    /// Odd ramified primes with their indices, ascending.
    pub fn odd_primes(&self) -> Vec<(u64, GroupElement)> {
        let mut out: Vec<_> = self
            .entries
            .iter()
            .flat_map(|(a, e)| {
                e.primes
                    .iter()
                    .filter(|&&p| p != 2)
                    .map(move |&p| (p, a.clone()))
            })
            .collect();
        out.sort();
        out
    }

    /// Whether `p` ramifies (for `p = 2` this includes sign-only ramification).
    pub fn is_ramified(&self, p: u64) -> bool {
        if p == 2 {
            return self.sign_index().is_some() || self.two_index().is_some();
        }
        self.entries.values().any(|e| e.divisible_by(p))
    }

    /// Finite ramified primes, ascending.
    pub fn ramified_primes(&self) -> Vec<u64> {
        let mut ps: Vec<u64> = self
            .entries
            .values()
            .flat_map(|e| e.primes.iter().copied())
            .collect();
        if self.sign_index().is_some() && !ps.contains(&2) {
            ps.push(2);
        }
        ps.sort_unstable();
        ps
    }

    /// `c1.c2...:v` pairs joined by `;`, in increasing order of the index.
    pub fn serialize(&self) -> String {
        self.entries
            .iter()
            .map(|(a, e)| {
                let c: Vec<String> = a.0.iter().map(|x| x.to_string()).collect();
                format!("{}:{}", c.join("."), e)
            })
            .collect::<Vec<_>>()
            .join(";")
    }

    pub fn parse(group: Arc<FiniteAbelianGroup>, s: &str) -> Result<Self> {
        let mut values = Vec::new();
        for part in s.split(';').filter(|p| !p.trim().is_empty()) {
            let (idx, v) = part
                .split_once(':')
                .ok_or_else(|| Error::Tuple(format!("`{part}` lacks `:`")))?;
            let coords = idx
                .split('.')
                .map(|c| c.trim().parse::<i64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::Tuple(format!("bad index `{idx}`")))?;
            let v = v
                .trim()
                .parse::<i64>()
                .map_err(|_| Error::Tuple(format!("bad value `{v}`")))?;
            values.push((group.element(&coords)?, v));
        }
        Self::new(group, &values)
    }

    /// Applies a group map to the indices: `v'_{ψ(a)} = v_a`.
    pub fn map_indices(&self, psi: impl Fn(&GroupElement) -> GroupElement) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (a, e) in &self.entries {
            if entries.insert(psi(a), e.clone()).is_some() {
                return Err(Error::Tuple("index map is not injective".into()));
            }
        }
        Self::from_entries(self.group.clone(), entries)
    }
}

impl fmt::Display for ExtensionTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.serialize())
    }
}

/// True iff `{a : v_a != 1}` generates `A`.
pub fn is_surjective(t: &ExtensionTuple) -> bool {
    let gens: Vec<GroupElement> = t.entries.keys().cloned().collect();
    t.group.generated(&gens).order() as u64 == t.group.order()
}

/// `Δ` with `Δ(p) = p` for `p != l` and `Δ(l) = l^2`, plus the 2-adic modulus `d(l)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WeightFunction {
    pub ell: u64,
}

impl WeightFunction {
    pub fn delta_prime(&self, p: u64) -> u64 {
        if p == self.ell {
            p * p
        } else {
            p
        }
    }

    pub fn d_ell(&self) -> u64 {
        if self.ell == 2 {
            16
        } else {
            1
        }
    }
}

/// A discriminant as prime factorization plus its value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiscriminantValue {
    pub factors: BTreeMap<u64, u64>,
    pub total: BigUint,
}

impl DiscriminantValue {
    pub fn from_factors(factors: BTreeMap<u64, u64>) -> Self {
        let total = factors.iter().fold(BigUint::one(), |acc, (&p, &e)| {
            acc * BigUint::from(p).pow(e as u32)
        });
        Self { factors, total }
    }

    pub fn exponent(&self, p: u64) -> u64 {
        self.factors.get(&p).copied().unwrap_or(0)
    }
}

/// Local conductor exponent at an odd prime `p` of a character whose value on
/// the inertia generator has order `t`.
fn odd_conductor(t: u64, p: u64) -> u64 {
    if t == 1 {
        0
    } else {
        valuation(t, p) as u64 + 1
    }
}

/// `v_p(Disc)` for odd `p` ramified at an index of order `m`:
/// `(|A|/m) Σ_{t | m} φ(t) c(t)`.
pub fn odd_exponent(order: u64, m: u64, p: u64) -> u64 {
    let mut s = 0;
    for t in 1..=m {
        if m % t == 0 {
            s += crate::arith::euler_phi(t) * odd_conductor(t, p);
        }
    }
    order / m * s
}

/// `v_2(Disc)` from the sign index and the `2 | v` index: sums over all
/// characters `χ`; `χ` contributes `j + 2` if `χ(a_2)` has order `2^j > 1`,
/// 2 if only `χ(a_sign)` is nontrivial, and 0 otherwise.
pub fn two_exponent(
    a: &FiniteAbelianGroup,
    sign: Option<&GroupElement>,
    two: Option<&GroupElement>,
) -> u64 {
    if sign.is_none() && two.is_none() {
        return 0;
    }
    let mut s = 0;
    for y in a.elements() {
        let o2 = two.map(|t| a.pairing_order(&y, t)).unwrap_or(1);
        if o2 > 1 {
            s += valuation(o2, 2) as u64 + 2;
        } else if sign.map(|g| a.pairing_order(&y, g)).unwrap_or(1) > 1 {
            s += 2;
        }
    }
    s
}

/// Discriminant by the conductor-discriminant formula.
pub fn discriminant(t: &ExtensionTuple) -> Result<DiscriminantValue> {
    t.validate()?;
    Ok(discriminant_unchecked(t))
}

pub(crate) fn discriminant_unchecked(t: &ExtensionTuple) -> DiscriminantValue {
    let a = t.group();
    let mut factors = BTreeMap::new();
    for (x, e) in t.entries() {
        let m = a.element_order(x);
        for &p in e.primes.iter().filter(|&&p| p != 2) {
            factors.insert(p, odd_exponent(a.order(), m, p));
        }
    }
    let e2 = two_exponent(a, t.sign_index(), t.two_index());
    if e2 > 0 {
        factors.insert(2, e2);
    }
    DiscriminantValue::from_factors(factors)
}

/// `∏_a Δ(|v_a|)` for `l` the smallest prime of `|A|`.
pub fn weighted_size(t: &ExtensionTuple) -> BigUint {
    let w = WeightFunction {
        ell: t.group().ell().unwrap_or(1) as u64,
    };
    t.entries()
        .values()
        .flat_map(|e| e.primes.iter())
        .fold(BigUint::one(), |acc, &p| acc * w.delta_prime(p))
}

/// Divides an epimorphism count by `|Aut(A)|`.
pub fn epis_to_fields(count: u128, a: &FiniteAbelianGroup) -> Result<u128> {
    let aut = crate::group::aut_order(a);
    if count % aut != 0 {
        return Err(Error::Inconsistent(format!(
            "{count} epimorphisms is not divisible by |Aut(A)| = {aut}"
        )));
    }
    Ok(count / aut)
}

/// The `Z/2` parameter `v` of `Q(sqrt w)` for a squarefree radicand `w != 1`.
pub fn quadratic_parameter(w: i64) -> Result<i64> {
    if w == 0 || w == 1 {
        return Err(Error::Tuple(format!(
            "radicand {w} gives no quadratic field"
        )));
    }
    let fac = factorize(w.unsigned_abs());
    if fac.iter().any(|&(_, e)| e > 1) {
        return Err(Error::Tuple(format!("{w} is not squarefree")));
    }
    // m* = ∏ q*, q* = ±q ≡ 1 mod 4
    let mut star: i64 = 1;
    let mut abs: i64 = 1;
    for &(p, _) in &fac {
        abs *= p as i64;
        if p != 2 {
            star *= if p % 4 == 1 { p as i64 } else { -(p as i64) };
        }
    }
    let two = if w % 2 == 0 { 2 } else { 1 };
    // w / (two * star) is ±1; a minus sign means the χ_{-4} part is present
    let sign = w / (two * star);
    Ok(if sign < 0 { -abs } else { abs })
}

/// Fundamental discriminant of the quadratic field with parameter `v`.
pub fn quadratic_discriminant(v: i64) -> i64 {
    let odd = if v % 2 == 0 { v / 2 } else { v };
    let mut star: i64 = 1;
    for (p, _) in factorize(odd.unsigned_abs()) {
        star *= if p % 4 == 1 { p as i64 } else { -(p as i64) };
    }
    let mut d = star;
    if v < 0 {
        d *= -4;
    }
    if v % 2 == 0 {
        d *= 8;
        if v < 0 {
            d /= 4;
        }
    }
    // -4 and 8 combine to -8
    d
}

/// What the enumerator measures against the bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Measure {
    Discriminant,
    WeightedSize,
}

/// Side conditions: `gcd(v_a, M) = 1` and `p | v_a ⇒ p mod M ∈ H_a`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModulusFilter {
    pub modulus: u64,
    pub allowed: BTreeMap<GroupElement, Vec<u64>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnumOptions {
    pub surjective_only: bool,
    pub measure: Measure,
    /// `v_a ≡ c_a mod d(l)` for the listed indices.
    pub residue_classes: BTreeMap<GroupElement, u64>,
    pub modulus: Option<ModulusFilter>,
}

impl Default for EnumOptions {
    fn default() -> Self {
        Self {
            surjective_only: false,
            measure: Measure::Discriminant,
            residue_classes: BTreeMap::new(),
            modulus: None,
        }
    }
}

impl EnumOptions {
    pub fn surjective() -> Self {
        Self {
            surjective_only: true,
            ..Self::default()
        }
    }
}

/// A choice for the places `∞` and `2`.
#[derive(Clone, Debug)]
struct TwoBlock {
    sign: Option<usize>,
    two: Option<usize>,
    log_cost: f64,
    cost: BigUint,
}

/// Depth-first enumerator of tuples with measure `<= X`.
///
/// Primes are assigned in increasing order; each node of the search tree is a
/// tuple. Work is partitioned by the smallest odd prime of the tuple (0 when
/// there is none), so [`TupleEnumerator::branches`] lists independent subtrees.
pub struct TupleEnumerator {
    group: Arc<FiniteAbelianGroup>,
    bound: BigUint,
    log_bound: f64,
    opts: EnumOptions,
    elems: Vec<GroupElement>,
    orders: Vec<u64>,
    primes: Vec<u64>,
    blocks: Vec<TwoBlock>,
    e_min: f64,
    ell: u64,
}

/// Relative slack below which the float comparison defers to exact arithmetic.
const LOG_EPS: f64 = 1e-9;

impl TupleEnumerator {
    pub fn new(group: Arc<FiniteAbelianGroup>, bound: &BigUint, opts: EnumOptions) -> Self {
        let a = &*group;
        let elems: Vec<GroupElement> = a.nonzero_elements().collect();
        let orders: Vec<u64> = elems.iter().map(|e| a.element_order(e)).collect();
        let ell = a.ell().unwrap_or(1) as u64;
        let log_bound = big_log(bound);
        let e_min = match opts.measure {
            Measure::Discriminant => (a.order() - a.order() / ell.max(1)) as f64,
            Measure::WeightedSize => 1.0,
        };
        let mut this = Self {
            group,
            bound: bound.clone(),
            log_bound,
            opts,
            elems,
            orders,
            primes: Vec::new(),
            blocks: Vec::new(),
            e_min,
            ell,
        };
        if this.group.is_trivial() {
            return this;
        }
        this.blocks = this.two_blocks();
        let limit = if e_min > 0.0 {
            (log_bound / e_min).exp() * (1.0 + 1e-9) + 1.0
        } else {
            0.0
        };
        let limit = limit.min(u32::MAX as f64) as u64;
        let mut ps = crate::arith::primes_up_to(limit);
        ps.retain(|&p| p != 2);
        if let Some(mf) = &this.opts.modulus {
            ps.retain(|&p| mf.modulus % p != 0);
        }
        this.primes = ps;
        this
    }

    pub fn group(&self) -> &Arc<FiniteAbelianGroup> {
        &self.group
    }

    fn two_blocks(&self) -> Vec<TwoBlock> {
        let a = &*self.group;
        let mut out = vec![TwoBlock {
            sign: None,
            two: None,
            log_cost: 0.0,
            cost: BigUint::one(),
        }];
        if a.order() % 2 != 0 {
            return out;
        }
        if let Some(mf) = &self.opts.modulus {
            if mf.modulus % 2 == 0 {
                // 2 | M forbids 2 | v_a, but not the sign
                return self.sign_blocks(out, false);
            }
        }
        out = self.sign_blocks(out, true);
        out
    }

    fn sign_blocks(&self, mut out: Vec<TwoBlock>, allow_two: bool) -> Vec<TwoBlock> {
        let a = &*self.group;
        let sign_opts: Vec<Option<usize>> = std::iter::once(None)
            .chain(
                (0..self.elems.len())
                    .filter(|&i| self.orders[i] == 2)
                    .map(Some),
            )
            .collect();
        let two_opts: Vec<Option<usize>> = std::iter::once(None)
            .chain(
                (0..self.elems.len())
                    .filter(|&i| allow_two && self.orders[i].is_power_of_two())
                    .map(Some),
            )
            .collect();
        out.clear();
        for &s in &sign_opts {
            for &t in &two_opts {
                let (log_cost, cost) = match self.opts.measure {
                    Measure::Discriminant => {
                        let e =
                            two_exponent(a, s.map(|i| &self.elems[i]), t.map(|i| &self.elems[i]));
                        (e as f64 * 2f64.ln(), BigUint::from(2u32).pow(e as u32))
                    }
                    Measure::WeightedSize => {
                        let w = WeightFunction { ell: self.ell };
                        if t.is_some() {
                            let d = w.delta_prime(2);
                            ((d as f64).ln(), BigUint::from(d))
                        } else {
                            (0.0, BigUint::one())
                        }
                    }
                };
                if log_cost <= self.log_bound + LOG_EPS && cost <= self.bound {
                    out.push(TwoBlock {
                        sign: s,
                        two: t,
                        log_cost,
                        cost,
                    });
                }
            }
        }
        out
    }

    /// Cost exponent of assigning the odd prime `p` to element index `i`.
    fn exponent(&self, p: u64, i: usize) -> u64 {
        match self.opts.measure {
            Measure::Discriminant => odd_exponent(self.group.order(), self.orders[i], p),
            Measure::WeightedSize => {
                if p == self.ell {
                    2
                } else {
                    1
                }
            }
        }
    }

    fn admissible(&self, p: u64, i: usize) -> bool {
        let m = self.orders[i];
        let prime_to_p = m / p.pow(valuation(m, p));
        if (p - 1) % prime_to_p != 0 {
            return false;
        }
        if let Some(mf) = &self.opts.modulus {
            if let Some(h) = mf.allowed.get(&self.elems[i]) {
                return h.contains(&(p % mf.modulus));
            }
        }
        true
    }

    /// Partition keys: 0 for tuples with no odd prime, else the smallest odd prime.
    pub fn branches(&self) -> Vec<u64> {
        if self.group.is_trivial() {
            return vec![0];
        }
        let min_block = self
            .blocks
            .iter()
            .map(|b| b.log_cost)
            .fold(f64::INFINITY, f64::min);
        let mut out = vec![0];
        for &p in &self.primes {
            if min_block + self.e_min * (p as f64).ln() > self.log_bound + LOG_EPS {
                break;
            }
            out.push(p);
        }
        out
    }

    /// Visits every tuple of the given branch.
    pub fn for_each_in_branch(&self, branch: u64, f: &mut dyn FnMut(&ExtensionTuple)) {
        if self.group.is_trivial() {
            if branch == 0 && !self.opts.surjective_only {
                f(&ExtensionTuple::trivial(self.group.clone()));
            }
            return;
        }
        let mut state = State {
            assigned: Vec::new(),
            rank_memo: std::collections::HashMap::new(),
        };
        for b in &self.blocks {
            if branch == 0 {
                self.visit(b, &mut state, f);
                continue;
            }
            let Some(j) = self.primes.iter().position(|&p| p == branch) else {
                return;
            };
            let p = branch;
            for i in 0..self.elems.len() {
                if !self.admissible(p, i) {
                    continue;
                }
                let lc = b.log_cost + self.exponent(p, i) as f64 * (p as f64).ln();
                if !self.within(lc, b, &[(p, i)]) {
                    continue;
                }
                state.assigned.push((p, i));
                self.dfs(b, j + 1, lc, &mut state, f);
                state.assigned.pop();
            }
        }
    }

    pub fn for_each(&self, f: &mut dyn FnMut(&ExtensionTuple)) {
        for br in self.branches() {
            self.for_each_in_branch(br, f);
        }
    }

    pub fn collect(&self) -> Vec<ExtensionTuple> {
        let mut out = Vec::new();
        self.for_each(&mut |t| out.push(t.clone()));
        out
    }

    fn within(&self, log_cost: f64, b: &TwoBlock, assigned: &[(u64, usize)]) -> bool {
        if log_cost > self.log_bound * (1.0 + LOG_EPS) + LOG_EPS {
            return false;
        }
        if log_cost < self.log_bound * (1.0 - LOG_EPS) - LOG_EPS {
            return true;
        }
        let mut c = b.cost.clone();
        for &(p, i) in assigned {
            c *= BigUint::from(p).pow(self.exponent(p, i) as u32);
        }
        c <= self.bound
    }

    fn dfs(
        &self,
        b: &TwoBlock,
        start: usize,
        log_cost: f64,
        state: &mut State,
        f: &mut dyn FnMut(&ExtensionTuple),
    ) {
        self.visit(b, state, f);
        let need = if self.opts.surjective_only {
            self.missing_rank(b, state)
        } else {
            0
        };
        for j in start..self.primes.len() {
            let p = self.primes[j];
            let lp = (p as f64).ln();
            if log_cost + self.e_min * lp > self.log_bound * (1.0 + LOG_EPS) + LOG_EPS {
                break;
            }
            if need > 0
                && log_cost + self.e_min * need as f64 * lp
                    > self.log_bound * (1.0 + LOG_EPS) + LOG_EPS
            {
                break;
            }
            for i in 0..self.elems.len() {
                if !self.admissible(p, i) {
                    continue;
                }
                let lc = log_cost + self.exponent(p, i) as f64 * lp;
                state.assigned.push((p, i));
                if self.within(lc, b, &state.assigned) {
                    self.dfs(b, j + 1, lc, state, f);
                }
                state.assigned.pop();
            }
        }
    }

    /// `d(A/H)` for `H` the span of the currently used indices.
    fn missing_rank(&self, b: &TwoBlock, state: &mut State) -> u32 {
        let mut used: Vec<usize> = state.assigned.iter().map(|&(_, i)| i).collect();
        used.extend(b.sign);
        used.extend(b.two);
        used.sort_unstable();
        used.dedup();
        if let Some(&r) = state.rank_memo.get(&used) {
            return r;
        }
        let gens: Vec<GroupElement> = used.iter().map(|&i| self.elems[i].clone()).collect();
        let h = self.group.generated(&gens);
        let r = crate::group::quotient_rank(&self.group, &h);
        state.rank_memo.insert(used, r);
        r
    }

    fn visit(&self, b: &TwoBlock, state: &State, f: &mut dyn FnMut(&ExtensionTuple)) {
        let t = self.build(b, &state.assigned);
        if self.accept(&t) {
            f(&t);
        }
    }

    fn build(&self, b: &TwoBlock, assigned: &[(u64, usize)]) -> ExtensionTuple {
        let mut entries: BTreeMap<GroupElement, TupleEntry> = BTreeMap::new();
        if let Some(i) = b.two {
            entries
                .entry(self.elems[i].clone())
                .or_default()
                .primes
                .push(2);
        }
        if let Some(i) = b.sign {
            entries.entry(self.elems[i].clone()).or_default().negative = true;
        }
        for &(p, i) in assigned {
            entries
                .entry(self.elems[i].clone())
                .or_default()
                .primes
                .push(p);
        }
        ExtensionTuple::from_entries_unchecked(self.group.clone(), entries)
    }

    fn accept(&self, t: &ExtensionTuple) -> bool {
        if self.opts.surjective_only && !is_surjective(t) {
            return false;
        }
        if !self.opts.residue_classes.is_empty() {
            let d = WeightFunction { ell: self.ell }.d_ell();
            for (a, &c) in &self.opts.residue_classes {
                let r = t.entry(a).map(|e| e.residue(d)).unwrap_or(1 % d);
                if r != c % d {
                    return false;
                }
            }
        }
        true
    }
}

struct State {
    assigned: Vec<(u64, usize)>,
    rank_memo: std::collections::HashMap<Vec<usize>, u32>,
}

/// Natural log of a big integer.
pub fn big_log(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits < 1000 {
        return x.to_f64().unwrap_or(f64::INFINITY).ln();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_f64().unwrap();
    top.ln() + shift as f64 * 2f64.ln()
}

/// Enumerates all tuples with measure `<= X`, in the depth-first order.
pub fn enumerate_tuples(
    group: Arc<FiniteAbelianGroup>,
    bound: &BigUint,
    opts: EnumOptions,
) -> Vec<ExtensionTuple> {
    TupleEnumerator::new(group, bound, opts).collect()
}

/// Measure of a tuple under the given [`Measure`].
pub fn measure_of(t: &ExtensionTuple, m: Measure) -> BigUint {
    match m {
        Measure::Discriminant => discriminant_unchecked(t).total,
        Measure::WeightedSize => weighted_size(t),
    }
}

/// Second, independent enumeration strategy: loop over squarefree odd radicals
/// `r` with `r^{e_min} <= X`, factor each with a smallest-prime-factor sieve,
/// and try every assignment of its primes to indices.
pub fn enumerate_radical_first(
    group: Arc<FiniteAbelianGroup>,
    bound: &BigUint,
    opts: EnumOptions,
) -> Vec<ExtensionTuple> {
    let en = TupleEnumerator::new(group.clone(), bound, opts.clone());
    if group.is_trivial() {
        return en.collect();
    }
    let rmax = if en.e_min > 0.0 {
        ((en.log_bound / en.e_min).exp() * (1.0 + 1e-9)).floor() as u64
    } else {
        1
    };
    let sieve = crate::arith::SpfSieve::new(rmax.max(1));
    let mut out = Vec::new();
    for r in (1..=rmax).step_by(2) {
        let Some(ps) = sieve.squarefree_factors(r) else {
            continue;
        };
        if let Some(mf) = &opts.modulus {
            if ps.iter().any(|p| mf.modulus % p == 0) {
                continue;
            }
        }
        let choices: Vec<Vec<usize>> = ps
            .iter()
            .map(|&p| {
                (0..en.elems.len())
                    .filter(|&i| en.admissible(p, i))
                    .collect()
            })
            .collect();
        if choices.iter().any(|c| c.is_empty()) {
            continue;
        }
        for b in &en.blocks {
            let mut idx = vec![0usize; ps.len()];
            loop {
                let assigned: Vec<(u64, usize)> = ps
                    .iter()
                    .zip(&idx)
                    .enumerate()
                    .map(|(k, (&p, &c))| (p, choices[k][c]))
                    .collect();
                let t = en.build(b, &assigned);
                if measure_of(&t, opts.measure) <= *bound && en.accept(&t) {
                    out.push(t);
                }
                // odometer
                let mut k = 0;
                while k < idx.len() {
                    idx[k] += 1;
                    if idx[k] < choices[k].len() {
                        break;
                    }
                    idx[k] = 0;
                    k += 1;
                }
                if k == idx.len() {
                    break;
                }
            }
        }
    }
    out
}

/// Sort key used for all record outputs: `(disc, serialization)`.
pub fn sort_by_disc(tuples: &mut [ExtensionTuple]) {
    tuples.sort_by_cached_key(|t| (discriminant_unchecked(t).total, t.serialize()));
}

/// Number of divisors-free helper for tests: `gcd` on big values.
pub fn coprime(a: u64, b: u64) -> bool {
    a.gcd(&b) == 1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grp(s: &str) -> Arc<FiniteAbelianGroup> {
        Arc::new(FiniteAbelianGroup::parse(s).unwrap())
    }

    fn el(a: &FiniteAbelianGroup, c: &[i64]) -> GroupElement {
        a.element(c).unwrap()
    }

    #[test]
    fn membership_rules() {
        let a = grp("3.3");
        assert!(
            ExtensionTuple::new(a.clone(), &[(el(&a, &[1, 0]), 7), (el(&a, &[0, 1]), 13)]).is_ok()
        );
        // 5 is not 1 mod 3
        assert!(ExtensionTuple::new(a.clone(), &[(el(&a, &[1, 0]), 5)]).is_err());
        // 3 is always allowed for order 3
        assert!(ExtensionTuple::new(a.clone(), &[(el(&a, &[1, 0]), 3)]).is_ok());
        // negative at order 3
        assert!(ExtensionTuple::new(a.clone(), &[(el(&a, &[1, 0]), -7)]).is_err());
        // not coprime
        assert!(
            ExtensionTuple::new(a.clone(), &[(el(&a, &[1, 0]), 7), (el(&a, &[0, 1]), 7)]).is_err()
        );
        let b = grp("2.2");
        assert!(
            ExtensionTuple::new(b.clone(), &[(el(&b, &[1, 0]), -1), (el(&b, &[0, 1]), -3)])
                .is_err()
        );
        assert!(ExtensionTuple::new(b.clone(), &[(el(&b, &[1, 0]), 12)]).is_err());
        let c = grp("4");
        assert!(ExtensionTuple::new(c.clone(), &[(el(&c, &[1]), 5)]).is_ok());
        assert!(ExtensionTuple::new(c.clone(), &[(el(&c, &[1]), 7)]).is_err());
        assert!(ExtensionTuple::new(c.clone(), &[(el(&c, &[1]), 2)]).is_ok());
    }

    #[test]
    fn surjectivity_examples() {
        let a = grp("3.3");
        let t = ExtensionTuple::new(a.clone(), &[(el(&a, &[1, 0]), 7)]).unwrap();
        assert!(!is_surjective(&t));
        let t =
            ExtensionTuple::new(a.clone(), &[(el(&a, &[1, 0]), 7), (el(&a, &[0, 1]), 13)]).unwrap();
        assert!(is_surjective(&t));
        let c = grp("4");
        let t = ExtensionTuple::new(c.clone(), &[(el(&c, &[2]), 5)]).unwrap();
        assert!(!is_surjective(&t));
    }

    #[test]
    fn serialization_round_trip() {
        let a = grp("2.3.3");
        let t = ExtensionTuple::new(
            a.clone(),
            &[
                (el(&a, &[0, 1, 0]), 7),
                (el(&a, &[1, 0, 0]), -6),
                (el(&a, &[1, 0, 1]), 13),
            ],
        )
        .unwrap();
        let s = t.serialize();
        assert_eq!(s, "0.1.0:7;1.0.0:-6;1.0.1:13");
        assert_eq!(ExtensionTuple::parse(a, &s).unwrap(), t);
    }

    #[test]
    fn disc_examples() {
        let a = grp("3.3");
        let t =
            ExtensionTuple::new(a.clone(), &[(el(&a, &[1, 0]), 7), (el(&a, &[0, 1]), 13)]).unwrap();
        let d = discriminant(&t).unwrap();
        assert_eq!(d.total, BigUint::from(91u32).pow(6));
        let c = grp("2");
        let g = el(&c, &[1]);
        for (v, disc) in [
            (3i64, 3u64),
            (5, 5),
            (-1, 4),
            (-3, 12),
            (2, 8),
            (-2, 8),
            (6, 24),
            (-6, 24),
        ] {
            let t = ExtensionTuple::new(c.clone(), &[(g.clone(), v)]).unwrap();
            assert_eq!(
                discriminant(&t).unwrap().total,
                BigUint::from(disc),
                "v = {v}"
            );
            assert_eq!(quadratic_discriminant(v).unsigned_abs(), disc);
        }
    }

    #[test]
    fn quadratic_parameters() {
        for (w, v, d) in [
            (-1i64, -1i64, -4i64),
            (-3, 3, -3),
            (3, -3, 12),
            (2, 2, 8),
            (-2, -2, -8),
            (5, 5, 5),
            (-5, -5, -20),
            (6, -6, 24),
            (-6, 6, -24),
        ] {
            assert_eq!(quadratic_parameter(w).unwrap(), v, "w = {w}");
            assert_eq!(quadratic_discriminant(v), d, "v = {v}");
        }
    }

    #[test]
    fn weighted_size_examples() {
        let a = grp("3.3");
        let x = el(&a, &[1, 0]);
        let t = ExtensionTuple::new(a.clone(), &[(x.clone(), 21)]).unwrap();
        assert_eq!(weighted_size(&t), BigUint::from(63u32));
        let t = ExtensionTuple::new(a.clone(), &[(x, 7), (el(&a, &[0, 1]), 13)]).unwrap();
        assert_eq!(weighted_size(&t), BigUint::from(91u32));
        let b = grp("2.2");
        assert_eq!(weighted_size(&ExtensionTuple::trivial(b)), BigUint::one());
    }

    #[test]
    fn epis_examples() {
        assert_eq!(epis_to_fields(96, &grp("3.3")).unwrap(), 2);
        assert_eq!(epis_to_fields(0, &grp("5")).unwrap(), 0);
        assert_eq!(epis_to_fields(48, &grp("2.3.3")).unwrap(), 1);
        assert!(epis_to_fields(47, &grp("2.3.3")).is_err());
    }

    #[test]
    fn enumeration_small_cases() {
        let a = grp("3.3");
        let x = BigUint::from(7u32).pow(12) - 1u32;
        let all = enumerate_tuples(a.clone(), &x, EnumOptions::default());
        assert!(all.iter().all(|t| !is_surjective(t)));
        assert!(enumerate_tuples(a.clone(), &x, EnumOptions::surjective()).is_empty());
        let x = BigUint::from(91u32).pow(6);
        let s = enumerate_tuples(a.clone(), &x, EnumOptions::surjective());
        assert_eq!(s.len(), 96);
        let c = grp("4.9");
        let one = enumerate_tuples(c, &BigUint::one(), EnumOptions::surjective());
        assert!(one.is_empty());
    }
}
