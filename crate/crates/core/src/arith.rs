//! Elementary number theory on machine integers: modular powers, primality,
//! sieves, factorization, primitive roots and small discrete logarithms.

use num_integer::Integer;

pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Reduces a signed integer into `[0, m)`.
pub fn rem_euclid_u(x: i128, m: u64) -> u64 {
    x.rem_euclid(m as i128) as u64
}

/// Deterministic Miller-Rabin for all `u64`.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n % p == 0 {
            return n == p;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Factorization by trial division, as `(prime, exponent)` pairs in ascending order.
pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2u64;
    while p * p <= n {
        if n % p == 0 {
            let mut e = 0;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

/// Returns `Some((p, k))` when `n = p^k` with `p` prime and `k >= 1`.
pub fn prime_power(n: u64) -> Option<(u64, u32)> {
    match factorize(n).as_slice() {
        [(p, k)] => Some((*p, *k)),
        _ => None,
    }
}

pub fn euler_phi(n: u64) -> u64 {
    factorize(n)
        .into_iter()
        .fold(n, |acc, (p, _)| acc / p * (p - 1))
}

pub fn lcm(a: u64, b: u64) -> u64 {
    a.lcm(&b)
}

/// p-adic valuation of a nonzero integer.
pub fn valuation(mut n: u64, p: u64) -> u32 {
    let mut v = 0;
    while n != 0 && n % p == 0 {
        n /= p;
        v += 1;
    }
    v
}

/// All primes `<= n` by an odd-only sieve of Eratosthenes.
pub fn primes_up_to(n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    for_each_prime(n, |p| out.push(p));
    out
}

/// Calls `f` on every prime `<= n` in ascending order using a segmented sieve,
/// so memory stays at O(sqrt n).
pub fn for_each_prime(n: u64, mut f: impl FnMut(u64)) {
    if n < 2 {
        return;
    }
    f(2);
    if n < 3 {
        return;
    }
    let root = (n as f64).sqrt() as u64 + 1;
    let base = small_odd_primes(root);
    const SEG: u64 = 1 << 18;
    let mut lo = 3u64;
    let mut seg = vec![true; SEG as usize];
    while lo <= n {
        let hi = (lo + 2 * SEG).min(n + 1);
        // index i represents lo + 2i
        let len = ((hi - lo + 1) / 2) as usize;
        seg[..len].iter_mut().for_each(|s| *s = true);
        for &p in &base {
            if p * p >= hi {
                break;
            }
            let mut start = (lo.div_ceil(p) * p).max(p * p);
            if start % 2 == 0 {
                start += p;
            }
            let mut j = start;
            while j < hi {
                seg[((j - lo) / 2) as usize] = false;
                j += 2 * p;
            }
        }
        for (i, &is_p) in seg[..len].iter().enumerate() {
            let v = lo + 2 * i as u64;
            if is_p && v <= n {
                f(v);
            }
        }
        lo = hi | 1;
    }
}

fn small_odd_primes(n: u64) -> Vec<u64> {
    let n = n as usize;
    let mut comp = vec![false; n + 1];
    let mut out = Vec::new();
    for i in 3..=n {
        if i % 2 == 1 && !comp[i] {
            out.push(i as u64);
            let mut j = i * i;
            while j <= n {
                comp[j] = true;
                j += 2 * i;
            }
        }
    }
    out
}

/// Smallest-prime-factor table for `0..=n`.
#[derive(Debug, Clone)]
pub struct SpfSieve {
    spf: Vec<u32>,
}

impl SpfSieve {
    pub fn new(n: u64) -> Self {
        let n = n as usize;
        let mut spf = vec![0u32; n + 1];
        for i in 2..=n {
            if spf[i] == 0 {
                let mut j = i;
                while j <= n {
                    if spf[j] == 0 {
                        spf[j] = i as u32;
                    }
                    j += i;
                }
            }
        }
        Self { spf }
    }

    pub fn limit(&self) -> u64 {
        self.spf.len() as u64 - 1
    }

    /// Distinct prime factors of a squarefree `n`, ascending; `None` if `n` is not squarefree.
    pub fn squarefree_factors(&self, mut n: u64) -> Option<Vec<u64>> {
        let mut out = Vec::new();
        while n > 1 {
            let p = self.spf[n as usize] as u64;
            n /= p;
            if n % p == 0 {
                return None;
            }
            out.push(p);
        }
        Some(out)
    }
}

/// Least generator of `(Z/p^2)^x` for an odd prime `p`; it generates `(Z/p^k)^x` for every `k`.
pub fn least_primitive_root_sq(p: u64) -> u64 {
    assert!(p > 2 && is_prime(p), "odd prime required");
    let fac = factorize(p - 1);
    let p2 = p * p;
    (2..p)
        .find(|&g| {
            fac.iter().all(|&(q, _)| pow_mod(g, (p - 1) / q, p) != 1) && pow_mod(g, p - 1, p2) != 1
        })
        .expect("primitive root exists")
}

/// Least primitive root modulo an odd prime.
pub fn least_primitive_root(p: u64) -> u64 {
    let fac = factorize(p - 1);
    (1..p)
        .find(|&g| fac.iter().all(|&(q, _)| pow_mod(g, (p - 1) / q, p) != 1) || p == 2)
        .expect("primitive root exists")
}

/// Baby-step giant-step: smallest `e` in `[0, order)` with `g^e = x (mod m)`.
pub fn bsgs(g: u64, x: u64, m: u64, order: u64) -> Option<u64> {
    let step = (order as f64).sqrt().ceil() as u64 + 1;
    let mut table = std::collections::HashMap::with_capacity(step as usize);
    let mut cur = 1 % m;
    for j in 0..step {
        table.entry(cur).or_insert(j);
        cur = mul_mod(cur, g, m);
    }
    // g^{-step}
    let inv = pow_mod(g, order - (step % order), m);
    let mut y = x % m;
    for i in 0..=step {
        if let Some(&j) = table.get(&y) {
            let e = i * step + j;
            if e < order {
                return Some(e);
            }
        }
        y = mul_mod(y, inv, m);
    }
    None
}

/// Exponent `e mod d` with `x = g^e` in the cyclic group `(Z/m)^x` of order `n`,
/// for `d | n`: projects onto the order-`d` quotient and solves there.
pub fn dlog_mod(g: u64, x: u64, m: u64, n: u64, d: u64) -> u64 {
    debug_assert_eq!(n % d, 0);
    if d == 1 {
        return 0;
    }
    let h = pow_mod(g, n / d, m);
    let y = pow_mod(x, n / d, m);
    if d <= 64 {
        let mut cur = 1 % m;
        for e in 0..d {
            if cur == y {
                return e;
            }
            cur = mul_mod(cur, h, m);
        }
        panic!("element outside the cyclic group");
    }
    bsgs(h, y, m, d).expect("element outside the cyclic group")
}

/// Writes an odd `x` modulo `2^(j+2)` as `±5^k` and returns `(k mod 2^j, x = 3 mod 4)`.
pub fn two_adic_log(x: u64, j: u32) -> (u64, bool) {
    let m = 1u64 << (j + 2);
    let mut s = x % m;
    let neg = s % 4 == 3;
    if neg {
        s = m - s;
    }
    let mut cur = 1 % m;
    for k in 0..(1u64 << j) {
        if cur == s % m {
            return (k, neg);
        }
        cur = cur * 5 % m;
    }
    unreachable!("odd residue not of the form ±5^k")
}
