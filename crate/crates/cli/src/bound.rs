//! Parsing of discriminant bounds: `1000`, `1e15`, `10^15`, `7^12`, `2.5e9`.

use num_bigint::BigUint;
use num_traits::Zero;

pub fn parse_bound(s: &str) -> Result<BigUint, String> {
    let s = s.trim().replace('_', "");
    let err = || format!("invalid bound `{s}`: expected an integer, `AeB` or `B^E`, at least 1");
    let x = if let Some((b, e)) = s.split_once('^') {
        let b: BigUint = b.parse().map_err(|_| err())?;
        let e: u32 = e.parse().map_err(|_| err())?;
        b.pow(e)
    } else if let Some((m, e)) = s.split_once(['e', 'E']) {
        let e: u32 = e.parse().map_err(|_| err())?;
        let (int, frac) = m.split_once('.').unwrap_or((m, ""));
        if frac.len() as u32 > e || int.is_empty() && frac.is_empty() {
            return Err(err());
        }
        let digits: BigUint = format!("{int}{frac}").parse().map_err(|_| err())?;
        digits * BigUint::from(10u32).pow(e - frac.len() as u32)
    } else {
        s.parse().map_err(|_| err())?
    };
    if x.is_zero() {
        return Err(err());
    }
    Ok(x)
}
