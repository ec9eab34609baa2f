//! Exact two-sided binomial test against a fair proportion.

use std::sync::OnceLock;

use crate::scalar::Scalar;

// Largest n whose full tail sum fits in u128 (sum <= 2^n).
const EXACT_MAX_N: u64 = 125;

/// Two-sided p-value of `k` successes in `n` trials under `Binomial(n, 1/2)`.
///
/// Sums the probability of every outcome no more likely than `k`. Under a
/// fair coin those outcomes are the two tails beyond `min(k, n - k)`, so the
/// p-value is twice one tail, capped at 1. Computed with exact integers up
/// to `n = 125` and in log space beyond. `n = 0` gives 1.
pub fn binom_test_two_sided<T: Scalar>(k: u64, n: u64) -> T {
    assert!(k <= n, "binomial test needs k <= n (k={k}, n={n})");
    let p = if n <= EXACT_MAX_N {
        exact_table()[table_index(k, n)]
    } else {
        log_space(k, n)
    };
    T::of(p)
}

fn table_index(k: u64, n: u64) -> usize {
    (n * (n + 1) / 2 + k) as usize
}

fn exact_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut out = Vec::with_capacity(table_index(0, EXACT_MAX_N + 1));
        for n in 0..=EXACT_MAX_N {
            // Row of binomial coefficients C(n, 0..=n) and prefix sums.
            let mut coeff = 1u128;
            let mut prefix = Vec::with_capacity(n as usize + 1);
            let mut acc = 0u128;
            for x in 0..=n {
                acc += coeff;
                prefix.push(acc);
                coeff = coeff * u128::from(n - x) / u128::from(x + 1);
            }
            for k in 0..=n {
                let m = k.min(n - k);
                let p = if 2 * m == n {
                    1.0
                } else {
                    // 2 * tail / 2^n; scaling by a power of two is exact.
                    (prefix[m as usize] as f64) * 2f64.powi(1 - n as i32)
                };
                out.push(p.min(1.0));
            }
        }
        out
    })
}

fn log_space(k: u64, n: u64) -> f64 {
    let m = k.min(n - k);
    if 2 * m == n {
        return 1.0;
    }
    let log_half_n = -(n as f64) * std::f64::consts::LN_2;
    // Walk the tail from its largest term outward: C(n, x-1) = C(n, x) * x / (n - x + 1).
    let mut term = (statrs::function::factorial::ln_binomial(n, m) + log_half_n).exp();
    let mut tail = 0.0;
    let mut x = m;
    loop {
        tail += term;
        if x == 0 || term < tail * 1e-17 {
            break;
        }
        term *= x as f64 / (n - x + 1) as f64;
        x -= 1;
    }
    (2.0 * tail).min(1.0)
}
