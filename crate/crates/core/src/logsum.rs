/// `ln(exp(a) + exp(b))` without overflow; `-inf` is the additive identity.
#[inline(always)]
pub(crate) fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    if a > b {
        a + (b - a).exp().ln_1p()
    } else {
        b + (a - b).exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_symmetry() {
        assert_eq!(log_add(f64::NEG_INFINITY, 1.5), 1.5);
        assert_eq!(log_add(1.5, f64::NEG_INFINITY), 1.5);
        assert_eq!(log_add(f64::NEG_INFINITY, f64::NEG_INFINITY), f64::NEG_INFINITY);
        assert_eq!(log_add(0.3, -2.0), log_add(-2.0, 0.3));
    }

    #[test]
    fn matches_direct_sum() {
        let got = log_add(0.5, 2.0);
        let want = (0.5f64.exp() + 2.0f64.exp()).ln();
        assert!((got - want).abs() < 1e-15);
        // Far below f64 range in the linear domain.
        let got = log_add(-1000.0, -1000.0);
        assert!((got - (-1000.0 + std::f64::consts::LN_2)).abs() < 1e-12);
    }
}
