/// Log-acceptance of exchanging the states of replicas at `beta_a` and
/// `beta_b` (same penalty): `(beta_b - beta_a)(E_b - E_a)`.
#[inline]
pub fn beta_swap_delta(beta_a: f64, beta_b: f64, e_a: f64, e_b: f64) -> f64 {
    (beta_b - beta_a) * (e_b - e_a)
}

/// The same quantity from temperature-weighted energies `beta_r E_r`, the only
/// values the replica modules expose.
#[inline]
pub fn beta_swap_delta_premultiplied(beta_a: f64, beta_b: f64, beta_e_a: f64, beta_e_b: f64) -> f64 {
    (1.0 - beta_a / beta_b) * beta_e_b + (1.0 - beta_b / beta_a) * beta_e_a
}

/// Log-acceptance of exchanging states between penalties `p_a` and `p_b` at a
/// shared `beta`. With `H = E_problem + P * E_copy` the problem terms cancel,
/// leaving `beta (P_b - P_a)(Ecopy_b - Ecopy_a)`.
#[inline]
pub fn p_swap_delta(beta: f64, p_a: f64, p_b: f64, e_copy_a: f64, e_copy_b: f64) -> f64 {
    beta * (p_b - p_a) * (e_copy_b - e_copy_a)
}

/// `min(1, e^delta)`.
#[inline]
pub fn acceptance(delta: f64) -> f64 {
    if delta >= 0.0 {
        1.0
    } else {
        delta.exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::RandomStream;

    #[test]
    fn equal_energies_always_accept() {
        assert_eq!(beta_swap_delta(0.3, 2.0, -4.0, -4.0), 0.0);
        assert_eq!(acceptance(0.0), 1.0);
        assert_eq!(p_swap_delta(1.0, 0.5, 1.5, -3.0, -3.0), 0.0);
    }

    #[test]
    fn hand_arithmetic() {
        assert_eq!(beta_swap_delta(1.0, 2.0, -5.0, -3.0), 2.0);
        assert_eq!(p_swap_delta(1.0, 1.0, 2.0, -10.0, -8.0), 2.0);
    }

    #[test]
    fn premultiplied_form_matches_direct() {
        let mut rs = RandomStream::standard(8);
        for _ in 0..10_000 {
            let ba = 0.01 + 10.0 * rs.unit();
            let bb = 0.01 + 10.0 * rs.unit();
            let ea = 50.0 * rs.uniform();
            let eb = 50.0 * rs.uniform();
            let direct = beta_swap_delta(ba, bb, ea, eb);
            let expanded = beta_swap_delta_premultiplied(ba, bb, ba * ea, bb * eb);
            assert!((direct - expanded).abs() <= 1e-9 * (1.0 + direct.abs()));
        }
    }

    #[test]
    fn p_delta_is_generic_exchange_at_equal_beta() {
        let mut rs = RandomStream::standard(9);
        for _ in 0..1000 {
            let beta = 0.1 + 5.0 * rs.unit();
            let (pa, pb) = (3.0 * rs.unit(), 3.0 * rs.unit());
            let (prob_a, prob_b) = (20.0 * rs.uniform(), 20.0 * rs.uniform());
            let (copy_a, copy_b) = (10.0 * rs.uniform(), 10.0 * rs.uniform());
            let h = |p: f64, prob: f64, copy: f64| prob + p * copy;
            let generic = beta * h(pa, prob_a, copy_a) + beta * h(pb, prob_b, copy_b)
                - beta * h(pa, prob_b, copy_b)
                - beta * h(pb, prob_a, copy_a);
            let got = p_swap_delta(beta, pa, pb, copy_a, copy_b);
            assert!((generic - got).abs() < 1e-9);
        }
    }
}
