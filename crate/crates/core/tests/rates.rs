use manoma_core::channel::CVec;
use manoma_core::ga::{gene_to_matrix, Gene};
use manoma_core::rates::{achievable_rate, sinr_cross, sinr_own, sum_rate, upsilon_from_table, gain_table, DecodingIndicatorMatrix};
use num_complex::Complex64;
use proptest::prelude::*;

fn cvec(parts: &[(f64, f64)]) -> CVec {
    CVec::from_iterator(parts.len(), parts.iter().map(|&(r, i)| Complex64::new(r, i)))
}

fn vectors(k: usize, m: usize) -> impl Strategy<Value = Vec<CVec>> {
    prop::collection::vec(prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), m), k)
        .prop_map(|v| v.iter().map(|p| cvec(p)).collect())
}

fn instance() -> impl Strategy<Value = (Vec<CVec>, Vec<CVec>, DecodingIndicatorMatrix, Vec<f64>)> {
    (1usize..5, 1usize..4).prop_flat_map(|(k, m)| {
        let bits = k * (k - 1) / 2;
        (
            vectors(k, m),
            vectors(k, m),
            prop::collection::vec(any::<bool>(), bits),
            prop::collection::vec(1e-3..1.0f64, k),
        )
            .prop_map(move |(h, w, g, n)| (h, w, gene_to_matrix(&Gene(g), k).unwrap(), n))
    })
}

proptest! {
    #[test]
    fn noise_growth_never_raises_rates((h, w, pi, noise) in instance(), k_pick in 0usize..4, scale in 1.0..10.0f64) {
        let k = k_pick % noise.len();
        let mut louder = noise.clone();
        louder[k] *= scale;
        prop_assert!(sinr_own(&h, &w, &pi, &louder, k) <= sinr_own(&h, &w, &pi, &noise, k) * (1.0 + 1e-12));
        for j in 0..k {
            if pi.get(j, k) {
                let a = sinr_cross(&h, &w, &pi, &louder, j, k).unwrap();
                let b = sinr_cross(&h, &w, &pi, &noise, j, k).unwrap();
                prop_assert!(a <= b * (1.0 + 1e-12));
            }
        }
        prop_assert!(sum_rate(&h, &w, &pi, &louder) <= sum_rate(&h, &w, &pi, &noise) + 1e-12);
    }

    #[test]
    fn rate_bounded_by_own_decoding((h, w, pi, noise) in instance()) {
        let table = gain_table(&h, &w);
        for k in 0..noise.len() {
            let r = achievable_rate(&h, &w, &pi, &noise, k);
            prop_assert!(r <= (1.0 + sinr_own(&h, &w, &pi, &noise, k)).log2() + 1e-12);
            for i in k..noise.len() {
                prop_assert!(upsilon_from_table(&table, &pi, &noise, k, i) > 0.0);
            }
        }
    }

    #[test]
    fn last_user_under_full_sic_is_interference_free((h, w, _pi, noise) in instance()) {
        let k = noise.len();
        let pi = DecodingIndicatorMatrix::full(k);
        let s = h[k - 1].iter().zip(w[k - 1].iter()).map(|(a, b)| a.conj() * b).sum::<Complex64>().norm_sqr();
        let expect = s / noise[k - 1];
        prop_assert!((sinr_own(&h, &w, &pi, &noise, k - 1) - expect).abs() <= 1e-12 * expect.max(1e-300));
    }
}

#[test]
fn structure_violations_are_rejected() {
    assert!(DecodingIndicatorMatrix::from_rows(&[vec![1, 0], vec![1, 1]]).is_err());
    assert!(DecodingIndicatorMatrix::from_rows(&[vec![0, 1], vec![0, 1]]).is_err());
    assert!(DecodingIndicatorMatrix::from_rows(&[vec![1, 2], vec![0, 1]]).is_err());
    assert!(DecodingIndicatorMatrix::from_rows(&[vec![1, 1], vec![0, 1]]).is_ok());
}
