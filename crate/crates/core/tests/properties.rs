mod common;

use num_bigint::BigInt;
use proptest::prelude::*;

use common::{combine, to_i128, Lattice};
use robzero::domain::{Cochain, GridDomain};
use robzero::fields::{decode_field, encode_field, Encoding, Norm, SampledField};
use robzero::filtration::{Filtration, Mode};
use robzero::obstruction::{cup_i, robustness_report, Options, Persistence};
use robzero::par::Parallelism;
use robzero::reduction::{earliest_solution, normalize, Column};
use robzero::ring::{Coefficient, Integer};

fn int(v: i64) -> Integer {
    Integer::from(v)
}

fn big(v: &Integer) -> BigInt {
    v.to_bigint()
}

fn column(entries: &[i64]) -> Column<u32, Integer> {
    normalize(
        entries
            .iter()
            .enumerate()
            .map(|(i, &x)| (i as u32, int(x)))
            .collect(),
    )
}

fn cochain(dom: &GridDomain, k: usize, values: &[i64]) -> Cochain<Integer> {
    let mut y = Cochain::zero(k);
    for (s, &v) in dom.simplices(k).unwrap().zip(values.iter().cycle()) {
        y.add_at(&s, &int(v));
    }
    y.prune();
    y
}

fn small_field() -> impl Strategy<Value = SampledField> {
    (2usize..=3, 4u32..=6, 1usize..=3).prop_flat_map(|(m, g, n)| {
        let count = (g as usize).pow(m as u32) * n;
        prop::collection::vec(-2.0f64..2.0, count).prop_map(move |values| {
            let dom = GridDomain::cube(m, g).unwrap();
            SampledField::new(dom, n, values, 0.5, Norm::Inf).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn integer_arithmetic_matches_bigint(a in any::<i64>(), b in any::<i64>(), c in any::<i64>()) {
        let (x, y, z) = (int(a), int(b), int(c));
        prop_assert_eq!(big(&x.add(&y)), BigInt::from(a) + BigInt::from(b));
        prop_assert_eq!(big(&x.mul(&y).mul(&z)), BigInt::from(a) * BigInt::from(b) * BigInt::from(c));
        prop_assert_eq!(big(&x.sub(&y)), BigInt::from(a) - BigInt::from(b));
        prop_assert!(x.add(&y).sub(&y) == x);
    }

    #[test]
    fn bezout_is_unimodular(p in -1000i64..1000, q in -1000i64..1000) {
        prop_assume!(p != 0);
        let [a, b, c, d] = Integer::bezout(&int(p), &int(q));
        let (a, b, c, d) = (to_i128(&a), to_i128(&b), to_i128(&c), to_i128(&d));
        let (p, q) = (p as i128, q as i128);
        let g = num_integer::Integer::gcd(&p, &q);
        prop_assert_eq!((a * p + b * q).abs(), g);
        prop_assert_eq!(c * p + d * q, 0);
        prop_assert_eq!((a * d - b * c).abs(), 1);
    }

    #[test]
    fn earliest_solution_is_earliest(
        m in prop::collection::vec(prop::collection::vec(-4i64..=4, 5), 1..7),
        x in prop::collection::vec(-3i64..=3, 7),
    ) {
        let rows = 5;
        let dense: Vec<Vec<i128>> = m.iter().map(|c| c.iter().map(|&v| v as i128).collect()).collect();
        let x: Vec<i128> = x[..m.len()].iter().map(|&v| v as i128).collect();
        let a = combine(rows, &dense, &x);
        let cols: Vec<_> = m.iter().map(|c| column(c)).collect();
        let a64: Vec<i64> = a.iter().map(|&v| v as i64).collect();
        let sol = earliest_solution(&cols, &column(&a64)).expect("a is in the span");
        let mut got = vec![0i128; m.len()];
        for (j, c) in &sol.x {
            got[*j as usize] = to_i128(c);
        }
        prop_assert_eq!(combine(rows, &dense, &got), a.clone());
        match sol.last {
            None => prop_assert!(a.iter().all(|&v| v == 0)),
            Some(l) => {
                let l = l as usize;
                prop_assert!(Lattice::from_generators(rows, &dense[..=l]).contains(&a));
                if l > 0 {
                    prop_assert!(!Lattice::from_generators(rows, &dense[..l]).contains(&a));
                }
            }
        }
    }

    #[test]
    fn encodings_round_trip(field in small_field()) {
        for enc in [Encoding::Text, Encoding::Binary] {
            let back = decode_field(&encode_field(&field, enc)).unwrap();
            prop_assert_eq!(&back, &field);
        }
    }

    #[test]
    fn coface_ranks_do_not_exceed_face_ranks(field in small_field()) {
        let dom = &field.domain;
        for mode in [Mode::Simplicial, Mode::Cubical] {
            let filt = Filtration::build(&field, mode, Parallelism::Sequential);
            for s in dom.simplices(1).unwrap() {
                let r = filt.simplex_rank(dom, &s);
                for (t, _) in s.cofaces(dom) {
                    prop_assert!(filt.simplex_rank(dom, &t) <= r);
                }
            }
            for c in dom.cells(1) {
                let r = filt.cell_rank(dom, &c);
                for (t, _) in c.coboundary(dom) {
                    prop_assert!(filt.cell_rank(dom, &t) <= r);
                }
            }
        }
    }

    #[test]
    fn coboundary_squares_to_zero(values in prop::collection::vec(-3i64..=3, 1..40), k in 0usize..2) {
        for dom in [GridDomain::cube(3, 3).unwrap(), GridDomain::torus(3, 3).unwrap()] {
            let y = cochain(&dom, k, &values);
            prop_assert!(y.coboundary(&dom).unwrap().coboundary(&dom).unwrap().is_zero());
        }
    }

    #[test]
    fn cup_product_is_a_derivation(
        u in prop::collection::vec(-3i64..=3, 1..30),
        w in prop::collection::vec(-3i64..=3, 1..30),
        shift in 0u64..27,
    ) {
        // d(u v) = du v + (-1)^p u dv for any vertex order
        let dom = GridDomain::cube(3, 3).unwrap();
        let order = |v: u32| (v as u64 * 7 + shift) % 27;
        for p in 0..2 {
            let a = cochain(&dom, p, &u);
            let b = cochain(&dom, 1, &w);
            let lhs = cup_i(&a, &b, 0, &dom, &order).unwrap().coboundary(&dom).unwrap();
            let first = cup_i(&a.coboundary(&dom).unwrap(), &b, 0, &dom, &order).unwrap();
            let second = cup_i(&a, &b.coboundary(&dom).unwrap(), 0, &dom, &order).unwrap();
            let rhs = if p == 0 {
                first.sub(&Cochain::zero(p + 2).sub(&second))
            } else {
                first.sub(&second)
            };
            prop_assert!(lhs.sub(&rhs).is_zero());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn reported_levels_are_ordered(field in small_field()) {
        let opts = Options { par: Parallelism::Sequential, ..Options::default() };
        let Ok(r) = robustness_report(&field, &opts) else {
            return Ok(());
        };
        let value = |p: Persistence| match p {
            Persistence::BelowR0 => Some(r.r0_level),
            other => other.value(),
        };
        prop_assert!(r.r0 <= r.r0_level);
        if let (Some(r1), Some(r2)) = (value(r.r1), r.r2.and_then(value)) {
            prop_assert!(r.r0_level <= r1 && r1 <= r2);
        }
        if let (Some(lb), Some(ub)) = (r.lower_bound, r.upper_bound) {
            prop_assert!(lb < ub);
        }
        prop_assert!(!(r.lower_bound.is_some() && r.nonexistence_robustness.is_some()));
    }
}
