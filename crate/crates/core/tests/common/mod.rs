//! Dense integer lattice oracle for the integration tests.
//!
//! Independent of the sparse reductions in the library: columns are reduced
//! row by row with Euclid's algorithm on exact `i128` entries, and every
//! operation is overflow-checked.

#![allow(dead_code)]

use robzero::ring::Integer;

pub type Vector = Vec<i128>;

fn checked(x: Option<i128>) -> i128 {
    x.expect("i128 overflow in lattice oracle")
}

/// `dst -= q * src` over all coordinates.
fn sub_scaled(dst: &mut [i128], src: &[i128], q: i128) {
    if q == 0 {
        return;
    }
    for (d, s) in dst.iter_mut().zip(src) {
        if *s != 0 {
            *d = checked(d.checked_sub(checked(s.checked_mul(q))));
        }
    }
}

/// Column echelon form over the first `rows` coordinates. Extra
/// coordinates past `rows` ride along (a transform, when present).
/// Returns the pivot columns per row and the columns that became zero.
fn echelon(rows: usize, mut active: Vec<Vector>) -> (Vec<Option<Vector>>, Vec<Vector>) {
    let mut pivots = vec![None; rows];
    for (r, slot) in pivots.iter_mut().enumerate() {
        loop {
            let hits: Vec<usize> = (0..active.len()).filter(|&j| active[j][r] != 0).collect();
            if hits.len() <= 1 {
                if let Some(&j) = hits.first() {
                    let mut p = active.swap_remove(j);
                    if p[r] < 0 {
                        p.iter_mut().for_each(|x| *x = -*x);
                    }
                    *slot = Some(p);
                }
                break;
            }
            let best = *hits
                .iter()
                .min_by_key(|&&j| active[j][r].unsigned_abs())
                .unwrap();
            let pivot = active[best].clone();
            for &j in &hits {
                if j != best {
                    let q = active[j][r] / pivot[r];
                    sub_scaled(&mut active[j], &pivot, q);
                }
            }
        }
    }
    (pivots, active)
}

/// A sublattice of `Z^rows` given by generators.
pub struct Lattice {
    pivots: Vec<Option<Vector>>,
}

impl Lattice {
    pub fn from_generators(rows: usize, gens: &[Vector]) -> Self {
        let active = gens
            .iter()
            .inspect(|g| assert_eq!(g.len(), rows))
            .filter(|g| g.iter().any(|&x| x != 0))
            .cloned()
            .collect();
        Lattice {
            pivots: echelon(rows, active).0,
        }
    }

    pub fn rank(&self) -> usize {
        self.pivots.iter().flatten().count()
    }

    pub fn contains(&self, v: &[i128]) -> bool {
        assert_eq!(v.len(), self.pivots.len());
        let mut b = v.to_vec();
        for r in 0..b.len() {
            if b[r] == 0 {
                continue;
            }
            match &self.pivots[r] {
                Some(p) if b[r] % p[r] == 0 => {
                    let q = b[r] / p[r];
                    sub_scaled(&mut b, p, q);
                }
                _ => return false,
            }
        }
        true
    }
}

/// Basis of `{x : sum_j x_j cols[j] = 0}` in `Z^cols.len()`.
pub fn kernel_basis(rows: usize, cols: &[Vector]) -> Vec<Vector> {
    let k = cols.len();
    let augmented = cols
        .iter()
        .enumerate()
        .map(|(j, c)| {
            assert_eq!(c.len(), rows);
            let mut v = c.clone();
            v.extend((0..k).map(|i| i128::from(i == j)));
            v
        })
        .collect();
    let (_, zero) = echelon(rows, augmented);
    zero.into_iter().map(|v| v[rows..].to_vec()).collect()
}

/// `sum_j x_j cols[j]`.
pub fn combine(rows: usize, cols: &[Vector], x: &[i128]) -> Vector {
    let mut out = vec![0i128; rows];
    for (c, &xj) in cols.iter().zip(x) {
        sub_scaled(&mut out, c, -xj);
    }
    out
}

pub fn to_i128(c: &Integer) -> i128 {
    i128::try_from(c.to_bigint()).expect("coefficient fits in i128")
}

pub fn integer(v: i128) -> Integer {
    Integer::from(i64::try_from(v).expect("fits in i64"))
}
