//! Eilenberg-Zilber maps between cubical and simplicial cochains.
//!
//! The triangulated grid is the product of subdivided intervals, read as
//! simplicial sets. On chains:
//!
//! * `AW` (Alexander-Whitney) sends a simplex `v_0 .. v_k` to the sum of the
//!   cells spanned by one axis `j_t` from each step `t`, with
//!   `j_1 < ... < j_k`; axis `a` outside the cell sits at the coordinate of
//!   `v_s`, `s = #{t : j_t < a}`.
//! * `EML` (shuffle map) sends a cell to the signed sum of the monotone
//!   paths through it, one per ordering of its axes.
//! * `SHI` is the chain homotopy `EML AW - id = dh + hd`, built by the cone
//!   construction: `h(v) = 0` and
//!   `h(s) = cone(EML AW s - s - h(ds))` with apex the lowest corner of the
//!   carrier of `s`.
//!
//! Cochain maps are the transposes: `AW* c = c o AW` maps cubical cochains
//! to simplicial ones, `EML* y = y o EML` goes back, and `SHI* y = y o h`.
//! Then `EML* AW* = id` and `AW* EML* - id = d SHI* + SHI* d`.

use std::sync::RwLock;

use rustc_hash::FxHashMap;

use crate::domain::{
    block_mask, carrier_mask, permutation_sign, BitIter, Cell, Cochain, CubicalCochain, GridDomain,
    Simplex, MAX_DIM,
};
use crate::error::Result;
use crate::ring::Coefficient;

/// A simplex inside a cell, as a chain of axis masks `v_0 < ... < v_k`
/// relative to the cell's lowest corner.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LocalSimplex {
    pub offset: u32,
    pub labels: u32,
}

impl LocalSimplex {
    pub fn from_chain(chain: &[u32]) -> Self {
        let mut labels = 0;
        for t in 1..chain.len() {
            for a in BitIter(chain[t] & !chain[t - 1]) {
                labels |= (t as u32) << (4 * a);
            }
        }
        LocalSimplex {
            offset: chain[0],
            labels,
        }
    }

    pub fn dim(&self) -> usize {
        Simplex {
            base: 0,
            labels: self.labels,
        }
        .dim()
    }

    /// Vertex masks in path order.
    pub fn chain(&self) -> ([u32; MAX_DIM + 1], usize) {
        let k = self.dim();
        let mut out = [0u32; MAX_DIM + 1];
        out[0] = self.offset;
        for t in 1..=k {
            out[t] = out[t - 1] | block_mask(self.labels, t as u32);
        }
        (out, k + 1)
    }

    pub fn shifted(&self, by: u32) -> Self {
        debug_assert_eq!(self.offset & by, 0);
        LocalSimplex {
            offset: self.offset | by,
            labels: self.labels,
        }
    }

    /// Sub-simplex on the path positions set in `keep`.
    pub fn sub(&self, keep: u32) -> Self {
        let (chain, len) = self.chain();
        let mut sub = [0u32; MAX_DIM + 1];
        let mut k = 0;
        for (i, &v) in chain[..len].iter().enumerate() {
            if keep >> i & 1 == 1 {
                sub[k] = v;
                k += 1;
            }
        }
        Self::from_chain(&sub[..k])
    }

    pub fn boundary(&self) -> Vec<(LocalSimplex, i64)> {
        let len = self.dim() + 1;
        if len == 1 {
            return Vec::new();
        }
        let all = (1u32 << len) - 1;
        (0..len)
            .map(|i| (self.sub(all & !(1 << i)), if i % 2 == 0 { 1 } else { -1 }))
            .collect()
    }

    /// Global simplex with the local origin at vertex `base`.
    pub fn place(&self, dom: &GridDomain, base: u32) -> Simplex {
        let base = dom
            .shift(base, self.offset, true)
            .expect("local simplex inside its cell");
        Simplex {
            base,
            labels: self.labels,
        }
    }
}

/// Cells of `AW(s)` for a simplex with labels `labels` and base at the
/// local origin, as `(offset, mask)`.
pub fn aw_cells(labels: u32) -> Vec<(u32, u32)> {
    let k = Simplex { base: 0, labels }.dim();
    let mut out = Vec::new();
    let mut picks = [0usize; MAX_DIM];
    fn rec(
        labels: u32,
        k: usize,
        t: usize,
        min_axis: usize,
        picks: &mut [usize; MAX_DIM],
        out: &mut Vec<(u32, u32)>,
    ) {
        if t == k {
            let mut mask = 0u32;
            for &j in &picks[..k] {
                mask |= 1 << j;
            }
            let mut offset = 0u32;
            for a in BitIter(carrier_mask(labels) & !mask) {
                let s = picks[..k].iter().filter(|&&j| j < a).count() as u32;
                let l = labels >> (4 * a) & 0xF;
                if l >= 1 && l <= s {
                    offset |= 1 << a;
                }
            }
            out.push((offset, mask));
            return;
        }
        for j in BitIter(block_mask(labels, t as u32 + 1)) {
            if j >= min_axis {
                picks[t] = j;
                rec(labels, k, t + 1, j + 1, picks, out);
            }
        }
    }
    rec(labels, k, 0, 0, &mut picks, &mut out);
    out
}

/// Terms of `EML` on a cell with axes `mask`: labels of each monotone path
/// with single-axis steps, and the sign of its axis ordering.
pub fn eml_paths(mask: u32) -> Vec<(u32, i64)> {
    let axes: Vec<usize> = BitIter(mask).collect();
    let mut out = Vec::new();
    let mut order = axes.clone();
    permute(&mut order, 0, &mut |perm| {
        let mut labels = 0;
        for (t, &a) in perm.iter().enumerate() {
            labels |= (t as u32 + 1) << (4 * a);
        }
        out.push((labels, permutation_sign(perm)));
    });
    out
}

fn permute(items: &mut [usize], start: usize, f: &mut impl FnMut(&[usize])) {
    if start == items.len() {
        f(items);
        return;
    }
    for i in start..items.len() {
        items.swap(start, i);
        permute(items, start + 1, f);
        items.swap(start, i);
    }
}

type LocalChain = FxHashMap<LocalSimplex, i64>;

fn add_term(chain: &mut LocalChain, s: LocalSimplex, c: i64) {
    let e = chain.entry(s).or_insert(0);
    *e += c;
    if *e == 0 {
        chain.remove(&s);
    }
}

/// `EML AW` of a local simplex.
fn eml_aw(s: &LocalSimplex) -> LocalChain {
    let mut out = LocalChain::default();
    for (offset, mask) in aw_cells(s.labels) {
        for (labels, sign) in eml_paths(mask) {
            add_term(
                &mut out,
                LocalSimplex {
                    offset: s.offset | offset,
                    labels,
                },
                sign,
            );
        }
    }
    out
}

/// Memoized chain homotopy `h`, keyed by label shape.
#[derive(Default)]
pub struct Homotopy {
    memo: RwLock<FxHashMap<u32, std::sync::Arc<Vec<(LocalSimplex, i64)>>>>,
}

impl Homotopy {
    pub fn new() -> Self {
        Self::default()
    }

    /// `h` of the simplex with labels `labels` based at the local origin.
    pub fn of(&self, labels: u32) -> std::sync::Arc<Vec<(LocalSimplex, i64)>> {
        if let Some(h) = self.memo.read().expect("homotopy table").get(&labels) {
            return h.clone();
        }
        let h = std::sync::Arc::new(self.compute(labels));
        self.memo
            .write()
            .expect("homotopy table")
            .insert(labels, h.clone());
        h
    }

    fn compute(&self, labels: u32) -> Vec<(LocalSimplex, i64)> {
        let s = LocalSimplex { offset: 0, labels };
        if s.dim() == 0 {
            return Vec::new();
        }
        let mut z = eml_aw(&s);
        add_term(&mut z, s, -1);
        for (face, sign) in s.boundary() {
            for (t, c) in self.of(face.labels).iter() {
                add_term(&mut z, t.shifted(face.offset), -sign * c);
            }
        }
        let mut out: Vec<(LocalSimplex, i64)> = z
            .into_iter()
            .filter(|(t, _)| t.offset != 0)
            .map(|(t, c)| {
                let (chain, len) = t.chain();
                let mut coned = [0u32; MAX_DIM + 1];
                coned[1..=len].copy_from_slice(&chain[..len]);
                (LocalSimplex::from_chain(&coned[..=len]), c)
            })
            .collect();
        out.sort();
        out
    }
}

/// `(AW* c)(s)`.
pub fn aw_at<C: Coefficient>(c: &CubicalCochain<C>, dom: &GridDomain, s: &Simplex) -> C {
    let mut sum = C::zero();
    for (offset, mask) in aw_cells(s.labels) {
        let base = dom
            .shift(s.base, offset, true)
            .expect("cell inside carrier");
        sum = sum.add(&c.get(&Cell::new(base, mask)));
    }
    sum
}

/// `(EML* y)(cell)` for a simplicial cochain given pointwise.
pub fn eml_at<C: Coefficient>(y: impl Fn(&Simplex) -> C, cell: &Cell) -> C {
    let mut sum = C::zero();
    for (labels, sign) in eml_paths(cell.mask) {
        let v = y(&Simplex {
            base: cell.base,
            labels,
        });
        if !v.is_zero() {
            sum = sum.add(&v.mul(&C::from_i64(sign)));
        }
    }
    sum
}

/// `(SHI* y)(s)` for a simplicial cochain given pointwise.
pub fn shi_at<C: Coefficient>(
    h: &Homotopy,
    y: impl Fn(&Simplex) -> C,
    dom: &GridDomain,
    s: &Simplex,
) -> C {
    let mut sum = C::zero();
    for (t, c) in h.of(s.labels).iter() {
        let v = y(&t.place(dom, s.base));
        if !v.is_zero() {
            sum = sum.add(&v.mul(&C::from_i64(*c)));
        }
    }
    sum
}

/// `AW*` on a whole cubical `k`-cochain.
pub fn aw<C: Coefficient>(c: &CubicalCochain<C>, dom: &GridDomain) -> Result<Cochain<C>> {
    let mut out = Cochain::zero(c.k);
    for s in dom.simplices(c.k)? {
        out.add_at(&s, &aw_at(c, dom, &s));
    }
    Ok(out)
}

/// `EML*` on a whole simplicial `k`-cochain.
pub fn eml<C: Coefficient>(y: &Cochain<C>, dom: &GridDomain) -> CubicalCochain<C> {
    let mut out = CubicalCochain::zero(y.k);
    for cell in dom.cells(y.k) {
        out.add_at(&cell, &eml_at(|s| y.get(s), &cell));
    }
    out
}

/// `SHI*` on a whole simplicial `k`-cochain, giving a `(k-1)`-cochain.
pub fn shi<C: Coefficient>(h: &Homotopy, y: &Cochain<C>, dom: &GridDomain) -> Result<Cochain<C>> {
    let mut out = Cochain::zero(y.k.saturating_sub(1));
    if y.k == 0 {
        return Ok(out);
    }
    for s in dom.simplices(y.k - 1)? {
        out.add_at(&s, &shi_at(h, |t| y.get(t), dom, &s));
    }
    Ok(out)
}

/// `x = ybar - AW* c + SHI* (d ybar)`: a simplicial cocycle extending
/// `ybar` wherever `c` and `d ybar` vanish nearby, provided
/// `d c = EML* (d ybar)`.
pub fn lift_extension<C: Coefficient>(
    h: &Homotopy,
    ybar: &Cochain<C>,
    c: &CubicalCochain<C>,
    dom: &GridDomain,
) -> Result<Cochain<C>> {
    let dy = ybar.coboundary(dom)?;
    let mut x = ybar.sub(&aw(c, dom)?);
    for (s, v) in shi(h, &dy, dom)?.support() {
        x.add_at(&s, v);
    }
    x.prune();
    Ok(x)
}
