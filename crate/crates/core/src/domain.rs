//! Grid domains, their Freudenthal triangulation and cubical cells, the
//! cross-polytope sphere, and sparse cochains.
//!
//! A simplex of the Freudenthal triangulation is a monotone lattice path
//! `v_0 < v_1 < ... < v_k` inside one grid cube. It is stored as its first
//! vertex plus a 4-bit label per axis: label `t > 0` means the axis is
//! incremented on step `t`, label `0` means the axis is constant. Every
//! step increments at least one axis, so the labels of a `k`-simplex use
//! exactly the values `1..=k`. Vertex order inside a simplex is path order,
//! which on a cube agrees with vertex-id order.

use std::fmt;

use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::ring::Coefficient;

/// Largest supported domain dimension.
pub const MAX_DIM: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Topology {
    Cube,
    Torus,
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Topology::Cube => f.write_str("cube"),
            Topology::Torus => f.write_str("torus"),
        }
    }
}

/// Multi-index of a vertex, valid in its first `m` entries.
pub type MultiIndex = [u32; MAX_DIM];

/// Regular grid on `[-1,1]^m` (cube) or on `(S^1)^m` (torus).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridDomain {
    dims: Vec<u32>,
    strides: Vec<u32>,
    topology: Topology,
    vertex_count: u32,
}

impl GridDomain {
    pub fn new(dims: &[u32], topology: Topology) -> Result<Self> {
        let m = dims.len();
        if m == 0 || m > MAX_DIM {
            return Err(Error::Domain(format!(
                "domain dimension {m} outside 1..={MAX_DIM}"
            )));
        }
        let min = match topology {
            Topology::Cube => 2,
            Topology::Torus => 3,
        };
        if let Some(g) = dims.iter().find(|&&g| g < min) {
            return Err(Error::Domain(format!(
                "{topology} axis with {g} vertices; at least {min} required"
            )));
        }
        let mut strides = vec![0u32; m];
        let mut count: u64 = 1;
        for i in (0..m).rev() {
            strides[i] = count as u32;
            count *= dims[i] as u64;
            if count >= 1 << 32 {
                return Err(Error::Domain("grid has too many vertices".into()));
            }
        }
        Ok(GridDomain {
            dims: dims.to_vec(),
            strides,
            topology,
            vertex_count: count as u32,
        })
    }

    pub fn cube(m: usize, g: u32) -> Result<Self> {
        Self::new(&vec![g; m], Topology::Cube)
    }

    pub fn torus(m: usize, g: u32) -> Result<Self> {
        Self::new(&vec![g; m], Topology::Torus)
    }

    pub fn m(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[u32] {
        &self.dims
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count as usize
    }

    pub fn multi_index(&self, v: u32) -> MultiIndex {
        let mut idx = [0u32; MAX_DIM];
        let mut rest = v;
        for (i, s) in self.strides.iter().enumerate() {
            idx[i] = rest / s;
            rest %= s;
        }
        idx
    }

    pub fn vertex(&self, idx: &[u32]) -> u32 {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    /// Coordinate of vertex index `i` along `axis`: a point of `[-1,1]` on
    /// the cube, a parameter in `[0,1)` on the torus.
    pub fn position(&self, axis: usize, i: u32) -> f64 {
        let g = self.dims[axis] as f64;
        match self.topology {
            Topology::Cube => -1.0 + 2.0 * i as f64 / (g - 1.0),
            Topology::Torus => i as f64 / g,
        }
    }

    /// Move `v` by `+1` (or `-1`) along each axis in `mask`. `None` when the
    /// move leaves a cube domain.
    pub fn shift(&self, v: u32, mask: u32, up: bool) -> Option<u32> {
        let mut w = v as i64;
        for axis in BitIter(mask) {
            let g = self.dims[axis];
            let s = self.strides[axis] as i64;
            let i = (v / self.strides[axis]) % g;
            if up {
                if i + 1 < g {
                    w += s;
                } else if self.topology == Topology::Torus {
                    w -= s * (g as i64 - 1);
                } else {
                    return None;
                }
            } else if i > 0 {
                w -= s;
            } else if self.topology == Topology::Torus {
                w += s * (g as i64 - 1);
            } else {
                return None;
            }
        }
        Some(w as u32)
    }

    /// Whether a cube spanned from `v` along `mask` fits in the domain.
    pub fn fits(&self, v: u32, mask: u32) -> bool {
        if self.topology == Topology::Torus {
            return true;
        }
        BitIter(mask).all(|axis| (v / self.strides[axis]) % self.dims[axis] + 1 < self.dims[axis])
    }

    /// Number of grid positions along `axis` from which a unit step fits.
    fn span_count(&self, axis: usize) -> u64 {
        match self.topology {
            Topology::Cube => self.dims[axis] as u64 - 1,
            Topology::Torus => self.dims[axis] as u64,
        }
    }

    /// Number of `d`-dimensional cells.
    pub fn cell_count(&self, d: usize) -> u64 {
        let m = self.m();
        (0u32..1 << m)
            .filter(|s| s.count_ones() as usize == d)
            .map(|s| {
                (0..m)
                    .map(|a| {
                        if s >> a & 1 == 1 {
                            self.span_count(a)
                        } else {
                            self.dims[a] as u64
                        }
                    })
                    .product::<u64>()
            })
            .sum()
    }

    /// Closed-form number of `k`-simplices of the Freudenthal triangulation.
    pub fn simplex_count(&self, k: usize) -> u64 {
        let m = self.m();
        (0u32..1 << m)
            .map(|s| {
                let d = s.count_ones() as usize;
                let per: u64 = (0..m)
                    .map(|a| {
                        if s >> a & 1 == 1 {
                            self.span_count(a)
                        } else {
                            self.dims[a] as u64
                        }
                    })
                    .product();
                surjections(d, k) * per
            })
            .sum()
    }

    /// All `d`-cells, ordered by base vertex then axis mask.
    pub fn cells(&self, d: usize) -> impl Iterator<Item = Cell> + '_ {
        let masks: Vec<u32> = (0u32..1 << self.m())
            .filter(|s| s.count_ones() as usize == d)
            .collect();
        (0..self.vertex_count).flat_map(move |v| {
            let masks = masks.clone();
            masks
                .into_iter()
                .filter(move |&s| self.fits(v, s))
                .map(move |s| Cell::new(v, s))
        })
    }

    /// All `k`-simplices, ordered by first vertex then label pattern.
    pub fn simplices(&self, k: usize) -> Result<impl Iterator<Item = Simplex> + '_> {
        if k > self.m() {
            return Err(Error::Domain(format!(
                "simplex dimension {k} exceeds domain dimension {}",
                self.m()
            )));
        }
        let patterns = label_patterns(self.m(), k);
        Ok((0..self.vertex_count).flat_map(move |v| {
            let patterns = patterns.clone();
            patterns
                .into_iter()
                .filter(move |&l| self.fits(v, carrier_mask(l)))
                .map(move |l| Simplex { base: v, labels: l })
        }))
    }
}

/// Number of surjections from a `d`-set onto a `k`-set.
pub fn surjections(d: usize, k: usize) -> u64 {
    // inclusion-exclusion: sum_j (-1)^j C(k,j) (k-j)^d
    let mut total: i128 = 0;
    let mut binom: i128 = 1;
    for j in 0..=k {
        let term = binom * (k as i128 - j as i128).pow(d as u32);
        total += if j % 2 == 0 { term } else { -term };
        binom = binom * (k - j) as i128 / (j + 1) as i128;
    }
    total as u64
}

/// Iterator over set bit positions.
#[derive(Clone, Copy)]
pub struct BitIter(pub u32);

impl Iterator for BitIter {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let i = self.0.trailing_zeros();
        self.0 &= self.0 - 1;
        Some(i as usize)
    }
}

/// Every label word of dimension `k` over `m` axes.
pub fn label_patterns(m: usize, k: usize) -> Vec<u32> {
    let mut out = Vec::new();
    let mut labels = [0u32; MAX_DIM];
    fn rec(axis: usize, m: usize, k: usize, labels: &mut [u32; MAX_DIM], out: &mut Vec<u32>) {
        if axis == m {
            let mut used = 0u32;
            for &l in &labels[..m] {
                if l > 0 {
                    used |= 1 << (l - 1);
                }
            }
            if used.count_ones() as usize == k {
                out.push(pack(&labels[..m]));
            }
            return;
        }
        for l in 0..=k as u32 {
            labels[axis] = l;
            rec(axis + 1, m, k, labels, out);
        }
    }
    rec(0, m, k, &mut labels, &mut out);
    out
}

fn pack(labels: &[u32]) -> u32 {
    labels
        .iter()
        .enumerate()
        .fold(0, |acc, (i, &l)| acc | l << (4 * i))
}

#[inline]
fn label(labels: u32, axis: usize) -> u32 {
    labels >> (4 * axis) & 0xF
}

#[inline]
fn map_labels(labels: u32, f: impl Fn(u32) -> u32) -> u32 {
    let mut out = 0;
    for axis in 0..MAX_DIM {
        out |= f(label(labels, axis)) << (4 * axis);
    }
    out
}

/// Axes with a nonzero label.
#[inline]
pub fn carrier_mask(labels: u32) -> u32 {
    let mut mask = 0;
    for axis in 0..MAX_DIM {
        if label(labels, axis) != 0 {
            mask |= 1 << axis;
        }
    }
    mask
}

/// Axes carrying label `t`.
#[inline]
pub fn block_mask(labels: u32, t: u32) -> u32 {
    let mut mask = 0;
    for axis in 0..MAX_DIM {
        if label(labels, axis) == t {
            mask |= 1 << axis;
        }
    }
    mask
}

/// A unit cube of the grid: base vertex plus spanning axes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub base: u32,
    pub mask: u32,
}

impl Cell {
    pub fn new(base: u32, mask: u32) -> Self {
        Cell { base, mask }
    }

    pub fn key(&self) -> u64 {
        (self.base as u64) << 8 | self.mask as u64
    }

    pub fn from_key(key: u64) -> Self {
        Cell {
            base: (key >> 8) as u32,
            mask: (key & 0xFF) as u32,
        }
    }

    pub fn dim(&self) -> usize {
        self.mask.count_ones() as usize
    }

    /// The `2^d` corner vertices.
    pub fn vertices(&self, dom: &GridDomain) -> Vec<u32> {
        let axes: Vec<usize> = BitIter(self.mask).collect();
        (0u32..1 << axes.len())
            .map(|sub| {
                let m = axes
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| sub >> i & 1 == 1)
                    .fold(0, |acc, (_, a)| acc | 1 << a);
                dom.shift(self.base, m, true).expect("cell inside domain")
            })
            .collect()
    }

    /// Cubical boundary: `sum_j (-1)^pos(j) (upper_j - lower_j)` over the
    /// spanning axes `j`, with `pos(j)` the rank of `j` among them.
    pub fn boundary(&self, dom: &GridDomain) -> Vec<(Cell, i64)> {
        let mut out = Vec::with_capacity(2 * self.dim());
        for (pos, j) in BitIter(self.mask).enumerate() {
            let sign = if pos % 2 == 0 { 1 } else { -1 };
            let rest = self.mask & !(1 << j);
            let upper = dom
                .shift(self.base, 1 << j, true)
                .expect("cell inside domain");
            out.push((Cell::new(upper, rest), sign));
            out.push((Cell::new(self.base, rest), -sign));
        }
        out
    }

    /// Cells having this one as a codimension-one face, with incidence.
    pub fn coboundary(&self, dom: &GridDomain) -> Vec<(Cell, i64)> {
        let mut out = Vec::with_capacity(2 * (dom.m() - self.dim()));
        for j in 0..dom.m() {
            if self.mask >> j & 1 == 1 {
                continue;
            }
            let pos = (self.mask & ((1 << j) - 1)).count_ones();
            let sign = if pos.is_multiple_of(2) { 1 } else { -1 };
            let mask = self.mask | 1 << j;
            if dom.fits(self.base, mask) {
                out.push((Cell::new(self.base, mask), -sign));
            }
            if let Some(lower) = dom.shift(self.base, 1 << j, false) {
                if dom.fits(lower, mask) {
                    out.push((Cell::new(lower, mask), sign));
                }
            }
        }
        out
    }
}

/// A simplex of the Freudenthal triangulation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Simplex {
    pub base: u32,
    pub labels: u32,
}

/// Vertices of a simplex in path order.
pub type Path = ([u32; MAX_DIM + 1], usize);

impl Simplex {
    pub fn vertex(v: u32) -> Self {
        Simplex { base: v, labels: 0 }
    }

    pub fn key(&self) -> u64 {
        (self.base as u64) << 32 | self.labels as u64
    }

    pub fn from_key(key: u64) -> Self {
        Simplex {
            base: (key >> 32) as u32,
            labels: key as u32,
        }
    }

    pub fn dim(&self) -> usize {
        (0..MAX_DIM)
            .map(|a| label(self.labels, a))
            .max()
            .unwrap_or(0) as usize
    }

    pub fn carrier(&self) -> Cell {
        Cell::new(self.base, carrier_mask(self.labels))
    }

    /// Build the simplex through the given steps: `steps[t]` is the axis
    /// mask added on step `t + 1`.
    pub fn from_steps(base: u32, steps: &[u32]) -> Self {
        let mut labels = 0;
        for (t, &mask) in steps.iter().enumerate() {
            for axis in BitIter(mask) {
                labels |= (t as u32 + 1) << (4 * axis);
            }
        }
        Simplex { base, labels }
    }

    /// Axis mask of each step.
    pub fn steps(&self) -> ([u32; MAX_DIM], usize) {
        let mut steps = [0u32; MAX_DIM];
        let mut k = 0;
        for axis in 0..MAX_DIM {
            let l = label(self.labels, axis) as usize;
            if l > 0 {
                steps[l - 1] |= 1 << axis;
                k = k.max(l);
            }
        }
        (steps, k)
    }

    pub fn vertices(&self, dom: &GridDomain) -> Path {
        let (steps, k) = self.steps();
        let mut out = [0u32; MAX_DIM + 1];
        out[0] = self.base;
        for t in 0..k {
            out[t + 1] = dom
                .shift(out[t], steps[t], true)
                .expect("simplex inside domain");
        }
        (out, k + 1)
    }

    /// Face opposite to vertex `i`.
    pub fn face(&self, dom: &GridDomain, i: usize) -> Simplex {
        let k = self.dim() as u32;
        let i = i as u32;
        if i == 0 {
            let first = block_mask(self.labels, 1);
            let base = dom
                .shift(self.base, first, true)
                .expect("simplex inside domain");
            let labels = map_labels(self.labels, |l| l.saturating_sub(1));
            Simplex { base, labels }
        } else if i == k {
            Simplex {
                base: self.base,
                labels: map_labels(self.labels, |l| if l == k { 0 } else { l }),
            }
        } else {
            Simplex {
                base: self.base,
                labels: map_labels(self.labels, |l| if l > i { l - 1 } else { l }),
            }
        }
    }

    /// Faces with their signs `(-1)^i`.
    pub fn boundary(&self, dom: &GridDomain) -> Vec<(Simplex, i64)> {
        let k = self.dim();
        if k == 0 {
            return Vec::new();
        }
        (0..=k)
            .map(|i| (self.face(dom, i), if i % 2 == 0 { 1 } else { -1 }))
            .collect()
    }

    /// Simplices having this one as a codimension-one face, with the sign
    /// `(-1)^i` of the position `i` this simplex occupies in each.
    pub fn cofaces(&self, dom: &GridDomain) -> Vec<(Simplex, i64)> {
        let m = dom.m();
        let k = self.dim() as u32;
        let carrier = carrier_mask(self.labels);
        let free = ((1u32 << m) - 1) & !carrier;
        let mut out = Vec::new();
        // prepend a vertex before v_0
        for u in submasks(free) {
            if let Some(base) = dom.shift(self.base, u, false) {
                let mut labels = map_labels(self.labels, |l| if l > 0 { l + 1 } else { 0 });
                for a in BitIter(u) {
                    labels |= 1 << (4 * a);
                }
                let s = Simplex { base, labels };
                if dom.fits(base, carrier | u) {
                    out.push((s, 1));
                }
            }
        }
        // split step t into two
        for t in 1..=k {
            let block = block_mask(self.labels, t);
            if block.count_ones() < 2 {
                continue;
            }
            let sign = if t % 2 == 0 { 1 } else { -1 };
            for p in submasks(block) {
                if p == block {
                    continue;
                }
                let mut labels = map_labels(self.labels, |l| if l > t { l + 1 } else { l });
                for a in BitIter(block & !p) {
                    labels = labels & !(0xF << (4 * a)) | (t + 1) << (4 * a);
                }
                out.push((
                    Simplex {
                        base: self.base,
                        labels,
                    },
                    sign,
                ));
            }
        }
        // append a vertex after v_k
        let sign = if (k + 1).is_multiple_of(2) { 1 } else { -1 };
        for u in submasks(free) {
            if dom.fits(self.base, carrier | u) {
                let mut labels = self.labels;
                for a in BitIter(u) {
                    labels |= (k + 1) << (4 * a);
                }
                out.push((
                    Simplex {
                        base: self.base,
                        labels,
                    },
                    sign,
                ));
            }
        }
        out
    }
}

/// Nonempty submasks of `mask`.
pub fn submasks(mask: u32) -> impl Iterator<Item = u32> {
    let mut sub = mask;
    let mut done = mask == 0;
    std::iter::from_fn(move || {
        if done {
            return None;
        }
        let cur = sub;
        sub = (sub.wrapping_sub(1)) & mask;
        if sub == 0 {
            done = true;
        }
        Some(cur)
    })
}

/// Vertex of the cross-polytope sphere: index `2j` is `+e_{j+1}`, index
/// `2j+1` is `-e_{j+1}`. Index order is the sphere's vertex order
/// `e_1 < -e_1 < e_2 < -e_2 < ...`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SphereVertex(pub u8);

impl SphereVertex {
    pub fn new(axis: usize, positive: bool) -> Self {
        SphereVertex((2 * axis + usize::from(!positive)) as u8)
    }

    pub fn axis(&self) -> usize {
        (self.0 / 2) as usize
    }

    pub fn positive(&self) -> bool {
        self.0.is_multiple_of(2)
    }

    pub fn antipode(&self) -> Self {
        SphereVertex(self.0 ^ 1)
    }
}

/// Boundary of the `n`-dimensional cross-polytope, a model of `S^{n-1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpherePolytope {
    pub n: usize,
}

impl SpherePolytope {
    pub fn new(n: usize) -> Self {
        SpherePolytope { n }
    }

    pub fn vertices(&self) -> impl Iterator<Item = SphereVertex> {
        (0..2 * self.n as u8).map(SphereVertex)
    }

    /// A vertex set spans a simplex iff it has no antipodal pair.
    pub fn spans_simplex(&self, vs: &[SphereVertex]) -> bool {
        vs.iter().all(|v| !vs.contains(&v.antipode()))
    }

    pub fn dim(&self) -> usize {
        self.n - 1
    }

    /// Value of the characteristic cochain of `[e_1, ..., e_n]` on the
    /// ordered image of an `(n-1)`-simplex: the sign of the permutation
    /// sorting `image` into sphere order, or `0` when the image is not
    /// exactly `{e_1, ..., e_n}`.
    pub fn fundamental(&self, image: &[SphereVertex]) -> i64 {
        if image.len() != self.n {
            return 0;
        }
        let mut seen = 0u32;
        for v in image {
            if !v.positive() || seen >> v.axis() & 1 == 1 {
                return 0;
            }
            seen |= 1 << v.axis();
        }
        permutation_sign(image)
    }
}

/// Sign of the permutation that sorts distinct `items`.
pub fn permutation_sign<T: Ord>(items: &[T]) -> i64 {
    let mut inversions = 0usize;
    for i in 0..items.len() {
        for j in i + 1..items.len() {
            if items[i] > items[j] {
                inversions += 1;
            }
        }
    }
    if inversions.is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// Sparse simplicial cochain keyed by [`Simplex::key`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cochain<C> {
    pub k: usize,
    pub entries: FxHashMap<u64, C>,
}

impl<C: Coefficient> Cochain<C> {
    pub fn zero(k: usize) -> Self {
        Cochain {
            k,
            entries: FxHashMap::default(),
        }
    }

    pub fn get(&self, s: &Simplex) -> C {
        self.entries.get(&s.key()).cloned().unwrap_or_else(C::zero)
    }

    pub fn add_at(&mut self, s: &Simplex, c: &C) {
        debug_assert_eq!(s.dim(), self.k);
        add_entry(&mut self.entries, s.key(), c);
    }

    pub fn is_zero(&self) -> bool {
        self.entries.values().all(|c| c.is_zero())
    }

    pub fn support(&self) -> impl Iterator<Item = (Simplex, &C)> {
        self.entries
            .iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|(&k, c)| (Simplex::from_key(k), c))
    }

    pub fn coboundary(&self, dom: &GridDomain) -> Result<Cochain<C>> {
        if self.k >= dom.m() {
            return Err(Error::Domain(format!(
                "no {}-simplices in a {}-dimensional domain",
                self.k + 1,
                dom.m()
            )));
        }
        let mut out = Cochain::zero(self.k + 1);
        for (s, c) in self.support() {
            for (t, sign) in s.cofaces(dom) {
                out.add_at(&t, &c.mul(&C::from_i64(sign)));
            }
        }
        out.prune();
        Ok(out)
    }

    pub fn prune(&mut self) {
        self.entries.retain(|_, c| !c.is_zero());
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (&k, c) in &other.entries {
            add_entry(&mut out.entries, k, &c.neg());
        }
        out.prune();
        out
    }
}

/// Sparse cubical cochain keyed by [`Cell::key`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CubicalCochain<C> {
    pub k: usize,
    pub entries: FxHashMap<u64, C>,
}

impl<C: Coefficient> CubicalCochain<C> {
    pub fn zero(k: usize) -> Self {
        CubicalCochain {
            k,
            entries: FxHashMap::default(),
        }
    }

    pub fn get(&self, c: &Cell) -> C {
        self.entries.get(&c.key()).cloned().unwrap_or_else(C::zero)
    }

    pub fn add_at(&mut self, cell: &Cell, c: &C) {
        add_entry(&mut self.entries, cell.key(), c);
    }

    pub fn is_zero(&self) -> bool {
        self.entries.values().all(|c| c.is_zero())
    }

    pub fn prune(&mut self) {
        self.entries.retain(|_, c| !c.is_zero());
    }

    pub fn support(&self) -> impl Iterator<Item = (Cell, &C)> {
        self.entries
            .iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|(&k, c)| (Cell::from_key(k), c))
    }

    pub fn coboundary(&self, dom: &GridDomain) -> CubicalCochain<C> {
        let mut out = CubicalCochain::zero(self.k + 1);
        for (cell, c) in self.support() {
            for (t, sign) in cell.coboundary(dom) {
                out.add_at(&t, &c.mul(&C::from_i64(sign)));
            }
        }
        out.prune();
        out
    }
}

fn add_entry<C: Coefficient>(map: &mut FxHashMap<u64, C>, key: u64, c: &C) {
    if c.is_zero() {
        return;
    }
    match map.get_mut(&key) {
        Some(v) => *v = v.add(c),
        None => {
            map.insert(key, c.clone());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::{Integer, Z2};
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn brute_force_count(dom: &GridDomain, k: usize) -> usize {
        // enumerate every cube's m! maximal simplices and collect k-faces
        let m = dom.m();
        let full = (1u32 << m) - 1;
        let mut seen = HashSet::new();
        for v in 0..dom.vertex_count() as u32 {
            if !dom.fits(v, full) {
                continue;
            }
            let mut perm: Vec<usize> = (0..m).collect();
            permutohedron(&mut perm, 0, &mut |p| {
                let steps: Vec<u32> = p.iter().map(|&a| 1 << a).collect();
                let top = Simplex::from_steps(v, &steps);
                let (verts, len) = top.vertices(dom);
                for sub in 1u32..1 << len {
                    if sub.count_ones() as usize == k + 1 {
                        let mut vs: Vec<u32> = (0..len)
                            .filter(|i| sub >> i & 1 == 1)
                            .map(|i| verts[i])
                            .collect();
                        vs.sort();
                        seen.insert(vs);
                    }
                }
            });
        }
        seen.len()
    }

    fn permutohedron(p: &mut Vec<usize>, i: usize, f: &mut impl FnMut(&[usize])) {
        if i == p.len() {
            f(p);
            return;
        }
        for j in i..p.len() {
            p.swap(i, j);
            permutohedron(p, i + 1, f);
            p.swap(i, j);
        }
    }

    #[test]
    fn square_splits_into_two_triangles() {
        let dom = GridDomain::cube(2, 2).unwrap();
        assert_eq!(dom.simplices(2).unwrap().count(), 2);
    }

    #[test]
    fn four_cube_splits_into_24() {
        let dom = GridDomain::cube(4, 2).unwrap();
        assert_eq!(dom.simplices(4).unwrap().count(), 24);
        assert_eq!(dom.simplex_count(4), 24);
    }

    #[test]
    fn triangles_per_cube_in_periodic_4d_grid() {
        let dom = GridDomain::torus(4, 3).unwrap();
        let count = dom.simplices(2).unwrap().count();
        assert_eq!(count, 50 * 81);
        assert_eq!(dom.simplex_count(2), 50 * 81);
    }

    #[test]
    fn counts_match_brute_force() {
        for (m, g) in [(1, 4), (2, 3), (3, 3), (4, 2), (3, 4)] {
            let dom = GridDomain::cube(m, g).unwrap();
            for k in 0..=m {
                let n = dom.simplices(k).unwrap().count();
                assert_eq!(n as u64, dom.simplex_count(k), "m={m} g={g} k={k}");
                assert_eq!(n, brute_force_count(&dom, k), "m={m} g={g} k={k}");
            }
        }
    }

    #[test]
    fn rejects_bad_domains() {
        assert!(GridDomain::torus(2, 2).is_err());
        assert!(GridDomain::cube(2, 1).is_err());
        assert!(GridDomain::cube(9, 2).is_err());
        assert!(GridDomain::cube(2, 3).unwrap().simplices(3).is_err());
    }

    #[test]
    fn cube_paths_increase_in_vertex_id() {
        let dom = GridDomain::cube(3, 3).unwrap();
        for k in 0..=3 {
            for s in dom.simplices(k).unwrap() {
                let (vs, len) = s.vertices(&dom);
                assert!(vs[..len].windows(2).all(|w| w[0] < w[1]));
            }
        }
    }

    #[test]
    fn faces_are_enumerated_simplices() {
        for dom in [
            GridDomain::cube(3, 3).unwrap(),
            GridDomain::torus(3, 3).unwrap(),
        ] {
            for k in 1..=3 {
                let lower: HashSet<Simplex> = dom.simplices(k - 1).unwrap().collect();
                for s in dom.simplices(k).unwrap() {
                    let (vs, len) = s.vertices(&dom);
                    for i in 0..=k {
                        let f = s.face(&dom, i);
                        assert!(lower.contains(&f));
                        let (fv, flen) = f.vertices(&dom);
                        let expect: Vec<u32> =
                            (0..len).filter(|&j| j != i).map(|j| vs[j]).collect();
                        assert_eq!(&fv[..flen], &expect[..]);
                    }
                }
            }
        }
    }

    #[test]
    fn cofaces_invert_faces() {
        for dom in [
            GridDomain::cube(3, 3).unwrap(),
            GridDomain::torus(3, 3).unwrap(),
        ] {
            for k in 0..3 {
                let mut expected: FxHashMap<Simplex, Vec<(Simplex, i64)>> = FxHashMap::default();
                for t in dom.simplices(k + 1).unwrap() {
                    for (f, sign) in t.boundary(&dom) {
                        expected.entry(f).or_default().push((t, sign));
                    }
                }
                for s in dom.simplices(k).unwrap() {
                    let mut got = s.cofaces(&dom);
                    let mut want = expected.remove(&s).unwrap_or_default();
                    got.sort();
                    want.sort();
                    assert_eq!(got, want, "{s:?}");
                }
            }
        }
    }

    #[test]
    fn edge_coboundary_in_square() {
        let dom = GridDomain::cube(2, 2).unwrap();
        // diagonal edge (0,0)-(1,1) is the middle face of both triangles
        let diag = Simplex::from_steps(0, &[0b11]);
        let mut c = Cochain::<Integer>::zero(1);
        c.add_at(&diag, &Integer::one());
        let d = c.coboundary(&dom).unwrap();
        let t1 = Simplex::from_steps(0, &[0b01, 0b10]);
        let t2 = Simplex::from_steps(0, &[0b10, 0b01]);
        assert_eq!(d.get(&t1), Integer::from(-1));
        assert_eq!(d.get(&t2), Integer::from(-1));
        assert_eq!(d.entries.len(), 2);
        // a boundary edge lies in one triangle only
        let bottom = Simplex::from_steps(0, &[0b01]);
        let mut c = Cochain::<Integer>::zero(1);
        c.add_at(&bottom, &Integer::one());
        let d = c.coboundary(&dom).unwrap();
        assert_eq!(d.entries.len(), 1);
        assert_eq!(d.get(&t1), Integer::one());
    }

    #[test]
    fn cubical_coboundary_squares_to_zero() {
        let dom = GridDomain::cube(3, 3).unwrap();
        for d in 0..2 {
            for cell in dom.cells(d) {
                let mut c = CubicalCochain::<Integer>::zero(d);
                c.add_at(&cell, &Integer::one());
                assert!(c.coboundary(&dom).coboundary(&dom).is_zero());
            }
        }
        assert_eq!(dom.cells(1).count() as u64, dom.cell_count(1));
        assert_eq!(dom.cell_count(1), 3 * 2 * 9);
    }

    #[test]
    fn sphere_model() {
        let s = SpherePolytope::new(3);
        assert_eq!(s.vertices().count(), 6);
        assert_eq!(s.dim(), 2);
        let e = |j, p| SphereVertex::new(j, p);
        assert!(s.spans_simplex(&[e(0, true), e(1, false), e(2, true)]));
        assert!(!s.spans_simplex(&[e(0, true), e(0, false)]));
        assert!(e(0, true) < e(0, false) && e(0, false) < e(1, true));
        assert_eq!(s.fundamental(&[e(0, true), e(1, true), e(2, true)]), 1);
        assert_eq!(s.fundamental(&[e(1, true), e(0, true), e(2, true)]), -1);
        assert_eq!(s.fundamental(&[e(0, true), e(1, false), e(2, true)]), 0);
    }

    #[test]
    fn surjection_counts() {
        assert_eq!(surjections(4, 2), 14);
        assert_eq!(surjections(3, 3), 6);
        assert_eq!(surjections(2, 3), 0);
        assert_eq!(surjections(0, 0), 1);
    }

    fn random_cochain<C: Coefficient>(dom: &GridDomain, k: usize, vals: &[i64]) -> Cochain<C> {
        let mut c = Cochain::zero(k);
        for (s, v) in dom.simplices(k).unwrap().zip(vals.iter().cycle()) {
            c.add_at(&s, &C::from_i64(*v));
        }
        c
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn coboundary_squares_to_zero(vals in prop::collection::vec(-3i64..=3, 1..40), k in 0usize..2, torus: bool) {
            let dom = if torus { GridDomain::torus(3, 3).unwrap() } else { GridDomain::cube(3, 3).unwrap() };
            let c = random_cochain::<Integer>(&dom, k, &vals);
            prop_assert!(c.coboundary(&dom).unwrap().coboundary(&dom).unwrap().is_zero());
            let c = random_cochain::<Z2>(&dom, k, &vals);
            prop_assert!(c.coboundary(&dom).unwrap().coboundary(&dom).unwrap().is_zero());
        }
    }
}
