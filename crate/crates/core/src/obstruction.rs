//! Primary and secondary obstructions and their persistence.
//!
//! The vertex approximation `f'` maps the superlevel set `A = A_{r0}` to the
//! boundary of the cross-polytope. Pulling back the characteristic cocycle
//! of `[e_1, ..., e_n]` gives `y`; its zero extension `ybar` has coboundary
//! `d ybar`, which represents the primary obstruction. The obstruction dies
//! at the first level `r` for which `d c = d ybar` has a solution `c`
//! vanishing on `A_r`; that is an earliest-solution problem with the
//! coboundary columns ordered by filtration value.
//!
//! The secondary obstruction is the class of `v(x) = x ⌣_{n-3} x` (mod 2)
//! for an extension `x` of `y`, modulo the images `v(w)` of cohomology
//! generators `w`. For `n = 3` it is the integral cup square; on a cube
//! domain the generators can be ignored.
//!
//! Matrices are assembled either on the Freudenthal simplices or on the
//! grid cubes, where the Eilenberg-Zilber maps of [`crate::ez`] translate
//! the cochains.

use std::cell::RefCell;
use std::fmt;
use std::fmt::Debug;
use std::hash::Hash;
use std::time::Instant;

use rustc_hash::{FxHashMap, FxHashSet};

use crate::domain::{
    permutation_sign, submasks, Cell, Cochain, GridDomain, Simplex, SpherePolytope, SphereVertex,
    Topology, MAX_DIM,
};
use crate::error::{Error, Result};
use crate::ez::{self, Homotopy, LocalSimplex};
use crate::fields::{Norm, SampledField};
use crate::filtration::{simplicial_threshold, Filtration, Mode, Threshold, VertexApprox};
use crate::par::{self, Parallelism};
use crate::reduction::{normalize, Column, EarliestSolver, PersistentGenerators, RowKey};
use crate::ring::{reduce_into, Coefficient, Integer, Ring, Z2};

/// How far the obstruction theory is pushed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Depth {
    Primary,
    Secondary,
}

impl fmt::Display for Depth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Depth::Primary => "primary",
            Depth::Secondary => "secondary",
        })
    }
}

/// Choice of the starting level `r0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Start {
    /// First level at least `alpha * n^{1/p}`, where `f'` is certified to be
    /// simplicial and homotopic to `f/|f|`.
    Lipschitz,
    /// Lowest level at which `f'` is simplicial; below the Lipschitz level
    /// the result is heuristic.
    MinSimplicial,
}

impl fmt::Display for Start {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Start::Lipschitz => "lipschitz",
            Start::MinSimplicial => "min-simplicial",
        })
    }
}

/// Pipeline settings; `None` fields take defaults from the field's shape.
#[derive(Clone, Debug, Default)]
pub struct Options {
    /// Defaults to cubical for domains of dimension at least 4.
    pub mode: Option<Mode>,
    /// Defaults to secondary when `n > 3`, or `n = 3` on a cube, and the
    /// domain has dimension at least `n + 1`.
    pub depth: Option<Depth>,
    /// Defaults to `Lipschitz` in simplicial mode and `MinSimplicial` in
    /// cubical mode.
    pub start: Option<Start>,
    pub par: Parallelism,
}

impl Options {
    pub fn resolve(&self, field: &SampledField) -> (Mode, Depth, Start) {
        let m = field.domain.m();
        let n = field.n;
        let mode = self.mode.unwrap_or(if m >= 4 {
            Mode::Cubical
        } else {
            Mode::Simplicial
        });
        let secondary = m > n && (n > 3 || (n == 3 && field.domain.topology() == Topology::Cube));
        let depth = self.depth.unwrap_or(if secondary {
            Depth::Secondary
        } else {
            Depth::Primary
        });
        let start = self.start.unwrap_or(match mode {
            Mode::Simplicial => Start::Lipschitz,
            Mode::Cubical => Start::MinSimplicial,
        });
        (mode, depth, start)
    }
}

/// Persistence of an obstruction, as the value of the column that kills it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Persistence {
    /// Absent already at `r0`.
    BelowR0,
    Level {
        rank: u32,
        value: f64,
    },
    /// Never dies; reported at the top level.
    Top {
        rank: u32,
        value: f64,
    },
    Inconclusive,
}

impl Persistence {
    pub fn value(&self) -> Option<f64> {
        match self {
            Persistence::Level { value, .. } | Persistence::Top { value, .. } => Some(*value),
            _ => None,
        }
    }

    pub fn rank(&self) -> Option<u32> {
        match self {
            Persistence::Level { rank, .. } | Persistence::Top { rank, .. } => Some(*rank),
            _ => None,
        }
    }
}

impl fmt::Display for Persistence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Persistence::BelowR0 => f.write_str("below_r0"),
            Persistence::Inconclusive => f.write_str("inconclusive"),
            Persistence::Level { value, .. } => write!(f, "{value}"),
            Persistence::Top { value, .. } => write!(f, "{value} (top)"),
        }
    }
}

/// A filtered cell complex on the grid: the Freudenthal simplices or the
/// grid cubes, with the filtration inherited from vertex ranks.
pub trait FilteredComplex: Sync {
    type Cell: Copy + Send + Sync + Eq + Ord + Hash + Debug;
    /// Sort key: filtration rank first, then a cell id.
    type Key: RowKey;

    fn domain(&self) -> &GridDomain;
    fn filtration(&self) -> &Filtration;
    fn cells(&self, d: usize) -> Vec<Self::Cell>;
    fn rank(&self, c: &Self::Cell) -> u32;
    fn key(&self, c: &Self::Cell) -> Self::Key;
    fn coboundary(&self, c: &Self::Cell) -> Vec<(Self::Cell, i64)>;
    /// Minimum of a vertex function over the vertices of `c`.
    fn min_over_vertices(&self, c: &Self::Cell, f: &dyn Fn(u32) -> u32) -> u32;
    /// Value on `c` of a simplicial cochain given pointwise.
    fn from_simplicial<C: Coefficient>(&self, y: &dyn Fn(&Simplex) -> C, c: &Self::Cell) -> C;
    /// Value on `s` of a cochain on this complex.
    fn to_simplicial(&self, w: &FxHashMap<Self::Cell, Integer>, s: &Simplex) -> Integer;
    /// Correction term of the extension on `s` beyond `ybar - c`.
    fn correction(&self, _pb: &Pullback<'_>, _s: &Simplex) -> Integer {
        Integer::zero()
    }
}

/// The Freudenthal triangulation.
pub struct SimplicialComplex<'a> {
    pub filt: &'a Filtration,
    pub dom: &'a GridDomain,
}

impl FilteredComplex for SimplicialComplex<'_> {
    type Cell = Simplex;
    type Key = u128;

    fn domain(&self) -> &GridDomain {
        self.dom
    }

    fn filtration(&self) -> &Filtration {
        self.filt
    }

    fn cells(&self, d: usize) -> Vec<Simplex> {
        self.dom
            .simplices(d)
            .map(|it| it.collect())
            .unwrap_or_default()
    }

    fn rank(&self, c: &Simplex) -> u32 {
        self.filt.simplex_rank(self.dom, c)
    }

    fn key(&self, c: &Simplex) -> u128 {
        (self.rank(c) as u128) << 64 | c.key() as u128
    }

    fn coboundary(&self, c: &Simplex) -> Vec<(Simplex, i64)> {
        c.cofaces(self.dom)
    }

    fn min_over_vertices(&self, c: &Simplex, f: &dyn Fn(u32) -> u32) -> u32 {
        let (vs, len) = c.vertices(self.dom);
        vs[..len]
            .iter()
            .map(|&v| f(v))
            .min()
            .expect("nonempty simplex")
    }

    fn from_simplicial<C: Coefficient>(&self, y: &dyn Fn(&Simplex) -> C, c: &Simplex) -> C {
        y(c)
    }

    fn to_simplicial(&self, w: &FxHashMap<Simplex, Integer>, s: &Simplex) -> Integer {
        w.get(s).cloned().unwrap_or_else(Integer::zero)
    }
}

/// The grid cubes, with the filtration value of a cube the minimum over
/// its vertices.
pub struct CubicalComplex<'a> {
    pub filt: &'a Filtration,
    pub dom: &'a GridDomain,
    pub homotopy: Homotopy,
}

impl<'a> CubicalComplex<'a> {
    pub fn new(filt: &'a Filtration, dom: &'a GridDomain) -> Self {
        CubicalComplex {
            filt,
            dom,
            homotopy: Homotopy::new(),
        }
    }
}

impl FilteredComplex for CubicalComplex<'_> {
    type Cell = Cell;
    type Key = u64;

    fn domain(&self) -> &GridDomain {
        self.dom
    }

    fn filtration(&self) -> &Filtration {
        self.filt
    }

    fn cells(&self, d: usize) -> Vec<Cell> {
        self.dom.cells(d).collect()
    }

    fn rank(&self, c: &Cell) -> u32 {
        self.filt.cell_rank(self.dom, c)
    }

    fn key(&self, c: &Cell) -> u64 {
        (self.rank(c) as u64) << 36 | c.key()
    }

    fn coboundary(&self, c: &Cell) -> Vec<(Cell, i64)> {
        c.coboundary(self.dom)
    }

    fn min_over_vertices(&self, c: &Cell, f: &dyn Fn(u32) -> u32) -> u32 {
        submasks(c.mask)
            .map(|sub| {
                f(self
                    .dom
                    .shift(c.base, sub, true)
                    .expect("cell inside domain"))
            })
            .fold(f(c.base), u32::min)
    }

    fn from_simplicial<C: Coefficient>(&self, y: &dyn Fn(&Simplex) -> C, c: &Cell) -> C {
        ez::eml_at(y, c)
    }

    fn to_simplicial(&self, w: &FxHashMap<Cell, Integer>, s: &Simplex) -> Integer {
        let mut sum = Integer::zero();
        for (offset, mask) in ez::aw_cells(s.labels) {
            let base = self
                .dom
                .shift(s.base, offset, true)
                .expect("cell inside carrier");
            if let Some(v) = w.get(&Cell::new(base, mask)) {
                sum = sum.add(v);
            }
        }
        sum
    }

    fn correction(&self, pb: &Pullback<'_>, s: &Simplex) -> Integer {
        if self.filt.cell_rank(self.dom, &s.carrier()) >= pb.r0 {
            return Integer::zero();
        }
        ez::shi_at(&self.homotopy, |t| Integer::from(pb.dybar(t)), self.dom, s)
    }
}

/// The pullback `y` of the characteristic cocycle of `[e_1, ..., e_n]`
/// along `f'`, and its zero extension `ybar` off `A_{r0}`.
pub struct Pullback<'a> {
    pub dom: &'a GridDomain,
    pub filt: &'a Filtration,
    pub approx: &'a VertexApprox,
    pub sphere: SpherePolytope,
    pub r0: u32,
}

impl<'a> Pullback<'a> {
    pub fn new(
        dom: &'a GridDomain,
        filt: &'a Filtration,
        approx: &'a VertexApprox,
        n: usize,
        r0: u32,
    ) -> Self {
        Pullback {
            dom,
            filt,
            approx,
            sphere: SpherePolytope::new(n),
            r0,
        }
    }

    /// `y(s)`, zero when some vertex lies outside the approximation's domain.
    pub fn y(&self, s: &Simplex) -> i64 {
        let (vs, len) = s.vertices(self.dom);
        let mut image = [SphereVertex(0); MAX_DIM + 1];
        for i in 0..len {
            match self.approx.get(self.filt, vs[i]) {
                Some(sv) => image[i] = sv,
                None => return 0,
            }
        }
        self.sphere.fundamental(&image[..len])
    }

    /// Whether `s` lies in `A_{r0}` of the active filtration.
    pub fn in_domain(&self, s: &Simplex) -> bool {
        self.filt.simplex_rank(self.dom, s) >= self.r0
    }

    pub fn ybar(&self, s: &Simplex) -> i64 {
        if self.in_domain(s) {
            self.y(s)
        } else {
            0
        }
    }

    pub fn dybar(&self, t: &Simplex) -> i64 {
        t.boundary(self.dom)
            .iter()
            .map(|(f, sign)| sign * self.ybar(f))
            .sum()
    }

    pub fn order_key(&self, v: u32) -> u64 {
        self.approx.order_key(self.filt, v)
    }
}

/// `y` on every `(n-1)`-simplex of `A_{r0}` (small domains only).
pub fn pullback_cocycle(pb: &Pullback<'_>) -> Result<Cochain<Integer>> {
    let n = pb.sphere.n;
    let mut y = Cochain::zero(n - 1);
    for s in pb.dom.simplices(n - 1)? {
        if pb.in_domain(&s) {
            y.add_at(&s, &Integer::from(pb.y(&s)));
        }
    }
    y.prune();
    Ok(y)
}

/// Cells of dimension `d` sorted by filtration key.
pub fn sorted_cells<X: FilteredComplex>(
    cx: &X,
    d: usize,
    par: Parallelism,
) -> Vec<(X::Key, X::Cell)> {
    let cells = cx.cells(d);
    let mut keyed = par::map_slice(par, &cells, |c| (cx.key(c), *c));
    par::sort_unstable(par, &mut keyed);
    keyed
}

/// Coboundary column of `c` in filtration-key coordinates.
pub fn coboundary_column<X: FilteredComplex, C: Coefficient>(
    cx: &X,
    c: &X::Cell,
) -> Column<X::Key, C> {
    normalize(
        cx.coboundary(c)
            .into_iter()
            .map(|(t, s)| (cx.key(&t), C::from_i64(s)))
            .collect(),
    )
}

/// Outcome of the primary stage.
#[derive(Clone, Debug)]
pub struct PrimaryResult<K> {
    pub r1: Persistence,
    /// Rank of the last column used by the solution, if any was needed.
    pub witness_rank: Option<u32>,
    pub columns: u64,
    pub rows: u64,
    pub columns_used: u64,
    pub rhs_entries: usize,
    pub bezout_steps: u64,
    /// `c` with `d c = d ybar` (translated by the complex), when tracked.
    pub witness: Option<FxHashMap<K, Integer>>,
}

/// The obstruction cocycle `d ybar` on `n`-cells outside `A_{r0}`, with the
/// total number of `n`-cells.
pub fn primary_rhs<X: FilteredComplex>(
    cx: &X,
    pb: &Pullback<'_>,
    n: usize,
    par: Parallelism,
) -> (u64, Vec<(X::Cell, Integer)>) {
    let rows = cx.cells(n);
    let a = par::flat_map_chunks(par, rows.len(), 1024, |range| {
        rows[range]
            .iter()
            .filter(|c| cx.rank(c) < pb.r0)
            .filter_map(|c| {
                let v = cx.from_simplicial(&|s| Integer::from(pb.dybar(s)), c);
                (!v.is_zero()).then_some((*c, v))
            })
            .collect()
    });
    (rows.len() as u64, a)
}

/// Persistence of the primary obstruction.
pub fn primary_persistence<X: FilteredComplex>(
    cx: &X,
    pb: &Pullback<'_>,
    n: usize,
    track: bool,
    par: Parallelism,
) -> PrimaryResult<X::Cell> {
    let filt = cx.filtration();
    let (rows, a) = primary_rhs(cx, pb, n, par);
    let a = normalize(a.into_iter().map(|(c, v)| (cx.key(&c), v)).collect());
    let mut out = PrimaryResult {
        r1: Persistence::BelowR0,
        witness_rank: None,
        columns: 0,
        rows,
        columns_used: 0,
        rhs_entries: a.len(),
        bezout_steps: 0,
        witness: track.then(FxHashMap::default),
    };
    let cols = sorted_cells(cx, n - 1, par);
    out.columns = cols.len() as u64;
    if a.is_empty() {
        return out;
    }
    let mut solver = EarliestSolver::new(&a, track);
    for (_, c) in &cols {
        let col: Column<X::Key, Integer> = coboundary_column(cx, c);
        if solver.push(&col) {
            break;
        }
    }
    out.columns_used = solver.pushed() as u64;
    out.bezout_steps = solver.prefix().bezout_steps;
    match solver.solved_at() {
        Some(Some(l)) => {
            let rank = cx.rank(&cols[l as usize].1);
            out.witness_rank = Some(rank);
            out.r1 = if rank < pb.r0 {
                Persistence::BelowR0
            } else {
                Persistence::Level {
                    rank,
                    value: filt.level(rank),
                }
            };
            if track {
                let x = solver.solution().expect("tracked");
                out.witness = Some(
                    x.into_iter()
                        .map(|(i, v)| (cols[i as usize].1, v))
                        .collect(),
                );
            }
        }
        Some(None) => {}
        None => {
            let top = filt.top_rank();
            out.r1 = Persistence::Top {
                rank: top,
                value: filt.level(top),
            };
        }
    }
    out
}

/// The simplicial cocycle `x` extending `y`, built from a primary witness.
pub struct Extension<'a, X: FilteredComplex> {
    pub cx: &'a X,
    pub pb: &'a Pullback<'a>,
    pub witness: FxHashMap<X::Cell, Integer>,
}

impl<X: FilteredComplex> Extension<'_, X> {
    pub fn value(&self, s: &Simplex) -> Integer {
        let v = Integer::from(self.pb.ybar(s)).sub(&self.cx.to_simplicial(&self.witness, s));
        v.add(&self.cx.correction(self.pb, s))
    }
}

/// Memoizing wrapper around a pointwise cochain.
struct Cached<'f, C> {
    f: &'f (dyn Fn(&Simplex) -> C + Sync),
    memo: RefCell<FxHashMap<u64, C>>,
}

impl<'f, C: Coefficient> Cached<'f, C> {
    fn new(f: &'f (dyn Fn(&Simplex) -> C + Sync)) -> Self {
        Cached {
            f,
            memo: RefCell::new(FxHashMap::default()),
        }
    }

    fn get(&self, s: &Simplex) -> C {
        if let Some(v) = self.memo.borrow().get(&s.key()) {
            return v.clone();
        }
        let v = (self.f)(s);
        let mut memo = self.memo.borrow_mut();
        if memo.len() > 1 << 20 {
            memo.clear();
        }
        memo.insert(s.key(), v.clone());
        v
    }
}

/// `(u ⌣_i v)(rho)` with the vertices of `rho` taken in the order given by
/// `order`. `u` has dimension `p`, `v` dimension `q`, `rho` dimension
/// `p + q - i`. Over the integers only `i = 0` (the cup product) is
/// available.
#[allow(clippy::too_many_arguments)]
pub fn cup_i_at<C: Coefficient>(
    u: &dyn Fn(&Simplex) -> C,
    p: usize,
    v: &dyn Fn(&Simplex) -> C,
    q: usize,
    i: usize,
    rho: &Simplex,
    dom: &GridDomain,
    order: &dyn Fn(u32) -> u64,
) -> C {
    let dim = rho.dim();
    debug_assert_eq!(dim + i, p + q);
    debug_assert!(C::RING == Ring::Z2 || i == 0);
    let (vs, len) = rho.vertices(dom);
    // w[t] = path position of the t-th vertex in the given order
    let mut w: Vec<usize> = (0..len).collect();
    w.sort_by_key(|&pos| order(vs[pos]));
    let local = LocalSimplex {
        offset: 0,
        labels: rho.labels,
    };
    let signed = C::RING == Ring::Integers;
    let face = |set: u32| -> (Simplex, i64) {
        let mut mask = 0u32;
        let mut seq = [0usize; MAX_DIM + 1];
        let mut k = 0;
        for t in 0..len {
            if set >> t & 1 == 1 {
                mask |= 1 << w[t];
                seq[k] = w[t];
                k += 1;
            }
        }
        let sign = if signed {
            permutation_sign(&seq[..k])
        } else {
            1
        };
        (local.sub(mask).place(dom, rho.base), sign)
    };
    let interval = |a: usize, b: usize| -> u32 { ((1u32 << (b + 1)) - 1) & !((1u32 << a) - 1) };
    let mut sum = C::zero();
    let mut cuts = [0usize; MAX_DIM + 2];
    fn rec(
        t: usize,
        i: usize,
        start: usize,
        dim: usize,
        cuts: &mut [usize; MAX_DIM + 2],
        visit: &mut dyn FnMut(&[usize]),
    ) {
        if t == i + 1 {
            visit(&cuts[..=i]);
            return;
        }
        for j in start..=dim {
            cuts[t] = j;
            rec(t + 1, i, j + 1, dim, cuts, visit);
        }
    }
    rec(0, i, 0, dim, &mut cuts, &mut |cuts| {
        let mut us = 0u32;
        let mut vset = 0u32;
        let mut lo = 0;
        for (idx, &j) in cuts.iter().chain(std::iter::once(&dim)).enumerate() {
            if idx % 2 == 0 {
                us |= interval(lo, j);
            } else {
                vset |= interval(lo, j);
            }
            lo = j;
        }
        if us.count_ones() as usize != p + 1 || vset.count_ones() as usize != q + 1 {
            return;
        }
        let (fu, su) = face(us);
        let a = u(&fu);
        if a.is_zero() {
            return;
        }
        let (fv, sv) = face(vset);
        let b = v(&fv);
        if b.is_zero() {
            return;
        }
        let term = a.mul(&b);
        sum = sum.add(&if su * sv < 0 { term.neg() } else { term });
    });
    // the ordered simplex differs from rho by the permutation w
    if signed && permutation_sign(&w) < 0 {
        sum.neg()
    } else {
        sum
    }
}

/// `u ⌣_i v` on every simplex of the right dimension (small domains only).
pub fn cup_i<C: Coefficient>(
    u: &Cochain<C>,
    v: &Cochain<C>,
    i: usize,
    dom: &GridDomain,
    order: &dyn Fn(u32) -> u64,
) -> Result<Cochain<C>> {
    if u.k + v.k < i {
        return Err(Error::Parameter(format!(
            "cup_{i} of cochains of dimensions {} and {}",
            u.k, v.k
        )));
    }
    if C::RING == Ring::Integers && i > 0 {
        return Err(Error::Parameter(
            "integer cup_i products are only available for i = 0".into(),
        ));
    }
    let dim = u.k + v.k - i;
    let mut out = Cochain::zero(dim);
    if dim > dom.m() {
        return Ok(out);
    }
    for rho in dom.simplices(dim)? {
        let val = cup_i_at(&|s| u.get(s), u.k, &|s| v.get(s), v.k, i, &rho, dom, order);
        out.add_at(&rho, &val);
    }
    Ok(out)
}

/// `v(x)(rho)` for an integral `(n-1)`-cochain `x`: `(x mod 2) ⌣_{n-3}
/// (x mod 2)` for `n > 3`, the integral cup square for `n = 3`.
pub fn steenrod_v_at<C: Coefficient>(
    x: &dyn Fn(&Simplex) -> Integer,
    n: usize,
    rho: &Simplex,
    dom: &GridDomain,
    order: &dyn Fn(u32) -> u64,
) -> C {
    let xr = |s: &Simplex| reduce_into::<C>(&x(s));
    cup_i_at(&xr, n - 1, &xr, n - 1, n - 3, rho, dom, order)
}

/// `v(x)` on every `(n+1)`-simplex (small domains only).
pub fn steenrod_v<C: Coefficient>(
    x: &Cochain<Integer>,
    n: usize,
    dom: &GridDomain,
    order: &dyn Fn(u32) -> u64,
) -> Result<Cochain<C>> {
    let mut out = Cochain::zero(n + 1);
    for rho in dom.simplices(n + 1)? {
        out.add_at(
            &rho,
            &steenrod_v_at::<C>(&|s| x.get(s), n, &rho, dom, order),
        );
    }
    Ok(out)
}

/// `v(x)` translated to the complex, on cells of dimension `n + 1`.
pub(crate) fn steenrod_cells<X: FilteredComplex, C: Coefficient>(
    cx: &X,
    x: &(dyn Fn(&Simplex) -> Integer + Sync),
    n: usize,
    cells: &[X::Cell],
    order: &(dyn Fn(u32) -> u64 + Sync),
    par: Parallelism,
) -> Vec<(X::Cell, C)> {
    let dom = cx.domain();
    par::flat_map_chunks(par, cells.len(), 64, |range| {
        let cache = Cached::new(x);
        let xc = |s: &Simplex| cache.get(s);
        cells[range]
            .iter()
            .filter_map(|c| {
                let v: C =
                    cx.from_simplicial(&|rho| steenrod_v_at::<C>(&xc, n, rho, dom, order), c);
                (!v.is_zero()).then_some((*c, v))
            })
            .collect::<Vec<_>>()
    })
}

/// `v(x)` on the `(n+1)`-cells the secondary system needs: those outside
/// `A_{r0}` or no later than the primary witness.
pub(crate) fn secondary_rhs<X: FilteredComplex, C: Coefficient>(
    cx: &X,
    pb: &Pullback<'_>,
    ext: &Extension<'_, X>,
    primary: &PrimaryResult<X::Cell>,
    n: usize,
    par: Parallelism,
) -> Vec<(X::Cell, C)> {
    let order = |v: u32| pb.order_key(v);
    let needed = ranks_needed(pb, primary);
    let top_cells: Vec<X::Cell> = cx
        .cells(n + 1)
        .into_iter()
        .filter(|c| needed(cx.rank(c)))
        .collect();
    let x = |s: &Simplex| ext.value(s);
    steenrod_cells(cx, &x, n, &top_cells, &order, par)
}

/// Outcome of the secondary stage.
#[derive(Clone, Debug)]
pub struct SecondaryResult {
    pub r2: Persistence,
    pub generators: usize,
    pub columns_used: u64,
    pub rhs_entries: usize,
}

/// Persistence of the secondary obstruction, given the primary witness.
pub fn secondary_persistence<X: FilteredComplex>(
    cx: &X,
    pb: &Pullback<'_>,
    primary: &PrimaryResult<X::Cell>,
    n: usize,
    par: Parallelism,
) -> Result<SecondaryResult> {
    if n < 3 {
        return Err(Error::Parameter(
            "the secondary obstruction needs n >= 3".into(),
        ));
    }
    let dom = cx.domain();
    if dom.m() < n + 1 {
        return Ok(SecondaryResult {
            r2: primary.r1,
            generators: 0,
            columns_used: 0,
            rhs_entries: 0,
        });
    }
    if let Persistence::Top { .. } = primary.r1 {
        return Ok(SecondaryResult {
            r2: primary.r1,
            generators: 0,
            columns_used: 0,
            rhs_entries: 0,
        });
    }
    let witness = primary
        .witness
        .clone()
        .ok_or_else(|| Error::Precondition("secondary stage needs the primary witness".into()))?;
    let ext = Extension { cx, pb, witness };
    if n > 3 {
        secondary_run::<X, Z2>(cx, pb, &ext, primary, n, true, par)
    } else if dom.topology() == Topology::Cube {
        secondary_run::<X, Integer>(cx, pb, &ext, primary, n, false, par)
    } else {
        secondary_n3_general(cx, pb, ext, primary, par)
    }
}

pub(crate) fn ranks_needed(
    pb: &Pullback<'_>,
    primary: &PrimaryResult<impl Sized>,
) -> impl Fn(u32) -> bool {
    let r0 = pb.r0;
    let w = primary.witness_rank;
    move |rank| rank < r0 || w.is_some_and(|w| rank <= w)
}

fn combine(
    primary: &PrimaryResult<impl Sized>,
    pb: &Pullback<'_>,
    filt: &Filtration,
    rank: Option<u32>,
) -> Persistence {
    match rank {
        None => {
            let top = filt.top_rank();
            Persistence::Top {
                rank: top,
                value: filt.level(top),
            }
        }
        Some(r) => {
            let r1 = match primary.r1 {
                Persistence::Level { rank, .. } => Some(rank),
                _ => None,
            };
            match r1 {
                Some(r1) if r <= r1 => primary.r1,
                _ if r < pb.r0 => Persistence::BelowR0,
                _ => Persistence::Level {
                    rank: r,
                    value: filt.level(r),
                },
            }
        }
    }
}

/// Earliest-solution run for `d c + sum u_j v(w_j) = v(x)`.
fn secondary_run<X: FilteredComplex, C: Coefficient>(
    cx: &X,
    pb: &Pullback<'_>,
    ext: &Extension<'_, X>,
    primary: &PrimaryResult<X::Cell>,
    n: usize,
    with_generators: bool,
    par: Parallelism,
) -> Result<SecondaryResult> {
    let filt = cx.filtration();
    let order = |v: u32| pb.order_key(v);
    let a = keyed(cx, secondary_rhs::<X, C>(cx, pb, ext, primary, n, par));
    let mut out = SecondaryResult {
        r2: primary.r1,
        generators: 0,
        columns_used: 0,
        rhs_entries: a.len(),
    };
    if a.is_empty() {
        return Ok(out);
    }
    let mut solver = EarliestSolver::<X::Key, C>::new(&a, false);
    let mut pushed_ranks: Vec<u32> = Vec::new();
    let cols = sorted_cells(cx, n, par);
    let mut gens = with_generators.then(|| GeneratorStream::new(cx, n, par));
    let mut solved = false;
    let mut i = 0;
    while i < cols.len() && !solved {
        let rank = cx.rank(&cols[i].1);
        let mut batch: Vec<(Column<X::Key, C>, u32)> = Vec::new();
        while i < cols.len() && cx.rank(&cols[i].1) == rank {
            batch.push((coboundary_column(cx, &cols[i].1), rank));
            i += 1;
        }
        if let Some(g) = gens.as_mut() {
            for w in g.advance_to(rank) {
                out.generators += 1;
                batch.push((keyed(cx, generator_column(cx, &w, n, &order, par)), rank));
            }
        }
        for (col, r) in batch {
            pushed_ranks.push(r);
            if solver.push(&col) {
                solved = true;
                break;
            }
        }
    }
    out.columns_used = solver.pushed() as u64;
    let killed = match solver.solved_at() {
        Some(Some(l)) => Some(pushed_ranks[l as usize]),
        Some(None) => Some(0),
        None => None,
    };
    out.r2 = combine(primary, pb, filt, killed);
    Ok(out)
}

fn keyed<X: FilteredComplex, C: Coefficient>(
    cx: &X,
    entries: Vec<(X::Cell, C)>,
) -> Column<X::Key, C> {
    normalize(entries.into_iter().map(|(c, v)| (cx.key(&c), v)).collect())
}

/// `v(w)` of a cocycle on the complex, over `(n+1)`-cells.
pub(crate) fn generator_column<X: FilteredComplex, C: Coefficient>(
    cx: &X,
    w: &FxHashMap<X::Cell, Integer>,
    n: usize,
    order: &(dyn Fn(u32) -> u64 + Sync),
    par: Parallelism,
) -> Vec<(X::Cell, C)> {
    let mut cells: FxHashSet<X::Cell> = FxHashSet::default();
    for c in w.keys() {
        for (t, _) in cx.coboundary(c) {
            for (u, _) in cx.coboundary(&t) {
                cells.insert(u);
            }
        }
    }
    let mut cells: Vec<X::Cell> = cells.into_iter().collect();
    cells.sort();
    let ws = |s: &Simplex| cx.to_simplicial(w, s);
    steenrod_cells(cx, &ws, n, &cells, order, par)
}

/// Persistent generators of `H^{n-1}(X, A_r; Z)`, produced in rank order.
pub(crate) struct GeneratorStream<'c, X: FilteredComplex> {
    cx: &'c X,
    m_cols: Vec<(X::Key, X::Cell)>,
    n_cols: Vec<(X::Key, X::Cell)>,
    index: FxHashMap<X::Key, u32>,
    pg: PersistentGenerators<X::Key, Integer>,
    next_m: usize,
    next_n: usize,
}

impl<'c, X: FilteredComplex> GeneratorStream<'c, X> {
    pub(crate) fn new(cx: &'c X, n: usize, par: Parallelism) -> Self {
        let m_cols = sorted_cells(cx, n - 1, par);
        let n_cols = sorted_cells(cx, n - 2, par);
        let index = m_cols
            .iter()
            .enumerate()
            .map(|(i, (k, _))| (*k, i as u32))
            .collect();
        GeneratorStream {
            cx,
            m_cols,
            n_cols,
            index,
            pg: PersistentGenerators::new(),
            next_m: 0,
            next_n: 0,
        }
    }

    /// Process every column of rank at most `rank`; return new generators.
    pub(crate) fn advance_to(&mut self, rank: u32) -> Vec<FxHashMap<X::Cell, Integer>> {
        let mut born = Vec::new();
        while self.next_m < self.m_cols.len() && self.cx.rank(&self.m_cols[self.next_m].1) <= rank {
            let i = self.next_m;
            let next_rank = self
                .m_cols
                .get(i + 1)
                .map(|(_, c)| self.cx.rank(c))
                .unwrap_or(u32::MAX);
            while self.next_n < self.n_cols.len()
                && self.cx.rank(&self.n_cols[self.next_n].1) < next_rank
            {
                let c = self.n_cols[self.next_n].1;
                let col: Column<u32, Integer> = normalize(
                    self.cx
                        .coboundary(&c)
                        .into_iter()
                        .map(|(t, s)| (self.index[&self.cx.key(&t)], Integer::from(s)))
                        .collect(),
                );
                self.pg.push_n(&col);
                self.next_n += 1;
            }
            let col: Column<X::Key, Integer> = coboundary_column(self.cx, &self.m_cols[i].1);
            if self.pg.push_m(&col).is_some() {
                born.push(self.pg.generators().len() - 1);
            }
            self.next_m += 1;
        }
        // classes born and killed inside the same rank group never matter
        born.into_iter()
            .map(|k| &self.pg.generators()[k])
            .filter(|g| !self.pg.is_redundant(g))
            .map(|g| {
                g.cocycle
                    .iter()
                    .map(|(j, v)| (self.m_cols[*j as usize].1, v.clone()))
                    .collect()
            })
            .collect()
    }
}

/// `n = 3` off the cube: the cup square is quadratic in the choice of
/// extension. The computed extension is tried first, then each extension
/// obtained by subtracting one generator; anything short of killing the
/// obstruction at `r1` is inconclusive.
fn secondary_n3_general<X: FilteredComplex>(
    cx: &X,
    pb: &Pullback<'_>,
    ext: Extension<'_, X>,
    primary: &PrimaryResult<X::Cell>,
    par: Parallelism,
) -> Result<SecondaryResult> {
    let first = secondary_run::<X, Integer>(cx, pb, &ext, primary, 3, false, par)?;
    if first.r2 == primary.r1 {
        return Ok(first);
    }
    let r1_rank = primary.r1.rank().unwrap_or(pb.r0);
    let mut gens = GeneratorStream::new(cx, 3, par);
    let all = gens.advance_to(u32::MAX);
    let mut tried = 0;
    for w in &all {
        let mut witness = ext.witness.clone();
        for (c, v) in w {
            let e = witness.entry(*c).or_insert_with(Integer::zero);
            *e = e.add(v);
        }
        let alt = Extension { cx, pb, witness };
        // w may be nonzero on A_{r1+}, in which case x - w does not extend y there
        let mut alt_primary = primary.clone();
        let w_rank = w.keys().map(|c| cx.rank(c)).max().unwrap_or(0);
        alt_primary.witness_rank = alt_primary.witness_rank.max(Some(w_rank));
        if w_rank > r1_rank {
            continue;
        }
        tried += 1;
        let res = secondary_run::<X, Integer>(cx, pb, &alt, &alt_primary, 3, false, par)?;
        if res.r2 == primary.r1 {
            return Ok(SecondaryResult {
                generators: all.len(),
                ..res
            });
        }
    }
    log::info!("n = 3 secondary: {tried} alternative extensions tried, none conclusive");
    Ok(SecondaryResult {
        r2: Persistence::Inconclusive,
        generators: all.len(),
        ..first
    })
}

/// Matrix sizes and timings.
#[derive(Clone, Debug, Default)]
pub struct Diagnostics {
    pub primary_columns: u64,
    pub primary_rows: u64,
    pub primary_columns_used: u64,
    pub primary_rhs_entries: usize,
    pub bezout_steps: u64,
    pub generators: usize,
    pub secondary_columns_used: u64,
    pub secondary_rhs_entries: usize,
    /// Wall-clock seconds per stage.
    pub timings: Vec<(&'static str, f64)>,
}

/// Result of the full pipeline.
#[derive(Clone, Debug)]
pub struct RobustnessReport {
    pub mode: Mode,
    pub depth: Depth,
    pub start: Start,
    pub norm: Norm,
    pub n: usize,
    pub m: usize,
    pub alpha: f64,
    /// `alpha * n^{1/p}`.
    pub lipschitz_threshold: f64,
    /// `f'` is simplicial on `{|f| > r0}`.
    pub r0: f64,
    /// Level of the subcomplex `A_{r0}` the obstructions are computed on.
    pub r0_level: f64,
    pub r0_rank: u32,
    /// `r0` lies below the Lipschitz threshold, so the bounds are not
    /// certified.
    pub heuristic: bool,
    pub r1: Persistence,
    pub r2: Option<Persistence>,
    /// Every function within this distance of `f` has a zero.
    pub lower_bound: Option<f64>,
    /// Some function within this distance of `f` has no zero.
    pub upper_bound: Option<f64>,
    /// The upper bound is the `max |f| + alpha` cap.
    pub upper_capped: bool,
    /// Every function within this distance of `f` is nowhere zero.
    pub nonexistence_robustness: Option<f64>,
    pub diagnostics: Diagnostics,
}

impl RobustnessReport {
    /// The persistence the bounds are derived from.
    pub fn final_persistence(&self) -> Persistence {
        match self.r2 {
            Some(Persistence::Inconclusive) | None => self.r1,
            Some(p) => p,
        }
    }
}

/// The starting rank `r0` under the given policy.
pub fn starting_level(
    field: &SampledField,
    filt: &Filtration,
    start: Start,
    par: Parallelism,
) -> Result<Threshold> {
    match start {
        Start::Lipschitz => {
            let floor = filt.first_certified_rank().ok_or_else(|| {
                Error::TooCoarse(format!(
                    "no level reaches alpha * n^(1/p) = {}",
                    filt.threshold
                ))
            })?;
            simplicial_threshold(field, filt, floor, par)
        }
        Start::MinSimplicial => simplicial_threshold(field, filt, 0, par),
    }
}

/// Run the pipeline on a sampled field.
pub fn robustness_report(field: &SampledField, options: &Options) -> Result<RobustnessReport> {
    let (mode, depth, start) = options.resolve(field);
    let par = options.par;
    let mut timings = Vec::new();
    let t = Instant::now();
    let filt = Filtration::build(field, mode, par);
    let threshold = starting_level(field, &filt, start, par)?;
    let r0 = threshold.rank;
    let approx = VertexApprox::new(field, &filt, r0);
    let pb = Pullback::new(&field.domain, &filt, &approx, field.n, r0);
    timings.push(("filtration", t.elapsed().as_secs_f64()));
    let (r1, r2, diagnostics) = match mode {
        Mode::Simplicial => {
            let cx = SimplicialComplex {
                filt: &filt,
                dom: &field.domain,
            };
            run_stages(&cx, &pb, field.n, depth, par, timings)?
        }
        Mode::Cubical => {
            let cx = CubicalComplex::new(&filt, &field.domain);
            run_stages(&cx, &pb, field.n, depth, par, timings)?
        }
    };
    let r0_level = filt.level(r0);
    let mut report = RobustnessReport {
        mode,
        depth,
        start,
        norm: field.norm,
        n: field.n,
        m: field.domain.m(),
        alpha: field.alpha,
        lipschitz_threshold: filt.threshold,
        r0: threshold.value,
        r0_level,
        r0_rank: r0,
        heuristic: r0_level < filt.threshold,
        r1,
        r2,
        lower_bound: None,
        upper_bound: None,
        upper_capped: false,
        nonexistence_robustness: None,
        diagnostics,
    };
    apply_bounds(&mut report, field);
    Ok(report)
}

fn run_stages<X: FilteredComplex>(
    cx: &X,
    pb: &Pullback<'_>,
    n: usize,
    depth: Depth,
    par: Parallelism,
    mut timings: Vec<(&'static str, f64)>,
) -> Result<(Persistence, Option<Persistence>, Diagnostics)> {
    let secondary = depth == Depth::Secondary && n >= 3 && cx.domain().m() > n;
    let t = Instant::now();
    let primary = primary_persistence(cx, pb, n, secondary, par);
    timings.push(("primary", t.elapsed().as_secs_f64()));
    log::info!(
        "primary: {} columns, {} used, {} rhs entries, r1 = {}",
        primary.columns,
        primary.columns_used,
        primary.rhs_entries,
        primary.r1
    );
    let mut diag = Diagnostics {
        primary_columns: primary.columns,
        primary_rows: primary.rows,
        primary_columns_used: primary.columns_used,
        primary_rhs_entries: primary.rhs_entries,
        bezout_steps: primary.bezout_steps,
        ..Diagnostics::default()
    };
    let r2 = if secondary {
        let t = Instant::now();
        let s = secondary_persistence(cx, pb, &primary, n, par)?;
        timings.push(("secondary", t.elapsed().as_secs_f64()));
        log::info!(
            "secondary: {} generators, {} columns used, r2 = {}",
            s.generators,
            s.columns_used,
            s.r2
        );
        diag.generators = s.generators;
        diag.secondary_columns_used = s.columns_used;
        diag.secondary_rhs_entries = s.rhs_entries;
        Some(s.r2)
    } else if depth == Depth::Secondary {
        Some(primary.r1)
    } else {
        None
    };
    diag.timings = timings;
    Ok((primary.r1, r2, diag))
}

fn apply_bounds(report: &mut RobustnessReport, field: &SampledField) {
    let alpha = field.alpha;
    let cap = field.max_magnitude() + alpha;
    let rk = report.final_persistence();
    let n = report.n;
    let m = report.m;
    report.lower_bound = match rk {
        Persistence::Level { rank, value } | Persistence::Top { rank, value }
            if rank > report.r0_rank =>
        {
            Some(value - alpha)
        }
        _ => None,
    };
    let secondary_done = matches!(report.r2, Some(p) if p != Persistence::Inconclusive);
    let dims_ok = m <= n || n < 3 || (secondary_done && m <= n + 1);
    let slack = match report.mode {
        Mode::Simplicial => alpha,
        Mode::Cubical => 3.0 * alpha,
    };
    let level = match rk {
        Persistence::BelowR0 => Some(report.r0_level),
        Persistence::Level { value, .. } => Some(value),
        Persistence::Top { .. } => Some(f64::INFINITY),
        Persistence::Inconclusive => None,
    };
    if dims_ok {
        if let Some(level) = level {
            let ub = (level + slack).min(cap);
            report.upper_capped = ub == cap;
            report.upper_bound = Some(ub);
        }
    }
    if report.lower_bound.is_none() && field.min_magnitude() > alpha {
        report.nonexistence_robustness = Some(field.min_magnitude() - alpha);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::gen_quadratic;

    #[test]
    fn cup_zero_is_front_back() {
        let dom = GridDomain::cube(2, 2).unwrap();
        let t = Simplex::from_steps(0, &[0b01, 0b10]);
        let (vs, _) = t.vertices(&dom);
        let u = |s: &Simplex| Integer::from(if s.vertices(&dom).0[0] == vs[0] { 2 } else { 0 });
        let v = |s: &Simplex| Integer::from(if s.vertices(&dom).0[0] == vs[1] { 3 } else { 0 });
        let id = |v: u32| v as u64;
        assert_eq!(cup_i_at(&u, 1, &v, 1, 0, &t, &dom, &id), Integer::from(6));
    }

    #[test]
    fn constant_field_has_no_obstruction() {
        let dom = GridDomain::cube(2, 6).unwrap();
        let values = (0..dom.vertex_count()).flat_map(|_| [1.0, 0.0]).collect();
        let field = SampledField::new(dom, 2, values, 0.1, Norm::Inf).unwrap();
        let r = robustness_report(&field, &Options::default()).unwrap();
        assert_eq!(r.r1, Persistence::BelowR0);
        assert!(r.lower_bound.is_none());
        assert!((r.nonexistence_robustness.unwrap() - 0.9).abs() < 1e-12);
    }

    #[test]
    fn quadratic_square_has_robust_zero() {
        let field = gen_quadratic(2, 20).unwrap();
        for mode in [Mode::Simplicial, Mode::Cubical] {
            let opts = Options {
                mode: Some(mode),
                start: Some(Start::Lipschitz),
                ..Options::default()
            };
            let r = robustness_report(&field, &opts).unwrap();
            let lb = r.lower_bound.unwrap();
            let ub = r.upper_bound.unwrap();
            assert!(lb <= 0.828 && 0.828 <= ub, "{mode:?}: [{lb}, {ub}]");
        }
    }
}
