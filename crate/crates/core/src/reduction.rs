//! Exact sparse column reduction over the integers and over `Z2`.
//!
//! Columns are admitted one at a time and kept reduced: no two stored
//! columns share the row of their lowest nonzero entry. Over the integers a
//! collision whose lowest values do not divide each other is resolved with
//! a unimodular 2x2 transformation from the extended Euclidean algorithm,
//! which also rewrites the stored column. The lattice spanned by the
//! admitted columns never changes.
//!
//! [`EarliestSolver`] answers the earliest-solution problem: find `x` with
//! `M x = a` whose last nonzero entry is as early as possible.
//! [`PersistentGenerators`] produces cocycles whose prefixes generate the
//! relative cohomology at every filtration step.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Debug;
use std::hash::Hash;

use rustc_hash::FxHashMap;

use crate::ring::Coefficient;

/// Row index type: any totally ordered key.
pub trait RowKey: Copy + Ord + Hash + Eq + Send + Sync + Debug + 'static {}

impl<T: Copy + Ord + Hash + Eq + Send + Sync + Debug + 'static> RowKey for T {}

/// Sparse column: `(row, coefficient)` pairs with strictly increasing rows
/// and no zero coefficients.
pub type Column<R, C> = Vec<(R, C)>;

/// `fx * x + fy * y`.
pub fn lin_comb<R: RowKey, C: Coefficient>(
    x: &[(R, C)],
    fx: &C,
    y: &[(R, C)],
    fy: &C,
) -> Column<R, C> {
    let mut out = Vec::with_capacity(x.len() + y.len());
    let (mut i, mut j) = (0, 0);
    let push = |out: &mut Column<R, C>, r: R, c: C| {
        if !c.is_zero() {
            out.push((r, c));
        }
    };
    while i < x.len() || j < y.len() {
        let ord = match (x.get(i), y.get(j)) {
            (Some(a), Some(b)) => a.0.cmp(&b.0),
            (Some(_), None) => Ordering::Less,
            _ => Ordering::Greater,
        };
        match ord {
            Ordering::Less => {
                push(&mut out, x[i].0, fx.mul(&x[i].1));
                i += 1;
            }
            Ordering::Greater => {
                push(&mut out, y[j].0, fy.mul(&y[j].1));
                j += 1;
            }
            Ordering::Equal => {
                push(&mut out, x[i].0, fx.mul(&x[i].1).add(&fy.mul(&y[j].1)));
                i += 1;
                j += 1;
            }
        }
    }
    out
}

/// Sort by row and merge duplicate rows, dropping zeros.
pub fn normalize<R: RowKey, C: Coefficient>(mut entries: Vec<(R, C)>) -> Column<R, C> {
    entries.sort_by_key(|a| a.0);
    let mut out: Column<R, C> = Vec::with_capacity(entries.len());
    for (r, c) in entries {
        match out.last_mut() {
            Some(last) if last.0 == r => last.1 = last.1.add(&c),
            _ => out.push((r, c)),
        }
        if out.last().is_some_and(|l| l.1.is_zero()) {
            out.pop();
        }
    }
    out
}

struct Entry<R, C>(R, C);

impl<R: Ord, C> PartialEq for Entry<R, C> {
    fn eq(&self, other: &Self) -> bool {
        self.0 == other.0
    }
}

impl<R: Ord, C> Eq for Entry<R, C> {}

impl<R: Ord, C> PartialOrd for Entry<R, C> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<R: Ord, C> Ord for Entry<R, C> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.cmp(&other.0)
    }
}

/// Column under reduction: a max-heap of entries in which duplicate rows
/// are merged lazily, so adding a column costs `O(k log n)` regardless of
/// how dense the working column has become.
pub struct WorkColumn<R, C> {
    heap: BinaryHeap<Entry<R, C>>,
    compact_len: usize,
}

impl<R: RowKey, C: Coefficient> WorkColumn<R, C> {
    pub fn new() -> Self {
        WorkColumn {
            heap: BinaryHeap::new(),
            compact_len: 0,
        }
    }

    pub fn from_column(col: &[(R, C)]) -> Self {
        let heap: BinaryHeap<Entry<R, C>> = col.iter().map(|(r, c)| Entry(*r, c.clone())).collect();
        let compact_len = heap.len();
        WorkColumn { heap, compact_len }
    }

    pub fn add_scaled(&mut self, col: &[(R, C)], factor: &C) {
        if factor.is_zero() {
            return;
        }
        for (r, c) in col {
            self.heap.push(Entry(*r, c.mul(factor)));
        }
        if self.heap.len() > 2 * self.compact_len + 256 {
            let col = self.take();
            *self = Self::from_column(&col);
        }
    }

    /// Lowest nonzero entry (largest row), or `None` for the zero column.
    pub fn pivot(&mut self) -> Option<(R, C)> {
        loop {
            let Entry(row, mut sum) = self.heap.pop()?;
            while self.heap.peek().is_some_and(|e| e.0 == row) {
                let Entry(_, c) = self.heap.pop().expect("peeked");
                sum = sum.add(&c);
            }
            if !sum.is_zero() {
                self.heap.push(Entry(row, sum.clone()));
                return Some((row, sum));
            }
        }
    }

    /// Drain into a normalized column.
    pub fn take(&mut self) -> Column<R, C> {
        let entries: Vec<(R, C)> = std::mem::take(&mut self.heap)
            .into_iter()
            .map(|Entry(r, c)| (r, c))
            .collect();
        self.compact_len = 0;
        normalize(entries)
    }

    pub fn is_zero(&mut self) -> bool {
        self.pivot().is_none()
    }
}

impl<R: RowKey, C: Coefficient> Default for WorkColumn<R, C> {
    fn default() -> Self {
        Self::new()
    }
}

/// Outcome of reducing one column.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Reduced<R, C> {
    Zero,
    /// Lowest entry sits in a row no stored column occupies.
    Pivot(R, C),
    /// Divisibility was required and the colliding lowest value does not
    /// divide this one.
    Stuck(R, C),
}

/// Stored reduced columns with a row-to-column lookup of lowest entries,
/// optionally with change-of-basis columns over the original indices.
pub struct ReducedPrefix<R, C> {
    cols: Vec<Column<R, C>>,
    bases: Vec<Column<u32, C>>,
    pivots: FxHashMap<R, u32>,
    track_basis: bool,
    /// Count of non-divisible collisions resolved by a Bezout step.
    pub bezout_steps: u64,
    /// Count of column additions.
    pub additions: u64,
}

impl<R: RowKey, C: Coefficient> ReducedPrefix<R, C> {
    pub fn new(track_basis: bool) -> Self {
        ReducedPrefix {
            cols: Vec::new(),
            bases: Vec::new(),
            pivots: FxHashMap::default(),
            track_basis,
            bezout_steps: 0,
            additions: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.cols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cols.is_empty()
    }

    pub fn pivot_value(&self, row: &R) -> Option<&C> {
        self.pivots
            .get(row)
            .map(|&j| &self.cols[j as usize].last().expect("nonzero column").1)
    }

    pub fn columns(&self) -> impl Iterator<Item = &Column<R, C>> {
        self.cols.iter()
    }

    /// Whether all stored lowest rows are distinct and indexed.
    pub fn is_reduced(&self) -> bool {
        self.cols.iter().enumerate().all(|(j, c)| {
            c.last()
                .is_some_and(|l| self.pivots.get(&l.0) == Some(&(j as u32)))
        }) && self.pivots.len() == self.cols.len()
    }

    /// Reduce `work` (with its change of basis `basis`) against the stored
    /// columns. With `force_divisibility`, stop at the first collision
    /// whose lowest value does not divide the working one.
    pub fn reduce(
        &mut self,
        work: &mut WorkColumn<R, C>,
        mut basis: Option<&mut WorkColumn<u32, C>>,
        force_divisibility: bool,
    ) -> Reduced<R, C> {
        loop {
            let Some((row, q)) = work.pivot() else {
                return Reduced::Zero;
            };
            let Some(&j) = self.pivots.get(&row) else {
                return Reduced::Pivot(row, q);
            };
            let j = j as usize;
            let p = self.cols[j].last().expect("nonzero column").1.clone();
            if p.divides(&q) {
                let f = p.quotient_of(&q).neg();
                work.add_scaled(&self.cols[j], &f);
                if let Some(b) = basis.as_deref_mut() {
                    b.add_scaled(&self.bases[j], &f);
                }
                self.additions += 1;
                continue;
            }
            if force_divisibility {
                return Reduced::Stuck(row, q);
            }
            // (coll, curr) <- (a coll + b curr, c coll + d curr)
            let [a, b, c, d] = C::bezout(&p, &q);
            let curr = work.take();
            let coll = std::mem::take(&mut self.cols[j]);
            self.cols[j] = lin_comb(&coll, &a, &curr, &b);
            let next = lin_comb(&coll, &c, &curr, &d);
            *work = WorkColumn::from_column(&next);
            if let Some(bw) = basis.as_deref_mut() {
                let cb = bw.take();
                let ob = std::mem::take(&mut self.bases[j]);
                self.bases[j] = lin_comb(&ob, &a, &cb, &b);
                *bw = WorkColumn::from_column(&lin_comb(&ob, &c, &cb, &d));
            }
            self.bezout_steps += 1;
            self.additions += 2;
        }
    }

    /// Store a reduced column whose pivot row is free.
    pub fn insert(&mut self, col: Column<R, C>, basis: Column<u32, C>) {
        let row = col.last().expect("nonzero column").0;
        debug_assert!(!self.pivots.contains_key(&row));
        self.pivots.insert(row, self.cols.len() as u32);
        self.cols.push(col);
        if self.track_basis {
            self.bases.push(basis);
        }
    }

    /// Reduce a fresh column with index `index`; store it when nonzero.
    /// Returns the reduced column's change of basis when it becomes zero.
    pub fn admit(&mut self, col: &[(R, C)], index: u32) -> (Reduced<R, C>, Option<Column<u32, C>>) {
        let mut work = WorkColumn::from_column(col);
        let mut basis = self
            .track_basis
            .then(|| WorkColumn::from_column(&[(index, C::one())]));
        let out = self.reduce(&mut work, basis.as_mut(), false);
        let basis = basis.map(|mut b| b.take());
        match &out {
            Reduced::Pivot(..) => {
                self.insert(work.take(), basis.unwrap_or_default());
                (out, None)
            }
            Reduced::Zero => (out, basis),
            Reduced::Stuck(..) => unreachable!("divisibility not forced"),
        }
    }
}

/// Incremental solver for the earliest-solution problem.
///
/// Columns of `M` are pushed in order. After each one the right-hand side
/// is reduced again (forcing divisibility, so that the solution solves
/// `M x = a` rather than `M x = k a`); the first push after which it
/// vanishes is the earliest index `l` of a solution.
pub struct EarliestSolver<R, C> {
    prefix: ReducedPrefix<R, C>,
    a: WorkColumn<R, C>,
    a_basis: Option<WorkColumn<u32, C>>,
    pushed: u32,
    solved: Option<Option<u32>>,
}

impl<R: RowKey, C: Coefficient> EarliestSolver<R, C> {
    /// `track_solution` keeps change-of-basis data so that the solution
    /// vector can be returned; without it only the index is available.
    pub fn new(a: &[(R, C)], track_solution: bool) -> Self {
        let mut s = EarliestSolver {
            prefix: ReducedPrefix::new(track_solution),
            a: WorkColumn::from_column(a),
            a_basis: track_solution.then(WorkColumn::new),
            pushed: 0,
            solved: None,
        };
        if s.a.is_zero() {
            s.solved = Some(None);
        }
        s
    }

    /// Admit the next column; returns `true` once a solution exists.
    pub fn push(&mut self, col: &[(R, C)]) -> bool {
        let index = self.pushed;
        self.pushed += 1;
        if self.solved.is_some() {
            return true;
        }
        self.prefix.admit(col, index);
        // retry only when some stored column collides with the lowest of a
        if let Some((row, _)) = self.a.pivot() {
            if self.prefix.pivots.contains_key(&row) {
                let r = self.prefix.reduce(&mut self.a, self.a_basis.as_mut(), true);
                if r == Reduced::Zero {
                    self.solved = Some(Some(index));
                }
            }
        }
        self.solved.is_some()
    }

    pub fn pushed(&self) -> u32 {
        self.pushed
    }

    /// `Some(None)` when `a = 0`, `Some(Some(l))` for the earliest index.
    pub fn solved_at(&self) -> Option<Option<u32>> {
        self.solved
    }

    /// The solution `x` (sparse over column indices), if solved and tracked.
    pub fn solution(&mut self) -> Option<Column<u32, C>> {
        self.solved?;
        let b = self.a_basis.as_mut()?;
        let col = b.take();
        let x: Column<u32, C> = col.iter().map(|(i, c)| (*i, c.neg())).collect();
        *b = WorkColumn::from_column(&col);
        Some(x)
    }

    /// Lowest remaining entry of the reduced right-hand side.
    pub fn rhs_pivot(&mut self) -> Option<(R, C)> {
        self.a.pivot()
    }

    pub fn prefix(&self) -> &ReducedPrefix<R, C> {
        &self.prefix
    }
}

/// Solution of an earliest-solution instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EarliestSolution<C> {
    /// Index of the last column the solution may use; `None` when `a = 0`.
    pub last: Option<u32>,
    pub x: Column<u32, C>,
}

/// Solve `M x = a` minimizing the index of the last nonzero of `x`.
pub fn earliest_solution<R: RowKey, C: Coefficient>(
    columns: &[Column<R, C>],
    a: &[(R, C)],
) -> Option<EarliestSolution<C>> {
    let mut s = EarliestSolver::new(a, true);
    if s.solved_at().is_none() {
        for col in columns {
            if s.push(col) {
                break;
            }
        }
    }
    let last = s.solved_at()?;
    let x = s.solution().expect("tracked");
    Some(EarliestSolution { last, x })
}

/// A cocycle produced by [`PersistentGenerators`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Generator<C> {
    /// Index of the top-dimensional column at which it was found; it
    /// vanishes on the filtration strictly above that column's value.
    pub index: u32,
    /// Coefficients over column indices of `M`.
    pub cocycle: Column<u32, C>,
}

/// Online persistent-generator computation.
///
/// `M` holds the coboundaries of the `(n-1)`-cells in filtration order,
/// `N` those of the `(n-2)`-cells with rows given as `M` indices. Before
/// pushing `M` column `i`, every `N` column whose filtration index is `i`
/// must be pushed. Each pushed `M` column that reduces to zero gives a new
/// cocycle; it is kept as a generator unless an `N` column with lowest row
/// `i` divides its lowest coefficient (then it is cohomologous to a
/// combination of earlier generators).
pub struct PersistentGenerators<R, C> {
    m: ReducedPrefix<R, C>,
    n: ReducedPrefix<u32, C>,
    pushed_m: u32,
    pushed_n: u32,
    generators: Vec<Generator<C>>,
    mu: Vec<u32>,
}

impl<R: RowKey, C: Coefficient> PersistentGenerators<R, C> {
    pub fn new() -> Self {
        PersistentGenerators {
            m: ReducedPrefix::new(true),
            n: ReducedPrefix::new(false),
            pushed_m: 0,
            pushed_n: 0,
            generators: Vec::new(),
            mu: Vec::new(),
        }
    }

    pub fn push_n(&mut self, col: &[(u32, C)]) {
        debug_assert!(col.last().is_none_or(|l| l.0 <= self.pushed_m));
        self.n.admit(col, self.pushed_n);
        self.pushed_n += 1;
    }

    /// Push `M` column `i`; returns the new generator, if any.
    pub fn push_m(&mut self, col: &[(R, C)]) -> Option<&Generator<C>> {
        let i = self.pushed_m;
        self.pushed_m += 1;
        let (out, basis) = self.m.admit(col, i);
        let mut added = false;
        if out == Reduced::Zero {
            let g = basis.expect("basis tracked");
            let (low, gl) = g.last().cloned().expect("basis contains its own column");
            debug_assert_eq!(low, i);
            let killed = self.n.pivot_value(&i).is_some_and(|p| p.divides(&gl));
            if !killed {
                self.generators.push(Generator {
                    index: i,
                    cocycle: g,
                });
                added = true;
            }
        }
        self.mu.push(self.generators.len() as u32);
        if added {
            self.generators.last()
        } else {
            None
        }
    }

    /// Whether `g` has become redundant: some coboundary now shares its
    /// lowest entry with a coefficient dividing it.
    pub fn is_redundant(&self, g: &Generator<C>) -> bool {
        let gl = &g.cocycle.last().expect("nonzero cocycle").1;
        self.n.pivot_value(&g.index).is_some_and(|p| p.divides(gl))
    }

    pub fn generators(&self) -> &[Generator<C>] {
        &self.generators
    }

    /// `mu[i]`: number of generators after `M` column `i`.
    pub fn mu(&self) -> &[u32] {
        &self.mu
    }
}

impl<R: RowKey, C: Coefficient> Default for PersistentGenerators<R, C> {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::{Integer, Z2};

    fn col(entries: &[(u32, i64)]) -> Column<u32, Integer> {
        normalize(
            entries
                .iter()
                .map(|&(r, c)| (r, Integer::from(c)))
                .collect(),
        )
    }

    #[test]
    fn identity_system() {
        let m = vec![col(&[(0, 1)]), col(&[(1, 1)])];
        let s = earliest_solution(&m, &col(&[(0, 3), (1, 5)])).unwrap();
        assert_eq!(s.last, Some(1));
        assert_eq!(s.x, col(&[(0, 3), (1, 5)]));
    }

    #[test]
    fn divisibility_blocks_solution() {
        let m = vec![col(&[(0, 2)])];
        assert!(earliest_solution(&m, &col(&[(0, 3)])).is_none());
    }

    #[test]
    fn needs_second_column() {
        let m = vec![col(&[(0, 1)]), col(&[(0, 1), (1, 2)])];
        let s = earliest_solution(&m, &col(&[(0, 2), (1, 2)])).unwrap();
        assert_eq!(s.last, Some(1));
        assert_eq!(s.x, col(&[(0, 1), (1, 1)]));
    }

    #[test]
    fn zero_rhs_needs_no_columns() {
        let m = vec![col(&[(0, 1)])];
        let s = earliest_solution(&m, &[]).unwrap();
        assert_eq!(s.last, None);
        assert!(s.x.is_empty());
    }

    #[test]
    fn no_collision_leaves_column_unchanged() {
        let mut p = ReducedPrefix::<u32, Integer>::new(false);
        p.admit(&col(&[(3, 2)]), 0);
        let mut w = WorkColumn::from_column(&col(&[(0, 1), (2, 5)]));
        assert_eq!(
            p.reduce(&mut w, None, false),
            Reduced::Pivot(2, Integer::from(5))
        );
        assert_eq!(w.take(), col(&[(0, 1), (2, 5)]));
    }

    #[test]
    fn forced_divisibility_stops_early() {
        let mut p = ReducedPrefix::<u32, Integer>::new(false);
        p.admit(&col(&[(0, 1), (1, 2)]), 0);
        let mut w = WorkColumn::from_column(&col(&[(1, 3)]));
        assert_eq!(
            p.reduce(&mut w, None, true),
            Reduced::Stuck(1, Integer::from(3))
        );
        assert_eq!(w.take(), col(&[(1, 3)]));
        assert_eq!(p.columns().next().unwrap(), &col(&[(0, 1), (1, 2)]));
    }

    #[test]
    fn collision_four_six_leaves_gcd() {
        let mut p = ReducedPrefix::<u32, Integer>::new(true);
        p.admit(&col(&[(0, 1), (1, 4)]), 0);
        let (r, _) = p.admit(&col(&[(1, 6)]), 1);
        // the stored column's lowest value becomes gcd(4, 6) = 2 and the
        // new column keeps a nonzero entry only above row 1
        assert_eq!(p.pivot_value(&1).unwrap().abs(), Integer::from(2));
        assert!(matches!(r, Reduced::Pivot(0, _)));
        assert!(p.is_reduced());
    }

    #[test]
    fn z2_reduction() {
        let m: Vec<Column<u32, Z2>> = vec![
            vec![(0, Z2(true)), (1, Z2(true))],
            vec![(1, Z2(true)), (2, Z2(true))],
        ];
        let s = earliest_solution(&m, &[(0, Z2(true)), (2, Z2(true))]).unwrap();
        assert_eq!(s.last, Some(1));
        assert_eq!(s.x.len(), 2);
    }

    #[test]
    fn heap_column_merges_duplicates() {
        let mut w = WorkColumn::from_column(&col(&[(1, 1), (5, 2)]));
        w.add_scaled(&col(&[(5, 1), (7, 3)]), &Integer::from(-2));
        w.add_scaled(&col(&[(7, 1)]), &Integer::from(6));
        assert_eq!(w.pivot(), Some((1, Integer::from(1))));
        assert_eq!(w.take(), col(&[(1, 1)]));
    }

    #[test]
    fn hollow_triangle_has_one_generator() {
        // edges e0 = ab, e1 = bc, e2 = ac in filtration order; no 2-simplices,
        // so every M column is zero. Vertex coboundaries are the N columns.
        let mut pg = PersistentGenerators::<u32, Integer>::new();
        assert!(pg.push_m(&[]).is_some());
        pg.push_n(&col(&[(0, -1), (1, 1)])); // b
        assert!(pg.push_m(&[]).is_none());
        pg.push_n(&col(&[(0, -1), (2, -1)])); // a
        pg.push_n(&col(&[(1, 1), (2, 1)])); // c
        assert!(pg.push_m(&[]).is_none());
        assert_eq!(pg.mu(), &[1, 1, 1]);
        assert_eq!(pg.generators()[0].cocycle, col(&[(0, 1)]));
    }
}
