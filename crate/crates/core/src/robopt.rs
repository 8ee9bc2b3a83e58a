//! Lower bounds on the uncertainty-optimality curve
//! `OPT(r) = inf_{|g - f| <= r} max_{x in g^{-1}(0)} o(x)`.
//!
//! The obstruction systems are assembled as in [`crate::obstruction`], but
//! their rows are ordered by the objective (the minimum of `o` over the
//! vertices of a cell). After the columns of filtration value at most `r`
//! are reduced, the `o`-level of the lowest surviving entry of the
//! right-hand side is the bound at `r`. One reduction pass yields every
//! point of the curve.

use std::cmp::Ordering;

use crate::domain::Topology;
use crate::error::{Error, Result};
use crate::fields::{ObjectiveField, SampledField};
use crate::filtration::{Filtration, Mode, VertexApprox};
use crate::obstruction::{
    generator_column, primary_persistence, primary_rhs, secondary_rhs, sorted_cells,
    starting_level, CubicalComplex, Depth, Extension, FilteredComplex, GeneratorStream, Options,
    Pullback, SimplicialComplex,
};
use crate::par::Parallelism;
use crate::reduction::{normalize, Column, EarliestSolver};
use crate::ring::{Coefficient, Integer, Z2};

/// One point of the curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptPoint {
    /// Perturbation radius: the filtration value of the last reduced column.
    pub r: f64,
    /// Lower bound on `OPT(r)`; `None` once no robust zero remains.
    pub lower: Option<f64>,
    /// Upper bound on `OPT(r)`, when requested and the dimensions allow it.
    pub upper: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct OptCurve {
    pub mode: Mode,
    pub depth: Depth,
    pub points: Vec<OptPoint>,
    /// Radius at which the robust zero disappears, if reached.
    pub terminated_at: Option<f64>,
}

/// Distinct objective values and the rank of every vertex among them.
struct ObjectiveLevels {
    levels: Vec<f64>,
    rank: Vec<u32>,
}

impl ObjectiveLevels {
    fn new(o: &ObjectiveField) -> Self {
        let mut levels = o.values.clone();
        levels.sort_by(f64::total_cmp);
        levels.dedup_by(|a, b| a.total_cmp(b) == Ordering::Equal);
        let rank = o
            .values
            .iter()
            .map(|v| {
                levels
                    .binary_search_by(|l| l.total_cmp(v))
                    .expect("value present") as u32
            })
            .collect();
        ObjectiveLevels { levels, rank }
    }
}

/// Bounds on `OPT(r)` for every column level up to `r_max`.
pub fn opt_curve(
    field: &SampledField,
    objective: &ObjectiveField,
    r_max: f64,
    options: &Options,
    with_upper: bool,
) -> Result<OptCurve> {
    if objective.domain != field.domain {
        return Err(Error::Domain(
            "objective and field live on different grids".into(),
        ));
    }
    let (mode, depth, start) = options.resolve(field);
    let par = options.par;
    let filt = Filtration::build(field, mode, par);
    let threshold = starting_level(field, &filt, start, par)?;
    let r0 = threshold.rank;
    if r_max < filt.level(r0) {
        return Err(Error::Parameter(format!(
            "r_max {r_max} lies below the initial level {}",
            filt.level(r0)
        )));
    }
    let approx = VertexApprox::new(field, &filt, r0);
    let pb = Pullback::new(&field.domain, &filt, &approx, field.n, r0);
    let olev = ObjectiveLevels::new(objective);
    let n = field.n;
    let m = field.domain.m();
    let secondary = depth == Depth::Secondary && n >= 3 && m > n;
    let dims_ok = m <= n || n < 3 || (secondary && m <= n + 1);
    let slack = match mode {
        Mode::Simplicial => field.alpha,
        Mode::Cubical => 3.0 * field.alpha,
    };
    let raw = match mode {
        Mode::Simplicial => {
            let cx = SimplicialComplex {
                filt: &filt,
                dom: &field.domain,
            };
            raw_curve(&cx, &pb, &olev, n, secondary, r_max, par)?
        }
        Mode::Cubical => {
            let cx = CubicalComplex::new(&filt, &field.domain);
            raw_curve(&cx, &pb, &olev, n, secondary, r_max, par)?
        }
    };
    Ok(assemble(
        raw,
        mode,
        depth,
        r_max,
        (with_upper && dims_ok).then_some(slack),
    ))
}

/// `(r, lower)` pairs for every column level up to `horizon`, ending at the
/// first `None`.
type RawCurve = Vec<(f64, Option<f64>)>;

fn assemble(raw: RawCurve, mode: Mode, depth: Depth, r_max: f64, slack: Option<f64>) -> OptCurve {
    let mut points = Vec::new();
    let mut terminated_at = None;
    for &(r, lower) in &raw {
        if r > r_max {
            break;
        }
        // the reduction at r - slack bounds OPT(r) from above
        let upper = slack.and_then(|s| {
            raw.iter()
                .take_while(|(q, _)| *q <= r - s)
                .last()
                .and_then(|(_, v)| *v)
        });
        points.push(OptPoint { r, lower, upper });
        if lower.is_none() {
            terminated_at = Some(r);
            break;
        }
    }
    OptCurve {
        mode,
        depth,
        points,
        terminated_at,
    }
}

type OKey<K> = (u32, K);

fn okey<X: FilteredComplex>(cx: &X, olev: &ObjectiveLevels, c: &X::Cell) -> OKey<X::Key> {
    (
        cx.min_over_vertices(c, &|v| olev.rank[v as usize]),
        cx.key(c),
    )
}

fn okeyed<X: FilteredComplex, C: Coefficient>(
    cx: &X,
    olev: &ObjectiveLevels,
    entries: Vec<(X::Cell, C)>,
) -> Column<OKey<X::Key>, C> {
    normalize(
        entries
            .into_iter()
            .map(|(c, v)| (okey(cx, olev, &c), v))
            .collect(),
    )
}

/// Reduces the columns group by group in filtration order and records the
/// `o`-level of the lowest surviving right-hand-side entry after each group.
struct Tracker<'a, K, C> {
    solver: EarliestSolver<OKey<K>, C>,
    olev: &'a ObjectiveLevels,
}

impl<K: crate::reduction::RowKey, C: Coefficient> Tracker<'_, K, C> {
    fn push(&mut self, col: &[(OKey<K>, C)]) {
        self.solver.push(col);
    }

    fn lower(&mut self) -> Option<f64> {
        if self.solver.solved_at().is_some() {
            return None;
        }
        self.solver
            .rhs_pivot()
            .map(|((o, _), _)| self.olev.levels[o as usize])
    }
}

fn raw_curve<X: FilteredComplex>(
    cx: &X,
    pb: &Pullback<'_>,
    olev: &ObjectiveLevels,
    n: usize,
    secondary: bool,
    horizon: f64,
    par: Parallelism,
) -> Result<RawCurve> {
    let filt = cx.filtration();
    let (_, a) = primary_rhs(cx, pb, n, par);
    let mut prim = Tracker {
        solver: EarliestSolver::new(&okeyed(cx, olev, a), false),
        olev,
    };
    let cols = sorted_cells(cx, n - 1, par);
    let mut primary_curve: Vec<(u32, Option<f64>)> = Vec::new();
    for_each_group(cx, &cols, |rank, group| {
        for c in group {
            let entries = cx
                .coboundary(c)
                .into_iter()
                .map(|(t, s)| (t, Integer::from(s)))
                .collect();
            prim.push(&okeyed(cx, olev, entries));
        }
        if rank >= pb.r0 || prim.lower().is_none() {
            primary_curve.push((rank, prim.lower()));
        }
        prim.lower().is_some() && filt.level(rank) <= horizon
    });
    let mut merged: Vec<(u32, Option<f64>)> = primary_curve;
    if secondary {
        let sec = secondary_curve(cx, pb, olev, n, par, horizon)?;
        merged = merge(&merged, &sec);
    }
    let mut out = Vec::new();
    let mut started = false;
    for (rank, lower) in merged {
        let r = if rank < pb.r0 {
            filt.level(pb.r0)
        } else {
            filt.level(rank)
        };
        if r > horizon {
            break;
        }
        if started && out.last().is_some_and(|&(q, _)| q == r) {
            out.pop();
        }
        started = true;
        out.push((r, lower));
        if lower.is_none() {
            break;
        }
    }
    Ok(out)
}

/// Pointwise maximum of two step curves indexed by rank; a curve that has
/// terminated contributes nothing.
fn merge(a: &[(u32, Option<f64>)], b: &[(u32, Option<f64>)]) -> Vec<(u32, Option<f64>)> {
    let at = |c: &[(u32, Option<f64>)], rank: u32| -> Option<f64> {
        c.iter()
            .take_while(|(r, _)| *r <= rank)
            .last()
            .and_then(|(_, v)| *v)
    };
    let mut ranks: Vec<u32> = a.iter().chain(b).map(|(r, _)| *r).collect();
    ranks.sort_unstable();
    ranks.dedup();
    let b_start = b.first().map(|(r, _)| *r).unwrap_or(u32::MAX);
    ranks
        .into_iter()
        .map(|rank| {
            let va = at(a, rank);
            let vb = if rank < b_start { None } else { at(b, rank) };
            let v = match (va, vb) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            };
            (rank, v)
        })
        .collect()
}

fn for_each_group<X: FilteredComplex>(
    cx: &X,
    cols: &[(X::Key, X::Cell)],
    mut f: impl FnMut(u32, &[X::Cell]) -> bool,
) {
    let mut i = 0;
    let mut group = Vec::new();
    while i < cols.len() {
        let rank = cx.rank(&cols[i].1);
        group.clear();
        while i < cols.len() && cx.rank(&cols[i].1) == rank {
            group.push(cols[i].1);
            i += 1;
        }
        if !f(rank, &group) {
            return;
        }
    }
}

fn secondary_curve<X: FilteredComplex>(
    cx: &X,
    pb: &Pullback<'_>,
    olev: &ObjectiveLevels,
    n: usize,
    par: Parallelism,
    horizon: f64,
) -> Result<Vec<(u32, Option<f64>)>> {
    let primary = primary_persistence(cx, pb, n, true, par);
    let Some(witness) = primary.witness.clone() else {
        return Ok(Vec::new());
    };
    if primary.r1.rank().is_none() && primary.witness_rank.is_none() && primary.rhs_entries > 0 {
        // the primary obstruction never dies
        return Ok(Vec::new());
    }
    let ext = Extension { cx, pb, witness };
    if n > 3 {
        Ok(secondary_track::<X, Z2>(
            cx, pb, &ext, &primary, olev, n, true, par, horizon,
        ))
    } else if cx.domain().topology() == Topology::Cube {
        Ok(secondary_track::<X, Integer>(
            cx, pb, &ext, &primary, olev, n, false, par, horizon,
        ))
    } else {
        Err(Error::Precondition(
            "the n = 3 secondary curve is only available on cube domains".into(),
        ))
    }
}

#[allow(clippy::too_many_arguments)]
fn secondary_track<X: FilteredComplex, C: Coefficient>(
    cx: &X,
    pb: &Pullback<'_>,
    ext: &Extension<'_, X>,
    primary: &crate::obstruction::PrimaryResult<X::Cell>,
    olev: &ObjectiveLevels,
    n: usize,
    with_generators: bool,
    par: Parallelism,
    horizon: f64,
) -> Vec<(u32, Option<f64>)> {
    let filt = cx.filtration();
    let a = okeyed(
        cx,
        olev,
        secondary_rhs::<X, C>(cx, pb, ext, primary, n, par),
    );
    let mut t = Tracker {
        solver: EarliestSolver::new(&a, false),
        olev,
    };
    let order = |v: u32| pb.order_key(v);
    let cols = sorted_cells(cx, n, par);
    let mut gens = with_generators.then(|| GeneratorStream::new(cx, n, par));
    let mut out = Vec::new();
    for_each_group(cx, &cols, |rank, group| {
        for c in group {
            let entries = cx
                .coboundary(c)
                .into_iter()
                .map(|(t, s)| (t, C::from_i64(s)))
                .collect();
            t.push(&okeyed(cx, olev, entries));
        }
        if let Some(g) = gens.as_mut() {
            for w in g.advance_to(rank) {
                t.push(&okeyed(
                    cx,
                    olev,
                    generator_column::<X, C>(cx, &w, n, &order, par),
                ));
            }
        }
        out.push((rank, t.lower()));
        t.lower().is_some() && filt.level(rank) <= horizon
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::GridDomain;
    use crate::fields::Norm;

    fn line(g: u32) -> (SampledField, ObjectiveField) {
        let dom = GridDomain::cube(1, g).unwrap();
        let xs: Vec<f64> = (0..g)
            .map(|i| -1.0 + 2.0 * i as f64 / (g - 1) as f64)
            .collect();
        let h = 2.0 / (g - 1) as f64;
        let f = SampledField::new(dom.clone(), 1, xs.clone(), h, Norm::Inf).unwrap();
        let o = ObjectiveField::new(dom, xs, h).unwrap();
        (f, o)
    }

    #[test]
    fn linear_objective_tracks_minus_r() {
        let (f, o) = line(40);
        let curve = opt_curve(&f, &o, 0.9, &Options::default(), true).unwrap();
        assert!(curve.points.len() > 10);
        for p in &curve.points {
            let lower = p.lower.unwrap();
            assert!(lower <= -p.r + 1e-12);
            assert!(
                (lower + p.r).abs() <= f.alpha + o.alpha + 1e-12,
                "r {} bound {lower}",
                p.r
            );
            if let Some(upper) = p.upper {
                assert!(upper >= -p.r - 1e-12);
            }
        }
    }

    #[test]
    fn constant_objective_gives_flat_curve() {
        let (f, o) = line(20);
        let flat = ObjectiveField::new(o.domain.clone(), vec![0.5; o.values.len()], 0.0).unwrap();
        let curve = opt_curve(&f, &flat, 2.0, &Options::default(), false).unwrap();
        let values: Vec<_> = curve.points.iter().filter_map(|p| p.lower).collect();
        assert!(values.iter().all(|&v| v == 0.5));
        assert!(curve.terminated_at.is_some());
    }
}
