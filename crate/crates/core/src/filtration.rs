//! Superlevel filtrations of `|f|`, the vertex approximation `f'` to the
//! cross-polytope sphere, and the level from which `f'` is simplicial.
//!
//! Filtration values are kept as ranks into the sorted distinct vertex
//! magnitudes, so every comparison is exact.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_traits::float::FloatCore;

use crate::domain::{submasks, Cell, GridDomain, Simplex, SphereVertex};
use crate::error::{Error, Result};
use crate::fields::{Norm, SampledField};
use crate::par::{self, Parallelism};

/// How simplices receive filtration values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Minimum of `|f|` over the simplex's vertices.
    Simplicial,
    /// Minimum of `|f|` over the vertices of the smallest grid cube
    /// containing the simplex.
    Cubical,
}

/// Exact order on `|v|_p` for two sample vectors.
pub fn cmp_magnitude(a: &[f64], b: &[f64], norm: Norm) -> Ordering {
    match norm {
        Norm::Inf => norm.of(a).total_cmp(&norm.of(b)),
        Norm::L1 | Norm::L2 => {
            let (fa, fb) = (norm.of(a), norm.of(b));
            let scale = fa.max(fb);
            if (fa - fb).abs() > scale * 1e-9 {
                return fa.total_cmp(&fb);
            }
            let square = norm == Norm::L2;
            exact_sum(a, square).cmp_with(&exact_sum(b, square))
        }
    }
}

/// `sum |x|` or `sum x^2` as `mantissa * 2^exponent`.
struct Dyadic {
    mantissa: BigInt,
    exponent: i32,
}

impl Dyadic {
    fn cmp_with(&self, other: &Dyadic) -> Ordering {
        let e = self.exponent.min(other.exponent);
        let a = &self.mantissa << (self.exponent - e) as usize;
        let b = &other.mantissa << (other.exponent - e) as usize;
        a.cmp(&b)
    }
}

fn exact_sum(v: &[f64], square: bool) -> Dyadic {
    let terms: Vec<(BigInt, i32)> = v
        .iter()
        .map(|x| {
            let (mant, exp, _) = x.abs().integer_decode();
            let mant = BigInt::from(mant);
            if square {
                (&mant * &mant, 2 * exp as i32)
            } else {
                (mant, exp as i32)
            }
        })
        .collect();
    let exponent = terms.iter().map(|t| t.1).min().unwrap_or(0);
    let mantissa = terms
        .iter()
        .map(|(m, e)| m << (e - exponent) as usize)
        .sum();
    Dyadic { mantissa, exponent }
}

/// Ranked vertex magnitudes and the filtration they induce.
#[derive(Clone, Debug)]
pub struct Filtration {
    pub mode: Mode,
    /// Rank of each vertex's magnitude among the distinct magnitudes.
    pub rank: Vec<u32>,
    /// Distinct magnitudes in increasing order; `levels[rank]`.
    pub levels: Vec<f64>,
    /// `alpha * n^{1/p}`: levels below it carry no homotopy guarantee.
    pub threshold: f64,
}

impl Filtration {
    pub fn build(field: &SampledField, mode: Mode, par: Parallelism) -> Filtration {
        let nv = field.domain.vertex_count();
        let mut order: Vec<u32> = (0..nv as u32).collect();
        let mags: Vec<f64> = par::map_range(par, nv, |v| field.magnitude(v as u32));
        let norm = field.norm;
        order.sort_by(|&a, &b| {
            mags[a as usize].total_cmp(&mags[b as usize]).then_with(|| {
                if norm == Norm::Inf {
                    Ordering::Equal
                } else {
                    cmp_magnitude(field.value(a), field.value(b), norm)
                }
            })
        });
        if norm != Norm::Inf {
            // rounded magnitudes may disagree with the exact order
            order.sort_by(|&a, &b| cmp_magnitude(field.value(a), field.value(b), norm));
        }
        let mut rank = vec![0u32; nv];
        let mut levels = Vec::new();
        for (i, &v) in order.iter().enumerate() {
            let new_level = i == 0
                || cmp_magnitude(field.value(order[i - 1]), field.value(v), norm)
                    != Ordering::Equal;
            if new_level {
                levels.push(mags[v as usize]);
            }
            rank[v as usize] = levels.len() as u32 - 1;
        }
        Filtration {
            mode,
            rank,
            levels,
            threshold: field.alpha * norm.dim_factor(field.n),
        }
    }

    pub fn level(&self, rank: u32) -> f64 {
        self.levels[rank as usize]
    }

    pub fn top_rank(&self) -> u32 {
        self.levels.len() as u32 - 1
    }

    /// Smallest rank whose level is at least `alpha * n^{1/p}`.
    pub fn first_certified_rank(&self) -> Option<u32> {
        self.levels
            .iter()
            .position(|&l| l >= self.threshold)
            .map(|r| r as u32)
    }

    /// Smallest rank whose level is positive.
    pub fn first_positive_rank(&self) -> Option<u32> {
        self.levels.iter().position(|&l| l > 0.0).map(|r| r as u32)
    }

    pub fn vertex_rank(&self, v: u32) -> u32 {
        self.rank[v as usize]
    }

    /// Minimum vertex rank over a grid cube.
    pub fn cell_rank(&self, dom: &GridDomain, cell: &Cell) -> u32 {
        let mut best = self.rank[cell.base as usize];
        for sub in submasks(cell.mask) {
            let v = dom.shift(cell.base, sub, true).expect("cell inside domain");
            best = best.min(self.rank[v as usize]);
        }
        best
    }

    pub fn simplex_rank(&self, dom: &GridDomain, s: &Simplex) -> u32 {
        match self.mode {
            Mode::Simplicial => {
                let (vs, len) = s.vertices(dom);
                vs[..len]
                    .iter()
                    .map(|&v| self.rank[v as usize])
                    .min()
                    .expect("nonempty simplex")
            }
            Mode::Cubical => self.cell_rank(dom, &s.carrier()),
        }
    }

    pub fn simplex_value(&self, dom: &GridDomain, s: &Simplex) -> f64 {
        self.level(self.simplex_rank(dom, s))
    }
}

/// Marker for vertices without an assigned sphere vertex.
pub const UNDEFINED: u8 = u8::MAX;

/// The vertex approximation `f'`: each vertex goes to `s e_j` where `j`
/// is the component of largest absolute value (smallest index on ties) and
/// `s` its sign (`+` on zero).
#[derive(Clone, Debug)]
pub struct VertexApprox {
    /// Sphere vertex index of every vertex, computed everywhere.
    pub image: Vec<u8>,
    /// Vertices with rank below this are outside the approximation's domain.
    pub min_rank: u32,
}

pub fn dominant_direction(v: &[f64]) -> SphereVertex {
    let mut best = 0;
    for j in 1..v.len() {
        if v[j].abs() > v[best].abs() {
            best = j;
        }
    }
    SphereVertex::new(best, v[best] >= 0.0)
}

impl VertexApprox {
    pub fn new(field: &SampledField, filtration: &Filtration, min_rank: u32) -> VertexApprox {
        let image = (0..field.domain.vertex_count() as u32)
            .map(|v| dominant_direction(field.value(v)).0)
            .collect();
        VertexApprox {
            image,
            min_rank: min_rank.max(filtration.first_positive_rank().unwrap_or(u32::MAX)),
        }
    }

    pub fn get(&self, filtration: &Filtration, v: u32) -> Option<SphereVertex> {
        (filtration.rank[v as usize] >= self.min_rank).then(|| SphereVertex(self.image[v as usize]))
    }

    /// Total-order key on vertices under which `f'` is monotone on its
    /// domain: sphere-order rank first, undefined vertices last, then id.
    pub fn order_key(&self, filtration: &Filtration, v: u32) -> u64 {
        let r = match self.get(filtration, v) {
            Some(s) => s.0 as u64,
            None => UNDEFINED as u64,
        };
        r << 32 | v as u64
    }

    pub fn defined_count(&self, filtration: &Filtration) -> usize {
        filtration
            .rank
            .iter()
            .filter(|&&r| r >= self.min_rank)
            .count()
    }
}

/// Assignment of `f'` on vertices with `|f(v)| >= threshold`.
pub fn vertex_approximation(
    field: &SampledField,
    filtration: &Filtration,
    threshold: f64,
) -> Result<VertexApprox> {
    if !(threshold > 0.0) {
        return Err(Error::Parameter(format!(
            "threshold must be positive, got {threshold}"
        )));
    }
    let rank = filtration
        .levels
        .iter()
        .position(|&l| l >= threshold)
        .map(|r| r as u32);
    let approx = VertexApprox::new(field, filtration, rank.unwrap_or(u32::MAX));
    Ok(approx)
}

/// Where `f'` becomes simplicial.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Threshold {
    /// First rank at which `f'` is simplicial.
    pub rank: u32,
    /// Infimum of the levels `r` with `f'` simplicial on `{|f| > r}`: the
    /// level of the last antipodal edge when that edge decides `rank`,
    /// otherwise the level at `rank`.
    pub value: f64,
}

/// Smallest rank `r` (not below `floor`) such that no edge of the
/// triangulation lying in the filtration at `r` joins antipodal sphere
/// vertices under `f'`.
pub fn simplicial_threshold(
    field: &SampledField,
    filtration: &Filtration,
    floor: u32,
    par: Parallelism,
) -> Result<Threshold> {
    let dom = &field.domain;
    let image: Vec<u8> = (0..dom.vertex_count() as u32)
        .map(|v| dominant_direction(field.value(v)).0)
        .collect();
    let dirs = (1u32 << dom.m()) - 1;
    let worst = par::map_range(par, dom.vertex_count(), |v| {
        let v = v as u32;
        let mut worst: Option<u32> = None;
        for mask in 1..=dirs {
            if !dom.fits(v, mask) {
                continue;
            }
            let w = dom.shift(v, mask, true).expect("fits");
            if image[v as usize] ^ 1 != image[w as usize] {
                continue;
            }
            let value = match filtration.mode {
                Mode::Simplicial => filtration.rank[v as usize].min(filtration.rank[w as usize]),
                Mode::Cubical => filtration.cell_rank(dom, &Cell::new(v, mask)),
            };
            worst = Some(worst.map_or(value, |x: u32| x.max(value)));
        }
        worst
    });
    let bad = worst.into_iter().flatten().max();
    let positive = filtration
        .first_positive_rank()
        .ok_or_else(|| Error::TooCoarse("field vanishes at every vertex".into()))?;
    let r = match bad {
        Some(b) => (b + 1).max(floor).max(positive),
        None => floor.max(positive),
    };
    if r > filtration.top_rank() {
        return Err(Error::TooCoarse(
            "vertex approximation is not simplicial at any level".into(),
        ));
    }
    let value = match bad {
        Some(b) if b + 1 == r && filtration.level(b) > 0.0 => filtration.level(b),
        _ => filtration.level(r),
    };
    Ok(Threshold { rank: r, value })
}
