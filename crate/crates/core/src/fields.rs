//! Sampled fields: storage, the ROBF file format, norms, and generators for
//! the benchmark and random fields.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::domain::{GridDomain, Topology};
use crate::error::{Error, Result};

/// Which `l_p` norm measures `|f(v)|`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Norm {
    L1,
    L2,
    #[default]
    Inf,
}

impl Norm {
    pub fn of(self, v: &[f64]) -> f64 {
        match self {
            Norm::L1 => v.iter().map(|x| x.abs()).sum(),
            Norm::L2 => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            Norm::Inf => v.iter().fold(0.0, |a, x| a.max(x.abs())),
        }
    }

    /// `n^{1/p}`.
    pub fn dim_factor(self, n: usize) -> f64 {
        match self {
            Norm::L1 => n as f64,
            Norm::L2 => (n as f64).sqrt(),
            Norm::Inf => 1.0,
        }
    }
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Norm::L1 => "1",
            Norm::L2 => "2",
            Norm::Inf => "inf",
        })
    }
}

impl FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" => Ok(Norm::L1),
            "2" => Ok(Norm::L2),
            "inf" => Ok(Norm::Inf),
            _ => Err(Error::Parameter(format!(
                "norm must be 1, 2 or inf, got {s:?}"
            ))),
        }
    }
}

/// Field values on the vertices of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledField {
    pub domain: GridDomain,
    pub n: usize,
    /// Row-major vertex order, `n` components per vertex.
    pub values: Vec<f64>,
    pub alpha: f64,
    pub norm: Norm,
    /// Set when `alpha` was estimated from the samples rather than derived.
    pub alpha_empirical: bool,
}

impl SampledField {
    pub fn new(
        domain: GridDomain,
        n: usize,
        values: Vec<f64>,
        alpha: f64,
        norm: Norm,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::Field("codomain dimension must be positive".into()));
        }
        if values.len() != n * domain.vertex_count() {
            return Err(Error::Field(format!(
                "expected {} values ({} vertices x {n}), got {}",
                n * domain.vertex_count(),
                domain.vertex_count(),
                values.len()
            )));
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::Field(format!(
                "alpha must be positive and finite, got {alpha}"
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Field("non-finite field value".into()));
        }
        Ok(SampledField {
            domain,
            n,
            values,
            alpha,
            norm,
            alpha_empirical: false,
        })
    }

    pub fn value(&self, v: u32) -> &[f64] {
        let i = v as usize * self.n;
        &self.values[i..i + self.n]
    }

    pub fn magnitude(&self, v: u32) -> f64 {
        self.norm.of(self.value(v))
    }

    /// Largest `|f(u) - f(v)|` over edges of the triangulation.
    pub fn max_edge_increment(&self) -> f64 {
        let dom = &self.domain;
        let dirs = (1u32 << dom.m()) - 1;
        let mut diff = vec![0.0; self.n];
        let mut best: f64 = 0.0;
        for v in 0..dom.vertex_count() as u32 {
            for mask in 1..=dirs {
                if !dom.fits(v, mask) {
                    continue;
                }
                let w = dom.shift(v, mask, true).expect("fits");
                for (d, (a, b)) in diff.iter_mut().zip(self.value(v).iter().zip(self.value(w))) {
                    *d = a - b;
                }
                best = best.max(self.norm.of(&diff));
            }
        }
        best
    }

    /// Whether the declared `alpha` bounds every sampled edge increment.
    pub fn alpha_consistent(&self) -> bool {
        self.max_edge_increment() <= self.alpha
    }

    pub fn min_magnitude(&self) -> f64 {
        (0..self.domain.vertex_count() as u32)
            .map(|v| self.magnitude(v))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_magnitude(&self) -> f64 {
        (0..self.domain.vertex_count() as u32)
            .map(|v| self.magnitude(v))
            .fold(0.0, f64::max)
    }

    /// Replace `alpha` by the largest edge increment times `safety`.
    pub fn with_empirical_alpha(mut self, safety: f64) -> Result<Self> {
        let a = self.max_edge_increment() * safety;
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::Field("field is constant along every edge".into()));
        }
        self.alpha = a;
        self.alpha_empirical = true;
        Ok(self)
    }
}

/// Encoding of the ROBF body.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Encoding {
    Text,
    Binary,
}

pub fn save_field(field: &SampledField, path: &Path, encoding: Encoding) -> Result<()> {
    let bytes = encode_field(field, encoding);
    fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn load_field(path: &Path) -> Result<SampledField> {
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    decode_field(&bytes)
}

pub fn encode_field(field: &SampledField, encoding: Encoding) -> Vec<u8> {
    let dom = &field.domain;
    let mut out = Vec::new();
    let grid: Vec<String> = dom.dims().iter().map(|g| g.to_string()).collect();
    // `{:?}` prints the shortest string that parses back to the same f64
    write!(
        out,
        "robf 1\ntopology {}\ndims {}\ngrid {}\ncodomain {}\nalpha {:?}\nnorm {}\ndata {}\n",
        dom.topology(),
        dom.m(),
        grid.join(" "),
        field.n,
        field.alpha,
        field.norm,
        match encoding {
            Encoding::Text => "text",
            Encoding::Binary => "binary",
        }
    )
    .expect("write to vec");
    match encoding {
        Encoding::Text => {
            for row in field.values.chunks(field.n) {
                let line: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
                out.extend_from_slice(line.join(" ").as_bytes());
                out.push(b'\n');
            }
        }
        Encoding::Binary => {
            for x in &field.values {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
    }
    out
}

pub fn decode_field(bytes: &[u8]) -> Result<SampledField> {
    let mut pos = 0;
    let mut header = Vec::with_capacity(8);
    for _ in 0..8 {
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Format("truncated header".into()))?;
        let line = std::str::from_utf8(&bytes[pos..pos + end])
            .map_err(|_| Error::Format("header is not UTF-8".into()))?;
        header.push(line.trim_end_matches('\r').to_string());
        pos += end + 1;
    }
    let field = |i: usize, key: &str| -> Result<Vec<String>> {
        let mut parts = header[i].split_whitespace();
        if parts.next() != Some(key) {
            return Err(Error::Format(format!(
                "line {}: expected `{key}`, found {:?}",
                i + 1,
                header[i]
            )));
        }
        Ok(parts.map(str::to_string).collect())
    };
    let parse = |s: &str, what: &str| -> Result<u64> {
        s.parse()
            .map_err(|_| Error::Format(format!("bad {what}: {s:?}")))
    };
    if field(0, "robf")? != ["1"] {
        return Err(Error::Format("unsupported version".into()));
    }
    let topology = match field(1, "topology")?.as_slice() {
        [t] if t == "cube" => Topology::Cube,
        [t] if t == "torus" => Topology::Torus,
        other => return Err(Error::Format(format!("bad topology {other:?}"))),
    };
    let m = match field(2, "dims")?.as_slice() {
        [d] => parse(d, "dims")? as usize,
        _ => return Err(Error::Format("bad dims line".into())),
    };
    let grid: Vec<u32> = field(3, "grid")?
        .iter()
        .map(|g| parse(g, "grid").map(|g| g as u32))
        .collect::<Result<_>>()?;
    if grid.len() != m {
        return Err(Error::Format(format!(
            "dims {m} but {} grid sizes",
            grid.len()
        )));
    }
    let n = match field(4, "codomain")?.as_slice() {
        [d] => parse(d, "codomain")? as usize,
        _ => return Err(Error::Format("bad codomain line".into())),
    };
    let alpha: f64 = match field(5, "alpha")?.as_slice() {
        [a] => a
            .parse()
            .map_err(|_| Error::Format(format!("bad alpha {a:?}")))?,
        _ => return Err(Error::Format("bad alpha line".into())),
    };
    let norm: Norm = match field(6, "norm")?.as_slice() {
        [p] => p
            .parse()
            .map_err(|_| Error::Format(format!("bad norm {p:?}")))?,
        _ => return Err(Error::Format("bad norm line".into())),
    };
    let encoding = match field(7, "data")?.as_slice() {
        [e] if e == "text" => Encoding::Text,
        [e] if e == "binary" => Encoding::Binary,
        other => return Err(Error::Format(format!("bad data encoding {other:?}"))),
    };
    let domain = GridDomain::new(&grid, topology)?;
    let total = domain.vertex_count() * n;
    let body = &bytes[pos..];
    let values =
        match encoding {
            Encoding::Binary => {
                if body.len() != 8 * total {
                    return Err(Error::Format(format!(
                        "expected {} bytes of data, found {}",
                        8 * total,
                        body.len()
                    )));
                }
                body.chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                    .collect()
            }
            Encoding::Text => {
                let text = std::str::from_utf8(body)
                    .map_err(|_| Error::Format("body is not UTF-8".into()))?;
                let mut values = Vec::with_capacity(total);
                let mut rows = 0;
                for (i, line) in text.lines().enumerate() {
                    if line.trim().is_empty() {
                        continue;
                    }
                    let before = values.len();
                    for tok in line.split_whitespace() {
                        values.push(tok.parse::<f64>().map_err(|_| {
                            Error::Format(format!("row {}: bad value {tok:?}", i + 1))
                        })?);
                    }
                    if values.len() - before != n {
                        return Err(Error::Format(format!(
                            "row {}: expected {n} components, found {}",
                            i + 1,
                            values.len() - before
                        )));
                    }
                    rows += 1;
                }
                if rows != domain.vertex_count() {
                    return Err(Error::Format(format!(
                        "expected {} rows, found {rows}",
                        domain.vertex_count()
                    )));
                }
                values
            }
        };
    SampledField::new(domain, n, values, alpha, norm).map_err(|e| Error::Format(e.to_string()))
}

fn sample<F>(domain: GridDomain, n: usize, alpha: f64, norm: Norm, f: F) -> Result<SampledField>
where
    F: Fn(&[f64], &mut [f64]),
{
    let m = domain.m();
    let mut values = vec![0.0; domain.vertex_count() * n];
    let mut x = vec![0.0; m];
    for v in 0..domain.vertex_count() as u32 {
        let idx = domain.multi_index(v);
        for a in 0..m {
            x[a] = domain.position(a, idx[a]);
        }
        f(&x, &mut values[v as usize * n..(v as usize + 1) * n]);
    }
    SampledField::new(domain, n, values, alpha, norm)
}

/// `f_1 = x_1^2 - x_2^2 - ... - x_n^2`, `f_j = 2 x_1 x_j` on `[-1,1]^n`.
/// Its only zero is the origin, of index two for even `n` and zero for odd.
pub fn gen_quadratic(n: usize, g: u32) -> Result<SampledField> {
    gen_quadratic_with_norm(n, g, Norm::Inf)
}

pub fn gen_quadratic_with_norm(n: usize, g: u32, norm: Norm) -> Result<SampledField> {
    if n < 2 {
        return Err(Error::Parameter("quadratic field needs n >= 2".into()));
    }
    let domain = GridDomain::cube(n, g)?;
    // |f(x)-f(y)|_inf <= 2n |x-y|_inf and |x-y|_inf <= 2/(g-1) inside a simplex
    let alpha = 4.0 * n as f64 / (g as f64 - 1.0) * norm.dim_factor(n);
    sample(domain, n, alpha, norm, |x, out| {
        out[0] = x[0] * x[0] - x[1..].iter().map(|t| t * t).sum::<f64>();
        for j in 1..x.len() {
            out[j] = 2.0 * x[0] * x[j];
        }
    })
}

/// The Hopf map `[-1,1]^4 -> R^3` for `n = 3` and its suspensions
/// `[-1,1]^{n+1} -> R^n` (extra components are the extra coordinates).
pub fn gen_hopf(n: usize, g: u32) -> Result<SampledField> {
    gen_hopf_with_norm(n, g, Norm::Inf)
}

pub fn gen_hopf_with_norm(n: usize, g: u32, norm: Norm) -> Result<SampledField> {
    if n < 3 {
        return Err(Error::Parameter("Hopf field needs n >= 3".into()));
    }
    let domain = GridDomain::cube(n + 1, g)?;
    let alpha = 4.0 * (n + 1) as f64 / (g as f64 - 1.0) * norm.dim_factor(n);
    sample(domain, n, alpha, norm, |x, out| {
        out[0] = 2.0 * x[0] * x[2] + 2.0 * x[1] * x[3];
        out[1] = 2.0 * x[1] * x[2] - 2.0 * x[0] * x[3];
        out[2] = x[0] * x[0] + x[1] * x[1] - x[2] * x[2] - x[3] * x[3];
        out[3..].copy_from_slice(&x[4..]);
    })
}

/// Spectral density of a stationary Gaussian field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Spectrum {
    /// Power proportional to `(1 + |p|^2)^{-l}` at integer frequency `p`.
    Power(f64),
    /// Covariance `exp(-|x-y|^2 / (2 l^2))` in grid units.
    Gaussian(f64),
}

impl Spectrum {
    fn validate(&self) -> Result<()> {
        let (Spectrum::Power(l) | Spectrum::Gaussian(l)) = *self;
        if !(l.is_finite() && l >= 0.0) || matches!(self, Spectrum::Gaussian(l) if *l <= 0.0) {
            return Err(Error::Parameter(format!("invalid spectrum parameter {l}")));
        }
        Ok(())
    }
}

/// Parameters for [`gen_gaussian`].
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianParams {
    pub m: usize,
    pub g: u32,
    pub n: usize,
    pub spectrum: Spectrum,
    pub topology: Topology,
    pub seed: u64,
    /// Multiplier on the largest sampled edge increment used as `alpha`.
    pub safety: f64,
    pub norm: Norm,
}

impl GaussianParams {
    pub fn new(
        m: usize,
        g: u32,
        n: usize,
        spectrum: Spectrum,
        topology: Topology,
        seed: u64,
    ) -> Self {
        GaussianParams {
            m,
            g,
            n,
            spectrum,
            topology,
            seed,
            safety: 1.0,
            norm: Norm::Inf,
        }
    }
}

/// Random stationary Gaussian field by spectral synthesis.
///
/// Each component is white noise filtered in Fourier space by the square
/// root of the spectral density, computed on a periodic grid (`g` per axis
/// for the torus, `2g` per axis restricted to the first `g` for the cube),
/// and scaled to unit marginal variance. The result is shifted so that it
/// vanishes at the grid midpoint.
pub fn gen_gaussian(p: &GaussianParams) -> Result<SampledField> {
    p.spectrum.validate()?;
    if p.n == 0 {
        return Err(Error::Parameter(
            "codomain dimension must be positive".into(),
        ));
    }
    if !(p.safety.is_finite() && p.safety > 0.0) {
        return Err(Error::Parameter(format!(
            "safety factor must be positive, got {}",
            p.safety
        )));
    }
    let domain = GridDomain::new(&vec![p.g; p.m], p.topology)?;
    let big = match p.topology {
        Topology::Torus => p.g as usize,
        Topology::Cube => 2 * p.g as usize,
    };
    let weights = spectral_weights(p.m, big, p.spectrum);
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut values = vec![0.0; domain.vertex_count() * p.n];
    let center = domain.vertex(&vec![p.g / 2; p.m]) as usize;
    for comp in 0..p.n {
        let full = synthesize(p.m, big, &weights, &mut rng);
        let restricted = restrict(&full, p.m, big, p.g as usize);
        let c = restricted[center];
        for (v, x) in restricted.iter().enumerate() {
            values[v * p.n + comp] = x - c;
        }
    }
    let field = SampledField::new(domain, p.n, values, 1.0, p.norm)?;
    field.with_empirical_alpha(p.safety)
}

/// Square roots of the spectral density on the periodic grid `big^m`,
/// scaled so that the synthesized field has unit variance.
fn spectral_weights(m: usize, big: usize, spectrum: Spectrum) -> Vec<f64> {
    let total = big.pow(m as u32);
    let wrap = |i: usize| -> f64 {
        let i = i as f64;
        let b = big as f64;
        if i <= b / 2.0 {
            i
        } else {
            i - b
        }
    };
    let mut density: Vec<f64> = match spectrum {
        Spectrum::Power(l) => (0..total)
            .map(|idx| {
                let mut r2 = 0.0;
                let mut rest = idx;
                for _ in 0..m {
                    let f = wrap(rest % big);
                    r2 += f * f;
                    rest /= big;
                }
                (1.0 + r2).powf(-l)
            })
            .collect(),
        Spectrum::Gaussian(l) => {
            // density = DFT of the periodized covariance
            let mut cov: Vec<Complex64> = (0..total)
                .map(|idx| {
                    let mut r2 = 0.0;
                    let mut rest = idx;
                    for _ in 0..m {
                        let d = wrap(rest % big);
                        r2 += d * d;
                        rest /= big;
                    }
                    Complex64::new((-r2 / (2.0 * l * l)).exp(), 0.0)
                })
                .collect();
            fft_nd(&mut cov, m, big, false);
            cov.iter().map(|c| c.re.max(0.0)).collect()
        }
    };
    let mean: f64 = density.iter().sum::<f64>() / total as f64;
    for d in density.iter_mut() {
        *d = (*d / mean).sqrt();
    }
    density
}

/// White noise filtered by `weights`; unit variance when the weights are
/// normalized as in [`spectral_weights`].
fn synthesize(m: usize, big: usize, weights: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut data: Vec<Complex64> = (0..weights.len())
        .map(|_| Complex64::new(rng.sample(StandardNormal), 0.0))
        .collect();
    fft_nd(&mut data, m, big, false);
    for (d, w) in data.iter_mut().zip(weights) {
        *d *= *w;
    }
    fft_nd(&mut data, m, big, true);
    let scale = 1.0 / weights.len() as f64;
    data.iter().map(|c| c.re * scale).collect()
}

/// Unnormalized multi-dimensional FFT on a `big^m` row-major array.
fn fft_nd(data: &mut [Complex64], m: usize, big: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft = if inverse {
        planner.plan_fft_inverse(big)
    } else {
        planner.plan_fft_forward(big)
    };
    let mut line = vec![Complex64::new(0.0, 0.0); big];
    let total = data.len();
    for axis in 0..m {
        let stride = big.pow((m - 1 - axis) as u32);
        for start in 0..total {
            if !(start / stride).is_multiple_of(big) {
                continue;
            }
            for (i, l) in line.iter_mut().enumerate() {
                *l = data[start + i * stride];
            }
            fft.process(&mut line);
            for (i, l) in line.iter().enumerate() {
                data[start + i * stride] = *l;
            }
        }
    }
}

fn restrict(full: &[f64], m: usize, big: usize, g: usize) -> Vec<f64> {
    if big == g {
        return full.to_vec();
    }
    let total = g.pow(m as u32);
    (0..total)
        .map(|idx| {
            let mut rest = idx;
            let mut src = 0;
            let mut stride = 1;
            for _ in 0..m {
                src += (rest % g) * stride;
                rest /= g;
                stride *= big;
            }
            full[src]
        })
        .collect()
}

/// Random homogeneous quadratic `[-1,1]^4 -> R^3`,
/// `f_k(x) = sum_ij a^k_ij x_i x_j` with standard normal coefficients.
pub fn gen_random_quadratic(g: u32, seed: u64) -> Result<SampledField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<[[f64; 4]; 4]> = (0..3)
        .map(|_| {
            let mut a = [[0.0; 4]; 4];
            for row in a.iter_mut() {
                for x in row.iter_mut() {
                    *x = rng.sample(StandardNormal);
                }
            }
            a
        })
        .collect();
    random_quadratic_from(&coeffs, g)
}

/// Sample `f_k(x) = x^T A_k x` on the `g^4` grid. `alpha` bounds
/// `|f(x)-f(y)|_inf` inside a simplex by `max_k sup |grad f_k|_1 * 2/(g-1)`,
/// where `grad f_k = (A_k + A_k^T) x` and `sup_{|x|_inf<=1} |B x|_1 <= sum |B_ij|`.
pub fn random_quadratic_from(coeffs: &[[[f64; 4]; 4]], g: u32) -> Result<SampledField> {
    let domain = GridDomain::cube(4, g)?;
    let lip = coeffs
        .iter()
        .map(|a| {
            let mut s = 0.0;
            for i in 0..4 {
                for j in 0..4 {
                    s += (a[i][j] + a[j][i]).abs();
                }
            }
            s
        })
        .fold(0.0, f64::max);
    let alpha = lip * 2.0 / (g as f64 - 1.0);
    let n = coeffs.len();
    sample(domain, n, alpha, Norm::Inf, |x, out| {
        for (k, a) in coeffs.iter().enumerate() {
            let mut s = 0.0;
            for i in 0..4 {
                for j in 0..4 {
                    s += a[i][j] * x[i] * x[j];
                }
            }
            out[k] = s;
        }
    })
}

/// Scalar objective sampled on the same grid as a field.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectiveField {
    pub domain: GridDomain,
    pub values: Vec<f64>,
    pub alpha: f64,
}

impl ObjectiveField {
    pub fn new(domain: GridDomain, values: Vec<f64>, alpha: f64) -> Result<Self> {
        if values.len() != domain.vertex_count() {
            return Err(Error::Field(format!(
                "objective has {} values for {} vertices",
                values.len(),
                domain.vertex_count()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Field("non-finite objective value".into()));
        }
        Ok(ObjectiveField {
            domain,
            values,
            alpha,
        })
    }

    pub fn from_field(f: SampledField) -> Result<Self> {
        if f.n != 1 {
            return Err(Error::Field(format!(
                "objective must have codomain 1, found {}",
                f.n
            )));
        }
        ObjectiveField::new(f.domain, f.values, f.alpha)
    }

    pub fn to_field(&self) -> Result<SampledField> {
        SampledField::new(
            self.domain.clone(),
            1,
            self.values.clone(),
            self.alpha,
            Norm::Inf,
        )
    }
}
