//! Interaction kernels and the kernel-derived constants of the model.
//!
//! A [`Potential`] is an even, nonnegative, compactly supported kernel on
//! `ℝ^d`, `d ∈ {1, 2}`. From it we derive the total mass `β = ∫φ`, the
//! integrability constant `C_φ = ∫(1 − e^{−φ})`, the region mass
//! `s_A(x) = ∫_A φ(x − y) dy` and its infimum `Φ_A` over a box `A`.
//!
//! The `cutoff_radius` is taken per axis: `φ(x) = 0` as soon as any coordinate
//! satisfies `|x_i| > cutoff_radius`. For the radial kernels this is the usual
//! support radius, for the box kernel it is the half-width.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{simpson, simpson_2d, simpson_piecewise};

/// Gaussian kernels are cut at this many standard deviations. β and `C_φ`
/// are computed on the truncated kernel, nothing is renormalized.
pub const GAUSSIAN_CUTOFF_SIGMAS: f64 = 6.0;

/// Node budget for kernel quadratures.
const QUAD_NODES: usize = 20_000;
const QUAD_NODES_2D: usize = 400;

/// Serializable description of a kernel, as it appears in configs and run
/// manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialSpec {
    /// `amplitude · 1{|x_i| ≤ half_width ∀i}`.
    IndicatorBox { half_width: f64, amplitude: f64 },
    /// `amplitude · max(0, 1 − |x|/half_width)`.
    Triangle { half_width: f64, amplitude: f64 },
    /// `amplitude · exp(−|x|²/2σ²)` on `|x| ≤ 6σ`.
    TruncatedGaussian { sigma: f64, amplitude: f64 },
    /// Radial profile loaded from a two-column `x,phi` CSV.
    Tabulated { path: String },
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    Box { half_width: f64 },
    Triangle { half_width: f64 },
    Gaussian { sigma: f64 },
    Table { spacing: f64, values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    shape: Shape,
    amplitude: f64,
    dim: usize,
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 1 || dim == 2 {
        Ok(())
    } else {
        Err(Error::InvalidPotential(format!("dimension {dim} not supported (1 or 2)")))
    }
}

fn check_pos(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidPotential(format!("{name} must be positive and finite, got {v}")))
    }
}

fn check_amp(v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidPotential(format!("amplitude must be nonnegative and finite, got {v}")))
    }
}

impl Potential {
    pub fn indicator_box(dim: usize, half_width: f64, amplitude: f64) -> Result<Self> {
        check_dim(dim)?;
        check_pos("half_width", half_width)?;
        check_amp(amplitude)?;
        Ok(Self { shape: Shape::Box { half_width }, amplitude, dim })
    }

    pub fn triangle(dim: usize, half_width: f64, amplitude: f64) -> Result<Self> {
        check_dim(dim)?;
        check_pos("half_width", half_width)?;
        check_amp(amplitude)?;
        Ok(Self { shape: Shape::Triangle { half_width }, amplitude, dim })
    }

    pub fn truncated_gaussian(dim: usize, sigma: f64, amplitude: f64) -> Result<Self> {
        check_dim(dim)?;
        check_pos("sigma", sigma)?;
        check_amp(amplitude)?;
        Ok(Self { shape: Shape::Gaussian { sigma }, amplitude, dim })
    }

    /// The zero kernel, represented as a box of zero amplitude.
    pub fn zero(dim: usize, half_width: f64) -> Result<Self> {
        Self::indicator_box(dim, half_width, 0.0)
    }

    /// Tabulated kernel from uniformly spaced `(offset, value)` samples.
    ///
    /// Offsets either start at 0 (a radial profile) or are symmetric about 0,
    /// in which case the table must be even. The kernel is the piecewise-linear
    /// interpolant, zero beyond the last offset.
    pub fn tabulated(dim: usize, offsets: &[f64], values: &[f64]) -> Result<Self> {
        check_dim(dim)?;
        if offsets.len() != values.len() || offsets.len() < 2 {
            return Err(Error::InvalidPotential("tabulated kernel needs at least two (offset, value) rows".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidPotential(format!(
                "tabulated kernel value {v} is negative or not finite (non-integrable)"
            )));
        }
        if offsets.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidPotential("non-finite offset in table".into()));
        }
        let spacing = offsets[1] - offsets[0];
        if !(spacing > 0.0) {
            return Err(Error::InvalidPotential("offsets must be increasing".into()));
        }
        let scale = offsets.iter().fold(0.0f64, |a, o| a.max(o.abs())).max(spacing);
        for (k, w) in offsets.windows(2).enumerate() {
            if ((w[1] - w[0]) - spacing).abs() > 1e-9 * scale {
                return Err(Error::InvalidPotential(format!("non-uniform spacing at row {}", k + 1)));
            }
        }
        let radial: Vec<f64> = if offsets[0].abs() <= 1e-12 * scale {
            values.to_vec()
        } else if offsets[0] < 0.0 {
            let n = offsets.len();
            if n % 2 == 0 || offsets[n / 2].abs() > 1e-9 * scale {
                return Err(Error::InvalidPotential("symmetric table must contain offset 0 at its centre".into()));
            }
            for k in 0..n / 2 {
                let (a, b) = (values[k], values[n - 1 - k]);
                if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::InvalidPotential(format!(
                        "table is not even: φ({}) = {a} but φ({}) = {b}",
                        offsets[k],
                        offsets[n - 1 - k]
                    )));
                }
            }
            values[n / 2..].to_vec()
        } else {
            return Err(Error::InvalidPotential("table offsets must start at 0 or be symmetric about 0".into()));
        };
        Ok(Self { shape: Shape::Table { spacing, values: radial }, amplitude: 1.0, dim })
    }

    /// Loads a tabulated kernel from a CSV with header `x,phi`.
    pub fn load_tabulated(dim: usize, path: impl AsRef<Path>) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path.as_ref())?;
        let headers = reader.headers()?.clone();
        let names: Vec<&str> = headers.iter().map(str::trim).collect();
        if names != ["x", "phi"] {
            return Err(Error::InvalidPotential(format!(
                "tabulated kernel header must be `x,phi`, found `{}`",
                names.join(",")
            )));
        }
        let mut offsets = Vec::new();
        let mut values = Vec::new();
        for (row, rec) in reader.records().enumerate() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::InvalidPotential(format!("bad number in row {}", row + 1)))
            };
            offsets.push(parse(0)?);
            values.push(parse(1)?);
        }
        Self::tabulated(dim, &offsets, &values)
    }

    pub fn from_spec(dim: usize, spec: &PotentialSpec) -> Result<Self> {
        match spec {
            PotentialSpec::IndicatorBox { half_width, amplitude } => Self::indicator_box(dim, *half_width, *amplitude),
            PotentialSpec::Triangle { half_width, amplitude } => Self::triangle(dim, *half_width, *amplitude),
            PotentialSpec::TruncatedGaussian { sigma, amplitude } => Self::truncated_gaussian(dim, *sigma, *amplitude),
            PotentialSpec::Tabulated { path } => Self::load_tabulated(dim, path),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    /// `φ ≡ 0`.
    pub fn is_zero(&self) -> bool {
        self.amplitude == 0.0 || matches!(&self.shape, Shape::Table { values, .. } if values.iter().all(|v| *v == 0.0))
    }

    pub fn is_box(&self) -> bool {
        matches!(self.shape, Shape::Box { .. })
    }

    pub fn cutoff_radius(&self) -> f64 {
        match &self.shape {
            Shape::Box { half_width } | Shape::Triangle { half_width } => *half_width,
            Shape::Gaussian { sigma } => GAUSSIAN_CUTOFF_SIGMAS * sigma,
            Shape::Table { spacing, values } => spacing * (values.len() - 1) as f64,
        }
    }

    /// Radial profile `φ(r)` for `r ≥ 0` (box kernel: along one axis).
    fn profile(&self, r: f64) -> f64 {
        let r = r.abs();
        let a = self.amplitude;
        match &self.shape {
            Shape::Box { half_width } => {
                if r <= *half_width {
                    a
                } else {
                    0.0
                }
            }
            Shape::Triangle { half_width } => a * (1.0 - r / half_width).max(0.0),
            Shape::Gaussian { sigma } => {
                if r <= GAUSSIAN_CUTOFF_SIGMAS * sigma {
                    a * (-0.5 * (r / sigma).powi(2)).exp()
                } else {
                    0.0
                }
            }
            Shape::Table { spacing, values } => {
                let s = r / spacing;
                let k = s.floor() as usize;
                if k + 1 >= values.len() {
                    if k + 1 == values.len() && s == k as f64 {
                        values[k]
                    } else {
                        0.0
                    }
                } else {
                    let t = s - k as f64;
                    values[k] * (1.0 - t) + values[k + 1] * t
                }
            }
        }
    }

    /// `φ(x)` at a displacement `x ∈ ℝ^d`.
    pub fn value(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        match (&self.shape, self.dim) {
            (_, 1) => self.profile(x[0]),
            (Shape::Box { half_width }, _) => {
                if x.iter().all(|c| c.abs() <= *half_width) {
                    self.amplitude
                } else {
                    0.0
                }
            }
            _ => self.profile(x[0].hypot(x[1])),
        }
    }

    /// Kinks of the 1-d kernel, used as quadrature breakpoints.
    fn kinks(&self) -> Vec<f64> {
        let r = self.cutoff_radius();
        match &self.shape {
            Shape::Table { spacing, values } => {
                (0..values.len()).flat_map(|k| [-(k as f64) * spacing, k as f64 * spacing]).collect()
            }
            _ => vec![-r, 0.0, r],
        }
    }

    /// `β = ∫ φ`.
    pub fn beta(&self) -> f64 {
        let a = self.amplitude;
        match (&self.shape, self.dim) {
            (Shape::Box { half_width }, d) => a * (2.0 * half_width).powi(d as i32),
            (Shape::Triangle { half_width }, 1) => a * half_width,
            (Shape::Triangle { half_width }, _) => a * std::f64::consts::PI * half_width.powi(2) / 3.0,
            (Shape::Gaussian { sigma }, 1) => {
                let z = GAUSSIAN_CUTOFF_SIGMAS / std::f64::consts::SQRT_2;
                a * sigma * (2.0 * std::f64::consts::PI).sqrt() * erf(z)
            }
            (Shape::Gaussian { sigma }, _) => {
                let c = GAUSSIAN_CUTOFF_SIGMAS;
                a * 2.0 * std::f64::consts::PI * sigma * sigma * (1.0 - (-0.5 * c * c).exp())
            }
            (Shape::Table { .. }, 1) => self.mass_1d(-self.cutoff_radius(), self.cutoff_radius()),
            (Shape::Table { .. }, _) => {
                let r = self.cutoff_radius();
                simpson_piecewise(
                    |s| 2.0 * std::f64::consts::PI * s * self.profile(s),
                    0.0,
                    r,
                    &self.kinks(),
                    QUAD_NODES,
                )
            }
        }
    }

    /// `C_φ = ∫ (1 − e^{−φ})`, by quadrature over the support (the box kernel
    /// is constant on its support and is integrated exactly).
    pub fn c_phi(&self) -> f64 {
        let r = self.cutoff_radius();
        let g = |v: f64| -(-v).exp_m1();
        match (&self.shape, self.dim) {
            (Shape::Box { half_width }, d) => g(self.amplitude) * (2.0 * half_width).powi(d as i32),
            (_, 1) => simpson_piecewise(|x| g(self.profile(x)), -r, r, &self.kinks(), QUAD_NODES),
            _ => simpson_piecewise(
                |s| 2.0 * std::f64::consts::PI * s * g(self.profile(s)),
                0.0,
                r,
                &self.kinks(),
                QUAD_NODES,
            ),
        }
    }

    /// `∫_lo^hi φ(z) dz` for the 1-d kernel.
    pub fn mass_1d(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        let r = self.cutoff_radius();
        let (lo, hi) = (lo.max(-r), hi.min(r));
        if hi <= lo {
            return 0.0;
        }
        let a = self.amplitude;
        match &self.shape {
            Shape::Box { .. } => a * (hi - lo),
            Shape::Triangle { half_width } => {
                let w = *half_width;
                // Antiderivative of max(0, 1 − |z|/w) on [−w, w].
                let f = |z: f64| if z < 0.0 { z + z * z / (2.0 * w) } else { z - z * z / (2.0 * w) };
                a * (f(hi) - f(lo))
            }
            Shape::Gaussian { .. } => {
                let share = (((hi - lo) / (2.0 * r)) * QUAD_NODES as f64).ceil() as usize;
                simpson_piecewise(|z| self.profile(z), lo, hi, &[0.0], share.max(64))
            }
            Shape::Table { spacing, .. } => {
                // Piecewise linear: Simpson is exact on each table interval.
                let mut cuts: Vec<f64> = self.kinks().into_iter().filter(|k| *k > lo && *k < hi).collect();
                cuts.push(lo);
                cuts.push(hi);
                cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
                let _ = spacing;
                cuts.windows(2).map(|w| simpson(|z| self.profile(z), w[0], w[1], 2)).sum()
            }
        }
    }

    /// `∫_cell φ` over an axis-aligned rectangle `[x0, x1] × [y0, y1]` (d = 2).
    pub fn mass_2d(&self, x: (f64, f64), y: (f64, f64)) -> f64 {
        let r = self.cutoff_radius();
        let cx = (x.0.max(-r), x.1.min(r));
        let cy = (y.0.max(-r), y.1.min(r));
        if cx.1 <= cx.0 || cy.1 <= cy.0 {
            return 0.0;
        }
        match &self.shape {
            Shape::Box { .. } => self.amplitude * (cx.1 - cx.0) * (cy.1 - cy.0),
            _ => {
                let frac = ((cx.1 - cx.0) * (cy.1 - cy.0) / (4.0 * r * r)).sqrt();
                let n = ((frac * QUAD_NODES_2D as f64).ceil() as usize).max(16);
                simpson_2d(|a, b| self.value(&[a, b]), cx, cy, n)
            }
        }
    }

    /// `s_A(x) = ∫_A φ(x − y) dy`.
    pub fn s_region(&self, region: &RegionSupport, x: &[f64]) -> f64 {
        debug_assert_eq!(region.dim(), self.dim);
        match self.dim {
            1 => self.mass_1d(x[0] - region.hi[0], x[0] - region.lo[0]),
            _ => {
                let ax = (x[0] - region.hi[0], x[0] - region.lo[0]);
                let ay = (x[1] - region.hi[1], x[1] - region.lo[1]);
                if self.is_box() {
                    self.mass_1d(ax.0, ax.1) * self.mass_1d(ay.0, ay.1) / self.amplitude.max(f64::MIN_POSITIVE)
                } else {
                    self.mass_2d(ax, ay)
                }
            }
        }
    }

    /// `Φ_A = inf_{x∈A} s_A(x)`: dense grid on `A` (pitch at most
    /// `cutoff/32`) followed by a golden-section polish around the best node.
    pub fn phi_region(&self, region: &RegionSupport) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let pitch = self.cutoff_radius() / 32.0;
        let counts: Vec<usize> =
            (0..self.dim).map(|i| ((region.hi[i] - region.lo[i]) / pitch).ceil().max(1.0) as usize).collect();
        let coord = |i: usize, k: usize| region.lo[i] + (region.hi[i] - region.lo[i]) * k as f64 / counts[i] as f64;
        let mut best = (f64::INFINITY, vec![0.0; self.dim]);
        let mut visit = |p: Vec<f64>| {
            let v = self.s_region(region, &p);
            if v < best.0 {
                best = (v, p);
            }
        };
        if self.dim == 1 {
            for k in 0..=counts[0] {
                visit(vec![coord(0, k)]);
            }
        } else {
            for k in 0..=counts[0] {
                for l in 0..=counts[1] {
                    visit(vec![coord(0, k), coord(1, l)]);
                }
            }
        }
        let (mut value, mut point) = best;
        // Coordinate-wise golden section within one pitch of the best node.
        for _sweep in 0..2 {
            for i in 0..self.dim {
                let step = (region.hi[i] - region.lo[i]) / counts[i] as f64;
                let lo = (point[i] - step).max(region.lo[i]);
                let hi = (point[i] + step).min(region.hi[i]);
                let mut probe = point.clone();
                let (x, v) = golden_min(
                    |t| {
                        probe[i] = t;
                        self.s_region(region, &probe)
                    },
                    lo,
                    hi,
                );
                if v < value {
                    value = v;
                    point[i] = x;
                }
            }
        }
        value
    }

    /// Samples evenness and nonnegativity at `samples` pseudo-random points in
    /// the support; returns the worst `|φ(x) − φ(−x)|`, or an error on a
    /// negative value.
    pub fn check_symmetry(&self, samples: usize) -> Result<f64> {
        let r = self.cutoff_radius() * 1.1;
        let mut state = 0x9E37_79B9_7F4A_7C15u64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 * r - r
        };
        let mut worst = 0.0f64;
        for _ in 0..samples {
            let x: Vec<f64> = (0..self.dim).map(|_| next()).collect();
            let neg: Vec<f64> = x.iter().map(|c| -c).collect();
            let (a, b) = (self.value(&x), self.value(&neg));
            if a < 0.0 {
                return Err(Error::InvalidPotential(format!("φ({x:?}) = {a} < 0")));
            }
            worst = worst.max((a - b).abs());
        }
        Ok(worst)
    }

    pub fn spec(&self) -> PotentialSpec {
        match &self.shape {
            Shape::Box { half_width } => {
                PotentialSpec::IndicatorBox { half_width: *half_width, amplitude: self.amplitude }
            }
            Shape::Triangle { half_width } => {
                PotentialSpec::Triangle { half_width: *half_width, amplitude: self.amplitude }
            }
            Shape::Gaussian { sigma } => PotentialSpec::TruncatedGaussian { sigma: *sigma, amplitude: self.amplitude },
            Shape::Table { .. } => PotentialSpec::Tabulated { path: String::from("<in-memory>") },
        }
    }
}

fn golden_min<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = f(d);
        }
    }
    let (fl, fh) = (f(lo), f(hi));
    [(lo, fl), (hi, fh), (c, fc), (d, fd)].into_iter().min_by(|a, b| a.1.partial_cmp(&b.1).unwrap()).unwrap()
}

/// `erf(z)` for `z ≥ 0` from the positive-term series
/// `erf z = (2/√π) e^{−z²} Σ 2ⁿ z^{2n+1} / (2n+1)!!`.
fn erf(z: f64) -> f64 {
    let mut term = z;
    let mut sum = z;
    let z2 = z * z;
    let mut n = 0.0;
    while term > 1e-17 * sum {
        n += 1.0;
        term *= 2.0 * z2 / (2.0 * n + 1.0);
        sum += term;
    }
    2.0 / std::f64::consts::PI.sqrt() * (-z2).exp() * sum
}

/// Closed axis-aligned box `A = ∏ [lo_i, hi_i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSupport {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl RegionSupport {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let r = Self { lo, hi };
        r.validate()?;
        Ok(r)
    }

    /// The symmetric interval `[−a, a]`.
    pub fn interval(a: f64) -> Result<Self> {
        Self::new(vec![-a], vec![a])
    }

    pub fn validate(&self) -> Result<()> {
        if self.lo.len() != self.hi.len() || !(1..=2).contains(&self.lo.len()) {
            return Err(Error::Domain("region needs matching lo/hi of length 1 or 2".into()));
        }
        for (l, h) in self.lo.iter().zip(&self.hi) {
            if !(l.is_finite() && h.is_finite() && l <= h) {
                return Err(Error::Domain(format!("region bounds [{l}, {h}] are empty or not finite")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(c, (l, h))| *c >= *l && *c <= *h)
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).product()
    }

    /// Largest side length.
    pub fn extent(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).fold(0.0, f64::max)
    }

    /// Sup-norm distance from `x` to the box.
    pub fn distance(&self, x: &[f64]) -> f64 {
        x.iter().zip(self.lo.iter().zip(&self.hi)).map(|(c, (l, h))| (l - c).max(c - h).max(0.0)).fold(0.0, f64::max)
    }
}
