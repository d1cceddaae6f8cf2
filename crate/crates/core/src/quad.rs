//! Singular-integral quadrature building blocks.
//!
//! Three layers: plain Gauss-Legendre panels and an adaptive (G7, K15)
//! Gauss-Kronrod driver for smooth-by-pieces integrands; geometrically
//! graded radial rules for the weakly singular profiles `r^{η−1}` that
//! arise from kernels `|x−y|^{−N}` and `|x−y|^{−N−sp}` in polar
//! coordinates; and exact or graded cell-pair kernel masses
//! `∬_{A×B} |x−y|^{−β}` feeding the discrete energy forms.

use crate::geometry::{Domain, Point};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Gauss-Legendre panels
// ---------------------------------------------------------------------------

/// Gauss-Legendre nodes and weights on `[-1, 1]`, by Newton iteration on
/// the Legendre recurrence.
pub fn gauss_legendre(order: usize) -> Vec<(f64, f64)> {
    assert!(order >= 1);
    let n = order;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // Chebyshev-based initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (pn, dpn) = legendre(n, x);
            let dx = pn / dpn;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dpn) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dpn * dpn);
        out.push((x, w));
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 1..n {
        let k = k as f64;
        let p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Integrate `f` over `[a, b]` with a single Gauss-Legendre panel.
pub fn gauss_panel<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64, rule: &[(f64, f64)]) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for &(x, w) in rule {
        acc += w * f(mid + half * x);
    }
    acc * half
}

// ---------------------------------------------------------------------------
// Adaptive Gauss-Kronrod (G7, K15)
// ---------------------------------------------------------------------------

// Standard (G7, K15) abscissae and weights.
const XGK15: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.000000000000000,
];
const WGK15: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const WG7: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

/// One (G7, K15) application on `[a, b]`: returns (K15 value, |K15 − G7|).
pub fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(mid);
    let mut kron = WGK15[7] * fc;
    let mut gauss = WG7[3] * fc;
    for j in 0..7 {
        let x = half * XGK15[j];
        let f1 = f(mid - x);
        let f2 = f(mid + x);
        kron += WGK15[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG7[j / 2] * (f1 + f2);
        }
    }
    (kron * half, (kron - gauss).abs() * half)
}

/// Adaptive bisection on (G7, K15) panels until the summed error estimate
/// drops below `tol` (absolute). Returns `(value, error_estimate)`.
pub fn adaptive_gk<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    tol: f64,
    max_panels: usize,
) -> (f64, f64) {
    if a == b {
        return (0.0, 0.0);
    }
    struct Seg {
        a: f64,
        b: f64,
        val: f64,
        err: f64,
    }
    let (val, err) = gk15(f, a, b);
    let mut segs = vec![Seg { a, b, val, err }];
    loop {
        let total_err: f64 = segs.iter().map(|s| s.err).sum();
        if total_err <= tol || segs.len() >= max_panels {
            let total: f64 = segs.iter().map(|s| s.val).sum();
            return (total, total_err);
        }
        // split the worst segment
        let (idx, _) = segs
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.partial_cmp(&y.1.err).unwrap())
            .unwrap();
        let seg = segs.swap_remove(idx);
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // cannot split further in f64; keep as is and give up on it
            let mut dead = seg;
            dead.err = 0.0;
            segs.push(dead);
            continue;
        }
        let (v1, e1) = gk15(f, seg.a, mid);
        let (v2, e2) = gk15(f, mid, seg.b);
        segs.push(Seg {
            a: seg.a,
            b: mid,
            val: v1,
            err: e1,
        });
        segs.push(Seg {
            a: mid,
            b: seg.b,
            val: v2,
            err: e2,
        });
    }
}

/// Adaptive integration over a list of panels (splits at known kinks).
pub fn adaptive_gk_panels<F: FnMut(f64) -> f64>(
    f: &mut F,
    cuts: &[f64],
    tol: f64,
    max_panels: usize,
) -> (f64, f64) {
    let mut val = 0.0;
    let mut err = 0.0;
    let n = cuts.len().saturating_sub(1);
    if n == 0 {
        return (0.0, 0.0);
    }
    let per = tol / n as f64;
    for w in cuts.windows(2) {
        let (v, e) = adaptive_gk(f, w[0], w[1], per, max_panels);
        val += v;
        err += e;
    }
    (val, err)
}

// ---------------------------------------------------------------------------
// Graded radial rules
// ---------------------------------------------------------------------------

/// Geometrically graded Gauss rule on `(0, R]` for weakly singular radial
/// profiles `r^{η−1}` with `η = α(p−1) > 0` (or `η = α(p−1) − sp` in the
/// fractional case).
#[derive(Debug, Clone)]
pub struct RadialRule {
    /// Quadrature nodes `(radius, weight)` with strictly increasing radii.
    pub nodes: Vec<(f64, f64)>,
    /// Grading ratio `q` in `(0, 1)`.
    pub ratio: f64,
    /// Number of geometric panels.
    pub panels: usize,
    /// Gauss order per panel.
    pub order: usize,
    /// Right endpoint `R`.
    pub radius: f64,
}

impl RadialRule {
    /// Build a rule that integrates `r^{η−1}` over `(0, R]`, `η = α(p−1)`,
    /// to relative accuracy `target_error` (validated against the closed
    /// form `R^η / η`; the panel count grows until validation passes).
    pub fn new(radius: f64, holder_exponent: f64, p: f64, target_error: f64) -> Result<Self> {
        let eta = holder_exponent * (p - 1.0);
        if !(eta > 0.0) {
            return Err(Error::Divergent(format!(
                "alpha (p-1) = {eta} <= 0: radial profile not integrable"
            )));
        }
        if !(radius > 0.0) {
            return Err(Error::Domain("radius must be positive".into()));
        }
        let ratio = 0.25f64;
        let order = 12usize;
        let exact = radius.powf(eta) / eta;
        // panel estimate: innermost-panel mass q^{(M-1)η} times a Gauss
        // constant must fall below the target
        let mut panels = (2.0 + (target_error / 10.0).ln() / (eta * ratio.ln())).ceil() as usize;
        panels = panels.clamp(4, 200);
        loop {
            let rule = Self::with_layout(radius, ratio, panels, order);
            let got: f64 = rule
                .nodes
                .iter()
                .map(|&(r, w)| w * r.powf(eta - 1.0))
                .sum();
            if ((got - exact) / exact).abs() <= target_error {
                return Ok(rule);
            }
            if panels >= 200 {
                return Err(Error::Tolerance {
                    requested: target_error,
                    achieved: ((got - exact) / exact).abs(),
                });
            }
            panels += 4;
        }
    }

    /// Rule with an explicit layout; panels accumulate geometrically at 0,
    /// the innermost panel is `(0, R q^{M−1}]`.
    pub fn with_layout(radius: f64, ratio: f64, panels: usize, order: usize) -> Self {
        let gl = gauss_legendre(order);
        let mut cuts = Vec::with_capacity(panels + 1);
        cuts.push(0.0);
        for k in (0..panels).rev() {
            cuts.push(radius * ratio.powi(k as i32));
        }
        let mut nodes = Vec::with_capacity(panels * order);
        for w in cuts.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let half = 0.5 * (w[1] - w[0]);
            for &(x, wt) in &gl {
                nodes.push((mid + half * x, wt * half));
            }
        }
        Self {
            nodes,
            ratio,
            panels,
            order,
            radius,
        }
    }

    /// Apply the rule to `f`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, f: &mut F) -> f64 {
        self.nodes.iter().map(|&(r, w)| w * f(r)).sum()
    }

    /// A refined companion rule (more panels, higher order) for error
    /// estimation by comparison.
    pub fn refined(&self) -> Self {
        Self::with_layout(self.radius, self.ratio, self.panels + 4, self.order + 4)
    }
}

// ---------------------------------------------------------------------------
// Cell-pair kernel weights
// ---------------------------------------------------------------------------

/// Axis-aligned cell `[lo_i, hi_i]` in dimension 1 or 2.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Cell {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len());
        assert!(lo.iter().zip(&hi).all(|(a, b)| a < b));
        Self { lo, hi }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| b - a)
            .product()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }

    fn interiors_overlap(&self, other: &Cell) -> bool {
        self.lo
            .iter()
            .zip(&self.hi)
            .zip(other.lo.iter().zip(&other.hi))
            .all(|((a, b), (c, d))| a.max(*c) < b.min(*d))
    }
}

// antiderivatives: F''(t) = t^{-beta}; the pair mass over [a,b] x [c,d]
// (b <= c) is F(d-a) - F(d-b) - F(c-a) + F(c-b).
fn f_log(t: f64) -> f64 {
    if t > 0.0 {
        t * t.ln() - t
    } else {
        0.0
    }
}

fn f_pow(t: f64, beta: f64) -> f64 {
    if t > 0.0 {
        t.powf(2.0 - beta) / ((1.0 - beta) * (2.0 - beta))
    } else {
        0.0
    }
}

fn interval_pair(a: f64, b: f64, c: f64, d: f64, f: impl Fn(f64) -> f64) -> f64 {
    f(d - a) - f(d - b) - f(c - a) + f(c - b)
}

/// Kernel mass `∬_{A×B} |x−y|^{−N} dx dy` for cells with disjoint
/// interiors (touching allowed). Closed form in 1D; tent-correlation
/// quadrature in 2D with geometric grading toward a shared face.
pub fn pair_weight_log(cell_a: &Cell, cell_b: &Cell, dim: usize, tol: f64) -> Result<f64> {
    pair_weight(cell_a, cell_b, dim as f64, dim, tol)
}

/// Kernel mass `∬_{A×B} |x−y|^{−N−sp} dx dy` for cells with disjoint
/// interiors. Touching cells require `sp < 1`.
pub fn pair_weight_frac(
    cell_a: &Cell,
    cell_b: &Cell,
    dim: usize,
    s: f64,
    p: f64,
    tol: f64,
) -> Result<f64> {
    let beta = dim as f64 + s * p;
    if beta >= dim as f64 + 1.0 && cells_touch(cell_a, cell_b) {
        return Err(Error::Divergent(format!(
            "touching cells with sp = {} >= 1",
            s * p
        )));
    }
    pair_weight(cell_a, cell_b, beta, dim, tol)
}

fn cells_touch(a: &Cell, b: &Cell) -> bool {
    a.lo
        .iter()
        .zip(&a.hi)
        .zip(b.lo.iter().zip(&b.hi))
        .all(|((al, ah), (bl, bh))| al.max(*bl) <= ah.min(*bh))
}

fn pair_weight(cell_a: &Cell, cell_b: &Cell, beta: f64, dim: usize, tol: f64) -> Result<f64> {
    if cell_a.dim() != dim || cell_b.dim() != dim {
        return Err(Error::Dimension {
            expected: dim,
            got: cell_a.dim().max(cell_b.dim()),
        });
    }
    if cell_a.interiors_overlap(cell_b) {
        return Err(Error::Divergent("cells with overlapping interiors".into()));
    }
    match dim {
        1 => {
            // order the intervals; the formula expects b <= c
            let (a, b, c, d) = if cell_a.lo[0] <= cell_b.lo[0] {
                (cell_a.lo[0], cell_a.hi[0], cell_b.lo[0], cell_b.hi[0])
            } else {
                (cell_b.lo[0], cell_b.hi[0], cell_a.lo[0], cell_a.hi[0])
            };
            if beta == 1.0 {
                Ok(interval_pair(a, b, c, d, f_log))
            } else {
                Ok(interval_pair(a, b, c, d, |t| f_pow(t, beta)))
            }
        }
        2 => Ok(tent_correlation_2d(cell_a, cell_b, beta, tol)),
        _ => Err(Error::Domain(format!(
            "pair weights support N in {{1,2}}, got {dim}"
        ))),
    }
}

/// 2D pair mass via the correlation reduction
/// `∬_{A×B} k(x−y) = ∫ k(z) T₁(z₁) T₂(z₂) dz`, with `T_i` the per-axis
/// overlap trapezoid of the two edges. The integrand is graded toward the
/// origin when the cells touch (ratio 1/4, 6 panels, Gauss order 8).
fn tent_correlation_2d(cell_a: &Cell, cell_b: &Cell, beta: f64, _tol: f64) -> f64 {
    // per-axis piecewise-linear overlap profile T(z) on [lo, hi]
    // T(z) = |[a,b] ∩ [c+z, d+z]|, kinks at a-d, a-c, b-d, b-c
    let axis = |i: usize| -> (Vec<f64>, f64, f64, f64, f64) {
        let (a, b, c, d) = (cell_a.lo[i], cell_a.hi[i], cell_b.lo[i], cell_b.hi[i]);
        let mut kinks = vec![a - d, a - c, b - d, b - c];
        kinks.sort_by(|x, y| x.partial_cmp(y).unwrap());
        kinks.dedup();
        (kinks, a, b, c, d)
    };
    let t_profile = |z: f64, a: f64, b: f64, c: f64, d: f64| -> f64 {
        (b.min(d + z) - a.max(c + z)).max(0.0)
    };
    let (k1, a1, b1, c1, d1) = axis(0);
    let (k2, a2, b2, c2, d2) = axis(1);

    // segment lists per axis, split at 0 so every segment has one sign
    let segs = |kinks: &[f64]| -> Vec<(f64, f64)> {
        let mut cuts: Vec<f64> = kinks.to_vec();
        if kinks[0] < 0.0 && *kinks.last().unwrap() > 0.0 {
            cuts.push(0.0);
        }
        cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        cuts.dedup();
        cuts.windows(2).map(|w| (w[0], w[1])).collect()
    };

    let gl8 = gauss_legendre(8);
    let gl12 = gauss_legendre(12);

    // graded 1D cut list toward `toward` endpoint of [lo, hi]
    let graded = |lo: f64, hi: f64, toward_lo: bool| -> Vec<f64> {
        let ratio = 0.25f64;
        let panels = 6usize;
        let len = hi - lo;
        let mut c = vec![0.0];
        for k in (0..panels).rev() {
            c.push(ratio.powi(k as i32));
        }
        if toward_lo {
            c.iter().map(|t| lo + len * t).collect()
        } else {
            let mut v: Vec<f64> = c.iter().map(|t| hi - len * t).collect();
            v.reverse();
            v
        }
    };

    let mut total = 0.0;
    for &(l1, h1) in &segs(&k1) {
        for &(l2, h2) in &segs(&k2) {
            // distance of the segment-rectangle to the origin along each axis
            let d1o = if l1 >= 0.0 {
                l1
            } else if h1 <= 0.0 {
                -h1
            } else {
                0.0
            };
            let d2o = if l2 >= 0.0 {
                l2
            } else if h2 <= 0.0 {
                -h2
            } else {
                0.0
            };
            let singular = d1o == 0.0 && d2o == 0.0;
            let (cuts1, cuts2, rule): (Vec<f64>, Vec<f64>, &Vec<(f64, f64)>) = if singular {
                // origin sits at a corner of this patch
                (
                    graded(l1, h1, l1.abs() < h1.abs()),
                    graded(l2, h2, l2.abs() < h2.abs()),
                    &gl8,
                )
            } else {
                (vec![l1, h1], vec![l2, h2], &gl12)
            };
            for w1 in cuts1.windows(2) {
                let (p1lo, p1hi) = (w1[0], w1[1]);
                for w2 in cuts2.windows(2) {
                    let (p2lo, p2hi) = (w2[0], w2[1]);
                    let m1 = 0.5 * (p1lo + p1hi);
                    let r1 = 0.5 * (p1hi - p1lo);
                    let m2 = 0.5 * (p2lo + p2hi);
                    let r2 = 0.5 * (p2hi - p2lo);
                    let mut acc = 0.0;
                    for &(x1, w1g) in rule {
                        let z1 = m1 + r1 * x1;
                        let t1 = t_profile(z1, a1, b1, c1, d1);
                        if t1 == 0.0 {
                            continue;
                        }
                        for &(x2, w2g) in rule {
                            let z2 = m2 + r2 * x2;
                            let t2 = t_profile(z2, a2, b2, c2, d2);
                            if t2 == 0.0 {
                                continue;
                            }
                            acc += w1g * w2g * t1 * t2 * (z1 * z1 + z2 * z2).powf(-beta / 2.0);
                        }
                    }
                    total += acc * r1 * r2;
                }
            }
        }
    }
    total
}

// ---------------------------------------------------------------------------
// Exterior killing mass
// ---------------------------------------------------------------------------

/// `∫_{ℝ^N∖Ω} |x−y|^{−N−sp} dy` for `x ∈ Ω`, via the polar decomposition
/// `∫_0^R r^{−1−sp} (ω_N − σ(r)) dr + ω_N R^{−sp}/(sp)` where `σ(r)` is
/// the angular measure of `Ω` on the sphere of radius `r` about `x` and
/// `R` encloses `Ω`.
pub fn exterior_killing(
    x: &Point,
    domain: &Domain,
    s: f64,
    p: f64,
    tol: f64,
) -> Result<f64> {
    if !domain.contains(x)? {
        return Err(Error::Domain("query point outside the domain".into()));
    }
    let dim = domain.dim();
    let omega_n = crate::constants::sphere_measure(dim)?;
    let sp = s * p;
    let delta = domain.boundary_distance(x)?;
    let r_max = domain.farthest_distance(x);
    // kinks of sigma plus the inner ball radius
    let mut cuts: Vec<f64> = domain
        .critical_radii(x)
        .into_iter()
        .filter(|&r| r > delta && r < r_max)
        .collect();
    cuts.push(delta);
    cuts.push(r_max);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    let mut f = |r: f64| r.powf(-1.0 - sp) * (omega_n - domain.angular_measure(x, r));
    let (inner, err) = adaptive_gk_panels(&mut f, &cuts, tol, 4000);
    if err > tol * 10.0 {
        return Err(Error::Tolerance {
            requested: tol,
            achieved: err,
        });
    }
    let tail = omega_n * r_max.powf(-sp) / sp;
    Ok(inner + tail)
}

// ---------------------------------------------------------------------------
// Pair-weight tables
// ---------------------------------------------------------------------------

/// Kernel selector for a [`PairWeightTable`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelTag {
    /// `|x−y|^{−N}` (logarithmic operator).
    Log,
    /// `|x−y|^{−N−sp}`.
    Frac { s: f64, p: f64 },
}

/// Symmetric table of pairwise kernel masses with zero diagonal.
///
/// The table stores the un-truncated `|x−y|^{−exponent}` mass per cell
/// pair; any unit-ball split is applied downstream at assembly.
#[derive(Debug, Clone)]
pub struct PairWeightTable {
    pub n: usize,
    pub w: Vec<f64>,
    pub tag: KernelTag,
    pub tol: f64,
}

impl PairWeightTable {
    /// Assemble the table for a list of cells with pairwise disjoint
    /// interiors. Entries `w_ii` are zero by definition (piecewise-constant
    /// trial functions carry no same-cell kernel mass).
    pub fn assemble(cells: &[Cell], dim: usize, tag: KernelTag, tol: f64) -> Result<Self> {
        let n = cells.len();
        let mut w = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let val = match tag {
                    KernelTag::Log => pair_weight_log(&cells[i], &cells[j], dim, tol)?,
                    KernelTag::Frac { s, p } => {
                        pair_weight_frac(&cells[i], &cells[j], dim, s, p, tol)?
                    }
                };
                w[i * n + j] = val;
                w[j * n + i] = val;
            }
        }
        Ok(Self { n, w, tag, tol })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.n + j]
    }

    /// Binary cache: header {grid hash, n, kernel tag, tolerance} followed
    /// by the row-major table of 64-bit reals, little-endian.
    pub fn write_cache<W: std::io::Write>(&self, mut out: W, grid_hash: u64) -> Result<()> {
        out.write_all(&grid_hash.to_le_bytes())?;
        out.write_all(&(self.n as u64).to_le_bytes())?;
        let (kind, s, p) = match self.tag {
            KernelTag::Log => (0u8, 0.0, 0.0),
            KernelTag::Frac { s, p } => (1u8, s, p),
        };
        out.write_all(&[kind])?;
        out.write_all(&s.to_le_bytes())?;
        out.write_all(&p.to_le_bytes())?;
        out.write_all(&self.tol.to_le_bytes())?;
        for v in &self.w {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Read a table back; `expect_hash` guards against stale caches.
    pub fn read_cache<R: std::io::Read>(mut input: R, expect_hash: u64) -> Result<Self> {
        let mut u64buf = [0u8; 8];
        input.read_exact(&mut u64buf)?;
        let hash = u64::from_le_bytes(u64buf);
        if hash != expect_hash {
            return Err(Error::Config(format!(
                "cache hash {hash:#x} does not match grid hash {expect_hash:#x}"
            )));
        }
        input.read_exact(&mut u64buf)?;
        let n = u64::from_le_bytes(u64buf) as usize;
        let mut byte = [0u8; 1];
        input.read_exact(&mut byte)?;
        let mut f64buf = [0u8; 8];
        input.read_exact(&mut f64buf)?;
        let s = f64::from_le_bytes(f64buf);
        input.read_exact(&mut f64buf)?;
        let p = f64::from_le_bytes(f64buf);
        input.read_exact(&mut f64buf)?;
        let tol = f64::from_le_bytes(f64buf);
        let tag = match byte[0] {
            0 => KernelTag::Log,
            1 => KernelTag::Frac { s, p },
            other => return Err(Error::Config(format!("unknown kernel tag {other}"))),
        };
        let mut w = vec![0.0; n * n];
        for v in w.iter_mut() {
            input.read_exact(&mut f64buf)?;
            *v = f64::from_le_bytes(f64buf);
        }
        Ok(Self { n, w, tag, tol })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell1(a: f64, b: f64) -> Cell {
        Cell::new(vec![a], vec![b])
    }

    fn cell2(a: (f64, f64), b: (f64, f64)) -> Cell {
        Cell::new(vec![a.0, a.1], vec![b.0, b.1])
    }

    #[test]
    fn gauss_legendre_polynomial_exactness() {
        let rule = gauss_legendre(8);
        // exact up to degree 15
        for k in 0..=15u32 {
            let mut f = |x: f64| x.powi(k as i32);
            let got = gauss_panel(&mut f, -1.0, 1.0, &rule);
            let exact = if k % 2 == 1 {
                0.0
            } else {
                2.0 / (k as f64 + 1.0)
            };
            assert!((got - exact).abs() < 1e-13, "k={k}");
        }
    }

    #[test]
    fn adaptive_gk_known_values() {
        let (v, e) = adaptive_gk(&mut |x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-12, 100);
        assert!((v - 2.0).abs() < 1e-12 && e < 1e-10);
        // mildly singular endpoint
        let (v, _) = adaptive_gk(&mut |x: f64| x.powf(-0.5), 1e-12, 1.0, 1e-9, 2000);
        assert!((v - 2.0).abs() < 1e-5);
    }

    #[test]
    fn radial_rule_model_profiles() {
        // alpha = 1, p = 2, R = 1: integral of 1 over (0,1] is 1
        let rule = RadialRule::new(1.0, 1.0, 2.0, 1e-10).unwrap();
        let got = rule.integrate(&mut |_| 1.0);
        assert!((got - 1.0).abs() < 1e-10);
        // alpha = 0.5, p = 2, R = 1: integral of r^{-1/2} is 2
        let rule = RadialRule::new(1.0, 0.5, 2.0, 1e-10).unwrap();
        let got = rule.integrate(&mut |r: f64| r.powf(-0.5));
        assert!((got - 2.0).abs() < 2e-10);
        // alpha = 0.5, p = 3, R = 2: R^{alpha(p-1)}/(alpha(p-1)) = 2
        let rule = RadialRule::new(2.0, 0.5, 3.0, 1e-10).unwrap();
        let got = rule.integrate(&mut |r: f64| r.powf(0.5 * 2.0 - 1.0));
        assert!((got - 2.0).abs() < 2e-10);
        // divergent profile rejected
        assert!(RadialRule::new(1.0, -0.1, 2.0, 1e-8).is_err());
    }

    #[test]
    fn radial_rule_invariants() {
        let rule = RadialRule::new(1.5, 0.75, 2.5, 1e-9).unwrap();
        assert!(rule.nodes.windows(2).all(|w| w[0].0 < w[1].0));
        assert!(rule.nodes.iter().all(|&(r, w)| r > 0.0 && w > 0.0));
        let smallest = rule.radius * rule.ratio.powi(rule.panels as i32 - 1);
        // innermost panel endpoint matches the layout
        let idx = rule.order; // first node of the second panel
        assert!(rule.nodes[idx - 1].0 < smallest && smallest < rule.nodes[idx].0 * (1.0 + 1e-12));
    }

    #[test]
    fn pair_log_closed_form_vs_oracle() {
        // [0,1] x [2,3]: adaptive oracle on the inner integral
        let a = cell1(0.0, 1.0);
        let b = cell1(2.0, 3.0);
        let w = pair_weight_log(&a, &b, 1, 1e-10).unwrap();
        let mut outer = |x: f64| {
            let (v, _) = adaptive_gk(&mut |y: f64| 1.0 / (y - x), 2.0, 3.0, 1e-13, 200);
            v
        };
        let (oracle, _) = adaptive_gk(&mut outer, 0.0, 1.0, 1e-12, 200);
        assert!(
            (w - oracle).abs() < 1e-9 * oracle,
            "closed {w} vs oracle {oracle}"
        );
        // frozen value 3 ln 3 - 4 ln 2
        let expect = 3.0 * 3.0f64.ln() - 4.0 * 2.0f64.ln();
        assert!((w - expect).abs() < 1e-13);
    }

    #[test]
    fn pair_log_random_pairs_vs_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let a0: f64 = rng.gen_range(-3.0..3.0);
            let la: f64 = rng.gen_range(0.1..1.5);
            let gap: f64 = rng.gen_range(0.05..2.0);
            let lb: f64 = rng.gen_range(0.1..1.5);
            let a = cell1(a0, a0 + la);
            let b = cell1(a0 + la + gap, a0 + la + gap + lb);
            let w = pair_weight_log(&a, &b, 1, 1e-12).unwrap();
            let mut outer = |x: f64| {
                let (v, _) =
                    adaptive_gk(&mut |y: f64| 1.0 / (y - x), b.lo[0], b.hi[0], 1e-14, 400);
                v
            };
            let (oracle, _) = adaptive_gk(&mut outer, a.lo[0], a.hi[0], 1e-13, 400);
            assert!((w - oracle).abs() <= 1e-9 * oracle.abs());
        }
    }

    #[test]
    fn pair_weight_symmetry_and_scaling() {
        let a = cell1(0.0, 0.5);
        let b = cell1(0.5, 1.25);
        let w_ab = pair_weight_log(&a, &b, 1, 1e-10).unwrap();
        let w_ba = pair_weight_log(&b, &a, 1, 1e-10).unwrap();
        assert_eq!(w_ab, w_ba);
        // dilation covariance r^N in 1D
        let r = 2.0;
        let ar = cell1(0.0, 1.0);
        let br = cell1(1.5, 2.0);
        let ar2 = cell1(0.0, 2.0);
        let br2 = cell1(3.0, 4.0);
        let w1 = pair_weight_log(&ar, &br, 1, 1e-12).unwrap();
        let w2 = pair_weight_log(&ar2, &br2, 1, 1e-12).unwrap();
        assert!((w2 - r * w1).abs() < 1e-8 * w2.abs());
        // 2D
        let a2 = cell2((0.0, 0.0), (1.0, 1.0));
        let b2 = cell2((2.0, 0.5), (3.0, 1.5));
        let a2r = cell2((0.0, 0.0), (2.0, 2.0));
        let b2r = cell2((4.0, 1.0), (6.0, 3.0));
        let w1 = pair_weight_log(&a2, &b2, 2, 1e-10).unwrap();
        let w2 = pair_weight_log(&a2r, &b2r, 2, 1e-10).unwrap();
        assert!((w2 - 4.0 * w1).abs() < 1e-8 * w2.abs());
    }

    #[test]
    fn pair_weight_overlap_rejected() {
        let a = cell1(0.0, 1.0);
        let b = cell1(0.5, 1.5);
        assert!(pair_weight_log(&a, &b, 1, 1e-8).is_err());
        assert!(pair_weight_frac(&a, &b, 1, 0.25, 2.0, 1e-6).is_err());
    }

    #[test]
    fn pair_frac_closed_form_and_limit() {
        // disjoint intervals, sp = 0.5 -> beta = 1.5
        let a = cell1(0.0, 1.0);
        let b = cell1(2.0, 3.0);
        let w = pair_weight_frac(&a, &b, 1, 0.25, 2.0, 1e-10).unwrap();
        let beta = 1.5;
        let mut outer = |x: f64| {
            let (v, _) = adaptive_gk(&mut |y: f64| (y - x).powf(-beta), 2.0, 3.0, 1e-13, 200);
            v
        };
        let (oracle, _) = adaptive_gk(&mut outer, 0.0, 1.0, 1e-12, 200);
        assert!((w - oracle).abs() < 1e-9 * oracle);
        // s -> 0 recovers the log weight for separated cells (within 1%)
        let w_small = pair_weight_frac(&a, &b, 1, 1e-3, 2.0, 1e-10).unwrap();
        let w_log = pair_weight_log(&a, &b, 1, 1e-10).unwrap();
        assert!((w_small - w_log).abs() < 0.01 * w_log);
    }

    #[test]
    fn pair_frac_dilation_covariance() {
        // w(rA, rB) = r^{N - sp} w(A, B)
        let (s, p) = (0.2, 2.0);
        let a = cell1(0.0, 1.0);
        let b = cell1(1.0, 2.0); // touching, sp = 0.4 < 1
        let ar = cell1(0.0, 3.0);
        let br = cell1(3.0, 6.0);
        let w1 = pair_weight_frac(&a, &b, 1, s, p, 1e-8).unwrap();
        let w2 = pair_weight_frac(&ar, &br, 1, s, p, 1e-8).unwrap();
        let factor = 3.0f64.powf(1.0 - s * p);
        assert!((w2 - factor * w1).abs() < 1e-6 * w2.abs());
        // 2D separated
        let a2 = cell2((0.0, 0.0), (1.0, 1.0));
        let b2 = cell2((1.0, 1.0), (2.0, 2.0)); // corner touch
        let a2r = cell2((0.0, 0.0), (2.0, 2.0));
        let b2r = cell2((2.0, 2.0), (4.0, 4.0));
        let w1 = pair_weight_frac(&a2, &b2, 2, s, p, 1e-6).unwrap();
        let w2 = pair_weight_frac(&a2r, &b2r, 2, s, p, 1e-6).unwrap();
        let factor = 2.0f64.powf(2.0 - s * p);
        assert!((w2 - factor * w1).abs() < 1e-6 * w2.abs());
    }

    #[test]
    fn touching_cells_finite_and_stable() {
        // two unit cells sharing a face: finite, stable under refinement
        let a = cell2((0.0, 0.0), (1.0, 1.0));
        let b = cell2((1.0, 0.0), (2.0, 1.0));
        let w = pair_weight_log(&a, &b, 2, 1e-8).unwrap();
        assert!(w.is_finite() && w > 0.0);
        // refinement oracle: split B into 4 children and sum
        let mut sum = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let child = cell2(
                    (1.0 + 0.5 * i as f64, 0.5 * j as f64),
                    (1.5 + 0.5 * i as f64, 0.5 + 0.5 * j as f64),
                );
                sum += pair_weight_log(&a, &child, 2, 1e-8).unwrap();
            }
        }
        assert!(
            ((w - sum) / w).abs() < 1e-4,
            "additivity under subdivision: {w} vs {sum}"
        );
        // 1D touching closed form equals oracle computed on split cells
        let a1 = cell1(0.0, 1.0);
        let b1 = cell1(1.0, 2.0);
        let w1 = pair_weight_log(&a1, &b1, 1, 1e-8).unwrap();
        let mut sum1 = 0.0;
        for k in 0..4 {
            let c = cell1(1.0 + 0.25 * k as f64, 1.25 + 0.25 * k as f64);
            sum1 += pair_weight_log(&a1, &c, 1, 1e-12).unwrap();
        }
        assert!(((w1 - sum1) / w1).abs() < 1e-12);
    }

    #[test]
    fn table_assembly_and_cache_roundtrip() {
        let cells: Vec<Cell> = (0..5).map(|k| cell1(k as f64, k as f64 + 1.0)).collect();
        let table = PairWeightTable::assemble(&cells, 1, KernelTag::Log, 1e-10).unwrap();
        for i in 0..5 {
            assert_eq!(table.get(i, i), 0.0);
            for j in 0..5 {
                assert_eq!(table.get(i, j), table.get(j, i));
                assert!(table.get(i, j) >= 0.0 && table.get(i, j).is_finite());
            }
        }
        let mut buf = Vec::new();
        table.write_cache(&mut buf, 0xfeed).unwrap();
        let back = PairWeightTable::read_cache(&buf[..], 0xfeed).unwrap();
        assert_eq!(back.n, table.n);
        assert_eq!(back.w, table.w);
        assert!(PairWeightTable::read_cache(&buf[..], 0xbeef).is_err());
    }
}
