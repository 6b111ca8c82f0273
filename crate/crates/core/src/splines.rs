//! B-spline bases and monotone cubic Hermite interpolation.
//!
//! [`SplineBasis`] evaluates clamped B-spline bases (and their exact time
//! derivatives) on a closed interval. In [`BasisMode::Increasing`] the basis is
//! an intercept column followed by integrated B-splines; any coefficient vector
//! with nonnegative non-intercept entries then yields a nondecreasing function.
//!
//! [`MonotoneInterpolant`] is a C¹ cubic Hermite interpolant whose slopes are
//! three-point finite differences passed through the Hyman monotonicity filter.

use crate::error::{invalid, Error, Result};

/// Largest supported polynomial degree. Local basis values live on the stack.
pub const MAX_DEGREE: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisMode {
    /// Clamped B-splines of the configured degree.
    Standard,
    /// Intercept plus integrals of degree-`d` B-splines (quadratic by default).
    Increasing,
}

/// Clamped B-spline basis on an open knot vector with `degree + 1`-fold end knots.
#[derive(Debug, Clone, PartialEq)]
struct BSpline {
    degree: usize,
    knots: Vec<f64>,
    n: usize,
}

impl BSpline {
    fn new(degree: usize, interior: &[f64], lo: f64, hi: f64) -> Self {
        let mut knots = Vec::with_capacity(interior.len() + 2 * (degree + 1));
        knots.extend(std::iter::repeat_n(lo, degree + 1));
        knots.extend_from_slice(interior);
        knots.extend(std::iter::repeat_n(hi, degree + 1));
        let n = interior.len() + degree + 1;
        Self { degree, knots, n }
    }

    /// Knot span index `i` with `knots[i] <= t < knots[i + 1]`; the right end
    /// of the domain belongs to the last nonempty span.
    fn span(&self, t: f64) -> usize {
        let p = self.degree;
        if t >= self.knots[self.n] {
            return self.n - 1;
        }
        if t <= self.knots[p] {
            return p;
        }
        // Largest i in [p, n-1] with knots[i] <= t.
        let upper = self.knots[p..=self.n].partition_point(|&k| k <= t);
        (p + upper - 1).min(self.n - 1)
    }

    /// Nonzero basis values `N_{span-p..=span}` at `t` (Cox-de Boor triangle).
    fn local(&self, span: usize, t: f64, degree: usize, out: &mut [f64; MAX_DEGREE + 2]) {
        let k = &self.knots;
        let mut left = [0.0; MAX_DEGREE + 2];
        let mut right = [0.0; MAX_DEGREE + 2];
        out[0] = 1.0;
        for j in 1..=degree {
            left[j] = t - k[span + 1 - j];
            right[j] = k[span + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let temp = if denom > 0.0 { out[r] / denom } else { 0.0 };
                out[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            out[j] = saved;
        }
    }

    fn eval_into(&self, t: f64, out: &mut [f64]) {
        out.fill(0.0);
        let span = self.span(t);
        let mut local = [0.0; MAX_DEGREE + 2];
        self.local(span, t, self.degree, &mut local);
        let first = span - self.degree;
        out[first..=span].copy_from_slice(&local[..=self.degree]);
    }

    /// Exact first derivatives; requires `degree >= 1`.
    fn deriv_into(&self, t: f64, out: &mut [f64]) {
        out.fill(0.0);
        let p = self.degree;
        let span = self.span(t);
        // Degree p-1 values on the same knot vector: N_{span-p+1..=span, p-1}.
        let mut lower = [0.0; MAX_DEGREE + 2];
        self.local(span, t, p - 1, &mut lower);
        let k = &self.knots;
        let pf = p as f64;
        // N_{i,p-1} for i = span-p+1+r stored at lower[r]; N_{span-p,p-1} = 0.
        let lower_at = |i: usize| -> f64 {
            if i + p < span + 1 || i > span {
                0.0
            } else {
                lower[i + p - 1 - span]
            }
        };
        for i in (span - p)..=span {
            let d1 = k[i + p] - k[i];
            let d2 = k[i + p + 1] - k[i + 1];
            let a = if d1 > 0.0 { lower_at(i) / d1 } else { 0.0 };
            let b = if d2 > 0.0 { lower_at(i + 1) / d2 } else { 0.0 };
            out[i] = pf * (a - b);
        }
    }
}

/// A spline basis on a closed interval.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineBasis {
    degree: usize,
    interior_knots: Vec<f64>,
    domain: (f64, f64),
    mode: BasisMode,
    // Standard: the basis itself. Increasing: the degree-(d+1) basis whose
    // tail sums give the integrated columns.
    upper: BSpline,
    // Increasing mode only: the degree-d basis (derivatives of the columns).
    lower: Option<BSpline>,
}

impl SplineBasis {
    pub fn new(degree: usize, interior_knots: Vec<f64>, domain: (f64, f64), mode: BasisMode) -> Result<Self> {
        let (lo, hi) = domain;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(invalid(format!("spline domain [{lo}, {hi}] is empty")));
        }
        let max = if mode == BasisMode::Increasing { MAX_DEGREE - 1 } else { MAX_DEGREE };
        if degree > max {
            return Err(invalid(format!("spline degree {degree} exceeds {max}")));
        }
        if interior_knots.iter().any(|&k| !(k > lo && k < hi)) {
            return Err(invalid("interior knots must lie strictly inside the domain"));
        }
        if interior_knots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("interior knots must be strictly increasing"));
        }
        let (upper, lower) = match mode {
            BasisMode::Standard => (BSpline::new(degree, &interior_knots, lo, hi), None),
            BasisMode::Increasing => (
                BSpline::new(degree + 1, &interior_knots, lo, hi),
                Some(BSpline::new(degree, &interior_knots, lo, hi)),
            ),
        };
        Ok(Self { degree, interior_knots, domain, mode, upper, lower })
    }

    /// Basis with `count` equidistant interior knots.
    pub fn equidistant(degree: usize, count: usize, domain: (f64, f64), mode: BasisMode) -> Result<Self> {
        let (lo, hi) = domain;
        let knots = (1..=count).map(|i| lo + (hi - lo) * i as f64 / (count + 1) as f64).collect();
        Self::new(degree, knots, domain, mode)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn mode(&self) -> BasisMode {
        self.mode
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn interior_knots(&self) -> &[f64] {
        &self.interior_knots
    }

    /// Number of basis functions.
    pub fn len(&self) -> usize {
        match self.mode {
            BasisMode::Standard => self.upper.n,
            // intercept + one integrated column per degree-d function
            BasisMode::Increasing => self.upper.n,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Indices of basis columns that must carry nonnegative coefficients for
    /// the fitted function to be nondecreasing (empty in standard mode).
    pub fn monotone_columns(&self) -> std::ops::Range<usize> {
        match self.mode {
            BasisMode::Standard => 0..0,
            BasisMode::Increasing => 1..self.len(),
        }
    }

    fn check(&self, t: f64) -> Result<()> {
        let (lo, hi) = self.domain;
        if t >= lo && t <= hi {
            Ok(())
        } else {
            Err(Error::Domain { value: t, lo, hi })
        }
    }

    /// Basis values at `t`.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        self.check(t)?;
        let mut out = vec![0.0; self.len()];
        self.eval_into(t, &mut out);
        Ok(out)
    }

    /// Exact time derivatives of the basis functions at `t`.
    pub fn deriv(&self, t: f64) -> Result<Vec<f64>> {
        self.check(t)?;
        if self.mode == BasisMode::Standard && self.degree == 0 {
            return Err(Error::Unsupported("derivative of a degree-0 basis".into()));
        }
        let mut out = vec![0.0; self.len()];
        self.deriv_into(t, &mut out);
        Ok(out)
    }

    /// Unchecked evaluation; `t` must lie in the domain and `out.len() == len()`.
    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        match self.mode {
            BasisMode::Standard => self.upper.eval_into(t, out),
            BasisMode::Increasing => {
                let up = &self.upper;
                let q = up.degree;
                let span = up.span(t);
                let mut local = [0.0; MAX_DEGREE + 2];
                up.local(span, t, q, &mut local);
                out[0] = 1.0;
                // Column 1 + i integrates the degree-d function i, which is
                // a scaled tail sum of upper functions j >= i + 1.
                let first = span - q;
                let mut tail = 0.0;
                for col in (1..up.n).rev() {
                    let j = col; // upper index i + 1 with i = col - 1
                    if j >= first && j <= span {
                        tail += local[j - first];
                    }
                    let value = if j < first { 1.0 } else { tail };
                    let scale = (up.knots[j + q] - up.knots[j]) / q as f64;
                    out[col] = scale * value;
                }
            }
        }
    }

    /// Unchecked derivative; see [`SplineBasis::eval_into`].
    pub fn deriv_into(&self, t: f64, out: &mut [f64]) {
        match self.mode {
            BasisMode::Standard => {
                if self.degree == 0 {
                    out.fill(0.0);
                } else {
                    self.upper.deriv_into(t, out)
                }
            }
            BasisMode::Increasing => {
                out[0] = 0.0;
                let lower = self.lower.as_ref().expect("increasing basis has a lower basis");
                lower.eval_into(t, &mut out[1..]);
            }
        }
    }
}

/// How the end nodes of a [`MonotoneInterpolant`] are determined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryRule {
    /// Every node value, including both ends, is given.
    FixedBothEnds,
    /// The value at the last node is the linear extrapolation of the two
    /// preceding nodes.
    ExtrapolateRight,
}

/// Derivative of one filtered slope with respect to the interval secants: at
/// most two secants contribute.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct SlopeDeriv {
    pub terms: [(usize, f64); 2],
}

/// Three-point slopes followed by the Hyman filter. `secants[i]` is the
/// slope of interval `i`; returns node slopes and their (piecewise constant)
/// derivatives with respect to the secants.
pub(crate) fn hyman_slopes(x: &[f64], secants: &[f64]) -> (Vec<f64>, Vec<SlopeDeriv>) {
    let n = x.len();
    debug_assert_eq!(secants.len(), n - 1);
    let mut slopes = vec![0.0; n];
    let mut derivs = vec![SlopeDeriv::default(); n];
    for i in 0..n {
        let (raw, raw_deriv) = if i == 0 {
            (secants[0], SlopeDeriv { terms: [(0, 1.0), (0, 0.0)] })
        } else if i == n - 1 {
            (secants[n - 2], SlopeDeriv { terms: [(n - 2, 1.0), (0, 0.0)] })
        } else {
            let h0 = x[i] - x[i - 1];
            let h1 = x[i + 1] - x[i];
            let w0 = h1 / (h0 + h1);
            let w1 = h0 / (h0 + h1);
            (
                (h1 * secants[i - 1] + h0 * secants[i]) / (h0 + h1),
                SlopeDeriv { terms: [(i - 1, w0), (i, w1)] },
            )
        };
        let left = if i == 0 { 0 } else { i - 1 };
        let right = if i == n - 1 { n - 2 } else { i };
        let (s0, s1) = (secants[left], secants[right]);
        let (cap_idx, cap) = if s0.abs() <= s1.abs() { (left, s0.abs()) } else { (right, s1.abs()) };
        let sig = if s0 * s1 > 0.0 { s1 } else { raw };
        let cap_sign = secants[cap_idx].signum();
        let (m, d) = if sig >= 0.0 {
            if raw < 0.0 {
                (0.0, SlopeDeriv::default())
            } else if raw > 3.0 * cap {
                (3.0 * cap, SlopeDeriv { terms: [(cap_idx, 3.0 * cap_sign), (0, 0.0)] })
            } else {
                (raw, raw_deriv)
            }
        } else if raw > 0.0 {
            (0.0, SlopeDeriv::default())
        } else if raw < -3.0 * cap {
            (-3.0 * cap, SlopeDeriv { terms: [(cap_idx, -3.0 * cap_sign), (0, 0.0)] })
        } else {
            (raw, raw_deriv)
        };
        slopes[i] = m;
        derivs[i] = d;
    }
    (slopes, derivs)
}

/// Interval index for `t` among sorted nodes (clamped to the end intervals).
pub(crate) fn interval(x: &[f64], t: f64) -> usize {
    let pp = x.partition_point(|&xi| xi <= t);
    pp.saturating_sub(1).min(x.len() - 2)
}

/// Cubic Hermite weights on `[x0, x1]` for (y0, m0, y1, m1).
#[inline]
pub(crate) fn hermite_weights(x0: f64, x1: f64, t: f64) -> [f64; 4] {
    let h = x1 - x0;
    let s = (t - x0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    [
        2.0 * s3 - 3.0 * s2 + 1.0,
        h * (s3 - 2.0 * s2 + s),
        -2.0 * s3 + 3.0 * s2,
        h * (s3 - s2),
    ]
}

#[inline]
pub(crate) fn hermite_deriv_weights(x0: f64, x1: f64, t: f64) -> [f64; 4] {
    let h = x1 - x0;
    let s = (t - x0) / h;
    let s2 = s * s;
    [
        (6.0 * s2 - 6.0 * s) / h,
        3.0 * s2 - 4.0 * s + 1.0,
        (-6.0 * s2 + 6.0 * s) / h,
        3.0 * s2 - 2.0 * s,
    ]
}

/// Hyman-filtered C¹ cubic Hermite interpolant through sorted nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneInterpolant {
    x: Vec<f64>,
    y: Vec<f64>,
    slopes: Vec<f64>,
    rule: BoundaryRule,
}

impl MonotoneInterpolant {
    /// Build the interpolant. With [`BoundaryRule::ExtrapolateRight`], `y`
    /// has one entry fewer than `x` and the last node value is extrapolated.
    pub fn new(x: &[f64], y: &[f64], rule: BoundaryRule) -> Result<Self> {
        let expected = match rule {
            BoundaryRule::FixedBothEnds => x.len(),
            BoundaryRule::ExtrapolateRight => x.len() - 1,
        };
        let min_nodes = match rule {
            BoundaryRule::FixedBothEnds => 2,
            BoundaryRule::ExtrapolateRight => 3,
        };
        if x.len() < min_nodes || y.len() != expected {
            return Err(invalid(format!(
                "monotone interpolation needs {min_nodes}+ nodes and matching values (got {} nodes, {} values)",
                x.len(),
                y.len()
            )));
        }
        if x.iter().chain(y).any(|v| !v.is_finite()) {
            return Err(invalid("nodes and values must be finite"));
        }
        if x.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("interpolation abscissae must be strictly increasing (duplicate anchor?)"));
        }
        let mut values = y.to_vec();
        if rule == BoundaryRule::ExtrapolateRight {
            let n = x.len();
            let secant = (y[n - 2] - y[n - 3]) / (x[n - 2] - x[n - 3]);
            values.push(y[n - 2] + (x[n - 1] - x[n - 2]) * secant);
        }
        let secants: Vec<f64> =
            x.windows(2).zip(values.windows(2)).map(|(xs, ys)| (ys[1] - ys[0]) / (xs[1] - xs[0])).collect();
        let (slopes, _) = hyman_slopes(x, &secants);
        Ok(Self { x: x.to_vec(), y: values, slopes, rule })
    }

    pub fn abscissae(&self) -> &[f64] {
        &self.x
    }

    /// Node values, including an extrapolated right end.
    pub fn values(&self) -> &[f64] {
        &self.y
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn boundary_rule(&self) -> BoundaryRule {
        self.rule
    }

    /// Value at `t`; linear extrapolation with the end slopes outside the nodes.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t < self.x[0] {
            return self.y[0] + (t - self.x[0]) * self.slopes[0];
        }
        if t > self.x[n - 1] {
            return self.y[n - 1] + (t - self.x[n - 1]) * self.slopes[n - 1];
        }
        let i = interval(&self.x, t);
        let w = hermite_weights(self.x[i], self.x[i + 1], t);
        w[0] * self.y[i] + w[1] * self.slopes[i] + w[2] * self.y[i + 1] + w[3] * self.slopes[i + 1]
    }

    pub fn deriv(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t < self.x[0] {
            return self.slopes[0];
        }
        if t > self.x[n - 1] {
            return self.slopes[n - 1];
        }
        let i = interval(&self.x, t);
        let w = hermite_deriv_weights(self.x[i], self.x[i + 1], t);
        w[0] * self.y[i] + w[1] * self.slopes[i] + w[2] * self.y[i + 1] + w[3] * self.slopes[i + 1]
    }
}

/// Build a monotone interpolant (free-function form of [`MonotoneInterpolant::new`]).
pub fn monotone_cubic(anchors: &[f64], values: &[f64], rule: BoundaryRule) -> Result<MonotoneInterpolant> {
    MonotoneInterpolant::new(anchors, values, rule)
}
