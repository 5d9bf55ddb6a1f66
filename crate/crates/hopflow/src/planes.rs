//! Polyhedral outer approximation of the link rate function.
//!
//! [`capacity`](crate::capacity::capacity) is concave, so every tangent plane
//! bounds it from above and the pointwise minimum over a set of planes is an
//! over-approximation that repeated relinearization tightens around the
//! iterates that matter. Each link keeps a small budget of planes; when the
//! budget is full the plane that has gone longest without being the binding
//! one is dropped.

use crate::capacity::{capacity, capacity_gradient};

/// Default number of planes kept per link.
pub const DEFAULT_PLANE_BUDGET: usize = 10;

/// Merge width for hulls that are relinearized every consensus iteration.
/// Two tangents at log-snr spacing d leave a hull error of about
/// 0.05 * d^2 * bandwidth between them, so this width resolves the
/// capacity to ~1e-7 per MHz while still coalescing re-anchored planes.
pub const RELINEARIZE_MERGE_WIDTH: f64 = 1e-3;

/// Coefficients of a single bound `rate <= slope_p * p + slope_w * w + offset`.
#[derive(Clone, Copy, Debug)]
pub struct TangentPlane {
    pub slope_p: f64,
    pub slope_w: f64,
    pub offset: f64,
    /// Anchor snr; the rate function is positively homogeneous, so this
    /// single number parameterizes the tangent direction.
    anchor_snr: f64,
    last_tight: u64,
}

/// A budgeted set of tangent planes for one link.
#[derive(Clone, Debug)]
pub struct TangentPlaneModel {
    planes: Vec<TangentPlane>,
    budget: usize,
    /// Log-snr width under which a new anchor replaces its neighbor.
    merge_width: f64,
    clock: u64,
}

impl Default for TangentPlaneModel {
    fn default() -> Self {
        Self::new(DEFAULT_PLANE_BUDGET)
    }
}

impl TangentPlaneModel {
    /// Model that only coalesces effectively identical anchors. Suits
    /// append-mostly cutting-plane loops that need support pairs arbitrarily
    /// close together near the optimum.
    pub fn new(budget: usize) -> Self {
        Self::with_merge(budget, 1e-9)
    }

    /// Model that replaces planes whose anchor snr is within `merge_width`
    /// (log scale) of the new anchor. Wider widths keep the plane set well
    /// separated, which relinearize-heavy consensus loops need to keep their
    /// constraint matrices well conditioned.
    pub fn with_merge(budget: usize, merge_width: f64) -> Self {
        assert!(budget >= 1, "plane budget must be at least 1");
        Self { planes: Vec::new(), budget, merge_width, clock: 0 }
    }

    pub fn is_empty(&self) -> bool {
        self.planes.is_empty()
    }

    pub fn planes(&self) -> &[TangentPlane] {
        &self.planes
    }

    /// Model value at `(p, w)`: minimum over planes, `+inf` when empty.
    pub fn eval(&self, p: f64, w: f64) -> f64 {
        self.planes
            .iter()
            .map(|pl| pl.slope_p * p + pl.slope_w * w + pl.offset)
            .fold(f64::INFINITY, f64::min)
    }

    /// Stamps the plane that is binding at `(p, w)` as recently tight.
    pub fn mark_tight(&mut self, p: f64, w: f64) {
        self.clock += 1;
        let clock = self.clock;
        if let Some(best) = self.planes.iter_mut().min_by(|a, b| {
            let va = a.slope_p * p + a.slope_w * w + a.offset;
            let vb = b.slope_p * p + b.slope_w * w + b.offset;
            va.total_cmp(&vb)
        }) {
            best.last_tight = clock;
        }
    }

    /// Adds the tangent plane of the rate function at anchor `(p0, w0)` for a
    /// link with gain `q` and noise density `n0`.
    ///
    /// An anchor whose snr is within the merge width of an existing plane's
    /// replaces that plane in place: homogeneity makes such planes
    /// near-parallel rays through the origin, and letting them accumulate
    /// both wastes budget and degrades the constraint matrix. Replacing
    /// keeps the hull exact at the newest iterate. When the budget is
    /// exceeded the least recently tight plane is evicted. For `w0 = 0` the
    /// plane through the origin with the zero-snr power slope is used.
    pub fn refine(&mut self, q: f64, n0: f64, p0: f64, w0: f64) {
        // No tangent exists on the w = 0 edge (the w-slope diverges for
        // p > 0); collapse the anchor to the origin, where the limiting
        // plane is the power ceiling through zero.
        let p0 = if w0 <= 0.0 { 0.0 } else { p0 };
        let (slope_p, slope_w) = capacity_gradient(w0, p0, q, n0);
        let value = capacity(w0, p0, q, n0);
        let offset = value - slope_p * p0 - slope_w * w0;
        let anchor_snr = if w0 > 0.0 { p0 * q / (w0 * n0) } else { 0.0 };
        self.clock += 1;
        let plane = TangentPlane { slope_p, slope_w, offset, anchor_snr, last_tight: self.clock };

        let near = self.planes.iter_mut().min_by(|a, b| {
            snr_distance(a.anchor_snr, anchor_snr)
                .total_cmp(&snr_distance(b.anchor_snr, anchor_snr))
        });
        if let Some(existing) = near {
            if snr_distance(existing.anchor_snr, anchor_snr) < self.merge_width {
                *existing = plane;
                return;
            }
        }

        if self.planes.len() == self.budget {
            let evict = self
                .planes
                .iter()
                .enumerate()
                .min_by_key(|(_, pl)| pl.last_tight)
                .map(|(i, _)| i)
                .expect("budget >= 1");
            self.planes.remove(evict);
        }
        self.planes.push(plane);
    }

    /// Drops all planes, e.g. after the channel the planes were built for
    /// changed.
    pub fn reset(&mut self) {
        self.planes.clear();
        self.clock = 0;
    }
}

/// Log-scale separation between two anchor snrs; zero snrs compare equal to
/// each other and far from everything else.
fn snr_distance(a: f64, b: f64) -> f64 {
    match (a <= 0.0, b <= 0.0) {
        (true, true) => 0.0,
        (true, false) | (false, true) => f64::INFINITY,
        (false, false) => (a / b).ln().abs(),
    }
}
