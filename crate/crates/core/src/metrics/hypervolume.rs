//! Pareto dominance and the exact hypervolume indicator.
//!
//! Senses are explicit per axis; everything is normalized internally to
//! all-maximize by negating minimized axes, so one kernel serves mixed
//! orientations. The kernel is exact: direct sweeps for one and two
//! dimensions, a z-sweep over an incrementally maintained 2-D staircase for
//! three, and recursive exclusive-volume slicing for four and up.

use super::MetricsError;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    Maximize,
    Minimize,
}

impl Sense {
    pub fn label(self) -> &'static str {
        match self {
            Sense::Maximize => "max",
            Sense::Minimize => "min",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "max" | "maximize" => Some(Sense::Maximize),
            "min" | "minimize" => Some(Sense::Minimize),
            _ => None,
        }
    }
}

/// A point in objective space with per-axis orientation tags.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveVector<T> {
    pub values: Vec<T>,
    pub senses: Vec<Sense>,
}

impl<T: Scalar> ObjectiveVector<T> {
    pub fn new(values: Vec<T>, senses: Vec<Sense>) -> Result<Self, MetricsError> {
        if values.len() != senses.len() {
            return Err(MetricsError::ObjectiveMismatch {
                a: values.len(),
                b: senses.len(),
            });
        }
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(MetricsError::NonFiniteObjective);
        }
        Ok(ObjectiveVector { values, senses })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Value on axis `j` with the sense folded in (all-maximize).
    fn oriented(&self, j: usize) -> T {
        match self.senses[j] {
            Sense::Maximize => self.values[j],
            Sense::Minimize => -self.values[j],
        }
    }
}

/// Upper-bounding reference point closing the dominated region.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePoint<T> {
    pub values: Vec<T>,
    pub senses: Vec<Sense>,
}

impl<T: Scalar> ReferencePoint<T> {
    pub fn new(values: Vec<T>, senses: Vec<Sense>) -> Result<Self, MetricsError> {
        if values.len() != senses.len() {
            return Err(MetricsError::ObjectiveMismatch {
                a: values.len(),
                b: senses.len(),
            });
        }
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(MetricsError::NonFiniteObjective);
        }
        Ok(ReferencePoint { values, senses })
    }

    fn oriented(&self, j: usize) -> T {
        match self.senses[j] {
            Sense::Maximize => self.values[j],
            Sense::Minimize => -self.values[j],
        }
    }
}

fn check_senses<T: Scalar>(a: &[Sense], b: &ObjectiveVector<T>) -> Result<(), MetricsError> {
    if a.len() != b.dim() {
        return Err(MetricsError::ObjectiveMismatch {
            a: a.len(),
            b: b.dim(),
        });
    }
    if a != b.senses.as_slice() {
        return Err(MetricsError::SenseMismatch);
    }
    Ok(())
}

/// True iff `a` is at least as good as `b` everywhere and strictly better
/// somewhere, senses respected.
pub fn dominates<T: Scalar>(
    a: &ObjectiveVector<T>,
    b: &ObjectiveVector<T>,
) -> Result<bool, MetricsError> {
    check_senses(&a.senses, b)?;
    let mut strictly = false;
    for j in 0..a.dim() {
        let (x, y) = (a.oriented(j), b.oriented(j));
        if x < y {
            return Ok(false);
        }
        if x > y {
            strictly = true;
        }
    }
    Ok(strictly)
}

/// All non-dominated points in stable input order; exact duplicates are kept
/// once (first occurrence).
pub fn pareto_front<T: Scalar>(
    points: &[ObjectiveVector<T>],
) -> Result<Vec<ObjectiveVector<T>>, MetricsError> {
    let mut out: Vec<ObjectiveVector<T>> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        if i > 0 {
            check_senses(&points[0].senses, p)?;
        }
        let mut keep = true;
        for q in points {
            if dominates(q, p)? {
                keep = false;
                break;
            }
        }
        if keep && !out.iter().any(|q| q.values == p.values) {
            out.push(p.clone());
        }
    }
    Ok(out)
}

/// Exact hypervolume of the region dominated by `points` and bounded by
/// `reference`. Points that do not strictly dominate the reference on every
/// axis contribute nothing.
pub fn hypervolume<T: Scalar>(
    points: &[ObjectiveVector<T>],
    reference: &ReferencePoint<T>,
) -> Result<T, MetricsError> {
    let m = reference.values.len();
    let mut translated: Vec<Vec<T>> = Vec::with_capacity(points.len());
    for p in points {
        if p.dim() != m {
            return Err(MetricsError::ObjectiveMismatch { a: p.dim(), b: m });
        }
        if p.senses != reference.senses {
            return Err(MetricsError::SenseMismatch);
        }
        let q: Vec<T> = (0..m).map(|j| p.oriented(j) - reference.oriented(j)).collect();
        if q.iter().all(|&v| v > T::zero()) {
            translated.push(q);
        }
    }
    Ok(hv_kernel(translated))
}

/// `HV(points) - HV(points without points[index])`.
pub fn hv_contribution<T: Scalar>(
    points: &[ObjectiveVector<T>],
    reference: &ReferencePoint<T>,
    index: usize,
) -> Result<T, MetricsError> {
    assert!(index < points.len(), "contribution index out of range");
    let full = hypervolume(points, reference)?;
    let rest: Vec<ObjectiveVector<T>> = points
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != index)
        .map(|(_, p)| p.clone())
        .collect();
    let without = hypervolume(&rest, reference)?;
    Ok(full - without)
}

// ---------------------------------------------------------------------------
// Kernel over translated, strictly positive, all-maximize coordinates.
// ---------------------------------------------------------------------------

fn hv_kernel<T: Scalar>(mut points: Vec<Vec<T>>) -> T {
    if points.is_empty() {
        return T::zero();
    }
    dedup_and_prune(&mut points);
    match points[0].len() {
        1 => points
            .iter()
            .map(|p| p[0])
            .fold(T::zero(), |m, v| if v > m { v } else { m }),
        2 => hv2(points),
        3 => hv3(points),
        _ => hv_recursive(points),
    }
}

/// Remove exact duplicates and dominated points (all-maximize).
fn dedup_and_prune<T: Scalar>(points: &mut Vec<Vec<T>>) {
    points.sort_by(|a, b| a.partial_cmp(b).expect("finite objectives"));
    points.dedup();
    let snapshot = points.clone();
    points.retain(|p| {
        !snapshot
            .iter()
            .any(|q| q != p && q.iter().zip(p.iter()).all(|(a, b)| a >= b))
    });
}

fn hv2<T: Scalar>(mut points: Vec<Vec<T>>) -> T {
    // sort by x descending; after pruning, y strictly increases
    points.sort_by(|a, b| b[0].partial_cmp(&a[0]).expect("finite objectives"));
    let mut area = T::zero();
    let mut y_max = T::zero();
    for p in points {
        if p[1] > y_max {
            area += p[0] * (p[1] - y_max);
            y_max = p[1];
        }
    }
    area
}

/// Staircase of mutually non-dominated 2-D points, x strictly descending,
/// y strictly ascending. `insert` returns the exclusive area the new point
/// adds over the staircase.
struct Staircase<T> {
    steps: Vec<(T, T)>,
}

impl<T: Scalar> Staircase<T> {
    fn new() -> Self {
        Staircase { steps: Vec::new() }
    }

    fn insert(&mut self, x: T, y: T) -> T {
        // prefix of steps with xi > x; the rest have xi <= x
        let split = self.steps.partition_point(|&(xi, _)| xi > x);
        if split > 0 && self.steps[split - 1].1 >= y {
            return T::zero(); // dominated by a wider, taller step
        }
        let y_low = if split > 0 {
            self.steps[split - 1].1
        } else {
            T::zero()
        };
        let mut gained = x * (y - y_low);
        let mut j = split;
        let mut y_prev = y_low;
        while j < self.steps.len() && self.steps[j].1 <= y {
            let (xj, yj) = self.steps[j];
            gained -= xj * (yj - y_prev);
            y_prev = yj;
            j += 1;
        }
        if j < self.steps.len() {
            gained -= self.steps[j].0 * (y - y_prev);
        }
        self.steps.splice(split..j, [(x, y)]);
        gained
    }
}

fn hv3<T: Scalar>(mut points: Vec<Vec<T>>) -> T {
    // sweep z from the top, maintaining the dominated area in the xy-plane
    points.sort_by(|a, b| b[2].partial_cmp(&a[2]).expect("finite objectives"));
    let mut stairs = Staircase::new();
    let mut volume = T::zero();
    let mut area = T::zero();
    let mut i = 0;
    while i < points.len() {
        let z = points[i][2];
        while i < points.len() && points[i][2] == z {
            area += stairs.insert(points[i][0], points[i][1]);
            i += 1;
        }
        let z_next = if i < points.len() { points[i][2] } else { T::zero() };
        volume += area * (z - z_next);
    }
    volume
}

/// Exclusive-volume recursion for four and more dimensions: the volume is
/// the sum over points of box(p) minus the volume of p's intersection with
/// the later points, each intersection being a componentwise minimum.
fn hv_recursive<T: Scalar>(mut points: Vec<Vec<T>>) -> T {
    points.sort_by(|a, b| b[0].partial_cmp(&a[0]).expect("finite objectives"));
    let mut total = T::zero();
    for i in 0..points.len() {
        let p = &points[i];
        let mut box_vol = T::one();
        for &v in p.iter() {
            box_vol *= v;
        }
        let limited: Vec<Vec<T>> = points[i + 1..]
            .iter()
            .map(|q| q.iter().zip(p.iter()).map(|(&a, &b)| a.min(b)).collect())
            .collect();
        total += box_vol - hv_kernel(limited);
    }
    total
}
