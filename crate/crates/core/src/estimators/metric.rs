/// Distance used by the nearest-neighbor rules.
///
/// Distances are compared as squared values in `f64`. Equal observations
/// always produce bit-identical distances, so tie groups are exact.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum Metric {
    #[default]
    Euclidean,
    /// Every coordinate lives on a circle of the given period, so
    /// `d(x, y) = min(|x − y| mod p, p − |x − y| mod p)` per coordinate.
    Ring { period: f64 },
}

impl Metric {
    pub fn ring(period: f64) -> crate::Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(crate::Error::InvalidArgument(format!(
                "ring period must be positive, got {period}"
            )));
        }
        Ok(Metric::Ring { period })
    }

    #[inline]
    fn axis(&self, a: f64, b: f64) -> f64 {
        let d = (a - b).abs();
        match *self {
            Metric::Euclidean => d,
            Metric::Ring { period } => {
                let d = d % period;
                d.min(period - d)
            }
        }
    }

    /// Squared distance between two points of equal dimension.
    #[inline]
    pub fn dist2(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (&x, &y) in a.iter().zip(b) {
            let d = self.axis(x, y);
            acc += d * d;
        }
        acc
    }

    /// Squared distance from `p` to the box `[lo, hi]`; a lower bound on the
    /// distance to any point inside it.
    #[inline]
    pub fn box_dist2(&self, p: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..p.len() {
            let d = match *self {
                Metric::Euclidean => {
                    if p[i] < lo[i] {
                        lo[i] - p[i]
                    } else if p[i] > hi[i] {
                        p[i] - hi[i]
                    } else {
                        0.0
                    }
                }
                Metric::Ring { period } => {
                    let span = hi[i] - lo[i];
                    if span >= period || (p[i] - lo[i]).rem_euclid(period) <= span {
                        0.0
                    } else {
                        self.axis(p[i], lo[i]).min(self.axis(p[i], hi[i]))
                    }
                }
            };
            acc += d * d;
        }
        acc
    }
}
