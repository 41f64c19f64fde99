use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::MapSpec;
use crate::vecgeo::Point;

/// Where random test points are drawn from.
#[derive(Debug, Clone, PartialEq)]
pub enum SampleRegion {
    /// Each coordinate log-uniform on `[lo, hi]`, `0 < lo < hi`.
    LogCone { lo: f64, hi: f64 },
    /// Uniform on an axis-aligned box.
    Box { lo: Point, hi: Point },
}

impl SampleRegion {
    pub fn draw<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Point {
        match self {
            SampleRegion::LogCone { lo, hi } => {
                let (a, b) = (lo.ln(), hi.ln());
                (0..n).map(|_| rng.gen_range(a..b).exp()).collect()
            }
            SampleRegion::Box { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(a, b)| rng.gen_range(*a..*b))
                .collect(),
        }
    }
}

pub(super) fn sample_points(map: &MapSpec, count: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let max_tries = 1000 * count.max(1);
    let mut tries = 0;
    while out.len() < count && tries < max_tries {
        tries += 1;
        let p = map.region.draw(map.n, &mut rng);
        if !map.in_domain(&p) {
            continue;
        }
        let (f, g) = (map.forward(&p), map.inverse(&p));
        if map.in_domain(&f) && map.in_domain(&g) {
            out.push(p);
        }
    }
    out
}
