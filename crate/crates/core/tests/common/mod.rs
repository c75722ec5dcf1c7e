//! Independent reference minimizer for single-OD instances with up to three
//! routes. It owns its link-cost code and minimizes
//! `Σ ∫ t_a - b Σ ln(f_r + 1)` over the demand simplex by nested bisection
//! on directional derivatives (exact for convex objectives).
#![allow(dead_code)]

#[derive(Debug, Clone)]
pub struct OracleLink {
    pub fftt: f64,
    pub capacity: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl OracleLink {
    pub fn time(&self, v: f64) -> f64 {
        self.fftt * (1.0 + self.alpha * (v / self.capacity).powf(self.beta))
    }
}

#[derive(Debug, Clone)]
pub struct OracleInstance {
    pub links: Vec<OracleLink>,
    /// 1-based link ids per route.
    pub routes: Vec<Vec<usize>>,
    pub demand: f64,
    pub bound_range: f64,
}

impl OracleInstance {
    fn marginals(&self, f: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.links.len()];
        for (r, route) in self.routes.iter().enumerate() {
            for &a in route {
                v[a - 1] += f[r];
            }
        }
        self.routes
            .iter()
            .enumerate()
            .map(|(r, route)| {
                route.iter().map(|&a| self.links[a - 1].time(v[a - 1])).sum::<f64>()
                    - self.bound_range / (f[r] + 1.0)
            })
            .collect()
    }

    /// Root of an increasing function on `[lo, hi]`, clamped to the ends.
    fn bisect(lo: f64, hi: f64, h: impl Fn(f64) -> f64) -> f64 {
        if h(lo) >= 0.0 {
            return lo;
        }
        if h(hi) <= 0.0 {
            return hi;
        }
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            if h(m) > 0.0 {
                b = m;
            } else {
                a = m;
            }
        }
        0.5 * (a + b)
    }

    pub fn minimize(&self) -> Vec<f64> {
        let q = self.demand;
        match self.routes.len() {
            1 => vec![q],
            2 => {
                let f1 = Self::bisect(0.0, q, |x| {
                    let m = self.marginals(&[x, q - x]);
                    m[0] - m[1]
                });
                vec![f1, q - f1]
            }
            3 => {
                let inner = |f1: f64| {
                    let rest = (q - f1).max(0.0);
                    Self::bisect(0.0, rest, |x| {
                        let m = self.marginals(&[f1, x, (rest - x).max(0.0)]);
                        m[1] - m[2]
                    })
                };
                let f1 = Self::bisect(0.0, q, |x| {
                    let f2 = inner(x);
                    let f3 = (q - x - f2).max(0.0);
                    let m = self.marginals(&[x, f2, f3]);
                    // Envelope: raising f1 takes flow from route 3 while it has any.
                    if f3 > 0.0 {
                        m[0] - m[2]
                    } else {
                        m[0] - m[1]
                    }
                });
                let f2 = inner(f1);
                vec![f1, f2, (q - f1 - f2).max(0.0)]
            }
            n => panic!("oracle handles up to three routes, got {n}"),
        }
    }
}
