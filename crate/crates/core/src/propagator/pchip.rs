//! Monotone piecewise-cubic Hermite interpolation (Fritsch-Carlson slopes).

/// Interpolant through `(xs[i], ys[i])`; `xs` strictly increasing.
#[derive(Debug, Clone)]
pub(crate) struct Pchip<'a> {
    xs: &'a [f64],
    ys: &'a [f64],
    slopes: Vec<f64>,
}

impl<'a> Pchip<'a> {
    pub(crate) fn new(xs: &'a [f64], ys: &'a [f64]) -> Self {
        assert_eq!(xs.len(), ys.len());
        assert!(xs.len() >= 2);
        let n = xs.len();
        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();
        let mut slopes = vec![0.0; n];
        for i in 1..n - 1 {
            let (d0, d1) = (delta[i - 1], delta[i]);
            if d0 * d1 > 0.0 {
                let w1 = 2.0 * h[i] + h[i - 1];
                let w2 = h[i] + 2.0 * h[i - 1];
                slopes[i] = (w1 + w2) / (w1 / d0 + w2 / d1);
            }
        }
        slopes[0] = end_slope(h[0], h.get(1).copied().unwrap_or(h[0]), delta[0], *delta.get(1).unwrap_or(&delta[0]));
        if n > 2 {
            slopes[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        } else {
            slopes[n - 1] = delta[0];
        }
        Self { xs, ys, slopes }
    }

    fn interval(&self, x: f64) -> usize {
        match self.xs.partition_point(|&v| v <= x) {
            0 => 0,
            k => (k - 1).min(self.xs.len() - 2),
        }
    }

    #[cfg(test)]
    pub(crate) fn eval(&self, x: f64) -> f64 {
        let i = self.interval(x);
        let h = self.xs[i + 1] - self.xs[i];
        let s = (x - self.xs[i]) / h;
        let (y0, y1) = (self.ys[i], self.ys[i + 1]);
        let (m0, m1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * m1
    }

    /// Exact integral of the interpolant over `[a, b]`, clipped to the data span.
    pub(crate) fn integrate(&self, a: f64, b: f64) -> f64 {
        let (lo, hi) = (self.xs[0], self.xs[self.xs.len() - 1]);
        let (a, b) = (a.max(lo), b.min(hi));
        if b <= a {
            return 0.0;
        }
        let (ia, ib) = (self.interval(a), self.interval(b));
        if ia == ib {
            return self.partial(ia, a, b);
        }
        let mut total = self.partial(ia, a, self.xs[ia + 1]);
        for i in ia + 1..ib {
            total += self.partial(i, self.xs[i], self.xs[i + 1]);
        }
        total + self.partial(ib, self.xs[ib], b)
    }

    /// Integral over `[a, b]` within interval `i`.
    fn partial(&self, i: usize, a: f64, b: f64) -> f64 {
        let h = self.xs[i + 1] - self.xs[i];
        let (y0, y1) = (self.ys[i], self.ys[i + 1]);
        let (m0, m1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        // Antiderivative of the Hermite basis in s, times h.
        let prim = |s: f64| {
            let s2 = s * s;
            let s3 = s2 * s;
            let s4 = s3 * s;
            (0.5 * s4 - s3 + s) * y0
                + (0.25 * s4 - 2.0 * s3 / 3.0 + 0.5 * s2) * m0
                + (-0.5 * s4 + s3) * y1
                + (0.25 * s4 - s3 / 3.0) * m1
        };
        let sa = (a - self.xs[i]) / h;
        let sb = (b - self.xs[i]) / h;
        h * (prim(sb) - prim(sa))
    }
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if m * d0 <= 0.0 {
        0.0
    } else if d0 * d1 <= 0.0 && m.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        m
    }
}
