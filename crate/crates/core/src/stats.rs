//! Descriptive statistics and simple regressions.

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut s = CompensatedSum::default();
    xs.iter().for_each(|&x| s.add(x));
    s.value() / xs.len() as f64
}

/// Sample standard deviation with the `n - 1` divisor; zero for fewer than
/// two observations.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m).powi(2)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regression {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    /// `slope / slope_se`; zero when the slope and its error both vanish.
    pub t_stat: f64,
    pub n: usize,
}

/// Ordinary least squares of `y` on `x` with an intercept.
pub fn ols(x: &[f64], y: &[f64]) -> Option<Regression> {
    let n = x.len();
    if n < 3 || y.len() != n {
        return None;
    }
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let slope_se = (rss / (n - 2) as f64 / sxx).sqrt();
    Some(Regression { slope, intercept, slope_se, t_stat: t_ratio(slope, slope_se), n })
}

/// Pooled within-group slope: each group gets its own intercept.
pub fn fixed_effects_slope(groups: &[(Vec<f64>, Vec<f64>)]) -> Option<Regression> {
    let (mut sxx, mut sxy, mut n, mut g) = (0.0, 0.0, 0usize, 0usize);
    for (x, y) in groups.iter().filter(|(x, _)| x.len() >= 2) {
        let (mx, my) = (mean(x), mean(y));
        sxx += x.iter().map(|v| (v - mx).powi(2)).sum::<f64>();
        sxy += x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>();
        n += x.len();
        g += 1;
    }
    if sxx <= 0.0 || n <= g + 1 {
        return None;
    }
    let slope = sxy / sxx;
    let mut rss = 0.0;
    for (x, y) in groups.iter().filter(|(x, _)| x.len() >= 2) {
        let (mx, my) = (mean(x), mean(y));
        rss += x.iter().zip(y).map(|(a, b)| ((b - my) - slope * (a - mx)).powi(2)).sum::<f64>();
    }
    let slope_se = (rss / (n - g - 1) as f64 / sxx).sqrt();
    Some(Regression { slope, intercept: f64::NAN, slope_se, t_stat: t_ratio(slope, slope_se), n })
}

fn t_ratio(slope: f64, se: f64) -> f64 {
    if se > 0.0 {
        slope / se
    } else if slope.abs() <= 1e-300 {
        0.0
    } else {
        slope.signum() * f64::INFINITY
    }
}

/// Average ranks (1-based), ties sharing their mean rank.
pub fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

/// Spearman rank correlation.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&ranks(x), &ranks(y))
}
