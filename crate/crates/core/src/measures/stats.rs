//! Numeric reducers over window columns.

use std::cmp::Ordering;

use crate::model::{Value, WindowInstance};

/// Compensated (Neumaier) running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut s = NeumaierSum::default();
    xs.into_iter().for_each(|x| s.add(x));
    s.total()
}

/// Numeric view of a value: Int and Float only.
pub fn numeric(v: &Value) -> Option<f64> {
    match v {
        Value::Int(i) => Some(*i as f64),
        Value::Float(x) => Some(*x),
        _ => None,
    }
}

/// Non-Null numeric values of `column`, in window order.
pub fn numeric_column(w: &WindowInstance, column: &str) -> Vec<f64> {
    w.values(column).filter_map(numeric).collect()
}

/// Mean and population standard deviation, two-pass with compensated sums.
pub fn mean_std(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = compensated_sum(xs.iter().copied()) / n;
    let var = compensated_sum(xs.iter().map(|x| (x - mean) * (x - mean))) / n;
    Some((mean, var.sqrt()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasicStats {
    pub count: i64,
    pub min: Value,
    pub max: Value,
    pub mean: Value,
    pub std: Value,
}

/// Count, min, max, mean and population std of the non-Null numeric values.
pub fn basic_stats(w: &WindowInstance, column: &str) -> BasicStats {
    let mut min: Option<&Value> = None;
    let mut max: Option<&Value> = None;
    let mut xs = Vec::with_capacity(w.len());
    for v in w.values(column) {
        let Some(x) = numeric(v) else { continue };
        xs.push(x);
        if min.is_none_or(|m| v.num_cmp(m) == Some(Ordering::Less)) {
            min = Some(v);
        }
        if max.is_none_or(|m| v.num_cmp(m) == Some(Ordering::Greater)) {
            max = Some(v);
        }
    }
    let ms = mean_std(&xs);
    BasicStats {
        count: xs.len() as i64,
        min: min.cloned().unwrap_or(Value::Null),
        max: max.cloned().unwrap_or(Value::Null),
        mean: ms.map_or(Value::Null, |(m, _)| Value::float(m)),
        std: ms.map_or(Value::Null, |(_, s)| Value::float(s)),
    }
}

/// Values with `|x - mean| > z * std`; a zero std yields no outliers.
pub fn z_outlier_count(w: &WindowInstance, column: &str, z: f64) -> i64 {
    let xs = numeric_column(w, column);
    let Some((mean, std)) = mean_std(&xs) else {
        return 0;
    };
    if std == 0.0 {
        return 0;
    }
    xs.iter().filter(|&&x| (x - mean).abs() > z * std).count() as i64
}

/// Linear-interpolation percentile (type 7) of sorted data.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = h - lo as f64;
    Some(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}

pub fn percentiles(w: &WindowInstance, column: &str, points: &[f64]) -> Vec<Value> {
    let mut xs = numeric_column(w, column);
    xs.sort_by(f64::total_cmp);
    points
        .iter()
        .map(|&q| percentile_sorted(&xs, q).map_or(Value::Null, Value::float))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LengthStats {
    pub min: Value,
    pub max: Value,
    pub mean: Value,
    pub std: Value,
}

/// Statistics of code-point lengths of Text values.
pub fn length_stats(w: &WindowInstance, column: &str) -> LengthStats {
    let lens: Vec<i64> = w
        .values(column)
        .filter_map(Value::as_str)
        .map(|s| s.chars().count() as i64)
        .collect();
    let xs: Vec<f64> = lens.iter().map(|&l| l as f64).collect();
    let ms = mean_std(&xs);
    LengthStats {
        min: lens.iter().min().map_or(Value::Null, |&l| Value::Int(l)),
        max: lens.iter().max().map_or(Value::Null, |&l| Value::Int(l)),
        mean: ms.map_or(Value::Null, |(m, _)| Value::float(m)),
        std: ms.map_or(Value::Null, |(_, s)| Value::float(s)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationMethod {
    Pearson,
    Spearman,
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return None;
    }
    let constant = |v: &[f64]| v.iter().all(|&a| a == v[0]);
    if constant(xs) || constant(ys) {
        return None;
    }
    let mx = compensated_sum(xs.iter().copied()) / n as f64;
    let my = compensated_sum(ys.iter().copied()) / n as f64;
    let (mut sxy, mut sxx, mut syy) = (NeumaierSum::default(), NeumaierSum::default(), NeumaierSum::default());
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy.add(dx * dy);
        sxx.add(dx * dx);
        syy.add(dy * dy);
    }
    let (sxx, syy) = (sxx.total(), syy.total());
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    let r = sxy.total() / (sxx.sqrt() * syy.sqrt());
    r.is_finite().then(|| r.clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share their mean rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Pairwise-complete correlation of two columns.
pub fn correlation(w: &WindowInstance, col_a: &str, col_b: &str, method: CorrelationMethod) -> Value {
    let (xs, ys): (Vec<f64>, Vec<f64>) = w
        .elements
        .iter()
        .filter_map(|e| Some((numeric(e.value(col_a))?, numeric(e.value(col_b))?)))
        .unzip();
    let r = match method {
        CorrelationMethod::Pearson => pearson(&xs, &ys),
        CorrelationMethod::Spearman => pearson(&average_ranks(&xs), &average_ranks(&ys)),
    };
    r.map_or(Value::Null, Value::float)
}
