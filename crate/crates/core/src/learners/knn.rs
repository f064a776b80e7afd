use super::Scaler;
use crate::data::DatasetView;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct KnnModel {
    dim: usize,
    features: Vec<f64>,
    targets: Vec<f64>,
    k: usize,
}

impl KnnModel {
    /// Snapshot the (scaled) training rows in training order.
    pub(crate) fn new(train: &DatasetView<'_>, k: usize, scaler: Option<&Scaler>) -> Self {
        let dim = train.dim();
        let mut features = Vec::with_capacity(train.len() * dim);
        let mut targets = Vec::with_capacity(train.len());
        for (x, y) in train.rows() {
            match scaler {
                Some(s) => features.extend(s.apply(x)),
                None => features.extend_from_slice(x),
            }
            targets.push(y);
        }
        Self {
            dim,
            features,
            targets,
            k: k.min(train.len()),
        }
    }

    pub(crate) fn predict(&self, x: &[f64]) -> f64 {
        // Sorted by (distance, row). Rows arrive in increasing order, so a
        // candidate only displaces entries that are strictly farther.
        if self.dim == 0 {
            // every row is at distance zero; ties go to the first k
            return self.targets[..self.k].iter().sum::<f64>() / self.k as f64;
        }
        let x = &x[..self.dim];
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(self.k + 1);
        let mut cutoff = f64::INFINITY;
        for (i, row) in self.features.chunks_exact(self.dim).enumerate() {
            let mut d2 = 0.0;
            for (a, b) in row.iter().zip(x) {
                let t = a - b;
                d2 += t * t;
            }
            if d2 >= cutoff {
                continue;
            }
            let pos = best.partition_point(|&(d, _)| d <= d2);
            best.insert(pos, (d2, i));
            if best.len() > self.k {
                best.pop();
            }
            if best.len() == self.k {
                cutoff = best[self.k - 1].0;
            }
        }
        best.iter().map(|&(_, i)| self.targets[i]).sum::<f64>() / self.k as f64
    }
}
