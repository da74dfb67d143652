//! Normalized mutual information between two labelings.

use crate::{Error, Result};

/// Counts of co-occurring labels; rows index the first labeling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    counts: Vec<Vec<usize>>,
    row_sums: Vec<usize>,
    col_sums: Vec<usize>,
    n: usize,
}

impl ContingencyTable {
    /// Labels are arbitrary non-negative ids; they are canonicalized first.
    pub fn new(a: &[usize], b: &[usize]) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::LengthMismatch {
                expected: a.len(),
                found: b.len(),
            });
        }
        let a = crate::LabelVector::canonicalize(a.iter().copied());
        let b = crate::LabelVector::canonicalize(b.iter().copied());
        let mut counts = vec![vec![0usize; b.num_classes()]; a.num_classes()];
        for (&i, &j) in a.labels().iter().zip(b.labels()) {
            counts[i][j] += 1;
        }
        let row_sums = counts.iter().map(|r| r.iter().sum()).collect();
        let col_sums = (0..b.num_classes())
            .map(|j| counts.iter().map(|r| r[j]).sum())
            .collect();
        Ok(Self {
            counts,
            row_sums,
            col_sums,
            n: a.len(),
        })
    }

    pub fn counts(&self) -> &[Vec<usize>] {
        &self.counts
    }

    pub fn row_sums(&self) -> &[usize] {
        &self.row_sums
    }

    pub fn col_sums(&self) -> &[usize] {
        &self.col_sums
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mutual_information(&self) -> f64 {
        let n = self.n as f64;
        let mut mi = 0.0;
        for (i, row) in self.counts.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                if c == 0 {
                    continue;
                }
                let c = c as f64;
                mi += c / n * (n * c / (self.row_sums[i] as f64 * self.col_sums[j] as f64)).ln();
            }
        }
        mi.max(0.0)
    }

    pub fn row_entropy(&self) -> f64 {
        entropy(&self.row_sums, self.n)
    }

    pub fn col_entropy(&self) -> f64 {
        entropy(&self.col_sums, self.n)
    }
}

fn entropy(counts: &[usize], n: usize) -> f64 {
    let n = n as f64;
    -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.ln()
        })
        .sum::<f64>()
}

/// `I(a; b) / sqrt(H(a) H(b))` with natural logarithms.
///
/// When either entropy is zero the score is 1 if both labelings are a
/// single cluster and 0 otherwise.
pub fn nmi(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let t = ContingencyTable::new(pred, truth)?;
    if t.n() == 0 {
        return Err(Error::EmptyData(0));
    }
    let (ha, hb) = (t.row_entropy(), t.col_entropy());
    if ha == 0.0 || hb == 0.0 {
        return Ok(if ha == hb { 1.0 } else { 0.0 });
    }
    Ok((t.mutual_information() / (ha * hb).sqrt()).min(1.0))
}
