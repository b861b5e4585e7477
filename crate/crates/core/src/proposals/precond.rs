/// Absolute sample correlations between covariates with small entries
/// zeroed, used to weight change-of-variable moves.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationPreconditioner {
    pub matrix: Vec<Vec<f64>>,
    pub cutoff: f64,
}

impl CorrelationPreconditioner {
    /// No cross-variable moves: the identity.
    pub fn identity(d: usize) -> Self {
        let matrix = (0..d).map(|i| (0..d).map(|j| f64::from(u8::from(i == j))).collect()).collect();
        Self { matrix, cutoff: 1.0 }
    }

    pub fn d(&self) -> usize {
        self.matrix.len()
    }

    pub fn weight(&self, from: usize, to: usize) -> f64 {
        self.matrix[from][to]
    }
}

/// `|cor(X_k, X_j)|` over all rows given as columns, entries `<= cutoff` set
/// to zero and the diagonal to one. A constant column gets zero off-diagonals.
pub fn build_preconditioner(columns: &[Vec<f64>], cutoff: f64) -> CorrelationPreconditioner {
    let d = columns.len();
    let centered: Vec<(Vec<f64>, f64)> = columns
        .iter()
        .map(|c| {
            let n = c.len() as f64;
            let mean = c.iter().sum::<f64>() / n;
            let dev: Vec<f64> = c.iter().map(|v| v - mean).collect();
            let norm = dev.iter().map(|v| v * v).sum::<f64>().sqrt();
            (dev, norm)
        })
        .collect();
    let mut matrix = vec![vec![0.0; d]; d];
    for i in 0..d {
        matrix[i][i] = 1.0;
        for j in i + 1..d {
            let (a, na) = &centered[i];
            let (b, nb) = &centered[j];
            let r = if *na > 0.0 && *nb > 0.0 {
                (a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb)).abs().min(1.0)
            } else {
                0.0
            };
            let w = if r > cutoff { r } else { 0.0 };
            matrix[i][j] = w;
            matrix[j][i] = w;
        }
    }
    CorrelationPreconditioner { matrix, cutoff }
}
