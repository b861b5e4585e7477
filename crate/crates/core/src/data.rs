//! Benchmark generators, scaling to the unit cube, and CSV input/output.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tree::CutpointGrid;

/// Raw-unit regression data.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    /// Rows of covariates.
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    /// Noiseless response, when known.
    pub truth: Option<Vec<f64>>,
    pub names: Vec<String>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn d(&self) -> usize {
        self.names.len()
    }

    fn default_names(d: usize) -> Vec<String> {
        (1..=d).map(|j| format!("x{j}")).collect()
    }
}

/// The five-variable Friedman test function; extra coordinates are ignored.
pub fn friedman(x: &[f64]) -> f64 {
    10.0 * (PI * x[0] * x[1]).sin() + 20.0 * (x[2] - 0.5).powi(2) + 10.0 * x[3] + 5.0 * x[4]
}

/// `n` uniform design points in `[0,1]^d_total` with Friedman responses plus
/// Normal noise of variance `sigma2`.
///
/// Covariates come from `seed` alone and noise from a stream derived from
/// it, so [`gen_friedman_with_noise_seed`] can redraw noise over a fixed design.
pub fn gen_friedman(n: usize, sigma2: f64, seed: u64, d_total: usize) -> Result<Dataset> {
    gen_friedman_with_noise_seed(n, sigma2, seed, d_total, seed.wrapping_add(0x9e37_79b9_7f4a_7c15))
}

pub fn gen_friedman_with_noise_seed(
    n: usize,
    sigma2: f64,
    seed: u64,
    d_total: usize,
    noise_seed: u64,
) -> Result<Dataset> {
    if d_total < 5 {
        return Err(Error::Dimension(format!("Friedman needs d_total >= 5, got {d_total}")));
    }
    if !(sigma2 >= 0.0) {
        return Err(Error::Hyper(format!("noise variance must be >= 0, got {sigma2}")));
    }
    let mut xr = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d_total).map(|_| xr.random::<f64>()).collect()).collect();
    let truth: Vec<f64> = x.iter().map(|r| friedman(r)).collect();
    let y = add_noise(&truth, sigma2, noise_seed);
    Ok(Dataset { x, y, truth: Some(truth), names: Dataset::default_names(d_total) })
}

fn add_noise(truth: &[f64], sigma2: f64, seed: u64) -> Vec<f64> {
    if sigma2 == 0.0 {
        return truth.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma2.sqrt()).expect("positive sd");
    truth.iter().map(|f| f + noise.sample(&mut rng)).collect()
}

/// Step function of the three-covariate confounding example.
pub fn wu_truth(x: &[f64]) -> f64 {
    match (x[0] <= 0.5, x[1] <= 0.5) {
        (true, true) => 1.0,
        (true, false) => 3.0,
        (false, _) => 5.0,
    }
}

/// Three-covariate example with `x1` and `x3` confounded: 300 rows in three
/// blocks of 100, noise variance `noise_var` (0.25 by default).
pub fn gen_wu_synthetic(seed: u64) -> Dataset {
    gen_wu_synthetic_with(seed, 0.25)
}

pub fn gen_wu_synthetic_with(seed: u64, noise_var: f64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::with_capacity(300);
    for i in 0..300 {
        let (x1, x2, x3) = match i {
            0..100 => ((0.1, 0.4), (0.1, 0.4), (0.6, 0.9)),
            100..200 => ((0.1, 0.4), (0.6, 0.9), (0.6, 0.9)),
            _ => ((0.6, 0.9), (0.1, 0.9), (0.1, 0.4)),
        };
        let row: Vec<f64> = [x1, x2, x3].iter().map(|&(a, b)| rng.random_range(a..b)).collect();
        x.push(row);
    }
    let truth: Vec<f64> = x.iter().map(|r| wu_truth(r)).collect();
    let y = if noise_var > 0.0 {
        let noise = Normal::new(0.0, noise_var.sqrt()).expect("positive sd");
        truth.iter().map(|f| f + noise.sample(&mut rng)).collect()
    } else {
        truth.clone()
    };
    Dataset { x, y, truth: Some(truth), names: Dataset::default_names(3) }
}

/// Affine maps taking covariates to `[0,1]` and the response to `[-0.5, 0.5]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub x_min: Vec<f64>,
    pub x_max: Vec<f64>,
    pub y_min: f64,
    pub y_max: f64,
}

impl Scaling {
    pub fn fit(ds: &Dataset) -> Self {
        let d = ds.d();
        let mut x_min = vec![f64::INFINITY; d];
        let mut x_max = vec![f64::NEG_INFINITY; d];
        for row in &ds.x {
            for (j, &v) in row.iter().enumerate() {
                x_min[j] = x_min[j].min(v);
                x_max[j] = x_max[j].max(v);
            }
        }
        let y_min = ds.y.iter().copied().fold(f64::INFINITY, f64::min);
        let y_max = ds.y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self { x_min, x_max, y_min, y_max }
    }

    /// Columns with no spread; these scale to 0.5.
    pub fn constant_columns(&self) -> Vec<usize> {
        (0..self.x_min.len()).filter(|&j| !(self.x_max[j] > self.x_min[j])).collect()
    }

    /// Covariate row on the unit cube; values outside the training range are clamped.
    pub fn scale_x(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, &v)| {
                let w = self.x_max[j] - self.x_min[j];
                if w > 0.0 {
                    ((v - self.x_min[j]) / w).clamp(0.0, 1.0)
                } else {
                    0.5
                }
            })
            .collect()
    }

    fn y_range(&self) -> f64 {
        let w = self.y_max - self.y_min;
        if w > 0.0 {
            w
        } else {
            1.0
        }
    }

    pub fn scale_y(&self, y: f64) -> f64 {
        (y - self.y_min) / self.y_range() - 0.5
    }

    pub fn unscale_y(&self, y: f64) -> f64 {
        (y + 0.5) * self.y_range() + self.y_min
    }

    /// Variance in raw response units from scaled units.
    pub fn unscale_var(&self, v: f64) -> f64 {
        v * self.y_range().powi(2)
    }

    pub fn scale_var(&self, v: f64) -> f64 {
        v / self.y_range().powi(2)
    }
}

/// Training data as the sampler sees it: covariates on the unit cube,
/// pre-binned against the cutpoint grid, and the scaled response.
#[derive(Clone, Debug)]
pub struct ScaledData<F> {
    pub grid: CutpointGrid,
    pub scaling: Scaling,
    n: usize,
    d: usize,
    x: Vec<F>,
    bins: Vec<u16>,
    pub y: Vec<F>,
}

impl<F: Real> ScaledData<F> {
    /// Build from rows already on the unit cube and a scaled response.
    pub fn from_unit(x: &[Vec<f64>], y: &[f64], grid: CutpointGrid, scaling: Scaling) -> Result<Self> {
        let n = y.len();
        if x.len() != n {
            return Err(Error::Dimension(format!("{} covariate rows for {n} responses", x.len())));
        }
        let d = grid.n_vars();
        let mut flat = Vec::with_capacity(n * d);
        let mut bins = Vec::with_capacity(n * d);
        for (i, row) in x.iter().enumerate() {
            if row.len() != d {
                return Err(Error::Dimension(format!("row {i} has {} covariates, grid has {d}", row.len())));
            }
            for (j, &v) in row.iter().enumerate() {
                let v = F::of(v);
                flat.push(v);
                bins.push(grid.bin(j, v));
            }
        }
        Ok(Self { grid, scaling, n, d, x: flat, bins, y: y.iter().map(|&v| F::of(v)).collect() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    pub fn bins(&self, i: usize) -> &[u16] {
        &self.bins[i * self.d..(i + 1) * self.d]
    }

    /// Column `j` as `f64`.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.x[i * self.d + j].as_f64()).collect()
    }

    /// Bin raw-unit covariate rows for prediction.
    pub fn bin_points(&self, raw: &[Vec<f64>]) -> Vec<Vec<u16>> {
        raw.iter()
            .map(|row| {
                self.scaling
                    .scale_x(row)
                    .iter()
                    .enumerate()
                    .map(|(j, &v)| self.grid.bin(j, F::of(v)))
                    .collect()
            })
            .collect()
    }
}

/// Scale covariates to `[0,1]` (constant columns to 0.5) and the response to
/// `[-0.5, 0.5]`, on a uniform grid of `n_v` cutpoints per variable.
pub fn scale_dataset<F: Real>(ds: &Dataset, n_v: usize) -> Result<ScaledData<F>> {
    if ds.n() == 0 {
        return Err(Error::Dimension("dataset has no rows".into()));
    }
    let scaling = Scaling::fit(ds);
    let x: Vec<Vec<f64>> = ds.x.iter().map(|r| scaling.scale_x(r)).collect();
    let y: Vec<f64> = ds.y.iter().map(|&v| scaling.scale_y(v)).collect();
    let grid = CutpointGrid::uniform(ds.d(), n_v)?;
    ScaledData::from_unit(&x, &y, grid, scaling)
}

/// Write a headered CSV: covariates, then `y`, then `truth` when present.
pub fn write_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let file_err = |e: csv::Error| Error::File { path: path.display().to_string(), msg: e.to_string() };
    let mut w = csv::Writer::from_path(path).map_err(file_err)?;
    let mut header: Vec<String> = ds.names.clone();
    header.push("y".into());
    if ds.truth.is_some() {
        header.push("truth".into());
    }
    w.write_record(&header).map_err(file_err)?;
    for i in 0..ds.n() {
        let mut rec: Vec<String> = ds.x[i].iter().map(|v| format_float(*v)).collect();
        rec.push(format_float(ds.y[i]));
        if let Some(t) = &ds.truth {
            rec.push(format_float(t[i]));
        }
        w.write_record(&rec).map_err(file_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Shortest representation that parses back to the same value.
fn format_float(v: f64) -> String {
    format!("{v:?}")
}

/// Read a headered CSV. The last column is the response, unless it is
/// named `truth`, in which case the response is the column before it.
pub fn load_csv(path: &Path) -> Result<Dataset> {
    let shown = path.display().to_string();
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::File { path: shown.clone(), msg: e.to_string() })?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| Error::File { path: shown.clone(), msg: e.to_string() })?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::Csv { path: shown, row: 1, col: 1, msg: "missing header".into() });
    }
    let has_truth = header.last().is_some_and(|h| h.eq_ignore_ascii_case("truth"));
    let n_resp = 1 + usize::from(has_truth);
    if header.len() < n_resp + 1 {
        return Err(Error::Csv { path: shown, row: 1, col: header.len(), msg: "need at least one covariate and a response".into() });
    }
    let d = header.len() - n_resp;
    let mut ds = Dataset {
        x: Vec::new(),
        y: Vec::new(),
        truth: has_truth.then(Vec::new),
        names: header[..d].to_vec(),
    };
    for (k, rec) in r.records().enumerate() {
        let row = k + 2;
        let rec = rec.map_err(|e| Error::Csv { path: shown.clone(), row, col: 0, msg: e.to_string() })?;
        if rec.len() != header.len() {
            return Err(Error::Csv {
                path: shown,
                row,
                col: rec.len().min(header.len()) + 1,
                msg: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        let mut vals = Vec::with_capacity(rec.len());
        for (c, cell) in rec.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| Error::Csv {
                path: shown.clone(),
                row,
                col: c + 1,
                msg: format!("not a number: {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Csv { path: shown.clone(), row, col: c + 1, msg: format!("non-finite value {cell:?}") });
            }
            vals.push(v);
        }
        ds.x.push(vals[..d].to_vec());
        ds.y.push(vals[d]);
        if let Some(t) = ds.truth.as_mut() {
            t.push(vals[d + 1]);
        }
    }
    if ds.y.is_empty() {
        return Err(Error::Csv { path: shown, row: 2, col: 1, msg: "no data rows".into() });
    }
    Ok(ds)
}

/// Read covariate-only rows (no response), e.g. prediction points. A `y` or
/// `truth` column, if present, is returned separately as the reference value.
pub fn load_points(path: &Path, d: usize) -> Result<(Vec<Vec<f64>>, Option<Vec<f64>>)> {
    let shown = path.display().to_string();
    let mut r = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path).map_err(|e| Error::File { path: shown.clone(), msg: e.to_string() })?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| Error::File { path: shown.clone(), msg: e.to_string() })?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    if header.len() < d {
        return Err(Error::Csv { path: shown, row: 1, col: header.len(), msg: format!("need {d} covariate columns") });
    }
    let reference = header.iter().position(|h| h.eq_ignore_ascii_case("truth"));
    let mut xs = Vec::new();
    let mut refs = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let row = k + 2;
        let rec = rec.map_err(|e| Error::Csv { path: shown.clone(), row, col: 0, msg: e.to_string() })?;
        if rec.len() != header.len() {
            return Err(Error::Csv { path: shown, row, col: rec.len() + 1, msg: format!("expected {} fields", header.len()) });
        }
        let parse = |c: usize| -> Result<f64> {
            rec[c].trim().parse().map_err(|_| Error::Csv {
                path: shown.clone(),
                row,
                col: c + 1,
                msg: format!("not a number: {:?}", &rec[c]),
            })
        };
        xs.push((0..d).map(parse).collect::<Result<Vec<f64>>>()?);
        if let Some(c) = reference {
            refs.push(parse(c)?);
        }
    }
    Ok((xs, reference.map(|_| refs)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn friedman_at_center() {
        let f = friedman(&[0.5; 5]);
        assert!((f - 14.571_067_811_865_476).abs() < 1e-12);
    }

    #[test]
    fn noiseless_friedman_equals_truth() {
        let ds = gen_friedman(50, 0.0, 4, 10).unwrap();
        assert_eq!(ds.truth.as_ref().unwrap(), &ds.y);
        assert_eq!(ds.d(), 10);
        assert!(gen_friedman(5, 0.1, 1, 4).is_err());
    }

    #[test]
    fn friedman_noise_variance() {
        let ds = gen_friedman(5000, 0.1, 9, 5).unwrap();
        let t = ds.truth.as_ref().unwrap();
        let r: Vec<f64> = ds.y.iter().zip(t).map(|(y, f)| y - f).collect();
        let mean = r.iter().sum::<f64>() / r.len() as f64;
        let var = r.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (r.len() - 1) as f64;
        // sd of the sample variance is sigma2 * sqrt(2/(n-1))
        let sd = 0.1 * (2.0 / 4999.0f64).sqrt();
        assert!((var - 0.1).abs() < 3.0 * sd, "var {var}");
    }

    #[test]
    fn friedman_design_fixed_across_noise_seeds() {
        let a = gen_friedman_with_noise_seed(20, 0.1, 3, 5, 1).unwrap();
        let b = gen_friedman_with_noise_seed(20, 0.1, 3, 5, 2).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.truth, b.truth);
        assert_ne!(a.y, b.y);
    }

    #[test]
    fn wu_design_bands() {
        let ds = gen_wu_synthetic(1);
        assert_eq!(ds.n(), 300);
        for (i, row) in ds.x.iter().enumerate() {
            if i < 200 {
                assert!((0.1..=0.4).contains(&row[0]) && (0.6..=0.9).contains(&row[2]));
            } else {
                assert!((0.6..=0.9).contains(&row[0]) && (0.1..=0.4).contains(&row[2]));
            }
            if row[0] > 0.5 {
                assert_eq!(ds.truth.as_ref().unwrap()[i], 5.0);
            }
        }
        let (a, b) = (ds.x.iter().map(|r| r[0]).collect::<Vec<_>>(), ds.x.iter().map(|r| r[2]).collect::<Vec<_>>());
        // block structure gives population correlation -b/(b + w) with
        // between-block variance b = 0.25 * 2/9 and within-block w = 0.09/12
        let b_var = 0.25 * 2.0 / 9.0;
        let rho = -b_var / (b_var + 0.09 / 12.0);
        assert!((correlation(&a, &b) - rho).abs() < 0.04, "{}", correlation(&a, &b));
        assert_eq!(gen_wu_synthetic(1), gen_wu_synthetic(1));
    }

    fn correlation(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn scaling_round_trips() {
        let ds = gen_friedman(100, 1.0, 2, 5).unwrap();
        let sd: ScaledData<f64> = scale_dataset(&ds, 100).unwrap();
        for j in 0..5 {
            let col = sd.column(j);
            assert_eq!(col.iter().copied().fold(f64::INFINITY, f64::min), 0.0);
            assert_eq!(col.iter().copied().fold(f64::NEG_INFINITY, f64::max), 1.0);
        }
        for (i, &y) in ds.y.iter().enumerate() {
            assert!((sd.scaling.unscale_y(sd.y[i]) - y).abs() < 1e-12);
            assert!((-0.5..=0.5).contains(&sd.y[i]));
        }
    }

    #[test]
    fn unit_data_is_unchanged_and_constant_columns_center() {
        let ds = Dataset {
            x: vec![vec![0.0, 2.0], vec![0.25, 2.0], vec![1.0, 2.0]],
            y: vec![1.0, 2.0, 3.0],
            truth: None,
            names: vec!["a".into(), "b".into()],
        };
        let sd: ScaledData<f64> = scale_dataset(&ds, 5).unwrap();
        assert_eq!(sd.column(0), vec![0.0, 0.25, 1.0]);
        assert_eq!(sd.column(1), vec![0.5; 3]);
        assert_eq!(sd.scaling.constant_columns(), vec![1]);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("wu.csv");
        let ds = gen_wu_synthetic(5);
        write_csv(&ds, &p).unwrap();
        assert_eq!(load_csv(&p).unwrap(), ds);
    }

    #[test]
    fn csv_single_row_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        std::fs::write(&p, "x1,y\n0.5,1.0\n").unwrap();
        assert_eq!(load_csv(&p).unwrap().n(), 1);

        std::fs::write(&p, "x1,y\n").unwrap();
        assert!(matches!(load_csv(&p), Err(Error::Csv { .. })));

        std::fs::write(&p, "x1,x2,y\n0.1,0.2,1\n0.1,abc,2\n").unwrap();
        match load_csv(&p) {
            Err(Error::Csv { row, col, .. }) => assert_eq!((row, col), (3, 2)),
            other => panic!("{other:?}"),
        }

        std::fs::write(&p, "x1,x2,y\n0.1,0.2\n").unwrap();
        assert!(load_csv(&p).is_err());

        assert!(matches!(load_csv(&dir.path().join("missing.csv")), Err(Error::File { .. })));
    }
}
