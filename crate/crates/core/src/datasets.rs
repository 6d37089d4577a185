//! Synthetic 2-D datasets with major/minor group labels and mixture modes.

use std::io::{Read, Write};

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Points within this distance of the origin form the major group of the
/// single-mode Gaussian.
pub const MAJOR_RADIUS: f64 = 2.0;
/// Points at least this far from the origin form the minor group.
pub const MINOR_RADIUS: f64 = 7.0;

/// Grid offsets of the 25-Gaussian mixture before scaling.
pub const GRID_OFFSETS: [f64; 5] = [-4.0, -2.0, 0.0, 2.0, 4.0];
/// Divisor applied to offsets and noise.
pub const GRID_SCALE: f64 = 2.828;
/// Divisor of the center coordinates `{-2, -1, 0, 1, 2} / 1.414`.
pub const CENTER_SCALE: f64 = 1.414;
/// Standard deviation of the per-axis noise before scaling.
pub const GRID_NOISE_STD: f64 = 0.05;

/// σ for minority levels 1, 2 and 3 of the single-mode Gaussian.
pub const MINORITY_LEVEL_SIGMA: [f64; 3] = [3.0, 2.5, 2.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Major,
    Minor,
    Neither,
}

impl Group {
    pub fn as_str(self) -> &'static str {
        match self {
            Group::Major => "major",
            Group::Minor => "minor",
            Group::Neither => "neither",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "major" => Group::Major,
            "minor" => Group::Minor,
            "neither" => Group::Neither,
            _ => return None,
        })
    }

    /// Group of a single-mode Gaussian point, a function of its norm only.
    pub fn by_radius(point: ArrayView1<f64>) -> Self {
        let norm = point.dot(&point).sqrt();
        if norm <= MAJOR_RADIUS {
            Group::Major
        } else if norm >= MINOR_RADIUS {
            Group::Minor
        } else {
            Group::Neither
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub points: Array2<f64>,
    pub groups: Vec<Group>,
    pub modes: Option<Vec<usize>>,
    pub seed: u64,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn indices_of(&self, group: Group) -> Vec<usize> {
        self.groups.iter().enumerate().filter(|(_, g)| **g == group).map(|(i, _)| i).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Array2<f64> {
        self.points.select(ndarray::Axis(0), indices)
    }

    /// CSV with header `x,y,group,mode_index`; `mode_index` is empty when absent.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        if self.dim() != 2 {
            return Err(Error::Shape(format!("CSV export needs 2-D points, got {}", self.dim())));
        }
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["x", "y", "group", "mode_index"])?;
        for (i, row) in self.points.rows().into_iter().enumerate() {
            let mode = self.modes.as_ref().map(|m| m[i].to_string()).unwrap_or_default();
            w.write_record([
                crate::io::fmt_f64(row[0]),
                crate::io::fmt_f64(row[1]),
                self.groups[i].as_str().to_owned(),
                mode,
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Inverse of [`LabeledDataset::write_csv`]. The seed is not stored in the
    /// file and must be supplied.
    pub fn read_csv<R: Read>(reader: R, seed: u64) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header = r.headers()?.clone();
        if header.iter().collect::<Vec<_>>() != ["x", "y", "group", "mode_index"] {
            return Err(Error::Format(format!("unexpected dataset header {header:?}")));
        }
        let mut coords = Vec::new();
        let mut groups = Vec::new();
        let mut modes = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != 4 {
                return Err(Error::Format(format!("dataset row has {} fields", rec.len())));
            }
            coords.push(crate::io::parse_finite(&rec[0])?);
            coords.push(crate::io::parse_finite(&rec[1])?);
            groups.push(Group::parse(&rec[2]).ok_or_else(|| Error::Format(format!("unknown group {:?}", &rec[2])))?);
            modes.push(if rec[3].is_empty() {
                None
            } else {
                Some(rec[3].parse::<usize>().map_err(|e| Error::Format(format!("mode index: {e}")))?)
            });
        }
        let modes = if modes.iter().all(Option::is_some) && !modes.is_empty() {
            Some(modes.into_iter().map(Option::unwrap).collect())
        } else if modes.iter().all(Option::is_none) {
            None
        } else {
            return Err(Error::Format("mode_index present on some rows only".into()));
        };
        let n = groups.len();
        let points = Array2::from_shape_vec((n, 2), coords).map_err(|e| Error::Format(e.to_string()))?;
        Ok(LabeledDataset { points, groups, modes, seed })
    }
}

/// Isotropic Gaussian mixture used for mode assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixtureSpec {
    pub centers: Vec<[f64; 2]>,
    pub component_std: f64,
}

impl GaussianMixtureSpec {
    /// The 5×5 grid; center `5·i_x + i_y` sits at `(c_{i_x}, c_{i_y}) / 1.414`.
    pub fn twenty_five() -> Self {
        let coords = [-2.0, -1.0, 0.0, 1.0, 2.0].map(|c: f64| c / CENTER_SCALE);
        let centers = coords.iter().flat_map(|&x| coords.iter().map(move |&y| [x, y])).collect();
        GaussianMixtureSpec { centers, component_std: GRID_NOISE_STD / GRID_SCALE }
    }

    /// Radius under which a generated point counts as a high-quality sample
    /// of its nearest mode: four component standard deviations.
    pub fn high_quality_radius(&self) -> f64 {
        4.0 * self.component_std
    }

    pub fn scaled(&self, factor: f64) -> Self {
        GaussianMixtureSpec {
            centers: self.centers.iter().map(|c| [c[0] * factor, c[1] * factor]).collect(),
            component_std: self.component_std * factor,
        }
    }
}

/// Index of the nearest center; ties go to the lowest index.
pub fn assign_mode(point: ArrayView1<f64>, spec: &GaussianMixtureSpec) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in spec.centers.iter().enumerate() {
        let dx = point[0] - c[0];
        let dy = point[1] - c[1];
        let d = dx * dx + dy * dy;
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best
}

/// Squared distance to the nearest center together with its index.
pub fn nearest_mode(point: ArrayView1<f64>, spec: &GaussianMixtureSpec) -> (usize, f64) {
    let j = assign_mode(point, spec);
    let c = spec.centers[j];
    let (dx, dy) = (point[0] - c[0], point[1] - c[1]);
    (j, (dx * dx + dy * dy).sqrt())
}

/// `n` points from `N(0, σ² I)` labelled by distance from the origin.
pub fn gen_single_gaussian(sigma: f64, n: usize, seed: u64) -> Result<LabeledDataset> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::Parameter(format!("sigma must be positive, got {sigma}")));
    }
    if n == 0 {
        return Err(Error::Parameter("dataset size must be positive".into()));
    }
    let mut rng = rng::stream(seed, rng::streams::DATASET);
    let mut buf = vec![0.0; 2 * n];
    rng::fill_normal(&mut rng, &mut buf);
    buf.iter_mut().for_each(|v| *v *= sigma);
    let points = Array2::from_shape_vec((n, 2), buf).expect("2n values");
    let groups = points.rows().into_iter().map(Group::by_radius).collect();
    Ok(LabeledDataset { points, groups, modes: None, seed })
}

/// `n / 25` points per mode, `((d_x, d_y) + (z_x, z_y)) / 2.828` with
/// `z ~ N(0, 0.05²)`. Points are emitted mode by mode in index order.
pub fn gen_25_gaussians(n: usize, seed: u64) -> Result<LabeledDataset> {
    if n == 0 || !n.is_multiple_of(25) {
        return Err(Error::Parameter(format!("dataset size must be a positive multiple of 25, got {n}")));
    }
    let per_mode = n / 25;
    let mut rng = rng::stream(seed, rng::streams::DATASET);
    let mut coords = Vec::with_capacity(2 * n);
    let mut modes = Vec::with_capacity(n);
    for (ix, dx) in GRID_OFFSETS.iter().enumerate() {
        for (iy, dy) in GRID_OFFSETS.iter().enumerate() {
            for _ in 0..per_mode {
                let (zx, zy) = rng::normal_pair(&mut rng);
                coords.push((dx + GRID_NOISE_STD * zx) / GRID_SCALE);
                coords.push((dy + GRID_NOISE_STD * zy) / GRID_SCALE);
                modes.push(5 * ix + iy);
            }
        }
    }
    let points = Array2::from_shape_vec((n, 2), coords).expect("2n values");
    Ok(LabeledDataset { points, groups: vec![Group::Neither; n], modes: Some(modes), seed })
}

/// Points as a plain `x,y` CSV (generated samples).
pub fn write_points_csv<W: Write>(points: ArrayView2<f64>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let header: Vec<String> = match points.ncols() {
        1 => vec!["x".into()],
        2 => vec!["x".into(), "y".into()],
        d => (0..d).map(|j| format!("x{j}")).collect(),
    };
    w.write_record(&header)?;
    for row in points.rows() {
        w.write_record(row.iter().map(|&v| crate::io::fmt_f64(v)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_points_csv<R: Read>(reader: R) -> Result<Array2<f64>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let dim = r.headers()?.len();
    if dim == 0 {
        return Err(Error::Format("points CSV has an empty header".into()));
    }
    let mut values = Vec::new();
    let mut rows = 0;
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != dim {
            return Err(Error::Format(format!("row {rows} has {} fields, expected {dim}", rec.len())));
        }
        for field in rec.iter() {
            values.push(crate::io::parse_finite(field)?);
        }
        rows += 1;
    }
    Array2::from_shape_vec((rows, dim), values).map_err(|e| Error::Format(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr1;

    #[test]
    fn group_rule() {
        assert_eq!(Group::by_radius(arr1(&[0.0, 0.0]).view()), Group::Major);
        assert_eq!(Group::by_radius(arr1(&[2.0, 0.0]).view()), Group::Major);
        assert_eq!(Group::by_radius(arr1(&[5.0, 5.0]).view()), Group::Minor);
        assert_eq!(Group::by_radius(arr1(&[7.0, 0.0]).view()), Group::Minor);
        assert_eq!(Group::by_radius(arr1(&[3.0, 3.0]).view()), Group::Neither);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(gen_single_gaussian(0.0, 10, 1).is_err());
        assert!(gen_single_gaussian(-1.0, 10, 1).is_err());
        assert!(gen_25_gaussians(26, 1).is_err());
        assert!(gen_25_gaussians(0, 1).is_err());
    }

    #[test]
    fn grid_corner_matches_center() {
        // 4 / 2.828 and 2 / 1.414 are the same double
        assert_eq!(4.0 / GRID_SCALE, 2.0 / CENTER_SCALE);
        assert!((4.0 / GRID_SCALE - 1.41443).abs() < 1e-5);
        let spec = GaussianMixtureSpec::twenty_five();
        assert_eq!(spec.centers[24], [4.0 / GRID_SCALE, 4.0 / GRID_SCALE]);
        assert_eq!(spec.centers[12], [0.0, 0.0]);
        assert_eq!(spec.centers[8], [-1.0 / CENTER_SCALE, 1.0 / CENTER_SCALE]); // row 1, column 3
    }

    #[test]
    fn mode_tie_goes_to_lower_index() {
        let spec = GaussianMixtureSpec { centers: vec![[1.0, 0.0], [-1.0, 0.0]], component_std: 0.1 };
        assert_eq!(assign_mode(arr1(&[0.0, 0.0]).view(), &spec), 0);
        assert_eq!(assign_mode(arr1(&[-1.0, 0.0]).view(), &spec), 1);
    }

    #[test]
    fn exactly_400_per_mode() {
        let ds = gen_25_gaussians(10_000, 3).unwrap();
        let mut counts = [0usize; 25];
        for &m in ds.modes.as_ref().unwrap() {
            counts[m] += 1;
        }
        assert!(counts.iter().all(|&c| c == 400));
        let spec = GaussianMixtureSpec::twenty_five();
        for (row, &m) in ds.points.rows().into_iter().zip(ds.modes.as_ref().unwrap()) {
            assert_eq!(assign_mode(row, &spec), m);
        }
    }
}
