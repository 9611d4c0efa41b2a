//! Demonstrations: CSV exchange, conversion, subsampling and velocities.

use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VfError};
use crate::geometry::{convert, log, manifold_jacobian, ManifoldId, ManifoldPoint};
use crate::linalg;

/// Relative slack on the spacing test, so that a point sitting exactly one
/// spacing away (up to rounding) is retained.
const SPACING_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demonstration {
    /// Sample times in seconds. Velocity-form files carry no time column and
    /// get the sample index instead.
    pub times: Vec<f64>,
    pub points: Vec<ManifoldPoint>,
    /// Tangent velocities at each sample, per second.
    pub velocities: Option<Vec<DVector<f64>>>,
}

impl Demonstration {
    pub fn new(times: Vec<f64>, points: Vec<ManifoldPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(VfError::Empty("demonstration"));
        }
        if times.len() != points.len() {
            return Err(VfError::Dimension { expected: points.len(), got: times.len() });
        }
        if times.windows(2).any(|w| w[1] < w[0]) {
            return Err(VfError::InvalidParam("demonstration times must be non-decreasing".into()));
        }
        let m = points[0].manifold();
        if let Some(p) = points.iter().find(|p| p.manifold() != m) {
            return Err(VfError::ManifoldMismatch { expected: m, got: p.manifold() });
        }
        Ok(Demonstration { times, points, velocities: None })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn manifold(&self) -> ManifoldId {
        self.points[0].manifold()
    }

    /// Convert every sample to another pose chart; velocities follow through
    /// the chart Jacobian.
    pub fn convert(&self, to: ManifoldId) -> Result<Demonstration> {
        let from = self.manifold();
        let points = self.points.iter().map(|p| convert(p, to)).collect::<Result<Vec<_>>>()?;
        let velocities = match &self.velocities {
            None => None,
            Some(vs) if from == to => Some(vs.clone()),
            Some(vs) => {
                if from != ManifoldId::M1 || !to.is_pose() {
                    return Err(VfError::ManifoldMismatch { expected: ManifoldId::M1, got: from });
                }
                let mut out = Vec::with_capacity(vs.len());
                for (p, v) in points.iter().zip(vs) {
                    let j = manifold_jacobian(p)?;
                    out.push(linalg::from_v6(&(j * linalg::to_v6(v))));
                }
                Some(out)
            }
        };
        Ok(Demonstration { times: self.times.clone(), points, velocities })
    }

    /// Times rescaled to [0, 1]; falls back to the sample index when the
    /// time span is empty.
    pub fn normalized_times(&self) -> Vec<f64> {
        let n = self.len();
        let (t0, t1) = (self.times[0], self.times[n - 1]);
        if t1 > t0 {
            self.times.iter().map(|t| (t - t0) / (t1 - t0)).collect()
        } else if n > 1 {
            (0..n).map(|k| k as f64 / (n - 1) as f64).collect()
        } else {
            vec![0.0]
        }
    }
}

/// Distance used for spacing: norm of the linear block for pose charts, the
/// full tangent otherwise.
fn position_distance(a: &ManifoldPoint, b: &ManifoldPoint) -> Result<f64> {
    let l = log(a, b)?;
    Ok(if a.manifold().is_pose() { l.rows(0, 3).norm() } else { l.norm() })
}

/// `Log(x_k, x_{k+1}) / dt`, expressed at the earlier sample; zero at the end.
pub fn finite_difference_velocities(times: &[f64], points: &[ManifoldPoint]) -> Result<Vec<DVector<f64>>> {
    let n = points.len();
    let d = points[0].manifold().tangent_dim();
    let mut out = Vec::with_capacity(n);
    for k in 0..n.saturating_sub(1) {
        let dt = times[k + 1] - times[k];
        if !(dt > 0.0) {
            return Err(VfError::InvalidParam(format!("non-increasing time at sample {}", k + 1)));
        }
        out.push(log(&points[k], &points[k + 1])? / dt);
    }
    out.push(DVector::zeros(d));
    Ok(out)
}

/// Keep samples at least `spacing` apart (position part), always keeping the
/// first and the last sample.
pub fn subsample_equal_spacing(demo: &Demonstration, spacing: f64) -> Result<Demonstration> {
    if demo.is_empty() {
        return Err(VfError::Empty("demonstration"));
    }
    if !(spacing > 0.0) {
        return Err(VfError::InvalidParam("spacing must be positive".into()));
    }
    let n = demo.len();
    let mut keep = vec![0usize];
    for k in 1..n {
        let last = *keep.last().unwrap();
        if position_distance(&demo.points[last], &demo.points[k])? >= spacing * (1.0 - SPACING_RTOL) {
            keep.push(k);
        }
    }
    if *keep.last().unwrap() != n - 1 {
        keep.push(n - 1);
    }
    let times: Vec<f64> = keep.iter().map(|&k| demo.times[k]).collect();
    let points: Vec<ManifoldPoint> = keep.iter().map(|&k| demo.points[k].clone()).collect();
    let velocities = match &demo.velocities {
        Some(v) => keep.iter().map(|&k| v[k].clone()).collect(),
        None => finite_difference_velocities(&times, &points)?,
    };
    Ok(Demonstration { times, points, velocities: Some(velocities) })
}

const POSE_HEADER: [&str; 8] = ["t", "x", "y", "z", "qx", "qy", "qz", "qw"];
const VEL_HEADER: [&str; 13] = ["x", "y", "z", "qx", "qy", "qz", "qw", "vx", "vy", "vz", "wx", "wy", "wz"];

/// Read a demonstration CSV. Poses are M1 points in the file's frame.
pub fn read_csv<P: AsRef<Path>>(path: P) -> Result<Demonstration> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| VfError::Config(format!("{}: {e}", path.display())))?;
    read_csv_from(file).map_err(|e| match e {
        VfError::Config(m) => VfError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn read_csv_from<R: std::io::Read>(reader: R) -> Result<Demonstration> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|s| s.to_string()).collect();
    let with_time = header == POSE_HEADER;
    if !with_time && header != VEL_HEADER {
        return Err(VfError::Config(format!("unrecognized demonstration header {:?}", header)));
    }
    let mut times = Vec::new();
    let mut points = Vec::new();
    let mut vels = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let vals = rec
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| VfError::Config(format!("line {}: {e}", row + 2))))
            .collect::<Result<Vec<f64>>>()?;
        if vals.len() != header.len() {
            return Err(VfError::Config(format!("line {}: expected {} fields", row + 2, header.len())));
        }
        if with_time {
            times.push(vals[0]);
            points.push(ManifoldPoint::from_pose7(&vals[1..8])?);
        } else {
            times.push(row as f64);
            points.push(ManifoldPoint::from_pose7(&vals[0..7])?);
            vels.push(DVector::from_column_slice(&vals[7..13]));
        }
    }
    let mut demo = Demonstration::new(times, points)?;
    if !with_time {
        demo.velocities = Some(vels);
    }
    Ok(demo)
}

pub fn write_csv<P: AsRef<Path>>(demo: &Demonstration, path: P) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(POSE_HEADER)?;
    for (t, p) in demo.times.iter().zip(&demo.points) {
        let pose = p.to_pose7()?;
        let mut rec = vec![t.to_string()];
        rec.extend(pose.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Straight-line distance along the position part, summed over samples.
pub fn path_length(demo: &Demonstration) -> Result<f64> {
    let mut s = 0.0;
    for k in 1..demo.len() {
        s += position_distance(&demo.points[k - 1], &demo.points[k])?;
    }
    Ok(s)
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Quat;
    use nalgebra::Vector3;

    fn line(n: usize, step: f64) -> Demonstration {
        let pts = (0..n).map(|k| ManifoldPoint::m1(Vector3::new(k as f64 * step, 0.0, 0.0), Quat::identity())).collect();
        Demonstration::new((0..n).map(|k| k as f64 * 0.1).collect(), pts).unwrap()
    }

    #[test]
    fn one_metre_line_at_five_centimetres() {
        let d = subsample_equal_spacing(&line(101, 0.01), 0.05).unwrap();
        assert_eq!(d.len(), 21);
        let v = d.velocities.as_ref().unwrap();
        assert!((v[0][0] - 0.1).abs() < 1e-9);
        assert_eq!(v.last().unwrap().norm(), 0.0);
    }

    #[test]
    fn oversized_spacing_keeps_ends() {
        let d = subsample_equal_spacing(&line(11, 0.01), 5.0).unwrap();
        assert_eq!(d.len(), 2);
    }

    #[test]
    fn csv_round_trip() {
        let text = "t,x,y,z,qx,qy,qz,qw\n0,0,0,0,0,0,0,1\n0.5,1,2,3,0,0,0,1\n";
        let d = read_csv_from(text.as_bytes()).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.times, vec![0.0, 0.5]);
        let vtext = "x,y,z,qx,qy,qz,qw,vx,vy,vz,wx,wy,wz\n0,0,0,0,0,0,1,1,0,0,0,0,0\n";
        let v = read_csv_from(vtext.as_bytes()).unwrap();
        assert_eq!(v.velocities.unwrap()[0][0], 1.0);
        assert!(read_csv_from("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn empty_demo_is_rejected() {
        assert!(Demonstration::new(vec![], vec![]).is_err());
    }
}
