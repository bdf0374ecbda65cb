//! File formats: trajectory CSV and sidecar, spectral report JSON, sphere
//! multiplicity CSV. Floats are written with 17 significant digits.

use std::io::{self, Write};

use serde::Serialize;

use crate::dynamics::{Termination, Trajectory};
use crate::scalar::Scalar;
use crate::sphere::{in_window, IndexBound, SphereError};
use crate::stability::SpectralReport;

pub const TRAJECTORY_HEADER: &str = "t,a,b,c,tau0,V,X,Y";

fn float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, mut w: W) -> io::Result<()> {
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    for s in &traj.samples {
        let row = [s.t, s.a, s.b, s.c, s.tau0, s.volume, s.x, s.y].map(float).join(",");
        writeln!(w, "{row}")?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sidecar {
    pub reason: Termination,
    pub steps: usize,
    pub final_state: [f64; 3],
    pub final_time: f64,
}

impl Sidecar {
    pub fn from_trajectory(traj: &Trajectory) -> Self {
        Sidecar {
            reason: traj.termination,
            steps: traj.steps,
            final_state: traj.final_state(),
            final_time: traj.final_sample().t,
        }
    }
}

pub fn write_sidecar_json<W: Write>(traj: &Trajectory, w: W) -> io::Result<()> {
    let mut w = w;
    serde_json::to_writer_pretty(&mut w, &Sidecar::from_trajectory(traj))?;
    writeln!(w)
}

pub fn write_spectral_json<W: Write>(report: &SpectralReport, w: W) -> io::Result<()> {
    let mut w = w;
    serde_json::to_writer_pretty(&mut w, report)?;
    writeln!(w)
}

/// Multiplicity table. The `displayed_closed_form` column is optional and
/// disagrees with `lower_bound` by design.
pub fn write_sphere_csv<W: Write>(
    bound: &IndexBound,
    gamma: &Scalar,
    with_closed_form: bool,
    mut w: W,
) -> io::Result<()> {
    let g = gamma.to_string();
    let mut header = format!("l,eigenvalue,d,d0,d1,lower_bound,in_window({g})");
    if with_closed_form {
        header.push_str(",displayed_closed_form");
    }
    writeln!(w, "{header}")?;
    for r in &bound.records {
        let inside = in_window(r.l, gamma).map_err(|e: SphereError| io::Error::new(io::ErrorKind::InvalidInput, e))?;
        write!(w, "{},{},{},{},{},{},{}", r.l, r.eigenvalue, r.d, r.d0, r.d1, r.lower_bound, inside)?;
        if with_closed_form {
            write!(w, ",{}", r.displayed_closed_form)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate, Flavor, FlowConfig};
    use crate::forms::Orientation;
    use crate::scalar::int;
    use crate::sphere::index_lower_bound;

    #[test]
    fn trajectory_csv_shape() {
        let mut cfg = FlowConfig::new(Flavor::NormalizedCoflow, Orientation::Minus);
        cfg.step.t_end = 0.01;
        let traj = integrate(&cfg, [1.2, 0.9, 1.0]).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&traj, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(TRAJECTORY_HEADER));
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first.len(), 8);
        assert_eq!(first[1], "1.2000000000000000e0");
        assert_eq!(text.lines().count(), traj.samples.len() + 1);
    }

    #[test]
    fn sidecar_reason_is_kebab() {
        let mut cfg = FlowConfig::new(Flavor::NormalizedCoflow, Orientation::Minus);
        cfg.step.t_end = 0.01;
        let traj = integrate(&cfg, [1.2, 0.9, 1.0]).unwrap();
        let mut buf = Vec::new();
        write_sidecar_json(&traj, &mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v["reason"], "horizon");
        assert_eq!(v["final_state"].as_array().unwrap().len(), 3);
    }

    #[test]
    fn sphere_csv_rows() {
        let b = index_lower_bound(3, 4, &int(3)).unwrap();
        let mut buf = Vec::new();
        write_sphere_csv(&b, &int(3), false, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "l,eigenvalue,d,d0,d1,lower_bound,in_window(3)\n3,-7,2400,672,1568,160,true\n4,-8,5775,1386,3696,693,true\n"
        );
        let mut buf = Vec::new();
        write_sphere_csv(&b, &int(3), true, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().lines().nth(1).unwrap().ends_with(",3840"));
    }
}
