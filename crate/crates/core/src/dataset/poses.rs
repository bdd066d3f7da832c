use std::io::Write;
use std::path::Path;

use crate::dataset::DatasetError;
use crate::geometry::Pose;
use crate::scalar::{real, Real};

/// Reads a KITTI odometry pose file (one 3×4 row-major matrix per line)
/// and expresses every pose in the LiDAR frame: Tr⁻¹ · Pᵢ · Tr, where
/// `calib` is the camera-to-LiDAR transform Tr.
pub fn read_poses<S: Real>(path: &Path, calib: &Pose<S>) -> Result<Vec<Pose<S>>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_owned(),
        source,
    })?;
    let calib_inv = calib.inverse();
    let mut poses = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let vals = parse_12(line).ok_or_else(|| DatasetError::BadPoseLine {
            path: path.to_owned(),
            line: lineno + 1,
        })?;
        let cam_pose =
            Pose::from_rows_3x4(&vals.map(real::<S>)).map_err(|source| DatasetError::NonRigidPose {
                path: path.to_owned(),
                line: lineno + 1,
                source,
            })?;
        poses.push(calib_inv.compose(&cam_pose).compose(calib));
    }
    Ok(poses)
}

/// Reads the camera-to-LiDAR transform from a KITTI calibration file
/// (the `Tr:` line). Sequences without a calibration file use the
/// identity instead of calling this.
pub fn read_calib<S: Real>(path: &Path) -> Result<Pose<S>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_owned(),
        source,
    })?;
    for (lineno, line) in text.lines().enumerate() {
        let Some(rest) = line.strip_prefix("Tr:") else {
            continue;
        };
        let vals = parse_12(rest).ok_or_else(|| DatasetError::BadPoseLine {
            path: path.to_owned(),
            line: lineno + 1,
        })?;
        return Pose::from_rows_3x4(&vals.map(real::<S>)).map_err(|source| {
            DatasetError::NonRigidPose {
                path: path.to_owned(),
                line: lineno + 1,
                source,
            }
        });
    }
    Err(DatasetError::MissingCalib {
        path: path.to_owned(),
    })
}

/// Writes poses in the KITTI text layout (upper 3×4 block, row-major).
pub fn write_poses<S: Real>(path: &Path, poses: &[Pose<S>]) -> Result<(), DatasetError> {
    let io_err = |source| DatasetError::Io {
        path: path.to_owned(),
        source,
    };
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    let io_err = |source| DatasetError::Io {
        path: path.to_owned(),
        source,
    };
    for pose in poses {
        let m = pose.matrix();
        let mut fields = Vec::with_capacity(12);
        for row in m.iter().take(3) {
            for v in row {
                fields.push(format!("{:.12e}", v.to_f64().unwrap()));
            }
        }
        writeln!(out, "{}", fields.join(" ")).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

fn parse_12(line: &str) -> Option<[f64; 12]> {
    let mut vals = [0.0f64; 12];
    let mut n = 0;
    for tok in line.split_whitespace() {
        if n == 12 {
            return None;
        }
        vals[n] = tok.parse().ok()?;
        n += 1;
    }
    (n == 12).then_some(vals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{random_pose, relative_pose};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_line_with_identity_calib() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("poses.txt");
        std::fs::write(&path, "1 0 0 0 0 1 0 0 0 0 1 0\n").unwrap();
        let poses: Vec<Pose<f64>> = read_poses(&path, &Pose::identity()).unwrap();
        assert_eq!(poses.len(), 1);
        assert_eq!(poses[0].matrix(), Pose::identity().matrix());
    }

    #[test]
    fn identity_calib_leaves_pose_unchanged() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("poses.txt");
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p: Pose<f64> = random_pose(&mut rng);
        write_poses(&path, &[p]).unwrap();
        let back: Vec<Pose<f64>> = read_poses(&path, &Pose::identity()).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!((back[0].matrix()[i][j] - p.matrix()[i][j]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn two_identical_poses_have_identity_relative() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("poses.txt");
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p: Pose<f64> = random_pose(&mut rng);
        write_poses(&path, &[p, p]).unwrap();
        let poses: Vec<Pose<f64>> = read_poses(&path, &Pose::identity()).unwrap();
        let rel = relative_pose(&poses[1], &poses[0]);
        for i in 0..4 {
            for j in 0..4 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((rel.matrix()[i][j] - target).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn conjugation_by_calib_round_trips() {
        // With a nontrivial calib, reading poses written in the camera
        // frame expresses them in the LiDAR frame; conjugating back
        // recovers the original.
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("poses.txt");
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cam: Pose<f64> = random_pose(&mut rng);
        let calib: Pose<f64> = random_pose(&mut rng);
        write_poses(&path, &[cam]).unwrap();
        let lidar = read_poses(&path, &calib).unwrap();
        let back = calib.compose(&lidar[0]).compose(&calib.inverse());
        for i in 0..4 {
            for j in 0..4 {
                assert!((back.matrix()[i][j] - cam.matrix()[i][j]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn rejects_malformed_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("poses.txt");
        std::fs::write(&path, "1 0 0 0 0 1 0 0 0 0 1\n").unwrap();
        assert!(matches!(
            read_poses::<f64>(&path, &Pose::identity()),
            Err(DatasetError::BadPoseLine { line: 1, .. })
        ));
    }

    #[test]
    fn rejects_non_rigid_pose() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("poses.txt");
        std::fs::write(&path, "2 0 0 0 0 1 0 0 0 0 1 0\n").unwrap();
        assert!(matches!(
            read_poses::<f64>(&path, &Pose::identity()),
            Err(DatasetError::NonRigidPose { line: 1, .. })
        ));
    }

    #[test]
    fn reads_tr_line_from_calib_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("calib.txt");
        std::fs::write(
            &path,
            "P0: 1 0 0 0 0 1 0 0 0 0 1 0\nTr: 1 0 0 0.5 0 1 0 0 0 0 1 0\n",
        )
        .unwrap();
        let tr: Pose<f64> = read_calib(&path).unwrap();
        assert_eq!(tr.translation(), [0.5, 0.0, 0.0]);
    }

    #[test]
    fn missing_tr_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("calib.txt");
        std::fs::write(&path, "P0: 1 0 0 0 0 1 0 0 0 0 1 0\n").unwrap();
        assert!(matches!(
            read_calib::<f64>(&path),
            Err(DatasetError::MissingCalib { .. })
        ));
    }
}
