use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::dataset::DatasetError;

/// Raw per-point labels: lower 16 bits semantic class, upper 16 bits
/// instance id.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PointLabels {
    pub raw: Vec<u32>,
}

impl PointLabels {
    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn semantic(&self, i: usize) -> u16 {
        (self.raw[i] & 0xffff) as u16
    }

    pub fn instance(&self, i: usize) -> u16 {
        (self.raw[i] >> 16) as u16
    }

    /// Reads a label file: one little-endian u32 per point.
    pub fn read(path: &Path) -> Result<Self, DatasetError> {
        let bytes = std::fs::read(path).map_err(|source| DatasetError::Io {
            path: path.to_owned(),
            source,
        })?;
        if bytes.len() % 4 != 0 {
            return Err(DatasetError::BadRecordSize {
                path: path.to_owned(),
                len: bytes.len() as u64,
            });
        }
        let raw = bytes
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self { raw })
    }

    pub fn write(&self, path: &Path) -> Result<(), DatasetError> {
        let mut bytes = Vec::with_capacity(self.raw.len() * 4);
        for v in &self.raw {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(path, bytes).map_err(|source| DatasetError::Io {
            path: path.to_owned(),
            source,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MotionLabel {
    Static,
    Moving,
    Ignore,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MobilityLabel {
    Unmovable,
    Movable,
    Ignore,
}

/// Per-point task labels for the two branches. A moving point is always
/// movable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskLabels {
    pub motion: Vec<MotionLabel>,
    pub mobility: Vec<MobilityLabel>,
}

impl TaskLabels {
    pub fn len(&self) -> usize {
        self.motion.len()
    }

    pub fn is_empty(&self) -> bool {
        self.motion.is_empty()
    }
}

/// The three raw-id sets of the task taxonomy. Moving ids must be a subset
/// of movable ids; ignore ids may not overlap either set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassMap {
    moving: BTreeSet<u16>,
    movable: BTreeSet<u16>,
    ignore: BTreeSet<u16>,
}

impl ClassMap {
    pub fn new(
        moving: BTreeSet<u16>,
        movable: BTreeSet<u16>,
        ignore: BTreeSet<u16>,
    ) -> Result<Self, DatasetError> {
        if !moving.is_subset(&movable) {
            let stray: Vec<u16> = moving.difference(&movable).copied().collect();
            return Err(DatasetError::BadClassMap(format!(
                "moving ids {stray:?} are not listed as movable"
            )));
        }
        if !ignore.is_disjoint(&movable) || !ignore.is_disjoint(&moving) {
            return Err(DatasetError::BadClassMap(
                "ignore ids overlap moving/movable ids".into(),
            ));
        }
        Ok(Self {
            moving,
            movable,
            ignore,
        })
    }

    /// Default id tables following the SemanticKITTI-MOS convention:
    /// moving ids 252–259, movable ids additionally include the matching
    /// static vehicle/person classes, ids 0 (unlabeled) and 1 (outlier)
    /// are ignored.
    pub fn semantic_kitti_mos() -> Self {
        let moving: BTreeSet<u16> = (252..=259).collect();
        let mut movable: BTreeSet<u16> =
            [10, 11, 13, 15, 16, 18, 20, 30, 31, 32].into_iter().collect();
        movable.extend(&moving);
        let ignore: BTreeSet<u16> = [0, 1].into_iter().collect();
        Self::new(moving, movable, ignore).expect("default table satisfies the taxonomy")
    }

    pub fn moving(&self) -> &BTreeSet<u16> {
        &self.moving
    }

    pub fn movable(&self) -> &BTreeSet<u16> {
        &self.movable
    }

    pub fn ignore(&self) -> &BTreeSet<u16> {
        &self.ignore
    }

    /// Parses the plain-text key-value format:
    ///
    /// ```text
    /// # comment
    /// moving  = 252, 253
    /// movable = 10, 252, 253
    /// ignore  = 0, 1
    /// ```
    pub fn parse(text: &str, origin: &Path) -> Result<Self, DatasetError> {
        let mut sets: BTreeMap<&str, BTreeSet<u16>> = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |reason: String| DatasetError::BadClassMapLine {
                path: origin.to_owned(),
                line: lineno + 1,
                reason,
            };
            let (key, vals) = line
                .split_once('=')
                .ok_or_else(|| bad("expected 'key = id, id, ...'".into()))?;
            let key = key.trim();
            if !matches!(key, "moving" | "movable" | "ignore") {
                return Err(bad(format!("unknown key '{key}'")));
            }
            let mut ids = BTreeSet::new();
            for tok in vals.split([',', ' ', '\t']).filter(|t| !t.is_empty()) {
                let id: u16 = tok
                    .parse()
                    .map_err(|_| bad(format!("'{tok}' is not a 16-bit class id")))?;
                ids.insert(id);
            }
            sets.entry(key).or_default().extend(ids);
        }
        Self::new(
            sets.remove("moving").unwrap_or_default(),
            sets.remove("movable").unwrap_or_default(),
            sets.remove("ignore").unwrap_or_default(),
        )
    }

    pub fn read(path: &Path) -> Result<Self, DatasetError> {
        let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::parse(&text, path)
    }
}

/// Raw ids seen outside all three sets; they are mapped to
/// (static, unmovable) rather than dropped so IoU denominators stay intact.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RemapStats {
    pub unknown_points: usize,
    pub unknown_ids: BTreeMap<u16, usize>,
}

/// Maps raw semantic ids onto the motion and mobility tasks.
pub fn remap_labels(labels: &PointLabels, map: &ClassMap) -> (TaskLabels, RemapStats) {
    let mut motion = Vec::with_capacity(labels.len());
    let mut mobility = Vec::with_capacity(labels.len());
    let mut stats = RemapStats::default();
    for i in 0..labels.len() {
        let id = labels.semantic(i);
        if map.ignore.contains(&id) {
            motion.push(MotionLabel::Ignore);
            mobility.push(MobilityLabel::Ignore);
        } else if map.moving.contains(&id) {
            motion.push(MotionLabel::Moving);
            mobility.push(MobilityLabel::Movable);
        } else if map.movable.contains(&id) {
            motion.push(MotionLabel::Static);
            mobility.push(MobilityLabel::Movable);
        } else {
            motion.push(MotionLabel::Static);
            mobility.push(MobilityLabel::Unmovable);
            stats.unknown_points += 1;
            *stats.unknown_ids.entry(id).or_insert(0) += 1;
        }
    }
    (TaskLabels { motion, mobility }, stats)
}
