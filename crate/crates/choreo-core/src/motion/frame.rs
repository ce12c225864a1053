use super::MotionError;

pub const CONTACT_DIM: usize = 4;
pub const ROOT_DIM: usize = 3;
pub const JOINT_COUNT: usize = 24;
pub const POSE_DIM: usize = 6 * JOINT_COUNT;
/// Packed frame width: `[contact(4), root(3), pose(144)]`.
pub const FRAME_DIM: usize = CONTACT_DIM + ROOT_DIM + POSE_DIM;

/// One dancer, one frame.
///
/// `contact` holds the four foot contact labels in `(L-ankle, R-ankle,
/// L-toe, R-toe)` order, `root` the pelvis position in meters (y up), and
/// `pose` the 24 joint rotations in 6D format (two matrix columns,
/// `[c1x c1y c1z c2x c2y c2z]` per joint).
#[derive(Debug, Clone, PartialEq)]
pub struct MotionFrame {
    pub contact: [f64; CONTACT_DIM],
    pub root: [f64; ROOT_DIM],
    pub pose: Vec<f64>,
}

impl MotionFrame {
    pub fn zeros() -> Self {
        MotionFrame {
            contact: [0.0; CONTACT_DIM],
            root: [0.0; ROOT_DIM],
            pose: vec![0.0; POSE_DIM],
        }
    }

    /// Frame with every joint at the identity rotation.
    pub fn identity_pose() -> Self {
        let mut pose = vec![0.0; POSE_DIM];
        for j in 0..JOINT_COUNT {
            pose[6 * j] = 1.0; // first column (1,0,0)
            pose[6 * j + 4] = 1.0; // second column (0,1,0)
        }
        MotionFrame {
            contact: [0.0; CONTACT_DIM],
            root: [0.0; ROOT_DIM],
            pose,
        }
    }

    /// Pack into the 151-value layout `[contact, root, pose]`.
    pub fn pack(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(FRAME_DIM);
        v.extend_from_slice(&self.contact);
        v.extend_from_slice(&self.root);
        v.extend_from_slice(&self.pose);
        v
    }

    /// Inverse of [`MotionFrame::pack`].
    pub fn unpack(values: &[f64]) -> Result<Self, MotionError> {
        if values.len() != FRAME_DIM {
            return Err(MotionError::Dimension {
                expected: FRAME_DIM,
                got: values.len(),
            });
        }
        let mut contact = [0.0; CONTACT_DIM];
        contact.copy_from_slice(&values[..CONTACT_DIM]);
        let mut root = [0.0; ROOT_DIM];
        root.copy_from_slice(&values[CONTACT_DIM..CONTACT_DIM + ROOT_DIM]);
        Ok(MotionFrame {
            contact,
            root,
            pose: values[CONTACT_DIM + ROOT_DIM..].to_vec(),
        })
    }

    /// 6D block of one joint.
    pub fn joint_rot6d(&self, joint: usize) -> &[f64] {
        &self.pose[6 * joint..6 * joint + 6]
    }
}

/// C dancers × L frames of motion at a fixed frame rate.
///
/// Frames are stored dancer-major: `data[c * frames + l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupMotionSequence {
    dancers: usize,
    frames: usize,
    pub fps: f64,
    data: Vec<MotionFrame>,
}

impl GroupMotionSequence {
    pub fn new(dancers: usize, frames: usize, fps: f64, data: Vec<MotionFrame>) -> Result<Self, MotionError> {
        if dancers == 0 || frames == 0 {
            return Err(MotionError::ShapeMismatch(
                "need at least one dancer and one frame".into(),
            ));
        }
        if !(fps > 0.0) {
            return Err(MotionError::ShapeMismatch(format!("fps must be positive, got {fps}")));
        }
        if data.len() != dancers * frames {
            return Err(MotionError::Dimension {
                expected: dancers * frames,
                got: data.len(),
            });
        }
        Ok(GroupMotionSequence {
            dancers,
            frames,
            fps,
            data,
        })
    }

    pub fn zeros(dancers: usize, frames: usize, fps: f64) -> Self {
        GroupMotionSequence::new(dancers, frames, fps, vec![MotionFrame::zeros(); dancers * frames])
            .expect("valid dimensions")
    }

    pub fn dancers(&self) -> usize {
        self.dancers
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn frame(&self, dancer: usize, frame: usize) -> &MotionFrame {
        &self.data[dancer * self.frames + frame]
    }

    pub fn frame_mut(&mut self, dancer: usize, frame: usize) -> &mut MotionFrame {
        &mut self.data[dancer * self.frames + frame]
    }

    /// All frames of one dancer.
    pub fn dancer(&self, dancer: usize) -> &[MotionFrame] {
        &self.data[dancer * self.frames..(dancer + 1) * self.frames]
    }

    /// Flatten to `C × L × 151` channel values in packed frame order.
    pub fn to_channels(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.data.len() * FRAME_DIM);
        for f in &self.data {
            out.extend_from_slice(&f.pack());
        }
        out
    }

    /// Rebuild from `C × L × 151` channel values.
    pub fn from_channels(
        dancers: usize,
        frames: usize,
        fps: f64,
        channels: &[f64],
    ) -> Result<Self, MotionError> {
        if channels.len() != dancers * frames * FRAME_DIM {
            return Err(MotionError::Dimension {
                expected: dancers * frames * FRAME_DIM,
                got: channels.len(),
            });
        }
        let data = channels
            .chunks_exact(FRAME_DIM)
            .map(MotionFrame::unpack)
            .collect::<Result<Vec<_>, _>>()?;
        GroupMotionSequence::new(dancers, frames, fps, data)
    }

    /// Root trajectory of every dancer, `C × L × 3`.
    pub fn root_trajectory(&self) -> Vec<Vec<[f64; 3]>> {
        (0..self.dancers)
            .map(|c| (0..self.frames).map(|l| self.frame(c, l).root).collect())
            .collect()
    }
}
