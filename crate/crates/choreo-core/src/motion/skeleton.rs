use super::MotionError;

/// Joint tree with rest-pose bone offsets.
///
/// Joints are stored in topological order: every joint's parent has a
/// smaller index, joint 0 is the root. `foot_joints` lists the four joints
/// matching the contact label order `(L-ankle, R-ankle, L-toe, R-toe)` and
/// must be a subset of `lower_body`.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    parents: Vec<Option<usize>>,
    offsets: Vec<[f64; 3]>,
    foot_joints: Vec<usize>,
    lower_body: Vec<usize>,
}

const CANONICAL: &str = include_str!("../../data/skeleton24.txt");

impl Skeleton {
    pub fn new(
        parents: Vec<Option<usize>>,
        offsets: Vec<[f64; 3]>,
        foot_joints: Vec<usize>,
        lower_body: Vec<usize>,
    ) -> Result<Self, MotionError> {
        if parents.is_empty() || parents.len() != offsets.len() {
            return Err(MotionError::InvalidSkeleton(
                "parents and offsets must be non-empty and equal length".into(),
            ));
        }
        if parents[0].is_some() {
            return Err(MotionError::InvalidSkeleton("joint 0 must be the root".into()));
        }
        for (j, p) in parents.iter().enumerate().skip(1) {
            match p {
                Some(p) if *p < j => {}
                Some(p) => {
                    return Err(MotionError::InvalidSkeleton(format!(
                        "joint {j} has parent {p}, parents must precede children"
                    )))
                }
                None => {
                    return Err(MotionError::InvalidSkeleton(format!(
                        "joint {j} has no parent; only joint 0 is the root"
                    )))
                }
            }
        }
        let n = parents.len();
        for &f in &foot_joints {
            if f >= n {
                return Err(MotionError::InvalidSkeleton(format!("foot joint {f} out of range")));
            }
            if !lower_body.contains(&f) {
                return Err(MotionError::InvalidSkeleton(format!(
                    "foot joint {f} is not in the lower-body set"
                )));
            }
        }
        for &l in &lower_body {
            if l >= n {
                return Err(MotionError::InvalidSkeleton(format!(
                    "lower-body joint {l} out of range"
                )));
            }
        }
        Ok(Skeleton {
            parents,
            offsets,
            foot_joints,
            lower_body,
        })
    }

    /// The canonical 24-joint skeleton shipped with the crate.
    pub fn canonical() -> Skeleton {
        Skeleton::parse(CANONICAL).expect("embedded skeleton table is valid")
    }

    /// Parse the plain-text skeleton format: one `joint parent ox oy oz`
    /// line per joint (parent -1 for the root), then `foot_joints ...` and
    /// `lower_body ...` index lists. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Skeleton, MotionError> {
        let mut parents = Vec::new();
        let mut offsets = Vec::new();
        let mut foot_joints = Vec::new();
        let mut lower_body = Vec::new();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let head = parts.next().unwrap();
            let bad = |what: &str| MotionError::InvalidSkeleton(format!("bad {what} in line {line:?}"));
            match head {
                "foot_joints" => {
                    foot_joints = parts
                        .map(|p| p.parse::<usize>().map_err(|_| bad("foot joint index")))
                        .collect::<Result<_, _>>()?;
                }
                "lower_body" => {
                    lower_body = parts
                        .map(|p| p.parse::<usize>().map_err(|_| bad("lower-body index")))
                        .collect::<Result<_, _>>()?;
                }
                idx => {
                    let j: usize = idx.parse().map_err(|_| bad("joint index"))?;
                    if j != parents.len() {
                        return Err(MotionError::InvalidSkeleton(format!(
                            "joint lines must be in order, expected {} got {j}",
                            parents.len()
                        )));
                    }
                    let parent: i64 = parts.next().ok_or_else(|| bad("parent"))?.parse().map_err(|_| bad("parent"))?;
                    let mut off = [0.0; 3];
                    for o in off.iter_mut() {
                        *o = parts.next().ok_or_else(|| bad("offset"))?.parse().map_err(|_| bad("offset"))?;
                    }
                    parents.push(if parent < 0 { None } else { Some(parent as usize) });
                    offsets.push(off);
                }
            }
        }
        Skeleton::new(parents, offsets, foot_joints, lower_body)
    }

    /// Serialize in the plain-text format accepted by [`Skeleton::parse`].
    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        for j in 0..self.joints() {
            let p = self.parents[j].map(|p| p as i64).unwrap_or(-1);
            let o = self.offsets[j];
            writeln!(out, "{j} {p} {} {} {}", o[0], o[1], o[2]).unwrap();
        }
        let list = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        writeln!(out, "foot_joints {}", list(&self.foot_joints)).unwrap();
        writeln!(out, "lower_body {}", list(&self.lower_body)).unwrap();
        out
    }

    pub fn joints(&self) -> usize {
        self.parents.len()
    }

    pub fn parent(&self, joint: usize) -> Option<usize> {
        self.parents[joint]
    }

    pub fn offset(&self, joint: usize) -> [f64; 3] {
        self.offsets[joint]
    }

    pub fn foot_joints(&self) -> &[usize] {
        &self.foot_joints
    }

    pub fn lower_body(&self) -> &[usize] {
        &self.lower_body
    }

    pub fn is_lower_body(&self, joint: usize) -> bool {
        self.lower_body.contains(&joint)
    }

    /// Sum of offsets along the chain from the root to `joint` — the
    /// rest-pose position relative to the root.
    pub fn rest_position(&self, joint: usize) -> [f64; 3] {
        let mut pos = [0.0; 3];
        let mut j = joint;
        loop {
            let o = self.offsets[j];
            if j != 0 {
                pos[0] += o[0];
                pos[1] += o[1];
                pos[2] += o[2];
            }
            match self.parents[j] {
                Some(p) => j = p,
                None => break,
            }
        }
        pos
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_skeleton_is_valid() {
        let s = Skeleton::canonical();
        assert_eq!(s.joints(), 24);
        assert_eq!(s.foot_joints(), &[7, 8, 10, 11]);
        assert_eq!(s.lower_body(), &[1, 2, 4, 5, 7, 8, 10, 11]);
        assert_eq!(s.parent(0), None);
        assert_eq!(s.parent(23), Some(21));
    }

    #[test]
    fn text_roundtrip() {
        let s = Skeleton::canonical();
        let back = Skeleton::parse(&s.to_text()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn rest_position_sums_chain() {
        let s = Skeleton::canonical();
        // left ankle: hip(0.09,-0.09,0) + knee(0,-0.40,0) + ankle(0,-0.40,0)
        let p = s.rest_position(7);
        assert!((p[0] - 0.09).abs() < 1e-12);
        assert!((p[1] + 0.89).abs() < 1e-12);
        assert!(p[2].abs() < 1e-12);
    }

    #[test]
    fn foot_joint_outside_lower_body_rejected() {
        let r = Skeleton::new(
            vec![None, Some(0)],
            vec![[0.0; 3], [0.0, -1.0, 0.0]],
            vec![1],
            vec![],
        );
        assert!(r.is_err());
    }

    #[test]
    fn out_of_order_parent_rejected() {
        let r = Skeleton::new(
            vec![None, Some(2), Some(0)],
            vec![[0.0; 3]; 3],
            vec![],
            vec![],
        );
        assert!(r.is_err());
    }
}
