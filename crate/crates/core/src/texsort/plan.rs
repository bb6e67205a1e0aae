use alloc::vec::Vec;

use crate::Result;

use super::layout::SortGeometry;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PassKind {
    /// Packs 4+4 keys/values into pair texels and runs stage 1.
    Preprocess,
    /// One vertical-neighbour step (`step >= 3`).
    CompareSwap,
    /// Steps 2 and 1 of a stage in one pass.
    Fused,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PassSpec {
    pub stage: u32,
    /// First network step the pass executes (2 for fused passes, which also run step 1).
    pub step: u32,
    pub kind: PassKind,
}

/// Pass schedule for one padded sort.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SortPlan {
    pub geometry: SortGeometry,
    pub passes: Vec<PassSpec>,
}

impl SortPlan {
    pub fn new(n_logical: u32) -> Result<Self> {
        let geometry = SortGeometry::new(n_logical)?;
        let mut passes = Vec::new();
        passes.push(PassSpec {
            stage: 1,
            step: 1,
            kind: PassKind::Preprocess,
        });
        for stage in 2..=geometry.stages {
            for step in (3..=stage).rev() {
                passes.push(PassSpec {
                    stage,
                    step,
                    kind: PassKind::CompareSwap,
                });
            }
            passes.push(PassSpec {
                stage,
                step: 2,
                kind: PassKind::Fused,
            });
        }
        Ok(SortPlan { geometry, passes })
    }

    pub fn n_logical(&self) -> u32 {
        self.geometry.n_logical
    }

    pub fn stages(&self) -> u32 {
        self.geometry.stages
    }

    /// Passes after preprocessing: `x (x - 1) / 2`.
    pub fn compare_passes(&self) -> usize {
        self.passes.len() - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_counts() {
        for x in 2..=20u32 {
            let plan = SortPlan::new(1 << x).unwrap();
            assert_eq!(plan.compare_passes() as u32, x * (x - 1) / 2);
            let pre = plan.passes.iter().filter(|p| p.kind == PassKind::Preprocess).count();
            assert_eq!(pre, 1);
            for stage in 2..=x {
                let n = plan.passes.iter().filter(|p| p.stage == stage).count() as u32;
                assert_eq!(n, stage - 1);
                let last = plan.passes.iter().rev().find(|p| p.stage == stage).unwrap();
                assert_eq!(last.kind, PassKind::Fused);
            }
        }
        assert_eq!(SortPlan::new(1 << 20).unwrap().compare_passes(), 190);
    }

    #[test]
    fn steps_descend_within_stage() {
        let plan = SortPlan::new(64).unwrap();
        let s5: Vec<u32> = plan.passes.iter().filter(|p| p.stage == 5).map(|p| p.step).collect();
        assert_eq!(s5, [5, 4, 3, 2]);
    }
}
