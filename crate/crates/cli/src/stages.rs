//! Building the finite stages `A[i]` of an experiment.

use anyhow::{anyhow, bail, Context, Result};
use delocspec_core::approximation::{
    build_direct_limit_stage, build_folner_compression, build_inverse_limit_stage, choose_lifts,
    compression_element, direct_limit_element, realize_over_finite, reduction_map, stage_classes,
    AmenableSplit, DirectSystem, FiniteRealization, FolnerSet, LiftChoice,
};
use delocspec_core::group::{ConjugacyClassInfo, GroupElement};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{Experiment, SchemeSpec, CLASS_BUDGET};

/// One stage with the images of the tracked elements.
pub struct Stage {
    pub index: u64,
    pub real: FiniteRealization,
    /// Stage classes of the tracked elements, in tracking order.
    pub classes: Vec<ConjugacyClassInfo>,
    pub folner: Option<FolnerSet>,
}

/// Scheme data shared by all stages.
pub enum Scheme {
    Quotient,
    Folner(AmenableSplit),
    Direct(DirectSystem, LiftChoice),
    Finite,
}

impl Scheme {
    pub fn prepare(exp: &Experiment) -> Result<Self> {
        Ok(match &exp.config.scheme {
            SchemeSpec::Quotient => Scheme::Quotient,
            SchemeSpec::Finite => {
                if !exp.group.is_finite() {
                    bail!(
                        "scheme `finite` needs a finite group, got {}",
                        exp.group.describe()
                    );
                }
                Scheme::Finite
            }
            SchemeSpec::Folner => {
                let split = AmenableSplit::new(&exp.group)?;
                if split.rank == 0 {
                    bail!("scheme `folner` needs a free abelian factor");
                }
                for t in &exp.tracked {
                    compression_element(&split, &t.element).map_err(|e| {
anyhow!("cannot track `{}` under Følner compression: {e}; use the `quotient` scheme instead", t.word)
                    })?;
                }
                Scheme::Folner(split)
            }
            SchemeSpec::Prufer { window } => direct(exp, DirectSystem::prufer(*window)?)?,
            SchemeSpec::Collapsing { depth } => {
                direct(exp, DirectSystem::collapsing(&exp.group, *depth)?)?
            }
        })
    }

    pub fn stage(&self, exp: &Experiment, index: u64) -> Result<Stage> {
        let a = &exp.matrix;
        let mut folner = None;
        let (real, images): (FiniteRealization, Vec<GroupElement>) = match self {
            Scheme::Quotient => {
                let n = u32::try_from(index).context("modulus too large")?;
                let p = reduction_map(&exp.group, n)?;
                let real = build_inverse_limit_stage(a, &p, index as usize)?;
                let images = exp
                    .tracked
                    .iter()
                    .map(|t| p.apply(&t.element))
                    .collect::<Result<_, _>>()?;
                (real, images)
            }
            Scheme::Folner(split) => {
                let fs = FolnerSet::box_set(index as usize, split.rank, index as usize)?;
                let real = build_folner_compression(a, &fs)?;
                let images = exp
                    .tracked
                    .iter()
                    .map(|t| compression_element(split, &t.element))
                    .collect::<Result<_, _>>()?;
                folner = Some(fs);
                (real, images)
            }
            Scheme::Direct(sys, choice) => {
                let i = index as usize;
                let real = build_direct_limit_stage(a, sys, choice, i)?;
                let images = exp
                    .tracked
                    .iter()
                    .map(|t| direct_limit_element(sys, choice, &t.element, i))
                    .collect::<Result<_, _>>()?;
                (real, images)
            }
            Scheme::Finite => {
                let real = realize_over_finite(a, 0, a.kappa().kappa)?;
                (
                    real,
                    exp.tracked.iter().map(|t| t.element.clone()).collect(),
                )
            }
        };
        let classes = stage_classes(&real.group, &images, CLASS_BUDGET)?;
        Ok(Stage {
            index,
            real,
            classes,
            folner,
        })
    }
}

fn direct(exp: &Experiment, sys: DirectSystem) -> Result<Scheme> {
    if sys.target != exp.group {
        bail!(
            "the direct system lives on {}, but the config group is {}",
            sys.target.describe(),
            exp.group.describe()
        );
    }
    let mut needed = exp.matrix.support();
    needed.extend(exp.tracked.iter().map(|t| t.element.clone()));
    needed.sort();
    needed.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(exp.config.seed);
    let choice = choose_lifts(&sys, &needed, &mut rng)?;
    Ok(Scheme::Direct(sys, choice))
}

/// Runs `f` on every stage, in parallel unless the experiment is
/// reproducible; results keep stage order either way.
pub fn map_stages<T: Send>(
    exp: &Experiment,
    f: impl Fn(u64) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    if exp.config.reproducible {
        exp.stages
            .iter()
            .map(|&i| f(i).with_context(|| format!("stage {i}")))
            .collect()
    } else {
        exp.stages
            .par_iter()
            .map(|&i| f(i).with_context(|| format!("stage {i}")))
            .collect()
    }
}
