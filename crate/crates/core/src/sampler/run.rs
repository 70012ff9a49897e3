use std::time::Instant;

use rayon::prelude::*;

use super::{mh_block_sweep, LinkModel, LinkageState, PairScorer, PermutationSet, SamplerError, SwapStats};
use crate::data::{BlockIndex, DataFile};
use crate::formula::{Family, ModelChain};
use crate::glm::{sample_theta_normal, sample_theta_rw, GlmError, KernelConfig, ModelParams, RwState, Theta};
use crate::rng::{stream, StreamKind};

/// Consecutive iterations a model may keep its parameters because its design
/// was rank deficient before the run aborts.
pub const SINGULAR_PATIENCE: usize = 25;

#[derive(Clone, Debug, PartialEq)]
pub struct SamplerConfig {
    /// Number of exported permutation samples.
    pub samples: usize,
    /// Inner kernel iterations per parameter update.
    pub theta_iterations: usize,
    /// Swap proposals per slot per iteration.
    pub mh_multiplier: usize,
    pub burnin: usize,
    /// Iterations between exported samples.
    pub interval: usize,
    pub seed: u64,
    pub threads: usize,
    pub target_acceptance: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            samples: 10,
            theta_iterations: 50,
            mh_multiplier: 5,
            burnin: 200,
            interval: 20,
            seed: 0,
            threads: 1,
            target_acceptance: 0.44,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        let check = |ok: bool, what: &str| if ok { Ok(()) } else { Err(SamplerError::Config(what.to_string())) };
        check(self.samples >= 1, "samples must be at least 1")?;
        check(self.theta_iterations >= 1, "theta iterations must be at least 1")?;
        check(self.mh_multiplier >= 1, "MH multiplier must be at least 1")?;
        check(self.interval >= 1, "thinning interval must be at least 1")?;
        check(self.threads >= 1, "threads must be at least 1")?;
        check(
            self.target_acceptance > 0.0 && self.target_acceptance < 1.0,
            "target acceptance must lie in (0, 1)",
        )?;
        check(self.total_iterations() <= u32::MAX as usize, "too many iterations")
    }

    /// Outer iterations needed to export every sample.
    pub fn total_iterations(&self) -> usize {
        self.burnin + (self.samples - 1) * self.interval + 1
    }

    /// Whether outer iteration `t` (1-based) is exported.
    pub fn exports(&self, t: usize) -> bool {
        t > self.burnin && (t - self.burnin - 1).is_multiple_of(self.interval)
    }
}

/// Diagnostics of a finished run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub blocks: usize,
    pub linkable_blocks: usize,
    pub degenerate_blocks: usize,
    pub iterations: usize,
    pub mean_iteration_secs: f64,
    /// Post-burn-in acceptance rate of each random-walk model; `None` for
    /// Normal models.
    pub model_acceptance: Vec<Option<f64>>,
    pub swap_acceptance: f64,
    /// Parameter updates skipped because of a rank-deficient design.
    pub singular_skips: usize,
}

#[derive(Clone, Debug)]
pub struct SampleOutput {
    pub permutations: PermutationSet,
    pub theta: Theta,
    pub summary: RunSummary,
}

/// Runs the Gibbs sampler over linkages and model parameters.
///
/// Each outer iteration updates every model's parameters given the current
/// linkage (imputed slots included), then performs swap proposals in every
/// block followed by a redraw of the imputed slots. Blocks and models draw
/// from their own streams, so output depends on the seed only.
pub fn run(
    a: &DataFile,
    b: &DataFile,
    chain: &ModelChain,
    config: &SamplerConfig,
) -> Result<SampleOutput, SamplerError> {
    config.validate()?;
    let index = BlockIndex::build(a, b);
    let model = LinkModel::new(chain, a, b);
    let mut state = LinkageState::initialize(&index, config.seed);
    if state.blocks.is_empty() {
        return Err(SamplerError::NoLinkableBlocks);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| SamplerError::Config(e.to_string()))?;

    let mut theta = Theta::initial(chain);
    let mut rw: Vec<Option<RwState>> = vec![None; model.len()];
    let mut rw_counts = vec![(0u64, 0u64); model.len()];
    let mut singular_streak = vec![0usize; model.len()];
    let mut singular_skips = 0;
    let mut swaps = SwapStats::default();
    let mut permutations = PermutationSet::new(a.len());
    let total = config.total_iterations();
    let started = Instant::now();

    for t in 1..=total {
        let adapt = t <= config.burnin;
        let kernel = KernelConfig {
            inner_iterations: config.theta_iterations,
            target_acceptance: config.target_acceptance,
            adapt,
        };

        let designs = (0..model.len())
            .map(|p| {
                model
                    .design(p, state.matched_pairs())
                    .map_err(|source| SamplerError::Glm { model: p, source })
            })
            .collect::<Result<Vec<_>, _>>()?;
        for (p, design) in designs.iter().enumerate() {
            if rw[p].is_none() && model.family(p) != Family::Normal {
                rw[p] = Some(RwState::for_design(model.family(p), design));
            }
        }
        let updates: Vec<(Result<ModelParams, GlmError>, Option<RwState>)> = pool.install(|| {
            designs
                .par_iter()
                .zip(theta.models.par_iter())
                .zip(rw.par_iter())
                .enumerate()
                .map(|(p, ((design, params), rw_state))| {
                    let mut rng = stream(config.seed, StreamKind::Model, p, t as u64);
                    match model.family(p) {
                        Family::Normal => (sample_theta_normal(design, &kernel, params, &mut rng), None),
                        family => {
                            let mut st = rw_state.clone().expect("random-walk state");
                            let out = sample_theta_rw(family, design, &params.beta, &kernel, &mut st, &mut rng)
                                .map(|beta| ModelParams { beta, sigma2: None });
                            (out, Some(st))
                        }
                    }
                })
                .collect()
        });
        for (p, (result, new_rw)) in updates.into_iter().enumerate() {
            match result {
                Ok(params) => {
                    theta.models[p] = params;
                    singular_streak[p] = 0;
                    if let Some(st) = new_rw {
                        let old = rw[p].as_ref().expect("random-walk state");
                        if !adapt {
                            rw_counts[p].0 += st.accepted - old.accepted;
                            rw_counts[p].1 += st.proposed - old.proposed;
                        }
                        rw[p] = Some(st);
                    }
                }
                Err(GlmError::Singular) | Err(GlmError::InsufficientRows { .. }) => {
                    singular_skips += 1;
                    singular_streak[p] += 1;
                    if singular_streak[p] > SINGULAR_PATIENCE {
                        return Err(SamplerError::RankDeficient {
                            model: p,
                            response: chain.specs()[p].response.clone(),
                            iteration: t,
                        });
                    }
                }
                Err(source) => return Err(SamplerError::Glm { model: p, source }),
            }
        }

        let scorer = PairScorer::new(&model, &theta);
        let step = pool.install(|| {
            state
                .blocks
                .par_iter_mut()
                .enumerate()
                .map(|(k, block)| {
                    let mut rng = stream(config.seed, StreamKind::Block, k, t as u64);
                    let s = mh_block_sweep(block, &scorer, config.mh_multiplier, &mut rng);
                    block.repad(&mut rng);
                    s
                })
                .reduce(SwapStats::default, |x, y| x + y)
        });
        if !adapt {
            swaps = swaps + step;
        }

        if config.exports(t) {
            permutations.push_state(&state);
        }
    }

    let elapsed = started.elapsed().as_secs_f64();
    let summary = RunSummary {
        blocks: index.len(),
        linkable_blocks: state.blocks.len(),
        degenerate_blocks: index.degenerate_ids().len(),
        iterations: total,
        mean_iteration_secs: elapsed / total as f64,
        model_acceptance: (0..model.len())
            .map(|p| (model.family(p) != Family::Normal).then(|| ratio(rw_counts[p].0, rw_counts[p].1)))
            .collect(),
        swap_acceptance: ratio(swaps.accepted, swaps.proposed),
        singular_skips,
    };
    Ok(SampleOutput {
        permutations,
        theta,
        summary,
    })
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}
