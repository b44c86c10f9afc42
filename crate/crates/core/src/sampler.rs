//! Metropolis-Hastings within Gibbs over the spectral mixture.
//!
//! A sweep resamples the CRP assignments, then the component parameters, then
//! proposes every frequency `ω_j* ~ N(μ_{Z_j}, Σ_{Z_j})` in random order. The
//! proposal is the prior factor of `ω_j`, so the acceptance ratio reduces to
//! the ratio of marginal likelihoods of the data under the two designs.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classification::{fit_laplace, sample_beta_laplace, DrawCache, LaplacePosterior, LogisticPrior};
use crate::data::Task;
use crate::design::{frequency_columns, Design};
use crate::error::{check_dim, BankError, Result};
use crate::predictor::{Ensemble, HeadPrior, Member, Prediction};
use crate::regression::{fit_posterior, NigPrior, RegressionPosterior, SwapProposal};
use crate::rff::FrequencyMatrix;
use crate::scalar::Scalar;
use crate::spectral::{gibbs_sample_assignments, resample_components, NiwParams, NiwPrior, SpectralState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ProposalMode {
    /// One frequency at a time.
    #[default]
    PerFrequency,
    /// All of `W` at once; mixes poorly for large `M`.
    FullBlock,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig<T> {
    pub n_iters: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub n_frequencies: usize,
    /// Number of `β` draws for the classification evidence ratio.
    pub n_draws: usize,
    pub seed: u64,
    pub task: Task,
    /// `None` uses `μ0 = 0, κ0 = 1, Ψ0 = I, ν0 = d + 2`.
    pub niw: Option<NiwPrior<T>>,
    pub alpha: T,
    pub nig: NigPrior<T>,
    pub logistic: LogisticPrior<T>,
    pub proposal_mode: ProposalMode,
    /// Score regression swaps through the bordered Cholesky update instead of
    /// refitting.
    pub fast_swaps: bool,
    /// Points used for the median pairwise distance at initialization.
    pub init_subsample: usize,
}

impl<T: Scalar> Default for SamplerConfig<T> {
    fn default() -> Self {
        Self {
            n_iters: 200,
            burn_in: 100,
            thin: 5,
            n_frequencies: 500,
            n_draws: 100,
            seed: 0,
            task: Task::Regression,
            niw: None,
            alpha: T::one(),
            nig: NigPrior::default(),
            logistic: LogisticPrior::default(),
            proposal_mode: ProposalMode::PerFrequency,
            fast_swaps: true,
            init_subsample: 1000,
        }
    }
}

impl<T: Scalar> SamplerConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(BankError::InvalidParameter(m));
        if self.burn_in > self.n_iters {
            return bad(format!("burn_in ({}) exceeds n_iters ({})", self.burn_in, self.n_iters));
        }
        if self.thin == 0 {
            return bad("thin must be at least 1".into());
        }
        if self.n_frequencies == 0 {
            return bad("n_frequencies must be at least 1".into());
        }
        if self.n_draws == 0 {
            return bad("n_draws must be at least 1".into());
        }
        if !(self.alpha > T::zero()) || !self.alpha.is_finite() {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if self.init_subsample < 2 {
            return bad("init_subsample must be at least 2".into());
        }
        self.nig.validate()?;
        self.logistic.validate()
    }

    pub fn head_prior(&self) -> HeadPrior<T> {
        match self.task {
            Task::Regression => HeadPrior::Regression(self.nig.clone()),
            Task::Classification => HeadPrior::Classification(self.logistic.clone()),
        }
    }

    pub fn niw_prior(&self, d: usize) -> NiwPrior<T> {
        self.niw.clone().unwrap_or_else(|| NiwParams::default_for(d))
    }

    /// Number of kept snapshots, `⌊(n_iters − burn_in)/thin⌋`.
    pub fn n_kept(&self) -> usize {
        (self.n_iters - self.burn_in) / self.thin
    }
}

/// Diagnostics of one sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepStats<T> {
    pub iteration: usize,
    pub log_evidence: T,
    pub n_components: usize,
    pub accepted: usize,
    pub proposed: usize,
}

impl<T> SweepStats<T> {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot<T> {
    pub stats: SweepStats<T>,
    pub state: SpectralState<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainTrace<T> {
    pub task: Task,
    /// Kept sweeps after burn-in and thinning.
    pub snapshots: Vec<Snapshot<T>>,
    /// Every sweep, including burn-in.
    pub history: Vec<SweepStats<T>>,
    pub final_state: SpectralState<T>,
    pub final_log_evidence: T,
}

impl<T: Scalar> ChainTrace<T> {
    /// Acceptance fraction over the kept part of the chain (all sweeps if none
    /// were kept).
    pub fn acceptance_rate(&self, burn_in: usize) -> f64 {
        let tail: Vec<_> = self.history.iter().filter(|s| s.iteration > burn_in).collect();
        let pool: Vec<&SweepStats<T>> = if tail.is_empty() { self.history.iter().collect() } else { tail };
        let (a, p) = pool.iter().fold((0, 0), |(a, p), s| (a + s.accepted, p + s.proposed));
        if p == 0 {
            0.0
        } else {
            a as f64 / p as f64
        }
    }

    pub fn log_evidence_trace(&self) -> Vec<T> {
        self.history.iter().map(|s| s.log_evidence).collect()
    }
}

enum Model<T> {
    Regression {
        prior: NigPrior<T>,
        post: RegressionPosterior<T>,
        fast: bool,
    },
    Classification {
        prior: LogisticPrior<T>,
        lap: LaplacePosterior<T>,
        cache: DrawCache<T>,
        n_draws: usize,
    },
}

/// What a scored proposal needs to be committed.
enum Pending<T> {
    Swap {
        cos: Vec<T>,
        sin: Vec<T>,
        swap: Option<SwapProposal<T>>,
        refit: Option<RegressionPosterior<T>>,
    },
    Block {
        design: Design<T>,
        refit: Option<RegressionPosterior<T>>,
    },
}

/// Data, current design and cached posterior used to score proposals.
pub struct EvidenceContext<'a, T: Scalar> {
    x: ArrayView2<'a, T>,
    y: ArrayView1<'a, T>,
    design: Design<T>,
    model: Model<T>,
}

impl<'a, T: Scalar> EvidenceContext<'a, T> {
    pub fn new<R: Rng + ?Sized>(
        x: ArrayView2<'a, T>,
        y: ArrayView1<'a, T>,
        w: &FrequencyMatrix<T>,
        config: &SamplerConfig<T>,
        rng: &mut R,
    ) -> Result<Self> {
        check_dim("targets", x.nrows(), y.len())?;
        let design = Design::build(x, w)?;
        let model = match config.task {
            Task::Regression => Model::Regression {
                prior: config.nig.clone(),
                post: fit_posterior(&design, y, &config.nig)?,
                fast: config.fast_swaps,
            },
            Task::Classification => {
                let lap = fit_laplace(&design, y, &config.logistic, None)?;
                let draws = sample_beta_laplace(&lap, config.n_draws, rng);
                Model::Classification {
                    prior: config.logistic.clone(),
                    cache: DrawCache::new(&design, y, draws)?,
                    lap,
                    n_draws: config.n_draws,
                }
            }
        };
        Ok(Self { x, y, design, model })
    }

    /// Log marginal likelihood under the current `W` (Laplace estimate for
    /// classification).
    pub fn log_evidence(&self) -> T {
        match &self.model {
            Model::Regression { post, .. } => post.log_evidence(),
            Model::Classification { lap, .. } => lap.log_evidence(),
        }
    }

    pub fn design(&self) -> &Design<T> {
        &self.design
    }

    /// Fresh `β` draws for the classification ratio; no-op for regression.
    pub fn refresh_draws<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        if let Model::Classification { lap, cache, n_draws, .. } = &mut self.model {
            *cache = DrawCache::new(&self.design, self.y, sample_beta_laplace(lap, *n_draws, rng))?;
        }
        Ok(())
    }

    fn log_ratio(&mut self, j: usize, omega: ArrayView1<'_, T>) -> Result<(T, Pending<T>)> {
        let m = self.design.n_cols() / 2;
        let (cos, sin) = frequency_columns(self.x, omega, m)?;
        match &mut self.model {
            Model::Regression { prior, post, fast } => {
                let current = post.log_evidence();
                if *fast {
                    match post.propose_swap(&self.design, j, &cos, &sin, self.y, prior) {
                        Ok(p) => {
                            let log_r = p.log_evidence() - current;
                            return Ok((
                                log_r,
                                Pending::Swap {
                                    cos,
                                    sin,
                                    swap: Some(p),
                                    refit: None,
                                },
                            ));
                        }
                        Err(BankError::NotPositiveDefinite { .. }) => {
                            log::warn!("bordered swap factor for frequency {j} lost positive definiteness; refitting");
                        }
                        Err(e) => return Err(e),
                    }
                }
                let mut modified = self.design.clone();
                modified.replace_frequency(j, &cos, &sin);
                let refit = fit_posterior(&modified, self.y, prior)?;
                let log_r = refit.log_evidence() - current;
                Ok((
                    log_r,
                    Pending::Swap {
                        cos,
                        sin,
                        swap: None,
                        refit: Some(refit),
                    },
                ))
            }
            Model::Classification { cache, .. } => {
                let log_r =
                    cache.log_ratio_swap(j, m + j, self.design.column(j), self.design.column(m + j), &cos, &sin);
                Ok((
                    log_r,
                    Pending::Swap {
                        cos,
                        sin,
                        swap: None,
                        refit: None,
                    },
                ))
            }
        }
    }

    fn log_ratio_block(&mut self, w: &FrequencyMatrix<T>) -> Result<(T, Pending<T>)> {
        let design = Design::build(self.x, w)?;
        match &self.model {
            Model::Regression { prior, post, .. } => {
                let refit = fit_posterior(&design, self.y, prior)?;
                let log_r = refit.log_evidence() - post.log_evidence();
                Ok((
                    log_r,
                    Pending::Block {
                        design,
                        refit: Some(refit),
                    },
                ))
            }
            Model::Classification { cache, .. } => {
                let r = crate::classification::evidence_ratio_from_draws(
                    design.view(),
                    self.design.view(),
                    self.y,
                    cache.draws(),
                )?;
                Ok((r.ln(), Pending::Block { design, refit: None }))
            }
        }
    }

    fn commit<R: Rng + ?Sized>(&mut self, j: usize, pending: Pending<T>, rng: &mut R) -> Result<()> {
        match pending {
            Pending::Swap { cos, sin, swap, refit } => {
                self.design.replace_frequency(j, &cos, &sin);
                if let Model::Regression { post, .. } = &mut self.model {
                    match (swap, refit) {
                        (Some(p), _) => post.commit_swap(p),
                        (None, Some(r)) => *post = r,
                        (None, None) => unreachable!("regression proposals carry a posterior"),
                    }
                }
            }
            Pending::Block { design, refit } => {
                self.design = design;
                if let (Model::Regression { post, .. }, Some(r)) = (&mut self.model, refit) {
                    *post = r;
                }
            }
        }
        self.refit_classifier(rng)
    }

    fn refit_classifier<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        if let Model::Classification {
            prior,
            lap,
            cache,
            n_draws,
        } = &mut self.model
        {
            *lap = fit_laplace(&self.design, self.y, prior, Some(lap.mode()))?;
            if !lap.converged() {
                log::warn!("logistic mode search did not converge after {} iterations", lap.iterations());
            }
            *cache = DrawCache::new(&self.design, self.y, sample_beta_laplace(lap, *n_draws, rng))?;
        }
        Ok(())
    }
}

/// Scores `ω_j ↦ proposal` and accepts when `u < r`. Exposed so tests can
/// fix the proposal and the uniform.
pub fn mh_step_with_proposal<T: Scalar, R: Rng + ?Sized>(
    state: &mut SpectralState<T>,
    j: usize,
    ctx: &mut EvidenceContext<'_, T>,
    proposal: ArrayView1<'_, T>,
    u: T,
    rng: &mut R,
) -> Result<bool> {
    check_dim("proposed frequency", state.dim(), proposal.len())?;
    if state.frequencies().row(j) == proposal {
        return Ok(true);
    }
    let (log_r, pending) = ctx.log_ratio(j, proposal)?;
    let accept = log_r >= T::zero() || u.ln() < log_r;
    if accept {
        ctx.commit(j, pending, rng)?;
        state.set_frequency(j, proposal)?;
    }
    Ok(accept)
}

/// Proposes `ω_j* ~ N(μ_{Z_j}, Σ_{Z_j})` and accepts with the evidence ratio.
pub fn mh_propose_frequency<T: Scalar, R: Rng + ?Sized>(
    state: &mut SpectralState<T>,
    j: usize,
    ctx: &mut EvidenceContext<'_, T>,
    rng: &mut R,
) -> Result<bool> {
    let proposal = state.component_of(j).sample(rng);
    let u = T::unit_uniform(rng);
    mh_step_with_proposal(state, j, ctx, proposal.view(), u, rng)
}

fn mh_propose_block<T: Scalar, R: Rng + ?Sized>(
    state: &mut SpectralState<T>,
    ctx: &mut EvidenceContext<'_, T>,
    rng: &mut R,
) -> Result<bool> {
    let (m, d) = (state.n_frequencies(), state.dim());
    let mut w = Array2::zeros((m, d));
    for j in 0..m {
        w.row_mut(j).assign(&state.component_of(j).sample(rng));
    }
    let w = FrequencyMatrix::new(w)?;
    let u = T::unit_uniform(rng);
    let (log_r, pending) = ctx.log_ratio_block(&w)?;
    let accept = log_r >= T::zero() || u.ln() < log_r;
    if accept {
        ctx.commit(0, pending, rng)?;
        for j in 0..m {
            state.set_frequency(j, w.row(j))?;
        }
    }
    Ok(accept)
}

/// One sweep: assignments, component parameters, then frequencies.
pub fn gibbs_sweep<T: Scalar, R: Rng + ?Sized>(
    state: &mut SpectralState<T>,
    ctx: &mut EvidenceContext<'_, T>,
    config: &SamplerConfig<T>,
    rng: &mut R,
) -> Result<SweepStats<T>> {
    let prior = config.niw_prior(state.dim());
    gibbs_sample_assignments(state, &prior, rng)?;
    resample_components(state, &prior, rng)?;
    ctx.refresh_draws(rng)?;
    let (mut accepted, mut proposed) = (0, 0);
    match config.proposal_mode {
        ProposalMode::PerFrequency => {
            let mut order: Vec<usize> = (0..state.n_frequencies()).collect();
            order.shuffle(rng);
            for j in order {
                accepted += usize::from(mh_propose_frequency(state, j, ctx, rng)?);
                proposed += 1;
            }
        }
        ProposalMode::FullBlock => {
            accepted += usize::from(mh_propose_block(state, ctx, rng)?);
            proposed += 1;
        }
    }
    Ok(SweepStats {
        iteration: 0,
        log_evidence: ctx.log_evidence(),
        n_components: state.n_components(),
        accepted,
        proposed,
    })
}

/// Median pairwise Euclidean distance over at most `max_points` rows sampled
/// without replacement; 1 when degenerate.
pub fn median_heuristic<T: Scalar, R: Rng + ?Sized>(x: ArrayView2<'_, T>, max_points: usize, rng: &mut R) -> T {
    let n = x.nrows();
    let rows: Vec<usize> = if n > max_points {
        let mut idx = rand::seq::index::sample(rng, n, max_points).into_vec();
        idx.sort_unstable();
        idx
    } else {
        (0..n).collect()
    };
    let mut dists = Vec::with_capacity(rows.len() * rows.len().saturating_sub(1) / 2);
    for (a, &i) in rows.iter().enumerate() {
        for &k in &rows[a + 1..] {
            let d2 = x
                .row(i)
                .iter()
                .zip(x.row(k))
                .fold(T::zero(), |acc, (&p, &q)| acc + (p - q) * (p - q));
            dists.push(d2.sqrt());
        }
    }
    if dists.is_empty() {
        return T::one();
    }
    let mid = dists.len() / 2;
    let (_, med, _) = dists.select_nth_unstable_by(mid, |a, b| a.partial_cmp(b).expect("finite distances"));
    if *med > T::zero() {
        *med
    } else {
        T::one()
    }
}

/// `W` drawn i.i.d. from `N(0, s⁻² I)` with `s` from the median heuristic.
pub fn initial_frequencies<T: Scalar, R: Rng + ?Sized>(
    x: ArrayView2<'_, T>,
    m: usize,
    max_points: usize,
    rng: &mut R,
) -> Result<FrequencyMatrix<T>> {
    let s = median_heuristic(x, max_points, rng);
    let w = Array2::from_shape_simple_fn((m, x.ncols()), || T::standard_normal(rng) / s);
    FrequencyMatrix::new(w)
}

pub fn run_chain<T: Scalar>(x: ArrayView2<'_, T>, y: ArrayView1<'_, T>, config: &SamplerConfig<T>) -> Result<ChainTrace<T>> {
    run_chain_with_progress(x, y, config, |_| {})
}

/// Runs `n_iters` sweeps from the median-heuristic start; `progress` sees every
/// sweep. Deterministic given `config.seed`.
pub fn run_chain_with_progress<T: Scalar, F: FnMut(&SweepStats<T>)>(
    x: ArrayView2<'_, T>,
    y: ArrayView1<'_, T>,
    config: &SamplerConfig<T>,
    mut progress: F,
) -> Result<ChainTrace<T>> {
    config.validate()?;
    check_dim("targets", x.nrows(), y.len())?;
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(BankError::Data("training data must have at least one row and one column".into()));
    }
    if config.task == Task::Classification {
        crate::classification::check_labels(y)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let prior = config.niw_prior(x.ncols());
    check_dim("NIW prior dimension", x.ncols(), prior.dim())?;
    let w = initial_frequencies(x, config.n_frequencies, config.init_subsample, &mut rng)?;
    let mut state = SpectralState::single_component(w, &prior, config.alpha, &mut rng)?;
    let mut ctx = EvidenceContext::new(x, y, state.frequencies(), config, &mut rng)?;

    let mut history = Vec::with_capacity(config.n_iters);
    let mut snapshots = Vec::with_capacity(config.n_kept());
    for it in 1..=config.n_iters {
        let mut stats = gibbs_sweep(&mut state, &mut ctx, config, &mut rng)?;
        stats.iteration = it;
        if !stats.log_evidence.is_finite() {
            return Err(BankError::NonFiniteEvidence {
                iteration: it,
                dump: state_dump(&state, &stats),
            });
        }
        history.push(stats);
        progress(&stats);
        if it > config.burn_in && (it - config.burn_in).is_multiple_of(config.thin) {
            snapshots.push(Snapshot {
                stats,
                state: state.clone(),
            });
        }
    }
    Ok(ChainTrace {
        task: config.task,
        snapshots,
        history,
        final_log_evidence: ctx.log_evidence(),
        final_state: state,
    })
}

fn state_dump<T: Scalar>(state: &SpectralState<T>, stats: &SweepStats<T>) -> String {
    let mut out = format!(
        "log_evidence = {}\nK = {}\ncounts = {:?}\n",
        stats.log_evidence,
        state.n_components(),
        state.counts()
    );
    for (k, c) in state.components().iter().enumerate() {
        out.push_str(&format!("component {k}: mean = {}, cov = {}\n", c.mean(), c.cov()));
    }
    let w = state.frequencies().view();
    let (lo, hi) = w
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(l, h), &v| (l.min(v), h.max(v)));
    out.push_str(&format!("frequency range = [{lo}, {hi}]\n"));
    out
}

/// One member per kept snapshot (or only the final state), each with its own
/// head fitted on the training data.
pub fn ensemble_from_trace<T: Scalar>(
    trace: &ChainTrace<T>,
    x: ArrayView2<'_, T>,
    y: ArrayView1<'_, T>,
    prior: &HeadPrior<T>,
    final_only: bool,
) -> Result<Ensemble<T>> {
    let states: Vec<&SpectralState<T>> = if final_only {
        vec![&trace.final_state]
    } else {
        trace.snapshots.iter().map(|s| &s.state).collect()
    };
    if states.is_empty() {
        return Err(BankError::EmptyTrace);
    }
    let members = states
        .into_iter()
        .map(|s| Member::fit(x, y, vec![s.frequencies().clone()], prior))
        .collect::<Result<Vec<_>>>()?;
    Ensemble::new(prior.task(), members)
}

/// Trace-averaged predictions at `x_new`.
pub fn posterior_predict<T: Scalar>(
    trace: &ChainTrace<T>,
    x: ArrayView2<'_, T>,
    y: ArrayView1<'_, T>,
    x_new: ArrayView2<'_, T>,
    prior: &HeadPrior<T>,
    final_only: bool,
) -> Result<Prediction<T>> {
    ensemble_from_trace(trace, x, y, prior, final_only)?.predict(x_new, false)
}

/// Learned spectral densities of every kept snapshot.
pub fn snapshot_frequencies<T: Scalar>(trace: &ChainTrace<T>) -> Vec<Array1<T>> {
    trace
        .snapshots
        .iter()
        .flat_map(|s| s.state.frequencies().view().rows().into_iter().map(|r| r.to_owned()).collect::<Vec<_>>())
        .collect()
}
