//! Skill-conditioned transition model: a mixture-of-experts Gaussian density
//! over normalized state deltas, trained by maximum likelihood.
//!
//! The model predicts `delta = next[predicted] - state[predicted]` from
//! `(normalize(state[obs]), cond)`, where `cond` is the skill vector during
//! skill discovery and the raw action for the action-conditioned baseline
//! variant. Expert covariances are identity in normalized target space; the
//! log-Jacobian of the target normalization is added so densities are
//! comparable in raw delta units.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::nn::{AdamState, Mlp, MlpGrads};
use crate::rng::RngStream;
use crate::scalar::Scalar;
use crate::tape::Tape;

const STD_FLOOR: f64 = 1e-6;
const LN_2PI: f64 = 1.8378770664093453;

/// Running mean/variance accumulator with a freeze flag. Unfitted and
/// unfrozen accumulators refuse to normalize; a frozen empty accumulator
/// behaves as the identity (mean 0, std 1).
#[derive(Debug, Clone)]
pub struct Normalizer<S: Scalar> {
    dim: usize,
    count: u64,
    mean: Array1<S>,
    m2: Array1<S>,
    frozen: bool,
}

impl<S: Scalar> Normalizer<S> {
    pub fn new(dim: usize) -> Self {
        Normalizer {
            dim,
            count: 0,
            mean: Array1::zeros(dim),
            m2: Array1::zeros(dim),
            frozen: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    /// Usable for normalization: fitted at least once or explicitly frozen.
    pub fn is_ready(&self) -> bool {
        self.frozen || self.count > 0
    }

    pub fn reset(&mut self) {
        self.count = 0;
        self.mean.fill(S::zero());
        self.m2.fill(S::zero());
        self.frozen = false;
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    /// Merge a batch of rows into the running statistics (Chan/Welford).
    pub fn update_rows(&mut self, rows: &Array2<S>) {
        assert!(!self.frozen, "normalizer is frozen");
        assert_eq!(rows.ncols(), self.dim, "normalizer dim mismatch");
        let nb = rows.nrows() as u64;
        if nb == 0 {
            return;
        }
        let nb_s = S::from_f64(nb as f64);
        let mut batch_mean = Array1::<S>::zeros(self.dim);
        for row in rows.rows() {
            batch_mean += &row;
        }
        batch_mean.mapv_inplace(|v| v / nb_s);
        let mut batch_m2 = Array1::<S>::zeros(self.dim);
        for row in rows.rows() {
            for j in 0..self.dim {
                let d = row[j] - batch_mean[j];
                batch_m2[j] += d * d;
            }
        }
        let n = self.count as f64;
        let m = nb as f64;
        let total = S::from_f64(n + m);
        let w_old = S::from_f64(n);
        let w_new = S::from_f64(m);
        for j in 0..self.dim {
            let delta = batch_mean[j] - self.mean[j];
            self.mean[j] += delta * w_new / total;
            self.m2[j] += batch_m2[j] + delta * delta * w_old * w_new / total;
        }
        self.count += nb;
    }

    pub fn mean(&self) -> &Array1<S> {
        &self.mean
    }

    /// Per-coordinate standard deviation, floored away from zero. Identity
    /// scale when nothing has been accumulated.
    pub fn std(&self) -> Array1<S> {
        if self.count == 0 {
            return Array1::from_elem(self.dim, S::one());
        }
        let n = S::from_f64(self.count as f64);
        let floor = S::from_f64(STD_FLOOR);
        self.m2.mapv(|m2| {
            let s = (m2 / n).sqrt();
            if s > floor {
                s
            } else {
                floor
            }
        })
    }

    /// Raw second-moment accumulator, for exact state capture.
    pub fn m2(&self) -> &Array1<S> {
        &self.m2
    }

    /// Reinstates a previously captured exact state.
    pub fn restore(dim: usize, count: u64, mean: Array1<S>, m2: Array1<S>, frozen: bool) -> Self {
        assert_eq!(mean.len(), dim);
        assert_eq!(m2.len(), dim);
        Normalizer {
            dim,
            count,
            mean,
            m2,
            frozen,
        }
    }

    /// Overrides the statistics and freezes. Used by tests and checkpoints.
    pub fn set_frozen(&mut self, mean: Array1<S>, std: Array1<S>, count: u64) {
        assert_eq!(mean.len(), self.dim);
        assert_eq!(std.len(), self.dim);
        self.mean = mean;
        // store m2 consistent with the requested std
        let n = if count == 0 { 1 } else { count };
        let n_s = S::from_f64(n as f64);
        self.m2 = std.mapv(|s| s * s * n_s);
        self.count = n;
        self.frozen = true;
    }

    pub fn normalize(&self, x: &Array1<S>) -> Array1<S> {
        let std = self.std();
        Array1::from_iter(
            x.iter()
                .zip(self.mean.iter())
                .zip(std.iter())
                .map(|((&v, &m), &s)| (v - m) / s),
        )
    }

    pub fn normalize_rows(&self, rows: &Array2<S>) -> Array2<S> {
        let std = self.std();
        let mut out = rows.clone();
        for mut row in out.rows_mut() {
            for j in 0..self.dim {
                row[j] = (row[j] - self.mean[j]) / std[j];
            }
        }
        out
    }

    pub fn denormalize(&self, y: &Array1<S>) -> Array1<S> {
        let std = self.std();
        Array1::from_iter(
            y.iter()
                .zip(self.mean.iter())
                .zip(std.iter())
                .map(|((&v, &m), &s)| v * s + m),
        )
    }

    /// `-sum(ln sigma)`: the change-of-variables term for densities of
    /// normalized variables expressed in raw units.
    pub fn log_jacobian(&self) -> S {
        let std = self.std();
        -std.iter().fold(S::zero(), |acc, &s| acc + s.ln())
    }
}

/// Training example: `(state, conditioner, next_state)`.
pub type Example<'a, S> = (&'a Array1<S>, &'a Array1<S>, &'a Array1<S>);

#[derive(Debug, Clone)]
pub struct SkillDynamics<S: Scalar> {
    state_dim: usize,
    cond_dim: usize,
    obs_idx: Vec<usize>,
    predicted_idx: Vec<usize>,
    trunk: Mlp<S>,
    expert_heads: Vec<Mlp<S>>,
    gating: Mlp<S>,
    input_norm: Normalizer<S>,
    target_norm: Normalizer<S>,
}

impl<S: Scalar> SkillDynamics<S> {
    /// `obs_idx` selects the model's state observation; `predicted_idx` the
    /// coordinates whose deltas are modeled. Hidden sizes follow `hidden`,
    /// with `experts` Gaussian experts on top.
    pub fn new(
        state_dim: usize,
        cond_dim: usize,
        obs_idx: Vec<usize>,
        predicted_idx: Vec<usize>,
        hidden: &[usize],
        experts: usize,
        rng: &mut RngStream,
    ) -> Self {
        assert!(experts >= 1, "need at least one expert");
        assert!(!hidden.is_empty(), "need at least one hidden layer");
        assert!(obs_idx.iter().all(|&i| i < state_dim), "obs index out of range");
        assert!(
            predicted_idx.iter().all(|&i| i < state_dim),
            "predicted index out of range"
        );
        let in_dim = obs_idx.len() + cond_dim;
        let target_dim = predicted_idx.len();
        let mut trunk_sizes = vec![in_dim];
        trunk_sizes.extend_from_slice(hidden);
        let trunk = Mlp::new(&trunk_sizes, rng);
        let h_out = *hidden.last().unwrap();
        let expert_heads = (0..experts).map(|_| Mlp::new(&[h_out, target_dim], rng)).collect();
        let gating = Mlp::new(&[h_out, experts], rng);
        let input_norm = Normalizer::new(obs_idx.len());
        SkillDynamics {
            state_dim,
            cond_dim,
            obs_idx,
            predicted_idx,
            trunk,
            expert_heads,
            gating,
            input_norm,
            target_norm: Normalizer::new(target_dim),
        }
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn cond_dim(&self) -> usize {
        self.cond_dim
    }

    pub fn expert_count(&self) -> usize {
        self.expert_heads.len()
    }

    pub fn obs_idx(&self) -> &[usize] {
        &self.obs_idx
    }

    pub fn predicted_idx(&self) -> &[usize] {
        &self.predicted_idx
    }

    pub fn trunk(&self) -> &Mlp<S> {
        &self.trunk
    }

    pub fn expert_head(&self, e: usize) -> &Mlp<S> {
        &self.expert_heads[e]
    }

    pub fn gating(&self) -> &Mlp<S> {
        &self.gating
    }

    pub fn input_norm(&self) -> &Normalizer<S> {
        &self.input_norm
    }

    pub fn target_norm(&self) -> &Normalizer<S> {
        &self.target_norm
    }

    pub fn input_norm_mut(&mut self) -> &mut Normalizer<S> {
        &mut self.input_norm
    }

    pub fn target_norm_mut(&mut self) -> &mut Normalizer<S> {
        &mut self.target_norm
    }

    pub fn trunk_mut(&mut self) -> &mut Mlp<S> {
        &mut self.trunk
    }

    pub fn expert_head_mut(&mut self, e: usize) -> &mut Mlp<S> {
        &mut self.expert_heads[e]
    }

    pub fn gating_mut(&mut self) -> &mut Mlp<S> {
        &mut self.gating
    }

    /// Parameter groups in optimizer order: trunk, each expert head, gating.
    pub fn nets(&self) -> Vec<&Mlp<S>> {
        let mut nets = vec![&self.trunk];
        nets.extend(self.expert_heads.iter());
        nets.push(&self.gating);
        nets
    }

    pub fn obs_of(&self, state: &Array1<S>) -> Array1<S> {
        Array1::from_iter(self.obs_idx.iter().map(|&i| state[i]))
    }

    pub fn delta_of(&self, state: &Array1<S>, next: &Array1<S>) -> Array1<S> {
        Array1::from_iter(self.predicted_idx.iter().map(|&i| next[i] - state[i]))
    }

    fn check_ready(&self) -> Result<()> {
        if !self.input_norm.is_ready() || !self.target_norm.is_ready() {
            return Err(Error::Uninitialized(
                "skill-dynamics normalizers have not been fitted or frozen",
            ));
        }
        Ok(())
    }

    fn check_example(&self, state: &Array1<S>, cond: &Array1<S>, next: &Array1<S>) -> Result<()> {
        if state.len() != self.state_dim {
            return Err(Error::shape("dynamics state", self.state_dim, state.len()));
        }
        if next.len() != self.state_dim {
            return Err(Error::shape("dynamics next_state", self.state_dim, next.len()));
        }
        if cond.len() != self.cond_dim {
            return Err(Error::shape("dynamics conditioner", self.cond_dim, cond.len()));
        }
        Ok(())
    }

    /// Re-estimates both normalizers from scratch on `examples` and freezes
    /// them. Called once per training iteration on the fresh batch.
    pub fn refit_normalizers(&mut self, examples: &[Example<'_, S>]) -> Result<()> {
        if examples.is_empty() {
            return Err(Error::InvalidArgument("refit_normalizers: empty batch".into()));
        }
        let n = examples.len();
        let mut obs = Array2::zeros((n, self.obs_idx.len()));
        let mut deltas = Array2::zeros((n, self.predicted_idx.len()));
        for (r, (s, c, s2)) in examples.iter().enumerate() {
            self.check_example(s, c, s2)?;
            let o = self.obs_of(s);
            let d = self.delta_of(s, s2);
            for j in 0..o.len() {
                obs[(r, j)] = o[j];
            }
            for j in 0..d.len() {
                deltas[(r, j)] = d[j];
            }
        }
        self.input_norm.reset();
        self.input_norm.update_rows(&obs);
        self.input_norm.freeze();
        self.target_norm.reset();
        self.target_norm.update_rows(&deltas);
        self.target_norm.freeze();
        Ok(())
    }

    fn model_input(&self, state: &Array1<S>, cond: &Array1<S>) -> Array1<S> {
        let obs = self.input_norm.normalize(&self.obs_of(state));
        let mut v = Vec::with_capacity(obs.len() + cond.len());
        v.extend(obs.iter().copied());
        v.extend(cond.iter().copied());
        Array1::from(v)
    }

    /// Gating weights (softmax, sums to 1) and per-expert means in
    /// normalized target space.
    pub fn mixture_params(&self, state: &Array1<S>, cond: &Array1<S>) -> Result<(Array1<S>, Vec<Array1<S>>)> {
        self.check_ready()?;
        self.check_example(state, cond, state)?;
        let input = self.model_input(state, cond);
        let mut h = self.trunk.forward(&input)?;
        h.mapv_inplace(|x| if x > S::zero() { x } else { S::zero() });
        let logits = self.gating.forward(&h)?;
        let lse = crate::scalar::logsumexp(logits.as_slice().expect("contiguous"));
        let weights = logits.mapv(|g| (g - lse).exp());
        let means = self
            .expert_heads
            .iter()
            .map(|head| head.forward(&h))
            .collect::<Result<Vec<_>>>()?;
        Ok((weights, means))
    }

    /// `log q(next | state, cond)` in raw delta units.
    pub fn log_prob(&self, state: &Array1<S>, cond: &Array1<S>, next: &Array1<S>) -> Result<S> {
        self.check_ready()?;
        self.check_example(state, cond, next)?;
        let (weights, means) = self.mixture_params(state, cond)?;
        let y = self.target_norm.normalize(&self.delta_of(state, next));
        let k = y.len() as f64;
        let mut terms = Vec::with_capacity(means.len());
        for (e, m) in means.iter().enumerate() {
            let mut sq = S::zero();
            for j in 0..y.len() {
                let d = y[j] - m[j];
                sq += d * d;
            }
            terms.push(weights[e].ln() - S::from_f64(0.5) * sq);
        }
        let logq = crate::scalar::logsumexp(&terms) - S::from_f64(0.5 * k * LN_2PI)
            + self.target_norm.log_jacobian();
        if !logq.is_finite() {
            return Err(Error::NonFinite("skill-dynamics log_prob".into()));
        }
        Ok(logq)
    }

    /// Row-batched `log q`: `states`/`nexts` are `(n, state_dim)`, `conds`
    /// is `(n, cond_dim)`. The heavy lifting is three gemm-backed forward
    /// passes; the mixture combination is done per row.
    pub fn log_prob_rows(
        &self,
        states: &Array2<S>,
        conds: &Array2<S>,
        nexts: &Array2<S>,
    ) -> Result<Array1<S>> {
        self.check_ready()?;
        let n = states.nrows();
        if conds.nrows() != n || nexts.nrows() != n {
            return Err(Error::shape("log_prob_rows row counts", n, conds.nrows().min(nexts.nrows())));
        }
        if states.ncols() != self.state_dim || nexts.ncols() != self.state_dim {
            return Err(Error::shape("log_prob_rows state dim", self.state_dim, states.ncols()));
        }
        if conds.ncols() != self.cond_dim {
            return Err(Error::shape("log_prob_rows cond dim", self.cond_dim, conds.ncols()));
        }
        let obs_dim = self.obs_idx.len();
        let mut inputs = Array2::zeros((n, obs_dim + self.cond_dim));
        let in_mean = self.input_norm.mean().clone();
        let in_std = self.input_norm.std();
        for r in 0..n {
            for (j, &i) in self.obs_idx.iter().enumerate() {
                inputs[(r, j)] = (states[(r, i)] - in_mean[j]) / in_std[j];
            }
            for j in 0..self.cond_dim {
                inputs[(r, obs_dim + j)] = conds[(r, j)];
            }
        }
        let mut h = self.trunk.forward_batch(&inputs)?;
        h.mapv_inplace(|x| if x > S::zero() { x } else { S::zero() });
        let logits = self.gating.forward_batch(&h)?;
        let means: Vec<Array2<S>> = self
            .expert_heads
            .iter()
            .map(|head| head.forward_batch(&h))
            .collect::<Result<Vec<_>>>()?;

        let k = self.predicted_idx.len();
        let t_mean = self.target_norm.mean().clone();
        let t_std = self.target_norm.std();
        let jac = self.target_norm.log_jacobian();
        let half = S::from_f64(0.5);
        let const_term = S::from_f64(0.5 * k as f64 * LN_2PI);
        let e_count = self.expert_heads.len();
        let mut out = Array1::zeros(n);
        let mut terms = vec![S::zero(); e_count];
        let mut y = vec![S::zero(); k];
        for r in 0..n {
            for (j, &i) in self.predicted_idx.iter().enumerate() {
                y[j] = ((nexts[(r, i)] - states[(r, i)]) - t_mean[j]) / t_std[j];
            }
            let mut lse_g = S::neg_infinity();
            for e in 0..e_count {
                if logits[(r, e)] > lse_g {
                    lse_g = logits[(r, e)];
                }
            }
            let mut acc = S::zero();
            for e in 0..e_count {
                acc += (logits[(r, e)] - lse_g).exp();
            }
            let lse_logits = lse_g + acc.ln();
            for e in 0..e_count {
                let mut sq = S::zero();
                for j in 0..k {
                    let d = y[j] - means[e][(r, j)];
                    sq += d * d;
                }
                terms[e] = (logits[(r, e)] - lse_logits) - half * sq;
            }
            let v = crate::scalar::logsumexp(&terms) - const_term + jac;
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("log_prob_rows at row {r}")));
            }
            out[r] = v;
        }
        Ok(out)
    }

    /// One Adam step on the mean negative log-likelihood of `examples`.
    /// Returns the pre-step loss.
    pub fn fit_step(&mut self, examples: &[Example<'_, S>], adam: &mut AdamState<S>) -> Result<S> {
        if examples.is_empty() {
            return Err(Error::InvalidArgument("fit_step: empty batch".into()));
        }
        self.check_ready()?;
        let mut tape = Tape::new();
        let trunk_vars = self.trunk.bind(&mut tape);
        let head_vars: Vec<_> = self.expert_heads.iter().map(|h| h.bind(&mut tape)).collect();
        let gating_vars = self.gating.bind(&mut tape);

        let k = self.predicted_idx.len();
        let const_term = 0.5 * k as f64 * LN_2PI;
        let jac = self.target_norm.log_jacobian();
        let mut per_sample = Vec::with_capacity(examples.len());
        for (s, c, s2) in examples {
            self.check_example(s, c, s2)?;
            let input = tape.constant(self.model_input(s, c));
            let y = tape.constant(self.target_norm.normalize(&self.delta_of(s, s2)));
            let trunk_out = self.trunk.forward_tape(&mut tape, &trunk_vars, input);
            let h = tape.relu(trunk_out);
            let logits = self.gating.forward_tape(&mut tape, &gating_vars, h);
            let mut scaled = Vec::with_capacity(head_vars.len());
            for (head, vars) in self.expert_heads.iter().zip(&head_vars) {
                let m = head.forward_tape(&mut tape, vars, h);
                let d = tape.sub(y, m);
                let sq = tape.sum_squares(d);
                scaled.push(tape.scale(sq, S::from_f64(-0.5)));
            }
            let penalties = tape.stack(&scaled);
            let t = tape.add(logits, penalties);
            let lse_t = tape.logsumexp(t);
            let lse_g = tape.logsumexp(logits);
            let logq_norm = tape.sub(lse_t, lse_g);
            let logq = tape.offset(logq_norm, jac - S::from_f64(const_term));
            per_sample.push(logq);
        }
        let mean_logq = tape.mean_of(&per_sample);
        let loss = tape.neg(mean_logq);
        let loss_value = tape.scalar_value(loss);
        let grads = tape.backward(loss)?;

        let mut grad_list: Vec<MlpGrads<S>> = Vec::with_capacity(2 + head_vars.len());
        grad_list.push(self.trunk.grads_from(&grads, &trunk_vars));
        for (head, vars) in self.expert_heads.iter().zip(&head_vars) {
            grad_list.push(head.grads_from(&grads, vars));
        }
        grad_list.push(self.gating.grads_from(&grads, &gating_vars));

        let mut nets: Vec<&mut Mlp<S>> = vec![&mut self.trunk];
        nets.extend(self.expert_heads.iter_mut());
        nets.push(&mut self.gating);
        adam.apply(&mut nets, &grad_list)?;
        Ok(loss_value)
    }

    /// Expected-value next state: predicted coordinates advance by the
    /// de-normalized gating-weighted mean delta; everything else is copied.
    pub fn predict_next(&self, state: &Array1<S>, cond: &Array1<S>) -> Result<Array1<S>> {
        let (weights, means) = self.mixture_params(state, cond)?;
        let k = self.predicted_idx.len();
        let mut mixed = Array1::zeros(k);
        for (e, m) in means.iter().enumerate() {
            for j in 0..k {
                mixed[j] += weights[e] * m[j];
            }
        }
        let delta = self.target_norm.denormalize(&mixed);
        let mut next = state.clone();
        for (j, &i) in self.predicted_idx.iter().enumerate() {
            next[i] += delta[j];
        }
        Ok(next)
    }

    /// Row-batched expected-value prediction; `states` is `(n, state_dim)`.
    pub fn predict_next_batch(&self, states: &Array2<S>, conds: &Array2<S>) -> Result<Array2<S>> {
        self.check_ready()?;
        let n = states.nrows();
        if conds.nrows() != n {
            return Err(Error::shape("predict_next_batch rows", n, conds.nrows()));
        }
        if states.ncols() != self.state_dim {
            return Err(Error::shape("predict_next_batch state dim", self.state_dim, states.ncols()));
        }
        if conds.ncols() != self.cond_dim {
            return Err(Error::shape("predict_next_batch cond dim", self.cond_dim, conds.ncols()));
        }
        let obs_dim = self.obs_idx.len();
        let mut inputs = Array2::zeros((n, obs_dim + self.cond_dim));
        let in_mean = self.input_norm.mean().clone();
        let in_std = self.input_norm.std();
        for r in 0..n {
            for (j, &i) in self.obs_idx.iter().enumerate() {
                inputs[(r, j)] = (states[(r, i)] - in_mean[j]) / in_std[j];
            }
            for j in 0..self.cond_dim {
                inputs[(r, obs_dim + j)] = conds[(r, j)];
            }
        }
        let mut h = self.trunk.forward_batch(&inputs)?;
        h.mapv_inplace(|x| if x > S::zero() { x } else { S::zero() });
        let logits = self.gating.forward_batch(&h)?;
        let means: Vec<Array2<S>> = self
            .expert_heads
            .iter()
            .map(|head| head.forward_batch(&h))
            .collect::<Result<Vec<_>>>()?;

        let t_mean = self.target_norm.mean().clone();
        let t_std = self.target_norm.std();
        let e_count = self.expert_heads.len();
        let mut next = states.clone();
        for r in 0..n {
            let mut lse = S::neg_infinity();
            for e in 0..e_count {
                if logits[(r, e)] > lse {
                    lse = logits[(r, e)];
                }
            }
            let mut denom = S::zero();
            for e in 0..e_count {
                denom += (logits[(r, e)] - lse).exp();
            }
            for (j, &i) in self.predicted_idx.iter().enumerate() {
                let mut mixed = S::zero();
                for e in 0..e_count {
                    let w = (logits[(r, e)] - lse).exp() / denom;
                    mixed += w * means[e][(r, j)];
                }
                next[(r, i)] = next[(r, i)] + mixed * t_std[j] + t_mean[j];
            }
        }
        Ok(next)
    }

    /// Stochastic next state: draws an expert from the gating distribution,
    /// then a unit-covariance Gaussian sample around its mean.
    pub fn sample_next(
        &self,
        state: &Array1<S>,
        cond: &Array1<S>,
        rng: &mut RngStream,
    ) -> Result<Array1<S>> {
        let (weights, means) = self.mixture_params(state, cond)?;
        let u = S::from_f64(rng.uniform());
        let mut acc = S::zero();
        let mut pick = means.len() - 1;
        for (e, &w) in weights.iter().enumerate() {
            acc += w;
            if u < acc {
                pick = e;
                break;
            }
        }
        let k = self.predicted_idx.len();
        let mut y = Array1::zeros(k);
        for j in 0..k {
            y[j] = means[pick][j] + S::from_f64(rng.normal());
        }
        let delta = self.target_norm.denormalize(&y);
        let mut next = state.clone();
        for (j, &i) in self.predicted_idx.iter().enumerate() {
            next[i] += delta[j];
        }
        Ok(next)
    }
}
