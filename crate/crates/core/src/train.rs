//! Level-wise smoother training: rollout batch generation, the filtered
//! per-level spectral losses, the whole-cycle loss used for comparison
//! runs, and the curriculum loop over decreasing regularization weights.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::adam::{adam_step, AdamState};
use crate::fft::{dft1, dft2, idft1, idft2, CField};
use crate::field::{Field, Shape};
use crate::fno::{fno_backward, fno_forward, FnoCache, FnoConfig, FnoParams};
use crate::hierarchy::build_hierarchy;
use crate::mask::{make_mask_1d, make_mask_2d, FrequencyMask, MaskVariant};
use crate::neural::{nmg_cycle, NeuralHierarchy, SmootherKind};
use crate::par::map_indexed;
use crate::problem::{LinearSystemOp, ProblemSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossMode {
    /// One spectral loss per level; gradients stay within that level.
    Levelwise,
    /// Whole-cycle squared error differentiated into every level jointly.
    Combined,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum FnoScale {
    Desk,
    Full,
    Custom(Vec<FnoConfig>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Grid levels of the training hierarchy.
    pub num_levels: usize,
    pub batch_size: usize,
    /// Rollout cap K: each sample receives a uniform number of error
    /// rollout steps in 1..=K.
    pub rollout_cap: usize,
    /// Epochs per curriculum stage.
    pub epochs: usize,
    pub lr: f64,
    /// The learning rate is halved every this many epochs.
    pub lr_halving_period: usize,
    pub seed: u64,
    /// Regularization weights, strictly decreasing; each stage initializes
    /// from the previous stage's parameters. Empty means the problem's own
    /// alpha only.
    pub curriculum: Vec<f64>,
    pub loss: LossMode,
    pub scale: FnoScale,
    /// Whether the trained cycle applies the level filters.
    pub filtered: bool,
}

impl TrainConfig {
    pub fn desk_default(num_levels: usize, seed: u64) -> TrainConfig {
        TrainConfig {
            num_levels,
            batch_size: 20,
            rollout_cap: 10,
            epochs: 500,
            lr: 1e-3,
            lr_halving_period: 500,
            seed,
            curriculum: vec![],
            loss: LossMode::Levelwise,
            scale: FnoScale::Desk,
            filtered: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.rollout_cap == 0 || self.num_levels < 2 {
            return Err(Error::InvalidArgument(
                "batch_size, rollout_cap >= 1 and num_levels >= 2 required".into(),
            ));
        }
        if self.lr_halving_period == 0 {
            return Err(Error::InvalidArgument("lr_halving_period >= 1".into()));
        }
        for w in self.curriculum.windows(2) {
            if w[1] >= w[0] {
                return Err(Error::InvalidArgument(
                    "curriculum alphas must be strictly decreasing".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainLogEntry {
    pub stage: usize,
    pub alpha: f64,
    pub epoch: usize,
    /// One entry per trained level (levelwise) or a single entry
    /// (combined).
    pub losses: Vec<f64>,
    pub lr: f64,
    pub batch_seed: u64,
}

/// Write a training log as JSON-lines, one record per epoch.
pub fn write_train_log(path: &std::path::Path, log: &[TrainLogEntry]) -> Result<()> {
    use std::io::Write;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for entry in log {
        serde_json::to_writer(&mut w, entry)?;
        writeln!(w)?;
    }
    Ok(())
}

pub struct Batch {
    pub xs: Vec<Field>,
    pub ys: Vec<Field>,
}

/// Draw standard-normal samples, pair with their images under the
/// operator, then apply a random number (1..=K) of rollout steps: replace
/// x by the error remaining after one cycle and refresh y = A x. Cycles
/// use the current smoothers with no gradient tracking.
pub fn generate_batch(
    op: &dyn LinearSystemOp,
    nh: &NeuralHierarchy,
    batch_size: usize,
    rollout_cap: usize,
    seed: u64,
) -> Result<Batch> {
    let shape = op.shape();
    let lp = nh.base.num_levels();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Draw all randomness up front so parallel rollout stays deterministic.
    let seeds: Vec<(Vec<f64>, usize)> = (0..batch_size)
        .map(|_| {
            let x: Vec<f64> = (0..shape.len()).map(|_| rng.sample(StandardNormal)).collect();
            let k = rng.gen_range(1..=rollout_cap);
            (x, k)
        })
        .collect();
    let rolled = map_indexed(batch_size, |i| -> Result<(Field, Field)> {
        let (x0, k) = &seeds[i];
        let mut x = Field::new(x0.clone(), shape)?;
        let mut y = op.apply(&x)?;
        for _ in 0..*k {
            let cycle = nmg_cycle(nh, &Field::zeros(shape), &y, lp)?;
            x = x.sub(&cycle);
            y = op.apply(&x)?;
        }
        Ok((x, y))
    });
    let mut xs = Vec::with_capacity(batch_size);
    let mut ys = Vec::with_capacity(batch_size);
    for r in rolled {
        let (x, y) = r?;
        xs.push(x);
        ys.push(y);
    }
    Ok(Batch { xs, ys })
}

/// One smoothing level's record from a traced cycle. The residual fed to
/// the smoother equals y_l because training cycles start from a zero
/// guess at every level.
struct LevelTrace {
    bnorm: f64,
    /// Normalized input and network output, present for FNO smoothers.
    u: Option<Field>,
    n_out: Option<Field>,
    cache: Option<FnoCache>,
    /// Raw smoother output h = N(b/|b|)|b|.
    h: Field,
    /// Applied correction (filtered h, or h itself when unfiltered).
    c: Field,
}

struct CycleTrace {
    levels: Vec<LevelTrace>,
    /// Full cycle output on the finest grid.
    x_out: Field,
}

fn trace_cycle(nh: &NeuralHierarchy, y: &Field, lp: usize) -> Result<CycleTrace> {
    let mut levels = Vec::with_capacity(lp - 1);
    let mut y_l = y.clone();
    for l in 0..lp - 1 {
        let level = nh.base.level(l)?;
        let b = y_l.clone();
        let bnorm = b.norm2();
        let (u, n_out, cache, h) = match (&nh.smoothers[l], bnorm) {
            (SmootherKind::Fno { config, params }, bn) if bn > 0.0 => {
                let u = b.scaled(1.0 / bn);
                let (out, cache) = fno_forward(params, config, &u)?;
                let h = out.scaled(bn);
                (Some(u), Some(out), Some(cache), h)
            }
            _ => (None, None, None, nh.smoother_output(l, &b)?),
        };
        let c = nh.apply_filter(l, &h)?;
        let residual = y_l.sub(&level.op.apply(&c)?);
        let next = level
            .transfer
            .as_ref()
            .expect("non-coarsest has transfer")
            .restrict(&residual)?;
        levels.push(LevelTrace {
            bnorm,
            u,
            n_out,
            cache,
            h,
            c,
        });
        y_l = next;
    }
    let coarse_level = nh.base.level(lp - 1)?;
    // Assemble the cycle output bottom-up from the coarse solve.
    let mut x = Field::new(coarse_level.lu()?.solve(y_l.data())?, y_l.shape())?;
    for l in (0..lp - 1).rev() {
        let t = nh.base.level(l)?.transfer.as_ref().unwrap();
        let mut xl = levels[l].c.clone();
        xl.axpy(1.0, &t.interpolate(&x)?);
        x = xl;
    }
    Ok(CycleTrace { levels, x_out: x })
}

/// Lift a level-`l` field to the finest grid through the interpolation
/// chain.
fn lift_to_fine(nh: &NeuralHierarchy, l: usize, f: &Field) -> Result<Field> {
    let mut out = f.clone();
    for k in (0..l).rev() {
        out = nh
            .base
            .level(k)?
            .transfer
            .as_ref()
            .unwrap()
            .interpolate(&out)?;
    }
    Ok(out)
}

/// Adjoint of [`lift_to_fine`]: restrict a finest-grid field down to level
/// `l`, scaling by 2^rank per step (P^T = 2^d R).
fn lift_transpose(nh: &NeuralHierarchy, l: usize, g: &Field) -> Result<Field> {
    let d = match g.shape() {
        Shape::D1(_) => 1,
        Shape::D2(..) => 2,
    };
    let scale = 2f64.powi(d);
    let mut out = g.clone();
    for k in 0..l {
        out = nh
            .base
            .level(k)?
            .transfer
            .as_ref()
            .unwrap()
            .restrict(&out)?
            .scaled(scale);
    }
    Ok(out)
}

fn fine_mask(nh: &NeuralHierarchy, level_one_based: usize) -> Result<FrequencyMask> {
    let shape = nh.base.finest().op.shape();
    let num_levels = nh.base.num_levels();
    match shape {
        Shape::D1(n) => make_mask_1d(level_one_based, num_levels, n, MaskVariant::Fine),
        Shape::D2(..) => make_mask_2d(level_one_based, num_levels, shape, MaskVariant::Fine),
    }
}

fn spectrum(v: &Field) -> Result<Vec<num_complex::Complex64>> {
    Ok(match v.shape() {
        Shape::D1(_) => dft1(&CField::from_real(v.data()))?.data,
        Shape::D2(..) => dft2(&CField::from_real_shaped(v.data(), v.shape())?)?.data,
    })
}

/// ||m . DFT(e)||^2 and its gradient 2 Re(n IDFT(m^2 . DFT(e))).
fn masked_spectral_loss(e: &Field, mask: &FrequencyMask) -> Result<(f64, Field)> {
    let spec = spectrum(e)?;
    let m = mask.natural().data();
    let mut loss = 0.0;
    let weighted: Vec<num_complex::Complex64> = spec
        .iter()
        .zip(m)
        .map(|(s, &mv)| {
            loss += (mv * s.norm()).powi(2);
            s * (mv * mv)
        })
        .collect();
    let back = match e.shape() {
        Shape::D1(_) => idft1(&CField::new(weighted, e.shape())?)?,
        Shape::D2(..) => idft2(&CField::new(weighted, e.shape())?)?,
    };
    let n = e.len() as f64;
    let grad = Field::new(back.re().iter().map(|v| 2.0 * n * v).collect(), e.shape())?;
    Ok((loss, grad))
}

/// Error term of the level-`l_idx` loss (0-based level index) for one
/// sample: x - sum_{k<l} lifted filtered corrections - lifted raw h_l.
fn level_error_term(
    nh: &NeuralHierarchy,
    trace: &CycleTrace,
    x: &Field,
    l_idx: usize,
) -> Result<Field> {
    let mut e = x.clone();
    for k in 0..l_idx {
        e.axpy(-1.0, &lift_to_fine(nh, k, &trace.levels[k].c)?);
    }
    e.axpy(-1.0, &lift_to_fine(nh, l_idx, &trace.levels[l_idx].h)?);
    Ok(e)
}

/// Per-sample gradient of the normalized smoother h = |b| N(b/|b|) with
/// respect to theta, given upstream grad g_h. Returns None for non-FNO
/// smoothers.
fn fno_param_grad(
    nh: &NeuralHierarchy,
    l: usize,
    trace: &LevelTrace,
    g_h: &Field,
) -> Result<Option<FnoParams>> {
    let (config, params) = match &nh.smoothers[l] {
        SmootherKind::Fno { config, params } => (config, params),
        _ => return Ok(None),
    };
    let cache = match &trace.cache {
        Some(c) => c,
        None => return Ok(Some(FnoParams::zeros(config))), // |b| = 0: h constant 0
    };
    let (gp, _) = fno_backward(params, config, cache, &g_h.scaled(trace.bnorm))?;
    Ok(Some(gp))
}

/// Level-wise loss (per-level spectral objective) with gradients flowing
/// only into the level-`l_idx` smoother. Traces are computed fresh; the
/// training loop shares one trace across levels instead.
pub fn levelwise_loss(
    nh: &NeuralHierarchy,
    l_idx: usize,
    batch: &Batch,
) -> Result<(f64, Option<FnoParams>)> {
    let (losses, grads) = levelwise_losses_all(nh, batch)?;
    Ok((losses[l_idx], grads.into_iter().nth(l_idx).unwrap()))
}

/// All level losses and gradients from one traced cycle per sample.
pub fn levelwise_losses_all(
    nh: &NeuralHierarchy,
    batch: &Batch,
) -> Result<(Vec<f64>, Vec<Option<FnoParams>>)> {
    let lp = nh.base.num_levels();
    let n_smooth = lp - 1;
    let nb = batch.xs.len();
    if nb == 0 {
        return Err(Error::EmptyInput);
    }
    let masks: Vec<FrequencyMask> = (1..=n_smooth)
        .map(|l| fine_mask(nh, l))
        .collect::<Result<_>>()?;

    let per_sample = map_indexed(nb, |i| -> Result<(Vec<f64>, Vec<Option<FnoParams>>)> {
        let trace = trace_cycle(nh, &batch.ys[i], lp)?;
        let mut losses = Vec::with_capacity(n_smooth);
        let mut grads = Vec::with_capacity(n_smooth);
        for l in 0..n_smooth {
            let e = level_error_term(nh, &trace, &batch.xs[i], l)?;
            let (loss, g_e) = masked_spectral_loss(&e, &masks[l])?;
            // e depends on theta_l only through -lift(h_l).
            let g_h = lift_transpose(nh, l, &g_e)?.scaled(-1.0);
            losses.push(loss);
            grads.push(fno_param_grad(nh, l, &trace.levels[l], &g_h)?);
        }
        Ok((losses, grads))
    });

    // Deterministic reduction in sample order.
    let scale = 1.0 / nb as f64;
    let mut losses = vec![0.0; n_smooth];
    let mut grads: Vec<Option<FnoParams>> = vec![None; n_smooth];
    for r in per_sample {
        let (ls, gs) = r?;
        for l in 0..n_smooth {
            losses[l] += scale * ls[l];
            if let Some(g) = &gs[l] {
                match &mut grads[l] {
                    Some(acc) => acc.axpy(scale, g),
                    slot => {
                        let mut g0 = g.clone();
                        let flat: Vec<f64> = g0.flatten().iter().map(|v| v * scale).collect();
                        g0.assign_from_flat(&flat).expect("same layout");
                        *slot = Some(g0);
                    }
                }
            }
        }
    }
    Ok((losses, grads))
}

/// Whole-cycle squared-error loss with exact gradients into every FNO
/// smoother (reverse mode through transfers, operators, filters, the
/// normalization, and the coarse solve).
pub fn combined_loss(
    nh: &NeuralHierarchy,
    batch: &Batch,
) -> Result<(f64, Vec<Option<FnoParams>>)> {
    let lp = nh.base.num_levels();
    let n_smooth = lp - 1;
    let nb = batch.xs.len();
    if nb == 0 {
        return Err(Error::EmptyInput);
    }
    for s in &nh.smoothers {
        if matches!(s, SmootherKind::ExactBand | SmootherKind::Hook(_)) {
            return Err(Error::InvalidArgument(
                "combined loss differentiates FNO or zero smoothers only".into(),
            ));
        }
    }

    let per_sample = map_indexed(nb, |i| -> Result<(f64, Vec<Option<FnoParams>>)> {
        let trace = trace_cycle(nh, &batch.ys[i], lp)?;
        let e = batch.xs[i].sub(&trace.x_out);
        let loss = e.norm2().powi(2);
        let g_x_out = e.scaled(-2.0);
        let mut grads: Vec<Option<FnoParams>> = vec![None; n_smooth];
        backward_level(nh, &trace, 0, &g_x_out, &mut grads)?;
        Ok((loss, grads))
    });

    let scale = 1.0 / nb as f64;
    let mut loss = 0.0;
    let mut grads: Vec<Option<FnoParams>> = vec![None; n_smooth];
    for r in per_sample {
        let (l, gs) = r?;
        loss += scale * l;
        for (slot, g) in grads.iter_mut().zip(gs) {
            if let Some(g) = g {
                match slot {
                    Some(acc) => acc.axpy(scale, &g),
                    None => {
                        let mut g0 = g;
                        let flat: Vec<f64> = g0.flatten().iter().map(|v| v * scale).collect();
                        g0.assign_from_flat(&flat).expect("same layout");
                        *slot = Some(g0);
                    }
                }
            }
        }
    }
    Ok((loss, grads))
}

/// Reverse pass through one cycle level. `g_x` is the gradient with
/// respect to this level's output; returns the gradient with respect to
/// this level's right-hand side y_l.
fn backward_level(
    nh: &NeuralHierarchy,
    trace: &CycleTrace,
    l: usize,
    g_x: &Field,
    grads: &mut Vec<Option<FnoParams>>,
) -> Result<Field> {
    let lp = nh.base.num_levels();
    if l == lp - 1 {
        // e = A^{-1} y with symmetric A: gradient is the same solve.
        let level = nh.base.level(l)?;
        return Field::new(level.lu()?.solve(g_x.data())?, g_x.shape());
    }
    let level = nh.base.level(l)?;
    let t = level.transfer.as_ref().unwrap();
    let d = match g_x.shape() {
        Shape::D1(_) => 1,
        Shape::D2(..) => 2,
    };
    let pd = 2f64.powi(d);

    // x_out_l = c_l + P e_{l+1}
    let mut g_c = g_x.clone();
    let g_e = t.restrict(g_x)?.scaled(pd); // P^T = 2^d R
    let g_y_next = backward_level(nh, trace, l + 1, &g_e, grads)?;
    // y_{l+1} = R (y_l - A c_l); R^T = P / 2^d, A symmetric.
    let rt = t.interpolate(&g_y_next)?.scaled(1.0 / pd);
    g_c.axpy(-1.0, &level.op.apply(&rt)?);
    let mut g_y = rt;

    // c = F'(h) with F' symmetric (even real mask), or c = h.
    let g_h = nh.apply_filter(l, &g_c)?;

    // h = |b| N(b/|b|): gradients into theta_l and into b (= y_l here).
    let tr = &trace.levels[l];
    if let SmootherKind::Fno { config, params } = &nh.smoothers[l] {
        if let (Some(cache), Some(u), Some(n_out)) = (&tr.cache, &tr.u, &tr.n_out) {
            let (gp, gin) = fno_backward(params, config, cache, &g_h)?;
            // d(theta): |b| * dN/dtheta.
            let mut gp_scaled = FnoParams::zeros(config);
            gp_scaled.axpy(tr.bnorm, &gp);
            match &mut grads[l] {
                Some(acc) => acc.axpy(1.0, &gp_scaled),
                slot => *slot = Some(gp_scaled),
            }
            // g_b = u (N(u) . g_h) + (J^T g_h - u (u . J^T g_h)) / |b| * |b|
            // where J^T g_h = gin; the two |b| factors cancel to give:
            let mut g_b = u.scaled(n_out.dot(&g_h));
            let mut proj = gin.clone();
            proj.axpy(-u.dot(&gin), u);
            g_b.axpy(1.0, &proj);
            g_y.axpy(1.0, &g_b);
        }
        // |b| = 0: the guard returns the constant 0, no gradient.
    }
    Ok(g_y)
}

/// Frequency-bin energy bound of the level loss: for every retained mask
/// bin, the batch-mean squared bin magnitude is at most loss / m^2.
pub fn loss_bound_holds(nh: &NeuralHierarchy, l_idx: usize, batch: &Batch) -> Result<bool> {
    let lp = nh.base.num_levels();
    let mask = fine_mask(nh, l_idx + 1)?;
    let nb = batch.xs.len() as f64;
    let mut f_j = vec![0.0; mask.natural().len()];
    let mut loss = 0.0;
    for i in 0..batch.xs.len() {
        let trace = trace_cycle(nh, &batch.ys[i], lp)?;
        let e = level_error_term(nh, &trace, &batch.xs[i], l_idx)?;
        let spec = spectrum(&e)?;
        for (j, s) in spec.iter().enumerate() {
            f_j[j] += s.norm_sqr() / nb;
        }
        loss += masked_spectral_loss(&e, &mask)?.0 / nb;
    }
    let m = mask.natural().data();
    Ok(f_j.iter().zip(m).all(|(&fj, &mj)| {
        mj <= 0.0 || fj <= loss / (mj * mj) * (1.0 + 1e-12) + 1e-12
    }))
}

fn configs_for(base_shapes: &[Shape], scale: &FnoScale) -> Result<Vec<FnoConfig>> {
    match scale {
        FnoScale::Desk => Ok(base_shapes.iter().map(|&s| FnoConfig::desk_scale(s)).collect()),
        FnoScale::Full => Ok(base_shapes.iter().map(|&s| FnoConfig::full_scale(s)).collect()),
        FnoScale::Custom(cfgs) => {
            if cfgs.len() != base_shapes.len() {
                return Err(Error::InvalidArgument(format!(
                    "{} custom configs for {} smoothing levels",
                    cfgs.len(),
                    base_shapes.len()
                )));
            }
            for (c, &s) in cfgs.iter().zip(base_shapes) {
                if c.shape != s {
                    return Err(Error::ShapeMismatch(format!(
                        "config shape {:?} vs level shape {s:?}",
                        c.shape
                    )));
                }
            }
            Ok(cfgs.clone())
        }
    }
}

fn batch_seed(seed: u64, stage: usize, epoch: usize) -> u64 {
    // splitmix-style mix keeps stages and epochs decorrelated.
    let mut z = seed
        .wrapping_add(0x9e3779b97f4a7c15u64.wrapping_mul(1 + stage as u64))
        .wrapping_add(0xbf58476d1ce4e5b9u64.wrapping_mul(1 + epoch as u64));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Train smoothers for the given problem. Each curriculum stage rebuilds
/// the operator with its alpha and continues from the previous stage's
/// parameters. Per epoch: fresh rollout batch, losses, one Adam step per
/// level.
pub fn train(spec: &ProblemSpec, cfg: &TrainConfig) -> Result<(NeuralHierarchy, Vec<TrainLogEntry>)> {
    cfg.validate()?;
    let alphas: Vec<f64> = if cfg.curriculum.is_empty() {
        vec![spec.alpha]
    } else {
        cfg.curriculum.clone()
    };
    let mut carried: Option<Vec<FnoParams>> = None;
    let mut log = Vec::new();
    let mut final_nh: Option<NeuralHierarchy> = None;

    for (stage, &alpha) in alphas.iter().enumerate() {
        let mut stage_spec = spec.clone();
        stage_spec.alpha = alpha;
        let op: Arc<dyn LinearSystemOp> = stage_spec.build()?;
        let base = build_hierarchy(op.clone(), cfg.num_levels)?;
        let shapes: Vec<Shape> = (0..cfg.num_levels - 1)
            .map(|l| base.level(l).map(|lv| lv.op.shape()))
            .collect::<Result<_>>()?;
        let configs = configs_for(&shapes, &cfg.scale)?;
        let params: Vec<FnoParams> = match carried.take() {
            Some(p) => p,
            None => configs
                .iter()
                .enumerate()
                .map(|(l, c)| FnoParams::init(c, cfg.seed.wrapping_add(l as u64)))
                .collect(),
        };
        let smoothers: Vec<SmootherKind> = configs
            .iter()
            .zip(&params)
            .map(|(c, p)| SmootherKind::Fno {
                config: c.clone(),
                params: p.clone(),
            })
            .collect();
        let mut nh = NeuralHierarchy::new(base, smoothers, cfg.filtered)?;
        let mut adam: Vec<AdamState> = params
            .iter()
            .map(|p| AdamState::new(p.flat_len()))
            .collect();

        for epoch in 1..=cfg.epochs {
            let lr = cfg.lr * 0.5f64.powi(((epoch - 1) / cfg.lr_halving_period) as i32);
            let bseed = batch_seed(cfg.seed, stage, epoch);
            let batch = generate_batch(
                op.as_ref(),
                &nh,
                cfg.batch_size,
                cfg.rollout_cap,
                bseed,
            )?;
            let (losses, grads) = match cfg.loss {
                LossMode::Levelwise => levelwise_losses_all(&nh, &batch)?,
                LossMode::Combined => {
                    let (l, g) = combined_loss(&nh, &batch)?;
                    (vec![l], g)
                }
            };
            for (l, loss) in losses.iter().enumerate() {
                if !loss.is_finite() {
                    return Err(Error::NonFinite {
                        context: format!("loss at stage {stage}, epoch {epoch}, level {l}"),
                    });
                }
            }
            for (l, grad) in grads.iter().enumerate() {
                let grad = match grad {
                    Some(g) => g,
                    None => continue,
                };
                if let SmootherKind::Fno { params, .. } = &mut nh.smoothers[l] {
                    let mut flat = params.flatten();
                    adam_step(&mut adam[l], &mut flat, &grad.flatten(), lr)?;
                    params.assign_from_flat(&flat)?;
                }
            }
            log.push(TrainLogEntry {
                stage,
                alpha,
                epoch,
                losses,
                lr,
                batch_seed: bseed,
            });
        }

        carried = Some(
            nh.smoothers
                .iter()
                .map(|s| match s {
                    SmootherKind::Fno { params, .. } => params.clone(),
                    _ => unreachable!("training uses FNO smoothers"),
                })
                .collect(),
        );
        final_nh = Some(nh);
    }
    Ok((final_nh.expect("at least one stage"), log))
}
