//! Multi-view synchronized sampling of a rectified flow.
//!
//! Every view carries its own noisy latent. At each step the per-view clean
//! estimates are decoded, pulled back into the canonical frame with inverse
//! Laplacian warping, blended, pushed forward through each view again and
//! re-encoded, with a first-order correction for the autoencoder's
//! reconstruction error.

pub mod backend;
pub mod config;
pub mod latent;
pub mod protocol;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blend::{blend_images, blend_pyramids, BlendOptions};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::pyramid::{build_gaussian, check_depth, reconstruct, Pyramid, PyramidKind};
use crate::uvmap::{compute_lod, downscale_uvmap, LodMap, UvMap};
use crate::warp::{forward_warp, inverse_warp, transport, SampleMode};

pub use backend::{
    guided_velocity, BlurDenoiser, Denoiser, IdentityVae, LossyVae, NoiseDenoiser, PoolVae,
    TargetDenoiser, Vae,
};
pub use config::{Priority, SyncConfig, TimeTravel};
pub use latent::LatentTensor;

fn check_time(t: f32) -> Result<()> {
    if (0.0..1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::Time(format!("t = {t} outside [0, 1)")))
    }
}

/// One-step extrapolation to the data end of the path: `z + u (1 - t)`.
pub fn predict_clean(z: &LatentTensor, t: f32, u: &LatentTensor) -> Result<LatentTensor> {
    check_time(t)?;
    z.zip_with(u, |z, u| z + u * (1.0 - t))
}

/// Classifier-free guidance: `(1 + w) cond - w uncond`.
pub fn cfg_velocity(cond: &LatentTensor, uncond: &LatentTensor, w: f32) -> Result<LatentTensor> {
    cond.zip_with(uncond, |c, u| (1.0 + w) * c - w * u)
}

/// Euler step from `t` to `t_next` along the velocity implied by the clean
/// estimate.
pub fn denoising_step(
    clean: &LatentTensor,
    z: &LatentTensor,
    t: f32,
    t_next: f32,
) -> Result<LatentTensor> {
    check_time(t)?;
    if !(t < t_next && t_next <= 1.0) {
        return Err(Error::Time(format!("step {t} -> {t_next} is not forward")));
    }
    let h = (t_next - t) / (1.0 - t);
    z.zip_with(clean, |z, c| z + (c - z) * h)
}

/// Re-enters the interpolation path at `t`: `(1 - t) eps + t clean`.
pub fn renoise(clean: &LatentTensor, t: f32, rng: &mut impl Rng) -> Result<LatentTensor> {
    check_time(t)?;
    Ok(clean.map(|c| {
        let eps: f32 = rng.sample(StandardNormal);
        (1.0 - t) * eps + t * c
    }))
}

/// Standard normal latent.
pub fn gaussian_latent(shape: [usize; 3], scale_factor: usize, rng: &mut impl Rng) -> LatentTensor {
    let [c, h, w] = shape;
    let data = (0..c * h * w).map(|_| rng.sample(StandardNormal)).collect();
    LatentTensor::from_vec(c, h, w, scale_factor, data).expect("length matches shape")
}

/// A view as the caller describes it.
#[derive(Clone, Debug)]
pub struct View {
    pub map: UvMap,
    pub prompt: String,
    pub negative: String,
}

impl View {
    pub fn new(map: UvMap, prompt: impl Into<String>) -> Self {
        Self {
            map,
            prompt: prompt.into(),
            negative: String::new(),
        }
    }
}

#[derive(Clone, Debug)]
struct PreparedView {
    map: UvMap,
    lod: LodMap,
    latent_map: UvMap,
    latent_lod: LodMap,
    prompt: String,
    negative: String,
}

/// Views with their level-of-detail maps at image and latent resolution.
#[derive(Clone, Debug)]
pub struct ViewBundle {
    views: Vec<PreparedView>,
    canonical_size: usize,
    depth: usize,
    scale_factor: usize,
}

impl ViewBundle {
    pub fn new(
        views: Vec<View>,
        canonical_size: usize,
        depth: usize,
        scale_factor: usize,
    ) -> Result<Self> {
        let first = views
            .first()
            .ok_or_else(|| Error::Size("at least one view is required".into()))?;
        let dims = first.map.dims();
        check_depth(canonical_size, canonical_size, depth)?;
        if scale_factor == 0 || canonical_size % scale_factor != 0 {
            return Err(Error::Size(format!(
                "scale factor {scale_factor} does not divide canonical size {canonical_size}"
            )));
        }
        let prepared = views
            .into_iter()
            .map(|v| {
                if v.map.dims() != dims {
                    return Err(Error::Size(format!(
                        "view maps differ in size: {:?} vs {:?}",
                        v.map.dims(),
                        dims
                    )));
                }
                let lod = compute_lod(&v.map, canonical_size)?;
                let latent_map = downscale_uvmap(&v.map, scale_factor)?;
                let latent_lod = compute_lod(&latent_map, canonical_size / scale_factor)?;
                Ok(PreparedView {
                    map: v.map,
                    lod,
                    latent_map,
                    latent_lod,
                    prompt: v.prompt,
                    negative: v.negative,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            views: prepared,
            canonical_size,
            depth,
            scale_factor,
        })
    }

    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }

    /// Target image size shared by all views.
    pub fn image_dims(&self) -> (usize, usize) {
        self.views[0].map.dims()
    }

    pub fn canonical_size(&self) -> usize {
        self.canonical_size
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn scale_factor(&self) -> usize {
        self.scale_factor
    }

    pub fn map(&self, i: usize) -> &UvMap {
        &self.views[i].map
    }

    pub fn prompt(&self, i: usize) -> &str {
        &self.views[i].prompt
    }

    /// Latent shape for `channels` latent channels.
    pub fn latent_shape(&self, channels: usize) -> [usize; 3] {
        let (w, h) = self.image_dims();
        [channels, h / self.scale_factor, w / self.scale_factor]
    }

    fn is_passthrough(&self) -> bool {
        self.views.len() == 1
            && self.views[0].map.dims() == (self.canonical_size, self.canonical_size)
            && self.views[0].map.is_identity()
    }
}

fn per_view<T: Send>(
    n: usize,
    serial: bool,
    f: impl Fn(usize) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    if serial {
        (0..n).map(f).collect()
    } else {
        (0..n).into_par_iter().map(f).collect()
    }
}

/// Result of one aggregation pass.
#[derive(Clone, Debug)]
pub struct Aggregate {
    pub latents: Vec<LatentTensor>,
    /// `clean - encode(decode(clean))` per view, before warping.
    pub residuals: Vec<LatentTensor>,
}

/// Synchronizes per-view clean estimates through the canonical frame.
pub fn aggregate_views(
    clean: &[LatentTensor],
    bundle: &ViewBundle,
    vae: &dyn Vae,
    blend: BlendOptions,
    mode: SampleMode,
) -> Result<Aggregate> {
    if clean.len() != bundle.len() {
        return Err(Error::Size(format!(
            "{} latents for {} views",
            clean.len(),
            bundle.len()
        )));
    }
    for z in &clean[1..] {
        clean[0].check_shape(z)?;
    }
    let serial = vae.is_serial();
    let n = clean.len();
    let decoded = per_view(n, serial, |i| {
        let img = vae.decode(&clean[i])?;
        if img.dims() != bundle.image_dims() {
            return Err(Error::Size(format!(
                "decoded image is {:?}, views are {:?}",
                img.dims(),
                bundle.image_dims()
            )));
        }
        let residual = clean[i].zip_with(&vae.encode(&img)?, |a, b| a - b)?;
        Ok((img, residual))
    })?;
    let (images, residuals): (Vec<Image>, Vec<LatentTensor>) = decoded.into_iter().unzip();

    // decode then encode undoes itself exactly when there is one identity view
    if bundle.is_passthrough() {
        return Ok(Aggregate {
            latents: clean.to_vec(),
            residuals,
        });
    }

    let depth = bundle.depth;
    let pulled = per_view(n, false, |i| {
        let v = &bundle.views[i];
        inverse_warp(&images[i], &v.map, &v.lod, depth)
    })?;
    let canonical = reconstruct(&blend_pyramids(&pulled, blend)?)?;
    let gaussian = build_gaussian(&canonical, depth)?;

    // residuals travel at latent resolution, a chunk of channels at a time
    let residual_chunks: Vec<Vec<Image>> = residuals.iter().map(LatentTensor::to_image_chunks).collect();
    let chunk_count = residual_chunks[0].len();
    let mut canonical_residual = Vec::with_capacity(chunk_count);
    for k in 0..chunk_count {
        let pulled: Vec<Image> = (0..n)
            .map(|i| {
                let v = &bundle.views[i];
                Ok(transport(&residual_chunks[i][k], &v.latent_map, &v.latent_lod, 1)?
                    .normalized()
                    .remove(0))
            })
            .collect::<Result<_>>()?;
        canonical_residual.push(Pyramid::from_levels(
            PyramidKind::Gaussian,
            vec![blend_images(&pulled)?],
        )?);
    }

    let latents = per_view(n, serial, |i| {
        let v = &bundle.views[i];
        let mut pushed = forward_warp(&gaussian, &v.map, &v.lod, mode)?;
        fill_from(&mut pushed, &images[i]);
        let encoded = vae.encode(&pushed)?;
        let chunks = canonical_residual
            .iter()
            .zip(&residual_chunks[i])
            .map(|(r, own)| {
                let mut warped = forward_warp(r, &v.latent_map, &v.latent_lod, SampleMode::Nearest)?;
                fill_from(&mut warped, own);
                Ok(warped)
            })
            .collect::<Result<Vec<_>>>()?;
        let residual = LatentTensor::from_image_chunks(&chunks, encoded.scale_factor())?;
        encoded.zip_with(&residual, |a, b| a + b)
    })?;
    Ok(Aggregate { latents, residuals })
}

/// Missing pixels of `dst` take the view's own value.
fn fill_from(dst: &mut Image, own: &Image) {
    let (w, h) = dst.dims();
    for y in 0..h {
        for x in 0..w {
            if dst.is_missing(x, y) {
                dst.pixel_mut(x, y).copy_from_slice(own.pixel(x, y));
            }
        }
    }
}

/// Progress report for one denoising pass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepEvent {
    pub step: usize,
    /// Pass index within a time-travel repetition.
    pub repeat: usize,
    pub t: f32,
    pub t_next: f32,
    /// Only the priority view moved.
    pub prioritized: bool,
    pub elapsed_ms: f64,
    /// Largest reconstruction residual per view (empty when prioritized).
    pub residual_max_abs: Vec<f32>,
}

#[derive(Clone, Debug)]
pub struct SyncOutput {
    pub images: Vec<Image>,
    pub latents: Vec<LatentTensor>,
    pub events: Vec<StepEvent>,
}

/// Runs the synchronized sampler over all views in `bundle`.
pub fn run_sync(
    bundle: &ViewBundle,
    denoiser: &dyn Denoiser,
    vae: &dyn Vae,
    cfg: &SyncConfig,
    observer: &mut dyn FnMut(&StepEvent),
) -> Result<SyncOutput> {
    cfg.validate()?;
    if vae.scale_factor() != bundle.scale_factor {
        return Err(Error::Size(format!(
            "autoencoder scale {} but views prepared for {}",
            vae.scale_factor(),
            bundle.scale_factor
        )));
    }
    if let Some(p) = cfg.priority.view {
        if p >= bundle.len() {
            return Err(Error::Size(format!("priority view {p} of {}", bundle.len())));
        }
    }
    let schedule = cfg.timesteps();
    let steps = schedule.len() - 1;
    let shape = bundle.latent_shape(vae.latent_channels());
    let n = bundle.len();
    let serial = denoiser.is_serial() || vae.is_serial();
    let blend = BlendOptions {
        alpha: cfg.alpha,
        feather: cfg.feather,
    };

    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut z: Vec<LatentTensor> = (0..n)
        .map(|_| gaussian_latent(shape, bundle.scale_factor, &mut init_rng))
        .collect();
    let mut renoise_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    renoise_rng.set_stream(1);

    let priority_start = cfg.priority.view.map(|_| steps - cfg.priority.steps(steps));
    let mut last_clean: Vec<Option<LatentTensor>> = vec![None; n];
    let mut events = Vec::new();

    let clean_estimate = |zi: &LatentTensor, i: usize, t: f32| -> Result<LatentTensor> {
        let v = &bundle.views[i];
        let u = guided_velocity(denoiser, zi, t, &v.prompt, &v.negative, cfg.cfg_scale)?;
        predict_clean(zi, t, &u)
    };

    for k in 0..steps {
        let (t, t_next) = (schedule[k], schedule[k + 1]);
        let started = Instant::now();

        if let (Some(p), Some(start)) = (cfg.priority.view, priority_start) {
            if k >= start {
                let clean = clean_estimate(&z[p], p, t)?;
                z[p] = denoising_step(&clean, &z[p], t, t_next)?;
                let event = StepEvent {
                    step: k,
                    repeat: 0,
                    t,
                    t_next,
                    prioritized: true,
                    elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
                    residual_max_abs: Vec::new(),
                };
                observer(&event);
                events.push(event);
                continue;
            }
        }

        let repeats = if cfg.time_travel.covers(k, steps) {
            cfg.time_travel.repeats
        } else {
            1
        };
        for r in 0..repeats {
            let started = if r == 0 { started } else { Instant::now() };
            let clean = per_view(n, serial, |i| clean_estimate(&z[i], i, t))?;
            let agg = aggregate_views(&clean, bundle, vae, blend, cfg.sample_mode)?;
            if r + 1 < repeats {
                if !cfg.time_travel.bypass_renoise {
                    z = agg
                        .latents
                        .iter()
                        .map(|c| renoise(c, t, &mut renoise_rng))
                        .collect::<Result<_>>()?;
                }
            } else {
                z = agg
                    .latents
                    .iter()
                    .zip(&z)
                    .map(|(c, zi)| denoising_step(c, zi, t, t_next))
                    .collect::<Result<_>>()?;
            }
            let event = StepEvent {
                step: k,
                repeat: r,
                t,
                t_next,
                prioritized: false,
                elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
                residual_max_abs: agg.residuals.iter().map(LatentTensor::max_abs).collect(),
            };
            observer(&event);
            events.push(event);
            for (slot, c) in last_clean.iter_mut().zip(agg.latents) {
                *slot = Some(c);
            }
        }
    }

    // views frozen by prioritization show their last synchronized estimate
    let finals: Vec<LatentTensor> = (0..n)
        .map(|i| match (priority_start, cfg.priority.view) {
            (Some(start), Some(p)) if start < steps && i != p => {
                last_clean[i].clone().unwrap_or_else(|| z[i].clone())
            }
            _ => z[i].clone(),
        })
        .collect();
    let images = per_view(n, vae.is_serial(), |i| vae.decode(&finals[i]))?;
    Ok(SyncOutput {
        images,
        latents: finals,
        events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn latent(values: &[f32]) -> LatentTensor {
        LatentTensor::from_vec(1, 1, values.len(), 1, values.to_vec()).unwrap()
    }

    fn random_latent(shape: [usize; 3], seed: u64) -> LatentTensor {
        gaussian_latent(shape, 1, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    #[test]
    fn clean_estimate_examples() {
        let z0 = latent(&[0.25, -0.5]);
        let z1 = latent(&[0.75, 0.125]);
        let u = z1.zip_with(&z0, |a, b| a - b).unwrap();
        assert_eq!(predict_clean(&z0, 0.0, &u).unwrap(), z1);
        assert_eq!(predict_clean(&z0, 0.3, &latent(&[0.0, 0.0])).unwrap(), z0);
        let z = random_latent([2, 3, 3], 1);
        let u = random_latent([2, 3, 3], 2);
        let c = predict_clean(&z, 0.25, &u).unwrap();
        for i in 0..z.data().len() {
            assert_eq!(c.data()[i], z.data()[i] + 0.75 * u.data()[i]);
        }
        assert!(matches!(predict_clean(&z, 1.0, &u), Err(Error::Time(_))));
    }

    #[test]
    fn guidance_examples() {
        let cond = latent(&[1.0]);
        let uncond = latent(&[0.5]);
        assert_eq!(cfg_velocity(&cond, &uncond, 0.0).unwrap(), cond);
        assert_eq!(cfg_velocity(&cond, &cond, 3.5).unwrap(), cond);
        assert_eq!(cfg_velocity(&cond, &uncond, 2.0).unwrap().data(), &[2.0]);
        assert!(cfg_velocity(&cond, &latent(&[1.0, 2.0]), 1.0).is_err());
    }

    #[test]
    fn step_examples() {
        let z = latent(&[0.25, -1.0]);
        let c = latent(&[0.5, 1.0]);
        assert_eq!(denoising_step(&c, &z, 0.4, 1.0).unwrap(), c);
        assert_eq!(denoising_step(&z, &z, 0.4, 0.5).unwrap(), z);
        assert_eq!(denoising_step(&c, &z, 0.5, 0.75).unwrap().data(), &[0.375, 0.0]);
        assert!(denoising_step(&c, &z, 0.5, 0.5).is_err());
        assert!(denoising_step(&c, &z, 0.5, 1.5).is_err());
    }

    #[test]
    fn step_and_estimate_are_inverse() {
        // the velocity implied by (clean, z) recovers the clean estimate
        let z = random_latent([1, 4, 4], 3);
        let u = random_latent([1, 4, 4], 4);
        let t = 0.35;
        let clean = predict_clean(&z, t, &u).unwrap();
        let implied = clean.zip_with(&z, |c, z| (c - z) / (1.0 - t)).unwrap();
        assert!(implied.max_abs_diff(&u) < 1e-6);
        assert!(predict_clean(&z, t, &implied).unwrap().max_abs_diff(&clean) < 1e-6);
    }

    #[test]
    fn renoise_statistics() {
        let n = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pure = renoise(&LatentTensor::zeros(1, 1, n, 1), 0.0, &mut rng).unwrap();
        let mean: f64 = pure.data().iter().map(|v| *v as f64).sum::<f64>() / n as f64;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt());

        // clean estimate with variance 0.25
        let mut src = ChaCha8Rng::seed_from_u64(6);
        let clean = LatentTensor::from_vec(
            1,
            1,
            n,
            1,
            (0..n).map(|_| if src.random_bool(0.5) { 0.5 } else { -0.5 }).collect(),
        )
        .unwrap();
        let t = 0.6f32;
        let out = renoise(&clean, t, &mut rng).unwrap();
        let m: f64 = out.data().iter().map(|v| *v as f64).sum::<f64>() / n as f64;
        let var: f64 = out.data().iter().map(|v| (*v as f64 - m).powi(2)).sum::<f64>() / n as f64;
        let want = (1.0 - t as f64).powi(2) + (t as f64).powi(2) * 0.25;
        assert!((var - want).abs() / want < 0.01, "{var} vs {want}");

        let near_one = renoise(&clean, 0.999_999, &mut rng).unwrap();
        assert!(near_one.max_abs_diff(&clean) < 1e-4);
    }

    fn identity_views(n: usize, size: usize) -> ViewBundle {
        let views = (0..n).map(|i| View::new(UvMap::identity(size), format!("p{i}"))).collect();
        ViewBundle::new(views, size, 2, 1).unwrap()
    }

    #[test]
    fn single_identity_view_passes_through() {
        let bundle = identity_views(1, 8);
        let z = random_latent([3, 8, 8], 7);
        for vae in [
            &IdentityVae { channels: 3 } as &dyn Vae,
            &LossyVae { k: 2, channels: 3 },
        ] {
            let agg = aggregate_views(
                std::slice::from_ref(&z),
                &bundle,
                vae,
                BlendOptions::default(),
                SampleMode::Nearest,
            )
            .unwrap();
            assert_eq!(agg.latents[0], z);
        }
    }

    #[test]
    fn two_identity_views_average() {
        let bundle = identity_views(2, 8);
        let a = random_latent([3, 8, 8], 8).map(|v| v.clamp(-1.0, 1.0));
        let b = random_latent([3, 8, 8], 9).map(|v| v.clamp(-1.0, 1.0));
        let agg = aggregate_views(
            &[a.clone(), b.clone()],
            &bundle,
            &IdentityVae { channels: 3 },
            BlendOptions::with_alpha(0.0),
            SampleMode::Nearest,
        )
        .unwrap();
        let mean = a.zip_with(&b, |x, y| (x + y) / 2.0).unwrap();
        for out in &agg.latents {
            assert!(out.max_abs_diff(&mean) < 1e-5);
        }
        assert!(agg.residuals.iter().all(|r| r.max_abs() == 0.0));

        // averaging is a projection
        let again = aggregate_views(
            &agg.latents,
            &bundle,
            &IdentityVae { channels: 3 },
            BlendOptions::with_alpha(0.0),
            SampleMode::Nearest,
        )
        .unwrap();
        for (x, y) in again.latents.iter().zip(&agg.latents) {
            assert!(x.max_abs_diff(y) < 1e-5);
        }
    }

    #[test]
    fn pooled_latents_warp_residuals_at_latent_resolution() {
        let views = vec![
            View::new(UvMap::identity(16), "a"),
            View::new(UvMap::identity(16), "b"),
        ];
        let bundle = ViewBundle::new(views, 16, 2, 4).unwrap();
        let vae = PoolVae { factor: 4, channels: 3 };
        let a = random_latent([3, 4, 4], 10).with_scale_factor(4);
        let agg = aggregate_views(
            &[a.clone(), a.clone()],
            &bundle,
            &vae,
            BlendOptions::with_alpha(0.0),
            SampleMode::Nearest,
        )
        .unwrap();
        for out in &agg.latents {
            assert_eq!(out.shape(), [3, 4, 4]);
            assert!(out.max_abs_diff(&a) < 1e-5);
        }
    }

    #[test]
    fn single_target_view_converges() {
        let bundle = identity_views(1, 8);
        let target = random_latent([3, 8, 8], 11).map(|v| v.clamp(-1.0, 1.0));
        let denoiser = TargetDenoiser::new().with_target("p0", target.clone());
        let cfg = SyncConfig::default();
        let out = run_sync(&bundle, &denoiser, &IdentityVae { channels: 3 }, &cfg, &mut |_| {}).unwrap();
        assert!(out.latents[0].max_abs_diff(&target) < 1e-4);
        assert_eq!(out.events.len(), 30 + cfg.time_travel.extra_passes(30));
    }

    #[test]
    fn bypassed_time_travel_is_idempotent() {
        let bundle = identity_views(2, 8);
        let vae = IdentityVae { channels: 3 };
        let mut cfg = SyncConfig {
            steps: 10,
            ..SyncConfig::default()
        };
        cfg.time_travel.bypass_renoise = true;
        cfg.time_travel.repeats = 1;
        let once = run_sync(&bundle, &NoiseDenoiser { seed: 1 }, &vae, &cfg, &mut |_| {}).unwrap();
        cfg.time_travel.repeats = 3;
        let thrice = run_sync(&bundle, &NoiseDenoiser { seed: 1 }, &vae, &cfg, &mut |_| {}).unwrap();
        assert_eq!(once.latents, thrice.latents);
        assert!(thrice.events.len() > once.events.len());

        cfg.time_travel.bypass_renoise = false;
        let noisy = run_sync(&bundle, &NoiseDenoiser { seed: 1 }, &vae, &cfg, &mut |_| {}).unwrap();
        assert_ne!(once.latents, noisy.latents);
    }

    #[test]
    fn priority_freezes_other_views() {
        let bundle = identity_views(2, 8);
        let a = random_latent([3, 8, 8], 12).map(|v| v.clamp(-1.0, 1.0));
        let b = random_latent([3, 8, 8], 13).map(|v| v.clamp(-1.0, 1.0));
        let denoiser = TargetDenoiser::new().with_target("p0", a.clone()).with_target("p1", b);
        let mut cfg = SyncConfig {
            steps: 10,
            alpha: 0.0,
            ..SyncConfig::default()
        };
        cfg.priority = Priority {
            view: Some(0),
            last_frac: 0.2,
        };
        let out = run_sync(&bundle, &denoiser, &IdentityVae { channels: 3 }, &cfg, &mut |_| {}).unwrap();
        assert_eq!(out.events.iter().filter(|e| e.prioritized).count(), 2);
        // the priority view finishes on its own target
        assert!(out.latents[0].max_abs_diff(&a) < 1e-4);
        assert!(out.latents[1].max_abs_diff(&a) > 0.01);
    }

    #[test]
    fn bundle_validation() {
        assert!(ViewBundle::new(vec![], 8, 1, 1).is_err());
        let mixed = vec![
            View::new(UvMap::identity(8), "a"),
            View::new(UvMap::identity(4), "b"),
        ];
        assert!(ViewBundle::new(mixed, 8, 1, 1).is_err());
        assert!(matches!(
            ViewBundle::new(vec![View::new(UvMap::identity(8), "a")], 8, 9, 1),
            Err(Error::Depth { .. })
        ));
        assert!(ViewBundle::new(vec![View::new(UvMap::identity(8), "a")], 8, 1, 3).is_err());
    }

    #[test]
    fn schedule_override_is_used() {
        let bundle = identity_views(1, 4);
        let cfg = SyncConfig {
            schedule: Some(vec![0.0, 0.5, 0.9, 1.0]),
            ..SyncConfig::default()
        };
        let mut ts = Vec::new();
        run_sync(&bundle, &BlurDenoiser, &IdentityVae { channels: 1 }, &cfg, &mut |e| {
            ts.push((e.t, e.t_next))
        })
        .unwrap();
        assert_abs_diff_eq!(ts.last().unwrap().1, 1.0);
        assert!(ts.iter().any(|&(t, _)| t == 0.9));
    }
}
