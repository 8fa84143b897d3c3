use std::hash::{DefaultHasher, Hash, Hasher};
use std::sync::Arc;

use super::loss::{loss, loss_and_grad, residual_signs, LossTerms, LossWeights};
use crate::error::Result;
use crate::model::RrfModel;
use crate::raster::{
    backward_view, panorama_backward, render_panorama_image, resolve, resolve_backward, Frame,
    PanoramaMap, PinholeCamera, RenderSettings, ViewGradient,
};
use crate::spectrum::ChannelImage;
use crate::RxPose;

/// A camera the loss can be evaluated through.
#[derive(Clone, Debug)]
pub enum View {
    Pinhole(PinholeCamera),
    Panorama { pose: RxPose, map: Arc<PanoramaMap> },
}

impl View {
    pub fn panorama(pose: RxPose, height: usize) -> Result<Self> {
        Ok(View::Panorama {
            pose,
            map: Arc::new(PanoramaMap::new(height)?),
        })
    }

    /// Resolved `[visual, gain, tof]` image of `model` through this view.
    pub fn render(&self, model: &RrfModel, settings: &RenderSettings) -> ChannelImage {
        match self {
            View::Pinhole(cam) => {
                let frame = Frame::prepare(model, cam, settings);
                resolve(&frame.render_carriers(settings), settings.tof_eps)
            }
            View::Panorama { pose, map } => render_panorama_image(model, pose, map, settings).image,
        }
    }

    /// Loss of `model` through this view together with a hash of every
    /// discrete choice made while rendering and evaluating it. The loss is a
    /// smooth function of the parameters on any set where the hash is
    /// constant.
    pub fn loss_with_signature(
        &self,
        model: &RrfModel,
        target: &ChannelImage,
        weights: &LossWeights,
        mask_threshold: f64,
        settings: &RenderSettings,
    ) -> Result<(LossTerms, u64)> {
        let mut h = DefaultHasher::new();
        let image = match self {
            View::Pinhole(cam) => {
                let frame = Frame::prepare(model, cam, settings);
                frame.signature(settings).hash(&mut h);
                resolve(&frame.render_carriers(settings), settings.tof_eps)
            }
            View::Panorama { pose, map } => {
                let r = render_panorama_image(model, pose, map, settings);
                for f in &r.frames {
                    f.signature(settings).hash(&mut h);
                }
                r.image
            }
        };
        residual_signs(&image, target, weights, mask_threshold).hash(&mut h);
        let terms = loss(&image, target, weights, mask_threshold)?;
        Ok((terms, h.finish()))
    }

    pub fn loss(
        &self,
        model: &RrfModel,
        target: &ChannelImage,
        weights: &LossWeights,
        mask_threshold: f64,
        settings: &RenderSettings,
    ) -> Result<LossTerms> {
        loss(&self.render(model, settings), target, weights, mask_threshold)
    }

    /// Loss of this view and its parameter gradient, added into `grads`.
    pub fn loss_and_gradient(
        &self,
        model: &RrfModel,
        target: &ChannelImage,
        weights: &LossWeights,
        mask_threshold: f64,
        settings: &RenderSettings,
        grads: &mut ViewGradient,
    ) -> Result<LossTerms> {
        match self {
            View::Pinhole(cam) => {
                let frame = Frame::prepare(model, cam, settings);
                let carriers = frame.render_carriers(settings);
                let image = resolve(&carriers, settings.tof_eps);
                let (terms, d_image) = loss_and_grad(&image, target, weights, mask_threshold)?;
                let d_carriers = resolve_backward(&carriers, &d_image, settings.tof_eps);
                backward_view(model, &frame, &d_carriers, settings, grads)?;
                Ok(terms)
            }
            View::Panorama { pose, map } => {
                let r = render_panorama_image(model, pose, map, settings);
                let (terms, d_image) = loss_and_grad(&r.image, target, weights, mask_threshold)?;
                panorama_backward(model, &r, &d_image, map, settings, grads)?;
                Ok(terms)
            }
        }
    }
}
