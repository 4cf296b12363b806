use crate::render::ShadedImage;
use crate::viewselect::ViewStack;

use super::NetworkError;

/// Network input for one point: square 8-bit images keyed by view id.
///
/// Views are kept sorted by id, so every computation over a stack visits
/// them in the same order no matter how they were supplied.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StackInput {
    resolution: usize,
    ids: Vec<u32>,
    pixels: Vec<u8>,
}

fn quantize(p: f64) -> u8 {
    (p.clamp(0.0, 1.0) * 255.0).round() as u8
}

impl StackInput {
    /// Images are resampled to `resolution` and quantized to 8 bits.
    pub fn new(resolution: usize, views: Vec<(u32, ShadedImage)>) -> Result<Self, NetworkError> {
        let mut views = views;
        views.sort_by_key(|(id, _)| *id);
        if views.is_empty() {
            return Err(NetworkError::EmptyStack);
        }
        if views.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(NetworkError::Config("duplicate view id".into()));
        }
        let mut pixels = Vec::with_capacity(views.len() * resolution * resolution);
        let mut ids = Vec::with_capacity(views.len());
        for (id, img) in views {
            ids.push(id);
            pixels.extend(img.resampled(resolution).pixels().iter().map(|&p| quantize(p)));
        }
        Ok(Self { resolution, ids, pixels })
    }

    /// Raw row-major bytes per view, sorted by id on construction.
    pub fn from_bytes(resolution: usize, views: Vec<(u32, Vec<u8>)>) -> Result<Self, NetworkError> {
        let mut views = views;
        views.sort_by_key(|(id, _)| *id);
        if views.is_empty() {
            return Err(NetworkError::EmptyStack);
        }
        if views.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(NetworkError::Config("duplicate view id".into()));
        }
        let mut pixels = Vec::with_capacity(views.len() * resolution * resolution);
        let mut ids = Vec::with_capacity(views.len());
        for (id, img) in views {
            if img.len() != resolution * resolution {
                return Err(NetworkError::ShapeMismatch {
                    expected: resolution * resolution,
                    found: img.len(),
                });
            }
            ids.push(id);
            pixels.extend(img);
        }
        Ok(Self { resolution, ids, pixels })
    }

    /// View ids are image positions within the stack.
    pub fn from_view_stack(stack: &ViewStack, resolution: usize) -> Result<Self, NetworkError> {
        Self::new(
            resolution,
            stack.images.iter().enumerate().map(|(i, img)| (i as u32, img.clone())).collect(),
        )
    }

    /// Keeps only the listed view ids (missing ids are ignored).
    pub fn select(&self, ids: &[u32]) -> Result<Self, NetworkError> {
        let n = self.resolution * self.resolution;
        let views = self
            .ids
            .iter()
            .enumerate()
            .filter(|(_, id)| ids.contains(id))
            .map(|(i, &id)| (id, self.pixels[i * n..(i + 1) * n].to_vec()))
            .collect();
        Self::from_bytes(self.resolution, views)
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn bytes(&self, view: usize) -> &[u8] {
        let n = self.resolution * self.resolution;
        &self.pixels[view * n..(view + 1) * n]
    }

    /// Images in id order as intensities in `[0, 1]`.
    pub fn images(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        self.pixels
            .chunks_exact(self.resolution * self.resolution)
            .map(|c| c.iter().map(|&b| b as f64 / 255.0).collect())
    }
}
