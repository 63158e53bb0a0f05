//! Wire format (version 1) spoken with external mask backends.
//!
//! A request carries the working image and one prompt per slot; the response
//! carries one run-length-encoded mask per slot. Runs alternate off/on,
//! starting with an off run, over the row-major pixel grid.

use base64::Engine;
use base64::engine::general_purpose::STANDARD as B64;
use boxmask_core::backend::{check_response, BackendErrorKind, ImageView};
use boxmask_core::{rle, BackendError, Bitmap, BoundingBox, InputClass, MaskBackend, MaskProposal, Prompt};
use image::RgbImage;
use serde::{Deserialize, Serialize};

pub const PROTOCOL_VERSION: u32 = 1;

/// Path appended to the backend base URL.
pub const PREDICT_PATH: &str = "/v1/predict";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageEncoding {
    PngBase64,
    /// Dimensions only; the backend does not need pixels.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireImage {
    pub width: u32,
    pub height: u32,
    pub encoding: ImageEncoding,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub data: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WirePrompt {
    pub slot: usize,
    pub class: InputClass,
    /// `[x_min, y_min, x_max, y_max]` in working-image pixels.
    #[serde(rename = "box")]
    pub bbox: [f64; 4],
    /// Present for point prompts; `bbox` is then the context box.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictRequest {
    pub protocol: u32,
    pub image: WireImage,
    pub prompts: Vec<WirePrompt>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireMask {
    pub slot: usize,
    pub width: u32,
    pub height: u32,
    pub rle: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictResponse {
    pub protocol: u32,
    pub masks: Vec<WireMask>,
}

fn malformed(msg: impl Into<String>) -> BackendError {
    BackendError::new(BackendErrorKind::Malformed, msg)
}

pub fn encode_prompt(slot: usize, prompt: &Prompt) -> WirePrompt {
    let b = prompt.extent();
    WirePrompt {
        slot,
        class: b.class,
        bbox: [b.x_min, b.y_min, b.x_max, b.y_max],
        point: match prompt {
            Prompt::Box(_) => None,
            Prompt::Point { x, y, .. } => Some([*x, *y]),
        },
    }
}

pub fn decode_prompt(p: &WirePrompt) -> Prompt {
    let [x0, y0, x1, y1] = p.bbox;
    let context = BoundingBox::new(x0, y0, x1, y1, p.class);
    match p.point {
        None => Prompt::Box(context),
        Some([x, y]) => Prompt::Point { x, y, context },
    }
}

pub fn encode_request(image: &ImageView<'_>, prompts: &[Prompt]) -> PredictRequest {
    let expected = image.width as usize * image.height as usize * 3;
    let wire_image = if image.rgb.len() == expected && expected > 0 {
        let img = RgbImage::from_raw(image.width, image.height, image.rgb.to_vec())
            .expect("length checked");
        WireImage {
            width: image.width,
            height: image.height,
            encoding: ImageEncoding::PngBase64,
            data: B64.encode(crate::fsio::encode_rgb_png(&img)),
        }
    } else {
        WireImage {
            width: image.width,
            height: image.height,
            encoding: ImageEncoding::None,
            data: String::new(),
        }
    };
    PredictRequest {
        protocol: PROTOCOL_VERSION,
        image: wire_image,
        prompts: prompts.iter().enumerate().map(|(i, p)| encode_prompt(i, p)).collect(),
    }
}

/// Decoded request: dimensions, RGB bytes (possibly empty) and prompts in
/// slot order.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedRequest {
    pub width: u32,
    pub height: u32,
    pub rgb: Vec<u8>,
    pub prompts: Vec<Prompt>,
}

pub fn decode_request(req: &PredictRequest) -> Result<DecodedRequest, BackendError> {
    if req.protocol != PROTOCOL_VERSION {
        return Err(malformed(format!("unsupported protocol {}", req.protocol)));
    }
    let (width, height) = (req.image.width, req.image.height);
    if width == 0 || height == 0 {
        return Err(malformed("image dimensions must be positive"));
    }
    let rgb = match req.image.encoding {
        ImageEncoding::None => Vec::new(),
        ImageEncoding::PngBase64 => {
            let bytes = B64
                .decode(req.image.data.as_bytes())
                .map_err(|e| malformed(format!("image data: {e}")))?;
            let img = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)
                .map_err(|e| malformed(format!("image data: {e}")))?
                .into_rgb8();
            if img.dimensions() != (width, height) {
                return Err(malformed("image data does not match declared dimensions"));
            }
            img.into_raw()
        }
    };
    let mut prompts: Vec<&WirePrompt> = req.prompts.iter().collect();
    prompts.sort_by_key(|p| p.slot);
    if prompts.iter().enumerate().any(|(i, p)| p.slot != i) {
        return Err(malformed("prompt slots must be 0..n without gaps"));
    }
    Ok(DecodedRequest {
        width,
        height,
        rgb,
        prompts: prompts.into_iter().map(decode_prompt).collect(),
    })
}

pub fn encode_response(proposals: &[MaskProposal]) -> PredictResponse {
    PredictResponse {
        protocol: PROTOCOL_VERSION,
        masks: proposals
            .iter()
            .map(|p| WireMask {
                slot: p.slot,
                width: p.mask.width(),
                height: p.mask.height(),
                rle: rle::encode(p.mask.as_slice()),
                score: p.score,
            })
            .collect(),
    }
}

pub fn decode_response(resp: &PredictResponse) -> Result<Vec<MaskProposal>, BackendError> {
    if resp.protocol != PROTOCOL_VERSION {
        return Err(malformed(format!("unsupported protocol {}", resp.protocol)));
    }
    resp.masks
        .iter()
        .map(|m| {
            let len = m.width as usize * m.height as usize;
            let bits = rle::decode(&m.rle, len)
                .map_err(|e| malformed(format!("slot {}: {e}", m.slot)))?;
            let mask = Bitmap::from_bits(m.width, m.height, bits)
                .map_err(|e| malformed(format!("slot {}: {e}", m.slot)))?;
            Ok(MaskProposal {
                slot: m.slot,
                mask,
                score: m.score,
            })
        })
        .collect()
}

/// Server side: runs `backend` on a decoded request and encodes the reply.
pub fn answer(backend: &dyn MaskBackend, req: &PredictRequest) -> Result<PredictResponse, BackendError> {
    let d = decode_request(req)?;
    let view = ImageView {
        width: d.width,
        height: d.height,
        rgb: &d.rgb,
    };
    let proposals = check_response(&view, d.prompts.len(), backend.predict(&view, &d.prompts)?)?;
    Ok(encode_response(&proposals))
}
