//! Neural building blocks: positional schemes, instance norm, the three
//! attention variants, the encoder block, patching, distillation and the two
//! up-scaling operators.

pub mod attention;
pub mod embed;
pub mod encoder;
pub mod norm;
pub mod params;
pub mod resample;
pub mod rope;

pub use attention::{attention_canonical, attention_grid, attention_psa, Attention, AttnKind, BlockParams};
pub use embed::{LapeTable, PatchEmbed};
pub use encoder::EncoderBlock;
pub use norm::{instance_norm, InstanceNorm};
pub use params::{Binder, Fwd, Linear, Param, ParamId, ParamStore};
pub use resample::{pixel_shuffle, pixel_unshuffle, upsample_bicubic, Distill};
pub use rope::rope_rotate;
