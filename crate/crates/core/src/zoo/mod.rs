//! Model zoo mirroring the backbone macro-design taxonomy at desk scale:
//! plain stacking, pre-norm residual, isotropic token/channel mixing, plus a
//! linear baseline and an analytic quadratic bowl.

pub mod layers;
pub mod model;

pub use layers::accuracy;
pub use model::{
    build_model, family_tag, Family, Gradients, Model, ModelSpec, Param, TaxonomyTag,
};
