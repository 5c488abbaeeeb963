//! Maximum-likelihood count regression: GLM families, the hurdle
//! composition, model selection, collinearity screening and multiple-testing
//! adjustment.

pub mod bh;
pub mod design;
pub mod family;
pub mod fit;
pub mod hurdle;
pub mod selection;
pub mod vif;

pub use bh::bh_adjust;
pub use design::{ColumnScaling, DesignMatrix, INTERCEPT};
pub use family::{sigmoid, truncated_poisson_mean, Family};
pub use fit::{fit_glm, fit_glm_with, FitOptions, FitResult, Term};
pub use hurdle::{fit_hurdle, fit_hurdle_with, HurdleFit, HurdlePrediction};
pub use selection::{model_selection, vuong, Candidate, SelectionReport};
pub use vif::{vif_screen, VifReport};
