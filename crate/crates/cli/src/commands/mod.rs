pub mod cover;
pub mod model_params;
pub mod nfr;
pub mod nndist;
pub mod pca;
pub mod scale;
pub mod smooth;
pub mod train;
