//! Learning from demonstrations: preprocessing, GMM/GMR and KMP.

pub mod demo;
pub mod dtw;
pub mod gmm;
pub mod kmp;

pub use demo::{read_csv, subsample_equal_spacing, write_csv, Demonstration};
pub use dtw::{dtw, dtw_align, DtwResult};
pub use gmm::{fit_gmm, gmr_condition, pose_space_covariance, GmmOptions, GmrOutput, JointGmm, JointPoint};
pub use kmp::{kernel_eval, kmp_fit, KmpModel, KmpParams, ReferenceDistribution};
