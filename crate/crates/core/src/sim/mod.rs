//! Seeded simulation studies: data generators, parametric comparators,
//! and the replication driver.

pub mod comparator;
pub mod generators;
pub mod study;

pub use comparator::{gauss_hermite, glmm_gaussian_fit, lmm_gaussian_fit};
pub use generators::{
    armix_true_f, gen_armix, gen_density, gen_glmm, gen_glmm_beta, gen_lmm, gen_studentt,
    scaled_t5_log_density, ArmixData, DensityMix, InterceptLaw, RegressionData, ARMIX_BOX,
    LMM_SIGMA, REG_BETA,
};
pub use study::{
    armix_grid, run_armix_study, run_glmm_study, run_kl_limit_study, run_lmm_study,
    ArmixStudyConfig, GlmmStudyConfig, KlLimitConfig, KlLimitReport, LmmStudyConfig, RepRow,
    StudyReport,
};
