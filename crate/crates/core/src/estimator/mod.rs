//! Penalized ECM/ECME estimation.

mod cmstep;
mod estep;
mod fit;
mod me;
mod optim;

pub use cmstep::{
    cm_step_lambda, cm_step_lambda_azzalini, cm_step_mu, cm_step_pi, cm_step_sigma2, component_stats, q_function,
    ComponentStats, ShapeUpdate, DELTA_EDGE,
};
pub use estep::{e_step, EStepCache};
pub use fit::{
    best_of, cml_step, fit, fit_multistart, label_sort, Algorithm, FitConfig, FitResult, InitScheme,
    DEFAULT_MAX_ITER, DEFAULT_REL_TOL, FREEZE_WEIGHT, SINGULAR_LAMBDA, SINGULAR_SIGMA2,
};
pub use me::{profile_lrt_me, MeResult, ME_LAMBDA_FLAG};
pub use optim::{brent_max, brent_root, cubic_roots, grid_then_brent};
