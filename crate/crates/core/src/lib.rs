//! Coupled dynamics of institutional threshold decisions and population
//! qualification rates.
//!
//! An institute repeatedly screens individuals from two demographic groups
//! by thresholding a scalar feature, optionally subject to a static fairness
//! constraint (demographic parity or equal opportunity). Accepted and
//! rejected individuals change their latent qualification state according to
//! group-specific transition probabilities, which moves each group's
//! qualification rate and with it the next round's optimal thresholds.
//!
//! The crate provides:
//!
//! - parametric and tabulated feature distributions ([`dist`]),
//! - the group/scenario model, qualification profile and institutional
//!   utility ([`model`]),
//! - optimal threshold policies, unconstrained and fair ([`policy`]),
//! - forward simulation of the qualification-rate dynamics with convergence
//!   and oscillation detection ([`dynamics`]),
//! - equilibrium enumeration via balanced curves, uniqueness and stability
//!   diagnostics ([`equilibrium`]),
//! - long-run disparity comparisons across constraints and intervention
//!   analysis ([`analysis`]),
//! - a reduction from multivariate exponential-family features to the
//!   one-dimensional score ([`highdim`]),
//! - an extended single-group model where decisions also shape the next
//!   feature distribution ([`gendyn`]).
//!
//! The `qualdyn-cli` crate drives all of this from scenario config files;
//! the book under `book/` walks through the concepts with runnable
//! examples.

pub mod analysis;
pub mod dist;
pub mod dynamics;
pub mod equilibrium;
mod error;
pub mod gendyn;
pub mod highdim;
pub mod model;
pub mod policy;
pub mod root;
mod special;

pub use dist::{verify_mlr, FeatureDistribution, MlrCheck};
pub use dynamics::{detect_oscillation, g_ys, simulate, step, Termination, Trajectory};
pub use equilibrium::{
    balanced_functions, check_uniqueness, find_equilibria, h_func, lipschitz_estimate,
    stability_flags, BalancedFunctions, EquilibriumReport,
};
pub use error::{Error, Result};
pub use model::{
    classify_transitions, constraint_density, expected_utility, qualification_profile,
    FairnessConstraint, GroupId, GroupModel, QualState, Scenario, TransitionClass,
    TransitionMatrix,
};
pub use policy::{
    fair_policy_residual, fair_thresholds, threshold_map, unconstrained_threshold, Policy,
    PolicyMap, ThresholdPair,
};
