pub mod imp;
pub mod spec;
pub mod termlib;

use crate::explore::explore;
use crate::lts::Lts;
use crate::{Action, CheckError};

pub use imp::{ImplModel, Mutant};
pub use spec::{EnterGuard, SpecModel, SpecState};
pub use termlib::TermLibModel;

pub fn build_spec_lts(threads: usize, guard: EnterGuard, cap: usize) -> Result<Lts, CheckError> {
    Ok(explore(&SpecModel { threads, guard }, cap)?.lts)
}

pub fn build_impl_lts(threads: usize, mutant: Mutant, cap: usize) -> Result<Lts, CheckError> {
    let model = ImplModel {
        mutant,
        ..ImplModel::new(threads)
    };
    Ok(explore(&model, cap)?.lts)
}

pub fn build_termlib_lts(threads: usize, terms: usize, addresses: usize, cap: usize) -> Result<Lts, CheckError> {
    Ok(explore(&TermLibModel::try_new(threads, terms, addresses)?, cap)?.lts)
}

/// Spec and implementation compared for divergence-preserving branching
/// bisimilarity. Internal steps are hidden; `improbable` is hidden too
/// unless `keep_improbable` is set. The implementation only reaches
/// `improbable` after an internal step that commits to it, so with the
/// label visible the two are never equivalent.
pub fn equivalence(
    threads: usize,
    guard: EnterGuard,
    mutant: Mutant,
    keep_improbable: bool,
    cap: usize,
) -> Result<crate::bisim::Equivalence, CheckError> {
    let hidden = |a: &Action| a.is_internal() || (!keep_improbable && *a == Action::Improbable);
    let spec = build_spec_lts(threads, guard, cap)?.hide(hidden);
    let imp = build_impl_lts(threads, mutant, cap)?.hide(hidden);
    crate::bisim::dpbb_equivalent(&spec, &imp)
}
