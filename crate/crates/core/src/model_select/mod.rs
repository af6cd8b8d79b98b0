//! Stratified holdout, stratified k-fold plans and exhaustive grid search.

mod folds;
mod grid;
mod split;

pub use folds::{make_folds, FoldPlan};
pub use grid::{grid_search, GridPoint, ParamGrid, SearchResult};
pub use split::{stratified_split, stratified_subsample, SplitIndices};
