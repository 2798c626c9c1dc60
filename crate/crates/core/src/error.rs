//! Crate-level error that composite operations (index build, evaluation) return.

use crate::cluster::ClusterError;
use crate::corpus::CorpusError;
use crate::evalbench::EvalError;
use crate::retrieve::SearchError;
use crate::store::StoreError;
use crate::tgraph::GraphError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
