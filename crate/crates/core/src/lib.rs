pub mod backend;
pub mod cluster;
pub mod coherency;
pub mod generate;
pub mod morpho;
pub mod pipeline;
pub mod pmi;
pub mod templates;
pub mod text;
pub mod triple;
