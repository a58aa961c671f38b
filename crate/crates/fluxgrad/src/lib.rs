//! File formats, a thread-pool executor and the `fluxgrad` command-line
//! driver on top of [`fluxgrad_core`].

pub mod cli;
pub mod io;
pub mod pool;

pub use pool::Pool;
