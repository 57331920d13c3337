//! Library side of the `bvdeg` command: suite configs, suite runners and
//! report files.

pub mod config;
pub mod output;
pub mod suites;
