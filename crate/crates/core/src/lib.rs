//! Unit commitment and load dispatch for thermal fleets with pumped-storage
//! hydro, solved with differential evolution over repaired chromosomes.

pub mod cli;
pub mod constraints;
pub mod de;
pub mod encoding;
pub mod model;
pub mod oracle;
pub mod penalty;
pub mod repair;
