pub mod analytics;
pub mod cli;
pub mod io;
pub mod model;
pub mod sim;
pub mod tick;
