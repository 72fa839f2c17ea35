//! `clamr` command-line tool. Exit status: 0 success, 2 input error,
//! 3 sampler error, 4 lineage error. `CLAMR_THREADS` caps worker threads.
//!
//! Region spec document:
//!
//! ```json
//! {
//!   "features": [
//!     {"name": "il6",
//!      "regions": [{"label": "low", "lower": -3, "upper": -1},
//!                  {"label": "mid", "lower": -1, "upper": 1}],
//!      "allow_overlap": false,
//!      "xi": [-2, 0], "tau2": [0.26, 0.26], "rho": 0.7}
//!   ],
//!   "omega": 0.95, "gamma": 1, "L": 10, "variance_mode": "application"
//! }
//! ```
//!
//! `allow_overlap`, `xi`, `tau2` and `rho` are optional per feature; features
//! without `rho` are calibrated so the prior probability of the no-influence
//! hypothesis is 1/2. The draws store format is documented in `clamr::io`.

mod args;
mod commands;
mod error;
mod manifest;

use clap::Parser;

use args::{Cli, Command};

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Pretrain(a) => commands::pretrain(a),
        Command::Fit(a) => commands::fit(a),
        Command::Summarize(a) => commands::summarize(a),
        Command::Simulate(a) => commands::simulate_cmd(a),
        Command::Replicate(a) => commands::replicate(a),
    };
    if let Err(e) = result {
        eprintln!("clamr: {e}");
        std::process::exit(e.code());
    }
}
