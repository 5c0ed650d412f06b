//! Measurements tying simulated trajectories to free-boundary estimates: AB margins, pressure
//! averages, expansion rates, convergence tables, covering counts and oscillation integrals.

pub mod ab;
pub mod convergence;
pub mod dimension;
pub mod expansion;
pub mod fit;
pub mod frames;
pub mod monotonicity;
pub mod oscillation;
pub mod probes;

pub use ab::{ab_check, ab_quantity, ab_tolerance, AbReport, AbRow};
pub use convergence::{
    compare_pair, convergence_report, good_part_cells, ConvergenceOptions, ConvergenceTable, PairReport, TimeRow,
};
pub use dimension::{auto_radii, covering_dimension, packing_count, packing_counts, DimensionBoundInputs, DimensionEstimate};
pub use expansion::{start_expansion_check, strict_expansion_measure, ExpansionReport, StartExpansionRow};
pub use fit::{geometric_ladder, power_law_fit, xy_csv, PowerFit};
pub use frames::{sample_cells, Frame, FrameSeries, SupportRule};
pub use monotonicity::{streamline_check, StreamlineReport};
pub use oscillation::{oscillation_integral, oscillation_propagation, OscillationReport};
pub use probes::{avg_pressure_probe, ball_average, ProbeTable};
