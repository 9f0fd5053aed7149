//! File formats: JSON instances and solutions, CSV sweep traces, and seeded
//! instance generation.

pub mod gen;
pub mod instance_file;
pub mod solution_file;
pub mod trace;

pub use gen::{gen_instance, GenModel, GenSpec};
pub use instance_file::{
    instance_json, load_instance, parse_instance, write_instance, InstanceFile, SCHEMA_VERSION,
};
pub use solution_file::{
    read_solution, solution_file, solution_json, write_solution, SolutionFile,
};
pub use trace::{emit_trace_csv, read_trace_csv, trace_csv_string};
