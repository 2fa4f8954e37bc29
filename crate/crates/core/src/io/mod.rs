//! On-disk formats: velocity rasters, meshes, shot records and run configs.

mod config;
mod mesh;
mod shot;
mod velocity;

pub use config::{parse_config, parse_config_over, parse_config_str, parse_config_text, parse_pairs, MeshKind, RunConfig, KNOWN_KEYS};
pub use mesh::{mesh_to_string, read_mesh, write_mesh};
pub use shot::{read_shotrecord, shot_to_bytes, write_shotrecord};
pub use velocity::{read_velocity, write_velocity, VelocityModel};
