//! Disk domain, conductivity partition, conforming polar mesh and electrodes.

mod electrodes;
mod mesh;
mod partition;

pub use electrodes::{electrode_gap_stat, place_electrodes, Arc, ElectrodeSet};
pub use mesh::{mesh_disk, mesh_disk_with, BoundaryVertex, Mesh, MeshParams};
pub use partition::{build_partition, Layout, Partition, PartitionSpec};
